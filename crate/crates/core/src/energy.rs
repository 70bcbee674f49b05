use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("energy must be positive and finite, got {0}")]
    NotPositive(f64),
}

/// A positive energy together with its square root (the wave number).
///
/// Every closed form in the model is a function of `√E`, so the root is taken
/// once at construction and threaded through.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Energy {
    value: f64,
    sqrt: f64,
}

impl Energy {
    pub fn new(value: f64) -> Result<Self, EnergyError> {
        if !(value > 0.0) || !value.is_finite() {
            return Err(EnergyError::NotPositive(value));
        }
        Ok(Self {
            value,
            sqrt: value.sqrt(),
        })
    }

    /// Builds the energy `k²` from the wave number `k` without re-rooting.
    pub fn from_sqrt(k: f64) -> Result<Self, EnergyError> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(EnergyError::NotPositive(k * k));
        }
        Ok(Self {
            value: k * k,
            sqrt: k,
        })
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.value
    }

    #[inline]
    pub fn sqrt(&self) -> f64 {
        self.sqrt
    }

    /// The same energy shifted by a relative amount, used to step off
    /// isolated resonances.
    pub fn perturbed(&self, relative: f64) -> Self {
        let value = self.value * (1.0 + relative);
        Self {
            value,
            sqrt: value.sqrt(),
        }
    }
}

/// Relative tolerance for deciding that a float ratio is an integer.
pub(crate) const INTEGER_RATIO_TOL: f64 = 1e-9;

/// Returns `Some(n)` when `t` is within relative [`INTEGER_RATIO_TOL`] of the
/// integer `n`.
pub(crate) fn near_integer(t: f64) -> Option<i64> {
    let n = t.round();
    let scale = t.abs().max(1.0);
    if (t - n).abs() <= INTEGER_RATIO_TOL * scale {
        Some(n as i64)
    } else {
        None
    }
}

/// Largest integer strictly smaller than `t > 0` (so `2 ↦ 1`, `2.5 ↦ 2`).
///
/// Arguments within relative 1e-9 of a positive integer are treated as that
/// integer, so energies built as `(πk/s)²` land on the left limit of the step.
pub fn strict_floor(t: f64) -> i64 {
    match near_integer(t) {
        Some(n) if n >= 1 => n - 1,
        _ => t.floor() as i64,
    }
}
