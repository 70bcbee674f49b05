//! The integrated density of states `N(E) = Ñ(E) + N^loop(E)`.
//!
//! `N^loop` counts loop eigenvalues and is computed exactly from the law;
//! every discontinuity of `N` sits there. `Ñ` and the Lyapunov exponent come
//! from [`crate::ensemble`].

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::distributions::ArcLengthDistribution;
use crate::energy::{near_integer, strict_floor, Energy, EnergyError};
use crate::ensemble::{estimate_point, EnsembleConfig, EnsembleError, Projection};
use crate::scattering::{continuous_arctan, flux_is_integral};

/// Relative distance below which two jump energies are the same.
pub const JUMP_MERGE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IdsError {
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error("energy grid must be non-empty, positive and strictly increasing")]
    BadGrid,
    #[error("at grid point {index} (E = {energy}): {source}")]
    Ensemble {
        index: usize,
        energy: f64,
        #[source]
        source: EnsembleError,
    },
    #[error("curve covers (0, {covered}] but the pairs need it to reach {needed}")]
    InsufficientCoverage { covered: f64, needed: f64 },
}

/// `N^loop(E) = ∫ ⌈ω₀√E/π⌉ dκ(ω₀)`.
pub fn loop_ids(dist: &ArcLengthDistribution, energy: Energy) -> f64 {
    dist.expect_step_count(energy)
}

/// Loop eigenvalue count in the field `B`: only atoms with `Bs²/π²`
/// integral keep their eigenvalues; the continuous part contributes nothing.
pub fn loop_ids_magnetic(dist: &ArcLengthDistribution, energy: Energy, field: f64) -> f64 {
    if field == 0.0 {
        return loop_ids(dist, energy);
    }
    let x = energy.sqrt() / PI;
    dist.atoms()
        .iter()
        .filter(|a| flux_is_integral(field, a.length))
        .map(|a| a.weight * strict_floor(a.length * x) as f64)
        .sum()
}

/// An atom's share of a jump: `E = (πk/s)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpContribution {
    pub length: f64,
    pub order: u64,
    pub weight: f64,
}

/// A discontinuity of `N` with the atoms producing it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpRecord {
    pub energy: f64,
    pub magnitude: f64,
    pub contributing_atoms: Vec<JumpContribution>,
}

/// All jumps of `N` up to `e_max`, sorted and merged.
pub fn jump_set(dist: &ArcLengthDistribution, e_max: f64, field: f64) -> Vec<JumpRecord> {
    let mut raw: Vec<(f64, JumpContribution)> = Vec::new();
    for atom in dist.atoms() {
        if atom.weight <= 0.0 || (field != 0.0 && !flux_is_integral(field, atom.length)) {
            continue;
        }
        let s = atom.length;
        let k_max = (s * e_max.sqrt() / PI).floor() as u64 + 1;
        for k in 1..=k_max {
            let energy = (PI * k as f64 / s).powi(2);
            if energy <= e_max {
                raw.push((
                    energy,
                    JumpContribution {
                        length: s,
                        order: k,
                        weight: atom.weight,
                    },
                ));
            }
        }
    }
    raw.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut out: Vec<JumpRecord> = Vec::new();
    for (energy, c) in raw {
        match out.last_mut() {
            Some(last) if (energy - last.energy).abs() <= JUMP_MERGE_TOL * energy => {
                last.magnitude += c.weight;
                last.contributing_atoms.push(c);
            }
            _ => out.push(JumpRecord {
                energy,
                magnitude: c.weight,
                contributing_atoms: vec![c],
            }),
        }
    }
    out
}

/// One grid point of a [`SpectralCurve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralPoint {
    pub energy: f64,
    pub n_loop: f64,
    pub n_tilde: f64,
    pub n_tilde_se: f64,
    pub n_total: f64,
    pub gamma: f64,
    pub gamma_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralCurve {
    pub points: Vec<SpectralPoint>,
    pub chain_length: usize,
    pub realizations: usize,
}

impl SpectralCurve {
    pub fn energies(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.energy).collect()
    }

    /// Linear interpolation of `γ̂` at `energy` inside the grid.
    pub fn gamma_at(&self, energy: f64) -> Option<f64> {
        interpolate(&self.points, energy, |p| p.gamma)
    }

    /// Maximal intervals over which `N_total` rises by at most `tolerance`
    /// plus three combined standard errors.
    ///
    /// Each interval spans whole grid cells and is then stretched into one
    /// adjacent cell by linear interpolation, using whatever part of the
    /// tolerance is left.
    pub fn plateaus(&self, tolerance: f64) -> Vec<(f64, f64)> {
        let pts = &self.points;
        let allowed = |i: usize, j: usize| {
            tolerance + 3.0 * (pts[i].n_tilde_se.powi(2) + pts[j].n_tilde_se.powi(2)).sqrt()
        };
        let mut out = Vec::new();
        let mut reach = 0;
        for i in 0..pts.len() {
            let mut j = i;
            while j + 1 < pts.len() && pts[j + 1].n_total - pts[i].n_total <= allowed(i, j + 1) {
                j += 1;
            }
            // keep only intervals not contained in an earlier one
            if j == i || j <= reach {
                continue;
            }
            reach = j;
            let budget = allowed(i, j) - (pts[j].n_total - pts[i].n_total);
            let stretch = |a: &SpectralPoint, b: &SpectralPoint| {
                let rise = b.n_total - a.n_total;
                let frac = if rise > budget { budget / rise } else { 1.0 };
                frac * (b.energy - a.energy)
            };
            let right = pts.get(j + 1).map_or(0.0, |b| stretch(&pts[j], b));
            let left = if i > 0 { stretch(&pts[i - 1], &pts[i]) } else { 0.0 };
            let (start, end) = if right >= left {
                (pts[i].energy, pts[j].energy + right)
            } else {
                (pts[i].energy - left, pts[j].energy)
            };
            out.push((start, end));
        }
        out
    }
}

fn interpolate(points: &[SpectralPoint], energy: f64, value: impl Fn(&SpectralPoint) -> f64) -> Option<f64> {
    let idx = points.partition_point(|p| p.energy < energy);
    if idx < points.len() && points[idx].energy == energy {
        return Some(value(&points[idx]));
    }
    if idx == 0 || idx == points.len() {
        return None;
    }
    let (a, b) = (&points[idx - 1], &points[idx]);
    let t = (energy - a.energy) / (b.energy - a.energy);
    Some(value(a) + t * (value(b) - value(a)))
}

/// `n` energies on `[e_min, e_max]`, uniform in `E` or in `√E`.
pub fn energy_grid(e_min: f64, e_max: f64, n: usize, sqrt_uniform: bool) -> Vec<f64> {
    if n == 1 {
        return vec![e_min];
    }
    let step = |i: usize| i as f64 / (n - 1) as f64;
    if sqrt_uniform {
        let (a, b) = (e_min.sqrt(), e_max.sqrt());
        (0..n).map(|i| (a + step(i) * (b - a)).powi(2)).collect()
    } else {
        (0..n).map(|i| e_min + step(i) * (e_max - e_min)).collect()
    }
}

fn validate_grid(grid: &[f64]) -> Result<(), IdsError> {
    let ok = !grid.is_empty()
        && grid.iter().all(|e| *e > 0.0 && e.is_finite())
        && grid.windows(2).all(|w| w[0] < w[1]);
    if ok {
        Ok(())
    } else {
        Err(IdsError::BadGrid)
    }
}

/// `N^loop`, `Ñ` and `γ` on `grid`.
///
/// Grid point `i` draws its chains from streams derived from `(seed, i)`, so
/// the result does not depend on how the points are scheduled.
pub fn full_curve(dist: &ArcLengthDistribution, grid: &[f64], config: &EnsembleConfig) -> Result<SpectralCurve, IdsError> {
    validate_grid(grid)?;
    let points = grid
        .par_iter()
        .enumerate()
        .map(|(index, &e)| {
            let energy = Energy::new(e)?;
            let est = estimate_point(dist, energy, config, index as u64, Projection::Plus).map_err(|source| {
                IdsError::Ensemble {
                    index,
                    energy: e,
                    source,
                }
            })?;
            let n_loop = loop_ids_magnetic(dist, energy, config.field);
            Ok(SpectralPoint {
                energy: e,
                n_loop,
                n_tilde: est.n_tilde.mean,
                n_tilde_se: est.n_tilde.std_error,
                n_total: n_loop + est.n_tilde.mean,
                gamma: est.gamma.mean,
                gamma_se: est.gamma.std_error,
            })
        })
        .collect::<Result<Vec<_>, IdsError>>()?;
    Ok(SpectralCurve {
        points,
        chain_length: config.chain_length,
        realizations: config.realizations,
    })
}

/// `∫_U^∞ log|(u²−E₁)/(u²−E₂)| du` via the primitive of `log(u² − a)`.
fn log_ratio_tail(u: f64, e1: f64, e2: f64) -> f64 {
    let primitive = |a: f64| {
        let r = a.sqrt();
        u * (u * u - a).ln() - 2.0 * u + r * ((u + r) / (u - r)).ln()
    };
    -(primitive(e1) - primitive(e2))
}

/// `[γ(E₁) − γ(E₂)] − ∫ log|(λ−E₁)/(λ−E₂)| dÑ(λ)` for each pair, with `γ`
/// interpolated from the curve.
pub fn thouless_residual(
    curve: &SpectralCurve,
    pairs: &[(f64, f64)],
    mean_length: f64,
) -> Result<Vec<f64>, IdsError> {
    let gamma = |e: f64| curve.gamma_at(e).unwrap_or(f64::NAN);
    thouless_residual_with(curve, pairs, mean_length, gamma)
}

/// As [`thouless_residual`] with `γ` supplied by the caller.
///
/// The integral is a Stieltjes sum over the increments of `Ñ` between grid
/// points (starting from `Ñ(0) = 0`) plus a tail beyond the last grid point
/// where `dÑ ≈ (1 + ⟨ω₀⟩) dλ / (2π√λ)`.
pub fn thouless_residual_with(
    curve: &SpectralCurve,
    pairs: &[(f64, f64)],
    mean_length: f64,
    gamma: impl Fn(f64) -> f64,
) -> Result<Vec<f64>, IdsError> {
    let pts = &curve.points;
    let covered = pts.last().map_or(0.0, |p| p.energy);
    let needed = pairs.iter().map(|(a, b)| a.max(*b)).fold(0.0, f64::max) * 4.0;
    if pts.is_empty() || covered < needed {
        return Err(IdsError::InsufficientCoverage { covered, needed });
    }
    let cut = covered;
    let mut cells = Vec::with_capacity(pts.len());
    let mut previous = (0.0, 0.0);
    for p in pts {
        cells.push((0.5 * (previous.0 + p.energy), p.n_tilde - previous.1));
        previous = (p.energy, p.n_tilde);
    }

    Ok(pairs
        .iter()
        .map(|&(e1, e2)| {
            if e1 == e2 {
                return 0.0;
            }
            let sum: f64 = cells
                .iter()
                .filter(|(_, dn)| *dn != 0.0)
                .map(|&(lambda, dn)| ((lambda - e1) / (lambda - e2)).abs().ln() * dn)
                .sum();
            let tail = (1.0 + mean_length) / PI * log_ratio_tail(cut.sqrt(), e1, e2);
            (gamma(e1) - gamma(e2)) - (sum + tail)
        })
        .collect())
}

/// `∫ Arctan((5/4) tan(ω₀√E)) dκ(ω₀)` on the continuous branch.
pub fn arctan_expectation(dist: &ArcLengthDistribution, energy: Energy) -> f64 {
    let k = energy.sqrt();
    let bound = dist.support_bound();
    let last = (bound * k / PI - 0.5).floor().max(-1.0) as i64;
    let breaks: Vec<f64> = (0..=last).map(|j| PI * (j as f64 + 0.5) / k).collect();
    let cell = (0.25 / k).min(0.05);
    dist.expect_smooth(|w| continuous_arctan(w * k), &breaks, cell)
}

/// Outcome of the two-sided estimate on `Ñ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateCheck {
    /// `max |Ñ − √E/π − (1/π)∫Arctan dκ|` over the grid.
    pub max_deviation: f64,
    /// `max (deviation − 3σ)`; the bound holds when this is at most ½.
    pub max_excess: f64,
}

pub fn estimate_check(dist: &ArcLengthDistribution, curve: &SpectralCurve) -> Result<EstimateCheck, IdsError> {
    let mut check = EstimateCheck {
        max_deviation: 0.0,
        max_excess: f64::NEG_INFINITY,
    };
    for p in &curve.points {
        let energy = Energy::new(p.energy)?;
        let reference = energy.sqrt() / PI + arctan_expectation(dist, energy) / PI;
        let dev = (p.n_tilde - reference).abs();
        check.max_deviation = check.max_deviation.max(dev);
        check.max_excess = check.max_excess.max(dev - 3.0 * p.n_tilde_se);
    }
    Ok(check)
}

/// `true` when every atom of the law has `Bs²/π²` integral.
pub fn field_keeps_all_jumps(dist: &ArcLengthDistribution, field: f64) -> bool {
    dist.atoms()
        .iter()
        .all(|a| near_integer(field * a.length * a.length / (PI * PI)).is_some())
}
