//! Products of transfer matrices along sampled chains.
//!
//! A chain is absorbed loop by loop into a [`ChainAccumulator`], which keeps
//! the running product applied to `e₊ = (1, 0)` (or `e₋ = (0, 1)`) as a unit
//! vector plus the logarithm of the norms divided out so far. The argument of
//! the projected component is followed continuously: each step adds the
//! continuous single-loop phase of the diagonal entry and the principal
//! argument of the remaining factor, which for matrices of the form
//! `[[a, b], [conj(b), conj(a)]]` always lies in `(−π/2, π/2)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::distributions::{stream_rng, ArcLengthDistribution};
use crate::energy::Energy;
use crate::scattering::{
    continuous_arctan, flux_phase, inverse_transmission_phase, loop_amplitudes, loop_amplitudes_magnetic,
    transfer_matrix, ScatteringError, TransferMatrix, RESONANCE_SHIFT,
};

/// Limit on `|phase correction|` per step; the exact bound is π/2.
const PHASE_GUARD: f64 = PI - 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnsembleError {
    #[error("numerical overflow at step {0}")]
    Overflow(u64),
    #[error("phase increment out of range at step {0}")]
    PhaseJump(u64),
    #[error("could not form a transfer matrix at ω₀ = {omega}: {source}")]
    Scattering {
        omega: f64,
        #[source]
        source: ScatteringError,
    },
    #[error("chain length and realizations must be at least 1")]
    EmptyEnsemble,
}

/// Which basis vector the product acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    Plus,
    Minus,
}

impl Projection {
    fn index(self) -> usize {
        match self {
            Projection::Plus => 0,
            Projection::Minus => 1,
        }
    }
}

/// One loop's transfer matrix and the continuous phase of its `Λ₁₁` entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopFactor {
    pub matrix: TransferMatrix,
    pub phase: f64,
}

impl LoopFactor {
    /// Uses the principal argument of `Λ₁₁` as the phase.
    pub fn from_matrix(matrix: TransferMatrix) -> Self {
        let phase = matrix.entries[0][0].arg();
        Self { matrix, phase }
    }

    /// `Λ_{ω₀}(E)` in zero field.
    pub fn standard(energy: Energy, omega0: f64) -> Result<Self, ScatteringError> {
        let matrix = transfer_matrix(&loop_amplitudes(energy, omega0), energy)?;
        let phase = -energy.sqrt() - continuous_arctan(omega0 * energy.sqrt());
        Ok(Self { matrix, phase })
    }

    /// `Λ_{ω₀}(E)` in the field `B`. Energies where the loop is opaque or the
    /// matching problem is singular are shifted by a relative
    /// [`RESONANCE_SHIFT`] for this loop only.
    pub fn magnetic(energy: Energy, omega0: f64, field: f64) -> Result<Self, ScatteringError> {
        if field == 0.0 {
            return Self::standard(energy, omega0);
        }
        let flux = flux_phase(field, omega0);
        let mut shifted = energy;
        let mut last = ScatteringError::ResonantEnergy;
        for attempt in 0..4 {
            let built = loop_amplitudes_magnetic(shifted, omega0, field)
                .and_then(|triple| transfer_matrix(&triple, shifted));
            match built {
                Ok(matrix) => {
                    let phase = -shifted.sqrt() + inverse_transmission_phase(omega0 * shifted.sqrt(), flux);
                    return Ok(Self { matrix, phase });
                }
                Err(e) => last = e,
            }
            shifted = energy.perturbed(RESONANCE_SHIFT * 10f64.powi(attempt));
        }
        Err(last)
    }
}

/// Running state of `Π Λ_{ω_j} e±`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainAccumulator {
    projection: Projection,
    direction: [Complex64; 2],
    log_norm_sum: f64,
    unwrapped_phase: f64,
    steps: u64,
}

impl ChainAccumulator {
    pub fn new(projection: Projection) -> Self {
        let mut direction = [Complex64::new(0.0, 0.0); 2];
        direction[projection.index()] = Complex64::new(1.0, 0.0);
        Self {
            projection,
            direction,
            log_norm_sum: 0.0,
            unwrapped_phase: 0.0,
            steps: 0,
        }
    }

    pub fn projection(&self) -> Projection {
        self.projection
    }

    pub fn direction(&self) -> [Complex64; 2] {
        self.direction
    }

    pub fn log_norm_sum(&self) -> f64 {
        self.log_norm_sum
    }

    pub fn unwrapped_phase(&self) -> f64 {
        self.unwrapped_phase
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// `⟨e±, unit direction⟩`.
    pub fn projected(&self) -> Complex64 {
        self.direction[self.projection.index()]
    }

    /// `log |⟨e±, Π Λ e±⟩|`.
    pub fn log_magnitude(&self) -> f64 {
        self.log_norm_sum + self.projected().norm().ln()
    }

    /// Multiplies one loop into the product.
    pub fn accumulate(&mut self, factor: &LoopFactor) -> Result<(), EnsembleError> {
        let step = self.steps + 1;
        let m = &factor.matrix;
        if !m.is_finite() {
            return Err(EnsembleError::Overflow(step));
        }
        let idx = self.projection.index();
        let old = self.direction[idx];
        let next = m.apply(self.direction);
        let norm = (next[0].norm_sqr() + next[1].norm_sqr()).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(EnsembleError::Overflow(step));
        }

        // Λ₂₂ = conj(Λ₁₁), so e₋ follows the conjugate phase.
        let (diagonal, phase) = match self.projection {
            Projection::Plus => (m.entries[0][0], factor.phase),
            Projection::Minus => (m.entries[1][1], -factor.phase),
        };
        let correction = (next[idx] / (diagonal * old)).arg();
        if !correction.is_finite() {
            return Err(EnsembleError::Overflow(step));
        }
        if correction.abs() >= PHASE_GUARD {
            return Err(EnsembleError::PhaseJump(step));
        }

        self.direction = [next[0] / norm, next[1] / norm];
        self.log_norm_sum += norm.ln();
        self.unwrapped_phase += phase + correction;
        self.steps = step;
        Ok(())
    }
}

/// Mean and standard error of a finite-sample estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub chain_length: usize,
    pub realizations: usize,
}

impl EnsembleEstimate {
    /// Mean and `s/√n` of `values`, summed in order.
    pub fn from_samples(values: &[f64], chain_length: usize) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std_error,
            chain_length,
            realizations: n,
        }
    }
}

/// Chain length, realization count, seed and field for one estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleConfig {
    pub chain_length: usize,
    pub realizations: usize,
    pub seed: u64,
    pub field: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            chain_length: 100_000,
            realizations: 8,
            seed: 0,
            field: 0.0,
        }
    }
}

impl EnsembleConfig {
    pub fn new(chain_length: usize, realizations: usize, seed: u64) -> Self {
        Self {
            chain_length,
            realizations,
            seed,
            field: 0.0,
        }
    }

    pub fn with_field(mut self, field: f64) -> Self {
        self.field = field;
        self
    }

    fn validate(&self) -> Result<(), EnsembleError> {
        if self.chain_length == 0 || self.realizations == 0 {
            Err(EnsembleError::EmptyEnsemble)
        } else {
            Ok(())
        }
    }
}

/// RNG stream of realization `r` at grid point `point`.
pub fn stream_id(point: u64, realization: u64) -> u64 {
    (point << 32) | (realization & 0xffff_ffff)
}

/// Builds loop factors at a fixed energy, caching atoms.
pub struct FactorSource<'a> {
    dist: &'a ArcLengthDistribution,
    energy: Energy,
    field: f64,
    atoms: Vec<(f64, LoopFactor)>,
}

impl<'a> FactorSource<'a> {
    pub fn new(dist: &'a ArcLengthDistribution, energy: Energy, field: f64) -> Result<Self, EnsembleError> {
        let atoms = dist
            .atoms()
            .iter()
            .map(|a| {
                LoopFactor::magnetic(energy, a.length, field)
                    .map(|f| (a.length, f))
                    .map_err(|source| EnsembleError::Scattering {
                        omega: a.length,
                        source,
                    })
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            dist,
            energy,
            field,
            atoms,
        })
    }

    pub fn factor(&self, omega0: f64) -> Result<LoopFactor, EnsembleError> {
        if let Some((_, f)) = self.atoms.iter().find(|(s, _)| *s == omega0) {
            return Ok(*f);
        }
        LoopFactor::magnetic(self.energy, omega0, self.field).map_err(|source| EnsembleError::Scattering {
            omega: omega0,
            source,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<LoopFactor, EnsembleError> {
        self.factor(self.dist.sample(rng))
    }

    /// Absorbs `steps` freshly sampled loops.
    pub fn run<R: Rng + ?Sized>(
        &self,
        acc: &mut ChainAccumulator,
        steps: usize,
        rng: &mut R,
    ) -> Result<(), EnsembleError> {
        for _ in 0..steps {
            acc.accumulate(&self.sample(rng)?)?;
        }
        Ok(())
    }
}

/// Per-realization `γ̂` and `Ñ̂` from one chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainSample {
    pub gamma: f64,
    pub n_tilde: f64,
}

/// `γ̂ = log|⟨e±, ΠΛe±⟩| / M` and `Ñ̂ = ∓ phase / (πM)` of one accumulator.
pub fn chain_sample(acc: &ChainAccumulator) -> ChainSample {
    let m = acc.steps() as f64;
    let sign = match acc.projection() {
        Projection::Plus => -1.0,
        Projection::Minus => 1.0,
    };
    ChainSample {
        gamma: acc.log_magnitude() / m,
        n_tilde: sign * acc.unwrapped_phase() / (PI * m),
    }
}

/// Both estimates at one energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointEstimate {
    pub gamma: EnsembleEstimate,
    pub n_tilde: EnsembleEstimate,
}

/// Runs all realizations at grid point `point` and returns `γ̂` and `Ñ̂`.
pub fn estimate_point(
    dist: &ArcLengthDistribution,
    energy: Energy,
    config: &EnsembleConfig,
    point: u64,
    projection: Projection,
) -> Result<PointEstimate, EnsembleError> {
    config.validate()?;
    let source = FactorSource::new(dist, energy, config.field)?;
    let samples = (0..config.realizations as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(config.seed, stream_id(point, r));
            let mut acc = ChainAccumulator::new(projection);
            source.run(&mut acc, config.chain_length, &mut rng)?;
            Ok(chain_sample(&acc))
        })
        .collect::<Result<Vec<_>, EnsembleError>>()?;
    let gammas: Vec<f64> = samples.iter().map(|s| s.gamma).collect();
    let phases: Vec<f64> = samples.iter().map(|s| s.n_tilde).collect();
    Ok(PointEstimate {
        gamma: EnsembleEstimate::from_samples(&gammas, config.chain_length),
        n_tilde: EnsembleEstimate::from_samples(&phases, config.chain_length),
    })
}

/// Lyapunov exponent estimate at `energy`.
pub fn lyapunov(
    dist: &ArcLengthDistribution,
    energy: Energy,
    config: &EnsembleConfig,
    point: u64,
) -> Result<EnsembleEstimate, EnsembleError> {
    estimate_point(dist, energy, config, point, Projection::Plus).map(|p| p.gamma)
}

/// Estimate of the phase part `Ñ(E)` of the IDS, from `e₊`.
pub fn phase_density(
    dist: &ArcLengthDistribution,
    energy: Energy,
    config: &EnsembleConfig,
    point: u64,
) -> Result<EnsembleEstimate, EnsembleError> {
    estimate_point(dist, energy, config, point, Projection::Plus).map(|p| p.n_tilde)
}

/// `γ̂` over consecutive blocks of one long chain.
///
/// Each block contributes the growth of `log|⟨e₊, ΠΛe₊⟩|` over its loops
/// divided by `block_length`.
pub fn block_lyapunov(
    dist: &ArcLengthDistribution,
    energy: Energy,
    block_length: usize,
    blocks: usize,
    seed: u64,
) -> Result<Vec<f64>, EnsembleError> {
    if block_length == 0 || blocks == 0 {
        return Err(EnsembleError::EmptyEnsemble);
    }
    let source = FactorSource::new(dist, energy, 0.0)?;
    let mut rng = stream_rng(seed, 0);
    let mut acc = ChainAccumulator::new(Projection::Plus);
    let mut previous = 0.0;
    let mut out = Vec::with_capacity(blocks);
    for _ in 0..blocks {
        source.run(&mut acc, block_length, &mut rng)?;
        let current = acc.log_magnitude();
        out.push((current - previous) / block_length as f64);
        previous = current;
    }
    Ok(out)
}
