//! The arc-length law κ of the loops.
//!
//! A law is a finite pure point part plus a piecewise-constant density, all
//! supported in `(0, K]`. Expectations of the step functions that appear in
//! the loop-eigenvalue count are evaluated exactly, breakpoint by breakpoint.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{near_integer, strict_floor, Energy};

/// Tolerance on the total mass of a law.
pub const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("total mass is {0}, expected 1")]
    MassNotNormalized(f64),
    #[error("atom at {0} must have a positive finite length")]
    NonPositiveAtom(f64),
    #[error("weights and densities must be non-negative and finite (got {0})")]
    NegativeWeight(f64),
    #[error("duplicate atom at {0}")]
    DuplicateAtom(f64),
    #[error("density piece [{0}, {1}) is empty or reversed")]
    EmptyPiece(f64, f64),
    #[error("density pieces [{0}, {1}) and [{2}, {3}) overlap")]
    OverlappingPieces(f64, f64, f64, f64),
    #[error("support point {0} lies outside (0, {1}]")]
    OutsideSupport(f64, f64),
    #[error("distribution has neither atoms nor density")]
    Empty,
}

/// One point mass `p·δ_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub length: f64,
    pub weight: f64,
}

/// Constant density `height` on `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityPiece {
    pub start: f64,
    pub end: f64,
    pub height: f64,
}

impl DensityPiece {
    pub fn mass(&self) -> f64 {
        self.height * (self.end - self.start)
    }
}

/// An atom whose length resonates with a given energy: `s√E/π = order`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonantAtom {
    pub length: f64,
    pub weight: f64,
    pub order: u64,
}

#[derive(Debug, Clone, Copy)]
enum Segment {
    Atom(f64),
    Piece { start: f64, end: f64 },
}

/// Law of the half-arc-lengths ω_j. Immutable once built.
#[derive(Debug, Clone)]
pub struct ArcLengthDistribution {
    atoms: Vec<Atom>,
    pieces: Vec<DensityPiece>,
    support_bound: f64,
    // inverse-CDF table: cumulative mass at the end of each segment
    segments: Vec<(f64, Segment)>,
}

impl ArcLengthDistribution {
    /// Builds and validates a law. `support_bound` defaults to the largest
    /// support point.
    pub fn new(
        mut atoms: Vec<Atom>,
        mut pieces: Vec<DensityPiece>,
        support_bound: Option<f64>,
    ) -> Result<Self, DistributionError> {
        if atoms.is_empty() && pieces.is_empty() {
            return Err(DistributionError::Empty);
        }
        for a in &atoms {
            if !(a.length > 0.0) || !a.length.is_finite() {
                return Err(DistributionError::NonPositiveAtom(a.length));
            }
            if !(a.weight >= 0.0) || !a.weight.is_finite() {
                return Err(DistributionError::NegativeWeight(a.weight));
            }
        }
        for p in &pieces {
            if !(p.start >= 0.0) || !(p.end > p.start) || !p.end.is_finite() {
                return Err(DistributionError::EmptyPiece(p.start, p.end));
            }
            if !(p.height >= 0.0) || !p.height.is_finite() {
                return Err(DistributionError::NegativeWeight(p.height));
            }
        }
        atoms.sort_by(|a, b| a.length.total_cmp(&b.length));
        pieces.sort_by(|a, b| a.start.total_cmp(&b.start));
        for w in atoms.windows(2) {
            if w[0].length == w[1].length {
                return Err(DistributionError::DuplicateAtom(w[0].length));
            }
        }
        for w in pieces.windows(2) {
            if w[1].start < w[0].end {
                return Err(DistributionError::OverlappingPieces(
                    w[0].start, w[0].end, w[1].start, w[1].end,
                ));
            }
        }

        let largest = atoms
            .iter()
            .map(|a| a.length)
            .chain(pieces.iter().map(|p| p.end))
            .fold(0.0_f64, f64::max);
        let support_bound = support_bound.unwrap_or(largest);
        if let Some(a) = atoms.iter().find(|a| a.length > support_bound) {
            return Err(DistributionError::OutsideSupport(a.length, support_bound));
        }
        if let Some(p) = pieces.iter().find(|p| p.end > support_bound) {
            return Err(DistributionError::OutsideSupport(p.end, support_bound));
        }

        let total: f64 = atoms.iter().map(|a| a.weight).sum::<f64>()
            + pieces.iter().map(DensityPiece::mass).sum::<f64>();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(DistributionError::MassNotNormalized(total));
        }

        let mut segments = Vec::with_capacity(atoms.len() + pieces.len());
        let mut acc = 0.0;
        for a in atoms.iter().filter(|a| a.weight > 0.0) {
            acc += a.weight;
            segments.push((acc, Segment::Atom(a.length)));
        }
        for p in pieces.iter().filter(|p| p.height > 0.0) {
            acc += p.mass();
            segments.push((
                acc,
                Segment::Piece {
                    start: p.start,
                    end: p.end,
                },
            ));
        }

        Ok(Self {
            atoms,
            pieces,
            support_bound,
            segments,
        })
    }

    /// The periodic law `δ_s`.
    pub fn point_mass(length: f64) -> Result<Self, DistributionError> {
        Self::discrete(&[(length, 1.0)])
    }

    /// A finite convex combination of point masses given as `(s, p)` pairs.
    pub fn discrete(atoms: &[(f64, f64)]) -> Result<Self, DistributionError> {
        let atoms = atoms
            .iter()
            .map(|&(length, weight)| Atom { length, weight })
            .collect();
        Self::new(atoms, Vec::new(), None)
    }

    /// Uniform law on `[a, b)`.
    pub fn uniform(a: f64, b: f64) -> Result<Self, DistributionError> {
        let piece = DensityPiece {
            start: a,
            end: b,
            height: 1.0 / (b - a),
        };
        Self::new(Vec::new(), vec![piece], None)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn pieces(&self) -> &[DensityPiece] {
        &self.pieces
    }

    /// Supremum `K` of the support.
    pub fn support_bound(&self) -> f64 {
        self.support_bound
    }

    pub fn atomic_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    pub fn max_density(&self) -> f64 {
        self.pieces.iter().map(|p| p.height).fold(0.0, f64::max)
    }

    /// Mean arc length `∫ω dκ`.
    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight * a.length).sum::<f64>()
            + self
                .pieces
                .iter()
                .map(|p| p.height * 0.5 * (p.end * p.end - p.start * p.start))
                .sum::<f64>()
    }

    pub fn is_purely_atomic(&self) -> bool {
        self.pieces.iter().all(|p| p.height == 0.0)
    }

    /// Draws one arc length by inverse CDF over atoms then density pieces.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        let idx = self
            .segments
            .partition_point(|(upper, _)| *upper <= u)
            .min(self.segments.len() - 1);
        let lower = if idx == 0 { 0.0 } else { self.segments[idx - 1].0 };
        match self.segments[idx].1 {
            Segment::Atom(s) => s,
            Segment::Piece { start, end } => {
                let mass = self.segments[idx].0 - lower;
                let frac = ((u - lower) / mass).clamp(0.0, 1.0);
                let w = start + frac * (end - start);
                // keep strictly positive and inside [start, end)
                if w >= end {
                    end - (end - start) * f64::EPSILON
                } else if w <= 0.0 {
                    start.max(f64::MIN_POSITIVE)
                } else {
                    w
                }
            }
        }
    }

    /// Draws `count` i.i.d. lengths from stream 0 of `seed`.
    pub fn sample_sequence(&self, count: usize, seed: u64) -> SampleSequence {
        let mut rng = stream_rng(seed, 0);
        let values = (0..count).map(|_| self.sample(&mut rng)).collect();
        SampleSequence { values, seed }
    }

    /// Exact `∫ ⌈ω√E/π⌉ dκ(ω)` with the strict-floor convention.
    pub fn expect_step_count(&self, energy: Energy) -> f64 {
        let x = energy.sqrt() / PI;
        let atomic: f64 = self
            .atoms
            .iter()
            .map(|a| a.weight * strict_floor(a.length * x) as f64)
            .sum();
        let continuous: f64 = self
            .pieces
            .iter()
            .map(|p| p.height * (floor_primitive(p.end * x) - floor_primitive(p.start * x)) / x)
            .sum();
        atomic + continuous
    }

    /// Atoms whose ratio `s√E/π` is a positive integer (relative tolerance 1e-9).
    pub fn atoms_with_integer_ratio(&self, energy: Energy) -> Vec<ResonantAtom> {
        let x = energy.sqrt() / PI;
        self.atoms
            .iter()
            .filter_map(|a| match near_integer(a.length * x) {
                Some(n) if n >= 1 => Some(ResonantAtom {
                    length: a.length,
                    weight: a.weight,
                    order: n as u64,
                }),
                _ => None,
            })
            .collect()
    }

    /// `∫ f dκ` for a smooth `f`: exact on atoms, composite Gauss–Legendre on
    /// each density piece after splitting at `breakpoints` and into cells no
    /// wider than `max_cell`.
    pub fn expect_smooth<F: Fn(f64) -> f64>(&self, f: F, breakpoints: &[f64], max_cell: f64) -> f64 {
        let atomic: f64 = self.atoms.iter().map(|a| a.weight * f(a.length)).sum();
        let mut continuous = 0.0;
        for p in &self.pieces {
            let mut cuts: Vec<f64> = breakpoints
                .iter()
                .copied()
                .filter(|&b| b > p.start && b < p.end)
                .collect();
            cuts.insert(0, p.start);
            cuts.push(p.end);
            for w in cuts.windows(2) {
                let n = ((w[1] - w[0]) / max_cell).ceil().max(1.0) as usize;
                let h = (w[1] - w[0]) / n as f64;
                for i in 0..n {
                    let lo = w[0] + i as f64 * h;
                    continuous += p.height * gauss_legendre(&f, lo, lo + h);
                }
            }
        }
        atomic + continuous
    }
}

/// `∫₀^t ⌊u⌋ du`, continuous in `t`.
fn floor_primitive(t: f64) -> f64 {
    let f = t.floor();
    0.5 * f * (f - 1.0) + f * (t - f)
}

fn gauss_legendre<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    // five-point rule
    const NODES: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const WEIGHTS: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    NODES
        .iter()
        .zip(WEIGHTS.iter())
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// A reproducible draw of arc lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSequence {
    pub values: Vec<f64>,
    pub seed: u64,
}

/// Independent ChaCha stream for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bernoulli() -> ArcLengthDistribution {
        ArcLengthDistribution::discrete(&[(2.0, 0.5), (6.0, 0.5)]).unwrap()
    }

    fn e(v: f64) -> Energy {
        Energy::new(v).unwrap()
    }

    #[test]
    fn rejects_bad_laws() {
        assert!(matches!(
            ArcLengthDistribution::discrete(&[(2.0, 0.5)]),
            Err(DistributionError::MassNotNormalized(_))
        ));
        assert!(matches!(
            ArcLengthDistribution::discrete(&[(2.0, 0.5), (2.0, 0.5)]),
            Err(DistributionError::DuplicateAtom(_))
        ));
        assert!(matches!(
            ArcLengthDistribution::discrete(&[(-1.0, 1.0)]),
            Err(DistributionError::NonPositiveAtom(_))
        ));
        let overlapping = vec![
            DensityPiece { start: 0.5, end: 1.0, height: 1.0 },
            DensityPiece { start: 0.9, end: 1.4, height: 0.0 },
        ];
        assert!(matches!(
            ArcLengthDistribution::new(Vec::new(), overlapping, None),
            Err(DistributionError::OverlappingPieces(..))
        ));
        assert!(matches!(
            ArcLengthDistribution::new(
                vec![Atom { length: 3.0, weight: 1.0 }],
                Vec::new(),
                Some(2.0)
            ),
            Err(DistributionError::OutsideSupport(..))
        ));
        assert!(matches!(
            ArcLengthDistribution::new(Vec::new(), Vec::new(), None),
            Err(DistributionError::Empty)
        ));
    }

    #[test]
    fn deterministic_law_samples_its_atom() {
        let d = ArcLengthDistribution::point_mass(2.0).unwrap();
        assert_eq!(d.sample_sequence(5, 7).values, vec![2.0; 5]);
    }

    #[test]
    fn sequences_are_reproducible() {
        let d = ArcLengthDistribution::uniform(0.5, 1.5).unwrap();
        let a = d.sample_sequence(1000, 42);
        let b = d.sample_sequence(1000, 42);
        assert_eq!(a, b);
        assert_ne!(a.values, d.sample_sequence(1000, 43).values);
        assert!(a.values.iter().all(|&w| w > 0.0 && w <= d.support_bound()));
    }

    #[test]
    fn bernoulli_frequency_concentrates() {
        let n = 1_000_000;
        let s = bernoulli().sample_sequence(n, 11);
        let twos = s.values.iter().filter(|&&w| w == 2.0).count() as f64 / n as f64;
        let sigma = (0.25 / n as f64).sqrt();
        assert!((twos - 0.5).abs() < 3.0 * sigma, "frequency {twos}");
    }

    #[test]
    fn uniform_mean_concentrates() {
        let n = 1_000_000;
        let s = ArcLengthDistribution::uniform(0.5, 1.5)
            .unwrap()
            .sample_sequence(n, 12);
        let mean = s.values.iter().sum::<f64>() / n as f64;
        let sigma = (1.0 / 12.0 / n as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn step_count_bernoulli_at_pi_squared() {
        // ½⌈2⌉ + ½⌈6⌉ = ½·1 + ½·5
        assert_eq!(bernoulli().expect_step_count(e(PI * PI)), 3.0);
    }

    #[test]
    fn step_count_vanishes_below_first_loop_level() {
        for d in [
            bernoulli(),
            ArcLengthDistribution::uniform(0.5, 1.5).unwrap(),
            ArcLengthDistribution::point_mass(1.0).unwrap(),
        ] {
            let k = d.support_bound();
            let edge = PI * PI / (k * k);
            for frac in [1e-6, 0.1, 0.5, 0.999, 1.0] {
                assert_eq!(d.expect_step_count(e(edge * frac)), 0.0);
            }
        }
    }

    #[test]
    fn step_count_uniform_matches_monte_carlo() {
        // √E/π = 3, so the integrand is ⌈3ω⌉
        let d = ArcLengthDistribution::uniform(0.5, 1.5).unwrap();
        let exact = d.expect_step_count(e(9.0 * PI * PI));
        let n = 1_000_000;
        let s = d.sample_sequence(n, 5);
        let counts: Vec<f64> = s.values.iter().map(|&w| strict_floor(3.0 * w) as f64).collect();
        let mean = counts.iter().sum::<f64>() / n as f64;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let sigma = (var / n as f64).sqrt();
        assert!((exact - mean).abs() < 3.0 * sigma, "exact {exact} mc {mean} ± {sigma}");
        // ⌈3ω⌉ on [½, 3/2): 1 on [½,⅔), 2 on [⅔,1), 3 on [1,4/3), 4 on [4/3,3/2)
        let by_hand = 1.0 / 6.0 + 2.0 / 3.0 + 3.0 / 3.0 + 4.0 / 6.0;
        assert!((exact - by_hand).abs() < 1e-12);
    }

    #[test]
    fn integer_ratio_atoms() {
        let d = bernoulli();
        let both = d.atoms_with_integer_ratio(e((PI / 2.0).powi(2)));
        assert_eq!(both.len(), 2);
        assert_eq!(both[0].order, 1);
        assert_eq!(both[1].order, 3);
        let only_six = d.atoms_with_integer_ratio(e((PI / 6.0).powi(2)));
        assert_eq!(only_six.len(), 1);
        assert_eq!(only_six[0].length, 6.0);
        let u = ArcLengthDistribution::uniform(0.5, 1.5).unwrap();
        assert!(u.atoms_with_integer_ratio(e(PI * PI)).is_empty());
    }

    #[test]
    fn jumps_of_step_count_equal_resonant_mass() {
        let d = bernoulli();
        for k in 1..=12 {
            let jump_e = (PI * k as f64 / 6.0).powi(2);
            let left = d.expect_step_count(e(jump_e));
            let right = d.expect_step_count(e(jump_e * (1.0 + 1e-7)));
            let mass: f64 = d
                .atoms_with_integer_ratio(e(jump_e))
                .iter()
                .map(|a| a.weight)
                .sum();
            assert!((right - left - mass).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn expect_smooth_integrates_polynomials() {
        let d = ArcLengthDistribution::new(
            vec![Atom { length: 2.0, weight: 0.25 }],
            vec![DensityPiece { start: 0.5, end: 1.5, height: 0.75 }],
            None,
        )
        .unwrap();
        let got = d.expect_smooth(|w| w * w, &[1.0], 0.3);
        let want = 0.25 * 4.0 + 0.75 * (1.5f64.powi(3) - 0.5f64.powi(3)) / 3.0;
        assert!((got - want).abs() < 1e-13);
        assert!((d.mean() - d.expect_smooth(|w| w, &[], 1.0)).abs() < 1e-14);
    }
}
