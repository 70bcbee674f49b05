//! Single-loop scattering data.
//!
//! One loop of half-arc-length `ω₀` between two half-lines scatters a plane
//! wave of wave number `k = √E` with amplitudes that depend only on
//! `θ = ω₀√E`:
//!
//! ```text
//! T = −8e^{iθ} / (e^{2iθ} − 9),   R = L = −3(e^{2iθ} − 1) / (e^{2iθ} − 9)
//! ```
//!
//! The loop plus the adjoining unit interval is encoded in the unimodular
//! transfer matrix
//!
//! ```text
//! Λ = ( e^{−ik}/T   −R/T        )
//!     ( L/T         e^{ik}/conj(T) )
//! ```
//!
//! which always has the form `[[a, b], [conj(b), conj(a)]]` with
//! `|a|² − |b|² = 1`. The magnetic variant replaces the right vertex
//! condition by a flux-dependent one and is solved numerically.

use std::f64::consts::PI;
use std::ops::Mul;

use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::energy::{near_integer, strict_floor, Energy};

/// Below this `|T|` a loop is treated as opaque.
pub const OPAQUE_THRESHOLD: f64 = 1e-14;

/// Relative shift applied to an energy to step off a resonance.
pub const RESONANCE_SHIFT: f64 = 1e-9;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScatteringError {
    #[error("opaque loop: |T| = {0:e} is too small to form a transfer matrix")]
    OpaqueLoop(f64),
    #[error("resonant energy: the wave-matching system is singular")]
    ResonantEnergy,
}

/// Transmission and reflection amplitudes of one loop.
///
/// `r` is reflected back into the left lead for a wave incident from the
/// left, `l` into the right lead for a wave incident from the right.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringTriple {
    pub t: Complex64,
    pub r: Complex64,
    pub l: Complex64,
}

impl ScatteringTriple {
    /// `max(| |T|²+|R|² − 1 |, | |T|²+|L|² − 1 |)`.
    pub fn unitarity_defect(&self) -> f64 {
        let t2 = self.t.norm_sqr();
        ((t2 + self.r.norm_sqr() - 1.0).abs()).max((t2 + self.l.norm_sqr() - 1.0).abs())
    }
}

/// A 2×2 complex matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix {
    pub entries: [[Complex64; 2]; 2],
}

impl TransferMatrix {
    pub fn new(a11: Complex64, a12: Complex64, a21: Complex64, a22: Complex64) -> Self {
        Self {
            entries: [[a11, a12], [a21, a22]],
        }
    }

    pub fn identity() -> Self {
        Self::new(ONE, ZERO, ZERO, ONE)
    }

    pub fn det(&self) -> Complex64 {
        let m = &self.entries;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn trace(&self) -> Complex64 {
        self.entries[0][0] + self.entries[1][1]
    }

    /// Inverse via the adjugate, dividing by the determinant.
    pub fn inverse(&self) -> Self {
        let m = &self.entries;
        let d = self.det();
        Self::new(m[1][1] / d, -m[0][1] / d, -m[1][0] / d, m[0][0] / d)
    }

    pub fn apply(&self, v: [Complex64; 2]) -> [Complex64; 2] {
        let m = &self.entries;
        [
            m[0][0] * v[0] + m[0][1] * v[1],
            m[1][0] * v[0] + m[1][1] * v[1],
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.entries
            .iter()
            .flatten()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.entries
            .iter()
            .flatten()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

impl Mul for TransferMatrix {
    type Output = TransferMatrix;

    fn mul(self, rhs: TransferMatrix) -> TransferMatrix {
        let a = &self.entries;
        let b = &rhs.entries;
        TransferMatrix::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

/// Vertex condition `A ψ + B ψ' = 0` on the three bonds meeting at a vertex,
/// ordered (lead, upper arc, lower arc), with `ψ'` the derivative pointing
/// away from the vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexBoundary {
    pub a: [[Complex64; 3]; 3],
    pub b: [[Complex64; 3]; 3],
}

impl VertexBoundary {
    /// Continuity plus Kirchhoff.
    pub fn standard() -> Self {
        Self::magnetic(0.0)
    }

    /// Right-vertex condition of a loop threaded by flux, in the symmetric
    /// gauge: `ψ₀ = e^{iβ}ψ₊ = e^{−iβ}ψ₋` and
    /// `ψ₀' + e^{iβ}ψ₊' + e^{−iβ}ψ₋' = 0`. The loop eigenvalues survive
    /// exactly when `β/π` is an integer.
    pub fn magnetic(phase: f64) -> Self {
        let e = Complex64::from_polar(1.0, phase);
        let ec = e.conj();
        Self {
            a: [[ONE, -e, ZERO], [ZERO, e, -ec], [ZERO, ZERO, ZERO]],
            b: [[ZERO, ZERO, ZERO], [ZERO, ZERO, ZERO], [ONE, e, ec]],
        }
    }

    /// `A B*` is Hermitian.
    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        let ab = self.a_b_star();
        (0..3).all(|i| (0..3).all(|j| (ab[i][j] - ab[j][i].conj()).norm() <= tol))
    }

    /// The 3×6 block `(A, B)` has rank 3.
    pub fn has_maximal_rank(&self, tol: f64) -> bool {
        let block = SMatrix::<Complex64, 3, 6>::from_fn(|i, j| {
            if j < 3 {
                self.a[i][j]
            } else {
                self.b[i][j - 3]
            }
        });
        block.rank(tol) == 3
    }

    fn a_b_star(&self) -> [[Complex64; 3]; 3] {
        let mut out = [[ZERO; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.a[i][k] * self.b[j][k].conj()).sum();
            }
        }
        out
    }
}

/// Closed-form amplitudes of a loop with standard vertices.
pub fn loop_amplitudes(energy: Energy, omega0: f64) -> ScatteringTriple {
    let theta = omega0 * energy.sqrt();
    let z = Complex64::from_polar(1.0, 2.0 * theta);
    let denom = z - 9.0;
    let t = -8.0 * Complex64::from_polar(1.0, theta) / denom;
    let r = -3.0 * (z - 1.0) / denom;
    ScatteringTriple { t, r, l: r }
}

/// Flux phase `β = Bω₀²/π` picked up across a loop of half-arc-length `ω₀`.
///
/// A loop of circumference `2ω₀` encloses area `ω₀²/π`.
pub fn flux_phase(field: f64, omega0: f64) -> f64 {
    field * omega0 * omega0 / PI
}

/// `true` when `Bω₀²/π²` is a non-negative integer (tolerance 1e-9), i.e. the
/// loop eigenvalues survive the field.
pub fn flux_is_integral(field: f64, omega0: f64) -> bool {
    matches!(near_integer(flux_phase(field, omega0) / PI), Some(n) if n >= 0)
}

/// Amplitudes of a loop whose right vertex carries the flux of a field `B`,
/// from the wave-matching linear system.
pub fn loop_amplitudes_magnetic(
    energy: Energy,
    omega0: f64,
    field: f64,
) -> Result<ScatteringTriple, ScatteringError> {
    let right = VertexBoundary::magnetic(flux_phase(field, omega0));
    solve_loop(energy, omega0, &VertexBoundary::standard(), &right)
}

/// Solves the scattering problem for one loop with arbitrary vertex
/// conditions.
///
/// Unknowns: outgoing amplitudes in the left and right leads and the two
/// plane-wave coefficients on each arc. The left lead is
/// `e^{ikx} + R e^{−ikx}` for `x ≤ 0`, the right lead `T e^{iky}` for `y ≥ 0`,
/// and the arcs run from the left vertex (x = 0) to the right one (x = ω₀).
pub fn solve_loop(
    energy: Energy,
    omega0: f64,
    left: &VertexBoundary,
    right: &VertexBoundary,
) -> Result<ScatteringTriple, ScatteringError> {
    let k = energy.sqrt();
    let ik = I * k;
    let ep = Complex64::from_polar(1.0, k * omega0);
    let em = ep.conj();

    // columns: out_left, out_right, a_up, b_up, a_down, b_down
    let mut m = SMatrix::<Complex64, 6, 6>::zeros();
    for r in 0..3 {
        let (a, b) = (left.a[r], left.b[r]);
        m[(r, 0)] = a[0] + b[0] * ik;
        for (arc, col) in [(1usize, 2usize), (2, 4)] {
            m[(r, col)] = a[arc] + b[arc] * ik;
            m[(r, col + 1)] = a[arc] - b[arc] * ik;
        }
        let q = r + 3;
        let (a, b) = (right.a[r], right.b[r]);
        m[(q, 1)] = a[0] + b[0] * ik;
        for (arc, col) in [(1usize, 2usize), (2, 4)] {
            m[(q, col)] = (a[arc] - b[arc] * ik) * ep;
            m[(q, col + 1)] = (a[arc] + b[arc] * ik) * em;
        }
    }

    // incoming e^{ikx} on the left lead, e^{−iky} on the right lead
    let mut from_left = SVector::<Complex64, 6>::zeros();
    let mut from_right = SVector::<Complex64, 6>::zeros();
    for r in 0..3 {
        from_left[r] = -(left.a[r][0] - left.b[r][0] * ik);
        from_right[r + 3] = -(right.a[r][0] - right.b[r][0] * ik);
    }

    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let lu = m.lu();
    let pivot = (0..6).map(|i| lu.u()[(i, i)].norm()).fold(f64::INFINITY, f64::min);
    if !(pivot > 1e-13 * scale) {
        return Err(ScatteringError::ResonantEnergy);
    }
    let xl = lu.solve(&from_left).ok_or(ScatteringError::ResonantEnergy)?;
    let xr = lu.solve(&from_right).ok_or(ScatteringError::ResonantEnergy)?;
    Ok(ScatteringTriple {
        t: xl[1],
        r: xl[0],
        l: xr[1],
    })
}

/// `Λ_{ω₀}(E)` from the amplitudes, including the unit-interval phases.
pub fn transfer_matrix(triple: &ScatteringTriple, energy: Energy) -> Result<TransferMatrix, ScatteringError> {
    let t = triple.t;
    if !(t.norm() >= OPAQUE_THRESHOLD) {
        return Err(ScatteringError::OpaqueLoop(t.norm()));
    }
    let phase = Complex64::from_polar(1.0, -energy.sqrt());
    Ok(TransferMatrix::new(
        phase / t,
        -triple.r / t,
        triple.l / t,
        phase.conj() / t.conj(),
    ))
}

/// The transfer matrix without the unit-interval phases,
/// `[[1/T, −R/T], [L/T, 1/conj(T)]]`.
pub fn bare_transfer_matrix(triple: &ScatteringTriple) -> Result<TransferMatrix, ScatteringError> {
    let t = triple.t;
    if !(t.norm() >= OPAQUE_THRESHOLD) {
        return Err(ScatteringError::OpaqueLoop(t.norm()));
    }
    Ok(TransferMatrix::new(ONE / t, -triple.r / t, triple.l / t, ONE / t.conj()))
}

/// Amplitudes of a loop of length `s1` relative to the background loop `s0`,
/// read off from `Λ(s1) Λ(s0)⁻¹` (bare transfer matrices).
pub fn relative_amplitudes(energy: Energy, s1: f64, s0: f64) -> Result<ScatteringTriple, ScatteringError> {
    let m1 = bare_transfer_matrix(&loop_amplitudes(energy, s1))?;
    let m0 = bare_transfer_matrix(&loop_amplitudes(energy, s0))?;
    let p = m1 * m0.inverse();
    let t = ONE / p.entries[0][0];
    Ok(ScatteringTriple {
        t,
        r: -p.entries[0][1] * t,
        l: p.entries[1][0] * t,
    })
}

/// Closed form `−3(e^{2is₁√E} − e^{2is₀√E}) / (e^{2is₁√E} − 9e^{2is₀√E})`.
pub fn relative_reflection(energy: Energy, s1: f64, s0: f64) -> Complex64 {
    let z1 = Complex64::from_polar(1.0, 2.0 * s1 * energy.sqrt());
    let z0 = Complex64::from_polar(1.0, 2.0 * s0 * energy.sqrt());
    -3.0 * (z1 - z0) / (z1 - 9.0 * z0)
}

fn wrap_to_pi(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

/// `Arctan((5/4) tan θ)` on the branch that is continuous in `θ` and
/// vanishes at 0.
///
/// Evaluated as `atan2(5 sin θ, 4 cos θ)` lifted to within π/2 of `θ`, which
/// is exact at `θ = π(k+½)` where the tangent blows up.
pub fn continuous_arctan(theta: f64) -> f64 {
    let principal = (5.0 * theta.sin()).atan2(4.0 * theta.cos());
    principal + 2.0 * PI * ((theta - principal) / (2.0 * PI)).round()
}

/// Spectral shift `ξ₀,₀(E; ω₀) = −(1/π)Arctan((5/4)tan θ) − ⌈θ/π⌉`.
pub fn spectral_shift(energy: Energy, omega0: f64) -> f64 {
    let theta = omega0 * energy.sqrt();
    -continuous_arctan(theta) / PI - strict_floor(theta / PI) as f64
}

/// Continuous phase of `1/T` for a loop at `θ = ω₀√E` carrying flux phase `β`.
///
/// For `β/π` integral this is `−Arctan((5/4)tan θ)`. Otherwise `1/T` has
/// poles at `θ ∈ πℕ` (the loop is opaque there); the scattering phase is then
/// fixed only modulo π and is continued through the poles as the continuous
/// argument of `sin θ·cos β / T = ½ sin 2θ + i(⅝ cos 2θ + ⅜ − cos²β)`, an
/// ellipse winding once clockwise around the origin per π in `θ`.
pub fn inverse_transmission_phase(theta: f64, flux: f64) -> f64 {
    if near_integer(flux / PI).is_some() {
        return -continuous_arctan(theta);
    }
    let c = flux.cos();
    let phi = 2.0 * theta;
    let x = 4.0 * phi.sin();
    let y = 5.0 * phi.cos() + 3.0 - 8.0 * c * c;
    let reference = 0.5 * PI - phi;
    reference + wrap_to_pi(y.atan2(x) - reference)
}

/// Hill discriminant `H(E) = (9/4)cos(√E(ω₀+1)) − (1/4)cos(√E(ω₀−1))` of the
/// periodic chain `ω_j ≡ ω₀`.
pub fn hill_discriminant(energy: Energy, omega0: f64) -> f64 {
    let k = energy.sqrt();
    2.25 * (k * (omega0 + 1.0)).cos() - 0.25 * (k * (omega0 - 1.0)).cos()
}

/// Band membership `|H(E)| ≤ 2` of the periodic chain.
pub fn in_band(energy: Energy, omega0: f64) -> bool {
    hill_discriminant(energy, omega0).abs() <= 2.0
}

/// Lyapunov exponent of the periodic chain: `log((|H| + √(H²−4))/2)` in gaps,
/// zero in bands.
pub fn periodic_lyapunov(energy: Energy, omega0: f64) -> f64 {
    let h = hill_discriminant(energy, omega0).abs();
    if h > 2.0 {
        ((h + (h * h - 4.0).sqrt()) / 2.0).ln()
    } else {
        0.0
    }
}
