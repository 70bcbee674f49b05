//! Desk-scale invariant checks behind `necklace verify`.

use std::f64::consts::PI;

use rand::Rng;

use crate::distributions::{stream_rng, ArcLengthDistribution};
use crate::energy::Energy;
use crate::ensemble::{
    block_lyapunov, estimate_point, ChainAccumulator, EnsembleConfig, EnsembleEstimate, FactorSource, Projection,
};
use crate::ids::{estimate_check, full_curve, jump_set, loop_ids, energy_grid};
use crate::scattering::{
    hill_discriminant, loop_amplitudes, loop_amplitudes_magnetic, periodic_lyapunov, transfer_matrix, TransferMatrix,
    VertexBoundary,
};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name, passed, detail }
}

fn e(v: f64) -> Energy {
    Energy::new(v).expect("positive energy")
}

fn bernoulli() -> ArcLengthDistribution {
    ArcLengthDistribution::discrete(&[(2.0, 0.5), (6.0, 0.5)]).expect("valid law")
}

fn uniform() -> ArcLengthDistribution {
    ArcLengthDistribution::uniform(0.5, 1.5).expect("valid law")
}

/// Runs every check with chains of at most `chain_length` loops.
pub fn run_suite(chain_length: usize, seed: u64) -> Vec<CheckResult> {
    let m = chain_length.clamp(100, 20_000);
    vec![
        unitarity(seed),
        magnetic_reduction(seed),
        vertex_conditions(),
        direct_product(seed),
        chain_splitting(seed),
        periodic_oracle(m),
        projections_agree(m, seed),
        monotone_ids(m, seed),
        jumps_live_in_loop_ids(),
        magnetic_thinning(),
        symmetries(m, seed),
        self_averaging(m, seed),
        estimate_bound(m, seed),
        periodic_gaps(m),
    ]
}

fn unitarity(seed: u64) -> CheckResult {
    let mut rng = stream_rng(seed, 1);
    let mut worst = 0.0f64;
    for _ in 0..2000 {
        let energy = e(rng.gen_range(1e-6..200.0));
        let omega = rng.gen_range(1e-6..6.0);
        let s = loop_amplitudes(energy, omega);
        let det = transfer_matrix(&s, energy).map(|l| (l.det().re - 1.0).abs() + l.det().im.abs());
        worst = worst.max(s.unitarity_defect()).max(det.unwrap_or(f64::INFINITY));
    }
    check("unitarity and det Λ = 1", worst < 1e-12, format!("max defect {worst:.2e}"))
}

fn magnetic_reduction(seed: u64) -> CheckResult {
    let mut rng = stream_rng(seed, 2);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let energy = e(rng.gen_range(1e-3..200.0));
        let omega = rng.gen_range(0.05..6.0);
        let closed = loop_amplitudes(energy, omega);
        match loop_amplitudes_magnetic(energy, omega, 0.0) {
            Ok(s) => {
                let d = (s.t - closed.t).norm().max((s.r - closed.r).norm()).max((s.l - closed.l).norm());
                worst = worst.max(d);
            }
            Err(_) => worst = f64::INFINITY,
        }
    }
    check("magnetic solver at B = 0", worst < 1e-10, format!("max deviation {worst:.2e}"))
}

fn vertex_conditions() -> CheckResult {
    let ok = (0..32).all(|i| {
        let v = VertexBoundary::magnetic(i as f64 * 0.2);
        v.is_self_adjoint(1e-14) && v.has_maximal_rank(1e-10)
    });
    check("vertex conditions self-adjoint", ok, String::new())
}

fn direct_product(seed: u64) -> CheckResult {
    let dist = uniform();
    let mut worst = 0.0f64;
    for ev in [0.7, 5.0, 33.0, 150.0] {
        let Ok(source) = FactorSource::new(&dist, e(ev), 0.0) else {
            return check("30-step product", false, "cannot build factors".into());
        };
        let mut rng = stream_rng(seed, 3);
        let mut product = TransferMatrix::identity();
        let mut acc = ChainAccumulator::new(Projection::Plus);
        for _ in 0..30 {
            let Ok(f) = source.sample(&mut rng) else {
                return check("30-step product", false, "cannot build factors".into());
            };
            product = f.matrix * product;
            if acc.accumulate(&f).is_err() {
                return check("30-step product", false, "accumulator aborted".into());
            }
        }
        let rebuilt = acc.log_norm_sum().exp() * acc.projected().norm();
        let d = acc.direction();
        worst = worst
            .max((rebuilt / product.entries[0][0].norm() - 1.0).abs())
            .max((d[0].norm_sqr() + d[1].norm_sqr() - 1.0).abs());
    }
    check("30-step product vs direct", worst < 1e-8, format!("max relative error {worst:.2e}"))
}

fn chain_splitting(seed: u64) -> CheckResult {
    let dist = bernoulli();
    let Ok(source) = FactorSource::new(&dist, e(7.3), 0.0) else {
        return check("chain splitting", false, "cannot build factors".into());
    };
    let mut whole = ChainAccumulator::new(Projection::Plus);
    let a = source.run(&mut whole, 2000, &mut stream_rng(seed, 4));
    let mut split = ChainAccumulator::new(Projection::Plus);
    let mut rng = stream_rng(seed, 4);
    let b = source.run(&mut split, 700, &mut rng).and_then(|_| source.run(&mut split, 1300, &mut rng));
    check("chain splitting bit-identical", a.is_ok() && b.is_ok() && whole == split, String::new())
}

fn periodic_oracle(m: usize) -> CheckResult {
    let dist = ArcLengthDistribution::point_mass(1.0).expect("valid law");
    let config = EnsembleConfig::new(m, 1, 0);
    let mut worst = 0.0f64;
    for i in 1..=40 {
        let energy = e(1.25 * i as f64);
        match estimate_point(&dist, energy, &config, i, Projection::Plus) {
            Ok(p) => worst = worst.max((p.gamma.mean - periodic_lyapunov(energy, 1.0)).abs() * m as f64),
            Err(_) => worst = f64::INFINITY,
        }
    }
    check("periodic chain vs Hill oracle", worst < 5.0, format!("max |Δγ|·M = {worst:.2}"))
}

fn projections_agree(m: usize, seed: u64) -> CheckResult {
    let dist = uniform();
    let config = EnsembleConfig::new(m, 4, seed);
    let mut worst = f64::NEG_INFINITY;
    for (i, ev) in [0.5, 3.0, 17.0, 60.0].into_iter().enumerate() {
        let plus = estimate_point(&dist, e(ev), &config, i as u64, Projection::Plus);
        let minus = estimate_point(&dist, e(ev), &config, i as u64, Projection::Minus);
        let (Ok(p), Ok(q)) = (plus, minus) else {
            return check("e₊ and e₋ agree", false, "ensemble aborted".into());
        };
        let tol = 3.0 * p.n_tilde.std_error.hypot(q.n_tilde.std_error) + 1.0 / m as f64;
        worst = worst.max((p.n_tilde.mean - q.n_tilde.mean).abs() - tol);
    }
    check("e₊ and e₋ agree", worst <= 0.0, format!("max excess {worst:.2e}"))
}

fn monotone_ids(m: usize, seed: u64) -> CheckResult {
    let grid = energy_grid(0.1, 40.0, 60, false);
    let config = EnsembleConfig::new(m, 4, seed);
    let mut worst = f64::NEG_INFINITY;
    for dist in [uniform(), bernoulli()] {
        let Ok(curve) = full_curve(&dist, &grid, &config) else {
            return check("N monotone", false, "ensemble aborted".into());
        };
        for w in curve.points.windows(2) {
            let tol = 3.0 * w[0].n_tilde_se.hypot(w[1].n_tilde_se) + 1.0 / m as f64;
            worst = worst.max(w[0].n_total - w[1].n_total - tol).max(w[0].n_loop - w[1].n_loop);
        }
    }
    check("N monotone", worst <= 0.0, format!("max decrease beyond tolerance {worst:.2e}"))
}

fn jumps_live_in_loop_ids() -> CheckResult {
    let dist = bernoulli();
    let jumps = jump_set(&dist, 200.0, 0.0);
    let mut ok = !jumps.is_empty();
    let mut previous = 0.0;
    for j in &jumps {
        let below = loop_ids(&dist, e(j.energy * (1.0 - 1e-7)));
        let above = loop_ids(&dist, e(j.energy * (1.0 + 1e-7)));
        ok &= above - below == j.magnitude;
        // constant between jumps
        let mid = 0.5 * (previous + j.energy);
        if previous > 0.0 {
            ok &= loop_ids(&dist, e(mid)) == loop_ids(&dist, e(previous * (1.0 + 1e-7)));
        }
        previous = j.energy;
    }
    check("jumps of N sit in N_loop", ok, format!("{} jumps up to E = 200", jumps.len()))
}

fn magnetic_thinning() -> CheckResult {
    let dist = bernoulli();
    let free = jump_set(&dist, 100.0, 0.0);
    let mut ok = true;
    for i in 0..200 {
        let field = i as f64 * 0.05;
        for j in jump_set(&dist, 100.0, field) {
            ok &= free.iter().any(|f| f.energy == j.energy && f.magnitude >= j.magnitude);
        }
    }
    ok &= jump_set(&dist, 100.0, PI * PI / 4.0) == free;
    ok &= jump_set(&dist, 100.0, PI * PI / 8.0).is_empty();
    check("magnetic jump set is a subset", ok, String::new())
}

fn symmetric_pair(dist: &ArcLengthDistribution, a: f64, b: f64, m: usize, seed: u64) -> Option<(EnsembleEstimate, EnsembleEstimate)> {
    let config = EnsembleConfig::new(m, 4, seed);
    let x = estimate_point(dist, e(a), &config, 0, Projection::Plus).ok()?;
    let y = estimate_point(dist, e(b), &config, 0, Projection::Plus).ok()?;
    Some((x.gamma, y.gamma))
}

fn symmetries(m: usize, seed: u64) -> CheckResult {
    let dist = bernoulli();
    let mut rng = stream_rng(seed, 5);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..10 {
        let k = rng.gen_range(0.05..PI - 0.05);
        for image in [k + PI, 2.0 * PI - k] {
            let Some((a, b)) = symmetric_pair(&dist, k * k, image * image, m, seed) else {
                return check("√E symmetries of γ", false, "ensemble aborted".into());
            };
            let tol = 3.0 * a.std_error.hypot(b.std_error) + 1e-9;
            worst = worst.max((a.mean - b.mean).abs() - tol);
        }
    }
    check("√E symmetries of γ", worst <= 0.0, format!("max excess {worst:.2e}"))
}

fn self_averaging(m: usize, seed: u64) -> CheckResult {
    let dist = uniform();
    let spread = |len: usize| -> Option<f64> {
        let blocks = block_lyapunov(&dist, e((PI * 1.5).powi(2)), len, 64, seed).ok()?;
        Some(EnsembleEstimate::from_samples(&blocks, len).std_error)
    };
    let short = (m / 16).max(50);
    match (spread(short), spread(4 * short)) {
        (Some(a), Some(b)) if b > 0.0 => {
            let ratio = a / b;
            check(
                "self-averaging ~ M^-1/2",
                (1.4..=2.8).contains(&ratio),
                format!("std error ratio for 4x blocks {ratio:.2}"),
            )
        }
        _ => check("self-averaging ~ M^-1/2", false, "ensemble aborted".into()),
    }
}

fn estimate_bound(m: usize, seed: u64) -> CheckResult {
    let grid = energy_grid(0.2, 40.0, 40, false);
    let config = EnsembleConfig::new(m, 4, seed);
    let mut worst = f64::NEG_INFINITY;
    for dist in [uniform(), bernoulli()] {
        let Ok(curve) = full_curve(&dist, &grid, &config) else {
            return check("two-sided estimate on Ñ", false, "ensemble aborted".into());
        };
        match estimate_check(&dist, &curve) {
            Ok(c) => worst = worst.max(c.max_excess),
            Err(_) => return check("two-sided estimate on Ñ", false, "bad grid".into()),
        }
    }
    check("two-sided estimate on Ñ", worst <= 0.5, format!("max deviation − 3σ = {worst:.3}"))
}

fn periodic_gaps(m: usize) -> CheckResult {
    let dist = ArcLengthDistribution::point_mass(1.0).expect("valid law");
    let grid = energy_grid(0.05, 30.0, 300, false);
    let config = EnsembleConfig::new(m, 2, 0);
    let Ok(curve) = full_curve(&dist, &grid, &config) else {
        return check("periodic gaps are flat", false, "ensemble aborted".into());
    };
    let slack = 5.0 / m as f64;
    let mut worst = f64::NEG_INFINITY;
    for w in curve.points.windows(2) {
        let (h0, h1) = (hill_discriminant(e(w[0].energy), 1.0), hill_discriminant(e(w[1].energy), 1.0));
        if h0.abs() > 2.0 && h1.abs() > 2.0 && h0.signum() == h1.signum() {
            let tol = 2.0 * w[0].n_tilde_se.hypot(w[1].n_tilde_se) + slack;
            worst = worst.max((w[1].n_total - w[0].n_total).abs() - tol);
        }
        if h0.abs() > 2.0 {
            worst = worst.max((h0.abs() / 2.0).acosh() - 3.0 * w[0].gamma_se - slack - w[0].gamma);
        }
    }
    check("periodic gaps are flat", worst <= 0.0, format!("max excess {worst:.2e}"))
}

pub fn render_table(results: &[CheckResult]) -> String {
    let width = results.iter().map(|r| r.name.chars().count()).max().unwrap_or(0);
    let mut out = String::new();
    for r in results {
        let pad = width - r.name.chars().count();
        out.push_str(&format!(
            "{}{}  {}  {}\n",
            r.name,
            " ".repeat(pad),
            if r.passed { "PASS" } else { "FAIL" },
            r.detail
        ));
    }
    out
}
