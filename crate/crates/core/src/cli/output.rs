use std::fmt::Write as _;

use crate::ids::{JumpRecord, SpectralCurve};

/// 17 significant digits, enough to round-trip an `f64`.
pub fn number(x: f64) -> String {
    format!("{x:.16e}")
}

pub const CURVE_HEADER: &str = "E,N_loop,N_tilde,N_tilde_se,N_total,gamma,gamma_se";

pub fn curve_csv(curve: &SpectralCurve) -> String {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for p in &curve.points {
        let row = [p.energy, p.n_loop, p.n_tilde, p.n_tilde_se, p.n_total, p.gamma, p.gamma_se]
            .map(number)
            .join(",");
        out.push_str(&row);
        out.push('\n');
    }
    out
}

/// Atoms are listed as `s:k:p` separated by `;`.
pub fn jumps_csv(jumps: &[JumpRecord]) -> String {
    let mut out = String::from("E,magnitude,atoms\n");
    for j in jumps {
        let atoms: Vec<String> = j
            .contributing_atoms
            .iter()
            .map(|c| format!("{}:{}:{}", c.length, c.order, c.weight))
            .collect();
        let _ = writeln!(out, "{},{},{}", number(j.energy), number(j.magnitude), atoms.join(";"));
    }
    out
}

pub fn bands_csv(rows: &[(f64, f64, bool)]) -> String {
    let mut out = String::from("E,H,in_band\n");
    for &(e, h, band) in rows {
        let _ = writeln!(out, "{},{},{}", number(e), number(h), band);
    }
    out
}

/// Static line plot with axes and min/max tick labels.
pub fn line_plot(xs: &[f64], ys: &[f64], title: &str, x_label: &str, y_label: &str) -> String {
    const W: f64 = 800.0;
    const H: f64 = 500.0;
    const PAD: f64 = 60.0;
    let range = |v: &[f64]| {
        let lo = v.iter().copied().filter(|x| x.is_finite()).fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().filter(|x| x.is_finite()).fold(f64::NEG_INFINITY, f64::max);
        match (lo.is_finite(), hi > lo) {
            (true, true) => (lo, hi),
            (true, false) => (lo - 0.5, lo + 0.5),
            _ => (0.0, 1.0),
        }
    };
    let (x0, x1) = range(xs);
    let (y0, y1) = range(ys);
    let px = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let py = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let points: Vec<String> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
        .collect();

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<path d="M{PAD},{top} L{PAD},{bottom} L{right},{bottom}" stroke="black" fill="none"/>"#,
        top = PAD,
        bottom = H - PAD,
        right = W - PAD
    );
    let _ = writeln!(
        svg,
        r#"<polyline points="{}" stroke="steelblue" stroke-width="1.2" fill="none"/>"#,
        points.join(" ")
    );
    let text = |svg: &mut String, x: f64, y: f64, anchor: &str, s: &str| {
        let _ = writeln!(
            svg,
            r#"<text x="{x:.1}" y="{y:.1}" font-family="sans-serif" font-size="12" text-anchor="{anchor}">{s}</text>"#
        );
    };
    text(&mut svg, W / 2.0, PAD / 2.0, "middle", title);
    text(&mut svg, W / 2.0, H - 15.0, "middle", x_label);
    text(&mut svg, 15.0, H / 2.0, "start", y_label);
    text(&mut svg, PAD, H - PAD + 18.0, "middle", &format!("{x0:.3}"));
    text(&mut svg, W - PAD, H - PAD + 18.0, "middle", &format!("{x1:.3}"));
    text(&mut svg, PAD - 6.0, H - PAD, "end", &format!("{y0:.3}"));
    text(&mut svg, PAD - 6.0, PAD, "end", &format!("{y1:.3}"));
    svg.push_str("</svg>\n");
    svg
}
