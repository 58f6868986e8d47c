//! Scatter of the three support series against feature rank, as SVG.

use std::fmt::Write;

use super::CaseStudy;
use crate::support::{convert_units, Unit};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 70.0;
const REFERENCE_NATS: f64 = 5.0;

fn nice_step(range: f64, target: usize) -> f64 {
    let raw = range / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let nice = if f <= 1.0 {
        1.0
    } else if f <= 2.0 {
        2.0
    } else if f <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

/// Tick positions covering `[lo, hi]` at a 1-2-5 step.
pub(crate) fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 1.0, lo + 1.0) };
    let step = nice_step(hi - lo, target);
    let start = (lo / step).floor() as i64;
    let end = (hi / step).ceil() as i64;
    (start..=end).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 { 0 } else { (-step.log10().floor()) as usize };
    let s = format!("{v:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

/// 800x600 scatter: x is the rank of `t_abs`, y the minimax, simultaneous
/// and upper-bound supports in the study's unit. A dashed line marks
/// support 5 when the unit is nats.
pub fn render_figure(study: &CaseStudy) -> String {
    let unit = study.metadata.units;
    let mut rows: Vec<(f64, [f64; 3])> = study
        .features
        .iter()
        .filter_map(|f| {
            let t = f.t_abs?;
            let s = f.support_nats?.finite()?;
            let m = f.simultaneous_nats?.finite()?;
            let u = f.upper_bound_nats?.finite()?;
            Some((t, [s, m, u].map(|v| convert_units(v, unit))))
        })
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));

    let reference = (unit == Unit::Nats).then_some(REFERENCE_NATS);
    let mut lo = rows.iter().flat_map(|r| r.1).fold(f64::INFINITY, f64::min);
    let mut hi = rows.iter().flat_map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    if let Some(r) = reference {
        lo = lo.min(r);
        hi = hi.max(r);
    }
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    let yticks = nice_ticks(lo, hi, 6);
    let (ylo, yhi) = (yticks[0], *yticks.last().unwrap());
    let n = rows.len().max(1);
    let xticks: Vec<f64> = nice_ticks(1.0, n as f64, 8)
        .into_iter()
        .filter(|&x| x >= 1.0 && x <= n as f64)
        .collect();
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| {
        if n == 1 {
            LEFT + plot_w / 2.0
        } else {
            LEFT + (x - 1.0) / (n as f64 - 1.0) * plot_w
        }
    };
    let sy = |y: f64| TOP + (yhi - y) / (yhi - ylo) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let ystep = if yticks.len() > 1 { yticks[1] - yticks[0] } else { 1.0 };
    for &y in &yticks {
        let py = sy(y);
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT - 5.0,
            LEFT - 8.0,
            py + 4.0,
            tick_label(y, ystep)
        );
    }
    let xstep = if xticks.len() > 1 { xticks[1] - xticks[0] } else { 1.0 };
    for &x in &xticks {
        let px = sx(x);
        let base = TOP + plot_h;
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{base:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            base + 5.0,
            base + 20.0,
            tick_label(x, xstep)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">feature rank by |t|</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 25.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">support ({})</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        unit.name()
    );
    if let Some(r) = reference {
        let py = sy(r);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#888888" stroke-dasharray="6 4"/><text x="{:.2}" y="{:.2}" fill="#555555">S* = 5</text>"##,
            LEFT + plot_w,
            LEFT + 6.0,
            py - 5.0
        );
    }

    let series = [
        ("minimax (NMWL)", "#1f77b4"),
        ("simultaneous", "#ff7f0e"),
        ("upper bound", "#2ca02c"),
    ];
    for (k, (_, color)) in series.iter().enumerate() {
        let _ = writeln!(s, r#"<g fill="{color}" stroke="{color}">"#);
        for (i, (_, ys)) in rows.iter().enumerate() {
            let (px, py) = (sx((i + 1) as f64), sy(ys[k]));
            let _ = writeln!(s, "{}", marker(k, px, py));
        }
        let _ = writeln!(s, "</g>");
    }
    let lx = WIDTH - RIGHT + 20.0;
    for (k, (name, color)) in series.iter().enumerate() {
        let ly = TOP + 15.0 + 22.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<g fill="{color}" stroke="{color}">{}</g><text x="{:.2}" y="{:.2}">{name}</text>"#,
            marker(k, lx, ly),
            lx + 12.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

fn marker(kind: usize, x: f64, y: f64) -> String {
    match kind {
        0 => format!(r#"<circle cx="{x:.2}" cy="{y:.2}" r="4"/>"#),
        1 => format!(r#"<rect x="{:.2}" y="{:.2}" width="7" height="7"/>"#, x - 3.5, y - 3.5),
        _ => format!(
            r#"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}"/>"#,
            x,
            y - 4.5,
            x - 4.5,
            y + 3.5,
            x + 4.5,
            y + 3.5
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_cover_range_with_round_steps() {
        let t = nice_ticks(-1.3, 7.9, 6);
        assert_eq!(t.first(), Some(&-2.0));
        assert_eq!(t.last(), Some(&8.0));
        assert!((t[1] - t[0] - 2.0).abs() < 1e-12);
        assert_eq!(tick_label(-0.0, 0.5), "0.0");
    }
}
