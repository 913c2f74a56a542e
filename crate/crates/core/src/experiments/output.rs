//! CSV and SVG writers.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::{KlRow, SweepRow};

pub const CSV_HEADER: &str = "param,code,recovery,channel_fidelity,avg_fidelity,restarts,evaluations,seed";
pub const KL_HEADER: &str = "param,code,errors,residual,lambda_offdiag";

/// printf-style `%.{sig}g`: `sig` significant digits, trailing zeros removed,
/// scientific notation outside [1e-4, 10^sig).
pub fn format_sig(x: f64, sig: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= sig as i32 {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (sig as i32 - 1 - exp).max(0) as usize;
    strip_zeros(&format!("{x:.decimals$}")).to_string()
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn g12(x: f64) -> String {
    format_sig(x, 12)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            g12(r.param),
            r.code,
            r.recovery,
            g12(r.channel_fidelity),
            g12(r.avg_fidelity),
            r.restarts,
            r.evaluations,
            r.seed
        );
    }
    out
}

pub fn kl_csv(rows: &[KlRow]) -> String {
    let mut out = String::from(KL_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", g12(r.param), r.code, r.errors, g12(r.residual), g12(r.lambda_offdiag));
    }
    out
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

/// Channel fidelity against the swept parameter, one polyline per
/// (code, recovery) series.
pub fn sweep_svg(rows: &[SweepRow], x_label: &str) -> String {
    let (w, h, margin) = (640.0, 420.0, 60.0);
    let mut series: BTreeMap<(String, String), Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows {
        series.entry((r.code.clone(), r.recovery.clone())).or_default().push((r.param, r.channel_fidelity));
    }
    let fold = |f: fn(f64, f64) -> f64, init: f64, pick: fn(&SweepRow) -> f64| rows.iter().map(pick).fold(init, f);
    let (x0, x1) = (fold(f64::min, f64::INFINITY, |r| r.param), fold(f64::max, f64::NEG_INFINITY, |r| r.param));
    let (y0, y1) =
        (fold(f64::min, f64::INFINITY, |r| r.channel_fidelity), fold(f64::max, f64::NEG_INFINITY, |r| r.channel_fidelity));
    let span = |a: f64, b: f64| if b > a { b - a } else { 1.0 };
    let px = |x: f64| margin + (x - x0) / span(x0, x1) * (w - 2.0 * margin);
    let py = |y: f64| h - margin - (y - y0) / span(y0, y1) * (h - 2.0 * margin);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{margin}" y="{margin}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * margin,
        h - 2.0 * margin
    );
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#, w / 2.0, h - 15.0);
    let _ = writeln!(svg, r#"<text x="15" y="{}" transform="rotate(-90 15 {})" text-anchor="middle">channel fidelity</text>"#, h / 2.0, h / 2.0);
    for (v, anchor, x, y) in [
        (x0, "start", px(x0), h - margin + 15.0),
        (x1, "end", px(x1), h - margin + 15.0),
        (y0, "end", margin - 4.0, py(y0)),
        (y1, "end", margin - 4.0, py(y1) + 8.0),
    ] {
        let _ = writeln!(svg, r#"<text x="{x:.1}" y="{y:.1}" text-anchor="{anchor}">{}</text>"#, format_sig(v, 6));
    }
    for (i, ((code, recovery), pts)) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(svg, r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#, points.join(" "));
        let ly = margin + 14.0 * (i as f64 + 1.0);
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{ly:.1}" fill="{colour}">{code} ({recovery})</text>"#, w - margin - 150.0);
    }
    svg.push_str("</svg>\n");
    svg
}
