use std::fmt::Write;
use std::path::Path;

use dscofs::io::{load_csv, write_atomic, DatasetFile};
use dscofs::{DscofsError, Result};

const SIZE: f64 = 480.0;
const MARGIN: f64 = 48.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

/// Standalone SVG scatter of two features; `features` are 1-based.
pub fn render(xs: &[f64], ys: &[f64], labels: Option<&[usize]>, features: (usize, usize)) -> String {
    let span = |v: &[f64]| {
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo { (lo, hi - lo) } else { (lo - 0.5, 1.0) }
    };
    let (x0, xw) = span(xs);
    let (y0, yw) = span(ys);
    let inner = SIZE - 2.0 * MARGIN;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{inner}" height="{inner}" fill="none" stroke="black"/>"#
    );
    for (j, (x, y)) in xs.iter().zip(ys).enumerate() {
        let cx = MARGIN + (x - x0) / xw * inner;
        let cy = SIZE - MARGIN - (y - y0) / yw * inner;
        let color = PALETTE[labels.map_or(0, |l| l[j]) % PALETTE.len()];
        let _ = writeln!(svg, r#"<circle cx="{cx:.3}" cy="{cy:.3}" r="2.5" fill="{color}"/>"#);
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="14">feature {}</text>"#,
        SIZE / 2.0,
        SIZE - 12.0,
        features.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" font-family="sans-serif" font-size="14" transform="rotate(-90 16 {})">feature {}</text>"#,
        SIZE / 2.0,
        SIZE / 2.0,
        features.1
    );
    svg.push_str("</svg>\n");
    svg
}

pub fn plot(data: &Path, features: &[usize], file: &Path) -> Result<()> {
    if features.len() != 2 {
        return Err(DscofsError::invalid(format!(
            "--features needs exactly two indices, got {}",
            features.len()
        )));
    }
    let (a, labels) = load_csv(&DatasetFile::new(data))?;
    for &f in features {
        if f == 0 || f > a.d() {
            return Err(DscofsError::invalid(format!(
                "feature {f} out of range 1..={}",
                a.d()
            )));
        }
    }
    let row = |f: usize| a.values().row(f - 1).iter().cloned().collect::<Vec<_>>();
    let svg = render(
        &row(features[0]),
        &row(features[1]),
        labels.as_ref().map(|l| l.as_slice()),
        (features[0], features[1]),
    );
    write_atomic(file, svg.as_bytes())
}
