//! Minimal static SVG renderers.

use std::fmt::Write;

use policybound_core::sim::{CurvePoint, Illustration};
use policybound_core::Sign;

use crate::report::BoundRow;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn colour(sign: Sign) -> &'static str {
    match sign {
        Sign::StrictlyNegative => "#c0392b",
        Sign::StrictlyPositive => "#27ae60",
        Sign::Indeterminate => "#7f8c8d",
    }
}

/// Linear map from a data range onto pixel coordinates.
struct Axis {
    lo: f64,
    hi: f64,
    p0: f64,
    p1: f64,
}

impl Axis {
    fn new(lo: f64, hi: f64, p0: f64, p1: f64) -> Self {
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 1.0, hi + 1.0) };
        Axis { lo, hi, p0, p1 }
    }

    fn px(&self, v: f64) -> f64 {
        self.p0 + (v - self.lo) / (self.hi - self.lo) * (self.p1 - self.p0)
    }
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
}

/// One horizontal bar per unit, coloured by sign, with dots at the reference Z values.
pub fn bounds_svg(rows: &[BoundRow]) -> String {
    let row_h = 14.0;
    let (left, right, top) = (60.0, 760.0, 20.0);
    let height = top * 2.0 + row_h * rows.len() as f64;
    let (mut lo, mut hi) = extent(
        rows.iter()
            .flat_map(|r| [r.bound.lo, r.bound.hi, 0.0].into_iter().chain(r.dots.iter().flat_map(|d| [d.1, d.2]))),
    );
    let pad = 0.05 * (hi - lo).max(1e-9);
    lo -= pad;
    hi += pad;
    let ax = Axis::new(lo, hi, left, right);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="800" height="{height}" font-family="sans-serif" font-size="10">"#
    );
    let zx = ax.px(0.0);
    let _ = writeln!(
        s,
        r##"<line x1="{zx:.2}" y1="{top}" x2="{zx:.2}" y2="{:.2}" stroke="#000" stroke-dasharray="3,3"/>"##,
        height - top
    );
    for (i, r) in rows.iter().enumerate() {
        let y = top + row_h * (i as f64 + 0.5);
        let c = colour(r.bound.sign);
        let _ =
            writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, left - 6.0, y + 3.5, esc(&r.unit));
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{c}" stroke-width="3"/>"#,
            ax.px(r.bound.lo),
            ax.px(r.bound.hi)
        );
        for &(_, dlo, dhi) in &r.dots {
            for v in [dlo, dhi] {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{y:.2}" r="2" fill="{c}"/>"#, ax.px(v));
            }
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Legend label, colour, dash pattern and accessor.
type Series = (&'static str, &'static str, &'static str, fn(&CurvePoint) -> f64);

/// Effect curves with the realised-ITE scatter behind them.
pub fn illustration_svg(ill: &Illustration) -> String {
    let (w, h, m) = (800.0, 500.0, 40.0);
    let (x0, x1) = extent(ill.curves.iter().map(|c| c.x));
    let (y0, y1) = extent(
        ill.curves
            .iter()
            .flat_map(|c| [c.cde1, c.cde2, c.cate1, c.cate2, c.mixture_cate, c.projection])
            .chain(ill.scatter.iter().filter(|p| p.x >= x0 && p.x <= x1).map(|p| p.ite)),
    );
    let ax = Axis::new(x0, x1, m, w - m);
    let ay = Axis::new(y0, y1, h - m, m);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="10">"#
    );
    for p in ill.scatter.iter().filter(|p| p.x >= x0 && p.x <= x1) {
        let c = if p.version == 1 { "#2e86c1" } else { "#e67e22" };
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="{c}" fill-opacity="0.35"/>"#,
            ax.px(p.x),
            ay.px(p.ite)
        );
    }
    let series: [Series; 6] = [
        ("CDE m=1", "#2e86c1", "4,3", |c| c.cde1),
        ("CDE m=2", "#e67e22", "4,3", |c| c.cde2),
        ("CATE m=1", "#2e86c1", "none", |c| c.cate1),
        ("CATE m=2", "#e67e22", "none", |c| c.cate2),
        ("coarsened CATE", "#000000", "none", |c| c.mixture_cate),
        ("linear projection", "#8e44ad", "2,2", |c| c.projection),
    ];
    for (k, (name, col, dash, f)) in series.iter().enumerate() {
        let pts: Vec<String> = ill.curves.iter().map(|c| format!("{:.2},{:.2}", ax.px(c.x), ay.px(f(c)))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{col}" stroke-width="1.5" stroke-dasharray="{dash}" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = m + 12.0 * k as f64;
        let _ = writeln!(s, r#"<text x="{:.2}" y="{ly:.2}" fill="{col}">{}</text>"#, m + 8.0, esc(name));
    }
    s.push_str("</svg>\n");
    s
}
