//! Stability curve as a standalone SVG.
//!
//! The canvas is 800×600. The plot area spans x ∈ [70, 770] and
//! y ∈ [40, 540]; k maps linearly onto x, normalized stability onto y with 0
//! at the bottom. The upper y bound is the largest plotted value (at least
//! the random-labeling threshold 1.0) rounded up to the next 0.2.

use std::fmt::Write;

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 600.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 770.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 540.0;

/// One point of the curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub k: usize,
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub train: f64,
}

struct Axes {
    k_lo: f64,
    k_hi: f64,
    y_hi: f64,
}

impl Axes {
    fn new(points: &[CurvePoint]) -> Self {
        let k_lo = points.iter().map(|p| p.k).min().unwrap_or(0) as f64;
        let mut k_hi = points.iter().map(|p| p.k).max().unwrap_or(1) as f64;
        if k_hi <= k_lo {
            k_hi = k_lo + 1.0;
        }
        let top = points
            .iter()
            .flat_map(|p| [p.ci_hi, p.mean, p.train])
            .filter(|v| v.is_finite())
            .fold(1.0_f64, f64::max);
        Self {
            k_lo,
            k_hi,
            y_hi: (top / 0.2).ceil() * 0.2,
        }
    }

    fn x(&self, k: f64) -> f64 {
        LEFT + (k - self.k_lo) / (self.k_hi - self.k_lo) * (RIGHT - LEFT)
    }

    fn y(&self, v: f64) -> f64 {
        let v = if v.is_finite() {
            v.clamp(0.0, self.y_hi)
        } else {
            self.y_hi
        };
        BOTTOM - v / self.y_hi * (BOTTOM - TOP)
    }
}

fn polyline(pts: impl Iterator<Item = (f64, f64)>) -> String {
    pts.map(|(x, y)| format!("{x:.2},{y:.2}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Renders the curve. `title` is escaped. The line after the XML
/// declaration is a version comment and the next one carries `provenance`.
pub fn render(points: &[CurvePoint], title: &str, provenance: &str) -> String {
    let ax = Axes::new(points);
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(s, "<!-- clustab {} -->", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "<!-- {} -->", provenance.replace("--", "- -"));
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );

    // Axes and ticks.
    let _ = writeln!(
        s,
        r#"<path d="M{LEFT},{TOP} V{BOTTOM} H{RIGHT}" fill="none" stroke="black"/>"#
    );
    for p in points {
        let x = ax.x(p.k as f64);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{BOTTOM}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
            BOTTOM + 5.0,
            BOTTOM + 20.0,
            p.k
        );
    }
    let steps = (ax.y_hi / 0.2).round() as usize;
    for i in 0..=steps {
        let v = i as f64 * 0.2;
        let y = ax.y(v);
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{v:.1}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">number of clusters</text>"#,
        (LEFT + RIGHT) / 2.0,
        HEIGHT - 20.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">normalized stability</text>"#,
        (TOP + BOTTOM) / 2.0
    );

    // Random-labeling threshold.
    let y1 = ax.y(1.0);
    let _ = writeln!(
        s,
        r##"<line x1="{LEFT}" y1="{y1:.2}" x2="{RIGHT}" y2="{y1:.2}" stroke="#c0392b" stroke-dasharray="2,4"/>"##
    );

    if !points.is_empty() {
        let band: Vec<(f64, f64)> = points
            .iter()
            .map(|p| (ax.x(p.k as f64), ax.y(p.ci_hi)))
            .chain(
                points
                    .iter()
                    .rev()
                    .map(|p| (ax.x(p.k as f64), ax.y(p.ci_lo))),
            )
            .collect();
        let _ = writeln!(
            s,
            r##"<polygon points="{}" fill="#2e86c1" fill-opacity="0.2" stroke="none"/>"##,
            polyline(band.into_iter())
        );
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#2e86c1" stroke-width="2"/>"##,
            polyline(points.iter().map(|p| (ax.x(p.k as f64), ax.y(p.mean))))
        );
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#7f8c8d" stroke-width="2" stroke-dasharray="8,5"/>"##,
            polyline(points.iter().map(|p| (ax.x(p.k as f64), ax.y(p.train))))
        );
        for p in points {
            let _ = writeln!(
                s,
                r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#2e86c1"/>"##,
                ax.x(p.k as f64),
                ax.y(p.mean)
            );
        }
    }

    // Legend.
    let lx = RIGHT - 190.0;
    let legend = [
        ("#2e86c1", "", "validation (95% CI)"),
        ("#7f8c8d", r#" stroke-dasharray="8,5""#, "training"),
        ("#c0392b", r#" stroke-dasharray="2,4""#, "random labeling"),
    ];
    for (i, (colour, dash, label)) in legend.iter().enumerate() {
        let y = TOP + 15.0 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{y}" x2="{}" y2="{y}" stroke="{colour}" stroke-width="2"{dash}/><text x="{}" y="{}">{label}</text>"#,
            lx + 30.0,
            lx + 38.0,
            y + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
