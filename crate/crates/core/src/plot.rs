//! Standalone SVG line charts for threshold and training-fraction curves.
//!
//! Output depends only on the input values, so identical curves render to
//! byte-identical files.

use std::fmt::Write as _;

use crate::harness::FractionCurve;
use crate::postprocess::ThresholdCurve;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;

/// Data for one chart. Both axes span `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub title: String,
    pub x_label: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub best: Option<(f64, f64)>,
}

impl From<&ThresholdCurve> for PlotSeries {
    fn from(c: &ThresholdCurve) -> Self {
        Self {
            title: "Count accuracy at various thresholds".into(),
            x_label: "Confidence threshold".into(),
            xs: c.thresholds.clone(),
            ys: c.accuracies.clone(),
            best: Some((c.best_threshold, c.best_accuracy)),
        }
    }
}

impl From<&FractionCurve> for PlotSeries {
    fn from(c: &FractionCurve) -> Self {
        let mut best: Option<(f64, f64)> = None;
        for (&x, &y) in c.fractions.iter().zip(&c.accuracies) {
            if best.is_none_or(|(_, b)| y > b) {
                best = Some((x, y));
            }
        }
        let title = if c.label.is_empty() {
            "Count accuracy by training set size".to_string()
        } else {
            format!("Count accuracy by training set size ({})", c.label)
        };
        Self {
            title,
            x_label: "Fraction of training data".into(),
            xs: c.fractions.clone(),
            ys: c.accuracies.clone(),
            best,
        }
    }
}

fn sx(x: f64) -> f64 {
    LEFT + x.clamp(0.0, 1.0) * (WIDTH - LEFT - RIGHT)
}

fn sy(y: f64) -> f64 {
    HEIGHT - BOTTOM - y.clamp(0.0, 1.0) * (HEIGHT - TOP - BOTTOM)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders the series as an SVG document.
pub fn render_svg(series: &PlotSeries) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(&series.title)
    );

    for i in 0..=5 {
        let v = f64::from(i) / 5.0;
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#dddddd"/>"##,
            sx(0.0),
            sy(v),
            sx(1.0),
            sy(v)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{:.1}</text>"#,
            sx(0.0) - 6.0,
            sy(v) + 4.0,
            v
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{:.1}</text>"#,
            sx(v),
            sy(0.0) + 18.0,
            v
        );
    }
    let _ = writeln!(
        s,
        r#"<path d="M{:.2},{:.2} L{:.2},{:.2} L{:.2},{:.2}" fill="none" stroke="black"/>"#,
        sx(0.0),
        sy(1.0),
        sx(0.0),
        sy(0.0),
        sx(1.0),
        sy(0.0)
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        sx(0.5),
        HEIGHT - 14.0,
        escape(&series.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">Count accuracy</text>"#,
        sy(0.5),
        sy(0.5)
    );

    let vertices: Vec<String> = series
        .xs
        .iter()
        .zip(&series.ys)
        .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)))
        .collect();
    let _ = writeln!(
        s,
        r##"<polyline fill="none" stroke="#1f77b4" stroke-width="1.5" points="{}"/>"##,
        vertices.join(" ")
    );

    if let Some((bx, by)) = series.best {
        let _ = writeln!(
            s,
            r##"<circle class="best" cx="{:.2}" cy="{:.2}" r="4" fill="#d62728"/>"##,
            sx(bx),
            sy(by)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">best {:.3} @ {:.3}</text>"#,
            (sx(bx) + 8.0).min(WIDTH - 120.0),
            sy(by) - 8.0,
            by,
            bx
        );
    }
    s.push_str("</svg>\n");
    s
}
