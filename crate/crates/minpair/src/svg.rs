//! Minimal SVG plots: scatter with a dashed identity line, and step ROC
//! curves.

use std::fmt::Write;

const W: f64 = 480.0;
const H: f64 = 480.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * MARGIN)
    }
}

fn open(out: &mut String, title: &str, xlabel: &str, ylabel: &str, frame: &Frame) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<rect class="axes" x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
        W / 2.0,
        H - 16.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
    for (v, anchor_x, anchor_y) in [
        (frame.x0, frame.px(frame.x0), H - MARGIN + 16.0),
        (frame.x1, frame.px(frame.x1), H - MARGIN + 16.0),
    ] {
        let _ = writeln!(
            out,
            r#"<text x="{anchor_x:.2}" y="{anchor_y:.2}" text-anchor="middle" font-family="sans-serif" font-size="10">{}</text>"#,
            crate::output::fmt_g6(v)
        );
    }
    for v in [frame.y0, frame.y1] {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="10">{}</text>"#,
            MARGIN - 4.0,
            frame.py(v) + 3.0,
            crate::output::fmt_g6(v)
        );
    }
}

/// Scatter of `(x, y)` points on a square frame shared by both axes, with the
/// y = x line dashed.
pub fn scatter(title: &str, xlabel: &str, ylabel: &str, points: &[(f64, f64)]) -> String {
    let finite: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    let (mut lo, mut hi) = finite
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (x, y)| {
            (lo.min(*x).min(*y), hi.max(*x).max(*y))
        });
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let pad = (hi - lo) * 0.05;
    let frame = Frame {
        x0: lo - pad,
        x1: hi + pad,
        y0: lo - pad,
        y1: hi + pad,
    };
    let mut out = String::new();
    open(&mut out, title, xlabel, ylabel, &frame);
    let _ = writeln!(
        out,
        r##"<line class="identity" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#888" stroke-dasharray="6 4"/>"##,
        frame.px(frame.x0),
        frame.py(frame.y0),
        frame.px(frame.x1),
        frame.py(frame.y1)
    );
    for (x, y) in &finite {
        let _ = writeln!(
            out,
            r#"<circle class="point" cx="{:.2}" cy="{:.2}" r="2.5" fill="{}" fill-opacity="0.6"/>"#,
            frame.px(*x),
            frame.py(*y),
            PALETTE[0]
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Step ROC curves in the unit square with the chance diagonal dashed.
pub fn roc(title: &str, curves: &[(String, f64, Vec<(f64, f64)>)]) -> String {
    let frame = Frame {
        x0: 0.0,
        x1: 1.0,
        y0: 0.0,
        y1: 1.0,
    };
    let mut out = String::new();
    open(&mut out, title, "false positive rate", "true positive rate", &frame);
    let _ = writeln!(
        out,
        r##"<line class="chance" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#888" stroke-dasharray="6 4"/>"##,
        frame.px(0.0),
        frame.py(0.0),
        frame.px(1.0),
        frame.py(1.0)
    );
    for (i, (label, auc, points)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut d = String::new();
        let mut prev_x: Option<f64> = None;
        for &(x, y) in points {
            match prev_x {
                None => {
                    let _ = write!(d, "M{:.2},{:.2}", frame.px(x), frame.py(y));
                }
                Some(px) => {
                    // Vertical then horizontal, so the curve is a staircase.
                    let _ = write!(d, " L{:.2},{:.2}", frame.px(px), frame.py(y));
                    let _ = write!(d, " L{:.2},{:.2}", frame.px(x), frame.py(y));
                }
            }
            prev_x = Some(x);
        }
        let _ = writeln!(
            out,
            r#"<path class="roc" d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>"#
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" fill="{color}">{} (AUC {})</text>"#,
            frame.px(0.55),
            frame.py(0.05) - 14.0 * (curves.len() - 1 - i) as f64,
            escape(label),
            crate::output::fmt_g6(*auc)
        );
    }
    out.push_str("</svg>\n");
    out
}
