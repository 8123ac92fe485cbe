//! Minimal SVG renderings of the study outputs.

use std::fmt::Write;

use super::{MStudyOutcome, RadiusSweep, Scenario, ScenarioOutcome};
use crate::stats::{Box2D, BoxSummary};

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

struct Axis {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, px_lo: f64, px_hi: f64) -> Self {
        let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            lo = 0.0;
            hi = 1.0;
        }
        if hi - lo <= 0.0 {
            let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.05 };
            lo -= pad;
            hi += pad;
        }
        let margin = (hi - lo) * 0.05;
        Axis { lo: lo - margin, hi: hi + margin, px_lo, px_hi }
    }

    fn map(&self, v: f64) -> f64 {
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }
}

fn frame(out: &mut String, title: &str, xlab: &str, ylab: &str, x: &Axis, y: &Axis) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">
<rect width="{W}" height="{H}" fill="white"/>
<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>
<line x1="{PAD}" y1="{}" x2="{}" y2="{}" stroke="black"/>
<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{}" stroke="black"/>
<text x="{}" y="{}" text-anchor="middle">{xlab}</text>
<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{ylab}</text>
"#,
        W / 2.0,
        H - PAD,
        W - PAD,
        H - PAD,
        H - PAD,
        W / 2.0,
        H - 12.0,
        H / 2.0,
        H / 2.0,
    );
    for k in 0..=4 {
        let v = y.lo + (y.hi - y.lo) * k as f64 / 4.0;
        let py = y.map(v);
        let _ = writeln!(out, r#"<text x="{}" y="{py:.1}" text-anchor="end">{v:.4}</text>"#, PAD - 4.0);
    }
    if x.hi > x.lo {
        for k in 0..=4 {
            let v = x.lo + (x.hi - x.lo) * k as f64 / 4.0;
            let _ =
                writeln!(out, r#"<text x="{:.1}" y="{}" text-anchor="middle">{v:.4}</text>"#, x.map(v), H - PAD + 14.0);
        }
    }
}

fn vertical_box(out: &mut String, cx: f64, half: f64, s: &BoxSummary, y: &Axis, color: &str) {
    let (top, bottom) = (y.map(s.q3), y.map(s.q1));
    let _ = writeln!(
        out,
        r#"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="{color}"/>
<rect x="{:.1}" y="{top:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="{color}"/>
<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{color}" stroke-width="2"/>"#,
        y.map(s.max),
        y.map(s.min),
        cx - half,
        2.0 * half,
        (bottom - top).max(0.5),
        cx - half,
        y.map(s.median),
        cx + half,
        y.map(s.median),
    );
}

/// Boxplots of file-level risk per radius, one group per scenario.
pub fn sweep_boxplots(sweeps: &[(Scenario, RadiusSweep)]) -> String {
    let y = Axis::new(
        sweeps.iter().flat_map(|(_, s)| s.points.iter().flat_map(|p| [p.summary.min, p.summary.max])),
        H - PAD,
        PAD,
    );
    let x = Axis { lo: 0.0, hi: 0.0, px_lo: PAD, px_hi: W - PAD };
    let mut out = String::new();
    frame(&mut out, "File-level risk by radius", "scenario / radius", "identification risk", &x, &y);
    let slots: usize = sweeps.iter().map(|(_, s)| s.points.len() + 1).sum::<usize>().max(1);
    let step = (W - 2.0 * PAD) / slots as f64;
    let mut at = 0.5;
    for (scenario, sweep) in sweeps {
        let start = at;
        for (k, p) in sweep.points.iter().enumerate() {
            let cx = PAD + at * step;
            vertical_box(&mut out, cx, step * 0.3, &p.summary, &y, COLORS[k % COLORS.len()]);
            let _ = writeln!(
                &mut out,
                r#"<text x="{cx:.1}" y="{}" text-anchor="middle" font-size="8">{}</text>"#,
                H - PAD + 26.0,
                p.radius
            );
            at += 1.0;
        }
        let _ = writeln!(
            &mut out,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{scenario}</text>"#,
            PAD + (start + at - 1.0) / 2.0 * step,
            H - PAD + 38.0
        );
        at += 1.0;
    }
    out.push_str("</svg>\n");
    out
}

fn quartile_rect(out: &mut String, b: &Box2D, x: &Axis, y: &Axis, color: &str, whiskers: bool) {
    let (x0, x1) = (x.map(b.utility.q1), x.map(b.utility.q3));
    let (y0, y1) = (y.map(b.risk.q3), y.map(b.risk.q1));
    let _ = writeln!(
        out,
        r#"<rect x="{x0:.1}" y="{y0:.1}" width="{:.1}" height="{:.1}" fill="{color}" fill-opacity="0.15" stroke="{color}"/>"#,
        (x1 - x0).max(0.5),
        (y1 - y0).max(0.5)
    );
    if whiskers {
        let (mx, my) = (x.map(b.utility.median), y.map(b.risk.median));
        for (ax, ay, bx, by) in [
            (mx, my, x.map(b.utility.min), my),
            (mx, my, x.map(b.utility.max), my),
            (mx, my, mx, y.map(b.risk.min)),
            (mx, my, mx, y.map(b.risk.max)),
        ] {
            let _ = writeln!(out, r#"<line x1="{ax:.1}" y1="{ay:.1}" x2="{bx:.1}" y2="{by:.1}" stroke="{color}"/>"#);
        }
    }
}

fn legend(out: &mut String, k: usize, label: &str) {
    let color = COLORS[k % COLORS.len()];
    let y = PAD + 14.0 * k as f64;
    let _ = writeln!(
        out,
        r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/><text x="{}" y="{}">{label}</text>"#,
        W - PAD - 60.0,
        y - 9.0,
        W - PAD - 45.0,
        y
    );
}

/// Per-replicate (utility, risk) points with quartile rectangles.
pub fn tradeoff_plot(outcomes: &[ScenarioOutcome]) -> String {
    let x = Axis::new(outcomes.iter().flat_map(|o| o.utility.iter().copied()), PAD, W - PAD);
    let y = Axis::new(outcomes.iter().flat_map(|o| o.file_risk.iter().copied()), H - PAD, PAD);
    let mut out = String::new();
    frame(&mut out, "Utility-risk trade-off", "propensity score utility", "identification risk", &x, &y);
    for (k, o) in outcomes.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        for (r, u) in o.file_risk.iter().zip(&o.utility) {
            let _ = writeln!(out, r#"<circle cx="{:.1}" cy="{:.1}" r="2.5" fill="{color}"/>"#, x.map(*u), y.map(*r));
        }
        quartile_rect(&mut out, &o.box2d, &x, &y, color, false);
        legend(&mut out, k, &o.scenario.to_string());
    }
    out.push_str("</svg>\n");
    out
}

/// 2D boxplots of repetition-averaged (utility, risk) per `m`.
pub fn m_study_plot(outcomes: &[MStudyOutcome]) -> String {
    let x = Axis::new(outcomes.iter().flat_map(|o| [o.box2d.utility.min, o.box2d.utility.max]), PAD, W - PAD);
    let y = Axis::new(outcomes.iter().flat_map(|o| [o.box2d.risk.min, o.box2d.risk.max]), H - PAD, PAD);
    let mut out = String::new();
    frame(
        &mut out,
        "2D boxplot by number of replicates",
        "mean propensity score utility",
        "mean identification risk",
        &x,
        &y,
    );
    for (k, o) in outcomes.iter().enumerate() {
        quartile_rect(&mut out, &o.box2d, &x, &y, COLORS[k % COLORS.len()], true);
        legend(&mut out, k, &format!("m = {}", o.m));
    }
    out.push_str("</svg>\n");
    out
}
