//! CSV and SVG renderings of a run log.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{HarnessError, Result};
use crate::training::{Row, RunLog};

/// Column order of the run CSV.
pub const CSV_HEADER: [&str; 25] = [
    "step",
    "log_loss",
    "train_acc",
    "test_acc",
    "q_min",
    "gamma_1",
    "gamma_2",
    "gamma_inf",
    "gamma_sigma",
    "soft_margin",
    "alignment",
    "kkt_eps",
    "kkt_delta",
    "bregman_gap",
    "bregman_bound",
    "norm_l1",
    "norm_l2",
    "norm_linf",
    "norm_spec",
    "t0_flag",
    "gamma_algo",
    "norm_algo",
    "kkt_eps_fixed",
    "delta_bound",
    "optimizer",
];

/// 17 significant digits; empty for a missing value.
fn num(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.16e}"),
        Some(x) => format!("{x}"),
        None => String::new(),
    }
}

fn csv_row(r: &Row) -> String {
    let mut fields: Vec<String> = CSV_HEADER[..CSV_HEADER.len() - 1]
        .iter()
        .map(|&name| match name {
            "step" => r.step.to_string(),
            "t0_flag" => u8::from(r.t0_flag).to_string(),
            other => num(r.metric(other)),
        })
        .collect();
    fields.push(r.optimizer.clone());
    fields.join(",")
}

pub fn csv_string(log: &RunLog) -> String {
    let mut out = CSV_HEADER.join(",");
    out.push('\n');
    for r in &log.rows {
        out.push_str(&csv_row(r));
        out.push('\n');
    }
    out
}

pub fn emit_csv(log: &RunLog, path: &Path) -> Result<()> {
    fs::write(path, csv_string(log)).map_err(|e| HarnessError::io(path, e))
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line chart of `metrics` against the step, one polyline per metric.
///
/// Points that cannot be drawn (missing values, or nonpositive values on a
/// log axis) are skipped; the returned warnings say how many.
pub fn svg_string(log: &RunLog, metrics: &[&str], log_x: bool, log_y: bool) -> (String, Vec<String>) {
    let mut warnings = Vec::new();
    let tx = |v: f64| if log_x { v.log10() } else { v };
    let ty = |v: f64| if log_y { v.log10() } else { v };
    let mut series: Vec<(&str, Vec<(f64, f64)>)> = Vec::new();
    for &m in metrics {
        let mut pts = Vec::new();
        let mut skipped = 0usize;
        for r in &log.rows {
            let x = r.step as f64;
            match r.metric(m) {
                Some(y) if y.is_finite() => {
                    if (log_x && x <= 0.0) || (log_y && y <= 0.0) {
                        skipped += 1;
                    } else {
                        pts.push((tx(x), ty(y)));
                    }
                }
                _ => skipped += 1,
            }
        }
        if skipped > 0 {
            warnings.push(format!("{m}: skipped {skipped} point(s) that cannot be drawn"));
        }
        series.push((m, pts));
    }

    let all = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;
    let label = |v: f64, log: bool| {
        let v = if log { 10f64.powf(v) } else { v };
        format!("{v:.3e}")
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
            px(xv),
            HEIGHT - BOTTOM + 16.0,
            label(xv, log_x)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            py(yv) + 4.0,
            label(yv, log_y)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">step{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0,
        if log_x { " (log)" } else { "" }
    );
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            coords.join(" ")
        );
        let ly = TOP + 16.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12">{}</text>"#,
            lx + 26.0,
            ly + 4.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    (s, warnings)
}

pub fn emit_svg(log: &RunLog, metrics: &[&str], log_x: bool, log_y: bool, path: &Path) -> Result<Vec<String>> {
    let (svg, warnings) = svg_string(log, metrics, log_x, log_y);
    fs::write(path, svg).map_err(|e| HarnessError::io(path, e))?;
    Ok(warnings)
}
