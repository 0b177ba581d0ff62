//! Report emission: JSON for the full report, CSV as the stable data
//! contract, and a small SVG line renderer for convenience plots.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::sim::{PassKPoint, UtilizationSeries};

use super::adapter::HarnessError;
use super::eval::EvalReport;

/// Render `points` as a fixed-size SVG polyline. Deterministic: the same
/// points always produce the same bytes.
pub fn render_line_svg(points: &[(f64, f64)], title: &str, y_label: &str) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const MARGIN: f64 = 48.0;
    let (x_min, x_max) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.0), hi.max(p.0))
        });
    let (y_min, y_max) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.1), hi.max(p.1))
        });
    let x_span = (x_max - x_min).max(f64::MIN_POSITIVE);
    let y_span = (y_max - y_min).max(f64::MIN_POSITIVE);
    let mut path = String::new();
    for (x, y) in points {
        let px = MARGIN + (x - x_min) / x_span * (W - 2.0 * MARGIN);
        let py = H - MARGIN - (y - y_min) / y_span * (H - 2.0 * MARGIN);
        let _ = write!(path, "{}{px:.2},{py:.2}", if path.is_empty() { "" } else { " " });
    }
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<text x=\"{tx}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{title}</text>\n",
            "<text x=\"16\" y=\"{my}\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 {my})\" text-anchor=\"middle\">{ylabel}</text>\n",
            "<line x1=\"{m}\" y1=\"{by}\" x2=\"{rx}\" y2=\"{by}\" stroke=\"black\"/>\n",
            "<line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{by}\" stroke=\"black\"/>\n",
            "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"{path}\"/>\n",
            "</svg>\n"
        ),
        w = 640,
        h = 400,
        tx = 320,
        my = 200,
        m = 48,
        by = 400 - 48,
        rx = 640 - 48,
        title = title,
        ylabel = y_label,
        path = path,
    )
}

/// CSV for a pass@k curve: `k,pass_at_k`, rows in ascending k.
pub fn passk_csv(points: &[PassKPoint]) -> String {
    let mut sorted = points.to_vec();
    sorted.sort_by_key(|p| p.k);
    let mut out = String::from("k,pass_at_k\n");
    for p in &sorted {
        let _ = writeln!(out, "{},{:.6}", p.k, p.value);
    }
    out
}

/// CSV for a utilization series: `step,utilization`.
pub fn utilization_csv(series: &UtilizationSeries) -> String {
    let mut out = String::from("step,utilization\n");
    for (i, v) in series.values.iter().enumerate() {
        let _ = writeln!(out, "{i},{v:.6}");
    }
    out
}

/// CSV of per-task outcomes with a stable column order.
pub fn per_task_csv(report: &EvalReport) -> String {
    let mut out =
        String::from("task_id,n_samples,success_count,first_sample_correct,mean_latency_ms\n");
    for t in &report.per_task {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.3}",
            t.task_id, t.n_samples, t.success_count, t.first_sample_correct, t.mean_latency_ms
        );
    }
    out
}

/// Write the full report bundle into `dir`: `report.json`, `per_task.csv`,
/// `passk.csv`, and `passk.svg` (plot rendered from the CSV data). Returns
/// the created paths.
pub fn emit_report(report: &EvalReport, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let json_path = dir.join("report.json");
    std::fs::write(
        &json_path,
        serde_json::to_string_pretty(report).expect("report serializes"),
    )?;
    written.push(json_path);

    let per_task_path = dir.join("per_task.csv");
    std::fs::write(&per_task_path, per_task_csv(report))?;
    written.push(per_task_path);

    let passk_path = dir.join("passk.csv");
    std::fs::write(&passk_path, passk_csv(&report.pass_at_k))?;
    written.push(passk_path);

    if !report.pass_at_k.is_empty() {
        let points: Vec<(f64, f64)> = report
            .pass_at_k
            .iter()
            .map(|p| (p.k as f64, p.value))
            .collect();
        let svg_path = dir.join("passk.svg");
        std::fs::write(
            &svg_path,
            render_line_svg(&points, &format!("pass@k — {}", report.benchmark), "pass@k"),
        )?;
        written.push(svg_path);
    }
    Ok(written)
}
