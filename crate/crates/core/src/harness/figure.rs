//! Bound figures: per config, a semilog compression panel with the ratio
//! envelope and a discrimination panel with its lower bound. Each panel is
//! a small standalone SVG plus the CSV it was drawn from.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::pipeline::{self, RunReport};

const WIDTH: f64 = 560.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 4] = ["#1f77b4", "#2ca02c", "#ff7f0e", "#7f7f7f"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Minimal line chart. Non-finite points are skipped.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let finite = series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in finite {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        svg,
        r#"<path d="M {left} {top} L {left} {bottom} L {right} {bottom}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let yv = y0 + t * (y1 - y0);
        let xv = x0 + t * (x1 - x0);
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="10">{:.3}</text>"#,
            left - 6.0,
            py(yv) + 3.0,
            yv
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="10">{:.2}</text>"#,
            px(xv),
            bottom + 16.0,
            xv
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 14.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 16 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );

    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let dash = if s.dashed { r#" stroke-dasharray="6 3""# } else { "" };
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#,
            pts.join(" ")
        );
        let ly = top + 14.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"{dash}/>"#,
            right - 150.0,
            right - 130.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11">{}</text>"#,
            right - 125.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn compression_panel(report: &RunReport) -> (String, String) {
    let xi = report.config.xi;
    let mut csv = String::from("layer,C,log10_C,env_lower,env_upper\n");
    let env = report
        .bounds
        .as_ref()
        .map(|b| pipeline::envelope(&report.metrics, b));
    let mut measured = Vec::new();
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for (l, m) in report.metrics.iter().enumerate() {
        let x = l as f64;
        measured.push((x, m.compression.log10()));
        let (lo, hi) = env.as_ref().map(|e| e[l]).unwrap_or((f64::NAN, f64::NAN));
        lower.push((x, lo.log10()));
        upper.push((x, hi.log10()));
        let _ = writeln!(csv, "{l},{:e},{:e},{:e},{:e}", m.compression, m.compression.log10(), lo, hi);
    }
    let series = vec![
        Series { label: "C_l".into(), points: measured, dashed: false },
        Series { label: "lower envelope".into(), points: lower, dashed: true },
        Series { label: "upper envelope".into(), points: upper, dashed: true },
    ];
    let svg = line_chart_svg(&format!("compression, xi = {xi}"), "layer l", "log10 C_l", &series);
    (svg, csv)
}

fn discrimination_panel(report: &RunReport) -> (String, String) {
    let xi = report.config.xi;
    let mut csv = String::from("layer,D,D_lower\n");
    let mut measured = Vec::new();
    let mut lower = Vec::new();
    for (l, m) in report.metrics.iter().enumerate() {
        let bound = match (&report.bounds, l) {
            (Some(b), l) if l >= 1 => b.d_lower.get(l - 1).copied().unwrap_or(f64::NAN),
            _ => f64::NAN,
        };
        measured.push((l as f64, m.discrimination));
        lower.push((l as f64, bound));
        let _ = writeln!(csv, "{l},{:e},{:e}", m.discrimination, bound);
    }
    let series = vec![
        Series { label: "D_l".into(), points: measured, dashed: false },
        Series { label: "lower bound".into(), points: lower, dashed: true },
    ];
    let svg = line_chart_svg(&format!("discrimination, xi = {xi}"), "layer l", "D_l", &series);
    (svg, csv)
}

/// One pipeline run per config (into `out_dir/run_<i>`), then a compression
/// and a discrimination panel each as `.svg` + `.csv` in `out_dir`.
/// Returns the figure files written.
pub fn run_bound_figure(cfgs: &[ExperimentConfig], out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    for (i, cfg) in cfgs.iter().enumerate() {
        let run_cfg = ExperimentConfig {
            out_dir: out_dir.join(format!("run_{i}")),
            ..cfg.clone()
        };
        let report = pipeline::run_single(&run_cfg).map_err(Error::at_stage("figure"))?;
        for (name, (svg, csv)) in [
            ("compression", compression_panel(&report)),
            ("discrimination", discrimination_panel(&report)),
        ] {
            let stem = format!("panel{i}_{name}");
            let svg_path = out_dir.join(format!("{stem}.svg"));
            let csv_path = out_dir.join(format!("{stem}.csv"));
            fs::write(&svg_path, svg)?;
            fs::write(&csv_path, csv)?;
            files.push(svg_path);
            files.push(csv_path);
        }
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_has_balanced_markup() {
        let svg = line_chart_svg(
            "a < b & c",
            "x",
            "y",
            &[
                Series { label: "s".into(), points: vec![(0.0, 1.0), (1.0, 2.0)], dashed: false },
                Series { label: "t".into(), points: vec![(0.0, f64::NAN), (1.0, 0.5)], dashed: true },
            ],
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a &lt; b &amp; c"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn flat_series_does_not_divide_by_zero() {
        let svg = line_chart_svg(
            "flat",
            "x",
            "y",
            &[Series { label: "s".into(), points: vec![(0.0, 1.0), (0.0, 1.0)], dashed: false }],
        );
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }
}
