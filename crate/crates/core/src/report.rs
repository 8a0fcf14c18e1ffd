// SPDX-License-Identifier: MIT OR Apache-2.0

//! CSV tables and SVG charts.
//!
//! SVG output is built from fixed-precision text so identical inputs give
//! identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    checkpoint_rows, robustness_rows, sweep_layer_rows, sweep_rows, CheckpointCurve, RobustnessReport, SweepCell,
};
use crate::error::Result;
use crate::probe::{metrics_rows, ProbeRun};
use crate::separation::{maxmin_rows, separation_rows, Direction, LayerSeparation};

/// Writes rows with a header line taken from the field names.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"];
const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self { name: name.into(), points, dashed: false }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r##"<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##);
    let _ = writeln!(out, r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, esc(title));
}

/// Line chart. `x_ticks` replaces the numeric x axis labels when given.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], x_ticks: Option<&[(f64, String)]>) -> String {
    let (x0, x1) = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut out = String::new();
    header(&mut out, title);
    let _ = writeln!(
        out,
        r##"<rect x="{LEFT:.1}" y="{TOP:.1}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="#333333"/>"##
    );
    for i in 0..=5 {
        let y = y0 + (y1 - y0) * i as f64 / 5.0;
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT:.1}" y1="{py:.2}" x2="{x2:.1}" y2="{py:.2}" stroke="#dddddd"/><text x="{tx:.1}" y="{ty:.2}" text-anchor="end">{y:.3}</text>"##,
            py = sy(y),
            x2 = LEFT + pw,
            tx = LEFT - 6.0,
            ty = sy(y) + 4.0
        );
    }
    let ticks: Vec<(f64, String)> = match x_ticks {
        Some(t) => t.to_vec(),
        None => {
            let mut xs: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).collect();
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            let step = xs.len().div_ceil(12).max(1);
            xs.into_iter().step_by(step).map(|x| (x, format!("{x}"))).collect()
        }
    };
    for (x, label) in &ticks {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.1}" text-anchor="middle">{}</text>"#,
            sx(*x),
            TOP + ph + 18.0,
            esc(label)
        );
    }
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, HEIGHT - 14.0, esc(x_label));
    let _ = writeln!(
        out,
        r#"<text x="18" y="{cy:.1}" text-anchor="middle" transform="rotate(-90 18 {cy:.1})">{}</text>"#,
        esc(y_label),
        cy = TOP + ph / 2.0
    );
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#, pts.join(" "));
        for &(x, y) in &s.points {
            let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, sx(x), sy(y));
        }
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            esc(&s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// A heatmap cell: colour value and text.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatCell {
    pub value: Option<f64>,
    pub text: String,
}

pub fn heatmap(title: &str, x_label: &str, y_label: &str, cols: &[String], rows: &[String], cells: &[Vec<HeatCell>]) -> String {
    let (lo, hi) = range(cells.iter().flatten().filter_map(|c| c.value));
    let pw = WIDTH - LEFT - 40.0;
    let ph = HEIGHT - TOP - BOTTOM;
    let cw = pw / cols.len().max(1) as f64;
    let ch = ph / rows.len().max(1) as f64;
    let mut out = String::new();
    header(&mut out, title);
    for (r, row) in cells.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            let fill = match cell.value {
                Some(v) => {
                    let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
                    let ch = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
                    format!("#{:02x}{:02x}{:02x}", ch(247.0, 8.0), ch(251.0, 81.0), ch(255.0, 156.0))
                }
                None => "#eeeeee".to_owned(),
            };
            let (x, y) = (LEFT + c as f64 * cw, TOP + r as f64 * ch);
            let text_color = if cell.value.is_some_and(|v| (v - lo) / (hi - lo) > 0.6) { "#ffffff" } else { "#000000" };
            let _ = writeln!(
                out,
                r##"<rect x="{x:.2}" y="{y:.2}" width="{cw:.2}" height="{ch:.2}" fill="{fill}" stroke="#ffffff"/><text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="10" fill="{text_color}">{}</text>"##,
                x + cw / 2.0,
                y + ch / 2.0 + 4.0,
                esc(&cell.text)
            );
        }
    }
    for (c, label) in cols.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.1}" text-anchor="middle">{}</text>"#,
            LEFT + (c as f64 + 0.5) * cw,
            TOP + ph + 18.0,
            esc(label)
        );
    }
    for (r, label) in rows.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            TOP + (r as f64 + 0.5) * ch + 4.0,
            esc(label)
        );
    }
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, HEIGHT - 14.0, esc(x_label));
    let _ = writeln!(
        out,
        r#"<text x="18" y="{cy:.1}" text-anchor="middle" transform="rotate(-90 18 {cy:.1})">{}</text>"#,
        esc(y_label),
        cy = TOP + ph / 2.0
    );
    out.push_str("</svg>\n");
    out
}

/// Heatmap text for a sweep cell: `test/train` deltas to three decimals.
pub fn sweep_cell_text(cell: &SweepCell) -> String {
    match (cell.valid, cell.test_delta, cell.train_delta) {
        (false, ..) => "invalid".to_owned(),
        (true, Some(te), Some(tr)) => format!("{te:.3}/{tr:.3}"),
        _ => "n/a".to_owned(),
    }
}

pub fn accuracy_chart(run: &ProbeRun) -> String {
    let pts = |f: fn(&crate::probe::LayerResult) -> f64| -> Vec<(f64, f64)> {
        run.layers.iter().map(|r| (r.params.layer as f64, f(r))).collect()
    };
    line_chart(
        "Probe accuracy by layer",
        "layer",
        "accuracy",
        &[
            Series::new("train", pts(|r| r.train.accuracy)),
            Series::new("test", pts(|r| r.test.accuracy)),
            Series::new("test baseline", pts(|r| r.test.random_baseline)).dashed(),
        ],
        None,
    )
}

pub fn separation_chart(results: &[LayerSeparation], direction: Direction) -> String {
    let mut types: Vec<_> = results.iter().flat_map(|r| r.by_type.keys().copied()).collect();
    types.sort();
    types.dedup();
    let mut series: Vec<Series> = types
        .iter()
        .map(|t| {
            let pts = results
                .iter()
                .filter_map(|r| {
                    let s = r.by_type.get(t)?.scores(direction);
                    let best = crate::separation::top_n(s, 1)[0];
                    Some((r.layer as f64, s[best]))
                })
                .collect();
            Series::new(t.to_string(), pts)
        })
        .collect();
    let mm = results
        .iter()
        .filter_map(|r| {
            let v = match direction {
                Direction::Known => r.maxmin_known,
                Direction::Forgotten => r.maxmin_forgotten,
            }?;
            Some((r.layer as f64, v.0))
        })
        .collect();
    series.push(Series::new("MaxMin", mm).dashed());
    let source = results.first().map_or("".to_owned(), |r| format!(" ({})", r.source));
    line_chart(&format!("Top separation score, {direction}{source}"), "layer", "separation score", &series, None)
}

pub fn sweep_heatmap(cells: &[SweepCell]) -> String {
    let mut ks: Vec<u32> = cells.iter().map(|c| c.k).collect();
    ks.sort();
    ks.dedup();
    let mut ls: Vec<f64> = cells.iter().map(|c| c.l).collect();
    ls.sort_by(f64::total_cmp);
    ls.dedup();
    let grid: Vec<Vec<HeatCell>> = ls
        .iter()
        .map(|&l| {
            ks.iter()
                .map(|&k| match cells.iter().find(|c| c.k == k && c.l == l) {
                    Some(c) => HeatCell { value: c.test_delta, text: sweep_cell_text(c) },
                    None => HeatCell { value: None, text: String::new() },
                })
                .collect()
        })
        .collect();
    heatmap(
        "Accuracy gain over baseline (test/train)",
        "k",
        "l",
        &ks.iter().map(|k| k.to_string()).collect::<Vec<_>>(),
        &ls.iter().map(|l| format!("{l}")).collect::<Vec<_>>(),
        &grid,
    )
}

pub fn robustness_chart(report: &RobustnessReport) -> String {
    let ticks: Vec<(f64, String)> =
        report.rows.iter().enumerate().map(|(i, r)| (i as f64, r.perturbation.to_string())).collect();
    let acc = report.rows.iter().enumerate().map(|(i, r)| (i as f64, r.test.mean.accuracy)).collect();
    let train = report.rows.iter().enumerate().map(|(i, _)| (i as f64, report.train.mean.accuracy)).collect();
    line_chart(
        "Test accuracy under context perturbation",
        "perturbation",
        "accuracy (mean over layers)",
        &[Series::new("test", acc), Series::new("train (shared)", train).dashed()],
        Some(&ticks),
    )
}

pub fn checkpoint_chart(curve: &CheckpointCurve) -> String {
    let mut series: Vec<Series> = (0..curve.n_layers)
        .map(|l| {
            Series::new(
                format!("layer {l}"),
                curve.steps.iter().enumerate().map(|(i, &s)| (s as f64, curve.test_accuracy[i][l])).collect(),
            )
        })
        .collect();
    series.push(
        Series::new("baseline", curve.steps.iter().zip(&curve.test_baseline).map(|(&s, &b)| (s as f64, b)).collect())
            .dashed(),
    );
    line_chart("Test accuracy by checkpoint", "step", "accuracy", &series, None)
}

/// Whatever results a report should cover.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ReportInputs {
    pub probes: Option<ProbeRun>,
    pub separation: Option<Vec<LayerSeparation>>,
    pub sweep: Option<Vec<SweepCell>>,
    pub robustness: Option<RobustnessReport>,
    pub checkpoints: Option<CheckpointCurve>,
}

/// Writes CSV files for every present result and SVG charts when `svg` is set.
/// Returns the written paths in creation order.
pub fn emit_report(inputs: &ReportInputs, dir: &Path, svg: bool) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put_csv = |name: &str, f: &dyn Fn(&Path) -> Result<()>| -> Result<()> {
        let p = dir.join(name);
        f(&p)?;
        written.push(p);
        Ok(())
    };
    if let Some(run) = &inputs.probes {
        put_csv("metrics.csv", &|p| write_csv(p, &metrics_rows(run)))?;
    }
    if let Some(sep) = &inputs.separation {
        put_csv("separation.csv", &|p| write_csv(p, &separation_rows(sep)))?;
        put_csv("maxmin.csv", &|p| write_csv(p, &maxmin_rows(sep)))?;
    }
    if let Some(cells) = &inputs.sweep {
        put_csv("sweep.csv", &|p| write_csv(p, &sweep_rows(cells)))?;
        put_csv("sweep_layers.csv", &|p| write_csv(p, &sweep_layer_rows(cells)))?;
    }
    if let Some(rep) = &inputs.robustness {
        put_csv("robustness.csv", &|p| write_csv(p, &robustness_rows(rep)))?;
    }
    if let Some(curve) = &inputs.checkpoints {
        put_csv("checkpoints.csv", &|p| write_csv(p, &checkpoint_rows(curve)))?;
    }
    if svg {
        let mut charts: Vec<(String, String)> = Vec::new();
        if let Some(run) = &inputs.probes {
            charts.push(("accuracy_by_layer.svg".into(), accuracy_chart(run)));
        }
        if let Some(sep) = inputs.separation.as_deref().filter(|s| !s.is_empty()) {
            for d in Direction::BOTH {
                charts.push((format!("separation_{d}.svg"), separation_chart(sep, d)));
            }
        }
        if let Some(cells) = inputs.sweep.as_deref().filter(|c| !c.is_empty()) {
            charts.push(("sweep_heatmap.svg".into(), sweep_heatmap(cells)));
        }
        if let Some(rep) = &inputs.robustness {
            charts.push(("robustness.svg".into(), robustness_chart(rep)));
        }
        if let Some(curve) = &inputs.checkpoints {
            charts.push(("checkpoints.svg".into(), checkpoint_chart(curve)));
        }
        for (name, body) in charts {
            let p = dir.join(name);
            std::fs::write(&p, body)?;
            written.push(p);
        }
    }
    Ok(written)
}

/// File names of the JSON result documents read by [`load_report_inputs`].
pub const RESULT_FILES: [&str; 5] = ["probes.json", "separation.json", "sweep.json", "robustness.json", "checkpoints.json"];

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Wrapper<T> {
    results: T,
}

pub fn write_results<T: Serialize>(path: &Path, results: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_vec_pretty(&Wrapper { results })?)?;
    Ok(())
}

pub fn read_results<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let w: Wrapper<T> = serde_json::from_slice(&std::fs::read(path)?)?;
    Ok(w.results)
}

/// Collects every result document present in `dir`.
pub fn load_report_inputs(dir: &Path) -> Result<ReportInputs> {
    let opt = |name: &str| dir.join(name).exists().then(|| dir.join(name));
    Ok(ReportInputs {
        probes: opt("probes.json").map(|p| crate::probe::read_probes(&p)).transpose()?,
        separation: opt("separation.json").map(|p| read_results(&p)).transpose()?,
        sweep: opt("sweep.json").map(|p| read_results(&p)).transpose()?,
        robustness: opt("robustness.json").map(|p| read_results(&p)).transpose()?,
        checkpoints: opt("checkpoints.json").map(|p| read_results(&p)).transpose()?,
    })
}
