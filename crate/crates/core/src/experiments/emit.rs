use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::matching::GroupErrors;
use super::scenario::{ScenarioOutput, StabilityCheck, TrialDetail, TrialResult};
use super::summary::Summary;
use super::svg::{box_plot, line_plot, Series, ESTIMATE_COLOR, RAW_COLOR, TRUTH_COLOR};
use crate::error::{Error, Result};
use crate::grid::Measurement;
use crate::models::{order_label, FriOrder, FriParams, ModelInstance};
use crate::render::{chirp_profile, closed_unit_grid, extrapolate, fri_truth_render, synthesize, PhysicalGrid};

/// Which artefacts [`emit`] writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    /// `trials.csv`, `measurement.csv` and the figure data tables.
    Csv,
    /// `summary.json`, `config.json` and `metadata.json`.
    Json,
    /// Boxplots and signal plots.
    Svg,
    All,
}

const FIXED_COLUMNS: [&str; 9] = [
    "trial",
    "seed",
    "snr_db",
    "sigma",
    "final_residual",
    "iterations",
    "admissible",
    "reinit_count",
    "status",
];

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn float_list(v: &[f64]) -> String {
    v.iter().map(|x| float(*x)).collect::<Vec<_>>().join(";")
}

/// Group labels in order of first appearance.
fn group_labels(trials: &[TrialResult]) -> Vec<String> {
    let mut labels: Vec<String> = Vec::new();
    for g in trials.iter().flat_map(|t| &t.groups) {
        if !labels.contains(&g.label) {
            labels.push(g.label.clone());
        }
    }
    labels
}

/// Header of `trials.csv`: the fixed columns, then `pos_err[label]` and
/// `amp_err[label]` per source group, then `hi_err[K]`, `bound[K]` and
/// `stab_ok[K]` per high cutoff. Error cells hold `;`-separated lists.
pub fn trials_header(labels: &[String], k_high: &[usize]) -> Vec<String> {
    let mut h: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    for l in labels {
        h.push(format!("pos_err[{l}]"));
        h.push(format!("amp_err[{l}]"));
    }
    for k in k_high {
        h.push(format!("hi_err[{k}]"));
        h.push(format!("bound[{k}]"));
        h.push(format!("stab_ok[{k}]"));
    }
    h
}

pub fn write_trials_csv<W: Write>(
    w: W,
    trials: &[TrialResult],
    k_high: &[usize],
) -> std::result::Result<(), csv::Error> {
    let labels = group_labels(trials);
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(trials_header(&labels, k_high))?;
    for t in trials {
        let mut row = vec![
            t.trial.to_string(),
            t.seed.to_string(),
            float(t.snr_db),
            float(t.sigma),
            float(t.final_residual),
            t.iterations.to_string(),
            t.admissible.map(|b| b.to_string()).unwrap_or_default(),
            t.reinit_count.to_string(),
            t.status.clone(),
        ];
        for l in &labels {
            match t.groups.iter().find(|g| &g.label == l) {
                Some(g) => {
                    row.push(float_list(&g.position_errors));
                    row.push(float_list(&g.amplitude_errors));
                }
                None => row.extend([String::new(), String::new()]),
            }
        }
        for k in k_high {
            match t.stability.iter().find(|s| s.k_high == *k) {
                Some(s) => row.extend([float(s.hi_err), float(s.bound), s.ok.to_string()]),
                None => row.extend([String::new(), String::new(), String::new()]),
            }
        }
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

fn bracketed<'a>(column: &'a str, prefix: &str) -> Option<&'a str> {
    column.strip_prefix(prefix)?.strip_prefix('[')?.strip_suffix(']')
}

/// Parses `trials.csv` back into trial rows (without render detail).
pub fn read_trials_csv<R: Read>(r: R) -> std::result::Result<Vec<TrialResult>, String> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<String> = rd
        .headers()
        .map_err(|e| e.to_string())?
        .iter()
        .map(str::to_string)
        .collect();
    if header.len() < FIXED_COLUMNS.len() || header[..FIXED_COLUMNS.len()] != FIXED_COLUMNS {
        return Err(format!("unexpected trials.csv header `{}`", header.join(",")));
    }
    let mut out = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let bad = |col: &str, e: &dyn std::fmt::Display| format!("row {}: bad {col}: {e}", line + 1);
        let get = |i: usize| rec.get(i).unwrap_or("");
        let f = |i: usize| get(i).parse::<f64>().map_err(|e| bad(&header[i], &e));
        let u = |i: usize| get(i).parse::<u64>().map_err(|e| bad(&header[i], &e));
        let list = |i: usize| -> std::result::Result<Vec<f64>, String> {
            get(i)
                .split(';')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>().map_err(|e| bad(&header[i], &e)))
                .collect()
        };
        let admissible = match get(6) {
            "" => None,
            s => Some(s.parse::<bool>().map_err(|e| bad("admissible", &e))?),
        };
        let mut t = TrialResult {
            trial: u(0)? as usize,
            seed: u(1)?,
            snr_db: f(2)?,
            sigma: f(3)?,
            final_residual: f(4)?,
            iterations: u(5)? as usize,
            admissible,
            reinit_count: u(7)? as usize,
            status: get(8).to_string(),
            groups: Vec::new(),
            stability: Vec::new(),
            detail: None,
        };
        let mut i = FIXED_COLUMNS.len();
        while i < header.len() {
            if let Some(label) = bracketed(&header[i], "pos_err") {
                if !(get(i).is_empty() && get(i + 1).is_empty()) {
                    t.groups.push(GroupErrors {
                        label: label.to_string(),
                        position_errors: list(i)?,
                        amplitude_errors: list(i + 1)?,
                    });
                }
                i += 2;
            } else if let Some(k) = bracketed(&header[i], "hi_err") {
                let k_high = k.parse::<usize>().map_err(|e| bad(&header[i], &e))?;
                if !get(i).is_empty() {
                    t.stability.push(StabilityCheck {
                        k_high,
                        hi_err: f(i)?,
                        bound: f(i + 1)?,
                        ok: get(i + 2).parse::<bool>().map_err(|e| bad(&header[i + 2], &e))?,
                    });
                }
                i += 3;
            } else {
                return Err(format!("unknown column `{}`", header[i]));
            }
        }
        out.push(t);
    }
    Ok(out)
}

pub fn save_trials_csv(path: &Path, trials: &[TrialResult], k_high: &[usize]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_trials_csv(std::io::BufWriter::new(f), trials, k_high).map_err(|e| Error::csv(path, e))
}

pub fn load_trials_csv(path: &Path) -> Result<Vec<TrialResult>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_trials_csv(std::io::BufReader::new(f)).map_err(|message| Error::Parse {
        path: path.to_path_buf(),
        message,
    })
}

pub fn save_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Run information that may differ between otherwise identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub created_unix_seconds: u64,
    pub crate_version: String,
    pub scenario: String,
    pub trials: usize,
    pub seed: u64,
}

impl Metadata {
    pub fn now(config: &ExperimentConfig) -> Self {
        Metadata {
            created_unix_seconds: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            scenario: config.scenario.name().to_string(),
            trials: config.trials,
            seed: config.seed,
        }
    }
}

/// Data behind one signal plot, stored in long form (`series,x,re,im`).
#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    pub name: String,
    pub title: String,
    pub series: Vec<(Series, Vec<Complex64>)>,
}

impl Figure {
    fn new(name: String, title: String) -> Self {
        Figure {
            name,
            title,
            series: Vec::new(),
        }
    }

    fn push(&mut self, series: Series, values: Vec<Complex64>) {
        self.series.push((series, values));
    }

    /// Adds a line series of `f(values)` over `x`.
    fn curve(&mut self, name: &str, color: &str, x: &[f64], values: Vec<Complex64>, f: fn(Complex64) -> f64) {
        let pts = x.iter().zip(&values).map(|(&x, &v)| (x, f(v))).collect();
        self.push(Series::line(name, color, pts), values);
    }

    pub fn write_csv<W: Write>(&self, w: W) -> std::result::Result<(), csv::Error> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["series", "x", "re", "im"])?;
        for (s, values) in &self.series {
            for ((x, _), v) in s.points.iter().zip(values) {
                wr.write_record([s.name.clone(), float(*x), float(v.re), float(v.im)])?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    pub fn svg(&self, y_label: &str) -> String {
        let series: Vec<Series> = self.series.iter().map(|(s, _)| s.clone()).collect();
        line_plot(&self.title, "x", y_label, &series)
    }
}

const RENDER_POINTS: usize = 2048;

fn physical_grid(k_max: usize) -> PhysicalGrid {
    PhysicalGrid::for_k_max(k_max.max(RENDER_POINTS / 2))
}

/// `sum_k g_k e^{2 pi i k x} / (2K + 1)`, which puts a unit source at height 1.
fn normalized_synthesis(m: &Measurement, grid: &PhysicalGrid) -> Result<Vec<Complex64>> {
    let norm = (2 * m.grid().k_max() + 1) as f64;
    Ok(synthesize(m, grid)?.into_iter().map(|v| v / norm).collect())
}

fn render_cutoffs(config: &ExperimentConfig) -> Vec<usize> {
    if config.k_high.is_empty() {
        vec![config.k_low]
    } else {
        config.k_high.clone()
    }
}

fn only_order(p: &FriParams, r: usize) -> Result<FriParams> {
    let orders = (0..p.orders.len())
        .map(|i| if i == r { p.orders[i].clone() } else { FriOrder::empty() })
        .collect();
    FriParams::new(orders)
}

/// Figures for one trial: the low-resolution input (grey), the truth (red)
/// and the resolution-enhanced reconstruction (blue).
pub fn trial_figures(config: &ExperimentConfig, detail: &TrialDetail) -> Result<Vec<Figure>> {
    let Some(report) = &detail.report else {
        return Ok(Vec::new());
    };
    let (truth, est, y) = (&detail.truth, &report.theta_hat, &detail.measurement);
    let re = |v: Complex64| v.re;
    let abs = |v: Complex64| v.norm();
    let mut figs = Vec::new();
    match (truth, est) {
        (ModelInstance::Chirp(t), ModelInstance::Chirp(e)) => {
            let divisor = t.grid.divisor;
            let mut original = synthesize(y, &PhysicalGrid::new(divisor)?)?;
            original.push(original[0]);
            for n in [divisor, 4095] {
                let x = closed_unit_grid(n);
                let mut f = Figure::new(format!("profile_{n}"), format!("|psi| on step 1/{n}"));
                if n == divisor {
                    f.curve("original", RAW_COLOR, &x, original.clone(), abs);
                }
                f.curve("truth", TRUTH_COLOR, &x, chirp_profile(t, &x), abs);
                f.curve("reconstruction", ESTIMATE_COLOR, &x, chirp_profile(e, &x), abs);
                figs.push(f);
            }
        }
        _ => {
            for k in render_cutoffs(config) {
                let grid = physical_grid(k);
                let x = grid.points();
                let mut f = Figure::new(format!("signal_k{k}"), format!("K_L = {}, K_H = {k}", config.k_low));
                f.curve("original", RAW_COLOR, &x, normalized_synthesis(y, &grid)?, re);
                match truth {
                    ModelInstance::Point(p) => {
                        let pts: Vec<(f64, f64)> =
                            p.positions.iter().copied().zip(p.amplitudes.iter().copied()).collect();
                        let vals = pts.iter().map(|&(_, a)| Complex64::new(a, 0.0)).collect();
                        f.push(Series::stem("truth", TRUTH_COLOR, pts), vals);
                    }
                    _ => {
                        let t = normalized_synthesis(&extrapolate(truth, k)?.measurement, &grid)?;
                        f.curve("truth", TRUTH_COLOR, &x, t, re);
                    }
                }
                let e = normalized_synthesis(&extrapolate(est, k)?.measurement, &grid)?;
                f.curve("reconstruction", ESTIMATE_COLOR, &x, e, re);
                figs.push(f);

                if let (ModelInstance::Fri(tp), ModelInstance::Fri(ep)) = (truth, est) {
                    let norm = (2 * k + 1) as f64;
                    for r in 0..tp.orders.len() {
                        if tp.orders[r].is_empty() {
                            continue;
                        }
                        let label = order_label(r);
                        let mut f = Figure::new(format!("{label}_k{k}"), format!("{label} terms, K_H = {k}"));
                        let scaled = |v: Vec<Complex64>| v.into_iter().map(|z| z / norm).collect::<Vec<_>>();
                        f.curve(
                            "truth",
                            TRUTH_COLOR,
                            &x,
                            scaled(fri_truth_render(&only_order(tp, r)?, k, &grid)?),
                            re,
                        );
                        f.curve(
                            "reconstruction",
                            ESTIMATE_COLOR,
                            &x,
                            scaled(fri_truth_render(&only_order(ep, r)?, k, &grid)?),
                            re,
                        );
                        figs.push(f);
                    }
                }
            }
        }
    }
    // Draw the truth on top.
    for f in &mut figs {
        f.series.sort_by_key(|(s, _)| s.name == "truth");
    }
    Ok(figs)
}

fn boxplots(summary: &Summary) -> Vec<(String, String)> {
    let pos = summary
        .groups
        .iter()
        .map(|g| (g.label.clone(), g.position_error.clone()))
        .collect::<Vec<_>>();
    let amp = summary
        .groups
        .iter()
        .map(|g| (g.label.clone(), g.amplitude_error.clone()))
        .collect::<Vec<_>>();
    vec![
        ("position_errors.svg".into(), box_plot("Position errors", "error", &pos)),
        (
            "amplitude_errors.svg".into(),
            box_plot("Amplitude errors", "error", &amp),
        ),
    ]
}

/// Writes the artefacts of `format` into `dir` (created if missing) and
/// returns the paths written. Figures use the first trial that finished.
pub fn emit(output: &ScenarioOutput, format: Format, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let want = |f: Format| format == Format::All || format == f;
    let mut written = Vec::new();
    let mut put = |name: &str| -> PathBuf {
        let p = dir.join(name);
        written.push(p.clone());
        p
    };
    let config = &output.config;
    let shown = output
        .trials
        .iter()
        .find_map(|t| t.detail.as_deref().filter(|d| d.report.is_some()));
    let figures = match shown {
        Some(d) if want(Format::Csv) || want(Format::Svg) => trial_figures(config, d)?,
        _ => Vec::new(),
    };

    if want(Format::Csv) {
        save_trials_csv(&put("trials.csv"), &output.trials, &config.k_high)?;
        if let Some(d) = shown {
            d.measurement.save_csv(&put("measurement.csv"))?;
        }
        for f in &figures {
            let p = put(&format!("{}.csv", f.name));
            let file = std::fs::File::create(&p).map_err(|e| Error::io(&p, e))?;
            f.write_csv(std::io::BufWriter::new(file))
                .map_err(|e| Error::csv(&p, e))?;
        }
    }
    if want(Format::Json) {
        save_json(&put("summary.json"), &output.summary)?;
        save_json(&put("config.json"), config)?;
        save_json(&put("metadata.json"), &Metadata::now(config))?;
    }
    if want(Format::Svg) {
        for (name, svg) in boxplots(&output.summary) {
            write_text(&put(&name), &svg)?;
        }
        let chirp = matches!(shown.map(|d| &d.truth), Some(ModelInstance::Chirp(_)));
        for f in &figures {
            write_text(
                &put(&format!("{}.svg", f.name)),
                &f.svg(if chirp { "|psi(x)|" } else { "Re s(x)" }),
            )?;
        }
    }
    Ok(written)
}
