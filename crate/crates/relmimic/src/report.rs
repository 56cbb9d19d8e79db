//! CSV logs, learning curves, CCDF tables and a small SVG plot.
//!
//! Each seed directory holds `progress.csv` (with wall-clock time) and
//! `metrics.csv` (identical except for the time column, so reruns produce
//! byte-identical files). Floats are written in shortest round-trip form.

use std::fmt::Write as _;
use std::fs::File;
use std::path::{Path, PathBuf};

use relmimic_core::metrics::{ccdf, CcdfReport};

use crate::error::{Error, Result};
use crate::train::IterationLog;

const METRIC_COLUMNS: [&str; 6] = [
    "iteration",
    "surrogate_return",
    "train_progress",
    "eval_progress",
    "disc_accuracy",
    "policy_entropy",
];

fn cell(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

fn parse_cell(path: &Path, s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| Error::format(path, format!("not a number: `{s}`")))
}

fn create(path: &Path) -> Result<csv::Writer<File>> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

fn open(path: &Path) -> Result<csv::Reader<File>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Reader::from_reader(f))
}

/// Streams log rows to `progress.csv` and `metrics.csv`, flushing each row.
pub struct LogWriter {
    progress: csv::Writer<File>,
    metrics: csv::Writer<File>,
}

impl LogWriter {
    pub fn create(dir: &Path) -> Result<LogWriter> {
        let mut progress = create(&dir.join("progress.csv"))?;
        let mut metrics = create(&dir.join("metrics.csv"))?;
        let mut header = vec!["iteration", "wall_time"];
        header.extend(&METRIC_COLUMNS[1..]);
        progress.write_record(&header)?;
        metrics.write_record(METRIC_COLUMNS)?;
        Ok(LogWriter { progress, metrics })
    }

    pub fn write(&mut self, row: &IterationLog) -> Result<()> {
        let tail = [
            cell(row.surrogate_return),
            cell(row.train_progress),
            cell(row.eval_progress),
            cell(row.disc_accuracy),
            cell(row.policy_entropy.is_finite().then_some(row.policy_entropy)),
        ];
        let it = row.iteration.to_string();
        let mut p = vec![it.clone(), row.wall_time.to_string()];
        p.extend(tail.iter().cloned());
        let mut m = vec![it];
        m.extend(tail);
        self.progress.write_record(&p)?;
        self.metrics.write_record(&m)?;
        self.progress.flush().map_err(|e| Error::io(Path::new("progress.csv"), e))?;
        self.metrics.flush().map_err(|e| Error::io(Path::new("metrics.csv"), e))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.progress.flush().map_err(|e| Error::io(Path::new("progress.csv"), e))?;
        self.metrics.flush().map_err(|e| Error::io(Path::new("metrics.csv"), e))
    }
}

/// One parsed `metrics.csv` row.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub iteration: usize,
    pub surrogate_return: Option<f64>,
    pub train_progress: Option<f64>,
    pub eval_progress: Option<f64>,
    pub disc_accuracy: Option<f64>,
    pub policy_entropy: Option<f64>,
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut rd = open(path)?;
    let header = rd.headers()?.clone();
    if header.iter().ne(METRIC_COLUMNS) {
        return Err(Error::format(path, "unexpected metrics header"));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let iteration = rec[0]
            .parse()
            .map_err(|_| Error::format(path, format!("bad iteration `{}`", &rec[0])))?;
        rows.push(MetricsRow {
            iteration,
            surrogate_return: parse_cell(path, &rec[1])?,
            train_progress: parse_cell(path, &rec[2])?,
            eval_progress: parse_cell(path, &rec[3])?,
            disc_accuracy: parse_cell(path, &rec[4])?,
            policy_entropy: parse_cell(path, &rec[5])?,
        });
    }
    Ok(rows)
}

pub fn write_returns(path: &Path, returns: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["episode", "progress"])?;
    for (i, r) in returns.iter().enumerate() {
        w.write_record([i.to_string(), r.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_returns(path: &Path) -> Result<Vec<f64>> {
    let mut rd = open(path)?;
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let v = parse_cell(path, rec.get(1).unwrap_or(""))?
            .ok_or_else(|| Error::format(path, "missing progress value"))?;
        out.push(v);
    }
    Ok(out)
}

/// Across-seed statistics of the evaluation progress at one iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub iteration: usize,
    pub seeds: usize,
    pub mean: f64,
    /// Population standard deviation across seeds.
    pub std: f64,
}

/// Mean and spread of `eval_progress` over seeds, at every iteration that at
/// least one seed evaluated.
pub fn learning_curve(runs: &[Vec<MetricsRow>]) -> Vec<CurvePoint> {
    let mut by_iter: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    for run in runs {
        for row in run {
            if let Some(v) = row.eval_progress {
                by_iter.entry(row.iteration).or_default().push(v);
            }
        }
    }
    by_iter
        .into_iter()
        .map(|(iteration, v)| {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            CurvePoint {
                iteration,
                seeds: v.len(),
                mean,
                std: var.sqrt(),
            }
        })
        .collect()
}

pub fn write_curve(path: &Path, curve: &[CurvePoint]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["iteration", "seeds", "mean", "std"])?;
    for p in curve {
        w.write_record([
            p.iteration.to_string(),
            p.seeds.to_string(),
            p.mean.to_string(),
            p.std.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_curve(path: &Path) -> Result<Vec<CurvePoint>> {
    let mut rd = open(path)?;
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let bad = || Error::format(path, "malformed curve row");
        out.push(CurvePoint {
            iteration: rec[0].parse().map_err(|_| bad())?,
            seeds: rec[1].parse().map_err(|_| bad())?,
            mean: rec[2].parse().map_err(|_| bad())?,
            std: rec[3].parse().map_err(|_| bad())?,
        });
    }
    Ok(out)
}

pub fn write_ccdf(path: &Path, report: &CcdfReport) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["threshold", "survival"])?;
    for (t, s) in report.thresholds.iter().zip(&report.survival) {
        w.write_record([t.to_string(), s.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_ccdf(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut rd = open(path)?;
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let bad = || Error::format(path, "malformed ccdf row");
        out.push((rec[0].parse().map_err(|_| bad())?, rec[1].parse().map_err(|_| bad())?));
    }
    Ok(out)
}

/// Everything derived from a finished run directory.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub seeds: Vec<PathBuf>,
    pub curve: Vec<CurvePoint>,
    pub ccdf: CcdfReport,
    /// Mean final evaluation progress over all seeds and episodes.
    pub final_mean: f64,
}

/// Seed subdirectories (`seed_*`) of a run, sorted by name.
pub fn seed_dirs(run: &Path) -> Result<Vec<PathBuf>> {
    let rd = std::fs::read_dir(run).map_err(|e| Error::io(run, e))?;
    let mut dirs: Vec<PathBuf> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_dir()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("seed_"))
        })
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::format(run, "no seed_* directories"));
    }
    Ok(dirs)
}

/// Aggregate a run directory, writing `curve.csv`, `ccdf.csv` and
/// `summary.csv` next to the seed directories.
pub fn report_run(run: &Path, label: &str, expert: Option<f64>) -> Result<RunReport> {
    let seeds = seed_dirs(run)?;
    let mut logs = Vec::with_capacity(seeds.len());
    let mut returns = Vec::new();
    for d in &seeds {
        logs.push(read_metrics(&d.join("metrics.csv"))?);
        let eval = d.join("eval.csv");
        if eval.exists() {
            returns.extend(read_returns(&eval)?);
        }
    }
    if returns.is_empty() {
        return Err(Error::format(run, "no finished seed (eval.csv missing)"));
    }
    let curve = learning_curve(&logs);
    let report = ccdf(&returns)?;
    let final_mean = returns.iter().sum::<f64>() / returns.len() as f64;
    write_curve(&run.join("curve.csv"), &curve)?;
    write_ccdf(&run.join("ccdf.csv"), &report)?;
    let path = run.join("summary.csv");
    let mut w = create(&path)?;
    w.write_record(["variant", "seeds", "episodes", "final_mean", "ccdf_area", "expert_mean"])?;
    w.write_record([
        label.to_string(),
        seeds.len().to_string(),
        returns.len().to_string(),
        final_mean.to_string(),
        report.area.to_string(),
        cell(expert),
    ])?;
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(RunReport {
        seeds,
        curve,
        ccdf: report,
        final_mean,
    })
}

const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Learning curves as mean lines with a one-standard-deviation band.
pub fn curves_svg(series: &[(String, Vec<CurvePoint>)]) -> String {
    let (w, h, m) = (640.0, 400.0, 50.0);
    let pts = series.iter().flat_map(|s| s.1.iter());
    let x_max = pts.clone().map(|p| p.iteration).max().unwrap_or(1).max(1) as f64;
    let y_max = pts.map(|p| p.mean + p.std).fold(1e-9, f64::max);
    let sx = |i: usize| m + (w - 2.0 * m) * i as f64 / x_max;
    let sy = |v: f64| h - m - (h - 2.0 * m) * v.max(0.0) / y_max;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{w}" height="{h}" fill="white"/><line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{m}" y1="{m}" x2="{m}" y2="{b}" stroke="black"/>"#,
        b = h - m,
        r = w - m
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">iteration</text><text x="12" y="{m}">progress (m)</text>"#,
        w / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">{x_max}</text><text x="{}" y="{}" text-anchor="end">{y_max:.1}</text>"#,
        w - m,
        h - m + 16.0,
        m - 4.0,
        m + 4.0
    );
    for (n, (label, curve)) in series.iter().enumerate() {
        let color = PALETTE[n % PALETTE.len()];
        if curve.is_empty() {
            continue;
        }
        let upper = curve.iter().map(|p| format!("{:.1},{:.1}", sx(p.iteration), sy(p.mean + p.std)));
        let lower = curve.iter().rev().map(|p| format!("{:.1},{:.1}", sx(p.iteration), sy(p.mean - p.std)));
        let band: Vec<String> = upper.chain(lower).collect();
        let _ = writeln!(s, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2"/>"#, band.join(" "));
        let line: Vec<String> = curve
            .iter()
            .map(|p| format!("{:.1},{:.1}", sx(p.iteration), sy(p.mean)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            line.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{label}</text>"#,
            m + 10.0,
            m + 16.0 * (n as f64 + 1.0)
        );
    }
    s.push_str("</svg>\n");
    s
}
