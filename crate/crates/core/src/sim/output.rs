//! Sweep results: confidence intervals, slope fits, CSV, plot, manifest.

use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use plotters::prelude::*;
use serde::{Deserialize, Serialize};
use sha1::{Digest, Sha1};

use crate::error::{Error, Result};

use super::config::SimConfig;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959964;

/// Rows with fewer errors than this are left out of slope fits.
pub const MIN_FIT_ERRORS: u64 = 50;

/// One power point; field order is the CSV column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimRow {
    pub p_db: f64,
    pub trials: u64,
    pub word_errors: u64,
    pub wep: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub degenerate_resamples: u64,
}

impl SimRow {
    /// `trials` counts scored words, which is twice the trial count for per-receiver scoring.
    pub fn new(p_db: f64, trials: u64, word_errors: u64, degenerate_resamples: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(word_errors, trials, Z95);
        SimRow {
            p_db,
            trials,
            word_errors,
            wep: if trials == 0 { 0.0 } else { word_errors as f64 / trials as f64 },
            ci_low,
            ci_high,
            degenerate_resamples,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimResult {
    pub rows: Vec<SimRow>,
}

/// Wilson score interval for `k` successes in `n` trials, clamped to [0, 1]
/// and widened if rounding would leave k/n outside it.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlopeEstimate {
    /// Negated slope of log10(wep) against P_dB / 10.
    pub slope: f64,
    /// Standard error of the slope; zero for a two-point fit.
    pub stderr: f64,
    pub points: usize,
}

/// Least-squares diversity estimate over the rows in `window` that have at
/// least [`MIN_FIT_ERRORS`] errors.
pub fn estimate_diversity_slope(res: &SimResult, window: Range<usize>) -> Result<SlopeEstimate> {
    let rows = res.rows.get(window.clone()).ok_or_else(|| {
        Error::Config(format!("window {window:?} outside result with {} rows", res.rows.len()))
    })?;
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.word_errors >= MIN_FIT_ERRORS && r.wep > 0.0)
        .map(|r| (r.p_db / 10.0, r.wep.log10()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Insufficient(format!(
            "{} of {} rows have at least {MIN_FIT_ERRORS} errors, need 2",
            pts.len(),
            rows.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let b = sxy / sxx;
    let stderr = if pts.len() > 2 {
        let sse: f64 = pts.iter().map(|p| (p.1 - my - b * (p.0 - mx)).powi(2)).sum();
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(SlopeEstimate { slope: -b, stderr, points: pts.len() })
}

pub fn write_csv(res: &SimResult, path: &Path) -> Result<()> {
    let csv_err = |e| Error::Csv { path: path.to_path_buf(), source: e };
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(csv_err)?;
    w.write_record(["p_db", "trials", "word_errors", "wep", "ci_low", "ci_high", "degenerate_resamples"])
        .map_err(csv_err)?;
    for row in &res.rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<SimResult> {
    let csv_err = |e| Error::Csv { path: path.to_path_buf(), source: e };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<SimRow>, _>>().map_err(csv_err)?;
    Ok(SimResult { rows })
}

/// Git blob hash of `text`: SHA-1 over "blob <len>\0" followed by the bytes.
pub fn config_hash(text: &str) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", text.len()).as_bytes());
    h.update(text.as_bytes());
    format!("{:x}", h.finalize())
}

fn plot_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

/// Log-scale WEP against P_dB; zero-error rows are not drawn.
pub fn write_plot(res: &SimResult, title: &str, path: &Path) -> Result<()> {
    let pts: Vec<(f64, f64)> = res.rows.iter().filter(|r| r.wep > 0.0).map(|r| (r.p_db, r.wep)).collect();
    let (x0, x1) = match (res.rows.first(), res.rows.last()) {
        (Some(a), Some(b)) if b.p_db > a.p_db => (a.p_db, b.p_db),
        (Some(a), _) => (a.p_db - 1.0, a.p_db + 1.0),
        _ => (0.0, 1.0),
    };
    let lowest = res.rows.iter().filter(|r| r.ci_low > 0.0).map(|r| r.ci_low).fold(1.0, f64::min);
    let y0 = 10f64.powf(lowest.log10().floor().min(-1.0));

    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(path, e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, (y0..1.0).log_scale())
        .map_err(|e| plot_err(path, e))?;
    chart
        .configure_mesh()
        .x_desc("P (dB)")
        .y_desc("WEP")
        .y_label_formatter(&|v| format!("{v:.0e}"))
        .draw()
        .map_err(|e| plot_err(path, e))?;
    chart.draw_series(LineSeries::new(pts.iter().copied(), &BLUE)).map_err(|e| plot_err(path, e))?;
    chart
        .draw_series(pts.iter().map(|&p| Circle::new(p, 3, BLUE.filled())))
        .map_err(|e| plot_err(path, e))?;
    root.present().map_err(|e| plot_err(path, e))
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputPaths {
    pub csv: PathBuf,
    pub plot: PathBuf,
    pub manifest: PathBuf,
}

/// Writes `wep.csv`, `wep.svg` and `manifest.txt` into `dir`.
pub fn emit_outputs(res: &SimResult, cfg: &SimConfig, dir: &Path) -> Result<OutputPaths> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = OutputPaths { csv: dir.join("wep.csv"), plot: dir.join("wep.svg"), manifest: dir.join("manifest.txt") };
    write_csv(res, &paths.csv)?;
    let title = format!("{} {}", cfg.scheme, cfg.constellation);
    write_plot(res, &title, &paths.plot)?;
    let text = cfg.to_text();
    let manifest = format!(
        "{text}config_hash={}\nversion={}\n",
        config_hash(&text),
        env!("CARGO_PKG_VERSION")
    );
    fs::write(&paths.manifest, manifest).map_err(|e| Error::io(&paths.manifest, e))?;
    Ok(paths)
}
