//! Post-processing of an experiment directory.

use std::fs;
use std::path::{Path, PathBuf};

use spherelab_core::analysis::{
    finite_difference_temperature, free_energy_curve, gradient_phase_fit,
    kernel_smooth_gaussian_logtime, temperature_pipeline, Exclusion, PipelineConfig,
    PipelineReport, PowerLawFit, UniformBaseline,
};
use spherelab_core::Error as CoreError;

use crate::config::{AnalysisSection, ExperimentConfig};
use crate::error::{LabError, Result};
use crate::format::{self, float, opt_float, SeriesRow, Table};

/// Subdirectory of the experiment directory receiving the report.
pub const ANALYSIS_DIR: &str = "analysis";

/// Settings that take precedence over the stored config.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AnalysisOverrides {
    pub lr_range: Option<(f64, f64)>,
    pub epsilon: Option<f64>,
}

/// Finite-difference temperature along one non-stabilized trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct FdSeries {
    pub lr: f64,
    /// `(iteration, temperature)`; `None` where entropy did not move.
    pub points: Vec<(u64, Option<f64>)>,
}

impl FdSeries {
    /// Ratio of the first to the last defined positive temperature.
    pub fn decay_factor(&self) -> Option<f64> {
        let mut pos = self.points.iter().filter_map(|p| p.1).filter(|t| *t > 0.0);
        let first = pos.next()?;
        let last = pos.next_back()?;
        Some(first / last)
    }
}

/// What [`analyze`] computed.
#[derive(Debug, Clone)]
pub struct AnalysisReport {
    pub dir: PathBuf,
    pub verdicts: Vec<String>,
    pub pipeline: Option<PipelineReport>,
    pub free_energy_minima: Vec<(f64, bool)>,
    pub finite_difference: Vec<FdSeries>,
    pub phase_fits: Vec<(f64, Option<PowerLawFit>)>,
}

impl AnalysisReport {
    /// Whether every verdict that can fail passed.
    pub fn hypothesis_holds(&self) -> bool {
        self.pipeline
            .as_ref()
            .is_some_and(|p| p.curve.monotone && p.curve.well_defined)
            && self.free_energy_minima.iter().all(|m| m.1)
    }
}

fn finite_difference(lr: f64, rows: &[SeriesRow], a: &AnalysisSection) -> Result<Option<FdSeries>> {
    let windowed: Vec<&SeriesRow> = rows
        .iter()
        .filter(|r| r.entropy.is_some_and(f64::is_finite))
        .collect();
    if windowed.len() <= 2 * a.dt {
        return Ok(None);
    }
    let ts: Vec<u64> = windowed.iter().map(|r| r.iter).collect();
    let u: Vec<f64> = windowed.iter().map(|r| r.loss).collect();
    let s: Vec<f64> = windowed.iter().filter_map(|r| r.entropy).collect();
    let u = kernel_smooth_gaussian_logtime(&ts, &u, a.smoothing_sigma)?;
    let s = kernel_smooth_gaussian_logtime(&ts, &s, a.smoothing_sigma)?;
    let points = finite_difference_temperature(&u, &s, a.dt)?
        .into_iter()
        .map(|(i, t)| (ts[i], t))
        .collect();
    Ok(Some(FdSeries { lr, points }))
}

fn exclusion_name(e: Exclusion) -> &'static str {
    match e {
        Exclusion::OutsideRange => "outside_range",
        Exclusion::NotStabilized => "not_stabilized",
        Exclusion::Saturated => "saturated",
    }
}

/// Three temperatures spanning the usable intervals: first, middle, last.
fn representative_temperatures(p: &PipelineReport) -> Vec<f64> {
    let mids: Vec<f64> = p.curve.usable().filter_map(|i| i.midpoint()).collect();
    let mut picks: Vec<f64> = match mids.len() {
        0 => Vec::new(),
        n => vec![mids[0], mids[n / 2], mids[n - 1]],
    };
    picks.dedup();
    picks
}

/// Reads `dir`, writes `dir/analysis/*` and returns the verdicts.
///
/// Finite-difference temperatures and phase fits are always written. When
/// fewer than three learning rates are usable for temperature estimation the
/// report is written without a temperature curve and
/// [`LabError::MissingData`] is returned.
pub fn analyze(dir: &Path, overrides: &AnalysisOverrides) -> Result<AnalysisReport> {
    let cfg = ExperimentConfig::load(&dir.join(format::CONFIG_FILE))?;
    let summary_path = dir.join(format::SUMMARY_FILE);
    if !summary_path.exists() {
        return Err(LabError::MissingData(format!(
            "{} not found",
            summary_path.display()
        )));
    }
    let estimates = format::read_summary(&summary_path)?;
    let baseline_path = dir.join(format::BASELINE_FILE);
    let baseline: Option<UniformBaseline> = if baseline_path.exists() {
        Some(format::read_baseline(&baseline_path)?)
    } else {
        None
    };
    let mut a = cfg.analysis.clone();
    if let Some((lo, hi)) = overrides.lr_range {
        a.lr_range = Some([lo, hi]);
    }
    if let Some(eps) = overrides.epsilon {
        a.epsilon = eps;
    }

    let out = dir.join(ANALYSIS_DIR);
    fs::create_dir_all(&out).map_err(|e| LabError::io(&out, e))?;

    let mut report = AnalysisReport {
        dir: out.clone(),
        verdicts: Vec::new(),
        pipeline: None,
        free_energy_minima: Vec::new(),
        finite_difference: Vec::new(),
        phase_fits: Vec::new(),
    };

    let mut fd_table = Table::new(&["lr", "iter", "T"]);
    let mut phase_table = Table::new(&["lr", "coefficient", "exponent", "r_squared"]);
    for (i, e) in estimates.iter().enumerate() {
        let rows = format::read_series(&format::series_path(dir, i))?;
        let checkpoints: Vec<_> = rows.iter().map(SeriesRow::checkpoint).collect();
        let fit = match gradient_phase_fit(&checkpoints, 1e-300) {
            Ok(f) => Some(f),
            Err(CoreError::DegenerateX | CoreError::TooFewSamples { .. }) => None,
            Err(err) => return Err(err.into()),
        };
        phase_table.push(vec![
            float(e.lr),
            opt_float(fit.map(|f| f.coefficient)),
            opt_float(fit.map(|f| f.exponent)),
            opt_float(fit.map(|f| f.r_squared)),
        ]);
        report.phase_fits.push((e.lr, fit));
        if !e.stabilized {
            if let Some(fd) = finite_difference(e.lr, &rows, &a)? {
                for (iter, t) in &fd.points {
                    fd_table.push(vec![float(e.lr), iter.to_string(), opt_float(*t)]);
                }
                report.finite_difference.push(fd);
            }
        }
    }
    fd_table.write(&out.join("fd_temperature.csv"))?;
    phase_table.write(&out.join("phase_fit.csv"))?;

    let n_stable = estimates.iter().filter(|e| e.stabilized).count();
    report.verdicts.push(format!(
        "stabilized: {n_stable}/{} learning rates",
        estimates.len()
    ));
    if !report.finite_difference.is_empty() {
        let decays: Vec<String> = report
            .finite_difference
            .iter()
            .map(|fd| match fd.decay_factor() {
                Some(f) => format!("{:.3e}:{f:.3e}x", fd.lr),
                None => format!("{:.3e}:-", fd.lr),
            })
            .collect();
        report.verdicts.push(format!(
            "finite-difference temperature decay (lr:first/last): {}",
            decays.join(" ")
        ));
    }
    let exps: Vec<f64> = report
        .phase_fits
        .iter()
        .filter_map(|p| p.1.map(|f| f.exponent))
        .collect();
    if !exps.is_empty() {
        let mean = exps.iter().sum::<f64>() / exps.len() as f64;
        report.verdicts.push(format!(
            "phase fit: mean exponent {mean:.4} over {} learning rates",
            exps.len()
        ));
    }

    let pcfg = PipelineConfig {
        epsilon: a.epsilon,
        smoothing_h: a.smoothing_h,
        lr_range: a.lr_range.map(|[lo, hi]| (lo, hi)),
    };
    let shortfall = if estimates.iter().all(|e| e.entropy.is_nan()) {
        Some("no learning rate has an entropy estimate".to_owned())
    } else if pcfg.lr_range.is_none() && n_stable < 3 {
        Some(format!(
            "{n_stable} stabilized learning rates, need at least 3"
        ))
    } else {
        match temperature_pipeline(&estimates, baseline.as_ref(), &pcfg) {
            Ok(p) => {
                report.pipeline = Some(p);
                None
            }
            Err(CoreError::TooFewSamples { got, .. }) => Some(format!(
                "{got} learning rates retained for temperature estimation, need at least 3"
            )),
            Err(e) => return Err(e.into()),
        }
    };
    if let Some(msg) = shortfall {
        report
            .verdicts
            .push(format!("temperature: not estimated ({msg})"));
        write_report(&out, &report)?;
        return Err(LabError::MissingData(msg));
    }

    let p = report.pipeline.as_ref().expect("set above");
    let mut sel = Table::new(&["lr", "status"]);
    let mut status: Vec<(usize, &str)> = p
        .selection
        .retained
        .iter()
        .map(|i| (*i, "retained"))
        .collect();
    status.extend(
        p.selection
            .excluded
            .iter()
            .map(|(i, e)| (*i, exclusion_name(*e))),
    );
    status.sort_by_key(|s| s.0);
    for (i, s) in status {
        sel.push(vec![float(estimates[i].lr), s.to_owned()]);
    }
    sel.write(&out.join("selection.csv"))?;

    let mut smoothed = Table::new(&["lr", "U", "S"]);
    for e in &p.smoothed {
        smoothed.push(vec![float(e.lr), float(e.loss), float(e.entropy)]);
    }
    smoothed.write(&out.join("smoothed.csv"))?;
    format::write_temperature(&out.join("temperature.csv"), &p.curve.intervals)?;

    let mut fe = Table::new(&["T", "lr", "F", "argmin"]);
    for t in representative_temperatures(p) {
        let (f, best) = free_energy_curve(&p.smoothed, t)?;
        for (j, (e, v)) in p.smoothed.iter().zip(&f).enumerate() {
            fe.push(vec![
                float(t),
                float(e.lr),
                float(*v),
                (j == best).to_string(),
            ]);
        }
    }
    fe.write(&out.join("free_energy.csv"))?;

    let mut minima = Vec::new();
    for (j, iv) in p.curve.intervals.iter().enumerate() {
        if let (false, Some(t)) = (iv.empty, iv.midpoint()) {
            let (f, best) = free_energy_curve(&p.smoothed, t)?;
            minima.push((iv.lr, f[j] <= f[best] + a.epsilon));
        }
    }
    let nonempty = p.curve.intervals.iter().filter(|i| !i.empty).count();
    let excluded: Vec<String> = p
        .selection
        .excluded
        .iter()
        .map(|(i, e)| format!("{:.3e}({})", estimates[*i].lr, exclusion_name(*e)))
        .collect();
    let held = minima.iter().filter(|m| m.1).count();
    let total = minima.len();
    report.free_energy_minima = minima;
    report.verdicts.push(format!(
        "excluded: {}",
        if excluded.is_empty() {
            "none".to_owned()
        } else {
            excluded.join(" ")
        }
    ));
    report.verdicts.push(format!(
        "temperature intervals: {nonempty}/{} nonempty at epsilon {}",
        p.curve.intervals.len(),
        a.epsilon
    ));
    report
        .verdicts
        .push(format!("well-defined: {}", p.curve.well_defined));
    report
        .verdicts
        .push(format!("monotone: {}", p.curve.monotone));
    report.verdicts.push(format!(
        "free-energy minimum: {held}/{total} learning rates minimize F within epsilon at their midpoint temperature"
    ));
    write_report(&out, &report)?;
    Ok(report)
}

fn write_report(out: &Path, report: &AnalysisReport) -> Result<()> {
    let mut text = report.verdicts.join("\n");
    text.push('\n');
    format::write_text(&out.join("report.txt"), &text)
}
