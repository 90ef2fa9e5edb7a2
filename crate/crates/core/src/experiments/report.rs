//! Aggregated experiment reports and their CSV/JSON encodings.
//!
//! Reports carry no wall-clock data so that identical inputs give
//! byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ExperimentKind, Snr, Sweep, SweepSpec, TrialRecord};
use crate::error::{RafError, Result};
use crate::init::InitConfig;
use crate::sensing::ModelKind;
use crate::solver::SolverConfig;

pub const CSV_HEADER: [&str; 15] = [
    "index",
    "label",
    "m_over_n",
    "m",
    "snr_db",
    "masks",
    "init_variant",
    "trials",
    "successes",
    "success_rate",
    "mean_relative_error",
    "mean_nmse",
    "mean_init_error",
    "median_final_loss",
    "config_hash",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub index: usize,
    pub label: String,
    pub m_over_n: f64,
    pub m: usize,
    pub snr_db: Option<Snr>,
    pub masks: Option<usize>,
    pub init_variant: Option<String>,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_relative_error: Option<f64>,
    pub mean_nmse: Option<f64>,
    pub mean_init_error: f64,
    pub median_final_loss: Option<f64>,
    /// Truncated SHA-256 of every setting that produced this row.
    pub config_hash: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

/// Unit-width histogram of `−log10 L(z^T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub quantity: String,
    pub bins: Vec<HistogramBin>,
}

impl Histogram {
    pub fn of_neg_log10(losses: &[f64]) -> Self {
        let values: Vec<f64> = losses.iter().map(|l| -(l.max(1e-300)).log10()).collect();
        let mut bins = Vec::new();
        if let (Some(lo), Some(hi)) = (
            values.iter().copied().reduce(f64::min),
            values.iter().copied().reduce(f64::max),
        ) {
            let first = lo.floor() as i64;
            let last = hi.floor() as i64;
            for edge in first..=last {
                bins.push(HistogramBin {
                    lower: edge as f64,
                    upper: edge as f64 + 1.0,
                    count: 0,
                });
            }
            for v in values {
                bins[(v.floor() as i64 - first) as usize].count += 1;
            }
        }
        Self {
            quantity: "-log10(final loss)".into(),
            bins,
        }
    }
}

/// The scale at which the corresponding published study was run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceScale {
    pub n: usize,
    pub trials: usize,
}

impl ReferenceScale {
    pub fn for_experiment(kind: ExperimentKind) -> Self {
        match kind {
            ExperimentKind::SuccessRate
            | ExperimentKind::NmseVsSnr
            | ExperimentKind::InitQuality => Self {
                n: 1000,
                trials: 100,
            },
            ExperimentKind::LimitHistogram => Self {
                n: 2000,
                trials: 200,
            },
            ExperimentKind::CdpRecovery => Self {
                n: 1080 * 1920,
                trials: 3,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: ExperimentKind,
    pub model: ModelKind,
    pub n: usize,
    pub trials: usize,
    pub master_seed: u64,
    pub success_threshold: f64,
    pub init: InitConfig,
    pub solver: SolverConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    pub reference_scale: ReferenceScale,
    pub rows: Vec<ReportRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub histogram: Option<Histogram>,
    pub trial_records: Vec<TrialRecord>,
}

pub(crate) struct RowInputs {
    pub label: String,
    pub m: usize,
    pub m_over_n: f64,
    pub snr_db: Option<Snr>,
    pub masks: Option<usize>,
    pub init: InitConfig,
    pub init_variant: Option<String>,
}

pub(crate) fn config_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config serializes");
    Sha256::digest(&bytes)[..16]
        .iter()
        .fold(String::with_capacity(32), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

#[derive(Serialize)]
struct RowConfig<'a> {
    experiment: ExperimentKind,
    model: ModelKind,
    n: usize,
    m: usize,
    snr_db: Option<Snr>,
    masks: Option<usize>,
    init: &'a InitConfig,
    solver: &'a SolverConfig,
    master_seed: u64,
    trials: usize,
    success_threshold: f64,
}

pub(crate) fn aggregate_row(
    spec: &SweepSpec,
    index: usize,
    inputs: RowInputs,
    records: &[TrialRecord],
) -> ReportRow {
    let hash = config_hash(&RowConfig {
        experiment: spec.sweep.kind(),
        model: spec.model,
        n: spec.n,
        m: inputs.m,
        snr_db: inputs.snr_db,
        masks: inputs.masks,
        init: &inputs.init,
        solver: &spec.solver,
        master_seed: spec.master_seed,
        trials: spec.trials,
        success_threshold: spec.success_threshold,
    });
    aggregate_records(index, inputs, records, hash)
}

pub(crate) fn aggregate_records(
    index: usize,
    inputs: RowInputs,
    records: &[TrialRecord],
    config_hash: String,
) -> ReportRow {
    let count = records.len();
    let mean = |values: Vec<f64>| -> Option<f64> {
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    };
    let successes = records.iter().filter(|r| r.success).count();
    let mut losses: Vec<f64> = records.iter().filter_map(|r| r.final_loss).collect();
    losses.sort_by(f64::total_cmp);
    ReportRow {
        index,
        label: inputs.label,
        m_over_n: inputs.m_over_n,
        m: inputs.m,
        snr_db: inputs.snr_db,
        masks: inputs.masks,
        init_variant: inputs.init_variant,
        trials: count,
        successes,
        success_rate: successes as f64 / count.max(1) as f64,
        mean_relative_error: mean(records.iter().filter_map(|r| r.relative_error).collect()),
        mean_nmse: mean(records.iter().filter_map(|r| r.nmse).collect()),
        mean_init_error: mean(records.iter().map(|r| r.init_relative_error).collect())
            .unwrap_or(f64::NAN),
        median_final_loss: median_sorted(&losses),
        config_hash,
    }
}

pub(crate) fn median_sorted(sorted: &[f64]) -> Option<f64> {
    let len = sorted.len();
    match len {
        0 => None,
        _ if len % 2 == 1 => Some(sorted[len / 2]),
        _ => Some(0.5 * (sorted[len / 2 - 1] + sorted[len / 2])),
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_exp(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

impl ExperimentReport {
    pub(crate) fn from_sweep(
        spec: &SweepSpec,
        rows: Vec<ReportRow>,
        histogram: Option<Histogram>,
        trial_records: Vec<TrialRecord>,
    ) -> Self {
        let experiment = spec.sweep.kind();
        Self {
            experiment,
            model: spec.model,
            n: spec.n,
            trials: spec.trials,
            master_seed: spec.master_seed,
            success_threshold: spec.success_threshold,
            init: spec.init.clone(),
            solver: spec.solver.clone(),
            sweep: Some(spec.sweep.clone()),
            reference_scale: ReferenceScale::for_experiment(experiment),
            rows,
            histogram,
            trial_records,
        }
    }

    /// One row per sweep point, comma separated with a header row.
    pub fn to_csv_string(&self) -> Result<String> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| RafError::Io(std::io::Error::other(e));
        writer.write_record(CSV_HEADER).map_err(csv_err)?;
        for row in &self.rows {
            writer
                .write_record([
                    row.index.to_string(),
                    row.label.clone(),
                    row.m_over_n.to_string(),
                    row.m.to_string(),
                    opt(row.snr_db),
                    opt(row.masks),
                    row.init_variant.clone().unwrap_or_default(),
                    row.trials.to_string(),
                    row.successes.to_string(),
                    row.success_rate.to_string(),
                    opt_exp(row.mean_relative_error),
                    opt_exp(row.mean_nmse),
                    format!("{:e}", row.mean_init_error),
                    opt_exp(row.median_final_loss),
                    row.config_hash.clone(),
                ])
                .map_err(csv_err)?;
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| RafError::Io(std::io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json_string(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| RafError::Io(std::io::Error::other(e)))?;
        text.push('\n');
        Ok(text)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()?)?;
        Ok(())
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    /// Fixed-width text table of the main per-row statistics.
    pub fn summary_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} ({}, n = {}, {} trials/point, seed {})",
            self.experiment.tag(),
            self.model,
            self.n,
            self.trials,
            self.master_seed
        );
        let _ = writeln!(
            out,
            "{:<36} {:>6} {:>9} {:>12} {:>12} {:>12}",
            "point", "m", "success", "rel.err", "nmse", "init.err"
        );
        let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.3e}"));
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{:<36} {:>6} {:>9.3} {:>12} {:>12} {:>12}",
                row.label,
                row.m,
                row.success_rate,
                cell(row.mean_relative_error),
                cell(row.mean_nmse),
                cell(Some(row.mean_init_error)),
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_bins_cover_values() {
        let h = Histogram::of_neg_log10(&[1e-26, 3e-26, 1e-22, 0.0]);
        assert_eq!(h.bins.iter().map(|b| b.count).sum::<usize>(), 4);
        assert_eq!(h.bins.first().unwrap().lower, 22.0);
        assert_eq!(h.bins.last().unwrap().lower, 300.0);
        assert!(Histogram::of_neg_log10(&[]).bins.is_empty());
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median_sorted(&[1.0, 2.0, 4.0]), Some(2.0));
        assert_eq!(median_sorted(&[1.0, 2.0, 4.0, 8.0]), Some(3.0));
        assert_eq!(median_sorted(&[]), None);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = config_hash(&("x", 1));
        assert_eq!(a, config_hash(&("x", 1)));
        assert_ne!(a, config_hash(&("x", 2)));
        assert_eq!(a.len(), 32);
    }
}
