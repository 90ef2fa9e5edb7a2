//! Seeded Monte-Carlo experiments.
//!
//! Every trial draws its model, signal, noise and power-method start from
//! its own stream `derive(master_seed, experiment, sweep_index, trial, purpose)`,
//! so results do not depend on execution order or thread count. Trials run
//! in parallel on the ambient rayon pool and are collected into an indexed
//! vector before aggregation.

mod cdp;
mod report;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{RafError, Result};
use crate::init::{self, InitConfig};
use crate::linalg;
use crate::metrics::{self, DEFAULT_SUCCESS_THRESHOLD};
use crate::rng;
use crate::sensing::{self, CdpModel, GaussianModel, MeasurementOperator, ModelKind};
use crate::solver::{self, SolverConfig, TraceRecord};

pub use cdp::{recovered_band, run_cdp_recovery, CdpOutcome, CdpSource, CdpSpec};
pub use report::{ExperimentReport, Histogram, HistogramBin, ReferenceScale, ReportRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SuccessRate,
    NmseVsSnr,
    InitQuality,
    LimitHistogram,
    CdpRecovery,
}

impl ExperimentKind {
    pub fn tag(self) -> &'static str {
        match self {
            ExperimentKind::SuccessRate => "success-rate",
            ExperimentKind::NmseVsSnr => "nmse-vs-snr",
            ExperimentKind::InitQuality => "init-quality",
            ExperimentKind::LimitHistogram => "limit-histogram",
            ExperimentKind::CdpRecovery => "cdp-recovery",
        }
    }
}

/// Signal-to-noise ratio in dB, with an explicit noiseless sentinel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Snr {
    Db(f64),
    Noiseless,
}

impl Snr {
    pub fn as_db(self) -> f64 {
        match self {
            Snr::Db(db) => db,
            Snr::Noiseless => f64::INFINITY,
        }
    }
}

impl fmt::Display for Snr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Snr::Db(db) => write!(f, "{db}"),
            Snr::Noiseless => f.write_str("inf"),
        }
    }
}

impl FromStr for Snr {
    type Err = RafError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "+inf" | "infinity" | "noiseless" => Ok(Snr::Noiseless),
            other => other
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Snr::Db)
                .ok_or_else(|| RafError::InvalidParameter(format!("invalid SNR value '{s}'"))),
        }
    }
}

impl Serialize for Snr {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Snr::Db(db) => serializer.serialize_f64(*db),
            Snr::Noiseless => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Snr {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(v) => Ok(Snr::Db(v)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// One initialization configuration compared by the init-quality study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitVariant {
    pub label: String,
    pub gamma: f64,
    pub subset_fraction: f64,
}

impl InitVariant {
    pub fn weighted() -> Self {
        Self {
            label: "weighted-gamma-0.5".into(),
            gamma: 0.5,
            subset_fraction: init::DEFAULT_SUBSET_FRACTION,
        }
    }

    pub fn unweighted() -> Self {
        Self {
            label: "unweighted-gamma-0".into(),
            gamma: 0.0,
            subset_fraction: init::DEFAULT_SUBSET_FRACTION,
        }
    }

    pub fn spectral() -> Self {
        Self {
            label: "spectral-gamma-2-all".into(),
            gamma: 2.0,
            subset_fraction: 1.0,
        }
    }

    pub fn defaults() -> Vec<Self> {
        vec![Self::weighted(), Self::unweighted(), Self::spectral()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Sweep {
    SuccessRate {
        ratios: Vec<f64>,
    },
    NmseVsSnr {
        snrs: Vec<Snr>,
        ratios: Vec<f64>,
    },
    InitQuality {
        ratios: Vec<f64>,
        variants: Vec<InitVariant>,
    },
    /// Runs at `m = 2n − 1`.
    LimitHistogram,
}

impl Sweep {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            Sweep::SuccessRate { .. } => ExperimentKind::SuccessRate,
            Sweep::NmseVsSnr { .. } => ExperimentKind::NmseVsSnr,
            Sweep::InitQuality { .. } => ExperimentKind::InitQuality,
            Sweep::LimitHistogram => ExperimentKind::LimitHistogram,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub sweep: Sweep,
    pub model: ModelKind,
    pub n: usize,
    pub trials: usize,
    pub master_seed: u64,
    pub init: InitConfig,
    pub solver: SolverConfig,
    pub success_threshold: f64,
    /// Keep per-iteration traces of every trial in the JSON report.
    pub record_traces: bool,
}

impl SweepSpec {
    pub fn new(sweep: Sweep, model: ModelKind, n: usize) -> Self {
        Self {
            sweep,
            model,
            n,
            trials: 100,
            master_seed: 0,
            init: InitConfig::default(),
            solver: SolverConfig::for_kind(model),
            success_threshold: DEFAULT_SUCCESS_THRESHOLD,
            record_traces: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(RafError::InvalidDimension("n must be ≥ 1".into()));
        }
        if self.trials == 0 {
            return Err(RafError::InvalidParameter("trials must be ≥ 1".into()));
        }
        self.init.validate()?;
        self.solver.validate()?;
        let nonempty = |len: usize, what: &str| {
            if len == 0 {
                Err(RafError::InvalidParameter(format!("{what} list is empty")))
            } else {
                Ok(())
            }
        };
        let positive = |ratios: &[f64]| {
            if ratios.iter().all(|r| r.is_finite() && *r > 0.0) {
                Ok(())
            } else {
                Err(RafError::InvalidParameter(
                    "ratios must be finite and > 0".into(),
                ))
            }
        };
        match &self.sweep {
            Sweep::SuccessRate { ratios } => {
                nonempty(ratios.len(), "ratio")?;
                positive(ratios)
            }
            Sweep::NmseVsSnr { snrs, ratios } => {
                nonempty(snrs.len(), "SNR")?;
                nonempty(ratios.len(), "ratio")?;
                positive(ratios)
            }
            Sweep::InitQuality { ratios, variants } => {
                nonempty(ratios.len(), "ratio")?;
                nonempty(variants.len(), "variant")?;
                positive(ratios)
            }
            Sweep::LimitHistogram => Ok(()),
        }
    }

    fn points(&self) -> Vec<SweepPoint> {
        let m_for = |ratio: f64| ((ratio * self.n as f64).round() as usize).max(1);
        match &self.sweep {
            Sweep::SuccessRate { ratios } => ratios
                .iter()
                .map(|&r| SweepPoint {
                    label: format!("m/n={r}"),
                    m: m_for(r),
                    snr: None,
                    variant: None,
                })
                .collect(),
            Sweep::NmseVsSnr { snrs, ratios } => snrs
                .iter()
                .flat_map(|&snr| {
                    ratios.iter().map(move |&r| SweepPoint {
                        label: format!("snr={snr},m/n={r}"),
                        m: m_for(r),
                        snr: Some(snr),
                        variant: None,
                    })
                })
                .collect(),
            Sweep::InitQuality { ratios, variants } => ratios
                .iter()
                .flat_map(|&r| {
                    variants.iter().map(move |v| SweepPoint {
                        label: format!("m/n={r},{}", v.label),
                        m: m_for(r),
                        snr: None,
                        variant: Some(v.clone()),
                    })
                })
                .collect(),
            Sweep::LimitHistogram => vec![SweepPoint {
                label: "m=2n-1".into(),
                m: 2 * self.n - 1,
                snr: None,
                variant: None,
            }],
        }
    }
}

#[derive(Debug, Clone)]
struct SweepPoint {
    label: String,
    m: usize,
    snr: Option<Snr>,
    variant: Option<InitVariant>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSeeds {
    pub model: u64,
    pub signal: u64,
    pub noise: u64,
    pub power: u64,
}

impl TrialSeeds {
    pub fn derive(
        master_seed: u64,
        experiment: ExperimentKind,
        sweep_index: usize,
        trial: usize,
    ) -> Self {
        let seed = |purpose: &str| {
            rng::derive_seed(
                master_seed,
                &format!("{}/{purpose}", experiment.tag()),
                &[sweep_index as u64, trial as u64],
            )
        };
        Self {
            model: seed("model"),
            signal: seed("signal"),
            noise: seed("noise"),
            power: seed("power"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub sweep_index: usize,
    pub trial: usize,
    pub seeds: TrialSeeds,
    pub init_relative_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nmse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_loss: Option<f64>,
    pub success: bool,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceRecord>>,
}

pub fn run_success_rate(spec: &SweepSpec) -> Result<ExperimentReport> {
    expect_kind(spec, ExperimentKind::SuccessRate)?;
    run_sweep(spec)
}

pub fn run_nmse_vs_snr(spec: &SweepSpec) -> Result<ExperimentReport> {
    expect_kind(spec, ExperimentKind::NmseVsSnr)?;
    run_sweep(spec)
}

pub fn run_init_quality(spec: &SweepSpec) -> Result<ExperimentReport> {
    expect_kind(spec, ExperimentKind::InitQuality)?;
    run_sweep(spec)
}

pub fn run_limit_histogram(spec: &SweepSpec) -> Result<ExperimentReport> {
    expect_kind(spec, ExperimentKind::LimitHistogram)?;
    run_sweep(spec)
}

/// Runs whichever sweep `spec` describes.
pub fn run_sweep(spec: &SweepSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let points = spec.points();
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..spec.trials).map(move |t| (p, t)))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(p, t)| run_point_trial(spec, &points[p], p, t))
        .collect::<Result<Vec<_>>>()?;

    let rows = points
        .iter()
        .enumerate()
        .map(|(idx, point)| {
            let trials = &records[idx * spec.trials..(idx + 1) * spec.trials];
            report::aggregate_row(spec, idx, point_row_inputs(spec, point), trials)
        })
        .collect();
    let histogram = matches!(spec.sweep, Sweep::LimitHistogram).then(|| {
        let values: Vec<f64> = records.iter().filter_map(|r| r.final_loss).collect();
        Histogram::of_neg_log10(&values)
    });

    Ok(ExperimentReport::from_sweep(spec, rows, histogram, records))
}

/// Recomputes one trial in isolation; identical to the matching record of [`run_sweep`].
pub fn run_trial(spec: &SweepSpec, sweep_index: usize, trial: usize) -> Result<TrialRecord> {
    spec.validate()?;
    let points = spec.points();
    let point = points.get(sweep_index).ok_or_else(|| {
        RafError::InvalidParameter(format!("sweep index {sweep_index} out of range"))
    })?;
    run_point_trial(spec, point, sweep_index, trial)
}

fn expect_kind(spec: &SweepSpec, kind: ExperimentKind) -> Result<()> {
    if spec.sweep.kind() == kind {
        Ok(())
    } else {
        Err(RafError::InvalidParameter(format!(
            "expected a {} sweep, got {}",
            kind.tag(),
            spec.sweep.kind().tag()
        )))
    }
}

fn point_row_inputs(spec: &SweepSpec, point: &SweepPoint) -> report::RowInputs {
    report::RowInputs {
        label: point.label.clone(),
        m: point.m,
        m_over_n: point.m as f64 / spec.n as f64,
        snr_db: point.snr,
        masks: (spec.model == ModelKind::Cdp).then(|| point.m / spec.n),
        init: match &point.variant {
            Some(v) => InitConfig {
                gamma: v.gamma,
                subset_fraction: v.subset_fraction,
                ..spec.init.clone()
            },
            None => spec.init.clone(),
        },
        init_variant: point.variant.as_ref().map(|v| v.label.clone()),
    }
}

fn run_point_trial(
    spec: &SweepSpec,
    point: &SweepPoint,
    sweep_index: usize,
    trial: usize,
) -> Result<TrialRecord> {
    let seeds = TrialSeeds::derive(spec.master_seed, spec.sweep.kind(), sweep_index, trial);
    let inputs = point_row_inputs(spec, point);
    let job = TrialJob {
        spec,
        init: &inputs.init,
        snr: point.snr,
        solve: point.variant.is_none(),
        seeds,
        sweep_index,
        trial,
    };
    match spec.model {
        ModelKind::RealGaussian => {
            job.run(GaussianModel::<f64>::sample(point.m, spec.n, seeds.model)?)
        }
        ModelKind::ComplexGaussian => job.run(GaussianModel::<Complex64>::sample(
            point.m,
            spec.n,
            seeds.model,
        )?),
        ModelKind::Cdp => {
            if point.m % spec.n != 0 {
                return Err(RafError::InvalidParameter(format!(
                    "CDP sweeps need integer m/n (mask counts), got m = {} for n = {}",
                    point.m, spec.n
                )));
            }
            job.run(CdpModel::sample(spec.n, point.m / spec.n, seeds.model)?)
        }
    }
}

struct TrialJob<'a> {
    spec: &'a SweepSpec,
    init: &'a InitConfig,
    snr: Option<Snr>,
    solve: bool,
    seeds: TrialSeeds,
    sweep_index: usize,
    trial: usize,
}

impl TrialJob<'_> {
    fn run<M: MeasurementOperator>(&self, model: M) -> Result<TrialRecord> {
        let x = sensing::sample_signal::<M::Scalar>(self.spec.n, self.seeds.signal);
        let sigma = match self.snr {
            Some(snr) => sensing::sigma_for_snr(&model, &x, snr.as_db())?,
            None => 0.0,
        };
        let instance = sensing::measure(model, x, sigma, self.seeds.noise)?;

        let init_cfg = InitConfig {
            seed: self.seeds.power,
            ..self.init.clone()
        };
        let start = init::initialize(&instance, &init_cfg)?;
        let init_relative_error =
            metrics::distance(&start.z0, &instance.x_true)? / linalg::norm(&instance.x_true);

        let mut record = TrialRecord {
            sweep_index: self.sweep_index,
            trial: self.trial,
            seeds: self.seeds,
            init_relative_error,
            relative_error: None,
            nmse: None,
            residual: None,
            final_loss: None,
            success: false,
            iterations: start.iterations_used,
            trace: None,
        };
        if !self.solve {
            return Ok(record);
        }

        let solver_cfg = SolverConfig {
            trace_distance: self.spec.record_traces || self.spec.solver.trace_distance,
            ..self.spec.solver.clone()
        };
        let result = solver::solve(&instance, &start.z0, &solver_cfg)?;
        let eval = metrics::evaluate(&instance, &result.z_final, self.spec.success_threshold)?;
        record.relative_error = Some(eval.relative_error);
        record.nmse = Some(eval.nmse);
        record.residual = Some(eval.residual);
        record.final_loss = Some(result.final_loss());
        record.success = eval.success;
        record.iterations = result.iterations_run;
        if self.spec.record_traces {
            record.trace = Some(result.trace);
        }
        Ok(record)
    }
}
