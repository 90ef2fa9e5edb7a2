//! Coded-diffraction recovery: random complex signals or image bands.

use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, ImageReader, RgbImage};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::report::{aggregate_records, config_hash, ReferenceScale, RowInputs};
use super::{ExperimentKind, ExperimentReport, TrialRecord, TrialSeeds};
use crate::error::{RafError, Result};
use crate::init::{self, InitConfig};
use crate::linalg;
use crate::metrics::{self, DEFAULT_SUCCESS_THRESHOLD};
use crate::rng;
use crate::scalar::Scalar;
use crate::sensing::{self, CdpModel, ModelKind, ProblemInstance};
use crate::solver::{self, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum CdpSource {
    RandomSignal { n: usize, trials: usize },
    Image(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdpSpec {
    pub source: CdpSource,
    pub masks: usize,
    pub master_seed: u64,
    pub init: InitConfig,
    pub solver: SolverConfig,
    pub success_threshold: f64,
}

impl CdpSpec {
    /// 100 power iterations and 100 gradient iterations with μ = 6, β = 5.
    pub fn new(source: CdpSource, masks: usize) -> Self {
        Self {
            source,
            masks,
            master_seed: 0,
            init: InitConfig {
                power_iters: 100,
                ..InitConfig::default()
            },
            solver: SolverConfig {
                max_iters: 100,
                ..SolverConfig::for_kind(ModelKind::Cdp)
            },
            success_threshold: DEFAULT_SUCCESS_THRESHOLD,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.masks == 0 {
            return Err(RafError::InvalidParameter(
                "mask count K must be ≥ 1".into(),
            ));
        }
        if let CdpSource::RandomSignal { n, trials } = self.source {
            if n == 0 {
                return Err(RafError::InvalidDimension("n must be ≥ 1".into()));
            }
            if trials == 0 {
                return Err(RafError::InvalidParameter("trials must be ≥ 1".into()));
            }
        }
        self.init.validate()?;
        self.solver.validate()
    }
}

pub struct CdpOutcome {
    pub report: ExperimentReport,
    /// Present when the source was an image; same dimensions and band count.
    pub recovered: Option<DynamicImage>,
}

pub fn run_cdp_recovery(spec: &CdpSpec) -> Result<CdpOutcome> {
    spec.validate()?;
    match &spec.source {
        CdpSource::RandomSignal { n, trials } => run_random(spec, *n, *trials),
        CdpSource::Image(path) => run_image(spec, path),
    }
}

fn run_random(spec: &CdpSpec, n: usize, trials: usize) -> Result<CdpOutcome> {
    let records = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let seeds = TrialSeeds::derive(spec.master_seed, ExperimentKind::CdpRecovery, 0, trial);
            let model = CdpModel::sample(n, spec.masks, seeds.model)?;
            let x = sensing::sample_signal::<Complex64>(n, seeds.signal);
            let instance = sensing::measure(model, x, 0.0, seeds.noise)?;
            recover(spec, &instance, seeds, 0, trial).map(|(rec, _)| rec)
        })
        .collect::<Result<Vec<_>>>()?;
    let row = aggregate_records(
        0,
        row_inputs(spec, n, "random-complex".into()),
        &records,
        config_hash(&(spec, n)),
    );
    Ok(CdpOutcome {
        report: report(spec, n, trials, vec![row], records),
        recovered: None,
    })
}

fn run_image(spec: &CdpSpec, path: &Path) -> Result<CdpOutcome> {
    let img = ImageReader::open(path)?.with_guessed_format()?.decode()?;
    let (width, height) = (img.width() as usize, img.height() as usize);
    let n = width * height;
    if n == 0 {
        return Err(RafError::InvalidDimension("image has no pixels".into()));
    }
    let color = img.color().has_color();
    let bands: Vec<Vec<f64>> = if color {
        let rgb = img.to_rgb8();
        (0..3)
            .map(|c| rgb.pixels().map(|p| f64::from(p.0[c]) / 255.0).collect())
            .collect()
    } else {
        vec![img
            .to_luma8()
            .pixels()
            .map(|p| f64::from(p.0[0]) / 255.0)
            .collect()]
    };

    // One physical set of masks shared by every band.
    let model = CdpModel::sample(
        n,
        spec.masks,
        rng::derive_seed(spec.master_seed, "cdp-recovery/image-masks", &[]),
    )?;
    let outcomes = bands
        .par_iter()
        .enumerate()
        .map(|(band, values)| {
            let seeds = TrialSeeds::derive(spec.master_seed, ExperimentKind::CdpRecovery, band, 0);
            let x: Vec<Complex64> = values.iter().map(|&v| Complex64::from_real(v)).collect();
            let instance = sensing::measure(model.clone(), x, 0.0, seeds.noise)?;
            recover(spec, &instance, seeds, band, 0)
        })
        .collect::<Result<Vec<_>>>()?;

    let names: &[&str] = if color {
        &["red", "green", "blue"]
    } else {
        &["gray"]
    };
    let rows = outcomes
        .iter()
        .enumerate()
        .map(|(band, (rec, _))| {
            aggregate_records(
                band,
                row_inputs(spec, n, format!("band-{}", names[band])),
                std::slice::from_ref(rec),
                config_hash(&(spec, n, band)),
            )
        })
        .collect();

    let to_u8 = |v: f64| (v * 255.0).round().clamp(0.0, 255.0) as u8;
    let recovered = if color {
        let mut out = RgbImage::new(width as u32, height as u32);
        for (idx, px) in out.pixels_mut().enumerate() {
            for c in 0..3 {
                px.0[c] = to_u8(outcomes[c].1[idx]);
            }
        }
        DynamicImage::ImageRgb8(out)
    } else {
        let mut out = GrayImage::new(width as u32, height as u32);
        for (px, &v) in out.pixels_mut().zip(&outcomes[0].1) {
            px.0[0] = to_u8(v);
        }
        DynamicImage::ImageLuma8(out)
    };

    let records: Vec<TrialRecord> = outcomes.into_iter().map(|(rec, _)| rec).collect();
    Ok(CdpOutcome {
        report: report(spec, n, records.len(), rows, records),
        recovered: Some(recovered),
    })
}

/// Real-valued band estimate from a complex iterate, without using the truth.
///
/// For `z ≈ e^{jθ} x` with real `x`, `Σ z_i² ≈ e^{2jθ} Σ x_i²` fixes `θ` up to
/// sign; the sign is chosen so the band has a nonnegative mean.
pub fn recovered_band(z: &[Complex64]) -> Vec<f64> {
    let sum_sq: Complex64 = z.iter().map(|v| v * v).sum();
    let rot = Complex64::from_polar(1.0, -0.5 * sum_sq.arg());
    let mut band: Vec<f64> = z.iter().map(|v| (v * rot).re).collect();
    if band.iter().sum::<f64>() < 0.0 {
        band.iter_mut().for_each(|v| *v = -*v);
    }
    band
}

fn recover(
    spec: &CdpSpec,
    instance: &ProblemInstance<CdpModel>,
    seeds: TrialSeeds,
    sweep_index: usize,
    trial: usize,
) -> Result<(TrialRecord, Vec<f64>)> {
    let init_cfg = InitConfig {
        seed: seeds.power,
        ..spec.init.clone()
    };
    let start = init::initialize(instance, &init_cfg)?;
    let x_norm = linalg::norm(&instance.x_true);
    let scale = if x_norm > 0.0 { x_norm } else { 1.0 };
    let init_relative_error = metrics::distance(&start.z0, &instance.x_true)? / scale;
    let result = solver::solve(instance, &start.z0, &spec.solver)?;
    let eval = metrics::evaluate(instance, &result.z_final, spec.success_threshold)?;
    let record = TrialRecord {
        sweep_index,
        trial,
        seeds,
        init_relative_error,
        relative_error: Some(eval.relative_error),
        nmse: Some(eval.nmse),
        residual: Some(eval.residual),
        final_loss: Some(result.final_loss()),
        success: eval.success,
        iterations: result.iterations_run,
        trace: None,
    };
    Ok((record, recovered_band(&result.z_final)))
}

fn row_inputs(spec: &CdpSpec, n: usize, label: String) -> RowInputs {
    RowInputs {
        label,
        m: spec.masks * n,
        m_over_n: spec.masks as f64,
        snr_db: None,
        masks: Some(spec.masks),
        init: spec.init.clone(),
        init_variant: None,
    }
}

fn report(
    spec: &CdpSpec,
    n: usize,
    trials: usize,
    rows: Vec<super::ReportRow>,
    trial_records: Vec<TrialRecord>,
) -> ExperimentReport {
    ExperimentReport {
        experiment: ExperimentKind::CdpRecovery,
        model: ModelKind::Cdp,
        n,
        trials,
        master_seed: spec.master_seed,
        success_threshold: spec.success_threshold,
        init: spec.init.clone(),
        solver: spec.solver.clone(),
        sweep: None,
        reference_scale: ReferenceScale::for_experiment(ExperimentKind::CdpRecovery),
        rows,
        histogram: None,
        trial_records,
    }
}
