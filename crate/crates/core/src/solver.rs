//! Iteratively reweighted generalized-gradient flow on the amplitude loss
//! `L(z) = (1/2m) Σ (ψ_i − |a_iᴴ z|)²`.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{check_len, RafError, Result};
use crate::linalg;
use crate::metrics;
use crate::scalar::Scalar;
use crate::sensing::{MeasurementOperator, ModelKind, ProblemInstance};

/// Per-measurement confidence weights applied to the gradient summands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightScheme {
    /// `w_i = r_i / (r_i + β)` with `r_i = |(Az)_i| / ψ_i`.
    Raf { beta: f64 },
    /// `w_i = 1` (unweighted amplitude flow).
    Constant,
    /// `w_i = 1` if `r_i ≥ α`, else 0.
    HardTruncation { alpha: f64 },
}

impl WeightScheme {
    pub fn validate(&self) -> Result<()> {
        match *self {
            WeightScheme::Raf { beta } if !(beta > 0.0) || !beta.is_finite() => Err(
                RafError::InvalidParameter(format!("beta must be finite and > 0, got {beta}")),
            ),
            WeightScheme::HardTruncation { alpha } if !(alpha > 0.0) || !alpha.is_finite() => Err(
                RafError::InvalidParameter(format!("alpha must be finite and > 0, got {alpha}")),
            ),
            _ => Ok(()),
        }
    }

    fn weight(&self, az_abs: f64, psi: f64) -> f64 {
        match *self {
            // r/(r+β) = |Az|/(|Az| + βψ): 0 when Az = 0, 1 when ψ = 0.
            WeightScheme::Raf { beta } => {
                if az_abs == 0.0 {
                    0.0
                } else {
                    az_abs / (az_abs + beta * psi)
                }
            }
            WeightScheme::Constant => 1.0,
            WeightScheme::HardTruncation { alpha } => {
                if az_abs > 0.0 && az_abs >= alpha * psi {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub step_size: f64,
    pub weight_scheme: WeightScheme,
    pub max_iters: usize,
    /// Relative residual `‖ψ − |Az|‖ / ‖ψ‖` for early exit; 0 runs all iterations.
    pub stop_tol: f64,
    pub trace_distance: bool,
}

impl SolverConfig {
    /// μ = 2, β = 10 for real models; μ = 6, β = 5 for complex and CDP models.
    pub fn for_kind(kind: ModelKind) -> Self {
        let (step_size, beta) = if kind.is_complex() {
            (6.0, 5.0)
        } else {
            (2.0, 10.0)
        };
        Self {
            step_size,
            weight_scheme: WeightScheme::Raf { beta },
            max_iters: 2000,
            stop_tol: 0.0,
            trace_distance: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(RafError::InvalidParameter(format!(
                "step_size must be finite and > 0, got {}",
                self.step_size
            )));
        }
        if self.max_iters == 0 {
            return Err(RafError::InvalidParameter("max_iters must be ≥ 1".into()));
        }
        if !(self.stop_tol >= 0.0) {
            return Err(RafError::InvalidParameter("stop_tol must be ≥ 0".into()));
        }
        self.weight_scheme.validate()
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::for_kind(ModelKind::RealGaussian)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub relative_residual: f64,
    pub loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct SolverResult<S> {
    pub z_final: Vec<S>,
    pub iterations_run: usize,
    /// One record per iterate, `z^0` through `z^T`.
    pub trace: Vec<TraceRecord>,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl<S> SolverResult<S> {
    pub fn final_loss(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.loss)
    }
}

pub fn compute_weights<S: Scalar>(
    scheme: &WeightScheme,
    az: &[S],
    psi: &[f64],
) -> Result<Vec<f64>> {
    check_len("psi", az.len(), psi.len())?;
    Ok(az
        .iter()
        .zip(psi)
        .map(|(v, &p)| scheme.weight(v.abs(), p))
        .collect())
}

/// `(1/m) Aᴴ (w ⊙ (Az − ψ ⊙ phase(Az)))` with `phase(0) = 0`.
pub fn generalized_gradient<M: MeasurementOperator>(
    model: &M,
    z: &[M::Scalar],
    psi: &[f64],
    weights: &[f64],
) -> Result<Vec<M::Scalar>> {
    check_len("psi", model.measurement_len(), psi.len())?;
    check_len("weights", model.measurement_len(), weights.len())?;
    let az = model.apply_forward(z)?;
    let mut work = Workspace::new(model);
    work.az = az;
    work.gradient_from_az(model, psi, |i, _| weights[i]);
    Ok(work.grad)
}

/// One update `z − μ ∇ℓ_rw(z)` with weights recomputed at `z`.
pub fn step<M: MeasurementOperator>(
    model: &M,
    z: &[M::Scalar],
    psi: &[f64],
    config: &SolverConfig,
) -> Result<(Vec<M::Scalar>, Vec<f64>)> {
    config.validate()?;
    check_len("psi", model.measurement_len(), psi.len())?;
    let az = model.apply_forward(z)?;
    let weights = compute_weights(&config.weight_scheme, &az, psi)?;
    let mut work = Workspace::new(model);
    work.az = az;
    work.gradient_from_az(model, psi, |i, _| weights[i]);
    let next = z
        .iter()
        .zip(&work.grad)
        .map(|(&zi, &gi)| zi - gi.scale(config.step_size))
        .collect();
    Ok((next, weights))
}

/// `L(z) = (1/2m) Σ (ψ_i − |(Az)_i|)²`
pub fn loss<M: MeasurementOperator>(instance: &ProblemInstance<M>, z: &[M::Scalar]) -> Result<f64> {
    let az = instance.model.apply_forward(z)?;
    Ok(loss_from_measurements(&instance.psi, &az))
}

pub fn loss_from_measurements<S: Scalar>(psi: &[f64], az: &[S]) -> f64 {
    let r = linalg::magnitude_residual(psi, az);
    r * r / (2.0 * psi.len() as f64)
}

/// Runs the reweighted flow from `init` for `max_iters` steps (or until the
/// relative residual drops below `stop_tol`).
pub fn solve<M: MeasurementOperator>(
    instance: &ProblemInstance<M>,
    init: &[M::Scalar],
    config: &SolverConfig,
) -> Result<SolverResult<M::Scalar>> {
    config.validate()?;
    let model = &instance.model;
    let psi = &instance.psi;
    check_len("init", model.signal_len(), init.len())?;
    check_len("psi", model.measurement_len(), psi.len())?;

    let start = Instant::now();
    let psi_norm = linalg::real_norm(psi);
    let residual_scale = if psi_norm > 0.0 { psi_norm } else { 1.0 };
    let scheme = config.weight_scheme;

    let mut z = init.to_vec();
    let mut work = Workspace::new(model);
    let mut trace = Vec::with_capacity(config.max_iters + 1);
    let mut iterations_run = 0;

    let record = |t: usize, az: &[M::Scalar], z: &[M::Scalar]| -> TraceRecord {
        let resid = linalg::magnitude_residual(psi, az);
        TraceRecord {
            iteration: t,
            relative_residual: resid / residual_scale,
            loss: resid * resid / (2.0 * psi.len() as f64),
            distance: config
                .trace_distance
                .then(|| metrics::phase_aligned_distance(z, &instance.x_true)),
        }
    };

    let mut stopped = false;
    for t in 0..config.max_iters {
        model.forward_into(&z, &mut work.az);
        let rec = record(t, &work.az, &z);
        trace.push(rec);
        if config.stop_tol > 0.0 && rec.relative_residual < config.stop_tol {
            stopped = true;
            break;
        }
        work.gradient_from_az(model, psi, |i, az_abs| scheme.weight(az_abs, psi[i]));
        for (zi, &gi) in z.iter_mut().zip(&work.grad) {
            *zi -= gi.scale(config.step_size);
        }
        iterations_run = t + 1;
    }
    if !stopped {
        model.forward_into(&z, &mut work.az);
        trace.push(record(iterations_run, &work.az, &z));
    }

    Ok(SolverResult {
        z_final: z,
        iterations_run,
        trace,
        elapsed: start.elapsed(),
    })
}

struct Workspace<S> {
    az: Vec<S>,
    resid: Vec<S>,
    grad: Vec<S>,
}

impl<S: Scalar> Workspace<S> {
    fn new<M: MeasurementOperator<Scalar = S>>(model: &M) -> Self {
        let m = model.measurement_len();
        Self {
            az: vec![S::zero(); m],
            resid: vec![S::zero(); m],
            grad: vec![S::zero(); model.signal_len()],
        }
    }

    /// Fills `grad` from the current `az`; `weight(i, |az_i|)` supplies `w_i`.
    fn gradient_from_az<M, F>(&mut self, model: &M, psi: &[f64], weight: F)
    where
        M: MeasurementOperator<Scalar = S>,
        F: Fn(usize, f64) -> f64,
    {
        let inv_m = 1.0 / psi.len() as f64;
        for (i, (r, (&v, &p))) in self
            .resid
            .iter_mut()
            .zip(self.az.iter().zip(psi))
            .enumerate()
        {
            let a = v.abs();
            let w = weight(i, a);
            // phase(0) = 0 makes the summand vanish when Az_i = 0.
            *r = if a == 0.0 || w == 0.0 {
                S::zero()
            } else {
                (v - v.scale(p / a)).scale(w * inv_m)
            };
        }
        model.adjoint_into(&self.resid, &mut self.grad);
    }
}
