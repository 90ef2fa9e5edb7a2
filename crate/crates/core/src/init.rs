//! Weighted maximal-correlation initialization.
//!
//! The direction estimate is the principal eigenvector of
//! `Y = (1/m) Σ_i w_i a_i a_iᴴ` with `w_i = ψ_i^γ` on the `|S|` largest
//! magnitudes and zero elsewhere. Normalizing by `m` rather than `|S|` leaves
//! the eigenvector unchanged. The estimate is scaled by `sqrt((1/m) Σ ψ_i²)`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, RafError, Result};
use crate::linalg;
use crate::rng;
use crate::scalar::Scalar;
use crate::sensing::{MeasurementOperator, ProblemInstance};

pub const DEFAULT_SUBSET_FRACTION: f64 = 3.0 / 13.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitConfig {
    /// Fraction of measurements kept in the selection set, in (0, 1].
    pub subset_fraction: f64,
    /// Exponent of the selection weights `ψ_i^γ`.
    pub gamma: f64,
    pub power_iters: usize,
    /// Residual tolerance for early exit; 0 runs all `power_iters`.
    pub eig_tol: f64,
    /// Seed of the random power-method start vector.
    pub seed: u64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            subset_fraction: DEFAULT_SUBSET_FRACTION,
            gamma: 0.5,
            power_iters: 200,
            eig_tol: 0.0,
            seed: 0,
        }
    }
}

impl InitConfig {
    /// Plain spectral initialization: every measurement, weights `ψ_i²`.
    pub fn spectral() -> Self {
        Self {
            subset_fraction: 1.0,
            gamma: 2.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.subset_fraction > 0.0 && self.subset_fraction <= 1.0) {
            return Err(RafError::InvalidParameter(format!(
                "subset_fraction must lie in (0, 1], got {}",
                self.subset_fraction
            )));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(RafError::InvalidParameter(format!(
                "gamma must be finite and ≥ 0, got {}",
                self.gamma
            )));
        }
        if self.power_iters == 0 {
            return Err(RafError::InvalidParameter("power_iters must be ≥ 1".into()));
        }
        if !(self.eig_tol >= 0.0) {
            return Err(RafError::InvalidParameter("eig_tol must be ≥ 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct InitResult<S> {
    pub z0: Vec<S>,
    pub direction: Vec<S>,
    pub norm_estimate: f64,
    pub selected: Vec<usize>,
    pub iterations_used: usize,
}

/// `sqrt((1/m) Σ ψ_i²)`
pub fn estimate_norm(psi: &[f64]) -> Result<f64> {
    if psi.is_empty() {
        return Err(RafError::EmptyInput("psi"));
    }
    Ok((psi.iter().map(|p| p * p).sum::<f64>() / psi.len() as f64).sqrt())
}

/// `⌊fraction · m⌋`, which must be at least 1.
pub fn subset_cardinality(fraction: f64, m: usize) -> Result<usize> {
    // The small slack keeps exact products such as (3/13)·13 from rounding down.
    let card = (fraction * m as f64 + 1e-9).floor() as usize;
    if card == 0 || card > m {
        return Err(RafError::InvalidParameter(format!(
            "subset cardinality ⌊{fraction}·{m}⌋ = {card} is out of range 1..={m}"
        )));
    }
    Ok(card)
}

/// Indices of the `cardinality` largest magnitudes, largest first; ties go to the lower index.
pub fn select_subset(psi: &[f64], cardinality: usize) -> Result<Vec<usize>> {
    if cardinality == 0 || cardinality > psi.len() {
        return Err(RafError::InvalidParameter(format!(
            "cardinality {cardinality} out of range 1..={}",
            psi.len()
        )));
    }
    let mut order: Vec<usize> = (0..psi.len()).collect();
    order.sort_unstable_by(|&a, &b| psi[b].total_cmp(&psi[a]).then(a.cmp(&b)));
    order.truncate(cardinality);
    Ok(order)
}

/// `w_i = ψ_i^γ` for `i ∈ S`, zero otherwise.
pub fn init_weights(psi: &[f64], selected: &[usize], gamma: f64) -> Vec<f64> {
    let mut w = vec![0.0; psi.len()];
    for &i in selected {
        w[i] = psi[i].powf(gamma);
    }
    w
}

/// `Y v = (1/m) Aᴴ (w ⊙ (A v))`, never forming `Y`.
pub fn apply_init_matrix<M: MeasurementOperator>(
    model: &M,
    weights: &[f64],
    v: &[M::Scalar],
) -> Result<Vec<M::Scalar>> {
    check_len("weights", model.measurement_len(), weights.len())?;
    check_len("signal", model.signal_len(), v.len())?;
    let mut scratch = vec![M::Scalar::zero(); model.measurement_len()];
    let mut out = vec![M::Scalar::zero(); model.signal_len()];
    init_matvec(model, weights, v, &mut scratch, &mut out);
    Ok(out)
}

fn init_matvec<M: MeasurementOperator>(
    model: &M,
    weights: &[f64],
    v: &[M::Scalar],
    scratch: &mut [M::Scalar],
    out: &mut [M::Scalar],
) {
    model.forward_into(v, scratch);
    let inv_m = 1.0 / model.measurement_len() as f64;
    for (s, &w) in scratch.iter_mut().zip(weights) {
        *s = s.scale(w * inv_m);
    }
    model.adjoint_into(scratch, out);
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerOutcome<S> {
    pub vector: Vec<S>,
    pub iterations: usize,
}

/// Power iterations for the principal eigenvector of a Hermitian PSD operator.
///
/// Starts from a seeded random unit vector and renormalizes after every
/// application. With `tol > 0`, stops once `‖Av − (vᴴAv) v‖ < tol`.
pub fn power_method<S, F>(
    mut apply: F,
    n: usize,
    iters: usize,
    tol: f64,
    seed: u64,
) -> Result<PowerOutcome<S>>
where
    S: Scalar,
    F: FnMut(&[S]) -> Vec<S>,
{
    if n == 0 {
        return Err(RafError::InvalidDimension(
            "operator size must be ≥ 1".into(),
        ));
    }
    if iters == 0 {
        return Err(RafError::InvalidParameter("iters must be ≥ 1".into()));
    }
    let mut rng = rng::stream(seed, "power-start", &[]);
    let mut v: Vec<S> = (0..n).map(|_| S::sample_standard(&mut rng)).collect();
    linalg::normalize(&mut v);

    let mut iterations = 0;
    while iterations < iters {
        let mut next = apply(&v);
        check_len("operator output", n, next.len())?;
        iterations += 1;
        if tol > 0.0 {
            let rayleigh = linalg::inner(&v, &next);
            let resid = next
                .iter()
                .zip(&v)
                .map(|(&y, &x)| (y - rayleigh * x).norm_sqr())
                .sum::<f64>()
                .sqrt();
            if resid < tol {
                if linalg::normalize(&mut next) > 0.0 {
                    v = next;
                }
                break;
            }
        }
        // A null image (e.g. all-zero weights) leaves every direction equally valid.
        if linalg::normalize(&mut next) == 0.0 {
            break;
        }
        v = next;
    }
    Ok(PowerOutcome {
        vector: v,
        iterations,
    })
}

/// Runs selection, weighting and power iterations on raw data.
pub fn initialize_from_data<M: MeasurementOperator>(
    model: &M,
    psi: &[f64],
    config: &InitConfig,
) -> Result<InitResult<M::Scalar>> {
    config.validate()?;
    let m = model.measurement_len();
    let n = model.signal_len();
    check_len("psi", m, psi.len())?;

    let norm_estimate = estimate_norm(psi)?;
    let selected = select_subset(psi, subset_cardinality(config.subset_fraction, m)?)?;
    let weights = init_weights(psi, &selected, config.gamma);

    let mut scratch = vec![M::Scalar::zero(); m];
    let outcome = power_method(
        |v: &[M::Scalar]| {
            let mut out = vec![M::Scalar::zero(); n];
            init_matvec(model, &weights, v, &mut scratch, &mut out);
            out
        },
        n,
        config.power_iters,
        config.eig_tol,
        config.seed,
    )?;

    let direction = outcome.vector;
    let z0 = direction.iter().map(|d| d.scale(norm_estimate)).collect();
    Ok(InitResult {
        z0,
        direction,
        norm_estimate,
        selected,
        iterations_used: outcome.iterations,
    })
}

pub fn initialize<M: MeasurementOperator>(
    instance: &ProblemInstance<M>,
    config: &InitConfig,
) -> Result<InitResult<M::Scalar>> {
    initialize_from_data(&instance.model, &instance.psi, config)
}
