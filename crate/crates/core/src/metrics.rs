//! Sign/phase-invariant error measures and the residual success criterion.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};
use crate::linalg;
use crate::scalar::Scalar;
use crate::sensing::{MeasurementOperator, ProblemInstance};

pub const DEFAULT_SUCCESS_THRESHOLD: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dist: f64,
    pub relative_error: f64,
    pub nmse: f64,
    /// `‖ψ − |Az|‖ / ‖x‖`
    pub residual: f64,
    pub success: bool,
    pub threshold: f64,
}

/// `min_φ ‖z − e^{jφ} x‖` (real signals: `min(‖z − x‖, ‖z + x‖)`).
///
/// The minimizing rotation is `φ* = arg(xᴴ z)`.
pub fn distance<S: Scalar>(z: &[S], x: &[S]) -> Result<f64> {
    check_len("signal", x.len(), z.len())?;
    Ok(phase_aligned_distance(z, x))
}

pub(crate) fn phase_aligned_distance<S: Scalar>(z: &[S], x: &[S]) -> f64 {
    let rot = linalg::inner(x, z).unit_phase();
    z.iter()
        .zip(x)
        .map(|(&zi, &xi)| (zi - rot * xi).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Rotates `z` by the global phase that best aligns it with `x`.
pub fn align_to<S: Scalar>(z: &[S], x: &[S]) -> Vec<S> {
    let rot = linalg::inner(z, x).unit_phase();
    z.iter().map(|&zi| rot * zi).collect()
}

pub fn evaluate<M: MeasurementOperator>(
    instance: &ProblemInstance<M>,
    z: &[M::Scalar],
    success_threshold: f64,
) -> Result<EvalReport> {
    let dist = distance(z, &instance.x_true)?;
    let az = instance.model.apply_forward(z)?;
    let x_norm = linalg::norm(&instance.x_true);
    // A zero ground truth has no scale; report absolute errors instead.
    let scale = if x_norm > 0.0 { x_norm } else { 1.0 };
    let relative_error = dist / scale;
    let residual = linalg::magnitude_residual(&instance.psi, &az) / scale;
    Ok(EvalReport {
        dist,
        relative_error,
        nmse: relative_error * relative_error,
        residual,
        success: residual < success_threshold,
        threshold: success_threshold,
    })
}
