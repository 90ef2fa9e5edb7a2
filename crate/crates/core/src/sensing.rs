//! Measurement models and problem-instance generation.
//!
//! A model maps a signal `z ∈ F^n` to `m` linear measurements `(Az)_i = a_iᴴ z`.
//! Gaussian models store `A` densely (row `i` holds `a_iᴴ`). The coded
//! diffraction model never materializes `A`: block `k` of `Az` is the
//! unnormalized DFT (kernel `e^{-j2πkl/n}`) of the mask-modulated signal
//! `D_k z`, so every row has squared norm `n` and `(1/m)‖Az‖² = ‖z‖²`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, RafError, Result};
use crate::linalg;
use crate::rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    RealGaussian,
    ComplexGaussian,
    Cdp,
}

impl ModelKind {
    pub fn is_complex(self) -> bool {
        !matches!(self, ModelKind::RealGaussian)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::RealGaussian => "real-gaussian",
            ModelKind::ComplexGaussian => "complex-gaussian",
            ModelKind::Cdp => "cdp",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A linear measurement operator `A: F^n → F^m` applied without assembling `A`.
///
/// Implementations are pure: `forward_into`/`adjoint_into` may be called
/// concurrently from several threads.
pub trait MeasurementOperator: Send + Sync {
    type Scalar: Scalar;

    fn kind(&self) -> ModelKind;
    fn signal_len(&self) -> usize;
    fn measurement_len(&self) -> usize;

    /// `out = A z`. Lengths must already match.
    fn forward_into(&self, z: &[Self::Scalar], out: &mut [Self::Scalar]);

    /// `out = Aᴴ u`. Lengths must already match.
    fn adjoint_into(&self, u: &[Self::Scalar], out: &mut [Self::Scalar]);

    fn apply_forward(&self, z: &[Self::Scalar]) -> Result<Vec<Self::Scalar>> {
        check_len("signal", self.signal_len(), z.len())?;
        let mut out = vec![Self::Scalar::zero(); self.measurement_len()];
        self.forward_into(z, &mut out);
        Ok(out)
    }

    fn apply_adjoint(&self, u: &[Self::Scalar]) -> Result<Vec<Self::Scalar>> {
        check_len("measurements", self.measurement_len(), u.len())?;
        let mut out = vec![Self::Scalar::zero(); self.signal_len()];
        self.adjoint_into(u, &mut out);
        Ok(out)
    }
}

/// Dense Gaussian sensing matrix, row-major `m × n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct GaussianModel<S> {
    m: usize,
    n: usize,
    entries: Vec<S>,
}

impl<S: Scalar> GaussianModel<S> {
    /// I.i.d. standard normal entries (complex: each part has variance 1/2).
    pub fn sample(m: usize, n: usize, seed: u64) -> Result<Self> {
        validate_dims(n, m, "m")?;
        let mut rng = rng::stream(seed, "gaussian-model", &[]);
        let entries = (0..m * n).map(|_| S::sample_standard(&mut rng)).collect();
        Ok(Self { m, n, entries })
    }

    /// Builds a model from explicit row-major entries.
    pub fn from_rows(m: usize, n: usize, entries: Vec<S>) -> Result<Self> {
        validate_dims(n, m, "m")?;
        check_len("matrix entries", m * n, entries.len())?;
        Ok(Self { m, n, entries })
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn entries(&self) -> &[S] {
        &self.entries
    }

    fn check_consistent(&self) -> Result<()> {
        validate_dims(self.n, self.m, "m")?;
        check_len("matrix entries", self.m * self.n, self.entries.len())
    }
}

impl<S: Scalar> MeasurementOperator for GaussianModel<S> {
    type Scalar = S;

    fn kind(&self) -> ModelKind {
        if S::IS_COMPLEX {
            ModelKind::ComplexGaussian
        } else {
            ModelKind::RealGaussian
        }
    }

    fn signal_len(&self) -> usize {
        self.n
    }

    fn measurement_len(&self) -> usize {
        self.m
    }

    fn forward_into(&self, z: &[S], out: &mut [S]) {
        debug_assert_eq!(z.len(), self.n);
        debug_assert_eq!(out.len(), self.m);
        for (o, row) in out.iter_mut().zip(self.entries.chunks_exact(self.n)) {
            *o = dot4(row, z);
        }
    }

    fn adjoint_into(&self, u: &[S], out: &mut [S]) {
        debug_assert_eq!(u.len(), self.m);
        debug_assert_eq!(out.len(), self.n);
        out.iter_mut().for_each(|o| *o = S::zero());
        for (&ui, row) in u.iter().zip(self.entries.chunks_exact(self.n)) {
            if ui == S::zero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(row) {
                *o += a.conj() * ui;
            }
        }
    }
}

/// Unconjugated `Σ a_j z_j` with four interleaved accumulators.
fn dot4<S: Scalar>(a: &[S], z: &[S]) -> S {
    let mut acc = [S::zero(); 4];
    let mut ac = a.chunks_exact(4);
    let mut zc = z.chunks_exact(4);
    for (x, y) in (&mut ac).zip(&mut zc) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = S::zero();
    for (&x, &y) in ac.remainder().iter().zip(zc.remainder()) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Coded diffraction patterns: `K` random masks with entries in `{1, −1, j, −j}`.
#[derive(Clone, Serialize, Deserialize)]
#[serde(try_from = "CdpMasks", into = "CdpMasks")]
pub struct CdpModel {
    n: usize,
    masks: Vec<Vec<Complex64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

#[derive(Serialize, Deserialize)]
struct CdpMasks {
    n: usize,
    masks: Vec<Vec<Complex64>>,
}

impl TryFrom<CdpMasks> for CdpModel {
    type Error = RafError;

    fn try_from(value: CdpMasks) -> Result<Self> {
        CdpModel::from_masks(value.n, value.masks)
    }
}

impl From<CdpModel> for CdpMasks {
    fn from(value: CdpModel) -> Self {
        CdpMasks {
            n: value.n,
            masks: value.masks,
        }
    }
}

impl fmt::Debug for CdpModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CdpModel")
            .field("n", &self.n)
            .field("masks", &self.masks)
            .finish()
    }
}

impl PartialEq for CdpModel {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.masks == other.masks
    }
}

const MASK_ALPHABET: [Complex64; 4] = [
    Complex64::new(1.0, 0.0),
    Complex64::new(-1.0, 0.0),
    Complex64::new(0.0, 1.0),
    Complex64::new(0.0, -1.0),
];

impl CdpModel {
    pub fn sample(n: usize, mask_count: usize, seed: u64) -> Result<Self> {
        validate_dims(n, mask_count, "K")?;
        let mut rng = rng::stream(seed, "cdp-masks", &[]);
        let masks = (0..mask_count)
            .map(|_| {
                (0..n)
                    .map(|_| MASK_ALPHABET[rng.random_range(0..4)])
                    .collect()
            })
            .collect();
        Self::from_masks(n, masks)
    }

    /// Builds a model from explicit masks; every entry must be one of `{1, −1, j, −j}`.
    pub fn from_masks(n: usize, masks: Vec<Vec<Complex64>>) -> Result<Self> {
        validate_dims(n, masks.len(), "K")?;
        for mask in &masks {
            check_len("mask", n, mask.len())?;
            if let Some(bad) = mask.iter().find(|d| !MASK_ALPHABET.contains(d)) {
                return Err(RafError::InvalidParameter(format!(
                    "mask entry {bad} is not one of 1, -1, j, -j"
                )));
            }
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            masks,
        })
    }

    pub fn mask_count(&self) -> usize {
        self.masks.len()
    }

    pub fn masks(&self) -> &[Vec<Complex64>] {
        &self.masks
    }
}

impl MeasurementOperator for CdpModel {
    type Scalar = Complex64;

    fn kind(&self) -> ModelKind {
        ModelKind::Cdp
    }

    fn signal_len(&self) -> usize {
        self.n
    }

    fn measurement_len(&self) -> usize {
        self.n * self.masks.len()
    }

    fn forward_into(&self, z: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(z.len(), self.n);
        debug_assert_eq!(out.len(), self.measurement_len());
        for (block, mask) in out.chunks_exact_mut(self.n).zip(&self.masks) {
            for ((b, &d), &zi) in block.iter_mut().zip(mask).zip(z) {
                *b = d * zi;
            }
            self.forward.process(block);
        }
    }

    fn adjoint_into(&self, u: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(u.len(), self.measurement_len());
        debug_assert_eq!(out.len(), self.n);
        out.iter_mut().for_each(|o| *o = Complex64::zero());
        let mut buf = vec![Complex64::zero(); self.n];
        for (block, mask) in u.chunks_exact(self.n).zip(&self.masks) {
            buf.copy_from_slice(block);
            // rustfft's inverse is the unnormalized conjugate kernel, i.e. Fᴴ.
            self.inverse.process(&mut buf);
            for ((o, &d), &b) in out.iter_mut().zip(mask).zip(&buf) {
                *o += d.conj() * b;
            }
        }
    }
}

fn validate_dims(n: usize, count: usize, count_name: &str) -> Result<()> {
    if n == 0 {
        return Err(RafError::InvalidDimension(
            "signal length n must be ≥ 1".into(),
        ));
    }
    if count == 0 {
        return Err(RafError::InvalidDimension(format!(
            "{count_name} must be ≥ 1"
        )));
    }
    Ok(())
}

/// A sampled measurement model of any supported kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SensingModel {
    RealGaussian(GaussianModel<f64>),
    ComplexGaussian(GaussianModel<Complex64>),
    Cdp(CdpModel),
}

impl SensingModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            SensingModel::RealGaussian(_) => ModelKind::RealGaussian,
            SensingModel::ComplexGaussian(_) => ModelKind::ComplexGaussian,
            SensingModel::Cdp(_) => ModelKind::Cdp,
        }
    }

    pub fn signal_len(&self) -> usize {
        match self {
            SensingModel::RealGaussian(g) => g.signal_len(),
            SensingModel::ComplexGaussian(g) => g.signal_len(),
            SensingModel::Cdp(c) => c.signal_len(),
        }
    }

    pub fn measurement_len(&self) -> usize {
        match self {
            SensingModel::RealGaussian(g) => g.measurement_len(),
            SensingModel::ComplexGaussian(g) => g.measurement_len(),
            SensingModel::Cdp(c) => c.measurement_len(),
        }
    }
}

/// Samples a model. `m_or_k` is the row count `m` for Gaussian models and the
/// mask count `K` for coded diffraction (giving `m = K·n`).
pub fn sample_model(kind: ModelKind, n: usize, m_or_k: usize, seed: u64) -> Result<SensingModel> {
    Ok(match kind {
        ModelKind::RealGaussian => {
            SensingModel::RealGaussian(GaussianModel::sample(m_or_k, n, seed)?)
        }
        ModelKind::ComplexGaussian => {
            SensingModel::ComplexGaussian(GaussianModel::sample(m_or_k, n, seed)?)
        }
        ModelKind::Cdp => SensingModel::Cdp(CdpModel::sample(n, m_or_k, seed)?),
    })
}

/// Draws a signal with i.i.d. standard (complex) normal entries.
pub fn sample_signal<S: Scalar>(n: usize, seed: u64) -> Vec<S> {
    let mut rng = rng::stream(seed, "signal", &[]);
    (0..n).map(|_| S::sample_standard(&mut rng)).collect()
}

/// A model realization with ground truth and magnitude data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "M: Serialize, M::Scalar: Serialize",
    deserialize = "M: Deserialize<'de>, M::Scalar: Deserialize<'de>"
))]
pub struct ProblemInstance<M: MeasurementOperator> {
    pub model: M,
    pub x_true: Vec<M::Scalar>,
    pub psi: Vec<f64>,
    pub noise_sigma: f64,
}

impl<M: MeasurementOperator> ProblemInstance<M> {
    pub fn n(&self) -> usize {
        self.model.signal_len()
    }

    pub fn m(&self) -> usize {
        self.model.measurement_len()
    }

    pub fn validate(&self) -> Result<()> {
        check_len("x_true", self.n(), self.x_true.len())?;
        check_len("psi", self.m(), self.psi.len())?;
        if self.psi.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(RafError::InvalidParameter(
                "magnitudes must be finite and nonnegative".into(),
            ));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(RafError::InvalidParameter("noise_sigma must be ≥ 0".into()));
        }
        Ok(())
    }
}

/// Produces magnitudes `ψ_i = max(0, |(Ax)_i| + η_i)` with `η_i ~ N(0, σ²)`.
pub fn measure<M: MeasurementOperator>(
    model: M,
    x: Vec<M::Scalar>,
    noise_sigma: f64,
    seed: u64,
) -> Result<ProblemInstance<M>> {
    if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
        return Err(RafError::InvalidParameter(format!(
            "noise_sigma must be finite and ≥ 0, got {noise_sigma}"
        )));
    }
    let ax = model.apply_forward(&x)?;
    let psi = if noise_sigma == 0.0 {
        ax.iter().map(|v| v.abs()).collect()
    } else {
        let mut rng = rng::stream(seed, "noise", &[]);
        ax.iter()
            .map(|v| {
                let eta: f64 = rng.sample(StandardNormal);
                (v.abs() + noise_sigma * eta).max(0.0)
            })
            .collect()
    };
    Ok(ProblemInstance {
        model,
        x_true: x,
        psi,
        noise_sigma,
    })
}

/// Noise level achieving `SNR = 10 log10(‖Ax‖² / (m σ²))`; `+∞` dB gives `σ = 0`.
pub fn sigma_for_snr<M: MeasurementOperator>(
    model: &M,
    x: &[M::Scalar],
    snr_db: f64,
) -> Result<f64> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(RafError::InvalidParameter(format!(
            "invalid SNR {snr_db} dB"
        )));
    }
    let ax = model.apply_forward(x)?;
    let energy = linalg::norm_sqr(&ax);
    if energy == 0.0 {
        return Err(RafError::ZeroSignal);
    }
    if snr_db == f64::INFINITY {
        return Ok(0.0);
    }
    let m = model.measurement_len() as f64;
    Ok((energy / (m * 10f64.powf(snr_db / 10.0))).sqrt())
}

/// A problem instance of any model kind, tagged for serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AnyInstance {
    RealGaussian(ProblemInstance<GaussianModel<f64>>),
    ComplexGaussian(ProblemInstance<GaussianModel<Complex64>>),
    Cdp(ProblemInstance<CdpModel>),
}

impl AnyInstance {
    pub fn kind(&self) -> ModelKind {
        match self {
            AnyInstance::RealGaussian(_) => ModelKind::RealGaussian,
            AnyInstance::ComplexGaussian(_) => ModelKind::ComplexGaussian,
            AnyInstance::Cdp(_) => ModelKind::Cdp,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AnyInstance::RealGaussian(p) => {
                p.model.check_consistent()?;
                p.validate()
            }
            AnyInstance::ComplexGaussian(p) => {
                p.model.check_consistent()?;
                p.validate()
            }
            AnyInstance::Cdp(p) => p.validate(),
        }
    }
}
