//! Small dense vector kernels. Summation order is fixed (left to right) so
//! results are bit-reproducible across runs and thread counts.

use crate::scalar::Scalar;

/// `Σ conj(a_i) b_i`
pub fn inner<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(S::zero(), |acc, (&x, &y)| acc + x.conj() * y)
}

pub fn norm_sqr<S: Scalar>(v: &[S]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum()
}

pub fn norm<S: Scalar>(v: &[S]) -> f64 {
    norm_sqr(v).sqrt()
}

pub fn real_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `‖a − b‖`
pub fn distance_between<S: Scalar>(a: &[S], b: &[S]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

pub fn scale_in_place<S: Scalar>(v: &mut [S], s: f64) {
    v.iter_mut().for_each(|x| *x = x.scale(s));
}

/// Normalizes `v` in place and returns its former norm. Zero vectors are left untouched.
pub fn normalize<S: Scalar>(v: &mut [S]) -> f64 {
    let nrm = norm(v);
    if nrm > 0.0 {
        scale_in_place(v, 1.0 / nrm);
    }
    nrm
}

/// `‖ψ − |u|‖` for measurement magnitudes `psi` and linear measurements `u`.
pub fn magnitude_residual<S: Scalar>(psi: &[f64], u: &[S]) -> f64 {
    psi.iter()
        .zip(u)
        .map(|(&p, &v)| {
            let d = p - v.abs();
            d * d
        })
        .sum::<f64>()
        .sqrt()
}
