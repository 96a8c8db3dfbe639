//! Lebesgue decomposition of a positive kernel on a finite set against a
//! reference kernel.

use crate::error::{Error, Result};
use crate::forms::{simon_decompose, FormPair};
use crate::kernel::{psd_check, TOL_PSD};
use crate::linalg::{numerical_rank, pinv_hermitian, psd_pinv_sqrt, CMat};

pub const RANK_CUTOFF: f64 = 1e-10;

/// A positive kernel `k(x_i, x_j)` on an `n`-point set.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteKernel {
    pub entries: CMat,
}

impl FiniteKernel {
    pub fn new(entries: CMat) -> Result<Self> {
        let v = psd_check(&entries, TOL_PSD)?;
        if !v.is_psd() {
            return Err(Error::Invalid(format!("kernel is not positive (min eigenvalue {:.3e})", v.min_eig())));
        }
        Ok(FiniteKernel { entries })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }
}

/// `k = k_ac + k_s` with `ℋ(k_ac) ⊆ ℋ(K)` maximal.
///
/// The parallel-sum limit `lim k : (tK)` only sees `k` through vectors that
/// `K` does not annihilate, which is the quotient by the null space of `K`.
pub fn kernel_lebesgue(k: &FiniteKernel, big_k: &FiniteKernel) -> Result<(FiniteKernel, FiniteKernel)> {
    if k.n() != big_k.n() {
        return Err(Error::DimensionMismatch(format!("set sizes {} and {}", k.n(), big_k.n())));
    }
    let d = simon_decompose(&FormPair { a: k.entries.clone(), b: big_k.entries.clone() })?;
    Ok((FiniteKernel { entries: d.a_ac }, FiniteKernel { entries: d.a_s }))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitReport {
    pub sum_residual: f64,
    pub rank_k: usize,
    pub rank_ac: usize,
    pub rank_s: usize,
    /// `‖(k⁺)^{1/2} k_ac k⁺ k_s (k⁺)^{1/2}‖_F`.
    pub orthogonality: f64,
    pub passed: bool,
}

/// Checks `ℋ(k) = ℋ(k_ac) ⊕ ℋ(k_s)`.
pub fn orthogonal_split_check(k: &CMat, k_ac: &CMat, k_s: &CMat) -> SplitReport {
    let scale = k.norm().max(1e-300);
    let sum_residual = (k_ac + k_s - k).norm() / scale;
    let rank = |m: &CMat| {
        let top = k.norm();
        crate::linalg::singular_values(m).iter().filter(|&&s| s > RANK_CUTOFF * top).count()
    };
    let rank_k = numerical_rank(k, RANK_CUTOFF);
    let (rank_ac, rank_s) = (rank(k_ac), rank(k_s));
    let root = psd_pinv_sqrt(k, RANK_CUTOFF);
    let inv = pinv_hermitian(k, RANK_CUTOFF);
    let orthogonality = (&root * k_ac * inv * k_s * &root).norm();
    let passed = sum_residual <= 1e-8 && rank_ac + rank_s == rank_k && orthogonality <= 1e-8;
    SplitReport { sum_residual, rank_k, rank_ac, rank_s, orthogonality, passed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_real, from_real_rows, identity};

    fn fk(m: CMat) -> FiniteKernel {
        FiniteKernel::new(m).unwrap()
    }

    #[test]
    fn examples() {
        let k = from_real_rows(&[&[2.0, 1.0, 0.0], &[1.0, 2.0, 0.5], &[0.0, 0.5, 1.0]]);
        let (ac, s) = kernel_lebesgue(&fk(k.clone()), &fk(identity(3))).unwrap();
        assert!((&ac.entries - &k).norm() < 1e-9 && s.entries.norm() < 1e-9);

        let ones = from_real_rows(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let (ac, s) = kernel_lebesgue(&fk(ones.clone()), &fk(diag_real(&[1.0, 0.0]))).unwrap();
        assert!(ac.entries.norm() < 1e-9);
        assert!((&s.entries - &ones).norm() < 1e-9);

        let big = from_real_rows(&[&[1.0, 0.5], &[0.5, 0.25]]);
        let (ac, s) = kernel_lebesgue(&fk(big.clone()), &fk(big.clone())).unwrap();
        assert!((&ac.entries - &big).norm() < 1e-9 && s.entries.norm() < 1e-9);
        assert!(orthogonal_split_check(&big, &ac.entries, &s.entries).passed);
    }

    #[test]
    fn trivial_split_passes() {
        let k = from_real_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let r = orthogonal_split_check(&k, &k, &CMat::zeros(2, 2));
        assert!(r.passed);
        assert_eq!((r.rank_k, r.rank_ac, r.rank_s), (2, 2, 0));
    }

    #[test]
    fn size_mismatch_rejected() {
        assert!(kernel_lebesgue(&fk(identity(2)), &fk(identity(3))).is_err());
        assert!(FiniteKernel::new(diag_real(&[1.0, -1.0])).is_err());
    }
}
