//! Lebesgue decomposition of pairs of positive forms on a finite
//! polynomial basis, and Radon–Nikodym extraction from moments.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernel::{coeff_kernel, psd_check, TOL_PSD};
use crate::linalg::{c, eigh, hermitian_part, identity, pinv_hermitian, spectral_map, trace_re, CMat};
use crate::measure::CircleMeasure;
use crate::trigpoly::{cesaro_nonneg_approx, TrigPoly};

pub const PINV_CUTOFF: f64 = 1e-12;
pub const KMAX: usize = 60;
const STOP_TOL: f64 = 1e-10;

/// A form `A` and a reference form `B` on the same basis.
#[derive(Clone, Debug, PartialEq)]
pub struct FormPair {
    pub a: CMat,
    pub b: CMat,
}

impl FormPair {
    pub fn new(a: CMat, b: CMat) -> Result<Self> {
        if a.shape() != b.shape() || a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", a.shape(), b.shape())));
        }
        for m in [&a, &b] {
            let v = psd_check(m, TOL_PSD)?;
            if !v.is_psd() {
                return Err(Error::Invalid(format!("form is not positive (min eigenvalue {:.3e})", v.min_eig())));
            }
        }
        Ok(FormPair { a, b })
    }

    /// Toeplitz forms `q_μ`, `q_λ` on polynomials of degree at most `n`.
    pub fn from_measures(mu: &CircleMeasure, lam: &CircleMeasure, n: usize) -> Self {
        FormPair { a: coeff_kernel(mu, n).entries, b: coeff_kernel(lam, n).entries }
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FormDecomposition {
    pub a_ac: CMat,
    pub a_s: CMat,
    pub iterations: usize,
    pub converged: bool,
}

/// `A (A + B)⁺ B`.
pub fn parallel_sum(a: &CMat, b: &CMat) -> Result<CMat> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let (beta, u) = eigh(&hermitian_part(b));
    let a_hat = u.adjoint() * a * &u;
    Ok(hermitian_part(&(&u * parallel_sum_diag(&a_hat, &beta) * u.adjoint())))
}

/// Parallel sum with a diagonal second argument.
///
/// `A + diag(β)` is Jacobi-scaled before the pseudo-inverse, so reference
/// weights many orders of magnitude above `A` do not swamp the directions
/// where `β` vanishes. Any generalized inverse gives the same parallel sum.
fn parallel_sum_diag(a: &CMat, beta: &[f64]) -> CMat {
    let n = a.nrows();
    let top = beta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let beta: Vec<f64> = beta.iter().map(|&v| if v > PINV_CUTOFF * top { v } else { 0.0 }).collect();
    let mut m = a.clone();
    for i in 0..n {
        m[(i, i)] += beta[i];
    }
    let m = hermitian_part(&m);
    let floor = (0..n).map(|i| m[(i, i)].re).fold(0.0f64, f64::max) * f64::EPSILON;
    let d: Vec<f64> = (0..n).map(|i| if m[(i, i)].re > floor { m[(i, i)].re.sqrt() } else { 1.0 }).collect();
    let scaled = CMat::from_fn(n, n, |i, j| m[(i, j)] / (d[i] * d[j]));
    let g = pinv_hermitian(&scaled, PINV_CUTOFF);
    let right = CMat::from_fn(n, n, |i, j| g[(i, j)] * beta[j] / (d[i] * d[j]));
    hermitian_part(&(a * right))
}

/// `A_ac = lim_k A : (2^k B)`, `A_s = A - A_ac`.
///
/// The sequence approaches its limit like `1/t`; consecutive iterates are
/// combined as `2P_k - P_{k-1}` to cancel the leading term.
pub fn simon_decompose(fp: &FormPair) -> Result<FormDecomposition> {
    let n = fp.dim();
    let na = fp.a.norm();
    let nb = fp.b.norm();
    if na == 0.0 || nb == 0.0 {
        return Ok(FormDecomposition {
            a_ac: CMat::zeros(n, n),
            a_s: fp.a.clone(),
            iterations: 0,
            converged: true,
        });
    }
    // Work in the eigenbasis of B, where 2^k B stays diagonal.
    let (beta, u) = eigh(&hermitian_part(&fp.b.scale(1.0 / nb)));
    let a = u.adjoint() * fp.a.scale(1.0 / na) * &u;
    let back = |e: &CMat| &u * e.scale(na) * u.adjoint();
    let scaled = |t: f64| beta.iter().map(|v| v * t).collect::<Vec<_>>();
    let mut prev_p = parallel_sum_diag(&a, &beta);
    let mut prev_e: Option<CMat> = None;
    let mut t = 1.0;
    for k in 1..=KMAX {
        t *= 2.0;
        let p = parallel_sum_diag(&a, &scaled(t));
        let e = p.scale(2.0) - &prev_p;
        if let Some(pe) = &prev_e {
            if (&e - pe).norm() <= STOP_TOL {
                return Ok(finish(&fp.a, back(&e), k, true));
            }
        }
        prev_p = p;
        prev_e = Some(e);
    }
    let last = finish(&fp.a, back(&prev_e.expect("at least one iterate")), KMAX, false);
    Err(Error::NotConverged { kmax: KMAX, last: Box::new(last) })
}

fn finish(a: &CMat, a_ac: CMat, iterations: usize, converged: bool) -> FormDecomposition {
    let a_ac = hermitian_part(&a_ac);
    let a_s = hermitian_part(&(a - &a_ac));
    FormDecomposition { a_ac, a_s, iterations, converged }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResolventReport {
    /// `‖(I + T)⁻¹ - B^{1/2}(A + B)⁻¹B^{1/2}‖_F / dim`.
    pub residual: f64,
    /// `T = B^{-1/2} A B^{-1/2}`.
    pub t: CMat,
}

pub fn resolvent_identity_residual(fp: &FormPair) -> Result<ResolventReport> {
    let n = fp.dim();
    if n == 0 {
        return Ok(ResolventReport { residual: 0.0, t: CMat::zeros(0, 0) });
    }
    let (vals, _) = eigh(&fp.b);
    let min_eig = vals[0];
    if min_eig <= 1e-12 * trace_re(&fp.b) / n as f64 {
        return Err(Error::SingularReference { min_eig });
    }
    let b_half = spectral_map(&fp.b, f64::sqrt);
    let b_inv_half = spectral_map(&fp.b, |l| 1.0 / l.sqrt());
    let t = hermitian_part(&(&b_inv_half * &fp.a * &b_inv_half));
    let lhs = spectral_map(&(identity(n) + &t), |l| 1.0 / l);
    let m_inv = spectral_map(&(&fp.b + &fp.a), |l| 1.0 / l);
    let rhs = &b_half * m_inv * &b_half;
    Ok(ResolventReport { residual: (lhs - rhs).norm() / n as f64, t })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RnFit {
    pub f: TrigPoly,
    /// Relative least-squares residual over `|n| <= N`.
    pub residual: f64,
    /// Whether the fit was replaced by a Cesàro mean of its positive part.
    pub projected: bool,
    /// 2-norm condition number of the normal matrix.
    pub condition: f64,
}

/// Degree-`d` Hermitian `f̂` minimizing `Σ_{|n|<=N} |μ̂(n) - (f̂ ⋆ λ̂)(n)|²`.
pub fn rn_extract(mu: &CircleMeasure, lam: &CircleMeasure, n: usize, d: usize) -> Result<RnFit> {
    if 2 * d > n {
        return Err(Error::Invalid(format!("degree {d} exceeds half the truncation order {n}")));
    }
    let mm = mu.moments(n);
    let lm = lam.moments(n + d);
    let cols = 2 * d + 1;
    let rows = 2 * (n + 1);
    let mut m = DMatrix::<f64>::zeros(rows, cols);
    let mut rhs = DVector::<f64>::zeros(rows);
    for k in 0..=n {
        // each n >= 1 stands for the pair ±n
        let w = if k == 0 { 1.0 } else { std::f64::consts::SQRT_2 };
        let (re, im) = (2 * k, 2 * k + 1);
        let ni = k as i64;
        let l0 = lm.get(ni);
        m[(re, 0)] = w * l0.re;
        m[(im, 0)] = w * l0.im;
        for j in 1..=d as i64 {
            let sum = lm.get(ni - j) + lm.get(ni + j);
            let dif = (lm.get(ni - j) - lm.get(ni + j)) * c(0.0, 1.0);
            let (cx, cy) = (2 * j as usize - 1, 2 * j as usize);
            m[(re, cx)] = w * sum.re;
            m[(im, cx)] = w * sum.im;
            m[(re, cy)] = w * dif.re;
            m[(im, cy)] = w * dif.im;
        }
        rhs[re] = w * mm.get(ni).re;
        rhs[im] = w * mm.get(ni).im;
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { (smax / smin).powi(2) } else { f64::INFINITY };
    if !(condition <= 1e12) {
        return Err(Error::IllPosed { condition });
    }
    let x = svd.solve(&rhs, 0.0).map_err(|e| Error::IllConditioned(e.to_string()))?;
    let bnorm = rhs.norm();
    let residual = if bnorm > 0.0 { (&m * &x - &rhs).norm() / bnorm } else { (&m * &x).norm() };

    let mut coeffs = vec![c(x[0], 0.0)];
    for j in 1..=d {
        coeffs.push(c(x[2 * j - 1], x[2 * j]));
    }
    let f = TrigPoly::real(coeffs);
    let grid = 1024;
    if f.min_on_grid(grid) < -1e-6 {
        let samples: Vec<f64> = (0..grid)
            .map(|k| f.eval(std::f64::consts::TAU * k as f64 / grid as f64).re.max(0.0))
            .collect();
        let f = cesaro_nonneg_approx(&samples, d);
        return Ok(RnFit { f, residual, projected: true, condition });
    }
    Ok(RnFit { f, residual, projected: false, condition })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_real, from_real_rows, min_eig};
    use crate::measure::combine;

    fn assert_close(a: &CMat, b: &CMat, tol: f64) {
        assert!((a - b).norm() <= tol, "{a} vs {b}");
    }

    #[test]
    fn parallel_sum_examples() {
        assert_close(&parallel_sum(&identity(2), &identity(2)).unwrap(), &identity(2).scale(0.5), 1e-15);
        let p = parallel_sum(&diag_real(&[1.0, 0.0]), &diag_real(&[0.0, 1.0])).unwrap();
        assert_close(&p, &CMat::zeros(2, 2), 1e-15);
        assert_close(&parallel_sum(&diag_real(&[2.0]), &diag_real(&[2.0])).unwrap(), &diag_real(&[1.0]), 1e-15);
        assert!(parallel_sum(&identity(2), &identity(3)).is_err());
    }

    #[test]
    fn simon_examples() {
        let a = from_real_rows(&[&[2.0, 1.0], &[1.0, 3.0]]);
        let d = simon_decompose(&FormPair::new(a.clone(), identity(2)).unwrap()).unwrap();
        assert!(d.converged);
        assert_close(&d.a_ac, &a, 1e-9);
        assert_close(&d.a_s, &CMat::zeros(2, 2), 1e-9);

        let d = simon_decompose(&FormPair::new(identity(2), diag_real(&[1.0, 0.0])).unwrap()).unwrap();
        assert_close(&d.a_ac, &diag_real(&[1.0, 0.0]), 1e-9);
        assert_close(&d.a_s, &diag_real(&[0.0, 1.0]), 1e-9);

        let ones = from_real_rows(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let d = simon_decompose(&FormPair::new(ones.clone(), diag_real(&[1.0, 0.0])).unwrap()).unwrap();
        assert_close(&d.a_ac, &CMat::zeros(2, 2), 1e-9);
        assert_close(&d.a_s, &ones, 1e-9);
    }

    #[test]
    fn simon_block_formula_oracle() {
        // B = diag(B1, 0): A_ac is the Schur complement shorted onto range(B)
        let a = from_real_rows(&[&[4.0, 1.0, 0.5], &[1.0, 3.0, 1.0], &[0.5, 1.0, 2.0]]);
        let b = diag_real(&[1.0, 2.0, 0.0]);
        let d = simon_decompose(&FormPair::new(a.clone(), b).unwrap()).unwrap();
        let a11 = a.view((0, 0), (2, 2)).into_owned();
        let a12 = a.view((0, 2), (2, 1)).into_owned();
        let schur = &a11 - &a12 * a12.adjoint() / a[(2, 2)];
        let mut want = CMat::zeros(3, 3);
        want.view_mut((0, 0), (2, 2)).copy_from(&schur);
        assert_close(&d.a_ac, &want, 1e-9);
        assert!(min_eig(&d.a_s) > -1e-9);
    }

    #[test]
    fn resolvent_examples() {
        let r = resolvent_identity_residual(&FormPair::new(CMat::zeros(2, 2), identity(2)).unwrap()).unwrap();
        assert_eq!(r.residual, 0.0);
        assert_close(&r.t, &CMat::zeros(2, 2), 0.0);
        let r = resolvent_identity_residual(&FormPair::new(diag_real(&[3.0]), diag_real(&[1.0])).unwrap()).unwrap();
        assert!(r.residual < 1e-15);
        assert!((r.t[(0, 0)].re - 3.0).abs() < 1e-15);
        let mu = CircleMeasure::from_poly(TrigPoly::real_from(&[2.0, 0.5, 0.25])).unwrap();
        let fp = FormPair::from_measures(&mu, &CircleMeasure::lebesgue(), 16);
        assert!(resolvent_identity_residual(&fp).unwrap().residual <= 1e-9);
        let singular = FormPair::new(identity(2), diag_real(&[1.0, 0.0])).unwrap();
        assert!(matches!(resolvent_identity_residual(&singular), Err(Error::SingularReference { .. })));
    }

    #[test]
    fn rn_extract_examples() {
        let m = CircleMeasure::lebesgue();
        let fit = rn_extract(&m, &m, 8, 0).unwrap();
        assert!((fit.f.coeff(0).re - 1.0).abs() < 1e-14);

        let mu = CircleMeasure::from_poly(TrigPoly::real_from(&[2.0, 1.0])).unwrap();
        let fit = rn_extract(&mu, &m, 16, 1).unwrap();
        assert!((fit.f.coeff(0).re - 2.0).abs() < 1e-14);
        assert!((fit.f.coeff(1) - c(1.0, 0.0)).norm() < 1e-14);
        assert!((fit.f.coeff(-1) - c(1.0, 0.0)).norm() < 1e-14);
        assert!(!fit.projected);

        // forward convolution: λ = 1 + cos θ, f = 3 + 2 cos θ
        let lam = CircleMeasure::from_poly(TrigPoly::real_from(&[1.0, 0.5])).unwrap();
        let f = TrigPoly::real_from(&[3.0, 1.0]);
        let mu = CircleMeasure::from_poly(f.mul(lam.density().as_trig().unwrap())).unwrap();
        let fit = rn_extract(&mu, &lam, 32, 1).unwrap();
        for j in -1..=1 {
            assert!((fit.f.coeff(j) - f.coeff(j)).norm() < 1e-8);
        }
        assert!(fit.residual < 1e-12);
        assert!(rn_extract(&mu, &lam, 4, 3).is_err());
    }

    #[test]
    fn rn_extract_ill_posed_for_singular_reference() {
        let lam = CircleMeasure::point_mass(0.0, 1.0).unwrap();
        let mu = combine(1.0, &lam, 0.0, &lam);
        assert!(matches!(rn_extract(&mu, &lam, 16, 2), Err(Error::IllPosed { .. })));
    }

    #[test]
    fn not_converged_carries_last_iterate() {
        let err = Error::NotConverged {
            kmax: KMAX,
            last: Box::new(FormDecomposition {
                a_ac: identity(1),
                a_s: CMat::zeros(1, 1),
                iterations: KMAX,
                converged: false,
            }),
        };
        assert!(err.is_numerical_failure());
    }
}
