//! Reproducing kernels of Cauchy-transform spaces and Gram matrices.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{check_disk, Error, Result};
use crate::linalg::{asymmetry, c, eigh, max_abs, trace_re, CMat, CVec};
use crate::measure::CircleMeasure;
use crate::transform::herglotz_unchecked;

/// Relative eigenvalue floor for PSD verdicts.
pub const TOL_PSD: f64 = 1e-10;
pub const DEFAULT_SEED: u64 = 0xC1AC;
pub const DEFAULT_GRID_POINTS: usize = 64;
pub const GRID_RADIUS: f64 = 0.95;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelMethod {
    /// Direct integral of `1/((1 - z ζ̄)(1 - w̄ ζ))` against `μ`.
    Integral,
    /// `(H_μ(z) + conj H_μ(w)) / (2 (1 - z w̄))`.
    Herglotz,
}

pub fn kernel_eval(mu: &CircleMeasure, z: Complex64, w: Complex64, method: KernelMethod) -> Result<Complex64> {
    check_disk(z)?;
    check_disk(w)?;
    Ok(match method {
        KernelMethod::Integral => {
            let mut k = mu.density().kernel_integral(z, w);
            for a in mu.atoms() {
                let u = Complex64::from_polar(1.0, a.angle);
                k += a.weight / ((1.0 - z * u.conj()) * (1.0 - w.conj() * u));
            }
            k
        }
        KernelMethod::Herglotz => {
            (herglotz_unchecked(mu, z) + herglotz_unchecked(mu, w).conj()) / (2.0 * (1.0 - z * w.conj()))
        }
    })
}

/// How the rows of a Gram matrix are indexed.
#[derive(Clone, Debug, PartialEq)]
pub enum GramIndex {
    Points(Vec<Complex64>),
    /// Taylor coefficients `0..=N`.
    Coefficients(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelGram {
    pub index: GramIndex,
    pub entries: CMat,
}

impl KernelGram {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }
}

/// `[k^μ(z_i, z_j)]`.
pub fn gram(mu: &CircleMeasure, points: &[Complex64]) -> Result<KernelGram> {
    for &z in points {
        check_disk(z)?;
    }
    let h: Vec<Complex64> = points.par_iter().map(|&z| herglotz_unchecked(mu, z)).collect();
    let n = points.len();
    let entries = CMat::from_fn(n, n, |i, j| {
        if i == j {
            c(h[i].re / (1.0 - points[i].norm_sqr()), 0.0)
        } else {
            (h[i] + h[j].conj()) / (2.0 * (1.0 - points[i] * points[j].conj()))
        }
    });
    Ok(KernelGram { index: GramIndex::Points(points.to_vec()), entries })
}

/// Coefficient kernel `[μ̂(j - i)]_{i,j=0..N}`.
pub fn coeff_kernel(mu: &CircleMeasure, n: usize) -> KernelGram {
    KernelGram { index: GramIndex::Coefficients(n), entries: mu.moments(n).toeplitz() }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PsdVerdict {
    Psd { min_eig: f64 },
    Indefinite { min_eig: f64, witness: CVec },
}

impl PsdVerdict {
    pub fn is_psd(&self) -> bool {
        matches!(self, PsdVerdict::Psd { .. })
    }

    pub fn min_eig(&self) -> f64 {
        match self {
            PsdVerdict::Psd { min_eig } | PsdVerdict::Indefinite { min_eig, .. } => *min_eig,
        }
    }
}

/// Smallest eigenvalue against `-tol · trace(G)/dim`.
pub fn psd_check(g: &CMat, tol: f64) -> Result<PsdVerdict> {
    let dim = g.nrows().max(1) as f64;
    psd_check_scaled(g, tol, trace_re(g).abs() / dim)
}

pub(crate) fn psd_check_scaled(g: &CMat, tol: f64, scale: f64) -> Result<PsdVerdict> {
    if g.nrows() != g.ncols() {
        return Err(Error::DimensionMismatch(format!("{}x{} matrix is not square", g.nrows(), g.ncols())));
    }
    let asym = asymmetry(g);
    if asym > 1e-12 * max_abs(g).max(1.0) {
        return Err(Error::NotHermitian { asymmetry: asym });
    }
    if g.nrows() == 0 {
        return Ok(PsdVerdict::Psd { min_eig: 0.0 });
    }
    let (vals, vecs) = eigh(g);
    let min_eig = vals[0];
    if min_eig >= -tol * scale {
        Ok(PsdVerdict::Psd { min_eig })
    } else {
        Ok(PsdVerdict::Indefinite { min_eig, witness: vecs.column(0).into_owned() })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Domination {
    Dominated,
    /// `witness` is a coefficient vector `x` with `x*(t² G_λ - G_μ) x = min_eig < 0`.
    Violated { min_eig: f64, witness: CVec },
}

/// Tests `k^μ ≤ t² k^λ` on a finite grid.
pub fn dominates_rk(mu: &CircleMeasure, lam: &CircleMeasure, t: f64, points: &[Complex64]) -> Result<Domination> {
    if !(t > 0.0) {
        return Err(Error::Invalid(format!("domination constant t = {t} must be positive")));
    }
    let gm = gram(mu, points)?.entries;
    let gl = gram(lam, points)?.entries.scale(t * t);
    let dim = points.len().max(1) as f64;
    let scale = trace_re(&gl).max(trace_re(&gm)) / dim;
    let diff = crate::linalg::hermitian_part(&(gl - gm));
    Ok(match psd_check_scaled(&diff, TOL_PSD, scale)? {
        PsdVerdict::Psd { .. } => Domination::Dominated,
        PsdVerdict::Indefinite { min_eig, witness } => Domination::Violated { min_eig, witness },
    })
}

/// `n` points drawn uniformly from the disk of radius [`GRID_RADIUS`].
pub fn default_grid(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let r = GRID_RADIUS * rng.random::<f64>().sqrt();
            let theta = std::f64::consts::TAU * rng.random::<f64>();
            Complex64::from_polar(r, theta)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_real, identity};
    use crate::measure::{combine, DEFAULT_GRID};
    use crate::trigpoly::TrigPoly;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn kernel_examples_both_methods() {
        let m = CircleMeasure::lebesgue();
        let d = CircleMeasure::point_mass(0.0, 1.0).unwrap();
        let (h, z0) = (c(0.5, 0.0), c(0.0, 0.0));
        for method in [KernelMethod::Integral, KernelMethod::Herglotz] {
            assert!(close(kernel_eval(&m, h, h, method).unwrap(), c(4.0 / 3.0, 0.0), 1e-12));
            assert_eq!(kernel_eval(&CircleMeasure::zero(), h, z0, method).unwrap(), c(0.0, 0.0));
            assert!(close(kernel_eval(&d, h, z0, method).unwrap(), c(2.0, 0.0), 1e-14));
        }
        assert!(kernel_eval(&m, c(1.0, 0.0), z0, KernelMethod::Herglotz).is_err());
    }

    #[test]
    fn methods_agree_on_every_part_kind() {
        let poly = CircleMeasure::from_poly(TrigPoly::real(vec![c(1.5, 0.0), c(0.3, 0.2), c(-0.1, 0.25)])).unwrap();
        let half = CircleMeasure::upper_half(64);
        let masked = crate::measure::classical_decompose_oracle(&poly, &half).0;
        let atom = CircleMeasure::point_mass(2.5, 0.3).unwrap();
        let all = combine(1.0, &combine(1.0, &poly, 1.0, &half), 1.0, &combine(1.0, &masked, 1.0, &atom));
        let pts = [c(0.9, 0.1), c(-0.3, 0.85), c(0.0, 0.0), c(0.2, -0.94)];
        for mu in [&poly, &half, &masked, &atom, &all] {
            for &z in &pts {
                for &w in &pts {
                    let a = kernel_eval(mu, z, w, KernelMethod::Integral).unwrap();
                    let b = kernel_eval(mu, z, w, KernelMethod::Herglotz).unwrap();
                    assert!((a - b).norm() <= 1e-8 * (1.0 + b.norm()), "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn gram_examples() {
        let m = CircleMeasure::lebesgue();
        assert!(close(gram(&m, &[c(0.0, 0.0)]).unwrap().entries[(0, 0)], c(1.0, 0.0), 1e-15));
        let g = gram(&m, &[c(0.0, 0.0), c(0.5, 0.0)]).unwrap().entries;
        let want = [[1.0, 1.0], [1.0, 4.0 / 3.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!(close(g[(i, j)], c(want[i][j], 0.0), 1e-14));
            }
        }
        let g = gram(&CircleMeasure::upper_half(DEFAULT_GRID), &[c(0.0, 0.0)]).unwrap().entries;
        assert!(close(g[(0, 0)], c(0.5, 0.0), 1e-15));
    }

    #[test]
    fn coeff_kernel_examples() {
        let m = CircleMeasure::lebesgue();
        assert_eq!(coeff_kernel(&m, 2).entries, identity(3));
        assert_eq!(coeff_kernel(&m.scaled(2.0), 1).entries, identity(2).scale(2.0));
        let d = coeff_kernel(&CircleMeasure::point_mass(0.0, 1.0).unwrap(), 1).entries;
        assert!(d.iter().all(|v| close(*v, c(1.0, 0.0), 1e-15)));
    }

    #[test]
    fn psd_examples() {
        assert!(psd_check(&identity(3), TOL_PSD).unwrap().is_psd());
        let v = psd_check(&diag_real(&[1.0, -1.0]), TOL_PSD).unwrap();
        assert_eq!(v.min_eig(), -1.0);
        match v {
            PsdVerdict::Indefinite { witness, .. } => assert!((witness[1].norm() - 1.0).abs() < 1e-12),
            PsdVerdict::Psd { .. } => panic!("diag(1,-1) is indefinite"),
        }
        let mut bad = identity(2);
        bad[(0, 1)] = c(1.0, 0.0);
        assert!(matches!(psd_check(&bad, TOL_PSD), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn domination_examples() {
        let m = CircleMeasure::lebesgue();
        let pts = default_grid(DEFAULT_GRID_POINTS, DEFAULT_SEED);
        assert_eq!(dominates_rk(&m, &m, 1.0, &pts).unwrap(), Domination::Dominated);
        let mp = CircleMeasure::upper_half(DEFAULT_GRID);
        assert_eq!(dominates_rk(&mp, &m, 1.0, &pts).unwrap(), Domination::Dominated);
        match dominates_rk(&m.scaled(2.0), &m, 1.0, &pts).unwrap() {
            Domination::Violated { min_eig, witness } => {
                assert!(min_eig < 0.0);
                assert!((witness.norm() - 1.0).abs() < 1e-12);
            }
            Domination::Dominated => panic!("2m is not dominated by m"),
        }
    }

    #[test]
    fn default_grid_is_reproducible() {
        let a = default_grid(16, 7);
        assert_eq!(a, default_grid(16, 7));
        assert_ne!(a, default_grid(16, 8));
        assert!(a.iter().all(|z| z.norm() <= GRID_RADIUS));
    }
}
