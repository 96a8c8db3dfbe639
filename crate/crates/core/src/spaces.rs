//! Finite coordinate realizations of shifts, Toeplitz checks, kernel
//! lattice operations and operator-range decompositions.

use num_complex::Complex64;

use crate::error::{check_disk, Error, Result};
use crate::kernel::{gram, psd_check_scaled, GramIndex, KernelGram, PsdVerdict, TOL_PSD};
use crate::linalg::{
    c, condition_number, eigh, hermitian_part, identity, numerical_rank, pinv_hermitian, spectral_norm, trace_re, CMat,
    CVec,
};
use crate::measure::CircleMeasure;

/// Coordinate system a truncated operator acts on.
#[derive(Clone, Debug, PartialEq)]
pub enum Basis {
    /// Taylor coefficients `0..=N`.
    Coeff(usize),
    Grid(Vec<Complex64>),
}

impl Basis {
    pub fn dim(&self) -> usize {
        match self {
            Basis::Coeff(n) => n + 1,
            Basis::Grid(p) => p.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedOperator {
    pub matrix: CMat,
    pub basis: Basis,
}

impl TruncatedOperator {
    pub fn new(matrix: CMat, basis: Basis) -> Result<Self> {
        let d = basis.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix on a basis of size {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(TruncatedOperator { matrix, basis })
    }

    /// Multiplication by `z` on coefficients `0..=N`; the top coefficient is dropped.
    pub fn coefficient_shift(n: usize) -> Self {
        let d = n + 1;
        let matrix = CMat::from_fn(d, d, |i, j| if i == j + 1 { c(1.0, 0.0) } else { c(0.0, 0.0) });
        TruncatedOperator { matrix, basis: Basis::Coeff(n) }
    }

    pub fn coeff_form(g: &KernelGram) -> Result<Self> {
        match g.index {
            GramIndex::Coefficients(n) => TruncatedOperator::new(g.entries.clone(), Basis::Coeff(n)),
            GramIndex::Points(ref p) => TruncatedOperator::new(g.entries.clone(), Basis::Grid(p.clone())),
        }
    }
}

/// `(h(z) - h(0))/z` on Taylor coefficients.
pub fn backward_shift_coeffs(h: &[Complex64]) -> Vec<Complex64> {
    h.iter().skip(1).copied().collect()
}

/// `‖(V*TV - T)_{N×N}‖_F / ‖T_{N×N}‖_F` on the leading block, which avoids
/// the truncation edge.
pub fn toeplitz_residual(t: &TruncatedOperator, v: &TruncatedOperator) -> Result<f64> {
    if t.basis != v.basis {
        return Err(Error::DimensionMismatch("operators live on different bases".into()));
    }
    let d = t.matrix.nrows();
    if d < 2 {
        return Ok(0.0);
    }
    let full = v.matrix.adjoint() * &t.matrix * &v.matrix - &t.matrix;
    let lead = d - 1;
    let diff = full.view((0, 0), (lead, lead)).norm();
    let scale = t.matrix.view((0, 0), (lead, lead)).norm();
    Ok(if scale > 0.0 {
        diff / scale
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShiftCheck {
    /// `μ`-norm of `V_μ k_z z̄ - (k_z - k_0)` computed from truncated preimages.
    pub residual: f64,
    /// Largest Taylor-coefficient discrepancy over `0..=N`.
    pub coefficient_residual: f64,
    /// `|z|^N k^μ(z, z)`.
    pub bound: f64,
}

/// Checks `V_μ k_z z̄ = k_z - k_0` with `k_z` truncated to degree `N`.
pub fn shift_action_check(mu: &CircleMeasure, z: Complex64, n: usize) -> Result<ShiftCheck> {
    check_disk(z)?;
    let d = n + 2;
    let zc = z.conj();
    // preimage of k_z in L²(μ): Σ_{l<=N} z̄^l ζ^l
    let kz: Vec<Complex64> = (0..d).map(|l| if l <= n { zc.powi(l as i32) } else { c(0.0, 0.0) }).collect();
    // V_μ acts as multiplication by ζ on preimages
    let lhs: Vec<Complex64> = (0..d).map(|l| if l == 0 { c(0.0, 0.0) } else { zc * kz[l - 1] }).collect();
    let mut rhs = kz.clone();
    rhs[0] -= 1.0;
    let diff = CVec::from_iterator(d, lhs.iter().zip(&rhs).map(|(a, b)| a - b));

    let mom = mu.moments(d);
    let toeplitz = mom.toeplitz().view((0, 0), (d, d)).into_owned();
    let norm2 = (diff.adjoint() * &toeplitz * &diff)[(0, 0)].re.max(0.0);

    // C_μ p has Taylor coefficients j ↦ Σ_l p_l μ̂(j - l)
    let taylor = |p: &[Complex64], j: usize| -> Complex64 {
        p.iter().enumerate().map(|(l, &pl)| pl * mom.get(j as i64 - l as i64)).sum()
    };
    let coefficient_residual = (0..=n)
        .map(|j| (taylor(&lhs, j) - taylor(&rhs, j)).norm())
        .fold(0.0f64, f64::max);

    let kzz = crate::kernel::kernel_eval(mu, z, z, crate::kernel::KernelMethod::Herglotz)?.re;
    Ok(ShiftCheck { residual: norm2.sqrt(), coefficient_residual, bound: z.norm().powi(n as i32) * kzz })
}

/// Gram matrices of two kernels on a shared grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SpacePair {
    pub points: Vec<Complex64>,
    pub g_mu: CMat,
    pub g_lam: CMat,
}

impl SpacePair {
    pub fn from_measures(mu: &CircleMeasure, lam: &CircleMeasure, points: &[Complex64]) -> Result<Self> {
        Ok(SpacePair { points: points.to_vec(), g_mu: gram(mu, points)?.entries, g_lam: gram(lam, points)?.entries })
    }

    pub fn from_grams(g_mu: &KernelGram, g_lam: &KernelGram) -> Result<Self> {
        let points = match (&g_mu.index, &g_lam.index) {
            (GramIndex::Points(a), GramIndex::Points(b)) if a == b => a.clone(),
            _ => return Err(Error::DimensionMismatch("Gram matrices must share a point grid".into())),
        };
        for g in [&g_mu.entries, &g_lam.entries] {
            let v = crate::kernel::psd_check(g, TOL_PSD)?;
            if !v.is_psd() {
                return Err(Error::Invalid(format!("Gram matrix is not PSD (min eigenvalue {:.3e})", v.min_eig())));
            }
        }
        Ok(SpacePair { points, g_mu: g_mu.entries.clone(), g_lam: g_lam.entries.clone() })
    }

    pub fn g_sum(&self) -> CMat {
        &self.g_mu + &self.g_lam
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatticeSplit {
    /// Orthogonal projection onto `Ran U_∨`, in orthonormal coordinates of
    /// the span of `{k_{z_i} ⊕ 0, 0 ⊕ K_{z_i}}`.
    pub p_vee: CMat,
    pub p_wedge: CMat,
    pub g_wedge: KernelGram,
    pub intersection_rank: usize,
}

/// Sum and intersection of `ℋ(k^μ)` and `ℋ(k^λ)` restricted to a grid.
pub fn lattice_split(sp: &SpacePair) -> Result<LatticeSplit> {
    let n = sp.points.len();
    let g_sum = sp.g_sum();
    let ridge = 1e-10 * trace_re(&g_sum).abs() / n.max(1) as f64;
    let condition = condition_number(&(&g_sum + identity(n).scale(ridge)));
    if !(condition <= 1e12) {
        return Err(Error::SingularMetric { condition });
    }
    // block metric of the spanning set
    let mut metric = CMat::zeros(2 * n, 2 * n);
    metric.view_mut((0, 0), (n, n)).copy_from(&sp.g_mu);
    metric.view_mut((n, n), (n, n)).copy_from(&sp.g_lam);
    let (vals, vecs) = eigh(&metric);
    let top = vals.last().copied().unwrap_or(0.0).max(0.0);
    let keep: Vec<usize> = (0..2 * n).filter(|&i| vals[i] > 1e-13 * top && vals[i] > 0.0).collect();
    let r = keep.len();
    // R maps spanning-set coefficients to orthonormal coordinates
    let coords = CMat::from_fn(r, 2 * n, |a, j| vecs[(j, keep[a])].conj() * vals[keep[a]].sqrt());
    let mut both = CMat::zeros(2 * n, n);
    let mut left = CMat::zeros(2 * n, n);
    for i in 0..n {
        both[(i, i)] = c(1.0, 0.0);
        both[(n + i, i)] = c(1.0, 0.0);
        left[(i, i)] = c(1.0, 0.0);
    }
    let y = &coords * both;
    let p_vee = range_projector(&y, 1e-10);
    let p_wedge = identity(r) - &p_vee;
    let v = &coords * left;
    let g_wedge = hermitian_part(&(v.adjoint() * &p_wedge * &v));
    let intersection_rank = numerical_rank(&g_wedge, 1e-10);
    Ok(LatticeSplit {
        p_vee,
        p_wedge,
        g_wedge: KernelGram { index: GramIndex::Points(sp.points.clone()), entries: g_wedge },
        intersection_rank,
    })
}

fn range_projector(y: &CMat, rel_cut: f64) -> CMat {
    let rows = y.nrows();
    if rows == 0 || y.ncols() == 0 {
        return CMat::zeros(rows, rows);
    }
    let svd = y.clone().svd(true, false);
    let u = svd.u.as_ref().expect("u requested");
    let top = svd.singular_values.iter().fold(0.0f64, |a, &s| a.max(s));
    let mut p = CMat::zeros(rows, rows);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > rel_cut * top && s > 0.0 {
            let col = u.column(k);
            p += &col * col.adjoint();
        }
    }
    hermitian_part(&p)
}

/// `G_big - G_small`, the kernel of the complementary space.
pub fn complementary_kernel(big: &KernelGram, small: &KernelGram) -> Result<KernelGram> {
    if big.index != small.index || big.entries.shape() != small.entries.shape() {
        return Err(Error::DimensionMismatch("kernels are indexed differently".into()));
    }
    let diff = hermitian_part(&(&big.entries - &small.entries));
    let scale = trace_re(&big.entries).abs() / big.dim().max(1) as f64;
    match psd_check_scaled(&diff, TOL_PSD, scale)? {
        PsdVerdict::Psd { .. } => Ok(KernelGram { index: big.index.clone(), entries: diff }),
        PsdVerdict::Indefinite { min_eig, .. } => Err(Error::NotContractivelyContained { min_eig }),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pythagoras {
    pub y: CVec,
    pub z: CVec,
    /// `‖y‖²` in the range norm of `A`.
    pub range_norm2: f64,
    /// `‖z‖²` in the range norm of `(I - AA*)^{1/2}`.
    pub complement_norm2: f64,
    pub defect: f64,
}

/// Splits `x = AA*x + (I - AA*)x` and compares squared norms.
pub fn pythagoras_check(a: &CMat, x: &CVec) -> Result<Pythagoras> {
    if a.nrows() != x.len() {
        return Err(Error::DimensionMismatch(format!("{} rows vs vector of length {}", a.nrows(), x.len())));
    }
    let norm = spectral_norm(a);
    if norm > 1.0 + 1e-12 {
        return Err(Error::NotContraction { norm });
    }
    let aa = hermitian_part(&(a * a.adjoint()));
    let comp = identity(a.nrows()) - &aa;
    let y = &aa * x;
    let z = &comp * x;
    let quad = |m: &CMat, v: &CVec| (v.adjoint() * pinv_hermitian(m, 1e-12) * v)[(0, 0)].re;
    let range_norm2 = quad(&aa, &y);
    let complement_norm2 = quad(&comp, &z);
    let defect = (x.norm_squared() - range_norm2 - complement_norm2).abs();
    Ok(Pythagoras { y, z, range_norm2, complement_norm2, defect })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::parallel_sum;
    use crate::kernel::{coeff_kernel, default_grid, psd_check};
    use crate::linalg::{diag_real, min_eig};
    use crate::measure::{combine, DEFAULT_GRID};

    #[test]
    fn backward_shift_examples() {
        let z2 = [c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        assert_eq!(backward_shift_coeffs(&z2), vec![c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(backward_shift_coeffs(&[c(3.0, 0.0)]).is_empty());
        let szego: Vec<Complex64> = (0..30).map(|n| c(0.5f64.powi(n), 0.0)).collect();
        let back = backward_shift_coeffs(&szego);
        for (j, v) in back.iter().enumerate() {
            assert!((v - szego[j] * 0.5).norm() < 1e-15);
        }
    }

    #[test]
    fn shift_action_examples() {
        let m = CircleMeasure::lebesgue();
        let r = shift_action_check(&m, c(0.5, 0.0), 64).unwrap();
        assert!(r.residual <= 1e-9 && r.residual <= r.bound);
        assert!(r.coefficient_residual <= 1e-9);
        let mu = combine(1.0, &m, 1.0, &CircleMeasure::point_mass(1.0, 0.5).unwrap());
        let r = shift_action_check(&mu, c(0.0, 0.0), 10).unwrap();
        assert_eq!(r.residual, 0.0);
        let r = shift_action_check(&CircleMeasure::upper_half(DEFAULT_GRID), c(0.3, 0.0), 64).unwrap();
        assert!(r.residual <= 1e-9);
        assert!(shift_action_check(&m, c(0.0, 1.0), 4).is_err());
    }

    #[test]
    fn toeplitz_residual_examples() {
        let mu = combine(1.0, &CircleMeasure::upper_half(256), 1.0, &CircleMeasure::point_mass(0.4, 0.2).unwrap());
        let t = TruncatedOperator::coeff_form(&coeff_kernel(&mu, 6)).unwrap();
        let s = TruncatedOperator::coefficient_shift(6);
        assert!(toeplitz_residual(&t, &s).unwrap() < 1e-15);
        let i = TruncatedOperator::new(identity(4), Basis::Coeff(3)).unwrap();
        assert_eq!(toeplitz_residual(&i, &TruncatedOperator::coefficient_shift(3)).unwrap(), 0.0);
        let d = TruncatedOperator::new(diag_real(&[1.0, 2.0]), Basis::Coeff(1)).unwrap();
        assert!((toeplitz_residual(&d, &TruncatedOperator::coefficient_shift(1)).unwrap() - 1.0).abs() < 1e-15);
        assert!(toeplitz_residual(&d, &TruncatedOperator::coefficient_shift(2)).is_err());
    }

    #[test]
    fn shift_is_left_inverse_of_backward_shift() {
        let s = TruncatedOperator::coefficient_shift(5).matrix;
        let vv = s.adjoint() * &s;
        let lead = vv.view((0, 0), (5, 5)).into_owned();
        assert_eq!(lead, identity(5));
    }

    #[test]
    fn lattice_examples() {
        let pts = default_grid(8, 3);
        let m = CircleMeasure::lebesgue();
        let g = gram(&m, &pts).unwrap().entries;
        let split = lattice_split(&SpacePair::from_measures(&m, &m, &pts).unwrap()).unwrap();
        assert!((&split.g_wedge.entries - g.scale(0.5)).norm() < 1e-8 * g.norm());

        let split = lattice_split(&SpacePair::from_measures(&CircleMeasure::zero(), &m, &pts).unwrap()).unwrap();
        assert!(split.g_wedge.entries.norm() < 1e-10);
        assert_eq!(split.intersection_rank, 0);

        let sp = SpacePair::from_measures(&CircleMeasure::upper_half(DEFAULT_GRID), &CircleMeasure::lower_half(DEFAULT_GRID), &pts)
            .unwrap();
        let split = lattice_split(&sp).unwrap();
        assert!(split.intersection_rank >= 1);
        // parallel-sum oracle
        let oracle = parallel_sum(&sp.g_mu, &sp.g_lam).unwrap();
        assert!((&split.g_wedge.entries - &oracle).norm() < 1e-8 * oracle.norm());
        // projector algebra
        let r = split.p_vee.nrows();
        assert!((&split.p_vee + &split.p_wedge - identity(r)).norm() < 1e-12);
        assert!((&split.p_vee * &split.p_vee - &split.p_vee).norm() < 1e-10);
        assert!((&split.p_wedge * &split.p_wedge - &split.p_wedge).norm() < 1e-10);
        // contractive embeddings
        for g in [&sp.g_mu, &sp.g_lam] {
            assert!(psd_check(&(g - &split.g_wedge.entries), 1e-8).unwrap().is_psd());
        }
    }

    #[test]
    fn singular_metric_detected() {
        // the ridge caps the condition number near dim·1e10
        let pts = vec![c(0.1, 0.0); 128];
        let m = CircleMeasure::lebesgue();
        let sp = SpacePair::from_measures(&m, &m, &pts).unwrap();
        assert!(matches!(lattice_split(&sp), Err(Error::SingularMetric { .. })));
    }

    #[test]
    fn complementary_examples() {
        let pts = default_grid(6, 11);
        let mu = CircleMeasure::from_poly(crate::trigpoly::TrigPoly::real_from(&[1.0, 0.3])).unwrap();
        let lam = CircleMeasure::point_mass(2.0, 0.4).unwrap();
        let big = gram(&combine(1.0, &mu, 1.0, &lam), &pts).unwrap();
        let comp = complementary_kernel(&big, &gram(&mu, &pts).unwrap()).unwrap();
        assert!((&comp.entries - gram(&lam, &pts).unwrap().entries).norm() < 1e-12);

        let z = complementary_kernel(&big, &big).unwrap();
        assert_eq!(z.entries.norm(), 0.0);

        let m = CircleMeasure::lebesgue();
        let comp = complementary_kernel(&gram(&m, &pts).unwrap(), &gram(&CircleMeasure::upper_half(DEFAULT_GRID), &pts).unwrap())
            .unwrap();
        let minus = gram(&CircleMeasure::lower_half(DEFAULT_GRID), &pts).unwrap().entries;
        assert!((&comp.entries - minus).norm() < 1e-12);

        let bad = complementary_kernel(&gram(&mu, &pts).unwrap(), &big);
        assert!(matches!(bad, Err(Error::NotContractivelyContained { .. })));
    }

    #[test]
    fn pythagoras_examples() {
        let x = CVec::from_vec(vec![c(1.0, 0.0)]);
        let p = pythagoras_check(&CMat::zeros(1, 1), &x).unwrap();
        assert_eq!(p.y[0], c(0.0, 0.0));
        assert_eq!(p.z, x);
        assert!(p.defect < 1e-15);

        let p = pythagoras_check(&diag_real(&[0.5]), &x).unwrap();
        assert!((p.y[0].re - 0.25).abs() < 1e-15 && (p.z[0].re - 0.75).abs() < 1e-15);
        assert!((p.range_norm2 - 0.25).abs() < 1e-14 && (p.complement_norm2 - 0.75).abs() < 1e-14);
        assert!(p.defect < 1e-14);

        // partial isometry: e0 -> e1, e1 -> e2
        let mut a = CMat::zeros(3, 3);
        a[(1, 0)] = c(1.0, 0.0);
        a[(2, 1)] = c(0.0, 1.0);
        let x = CVec::from_vec(vec![c(1.0, 2.0), c(-0.5, 0.0), c(0.3, 0.3)]);
        let p = pythagoras_check(&a, &x).unwrap();
        assert!((p.y.adjoint() * &p.z)[(0, 0)].norm() < 1e-14);
        let aa = &a * a.adjoint();
        assert_eq!(numerical_rank(&aa, 1e-12) + numerical_rank(&(identity(3) - &aa), 1e-12), 3);
        assert!(p.defect < 1e-10 * x.norm_squared());
        assert!(min_eig(&(identity(3) - &aa)) > -1e-15);

        assert!(matches!(pythagoras_check(&diag_real(&[2.0]), &CVec::from_vec(vec![c(1.0, 0.0)])), Err(Error::NotContraction { .. })));
    }
}
