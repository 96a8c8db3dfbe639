//! Laurent (trigonometric) polynomials on the circle, Fejér–Riesz spectral
//! factorization and Fejér (Cesàro) smoothing of sampled data.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linalg::{c, CMat};

/// Relative tolerance for the nonnegativity pre-check.
pub const TOL_PSD: f64 = 1e-10;
/// Roots closer than this to the unit circle are treated as unimodular.
const UNIT_CIRCLE_BAND: f64 = 1e-7;
/// Roots this close together are treated as one numerically split root.
const CLUSTER_RADIUS: f64 = 1e-3;
/// Polished roots this far off the circle on both sides form a reflected pair.
/// Closer pairs are snapped, which moves `|g|²` by about the gap squared.
const REFLECTED_GAP: f64 = 1e-6;

/// `Σ_{j=-n}^{n} c_j e^{ijθ}`.
///
/// Real-flagged polynomials keep only `c_0..c_n`; negative indices are the
/// conjugate mirror.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigPoly {
    real: bool,
    coeffs: Vec<Complex64>,
}

impl TrigPoly {
    /// Real-valued polynomial from its nonnegative-index coefficients.
    pub fn real(mut nonneg: Vec<Complex64>) -> Self {
        if nonneg.is_empty() {
            nonneg.push(c(0.0, 0.0));
        }
        nonneg[0].im = 0.0;
        TrigPoly { real: true, coeffs: nonneg }
    }

    /// Real cosine polynomial `Σ a_j cos(jθ)`-style input: `c_j = a_j` for
    /// `j >= 0` with real `a_j`.
    pub fn real_from(coeffs: &[f64]) -> Self {
        Self::real(coeffs.iter().map(|&v| c(v, 0.0)).collect())
    }

    pub fn constant(value: f64) -> Self {
        Self::real(vec![c(value, 0.0)])
    }

    /// General Laurent polynomial from `c_{-n}, ..., c_n` (odd length).
    pub fn laurent(full: Vec<Complex64>) -> Result<Self> {
        if full.len() % 2 == 0 {
            return Err(Error::Invalid("Laurent coefficient vector must have odd length".into()));
        }
        Ok(TrigPoly { real: false, coeffs: full })
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn degree(&self) -> usize {
        if self.real {
            self.coeffs.len() - 1
        } else {
            (self.coeffs.len() - 1) / 2
        }
    }

    pub fn coeff(&self, j: i64) -> Complex64 {
        let n = self.degree() as i64;
        if j.abs() > n {
            return c(0.0, 0.0);
        }
        if self.real {
            if j >= 0 {
                self.coeffs[j as usize]
            } else {
                self.coeffs[(-j) as usize].conj()
            }
        } else {
            self.coeffs[(j + n) as usize]
        }
    }

    /// Coefficients `c_{-n}..c_n`.
    pub fn to_laurent(&self) -> Vec<Complex64> {
        let n = self.degree() as i64;
        (-n..=n).map(|j| self.coeff(j)).collect()
    }

    /// Stored coefficients: `c_0..c_n` when real-flagged, else `c_{-n}..c_n`.
    pub fn stored(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn eval(&self, theta: f64) -> Complex64 {
        let n = self.degree() as i64;
        if self.real {
            let mut acc = self.coeffs[0].re;
            for j in 1..=n {
                let e = Complex64::from_polar(1.0, j as f64 * theta);
                acc += 2.0 * (self.coeffs[j as usize] * e).re;
            }
            c(acc, 0.0)
        } else {
            (-n..=n)
                .map(|j| self.coeff(j) * Complex64::from_polar(1.0, j as f64 * theta))
                .sum()
        }
    }

    pub fn abs_sum(&self) -> f64 {
        let n = self.degree() as i64;
        (-n..=n).map(|j| self.coeff(j).norm()).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        TrigPoly { real: self.real, coeffs: self.coeffs.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &TrigPoly) -> TrigPoly {
        let n = self.degree().max(other.degree());
        if self.real && other.real {
            TrigPoly::real((0..=n as i64).map(|j| self.coeff(j) + other.coeff(j)).collect())
        } else {
            let n = n as i64;
            TrigPoly { real: false, coeffs: (-n..=n).map(|j| self.coeff(j) + other.coeff(j)).collect() }
        }
    }

    /// Laurent product.
    pub fn mul(&self, other: &TrigPoly) -> TrigPoly {
        let (a, b) = (self.degree() as i64, other.degree() as i64);
        let n = a + b;
        let coeff = |k: i64| -> Complex64 {
            let lo = (-a).max(k - b);
            let hi = a.min(k + b);
            (lo..=hi).map(|j| self.coeff(j) * other.coeff(k - j)).sum()
        };
        if self.real && other.real {
            TrigPoly::real((0..=n).map(coeff).collect())
        } else {
            TrigPoly { real: false, coeffs: (-n..=n).map(coeff).collect() }
        }
    }

    /// Drop top-degree coefficients below `rel * Σ|c_j|`.
    pub fn trimmed(&self, rel: f64) -> TrigPoly {
        let scale = self.abs_sum();
        let mut n = self.degree() as i64;
        while n > 0 && self.coeff(n).norm() <= rel * scale && self.coeff(-n).norm() <= rel * scale {
            n -= 1;
        }
        if self.real {
            TrigPoly::real(self.coeffs[..=n as usize].to_vec())
        } else {
            TrigPoly { real: false, coeffs: (-n..=n).map(|j| self.coeff(j)).collect() }
        }
    }

    /// Minimum of the real part over `m` uniform points.
    pub fn min_on_grid(&self, m: usize) -> f64 {
        (0..m)
            .map(|k| self.eval(2.0 * PI * k as f64 / m as f64).re)
            .fold(f64::INFINITY, f64::min)
    }

    /// Maximum imaginary part over `m` uniform points.
    pub fn max_imag_on_grid(&self, m: usize) -> f64 {
        (0..m)
            .map(|k| self.eval(2.0 * PI * k as f64 / m as f64).im.abs())
            .fold(0.0, f64::max)
    }
}

/// Analytic polynomial `g(z) = Σ_{k=0}^{n} g_k z^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticPoly {
    pub coeffs: Vec<Complex64>,
}

impl AnalyticPoly {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        AnalyticPoly { coeffs }
    }

    pub fn one() -> Self {
        AnalyticPoly { coeffs: vec![c(1.0, 0.0)] }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(c(0.0, 0.0), |acc, &g| acc * z + g)
    }

    /// `|g(e^{iθ})|²` as a real-flagged Laurent polynomial.
    pub fn abs2(&self) -> TrigPoly {
        let n = self.degree();
        let coeffs = (0..=n)
            .map(|j| (0..=n - j).map(|k| self.coeffs[k + j] * self.coeffs[k].conj()).sum())
            .collect();
        TrigPoly::real(coeffs)
    }
}

/// Spectral factor `g` with `|g|² = p` on the circle, no zeros in the open
/// disk, and `g_0 >= 0`.
pub fn fejer_riesz_factor(p: &TrigPoly) -> Result<AnalyticPoly> {
    if !p.is_real() {
        return Err(Error::Invalid("Fejér–Riesz factorization needs a real-flagged polynomial".into()));
    }
    let scale = p.abs_sum();
    if scale == 0.0 {
        return Ok(AnalyticPoly::new(vec![c(0.0, 0.0)]));
    }
    let p = p.trimmed(1e-15);
    let n = p.degree();
    let grid = 8 * (n + 1);
    let min = p.min_on_grid(grid);
    if min < -TOL_PSD * scale {
        return Err(Error::NotNonnegative { min });
    }
    if n == 0 {
        return Ok(AnalyticPoly::new(vec![c(p.coeff(0).re.max(0.0).sqrt(), 0.0)]));
    }

    // z^n p(z), ascending powers.
    let full: Vec<Complex64> = p.to_laurent();
    let roots = poly_roots(&full)?;
    let chosen = select_outer_roots(&full, &roots, n);

    // |C|² from the leading coefficient: c_n = |C|² Π(-conj ρ_k).
    let prod_abs: f64 = chosen.iter().map(|r| r.norm()).product();
    let modulus = (p.coeff(n as i64).norm() / prod_abs).sqrt();
    let g0_unscaled: Complex64 = chosen.iter().map(|r| -r).product();
    let phase = if g0_unscaled.norm() > 0.0 { g0_unscaled.conj() / g0_unscaled.norm() } else { c(1.0, 0.0) };
    let lead = phase * modulus;

    // Expand C Π (z - ρ_k).
    let mut coeffs = vec![lead];
    for r in &chosen {
        let mut next = vec![c(0.0, 0.0); coeffs.len() + 1];
        for (k, &a) in coeffs.iter().enumerate() {
            next[k + 1] += a;
            next[k] -= a * r;
        }
        coeffs = next;
    }
    coeffs[0] = c(coeffs[0].norm(), 0.0);
    let g = AnalyticPoly::new(wilson_refine(coeffs, &p));

    let worst = (0..grid.max(1024))
        .map(|k| {
            let theta = 2.0 * PI * k as f64 / grid.max(1024) as f64;
            (g.eval(Complex64::from_polar(1.0, theta)).norm_sqr() - p.eval(theta).re).abs()
        })
        .fold(0.0, f64::max);
    if worst > 1e-8 * scale {
        return Err(Error::IllConditioned(format!(
            "spectral factor residual {worst:.3e} exceeds tolerance"
        )));
    }
    Ok(g)
}

/// `r_j = Σ_k a_{k+j} conj(a_k)`, the coefficients of `|g|²` for `j = 0..=n`.
fn autocorrelation(a: &[Complex64]) -> Vec<Complex64> {
    (0..a.len()).map(|j| (0..a.len() - j).map(|k| a[k + j] * a[k].conj()).sum()).collect()
}

/// Newton refinement of a spectral factor on `autocorrelation(a) = p̂(0..=n)`.
///
/// Root-based factors lose accuracy when zeros of `p` crowd near the circle;
/// the coefficient equations do not. `a_0` stays real, and steps are halved
/// until the residual drops.
fn wilson_refine(mut a: Vec<Complex64>, p: &TrigPoly) -> Vec<Complex64> {
    let n = a.len() - 1;
    let target: Vec<Complex64> = (0..=n).map(|j| p.coeff(j as i64)).collect();
    let residual = |a: &[Complex64]| -> Vec<Complex64> {
        autocorrelation(a).iter().zip(&target).map(|(r, t)| t - r).collect()
    };
    let size = |r: &[Complex64]| r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    // Real coordinates: Re r_0, then (Re, Im) of r_1..r_n.
    let flatten = |r: &[Complex64]| -> DVector<f64> {
        DVector::from_iterator(2 * n + 1, std::iter::once(r[0].re).chain(r[1..].iter().flat_map(|z| [z.re, z.im])))
    };
    let mut res = residual(&a);
    for _ in 0..30 {
        let now = size(&res);
        if now == 0.0 {
            break;
        }
        let mut jac = DMatrix::<f64>::zeros(2 * n + 1, 2 * n + 1);
        for col in 0..2 * n + 1 {
            let (k, dir) = if col == 0 { (0, c(1.0, 0.0)) } else { ((col + 1) / 2, if col % 2 == 1 { c(1.0, 0.0) } else { c(0.0, 1.0) }) };
            let dr: Vec<Complex64> = (0..=n)
                .map(|j| {
                    let mut v = c(0.0, 0.0);
                    if k >= j {
                        v += dir * a[k - j].conj();
                    }
                    if k + j <= n {
                        v += a[k + j] * dir.conj();
                    }
                    v
                })
                .collect();
            jac.set_column(col, &flatten(&dr));
        }
        let Ok(step) = jac.svd(true, true).solve(&flatten(&res), 1e-14 * now.max(1e-300)) else { break };
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-4 {
            let mut trial = a.clone();
            trial[0] += step[0] * t;
            for k in 1..=n {
                trial[k] += c(step[2 * k - 1], step[2 * k]) * t;
            }
            let r = residual(&trial);
            if size(&r) < now {
                (a, res, improved) = (trial, r, true);
                break;
            }
            t /= 2.0;
        }
        if !improved {
            break;
        }
    }
    a
}

/// Roots of `Σ a_k z^k` from the eigenvalues of the companion matrix.
fn poly_roots(ascending: &[Complex64]) -> Result<Vec<Complex64>> {
    let deg = ascending.len() - 1;
    let lead = ascending[deg];
    if lead.norm() == 0.0 {
        return Err(Error::IllConditioned("vanishing leading coefficient".into()));
    }
    let mut comp = CMat::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = c(1.0, 0.0);
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -ascending[i] / lead;
    }
    let schur = Schur::try_new(comp, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::IllConditioned("companion eigenvalue iteration failed".into()))?;
    let (_, t) = schur.unpack();
    Ok((0..deg).map(|i| t[(i, i)]).collect())
}

fn horner(a: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = c(0.0, 0.0);
    let mut dp = c(0.0, 0.0);
    for &coef in a.iter().rev() {
        dp = dp * z + p;
        p = p * z + coef;
    }
    (p, dp)
}

fn polish_roots(a: &[Complex64], roots: Vec<Complex64>) -> Vec<Complex64> {
    roots
        .into_iter()
        .map(|mut r| {
            for _ in 0..8 {
                let (p, dp) = horner(a, r);
                if dp.norm() == 0.0 {
                    break;
                }
                let step = p / dp;
                let cand = r - step;
                if horner(a, cand).0.norm() < p.norm() {
                    r = cand;
                } else {
                    break;
                }
            }
            r
        })
        .collect()
}

/// Pick one root from each reflected pair `(r, 1/conj r)`, preferring the one
/// outside the disk. Unimodular roots have even multiplicity; a numerically
/// split cluster is replaced by half as many copies of its centroid.
fn select_outer_roots(poly: &[Complex64], roots: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut outside: Vec<Complex64> = Vec::new();
    let mut unimodular: Vec<Complex64> = Vec::new();
    for mut cluster in cluster_roots(roots, CLUSTER_RADIUS) {
        if cluster.len() == 1 {
            cluster = polish_roots(poly, cluster);
        }
        let centroid = cluster.iter().sum::<Complex64>() / cluster.len() as f64;
        let u = centroid / centroid.norm();
        if (1.0 - centroid.norm()).abs() <= UNIT_CIRCLE_BAND && cluster.len() % 2 == 0 {
            // A close reflected pair separates once polished; a zero of p on
            // the circle does not.
            let half = cluster.len() / 2;
            let mut polished = polish_roots(poly, cluster);
            polished.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
            let split = polished[half - 1].norm() > 1.0 + REFLECTED_GAP && polished[half].norm() < 1.0 - REFLECTED_GAP;
            if split {
                outside.extend(&polished[..half]);
            } else {
                unimodular.extend(std::iter::repeat_n(u, half));
            }
        } else {
            outside.extend(cluster.into_iter().filter(|r| r.norm() > 1.0));
        }
    }
    if outside.len() + unimodular.len() == n {
        outside.extend(unimodular);
        return outside;
    }
    // Fallback: the n roots of largest modulus.
    let mut sorted = roots.to_vec();
    sorted.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    sorted.truncate(n);
    sorted
}

/// Single-linkage clusters of roots closer than `radius`.
fn cluster_roots(roots: &[Complex64], radius: f64) -> Vec<Vec<Complex64>> {
    let n = roots.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(label: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while label[r] != r {
            r = label[r];
        }
        label[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if (roots[i] - roots[j]).norm() < radius {
                let (a, b) = (find(&mut label, i), find(&mut label, j));
                label[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: Vec<Vec<Complex64>> = Vec::new();
    let mut index = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut label, i);
        if index[r] == usize::MAX {
            index[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[index[r]].push(roots[i]);
    }
    groups
}

/// Degree-`n` Fejér mean of the DFT of uniformly sampled data; nonnegative
/// whenever the samples are.
pub fn cesaro_nonneg_approx(samples: &[f64], n: usize) -> TrigPoly {
    let m = samples.len();
    if m == 0 {
        return TrigPoly::constant(0.0);
    }
    let mut buf: Vec<Complex64> = samples.iter().map(|&s| c(s, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let coeffs = (0..=n)
        .map(|j| {
            let taper = 1.0 - j as f64 / (n as f64 + 1.0);
            buf[j % m] * (taper / m as f64)
        })
        .collect();
    TrigPoly::real(coeffs)
}
