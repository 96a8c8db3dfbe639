//! Herglotz and Cauchy transforms, the Clark correspondence between
//! measures and contractive analytic functions, and Szegő's distance.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{check_disk, Error, Result};
use crate::linalg::c;
use crate::measure::{Atom, CircleMeasure, Density, DensityPart, Support};
use crate::trigpoly::{fejer_riesz_factor, AnalyticPoly};

const TAU: f64 = 2.0 * PI;

/// Below this log-integral the Szegő distance is reported as zero.
pub const LOG_FLOOR: f64 = -40.0;
/// Atoms lighter than this fraction of the total mass are not reported.
pub const ATOM_FLOOR: f64 = 1e-4;
/// Relative Szegő distance at or below which a measure counts as extreme.
pub const EXTREME_FLOOR: f64 = 1e-8;

/// `r_k = 1 - 2^{-k}`, `k = 4..=12`.
pub fn default_radii() -> Vec<f64> {
    (4..=12).map(|k| 1.0 - 2f64.powi(-k)).collect()
}

/// `H_μ(z) = ∫ (ζ + z)/(ζ - z) dμ(ζ)`.
pub fn herglotz(mu: &CircleMeasure, z: Complex64) -> Result<Complex64> {
    check_disk(z)?;
    Ok(herglotz_unchecked(mu, z))
}

pub(crate) fn herglotz_unchecked(mu: &CircleMeasure, z: Complex64) -> Complex64 {
    let mut h = mu.density().herglotz(z);
    for a in mu.atoms() {
        let u = Complex64::from_polar(1.0, a.angle);
        h += (u + z) / (u - z) * a.weight;
    }
    h
}

/// Cauchy transform `∫ h(ζ)/(1 - z ζ̄) dμ(ζ)` of an analytic polynomial.
pub fn cauchy(mu: &CircleMeasure, h: &AnalyticPoly, z: Complex64) -> Result<Complex64> {
    check_disk(z)?;
    let d = h.degree();
    let mom = mu.moments(d);
    // Σ_{j>=0} z^j μ̂(j)
    let tail = (herglotz_unchecked(mu, z) + mom.get(0)) * 0.5;
    let mut out = c(0.0, 0.0);
    for (k, &hk) in h.coeffs.iter().enumerate() {
        // Σ_j z^j μ̂(j-k) = Σ_{j<k} z^j μ̂(j-k) + z^k Σ_{n>=0} z^n μ̂(n)
        let mut s = tail * z.powi(k as i32);
        for j in 0..k {
            s += z.powi(j as i32) * mom.get(j as i64 - k as i64);
        }
        out += hk * s;
    }
    Ok(out)
}

/// A contractive analytic function on the disk.
#[derive(Clone, Debug, PartialEq)]
pub enum ContractiveFunction {
    Rational { num: AnalyticPoly, den: AnalyticPoly },
    /// `b_μ = (H_μ - 1)/(H_μ + 1)`.
    Cayley(CircleMeasure),
    /// Möbius gauge of `base` shifting its Herglotz function by `i t`.
    Gauge { base: Box<ContractiveFunction>, t: f64 },
}

impl ContractiveFunction {
    pub fn rational(num: AnalyticPoly, den: AnalyticPoly) -> Result<Self> {
        if den.coeffs.iter().all(|v| v.norm() == 0.0) {
            return Err(Error::Invalid("denominator vanishes identically".into()));
        }
        let f = ContractiveFunction::Rational { num, den };
        f.check_contractive()?;
        Ok(f)
    }

    pub fn constant(v: Complex64) -> Result<Self> {
        Self::rational(AnalyticPoly::new(vec![v]), AnalyticPoly::one())
    }

    /// `b(z) = z`.
    pub fn identity() -> Self {
        ContractiveFunction::Rational {
            num: AnalyticPoly::new(vec![c(0.0, 0.0), c(1.0, 0.0)]),
            den: AnalyticPoly::one(),
        }
    }

    fn check_contractive(&self) -> Result<()> {
        for &r in &[0.0, 0.5, 0.9, 0.99, 0.999] {
            for k in 0..256 {
                let z = Complex64::from_polar(r, TAU * k as f64 / 256.0);
                let m = self.eval_unchecked(z).norm();
                if !(m <= 1.0 + 1e-10) {
                    return Err(Error::NonContractive { modulus: m });
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        check_disk(z)?;
        Ok(self.eval_unchecked(z))
    }

    fn eval_unchecked(&self, z: Complex64) -> Complex64 {
        match self {
            ContractiveFunction::Rational { num, den } => num.eval(z) / den.eval(z),
            ContractiveFunction::Cayley(mu) => {
                let h = herglotz_unchecked(mu, z);
                (h - 1.0) / (h + 1.0)
            }
            ContractiveFunction::Gauge { base, t } => {
                let b = base.eval_unchecked(z);
                let a = c(*t, 0.0) / c(*t, 2.0);
                let unimodular = c(2.0, -t) / c(2.0, *t);
                unimodular * (b - a) / (1.0 - a.conj() * b)
            }
        }
    }

    /// `H_b = (1 + b)/(1 - b)`.
    pub fn herglotz(&self, z: Complex64) -> Result<Complex64> {
        check_disk(z)?;
        Ok(self.herglotz_unchecked(z))
    }

    fn herglotz_unchecked(&self, z: Complex64) -> Complex64 {
        match self {
            ContractiveFunction::Cayley(mu) => herglotz_unchecked(mu, z),
            ContractiveFunction::Gauge { base, t } => base.herglotz_unchecked(z) + c(0.0, *t),
            ContractiveFunction::Rational { .. } => {
                let b = self.eval_unchecked(z);
                (1.0 + b) / (1.0 - b)
            }
        }
    }
}

pub fn b_from_measure(mu: &CircleMeasure) -> ContractiveFunction {
    ContractiveFunction::Cayley(mu.clone())
}

/// Möbius gauge `b₂ = ((2 - it)/(2 + it))·(b - a)/(1 - ā b)` with
/// `a = t/(2i + t)`, for which `H_{b₂} = H_b + it`.
pub fn mobius_gauge(b: &ContractiveFunction, t: f64) -> ContractiveFunction {
    if t == 0.0 {
        return b.clone();
    }
    ContractiveFunction::Gauge { base: Box::new(b.clone()), t }
}

/// Linear extrapolation to `s = 0` through `(s1, q1)` and `(s2, q2)`.
fn extrapolate(s1: f64, q1: f64, s2: f64, q2: f64) -> f64 {
    (s1 * q2 - s2 * q1) / (s1 - s2)
}

fn poisson(r: f64, t: f64) -> f64 {
    (1.0 - r * r) / (1.0 - 2.0 * r * t.cos() + r * r)
}

/// Golden-section maximization of `f` on `[center - half, center + half]`.
pub(crate) fn refine_peak(f: impl Fn(f64) -> Result<f64>, center: f64, half: f64) -> Result<f64> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (center - half, center + half);
    let (mut x1, mut x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    while hi - lo > 1e-13 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1)?;
        }
    }
    Ok((lo + hi) / 2.0)
}

/// Clark measure of `b` from radial boundary behaviour of `Re H_b` on a
/// uniform grid of `grid` cells.
///
/// Atoms are located by refining peaks of `Re H_b` near the circle and the
/// density is sampled at the cell midpoints. Both limits are extrapolated
/// to `r = 1` from the outermost radii.
pub fn clark_measure(b: &ContractiveFunction, grid: usize, radii: &[f64]) -> Result<CircleMeasure> {
    if grid == 0 || !grid.is_power_of_two() {
        return Err(Error::Invalid(format!("grid {grid} is not a power of two")));
    }
    if radii.len() < 3 || radii.windows(2).any(|w| !(w[0] < w[1])) || radii[0] <= 0.0 || radii[radii.len() - 1] >= 1.0 {
        return Err(Error::Invalid("radii must increase within (0, 1), at least three of them".into()));
    }
    if !matches!(b, ContractiveFunction::Cayley(_)) {
        b.check_contractive()?;
    }
    let mass = b.herglotz_unchecked(c(0.0, 0.0)).re;
    if !mass.is_finite() {
        return Err(Error::Invalid("b ≡ 1 has no finite Clark measure".into()));
    }
    if mass <= 1e-14 {
        return Ok(CircleMeasure::zero());
    }
    let n = radii.len();
    let (r0, r1, r2) = (radii[n - 3], radii[n - 2], radii[n - 1]);
    let (s0, s1, s2) = (1.0 - r0, 1.0 - r1, 1.0 - r2);
    let h = TAU / grid as f64;

    let sweep = |theta: f64, r: f64| -> Result<f64> {
        let z = Complex64::from_polar(r, theta);
        if !matches!(b, ContractiveFunction::Cayley(_)) {
            let m = b.eval_unchecked(z).norm();
            if m > 1.0 + 1e-8 {
                return Err(Error::NonContractive { modulus: m });
            }
        }
        Ok(b.herglotz_unchecked(z).re)
    };

    let floor = ATOM_FLOOR * mass;
    // Candidates: local maxima of s·Re H/2 on a half-cell lattice at the
    // coarsest of the three radii, where the Poisson peak of an atom is wider
    // than the lattice spacing.
    let m = 2 * grid;
    let coarse: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|k| Ok(s0 * sweep(k as f64 * h / 2.0, r0)? / 2.0))
        .collect::<Result<Vec<_>>>()?;
    let candidates: Vec<usize> = (0..m)
        .filter(|&k| {
            let (l, v, r) = (coarse[(k + m - 1) % m], coarse[k], coarse[(k + 1) % m]);
            v > floor && v >= l && v > r
        })
        .collect();
    let mut atoms: Vec<Atom> = candidates
        .par_iter()
        .map(|&k| -> Result<Option<Atom>> {
            let theta = refine_peak(|t| sweep(t, r2), k as f64 * h / 2.0, h / 2.0)?;
            // Grid-aligned atoms stay exactly on the grid.
            let nearest = (theta / h).round() * h;
            let theta = if (theta - nearest).abs() <= 1e-8 { nearest } else { theta };
            let a0 = s0 * sweep(theta, r0)? / 2.0;
            let a1 = s1 * sweep(theta, r1)? / 2.0;
            let a2 = s2 * sweep(theta, r2)? / 2.0;
            let coarse = extrapolate(s0, a0, s1, a1);
            let fine = extrapolate(s1, a1, s2, a2);
            let stable = (fine - coarse).abs() <= 0.1 * fine.abs();
            Ok((fine > floor && stable).then_some(Atom { angle: theta.rem_euclid(TAU), weight: fine }))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    atoms.sort_by(|a, b| a.angle.total_cmp(&b.angle));
    atoms.dedup_by(|a, b| crate::measure::angle_distance(a.angle, b.angle) <= crate::measure::ATOM_SEPARATION);

    let samples: Vec<f64> = (0..grid)
        .into_par_iter()
        .map(|k| -> Result<f64> {
            let theta = (k as f64 + 0.5) * h;
            let atom_part = |r: f64| -> f64 { atoms.iter().map(|a| a.weight * poisson(r, theta - a.angle)).sum() };
            let q1 = sweep(theta, r1)? - atom_part(r1);
            let q2 = sweep(theta, r2)? - atom_part(r2);
            Ok(extrapolate(s1, q1, s2, q2).max(0.0))
        })
        .collect::<Result<Vec<_>>>()?;

    let density = Density::from_parts(vec![DensityPart::Step(samples)])?;
    CircleMeasure::new(density, atoms)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialSample {
    pub theta: f64,
    pub r: f64,
    pub re_h: f64,
    pub fatou_quotient: f64,
}

/// `Re H_b` and `(1 - |b|²)/|1 - b|²` along rays.
pub fn radial_trace(b: &ContractiveFunction, thetas: &[f64], radii: &[f64]) -> Result<Vec<RadialSample>> {
    let mut out = Vec::with_capacity(thetas.len() * radii.len());
    for &theta in thetas {
        for &r in radii {
            let z = Complex64::from_polar(r, theta);
            check_disk(z)?;
            let bz = b.eval_unchecked(z);
            out.push(RadialSample {
                theta,
                r,
                re_h: b.herglotz_unchecked(z).re,
                fatou_quotient: (1.0 - bz.norm_sqr()) / (1.0 - bz).norm_sqr(),
            });
        }
    }
    Ok(out)
}

pub fn write_radial_csv<W: Write>(mut w: W, rows: &[RadialSample]) -> Result<()> {
    writeln!(w, "theta,r,re_H,fatou_quotient")?;
    for s in rows {
        writeln!(w, "{},{},{},{}", s.theta, s.r, s.re_h, s.fatou_quotient)?;
    }
    Ok(())
}

/// `exp ∫ log(dμ/dm) dm`; zero when the log-integral diverges.
pub fn szego_distance(mu: &CircleMeasure) -> f64 {
    let d = mu.density();
    if d.is_zero() {
        return 0.0;
    }
    let log_integral = match d.parts() {
        [DensityPart::Trig(p)] => match fejer_riesz_factor(p) {
            Ok(g) => {
                let g0 = g.coeffs[0].norm();
                if g0 > 0.0 {
                    2.0 * g0.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Err(_) => log_quadrature(d),
        },
        [DensityPart::Step(v)] => {
            if v.iter().any(|&x| x <= 0.0) {
                f64::NEG_INFINITY
            } else {
                v.iter().map(|x| x.ln()).sum::<f64>() / v.len() as f64
            }
        }
        _ => {
            if matches!(Support::of_density(d), Support::Full) {
                log_quadrature(d)
            } else {
                f64::NEG_INFINITY
            }
        }
    };
    if log_integral < LOG_FLOOR || log_integral.is_nan() {
        0.0
    } else {
        log_integral.exp()
    }
}

fn log_quadrature(d: &Density) -> f64 {
    let m = 1usize << 16;
    let mut acc = 0.0;
    for k in 0..m {
        let v = d.eval(TAU * (k as f64 + 0.5) / m as f64);
        if v <= 0.0 {
            return f64::NEG_INFINITY;
        }
        acc += v.ln();
    }
    acc / m as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extremeness {
    Extreme,
    NonExtreme,
}

pub fn is_extreme(mu: &CircleMeasure) -> Extremeness {
    let mass = mu.total_mass();
    if szego_distance(mu) <= EXTREME_FLOOR * mass {
        Extremeness::Extreme
    } else {
        Extremeness::NonExtreme
    }
}
