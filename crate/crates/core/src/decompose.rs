//! Lebesgue decomposition of `μ` with respect to `λ` driven by boundary
//! behaviour of Herglotz functions, with reproducing-kernel diagnostics.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forms::rn_extract;
use crate::kernel::{default_grid, DEFAULT_SEED};
use crate::linalg::c;
use crate::measure::{angle_distance, combine, split_atoms, Atom, CellMask, CircleMeasure, Density, ATOM_SEPARATION};
use crate::spaces::{lattice_split, SpacePair};
use crate::transform::{herglotz_unchecked, is_extreme, refine_peak, Extremeness, ATOM_FLOOR};

const TAU: f64 = 2.0 * PI;
/// `λ`-support threshold relative to the largest density sample.
pub const SUPPORT_FLOOR: f64 = 1e-4;
/// Finest radius gap `1 - r` used for boundary limits.
const S_FINE: f64 = 1.0 / (1u64 << 20) as f64;
const TRACE_DEGREE: usize = 8;
const LATTICE_POINTS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Invariance {
    Reducing,
    NotReducing,
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Strategy {
    DirectNonExtreme,
    AddLebesgue,
}

pub fn invariance_classifier(mu: &CircleMeasure, lam: &CircleMeasure) -> Invariance {
    let el = is_extreme(lam);
    if el == Extremeness::NonExtreme {
        return Invariance::Reducing;
    }
    if is_extreme(mu) != Extremeness::Extreme {
        return Invariance::Unknown;
    }
    match is_extreme(&combine(1.0, mu, 1.0, lam)) {
        Extremeness::Extreme => Invariance::Reducing,
        Extremeness::NonExtreme => Invariance::NotReducing,
    }
}

/// Boundary values of `Re H_μ` on an `n`-cell grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FatouEstimate {
    /// Density estimates at the cell midpoints.
    pub density: Vec<f64>,
    /// Atoms located by tracking peaks of `Re H_μ` toward the circle.
    pub atoms: Vec<Atom>,
}

/// Extrapolates `Re H_μ(rζ)` to `r = 1` from `1 - r = 2s` and `s`.
pub fn fatou_estimate(mu: &CircleMeasure, n: usize) -> FatouEstimate {
    let mass = mu.total_mass();
    let (s1, s2) = (2.0 * S_FINE, S_FINE);
    let re_h = |theta: f64, s: f64| herglotz_unchecked(mu, Complex64::from_polar(1.0 - s, theta)).re;
    let h = TAU / n as f64;
    let floor = ATOM_FLOOR * mass;
    // Candidates are local maxima on a half-cell lattice at a radius whose
    // Poisson peaks span a cell; each is then tracked inward to the fine radius.
    let m = 2 * n;
    let s_coarse = h / 2.0;
    let coarse: Vec<f64> = (0..m).into_par_iter().map(|k| s_coarse * re_h(k as f64 * h / 2.0, s_coarse) / 2.0).collect();
    let candidates: Vec<usize> = (0..m)
        .filter(|&k| {
            let (l, v, r) = (coarse[(k + m - 1) % m], coarse[k], coarse[(k + 1) % m]);
            v > floor && v >= l && v > r
        })
        .collect();
    let mut atoms: Vec<Atom> = candidates
        .par_iter()
        .filter_map(|&k| {
            let (mut theta, mut half, mut s) = (k as f64 * h / 2.0, h / 2.0, s_coarse);
            while s > s2 {
                s = (s / 4.0).max(s2);
                theta = refine_peak(|t| Ok(re_h(t, s)), theta, half).ok()?;
                half = 4.0 * s;
            }
            let nearest = (theta / h).round() * h;
            let theta = if (theta - nearest).abs() <= 1e-9 { nearest } else { theta };
            let a1 = s1 * re_h(theta, s1) / 2.0;
            let a2 = s2 * re_h(theta, s2) / 2.0;
            let w = 2.0 * a2 - a1;
            (w > floor).then_some(Atom { angle: theta.rem_euclid(TAU), weight: w })
        })
        .collect();
    atoms.sort_by(|a, b| a.angle.total_cmp(&b.angle));
    atoms.dedup_by(|a, b| angle_distance(a.angle, b.angle) <= ATOM_SEPARATION);
    let poisson = |r: f64, t: f64| (1.0 - r * r) / (1.0 - 2.0 * r * t.cos() + r * r);
    let density = (0..n)
        .into_par_iter()
        .map(|k| {
            let theta = (k as f64 + 0.5) * h;
            let q = |s: f64| {
                let r = 1.0 - s;
                re_h(theta, s) - atoms.iter().map(|a| a.weight * poisson(r, theta - a.angle)).sum::<f64>()
            };
            (2.0 * q(s2) - q(s1)).max(0.0)
        })
        .collect();
    FatouEstimate { density, atoms }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceEntry {
    pub n: usize,
    pub ac_mass: f64,
    pub rn_residual: Option<f64>,
    /// Why the deconvolution failed, if it did.
    pub rn_error: Option<String>,
    pub intersection_rank: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecompositionReport {
    pub n: usize,
    pub mu_ac: CircleMeasure,
    pub mu_s: CircleMeasure,
    pub strategy: Strategy,
    pub invariance: Invariance,
    pub traces: Vec<TraceEntry>,
    /// Atoms of `μ` as seen by the boundary estimator.
    pub estimated_atoms: Vec<Atom>,
    pub lambda_atoms: Vec<Atom>,
    /// Fraction of grid cells on which `λ` has positive density.
    pub support_fraction: f64,
    /// Largest deviation of the estimated density of `μ` from its
    /// representation, away from atoms.
    pub fatou_density_error: f64,
}

struct Split {
    mu_ac: CircleMeasure,
    mu_s: CircleMeasure,
    lambda_atoms: Vec<Atom>,
    support: CellMask,
}

fn support_mask(est: &FatouEstimate, mass: f64) -> CellMask {
    let top = est.density.iter().fold(0.0f64, |a, &v| a.max(v));
    // A density this small against the total mass is extrapolation noise.
    let live = top > 1e-8 * mass;
    let cells = est.density.iter().map(|&v| live && v > SUPPORT_FLOOR * top).collect();
    CellMask::new(cells).expect("power-of-two grid")
}

fn split_at(mu: &CircleMeasure, lam: &CircleMeasure, n: usize, strategy: Strategy) -> Split {
    let est = fatou_estimate(lam, n);
    let support = support_mask(&est, lam.total_mass());
    // Refined atom angles are good to well below this.
    let (ac_atoms, s_atoms) = split_atoms(mu.atoms(), &est.atoms, 1e-8);
    let density = mu.density();
    let ac_density = match strategy {
        Strategy::DirectNonExtreme => density.restrict(&support),
        Strategy::AddLebesgue => {
            // λ + m has full support, so μ_{ac;λ+m} keeps all of μ's density;
            // removing the part of μ_{ac;m} that is singular to λ leaves μ_{ac;λ}.
            let with_lebesgue = density.clone();
            let singular_to_lam = density.restrict(&support.complement());
            subtract_restriction(&with_lebesgue, &singular_to_lam, &support)
        }
    };
    let s_density = density.restrict(&support.complement());
    Split {
        mu_ac: CircleMeasure::new(ac_density, ac_atoms).expect("restriction of a valid measure"),
        mu_s: CircleMeasure::new(s_density, s_atoms).expect("restriction of a valid measure"),
        lambda_atoms: est.atoms,
        support,
    }
}

/// `d - d|_{S^c}` where the subtrahend is known to be the restriction of `d`
/// to the complement of `support`; the difference is `d|_S`.
fn subtract_restriction(d: &Density, removed: &Density, support: &CellMask) -> Density {
    let kept = d.restrict(support);
    debug_assert!({
        let (a, b, whole) = (kept.moments(4), removed.moments(4), d.moments(4));
        (0..5).all(|k| (a[k] + b[k] - whole[k]).norm() <= 1e-9 * (1.0 + whole[0].norm()))
    });
    kept
}

/// Decomposes `μ = μ_ac + μ_s` relative to `λ` on an `n`-cell boundary grid.
pub fn lebesgue_decompose(mu: &CircleMeasure, lam: &CircleMeasure, n: usize) -> Result<DecompositionReport> {
    if n < 64 || !n.is_power_of_two() {
        return Err(Error::Invalid(format!("N = {n} must be a power of two, at least 64")));
    }
    let invariance = invariance_classifier(mu, lam);
    let strategy = match is_extreme(lam) {
        Extremeness::NonExtreme => Strategy::DirectNonExtreme,
        Extremeness::Extreme => Strategy::AddLebesgue,
    };
    let main = split_at(mu, lam, n, strategy);

    let own = fatou_estimate(mu, n);
    let h = TAU / n as f64;
    let fatou_density_error = own
        .density
        .iter()
        .enumerate()
        .filter(|(k, _)| {
            let t = (*k as f64 + 0.5) * h;
            mu.atoms().iter().all(|a| angle_distance(a.angle, t) > 1.5 * h)
        })
        .map(|(k, &g)| (g - mu.density().eval((k as f64 + 0.5) * h)).abs())
        .fold(0.0f64, f64::max);

    let intersection_rank = SpacePair::from_measures(mu, lam, &default_grid(LATTICE_POINTS, DEFAULT_SEED))
        .and_then(|sp| lattice_split(&sp))
        .map(|s| s.intersection_rank)
        .ok();

    let traces = [n / 4, n / 2, n]
        .par_iter()
        .map(|&k| {
            let ac = if k == n { main.mu_ac.clone() } else { split_at(mu, lam, k.max(16), strategy).mu_ac };
            let d = TRACE_DEGREE.min(k / 2);
            let (rn_residual, rn_error) = match rn_extract(&ac, lam, k, d) {
                Ok(fit) => (Some(fit.residual), None),
                Err(e) => (None, Some(e.to_string())),
            };
            TraceEntry { n: k, ac_mass: ac.total_mass(), rn_residual, rn_error, intersection_rank }
        })
        .collect();

    Ok(DecompositionReport {
        n,
        support_fraction: main.support.count() as f64 / n as f64,
        mu_ac: main.mu_ac,
        mu_s: main.mu_s,
        strategy,
        invariance,
        traces,
        estimated_atoms: own.atoms,
        lambda_atoms: main.lambda_atoms,
        fatou_density_error,
    })
}

pub fn write_trace_csv<W: Write>(mut w: W, traces: &[TraceEntry]) -> Result<()> {
    writeln!(w, "N,ac_mass,rn_residual,intersection_rank")?;
    for t in traces {
        let rn = t.rn_residual.map_or_else(|| "nan".to_string(), |v| v.to_string());
        let rank = t.intersection_rank.map_or_else(String::new, |v| v.to_string());
        writeln!(w, "{},{},{},{}", t.n, t.ac_mass, rn, rank)?;
    }
    Ok(())
}

/// `(N, ac_mass, rn_residual)` from decompositions at each `N`.
pub fn ac_mass_trace(mu: &CircleMeasure, lam: &CircleMeasure, ns: &[usize]) -> Result<Vec<(usize, f64, Option<f64>)>> {
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid("N list must increase".into()));
    }
    ns.iter()
        .map(|&n| {
            let rep = lebesgue_decompose(mu, lam, n)?;
            let last = rep.traces.last().expect("three trace entries");
            Ok((n, rep.mu_ac.total_mass(), last.rn_residual))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct HalfCircleReport {
    pub order: usize,
    /// Taylor coefficients of `k₀⁺` from the moments of `m₊`.
    pub moment_coeffs: Vec<Complex64>,
    /// Taylor coefficients of `(1/2πi) log((z+1)/(z-1))`.
    pub log_coeffs: Vec<Complex64>,
    pub max_discrepancy: f64,
    /// Largest deviation of the moments from `(1 - (-1)^j)/(2πij)`.
    pub formula_discrepancy: f64,
    pub k0_plus_at_zero: f64,
    /// Largest coefficient of `k₀⁺ + k₀⁻ - 1` with `k₀⁻` from the moments of `m₋`.
    pub sum_residual: f64,
    /// Largest coefficient of `V₊* k₀⁺ + V₋* k₀⁻`.
    pub antisymmetry_residual: f64,
}

/// `log w` with argument in `[0, 2π)`.
fn log_upper_branch(w: Complex64) -> Complex64 {
    c(w.norm().ln(), w.im.atan2(w.re).rem_euclid(TAU))
}

pub fn halfcircle_example(order: usize) -> Result<HalfCircleReport> {
    if order < 8 {
        return Err(Error::Invalid(format!("order {order} must be at least 8")));
    }
    let grid = 4096usize.max((2 * order).next_power_of_two());
    let plus = CircleMeasure::upper_half(grid);
    let minus = CircleMeasure::lower_half(grid);
    let moment_coeffs = plus.moments(order).vals;

    // Cauchy integral on |z| = ρ of the closed form
    let rho = (-1.0 / order as f64).exp();
    let m = (64 * order + 64).next_power_of_two();
    let mut samples: Vec<Complex64> = (0..m)
        .map(|k| {
            let z = Complex64::from_polar(rho, TAU * k as f64 / m as f64);
            log_upper_branch((z + 1.0) / (z - 1.0)) / c(0.0, TAU)
        })
        .collect();
    rustfft::FftPlanner::new().plan_fft_forward(m).process(&mut samples);
    let log_coeffs: Vec<Complex64> =
        (0..=order).map(|j| samples[j] / (m as f64 * rho.powi(j as i32))).collect();

    let max_discrepancy =
        moment_coeffs.iter().zip(&log_coeffs).map(|(a, b)| (a - b).norm()).fold(0.0f64, f64::max);
    let formula_discrepancy = moment_coeffs
        .iter()
        .enumerate()
        .map(|(j, &v)| {
            let want = if j == 0 {
                c(0.5, 0.0)
            } else {
                let jf = j as f64;
                c(1.0 - (-1f64).powi(j as i32), 0.0) / c(0.0, TAU * jf)
            };
            (v - want).norm()
        })
        .fold(0.0f64, f64::max);

    let k0_plus_at_zero = (log_upper_branch(c(-1.0, 0.0)) / c(0.0, TAU)).re;

    let minus_coeffs = minus.moments(order).vals;
    let sum_residual = (0..=order)
        .map(|j| (moment_coeffs[j] + minus_coeffs[j] - if j == 0 { c(1.0, 0.0) } else { c(0.0, 0.0) }).norm())
        .fold(0.0f64, f64::max);

    // k₀⁻ = k₀^m - k₀⁺ with k₀^m ≡ 1
    let k_minus: Vec<Complex64> = (0..=order)
        .map(|j| if j == 0 { c(1.0, 0.0) - moment_coeffs[0] } else { -moment_coeffs[j] })
        .collect();
    let bp = crate::spaces::backward_shift_coeffs(&moment_coeffs);
    let bm = crate::spaces::backward_shift_coeffs(&k_minus);
    let antisymmetry_residual = bp.iter().zip(&bm).map(|(a, b)| (a + b).norm()).fold(0.0f64, f64::max);

    Ok(HalfCircleReport {
        order,
        moment_coeffs,
        log_coeffs,
        max_discrepancy,
        formula_discrepancy,
        k0_plus_at_zero,
        sum_residual,
        antisymmetry_residual,
    })
}

pub fn write_halfcircle_csv<W: Write>(mut w: W, rep: &HalfCircleReport) -> Result<()> {
    writeln!(w, "j,moment_re,moment_im,log_re,log_im,discrepancy")?;
    for (j, (a, b)) in rep.moment_coeffs.iter().zip(&rep.log_coeffs).enumerate() {
        writeln!(w, "{},{},{},{},{},{}", j, a.re, a.im, b.re, b.im, (a - b).norm())?;
    }
    Ok(())
}
