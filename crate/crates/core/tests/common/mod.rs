//! Seeded generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

use circlekit::linalg::{c, eigh, CMat};
use circlekit::measure::{Atom, CellMask, CircleMeasure, Density, DensityPart};
use circlekit::trigpoly::TrigPoly;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn crand(r: &mut ChaCha8Rng) -> Complex64 {
    c(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))
}

/// Real trig polynomial with `min ≥ margin · c₀`.
pub fn positive_poly(r: &mut ChaCha8Rng, deg: usize, margin: f64) -> TrigPoly {
    let mut cs = vec![c(0.0, 0.0)];
    for _ in 0..deg {
        cs.push(crand(r) * 0.5);
    }
    let spread: f64 = cs[1..].iter().map(|z| z.norm()).sum::<f64>() * 2.0;
    cs[0] = c((spread / (1.0 - margin)).max(r.random_range(0.5..1.5)), 0.0);
    TrigPoly::real(cs)
}

pub fn disk_point(r: &mut ChaCha8Rng, radius: f64) -> Complex64 {
    Complex64::from_polar(radius * r.random::<f64>().sqrt(), TAU * r.random::<f64>())
}

pub fn atoms(r: &mut ChaCha8Rng, k: usize) -> Vec<Atom> {
    (0..k)
        .map(|i| Atom {
            angle: TAU * (i as f64 + r.random_range(0.1..0.9)) / k as f64,
            weight: r.random_range(0.05..1.0),
        })
        .collect()
}

/// Density plus atoms drawn across every representable part kind.
pub fn measure(r: &mut ChaCha8Rng) -> CircleMeasure {
    let mut parts = Vec::new();
    if r.random_bool(0.7) {
        let deg = r.random_range(0..4);
        parts.push(DensityPart::Trig(positive_poly(r, deg, 0.0)));
    }
    if r.random_bool(0.4) {
        let grid = 1usize << r.random_range(4..8);
        let samples = (0..grid).map(|_| if r.random_bool(0.3) { 0.0 } else { r.random_range(0.0..2.0) }).collect();
        parts.push(DensityPart::Step(samples));
    }
    if r.random_bool(0.4) {
        let grid = 1usize << r.random_range(3..7);
        let mut cells: Vec<bool> = (0..grid).map(|_| r.random_bool(0.5)).collect();
        cells[0] = true;
        cells[grid - 1] = false;
        let deg = r.random_range(0..3);
        let poly = positive_poly(r, deg, 0.0);
        parts.push(DensityPart::MaskedTrig { poly, mask: CellMask::new(cells).unwrap() });
    }
    let k = r.random_range(0..4);
    let ats = if parts.is_empty() && k == 0 { atoms(r, 1) } else { atoms(r, k) };
    CircleMeasure::new(Density::from_parts(parts).unwrap(), ats).unwrap()
}

/// Density-only version of [`measure`].
pub fn density_measure(r: &mut ChaCha8Rng) -> CircleMeasure {
    loop {
        let mu = measure(r);
        if mu.atoms().is_empty() {
            return mu;
        }
        let no_atoms = CircleMeasure::new(mu.density().clone(), vec![]).unwrap();
        if !no_atoms.is_zero() {
            return no_atoms;
        }
    }
}

/// `X X*` with `X` of size `n × rank`.
pub fn psd(r: &mut ChaCha8Rng, n: usize, rank: usize) -> CMat {
    let x = CMat::from_fn(n, rank, |_, _| crand(r));
    &x * x.adjoint()
}

pub fn unitary(r: &mut ChaCha8Rng, n: usize) -> CMat {
    let x = CMat::from_fn(n, n, |_, _| crand(r));
    x.qr().q()
}

pub fn min_eig(m: &CMat) -> f64 {
    let h = (m + m.adjoint()).scale(0.5);
    eigh(&h).0[0]
}

/// Short of `a` to the range of `b`: the largest `C ≤ a` supported on `Ran b`.
///
/// Schur complement in an orthonormal basis adapted to `Ran b ⊕ ker b`.
pub fn shorted_to_range(a: &CMat, b: &CMat, cut: f64) -> CMat {
    let n = a.nrows();
    let (vals, vecs) = eigh(b);
    let top = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let range: Vec<usize> = (0..n).filter(|&i| vals[i] > cut * top).collect();
    let kernel: Vec<usize> = (0..n).filter(|&i| vals[i] <= cut * top).collect();
    if kernel.is_empty() {
        return a.clone();
    }
    let q_r = CMat::from_fn(n, range.len(), |i, j| vecs[(i, range[j])]);
    let q_k = CMat::from_fn(n, kernel.len(), |i, j| vecs[(i, kernel[j])]);
    let a_rr = q_r.adjoint() * a * &q_r;
    let a_rk = q_r.adjoint() * a * &q_k;
    let a_kk = q_k.adjoint() * a * &q_k;
    let pinv = a_kk.clone().pseudo_inverse(1e-13 * a_kk.norm().max(1e-300)).unwrap();
    let s = a_rr - &a_rk * pinv * a_rk.adjoint();
    &q_r * s * q_r.adjoint()
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (1..=n)
        .map(|i| {
            let mut x = (PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// `∫_a^b f` by composite Gauss–Legendre on pieces graded geometrically toward `a`.
pub fn graded_integral(f: impl Fn(f64) -> f64, a: f64, b: f64, levels: usize) -> f64 {
    let gl = gauss_legendre(20);
    let mut total = 0.0;
    let mut hi = b;
    for _ in 0..levels {
        let lo = a + (hi - a) * 0.5;
        let (m, h) = ((lo + hi) / 2.0, (hi - lo) / 2.0);
        total += gl.iter().map(|&(x, w)| w * f(m + h * x)).sum::<f64>() * h;
        hi = lo;
    }
    total
}
