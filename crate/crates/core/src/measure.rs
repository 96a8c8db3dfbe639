//! Finite positive measures on the circle: a density with respect to
//! normalized Lebesgue measure `m` plus finitely many atoms.
//!
//! Densities are sums of parts, each of which integrates exactly:
//! trigonometric polynomials, step functions constant on the cells
//! `[2πk/M, 2π(k+1)/M)` of a power-of-two grid, and trigonometric
//! polynomials restricted to a union of such cells.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linalg::{c, CMat};
use crate::trigpoly::TrigPoly;

pub const DEFAULT_GRID: usize = 4096;
/// Atoms closer than this are the same atom.
pub const ATOM_SEPARATION: f64 = 1e-9;
/// Relative threshold below which a reference density counts as zero.
pub const EPS_SUPP: f64 = 1e-9;

const TAU: f64 = 2.0 * PI;

/// Boolean mask over the cells of a uniform power-of-two grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellMask {
    cells: Vec<bool>,
}

impl CellMask {
    pub fn new(cells: Vec<bool>) -> Result<Self> {
        if cells.is_empty() || !cells.len().is_power_of_two() {
            return Err(Error::Invalid(format!("mask grid {} is not a power of two", cells.len())));
        }
        Ok(CellMask { cells })
    }

    pub fn full(grid: usize) -> Self {
        CellMask { cells: vec![true; grid] }
    }

    pub fn grid(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn is_full(&self) -> bool {
        self.cells.iter().all(|&b| b)
    }

    pub fn is_empty(&self) -> bool {
        !self.cells.iter().any(|&b| b)
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&b| b).count()
    }

    /// Same set on a finer grid.
    pub fn refine(&self, grid: usize) -> CellMask {
        assert!(grid >= self.grid() && grid % self.grid() == 0);
        let f = grid / self.grid();
        CellMask { cells: (0..grid).map(|k| self.cells[k / f]).collect() }
    }

    pub fn and(&self, other: &CellMask) -> CellMask {
        let g = self.grid().max(other.grid());
        let (a, b) = (self.refine(g), other.refine(g));
        CellMask { cells: a.cells.iter().zip(&b.cells).map(|(&x, &y)| x && y).collect() }
    }

    pub fn or(&self, other: &CellMask) -> CellMask {
        let g = self.grid().max(other.grid());
        let (a, b) = (self.refine(g), other.refine(g));
        CellMask { cells: a.cells.iter().zip(&b.cells).map(|(&x, &y)| x || y).collect() }
    }

    pub fn complement(&self) -> CellMask {
        CellMask { cells: self.cells.iter().map(|&b| !b).collect() }
    }

    /// Maximal runs of selected cells as angle intervals `[α, β]`.
    pub fn arcs(&self) -> Vec<(f64, f64)> {
        let m = self.grid();
        let h = TAU / m as f64;
        let mut out = Vec::new();
        let mut k = 0;
        while k < m {
            if self.cells[k] {
                let start = k;
                while k < m && self.cells[k] {
                    k += 1;
                }
                out.push((start as f64 * h, k as f64 * h));
            } else {
                k += 1;
            }
        }
        out
    }

    pub fn contains_angle(&self, theta: f64) -> bool {
        self.cells[cell_index(theta, self.grid())]
    }
}

fn cell_index(theta: f64, grid: usize) -> usize {
    let t = theta.rem_euclid(TAU);
    ((t / TAU * grid as f64).floor() as usize).min(grid - 1)
}

/// Circular distance between two angles.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

#[derive(Clone, Debug, PartialEq)]
pub enum DensityPart {
    Trig(TrigPoly),
    /// Value per grid cell; the grid size is the vector length.
    Step(Vec<f64>),
    MaskedTrig { poly: TrigPoly, mask: CellMask },
}

impl DensityPart {
    fn scale(&self, a: f64) -> DensityPart {
        match self {
            DensityPart::Trig(p) => DensityPart::Trig(p.scale(a)),
            DensityPart::Step(v) => DensityPart::Step(v.iter().map(|x| x * a).collect()),
            DensityPart::MaskedTrig { poly, mask } => {
                DensityPart::MaskedTrig { poly: poly.scale(a), mask: mask.clone() }
            }
        }
    }

    fn is_zero(&self) -> bool {
        match self {
            DensityPart::Trig(p) => p.abs_sum() == 0.0,
            DensityPart::Step(v) => v.iter().all(|&x| x == 0.0),
            DensityPart::MaskedTrig { poly, mask } => poly.abs_sum() == 0.0 || mask.is_empty(),
        }
    }

    pub fn eval(&self, theta: f64) -> f64 {
        match self {
            DensityPart::Trig(p) => p.eval(theta).re,
            DensityPart::Step(v) => v[cell_index(theta, v.len())],
            DensityPart::MaskedTrig { poly, mask } => {
                if mask.contains_angle(theta) {
                    poly.eval(theta).re
                } else {
                    0.0
                }
            }
        }
    }

    /// `∫ ζ̄ⁿ f dm` for `0 <= n <= order`.
    fn moments(&self, order: usize) -> Vec<Complex64> {
        match self {
            DensityPart::Trig(p) => (0..=order as i64).map(|n| p.coeff(n)).collect(),
            DensityPart::Step(v) => step_moments(v, order),
            DensityPart::MaskedTrig { poly, mask } => {
                let arcs = mask.arcs();
                (0..=order as i64).map(|n| masked_moment(poly, &arcs, n)).collect()
            }
        }
    }

    fn herglotz(&self, z: Complex64) -> Complex64 {
        match self {
            DensityPart::Trig(p) => {
                let mut acc = c(0.0, 0.0);
                for n in (1..=p.degree() as i64).rev() {
                    acc = (acc + p.coeff(n)) * z;
                }
                p.coeff(0) + acc * 2.0
            }
            DensityPart::Step(v) => {
                if z.norm() < 0.5 {
                    self.herglotz_series(z)
                } else {
                    step_herglotz(v, z)
                }
            }
            DensityPart::MaskedTrig { poly, mask } => {
                if z.norm() < 0.5 {
                    self.herglotz_series(z)
                } else {
                    mask.arcs().iter().map(|&(a, b)| masked_herglotz_arc(poly, a, b, z)).sum()
                }
            }
        }
    }

    fn herglotz_series(&self, z: Complex64) -> Complex64 {
        let r = z.norm();
        let terms = if r == 0.0 { 0 } else { ((-40.0) / r.ln()).ceil() as usize + 1 };
        let mom = self.moments(terms);
        let mut acc = c(0.0, 0.0);
        for n in (1..=terms).rev() {
            acc = (acc + mom[n]) * z;
        }
        mom[0] + acc * 2.0
    }

    /// `∫ f(ζ) / ((1 - z ζ̄)(1 - w̄ ζ)) dm(ζ)` evaluated directly on the circle.
    fn kernel_integral(&self, z: Complex64, w: Complex64) -> Complex64 {
        match self {
            DensityPart::Trig(p) => {
                let rho = z.norm().max(w.norm());
                let extra = if rho == 0.0 { 0.0 } else { (-40.0 / rho.ln()).ceil() };
                let want = 2 * (p.degree() + 1) + extra.min(1e7) as usize;
                let m = want.next_power_of_two().clamp(64, 1 << 20);
                let h = TAU / m as f64;
                let wc = w.conj();
                (0..m)
                    .map(|k| {
                        let u = Complex64::from_polar(1.0, k as f64 * h);
                        p.eval(k as f64 * h).re / ((1.0 - z * u.conj()) * (1.0 - wc * u))
                    })
                    .sum::<Complex64>()
                    / m as f64
            }
            DensityPart::Step(v) => {
                let m = v.len();
                let h = TAU / m as f64;
                let wc = w.conj();
                let pref = 1.0 / (c(0.0, TAU) * (1.0 - z * wc));
                let mut prev_a = c(1.0, 0.0) - z;
                let mut prev_b = c(1.0, 0.0) - wc;
                let mut acc = c(0.0, 0.0);
                for (k, &val) in v.iter().enumerate() {
                    let u = Complex64::from_polar(1.0, (k + 1) as f64 * h);
                    let next_a = u - z;
                    let next_b = 1.0 - wc * u;
                    if val != 0.0 {
                        acc += (arc_log_ratio(next_a / prev_a) - (next_b / prev_b).ln()) * val;
                    }
                    prev_a = next_a;
                    prev_b = next_b;
                }
                acc * pref
            }
            DensityPart::MaskedTrig { poly, mask } => {
                let cell = TAU / mask.grid() as f64;
                let gap = 1.0 - z.norm().max(w.norm());
                let sub = (cell / (0.5 * gap)).ceil().max(1.0) as usize;
                let h = cell / sub as f64;
                let wc = w.conj();
                let mut acc = c(0.0, 0.0);
                for (k, &on) in mask.cells().iter().enumerate() {
                    if !on {
                        continue;
                    }
                    for piece in 0..sub {
                        let a = k as f64 * cell + piece as f64 * h;
                        for (x, wt) in GAUSS_LEGENDRE_8 {
                            let t = a + 0.5 * h * (1.0 + x);
                            let u = Complex64::from_polar(1.0, t);
                            acc += poly.eval(t).re / ((1.0 - z * u.conj()) * (1.0 - wc * u)) * (0.5 * h * wt);
                        }
                    }
                }
                acc / TAU
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            DensityPart::Trig(p) => {
                if !p.is_real() {
                    return Err(Error::Invalid("density polynomial must be real-flagged".into()));
                }
                let min = p.min_on_grid(DEFAULT_GRID);
                if min < -1e-10 * p.abs_sum() {
                    return Err(Error::NotNonnegative { min });
                }
            }
            DensityPart::Step(v) => {
                if v.is_empty() || !v.len().is_power_of_two() {
                    return Err(Error::Invalid(format!("sample grid {} is not a power of two", v.len())));
                }
                if let Some(&bad) = v.iter().find(|&&x| !(x >= 0.0) || !x.is_finite()) {
                    return Err(Error::NotNonnegative { min: bad });
                }
            }
            DensityPart::MaskedTrig { poly, mask } => {
                if !poly.is_real() {
                    return Err(Error::Invalid("density polynomial must be real-flagged".into()));
                }
                let g = mask.grid().max(DEFAULT_GRID);
                let fine = mask.refine(g);
                let min = (0..g)
                    .filter(|&k| fine.cells()[k])
                    .map(|k| poly.eval(TAU * (k as f64 + 0.5) / g as f64).re)
                    .fold(f64::INFINITY, f64::min);
                if min < -1e-10 * poly.abs_sum() {
                    return Err(Error::NotNonnegative { min });
                }
            }
        }
        Ok(())
    }

    /// Restriction to a union of cells.
    fn restrict(&self, mask: &CellMask) -> Option<DensityPart> {
        if mask.is_empty() {
            return None;
        }
        let part = match self {
            DensityPart::Trig(p) => {
                if mask.is_full() {
                    DensityPart::Trig(p.clone())
                } else {
                    DensityPart::MaskedTrig { poly: p.clone(), mask: mask.clone() }
                }
            }
            DensityPart::Step(v) => {
                let g = v.len().max(mask.grid());
                let vals = refine_step(v, g);
                let m = mask.refine(g);
                DensityPart::Step(vals.iter().zip(m.cells()).map(|(&x, &on)| if on { x } else { 0.0 }).collect())
            }
            DensityPart::MaskedTrig { poly, mask: own } => {
                DensityPart::MaskedTrig { poly: poly.clone(), mask: own.and(mask) }
            }
        };
        if part.is_zero() {
            None
        } else {
            Some(part)
        }
    }
}

const GAUSS_LEGENDRE_8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];

fn refine_step(v: &[f64], grid: usize) -> Vec<f64> {
    let f = grid / v.len();
    (0..grid).map(|k| v[k / f]).collect()
}

fn step_moments(v: &[f64], order: usize) -> Vec<Complex64> {
    let m = v.len();
    let h = TAU / m as f64;
    let mut buf: Vec<Complex64> = v.iter().map(|&x| c(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    (0..=order)
        .map(|n| {
            let dft = buf[n % m] / m as f64;
            if n == 0 {
                dft
            } else {
                let x = n as f64 * h;
                // (1 - e^{-ix}) / (ix)
                let factor = (c(1.0, 0.0) - Complex64::from_polar(1.0, -x)) / c(0.0, x);
                dft * factor
            }
        })
        .collect()
}

fn arc_exp_integral(k: i64, a: f64, b: f64) -> Complex64 {
    // ∫_a^b e^{ikθ} dθ / 2π
    if k == 0 {
        c((b - a) / TAU, 0.0)
    } else {
        let kf = k as f64;
        (Complex64::from_polar(1.0, kf * b) - Complex64::from_polar(1.0, kf * a)) / c(0.0, TAU * kf)
    }
}

fn masked_moment(p: &TrigPoly, arcs: &[(f64, f64)], n: i64) -> Complex64 {
    let d = p.degree() as i64;
    arcs.iter()
        .map(|&(a, b)| (-d..=d).map(|j| p.coeff(j) * arc_exp_integral(j - n, a, b)).sum::<Complex64>())
        .sum()
}

/// `log((u_b - z)/(u_a - z))` along the positively oriented arc, for `|z| < 1`.
/// The argument of `u - z` increases monotonically, so the branch is fixed
/// by taking the imaginary part in `(0, 2π)`.
fn arc_log(ua: Complex64, ub: Complex64, z: Complex64) -> Complex64 {
    arc_log_ratio((ub - z) / (ua - z))
}

fn arc_log_ratio(ratio: Complex64) -> Complex64 {
    let l = ratio.ln();
    if l.im <= 0.0 {
        l + c(0.0, TAU)
    } else {
        l
    }
}

fn step_herglotz(v: &[f64], z: Complex64) -> Complex64 {
    // Per cell: (1/2πi) ∫ (u+z)/((u-z)u) du = -h/2π + log((b-z)/(a-z)) / (πi)
    let m = v.len();
    let h = TAU / m as f64;
    let mut prev = c(1.0, 0.0) - z;
    let mut logs = c(0.0, 0.0);
    let mut mass = 0.0;
    for (k, &val) in v.iter().enumerate() {
        let next = Complex64::from_polar(1.0, (k + 1) as f64 * h) - z;
        if val != 0.0 {
            logs += arc_log_ratio(next / prev) * val;
            mass += val;
        }
        prev = next;
    }
    c(-mass / m as f64, 0.0) + logs / c(0.0, PI)
}

/// `(1/2π) ∫_a^b p(θ) (e^{iθ}+z)/(e^{iθ}-z) dθ` for `|z| >= 1/2`.
fn masked_herglotz_arc(p: &TrigPoly, a: f64, b: f64, z: Complex64) -> Complex64 {
    let d = p.degree() as i64;
    let ua = Complex64::from_polar(1.0, a);
    let ub = Complex64::from_polar(1.0, b);
    // ∫_a^b u^m du along the arc
    let power_integral = |m: i64| -> Complex64 {
        if m == -1 {
            c(0.0, b - a)
        } else {
            let e = (m + 1) as i32;
            (ub.powi(e) - ua.powi(e)) / (m + 1) as f64
        }
    };
    // J_k = ∫ u^k / (u - z) du for k in -d-1..=d
    let lo = -d - 1;
    let mut j = vec![c(0.0, 0.0); (2 * d + 2) as usize];
    let idx = |k: i64| (k - lo) as usize;
    j[idx(0)] = arc_log(ua, ub, z);
    for k in 1..=d {
        j[idx(k)] = power_integral(k - 1) + z * j[idx(k - 1)];
    }
    for k in (lo..0).rev() {
        j[idx(k)] = (j[idx(k + 1)] - power_integral(k)) / z;
    }
    let mut acc = c(0.0, 0.0);
    for jj in -d..=d {
        acc += p.coeff(jj) * (j[idx(jj)] + z * j[idx(jj - 1)]);
    }
    acc / c(0.0, TAU)
}

/// Sum of density parts.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Density {
    parts: Vec<DensityPart>,
}

impl Density {
    pub fn zero() -> Self {
        Density { parts: Vec::new() }
    }

    pub fn from_parts(parts: Vec<DensityPart>) -> Result<Self> {
        for p in &parts {
            p.validate()?;
        }
        Ok(Density { parts }.normalized())
    }

    pub fn parts(&self) -> &[DensityPart] {
        &self.parts
    }

    pub fn is_zero(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.parts.iter().map(|p| p.eval(theta)).sum()
    }

    pub fn mass(&self) -> f64 {
        self.moments(0)[0].re
    }

    pub fn moments(&self, order: usize) -> Vec<Complex64> {
        let mut out = vec![c(0.0, 0.0); order + 1];
        for p in &self.parts {
            for (o, v) in out.iter_mut().zip(p.moments(order)) {
                *o += v;
            }
        }
        out
    }

    pub fn herglotz(&self, z: Complex64) -> Complex64 {
        self.parts.iter().map(|p| p.herglotz(z)).sum()
    }

    pub fn kernel_integral(&self, z: Complex64, w: Complex64) -> Complex64 {
        self.parts.iter().map(|p| p.kernel_integral(z, w)).sum()
    }

    pub fn scale(&self, a: f64) -> Density {
        if a == 0.0 {
            return Density::zero();
        }
        Density { parts: self.parts.iter().map(|p| p.scale(a)).collect() }
    }

    pub fn add(&self, other: &Density) -> Density {
        let mut parts = self.parts.clone();
        parts.extend(other.parts.iter().cloned());
        Density { parts }.normalized()
    }

    pub fn restrict(&self, mask: &CellMask) -> Density {
        Density { parts: self.parts.iter().filter_map(|p| p.restrict(mask)).collect() }.normalized()
    }

    /// Single trigonometric polynomial, if that is all the density is.
    pub fn as_trig(&self) -> Option<&TrigPoly> {
        match self.parts.as_slice() {
            [DensityPart::Trig(p)] => Some(p),
            _ => None,
        }
    }

    /// Merge parts of like kind; drop zero parts.
    fn normalized(self) -> Density {
        let mut trig: Option<TrigPoly> = None;
        let mut step: Option<Vec<f64>> = None;
        let mut masked: Vec<(TrigPoly, CellMask)> = Vec::new();
        for part in self.parts {
            if part.is_zero() {
                continue;
            }
            match part {
                DensityPart::Trig(p) => trig = Some(trig.map_or(p.clone(), |t| t.add(&p))),
                DensityPart::Step(v) => {
                    step = Some(match step {
                        None => v,
                        Some(s) => {
                            let g = s.len().max(v.len());
                            let (a, b) = (refine_step(&s, g), refine_step(&v, g));
                            a.iter().zip(&b).map(|(x, y)| x + y).collect()
                        }
                    })
                }
                DensityPart::MaskedTrig { poly, mask } => {
                    if mask.is_full() {
                        trig = Some(trig.map_or(poly.clone(), |t| t.add(&poly)));
                    } else if let Some(slot) = masked.iter_mut().find(|(_, m)| *m == mask) {
                        slot.0 = slot.0.add(&poly);
                    } else {
                        masked.push((poly, mask));
                    }
                }
            }
        }
        // A constant step function is a constant polynomial.
        if let Some(v) = &step {
            if v.iter().all(|&x| x == v[0]) {
                let t = TrigPoly::constant(v[0]);
                trig = Some(trig.map_or(t.clone(), |s| s.add(&t)));
                step = None;
            }
        }
        let mut parts = Vec::new();
        if let Some(t) = trig {
            if t.abs_sum() != 0.0 {
                parts.push(DensityPart::Trig(t));
            }
        }
        if let Some(s) = step {
            parts.push(DensityPart::Step(s));
        }
        for (poly, mask) in masked {
            parts.push(DensityPart::MaskedTrig { poly, mask });
        }
        Density { parts }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom {
    pub angle: f64,
    pub weight: f64,
}

/// Finite positive measure `f·m + Σ w_k δ_{θ_k}` on the circle.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct CircleMeasure {
    density: Density,
    atoms: Vec<Atom>,
}

impl CircleMeasure {
    pub fn new(density: Density, atoms: Vec<Atom>) -> Result<Self> {
        for p in density.parts() {
            p.validate()?;
        }
        let mut norm: Vec<Atom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            if !(a.weight > 0.0) || !a.weight.is_finite() || !a.angle.is_finite() {
                return Err(Error::Invalid(format!("atom weight {} must be positive", a.weight)));
            }
            let angle = a.angle.rem_euclid(TAU);
            if norm.iter().any(|b| angle_distance(b.angle, angle) <= ATOM_SEPARATION) {
                return Err(Error::Invalid(format!("duplicate atom at angle {angle}")));
            }
            norm.push(Atom { angle, weight: a.weight });
        }
        Ok(CircleMeasure { density, atoms: norm })
    }

    pub fn zero() -> Self {
        CircleMeasure::default()
    }

    /// Normalized Lebesgue measure `m`.
    pub fn lebesgue() -> Self {
        Self::from_poly(TrigPoly::constant(1.0)).expect("constant density is valid")
    }

    pub fn from_poly(p: TrigPoly) -> Result<Self> {
        Self::new(Density::from_parts(vec![DensityPart::Trig(p)])?, Vec::new())
    }

    pub fn from_samples(samples: Vec<f64>) -> Result<Self> {
        Self::new(Density::from_parts(vec![DensityPart::Step(samples)])?, Vec::new())
    }

    /// `m` restricted to the upper half circle `[0, π)`.
    pub fn upper_half(grid: usize) -> Self {
        Self::from_samples((0..grid).map(|k| if k < grid / 2 { 1.0 } else { 0.0 }).collect())
            .expect("indicator is valid")
    }

    /// `m` restricted to the lower half circle `[π, 2π)`.
    pub fn lower_half(grid: usize) -> Self {
        Self::from_samples((0..grid).map(|k| if k >= grid / 2 { 1.0 } else { 0.0 }).collect())
            .expect("indicator is valid")
    }

    pub fn point_mass(angle: f64, weight: f64) -> Result<Self> {
        Self::new(Density::zero(), vec![Atom { angle, weight }])
    }

    pub fn density(&self) -> &Density {
        &self.density
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn is_zero(&self) -> bool {
        self.density.is_zero() && self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.density.mass() + self.atoms.iter().map(|a| a.weight).sum::<f64>()
    }

    pub fn moments(&self, order: usize) -> MomentSequence {
        let mut vals = self.density.moments(order);
        for a in &self.atoms {
            for (n, v) in vals.iter_mut().enumerate() {
                *v += Complex64::from_polar(a.weight, -(n as f64) * a.angle);
            }
        }
        vals[0].im = 0.0;
        MomentSequence { vals }
    }

    pub fn scaled(&self, a: f64) -> CircleMeasure {
        if a == 0.0 {
            return CircleMeasure::zero();
        }
        CircleMeasure {
            density: self.density.scale(a),
            atoms: self.atoms.iter().map(|x| Atom { angle: x.angle, weight: x.weight * a }).collect(),
        }
    }
}

/// `a·μ + b·ν`, merging coincident atoms.
pub fn combine(a: f64, mu: &CircleMeasure, b: f64, nu: &CircleMeasure) -> CircleMeasure {
    let (sa, sb) = (mu.scaled(a), nu.scaled(b));
    let density = sa.density.add(&sb.density);
    let mut atoms = sa.atoms.clone();
    for x in sb.atoms {
        match atoms.iter_mut().find(|y| angle_distance(y.angle, x.angle) <= ATOM_SEPARATION) {
            Some(y) => y.weight += x.weight,
            None => atoms.push(x),
        }
    }
    atoms.sort_by(|p, q| p.angle.total_cmp(&q.angle));
    CircleMeasure { density, atoms }
}

/// Fourier moments `μ̂(n) = ∫ ζ̄ⁿ dμ` for `0 <= n <= N`; negative indices are
/// conjugates.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentSequence {
    pub vals: Vec<Complex64>,
}

impl MomentSequence {
    pub fn order(&self) -> usize {
        self.vals.len() - 1
    }

    pub fn get(&self, n: i64) -> Complex64 {
        if n >= 0 {
            self.vals[n as usize]
        } else {
            self.vals[(-n) as usize].conj()
        }
    }

    /// `[μ̂(j - i)]_{i,j=0..N}`.
    pub fn toeplitz(&self) -> CMat {
        let n = self.vals.len();
        CMat::from_fn(n, n, |i, j| self.get(j as i64 - i as i64))
    }
}

/// Where a reference measure's density is positive.
#[derive(Clone, Debug, PartialEq)]
pub enum Support {
    Full,
    Cells(CellMask),
    Empty,
}

impl Support {
    pub fn of_density(d: &Density) -> Support {
        let mut cells: Option<CellMask> = None;
        for part in d.parts() {
            let m = match part {
                DensityPart::Trig(p) => {
                    if p.abs_sum() > 0.0 {
                        return Support::Full;
                    }
                    continue;
                }
                DensityPart::Step(v) => {
                    let top = v.iter().fold(0.0f64, |a, &x| a.max(x));
                    CellMask { cells: v.iter().map(|&x| x > EPS_SUPP * top && x > 0.0).collect() }
                }
                DensityPart::MaskedTrig { mask, .. } => mask.clone(),
            };
            cells = Some(match cells {
                None => m,
                Some(prev) => prev.or(&m),
            });
        }
        match cells {
            None => Support::Empty,
            Some(m) if m.is_full() => Support::Full,
            Some(m) if m.is_empty() => Support::Empty,
            Some(m) => Support::Cells(m),
        }
    }

    pub fn restrict(&self, d: &Density) -> Density {
        match self {
            Support::Full => d.clone(),
            Support::Empty => Density::zero(),
            Support::Cells(m) => d.restrict(m),
        }
    }

    pub fn restrict_complement(&self, d: &Density) -> Density {
        match self {
            Support::Full => Density::zero(),
            Support::Empty => d.clone(),
            Support::Cells(m) => d.restrict(&m.complement()),
        }
    }
}

/// Split `mu`'s atoms into those within `tol` of an atom of `reference` and
/// the rest.
pub(crate) fn split_atoms(mu: &[Atom], reference: &[Atom], tol: f64) -> (Vec<Atom>, Vec<Atom>) {
    mu.iter()
        .partition(|a| reference.iter().any(|b| angle_distance(a.angle, b.angle) <= tol))
}

/// Textbook Lebesgue decomposition on the density-plus-atoms representation.
pub fn classical_decompose_oracle(mu: &CircleMeasure, lam: &CircleMeasure) -> (CircleMeasure, CircleMeasure) {
    let support = Support::of_density(&lam.density);
    let (ac_atoms, s_atoms) = split_atoms(&mu.atoms, &lam.atoms, ATOM_SEPARATION);
    let ac = CircleMeasure { density: support.restrict(&mu.density), atoms: ac_atoms };
    let s = CircleMeasure { density: support.restrict_complement(&mu.density), atoms: s_atoms };
    (ac, s)
}

/// Radon–Nikodym derivative returned by [`rn_derivative_oracle`].
#[derive(Clone, Debug, PartialEq)]
pub enum RnDensity {
    Trig(TrigPoly),
    /// Cell values on a uniform grid.
    Sampled(Vec<f64>),
}

impl RnDensity {
    pub fn eval(&self, theta: f64) -> f64 {
        match self {
            RnDensity::Trig(p) => p.eval(theta).re,
            RnDensity::Sampled(v) => v[cell_index(theta, v.len())],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RnDerivative {
    pub density: RnDensity,
    /// `(angle, μ({θ}) / λ({θ}))` at the common atoms.
    pub atom_ratios: Vec<(f64, f64)>,
}

/// `dμ/dλ` for `μ ≪ λ`, computed from the representation.
pub fn rn_derivative_oracle(mu: &CircleMeasure, lam: &CircleMeasure) -> Result<RnDerivative> {
    let (_, s) = classical_decompose_oracle(mu, lam);
    let singular_mass = s.total_mass();
    if singular_mass > 1e-12 * mu.total_mass().max(1e-300) {
        return Err(Error::NotAbsolutelyContinuous { singular_mass });
    }
    let atom_ratios = mu
        .atoms
        .iter()
        .map(|a| {
            let b = lam
                .atoms
                .iter()
                .find(|b| angle_distance(a.angle, b.angle) <= ATOM_SEPARATION)
                .expect("absolutely continuous atoms sit on reference atoms");
            (a.angle, a.weight / b.weight)
        })
        .collect();

    // Constant reference density and polynomial numerator: exact quotient.
    if let (Some(lp), true) = (lam.density.as_trig(), mu.density.is_zero() || mu.density.as_trig().is_some()) {
        if lp.degree() == 0 && lp.coeff(0).re > 0.0 {
            let num = mu.density.as_trig().cloned().unwrap_or_else(|| TrigPoly::constant(0.0));
            return Ok(RnDerivative { density: RnDensity::Trig(num.scale(1.0 / lp.coeff(0).re)), atom_ratios });
        }
    }

    let grid = sampling_grid(&[&mu.density, &lam.density]);
    let top = (0..grid)
        .map(|k| lam.density.eval(TAU * (k as f64 + 0.5) / grid as f64))
        .fold(0.0f64, f64::max);
    let samples = (0..grid)
        .map(|k| {
            let t = TAU * (k as f64 + 0.5) / grid as f64;
            let l = lam.density.eval(t);
            if l > EPS_SUPP * top && l > 0.0 {
                mu.density.eval(t) / l
            } else {
                0.0
            }
        })
        .collect();
    Ok(RnDerivative { density: RnDensity::Sampled(samples), atom_ratios })
}

/// Finest grid used by any step or masked part, at least [`DEFAULT_GRID`].
pub(crate) fn sampling_grid(ds: &[&Density]) -> usize {
    let mut g = DEFAULT_GRID;
    for d in ds {
        for p in d.parts() {
            match p {
                DensityPart::Step(v) => g = g.max(v.len()),
                DensityPart::MaskedTrig { mask, .. } => g = g.max(mask.grid()),
                DensityPart::Trig(_) => {}
            }
        }
    }
    g
}
