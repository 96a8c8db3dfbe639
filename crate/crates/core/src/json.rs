//! JSON representations of the library types.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::decompose::{DecompositionReport, Invariance, Strategy, TraceEntry};
use crate::error::{Error, Result};
use crate::forms::FormDecomposition;
use crate::kernel::{GramIndex, KernelGram};
use crate::kernelpair::FiniteKernel;
use crate::linalg::{c, CMat};
use crate::measure::{Atom, CellMask, CircleMeasure, Density, DensityPart};
use crate::transform::ContractiveFunction;
use crate::trigpoly::{AnalyticPoly, TrigPoly};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexJson {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ComplexJson {
    fn from(z: Complex64) -> Self {
        ComplexJson { re: z.re, im: z.im }
    }
}

impl From<ComplexJson> for Complex64 {
    fn from(z: ComplexJson) -> Self {
        c(z.re, z.im)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoeffJson {
    pub j: i64,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigPolyJson {
    pub coeffs: Vec<CoeffJson>,
    pub real: bool,
}

impl From<&TrigPoly> for TrigPolyJson {
    fn from(p: &TrigPoly) -> Self {
        let n = p.degree() as i64;
        let range: Vec<i64> = if p.is_real() { (0..=n).collect() } else { (-n..=n).collect() };
        TrigPolyJson {
            coeffs: range
                .into_iter()
                .map(|j| {
                    let v = p.coeff(j);
                    CoeffJson { j, re: v.re, im: v.im }
                })
                .collect(),
            real: p.is_real(),
        }
    }
}

impl TryFrom<&TrigPolyJson> for TrigPoly {
    type Error = Error;

    fn try_from(p: &TrigPolyJson) -> Result<Self> {
        let n = p.coeffs.iter().map(|c| c.j.unsigned_abs() as usize).max().unwrap_or(0);
        let mut full = vec![c(0.0, 0.0); 2 * n + 1];
        let mut seen = vec![false; 2 * n + 1];
        for k in &p.coeffs {
            let idx = (k.j + n as i64) as usize;
            if seen[idx] {
                return Err(Error::Invalid(format!("coefficient {} given twice", k.j)));
            }
            seen[idx] = true;
            full[idx] = c(k.re, k.im);
        }
        if !p.real {
            return TrigPoly::laurent(full);
        }
        let mut nonneg: Vec<Complex64> = full[n..].to_vec();
        for j in 1..=n {
            let neg = full[n - j];
            let given = seen[n - j];
            if given && (neg - nonneg[j].conj()).norm() > 1e-12 * (1.0 + neg.norm()) {
                return Err(Error::Invalid(format!("real polynomial needs c_{{-{j}}} = conj(c_{j})")));
            }
            if given && !seen[n + j] {
                nonneg[j] = neg.conj();
            }
        }
        if full[n].im.abs() > 1e-12 * (1.0 + full[n].re.abs()) {
            return Err(Error::Invalid("real polynomial needs a real constant term".into()));
        }
        Ok(TrigPoly::real(nonneg))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PartJson {
    Masked { poly: TrigPolyJson, mask: Vec<bool>, grid: usize },
    Samples { samples: Vec<f64>, grid: usize },
    Poly(TrigPolyJson),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DensityJson {
    Many(Vec<PartJson>),
    One(PartJson),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomJson {
    pub angle: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureJson {
    pub density: Option<DensityJson>,
    #[serde(default)]
    pub atoms: Vec<AtomJson>,
}

fn part_to_json(p: &DensityPart) -> PartJson {
    match p {
        DensityPart::Trig(t) => PartJson::Poly(t.into()),
        DensityPart::Step(v) => PartJson::Samples { samples: v.clone(), grid: v.len() },
        DensityPart::MaskedTrig { poly, mask } => {
            PartJson::Masked { poly: poly.into(), mask: mask.cells().to_vec(), grid: mask.grid() }
        }
    }
}

fn part_from_json(p: &PartJson) -> Result<DensityPart> {
    Ok(match p {
        PartJson::Poly(t) => DensityPart::Trig(t.try_into()?),
        PartJson::Samples { samples, grid } => {
            if samples.len() != *grid {
                return Err(Error::Invalid(format!("{} samples on a grid of {grid}", samples.len())));
            }
            DensityPart::Step(samples.clone())
        }
        PartJson::Masked { poly, mask, grid } => {
            if mask.len() != *grid {
                return Err(Error::Invalid(format!("mask of length {} on a grid of {grid}", mask.len())));
            }
            DensityPart::MaskedTrig { poly: poly.try_into()?, mask: CellMask::new(mask.clone())? }
        }
    })
}

impl From<&CircleMeasure> for MeasureJson {
    fn from(mu: &CircleMeasure) -> Self {
        let parts: Vec<PartJson> = mu.density().parts().iter().map(part_to_json).collect();
        let density = match parts.len() {
            0 => None,
            1 => Some(DensityJson::One(parts.into_iter().next().expect("one part"))),
            _ => Some(DensityJson::Many(parts)),
        };
        MeasureJson {
            density,
            atoms: mu.atoms().iter().map(|a| AtomJson { angle: a.angle, weight: a.weight }).collect(),
        }
    }
}

impl TryFrom<&MeasureJson> for CircleMeasure {
    type Error = Error;

    fn try_from(m: &MeasureJson) -> Result<Self> {
        let parts = match &m.density {
            None => Vec::new(),
            Some(DensityJson::One(p)) => vec![part_from_json(p)?],
            Some(DensityJson::Many(ps)) => ps.iter().map(part_from_json).collect::<Result<_>>()?,
        };
        let atoms = m.atoms.iter().map(|a| Atom { angle: a.angle, weight: a.weight }).collect();
        CircleMeasure::new(Density::from_parts(parts)?, atoms)
    }
}

pub type MatrixJson = Vec<Vec<ComplexJson>>;

pub fn matrix_to_json(m: &CMat) -> MatrixJson {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].into()).collect()).collect()
}

pub fn matrix_from_json(rows: &MatrixJson) -> Result<CMat> {
    let n = rows.len();
    let k = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != k) {
        return Err(Error::DimensionMismatch("ragged matrix rows".into()));
    }
    Ok(CMat::from_fn(n, k, |i, j| rows[i][j].into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelGramJson {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub points: Option<Vec<ComplexJson>>,
    /// Truncation order of a coefficient kernel.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub order: Option<usize>,
    pub entries: MatrixJson,
}

impl From<&KernelGram> for KernelGramJson {
    fn from(g: &KernelGram) -> Self {
        let (points, order) = match &g.index {
            GramIndex::Points(p) => (Some(p.iter().map(|&z| z.into()).collect()), None),
            GramIndex::Coefficients(n) => (None, Some(*n)),
        };
        KernelGramJson { points, order, entries: matrix_to_json(&g.entries) }
    }
}

impl TryFrom<&KernelGramJson> for KernelGram {
    type Error = Error;

    fn try_from(g: &KernelGramJson) -> Result<Self> {
        let entries = matrix_from_json(&g.entries)?;
        let index = match (&g.points, g.order) {
            (Some(p), None) => GramIndex::Points(p.iter().map(|&z| z.into()).collect()),
            (None, Some(n)) => GramIndex::Coefficients(n),
            _ => return Err(Error::Invalid("kernel needs exactly one of points or order".into())),
        };
        let dim = match &index {
            GramIndex::Points(p) => p.len(),
            GramIndex::Coefficients(n) => n + 1,
        };
        if entries.nrows() != dim || entries.ncols() != dim {
            return Err(Error::DimensionMismatch(format!("{dim} indices for a {:?} matrix", entries.shape())));
        }
        Ok(KernelGram { index, entries })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormDecompositionJson {
    #[serde(rename = "A_ac")]
    pub a_ac: MatrixJson,
    #[serde(rename = "A_s")]
    pub a_s: MatrixJson,
    pub iterations: usize,
    pub converged: bool,
}

impl From<&FormDecomposition> for FormDecompositionJson {
    fn from(d: &FormDecomposition) -> Self {
        FormDecompositionJson {
            a_ac: matrix_to_json(&d.a_ac),
            a_s: matrix_to_json(&d.a_s),
            iterations: d.iterations,
            converged: d.converged,
        }
    }
}

impl TryFrom<&FormDecompositionJson> for FormDecomposition {
    type Error = Error;

    fn try_from(d: &FormDecompositionJson) -> Result<Self> {
        Ok(FormDecomposition {
            a_ac: matrix_from_json(&d.a_ac)?,
            a_s: matrix_from_json(&d.a_s)?,
            iterations: d.iterations,
            converged: d.converged,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormPairJson {
    #[serde(rename = "A")]
    pub a: MatrixJson,
    #[serde(rename = "B")]
    pub b: MatrixJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteKernelJson {
    pub n: usize,
    pub entries: MatrixJson,
}

impl From<&FiniteKernel> for FiniteKernelJson {
    fn from(k: &FiniteKernel) -> Self {
        FiniteKernelJson { n: k.n(), entries: matrix_to_json(&k.entries) }
    }
}

impl TryFrom<&FiniteKernelJson> for FiniteKernel {
    type Error = Error;

    fn try_from(k: &FiniteKernelJson) -> Result<Self> {
        let m = matrix_from_json(&k.entries)?;
        if m.nrows() != k.n || m.ncols() != k.n {
            return Err(Error::DimensionMismatch(format!("n = {} but entries are {:?}", k.n, m.shape())));
        }
        FiniteKernel::new(m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContractiveJson {
    Rational { num: Vec<ComplexJson>, den: Vec<ComplexJson> },
    Measure(MeasureJson),
    Gauge { base: Box<ContractiveJson>, t: f64 },
}

impl From<&ContractiveFunction> for ContractiveJson {
    fn from(b: &ContractiveFunction) -> Self {
        match b {
            ContractiveFunction::Rational { num, den } => ContractiveJson::Rational {
                num: num.coeffs.iter().map(|&z| z.into()).collect(),
                den: den.coeffs.iter().map(|&z| z.into()).collect(),
            },
            ContractiveFunction::Cayley(mu) => ContractiveJson::Measure(mu.into()),
            ContractiveFunction::Gauge { base, t } => {
                ContractiveJson::Gauge { base: Box::new(base.as_ref().into()), t: *t }
            }
        }
    }
}

impl TryFrom<&ContractiveJson> for ContractiveFunction {
    type Error = Error;

    fn try_from(b: &ContractiveJson) -> Result<Self> {
        Ok(match b {
            ContractiveJson::Rational { num, den } => ContractiveFunction::rational(
                AnalyticPoly::new(num.iter().map(|&z| z.into()).collect()),
                AnalyticPoly::new(den.iter().map(|&z| z.into()).collect()),
            )?,
            ContractiveJson::Measure(m) => ContractiveFunction::Cayley(m.try_into()?),
            ContractiveJson::Gauge { base, t } => {
                ContractiveFunction::Gauge { base: Box::new(base.as_ref().try_into()?), t: *t }
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceJson {
    #[serde(rename = "N")]
    pub n: usize,
    pub ac_mass: f64,
    pub rn_residual: Option<f64>,
    pub rn_error: Option<String>,
    pub intersection_rank: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReportJson {
    #[serde(rename = "N")]
    pub n: usize,
    pub mu_ac: MeasureJson,
    pub mu_s: MeasureJson,
    pub strategy: Strategy,
    pub invariance: Invariance,
    pub traces: Vec<TraceJson>,
    pub estimated_atoms: Vec<AtomJson>,
    pub lambda_atoms: Vec<AtomJson>,
    pub support_fraction: f64,
    pub fatou_density_error: f64,
}

fn atoms_json(a: &[Atom]) -> Vec<AtomJson> {
    a.iter().map(|a| AtomJson { angle: a.angle, weight: a.weight }).collect()
}

impl From<&DecompositionReport> for DecompositionReportJson {
    fn from(r: &DecompositionReport) -> Self {
        DecompositionReportJson {
            n: r.n,
            mu_ac: (&r.mu_ac).into(),
            mu_s: (&r.mu_s).into(),
            strategy: r.strategy,
            invariance: r.invariance,
            traces: r
                .traces
                .iter()
                .map(|t: &TraceEntry| TraceJson {
                    n: t.n,
                    ac_mass: t.ac_mass,
                    rn_residual: t.rn_residual,
                    rn_error: t.rn_error.clone(),
                    intersection_rank: t.intersection_rank,
                })
                .collect(),
            estimated_atoms: atoms_json(&r.estimated_atoms),
            lambda_atoms: atoms_json(&r.lambda_atoms),
            support_fraction: r.support_fraction,
            fatou_density_error: r.fatou_density_error,
        }
    }
}

pub fn load<T: for<'de> Deserialize<'de>>(path: &std::path::Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_measure(path: &std::path::Path) -> Result<CircleMeasure> {
    (&load::<MeasureJson>(path)?).try_into()
}

pub fn to_string<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)?)
}
