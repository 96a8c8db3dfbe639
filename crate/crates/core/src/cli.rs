//! Batch command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use crate::decompose::{halfcircle_example, lebesgue_decompose, write_halfcircle_csv, write_trace_csv};
use crate::error::{Error, Result};
use crate::forms::{simon_decompose, FormPair};
use crate::json::{
    self, matrix_from_json, ComplexJson, ContractiveJson, DecompositionReportJson,
    FiniteKernelJson, FormDecompositionJson, FormPairJson, KernelGramJson, MeasureJson, TrigPolyJson,
};
use crate::kernel::{coeff_kernel, default_grid, dominates_rk, gram, Domination, DEFAULT_GRID_POINTS, DEFAULT_SEED};
use crate::kernelpair::{kernel_lebesgue, orthogonal_split_check, FiniteKernel};
use crate::linalg::c;
use crate::measure::{CircleMeasure, DEFAULT_GRID};
use crate::transform::{
    clark_measure, default_radii, herglotz, is_extreme, radial_trace, szego_distance, write_radial_csv,
    ContractiveFunction, Extremeness,
};
use crate::trigpoly::{fejer_riesz_factor, TrigPoly};

pub const SEED_VAR: &str = "CIRCLEKIT_SEED";

#[derive(Parser, Debug)]
#[command(name = "circlekit", version, about = "Cauchy-transform spaces of measures on the unit circle")]
pub struct Cli {
    /// Worker threads for data-parallel steps (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
pub struct Output {
    /// Output file; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Trigonometric moments μ̂(0..=N).
    Moments {
        #[arg(long)]
        mu: PathBuf,
        #[arg(short = 'N')]
        n: usize,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[command(flatten)]
        out: Output,
    },
    /// Herglotz transform at points given as `re,im`.
    Herglotz {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long = "z", required = true, allow_hyphen_values = true, value_parser = parse_complex)]
        z: Vec<Complex64>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[command(flatten)]
        out: Output,
    },
    /// Clark measure of a contractive function.
    Clark {
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: usize,
        /// Also write a radial-limit CSV trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Number of equally spaced rays in the trace.
        #[arg(long, default_value_t = 8)]
        rays: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Szegő distance and extremeness.
    Szego {
        #[arg(long)]
        mu: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Tests k^μ ≤ t² k^λ on a seeded grid; exits 3 when violated.
    Dominate {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        lambda: PathBuf,
        #[arg(short = 't')]
        t: f64,
        #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
        points: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Gram matrix on a seeded grid, or the coefficient kernel with -N.
    Kernel {
        #[arg(long)]
        mu: PathBuf,
        #[arg(short = 'N', conflicts_with = "points")]
        n: Option<usize>,
        #[arg(long)]
        points: Option<usize>,
        #[command(flatten)]
        out: Output,
    },
    /// Lebesgue decomposition of μ with respect to λ.
    Decompose {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        lambda: PathBuf,
        #[arg(short = 'N')]
        n: usize,
        /// Also write the truncation trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
    },
    /// Form decomposition of A relative to B.
    Forms {
        /// JSON file {"A": matrix, "B": matrix}.
        #[arg(long, conflicts_with_all = ["mu", "lambda"])]
        pair: Option<PathBuf>,
        #[arg(long, requires = "lambda")]
        mu: Option<PathBuf>,
        #[arg(long, requires = "mu")]
        lambda: Option<PathBuf>,
        #[arg(short = 'N', default_value_t = 16)]
        n: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Splits a finite kernel relative to a second one.
    Kernelpair {
        #[arg(long)]
        k: PathBuf,
        #[arg(long = "big-k")]
        big_k: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Half-circle example coefficients.
    Halfcircle {
        #[arg(long)]
        order: usize,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[command(flatten)]
        out: Output,
    },
    /// Fejér–Riesz factor of a nonnegative trigonometric polynomial.
    Factor {
        #[arg(long)]
        poly: PathBuf,
        #[command(flatten)]
        out: Output,
    },
}

fn parse_complex(s: &str) -> std::result::Result<Complex64, String> {
    let (re, im) = s.split_once(',').unwrap_or((s, "0"));
    let re: f64 = re.trim().parse().map_err(|e| format!("bad real part {re:?}: {e}"))?;
    let im: f64 = im.trim().parse().map_err(|e| format!("bad imaginary part {im:?}: {e}"))?;
    Ok(c(re, im))
}

/// Grid seed, overridable through `CIRCLEKIT_SEED` (decimal or 0x-prefixed hex).
pub fn grid_seed() -> Result<u64> {
    match std::env::var(SEED_VAR) {
        Err(_) => Ok(DEFAULT_SEED),
        Ok(s) => {
            let s = s.trim();
            let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
                Some(hex) => u64::from_str_radix(hex, 16),
                None => s.parse(),
            };
            parsed.map_err(|_| Error::Invalid(format!("{SEED_VAR}={s:?} is not an integer")))
        }
    }
}

fn emit(out: &Output, bytes: &[u8]) -> Result<()> {
    match &out.out {
        Some(p) => std::fs::write(p, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn emit_json<T: Serialize>(out: &Output, v: &T) -> Result<()> {
    let mut text = json::to_string(v)?;
    text.push('\n');
    emit(out, text.as_bytes())
}

fn measure(p: &Path) -> Result<CircleMeasure> {
    json::load_measure(p)
}

fn cjson(v: impl IntoIterator<Item = Complex64>) -> Vec<ComplexJson> {
    v.into_iter().map(Into::into).collect()
}

/// Runs one command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli.command)),
            Err(e) => Err(Error::Invalid(format!("thread pool: {e}"))),
        },
        None => dispatch(&cli.command),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical_failure() { 3 } else { 2 }
        }
    }
}

fn dispatch(cmd: &Command) -> Result<i32> {
    match cmd {
        Command::Moments { mu, n, format, out } => {
            let m = measure(mu)?.moments(*n);
            match format {
                Format::Json => emit_json(out, &json!({ "N": n, "moments": cjson(m.vals.iter().copied()) }))?,
                Format::Csv => {
                    let mut s = String::from("j,re,im\n");
                    for (j, v) in m.vals.iter().enumerate() {
                        s += &format!("{j},{},{}\n", v.re, v.im);
                    }
                    emit(out, s.as_bytes())?;
                }
            }
        }
        Command::Herglotz { mu, z, format, out } => {
            let m = measure(mu)?;
            let vals = z.iter().map(|&z| herglotz(&m, z)).collect::<Result<Vec<_>>>()?;
            match format {
                Format::Json => {
                    let rows: Vec<_> = z
                        .iter()
                        .zip(&vals)
                        .map(|(&z, &h)| json!({ "z": ComplexJson::from(z), "value": ComplexJson::from(h) }))
                        .collect();
                    emit_json(out, &rows)?;
                }
                Format::Csv => {
                    let mut s = String::from("z_re,z_im,re,im\n");
                    for (z, h) in z.iter().zip(&vals) {
                        s += &format!("{},{},{},{}\n", z.re, z.im, h.re, h.im);
                    }
                    emit(out, s.as_bytes())?;
                }
            }
        }
        Command::Clark { b, grid, trace, rays, out } => {
            let bj: ContractiveJson = json::load(b)?;
            let bf = ContractiveFunction::try_from(&bj)?;
            let radii = default_radii();
            let mu = clark_measure(&bf, *grid, &radii)?;
            if let Some(path) = trace {
                let thetas: Vec<f64> =
                    (0..*rays).map(|k| std::f64::consts::TAU * k as f64 / *rays as f64).collect();
                let rows = radial_trace(&bf, &thetas, &radii)?;
                write_radial_csv(std::fs::File::create(path)?, &rows)?;
            }
            emit_json(out, &MeasureJson::from(&mu))?;
        }
        Command::Szego { mu, out } => {
            let m = measure(mu)?;
            let d = szego_distance(&m);
            let extreme = is_extreme(&m) == Extremeness::Extreme;
            emit_json(out, &json!({ "distance": d, "extreme": extreme }))?;
        }
        Command::Dominate { mu, lambda, t, points, out } => {
            let (m, l) = (measure(mu)?, measure(lambda)?);
            let pts = default_grid(*points, grid_seed()?);
            match dominates_rk(&m, &l, *t, &pts)? {
                Domination::Dominated => emit_json(out, &json!({ "verdict": "Dominated", "t": t }))?,
                Domination::Violated { min_eig, witness } => {
                    emit_json(
                        out,
                        &json!({
                            "verdict": "Violated",
                            "t": t,
                            "min_eig": min_eig,
                            "points": cjson(pts.iter().copied()),
                            "witness": cjson(witness.iter().copied()),
                        }),
                    )?;
                    return Ok(3);
                }
            }
        }
        Command::Kernel { mu, n, points, out } => {
            let m = measure(mu)?;
            let g = match n {
                Some(n) => coeff_kernel(&m, *n),
                None => gram(&m, &default_grid(points.unwrap_or(DEFAULT_GRID_POINTS), grid_seed()?))?,
            };
            emit_json(out, &KernelGramJson::from(&g))?;
        }
        Command::Decompose { mu, lambda, n, trace, out } => {
            let rep = lebesgue_decompose(&measure(mu)?, &measure(lambda)?, *n)?;
            if let Some(path) = trace {
                write_trace_csv(std::fs::File::create(path)?, &rep.traces)?;
            }
            emit_json(out, &DecompositionReportJson::from(&rep))?;
        }
        Command::Forms { pair, mu, lambda, n, out } => {
            let fp = match (pair, mu, lambda) {
                (Some(p), _, _) => {
                    let pj: FormPairJson = json::load(p)?;
                    FormPair::new(matrix_from_json(&pj.a)?, matrix_from_json(&pj.b)?)?
                }
                (None, Some(m), Some(l)) => FormPair::from_measures(&measure(m)?, &measure(l)?, *n),
                _ => return Err(Error::Invalid("forms needs --pair or both --mu and --lambda".into())),
            };
            match simon_decompose(&fp) {
                Ok(d) => emit_json(out, &FormDecompositionJson::from(&d))?,
                Err(Error::NotConverged { kmax, last }) => {
                    emit_json(out, &FormDecompositionJson::from(last.as_ref()))?;
                    eprintln!("error: no convergence after {kmax} doublings");
                    return Ok(3);
                }
                Err(e) => return Err(e),
            }
        }
        Command::Kernelpair { k, big_k, out } => {
            let kj: FiniteKernelJson = json::load(k)?;
            let bj: FiniteKernelJson = json::load(big_k)?;
            let (kk, bk) = (FiniteKernel::try_from(&kj)?, FiniteKernel::try_from(&bj)?);
            let (ac, s) = kernel_lebesgue(&kk, &bk)?;
            let rep = orthogonal_split_check(&kk.entries, &ac.entries, &s.entries);
            emit_json(
                out,
                &json!({
                    "k_ac": FiniteKernelJson::from(&ac),
                    "k_s": FiniteKernelJson::from(&s),
                    "sum_residual": rep.sum_residual,
                    "rank_k": rep.rank_k,
                    "rank_ac": rep.rank_ac,
                    "rank_s": rep.rank_s,
                    "orthogonality": rep.orthogonality,
                    "passed": rep.passed,
                }),
            )?;
            if !rep.passed {
                eprintln!("error: split checks failed");
                return Ok(3);
            }
        }
        Command::Halfcircle { order, format, out } => {
            let rep = halfcircle_example(*order)?;
            match format {
                Format::Csv => {
                    let mut buf = Vec::new();
                    write_halfcircle_csv(&mut buf, &rep)?;
                    emit(out, &buf)?;
                }
                Format::Json => emit_json(
                    out,
                    &json!({
                        "order": rep.order,
                        "moment_coeffs": cjson(rep.moment_coeffs.iter().copied()),
                        "log_coeffs": cjson(rep.log_coeffs.iter().copied()),
                        "max_discrepancy": rep.max_discrepancy,
                        "formula_discrepancy": rep.formula_discrepancy,
                        "k0_plus_at_zero": rep.k0_plus_at_zero,
                        "sum_residual": rep.sum_residual,
                        "antisymmetry_residual": rep.antisymmetry_residual,
                    }),
                )?,
            }
        }
        Command::Factor { poly, out } => {
            let pj: TrigPolyJson = json::load(poly)?;
            let g = fejer_riesz_factor(&TrigPoly::try_from(&pj)?)?;
            emit_json(out, &json!({ "coeffs": cjson(g.coeffs.iter().copied()) }))?;
        }
    }
    Ok(0)
}
