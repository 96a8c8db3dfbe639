use thiserror::Error;

use crate::forms::FormDecomposition;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("trigonometric polynomial is negative on the verification grid (min {min:.3e})")]
    NotNonnegative { min: f64 },

    #[error("ill-conditioned computation: {0}")]
    IllConditioned(String),

    #[error("point {re}+{im}i lies outside the open unit disk")]
    OutsideDisk { re: f64, im: f64 },

    #[error("function is not contractive: |b| = {modulus} sampled")]
    NonContractive { modulus: f64 },

    #[error("matrix is not Hermitian (asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    #[error("measure is not absolutely continuous (singular mass {singular_mass:.3e})")]
    NotAbsolutelyContinuous { singular_mass: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("block Gram metric is singular (condition number {condition:.3e})")]
    SingularMetric { condition: f64 },

    #[error("kernel is not contractively contained (min eigenvalue {min_eig:.3e})")]
    NotContractivelyContained { min_eig: f64 },

    #[error("operator is not a contraction (norm {norm})")]
    NotContraction { norm: f64 },

    #[error("decomposition did not converge after {kmax} doublings")]
    NotConverged {
        kmax: usize,
        last: Box<FormDecomposition>,
    },

    #[error("reference form is singular (min eigenvalue {min_eig:.3e})")]
    SingularReference { min_eig: f64 },

    #[error("ill-posed deconvolution (normal matrix condition {condition:.3e})")]
    IllPosed { condition: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Numerical-failure verdicts, as opposed to bad input.
    pub fn is_numerical_failure(&self) -> bool {
        matches!(
            self,
            Error::NotConverged { .. }
                | Error::IllPosed { .. }
                | Error::IllConditioned(_)
                | Error::SingularMetric { .. }
        )
    }
}

pub(crate) fn check_disk(z: num_complex::Complex64) -> Result<()> {
    if z.norm() < 1.0 && z.re.is_finite() && z.im.is_finite() {
        Ok(())
    } else {
        Err(Error::OutsideDisk { re: z.re, im: z.im })
    }
}
