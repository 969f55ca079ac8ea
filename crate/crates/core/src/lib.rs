//! Second-order Gauss-Seidel projection methods (GSPMs) for the
//! Landau-Lifshitz equation on uniform cell-centered grids.
//!
//! The crate is organised bottom-up:
//!
//! - [`mesh`]: grid descriptor, field storage and the mirrored-Neumann
//!   Laplacian / biharmonic stencils.
//! - [`linsolve`]: cosine-transform solves of `(I - aΔ + bΔ²) u = f` plus a
//!   dense direct oracle for small grids.
//! - [`physics`]: dimensionless material model, Newell demagnetization
//!   kernel with FFT convolution, and the energy functional.
//! - [`schemes`]: first-order GSPM, the plain biharmonic/BDF2 scheme,
//!   Scheme A, Scheme B and the coupled semi-implicit BDF2 reference.
//! - [`verify`]: manufactured solutions, convergence fits and the CFL scan.
//! - [`harness`]: JSON experiment configs, dispatch and CSV/JSON/VTK output.

pub mod harness;
pub mod linsolve;
pub mod mesh;
pub mod physics;
pub mod schemes;
pub mod verify;

pub use linsolve::{OperatorCoefficients, SpectralPlan};
pub use mesh::{Grid, NormKind, ScalarField, VectorField};
pub use physics::{DemagKernel, MaterialParams, PhysicalConstants};
pub use schemes::{SchemeKind, SchemeState, StepContext};
use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite value at cell {cell:?}")]
    NonFinite { cell: [usize; 3] },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dense oracle limited to {max} cells, got {got}")]
    OracleTooLarge { got: usize, max: usize },

    #[error("stray field enabled but no demagnetization kernel supplied")]
    MissingKernel,

    #[error("projection failed at cell {cell:?}: |m| = {magnitude:e}")]
    DegenerateProjection { cell: [usize; 3], magnitude: f64 },

    #[error("blow-up at cell {cell:?} in stage {stage}: |m~| = {magnitude:e}")]
    BlowUp {
        cell: [usize; 3],
        stage: &'static str,
        magnitude: f64,
    },

    #[error(
        "krylov solve did not converge in {iterations} iterations (relative residual {residual:e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("invalid stability bracket: {0}")]
    InvalidBracket(String),

    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("step {step} ({scheme}): {source}")]
    AtStep {
        step: usize,
        scheme: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for errors that signal numerical instability rather than misuse.
    pub fn is_blow_up(&self) -> bool {
        match self {
            Error::BlowUp { .. } | Error::DegenerateProjection { .. } | Error::NonFinite { .. } => {
                true
            }
            Error::AtStep { source, .. } => source.is_blow_up(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
