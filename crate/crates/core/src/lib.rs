//! Finite-n correlation kernels of Gelfand-Tsetlin minor processes with a fixed
//! top row, the saddle equation `w G_mu(w + c) = 1 - alpha` that governs their
//! bulk limit, and the numerical checks (exact oracles, contour integrals, GUE
//! kernels, Monte Carlo) that tie the two together.

pub mod error;
pub mod gue;
pub mod kernel;
pub mod measures;
pub mod montecarlo;
pub mod numeric;
pub mod patterns;
pub mod saddle;
pub mod sine;

pub use error::{Error, Result};
pub use kernel::{
    correlation_det, kernel_contour, kernel_fixed_top, kernel_fixed_top_exact, level_mass, ContourQuad, KernelPoint,
    KernelSpec, Precision,
};
pub use measures::{from_spectrum, quantile_spectrum, Measure, MeasureKind};
pub use numeric::LogSigned;
pub use patterns::{GTPattern, Spectrum};
pub use saddle::{solve_saddle, AtomReport, ClosedFormExample, Saddle};

pub use num_complex::Complex64;

/// Library version, echoed in CLI output headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
