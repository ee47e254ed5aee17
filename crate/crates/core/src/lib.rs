//! Spectral toolkit for the stochastic Airy operator
//! `-∂² + (β/4) t + ξ(t)` on `[0, T]` with Dirichlet conditions, aimed at the
//! high-temperature regime `β → 0`.
//!
//! The central object is the Riccati log-derivative `Z = φ'/φ` of a solution
//! of `φ'' = (a + βt/4 + ξ) φ`. Counting its explosions to `-∞` counts
//! eigenvalues below `-a`, which turns every spectral question into a
//! one-dimensional diffusion problem driven by a shared [`BrownianPath`].
//!
//! ```
//! use sao_core::{paths::BrownianPath, spectrum};
//!
//! let quiet = BrownianPath::zero(0.0, 1.0, 1e-3).unwrap();
//! let l1 = spectrum::eigenvalue_bisect(&quiet, 0.0, 1.0, 1, 1e-10).unwrap();
//! assert!((l1 - std::f64::consts::PI.powi(2)).abs() < 1e-8);
//! ```

pub mod beta_ensemble;
pub mod discrete_oracle;
pub mod error;
pub mod paths;
pub mod riccati;
pub mod scaling;
pub mod spectrum;
pub mod stats;

pub use error::{Error, Result};

/// Crate version, recorded in experiment reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use paths::BrownianPath;
pub use scaling::ScalingParams;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/quickstart.md")]
    struct Quickstart;
    #[doc = include_str!("../../../book/src/paths.md")]
    struct Paths;
    #[doc = include_str!("../../../book/src/riccati.md")]
    struct Riccati;
    #[doc = include_str!("../../../book/src/spectrum.md")]
    struct Spectrum;
    #[doc = include_str!("../../../book/src/oracle.md")]
    struct Oracle;
    #[doc = include_str!("../../../book/src/ensemble.md")]
    struct Ensemble;
    #[doc = include_str!("../../../book/src/statistics.md")]
    struct Statistics;
}
