//! Curvature of conformally rescaled noncommutative two-tori.
//!
//! The crate computes the Ricci density of a noncommutative torus A_θ
//! equipped with a complex modulus τ and a conformal factor k = e^{h/2},
//! by two independent routes:
//!
//! 1. **Symbol calculus** — an exact pseudodifferential parametrix of the
//!    conformal Laplacians at λ = −1 ([`symbol`]), integrated over
//!    frequency space ([`integrate`]) into rearrangement kernels of the
//!    modular derivative ([`modular`], [`functions`]), assembling the
//!    density and the closed-form curvature theorem.
//! 2. **Spectral oracle** — brute-force matrix truncations of the same
//!    Laplacians, smeared heat traces, and a small-time fit recovering the
//!    Ricci functional with no symbol input at all ([`spectral`]).
//!
//! The `ncg-ricci` binary drives both routes from JSON experiment configs;
//! the `examples/` directory exercises each major capability.

pub mod algebra;
pub mod cli;
pub mod config;
pub mod error;
pub mod functions;
pub mod integrate;
pub mod linalg;
pub mod modular;
pub mod spectral;
pub mod symbol;

pub use algebra::{AlgebraContext, MatrixElement, TorusElement};
pub use error::{NcError, Result};
pub use integrate::{ricci_density, ricci_density_pipeline, ricci_functional, RicciDensity};
pub use modular::{eigen_nabla, ModularSpectrum, TruncationGrid};
