//! Pseudo-spectral solver and diagnostics for magnetic relaxation
//! `∂t B + u·∇B = B·∇u`, `u = (−Δ)^{−γ} P div(B⊗B)` on periodic boxes.

pub mod checkpoint;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod exact25d;
pub mod field;
pub mod grid;
pub mod quadrature;
pub mod random;
pub mod spectral;
pub mod stability2d;

pub use diagnostics::DiagnosticsRecord;
pub use dynamics::{IntegratorConfig, MreState, TimeStep};
pub use error::{MreError, Result};
pub use field::{SpectralField, SpectralScalar, SpectralVector};
pub use grid::Grid;

/// Largest divergence coefficient accepted as divergence-free.
pub const DIV_FREE_TOL: f64 = 1e-12;
