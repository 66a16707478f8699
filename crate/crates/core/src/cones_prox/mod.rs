//! Cone geometry and the prox/smooth function catalog used by all solvers.

mod cone;
mod prox;
mod smooth;

pub use cone::Cone;
pub use prox::ProxFunction;
pub use smooth::SmoothFunction;
