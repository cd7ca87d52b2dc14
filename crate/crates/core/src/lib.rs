//! Correct solvability in `L_p(ℝ)` of `-(r y')' + q y = f`.
//!
//! The pipeline builds a principal fundamental system `{u, v}` of the
//! homogeneous equation, its generating function `ρ = u v`, the width
//! function `s`, and the Green operator, then evaluates the solvability
//! criteria on expanding grids.

pub mod auxiliary;
pub mod cli;
pub mod coefficients;
pub mod error;
pub mod green;
pub mod ode;
pub mod pfss;
pub mod quad;
pub mod report;
pub mod roots;
pub mod solvability;
pub mod trend;
pub mod verify;

pub use coefficients::{classify, CoefficientPair, IntegrabilityProfile, Ternary};
pub use error::{Error, Result};
pub use pfss::{construct_pfss, model_pfss, PfssOptions, PrincipalSystem};
pub use solvability::{analyze, AnalyzeOptions, SolvabilityReport, Verdict};
