//! Plug-and-play proximal splitting, regularization by denoising and
//! plug-and-play Langevin sampling for linear inverse problems.

pub mod denoisers;
pub mod error;
pub mod experiments;
pub mod io;
pub mod metrics;
pub mod operators;
pub mod proximal;
pub mod rng;
pub mod sampling;
pub mod score_oracle;
pub mod signal;
pub mod solvers;
pub mod trace;

pub use error::{Error, Result};
pub use rng::Rng;
pub use signal::Signal;
pub use trace::{Trace, TraceRow};
