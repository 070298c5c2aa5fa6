//! Certification of quantum-thermodynamic advantage in steady-state thermal
//! machines.

pub mod equivalents;
pub mod error;
pub mod fcs;
pub mod jet;
pub mod linalg;
pub mod liouvillian;
pub mod machine_model;
pub mod machines;
pub mod mesostate;
pub mod montecarlo;
pub mod scalar;
pub mod sweep;
pub mod steady_state;
pub mod thermo;

pub use error::{ErrorCategory, QcertError, Result};
pub use jet::Jet2;
pub use scalar::{Dd, Field, Real};

/// Generator in the default (double-double) precision.
pub type Generator = liouvillian::GeneratorMatrix<Dd>;
/// Generator in plain `f64`.
pub type GeneratorF64 = liouvillian::GeneratorMatrix<f64>;
