//! Semidefinite optimal power flow for unbalanced, radial, multiphase
//! distribution feeders.
//!
//! The crate is organized bottom-up:
//!
//! * [`network`] holds the per-unit feeder model and its radial topology.
//! * [`symcomp`] maps between phase (abc) and sequence (012) frames.
//! * [`pf`] is an exact backward/forward sweep power flow used as the
//!   reference solution everywhere else.
//! * [`sdp`] assembles the phase-frame and sequence-frame semidefinite
//!   relaxations as solver-agnostic [`sdp::ConicProblem`]s.
//! * [`conic`] lowers those problems to real conic form and solves them.
//! * [`analysis`] recovers voltages and flows and measures tightness.
//! * [`iteration`] runs the voltage-dependent load update loop.
//! * [`voltreg`] runs the successive-linearization voltage regulation loop.
//! * [`io`] parses feeder documents and writes reports.
//! * [`cli`] wires everything into reproducible command-line runs.

// Links the system BLAS/LAPACK used by the PSD cone kernels.
extern crate openblas_src as _;

pub mod analysis;
pub mod cli;
pub mod conic;
pub mod error;
pub mod io;
pub mod iteration;
pub mod linalg;
pub mod network;
pub mod pf;
pub mod sdp;
pub mod symcomp;
pub mod voltreg;

pub use error::{Error, Result};
pub use network::{FeederModel, PhaseSet, TopologyOrder};
