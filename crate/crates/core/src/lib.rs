//! Neural-network surrogates for chaotic ODE systems and the tooling to turn
//! them into hardware oscillator cores.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! * [`chaos`] defines the ODE systems and their operation counts.
//! * [`integrator`] solves them with classical RK-4 and builds the
//!   consecutive-timestep training [`Dataset`].
//! * [`ann`] trains a single-hidden-layer network to approximate one step.
//! * [`oscillator`] closes the loop and extracts pseudo-random bits.
//! * [`randtest`] runs the frequency, block-frequency and runs tests.
//! * [`dse`] estimates latency and LUT cost per parallelism level and
//!   selects candidate microarchitectures.
//! * [`codegen`] emits the HLS-style C++ core and its testbench.

pub mod ann;
pub mod chaos;
pub mod codegen;
pub mod config;
pub mod dse;
pub mod integrator;
pub mod linalg;
pub mod oscillator;
pub mod randtest;
pub mod special;

pub use ann::{Activation, AnnModel, Metrics, TrainConfig};
pub use chaos::{ChaoticSystem, OpCount, VectorField};
pub use dse::{CandidateDesign, CoefficientTable, DspMode, LatencyCoeffs, LutCoeffs, Selection};
pub use integrator::{Dataset, NormStats, Trajectory};
pub use oscillator::{BitStream, Oscillator};
pub use randtest::TestReport;

/// Version string stamped into generated artifacts.
pub const TOOL_VERSION: &str = concat!("chaosnet ", env!("CARGO_PKG_VERSION"));
