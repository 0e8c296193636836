//! Link-level simulator for coherent eMBB and non-coherent MTD uplink
//! coexistence on a shared massive-MIMO coherence block.

pub mod channel;
pub mod codebook_io;
pub mod config;
pub mod embb;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod scalar;
pub mod solvers;
pub mod waveform;

pub use config::{NetworkConfig, PilotKind, RateMode, SolverConfig, SolverKind};
pub use error::{Error, Result};
pub use scalar::{CMat, CVec, Cx, Real};

pub type Codebook64 = waveform::Codebook<f64>;
pub type Codebook32 = waveform::Codebook<f32>;
