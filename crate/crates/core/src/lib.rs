//! Closed-form analytics, a Monte Carlo oracle and a particle swarm
//! allocator for a two-user STAR-RIS assisted MISO SWIPT-NOMA link in which
//! each user stores harvested energy in a buffer.

pub mod channel;
pub mod energy;
pub mod error;
pub mod link;
pub mod mc;
pub mod params;
pub mod pso;
pub mod quadrature;
pub mod special;

pub use channel::{GammaFit, Geometry, NakagamiParams, Point, RawMoments, User};
pub use energy::{BufferState, ConsumptionParams, PowerState, SwiptParams};
pub use error::{Error, Result};
pub use link::{AnalyticBuffer, LinkMetrics, NomaParams};
pub use mc::{TrialStats, VariantConfig};
pub use params::SystemParams;
pub use pso::{PsoHyper, PsoResult, SwarmState};
pub use quadrature::GhMode;
