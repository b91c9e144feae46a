mod error;
pub mod flux;
pub mod integrate;
pub mod phase;
pub mod profiles;
pub mod quad;
mod rk;
pub mod scalar;
pub mod shooting;

pub use error::{Error, Result};
pub use flux::{FluxLimiter, LimiterKind, SlopeDomain};
pub use phase::{Equilibrium, EquilibriumRole, ModelParams, Regime, StabilityLabel};
pub use scalar::Real;
pub use integrate::{Controls, Direction, GraphControls, GraphCurve, Sample, TerminationEvent, Trajectory};
pub use profiles::{Branch, ProfileType, SlopeKind, WaveProfile};
pub use shooting::{ThresholdMethod, ThresholdResult, TrajectoryClass};

pub type ModelParams64 = ModelParams<f64>;
pub type FluxLimiter64 = FluxLimiter<f64>;
pub type Equilibrium64 = Equilibrium<f64>;
pub type Controls64 = Controls<f64>;
pub type Trajectory64 = Trajectory<f64>;
pub type GraphCurve64 = GraphCurve<f64>;
pub type ThresholdResult64 = ThresholdResult<f64>;
pub type WaveProfile64 = WaveProfile<f64>;

pub type ModelParams32 = ModelParams<f32>;
pub type FluxLimiter32 = FluxLimiter<f32>;
pub type Trajectory32 = Trajectory<f32>;
pub type WaveProfile32 = WaveProfile<f32>;
