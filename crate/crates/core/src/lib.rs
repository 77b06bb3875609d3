//! Simulation, dataset generation and neural-network modelling of arbiter
//! PUFs with challenge obfuscation (feed-forward loops, XOR/OAX combinations,
//! Mn and interpose designs).

pub mod composite;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod features;
pub mod metrics;
pub mod mlp;
pub mod puf;

pub use composite::{
    ArchTag, FfApufInstance, IpufInstance, LoopGeometry, LoopShape, LoopSpec, MnApufInstance, OaxFfInstance,
    PufInstance, XorFfInstance,
};
pub use error::{Error, Result};
pub use experiment::{ArchSpec, AttackExperiment, InstanceDescriptor, MetricsExperiment};
pub use puf::{ApufInstance, Bit, Challenge, NoiseModel, NOISE_CALIBRATION};
