//! Multi-cell hybrid mmWave link-level simulator.
//!
//! Monte-Carlo channel estimation under pilot contamination and ZF downlink
//! rates, together with the closed-form predictors they are compared to.

pub mod beamforming;
pub mod channel;
pub mod config;
pub mod downlink;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod geometry;
pub mod network;
pub mod rng;
pub mod stats;
pub mod units;

pub use beamforming::{array_gain, build_bank, mean_array_gain, project_channel, BeamformerBank};
pub use channel::{ula_response, ChannelSet, LinkChannel, Scope, CMat, C64};
pub use config::{ContaminationMode, ScenarioConfig};
pub use downlink::{
    theorem2_rate, upper_bound_rate, zf_precoder, RateInputs, SinrTerms, ZfPrecoder,
};
pub use error::{Error, Result};
pub use estimation::{analytical_nmse, build_pilots, EquivalentChannelEstimate, NmseReport, PilotBook};
pub use experiments::{emit_csv, ExperimentResult, ResultRow};
pub use geometry::{path_loss, noise_power, Deployment, PathLossModel};
pub use network::{Energies, TrialRealization};
