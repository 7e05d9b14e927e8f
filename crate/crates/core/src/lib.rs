//! Federated echo state networks for wireless VR: reservoir models, consensus
//! training across base stations, memory-capacity analysis, mmWave link
//! models, break-in-presence scoring and prediction-driven user association.

pub mod assoc;
pub mod bip;
pub mod capacity;
pub mod config;
pub mod error;
pub mod esn;
pub mod federated;
pub mod linalg;
pub mod matrix_io;
pub mod radio;
pub mod sim;

pub use error::{Error, Result};
pub use esn::{EsnModel, Reservoir, ReservoirSpec, Topology};
pub use federated::{
    collect_states, pooled_ridge, train_federated, FederatedConfig, FederatedOutcome, FederatedState,
    LocalDataset, RoundResiduals, StopRule,
};
pub use capacity::{mc_closed_form, mc_empirical, nrmse, CapacityQuery, CapacityTopology, EmpiricalMcConfig};
pub use config::{Arm, ArmSet, ScenarioConfig};
pub use radio::{Geometry, Point, RadioParams, SelfBlockage};
pub use bip::{AwarenessProfile, SlotOutcome, VideoFrameModel};
pub use assoc::{select_association, AssociationPlan, BanditPolicy, ChannelDraws, LinkContext, LinkTable};
pub use sim::{run_scenario, run_sweep, ScenarioOutcome};
