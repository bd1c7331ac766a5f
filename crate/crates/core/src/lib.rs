//! Slotted-time simulator and numerical toolkit for 2-flow downlink
//! inter-session network coding over time-varying broadcast erasure channels.
//!
//! The crate is organized around the pipeline of the system it models:
//!
//! * [`channel`]: the broadcast packet erasure channel: finite channel-quality
//!   process, joint reception sampling, ACK reporting.
//! * [`spn`]: generic (0,1) random stochastic processing networks and the
//!   deficit-max-weight scheduler with its four queue-length ledgers.
//! * [`vnet`]: the coding virtual network: seven binary-XOR coding operations
//!   over five source-side queues, plus the five-operation and pure-routing
//!   baselines.
//! * [`receiver`]: receiver-side decoding, buffer storage and pruning.
//! * [`lp`]: linear-programming characterization of throughput regions,
//!   boundary bisection and proportional-fair points.
//! * [`sim`]: full trial orchestration: slotted mode and the continuous-time
//!   rate-adaptation mode, with per-slot invariant checking.

pub mod channel;
pub mod config;
pub mod lp;
pub mod mat;
pub mod receiver;
pub mod rng;
pub mod sim;
pub mod spn;
pub mod vnet;
pub mod wire;

pub use channel::{ChannelSpec, RaCombo, ReceptionStatus, ReceptionVector};
pub use lp::region::{RatePoint, RegionLp};
pub use sim::{SchemeId, TrialConfig, TrialStats};
pub use spn::{SchedulerState, SpnSpec};
pub use vnet::{CodingOp, PacketId, VrNetworkState};
