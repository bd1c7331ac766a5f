//! Full-trial orchestration: arrivals, channel, scheduler, coding network,
//! receivers and statistics. Slotted mode covers the fixed-transmission-time
//! schemes; the continuous-time mode covers rate adaptation. Every trial is
//! a pure deterministic function of its config (including the seed) and
//! checks its protocol and ledger invariants on every slot, aborting with a
//! diagnostic dump on the first violation.

mod ra;
mod routing;
mod slotted;

use crate::channel::{ChannelSpec, RaCombo};
use crate::receiver::CodecError;
use crate::spn::{DiagnosticsLog, InfeasiblePolicy, SchedulerState, SpnError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("bad trial config: {0}")]
    Config(String),
    #[error("decoding failed at slot {slot}: {source}")]
    Codec { slot: u64, source: CodecError },
    #[error("invariant `{what}` violated at slot {slot}\n{dump}")]
    Invariant {
        what: &'static str,
        slot: u64,
        dump: String,
    },
    #[error("drain did not empty the network ({remaining} packets left)")]
    DrainStalled { remaining: u64 },
    #[error(transparent)]
    Spn(#[from] SpnError),
}

/// The compared schemes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchemeId {
    /// Queue-length-weighted pure routing, uncoded transmissions only.
    RoutingBp,
    /// Five-operation coding network under the deficit-max-weight scheduler.
    FiveOpDmw,
    /// Seven-operation network, backpressure over the virtual queues.
    SevenOpDmwQ,
    /// Seven-operation network, backpressure over the intermediate virtual
    /// queues (same region, smaller backlog).
    SevenOpDmwQinter,
    /// Seven-operation network with per-transmission rate adaptation
    /// (continuous time).
    SevenOpRa,
}

impl SchemeId {
    pub const ALL: [SchemeId; 5] = [
        SchemeId::RoutingBp,
        SchemeId::FiveOpDmw,
        SchemeId::SevenOpDmwQ,
        SchemeId::SevenOpDmwQinter,
        SchemeId::SevenOpRa,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SchemeId::RoutingBp => "routing_bp",
            SchemeId::FiveOpDmw => "five_op_dmw",
            SchemeId::SevenOpDmwQ => "seven_op_dmw_q",
            SchemeId::SevenOpDmwQinter => "seven_op_dmw_qinter",
            SchemeId::SevenOpRa => "seven_op_ra",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|x| x.label() == s)
    }

    /// Rate adaptation runs on the continuous-time engine.
    pub fn is_continuous(self) -> bool {
        matches!(self, SchemeId::SevenOpRa)
    }
}

/// Per-slot (or per-second, in continuous mode) arrival law.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArrivalKind {
    /// One packet with probability equal to the rate (slotted default).
    Bernoulli,
    /// Uniform batch on `{0..=floor(2R)}` plus a Bernoulli correction so the
    /// mean is exactly the rate; integer-valued with bounded support.
    BatchUniform,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArrivalSpec {
    pub rate1: f64,
    pub rate2: f64,
    pub kind: ArrivalKind,
}

impl ArrivalSpec {
    pub fn bernoulli(rate1: f64, rate2: f64) -> Self {
        ArrivalSpec {
            rate1,
            rate2,
            kind: ArrivalKind::Bernoulli,
        }
    }

    pub(crate) fn sample<R: rand::Rng>(&self, rng: &mut R) -> (u32, u32) {
        (
            sample_one(self.kind, self.rate1, rng),
            sample_one(self.kind, self.rate2, rng),
        )
    }
}

fn sample_one<R: rand::Rng>(kind: ArrivalKind, rate: f64, rng: &mut R) -> u32 {
    match kind {
        ArrivalKind::Bernoulli => {
            assert!(rate <= 1.0, "Bernoulli arrivals need rate <= 1");
            u32::from(rng.gen::<f64>() < rate)
        }
        ArrivalKind::BatchUniform => {
            let batch_max = (2.0 * rate).floor() as u32;
            let base = rng.gen_range(0..=batch_max);
            let residue = rate - batch_max as f64 / 2.0;
            base + u32::from(rng.gen::<f64>() < residue)
        }
    }
}

/// Complete description of one trial.
#[derive(Clone, Debug)]
pub struct TrialConfig {
    pub scheme: SchemeId,
    /// Channel process (slotted schemes).
    pub channel: Option<ChannelSpec>,
    /// Available (rate, modulation) combinations (continuous mode).
    pub combos: Vec<RaCombo>,
    pub arrivals: ArrivalSpec,
    /// Slots, or seconds in continuous mode.
    pub horizon: u64,
    pub seed: u64,
    /// Overrides the reception substream; used for replaying a fixed
    /// arrival/channel trace under fresh service randomness.
    pub reception_seed: Option<u64>,
    /// Queue lists are disseminated and buffers pruned every this many
    /// slots; the buffer bound is asserted only at period 1.
    pub pruning_period: u64,
    /// Statistics are recorded every this many slots (events in continuous
    /// mode).
    pub sampling_stride: u64,
    pub fallback: InfeasiblePolicy,
    /// Stop arrivals at the horizon and keep transmitting until the coding
    /// network is empty; used by delivery-completeness checks.
    pub drain: bool,
    pub record_queues: bool,
    pub record_ledgers: bool,
    /// Force full-list batch pruning even at period 1 (reference semantics
    /// for the event-driven pruning path; testing only).
    #[doc(hidden)]
    pub batch_prune: bool,
}

impl TrialConfig {
    pub fn slotted(
        scheme: SchemeId,
        channel: ChannelSpec,
        rate1: f64,
        rate2: f64,
        horizon: u64,
        seed: u64,
    ) -> Self {
        TrialConfig {
            scheme,
            channel: Some(channel),
            combos: Vec::new(),
            arrivals: ArrivalSpec::bernoulli(rate1, rate2),
            horizon,
            seed,
            reception_seed: None,
            pruning_period: 1,
            sampling_stride: 100,
            fallback: InfeasiblePolicy::Idle,
            drain: false,
            record_queues: false,
            record_ledgers: false,
            batch_prune: false,
        }
    }

    pub fn rate_adaptation(
        combos: Vec<RaCombo>,
        rate1: f64,
        rate2: f64,
        horizon_secs: u64,
        seed: u64,
    ) -> Self {
        TrialConfig {
            scheme: SchemeId::SevenOpRa,
            channel: None,
            combos,
            arrivals: ArrivalSpec {
                rate1,
                rate2,
                kind: ArrivalKind::Bernoulli,
            },
            horizon: horizon_secs,
            seed,
            reception_seed: None,
            pruning_period: 1,
            sampling_stride: 100,
            fallback: InfeasiblePolicy::Idle,
            drain: false,
            record_queues: false,
            record_ledgers: false,
            batch_prune: false,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.horizon == 0 {
            return Err(SimError::Config("horizon must be positive".into()));
        }
        if self.arrivals.rate1 < 0.0 || self.arrivals.rate2 < 0.0 {
            return Err(SimError::Config("arrival rates must be nonnegative".into()));
        }
        if self.pruning_period == 0 || self.sampling_stride == 0 {
            return Err(SimError::Config("periods must be positive".into()));
        }
        if self.scheme.is_continuous() {
            if self.combos.is_empty() {
                return Err(SimError::Config(
                    "rate adaptation needs at least one combo".into(),
                ));
            }
            if self
                .combos
                .iter()
                .any(|c| !c.duration.is_finite() || c.duration <= 0.0)
            {
                return Err(SimError::Config("combo durations must be positive".into()));
            }
        } else {
            if self.channel.is_none() {
                return Err(SimError::Config("slotted schemes need a channel".into()));
            }
            if !self.combos.is_empty() {
                return Err(SimError::Config(
                    "combos are only valid for rate adaptation".into(),
                ));
            }
        }
        Ok(())
    }
}

/// One recorded sample.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleRow {
    /// Slot index, or seconds in continuous mode.
    pub t: f64,
    pub backlog: u64,
    pub delivered1: u64,
    pub delivered2: u64,
    pub buf_d1: u64,
    pub buf_d2: u64,
    /// Per-queue lengths when `record_queues` is on.
    pub queue_lens: Vec<u64>,
}

/// Virtual-ledger snapshot for replay checks.
#[derive(Clone, Debug, PartialEq)]
pub struct LedgerSample {
    pub t: u64,
    pub q_virtual: Vec<f64>,
    pub q_inter_virtual: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct TrialStats {
    pub scheme: SchemeId,
    pub seed: u64,
    pub samples: Vec<SampleRow>,
    pub final_backlog: u64,
    pub max_backlog: u64,
    pub arrivals: (u64, u64),
    pub delivered: (u64, u64),
    /// FNV-1a over the channel-state trace; equal checksums certify that two
    /// runs saw the same channel-quality sequence.
    pub cq_checksum: u64,
    pub slots: u64,
    pub ledger_samples: Vec<LedgerSample>,
    /// Full four-ledger series at the sampling stride, populated when
    /// `record_ledgers` is on; export with
    /// [`DiagnosticsLog::to_csv`].
    pub diagnostics: DiagnosticsLog,
    pub final_scheduler: Option<SchedulerState>,
}

impl TrialStats {
    pub fn csv_header(queue_columns: usize) -> String {
        let mut h = String::from("scheme,theta,seed,t,backlog,delivered1,delivered2,buf_d1,buf_d2");
        for k in 0..queue_columns {
            h.push_str(&format!(",q{k}"));
        }
        h.push('\n');
        h
    }

    /// Rows in the sweep CSV schema; per-queue columns are padded to
    /// `queue_columns` so mixed-scheme sweeps stay rectangular.
    pub fn append_csv(&self, theta: f64, queue_columns: usize, out: &mut String) {
        for row in &self.samples {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}",
                self.scheme.label(),
                theta,
                self.seed,
                row.t,
                row.backlog,
                row.delivered1,
                row.delivered2,
                row.buf_d1,
                row.buf_d2
            ));
            for k in 0..queue_columns {
                match row.queue_lens.get(k) {
                    Some(q) => out.push_str(&format!(",{q}")),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
    }
}

pub(crate) struct CqChecksum(u64);

impl CqChecksum {
    pub fn new() -> Self {
        CqChecksum(0xcbf2_9ce4_8422_2325)
    }

    pub fn update(&mut self, state: usize) {
        self.0 ^= state as u64 + 1;
        self.0 = self.0.wrapping_mul(0x0000_0100_0000_01B3);
    }

    pub fn value(&self) -> u64 {
        self.0
    }
}

/// Run one trial, dispatching on the scheme.
pub fn run(cfg: &TrialConfig) -> Result<TrialStats, SimError> {
    cfg.validate()?;
    match cfg.scheme {
        SchemeId::RoutingBp => routing::run_routing_bp(cfg),
        SchemeId::FiveOpDmw | SchemeId::SevenOpDmwQ | SchemeId::SevenOpDmwQinter => {
            slotted::run_slotted(cfg)
        }
        SchemeId::SevenOpRa => ra::run_rate_adaptation(cfg),
    }
}

pub use ra::run_rate_adaptation;
pub use routing::run_routing_bp;
pub use slotted::run_slotted;
