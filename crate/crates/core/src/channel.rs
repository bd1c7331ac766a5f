//! Time-varying broadcast packet erasure channel: channel-quality process,
//! joint reception sampling and ACK reporting.
//!
//! One packet is broadcast per slot and received by a random subset of the
//! two destinations; the joint law of that subset is a four-entry probability
//! vector selected by the current channel-quality state. Both destinations
//! report reception back to the source at the end of the slot (ACKs are
//! modeled as error-free and instantaneous).

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for probability normalization checks.
pub const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("probability out of range: {0}")]
    OutOfRange(f64),
    #[error("probabilities sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("channel spec needs at least one state")]
    EmptyStates,
    #[error("state frequency must be positive, got {0}")]
    BadFrequency(f64),
    #[error("duplicate state id {0}")]
    DuplicateStateId(u32),
    #[error("unknown state id {0} in periodic sequence")]
    UnknownStateId(u32),
    #[error("periodic sequence frequency of state {id} is {actual}, declared {declared}")]
    PeriodicMismatch { id: u32, declared: f64, actual: f64 },
    #[error("periodic sequence must be non-empty")]
    EmptyPeriod,
}

/// Outcome of one broadcast transmission: which destinations heard it.
///
/// Serializes to the two-bit strings `"00"`, `"10"`, `"01"`, `"11"`
/// (d1-bit then d2-bit).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ReceptionStatus {
    /// Neither destination received the packet.
    None,
    /// Only d1 received it.
    D1Only,
    /// Only d2 received it.
    D2Only,
    /// Both destinations received it.
    Both,
}

impl ReceptionStatus {
    pub const ALL: [ReceptionStatus; 4] = [
        ReceptionStatus::None,
        ReceptionStatus::D1Only,
        ReceptionStatus::D2Only,
        ReceptionStatus::Both,
    ];

    /// True iff d1 heard the transmission.
    #[inline]
    pub fn d1(self) -> bool {
        matches!(self, ReceptionStatus::D1Only | ReceptionStatus::Both)
    }

    /// True iff d2 heard the transmission.
    #[inline]
    pub fn d2(self) -> bool {
        matches!(self, ReceptionStatus::D2Only | ReceptionStatus::Both)
    }

    /// True iff at least one destination heard it.
    #[inline]
    pub fn any(self) -> bool {
        !matches!(self, ReceptionStatus::None)
    }

    pub fn code(self) -> &'static str {
        match self {
            ReceptionStatus::None => "00",
            ReceptionStatus::D1Only => "10",
            ReceptionStatus::D2Only => "01",
            ReceptionStatus::Both => "11",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.code() == code)
    }
}

impl Serialize for ReceptionStatus {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for ReceptionStatus {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        ReceptionStatus::from_code(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("bad reception code {s:?}")))
    }
}

/// Joint reception-status law of one transmission.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReceptionVector {
    p_none: f64,
    p_d1_only: f64,
    p_d2_only: f64,
    p_both: f64,
}

impl ReceptionVector {
    pub fn new(
        p_none: f64,
        p_d1_only: f64,
        p_d2_only: f64,
        p_both: f64,
    ) -> Result<Self, ChannelError> {
        for &p in &[p_none, p_d1_only, p_d2_only, p_both] {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(ChannelError::OutOfRange(p));
            }
        }
        let sum = p_none + p_d1_only + p_d2_only + p_both;
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(ChannelError::NotNormalized(sum));
        }
        Ok(ReceptionVector {
            p_none,
            p_d1_only,
            p_d2_only,
            p_both,
        })
    }

    pub fn from_array(p: [f64; 4]) -> Result<Self, ChannelError> {
        Self::new(p[0], p[1], p[2], p[3])
    }

    /// Joint vector for independent per-destination success probabilities
    /// `q1` and `q2`.
    pub fn from_marginals(q1: f64, q2: f64) -> Result<Self, ChannelError> {
        for &q in &[q1, q2] {
            if !(0.0..=1.0).contains(&q) || !q.is_finite() {
                return Err(ChannelError::OutOfRange(q));
            }
        }
        Ok(ReceptionVector {
            p_none: (1.0 - q1) * (1.0 - q2),
            p_d1_only: q1 * (1.0 - q2),
            p_d2_only: (1.0 - q1) * q2,
            p_both: q1 * q2,
        })
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.p_none, self.p_d1_only, self.p_d2_only, self.p_both]
    }

    pub fn prob(&self, rcpt: ReceptionStatus) -> f64 {
        match rcpt {
            ReceptionStatus::None => self.p_none,
            ReceptionStatus::D1Only => self.p_d1_only,
            ReceptionStatus::D2Only => self.p_d2_only,
            ReceptionStatus::Both => self.p_both,
        }
    }

    /// Marginal probability that d1 receives.
    pub fn p_d1(&self) -> f64 {
        self.p_d1_only + self.p_both
    }

    /// Marginal probability that d2 receives.
    pub fn p_d2(&self) -> f64 {
        self.p_d2_only + self.p_both
    }

    /// Probability that at least one destination receives.
    pub fn p_any(&self) -> f64 {
        1.0 - self.p_none
    }

    /// Probability that only d1 receives (d2 erased).
    pub fn p_d1_only(&self) -> f64 {
        self.p_d1_only
    }

    /// Probability that only d2 receives (d1 erased).
    pub fn p_d2_only(&self) -> f64 {
        self.p_d2_only
    }

    pub fn p_none(&self) -> f64 {
        self.p_none
    }

    pub fn p_both(&self) -> f64 {
        self.p_both
    }

    /// Categorical draw of one reception status.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ReceptionStatus {
        let u: f64 = rng.gen();
        let mut acc = self.p_none;
        if u < acc {
            return ReceptionStatus::None;
        }
        acc += self.p_d1_only;
        if u < acc {
            return ReceptionStatus::D1Only;
        }
        acc += self.p_d2_only;
        if u < acc {
            return ReceptionStatus::D2Only;
        }
        ReceptionStatus::Both
    }
}

/// One channel-quality state: an id, its long-run frequency, and the
/// reception law it induces.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelState {
    pub id: u32,
    pub freq: f64,
    pub p: ReceptionVector,
}

/// How the channel-quality process evolves.
#[derive(Clone, Debug, PartialEq)]
pub enum ChannelMode {
    /// Drawn i.i.d. with the declared frequencies.
    Iid,
    /// Deterministic periodic repetition of the given state ids.
    Periodic(Vec<u32>),
}

/// Finite-state channel-quality process.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSpec {
    states: Vec<ChannelState>,
    mode: ChannelMode,
    /// Periodic sequence resolved to state indexes.
    period_idx: Vec<usize>,
}

impl ChannelSpec {
    pub fn iid(states: Vec<ChannelState>) -> Result<Self, ChannelError> {
        Self::new(states, ChannelMode::Iid)
    }

    pub fn periodic(states: Vec<ChannelState>, sequence: Vec<u32>) -> Result<Self, ChannelError> {
        Self::new(states, ChannelMode::Periodic(sequence))
    }

    /// Single state occurring with frequency one.
    pub fn single(p: ReceptionVector) -> Self {
        Self::iid(vec![ChannelState {
            id: 0,
            freq: 1.0,
            p,
        }])
        .expect("valid by construction")
    }

    pub fn new(states: Vec<ChannelState>, mode: ChannelMode) -> Result<Self, ChannelError> {
        if states.is_empty() {
            return Err(ChannelError::EmptyStates);
        }
        let mut sum = 0.0;
        for s in &states {
            if !s.freq.is_finite() || s.freq <= 0.0 {
                return Err(ChannelError::BadFrequency(s.freq));
            }
            sum += s.freq;
            if states.iter().filter(|o| o.id == s.id).count() > 1 {
                return Err(ChannelError::DuplicateStateId(s.id));
            }
        }
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(ChannelError::NotNormalized(sum));
        }
        let period_idx = match &mode {
            ChannelMode::Iid => Vec::new(),
            ChannelMode::Periodic(seq) => {
                if seq.is_empty() {
                    return Err(ChannelError::EmptyPeriod);
                }
                let idx: Vec<usize> = seq
                    .iter()
                    .map(|id| {
                        states
                            .iter()
                            .position(|s| s.id == *id)
                            .ok_or(ChannelError::UnknownStateId(*id))
                    })
                    .collect::<Result<_, _>>()?;
                // the declared frequencies must match the sequence exactly
                for (i, s) in states.iter().enumerate() {
                    let actual = idx.iter().filter(|&&j| j == i).count() as f64 / idx.len() as f64;
                    if (actual - s.freq).abs() > PROB_TOL {
                        return Err(ChannelError::PeriodicMismatch {
                            id: s.id,
                            declared: s.freq,
                            actual,
                        });
                    }
                }
                idx
            }
        };
        Ok(ChannelSpec {
            states,
            mode,
            period_idx,
        })
    }

    pub fn states(&self) -> &[ChannelState] {
        &self.states
    }

    pub fn mode(&self) -> &ChannelMode {
        &self.mode
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn freqs(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.freq).collect()
    }

    /// Channel state for slot `t` (0-based), returned as an index into
    /// [`ChannelSpec::states`]. In iid mode the draw consumes one value from
    /// `rng`; periodic mode is deterministic and ignores the generator.
    pub fn sample_state<R: Rng + ?Sized>(&self, t: u64, rng: &mut R) -> usize {
        match &self.mode {
            ChannelMode::Periodic(_) => {
                self.period_idx[(t % self.period_idx.len() as u64) as usize]
            }
            ChannelMode::Iid => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (i, s) in self.states.iter().enumerate() {
                    acc += s.freq;
                    if u < acc {
                        return i;
                    }
                }
                self.states.len() - 1
            }
        }
    }
}

/// One (code rate, modulation) combination available to the rate-adaptation
/// scheduler: the seconds it takes to send one packet and the reception law
/// it sees.
#[derive(Clone, Debug, PartialEq)]
pub struct RaCombo {
    pub duration: f64,
    pub p: ReceptionVector,
}
