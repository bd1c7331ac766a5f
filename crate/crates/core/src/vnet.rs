//! The coding virtual network: five source-side queues driven by seven
//! binary-XOR coding operations, plus the five-operation and pure-routing
//! baseline networks.
//!
//! Queue order everywhere is
//! `[Q1_unheard, Q2_unheard, Q1_overheard, Q2_overheard, Qmix]` and the
//! seven-operation order is `[NC1, NC2, DX1, DX2, PM, RC, CX]`.
//!
//! * `NC1`/`NC2` send a fresh packet uncoded.
//! * `DX1`/`DX2` retransmit an overheard-queue packet uncoded.
//! * `CX` sends the XOR of the heads of both overheard queues.
//! * `PM` premixes two fresh packets into one XOR before either was ever
//!   sent; on any reception the pair becomes a `Qmix` tuple remembering who
//!   heard the sum.
//! * `RC` follows up on a `Qmix` tuple; what it sends and where the survivor
//!   moves depend on who heard the original sum and who hears this one.

use crate::channel::{ChannelSpec, ReceptionStatus, ReceptionVector};
use crate::mat::Mat;
use crate::spn::{RealizationSource, ServiceRealization, SpnError, SpnSpec};
use std::collections::VecDeque;

/// Which flow a packet belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Session {
    One,
    Two,
}

impl Session {
    pub fn index(self) -> usize {
        match self {
            Session::One => 0,
            Session::Two => 1,
        }
    }

    pub fn byte(self) -> u8 {
        match self {
            Session::One => 1,
            Session::Two => 2,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            1 => Some(Session::One),
            2 => Some(Session::Two),
            _ => None,
        }
    }
}

/// Identity of one data packet. The payload is a pseudorandom function of
/// `(session, seq, run_seed)`, so equality of `payload_seed` certifies
/// payload equality without carrying buffers through the simulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PacketId {
    pub session: Session,
    pub seq: u32,
    pub payload_seed: u64,
}

impl PacketId {
    pub fn new(session: Session, seq: u32, run_seed: u64) -> Self {
        assert!(seq > 0, "sequence numbers start at 1");
        PacketId {
            session,
            seq,
            payload_seed: Self::derive_seed(session, seq, run_seed),
        }
    }

    pub fn derive_seed(session: Session, seq: u32, run_seed: u64) -> u64 {
        // splitmix-style finalizer over the packed identity
        let mut z = run_seed
            ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(seq as u64 + 1))
            ^ ((session.byte() as u64) << 56);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Deterministic payload bytes (xorshift64* stream of `payload_seed`).
    pub fn payload(&self, len: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(len);
        let mut s = self.payload_seed | 1;
        while out.len() < len {
            s ^= s >> 12;
            s ^= s << 25;
            s ^= s >> 27;
            let w = s.wrapping_mul(0x2545_F491_4F6C_DD1D);
            out.extend_from_slice(&w.to_be_bytes());
        }
        out.truncate(len);
        out
    }
}

/// A premixed pair together with the reception status of its original
/// transmission (never `None`: the tuple exists only if someone heard it).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MixTuple {
    pub rcpt_star: ReceptionStatus,
    pub x: PacketId,
    pub y: PacketId,
}

impl MixTuple {
    pub fn new(rcpt_star: ReceptionStatus, x: PacketId, y: PacketId) -> Self {
        assert!(
            rcpt_star.any(),
            "a mix tuple requires at least one reception"
        );
        assert_eq!(x.session, Session::One);
        assert_eq!(y.session, Session::Two);
        MixTuple { rcpt_star, x, y }
    }
}

/// FIFO queues of the coding virtual network. The overheard queues may hold
/// packets of either session (reactive coding moves information-equivalent
/// packets across sessions).
#[derive(Clone, Debug, Default)]
pub struct VrNetworkState {
    pub q1_unheard: VecDeque<PacketId>,
    pub q2_unheard: VecDeque<PacketId>,
    pub q1_overheard: VecDeque<PacketId>,
    pub q2_overheard: VecDeque<PacketId>,
    pub mixed: VecDeque<MixTuple>,
}

impl VrNetworkState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Queue lengths in SPN order.
    pub fn lens(&self) -> [u64; 5] {
        [
            self.q1_unheard.len() as u64,
            self.q2_unheard.len() as u64,
            self.q1_overheard.len() as u64,
            self.q2_overheard.len() as u64,
            self.mixed.len() as u64,
        ]
    }

    pub fn is_empty(&self) -> bool {
        self.lens().iter().all(|&l| l == 0)
    }
}

/// The seven coding operations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CodingOp {
    NonCoding1,
    NonCoding2,
    DegenXor1,
    DegenXor2,
    Premix,
    ReactiveCode,
    ClassicXor,
}

impl CodingOp {
    pub const SEVEN: [CodingOp; 7] = [
        CodingOp::NonCoding1,
        CodingOp::NonCoding2,
        CodingOp::DegenXor1,
        CodingOp::DegenXor2,
        CodingOp::Premix,
        CodingOp::ReactiveCode,
        CodingOp::ClassicXor,
    ];

    pub const FIVE: [CodingOp; 5] = [
        CodingOp::NonCoding1,
        CodingOp::NonCoding2,
        CodingOp::DegenXor1,
        CodingOp::DegenXor2,
        CodingOp::ClassicXor,
    ];

    pub fn label(self) -> &'static str {
        match self {
            CodingOp::NonCoding1 => "NC1",
            CodingOp::NonCoding2 => "NC2",
            CodingOp::DegenXor1 => "DX1",
            CodingOp::DegenXor2 => "DX2",
            CodingOp::Premix => "PM",
            CodingOp::ReactiveCode => "RC",
            CodingOp::ClassicXor => "CX",
        }
    }

    /// Index in the seven-operation ordering.
    pub fn index7(self) -> usize {
        Self::SEVEN.iter().position(|&o| o == self).unwrap()
    }

    /// Input queues in the five-queue ordering.
    pub fn input_queues(self) -> &'static [usize] {
        match self {
            CodingOp::NonCoding1 => &[0],
            CodingOp::NonCoding2 => &[1],
            CodingOp::DegenXor1 => &[2],
            CodingOp::DegenXor2 => &[3],
            CodingOp::Premix => &[0, 1],
            CodingOp::ReactiveCode => &[4],
            CodingOp::ClassicXor => &[2, 3],
        }
    }

    pub fn output_queues(self) -> &'static [usize] {
        match self {
            CodingOp::NonCoding1 => &[2],
            CodingOp::NonCoding2 => &[3],
            CodingOp::Premix => &[4],
            CodingOp::ReactiveCode => &[2, 3],
            _ => &[],
        }
    }
}

/// What a single slot physically transmits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TxKind {
    Uncoded(PacketId),
    XorPair(PacketId, PacketId),
}

/// A coded or uncoded transmission tagged with the operation that produced
/// it; only `PM` and `CX` ever send a pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Transmission {
    pub op: CodingOp,
    pub kind: TxKind,
}

/// Form the packet the given feasible operation transmits. The queues are
/// not modified; movements happen in [`apply_outcome`] once the reception is
/// known. Panics if the operation's input queues are empty (caller bug: the
/// scheduler must check feasibility first).
pub fn encode(op: CodingOp, state: &VrNetworkState) -> Transmission {
    let kind = match op {
        CodingOp::NonCoding1 => {
            TxKind::Uncoded(*state.q1_unheard.front().expect("NC1 on empty queue"))
        }
        CodingOp::NonCoding2 => {
            TxKind::Uncoded(*state.q2_unheard.front().expect("NC2 on empty queue"))
        }
        CodingOp::DegenXor1 => {
            TxKind::Uncoded(*state.q1_overheard.front().expect("DX1 on empty queue"))
        }
        CodingOp::DegenXor2 => {
            TxKind::Uncoded(*state.q2_overheard.front().expect("DX2 on empty queue"))
        }
        CodingOp::Premix => {
            let x = *state.q1_unheard.front().expect("PM on empty Q1");
            let y = *state.q2_unheard.front().expect("PM on empty Q2");
            TxKind::XorPair(x, y)
        }
        CodingOp::ReactiveCode => {
            let tuple = state.mixed.front().expect("RC on empty mix queue");
            // resend the packet the receiver of the original sum still lacks
            match tuple.rcpt_star {
                ReceptionStatus::D1Only => TxKind::Uncoded(tuple.y),
                ReceptionStatus::D2Only | ReceptionStatus::Both => TxKind::Uncoded(tuple.x),
                ReceptionStatus::None => unreachable!("mix tuples are never unheard"),
            }
        }
        CodingOp::ClassicXor => {
            let p1 = *state
                .q1_overheard
                .front()
                .expect("CX on empty Q1_overheard");
            let p2 = *state
                .q2_overheard
                .front()
                .expect("CX on empty Q2_overheard");
            TxKind::XorPair(p1, p2)
        }
    };
    Transmission { op, kind }
}

/// Which stored packet of a mix tuple moves in a reactive-coding outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MovedPacket {
    X,
    Y,
}

/// Reactive-coding outcome for the head tuple.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MoveOutcome {
    /// Nobody heard the follow-up: the tuple stays in `Qmix`.
    Keep,
    /// The tuple leaves the network entirely.
    Leave,
    /// Remove the tuple and append the given stored packet to `Q1_overheard`.
    ToQ1Overheard(MovedPacket),
    /// Remove the tuple and append the given stored packet to `Q2_overheard`.
    ToQ2Overheard(MovedPacket),
}

/// Movement rule of reactive coding, keyed by the reception status of the
/// original premixed sum (`rcpt_star`) and of the current slot (`rcpt_now`).
pub fn reactive_move(rcpt_star: ReceptionStatus, rcpt_now: ReceptionStatus) -> MoveOutcome {
    reactive_move_in(&REACTIVE_TABLE, rcpt_star, rcpt_now)
}

/// Rows: `rcpt_now` in `[None, D1Only, D2Only, Both]`; columns: `rcpt_star`
/// in `[D1Only, D2Only, Both]`.
pub type ReactiveTable = [[MoveOutcome; 3]; 4];

pub const REACTIVE_TABLE: ReactiveTable = {
    use MoveOutcome::*;
    use MovedPacket::*;
    [
        [Keep, Keep, Keep],
        [ToQ2Overheard(Y), ToQ2Overheard(X), ToQ2Overheard(Y)],
        [ToQ1Overheard(Y), ToQ1Overheard(X), ToQ1Overheard(X)],
        [Leave, Leave, Leave],
    ]
};

/// Table lookup against an explicit rule table (exposed so the verification
/// harness can demonstrate that a corrupted table is caught by the
/// marginal-law check).
pub fn reactive_move_in(
    table: &ReactiveTable,
    rcpt_star: ReceptionStatus,
    rcpt_now: ReceptionStatus,
) -> MoveOutcome {
    assert!(rcpt_star.any(), "reactive coding requires a heard tuple");
    let row = match rcpt_now {
        ReceptionStatus::None => 0,
        ReceptionStatus::D1Only => 1,
        ReceptionStatus::D2Only => 2,
        ReceptionStatus::Both => 3,
    };
    let col = match rcpt_star {
        ReceptionStatus::D1Only => 0,
        ReceptionStatus::D2Only => 1,
        ReceptionStatus::Both => 2,
        ReceptionStatus::None => unreachable!(),
    };
    table[row][col]
}

/// Transition probabilities of a rule table under reception law `p`:
/// returns `(Prob(ToQ1Overheard), Prob(ToQ2Overheard), Prob(consumed))` for a
/// given `rcpt_star` column.
pub fn reactive_marginals_in(
    table: &ReactiveTable,
    p: &ReceptionVector,
    rcpt_star: ReceptionStatus,
) -> (f64, f64, f64) {
    let mut to_q1 = 0.0;
    let mut to_q2 = 0.0;
    let mut consumed = 0.0;
    for rcpt in ReceptionStatus::ALL {
        let prob = p.prob(rcpt);
        match reactive_move_in(table, rcpt_star, rcpt) {
            MoveOutcome::Keep => {}
            MoveOutcome::Leave => consumed += prob,
            MoveOutcome::ToQ1Overheard(_) => {
                to_q1 += prob;
                consumed += prob;
            }
            MoveOutcome::ToQ2Overheard(_) => {
                to_q2 += prob;
                consumed += prob;
            }
        }
    }
    (to_q1, to_q2, consumed)
}

/// Membership changes of the three disseminated queues caused by one slot.
/// At most one element enters and at most two leave per slot.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct VrDelta {
    pub added_q1_overheard: Option<PacketId>,
    pub removed_q1_overheard: Option<PacketId>,
    pub added_q2_overheard: Option<PacketId>,
    pub removed_q2_overheard: Option<PacketId>,
    pub added_mixed: Option<MixTuple>,
    pub removed_mixed: Option<MixTuple>,
}

/// Apply the queue movements of one executed operation given the slot's
/// reception status.
pub fn apply_outcome(op: CodingOp, rcpt: ReceptionStatus, state: &mut VrNetworkState) -> VrDelta {
    let mut delta = VrDelta::default();
    match op {
        CodingOp::NonCoding1 => {
            if rcpt.d1() {
                state.q1_unheard.pop_front();
            } else if rcpt.d2() {
                let p = state
                    .q1_unheard
                    .pop_front()
                    .expect("NC1 executed on empty queue");
                state.q1_overheard.push_back(p);
                delta.added_q1_overheard = Some(p);
            }
        }
        CodingOp::NonCoding2 => {
            if rcpt.d2() {
                state.q2_unheard.pop_front();
            } else if rcpt.d1() {
                let p = state
                    .q2_unheard
                    .pop_front()
                    .expect("NC2 executed on empty queue");
                state.q2_overheard.push_back(p);
                delta.added_q2_overheard = Some(p);
            }
        }
        CodingOp::DegenXor1 => {
            if rcpt.d1() {
                delta.removed_q1_overheard = state.q1_overheard.pop_front();
            }
        }
        CodingOp::DegenXor2 => {
            if rcpt.d2() {
                delta.removed_q2_overheard = state.q2_overheard.pop_front();
            }
        }
        CodingOp::Premix => {
            if rcpt.any() {
                let x = state
                    .q1_unheard
                    .pop_front()
                    .expect("PM executed on empty Q1");
                let y = state
                    .q2_unheard
                    .pop_front()
                    .expect("PM executed on empty Q2");
                let tuple = MixTuple::new(rcpt, x, y);
                state.mixed.push_back(tuple);
                delta.added_mixed = Some(tuple);
            }
        }
        CodingOp::ReactiveCode => {
            let tuple = *state.mixed.front().expect("RC executed on empty mix queue");
            match reactive_move(tuple.rcpt_star, rcpt) {
                MoveOutcome::Keep => {}
                MoveOutcome::Leave => {
                    delta.removed_mixed = state.mixed.pop_front();
                }
                MoveOutcome::ToQ1Overheard(which) => {
                    delta.removed_mixed = state.mixed.pop_front();
                    let p = pick(tuple, which);
                    state.q1_overheard.push_back(p);
                    delta.added_q1_overheard = Some(p);
                }
                MoveOutcome::ToQ2Overheard(which) => {
                    delta.removed_mixed = state.mixed.pop_front();
                    let p = pick(tuple, which);
                    state.q2_overheard.push_back(p);
                    delta.added_q2_overheard = Some(p);
                }
            }
        }
        CodingOp::ClassicXor => {
            // each side leaves independently when its destination hears
            if rcpt.d1() {
                delta.removed_q1_overheard = state.q1_overheard.pop_front();
            }
            if rcpt.d2() {
                delta.removed_q2_overheard = state.q2_overheard.pop_front();
            }
        }
    }
    delta
}

fn pick(tuple: MixTuple, which: MovedPacket) -> PacketId {
    match which {
        MovedPacket::X => tuple.x,
        MovedPacket::Y => tuple.y,
    }
}

/// Expected service matrices of the seven-operation network for one
/// reception law (5×7 each).
pub fn build_matrices(p: &ReceptionVector) -> (Mat, Mat) {
    let mut b_in = Mat::zeros(5, 7);
    let mut b_out = Mat::zeros(5, 7);
    let (any, d1, d2) = (p.p_any(), p.p_d1(), p.p_d2());
    let (o12, o21) = (p.p_d2_only(), p.p_d1_only()); // overheard-by-d2 / by-d1
    b_in.set(0, 0, any); // Q1_unheard -> NC1
    b_in.set(0, 4, any); // Q1_unheard -> PM
    b_in.set(1, 1, any);
    b_in.set(1, 4, any);
    b_in.set(2, 2, d1); // Q1_overheard -> DX1
    b_in.set(2, 6, d1); // Q1_overheard -> CX
    b_in.set(3, 3, d2);
    b_in.set(3, 6, d2);
    b_in.set(4, 5, any); // Qmix -> RC
    b_out.set(2, 0, o12); // NC1 -> Q1_overheard
    b_out.set(2, 5, o12); // RC  -> Q1_overheard
    b_out.set(3, 1, o21);
    b_out.set(3, 5, o21);
    b_out.set(4, 4, any); // PM -> Qmix
    (b_in, b_out)
}

/// Expected service matrices of the five-operation baseline (4×5 each);
/// queue order `[Q1_unheard, Q2_unheard, Q1_overheard, Q2_overheard]`, ops
/// `[NC1, NC2, DX1, DX2, CX]`.
pub fn build_matrices_5op(p: &ReceptionVector) -> (Mat, Mat) {
    let mut b_in = Mat::zeros(4, 5);
    let mut b_out = Mat::zeros(4, 5);
    let (any, d1, d2) = (p.p_any(), p.p_d1(), p.p_d2());
    b_in.set(0, 0, any);
    b_in.set(1, 1, any);
    b_in.set(2, 2, d1);
    b_in.set(2, 4, d1);
    b_in.set(3, 3, d2);
    b_in.set(3, 4, d2);
    b_out.set(2, 0, p.p_d2_only());
    b_out.set(3, 1, p.p_d1_only());
    (b_in, b_out)
}

fn unit_activations(n: usize) -> Vec<Vec<u8>> {
    let mut vectors = vec![vec![0u8; n]];
    for i in 0..n {
        let mut v = vec![0u8; n];
        v[i] = 1;
        vectors.push(v);
    }
    vectors
}

/// The seven-operation network as a (0,1) random SPN over the channel's
/// states.
pub fn build_7op_spec(channel: &ChannelSpec) -> Result<SpnSpec, SpnError> {
    let mut a = Mat::zeros(5, 2);
    a.set(0, 0, 1.0);
    a.set(1, 1, 1.0);
    let (b_in, b_out): (Vec<_>, Vec<_>) = channel
        .states()
        .iter()
        .map(|s| build_matrices(&s.p))
        .unzip();
    SpnSpec::new(
        a,
        channel.freqs(),
        b_in,
        b_out,
        CodingOp::SEVEN
            .iter()
            .map(|op| op.input_queues().to_vec())
            .collect(),
        CodingOp::SEVEN
            .iter()
            .map(|op| op.output_queues().to_vec())
            .collect(),
        unit_activations(7),
    )
}

/// The five-operation baseline as an SPN.
pub fn build_5op_spec(channel: &ChannelSpec) -> Result<SpnSpec, SpnError> {
    let mut a = Mat::zeros(4, 2);
    a.set(0, 0, 1.0);
    a.set(1, 1, 1.0);
    let (b_in, b_out): (Vec<_>, Vec<_>) = channel
        .states()
        .iter()
        .map(|s| build_matrices_5op(&s.p))
        .unzip();
    let sa_inputs = vec![vec![0], vec![1], vec![2], vec![3], vec![2, 3]];
    let sa_outputs = vec![vec![2], vec![3], vec![], vec![], vec![]];
    SpnSpec::new(
        a,
        channel.freqs(),
        b_in,
        b_out,
        sa_inputs,
        sa_outputs,
        unit_activations(5),
    )
}

/// Pure routing as a trivial SPN: one queue and one service activity per
/// flow, service succeeds when the intended destination hears.
pub fn build_routing_spec(channel: &ChannelSpec) -> Result<SpnSpec, SpnError> {
    let mut a = Mat::zeros(2, 2);
    a.set(0, 0, 1.0);
    a.set(1, 1, 1.0);
    let b_in: Vec<Mat> = channel
        .states()
        .iter()
        .map(|s| {
            let mut m = Mat::zeros(2, 2);
            m.set(0, 0, s.p.p_d1());
            m.set(1, 1, s.p.p_d2());
            m
        })
        .collect();
    let b_out = vec![Mat::zeros(2, 2); channel.num_states()];
    SpnSpec::new(
        a,
        channel.freqs(),
        b_in,
        b_out,
        vec![vec![0], vec![1]],
        vec![vec![], vec![]],
        unit_activations(2),
    )
}

/// Which coding network a scheme runs on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VrKind {
    SevenOp,
    FiveOp,
}

impl VrKind {
    pub fn ops(self) -> &'static [CodingOp] {
        match self {
            VrKind::SevenOp => &CodingOp::SEVEN,
            VrKind::FiveOp => &CodingOp::FIVE,
        }
    }

    pub fn queue_count(self) -> usize {
        match self {
            VrKind::SevenOp => 5,
            VrKind::FiveOp => 4,
        }
    }

    pub fn build_spec(self, channel: &ChannelSpec) -> Result<SpnSpec, SpnError> {
        match self {
            VrKind::SevenOp => build_7op_spec(channel),
            VrKind::FiveOp => build_5op_spec(channel),
        }
    }

    /// Realized service column for activating `sa` when the slot's broadcast
    /// had reception status `rcpt`. All entries of a column derive from the
    /// one shared broadcast event.
    pub fn realize(self, sa: usize, rcpt: ReceptionStatus) -> ServiceRealization {
        let k = self.queue_count();
        let mut real = ServiceRealization::idle(k);
        let op = self.ops()[sa];
        let any = u8::from(rcpt.any());
        let d1 = u8::from(rcpt.d1());
        let d2 = u8::from(rcpt.d2());
        let only2 = u8::from(rcpt == ReceptionStatus::D2Only);
        let only1 = u8::from(rcpt == ReceptionStatus::D1Only);
        match op {
            CodingOp::NonCoding1 => {
                real.bin[0] = any;
                real.bout[2] = only2;
            }
            CodingOp::NonCoding2 => {
                real.bin[1] = any;
                real.bout[3] = only1;
            }
            CodingOp::DegenXor1 => real.bin[2] = d1,
            CodingOp::DegenXor2 => real.bin[3] = d2,
            CodingOp::Premix => {
                real.bin[0] = any;
                real.bin[1] = any;
                real.bout[4] = any;
            }
            CodingOp::ReactiveCode => {
                real.bin[4] = any;
                real.bout[2] = only2;
                real.bout[3] = only1;
            }
            CodingOp::ClassicXor => {
                real.bin[2] = d1;
                real.bin[3] = d2;
            }
        }
        real
    }
}

/// [`RealizationSource`] view of one slot's broadcast outcome.
pub struct SharedReception {
    pub kind: VrKind,
    pub rcpt: ReceptionStatus,
}

impl RealizationSource for SharedReception {
    fn realize(&mut self, _spec: &SpnSpec, _state_idx: usize, sa: usize) -> ServiceRealization {
        self.kind.realize(sa, self.rcpt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ChannelState, ReceptionStatus::*};
    use proptest::prelude::*;

    fn pid(session: Session, seq: u32) -> PacketId {
        PacketId::new(session, seq, 0xFEED)
    }

    #[test]
    fn payload_is_reproducible() {
        let a = pid(Session::One, 7);
        let b = PacketId::new(Session::One, 7, 0xFEED);
        assert_eq!(a, b);
        assert_eq!(a.payload(32), b.payload(32));
        assert_ne!(a.payload(32), pid(Session::Two, 7).payload(32));
        assert_ne!(
            a.payload_seed,
            PacketId::new(Session::One, 7, 0xBEEF).payload_seed
        );
    }

    #[test]
    fn matrices_match_worked_example_state0() {
        // marginals (0.5, 0.7)
        let p = ReceptionVector::from_marginals(0.5, 0.7).unwrap();
        let (b_in, b_out) = build_matrices(&p);
        let bin_expect = [
            [0.85, 0.0, 0.0, 0.0, 0.85, 0.0, 0.0],
            [0.0, 0.85, 0.0, 0.0, 0.85, 0.0, 0.0],
            [0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.5],
            [0.0, 0.0, 0.0, 0.7, 0.0, 0.0, 0.7],
            [0.0, 0.0, 0.0, 0.0, 0.0, 0.85, 0.0],
        ];
        let bout_expect = [
            [0.0; 7],
            [0.0; 7],
            [0.35, 0.0, 0.0, 0.0, 0.0, 0.35, 0.0],
            [0.0, 0.15, 0.0, 0.0, 0.0, 0.15, 0.0],
            [0.0, 0.0, 0.0, 0.0, 0.85, 0.0, 0.0],
        ];
        for r in 0..5 {
            for c in 0..7 {
                assert!(
                    (b_in.get(r, c) - bin_expect[r][c]).abs() < 1e-12,
                    "bin[{r}][{c}]"
                );
                assert!(
                    (b_out.get(r, c) - bout_expect[r][c]).abs() < 1e-12,
                    "bout[{r}][{c}]"
                );
            }
        }
    }

    #[test]
    fn matrices_match_worked_example_state1() {
        let p = ReceptionVector::from_marginals(2.0 / 3.0, 1.0 / 3.0).unwrap();
        let (b_in, b_out) = build_matrices(&p);
        assert!((b_in.get(0, 0) - 7.0 / 9.0).abs() < 1e-12);
        assert!((b_in.get(2, 2) - 2.0 / 3.0).abs() < 1e-12);
        assert!((b_in.get(3, 3) - 1.0 / 3.0).abs() < 1e-12);
        assert!((b_in.get(4, 5) - 7.0 / 9.0).abs() < 1e-12);
        assert!((b_out.get(2, 0) - 1.0 / 9.0).abs() < 1e-12);
        assert!((b_out.get(3, 1) - 4.0 / 9.0).abs() < 1e-12);
        assert!((b_out.get(3, 5) - 4.0 / 9.0).abs() < 1e-12);
        assert!((b_out.get(4, 4) - 7.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn nothing_received_means_zero_matrices() {
        let p = ReceptionVector::new(1.0, 0.0, 0.0, 0.0).unwrap();
        let (b_in, b_out) = build_matrices(&p);
        for r in 0..5 {
            for c in 0..7 {
                assert_eq!(b_in.get(r, c), 0.0);
                assert_eq!(b_out.get(r, c), 0.0);
            }
        }
    }

    #[test]
    fn matrix_supports_match_graph() {
        let p = ReceptionVector::from_marginals(0.3, 0.9).unwrap();
        let (b_in, b_out) = build_matrices(&p);
        for (sa, op) in CodingOp::SEVEN.iter().enumerate() {
            for q in 0..5 {
                let on_in = op.input_queues().contains(&q);
                let on_out = op.output_queues().contains(&q);
                assert_eq!(b_in.get(q, sa) > 0.0, on_in, "bin support {op:?} q{q}");
                assert_eq!(b_out.get(q, sa) > 0.0, on_out, "bout support {op:?} q{q}");
            }
        }
    }

    #[test]
    fn reactive_table_cells() {
        use MoveOutcome::*;
        use MovedPacket::*;
        // nobody hears: keep, regardless of the original status
        for star in [D1Only, D2Only, Both] {
            assert_eq!(reactive_move(star, None), Keep);
            assert_eq!(reactive_move(star, Both), Leave);
        }
        assert_eq!(reactive_move(Both, D1Only), ToQ2Overheard(Y));
        assert_eq!(reactive_move(D2Only, D1Only), ToQ2Overheard(X));
        assert_eq!(reactive_move(D1Only, D1Only), ToQ2Overheard(Y));
        assert_eq!(reactive_move(D1Only, D2Only), ToQ1Overheard(Y));
        assert_eq!(reactive_move(D2Only, D2Only), ToQ1Overheard(X));
        assert_eq!(reactive_move(Both, D2Only), ToQ1Overheard(X));
    }

    #[test]
    #[should_panic]
    fn reactive_move_rejects_unheard_tuple() {
        reactive_move(None, Both);
    }

    /// The packet reactive coding moves is always one the destination-side
    /// receiver already knows, which is what lets the decoder treat the
    /// overheard queues as session-equivalent.
    #[test]
    fn reactive_moves_track_transmitted_or_decodable_packets() {
        // When the follow-up is heard by d1 only, the survivor joins
        // Q2_overheard and must be known to d1 afterwards; symmetric for d2.
        for star in [D1Only, D2Only, Both] {
            match reactive_move(star, D1Only) {
                MoveOutcome::ToQ2Overheard(_) => {}
                other => panic!("expected a Q2_overheard move, got {other:?}"),
            }
            match reactive_move(star, D2Only) {
                MoveOutcome::ToQ1Overheard(_) => {}
                other => panic!("expected a Q1_overheard move, got {other:?}"),
            }
        }
    }

    proptest! {
        /// Marginal law of the table: over a random current reception, the
        /// tuple moves to Q1_overheard w.p. p_{d2 only} and to Q2_overheard
        /// w.p. p_{d1 only}, for every rcpt_star column.
        #[test]
        fn reactive_marginal_law(a in 0.01..1.0f64, b in 0.01..1.0f64, c in 0.01..1.0f64, d in 0.01..1.0f64) {
            let sum = a + b + c + d;
            let p = ReceptionVector::new(a / sum, b / sum, c / sum, d / sum).unwrap();
            for star in [D1Only, D2Only, Both] {
                let (q1, q2, consumed) = reactive_marginals_in(&REACTIVE_TABLE, &p, star);
                prop_assert!((q1 - p.p_d2_only()).abs() < 1e-12);
                prop_assert!((q2 - p.p_d1_only()).abs() < 1e-12);
                prop_assert!((consumed - p.p_any()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn encode_picks_reactive_content_by_original_status() {
        let mut st = VrNetworkState::new();
        let x = pid(Session::One, 1);
        let y = pid(Session::Two, 1);
        st.mixed.push_back(MixTuple::new(D1Only, x, y));
        assert_eq!(encode(CodingOp::ReactiveCode, &st).kind, TxKind::Uncoded(y));
        st.mixed[0].rcpt_star = Both;
        assert_eq!(encode(CodingOp::ReactiveCode, &st).kind, TxKind::Uncoded(x));
        st.mixed[0].rcpt_star = D2Only;
        assert_eq!(encode(CodingOp::ReactiveCode, &st).kind, TxKind::Uncoded(x));
    }

    #[test]
    fn encode_premix_pairs_heads() {
        let mut st = VrNetworkState::new();
        let x = pid(Session::One, 1);
        let y = pid(Session::Two, 1);
        st.q1_unheard.push_back(x);
        st.q2_unheard.push_back(y);
        assert_eq!(encode(CodingOp::Premix, &st).kind, TxKind::XorPair(x, y));
    }

    #[test]
    fn apply_outcome_examples() {
        let x = pid(Session::One, 1);
        let y = pid(Session::Two, 1);

        // CX heard by d1 only: Q1_overheard pops, Q2_overheard untouched
        let mut st = VrNetworkState::new();
        st.q1_overheard.push_back(x);
        st.q2_overheard.push_back(y);
        apply_outcome(CodingOp::ClassicXor, D1Only, &mut st);
        assert_eq!(st.lens(), [0, 0, 0, 1, 0]);

        // PM heard by d2 only: both sources pop, one tuple appears
        let mut st = VrNetworkState::new();
        st.q1_unheard.push_back(x);
        st.q2_unheard.push_back(y);
        apply_outcome(CodingOp::Premix, D2Only, &mut st);
        assert_eq!(st.lens(), [0, 0, 0, 0, 1]);
        assert_eq!(st.mixed[0], MixTuple::new(D2Only, x, y));

        // NC1 unheard: nothing moves
        let mut st = VrNetworkState::new();
        st.q1_unheard.push_back(x);
        apply_outcome(CodingOp::NonCoding1, None, &mut st);
        assert_eq!(st.lens(), [1, 0, 0, 0, 0]);
    }

    #[test]
    fn shared_reception_matches_expectations() {
        // realized columns average to the expected matrices
        let p = ReceptionVector::from_marginals(0.6, 0.4).unwrap();
        let (b_in, b_out) = build_matrices(&p);
        for sa in 0..7 {
            for q in 0..5 {
                let mut e_in = 0.0;
                let mut e_out = 0.0;
                for rcpt in ReceptionStatus::ALL {
                    let real = VrKind::SevenOp.realize(sa, rcpt);
                    e_in += p.prob(rcpt) * real.bin[q] as f64;
                    e_out += p.prob(rcpt) * real.bout[q] as f64;
                }
                assert!((e_in - b_in.get(q, sa)).abs() < 1e-12, "bin sa {sa} q {q}");
                assert!(
                    (e_out - b_out.get(q, sa)).abs() < 1e-12,
                    "bout sa {sa} q {q}"
                );
            }
        }
    }

    #[test]
    fn specs_validate() {
        let channel = ChannelSpec::iid(vec![
            ChannelState {
                id: 0,
                freq: 0.5,
                p: ReceptionVector::from_marginals(0.5, 0.7).unwrap(),
            },
            ChannelState {
                id: 1,
                freq: 0.5,
                p: ReceptionVector::from_marginals(2.0 / 3.0, 1.0 / 3.0).unwrap(),
            },
        ])
        .unwrap();
        build_7op_spec(&channel).unwrap();
        build_5op_spec(&channel).unwrap();
        build_routing_spec(&channel).unwrap();
    }
}
