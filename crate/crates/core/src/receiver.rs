//! Receiver-side decoding and buffer management.
//!
//! Each destination keeps uncoded packets and stored XOR sums, decodes every
//! transmission it hears according to the operation that produced it, and
//! periodically prunes its buffer against the source's current queue lists.
//! With per-slot pruning the buffer occupancy is provably bounded by the
//! total length of the three coding queues.

use crate::vnet::{CodingOp, PacketId, Session, Transmission, TxKind};
use std::collections::{HashMap, HashSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CodecError {
    #[error("{owner:?} is missing the stored sum needed to decode {packet:?}")]
    MissingSum { owner: Dest, packet: PacketId },
    #[error("{owner:?} is missing the known counterpart {packet:?} of an XOR")]
    MissingCounterpart { owner: Dest, packet: PacketId },
    #[error("packet {0:?} delivered twice")]
    DuplicateDelivery(PacketId),
    #[error("{owner:?} asked to deliver foreign-session packet {packet:?}")]
    WrongSession { owner: Dest, packet: PacketId },
}

/// The two destinations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dest {
    D1,
    D2,
}

impl Dest {
    pub fn session(self) -> Session {
        match self {
            Dest::D1 => Session::One,
            Dest::D2 => Session::Two,
        }
    }
}

/// What one received transmission produced: packets passed to the upper
/// layer and the uncoded entry (at most one per reception) added to the
/// buffer.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DecodeOutcome {
    pub delivered: Vec<PacketId>,
    pub stored_uncoded: Option<PacketId>,
}

/// Decoding state of one destination.
#[derive(Clone, Debug)]
pub struct ReceiverBuffer {
    owner: Dest,
    uncoded: HashSet<PacketId>,
    /// Stored sums `[x + y]`, keyed both ways for O(1) partner lookup. A
    /// packet participates in at most one premixed pair, so the keys are
    /// unique.
    sum_by_x: HashMap<PacketId, PacketId>,
    sum_by_y: HashMap<PacketId, PacketId>,
    delivered: HashSet<PacketId>,
    delivered_count: u64,
}

impl ReceiverBuffer {
    pub fn new(owner: Dest) -> Self {
        ReceiverBuffer {
            owner,
            uncoded: HashSet::new(),
            sum_by_x: HashMap::new(),
            sum_by_y: HashMap::new(),
            delivered: HashSet::new(),
            delivered_count: 0,
        }
    }

    pub fn owner(&self) -> Dest {
        self.owner
    }

    pub fn delivered_count(&self) -> u64 {
        self.delivered_count
    }

    pub fn delivered(&self) -> &HashSet<PacketId> {
        &self.delivered
    }

    pub fn knows(&self, p: &PacketId) -> bool {
        self.uncoded.contains(p)
    }

    /// Stored packets: uncoded entries plus sums.
    pub fn stored(&self) -> usize {
        self.uncoded.len() + self.sum_by_x.len()
    }

    pub fn uncoded_len(&self) -> usize {
        self.uncoded.len()
    }

    pub fn sums_len(&self) -> usize {
        self.sum_by_x.len()
    }

    /// Counterpart stored with `y` in a sum, if any.
    pub fn sum_x_of(&self, y: &PacketId) -> Option<PacketId> {
        self.sum_by_y.get(y).copied()
    }

    /// Counterpart stored with `x` in a sum, if any.
    pub fn sum_y_of(&self, x: &PacketId) -> Option<PacketId> {
        self.sum_by_x.get(x).copied()
    }

    /// Drop one stored sum; no-op when absent.
    pub fn remove_sum(&mut self, x: &PacketId, y: &PacketId) {
        if self.sum_by_x.get(x) == Some(y) {
            self.sum_by_x.remove(x);
            self.sum_by_y.remove(y);
        }
    }

    /// Drop one uncoded entry; no-op when absent.
    pub fn drop_uncoded(&mut self, p: &PacketId) {
        self.uncoded.remove(p);
    }

    fn deliver(&mut self, p: PacketId, out: &mut Vec<PacketId>) -> Result<(), CodecError> {
        if p.session != self.owner.session() {
            return Err(CodecError::WrongSession {
                owner: self.owner,
                packet: p,
            });
        }
        if !self.delivered.insert(p) {
            return Err(CodecError::DuplicateDelivery(p));
        }
        self.delivered_count += 1;
        out.push(p);
        Ok(())
    }

    fn store_sum(&mut self, x: PacketId, y: PacketId) {
        self.sum_by_x.insert(x, y);
        self.sum_by_y.insert(y, x);
    }

    /// Partner of `p` in a stored sum, from this owner's decode direction:
    /// the packet that together with `p` reconstructs the sum.
    fn sum_partner(&self, p: &PacketId) -> Option<PacketId> {
        match p.session {
            Session::One => self.sum_by_x.get(p).copied(),
            Session::Two => self.sum_by_y.get(p).copied(),
        }
    }

    /// Process a transmission this destination actually received.
    pub fn on_receive(&mut self, tx: &Transmission) -> Result<DecodeOutcome, CodecError> {
        let mut out = Vec::new();
        let mut stored = None;
        let mut keep = |set: &mut HashSet<PacketId>, p: PacketId| {
            set.insert(p);
            stored = Some(p);
        };
        match (tx.op, tx.kind) {
            // fresh uncoded packet: deliver if it is ours, otherwise keep it
            // around to subtract from future XORs
            (CodingOp::NonCoding1, TxKind::Uncoded(p))
            | (CodingOp::NonCoding2, TxKind::Uncoded(p)) => {
                if p.session == self.owner.session() {
                    self.deliver(p, &mut out)?;
                } else {
                    keep(&mut self.uncoded, p);
                }
            }
            // premixed sum: store it; nothing is decodable yet
            (CodingOp::Premix, TxKind::XorPair(x, y)) => {
                self.store_sum(x, y);
            }
            // reactive follow-up
            (CodingOp::ReactiveCode, TxKind::Uncoded(p)) => {
                if p.session == self.owner.session() {
                    // our packet arrived directly
                    self.deliver(p, &mut out)?;
                    if let Some(partner) = self.sum_partner(&p) {
                        // the stored sum now reveals the other session's
                        // packet; keep it for future subtraction
                        keep(&mut self.uncoded, partner);
                    } else {
                        keep(&mut self.uncoded, p);
                    }
                } else {
                    // the foreign packet plus the stored sum decode ours
                    let partner = self.sum_partner(&p).ok_or(CodecError::MissingSum {
                        owner: self.owner,
                        packet: p,
                    })?;
                    self.deliver(partner, &mut out)?;
                    keep(&mut self.uncoded, p);
                }
            }
            (CodingOp::DegenXor1, TxKind::Uncoded(p)) => match self.owner {
                Dest::D1 => self.decode_own_side(p, &mut out)?,
                // everything in Q1_overheard is already known to d2
                Dest::D2 => {}
            },
            (CodingOp::DegenXor2, TxKind::Uncoded(p)) => match self.owner {
                Dest::D2 => self.decode_own_side(p, &mut out)?,
                Dest::D1 => {}
            },
            (CodingOp::ClassicXor, TxKind::XorPair(p1, p2)) => {
                // subtract the counterpart from the other overheard queue,
                // which this destination is guaranteed to know already
                let (own_side, known) = match self.owner {
                    Dest::D1 => (p1, p2),
                    Dest::D2 => (p2, p1),
                };
                if !self.uncoded.contains(&known) {
                    return Err(CodecError::MissingCounterpart {
                        owner: self.owner,
                        packet: known,
                    });
                }
                self.decode_own_side(own_side, &mut out)?;
            }
            (op, kind) => unreachable!("malformed transmission {op:?} {kind:?}"),
        }
        Ok(DecodeOutcome {
            delivered: out,
            stored_uncoded: stored,
        })
    }

    /// A packet from this destination's overheard queue arrived (directly or
    /// after XOR subtraction): deliver it, decoding through a stored sum if
    /// it is a foreign-session packet.
    fn decode_own_side(&mut self, p: PacketId, out: &mut Vec<PacketId>) -> Result<(), CodecError> {
        if p.session == self.owner.session() {
            self.deliver(p, out)
        } else {
            let partner = self.sum_partner(&p).ok_or(CodecError::MissingSum {
                owner: self.owner,
                packet: p,
            })?;
            self.deliver(partner, out)
        }
    }

    /// Drop everything the source's current queue lists can no longer use.
    ///
    /// For d1: uncoded packets survive only while listed in `Q2_overheard`;
    /// a sum survives while its tuple is still mixed or its y-side packet is
    /// still listed in `Q1_overheard`. Symmetric for d2.
    pub fn prune(
        &mut self,
        q1_overheard: &HashSet<PacketId>,
        q2_overheard: &HashSet<PacketId>,
        mixed: &HashSet<(PacketId, PacketId)>,
    ) {
        let keep_list = match self.owner {
            Dest::D1 => q2_overheard,
            Dest::D2 => q1_overheard,
        };
        self.uncoded.retain(|p| keep_list.contains(p));
        let keep_sum = |x: &PacketId, y: &PacketId| match self.owner {
            Dest::D1 => mixed.contains(&(*x, *y)) || q1_overheard.contains(y),
            Dest::D2 => mixed.contains(&(*x, *y)) || q2_overheard.contains(x),
        };
        let retained: Vec<(PacketId, PacketId)> = self
            .sum_by_x
            .iter()
            .filter(|(x, y)| keep_sum(x, y))
            .map(|(x, y)| (*x, *y))
            .collect();
        self.sum_by_x.clear();
        self.sum_by_y.clear();
        for (x, y) in retained {
            self.store_sum(x, y);
        }
    }

    /// Buffer-occupancy bound that holds at every slot under per-slot
    /// pruning: uncoded entries are bounded by the opposite overheard queue,
    /// sums by the mixed queue plus the own-side overheard queue.
    pub fn check_buffer_bound(
        &self,
        len_q1_over: usize,
        len_q2_over: usize,
        len_mixed: usize,
    ) -> bool {
        let (uncoded_cap, sums_cap) = match self.owner {
            Dest::D1 => (len_q2_over, len_mixed + len_q1_over),
            Dest::D2 => (len_q1_over, len_mixed + len_q2_over),
        };
        self.uncoded.len() <= uncoded_cap
            && self.sum_by_x.len() <= sums_cap
            && self.stored() <= len_q1_over + len_q2_over + len_mixed
    }
}
