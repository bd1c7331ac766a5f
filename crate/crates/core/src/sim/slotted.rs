//! Slotted-time trials of the coding schemes: per-slot loop over channel
//! sampling, arrivals, scheduling, transmission, decoding and bookkeeping.

use super::{CqChecksum, LedgerSample, SampleRow, SimError, TrialConfig, TrialStats};
use crate::channel::ReceptionStatus;
use crate::receiver::{Dest, ReceiverBuffer};
use crate::rng::{substream, Stream};
use crate::sim::SchemeId;
use crate::spn::{self, BackpressureMode, InfeasiblePolicy, SchedulerState, LEDGER_TOL};
use crate::vnet::{
    self, CodingOp, PacketId, Session, SharedReception, VrDelta, VrKind, VrNetworkState,
};
use std::collections::HashSet;

/// Everything one transmission changed outside the scheduler ledgers.
#[derive(Clone, Copy, Debug, Default)]
pub(super) struct TxEffects {
    delta: VrDelta,
    stored_d1: Option<PacketId>,
    stored_d2: Option<PacketId>,
}

pub(super) struct CodingTrial {
    pub kind: VrKind,
    pub spec: crate::spn::SpnSpec,
    pub sched: SchedulerState,
    pub vr: VrNetworkState,
    pub d1: ReceiverBuffer,
    pub d2: ReceiverBuffer,
    pub arrivals: (u64, u64),
    pub next_seq: (u32, u32),
    pub run_seed: u64,
    /// Mirrors of the three disseminated queues, maintained incrementally.
    set_q1_over: HashSet<PacketId>,
    set_q2_over: HashSet<PacketId>,
    set_mixed: HashSet<(PacketId, PacketId)>,
}

impl CodingTrial {
    pub fn new(kind: VrKind, spec: crate::spn::SpnSpec, run_seed: u64) -> Self {
        let queues = spec.queues;
        CodingTrial {
            kind,
            spec,
            sched: SchedulerState::new(queues),
            vr: VrNetworkState::new(),
            d1: ReceiverBuffer::new(Dest::D1),
            d2: ReceiverBuffer::new(Dest::D2),
            arrivals: (0, 0),
            next_seq: (1, 1),
            run_seed,
            set_q1_over: HashSet::new(),
            set_q2_over: HashSet::new(),
            set_mixed: HashSet::new(),
        }
    }

    pub fn push_arrivals(&mut self, a1: u32, a2: u32) {
        for _ in 0..a1 {
            self.vr.q1_unheard.push_back(PacketId::new(
                Session::One,
                self.next_seq.0,
                self.run_seed,
            ));
            self.next_seq.0 += 1;
        }
        for _ in 0..a2 {
            self.vr.q2_unheard.push_back(PacketId::new(
                Session::Two,
                self.next_seq.1,
                self.run_seed,
            ));
            self.next_seq.1 += 1;
        }
        self.arrivals.0 += a1 as u64;
        self.arrivals.1 += a2 as u64;
    }

    /// Transmit with the given operation, let whoever heard it decode, and
    /// apply the queue movements.
    pub(super) fn transmit(
        &mut self,
        sa: usize,
        rcpt: ReceptionStatus,
        slot: u64,
    ) -> Result<TxEffects, SimError> {
        let op = self.kind.ops()[sa];
        let tx = vnet::encode(op, &self.vr);
        let mut effects = TxEffects::default();
        if rcpt.d1() {
            let outcome = self
                .d1
                .on_receive(&tx)
                .map_err(|source| SimError::Codec { slot, source })?;
            verify_payloads(&outcome.delivered, Session::One, self.run_seed, slot)?;
            effects.stored_d1 = outcome.stored_uncoded;
        }
        if rcpt.d2() {
            let outcome = self
                .d2
                .on_receive(&tx)
                .map_err(|source| SimError::Codec { slot, source })?;
            verify_payloads(&outcome.delivered, Session::Two, self.run_seed, slot)?;
            effects.stored_d2 = outcome.stored_uncoded;
        }
        effects.delta = vnet::apply_outcome(op, rcpt, &mut self.vr);
        self.apply_delta(&effects.delta);
        Ok(effects)
    }

    fn apply_delta(&mut self, delta: &VrDelta) {
        if let Some(p) = delta.added_q1_overheard {
            self.set_q1_over.insert(p);
        }
        if let Some(p) = delta.added_q2_overheard {
            self.set_q2_over.insert(p);
        }
        if let Some(t) = delta.added_mixed {
            self.set_mixed.insert((t.x, t.y));
        }
        if let Some(p) = delta.removed_q1_overheard {
            self.set_q1_over.remove(&p);
        }
        if let Some(p) = delta.removed_q2_overheard {
            self.set_q2_over.remove(&p);
        }
        if let Some(t) = delta.removed_mixed {
            self.set_mixed.remove(&(t.x, t.y));
        }
    }

    /// Per-slot pruning in O(changes): an entry is dropped exactly when the
    /// last list element supporting its keep-condition disappears, which can
    /// only happen through this slot's removals (or because it was stored
    /// dead this slot). Produces the same buffers as a full prune against
    /// the current lists.
    pub(super) fn fast_prune(&mut self, effects: &TxEffects) {
        if let Some(p) = effects.delta.removed_q1_overheard {
            self.d2.drop_uncoded(&p);
            if let Some(x) = self.d1.sum_x_of(&p) {
                if !self.set_mixed.contains(&(x, p)) {
                    self.d1.remove_sum(&x, &p);
                }
            }
        }
        if let Some(p) = effects.delta.removed_q2_overheard {
            self.d1.drop_uncoded(&p);
            if let Some(y) = self.d2.sum_y_of(&p) {
                if !self.set_mixed.contains(&(p, y)) {
                    self.d2.remove_sum(&p, &y);
                }
            }
        }
        if let Some(t) = effects.delta.removed_mixed {
            if !self.set_q1_over.contains(&t.y) {
                self.d1.remove_sum(&t.x, &t.y);
            }
            if !self.set_q2_over.contains(&t.x) {
                self.d2.remove_sum(&t.x, &t.y);
            }
        }
        if let Some(p) = effects.stored_d1 {
            if !self.set_q2_over.contains(&p) {
                self.d1.drop_uncoded(&p);
            }
        }
        if let Some(p) = effects.stored_d2 {
            if !self.set_q1_over.contains(&p) {
                self.d2.drop_uncoded(&p);
            }
        }
    }

    /// Full list dissemination and batch pruning (used at coarser pruning
    /// periods and as the reference semantics).
    pub fn disseminate_and_prune(&mut self) {
        self.d1
            .prune(&self.set_q1_over, &self.set_q2_over, &self.set_mixed);
        self.d2
            .prune(&self.set_q1_over, &self.set_q2_over, &self.set_mixed);
    }

    pub fn dump(&self) -> String {
        format!(
            "vr lens {:?}\nledger Q {:?}\nQ_inter {:?}\nq_inter {:?}\nq {:?}\nD {:?}\nN_NA {:?}\narrivals {:?} delivered ({}, {})\nbuffers d1 {} d2 {}",
            self.vr.lens(),
            self.sched.q_actual,
            self.sched.q_inter_actual,
            self.sched.q_inter_virtual,
            self.sched.q_virtual,
            self.sched.deficit,
            self.sched.null_activity,
            self.arrivals,
            self.d1.delivered_count(),
            self.d2.delivered_count(),
            self.d1.stored(),
            self.d2.stored(),
        )
    }

    /// Every per-slot invariant; `prune_ran` gates the buffer bound.
    #[allow(clippy::needless_range_loop)]
    pub fn check_invariants(
        &self,
        slot: u64,
        prev_deficit: &[f64],
        prune_ran: bool,
    ) -> Result<(), SimError> {
        let fail = |what: &'static str| -> SimError {
            SimError::Invariant {
                what,
                slot,
                dump: self.dump(),
            }
        };
        // packet queues, their set mirrors and the actual-ledger agree
        let lens = self.vr.lens();
        if lens.iter().zip(&self.sched.q_actual).any(|(l, q)| l != q) {
            return Err(fail("vr queue lengths match the actual ledger"));
        }
        if self.set_q1_over.len() as u64 != lens[2]
            || self.set_q2_over.len() as u64 != lens[3]
            || (self.spec.queues == 5 && self.set_mixed.len() as u64 != lens[4])
        {
            return Err(fail("list mirrors match the queues"));
        }
        for k in 0..self.spec.queues {
            let identity = self.sched.q_inter_actual[k] - self.sched.q_inter_virtual[k];
            if (identity - self.sched.deficit[k]).abs() > LEDGER_TOL {
                return Err(fail("deficit equals Q_inter - q_inter"));
            }
            if self.sched.deficit[k] < prev_deficit[k] - LEDGER_TOL {
                return Err(fail("deficit is non-decreasing"));
            }
            if (self.sched.null_activity[k] as f64) > self.sched.deficit[k] + LEDGER_TOL {
                return Err(fail("null-activity count is bounded by the deficit"));
            }
            if self.sched.q_inter_actual[k] < -LEDGER_TOL {
                return Err(fail("intermediate actual queue is nonnegative"));
            }
        }
        // information conservation per session
        let mixed = if self.spec.queues == 5 { lens[4] } else { 0 };
        let s1 = self.d1.delivered_count() + lens[0] + lens[2] + mixed;
        let s2 = self.d2.delivered_count() + lens[1] + lens[3] + mixed;
        if s1 != self.arrivals.0 || s2 != self.arrivals.1 {
            return Err(fail("session information conservation"));
        }
        if prune_ran {
            let (l1, l2, lm) = (lens[2] as usize, lens[3] as usize, mixed as usize);
            if !self.d1.check_buffer_bound(l1, l2, lm) || !self.d2.check_buffer_bound(l1, l2, lm) {
                return Err(fail("receiver buffer bound"));
            }
        }
        Ok(())
    }
}

fn verify_payloads(
    delivered: &[PacketId],
    session: Session,
    run_seed: u64,
    slot: u64,
) -> Result<(), SimError> {
    for p in delivered {
        let expect = PacketId::derive_seed(p.session, p.seq, run_seed);
        if p.session != session || p.payload_seed != expect {
            return Err(SimError::Invariant {
                what: "delivered payload matches the original",
                slot,
                dump: format!("{p:?}"),
            });
        }
    }
    Ok(())
}

pub fn run_slotted(cfg: &TrialConfig) -> Result<TrialStats, SimError> {
    let channel = cfg.channel.as_ref().expect("validated");
    let (kind, mode) = match cfg.scheme {
        SchemeId::FiveOpDmw => (VrKind::FiveOp, BackpressureMode::InterVirtual),
        SchemeId::SevenOpDmwQ => (VrKind::SevenOp, BackpressureMode::Virtual),
        SchemeId::SevenOpDmwQinter => (VrKind::SevenOp, BackpressureMode::InterVirtual),
        other => panic!("run_slotted cannot run {other:?}"),
    };
    let spec = kind.build_spec(channel)?;
    let mut trial = CodingTrial::new(kind, spec, cfg.seed);

    let mut ch_rng = substream(cfg.seed, Stream::Channel);
    let mut arr_rng = substream(cfg.seed, Stream::Arrivals);
    let mut rcpt_rng = substream(cfg.reception_seed.unwrap_or(cfg.seed), Stream::Reception);

    let mut checksum = CqChecksum::new();
    let mut samples = Vec::new();
    let mut ledger_samples = Vec::new();
    let mut diagnostics = crate::spn::DiagnosticsLog::default();
    let mut max_backlog = 0u64;
    let mut prev_deficit = vec![0.0; trial.spec.queues];
    let fast_prune = cfg.pruning_period == 1 && !cfg.batch_prune;

    let mut slot = 0u64;
    let drain_cap = cfg.horizon.saturating_mul(50);
    loop {
        let draining = slot >= cfg.horizon;
        if draining && (!cfg.drain || trial.vr.is_empty()) {
            break;
        }
        if draining && slot >= cfg.horizon + drain_cap {
            return Err(SimError::DrainStalled {
                remaining: trial.sched.backlog(),
            });
        }

        let c = channel.sample_state(slot, &mut ch_rng);
        checksum.update(c);
        let (a1, a2) = if draining {
            (0, 0)
        } else {
            cfg.arrivals.sample(&mut arr_rng)
        };
        let rcpt = channel.states()[c].p.sample(&mut rcpt_rng);

        let preferred = if draining {
            drain_choice(&trial)
        } else {
            let lens = match mode {
                BackpressureMode::Virtual => &trial.sched.q_virtual,
                BackpressureMode::InterVirtual => &trial.sched.q_inter_virtual,
            };
            let d = spn::backpressure(&trial.spec.b_in[c], &trial.spec.b_out[c], lens);
            spn::select_preferred(&d, &trial.spec.allowed)
        };
        let executed = if spn::is_feasible(&trial.spec, preferred, &trial.sched.q_actual) {
            preferred
        } else {
            match cfg.fallback {
                InfeasiblePolicy::Idle => None,
                InfeasiblePolicy::FirstFeasible => {
                    spn::first_feasible(&trial.spec, &trial.sched.q_actual)
                }
            }
        };

        let effects = match executed {
            Some(sa) => trial.transmit(sa, rcpt, slot)?,
            None => TxEffects::default(),
        };
        let mut source = SharedReception { kind, rcpt };
        spn::advance_ledgers(
            &mut trial.sched,
            &trial.spec,
            c,
            &[a1, a2],
            preferred,
            executed,
            &mut source,
        );
        trial.push_arrivals(a1, a2);

        let prune_ran = if fast_prune {
            trial.fast_prune(&effects);
            true
        } else if (slot + 1).is_multiple_of(cfg.pruning_period) {
            trial.disseminate_and_prune();
            true
        } else {
            false
        };
        trial.check_invariants(slot, &prev_deficit, prune_ran && cfg.pruning_period == 1)?;
        prev_deficit.copy_from_slice(&trial.sched.deficit);

        max_backlog = max_backlog.max(trial.sched.backlog());
        if (slot + 1).is_multiple_of(cfg.sampling_stride) || slot + 1 == cfg.horizon {
            samples.push(sample_row(&trial, slot, cfg.record_queues));
            if cfg.record_ledgers {
                ledger_samples.push(LedgerSample {
                    t: slot + 1,
                    q_virtual: trial.sched.q_virtual.clone(),
                    q_inter_virtual: trial.sched.q_inter_virtual.clone(),
                });
                diagnostics.record(&trial.sched);
            }
        }
        slot += 1;
    }

    Ok(TrialStats {
        scheme: cfg.scheme,
        seed: cfg.seed,
        final_backlog: trial.sched.backlog(),
        max_backlog,
        arrivals: trial.arrivals,
        delivered: (trial.d1.delivered_count(), trial.d2.delivered_count()),
        cq_checksum: checksum.value(),
        slots: slot,
        samples,
        ledger_samples,
        diagnostics,
        final_scheduler: Some(trial.sched),
    })
}

fn sample_row(trial: &CodingTrial, slot: u64, record_queues: bool) -> SampleRow {
    SampleRow {
        t: (slot + 1) as f64,
        backlog: trial.sched.backlog(),
        delivered1: trial.d1.delivered_count(),
        delivered2: trial.d2.delivered_count(),
        buf_d1: trial.d1.stored() as u64,
        buf_d2: trial.d2.stored() as u64,
        queue_lens: if record_queues {
            trial.sched.q_actual.clone()
        } else {
            Vec::new()
        },
    }
}

/// Work-conserving drain order: coded deliveries first, fresh packets last,
/// premixing excluded (it would re-enqueue work).
fn drain_choice(trial: &CodingTrial) -> Option<usize> {
    const ORDER: [CodingOp; 6] = [
        CodingOp::ClassicXor,
        CodingOp::ReactiveCode,
        CodingOp::DegenXor1,
        CodingOp::DegenXor2,
        CodingOp::NonCoding1,
        CodingOp::NonCoding2,
    ];
    let ops = trial.kind.ops();
    for op in ORDER {
        if let Some(sa) = ops.iter().position(|&o| o == op) {
            if spn::is_feasible(&trial.spec, Some(sa), &trial.sched.q_actual) {
                return Some(sa);
            }
        }
    }
    None
}
