//! Pure-routing baseline: queue-length-weighted flow selection, uncoded
//! transmissions, a packet leaves when its intended destination hears it.

use super::{CqChecksum, SampleRow, SimError, TrialConfig, TrialStats};
use crate::rng::{substream, Stream};
use crate::vnet::{PacketId, Session};
use std::collections::VecDeque;

pub fn run_routing_bp(cfg: &TrialConfig) -> Result<TrialStats, SimError> {
    let channel = cfg.channel.as_ref().expect("validated");
    let mut ch_rng = substream(cfg.seed, Stream::Channel);
    let mut arr_rng = substream(cfg.seed, Stream::Arrivals);
    let mut rcpt_rng = substream(cfg.reception_seed.unwrap_or(cfg.seed), Stream::Reception);

    let mut queues: [VecDeque<PacketId>; 2] = [VecDeque::new(), VecDeque::new()];
    let mut arrivals = (0u64, 0u64);
    let mut delivered = (0u64, 0u64);
    let mut next_seq = (1u32, 1u32);
    let mut checksum = CqChecksum::new();
    let mut samples = Vec::new();
    let mut max_backlog = 0u64;

    for slot in 0..cfg.horizon {
        let c = channel.sample_state(slot, &mut ch_rng);
        checksum.update(c);
        let p = &channel.states()[c].p;
        let (a1, a2) = cfg.arrivals.sample(&mut arr_rng);
        let rcpt = p.sample(&mut rcpt_rng);

        // serve the flow with the larger backlog-weighted delivery chance
        let w1 = queues[0].len() as f64 * p.p_d1();
        let w2 = queues[1].len() as f64 * p.p_d2();
        let flow = if w1 <= 0.0 && w2 <= 0.0 {
            None
        } else if w1 >= w2 {
            Some(0)
        } else {
            Some(1)
        };
        if let Some(f) = flow {
            let heard = if f == 0 { rcpt.d1() } else { rcpt.d2() };
            if heard {
                let p = queues[f].pop_front().expect("nonempty by weight rule");
                let expect = PacketId::derive_seed(p.session, p.seq, cfg.seed);
                if p.payload_seed != expect {
                    return Err(SimError::Invariant {
                        what: "delivered payload matches the original",
                        slot,
                        dump: format!("{p:?}"),
                    });
                }
                if f == 0 {
                    delivered.0 += 1;
                } else {
                    delivered.1 += 1;
                }
            }
        }

        for _ in 0..a1 {
            queues[0].push_back(PacketId::new(Session::One, next_seq.0, cfg.seed));
            next_seq.0 += 1;
        }
        for _ in 0..a2 {
            queues[1].push_back(PacketId::new(Session::Two, next_seq.1, cfg.seed));
            next_seq.1 += 1;
        }
        arrivals.0 += a1 as u64;
        arrivals.1 += a2 as u64;

        // conservation: every arrived packet is queued or delivered
        if arrivals.0 != delivered.0 + queues[0].len() as u64
            || arrivals.1 != delivered.1 + queues[1].len() as u64
        {
            return Err(SimError::Invariant {
                what: "session information conservation",
                slot,
                dump: format!(
                    "arrivals {arrivals:?} delivered {delivered:?} lens ({}, {})",
                    queues[0].len(),
                    queues[1].len()
                ),
            });
        }

        let backlog = (queues[0].len() + queues[1].len()) as u64;
        max_backlog = max_backlog.max(backlog);
        if (slot + 1) % cfg.sampling_stride == 0 || slot + 1 == cfg.horizon {
            samples.push(SampleRow {
                t: (slot + 1) as f64,
                backlog,
                delivered1: delivered.0,
                delivered2: delivered.1,
                buf_d1: 0,
                buf_d2: 0,
                queue_lens: if cfg.record_queues {
                    vec![queues[0].len() as u64, queues[1].len() as u64]
                } else {
                    Vec::new()
                },
            });
        }
    }

    Ok(TrialStats {
        scheme: cfg.scheme,
        seed: cfg.seed,
        final_backlog: (queues[0].len() + queues[1].len()) as u64,
        max_backlog,
        arrivals,
        delivered,
        cq_checksum: checksum.value(),
        slots: cfg.horizon,
        samples,
        ledger_samples: Vec::new(),
        diagnostics: Default::default(),
        final_scheduler: None,
    })
}
