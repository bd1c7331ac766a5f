//! Continuous-time rate-adaptation trials: per-transmission choice among
//! (code rate, modulation) combinations with distinct durations, duration-
//! normalized backpressure, and Poisson arrivals accumulated over each
//! transmission.

use super::{SampleRow, SimError, TrialConfig, TrialStats};
use crate::mat::Mat;
use crate::rng::{sample_poisson, substream, Stream};
use crate::sim::slotted::CodingTrial;
use crate::spn::{self, SpnSpec};
use crate::vnet::{self, SharedReception, VrKind};

/// The combos double as the "channel states" of one SPN spec: state `i`
/// holds combo `i`'s expected service matrices.
fn combos_spec(cfg: &TrialConfig) -> Result<SpnSpec, SimError> {
    let mut a = Mat::zeros(5, 2);
    a.set(0, 0, 1.0);
    a.set(1, 1, 1.0);
    let n = cfg.combos.len();
    let (b_in, b_out): (Vec<_>, Vec<_>) = cfg
        .combos
        .iter()
        .map(|combo| vnet::build_matrices(&combo.p))
        .unzip();
    let spec = SpnSpec::new(
        a,
        vec![1.0 / n as f64; n],
        b_in,
        b_out,
        vnet::CodingOp::SEVEN
            .iter()
            .map(|op| op.input_queues().to_vec())
            .collect(),
        vnet::CodingOp::SEVEN
            .iter()
            .map(|op| op.output_queues().to_vec())
            .collect(),
        {
            let mut vs = vec![vec![0u8; 7]];
            for i in 0..7 {
                let mut v = vec![0u8; 7];
                v[i] = 1;
                vs.push(v);
            }
            vs
        },
    )?;
    Ok(spec)
}

pub fn run_rate_adaptation(cfg: &TrialConfig) -> Result<TrialStats, SimError> {
    let spec = combos_spec(cfg)?;
    let mut trial = CodingTrial::new(VrKind::SevenOp, spec, cfg.seed);
    let mut arr_rng = substream(cfg.seed, Stream::Arrivals);
    let mut rcpt_rng = substream(cfg.reception_seed.unwrap_or(cfg.seed), Stream::Reception);

    let min_duration = cfg
        .combos
        .iter()
        .map(|c| c.duration)
        .fold(f64::INFINITY, f64::min);
    let horizon = cfg.horizon as f64;
    let mut clock = 0.0f64;
    let mut event = 0u64;
    let mut samples = Vec::new();
    let mut max_backlog = 0u64;
    let mut prev_deficit = vec![0.0; 5];

    while clock < horizon {
        // preferred (combo, op) maximizes backpressure per unit time over
        // the intermediate virtual queues
        let mut best: Option<(usize, usize, f64)> = None;
        for (i, combo) in cfg.combos.iter().enumerate() {
            let d = spn::backpressure(
                &trial.spec.b_in[i],
                &trial.spec.b_out[i],
                &trial.sched.q_inter_virtual,
            );
            for &sa in &trial.spec.allowed {
                let v = d[sa] / combo.duration;
                if best.is_none_or(|(_, _, bv)| v > bv) {
                    best = Some((i, sa, v));
                }
            }
        }
        let preferred = match best {
            Some((i, sa, v)) if v > 0.0 => Some((i, sa)),
            _ => None,
        };

        let (combo_idx, chosen, executed, duration) = match preferred {
            None => (0, None, None, min_duration),
            Some((i, sa)) => {
                if spn::is_feasible(&trial.spec, Some(sa), &trial.sched.q_actual) {
                    (i, Some(sa), Some(sa), cfg.combos[i].duration)
                } else {
                    // infeasible preferred choice idles for the shortest
                    // transmission quantum, ledgers still advance below
                    (i, Some(sa), None, min_duration)
                }
            }
        };

        let rcpt = if chosen.is_some() {
            cfg.combos[combo_idx].p.sample(&mut rcpt_rng)
        } else {
            crate::channel::ReceptionStatus::None
        };
        let effects = match executed {
            Some(sa) => trial.transmit(sa, rcpt, event)?,
            None => Default::default(),
        };
        let a1 = sample_poisson(&mut arr_rng, cfg.arrivals.rate1 * duration);
        let a2 = sample_poisson(&mut arr_rng, cfg.arrivals.rate2 * duration);
        let mut source = SharedReception {
            kind: VrKind::SevenOp,
            rcpt,
        };
        spn::advance_ledgers(
            &mut trial.sched,
            &trial.spec,
            combo_idx,
            &[a1, a2],
            chosen,
            executed,
            &mut source,
        );
        trial.push_arrivals(a1, a2);

        let prune_ran = if cfg.pruning_period == 1 && !cfg.batch_prune {
            trial.fast_prune(&effects);
            true
        } else if (event + 1).is_multiple_of(cfg.pruning_period) {
            trial.disseminate_and_prune();
            true
        } else {
            false
        };
        trial.check_invariants(event, &prev_deficit, prune_ran && cfg.pruning_period == 1)?;
        prev_deficit.copy_from_slice(&trial.sched.deficit);

        clock += duration;
        event += 1;
        max_backlog = max_backlog.max(trial.sched.backlog());
        if event.is_multiple_of(cfg.sampling_stride) || clock >= horizon {
            samples.push(SampleRow {
                t: clock,
                backlog: trial.sched.backlog(),
                delivered1: trial.d1.delivered_count(),
                delivered2: trial.d2.delivered_count(),
                buf_d1: trial.d1.stored() as u64,
                buf_d2: trial.d2.stored() as u64,
                queue_lens: if cfg.record_queues {
                    trial.sched.q_actual.clone()
                } else {
                    Vec::new()
                },
            });
        }
    }

    Ok(TrialStats {
        scheme: cfg.scheme,
        seed: cfg.seed,
        final_backlog: trial.sched.backlog(),
        max_backlog,
        arrivals: trial.arrivals,
        delivered: (trial.d1.delivered_count(), trial.d2.delivered_count()),
        cq_checksum: 0,
        slots: event,
        samples,
        ledger_samples: Vec::new(),
        diagnostics: Default::default(),
        final_scheduler: Some(trial.sched),
    })
}
