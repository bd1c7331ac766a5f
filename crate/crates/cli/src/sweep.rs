//! `sweep` subcommand: run trials × thetas × schemes and emit the backlog
//! curves plus per-point trial means. Rows are flushed point by point so an
//! interrupted sweep leaves usable partial results.

use crate::config::BuiltConfig;
use crate::CmdError;
use rayon::prelude::*;
use std::io::Write;
use xorcast::sim::{run, SchemeId, TrialConfig, TrialStats};

pub struct SweepPlan {
    pub schemes: Vec<SchemeId>,
    pub thetas: Vec<f64>,
    pub trials: u32,
}

pub fn plan(cfg: &BuiltConfig) -> Result<SweepPlan, CmdError> {
    let schemes = cfg.runnable_schemes().map_err(CmdError::Config)?;
    let thetas = cfg
        .raw
        .theta_grid
        .as_ref()
        .ok_or_else(|| CmdError::Config("field `theta_grid`: required for sweeps".into()))?
        .values();
    Ok(SweepPlan {
        schemes,
        thetas,
        trials: cfg.raw.trials,
    })
}

fn trial_config(cfg: &BuiltConfig, scheme: SchemeId, theta: f64, seed: u64) -> TrialConfig {
    let (r1, r2) = (theta * cfg.raw.direction[0], theta * cfg.raw.direction[1]);
    let mut tc = if scheme.is_continuous() {
        TrialConfig::rate_adaptation(cfg.combos.clone(), r1, r2, cfg.raw.horizon, seed)
    } else {
        TrialConfig::slotted(
            scheme,
            cfg.channel.clone().expect("slotted scheme needs a channel"),
            r1,
            r2,
            cfg.raw.horizon,
            seed,
        )
    };
    tc.pruning_period = cfg.raw.pruning_period;
    tc.sampling_stride = cfg.raw.sampling_stride;
    tc.arrivals.kind = cfg.arrival_kind();
    tc.record_queues = cfg.raw.per_queue_columns;
    tc
}

pub fn cmd_sweep(cfg: &BuiltConfig, out: &mut dyn Write, parallel: usize) -> Result<(), CmdError> {
    let plan = plan(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel)
        .build()
        .map_err(|e| CmdError::Config(e.to_string()))?;

    let queue_columns = if cfg.raw.per_queue_columns {
        plan.schemes
            .iter()
            .map(|s| match s {
                SchemeId::RoutingBp => 2,
                SchemeId::FiveOpDmw => 4,
                _ => 5,
            })
            .max()
            .unwrap_or(0)
    } else {
        0
    };
    out.write_all(TrialStats::csv_header(queue_columns).as_bytes())?;
    for &scheme in &plan.schemes {
        for &theta in &plan.thetas {
            let seeds: Vec<u64> = (0..plan.trials as u64)
                .map(|i| cfg.raw.base_seed + i)
                .collect();
            let results: Vec<Result<TrialStats, _>> = pool.install(|| {
                seeds
                    .par_iter()
                    .map(|&seed| run(&trial_config(cfg, scheme, theta, seed)))
                    .collect()
            });
            let mut mean_backlog = 0.0;
            let mut block = String::new();
            for res in results {
                let stats = res.map_err(CmdError::Sim)?;
                stats.append_csv(theta, queue_columns, &mut block);
                mean_backlog += stats.final_backlog as f64;
            }
            mean_backlog /= plan.trials as f64;
            block.push_str(&format!(
                "{},{theta},mean,final,{mean_backlog},,,,{}\n",
                scheme.label(),
                ",".repeat(queue_columns)
            ));
            // flush per point: partial results survive an interrupt
            out.write_all(block.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}
