//! `capacity` subcommand: print the boundary of each scheme's throughput
//! region along the configured directions.

use crate::config::BuiltConfig;
use crate::CmdError;
use xorcast::lp::{rate_adaptation_region, spn_region, RaScheme, RatePoint, RegionLp};
use xorcast::vnet;

/// Map a scheme token to its region. Slotted configs accept the scheme ids;
/// combo configs additionally accept `five_op_dmw@<i>` for the
/// fixed-combination baselines.
pub fn region_for(token: &str, cfg: &BuiltConfig) -> Result<RegionLp, CmdError> {
    if let Some(channel) = &cfg.channel {
        let spec = match token {
            "routing_bp" => vnet::build_routing_spec(channel),
            "five_op_dmw" => vnet::build_5op_spec(channel),
            "seven_op_dmw_q" | "seven_op_dmw_qinter" | "seven_op" => vnet::build_7op_spec(channel),
            other => {
                return Err(CmdError::Config(format!(
                    "unknown scheme `{other}` for a slotted channel"
                )))
            }
        }
        .map_err(|e| CmdError::Config(e.to_string()))?;
        return Ok(spn_region(&spec));
    }
    let combos = &cfg.combos;
    let scheme = match token {
        "routing_bp" => RaScheme::Routing,
        "seven_op_ra" => RaScheme::SevenOp,
        other => match other
            .strip_prefix("five_op_dmw@")
            .and_then(|i| i.parse::<usize>().ok())
        {
            Some(i) if i < combos.len() => RaScheme::FiveOpFixed(i),
            _ => {
                return Err(CmdError::Config(format!(
                    "unknown scheme `{other}` for a combo config"
                )))
            }
        },
    };
    Ok(rate_adaptation_region(combos, scheme))
}

pub fn cmd_capacity(cfg: &BuiltConfig) -> Result<String, CmdError> {
    let mut directions: Vec<[f64; 2]> = vec![cfg.raw.direction];
    directions.extend(cfg.raw.directions.iter().copied());

    let mut out = String::from("scheme,direction,theta_star,R1,R2\n");
    for token in &cfg.raw.schemes {
        let region = region_for(token, cfg)?;
        for d in &directions {
            let dir = RatePoint::new(d[0], d[1]);
            let theta = region.boundary(dir).map_err(CmdError::Solver)?;
            let r = dir.scale(theta);
            out.push_str(&format!(
                "{token},{}x{},{theta},{},{}\n",
                d[0], d[1], r.r1, r.r2
            ));
        }
    }
    Ok(out)
}
