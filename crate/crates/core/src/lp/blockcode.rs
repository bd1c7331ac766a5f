//! Block-code throughput region in its reduced form: seven opaque coding-
//! type fractions per channel state tied together by seven aggregate flows
//! `y1..y7`, plus the one-to-one mapping that converts any block-code
//! witness into a service-fraction witness of the seven-operation network.
//!
//! Two of the published equation lines contradict the accompanying
//! equivalence proof (the `y4` and `y5` definitions); this module follows
//! the proof's expansions, under which the two regions coincide exactly.

use super::region::{RatePoint, RegionLp};
use super::simplex::SolverError;
use crate::channel::ChannelSpec;

/// Per-state variable order of the block-code region.
pub const BLOCKCODE_VARS: [&str; 7] = ["x0", "x9", "x18", "x27", "x31", "x63", "x95"];

/// Positions of `[x0, x9, x18, x27, x31, x63, x95]` in a per-state block.
const X0: usize = 0;
const X9: usize = 1;
const X18: usize = 2;
const X27: usize = 3;
const X31: usize = 4;
const X63: usize = 5;
const X95: usize = 6;

/// Build the block-code region of a channel. Variables are the seven
/// coding-type fractions per state; the `y` flows are substituted away,
/// leaving five rate-parametric equalities and the per-state simplex rows.
pub fn blockcode_region(channel: &ChannelSpec) -> RegionLp {
    let states = channel.num_states();
    let nvar = 7 * states;
    let mut var_names = Vec::with_capacity(nvar);
    for c in 0..states {
        for name in BLOCKCODE_VARS {
            var_names.push(format!("{name}^{c}"));
        }
    }

    // weighted sum over states of selected per-state variables
    let acc = |idxs: &[usize], weight: &dyn Fn(usize) -> f64| -> Vec<f64> {
        let mut row = vec![0.0; nvar];
        for (c, state) in channel.states().iter().enumerate() {
            for &i in idxs {
                row[7 * c + i] = state.freq * weight(c);
            }
        }
        row
    };
    let p_d1 = |c: usize| channel.states()[c].p.p_d1();
    let p_d2 = |c: usize| channel.states()[c].p.p_d2();
    let p_any = |c: usize| channel.states()[c].p.p_any();

    // y1 = y3:  f·p_d1·(x18+x27+x31+x63) = R1
    // y2 = y4:  f·p_d2·(x9+x27+x31+x95)  = R2
    // y5 = R1+R2:  f·p_any·(x0+x9+x18+x27) = R1+R2
    // y6 = R1+R2:  f·p_any·(x0+x9)  = R2
    // y7 = R1+R2:  f·p_any·(x0+x18) = R1
    let rows: [(Vec<f64>, f64, f64); 5] = [
        (acc(&[X18, X27, X31, X63], &p_d1), 1.0, 0.0),
        (acc(&[X9, X27, X31, X95], &p_d2), 0.0, 1.0),
        (acc(&[X0, X9, X18, X27], &p_any), 1.0, 1.0),
        (acc(&[X0, X9], &p_any), 0.0, 1.0),
        (acc(&[X0, X18], &p_any), 1.0, 0.0),
    ];

    let mut region = RegionLp::from_parts(var_names, Vec::new(), Vec::new(), 1.0);
    for (coeffs, r1, r2) in rows {
        region.push_eq(coeffs, r1, r2, 0.0);
    }
    for c in 0..states {
        let mut row = vec![0.0; nvar];
        for i in 0..7 {
            row[7 * c + i] = 1.0;
        }
        region.push_ub(row, 1.0);
    }
    region
}

pub fn blockcode_feasible(channel: &ChannelSpec, r: RatePoint) -> Result<bool, SolverError> {
    blockcode_region(channel).feasible(r)
}

/// Convert a block-code witness into service fractions of the seven-
/// operation network, per-state order `[NC1, NC2, DX1, DX2, PM, RC, CX]`:
/// `NC1 = x18, NC2 = x9, DX1 = x63, DX2 = x95, PM = x0, RC = x27, CX = x31`.
pub fn map_witness_to_spn(witness: &[f64], states: usize) -> Vec<f64> {
    assert_eq!(witness.len(), 7 * states);
    const ORDER: [usize; 7] = [X18, X9, X63, X95, X0, X27, X31];
    let mut out = Vec::with_capacity(witness.len());
    for c in 0..states {
        for &i in &ORDER {
            out.push(witness[7 * c + i]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ChannelSpec, ChannelState, ReceptionVector};
    use crate::lp::region::spn_region;
    use crate::vnet;

    fn two_state_channel() -> ChannelSpec {
        ChannelSpec::iid(vec![
            ChannelState {
                id: 1,
                freq: 0.5,
                p: ReceptionVector::new(0.0, 0.5, 0.5, 0.0).unwrap(),
            },
            ChannelState {
                id: 2,
                freq: 0.5,
                p: ReceptionVector::new(0.0, 0.0, 0.0, 1.0).unwrap(),
            },
        ])
        .unwrap()
    }

    #[test]
    fn origin_feasible_and_capacity_on_boundary() {
        let channel = two_state_channel();
        let region = blockcode_region(&channel);
        assert!(region.feasible(RatePoint::new(0.0, 0.0)).unwrap());
        assert!(region.feasible(RatePoint::new(0.4999, 0.4999)).unwrap());
        assert!(!region.feasible(RatePoint::new(0.5001, 0.5001)).unwrap());
        let sum = 2.0 * region.boundary(RatePoint::new(1.0, 1.0)).unwrap();
        assert!((sum - 1.0).abs() < 1e-6);
    }

    #[test]
    fn witness_maps_onto_spn_region() {
        let channel = two_state_channel();
        let region = blockcode_region(&channel);
        let spn = spn_region(&vnet::build_7op_spec(&channel).unwrap());
        let r = RatePoint::new(0.45, 0.4);
        let witness = region.witness(r).unwrap().expect("inside the region");
        let mapped = map_witness_to_spn(&witness, channel.num_states());
        assert!(
            spn.residual(&mapped, r) < 1e-9,
            "residual {}",
            spn.residual(&mapped, r)
        );
    }
}
