//! `verify` subcommand: self-contained invariant suite over built-in
//! fixtures, printed as a machine-readable pass/fail table. The
//! `--inject-fault` flag corrupts one artifact on purpose to demonstrate
//! that the corresponding check catches it.

use crate::CmdError;
use xorcast::channel::{ChannelSpec, ChannelState, ReceptionStatus, ReceptionVector};
use xorcast::lp::{blockcode_region, map_witness_to_spn, spn_region, RatePoint};
use xorcast::rng::{substream, Stream};
use xorcast::sim::{run, SchemeId, TrialConfig};
use xorcast::vnet::{self, MoveOutcome, MovedPacket, ReactiveTable, REACTIVE_TABLE};
use xorcast::wire;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Flip one cell of the reactive-coding movement table.
    ReactiveTable,
    /// Perturb one entry of the expected output service matrix.
    BoutMatrix,
}

impl Fault {
    pub fn parse(s: &str) -> Option<Fault> {
        match s {
            "reactive-table" => Some(Fault::ReactiveTable),
            "bout-matrix" => Some(Fault::BoutMatrix),
            _ => None,
        }
    }
}

struct Report {
    lines: Vec<(String, bool)>,
}

impl Report {
    fn check(&mut self, name: &str, pass: bool) {
        self.lines.push((name.to_string(), pass));
    }

    fn render(&self) -> (String, bool) {
        let mut out = String::from("check,result\n");
        let mut all = true;
        for (name, pass) in &self.lines {
            out.push_str(&format!("{name},{}\n", if *pass { "pass" } else { "FAIL" }));
            all &= pass;
        }
        (out, all)
    }
}

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

/// Frozen expected service matrices for marginals (0.5, 0.7).
const GOLDEN_BIN: [[f64; 7]; 5] = [
    [0.85, 0.0, 0.0, 0.0, 0.85, 0.0, 0.0],
    [0.0, 0.85, 0.0, 0.0, 0.85, 0.0, 0.0],
    [0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.5],
    [0.0, 0.0, 0.0, 0.7, 0.0, 0.0, 0.7],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.85, 0.0],
];
const GOLDEN_BOUT: [[f64; 7]; 5] = [
    [0.0; 7],
    [0.0; 7],
    [0.35, 0.0, 0.0, 0.0, 0.0, 0.35, 0.0],
    [0.0, 0.15, 0.0, 0.0, 0.0, 0.15, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.85, 0.0, 0.0],
];

fn check_matrices_golden(fault: Option<Fault>) -> bool {
    let p = ReceptionVector::from_marginals(0.5, 0.7).unwrap();
    let (b_in, mut b_out) = vnet::build_matrices(&p);
    if fault == Some(Fault::BoutMatrix) {
        b_out.set(2, 0, b_out.get(2, 0) + 0.01);
    }
    for r in 0..5 {
        for c in 0..7 {
            if (b_in.get(r, c) - GOLDEN_BIN[r][c]).abs() > 1e-12 {
                return false;
            }
            if (b_out.get(r, c) - GOLDEN_BOUT[r][c]).abs() > 1e-12 {
                return false;
            }
        }
    }
    true
}

fn check_reactive_marginals(fault: Option<Fault>) -> bool {
    let mut table: ReactiveTable = REACTIVE_TABLE;
    if fault == Some(Fault::ReactiveTable) {
        // misroute one survivor: (now = D2Only, star = Both) to the wrong queue
        table[2][2] = MoveOutcome::ToQ2Overheard(MovedPacket::X);
    }
    let laws = [
        ReceptionVector::from_marginals(0.5, 0.7).unwrap(),
        ReceptionVector::new(0.1, 0.3, 0.4, 0.2).unwrap(),
        ReceptionVector::new(0.25, 0.25, 0.25, 0.25).unwrap(),
    ];
    for p in laws {
        for star in [
            ReceptionStatus::D1Only,
            ReceptionStatus::D2Only,
            ReceptionStatus::Both,
        ] {
            let (q1, q2, consumed) = vnet::reactive_marginals_in(&table, &p, star);
            if (q1 - p.p_d2_only()).abs() > 1e-12
                || (q2 - p.p_d1_only()).abs() > 1e-12
                || (consumed - p.p_any()).abs() > 1e-12
            {
                return false;
            }
        }
    }
    true
}

fn check_matrix_supports() -> bool {
    let p = ReceptionVector::from_marginals(0.31, 0.87).unwrap();
    let (b_in, b_out) = vnet::build_matrices(&p);
    for (sa, op) in vnet::CodingOp::SEVEN.iter().enumerate() {
        for q in 0..5 {
            if (b_in.get(q, sa) > 0.0) != op.input_queues().contains(&q) {
                return false;
            }
            if (b_out.get(q, sa) > 0.0) != op.output_queues().contains(&q) {
                return false;
            }
        }
    }
    true
}

fn check_trials() -> bool {
    for scheme in [
        SchemeId::RoutingBp,
        SchemeId::FiveOpDmw,
        SchemeId::SevenOpDmwQ,
        SchemeId::SevenOpDmwQinter,
    ] {
        let cfg = TrialConfig::slotted(scheme, two_state_channel(), 0.35, 0.35, 20_000, 3);
        if run(&cfg).is_err() {
            return false;
        }
    }
    let mut cfg = TrialConfig::slotted(
        SchemeId::SevenOpDmwQinter,
        two_state_channel(),
        0.45,
        0.45,
        20_000,
        3,
    );
    cfg.drain = true;
    match run(&cfg) {
        Ok(stats) => stats.final_backlog == 0 && stats.delivered.0 == stats.arrivals.0,
        Err(_) => false,
    }
}

fn check_capacity_goldens() -> bool {
    let channel = two_state_channel();
    let dir = RatePoint::new(1.0, 1.0);
    let pairs = [
        (spn_region(&vnet::build_7op_spec(&channel).unwrap()), 1.0),
        (spn_region(&vnet::build_5op_spec(&channel).unwrap()), 0.875),
        (
            spn_region(&vnet::build_routing_spec(&channel).unwrap()),
            0.75,
        ),
    ];
    pairs.iter().all(|(region, expect)| {
        region
            .boundary(dir)
            .map(|b| (2.0 * b - expect).abs() < 1e-6)
            .unwrap_or(false)
    })
}

fn check_blockcode_equivalence() -> bool {
    let mut rng = substream(2024, Stream::Service);
    for _ in 0..5 {
        let channel = random_channel(&mut rng);
        let seven = spn_region(&match vnet::build_7op_spec(&channel) {
            Ok(s) => s,
            Err(_) => return false,
        });
        let block = blockcode_region(&channel);
        for i in 0..3 {
            let angle = (i as f64 + 0.5) / 3.0 * std::f64::consts::FRAC_PI_2;
            let dir = RatePoint::new(angle.cos(), angle.sin());
            let (a, b) = match (seven.boundary(dir), block.boundary(dir)) {
                (Ok(a), Ok(b)) => (a, b),
                _ => return false,
            };
            if (a - b).abs() > 1e-6 {
                return false;
            }
            let r = dir.scale(0.9 * b);
            match block.witness(r) {
                Ok(Some(w)) => {
                    if seven.residual(&map_witness_to_spn(&w, channel.num_states()), r) > 1e-9 {
                        return false;
                    }
                }
                _ => return false,
            }
        }
    }
    true
}

fn check_region_inclusion() -> bool {
    let mut rng = substream(88, Stream::Service);
    for _ in 0..5 {
        let channel = random_channel(&mut rng);
        let seven = spn_region(&vnet::build_7op_spec(&channel).unwrap());
        let five = spn_region(&vnet::build_5op_spec(&channel).unwrap());
        let route = spn_region(&vnet::build_routing_spec(&channel).unwrap());
        for i in 0..4 {
            let angle = (i as f64 + 0.5) / 4.0 * std::f64::consts::FRAC_PI_2;
            let dir = RatePoint::new(angle.cos(), angle.sin());
            let (b7, b5, br) = (
                seven.boundary(dir).unwrap(),
                five.boundary(dir).unwrap(),
                route.boundary(dir).unwrap(),
            );
            if br > b5 + 1e-6 || b5 > b7 + 1e-6 {
                return false;
            }
        }
    }
    true
}

fn check_lp_certificates() -> bool {
    let channel = two_state_channel();
    let region = spn_region(&vnet::build_7op_spec(&channel).unwrap());
    matches!(
        region.certify_infeasible(RatePoint::new(0.7, 0.7)),
        Ok(Some(true))
    )
}

fn check_wire_roundtrip() -> bool {
    use xorcast::vnet::{CodingOp, PacketId, Session, Transmission, TxKind};
    let x = PacketId::new(Session::One, 12, 99);
    let y = PacketId::new(Session::Two, 34, 99);
    let frames = [
        Transmission {
            op: CodingOp::NonCoding1,
            kind: TxKind::Uncoded(x),
        },
        Transmission {
            op: CodingOp::ReactiveCode,
            kind: TxKind::Uncoded(y),
        },
        Transmission {
            op: CodingOp::Premix,
            kind: TxKind::XorPair(x, y),
        },
        Transmission {
            op: CodingOp::ClassicXor,
            kind: TxKind::XorPair(x, y),
        },
    ];
    frames.iter().all(|tx| {
        let bytes = wire::encode_frame(tx, 32);
        matches!(wire::decode_frame(&bytes, 99), Ok((back, _)) if back == *tx)
    })
}

fn random_channel<R: rand::Rng>(rng: &mut R) -> ChannelSpec {
    let n = rng.gen_range(2..=4);
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let fsum: f64 = raw.iter().sum();
    let states = (0..n)
        .map(|i| {
            let v: Vec<f64> = (0..4).map(|_| rng.gen_range(0.02..1.0)).collect();
            let s: f64 = v.iter().sum();
            ChannelState {
                id: i as u32,
                freq: raw[i] / fsum,
                p: ReceptionVector::new(v[0] / s, v[1] / s, v[2] / s, v[3] / s).unwrap(),
            }
        })
        .collect();
    ChannelSpec::iid(states).unwrap()
}

pub fn cmd_verify(fault: Option<Fault>) -> Result<(String, bool), CmdError> {
    let mut report = Report { lines: Vec::new() };
    report.check(
        "expected_service_matrices_golden",
        check_matrices_golden(fault),
    );
    report.check(
        "reactive_coding_marginal_law",
        check_reactive_marginals(fault),
    );
    report.check("matrix_supports_match_graph", check_matrix_supports());
    report.check("trial_invariants_and_drain", check_trials());
    report.check("capacity_goldens_two_state", check_capacity_goldens());
    report.check("blockcode_equivalence", check_blockcode_equivalence());
    report.check("region_inclusion", check_region_inclusion());
    report.check("lp_infeasibility_certificates", check_lp_certificates());
    report.check("wire_roundtrip", check_wire_roundtrip());
    Ok(report.render())
}
