//! JSON-facing config types for the channel process and the rate-adaptation
//! combos. Reception laws are accepted either as a full four-entry joint
//! vector `p` or as two independent marginals `p_marginals`.

use crate::channel::{
    ChannelError, ChannelMode, ChannelSpec, ChannelState, RaCombo, ReceptionVector,
};
use crate::mat::Mat;
use crate::spn::SpnSpec;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StateConfig {
    pub id: u32,
    pub freq: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<[f64; 4]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_marginals: Option<[f64; 2]>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
#[derive(Default)]
pub enum ModeConfig {
    #[default]
    Iid,
    Periodic(Vec<u32>),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ChannelConfig {
    pub states: Vec<StateConfig>,
    #[serde(default)]
    pub mode: ModeConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ComboConfig {
    pub duration: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<[f64; 4]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_marginals: Option<[f64; 2]>,
}

fn reception(
    p: &Option<[f64; 4]>,
    marginals: &Option<[f64; 2]>,
) -> Result<ReceptionVector, String> {
    match (p, marginals) {
        (Some(v), None) => ReceptionVector::from_array(*v).map_err(|e| e.to_string()),
        (None, Some([q1, q2])) => {
            ReceptionVector::from_marginals(*q1, *q2).map_err(|e| e.to_string())
        }
        (Some(_), Some(_)) => Err("give either `p` or `p_marginals`, not both".into()),
        (None, None) => Err("missing reception law: set `p` or `p_marginals`".into()),
    }
}

impl ChannelConfig {
    pub fn build(&self) -> Result<ChannelSpec, String> {
        let states = self
            .states
            .iter()
            .map(|s| {
                Ok(ChannelState {
                    id: s.id,
                    freq: s.freq,
                    p: reception(&s.p, &s.p_marginals)
                        .map_err(|e| format!("state {}: {e}", s.id))?,
                })
            })
            .collect::<Result<Vec<_>, String>>()?;
        let mode = match &self.mode {
            ModeConfig::Iid => ChannelMode::Iid,
            ModeConfig::Periodic(seq) => ChannelMode::Periodic(seq.clone()),
        };
        ChannelSpec::new(states, mode).map_err(|e: ChannelError| e.to_string())
    }

    pub fn from_spec(spec: &ChannelSpec) -> Self {
        ChannelConfig {
            states: spec
                .states()
                .iter()
                .map(|s| StateConfig {
                    id: s.id,
                    freq: s.freq,
                    p: Some(s.p.as_array()),
                    p_marginals: None,
                })
                .collect(),
            mode: match spec.mode() {
                ChannelMode::Iid => ModeConfig::Iid,
                ChannelMode::Periodic(seq) => ModeConfig::Periodic(seq.clone()),
            },
        }
    }
}

impl ComboConfig {
    pub fn build(&self) -> Result<RaCombo, String> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(format!(
                "combo duration must be positive, got {}",
                self.duration
            ));
        }
        Ok(RaCombo {
            duration: self.duration,
            p: reception(&self.p, &self.p_marginals)?,
        })
    }
}

/// JSON form of a generic service-network description: matrix literals and
/// index sets, validated on build.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SpnConfig {
    /// K x M, row per queue.
    pub input_matrix: Vec<Vec<f64>>,
    pub state_freqs: Vec<f64>,
    /// Per state, K x N.
    pub b_in: Vec<Vec<Vec<f64>>>,
    pub b_out: Vec<Vec<Vec<f64>>>,
    pub sa_inputs: Vec<Vec<usize>>,
    pub sa_outputs: Vec<Vec<usize>>,
    pub activation_vectors: Vec<Vec<u8>>,
}

fn to_mat(rows: &[Vec<f64>]) -> Mat {
    let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    Mat::from_rows(&refs)
}

impl SpnConfig {
    pub fn build(&self) -> Result<SpnSpec, String> {
        SpnSpec::new(
            to_mat(&self.input_matrix),
            self.state_freqs.clone(),
            self.b_in.iter().map(|m| to_mat(m)).collect(),
            self.b_out.iter().map(|m| to_mat(m)).collect(),
            self.sa_inputs.clone(),
            self.sa_outputs.clone(),
            self.activation_vectors.clone(),
        )
        .map_err(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_joint_and_marginal_forms() {
        let json = r#"{
            "states": [
                {"id": 1, "freq": 0.5, "p": [0, 0.5, 0.5, 0]},
                {"id": 2, "freq": 0.5, "p_marginals": [1.0, 1.0]}
            ],
            "mode": "iid"
        }"#;
        let cfg: ChannelConfig = serde_json::from_str(json).unwrap();
        let spec = cfg.build().unwrap();
        assert_eq!(spec.num_states(), 2);
        assert_eq!(spec.states()[1].p.as_array(), [0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn periodic_mode_round_trips() {
        let json = r#"{
            "states": [
                {"id": 1, "freq": 0.5, "p_marginals": [0.5, 0.5]},
                {"id": 2, "freq": 0.5, "p_marginals": [0.9, 0.9]}
            ],
            "mode": {"periodic": [1, 2]}
        }"#;
        let cfg: ChannelConfig = serde_json::from_str(json).unwrap();
        let spec = cfg.build().unwrap();
        let back = ChannelConfig::from_spec(&spec);
        let spec2 = back.build().unwrap();
        assert_eq!(spec, spec2);
    }

    #[test]
    fn rejects_ambiguous_or_missing_law() {
        let cfg = ChannelConfig {
            states: vec![StateConfig {
                id: 1,
                freq: 1.0,
                p: None,
                p_marginals: None,
            }],
            mode: ModeConfig::Iid,
        };
        assert!(cfg.build().unwrap_err().contains("missing reception law"));
        let cfg = ChannelConfig {
            states: vec![StateConfig {
                id: 1,
                freq: 1.0,
                p: Some([0.0, 0.0, 0.0, 1.0]),
                p_marginals: Some([1.0, 1.0]),
            }],
            mode: ModeConfig::Iid,
        };
        assert!(cfg.build().unwrap_err().contains("not both"));
    }

    #[test]
    fn combo_config_builds() {
        let json = r#"{"duration": 0.3333333333333333, "p_marginals": [0.4, 0.2]}"#;
        let cfg: ComboConfig = serde_json::from_str(json).unwrap();
        let combo = cfg.build().unwrap();
        assert!((combo.p.p_d1() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn spn_config_builds_from_matrix_literals() {
        let json = r#"{
            "input_matrix": [[1.0], [0.0], [0.0]],
            "state_freqs": [1.0],
            "b_in": [[[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]]],
            "b_out": [[[0.0, 0.0], [0.5, 0.0], [0.5, 0.0]]],
            "sa_inputs": [[0], [1, 2]],
            "sa_outputs": [[1, 2], []],
            "activation_vectors": [[0, 0], [1, 0], [0, 1]]
        }"#;
        let cfg: SpnConfig = serde_json::from_str(json).unwrap();
        let spec = cfg.build().unwrap();
        assert_eq!((spec.queues, spec.inputs, spec.activities), (3, 1, 2));
        // broken support is rejected with a field-level message
        let mut bad = cfg;
        bad.b_in[0][0][1] = 0.7;
        assert!(bad.build().unwrap_err().contains("support"));
    }
}
