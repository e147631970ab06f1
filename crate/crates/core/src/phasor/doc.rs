//! TOML network descriptions and CSV solution export.
//!
//! ```toml
//! [[node]]
//! bus = "src"
//! phase = "A"
//!
//! [[branch]]
//! from = 1
//! to = 0
//! z = [1.0, 0.0]          # ohms, [re, im]
//!
//! [[source]]
//! node = 1
//! emf = [1.0, 0.0]
//! z = [1.0, 0.0]
//! ```
//!
//! Nodes are numbered by their order in the `node` array, starting at 1.
//! `line` entries add sequence-parameter pi sections between phase triplets,
//! `fault` entries apply a fault of the given type code at a phase triplet.

use std::io::Write;

use serde::Deserialize;

use super::{
    apply_fault_at,
    network::{NodeLabel, Phase},
    FaultSpec, FaultType, LineSectionModel, Phasor, PhasorError, PhasorNetwork, PhasorSolution,
};

type Cx = [f64; 2];

fn cx(v: Cx) -> Phasor {
    Phasor::new(v[0], v[1])
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDoc {
    #[serde(default)]
    pub node: Vec<NodeDoc>,
    #[serde(default)]
    pub branch: Vec<BranchDoc>,
    #[serde(default)]
    pub line: Vec<LineDoc>,
    #[serde(default)]
    pub source: Vec<SourceDoc>,
    #[serde(default)]
    pub fault: Vec<FaultDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub bus: String,
    pub phase: Option<Phase>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchDoc {
    pub from: usize,
    pub to: usize,
    pub z: Cx,
    #[serde(default)]
    pub shunt: Cx,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineDoc {
    pub from: [usize; 3],
    pub to: [usize; 3],
    pub length_km: f64,
    pub z1: Cx,
    pub z0: Cx,
    #[serde(default)]
    pub y1: Cx,
    #[serde(default)]
    pub y0: Cx,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceDoc {
    pub node: usize,
    pub emf: Cx,
    pub z: Cx,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultDoc {
    pub at: [usize; 3],
    pub code: u32,
    #[serde(default)]
    pub phase_r: [f64; 3],
    #[serde(default)]
    pub ground_r: f64,
}

impl NetworkDoc {
    pub fn into_network(self) -> Result<PhasorNetwork, PhasorError> {
        let mut net = PhasorNetwork::new(0);
        for n in self.node {
            net.add_node(NodeLabel {
                bus: n.bus,
                phase: n.phase,
            });
        }
        for b in self.branch {
            net.add_branch(b.from, b.to, cx(b.z), cx(b.shunt));
        }
        for l in self.line {
            if !(l.length_km.is_finite() && l.length_km > 0.0) {
                return Err(PhasorError::Parse(format!(
                    "line length must be positive, got {}",
                    l.length_km
                )));
            }
            let model = LineSectionModel::from_sequence(
                cx(l.z1),
                cx(l.z0),
                cx(l.y1),
                cx(l.y0),
                l.length_km,
            );
            net.coupled.push(model.section(l.from, l.to, l.length_km));
        }
        for s in self.source {
            net.add_source(s.node, cx(s.emf), cx(s.z));
        }
        net.validate()?;
        for f in self.fault {
            let spec = FaultSpec {
                fault_type: FaultType::from_code(f.code)?,
                distance_km: 0.0,
                phase_resistances: f.phase_r,
                ground_resistance: f.ground_r,
            };
            for &n in &f.at {
                if n == 0 || n > net.node_count() {
                    return Err(PhasorError::NodeOutOfRange {
                        node: n,
                        node_count: net.node_count(),
                    });
                }
            }
            net = apply_fault_at(&net, f.at, &spec)?;
        }
        Ok(net)
    }
}

/// Parses a TOML network description. Unknown keys are rejected.
pub fn parse_network(text: &str) -> Result<PhasorNetwork, PhasorError> {
    let doc: NetworkDoc = toml::from_str(text).map_err(|e| PhasorError::Parse(e.to_string()))?;
    doc.into_network()
}

/// Writes `node,phase,rms_volts,angle_deg` rows for every non-ground node.
pub fn write_solution_csv<W: Write>(
    net: &PhasorNetwork,
    sol: &PhasorSolution,
    out: W,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["node", "phase", "rms_volts", "angle_deg"])?;
    for node in 1..sol.node_voltages.len() {
        let v = sol.node_voltages[node];
        let (name, phase) = match net.label(node) {
            Some(l) if !l.bus.is_empty() => (
                l.bus.clone(),
                l.phase
                    .map(|p| p.letter().to_string())
                    .unwrap_or("-".into()),
            ),
            _ => (node.to_string(), "-".to_string()),
        };
        w.write_record([
            name,
            phase,
            format!("{:.6}", v.norm()),
            format!("{:.6}", v.arg().to_degrees()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasor::solve_steady_state;

    const DIVIDER: &str = r#"
[[node]]
bus = "mid"

[[branch]]
from = 1
to = 0
z = [1.0, 0.0]

[[source]]
node = 1
emf = [1.0, 0.0]
z = [1.0, 0.0]
"#;

    #[test]
    fn parses_and_solves_divider() {
        let net = parse_network(DIVIDER).unwrap();
        let sol = solve_steady_state(&net).unwrap();
        assert!((sol.voltage(1).re - 0.5).abs() < 1e-15);
        let mut buf = Vec::new();
        write_solution_csv(&net, &sol, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "node,phase,rms_volts,angle_deg\nmid,-,0.500000,0.000000\n"
        );
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = parse_network("[[node]]\nbus = \"x\"\ncolour = 3\n").unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");
    }

    #[test]
    fn fault_code_is_checked() {
        let text = r#"
[[node]]
bus = "b"
phase = "A"
[[node]]
bus = "b"
phase = "B"
[[node]]
bus = "b"
phase = "C"
[[fault]]
at = [1, 2, 3]
code = 12
"#;
        assert_eq!(
            parse_network(text).unwrap_err(),
            PhasorError::InvalidFaultType(12)
        );
    }
}
