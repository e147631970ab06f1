use serde::{Deserialize, Serialize};

use super::{
    network::{NodeLabel, Phase},
    LineSectionModel, Phasor, PhasorError, PhasorNetwork,
};

/// Smallest resistance used for a fault path. Bolted faults would otherwise
/// put an infinite admittance into the nodal matrix.
pub const MIN_FAULT_RESISTANCE: f64 = 1e-6;

/// Fault type codes 1..=11.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum FaultType {
    Abcg = 1,
    Abc = 2,
    Abg = 3,
    Bcg = 4,
    Acg = 5,
    Ab = 6,
    Bc = 7,
    Ac = 8,
    Ag = 9,
    Bg = 10,
    Cg = 11,
}

impl FaultType {
    pub const ALL: [FaultType; 11] = [
        FaultType::Abcg,
        FaultType::Abc,
        FaultType::Abg,
        FaultType::Bcg,
        FaultType::Acg,
        FaultType::Ab,
        FaultType::Bc,
        FaultType::Ac,
        FaultType::Ag,
        FaultType::Bg,
        FaultType::Cg,
    ];

    pub fn code(self) -> u32 {
        self as u32
    }

    pub fn from_code(code: u32) -> Result<Self, PhasorError> {
        code.checked_sub(1)
            .and_then(|i| Self::ALL.get(i as usize).copied())
            .ok_or(PhasorError::InvalidFaultType(code))
    }

    pub fn phases(self) -> &'static [Phase] {
        use Phase::*;
        match self {
            FaultType::Abcg | FaultType::Abc => &[A, B, C],
            FaultType::Abg | FaultType::Ab => &[A, B],
            FaultType::Bcg | FaultType::Bc => &[B, C],
            FaultType::Acg | FaultType::Ac => &[A, C],
            FaultType::Ag => &[A],
            FaultType::Bg => &[B],
            FaultType::Cg => &[C],
        }
    }

    pub fn grounded(self) -> bool {
        !matches!(
            self,
            FaultType::Abc | FaultType::Ab | FaultType::Bc | FaultType::Ac
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            FaultType::Abcg => "ABCG",
            FaultType::Abc => "ABC",
            FaultType::Abg => "ABG",
            FaultType::Bcg => "BCG",
            FaultType::Acg => "ACG",
            FaultType::Ab => "AB",
            FaultType::Bc => "BC",
            FaultType::Ac => "AC",
            FaultType::Ag => "AG",
            FaultType::Bg => "BG",
            FaultType::Cg => "CG",
        }
    }

    /// The same fault shifted one phase forward (A→B→C→A), e.g. AG→BG.
    pub fn rotate(self) -> FaultType {
        let mut rotated: Vec<Phase> = self.phases().iter().map(|p| p.rotate()).collect();
        rotated.sort_by_key(|p| p.index());
        Self::ALL
            .into_iter()
            .find(|t| t.grounded() == self.grounded() && t.phases() == rotated.as_slice())
            .expect("every rotation of a fault type is itself a fault type")
    }
}

impl TryFrom<u32> for FaultType {
    type Error = PhasorError;
    fn try_from(code: u32) -> Result<Self, Self::Error> {
        Self::from_code(code)
    }
}

impl From<FaultType> for u32 {
    fn from(t: FaultType) -> u32 {
        t.code()
    }
}

/// Shunt fault at a point along a line.
///
/// Every faulted phase connects through its own resistance to a common fault
/// point, which reaches ground through `ground_resistance` when the type is
/// grounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub fault_type: FaultType,
    pub distance_km: f64,
    pub phase_resistances: [f64; 3],
    pub ground_resistance: f64,
}

impl FaultSpec {
    pub fn bolted(fault_type: FaultType, distance_km: f64) -> Self {
        Self {
            fault_type,
            distance_km,
            phase_resistances: [0.0; 3],
            ground_resistance: 0.0,
        }
    }

    fn check_resistances(&self) -> Result<(), PhasorError> {
        for &r in self
            .phase_resistances
            .iter()
            .chain(std::iter::once(&self.ground_resistance))
        {
            if !(r.is_finite() && r >= 0.0) {
                return Err(PhasorError::FaultResistance(r));
            }
        }
        Ok(())
    }
}

fn resistor(r: f64) -> Phasor {
    Phasor::new(r.max(MIN_FAULT_RESISTANCE), 0.0)
}

/// Adds the fault branches for `spec` at the phase nodes `at` (A, B, C).
///
/// Topology per type: a single grounded phase gets one phase-to-ground branch
/// (phase plus ground resistance in series); two ungrounded phases get one
/// phase-to-phase branch; everything else uses a star point with one leg per
/// faulted phase, grounded through the ground resistance when required.
pub fn apply_fault_at(
    net: &PhasorNetwork,
    at: [usize; 3],
    spec: &FaultSpec,
) -> Result<PhasorNetwork, PhasorError> {
    spec.check_resistances()?;
    let mut out = net.clone();
    let phases = spec.fault_type.phases();
    let zero = Phasor::new(0.0, 0.0);
    let r = |p: Phase| spec.phase_resistances[p.index()];
    match (phases, spec.fault_type.grounded()) {
        ([p], true) => {
            out.add_branch(
                at[p.index()],
                0,
                resistor(r(*p) + spec.ground_resistance),
                zero,
            );
        }
        ([p, q], false) => {
            out.add_branch(at[p.index()], at[q.index()], resistor(r(*p) + r(*q)), zero);
        }
        _ => {
            let star = out.add_node(NodeLabel {
                bus: "fault_point".into(),
                phase: None,
            });
            for &p in phases {
                out.add_branch(at[p.index()], star, resistor(r(p)), zero);
            }
            if spec.fault_type.grounded() {
                out.add_branch(star, 0, resistor(spec.ground_resistance), zero);
            }
        }
    }
    Ok(out)
}

/// Inserts `line` between `from` and `to` as two sections split at the fault
/// distance, then applies the fault at the new intermediate bus.
///
/// Returns the faulted network and the fault-bus node ids.
pub fn apply_fault(
    net: &PhasorNetwork,
    spec: &FaultSpec,
    line: &LineSectionModel,
    from: [usize; 3],
    to: [usize; 3],
) -> Result<(PhasorNetwork, [usize; 3]), PhasorError> {
    if !(spec.distance_km > 0.0 && spec.distance_km < line.length_km) {
        return Err(PhasorError::FaultDistance {
            distance_km: spec.distance_km,
            length_km: line.length_km,
        });
    }
    let mut split = net.clone();
    let mid = split.add_bus("fault");
    split
        .coupled
        .push(line.section(from, mid, spec.distance_km));
    split
        .coupled
        .push(line.section(mid, to, line.length_km - spec.distance_km));
    Ok((apply_fault_at(&split, mid, spec)?, mid))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_bus() -> (PhasorNetwork, [usize; 3]) {
        let mut net = PhasorNetwork::new(0);
        let bus = net.add_bus("bus");
        (net, bus)
    }

    #[test]
    fn codes_round_trip_and_reject_out_of_range() {
        for (i, t) in FaultType::ALL.iter().enumerate() {
            assert_eq!(t.code(), i as u32 + 1);
            assert_eq!(FaultType::from_code(t.code()).unwrap(), *t);
        }
        assert_eq!(
            FaultType::from_code(12),
            Err(PhasorError::InvalidFaultType(12))
        );
        assert_eq!(
            FaultType::from_code(0),
            Err(PhasorError::InvalidFaultType(0))
        );
    }

    #[test]
    fn abcg_is_a_grounded_star() {
        let (net, bus) = three_bus();
        let out = apply_fault_at(&net, bus, &FaultSpec::bolted(FaultType::Abcg, 1.0)).unwrap();
        assert_eq!(out.node_count(), 4);
        let star = 4;
        let legs: Vec<_> = out.branches.iter().filter(|b| b.to == star).collect();
        assert_eq!(legs.len(), 3);
        assert!(legs
            .iter()
            .all(|b| b.series_impedance.re == MIN_FAULT_RESISTANCE));
        let ground: Vec<_> = out.branches.iter().filter(|b| b.to == 0).collect();
        assert_eq!(ground.len(), 1);
        assert_eq!(ground[0].from, star);
    }

    #[test]
    fn ab_is_one_phase_to_phase_branch() {
        let (net, bus) = three_bus();
        let spec = FaultSpec {
            fault_type: FaultType::Ab,
            distance_km: 1.0,
            phase_resistances: [0.3, 0.4, 0.5],
            ground_resistance: 0.9,
        };
        let out = apply_fault_at(&net, bus, &spec).unwrap();
        assert_eq!(out.branches.len(), 1);
        let b = &out.branches[0];
        assert_eq!((b.from, b.to), (bus[0], bus[1]));
        assert!((b.series_impedance.re - 0.7).abs() < 1e-15);
    }

    #[test]
    fn ag_is_one_phase_to_ground_branch() {
        let (net, bus) = three_bus();
        let spec = FaultSpec {
            fault_type: FaultType::Ag,
            distance_km: 1.0,
            phase_resistances: [0.25, 0.0, 0.0],
            ground_resistance: 0.5,
        };
        let out = apply_fault_at(&net, bus, &spec).unwrap();
        assert_eq!(out.branches.len(), 1);
        assert_eq!((out.branches[0].from, out.branches[0].to), (bus[0], 0));
        assert!((out.branches[0].series_impedance.re - 0.75).abs() < 1e-15);
    }

    #[test]
    fn negative_resistance_rejected() {
        let (net, bus) = three_bus();
        let mut spec = FaultSpec::bolted(FaultType::Ag, 1.0);
        spec.ground_resistance = -1.0;
        assert_eq!(
            apply_fault_at(&net, bus, &spec),
            Err(PhasorError::FaultResistance(-1.0))
        );
    }

    #[test]
    fn distance_must_be_inside_line() {
        let mut net = PhasorNetwork::new(0);
        let a = net.add_bus("a");
        let b = net.add_bus("b");
        let line = LineSectionModel::default_400kv(100.0);
        for d in [0.0, 100.0, -3.0, 120.0] {
            let spec = FaultSpec::bolted(FaultType::Ag, d);
            assert!(matches!(
                apply_fault(&net, &spec, &line, a, b),
                Err(PhasorError::FaultDistance { .. })
            ));
        }
    }

    #[test]
    fn rotation_maps_single_phase_faults() {
        assert_eq!(FaultType::Ag.rotate(), FaultType::Bg);
        assert_eq!(FaultType::Bg.rotate(), FaultType::Cg);
        assert_eq!(FaultType::Ab.rotate(), FaultType::Bc);
        assert_eq!(FaultType::Bc.rotate(), FaultType::Ac);
        assert_eq!(FaultType::Abg.rotate(), FaultType::Bcg);
    }
}
