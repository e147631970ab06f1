use nalgebra::{linalg::LU, DMatrix, DVector, Dyn, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{Phasor, PhasorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

    pub fn index(self) -> usize {
        match self {
            Phase::A => 0,
            Phase::B => 1,
            Phase::C => 2,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Phase::A => 'A',
            Phase::B => 'B',
            Phase::C => 'C',
        }
    }

    /// Next phase in positive-sequence rotation (A→B→C→A).
    pub fn rotate(self) -> Phase {
        match self {
            Phase::A => Phase::B,
            Phase::B => Phase::C,
            Phase::C => Phase::A,
        }
    }
}

/// Human-readable name of a node, used only for reporting.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NodeLabel {
    pub bus: String,
    pub phase: Option<Phase>,
}

/// Two-terminal pi branch. `to == 0` connects the far end to ground.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub series_impedance: Phasor,
    pub shunt_admittance_per_end: Phasor,
}

/// Three-phase pi section with full 3x3 series impedance and shunt admittance.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledBranch {
    pub from: [usize; 3],
    pub to: [usize; 3],
    pub series_impedance: Matrix3<Phasor>,
    pub shunt_admittance_per_end: Matrix3<Phasor>,
}

/// Ideal EMF behind an internal impedance, connected between `node` and ground.
#[derive(Debug, Clone, PartialEq)]
pub struct Source {
    pub node: usize,
    pub emf: Phasor,
    pub internal_impedance: Phasor,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhasorNetwork {
    node_count: usize,
    labels: Vec<NodeLabel>,
    pub branches: Vec<Branch>,
    pub coupled: Vec<CoupledBranch>,
    pub sources: Vec<Source>,
}

impl PhasorNetwork {
    /// Network with `node_count` unlabeled nodes (ids `1..=node_count`).
    pub fn new(node_count: usize) -> Self {
        Self {
            node_count,
            labels: vec![NodeLabel::default(); node_count],
            ..Default::default()
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn add_node(&mut self, label: NodeLabel) -> usize {
        self.node_count += 1;
        self.labels.push(label);
        self.node_count
    }

    /// Adds three labeled nodes for a three-phase bus and returns their ids in A, B, C order.
    pub fn add_bus(&mut self, bus: &str) -> [usize; 3] {
        Phase::ALL.map(|phase| {
            self.add_node(NodeLabel {
                bus: bus.to_string(),
                phase: Some(phase),
            })
        })
    }

    pub fn label(&self, node: usize) -> Option<&NodeLabel> {
        node.checked_sub(1).and_then(|i| self.labels.get(i))
    }

    pub fn set_label(&mut self, node: usize, label: NodeLabel) -> Result<(), PhasorError> {
        self.check_node(node)?;
        self.labels[node - 1] = label;
        Ok(())
    }

    /// Finds a node by bus name and phase.
    pub fn find(&self, bus: &str, phase: Option<Phase>) -> Option<usize> {
        self.labels
            .iter()
            .position(|l| l.bus == bus && l.phase == phase)
            .map(|i| i + 1)
    }

    pub fn add_branch(&mut self, from: usize, to: usize, series: Phasor, shunt_per_end: Phasor) {
        self.branches.push(Branch {
            from,
            to,
            series_impedance: series,
            shunt_admittance_per_end: shunt_per_end,
        });
    }

    pub fn add_source(&mut self, node: usize, emf: Phasor, internal_impedance: Phasor) {
        self.sources.push(Source {
            node,
            emf,
            internal_impedance,
        });
    }

    fn check_node(&self, node: usize) -> Result<(), PhasorError> {
        if node > self.node_count {
            return Err(PhasorError::NodeOutOfRange {
                node,
                node_count: self.node_count,
            });
        }
        Ok(())
    }

    /// Checks endpoint ranges and non-zero series impedances.
    pub fn validate(&self) -> Result<(), PhasorError> {
        for (i, b) in self.branches.iter().enumerate() {
            self.check_node(b.from)?;
            self.check_node(b.to)?;
            if b.series_impedance.norm() == 0.0 || !b.series_impedance.is_finite() {
                return Err(PhasorError::ZeroImpedance(i));
            }
        }
        for c in &self.coupled {
            for &n in c.from.iter().chain(c.to.iter()) {
                self.check_node(n)?;
            }
            if c.series_impedance.try_inverse().is_none() {
                return Err(PhasorError::Singular);
            }
        }
        for s in &self.sources {
            self.check_node(s.node)?;
            if s.internal_impedance.norm() == 0.0 {
                return Err(PhasorError::Singular);
            }
        }
        Ok(())
    }

    /// Lowest-numbered node with no conductive path to ground or a source.
    fn floating_node(&self) -> Option<usize> {
        let mut parent: Vec<usize> = (0..=self.node_count).collect();
        fn root(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        let mut join = |a: usize, b: usize| {
            let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        };
        for b in &self.branches {
            join(b.from, b.to);
            if b.shunt_admittance_per_end.norm() > 0.0 {
                join(b.from, 0);
                join(b.to, 0);
            }
        }
        for c in &self.coupled {
            for k in 0..3 {
                join(c.from[k], c.to[k]);
                if c.shunt_admittance_per_end
                    .row(k)
                    .iter()
                    .any(|y| y.norm() > 0.0)
                {
                    join(c.from[k], 0);
                    join(c.to[k], 0);
                }
            }
        }
        for s in &self.sources {
            join(s.node, 0);
        }
        (1..=self.node_count).find(|&n| root(&mut parent, n) != 0)
    }
}

fn stamp_passive(net: &PhasorNetwork) -> DMatrix<Phasor> {
    let n = net.node_count;
    let mut y = DMatrix::<Phasor>::zeros(n, n);
    let mut add = |a: usize, b: usize, v: Phasor| {
        if a > 0 && b > 0 {
            y[(a - 1, b - 1)] += v;
        }
    };
    for br in &net.branches {
        let ys = br.series_impedance.inv();
        add(br.from, br.from, ys + br.shunt_admittance_per_end);
        add(br.to, br.to, ys + br.shunt_admittance_per_end);
        add(br.from, br.to, -ys);
        add(br.to, br.from, -ys);
    }
    for c in &net.coupled {
        let ys = c
            .series_impedance
            .try_inverse()
            .unwrap_or_else(Matrix3::zeros);
        for i in 0..3 {
            for j in 0..3 {
                let sh = c.shunt_admittance_per_end[(i, j)];
                add(c.from[i], c.from[j], ys[(i, j)] + sh);
                add(c.to[i], c.to[j], ys[(i, j)] + sh);
                add(c.from[i], c.to[j], -ys[(i, j)]);
                add(c.to[i], c.from[j], -ys[(i, j)]);
            }
        }
    }
    y
}

/// Nodal admittance matrix of the passive network (sources excluded).
///
/// Row/column `k` corresponds to node `k + 1`.
pub fn assemble_admittance(net: &PhasorNetwork) -> Result<DMatrix<Phasor>, PhasorError> {
    net.validate()?;
    if net.node_count == 0 {
        return Err(PhasorError::Singular);
    }
    let y = stamp_passive(net);
    if let Some(k) = (0..net.node_count).find(|&k| y[(k, k)].norm() == 0.0) {
        return Err(PhasorError::FloatingNode(k + 1));
    }
    Ok(y)
}

/// Steady-state voltages and currents.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasorSolution {
    /// Indexed by node id; entry 0 is ground (always zero).
    pub node_voltages: Vec<Phasor>,
    /// Series current of each [`Branch`], flowing from `from` to `to`.
    pub branch_currents: Vec<Phasor>,
    /// Series phase currents of each [`CoupledBranch`], flowing from `from` to `to`.
    pub coupled_currents: Vec<[Phasor; 3]>,
    /// Current each source delivers into its node.
    pub source_currents: Vec<Phasor>,
}

impl PhasorSolution {
    pub fn voltage(&self, node: usize) -> Phasor {
        self.node_voltages[node]
    }
}

/// Factorized network, reusable for many right-hand sides.
///
/// Immutable after construction, so one solver can be shared across threads.
#[derive(Debug, Clone)]
pub struct PhasorSolver {
    net: PhasorNetwork,
    lu: LU<Phasor, Dyn, Dyn>,
    norton: DVector<Phasor>,
}

impl PhasorSolver {
    pub fn new(net: &PhasorNetwork) -> Result<Self, PhasorError> {
        net.validate()?;
        if net.node_count == 0 {
            return Err(PhasorError::Singular);
        }
        if let Some(node) = net.floating_node() {
            return Err(PhasorError::FloatingNode(node));
        }
        let mut y = stamp_passive(net);
        let mut norton = DVector::<Phasor>::zeros(net.node_count);
        for s in &net.sources {
            let ys = s.internal_impedance.inv();
            y[(s.node - 1, s.node - 1)] += ys;
            norton[s.node - 1] += s.emf * ys;
        }
        let lu = y.lu();
        if !lu.is_invertible() {
            return Err(PhasorError::Singular);
        }
        Ok(Self {
            net: net.clone(),
            lu,
            norton,
        })
    }

    pub fn network(&self) -> &PhasorNetwork {
        &self.net
    }

    pub fn solve(&self) -> PhasorSolution {
        self.solve_with_injections(&[])
    }

    /// Solves with additional current injections `(node, amperes into node)`.
    pub fn solve_with_injections(&self, injections: &[(usize, Phasor)]) -> PhasorSolution {
        let mut rhs = self.norton.clone();
        for &(node, i) in injections {
            if node > 0 {
                rhs[node - 1] += i;
            }
        }
        let v = self
            .lu
            .solve(&rhs)
            .expect("factorization checked invertible at construction");
        let mut node_voltages = Vec::with_capacity(v.len() + 1);
        node_voltages.push(Phasor::new(0.0, 0.0));
        node_voltages.extend(v.iter().copied());
        let net = &self.net;
        let branch_currents = net
            .branches
            .iter()
            .map(|b| (node_voltages[b.from] - node_voltages[b.to]) / b.series_impedance)
            .collect();
        let coupled_currents = net
            .coupled
            .iter()
            .map(|c| {
                let dv = Vector3::from_fn(|k, _| node_voltages[c.from[k]] - node_voltages[c.to[k]]);
                let i = c
                    .series_impedance
                    .try_inverse()
                    .unwrap_or_else(Matrix3::zeros)
                    * dv;
                [i[0], i[1], i[2]]
            })
            .collect();
        let source_currents = net
            .sources
            .iter()
            .map(|s| (s.emf - node_voltages[s.node]) / s.internal_impedance)
            .collect();
        PhasorSolution {
            node_voltages,
            branch_currents,
            coupled_currents,
            source_currents,
        }
    }
}

/// One-shot steady-state solve of a network with at least one source.
pub fn solve_steady_state(net: &PhasorNetwork) -> Result<PhasorSolution, PhasorError> {
    if net.sources.is_empty() {
        return Err(PhasorError::NoSource);
    }
    Ok(PhasorSolver::new(net)?.solve())
}

/// RMS magnitude of each requested node voltage.
pub fn rms_report(sol: &PhasorSolution, nodes: &[usize]) -> Result<Vec<f64>, PhasorError> {
    nodes
        .iter()
        .map(|&n| {
            sol.node_voltages
                .get(n)
                .map(|v| v.norm())
                .ok_or(PhasorError::UnknownNode(n))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Phasor {
        Phasor::new(re, im)
    }

    #[test]
    fn two_node_stamp() {
        let mut net = PhasorNetwork::new(2);
        net.add_branch(1, 2, c(1.0, 0.0), c(0.0, 0.0));
        let y = assemble_admittance(&net).unwrap();
        assert_eq!(y[(0, 0)], c(1.0, 0.0));
        assert_eq!(y[(0, 1)], c(-1.0, 0.0));
        assert_eq!(y[(1, 0)], c(-1.0, 0.0));
        assert_eq!(y[(1, 1)], c(1.0, 0.0));
    }

    #[test]
    fn empty_network_is_singular() {
        let net = PhasorNetwork::new(0);
        assert_eq!(assemble_admittance(&net), Err(PhasorError::Singular));
    }

    #[test]
    fn isolated_node_is_named() {
        let mut net = PhasorNetwork::new(3);
        net.add_branch(1, 0, c(1.0, 0.0), c(0.0, 0.0));
        net.add_branch(2, 0, c(1.0, 0.0), c(0.0, 0.0));
        assert_eq!(assemble_admittance(&net), Err(PhasorError::FloatingNode(3)));
    }

    #[test]
    fn floating_island_is_named() {
        let mut net = PhasorNetwork::new(3);
        net.add_source(1, c(1.0, 0.0), c(1.0, 0.0));
        net.add_branch(2, 3, c(1.0, 0.0), c(0.0, 0.0));
        assert_eq!(
            solve_steady_state(&net).unwrap_err(),
            PhasorError::FloatingNode(2)
        );
    }

    #[test]
    fn divider() {
        let mut net = PhasorNetwork::new(1);
        net.add_source(1, c(1.0, 0.0), c(1.0, 0.0));
        net.add_branch(1, 0, c(1.0, 0.0), c(0.0, 0.0));
        let sol = solve_steady_state(&net).unwrap();
        assert!((sol.voltage(1) - c(0.5, 0.0)).norm() < 1e-15);
        assert!((sol.source_currents[0] - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn no_source_is_rejected() {
        let mut net = PhasorNetwork::new(1);
        net.add_branch(1, 0, c(1.0, 0.0), c(0.0, 0.0));
        assert_eq!(solve_steady_state(&net), Err(PhasorError::NoSource));
    }

    #[test]
    fn out_of_range_endpoint() {
        let mut net = PhasorNetwork::new(1);
        net.add_branch(1, 5, c(1.0, 0.0), c(0.0, 0.0));
        assert!(matches!(
            assemble_admittance(&net),
            Err(PhasorError::NodeOutOfRange { node: 5, .. })
        ));
    }

    #[test]
    fn rms_is_magnitude_and_unknown_node_errors() {
        let sol = PhasorSolution {
            node_voltages: vec![c(0.0, 0.0), c(230940.0, 0.0), c(3.0, 4.0)],
            branch_currents: vec![],
            coupled_currents: vec![],
            source_currents: vec![],
        };
        assert_eq!(rms_report(&sol, &[1, 2]).unwrap(), vec![230940.0, 5.0]);
        assert_eq!(rms_report(&sol, &[7]), Err(PhasorError::UnknownNode(7)));
    }
}
