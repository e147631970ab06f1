use std::io::Write;

use nalgebra::{DMatrix, DVector, Dyn, LU};

use super::{
    discretize, flashover_eval, BergeronLine, CompanionBranch, ElementKind, EmtError,
    SwitchControl, TimeGrid, Waveform, CLOSED_SWITCH_CONDUCTANCE,
};

#[derive(Debug, Clone)]
struct Lumped {
    from: usize,
    to: usize,
    branch: CompanionBranch,
    initial_current: f64,
}

#[derive(Debug, Clone)]
struct LineElement {
    send: Vec<usize>,
    recv: Vec<usize>,
    line: BergeronLine,
}

#[derive(Debug, Clone)]
struct Shunt {
    nodes: Vec<usize>,
    g: DMatrix<f64>,
    injection: DVector<f64>,
}

pub type SwitchId = usize;

/// Time-domain network of companion elements, Bergeron lines, sources and
/// switches for one fixed step size.
#[derive(Debug, Clone)]
pub struct EmtNetwork {
    dt: f64,
    node_count: usize,
    initial_voltages: Vec<f64>,
    lumped: Vec<Lumped>,
    lines: Vec<LineElement>,
    current_sources: Vec<(usize, Waveform)>,
    voltage_sources: Vec<(usize, Waveform, f64)>,
    shunts: Vec<Shunt>,
    switches: Vec<SwitchControl>,
}

impl EmtNetwork {
    pub fn new(node_count: usize, dt: f64) -> Result<Self, EmtError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(EmtError::InvalidStep(dt));
        }
        Ok(Self {
            dt,
            node_count,
            initial_voltages: vec![0.0; node_count + 1],
            lumped: Vec::new(),
            lines: Vec::new(),
            current_sources: Vec::new(),
            voltage_sources: Vec::new(),
            shunts: Vec::new(),
            switches: Vec::new(),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn add_node(&mut self) -> usize {
        self.node_count += 1;
        self.initial_voltages.push(0.0);
        self.node_count
    }

    /// Element counts: (nodes, lumped, lines, sources, shunts, switches).
    pub fn shape(&self) -> (usize, usize, usize, usize, usize, usize) {
        (
            self.node_count,
            self.lumped.len(),
            self.lines.len(),
            self.current_sources.len() + self.voltage_sources.len(),
            self.shunts.len(),
            self.switches.len(),
        )
    }

    fn check(&self, nodes: &[usize]) -> Result<(), EmtError> {
        match nodes.iter().find(|&&n| n > self.node_count) {
            Some(&node) => Err(EmtError::NodeOutOfRange {
                node,
                node_count: self.node_count,
            }),
            None => Ok(()),
        }
    }

    fn add_lumped(
        &mut self,
        from: usize,
        to: usize,
        kind: ElementKind,
        value: f64,
        initial_current: f64,
    ) -> Result<(), EmtError> {
        self.check(&[from, to])?;
        let branch = discretize(kind, value, self.dt)?;
        self.lumped.push(Lumped {
            from,
            to,
            branch,
            initial_current,
        });
        Ok(())
    }

    pub fn add_resistor(&mut self, from: usize, to: usize, ohms: f64) -> Result<(), EmtError> {
        self.add_lumped(from, to, ElementKind::R, ohms, 0.0)
    }

    /// Inductor carrying `i0` amperes from `from` to `to` at t = 0.
    pub fn add_inductor(
        &mut self,
        from: usize,
        to: usize,
        henries: f64,
        i0: f64,
    ) -> Result<(), EmtError> {
        self.add_lumped(from, to, ElementKind::L, henries, i0)
    }

    /// Capacitor with current `i0` (from → to) at t = 0. Its initial voltage
    /// is taken from the initial node voltages.
    pub fn add_capacitor(
        &mut self,
        from: usize,
        to: usize,
        farads: f64,
        i0: f64,
    ) -> Result<(), EmtError> {
        self.add_lumped(from, to, ElementKind::C, farads, i0)
    }

    /// Connects a line between two node lists (one node per conductor).
    /// Node 0 is allowed for a grounded conductor end.
    pub fn add_line(
        &mut self,
        send: &[usize],
        recv: &[usize],
        line: BergeronLine,
    ) -> Result<(), EmtError> {
        let n = line.conductors();
        if send.len() != n || recv.len() != n {
            return Err(EmtError::Dimension(format!(
                "{n}-conductor line given {} and {} end nodes",
                send.len(),
                recv.len()
            )));
        }
        self.check(send)?;
        self.check(recv)?;
        self.lines.push(LineElement {
            send: send.to_vec(),
            recv: recv.to_vec(),
            line,
        });
        Ok(())
    }

    /// Current source injecting `waveform` amperes into `node`.
    pub fn add_current_source(&mut self, node: usize, waveform: Waveform) -> Result<(), EmtError> {
        self.check(&[node])?;
        self.current_sources.push((node, waveform));
        Ok(())
    }

    /// Ideal voltage source to ground behind a series resistance.
    pub fn add_voltage_source(
        &mut self,
        node: usize,
        waveform: Waveform,
        ohms: f64,
    ) -> Result<(), EmtError> {
        self.check(&[node])?;
        if !(ohms.is_finite() && ohms > 0.0) {
            return Err(EmtError::NonPositiveValue {
                kind: ElementKind::R,
                value: ohms,
            });
        }
        self.voltage_sources.push((node, waveform, 1.0 / ohms));
        Ok(())
    }

    /// Constant conductance matrix to ground across `nodes` with a constant
    /// Norton injection; used for matched multi-conductor terminations.
    pub fn add_shunt_matrix(
        &mut self,
        nodes: &[usize],
        g: DMatrix<f64>,
        injection: DVector<f64>,
    ) -> Result<(), EmtError> {
        self.check(nodes)?;
        if g.nrows() != nodes.len() || g.ncols() != nodes.len() || injection.len() != nodes.len() {
            return Err(EmtError::Dimension("shunt matrix size mismatch".into()));
        }
        self.shunts.push(Shunt {
            nodes: nodes.to_vec(),
            g,
            injection,
        });
        Ok(())
    }

    pub fn add_switch(&mut self, control: SwitchControl) -> Result<SwitchId, EmtError> {
        let (a, b) = control.nodes();
        self.check(&[a, b])?;
        self.switches.push(control);
        Ok(self.switches.len() - 1)
    }

    pub fn set_initial_voltage(&mut self, node: usize, volts: f64) -> Result<(), EmtError> {
        self.check(&[node])?;
        if node != 0 {
            self.initial_voltages[node] = volts;
        }
        Ok(())
    }
}

fn stamp_pair(g: &mut DMatrix<f64>, a: usize, b: usize, value: f64) {
    if a != 0 {
        g[(a - 1, a - 1)] += value;
    }
    if b != 0 {
        g[(b - 1, b - 1)] += value;
    }
    if a != 0 && b != 0 {
        g[(a - 1, b - 1)] -= value;
        g[(b - 1, a - 1)] -= value;
    }
}

fn stamp_block(g: &mut DMatrix<f64>, nodes: &[usize], block: &DMatrix<f64>) {
    for (i, &a) in nodes.iter().enumerate() {
        for (j, &b) in nodes.iter().enumerate() {
            if a != 0 && b != 0 {
                g[(a - 1, b - 1)] += block[(i, j)];
            }
        }
    }
}

fn inject(rhs: &mut DVector<f64>, node: usize, current: f64) {
    if node != 0 {
        rhs[node - 1] += current;
    }
}

fn gather(v: &[f64], nodes: &[usize]) -> DVector<f64> {
    DVector::from_iterator(nodes.len(), nodes.iter().map(|&n| v[n]))
}

/// Node voltages sampled over a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub nodes: Vec<usize>,
    pub times: Vec<f64>,
    /// `values[k][i]` is node `nodes[i]` at `times[k]`.
    pub values: Vec<Vec<f64>>,
}

impl Trace {
    pub fn series(&self, node: usize) -> Option<Vec<f64>> {
        let col = self.nodes.iter().position(|&n| n == node)?;
        Some(self.values.iter().map(|row| row[col]).collect())
    }
}

/// Steps an [`EmtNetwork`] forward in time.
pub struct EmtSolver {
    net: EmtNetwork,
    step: usize,
    v: Vec<f64>,
    base: DMatrix<f64>,
    closed: Vec<bool>,
    lu: LU<f64, Dyn, Dyn>,
    refactor: bool,
    flashovers: Vec<(SwitchId, f64, f64)>,
}

impl EmtSolver {
    /// Sets the t = 0 state from the network's initial conditions.
    pub fn new(mut net: EmtNetwork) -> Result<Self, EmtError> {
        let v0 = net.initial_voltages.clone();
        for el in &mut net.lumped {
            let v = v0[el.from] - v0[el.to];
            el.branch.advance(v, el.initial_current);
        }
        for el in &mut net.lines {
            let (vs, vr) = (gather(&v0, &el.send), gather(&v0, &el.recv));
            el.line.prime(&vs, &vr);
        }
        let n = net.node_count;
        let mut base = DMatrix::zeros(n, n);
        for el in &net.lumped {
            stamp_pair(&mut base, el.from, el.to, el.branch.conductance);
        }
        for el in &net.lines {
            stamp_block(&mut base, &el.send, el.line.yc());
            stamp_block(&mut base, &el.recv, el.line.yc());
        }
        for &(node, _, g) in &net.voltage_sources {
            stamp_pair(&mut base, node, 0, g);
        }
        for sh in &net.shunts {
            stamp_block(&mut base, &sh.nodes, &sh.g);
        }
        let closed: Vec<bool> = net.switches.iter().map(|s| s.closed_at(0.0)).collect();
        let lu = Self::factor(&base, &net.switches, &closed, 0.0)?;
        Ok(Self {
            net,
            step: 0,
            v: v0,
            base,
            closed,
            lu,
            refactor: false,
            flashovers: Vec::new(),
        })
    }

    fn factor(
        base: &DMatrix<f64>,
        switches: &[SwitchControl],
        closed: &[bool],
        t: f64,
    ) -> Result<LU<f64, Dyn, Dyn>, EmtError> {
        let mut g = base.clone();
        for (sw, &on) in switches.iter().zip(closed) {
            if on {
                let (a, b) = sw.nodes();
                stamp_pair(&mut g, a, b, CLOSED_SWITCH_CONDUCTANCE);
            }
        }
        if g.nrows() == 0 {
            return Ok(g.lu());
        }
        let lu = g.lu();
        let u = lu.u();
        let scale = u.diagonal().amax().max(f64::MIN_POSITIVE);
        if u.diagonal().iter().any(|d| d.abs() <= scale * 1e-15) {
            return Err(EmtError::Singular(t));
        }
        Ok(lu)
    }

    pub fn dt(&self) -> f64 {
        self.net.dt
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.net.dt
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    /// Node voltages at the current time, indexed by node (entry 0 is ground).
    pub fn voltages(&self) -> &[f64] {
        &self.v
    }

    pub fn switch(&self, id: SwitchId) -> &SwitchControl {
        &self.net.switches[id]
    }

    pub fn switch_closed(&self, id: SwitchId) -> bool {
        self.closed[id]
    }

    /// Flashover closures so far as (switch, time, voltage across at closing).
    pub fn flashovers(&self) -> &[(SwitchId, f64, f64)] {
        &self.flashovers
    }

    /// Advances one step and returns the node voltages at the new time.
    pub fn step(&mut self) -> Result<&[f64], EmtError> {
        let step = self.step + 1;
        let t = step as f64 * self.net.dt;
        if self.refactor {
            self.lu = Self::factor(&self.base, &self.net.switches, &self.closed, t)?;
            self.refactor = false;
        }

        let n = self.net.node_count;
        let mut rhs = DVector::zeros(n);
        for el in &self.net.lumped {
            let h = el.branch.history_current;
            inject(&mut rhs, el.from, -h);
            inject(&mut rhs, el.to, h);
        }
        for el in &mut self.net.lines {
            el.line.bergeron_update(step);
            for (nodes, end) in [(&el.send, 0), (&el.recv, 1)] {
                let h = el.line.history(end);
                for (k, &node) in nodes.iter().enumerate() {
                    inject(&mut rhs, node, -h[k]);
                }
            }
        }
        for (node, wf) in &self.net.current_sources {
            inject(&mut rhs, *node, wf.eval(t));
        }
        for (node, wf, g) in &self.net.voltage_sources {
            inject(&mut rhs, *node, wf.eval(t) * g);
        }
        for sh in &self.net.shunts {
            for (k, &node) in sh.nodes.iter().enumerate() {
                inject(&mut rhs, node, sh.injection[k]);
            }
        }

        let x = if n == 0 {
            rhs
        } else {
            self.lu.solve(&rhs).ok_or(EmtError::Singular(t))?
        };
        self.v[0] = 0.0;
        self.v[1..].copy_from_slice(x.as_slice());
        self.step = step;

        let v = &self.v;
        for el in &mut self.net.lumped {
            let vb = v[el.from] - v[el.to];
            let i = el.branch.current(vb);
            el.branch.advance(vb, i);
        }
        for el in &mut self.net.lines {
            let (vs, vr) = (gather(v, &el.send), gather(v, &el.recv));
            el.line.record(step, &vs, &vr);
        }

        for (id, sw) in self.net.switches.iter_mut().enumerate() {
            let now = match sw {
                SwitchControl::Flashover(f) => {
                    let (a, b) = f.across_nodes;
                    let across = v[a] - v[b];
                    if !f.closed {
                        *f = flashover_eval(f, across, t);
                        if f.closed {
                            self.flashovers.push((id, t, across));
                        }
                    }
                    f.closed
                }
                timed => timed.closed_at(t + self.net.dt),
            };
            if now != self.closed[id] {
                self.closed[id] = now;
                self.refactor = true;
            }
        }
        Ok(&self.v)
    }

    /// Runs to the end of `grid`, sampling `probes` every `decimation` steps
    /// (t = 0 and the final step are always included).
    pub fn run(
        &mut self,
        grid: &TimeGrid,
        probes: &[usize],
        decimation: usize,
    ) -> Result<Trace, EmtError> {
        let decimation = decimation.max(1);
        let steps = grid.step_count();
        let mut trace = Trace {
            nodes: probes.to_vec(),
            times: Vec::new(),
            values: Vec::new(),
        };
        let sample = |s: &Self, trace: &mut Trace| {
            trace.times.push(s.time());
            trace.values.push(probes.iter().map(|&p| s.v[p]).collect());
        };
        sample(self, &mut trace);
        for k in 1..=steps {
            self.step()?;
            if k % decimation == 0 || k == steps {
                sample(self, &mut trace);
            }
        }
        Ok(trace)
    }
}

/// Writes a trace as `time_s,node,volts` rows.
pub fn write_waveform_csv<W: Write>(trace: &Trace, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time_s", "node", "volts"])?;
    for (t, row) in trace.times.iter().zip(&trace.values) {
        for (node, v) in trace.nodes.iter().zip(row) {
            w.write_record([format!("{t:e}"), node.to_string(), format!("{v:e}")])?;
        }
    }
    w.flush()?;
    Ok(())
}
