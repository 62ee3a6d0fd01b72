//! Boundary-point subproblem: branch-flow model with a second-order-cone
//! relaxation, resource deviation constraints and one of four import
//! objectives.
//!
//! Everything inside the program is per unit on the network MVA base. Bus
//! voltages appear squared (`w`), branch currents squared (`ℓ`). A tapped
//! branch carries an extra variable `u = t² w_up` for the squared voltage
//! behind the ideal transformer, bounded by the tap range.
//!
//! The relaxation can be inexact when the objective rewards losses (maximum
//! import). [`Model::solve_point`] then searches for the best point it can
//! certify as exact, see [`OpfSettings::tighten`].

use serde::{Deserialize, Serialize};

use crate::der::{self, capability_set, DispatchPoint, Resource, Snapshot, DEFAULT_ARC_SEGMENTS};
use crate::error::{NoeError, Result};
use crate::geometry::{PqPoint, PqPolygon};
use crate::network::{Network, Topology};
use crate::solver::{self, Cone, ConvexProgram, Triplets};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    MinPImport,
    MaxPImport,
    MinQImport,
    MaxQImport,
}

impl Objective {
    /// +1 for minimization, −1 for maximization.
    pub fn sense(self) -> f64 {
        match self {
            Objective::MinPImport | Objective::MinQImport => 1.0,
            Objective::MaxPImport | Objective::MaxQImport => -1.0,
        }
    }

    pub fn is_active(self) -> bool {
        matches!(self, Objective::MinPImport | Objective::MaxPImport)
    }
}

/// Resource constraints of one envelope kind.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub deviation: bool,
    pub tau_s: Option<f64>,
    pub psi_h: Option<f64>,
    pub cost_per_h: Option<f64>,
}

impl ConstraintSet {
    pub fn feasibility() -> Self {
        Self { deviation: true, ..Self::default() }
    }
    pub fn ramp(tau_s: f64) -> Self {
        Self { deviation: true, tau_s: Some(tau_s), ..Self::default() }
    }
    pub fn duration(psi_h: f64) -> Self {
        Self { deviation: true, psi_h: Some(psi_h), ..Self::default() }
    }
    pub fn economic(cost_per_h: f64) -> Self {
        Self { deviation: true, cost_per_h: Some(cost_per_h), ..Self::default() }
    }
    pub fn technical(tau_s: f64, psi_h: f64) -> Self {
        Self { deviation: true, tau_s: Some(tau_s), psi_h: Some(psi_h), cost_per_h: None }
    }
    pub fn commercial(tau_s: f64, psi_h: f64, cost_per_h: f64) -> Self {
        Self { deviation: true, tau_s: Some(tau_s), psi_h: Some(psi_h), cost_per_h: Some(cost_per_h) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubproblemSpec {
    pub objective: Objective,
    pub constraints: ConstraintSet,
    /// Binding reactive import in MVAr.
    pub q_fix: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpfSettings {
    pub arc_segments: usize,
    /// Search for an exact point when the relaxation is inexact.
    pub tighten: bool,
    /// Relative cone slack below which a branch counts as exact.
    pub exact_tol: f64,
    /// Resolution of the objective search (pu).
    pub search_tol: f64,
    pub solver: solver::Settings,
}

impl Default for OpfSettings {
    fn default() -> Self {
        Self {
            arc_segments: DEFAULT_ARC_SEGMENTS,
            tighten: true,
            exact_tol: 1e-6,
            search_tol: 1e-7,
            solver: solver::Settings::default(),
        }
    }
}

/// A controllable injection at a bus, in MW/MVAr, injection positive.
#[derive(Debug, Clone, PartialEq)]
pub struct Unit {
    pub id: String,
    pub bus: String,
    pub capability: PqPolygon,
    pub dispatch: PqPoint,
    /// Admissible active deviation, possibly infinite.
    pub dp_range: (f64, f64),
    pub rho_p: f64,
    pub rho_q: f64,
}

impl Unit {
    pub fn from_resource(r: &Resource, snap: &Snapshot, cs: &ConstraintSet, arc_segments: usize) -> Result<Self> {
        let capability = capability_set(r, arc_segments)?;
        let DispatchPoint { p_lambda, q_lambda } = snap.dispatch_of(&r.id);
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        if let Some(tau) = cs.tau_s {
            let (a, b) = der::deviation_bounds_ramp(r, tau, p_lambda);
            lo = lo.max(a);
            hi = hi.min(b);
        }
        if let Some(psi) = cs.psi_h {
            if r.is_storage() {
                let e = snap.soc_of(&r.id).ok_or_else(|| {
                    NoeError::input("snapshot.soc", format!("missing state of charge for storage '{}'", r.id))
                })?;
                let (a, b) = der::deviation_bounds_energy(r, psi, snap.dt_h, e, p_lambda)?;
                lo = lo.max(a);
                hi = hi.min(b);
            }
        }
        Ok(Self {
            id: r.id.clone(),
            bus: r.bus.clone(),
            capability,
            dispatch: PqPoint::new(p_lambda, q_lambda),
            dp_range: (lo, hi),
            rho_p: r.rho_p_per_mwh,
            rho_q: r.rho_q_per_mvarh,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NumericFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitResult {
    pub id: String,
    pub p_mw: f64,
    pub q_mvar: f64,
    pub dp_mw: f64,
    pub dq_mvar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchResult {
    pub p_mw: f64,
    pub q_mvar: f64,
    /// Squared current (pu).
    pub l_pu: f64,
    /// Squared sending-side voltage behind the tap (pu).
    pub u_pu: f64,
    /// Relative cone slack.
    pub cone_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub status: SolveStatus,
    /// Import at the root (MW, MVAr).
    pub s_import: PqPoint,
    pub units: Vec<UnitResult>,
    /// Squared bus voltages (pu), in network bus order.
    pub bus_w: Vec<f64>,
    pub branches: Vec<BranchResult>,
    /// Objective in MW or MVAr (import, not the minimization sense).
    pub objective: f64,
    /// Objective of the plain relaxation, an outer bound.
    pub relaxed_objective: f64,
    pub exact: bool,
    pub solves: usize,
}

impl Solution {
    fn failed(status: SolveStatus, solves: usize) -> Self {
        Self {
            status,
            s_import: PqPoint::new(f64::NAN, f64::NAN),
            units: Vec::new(),
            bus_w: Vec::new(),
            branches: Vec::new(),
            objective: f64::NAN,
            relaxed_objective: f64::NAN,
            exact: false,
            solves,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Largest relative cone slack over all branches, 0 for an exact solution.
pub fn cone_tightness(sol: &Solution) -> f64 {
    sol.branches.iter().map(|b| b.cone_residual).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy)]
enum Mode {
    Relaxed,
    /// Adds `scale · Σ γ ℓ` to the objective.
    Penalized(f64),
    /// Minimizes `Σ γ ℓ` with the objective held at least as good as `level`.
    LossTest(f64),
}

#[derive(Debug, Clone, Default)]
struct Layout {
    nvar: usize,
    w: Vec<usize>,
    bp: Vec<usize>,
    bq: Vec<usize>,
    bl: Vec<usize>,
    bu: Vec<Option<usize>>,
    up: Vec<usize>,
    uq: Vec<usize>,
    udp: Vec<Option<usize>>,
    udq: Vec<Option<usize>>,
    pimp: usize,
    qimp: usize,
}

type Expr = Vec<(usize, f64)>;

#[derive(Default)]
struct Rows {
    eq: Vec<(Expr, f64)>,
    ineq: Vec<(Expr, f64)>,
    soc: Vec<Vec<(Expr, f64)>>,
}

impl Rows {
    /// `Σ a x = b`
    fn eq(&mut self, e: Expr, b: f64) {
        self.eq.push((e, b));
    }
    /// `Σ a x ≤ b`
    fn le(&mut self, e: Expr, b: f64) {
        self.ineq.push((e, b));
    }
    /// Cone over affine components `c₀ + Σ a x`.
    fn soc(&mut self, comps: Vec<(Expr, f64)>) {
        let block = comps
            .into_iter()
            .map(|(e, c0)| (e.into_iter().map(|(i, a)| (i, -a)).collect(), c0))
            .collect();
        self.soc.push(block);
    }

    fn into_program(self, c: Vec<f64>) -> ConvexProgram {
        let n = c.len();
        let mut a = Triplets { n, ..Default::default() };
        let mut b = Vec::new();
        let mut cones = Vec::new();
        let mut row = 0;
        let push_scaled = |a: &mut Triplets, b: &mut Vec<f64>, e: &Expr, rhs: f64, row: usize| {
            let s = e.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max);
            let s = if s > 0.0 { s } else { 1.0 };
            for &(i, v) in e {
                a.push(row, i, v / s);
            }
            b.push(rhs / s);
        };
        for (e, rhs) in &self.eq {
            push_scaled(&mut a, &mut b, e, *rhs, row);
            row += 1;
        }
        if !self.eq.is_empty() {
            cones.push(Cone::Zero(self.eq.len()));
        }
        for (e, rhs) in &self.ineq {
            push_scaled(&mut a, &mut b, e, *rhs, row);
            row += 1;
        }
        if !self.ineq.is_empty() {
            cones.push(Cone::Nonneg(self.ineq.len()));
        }
        for block in &self.soc {
            for (e, rhs) in block {
                for &(i, v) in e {
                    a.push(row, i, v);
                }
                b.push(*rhs);
                row += 1;
            }
            cones.push(Cone::Soc(block.len()));
        }
        a.m = row;
        ConvexProgram { c, a, b, cones }
    }
}

/// Load demand as `const + Σ coef · var` (pu), for both p and q.
struct LoadModel {
    p: (f64, Expr),
    q: (f64, Expr),
}

/// A validated network with its units, ready to build subproblems.
#[derive(Debug, Clone)]
pub struct Model {
    net: Network,
    topo: Topology,
    units: Vec<Unit>,
    unit_bus: Vec<usize>,
    constraints: ConstraintSet,
    pub settings: OpfSettings,
}

/// A built program together with what is needed to read its solution.
#[derive(Debug, Clone)]
pub struct Subproblem {
    pub program: ConvexProgram,
    pub spec: SubproblemSpec,
    layout: Layout,
}

impl Subproblem {
    /// Standard-form dump for external solvers.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.program).expect("program serializes")
    }
}

/// Builds the relaxed program for one boundary point.
pub fn build_subproblem(net: &Network, snap: &Snapshot, spec: &SubproblemSpec) -> Result<Subproblem> {
    let model = Model::new(net, snap, spec.constraints, OpfSettings::default())?;
    Ok(model.subproblem(spec.objective, spec.q_fix))
}

/// Solves a built program as is (no tightening).
pub fn solve(sub: &Subproblem, model: &Model) -> Solution {
    model.run(sub, 1)
}

impl Model {
    pub fn new(net: &Network, snap: &Snapshot, constraints: ConstraintSet, settings: OpfSettings) -> Result<Self> {
        snap.check(&net.resources, settings.arc_segments)?;
        let units = net
            .resources
            .iter()
            .map(|r| Unit::from_resource(r, snap, &constraints, settings.arc_segments))
            .collect::<Result<Vec<_>>>()?;
        Self::with_units(net, units, constraints, settings)
    }

    /// Model over explicit units; the network's own resources are ignored.
    pub fn with_units(net: &Network, units: Vec<Unit>, constraints: ConstraintSet, settings: OpfSettings) -> Result<Self> {
        let topo = Topology::build(net).map_err(|m| NoeError::input("network.branches", m))?;
        let unit_bus = units
            .iter()
            .map(|u| {
                topo.bus_index
                    .get(&u.bus)
                    .copied()
                    .ok_or_else(|| NoeError::input(format!("units[{}].bus", u.id), format!("unknown bus '{}'", u.bus)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { net: net.clone(), topo, units, unit_bus, constraints, settings })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn constraints(&self) -> ConstraintSet {
        self.constraints
    }

    fn base(&self) -> f64 {
        self.net.base_mva
    }

    fn gamma(&self, k: usize) -> f64 {
        let br = &self.net.branches[k];
        2.0 * (br.r_pu.abs() + br.x_pu.abs())
    }

    fn layout(&self, rows: &mut Rows, loads: &mut Vec<LoadModel>) -> Layout {
        let nb = self.net.buses.len();
        let nl = self.net.branches.len();
        let mut n = 0;
        let mut next = || {
            n += 1;
            n - 1
        };
        let mut lay = Layout::default();
        lay.w = (0..nb).map(|_| next()).collect();
        for br in &self.net.branches {
            lay.bp.push(next());
            lay.bq.push(next());
            lay.bl.push(next());
            lay.bu.push(br.tap.map(|_| next()));
        }
        debug_assert_eq!(lay.bp.len(), nl);
        let cs = &self.constraints;
        for u in &self.units {
            lay.up.push(next());
            lay.uq.push(next());
            let dev = cs.deviation || cs.tau_s.is_some() || cs.psi_h.is_some() || cs.cost_per_h.is_some();
            lay.udp.push(dev.then(|| next()));
            lay.udq.push(dev.then(|| next()));
            let _ = u;
        }
        lay.pimp = next();
        lay.qimp = next();
        // load variables
        let base = self.base();
        for l in &self.net.loads {
            let j = self.topo.bus_index[&l.bus];
            let wj = lay.w[j];
            let (p0, q0) = (l.p_mw / base, l.q_mvar / base);
            let lin = |k0: f64, e: f64| -> (f64, Expr) {
                if e == 0.0 {
                    (k0, vec![])
                } else if e == 2.0 {
                    (0.0, vec![(wj, k0)])
                } else {
                    (k0 * (1.0 - e / 2.0), vec![(wj, k0 * e / 2.0)])
                }
            };
            if l.curtail_max <= 0.0 {
                loads.push(LoadModel { p: lin(p0, l.exp_p), q: lin(q0, l.exp_q) });
                continue;
            }
            let zmax = l.curtail_max.min(1.0);
            let v = next();
            if l.exp_p == 2.0 && l.exp_q == 2.0 {
                // y = (1 - ζ) w
                rows.le(vec![(v, 1.0), (wj, -1.0)], 0.0);
                rows.le(vec![(v, -1.0), (wj, 1.0 - zmax)], 0.0);
                loads.push(LoadModel { p: (0.0, vec![(v, p0)]), q: (0.0, vec![(v, q0)]) });
            } else {
                // m = 1 - ζ
                rows.le(vec![(v, 1.0)], 1.0);
                rows.le(vec![(v, -1.0)], -(1.0 - zmax));
                let curt = |k0: f64, e: f64| -> (f64, Expr) {
                    if e == 0.0 {
                        (0.0, vec![(v, k0)])
                    } else {
                        (-k0 * e / 2.0, vec![(v, k0), (wj, k0 * e / 2.0)])
                    }
                };
                loads.push(LoadModel { p: curt(p0, l.exp_p), q: curt(q0, l.exp_q) });
            }
        }
        lay.nvar = n;
        lay
    }

    fn build(&self, objective: Objective, q_fix: Option<f64>, mode: Mode) -> (ConvexProgram, Layout) {
        let base = self.base();
        let mut rows = Rows::default();
        let mut loads = Vec::new();
        let lay = self.layout(&mut rows, &mut loads);
        let topo = &self.topo;

        // per-bus consumption terms: loads minus unit injections
        let nb = self.net.buses.len();
        let mut bus_p: Vec<(f64, Expr)> = vec![(0.0, vec![]); nb];
        let mut bus_q: Vec<(f64, Expr)> = vec![(0.0, vec![]); nb];
        for (l, lm) in self.net.loads.iter().zip(&loads) {
            let j = topo.bus_index[&l.bus];
            bus_p[j].0 += lm.p.0;
            bus_p[j].1.extend(lm.p.1.iter().copied());
            bus_q[j].0 += lm.q.0;
            bus_q[j].1.extend(lm.q.1.iter().copied());
        }
        for (k, &j) in self.unit_bus.iter().enumerate() {
            bus_p[j].1.push((lay.up[k], -1.0));
            bus_q[j].1.push((lay.uq[k], -1.0));
        }

        rows.eq(vec![(lay.w[topo.root], 1.0)], 1.0);
        for (k, br) in self.net.branches.iter().enumerate() {
            let (i, j) = (topo.branch_up[k], topo.branch_down[k]);
            let (r, x) = (br.r_pu, br.x_pu);
            let (p, q, l) = (lay.bp[k], lay.bq[k], lay.bl[k]);
            // balance at the downstream bus: P - rℓ - Σ P_child - consumption = 0
            let mut ep: Expr = vec![(p, 1.0), (l, -r)];
            let mut eq: Expr = vec![(q, 1.0), (l, -x)];
            for &c in &topo.children[j] {
                let kb = topo.parent_branch[c].expect("child has parent branch");
                ep.push((lay.bp[kb], -1.0));
                eq.push((lay.bq[kb], -1.0));
            }
            ep.extend(bus_p[j].1.iter().map(|&(v, a)| (v, -a)));
            eq.extend(bus_q[j].1.iter().map(|&(v, a)| (v, -a)));
            rows.eq(ep, bus_p[j].0);
            rows.eq(eq, bus_q[j].0);
            // voltage drop
            let u_term = match lay.bu[k] {
                Some(u) => u,
                None => lay.w[i],
            };
            let z2 = r * r + x * x;
            rows.eq(vec![(lay.w[j], 1.0), (u_term, -1.0), (p, 2.0 * r), (q, 2.0 * x), (l, -z2)], 0.0);
            if let (Some(u), Some(t)) = (lay.bu[k], br.tap) {
                rows.le(vec![(u, 1.0), (lay.w[i], -t.t_max * t.t_max)], 0.0);
                rows.le(vec![(u, -1.0), (lay.w[i], t.t_min * t.t_min)], 0.0);
            }
            // current-voltage cone
            rows.soc(vec![
                (vec![(u_term, 1.0), (l, 1.0)], 0.0),
                (vec![(p, 2.0)], 0.0),
                (vec![(q, 2.0)], 0.0),
                (vec![(u_term, 1.0), (l, -1.0)], 0.0),
            ]);
            // thermal limits at both ends
            let smax = br.s_max_mva / base;
            rows.soc(vec![(vec![], smax), (vec![(p, 1.0)], 0.0), (vec![(q, 1.0)], 0.0)]);
            if r != 0.0 || x != 0.0 {
                rows.soc(vec![
                    (vec![], smax),
                    (vec![(p, 1.0), (l, -r)], 0.0),
                    (vec![(q, 1.0), (l, -x)], 0.0),
                ]);
            }
        }
        for (j, b) in self.net.buses.iter().enumerate() {
            if j == topo.root {
                continue;
            }
            rows.le(vec![(lay.w[j], 1.0)], b.v_max_pu * b.v_max_pu);
            rows.le(vec![(lay.w[j], -1.0)], -b.v_min_pu * b.v_min_pu);
        }
        // import at the root
        let root = topo.root;
        let mut ep: Expr = vec![(lay.pimp, 1.0)];
        let mut eq: Expr = vec![(lay.qimp, 1.0)];
        for &c in &topo.children[root] {
            let kb = topo.parent_branch[c].expect("child has parent branch");
            ep.push((lay.bp[kb], -1.0));
            eq.push((lay.bq[kb], -1.0));
        }
        ep.extend(bus_p[root].1.iter().map(|&(v, a)| (v, -a)));
        eq.extend(bus_q[root].1.iter().map(|&(v, a)| (v, -a)));
        rows.eq(ep, bus_p[root].0);
        rows.eq(eq, bus_q[root].0);
        if let Some(qf) = q_fix {
            rows.eq(vec![(lay.qimp, 1.0)], qf / base);
        }

        // units
        let cs = &self.constraints;
        let mut cost_row: Expr = Vec::new();
        let mut cost_vars = 0;
        for (k, u) in self.units.iter().enumerate() {
            let (p, q) = (lay.up[k], lay.uq[k]);
            let v = u.capability.vertices();
            match v.len() {
                1 => {
                    rows.eq(vec![(p, 1.0)], v[0].p / base);
                    rows.eq(vec![(q, 1.0)], v[0].q / base);
                }
                2 => {
                    let hs = u.capability.halfplanes_any().rows;
                    rows.eq(vec![(p, hs[0].a_p), (q, hs[0].a_q)], hs[0].b / base);
                    for h in [hs[1], hs[3]] {
                        rows.le(vec![(p, h.a_p), (q, h.a_q)], h.b / base);
                    }
                }
                _ => {
                    for h in u.capability.halfplanes_any().rows {
                        rows.le(vec![(p, h.a_p), (q, h.a_q)], h.b / base);
                    }
                }
            }
            let (Some(dp), Some(dq)) = (lay.udp[k], lay.udq[k]) else { continue };
            rows.eq(vec![(dp, 1.0), (p, -1.0)], -u.dispatch.p / base);
            rows.eq(vec![(dq, 1.0), (q, -1.0)], -u.dispatch.q / base);
            let (lo, hi) = u.dp_range;
            let zero_cost_p = cs.cost_per_h.is_some_and(|c| c <= 0.0) && u.rho_p > 0.0;
            let zero_cost_q = cs.cost_per_h.is_some_and(|c| c <= 0.0) && u.rho_q > 0.0;
            if lo == hi || zero_cost_p {
                rows.eq(vec![(dp, 1.0)], if zero_cost_p { 0.0 } else { lo / base });
            } else {
                if hi.is_finite() {
                    rows.le(vec![(dp, 1.0)], hi / base);
                }
                if lo.is_finite() {
                    rows.le(vec![(dp, -1.0)], -lo / base);
                }
            }
            if zero_cost_q {
                rows.eq(vec![(dq, 1.0)], 0.0);
            }
            if cs.cost_per_h.is_some_and(|c| c > 0.0) {
                cost_vars += 1;
                for (d, rho) in [(dp, u.rho_p), (dq, u.rho_q)] {
                    if rho <= 0.0 {
                        continue;
                    }
                    // split |d| = d⁺ + d⁻ with d = d⁺ − d⁻
                    let plus = lay.nvar + cost_row.len();
                    let minus = plus + 1;
                    rows.eq(vec![(d, 1.0), (plus, -1.0), (minus, 1.0)], 0.0);
                    cost_row.push((plus, rho * base));
                    cost_row.push((minus, rho * base));
                }
            }
        }
        let mut nvar = lay.nvar;
        if cost_vars > 0 && !cost_row.is_empty() {
            nvar += cost_row.len();
            for &(v, _) in &cost_row {
                rows.le(vec![(v, -1.0)], 0.0);
            }
            rows.le(cost_row.clone(), cs.cost_per_h.unwrap_or(0.0));
        }

        let f = if objective.is_active() { lay.pimp } else { lay.qimp };
        let s = objective.sense();
        let mut c = vec![0.0; nvar];
        match mode {
            Mode::Relaxed => c[f] = s,
            Mode::Penalized(scale) => {
                c[f] = s;
                for k in 0..self.net.branches.len() {
                    c[lay.bl[k]] += scale * self.gamma(k);
                }
            }
            Mode::LossTest(level) => {
                for k in 0..self.net.branches.len() {
                    c[lay.bl[k]] += self.gamma(k);
                }
                rows.le(vec![(f, s)], level);
            }
        }
        let mut lay = lay;
        lay.nvar = nvar;
        (rows.into_program(c), lay)
    }

    /// Relaxed program for one objective.
    pub fn subproblem(&self, objective: Objective, q_fix: Option<f64>) -> Subproblem {
        let (program, layout) = self.build(objective, q_fix, Mode::Relaxed);
        Subproblem {
            program,
            spec: SubproblemSpec { objective, constraints: self.constraints, q_fix },
            layout,
        }
    }

    fn run(&self, sub: &Subproblem, solves: usize) -> Solution {
        let out = solver::solve(&sub.program, &self.settings.solver);
        let status = match out.status {
            solver::Status::Optimal => SolveStatus::Optimal,
            solver::Status::PrimalInfeasible => SolveStatus::Infeasible,
            _ => SolveStatus::NumericFailure,
        };
        if status != SolveStatus::Optimal {
            return Solution::failed(status, solves);
        }
        self.extract(&out.x, &sub.layout, sub.spec.objective, solves)
    }

    fn extract(&self, x: &[f64], lay: &Layout, objective: Objective, solves: usize) -> Solution {
        let base = self.base();
        let units = self
            .units
            .iter()
            .enumerate()
            .map(|(k, u)| {
                let p = x[lay.up[k]] * base;
                let q = x[lay.uq[k]] * base;
                UnitResult { id: u.id.clone(), p_mw: p, q_mvar: q, dp_mw: p - u.dispatch.p, dq_mvar: q - u.dispatch.q }
            })
            .collect();
        let branches = self
            .net
            .branches
            .iter()
            .enumerate()
            .map(|(k, br)| {
                let p = x[lay.bp[k]];
                let q = x[lay.bq[k]];
                let u = match lay.bu[k] {
                    Some(u) => x[u],
                    None => x[lay.w[self.topo.branch_up[k]]],
                };
                let mut l = x[lay.bl[k]];
                let residual = if br.r_pu == 0.0 && br.x_pu == 0.0 {
                    // ℓ has no physical effect here: report its exact value
                    l = (p * p + q * q) / u;
                    0.0
                } else {
                    let norm = (4.0 * p * p + 4.0 * q * q + (u - l) * (u - l)).sqrt();
                    ((u + l - norm) / (u + l)).max(0.0)
                };
                BranchResult { p_mw: p * base, q_mvar: q * base, l_pu: l, u_pu: u, cone_residual: residual }
            })
            .collect::<Vec<_>>();
        let s_import = PqPoint::new(x[lay.pimp] * base, x[lay.qimp] * base);
        let objective_value = if objective.is_active() { s_import.p } else { s_import.q };
        let mut sol = Solution {
            status: SolveStatus::Optimal,
            s_import,
            units,
            bus_w: lay.w.iter().map(|&i| x[i]).collect(),
            branches,
            objective: objective_value,
            relaxed_objective: objective_value,
            exact: false,
            solves,
        };
        sol.exact = cone_tightness(&sol) <= self.settings.exact_tol;
        sol
    }

    fn run_mode(&self, objective: Objective, q_fix: Option<f64>, mode: Mode, solves: usize) -> Solution {
        let (program, layout) = self.build(objective, q_fix, mode);
        let sub = Subproblem { program, spec: SubproblemSpec { objective, constraints: self.constraints, q_fix }, layout };
        self.run(&sub, solves)
    }

    /// `Σ γ (ℓ − (P² + Q²)/u)` over branches with impedance.
    fn fake_loss(&self, sol: &Solution) -> f64 {
        let base = self.base();
        sol.branches
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let (p, q) = (b.p_mw / base, b.q_mvar / base);
                self.gamma(k) * (b.l_pu - (p * p + q * q) / b.u_pu).max(0.0)
            })
            .sum()
    }

    /// Solves one boundary point, tightening the relaxation when needed.
    pub fn solve_point(&self, objective: Objective, q_fix: Option<f64>) -> Solution {
        let relaxed = self.run_mode(objective, q_fix, Mode::Relaxed, 1);
        if !relaxed.is_optimal() || relaxed.exact || !self.settings.tighten {
            return relaxed;
        }
        let s = objective.sense();
        let base = self.base();
        let bound = relaxed.objective;
        let mut solves = 1;
        let mut best: Option<Solution> = None;
        let mut scale = 1.0;
        for _ in 0..4 {
            solves += 1;
            let sol = self.run_mode(objective, q_fix, Mode::Penalized(scale), solves);
            if sol.is_optimal() && sol.exact {
                best = Some(sol);
                break;
            }
            scale *= 10.0;
        }
        let Some(mut best) = best else {
            let mut r = relaxed;
            r.solves = solves;
            return r;
        };
        // Search the objective level in minimization sense (pu). Levels at
        // or above `hi` are exactly attainable, levels at `lo` are not. The
        // fake loss of the min-loss solution falls roughly linearly to zero
        // at the exact optimum, so a secant on it locates the threshold.
        let mut lo = s * bound / base;
        let mut hi = s * best.objective / base;
        let tol = self.settings.search_tol;
        let mut samples: Vec<(f64, f64)> = Vec::new();
        let test = |level: f64, solves: &mut usize| {
            *solves += 1;
            self.run_mode(objective, q_fix, Mode::LossTest(level), *solves)
        };
        // the penalized point is usually close: step away from it until a
        // level is no longer exactly attainable
        let mut step = 10.0 * tol;
        while hi - step > lo {
            let probe = hi - step;
            let sol = test(probe, &mut solves);
            if sol.is_optimal() && sol.exact {
                hi = (s * sol.objective / base).min(probe);
                best = sol;
                step *= 10.0;
            } else {
                lo = probe;
                if sol.is_optimal() {
                    samples.push((probe, self.fake_loss(&sol)));
                }
                break;
            }
        }
        let mut trust = true;
        for _ in 0..60 {
            if hi - lo <= tol {
                break;
            }
            let mut probe = 0.5 * (lo + hi);
            let mut secant = false;
            if let [.., (t1, g1), (t2, g2)] = samples[..] {
                let guess = t2 + g2 * (t2 - t1) / (g1 - g2) + 0.5 * tol;
                if trust && g1 > g2 && guess > lo + 0.25 * tol {
                    // a guess past `hi` says `hi` is the threshold: confirm
                    probe = if guess < hi - 0.25 * tol { guess } else { hi - tol };
                    secant = true;
                }
            }
            let sol = test(probe, &mut solves);
            if sol.is_optimal() && sol.exact {
                hi = (s * sol.objective / base).min(probe);
                best = sol;
                // overshoot: the fake-loss curve bends, bisect once
                trust = !secant;
            } else {
                lo = probe;
                trust = true;
                if sol.is_optimal() {
                    samples.push((probe, self.fake_loss(&sol)));
                }
            }
        }
        best.relaxed_objective = bound;
        best.solves = solves;
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::load_network;

    fn two_bus(r: f64, x: f64, smax: f64) -> Network {
        load_network(&format!(
            r#"{{
            "root": "s",
            "buses": [{{"id": "s", "v_nom_kv": 11}}, {{"id": "a", "v_nom_kv": 11, "v_min_pu": 0.5, "v_max_pu": 1.5}}],
            "branches": [{{"from": "s", "to": "a", "r_pu": {r}, "x_pu": {x}, "s_max_mva": {smax}}}],
            "loads": [{{"bus": "a", "p_mw": 2.0, "q_mvar": 0.5}}],
            "resources": [{{"id": "g", "bus": "a", "kind": "synchronous_generator",
                "p_min_mw": 0, "p_max_mw": 1, "q_min_mvar": 0, "q_max_mvar": 0,
                "ramp_up_mw_s": 0.1, "ramp_down_mw_s": 0.1, "t_act_plus_s": 0, "t_act_minus_s": 0,
                "rho_p_per_mwh": 100, "rho_q_per_mvarh": 10, "committed": true}}]
        }}"#
        ))
        .unwrap()
    }

    /// Exact import of a two-bus line feeding a constant load `(p, q)` (pu),
    /// sending voltage 1, from the quadratic for the receiving voltage.
    fn two_bus_import(r: f64, x: f64, p: f64, q: f64) -> f64 {
        // w_j² - (1 - 2(rp + xq)) w_j + z²(p² + q²) = 0, larger root
        let z2 = r * r + x * x;
        let b = 1.0 - 2.0 * (r * p + x * q);
        let w = 0.5 * (b + (b * b - 4.0 * z2 * (p * p + q * q)).sqrt());
        p + r * (p * p + q * q) / w
    }

    #[test]
    fn min_import_matches_hand_power_flow() {
        let net = two_bus(0.02, 0.04, 10.0);
        let model = Model::new(&net, &Snapshot::empty(0.5), ConstraintSet::feasibility(), OpfSettings::default()).unwrap();
        let sol = model.solve_point(Objective::MinPImport, None);
        assert!(sol.is_optimal());
        assert!(sol.exact);
        // generator at 1 MW: net load 1 MW / 0.5 MVAr on 10 MVA base
        let expect = two_bus_import(0.02, 0.04, 0.1, 0.05) * 10.0;
        assert!((sol.s_import.p - expect).abs() < 1e-6, "{} vs {expect}", sol.s_import.p);
        assert!(cone_tightness(&sol) < 1e-6);
    }

    #[test]
    fn max_import_is_tightened_to_exact() {
        let net = two_bus(0.02, 0.04, 10.0);
        let model = Model::new(&net, &Snapshot::empty(0.5), ConstraintSet::feasibility(), OpfSettings::default()).unwrap();
        let sol = model.solve_point(Objective::MaxPImport, None);
        assert!(sol.is_optimal() && sol.exact);
        let expect = two_bus_import(0.02, 0.04, 0.2, 0.05) * 10.0;
        assert!((sol.s_import.p - expect).abs() < 1e-5, "{} vs {expect}", sol.s_import.p);
        assert!(sol.relaxed_objective >= sol.objective - 1e-9);
    }

    #[test]
    fn lossless_network_has_no_losses() {
        let net = two_bus(0.0, 0.0, 10.0);
        let model = Model::new(&net, &Snapshot::empty(0.5), ConstraintSet::feasibility(), OpfSettings::default()).unwrap();
        for (obj, want) in [(Objective::MinPImport, 1.0), (Objective::MaxPImport, 2.0)] {
            let sol = model.solve_point(obj, None);
            assert!((sol.s_import.p - want).abs() < 1e-7, "{:?}", sol.s_import);
            assert!(cone_tightness(&sol) < 1e-8);
        }
    }

    #[test]
    fn q_fix_outside_range_is_infeasible() {
        let net = two_bus(0.02, 0.04, 10.0);
        let model = Model::new(&net, &Snapshot::empty(0.5), ConstraintSet::feasibility(), OpfSettings::default()).unwrap();
        let sol = model.solve_point(Objective::MinPImport, Some(-5.0));
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn spec_rows_follow_constraint_set() {
        let net = two_bus(0.02, 0.04, 10.0);
        let snap = Snapshot::empty(0.5);
        let spec = |cs| SubproblemSpec { objective: Objective::MinPImport, constraints: cs, q_fix: None };
        let feas = build_subproblem(&net, &snap, &spec(ConstraintSet::feasibility())).unwrap();
        let comm = build_subproblem(&net, &snap, &spec(ConstraintSet::commercial(10.0, 1.0, 50.0))).unwrap();
        assert!(comm.program.num_rows() > feas.program.num_rows());
        let fixed = build_subproblem(&net, &snap, &SubproblemSpec { q_fix: Some(0.3), ..spec(ConstraintSet::feasibility()) }).unwrap();
        assert_eq!(fixed.program.num_rows(), feas.program.num_rows() + 1);
        let dump = feas.to_json();
        assert!(dump.contains("\"cones\""));
    }
}
