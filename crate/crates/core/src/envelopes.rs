//! Nodal operating envelopes: the 4 + 2K boundary sweep for every envelope
//! kind, capability aggregation, contour stacks, hierarchical aggregation and
//! a Monte Carlo oracle on exact power flow.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::der::{capability_set, Snapshot};
use crate::error::{NoeError, Result};
use crate::geometry::{convex_hull, minkowski_sum_all, HalfPlaneSet, PqPoint, PqPolygon};
use crate::network::{Network, Topology};
use crate::opf::{ConstraintSet, Model, Objective, OpfSettings, SolveStatus, Unit};
use crate::powerflow::{self, Operating};

/// Default sweep density (points per MVAr of reactive range).
pub const DEFAULT_DENSITY: f64 = 5.0;

/// Boundary points closer than this are merged before hulling.
pub const MERGE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Capability,
    Feasibility,
    Ramp,
    Duration,
    Economic,
    Technical,
    Commercial,
}

impl Kind {
    pub const ALL: [Kind; 7] = [
        Kind::Capability,
        Kind::Feasibility,
        Kind::Ramp,
        Kind::Duration,
        Kind::Economic,
        Kind::Technical,
        Kind::Commercial,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Capability => "capability",
            Kind::Feasibility => "feasibility",
            Kind::Ramp => "ramp",
            Kind::Duration => "duration",
            Kind::Economic => "economic",
            Kind::Technical => "technical",
            Kind::Commercial => "commercial",
        }
    }

    pub fn frame(self) -> Frame {
        match self {
            Kind::Capability | Kind::Feasibility => Frame::AbsoluteImport,
            _ => Frame::DeviationFromDispatch,
        }
    }

    /// Which of (tau, psi, cost) the kind requires.
    fn required(self) -> (bool, bool, bool) {
        match self {
            Kind::Capability | Kind::Feasibility => (false, false, false),
            Kind::Ramp => (true, false, false),
            Kind::Duration => (false, true, false),
            Kind::Economic => (false, false, true),
            Kind::Technical => (true, true, false),
            Kind::Commercial => (true, true, true),
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = NoeError;

    fn from_str(s: &str) -> Result<Self> {
        Kind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| NoeError::input("kind", format!("unknown envelope kind '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    AbsoluteImport,
    DeviationFromDispatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi_h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_per_h: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Resolution {
    /// Fixed number of intermediate reactive levels.
    Levels(usize),
    /// Levels per MVAr of reactive range.
    Density(f64),
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution::Density(DEFAULT_DENSITY)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeRequest {
    pub kind: Kind,
    pub params: Params,
    pub resolution: Resolution,
}

impl EnvelopeRequest {
    pub fn new(kind: Kind, params: Params, resolution: Resolution) -> Result<Self> {
        let (need_tau, need_psi, need_cost) = kind.required();
        let check = |name: &str, need: bool, v: Option<f64>, positive: bool| -> Result<()> {
            match (need, v) {
                (true, None) => Err(NoeError::input(name, format!("required for {kind} envelopes"))),
                (false, Some(_)) => Err(NoeError::input(name, format!("not a parameter of {kind} envelopes"))),
                (true, Some(x)) if !(x.is_finite() && (x > 0.0 || !positive && x >= 0.0)) => Err(NoeError::input(
                    name,
                    format!("must be {} and finite, got {x}", if positive { "positive" } else { "nonnegative" }),
                )),
                _ => Ok(()),
            }
        };
        check("tau_s", need_tau, params.tau_s, false)?;
        check("psi_h", need_psi, params.psi_h, true)?;
        check("cost_per_h", need_cost, params.cost_per_h, false)?;
        match resolution {
            Resolution::Levels(0) => return Err(NoeError::input("k", "K must be at least 1")),
            Resolution::Density(n) if !(n.is_finite() && n > 0.0) => {
                return Err(NoeError::input("density", "density must be positive"))
            }
            _ => {}
        }
        Ok(Self { kind, params, resolution })
    }

    pub fn feasibility(resolution: Resolution) -> Self {
        Self { kind: Kind::Feasibility, params: Params::default(), resolution }
    }

    pub fn constraints(&self) -> ConstraintSet {
        let p = &self.params;
        ConstraintSet { deviation: true, tau_s: p.tau_s, psi_h: p.psi_h, cost_per_h: p.cost_per_h }
    }
}

/// `a` is at least as restrictive as `b`: every point feasible under `a`
/// is feasible under `b`.
pub fn implies(a: &ConstraintSet, b: &ConstraintSet) -> bool {
    let tau = match (a.tau_s, b.tau_s) {
        (_, None) => true,
        (Some(x), Some(y)) => x <= y,
        (None, Some(_)) => false,
    };
    let psi = match (a.psi_h, b.psi_h) {
        (_, None) => true,
        (Some(x), Some(y)) => x >= y,
        (None, Some(_)) => false,
    };
    let cost = match (a.cost_per_h, b.cost_per_h) {
        (_, None) => true,
        (Some(x), Some(y)) => x <= y,
        (None, Some(_)) => false,
    };
    tau && psi && cost
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub objective: Objective,
    #[serde(default)]
    pub q_fix_mvar: Option<f64>,
    pub status: SolveStatus,
    /// Boundary point in the envelope's frame, when one was found.
    #[serde(default)]
    pub point: Option<PqPoint>,
    pub exact: bool,
    pub cone_residual: f64,
    pub solves: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Meta {
    pub k: usize,
    pub statuses: Vec<PointRecord>,
    pub max_cone_residual: f64,
    pub wall_time_s: Option<f64>,
    /// Import at dispatch from exact power flow; origin of deviation frames.
    #[serde(default)]
    pub reference_import: Option<PqPoint>,
    /// Exact points taken over from more restrictive envelopes of a family.
    #[serde(default)]
    pub inherited_points: usize,
    #[serde(default)]
    pub skipped_levels: Vec<f64>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Noe {
    pub kind: Kind,
    pub params: Params,
    pub reference_node: String,
    pub frame: Frame,
    pub boundary: PqPolygon,
    pub halfplanes: HalfPlaneSet,
    pub meta: Meta,
}

impl Noe {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("envelope serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de)
            .map_err(|e| NoeError::input(format!("noe.{}", e.path()), e.inner().to_string()))
    }

    /// Boundary in absolute import, whatever the frame.
    pub fn absolute_boundary(&self) -> Result<PqPolygon> {
        match self.frame {
            Frame::AbsoluteImport => Ok(self.boundary.clone()),
            Frame::DeviationFromDispatch => {
                let r = self.meta.reference_import.ok_or_else(|| {
                    NoeError::input("noe.meta.reference_import", "deviation envelope without reference import")
                })?;
                Ok(self.boundary.translate(r))
            }
        }
    }

    /// Active-power range at the node (MW).
    pub fn p_range(&self) -> (f64, f64) {
        let (p0, p1, _, _) = self.boundary.bounds();
        (p0, p1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub opf: OpfSettings,
    /// Record wall time in the envelope metadata.
    pub timings: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { opf: OpfSettings::default(), timings: false }
    }
}

/// Merge near-duplicate points (first occurrence wins).
pub fn merge_points(points: &[PqPoint], tol: f64) -> Vec<PqPoint> {
    let mut out: Vec<PqPoint> = Vec::with_capacity(points.len());
    for &p in points {
        if !out.iter().any(|o| o.sub(p).norm() <= tol) {
            out.push(p);
        }
    }
    out
}

fn finish(
    kind: Kind,
    params: Params,
    reference_node: String,
    points: &[PqPoint],
    mut meta: Meta,
) -> Result<Noe> {
    let frame = kind.frame();
    let shift = match frame {
        Frame::AbsoluteImport => PqPoint::new(0.0, 0.0),
        Frame::DeviationFromDispatch => meta
            .reference_import
            .ok_or_else(|| NoeError::Solver("no reference import for a deviation envelope".into()))?,
    };
    let local: Vec<PqPoint> = points.iter().map(|p| p.sub(shift)).collect();
    let merged = merge_points(&local, MERGE_TOL);
    if merged.is_empty() {
        return Err(NoeError::Infeasible("empty envelope: no boundary point found".into()));
    }
    let boundary = convex_hull(&merged)?;
    for r in meta.statuses.iter_mut() {
        r.point = r.point.map(|p| p.sub(shift));
    }
    let halfplanes = boundary.halfplanes_any();
    Ok(Noe { kind, params, reference_node, frame, boundary, halfplanes, meta })
}

/// Minkowski sum of the resources' capability sets, reported as import.
pub fn capability_noe(resources: &[crate::der::Resource], arc_segments: usize, reference_node: &str) -> Result<Noe> {
    if resources.is_empty() {
        return Err(NoeError::input("resources", "capability envelope needs at least one resource"));
    }
    let sets = resources.iter().map(|r| capability_set(r, arc_segments)).collect::<Result<Vec<_>>>()?;
    let sum = minkowski_sum_all(&sets).expect("non-empty");
    let boundary = sum.negate();
    let halfplanes = boundary.halfplanes_any();
    Ok(Noe {
        kind: Kind::Capability,
        params: Params::default(),
        reference_node: reference_node.to_string(),
        frame: Frame::AbsoluteImport,
        boundary,
        halfplanes,
        meta: Meta::default(),
    })
}

/// Exact power-flow import with every unit at its dispatch, taps at 1 and
/// no curtailment. The flag tells whether all limits hold.
pub fn reference_import(model: &Model) -> Option<(PqPoint, bool)> {
    let net = model.network();
    let topo = model.topology();
    let mut inj = vec![(0.0, 0.0); net.buses.len()];
    for u in model.units() {
        let j = topo.bus_index[&u.bus];
        inj[j].0 += u.dispatch.p;
        inj[j].1 += u.dispatch.q;
    }
    let taps = vec![1.0; net.branches.len()];
    let zeta = vec![0.0; net.loads.len()];
    let pf = powerflow::solve(net, topo, &Operating { injection: &inj, taps: &taps, zeta: &zeta }).ok()?;
    if !pf.converged {
        return None;
    }
    let feasible = pf.max_violation(net) <= 1e-9;
    Some((PqPoint::new(pf.import.re, pf.import.im), feasible))
}

/// Exact boundary points of one sweep, all in absolute import.
#[derive(Debug, Clone)]
struct RawSweep {
    points: Vec<PqPoint>,
    meta: Meta,
}

const EXTREMES: [Objective; 4] =
    [Objective::MinPImport, Objective::MaxPImport, Objective::MinQImport, Objective::MaxQImport];

fn record(obj: Objective, q_fix: Option<f64>, sol: &crate::opf::Solution) -> PointRecord {
    PointRecord {
        objective: obj,
        q_fix_mvar: q_fix,
        status: sol.status,
        point: (sol.is_optimal() && sol.exact).then_some(sol.s_import),
        exact: sol.exact,
        cone_residual: if sol.is_optimal() { crate::opf::cone_tightness(sol) } else { 0.0 },
        solves: sol.solves,
    }
}

fn raw_sweep(model: &Model, resolution: Resolution, timings: bool) -> Result<RawSweep> {
    let start = Instant::now();
    let mut meta = Meta::default();
    let origin = reference_import(model);
    meta.reference_import = origin.map(|o| o.0);

    let extremes: Vec<_> = EXTREMES.par_iter().map(|&o| (o, model.solve_point(o, None))).collect();
    if extremes.iter().all(|(_, s)| s.status == SolveStatus::Infeasible) {
        return Err(NoeError::Infeasible("empty envelope: all four extreme solves are infeasible".into()));
    }
    if extremes.iter().all(|(_, s)| !s.is_optimal()) {
        return Err(NoeError::Solver("all four extreme solves failed".into()));
    }
    let qs: Vec<f64> = extremes.iter().filter(|(_, s)| s.is_optimal()).map(|(_, s)| s.s_import.q).collect();
    let q_lo = match &extremes[2].1 {
        s if s.is_optimal() => s.s_import.q,
        _ => qs.iter().copied().fold(f64::INFINITY, f64::min),
    };
    let q_hi = match &extremes[3].1 {
        s if s.is_optimal() => s.s_import.q,
        _ => qs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    let range = (q_hi - q_lo).max(0.0);
    let k = match resolution {
        Resolution::Levels(k) => k,
        Resolution::Density(n) => ((n * range).ceil() as usize).max(1),
    };
    meta.k = k;
    let levels: Vec<f64> = (1..=k).map(|i| q_lo + i as f64 * range / k as f64).collect();
    let jobs: Vec<(f64, Objective)> = levels
        .iter()
        .flat_map(|&q| [(q, Objective::MinPImport), (q, Objective::MaxPImport)])
        .collect();
    let swept: Vec<_> = jobs.par_iter().map(|&(q, o)| (q, o, model.solve_point(o, Some(q)))).collect();

    let mut points = Vec::new();
    for (o, s) in &extremes {
        meta.statuses.push(record(*o, None, s));
    }
    for (q, o, s) in &swept {
        meta.statuses.push(record(*o, Some(*q), s));
    }
    for (k_idx, q) in levels.iter().enumerate() {
        let pair = &swept[2 * k_idx..2 * k_idx + 2];
        if pair.iter().all(|(_, _, s)| s.status == SolveStatus::Infeasible) {
            meta.skipped_levels.push(*q);
        }
    }
    for r in &meta.statuses {
        if let Some(p) = r.point {
            points.push(p);
        }
    }
    meta.max_cone_residual = meta.statuses.iter().map(|r| if r.exact { r.cone_residual } else { 0.0 }).fold(0.0, f64::max);
    let inexact = meta.statuses.iter().filter(|r| r.status == SolveStatus::Optimal && !r.exact).count();
    if inexact > 0 {
        meta.warnings.push(format!("{inexact} boundary solves stayed inexact and were left out"));
    }
    let failed = meta.statuses.iter().filter(|r| r.status == SolveStatus::NumericFailure).count();
    if failed > 0 {
        meta.warnings.push(format!("{failed} boundary solves failed numerically"));
    }
    if !meta.skipped_levels.is_empty() {
        meta.warnings.push(format!("{} reactive levels infeasible and skipped", meta.skipped_levels.len()));
    }
    match origin {
        Some((p, true)) => points.push(p),
        Some((_, false)) => meta.warnings.push("dispatch violates network limits at nominal taps".into()),
        None => meta.warnings.push("power flow at dispatch did not converge".into()),
    }
    if meta.reference_import.is_none() {
        // origin for deviation frames when power flow at dispatch fails
        let net = model.network();
        let load = net.loads.iter().fold(PqPoint::new(0.0, 0.0), |a, l| a.add(PqPoint::new(l.p_mw, l.q_mvar)));
        let gen = model.units().iter().fold(PqPoint::new(0.0, 0.0), |a, u| a.add(u.dispatch));
        meta.reference_import = Some(load.sub(gen));
    }
    if timings {
        meta.wall_time_s = Some(start.elapsed().as_secs_f64());
    }
    Ok(RawSweep { points, meta })
}

/// Runs the boundary sweep on a prepared model.
pub fn sweep_model(model: &Model, kind: Kind, params: Params, resolution: Resolution, cfg: &SweepConfig) -> Result<Noe> {
    let raw = raw_sweep(model, resolution, cfg.timings)?;
    finish(kind, params, model.network().root.clone(), &raw.points, raw.meta)
}

pub fn boundary_sweep(net: &Network, snap: &Snapshot, req: &EnvelopeRequest, cfg: &SweepConfig) -> Result<Noe> {
    if req.kind == Kind::Capability {
        return capability_noe(&net.resources, cfg.opf.arc_segments, &net.root);
    }
    let model = Model::new(net, snap, req.constraints(), cfg.opf)?;
    sweep_model(&model, req.kind, req.params, req.resolution, cfg)
}

/// Sweeps several envelopes of one network and snapshot. Every member also
/// receives the exact boundary points of members that are at least as
/// restrictive, so set inclusions between members hold for the polygons too.
pub fn sweep_family(net: &Network, snap: &Snapshot, members: &[EnvelopeRequest], cfg: &SweepConfig) -> Result<Vec<Noe>> {
    if members.iter().any(|m| m.kind == Kind::Capability) {
        return Err(NoeError::input("kind", "capability envelopes are not swept"));
    }
    let raws: Vec<Result<RawSweep>> = members
        .par_iter()
        .map(|m| {
            let model = Model::new(net, snap, m.constraints(), cfg.opf)?;
            raw_sweep(&model, m.resolution, cfg.timings)
        })
        .collect();
    let raws = raws.into_iter().collect::<Result<Vec<_>>>()?;
    let cons: Vec<ConstraintSet> = members.iter().map(EnvelopeRequest::constraints).collect();
    members
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let mut points = raws[i].points.clone();
            let mut meta = raws[i].meta.clone();
            for (j, other) in raws.iter().enumerate() {
                if j != i && implies(&cons[j], &cons[i]) {
                    meta.inherited_points += other.points.len();
                    points.extend(other.points.iter().copied());
                }
            }
            finish(m.kind, m.params, net.root.clone(), &points, meta)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StackAxis {
    Tau,
    Psi,
    Cost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackLevel {
    pub value: f64,
    pub noe: Noe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourStack {
    pub axis: StackAxis,
    pub levels: Vec<StackLevel>,
}

impl ContourStack {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stack serializes")
    }
}

/// One envelope per parameter level, sorted by level.
pub fn contour_stack(
    net: &Network,
    snap: &Snapshot,
    kind: Kind,
    levels: &[f64],
    resolution: Resolution,
    cfg: &SweepConfig,
) -> Result<ContourStack> {
    let axis = match kind {
        Kind::Ramp => StackAxis::Tau,
        Kind::Duration => StackAxis::Psi,
        Kind::Economic => StackAxis::Cost,
        _ => return Err(NoeError::input("kind", format!("no contour stack for {kind} envelopes"))),
    };
    if levels.is_empty() {
        return Err(NoeError::input("levels", "at least one level is required"));
    }
    let mut sorted = levels.to_vec();
    sorted.sort_by(f64::total_cmp);
    let reqs = sorted
        .iter()
        .map(|&v| {
            let params = match axis {
                StackAxis::Tau => Params { tau_s: Some(v), ..Params::default() },
                StackAxis::Psi => Params { psi_h: Some(v), ..Params::default() },
                StackAxis::Cost => Params { cost_per_h: Some(v), ..Params::default() },
            };
            EnvelopeRequest::new(kind, params, resolution)
        })
        .collect::<Result<Vec<_>>>()?;
    let noes = sweep_family(net, snap, &reqs, cfg)?;
    Ok(ContourStack {
        axis,
        levels: sorted.into_iter().zip(noes).map(|(value, noe)| StackLevel { value, noe }).collect(),
    })
}

/// A child envelope attached at a bus of an upstream network.
#[derive(Debug, Clone)]
pub struct Child {
    pub noe: Noe,
    pub bus: String,
}

/// Synthetic unit standing for a downstream aggregation: injection set is
/// the negated import envelope, no ramp or cost limits.
pub fn child_unit(child: &Child, index: usize) -> Result<Unit> {
    if child.noe.frame != Frame::AbsoluteImport {
        return Err(NoeError::input(
            format!("children[{index}].frame"),
            "child envelopes must be in the absolute import frame",
        ));
    }
    let capability = child.noe.boundary.negate();
    let dispatch = match child.noe.meta.reference_import {
        Some(r) => r.scale(-1.0),
        None => {
            let v = capability.vertices();
            v.iter().fold(PqPoint::new(0.0, 0.0), |a, &p| a.add(p)).scale(1.0 / v.len() as f64)
        }
    };
    Ok(Unit {
        id: format!("child{index}@{}", child.bus),
        bus: child.bus.clone(),
        capability,
        dispatch,
        dp_range: (f64::NEG_INFINITY, f64::INFINITY),
        rho_p: 0.0,
        rho_q: 0.0,
    })
}

/// Sweeps an upstream network in which each child envelope acts as one
/// resource at its attachment bus. Resources of the upstream network itself
/// take part as usual.
pub fn aggregate_upstream(
    children: &[Child],
    upstream: &Network,
    snap: &Snapshot,
    req: &EnvelopeRequest,
    cfg: &SweepConfig,
) -> Result<Noe> {
    if req.kind == Kind::Capability {
        return Err(NoeError::input("kind", "aggregation needs a swept envelope kind"));
    }
    let buses: std::collections::BTreeSet<&str> = upstream.buses.iter().map(|b| b.id.as_str()).collect();
    let cons = req.constraints();
    let mut units = Vec::new();
    for (i, c) in children.iter().enumerate() {
        if !buses.contains(c.bus.as_str()) {
            return Err(NoeError::input(
                format!("children[{i}].bus"),
                format!("attachment bus '{}' missing from upstream network", c.bus),
            ));
        }
        units.push(child_unit(c, i)?);
    }
    snap.check(&upstream.resources, cfg.opf.arc_segments)?;
    for r in &upstream.resources {
        units.push(Unit::from_resource(r, snap, &cons, cfg.opf.arc_segments)?);
    }
    let model = Model::with_units(upstream, units, cons, cfg.opf)?;
    sweep_model(&model, req.kind, req.params, req.resolution, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub samples: usize,
    pub seed: u64,
    /// Imports of samples that satisfy every network limit.
    pub points: Vec<PqPoint>,
    pub hull: Option<PqPolygon>,
    pub diverged: usize,
    pub violated: usize,
}

impl MonteCarlo {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

struct Draw {
    injection: Vec<(f64, f64)>,
    taps: Vec<f64>,
    zeta: Vec<f64>,
}

/// Random operating points checked with exact power flow: resource outputs
/// uniform over each capability set (rejection from its bounding box), tap
/// ratios uniform over their range, curtailment uniform in `[0, ζ̄]`.
pub fn monte_carlo_oracle(net: &Network, snap: &Snapshot, samples: usize, seed: u64, arc_segments: usize) -> Result<MonteCarlo> {
    if samples == 0 {
        return Err(NoeError::input("samples", "at least one sample is required"));
    }
    snap.check(&net.resources, arc_segments)?;
    let topo = Topology::build(net).map_err(|m| NoeError::input("network.branches", m))?;
    let sets = net.resources.iter().map(|r| capability_set(r, arc_segments)).collect::<Result<Vec<_>>>()?;
    let at: Vec<usize> = net.resources.iter().map(|r| topo.bus_index[&r.bus]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<Draw> = (0..samples)
        .map(|_| {
            let mut injection = vec![(0.0, 0.0); net.buses.len()];
            for (set, &j) in sets.iter().zip(&at) {
                let (p0, p1, q0, q1) = set.bounds();
                let pt = loop {
                    let pt = PqPoint::new(uniform(&mut rng, p0, p1), uniform(&mut rng, q0, q1));
                    if set.contains(pt, 0.0) {
                        break pt;
                    }
                };
                injection[j].0 += pt.p;
                injection[j].1 += pt.q;
            }
            let taps = net
                .branches
                .iter()
                .map(|b| b.tap.map_or(1.0, |t| uniform(&mut rng, t.t_min, t.t_max)))
                .collect();
            let zeta = net.loads.iter().map(|l| uniform(&mut rng, 0.0, l.curtail_max)).collect();
            Draw { injection, taps, zeta }
        })
        .collect();
    let results: Vec<Option<std::result::Result<PqPoint, bool>>> = draws
        .par_iter()
        .map(|d| {
            let op = Operating { injection: &d.injection, taps: &d.taps, zeta: &d.zeta };
            match powerflow::solve(net, &topo, &op) {
                Ok(pf) if pf.converged => {
                    if pf.max_violation(net) <= 0.0 {
                        Some(Ok(PqPoint::new(pf.import.re, pf.import.im)))
                    } else {
                        Some(Err(true))
                    }
                }
                _ => None,
            }
        })
        .collect();
    let mut mc = MonteCarlo { samples, seed, points: Vec::new(), hull: None, diverged: 0, violated: 0 };
    for r in results {
        match r {
            Some(Ok(p)) => mc.points.push(p),
            Some(Err(_)) => mc.violated += 1,
            None => mc.diverged += 1,
        }
    }
    if !mc.points.is_empty() {
        mc.hull = Some(convex_hull(&mc.points)?);
    }
    Ok(mc)
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..=hi)
    } else {
        lo
    }
}
