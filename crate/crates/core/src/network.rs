//! Radial network model and ingestion.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::der::Resource;
use crate::error::{NoeError, Result};

fn default_base() -> f64 {
    10.0
}
fn default_v_min() -> f64 {
    0.95
}
fn default_v_max() -> f64 {
    1.05
}
fn default_t_min() -> f64 {
    0.9
}
fn default_t_max() -> f64 {
    1.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bus {
    pub id: String,
    pub v_nom_kv: f64,
    #[serde(default = "default_v_min")]
    pub v_min_pu: f64,
    #[serde(default = "default_v_max")]
    pub v_max_pu: f64,
}

/// Continuous tap ratio range, applied on the upstream side of the branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tap {
    #[serde(default = "default_t_min")]
    pub t_min: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
}

impl Default for Tap {
    fn default() -> Self {
        Self { t_min: default_t_min(), t_max: default_t_max() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Branch {
    pub from: String,
    pub to: String,
    pub r_pu: f64,
    pub x_pu: f64,
    pub s_max_mva: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tap: Option<Tap>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Load {
    pub bus: String,
    pub p_mw: f64,
    pub q_mvar: f64,
    #[serde(default)]
    pub exp_p: f64,
    #[serde(default)]
    pub exp_q: f64,
    #[serde(default)]
    pub curtail_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Network {
    #[serde(default = "default_base")]
    pub base_mva: f64,
    pub root: String,
    pub buses: Vec<Bus>,
    #[serde(default)]
    pub branches: Vec<Branch>,
    #[serde(default)]
    pub loads: Vec<Load>,
    #[serde(default)]
    pub resources: Vec<Resource>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}: {}: {}", self.path, self.message)
    }
}

/// Parses and validates a network document. Defaults are applied by the
/// parser; the first error diagnostic, if any, is returned as the error.
pub fn load_network(text: &str) -> Result<Network> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let net: Network = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        NoeError::input(if path == "." { "network".into() } else { format!("network.{path}") }, e.inner().to_string())
    })?;
    if let Some(d) = validate(&net).into_iter().find(|d| d.severity == Severity::Error) {
        return Err(NoeError::input(d.path, d.message));
    }
    Ok(net)
}

impl Network {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }
}

/// All invariant violations of a network, empty when it is valid.
pub fn validate(net: &Network) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut err = |path: String, message: String| {
        out.push(Diagnostic { severity: Severity::Error, path, message });
    };
    if !(net.base_mva > 0.0 && net.base_mva.is_finite()) {
        err("base_mva".into(), "must be positive".into());
    }
    let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, b) in net.buses.iter().enumerate() {
        if ids.insert(b.id.as_str(), i).is_some() {
            err(format!("buses[{i}].id"), format!("duplicate bus id '{}'", b.id));
        }
        if !(b.v_min_pu > 0.0 && b.v_min_pu < b.v_max_pu && b.v_max_pu.is_finite()) {
            err(format!("buses[{i}]"), format!("need 0 < v_min_pu < v_max_pu, got {} and {}", b.v_min_pu, b.v_max_pu));
        }
        if !(b.v_nom_kv > 0.0 && b.v_nom_kv.is_finite()) {
            err(format!("buses[{i}].v_nom_kv"), "must be positive".into());
        }
    }
    if !ids.contains_key(net.root.as_str()) {
        err("root".into(), format!("unknown bus '{}'", net.root));
    }
    let mut refs_ok = true;
    for (i, br) in net.branches.iter().enumerate() {
        for (end, id) in [("from", &br.from), ("to", &br.to)] {
            if !ids.contains_key(id.as_str()) {
                err(format!("branches[{i}].{end}"), format!("unknown bus '{id}'"));
                refs_ok = false;
            }
        }
        if br.from == br.to {
            err(format!("branches[{i}]"), "self loop".into());
        }
        if !(br.s_max_mva > 0.0) {
            err(format!("branches[{i}].s_max_mva"), "thermal limit must be positive".into());
        }
        if !(br.r_pu >= 0.0 && br.r_pu.is_finite()) {
            err(format!("branches[{i}].r_pu"), "resistance must be finite and nonnegative".into());
        }
        if !br.x_pu.is_finite() {
            err(format!("branches[{i}].x_pu"), "reactance must be finite".into());
        }
        if let Some(t) = br.tap {
            if !(t.t_min > 0.0 && t.t_min <= t.t_max) {
                err(format!("branches[{i}].tap"), format!("need 0 < t_min <= t_max, got {} and {}", t.t_min, t.t_max));
            } else if !(t.t_min <= 1.0 && 1.0 <= t.t_max) {
                err(format!("branches[{i}].tap"), "tap range must contain 1".into());
            }
        }
    }
    if refs_ok && ids.contains_key(net.root.as_str()) && ids.len() == net.buses.len() {
        if let Err(msg) = Topology::build(net) {
            err("branches".into(), msg);
        }
    }
    for (i, l) in net.loads.iter().enumerate() {
        if !ids.contains_key(l.bus.as_str()) {
            err(format!("loads[{i}].bus"), format!("unknown bus '{}'", l.bus));
        }
        if !(l.p_mw.is_finite() && l.q_mvar.is_finite() && l.exp_p.is_finite() && l.exp_q.is_finite()) {
            err(format!("loads[{i}]"), "values must be finite".into());
        }
        if !(0.0..=1.0).contains(&l.curtail_max) {
            err(format!("loads[{i}].curtail_max"), "must lie in [0, 1]".into());
        }
    }
    let mut rids: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, r) in net.resources.iter().enumerate() {
        if rids.insert(r.id.as_str(), i).is_some() {
            err(format!("resources[{i}].id"), format!("duplicate resource id '{}'", r.id));
        }
        if !ids.contains_key(r.bus.as_str()) {
            err(format!("resources[{i}].bus"), format!("unknown bus '{}'", r.bus));
        }
        for (field, msg) in r.check() {
            err(format!("resources[{i}].{field}"), msg);
        }
    }
    for (i, l) in net.loads.iter().enumerate() {
        let generic = |e: f64| e == 0.0 || e == 2.0;
        if !(generic(l.exp_p) && generic(l.exp_q)) {
            out.push(Diagnostic {
                severity: Severity::Warning,
                path: format!("loads[{i}]"),
                message: "voltage exponent other than 0 or 2 is linearized around 1 pu".into(),
            });
        }
    }
    out
}

/// Load demand at voltage `v` (pu) and curtailment `zeta`.
pub fn demand_at(load: &Load, v: f64, zeta: f64) -> Result<(f64, f64)> {
    if !(zeta >= 0.0 && zeta <= load.curtail_max) {
        return Err(NoeError::input(
            "zeta",
            format!("curtailment {zeta} outside [0, {}]", load.curtail_max),
        ));
    }
    if !(v > 0.0) {
        return Err(NoeError::input("v", "voltage must be positive"));
    }
    let k = 1.0 - zeta;
    Ok((k * load.p_mw * v.powf(load.exp_p), k * load.q_mvar * v.powf(load.exp_q)))
}

/// Rooted tree view of a network with dense indices.
#[derive(Debug, Clone)]
pub struct Topology {
    pub root: usize,
    /// Bus indices in breadth-first order from the root.
    pub order: Vec<usize>,
    /// For every non-root bus, the branch connecting it to its parent.
    pub parent_branch: Vec<Option<usize>>,
    pub parent: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    /// Upstream bus index of each branch.
    pub branch_up: Vec<usize>,
    /// Downstream bus index of each branch.
    pub branch_down: Vec<usize>,
    pub bus_index: BTreeMap<String, usize>,
}

impl Topology {
    pub fn build(net: &Network) -> std::result::Result<Self, String> {
        let n = net.buses.len();
        let bus_index: BTreeMap<String, usize> = net.buses.iter().enumerate().map(|(i, b)| (b.id.clone(), i)).collect();
        let root = *bus_index.get(&net.root).ok_or_else(|| format!("unknown root bus '{}'", net.root))?;
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (k, br) in net.branches.iter().enumerate() {
            let a = *bus_index.get(&br.from).ok_or_else(|| format!("unknown bus '{}'", br.from))?;
            let b = *bus_index.get(&br.to).ok_or_else(|| format!("unknown bus '{}'", br.to))?;
            adj[a].push((b, k));
            adj[b].push((a, k));
        }
        let mut parent = vec![None; n];
        let mut parent_branch = vec![None; n];
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut children = vec![Vec::new(); n];
        let mut branch_up = vec![usize::MAX; net.branches.len()];
        let mut branch_down = vec![usize::MAX; net.branches.len()];
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        let mut cycle = false;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &(v, k) in &adj[u] {
                if Some(k) == parent_branch[u] {
                    continue;
                }
                if seen[v] {
                    cycle = true;
                    continue;
                }
                seen[v] = true;
                parent[v] = Some(u);
                parent_branch[v] = Some(k);
                children[u].push(v);
                branch_up[k] = u;
                branch_down[k] = v;
                queue.push_back(v);
            }
        }
        if cycle || net.branches.len() + 1 != n {
            return Err("non-radial topology: the branch graph must be a tree".into());
        }
        if order.len() != n {
            return Err("non-radial topology: network is not connected".into());
        }
        Ok(Self { root, order, parent_branch, parent, children, branch_up, branch_down, bus_index })
    }

    pub fn num_buses(&self) -> usize {
        self.order.len()
    }
}
