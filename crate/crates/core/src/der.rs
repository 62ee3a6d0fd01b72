//! Resource models: capability charts, ramp and energy deviation windows,
//! deviation cost.
//!
//! Power is injection-positive here (generation and battery discharge are
//! positive). Envelopes flip the sign when they report import at a node.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{NoeError, Result};
use crate::geometry::{convex_hull, HalfPlane, PqPoint, PqPolygon};

/// Default number of polygon vertices per quarter of the inverter disc.
pub const DEFAULT_ARC_SEGMENTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceKind {
    SynchronousGenerator,
    InverterStorage,
    InverterPv,
}

impl ResourceKind {
    pub fn is_inverter(self) -> bool {
        !matches!(self, ResourceKind::SynchronousGenerator)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resource {
    pub id: String,
    pub bus: String,
    pub kind: ResourceKind,
    pub p_min_mw: f64,
    pub p_max_mw: f64,
    pub q_min_mvar: f64,
    pub q_max_mvar: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_rating_mva: Option<f64>,
    pub ramp_up_mw_s: f64,
    pub ramp_down_mw_s: f64,
    pub t_act_plus_s: f64,
    pub t_act_minus_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_min_mwh: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_max_mwh: Option<f64>,
    pub rho_p_per_mwh: f64,
    pub rho_q_per_mvarh: f64,
    pub committed: bool,
}

impl Resource {
    pub fn is_storage(&self) -> bool {
        self.kind == ResourceKind::InverterStorage
    }

    /// Problems with the resource's own parameters, as `(field, message)`.
    pub fn check(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let finite = [
            ("p_min_mw", self.p_min_mw),
            ("p_max_mw", self.p_max_mw),
            ("q_min_mvar", self.q_min_mvar),
            ("q_max_mvar", self.q_max_mvar),
            ("t_act_plus_s", self.t_act_plus_s),
            ("t_act_minus_s", self.t_act_minus_s),
            ("rho_p_per_mwh", self.rho_p_per_mwh),
            ("rho_q_per_mvarh", self.rho_q_per_mvarh),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                out.push((name, "must be finite".to_string()));
            }
        }
        if self.p_min_mw > self.p_max_mw {
            out.push(("p_min_mw", format!("p_min {} exceeds p_max {}", self.p_min_mw, self.p_max_mw)));
        }
        if self.q_min_mvar > self.q_max_mvar {
            out.push(("q_min_mvar", format!("q_min {} exceeds q_max {}", self.q_min_mvar, self.q_max_mvar)));
        }
        for (name, v) in [("ramp_up_mw_s", self.ramp_up_mw_s), ("ramp_down_mw_s", self.ramp_down_mw_s)] {
            if !(v >= 0.0) {
                out.push((name, "ramp rate must be nonnegative".into()));
            }
        }
        for (name, v) in [("t_act_plus_s", self.t_act_plus_s), ("t_act_minus_s", self.t_act_minus_s)] {
            if v < 0.0 {
                out.push((name, "activation delay must be nonnegative".into()));
            }
        }
        for (name, v) in [("rho_p_per_mwh", self.rho_p_per_mwh), ("rho_q_per_mvarh", self.rho_q_per_mvarh)] {
            if v < 0.0 {
                out.push((name, "price must be nonnegative".into()));
            }
        }
        if self.kind.is_inverter() {
            match self.s_rating_mva {
                Some(s) if s > 0.0 && s.is_finite() => {}
                _ => out.push(("s_rating_mva", "inverter resources need a positive rating".into())),
            }
        }
        if self.is_storage() {
            match (self.e_min_mwh, self.e_max_mwh) {
                (Some(lo), Some(hi)) if lo <= hi && lo.is_finite() && hi.is_finite() => {}
                (Some(_), Some(_)) => out.push(("e_min_mwh", "e_min exceeds e_max".into())),
                _ => out.push(("e_max_mwh", "storage needs e_min_mwh and e_max_mwh".into())),
            }
        }
        if out.is_empty() {
            if let Err(e) = capability_set(self, DEFAULT_ARC_SEGMENTS) {
                out.push(("s_rating_mva", e.to_string()));
            }
        }
        out
    }
}

/// Inscribed polygon of the disc of radius `r`, `arc_segments` vertices per
/// quarter, mirrored exactly so that the axis points are `(±r, 0), (0, ±r)`.
pub fn disc_polygon(r: f64, arc_segments: usize) -> PqPolygon {
    let n = arc_segments.max(1);
    let step = std::f64::consts::FRAC_PI_2 / n as f64;
    let quarter: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            if k == 0 {
                (r, 0.0)
            } else {
                let t = step * k as f64;
                (r * t.cos(), r * t.sin())
            }
        })
        .collect();
    let mut pts = Vec::with_capacity(4 * n);
    for &(c, s) in &quarter {
        pts.push(PqPoint::new(c, s));
    }
    for &(c, s) in &quarter {
        pts.push(PqPoint::new(-s, c));
    }
    for &(c, s) in &quarter {
        pts.push(PqPoint::new(-c, -s));
    }
    for &(c, s) in &quarter {
        pts.push(PqPoint::new(s, -c));
    }
    convex_hull(&pts).expect("non-empty")
}

/// P-Q capability chart of a resource (injection convention).
///
/// Generators use their box; inverters intersect the box with an inscribed
/// polygon of the apparent-power disc. An uncommitted generator may also sit
/// at zero output, so its box is extended to cover the origin.
pub fn capability_set(r: &Resource, arc_segments: usize) -> Result<PqPolygon> {
    let boxed = PqPolygon::rect(r.p_min_mw, r.p_max_mw, r.q_min_mvar, r.q_max_mvar)?;
    match r.kind {
        ResourceKind::SynchronousGenerator => {
            if r.committed {
                Ok(boxed)
            } else {
                let mut pts = boxed.vertices().to_vec();
                pts.push(PqPoint::new(0.0, 0.0));
                convex_hull(&pts)
            }
        }
        ResourceKind::InverterStorage | ResourceKind::InverterPv => {
            if arc_segments < 2 {
                return Err(NoeError::input(
                    format!("resources[{}]", r.id),
                    "arc_segments must be at least 2 per quarter",
                ));
            }
            let s = r.s_rating_mva.unwrap_or(0.0);
            let disc = disc_polygon(s, arc_segments);
            let mut cur = disc;
            let rows = [
                HalfPlane { a_p: 1.0, a_q: 0.0, b: r.p_max_mw },
                HalfPlane { a_p: -1.0, a_q: 0.0, b: -r.p_min_mw },
                HalfPlane { a_p: 0.0, a_q: 1.0, b: r.q_max_mvar },
                HalfPlane { a_p: 0.0, a_q: -1.0, b: -r.q_min_mvar },
            ];
            for h in &rows {
                cur = cur.clip(h).ok_or_else(|| {
                    NoeError::input(
                        format!("resources[{}]", r.id),
                        format!("power box lies outside the {s} MVA rating disc"),
                    )
                })?;
            }
            Ok(cur)
        }
    }
}

/// Per-resource operating state taken from a snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DispatchPoint {
    pub p_lambda: f64,
    pub q_lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispatchEntry {
    pub id: String,
    pub p_mw: f64,
    pub q_mvar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SocEntry {
    pub id: String,
    pub e_mwh: f64,
}

/// Operating snapshot. Resources without a dispatch entry sit at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Snapshot {
    pub dt_h: f64,
    #[serde(default)]
    pub dispatch: Vec<DispatchEntry>,
    #[serde(default)]
    pub soc: Vec<SocEntry>,
}

impl Snapshot {
    pub fn empty(dt_h: f64) -> Self {
        Self { dt_h, dispatch: Vec::new(), soc: Vec::new() }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let snap: Snapshot = serde_path_to_error::deserialize(de)
            .map_err(|e| NoeError::input(format!("snapshot.{}", e.path()), e.inner().to_string()))?;
        if !(snap.dt_h > 0.0 && snap.dt_h.is_finite()) {
            return Err(NoeError::input("snapshot.dt_h", "must be positive"));
        }
        Ok(snap)
    }

    pub fn dispatch_of(&self, id: &str) -> DispatchPoint {
        self.dispatch
            .iter()
            .find(|d| d.id == id)
            .map(|d| DispatchPoint { p_lambda: d.p_mw, q_lambda: d.q_mvar })
            .unwrap_or_default()
    }

    pub fn soc_of(&self, id: &str) -> Option<f64> {
        self.soc.iter().find(|s| s.id == id).map(|s| s.e_mwh)
    }

    /// Checks references and ranges against the resource list.
    pub fn check(&self, resources: &[Resource], arc_segments: usize) -> Result<()> {
        let by_id: BTreeMap<&str, &Resource> = resources.iter().map(|r| (r.id.as_str(), r)).collect();
        for (i, d) in self.dispatch.iter().enumerate() {
            let path = format!("snapshot.dispatch[{i}]");
            let r = by_id
                .get(d.id.as_str())
                .ok_or_else(|| NoeError::input(&path, format!("unknown resource '{}'", d.id)))?;
            if !(d.p_mw.is_finite() && d.q_mvar.is_finite()) {
                return Err(NoeError::input(&path, "dispatch must be finite"));
            }
            let cap = capability_set(r, arc_segments)?;
            if !cap.contains(PqPoint::new(d.p_mw, d.q_mvar), 1e-9) {
                return Err(NoeError::input(
                    &path,
                    format!("dispatch ({}, {}) lies outside the capability of '{}'", d.p_mw, d.q_mvar, d.id),
                ));
            }
            if r.kind == ResourceKind::SynchronousGenerator && !r.committed && d.p_mw != 0.0 {
                return Err(NoeError::input(&path, format!("uncommitted generator '{}' must be dispatched at 0 MW", d.id)));
            }
        }
        for (i, s) in self.soc.iter().enumerate() {
            let path = format!("snapshot.soc[{i}]");
            let r = by_id
                .get(s.id.as_str())
                .ok_or_else(|| NoeError::input(&path, format!("unknown resource '{}'", s.id)))?;
            if !r.is_storage() {
                return Err(NoeError::input(&path, format!("'{}' is not a storage resource", s.id)));
            }
            let (lo, hi) = (r.e_min_mwh.unwrap_or(0.0), r.e_max_mwh.unwrap_or(0.0));
            if !(s.e_mwh >= lo && s.e_mwh <= hi) {
                return Err(NoeError::input(&path, format!("state of charge {} outside [{lo}, {hi}]", s.e_mwh)));
            }
        }
        Ok(())
    }
}

fn clamp_to_limits(lo: f64, hi: f64, p_lambda: f64, p_range: (f64, f64)) -> (f64, f64) {
    let lo = lo.max(p_range.0 - p_lambda).min(0.0);
    let hi = hi.min(p_range.1 - p_lambda).max(0.0);
    (lo, hi)
}

/// Active-power range of a resource's capability set.
pub fn p_range(r: &Resource) -> (f64, f64) {
    match capability_set(r, DEFAULT_ARC_SEGMENTS) {
        Ok(c) => {
            let b = c.bounds();
            (b.0, b.1)
        }
        Err(_) => (r.p_min_mw, r.p_max_mw),
    }
}

/// Active-power deviation reachable within response time `tau` (s).
pub fn deviation_bounds_ramp(r: &Resource, tau: f64, p_lambda: f64) -> (f64, f64) {
    let hi = ((tau - r.t_act_plus_s) * r.ramp_up_mw_s).max(0.0);
    let lo = (-(tau - r.t_act_minus_s) * r.ramp_down_mw_s).min(0.0);
    clamp_to_limits(if lo.is_nan() { 0.0 } else { lo }, if hi.is_nan() { 0.0 } else { hi }, p_lambda, p_range(r))
}

/// Active-power deviation a storage unit can hold for `psi` hours after the
/// current interval of `dt` hours at dispatch `p_lambda` from charge `e`.
pub fn deviation_bounds_energy(r: &Resource, psi: f64, dt: f64, e: f64, p_lambda: f64) -> Result<(f64, f64)> {
    if !r.is_storage() {
        return Err(NoeError::input(
            format!("resources[{}]", r.id),
            "energy deviation bounds apply to storage only",
        ));
    }
    if !(psi > 0.0) {
        return Err(NoeError::input("psi", "call length must be positive"));
    }
    let e_after = e - p_lambda * dt;
    let hi = (e_after - r.e_min_mwh.unwrap_or(0.0)) / psi;
    let lo = (e_after - r.e_max_mwh.unwrap_or(0.0)) / psi;
    Ok(clamp_to_limits(lo, hi, p_lambda, p_range(r)))
}

/// Deviation cost in $/h.
pub fn deviation_cost(r: &Resource, dp: f64, dq: f64) -> f64 {
    r.rho_p_per_mwh * dp.abs() + r.rho_q_per_mvarh * dq.abs()
}
