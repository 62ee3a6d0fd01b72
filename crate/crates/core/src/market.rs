//! Service envelopes and bid stacks.

use serde::{Deserialize, Serialize};

use crate::der::Snapshot;
use crate::envelopes::{sweep_family, EnvelopeRequest, Frame, Kind, Noe, Params, Resolution, SweepConfig};
use crate::error::{NoeError, Result};
use crate::geometry::{convex_hull, PqPoint};
use crate::network::Network;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Less import at the reference node.
    Raise,
    /// More import at the reference node.
    Lower,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceSpec {
    pub name: String,
    pub tau_s: f64,
    pub psi_h: f64,
    pub direction: Direction,
    #[serde(default)]
    pub symmetric: bool,
}

impl ServiceSpec {
    pub fn check(&self) -> Result<()> {
        let path = |f: &str| format!("service.{}.{f}", self.name);
        if !(self.tau_s.is_finite() && self.tau_s > 0.0) {
            return Err(NoeError::input(path("tau_s"), "must be positive"));
        }
        if !(self.psi_h.is_finite() && self.psi_h > 0.0) {
            return Err(NoeError::input(path("psi_h"), "must be positive"));
        }
        if self.symmetric && self.direction != Direction::Both {
            return Err(NoeError::input(path("direction"), "symmetric services must have direction 'both'"));
        }
        Ok(())
    }
}

pub fn load_catalog(text: &str) -> Result<Vec<ServiceSpec>> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cat: Vec<ServiceSpec> = serde_path_to_error::deserialize(de)
        .map_err(|e| NoeError::input(format!("services.{}", e.path()), e.inner().to_string()))?;
    for s in &cat {
        s.check()?;
    }
    Ok(cat)
}

/// The shipped catalog: FCAS raise/lower, demand response and symmetric reserve.
pub fn default_catalog() -> Vec<ServiceSpec> {
    load_catalog(crate::fixtures::SERVICES).expect("shipped catalog is valid")
}

pub fn find_service<'a>(catalog: &'a [ServiceSpec], name: &str) -> Result<&'a ServiceSpec> {
    catalog.iter().find(|s| s.name == name).ok_or_else(|| {
        let names: Vec<&str> = catalog.iter().map(|s| s.name.as_str()).collect();
        NoeError::input("service", format!("unknown service '{name}'; catalog: {}", names.join(", ")))
    })
}

/// Keeps `±min(up, down)` of the active-power deviation at every reactive
/// level, so the result is symmetric about zero deviation in `p`.
pub fn symmetrize(noe: &Noe) -> Result<Noe> {
    if noe.frame != Frame::DeviationFromDispatch {
        return Err(NoeError::input("frame", "symmetric envelopes need the deviation frame"));
    }
    let poly = &noe.boundary;
    let mut qs: Vec<f64> = poly.vertices().iter().map(|v| v.q).collect();
    qs.sort_by(f64::total_cmp);
    qs.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    let half = |q: f64| poly.p_range_at(q).map(|(lo, hi)| (-lo).min(hi));
    let mut pts = Vec::new();
    let mut push = |q: f64, m: Option<f64>| {
        if let Some(m) = m.filter(|m| *m >= 0.0) {
            pts.push(PqPoint::new(-m, q));
            pts.push(PqPoint::new(m, q));
        }
    };
    for w in qs.windows(2) {
        let (q0, q1) = (w[0], w[1]);
        push(q0, half(q0));
        // both sides are linear on [q0, q1]; add their crossing
        if let (Some((l0, h0)), Some((l1, h1))) = (poly.p_range_at(q0), poly.p_range_at(q1)) {
            let d0 = h0 + l0;
            let d1 = h1 + l1;
            if d0 * d1 < 0.0 {
                let q = q0 + (q1 - q0) * d0 / (d0 - d1);
                push(q, half(q));
            }
        }
    }
    if let Some(&q) = qs.last() {
        push(q, half(q));
    }
    if pts.is_empty() {
        return Err(NoeError::Infeasible("symmetric envelope is empty: zero deviation not attainable".into()));
    }
    let boundary = convex_hull(&pts)?;
    let mut meta = noe.meta.clone();
    meta.warnings.push("symmetrized: active deviation limited to ±min(up, down) per reactive level".into());
    Ok(Noe { halfplanes: boundary.halfplanes_any(), boundary, meta, ..noe.clone() })
}

fn service_request(svc: &ServiceSpec, cost: Option<f64>, resolution: Resolution) -> Result<EnvelopeRequest> {
    svc.check()?;
    let kind = if cost.is_some() { Kind::Commercial } else { Kind::Technical };
    EnvelopeRequest::new(kind, Params { tau_s: Some(svc.tau_s), psi_h: Some(svc.psi_h), cost_per_h: cost }, resolution)
}

fn finish(svc: &ServiceSpec, noe: Noe) -> Result<Noe> {
    if svc.symmetric {
        symmetrize(&noe)
    } else {
        Ok(noe)
    }
}

pub fn technical_noe(net: &Network, snap: &Snapshot, svc: &ServiceSpec, resolution: Resolution, cfg: &SweepConfig) -> Result<Noe> {
    let req = service_request(svc, None, resolution)?;
    let noe = sweep_family(net, snap, &[req], cfg)?.pop().expect("one member");
    finish(svc, noe)
}

pub fn commercial_noe(
    net: &Network,
    snap: &Snapshot,
    svc: &ServiceSpec,
    cost_per_h: f64,
    resolution: Resolution,
    cfg: &SweepConfig,
) -> Result<Noe> {
    if !(cost_per_h.is_finite() && cost_per_h >= 0.0) {
        return Err(NoeError::input("cost_per_h", "must be nonnegative and finite"));
    }
    let req = service_request(svc, Some(cost_per_h), resolution)?;
    let noe = sweep_family(net, snap, &[req], cfg)?.pop().expect("one member");
    finish(svc, noe)
}

/// Active-power volume (MW) the envelope offers in a service direction.
pub fn service_range(noe: &Noe, direction: Direction) -> f64 {
    let (lo, hi) = noe.p_range();
    let raise = (-lo).max(0.0);
    let lower = hi.max(0.0);
    match direction {
        Direction::Raise => raise,
        Direction::Lower => lower,
        Direction::Both => raise.min(lower),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tranche {
    pub volume_mw: f64,
    pub price_per_mwh: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostLevel {
    pub cost_per_h: f64,
    pub range_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BidStack {
    pub service: ServiceSpec,
    pub tranches: Vec<Tranche>,
    /// Cost cap and service range of every commercial envelope evaluated.
    pub levels: Vec<CostLevel>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl BidStack {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bid stack serializes")
    }

    pub fn total_volume(&self) -> f64 {
        self.tranches.iter().map(|t| t.volume_mw).sum()
    }
}

/// Volume below which a tranche is dropped (MW).
pub const MIN_VOLUME: f64 = 1e-6;

/// Tranches from per-level ranges: volume `R_i − R_{i−1}`, price `c_i / R_i`.
/// A level whose price would fall below the previous tranche's is merged into
/// it, so the cumulative volume up to that level is offered at `c_i / R_i`.
pub fn tranches(levels: &[CostLevel]) -> (Vec<Tranche>, usize) {
    // (cumulative range, price) of the kept levels
    let mut kept: Vec<(f64, f64)> = Vec::new();
    let mut merged = 0;
    for l in levels {
        let prev = kept.last().map_or(0.0, |k| k.0);
        if l.range_mw - prev <= MIN_VOLUME {
            continue;
        }
        let price = l.cost_per_h / l.range_mw;
        while kept.last().is_some_and(|k| k.1 > price) {
            kept.pop();
            merged += 1;
        }
        kept.push((l.range_mw, price));
    }
    let mut out = Vec::with_capacity(kept.len());
    let mut prev = 0.0;
    for (r, price) in kept {
        out.push(Tranche { volume_mw: r - prev, price_per_mwh: price });
        prev = r;
    }
    (out, merged)
}

pub fn bid_stack(
    net: &Network,
    snap: &Snapshot,
    svc: &ServiceSpec,
    cost_levels: &[f64],
    resolution: Resolution,
    cfg: &SweepConfig,
) -> Result<BidStack> {
    if cost_levels.is_empty() {
        return Err(NoeError::input("levels", "at least one cost level is required"));
    }
    if cost_levels.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(NoeError::input("levels", "cost levels must be nonnegative and finite"));
    }
    if cost_levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(NoeError::input("levels", "cost levels must be strictly increasing"));
    }
    let reqs = cost_levels
        .iter()
        .map(|&c| service_request(svc, Some(c), resolution))
        .collect::<Result<Vec<_>>>()?;
    let noes = sweep_family(net, snap, &reqs, cfg)?;
    let mut levels = Vec::with_capacity(noes.len());
    for (noe, &c) in noes.into_iter().zip(cost_levels) {
        let noe = finish(svc, noe)?;
        levels.push(CostLevel { cost_per_h: c, range_mw: service_range(&noe, svc.direction) });
    }
    let (tranches, merged) = tranches(&levels);
    let mut warnings = Vec::new();
    if tranches.is_empty() {
        warnings.push("all commercial envelopes are degenerate in the service direction".into());
    }
    if merged > 0 {
        warnings.push(format!("{merged} tranches merged to keep prices nondecreasing"));
    }
    Ok(BidStack { service: svc.clone(), tranches, levels, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn catalog_loads_and_rejects_unknown() {
        let cat = default_catalog();
        assert_eq!(cat.len(), 9);
        let e = find_service(&cat, "nope").unwrap_err().to_string();
        assert!(e.contains("long_dr"), "{e}");
        assert!(load_catalog(r#"[{"name":"x","tau_s":1,"psi_h":1,"direction":"raise","symmetric":true}]"#).is_err());
    }

    #[test]
    fn single_level_gives_one_tranche() {
        let (t, merged) = tranches(&[CostLevel { cost_per_h: 80.0, range_mw: 0.4 }]);
        assert_eq!(t, vec![Tranche { volume_mw: 0.4, price_per_mwh: 200.0 }]);
        assert_eq!(merged, 0);
    }

    #[test]
    fn tranche_prices_never_fall() {
        let levels = [
            CostLevel { cost_per_h: 10.0, range_mw: 0.01 },
            CostLevel { cost_per_h: 20.0, range_mw: 0.5 },
            CostLevel { cost_per_h: 30.0, range_mw: 0.5 },
            CostLevel { cost_per_h: 400.0, range_mw: 1.0 },
        ];
        let (t, merged) = tranches(&levels);
        assert_eq!(merged, 1);
        assert_eq!(t.len(), 2);
        assert!((t.iter().map(|x| x.volume_mw).sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(t.windows(2).all(|w| w[0].price_per_mwh <= w[1].price_per_mwh));
    }

    #[test]
    fn symmetric_reserve_is_symmetric() {
        let case = fixtures::canonical();
        let cat = default_catalog();
        let svc = find_service(&cat, "symmetric_reserve").unwrap();
        let noe = technical_noe(&case.network, &case.snapshot, svc, Resolution::Levels(6), &SweepConfig::default()).unwrap();
        let (lo, hi) = noe.p_range();
        assert!((lo + hi).abs() < 1e-9, "{lo} {hi}");
        assert!(noe.boundary.contains(PqPoint::new(0.0, 0.0), 1e-9));
    }

    #[test]
    fn zero_cost_collapses_active_range() {
        let case = fixtures::canonical();
        let cat = default_catalog();
        let svc = find_service(&cat, "delayed_raise").unwrap();
        let noe = commercial_noe(&case.network, &case.snapshot, svc, 0.0, Resolution::Levels(4), &SweepConfig::default()).unwrap();
        let (lo, hi) = noe.p_range();
        assert!(hi - lo < 1e-5, "{lo} {hi}");
    }
}
