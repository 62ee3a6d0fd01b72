//! Shipped and generated test networks.
//!
//! The canonical and five-bus cases live as JSON under `data/`. The 93-bus
//! feeder, replicated systems and random instances are generated from a seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::der::{DispatchEntry, Resource, ResourceKind, Snapshot, SocEntry};
use crate::network::{load_network, Branch, Bus, Load, Network, Tap, Topology};
use crate::powerflow::{self, Operating};

pub const CANONICAL_NETWORK: &str = include_str!("../../../data/canonical_network.json");
pub const CANONICAL_SNAPSHOT: &str = include_str!("../../../data/canonical_snapshot.json");
pub const FIVE_BUS_NETWORK: &str = include_str!("../../../data/five_bus_network.json");
pub const FIVE_BUS_SNAPSHOT: &str = include_str!("../../../data/five_bus_snapshot.json");
pub const SERVICES: &str = include_str!("../../../data/services.json");

/// A network with a matching operating snapshot.
#[derive(Debug, Clone)]
pub struct Case {
    pub network: Network,
    pub snapshot: Snapshot,
}

pub fn canonical() -> Case {
    Case {
        network: load_network(CANONICAL_NETWORK).expect("shipped fixture"),
        snapshot: Snapshot::from_json(CANONICAL_SNAPSHOT).expect("shipped fixture"),
    }
}

pub fn five_bus() -> Case {
    Case {
        network: load_network(FIVE_BUS_NETWORK).expect("shipped fixture"),
        snapshot: Snapshot::from_json(FIVE_BUS_SNAPSHOT).expect("shipped fixture"),
    }
}

fn bus(id: String, kv: f64) -> Bus {
    Bus { id, v_nom_kv: kv, v_min_pu: 0.95, v_max_pu: 1.05 }
}

fn storage(id: String, bus: String, s: f64, e_max: f64) -> Resource {
    Resource {
        id,
        bus,
        kind: ResourceKind::InverterStorage,
        p_min_mw: -s,
        p_max_mw: s,
        q_min_mvar: -s,
        q_max_mvar: s,
        s_rating_mva: Some(s),
        ramp_up_mw_s: 1.67,
        ramp_down_mw_s: 1.67,
        t_act_plus_s: 0.5,
        t_act_minus_s: 0.5,
        e_min_mwh: Some(0.0),
        e_max_mwh: Some(e_max),
        rho_p_per_mwh: 190.0,
        rho_q_per_mvarh: 19.0,
        committed: true,
    }
}

/// Seeded 93-bus, 22 kV radial feeder: 7.4 MW / 3.1 MVAr of load, eight
/// offline 1.1 MVA diesels, 2.3 MVA of storage inverters at 30 % charge and a
/// 12.9 MVA supply transformer with a tap changer.
///
/// Every bus id is prefixed with `prefix` so copies can share one network.
pub fn feeder93(seed: u64, prefix: &str) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let name = |i: usize| format!("{prefix}n{i}");
    let mut buses = vec![bus(name(0), 66.0)];
    let mut branches = Vec::new();
    // trunk of 30 buses, laterals hang off random trunk buses
    let trunk = 30;
    for i in 1..93 {
        buses.push(bus(name(i), 22.0));
        let (parent, len) = if i == 1 {
            (0, 0.0)
        } else if i <= trunk {
            (i - 1, rng.gen_range(0.4..1.0))
        } else {
            let p = if rng.gen_bool(0.4) { rng.gen_range(2..=trunk) } else { rng.gen_range(trunk + 1..i.max(trunk + 2)).min(i - 1) };
            (p, rng.gen_range(0.2..0.8))
        };
        let branch = if i == 1 {
            Branch {
                from: name(0),
                to: name(1),
                r_pu: 0.004,
                x_pu: 0.06,
                s_max_mva: 12.9,
                tap: Some(Tap { t_min: 0.9, t_max: 1.1 }),
            }
        } else {
            // 0.2 + j0.35 Ω/km on a 48.4 Ω base, trunk conductors stronger
            let k = if i <= trunk { 0.3 } else { 0.8 };
            Branch {
                from: name(parent),
                to: name(i),
                r_pu: k * len * 0.2 / 48.4,
                x_pu: k * len * 0.35 / 48.4,
                s_max_mva: if i <= trunk { 12.0 - 0.25 * i as f64 } else { 2.5 },
                tap: None,
            }
        };
        branches.push(branch);
    }
    let mut weights: Vec<f64> = (2..93).map(|_| rng.gen_range(0.2..1.8)).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let loads = (2..93)
        .zip(&weights)
        .map(|(i, w)| Load {
            bus: name(i),
            p_mw: 7.4 * w,
            q_mvar: 3.1 * w,
            exp_p: if i % 7 == 0 { 2.0 } else { 0.0 },
            exp_q: if i % 7 == 0 { 2.0 } else { 0.0 },
            curtail_max: 0.0,
        })
        .collect();
    let mut resources = Vec::new();
    let mut snapshot = Snapshot::empty(0.5);
    for d in 0..8 {
        let at = rng.gen_range(5..93);
        resources.push(Resource {
            id: format!("{prefix}diesel{d}"),
            bus: name(at),
            kind: ResourceKind::SynchronousGenerator,
            p_min_mw: 0.0,
            p_max_mw: 1.0,
            q_min_mvar: -0.45,
            q_max_mvar: 0.45,
            s_rating_mva: None,
            ramp_up_mw_s: 0.0183,
            ramp_down_mw_s: 0.0183,
            t_act_plus_s: 25.0,
            t_act_minus_s: 25.0,
            e_min_mwh: None,
            e_max_mwh: None,
            rho_p_per_mwh: 380.0,
            rho_q_per_mvarh: 38.0,
            committed: false,
        });
    }
    let sizes = [0.8, 0.6, 0.5, 0.4];
    for (b, s) in sizes.iter().enumerate() {
        let at = rng.gen_range(5..93);
        let id = format!("{prefix}bess{b}");
        resources.push(storage(id.clone(), name(at), *s, *s));
        snapshot.soc.push(SocEntry { id, e_mwh: 0.3 * s });
    }
    for r in &resources {
        snapshot.dispatch.push(DispatchEntry { id: r.id.clone(), p_mw: 0.0, q_mvar: 0.0 });
    }
    let network = Network { base_mva: 10.0, root: name(0), buses, branches, loads, resources };
    Case { network, snapshot }
}

/// `copies` feeders under one supply bus `gsp`, each behind a 15 MVA link.
/// Also returns the upstream network (supply bus plus one bus per feeder
/// root, no loads or resources) for hierarchical aggregation.
pub fn replicated(copies: usize, seed: u64) -> (Case, Vec<Case>, Network) {
    let mut buses = vec![bus("gsp".into(), 132.0)];
    let mut branches = Vec::new();
    let mut loads = Vec::new();
    let mut resources = Vec::new();
    let mut snapshot = Snapshot::empty(0.5);
    let mut children = Vec::new();
    let mut up_buses = vec![bus("gsp".into(), 132.0)];
    let mut up_branches = Vec::new();
    for c in 0..copies {
        let f = feeder93(seed, &format!("f{c}_"));
        let link = Branch {
            from: "gsp".into(),
            to: f.network.root.clone(),
            r_pu: 0.0005,
            x_pu: 0.004,
            s_max_mva: 15.0,
            tap: None,
        };
        up_buses.push(f.network.buses[0].clone());
        up_branches.push(link.clone());
        buses.extend(f.network.buses.iter().cloned());
        branches.push(link);
        branches.extend(f.network.branches.iter().cloned());
        loads.extend(f.network.loads.iter().cloned());
        resources.extend(f.network.resources.iter().cloned());
        snapshot.dispatch.extend(f.snapshot.dispatch.iter().cloned());
        snapshot.soc.extend(f.snapshot.soc.iter().cloned());
        children.push(f);
    }
    let flat = Case {
        network: Network { base_mva: 10.0, root: "gsp".into(), buses, branches, loads, resources },
        snapshot,
    };
    let upstream = Network {
        base_mva: 10.0,
        root: "gsp".into(),
        buses: up_buses,
        branches: up_branches,
        loads: vec![],
        resources: vec![],
    };
    (flat, children, upstream)
}

/// Whether the snapshot's dispatch is feasible for exact power flow with
/// taps at 1 and no curtailment.
pub fn dispatch_feasible(case: &Case) -> bool {
    let net = &case.network;
    let Ok(topo) = Topology::build(net) else { return false };
    let mut inj = vec![(0.0, 0.0); net.buses.len()];
    for r in &net.resources {
        let d = case.snapshot.dispatch_of(&r.id);
        let j = topo.bus_index[&r.bus];
        inj[j].0 += d.p_lambda;
        inj[j].1 += d.q_lambda;
    }
    let taps = vec![1.0; net.branches.len()];
    let zeta = vec![0.0; net.loads.len()];
    match powerflow::solve(net, &topo, &Operating { injection: &inj, taps: &taps, zeta: &zeta }) {
        Ok(pf) => pf.converged && pf.max_violation(net) <= -1e-3,
        Err(_) => false,
    }
}

fn random_resource(rng: &mut ChaCha8Rng, id: String, bus: String) -> (Resource, DispatchEntry, Option<SocEntry>) {
    let kind = rng.gen_range(0..3);
    let (r, p, soc) = match kind {
        0 => {
            let pmax: f64 = rng.gen_range(0.3..1.5);
            let pmin = if rng.gen_bool(0.5) { 0.0 } else { 0.2 * pmax };
            let committed = rng.gen_bool(0.5);
            let r = Resource {
                id: id.clone(),
                bus,
                kind: ResourceKind::SynchronousGenerator,
                p_min_mw: pmin,
                p_max_mw: pmax,
                q_min_mvar: -0.5 * pmax,
                q_max_mvar: 0.5 * pmax,
                s_rating_mva: None,
                ramp_up_mw_s: rng.gen_range(0.01..0.05),
                ramp_down_mw_s: rng.gen_range(0.01..0.05),
                t_act_plus_s: rng.gen_range(5.0..40.0),
                t_act_minus_s: rng.gen_range(5.0..40.0),
                e_min_mwh: None,
                e_max_mwh: None,
                rho_p_per_mwh: rng.gen_range(150.0..450.0),
                rho_q_per_mvarh: 0.0,
                committed,
            };
            let p = if committed { rng.gen_range(pmin..=pmax) } else { 0.0 };
            (r, p, None)
        }
        1 => {
            let s: f64 = rng.gen_range(0.2..1.0);
            let e_max = s * rng.gen_range(0.5..2.0);
            let mut r = storage(id.clone(), bus, s, e_max);
            r.ramp_up_mw_s = rng.gen_range(0.5..2.0);
            r.ramp_down_mw_s = r.ramp_up_mw_s;
            r.t_act_plus_s = rng.gen_range(0.2..2.0);
            r.t_act_minus_s = r.t_act_plus_s;
            r.rho_p_per_mwh = rng.gen_range(100.0..250.0);
            let e = e_max * rng.gen_range(0.2..0.8);
            (r, rng.gen_range(-0.3 * s..0.3 * s), Some(SocEntry { id, e_mwh: e }))
        }
        _ => {
            let s: f64 = rng.gen_range(0.2..1.0);
            let r = Resource {
                id,
                bus,
                kind: ResourceKind::InverterPv,
                p_min_mw: 0.0,
                p_max_mw: 0.9 * s,
                q_min_mvar: -0.6 * s,
                q_max_mvar: 0.6 * s,
                s_rating_mva: Some(s),
                ramp_up_mw_s: 1.0,
                ramp_down_mw_s: 1.0,
                t_act_plus_s: 0.5,
                t_act_minus_s: 0.5,
                e_min_mwh: None,
                e_max_mwh: None,
                rho_p_per_mwh: rng.gen_range(50.0..120.0),
                rho_q_per_mvarh: 0.0,
                committed: true,
            };
            let p = rng.gen_range(0.0..0.8 * s);
            (r, p, None)
        }
    };
    let mut r = r;
    r.rho_q_per_mvarh = 0.1 * r.rho_p_per_mwh;
    let d = DispatchEntry { id: r.id.clone(), p_mw: p, q_mvar: 0.0 };
    (r, d, soc)
}

/// Random radial instance with 3 to 15 buses and 1 to 4 resources whose
/// dispatch is power-flow feasible.
pub fn random_case(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rng.gen_range(3..=15);
        let name = |i: usize| format!("b{i}");
        let buses: Vec<Bus> = (0..n).map(|i| bus(name(i), 11.0)).collect();
        let mut branches = Vec::new();
        for i in 1..n {
            let parent = rng.gen_range(0..i);
            let r: f64 = rng.gen_range(0.005..0.06);
            let tap = (i == 1 && rng.gen_bool(0.5)).then_some(Tap { t_min: 0.95, t_max: 1.05 });
            branches.push(Branch {
                from: name(parent),
                to: name(i),
                r_pu: r,
                x_pu: r * rng.gen_range(1.0..2.5),
                s_max_mva: if parent == 0 { rng.gen_range(2.5..5.0) } else { rng.gen_range(1.5..3.0) },
                tap,
            });
        }
        let mut loads = Vec::new();
        for i in 1..n {
            if rng.gen_bool(0.7) {
                let p: f64 = rng.gen_range(0.05..0.4);
                let e = if rng.gen_bool(0.3) { 2.0 } else { 0.0 };
                loads.push(Load {
                    bus: name(i),
                    p_mw: p,
                    q_mvar: p * rng.gen_range(0.2..0.5),
                    exp_p: e,
                    exp_q: e,
                    curtail_max: if rng.gen_bool(0.2) { 0.2 } else { 0.0 },
                });
            }
        }
        let nr = rng.gen_range(1..=4);
        let mut resources = Vec::new();
        let mut snapshot = Snapshot::empty(0.5);
        for k in 0..nr {
            let at = rng.gen_range(1..n);
            let (r, d, soc) = random_resource(&mut rng, format!("r{k}"), name(at));
            resources.push(r);
            snapshot.dispatch.push(d);
            snapshot.soc.extend(soc);
        }
        let case = Case {
            network: Network { base_mva: 10.0, root: name(0), buses, branches, loads, resources },
            snapshot,
        };
        if dispatch_feasible(&case) {
            return case;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{validate, Severity};

    fn errors(net: &Network) -> usize {
        validate(net).iter().filter(|d| d.severity == Severity::Error).count()
    }

    #[test]
    fn shipped_cases_validate() {
        for case in [canonical(), five_bus()] {
            assert_eq!(errors(&case.network), 0);
            assert!(dispatch_feasible(&case));
        }
    }

    #[test]
    fn feeder93_matches_case_study_totals() {
        let case = feeder93(93, "");
        assert_eq!(case.network.buses.len(), 93);
        assert_eq!(errors(&case.network), 0);
        let p: f64 = case.network.loads.iter().map(|l| l.p_mw).sum();
        let q: f64 = case.network.loads.iter().map(|l| l.q_mvar).sum();
        assert!((p - 7.4).abs() < 1e-9 && (q - 3.1).abs() < 1e-9);
        let storage: f64 = case.network.resources.iter().filter_map(|r| r.s_rating_mva).sum();
        assert!((storage - 2.3).abs() < 1e-12);
        assert!(dispatch_feasible(&case));
    }

    #[test]
    fn replicated_system_sizes() {
        let (flat, children, up) = replicated(3, 1);
        assert_eq!(flat.network.buses.len(), 1 + 3 * 93);
        assert_eq!(children.len(), 3);
        assert_eq!(up.buses.len(), 4);
        assert_eq!(errors(&flat.network), 0);
    }

    #[test]
    fn random_cases_are_deterministic_and_valid() {
        for seed in 0..10 {
            let a = random_case(seed);
            let b = random_case(seed);
            assert_eq!(a.network.to_json(), b.network.to_json());
            let n = a.network.buses.len();
            assert!((3..=15).contains(&n));
            assert_eq!(errors(&a.network), 0);
        }
    }
}
