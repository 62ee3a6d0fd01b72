//! Exact power flow on a radial feeder by backward-forward sweep.
//!
//! Used to check points of an envelope independently of the relaxation.

use num_complex::Complex64;

use crate::error::{NoeError, Result};
use crate::network::{Network, Topology};

#[derive(Debug, Clone)]
pub struct Operating<'a> {
    /// Net unit injection per bus (MW, MVAr), in network bus order.
    pub injection: &'a [(f64, f64)],
    /// Tap ratio per branch; 1 for untapped branches.
    pub taps: &'a [f64],
    /// Curtailed fraction per load.
    pub zeta: &'a [f64],
}

#[derive(Debug, Clone)]
pub struct PowerFlow {
    pub converged: bool,
    pub iterations: usize,
    /// Complex bus voltages (pu).
    pub v: Vec<Complex64>,
    /// Branch power at the sending end, after the tap (MVA).
    pub s_send: Vec<Complex64>,
    /// Branch power at the receiving end (MVA).
    pub s_recv: Vec<Complex64>,
    /// Import at the root (MW + j MVAr).
    pub import: Complex64,
}

impl PowerFlow {
    /// Largest violation of voltage and thermal limits, ≤ 0 when all hold.
    pub fn max_violation(&self, net: &Network) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for (b, v) in net.buses.iter().zip(&self.v) {
            let m = v.norm();
            worst = worst.max(m - b.v_max_pu).max(b.v_min_pu - m);
        }
        for (k, br) in net.branches.iter().enumerate() {
            let s = self.s_send[k].norm().max(self.s_recv[k].norm());
            worst = worst.max((s - br.s_max_mva) / net.base_mva);
        }
        worst
    }
}

pub fn solve(net: &Network, topo: &Topology, op: &Operating) -> Result<PowerFlow> {
    let nb = topo.num_buses();
    let nl = net.branches.len();
    if op.injection.len() != nb || op.taps.len() != nl || op.zeta.len() != net.loads.len() {
        return Err(NoeError::input("operating", "dimension mismatch with network"));
    }
    let base = net.base_mva;
    let z: Vec<Complex64> = net.branches.iter().map(|b| Complex64::new(b.r_pu, b.x_pu)).collect();
    let load_bus: Vec<usize> = net.loads.iter().map(|l| topo.bus_index[&l.bus]).collect();
    let mut v = vec![Complex64::new(1.0, 0.0); nb];
    let mut s_send = vec![Complex64::default(); nl];
    let mut s_recv = vec![Complex64::default(); nl];
    let mut net_inj = vec![Complex64::default(); nb];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < 200 {
        iterations += 1;
        for (j, s) in net_inj.iter_mut().enumerate() {
            *s = Complex64::new(op.injection[j].0, op.injection[j].1) / base;
        }
        for (k, l) in net.loads.iter().enumerate() {
            let j = load_bus[k];
            let (p, q) = crate::network::demand_at(l, v[j].norm(), op.zeta[k])?;
            net_inj[j] -= Complex64::new(p, q) / base;
        }
        // backward: branch powers from the leaves up
        for &j in topo.order.iter().rev() {
            let Some(k) = topo.parent_branch[j] else { continue };
            let mut s = -net_inj[j];
            for &c in &topo.children[j] {
                s += s_send[topo.parent_branch[c].expect("child branch")];
            }
            s_recv[k] = s;
            s_send[k] = s + z[k] * s.norm_sqr() / v[j].norm_sqr();
        }
        // forward: voltages from the root down
        let mut delta: f64 = 0.0;
        for &j in &topo.order {
            let Some(k) = topo.parent_branch[j] else { continue };
            let i = topo.branch_up[k];
            let vs = v[i] * op.taps[k];
            let current = (s_send[k] / vs).conj();
            let vj = vs - z[k] * current;
            delta = delta.max((vj - v[j]).norm());
            v[j] = vj;
        }
        if !delta.is_finite() || v.iter().any(|x| x.norm() < 1e-3) {
            break;
        }
        if delta < 1e-12 {
            converged = true;
            break;
        }
    }
    let root = topo.root;
    let mut import = -net_inj[root];
    for &c in &topo.children[root] {
        import += s_send[topo.parent_branch[c].expect("child branch")];
    }
    Ok(PowerFlow {
        converged,
        iterations,
        v,
        s_send: s_send.iter().map(|s| s * base).collect(),
        s_recv: s_recv.iter().map(|s| s * base).collect(),
        import: import * base,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::load_network;

    #[test]
    fn two_bus_matches_closed_form() {
        let net = load_network(
            r#"{"root": "s", "buses": [{"id": "s", "v_nom_kv": 11}, {"id": "a", "v_nom_kv": 11}],
            "branches": [{"from": "s", "to": "a", "r_pu": 0.02, "x_pu": 0.04, "s_max_mva": 10}],
            "loads": [{"bus": "a", "p_mw": 1.0, "q_mvar": 0.5}]}"#,
        )
        .unwrap();
        let topo = Topology::build(&net).unwrap();
        let pf = solve(&net, &topo, &Operating { injection: &[(0.0, 0.0); 2], taps: &[1.0], zeta: &[0.0] }).unwrap();
        assert!(pf.converged);
        // |V|⁴ - (1 - 2(rp + xq))|V|² + |z|²|s|² = 0 with p, q on the base
        let (r, x, p, q): (f64, f64, f64, f64) = (0.02, 0.04, 0.1, 0.05);
        let b = 1.0 - 2.0 * (r * p + x * q);
        let w = 0.5 * (b + (b * b - 4.0 * (r * r + x * x) * (p * p + q * q)).sqrt());
        assert!((pf.v[1].norm_sqr() - w).abs() < 1e-10);
        let loss = r * (p * p + q * q) / w * 10.0;
        assert!((pf.import.re - (1.0 + loss)).abs() < 1e-9);
        assert!(pf.max_violation(&net) < 0.0);
    }

    #[test]
    fn tap_raises_downstream_voltage() {
        let net = load_network(
            r#"{"root": "s", "buses": [{"id": "s", "v_nom_kv": 11}, {"id": "a", "v_nom_kv": 11}],
            "branches": [{"from": "s", "to": "a", "r_pu": 0.0, "x_pu": 0.0, "s_max_mva": 10,
                "tap": {"t_min": 0.9, "t_max": 1.1}}]}"#,
        )
        .unwrap();
        let topo = Topology::build(&net).unwrap();
        let pf = solve(&net, &topo, &Operating { injection: &[(0.0, 0.0); 2], taps: &[1.05], zeta: &[] }).unwrap();
        assert!((pf.v[1].norm() - 1.05).abs() < 1e-12);
    }
}
