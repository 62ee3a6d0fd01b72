//! Python module `noe`. Networks, snapshots and envelopes cross the boundary
//! as JSON text in the same formats the command line reads and writes.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use noe_core::der::Snapshot;
use noe_core::envelopes::{self, EnvelopeRequest, Kind, Noe, Params, Resolution, SweepConfig};
use noe_core::market;
use noe_core::network::load_network;
use noe_core::{fixtures, NoeError, PqPoint};

fn err(e: NoeError) -> PyErr {
    match e {
        NoeError::Input { .. } | NoeError::Io { .. } | NoeError::Geometry(_) => PyValueError::new_err(e.to_string()),
        NoeError::Infeasible(_) | NoeError::Solver(_) => PyRuntimeError::new_err(e.to_string()),
    }
}

fn resolution(k: Option<usize>, density: Option<f64>) -> Resolution {
    match (k, density) {
        (Some(k), _) => Resolution::Levels(k),
        (None, Some(n)) => Resolution::Density(n),
        _ => Resolution::default(),
    }
}

fn points(v: Vec<(f64, f64)>) -> Vec<PqPoint> {
    v.into_iter().map(|(p, q)| PqPoint::new(p, q)).collect()
}

fn tuples(v: &[PqPoint]) -> Vec<(f64, f64)> {
    v.iter().map(|p| (p.p, p.q)).collect()
}

/// Network and snapshot JSON of a shipped fixture: canonical, five_bus or feeder93.
#[pyfunction]
fn fixture(name: &str) -> PyResult<(String, String)> {
    let case = match name {
        "canonical" => fixtures::canonical(),
        "five_bus" => fixtures::five_bus(),
        "feeder93" => fixtures::feeder93(1, ""),
        _ => return Err(PyValueError::new_err(format!("unknown fixture '{name}'"))),
    };
    Ok((case.network.to_json(), serde_json::to_string(&case.snapshot).expect("snapshot serializes")))
}

#[pyfunction]
fn convex_hull(pts: Vec<(f64, f64)>) -> PyResult<Vec<(f64, f64)>> {
    let h = noe_core::convex_hull(&points(pts)).map_err(err)?;
    Ok(tuples(h.vertices()))
}

#[pyfunction]
fn minkowski_sum(a: Vec<(f64, f64)>, b: Vec<(f64, f64)>) -> PyResult<Vec<(f64, f64)>> {
    let a = noe_core::convex_hull(&points(a)).map_err(err)?;
    let b = noe_core::convex_hull(&points(b)).map_err(err)?;
    Ok(tuples(noe_core::minkowski_sum(&a, &b).vertices()))
}

/// Envelope as JSON text.
#[pyfunction]
#[pyo3(signature = (network, snapshot, kind, tau_s=None, psi_h=None, cost_per_h=None, k=None, density=None))]
#[allow(clippy::too_many_arguments)]
fn compute(
    py: Python<'_>,
    network: &str,
    snapshot: &str,
    kind: &str,
    tau_s: Option<f64>,
    psi_h: Option<f64>,
    cost_per_h: Option<f64>,
    k: Option<usize>,
    density: Option<f64>,
) -> PyResult<String> {
    let net = load_network(network).map_err(err)?;
    let snap = Snapshot::from_json(snapshot).map_err(err)?;
    let kind: Kind = kind.parse().map_err(err)?;
    let req = EnvelopeRequest::new(kind, Params { tau_s, psi_h, cost_per_h }, resolution(k, density)).map_err(err)?;
    let noe = py
        .detach(|| envelopes::boundary_sweep(&net, &snap, &req, &SweepConfig::default()))
        .map_err(err)?;
    Ok(noe.to_json())
}

/// Boundary vertices of an envelope JSON document.
#[pyfunction]
fn boundary(noe: &str) -> PyResult<Vec<(f64, f64)>> {
    let noe = Noe::from_json(noe).map_err(err)?;
    Ok(tuples(noe.boundary.vertices()))
}

/// Monte Carlo exact power flow: (feasible import points, diverged, violated).
#[pyfunction]
#[pyo3(signature = (network, snapshot, samples, seed=7))]
fn monte_carlo(py: Python<'_>, network: &str, snapshot: &str, samples: usize, seed: u64) -> PyResult<(Vec<(f64, f64)>, usize, usize)> {
    let net = load_network(network).map_err(err)?;
    let snap = Snapshot::from_json(snapshot).map_err(err)?;
    let arc = noe_core::opf::OpfSettings::default().arc_segments;
    let mc = py
        .detach(|| envelopes::monte_carlo_oracle(&net, &snap, samples, seed, arc))
        .map_err(err)?;
    Ok((tuples(&mc.points), mc.diverged, mc.violated))
}

/// Bid stack as JSON text.
#[pyfunction]
#[pyo3(signature = (network, snapshot, service, levels, k=None))]
fn bid_stack(py: Python<'_>, network: &str, snapshot: &str, service: &str, levels: Vec<f64>, k: Option<usize>) -> PyResult<String> {
    let net = load_network(network).map_err(err)?;
    let snap = Snapshot::from_json(snapshot).map_err(err)?;
    let catalog = market::default_catalog();
    let svc = market::find_service(&catalog, service).map_err(err)?.clone();
    let stack = py
        .detach(|| market::bid_stack(&net, &snap, &svc, &levels, resolution(k, None), &SweepConfig::default()))
        .map_err(err)?;
    Ok(stack.to_json())
}

#[pymodule]
fn noe(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(fixture, m)?)?;
    m.add_function(wrap_pyfunction!(convex_hull, m)?)?;
    m.add_function(wrap_pyfunction!(minkowski_sum, m)?)?;
    m.add_function(wrap_pyfunction!(compute, m)?)?;
    m.add_function(wrap_pyfunction!(boundary, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo, m)?)?;
    m.add_function(wrap_pyfunction!(bid_stack, m)?)?;
    Ok(())
}
