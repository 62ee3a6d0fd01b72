use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use noe_core::der::Snapshot;
use noe_core::envelopes::{
    aggregate_upstream, boundary_sweep, contour_stack, monte_carlo_oracle, Child, EnvelopeRequest, Kind, Noe, Params,
    Resolution, SweepConfig,
};
use noe_core::fixtures;
use noe_core::market::{bid_stack, default_catalog, find_service, load_catalog};
use noe_core::network::{load_network, Network};
use noe_core::opf::OpfSettings;
use noe_core::plot::{self, Layer};
use noe_core::{NoeError, PqPolygon, Result};

#[derive(Parser)]
#[command(name = "noe", version, about = "Nodal operating envelopes of DER aggregations")]
struct Cli {
    /// Network JSON file, or `fixture:<canonical|five_bus|feeder93>`.
    #[arg(long, global = true)]
    network: Option<String>,
    /// Snapshot JSON file, or `fixture:<name>`.
    #[arg(long, global = true)]
    snapshot: Option<String>,
    /// Output file; stdout when omitted.
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// Output format (default: csv for sweep-k, json otherwise).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Record wall times (outputs are then no longer reproducible byte for byte).
    #[arg(long, global = true)]
    timings: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Svg,
}

#[derive(Args, Clone)]
struct Sweep {
    /// Number of intermediate reactive levels.
    #[arg(short = 'K', long = "k")]
    k: Option<usize>,
    /// Levels per MVAr of reactive range (used when -K is absent).
    #[arg(long)]
    density: Option<f64>,
    /// Polygon segments per quarter circle for inverter capability.
    #[arg(long)]
    arc_segments: Option<usize>,
}

impl Sweep {
    fn resolution(&self) -> Resolution {
        match (self.k, self.density) {
            (Some(k), _) => Resolution::Levels(k),
            (None, Some(n)) => Resolution::Density(n),
            (None, None) => Resolution::default(),
        }
    }

    fn config(&self, timings: bool) -> SweepConfig {
        let mut opf = OpfSettings::default();
        if let Some(a) = self.arc_segments {
            opf.arc_segments = a;
        }
        SweepConfig { opf, timings }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compute one envelope.
    Compute {
        #[arg(long)]
        kind: Kind,
        /// Response time (s).
        #[arg(long)]
        tau: Option<f64>,
        /// Call length (h).
        #[arg(long)]
        psi: Option<f64>,
        /// Deviation cost cap ($/h).
        #[arg(long)]
        cost: Option<f64>,
        #[command(flatten)]
        sweep: Sweep,
    },
    /// One envelope per parameter level (ramp, duration or economic).
    Stack {
        #[arg(long)]
        kind: Kind,
        /// Comma-separated levels; `s`, `min` and `h` suffixes are accepted for time.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        levels: Vec<String>,
        #[command(flatten)]
        sweep: Sweep,
    },
    /// Envelope at the root of an upstream network from child envelopes.
    Aggregate {
        /// Child envelope file, optionally `path@bus`; the bus defaults to the
        /// child's reference node.
        #[arg(long = "child")]
        children: Vec<String>,
        #[arg(long, default_value = "feasibility")]
        kind: Kind,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        psi: Option<f64>,
        #[arg(long)]
        cost: Option<f64>,
        /// Instead of files: time hierarchical against flat computation on
        /// this many replicated copies of the 93-bus feeder.
        #[arg(long)]
        replicated: Option<usize>,
        #[command(flatten)]
        sweep: Sweep,
    },
    /// Bid stack of a service over increasing cost caps.
    Bidstack {
        #[arg(long)]
        service: String,
        /// Service catalog file (default: shipped catalog).
        #[arg(long)]
        services: Option<PathBuf>,
        /// Comma-separated cost caps ($/h), strictly increasing.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        levels: Vec<f64>,
        #[command(flatten)]
        sweep: Sweep,
    },
    /// Check a feasibility envelope against Monte Carlo exact power flow.
    Verify {
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// Envelope to check; computed when omitted.
        #[arg(long)]
        noe: Option<PathBuf>,
        /// Containment tolerance (MW).
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        /// Also report the hull area ratio at these sample counts.
        #[arg(long, value_delimiter = ',')]
        trend: Vec<usize>,
        #[command(flatten)]
        sweep: Sweep,
    },
    /// Feasibility envelope area against K.
    SweepK {
        #[arg(long = "ks", value_delimiter = ',', default_value = "5,10,15,20,25,30,35,40,45,50,55,60,65,70,75,80,85,90,95,100")]
        ks: Vec<usize>,
        #[arg(long)]
        arc_segments: Option<usize>,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| NoeError::Io { path: path.display().to_string(), source })
}

fn network(arg: Option<&str>) -> Result<Network> {
    let arg = arg.ok_or_else(|| NoeError::input("--network", "required"))?;
    match arg.strip_prefix("fixture:") {
        Some("canonical") => Ok(fixtures::canonical().network),
        Some("five_bus") => Ok(fixtures::five_bus().network),
        Some("feeder93") => Ok(fixtures::feeder93(1, "").network),
        Some(other) => Err(NoeError::input("--network", format!("unknown fixture '{other}'"))),
        None => load_network(&read(Path::new(arg))?),
    }
}

fn snapshot(arg: Option<&str>) -> Result<Snapshot> {
    let arg = arg.ok_or_else(|| NoeError::input("--snapshot", "required"))?;
    match arg.strip_prefix("fixture:") {
        Some("canonical") => Ok(fixtures::canonical().snapshot),
        Some("five_bus") => Ok(fixtures::five_bus().snapshot),
        Some("feeder93") => Ok(fixtures::feeder93(1, "").snapshot),
        Some(other) => Err(NoeError::input("--snapshot", format!("unknown fixture '{other}'"))),
        None => Snapshot::from_json(&read(Path::new(arg))?),
    }
}

fn write(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|source| NoeError::Io { path: p.display().to_string(), source }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Parses a level with an optional time unit into `base_s` seconds.
fn parse_level(s: &str, base_s: Option<f64>) -> Result<f64> {
    let t = s.trim();
    let bad = || NoeError::input("--levels", format!("cannot parse level '{s}'"));
    let (num, unit) = match base_s {
        None => (t, 1.0),
        Some(base) => {
            let (n, u) = if let Some(n) = t.strip_suffix("min") {
                (n, 60.0)
            } else if let Some(n) = t.strip_suffix('h') {
                (n, 3600.0)
            } else if let Some(n) = t.strip_suffix('s') {
                (n, 1.0)
            } else {
                (t, base)
            };
            (n, u / base)
        }
    };
    let v: f64 = num.trim().parse().map_err(|_| bad())?;
    Ok(v * unit)
}

fn params(tau: Option<f64>, psi: Option<f64>, cost: Option<f64>) -> Params {
    Params { tau_s: tau, psi_h: psi, cost_per_h: cost }
}

fn render_noe(noe: &Noe, format: Format) -> String {
    let label = noe.kind.to_string();
    let layers = [Layer { label, polygon: &noe.boundary }];
    match format {
        Format::Json => noe.to_json() + "\n",
        Format::Csv => plot::csv(&layers),
        Format::Svg => {
            let marker = match noe.frame {
                noe_core::envelopes::Frame::AbsoluteImport => noe.meta.reference_import,
                noe_core::envelopes::Frame::DeviationFromDispatch => Some(noe_core::PqPoint::new(0.0, 0.0)),
            };
            plot::svg(&format!("{} envelope at {}", noe.kind, noe.reference_node), &layers, marker)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(NoeError::input("--jobs", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| NoeError::input("--jobs", e.to_string()))?;
    }
    let out = cli.out.as_deref();
    let format = cli.format.unwrap_or(match cli.command {
        Command::SweepK { .. } => Format::Csv,
        _ => Format::Json,
    });
    let net_arg = cli.network.as_deref();
    let snap_arg = cli.snapshot.as_deref();
    match cli.command {
        Command::Compute { kind, tau, psi, cost, sweep } => {
            let net = network(net_arg)?;
            let req = EnvelopeRequest::new(kind, params(tau, psi, cost), sweep.resolution())?;
            let snap = if kind == Kind::Capability { Snapshot::empty(1.0) } else { snapshot(snap_arg)? };
            let noe = boundary_sweep(&net, &snap, &req, &sweep.config(cli.timings))?;
            write(out, &render_noe(&noe, format))
        }
        Command::Stack { kind, levels, sweep } => {
            if levels.is_empty() {
                return Err(NoeError::input("--levels", "at least one level is required"));
            }
            let base = match kind {
                Kind::Ramp => Some(1.0),
                Kind::Duration => Some(3600.0),
                _ => None,
            };
            let values = levels.iter().map(|l| parse_level(l, base)).collect::<Result<Vec<_>>>()?;
            let net = network(net_arg)?;
            let snap = snapshot(snap_arg)?;
            let stack = contour_stack(&net, &snap, kind, &values, sweep.resolution(), &sweep.config(cli.timings))?;
            let labels: Vec<String> = stack.levels.iter().map(|l| format!("{} = {}", kind, l.value)).collect();
            let layers: Vec<Layer> = stack
                .levels
                .iter()
                .zip(labels)
                .map(|(l, label)| Layer { label, polygon: &l.noe.boundary })
                .collect();
            let text = match format {
                Format::Json => stack.to_json() + "\n",
                Format::Csv => plot::csv(&layers),
                Format::Svg => plot::svg(&format!("{kind} contours"), &layers, Some(noe_core::PqPoint::new(0.0, 0.0))),
            };
            write(out, &text)
        }
        Command::Aggregate { children, kind, tau, psi, cost, replicated, sweep } => {
            let req = EnvelopeRequest::new(kind, params(tau, psi, cost), sweep.resolution())?;
            let cfg = sweep.config(cli.timings);
            if let Some(n) = replicated {
                let report = replicated_benchmark(n, cli.seed, &req, &cfg)?;
                return write(out, &(serde_json::to_string_pretty(&report).expect("report") + "\n"));
            }
            if children.is_empty() {
                return Err(NoeError::input("--child", "at least one child envelope is required"));
            }
            let net = network(net_arg)?;
            let snap = match snap_arg {
                Some(s) => snapshot(Some(s))?,
                None => Snapshot::empty(1.0),
            };
            let kids = children
                .iter()
                .map(|c| {
                    let (path, bus) = match c.rsplit_once('@') {
                        Some((p, b)) => (p, Some(b.to_string())),
                        None => (c.as_str(), None),
                    };
                    let noe = Noe::from_json(&read(Path::new(path))?)?;
                    let bus = bus.unwrap_or_else(|| noe.reference_node.clone());
                    Ok(Child { noe, bus })
                })
                .collect::<Result<Vec<_>>>()?;
            let noe = aggregate_upstream(&kids, &net, &snap, &req, &cfg)?;
            write(out, &render_noe(&noe, format))
        }
        Command::Bidstack { service, services, levels, sweep } => {
            let catalog = match services {
                Some(p) => load_catalog(&read(&p)?)?,
                None => default_catalog(),
            };
            let svc = find_service(&catalog, &service)?.clone();
            let net = network(net_arg)?;
            let snap = snapshot(snap_arg)?;
            let stack = bid_stack(&net, &snap, &svc, &levels, sweep.resolution(), &sweep.config(cli.timings))?;
            let text = match format {
                Format::Csv => {
                    let mut s = String::from("tranche,volume_mw,price_per_mwh\n");
                    for (i, t) in stack.tranches.iter().enumerate() {
                        s += &format!("{},{},{}\n", i + 1, t.volume_mw, t.price_per_mwh);
                    }
                    s
                }
                _ => stack.to_json() + "\n",
            };
            write(out, &text)
        }
        Command::Verify { samples, noe, tol, trend, sweep } => {
            if samples == 0 {
                return Err(NoeError::input("--samples", "must be at least 1"));
            }
            let net = network(net_arg)?;
            let snap = snapshot(snap_arg)?;
            let cfg = sweep.config(cli.timings);
            let noe = match noe {
                Some(p) => Noe::from_json(&read(&p)?)?,
                None => boundary_sweep(&net, &snap, &EnvelopeRequest::feasibility(sweep.resolution()), &cfg)?,
            };
            let region = noe.absolute_boundary()?;
            let arc = cfg.opf.arc_segments;
            let mc = monte_carlo_oracle(&net, &snap, samples, cli.seed, arc)?;
            let outside: Vec<f64> = mc
                .points
                .iter()
                .filter(|p| !region.contains(**p, tol))
                .map(|p| region.distance(*p))
                .collect();
            let ratio = |h: Option<&PqPolygon>| h.map_or(0.0, |h| h.area() / region.area().max(f64::MIN_POSITIVE));
            let mut trend_rows = Vec::new();
            for n in trend {
                let m = monte_carlo_oracle(&net, &snap, n.max(1), cli.seed, arc)?;
                trend_rows.push(json!({"samples": n, "feasible": m.points.len(), "area_ratio": ratio(m.hull.as_ref())}));
            }
            let report = json!({
                "samples": samples,
                "seed": cli.seed,
                "feasible": mc.points.len(),
                "diverged": mc.diverged,
                "violated": mc.violated,
                "empty": mc.is_empty(),
                "tolerance_mw": tol,
                "inside": mc.points.len() - outside.len(),
                "outside": outside.len(),
                "max_outside_distance": outside.iter().copied().fold(0.0, f64::max),
                "contained_fraction": if mc.points.is_empty() { 1.0 } else { 1.0 - outside.len() as f64 / mc.points.len() as f64 },
                "noe_area": region.area(),
                "hull_area_ratio": ratio(mc.hull.as_ref()),
                "trend": trend_rows,
            });
            write(out, &(serde_json::to_string_pretty(&report).expect("report") + "\n"))
        }
        Command::SweepK { ks, arc_segments } => {
            if ks.is_empty() || ks.contains(&0) {
                return Err(NoeError::input("--ks", "K values must be at least 1"));
            }
            let net = network(net_arg)?;
            let snap = snapshot(snap_arg)?;
            let cfg = Sweep { k: None, density: None, arc_segments }.config(cli.timings);
            let mut rows = Vec::new();
            for &k in &ks {
                let start = Instant::now();
                let noe = boundary_sweep(&net, &snap, &EnvelopeRequest::feasibility(Resolution::Levels(k)), &cfg)?;
                let t = cli.timings.then(|| start.elapsed().as_secs_f64());
                rows.push((k, noe.boundary.area(), noe.meta.statuses.len(), t));
            }
            let k_max = ks.iter().copied().max().expect("non-empty");
            let norm = rows.iter().find(|r| r.0 == k_max).map(|r| r.1).expect("k_max row");
            let text = match format {
                Format::Json => {
                    let v: Vec<_> = rows
                        .iter()
                        .map(|(k, a, n, t)| json!({"k": k, "area": a, "normalized_area": a / norm, "points": n, "wall_time_s": t}))
                        .collect();
                    serde_json::to_string_pretty(&v).expect("rows") + "\n"
                }
                _ => {
                    let mut s = String::from("k,area,normalized_area,points,wall_time_s\n");
                    for (k, a, n, t) in &rows {
                        let t = t.map(|t| t.to_string()).unwrap_or_default();
                        s += &format!("{k},{a},{},{n},{t}\n", a / norm);
                    }
                    s
                }
            };
            write(out, &text)
        }
    }
}

/// Hierarchical (each feeder, then the upstream network) against flat
/// computation on replicated feeders. Feeder sweeps are independent, so the
/// distributed time is the slowest feeder plus the upstream sweep.
fn replicated_benchmark(n: usize, seed: u64, req: &EnvelopeRequest, cfg: &SweepConfig) -> Result<serde_json::Value> {
    if n == 0 {
        return Err(NoeError::input("--replicated", "must be at least 1"));
    }
    let (flat, feeders, upstream) = fixtures::replicated(n, seed);
    let mut kids = Vec::with_capacity(n);
    let mut feeder_times = Vec::with_capacity(n);
    for (i, f) in feeders.iter().enumerate() {
        let start = Instant::now();
        let noe = boundary_sweep(&f.network, &f.snapshot, &EnvelopeRequest::feasibility(req.resolution), cfg)?;
        feeder_times.push(start.elapsed().as_secs_f64());
        kids.push(Child { noe, bus: upstream.buses[i + 1].id.clone() });
    }
    let start = Instant::now();
    let hier = aggregate_upstream(&kids, &upstream, &Snapshot::empty(flat.snapshot.dt_h), req, cfg)?;
    let upstream_s = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let flat_noe = boundary_sweep(&flat.network, &flat.snapshot, req, cfg)?;
    let flat_s = start.elapsed().as_secs_f64();
    let serial: f64 = feeder_times.iter().sum::<f64>() + upstream_s;
    let critical = feeder_times.iter().copied().fold(0.0, f64::max) + upstream_s;
    Ok(json!({
        "feeders": n,
        "flat_buses": flat.network.buses.len(),
        "threads": rayon::current_num_threads(),
        "flat_s": flat_s,
        "hierarchical_serial_s": serial,
        "hierarchical_critical_path_s": critical,
        "upstream_s": upstream_s,
        "flat_area": flat_noe.boundary.area(),
        "hierarchical_area": hier.boundary.area(),
    }))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
