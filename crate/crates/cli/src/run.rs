//! Dispatch of experiments and the results / plot-data writers.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use sinrlab::estimators::{self as est, ModelSpec};
use sinrlab::graph::{crossing_exists, degree_stats};
use sinrlab::renorm::{gamma_prime, nice_site_scan, scan_margin, RenormParams};
use sinrlab::sinr::{build_gilbert_graph, build_minus_graph_with, build_sinr_graph_with, sinr_radii, InterferenceRange, Radii, RadiusRule};
use sinrlab::stats::Proportion;
use sinrlab::{Error, PowerDistribution};

use crate::config::{ConfigError, Experiment, GraphKind, ResolvedConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Failure of a run after the configuration was accepted.
#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    /// An invariant of the model was violated; exit code 3.
    Invariant(String),
    Runtime(Error),
    Io(std::io::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Config(e) => write!(f, "{e}"),
            Self::Invariant(s) => write!(f, "invariant violated: {s}"),
            Self::Runtime(e) => write!(f, "{e}"),
            Self::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Invariant(_) => 3,
            Self::Runtime(_) | Self::Io(_) => 1,
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::DegreeExceeded { .. } => Self::Invariant(e.to_string()),
            e => Self::Runtime(e),
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        Self::Config(e)
    }
}

/// Results (JSON lines) and plot data (TSV) accumulated during a run.
pub struct Sink {
    header: Value,
    records: Vec<Value>,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn fmt_f(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

impl Sink {
    fn new(header: Value) -> Self {
        Self {
            header,
            records: Vec::new(),
            columns: Vec::new(),
            rows: Vec::new(),
        }
    }

    fn columns(&mut self, cols: &[&str]) {
        self.columns = cols.iter().map(|s| s.to_string()).collect();
    }

    fn row(&mut self, values: &[f64]) {
        self.rows.push(values.iter().map(|&x| fmt_f(x)).collect());
    }

    fn record(&mut self, kind: &str, body: impl Serialize) {
        let mut v = serde_json::to_value(body).expect("serializable record");
        if let Value::Object(m) = &mut v {
            let mut out = Map::new();
            out.insert("record".into(), Value::String(kind.into()));
            out.append(m);
            v = Value::Object(out);
        }
        self.records.push(v);
    }

    /// One grid point with a crossing-probability estimate.
    fn point(&mut self, params: Value, p: &Proportion, extra: Value) {
        let mut m = match params {
            Value::Object(m) => m,
            _ => Map::new(),
        };
        m.insert("estimate".into(), json!(p.estimate));
        m.insert("ci_lo".into(), json!(p.ci_lo));
        m.insert("ci_hi".into(), json!(p.ci_hi));
        m.insert("replicas".into(), json!(p.trials));
        m.insert("successes".into(), json!(p.successes));
        if let Value::Object(mut e) = extra {
            m.append(&mut e);
        }
        self.record("point", Value::Object(m));
    }

    fn write(&self, dir: &Path, stem: &str, failure: Option<&RunError>) -> std::io::Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let mut jsonl = String::new();
        let line = |v: &Value| serde_json::to_string(v).expect("json");
        jsonl.push_str(&line(&self.header));
        jsonl.push('\n');
        for r in &self.records {
            jsonl.push_str(&line(r));
            jsonl.push('\n');
        }
        let status = match failure {
            None => json!({"record": "status", "status": "complete"}),
            Some(e) => json!({"record": "status", "status": "failed", "exit_code": e.exit_code(), "error": e.to_string()}),
        };
        jsonl.push_str(&line(&status));
        jsonl.push('\n');

        let mut tsv = String::new();
        let _ = writeln!(
            tsv,
            "# sinrlab {} config_hash {}",
            VERSION,
            self.header["config_hash"].as_str().unwrap_or("")
        );
        tsv.push_str(&self.columns.join("\t"));
        tsv.push('\n');
        for r in &self.rows {
            tsv.push_str(&r.join("\t"));
            tsv.push('\n');
        }
        if let Some(e) = failure {
            let _ = writeln!(tsv, "# FAILED (exit {}): {}", e.exit_code(), e);
        }
        let results = dir.join(format!("{stem}.results.jsonl"));
        let plot = dir.join(format!("{stem}.tsv"));
        std::fs::write(&results, jsonl)?;
        std::fs::write(&plot, tsv)?;
        Ok((results, plot))
    }
}

pub fn config_hash(cfg: &ResolvedConfig) -> String {
    let text = serde_json::to_string(cfg).expect("config serializes");
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

pub struct Outcome {
    pub results: PathBuf,
    pub plot: PathBuf,
    pub error: Option<RunError>,
}

/// Runs the experiment and writes `<kind>.results.jsonl`, `<kind>.tsv` and
/// the `<kind>.timing.json` sidecar into `dir`.
pub fn run(cfg: &ResolvedConfig, dir: &Path) -> Result<Outcome, RunError> {
    let hash = config_hash(cfg);
    let model = cfg.model_spec()?;
    let header = json!({
        "record": "header",
        "tool": "sinrlab",
        "version": VERSION,
        "config_hash": hash,
        "seed": cfg.seed,
        "config": cfg,
        "interference_cutoff": model.interference_cutoff(),
        // mean interference lost to the cutoff, per unit intensity
        "truncation_bound_per_lambda": model.truncation_bound(1.0),
        "percolation_proxy": "crossing of the observation window along axis 0; a finite-volume stand-in for an infinite cluster",
    });
    let mut sink = Sink::new(header);
    let start = Instant::now();
    let result = dispatch(cfg, &mut sink);
    let elapsed = start.elapsed().as_secs_f64();
    let stem = cfg.kind();
    let error = result.err();
    let (results, plot) = sink.write(dir, stem, error.as_ref()).map_err(RunError::Io)?;
    let timing = json!({"config_hash": hash, "version": VERSION, "wall_clock_s": elapsed});
    std::fs::write(dir.join(format!("{stem}.timing.json")), format!("{timing}\n")).map_err(RunError::Io)?;
    Ok(Outcome { results, plot, error })
}

fn dispatch(cfg: &ResolvedConfig, sink: &mut Sink) -> Result<(), RunError> {
    let model = cfg.model_spec()?;
    let (seed, reps) = (cfg.seed, cfg.replicas);
    match &cfg.experiment {
        Experiment::GraphSample(g) => graph_sample(&model, g, seed, sink),
        Experiment::DegreeSweep(d) => {
            sink.columns(&["lambda", "tau", "gamma", "bound", "max_degree", "violations", "replicas"]);
            let mut total = 0;
            for &tau in &d.taus {
                let m = ModelSpec { tau, ..model.clone() };
                for &gamma in &d.gammas {
                    let row = est::degree_sweep_point(&m, d.lambda, gamma, d.side, reps, seed)?;
                    sink.row(&[
                        row.lambda,
                        row.tau,
                        row.gamma,
                        row.bound,
                        row.max_degree as f64,
                        row.violations as f64,
                        row.replicas as f64,
                    ]);
                    total += row.violations;
                    sink.record("degree", &row);
                }
            }
            if total > 0 {
                return Err(RunError::Invariant(format!("{total} realizations breach the degree bound")));
            }
            Ok(())
        }
        Experiment::CrossingSweep(c) => {
            let res = est::crossing_sweep(&model, &c.lambdas, &c.gammas, &c.windows, reps, seed)?;
            sink.columns(&["lambda", "gamma", "side", "estimate", "ci_lo", "ci_hi", "replicas"]);
            for p in &res.points {
                sink.row(&[p.lambda, p.gamma, p.side, p.crossing.estimate, p.crossing.ci_lo, p.crossing.ci_hi, reps as f64]);
                sink.point(json!({"lambda": p.lambda, "gamma": p.gamma, "side": p.side}), &p.crossing, json!({}));
            }
            Ok(())
        }
        Experiment::LambdaC(l) => {
            let res = est::estimate_lambda_c_gilbert(l.r, model.dim, &l.windows, reps, seed)?;
            lambda_c_rows(&res, sink);
            sink.record(
                "summary",
                json!({"r": res.r, "estimate": res.estimate, "spread": res.spread, "relative_spread": res.relative_spread}),
            );
            Ok(())
        }
        Experiment::GammaStar(g) => {
            let res = est::estimate_gamma_star(&model, g.lambda, &g.windows, reps, seed)?;
            sink.columns(&["lambda", "side", "estimate", "ci_lo", "ci_hi", "replicas", "crossing_at_zero"]);
            for w in &res.per_window {
                sink.row(&[
                    g.lambda,
                    w.side,
                    w.gamma_star,
                    w.ci_lo,
                    w.ci_hi,
                    w.replicas as f64,
                    w.crossing_at_zero.estimate,
                ]);
                sink.record(
                    "point",
                    json!({
                        "lambda": g.lambda, "side": w.side, "estimate": w.gamma_star,
                        "ci_lo": w.ci_lo, "ci_hi": w.ci_hi, "replicas": w.replicas,
                        "iterations": w.iterations, "crossing_at_zero": w.crossing_at_zero,
                        "subcritical_at_zero": w.subcritical_at_zero,
                    }),
                );
            }
            sink.record("summary", json!({"estimate": res.estimate, "bound": res.bound}));
            Ok(())
        }
        Experiment::Theorem1(t) => {
            let rep = est::theorem1_experiment(&model, t.side, t.lambda_start, reps, seed)?;
            sink.columns(&["lambda", "gamma", "side", "estimate", "ci_lo", "ci_hi", "replicas"]);
            for (lambda, p) in &rep.lambda_trail {
                sink.row(&[*lambda, 0.0, t.side, p.estimate, p.ci_lo, p.ci_hi, p.trials as f64]);
                sink.point(json!({"lambda": lambda, "gamma": 0.0, "side": t.side}), p, json!({}));
            }
            if let Some(w) = &rep.witness {
                for (gamma, p) in &w.attempts {
                    sink.row(&[w.lambda, *gamma, t.side, p.estimate, p.ci_lo, p.ci_hi, p.trials as f64]);
                    sink.point(
                        json!({"lambda": w.lambda, "gamma": gamma, "side": t.side}),
                        p,
                        json!({"fresh_replicas": true}),
                    );
                }
            }
            sink.record(
                "summary",
                json!({
                    "found": rep.found(),
                    "witness_gamma": rep.witness.as_ref().and_then(|w| w.gamma),
                    "witness_lambda": rep.witness.as_ref().map(|w| w.lambda),
                    "conditions": rep.conditions,
                    "assumption_violations": rep.assumption_violations,
                    "diagnostics": rep.diagnostics,
                }),
            );
            if let Some(rhos) = &t.rho_grid {
                let scan = est::theorem1_rho_scan(&model, t.side, rhos, t.lambda_start, reps, seed)?;
                sink.record("rho-scan", &scan);
            }
            Ok(())
        }
        Experiment::Theorem2(t) => {
            let lambda_ref = match t.lambda_ref {
                Some(l) => l,
                None => {
                    let PowerDistribution::Dirac { p } = model.powers else {
                        return Err(RunError::Config(ConfigError::Schema {
                            path: "experiment.lambda_ref".into(),
                            message: "required unless powers are dirac".into(),
                        }));
                    };
                    let r_b = model.sinr(0.0).radius(&model.pathloss, p);
                    let lc = est::estimate_lambda_c_gilbert(r_b, model.dim, &t.lambda_c_windows, reps, seed)?;
                    sink.record("lambda-c", json!({"r_b": r_b, "estimate": lc.estimate, "per_window": lc.per_window}));
                    lc.estimate
                }
            };
            let gamma = 1.0 / (2.0 * model.tau);
            sink.columns(&[
                "multiplier",
                "lambda",
                "gamma",
                "side",
                "estimate",
                "ci_lo",
                "ci_hi",
                "replicas",
                "mean_largest_cluster",
                "largest_cluster_se",
                "max_degree",
                "cycles",
                "paths",
            ]);
            let mut rows = Vec::new();
            for &m in &t.multipliers {
                for &side in &t.windows {
                    let row = est::theorem2_point(&model, m, m * lambda_ref, gamma, side, reps, seed)?;
                    sink.row(&[
                        m,
                        row.lambda,
                        gamma,
                        side,
                        row.crossing.estimate,
                        row.crossing.ci_lo,
                        row.crossing.ci_hi,
                        reps as f64,
                        row.mean_largest_cluster,
                        row.largest_cluster_std_err,
                        row.max_degree as f64,
                        row.cycles as f64,
                        row.paths as f64,
                    ]);
                    sink.point(
                        json!({"multiplier": m, "lambda": row.lambda, "gamma": gamma, "side": side}),
                        &row.crossing,
                        json!({
                            "mean_largest_cluster": row.mean_largest_cluster,
                            "largest_cluster_se": row.largest_cluster_std_err,
                            "max_degree": row.max_degree, "cycles": row.cycles, "paths": row.paths,
                        }),
                    );
                    rows.push(row);
                }
            }
            let checks = est::theorem2_checks(&rows);
            sink.record(
                "summary",
                json!({
                    "gamma": gamma, "lambda_ref": lambda_ref,
                    "max_degree": rows.iter().map(|r| r.max_degree).max(),
                    "checks": checks,
                }),
            );
            Ok(())
        }
        Experiment::Theorem3(t) => {
            let rep = est::theorem3_experiment(&model, &t.windows, &t.multipliers, reps, seed)?;
            lambda_c_rows(&rep.lambda_c, sink);
            sink.columns(&["multiplier", "lambda", "gamma", "side", "estimate", "ci_lo", "ci_hi", "replicas"]);
            sink.rows.clear();
            for row in &rep.rows {
                let w = &row.witness;
                let p = &w.crossing_at_zero;
                sink.row(&[row.multiplier, row.lambda, 0.0, w.side, p.estimate, p.ci_lo, p.ci_hi, p.trials as f64]);
                sink.point(
                    json!({"multiplier": row.multiplier, "lambda": row.lambda, "gamma": 0.0, "side": w.side}),
                    p,
                    json!({"gamma_star": w.gamma_star}),
                );
                for (gamma, p) in &w.attempts {
                    sink.row(&[row.multiplier, row.lambda, *gamma, w.side, p.estimate, p.ci_lo, p.ci_hi, p.trials as f64]);
                    sink.point(
                        json!({"multiplier": row.multiplier, "lambda": row.lambda, "gamma": gamma, "side": w.side}),
                        p,
                        json!({"fresh_replicas": true}),
                    );
                }
            }
            sink.record(
                "summary",
                json!({
                    "r_b": rep.r_b,
                    "lambda_c": rep.lambda_c.estimate,
                    "lambda_c_relative_spread": rep.lambda_c.relative_spread,
                    "bracket_lo": rep.bracket_lo,
                    "bracket_hi": rep.bracket_hi,
                    "bracket_rel_dev": rep.bracket_rel_dev,
                }),
            );
            Ok(())
        }
        Experiment::RenormScan(r) => {
            let params = RenormParams {
                n: r.n,
                r: r.r,
                r_o: r.r_o,
                m_cap: r.m_cap,
            };
            params.validate(&model.pathloss)?;
            let sinr = model.sinr(0.0);
            let gp = gamma_prime(r.r, r.r_o, r.m_cap, &sinr, &model.pathloss)?;
            let gamma = r.gamma.unwrap_or(gp / 2.0);
            let margin = scan_margin(&params, r.variant);
            let cfg = model.sample(r.lambda, r.side, margin, seed)?;
            let dep = model.measure.kind.dependence_range();
            let lat = nice_site_scan(&params, &cfg, &sinr, &model.pathloss, gamma, dep, r.variant)?;
            sink.columns(&["z0", "z1", "good", "tame", "nice"]);
            for s in &lat.sites {
                let z1 = s.z.get(1).copied().unwrap_or(0);
                sink.row(&[s.z[0] as f64, z1 as f64, s.good as u8 as f64, s.tame as u8 as f64, s.nice as u8 as f64]);
            }
            let p = params.power_threshold(&sinr, &model.pathloss);
            sink.record(
                "summary",
                json!({
                    "spacing": lat.spacing, "extent": lat.extent,
                    "good_fraction": lat.good_fraction, "tame_fraction": lat.tame_fraction,
                    "nice_fraction": lat.nice_fraction, "crossing": lat.crossing,
                    "stabilization_evaluated": lat.stabilization_evaluated,
                    "power_threshold": p,
                    // component diameters are taken over points; the union of
                    // the radius-r/2 balls is wider by at most r
                    "diameter_slack": r.r,
                    "edge_preservation": lat.edge_preservation,
                }),
            );
            let ep = &lat.edge_preservation;
            // the implication is only guaranteed for gamma <= gamma' p
            if ep.violations > 0 && gamma <= gp * p {
                return Err(RunError::Invariant(format!(
                    "{} of {} nice-block edges missing from the SINR graph",
                    ep.violations, ep.checked_pairs
                )));
            }
            Ok(())
        }
    }
}

fn lambda_c_rows(res: &est::LambdaCEstimate, sink: &mut Sink) {
    sink.columns(&["r", "side", "estimate", "ci_lo", "ci_hi", "replicas"]);
    for w in &res.per_window {
        sink.row(&[res.r, w.side, w.estimate, w.ci_lo, w.ci_hi, w.replicas as f64]);
        sink.record(
            "point",
            json!({
                "r": res.r, "side": w.side, "estimate": w.estimate, "ci_lo": w.ci_lo, "ci_hi": w.ci_hi,
                "replicas": w.replicas, "iterations": w.iterations,
                "crossing_lo": w.crossing_lo, "crossing_hi": w.crossing_hi,
            }),
        );
    }
}

fn graph_sample(model: &ModelSpec, g: &crate::config::GraphSample, seed: u64, sink: &mut Sink) -> Result<(), RunError> {
    let cutoff = model.interference_cutoff();
    let range = InterferenceRange::Cutoff(cutoff);
    let cfg = model.sample(g.lambda, g.side, cutoff, seed)?;
    let sinr = model.sinr(g.gamma);
    let graph = match g.graph {
        GraphKind::Sinr => build_sinr_graph_with(&cfg, &sinr, &model.pathloss, range)?,
        GraphKind::Gilbert => {
            let radii = match g.radius {
                Some(r) => Radii::Constant(r),
                None => Radii::PerPoint(sinr_radii(&cfg, &sinr, &model.pathloss)?, RadiusRule::Min),
            };
            build_gilbert_graph(&cfg, &radii)?
        }
        GraphKind::Minus => {
            let r_o = g.r_o.expect("checked at parse time");
            build_minus_graph_with(&cfg, &sinr, &model.pathloss, r_o, range)?
        }
    };
    let powers = cfg.powers()?;
    let degrees = graph.degrees();
    let mut cols = vec!["vertex", "source"];
    let axes = ["x", "y", "z", "w"];
    cols.extend(axes.iter().take(graph.dim()));
    cols.extend(["power", "label", "degree"]);
    sink.columns(&cols);
    for v in 0..graph.vertex_count() {
        let mut row = vec![v as f64, graph.origin()[v] as f64];
        row.extend_from_slice(graph.position(v));
        row.extend([powers[graph.origin()[v]], graph.labels()[v] as f64, degrees[v] as f64]);
        sink.row(&row);
    }
    sink.record(
        "graph",
        json!({
            "graph": g.graph, "lambda": g.lambda, "gamma": g.gamma, "side": g.side,
            "points": cfg.len(), "vertices": graph.vertex_count(),
            "edges": graph.edges(), "labels": graph.labels(),
            "crossing": crossing_exists(&graph, est::CROSSING_AXIS),
            "largest_cluster": graph.largest_cluster(),
            "max_degree": degree_stats(&graph).max_degree,
            "interference_cutoff": cutoff,
        }),
    );
    Ok(())
}
