//! Experiment configuration: TOML schema, registry and resolution.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sinrlab::estimators::ModelSpec;
use sinrlab::pathloss::{PathLoss, PathLossKind};
use sinrlab::pointproc::{DirectingMeasureSpec, MeasureKind, PowerDistribution};
use sinrlab::renorm::ScanVariant;
use sinrlab::rng::derive_seed;

pub struct KindInfo {
    pub name: &'static str,
    pub summary: &'static str,
    pub required: &'static str,
}

pub const REGISTRY: [KindInfo; 9] = [
    KindInfo {
        name: "graph-sample",
        summary: "sample one configuration and write its edge list and cluster labels",
        required: "lambda, side [gamma, graph = sinr|gilbert|minus, r_o, radius]",
    },
    KindInfo {
        name: "degree-sweep",
        summary: "degree histograms over a (tau, gamma) grid against the bound 1 + 1/(tau gamma)",
        required: "lambda, side, taus, gammas",
    },
    KindInfo {
        name: "crossing-sweep",
        summary: "crossing probability over a (lambda, gamma) grid and window sides",
        required: "lambdas, gammas, windows",
    },
    KindInfo {
        name: "lambda-c",
        summary: "critical intensity of the Poisson-Gilbert graph at radius r",
        required: "r, windows",
    },
    KindInfo {
        name: "gamma-star",
        summary: "critical interference factor gamma(lambda) by bisection",
        required: "lambda, windows",
    },
    KindInfo {
        name: "theorem1",
        summary: "search for (lambda, gamma > 0) with crossing probability above one half; reports assumption checks",
        required: "side [lambda_start, rho_grid]",
    },
    KindInfo {
        name: "theorem2",
        summary: "non-percolation evidence at gamma = 1/(2 tau): crossing, cluster growth, degree census",
        required: "multipliers, windows [lambda_ref, lambda_c_windows]",
    },
    KindInfo {
        name: "theorem3",
        summary: "SINR critical intensity against lambda_c(r_B) for constant powers",
        required: "windows, multipliers",
    },
    KindInfo {
        name: "renorm-scan",
        summary: "good/tame/nice site lattice and edge-preservation check",
        required: "lambda, side, n, r, r_o, m_cap [gamma, variant = thinned|boolean]",
    },
];

pub fn registry_text() -> String {
    let mut s = String::from("experiment kinds:\n");
    for k in &REGISTRY {
        s.push_str(&format!("  {:<15} {}\n  {:<15} fields: {}\n", k.name, k.summary, "", k.required));
    }
    s
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{0}")]
    Syntax(String),
    #[error("at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("unknown experiment kind `{0}`; valid kinds: {1}")]
    UnknownKind(String, String),
    #[error("invalid model: {0}")]
    Model(#[from] sinrlab::Error),
}

fn schema_err(prefix: &str, e: serde_path_to_error::Error<toml::de::Error>) -> ConfigError {
    let inner = e.path().to_string();
    let path = match (prefix.is_empty(), inner == ".") {
        (true, _) => inner,
        (false, true) => prefix.to_string(),
        (false, false) => format!("{prefix}.{inner}"),
    };
    ConfigError::Schema {
        path,
        message: e.into_inner().message().to_string(),
    }
}

fn parse_section<T: DeserializeOwned>(value: toml::Value, prefix: &str) -> Result<T, ConfigError> {
    serde_path_to_error::deserialize(value).map_err(|e| schema_err(prefix, e))
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTop {
    kind: String,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_replicas")]
    replicas: usize,
    #[serde(default)]
    output: Option<String>,
    model: toml::Value,
    #[serde(default = "empty_table")]
    experiment: toml::Value,
}

fn default_replicas() -> usize {
    sinrlab::estimators::DEFAULT_REPLICAS
}

fn empty_table() -> toml::Value {
    toml::Value::Table(Default::default())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub dim: usize,
    pub tau: f64,
    pub noise: f64,
    pub measure: MeasureKind,
    /// Makes `E[Lambda(Q_1)] = 1`; derived from the closed-form mean, or
    /// calibrated from the seed, when omitted.
    #[serde(default)]
    pub normalization: Option<f64>,
    pub powers: PowerDistribution,
    pub pathloss: PathLossKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphKind {
    Sinr,
    Gilbert,
    Minus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSample {
    pub lambda: f64,
    pub side: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "sinr_kind")]
    pub graph: GraphKind,
    /// Minus-graph radius.
    #[serde(default)]
    pub r_o: Option<f64>,
    /// Constant Gilbert radius; per-point SINR radii with the min rule when omitted.
    #[serde(default)]
    pub radius: Option<f64>,
}

fn sinr_kind() -> GraphKind {
    GraphKind::Sinr
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegreeSweep {
    pub lambda: f64,
    pub side: f64,
    pub taus: Vec<f64>,
    pub gammas: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossingSweep {
    pub lambdas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub windows: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaC {
    pub r: f64,
    pub windows: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaStar {
    pub lambda: f64,
    pub windows: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theorem1 {
    pub side: f64,
    #[serde(default)]
    pub lambda_start: Option<f64>,
    /// Bounded-cone support radii to scan for the smallest one with a witness.
    #[serde(default)]
    pub rho_grid: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theorem2 {
    pub multipliers: Vec<f64>,
    pub windows: Vec<f64>,
    /// Intensity the multipliers scale; estimated as `lambda_c(r_B)` when omitted.
    #[serde(default)]
    pub lambda_ref: Option<f64>,
    #[serde(default = "default_lc_windows")]
    pub lambda_c_windows: Vec<f64>,
}

fn default_lc_windows() -> Vec<f64> {
    vec![64.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theorem3 {
    pub windows: Vec<f64>,
    pub multipliers: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenormScan {
    pub lambda: f64,
    pub side: f64,
    pub n: usize,
    pub r: f64,
    pub r_o: f64,
    pub m_cap: f64,
    /// Defaults to `gamma' / 2`.
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default = "thinned")]
    pub variant: ScanVariant,
}

fn thinned() -> ScanVariant {
    ScanVariant::Thinned
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    GraphSample(GraphSample),
    DegreeSweep(DegreeSweep),
    CrossingSweep(CrossingSweep),
    LambdaC(LambdaC),
    GammaStar(GammaStar),
    Theorem1(Theorem1),
    Theorem2(Theorem2),
    Theorem3(Theorem3),
    RenormScan(RenormScan),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::GraphSample(_) => "graph-sample",
            Self::DegreeSweep(_) => "degree-sweep",
            Self::CrossingSweep(_) => "crossing-sweep",
            Self::LambdaC(_) => "lambda-c",
            Self::GammaStar(_) => "gamma-star",
            Self::Theorem1(_) => "theorem1",
            Self::Theorem2(_) => "theorem2",
            Self::Theorem3(_) => "theorem3",
            Self::RenormScan(_) => "renorm-scan",
        }
    }
}

/// Fully resolved configuration; echoed into every output and hashed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub seed: u64,
    pub replicas: usize,
    pub model: ModelConfig,
    pub experiment: Experiment,
    #[serde(skip)]
    pub output: Option<String>,
}

#[derive(Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replicas: Option<usize>,
}

pub fn parse(text: &str, overrides: &Overrides) -> Result<ResolvedConfig, ConfigError> {
    let value: toml::Value = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    let top: RawTop = parse_section(value, "")?;
    let valid: Vec<&str> = REGISTRY.iter().map(|k| k.name).collect();
    if !valid.contains(&top.kind.as_str()) {
        return Err(ConfigError::UnknownKind(top.kind, valid.join(", ")));
    }
    let model: ModelConfig = parse_section(top.model, "model")?;
    let e = top.experiment;
    let experiment = match top.kind.as_str() {
        "graph-sample" => Experiment::GraphSample(parse_section(e, "experiment")?),
        "degree-sweep" => Experiment::DegreeSweep(parse_section(e, "experiment")?),
        "crossing-sweep" => Experiment::CrossingSweep(parse_section(e, "experiment")?),
        "lambda-c" => Experiment::LambdaC(parse_section(e, "experiment")?),
        "gamma-star" => Experiment::GammaStar(parse_section(e, "experiment")?),
        "theorem1" => Experiment::Theorem1(parse_section(e, "experiment")?),
        "theorem2" => Experiment::Theorem2(parse_section(e, "experiment")?),
        "theorem3" => Experiment::Theorem3(parse_section(e, "experiment")?),
        "renorm-scan" => Experiment::RenormScan(parse_section(e, "experiment")?),
        _ => unreachable!("kind checked against the registry"),
    };
    let replicas = overrides.replicas.unwrap_or(top.replicas);
    if replicas == 0 {
        return Err(ConfigError::Schema {
            path: "replicas".into(),
            message: "must be at least 1".into(),
        });
    }
    let mut cfg = ResolvedConfig {
        seed: overrides.seed.unwrap_or(top.seed),
        replicas,
        model,
        experiment,
        output: top.output,
    };
    check_experiment(&cfg.experiment)?;
    cfg.model.normalization = Some(resolve_normalization(&cfg.model, cfg.seed)?);
    cfg.model_spec()?;
    Ok(cfg)
}

fn positive(path: &str, xs: &[f64]) -> Result<(), ConfigError> {
    if xs.is_empty() {
        return Err(ConfigError::Schema {
            path: path.into(),
            message: "must not be empty".into(),
        });
    }
    for (i, &x) in xs.iter().enumerate() {
        if !(x > 0.0 && x.is_finite()) {
            return Err(ConfigError::Schema {
                path: format!("{path}[{i}]"),
                message: format!("must be positive and finite, got {x}"),
            });
        }
    }
    Ok(())
}

fn nonnegative(path: &str, xs: &[f64]) -> Result<(), ConfigError> {
    if xs.is_empty() {
        return Err(ConfigError::Schema {
            path: path.into(),
            message: "must not be empty".into(),
        });
    }
    for (i, &x) in xs.iter().enumerate() {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(ConfigError::Schema {
                path: format!("{path}[{i}]"),
                message: format!("must be nonnegative and finite, got {x}"),
            });
        }
    }
    Ok(())
}

fn check_experiment(e: &Experiment) -> Result<(), ConfigError> {
    match e {
        Experiment::GraphSample(g) => {
            nonnegative("experiment.lambda", &[g.lambda])?;
            positive("experiment.side", &[g.side])?;
            nonnegative("experiment.gamma", &[g.gamma])?;
            if g.graph == GraphKind::Minus && g.r_o.is_none() {
                return Err(ConfigError::Schema {
                    path: "experiment.r_o".into(),
                    message: "required for graph = \"minus\"".into(),
                });
            }
        }
        Experiment::DegreeSweep(d) => {
            nonnegative("experiment.lambda", &[d.lambda])?;
            positive("experiment.side", &[d.side])?;
            positive("experiment.taus", &d.taus)?;
            nonnegative("experiment.gammas", &d.gammas)?;
        }
        Experiment::CrossingSweep(c) => {
            nonnegative("experiment.lambdas", &c.lambdas)?;
            nonnegative("experiment.gammas", &c.gammas)?;
            positive("experiment.windows", &c.windows)?;
        }
        Experiment::LambdaC(l) => {
            positive("experiment.r", &[l.r])?;
            positive("experiment.windows", &l.windows)?;
        }
        Experiment::GammaStar(g) => {
            nonnegative("experiment.lambda", &[g.lambda])?;
            positive("experiment.windows", &g.windows)?;
        }
        Experiment::Theorem1(t) => {
            positive("experiment.side", &[t.side])?;
            if let Some(l) = t.lambda_start {
                positive("experiment.lambda_start", &[l])?;
            }
            if let Some(rhos) = &t.rho_grid {
                positive("experiment.rho_grid", rhos)?;
            }
        }
        Experiment::Theorem2(t) => {
            positive("experiment.multipliers", &t.multipliers)?;
            positive("experiment.windows", &t.windows)?;
            positive("experiment.lambda_c_windows", &t.lambda_c_windows)?;
            if let Some(l) = t.lambda_ref {
                positive("experiment.lambda_ref", &[l])?;
            }
        }
        Experiment::Theorem3(t) => {
            positive("experiment.windows", &t.windows)?;
            positive("experiment.multipliers", &t.multipliers)?;
        }
        Experiment::RenormScan(r) => {
            nonnegative("experiment.lambda", &[r.lambda])?;
            positive("experiment.side", &[r.side, r.r, r.r_o, r.m_cap])?;
            if r.n == 0 {
                return Err(ConfigError::Schema {
                    path: "experiment.n".into(),
                    message: "must be at least 1".into(),
                });
            }
        }
    }
    Ok(())
}

fn resolve_normalization(m: &ModelConfig, seed: u64) -> Result<f64, ConfigError> {
    if let Some(c) = m.normalization {
        return Ok(c);
    }
    if m.measure == MeasureKind::Lebesgue {
        return Ok(1.0);
    }
    let spec = DirectingMeasureSpec::normalized(m.measure.clone(), m.dim, derive_seed(seed, "calibration", 0))?;
    Ok(spec.normalization)
}

impl ResolvedConfig {
    pub fn kind(&self) -> &'static str {
        self.experiment.kind()
    }

    pub fn model_spec(&self) -> Result<ModelSpec, ConfigError> {
        let m = &self.model;
        let spec = ModelSpec {
            dim: m.dim,
            measure: DirectingMeasureSpec::new(m.measure.clone(), m.normalization.unwrap_or(1.0)),
            powers: m.powers.clone(),
            pathloss: PathLoss::new(m.pathloss.clone(), m.dim)?,
            tau: m.tau,
            noise: m.noise,
        };
        spec.validate()?;
        Ok(spec)
    }
}
