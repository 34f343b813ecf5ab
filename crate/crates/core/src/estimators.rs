//! Monte Carlo crossing probabilities and critical-parameter estimates.
//!
//! Every replica draws its randomness from `derive_seed(master, tag, ...)`
//! streams that do not depend on `lambda` or `gamma`, so sweeps use common
//! random numbers and results do not depend on the number of workers.
//!
//! Two per-replica thresholds make sweeps exact:
//!
//! * `gamma*` of a realization: the crossing indicator at `gamma` equals
//!   `gamma < gamma*` (edges only disappear as `gamma` grows);
//! * `lambda*` of a Poisson–Gilbert realization built by thinning a
//!   configuration at `lambda_max` with uniform labels: the crossing
//!   indicator at `lambda` equals `lambda >= lambda*`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{CellGrid, Window};
use crate::graph::{classify_degree2_components, crossing_exists, degree_stats, ClusterShape, GraphResult, UnionFind};
use crate::pathloss::{unit_ball_volume, PathLoss, PathLossKind};
use crate::pointproc::{
    build_directing_measure, mark_powers, sample_cox, sample_ppp_with, DirectingMeasureSpec, MarkedConfiguration,
    MeasureKind, PowerDistribution,
};
use crate::renorm::{boolean_good_site, tame_site, RenormParams, TameVariant};
use crate::rng::{derive_seed, stream};
use crate::sinr::{build_sinr_graph_with, gamma_profile, interference_tail_bound, GammaProfile, InterferenceRange, SinrParams};
use crate::stats::{combined_std_err, mean, mean_std_err, median_interval, Proportion};

pub const DEFAULT_REPLICAS: usize = 200;
/// Bisection stops at this relative bracket width ...
pub const BISECTION_REL_TOL: f64 = 1e-3;
/// ... or after this many halvings.
pub const BISECTION_MAX_ITER: usize = 20;
/// Bracket expansions before giving up.
pub const MAX_DOUBLINGS: usize = 4;
/// Interference cutoff: the expected truncated tail is at most this fraction
/// of the expected total interference ...
pub const CUTOFF_TAIL_FRACTION: f64 = 0.01;
/// ... unless that needs more than this many typical connection radii.
pub const CUTOFF_RADIUS_CAP: f64 = 8.0;
/// Crossings are measured along this axis.
pub const CROSSING_AXIS: usize = 0;

/// Everything needed to sample marked configurations and SINR graphs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelSpec {
    pub dim: usize,
    pub measure: DirectingMeasureSpec,
    pub powers: PowerDistribution,
    pub pathloss: PathLoss,
    pub tau: f64,
    pub noise: f64,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.pathloss.dim() != self.dim {
            return Err(invalid("pathloss", "dimension differs from the model dimension"));
        }
        self.measure.validate(self.dim)?;
        self.powers.validate()?;
        self.sinr(0.0).validate()
    }

    pub fn sinr(&self, gamma: f64) -> SinrParams {
        SinrParams {
            tau: self.tau,
            noise: self.noise,
            gamma,
        }
    }

    /// Connection radius of a transmitter with the mean power.
    pub fn typical_radius(&self) -> f64 {
        self.sinr(0.0).radius(&self.pathloss, self.powers.mean())
    }

    /// Length scale used for default search ranges and cutoffs.
    fn scale(&self) -> f64 {
        let r = self.typical_radius();
        if r.is_finite() && r > 0.0 {
            r.max(self.pathloss.plateau_end())
        } else {
            self.pathloss.plateau_end().max(1.0)
        }
    }

    /// Interference range: the support for bounded path loss; otherwise the
    /// distance beyond which at most `CUTOFF_TAIL_FRACTION` of the mean
    /// interference comes from, capped at `CUTOFF_RADIUS_CAP` scales.
    pub fn interference_cutoff(&self) -> f64 {
        if let Some(rho) = self.pathloss.support_sup() {
            return rho;
        }
        let total = self.pathloss.tail_integral(0.0);
        let cap = CUTOFF_RADIUS_CAP * self.scale();
        if self.pathloss.tail_integral(cap) > CUTOFF_TAIL_FRACTION * total {
            return cap;
        }
        let (mut lo, mut hi) = (0.0, cap);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.pathloss.tail_integral(mid) > CUTOFF_TAIL_FRACTION * total {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    /// Upper bound on the mean interference lost to the cutoff at `lambda`.
    pub fn truncation_bound(&self, lambda: f64) -> f64 {
        interference_tail_bound(&self.pathloss, lambda, self.powers.mean(), self.interference_cutoff())
    }

    /// Marked Cox configuration on `Q_side` with buffer `margin`.
    pub fn sample(&self, lambda: f64, side: f64, margin: f64, seed: u64) -> Result<MarkedConfiguration> {
        let window = Window::centered(self.dim, side, margin)?;
        let measure = build_directing_measure(&self.measure, &window, derive_seed(seed, "measure", 0))?;
        let points = sample_cox(&measure, lambda, derive_seed(seed, "points", 0))?;
        mark_powers(&points, &self.powers, derive_seed(seed, "powers", 0))
    }

    /// Per-edge `gamma` thresholds of one replica, interference cut off at
    /// [`Self::interference_cutoff`].
    pub fn profile(&self, lambda: f64, side: f64, seed: u64) -> Result<GammaProfile> {
        let cutoff = self.interference_cutoff();
        let cfg = self.sample(lambda, side, cutoff, seed)?;
        gamma_profile(&cfg, &self.sinr(0.0), &self.pathloss, InterferenceRange::Cutoff(cutoff))
    }

    pub fn graph(&self, lambda: f64, gamma: f64, side: f64, seed: u64) -> Result<GraphResult> {
        let cutoff = self.interference_cutoff();
        let cfg = self.sample(lambda, side, cutoff, seed)?;
        build_sinr_graph_with(&cfg, &self.sinr(gamma), &self.pathloss, InterferenceRange::Cutoff(cutoff))
    }
}

/// Seed of replica `k` in the stream `tag` at window side `side`.
pub fn replica_seed(master: u64, tag: &str, side: f64, k: usize) -> u64 {
    derive_seed(derive_seed(master, tag, side.to_bits()), "replica", k as u64)
}

/// Face-touch flags of every vertex.
fn face_flags(graph: &GraphResult, axis: usize) -> Vec<(bool, bool)> {
    let obs = graph.window().observation();
    let lo = obs.low(axis) + graph.touch_distance();
    let hi = obs.high(axis) - graph.touch_distance();
    (0..graph.vertex_count())
        .map(|v| {
            let x = graph.position(v)[axis];
            (x <= lo, x >= hi)
        })
        .collect()
}

/// `gamma*` of one realization: crossing at `gamma` iff `gamma < gamma*`.
/// Zero when `G_0` does not cross, `+inf` when a single vertex crosses.
pub fn gamma_star_of(profile: &GammaProfile, axis: usize) -> f64 {
    let g = profile.base();
    let mut flags = face_flags(g, axis);
    if flags.iter().any(|&(a, b)| a && b) {
        return f64::INFINITY;
    }
    let t = profile.thresholds();
    let mut order: Vec<usize> = (0..t.len()).collect();
    order.sort_by(|&a, &b| t[b].total_cmp(&t[a]));
    let mut uf = UnionFind::new(g.vertex_count());
    for e in order {
        let (a, b) = g.edges()[e];
        let (ra, rb) = (uf.find(a), uf.find(b));
        if let Some(root) = uf.union(ra, rb) {
            let merged = (flags[ra].0 || flags[rb].0, flags[ra].1 || flags[rb].1);
            flags[root] = merged;
            if merged.0 && merged.1 {
                return t[e];
            }
        }
    }
    0.0
}

/// Crossing probability with interval, plus secondary cluster statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingEstimate {
    pub lambda: f64,
    pub gamma: f64,
    pub side: f64,
    pub crossing: Proportion,
    pub mean_largest_cluster: f64,
    pub largest_cluster_std_err: f64,
    pub max_degree: usize,
}

/// Fraction of replicas whose SINR graph crosses the window.
pub fn crossing_probability(
    model: &ModelSpec,
    lambda: f64,
    gamma: f64,
    side: f64,
    replicas: usize,
    seed: u64,
) -> Result<CrossingEstimate> {
    model.validate()?;
    if replicas < 1 {
        return Err(invalid("replicas", "must be at least 1"));
    }
    let per: Vec<(bool, usize, usize)> = (0..replicas)
        .into_par_iter()
        .map(|k| {
            let g = model.graph(lambda, gamma, side, replica_seed(seed, "sinr", side, k))?;
            Ok((
                crossing_exists(&g, CROSSING_AXIS),
                g.largest_cluster(),
                degree_stats(&g).max_degree,
            ))
        })
        .collect::<Result<_>>()?;
    let largest: Vec<f64> = per.iter().map(|p| p.1 as f64).collect();
    Ok(CrossingEstimate {
        lambda,
        gamma,
        side,
        crossing: Proportion::new(per.iter().filter(|p| p.0).count(), replicas),
        mean_largest_cluster: mean(&largest),
        largest_cluster_std_err: mean_std_err(&largest),
        max_degree: per.iter().map(|p| p.2).max().unwrap_or(0),
    })
}

/// Per-replica `gamma*` values at `(lambda, side)`.
pub fn gamma_star_samples(
    model: &ModelSpec,
    lambda: f64,
    side: f64,
    replicas: usize,
    seed: u64,
    tag: &str,
) -> Result<Vec<f64>> {
    model.validate()?;
    (0..replicas)
        .into_par_iter()
        .map(|k| {
            let prof = model.profile(lambda, side, replica_seed(seed, tag, side, k))?;
            Ok(gamma_star_of(&prof, CROSSING_AXIS))
        })
        .collect()
}

fn frac_above(samples: &[f64], gamma: f64) -> Proportion {
    Proportion::new(samples.iter().filter(|&&g| g > gamma).count(), samples.len())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub gamma: f64,
    pub side: f64,
    pub crossing: Proportion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub windows: Vec<f64>,
    pub points: Vec<SweepPoint>,
}

/// Crossing probabilities over a `(lambda, gamma)` grid. For each `lambda`
/// the `gamma` column reuses the same replicas, so it is nonincreasing.
pub fn crossing_sweep(
    model: &ModelSpec,
    lambdas: &[f64],
    gammas: &[f64],
    windows: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<SweepResult> {
    if replicas < 1 {
        return Err(invalid("replicas", "must be at least 1"));
    }
    let mut points = Vec::new();
    for &side in windows {
        for &lambda in lambdas {
            let samples = gamma_star_samples(model, lambda, side, replicas, seed, "sinr")?;
            for &gamma in gammas {
                points.push(SweepPoint {
                    lambda,
                    gamma,
                    side,
                    crossing: frac_above(&samples, gamma),
                });
            }
        }
    }
    Ok(SweepResult {
        windows: windows.to_vec(),
        points,
    })
}

/// `lambda*` of a Poisson–Gilbert realization at radius `r`: points of a
/// `lambda_max` sample are switched on in increasing label order.
pub fn lambda_star_seed(r: f64, dim: usize, side: f64, lambda_max: f64, seed: u64) -> Result<f64> {
    let window = Window::centered(dim, side, 0.0)?;
    let mut rng = stream(seed, "points", 0);
    let cfg = sample_ppp_with(lambda_max, &window, &mut rng)?;
    let mut labels_rng = stream(seed, "labels", 0);
    let n = cfg.len();
    let labels: Vec<f64> = (0..n).map(|_| labels_rng.random::<f64>()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| labels[a].total_cmp(&labels[b]));

    let obs = window.observation();
    let (lo, hi) = (obs.low(CROSSING_AXIS) + r, obs.high(CROSSING_AXIS) - r);
    let grid = CellGrid::build(cfg.coords(), dim, &window.buffered(), r);
    let mut uf = UnionFind::new(n);
    let mut on = vec![false; n];
    let mut flags: Vec<(bool, bool)> = (0..n)
        .map(|i| {
            let x = cfg.point(i)[CROSSING_AXIS];
            (x <= lo, x >= hi)
        })
        .collect();
    let r2 = r * r;
    for i in order {
        on[i] = true;
        let mut root = uf.find(i);
        let mut f = flags[i];
        let x = cfg.point(i);
        grid.for_each_candidate(x, r, |j| {
            if on[j] && j != i && crate::geometry::dist2(x, cfg.point(j)) < r2 {
                let rj = uf.find(j);
                if rj != root {
                    let fj = flags[rj];
                    root = uf.union(root, rj).expect("distinct roots");
                    f = (f.0 || fj.0, f.1 || fj.1);
                }
            }
        });
        flags[root] = f;
        if f.0 && f.1 {
            return Ok(lambda_max * labels[i]);
        }
    }
    Ok(f64::INFINITY)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowEstimate {
    pub side: f64,
    pub estimate: f64,
    /// Order-statistic interval of the per-replica thresholds' median.
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub replicas: usize,
    pub iterations: usize,
    /// Crossing probability at the final bracket ends.
    pub crossing_lo: Proportion,
    pub crossing_hi: Proportion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaCEstimate {
    pub r: f64,
    pub dim: usize,
    pub per_window: Vec<WindowEstimate>,
    /// Largest-window value.
    pub estimate: f64,
    /// `max - min` over windows.
    pub spread: f64,
    /// `spread / estimate`.
    pub relative_spread: f64,
}

fn relative_width(lo: f64, hi: f64) -> f64 {
    if hi > 0.0 {
        (hi - lo) / hi
    } else {
        0.0
    }
}

/// `lambda_c(r)` of the Poisson–Gilbert graph by bisection on the coupled
/// crossing probability, one estimate per window side.
pub fn estimate_lambda_c_gilbert(
    r: f64,
    dim: usize,
    windows: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<LambdaCEstimate> {
    if dim < 2 {
        return Err(Error::UnsupportedDimension { got: dim, need: ">= 2" });
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(invalid("r", format!("must be positive, got {r}")));
    }
    if windows.is_empty() || replicas < 1 {
        return Err(invalid("windows", "need at least one window and one replica"));
    }
    let mut per_window = Vec::new();
    for &side in windows {
        // start with a mean degree of 10
        let mut lambda_max = 10.0 / (unit_ball_volume(dim) * r.powi(dim as i32));
        let mut samples;
        let mut doublings = 0;
        loop {
            samples = (0..replicas)
                .into_par_iter()
                .map(|k| lambda_star_seed(r, dim, side, lambda_max, replica_seed(seed, "gilbert", side, k)))
                .collect::<Result<Vec<f64>>>()?;
            let frac = samples.iter().filter(|&&l| l <= lambda_max).count() as f64 / replicas as f64;
            if frac >= 0.5 {
                break;
            }
            if doublings == MAX_DOUBLINGS {
                return Err(Error::BracketNotFound { lo: 0.0, hi: lambda_max });
            }
            lambda_max *= 2.0;
            doublings += 1;
        }
        let count_at = |l: f64| samples.iter().filter(|&&s| s <= l).count();
        let (mut lo, mut hi) = (0.0, lambda_max);
        let mut iterations = 0;
        while iterations < BISECTION_MAX_ITER && relative_width(lo, hi) > BISECTION_REL_TOL {
            let mid = 0.5 * (lo + hi);
            if 2 * count_at(mid) >= replicas {
                hi = mid;
            } else {
                lo = mid;
            }
            iterations += 1;
        }
        let (ci_lo, ci_hi) = median_interval(&samples);
        per_window.push(WindowEstimate {
            side,
            estimate: 0.5 * (lo + hi),
            ci_lo,
            ci_hi,
            replicas,
            iterations,
            crossing_lo: Proportion::new(count_at(lo), replicas),
            crossing_hi: Proportion::new(count_at(hi), replicas),
        });
    }
    let largest = per_window
        .iter()
        .max_by(|a, b| a.side.total_cmp(&b.side))
        .expect("nonempty");
    let estimate = largest.estimate;
    let (mn, mx) = per_window
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), w| (a.min(w.estimate), b.max(w.estimate)));
    Ok(LambdaCEstimate {
        r,
        dim,
        estimate,
        spread: mx - mn,
        relative_spread: (mx - mn) / estimate,
        per_window,
    })
}

/// Coupled Poisson–Gilbert crossing probability at `lambda`, on the same
/// replicas [`estimate_lambda_c_gilbert`] uses.
pub fn gilbert_crossing_probability(
    r: f64,
    dim: usize,
    lambda: f64,
    side: f64,
    replicas: usize,
    seed: u64,
) -> Result<Proportion> {
    let lambda_max = lambda.max(f64::MIN_POSITIVE);
    let hits = (0..replicas)
        .into_par_iter()
        .map(|k| lambda_star_seed(r, dim, side, lambda_max, replica_seed(seed, "gilbert", side, k)))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .filter(|&l| l <= lambda)
        .count();
    Ok(Proportion::new(hits, replicas))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaWindowEstimate {
    pub side: f64,
    pub gamma_star: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub iterations: usize,
    pub crossing_at_zero: Proportion,
    /// `G_0` crosses in at most half of the replicas: `gamma(lambda)` is
    /// reported as 0.
    pub subcritical_at_zero: bool,
    pub replicas: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaStarEstimate {
    pub lambda: f64,
    pub per_window: Vec<GammaWindowEstimate>,
    /// Largest-window value.
    pub estimate: f64,
    /// Theorem-2 bound `1 / (2 tau)` for comparison.
    pub bound: f64,
}

/// Bisection for the `gamma` at which half the replicas still cross.
fn gamma_bisect(samples: &[f64], tau: f64) -> Result<(f64, f64, usize)> {
    let n = samples.len();
    let above = |g: f64| samples.iter().filter(|&&s| s > g).count();
    let mut hi = 1.0 / tau;
    let mut doublings = 0;
    while 2 * above(hi) >= n {
        if doublings == MAX_DOUBLINGS {
            return Err(Error::BracketNotFound { lo: 0.0, hi });
        }
        hi *= 2.0;
        doublings += 1;
    }
    let mut lo = 0.0;
    let mut iterations = 0;
    while iterations < BISECTION_MAX_ITER && relative_width(lo, hi) > BISECTION_REL_TOL {
        let mid = 0.5 * (lo + hi);
        if 2 * above(mid) > n {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    Ok((lo, hi, iterations))
}

pub fn gamma_star_from_samples(samples: &[f64], side: f64, tau: f64) -> Result<GammaWindowEstimate> {
    let n = samples.len();
    let at_zero = frac_above(samples, 0.0);
    let subcritical = 2 * at_zero.successes <= n;
    let (gamma_star, iterations) = if subcritical {
        (0.0, 0)
    } else {
        let (lo, hi, it) = gamma_bisect(samples, tau)?;
        (0.5 * (lo + hi), it)
    };
    let (ci_lo, ci_hi) = median_interval(samples);
    Ok(GammaWindowEstimate {
        side,
        gamma_star,
        ci_lo,
        ci_hi,
        iterations,
        crossing_at_zero: at_zero,
        subcritical_at_zero: subcritical,
        replicas: n,
    })
}

/// `gamma(lambda)` by bisection on the crossing probability at each window.
pub fn estimate_gamma_star(
    model: &ModelSpec,
    lambda: f64,
    windows: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<GammaStarEstimate> {
    if windows.is_empty() || replicas < 1 {
        return Err(invalid("windows", "need at least one window and one replica"));
    }
    let mut per_window = Vec::new();
    for &side in windows {
        let samples = gamma_star_samples(model, lambda, side, replicas, seed, "sinr")?;
        per_window.push(gamma_star_from_samples(&samples, side, model.tau)?);
    }
    let estimate = per_window
        .iter()
        .max_by(|a, b| a.side.total_cmp(&b.side))
        .expect("nonempty")
        .gamma_star;
    Ok(GammaStarEstimate {
        lambda,
        per_window,
        estimate,
        bound: 1.0 / (2.0 * model.tau),
    })
}

/// Search for `gamma > 0` with crossing probability above one half: half the
/// bisected `gamma*`, checked on fresh replicas, halved again on failure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub lambda: f64,
    pub side: f64,
    pub crossing_at_zero: Proportion,
    pub gamma_star: f64,
    /// Candidate `gamma` values tried, with their crossing estimates.
    pub attempts: Vec<(f64, Proportion)>,
    pub gamma: Option<f64>,
}

pub const WITNESS_ATTEMPTS: usize = 3;

pub fn find_gamma_witness(
    model: &ModelSpec,
    lambda: f64,
    side: f64,
    replicas: usize,
    seed: u64,
) -> Result<Witness> {
    let samples = gamma_star_samples(model, lambda, side, replicas, seed, "sinr")?;
    let est = gamma_star_from_samples(&samples, side, model.tau)?;
    let mut w = Witness {
        lambda,
        side,
        crossing_at_zero: est.crossing_at_zero,
        gamma_star: est.gamma_star,
        attempts: Vec::new(),
        gamma: None,
    };
    if est.subcritical_at_zero || !(est.gamma_star > 0.0) {
        return Ok(w);
    }
    let fresh = gamma_star_samples(model, lambda, side, replicas, seed, "witness")?;
    let mut gamma = est.gamma_star / 2.0;
    for _ in 0..WITNESS_ATTEMPTS {
        let cp = frac_above(&fresh, gamma);
        w.attempts.push((gamma, cp));
        if 2 * cp.successes > cp.trials {
            w.gamma = Some(gamma);
            break;
        }
        gamma /= 2.0;
    }
    Ok(w)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem3Row {
    pub multiplier: f64,
    pub lambda: f64,
    pub witness: Witness,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem3Report {
    pub r_b: f64,
    pub lambda_c: LambdaCEstimate,
    pub rows: Vec<Theorem3Row>,
    /// Largest grid intensity whose `G_0` crosses in at most half the replicas.
    pub bracket_lo: Option<f64>,
    /// Smallest grid intensity with a `gamma > 0` witness.
    pub bracket_hi: Option<f64>,
    /// `max(|lo / lambda_c - 1|, |hi / lambda_c - 1|)`, if both ends exist.
    pub bracket_rel_dev: Option<f64>,
}

/// `lambda_SINR` against `lambda_c(r_B)` for Lebesgue measure and constant
/// power `p`.
pub fn theorem3_experiment(
    model: &ModelSpec,
    windows: &[f64],
    multipliers: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<Theorem3Report> {
    model.validate()?;
    if model.measure.kind != MeasureKind::Lebesgue {
        return Err(invalid("measure", "needs the Lebesgue measure"));
    }
    let PowerDistribution::Dirac { p } = model.powers else {
        return Err(invalid("powers", "needs constant (dirac) powers"));
    };
    if model.dim < 2 {
        return Err(Error::UnsupportedDimension { got: model.dim, need: ">= 2" });
    }
    let threshold = model.tau * model.noise / p;
    if !(model.pathloss.at_zero() > threshold) {
        return Err(invalid("powers", "need ell(0) > tau N_o / p"));
    }
    let r_b = model.pathloss.reach(threshold);
    if !r_b.is_finite() {
        return Err(invalid("noise", "r_B is infinite; need N_o > 0"));
    }
    let lambda_c = estimate_lambda_c_gilbert(r_b, model.dim, windows, replicas, seed)?;
    let side = windows.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut rows = Vec::new();
    for &m in multipliers {
        let lambda = m * lambda_c.estimate;
        rows.push(Theorem3Row {
            multiplier: m,
            lambda,
            witness: find_gamma_witness(model, lambda, side, replicas, seed)?,
        });
    }
    let bracket_hi = rows
        .iter()
        .filter(|r| r.witness.gamma.is_some())
        .map(|r| r.lambda)
        .fold(None, |a: Option<f64>, l| Some(a.map_or(l, |a| a.min(l))));
    let bracket_lo = rows
        .iter()
        .filter(|r| 2 * r.witness.crossing_at_zero.successes <= r.witness.crossing_at_zero.trials)
        .filter(|r| bracket_hi.is_none_or(|h| r.lambda < h))
        .map(|r| r.lambda)
        .fold(None, |a: Option<f64>, l| Some(a.map_or(l, |a| a.max(l))));
    let bracket_rel_dev = match (bracket_lo, bracket_hi) {
        (Some(lo), Some(hi)) => {
            let c = lambda_c.estimate;
            Some((lo / c - 1.0).abs().max((hi / c - 1.0).abs()))
        }
        _ => None,
    };
    Ok(Theorem3Report {
        r_b,
        lambda_c,
        rows,
        bracket_lo,
        bracket_hi,
        bracket_rel_dev,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Row {
    pub multiplier: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub side: f64,
    pub crossing: Proportion,
    pub mean_largest_cluster: f64,
    pub largest_cluster_std_err: f64,
    pub max_degree: usize,
    pub cycles: usize,
    pub paths: usize,
}

/// One `(lambda, side)` point at `gamma >= 1/(2 tau)`; a degree above two is
/// an invariant violation.
pub fn theorem2_point(
    model: &ModelSpec,
    multiplier: f64,
    lambda: f64,
    gamma: f64,
    side: f64,
    replicas: usize,
    seed: u64,
) -> Result<Theorem2Row> {
    model.validate()?;
    if gamma < 1.0 / (2.0 * model.tau) {
        return Err(invalid("gamma", "needs gamma >= 1 / (2 tau)"));
    }
    let per: Vec<(bool, usize, usize, usize, usize)> = (0..replicas)
        .into_par_iter()
        .map(|k| {
            let g = model.graph(lambda, gamma, side, replica_seed(seed, "sinr", side, k))?;
            let tags = classify_degree2_components(&g)?;
            let cycles = tags.iter().filter(|t| t.shape == ClusterShape::Cycle).count();
            Ok((
                crossing_exists(&g, CROSSING_AXIS),
                g.largest_cluster(),
                degree_stats(&g).max_degree,
                cycles,
                tags.len() - cycles,
            ))
        })
        .collect::<Result<_>>()?;
    let largest: Vec<f64> = per.iter().map(|p| p.1 as f64).collect();
    Ok(Theorem2Row {
        multiplier,
        lambda,
        gamma,
        side,
        crossing: Proportion::new(per.iter().filter(|p| p.0).count(), replicas),
        mean_largest_cluster: mean(&largest),
        largest_cluster_std_err: mean_std_err(&largest),
        max_degree: per.iter().map(|p| p.2).max().unwrap_or(0),
        cycles: per.iter().map(|p| p.3).sum(),
        paths: per.iter().map(|p| p.4).sum(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Check {
    pub multiplier: f64,
    pub crossing_small: Proportion,
    pub crossing_large: Proportion,
    /// `cp(L_max) <= cp(L_min) + 2 sqrt(se_1^2 + se_2^2)`.
    pub crossing_not_increasing: bool,
    pub largest_cluster_ratio: f64,
    pub side_ratio: f64,
    /// Ratio of mean largest-cluster sizes below the side ratio.
    pub sublinear: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Report {
    pub gamma: f64,
    pub lambda_ref: f64,
    pub rows: Vec<Theorem2Row>,
    pub checks: Vec<Theorem2Check>,
    pub max_degree: usize,
}

pub fn theorem2_checks(rows: &[Theorem2Row]) -> Vec<Theorem2Check> {
    let mut mults: Vec<f64> = rows.iter().map(|r| r.multiplier).collect();
    mults.sort_by(f64::total_cmp);
    mults.dedup();
    mults
        .into_iter()
        .filter_map(|m| {
            let mut rs: Vec<&Theorem2Row> = rows.iter().filter(|r| r.multiplier == m).collect();
            rs.sort_by(|a, b| a.side.total_cmp(&b.side));
            let (s, l) = (rs.first()?, rs.last()?);
            let se = combined_std_err(s.crossing.std_err, l.crossing.std_err);
            let ratio = if s.mean_largest_cluster > 0.0 {
                l.mean_largest_cluster / s.mean_largest_cluster
            } else {
                f64::INFINITY
            };
            let side_ratio = l.side / s.side;
            Some(Theorem2Check {
                multiplier: m,
                crossing_small: s.crossing,
                crossing_large: l.crossing,
                crossing_not_increasing: l.crossing.estimate <= s.crossing.estimate + 2.0 * se,
                largest_cluster_ratio: ratio,
                side_ratio,
                sublinear: ratio < side_ratio,
            })
        })
        .collect()
}

/// Non-percolation evidence at `gamma = 1/(2 tau)` over a `lambda` grid
/// (multiples of `lambda_ref`) and window sides.
pub fn theorem2_experiment(
    model: &ModelSpec,
    lambda_ref: f64,
    multipliers: &[f64],
    windows: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<Theorem2Report> {
    let gamma = 1.0 / (2.0 * model.tau);
    let mut rows = Vec::new();
    for &m in multipliers {
        for &side in windows {
            rows.push(theorem2_point(model, m, m * lambda_ref, gamma, side, replicas, seed)?);
        }
    }
    let checks = theorem2_checks(&rows);
    Ok(Theorem2Report {
        gamma,
        lambda_ref,
        max_degree: rows.iter().map(|r| r.max_degree).max().unwrap_or(0),
        rows,
        checks,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub name: String,
    /// `None` when the condition cannot be decided from the inputs.
    pub holds: Option<bool>,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteFrequencies {
    pub n: usize,
    pub r: f64,
    pub m_cap: f64,
    pub sites: usize,
    pub good: f64,
    pub tame: f64,
    pub nice: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Report {
    pub conditions: Vec<ConditionCheck>,
    pub assumption_violations: Vec<String>,
    pub side: f64,
    /// Crossing at `gamma = 0` for each intensity tried.
    pub lambda_trail: Vec<(f64, Proportion)>,
    pub witness: Option<Witness>,
    pub diagnostics: Option<SiteFrequencies>,
}

impl Theorem1Report {
    pub fn found(&self) -> bool {
        self.witness.as_ref().is_some_and(|w| w.gamma.is_some())
    }
}

fn theorem1_conditions(model: &ModelSpec) -> (Vec<ConditionCheck>, Vec<String>) {
    let bounded = model.pathloss.support_sup().is_some();
    let powers = &model.powers;
    let finite_mean = powers.mean().is_finite();
    let exp_moments = !powers.heavy_tailed();
    let b_dependent = model.measure.kind.dependence_range().is_some();
    let connected = match model.measure.kind {
        MeasureKind::Lebesgue | MeasureKind::VoronoiEdge { .. } => Some(true),
        MeasureKind::Modulated { lambda_in, lambda_out, .. } => {
            if lambda_in > 0.0 && lambda_out > 0.0 {
                Some(true)
            } else {
                None
            }
        }
        MeasureKind::ShotNoise { .. } => None,
    };
    let mut violations = Vec::new();
    if model.dim < 2 {
        violations.push(format!("dimension {} < 2", model.dim));
    }
    if !(model.noise > 0.0) {
        violations.push("noise must be positive".into());
    }
    if powers.esssup().is_finite() {
        violations.push(format!("powers are bounded ({}); the theorem needs unbounded powers", powers.describe()));
    }
    if !finite_mean {
        violations.push(format!("powers have infinite mean ({})", powers.describe()));
    }
    if powers.heavy_tailed() {
        violations.push(format!("powers lack exponential moments ({})", powers.describe()));
    }
    let conditions = vec![
        ConditionCheck {
            name: "unbounded-support".into(),
            holds: Some(!bounded && b_dependent && exp_moments),
            note: "unbounded-support path loss, b-dependent measure, exponential moments of Lambda(Q_1) and P_o".into(),
        },
        ConditionCheck {
            name: "connected-support".into(),
            holds: if bounded && finite_mean { connected } else { Some(false) },
            note: "bounded-support path loss, finite mean power, asymptotically essentially connected measure".into(),
        },
        ConditionCheck {
            name: "large-support".into(),
            holds: if bounded && finite_mean { None } else { Some(false) },
            note: "bounded-support path loss with support above a non-explicit constant".into(),
        },
    ];
    (conditions, violations)
}

/// `int ell_a(|y|) dy` over `R^d`: the mean shifted shot noise of a
/// unit-intensity, unit-power process.
pub fn shifted_mass(model: &PathLoss, a: f64) -> f64 {
    let d = model.dim() as i32;
    let s = a * (model.dim() as f64).sqrt() / 2.0;
    let core = unit_ball_volume(model.dim()) * s.powi(d) * model.at_zero();
    // int_0^inf (t + s)^{d-1} ell(t) dt, on [0, d_o] and then in log scale
    let f = |t: f64| (t + s).powi(d - 1) * model.eval(t);
    let d_o = model.plateau_end().max(1e-9);
    let simpson = |g: &dyn Fn(f64) -> f64, lo: f64, hi: f64, k: usize| {
        let h = (hi - lo) / k as f64;
        let mut acc = g(lo) + g(hi);
        for i in 1..k {
            acc += g(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    };
    let upper = model.support_sup().unwrap_or(1e6 * d_o);
    let near = simpson(&f, 0.0, d_o, 64);
    let far = if upper > d_o {
        simpson(&|u: f64| { let t = d_o * u.exp(); f(t) * t }, 0.0, (upper / d_o).ln(), 4000)
    } else {
        0.0
    };
    core + crate::pathloss::unit_sphere_area(model.dim()) * (near + far)
}

/// Good/tame/nice frequencies of the Boolean-model sites at radius `r` on a
/// few replicas, as explanatory output.
pub fn site_frequencies(
    model: &ModelSpec,
    lambda: f64,
    side: f64,
    replicas: usize,
    seed: u64,
) -> Result<SiteFrequencies> {
    let r = model.scale();
    let n = (4.0 * r).ceil().max(1.0) as usize;
    let nf = n as f64;
    let m_cap = 2.0 * lambda * model.powers.mean() * shifted_mass(&model.pathloss, 7.0 * nf);
    let params = RenormParams {
        n,
        r,
        r_o: 2.0 * r,
        m_cap,
    };
    let extent = (((side - nf) / 2.0) / nf).floor().max(0.0) as i64;
    let width = (2 * extent + 1) as usize;
    let per: Vec<(usize, usize, usize, usize)> = (0..replicas)
        .into_par_iter()
        .map(|k| {
            let cfg = model.sample(lambda, side, 2.5 * nf, replica_seed(seed, "sites", side, k))?;
            let (mut good, mut tame, mut nice) = (0, 0, 0);
            for idx in 0..width * width {
                let z = [(idx % width) as i64 - extent, (idx / width) as i64 - extent];
                let z = &z[..model.dim.min(2)];
                let g = boolean_good_site(z, n, &cfg, r)?;
                let t = tame_site(z, &params, &cfg, &model.pathloss, TameVariant::Seven)?;
                good += g as usize;
                tame += t as usize;
                nice += (g && t) as usize;
            }
            Ok((width * width, good, tame, nice))
        })
        .collect::<Result<_>>()?;
    let sites: usize = per.iter().map(|p| p.0).sum();
    let f = |s: usize| if sites > 0 { s as f64 / sites as f64 } else { 0.0 };
    Ok(SiteFrequencies {
        n,
        r,
        m_cap,
        sites,
        good: f(per.iter().map(|p| p.1).sum()),
        tame: f(per.iter().map(|p| p.2).sum()),
        nice: f(per.iter().map(|p| p.3).sum()),
    })
}

pub const THEOREM1_MAX_DOUBLINGS: usize = 6;
/// The intensity search stops once `G_0` crosses in this fraction of replicas.
pub const THEOREM1_TARGET: f64 = 0.9;

/// Searches for `(lambda, gamma > 0)` with crossing probability above one
/// half: doubles `lambda` from `lambda_start` until `G_0` crosses in at least
/// `THEOREM1_TARGET` of the replicas, then looks for a `gamma` witness.
pub fn theorem1_experiment(
    model: &ModelSpec,
    side: f64,
    lambda_start: Option<f64>,
    replicas: usize,
    seed: u64,
) -> Result<Theorem1Report> {
    model.validate()?;
    let (conditions, assumption_violations) = theorem1_conditions(model);
    let r = model.scale();
    let mut lambda = lambda_start.unwrap_or(2.0 / (unit_ball_volume(model.dim) * r.powi(model.dim as i32)));
    let mut lambda_trail = Vec::new();
    for step in 0..=THEOREM1_MAX_DOUBLINGS {
        if step > 0 {
            lambda *= 2.0;
        }
        let samples = gamma_star_samples(model, lambda, side, replicas, seed, "sinr")?;
        let cp = frac_above(&samples, 0.0);
        lambda_trail.push((lambda, cp));
        if cp.estimate >= THEOREM1_TARGET {
            break;
        }
    }
    let supercritical = lambda_trail.last().is_some_and(|(_, cp)| 2 * cp.successes > cp.trials);
    let witness = if supercritical {
        Some(find_gamma_witness(model, lambda, side, replicas, seed)?)
    } else {
        None
    };
    let diagnostics = if model.dim == 2 {
        Some(site_frequencies(model, lambda, side, replicas.min(10), seed)?)
    } else {
        None
    };
    Ok(Theorem1Report {
        conditions,
        assumption_violations,
        side,
        lambda_trail,
        witness,
        diagnostics,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoScan {
    /// `(rho, witness found)` in increasing `rho`.
    pub results: Vec<(f64, bool)>,
    /// Smallest support radius with a witness.
    pub smallest_rho: Option<f64>,
}

/// For bounded-cone path loss: repeats [`theorem1_experiment`] with the
/// support radius replaced by each entry of `rhos`, stopping at the first
/// witness.
pub fn theorem1_rho_scan(
    model: &ModelSpec,
    side: f64,
    rhos: &[f64],
    lambda_start: Option<f64>,
    replicas: usize,
    seed: u64,
) -> Result<RhoScan> {
    let PathLossKind::BoundedCone { d_o, ell0, .. } = *model.pathloss.kind() else {
        return Err(invalid("pathloss", "the support scan needs bounded-cone path loss"));
    };
    let mut rhos = rhos.to_vec();
    rhos.sort_by(f64::total_cmp);
    let mut results = Vec::new();
    let mut smallest_rho = None;
    for rho in rhos {
        let m = ModelSpec {
            pathloss: PathLoss::cone(d_o, rho, ell0, model.dim)?,
            ..model.clone()
        };
        let found = theorem1_experiment(&m, side, lambda_start, replicas, seed)?.found();
        results.push((rho, found));
        if found {
            smallest_rho = Some(rho);
            break;
        }
    }
    Ok(RhoScan { results, smallest_rho })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeRow {
    pub lambda: f64,
    pub tau: f64,
    pub gamma: f64,
    /// `1 + 1 / (tau gamma)`; degrees must stay strictly below.
    pub bound: f64,
    pub max_degree: usize,
    pub violations: usize,
    pub histogram: Vec<usize>,
    pub replicas: usize,
}

/// Degree histogram over replicas with the a-priori bound.
pub fn degree_sweep_point(
    model: &ModelSpec,
    lambda: f64,
    gamma: f64,
    side: f64,
    replicas: usize,
    seed: u64,
) -> Result<DegreeRow> {
    model.validate()?;
    let bound = if gamma > 0.0 {
        1.0 + 1.0 / (model.tau * gamma)
    } else {
        f64::INFINITY
    };
    let per: Vec<Vec<usize>> = (0..replicas)
        .into_par_iter()
        .map(|k| {
            let g = model.graph(lambda, gamma, side, replica_seed(seed, "sinr", side, k))?;
            Ok(degree_stats(&g).histogram)
        })
        .collect::<Result<_>>()?;
    let mut histogram = Vec::new();
    let mut violations = 0;
    for h in &per {
        if histogram.len() < h.len() {
            histogram.resize(h.len(), 0);
        }
        for (d, &c) in h.iter().enumerate() {
            histogram[d] += c;
        }
        if h.len() > 0 && (h.len() - 1) as f64 >= bound {
            violations += 1;
        }
    }
    Ok(DegreeRow {
        lambda,
        tau: model.tau,
        gamma,
        bound,
        max_degree: histogram.len().saturating_sub(1),
        violations,
        histogram,
        replicas,
    })
}
