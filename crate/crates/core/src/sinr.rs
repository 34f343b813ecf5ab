//! Interference, SINR values and graph construction (SINR, thinned SINR, Gilbert).
//!
//! All builders evaluate interference on every point of the configuration
//! (the buffered window) and report edges only between observation-window
//! points. Candidate pairs are pruned with the noise-only reach
//! `r_i = ell^{-1}(tau N_o / P_i)`: no edge can be longer than `min(r_i, r_j)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{dist2, CellGrid, Cube};
use crate::graph::GraphResult;
use crate::pathloss::{unit_sphere_area, PathLoss};
use crate::pointproc::MarkedConfiguration;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinrParams {
    pub tau: f64,
    #[serde(rename = "noise")]
    pub noise: f64,
    #[serde(default)]
    pub gamma: f64,
}

impl SinrParams {
    pub fn new(tau: f64, noise: f64, gamma: f64) -> Result<Self> {
        let p = Self { tau, noise, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(invalid("tau", format!("must be positive, got {}", self.tau)));
        }
        if !(self.noise >= 0.0) || !self.noise.is_finite() {
            return Err(invalid("noise", format!("must be >= 0, got {}", self.noise)));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(invalid("gamma", format!("must be >= 0, got {}", self.gamma)));
        }
        Ok(())
    }

    pub fn with_gamma(self, gamma: f64) -> Self {
        Self { gamma, ..self }
    }

    /// Gilbert radius `ell^{-1}(tau N_o / p)` of a transmitter with power `p`.
    pub fn radius(&self, model: &PathLoss, p: f64) -> f64 {
        model.reach(self.tau * self.noise / p)
    }
}

/// Which transmitters contribute to the interference at a receiver.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterferenceRange {
    /// Every point of the configuration.
    Unlimited,
    /// Points within this distance of the receiver.
    Cutoff(f64),
}

impl InterferenceRange {
    fn radius(&self) -> f64 {
        match *self {
            Self::Unlimited => f64::INFINITY,
            Self::Cutoff(r) => r,
        }
    }
}

/// Upper bound on the expected interference from beyond `cutoff` for a
/// stationary process of mean density `density` and mean power `mean_power`.
pub fn interference_tail_bound(model: &PathLoss, density: f64, mean_power: f64, cutoff: f64) -> f64 {
    density * mean_power * unit_sphere_area(model.dim()) * model.tail_integral(cutoff)
}

/// `sum_{k not in exclude} P_k ell_a(|X_k - target|)`.
pub fn interference_at(
    config: &MarkedConfiguration,
    target: &[f64],
    exclude: &[usize],
    model: &PathLoss,
    shift: f64,
) -> Result<f64> {
    if target.len() != config.dim() {
        return Err(invalid("target", "dimension mismatch"));
    }
    if !(shift >= 0.0) {
        return Err(invalid("shift", format!("must be >= 0, got {shift}")));
    }
    if let Some(&bad) = exclude.iter().find(|&&k| k >= config.len()) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            len: config.len(),
        });
    }
    if config.is_empty() {
        return Ok(0.0);
    }
    let powers = config.powers()?;
    Ok((0..config.len())
        .filter(|k| !exclude.contains(k))
        .map(|k| {
            let d = dist2(config.point(k), target).sqrt();
            powers[k] * model.shifted(shift, d)
        })
        .sum())
}

/// `P_i ell(|X_i - X_j|) / (N_o + gamma I(X_i, X_j))`.
///
/// A zero denominator (only possible for `N_o = 0`) yields `+inf` when the
/// numerator is positive and `0` otherwise, so the edge is decided by the
/// numerator alone.
pub fn sinr_value(
    config: &MarkedConfiguration,
    i: usize,
    j: usize,
    params: &SinrParams,
    model: &PathLoss,
) -> Result<f64> {
    if i == j {
        return Err(Error::SelfPair(i));
    }
    let n = config.len();
    for k in [i, j] {
        if k >= n {
            return Err(Error::IndexOutOfRange { index: k, len: n });
        }
    }
    let num = config.power(i)? * model.eval_sq(dist2(config.point(i), config.point(j)));
    let interference = interference_at(config, config.point(j), &[i, j], model, 0.0)?;
    Ok(ratio(num, params.noise + params.gamma * interference))
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Per-point Gilbert radii `ell^{-1}(tau N_o / P_i)`.
pub fn sinr_radii(config: &MarkedConfiguration, params: &SinrParams, model: &PathLoss) -> Result<Vec<f64>> {
    Ok(config
        .powers()?
        .iter()
        .map(|&p| params.radius(model, p))
        .collect())
}

/// Indices of the observation-window points.
fn observation_indices(config: &MarkedConfiguration) -> Vec<usize> {
    let obs = config.window().observation();
    let tol = 1e-12 * obs.side.max(1.0);
    (0..config.len())
        .filter(|&i| obs.contains_tol(config.point(i), tol))
        .collect()
}

/// Total received power `sum_{k != j} P_k ell(|X_k - X_j|)` at each receiver
/// in `receivers`, restricted to `range`.
fn total_interference(
    config: &MarkedConfiguration,
    receivers: &[usize],
    model: &PathLoss,
    range: InterferenceRange,
) -> Result<Vec<f64>> {
    let powers = config.powers()?;
    let dim = config.dim();
    let r = range.radius().min(model.support_sup().unwrap_or(f64::INFINITY));
    if r.is_finite() {
        let bounds = config.window().buffered();
        let grid = CellGrid::build(config.coords(), dim, &bounds, r / 2.0);
        let r2 = r * r;
        Ok(receivers
            .par_iter()
            .map(|&j| {
                let x = config.point(j);
                let mut s = 0.0;
                grid.for_each_candidate(x, r, |k| {
                    if k != j {
                        let d2 = dist2(config.point(k), x);
                        if d2 < r2 {
                            s += powers[k] * model.eval_sq(d2);
                        }
                    }
                });
                s
            })
            .collect())
    } else {
        Ok(receivers
            .par_iter()
            .map(|&j| {
                let x = config.point(j);
                (0..config.len())
                    .filter(|&k| k != j)
                    .map(|k| powers[k] * model.eval_sq(dist2(config.point(k), x)))
                    .sum()
            })
            .collect())
    }
}

/// Unordered vertex pairs `(a, b)`, `a < b`, at distance below `reach(a, b)`.
/// `query[a]` must bound `reach(a, b)` for every `b`.
fn candidate_pairs(
    config: &MarkedConfiguration,
    vertices: &[usize],
    query: &[f64],
    reach: impl Fn(usize, usize) -> f64 + Sync,
) -> Vec<(usize, usize, f64)> {
    let dim = config.dim();
    let n = vertices.len();
    if n < 2 {
        return Vec::new();
    }
    let coords: Vec<f64> = vertices
        .iter()
        .flat_map(|&v| config.point(v).iter().copied())
        .collect();
    let at = |a: usize| &coords[a * dim..(a + 1) * dim];
    let finite: Vec<f64> = query.iter().copied().filter(|r| r.is_finite()).collect();
    let per_vertex: Vec<Vec<(usize, usize, f64)>> = if finite.len() == n {
        let mut sorted = finite;
        sorted.sort_by(f64::total_cmp);
        let cell = sorted[n / 2].max(1e-9);
        let bounds: Cube = config.window().buffered();
        let grid = CellGrid::build(&coords, dim, &bounds, cell);
        (0..n)
            .into_par_iter()
            .map(|a| {
                let mut out = Vec::new();
                grid.for_each_candidate(at(a), query[a], |b| {
                    if b > a {
                        let d2 = dist2(at(a), at(b));
                        let r = reach(a, b);
                        if d2 < r * r {
                            out.push((a, b, d2));
                        }
                    }
                });
                out.sort_by_key(|e| e.1);
                out
            })
            .collect()
    } else {
        (0..n)
            .into_par_iter()
            .map(|a| {
                (a + 1..n)
                    .filter_map(|b| {
                        let d2 = dist2(at(a), at(b));
                        let r = reach(a, b);
                        (d2 < r * r).then_some((a, b, d2))
                    })
                    .collect()
            })
            .collect()
    };
    per_vertex.into_iter().flatten().collect()
}

/// Slack for the candidate prefilter so that rounding in `ell^{-1}` never
/// drops a pair that the exact test accepts.
const REACH_SLACK: f64 = 1.0 + 1e-9;

fn touch_distance(config: &MarkedConfiguration, params: &SinrParams, model: &PathLoss, edges_max: f64) -> f64 {
    let r = config
        .mean_power()
        .map(|p| params.radius(model, p))
        .unwrap_or(0.0);
    if r.is_finite() && r > 0.0 {
        r
    } else {
        edges_max
    }
}

/// `G_gamma`: edge iff both directed SINR values exceed `tau`, interference
/// from every point of the configuration.
pub fn build_sinr_graph(config: &MarkedConfiguration, params: &SinrParams, model: &PathLoss) -> Result<GraphResult> {
    build_sinr_graph_with(config, params, model, InterferenceRange::Unlimited)
}

pub fn build_sinr_graph_with(
    config: &MarkedConfiguration,
    params: &SinrParams,
    model: &PathLoss,
    range: InterferenceRange,
) -> Result<GraphResult> {
    let profile = gamma_profile(config, params, model, range)?;
    Ok(profile.graph_at(params.gamma))
}

/// Edges of `G_0` together with the largest `gamma` each survives:
/// the edge is present in `G_gamma` iff `gamma < threshold`.
#[derive(Clone, Debug)]
pub struct GammaProfile {
    base: GraphResult,
    thresholds: Vec<f64>,
}

impl GammaProfile {
    /// The graph at `gamma = 0`.
    pub fn base(&self) -> &GraphResult {
        &self.base
    }

    /// Aligned with `base().edges()`.
    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn graph_at(&self, gamma: f64) -> GraphResult {
        let edges = self
            .base
            .edges()
            .iter()
            .zip(&self.thresholds)
            .filter(|(_, &t)| gamma < t)
            .map(|(&e, _)| e)
            .collect();
        GraphResult::new(
            (0..self.base.vertex_count())
                .flat_map(|v| self.base.position(v).iter().copied())
                .collect(),
            self.base.origin().to_vec(),
            edges,
            self.base.window().clone(),
            self.base.touch_distance(),
        )
        .expect("edges come from a valid graph")
    }
}

/// `(P_i ell(d) - tau N_o) / (tau I)`: the supremum of `gamma` for which the
/// directed condition `P_i ell(d) > tau (N_o + gamma I)` holds.
fn directed_threshold(num: f64, tau: f64, noise: f64, interference: f64) -> f64 {
    let excess = num - tau * noise;
    if interference > 0.0 {
        excess / (tau * interference)
    } else if excess > 0.0 {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    }
}

/// Per-edge `gamma` thresholds; `params.gamma` is ignored.
pub fn gamma_profile(
    config: &MarkedConfiguration,
    params: &SinrParams,
    model: &PathLoss,
    range: InterferenceRange,
) -> Result<GammaProfile> {
    params.validate()?;
    let powers = config.powers()?;
    let vertices = observation_indices(config);
    let radii: Vec<f64> = vertices
        .iter()
        .map(|&v| params.radius(model, powers[v]) * REACH_SLACK)
        .collect();
    let pairs = candidate_pairs(config, &vertices, &radii, |a, b| radii[a].min(radii[b]));
    let totals = total_interference(config, &vertices, model, range)?;

    let mut edges = Vec::new();
    let mut thresholds = Vec::new();
    let mut longest: f64 = 0.0;
    for (a, b, d2) in pairs {
        let (i, j) = (vertices[a], vertices[b]);
        let l = model.eval_sq(d2);
        let (si, sj) = (powers[i] * l, powers[j] * l);
        // interference at j excluding i (and j itself), and vice versa
        let at_j = (totals[b] - si).max(0.0);
        let at_i = (totals[a] - sj).max(0.0);
        let t = directed_threshold(si, params.tau, params.noise, at_j)
            .min(directed_threshold(sj, params.tau, params.noise, at_i));
        if t > 0.0 {
            edges.push((a, b));
            thresholds.push(t);
            longest = longest.max(d2.sqrt());
        }
    }
    let touch = touch_distance(config, params, model, longest);
    // pairs arrive sorted by (a, b), so thresholds stay aligned with the
    // normalized edge list
    let base = GraphResult::on_config(config, vertices, edges, touch)?;
    Ok(GammaProfile { base, thresholds })
}

/// Thinned SINR graph: vertices with `P_i >= p = tau N_o / ell(r_o)`, numerator
/// power replaced by `p`, denominator keeping the true powers of all points.
pub fn build_minus_graph(
    config: &MarkedConfiguration,
    params: &SinrParams,
    model: &PathLoss,
    r_o: f64,
) -> Result<GraphResult> {
    build_minus_graph_with(config, params, model, r_o, InterferenceRange::Unlimited)
}

pub fn build_minus_graph_with(
    config: &MarkedConfiguration,
    params: &SinrParams,
    model: &PathLoss,
    r_o: f64,
    range: InterferenceRange,
) -> Result<GraphResult> {
    params.validate()?;
    let l_ro = minus_radius_check(model, r_o)?;
    let p = params.tau * params.noise / l_ro;
    let powers = config.powers()?;
    let vertices: Vec<usize> = observation_indices(config)
        .into_iter()
        .filter(|&v| powers[v] >= p)
        .collect();
    let query = vec![r_o * REACH_SLACK; vertices.len()];
    let pairs = candidate_pairs(config, &vertices, &query, |_, _| r_o * REACH_SLACK);
    let totals = total_interference(config, &vertices, model, range)?;
    let mut edges = Vec::new();
    for (a, b, d2) in pairs {
        let (i, j) = (vertices[a], vertices[b]);
        let l = model.eval_sq(d2);
        let num = p * l;
        let at_j = (totals[b] - powers[i] * l).max(0.0);
        let at_i = (totals[a] - powers[j] * l).max(0.0);
        let t = directed_threshold(num, params.tau, params.noise, at_j)
            .min(directed_threshold(num, params.tau, params.noise, at_i));
        if params.gamma < t {
            edges.push((a, b));
        }
    }
    GraphResult::on_config(config, vertices, edges, r_o)
}

/// `ell(r_o)`, after checking that `r_o` lies on the strictly decreasing branch.
fn minus_radius_check(model: &PathLoss, r_o: f64) -> Result<f64> {
    if !(r_o > model.plateau_end()) || !r_o.is_finite() {
        return Err(invalid(
            "r_o",
            format!("must exceed d_o = {}, got {r_o}", model.plateau_end()),
        ));
    }
    let l = model.eval(r_o);
    if !(l > 0.0) {
        return Err(invalid("r_o", format!("{r_o} lies outside the support of ell")));
    }
    Ok(l)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RadiusRule {
    /// `|x_i - x_j| < min(r_i, r_j)`: the two-sided SINR rule at `gamma = 0`.
    Min,
    /// `|x_i - x_j| < r_i + r_j`: overlapping balls of a Boolean model.
    Sum,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Radii {
    Constant(f64),
    /// One radius per configuration point; zero isolates a point and
    /// `+inf` connects it to every point within the partner's radius.
    PerPoint(Vec<f64>, RadiusRule),
}

/// Gilbert graph on the observation-window points of `config`.
pub fn build_gilbert_graph(config: &MarkedConfiguration, radii: &Radii) -> Result<GraphResult> {
    let vertices = observation_indices(config);
    match radii {
        Radii::Constant(r) => {
            if !(*r > 0.0) {
                return Err(invalid("radius", format!("must be positive, got {r}")));
            }
            let query = vec![*r; vertices.len()];
            let edges = candidate_pairs(config, &vertices, &query, |_, _| *r)
                .into_iter()
                .map(|(a, b, _)| (a, b))
                .collect();
            GraphResult::on_config(config, vertices, edges, *r)
        }
        Radii::PerPoint(rs, rule) => {
            if rs.len() != config.len() {
                return Err(invalid("radii", "one radius per point required"));
            }
            if let Some(r) = rs.iter().find(|r| !(**r >= 0.0)) {
                return Err(invalid("radii", format!("must be >= 0, got {r}")));
            }
            let local: Vec<f64> = vertices.iter().map(|&v| rs[v]).collect();
            let rmax = local.iter().copied().fold(0.0, f64::max);
            let edges: Vec<(usize, usize)> = match rule {
                RadiusRule::Min => candidate_pairs(config, &vertices, &local, |a, b| {
                    local[a].min(local[b])
                }),
                RadiusRule::Sum => {
                    let query: Vec<f64> = local.iter().map(|r| r + rmax).collect();
                    candidate_pairs(config, &vertices, &query, |a, b| local[a] + local[b])
                }
            }
            .into_iter()
            .map(|(a, b, _)| (a, b))
            .collect();
            let touch = if local.is_empty() {
                0.0
            } else {
                local.iter().sum::<f64>() / local.len() as f64
            };
            GraphResult::on_config(config, vertices, edges, touch)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Window;

    fn three_points() -> (MarkedConfiguration, PathLoss, SinrParams) {
        let w = Window::centered(2, 20.0, 0.0).unwrap();
        let cfg = MarkedConfiguration::from_points(
            &[vec![0.0, 0.0], vec![1.0, 0.0], vec![3.0, 0.0]],
            Some(vec![1.0; 3]),
            w,
        );
        // three collinear points at distances 1, 2, 3 are nonequidistant
        let cfg = cfg.unwrap();
        let l = PathLoss::power_law(1.0, 4.0, 2).unwrap();
        (cfg, l, SinrParams::new(0.5, 0.1, 0.1).unwrap())
    }

    #[test]
    fn sinr_values_by_hand() {
        let (cfg, l, p) = three_points();
        let v = |i, j| sinr_value(&cfg, i, j, &p, &l).unwrap();
        assert!((v(0, 1) - 1.0 / 0.10625).abs() < 1e-12);
        assert!((v(1, 0) - 1.0 / (0.1 + 0.1 / 81.0)).abs() < 1e-12);
        assert!((v(1, 2) - 0.0625 / (0.1 + 0.1 / 81.0)).abs() < 1e-12);
        assert!((v(2, 1) - 0.3125).abs() < 1e-12);
        assert!((v(0, 1) - 9.41176).abs() < 1e-5);
        assert!((v(1, 0) - 9.87805).abs() < 1e-5);
        assert!((v(1, 2) - 0.61737).abs() < 1e-5);
        assert_eq!(sinr_value(&cfg, 1, 1, &p, &l), Err(Error::SelfPair(1)));
    }

    #[test]
    fn interference_sum() {
        let w = Window::centered(2, 20.0, 0.0).unwrap();
        let l = PathLoss::power_law(1.0, 4.0, 2).unwrap();
        let cfg = MarkedConfiguration::from_points(
            &[vec![1.0, 0.0], vec![3.0, 0.0]],
            Some(vec![1.0, 1.0]),
            w.clone(),
        )
        .unwrap();
        let i = interference_at(&cfg, &[0.0, 0.0], &[], &l, 0.0).unwrap();
        assert!((i - (1.0 + 1.0 / 81.0)).abs() < 1e-12);
        assert!((i - 1.0123457).abs() < 1e-7);
        let empty = MarkedConfiguration::empty(w);
        assert_eq!(interference_at(&empty, &[0.0, 0.0], &[], &l, 0.0).unwrap(), 0.0);
        assert!(interference_at(&cfg, &[0.0, 0.0], &[5], &l, 0.0).is_err());
    }

    #[test]
    fn three_point_graph() {
        let (cfg, l, p) = three_points();
        let g = build_sinr_graph(&cfg, &p, &l).unwrap();
        assert_eq!(g.source_edges(), vec![(0, 1)]);
    }

    #[test]
    fn zero_noise_zero_gamma_is_infinite() {
        let (cfg, l, _) = three_points();
        let p = SinrParams::new(0.5, 0.0, 0.0).unwrap();
        assert_eq!(sinr_value(&cfg, 0, 2, &p, &l).unwrap(), f64::INFINITY);
        let g = build_sinr_graph(&cfg, &p, &l).unwrap();
        assert_eq!(g.source_edges(), vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn gilbert_examples() {
        let w = Window::centered(2, 10.0, 0.0).unwrap();
        let cfg =
            MarkedConfiguration::from_points(&[vec![0.0, 0.0], vec![1.0, 0.0]], None, w).unwrap();
        let g = build_gilbert_graph(&cfg, &Radii::Constant(2.0)).unwrap();
        assert_eq!(g.edges(), &[(0, 1)]);
        let g = build_gilbert_graph(&cfg, &Radii::Constant(0.5)).unwrap();
        assert!(g.edges().is_empty());
        let g = build_gilbert_graph(&cfg, &Radii::PerPoint(vec![0.6, 5.0], RadiusRule::Min)).unwrap();
        assert!(g.edges().is_empty());
        let g = build_gilbert_graph(&cfg, &Radii::PerPoint(vec![0.6, 0.5], RadiusRule::Sum)).unwrap();
        assert_eq!(g.edges(), &[(0, 1)]);
    }

    #[test]
    fn minus_graph_rejects_plateau_radius() {
        let (cfg, l, p) = three_points();
        assert!(build_minus_graph(&cfg, &p, &l, 1.0).is_err());
        assert!(build_minus_graph(&cfg, &p, &l, 0.5).is_err());
        // p = tau N_o / ell(2) = 0.8 <= 1: every point survives the thinning
        let g = build_minus_graph(&cfg, &p, &l, 2.0).unwrap();
        assert_eq!(g.vertex_count(), 3);
    }

    #[test]
    fn gamma_profile_matches_direct_builds() {
        let (cfg, l, p) = three_points();
        let prof = gamma_profile(&cfg, &p, &l, InterferenceRange::Unlimited).unwrap();
        for gamma in [0.0, 0.05, 0.1, 1.0, 5.0, 50.0] {
            let direct = build_sinr_graph(&cfg, &p.with_gamma(gamma), &l).unwrap();
            assert_eq!(prof.graph_at(gamma).edges(), direct.edges());
        }
    }
}
