//! Renormalization diagnostics: good and tame sites, the in/out interference
//! split, `gamma'`, and nice-site lattice scans with an edge-preservation check.
//!
//! Two site constructions are supported. The thinned one works on the
//! power-thinned configuration with block side `rn`; the Boolean one works on
//! the full configuration with block side `n`. In both, a block "core" is the
//! cube of one block side around the site centre.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{dist2, CellGrid, Cube};
use crate::graph::UnionFind;
use crate::pathloss::PathLoss;
use crate::pointproc::{MarkedConfiguration, PowerDistribution};
use crate::sinr::{sinr_value, SinrParams};

/// Default `varrho' / varrho` for the coupled parameter helper.
pub const DEFAULT_RHO_RATIO: f64 = 0.8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenormParams {
    /// Block scale, at least 1.
    pub n: usize,
    /// Gilbert connection radius.
    pub r: f64,
    /// Thinning radius, `r < r_o`.
    pub r_o: f64,
    /// Interference cap.
    pub m_cap: f64,
}

impl RenormParams {
    pub fn validate(&self, model: &PathLoss) -> Result<()> {
        if self.n < 1 {
            return Err(invalid("n", "must be at least 1"));
        }
        let d_o = model.plateau_end();
        if !(self.r > d_o) || !(self.r_o > self.r) {
            return Err(invalid(
                "r",
                format!("need d_o = {d_o} < r = {} < r_o = {}", self.r, self.r_o),
            ));
        }
        if let Some(rho) = model.support_sup() {
            if self.r_o > rho {
                return Err(invalid("r_o", format!("exceeds the support supremum {rho}")));
            }
        }
        if !(self.m_cap > 0.0) {
            return Err(invalid("m_cap", format!("must be positive, got {}", self.m_cap)));
        }
        Ok(())
    }

    /// Thinned block side `rn`.
    pub fn block(&self) -> f64 {
        self.r * self.n as f64
    }

    /// Power threshold `p = tau N_o / ell(r_o)`.
    pub fn power_threshold(&self, sinr: &SinrParams, model: &PathLoss) -> f64 {
        sinr.tau * sinr.noise / model.eval(self.r_o)
    }
}

/// Parameters coupled so that the thinned process at radius `r` has the
/// scale-free intensity `varrho' r^{-d}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoupledParams {
    pub r: f64,
    pub r_o: f64,
    /// `tau N_o / ell(r_o)`.
    pub p: f64,
    /// Survival probability `P(P_o >= p)`.
    pub survival: f64,
    pub lambda: f64,
}

/// `r_o = r (varrho / varrho')^{1/d}`, `lambda = varrho' r^{-d} / P(P_o >= p)`.
pub fn coupled_parameters(
    rho: f64,
    rho_prime: f64,
    r: f64,
    sinr: &SinrParams,
    model: &PathLoss,
    powers: &PowerDistribution,
) -> Result<CoupledParams> {
    if !(rho > 0.0) || !(rho_prime > 0.0) || !(rho_prime < rho) {
        return Err(invalid(
            "rho_prime",
            format!("need 0 < rho' < rho, got rho = {rho}, rho' = {rho_prime}"),
        ));
    }
    let d = model.dim() as f64;
    let r_o = r * (rho / rho_prime).powf(1.0 / d);
    let l = model.eval(r_o);
    if !(r > model.plateau_end()) || !(l > 0.0) {
        return Err(invalid("r", "r and r_o must lie on the decreasing branch of ell"));
    }
    let p = sinr.tau * sinr.noise / l;
    let survival = powers.survival(p);
    if !(survival > 0.0) {
        return Err(invalid("powers", format!("P(P_o >= {p}) is zero")));
    }
    Ok(CoupledParams {
        r,
        r_o,
        p,
        survival,
        lambda: rho_prime * r.powf(-d) / survival,
    })
}

/// `(ell(r_o) / (tau M)) (ell(r) / ell(r_o) - 1)`.
pub fn gamma_prime(r: f64, r_o: f64, m_cap: f64, sinr: &SinrParams, model: &PathLoss) -> Result<f64> {
    if !(r > model.plateau_end()) {
        return Err(invalid("r", format!("must exceed d_o = {}", model.plateau_end())));
    }
    if !(r < r_o) {
        return Err(invalid("r_o", format!("need r < r_o, got r = {r}, r_o = {r_o}")));
    }
    if !(m_cap > 0.0) {
        return Err(invalid("m_cap", "must be positive"));
    }
    let (lr, lo) = (model.eval(r), model.eval(r_o));
    if !(lo > 0.0) {
        return Err(invalid("r_o", "ell(r_o) must be positive"));
    }
    Ok(lo / (sinr.tau * m_cap) * (lr / lo - 1.0))
}

/// Shifted shot noise split at the cube `Q_{2 h}(x)`: `(I_in, I_out)` with
/// powers included, so that `I_in + I_out = I_a(x)`.
pub fn interference_split(
    config: &MarkedConfiguration,
    x: &[f64],
    half_width: f64,
    model: &PathLoss,
    shift: f64,
) -> Result<(f64, f64)> {
    if x.len() != config.dim() {
        return Err(invalid("x", "dimension mismatch"));
    }
    if config.is_empty() {
        return Ok((0.0, 0.0));
    }
    let powers = config.powers()?;
    let inner = Cube::new(x.to_vec(), 2.0 * half_width);
    let (mut i_in, mut i_out) = (0.0, 0.0);
    for k in 0..config.len() {
        let y = config.point(k);
        let v = powers[k] * model.shifted(shift, dist2(y, x).sqrt());
        if inner.contains(y) {
            i_in += v;
        } else {
            i_out += v;
        }
    }
    Ok((i_in, i_out))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TameVariant {
    /// `I_{6rn}(rn z) <= M`.
    Six,
    /// `I_{7n}(n z) <= M`.
    Seven,
}

/// Site centre `c + s z` for lattice spacing `s`.
fn site_centre(config: &MarkedConfiguration, z: &[i64], spacing: f64) -> Vec<f64> {
    config
        .window()
        .center()
        .iter()
        .zip(z)
        .map(|(c, &k)| c + spacing * k as f64)
        .collect()
}

fn shot_noise(config: &MarkedConfiguration, x: &[f64], model: &PathLoss, shift: f64) -> Result<f64> {
    crate::sinr::interference_at(config, x, &[], model, shift)
}

pub fn tame_site(
    z: &[i64],
    params: &RenormParams,
    config: &MarkedConfiguration,
    model: &PathLoss,
    variant: TameVariant,
) -> Result<bool> {
    let n = params.n as f64;
    let (spacing, shift) = match variant {
        TameVariant::Six => (params.block(), 6.0 * params.block()),
        TameVariant::Seven => (n, 7.0 * n),
    };
    let x = site_centre(config, z, spacing);
    Ok(shot_noise(config, &x, model, shift)? <= params.m_cap)
}

/// Outcome of an `(r, n)`-goodness evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoodReport {
    /// Stabilization condition; `None` when the measure has no known
    /// dependence range and the condition is not evaluated.
    pub stabilization: Option<bool>,
    pub nonempty: bool,
    pub connected: bool,
}

impl GoodReport {
    pub fn good(&self) -> bool {
        self.stabilization.unwrap_or(true) && self.nonempty && self.connected
    }
}

fn require_inside(config: &MarkedConfiguration, block: &Cube) -> Result<()> {
    if config.window().buffered().contains_cube(block) {
        Ok(())
    } else {
        Err(Error::OutsideWindow)
    }
}

/// Indices (from `subset`) of points inside `cube`.
fn points_in(config: &MarkedConfiguration, subset: &[usize], cube: &Cube) -> Vec<usize> {
    subset
        .iter()
        .copied()
        .filter(|&i| cube.contains(config.point(i)))
        .collect()
}

/// Component labels of `g_r` on `members`; label = position of the
/// component's union-find root in `members`.
fn gilbert_components(config: &MarkedConfiguration, members: &[usize], r: f64, bounds: &Cube) -> Vec<usize> {
    let dim = config.dim();
    let coords: Vec<f64> = members
        .iter()
        .flat_map(|&i| config.point(i).iter().copied())
        .collect();
    let grid = CellGrid::build(&coords, dim, bounds, r);
    let mut uf = UnionFind::new(members.len());
    let r2 = r * r;
    for a in 0..members.len() {
        let x = &coords[a * dim..(a + 1) * dim];
        grid.for_each_candidate(x, r, |b| {
            if b > a && dist2(x, &coords[b * dim..(b + 1) * dim]) < r2 {
                uf.union(a, b);
            }
        });
    }
    (0..members.len()).map(|a| uf.find(a)).collect()
}

/// `(r, n)`-goodness of site `z` for the thinned point set `thinned`
/// (indices into `config`). `dependence` is the measure's dependence range,
/// if known.
pub fn good_site(
    z: &[i64],
    params: &RenormParams,
    config: &MarkedConfiguration,
    thinned: &[usize],
    dependence: Option<f64>,
) -> Result<GoodReport> {
    let s = params.block();
    let c = site_centre(config, z, s);
    let outer = Cube::new(c.clone(), 6.0 * s);
    require_inside(config, &outer)?;
    let core = Cube::new(c.clone(), s);
    let mid = Cube::new(c, 3.0 * s);

    let in_outer = points_in(config, thinned, &outer);
    let nonempty = in_outer.iter().any(|&i| core.contains(config.point(i)));
    let labels = gilbert_components(config, &in_outer, params.r, &outer);
    let mut mid_label = None;
    let mut connected = true;
    for (a, &i) in in_outer.iter().enumerate() {
        if mid.contains(config.point(i)) {
            match mid_label {
                None => mid_label = Some(labels[a]),
                Some(l) if l != labels[a] => {
                    connected = false;
                    break;
                }
                _ => {}
            }
        }
    }
    Ok(GoodReport {
        stabilization: dependence.map(|b| b < s / 2.0),
        nonempty,
        connected,
    })
}

/// Diameter (maximal pairwise distance) of a point set.
fn diameter(config: &MarkedConfiguration, members: &[usize]) -> f64 {
    let mut best: f64 = 0.0;
    for (a, &i) in members.iter().enumerate() {
        for &j in &members[a + 1..] {
            best = best.max(dist2(config.point(i), config.point(j)));
        }
    }
    best.sqrt()
}

/// Components of `g_r` inside `Q_n(n z')` with diameter at least `n / 3`.
fn big_components(config: &MarkedConfiguration, all: &[usize], centre: &[f64], n: f64, r: f64) -> Vec<Vec<usize>> {
    let cube = Cube::new(centre.to_vec(), n);
    let members = points_in(config, all, &cube);
    let labels = gilbert_components(config, &members, r, &cube);
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (a, &l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(members[a]);
    }
    groups
        .into_values()
        .filter(|g| diameter(config, g) >= n / 3.0)
        .collect()
}

/// `n`-goodness in the Boolean model `B(X, r/2)`, computed on `g_r`.
pub fn boolean_good_site(z: &[i64], n: usize, config: &MarkedConfiguration, r: f64) -> Result<bool> {
    if n < 1 {
        return Err(invalid("n", "must be at least 1"));
    }
    if !(r > 0.0) {
        return Err(invalid("r", "must be positive"));
    }
    let nf = n as f64;
    let c = site_centre(config, z, nf);
    let outer = Cube::new(c.clone(), 6.0 * nf);
    require_inside(config, &outer)?;
    let all: Vec<usize> = (0..config.len()).collect();

    if big_components(config, &all, &c, nf, r).is_empty() {
        return Ok(false);
    }
    let in_outer = points_in(config, &all, &outer);
    let labels = gilbert_components(config, &in_outer, r, &outer);
    let label_of: std::collections::HashMap<usize, usize> =
        in_outer.iter().copied().zip(labels.iter().copied()).collect();

    let dim = config.dim();
    let mut common = None;
    for offset in 0..3usize.pow(dim as u32) {
        let mut zz = z.to_vec();
        let mut code = offset;
        for k in zz.iter_mut() {
            *k += (code % 3) as i64 - 1;
            code /= 3;
        }
        let cz = site_centre(config, &zz, nf);
        for comp in big_components(config, &all, &cz, nf, r) {
            let l = label_of[&comp[0]];
            match common {
                None => common = Some(l),
                Some(m) if m != l => return Ok(false),
                _ => {}
            }
        }
    }
    Ok(true)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanVariant {
    /// `(r, n)`-good on the thinned points and `I_{6rn}`-tame.
    Thinned,
    /// `n`-good in the Boolean model and `I_{7n}`-tame.
    Boolean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteFlags {
    pub z: Vec<i64>,
    pub good: bool,
    pub tame: bool,
    pub nice: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgePreservation {
    pub gamma: f64,
    pub gamma_prime: f64,
    /// Pairs of thinned points in nice cores at distance below `r`.
    pub checked_pairs: usize,
    pub violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteLattice {
    pub variant: ScanVariant,
    pub spacing: f64,
    /// Sites `z` with `|z_k| <= extent`.
    pub extent: i64,
    pub sites: Vec<SiteFlags>,
    /// Stabilization condition evaluated (known dependence range).
    pub stabilization_evaluated: bool,
    pub good_fraction: f64,
    pub tame_fraction: f64,
    pub nice_fraction: f64,
    /// Nearest-neighbour crossing of nice sites along axis 0.
    pub crossing: bool,
    pub edge_preservation: EdgePreservation,
}

/// Buffer margin that keeps every `6 x block` cube of the scanned lattice
/// inside the simulation window.
pub fn scan_margin(params: &RenormParams, variant: ScanVariant) -> f64 {
    let s = match variant {
        ScanVariant::Thinned => params.block(),
        ScanVariant::Boolean => params.n as f64,
    };
    2.5 * s
}

/// Evaluates every site whose core lies in the observation window, the
/// lattice crossing, and the edge-preservation implication at `gamma`
/// (`0 <= gamma <= gamma'`).
pub fn nice_site_scan(
    params: &RenormParams,
    config: &MarkedConfiguration,
    sinr: &SinrParams,
    model: &PathLoss,
    gamma: f64,
    dependence: Option<f64>,
    variant: ScanVariant,
) -> Result<SiteLattice> {
    params.validate(model)?;
    sinr.validate()?;
    let gp = gamma_prime(params.r, params.r_o, params.m_cap, sinr, model)?;
    if !(gamma >= 0.0) || gamma > gp {
        return Err(invalid("gamma", format!("need 0 <= gamma <= gamma' = {gp}, got {gamma}")));
    }
    let powers = config.powers()?;
    let p = params.power_threshold(sinr, model);
    let thinned: Vec<usize> = (0..config.len()).filter(|&i| powers[i] >= p).collect();

    let dim = config.dim();
    let spacing = match variant {
        ScanVariant::Thinned => params.block(),
        ScanVariant::Boolean => params.n as f64,
    };
    let side = config.window().side();
    let extent = (((side - spacing) / 2.0) / spacing + 1e-9).floor().max(-1.0) as i64;
    let width = (2 * extent + 1).max(0) as usize;
    let count = width.pow(dim as u32);

    let mut sites = Vec::with_capacity(count);
    for idx in 0..count {
        let mut code = idx;
        let z: Vec<i64> = (0..dim)
            .map(|_| {
                let k = (code % width) as i64 - extent;
                code /= width;
                k
            })
            .collect();
        let (good, tame) = match variant {
            ScanVariant::Thinned => (
                good_site(&z, params, config, &thinned, dependence)?.good(),
                tame_site(&z, params, config, model, TameVariant::Six)?,
            ),
            ScanVariant::Boolean => (
                boolean_good_site(&z, params.n, config, params.r)?,
                tame_site(&z, params, config, model, TameVariant::Seven)?,
            ),
        };
        sites.push(SiteFlags {
            z,
            good,
            tame,
            nice: good && tame,
        });
    }

    let crossing = lattice_crossing(&sites, width, dim);
    let frac = |f: fn(&SiteFlags) -> bool| {
        if sites.is_empty() {
            0.0
        } else {
            sites.iter().filter(|s| f(s)).count() as f64 / sites.len() as f64
        }
    };

    // edge preservation: thinned points in nice cores at distance < r
    let mut core_points = Vec::new();
    for s in sites.iter().filter(|s| s.nice) {
        let core = Cube::new(site_centre(config, &s.z, spacing), spacing);
        core_points.extend(points_in(config, &thinned, &core));
    }
    core_points.sort_unstable();
    core_points.dedup();
    let sinr_g = sinr.with_gamma(gamma);
    let (mut checked, mut violations) = (0, 0);
    let r2 = params.r * params.r;
    for (a, &i) in core_points.iter().enumerate() {
        for &j in &core_points[a + 1..] {
            if dist2(config.point(i), config.point(j)) < r2 {
                checked += 1;
                let ok = sinr_value(config, i, j, &sinr_g, model)? > sinr.tau
                    && sinr_value(config, j, i, &sinr_g, model)? > sinr.tau;
                if !ok {
                    violations += 1;
                }
            }
        }
    }

    Ok(SiteLattice {
        variant,
        spacing,
        extent,
        stabilization_evaluated: dependence.is_some(),
        good_fraction: frac(|s| s.good),
        tame_fraction: frac(|s| s.tame),
        nice_fraction: frac(|s| s.nice),
        crossing,
        edge_preservation: EdgePreservation {
            gamma,
            gamma_prime: gp,
            checked_pairs: checked,
            violations,
        },
        sites,
    })
}

/// Nice sites connected by nearest-neighbour steps from the `z_0 = -extent`
/// face to the `z_0 = +extent` face.
fn lattice_crossing(sites: &[SiteFlags], width: usize, dim: usize) -> bool {
    if sites.is_empty() {
        return false;
    }
    let mut uf = UnionFind::new(sites.len());
    let mut stride = 1;
    for _axis in 0..dim {
        for idx in 0..sites.len() {
            let coord = (idx / stride) % width;
            if coord + 1 < width && sites[idx].nice && sites[idx + stride].nice {
                uf.union(idx, idx + stride);
            }
        }
        stride *= width;
    }
    let low: Vec<usize> = (0..sites.len()).filter(|&i| i % width == 0 && sites[i].nice).collect();
    let high: std::collections::HashSet<usize> = (0..sites.len())
        .filter(|&i| i % width == width - 1 && sites[i].nice)
        .map(|i| uf.find(i))
        .collect();
    low.into_iter().any(|i| high.contains(&uf.find(i)))
}
