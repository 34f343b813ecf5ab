//! Poisson and Cox point configurations on a buffered window, with i.i.d.
//! power marks.

mod measure;
mod power;
pub mod voronoi;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

pub use measure::{
    build_directing_measure, calibrate_normalization, Calibration, DensityField,
    DirectingMeasureRealization, DirectingMeasureSpec, Kernel, KernelProfile, MeasureKind,
    Nuclei, Payload, Skeleton, CALIBRATION_REPLICAS,
};
pub use power::PowerDistribution;

use crate::error::{invalid, Error, Result};
use crate::geometry::{dist2, Cube, Window};
use crate::rng::SimRng;
use measure::uniform_points;

/// Above this many points the full pairwise-distance check is skipped and
/// only coincident positions are rejected.
pub const NONEQUIDISTANCE_CHECK_LIMIT: usize = 256;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub source: String,
    pub marks: Option<String>,
    pub heavy_tail: bool,
}

/// Finite marked point set on a buffered window.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkedConfiguration {
    dim: usize,
    coords: Vec<f64>,
    powers: Option<Vec<f64>>,
    window: Window,
    pub provenance: Provenance,
}

impl MarkedConfiguration {
    pub fn new(coords: Vec<f64>, window: Window, provenance: Provenance) -> Result<Self> {
        let dim = window.dim();
        if coords.len() % dim != 0 {
            return Err(invalid("coords", "length is not a multiple of the dimension"));
        }
        let buffered = window.buffered();
        let tol = 1e-9 * buffered.side.max(1.0);
        if let Some(bad) = coords
            .chunks_exact(dim)
            .position(|x| !buffered.contains_tol(x, tol))
        {
            return Err(invalid(
                "coords",
                format!("point {bad} lies outside the buffered window"),
            ));
        }
        let cfg = Self {
            dim,
            coords,
            powers: None,
            window,
            provenance,
        };
        cfg.check_distinct_positions()?;
        if cfg.len() <= NONEQUIDISTANCE_CHECK_LIMIT {
            cfg.verify_nonequidistance()?;
        }
        Ok(cfg)
    }

    /// Convenience for hand-built configurations.
    pub fn from_points(points: &[Vec<f64>], powers: Option<Vec<f64>>, window: Window) -> Result<Self> {
        let coords = points.iter().flatten().copied().collect();
        let mut cfg = Self::new(coords, window, Provenance::default())?;
        if let Some(p) = powers {
            cfg = cfg.with_powers(p)?;
        }
        Ok(cfg)
    }

    pub fn with_powers(mut self, powers: Vec<f64>) -> Result<Self> {
        if powers.len() != self.len() {
            return Err(invalid("powers", "one power per point required"));
        }
        if let Some(p) = powers.iter().find(|p| !(**p > 0.0) || !p.is_finite()) {
            return Err(invalid("powers", format!("powers must be positive, got {p}")));
        }
        self.powers = Some(powers);
        Ok(self)
    }

    pub fn empty(window: Window) -> Self {
        Self {
            dim: window.dim(),
            coords: Vec::new(),
            powers: None,
            window,
            provenance: Provenance::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn is_marked(&self) -> bool {
        self.powers.is_some()
    }

    pub fn powers(&self) -> Result<&[f64]> {
        self.powers.as_deref().ok_or(Error::NotMarked)
    }

    pub fn power(&self, i: usize) -> Result<f64> {
        self.powers()?
            .get(i)
            .copied()
            .ok_or(Error::IndexOutOfRange { index: i, len: self.len() })
    }

    pub fn mean_power(&self) -> Option<f64> {
        let p = self.powers.as_ref()?;
        if p.is_empty() {
            None
        } else {
            Some(p.iter().sum::<f64>() / p.len() as f64)
        }
    }

    /// Sub-configuration on the given indices (in that order).
    pub fn select(&self, indices: &[usize]) -> Self {
        let coords = indices
            .iter()
            .flat_map(|&i| self.point(i).iter().copied())
            .collect();
        Self {
            dim: self.dim,
            coords,
            powers: self
                .powers
                .as_ref()
                .map(|p| indices.iter().map(|&i| p[i]).collect()),
            window: self.window.clone(),
            provenance: self.provenance.clone(),
        }
    }

    fn check_distinct_positions(&self) -> Result<()> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            self.point(a)
                .iter()
                .zip(self.point(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        for w in order.windows(2) {
            if self.point(w[0]) == self.point(w[1]) {
                return Err(Error::Nonequidistance(format!(
                    "points {} and {} coincide",
                    w[0].min(w[1]),
                    w[0].max(w[1])
                )));
            }
        }
        Ok(())
    }

    /// All pairwise distances distinct up to `1e-12` relative tolerance.
    pub fn verify_nonequidistance(&self) -> Result<()> {
        let n = self.len();
        let mut d: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                d.push((dist2(self.point(i), self.point(j)).sqrt(), i, j));
            }
        }
        d.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in d.windows(2) {
            let (a, b) = (w[0].0, w[1].0);
            if b - a <= 1e-12 * b {
                return Err(Error::Nonequidistance(format!(
                    "|X{}-X{}| = {a} and |X{}-X{}| = {b} agree to 1e-12",
                    w[0].1, w[0].2, w[1].1, w[1].2
                )));
            }
        }
        Ok(())
    }
}

pub fn sample_ppp(intensity: f64, window: &Window, seed: u64) -> Result<MarkedConfiguration> {
    let mut rng = SimRng::seed_from_u64(seed);
    let mut cfg = sample_ppp_with(intensity, window, &mut rng)?;
    cfg.provenance.seed = Some(seed);
    Ok(cfg)
}

pub fn sample_ppp_with<R: Rng + ?Sized>(
    intensity: f64,
    window: &Window,
    rng: &mut R,
) -> Result<MarkedConfiguration> {
    if !(intensity >= 0.0) || !intensity.is_finite() {
        return Err(invalid("intensity", format!("must be finite and >= 0, got {intensity}")));
    }
    let coords = uniform_points(intensity, &window.buffered(), rng);
    MarkedConfiguration::new(
        coords,
        window.clone(),
        Provenance {
            source: format!("ppp(intensity={intensity})"),
            ..Provenance::default()
        },
    )
}

/// Cox points with directing measure `lambda * Lambda` on the realization's
/// buffered window.
pub fn sample_cox(
    measure: &DirectingMeasureRealization,
    lambda: f64,
    seed: u64,
) -> Result<MarkedConfiguration> {
    let mut rng = SimRng::seed_from_u64(seed);
    let mut cfg = sample_cox_with(measure, lambda, &mut rng)?;
    cfg.provenance.seed = Some(seed);
    Ok(cfg)
}

pub fn sample_cox_with<R: Rng + ?Sized>(
    measure: &DirectingMeasureRealization,
    lambda: f64,
    rng: &mut R,
) -> Result<MarkedConfiguration> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(invalid("lambda", format!("must be finite and >= 0, got {lambda}")));
    }
    let window = &measure.window;
    let buffered = window.buffered();
    let coords = match &measure.payload {
        Payload::Density(DensityField::Constant(c)) => uniform_points(lambda * c, &buffered, rng),
        Payload::Density(field) => {
            let sup = field.sup_bound();
            let dim = window.dim();
            let proposals = uniform_points(lambda * sup, &buffered, rng);
            let mut kept = Vec::new();
            for x in proposals.chunks_exact(dim) {
                let u: f64 = rng.random();
                if u * sup < field.eval(x) {
                    kept.extend_from_slice(x);
                }
            }
            kept
        }
        Payload::Skeleton(sk) => {
            let mean = lambda * sk.weight * sk.total_length();
            if mean > 0.0 {
                let n = rand_distr::Distribution::sample(
                    &rand_distr::Poisson::new(mean).expect("positive mean"),
                    rng,
                ) as usize;
                let mut coords = Vec::with_capacity(2 * n);
                for _ in 0..n {
                    let p = sk.point_at(rng.random());
                    coords.extend_from_slice(&p);
                }
                coords
            } else {
                Vec::new()
            }
        }
    };
    MarkedConfiguration::new(
        coords,
        window.clone(),
        Provenance {
            source: format!("cox(lambda={lambda})"),
            ..Provenance::default()
        },
    )
}

pub fn mark_powers(
    config: &MarkedConfiguration,
    law: &PowerDistribution,
    seed: u64,
) -> Result<MarkedConfiguration> {
    let mut rng = SimRng::seed_from_u64(seed);
    mark_powers_with(config, law, &mut rng)
}

pub fn mark_powers_with<R: Rng + ?Sized>(
    config: &MarkedConfiguration,
    law: &PowerDistribution,
    rng: &mut R,
) -> Result<MarkedConfiguration> {
    if config.is_marked() {
        return Err(Error::AlreadyMarked);
    }
    law.validate()?;
    let powers: Vec<f64> = (0..config.len()).map(|_| law.sample(rng)).collect();
    let mut out = config.clone();
    out.powers = Some(powers);
    out.provenance.marks = Some(law.describe());
    out.provenance.heavy_tail = law.heavy_tailed();
    Ok(out)
}

/// Keep the points with power at least `threshold`.
pub fn thin_by_power(config: &MarkedConfiguration, threshold: f64) -> Result<MarkedConfiguration> {
    let powers = config.powers()?;
    let keep: Vec<usize> = (0..config.len()).filter(|&i| powers[i] >= threshold).collect();
    Ok(config.select(&keep))
}

/// Points per unit volume in `region`.
pub fn empirical_intensity(config: &MarkedConfiguration, region: &Cube) -> Result<f64> {
    if region.dim() != config.dim() {
        return Err(invalid("region", "dimension mismatch"));
    }
    let volume = region.volume();
    if !(volume > 0.0) {
        return Err(Error::ZeroVolume);
    }
    if !config.window().buffered().contains_cube(region) {
        return Err(Error::OutsideWindow);
    }
    let count = config.points().filter(|x| region.contains(x)).count();
    Ok(count as f64 / volume)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window() -> Window {
        Window::centered(2, 10.0, 0.0).unwrap()
    }

    #[test]
    fn zero_intensity_is_empty() {
        assert!(sample_ppp(0.0, &window(), 1).unwrap().is_empty());
        let m = build_directing_measure(&DirectingMeasureSpec::lebesgue(), &window(), 1).unwrap();
        assert!(sample_cox(&m, 0.0, 1).unwrap().is_empty());
        assert!(sample_ppp(-1.0, &window(), 1).is_err());
    }

    #[test]
    fn same_seed_same_points() {
        let a = sample_ppp(2.0, &window(), 99).unwrap();
        let b = sample_ppp(2.0, &window(), 99).unwrap();
        assert_eq!(a, b);
        assert!(a.coords().iter().zip(b.coords()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn marking_rules() {
        let cfg = sample_ppp(1.0, &window(), 4).unwrap();
        let marked = mark_powers(&cfg, &PowerDistribution::Dirac { p: 1.0 }, 5).unwrap();
        assert!(marked.powers().unwrap().iter().all(|&p| p == 1.0));
        assert_eq!(
            mark_powers(&marked, &PowerDistribution::Dirac { p: 1.0 }, 5).unwrap_err(),
            Error::AlreadyMarked
        );
        let heavy = mark_powers(
            &cfg,
            &PowerDistribution::Pareto {
                shape: 1.5,
                scale: 1.0,
            },
            5,
        )
        .unwrap();
        assert!(heavy.provenance.heavy_tail);
        assert!(!marked.provenance.heavy_tail);
    }

    #[test]
    fn dirac_thinning_extremes() {
        let cfg = sample_ppp(1.0, &window(), 8).unwrap();
        let marked = mark_powers(&cfg, &PowerDistribution::Dirac { p: 1.0 }, 1).unwrap();
        assert_eq!(thin_by_power(&marked, 0.5).unwrap(), marked);
        assert!(thin_by_power(&marked, 2.0).unwrap().is_empty());
        assert_eq!(thin_by_power(&cfg, 0.5).unwrap_err(), Error::NotMarked);
    }

    #[test]
    fn intensity_errors() {
        let cfg = MarkedConfiguration::empty(window());
        assert_eq!(
            empirical_intensity(&cfg, &Cube::new(vec![0.0, 0.0], 4.0)).unwrap(),
            0.0
        );
        assert_eq!(
            empirical_intensity(&cfg, &Cube::new(vec![0.0, 0.0], 0.0)).unwrap_err(),
            Error::ZeroVolume
        );
        assert_eq!(
            empirical_intensity(&cfg, &Cube::new(vec![4.0, 0.0], 4.0)).unwrap_err(),
            Error::OutsideWindow
        );
    }

    #[test]
    fn duplicates_are_rejected() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 0.0]];
        assert!(matches!(
            MarkedConfiguration::from_points(&pts, None, window()),
            Err(Error::Nonequidistance(_))
        ));
        // equal distances: 0-1 and 0-2 both 1
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(matches!(
            MarkedConfiguration::from_points(&pts, None, window()),
            Err(Error::Nonequidistance(_))
        ));
    }

    #[test]
    fn skeleton_points_lie_on_edges() {
        let spec = DirectingMeasureSpec::new(
            MeasureKind::VoronoiEdge {
                nucleus_intensity: 1.0,
            },
            0.5,
        );
        let w = Window::centered(2, 12.0, 1.0).unwrap();
        let m = build_directing_measure(&spec, &w, 21).unwrap();
        let cfg = sample_cox(&m, 3.0, 22).unwrap();
        assert!(cfg.len() > 50);
        let Payload::Skeleton(sk) = &m.payload else {
            panic!("voronoi payload is a skeleton")
        };
        for x in cfg.points() {
            assert!(sk.distance_to(x) < 1e-9);
        }
    }
}
