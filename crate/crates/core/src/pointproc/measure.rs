//! Directing measures of the Cox process and their realizations on a window.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::voronoi::{voronoi_skeleton, Segment};
use crate::error::{invalid, Error, Result};
use crate::geometry::{dist2, CellGrid, Cube, Window};
use crate::pathloss::unit_ball_volume;
use crate::rng::{derive_seed, stream, SimRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelProfile {
    /// `height` on the ball.
    Flat,
    /// `height * (1 - |x|^2 / radius^2)` on the ball.
    Epanechnikov,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Kernel {
    pub radius: f64,
    pub height: f64,
    pub profile: KernelProfile,
}

impl Kernel {
    #[inline]
    pub fn eval2(&self, r2: f64) -> f64 {
        let rr = self.radius * self.radius;
        if r2 > rr {
            return 0.0;
        }
        match self.profile {
            KernelProfile::Flat => self.height,
            KernelProfile::Epanechnikov => self.height * (1.0 - r2 / rr),
        }
    }

    pub fn integral(&self, dim: usize) -> f64 {
        let ball = unit_ball_volume(dim) * self.radius.powi(dim as i32) * self.height;
        match self.profile {
            KernelProfile::Flat => ball,
            KernelProfile::Epanechnikov => ball * 2.0 / (dim as f64 + 2.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeasureKind {
    Lebesgue,
    /// `lambda_in` on a Poisson–Boolean set `Xi`, `lambda_out` off it.
    Modulated {
        lambda_in: f64,
        lambda_out: f64,
        nucleus_intensity: f64,
        ball_radius: f64,
    },
    /// `sum_i kernel(Y_i - x) dx` over a homogeneous PPP of nuclei.
    ShotNoise {
        nucleus_intensity: f64,
        kernel: Kernel,
    },
    /// Edge-length measure of a planar Poisson–Voronoi tessellation.
    VoronoiEdge { nucleus_intensity: f64 },
}

impl MeasureKind {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let nonneg = |name: &'static str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, format!("must be finite and >= 0, got {v}")))
            }
        };
        match *self {
            Self::Lebesgue => Ok(()),
            Self::Modulated {
                lambda_in,
                lambda_out,
                nucleus_intensity,
                ball_radius,
            } => {
                nonneg("lambda_in", lambda_in)?;
                nonneg("lambda_out", lambda_out)?;
                nonneg("nucleus_intensity", nucleus_intensity)?;
                if !(ball_radius > 0.0 && ball_radius.is_finite()) {
                    return Err(invalid("ball_radius", "must be positive and finite"));
                }
                if lambda_in + lambda_out == 0.0 {
                    return Err(invalid("lambda_in", "lambda_in and lambda_out both zero"));
                }
                Ok(())
            }
            Self::ShotNoise {
                nucleus_intensity,
                kernel,
            } => {
                nonneg("nucleus_intensity", nucleus_intensity)?;
                if !(kernel.radius > 0.0 && kernel.radius.is_finite()) {
                    return Err(invalid("kernel.radius", "support radius must be positive and finite"));
                }
                if !(kernel.height > 0.0 && kernel.height.is_finite()) {
                    return Err(invalid("kernel.height", "must be positive and finite"));
                }
                Ok(())
            }
            Self::VoronoiEdge { nucleus_intensity } => {
                if dim != 2 {
                    return Err(Error::UnsupportedDimension {
                        got: dim,
                        need: "d = 2 for Voronoi edge measures",
                    });
                }
                nonneg("nucleus_intensity", nucleus_intensity)?;
                if nucleus_intensity == 0.0 {
                    return Err(Error::DegenerateTessellation);
                }
                Ok(())
            }
        }
    }

    /// `E[Lambda(Q_1)]` before normalization, where a closed form exists.
    pub fn analytic_mean_density(&self, dim: usize) -> Option<f64> {
        match *self {
            Self::Lebesgue => Some(1.0),
            Self::Modulated {
                lambda_in,
                lambda_out,
                nucleus_intensity,
                ball_radius,
            } => {
                let covered = 1.0
                    - (-nucleus_intensity * unit_ball_volume(dim) * ball_radius.powi(dim as i32))
                        .exp();
                Some(lambda_in * covered + lambda_out * (1.0 - covered))
            }
            Self::ShotNoise {
                nucleus_intensity,
                kernel,
            } => Some(nucleus_intensity * kernel.integral(dim)),
            Self::VoronoiEdge { nucleus_intensity } if dim == 2 => {
                Some(2.0 * nucleus_intensity.sqrt())
            }
            Self::VoronoiEdge { .. } => None,
        }
    }

    /// Range `b` of `b`-dependence; `None` when the measure is not
    /// `b`-dependent for any finite `b`.
    pub fn dependence_range(&self) -> Option<f64> {
        match *self {
            Self::Lebesgue => Some(0.0),
            Self::Modulated { ball_radius, .. } => Some(2.0 * ball_radius),
            Self::ShotNoise { kernel, .. } => Some(2.0 * kernel.radius),
            Self::VoronoiEdge { .. } => None,
        }
    }

    /// Characteristic length of the environment.
    pub fn feature_scale(&self, dim: usize) -> f64 {
        match *self {
            Self::Lebesgue => 1.0,
            Self::Modulated {
                ball_radius,
                nucleus_intensity,
                ..
            } => {
                if nucleus_intensity > 0.0 {
                    ball_radius.max(nucleus_intensity.powf(-1.0 / dim as f64))
                } else {
                    ball_radius
                }
            }
            Self::ShotNoise {
                kernel,
                nucleus_intensity,
            } => {
                if nucleus_intensity > 0.0 {
                    kernel.radius.max(nucleus_intensity.powf(-1.0 / dim as f64))
                } else {
                    kernel.radius
                }
            }
            Self::VoronoiEdge { nucleus_intensity } => 1.0 / nucleus_intensity.sqrt(),
        }
    }
}

/// A directing measure kind plus the constant `c` making `E[Lambda(Q_1)] = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectingMeasureSpec {
    pub kind: MeasureKind,
    pub normalization: f64,
}

impl DirectingMeasureSpec {
    pub fn new(kind: MeasureKind, normalization: f64) -> Self {
        Self {
            kind,
            normalization,
        }
    }

    pub fn lebesgue() -> Self {
        Self::new(MeasureKind::Lebesgue, 1.0)
    }

    /// Normalization from a calibration run; see [`calibrate_normalization`].
    pub fn calibrated(kind: MeasureKind, dim: usize, seed: u64) -> Result<Self> {
        let cal = calibrate_normalization(&kind, dim, seed, CALIBRATION_REPLICAS)?;
        Ok(Self::new(kind, cal.normalization))
    }

    /// Normalization from the closed-form mean where one exists, otherwise
    /// from a calibration run.
    pub fn normalized(kind: MeasureKind, dim: usize, seed: u64) -> Result<Self> {
        kind.validate(dim)?;
        match kind.analytic_mean_density(dim) {
            Some(m) if m > 0.0 => Ok(Self::new(kind, 1.0 / m)),
            _ => Self::calibrated(kind, dim, seed),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        self.kind.validate(dim)?;
        if !(self.normalization > 0.0 && self.normalization.is_finite()) {
            return Err(invalid(
                "normalization",
                format!("must be positive, got {}", self.normalization),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Nuclei {
    dim: usize,
    coords: Vec<f64>,
    grid: CellGrid,
}

impl Nuclei {
    fn sample(intensity: f64, region: &Cube, cell: f64, rng: &mut SimRng) -> Self {
        let coords = uniform_points(intensity, region, rng);
        let grid = CellGrid::build(&coords, region.dim(), region, cell);
        Self {
            dim: region.dim(),
            coords,
            grid,
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    fn for_each_within(&self, x: &[f64], radius: f64, mut f: impl FnMut(f64)) {
        let r2 = radius * radius;
        self.grid.for_each_candidate(x, radius, |j| {
            let d2 = dist2(x, self.point(j));
            if d2 <= r2 {
                f(d2);
            }
        });
    }
}

/// Absolutely continuous payload; every value already includes `c`.
#[derive(Clone, Debug)]
pub enum DensityField {
    Constant(f64),
    Modulated {
        nuclei: Nuclei,
        radius: f64,
        inside: f64,
        outside: f64,
    },
    ShotNoise {
        nuclei: Nuclei,
        kernel: Kernel,
        scale: f64,
    },
}

impl DensityField {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::Modulated {
                nuclei,
                radius,
                inside,
                outside,
            } => {
                let mut hit = false;
                nuclei.for_each_within(x, *radius, |_| hit = true);
                if hit {
                    *inside
                } else {
                    *outside
                }
            }
            Self::ShotNoise {
                nuclei,
                kernel,
                scale,
            } => {
                let mut s = 0.0;
                nuclei.for_each_within(x, kernel.radius, |d2| s += kernel.eval2(d2));
                s * scale
            }
        }
    }

    /// An upper bound on the density over the whole window.
    pub fn sup_bound(&self) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::Modulated {
                inside, outside, ..
            } => inside.max(*outside),
            Self::ShotNoise {
                nuclei,
                kernel,
                scale,
            } => {
                // nuclei covering a common point lie within 2R of each other
                let mut most = 0usize;
                for i in 0..nuclei.len() {
                    let mut k = 0usize;
                    nuclei.for_each_within(nuclei.point(i), 2.0 * kernel.radius, |_| k += 1);
                    most = most.max(k);
                }
                most as f64 * kernel.height * scale
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct Skeleton {
    pub segments: Vec<Segment>,
    cumulative: Vec<f64>,
    /// Measure per unit length (the normalization constant).
    pub weight: f64,
}

impl Skeleton {
    fn new(segments: Vec<Segment>, weight: f64) -> Self {
        let mut acc = 0.0;
        let cumulative = segments
            .iter()
            .map(|s| {
                acc += s.length();
                acc
            })
            .collect();
        Self {
            segments,
            cumulative,
            weight,
        }
    }

    pub fn total_length(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// Length-proportional point by inversion of the cumulative length.
    pub fn point_at(&self, u: f64) -> [f64; 2] {
        let target = u * self.total_length();
        let k = self
            .cumulative
            .partition_point(|&c| c <= target)
            .min(self.segments.len() - 1);
        let start = if k == 0 { 0.0 } else { self.cumulative[k - 1] };
        let seg = &self.segments[k];
        let t = ((target - start) / seg.length()).clamp(0.0, 1.0);
        seg.lerp(t)
    }

    pub fn distance_to(&self, x: &[f64]) -> f64 {
        self.segments
            .iter()
            .map(|s| s.distance_to(x))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug)]
pub enum Payload {
    Density(DensityField),
    Skeleton(Skeleton),
}

#[derive(Clone, Debug)]
pub struct DirectingMeasureRealization {
    pub spec: DirectingMeasureSpec,
    pub window: Window,
    pub payload: Payload,
    /// `Lambda(buffered window)`.
    pub total_mass: f64,
    /// Grid step used for numerical integration, if any.
    pub integration_step: Option<f64>,
    /// Voronoi cells touching the sampling boundary and the window.
    pub boundary_flagged: usize,
}

impl DirectingMeasureRealization {
    pub fn density(&self, x: &[f64]) -> Option<f64> {
        match &self.payload {
            Payload::Density(f) => Some(f.eval(x)),
            Payload::Skeleton(_) => None,
        }
    }

    pub fn dependence_range(&self) -> Option<f64> {
        self.spec.kind.dependence_range()
    }
}

const MAX_INTEGRATION_CELLS: f64 = 4.0e6;

pub fn build_directing_measure(
    spec: &DirectingMeasureSpec,
    window: &Window,
    seed: u64,
) -> Result<DirectingMeasureRealization> {
    let dim = window.dim();
    spec.validate(dim)?;
    let c = spec.normalization;
    let buffered = window.buffered();
    let mut rng = stream(seed, "measure", 0);

    let (payload, step, flagged) = match spec.kind {
        MeasureKind::Lebesgue => (Payload::Density(DensityField::Constant(c)), None, 0),
        MeasureKind::Modulated {
            lambda_in,
            lambda_out,
            nucleus_intensity,
            ball_radius,
        } => {
            let region = Cube::new(buffered.center.clone(), buffered.side + 2.0 * ball_radius);
            let nuclei = Nuclei::sample(nucleus_intensity, &region, ball_radius, &mut rng);
            let f = DensityField::Modulated {
                nuclei,
                radius: ball_radius,
                inside: c * lambda_in,
                outside: c * lambda_out,
            };
            (Payload::Density(f), Some(ball_radius / 8.0), 0)
        }
        MeasureKind::ShotNoise {
            nucleus_intensity,
            kernel,
        } => {
            let region = Cube::new(buffered.center.clone(), buffered.side + 2.0 * kernel.radius);
            let nuclei = Nuclei::sample(nucleus_intensity, &region, kernel.radius, &mut rng);
            let f = DensityField::ShotNoise {
                nuclei,
                kernel,
                scale: c,
            };
            (Payload::Density(f), Some(kernel.radius / 8.0), 0)
        }
        MeasureKind::VoronoiEdge { nucleus_intensity } => {
            let spacing = 1.0 / nucleus_intensity.sqrt();
            let sampling = Cube::new(buffered.center.clone(), buffered.side + 12.0 * spacing);
            let flat = uniform_points(nucleus_intensity, &sampling, &mut rng);
            let nuclei: Vec<[f64; 2]> = flat.chunks_exact(2).map(|p| [p[0], p[1]]).collect();
            let sk = voronoi_skeleton(&nuclei, &sampling, &buffered, spacing);
            (
                Payload::Skeleton(Skeleton::new(sk.segments, c)),
                None,
                sk.flagged_cells,
            )
        }
    };

    let (total_mass, integration_step) = match &payload {
        Payload::Density(DensityField::Constant(v)) => (v * buffered.volume(), None),
        Payload::Density(f) => {
            let step = step.expect("density kinds declare a step");
            integrate(f, &buffered, step)
        }
        Payload::Skeleton(s) => (s.weight * s.total_length(), None),
    };

    Ok(DirectingMeasureRealization {
        spec: spec.clone(),
        window: window.clone(),
        payload,
        total_mass,
        integration_step,
        boundary_flagged: flagged,
    })
}

/// Midpoint rule on a regular grid; returns the mass and the step used.
fn integrate(f: &DensityField, region: &Cube, step: f64) -> (f64, Option<f64>) {
    let dim = region.dim();
    let mut per_axis = (region.side / step).ceil().max(1.0);
    while per_axis.powi(dim as i32) > MAX_INTEGRATION_CELLS {
        per_axis = (per_axis / 1.25).floor().max(1.0);
    }
    let n = per_axis as usize;
    let h = region.side / per_axis;
    let cell_volume = h.powi(dim as i32);
    let mut idx = vec![0usize; dim];
    let mut x = vec![0.0; dim];
    let mut sum = 0.0;
    loop {
        for k in 0..dim {
            x[k] = region.low(k) + (idx[k] as f64 + 0.5) * h;
        }
        sum += f.eval(&x);
        let mut k = 0;
        loop {
            if k == dim {
                return (sum * cell_volume, Some(h));
            }
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Homogeneous Poisson points in a cube, flat coordinates.
pub(crate) fn uniform_points<R: Rng + ?Sized>(intensity: f64, region: &Cube, rng: &mut R) -> Vec<f64> {
    let mean = intensity * region.volume();
    if !(mean > 0.0) {
        return Vec::new();
    }
    let n = Poisson::new(mean).expect("positive finite mean").sample(rng) as usize;
    let dim = region.dim();
    let mut coords = Vec::with_capacity(n * dim);
    for _ in 0..n {
        for k in 0..dim {
            coords.push(region.low(k) + rng.random::<f64>() * region.side);
        }
    }
    coords
}

pub const CALIBRATION_REPLICAS: usize = 200;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub normalization: f64,
    pub mean_density: f64,
    pub std_error: f64,
    pub replicas: usize,
    pub window_side: f64,
}

/// Empirical mean of `Lambda(Q_1)` (unnormalized) over `replicas` windows
/// of side 20 feature scales; the normalization is its reciprocal.
pub fn calibrate_normalization(
    kind: &MeasureKind,
    dim: usize,
    seed: u64,
    replicas: usize,
) -> Result<Calibration> {
    kind.validate(dim)?;
    if replicas < 2 {
        return Err(invalid("replicas", "calibration needs at least 2 replicas"));
    }
    let side = (20.0 * kind.feature_scale(dim)).max(10.0);
    let window = Window::centered(dim, side, 0.0)?;
    let raw = DirectingMeasureSpec::new(kind.clone(), 1.0);
    let values: Vec<f64> = (0..replicas)
        .map(|k| {
            build_directing_measure(&raw, &window, derive_seed(seed, "calibration", k as u64))
                .map(|m| m.total_mass / window.buffered_volume())
        })
        .collect::<Result<_>>()?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if !(mean > 0.0) {
        return Err(invalid("kind", "measure has zero mean mass"));
    }
    Ok(Calibration {
        normalization: 1.0 / mean,
        mean_density: mean,
        std_error: (var / n).sqrt(),
        replicas,
        window_side: side,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn modulated() -> MeasureKind {
        MeasureKind::Modulated {
            lambda_in: 2.0,
            lambda_out: 0.5,
            nucleus_intensity: 0.3,
            ball_radius: 1.0,
        }
    }

    #[test]
    fn lebesgue_has_unit_density() {
        let w = Window::centered(2, 7.0, 1.5).unwrap();
        let m = build_directing_measure(&DirectingMeasureSpec::lebesgue(), &w, 1).unwrap();
        assert_eq!(m.total_mass, 100.0);
        assert_eq!(m.density(&[0.3, 0.1]), Some(1.0));
    }

    #[test]
    fn modulated_with_equal_rates_is_flat() {
        let kind = MeasureKind::Modulated {
            lambda_in: 3.0,
            lambda_out: 3.0,
            nucleus_intensity: 0.5,
            ball_radius: 1.0,
        };
        let spec = DirectingMeasureSpec::new(kind, 1.0 / 3.0);
        let w = Window::centered(2, 10.0, 0.0).unwrap();
        let m = build_directing_measure(&spec, &w, 3).unwrap();
        for x in [[0.0, 0.0], [1.3, -4.2], [4.9, 4.9]] {
            assert!((m.density(&x).unwrap() - 1.0).abs() < 1e-15);
        }
        assert!((m.total_mass - 100.0).abs() < 1e-9);
    }

    #[test]
    fn voronoi_zero_intensity_is_degenerate() {
        let spec = DirectingMeasureSpec::new(
            MeasureKind::VoronoiEdge {
                nucleus_intensity: 0.0,
            },
            1.0,
        );
        let w = Window::centered(2, 10.0, 0.0).unwrap();
        assert_eq!(
            build_directing_measure(&spec, &w, 0).unwrap_err(),
            Error::DegenerateTessellation
        );
    }

    #[test]
    fn voronoi_needs_the_plane() {
        let kind = MeasureKind::VoronoiEdge {
            nucleus_intensity: 1.0,
        };
        assert!(kind.validate(3).is_err());
    }

    #[test]
    fn density_is_a_pure_function_of_the_nuclei() {
        let shot = MeasureKind::ShotNoise {
            nucleus_intensity: 0.4,
            kernel: Kernel {
                radius: 1.5,
                height: 1.0,
                profile: KernelProfile::Epanechnikov,
            },
        };
        for kind in [modulated(), shot] {
            let spec = DirectingMeasureSpec::new(kind, 1.0);
            let w = Window::centered(2, 12.0, 1.0).unwrap();
            let m = build_directing_measure(&spec, &w, 5).unwrap();
            let again = build_directing_measure(&spec, &w, 5).unwrap();
            for x in [[0.1, 0.2], [-3.3, 5.0], [6.5, -6.5]] {
                let a = m.density(&x).unwrap();
                assert_eq!(a.to_bits(), m.density(&x).unwrap().to_bits());
                assert_eq!(a.to_bits(), again.density(&x).unwrap().to_bits());
                assert!(a >= 0.0);
            }
            assert_eq!(m.total_mass.to_bits(), again.total_mass.to_bits());
        }
    }

    #[test]
    fn shot_noise_sup_bound_dominates() {
        let kind = MeasureKind::ShotNoise {
            nucleus_intensity: 1.0,
            kernel: Kernel {
                radius: 1.0,
                height: 2.0,
                profile: KernelProfile::Flat,
            },
        };
        let spec = DirectingMeasureSpec::new(kind, 1.0);
        let w = Window::centered(2, 8.0, 0.0).unwrap();
        let m = build_directing_measure(&spec, &w, 9).unwrap();
        let Payload::Density(f) = &m.payload else {
            panic!()
        };
        let sup = f.sup_bound();
        for i in 0..80 {
            for j in 0..80 {
                let x = [-4.0 + 0.1 * i as f64, -4.0 + 0.1 * j as f64];
                assert!(f.eval(&x) <= sup);
            }
        }
    }

    #[test]
    fn kernel_integrals() {
        let k = Kernel {
            radius: 2.0,
            height: 3.0,
            profile: KernelProfile::Epanechnikov,
        };
        // 2D: h * pi R^2 / 2
        assert!((k.integral(2) - 3.0 * std::f64::consts::PI * 4.0 / 2.0).abs() < 1e-12);
    }
}
