//! Well-behaved path-loss functions: constant on `[0, d_o]`, strictly
//! decreasing on the rest of their support, integrable against `r^{d-1}`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PathLossKind {
    /// `min(1, (r / d_o)^-alpha)`.
    TruncatedPowerLaw { d_o: f64, alpha: f64 },
    /// `ell0` on `[0, d_o]`, linear down to zero at `rho`, zero beyond.
    BoundedCone {
        d_o: f64,
        rho: f64,
        #[serde(default = "one")]
        ell0: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathLoss {
    kind: PathLossKind,
    dim: usize,
    #[serde(skip)]
    half_int_alpha: Option<i32>,
}

impl PathLoss {
    pub fn new(kind: PathLossKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension", "must be at least 1"));
        }
        let mut half_int_alpha = None;
        match kind {
            PathLossKind::TruncatedPowerLaw { d_o, alpha } => {
                if !(d_o > 0.0 && d_o.is_finite()) {
                    return Err(invalid("d_o", format!("must be positive, got {d_o}")));
                }
                if !(alpha > dim as f64) || !alpha.is_finite() {
                    return Err(invalid(
                        "alpha",
                        format!("power law needs alpha > d = {dim} for integrability, got {alpha}"),
                    ));
                }
                if alpha.fract() == 0.0 && (alpha as i64) % 2 == 0 {
                    half_int_alpha = Some((alpha / 2.0) as i32);
                }
            }
            PathLossKind::BoundedCone { d_o, rho, ell0 } => {
                if !(d_o >= 0.0) || !(rho > d_o) || !rho.is_finite() {
                    return Err(invalid(
                        "rho",
                        format!("need 0 <= d_o < rho < inf, got d_o = {d_o}, rho = {rho}"),
                    ));
                }
                if !(ell0 > 0.0 && ell0.is_finite()) {
                    return Err(invalid("ell0", format!("must be positive, got {ell0}")));
                }
            }
        }
        Ok(Self {
            kind,
            dim,
            half_int_alpha,
        })
    }

    pub fn power_law(d_o: f64, alpha: f64, dim: usize) -> Result<Self> {
        Self::new(PathLossKind::TruncatedPowerLaw { d_o, alpha }, dim)
    }

    pub fn cone(d_o: f64, rho: f64, ell0: f64, dim: usize) -> Result<Self> {
        Self::new(PathLossKind::BoundedCone { d_o, rho, ell0 }, dim)
    }

    pub fn kind(&self) -> &PathLossKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn plateau_end(&self) -> f64 {
        match self.kind {
            PathLossKind::TruncatedPowerLaw { d_o, .. } | PathLossKind::BoundedCone { d_o, .. } => {
                d_o
            }
        }
    }

    pub fn at_zero(&self) -> f64 {
        match self.kind {
            PathLossKind::TruncatedPowerLaw { .. } => 1.0,
            PathLossKind::BoundedCone { ell0, .. } => ell0,
        }
    }

    /// `sup supp(ell)`, `None` when the support is unbounded.
    pub fn support_sup(&self) -> Option<f64> {
        match self.kind {
            PathLossKind::TruncatedPowerLaw { .. } => None,
            PathLossKind::BoundedCone { rho, .. } => Some(rho),
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self.kind {
            PathLossKind::TruncatedPowerLaw { .. } => self.eval_sq(r * r),
            PathLossKind::BoundedCone { d_o, rho, ell0 } => cone(r, d_o, rho, ell0),
        }
    }

    /// Same function, taking the squared distance (avoids a sqrt for even
    /// integer exponents).
    #[inline]
    pub fn eval_sq(&self, r2: f64) -> f64 {
        match self.kind {
            PathLossKind::TruncatedPowerLaw { d_o, alpha } => {
                let d2 = d_o * d_o;
                if r2 <= d2 {
                    1.0
                } else {
                    let q = d2 / r2;
                    match self.half_int_alpha {
                        Some(k) => q.powi(k),
                        None => q.powf(alpha / 2.0),
                    }
                }
            }
            PathLossKind::BoundedCone { d_o, rho, ell0 } => cone(r2.sqrt(), d_o, rho, ell0),
        }
    }

    /// `ell^{-1}(y)` on the strictly decreasing branch. `ell^{-1}(ell(0)) = d_o`
    /// by convention; `y = 0` maps to the support supremum when it is finite.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        if !(y >= 0.0) || y > self.at_zero() {
            return Err(Error::NoPreimage(y));
        }
        if y == self.at_zero() {
            return Ok(self.plateau_end());
        }
        match self.kind {
            PathLossKind::TruncatedPowerLaw { d_o, alpha } => {
                if y == 0.0 {
                    Err(Error::NoPreimage(y))
                } else {
                    Ok(d_o * y.powf(-1.0 / alpha))
                }
            }
            PathLossKind::BoundedCone { d_o, rho, ell0 } => Ok(rho - y * (rho - d_o) / ell0),
        }
    }

    /// Largest distance `r` such that `ell(s) > threshold` for all `s < r`.
    /// Zero when the threshold is out of reach, the support supremum (possibly
    /// infinite) when the threshold is nonpositive.
    pub fn reach(&self, threshold: f64) -> f64 {
        if threshold <= 0.0 {
            return self.support_sup().unwrap_or(f64::INFINITY);
        }
        if threshold >= self.at_zero() {
            return 0.0;
        }
        self.inverse(threshold).unwrap_or(0.0)
    }

    /// `ell_a(r) = ell(0)` for `r < a sqrt(d) / 2`, else `ell(r - a sqrt(d) / 2)`.
    pub fn shifted(&self, a: f64, r: f64) -> f64 {
        let s = a * (self.dim as f64).sqrt() / 2.0;
        if r < s {
            self.at_zero()
        } else {
            self.eval(r - s)
        }
    }

    /// `int_m^inf r^{d-1} ell(r) dr`.
    pub fn tail_integral(&self, m: f64) -> f64 {
        let d = self.dim as f64;
        let m = m.max(0.0);
        match self.kind {
            PathLossKind::TruncatedPowerLaw { d_o, alpha } => {
                if m >= d_o {
                    d_o.powf(alpha) * m.powf(d - alpha) / (alpha - d)
                } else {
                    (d_o.powf(d) - m.powf(d)) / d + d_o.powf(d) / (alpha - d)
                }
            }
            PathLossKind::BoundedCone { d_o, rho, ell0 } => {
                let slope = ell0 / (rho - d_o);
                let prim = |r: f64| slope * (rho * r.powf(d) / d - r.powf(d + 1.0) / (d + 1.0));
                let plateau = if m < d_o {
                    ell0 * (d_o.powf(d) - m.powf(d)) / d
                } else {
                    0.0
                };
                let from = m.max(d_o);
                if from >= rho {
                    plateau
                } else {
                    plateau + prim(rho) - prim(from)
                }
            }
        }
    }
}

#[inline]
fn cone(r: f64, d_o: f64, rho: f64, ell0: f64) -> f64 {
    if r <= d_o {
        ell0
    } else if r >= rho {
        0.0
    } else {
        ell0 * (rho - r) / (rho - d_o)
    }
}

/// Surface area of the unit sphere in `R^d`.
pub fn unit_sphere_area(dim: usize) -> f64 {
    let d = dim as f64;
    2.0 * std::f64::consts::PI.powf(d / 2.0) / gamma_fn(d / 2.0)
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(dim: usize) -> f64 {
    unit_sphere_area(dim) / dim as f64
}

// Gamma at half-integers and integers, which is all the ball formulas need.
fn gamma_fn(x: f64) -> f64 {
    if (x - 0.5).abs() < 1e-12 {
        std::f64::consts::PI.sqrt()
    } else if (x - 1.0).abs() < 1e-12 {
        1.0
    } else {
        (x - 1.0) * gamma_fn(x - 1.0)
    }
}
