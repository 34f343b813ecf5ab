use rand::Rng;
use rand_distr::{Distribution, Exp, Pareto, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Law of the i.i.d. transmission powers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PowerDistribution {
    Dirac { p: f64 },
    Exponential { mean: f64 },
    Pareto { shape: f64, scale: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl PowerDistribution {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, format!("must be positive and finite, got {v}")))
            }
        };
        match *self {
            Self::Dirac { p } => pos("p", p),
            Self::Exponential { mean } => pos("mean", mean),
            Self::Pareto { shape, scale } => pos("shape", shape).and(pos("scale", scale)),
            Self::Uniform { lo, hi } => {
                pos("lo", lo)?;
                pos("hi", hi)?;
                if lo < hi {
                    Ok(())
                } else {
                    Err(invalid("hi", format!("need lo < hi, got [{lo}, {hi}]")))
                }
            }
        }
    }

    /// Pareto tails have no exponential moment.
    pub fn heavy_tailed(&self) -> bool {
        matches!(self, Self::Pareto { .. })
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Dirac { p } => p,
            Self::Exponential { mean } => mean,
            Self::Pareto { shape, scale } => {
                if shape > 1.0 {
                    shape * scale / (shape - 1.0)
                } else {
                    f64::INFINITY
                }
            }
            Self::Uniform { lo, hi } => (lo + hi) / 2.0,
        }
    }

    /// Essential supremum of the law.
    pub fn esssup(&self) -> f64 {
        match *self {
            Self::Dirac { p } => p,
            Self::Uniform { hi, .. } => hi,
            Self::Exponential { .. } | Self::Pareto { .. } => f64::INFINITY,
        }
    }

    /// `P(P_o >= t)`.
    pub fn survival(&self, t: f64) -> f64 {
        match *self {
            Self::Dirac { p } => {
                if p >= t {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Exponential { mean } => {
                if t <= 0.0 {
                    1.0
                } else {
                    (-t / mean).exp()
                }
            }
            Self::Pareto { shape, scale } => {
                if t <= scale {
                    1.0
                } else {
                    (scale / t).powf(shape)
                }
            }
            Self::Uniform { lo, hi } => ((hi - t) / (hi - lo)).clamp(0.0, 1.0),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Dirac { p } => p,
            Self::Exponential { mean } => Exp::new(1.0 / mean).expect("validated").sample(rng),
            Self::Pareto { shape, scale } => {
                Pareto::new(scale, shape).expect("validated").sample(rng)
            }
            Self::Uniform { lo, hi } => Uniform::new(lo, hi).expect("validated").sample(rng),
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            Self::Dirac { p } => format!("dirac(p={p})"),
            Self::Exponential { mean } => format!("exponential(mean={mean})"),
            Self::Pareto { shape, scale } => format!("pareto(shape={shape}, scale={scale})"),
            Self::Uniform { lo, hi } => format!("uniform({lo}, {hi})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn validation() {
        assert!(PowerDistribution::Dirac { p: 0.0 }.validate().is_err());
        assert!(PowerDistribution::Uniform { lo: 2.0, hi: 1.0 }.validate().is_err());
        assert!(PowerDistribution::Pareto { shape: 1.5, scale: 1.0 }.validate().is_ok());
    }

    #[test]
    fn survival_matches_sampling() {
        let mut rng = stream(11, "test", 0);
        for mu in [
            PowerDistribution::Exponential { mean: 2.0 },
            PowerDistribution::Pareto { shape: 3.0, scale: 0.5 },
            PowerDistribution::Uniform { lo: 0.5, hi: 1.5 },
        ] {
            let n = 50_000;
            let t = 1.0;
            let hits = (0..n).filter(|_| mu.sample(&mut rng) >= t).count() as f64 / n as f64;
            let p = mu.survival(t);
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((hits - p).abs() < 4.0 * se, "{mu:?}: {hits} vs {p}");
        }
    }
}
