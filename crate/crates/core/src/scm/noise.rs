use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Distribution {
    Gaussian { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
    Laplace { loc: f64, scale: f64 },
}

impl Distribution {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Distribution::Gaussian { mean, sd } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + sd * z
            }
            Distribution::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Distribution::Laplace { loc, scale } => {
                // Inverse CDF on u in (-1/2, 1/2).
                let u: f64 = rng.random::<f64>() - 0.5;
                let a = (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE);
                loc - scale * u.signum() * a.ln()
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::Gaussian { mean, .. } => mean,
            Distribution::Uniform { lo, hi } => 0.5 * (lo + hi),
            Distribution::Laplace { loc, .. } => loc,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Distribution::Gaussian { sd, .. } => sd * sd,
            Distribution::Uniform { lo, hi } => (hi - lo).powi(2) / 12.0,
            Distribution::Laplace { scale, .. } => 2.0 * scale * scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub name: String,
    pub distribution: Distribution,
}

impl NoiseSpec {
    pub fn new(name: impl Into<String>, distribution: Distribution) -> Result<Self> {
        let name = name.into();
        let bad = |reason: &str| Error::InvalidNoise {
            name: name.clone(),
            reason: reason.to_string(),
        };
        match distribution {
            Distribution::Gaussian { mean, sd } => {
                if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) {
                    return Err(bad("gaussian needs finite mean and sd > 0"));
                }
            }
            Distribution::Uniform { lo, hi } => {
                if !(hi > lo && lo.is_finite() && hi.is_finite()) {
                    return Err(bad("uniform needs finite lo < hi"));
                }
            }
            Distribution::Laplace { loc, scale } => {
                if !(scale > 0.0 && scale.is_finite() && loc.is_finite()) {
                    return Err(bad("laplace needs finite loc and scale > 0"));
                }
            }
        }
        Ok(NoiseSpec { name, distribution })
    }

    pub fn gaussian(name: &str, sd: f64) -> Self {
        Self::new(name, Distribution::Gaussian { mean: 0.0, sd }).expect("valid gaussian")
    }

    pub fn uniform(name: &str, lo: f64, hi: f64) -> Self {
        Self::new(name, Distribution::Uniform { lo, hi }).expect("valid uniform")
    }

    pub fn laplace(name: &str, scale: f64) -> Self {
        Self::new(name, Distribution::Laplace { loc: 0.0, scale }).expect("valid laplace")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn moments(d: Distribution) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        (m, v)
    }

    #[test]
    fn sample_moments_match() {
        for d in [
            Distribution::Gaussian { mean: 1.0, sd: 2.0 },
            Distribution::Uniform { lo: -1.0, hi: 3.0 },
            Distribution::Laplace { loc: -0.5, scale: 1.5 },
        ] {
            let (m, v) = moments(d);
            let se = (d.variance() / 200_000f64).sqrt();
            assert!((m - d.mean()).abs() < 5.0 * se, "{d:?} mean {m}");
            assert!((v / d.variance() - 1.0).abs() < 0.03, "{d:?} var {v}");
        }
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(NoiseSpec::new("e", Distribution::Gaussian { mean: 0.0, sd: 0.0 }).is_err());
        assert!(NoiseSpec::new("e", Distribution::Uniform { lo: 1.0, hi: 1.0 }).is_err());
        assert!(NoiseSpec::new("e", Distribution::Laplace { loc: 0.0, scale: -1.0 }).is_err());
    }
}
