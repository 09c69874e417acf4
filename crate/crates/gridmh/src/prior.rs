//! Prior distributions over the GRF parameter vector. Priors factorize over
//! coordinates; each family exposes the log density, its gradient and the
//! diagonal of its Hessian, which is all the grid builder and samplers need.

use rand::Rng;
use rand_distr::{Distribution, Gamma as GammaDist};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Prior {
    /// Improper flat prior: log density 0 everywhere. Useful for tests
    /// against maximum-likelihood oracles; not sampleable.
    Flat,
    /// Uniform over a box, zero density outside.
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
    /// Independent Gamma(shape, rate) per coordinate; support is theta > 0.
    Gamma { shape: Vec<f64>, rate: Vec<f64> },
    /// Independent Gaussian(mean, sd) per coordinate.
    Gaussian { mean: Vec<f64>, sd: Vec<f64> },
}

impl Prior {
    pub fn dims(&self) -> Option<usize> {
        match self {
            Prior::Flat => None,
            Prior::UniformBox { lo, .. } => Some(lo.len()),
            Prior::Gamma { shape, .. } => Some(shape.len()),
            Prior::Gaussian { mean, .. } => Some(mean.len()),
        }
    }

    /// Log density up to the normalizing constant; `-inf` outside support.
    pub fn log_density(&self, theta: &[f64]) -> f64 {
        match self {
            Prior::Flat => 0.0,
            Prior::UniformBox { lo, hi } => {
                let inside = theta
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .all(|(t, (l, h))| *t >= *l && *t <= *h);
                if inside {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Prior::Gamma { shape, rate } => {
                let mut acc = 0.0;
                for ((t, a), b) in theta.iter().zip(shape).zip(rate) {
                    if *t <= 0.0 {
                        return f64::NEG_INFINITY;
                    }
                    acc += (a - 1.0) * t.ln() - b * t;
                }
                acc
            }
            Prior::Gaussian { mean, sd } => theta
                .iter()
                .zip(mean.iter().zip(sd))
                .map(|(t, (m, s))| -0.5 * ((t - m) / s).powi(2))
                .sum(),
        }
    }

    /// Gradient of the log density. Zero for flat/uniform interiors.
    pub fn grad_log_density(&self, theta: &[f64]) -> Vec<f64> {
        match self {
            Prior::Flat | Prior::UniformBox { .. } => vec![0.0; theta.len()],
            Prior::Gamma { shape, rate } => theta
                .iter()
                .zip(shape.iter().zip(rate))
                .map(|(t, (a, b))| (a - 1.0) / t - b)
                .collect(),
            Prior::Gaussian { mean, sd } => theta
                .iter()
                .zip(mean.iter().zip(sd))
                .map(|(t, (m, s))| -(t - m) / (s * s))
                .collect(),
        }
    }

    /// Diagonal of the Hessian of the log density (the families used here
    /// have no cross terms).
    pub fn hessian_log_density_diag(&self, theta: &[f64]) -> Vec<f64> {
        match self {
            Prior::Flat | Prior::UniformBox { .. } => vec![0.0; theta.len()],
            Prior::Gamma { shape, .. } => theta
                .iter()
                .zip(shape)
                .map(|(t, a)| -(a - 1.0) / (t * t))
                .collect(),
            Prior::Gaussian { sd, .. } => sd.iter().map(|s| -1.0 / (s * s)).collect(),
        }
    }

    /// Clamp a parameter vector into the interior of the prior support.
    /// Used by the stochastic-approximation mode search, whose iterates can
    /// otherwise step outside the domain of the likelihood.
    pub fn project(&self, theta: &mut [f64]) {
        match self {
            Prior::Flat | Prior::Gaussian { .. } => {}
            Prior::UniformBox { lo, hi } => {
                for ((t, l), h) in theta.iter_mut().zip(lo).zip(hi) {
                    *t = t.clamp(*l, *h);
                }
            }
            Prior::Gamma { .. } => {
                for t in theta.iter_mut() {
                    if *t < 1e-6 {
                        *t = 1e-6;
                    }
                }
            }
        }
    }

    /// Draw one parameter vector from the prior. The flat prior has no
    /// sampling distribution and returns an error.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Result<Vec<f64>> {
        match self {
            Prior::Flat => Err(Error::InvalidParameter(
                "flat prior cannot be sampled; provide an explicit init".into(),
            )),
            Prior::UniformBox { lo, hi } => Ok(lo
                .iter()
                .zip(hi)
                .map(|(l, h)| rng.gen_range(*l..*h))
                .collect()),
            Prior::Gamma { shape, rate } => shape
                .iter()
                .zip(rate)
                .map(|(a, b)| {
                    let g = GammaDist::new(*a, 1.0 / b)
                        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
                    Ok(g.sample(rng))
                })
                .collect(),
            Prior::Gaussian { mean, sd } => Ok(mean
                .iter()
                .zip(sd)
                .map(|(m, s)| m + s * rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_gradient_and_hessian() {
        let p = Prior::Gamma { shape: vec![1.0], rate: vec![1.0] };
        // Gamma(1,1): log p = -theta, grad -1, hessian 0.
        assert!((p.grad_log_density(&[0.5])[0] + 1.0).abs() < 1e-12);
        assert_eq!(p.hessian_log_density_diag(&[0.5])[0], 0.0);
        assert_eq!(p.log_density(&[-0.1]), f64::NEG_INFINITY);
    }

    #[test]
    fn gaussian_prior_hessian_is_constant() {
        let p = Prior::Gaussian { mean: vec![0.0], sd: vec![2.0] };
        assert!((p.hessian_log_density_diag(&[1.3])[0] + 0.25).abs() < 1e-12);
        assert!((p.hessian_log_density_diag(&[-7.0])[0] + 0.25).abs() < 1e-12);
    }
}
