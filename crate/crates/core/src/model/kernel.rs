use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::geometry::{ball_volume, norm2, Point, TorusDomain};

/// Symmetric jump kernel `a`. Every variant is normalized so that
/// `||a||_1 = amplitude`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpKernel {
    UniformBall {
        radius: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    GaussianTruncated {
        sigma: f64,
        cutoff: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl JumpKernel {
    pub fn uniform_ball(radius: f64) -> Self {
        JumpKernel::UniformBall { radius, amplitude: 1.0 }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let check = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ModelError::invalid(name, format!("must be positive and finite, got {v}")))
            }
        };
        match *self {
            JumpKernel::UniformBall { radius, amplitude } => {
                check("radius", radius)?;
                check("amplitude", amplitude)
            }
            JumpKernel::GaussianTruncated { sigma, cutoff, amplitude } => {
                check("sigma", sigma)?;
                check("cutoff", cutoff)?;
                check("amplitude", amplitude)
            }
        }
    }

    /// `||a||_1`.
    pub fn mass(&self) -> f64 {
        match *self {
            JumpKernel::UniformBall { amplitude, .. } | JumpKernel::GaussianTruncated { amplitude, .. } => amplitude,
        }
    }

    /// Support radius of the unscaled kernel.
    pub fn cutoff(&self) -> f64 {
        match *self {
            JumpKernel::UniformBall { radius, .. } => radius,
            JumpKernel::GaussianTruncated { cutoff, .. } => cutoff,
        }
    }

    /// Same kernel with amplitude multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut k = self.clone();
        match &mut k {
            JumpKernel::UniformBall { amplitude, .. } | JumpKernel::GaussianTruncated { amplitude, .. } => {
                *amplitude *= factor
            }
        }
        k
    }

    /// Unscaled, unperiodized `a(x)` at radial distance `r`.
    #[inline]
    pub fn radial(&self, dim: usize, r: f64) -> f64 {
        match *self {
            JumpKernel::UniformBall { radius, amplitude } => {
                if r <= radius {
                    amplitude / ball_volume(dim, radius)
                } else {
                    0.0
                }
            }
            JumpKernel::GaussianTruncated { sigma, cutoff, amplitude } => {
                if r <= cutoff {
                    amplitude * (-0.5 * r * r / (sigma * sigma)).exp() / truncated_gaussian_mass(dim, sigma, cutoff)
                } else {
                    0.0
                }
            }
        }
    }

    /// Periodized scaled kernel `a_eps` at minimal-image displacement `disp`:
    /// `sum_k eps^d a(eps (disp + k L))` over all images in the support.
    pub fn eval_scaled(&self, eps: f64, disp: &Point, dom: &TorusDomain) -> f64 {
        let dim = dom.dim();
        let l = dom.side();
        let reach = self.cutoff() / eps;
        let scale = eps.powi(dim as i32);
        if dim == 1 {
            if let JumpKernel::UniformBall { .. } = self {
                // images k with |disp + k L| <= reach, counted in closed form
                let hi = ((reach - disp[0]) / l).floor();
                let lo = ((-reach - disp[0]) / l).ceil();
                let count = (hi - lo + 1.0).max(0.0);
                return count * scale * self.radial(1, 0.0);
            }
        }
        let kmax = (reach / l).ceil() as i64 + 1;
        let mut total = 0.0;
        let mut ks = [0i64; 3];
        let span = 2 * kmax + 1;
        let n_img = span.pow(dim as u32);
        for flat in 0..n_img {
            let mut rem = flat;
            for k in ks.iter_mut().take(dim) {
                *k = rem % span - kmax;
                rem /= span;
            }
            let mut v = [0.0; 3];
            for k in 0..dim {
                v[k] = disp[k] + ks[k] as f64 * l;
            }
            let r = norm2(&v).sqrt();
            if r <= reach {
                total += self.radial(dim, eps * r);
            }
        }
        total * scale
    }

    /// Radial breakpoints of `a_eps` in distance units, in `[0, cutoff/eps]`.
    pub fn scaled_breaks(&self, eps: f64) -> Vec<f64> {
        vec![0.0, self.cutoff() / eps]
    }

    /// Draws a displacement with density `a / ||a||_1` (unscaled).
    pub fn sample_displacement<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> Point {
        match *self {
            JumpKernel::UniformBall { radius, .. } => loop {
                let mut v = [0.0; 3];
                for c in v.iter_mut().take(dim) {
                    *c = radius * (2.0 * rng.random::<f64>() - 1.0);
                }
                if norm2(&v) <= radius * radius {
                    return v;
                }
            },
            JumpKernel::GaussianTruncated { sigma, cutoff, .. } => loop {
                let mut v = [0.0; 3];
                for c in v.iter_mut().take(dim) {
                    *c = sigma * <rand_distr::StandardNormal as rand_distr::Distribution<f64>>::sample(&rand_distr::StandardNormal, rng);
                }
                if norm2(&v) <= cutoff * cutoff {
                    return v;
                }
            },
        }
    }
}

/// `int_{|x|<=c} exp(-|x|^2 / (2 s^2)) dx` in `dim` dimensions.
pub fn truncated_gaussian_mass(dim: usize, sigma: f64, cutoff: f64) -> f64 {
    use statrs::function::erf::erf;
    let u = cutoff / (std::f64::consts::SQRT_2 * sigma);
    let two_pi_s2 = 2.0 * std::f64::consts::PI * sigma * sigma;
    match dim {
        1 => two_pi_s2.sqrt() * erf(u),
        2 => two_pi_s2 * (1.0 - (-u * u).exp()),
        _ => {
            two_pi_s2.powf(1.5)
                * (erf(u) - (2.0 / std::f64::consts::PI).sqrt() * (cutoff / sigma) * (-u * u).exp())
        }
    }
}
