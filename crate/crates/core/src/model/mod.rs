//! The physical model: pair potential, activity, jump kernel and its
//! scaling, relative energies and transition rates.

mod configuration;
mod kernel;
mod potential;
mod rates;

pub use configuration::Configuration;
pub use kernel::{truncated_gaussian_mass, JumpKernel};
pub use potential::PairPotential;
pub use rates::{alpha_from_k1, glauber_rates, kawasaki_energy_factor, kawasaki_rate, GlauberRates};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ModelError, SimError};
use crate::geometry::{Point, TorusDomain};
use crate::quadrature::{self, QuadPolicy, QuadResult};

/// Complete model description; immutable once built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub dom: TorusDomain,
    pub phi: PairPotential,
    /// Activity `z`.
    pub z: f64,
    pub kernel: JumpKernel,
    /// Kernel scale `eps`.
    pub eps: f64,
    /// Rate-family parameter `s` in `[0, 1]`.
    pub s: f64,
    /// User bound on energy factors, required unless `phi >= 0` and `s = 0`.
    pub rate_cap: Option<f64>,
}

impl ModelSpec {
    pub fn new(
        dom: TorusDomain,
        phi: PairPotential,
        z: f64,
        kernel: JumpKernel,
        eps: f64,
        s: f64,
        rate_cap: Option<f64>,
    ) -> Result<Self, ModelError> {
        let m = Self { dom, phi, z, kernel, eps, s, rate_cap };
        m.validate()?;
        Ok(m)
    }

    /// Ideal gas with a uniform-ball kernel of radius 1/2.
    pub fn ideal_gas(dom: TorusDomain, z: f64) -> Self {
        Self::new(dom, PairPotential::Zero, z, JumpKernel::uniform_ball(0.5), 1.0, 0.0, None)
            .expect("valid ideal gas")
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.phi.validate().map_err(|e| e.within("potential"))?;
        self.kernel.validate().map_err(|e| e.within("kernel"))?;
        if !(self.z.is_finite() && self.z > 0.0) {
            return Err(ModelError::invalid("z", format!("activity must be positive, got {}", self.z)));
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(ModelError::invalid("eps", format!("must be positive, got {}", self.eps)));
        }
        if !(0.0..=1.0).contains(&self.s) {
            return Err(ModelError::invalid("s", format!("must lie in [0, 1], got {}", self.s)));
        }
        if self.phi.range() >= 0.5 * self.dom.side() {
            return Err(ModelError::invalid(
                "potential.range",
                format!("interaction range {} must be < L/2 = {}", self.phi.range(), 0.5 * self.dom.side()),
            ));
        }
        match self.rate_cap {
            Some(m) if !(m.is_finite() && m >= 1.0) => {
                Err(ModelError::invalid("rate_cap", format!("must be finite and >= 1, got {m}")))
            }
            None if self.needs_rate_cap() => Err(ModelError::invalid(
                "rate_cap",
                "a finite rate cap is required when s > 0 or the potential is not positive",
            )),
            _ => Ok(()),
        }
    }

    fn needs_rate_cap(&self) -> bool {
        self.s > 0.0 || !self.phi.is_positive()
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self, ModelError> {
        let mut m = self.clone();
        m.eps = eps;
        m.validate()?;
        Ok(m)
    }

    pub fn with_z(&self, z: f64) -> Result<Self, ModelError> {
        let mut m = self.clone();
        m.z = z;
        m.validate()?;
        Ok(m)
    }

    /// Bound on the Kawasaki energy factor `exp[s E(x) - (1-s) E(y)]`.
    pub fn kawasaki_cap(&self) -> f64 {
        if self.needs_rate_cap() {
            self.rate_cap.unwrap_or(f64::INFINITY)
        } else {
            1.0
        }
    }

    /// Bound on the Glauber death factor `exp[s E(x)]`.
    pub fn death_cap(&self) -> f64 {
        if self.s == 0.0 {
            1.0
        } else {
            self.rate_cap.unwrap_or(f64::INFINITY)
        }
    }

    /// Bound on the Glauber birth factor `exp[-(1-s) E(x)]`.
    pub fn birth_cap(&self) -> f64 {
        if self.phi.is_positive() || self.s == 1.0 {
            1.0
        } else {
            self.rate_cap.unwrap_or(f64::INFINITY)
        }
    }

    /// Short content hash of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("model serializes");
        let digest = Sha256::digest(&json);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// `int |e^{-phi(x)} - 1| dx`.
    pub fn mayer_l1(&self) -> Result<f64, SimError> {
        let phi = &self.phi;
        quadrature::radial_integral(self.dom.dim(), &phi.radial_breaks(), |r| {
            let v = phi.at_distance(r);
            ((-v).exp() - 1.0).abs()
        })
    }

    /// `int (1 - e^{-phi(x)}) dx`.
    pub fn mayer_integral(&self) -> Result<f64, SimError> {
        let phi = &self.phi;
        quadrature::radial_integral(self.dom.dim(), &phi.radial_breaks(), |r| 1.0 - (-phi.at_distance(r)).exp())
    }

    /// Low activity-high temperature condition
    /// `z int |e^{-phi}-1| dx < (2 e^{1+2B})^{-1}`.
    pub fn lahht_check(&self) -> Result<LahtCheck, SimError> {
        let lhs = self.z * self.mayer_l1()?;
        let b = self.phi.stability_constant(self.dom.dim());
        let rhs = 1.0 / (2.0 * (1.0 + 2.0 * b).exp());
        Ok(LahtCheck { lhs, rhs, satisfied: lhs < rhs })
    }

    /// `int_{[lo, hi]} f(y, E(y, gamma \ exclude)) dy` over a box given in
    /// unwrapped coordinates. `extra` lists further per-axis discontinuities;
    /// their periodic images are added.
    pub fn integrate_with_energy(
        &self,
        gamma: &Configuration,
        exclude: Option<usize>,
        lo: &Point,
        hi: &Point,
        extra: &[Vec<f64>],
        policy: &QuadPolicy,
        mut f: impl FnMut(&Point, f64) -> f64,
    ) -> Result<QuadResult, SimError> {
        let mut breaks = gamma.energy_axis_breaks(&self.phi, lo, hi, exclude);
        for (k, axis) in breaks.iter_mut().enumerate() {
            if let Some(e) = extra.get(k) {
                axis.extend(quadrature::periodic_breaks(e, lo[k], hi[k], self.dom.side()));
            }
        }
        let phi = &self.phi;
        quadrature::integrate_box(self.dom.dim(), lo, hi, &breaks, policy, |y| {
            let e = gamma.energy_at(phi, y, exclude);
            f(y, e)
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LahtCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}
