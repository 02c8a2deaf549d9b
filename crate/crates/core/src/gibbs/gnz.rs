use serde::{Deserialize, Serialize};

use super::GibbsSamples;
use crate::error::{Result, SimError};
use crate::quadrature::QuadPolicy;
use crate::stats::{batch_means, Estimate};
use crate::geometry::TorusDomain;
use crate::testfn::TestFunction;

/// Outer function `g` in `F(gamma, x) = f(x) g(<psi, gamma>)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Outer {
    One,
    /// `exp(coef * min(t, clip))`.
    Exp { coef: f64, clip: f64 },
    /// `sum_k coeffs[k] t^k`, degree at most 3.
    Poly { coeffs: Vec<f64> },
}

impl Outer {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Outer::One => 1.0,
            Outer::Exp { coef, clip } => (coef * t.min(*clip)).exp(),
            Outer::Poly { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GnzFunctional {
    pub f: TestFunction,
    #[serde(default)]
    pub psi: TestFunction,
    pub g: Outer,
}

impl GnzFunctional {
    pub fn simple(f: TestFunction) -> Self {
        Self { f, psi: TestFunction::zero(), g: Outer::One }
    }

    fn check(&self) -> Result<()> {
        if self.f.is_zero() {
            return Err(SimError::Invalid("test functional is identically zero".into()));
        }
        if let Outer::Poly { coeffs } = &self.g {
            if coeffs.len() > 4 || coeffs.iter().all(|c| *c == 0.0) {
                return Err(SimError::Invalid("polynomial outer function must be nonzero with degree <= 3".into()));
            }
        }
        Ok(())
    }
}

/// Five functionals used by default when validating the identities: plain
/// bump, step, exponential and polynomial outer functions, and a sum of bumps.
pub fn standard_functionals(dom: &TorusDomain) -> Vec<GnzFunctional> {
    let d = dom.dim();
    let l = dom.side();
    let at = |frac: f64| vec![frac * l; d];
    let lo: Vec<f64> = at(0.5).iter().map(|c| c - 1.0).collect();
    let hi: Vec<f64> = at(0.5).iter().map(|c| c + 1.0).collect();
    vec![
        GnzFunctional::simple(TestFunction::bump(&at(0.25), 1.0, 1.0)),
        GnzFunctional::simple(TestFunction::step(&lo, &hi, 1.0)),
        GnzFunctional {
            f: TestFunction::bump(&at(0.5), 1.0, 1.0),
            psi: TestFunction::bump(&at(0.5), 2.0, 1.0),
            g: Outer::Exp { coef: -0.5, clip: 10.0 },
        },
        GnzFunctional {
            f: TestFunction::bump(&at(0.3), 1.5, 0.5),
            psi: TestFunction::step(&lo, &hi, 1.0),
            g: Outer::Poly { coeffs: vec![1.0, 0.5] },
        },
        GnzFunctional::simple(
            TestFunction::bump(&at(0.2), 1.0, 1.0)
                .plus(TestFunction::bump(&at(0.2).iter().map(|c| c + 1.5).collect::<Vec<_>>(), 0.5, -0.5)),
        ),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnzResult {
    pub lhs: Estimate,
    pub rhs: Estimate,
    /// Batch-means estimate of the per-sample difference `lhs - rhs`.
    pub difference: Estimate,
    pub z_score: f64,
    /// Largest per-sample quadrature error estimate.
    pub max_quad_error: f64,
}

fn finish(lhs: Vec<f64>, rhs: Vec<f64>, max_quad_error: f64) -> Result<GnzResult> {
    let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    let difference = batch_means(&diff)?;
    Ok(GnzResult {
        lhs: batch_means(&lhs)?,
        rhs: batch_means(&rhs)?,
        z_score: difference.z_against(0.0),
        difference,
        max_quad_error,
    })
}

/// Single-point identity `E sum_{x in gamma} F(gamma, x) =
/// E int z e^{-E(x, gamma)} F(gamma + x, x) dx`.
pub fn gnz_residual(samples: &GibbsSamples, func: &GnzFunctional, policy: &QuadPolicy) -> Result<GnzResult> {
    func.check()?;
    let m = &samples.model;
    let dom = m.dom;
    let (lo, hi) = func.f.support_box(&dom);
    let mut extra = func.f.axis_breaks(&dom);
    for (k, b) in func.psi.axis_breaks(&dom).into_iter().enumerate() {
        extra[k].extend(b);
    }
    let mut lhs = Vec::with_capacity(samples.len());
    let mut rhs = Vec::with_capacity(samples.len());
    let mut qerr: f64 = 0.0;
    for c in &samples.configs {
        let s = func.psi.pair(c.points(), &dom);
        lhs.push(func.f.pair(c.points(), &dom) * func.g.eval(s));
        let q = m.integrate_with_energy(c, None, &lo, &hi, &extra, policy, |x, e| {
            let fx = func.f.eval(x, &dom);
            if fx == 0.0 || e == f64::INFINITY {
                0.0
            } else {
                (-e).exp() * fx * func.g.eval(s + func.psi.eval(x, &dom))
            }
        })?;
        rhs.push(m.z * q.value);
        qerr = qerr.max(m.z * q.abs_error);
    }
    finish(lhs, rhs, qerr)
}

/// Two-point identity with `F(gamma, x1, x2) = f(x1) f(x2) g(<psi, gamma>)`,
/// summed over all ordered pairs including the diagonal:
/// `E sum_{x1, x2 in gamma} F = z^2 E int int e^{-E(x1) - E(x2) - phi(x1 - x2)}
/// F(gamma + x1 + x2, x1, x2) + z E int e^{-E(x)} F(gamma + x, x, x)`.
pub fn double_gnz_residual(samples: &GibbsSamples, func: &GnzFunctional, policy: &QuadPolicy) -> Result<GnzResult> {
    func.check()?;
    let m = &samples.model;
    let dom = m.dom;
    let dim = dom.dim();
    let (lo, hi) = func.f.support_box(&dom);
    let mut extra = func.f.axis_breaks(&dom);
    for (k, b) in func.psi.axis_breaks(&dom).into_iter().enumerate() {
        extra[k].extend(b);
    }
    let radii = m.phi.radial_breaks();
    let mut lhs = Vec::with_capacity(samples.len());
    let mut rhs = Vec::with_capacity(samples.len());
    let mut qerr: f64 = 0.0;
    for c in &samples.configs {
        let s = func.psi.pair(c.points(), &dom);
        let sf = func.f.pair(c.points(), &dom);
        lhs.push(sf * sf * func.g.eval(s));
        let diag = m.integrate_with_energy(c, None, &lo, &hi, &extra, policy, |x, e| {
            let fx = func.f.eval(x, &dom);
            if fx == 0.0 || e == f64::INFINITY {
                0.0
            } else {
                (-e).exp() * fx * fx * func.g.eval(s + func.psi.eval(x, &dom))
            }
        })?;
        let mut inner_err: Option<SimError> = None;
        let mut inner_q: f64 = 0.0;
        let double = m.integrate_with_energy(c, None, &lo, &hi, &extra, policy, |x1, e1| {
            let f1 = func.f.eval(x1, &dom);
            if f1 == 0.0 || e1 == f64::INFINITY || inner_err.is_some() {
                return 0.0;
            }
            let mut ex = extra.clone();
            for (k, axis) in ex.iter_mut().enumerate().take(dim) {
                for &r in &radii {
                    axis.push(x1[k] - r);
                    axis.push(x1[k] + r);
                }
            }
            let p1 = func.psi.eval(x1, &dom);
            let inner = m.integrate_with_energy(c, None, &lo, &hi, &ex, policy, |x2, e2| {
                let f2 = func.f.eval(x2, &dom);
                if f2 == 0.0 || e2 == f64::INFINITY {
                    return 0.0;
                }
                let pair = m.phi.eval(&dom.min_image_disp(x1, x2));
                if pair == f64::INFINITY {
                    return 0.0;
                }
                (-e2 - pair).exp() * f2 * func.g.eval(s + p1 + func.psi.eval(x2, &dom))
            });
            match inner {
                Ok(q) => {
                    inner_q = inner_q.max(q.abs_error);
                    (-e1).exp() * f1 * q.value
                }
                Err(e) => {
                    inner_err = Some(e);
                    0.0
                }
            }
        })?;
        if let Some(e) = inner_err {
            return Err(e);
        }
        let z = m.z;
        rhs.push(z * z * double.value + z * diag.value);
        qerr = qerr.max(z * z * (double.abs_error + inner_q * (hi[0] - lo[0]).abs()) + z * diag.abs_error);
    }
    finish(lhs, rhs, qerr)
}
