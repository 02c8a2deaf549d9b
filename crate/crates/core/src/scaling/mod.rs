//! Hop-to-birth-death scaling checks: generator actions on exponential
//! functions `F = exp<phi, gamma>`, their L2 distance along an `eps` sweep,
//! energy-shift limits, finite-dimensional laws and a relaxation-rate probe.

mod fdd;
mod gap;
mod shift;

pub use fdd::{fdd_compare, FddEpsRow, FddReport, FddSettings};
pub use gap::{spectral_gap_probe, GapReport, GapSettings};
pub use shift::{energy_shift_limit_check, EnergyShiftReport, ShiftRow};

pub use crate::testfn::{Shape, TestFunction};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::geometry::{norm2, Point};
use crate::gibbs::{estimate_k1, GibbsSamples};
use crate::model::{alpha_from_k1, Configuration, ModelSpec};
use crate::quadrature::QuadPolicy;
use crate::stats::{batch_means, Estimate};

/// `H F (gamma)` split as `H^+ + H^-`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GenValue {
    pub plus: f64,
    pub minus: f64,
    pub quad_error: f64,
}

impl GenValue {
    pub fn total(&self) -> f64 {
        self.plus + self.minus
    }
}

/// Unwrapped boxes `[lo, hi]` covering the intersection of `window` with
/// the periodic images of `support`.
fn image_overlaps(dim: usize, l: f64, window: (Point, Point), support: (Point, Point)) -> Vec<(Point, Point)> {
    let mut per_axis: Vec<Vec<(f64, f64)>> = Vec::with_capacity(dim);
    for k in 0..dim {
        let (wl, wh) = (window.0[k], window.1[k]);
        let (sl, sh) = (support.0[k], support.1[k]);
        let mut v = Vec::new();
        let k0 = ((wl - sh) / l).floor() as i64;
        let k1 = ((wh - sl) / l).ceil() as i64;
        for j in k0..=k1 {
            let lo = wl.max(sl + j as f64 * l);
            let hi = wh.min(sh + j as f64 * l);
            if hi > lo {
                v.push((lo, hi));
            }
        }
        per_axis.push(v);
    }
    let mut out = vec![([0.0; 3], [0.0; 3])];
    for (k, axis) in per_axis.iter().enumerate() {
        let mut next = Vec::new();
        for (lo, hi) in &out {
            for &(a, b) in axis {
                let (mut l2, mut h2) = (*lo, *hi);
                l2[k] = a;
                h2[k] = b;
                next.push((l2, h2));
            }
        }
        out = next;
    }
    out
}

/// Action of the scaled hop generator (`s = 0`) on `F = exp<phi, gamma>`:
/// `H^- = -F sum_x (e^{-phi(x)} - 1) int a_eps(x-y) e^{-E(y, gamma\x)} dy`,
/// `H^+ = -F sum_x e^{-phi(x)} int a_eps(x-y) e^{-E(y, gamma\x)} (e^{phi(y)} - 1) dy`.
pub fn apply_h_kawasaki_exp(test: &TestFunction, gamma: &Configuration, m: &ModelSpec, policy: &QuadPolicy) -> Result<GenValue> {
    if m.s != 0.0 {
        return Err(SimError::Invalid("generator actions are defined for s = 0 only".into()));
    }
    let dom = m.dom;
    let dim = dom.dim();
    let f_val = test.pair(gamma.points(), &dom).exp();
    let reach = m.kernel.cutoff() / m.eps;
    let scale = m.eps.powi(dim as i32);
    let support = test.support_box(&dom);
    let test_breaks = test.axis_breaks(&dom);
    let mut out = GenValue::default();
    for (id, x) in gamma.points().iter().enumerate() {
        let px = test.eval(x, &dom);
        let mut lo = *x;
        let mut hi = *x;
        for k in 0..dim {
            lo[k] -= reach;
            hi[k] += reach;
        }
        let kernel = |y: &Point| {
            let mut d = [0.0; 3];
            for k in 0..dim {
                d[k] = y[k] - x[k];
            }
            scale * m.kernel.radial(dim, m.eps * norm2(&d).sqrt())
        };
        let mut kb: Vec<Vec<f64>> = (0..dim).map(|k| vec![x[k] - reach, x[k] + reach]).collect();
        for (k, b) in test_breaks.iter().enumerate() {
            kb[k].extend(b.iter().copied());
        }
        if px != 0.0 {
            let q = m.integrate_with_energy(gamma, Some(id), &lo, &hi, &kb, policy, |y, e| {
                if e == f64::INFINITY { 0.0 } else { kernel(y) * (-e).exp() }
            })?;
            out.minus -= f_val * ((-px).exp() - 1.0) * q.value;
            out.quad_error += (f_val * ((-px).exp() - 1.0) * q.abs_error).abs();
        }
        if test.is_zero() {
            continue;
        }
        for (blo, bhi) in image_overlaps(dim, dom.side(), (lo, hi), support) {
            let q = m.integrate_with_energy(gamma, Some(id), &blo, &bhi, &kb, policy, |y, e| {
                if e == f64::INFINITY {
                    return 0.0;
                }
                let py = test.eval(y, &dom);
                if py == 0.0 { 0.0 } else { kernel(y) * (-e).exp() * py.exp_m1() }
            })?;
            out.plus -= f_val * (-px).exp() * q.value;
            out.quad_error += (f_val * (-px).exp() * q.abs_error).abs();
        }
    }
    Ok(out)
}

/// Action of the birth-death generator on `F = exp<phi, gamma>`:
/// `H^- = -alpha F sum_x (e^{-phi(x)} - 1)`,
/// `H^+ = -alpha z F int e^{-E(y, gamma)} (e^{phi(y)} - 1) dy`.
pub fn apply_h_glauber_exp(
    test: &TestFunction,
    gamma: &Configuration,
    m: &ModelSpec,
    alpha: f64,
    policy: &QuadPolicy,
) -> Result<GenValue> {
    let dom = m.dom;
    let f_val = test.pair(gamma.points(), &dom).exp();
    let minus = -alpha * f_val * gamma.points().iter().map(|x| (-test.eval(x, &dom)).exp_m1()).sum::<f64>();
    if test.is_zero() {
        return Ok(GenValue { plus: 0.0, minus, quad_error: 0.0 });
    }
    let (lo, hi) = test.support_box(&dom);
    let q = m.integrate_with_energy(gamma, None, &lo, &hi, &test.axis_breaks(&dom), policy, |y, e| {
        if e == f64::INFINITY { 0.0 } else { (-e).exp() * test.eval(y, &dom).exp_m1() }
    })?;
    let c = -alpha * m.z * f_val;
    Ok(GenValue { plus: c * q.value, minus, quad_error: (c * q.abs_error).abs() })
}

/// `|| H_eps F - H_0 F ||^2` in `L2(mu)` at one `eps`, with the `H^+` and
/// `H^-` parts separately.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct L2Distance {
    pub eps: f64,
    pub total: Estimate,
    pub plus: Estimate,
    pub minus: Estimate,
    /// `L >= 16 cutoff / eps`.
    pub admissible: bool,
    pub max_quad_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub model_hash: String,
    pub alpha: f64,
    pub alpha_source: String,
    pub k1: Estimate,
    pub n_samples: usize,
    pub rows: Vec<L2Distance>,
}

impl SweepResult {
    fn strictly_decreasing(xs: impl Iterator<Item = f64>) -> bool {
        let v: Vec<f64> = xs.collect();
        v.windows(2).all(|w| w[1] < w[0])
    }

    /// Totals strictly decrease as `eps` decreases.
    pub fn total_decreasing(&self) -> bool {
        Self::strictly_decreasing(self.rows.iter().map(|r| r.total.value))
    }

    pub fn plus_decreasing(&self) -> bool {
        Self::strictly_decreasing(self.rows.iter().map(|r| r.plus.value))
    }

    pub fn minus_decreasing(&self) -> bool {
        Self::strictly_decreasing(self.rows.iter().map(|r| r.minus.value))
    }

    /// Last total over first total.
    pub fn end_ratio(&self) -> f64 {
        match (self.rows.first(), self.rows.last()) {
            (Some(a), Some(b)) => b.total.value / a.total.value,
            _ => f64::NAN,
        }
    }
}

/// Sweep over `eps_list` (sorted into decreasing order) reusing the same
/// Gibbs samples at every `eps`. `alpha = None` uses `k1 ||a||_1 / z` from
/// the samples.
pub fn l2_generator_distance(
    test: &TestFunction,
    model: &ModelSpec,
    eps_list: &[f64],
    alpha: Option<f64>,
    samples: &GibbsSamples,
    policy: &QuadPolicy,
) -> Result<SweepResult> {
    if model.s != 0.0 {
        return Err(SimError::Invalid("the generator sweep is defined for s = 0 only".into()));
    }
    let mut eps: Vec<f64> = eps_list.to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    eps.dedup();
    let k1 = estimate_k1(samples)?;
    let (alpha, alpha_source) = match alpha {
        Some(a) => (a, "user".to_string()),
        None => (alpha_from_k1(k1.value, model.z, &model.kernel), "k1".to_string()),
    };
    let models: Vec<ModelSpec> = eps.iter().map(|e| model.with_eps(*e)).collect::<std::result::Result<_, _>>()?;
    // per sample: [H0+, H0-] then per eps [H+, H-]
    let per_sample: Vec<(Vec<[f64; 2]>, f64)> = samples
        .configs
        .par_iter()
        .map(|c| -> Result<(Vec<[f64; 2]>, f64)> {
            let g = apply_h_glauber_exp(test, c, model, alpha, policy)?;
            let mut qerr = g.quad_error;
            let mut diffs = Vec::with_capacity(models.len());
            for m in &models {
                let h = apply_h_kawasaki_exp(test, c, m, policy)?;
                qerr = qerr.max(h.quad_error);
                diffs.push([h.plus - g.plus, h.minus - g.minus]);
            }
            Ok((diffs, qerr))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (i, &e) in eps.iter().enumerate() {
        let tot: Vec<f64> = per_sample.iter().map(|(d, _)| (d[i][0] + d[i][1]).powi(2)).collect();
        let pl: Vec<f64> = per_sample.iter().map(|(d, _)| d[i][0].powi(2)).collect();
        let mi: Vec<f64> = per_sample.iter().map(|(d, _)| d[i][1].powi(2)).collect();
        rows.push(L2Distance {
            eps: e,
            total: batch_means(&tot)?,
            plus: batch_means(&pl)?,
            minus: batch_means(&mi)?,
            admissible: model.dom.side() >= 16.0 * model.kernel.cutoff() / e,
            max_quad_error: per_sample.iter().map(|(_, q)| *q).fold(0.0, f64::max),
        });
    }
    Ok(SweepResult { model_hash: model.hash(), alpha, alpha_source, k1, n_samples: samples.len(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlaps_wrap_around() {
        let o = image_overlaps(1, 10.0, ([8.0, 0.0, 0.0], [12.0, 0.0, 0.0]), ([0.0, 0.0, 0.0], [1.0, 0.0, 0.0]));
        assert_eq!(o.len(), 1);
        assert_eq!((o[0].0[0], o[0].1[0]), (10.0, 11.0));
        let o = image_overlaps(1, 10.0, ([-15.0, 0.0, 0.0], [15.0, 0.0, 0.0]), ([0.0, 0.0, 0.0], [1.0, 0.0, 0.0]));
        assert_eq!(o.len(), 3);
    }
}
