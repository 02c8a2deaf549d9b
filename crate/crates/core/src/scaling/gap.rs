use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{run, DynamicsSpec, Engine};
use crate::error::{Result, SimError};
use crate::gibbs::{estimate_k1, sample_gibbs, SamplerSettings};
use crate::model::{alpha_from_k1, ModelSpec};
use crate::seed;
use crate::stats::{linear_fit, pooled_autocovariance, Estimate};
use crate::testfn::TestFunction;

const GROUPS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapSettings {
    pub test: TestFunction,
    /// `None` uses `k1 ||a||_1 / z` from the starting samples.
    pub alpha: Option<f64>,
    /// Horizon and sampling step, in units of `1/alpha`.
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub n_replicas: usize,
    pub seed: u64,
    #[serde(default)]
    pub sampler: SamplerSettings,
}

fn default_horizon() -> f64 {
    10.0
}

fn default_dt() -> f64 {
    0.05
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub model_hash: String,
    pub alpha: f64,
    pub gap: Estimate,
    /// `alpha (1 - z int (1 - e^{-phi}))`.
    pub bound: f64,
    /// `(gap - bound) / se`.
    pub z_vs_bound: f64,
    /// Lags (absolute time) used in the fit.
    pub fit_window: (f64, f64),
    /// Normalized autocovariance at multiples of `dt / alpha`.
    pub autocorrelation: Vec<f64>,
}

impl GapReport {
    pub fn respects_bound(&self, k: f64) -> bool {
        self.gap.value >= self.bound - k * self.gap.std_error
    }
}

/// Slope of `log C(t)/C(0)` over the lags where the ratio lies in
/// `[0.1, 0.8]`; returns `(rate, first lag, last lag)`.
fn fit_rate(acf: &[f64], dt: f64) -> Option<(f64, usize, usize)> {
    let c0 = *acf.first()?;
    if !(c0 > 0.0) {
        return None;
    }
    let lo = acf.iter().position(|c| c / c0 <= 0.8)?;
    let mut hi = lo;
    while hi + 1 < acf.len() && acf[hi + 1] / c0 >= 0.1 {
        hi += 1;
    }
    if acf[lo] / c0 < 0.1 || hi <= lo {
        return None;
    }
    let xs: Vec<f64> = (lo..=hi).map(|k| k as f64 * dt).collect();
    let ys: Vec<f64> = (lo..=hi).map(|k| (acf[k] / c0).ln()).collect();
    let (_, b) = linear_fit(&xs, &ys)?;
    Some((-b, lo, hi))
}

/// Relaxation rate of `<phi_test, gamma(t)>` under the stationary
/// birth-death dynamics, from an exponential fit to its autocovariance.
pub fn spectral_gap_probe(model: &ModelSpec, settings: &GapSettings) -> Result<GapReport> {
    settings.test.validate(&model.dom)?;
    if settings.test.is_zero() {
        return Err(SimError::Invalid("gap probe needs a nonzero test function".into()));
    }
    if settings.n_replicas < 2 * GROUPS {
        return Err(SimError::InsufficientData(format!("gap probe needs at least {} replicas", 2 * GROUPS)));
    }
    if !(settings.dt > 0.0 && settings.horizon > settings.dt) {
        return Err(SimError::Invalid("gap probe needs 0 < dt < horizon".into()));
    }
    let starts = sample_gibbs(
        model,
        &SamplerSettings { seed: seed::split(settings.seed, 0), n_samples: settings.n_replicas, ..settings.sampler.clone() },
    )?;
    let alpha = match settings.alpha {
        Some(a) => a,
        None => alpha_from_k1(estimate_k1(&starts)?.value, model.z, &model.kernel),
    };
    let dt = settings.dt / alpha;
    let n_steps = (settings.horizon / settings.dt).round() as usize;
    let times: Vec<f64> = (0..=n_steps).map(|k| k as f64 * dt).collect();
    let spec = DynamicsSpec::new(model, Engine::Glauber { alpha }, times[n_steps]).with_snapshots(times.clone());
    let dom = model.dom;
    let root = seed::split(settings.seed, 1);
    let series: Vec<Vec<f64>> = starts
        .configs
        .par_iter()
        .enumerate()
        .map(|(i, c0)| {
            let traj = run(c0, &spec, seed::split(root, i as u64))?;
            Ok(traj.snapshots.iter().map(|(_, c)| settings.test.pair(c.points(), &dom)).collect())
        })
        .collect::<Result<_>>()?;
    let max_lag = n_steps / 2;
    let acf = pooled_autocovariance(&series, max_lag);
    let (rate, lo, hi) =
        fit_rate(&acf, dt).ok_or_else(|| SimError::InsufficientData("autocovariance never enters [0.1, 0.8]".into()))?;

    // leave-one-group-out refits on a fixed window
    let per_group: Vec<usize> = (0..series.len()).map(|i| i * GROUPS / series.len()).collect();
    let group_rates: Vec<f64> = (0..GROUPS)
        .map(|g| {
            let keep: Vec<Vec<f64>> =
                series.iter().zip(&per_group).filter(|(_, k)| **k != g).map(|(s, _)| s.clone()).collect();
            let a = pooled_autocovariance(&keep, hi);
            let xs: Vec<f64> = (lo..=hi).map(|k| k as f64 * dt).collect();
            let ys: Vec<f64> = (lo..=hi).map(|k| (a[k] / a[0]).max(1e-12).ln()).collect();
            linear_fit(&xs, &ys).map_or(f64::NAN, |(_, b)| -b)
        })
        .collect();
    let g = GROUPS as f64;
    let mean = group_rates.iter().sum::<f64>() / g;
    let var = (g - 1.0) / g * group_rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>();
    let gap = Estimate { value: rate, std_error: var.sqrt(), n: series.len(), n_eff: g };
    let bound = alpha * (1.0 - model.z * model.mayer_integral()?);
    let c0 = acf[0];
    Ok(GapReport {
        model_hash: model.hash(),
        alpha,
        z_vs_bound: (gap.value - bound) / gap.std_error,
        gap,
        bound,
        fit_window: (lo as f64 * dt, hi as f64 * dt),
        autocorrelation: acf.iter().map(|c| c / c0).collect(),
    })
}
