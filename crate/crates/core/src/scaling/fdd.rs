use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{run, DynamicsSpec, Engine};
use crate::error::{Result, SimError};
use crate::gibbs::{estimate_k1, sample_gibbs, GibbsSamples, SamplerSettings};
use crate::model::{alpha_from_k1, ModelSpec};
use crate::seed;
use crate::stats::{energy_distance_test, ks_two_sample, EnergyTest, KsResult};
use crate::testfn::TestFunction;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FddSettings {
    /// One test function per time, or a single one used at every time.
    pub tests: Vec<TestFunction>,
    /// `0 <= t_1 < ... < t_n`, `n <= 3`.
    pub times: Vec<f64>,
    pub eps_list: Vec<f64>,
    /// Death rate of the birth-death baseline; `None` uses `k1 ||a||_1 / z`.
    pub alpha: Option<f64>,
    /// Whether `times` are in units of `1/alpha`.
    #[serde(default)]
    pub times_in_alpha_units: bool,
    pub n_replicas: usize,
    pub seed: u64,
    #[serde(default)]
    pub sampler: SamplerSettings,
    #[serde(default = "default_permutations")]
    pub permutations: usize,
}

fn default_permutations() -> usize {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FddEpsRow {
    pub eps: f64,
    /// Joint law of `(<phi_1, X(t_1)>, ..., <phi_n, X(t_n)>)`.
    pub energy: EnergyTest,
    /// Per-time marginals.
    pub marginal_ks: Vec<KsResult>,
    /// `<phi_j, X(t_j)> - <phi_j, X(0)>` per time.
    pub increment_ks: Vec<KsResult>,
    /// `<phi_1, X(0)>`, which has law `mu` for every engine.
    pub initial_ks: KsResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FddReport {
    pub model_hash: String,
    pub alpha: f64,
    /// Absolute times.
    pub times: Vec<f64>,
    pub n_replicas: usize,
    pub rows: Vec<FddEpsRow>,
}

impl FddReport {
    pub fn first(&self) -> Option<&FddEpsRow> {
        self.rows.iter().max_by(|a, b| a.eps.total_cmp(&b.eps))
    }

    pub fn last(&self) -> Option<&FddEpsRow> {
        self.rows.iter().min_by(|a, b| a.eps.total_cmp(&b.eps))
    }
}

/// Per-replica observables: values at `t_j` then values at time 0.
fn observe(model: &ModelSpec, engine: Engine, times: &[f64], tests: &[TestFunction], starts: &GibbsSamples, root: u64) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let horizon = *times.last().unwrap_or(&0.0);
    let spec = DynamicsSpec::new(model, engine, horizon).with_snapshots(times.to_vec());
    let dom = model.dom;
    starts
        .configs
        .par_iter()
        .enumerate()
        .map(|(i, c0)| {
            let traj = run(c0, &spec, seed::split(root, i as u64))?;
            let at: Vec<f64> = traj.snapshots.iter().zip(tests).map(|((_, c), f)| f.pair(c.points(), &dom)).collect();
            let zero: Vec<f64> = tests.iter().map(|f| f.pair(c0.points(), &dom)).collect();
            Ok((at, zero))
        })
        .collect()
}

/// Compares finite-dimensional laws of `<phi, X(t)>` under the hop dynamics
/// at each `eps` with the birth-death dynamics, all started from `mu`.
pub fn fdd_compare(model: &ModelSpec, settings: &FddSettings) -> Result<FddReport> {
    let n_t = settings.times.len();
    if n_t == 0 || n_t > 3 {
        return Err(SimError::Invalid("fdd needs between 1 and 3 times".into()));
    }
    if settings.times.windows(2).any(|w| w[1] <= w[0]) || settings.times[0] < 0.0 {
        return Err(SimError::Invalid("fdd times must be increasing and >= 0".into()));
    }
    if settings.n_replicas < 500 {
        return Err(SimError::InsufficientData(format!("fdd needs at least 500 replicas, got {}", settings.n_replicas)));
    }
    let tests: Vec<TestFunction> = match settings.tests.len() {
        1 => vec![settings.tests[0].clone(); n_t],
        k if k == n_t => settings.tests.clone(),
        k => return Err(SimError::Invalid(format!("got {k} test functions for {n_t} times"))),
    };
    for t in &tests {
        t.validate(&model.dom)?;
    }
    let root = settings.seed;
    let draw = |k: u64| {
        sample_gibbs(model, &SamplerSettings { seed: seed::split(root, k), n_samples: settings.n_replicas, ..settings.sampler.clone() })
    };
    let base_starts = draw(0)?;
    let alpha = match settings.alpha {
        Some(a) => a,
        None => alpha_from_k1(estimate_k1(&base_starts)?.value, model.z, &model.kernel),
    };
    let times: Vec<f64> =
        settings.times.iter().map(|t| if settings.times_in_alpha_units { t / alpha } else { *t }).collect();
    let base = observe(model, Engine::Glauber { alpha }, &times, &tests, &base_starts, seed::split(root, 100))?;
    let base_joint: Vec<Vec<f64>> = base.iter().map(|(a, _)| a.clone()).collect();
    let mut perm_rng = seed::child(root, 999);
    let mut rows = Vec::new();
    for (e, &eps) in settings.eps_list.iter().enumerate() {
        let m = model.with_eps(eps)?;
        let starts = draw(1 + e as u64)?;
        let obs = observe(&m, Engine::Kawasaki, &times, &tests, &starts, seed::split(root, 200 + e as u64))?;
        let joint: Vec<Vec<f64>> = obs.iter().map(|(a, _)| a.clone()).collect();
        let energy = energy_distance_test(&joint, &base_joint, settings.permutations, &mut perm_rng)?;
        let column = |v: &[(Vec<f64>, Vec<f64>)], j: usize, inc: bool| -> Vec<f64> {
            v.iter().map(|(a, z)| if inc { a[j] - z[j] } else { a[j] }).collect()
        };
        let marginal_ks = (0..n_t).map(|j| ks_two_sample(&column(&obs, j, false), &column(&base, j, false))).collect();
        let increment_ks = (0..n_t).map(|j| ks_two_sample(&column(&obs, j, true), &column(&base, j, true))).collect();
        let z0 = |v: &[(Vec<f64>, Vec<f64>)]| -> Vec<f64> { v.iter().map(|(_, z)| z[0]).collect() };
        let initial_ks = ks_two_sample(&z0(&obs), &z0(&base));
        rows.push(FddEpsRow { eps, energy, marginal_ks, increment_ks, initial_ks });
    }
    Ok(FddReport { model_hash: model.hash(), alpha, times, n_replicas: settings.n_replicas, rows })
}
