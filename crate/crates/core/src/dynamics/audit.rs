use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run, DynamicsSpec, Engine};
use crate::error::Result;
use crate::geometry::Point;
use crate::gibbs::{sample_gibbs, SamplerSettings};
use crate::model::{glauber_rates, kawasaki_rate, Configuration, ModelSpec};
use crate::seed;
use crate::stats::{batch_means, iid_mean, z_score, Estimate};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetailedBalanceReport {
    pub n_cases: usize,
    /// Cases where both sides vanish (hard-core targets).
    pub zero_cases: usize,
    /// Comparisons skipped because a rate with finite energies under- or
    /// overflows `f64` (near-core energies beyond about 700).
    pub unrepresentable_cases: usize,
    pub max_rel_kawasaki: f64,
    pub max_rel_glauber: f64,
    pub max_rel_energy_increment: f64,
}

impl DetailedBalanceReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_kawasaki <= tol && self.max_rel_glauber <= tol && self.max_rel_energy_increment <= tol
    }
}

/// `|a - b|` relative to the largest operand magnitude that fed into them.
fn rel(a: f64, b: f64, scale: f64) -> f64 {
    let s = a.abs().max(b.abs()).max(scale);
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

enum Balance {
    Zero,
    Unrepresentable,
    Deviation(f64),
}

/// Compares `w_a c_a` with `w_b c_b` for `w = e^{-u}`, in log space so that
/// near-overlap energies do not overflow.
fn log_balance(u_a: f64, c_a: f64, u_b: f64, c_b: f64) -> Balance {
    let lost = |u: f64, c: f64| u.is_finite() && (c == 0.0 || !c.is_finite());
    if lost(u_a, c_a) || lost(u_b, c_b) {
        return Balance::Unrepresentable;
    }
    match (!u_a.is_finite() || c_a == 0.0, !u_b.is_finite() || c_b == 0.0) {
        (true, true) => Balance::Zero,
        (false, false) => {
            let (la, lb) = (c_a.ln(), c_b.ln());
            let scale = [1.0, u_a.abs(), u_b.abs(), la.abs(), lb.abs()].into_iter().fold(0.0, f64::max);
            Balance::Deviation(rel(la - u_a, lb - u_b, scale))
        }
        _ => Balance::Deviation(1.0),
    }
}

/// Checks, on random `(gamma, x, y)`, the energy-increment identity and the
/// rate symmetries
/// `e^{-U(gamma)} c(x, y, gamma \ x) = e^{-U(gamma')} c(y, x, gamma' \ y)` and
/// `z^{|gamma|} e^{-U(gamma)} d(x, gamma) = z^{|gamma|-1} e^{-U(gamma \ x)} b(x, gamma \ x)`.
/// Deviations are measured relative to the magnitude of the energies involved,
/// since totals near a singular core carry rounding proportional to their size.
pub fn detailed_balance_audit(model: &ModelSpec, n_cases: usize, seed: u64) -> DetailedBalanceReport {
    let mut rng = seed::rng(seed);
    let dom = model.dom;
    let dim = dom.dim();
    let mut rep = DetailedBalanceReport {
        n_cases,
        zero_cases: 0,
        unrepresentable_cases: 0,
        max_rel_kawasaki: 0.0,
        max_rel_glauber: 0.0,
        max_rel_energy_increment: 0.0,
    };
    let alpha = 0.5 + rng.random::<f64>();
    let reach = model.kernel.cutoff() / model.eps;
    for _ in 0..n_cases {
        let n = rng.random_range(1..=30usize);
        let pt = |rng: &mut seed::SimRng| {
            let mut p = [0.0; 3];
            for v in p.iter_mut().take(dim) {
                *v = rng.random::<f64>() * dom.side();
            }
            p
        };
        let pts: Vec<Point> = (0..n).map(|_| pt(&mut rng)).collect();
        let gamma = Configuration::from_points(dom, model.phi.range(), pts);
        let id = rng.random_range(0..n);
        let x = gamma.points()[id];
        let mut y = x;
        for v in y.iter_mut().take(dim) {
            *v += reach * (2.0 * rng.random::<f64>() - 1.0) / (dim as f64).sqrt();
        }
        let y = dom.wrap(y);

        let u = gamma.total_energy(&model.phi);
        let mut rest = gamma.clone();
        rest.swap_remove(id);
        let u_rest = rest.total_energy(&model.phi);
        let e_x = rest.energy_at(&model.phi, &x, None);
        if u.is_finite() {
            let scale = u.abs().max(u_rest.abs());
            rep.max_rel_energy_increment = rep.max_rel_energy_increment.max(rel(u - u_rest, e_x, scale));
        }

        let mut moved = gamma.clone();
        moved.move_point(id, y);
        let u_moved = moved.total_energy(&model.phi);
        match log_balance(u, kawasaki_rate(model, &gamma, id, &y), u_moved, kawasaki_rate(model, &moved, id, &x)) {
            Balance::Zero => rep.zero_cases += 1,
            Balance::Unrepresentable => rep.unrepresentable_cases += 1,
            Balance::Deviation(r) => rep.max_rel_kawasaki = rep.max_rel_kawasaki.max(r),
        }

        let d = if u.is_finite() { glauber_rates(model, &gamma, &x, Some(id), alpha).death_rate } else { 0.0 };
        let b = glauber_rates(model, &rest, &x, None, alpha).birth_density;
        match log_balance(u, model.z * d, u_rest, b) {
            Balance::Deviation(r) => rep.max_rel_glauber = rep.max_rel_glauber.max(r),
            Balance::Unrepresentable => rep.unrepresentable_cases += 1,
            Balance::Zero => {}
        }
    }
    rep
}

/// One audited statistic: dynamics time average against the Gibbs value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditStat {
    pub name: String,
    pub dynamics: Estimate,
    pub gibbs: Estimate,
    pub z_score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub engine: Engine,
    pub horizon: f64,
    pub n_replicas: usize,
    pub stats: Vec<AuditStat>,
    pub max_abs_z: f64,
}

impl StationarityReport {
    pub fn passes(&self, k: f64) -> bool {
        self.max_abs_z < k
    }
}

fn observables(c: &Configuration, model: &ModelSpec, edges: &[f64]) -> Vec<f64> {
    let v = model.dom.volume();
    let mut out = vec![c.len() as f64 / v, c.total_energy(&model.phi) / v];
    let p = c.points();
    let mut bins = vec![0.0; edges.len() - 1];
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            let r = model.dom.dist(&p[i], &p[j]);
            if r > edges[0] && r <= edges[edges.len() - 1] {
                let b = edges.partition_point(|e| *e < r).saturating_sub(1).min(bins.len() - 1);
                bins[b] += 2.0;
            }
        }
    }
    for (b, cnt) in bins.iter().enumerate() {
        out.push(cnt / (v * model.dom.shell_volume(edges[b], edges[b + 1])));
    }
    out
}

/// Runs `n_replicas` trajectories of length `horizon` from independent Gibbs
/// samples and compares time averages of density (Glauber only), energy per
/// volume and binned `k2` with Gibbs estimates from an independent chain.
pub fn stationarity_audit(
    model: &ModelSpec,
    engine: Engine,
    horizon: f64,
    n_replicas: usize,
    edges: &[f64],
    sampler: &SamplerSettings,
    seed: u64,
) -> Result<StationarityReport> {
    let reference = sample_gibbs(model, &SamplerSettings { seed: seed::split(seed, 0), ..sampler.clone() })?;
    let starts = sample_gibbs(
        model,
        &SamplerSettings { seed: seed::split(seed, 1), n_samples: n_replicas, ..sampler.clone() },
    )?;
    let n_snap = 100;
    let times: Vec<f64> = (0..n_snap).map(|i| horizon * (i as f64 + 0.5) / n_snap as f64).collect();
    let spec = DynamicsSpec::new(model, engine, horizon).with_snapshots(times);
    let per_replica: Vec<Vec<f64>> = starts
        .configs
        .par_iter()
        .enumerate()
        .map(|(i, c0)| -> Result<Vec<f64>> {
            let traj = run(c0, &spec, seed::split(seed, 2 + i as u64))?;
            let mut acc: Vec<f64> = Vec::new();
            for (_, c) in &traj.snapshots {
                let o = observables(c, model, edges);
                if acc.is_empty() {
                    acc = o;
                } else {
                    acc.iter_mut().zip(o).for_each(|(a, b)| *a += b);
                }
            }
            Ok(acc.into_iter().map(|a| a / n_snap as f64).collect())
        })
        .collect::<Result<_>>()?;

    let ref_obs: Vec<Vec<f64>> = reference.configs.iter().map(|c| observables(c, model, edges)).collect();
    let n_obs = 2 + edges.len() - 1;
    let mut names = vec!["density".to_string(), "energy_per_volume".to_string()];
    names.extend(edges.windows(2).map(|w| format!("k2[{:.3},{:.3}]", w[0], w[1])));
    let mut stats = Vec::new();
    let start = if matches!(engine, Engine::Kawasaki) { 1 } else { 0 };
    for (k, name) in names.into_iter().enumerate().take(n_obs).skip(start) {
        let dyn_vals: Vec<f64> = per_replica.iter().map(|v| v[k]).collect();
        let gibbs_vals: Vec<f64> = ref_obs.iter().map(|v| v[k]).collect();
        let d = iid_mean(&dyn_vals)?;
        let g = batch_means(&gibbs_vals)?;
        let z = z_score(d.value - g.value, (d.std_error.powi(2) + g.std_error.powi(2)).sqrt());
        stats.push(AuditStat { name, dynamics: d, gibbs: g, z_score: z });
    }
    let max_abs_z = stats.iter().map(|s| s.z_score.abs()).fold(0.0, f64::max);
    Ok(StationarityReport { engine, horizon, n_replicas, stats, max_abs_z })
}
