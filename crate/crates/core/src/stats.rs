//! Monte Carlo estimates and the statistical tests used by the validators.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// A Monte Carlo value with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    /// Number of raw samples.
    pub n: usize,
    /// Effective sample size implied by the error bar.
    pub n_eff: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, std_error: 0.0, n: 1, n_eff: f64::INFINITY }
    }

    /// `(self - target) / std_error`; infinite when the error is zero and the
    /// values differ.
    pub fn z_against(&self, target: f64) -> f64 {
        z_score(self.value - target, self.std_error)
    }

    pub fn within_sigma(&self, target: f64, k: f64) -> bool {
        self.z_against(target).abs() < k
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { value: c * self.value, std_error: c.abs() * self.std_error, ..*self }
    }
}

pub fn z_score(diff: f64, sigma: f64) -> f64 {
    if sigma > 0.0 {
        diff / sigma
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

/// Number of batches used for `n` samples: between 20 and 100.
pub fn batch_count(n: usize) -> usize {
    ((n as f64).sqrt() as usize).clamp(20, 100)
}

/// Means of `n_batches` contiguous batches; a trailing remainder is dropped.
pub fn batch_means_of(xs: &[f64], n_batches: usize) -> Vec<f64> {
    let m = xs.len() / n_batches;
    (0..n_batches).map(|b| xs[b * m..(b + 1) * m].iter().sum::<f64>() / m as f64).collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_var(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Batch-means estimate of `E[x]` for a (possibly autocorrelated) series.
pub fn batch_means(xs: &[f64]) -> Result<Estimate> {
    let n = xs.len();
    if n < 20 {
        return Err(SimError::InsufficientData(format!("batch means need at least 20 samples, got {n}")));
    }
    let b = batch_count(n);
    let bm = batch_means_of(xs, b);
    let value = mean(&bm);
    let se = (sample_var(&bm) / b as f64).sqrt();
    let var = if n > 1 { sample_var(xs) } else { 0.0 };
    let n_eff = if se > 0.0 { var / (se * se) } else { n as f64 };
    Ok(Estimate { value, std_error: se, n, n_eff })
}

/// Batch-level jackknife for a smooth function of several series means.
/// All series must have the same length.
pub fn jackknife(series: &[&[f64]], f: impl Fn(&[f64]) -> f64) -> Result<Estimate> {
    let n = series.first().map_or(0, |s| s.len());
    if n < 20 || series.iter().any(|s| s.len() != n) {
        return Err(SimError::InsufficientData("jackknife needs equal-length series of at least 20 samples".into()));
    }
    let b = batch_count(n);
    let bms: Vec<Vec<f64>> = series.iter().map(|s| batch_means_of(s, b)).collect();
    let totals: Vec<f64> = bms.iter().map(|v| v.iter().sum()).collect();
    let full: Vec<f64> = totals.iter().map(|t| t / b as f64).collect();
    let value = f(&full);
    let mut leave = vec![0.0; series.len()];
    let thetas: Vec<f64> = (0..b)
        .map(|i| {
            for (k, l) in leave.iter_mut().enumerate() {
                *l = (totals[k] - bms[k][i]) / (b - 1) as f64;
            }
            f(&leave)
        })
        .collect();
    let tbar = mean(&thetas);
    let var = (b as f64 - 1.0) / b as f64 * thetas.iter().map(|t| (t - tbar) * (t - tbar)).sum::<f64>();
    Ok(Estimate { value, std_error: var.sqrt(), n, n_eff: b as f64 })
}

/// Estimate from independent replicas: mean and `sd / sqrt(n)`.
pub fn iid_mean(xs: &[f64]) -> Result<Estimate> {
    let n = xs.len();
    if n < 2 {
        return Err(SimError::InsufficientData("need at least 2 replicas".into()));
    }
    let se = (sample_var(xs) / n as f64).sqrt();
    Ok(Estimate { value: mean(xs), std_error: se, n, n_eff: n as f64 })
}

/// Integrated autocorrelation time with Sokal's automatic window (`c = 5`).
pub fn integrated_autocorr_time(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return 1.0;
    }
    let m = mean(xs);
    let c0 = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
    if c0 <= 0.0 {
        return 1.0;
    }
    let mut tau = 1.0;
    for lag in 1..n / 2 {
        let c = (0..n - lag).map(|i| (xs[i] - m) * (xs[i + lag] - m)).sum::<f64>() / n as f64;
        tau += 2.0 * c / c0;
        if lag as f64 >= 5.0 * tau {
            break;
        }
    }
    tau.max(1.0)
}

/// Autocovariance at lags `0..=max_lag`, pooled over independent series that
/// share one global mean.
pub fn pooled_autocovariance(series: &[Vec<f64>], max_lag: usize) -> Vec<f64> {
    let total: usize = series.iter().map(|s| s.len()).sum();
    let m = series.iter().flat_map(|s| s.iter()).sum::<f64>() / total as f64;
    (0..=max_lag)
        .map(|lag| {
            let mut acc = 0.0;
            let mut cnt = 0usize;
            for s in series {
                if s.len() > lag {
                    for i in 0..s.len() - lag {
                        acc += (s[i] - m) * (s[i + lag] - m);
                    }
                    cnt += s.len() - lag;
                }
            }
            if cnt == 0 { f64::NAN } else { acc / cnt as f64 }
        })
        .collect()
}

/// Least squares `y = a + b x`; returns `(a, b)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return None;
    }
    let mx = mean(xs);
    let my = mean(ys);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    Some((my - b * mx, b))
}

/// Asymptotic Kolmogorov tail `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let t = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { t } else { -t };
        if t < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

fn ks_p(d: f64, n_eff: f64) -> f64 {
    let sq = n_eff.sqrt();
    kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample KS test against a continuous CDF.
pub fn ks_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in v.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    KsResult { statistic: d, p_value: ks_p(d, n) }
}

/// Two-sample KS statistic `sup |F_a - F_b|` (ties handled jointly).
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Two-sample KS test with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let d = ks_statistic(a, b);
    let (n, m) = (a.len() as f64, b.len() as f64);
    KsResult { statistic: d, p_value: ks_p(d, n * m / (n + m)) }
}

/// Directions used to write the Euclidean norm in `R^k` as an average of
/// projections: `|v| = c_k * mean_theta |<theta, v>|`.
fn projection_dirs(k: usize) -> (Vec<Vec<f64>>, f64) {
    match k {
        1 => (vec![vec![1.0]], 1.0),
        2 => {
            let n = 90;
            let dirs = (0..n)
                .map(|i| {
                    let t = std::f64::consts::PI * i as f64 / n as f64;
                    vec![t.cos(), t.sin()]
                })
                .collect::<Vec<_>>();
            // mean of |cos| over a half circle is 2/pi
            let c = 1.0 / mean_abs_cos_grid(n);
            (dirs, c)
        }
        _ => {
            // Fibonacci sphere on the upper hemisphere
            let n = 400;
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            let dirs: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    let zc = (i as f64 + 0.5) / n as f64;
                    let r = (1.0 - zc * zc).sqrt();
                    let t = golden * i as f64;
                    vec![r * t.cos(), r * t.sin(), zc]
                })
                .collect();
            let mut pad = dirs.clone();
            for d in pad.iter_mut() {
                d.resize(k, 0.0);
            }
            (pad, 2.0)
        }
    }
}

fn mean_abs_cos_grid(n: usize) -> f64 {
    (0..n).map(|i| (std::f64::consts::PI * i as f64 / n as f64).cos().abs()).sum::<f64>() / n as f64
}

/// Sum over unordered pairs of `|z_i - z_j|` within each group, for sorted
/// projections `sorted` with group labels.
fn within_group_sums(sorted: &[(f64, u32)], labels: &[bool]) -> (f64, f64) {
    let (mut cnt, mut sum, mut tot) = ([0f64; 2], [0f64; 2], [0f64; 2]);
    for &(v, idx) in sorted {
        let g = labels[idx as usize] as usize;
        tot[g] += v * cnt[g] - sum[g];
        cnt[g] += 1.0;
        sum[g] += v;
    }
    (tot[0], tot[1])
}

/// Energy-distance test between two multivariate samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyTest {
    /// Unbiased (U-statistic) energy distance; may be slightly negative.
    pub statistic: f64,
    pub p_value: f64,
    pub permutations: usize,
}

/// Energy distance `2E|X-Y| - E|X-X'| - E|Y-Y'|` with a permutation p-value.
///
/// Pairwise norms are computed through sorted one-dimensional projections, so
/// each permutation costs `O(n)` per direction; the pooled total is fixed, so
/// only within-group sums change under relabelling.
pub fn energy_distance_test<R: Rng + ?Sized>(
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    permutations: usize,
    rng: &mut R,
) -> Result<EnergyTest> {
    let (n, m) = (x.len(), y.len());
    if n < 2 || m < 2 {
        return Err(SimError::InsufficientData("energy distance needs at least 2 points per group".into()));
    }
    let k = x[0].len();
    let (dirs, c) = projection_dirs(k);
    let pooled: Vec<&Vec<f64>> = x.iter().chain(y.iter()).collect();
    let sorted: Vec<Vec<(f64, u32)>> = dirs
        .iter()
        .map(|d| {
            let mut p: Vec<(f64, u32)> = pooled
                .iter()
                .enumerate()
                .map(|(i, v)| (v.iter().zip(d).map(|(a, b)| a * b).sum::<f64>(), i as u32))
                .collect();
            p.sort_by(|a, b| a.0.total_cmp(&b.0));
            p
        })
        .collect();
    let total: f64 = sorted
        .iter()
        .map(|s| s.iter().enumerate().map(|(i, (v, _))| v * (2.0 * i as f64 - (s.len() as f64 - 1.0))).sum::<f64>())
        .sum::<f64>()
        * c
        / dirs.len() as f64;
    let stat = |labels: &[bool]| {
        let (mut sx, mut sy) = (0.0, 0.0);
        for s in &sorted {
            let (a, b) = within_group_sums(s, labels);
            sx += a;
            sy += b;
        }
        sx *= c / dirs.len() as f64;
        sy *= c / dirs.len() as f64;
        let sxy = total - sx - sy;
        let (nf, mf) = (n as f64, m as f64);
        2.0 * sxy / (nf * mf) - 2.0 * sx / (nf * (nf - 1.0)) - 2.0 * sy / (mf * (mf - 1.0))
    };
    let mut labels: Vec<bool> = (0..n + m).map(|i| i >= n).collect();
    let observed = stat(&labels);
    let mut exceed = 0usize;
    for _ in 0..permutations {
        labels.shuffle(rng);
        if stat(&labels) >= observed {
            exceed += 1;
        }
    }
    Ok(EnergyTest {
        statistic: observed,
        p_value: (exceed + 1) as f64 / (permutations + 1) as f64,
        permutations,
    })
}
