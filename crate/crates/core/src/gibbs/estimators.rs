use serde::{Deserialize, Serialize};

use super::GibbsSamples;
use crate::error::{Result, SimError};
use crate::geometry::Point;
use crate::stats::{batch_means, jackknife, Estimate};
use crate::testfn::TestFunction;

fn require(samples: &GibbsSamples, n: usize) -> Result<()> {
    if samples.len() < n {
        return Err(SimError::InsufficientData(format!("need at least {n} samples, got {}", samples.len())));
    }
    Ok(())
}

/// Density `k1 = E|gamma| / V`.
pub fn estimate_k1(samples: &GibbsSamples) -> Result<Estimate> {
    require(samples, 100)?;
    let v = samples.model.dom.volume();
    let xs: Vec<f64> = samples.configs.iter().map(|c| c.len() as f64 / v).collect();
    batch_means(&xs)
}

/// Density of points in the box `[lo, hi)` (wrapped coordinates).
pub fn estimate_density_in(samples: &GibbsSamples, lo: &Point, hi: &Point) -> Result<Estimate> {
    require(samples, 100)?;
    let dim = samples.model.dom.dim();
    let vol: f64 = (0..dim).map(|k| hi[k] - lo[k]).product();
    let xs: Vec<f64> = samples
        .configs
        .iter()
        .map(|c| c.points().iter().filter(|p| (0..dim).all(|k| p[k] >= lo[k] && p[k] < hi[k])).count() as f64 / vol)
        .collect();
    batch_means(&xs)
}

/// Per-sample ordered-pair counts in each radial bin, laid out bin-major.
pub fn pair_count_series(samples: &GibbsSamples, edges: &[f64]) -> Vec<Vec<f64>> {
    let dom = samples.model.dom;
    let nb = edges.len() - 1;
    let r_max = edges[nb];
    let mut out = vec![vec![0.0; samples.len()]; nb];
    for (s, c) in samples.configs.iter().enumerate() {
        let p = c.points();
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                let r = dom.dist(&p[i], &p[j]);
                if r > edges[0] && r <= r_max {
                    let b = edges.partition_point(|e| *e < r).saturating_sub(1).min(nb - 1);
                    out[b][s] += 2.0;
                }
            }
        }
    }
    out
}

/// Radial pair correlation `k2(r)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairCorrelation {
    pub edges: Vec<f64>,
    /// `None` marks a bin with no observed pairs.
    pub k2: Vec<Option<Estimate>>,
    /// Total ordered pairs observed per bin.
    pub counts: Vec<u64>,
}

impl PairCorrelation {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

/// `n_bins` equal bins on `(0, L/2]`.
pub fn default_edges(l: f64, n_bins: usize) -> Vec<f64> {
    (0..=n_bins).map(|i| 0.5 * l * i as f64 / n_bins as f64).collect()
}

/// Histogram estimator normalized so that the ideal gas gives `z^2`.
pub fn estimate_k2(samples: &GibbsSamples, edges: &[f64]) -> Result<PairCorrelation> {
    require(samples, 100)?;
    let dom = samples.model.dom;
    let series = pair_count_series(samples, edges);
    let mut k2 = Vec::new();
    let mut counts = Vec::new();
    for (b, s) in series.iter().enumerate() {
        let norm = dom.volume() * dom.shell_volume(edges[b], edges[b + 1]);
        let total: f64 = s.iter().sum();
        counts.push(total as u64);
        k2.push(if total > 0.0 { Some(batch_means(s)?.scale(1.0 / norm)) } else { None });
    }
    Ok(PairCorrelation { edges: edges.to_vec(), k2, counts })
}

/// `u2(r) = k2(r) - k1^2` per bin, with a jackknife error.
pub fn estimate_ursell2(samples: &GibbsSamples, edges: &[f64]) -> Result<Vec<Option<Estimate>>> {
    require(samples, 100)?;
    let dom = samples.model.dom;
    let v = dom.volume();
    let dens: Vec<f64> = samples.configs.iter().map(|c| c.len() as f64 / v).collect();
    let series = pair_count_series(samples, edges);
    series
        .iter()
        .enumerate()
        .map(|(b, s)| {
            if s.iter().all(|x| *x == 0.0) {
                return Ok(None);
            }
            let norm = v * dom.shell_volume(edges[b], edges[b + 1]);
            jackknife(&[s, &dens], |m| m[0] / norm - m[1] * m[1]).map(Some)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuelleReport {
    pub xi_hat: f64,
    pub k1: Estimate,
    /// Bins where `k2` exceeds `xi_hat^2` by more than three standard errors.
    pub violations: Vec<usize>,
    pub k2: PairCorrelation,
}

/// Empirical Ruelle constant `max(k1, max_r sqrt(k2 + 3 sigma))`.
pub fn ruelle_probe(samples: &GibbsSamples, edges: &[f64]) -> Result<RuelleReport> {
    let k1 = estimate_k1(samples)?;
    let k2 = estimate_k2(samples, edges)?;
    let upper = k2.k2.iter().flatten().map(|e| (e.value + 3.0 * e.std_error).max(0.0).sqrt()).fold(0.0, f64::max);
    let xi_hat = k1.value.max(upper);
    let violations = k2
        .k2
        .iter()
        .enumerate()
        .filter_map(|(i, e)| e.filter(|e| e.value - 3.0 * e.std_error > xi_hat * xi_hat).map(|_| i))
        .collect();
    Ok(RuelleReport { xi_hat, k1, violations, k2 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpMomentResult {
    /// Monte Carlo `E exp<f, gamma>`.
    pub mc: Estimate,
    /// `exp(z int (e^f - 1))`, exact for the ideal gas.
    pub poisson_value: f64,
    /// `1 + int h k1 + 1/2 int int h h k2` with `h = e^f - 1`.
    pub series2: Estimate,
    /// `E[e^<f,gamma> - series2 term]` with its batch-means error.
    pub difference: Estimate,
    /// `xi^3 ||h||_1^3 e^{xi ||h||_1} / 3!`.
    pub truncation_budget: f64,
    pub h_l1: f64,
    pub consistent: bool,
}

/// Exponential moment and its two-term correlation-function expansion.
///
/// The series terms use the factorial-moment identities
/// `E sum h(x) = int h k1` and `E sum_{x != y} h(x) h(y) = int int h h k2`,
/// estimated from the same samples, so the comparison error is the batch
/// error of the per-sample difference.
pub fn exp_moment(samples: &GibbsSamples, f: &TestFunction, xi: f64) -> Result<ExpMomentResult> {
    require(samples, 100)?;
    let m = &samples.model;
    let dom = m.dom;
    let (lo, hi) = f.support_box(&dom);
    let breaks = f.axis_breaks(&dom);
    let policy = crate::quadrature::QuadPolicy::default();
    let h_int = crate::quadrature::integrate_box(dom.dim(), &lo, &hi, &breaks, &policy, |x| f.eval(x, &dom).exp() - 1.0)?.value;
    let h_l1 = crate::quadrature::integrate_box(dom.dim(), &lo, &hi, &breaks, &policy, |x| (f.eval(x, &dom).exp() - 1.0).abs())?.value;
    let mut mc = Vec::with_capacity(samples.len());
    let mut ser = Vec::with_capacity(samples.len());
    for c in &samples.configs {
        let vals: Vec<f64> = c.points().iter().map(|p| f.eval(p, &dom)).collect();
        let e = vals.iter().sum::<f64>().exp();
        let hs: Vec<f64> = vals.iter().map(|v| v.exp() - 1.0).collect();
        let s1: f64 = hs.iter().sum();
        let s2: f64 = hs.iter().map(|h| h * h).sum();
        mc.push(e);
        ser.push(1.0 + s1 + 0.5 * (s1 * s1 - s2));
    }
    let diff: Vec<f64> = mc.iter().zip(&ser).map(|(a, b)| a - b).collect();
    let mc_e = batch_means(&mc)?;
    let ser_e = batch_means(&ser)?;
    let diff_e = batch_means(&diff)?;
    let budget = (xi * h_l1).powi(3) * (xi * h_l1).exp() / 6.0;
    let consistent = diff_e.value.abs() <= 3.0 * diff_e.std_error + budget;
    Ok(ExpMomentResult {
        mc: mc_e,
        poisson_value: (m.z * h_int).exp(),
        series2: ser_e,
        difference: diff_e,
        truncation_budget: budget,
        h_l1,
        consistent,
    })
}
