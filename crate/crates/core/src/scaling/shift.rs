use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::geometry::Point;
use crate::gibbs::GibbsSamples;
use crate::stats::{jackknife, z_score, Estimate};
use crate::testfn::{Shape, TestFunction};

const TRANSLATIONS: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftRow {
    pub eps: f64,
    /// Shifted points `x/eps + x'` and `y/eps + y'`, wrapped.
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    /// Points at least `L/4` apart from each other and from the support of `psi`.
    pub admissible: bool,
    /// `E[exp(-E(p1) - E(p2) + <psi>)]`.
    pub double: Estimate,
    /// `E[exp(-E(p1) + <psi>)]`.
    pub single: Estimate,
    /// `double - (k1/z)^2 E[e^<psi>]`, jackknifed jointly.
    pub double_diff: Estimate,
    /// `single - (k1/z) E[e^<psi>]`.
    pub single_diff: Estimate,
    pub z_double: f64,
    pub z_single: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyShiftReport {
    pub double_limit: Estimate,
    pub single_limit: Estimate,
    pub rows: Vec<ShiftRow>,
}

impl EnergyShiftReport {
    /// Smallest `eps` whose geometry is admissible.
    pub fn smallest_admissible(&self) -> Option<&ShiftRow> {
        self.rows.iter().filter(|r| r.admissible).min_by(|a, b| a.eps.total_cmp(&b.eps))
    }
}

fn translate(f: &TestFunction, t: &Point) -> TestFunction {
    let shapes = f
        .shapes
        .iter()
        .map(|s| match s {
            Shape::Bump { center, radius, height } => Shape::Bump {
                center: center.iter().enumerate().map(|(k, c)| c + t[k]).collect(),
                radius: *radius,
                height: *height,
            },
            Shape::Step { lo, hi, height } => Shape::Step {
                lo: lo.iter().enumerate().map(|(k, c)| c + t[k]).collect(),
                hi: hi.iter().enumerate().map(|(k, c)| c + t[k]).collect(),
                height: *height,
            },
        })
        .collect();
    TestFunction { shapes }
}

/// Monte Carlo estimates of
/// `E[exp(-E(x/eps+x', gamma) - E(y/eps+y', gamma) + <psi, gamma>)]` and its
/// single-point analogue, against `(k1/z)^2 E[e^<psi>]` and `(k1/z) E[e^<psi>]`.
/// Each sample is averaged over 16 rigid translations of the whole setup.
pub fn energy_shift_limit_check(
    psi: &TestFunction,
    x: &Point,
    xp: &Point,
    y: &Point,
    yp: &Point,
    eps_list: &[f64],
    samples: &GibbsSamples,
) -> Result<EnergyShiftReport> {
    let m = &samples.model;
    let dom = m.dom;
    let dim = dom.dim();
    let l = dom.side();
    if dom.dist(x, y) == 0.0 {
        return Err(SimError::Invalid("x and y must differ".into()));
    }
    psi.validate(&dom)?;
    let v = dom.volume();
    let translations: Vec<Point> = (0..TRANSLATIONS)
        .map(|k| {
            let mut t = [0.0; 3];
            for (j, c) in t.iter_mut().enumerate().take(dim) {
                // low-discrepancy offsets per axis
                *c = l * ((k as f64 * (0.618_033_988_75 + 0.414_213_562_37 * j as f64)) % 1.0);
            }
            t
        })
        .collect();
    let psis: Vec<TestFunction> = translations.iter().map(|t| translate(psi, t)).collect();
    let density: Vec<f64> = samples.configs.iter().map(|c| c.len() as f64 / v).collect();
    let epsi: Vec<f64> = samples
        .configs
        .iter()
        .map(|c| psis.iter().map(|p| p.pair(c.points(), &dom).exp()).sum::<f64>() / TRANSLATIONS as f64)
        .collect();
    let z = m.z;
    let double_limit = jackknife(&[&density, &epsi], |mu| (mu[0] / z).powi(2) * mu[1])?;
    let single_limit = jackknife(&[&density, &epsi], |mu| mu[0] / z * mu[1])?;
    let (slo, shi) = psi.support_box(&dom);
    let mut centre = [0.0; 3];
    let mut half = 0.0f64;
    for k in 0..dim {
        centre[k] = 0.5 * (slo[k] + shi[k]);
        half = half.max(0.5 * (shi[k] - slo[k]));
    }
    let mut rows = Vec::new();
    for &eps in eps_list {
        let mut p1 = [0.0; 3];
        let mut p2 = [0.0; 3];
        for k in 0..dim {
            p1[k] = x[k] / eps + xp[k];
            p2[k] = y[k] / eps + yp[k];
        }
        let p1 = dom.wrap(p1);
        let p2 = dom.wrap(p2);
        let sep = l / 4.0;
        let far_from_psi = |p: &Point| psi.is_zero() || dom.dist(p, &centre) - half * (dim as f64).sqrt() >= sep;
        let admissible = dom.dist(&p1, &p2) >= sep && far_from_psi(&p1) && far_from_psi(&p2);
        let mut dbl = Vec::with_capacity(samples.len());
        let mut sgl = Vec::with_capacity(samples.len());
        for c in &samples.configs {
            let (mut a, mut b) = (0.0, 0.0);
            for (t, ps) in translations.iter().zip(&psis) {
                let mut q1 = p1;
                let mut q2 = p2;
                for k in 0..dim {
                    q1[k] += t[k];
                    q2[k] += t[k];
                }
                let e1 = c.energy_at(&m.phi, &q1, None);
                let e2 = c.energy_at(&m.phi, &q2, None);
                let w = ps.pair(c.points(), &dom).exp();
                let s1 = if e1 == f64::INFINITY { 0.0 } else { (-e1).exp() };
                let s2 = if e2 == f64::INFINITY { 0.0 } else { (-e2).exp() };
                a += s1 * s2 * w;
                b += s1 * w;
            }
            dbl.push(a / TRANSLATIONS as f64);
            sgl.push(b / TRANSLATIONS as f64);
        }
        let double = jackknife(&[&dbl], |mu| mu[0])?;
        let single = jackknife(&[&sgl], |mu| mu[0])?;
        let double_diff = jackknife(&[&dbl, &density, &epsi], |mu| mu[0] - (mu[1] / z).powi(2) * mu[2])?;
        let single_diff = jackknife(&[&sgl, &density, &epsi], |mu| mu[0] - mu[1] / z * mu[2])?;
        rows.push(ShiftRow {
            eps,
            p1: p1[..dim].to_vec(),
            p2: p2[..dim].to_vec(),
            admissible,
            z_double: z_score(double_diff.value, double_diff.std_error),
            z_single: z_score(single_diff.value, single_diff.std_error),
            double,
            single,
            double_diff,
            single_diff,
        });
    }
    Ok(EnergyShiftReport { double_limit, single_limit, rows })
}
