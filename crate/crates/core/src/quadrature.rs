//! Deterministic integration with a built-in resolution check: every result
//! is compared with the same rule at twice the resolution and refused when
//! the two disagree by more than the relative tolerance.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::geometry::{unit_sphere_area, Point};

const GL_X: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL_W: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadPolicy {
    /// Accepted relative disagreement between a rule and its doubling.
    pub rel_tol: f64,
    /// Maximum number of doublings per segment (d = 1) or per grid (d = 2).
    pub max_doublings: u32,
    /// Quasi Monte Carlo points in d = 3.
    pub qmc_points: usize,
}

impl Default for QuadPolicy {
    fn default() -> Self {
        Self { rel_tol: 1e-4, max_doublings: 12, qmc_points: 4096 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    /// Difference between the two finest resolutions (d <= 2) or the
    /// half-sample discrepancy (d = 3).
    pub abs_error: f64,
}

/// Composite 8-point Gauss-Legendre with `panels` equal panels; also returns
/// the same rule applied to `|f|`.
fn gl(a: f64, b: f64, panels: usize, f: &mut impl FnMut(f64) -> f64) -> (f64, f64) {
    let h = (b - a) / panels as f64;
    let (mut s, mut sa) = (0.0, 0.0);
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for (x, w) in GL_X.iter().zip(&GL_W) {
            let v = f(mid + 0.5 * h * x);
            s += w * v;
            sa += w * v.abs();
        }
    }
    (0.5 * h * s, 0.5 * h * sa)
}

fn sorted_cuts(lo: f64, hi: f64, breaks: &[f64]) -> Vec<f64> {
    let mut cuts = vec![lo, hi];
    let tiny = 1e-12 * (hi - lo).abs().max(1.0);
    cuts.extend(breaks.iter().copied().filter(|b| *b > lo + tiny && *b < hi - tiny));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() <= tiny);
    cuts
}

/// Adds every periodic image `b + k l` of the breakpoints that falls in `(lo, hi)`.
pub fn periodic_breaks(breaks: &[f64], lo: f64, hi: f64, l: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for &b in breaks {
        let k0 = ((lo - b) / l).floor() as i64;
        let k1 = ((hi - b) / l).ceil() as i64;
        for k in k0..=k1 {
            let v = b + k as f64 * l;
            if v > lo && v < hi {
                out.push(v);
            }
        }
    }
    out
}

/// `int_lo^hi f` for `f` smooth between the given breakpoints.
pub fn integrate_1d(lo: f64, hi: f64, breaks: &[f64], policy: &QuadPolicy, mut f: impl FnMut(f64) -> f64) -> Result<QuadResult> {
    if hi <= lo {
        return Ok(QuadResult { value: 0.0, abs_error: 0.0 });
    }
    let cuts = sorted_cuts(lo, hi, breaks);
    let mut total = 0.0;
    let mut err = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (mut coarse, _) = gl(a, b, 1, &mut f);
        let mut panels = 2;
        let mut level = 0;
        loop {
            let (fine, mag) = gl(a, b, panels, &mut f);
            let diff = (fine - coarse).abs();
            if diff <= policy.rel_tol * mag || diff <= 1e-300 {
                total += fine;
                err += diff;
                break;
            }
            level += 1;
            if level > policy.max_doublings {
                return Err(SimError::Quadrature(format!(
                    "segment [{a:.6}, {b:.6}] did not converge: doubling changed the value by {diff:.3e} (scale {mag:.3e})"
                )));
            }
            coarse = fine;
            panels *= 2;
        }
    }
    Ok(QuadResult { value: total, abs_error: err })
}

/// `int_{|x| <= r_max} f(|x|) dx` in `dim` dimensions for radial `f`, smooth
/// between the given radii (the largest break is the outer radius).
pub fn radial_integral(dim: usize, breaks: &[f64], f: impl Fn(f64) -> f64) -> Result<f64> {
    let Some(r_max) = breaks.iter().copied().fold(None, |m: Option<f64>, b| Some(m.map_or(b, |m| m.max(b)))) else {
        return Ok(0.0);
    };
    let area = unit_sphere_area(dim);
    let policy = QuadPolicy { rel_tol: 1e-10, max_doublings: 16, ..QuadPolicy::default() };
    Ok(integrate_1d(0.0, r_max, breaks, &policy, |r| area * r.powi(dim as i32 - 1) * f(r))?.value)
}

/// Integral over the box `[lo, hi]` (unwrapped coordinates; callers wrap
/// inside `f`). Axis breakpoints mark discontinuities where known.
///
/// d = 1 and d = 2 use Gauss-Legendre grids with the doubling check; d = 3
/// uses a Halton rule and reports its half-sample discrepancy as the error.
pub fn integrate_box(
    dim: usize,
    lo: &Point,
    hi: &Point,
    breaks: &[Vec<f64>],
    policy: &QuadPolicy,
    mut f: impl FnMut(&Point) -> f64,
) -> Result<QuadResult> {
    let empty: Vec<f64> = Vec::new();
    let br = |k: usize| breaks.get(k).unwrap_or(&empty);
    match dim {
        1 => integrate_1d(lo[0], hi[0], br(0), policy, |x| f(&[x, 0.0, 0.0])),
        2 => {
            let cx = sorted_cuts(lo[0], hi[0], br(0));
            let cy = sorted_cuts(lo[1], hi[1], br(1));
            let grid = |panels: usize, f: &mut dyn FnMut(&Point) -> f64| -> (f64, f64) {
                let nodes = |cuts: &[f64]| -> Vec<(f64, f64)> {
                    let mut v = Vec::new();
                    for w in cuts.windows(2) {
                        let h = (w[1] - w[0]) / panels as f64;
                        for p in 0..panels {
                            let mid = w[0] + (p as f64 + 0.5) * h;
                            for (x, wt) in GL_X.iter().zip(&GL_W) {
                                v.push((mid + 0.5 * h * x, 0.5 * h * wt));
                            }
                        }
                    }
                    v
                };
                let (nx, ny) = (nodes(&cx), nodes(&cy));
                let (mut s, mut sa) = (0.0, 0.0);
                for &(x, wx) in &nx {
                    for &(y, wy) in &ny {
                        let v = f(&[x, y, 0.0]);
                        s += wx * wy * v;
                        sa += wx * wy * v.abs();
                    }
                }
                (s, sa)
            };
            let (mut coarse, _) = grid(1, &mut f);
            let mut panels = 2;
            for _ in 0..=policy.max_doublings.min(6) {
                let (fine, mag) = grid(panels, &mut f);
                let diff = (fine - coarse).abs();
                if diff <= policy.rel_tol * mag || diff <= 1e-300 {
                    return Ok(QuadResult { value: fine, abs_error: diff });
                }
                coarse = fine;
                panels *= 2;
            }
            Err(SimError::Quadrature(format!("2-d grid did not reach relative tolerance {:.1e}", policy.rel_tol)))
        }
        _ => {
            let n = policy.qmc_points.max(2);
            let vol: f64 = (0..3).map(|k| hi[k] - lo[k]).product();
            let (mut a, mut b) = (0.0, 0.0);
            for i in 0..n {
                let u = [halton(i + 1, 2), halton(i + 1, 3), halton(i + 1, 5)];
                let p = [lo[0] + u[0] * (hi[0] - lo[0]), lo[1] + u[1] * (hi[1] - lo[1]), lo[2] + u[2] * (hi[2] - lo[2])];
                let v = f(&p);
                if i < n / 2 { a += v } else { b += v }
            }
            let half = (n / 2) as f64;
            let (ia, ib) = (vol * a / half, vol * b / (n as f64 - half));
            Ok(QuadResult { value: 0.5 * (ia + ib), abs_error: 0.5 * (ia - ib).abs() })
        }
    }
}

fn halton(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_exact_for_polynomials() {
        let r = integrate_1d(0.0, 2.0, &[], &QuadPolicy::default(), |x| x.powi(7) - 3.0 * x).unwrap();
        assert!((r.value - (256.0 / 8.0 - 6.0)).abs() < 1e-12);
    }

    #[test]
    fn piecewise_with_breaks() {
        let f = |x: f64| if x < 0.3 { 1.0 } else if x < 1.1 { (-x).exp() } else { 0.0 };
        let want = 0.3 + (-0.3f64).exp() - (-1.1f64).exp();
        let r = integrate_1d(0.0, 2.0, &[0.3, 1.1], &QuadPolicy::default(), f).unwrap();
        assert!((r.value - want).abs() < 1e-12);
    }

    #[test]
    fn unresolved_discontinuity_is_refused() {
        let policy = QuadPolicy { max_doublings: 3, ..QuadPolicy::default() };
        let r = integrate_1d(0.0, 1.0, &[], &policy, |x| if x < 0.3141 { 1.0 } else { 0.0 });
        assert!(matches!(r, Err(SimError::Quadrature(_))));
    }

    #[test]
    fn periodic_break_images() {
        let mut b = periodic_breaks(&[0.5], -3.0, 7.0, 4.0);
        b.sort_by(f64::total_cmp);
        assert_eq!(b, vec![0.5, 4.5]);
        let mut c = periodic_breaks(&[1.0], -3.0, 7.0, 4.0);
        c.sort_by(f64::total_cmp);
        assert_eq!(c, vec![1.0, 5.0]);
    }
}
