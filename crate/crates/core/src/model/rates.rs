use crate::geometry::Point;

use super::{Configuration, JumpKernel, ModelSpec};

/// `exp[s E(x, rest) - (1-s) E(y, rest)]`, with a hard-core target giving 0.
#[inline]
pub fn kawasaki_energy_factor(s: f64, e_from: f64, e_to: f64) -> f64 {
    if e_to == f64::INFINITY || e_from == f64::INFINITY {
        return 0.0;
    }
    (s * e_from - (1.0 - s) * e_to).exp()
}

/// Rate density for particle `id` of `gamma` to hop to `y`:
/// `a_eps(x - y) exp[s E(x, gamma\x) - (1-s) E(y, gamma\x)]`.
pub fn kawasaki_rate(model: &ModelSpec, gamma: &Configuration, id: usize, y: &Point) -> f64 {
    let x = gamma.points()[id];
    let kernel = model.kernel.eval_scaled(model.eps, &model.dom.min_image_disp(&x, y), &model.dom);
    if kernel == 0.0 {
        return 0.0;
    }
    let e_from = gamma.energy_of(&model.phi, id);
    let e_to = gamma.energy_at(&model.phi, y, Some(id));
    kernel * kawasaki_energy_factor(model.s, e_from, e_to)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GlauberRates {
    pub death_rate: f64,
    pub birth_density: f64,
}

/// Death rate `alpha exp[s E(x, gamma\x)]` of the point `x` when it belongs to
/// `gamma`, and birth density `alpha z exp[-(1-s) E(x, gamma)]` at `x` when it
/// does not. `member` selects which applies; the other field is `NaN`.
pub fn glauber_rates(model: &ModelSpec, gamma: &Configuration, x: &Point, member: Option<usize>, alpha: f64) -> GlauberRates {
    let s = model.s;
    match member {
        Some(id) => {
            let e = gamma.energy_of(&model.phi, id);
            GlauberRates { death_rate: alpha * (s * e).exp(), birth_density: f64::NAN }
        }
        None => {
            let e = gamma.energy_at(&model.phi, x, None);
            let f = if e == f64::INFINITY { 0.0 } else { (-(1.0 - s) * e).exp() };
            GlauberRates { death_rate: f64::NAN, birth_density: alpha * model.z * f }
        }
    }
}

/// Death rate of the limiting birth-death dynamics, `alpha = k1 ||a||_1 / z`.
pub fn alpha_from_k1(k1: f64, z: f64, kernel: &JumpKernel) -> f64 {
    k1 * kernel.mass() / z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TorusDomain;
    use crate::model::PairPotential;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(phi: PairPotential, s: f64, cap: Option<f64>) -> ModelSpec {
        ModelSpec::new(TorusDomain::new(1, 6.0).unwrap(), phi, 0.3, JumpKernel::uniform_ball(1.0), 0.5, s, cap).unwrap()
    }

    const SW: PairPotential = PairPotential::SquareWell { strength: 1.0, range: 0.5 };

    #[test]
    fn kawasaki_examples() {
        let m = model(PairPotential::Zero, 0.0, None);
        let g = Configuration::from_points(m.dom, 0.0, [[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]);
        let y = [2.5, 0.0, 0.0];
        let a = m.kernel.eval_scaled(m.eps, &m.dom.min_image_disp(&g.points()[0], &y), &m.dom);
        assert_eq!(kawasaki_rate(&m, &g, 0, &y), a);
        assert_eq!(a, 0.25);

        let m = model(SW, 0.0, None);
        let g = Configuration::from_points(m.dom, 0.5, [[1.0, 0.0, 0.0], [2.2, 0.0, 0.0]]);
        let r = kawasaki_rate(&m, &g, 0, &[2.5, 0.0, 0.0]);
        assert!((r - 0.25 * (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn kawasaki_half_s_matches_brute_force() {
        let m = model(SW, 0.5, Some(100.0));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<Point> = (0..10).map(|_| [rng.random::<f64>() * 6.0, 0.0, 0.0]).collect();
        let g = Configuration::from_points(m.dom, 0.5, pts.clone());
        for _ in 0..200 {
            let id = rng.random_range(0..10);
            let y = [pts[id][0] + 4.0 * (rng.random::<f64>() - 0.5), 0.0, 0.0];
            let ey: f64 = (0..10).filter(|&j| j != id).map(|j| SW.eval(&m.dom.min_image_disp(&y, &pts[j]))).sum();
            let ex: f64 = (0..10).filter(|&j| j != id).map(|j| SW.eval(&m.dom.min_image_disp(&pts[id], &pts[j]))).sum();
            let a = m.kernel.eval_scaled(m.eps, &m.dom.min_image_disp(&pts[id], &y), &m.dom);
            let want = a * (0.5 * ex - 0.5 * ey).exp();
            assert!((kawasaki_rate(&m, &g, id, &y) - want).abs() <= 1e-14 * want.max(1e-300));
        }
    }

    #[test]
    fn hard_core_target_forbidden() {
        let hc = PairPotential::HardcoreSquareWell { core: 0.2, strength: 1.0, range: 0.5 };
        for s in [0.0, 1.0] {
            let m = model(hc.clone(), s, Some(10.0));
            let g = Configuration::from_points(m.dom, 0.5, [[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]);
            assert_eq!(kawasaki_rate(&m, &g, 0, &[2.1, 0.0, 0.0]), 0.0);
            let gr = glauber_rates(&m, &g, &[2.1, 0.0, 0.0], None, 1.0);
            assert_eq!(gr.birth_density, 0.0);
        }
    }

    #[test]
    fn glauber_examples() {
        let m = model(PairPotential::Zero, 0.0, None);
        let g = Configuration::from_points(m.dom, 0.0, [[1.0, 0.0, 0.0]]);
        assert_eq!(glauber_rates(&m, &g, &[1.0, 0.0, 0.0], Some(0), 0.7).death_rate, 0.7);
        assert!((glauber_rates(&m, &g, &[3.0, 0.0, 0.0], None, 0.7).birth_density - 0.7 * 0.3).abs() < 1e-15);

        let m = model(SW, 0.0, None);
        let b = glauber_rates(&m, &g, &[1.2, 0.0, 0.0], None, 0.7).birth_density;
        assert!((b - 0.7 * 0.3 * (-1.0f64).exp()).abs() < 1e-15);

        let m = model(SW, 1.0, Some(10.0));
        let g = Configuration::from_points(m.dom, 0.5, [[1.0, 0.0, 0.0], [1.2, 0.0, 0.0], [0.9, 0.0, 0.0]]);
        assert!((glauber_rates(&m, &g, &[1.0, 0.0, 0.0], Some(0), 0.7).death_rate - 0.7 * 2.0f64.exp()).abs() < 1e-14);
    }

    #[test]
    fn alpha_examples() {
        let k = JumpKernel::uniform_ball(0.5);
        assert_eq!(alpha_from_k1(0.3, 0.3, &k), 1.0);
        assert!((alpha_from_k1(0.18, 0.2, &k) - 0.9).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn positive_phi_rate_bounded_by_kernel(seed in 0u64..5000) {
            let m = model(PairPotential::Triangle { strength: 3.0, range: 0.6 }, 0.0, None);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<Point> = (0..8).map(|_| [rng.random::<f64>() * 6.0, 0.0, 0.0]).collect();
            let g = Configuration::from_points(m.dom, 0.6, pts);
            let y = [rng.random::<f64>() * 6.0, 0.0, 0.0];
            let a = m.kernel.eval_scaled(m.eps, &m.dom.min_image_disp(&g.points()[0], &y), &m.dom);
            prop_assert!(kawasaki_rate(&m, &g, 0, &y) <= a);
        }
    }
}
