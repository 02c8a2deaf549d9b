use crate::geometry::{CellList, Point, TorusDomain};

use super::{ModelSpec, PairPotential};

/// Finite point configuration on the torus, with a cell list sized to the
/// interaction range.
#[derive(Clone, Debug)]
pub struct Configuration {
    dom: TorusDomain,
    range: f64,
    points: Vec<Point>,
    cells: CellList,
}

impl Configuration {
    pub fn empty(dom: TorusDomain, range: f64) -> Self {
        Self { dom, range, points: Vec::new(), cells: CellList::new(dom, range) }
    }

    pub fn for_model(model: &ModelSpec) -> Self {
        Self::empty(model.dom, model.phi.range())
    }

    /// Wraps every point into the box.
    pub fn from_points(dom: TorusDomain, range: f64, points: impl IntoIterator<Item = Point>) -> Self {
        let points: Vec<Point> = points.into_iter().map(|p| dom.wrap(p)).collect();
        let cells = CellList::build(dom, range, &points);
        Self { dom, range, points, cells }
    }

    pub fn domain(&self) -> &TorusDomain {
        &self.dom
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn push(&mut self, p: Point) -> usize {
        let p = self.dom.wrap(p);
        let id = self.points.len();
        self.cells.insert(id, &p);
        self.points.push(p);
        id
    }

    /// Removes point `id`; the last point takes its index.
    pub fn swap_remove(&mut self, id: usize) -> Point {
        self.cells.swap_remove(id);
        self.points.swap_remove(id)
    }

    pub fn move_point(&mut self, id: usize, to: Point) {
        let to = self.dom.wrap(to);
        self.points[id] = to;
        self.cells.relocate(id, &to);
    }

    pub fn is_consistent(&self) -> bool {
        self.cells.is_consistent_with(&self.points)
    }

    /// Relative energy `E(x, gamma \ {exclude})`; `+inf` on hard-core overlap.
    /// `x` need not be wrapped.
    pub fn energy_at(&self, phi: &PairPotential, x: &Point, exclude: Option<usize>) -> f64 {
        if matches!(phi, PairPotential::Zero) {
            return 0.0;
        }
        let x = self.dom.wrap(*x);
        let r = phi.range();
        let mut e = 0.0;
        self.cells.for_each_candidate(&x, r, |id| {
            if Some(id) != exclude {
                e += phi.eval(&self.dom.min_image_disp(&x, &self.points[id]));
            }
        });
        e
    }

    /// Relative energy of point `id` with the rest, `E(x_id, gamma \ x_id)`.
    pub fn energy_of(&self, phi: &PairPotential, id: usize) -> f64 {
        self.energy_at(phi, &self.points[id], Some(id))
    }

    /// Total energy `U(gamma)` over unordered pairs.
    pub fn total_energy(&self, phi: &PairPotential) -> f64 {
        if matches!(phi, PairPotential::Zero) {
            return 0.0;
        }
        let r = phi.range();
        let mut u = 0.0;
        for (i, x) in self.points.iter().enumerate() {
            self.cells.for_each_candidate(x, r, |j| {
                if j > i {
                    u += phi.eval(&self.dom.min_image_disp(x, &self.points[j]));
                }
            });
        }
        u
    }

    /// Ids within distance `radius` of `x`.
    pub fn neighbors(&self, x: &Point, radius: f64) -> Vec<usize> {
        self.cells.neighbors(&self.points, x, radius)
    }

    /// Calls `visit(id)` for every point that may lie within `radius` of `x`.
    pub fn for_each_candidate(&self, x: &Point, radius: f64, visit: impl FnMut(usize)) {
        self.cells.for_each_candidate(x, radius, visit)
    }

    /// `<f, gamma> = sum_{x in gamma} f(x)`.
    pub fn pair_sum<F: Fn(&Point) -> f64>(&self, f: F) -> f64 {
        self.points.iter().map(f).sum()
    }

    pub fn cell_range(&self) -> f64 {
        self.range
    }

    /// Per-axis coordinates in `[lo, hi]` (unwrapped) where `E(., gamma)` may
    /// fail to be smooth: every particle shifted by the potential's radial
    /// breakpoints, with all periodic images.
    pub fn energy_axis_breaks(&self, phi: &PairPotential, lo: &Point, hi: &Point, exclude: Option<usize>) -> Vec<Vec<f64>> {
        let dim = self.dom.dim();
        let radii = phi.radial_breaks();
        let mut out = vec![Vec::new(); dim];
        if radii.is_empty() {
            return out;
        }
        for (k, axis) in out.iter_mut().enumerate() {
            let mut raw = Vec::with_capacity(self.points.len() * radii.len() * 2);
            for (id, p) in self.points.iter().enumerate() {
                if Some(id) == exclude {
                    continue;
                }
                for &r in &radii {
                    raw.push(p[k] - r);
                    if r > 0.0 {
                        raw.push(p[k] + r);
                    }
                }
            }
            *axis = crate::quadrature::periodic_breaks(&raw, lo[k], hi[k], self.dom.side());
        }
        out
    }
}

impl PartialEq for Configuration {
    fn eq(&self, other: &Self) -> bool {
        self.dom == other.dom
            && self.points.len() == other.points.len()
            && self.points.iter().zip(&other.points).all(|(a, b)| {
                a.iter().zip(b).all(|(u, v)| u.to_bits() == v.to_bits())
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_energy(dom: &TorusDomain, phi: &PairPotential, x: &Point, pts: &[Point]) -> f64 {
        pts.iter().map(|y| phi.eval(&dom.min_image_disp(x, y))).sum()
    }

    #[test]
    fn relative_energy_examples() {
        let dom = TorusDomain::new(1, 5.0).unwrap();
        let sw = PairPotential::SquareWell { strength: 1.0, range: 0.5 };
        let c = Configuration::from_points(dom, 0.5, [[1.3, 0.0, 0.0]]);
        assert_eq!(c.energy_at(&sw, &[1.0, 0.0, 0.0], None), 1.0);
        assert_eq!(c.energy_at(&PairPotential::Zero, &[1.0, 0.0, 0.0], None), 0.0);
        let hc = PairPotential::HardcoreSquareWell { core: 0.1, strength: 1.0, range: 0.5 };
        assert_eq!(c.energy_at(&hc, &[1.25, 0.0, 0.0], None), f64::INFINITY);
    }

    #[test]
    fn total_energy_examples() {
        let dom = TorusDomain::new(1, 5.0).unwrap();
        let sw = PairPotential::SquareWell { strength: 1.0, range: 0.5 };
        assert_eq!(Configuration::empty(dom, 0.5).total_energy(&sw), 0.0);
        assert_eq!(Configuration::from_points(dom, 0.5, [[1.0, 0.0, 0.0]]).total_energy(&sw), 0.0);
        let c = Configuration::from_points(dom, 0.5, [[1.0, 0.0, 0.0], [1.2, 0.0, 0.0], [1.4, 0.0, 0.0]]);
        assert_eq!(c.total_energy(&sw), 3.0);
    }

    #[test]
    fn triangle_energy_matches_direct_sum() {
        let dom = TorusDomain::new(1, 4.0).unwrap();
        let tri = PairPotential::Triangle { strength: 1.5, range: 0.6 };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Point> = (0..20).map(|_| [rng.random::<f64>() * 4.0, 0.0, 0.0]).collect();
        let c = Configuration::from_points(dom, 0.6, pts.clone());
        for _ in 0..50 {
            let x = [rng.random::<f64>() * 4.0, 0.0, 0.0];
            assert!((c.energy_at(&tri, &x, None) - brute_energy(&dom, &tri, &x, &pts)).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_increment_identity_random_30() {
        let dom = TorusDomain::new(2, 3.0).unwrap();
        let tri = PairPotential::Triangle { strength: 1.0, range: 0.7 };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Point> = (0..30).map(|_| [rng.random::<f64>() * 3.0, rng.random::<f64>() * 3.0, 0.0]).collect();
        let c = Configuration::from_points(dom, 0.7, pts);
        let u = c.total_energy(&tri);
        for id in 0..c.len() {
            let mut rest = c.clone();
            let x = rest.swap_remove(id);
            let lhs = u - rest.total_energy(&tri);
            assert!((lhs - rest.energy_at(&tri, &x, None)).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn energy_increment_fuzz(seed in 0u64..10_000, n in 0usize..25, d in 1usize..=3) {
            let dom = TorusDomain::new(d, 2.5).unwrap();
            let phi = PairPotential::Triangle { strength: 2.0, range: 0.8 };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut pt = || { let mut p = [0.0; 3]; for c in p.iter_mut().take(d) { *c = rng.random::<f64>() * 2.5; } p };
            let pts: Vec<Point> = (0..n).map(|_| pt()).collect();
            let x = pt();
            let c = Configuration::from_points(dom, 0.8, pts.clone());
            let u0 = c.total_energy(&phi);
            let e = c.energy_at(&phi, &x, None);
            let mut c2 = c.clone();
            c2.push(x);
            let u1 = c2.total_energy(&phi);
            prop_assert!((u1 - (u0 + e)).abs() <= 1e-12 * u1.abs().max(1.0));
        }
    }
}
