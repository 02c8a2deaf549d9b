//! Periodic box geometry: wrapping, minimal-image displacements and a cell
//! list for range-limited neighbor queries.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// A point in up to three dimensions. Coordinates past `dim` are kept at 0.
pub type Point = [f64; 3];

/// Periodic box `[0, L)^d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusDomain {
    dim: usize,
    side: f64,
}

impl TorusDomain {
    pub fn new(dim: usize, side: f64) -> Result<Self, ModelError> {
        if !(1..=3).contains(&dim) {
            return Err(ModelError::invalid("dim", format!("dimension must be 1, 2 or 3, got {dim}")));
        }
        if !(side.is_finite() && side > 0.0) {
            return Err(ModelError::invalid("side", format!("side length must be positive, got {side}")));
        }
        Ok(Self { dim, side })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.dim as i32)
    }

    /// Maps every coordinate into `[0, L)`. Idempotent.
    #[inline]
    pub fn wrap(&self, x: Point) -> Point {
        let mut out = [0.0; 3];
        for k in 0..self.dim {
            out[k] = wrap_coord(x[k], self.side);
        }
        out
    }

    /// Minimal-image displacement `x - y`, each coordinate in `[-L/2, L/2)`.
    #[inline]
    pub fn min_image_disp(&self, x: &Point, y: &Point) -> Point {
        let mut out = [0.0; 3];
        for k in 0..self.dim {
            out[k] = min_image_coord(x[k] - y[k], self.side);
        }
        out
    }

    #[inline]
    pub fn dist2(&self, x: &Point, y: &Point) -> f64 {
        norm2(&self.min_image_disp(x, y))
    }

    #[inline]
    pub fn dist(&self, x: &Point, y: &Point) -> f64 {
        self.dist2(x, y).sqrt()
    }

    /// Volume of the ball of radius `r` in this dimension.
    pub fn ball_volume(&self, r: f64) -> f64 {
        ball_volume(self.dim, r)
    }

    /// Volume of the spherical shell `r_lo <= |x| < r_hi`.
    pub fn shell_volume(&self, r_lo: f64, r_hi: f64) -> f64 {
        ball_volume(self.dim, r_hi) - ball_volume(self.dim, r_lo)
    }
}

#[inline]
fn wrap_coord(v: f64, l: f64) -> f64 {
    let w = v - l * (v / l).floor();
    // rounding can land exactly on l for tiny negative inputs
    if w >= l {
        0.0
    } else {
        w
    }
}

#[inline]
fn min_image_coord(d: f64, l: f64) -> f64 {
    let half = 0.5 * l;
    let mut w = wrap_coord(d + half, l) - half;
    if w >= half {
        w -= l;
    }
    w
}

#[inline]
pub fn norm2(v: &Point) -> f64 {
    v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
}

pub fn ball_volume(dim: usize, r: f64) -> f64 {
    match dim {
        1 => 2.0 * r,
        2 => std::f64::consts::PI * r * r,
        _ => 4.0 / 3.0 * std::f64::consts::PI * r * r * r,
    }
}

/// Surface measure of the unit sphere in `dim` dimensions.
pub fn unit_sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        _ => 4.0 * std::f64::consts::PI,
    }
}

/// Uniform grid of cells with side at least the interaction range.
///
/// Point ids are indices into the owning configuration's point vector; the
/// owner is responsible for keeping the two in sync.
#[derive(Clone, Debug)]
pub struct CellList {
    dom: TorusDomain,
    per_axis: usize,
    cell_side: f64,
    cells: Vec<Vec<usize>>,
    cell_of: Vec<usize>,
}

impl CellList {
    pub fn new(dom: TorusDomain, min_cell_side: f64) -> Self {
        let per_axis = if min_cell_side > 0.0 {
            ((dom.side() / min_cell_side).floor() as usize).clamp(1, 1 << 12)
        } else {
            1
        };
        // keep the total cell count bounded in higher dimensions
        let per_axis = match dom.dim() {
            1 => per_axis,
            2 => per_axis.min(1024),
            _ => per_axis.min(96),
        };
        let n_cells = per_axis.pow(dom.dim() as u32);
        Self {
            dom,
            per_axis,
            cell_side: dom.side() / per_axis as f64,
            cells: vec![Vec::new(); n_cells],
            cell_of: Vec::new(),
        }
    }

    pub fn build(dom: TorusDomain, min_cell_side: f64, points: &[Point]) -> Self {
        let mut cl = Self::new(dom, min_cell_side);
        for (id, p) in points.iter().enumerate() {
            cl.insert(id, p);
        }
        cl
    }

    pub fn cell_side(&self) -> f64 {
        self.cell_side
    }

    pub fn len(&self) -> usize {
        self.cell_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cell_of.is_empty()
    }

    fn axis_index(&self, c: f64) -> usize {
        ((c / self.cell_side) as usize).min(self.per_axis - 1)
    }

    fn cell_index(&self, p: &Point) -> usize {
        let mut idx = 0;
        for k in (0..self.dom.dim()).rev() {
            idx = idx * self.per_axis + self.axis_index(p[k]);
        }
        idx
    }

    /// Registers point `id`, which must equal the current number of points.
    pub fn insert(&mut self, id: usize, p: &Point) {
        assert_eq!(id, self.cell_of.len(), "cell list ids must be dense");
        let c = self.cell_index(p);
        self.cells[c].push(id);
        self.cell_of.push(c);
    }

    pub fn relocate(&mut self, id: usize, p: &Point) {
        let new_c = self.cell_index(p);
        let old_c = self.cell_of[id];
        if new_c != old_c {
            self.detach(id, old_c);
            self.cells[new_c].push(id);
            self.cell_of[id] = new_c;
        }
    }

    /// Mirrors `Vec::swap_remove(id)` on the point vector.
    pub fn swap_remove(&mut self, id: usize) {
        let last = self.cell_of.len() - 1;
        let c = self.cell_of[id];
        self.detach(id, c);
        if id != last {
            let c_last = self.cell_of[last];
            let slot = self.cells[c_last]
                .iter()
                .position(|&q| q == last)
                .expect("stale cell list");
            self.cells[c_last][slot] = id;
            self.cell_of[id] = c_last;
        }
        self.cell_of.pop();
    }

    fn detach(&mut self, id: usize, c: usize) {
        let slot = self.cells[c]
            .iter()
            .position(|&q| q == id)
            .expect("stale cell list");
        self.cells[c].swap_remove(slot);
    }

    /// Calls `visit` for every stored id whose cell could hold a point within
    /// `radius` of `x`. Each candidate is visited once.
    pub fn for_each_candidate(&self, x: &Point, radius: f64, mut visit: impl FnMut(usize)) {
        let dim = self.dom.dim();
        let reach = (radius / self.cell_side).ceil() as usize;
        if 2 * reach + 1 >= self.per_axis {
            for ids in &self.cells {
                ids.iter().for_each(|&id| visit(id));
            }
            return;
        }
        let n = self.per_axis as isize;
        let r = reach as isize;
        let mut base = [0isize; 3];
        for k in 0..dim {
            base[k] = self.axis_index(x[k]) as isize;
        }
        let span = 2 * r + 1;
        let total = span.pow(dim as u32);
        for flat in 0..total {
            let mut rem = flat;
            let mut idx = 0isize;
            for k in (0..dim).rev() {
                let off = rem % span - r;
                rem /= span;
                idx = idx * n + (base[k] + off).rem_euclid(n);
            }
            for &id in &self.cells[idx as usize] {
                visit(id);
            }
        }
    }

    /// Ids at minimal-image distance `<= radius` from `x`.
    pub fn neighbors(&self, points: &[Point], x: &Point, radius: f64) -> Vec<usize> {
        debug_assert_eq!(points.len(), self.cell_of.len(), "stale cell list");
        let r2 = radius * radius;
        let mut out = Vec::new();
        self.for_each_candidate(x, radius, |id| {
            if self.dom.dist2(x, &points[id]) <= r2 {
                out.push(id);
            }
        });
        out
    }

    /// Checks that the cells hold exactly the ids `0..n` at their right cells.
    pub fn is_consistent_with(&self, points: &[Point]) -> bool {
        if points.len() != self.cell_of.len() {
            return false;
        }
        let total: usize = self.cells.iter().map(Vec::len).sum();
        total == points.len()
            && points.iter().enumerate().all(|(id, p)| {
                let c = self.cell_index(p);
                self.cell_of[id] == c && self.cells[c].contains(&id)
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_neighbors(dom: &TorusDomain, pts: &[Point], x: &Point, r: f64) -> Vec<usize> {
        (0..pts.len()).filter(|&i| dom.dist(x, &pts[i]) <= r).collect()
    }

    #[test]
    fn wrap_examples() {
        let d1 = TorusDomain::new(1, 1.0).unwrap();
        assert!((d1.wrap([0.3, 0.0, 0.0])[0] - 0.3).abs() < 1e-15);
        assert!((d1.wrap([1.3, 0.0, 0.0])[0] - 0.3).abs() < 1e-15);
        let d2 = TorusDomain::new(2, 1.0).unwrap();
        let w = d2.wrap([-0.2, 2.5, 0.0]);
        assert!((w[0] - 0.8).abs() < 1e-15 && (w[1] - 0.5).abs() < 1e-15);
        assert_eq!(d1.wrap([-1e-18, 0.0, 0.0])[0], 0.0);
    }

    #[test]
    fn min_image_examples() {
        let d1 = TorusDomain::new(1, 1.0).unwrap();
        let v = d1.min_image_disp(&[0.1, 0.0, 0.0], &[0.9, 0.0, 0.0]);
        assert!((v[0] - 0.2).abs() < 1e-12);
        assert_eq!(d1.min_image_disp(&[0.4, 0.0, 0.0], &[0.4, 0.0, 0.0]), [0.0; 3]);
        let d2 = TorusDomain::new(2, 1.0).unwrap();
        let v = d2.min_image_disp(&[0.75, 0.0, 0.0], &[0.0, 0.75, 0.0]);
        assert!((v[0] + 0.25).abs() < 1e-12 && (v[1] - 0.25).abs() < 1e-12);
        assert!((norm2(&v).sqrt() - 0.125f64.sqrt()).abs() < 1e-12);
        // tie at exactly L/2 resolves to -L/2
        let v = d1.min_image_disp(&[0.5, 0.0, 0.0], &[0.0, 0.0, 0.0]);
        assert_eq!(v[0], -0.5);
    }

    #[test]
    fn bad_domains_rejected() {
        assert!(TorusDomain::new(0, 1.0).is_err());
        assert!(TorusDomain::new(4, 1.0).is_err());
        assert!(TorusDomain::new(2, 0.0).is_err());
    }

    #[test]
    fn neighbor_edge_cases() {
        let dom = TorusDomain::new(1, 1.0).unwrap();
        let cl = CellList::build(dom, 0.1, &[]);
        assert!(cl.neighbors(&[], &[0.5, 0.0, 0.0], 0.1).is_empty());
        let pts = vec![[0.5 + 0.1 - 1e-9, 0.0, 0.0]];
        let cl = CellList::build(dom, 0.1, &pts);
        assert_eq!(cl.neighbors(&pts, &[0.5, 0.0, 0.0], 0.1), vec![0]);
    }

    #[test]
    fn hundred_points_match_brute_force() {
        let dom = TorusDomain::new(1, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<Point> = (0..100).map(|_| [rng.random::<f64>(), 0.0, 0.0]).collect();
        let cl = CellList::build(dom, 0.1, &pts);
        for p in &pts {
            let mut got = cl.neighbors(&pts, p, 0.1);
            got.sort_unstable();
            assert_eq!(got, brute_neighbors(&dom, &pts, p, 0.1));
        }
    }

    #[test]
    fn updates_keep_cells_consistent() {
        let dom = TorusDomain::new(2, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pts: Vec<Point> = (0..40)
            .map(|_| [rng.random::<f64>() * 3.0, rng.random::<f64>() * 3.0, 0.0])
            .collect();
        let mut cl = CellList::build(dom, 0.4, &pts);
        for step in 0..500 {
            match step % 3 {
                0 if !pts.is_empty() => {
                    let i = rng.random_range(0..pts.len());
                    pts.swap_remove(i);
                    cl.swap_remove(i);
                }
                1 => {
                    let p = [rng.random::<f64>() * 3.0, rng.random::<f64>() * 3.0, 0.0];
                    cl.insert(pts.len(), &p);
                    pts.push(p);
                }
                _ if !pts.is_empty() => {
                    let i = rng.random_range(0..pts.len());
                    pts[i] = [rng.random::<f64>() * 3.0, rng.random::<f64>() * 3.0, 0.0];
                    cl.relocate(i, &pts[i]);
                }
                _ => {}
            }
            assert!(cl.is_consistent_with(&pts));
        }
    }

    fn arb_config() -> impl Strategy<Value = (usize, f64, f64, Vec<[f64; 3]>)> {
        (1usize..=3, 2.0f64..12.0, 0.05f64..0.9).prop_flat_map(|(d, l, rfrac)| {
            let r = rfrac * l / 2.0;
            let pt = prop::array::uniform3(0.0f64..1.0);
            (Just(d), Just(l), Just(r), prop::collection::vec(pt, 0..60))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn neighbors_agree_with_scan((d, l, r, raw) in arb_config()) {
            let dom = TorusDomain::new(d, l).unwrap();
            let pts: Vec<Point> = raw.iter().map(|u| dom.wrap([u[0] * l, u[1] * l, u[2] * l])).collect();
            let cl = CellList::build(dom, r, &pts);
            prop_assert!(cl.is_consistent_with(&pts));
            for p in pts.iter().take(5) {
                let mut got = cl.neighbors(&pts, p, r);
                got.sort_unstable();
                prop_assert_eq!(got, brute_neighbors(&dom, &pts, p, r));
            }
        }

        #[test]
        fn min_image_antisymmetric(d in 1usize..=3, a in prop::array::uniform3(-5.0f64..5.0), b in prop::array::uniform3(-5.0f64..5.0)) {
            let dom = TorusDomain::new(d, 2.0).unwrap();
            let u = dom.min_image_disp(&a, &b);
            let v = dom.min_image_disp(&b, &a);
            prop_assert!((norm2(&u) - norm2(&v)).abs() < 1e-12);
            for k in 0..d {
                prop_assert!(u[k] >= -1.0 && u[k] < 1.0);
                let s = u[k] + v[k];
                // equal and opposite, except at the half-open tie
                prop_assert!(s.abs() < 1e-12 || (s.abs() - 2.0).abs() < 1e-12);
            }
            let w = dom.wrap(a);
            prop_assert_eq!(dom.wrap(w), w);
        }
    }
}
