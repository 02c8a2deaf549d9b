//! Bounded, compactly supported test functions on the torus.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::geometry::{norm2, Point, TorusDomain};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    /// `height (1 - r^2/radius^2)^2` for `r < radius`.
    Bump { center: Vec<f64>, radius: f64, height: f64 },
    /// `height` on the box `[lo, hi]` (per axis).
    Step { lo: Vec<f64>, hi: Vec<f64>, height: f64 },
}

fn pad(v: &[f64]) -> Point {
    let mut p = [0.0; 3];
    for (a, b) in p.iter_mut().zip(v) {
        *a = *b;
    }
    p
}

impl Shape {
    fn center(&self) -> Point {
        match self {
            Shape::Bump { center, .. } => pad(center),
            Shape::Step { lo, hi, .. } => {
                let (a, b) = (pad(lo), pad(hi));
                [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])]
            }
        }
    }

    /// Half-widths of the bounding box per axis.
    fn half_widths(&self) -> Point {
        match self {
            Shape::Bump { radius, .. } => [*radius; 3],
            Shape::Step { lo, hi, .. } => {
                let (a, b) = (pad(lo), pad(hi));
                [0.5 * (b[0] - a[0]), 0.5 * (b[1] - a[1]), 0.5 * (b[2] - a[2])]
            }
        }
    }

    fn height(&self) -> f64 {
        match self {
            Shape::Bump { height, .. } | Shape::Step { height, .. } => *height,
        }
    }

    fn eval(&self, x: &Point, dom: &TorusDomain) -> f64 {
        let d = dom.min_image_disp(x, &self.center());
        match self {
            Shape::Bump { radius, height, .. } => {
                let q = norm2(&d) / (radius * radius);
                if q < 1.0 {
                    height * (1.0 - q) * (1.0 - q)
                } else {
                    0.0
                }
            }
            Shape::Step { height, .. } => {
                let h = self.half_widths();
                if (0..dom.dim()).all(|k| d[k].abs() <= h[k]) {
                    *height
                } else {
                    0.0
                }
            }
        }
    }
}

/// Sum of at most five bumps and steps.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub shapes: Vec<Shape>,
}

impl TestFunction {
    pub fn zero() -> Self {
        Self { shapes: vec![] }
    }

    pub fn bump(center: &[f64], radius: f64, height: f64) -> Self {
        Self { shapes: vec![Shape::Bump { center: center.to_vec(), radius, height }] }
    }

    pub fn step(lo: &[f64], hi: &[f64], height: f64) -> Self {
        Self { shapes: vec![Shape::Step { lo: lo.to_vec(), hi: hi.to_vec(), height }] }
    }

    pub fn plus(mut self, other: TestFunction) -> Self {
        self.shapes.extend(other.shapes);
        self
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut t = self.clone();
        for s in t.shapes.iter_mut() {
            match s {
                Shape::Bump { height, .. } | Shape::Step { height, .. } => *height *= c,
            }
        }
        t
    }

    pub fn validate(&self, dom: &TorusDomain) -> Result<(), ModelError> {
        if self.shapes.len() > 5 {
            return Err(ModelError::invalid("shapes", "at most 5 shapes"));
        }
        for (i, s) in self.shapes.iter().enumerate() {
            let field = format!("shapes[{i}]");
            let bad = |m: &str| Err(ModelError::invalid(field.clone(), m.to_string()));
            match s {
                Shape::Bump { center, radius, height } => {
                    if center.len() != dom.dim() {
                        return bad("center must have one coordinate per dimension");
                    }
                    if !(radius.is_finite() && *radius > 0.0) || !height.is_finite() {
                        return bad("radius must be positive and height finite");
                    }
                }
                Shape::Step { lo, hi, height } => {
                    if lo.len() != dom.dim() || hi.len() != dom.dim() {
                        return bad("lo and hi need one coordinate per dimension");
                    }
                    if lo.iter().zip(hi).any(|(a, b)| !(b > a)) || !height.is_finite() {
                        return bad("need lo < hi on every axis and a finite height");
                    }
                }
            }
        }
        let (lo, hi) = self.support_box(dom);
        let half_diag = (0..dom.dim()).map(|k| (0.5 * (hi[k] - lo[k])).powi(2)).sum::<f64>().sqrt();
        if !self.shapes.is_empty() && half_diag >= 0.25 * dom.side() {
            return Err(ModelError::invalid("shapes", "support must fit in a ball of radius < L/4"));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.shapes.iter().all(|s| s.height() == 0.0)
    }

    pub fn eval(&self, x: &Point, dom: &TorusDomain) -> f64 {
        self.shapes.iter().map(|s| s.eval(x, dom)).sum()
    }

    /// `<f, gamma>`.
    pub fn pair(&self, points: &[Point], dom: &TorusDomain) -> f64 {
        if self.shapes.is_empty() {
            return 0.0;
        }
        points.iter().map(|p| self.eval(p, dom)).sum()
    }

    pub fn sup_abs(&self) -> f64 {
        self.shapes.iter().map(|s| s.height().abs()).sum()
    }

    /// Bounding box of the support in unwrapped coordinates, anchored at the
    /// first shape's center. Empty functions give a degenerate box at 0.
    pub fn support_box(&self, dom: &TorusDomain) -> (Point, Point) {
        let Some(first) = self.shapes.first() else {
            return ([0.0; 3], [0.0; 3]);
        };
        let anchor = first.center();
        let (mut lo, mut hi) = ([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]);
        for s in &self.shapes {
            let off = dom.min_image_disp(&s.center(), &anchor);
            let h = s.half_widths();
            for k in 0..dom.dim() {
                let c = anchor[k] + off[k];
                lo[k] = lo[k].min(c - h[k]);
                hi[k] = hi[k].max(c + h[k]);
            }
        }
        for k in dom.dim()..3 {
            lo[k] = 0.0;
            hi[k] = 0.0;
        }
        (lo, hi)
    }

    /// Per-axis coordinates where the function is not smooth (support edges
    /// and bump centers are enough for the built-in shapes).
    pub fn axis_breaks(&self, dom: &TorusDomain) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new(); dom.dim()];
        for s in &self.shapes {
            let c = s.center();
            let h = s.half_widths();
            for (k, v) in out.iter_mut().enumerate() {
                v.push(c[k] - h[k]);
                v.push(c[k] + h[k]);
            }
        }
        out
    }
}
