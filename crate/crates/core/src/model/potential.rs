use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::geometry::{norm2, Point};

/// Built-in radial pair potentials with compact support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PairPotential {
    Zero,
    /// `J` for `|x| <= R`, else 0.
    SquareWell { strength: f64, range: f64 },
    /// `J (1 - |x|/R)` for `|x| < R`.
    Triangle { strength: f64, range: f64 },
    /// `+inf` for `|x| <= r_hc`, `J` on `(r_hc, R]`. `J` may be negative.
    HardcoreSquareWell { core: f64, strength: f64, range: f64 },
    /// `4 e ((s/r)^12 - (s/r)^6)` cut (not shifted) at `R`.
    LennardJonesTruncated { sigma: f64, well_depth: f64, range: f64 },
}

impl PairPotential {
    pub fn validate(&self) -> Result<(), ModelError> {
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ModelError::invalid(name, format!("must be positive and finite, got {v}")))
            }
        };
        match *self {
            PairPotential::Zero => Ok(()),
            PairPotential::SquareWell { strength, range } | PairPotential::Triangle { strength, range } => {
                pos("range", range)?;
                if !(strength.is_finite() && strength >= 0.0) {
                    return Err(ModelError::invalid("strength", "must be finite and >= 0"));
                }
                Ok(())
            }
            PairPotential::HardcoreSquareWell { core, strength, range } => {
                pos("core", core)?;
                pos("range", range)?;
                if core > range {
                    return Err(ModelError::invalid("core", "hard core must not exceed the range"));
                }
                if !strength.is_finite() {
                    return Err(ModelError::invalid("strength", "must be finite"));
                }
                Ok(())
            }
            PairPotential::LennardJonesTruncated { sigma, well_depth, range } => {
                pos("sigma", sigma)?;
                pos("well_depth", well_depth)?;
                pos("range", range)
            }
        }
    }

    /// Interaction range `R`; the potential vanishes beyond it.
    pub fn range(&self) -> f64 {
        match *self {
            PairPotential::Zero => 0.0,
            PairPotential::SquareWell { range, .. }
            | PairPotential::Triangle { range, .. }
            | PairPotential::HardcoreSquareWell { range, .. }
            | PairPotential::LennardJonesTruncated { range, .. } => range,
        }
    }

    /// Hard-core radius, if any.
    pub fn hard_core(&self) -> Option<f64> {
        match *self {
            PairPotential::HardcoreSquareWell { core, .. } => Some(core),
            _ => None,
        }
    }

    pub fn is_positive(&self) -> bool {
        match *self {
            PairPotential::Zero | PairPotential::SquareWell { .. } | PairPotential::Triangle { .. } => true,
            PairPotential::HardcoreSquareWell { strength, .. } => strength >= 0.0,
            PairPotential::LennardJonesTruncated { .. } => false,
        }
    }

    /// Stability constant `B` with `sum_{pairs} phi >= -B |gamma|`.
    ///
    /// For the attractive hard-core well, `B = |J| K / 2` where `K` bounds the
    /// number of hard-core-separated points within range of a given point. The
    /// Lennard-Jones value uses the same packing count with core `sigma`.
    pub fn stability_constant(&self, dim: usize) -> f64 {
        match *self {
            PairPotential::HardcoreSquareWell { core, strength, range } if strength < 0.0 => {
                -strength * packing_count(dim, core, range) / 2.0
            }
            PairPotential::LennardJonesTruncated { sigma, well_depth, range } => {
                well_depth * packing_count(dim, sigma, range) / 2.0
            }
            _ => 0.0,
        }
    }

    /// `phi` at radial distance `r`. Hard-core overlap gives `+inf`.
    #[inline]
    pub fn at_distance(&self, r: f64) -> f64 {
        match *self {
            PairPotential::Zero => 0.0,
            PairPotential::SquareWell { strength, range } => {
                if r <= range {
                    strength
                } else {
                    0.0
                }
            }
            PairPotential::Triangle { strength, range } => {
                if r < range {
                    strength * (1.0 - r / range)
                } else {
                    0.0
                }
            }
            PairPotential::HardcoreSquareWell { core, strength, range } => {
                if r <= core {
                    f64::INFINITY
                } else if r <= range {
                    strength
                } else {
                    0.0
                }
            }
            PairPotential::LennardJonesTruncated { sigma, well_depth, range } => {
                if r > range {
                    0.0
                } else if r == 0.0 {
                    f64::INFINITY
                } else {
                    let s6 = (sigma / r).powi(6);
                    4.0 * well_depth * (s6 * s6 - s6)
                }
            }
        }
    }

    #[inline]
    pub fn eval(&self, disp: &Point) -> f64 {
        match self {
            PairPotential::Zero => 0.0,
            _ => self.at_distance(norm2(disp).sqrt()),
        }
    }

    /// Radii where `phi` is discontinuous or not smooth, in `[0, R]`.
    pub fn radial_breaks(&self) -> Vec<f64> {
        match *self {
            PairPotential::Zero => vec![],
            PairPotential::SquareWell { range, .. } | PairPotential::Triangle { range, .. } => vec![0.0, range],
            PairPotential::HardcoreSquareWell { core, range, .. } => vec![0.0, core, range],
            PairPotential::LennardJonesTruncated { range, .. } => vec![0.0, range],
        }
    }
}

fn packing_count(dim: usize, core: f64, range: f64) -> f64 {
    if dim == 1 {
        2.0 * (range / core).ceil()
    } else {
        (2.0 * range / core + 1.0).powi(dim as i32) - 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(r: f64) -> Point {
        [r, 0.0, 0.0]
    }

    fn menu() -> Vec<PairPotential> {
        vec![
            PairPotential::Zero,
            PairPotential::SquareWell { strength: 1.0, range: 0.5 },
            PairPotential::Triangle { strength: 2.0, range: 0.7 },
            PairPotential::HardcoreSquareWell { core: 0.1, strength: -0.5, range: 0.4 },
            PairPotential::LennardJonesTruncated { sigma: 0.3, well_depth: 1.0, range: 0.9 },
        ]
    }

    #[test]
    fn examples() {
        assert_eq!(PairPotential::Zero.eval(&d(0.1)), 0.0);
        let sw = PairPotential::SquareWell { strength: 1.0, range: 0.5 };
        assert_eq!(sw.eval(&d(0.3)), 1.0);
        assert_eq!(sw.eval(&d(0.6)), 0.0);
        let hc = PairPotential::HardcoreSquareWell { core: 0.1, strength: 1.0, range: 0.5 };
        assert_eq!(hc.eval(&d(0.05)), f64::INFINITY);
        assert_eq!(hc.eval(&d(0.3)), 1.0);
    }

    #[test]
    fn validation() {
        assert!(PairPotential::SquareWell { strength: -1.0, range: 0.5 }.validate().is_err());
        assert!(PairPotential::HardcoreSquareWell { core: 0.6, strength: 1.0, range: 0.5 }.validate().is_err());
        for p in menu() {
            p.validate().unwrap();
        }
    }

    proptest! {
        #[test]
        fn invariants(r in 0.0f64..2.0, theta in 0.0f64..6.3) {
            for p in menu() {
                let v = [r * theta.cos(), r * theta.sin(), 0.0];
                let w = [-v[0], -v[1], 0.0];
                let a = p.eval(&v);
                prop_assert_eq!(a.to_bits(), p.eval(&w).to_bits());
                if r > p.range() {
                    prop_assert_eq!(a, 0.0);
                }
                if p.is_positive() {
                    prop_assert!(a >= 0.0);
                }
                prop_assert!(a >= -2.0 * p.stability_constant(2));
            }
        }
    }
}
