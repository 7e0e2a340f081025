//! Continuous-but-not-smooth initial data.
//!
//! The expression language is everywhere-smooth by construction, so rough
//! data gets a dedicated family: `|z − z₀|^β` around an interior point and
//! the boundary-touching variant `x₁^β`, normalized to unit sup-norm on the
//! truncated box. Members carry their modulus of continuity analytically.

use crate::error::{Error, Result};
use crate::geometry::SpatialPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoughKind {
    /// `|z − z₀|^β` around an interior point.
    Interior,
    /// `x₁^β`, continuous up to the degenerate face.
    Boundary,
}

#[derive(Debug, Clone)]
pub struct RoughMember {
    pub kind: RoughKind,
    /// β ∈ (0, 1]; β = 1 is the Lipschitz end of the family.
    pub beta: f64,
    /// Center (x then y coordinates); unused for the boundary variant.
    pub center: Vec<f64>,
    /// Normalization making the sup over the box equal to 1.
    scale: f64,
}

impl RoughMember {
    /// Center lists the `n` x-coordinates then the y-coordinates.
    pub fn interior(beta: f64, center: Vec<f64>, n: usize, x_max: f64, y_max: f64) -> Result<Self> {
        if !(0.0 < beta && beta <= 1.0) {
            return Err(Error::Verify(format!("beta = {beta} must lie in (0,1]")));
        }
        if center.is_empty() {
            return Err(Error::Verify("rough member needs a center".into()));
        }
        // farthest box corner from the center
        let mut worst: f64 = 0.0;
        for (a, &c) in center.iter().enumerate() {
            let (lo, hi) = if a < n { (0.0, x_max) } else { (-y_max, y_max) };
            let d = (c - lo).abs().max((hi - c).abs());
            worst += d * d;
        }
        let worst = worst.sqrt();
        if worst == 0.0 {
            return Err(Error::Verify("degenerate rough-member box".into()));
        }
        Ok(RoughMember {
            kind: RoughKind::Interior,
            beta,
            center,
            scale: worst.powf(-beta),
        })
    }

    pub fn boundary(beta: f64, x_max: f64) -> Result<Self> {
        if !(0.0 < beta && beta <= 1.0) {
            return Err(Error::Verify(format!("beta = {beta} must lie in (0,1]")));
        }
        Ok(RoughMember {
            kind: RoughKind::Boundary,
            beta,
            center: vec![],
            scale: x_max.powf(-beta),
        })
    }

    pub fn eval(&self, z: &SpatialPoint) -> f64 {
        match self.kind {
            RoughKind::Interior => {
                let mut acc = 0.0;
                for (a, &c) in self.center.iter().enumerate() {
                    let coord = if a < z.x.len() {
                        z.x[a]
                    } else {
                        z.y[a - z.x.len()]
                    };
                    acc += (coord - c).powi(2);
                }
                self.scale * acc.sqrt().powf(self.beta)
            }
            RoughKind::Boundary => self.scale * z.x[0].powf(self.beta),
        }
    }

    /// Analytic modulus of continuity: `ω(δ) = scale · δ^β`.
    pub fn modulus(&self, delta: f64) -> f64 {
        self.scale * delta.powf(self.beta)
    }

    /// β = 1 members are Lipschitz; smaller β is genuinely rougher.
    pub fn is_lipschitz(&self) -> bool {
        self.beta >= 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z1(x: f64) -> SpatialPoint {
        SpatialPoint {
            x: vec![x],
            y: vec![],
        }
    }

    #[test]
    fn interior_member_is_normalized() {
        let f = RoughMember::interior(0.5, vec![0.4], 1, 1.0, 0.0).unwrap();
        // farthest corner is x = 1 at distance 0.6
        let sup = (0..=100)
            .map(|i| f.eval(&z1(i as f64 / 100.0)))
            .fold(0.0f64, f64::max);
        assert!((sup - 1.0).abs() <= 1e-12);
        assert_eq!(f.eval(&z1(0.4)), 0.0);
    }

    #[test]
    fn boundary_member_touches_face() {
        let f = RoughMember::boundary(0.5, 1.0).unwrap();
        assert_eq!(f.eval(&z1(0.0)), 0.0);
        assert!((f.eval(&z1(1.0)) - 1.0).abs() <= 1e-12);
        assert!((f.eval(&z1(0.25)) - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn modulus_matches_increments() {
        let f = RoughMember::interior(0.5, vec![0.5], 1, 1.0, 0.0).unwrap();
        // |f(z) − f(z0)| ≤ ω(|z − z0|) with equality at the center
        for &x in &[0.45, 0.6, 0.9] {
            let inc = (f.eval(&z1(x)) - f.eval(&z1(0.5))).abs();
            assert!(inc <= f.modulus((x - 0.5).abs()) + 1e-12);
        }
    }

    #[test]
    fn rejects_bad_beta() {
        assert!(RoughMember::interior(0.0, vec![0.5], 1, 1.0, 0.0).is_err());
        assert!(RoughMember::boundary(1.5, 1.0).is_err());
    }
}
