//! Points of the closed domain `[0,∞)^n × R^m`, its region decomposition,
//! and the anisotropic distance `rho` that drives every Hölder computation.
//!
//! The spatial distance behaves like `|√x − √x'|` in a degenerate coordinate
//! while it is small (≤ 1) on both sides, and like the ordinary `|x − x'|`
//! otherwise; time enters as `√|Δt|`. Which behaviour applies is decided by
//! the region index of each point: coordinate `i` belongs to the region set
//! when `x_i ≤ 1` (points exactly on the interface are classified in).

use crate::error::{Error, Result};

/// Dimension signature: `n` degenerate x-directions, `m` tangent y-directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
}

impl Dims {
    pub fn new(n: usize, m: usize) -> Self {
        Dims { n, m }
    }

    pub fn total(&self) -> usize {
        self.n + self.m
    }
}

/// A spatial location `z = (x, y)` with `x_i ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl SpatialPoint {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        for (i, &xi) in x.iter().enumerate() {
            if !xi.is_finite() || xi < 0.0 {
                return Err(Error::InvalidPoint(format!(
                    "x{} = {} must be finite and nonnegative",
                    i + 1,
                    xi
                )));
            }
        }
        if let Some(yl) = y.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidPoint(format!("non-finite y coordinate {yl}")));
        }
        Ok(SpatialPoint { x, y })
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.x.len(), self.y.len())
    }
}

/// A space-time location `(t, z)` with `t ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub t: f64,
    pub z: SpatialPoint,
}

impl Point {
    pub fn new(t: f64, z: SpatialPoint) -> Result<Self> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidPoint(format!(
                "t = {t} must be finite and nonnegative"
            )));
        }
        Ok(Point { t, z })
    }
}

/// A subset `I ⊆ {1..n}` of degenerate coordinates, stored as a bitmask.
///
/// Coordinate indices are 0-based internally; `contains(i)` refers to `x_{i+1}`
/// in the 1-based naming used by expressions and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RegionIndex {
    bits: u64,
    n: usize,
}

impl RegionIndex {
    pub fn empty(n: usize) -> Self {
        assert!(n <= 64);
        RegionIndex { bits: 0, n }
    }

    pub fn full(n: usize) -> Self {
        assert!(n <= 64);
        let bits = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        RegionIndex { bits, n }
    }

    pub fn from_bits(bits: u64, n: usize) -> Self {
        assert!(n <= 64);
        let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        RegionIndex {
            bits: bits & mask,
            n,
        }
    }

    pub fn from_indices(indices: &[usize], n: usize) -> Self {
        let mut bits = 0u64;
        for &i in indices {
            assert!(i < n);
            bits |= 1 << i;
        }
        RegionIndex { bits, n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.n && self.bits & (1 << i) != 0
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn intersect(&self, other: &RegionIndex) -> RegionIndex {
        debug_assert_eq!(self.n, other.n);
        RegionIndex {
            bits: self.bits & other.bits,
            n: self.n,
        }
    }

    /// Members of `I`, 0-based.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(|&i| self.contains(i))
    }

    /// Members of the complement `I^c = {1..n} \ I`, 0-based.
    pub fn complement_iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(|&i| !self.contains(i))
    }

    /// All `2^n` subsets, for the region sum in the weighted norms.
    pub fn all_subsets(n: usize) -> impl Iterator<Item = RegionIndex> {
        assert!(n <= 16, "region enumeration is exponential in n");
        (0u64..(1 << n)).map(move |bits| RegionIndex { bits, n })
    }
}

/// Region assignment `I(z) = { i : x_i ≤ 1 }`.
///
/// Interface points (`x_i = 1` exactly) are classified into `I`; the closed
/// regions overlap there and either choice is consistent, this one is the
/// documented tie-break.
pub fn classify_region(z: &SpatialPoint) -> RegionIndex {
    let mut bits = 0u64;
    for (i, &xi) in z.x.iter().enumerate() {
        if xi <= 1.0 {
            bits |= 1 << i;
        }
    }
    RegionIndex {
        bits,
        n: z.x.len(),
    }
}

fn check_dims(a: &SpatialPoint, b: &SpatialPoint) -> Result<()> {
    if a.x.len() != b.x.len() || a.y.len() != b.y.len() {
        return Err(Error::DimensionMismatch {
            expected_n: a.x.len(),
            expected_m: a.y.len(),
            got_n: b.x.len(),
            got_m: b.y.len(),
        });
    }
    Ok(())
}

/// Spatial distance: the max of `|√x_i − √x_i'|` over `i ∈ I ∩ J`,
/// `|x_j − x_j'|` over the remaining degenerate coordinates, and
/// `|y_l − y_l'|`, with `I`, `J` the region assignments of the two points.
/// Empty maxima contribute 0.
pub fn rho0(z0: &SpatialPoint, z: &SpatialPoint) -> Result<f64> {
    check_dims(z0, z)?;
    let i_set = classify_region(z0);
    let j_set = classify_region(z);
    let both = i_set.intersect(&j_set);
    let mut d: f64 = 0.0;
    for i in 0..z0.x.len() {
        let term = if both.contains(i) {
            (z0.x[i].sqrt() - z.x[i].sqrt()).abs()
        } else {
            (z0.x[i] - z.x[i]).abs()
        };
        d = d.max(term);
    }
    for l in 0..z0.y.len() {
        d = d.max((z0.y[l] - z.y[l]).abs());
    }
    Ok(d)
}

/// Space-time distance `rho = rho0(z0, z) + √|t0 − t|`.
pub fn rho(p0: &Point, p: &Point) -> Result<f64> {
    Ok(rho0(&p0.z, &p.z)? + (p0.t - p.t).abs().sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sp(x: &[f64], y: &[f64]) -> SpatialPoint {
        SpatialPoint::new(x.to_vec(), y.to_vec()).unwrap()
    }

    #[test]
    fn classify_basic() {
        let i = classify_region(&sp(&[0.5, 2.0], &[]));
        assert!(i.contains(0) && !i.contains(1));
        assert_eq!(i.len(), 1);
    }

    #[test]
    fn classify_tie_break_assigns_interface_to_region() {
        let i = classify_region(&sp(&[1.0], &[]));
        assert!(i.contains(0));
    }

    #[test]
    fn classify_empty_x() {
        let i = classify_region(&sp(&[], &[0.3]));
        assert!(i.is_empty());
        assert_eq!(i.n(), 0);
    }

    #[test]
    fn rho0_sqrt_branch() {
        let d = rho0(&sp(&[0.25], &[]), &sp(&[0.81], &[])).unwrap();
        assert_abs_diff_eq!(d, 0.4, epsilon = 1e-15);
    }

    #[test]
    fn rho0_identical_points() {
        let z = sp(&[0.25], &[0.7]);
        assert_eq!(rho0(&z, &z).unwrap(), 0.0);
    }

    #[test]
    fn rho0_only_y_active() {
        let d = rho0(&sp(&[0.25], &[0.0]), &sp(&[0.25], &[0.3])).unwrap();
        assert_abs_diff_eq!(d, 0.3, epsilon = 1e-15);
    }

    #[test]
    fn rho0_euclidean_branch_when_region_differs() {
        // z0 in region {1}, z outside: I ∩ J empty, so |x - x'| applies.
        let d = rho0(&sp(&[0.5], &[]), &sp(&[2.0], &[])).unwrap();
        assert_abs_diff_eq!(d, 1.5, epsilon = 1e-15);
    }

    #[test]
    fn rho_time_term() {
        let z = sp(&[0.25], &[]);
        let p0 = Point::new(0.0, z.clone()).unwrap();
        let p = Point::new(4.0, z).unwrap();
        assert_abs_diff_eq!(rho(&p0, &p).unwrap(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn rho_sum_of_components() {
        let p0 = Point::new(0.0, sp(&[0.25], &[])).unwrap();
        let p = Point::new(1.0, sp(&[0.81], &[])).unwrap();
        assert_abs_diff_eq!(rho(&p0, &p).unwrap(), 1.4, epsilon = 1e-15);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let e = rho0(&sp(&[0.1], &[]), &sp(&[0.1, 0.2], &[]));
        assert!(matches!(e, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn negative_coordinate_rejected() {
        assert!(SpatialPoint::new(vec![-0.1], vec![]).is_err());
    }

    #[test]
    fn scaling_anchor_small_coordinate() {
        // Two points differing only in one small coordinate: rho = |√x − √x'|.
        let p0 = Point::new(0.5, sp(&[0.09, 3.0], &[1.0])).unwrap();
        let p = Point::new(0.5, sp(&[0.64, 3.0], &[1.0])).unwrap();
        assert_abs_diff_eq!(rho(&p0, &p).unwrap(), 0.5, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn rho_symmetric(
            x0 in 0.0f64..3.0, x1 in 0.0f64..3.0,
            y0 in -2.0f64..2.0, y1 in -2.0f64..2.0,
            t0 in 0.0f64..2.0, t1 in 0.0f64..2.0,
        ) {
            let p = Point::new(t0, sp(&[x0], &[y0])).unwrap();
            let q = Point::new(t1, sp(&[x1], &[y1])).unwrap();
            let d_pq = rho(&p, &q).unwrap();
            let d_qp = rho(&q, &p).unwrap();
            prop_assert!((d_pq - d_qp).abs() <= 1e-15 * (1.0 + d_pq.abs()));
        }

        #[test]
        fn rho_separation(
            x0 in 0.0f64..3.0, x1 in 0.0f64..3.0,
            t0 in 0.0f64..2.0, t1 in 0.0f64..2.0,
        ) {
            let p = Point::new(t0, sp(&[x0], &[])).unwrap();
            let q = Point::new(t1, sp(&[x1], &[])).unwrap();
            let d = rho(&p, &q).unwrap();
            if p == q {
                prop_assert_eq!(d, 0.0);
            } else {
                prop_assert!(d > 0.0);
            }
        }

        #[test]
        fn rho_restricted_triangle_within_one_region(
            xs in proptest::array::uniform3(0.0f64..1.0),
            ys in proptest::array::uniform3(-2.0f64..2.0),
            ts in proptest::array::uniform3(0.0f64..2.0),
        ) {
            // All three spatial parts share M̄_{ {1} }: each max component is a
            // metric there, and so is the sum with √|Δt|.
            let p: Vec<Point> = (0..3)
                .map(|k| Point::new(ts[k], sp(&[xs[k]], &[ys[k]])).unwrap())
                .collect();
            let d02 = rho(&p[0], &p[2]).unwrap();
            let d01 = rho(&p[0], &p[1]).unwrap();
            let d12 = rho(&p[1], &p[2]).unwrap();
            prop_assert!(d02 <= d01 + d12 + 1e-12);
        }
    }
}
