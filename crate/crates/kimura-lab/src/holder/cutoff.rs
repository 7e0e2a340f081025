//! Constructive cutoff sequences and partitions of unity.
//!
//! The cutoff sequence lives on shrinking space-time cylinders
//! `Q_N = [T_N, T] × B_{r_N}(z⁰)` with `r_N = r·Σ_{i≤N} 2^{-i}` increasing to
//! `2r` and `T_N` decreasing to `T₀/2`; `φ_N = ψ_N(t)·η_N(z)` is 1 on `Q_N`
//! and 0 outside `Q_{N+1}`. The partition covers the boundary-adjacent part
//! of a truncated box with balls of radius `r` plus one interior function,
//! normalized so the family sums to 1 exactly.

use crate::error::{Error, Result};
use crate::geometry::{Dims, RegionIndex, SpatialPoint};
use crate::linalg::fd_weights;
use rayon::prelude::*;

/// The classical exp-based smooth step: 0 for `s ≤ 0`, 1 for `s ≥ 1`.
pub fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / s).exp();
    let b = (-1.0 / (1.0 - s)).exp();
    a / (a + b)
}

/// Euclidean distance |z − z0|.
fn euclid(z: &SpatialPoint, z0: &SpatialPoint) -> f64 {
    let mut acc = 0.0;
    for i in 0..z.x.len() {
        acc += (z.x[i] - z0.x[i]).powi(2);
    }
    for l in 0..z.y.len() {
        acc += (z.y[l] - z0.y[l]).powi(2);
    }
    acc.sqrt()
}

/// Cutoff functions `φ_N = ψ_N·η_N` on shrinking cylinders around
/// `(t ∈ [T_N, T], |z − z0| ≤ r_N)`.
#[derive(Debug, Clone)]
pub struct CutoffSequence {
    pub z0: SpatialPoint,
    pub r: f64,
    pub t0: f64,
    pub t_final: f64,
    pub n_max: usize,
    pub k: usize,
    /// `r_N` for N = 0..=n_max+1.
    pub radii: Vec<f64>,
    /// `T_N` for N = 0..=n_max+1.
    pub t_levels: Vec<f64>,
}

pub fn build_cutoff_sequence(
    z0: SpatialPoint,
    r: f64,
    t0: f64,
    t_final: f64,
    n_max: usize,
    k: usize,
) -> Result<CutoffSequence> {
    if !(r > 0.0) {
        return Err(Error::Cutoff("radius r must be positive".into()));
    }
    if !(t0 > 0.0 && t0 < t_final) {
        return Err(Error::Cutoff("need 0 < T0 < T".into()));
    }
    let radii: Vec<f64> = (0..=n_max + 1)
        .map(|nn| r * (2.0 - 0.5f64.powi(nn as i32)))
        .collect();
    let t_levels: Vec<f64> = (0..=n_max + 1)
        .map(|nn| 0.5 * t0 * (1.0 + 0.5f64.powi(nn as i32)))
        .collect();
    Ok(CutoffSequence {
        z0,
        r,
        t0,
        t_final,
        n_max,
        k,
        radii,
        t_levels,
    })
}

impl CutoffSequence {
    /// Spatial factor: 1 inside `B_{r_N}(z0)`, 0 outside `B_{r_{N+1}}`.
    pub fn eta(&self, n: usize, z: &SpatialPoint) -> f64 {
        self.eta_radial(n, euclid(z, &self.z0))
    }

    pub fn eta_radial(&self, n: usize, dist: f64) -> f64 {
        let (rn, rn1) = (self.radii[n], self.radii[n + 1]);
        smooth_step((rn1 - dist) / (rn1 - rn))
    }

    /// Temporal factor: 1 for `t ≥ T_N`, 0 for `t ≤ T_{N+1}`.
    pub fn psi(&self, n: usize, t: f64) -> f64 {
        let (tn, tn1) = (self.t_levels[n], self.t_levels[n + 1]);
        smooth_step((tn1 - t) / (tn1 - tn))
    }

    pub fn phi(&self, n: usize, t: f64, z: &SpatialPoint) -> f64 {
        self.psi(n, t) * self.eta(n, z)
    }
}

// ---------------------------------------------------------------------------
// Measured growth of the cutoff derivative norms
// ---------------------------------------------------------------------------

/// Per-`N` measured `C^α_WF` norms of the `(k+2)`-order derivative
/// components of `φ_N`, with a geometric fit.
#[derive(Debug, Clone)]
pub struct CutoffGrowth {
    pub norms: Vec<f64>,
    /// Least-squares geometric rate of the measured norms.
    pub rho_fit: f64,
    pub c_fit: f64,
    /// Max relative deviation of the fit from the measurements.
    pub max_rel_residual: f64,
    /// The bound's rate `2^{k+3}`.
    pub rho_bound: f64,
    /// Smallest `c` with `norm_N ≤ c·ρ^N (r^{-(k+3)} + T0^{-(k+3)})`.
    pub shape_constant: f64,
}

/// `C^α_WF` norm of a separable function `v(t)·w(x)` given 1-D samples, in one
/// spatial dimension. Same-time pairs, same-x pairs and a strided cross sweep.
fn separable_c0alpha(
    ts: &[f64],
    v: &[f64],
    xs: &[f64],
    w: &[f64],
    alpha: f64,
    cross_stride: usize,
) -> f64 {
    let sup_v = v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let sup_w = w.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let sup = sup_v * sup_w;

    let rho_x = |a: f64, b: f64| -> f64 {
        if a <= 1.0 && b <= 1.0 {
            (a.sqrt() - b.sqrt()).abs()
        } else {
            (a - b).abs()
        }
    };
    // same-time pairs: sup_t |v| · [w]_α
    let semi_w = (0..xs.len())
        .into_par_iter()
        .map(|i| {
            let mut best = 0.0f64;
            for j in (i + 1)..xs.len() {
                let d = rho_x(xs[i], xs[j]);
                if d > 0.0 {
                    best = best.max((w[i] - w[j]).abs() / d.powf(alpha));
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    // same-x pairs: sup_x |w| · [v]_α
    let semi_v = (0..ts.len())
        .into_par_iter()
        .map(|i| {
            let mut best = 0.0f64;
            for j in (i + 1)..ts.len() {
                let d = (ts[i] - ts[j]).abs().sqrt();
                if d > 0.0 {
                    best = best.max((v[i] - v[j]).abs() / d.powf(alpha));
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    // strided cross pairs
    let ti: Vec<usize> = (0..ts.len()).step_by(cross_stride.max(1)).collect();
    let xi: Vec<usize> = (0..xs.len()).step_by(cross_stride.max(1)).collect();
    let cross = ti
        .par_iter()
        .map(|&a| {
            let mut best = 0.0f64;
            for &p in &xi {
                for &b in &ti {
                    for &q in &xi {
                        if a == b && p == q {
                            continue;
                        }
                        let d = rho_x(xs[p], xs[q]) + (ts[a] - ts[b]).abs().sqrt();
                        if d > 0.0 {
                            let num = (v[a] * w[p] - v[b] * w[q]).abs();
                            best = best.max(num / d.powf(alpha));
                        }
                    }
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    sup + semi_w.max(semi_v).max(cross)
}

fn central_derivative(xs: &[f64], f: &[f64], order: usize) -> Vec<f64> {
    let n = xs.len();
    let width = (order + 2).max(3).min(n);
    let half = (width - 1) / 2;
    let mut out = vec![0.0; n];
    for i in 0..n {
        let lo = i.saturating_sub(half).min(n - width);
        let hi = lo + width - 1;
        let w = fd_weights(xs[i], &xs[lo..=hi], order);
        out[i] = w.iter().zip(&f[lo..=hi]).map(|(wi, fi)| wi * fi).sum();
    }
    out
}

fn uniform_segment(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

/// Coarse cover of `[lo, hi]` plus fine uniform segments; sorted, deduped.
fn composite_grid(lo: f64, hi: f64, coarse: usize, fine: &[(f64, f64)], fine_count: usize) -> Vec<f64> {
    let mut nodes = uniform_segment(lo, hi, coarse);
    for &(a, b) in fine {
        let a = a.max(lo);
        let b = b.min(hi);
        if b > a {
            nodes.extend(uniform_segment(a, b, fine_count));
        }
    }
    nodes.sort_by(|x, y| x.partial_cmp(y).unwrap());
    nodes.dedup();
    nodes
}

/// Measure the `C^α_WF` norms of the `(k+2)`-order derivative components of
/// `φ_N` for `N = 0..=n_max` (n = 1, m = 0 geometry) and fit geometric
/// growth. Exploits the separable structure `φ_N = ψ_N·η_N`. The measurement
/// grid is rebuilt per `N` with fine segments over the transition annulus, so
/// the shrinking transitions stay equally resolved at every level.
pub fn measure_cutoff_growth(
    seq: &CutoffSequence,
    alpha: f64,
    fine_res: usize,
    coarse_res: usize,
    cross_stride: usize,
) -> Result<CutoffGrowth> {
    if seq.z0.x.len() != 1 || !seq.z0.y.is_empty() {
        return Err(Error::Cutoff(
            "growth measurement is implemented for n = 1, m = 0 geometry".into(),
        ));
    }
    let k = seq.k;
    let x0 = seq.z0.x[0];
    let r_max = *seq.radii.last().unwrap();
    let x_lo = (x0 - 1.1 * r_max).max(0.0);
    let x_hi = x0 + 1.1 * r_max;
    let t_lo = (seq.t0 / 4.0).max(0.0);
    let t_hi = seq.t_final;

    let mut norms = Vec::with_capacity(seq.n_max + 1);
    for nn in 0..=seq.n_max {
        let (rn, rn1) = (seq.radii[nn], seq.radii[nn + 1]);
        let pad = 0.25 * (rn1 - rn);
        let xs = composite_grid(
            x_lo,
            x_hi,
            coarse_res,
            &[
                (x0 - rn1 - pad, x0 - rn + pad),
                (x0 + rn - pad, x0 + rn1 + pad),
            ],
            fine_res,
        );
        let (tn, tn1) = (seq.t_levels[nn], seq.t_levels[nn + 1]);
        let pad_t = 0.25 * (tn - tn1);
        let ts = composite_grid(t_lo, t_hi, coarse_res, &[(tn1 - pad_t, tn + pad_t)], fine_res);
        let eta: Vec<f64> = xs
            .iter()
            .map(|&x| seq.eta(nn, &SpatialPoint { x: vec![x], y: vec![] }))
            .collect();
        let psi: Vec<f64> = ts.iter().map(|&t| seq.psi(nn, t)).collect();
        // all components D^τ_t D^ζ_x φ_N with 2τ + |ζ| = k + 2 (n = 1):
        // ζ = k+2-2τ spatial derivatives of η times τ time derivatives of ψ
        let mut worst = 0.0f64;
        let mut tau = 0;
        while 2 * tau <= k + 2 {
            let zeta = k + 2 - 2 * tau;
            let mut v = psi.clone();
            for _ in 0..tau {
                v = central_derivative(&ts, &v, 1);
            }
            let w = if zeta > 0 {
                central_derivative(&xs, &eta, zeta.min(4))
            } else {
                eta.clone()
            };
            // derivative orders beyond 4 are not needed at desk scale
            if zeta > 4 {
                return Err(Error::Cutoff("k too large for growth measurement".into()));
            }
            let norm = separable_c0alpha(&ts, &v, &xs, &w, alpha, cross_stride);
            worst = worst.max(norm);
            tau += 1;
        }
        norms.push(worst);
    }

    // least-squares geometric fit in log space
    let n_pts = norms.len() as f64;
    let logs: Vec<f64> = norms.iter().map(|v| v.max(1e-300).ln()).collect();
    let mean_n = (0..norms.len()).map(|i| i as f64).sum::<f64>() / n_pts;
    let mean_l = logs.iter().sum::<f64>() / n_pts;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &l) in logs.iter().enumerate() {
        num += (i as f64 - mean_n) * (l - mean_l);
        den += (i as f64 - mean_n).powi(2);
    }
    let slope = num / den;
    let intercept = mean_l - slope * mean_n;
    let rho_fit = slope.exp();
    let c_fit = intercept.exp();
    let mut max_rel = 0.0f64;
    for (i, &v) in norms.iter().enumerate() {
        let fitted = c_fit * rho_fit.powi(i as i32);
        max_rel = max_rel.max((v - fitted).abs() / v.max(1e-300));
    }
    let rho_bound = 2f64.powi(k as i32 + 3);
    let scale = seq.r.powi(-(k as i32 + 3)) + seq.t0.powi(-(k as i32 + 3));
    let shape_constant = norms
        .iter()
        .enumerate()
        .map(|(i, &v)| v / (rho_bound.powi(i as i32) * scale))
        .fold(0.0f64, f64::max);
    Ok(CutoffGrowth {
        norms,
        rho_fit,
        c_fit,
        max_rel_residual: max_rel,
        rho_bound,
        shape_constant,
    })
}

// ---------------------------------------------------------------------------
// Partition of unity
// ---------------------------------------------------------------------------

/// The truncated domain `[0, X]^n × [-Y, Y]^m`.
#[derive(Debug, Clone)]
pub struct DomainBox {
    pub dims: Dims,
    pub x_max: f64,
    pub y_max: f64,
}

impl DomainBox {
    pub fn contains(&self, z: &SpatialPoint) -> bool {
        z.x.iter().all(|&x| (0.0..=self.x_max).contains(&x))
            && z.y.iter().all(|&y| y.abs() <= self.y_max)
    }

    /// Distance to the degenerate boundary faces `x_i = 0` (infinite when
    /// n = 0).
    pub fn dist_boundary(&self, z: &SpatialPoint) -> f64 {
        z.x.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// One member of the partition: its center, cutoff radius data and region
/// assignment for the frozen model operator.
#[derive(Debug, Clone)]
pub struct PartitionMember {
    pub center: SpatialPoint,
    pub region: RegionIndex,
}

/// Normalized partition of unity subordinate to the cover of the truncated
/// box by the interior set and balls around boundary-adjacent centers.
#[derive(Debug, Clone)]
pub struct Partition {
    pub r: f64,
    pub domain: DomainBox,
    /// Member 0 is the interior function; members 1.. are centered balls.
    pub members: Vec<PartitionMember>,
}

pub fn build_partition(r: f64, domain: &DomainBox) -> Result<Partition> {
    let dims = domain.dims;
    if !(r > 0.0) {
        return Err(Error::Cutoff("partition radius must be positive".into()));
    }
    if r >= 0.25 || 2.0 * r > domain.x_max || (dims.m > 0 && 2.0 * r > domain.y_max) {
        return Err(Error::Cutoff(format!(
            "radius {r} too large for the truncated box (need r < 1/4 and 2r within the box)"
        )));
    }
    if dims.n == 0 {
        // no degenerate boundary: the interior function alone covers the box
        return Ok(Partition {
            r,
            domain: domain.clone(),
            members: vec![PartitionMember {
                center: SpatialPoint {
                    x: vec![],
                    y: vec![0.0; dims.m],
                },
                region: RegionIndex::empty(0),
            }],
        });
    }
    let dim = dims.total() as f64;
    let spacing = r / (2.0 * dim.sqrt());
    let mut members = vec![PartitionMember {
        // nominal interior center: the box midpoint
        center: SpatialPoint {
            x: vec![domain.x_max / 2.0; dims.n],
            y: vec![0.0; dims.m],
        },
        region: RegionIndex::empty(dims.n),
    }];
    // lattice over the box, kept when within distance r of the boundary set
    let steps_x = (domain.x_max / spacing).ceil() as usize;
    let steps_y = if dims.m > 0 {
        (2.0 * domain.y_max / spacing).ceil() as usize
    } else {
        0
    };
    let mut idx = vec![0usize; dims.total()];
    'outer: loop {
        let mut x = Vec::with_capacity(dims.n);
        for i in 0..dims.n {
            x.push((idx[i] as f64 * spacing).min(domain.x_max));
        }
        let mut y = Vec::with_capacity(dims.m);
        for l in 0..dims.m {
            y.push((-domain.y_max + idx[dims.n + l] as f64 * spacing).min(domain.y_max));
        }
        let z = SpatialPoint { x, y };
        if domain.dist_boundary(&z) <= r {
            let region = RegionIndex::from_indices(
                &(0..dims.n)
                    .filter(|&i| z.x[i] < 0.5 + r)
                    .collect::<Vec<_>>(),
                dims.n,
            );
            members.push(PartitionMember { center: z, region });
        }
        // advance the lattice index
        let mut a = dims.total();
        loop {
            if a == 0 {
                break 'outer;
            }
            a -= 1;
            idx[a] += 1;
            let cap = if a < dims.n { steps_x } else { steps_y };
            if idx[a] <= cap {
                break;
            }
            idx[a] = 0;
        }
    }
    Ok(Partition {
        r,
        domain: domain.clone(),
        members,
    })
}

impl Partition {
    /// Raw (unnormalized) bump of member `idx`.
    fn beta(&self, idx: usize, z: &SpatialPoint) -> f64 {
        if idx == 0 {
            if self.domain.dims.n == 0 {
                return 1.0;
            }
            let d = self.domain.dist_boundary(z);
            smooth_step((d - 0.5 * self.r) / (0.25 * self.r))
        } else {
            let d = euclid(z, &self.members[idx].center);
            smooth_step(2.0 * (self.r - d) / self.r)
        }
    }

    fn beta_sum(&self, z: &SpatialPoint) -> f64 {
        (0..self.members.len()).map(|i| self.beta(i, z)).sum()
    }

    /// Normalized member: `φ_N = β_N / Σβ`; the family sums to 1 on the box.
    pub fn phi(&self, idx: usize, z: &SpatialPoint) -> f64 {
        let s = self.beta_sum(z);
        if s == 0.0 {
            0.0
        } else {
            self.beta(idx, z) / s
        }
    }

    /// Wider plateau function with `ψ_N ≡ 1` on `supp φ_N`.
    pub fn psi(&self, idx: usize, z: &SpatialPoint) -> f64 {
        if idx == 0 {
            if self.domain.dims.n == 0 {
                return 1.0;
            }
            let d = self.domain.dist_boundary(z);
            smooth_step((d - 0.125 * self.r) / (0.125 * self.r))
        } else {
            let d = euclid(z, &self.members[idx].center);
            smooth_step((1.5 * self.r - d) / (0.5 * self.r))
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Number of members with `β_N(z) > 0`.
    pub fn overlap_count(&self, z: &SpatialPoint) -> usize {
        (0..self.members.len())
            .filter(|&i| self.beta(i, z) > 0.0)
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn z1(x: f64) -> SpatialPoint {
        SpatialPoint {
            x: vec![x],
            y: vec![],
        }
    }

    #[test]
    fn smooth_step_endpoints() {
        assert_eq!(smooth_step(-0.5), 0.0);
        assert_eq!(smooth_step(0.0), 0.0);
        assert_eq!(smooth_step(1.0), 1.0);
        assert_eq!(smooth_step(2.0), 1.0);
        let mid = smooth_step(0.5);
        assert!((mid - 0.5).abs() <= 1e-12);
        assert!(smooth_step(0.3) < smooth_step(0.7));
    }

    #[test]
    fn cutoff_plateau_and_support() {
        let seq = build_cutoff_sequence(z1(0.5), 0.2, 0.25, 1.0, 6, 0).unwrap();
        for nn in 0..=6 {
            // center at final time is inside every Q_N
            assert_eq!(seq.phi(nn, 1.0, &z1(0.5)), 1.0);
            // plateau: |z - z0| <= r_N, t >= T_N
            assert_eq!(seq.phi(nn, seq.t_levels[nn], &z1(0.5 + seq.radii[nn] * 0.99)), 1.0);
            // support: vanishing outside Q_{N+1}
            assert_eq!(seq.phi(nn, 1.0, &z1(0.5 + seq.radii[nn + 1] * 1.01)), 0.0);
            assert_eq!(seq.phi(nn, seq.t_levels[nn + 1] * 0.99, &z1(0.5)), 0.0);
            // range
            for s in 0..20 {
                let x = 0.5 + seq.radii[nn + 1] * s as f64 / 19.0;
                let v = seq.phi(nn, 0.9, &z1(x));
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn cutoff_rejects_bad_parameters() {
        assert!(build_cutoff_sequence(z1(0.5), 0.0, 0.2, 1.0, 3, 0).is_err());
        assert!(build_cutoff_sequence(z1(0.5), 0.1, 1.0, 0.5, 3, 0).is_err());
    }

    #[test]
    fn partition_sums_to_one() {
        let domain = DomainBox {
            dims: Dims::new(1, 0),
            x_max: 1.0,
            y_max: 0.0,
        };
        let part = build_partition(0.2, &domain).unwrap();
        assert!(part.len() > 1);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let z = z1(rng.gen_range(0.0..=1.0));
            let total: f64 = (0..part.len()).map(|i| part.phi(i, &z)).sum();
            assert!((total - 1.0).abs() <= 1e-12, "sum {total} at {:?}", z);
        }
    }

    #[test]
    fn partition_psi_covers_phi_support() {
        let domain = DomainBox {
            dims: Dims::new(1, 0),
            x_max: 1.0,
            y_max: 0.0,
        };
        let part = build_partition(0.15, &domain).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..500 {
            let z = z1(rng.gen_range(0.0..=1.0));
            for i in 0..part.len() {
                let phi = part.phi(i, &z);
                let psi = part.psi(i, &z);
                // psi * phi = phi pointwise
                assert!(
                    (psi * phi - phi).abs() <= 1e-15,
                    "member {i} at {:?}: phi {phi}, psi {psi}",
                    z
                );
            }
        }
    }

    #[test]
    fn partition_member_supports_are_balls() {
        let domain = DomainBox {
            dims: Dims::new(1, 0),
            x_max: 1.0,
            y_max: 0.0,
        };
        let part = build_partition(0.2, &domain).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..500 {
            let z = z1(rng.gen_range(0.0..=1.0));
            for i in 1..part.len() {
                if part.phi(i, &z) > 0.0 {
                    assert!(euclid(&z, &part.members[i].center) < part.r);
                }
            }
            // interior member supported away from the boundary
            if part.phi(0, &z) > 0.0 {
                assert!(domain.dist_boundary(&z) > 0.5 * part.r);
            }
        }
    }

    #[test]
    fn partition_rejects_large_radius() {
        let domain = DomainBox {
            dims: Dims::new(1, 0),
            x_max: 1.0,
            y_max: 0.0,
        };
        assert!(build_partition(0.3, &domain).is_err());
    }

    #[test]
    fn cutoff_growth_is_geometric_and_within_bound() {
        let seq = build_cutoff_sequence(z1(0.5), 0.2, 0.4, 1.0, 4, 0).unwrap();
        let growth = measure_cutoff_growth(&seq, 0.5, 512, 193, 24).unwrap();
        assert_eq!(growth.norms.len(), 5);
        // norms increase and the fitted rate respects the 2^{k+3} bound
        for w in growth.norms.windows(2) {
            assert!(w[1] > w[0]);
        }
        assert!(growth.rho_fit > 1.0);
        assert!(growth.rho_fit <= growth.rho_bound * 1.02);
        assert!(growth.shape_constant.is_finite());
    }
}
