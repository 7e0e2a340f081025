//! Sampled space-time fields with optional derivative slots, plus node views
//! and the deterministic pair machinery the Hölder norms are built on.
//!
//! A slot is indexed by `(τ, ζ)`: the field value itself is `(0, 0)`, a time
//! derivative raises `τ`, spatial derivatives raise entries of the
//! multi-index `ζ` (x axes first, then y axes). Slots can be filled
//! analytically from an expression or numerically by the solver's stencils;
//! norm code never differentiates raw values itself.

use crate::error::{Error, Result};
use crate::exprlang::{differentiate, Expr, Var};
use crate::geometry::SpatialPoint;
use crate::grid::SpaceTimeGrid;
use rayon::prelude::*;
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

/// Derivative-slot key `(τ, ζ)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DerivKey {
    pub tau: u8,
    pub zeta: Vec<u8>,
}

impl DerivKey {
    pub fn value(axes: usize) -> Self {
        DerivKey {
            tau: 0,
            zeta: vec![0; axes],
        }
    }

    pub fn order(&self) -> usize {
        2 * self.tau as usize + self.zeta.iter().map(|&z| z as usize).sum::<usize>()
    }

    pub fn bump_axis(&self, axis: usize) -> Self {
        let mut k = self.clone();
        k.zeta[axis] += 1;
        k
    }

    pub fn bump_time(&self) -> Self {
        let mut k = self.clone();
        k.tau += 1;
        k
    }

    /// Short label: `u`, `u_t`, `u_x1`, `u_tx1y1`, ...
    pub fn label(&self, n: usize) -> String {
        let mut s = String::from("u");
        let has_any = self.tau > 0 || self.zeta.iter().any(|&z| z > 0);
        if !has_any {
            return s;
        }
        s.push('_');
        for _ in 0..self.tau {
            s.push('t');
        }
        for (a, &z) in self.zeta.iter().enumerate() {
            for _ in 0..z {
                if a < n {
                    s.push_str(&format!("x{}", a + 1));
                } else {
                    s.push_str(&format!("y{}", a - n + 1));
                }
            }
        }
        s
    }
}

/// Keys of the full parabolic jet `2τ + |ζ| ≤ order`; `elliptic` drops all
/// time derivatives.
pub fn jet_keys(axes: usize, order: usize, elliptic: bool) -> Vec<DerivKey> {
    let mut keys = Vec::new();
    let max_tau = if elliptic { 0 } else { order / 2 };
    for tau in 0..=max_tau {
        let rem = order - 2 * tau;
        let mut zeta = vec![0u8; axes];
        push_zetas(&mut keys, tau as u8, &mut zeta, 0, rem);
    }
    keys.sort();
    keys
}

fn push_zetas(out: &mut Vec<DerivKey>, tau: u8, zeta: &mut Vec<u8>, axis: usize, budget: usize) {
    if axis == zeta.len() {
        out.push(DerivKey {
            tau,
            zeta: zeta.clone(),
        });
        return;
    }
    for v in 0..=budget {
        zeta[axis] = v as u8;
        push_zetas(out, tau, zeta, axis + 1, budget - v);
    }
    zeta[axis] = 0;
}

/// Function values (and optional derivative slots) on a space-time grid.
#[derive(Debug, Clone)]
pub struct SampledField {
    pub grid: Arc<SpaceTimeGrid>,
    slots: BTreeMap<DerivKey, Vec<f64>>,
    /// Configuration hash of the run that produced the field, when solver
    /// generated.
    pub provenance: Option<String>,
}

impl SampledField {
    pub fn from_values(grid: Arc<SpaceTimeGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::Field(format!(
                "value count {} does not match node count {}",
                values.len(),
                grid.node_count()
            )));
        }
        let axes = grid.space.dims.total();
        let mut slots = BTreeMap::new();
        slots.insert(DerivKey::value(axes), values);
        Ok(SampledField {
            grid,
            slots,
            provenance: None,
        })
    }

    pub fn from_fn(
        grid: Arc<SpaceTimeGrid>,
        f: impl Fn(f64, &SpatialPoint) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.node_count());
        for &t in &grid.times {
            for z in grid.space.iter_points() {
                values.push(f(t, &z));
            }
        }
        Self::from_values(grid, values)
    }

    pub fn from_expr(grid: Arc<SpaceTimeGrid>, expr: &Expr) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.node_count());
        for &t in &grid.times {
            for z in grid.space.iter_points() {
                values.push(expr.eval(t, &z)?);
            }
        }
        Self::from_values(grid, values)
    }

    /// Sample `expr` and fill every derivative slot of parabolic order
    /// `≤ k + 2` by symbolic differentiation.
    pub fn from_expr_with_jet(grid: Arc<SpaceTimeGrid>, expr: &Expr, k: usize) -> Result<Self> {
        let axes = grid.space.dims.total();
        let n = grid.space.dims.n;
        let elliptic = grid.times.len() == 1;
        let keys = jet_keys(axes, k + 2, elliptic);
        let mut field = Self::from_expr(grid.clone(), expr)?;
        // cache derivative expressions by key to reuse lower-order results
        let mut exprs: HashMap<DerivKey, Expr> = HashMap::new();
        exprs.insert(DerivKey::value(axes), expr.clone());
        for key in &keys {
            if exprs.contains_key(key) {
                continue;
            }
            // find a parent key one derivative below
            let (parent, var) = if key.tau > 0 {
                let mut p = key.clone();
                p.tau -= 1;
                (p, Var::T)
            } else {
                let axis = key.zeta.iter().position(|&z| z > 0).unwrap();
                let mut p = key.clone();
                p.zeta[axis] -= 1;
                let var = if axis < n {
                    Var::X(axis)
                } else {
                    Var::Y(axis - n)
                };
                (p, var)
            };
            // parents are generated in sorted order before children of higher
            // total order; fill recursively if missing
            if !exprs.contains_key(&parent) {
                fill_parent(&mut exprs, &parent, n);
            }
            let de = differentiate(&exprs[&parent], var);
            exprs.insert(key.clone(), de);
        }
        for key in keys {
            if key.order() == 0 {
                continue;
            }
            let de = &exprs[&key];
            let mut vals = Vec::with_capacity(field.grid.node_count());
            for &t in &field.grid.times {
                for z in field.grid.space.iter_points() {
                    vals.push(de.eval(t, &z)?);
                }
            }
            field.slots.insert(key, vals);
        }
        Ok(field)
    }

    pub fn values(&self) -> &[f64] {
        let axes = self.grid.space.dims.total();
        &self.slots[&DerivKey::value(axes)]
    }

    pub fn slot(&self, key: &DerivKey) -> Option<&[f64]> {
        self.slots.get(key).map(|v| v.as_slice())
    }

    pub fn insert_slot(&mut self, key: DerivKey, values: Vec<f64>) -> Result<()> {
        if values.len() != self.grid.node_count() {
            return Err(Error::Field("slot length mismatch".into()));
        }
        self.slots.insert(key, values);
        Ok(())
    }

    pub fn has_jet(&self, k: usize) -> bool {
        let axes = self.grid.space.dims.total();
        let elliptic = self.grid.times.len() == 1;
        jet_keys(axes, k + 2, elliptic)
            .iter()
            .all(|key| self.slots.contains_key(key))
    }

    pub fn slot_keys(&self) -> impl Iterator<Item = &DerivKey> {
        self.slots.keys()
    }

    /// Pointwise linear combination `α·self + β·other` of values and all
    /// shared slots.
    pub fn linear_combination(&self, alpha: f64, other: &SampledField, beta: f64) -> Result<SampledField> {
        if self.grid.node_count() != other.grid.node_count() {
            return Err(Error::Field("field shapes differ".into()));
        }
        let mut slots = BTreeMap::new();
        for (key, vals) in &self.slots {
            if let Some(ov) = other.slots.get(key) {
                slots.insert(
                    key.clone(),
                    vals.iter()
                        .zip(ov)
                        .map(|(a, b)| alpha * a + beta * b)
                        .collect(),
                );
            }
        }
        Ok(SampledField {
            grid: self.grid.clone(),
            slots,
            provenance: None,
        })
    }

    pub fn scale(&self, s: f64) -> SampledField {
        let mut out = self.clone();
        for vals in out.slots.values_mut() {
            for v in vals.iter_mut() {
                *v *= s;
            }
        }
        out.provenance = None;
        out
    }
}

fn fill_parent(exprs: &mut HashMap<DerivKey, Expr>, key: &DerivKey, n: usize) {
    if exprs.contains_key(key) {
        return;
    }
    let (parent, var) = if key.tau > 0 {
        let mut p = key.clone();
        p.tau -= 1;
        (p, Var::T)
    } else {
        let axis = key
            .zeta
            .iter()
            .position(|&z| z > 0)
            .expect("order-0 key must be pre-seeded");
        let mut p = key.clone();
        p.zeta[axis] -= 1;
        let var = if axis < n {
            Var::X(axis)
        } else {
            Var::Y(axis - n)
        };
        (p, var)
    };
    fill_parent(exprs, &parent, n);
    let de = differentiate(&exprs[&parent], var);
    exprs.insert(key.clone(), de);
}

// ---------------------------------------------------------------------------
// Views
// ---------------------------------------------------------------------------

/// One grid node of a view, with cached coordinates for fast distance
/// evaluation.
#[derive(Debug, Clone)]
pub struct ViewNode {
    pub ti: u32,
    pub si: u32,
    pub flat: usize,
    pub t: f64,
    pub x: Vec<f64>,
    pub sqrt_x: Vec<f64>,
    pub y: Vec<f64>,
    /// Bit `i` set when `x_i ≤ 1`.
    pub small_bits: u64,
}

impl ViewNode {
    pub fn point(&self) -> crate::geometry::Point {
        crate::geometry::Point {
            t: self.t,
            z: SpatialPoint {
                x: self.x.clone(),
                y: self.y.clone(),
            },
        }
    }
}

/// Anisotropic distance between two view nodes.
#[inline]
pub fn rho_nodes(p: &ViewNode, q: &ViewNode) -> f64 {
    let both = p.small_bits & q.small_bits;
    let mut d = 0.0f64;
    for i in 0..p.x.len() {
        let term = if both & (1 << i) != 0 {
            (p.sqrt_x[i] - q.sqrt_x[i]).abs()
        } else {
            (p.x[i] - q.x[i]).abs()
        };
        if term > d {
            d = term;
        }
    }
    for l in 0..p.y.len() {
        let term = (p.y[l] - q.y[l]).abs();
        if term > d {
            d = term;
        }
    }
    d + (p.t - q.t).abs().sqrt()
}

/// A subset of grid nodes (a sub-box, ball, or time range) of one field's
/// grid, with lattice-neighbour pairs precomputed.
pub struct FieldView {
    pub grid: Arc<SpaceTimeGrid>,
    pub nodes: Vec<ViewNode>,
    /// Pairs of indices into `nodes` that are lattice neighbours (one step
    /// along one axis or in time).
    pub neighbor_pairs: Vec<(u32, u32)>,
}

impl FieldView {
    pub fn new(
        grid: Arc<SpaceTimeGrid>,
        accept_time: impl Fn(f64) -> bool,
        accept_space: impl Fn(&SpatialPoint) -> bool,
    ) -> Self {
        let ns = grid.space.node_count();
        let space_pts: Vec<SpatialPoint> = grid.space.iter_points().collect();
        let space_ok: Vec<bool> = space_pts.iter().map(|z| accept_space(z)).collect();
        let mut nodes = Vec::new();
        let mut index_of: HashMap<(u32, u32), u32> = HashMap::new();
        for (ti, &t) in grid.times.iter().enumerate() {
            if !accept_time(t) {
                continue;
            }
            for si in 0..ns {
                if !space_ok[si] {
                    continue;
                }
                let z = &space_pts[si];
                let mut small_bits = 0u64;
                for (i, &xi) in z.x.iter().enumerate() {
                    if xi <= 1.0 {
                        small_bits |= 1 << i;
                    }
                }
                index_of.insert((ti as u32, si as u32), nodes.len() as u32);
                nodes.push(ViewNode {
                    ti: ti as u32,
                    si: si as u32,
                    flat: ti * ns + si,
                    t,
                    x: z.x.clone(),
                    sqrt_x: z.x.iter().map(|v| v.sqrt()).collect(),
                    y: z.y.clone(),
                    small_bits,
                });
            }
        }
        let mut neighbor_pairs = Vec::new();
        for (idx, node) in nodes.iter().enumerate() {
            for axis in 0..grid.space.dims.total() {
                if let Some(next) = grid.space.step(node.si as usize, axis, 1) {
                    if let Some(&j) = index_of.get(&(node.ti, next as u32)) {
                        neighbor_pairs.push((idx as u32, j));
                    }
                }
            }
            if let Some(&j) = index_of.get(&(node.ti + 1, node.si)) {
                neighbor_pairs.push((idx as u32, j));
            }
        }
        FieldView {
            grid,
            nodes,
            neighbor_pairs,
        }
    }

    pub fn full(grid: Arc<SpaceTimeGrid>) -> Self {
        Self::new(grid, |_| true, |_| true)
    }

    /// Keep only nodes passing `pred`, rebuilding neighbour pairs.
    pub fn retain(&self, pred: impl Fn(&ViewNode) -> bool) -> Self {
        let mut nodes = Vec::new();
        let mut index_of: HashMap<(u32, u32), u32> = HashMap::new();
        for nd in &self.nodes {
            if pred(nd) {
                index_of.insert((nd.ti, nd.si), nodes.len() as u32);
                nodes.push(nd.clone());
            }
        }
        let mut neighbor_pairs = Vec::new();
        for (idx, node) in nodes.iter().enumerate() {
            for axis in 0..self.grid.space.dims.total() {
                if let Some(next) = self.grid.space.step(node.si as usize, axis, 1) {
                    if let Some(&j) = index_of.get(&(node.ti, next as u32)) {
                        neighbor_pairs.push((idx as u32, j));
                    }
                }
            }
            if let Some(&j) = index_of.get(&(node.ti + 1, node.si)) {
                neighbor_pairs.push((idx as u32, j));
            }
        }
        FieldView {
            grid: self.grid.clone(),
            nodes,
            neighbor_pairs,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Extract per-node slot values, weighted by `weight(node)`.
    pub fn extract(
        &self,
        field: &SampledField,
        key: &DerivKey,
        weight: impl Fn(&ViewNode) -> f64,
    ) -> Result<Vec<f64>> {
        let slot = field
            .slot(key)
            .ok_or_else(|| Error::Norm(format!("missing derivative slot {key:?}")))?;
        Ok(self
            .nodes
            .iter()
            .map(|nd| weight(nd) * slot[nd.flat])
            .collect())
    }
}

// ---------------------------------------------------------------------------
// Deterministic pair plans
// ---------------------------------------------------------------------------

/// How a seminorm sweep will enumerate node pairs.
#[derive(Debug, Clone)]
pub enum PairPlan {
    AllPairs,
    /// Every `stride`-th node (last node force-included) exhaustively, plus
    /// all lattice-neighbour pairs.
    Strided { stride: usize },
}

impl PairPlan {
    /// Deterministic plan that keeps the pair count within `budget`.
    pub fn for_view(view: &FieldView, budget: u64) -> Self {
        let count = view.nodes.len() as u64;
        let total = count.saturating_mul(count.saturating_sub(1)) / 2;
        if total <= budget {
            return PairPlan::AllPairs;
        }
        // largest node count whose full pair set fits the budget
        let keep = ((1.0 + (1.0 + 8.0 * budget as f64).sqrt()) / 2.0).floor() as u64;
        let keep = keep.max(2);
        let stride = ((count + keep - 1) / keep).max(1) as usize;
        PairPlan::Strided { stride }
    }

    pub fn pair_count(&self, view: &FieldView) -> u64 {
        match self {
            PairPlan::AllPairs => {
                let c = view.nodes.len() as u64;
                c * c.saturating_sub(1) / 2
            }
            PairPlan::Strided { stride } => {
                let c = strided_indices(view.nodes.len(), *stride).len() as u64;
                c * c.saturating_sub(1) / 2 + view.neighbor_pairs.len() as u64
            }
        }
    }
}

fn strided_indices(count: usize, stride: usize) -> Vec<u32> {
    let mut idx: Vec<u32> = (0..count).step_by(stride).map(|i| i as u32).collect();
    if count > 0 {
        let last = (count - 1) as u32;
        if idx.last() != Some(&last) {
            idx.push(last);
        }
    }
    idx
}

/// Max of `|v_p − v_q| / ρ(p, q)^α` over the planned pair set.
pub fn alpha_seminorm(view: &FieldView, vals: &[f64], alpha: f64, plan: &PairPlan) -> f64 {
    debug_assert_eq!(vals.len(), view.nodes.len());
    let ratio = |i: usize, j: usize| -> f64 {
        let d = rho_nodes(&view.nodes[i], &view.nodes[j]);
        if d > 0.0 {
            (vals[i] - vals[j]).abs() / d.powf(alpha)
        } else {
            0.0
        }
    };
    match plan {
        PairPlan::AllPairs => {
            let count = view.nodes.len();
            (0..count)
                .into_par_iter()
                .map(|i| {
                    let mut best = 0.0f64;
                    for j in (i + 1)..count {
                        let r = ratio(i, j);
                        if r > best {
                            best = r;
                        }
                    }
                    best
                })
                .reduce(|| 0.0, f64::max)
        }
        PairPlan::Strided { stride } => {
            let idx = strided_indices(view.nodes.len(), *stride);
            let coarse = (0..idx.len())
                .into_par_iter()
                .map(|a| {
                    let mut best = 0.0f64;
                    for b in (a + 1)..idx.len() {
                        let r = ratio(idx[a] as usize, idx[b] as usize);
                        if r > best {
                            best = r;
                        }
                    }
                    best
                })
                .reduce(|| 0.0, f64::max);
            let local = view
                .neighbor_pairs
                .par_iter()
                .map(|&(i, j)| ratio(i as usize, j as usize))
                .reduce(|| 0.0, f64::max);
            coarse.max(local)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprlang::parse;
    use crate::geometry::Dims;
    use crate::grid::{graded_nodes, SpatialGrid};

    fn grid_1d(j: usize, nt: usize, t_final: f64) -> Arc<SpaceTimeGrid> {
        let space = SpatialGrid::new(Dims::new(1, 0), vec![graded_nodes(j, 1.0)]).unwrap();
        let times = (0..=nt).map(|k| t_final * k as f64 / nt as f64).collect();
        Arc::new(SpaceTimeGrid { times, space })
    }

    #[test]
    fn jet_keys_k0() {
        // n=1, m=0, parabolic order 2: u, u_x, u_xx, u_t
        let keys = jet_keys(1, 2, false);
        assert_eq!(keys.len(), 4);
        assert!(keys.contains(&DerivKey { tau: 1, zeta: vec![0] }));
        assert!(keys.contains(&DerivKey { tau: 0, zeta: vec![2] }));
    }

    #[test]
    fn jet_keys_elliptic_drops_time() {
        let keys = jet_keys(1, 2, true);
        assert_eq!(keys.len(), 3);
        assert!(keys.iter().all(|k| k.tau == 0));
    }

    #[test]
    fn analytic_jet_matches_hand_derivatives() {
        let g = grid_1d(8, 4, 1.0);
        let e = parse("x1^2*t", Dims::new(1, 0)).unwrap();
        let f = SampledField::from_expr_with_jet(g.clone(), &e, 0).unwrap();
        let ns = g.space.node_count();
        let uxx = f.slot(&DerivKey { tau: 0, zeta: vec![2] }).unwrap();
        let ut = f.slot(&DerivKey { tau: 1, zeta: vec![0] }).unwrap();
        for (ti, &t) in g.times.iter().enumerate() {
            for si in 0..ns {
                let x = g.space.point(si).x[0];
                assert!((uxx[ti * ns + si] - 2.0 * t).abs() <= 1e-13);
                assert!((ut[ti * ns + si] - x * x).abs() <= 1e-13);
            }
        }
    }

    #[test]
    fn view_neighbor_pairs_cover_lattice() {
        let g = grid_1d(8, 2, 1.0);
        let v = FieldView::full(g);
        // 9 nodes x 3 times: 8*3 spatial adjacencies + 9*2 time adjacencies
        assert_eq!(v.neighbor_pairs.len(), 8 * 3 + 9 * 2);
    }

    #[test]
    fn seminorm_constant_field_is_zero() {
        let g = grid_1d(8, 2, 1.0);
        let f = SampledField::from_fn(g.clone(), |_, _| 3.0).unwrap();
        let v = FieldView::full(g);
        let vals = v.extract(&f, &DerivKey::value(1), |_| 1.0).unwrap();
        assert_eq!(alpha_seminorm(&v, &vals, 0.5, &PairPlan::AllPairs), 0.0);
    }

    #[test]
    fn seminorm_sqrt_on_single_slice() {
        // u = sqrt(x): all ratios are |√x − √x'|^{1-α}; the max is 1 at the
        // pair (0, 1) for any α in (0,1).
        let space = SpatialGrid::new(Dims::new(1, 0), vec![graded_nodes(32, 1.0)]).unwrap();
        let g = SpaceTimeGrid::single_slice(space, 0.0);
        let f = SampledField::from_fn(g.clone(), |_, z| z.x[0].sqrt()).unwrap();
        let v = FieldView::full(g);
        let vals = v.extract(&f, &DerivKey::value(1), |_| 1.0).unwrap();
        for alpha in [0.3, 0.5, 0.7] {
            let s = alpha_seminorm(&v, &vals, alpha, &PairPlan::AllPairs);
            assert!((s - 1.0).abs() <= 1e-12, "alpha={alpha}: {s}");
        }
    }

    #[test]
    fn strided_plan_is_lower_bound() {
        let g = grid_1d(64, 8, 1.0);
        let f = SampledField::from_fn(g.clone(), |t, z| (3.0 * z.x[0]).sin() + t).unwrap();
        let v = FieldView::full(g);
        let vals = v.extract(&f, &DerivKey::value(1), |_| 1.0).unwrap();
        let full = alpha_seminorm(&v, &vals, 0.5, &PairPlan::AllPairs);
        let plan = PairPlan::for_view(&v, 5_000);
        assert!(matches!(plan, PairPlan::Strided { .. }));
        let sub = alpha_seminorm(&v, &vals, 0.5, &plan);
        assert!(sub <= full + 1e-15);
        assert!(sub >= 0.9 * full, "recovery {} of {}", sub, full);
    }

    #[test]
    fn linear_combination_applies_to_slots() {
        let g = grid_1d(8, 2, 1.0);
        let d = Dims::new(1, 0);
        let f1 = SampledField::from_expr_with_jet(g.clone(), &parse("x1^2", d).unwrap(), 0).unwrap();
        let f2 = SampledField::from_expr_with_jet(g.clone(), &parse("x1", d).unwrap(), 0).unwrap();
        let combo = f1.linear_combination(2.0, &f2, -1.0).unwrap();
        let ux = combo.slot(&DerivKey { tau: 0, zeta: vec![1] }).unwrap();
        let ns = g.space.node_count();
        for si in 0..ns {
            let x = g.space.point(si).x[0];
            assert!((ux[si] - (4.0 * x - 1.0)).abs() <= 1e-14);
        }
    }
}
