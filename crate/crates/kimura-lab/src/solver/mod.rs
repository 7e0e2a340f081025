//! Finite-difference solver for the inhomogeneous initial-value problem
//! `u_t − Lu = g` on the truncated graded grid.
//!
//! Discretization: second-order central differences on the nonuniform grid in
//! the interior. At a degenerate face node `x_i = 0` the terms carrying the
//! structural factor `x_i` are dropped (the factor vanishes) and the drift
//! `b_i u_{x_i}` uses a first-order one-sided difference into the domain; no
//! boundary data is imposed there — with `b_i ≥ 0` the face needs none, which
//! is why assembly refuses negative drift on the face. The outer artificial
//! boundary either pins oracle values (convergence studies) or closes the
//! system with second-order linear extrapolation rows; verification norms
//! exclude the configured margin fraction of the box in the latter mode.
//!
//! Time marching is implicit Euler by default (unconditionally stable against
//! the stiff degenerate operator) with Crank–Nicolson available; linear
//! systems go through direct tridiagonal elimination when possible and
//! BiCGSTAB otherwise.

pub mod oracle;

pub use oracle::PolynomialOracle;

use crate::error::{Error, Result};
use crate::exprlang::Expr;
use crate::field::{DerivKey, SampledField};
use crate::geometry::SpatialPoint;
use crate::grid::{GridSpec, SpatialGrid};
use crate::linalg::{fd_weights, solve_sparse, CsrBuilder, CsrMatrix};
use crate::operator::CoefficientSet;

/// How assembly treats rows at the outer (artificial) box faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryRows {
    /// Leave outer rows empty; the time march replaces them.
    Empty,
    /// Assemble the operator with one-sided stencils so every node carries a
    /// value (used by discrete application and residuals).
    OneSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    ImplicitEuler,
    CrankNicolson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterBoundary {
    /// Pin exact oracle values (constant-coefficient polynomial problems).
    OracleDirichlet,
    /// Close with second-order linear extrapolation along the outward axis.
    BufferExtrapolation,
}

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub grid: GridSpec,
    pub scheme: Scheme,
    pub boundary: OuterBoundary,
    /// Relative tolerance of the iterative linear solver.
    pub solver_tol: f64,
    /// Fraction of the box excluded near the artificial boundary by
    /// verification views.
    pub margin: f64,
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.solver_tol > 0.0) {
            return Err(Error::Config("solver tolerance must be positive".into()));
        }
        if !(self.margin > 0.0 && self.margin < 1.0) {
            return Err(Error::Config("margin must lie in (0,1)".into()));
        }
        Ok(())
    }
}

/// Initial data: an expression, a built-in rough member, or raw node values.
pub enum InitialData<'a> {
    Expr(&'a Expr),
    Values(&'a [f64]),
    Fn(&'a dyn Fn(&SpatialPoint) -> f64),
}

// ---------------------------------------------------------------------------
// Stencils
// ---------------------------------------------------------------------------

/// Per-axis stencil table: weights and absolute positions for first and
/// second derivatives at every axis position.
struct AxisStencils {
    d1: Vec<Vec<(usize, f64)>>,
    d2: Vec<Vec<(usize, f64)>>,
    /// First-order one-sided drift difference at position 0.
    d1_face: Vec<(usize, f64)>,
}

fn axis_stencils(nodes: &[f64]) -> AxisStencils {
    let len = nodes.len();
    let mut d1 = Vec::with_capacity(len);
    let mut d2 = Vec::with_capacity(len);
    for p in 0..len {
        // first derivative: central 3-point, one-sided 3-point at the ends
        let (lo1, hi1) = if p == 0 {
            (0, 2.min(len - 1))
        } else if p == len - 1 {
            (len - 3, len - 1)
        } else {
            (p - 1, p + 1)
        };
        let w1 = fd_weights(nodes[p], &nodes[lo1..=hi1], 1);
        d1.push(zero_sum(
            w1.iter().enumerate().map(|(i, &w)| (lo1 + i, w)).collect(),
            p,
        ));
        // second derivative: central 3-point, one-sided 4-point at the ends
        let (lo2, hi2) = if p == 0 {
            (0, 3.min(len - 1))
        } else if p == len - 1 {
            (len - 1 - 3.min(len - 1), len - 1)
        } else {
            (p - 1, p + 1)
        };
        let w2 = fd_weights(nodes[p], &nodes[lo2..=hi2], 2);
        d2.push(zero_sum(
            w2.iter().enumerate().map(|(i, &w)| (lo2 + i, w)).collect(),
            p,
        ));
    }
    let h0 = nodes[1] - nodes[0];
    AxisStencils {
        d1,
        d2,
        d1_face: vec![(0, -1.0 / h0), (1, 1.0 / h0)],
    }
}

/// Derivative weights must annihilate constants exactly; fold the residual
/// rounding of the weight sum into the evaluation node's entry.
fn zero_sum(mut entries: Vec<(usize, f64)>, center: usize) -> Vec<(usize, f64)> {
    let sum: f64 = entries.iter().map(|(_, w)| w).sum();
    if sum != 0.0 {
        if let Some(e) = entries.iter_mut().find(|(pos, _)| *pos == center) {
            e.1 -= sum;
        }
    }
    entries
}

fn is_outer(space: &SpatialGrid, axis: usize, pos: usize) -> bool {
    let last = space.axis_len(axis) - 1;
    if axis < space.dims.n {
        pos == last // x_i = 0 is a genuine (degenerate) face, not artificial
    } else {
        pos == 0 || pos == last
    }
}

/// Assemble the spatial operator `A ≈ L` on the grid.
///
/// Refuses drift coefficients that are negative at a degenerate face node:
/// the scheme imposes no data there and needs the face to be of entrance
/// type.
pub fn assemble_spatial_operator(
    lc: &CoefficientSet,
    space: &SpatialGrid,
    boundary: BoundaryRows,
) -> Result<CsrMatrix> {
    let dims = space.dims;
    let (n, m) = (dims.n, dims.m);
    let ns = space.node_count();
    let stencils: Vec<AxisStencils> = (0..dims.total())
        .map(|a| axis_stencils(&space.axes[a]))
        .collect();
    let mut builder = CsrBuilder::new(ns);

    for s in 0..ns {
        let idx = space.decode(s);
        let z = space.point(s);
        let outer = (0..dims.total()).any(|a| is_outer(space, a, idx[a]));
        if outer && boundary == BoundaryRows::Empty {
            continue;
        }
        // contribution of a 1-D stencil along `axis` scaled by `w`
        let add_axis = |builder: &mut CsrBuilder, axis: usize, entries: &[(usize, f64)], w: f64| {
            if w == 0.0 {
                return;
            }
            for &(pos, wt) in entries {
                let mut idx2 = idx.clone();
                idx2[axis] = pos;
                builder.add(s, space.encode(&idx2), w * wt);
            }
        };
        // tensor product of two 1-D stencils
        let add_tensor = |builder: &mut CsrBuilder,
                              axis_a: usize,
                              ea: &[(usize, f64)],
                              axis_b: usize,
                              eb: &[(usize, f64)],
                              w: f64| {
            if w == 0.0 {
                return;
            }
            for &(pa, wa) in ea {
                for &(pb, wb) in eb {
                    let mut idx2 = idx.clone();
                    idx2[axis_a] = pa;
                    idx2[axis_b] = pb;
                    builder.add(s, space.encode(&idx2), w * wa * wb);
                }
            }
        };

        for i in 0..n {
            let at_face = idx[i] == 0;
            let fac = lc.x_factor[i].value(z.x[i]);
            let a_val = lc.a[i].eval_spatial(&z)?;
            let b_val = lc.b[i].eval_spatial(&z)?;
            if at_face && b_val < 0.0 {
                return Err(Error::Assumption(format!(
                    "b{} = {} < 0 at a degenerate face node; the scheme requires entrance-type faces",
                    i + 1,
                    b_val
                )));
            }
            // x_i a_ii u_{x_i x_i}: drop when the factor vanishes at the face
            let w2 = fac * a_val;
            if w2 != 0.0 {
                add_axis(&mut builder, i, &stencils[i].d2[idx[i]], w2);
            }
            // b_i u_{x_i}: first-order one-sided into the domain at the face
            if b_val != 0.0 {
                let entries = if at_face {
                    &stencils[i].d1_face
                } else {
                    &stencils[i].d1[idx[i]]
                };
                add_axis(&mut builder, i, entries, b_val);
            }
        }
        for i in 0..n {
            let fac_i = lc.x_factor[i].value(z.x[i]);
            for j in 0..n {
                let fac_j = lc.x_factor[j].value(z.x[j]);
                let w = fac_i * fac_j * lc.atilde(i, j).eval_spatial(&z)?;
                if w == 0.0 {
                    continue;
                }
                if i == j {
                    add_axis(&mut builder, i, &stencils[i].d2[idx[i]], w);
                } else {
                    add_tensor(
                        &mut builder,
                        i,
                        &stencils[i].d1[idx[i]],
                        j,
                        &stencils[j].d1[idx[j]],
                        w,
                    );
                }
            }
        }
        for i in 0..n {
            let fac_i = lc.x_factor[i].value(z.x[i]);
            for l in 0..m {
                let w = fac_i * lc.c(i, l).eval_spatial(&z)?;
                add_tensor(
                    &mut builder,
                    i,
                    &stencils[i].d1[idx[i]],
                    n + l,
                    &stencils[n + l].d1[idx[n + l]],
                    w,
                );
            }
        }
        for k in 0..m {
            for l in 0..m {
                let w = lc.d(k, l).eval_spatial(&z)?;
                if w == 0.0 {
                    continue;
                }
                if k == l {
                    add_axis(&mut builder, n + k, &stencils[n + k].d2[idx[n + k]], w);
                } else {
                    add_tensor(
                        &mut builder,
                        n + k,
                        &stencils[n + k].d1[idx[n + k]],
                        n + l,
                        &stencils[n + l].d1[idx[n + l]],
                        w,
                    );
                }
            }
        }
        for l in 0..m {
            let w = lc.e[l].eval_spatial(&z)?;
            add_axis(&mut builder, n + l, &stencils[n + l].d1[idx[n + l]], w);
        }
    }
    Ok(builder.finish())
}

/// The sparse linear map of the operator on this grid (one-sided at the outer
/// faces), after checking the entrance-face drift sign.
pub fn discretize(lc: &CoefficientSet, space: &SpatialGrid) -> Result<CsrMatrix> {
    assemble_spatial_operator(lc, space, BoundaryRows::OneSided)
}

// ---------------------------------------------------------------------------
// Time marching
// ---------------------------------------------------------------------------

struct OuterNode {
    node: usize,
    /// Extrapolation row: `u[node] = (1+θ)·u[in1] − θ·u[in2]`.
    in1: usize,
    in2: usize,
    theta: f64,
}

fn outer_nodes(space: &SpatialGrid) -> Vec<OuterNode> {
    let mut out = Vec::new();
    let ns = space.node_count();
    for s in 0..ns {
        let idx = space.decode(s);
        let axis = (0..space.dims.total()).find(|&a| is_outer(space, a, idx[a]));
        let Some(axis) = axis else { continue };
        let last = space.axis_len(axis) - 1;
        let dir: isize = if idx[axis] == last { -1 } else { 1 };
        let mut idx1 = idx.clone();
        idx1[axis] = (idx[axis] as isize + dir) as usize;
        let mut idx2 = idx.clone();
        idx2[axis] = (idx[axis] as isize + 2 * dir) as usize;
        let nodes = &space.axes[axis];
        let x0 = nodes[idx[axis]];
        let x1 = nodes[idx1[axis]];
        let x2 = nodes[idx2[axis]];
        out.push(OuterNode {
            node: s,
            in1: space.encode(&idx1),
            in2: space.encode(&idx2),
            theta: (x0 - x1) / (x1 - x2),
        });
    }
    out
}

/// Solve the initial-value problem and return the full space-time field.
pub fn solve_ivp(
    lc: &CoefficientSet,
    f: InitialData<'_>,
    g: &Expr,
    cfg: &SolveConfig,
) -> Result<SampledField> {
    cfg.validate()?;
    let grid = cfg.grid.build()?;
    let space = &grid.space;
    let ns = space.node_count();
    let nt = grid.times.len();
    let dt = grid.dt();

    let a = assemble_spatial_operator(lc, space, BoundaryRows::Empty)?;
    let outers = outer_nodes(space);
    let oracle = match cfg.boundary {
        OuterBoundary::OracleDirichlet => {
            let f_expr = match &f {
                InitialData::Expr(e) => *e,
                _ => {
                    return Err(Error::Solve(
                        "oracle-dirichlet boundaries need expression initial data".into(),
                    ))
                }
            };
            Some(PolynomialOracle::new(lc, f_expr, g, 12)?)
        }
        OuterBoundary::BufferExtrapolation => None,
    };

    let points: Vec<SpatialPoint> = space.iter_points().collect();
    let mut u0 = Vec::with_capacity(ns);
    match &f {
        InitialData::Expr(e) => {
            for z in &points {
                u0.push(e.eval(0.0, z)?);
            }
        }
        InitialData::Values(v) => {
            if v.len() != ns {
                return Err(Error::Solve("initial values have wrong length".into()));
            }
            u0.extend_from_slice(v);
        }
        InitialData::Fn(func) => {
            for z in &points {
                u0.push(func(z));
            }
        }
    }

    // LHS matrix: rows I − c·A at interior nodes, boundary rows per mode
    let lhs_factor = match cfg.scheme {
        Scheme::ImplicitEuler => dt,
        Scheme::CrankNicolson => dt / 2.0,
    };
    let mut mb = CsrBuilder::new(ns);
    let mut is_outer_node = vec![false; ns];
    for o in &outers {
        is_outer_node[o.node] = true;
    }
    for r in 0..ns {
        if is_outer_node[r] {
            continue;
        }
        mb.add(r, r, 1.0);
        for k in a.row_ptr[r]..a.row_ptr[r + 1] {
            mb.add(r, a.col[k] as usize, -lhs_factor * a.val[k]);
        }
    }
    for o in &outers {
        match cfg.boundary {
            OuterBoundary::OracleDirichlet => mb.add(o.node, o.node, 1.0),
            OuterBoundary::BufferExtrapolation => {
                mb.add(o.node, o.node, 1.0);
                mb.add(o.node, o.in1, -(1.0 + o.theta));
                mb.add(o.node, o.in2, o.theta);
            }
        }
    }
    let mat = mb.finish();

    let eval_g = |t: f64, out: &mut Vec<f64>| -> Result<()> {
        out.clear();
        for z in &points {
            out.push(g.eval(t, z)?);
        }
        Ok(())
    };

    let mut values = Vec::with_capacity(nt * ns);
    values.extend_from_slice(&u0);
    let mut u = u0;
    let mut g_now = Vec::with_capacity(ns);
    let mut g_next = Vec::with_capacity(ns);
    let mut au = vec![0.0; ns];
    for step in 1..nt {
        let t_next = grid.times[step];
        let mut rhs = vec![0.0; ns];
        match cfg.scheme {
            Scheme::ImplicitEuler => {
                eval_g(t_next, &mut g_next)?;
                for r in 0..ns {
                    rhs[r] = u[r] + dt * g_next[r];
                }
            }
            Scheme::CrankNicolson => {
                eval_g(grid.times[step - 1], &mut g_now)?;
                eval_g(t_next, &mut g_next)?;
                a.matvec(&u, &mut au);
                for r in 0..ns {
                    rhs[r] = u[r] + 0.5 * dt * au[r] + 0.5 * dt * (g_now[r] + g_next[r]);
                }
            }
        }
        match (&cfg.boundary, &oracle) {
            (OuterBoundary::OracleDirichlet, Some(orc)) => {
                let coeffs = orc.coeffs_at(t_next);
                for o in &outers {
                    rhs[o.node] = orc.eval_with_coeffs(&coeffs, &points[o.node]);
                }
            }
            (OuterBoundary::BufferExtrapolation, _) => {
                for o in &outers {
                    rhs[o.node] = 0.0;
                }
            }
            _ => unreachable!(),
        }
        u = solve_sparse(&mat, &rhs, &u, cfg.solver_tol)?;
        if let Some(bad) = u.iter().find(|v| !v.is_finite()) {
            return Err(Error::Solve(format!(
                "non-finite value {bad} at t = {t_next} (step {step}); aborting"
            )));
        }
        values.extend_from_slice(&u);
    }
    SampledField::from_values(grid, values)
}

// ---------------------------------------------------------------------------
// Derivative estimation
// ---------------------------------------------------------------------------

fn axis_derivative_field(
    space: &SpatialGrid,
    stencils: &[AxisStencils],
    vals: &[f64],
    axis: usize,
    order: usize,
) -> Vec<f64> {
    let ns = space.node_count();
    let mut out = vec![0.0; ns];
    for s in 0..ns {
        let idx = space.decode(s);
        let entries = if order == 1 {
            &stencils[axis].d1[idx[axis]]
        } else {
            &stencils[axis].d2[idx[axis]]
        };
        let mut acc = 0.0;
        for &(pos, w) in entries {
            let mut idx2 = idx.clone();
            idx2[axis] = pos;
            acc += w * vals[space.encode(&idx2)];
        }
        out[s] = acc;
    }
    out
}

/// Fill the order-(k=0) derivative slots of a solved field: central stencils
/// in space (one-sided second-order at the box faces), backward differences
/// in time. Weighted combinations are formed later by the norm code.
pub fn estimate_derivatives(u: &SampledField) -> Result<SampledField> {
    let grid = u.grid.clone();
    let space = &grid.space;
    let axes = space.dims.total();
    let ns = space.node_count();
    let nt = grid.times.len();
    if space.axes.iter().any(|a| a.len() < 3) {
        return Err(Error::Solve("grid too small for derivative stencils".into()));
    }
    let stencils: Vec<AxisStencils> = (0..axes).map(|a| axis_stencils(&space.axes[a])).collect();
    let vals = u.values().to_vec();
    let mut out = SampledField::from_values(grid.clone(), vals.clone())?;
    out.provenance = u.provenance.clone();

    // spatial first derivatives per slice
    let mut first: Vec<Vec<f64>> = Vec::with_capacity(axes);
    for axis in 0..axes {
        let mut slot = vec![0.0; nt * ns];
        for ti in 0..nt {
            let slice = &vals[ti * ns..(ti + 1) * ns];
            let d = axis_derivative_field(space, &stencils, slice, axis, 1);
            slot[ti * ns..(ti + 1) * ns].copy_from_slice(&d);
        }
        first.push(slot);
    }
    for axis in 0..axes {
        let key = DerivKey::value(axes).bump_axis(axis);
        out.insert_slot(key, first[axis].clone())?;
    }
    // second derivatives: direct stencil on the diagonal, composed otherwise
    for a1 in 0..axes {
        for a2 in a1..axes {
            let key = DerivKey::value(axes).bump_axis(a1).bump_axis(a2);
            let mut slot = vec![0.0; nt * ns];
            for ti in 0..nt {
                let d = if a1 == a2 {
                    let slice = &vals[ti * ns..(ti + 1) * ns];
                    axis_derivative_field(space, &stencils, slice, a1, 2)
                } else {
                    let slice = &first[a1][ti * ns..(ti + 1) * ns];
                    axis_derivative_field(space, &stencils, slice, a2, 1)
                };
                slot[ti * ns..(ti + 1) * ns].copy_from_slice(&d);
            }
            out.insert_slot(key, slot)?;
        }
    }
    // time derivative: backward differences, forward at the initial slice
    if nt > 1 {
        let dt = grid.dt();
        let mut slot = vec![0.0; nt * ns];
        for ti in 0..nt {
            for si in 0..ns {
                let v = if ti == 0 {
                    (vals[ns + si] - vals[si]) / dt
                } else {
                    (vals[ti * ns + si] - vals[(ti - 1) * ns + si]) / dt
                };
                slot[ti * ns + si] = v;
            }
        }
        out.insert_slot(DerivKey::value(axes).bump_time(), slot)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprlang::parse;
    use crate::geometry::Dims;
    use approx::assert_abs_diff_eq;

    fn dims10() -> Dims {
        Dims::new(1, 0)
    }

    fn constant_op(dims: Dims, a: f64, b: f64) -> CoefficientSet {
        CoefficientSet::diagonal(
            dims,
            vec![Expr::Const(a); dims.n],
            vec![Expr::Const(b); dims.n],
            vec![Expr::Const(1.0); dims.m],
            vec![Expr::Const(0.0); dims.m],
        )
        .unwrap()
    }

    fn spec_1d(j: usize, dt: f64, t_final: f64) -> GridSpec {
        GridSpec {
            dims: dims10(),
            j,
            x_max: 1.0,
            y_intervals: 0,
            y_max: 0.0,
            t_final,
            dt,
        }
    }

    #[test]
    fn discretize_exact_on_linears_everywhere() {
        let lc = constant_op(dims10(), 1.0, 1.0);
        let space = spec_1d(16, 0.1, 1.0).spatial().unwrap();
        let a = discretize(&lc, &space).unwrap();
        let vals: Vec<f64> = space.iter_points().map(|z| z.x[0]).collect();
        let lu = a.apply(&vals);
        for (s, v) in lu.iter().enumerate() {
            assert!((v - 1.0).abs() <= 1e-10, "node {s}: {v}");
        }
    }

    #[test]
    fn discretize_zero_on_constants() {
        let lc = constant_op(dims10(), 1.0, 1.0);
        let space = spec_1d(16, 0.1, 1.0).spatial().unwrap();
        let a = discretize(&lc, &space).unwrap();
        let vals = vec![3.0; space.node_count()];
        for v in a.apply(&vals) {
            assert!(v.abs() <= 1e-10);
        }
    }

    #[test]
    fn discretize_exact_on_quadratics_interior() {
        let lc = constant_op(dims10(), 1.0, 1.0);
        let space = spec_1d(16, 0.1, 1.0).spatial().unwrap();
        let a = discretize(&lc, &space).unwrap();
        let vals: Vec<f64> = space.iter_points().map(|z| z.x[0] * z.x[0]).collect();
        let lu = a.apply(&vals);
        // L x² = 2 x a + 2 x b = 4x; central stencils are quadratic-exact, and
        // so is the one-sided outer row. The x = 0 row uses the first-order
        // drift difference whose truncation is the first spacing X/J².
        let h0 = space.axes[0][1];
        for (s, v) in lu.iter().enumerate() {
            let x = space.point(s).x[0];
            if s == 0 {
                assert!((v - 4.0 * x).abs() <= h0 * 1.000001, "face node: {v}");
            } else {
                assert!((v - 4.0 * x).abs() <= 1e-10, "node {s}: {v} vs {}", 4.0 * x);
            }
        }
    }

    #[test]
    fn discretize_refuses_negative_face_drift() {
        let lc = constant_op(dims10(), 1.0, -0.1);
        let space = spec_1d(16, 0.1, 1.0).spatial().unwrap();
        assert!(matches!(
            discretize(&lc, &space),
            Err(Error::Assumption(_))
        ));
    }

    #[test]
    fn degenerate_row_weights_vanish_at_face() {
        // pure second-order operator: the x = 0 row must be identically zero
        let lc = constant_op(dims10(), 1.0, 0.0);
        let space = spec_1d(16, 0.1, 1.0).spatial().unwrap();
        let a = discretize(&lc, &space).unwrap();
        for k in a.row_ptr[0]..a.row_ptr[1] {
            assert_eq!(a.val[k], 0.0);
        }
    }

    fn default_cfg(j: usize, dt: f64, t_final: f64) -> SolveConfig {
        SolveConfig {
            grid: spec_1d(j, dt, t_final),
            scheme: Scheme::ImplicitEuler,
            boundary: OuterBoundary::BufferExtrapolation,
            solver_tol: 1e-13,
            margin: 0.5,
        }
    }

    #[test]
    fn constant_source_gives_linear_in_time() {
        // f = 0, g = -1: u(t, ·) = -t exactly (constants are in the kernel)
        let lc = constant_op(dims10(), 1.0, 0.5);
        let zero = Expr::Const(0.0);
        let g = Expr::Const(-1.0);
        let cfg = default_cfg(16, 0.125, 1.0);
        let u = solve_ivp(&lc, InitialData::Expr(&zero), &g, &cfg).unwrap();
        let ns = u.grid.space.node_count();
        for (ti, &t) in u.grid.times.iter().enumerate() {
            for si in 0..ns {
                assert_abs_diff_eq!(u.values()[ti * ns + si], -t, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn linear_initial_data_is_exact() {
        // f = x, g = 0, L = x a ∂² + b ∂: u = x + b t exactly
        let b = 0.5;
        let lc = constant_op(dims10(), 1.0, b);
        let f = parse("x1", dims10()).unwrap();
        let g = Expr::Const(0.0);
        let cfg = default_cfg(16, 0.125, 1.0);
        let u = solve_ivp(&lc, InitialData::Expr(&f), &g, &cfg).unwrap();
        let ns = u.grid.space.node_count();
        for (ti, &t) in u.grid.times.iter().enumerate() {
            for si in 0..ns {
                let x = u.grid.space.point(si).x[0];
                assert!(
                    (u.values()[ti * ns + si] - (x + b * t)).abs() <= 1e-10,
                    "t {t} x {x}"
                );
            }
        }
    }

    #[test]
    fn crank_nicolson_matches_exact_linear_flow() {
        let b = 0.5;
        let lc = constant_op(dims10(), 1.0, b);
        let f = parse("x1", dims10()).unwrap();
        let g = Expr::Const(0.0);
        let mut cfg = default_cfg(16, 0.125, 1.0);
        cfg.scheme = Scheme::CrankNicolson;
        let u = solve_ivp(&lc, InitialData::Expr(&f), &g, &cfg).unwrap();
        let ns = u.grid.space.node_count();
        let last = u.grid.times.len() - 1;
        for si in 0..ns {
            let x = u.grid.space.point(si).x[0];
            assert!((u.values()[last * ns + si] - (x + b)).abs() <= 1e-10);
        }
    }

    #[test]
    fn oracle_dirichlet_quadratic_close_to_exact() {
        // f = x², u(t,x) = x² + 2(1+b)x t + (1+b) b t²; implicit Euler has
        // O(dt) error, spatial part exact on quadratics
        let b = 0.5;
        let lc = constant_op(dims10(), 1.0, b);
        let f = parse("x1^2", dims10()).unwrap();
        let g = Expr::Const(0.0);
        let mut cfg = default_cfg(32, 1.0 / 512.0, 0.5);
        cfg.boundary = OuterBoundary::OracleDirichlet;
        let u = solve_ivp(&lc, InitialData::Expr(&f), &g, &cfg).unwrap();
        let ns = u.grid.space.node_count();
        let last = u.grid.times.len() - 1;
        let t = 0.5;
        for si in 0..ns {
            let x = u.grid.space.point(si).x[0];
            let exact = x * x + 2.0 * (1.0 + b) * x * t + (1.0 + b) * b * t * t;
            assert!(
                (u.values()[last * ns + si] - exact).abs() <= 5e-3,
                "x {x}: {} vs {exact}",
                u.values()[last * ns + si]
            );
        }
    }

    #[test]
    fn solution_map_is_linear() {
        let lc = constant_op(dims10(), 1.0, 0.5);
        let cfg = default_cfg(12, 0.125, 0.5);
        let f1 = parse("x1*(1-x1)", dims10()).unwrap();
        let g1 = Expr::Const(0.0);
        let f2 = parse("x1^2", dims10()).unwrap();
        let g2 = parse("1 - t", Dims::new(1, 0)).unwrap();
        let alpha = 1.75;
        let u1 = solve_ivp(&lc, InitialData::Expr(&f1), &g1, &cfg).unwrap();
        let u2 = solve_ivp(&lc, InitialData::Expr(&f2), &g2, &cfg).unwrap();
        // α f1 + f2, α g1 + g2
        let f_combo = Expr::Add(
            Box::new(Expr::Mul(Box::new(Expr::Const(alpha)), Box::new(f1))),
            Box::new(f2),
        );
        let g_combo = Expr::Add(
            Box::new(Expr::Mul(Box::new(Expr::Const(alpha)), Box::new(g1))),
            Box::new(g2),
        );
        let uc = solve_ivp(&lc, InitialData::Expr(&f_combo), &g_combo, &cfg).unwrap();
        for ((a, b), c) in u1.values().iter().zip(u2.values()).zip(uc.values()) {
            assert!((alpha * a + b - c).abs() <= 1e-9);
        }
    }

    #[test]
    fn discrete_comparison_principle() {
        // g ≤ 0, f ≤ 0, diagonal operator with 2a ≥ 3b: u stays ≤ tol
        let lc = constant_op(dims10(), 1.0, 0.5);
        let f = parse("-x1^2", dims10()).unwrap();
        let g = parse("-1 + 0*t", Dims::new(1, 0)).unwrap();
        let cfg = default_cfg(24, 0.0625, 1.0);
        let u = solve_ivp(&lc, InitialData::Expr(&f), &g, &cfg).unwrap();
        let tol = cfg.solver_tol * 10.0;
        for v in u.values() {
            assert!(*v <= tol, "comparison violated: {v}");
        }
    }

    #[test]
    fn estimate_derivatives_quadratic() {
        let lc = constant_op(dims10(), 1.0, 0.5);
        let f = parse("x1^2", dims10()).unwrap();
        let g = Expr::Const(0.0);
        let cfg = default_cfg(16, 0.25, 0.5);
        let u = solve_ivp(&lc, InitialData::Expr(&f), &g, &cfg).unwrap();
        let with_derivs = estimate_derivatives(&u).unwrap();
        // at t = 0 the field is exactly x², so u_xx = 2 everywhere
        let uxx = with_derivs
            .slot(&DerivKey {
                tau: 0,
                zeta: vec![2],
            })
            .unwrap();
        let ns = u.grid.space.node_count();
        for si in 0..ns {
            assert!((uxx[si] - 2.0).abs() <= 1e-8, "node {si}: {}", uxx[si]);
        }
    }

    #[test]
    fn estimate_derivatives_constant_field() {
        let space = spec_1d(8, 0.5, 1.0);
        let grid = space.build().unwrap();
        let f = SampledField::from_fn(grid, |_, _| 4.0).unwrap();
        let d = estimate_derivatives(&f).unwrap();
        for key in [
            DerivKey {
                tau: 0,
                zeta: vec![1],
            },
            DerivKey {
                tau: 0,
                zeta: vec![2],
            },
            DerivKey {
                tau: 1,
                zeta: vec![0],
            },
        ] {
            for v in d.slot(&key).unwrap() {
                assert!(v.abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn residual_recovers_source_for_implicit_euler() {
        // (u^k − u^{k-1})/dt − A u^k = g^k at interior rows, to solver tol
        let lc = constant_op(dims10(), 1.0, 0.5);
        let f = parse("x1*(1-x1)", dims10()).unwrap();
        let g = parse("sin(x1)", dims10()).unwrap();
        let cfg = default_cfg(16, 0.125, 0.5);
        let u = solve_ivp(&lc, InitialData::Expr(&f), &g, &cfg).unwrap();
        let d = estimate_derivatives(&u).unwrap();
        let a = discretize(&lc, &u.grid.space).unwrap();
        let ns = u.grid.space.node_count();
        let nt = u.grid.times.len();
        let ut = d
            .slot(&DerivKey {
                tau: 1,
                zeta: vec![0],
            })
            .unwrap();
        for ti in 1..nt {
            let slice = &u.values()[ti * ns..(ti + 1) * ns];
            let au = a.apply(slice);
            for si in 1..ns - 1 {
                let res = ut[ti * ns + si] - au[si];
                let gv = g.eval(u.grid.times[ti], &u.grid.space.point(si)).unwrap();
                assert!(
                    (res - gv).abs() <= 1e-8,
                    "t {} node {si}: residual {res} vs {gv}",
                    u.grid.times[ti]
                );
            }
        }
    }
}
