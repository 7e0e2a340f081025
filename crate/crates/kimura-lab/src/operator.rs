//! The degenerate second-order operator
//!
//! ```text
//! Lu = Σ_i ( x_i a_ii(z) u_{x_i x_i} + b_i(z) u_{x_i} )
//!    + Σ_{i,j} x_i x_j ã_ij(z) u_{x_i x_j}
//!    + Σ_{i,l} x_i c_il(z) u_{x_i y_l}
//!    + Σ_{k,l} d_kl(z) u_{y_k y_l}
//!    + Σ_l e_l(z) u_{y_l},
//! ```
//!
//! together with validation of its standing assumptions (strict ellipticity,
//! bounded Hölder coefficients, nonnegative drift at the degenerate faces),
//! coefficient freezing into the constant-coefficient model operators, and
//! the `Λ` sup-norm constant of the `Lu` estimate.
//!
//! Freezing at a point `z^N` with region set `I_N` keeps the structural
//! factor `x_i` for `i ∈ I_N` and replaces it by the constant `x_i^N` for
//! `i ∉ I_N`; with `I_N = {1..n}` this is the fully degenerate model
//! operator frozen at `z^N`.

use crate::error::{Error, Result};
use crate::exprlang::{differentiate, Expr, Var};
use crate::field::SampledField;
use crate::geometry::{Dims, Point, RegionIndex, SpatialPoint};
use crate::linalg::{symmetric_eigenvalues, DenseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Structural factor of the second-order `x_i` terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XFactor {
    /// The genuine degenerate factor `x_i`.
    Degenerate,
    /// Frozen constant `x_i^N`, used by the model operators for `i ∉ I_N`.
    Frozen(f64),
}

impl XFactor {
    #[inline]
    pub fn value(&self, xi: f64) -> f64 {
        match self {
            XFactor::Degenerate => xi,
            XFactor::Frozen(v) => *v,
        }
    }
}

/// The coefficient functions of the operator, spatial expressions only.
#[derive(Debug, Clone)]
pub struct CoefficientSet {
    pub dims: Dims,
    /// `a_ii`, length n.
    pub a: Vec<Expr>,
    /// `ã_ij`, row-major n×n.
    pub atilde: Vec<Expr>,
    /// `b_i`, length n.
    pub b: Vec<Expr>,
    /// `c_il`, row-major n×m.
    pub c: Vec<Expr>,
    /// `d_kl`, row-major m×m.
    pub d: Vec<Expr>,
    /// `e_l`, length m.
    pub e: Vec<Expr>,
    /// Per-axis structural factor, length n; `Degenerate` for the real
    /// operator.
    pub x_factor: Vec<XFactor>,
}

impl CoefficientSet {
    pub fn new(
        dims: Dims,
        a: Vec<Expr>,
        atilde: Vec<Expr>,
        b: Vec<Expr>,
        c: Vec<Expr>,
        d: Vec<Expr>,
        e: Vec<Expr>,
    ) -> Result<Self> {
        let (n, m) = (dims.n, dims.m);
        let shapes = [
            (a.len(), n, "a"),
            (atilde.len(), n * n, "atilde"),
            (b.len(), n, "b"),
            (c.len(), n * m, "c"),
            (d.len(), m * m, "d"),
            (e.len(), m, "e"),
        ];
        for (got, want, name) in shapes {
            if got != want {
                return Err(Error::Config(format!(
                    "coefficient {name}: expected {want} expressions, got {got}"
                )));
            }
        }
        for expr in a.iter().chain(&atilde).chain(&b).chain(&c).chain(&d).chain(&e) {
            if expr.uses_time() {
                return Err(Error::Config(
                    "coefficient expressions must be spatial only".into(),
                ));
            }
        }
        Ok(CoefficientSet {
            dims,
            a,
            atilde,
            b,
            c,
            d,
            e,
            x_factor: vec![XFactor::Degenerate; n],
        })
    }

    /// Diagonal operator convenience (no cross terms).
    pub fn diagonal(
        dims: Dims,
        a: Vec<Expr>,
        b: Vec<Expr>,
        d_diag: Vec<Expr>,
        e: Vec<Expr>,
    ) -> Result<Self> {
        let (n, m) = (dims.n, dims.m);
        let zero = Expr::Const(0.0);
        let atilde = vec![zero.clone(); n * n];
        let mut d = vec![zero.clone(); m * m];
        if d_diag.len() != m {
            return Err(Error::Config("d_diag length must equal m".into()));
        }
        for (l, expr) in d_diag.into_iter().enumerate() {
            d[l * m + l] = expr;
        }
        CoefficientSet::new(dims, a, atilde, b, vec![zero; n * m], d, e)
    }

    #[inline]
    pub fn atilde(&self, i: usize, j: usize) -> &Expr {
        &self.atilde[i * self.dims.n + j]
    }

    #[inline]
    pub fn c(&self, i: usize, l: usize) -> &Expr {
        &self.c[i * self.dims.m + l]
    }

    #[inline]
    pub fn d(&self, k: usize, l: usize) -> &Expr {
        &self.d[k * self.dims.m + l]
    }

    /// True when every coefficient is a literal constant.
    pub fn is_constant(&self) -> bool {
        self.a
            .iter()
            .chain(&self.atilde)
            .chain(&self.b)
            .chain(&self.c)
            .chain(&self.d)
            .chain(&self.e)
            .all(|e| e.is_constant())
    }

    /// Freeze every coefficient at `z_n` and keep/replace the degenerate
    /// factors according to `i_n`. With `i_n` the full set this is the frozen
    /// model operator at `z_n`; already-constant coefficients are unchanged
    /// pointwise.
    pub fn freeze(&self, z_n: &SpatialPoint, i_n: &RegionIndex) -> Result<CoefficientSet> {
        let freeze_expr = |e: &Expr| -> Result<Expr> { Ok(Expr::Const(e.eval_spatial(z_n)?)) };
        let mut frozen = CoefficientSet {
            dims: self.dims,
            a: self.a.iter().map(&freeze_expr).collect::<Result<_>>()?,
            atilde: self.atilde.iter().map(&freeze_expr).collect::<Result<_>>()?,
            b: self.b.iter().map(&freeze_expr).collect::<Result<_>>()?,
            c: self.c.iter().map(&freeze_expr).collect::<Result<_>>()?,
            d: self.d.iter().map(&freeze_expr).collect::<Result<_>>()?,
            e: self.e.iter().map(&freeze_expr).collect::<Result<_>>()?,
            x_factor: Vec::with_capacity(self.dims.n),
        };
        for i in 0..self.dims.n {
            frozen.x_factor.push(if i_n.contains(i) {
                self.x_factor[i]
            } else {
                XFactor::Frozen(self.x_factor[i].value(z_n.x[i]))
            });
        }
        Ok(frozen)
    }
}

/// `L` applied to a smooth expression, derivative expressions prepared once.
pub struct PreparedOperator<'a> {
    pub coeffs: &'a CoefficientSet,
    du_x: Vec<Expr>,
    du_y: Vec<Expr>,
    du_xx: Vec<Expr>,
    du_xy: Vec<Expr>,
    du_yy: Vec<Expr>,
}

impl<'a> PreparedOperator<'a> {
    pub fn new(coeffs: &'a CoefficientSet, u: &Expr) -> Self {
        let (n, m) = (coeffs.dims.n, coeffs.dims.m);
        let du_x: Vec<Expr> = (0..n).map(|i| differentiate(u, Var::X(i))).collect();
        let du_y: Vec<Expr> = (0..m).map(|l| differentiate(u, Var::Y(l))).collect();
        let mut du_xx = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                du_xx.push(differentiate(&du_x[i], Var::X(j)));
            }
        }
        let mut du_xy = Vec::with_capacity(n * m);
        for i in 0..n {
            for l in 0..m {
                du_xy.push(differentiate(&du_x[i], Var::Y(l)));
            }
        }
        let mut du_yy = Vec::with_capacity(m * m);
        for k in 0..m {
            for l in 0..m {
                du_yy.push(differentiate(&du_y[k], Var::Y(l)));
            }
        }
        PreparedOperator {
            coeffs,
            du_x,
            du_y,
            du_xx,
            du_xy,
            du_yy,
        }
    }

    pub fn eval(&self, p: &Point) -> Result<f64> {
        let lc = self.coeffs;
        let (n, m) = (lc.dims.n, lc.dims.m);
        let z = &p.z;
        let t = p.t;
        let mut acc = 0.0;
        for i in 0..n {
            let fac = lc.x_factor[i].value(z.x[i]);
            acc += fac * lc.a[i].eval(t, z)? * self.du_xx[i * n + i].eval(t, z)?;
            acc += lc.b[i].eval(t, z)? * self.du_x[i].eval(t, z)?;
        }
        for i in 0..n {
            let fac_i = lc.x_factor[i].value(z.x[i]);
            for j in 0..n {
                let fac_j = lc.x_factor[j].value(z.x[j]);
                let w = fac_i * fac_j * lc.atilde(i, j).eval(t, z)?;
                if w != 0.0 {
                    acc += w * self.du_xx[i * n + j].eval(t, z)?;
                }
            }
        }
        for i in 0..n {
            let fac_i = lc.x_factor[i].value(z.x[i]);
            for l in 0..m {
                let w = fac_i * lc.c(i, l).eval(t, z)?;
                if w != 0.0 {
                    acc += w * self.du_xy[i * m + l].eval(t, z)?;
                }
            }
        }
        for k in 0..m {
            for l in 0..m {
                let w = lc.d(k, l).eval(t, z)?;
                if w != 0.0 {
                    acc += w * self.du_yy[k * m + l].eval(t, z)?;
                }
            }
        }
        for l in 0..m {
            acc += lc.e[l].eval(t, z)? * self.du_y[l].eval(t, z)?;
        }
        Ok(acc)
    }
}

/// `L u` at a point, all derivatives symbolic.
pub fn apply(coeffs: &CoefficientSet, u: &Expr, p: &Point) -> Result<f64> {
    PreparedOperator::new(coeffs, u).eval(p)
}

/// Discrete application of `L` to a sampled field: one-sided stencils at the
/// outer box faces so every node carries a value, degenerate terms dropped on
/// `x_i = 0`. Agrees with [`apply`] to rounding on quadratic data in the
/// interior.
pub fn apply_discrete(coeffs: &CoefficientSet, u: &SampledField) -> Result<SampledField> {
    let grid = u.grid.clone();
    let a = crate::solver::assemble_spatial_operator(
        coeffs,
        &grid.space,
        crate::solver::BoundaryRows::OneSided,
    )?;
    let values = u.values();
    let ns = grid.space.node_count();
    let mut out = Vec::with_capacity(values.len());
    for slice in values.chunks(ns) {
        out.extend(a.apply(slice));
    }
    SampledField::from_values(grid, out)
}

// ---------------------------------------------------------------------------
// Assumption validation
// ---------------------------------------------------------------------------

/// Sampling plan for [`validate_assumptions`].
#[derive(Debug, Clone)]
pub struct SamplingSpec {
    pub points_per_region: usize,
    pub directions: usize,
    pub seed: u64,
    /// Upper bound used when sampling coordinates that range to infinity.
    pub x_cap: f64,
    pub y_cap: f64,
    /// Hölder exponent for the coefficient-norm estimate.
    pub alpha: f64,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        SamplingSpec {
            points_per_region: 160,
            directions: 256,
            seed: 0,
            x_cap: 2.0,
            y_cap: 1.0,
            alpha: 0.5,
        }
    }
}

/// Outcome of the assumption checks, reporting measured constants.
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    /// Minimum of the quadratic form over sampled points and directions,
    /// also capped by the symmetrized eigenvalue path.
    pub delta_hat: f64,
    /// Minimum eigenvalue of the symmetrized form alone.
    pub delta_sym_min: f64,
    /// Measured sup + Hölder bound of the weighted coefficient family.
    pub k_hat: f64,
    /// Minimum of each `b_i` over sampled points of the face `x_i = 0`.
    pub b_min_boundary: f64,
    pub ellipticity_pass: bool,
    pub coefficient_bound_pass: bool,
    pub nonnegativity_pass: bool,
    pub points_sampled: usize,
    pub directions_used: usize,
    /// Violation labels for failed conditions.
    pub violations: Vec<String>,
    /// Measured ellipticity constant per region (region bitmask, value).
    pub per_region_delta: Vec<(u64, f64)>,
}

impl AssumptionReport {
    pub fn pass(&self) -> bool {
        self.ellipticity_pass && self.coefficient_bound_pass && self.nonnegativity_pass
    }

    pub fn region_delta(&self, region: &RegionIndex) -> Option<f64> {
        self.per_region_delta
            .iter()
            .find(|(bits, _)| *bits == region.bits())
            .map(|(_, v)| *v)
    }
}

/// Unit directions in dimension `dim`: antipodal pair in 1-D, equispaced
/// angles in 2-D, a Fibonacci sphere in 3-D, seeded Gaussian directions
/// beyond.
pub fn unit_directions(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    match dim {
        0 => Vec::new(),
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                vec![th.cos(), th.sin()]
            })
            .collect(),
        3 => {
            let golden = (1.0 + 5.0f64.sqrt()) / 2.0;
            (0..count)
                .map(|k| {
                    let i = k as f64 + 0.5;
                    let phi = (1.0 - 2.0 * i / count as f64).acos();
                    let theta = 2.0 * std::f64::consts::PI * i / golden;
                    vec![phi.sin() * theta.cos(), phi.sin() * theta.sin(), phi.cos()]
                })
                .collect()
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
            (0..count)
                .map(|_| loop {
                    let v: Vec<f64> = (0..dim)
                        .map(|_| {
                            let u1: f64 = rng.gen_range(1e-12..1.0);
                            let u2: f64 = rng.gen_range(0.0..1.0);
                            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
                        })
                        .collect();
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if norm > 1e-6 {
                        return v.iter().map(|x| x / norm).collect();
                    }
                })
                .collect()
        }
    }
}

/// The quadratic form of the strict-ellipticity condition for region `I`,
/// evaluated verbatim at `z` in direction `(xi, eta)`.
pub fn ellipticity_form(
    lc: &CoefficientSet,
    region: &RegionIndex,
    z: &SpatialPoint,
    xi: &[f64],
    eta: &[f64],
) -> Result<f64> {
    let (n, m) = (lc.dims.n, lc.dims.m);
    let mut acc = 0.0;
    for i in 0..n {
        let aii = lc.a[i].eval_spatial(z)?;
        if region.contains(i) {
            acc += aii * xi[i] * xi[i];
        } else {
            acc += z.x[i] * aii * xi[i] * xi[i];
        }
    }
    for i in 0..n {
        for j in 0..n {
            let at = lc.atilde(i, j).eval_spatial(z)?;
            if at == 0.0 {
                continue;
            }
            match (region.contains(i), region.contains(j)) {
                (true, true) => acc += at * xi[i] * xi[j],
                (true, false) => {
                    // the condition pairs ã_ij + ã_ji once per unordered pair
                    let at_ji = lc.atilde(j, i).eval_spatial(z)?;
                    acc += z.x[j] * (at + at_ji) * xi[i] * xi[j];
                }
                (false, true) => { /* counted by the (true, false) branch */ }
                (false, false) => acc += z.x[i] * z.x[j] * at * xi[i] * xi[j],
            }
        }
    }
    for i in 0..n {
        for l in 0..m {
            let cil = lc.c(i, l).eval_spatial(z)?;
            if cil == 0.0 {
                continue;
            }
            let w = if region.contains(i) { cil } else { z.x[i] * cil };
            acc += w * xi[i] * eta[l];
        }
    }
    for k in 0..m {
        for l in 0..m {
            acc += lc.d(k, l).eval_spatial(z)? * eta[k] * eta[l];
        }
    }
    Ok(acc)
}

/// Symmetric matrix whose form equals the ellipticity form at `z`.
fn ellipticity_matrix(
    lc: &CoefficientSet,
    region: &RegionIndex,
    z: &SpatialPoint,
) -> Result<DenseMatrix> {
    let (n, m) = (lc.dims.n, lc.dims.m);
    let dim = n + m;
    let mut mat = DenseMatrix::zeros(dim);
    let add_sym = |mat: &mut DenseMatrix, i: usize, j: usize, w: f64| {
        if i == j {
            mat.set(i, i, mat.get(i, i) + w);
        } else {
            mat.set(i, j, mat.get(i, j) + w / 2.0);
            mat.set(j, i, mat.get(j, i) + w / 2.0);
        }
    };
    for i in 0..n {
        let aii = lc.a[i].eval_spatial(z)?;
        let w = if region.contains(i) { aii } else { z.x[i] * aii };
        add_sym(&mut mat, i, i, w);
    }
    for i in 0..n {
        for j in 0..n {
            let at = lc.atilde(i, j).eval_spatial(z)?;
            if at == 0.0 {
                continue;
            }
            let w = match (region.contains(i), region.contains(j)) {
                (true, true) => at,
                (true, false) => z.x[j] * at,
                (false, true) => z.x[i] * at,
                (false, false) => z.x[i] * z.x[j] * at,
            };
            add_sym(&mut mat, i, j, w);
        }
    }
    for i in 0..n {
        for l in 0..m {
            let cil = lc.c(i, l).eval_spatial(z)?;
            if cil == 0.0 {
                continue;
            }
            let w = if region.contains(i) { cil } else { z.x[i] * cil };
            add_sym(&mut mat, i, n + l, w);
        }
    }
    for k in 0..m {
        for l in 0..m {
            let dkl = lc.d(k, l).eval_spatial(z)?;
            if dkl != 0.0 {
                add_sym(&mut mat, n + k, n + l, dkl);
            }
        }
    }
    Ok(mat)
}

fn sample_region_point(
    lc: &CoefficientSet,
    region: &RegionIndex,
    spec: &SamplingSpec,
    rng: &mut ChaCha8Rng,
) -> SpatialPoint {
    let (n, m) = (lc.dims.n, lc.dims.m);
    let mut x = Vec::with_capacity(n);
    for i in 0..n {
        if region.contains(i) {
            x.push(rng.gen_range(0.0..=1.0));
        } else {
            x.push(rng.gen_range(1.0..=spec.x_cap.max(1.0)));
        }
    }
    let y = (0..m)
        .map(|_| rng.gen_range(-spec.y_cap..=spec.y_cap))
        .collect();
    SpatialPoint { x, y }
}

/// Weighted coefficient family of the Hölder-bound condition for region `I`:
/// (label, coefficient, optional extra x-weight index).
fn coefficient_family(
    lc: &CoefficientSet,
    region: &RegionIndex,
) -> Vec<(String, Expr, Option<usize>)> {
    let (n, m) = (lc.dims.n, lc.dims.m);
    let mut fam = Vec::new();
    let is_zero = |e: &Expr| matches!(e, Expr::Const(c) if *c == 0.0);
    for i in 0..n {
        if region.contains(i) {
            fam.push((format!("a{}{}", i + 1, i + 1), lc.a[i].clone(), None));
        } else {
            fam.push((
                format!("x{} a{}{}", i + 1, i + 1, i + 1),
                lc.a[i].clone(),
                Some(i),
            ));
        }
    }
    for i in 0..n {
        for j in 0..n {
            let at = lc.atilde(i, j);
            if is_zero(at) {
                continue;
            }
            let label = format!("atilde{}{}", i + 1, j + 1);
            match (region.contains(i), region.contains(j)) {
                (true, true) => fam.push((label, at.clone(), None)),
                (true, false) => fam.push((format!("x{} {label}", j + 1), at.clone(), Some(j))),
                (false, true) => fam.push((format!("x{} {label}", i + 1), at.clone(), Some(i))),
                (false, false) => {
                    let weighted = Expr::Mul(Box::new(Expr::Var(Var::X(i))), Box::new(at.clone()));
                    fam.push((format!("x{}x{} {label}", i + 1, j + 1), weighted, Some(j)));
                }
            }
        }
    }
    for i in 0..n {
        for l in 0..m {
            let cil = lc.c(i, l);
            if is_zero(cil) {
                continue;
            }
            let label = format!("c{}{}", i + 1, l + 1);
            if region.contains(i) {
                fam.push((label, cil.clone(), None));
            } else {
                fam.push((format!("x{} {label}", i + 1), cil.clone(), Some(i)));
            }
        }
    }
    for k in 0..m {
        for l in 0..m {
            let dkl = lc.d(k, l);
            if !is_zero(dkl) {
                fam.push((format!("d{}{}", k + 1, l + 1), dkl.clone(), None));
            }
        }
    }
    for i in 0..n {
        fam.push((format!("b{}", i + 1), lc.b[i].clone(), None));
    }
    for l in 0..m {
        if !is_zero(&lc.e[l]) {
            fam.push((format!("e{}", l + 1), lc.e[l].clone(), None));
        }
    }
    fam
}

/// Check strict ellipticity, the coefficient Hölder bound (k = 0 part), and
/// drift nonnegativity at the degenerate faces, by seeded sampling.
pub fn validate_assumptions(lc: &CoefficientSet, spec: &SamplingSpec) -> Result<AssumptionReport> {
    let (n, m) = (lc.dims.n, lc.dims.m);
    let dim = n + m;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dirs = unit_directions(dim, spec.directions, spec.seed);
    let mut delta_hat = f64::INFINITY;
    let mut delta_sym = f64::INFINITY;
    let mut k_hat: f64 = 0.0;
    let mut points_sampled = 0;
    let mut per_region_delta = Vec::new();

    for region in RegionIndex::all_subsets(n) {
        let mut samples = Vec::with_capacity(spec.points_per_region);
        for _ in 0..spec.points_per_region {
            samples.push(sample_region_point(lc, &region, spec, &mut rng));
        }
        points_sampled += samples.len();
        let mut region_delta = f64::INFINITY;
        for z in &samples {
            for dir in &dirs {
                let (xi, eta) = dir.split_at(n);
                let q = ellipticity_form(lc, &region, z, xi, eta)?;
                region_delta = region_delta.min(q);
            }
            if dim > 0 {
                let eigs = symmetric_eigenvalues(&ellipticity_matrix(lc, &region, z)?);
                region_delta = region_delta.min(eigs[0]);
                delta_sym = delta_sym.min(eigs[0]);
            }
        }
        per_region_delta.push((region.bits(), region_delta));
        delta_hat = delta_hat.min(region_delta);
        let family = coefficient_family(lc, &region);
        let mut region_k = 0.0;
        for (_, expr, weight) in &family {
            let eval_at = |z: &SpatialPoint| -> Result<f64> {
                let mut v = expr.eval_spatial(z)?;
                if let Some(i) = weight {
                    v *= z.x[*i];
                }
                Ok(v)
            };
            let vals: Vec<f64> = samples.iter().map(eval_at).collect::<Result<Vec<_>>>()?;
            let sup = vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            let mut semi = 0.0f64;
            for p in 0..samples.len() {
                for q in (p + 1)..samples.len() {
                    let dist = crate::geometry::rho0(&samples[p], &samples[q])?;
                    if dist > 0.0 {
                        semi = semi.max((vals[p] - vals[q]).abs() / dist.powf(spec.alpha));
                    }
                }
            }
            region_k += sup + semi;
        }
        k_hat = k_hat.max(region_k);
    }

    let mut b_min = f64::INFINITY;
    for i in 0..n {
        for _ in 0..spec.points_per_region.max(1) {
            let mut x: Vec<f64> = (0..n)
                .map(|_| rng.gen_range(0.0..=spec.x_cap.max(1.0)))
                .collect();
            x[i] = 0.0;
            let y: Vec<f64> = (0..m)
                .map(|_| rng.gen_range(-spec.y_cap..=spec.y_cap))
                .collect();
            let z = SpatialPoint { x, y };
            b_min = b_min.min(lc.b[i].eval_spatial(&z)?);
        }
    }

    let ellipticity_pass = delta_hat > 0.0;
    let coefficient_bound_pass = k_hat.is_finite();
    let nonnegativity_pass = n == 0 || b_min >= 0.0;
    let mut violations = Vec::new();
    if !ellipticity_pass {
        violations.push("EllipticityViolation".to_string());
    }
    if !coefficient_bound_pass {
        violations.push("CoefficientBoundViolation".to_string());
    }
    if !nonnegativity_pass {
        violations.push("NonnegativityViolation".to_string());
    }
    Ok(AssumptionReport {
        delta_hat,
        delta_sym_min: delta_sym,
        k_hat,
        b_min_boundary: b_min,
        ellipticity_pass,
        coefficient_bound_pass,
        nonnegativity_pass,
        points_sampled,
        directions_used: dirs.len(),
        violations,
        per_region_delta,
    })
}

// ---------------------------------------------------------------------------
// Λ constant
// ---------------------------------------------------------------------------

/// A sampled axis-aligned box with per-axis resolution, for sup-norm
/// estimates of the coefficients.
#[derive(Debug, Clone)]
pub struct RegionBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub samples_per_axis: usize,
}

impl RegionBox {
    pub fn sample_points(&self, dims: Dims) -> Vec<SpatialPoint> {
        let axes = dims.total();
        assert_eq!(self.lo.len(), axes);
        let s = self.samples_per_axis.max(2);
        let mut pts = Vec::new();
        let mut idx = vec![0usize; axes];
        loop {
            let coords: Vec<f64> = (0..axes)
                .map(|a| self.lo[a] + (self.hi[a] - self.lo[a]) * idx[a] as f64 / (s - 1) as f64)
                .collect();
            let (x, y) = coords.split_at(dims.n);
            pts.push(SpatialPoint {
                x: x.to_vec(),
                y: y.to_vec(),
            });
            let mut a = axes;
            loop {
                if a == 0 {
                    return pts;
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] < s {
                    break;
                }
                idx[a] = 0;
            }
        }
    }
}

/// The `Λ` sup-norm sum of the `Lu` estimate over a sampled box `U` for
/// region set `I`.
pub fn compute_lambda(lc: &CoefficientSet, u_box: &RegionBox, region: &RegionIndex) -> Result<f64> {
    let (n, m) = (lc.dims.n, lc.dims.m);
    let pts = u_box.sample_points(lc.dims);
    let sup = |f: &dyn Fn(&SpatialPoint) -> Result<f64>| -> Result<f64> {
        let mut s = 0.0f64;
        for z in &pts {
            s = s.max(f(z)?.abs());
        }
        Ok(s)
    };
    let mut lambda = 0.0;
    for i in 0..n {
        if region.contains(i) {
            lambda += sup(&|z| lc.a[i].eval_spatial(z))?;
        } else {
            lambda += sup(&|z| Ok(z.x[i] * lc.a[i].eval_spatial(z)?))?;
        }
    }
    for i in 0..n {
        for j in 0..n {
            match (region.contains(i), region.contains(j)) {
                (true, true) => lambda += sup(&|z| lc.atilde(i, j).eval_spatial(z))?,
                (true, false) => {
                    lambda += sup(&|z| Ok(z.x[j] * lc.atilde(i, j).eval_spatial(z)?))?
                }
                (false, true) => {
                    lambda += sup(&|z| Ok(z.x[i] * lc.atilde(i, j).eval_spatial(z)?))?
                }
                // pairs fully outside I are absent from the Λ sum
                (false, false) => {}
            }
        }
    }
    for i in 0..n {
        lambda += sup(&|z| lc.b[i].eval_spatial(z))?;
    }
    for i in 0..n {
        for l in 0..m {
            if region.contains(i) {
                lambda += sup(&|z| lc.c(i, l).eval_spatial(z))?;
            } else {
                lambda += sup(&|z| Ok(z.x[i] * lc.c(i, l).eval_spatial(z)?))?;
            }
        }
    }
    for k in 0..m {
        for l in 0..m {
            lambda += sup(&|z| lc.d(k, l).eval_spatial(z))?;
        }
    }
    for l in 0..m {
        lambda += sup(&|z| lc.e[l].eval_spatial(z))?;
    }
    Ok(lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprlang::parse;
    use approx::assert_abs_diff_eq;

    fn dims10() -> Dims {
        Dims::new(1, 0)
    }

    pub(crate) fn consts(dims: Dims, a: f64, b: f64) -> CoefficientSet {
        CoefficientSet::diagonal(
            dims,
            vec![Expr::Const(a); dims.n],
            vec![Expr::Const(b); dims.n],
            vec![Expr::Const(1.0); dims.m],
            vec![Expr::Const(0.0); dims.m],
        )
        .unwrap()
    }

    fn pt(x: &[f64], y: &[f64], t: f64) -> Point {
        Point {
            t,
            z: SpatialPoint {
                x: x.to_vec(),
                y: y.to_vec(),
            },
        }
    }

    #[test]
    fn apply_linear_data_gives_drift() {
        let lc = consts(dims10(), 1.0, 1.0);
        let u = parse("x1", dims10()).unwrap();
        for &x in &[0.0, 0.25, 1.0, 2.0] {
            let v = apply(&lc, &u, &pt(&[x], &[], 0.3)).unwrap();
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn apply_with_tangent_block() {
        // n=1, m=1, a=1, b=1, c=0, d=1, e=0, u = x1^2 + y1^2:
        // Lu = 2 x a + 2 x b ... = 4x + 2, independent of y.
        let d = Dims::new(1, 1);
        let lc = consts(d, 1.0, 1.0);
        let u = parse("x1^2 + y1^2", d).unwrap();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let x = rng.gen_range(0.0..2.0);
            let y = rng.gen_range(-1.0..1.0);
            let v = apply(&lc, &u, &pt(&[x], &[y], 0.1)).unwrap();
            assert_abs_diff_eq!(v, 4.0 * x + 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn apply_constant_is_zero() {
        let lc = consts(dims10(), 1.0, 0.5);
        let u = Expr::Const(7.0);
        assert_eq!(apply(&lc, &u, &pt(&[0.3], &[], 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn apply_is_linear() {
        let lc = consts(dims10(), 1.3, 0.4);
        let u = parse("sin(x1)*x1^2", dims10()).unwrap();
        let v = parse("exp(-x1) + x1^3", dims10()).unwrap();
        let combo = Expr::Add(
            Box::new(Expr::Mul(Box::new(Expr::Const(2.5)), Box::new(u.clone()))),
            Box::new(Expr::Mul(Box::new(Expr::Const(-1.25)), Box::new(v.clone()))),
        );
        let p = pt(&[0.7], &[], 0.2);
        let lhs = apply(&lc, &combo, &p).unwrap();
        let rhs = 2.5 * apply(&lc, &u, &p).unwrap() - 1.25 * apply(&lc, &v, &p).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
    }

    #[test]
    fn degenerate_second_order_term_vanishes_at_boundary() {
        // x * a * u_xx -> 0 along x = 2^-k for bounded second derivatives.
        let lc = consts(dims10(), 1.0, 0.0);
        let u = parse("sin(2*x1)", dims10()).unwrap();
        let mut prev = f64::INFINITY;
        for k in 1..=12 {
            let x = 2f64.powi(-k);
            let v = apply(&lc, &u, &pt(&[x], &[], 0.0)).unwrap().abs();
            assert!(v <= prev + 1e-12);
            prev = v;
        }
        assert!(prev <= 1e-3);
    }

    #[test]
    fn freeze_evaluates_at_point() {
        let d = dims10();
        let lc = CoefficientSet::diagonal(
            d,
            vec![parse("1 + x1", d).unwrap()],
            vec![parse("x1", d).unwrap()],
            vec![],
            vec![],
        )
        .unwrap();
        let z = SpatialPoint {
            x: vec![0.25],
            y: vec![],
        };
        let frozen = lc.freeze(&z, &RegionIndex::full(1)).unwrap();
        assert_eq!(frozen.a[0], Expr::Const(1.25));
        assert_eq!(frozen.b[0], Expr::Const(0.25));
        assert_eq!(frozen.x_factor[0], XFactor::Degenerate);
    }

    #[test]
    fn freeze_outside_region_fixes_factor() {
        // i not in I_N with x_i^N = 2: the term becomes 2 a u_xx, no x factor.
        let lc = consts(dims10(), 1.0, 0.0);
        let z = SpatialPoint {
            x: vec![2.0],
            y: vec![],
        };
        let frozen = lc.freeze(&z, &RegionIndex::empty(1)).unwrap();
        assert_eq!(frozen.x_factor[0], XFactor::Frozen(2.0));
        let u = parse("x1^2", dims10()).unwrap();
        for &x in &[0.0, 0.5, 3.0] {
            let v = apply(&frozen, &u, &pt(&[x], &[], 0.0)).unwrap();
            assert_abs_diff_eq!(v, 4.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn freeze_of_constant_operator_is_identity() {
        let lc = consts(dims10(), 1.5, 0.25);
        let z = SpatialPoint {
            x: vec![0.7],
            y: vec![],
        };
        let frozen = lc.freeze(&z, &RegionIndex::full(1)).unwrap();
        let u = parse("x1^3 + x1", dims10()).unwrap();
        for &x in &[0.0, 0.4, 1.9] {
            let p = pt(&[x], &[], 0.0);
            assert_abs_diff_eq!(
                apply(&frozen, &u, &p).unwrap(),
                apply(&lc, &u, &p).unwrap(),
                epsilon = 1e-13
            );
        }
    }

    #[test]
    fn frozen_operator_agrees_at_center_with_full_region() {
        let d = dims10();
        let lc = CoefficientSet::diagonal(
            d,
            vec![parse("1 + x1^2", d).unwrap()],
            vec![parse("0.5 + x1", d).unwrap()],
            vec![],
            vec![],
        )
        .unwrap();
        let z = SpatialPoint {
            x: vec![0.6],
            y: vec![],
        };
        let frozen = lc.freeze(&z, &RegionIndex::full(1)).unwrap();
        let u = parse("x1^4 - 2*x1^2 + x1", d).unwrap();
        let p = Point {
            t: 0.0,
            z: z.clone(),
        };
        let diff = apply(&lc, &u, &p).unwrap() - apply(&frozen, &u, &p).unwrap();
        assert!(diff.abs() <= 1e-12);
    }

    #[test]
    fn validate_constant_coefficients() {
        let lc = consts(dims10(), 1.0, 0.5);
        let rep = validate_assumptions(&lc, &SamplingSpec::default()).unwrap();
        assert_abs_diff_eq!(rep.delta_hat, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(rep.b_min_boundary, 0.5, epsilon = 1e-12);
        assert!(rep.pass());
    }

    #[test]
    fn validate_negative_drift_fails() {
        let lc = consts(dims10(), 1.0, -0.1);
        let rep = validate_assumptions(&lc, &SamplingSpec::default()).unwrap();
        assert!(!rep.nonnegativity_pass);
        assert_abs_diff_eq!(rep.b_min_boundary, -0.1, epsilon = 1e-12);
        assert!(rep.violations.iter().any(|v| v == "NonnegativityViolation"));
    }

    #[test]
    fn validate_cross_term_eigenvalue() {
        // a11 = a22 = 1, atilde12 = atilde21 = 0.4: on the fully degenerate
        // region the form matrix is [[1, 0.4], [0.4, 1]], smallest eigenvalue
        // 0.6. Other regions pick up x-weighted cross terms and report their
        // own (smaller) minima; the overall delta_hat is their minimum.
        let d = Dims::new(2, 0);
        let mut lc = consts(d, 1.0, 0.0);
        lc.atilde[1] = Expr::Const(0.4);
        lc.atilde[2] = Expr::Const(0.4);
        let rep = validate_assumptions(&lc, &SamplingSpec::default()).unwrap();
        let full = rep.region_delta(&RegionIndex::full(2)).unwrap();
        assert!((full - 0.6).abs() <= 1e-6, "region delta = {full}");
        assert!(rep.delta_hat <= full);
        assert!(rep.ellipticity_pass);
    }

    #[test]
    fn lambda_constant_coefficients() {
        let lc = consts(dims10(), 1.0, 0.5);
        let u_box = RegionBox {
            lo: vec![0.0],
            hi: vec![1.0],
            samples_per_axis: 33,
        };
        let l = compute_lambda(&lc, &u_box, &RegionIndex::full(1)).unwrap();
        assert_abs_diff_eq!(l, 1.5, epsilon = 1e-12);
    }

    #[test]
    fn lambda_zero_coefficients() {
        let d = dims10();
        let lc = CoefficientSet::diagonal(
            d,
            vec![Expr::Const(0.0)],
            vec![Expr::Const(0.0)],
            vec![],
            vec![],
        )
        .unwrap();
        let u_box = RegionBox {
            lo: vec![0.0],
            hi: vec![1.0],
            samples_per_axis: 9,
        };
        assert_eq!(
            compute_lambda(&lc, &u_box, &RegionIndex::full(1)).unwrap(),
            0.0
        );
    }

    #[test]
    fn lambda_linear_coefficient_brute_force() {
        let d = dims10();
        let lc = CoefficientSet::diagonal(
            d,
            vec![parse("x1", d).unwrap()],
            vec![Expr::Const(0.0)],
            vec![],
            vec![],
        )
        .unwrap();
        let u_box = RegionBox {
            lo: vec![0.0],
            hi: vec![1.0],
            samples_per_axis: 65,
        };
        let l = compute_lambda(&lc, &u_box, &RegionIndex::full(1)).unwrap();
        assert_abs_diff_eq!(l, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn lambda_monotone_in_box() {
        let d = dims10();
        let lc = CoefficientSet::diagonal(
            d,
            vec![parse("x1^2", d).unwrap()],
            vec![parse("0.3*x1", d).unwrap()],
            vec![],
            vec![],
        )
        .unwrap();
        let small = RegionBox {
            lo: vec![0.0],
            hi: vec![0.5],
            samples_per_axis: 17,
        };
        let big = RegionBox {
            lo: vec![0.0],
            hi: vec![1.0],
            samples_per_axis: 17,
        };
        let i = RegionIndex::full(1);
        assert!(compute_lambda(&lc, &small, &i).unwrap() <= compute_lambda(&lc, &big, &i).unwrap());
    }
}
