//! Estimate-verification experiments.
//!
//! Each experiment turns one stated property into a desk-scale measurement
//! with an explicit pass rule. The constants in the underlying statements are
//! existence-only, so the pass rules are boundedness and stability of
//! measured quantities across controlled sweeps; the thresholds are frozen in
//! the default configuration and overridable. Every report is deterministic
//! given the configuration hash (runtime is logged separately and never
//! serialized into result files).
//!
//! Registry: `maxprin`, `comparison`, `interp`, `schauder_local`,
//! `schauder_global`, `smoothing`, `oracle`, `lemma`, `cutoff`, `partition`.
//! The comparison battery expects diagonal operators with `b ≤ 2a/3` and
//! data strictly negative at the outer boundary, where the scheme's row
//! sign-structure makes the discrete principle exact to solver tolerance.

pub mod rough;

pub use rough::{RoughKind, RoughMember};

use crate::error::{Error, Result};
use crate::exprlang::Expr;
use crate::field::{DerivKey, FieldView, SampledField};
use crate::geometry::SpatialPoint;
use crate::grid::{GridSpec, SpaceTimeGrid};
use crate::holder::{self, calibration, DomainBox};
use crate::operator::CoefficientSet;
use crate::solver::{
    self, assemble_spatial_operator, estimate_derivatives, BoundaryRows, InitialData, OuterBoundary,
    PolynomialOracle, SolveConfig,
};
use std::sync::Arc;
use std::time::Instant;

/// Pass/fail plus measured constants for one experiment.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub experiment: String,
    pub config_hash: String,
    pub measured: Vec<(String, f64)>,
    pub pass: bool,
    pub notes: Vec<String>,
    /// Wall-clock seconds; logged to the sidecar only, never to result files.
    pub runtime_seconds: f64,
}

impl VerifyReport {
    pub fn new(experiment: &str, pass: bool) -> Self {
        VerifyReport {
            experiment: experiment.to_string(),
            config_hash: String::new(),
            measured: Vec::new(),
            pass,
            notes: Vec::new(),
            runtime_seconds: 0.0,
        }
    }

    pub fn measure(&mut self, name: impl Into<String>, value: f64) {
        self.measured.push((name.into(), value));
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn summary_line(&self) -> String {
        format!(
            "{} {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.experiment
        )
    }
}

/// Frozen decision thresholds of the pass rules.
#[derive(Debug, Clone)]
pub struct Thresholds {
    /// Family-wise ratio bound (`max Q / min Q`).
    pub family_ratio_max: f64,
    /// Relative spread allowed across refinement levels.
    pub refine_stability: f64,
    /// Minimal per-level growth factor witnessing divergence.
    pub divergence_factor: f64,
    /// Slack factor for "monotonically increasing".
    pub monotone_slack: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            family_ratio_max: 3.0,
            refine_stability: 0.25,
            divergence_factor: 2.0,
            monotone_slack: 1.05,
        }
    }
}

/// Parameters of the localized Schauder experiments.
#[derive(Debug, Clone)]
pub struct SchauderParams {
    pub t0: f64,
    pub r: f64,
    /// Ball center, x coordinates then y coordinates.
    pub center: Vec<f64>,
    pub betas: Vec<f64>,
}

/// Everything one experiment needs: problem, discretization, norms and
/// thresholds.
pub struct Lab {
    pub lc: CoefficientSet,
    pub f: DataSpec,
    pub g: Expr,
    pub cfg: SolveConfig,
    pub alpha: f64,
    pub k: usize,
    pub pair_budget: u64,
    pub eps_grid: Vec<f64>,
    pub levels: usize,
    pub thresholds: Thresholds,
    pub schauder: SchauderParams,
    pub config_hash: String,
    pub seed: u64,
}

pub enum DataSpec {
    Expr(Expr),
    Rough(RoughMember),
}

impl DataSpec {
    pub fn eval(&self, z: &SpatialPoint) -> Result<f64> {
        match self {
            DataSpec::Expr(e) => e.eval(0.0, z),
            DataSpec::Rough(r) => Ok(r.eval(z)),
        }
    }
}

pub const EXPERIMENTS: &[&str] = &[
    "maxprin",
    "comparison",
    "interp",
    "schauder_local",
    "schauder_global",
    "smoothing",
    "oracle",
    "lemma",
    "cutoff",
    "partition",
];

/// Run one experiment by registry name.
pub fn run_experiment(lab: &Lab, name: &str) -> Result<VerifyReport> {
    let start = Instant::now();
    let mut report = match name {
        "maxprin" => max_principle_check(lab),
        "comparison" => comparison_check(lab),
        "interp" => interp_check(lab),
        "schauder_local" => schauder_ratio_local(lab),
        "schauder_global" => schauder_ratio_global(lab),
        "smoothing" => smoothing_check(lab),
        "oracle" => oracle_compare(lab),
        "lemma" => lemma_check(lab),
        "cutoff" => cutoff_check(lab),
        "partition" => partition_check(lab),
        other => Err(Error::Verify(format!(
            "unknown experiment `{other}`; registry: {}",
            EXPERIMENTS.join(", ")
        ))),
    }?;
    report.config_hash = lab.config_hash.clone();
    report.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

// ---------------------------------------------------------------------------
// shared machinery
// ---------------------------------------------------------------------------

fn refined_spec(base: &GridSpec, level: usize) -> GridSpec {
    let factor = 1usize << level;
    GridSpec {
        dims: base.dims,
        j: base.j * factor,
        x_max: base.x_max,
        y_intervals: if base.dims.m > 0 {
            base.y_intervals * factor
        } else {
            base.y_intervals
        },
        y_max: base.y_max,
        t_final: base.t_final,
        dt: base.dt / factor as f64,
    }
}

fn solve_level(lab: &Lab, level: usize) -> Result<SampledField> {
    let mut cfg = lab.cfg.clone();
    cfg.grid = refined_spec(&lab.cfg.grid, level);
    let field = match &lab.f {
        DataSpec::Expr(e) => solver::solve_ivp(&lab.lc, InitialData::Expr(e), &lab.g, &cfg)?,
        DataSpec::Rough(r) => {
            let eval = |z: &SpatialPoint| r.eval(z);
            solver::solve_ivp(&lab.lc, InitialData::Fn(&eval), &lab.g, &cfg)?
        }
    };
    Ok(field)
}

/// Sup of |u| over nodes shared by one refinement step, and the max
/// difference there (the two-grid scheme-error estimate).
fn shared_node_difference(coarse: &SampledField, fine: &SampledField) -> f64 {
    let cg = &coarse.grid;
    let fg = &fine.grid;
    let ns_f = fg.space.node_count();
    let mut worst = 0.0f64;
    let axes = cg.space.dims.total();
    let t_ratio = (fg.times.len() - 1) / (cg.times.len() - 1);
    for (ti, _) in cg.times.iter().enumerate() {
        let tif = ti * t_ratio;
        for si in 0..cg.space.node_count() {
            let idx = cg.space.decode(si);
            let fine_idx: Vec<usize> = (0..axes).map(|a| idx[a] * 2).collect();
            let sif = fg.space.encode(&fine_idx);
            let d = (coarse.values()[ti * cg.space.node_count() + si]
                - fine.values()[tif * ns_f + sif])
                .abs();
            worst = worst.max(d);
        }
    }
    worst
}

/// View that excludes the configured margin fraction near every artificial
/// outer face (the degenerate faces `x_i = 0` are genuine and stay).
fn margin_view(field: &SampledField, cfg: &SolveConfig) -> FieldView {
    let keep = 1.0 - cfg.margin;
    let x_hi = cfg.grid.x_max * keep;
    let y_hi = cfg.grid.y_max * keep;
    FieldView::new(field.grid.clone(), |_| true, |z| {
        z.x.iter().all(|&x| x <= x_hi + 1e-12) && z.y.iter().all(|&y| y.abs() <= y_hi + 1e-12)
    })
}

fn grid_sup_expr(e: &Expr, grid: &Arc<SpaceTimeGrid>) -> Result<f64> {
    let mut sup = 0.0f64;
    for &t in &grid.times {
        for z in grid.space.iter_points() {
            sup = sup.max(e.eval(t, &z)?.abs());
        }
    }
    Ok(sup)
}

fn relative_spread(values: &[f64]) -> f64 {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        (max - min) / min
    }
}

fn monotone_growth(values: &[f64], slack: f64) -> bool {
    values.windows(2).all(|w| w[1] > w[0] * slack)
}

// ---------------------------------------------------------------------------
// experiments
// ---------------------------------------------------------------------------

/// `sup|u| ≤ sup|f| + T·sup|g| + tol`, with `tol` estimated from a two-grid
/// comparison plus a 1e-8 floor for the equality case.
pub fn max_principle_check(lab: &Lab) -> Result<VerifyReport> {
    let coarse = solve_level(lab, 0)?;
    let fine = solve_level(lab, 1)?;
    let tol = 2.0 * shared_node_difference(&coarse, &fine) + 1e-8;

    let view = margin_view(&coarse, &lab.cfg);
    let vals = view.extract(&coarse, &DerivKey::value(coarse.grid.space.dims.total()), |_| 1.0)?;
    let sup_u = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));

    let mut sup_f = 0.0f64;
    for z in coarse.grid.space.iter_points() {
        sup_f = sup_f.max(lab.f.eval(&z)?.abs());
    }
    let sup_g = grid_sup_expr(&lab.g, &coarse.grid)?;
    let t_final = lab.cfg.grid.t_final;
    let rhs = sup_f + t_final * sup_g;
    let pass = sup_u <= rhs + tol;
    let mut report = VerifyReport::new("maxprin", pass);
    report.measure("sup_u", sup_u);
    report.measure("sup_f", sup_f);
    report.measure("sup_g", sup_g);
    report.measure("T", t_final);
    report.measure("rhs", rhs);
    report.measure("tol", tol);
    report.measure("slack", rhs + tol - sup_u);
    Ok(report)
}

/// Nonpositive data forces a nonpositive solution, to ten times the linear
/// solver tolerance.
pub fn comparison_check(lab: &Lab) -> Result<VerifyReport> {
    let grid = lab.cfg.grid.build()?;
    for z in grid.space.iter_points() {
        if lab.f.eval(&z)? > 0.0 {
            return Err(Error::Verify(
                "comparison_check precondition: f must be nonpositive".into(),
            ));
        }
    }
    for &t in &grid.times {
        for z in grid.space.iter_points() {
            if lab.g.eval(t, &z)? > 0.0 {
                return Err(Error::Verify(
                    "comparison_check precondition: g must be nonpositive".into(),
                ));
            }
        }
    }
    let u = solve_level(lab, 0)?;
    let tol = lab.cfg.solver_tol * 10.0;
    let max_u = u.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut report = VerifyReport::new("comparison", max_u <= tol);
    report.measure("max_u", max_u);
    report.measure("tol", tol);
    Ok(report)
}

/// Zero violations of the ε-interpolation inequalities with the frozen
/// calibrated constants, over the documented smooth family.
pub fn interp_check(lab: &Lab) -> Result<VerifyReport> {
    let dims = lab.cfg.grid.dims;
    let family = calibration::smooth_family(dims).ok_or_else(|| {
        Error::Verify(format!(
            "no documented smooth family for (n,m) = ({},{})",
            dims.n, dims.m
        ))
    })?;
    let frozen = calibration::interp_constants(dims, lab.alpha, lab.k).ok_or_else(|| {
        Error::Verify(format!(
            "no frozen constants for (n,m,alpha,k) = ({},{},{},{})",
            dims.n, dims.m, lab.alpha, lab.k
        ))
    })?;
    let grid = lab.cfg.grid.build()?;
    let view = FieldView::full(grid.clone());
    let mut violations = 0usize;
    let mut min_slack = f64::INFINITY;
    let mut lhs_count = 0usize;
    for text in &family {
        let expr = crate::exprlang::parse(text, dims)?;
        let field = SampledField::from_expr_with_jet(grid.clone(), &expr, 0)?;
        let r2a = holder::wf_norm_2alpha(&field, &view, lab.alpha, 0, lab.pair_budget)?.total;
        let rsup = holder::sup_norm(&field)?;
        for lhs in holder::interp_lhs(&field, &view, lab.alpha, lab.pair_budget)? {
            lhs_count += 1;
            for &eps in &lab.eps_grid {
                let rhs = eps * r2a + frozen.c * eps.powf(-frozen.m) * rsup;
                let slack = rhs - lhs.value;
                min_slack = min_slack.min(slack);
                if slack < -1e-12 * rhs.max(1.0) {
                    violations += 1;
                }
            }
        }
    }
    let mut report = VerifyReport::new("interp", violations == 0);
    report.measure("violations", violations as f64);
    report.measure("members", family.len() as f64);
    report.measure("inequalities", lhs_count as f64);
    report.measure("eps_points", lab.eps_grid.len() as f64);
    report.measure("C_frozen", frozen.c);
    report.measure("m0", frozen.m);
    report.measure("min_slack", min_slack);
    report.note("support-restricted inequalities evaluated on the fully degenerate region; I^c-quantified inequalities are vacuous there");
    Ok(report)
}

struct LocalViews {
    numerator: FieldView,
    denominator: FieldView,
}

fn schauder_views(lab: &Lab, field: &SampledField) -> Result<LocalViews> {
    let p = &lab.schauder;
    let dims = field.grid.space.dims;
    if p.center.len() != dims.total() {
        return Err(Error::Verify("schauder center has wrong dimension".into()));
    }
    let keep = 1.0 - lab.cfg.margin;
    for (a, &c) in p.center.iter().enumerate() {
        let ok = if a < dims.n {
            c + 2.0 * p.r <= lab.cfg.grid.x_max * keep + 1e-12
        } else {
            c.abs() + 2.0 * p.r <= lab.cfg.grid.y_max * keep + 1e-12
        };
        if !ok {
            return Err(Error::Verify(
                "schauder ball B_2r must fit inside the margin box".into(),
            ));
        }
    }
    let dist = |z: &SpatialPoint| -> f64 {
        let mut acc = 0.0;
        for (a, &c) in p.center.iter().enumerate() {
            let coord = if a < dims.n { z.x[a] } else { z.y[a - dims.n] };
            acc += (coord - c).powi(2);
        }
        acc.sqrt()
    };
    let (t0, t_final, r) = (p.t0, lab.cfg.grid.t_final, p.r);
    if !(t0 > 0.0 && t0 < t_final) {
        return Err(Error::Verify("need 0 < T0 < T".into()));
    }
    let numerator = FieldView::new(
        field.grid.clone(),
        |t| t >= t0 - 1e-12,
        |z| dist(z) <= r + 1e-12,
    );
    let denominator = FieldView::new(
        field.grid.clone(),
        |t| t >= t0 / 2.0 - 1e-12,
        |z| dist(z) <= 2.0 * r + 1e-12,
    );
    if numerator.is_empty() || denominator.is_empty() {
        return Err(Error::Verify("schauder views are empty on this grid".into()));
    }
    Ok(LocalViews {
        numerator,
        denominator,
    })
}

/// Residual `u_t − Lu` as a field, from the backward-difference time slot and
/// the one-sided discrete operator.
fn residual_field(lc: &CoefficientSet, u: &SampledField) -> Result<SampledField> {
    let with_derivs = estimate_derivatives(u)?;
    let axes = u.grid.space.dims.total();
    let ut = with_derivs
        .slot(&DerivKey::value(axes).bump_time())
        .ok_or_else(|| Error::Verify("residual needs a time-derivative slot".into()))?;
    let a = assemble_spatial_operator(lc, &u.grid.space, BoundaryRows::OneSided)?;
    let ns = u.grid.space.node_count();
    let mut res = Vec::with_capacity(u.values().len());
    for (ti, slice) in u.values().chunks(ns).enumerate() {
        let au = a.apply(slice);
        for si in 0..ns {
            res.push(ut[ti * ns + si] - au[si]);
        }
    }
    SampledField::from_values(u.grid.clone(), res)
}

fn local_ratio(lab: &Lab, u: &SampledField) -> Result<Option<f64>> {
    let views = schauder_views(lab, u)?;
    let with_derivs = estimate_derivatives(u)?;
    let numerator =
        holder::wf_norm_2alpha(&with_derivs, &views.numerator, lab.alpha, lab.k, lab.pair_budget)?
            .total;
    let res = residual_field(&lab.lc, u)?;
    let (res_norm, _) =
        holder::wf_norm_alpha(&res, &views.denominator, lab.alpha, lab.k, lab.pair_budget)?;
    let axes = u.grid.space.dims.total();
    let sup_u = views
        .denominator
        .extract(u, &DerivKey::value(axes), |_| 1.0)?
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()));
    let denominator = res_norm + sup_u;
    if numerator <= 1e-14 && denominator <= 1e-14 {
        return Ok(None);
    }
    Ok(Some(numerator / denominator))
}

/// Local Schauder boundedness: the ratio `Q` stays within a ×3 family band
/// over the rough-data sweep and does not grow monotonically under
/// refinement.
pub fn schauder_ratio_local(lab: &Lab) -> Result<VerifyReport> {
    let p = lab.schauder.clone();
    let dims = lab.cfg.grid.dims;
    let levels = lab.levels.min(3).max(2);
    let mut q_table: Vec<Vec<Option<f64>>> = Vec::new();
    for &beta in &p.betas {
        let member = RoughMember::interior(
            beta,
            p.center.clone(),
            dims.n,
            lab.cfg.grid.x_max,
            lab.cfg.grid.y_max,
        )?;
        let mut row = Vec::new();
        for level in 0..levels {
            let mut sub = Lab {
                f: DataSpec::Rough(member.clone()),
                ..lab_shallow_clone(lab)
            };
            sub.cfg.grid = refined_spec(&lab.cfg.grid, level);
            let u = solve_level(&sub, 0)?;
            row.push(local_ratio(&sub, &u)?);
        }
        q_table.push(row);
    }

    let mut report = VerifyReport::new("schauder_local", true);
    let finest: Vec<f64> = q_table
        .iter()
        .filter_map(|row| row.last().copied().flatten())
        .collect();
    for (bi, beta) in p.betas.iter().enumerate() {
        for (li, q) in q_table[bi].iter().enumerate() {
            match q {
                Some(v) => report.measure(format!("Q_beta{beta}_level{li}"), *v),
                None => report.note(format!("beta {beta} level {li}: not applicable (0/0)")),
            }
        }
    }
    if finest.is_empty() {
        report.note("all members degenerate; nothing to assert");
        return Ok(report);
    }
    let qmax = finest.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let qmin = finest.iter().cloned().fold(f64::INFINITY, f64::min);
    let family_ratio = qmax / qmin;
    report.measure("family_ratio", family_ratio);
    report.measure("family_ratio_max", lab.thresholds.family_ratio_max);
    let mut pass = family_ratio <= lab.thresholds.family_ratio_max;
    for (bi, beta) in p.betas.iter().enumerate() {
        let series: Vec<f64> = q_table[bi].iter().filter_map(|q| *q).collect();
        if series.len() >= 2 && monotone_growth(&series, lab.thresholds.monotone_slack) {
            pass = false;
            report.note(format!("Q grows monotonically under refinement for beta {beta}"));
        }
    }
    report.pass = pass;
    Ok(report)
}

fn lab_shallow_clone(lab: &Lab) -> Lab {
    Lab {
        lc: lab.lc.clone(),
        f: match &lab.f {
            DataSpec::Expr(e) => DataSpec::Expr(e.clone()),
            DataSpec::Rough(r) => DataSpec::Rough(r.clone()),
        },
        g: lab.g.clone(),
        cfg: lab.cfg.clone(),
        alpha: lab.alpha,
        k: lab.k,
        pair_budget: lab.pair_budget,
        eps_grid: lab.eps_grid.clone(),
        levels: lab.levels,
        thresholds: lab.thresholds.clone(),
        schauder: lab.schauder.clone(),
        config_hash: lab.config_hash.clone(),
        seed: lab.seed,
    }
}

/// Global estimate shape: `‖u‖_{k,2+α} / (‖g‖_{k,α} + ‖f‖_{k,2+α})` stable
/// within the configured spread across refinement levels.
pub fn schauder_ratio_global(lab: &Lab) -> Result<VerifyReport> {
    let DataSpec::Expr(f_expr) = &lab.f else {
        return Err(Error::Verify(
            "schauder_global needs expression initial data with analytic derivatives".into(),
        ));
    };
    let dims = lab.cfg.grid.dims;
    let levels = lab.levels.max(2);
    let mut ratios = Vec::new();
    let mut report = VerifyReport::new("schauder_global", true);
    for level in 0..levels {
        let mut sub = lab_shallow_clone(lab);
        sub.cfg.grid = refined_spec(&lab.cfg.grid, level);
        let u = solve_level(&sub, 0)?;
        let with_derivs = estimate_derivatives(&u)?;
        let view = margin_view(&u, &sub.cfg);
        let num = holder::wf_norm_2alpha(&with_derivs, &view, lab.alpha, lab.k, lab.pair_budget)?
            .total;
        // data norms, analytic jets
        let g_field = SampledField::from_expr_with_jet(u.grid.clone(), &lab.g, lab.k)?;
        let (g_norm, _) =
            holder::wf_norm_alpha(&g_field, &view, lab.alpha, lab.k, lab.pair_budget)?;
        let slice = SpaceTimeGrid::single_slice(u.grid.space.clone(), 0.0);
        let f_field = SampledField::from_expr_with_jet(slice.clone(), f_expr, lab.k)?;
        let f_view = FieldView::new(slice, |_| true, |z| {
            let keep = 1.0 - lab.cfg.margin;
            z.x.iter().all(|&x| x <= lab.cfg.grid.x_max * keep + 1e-12)
                && z.y.iter().all(|&y| y.abs() <= lab.cfg.grid.y_max * keep + 1e-12)
        });
        let f_norm =
            holder::wf_norm_2alpha(&f_field, &f_view, lab.alpha, lab.k, lab.pair_budget)?.total;
        let den = g_norm + f_norm;
        if num <= 1e-14 && den <= 1e-14 {
            report.note(format!("level {level}: not applicable (0/0)"));
            continue;
        }
        let q = num / den;
        report.measure(format!("ratio_level{level}"), q);
        let _ = dims;
        ratios.push(q);
    }
    if ratios.is_empty() {
        report.note("all levels degenerate; nothing to assert");
        return Ok(report);
    }
    let spread = relative_spread(&ratios);
    report.measure("spread", spread);
    report.measure("spread_max", lab.thresholds.refine_stability);
    report.pass = spread <= lab.thresholds.refine_stability;
    Ok(report)
}

/// Smoothing of continuous data: the `t ≥ T₀` weighted norm is
/// refinement-stable and data-bounded, while the same norm on the raw data
/// interpolant near `t = 0` diverges under refinement.
pub fn smoothing_check(lab: &Lab) -> Result<VerifyReport> {
    let t0 = lab.schauder.t0;
    let levels = lab.levels.max(2);
    let mut stable_norms = Vec::new();
    let mut rough_norms = Vec::new();
    let mut report = VerifyReport::new("smoothing", true);
    for level in 0..levels {
        let mut sub = lab_shallow_clone(lab);
        sub.cfg.grid = refined_spec(&lab.cfg.grid, level);
        let u = solve_level(&sub, 0)?;
        let with_derivs = estimate_derivatives(&u)?;
        let late = margin_view(&u, &sub.cfg).retain(|nd| nd.t >= t0 - 1e-12);
        if late.is_empty() {
            return Err(Error::Verify("no time slices at or after T0".into()));
        }
        let n_late =
            holder::wf_norm_2alpha(&with_derivs, &late, lab.alpha, lab.k, lab.pair_budget)?.total;
        stable_norms.push(n_late);
        report.measure(format!("late_norm_level{level}"), n_late);

        // raw data interpolant on [0, T0/4]: f at every slice, no evolution
        let grid = &u.grid;
        let early_times: Vec<f64> = grid
            .times
            .iter()
            .copied()
            .filter(|&t| t <= t0 / 4.0 + 1e-12)
            .collect();
        let early_times = if early_times.len() < 2 {
            grid.times[..2].to_vec()
        } else {
            early_times
        };
        let egrid = Arc::new(SpaceTimeGrid {
            times: early_times,
            space: grid.space.clone(),
        });
        let mut vals = Vec::with_capacity(egrid.node_count());
        for _ in &egrid.times {
            for z in egrid.space.iter_points() {
                vals.push(lab.f.eval(&z)?);
            }
        }
        let interp = SampledField::from_values(egrid.clone(), vals)?;
        let interp_derivs = estimate_derivatives(&interp)?;
        let eview = FieldView::full(egrid);
        let n_early =
            holder::wf_norm_2alpha(&interp_derivs, &eview, lab.alpha, lab.k, lab.pair_budget)?
                .total;
        rough_norms.push(n_early);
        report.measure(format!("data_norm_level{level}"), n_early);
    }
    // (i) stability of the late-time norm plus data bound
    let mut pass = true;
    for w in stable_norms.windows(2) {
        if (w[1] - w[0]).abs() / w[0].max(1e-300) > lab.thresholds.refine_stability {
            pass = false;
            report.note("late-time norm not refinement-stable");
        }
    }
    let grid = lab.cfg.grid.build()?;
    let sup_f = {
        let mut s = 0.0f64;
        for z in grid.space.iter_points() {
            s = s.max(lab.f.eval(&z)?.abs());
        }
        s
    };
    let g_field = SampledField::from_expr(grid.clone(), &lab.g)?;
    let g_view = FieldView::full(grid);
    let (g_norm, _) = holder::wf_norm_alpha(&g_field, &g_view, lab.alpha, 0, lab.pair_budget)?;
    let denom = g_norm + sup_f;
    let c_rec = stable_norms.last().unwrap() / denom.max(1e-300);
    report.measure("C_recorded", c_rec);
    report.measure("sup_f", sup_f);
    report.measure("g_norm", g_norm);
    // (ii) divergence of the data-interpolant norm, for genuinely rough data
    let is_rough = matches!(&lab.f, DataSpec::Rough(r) if r.beta < 1.0);
    if is_rough {
        for w in rough_norms.windows(2) {
            if w[1] < lab.thresholds.divergence_factor * w[0] {
                pass = false;
                report.note(format!(
                    "data-interpolant norm grew only {:.3}x under refinement",
                    w[1] / w[0].max(1e-300)
                ));
            }
        }
    } else {
        report.note("smooth control data: divergence clause not applicable");
    }
    report.pass = pass;
    Ok(report)
}

/// Convergence against the exact polynomial evolution: spatial and temporal
/// orders from refinement sweeps, plus the linear-exactness check.
pub fn oracle_compare(lab: &Lab) -> Result<VerifyReport> {
    let DataSpec::Expr(f_expr) = &lab.f else {
        return Err(Error::Verify("oracle_compare needs polynomial expression data".into()));
    };
    let oracle = PolynomialOracle::new(&lab.lc, f_expr, &lab.g, 12)?;
    let levels = lab.levels.max(3);
    let mut report = VerifyReport::new("oracle", true);

    let max_err_vs_oracle = |u: &SampledField| -> (f64, f64) {
        let ns = u.grid.space.node_count();
        let mut worst = 0.0f64;
        let mut sq = 0.0f64;
        for (ti, &t) in u.grid.times.iter().enumerate() {
            let exact = oracle.eval_slice(t, &u.grid.space);
            for si in 0..ns {
                let d = (u.values()[ti * ns + si] - exact[si]).abs();
                worst = worst.max(d);
                sq += d * d;
            }
        }
        (worst, (sq / u.values().len() as f64).sqrt())
    };

    // spatial sweep: J doubles, dt quarters, so the O(dt) part shrinks faster
    // than the O(s²) part and the slope in s is the spatial order
    let mut spatial_errors = Vec::new();
    for level in 0..levels {
        let mut cfg = lab.cfg.clone();
        cfg.grid.j = lab.cfg.grid.j << level;
        if cfg.grid.dims.m > 0 {
            cfg.grid.y_intervals = lab.cfg.grid.y_intervals << level;
        }
        cfg.grid.dt = lab.cfg.grid.dt / 4f64.powi(level as i32);
        cfg.boundary = OuterBoundary::OracleDirichlet;
        let u = solver::solve_ivp(&lab.lc, InitialData::Expr(f_expr), &lab.g, &cfg)?;
        let (max_err, l2_err) = max_err_vs_oracle(&u);
        report.measure(format!("spatial_J_level{level}"), cfg.grid.j as f64);
        report.measure(format!("spatial_max_err_level{level}"), max_err);
        report.measure(format!("spatial_l2_err_level{level}"), l2_err);
        spatial_errors.push(max_err);
    }
    // temporal sweep: dt halves at fixed fine J
    let mut temporal_errors = Vec::new();
    let j_fine = lab.cfg.grid.j * 4;
    for level in 0..levels {
        let mut cfg = lab.cfg.clone();
        cfg.grid.j = j_fine;
        if cfg.grid.dims.m > 0 {
            cfg.grid.y_intervals = lab.cfg.grid.y_intervals * 4;
        }
        cfg.grid.dt = lab.cfg.grid.dt / 2f64.powi(level as i32);
        cfg.boundary = OuterBoundary::OracleDirichlet;
        let u = solver::solve_ivp(&lab.lc, InitialData::Expr(f_expr), &lab.g, &cfg)?;
        let (max_err, _) = max_err_vs_oracle(&u);
        report.measure(format!("temporal_dt_level{level}"), cfg.grid.dt);
        report.measure(format!("temporal_max_err_level{level}"), max_err);
        temporal_errors.push(max_err);
    }

    let exact_floor = 1e-10;
    let all_exact = spatial_errors.iter().all(|&e| e <= exact_floor)
        && temporal_errors.iter().all(|&e| e <= exact_floor);
    let slope = |errors: &[f64], halving: f64| -> f64 {
        // least-squares slope of log error against level·log(halving)
        let pts: Vec<(f64, f64)> = errors
            .iter()
            .enumerate()
            .map(|(i, &e)| (i as f64 * halving.ln(), e.max(1e-300).ln()))
            .collect();
        let nn = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / nn;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / nn;
        let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let den: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        num / den
    };
    if all_exact {
        report.note("scheme-exact data: errors at rounding level, orders not applicable");
        report.measure("exact", 1.0);
    } else {
        // spatial: s halves per level; temporal: dt halves per level
        let order_s = slope(&spatial_errors, 0.5);
        let order_t = slope(&temporal_errors, 0.5);
        report.measure("spatial_order", order_s);
        report.measure("temporal_order", order_t);
        report.measure("exact", 0.0);
        report.pass = order_s >= 1.7 && order_t >= 0.9;
    }
    Ok(report)
}

/// The `Lu` norm bound with frozen constants on the lab's own data.
pub fn lemma_check(lab: &Lab) -> Result<VerifyReport> {
    let DataSpec::Expr(f_expr) = &lab.f else {
        return Err(Error::Verify("lemma check needs expression data".into()));
    };
    let dims = lab.cfg.grid.dims;
    let frozen = calibration::lemma_constants(dims, lab.alpha, lab.k).ok_or_else(|| {
        Error::Verify(format!(
            "no frozen lemma constants for (n,m,alpha,k) = ({},{},{},{})",
            dims.n, dims.m, lab.alpha, lab.k
        ))
    })?;
    holder::lemma::check_lemma_lu_bound(
        &lab.lc,
        f_expr,
        &lab.cfg.grid,
        lab.alpha,
        lab.k,
        &lab.eps_grid,
        lab.pair_budget,
        None,
        frozen.c,
    )
}

/// Plateau/support identities of the cutoff sequence plus the geometric
/// growth fit of its derivative norms.
pub fn cutoff_check(lab: &Lab) -> Result<VerifyReport> {
    let dims = lab.cfg.grid.dims;
    if dims.n != 1 || dims.m != 0 {
        return Err(Error::Verify(
            "cutoff experiment runs on the n = 1, m = 0 geometry".into(),
        ));
    }
    let p = &lab.schauder;
    let z0 = SpatialPoint {
        x: vec![p.center[0]],
        y: vec![],
    };
    let n_max = 6;
    let seq = holder::build_cutoff_sequence(
        z0.clone(),
        p.r,
        p.t0,
        lab.cfg.grid.t_final,
        n_max,
        lab.k,
    )?;
    // exact identities on a deterministic test lattice
    let mut worst_plateau = 0.0f64;
    let mut worst_support = 0.0f64;
    for nn in 0..=n_max {
        for i in 0..60 {
            let frac = i as f64 / 59.0;
            // plateau points: |z − z0| ≤ r_N, t ∈ [T_N, T]
            let zp = SpatialPoint {
                x: vec![(z0.x[0] + seq.radii[nn] * (2.0 * frac - 1.0) * 0.999).max(0.0)],
                y: vec![],
            };
            let tp = seq.t_levels[nn] + frac * (lab.cfg.grid.t_final - seq.t_levels[nn]);
            worst_plateau = worst_plateau.max((seq.phi(nn, tp, &zp) - 1.0).abs());
            // support points: outside Q_{N+1}
            let zs = SpatialPoint {
                x: vec![z0.x[0] + seq.radii[nn + 1] * (1.001 + frac)],
                y: vec![],
            };
            worst_support = worst_support.max(seq.phi(nn, tp, &zs).abs());
            let ts = seq.t_levels[nn + 1] * (0.999 - 0.9 * frac);
            worst_support = worst_support.max(seq.phi(nn, ts, &zp).abs());
        }
    }
    let growth = holder::measure_cutoff_growth(&seq, lab.alpha, 768, 257, 24)?;
    let identities_ok = worst_plateau <= 1e-12 && worst_support <= 1e-12;
    let fit_ok = growth.max_rel_residual <= 0.10 && growth.rho_fit <= growth.rho_bound * 1.02;
    let mut report = VerifyReport::new("cutoff", identities_ok && fit_ok);
    report.measure("worst_plateau_defect", worst_plateau);
    report.measure("worst_support_leak", worst_support);
    for (i, v) in growth.norms.iter().enumerate() {
        report.measure(format!("deriv_norm_N{i}"), *v);
    }
    report.measure("rho_fit", growth.rho_fit);
    report.measure("rho_bound", growth.rho_bound);
    report.measure("c_fit", growth.c_fit);
    report.measure("fit_max_rel_residual", growth.max_rel_residual);
    report.measure("shape_constant", growth.shape_constant);
    Ok(report)
}

/// Partition-of-unity identities: Σφ ≡ 1, ψφ = φ, ball supports, overlap
/// count.
pub fn partition_check(lab: &Lab) -> Result<VerifyReport> {
    use rand::{Rng, SeedableRng};
    let dims = lab.cfg.grid.dims;
    let domain = DomainBox {
        dims,
        x_max: lab.cfg.grid.x_max,
        y_max: lab.cfg.grid.y_max,
    };
    let part = holder::build_partition(lab.schauder.r, &domain)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(lab.seed);
    let mut worst_sum = 0.0f64;
    let mut worst_psi_phi = 0.0f64;
    let mut worst_support = 0.0f64;
    let mut max_overlap = 0usize;
    for _ in 0..1000 {
        let x: Vec<f64> = (0..dims.n).map(|_| rng.gen_range(0.0..=domain.x_max)).collect();
        let y: Vec<f64> = (0..dims.m)
            .map(|_| rng.gen_range(-domain.y_max..=domain.y_max))
            .collect();
        let z = SpatialPoint { x, y };
        let total: f64 = (0..part.len()).map(|i| part.phi(i, &z)).sum();
        worst_sum = worst_sum.max((total - 1.0).abs());
        for i in 0..part.len() {
            let phi = part.phi(i, &z);
            let psi = part.psi(i, &z);
            worst_psi_phi = worst_psi_phi.max((psi * phi - phi).abs());
            if i >= 1 && phi > 0.0 {
                let mut d = 0.0;
                for (a, &c) in part.members[i].center.x.iter().enumerate() {
                    d += (z.x[a] - c).powi(2);
                }
                for (a, &c) in part.members[i].center.y.iter().enumerate() {
                    d += (z.y[a] - c).powi(2);
                }
                if d.sqrt() >= part.r {
                    worst_support = worst_support.max(d.sqrt() - part.r);
                }
            }
        }
        max_overlap = max_overlap.max(part.overlap_count(&z));
    }
    let pass = worst_sum <= 1e-12 && worst_psi_phi <= 1e-12 && worst_support == 0.0;
    let mut report = VerifyReport::new("partition", pass);
    report.measure("members", part.len() as f64);
    report.measure("worst_sum_defect", worst_sum);
    report.measure("worst_psi_phi_defect", worst_psi_phi);
    report.measure("worst_support_leak", worst_support);
    report.measure("max_overlap", max_overlap as f64);
    Ok(report)
}
