//! The `Lu` norm bound: `‖Lu‖_{k,α} ≤ (Λ + Cε)‖u‖_{k,2+α} + Cε^{-m_k}‖u‖_∞`
//! for functions supported in the closed fully-degenerate part of the box,
//! with `Λ` the coefficient sup-norm sum. An optional weight `φ` gives the
//! cutoff-weighted variant, where `Λ` is scaled by `sup|φ|`.

use crate::error::{Error, Result};
use crate::exprlang::Expr;
use crate::field::{FieldView, SampledField};
use crate::geometry::{RegionIndex, SpatialPoint};
use crate::grid::GridSpec;
use crate::operator::{apply_discrete, compute_lambda, CoefficientSet, RegionBox};
use crate::verify::VerifyReport;

/// Measure the smallest admissible `C` on an ε grid and compare it with the
/// frozen budget (pass when `C_needed ≤ c_budget`); `c_budget = ∞` turns the
/// check into pure measurement (calibration mode).
#[allow(clippy::too_many_arguments)]
pub fn check_lemma_lu_bound(
    lc: &CoefficientSet,
    u: &Expr,
    grid: &GridSpec,
    alpha: f64,
    k: usize,
    eps_grid: &[f64],
    pair_budget: u64,
    phi: Option<&dyn Fn(&SpatialPoint) -> f64>,
    c_budget: f64,
) -> Result<VerifyReport> {
    let dims = grid.dims;
    if grid.x_max > 2.0 {
        return Err(Error::Verify(
            "support violation: the box must lie inside the closed region x_i <= 2".into(),
        ));
    }
    let st_grid = grid.build()?;
    let m_k = super::calibration::exponent_m(alpha);
    let field = SampledField::from_expr_with_jet(st_grid.clone(), u, k)?;
    let view = FieldView::full(st_grid.clone());

    // discretized Lu (optionally φ-weighted pointwise)
    let mut lu = apply_discrete(lc, &field)?;
    let mut sup_phi = 1.0f64;
    if let Some(w) = phi {
        let ns = st_grid.space.node_count();
        let weights: Vec<f64> = st_grid.space.iter_points().map(|z| w(&z)).collect();
        sup_phi = weights.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let scaled: Vec<f64> = lu
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| v * weights[i % ns])
            .collect();
        lu = SampledField::from_values(st_grid.clone(), scaled)?;
    }
    let (lhs, _) = super::wf_norm_alpha(&lu, &view, alpha, k, pair_budget)?;

    let region = RegionIndex::full(dims.n);
    let mut lo = vec![0.0; dims.total()];
    let mut hi = vec![grid.x_max; dims.total()];
    for l in 0..dims.m {
        lo[dims.n + l] = -grid.y_max;
        hi[dims.n + l] = grid.y_max;
    }
    let lambda = compute_lambda(
        lc,
        &RegionBox {
            lo,
            hi,
            samples_per_axis: 33,
        },
        &region,
    )? * sup_phi;

    let r2a = super::wf_norm_2alpha(&field, &view, alpha, k, pair_budget)?.total;
    let rsup = super::sup_norm(&field)?;

    // C multiplies both ε terms:
    //   LHS ≤ Λ·R + C·(ε·R + ε^{-m_k}·S)
    let slack = lhs - lambda * r2a;
    let mut c_needed = 0.0f64;
    if slack > 0.0 {
        for &eps in eps_grid {
            let denom = eps * r2a + eps.powf(-m_k) * rsup;
            if denom > 0.0 {
                c_needed = c_needed.max(slack / denom);
            }
        }
    }
    let pass = c_needed.is_finite() && c_needed <= c_budget + 1e-12;
    let mut report = VerifyReport::new("lemma", pass);
    report.measure("LHS_norm_Lu", lhs);
    report.measure("Lambda", lambda);
    report.measure("norm_2alpha", r2a);
    report.measure("sup_u", rsup);
    report.measure("C_needed", c_needed);
    report.measure("C_budget", c_budget);
    report.measure("m_k", m_k);
    report.measure("sup_phi", sup_phi);
    Ok(report)
}
