//! Discrete anisotropic Hölder norms over sampled fields.
//!
//! All norms are grid-discretized estimates: suprema and seminorm pair sweeps
//! run over a node view, so every number is a lower bound of the continuum
//! quantity on the reported truncation box. Seminorm pair sets are
//! deterministic (exhaustive under the budget, otherwise strided plus all
//! lattice-neighbour pairs). Domain monotonicity of the reported norms holds
//! for exhaustive sweeps; subsampled sweeps are lower bounds of the
//! exhaustive value.
//!
//! The `2+α` norm decomposes the grid by region classification
//! (`I(z) = {i : x_i ≤ 1}`, interface nodes assigned to `I`), computes per
//! region the weighted second-derivative component norms
//! (`√(x_i x_j) u_{x_i x_j}` inside the region, unweighted across it), and
//! sums the per-region totals; the classification partition keeps interface
//! nodes from being counted twice. Weighted first-order quantities
//! `x_i u_{x_i}` are reported as diagnostic rows but, following the space
//! definition, do not enter the total.

pub mod calibration;
pub mod cutoff;
pub mod lemma;

use crate::error::{Error, Result};
use crate::field::{alpha_seminorm, jet_keys, DerivKey, FieldView, PairPlan, SampledField, ViewNode};
use crate::geometry::RegionIndex;
use std::collections::BTreeMap;

pub use cutoff::{
    build_cutoff_sequence, build_partition, measure_cutoff_growth, CutoffGrowth, CutoffSequence,
    DomainBox, Partition,
};

/// Maximum of `|values|`; errors on an empty field or view.
pub fn sup_norm(field: &SampledField) -> Result<f64> {
    let vals = field.values();
    if vals.is_empty() {
        return Err(Error::Norm("empty field".into()));
    }
    Ok(vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
}

fn sup_of(vals: &[f64]) -> f64 {
    vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Norm(format!("alpha = {alpha} must lie in (0,1)")));
    }
    Ok(())
}

/// The Hölder seminorm of the raw field values over the whole grid:
/// `sup |u(P) − u(Q)| / ρ(P,Q)^α` over the deterministic pair set.
pub fn wf_seminorm(field: &SampledField, alpha: f64, pair_budget: u64) -> Result<(f64, u64)> {
    check_alpha(alpha)?;
    let view = FieldView::full(field.grid.clone());
    if view.is_empty() {
        return Err(Error::Norm("empty field".into()));
    }
    let vals = view.extract(field, &DerivKey::value(field.grid.space.dims.total()), |_| 1.0)?;
    let plan = PairPlan::for_view(&view, pair_budget);
    let used = plan.pair_count(&view);
    Ok((alpha_seminorm(&view, &vals, alpha, &plan), used))
}

/// Component-by-component breakdown of a weighted Hölder norm.
#[derive(Debug, Clone)]
pub struct HolderReport {
    pub sup_norm: f64,
    pub seminorm_alpha: f64,
    /// Per-region weighted component norms, including `diag` rows that are
    /// excluded from the total.
    pub weighted_component_norms: BTreeMap<String, f64>,
    pub total: f64,
    pub pair_count_used: u64,
    pub alpha: f64,
    pub k: usize,
    /// The truncation box the suprema were taken over.
    pub truncation_box: String,
}

fn region_label(region: &RegionIndex) -> String {
    let members: Vec<String> = region.iter().map(|i| (i + 1).to_string()).collect();
    format!("I={{{}}}", members.join(","))
}

fn box_label(view: &FieldView) -> String {
    if view.nodes.is_empty() {
        return "empty".into();
    }
    let dims = view.grid.space.dims;
    let mut lo = vec![f64::INFINITY; dims.total()];
    let mut hi = vec![f64::NEG_INFINITY; dims.total()];
    let (mut t_lo, mut t_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for nd in &view.nodes {
        t_lo = t_lo.min(nd.t);
        t_hi = t_hi.max(nd.t);
        for i in 0..dims.n {
            lo[i] = lo[i].min(nd.x[i]);
            hi[i] = hi[i].max(nd.x[i]);
        }
        for l in 0..dims.m {
            lo[dims.n + l] = lo[dims.n + l].min(nd.y[l]);
            hi[dims.n + l] = hi[dims.n + l].max(nd.y[l]);
        }
    }
    let mut s = format!("t:[{t_lo},{t_hi}]");
    for i in 0..dims.n {
        s.push_str(&format!(" x{}:[{},{}]", i + 1, lo[i], hi[i]));
    }
    for l in 0..dims.m {
        s.push_str(&format!(" y{}:[{},{}]", l + 1, lo[dims.n + l], hi[dims.n + l]));
    }
    s
}

/// `C^{k,α}`-type norm over a view: the sum over derivatives of parabolic
/// order `≤ k` of sup + α-seminorm. No degeneracy weights.
pub fn wf_norm_alpha(
    field: &SampledField,
    view: &FieldView,
    alpha: f64,
    k: usize,
    pair_budget: u64,
) -> Result<(f64, u64)> {
    check_alpha(alpha)?;
    if view.is_empty() {
        return Err(Error::Norm("empty view".into()));
    }
    let axes = field.grid.space.dims.total();
    let elliptic = field.grid.times.len() == 1;
    let plan = PairPlan::for_view(view, pair_budget);
    let mut total = 0.0;
    let mut pairs = 0;
    for key in jet_keys(axes, k, elliptic) {
        let vals = view.extract(field, &key, |_| 1.0)?;
        total += sup_of(&vals) + alpha_seminorm(view, &vals, alpha, &plan);
        pairs += plan.pair_count(view);
    }
    Ok((total, pairs))
}

struct Component {
    name: String,
    /// Multiplicity in the total (2 for unordered off-diagonal pairs).
    weight_in_total: f64,
    key: DerivKey,
    /// Per-node √x weight: indices of x axes whose square roots multiply.
    sqrt_axes: Vec<usize>,
    /// Included in the norm total (false for diagnostic rows).
    in_total: bool,
    /// Plain x_i weight for diagnostic rows.
    x_axes: Vec<usize>,
}

fn second_order_components(
    base: &DerivKey,
    region: &RegionIndex,
    n: usize,
    m: usize,
    elliptic: bool,
    base_label: &str,
) -> Vec<Component> {
    let mut comps = Vec::new();
    // x-x pairs
    for i in 0..n {
        for j in i..n {
            let key = base.bump_axis(i).bump_axis(j);
            let mult = if i == j { 1.0 } else { 2.0 };
            let (name, sqrt_axes) = match (region.contains(i), region.contains(j)) {
                (true, true) => (
                    format!("sqrt(x{} x{}) {}_x{}x{}", i + 1, j + 1, base_label, i + 1, j + 1),
                    vec![i, j],
                ),
                (true, false) => (
                    format!("sqrt(x{}) {}_x{}x{}", i + 1, base_label, i + 1, j + 1),
                    vec![i],
                ),
                (false, true) => (
                    format!("sqrt(x{}) {}_x{}x{}", j + 1, base_label, i + 1, j + 1),
                    vec![j],
                ),
                (false, false) => (
                    format!("{}_x{}x{}", base_label, i + 1, j + 1),
                    vec![],
                ),
            };
            comps.push(Component {
                name,
                weight_in_total: mult,
                key,
                sqrt_axes,
                in_total: true,
                x_axes: vec![],
            });
        }
    }
    // x-y pairs
    for i in 0..n {
        for l in 0..m {
            let key = base.bump_axis(i).bump_axis(n + l);
            let (name, sqrt_axes) = if region.contains(i) {
                (
                    format!("sqrt(x{}) {}_x{}y{}", i + 1, base_label, i + 1, l + 1),
                    vec![i],
                )
            } else {
                (format!("{}_x{}y{}", base_label, i + 1, l + 1), vec![])
            };
            comps.push(Component {
                name,
                weight_in_total: 1.0,
                key,
                sqrt_axes,
                in_total: true,
                x_axes: vec![],
            });
        }
    }
    // y-y pairs
    for k2 in 0..m {
        for l in k2..m {
            let key = base.bump_axis(n + k2).bump_axis(n + l);
            let mult = if k2 == l { 1.0 } else { 2.0 };
            comps.push(Component {
                name: format!("{}_y{}y{}", base_label, k2 + 1, l + 1),
                weight_in_total: mult,
                key,
                sqrt_axes: vec![],
                in_total: true,
                x_axes: vec![],
            });
        }
    }
    // time derivative
    if !elliptic {
        comps.push(Component {
            name: format!("{}_t", base_label),
            weight_in_total: 1.0,
            key: base.bump_time(),
            sqrt_axes: vec![],
            in_total: true,
            x_axes: vec![],
        });
    }
    comps
}

/// The full `C^{k,2+α}`-type weighted norm with its component breakdown.
///
/// Derivative slots of parabolic order `≤ k + 2` must be present (filled
/// either analytically or by the solver's stencils).
pub fn wf_norm_2alpha(
    field: &SampledField,
    view: &FieldView,
    alpha: f64,
    k: usize,
    pair_budget: u64,
) -> Result<HolderReport> {
    check_alpha(alpha)?;
    if view.is_empty() {
        return Err(Error::Norm("empty view".into()));
    }
    if !field.has_jet(k) {
        return Err(Error::Norm(format!(
            "missing derivative slots for k = {k} (parabolic order {} jet required)",
            k + 2
        )));
    }
    let dims = field.grid.space.dims;
    let (n, m) = (dims.n, dims.m);
    let axes = dims.total();
    let elliptic = field.grid.times.len() == 1;

    // headline quantities over the whole view
    let base_vals = view.extract(field, &DerivKey::value(axes), |_| 1.0)?;
    let full_plan = PairPlan::for_view(view, pair_budget);
    let sup = sup_of(&base_vals);
    let semi = alpha_seminorm(view, &base_vals, alpha, &full_plan);
    let mut pairs_used = full_plan.pair_count(view);

    let mut rows = BTreeMap::new();
    let mut total = 0.0;

    for region in RegionIndex::all_subsets(n) {
        // nodes are partitioned by their region classification (interface
        // nodes x_i = 1 go to I, the documented tie-break), so no node is
        // double-counted in the region sum
        let sub = view.retain(|nd: &ViewNode| nd.small_bits == region.bits());
        if sub.is_empty() {
            continue;
        }
        let rlabel = region_label(&region);
        let plan = PairPlan::for_view(&sub, pair_budget);
        let mut c0a = |comp: &Component| -> Result<f64> {
            let vals = sub.extract(field, &comp.key, |nd| {
                let mut w = 1.0;
                for &i in &comp.sqrt_axes {
                    w *= nd.sqrt_x[i];
                }
                for &i in &comp.x_axes {
                    w *= nd.x[i];
                }
                w
            })?;
            pairs_used += plan.pair_count(&sub);
            Ok(sup_of(&vals) + alpha_seminorm(&sub, &vals, alpha, &plan))
        };

        for base in jet_keys(axes, k, elliptic) {
            let base_label = base.label(n);
            // C^{1,α} part: the derivative itself and unweighted first-order
            let mut first_order = vec![Component {
                name: base_label.clone(),
                weight_in_total: 1.0,
                key: base.clone(),
                sqrt_axes: vec![],
                in_total: true,
                x_axes: vec![],
            }];
            for a in 0..axes {
                let suffix = if a < n {
                    format!("x{}", a + 1)
                } else {
                    format!("y{}", a - n + 1)
                };
                first_order.push(Component {
                    name: format!("{}_{}", base_label, suffix),
                    weight_in_total: 1.0,
                    key: base.bump_axis(a),
                    sqrt_axes: vec![],
                    in_total: true,
                    x_axes: vec![],
                });
            }
            // diagnostic weighted first-order rows for degenerate axes
            for i in 0..n {
                if region.contains(i) {
                    first_order.push(Component {
                        name: format!("diag x{} {}_x{}", i + 1, base_label, i + 1),
                        weight_in_total: 0.0,
                        key: base.bump_axis(i),
                        sqrt_axes: vec![],
                        in_total: false,
                        x_axes: vec![i],
                    });
                }
            }
            let comps = first_order
                .into_iter()
                .chain(second_order_components(&base, &region, n, m, elliptic, &base_label));
            for comp in comps {
                let value = c0a(&comp)?;
                if comp.in_total {
                    total += comp.weight_in_total * value;
                }
                rows.insert(format!("{rlabel} {}", comp.name), value);
            }
        }
    }

    Ok(HolderReport {
        sup_norm: sup,
        seminorm_alpha: semi,
        weighted_component_norms: rows,
        total,
        pair_count_used: pairs_used,
        alpha,
        k,
        truncation_box: box_label(view),
    })
}

/// One left-hand side of the interpolation inequalities: a measured quantity
/// that must satisfy `LHS ≤ ε‖u‖_{2+α} + C ε^{-m₀}‖u‖_∞`.
#[derive(Debug, Clone)]
pub struct InterpLhs {
    /// Inequality tag, `2.7`…`2.18` in reading order of the statement.
    pub tag: &'static str,
    pub description: String,
    pub value: f64,
}

/// Measured left-hand sides of the interpolation-inequality family for a
/// field with an order-2 analytic or numeric jet, on a view contained in the
/// closed fully-degenerate region (all `x_i ≤ 1`; the support hypothesis of
/// the region-restricted inequalities). Inequalities that quantify over the
/// complement `I^c` are vacuous there and are skipped.
pub fn interp_lhs(
    field: &SampledField,
    view: &FieldView,
    alpha: f64,
    pair_budget: u64,
) -> Result<Vec<InterpLhs>> {
    check_alpha(alpha)?;
    let dims = field.grid.space.dims;
    let (n, m) = (dims.n, dims.m);
    let axes = dims.total();
    let elliptic = field.grid.times.len() == 1;
    let plan = PairPlan::for_view(view, pair_budget);
    let base = DerivKey::value(axes);
    let mut out = Vec::new();

    let c0a = |key: &DerivKey, weight: &dyn Fn(&ViewNode) -> f64| -> Result<f64> {
        let vals = view.extract(field, key, weight)?;
        Ok(sup_of(&vals) + alpha_seminorm(view, &vals, alpha, &plan))
    };
    let sup_only = |key: &DerivKey, weight: &dyn Fn(&ViewNode) -> f64| -> Result<f64> {
        let vals = view.extract(field, key, weight)?;
        Ok(sup_of(&vals))
    };

    out.push(InterpLhs {
        tag: "2.7",
        description: "|u|_{C^a_WF}".into(),
        value: c0a(&base, &|_| 1.0)?,
    });
    for i in 0..n {
        out.push(InterpLhs {
            tag: "2.8",
            description: format!("sup |u_x{}|", i + 1),
            value: sup_only(&base.bump_axis(i), &|_| 1.0)?,
        });
    }
    for l in 0..m {
        out.push(InterpLhs {
            tag: "2.9",
            description: format!("sup |u_y{}|", l + 1),
            value: sup_only(&base.bump_axis(n + l), &|_| 1.0)?,
        });
    }
    if !elliptic {
        out.push(InterpLhs {
            tag: "2.10",
            description: "sup |u_t|".into(),
            value: sup_only(&base.bump_time(), &|_| 1.0)?,
        });
    }
    for i in 0..n {
        for j in i..n {
            let key = base.bump_axis(i).bump_axis(j);
            out.push(InterpLhs {
                tag: "2.11",
                description: format!("sup |sqrt(x{} x{}) u_x{}x{}|", i + 1, j + 1, i + 1, j + 1),
                value: sup_only(&key, &|nd: &ViewNode| nd.sqrt_x[i] * nd.sqrt_x[j])?,
            });
        }
    }
    for i in 0..n {
        for l in 0..m {
            let key = base.bump_axis(i).bump_axis(n + l);
            out.push(InterpLhs {
                tag: "2.13",
                description: format!("sup |sqrt(x{}) u_x{}y{}|", i + 1, i + 1, l + 1),
                value: sup_only(&key, &|nd: &ViewNode| nd.sqrt_x[i])?,
            });
        }
    }
    for k2 in 0..m {
        for l in k2..m {
            let key = base.bump_axis(n + k2).bump_axis(n + l);
            out.push(InterpLhs {
                tag: "2.15",
                description: format!("sup |u_y{}y{}|", k2 + 1, l + 1),
                value: sup_only(&key, &|_| 1.0)?,
            });
        }
    }
    for i in 0..n {
        out.push(InterpLhs {
            tag: "2.16",
            description: format!("|x{} u_x{}|_{{C^a_WF}}", i + 1, i + 1),
            value: c0a(&base.bump_axis(i), &|nd: &ViewNode| nd.x[i])?,
        });
    }
    for l in 0..m {
        out.push(InterpLhs {
            tag: "2.18",
            description: format!("|u_y{}|_{{C^a_WF}}", l + 1),
            value: c0a(&base.bump_axis(n + l), &|_| 1.0)?,
        });
    }
    Ok(out)
}
