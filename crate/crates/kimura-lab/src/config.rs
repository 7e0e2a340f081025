//! Run configuration: a sectioned TOML file with quoted expression strings.
//! One file fully determines a run; there are no environment-dependent
//! defaults, and the SHA-256 hash of the file text prefixes every output.

use crate::error::{Error, Result};
use crate::exprlang::{parse, Expr};
use crate::geometry::Dims;
use crate::grid::GridSpec;
use crate::operator::CoefficientSet;
use crate::solver::{OuterBoundary, Scheme, SolveConfig};
use crate::verify::{DataSpec, Lab, RoughMember, SchauderParams, Thresholds, EXPERIMENTS};
use serde::Deserialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: RawProblem,
    grid: RawGrid,
    norms: RawNorms,
    #[serde(default)]
    verify: RawVerify,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    n: usize,
    m: usize,
    t_final: f64,
    a: Vec<String>,
    #[serde(default)]
    atilde: Vec<String>,
    b: Vec<String>,
    #[serde(default)]
    c: Vec<String>,
    #[serde(default)]
    d: Vec<String>,
    #[serde(default)]
    e: Vec<String>,
    #[serde(default)]
    f: Option<String>,
    #[serde(default)]
    f_rough: Option<RawRough>,
    #[serde(default = "default_zero_expr")]
    g: String,
}

fn default_zero_expr() -> String {
    "0".to_string()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRough {
    kind: String,
    beta: f64,
    #[serde(default)]
    center: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    j: usize,
    x_max: f64,
    #[serde(default)]
    y_intervals: usize,
    #[serde(default)]
    y_max: f64,
    dt: f64,
    #[serde(default = "default_scheme")]
    scheme: String,
    #[serde(default = "default_boundary")]
    boundary: String,
    #[serde(default = "default_margin")]
    margin: f64,
    #[serde(default = "default_solver_tol")]
    solver_tol: f64,
}

fn default_scheme() -> String {
    "implicit-euler".into()
}
fn default_boundary() -> String {
    "buffer-extrapolation".into()
}
fn default_margin() -> f64 {
    0.5
}
fn default_solver_tol() -> f64 {
    1e-12
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNorms {
    alpha: f64,
    #[serde(default)]
    k: usize,
    #[serde(default = "default_pair_budget")]
    pair_budget: u64,
}

fn default_pair_budget() -> u64 {
    2_000_000
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVerify {
    #[serde(default)]
    experiments: Vec<String>,
    #[serde(default = "default_eps_points")]
    eps_points: usize,
    #[serde(default = "default_eps_min")]
    eps_min: f64,
    #[serde(default = "default_eps_max")]
    eps_max: f64,
    #[serde(default = "default_levels")]
    refinement_levels: usize,
    #[serde(default = "default_family_ratio")]
    family_ratio_max: f64,
    #[serde(default = "default_stability")]
    refine_stability: f64,
    #[serde(default = "default_divergence")]
    divergence_factor: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    schauder: Option<RawSchauder>,
}

impl Default for RawVerify {
    fn default() -> Self {
        RawVerify {
            experiments: Vec::new(),
            eps_points: default_eps_points(),
            eps_min: default_eps_min(),
            eps_max: default_eps_max(),
            refinement_levels: default_levels(),
            family_ratio_max: default_family_ratio(),
            refine_stability: default_stability(),
            divergence_factor: default_divergence(),
            seed: 0,
            schauder: None,
        }
    }
}

fn default_eps_points() -> usize {
    20
}
fn default_eps_min() -> f64 {
    1e-3
}
fn default_eps_max() -> f64 {
    0.9
}
fn default_levels() -> usize {
    3
}
fn default_family_ratio() -> f64 {
    3.0
}
fn default_stability() -> f64 {
    0.25
}
fn default_divergence() -> f64 {
    2.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchauder {
    t0: f64,
    r: f64,
    center: Vec<f64>,
    #[serde(default)]
    betas: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    #[serde(default = "default_out_dir")]
    dir: String,
}

impl Default for RawOutput {
    fn default() -> Self {
        RawOutput {
            dir: default_out_dir(),
        }
    }
}

fn default_out_dir() -> String {
    "out".into()
}

/// Fully parsed run configuration.
pub struct RunConfig {
    pub lab: Lab,
    pub experiments: Vec<String>,
    pub out_dir: String,
    pub hash: String,
}

/// First 12 hex characters of the SHA-256 of the raw file text.
pub fn config_hash(text: &str) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    let digest = h.finalize();
    digest
        .iter()
        .take(6)
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn parse_all(texts: &[String], dims: Dims, what: &str) -> Result<Vec<Expr>> {
    texts
        .iter()
        .map(|s| {
            parse(s, dims).map_err(|e| Error::Config(format!("{what} `{s}`: {e}")))
        })
        .collect()
}

pub fn from_text(text: &str) -> Result<RunConfig> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| Error::Config(format!("TOML parse failure: {e}")))?;
    let dims = Dims::new(raw.problem.n, raw.problem.m);
    let (n, m) = (dims.n, dims.m);

    let a = parse_all(&raw.problem.a, dims, "coefficient a")?;
    let b = parse_all(&raw.problem.b, dims, "coefficient b")?;
    let atilde = if raw.problem.atilde.is_empty() {
        vec![Expr::Const(0.0); n * n]
    } else {
        parse_all(&raw.problem.atilde, dims, "coefficient atilde")?
    };
    let c = if raw.problem.c.is_empty() {
        vec![Expr::Const(0.0); n * m]
    } else {
        parse_all(&raw.problem.c, dims, "coefficient c")?
    };
    let d = if raw.problem.d.is_empty() {
        // identity block: the minimal strictly elliptic tangent part
        let mut d = vec![Expr::Const(0.0); m * m];
        for l in 0..m {
            d[l * m + l] = Expr::Const(1.0);
        }
        d
    } else {
        parse_all(&raw.problem.d, dims, "coefficient d")?
    };
    let e = if raw.problem.e.is_empty() {
        vec![Expr::Const(0.0); m]
    } else {
        parse_all(&raw.problem.e, dims, "coefficient e")?
    };
    let lc = CoefficientSet::new(dims, a, atilde, b, c, d, e)?;

    if !(raw.norms.alpha > 0.0 && raw.norms.alpha < 1.0) {
        return Err(Error::Config(format!(
            "alpha = {} must lie in (0,1)",
            raw.norms.alpha
        )));
    }

    let f = match (&raw.problem.f, &raw.problem.f_rough) {
        (Some(expr), None) => DataSpec::Expr(
            parse(expr, dims).map_err(|e| Error::Config(format!("initial data `{expr}`: {e}")))?,
        ),
        (None, Some(rough)) => {
            let member = match rough.kind.as_str() {
                "interior" => RoughMember::interior(
                    rough.beta,
                    if rough.center.is_empty() {
                        let mut c = vec![0.4 * raw.grid.x_max; n];
                        c.extend(vec![0.0; m]);
                        c
                    } else {
                        rough.center.clone()
                    },
                    n,
                    raw.grid.x_max,
                    raw.grid.y_max,
                )?,
                "boundary" => RoughMember::boundary(rough.beta, raw.grid.x_max)?,
                other => {
                    return Err(Error::Config(format!(
                        "unknown rough-data kind `{other}` (interior|boundary)"
                    )))
                }
            };
            DataSpec::Rough(member)
        }
        (None, None) => DataSpec::Expr(Expr::Const(0.0)),
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "give either problem.f or problem.f_rough, not both".into(),
            ))
        }
    };
    let g = parse(&raw.problem.g, dims)
        .map_err(|e| Error::Config(format!("source `{}`: {e}", raw.problem.g)))?;

    let scheme = match raw.grid.scheme.as_str() {
        "implicit-euler" => Scheme::ImplicitEuler,
        "crank-nicolson" => Scheme::CrankNicolson,
        other => {
            return Err(Error::Config(format!(
                "unknown scheme `{other}` (implicit-euler|crank-nicolson)"
            )))
        }
    };
    let boundary = match raw.grid.boundary.as_str() {
        "buffer-extrapolation" => OuterBoundary::BufferExtrapolation,
        "oracle-dirichlet" => OuterBoundary::OracleDirichlet,
        other => {
            return Err(Error::Config(format!(
                "unknown boundary mode `{other}` (buffer-extrapolation|oracle-dirichlet)"
            )))
        }
    };

    let cfg = SolveConfig {
        grid: GridSpec {
            dims,
            j: raw.grid.j,
            x_max: raw.grid.x_max,
            y_intervals: raw.grid.y_intervals,
            y_max: raw.grid.y_max,
            t_final: raw.problem.t_final,
            dt: raw.grid.dt,
        },
        scheme,
        boundary,
        solver_tol: raw.grid.solver_tol,
        margin: raw.grid.margin,
    };
    cfg.validate()?;
    cfg.grid.build()?; // fail fast on grid invariants

    for name in &raw.verify.experiments {
        if !EXPERIMENTS.contains(&name.as_str()) {
            return Err(Error::Config(format!(
                "unknown experiment `{name}`; registry: {}",
                EXPERIMENTS.join(", ")
            )));
        }
    }

    let eps_grid = log_grid(raw.verify.eps_min, raw.verify.eps_max, raw.verify.eps_points)?;
    let schauder = match &raw.verify.schauder {
        Some(s) => SchauderParams {
            t0: s.t0,
            r: s.r,
            center: s.center.clone(),
            betas: if s.betas.is_empty() {
                default_betas()
            } else {
                s.betas.clone()
            },
        },
        None => SchauderParams {
            // B_2r around the default center fits the default margin box
            t0: raw.problem.t_final / 4.0,
            r: raw.grid.x_max / 10.0,
            center: {
                let mut c = vec![0.3 * raw.grid.x_max; n];
                c.extend(vec![0.0; m]);
                c
            },
            betas: default_betas(),
        },
    };

    let hash = config_hash(text);
    let lab = Lab {
        lc,
        f,
        g,
        cfg,
        alpha: raw.norms.alpha,
        k: raw.norms.k,
        pair_budget: raw.norms.pair_budget,
        eps_grid,
        levels: raw.verify.refinement_levels,
        thresholds: Thresholds {
            family_ratio_max: raw.verify.family_ratio_max,
            refine_stability: raw.verify.refine_stability,
            divergence_factor: raw.verify.divergence_factor,
            monotone_slack: 1.05,
        },
        schauder,
        config_hash: hash.clone(),
        seed: raw.verify.seed,
    };
    Ok(RunConfig {
        lab,
        experiments: raw.verify.experiments,
        out_dir: raw.output.dir,
        hash,
    })
}

fn default_betas() -> Vec<f64> {
    vec![1.0, 2.0 / 3.0, 0.5, 1.0 / 3.0]
}

fn log_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && hi < 1.0) || points < 2 {
        return Err(Error::Config(
            "eps grid needs 0 < eps_min < eps_max < 1 and at least 2 points".into(),
        ));
    }
    let (llo, lhi) = (lo.ln(), hi.ln());
    Ok((0..points)
        .map(|i| (llo + (lhi - llo) * i as f64 / (points - 1) as f64).exp())
        .collect())
}

pub fn load(path: &std::path::Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    from_text(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[problem]
n = 1
m = 0
t_final = 1.0
a = ["1"]
b = ["0.5"]
f = "x1*(1-x1)"
g = "0"

[grid]
j = 16
x_max = 1.0
dt = 0.125

[norms]
alpha = 0.5
"#;

    #[test]
    fn minimal_config_parses() {
        let cfg = from_text(MINIMAL).unwrap();
        assert_eq!(cfg.lab.cfg.grid.j, 16);
        assert_eq!(cfg.hash.len(), 12);
        assert!(cfg.experiments.is_empty());
        assert_eq!(cfg.lab.eps_grid.len(), 20);
    }

    #[test]
    fn hash_is_stable_and_text_sensitive() {
        let h1 = config_hash(MINIMAL);
        let h2 = config_hash(MINIMAL);
        assert_eq!(h1, h2);
        let h3 = config_hash(&MINIMAL.replace("0.5", "0.6"));
        assert_ne!(h1, h3);
    }

    #[test]
    fn bad_expression_is_config_error() {
        let text = MINIMAL.replace("x1*(1-x1)", "x3");
        assert!(matches!(from_text(&text), Err(Error::Config(_))));
    }

    #[test]
    fn bad_alpha_rejected() {
        let text = MINIMAL.replace("alpha = 0.5", "alpha = 1.5");
        assert!(matches!(from_text(&text), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_experiment_rejected() {
        let text = format!("{MINIMAL}\n[verify]\nexperiments = [\"nope\"]\n");
        assert!(matches!(from_text(&text), Err(Error::Config(_))));
    }

    #[test]
    fn rough_member_config() {
        let text = MINIMAL.replace(
            "f = \"x1*(1-x1)\"",
            "f_rough = { kind = \"interior\", beta = 0.5, center = [0.4] }",
        );
        let cfg = from_text(&text).unwrap();
        assert!(matches!(cfg.lab.f, DataSpec::Rough(_)));
    }
}
