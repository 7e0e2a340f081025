use clap::{Parser, Subcommand};
use kimura_lab::config::{self, RunConfig};
use kimura_lab::error::Error;
use kimura_lab::field::FieldView;
use kimura_lab::holder;
use kimura_lab::operator::{validate_assumptions, SamplingSpec};
use kimura_lab::output;
use kimura_lab::solver::{estimate_derivatives, solve_ivp, InitialData};
use kimura_lab::verify::{self, DataSpec};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

#[derive(Parser)]
#[command(
    name = "kimura-lab",
    about = "Numerical laboratory for degenerate diffusion operators: solve, norm, verify"
)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "lab.toml")]
    config: PathBuf,
    /// Output directory (overrides the config's output.dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for pair sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for sampling specs in `validate` (never affects solver paths).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check strict ellipticity, coefficient bounds and face drift signs.
    Validate,
    /// Solve the initial-value problem and dump the space-time field.
    Solve,
    /// Weighted Hölder norm report of a solve (or of a supplied field file).
    Norms {
        /// Read the field from a previously dumped CSV instead of solving.
        #[arg(long)]
        field: Option<PathBuf>,
    },
    /// Run one named verification experiment.
    Verify { experiment: String },
    /// Convergence study against the exact polynomial evolution.
    Oracle,
    /// Run the configured experiment battery.
    All,
    /// Re-measure the calibration constants for this configuration.
    Calibrate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // a second invocation in-process would fail; the CLI sets it once
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let mut cfg = match config::load(&cli.config) {
        Ok(cfg) => cfg,
        Err(err) => {
            eprintln!("config error: {err}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = cli.seed {
        cfg.lab.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.display().to_string();
    }
    if let Err(err) = std::fs::create_dir_all(&cfg.out_dir) {
        eprintln!("cannot create output directory {}: {err}", cfg.out_dir);
        return ExitCode::from(2);
    }
    match run(&cli, &cfg) {
        Ok(pass) => {
            if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Config(_) | Error::Syntax { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn out_path(cfg: &RunConfig, suffix: &str) -> PathBuf {
    Path::new(&cfg.out_dir).join(format!("{}_{suffix}", cfg.hash))
}

fn log_line(cfg: &RunConfig, text: &str) {
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let _ = output::append_log(&out_path(cfg, "run.log"), &format!("{stamp} {text}"));
}

fn run(cli: &Cli, cfg: &RunConfig) -> kimura_lab::Result<bool> {
    let lab = &cfg.lab;
    match &cli.command {
        Command::Validate => {
            let spec = SamplingSpec {
                seed: lab.seed,
                alpha: lab.alpha,
                x_cap: lab.cfg.grid.x_max.max(2.0),
                y_cap: lab.cfg.grid.y_max.max(1.0),
                ..SamplingSpec::default()
            };
            let report = validate_assumptions(&lab.lc, &spec)?;
            let path = out_path(cfg, "validate.csv");
            output::write_atomic(&path, &output::assumption_csv(&report))?;
            println!(
                "{} validate delta_hat={} K_hat={} b_min_boundary={}",
                if report.pass() { "PASS" } else { "FAIL" },
                report.delta_hat,
                report.k_hat,
                report.b_min_boundary
            );
            for v in &report.violations {
                println!("violation: {v}");
            }
            log_line(cfg, &format!("validate pass={}", report.pass()));
            Ok(report.pass())
        }
        Command::Solve => {
            let started = Instant::now();
            let mut field = solve_field(lab)?;
            field.provenance = Some(cfg.hash.clone());
            output::write_atomic(&out_path(cfg, "field.csv"), &output::field_csv(&field))?;
            output::write_atomic(
                &out_path(cfg, "field.meta"),
                &output::field_meta(&field, &cfg.hash),
            )?;
            println!(
                "solved: {} time slices x {} nodes -> {}",
                field.grid.times.len(),
                field.grid.space.node_count(),
                out_path(cfg, "field.csv").display()
            );
            log_line(cfg, &format!("solve {:.3}s", started.elapsed().as_secs_f64()));
            Ok(true)
        }
        Command::Norms { field } => {
            let sampled = match field {
                Some(path) => output::parse_field_csv(&std::fs::read_to_string(path)?)?,
                None => solve_field(lab)?,
            };
            let with_derivs = estimate_derivatives(&sampled)?;
            let view = FieldView::full(sampled.grid.clone());
            let report =
                holder::wf_norm_2alpha(&with_derivs, &view, lab.alpha, lab.k, lab.pair_budget)?;
            output::write_atomic(&out_path(cfg, "norms.csv"), &output::holder_csv(&report))?;
            println!(
                "norms: total={} sup={} pairs={}",
                report.total, report.sup_norm, report.pair_count_used
            );
            log_line(cfg, "norms done");
            Ok(true)
        }
        Command::Verify { experiment } => {
            let report = verify::run_experiment(lab, experiment)?;
            let path = out_path(cfg, &format!("verify_{experiment}.csv"));
            output::write_atomic(&path, &output::verify_csv(&report))?;
            println!("{}", report.summary_line());
            log_line(
                cfg,
                &format!("verify {experiment} {:.3}s", report.runtime_seconds),
            );
            Ok(report.pass)
        }
        Command::Oracle => {
            let report = verify::run_experiment(lab, "oracle")?;
            output::write_atomic(
                &out_path(cfg, "verify_oracle.csv"),
                &output::verify_csv(&report),
            )?;
            println!("{}", report.summary_line());
            log_line(cfg, &format!("oracle {:.3}s", report.runtime_seconds));
            Ok(report.pass)
        }
        Command::All => {
            let list: Vec<String> = if cfg.experiments.is_empty() {
                verify::EXPERIMENTS.iter().map(|s| s.to_string()).collect()
            } else {
                cfg.experiments.clone()
            };
            let mut all_pass = true;
            for name in &list {
                let report = verify::run_experiment(lab, name)?;
                let path = out_path(cfg, &format!("verify_{name}.csv"));
                output::write_atomic(&path, &output::verify_csv(&report))?;
                println!("{}", report.summary_line());
                log_line(cfg, &format!("verify {name} {:.3}s", report.runtime_seconds));
                all_pass &= report.pass;
            }
            Ok(all_pass)
        }
        Command::Calibrate => {
            let c_interp = holder::calibration::calibrate_interp(
                &lab.cfg.grid,
                lab.alpha,
                &lab.eps_grid,
                lab.pair_budget,
            )?;
            let c_lemma = holder::calibration::calibrate_lemma(
                &lab.lc,
                &lab.cfg.grid,
                lab.alpha,
                &lab.eps_grid,
                lab.pair_budget,
            )?;
            println!(
                "measured C_interp={} C_lemma={} (freeze with 1.25x headroom; m = {})",
                c_interp,
                c_lemma,
                holder::calibration::exponent_m(lab.alpha)
            );
            Ok(true)
        }
    }
}

fn solve_field(lab: &verify::Lab) -> kimura_lab::Result<kimura_lab::field::SampledField> {
    match &lab.f {
        DataSpec::Expr(e) => solve_ivp(&lab.lc, InitialData::Expr(e), &lab.g, &lab.cfg),
        DataSpec::Rough(r) => {
            let eval = |z: &kimura_lab::geometry::SpatialPoint| r.eval(z);
            solve_ivp(&lab.lc, InitialData::Fn(&eval), &lab.g, &lab.cfg)
        }
    }
}
