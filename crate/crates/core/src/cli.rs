//! Command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input or configuration, 2 the solver did
//! not converge (or produced an invalid state), 3 file or parse errors.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::io::{
    energy_trace_csv, field_from_image, fmt_real, image_from_field, load_pgm, save_orientation,
    save_pgm, write_atomic, PgmFormat, RunConfig,
};
use crate::solver::{orientation_multistart, run, solve_initial_orientation, Trajectory};
use crate::theory::{compute_conditions, twin_run, ConditionReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_CONVERGENCE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "orient-denoise",
    version,
    about = "Orientation-adaptive anisotropic denoising of grey-scale PGM images"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the full scheme; writes u_final.pgm, alpha_final.pgm (+ range
    /// sidecar), energy_trace.csv and run_report.txt.
    Denoise {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compute only the initial orientation; writes alpha0.pgm (+ sidecar)
    /// and orientation_report.txt.
    InitOrientation {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate the largeness thresholds; writes conditions.txt and conditions.csv.
    CheckConditions {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run twice, from u0 and from (1 − δ)·u0 + δ·bump; writes j_trace.csv
    /// and twin_report.txt.
    TwinRun {
        #[arg(long)]
        config: PathBuf,
        /// Perturbation magnitude δ in (0, 1].
        #[arg(long)]
        perturb: f64,
    },
    /// Run the built-in invariant checks.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e.root() {
        Error::Shape(_) | Error::Domain(_) | Error::Assumption { .. } | Error::Config(_) => {
            EXIT_VALIDATION
        }
        Error::Convergence { .. } | Error::Numeric(_) | Error::MaximumPrinciple { .. } => {
            EXIT_CONVERGENCE
        }
        Error::Parse { .. } | Error::Io(_) => EXIT_IO,
        Error::Step { .. } => unreachable!("root strips step wrappers"),
    }
}

/// Parses `args` (including the program name), runs, prints and returns the exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(summary) => {
            print!("{summary}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

struct Inputs {
    cfg: RunConfig,
    u_org: ScalarField<f64>,
    u0: ScalarField<f64>,
}

fn load_inputs(config: &Path) -> Result<Inputs> {
    let cfg = RunConfig::load(config)?;
    let input = cfg
        .input
        .clone()
        .ok_or_else(|| Error::Config("missing key \"input\"".into()))?;
    let u_org = field_from_image(&load_pgm(&input)?)?;
    let u0 = match &cfg.u0 {
        Some(p) => field_from_image(&load_pgm(p)?)?,
        None => u_org.clone(),
    };
    u_org.grid().check_same(u0.grid()).map_err(|_| {
        Error::Shape("u0 and input images must have the same size".into())
    })?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    Ok(Inputs { cfg, u_org, u0 })
}

fn conditions(inp: &Inputs) -> Result<ConditionReport<f64>> {
    let (a_len, b_len) = inp.u0.grid().extent();
    let emb = inp.cfg.embeddings(a_len, b_len)?;
    let a = inp.cfg.anisotropy.build()?;
    let mut report = compute_conditions(&inp.cfg.params, &a, &inp.u0, &inp.u_org, &emb)?;
    if let Some(g) = inp.cfg.gamma_w1inf {
        let mut inputs = report.inputs;
        inputs.gamma_w1inf = g;
        report = ConditionReport::from_inputs(inputs);
    }
    Ok(report)
}

fn execute(cmd: Command) -> Result<String> {
    match cmd {
        Command::Denoise { config } => denoise(&load_inputs(&config)?),
        Command::InitOrientation { config } => init_orientation(&load_inputs(&config)?),
        Command::CheckConditions { config } => check_conditions(&load_inputs(&config)?),
        Command::TwinRun { config, perturb } => twin(&load_inputs(&config)?, perturb),
        Command::Selftest { seed } => selftest(seed),
    }
}

fn config_lines(cfg: &RunConfig) -> String {
    let p = &cfg.params;
    let s = &cfg.solver;
    let a = &cfg.anisotropy;
    let mut out = String::new();
    for (k, v) in [
        ("kappa", p.kappa),
        ("mu", p.mu),
        ("nu", p.nu),
        ("lambda", p.lambda),
        ("p", p.p),
        ("tau", p.tau),
        ("T", p.t_final),
        ("epsilon", a.epsilon),
        ("tol_res", s.tol_res),
        ("armijo_c", s.armijo_c),
        ("backtrack", s.backtrack),
        ("init_step", s.init_step),
    ] {
        let _ = writeln!(out, "{k} = {}", fmt_real(v));
    }
    let _ = writeln!(out, "family = {}", a.family);
    let _ = writeln!(out, "max_outer = {}\nmax_inner = {}", s.max_outer, s.max_inner);
    out
}

fn conditions_text(r: &ConditionReport<f64>) -> String {
    let mut out = String::new();
    let i = &r.inputs;
    let _ = writeln!(out, "# inputs");
    for (k, v) in [
        ("c_poincare", i.emb.c_poincare),
        ("c_sob_1", i.emb.c_sob_1),
        ("c_sob_2", i.emb.c_sob_2),
        ("gamma_w1inf", i.gamma_w1inf),
        ("grad_u0_lp", i.grad_u_lp),
        ("energy_0_u0", i.energy0),
    ] {
        let _ = writeln!(out, "{k} = {}", fmt_real(v));
    }
    let _ = writeln!(out, "# thresholds");
    for (k, v) in condition_rows(r) {
        let _ = writeln!(out, "{k} = {v}");
    }
    out
}

fn condition_rows(r: &ConditionReport<f64>) -> Vec<(&'static str, String)> {
    vec![
        ("c1", fmt_real(r.c1)),
        ("c1_proof", fmt_real(r.c1_proof)),
        ("c2", fmt_real(r.c2)),
        ("c2_proof", fmt_real(r.c2_proof)),
        ("kappa_hat", fmt_real(r.kappa_hat)),
        ("kappa_hat_alt", fmt_real(r.kappa_hat_alt)),
        ("tau_hat", fmt_real(r.tau_hat)),
        ("tau_hat_alt", fmt_real(r.tau_hat_alt)),
        ("alpha0_unique_bound", fmt_real(r.alpha0_unique_bound)),
        ("kappa", fmt_real(r.inputs.kappa)),
        ("tau", fmt_real(r.inputs.tau)),
        ("kappa_ok", r.kappa_ok.to_string()),
        ("tau_ok", r.tau_ok.to_string()),
        ("kappa_ok_alt", r.kappa_ok_alt.to_string()),
        ("tau_ok_alt", r.tau_ok_alt.to_string()),
        ("alpha0_unique", r.alpha0_unique.to_string()),
    ]
}

fn conditions_csv(r: &ConditionReport<f64>) -> String {
    let mut out = String::from("quantity,value\n");
    for (k, v) in condition_rows(r) {
        let _ = writeln!(out, "{k},{v}");
    }
    out
}

fn trajectory_summary(traj: &Trajectory<f64>) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# step, outer_sweeps, inner_iterations, E_total, ineq_slack, res_alpha, res_u, tolerance"
    );
    for s in traj.steps() {
        let r = &s.report;
        let _ = writeln!(
            out,
            "{}, {}, {}, {}, {}, {}, {}, {}",
            r.index,
            r.outer_sweeps,
            r.inner_iterations,
            fmt_real(r.energy_after.total),
            fmt_real(r.ineq_slack),
            fmt_real(r.res_alpha),
            fmt_real(r.res_u),
            fmt_real(r.tolerance)
        );
    }
    out
}

fn denoise(inp: &Inputs) -> Result<String> {
    let cfg = &inp.cfg;
    let a = cfg.anisotropy.build()?;
    let cond = conditions(inp)?;
    let traj = run(&inp.u0, &inp.u_org, &cfg.params, &a, &cfg.solver)?;
    let dir = &cfg.output_dir;
    let last = traj.last();
    save_pgm(
        &image_from_field(&last.u, true)?,
        dir.join("u_final.pgm"),
        cfg.maxval,
        PgmFormat::Binary,
    )?;
    let range = save_orientation(&last.alpha, dir, "alpha_final", cfg.maxval)?;
    write_atomic(&dir.join("energy_trace.csv"), energy_trace_csv(&traj).as_bytes())?;

    let totals = traj.energy_totals();
    let mut report = String::from("# denoise run\n");
    report.push_str(&config_lines(cfg));
    let _ = writeln!(report, "steps = {}", traj.step_count());
    let _ = writeln!(report, "alpha_final_min = {}", fmt_real(range.0));
    let _ = writeln!(report, "alpha_final_max = {}", fmt_real(range.1));
    let _ = writeln!(report, "energy_initial = {}", fmt_real(totals[0]));
    let _ = writeln!(report, "energy_final = {}", fmt_real(*totals.last().expect("nonempty")));
    let _ = writeln!(
        report,
        "u_final_range = [{}, {}]",
        fmt_real(last.u.min()),
        fmt_real(last.u.max())
    );
    report.push_str(&conditions_text(&cond));
    report.push_str(&trajectory_summary(&traj));
    write_atomic(&dir.join("run_report.txt"), report.as_bytes())?;
    Ok(format!(
        "denoise: {} steps, energy {} -> {}, outputs in {}\n",
        traj.step_count(),
        fmt_real(totals[0]),
        fmt_real(*totals.last().expect("nonempty")),
        dir.display()
    ))
}

fn init_orientation(inp: &Inputs) -> Result<String> {
    let cfg = &inp.cfg;
    let a = cfg.anisotropy.build()?;
    let (alpha, rep) = solve_initial_orientation(&inp.u0, &cfg.params, &a, &cfg.solver)?;
    let dir = &cfg.output_dir;
    let range = save_orientation(&alpha, dir, "alpha0", cfg.maxval)?;
    let mut report = String::from("# initial orientation\n");
    report.push_str(&config_lines(cfg));
    let _ = writeln!(report, "res_alpha = {}", fmt_real(rep.res_alpha));
    let _ = writeln!(report, "tolerance = {}", fmt_real(rep.tolerance));
    let _ = writeln!(report, "iterations = {}", rep.inner_iterations);
    let _ = writeln!(report, "alpha0_min = {}", fmt_real(range.0));
    let _ = writeln!(report, "alpha0_max = {}", fmt_real(range.1));
    if cfg.multistart > 0 {
        let all = orientation_multistart(
            &inp.u0,
            &cfg.params,
            &a,
            &cfg.solver,
            cfg.multistart,
            std::f64::consts::PI,
            cfg.seed,
        )?;
        let spread = all[1..]
            .iter()
            .map(|x| x.sub(&all[0]).map(|d| d.norm_l2()))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let _ = writeln!(report, "multistart_restarts = {}", cfg.multistart);
        let _ = writeln!(report, "multistart_max_l2_gap = {}", fmt_real(spread));
    }
    write_atomic(&dir.join("orientation_report.txt"), report.as_bytes())?;
    Ok(format!(
        "init-orientation: residual {} (tolerance {})\n",
        fmt_real(rep.res_alpha),
        fmt_real(rep.tolerance)
    ))
}

fn check_conditions(inp: &Inputs) -> Result<String> {
    let r = conditions(inp)?;
    let dir = &inp.cfg.output_dir;
    let text = conditions_text(&r);
    write_atomic(&dir.join("conditions.txt"), text.as_bytes())?;
    write_atomic(&dir.join("conditions.csv"), conditions_csv(&r).as_bytes())?;
    Ok(text)
}

fn twin(inp: &Inputs, delta: f64) -> Result<String> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Config(format!("perturb must lie in (0, 1], got {delta}")));
    }
    let cfg = &inp.cfg;
    let a = cfg.anisotropy.build()?;
    let target = crate::instances::bump_on(*inp.u0.grid());
    let u0_b = inp.u0.scale(1.0 - delta).add(&target.scale(delta))?;
    let u0_b = u0_b.map(|v| v.clamp(0.0, 1.0));
    let cond = conditions(inp)?;
    let t = twin_run(&inp.u0, &u0_b, &inp.u_org, &cfg.params, &a, &cfg.solver)?;
    let dir = &cfg.output_dir;
    let mut csv = String::from("step,t,J,alpha_gap\n");
    for (i, ((tt, j), g)) in t
        .trace
        .times
        .iter()
        .zip(&t.trace.j_values)
        .zip(&t.trace.alpha_gap)
        .enumerate()
    {
        let _ = writeln!(csv, "{i},{},{},{}", fmt_real(*tt), fmt_real(*j), fmt_real(*g));
    }
    write_atomic(&dir.join("j_trace.csv"), csv.as_bytes())?;
    let certificate = if cond.kappa_ok {
        "kappa above kappa_hat: stability estimate applies"
    } else {
        "withheld: kappa does not exceed kappa_hat"
    };
    let mut report = String::from("# twin run\n");
    report.push_str(&config_lines(cfg));
    let _ = writeln!(report, "perturb = {}", fmt_real(delta));
    let _ = writeln!(report, "J0 = {}", fmt_real(t.trace.j_values[0]));
    let _ = writeln!(report, "stability_ratio = {}", fmt_real(t.stability_ratio));
    let _ = writeln!(report, "kappa_hat = {}", fmt_real(cond.kappa_hat));
    let _ = writeln!(report, "certificate = {certificate}");
    write_atomic(&dir.join("twin_report.txt"), report.as_bytes())?;
    Ok(format!(
        "twin-run: J(0) = {}, stability_ratio = {} ({certificate})\n",
        fmt_real(t.trace.j_values[0]),
        fmt_real(t.stability_ratio)
    ))
}

fn selftest(seed: u64) -> Result<String> {
    let checks = crate::selftest::run_selftest(seed);
    let mut out = String::new();
    for c in &checks {
        let _ = writeln!(
            out,
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    if checks.iter().all(|c| c.passed) {
        Ok(out)
    } else {
        print!("{out}");
        Err(Error::Numeric("selftest checks failed".into()))
    }
}
