//! Command-line front end. [`run`] parses arguments, dispatches to a
//! subcommand and maps failures to exit codes: 0 success, 1 failed
//! verification, 2 input error, 3 convergence error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use barropt_core::multibarrier::{f_surface, solve, z_of_v};
use barropt_core::one_barrier::default_upper;
use barropt_core::{
    check_hjb, find_bstar, BarrierSet, Error as CoreError, GridSpec, LevyModel, OneBarrierOptions,
    RewardFunction, ScaleFunctions, SolveOptions, SolveWarning, ValueFunction,
};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::io::{self, Cell, Header, IoError};
use crate::mc::{self, SimConfig, SimError};

/// Exit code for a verification that ran and failed.
pub const EXIT_VERIFY_FAIL: i32 = 1;
/// Exit code for unreadable or invalid input.
pub const EXIT_INPUT: i32 = 2;
/// Exit code for a numerical method that did not converge.
pub const EXIT_CONVERGENCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "barropt", version, about = "Optimal barrier strategies for reward-weighted singular control")]
struct Cli {
    /// Worker threads for the simulator. Affects speed only.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Absolute tolerance for the verification residuals.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Suppress the summary on standard error.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Inputs {
    /// Model JSON.
    #[arg(long)]
    model: PathBuf,
    /// Reward JSON.
    #[arg(long)]
    reward: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate W, W′, W″ and Z.
    Scale {
        /// Model JSON.
        #[arg(long)]
        model: PathBuf,
        /// Grid as start:end:step.
        #[arg(long, default_value = "0:10:0.01")]
        grid: String,
        /// Output CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Optimal single barrier.
    OneBarrier {
        #[command(flatten)]
        inputs: Inputs,
        /// Upper end of the search.
        #[arg(long)]
        upper: Option<f64>,
        /// Output JSON.
        #[arg(long)]
        out: PathBuf,
        /// CSV of u, F, Fprime on the search grid; defaults to the JSON path
        /// with a .csv extension.
        #[arg(long)]
        grid_out: Option<PathBuf>,
    },
    /// Multibarrier construction.
    Solve {
        #[command(flatten)]
        inputs: Inputs,
        /// Cap on the total number of levels.
        #[arg(long, default_value_t = 9)]
        max_barriers: usize,
        /// Upper end of all scans.
        #[arg(long)]
        upper: Option<f64>,
        /// Output JSON.
        #[arg(long)]
        out: PathBuf,
        /// CSV trace with columns stage,k,v,z,F,genH.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Check the variational inequality for a given barrier set.
    Verify {
        #[command(flatten)]
        inputs: Inputs,
        /// Comma-separated barrier levels.
        #[arg(long)]
        barriers: String,
        /// Output JSON report.
        #[arg(long)]
        out: PathBuf,
        /// CSV of x, genV, g_minus_Vprime; defaults to the JSON path with a
        /// .csv extension.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Grid points.
        #[arg(long, default_value_t = 10_000)]
        points: usize,
        /// Right end of the grid.
        #[arg(long)]
        upper: Option<f64>,
    },
    /// Monte Carlo estimate of the value of a barrier set.
    Simulate {
        #[command(flatten)]
        inputs: Inputs,
        /// Comma-separated barrier levels.
        #[arg(long)]
        barriers: String,
        /// Starting level.
        #[arg(long)]
        x0: f64,
        /// Number of paths.
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        /// Step length near the levels.
        #[arg(long, default_value_t = 1e-4)]
        dt: f64,
        /// Longest step far from the levels; defaults to 0.05.
        #[arg(long)]
        max_dt: Option<f64>,
        /// Truncation time.
        #[arg(long, default_value_t = 200.0)]
        horizon: f64,
        /// Seed.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Antithetic pairs.
        #[arg(long)]
        antithetic: bool,
        /// Brownian-bridge corrections at the levels.
        #[arg(long)]
        bridge: bool,
        /// Output JSON.
        #[arg(long)]
        out: PathBuf,
        /// Number of paths to trace.
        #[arg(long)]
        trace: Option<usize>,
        /// CSV for the traced paths.
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Evaluate F(v, z) above a barrier set on a rectangle, plus the
    /// maximizer curve z(v).
    Sweep {
        #[command(flatten)]
        inputs: Inputs,
        /// Comma-separated barrier levels the surface is built on.
        #[arg(long)]
        barriers: String,
        /// v range as start:end:count.
        #[arg(long)]
        v: String,
        /// z range as start:end:count.
        #[arg(long)]
        z: String,
        /// Upper end of the maximizer search.
        #[arg(long)]
        upper: Option<f64>,
        /// Output CSV of v, z, F, dFdz.
        #[arg(long)]
        out: PathBuf,
        /// CSV of v, z_of_v, F along the maximizer curve.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
}

/// Failure of a command, carrying its exit code.
#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Convergence(String),
    #[error("verification failed")]
    VerifyFailed,
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Convergence(_) => EXIT_CONVERGENCE,
            CliError::VerifyFailed => EXIT_VERIFY_FAIL,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::ConvergenceFailure(_)
            | CoreError::UnboundedSearch(_)
            | CoreError::NoSignChange { .. }
            | CoreError::EmptyD { .. }
            | CoreError::MatchingFailure { .. }
            | CoreError::DegenerateModel(_) => CliError::Convergence(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Invalid { ref source, .. } if CliError::from(source.clone()).code() == EXIT_CONVERGENCE => {
                CliError::Convergence(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Input(e.to_string())
    }
}

fn csv_sibling(out: &Path) -> PathBuf {
    out.with_extension("csv")
}

struct Loaded {
    echo: serde_json::Value,
    model: LevyModel,
    sf: ScaleFunctions,
    reward: RewardFunction,
}

fn load(inputs: &Inputs) -> Result<Loaded, CliError> {
    let (mspec, model) = io::load_model(&inputs.model)?;
    let (rspec, reward) = io::load_reward(&inputs.reward)?;
    let sf = ScaleFunctions::new(&model)?;
    let echo = json!({
        "model_path": inputs.model,
        "reward_path": inputs.reward,
        "model": mspec,
        "reward": rspec,
    });
    Ok(Loaded { echo, model, sf, reward })
}

fn with_options(mut echo: serde_json::Value, options: serde_json::Value) -> serde_json::Value {
    echo["options"] = options;
    echo
}

fn barrier_set(spec: &str) -> Result<BarrierSet, CliError> {
    let levels = io::parse_levels(spec).map_err(CliError::Input)?;
    if levels.is_empty() {
        return Err(CliError::Input("no barrier levels given".into()));
    }
    Ok(BarrierSet::new(levels)?)
}

fn warning_label(w: &SolveWarning) -> String {
    match w {
        SolveWarning::RewardGeneratorVanishes { from, to } => format!("reward_generator_vanishes on [{from}, {to}]"),
        SolveWarning::Cond3Failed { k } => format!("cond3_failed at pair {k}"),
        SolveWarning::GrowthCheckFailed => "growth_check_failed".into(),
    }
}

/// Runs the program on `argv` (including the program name) and returns the
/// exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { 0 };
        }
    };
    if let Some(n) = cli.threads {
        // A second call in the same process keeps the first pool, which only
        // affects speed.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(CliError::VerifyFailed) => EXIT_VERIFY_FAIL,
        Err(e) => {
            eprintln!("barropt: {e}");
            e.code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let say = |msg: String| {
        if !cli.quiet {
            eprintln!("{msg}");
        }
    };
    match &cli.command {
        Command::Scale { model, grid, out } => {
            let (mspec, m) = io::load_model(model)?;
            let sf = ScaleFunctions::new(&m)?;
            let xs = io::parse_grid(grid).map_err(CliError::Input)?;
            let rows: Vec<Vec<Cell>> = xs
                .iter()
                .map(|&x| vec![x.into(), sf.w(x).into(), sf.w1(x).into(), sf.w2(x).into(), sf.z(x).into()])
                .collect();
            let header = Header::new("scale", json!({"model_path": model, "model": mspec, "grid": grid}));
            io::write_csv(out, &header, &["x", "W", "W1", "W2", "Z"], &rows)?;
            say(format!("wrote {} rows to {}", rows.len(), out.display()));
        }
        Command::OneBarrier { inputs, upper, out, grid_out } => {
            let l = load(inputs)?;
            let opts = OneBarrierOptions { upper: *upper, keep_diagnostics: true, ..OneBarrierOptions::default() };
            let sol = find_bstar(&l.sf, &l.reward, &opts)?;
            let grid_path = grid_out.clone().unwrap_or_else(|| csv_sibling(out));
            let header = Header::new("one-barrier", with_options(l.echo, json!({"upper": upper})));
            let rows: Vec<Vec<Cell>> =
                sol.diagnostics.iter().map(|&(u, f, d)| vec![u.into(), f.into(), d.into()]).collect();
            io::write_csv(&grid_path, &header, &["u", "F", "Fprime"], &rows)?;
            let body = json!({
                "bstar": sol.bstar,
                "Fmax": sol.f_max,
                "decrF1_holds": sol.decr_f1_holds,
                "search_upper": sol.search_upper,
                "a_star": l.sf.a_star(),
                "grid_path": grid_path,
            });
            io::write_json(out, &header, &body)?;
            say(format!("b* = {:.6}, F(b*) = {:.6}, decreasing beyond: {}", sol.bstar, sol.f_max, sol.decr_f1_holds));
        }
        Command::Solve { inputs, max_barriers, upper, out, trace } => {
            let l = load(inputs)?;
            let opts = SolveOptions { max_barriers: *max_barriers, upper: *upper, trace: trace.is_some(), ..SolveOptions::default() };
            let sol = solve(&l.sf, &l.reward, &opts)?;
            let header = Header::new(
                "solve",
                with_options(l.echo, json!({"max_barriers": max_barriers, "upper": upper})),
            );
            if let Some(path) = trace {
                let rows: Vec<Vec<Cell>> = sol
                    .trace
                    .iter()
                    .map(|t| vec![t.stage.as_str().into(), t.k.into(), t.v.into(), t.z.into(), t.f.into(), t.gen_h.into()])
                    .collect();
                io::write_csv(path, &header, &["stage", "k", "v", "z", "F", "genH"], &rows)?;
            }
            let body = json!({
                "barriers": sol.barriers.levels(),
                "c_points": sol.c_points,
                "n": sol.barriers.n(),
                "stopped_reason": sol.stopped_reason.as_str(),
                "monotone_tail": sol.monotone_tail,
                "matching": sol.matching.iter().map(|m| json!({"boundary": m.0, "interior": m.1})).collect::<Vec<_>>(),
                "cond3": sol.cond3,
                "bstar": sol.one_barrier.bstar,
                "upper": sol.upper,
                "warnings": sol.warnings.iter().map(warning_label).collect::<Vec<_>>(),
            });
            io::write_json(out, &header, &body)?;
            say(format!("barriers {:?} ({})", sol.barriers.levels(), sol.stopped_reason.as_str()));
        }
        Command::Verify { inputs, barriers, out, csv, points, upper } => {
            let l = load(inputs)?;
            let bset = barrier_set(barriers)?;
            let vf = ValueFunction::new(&l.sf, &l.reward, bset.clone())?;
            let spec = GridSpec { upper: *upper, points: *points, tol: cli.tol, ..GridSpec::default() };
            let rep = check_hjb(&vf, &spec);
            let header = Header::new(
                "verify",
                with_options(l.echo, json!({"barriers": bset.levels(), "points": points, "upper": upper, "tol": cli.tol})),
            );
            let csv_path = csv.clone().unwrap_or_else(|| csv_sibling(out));
            let rows: Vec<Vec<Cell>> = rep
                .grid
                .iter()
                .zip(rep.residual_gen.iter().zip(&rep.residual_grad))
                .map(|(&x, (&g, &d))| vec![x.into(), g.into(), d.into()])
                .collect();
            io::write_csv(&csv_path, &header, &["x", "genV", "g_minus_Vprime"], &rows)?;
            let body = json!({
                "verdict": if rep.verdict { "pass" } else { "fail" },
                "barriers": bset.levels(),
                "max_violation_gen": rep.max_violation_gen,
                "argmax_gen": rep.argmax_gen,
                "max_violation_grad": rep.max_violation_grad,
                "argmax_grad": rep.argmax_grad,
                "tol": rep.tol,
                "quadrature_warnings": rep.quadrature_warnings,
                "pasting": rep.pasting.iter().map(|p| json!({
                    "index": p.index,
                    "level": p.level,
                    "gap_v": p.gap_v,
                    "gap_d1": p.gap_d1,
                    "gap_d2": p.gap_d2,
                    "requires_c2": p.requires_c2,
                    "passes": p.passes(),
                })).collect::<Vec<_>>(),
                "curves_path": csv_path,
            });
            io::write_json(out, &header, &body)?;
            say(format!(
                "verdict {}: max (L-q)V = {:.3e} at {:.4}, max g - V' = {:.3e} at {:.4}, tol {:.3e}",
                if rep.verdict { "pass" } else { "fail" },
                rep.max_violation_gen,
                rep.argmax_gen,
                rep.max_violation_grad,
                rep.argmax_grad,
                rep.tol
            ));
            if !rep.verdict {
                return Err(CliError::VerifyFailed);
            }
        }
        Command::Simulate {
            inputs,
            barriers,
            x0,
            paths,
            dt,
            max_dt,
            horizon,
            seed,
            antithetic,
            bridge,
            out,
            trace,
            trace_out,
        } => {
            let l = load(inputs)?;
            let bset = barrier_set(barriers)?;
            let cfg = SimConfig {
                n_paths: *paths,
                dt: *dt,
                horizon: *horizon,
                seed: *seed,
                x0: *x0,
                antithetic: *antithetic,
                bridge: *bridge,
                max_dt: max_dt.unwrap_or(SimConfig::default().max_dt.max(*dt)),
            };
            let header = Header::new(
                "simulate",
                with_options(l.echo, json!({"barriers": bset.levels(), "sim": cfg})),
            );
            let est = mc::simulate_value(&l.model, &l.reward, &bset, &cfg)?;
            if let Some(n) = trace {
                let path = trace_out.clone().unwrap_or_else(|| csv_sibling(out));
                let rows: Vec<Vec<Cell>> = mc::simulate_paths(&l.model, &l.reward, &bset, &cfg, *n)?
                    .iter()
                    .map(|r| vec![r.path.into(), r.t.into(), r.x.into(), r.l.into(), r.regime.into(), r.reward.into()])
                    .collect();
                io::write_csv(&path, &header, &["path", "t", "X", "L", "regime", "reward"], &rows)?;
            }
            io::write_json(out, &header, &est)?;
            say(format!(
                "V({x0}) ~ {:.6} +/- {:.6} ({} of {} paths ruined)",
                est.mean, est.stderr, est.n_ruined, est.n_paths
            ));
        }
        Command::Sweep { inputs, barriers, v, z, upper, out, curve } => {
            let l = load(inputs)?;
            let bset = barrier_set(barriers)?;
            let vs = io::parse_range(v).map_err(CliError::Input)?;
            let zs = io::parse_range(z).map_err(CliError::Input)?;
            let header = Header::new(
                "sweep",
                with_options(l.echo, json!({"barriers": bset.levels(), "v": v, "z": z, "upper": upper})),
            );
            let mut rows = Vec::new();
            for &vv in &vs {
                for &zz in &zs {
                    if zz > vv {
                        let (f, df) = f_surface(&l.sf, &l.reward, &bset, vv, zz)?;
                        rows.push(vec![vv.into(), zz.into(), f.into(), df.into()]);
                    }
                }
            }
            io::write_csv(out, &header, &["v", "z", "F", "dFdz"], &rows)?;
            if let Some(path) = curve {
                let u = upper.unwrap_or_else(|| default_upper(&l.sf));
                let opts = SolveOptions::default();
                let mut crows = Vec::new();
                for &vv in &vs {
                    let (zv, f) = z_of_v(&l.sf, &l.reward, &bset, vv, u, &opts)?;
                    crows.push(vec![vv.into(), zv.into(), f.into()]);
                }
                io::write_csv(path, &header, &["v", "z_of_v", "F"], &crows)?;
            }
            say(format!("wrote {} surface points to {}", rows.len(), out.display()));
        }
    }
    Ok(())
}
