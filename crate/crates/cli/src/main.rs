//! `penfv` command-line driver: runs, convergence studies, verification and
//! reference generation from a TOML configuration.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use penfv::diagnostics::{balance_report, run_with_reports};
use penfv::experiments::{convergence_study, generate_reference, ReferenceTrajectory};
use penfv::fields::Field;
use penfv::geometry::FluidShape;
use penfv::io::{
    eoc_csv, eoc_text, parse_config, read_reference, write_reference, write_snapshot,
    DiagnosticsCsv, RunConfig,
};
use penfv::mesh::{split_domain, DomainMask, Grid};
use penfv::ops::check_ibp_identities;
use penfv::scheme::{
    advance_step, assemble_jacobian, finite_difference_jacobian, run_simulation, BoundaryData,
    State,
};
use penfv::Error;

#[derive(Parser, Debug)]
#[command(
    name = "penfv",
    version,
    about = "Penalized finite-volume Navier-Stokes-Fourier solver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: GlobalArgs,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Output directory; overrides `output_dir` from the configuration.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Random seed; overrides `seed` from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for assembly and linear algebra.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print nothing but errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Time-step one configuration, writing diagnostics and snapshots.
    Run { config: PathBuf },
    /// Convergence sweep against a fine-grid reference.
    Study {
        config: PathBuf,
        /// Reuse a reference written by `ref` instead of computing it.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Operator identities, Jacobian check and one-step balances.
    Verify { config: PathBuf },
    /// Compute and store the reference trajectory of a study.
    Ref { config: PathBuf },
}

/// Failure classes with their exit codes.
#[derive(Debug)]
enum Failure {
    Io(String),
    Config(String),
    Solver(String),
    Identity(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Solver(_) => 3,
            Failure::Identity(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Io(m) | Failure::Config(m) | Failure::Solver(m) | Failure::Identity(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Config(_)
            | Error::InvalidGrid(_)
            | Error::InvalidShape(_)
            | Error::InvalidParameter(_)
            | Error::Format { .. } => Failure::Config(msg),
            Error::Io { .. } => Failure::Io(msg),
            _ => Failure::Solver(msg),
        }
    }
}

type Outcome = Result<(), Failure>;

struct Ctx {
    quiet: bool,
    out: PathBuf,
}

impl Ctx {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn progress(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn load(path: &Path, global: &GlobalArgs) -> Result<(RunConfig, Ctx), Failure> {
    let mut cfg = parse_config(path).map_err(|e| match e {
        Error::Io { .. } => Failure::Config(e.to_string()),
        other => other.into(),
    })?;
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    let out = global
        .output_dir
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("penfv-output"));
    std::fs::create_dir_all(&out)
        .map_err(|e| Failure::Io(format!("cannot create {}: {e}", out.display())))?;
    std::fs::write(out.join("config.toml"), cfg.to_toml_string()).map_err(|e| {
        Failure::Io(format!(
            "cannot write {}: {e}",
            out.join("config.toml").display()
        ))
    })?;
    Ok((
        cfg,
        Ctx {
            quiet: global.quiet,
            out,
        },
    ))
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Io(format!("I/O error on {}: {e}", path.display()))
}

fn cmd_run(cfg: &RunConfig, ctx: &Ctx) -> Outcome {
    let grid = cfg.grid::<f64>()?;
    let problem = cfg.problem::<f64>()?;
    let mask = split_domain(&grid, problem.shape())?;
    let initial = problem.initial_state(&grid)?;
    let bdata = problem.boundary_data(&grid)?;
    let params = cfg.params::<f64>();
    let steps = cfg.steps()?;
    let diag = &cfg.diagnostics;
    let snapshot = |step: usize, s: &State<f64>| {
        write_snapshot(s, &mask, ctx.path(&format!("snapshot_{step:06}.vtk")))
    };
    snapshot(0, &initial)?;
    ctx.progress(format!(
        "run: d = {}, n = {}, {steps} steps of Δt = {:e}, ε = {:e}, {} fluid / {} solid cells",
        grid.dim(),
        grid.n(),
        params.dt,
        params.eps,
        mask.count_fluid(),
        mask.count_solid()
    ));
    let every = (steps / 10).max(1);
    let final_state;
    let mut identity_failures = Vec::new();
    if diag.ledgers {
        let csv_path = ctx.path("diagnostics.csv");
        let mut csv = if diag.csv {
            let f = std::fs::File::create(&csv_path).map_err(|e| io_failure(&csv_path, e))?;
            Some(
                DiagnosticsCsv::new(std::io::BufWriter::new(f))
                    .map_err(|e| io_failure(&csv_path, e))?,
            )
        } else {
            None
        };
        let tol = params.tol_newton;
        let report = run_with_reports(&initial, &params, &mask, &bdata, steps, |rec, rep| {
            if let Some(w) = csv.as_mut() {
                w.write(rep).map_err(|e| Error::Io {
                    path: csv_path.display().to_string(),
                    source: e,
                })?;
            }
            let mut failed = rep.failures(tol);
            if !rep.dissipation_nonnegative() {
                failed.push("dissipation sign");
            }
            if !failed.is_empty() {
                identity_failures.push(format!("step {}: {}", rec.step, failed.join(", ")));
            }
            if diag.snapshot_every > 0 && rec.step % diag.snapshot_every == 0 {
                snapshot(rec.step, rec.new)?;
            }
            if rec.step % every == 0 || rec.step == steps {
                ctx.progress(format!(
                    "step {}/{steps} t = {:.6} newton {} min ρ {:.4e} min θ {:.4e} res_E {:.2e}",
                    rec.step,
                    rep.t,
                    rep.newton_iters,
                    rep.min_rho,
                    rep.min_theta,
                    rep.energy.residual
                ));
            }
            Ok(())
        })?;
        if let Some(w) = csv {
            w.finish().map_err(|e| io_failure(&csv_path, e))?;
        }
        final_state = report.trajectory.final_state;
    } else {
        let traj = run_simulation(&initial, &params, &mask, &bdata, steps, |rec| {
            if diag.snapshot_every > 0 && rec.step % diag.snapshot_every == 0 {
                snapshot(rec.step, rec.new)?;
            }
            Ok(())
        })?;
        final_state = traj.final_state;
    }
    if diag.snapshot_every == 0 || steps % diag.snapshot_every != 0 {
        snapshot(steps, &final_state)?;
    }
    ctx.say(format!(
        "done: t = {:?}, mass {:?}, ρ ∈ [{:e}, {:e}], θ ∈ [{:e}, {:e}]",
        final_state.t,
        final_state.mass(),
        final_state.rho.min(),
        final_state.rho.max(),
        final_state.theta.min(),
        final_state.theta.max()
    ));
    if !identity_failures.is_empty() {
        let msg = format!(
            "balance identities violated at {} step(s): {}",
            identity_failures.len(),
            identity_failures[0]
        );
        if diag.fail_on_identity {
            return Err(Failure::Identity(msg));
        }
        ctx.progress(format!("warning: {msg}"));
    }
    Ok(())
}

/// Random positive state with velocities bounded away from zero, so that
/// finite differences do not straddle an upwind switch.
fn jacobian_probe(grid: &Grid<f64>, rng: &mut ChaCha8Rng) -> Result<State<f64>, Error> {
    let d = grid.dim();
    let nc = grid.num_cells();
    let mut draw = |n: usize, lo: f64, hi: f64| -> Vec<f64> {
        (0..n).map(|_| rng.random_range(lo..hi)).collect()
    };
    let rho = draw(nc, 0.5, 1.5);
    let u = draw(d * nc, 0.2, 0.6);
    let theta = draw(nc, 0.5, 1.5);
    State::new(
        Field::from_vec(grid, 1, rho)?,
        Field::from_vec(grid, d, u)?,
        Field::from_vec(grid, 1, theta)?,
        0.0,
    )
}

fn cmd_verify(cfg: &RunConfig, ctx: &Ctx) -> Outcome {
    let mut failures = Vec::new();
    let mut grids = vec![];
    for dim in [2, 3] {
        for n in [4, 8, 16] {
            grids.push((dim, n));
        }
    }
    if !grids.contains(&(cfg.grid.dim, cfg.grid.n)) {
        grids.push((cfg.grid.dim, cfg.grid.n));
    }
    for (dim, n) in grids {
        let g = Grid::<f64>::new(dim, n, cfg.grid.length)?;
        let r = check_ibp_identities(&g, cfg.seed);
        let ok = r.passed(1e-12);
        ctx.say(format!(
            "ibp d={dim} n={n}: max relative residual {:.3e} {}",
            r.max_rel_residual(),
            if ok { "ok" } else { "FAIL" }
        ));
        if !ok {
            failures.push(format!("integration by parts on d={dim} n={n}"));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let g = Grid::<f64>::new(cfg.grid.dim, 4, cfg.grid.length)?;
    let mut params = cfg.params::<f64>();
    params.eps = params.eps.max(1e-2);
    let bdata = BoundaryData::constant(&g, 1.0, 1.0)?;
    let solid = split_domain(&g, &FluidShape::empty(g.dim()))?;
    for (label, mask) in [
        ("fluid", DomainMask::all_fluid(g.num_cells())),
        ("solid", solid),
    ] {
        let new = jacobian_probe(&g, &mut rng)?;
        let old = jacobian_probe(&g, &mut rng)?;
        let a = assemble_jacobian(&new, &params, &mask).to_dense();
        let f = finite_difference_jacobian(&new, &old, &params, &mask, &bdata, 1e-7);
        let scale = f.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = a
            .iter()
            .flatten()
            .zip(f.iter().flatten())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        let rel = err / scale.max(f64::MIN_POSITIVE);
        let ok = rel <= 1e-5;
        ctx.say(format!(
            "jacobian n=4 {label}: relative deviation from finite differences {rel:.3e} {}",
            if ok { "ok" } else { "FAIL" }
        ));
        if !ok {
            failures.push(format!("Jacobian ({label})"));
        }
    }

    let grid = cfg.grid::<f64>()?;
    let problem = cfg.problem::<f64>()?;
    let mask = split_domain(&grid, problem.shape())?;
    let initial = problem.initial_state(&grid)?;
    let bdata = problem.boundary_data(&grid)?;
    let params = cfg.params::<f64>();
    let (new, stats) = advance_step(&initial, &params, &mask, &bdata)?;
    let bnew = bdata.at_time(new.t);
    let rep = balance_report(
        1,
        stats.iterations,
        &new,
        &initial,
        &params,
        &mask,
        &bnew,
        &bdata,
    )?;
    let tol = params.tol_newton;
    let lines = [
        (
            "energy",
            rep.energy.residual,
            rep.energy.scale,
            rep.energy.passed(tol),
        ),
        (
            "entropy φ=1",
            rep.entropy_unit.residual,
            rep.entropy_unit.scale,
            rep.entropy_unit.passed(tol),
        ),
        (
            "entropy φ=θ_B",
            rep.entropy_boundary.residual,
            rep.entropy_boundary.scale,
            rep.entropy_boundary.passed(tol),
        ),
        (
            "ballistic",
            rep.ballistic.residual,
            rep.ballistic.scale,
            rep.ballistic.passed(tol),
        ),
        (
            "continuity ρ²",
            rep.renormalized[0].residual,
            rep.renormalized[0].scale,
            rep.renormalized[0].passed(tol),
        ),
        (
            "continuity ρlogρ",
            rep.renormalized[1].residual,
            rep.renormalized[1].scale,
            rep.renormalized[1].passed(tol),
        ),
    ];
    for (name, res, scale, ok) in lines {
        ctx.say(format!(
            "balance {name}: residual {res:.3e} scale {scale:.3e} {}",
            if ok { "ok" } else { "FAIL" }
        ));
        if !ok {
            failures.push(format!("{name} balance"));
        }
    }
    let signs = rep.dissipation_nonnegative();
    ctx.say(format!(
        "dissipation signs: {}",
        if signs { "ok" } else { "FAIL" }
    ));
    if !signs {
        failures.push("dissipation sign".into());
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Identity(format!(
            "verification failed: {}",
            failures.join(", ")
        )))
    }
}

fn reference(cfg: &RunConfig, ctx: &Ctx) -> Result<ReferenceTrajectory<f64>, Failure> {
    let spec = cfg.sweep::<f64>();
    let problem = cfg.problem::<f64>()?;
    ctx.progress(format!(
        "reference: n = {}, {} steps",
        spec.n_ref,
        spec.steps_for(spec.n_ref)?
    ));
    let r = generate_reference(&spec, &problem, |step, total| {
        if step % (total / 10).max(1) == 0 {
            ctx.progress(format!("reference step {step}/{total}"));
        }
    })?;
    let path = ctx.path("reference.bin");
    write_reference(&r, &path)?;
    ctx.say(format!("reference written to {}", path.display()));
    Ok(r)
}

fn cmd_ref(cfg: &RunConfig, ctx: &Ctx) -> Outcome {
    cfg.validate_study()?;
    reference(cfg, ctx).map(|_| ())
}

fn cmd_study(cfg: &RunConfig, ctx: &Ctx, stored: Option<&Path>) -> Outcome {
    cfg.validate_study()?;
    let r = match stored {
        Some(p) => read_reference(p)?,
        None => reference(cfg, ctx)?,
    };
    let spec = cfg.sweep::<f64>();
    let problem = cfg.problem::<f64>()?;
    let table = convergence_study(&spec, &problem, &r, |row| {
        ctx.progress(format!(
            "n = {} {}",
            row.n,
            row.failure.as_deref().unwrap_or("done")
        ));
    })?;
    for (name, text) in [("eoc.csv", eoc_csv(&table)), ("eoc.txt", eoc_text(&table))] {
        let p = ctx.path(name);
        std::fs::write(&p, text).map_err(|e| io_failure(&p, e))?;
    }
    ctx.say(eoc_text(&table));
    let trend = table.penalty_trend();
    ctx.say(format!(
        "penalty ratios {:?}, solid velocity decreasing: {}",
        trend.ratios, trend.velocity_decreasing
    ));
    if table.all_succeeded() {
        Ok(())
    } else {
        Err(Failure::Solver(
            "at least one study resolution failed".into(),
        ))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
        {
            eprintln!("error: cannot set up {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = (|| {
        let (config, ctx) = match &cli.command {
            Command::Run { config } | Command::Verify { config } | Command::Ref { config } => {
                load(config, &cli.global)?
            }
            Command::Study { config, .. } => load(config, &cli.global)?,
        };
        match &cli.command {
            Command::Run { .. } => cmd_run(&config, &ctx),
            Command::Study { reference, .. } => cmd_study(&config, &ctx, reference.as_deref()),
            Command::Verify { .. } => cmd_verify(&config, &ctx),
            Command::Ref { .. } => cmd_ref(&config, &ctx),
        }
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
