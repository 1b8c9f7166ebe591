#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use serde_json::json;

use epsh::background::{default_depth, reference_alpha};
use epsh::config::RunConfig;
use epsh::diagnostics::{read_ndjson, render_plot_script, render_summary, NdjsonSink};
use epsh::error::{Error, Result};
use epsh::evolve::{StateSink, Trajectory};
use epsh::halfline::{profile_residuals, solve_stationary_halfline, Sagdeev};
use epsh::io::{read_checkpoint, write_checkpoint, write_fields_csv, write_profile_csv};
use epsh::limit::{compute_stationary, fit_lambda, translation_cauchy_check, StationaryConfig};
use epsh::matrices::{matrix_margins, wall_normal, PointState};
use epsh::{FieldState, Grid, PlasmaParams};

#[derive(Parser)]
#[command(name = "epsh", version, about = "Plasma sheath solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "./out")]
    out: PathBuf,
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Half-line stationary profile as CSV plus a JSON summary.
    Stationary1d(Common),
    /// Time evolution with an NDJSON diagnostic log.
    Evolve {
        #[command(flatten)]
        common: Common,
        /// Write a checkpoint every N steps.
        #[arg(long)]
        checkpoint_every: Option<usize>,
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Stationary solution as the long-time limit of the evolution.
    Stationary {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        t_star: Option<f64>,
        #[arg(long)]
        max_time: Option<f64>,
    },
    /// Random parameter sweep of the Bohm margin and related signs.
    BohmScan {
        #[arg(long, default_value = "./out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long)]
        quiet: bool,
    },
    /// Positivity margins of the coefficient matrices.
    CheckMatrices(Common),
    /// Summary and plotting script for an NDJSON run log.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "./out")]
        out: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
}

fn prepare(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn say(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        println!("{}", msg.as_ref());
    }
}

fn params_json(p: &PlasmaParams) -> serde_json::Value {
    json!({
        "m": p.m(), "R": p.r(), "gamma": p.gamma(),
        "u_plus": p.u_plus(), "theta_plus": p.theta_plus(), "phi_b": p.phi_b(),
    })
}

fn stationary1d(c: &Common) -> Result<()> {
    let cfg = RunConfig::load(&c.config)?;
    prepare(&c.out)?;
    let alpha = reference_alpha(&cfg.params)?;
    let l1 = cfg.l1.unwrap_or_else(|| default_depth(alpha));
    let prof = solve_stationary_halfline(&cfg.params, l1, cfg.n1)?;
    let res = profile_residuals(&prof, &cfg.params);
    write_profile_csv(&prof, &c.out.join("profile.csv"))?;
    write_json(
        &c.out.join("profile.json"),
        &json!({
            "params": params_json(&cfg.params),
            "L1": l1,
            "n1": cfg.n1,
            "alpha_fit": prof.alpha_fit,
            "alpha_linear": Sagdeev::new(&cfg.params)?.curvature_at_zero().sqrt(),
            "residuals": {
                "mass": res.mass, "momentum": res.momentum,
                "energy": res.energy, "poisson": res.poisson,
            },
        }),
    )?;
    say(c.quiet, format!("alpha_fit = {:.6}, residual = {:.3e}", prof.alpha_fit, res.max()));
    Ok(())
}

struct Checkpointer<'a> {
    every: Option<usize>,
    grid: &'a Grid,
    path: PathBuf,
}

impl StateSink for Checkpointer<'_> {
    fn after_step(&mut self, state: &FieldState, step: usize) -> Result<()> {
        match self.every {
            Some(n) if n > 0 && step.is_multiple_of(n) => write_checkpoint(state, step as u64, self.grid, &self.path),
            _ => Ok(()),
        }
    }
}

fn evolve(c: &Common, every: Option<usize>, resume: Option<&Path>) -> Result<()> {
    let cfg = RunConfig::load(&c.config)?;
    prepare(&c.out)?;
    let prob = cfg.problem()?;
    let mut ev = prob.evolver(cfg.evolve.clone())?;
    let log = c.out.join("run.ndjson");
    let (mut state, mut sink) = match resume {
        Some(path) => {
            let (st, step) = read_checkpoint(&prob.grid, path)?;
            ev.set_steps(step as usize);
            (st, NdjsonSink::append(&log)?)
        }
        None => (cfg.init.build(&prob)?, NdjsonSink::create(&log)?),
    };
    let mut ck = Checkpointer {
        every,
        grid: &prob.grid,
        path: c.out.join("checkpoint.bin"),
    };
    let summary = ev.evolve(&mut state, &mut sink, &mut ck)?;
    if every.is_some() {
        write_checkpoint(&state, summary.steps as u64, &prob.grid, &ck.path)?;
    }
    write_fields_csv(&state, &prob.background, &prob.grid, &c.out.join("final.csv"))?;
    write_json(
        &c.out.join("evolve.json"),
        &json!({
            "params": params_json(&prob.params),
            "alpha": prob.alpha(),
            "beta": prob.beta,
            "summary": summary,
        }),
    )?;
    say(
        c.quiet,
        format!(
            "t = {:.4} after {} steps ({:?}), |dPsi/dt|_0 = {:.3e}",
            summary.t, summary.steps, summary.stop, summary.rate_norm
        ),
    );
    Ok(())
}

fn stationary(c: &Common, tol: Option<f64>, t_star: Option<f64>, max_time: Option<f64>) -> Result<()> {
    let cfg = RunConfig::load(&c.config)?;
    prepare(&c.out)?;
    let prob = cfg.problem()?;
    let t_star = t_star.unwrap_or(cfg.t_star);
    if !(t_star > 0.0) {
        return Err(Error::Config("--t-star must be positive".into()));
    }
    let scfg = StationaryConfig {
        tol: tol.unwrap_or(cfg.stationary.tol),
        max_time: max_time.unwrap_or(cfg.stationary.max_time),
        evolve: epsh::evolve::EvolveConfig {
            sample_every: Some(t_star),
            ..cfg.evolve.clone()
        },
    };
    let mut sink = NdjsonSink::create(&c.out.join("run.ndjson"))?;
    let mut traj = Trajectory::default();
    let sol = compute_stationary(&prob, &scfg, &mut sink, &mut traj)?;
    let translation = translation_cauchy_check(&traj.samples, t_star, &prob.grid, prob.beta);
    let lambda = fit_lambda(&traj.samples, &sol.state);
    write_fields_csv(&sol.state, &prob.background, &prob.grid, &c.out.join("stationary.csv"))?;
    write_json(
        &c.out.join("stationary.json"),
        &json!({
            "params": params_json(&prob.params),
            "alpha": prob.alpha(),
            "beta": prob.beta,
            "solution": sol,
            "translation": translation.as_ref().map_err(|e| e.to_string()),
            "lambda": lambda.as_ref().map_err(|e| e.to_string()),
        }),
    )?;
    say(
        c.quiet,
        format!(
            "steady at t = {:.3} after {} steps; residual {:.3e}; sup|Psi_s| = {:.3e}",
            sol.t,
            sol.steps,
            sol.residual.max(),
            sol.state.sup_abs()
        ),
    );
    Ok(())
}

fn bohm_scan(out: &Path, seed: u64, samples: usize, quiet: bool) -> Result<()> {
    prepare(out)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut csv = String::from("m,R,gamma,u_plus,theta_plus,bohm_margin,w2,min_eig_neg_f1,outcome\n");
    let mut agree = 0;
    for _ in 0..samples {
        let m: f64 = rng.gen_range(0.5..2.0);
        let r = rng.gen_range(0.5..2.0);
        let gamma = rng.gen_range(1.05..3.0);
        let theta = rng.gen_range(0.2..2.0);
        let sonic = (gamma * r * theta / m).sqrt();
        let u = -sonic * rng.gen_range(1.01..2.5);
        let p = PlasmaParams::new(m, r, gamma, u, theta, 0.0)?;
        let w2 = Sagdeev::new(&p)?.curvature_at_zero();
        let mm = matrix_margins(&PointState::far_field(&p), wall_normal(0.0), &p, 1)?;
        let outcome = match p.with_phi_b(-0.05).and_then(|q| solve_stationary_halfline(&q, 20.0, 400)) {
            Ok(_) => "profile".to_string(),
            Err(Error::BohmViolated(_)) => "bohm-violated".to_string(),
            Err(Error::BranchExhausted { .. }) => "branch-exhausted".to_string(),
            Err(Error::NonMonotone(_)) => "non-monotone".to_string(),
            Err(_) => "failed".to_string(),
        };
        if p.bohm_margin().signum() == w2.signum() {
            agree += 1;
        }
        csv += &format!(
            "{m},{r},{gamma},{u},{theta},{},{w2},{},{outcome}\n",
            p.bohm_margin(),
            mm.neg_f1
        );
    }
    fs::write(out.join("bohm_scan.csv"), csv)?;
    say(quiet, format!("{agree}/{samples} samples: sign(bohm_margin) = sign(W''(0))"));
    Ok(())
}

fn check_matrices(c: &Common) -> Result<()> {
    let cfg = RunConfig::load(&c.config)?;
    let p = cfg.params;
    let dim = cfg.dim;
    let far = PointState::far_field(&p);
    let slope = cfg.boundary.max_abs_slope();
    let mm = matrix_margins(&far, wall_normal(slope), &p, dim)?;
    let w2 = Sagdeev::new(&p).map(|s| s.curvature_at_zero());
    say(c.quiet, format!("min-eig A0          {:.6e}", mm.a0));
    say(c.quiet, format!("min-eig F           {:.6e}", mm.f));
    say(c.quiet, format!("min-eig -F1         {:.6e}", mm.neg_f1));
    say(c.quiet, format!("min normal speed    {:.6e}", mm.normal_speed));
    say(c.quiet, format!("bohm margin         {:.6e}", p.bohm_margin()));
    if let Ok(w2) = w2 {
        say(c.quiet, format!("W''(0)              {:.6e}", w2));
    }
    let outflow = p.supersonic_outflow_margin(&cfg.boundary);
    say(c.quiet, format!("supersonic outflow  {:.6e}", outflow));
    if p.bohm_margin() <= 0.0 {
        return Err(Error::PositivityFailed(format!(
            "Bohm criterion violated: margin {:.6e}, W''(0) = {}",
            p.bohm_margin(),
            w2.map(|w| format!("{w:.6e}")).unwrap_or_else(|e| e.to_string())
        )));
    }
    for (name, v) in [("A0", mm.a0), ("F", mm.f), ("-F1", mm.neg_f1), ("normal speed", mm.normal_speed), ("outflow", outflow)] {
        if v <= 0.0 {
            return Err(Error::PositivityFailed(format!("{name} margin {v:.6e}")));
        }
    }
    Ok(())
}

fn report(input: &Path, out: &Path, quiet: bool) -> Result<()> {
    let records = read_ndjson(input)?;
    prepare(out)?;
    let summary = render_summary(&records);
    fs::write(out.join("summary.txt"), &summary)?;
    let name = input.file_name().and_then(|s| s.to_str()).unwrap_or("run.ndjson");
    fs::write(out.join("plot.gp"), render_plot_script(name))?;
    say(quiet, summary.trim_end());
    Ok(())
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("EPSH_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("EPSH_THREADS: cannot parse `{v}`")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("EPSH_THREADS: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match &cli.command {
        Command::Stationary1d(c) => stationary1d(c),
        Command::Evolve {
            common,
            checkpoint_every,
            resume,
        } => evolve(common, *checkpoint_every, resume.as_deref()),
        Command::Stationary {
            common,
            tol,
            t_star,
            max_time,
        } => stationary(common, *tol, *t_star, *max_time),
        Command::BohmScan {
            out,
            seed,
            samples,
            quiet,
        } => bohm_scan(out, *seed, *samples, *quiet),
        Command::CheckMatrices(c) => check_matrices(c),
        Command::Report { input, out, quiet } => report(input, out, *quiet),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("EPSH-ERR: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
