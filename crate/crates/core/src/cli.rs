//! Command-line front end: `verify`, `sweep`, `asymptote`, `lower-bound`, `collide`.
//!
//! Exit codes: 0 success, 1 failed check or runtime error, 2 usage error.
//! Flags override values read from `--config`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::{
    ansatz_energy, ell_leading, energy_leading, lower_bound, AsymptoticModel, EnergyCurve,
    EnergyPoint,
};
use crate::collision::{classify, integrate_collision, CollisionSetup, MassModel};
use crate::config::{
    parse_config, BottomKind, PreconditionerKind, ProfileConfig, RunConfig, SolverConfig,
};
use crate::error::{Error, Result};
use crate::geometry::{strip_length, StripLength, StripMap};
use crate::mesh::build_domain_with_width;
use crate::report::{write_report, ReportFormat, SweepReport};
use crate::solver::{manufactured_case, solve_domain};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "cusplab",
    version,
    about = "Dirichlet energy of thin-gap potential flow near a cusp contact"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Manufactured-solution convergence and geometry invariants.
    Verify {
        /// Coarsest element count per side.
        #[arg(long, default_value_t = 16)]
        n: usize,
        /// Number of mesh levels (each halves h).
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// FEM energy sweep over ε with a fitted leading law.
    Sweep(RunArgs),
    /// Closed-form strip length and energy tables.
    Asymptote(RunArgs),
    /// Closed-form lower bound per ε.
    LowerBound(RunArgs),
    /// Gap trajectory under the added mass of the configured profile.
    Collide(CollideArgs),
}

#[derive(Debug, Args, Clone, Default)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    /// Selects the flat-band bottom.
    #[arg(long, allow_hyphen_values = true)]
    delta_prime: Option<f64>,
    /// Comma-separated, strictly decreasing.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Elements across the strip.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    grading: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    truncation: Option<f64>,
    #[arg(long)]
    d_width: Option<f64>,
    #[arg(long, value_parser = parse_preconditioner)]
    preconditioner: Option<PreconditionerKind>,
    /// Output directory for report files.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
struct CollideArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    m_s: Option<f64>,
    #[arg(long)]
    rho_f: Option<f64>,
    #[arg(long)]
    eps_star: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    v0: Option<f64>,
    #[arg(long)]
    eps_stop: Option<f64>,
    #[arg(long)]
    rtol: Option<f64>,
    /// Energy limit for a bounded law; solved by FEM at the smallest sweep ε when absent.
    #[arg(long)]
    bounded_limit: Option<f64>,
}

fn parse_preconditioner(s: &str) -> std::result::Result<PreconditionerKind, String> {
    match s {
        "none" => Ok(PreconditionerKind::None),
        "jacobi" => Ok(PreconditionerKind::Jacobi),
        "column_line" | "column-line" => Ok(PreconditionerKind::ColumnLine),
        other => Err(format!(
            "unknown preconditioner {other:?} (none, jacobi, column_line)"
        )),
    }
}

impl RunArgs {
    /// File values (if any) overridden by flags, then validated.
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => parse_config(path)?,
            None => {
                let (Some(kappa), Some(alpha)) = (self.kappa, self.alpha) else {
                    return Err(Error::Config {
                        line: None,
                        message: "--alpha and --kappa are required without --config".into(),
                    });
                };
                RunConfig::with_profile(kappa, alpha)
            }
        };
        let p = &mut cfg.profile;
        set(&mut p.alpha, self.alpha);
        set(&mut p.kappa, self.kappa);
        set(&mut p.delta, self.delta);
        if let Some(dp) = self.delta_prime {
            p.bottom = BottomKind::Flat;
            p.delta_prime = Some(dp);
        }
        let s = &mut cfg.solver;
        set(&mut s.n_across, self.n);
        set(&mut s.grading, self.grading);
        set(&mut s.tol, self.tol);
        set(&mut s.d_width, self.d_width);
        set(&mut s.preconditioner, self.preconditioner);
        if self.truncation.is_some() {
            s.truncation = self.truncation;
        }
        if let Some(e) = &self.eps {
            cfg.sweep.epsilons = e.clone();
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.to_string_lossy().into_owned();
        }
        cfg.validate(None)?;
        Ok(cfg)
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

/// FEM energies at each `ε`, solved in parallel; `epsilons` strictly decreasing.
pub fn energy_sweep(
    profile: &ProfileConfig,
    solver: &SolverConfig,
    epsilons: &[f64],
) -> Result<EnergyCurve> {
    let disc = solver.discretization();
    let points = epsilons
        .par_iter()
        .map(|&e| -> Result<EnergyPoint> {
            let prof = profile.profile(e)?;
            let domain = build_domain_with_width(&prof, solver.truncation, solver.d_width)?;
            let s = solve_domain(&domain, &disc)?;
            Ok(EnergyPoint {
                epsilon: e,
                energy: s.solution.dirichlet_energy,
                iterations: s.solution.iterations,
                residual: s.solution.residual_norm,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EnergyCurve::new(points)
}

/// Parse `argv` (program name first) and run; output goes to `out`, diagnostics to `err`.
pub fn run_command_to<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if code == EXIT_OK {
                write!(out, "{}", e.render())
            } else {
                write!(err, "{}", e.render())
            };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_FAILED,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::Config { .. } => EXIT_USAGE,
                _ => EXIT_FAILED,
            }
        }
    }
}

pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_command_to(argv, &mut stdout.lock(), &mut stderr.lock())
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn out_err(e: std::io::Error) -> Error {
    Error::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    }
}

/// `Ok(true)` when every check passed.
fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<bool> {
    match cmd {
        Command::Verify { n, levels } => verify(n, levels, out),
        Command::Sweep(args) => sweep(&args.resolve()?, out),
        Command::Asymptote(args) => asymptote(&args.resolve()?, out),
        Command::LowerBound(args) => lower_bound_table(&args.resolve()?, out),
        Command::Collide(args) => collide(&args, out),
    }
}

fn verify(n: usize, levels: usize, out: &mut dyn Write) -> Result<bool> {
    if n < 2 || levels < 2 {
        return Err(Error::Config {
            line: None,
            message: "verify needs --n ≥ 2 and --levels ≥ 2".into(),
        });
    }
    let rep = manufactured_case(n, levels)?;
    writeln!(
        out,
        "manufactured solution, exact energy {:.12}",
        rep.exact_energy
    )
    .map_err(out_err)?;
    writeln!(
        out,
        "{:>6} {:>18} {:>12} {:>12} {:>6}",
        "n", "energy", "energy_err", "nodal_err", "iters"
    )
    .map_err(out_err)?;
    for l in &rep.levels {
        writeln!(
            out,
            "{:>6} {:>18.12} {:>12.4e} {:>12.4e} {:>6}",
            l.n, l.energy, l.energy_error, l.nodal_max_error, l.iterations
        )
        .map_err(out_err)?;
    }
    let mut ok = true;
    for (i, r) in rep.energy_ratios.iter().enumerate() {
        let pass = (3.5..=4.5).contains(r);
        ok &= pass;
        writeln!(
            out,
            "energy error ratio {}: {r:.4} {}",
            i + 1,
            if pass { "PASS" } else { "FAIL" }
        )
        .map_err(out_err)?;
    }

    // Invariants on a representative profile.
    let prof = crate::geometry::CuspProfile::power(1.0, 3.0, 1e-4, -1.0)?;
    let map = StripMap::new(&prof)?;
    let mut round_trip = 0.0f64;
    let mut det = 0.0f64;
    for k in 1..1000 {
        let xi = -(k as f64 / 1000.0);
        let x = map.forward(xi)?;
        round_trip = round_trip.max((map.inverse(x)? - xi).abs());
        let a = map.coefficient_matrix([x, (k % 97) as f64 / 96.0])?;
        det = det.max((a.det() - 1.0).abs());
    }
    let ell = map.ell().finite().unwrap_or(f64::INFINITY);
    let flux = crate::quadrature::integrate_with_breakpoints(
        |x| map.strip_flux(x).unwrap_or(f64::NAN),
        &[0.0, 1.0, 10.0, 100.0, ell],
        crate::quadrature::QuadOptions::rel(1e-12),
    )?
    .value;
    let checks = [
        ("map round trip", round_trip, 1e-10),
        ("det A - 1", det, 1e-12),
        (
            "boundary data integral - |delta|",
            (flux - 1.0).abs(),
            1e-10,
        ),
    ];
    for (name, v, tol) in checks {
        let pass = v <= tol;
        ok &= pass;
        writeln!(
            out,
            "{name}: {v:.3e} (≤ {tol:e}) {}",
            if pass { "PASS" } else { "FAIL" }
        )
        .map_err(out_err)?;
    }
    Ok(ok)
}

fn sweep(cfg: &RunConfig, out: &mut dyn Write) -> Result<bool> {
    let curve = energy_sweep(&cfg.profile, &cfg.solver, &cfg.sweep.epsilons)?;
    let report = SweepReport::evaluate(&cfg.profile, curve, &cfg.acceptance)?;
    let dir = PathBuf::from(&cfg.output_dir);
    let paths = write_report(
        &report,
        &[
            ReportFormat::Csv,
            ReportFormat::Json,
            ReportFormat::GnuplotData,
        ],
        &dir,
        "sweep",
    )?;
    report.write(ReportFormat::Csv, &mut *out)?;
    if let Some(f) = &report.fit {
        writeln!(
            out,
            "fit {:?}: slope {:.6} coefficient {:.6} rms {:.3e}",
            f.family, f.slope, f.coefficient, f.rms_residual
        )
        .map_err(out_err)?;
    }
    for c in &report.checks {
        writeln!(
            out,
            "check {}: {:.6} in [{}, {}] {}",
            c.name,
            c.value,
            c.lo,
            c.hi,
            if c.pass { "PASS" } else { "FAIL" }
        )
        .map_err(out_err)?;
    }
    for p in paths {
        writeln!(out, "wrote {}", p.display()).map_err(out_err)?;
    }
    Ok(report.passed())
}

fn asymptote(cfg: &RunConfig, out: &mut dyn Write) -> Result<bool> {
    writeln!(
        out,
        "epsilon,ell,ell_leading,ell_ratio,energy_leading,ansatz_energy"
    )
    .map_err(out_err)?;
    for &e in &cfg.sweep.epsilons {
        let prof = cfg.profile.profile(e)?;
        let ell = match strip_length(&prof)? {
            StripLength::Finite(l) => l,
            StripLength::Infinite => f64::INFINITY,
        };
        let lead = if prof.is_flat() {
            f64::NAN
        } else {
            ell_leading(&prof)?
        };
        let law = energy_leading(&prof)?.value(e).unwrap_or(f64::NAN);
        let ans = ansatz_energy(&prof, 1e-10)?.total;
        writeln!(
            out,
            "{e:.6e},{ell:.10e},{lead:.10e},{:.8},{law:.10e},{ans:.10e}",
            ell / lead
        )
        .map_err(out_err)?;
    }
    Ok(true)
}

fn lower_bound_table(cfg: &RunConfig, out: &mut dyn Write) -> Result<bool> {
    writeln!(out, "epsilon,zeta1,zeta1_prime,value,leading_term,ratio").map_err(out_err)?;
    for &e in &cfg.sweep.epsilons {
        let r = lower_bound(&cfg.profile.profile(e)?)?;
        writeln!(
            out,
            "{e:.6e},{:.10e},{:.10e},{:.10e},{:.10e},{:.8}",
            r.zeta1,
            r.zeta1_prime,
            r.value,
            r.leading_term,
            r.value / r.leading_term
        )
        .map_err(out_err)?;
    }
    Ok(true)
}

#[derive(Serialize)]
struct CollideSummary<'a> {
    regime: &'a str,
    predicted: &'a str,
    model: AsymptoticModel,
    touchdown_time: Option<f64>,
    terminal_speed: Option<f64>,
    invariant_drift: f64,
    speed_monotone: bool,
    steps: usize,
    diagnostic: Option<&'a str>,
}

fn collide(args: &CollideArgs, out: &mut dyn Write) -> Result<bool> {
    let mut cfg = args.run.resolve()?;
    let c = &mut cfg.collide;
    set(&mut c.m_s, args.m_s);
    set(&mut c.rho_f, args.rho_f);
    set(&mut c.eps_star, args.eps_star);
    set(&mut c.v0, args.v0);
    set(&mut c.eps_stop, args.eps_stop);
    set(&mut c.rtol, args.rtol);
    if args.bounded_limit.is_some() {
        c.bounded_limit = args.bounded_limit;
    }
    cfg.validate(None)?;
    let c = &cfg.collide;

    let base = cfg.profile.profile(*cfg.sweep.epsilons.last().unwrap())?;
    let predicted = classify(&base)?;
    let mut model = energy_leading(&base)?;
    if let AsymptoticModel::Bounded { limit: None } = model {
        let limit = match c.bounded_limit {
            Some(l) => l,
            None => {
                let domain =
                    build_domain_with_width(&base, cfg.solver.truncation, cfg.solver.d_width)?;
                solve_domain(&domain, &cfg.solver.discretization())?
                    .solution
                    .dirichlet_energy
            }
        };
        model = AsymptoticModel::Bounded { limit: Some(limit) };
    }
    let setup = CollisionSetup::new(
        c.m_s,
        c.rho_f,
        c.eps_star,
        c.v0,
        MassModel::FromModel { model },
    )?;
    let traj = integrate_collision(&setup, c.eps_stop, c.rtol)?;

    let dir = PathBuf::from(&cfg.output_dir);
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let csv = dir.join("trajectory.csv");
    let file = std::fs::File::create(&csv).map_err(io_err(&csv))?;
    let mut w = std::io::BufWriter::new(file);
    traj.write_csv(&mut w).map_err(io_err(&csv))?;
    w.flush().map_err(io_err(&csv))?;

    let summary = CollideSummary {
        regime: traj.regime.name(),
        predicted: predicted.name(),
        model,
        touchdown_time: traj.touchdown.map(|t| t.time),
        terminal_speed: traj.touchdown.map(|t| t.speed),
        invariant_drift: traj.invariant_drift,
        speed_monotone: traj.speed_monotone,
        steps: traj.accepted_steps,
        diagnostic: traj.diagnostic.as_deref(),
    };
    let json = dir.join("collide.json");
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Io {
        path: json.clone(),
        source: e.into(),
    })?;
    std::fs::write(&json, text.as_bytes()).map_err(io_err(&json))?;
    writeln!(out, "{text}").map_err(out_err)?;
    writeln!(out, "regime {}", traj.regime.name()).map_err(out_err)?;
    writeln!(out, "wrote {}", csv.display()).map_err(out_err)?;
    Ok(traj.regime == predicted && traj.speed_monotone)
}
