//! `fraclap`: mesh generation, time-integration runs, manufactured-solution
//! convergence studies and spectrum evaluation.

mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fraclap::fem::build_dof_map;
use fraclap::mesh::{build_rectangle_mesh, Mesh};
use fraclap::mms::{self, DtMode, StudyParams};
use fraclap::nonlocal::FractionalParams;
use fraclap::spectrum::{self, Exponent};
use fraclap::timestepping::{write_diagnostics_csv, Integrator, Scheme, SchemeConfig, State};
use thiserror::Error;

use config::{Command, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Numerical(fraclap::Error),
}

impl From<fraclap::Error> for CliError {
    fn from(e: fraclap::Error) -> Self {
        match e {
            fraclap::Error::InvalidParameter(m) => CliError::Usage(m),
            e @ (fraclap::Error::Parse { .. } | fraclap::Error::MeshValidation(_)) => {
                CliError::Usage(e.to_string())
            }
            e => CliError::Numerical(e),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Numerical(e.into())
    }
}

#[derive(Parser)]
#[command(name = "fraclap", version, about = "Fractional-Laplacian closure Navier-Stokes solver")]
struct Cli {
    /// Flat key = value configuration file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    dump_config: bool,

    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Write the grid mesh of [0,1]² with its halo.
    Mesh(RunConfig),
    /// Integrate in time and write the energy diagnostics.
    Run(RunConfig),
    /// Convergence study against the manufactured solution.
    Mms(RunConfig),
    /// Tabulate the energy spectrum E(k).
    Spectrum(RunConfig),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ CliError::Usage(_)) => {
            eprintln!("error: {e}");
            eprintln!("try 'fraclap --help'");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (command, flags) = match cli.command {
        Sub::Mesh(c) => (Command::Mesh, c),
        Sub::Run(c) => (Command::Run, c),
        Sub::Mms(c) => (Command::Mms, c),
        Sub::Spectrum(c) => (Command::Spectrum, c),
    };
    let file = cli.config.as_deref().map(config::load).transpose()?;
    let cfg = config::resolve(command, file, flags)?;
    if cli.dump_config {
        print!("{}", config::dump(&cfg));
        return Ok(());
    }
    let threads = match cli.threads {
        Some(0) => return Err(CliError::Usage("--threads must be positive".into())),
        Some(t) => t,
        None => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    pool.install(|| match command {
        Command::Mesh => mesh(&cfg),
        Command::Run => run(&cfg),
        Command::Mms => mms(&cfg),
        Command::Spectrum => spectrum(&cfg),
    })
}

fn output(cfg: &RunConfig) -> Result<(BufWriter<File>, &Path), CliError> {
    let path = cfg.out.as_deref().expect("resolved");
    let f = File::create(path).map_err(|e| {
        CliError::Usage(format!("cannot create {}: {e}", path.display()))
    })?;
    Ok((BufWriter::new(f), path))
}

fn fractional(cfg: &RunConfig, lambda: f64) -> Result<FractionalParams, CliError> {
    let alpha = if cfg.alpha_third { 1.0 / 3.0 } else { cfg.alpha.expect("resolved") };
    let mut p = FractionalParams::new(alpha, cfg.gamma.expect("resolved"), lambda)?;
    p.pair_quadrature_degree = cfg.pair_quadrature_degree.expect("resolved");
    p.diagonal_refinement_levels = cfg.refinement_levels.expect("resolved");
    p.validate()?;
    Ok(p)
}

fn scheme(cfg: &RunConfig) -> Result<Scheme, CliError> {
    Ok(cfg.scheme.as_deref().expect("resolved").parse()?)
}

fn mesh(cfg: &RunConfig) -> Result<(), CliError> {
    let m = build_rectangle_mesh(cfg.n.expect("resolved"), cfg.lambda.expect("resolved"))?;
    let (mut w, path) = output(cfg)?;
    w.write_all(m.to_text().as_bytes())?;
    w.flush()?;
    eprintln!(
        "{}: {} vertices, {} triangles",
        path.display(),
        m.n_vertices(),
        m.n_triangles()
    );
    Ok(())
}

/// Divergence-free, vanishing on the boundary of the unit square.
fn vortex(x: f64, y: f64) -> [f64; 2] {
    use std::f64::consts::PI;
    let (sx, sy) = ((PI * x).sin(), (PI * y).sin());
    [
        sx * sx * (2.0 * PI * y).sin(),
        -(2.0 * PI * x).sin() * sy * sy,
    ]
}

fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let mesh = match (&cfg.mesh_file, cfg.n) {
        (Some(path), _) => Mesh::load(path)?,
        (None, Some(n)) => build_rectangle_mesh(n, cfg.lambda.expect("resolved"))?,
        (None, None) => unreachable!("resolve requires a mesh"),
    };
    let lambda = cfg.lambda.unwrap_or_else(|| mesh.halo_width());
    let dofmap = build_dof_map(&mesh)?;
    let frac = fractional(cfg, lambda)?;
    let (dt, t_final, nu) = (
        cfg.dt.expect("resolved"),
        cfg.t_final.expect("resolved"),
        cfg.nu.expect("resolved"),
    );
    let (sc, init): (SchemeConfig, Box<dyn Fn(f64, f64) -> [f64; 2]>) =
        match cfg.initial.as_deref().expect("resolved") {
            "vortex" => (
                SchemeConfig::new(scheme(cfg)?, dt, t_final, nu, frac),
                Box::new(vortex),
            ),
            "mms" => {
                let params = StudyParams {
                    scheme: scheme(cfg)?,
                    dt_mode: DtMode::EqH,
                    nu,
                    t_final,
                    fractional: frac,
                };
                let exact = mms::ExactSolution;
                (
                    mms::mms_config(&params, dt),
                    Box::new(move |x, y| exact.velocity(x, y, 0.0)),
                )
            }
            other => {
                return Err(CliError::Usage(format!(
                    "unknown initial data '{other}' (expected vortex or mms)"
                )))
            }
        };
    sc.validate()?;
    sc.n_steps()?;
    let (mut w, path) = output(cfg)?;
    let initial = State::from_fn(init, 0.0, &dofmap, &sc)?;
    let mut integ = Integrator::new(sc, &mesh, &dofmap)?;
    let tr = integ.run_with(initial, |_, _| {})?;
    write_diagnostics_csv(&mut w, &tr.diagnostics)?;
    w.flush()?;
    let last = tr.diagnostics.last().expect("initial row");
    eprintln!(
        "{}: {} steps, final kinetic energy {:.6e}",
        path.display(),
        last.step,
        last.kinetic
    );
    Ok(())
}

fn mms(cfg: &RunConfig) -> Result<(), CliError> {
    let ns = config::parse_sizes(cfg.h.as_deref().expect("resolved"))?;
    let params = StudyParams {
        scheme: scheme(cfg)?,
        dt_mode: cfg.dt_mode.as_deref().expect("resolved").parse()?,
        nu: cfg.nu.expect("resolved"),
        t_final: cfg.t_final.expect("resolved"),
        fractional: fractional(cfg, cfg.lambda.expect("resolved"))?,
    };
    let (mut w, path) = output(cfg)?;
    let report = mms::convergence_study(&ns, &params, |row| {
        let [u1, u2, p] = row.errors;
        eprintln!(
            "h = {:.5}: u1 H1 {:.4e}, u2 H1 {:.4e}, p L2 {:.4e}",
            row.h, u1.h1, u2.h1, p.l2
        );
    })?;
    report.write_csv(&mut w)?;
    w.flush()?;
    eprintln!("{}: {} levels", path.display(), ns.len());
    Ok(())
}

fn spectrum(cfg: &RunConfig) -> Result<(), CliError> {
    let exponent = if cfg.alpha_third {
        Exponent::OneThird
    } else {
        Exponent::General(cfg.alpha.expect("resolved"))
    };
    let p = spectrum::make_params(
        exponent,
        cfg.gamma.expect("resolved"),
        cfg.nu.expect("resolved"),
        cfg.u_scale.expect("resolved"),
        cfg.ck.expect("resolved"),
    )?;
    let ks = spectrum::log_grid(
        cfg.kmin.expect("resolved"),
        cfg.kmax.expect("resolved"),
        cfg.points.expect("resolved"),
    )?;
    let (mut w, path) = output(cfg)?;
    spectrum::write_spectrum_csv(&mut w, &ks, &p)?;
    w.flush()?;
    eprintln!("{}: {} wavenumbers", path.display(), ks.len());
    Ok(())
}
