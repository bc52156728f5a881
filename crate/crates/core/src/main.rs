use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use rainbow::config::{ConfigError, ConfigFile, Resolver};
use rainbow::engineer::{gap_sweep, run_channel_iteration, ChannelBuilder, ChannelGeometry, DEFAULT_PERIOD};
use rainbow::lattice::LatticeGeometry;
use rainbow::linalg::ArnoldiOptions;
use rainbow::output::{json_f64, render_json, write_text, Cell, CsvTable};
use rainbow::quantum::BlochState;
use rainbow::teleport::{haar_average_fidelity, run_teleport, TeleportConfig};
use rainbow::trajectories::{run_ensemble, TrajectoryConfig, DEFAULT_FIDELITY_TARGET, DEFAULT_MAX_STEPS};
use rainbow::xy::{eig_energy, verify_eigenstate, EigVariant, EvolveOptions, XYHamiltonian, DEFAULT_JX, DEFAULT_JY};

#[derive(Parser)]
#[command(name = "rainbow", version, about = "Rainbow-state teleportation and state-engineering experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check that the four rainbow states are eigenstates of H.
    VerifyEig {
        #[command(flatten)]
        common: Common,
        /// Largest residual accepted before exiting with status 1.
        #[arg(long)]
        residual_tol: Option<f64>,
    },
    /// Teleportation fidelity and post-selection probability versus time.
    Teleport {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        e_pairs: Option<usize>,
        #[arg(long)]
        t_max: Option<f64>,
        /// Number of time intervals in [0, t_max].
        #[arg(long)]
        t_steps: Option<usize>,
        #[arg(long)]
        bloch_theta: Option<f64>,
        #[arg(long)]
        bloch_phi: Option<f64>,
        /// Average over this many Haar-random input states instead of one Bloch state.
        #[arg(long)]
        haar_samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// IZ, ZI, XY or YX.
        #[arg(long)]
        variant: Option<String>,
    },
    /// Channel gap on a grid of measurement periods.
    EngineerGap {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        t_min: Option<f64>,
        #[arg(long)]
        t_max: Option<f64>,
        /// Number of grid points.
        #[arg(long)]
        t_steps: Option<usize>,
        #[arg(long)]
        central_row: Option<usize>,
        #[arg(long)]
        arnoldi_krylov_dim: Option<usize>,
        #[arg(long)]
        arnoldi_tol: Option<f64>,
        #[arg(long)]
        arnoldi_max_restarts: Option<usize>,
    },
    /// Exact iteration of the channel from |0...0>.
    EngineerIterate {
        #[command(flatten)]
        common: Common,
        #[arg(long = "T")]
        period: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        /// Keep only the 00 and 11 outcomes and renormalise.
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        post_select: Option<bool>,
        #[arg(long)]
        central_row: Option<usize>,
    },
    /// Monte Carlo trajectories of the feedback protocol.
    Trajectories {
        #[command(flatten)]
        common: Common,
        #[arg(long = "T")]
        period: Option<f64>,
        #[arg(long)]
        n_traj: Option<usize>,
        #[arg(long)]
        fidelity_target: Option<f64>,
        #[arg(long)]
        max_steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        central_row: Option<usize>,
        /// JSON summary path (default: the CSV path with a .json extension,
        /// or stderr without --out).
        #[arg(long)]
        summary: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Flat key = value config file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    lx: Option<usize>,
    #[arg(long)]
    ly: Option<usize>,
    #[arg(long)]
    jx: Option<f64>,
    #[arg(long)]
    jy: Option<f64>,
    #[arg(long)]
    evolve_tol: Option<f64>,
    #[arg(long)]
    krylov_dim: Option<usize>,
    #[arg(long)]
    dense_max_sites: Option<usize>,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

enum AppError {
    Config(ConfigError),
    Sim(rainbow::Error),
    Io(std::io::Error),
    Check(String),
}

impl From<ConfigError> for AppError {
    fn from(e: ConfigError) -> Self {
        AppError::Config(e)
    }
}

impl From<rainbow::Error> for AppError {
    fn from(e: rainbow::Error) -> Self {
        AppError::Sim(e)
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Io(e)
    }
}

impl AppError {
    fn report(&self) -> (String, u8) {
        use rainbow::Error as E;
        match self {
            AppError::Config(e) => (format!("config error: {e}"), 2),
            AppError::Sim(e @ (E::NoConvergence { .. } | E::Linalg(_) | E::NotUnitary(_))) => {
                (format!("numerical failure: {e}"), 1)
            }
            AppError::Sim(e) => (format!("invalid input: {e}"), 2),
            AppError::Io(e) => (format!("output error: {e}"), 1),
            AppError::Check(m) => (m.clone(), 1),
        }
    }
}

type AppResult<T> = Result<T, AppError>;

/// Settings shared by every subcommand.
struct Base {
    resolver: Resolver,
    geometry: LatticeGeometry,
    jx: f64,
    jy: f64,
    evolve: EvolveOptions,
    out: Option<PathBuf>,
}

fn base(command: &str, c: &Common) -> AppResult<Base> {
    let file = match &c.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let mut r = Resolver::new(file);
    r.note("command", command);
    let lx = r.require("lx", c.lx)?;
    let ly = r.require("ly", c.ly)?;
    let jx = r.get("jx", c.jx, DEFAULT_JX)?;
    let jy = r.get("jy", c.jy, DEFAULT_JY)?;
    let d = EvolveOptions::default();
    let evolve = EvolveOptions {
        tol: r.get("evolve_tol", c.evolve_tol, d.tol)?,
        krylov_dim: r.get("krylov_dim", c.krylov_dim, d.krylov_dim)?,
        dense_max_sites: r.get("dense_max_sites", c.dense_max_sites, d.dense_max_sites)?,
        full_reorth: false,
    };
    let out = r.optional("out", c.out.as_ref().map(|p| p.display().to_string()))?.map(PathBuf::from);
    let geometry = LatticeGeometry::new(lx, ly)?;
    Ok(Base { resolver: r, geometry, jx, jy, evolve, out })
}

fn invalid(key: &str, expected: impl Into<String>) -> AppError {
    AppError::Config(ConfigError::Invalid { key: key.to_owned(), expected: expected.into() })
}

fn verify_eig(common: &Common, residual_tol: Option<f64>) -> AppResult<()> {
    let mut b = base("verify-eig", common)?;
    let tol = b.resolver.get("residual_tol", residual_tol, 1e-10)?;
    let h = XYHamiltonian::new(b.geometry, b.jx, b.jy)?;
    let mut table = CsvTable::new(b.resolver.entries(), &["variant", "energy", "residual"]);
    let mut worst = 0.0f64;
    for v in EigVariant::ALL {
        let res = verify_eigenstate(&h, v)?;
        worst = worst.max(res);
        table.push(vec![Cell::S(v.to_string()), Cell::F(eig_energy(&b.geometry, v, b.jx, b.jy)), Cell::F(res)]);
    }
    table.write(b.out.as_deref())?;
    if worst >= tol {
        return Err(AppError::Check(format!("largest eigenstate residual {worst:.3e} exceeds {tol:.1e}")));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn teleport(
    common: &Common,
    e_pairs: Option<usize>,
    t_max: Option<f64>,
    t_steps: Option<usize>,
    bloch_theta: Option<f64>,
    bloch_phi: Option<f64>,
    haar_samples: Option<usize>,
    seed: Option<u64>,
    variant: Option<String>,
) -> AppResult<()> {
    let mut b = base("teleport", common)?;
    let r = &mut b.resolver;
    let e = r.get("e_pairs", e_pairs, 2)?;
    let t_max = r.get("t_max", t_max, 15.0)?;
    let t_steps = r.get("t_steps", t_steps, 30)?;
    let theta = r.get("bloch_theta", bloch_theta, 0.0)?;
    let phi = r.get("bloch_phi", bloch_phi, 0.0)?;
    let haar = r.get("haar_samples", haar_samples, 0)?;
    let seed = r.get("seed", seed, 0)?;
    let variant: EigVariant = r.get("variant", variant, "IZ".to_string())?.parse()?;
    if !(t_max >= 0.0 && t_max.is_finite()) {
        return Err(invalid("t_max", "finite and non-negative"));
    }
    if t_steps == 0 && t_max > 0.0 {
        return Err(invalid("t_steps", "at least 1 when t_max > 0"));
    }
    let times: Vec<f64> =
        if t_max == 0.0 { vec![0.0] } else { (0..=t_steps).map(|k| t_max * k as f64 / t_steps as f64).collect() };
    let mut cfg = TeleportConfig::new(b.geometry, e, times)?;
    cfg.jx = b.jx;
    cfg.jy = b.jy;
    cfg.variant = variant;
    cfg.evolve = b.evolve;
    cfg.state = BlochState::new(theta, phi)?;
    let mut table = CsvTable::new(b.resolver.entries(), &["t", "P", "F", "F_stderr"]);
    if haar > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for s in haar_average_fidelity(&cfg, haar, &mut rng)? {
            table.push(vec![Cell::F(s.t), Cell::F(s.mean_probability), Cell::F(s.mean_fidelity), Cell::F(s.fidelity_stderr)]);
        }
    } else {
        for rec in run_teleport(&cfg)?.records {
            table.push(vec![Cell::F(rec.t), Cell::F(rec.probability), Cell::F(rec.fidelity.unwrap_or(f64::NAN)), Cell::F(0.0)]);
        }
    }
    table.write(b.out.as_deref())?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn engineer_gap(
    common: &Common,
    t_min: Option<f64>,
    t_max: Option<f64>,
    t_steps: Option<usize>,
    central_row: Option<usize>,
    kd: Option<usize>,
    tol: Option<f64>,
    restarts: Option<usize>,
) -> AppResult<()> {
    let mut b = base("engineer-gap", common)?;
    let r = &mut b.resolver;
    let t_min = r.get("t_min", t_min, 0.05)?;
    let t_max = r.get("t_max", t_max, 1.0)?;
    let n = r.get("t_steps", t_steps, 20)?;
    let row = r.optional("central_row", central_row)?;
    let d = ArnoldiOptions::default();
    let opts = ArnoldiOptions {
        krylov_dim: r.get("arnoldi_krylov_dim", kd, d.krylov_dim)?,
        tol: r.get("arnoldi_tol", tol, d.tol)?,
        max_restarts: r.get("arnoldi_max_restarts", restarts, d.max_restarts)?,
        ..d
    };
    if n == 0 || !(t_min >= 0.0 && t_max >= t_min && t_max.is_finite()) {
        return Err(invalid("t_min, t_max, t_steps", "0 <= t_min <= t_max and t_steps >= 1"));
    }
    let periods: Vec<f64> =
        (0..n).map(|k| if n == 1 { t_min } else { t_min + (t_max - t_min) * k as f64 / (n - 1) as f64 }).collect();
    let builder = ChannelBuilder::new(ChannelGeometry::new(b.geometry, b.jx, b.jy, row)?)?;
    let results = gap_sweep(&builder, &periods, &opts)?;
    let mut table = CsvTable::new(
        b.resolver.entries(),
        &["T", "gap", "lambda2_re", "lambda2_im", "lambda1_re", "fixed_point_error", "sector", "matvecs"],
    );
    for (t, g) in periods.iter().zip(&results) {
        let sector = g.lambda2_sectors.as_ref().map_or("none".to_string(), |(a, c)| format!("{a} x {c}"));
        table.push(vec![
            Cell::F(*t),
            Cell::F(g.gap),
            Cell::F(g.lambda2.re),
            Cell::F(g.lambda2.im),
            Cell::F(g.lambda1.re),
            Cell::F(g.fixed_point_error),
            Cell::S(sector),
            Cell::U(g.matvecs),
        ]);
    }
    table.write(b.out.as_deref())?;
    Ok(())
}

fn engineer_iterate(
    common: &Common,
    period: Option<f64>,
    steps: Option<usize>,
    post_select: Option<bool>,
    central_row: Option<usize>,
) -> AppResult<()> {
    let mut b = base("engineer-iterate", common)?;
    let r = &mut b.resolver;
    let t = r.get("T", period, DEFAULT_PERIOD)?;
    let steps = r.get("steps", steps, 200)?;
    let post = r.get("post_select", post_select, false)?;
    let row = r.optional("central_row", central_row)?;
    let ch = ChannelBuilder::new(ChannelGeometry::new(b.geometry, b.jx, b.jy, row)?)?.build(t)?;
    let mut table = CsvTable::new(b.resolver.entries(), &["n", "F", "S2", "MI_far", "MI_near", "p_reset"]);
    for rec in run_channel_iteration(&ch, steps, post)? {
        table.push(vec![
            Cell::U(rec.n),
            Cell::F(rec.fidelity),
            Cell::F(rec.s2),
            Cell::F(rec.mi_far),
            Cell::F(rec.mi_near),
            Cell::F(rec.p_reset),
        ]);
    }
    table.write(b.out.as_deref())?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn trajectories(
    common: &Common,
    period: Option<f64>,
    n_traj: Option<usize>,
    fidelity_target: Option<f64>,
    max_steps: Option<usize>,
    seed: Option<u64>,
    central_row: Option<usize>,
    summary: Option<PathBuf>,
) -> AppResult<()> {
    let mut b = base("trajectories", common)?;
    let r = &mut b.resolver;
    let mut cfg = TrajectoryConfig::new(b.geometry, r.get("T", period, DEFAULT_PERIOD)?);
    let n = r.get("n_traj", n_traj, 200)?;
    cfg.fidelity_target = r.get("fidelity_target", fidelity_target, DEFAULT_FIDELITY_TARGET)?;
    cfg.max_steps = r.get("max_steps", max_steps, DEFAULT_MAX_STEPS)?;
    cfg.seed = r.get("seed", seed, 0)?;
    cfg.central_row = r.optional("central_row", central_row)?;
    cfg.jx = b.jx;
    cfg.jy = b.jy;
    cfg.evolve = b.evolve;
    if n == 0 {
        return Err(invalid("n_traj", "at least 1"));
    }
    let res = run_ensemble(&cfg, n)?;
    let mut table = CsvTable::new(b.resolver.entries(), &["traj_id", "n_tot", "n_c", "converged"]);
    for (k, t) in res.trajectories.iter().enumerate() {
        table.push(vec![Cell::U(k), Cell::U(t.n_tot), Cell::U(t.n_c), Cell::B(t.converged)]);
    }
    table.write(b.out.as_deref())?;

    let stat = |s: Option<rainbow::trajectories::Summary>, f: fn(&rainbow::trajectories::Summary) -> f64| {
        s.as_ref().map_or(serde_json::Value::Null, |x| json_f64(f(x)))
    };
    let config: serde_json::Map<String, serde_json::Value> =
        b.resolver.entries().iter().map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone()))).collect();
    let doc = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "n_traj": n,
        "n_converged": res.n_converged,
        "mean_n_tot": stat(res.n_tot, |s| s.mean),
        "median_n_tot": stat(res.n_tot, |s| s.median),
        "mode_n_tot": stat(res.n_tot, |s| s.mode as f64),
        "mean_n_c": stat(res.n_c, |s| s.mean),
        "median_n_c": stat(res.n_c, |s| s.median),
        "mode_n_c": stat(res.n_c, |s| s.mode as f64),
        "n_tot_histogram": res.n_tot_histogram,
        "n_c_histogram": res.n_c_histogram,
    });
    let text = render_json(&doc);
    match summary.or_else(|| b.out.as_ref().map(|p| p.with_extension("json"))) {
        Some(p) => write_text(Some(Path::new(&p)), &text)?,
        None => eprint!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> AppResult<()> {
    match cli.command {
        Command::VerifyEig { common, residual_tol } => verify_eig(&common, residual_tol),
        Command::Teleport { common, e_pairs, t_max, t_steps, bloch_theta, bloch_phi, haar_samples, seed, variant } => {
            teleport(&common, e_pairs, t_max, t_steps, bloch_theta, bloch_phi, haar_samples, seed, variant)
        }
        Command::EngineerGap { common, t_min, t_max, t_steps, central_row, arnoldi_krylov_dim, arnoldi_tol, arnoldi_max_restarts } => {
            engineer_gap(&common, t_min, t_max, t_steps, central_row, arnoldi_krylov_dim, arnoldi_tol, arnoldi_max_restarts)
        }
        Command::EngineerIterate { common, period, steps, post_select, central_row } => {
            engineer_iterate(&common, period, steps, post_select, central_row)
        }
        Command::Trajectories { common, period, n_traj, fidelity_target, max_steps, seed, central_row, summary } => {
            trajectories(&common, period, n_traj, fidelity_target, max_steps, seed, central_row, summary)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    rainbow::init_parallelism();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (msg, code) = e.report();
            eprintln!("rainbow: {msg}");
            ExitCode::from(code)
        }
    }
}
