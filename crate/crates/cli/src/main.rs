use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use weakcorr::analysis::{CorrelatorKind, SpatialWindow, TimeWindow};
use weakcorr::hamiltonian::Boundary;
use weakcorr::prelude::{MeasurementMode, SecondNoise};

mod commands;
mod config;
mod error;

use config::Config;
use error::{CliError, EXIT_CONFIG};

/// Weak-measurement density correlations of a Bose-Hubbard chain.
///
/// Settings come from built-in defaults, then `--config FILE` (TOML), then
/// flags. Exit codes: 0 success, 2 bad configuration, 3 numerical failure,
/// 4 file or format error.
#[derive(Parser)]
#[command(name = "weakcorr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the ground state and write it as JSON.
    GroundState {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Simulate an ensemble of measure / evolve / read-out trajectories.
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sampling: SamplingArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, value_enum)]
        second_noise: Option<NoiseArg>,
        /// Fresh first measurement for every readout time.
        #[arg(long)]
        strict_grid: bool,
        /// Start from this state file instead of the ground state.
        #[arg(long)]
        state: Option<PathBuf>,
        /// Take model and protocol from the header of an existing records file.
        #[arg(long, conflicts_with = "config")]
        replay: Option<PathBuf>,
    },
    /// Van Hove function and structure factor of a records file.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Records file written by `run`.
        records: PathBuf,
        /// Also analyze records low-pass filtered to |k| <= KMAX.
        #[arg(long)]
        kmax: Option<f64>,
        #[arg(long, value_enum)]
        window: Option<WindowArg>,
        #[arg(long, value_enum)]
        spatial_window: Option<WindowArg>,
        #[arg(long, value_enum)]
        kind: Option<KindArg>,
        /// Overlay exact values. Without a state file the ground state of the
        /// recorded model is used.
        #[arg(long, value_name = "STATE", num_args = 0..=1)]
        oracle: Option<Option<PathBuf>>,
    },
    /// Statistical and total error of the connected Van Hove function across Γ.
    ErrorScan {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sampling: SamplingArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Measurement strengths, comma separated.
        #[arg(long, value_delimiter = ',')]
        gamma: Vec<f64>,
        #[arg(long)]
        state: Option<PathBuf>,
    },
    /// Simulate three successive weak measurements.
    LgRun {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sampling: SamplingArgs,
        #[arg(long)]
        gamma: Option<f64>,
        /// The three measurement times, comma separated.
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
        #[arg(long)]
        state: Option<PathBuf>,
    },
    /// Leggett-Garg combinations of a three-measurement records file.
    LgAnalyze {
        #[command(flatten)]
        common: Common,
        records: PathBuf,
        /// Restrict to one site pair, e.g. `--pair 0,1`.
        #[arg(long, value_delimiter = ',')]
        pair: Option<Vec<usize>>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML settings file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file, or directory for `analyze`.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    sites: Option<usize>,
    #[arg(long)]
    particles: Option<usize>,
    #[arg(long)]
    max_occupancy: Option<usize>,
    /// On-site interaction U in units of J.
    #[arg(long)]
    interaction: Option<f64>,
    #[arg(long, value_enum)]
    boundary: Option<BoundaryArg>,
}

#[derive(Args)]
struct SamplingArgs {
    #[arg(long)]
    trajectories: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    tmax: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    Include,
    Omit,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Linearized,
    Kraus,
}

#[derive(Clone, Copy, ValueEnum)]
enum WindowArg {
    Hann,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Raw,
    Connected,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundaryArg {
    Open,
    Periodic,
}

impl From<NoiseArg> for SecondNoise {
    fn from(a: NoiseArg) -> Self {
        match a {
            NoiseArg::Include => SecondNoise::Include,
            NoiseArg::Omit => SecondNoise::Omit,
        }
    }
}

impl From<ModeArg> for MeasurementMode {
    fn from(a: ModeArg) -> Self {
        match a {
            ModeArg::Linearized => MeasurementMode::Linearized,
            ModeArg::Kraus => MeasurementMode::Kraus,
        }
    }
}

impl From<WindowArg> for TimeWindow {
    fn from(a: WindowArg) -> Self {
        match a {
            WindowArg::Hann => TimeWindow::Hann,
            WindowArg::None => TimeWindow::None,
        }
    }
}

impl From<WindowArg> for SpatialWindow {
    fn from(a: WindowArg) -> Self {
        match a {
            WindowArg::Hann => SpatialWindow::Hann,
            WindowArg::None => SpatialWindow::None,
        }
    }
}

impl From<KindArg> for CorrelatorKind {
    fn from(a: KindArg) -> Self {
        match a {
            KindArg::Raw => CorrelatorKind::Raw,
            KindArg::Connected => CorrelatorKind::Connected,
        }
    }
}

impl From<BoundaryArg> for Boundary {
    fn from(a: BoundaryArg) -> Self {
        match a {
            BoundaryArg::Open => Boundary::Open,
            BoundaryArg::Periodic => Boundary::Periodic,
        }
    }
}

fn set<T>(slot: &mut T, value: Option<impl Into<T>>) {
    if let Some(v) = value {
        *slot = v.into();
    }
}

impl ModelArgs {
    fn apply(&self, cfg: &mut Config) {
        set(&mut cfg.lattice.sites, self.sites);
        if self.particles.is_some() {
            cfg.lattice.particles = self.particles;
        }
        set(&mut cfg.lattice.max_occupancy, self.max_occupancy);
        set(&mut cfg.hamiltonian.interaction, self.interaction);
        set(&mut cfg.hamiltonian.boundary, self.boundary);
    }
}

impl SamplingArgs {
    fn apply(&self, cfg: &mut Config) {
        set(&mut cfg.protocol.trajectories, self.trajectories);
        set(&mut cfg.protocol.seed, self.seed);
        set(&mut cfg.protocol.mode, self.mode);
    }
}

impl GridArgs {
    fn apply(&self, cfg: &mut Config) {
        set(&mut cfg.protocol.t_max, self.tmax);
        set(&mut cfg.protocol.dt, self.dt);
    }
}

impl Common {
    fn load(&self) -> Result<Config, CliError> {
        if let Some(n) = self.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
        }
        Config::load(self.config.as_deref())
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::GroundState { common, model } => {
            let mut cfg = common.load()?;
            model.apply(&mut cfg);
            commands::ground_state(&cfg, &common.out)
        }
        Command::Run {
            common,
            model,
            sampling,
            grid,
            gamma,
            second_noise,
            strict_grid,
            state,
            replay,
        } => {
            let mut cfg = common.load()?;
            model.apply(&mut cfg);
            sampling.apply(&mut cfg);
            grid.apply(&mut cfg);
            set(&mut cfg.protocol.gamma, gamma);
            set(&mut cfg.protocol.second_noise, second_noise);
            cfg.protocol.strict_grid |= strict_grid;
            match replay {
                Some(path) => commands::replay(&path, state.as_deref(), &common.out),
                None => commands::run(&cfg, state.as_deref(), &common.out),
            }
        }
        Command::Analyze {
            common,
            records,
            kmax,
            window,
            spatial_window,
            kind,
            oracle,
        } => {
            let mut cfg = common.load()?;
            if kmax.is_some() {
                cfg.analysis.k_max = kmax;
            }
            set(&mut cfg.analysis.window, window);
            set(&mut cfg.analysis.spatial_window, spatial_window);
            set(&mut cfg.analysis.kind, kind);
            commands::analyze(
                &cfg,
                &records,
                oracle.as_ref().map(|o| o.as_deref()),
                &common.out,
            )
        }
        Command::ErrorScan {
            common,
            model,
            sampling,
            grid,
            gamma,
            state,
        } => {
            let mut cfg = common.load()?;
            model.apply(&mut cfg);
            sampling.apply(&mut cfg);
            grid.apply(&mut cfg);
            if !gamma.is_empty() {
                cfg.error_scan.gammas = gamma;
            }
            commands::error_scan(&cfg, state.as_deref(), &common.out)
        }
        Command::LgRun {
            common,
            model,
            sampling,
            gamma,
            times,
            state,
        } => {
            let mut cfg = common.load()?;
            model.apply(&mut cfg);
            sampling.apply(&mut cfg);
            set(&mut cfg.protocol.gamma, gamma);
            if let Some(t) = times {
                cfg.leggett_garg.times = t
                    .try_into()
                    .map_err(|_| CliError::Config("--times takes exactly three values".into()))?;
            }
            commands::lg_run(&cfg, state.as_deref(), &common.out)
        }
        Command::LgAnalyze {
            common,
            records,
            pair,
        } => {
            common.load()?;
            let pair = match pair.as_deref() {
                None => None,
                Some(&[a, b]) => Some((a, b)),
                Some(_) => return Err(CliError::Config("--pair takes exactly two sites".into())),
            };
            commands::lg_analyze(&records, pair, &common.out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
