use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use weakcorr::analysis::{
    apply_cutoff, cutoff, dsf, dsf_with_sem, error_scan as scan, leggett_garg, oracle_correlations,
    van_hove_samples, LeggettGarg, OracleCorrelations, ReadoutKind, VanHoveOptions,
};
use weakcorr::hamiltonian::{build_hamiltonian, ground_state as solve, BoseHubbardParams};
use weakcorr::io::{self, StateFile, SCHEMA_VERSION};
use weakcorr::prelude::{
    build_basis, Ensemble, InitialState, LatticeSpec, Propagator, ProtocolConfig, QuantumState,
};
use weakcorr::trajectory::{
    run_ensemble, run_three_measurement_ensemble, EnsembleMeta, ThreeMeasurementMeta,
};

use crate::config::{AnalysisSection, Config};
use crate::error::CliError;

/// `initial` label of runs started from the ground state of the recorded model.
const GROUND_STATE: &str = "ground state";

fn create(path: &Path) -> Result<File, CliError> {
    io::create(path).map_err(|e| match e {
        weakcorr::Error::Io(e) => CliError::io(path, e),
        other => other.into(),
    })
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::io(path, e))
}

struct Model {
    propagator: Propagator,
    state: QuantumState,
    label: String,
    energy: f64,
    residual: f64,
}

fn ground_state_model(lattice: LatticeSpec, params: BoseHubbardParams) -> Result<Model, CliError> {
    let basis = Arc::new(build_basis(lattice)?);
    log::info!("basis dimension {}", basis.dim());
    let h = Arc::new(build_hamiltonian(basis, params)?);
    let gs = solve(&h)?;
    log::info!(
        "ground-state energy {:.10} (residual {:.2e})",
        gs.energy,
        gs.residual
    );
    Ok(Model {
        propagator: Propagator::new(h),
        state: gs.state,
        label: GROUND_STATE.into(),
        energy: gs.energy,
        residual: gs.residual,
    })
}

/// The model of a state file, with that state as the initial state.
fn state_file_model(path: &Path) -> Result<Model, CliError> {
    let sf = io::read_state(open(path)?)?;
    let state = sf.state()?;
    let h = Arc::new(build_hamiltonian(state.basis().clone(), sf.hamiltonian)?);
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(Model {
        propagator: Propagator::new(h),
        state,
        label: format!("state file {name}"),
        energy: sf.energy,
        residual: sf.residual,
    })
}

/// Ground state of the configured model, or the given state file (whose model then wins).
fn prepare(cfg: &Config, state: Option<&Path>) -> Result<Model, CliError> {
    match state {
        Some(path) => {
            let m = state_file_model(path)?;
            let spec = m.state.basis().spec();
            if spec != cfg.lattice()? || m.propagator.hamiltonian().params() != cfg.hamiltonian()? {
                log::info!("using the model stored in {}", path.display());
            }
            Ok(m)
        }
        None => ground_state_model(cfg.lattice()?, cfg.hamiltonian()?),
    }
}

#[derive(Serialize)]
struct FailedTrajectory {
    trajectory: u64,
    error: String,
}

#[derive(Serialize)]
struct FailureManifest<'a, P> {
    schema_version: u32,
    kind: &'static str,
    lattice: LatticeSpec,
    hamiltonian: BoseHubbardParams,
    protocol: &'a P,
    failed: Vec<FailedTrajectory>,
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".failures.json");
    out.with_file_name(name)
}

/// On failed trajectories, list them next to `out` before reporting the error.
fn record_failures<T, P: Serialize>(
    result: weakcorr::Result<T>,
    model: &Model,
    protocol: &P,
    out: &Path,
) -> Result<T, CliError> {
    match result {
        Err(weakcorr::Error::Trajectories { failures }) => {
            let path = manifest_path(out);
            let manifest = FailureManifest {
                schema_version: SCHEMA_VERSION,
                kind: "failure_manifest",
                lattice: model.state.basis().spec(),
                hamiltonian: model.propagator.hamiltonian().params(),
                protocol,
                failed: failures
                    .iter()
                    .map(|(i, e)| FailedTrajectory {
                        trajectory: *i,
                        error: e.clone(),
                    })
                    .collect(),
            };
            io::write_json(&manifest, create(&path)?)?;
            log::error!(
                "{} trajectories failed; see {}",
                failures.len(),
                path.display()
            );
            Err(weakcorr::Error::Trajectories { failures }.into())
        }
        other => Ok(other?),
    }
}

pub fn ground_state(cfg: &Config, out: &Path) -> Result<(), CliError> {
    let m = ground_state_model(cfg.lattice()?, cfg.hamiltonian()?)?;
    let sf = StateFile::new(
        &m.state,
        m.propagator.hamiltonian().params(),
        m.energy,
        m.residual,
    );
    io::write_state(&sf, create(out)?)?;
    println!("E0 = {:.12}", m.energy);
    Ok(())
}

fn simulate(m: &Model, protocol: &ProtocolConfig, out: &Path) -> Result<(), CliError> {
    let initial = InitialState::from(m.state.clone());
    let mut ens = record_failures(
        run_ensemble(&initial, &m.propagator, protocol),
        m,
        protocol,
        out,
    )?;
    ens.meta.initial = m.label.clone();
    io::write_ensemble(&ens, create(out)?)?;
    log::info!("{} trajectories written to {}", ens.len(), out.display());
    Ok(())
}

pub fn run(cfg: &Config, state: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let protocol = cfg.protocol()?;
    let m = prepare(cfg, state)?;
    simulate(&m, &protocol, out)
}

/// Re-run the protocol recorded in the header of `records`.
pub fn replay(records: &Path, state: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let meta: EnsembleMeta = io::read_ensemble(open(records)?)?.meta;
    let m = match state {
        Some(path) => state_file_model(path)?,
        None if meta.initial == GROUND_STATE => ground_state_model(meta.lattice, meta.hamiltonian)?,
        None => {
            return Err(CliError::Config(format!(
                "{} started from {:?}; pass the same --state to replay it",
                records.display(),
                meta.initial
            )))
        }
    };
    if m.state.basis().spec() != meta.lattice
        || m.propagator.hamiltonian().params() != meta.hamiltonian
    {
        return Err(CliError::Config(
            "state file model differs from the recorded model".into(),
        ));
    }
    simulate(&m, &meta.protocol, out)
}

/// Exact correlators for the model and grid of `meta`.
fn oracle_for(meta: &EnsembleMeta, state: Option<&Path>) -> Result<OracleCorrelations, CliError> {
    let m = match state {
        Some(path) => state_file_model(path)?,
        None if meta.initial == GROUND_STATE => ground_state_model(meta.lattice, meta.hamiltonian)?,
        None => {
            return Err(CliError::Config(format!(
                "records started from {:?}; pass that state as --oracle STATE",
                meta.initial
            )))
        }
    };
    if m.state.basis().spec() != meta.lattice
        || m.propagator.hamiltonian().params() != meta.hamiltonian
    {
        return Err(CliError::Config(
            "oracle state belongs to a different model".into(),
        ));
    }
    Ok(oracle_correlations(
        &m.propagator,
        &m.state,
        &meta.protocol.times,
    )?)
}

#[derive(Serialize)]
struct OutputSummary {
    van_hove: String,
    dsf: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    dsf_oracle: Option<String>,
    /// Share of Van Hove cells within three standard errors of the exact value
    /// (plus `1e-12` for cells the estimator fixes up to rounding).
    #[serde(skip_serializing_if = "Option::is_none")]
    within_3_sem: Option<f64>,
}

#[derive(Serialize)]
struct AnalysisSummary<'a> {
    schema_version: u32,
    kind: &'static str,
    source: &'a EnsembleMeta,
    analysis: &'a AnalysisSection,
    oracle: Option<String>,
    unfiltered: OutputSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    filtered: Option<OutputSummary>,
}

fn write_analysis(
    cfg: &Config,
    ens: &Ensemble,
    oracle: Option<&OracleCorrelations>,
    dir: &Path,
    suffix: &str,
) -> Result<OutputSummary, CliError> {
    let opts = VanHoveOptions {
        kind: cfg.analysis.kind,
        readout: ReadoutKind::Outcome,
    };
    let dsf_opts = cfg.dsf_options()?;
    let samples = van_hove_samples(ens, opts)?;
    let g = samples.summarize();
    let exact = oracle.map(|o| o.van_hove(cfg.analysis.kind));

    let van_hove = format!("van_hove{suffix}.csv");
    io::write_van_hove_csv(&g, exact.as_ref(), create(&dir.join(&van_hove))?)?;
    let dsf_name = format!("dsf{suffix}.csv");
    io::write_dsf_csv(
        &dsf_with_sem(&samples, &dsf_opts)?,
        create(&dir.join(&dsf_name))?,
    )?;

    let mut summary = OutputSummary {
        van_hove,
        dsf: dsf_name,
        dsf_oracle: None,
        within_3_sem: None,
    };
    if let Some(e) = exact {
        let name = format!("dsf_oracle{suffix}.csv");
        io::write_dsf_csv(&dsf(&e, &dsf_opts)?, create(&dir.join(&name))?)?;
        let hits = g
            .values
            .iter()
            .zip(&g.sem)
            .zip(&e.values)
            .filter(|((v, s), x)| (*v - *x).abs() <= 3.0 * *s + 1e-12)
            .count();
        let share = hits as f64 / g.values.len() as f64;
        log::info!(
            "{:.1}% of Van Hove cells within 3 sem of the exact values",
            100.0 * share
        );
        summary.dsf_oracle = Some(name);
        summary.within_3_sem = Some(share);
    }
    Ok(summary)
}

pub fn analyze(
    cfg: &Config,
    records: &Path,
    oracle: Option<Option<&Path>>,
    dir: &Path,
) -> Result<(), CliError> {
    let ens = io::read_ensemble(open(records)?)?;
    if ens.is_empty() {
        return Err(CliError::Config(format!(
            "{} holds no trajectories",
            records.display()
        )));
    }
    let exact = oracle
        .map(|state| oracle_for(&ens.meta, state))
        .transpose()?;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;

    let unfiltered = write_analysis(cfg, &ens, exact.as_ref(), dir, "")?;
    let filtered = match cfg.analysis.k_max {
        Some(k) => {
            let low = apply_cutoff(&ens, k)?;
            let exact_low = match &exact {
                Some(o) if cutoff::is_identity(ens.sites(), k) => Some(o.clone()),
                Some(o) => Some(o.filtered(k)?),
                None => None,
            };
            Some(write_analysis(cfg, &low, exact_low.as_ref(), dir, "_kmax")?)
        }
        None => None,
    };
    let summary = AnalysisSummary {
        schema_version: SCHEMA_VERSION,
        kind: "analysis",
        source: &ens.meta,
        analysis: &cfg.analysis,
        oracle: exact.as_ref().map(|_| match oracle.flatten() {
            Some(p) => p.display().to_string(),
            None => GROUND_STATE.into(),
        }),
        unfiltered,
        filtered,
    };
    io::write_json(&summary, create(&dir.join("summary.json"))?)?;
    Ok(())
}

#[derive(Serialize)]
struct ErrorScanFile<'a> {
    kind: &'static str,
    lattice: LatticeSpec,
    hamiltonian: BoseHubbardParams,
    initial: &'a str,
    #[serde(flatten)]
    result: &'a weakcorr::analysis::ErrorScanResult,
}

pub fn error_scan(cfg: &Config, state: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let scan_cfg = cfg.error_scan()?;
    let m = prepare(cfg, state)?;
    let result = record_failures(scan(&m.propagator, &m.state, &scan_cfg), &m, &scan_cfg, out)?;
    let file = ErrorScanFile {
        kind: "error_scan",
        lattice: m.state.basis().spec(),
        hamiltonian: m.propagator.hamiltonian().params(),
        initial: &m.label,
        result: &result,
    };
    io::write_json(&file, create(out)?)?;

    let table = out.with_extension("csv");
    let mut w = csv::Writer::from_writer(create(&table)?);
    let wrap = |e: csv::Error| CliError::from(weakcorr::Error::from(e));
    w.write_record(["gamma", "statistical_rms", "total_rms"])
        .map_err(wrap)?;
    for p in &result.points {
        w.write_record([
            p.gamma.to_string(),
            p.statistical_rms.to_string(),
            p.total_rms.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| CliError::io(&table, e))?;

    let show = |s: Option<f64>| s.map_or("n/a".to_string(), |v| format!("{v:.3}"));
    println!(
        "statistical slope {}, total slope {}",
        show(result.statistical_slope),
        show(result.total_slope)
    );
    Ok(())
}

pub fn lg_run(cfg: &Config, state: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let protocol = cfg.three_measurement()?;
    let m = prepare(cfg, state)?;
    let initial = InitialState::from(m.state.clone());
    let mut ens = record_failures(
        run_three_measurement_ensemble(&initial, &m.propagator, &protocol),
        &m,
        &protocol,
        out,
    )?;
    ens.meta.initial = m.label.clone();
    io::write_three_measurement(&ens, create(out)?)?;
    Ok(())
}

#[derive(Serialize)]
struct PairEntry {
    j1: usize,
    j2: usize,
    #[serde(flatten)]
    result: LeggettGarg,
}

#[derive(Serialize)]
struct LeggettGargFile<'a> {
    schema_version: u32,
    kind: &'static str,
    source: &'a ThreeMeasurementMeta,
    entries: Vec<PairEntry>,
}

pub fn lg_analyze(
    records: &Path,
    pair: Option<(usize, usize)>,
    out: &Path,
) -> Result<(), CliError> {
    let ens = io::read_three_measurement(open(records)?)?;
    let l = ens.meta.lattice.sites;
    let pairs: Vec<(usize, usize)> = match pair {
        Some(p) => vec![p],
        None => (0..l).flat_map(|a| (0..l).map(move |b| (a, b))).collect(),
    };
    let entries = pairs
        .into_iter()
        .map(|(j1, j2)| {
            Ok(PairEntry {
                j1,
                j2,
                result: leggett_garg(&ens, j1, j2)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    if let Some(top) = entries
        .iter()
        .max_by(|a, b| a.result.value.mean.total_cmp(&b.result.value.mean))
    {
        println!(
            "largest K = {:.4} ± {:.4} at sites ({}, {})",
            top.result.value.mean, top.result.value.sem, top.j1, top.j2
        );
    }
    let file = LeggettGargFile {
        schema_version: SCHEMA_VERSION,
        kind: "leggett_garg",
        source: &ens.meta,
        entries,
    };
    io::write_json(&file, create(out)?)?;
    Ok(())
}
