//! The two-measurement protocol and its ensembles.
//!
//! One trajectory measures the initial state at `t = 0`, evolves the
//! post-measurement state, and reads it out at every time of an ascending
//! grid. A readout at a grid time never feeds back into later grid times, so
//! one first measurement yields the whole set of second outcomes. Strict mode
//! instead repeats the first measurement with fresh noise for every grid time
//! and serves as the reference the shared-first-measurement shortcut is
//! checked against.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{check_grid, Propagator};
use crate::fockspace::{densities, FockBasis, LatticeSpec, QuantumState};
use crate::hamiltonian::BoseHubbardParams;
use crate::io::SCHEMA_VERSION;
use crate::measurement::{
    check_normalized, measure, sample_index, terminal_record, MeasurementMode, MeasurementOutcome,
    MeasurementStrength,
};
use crate::streams::{StreamId, FIRST_SLOT, MIXTURE_SLOT, STRICT_FIRST_BASE};

/// Whether the second readout carries measurement noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecondNoise {
    Include,
    /// The readout is the conditional density itself, which has the same
    /// ensemble mean and a much smaller variance.
    #[default]
    Omit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub gamma: f64,
    /// Readout times in units of `1/J`, ascending.
    pub times: Vec<f64>,
    pub trajectories: usize,
    #[serde(default)]
    pub second_noise: SecondNoise,
    #[serde(default)]
    pub mode: MeasurementMode,
    pub master_seed: u64,
    /// Fresh first measurement for every grid time.
    #[serde(default)]
    pub strict_grid: bool,
}

impl ProtocolConfig {
    /// Linearized, noise omitted, shared first measurement.
    pub fn new(gamma: f64, times: Vec<f64>, trajectories: usize, master_seed: u64) -> Self {
        ProtocolConfig {
            gamma,
            times,
            trajectories,
            second_noise: SecondNoise::Omit,
            mode: MeasurementMode::Linearized,
            master_seed,
            strict_grid: false,
        }
    }

    pub fn strength(&self) -> Result<MeasurementStrength> {
        MeasurementStrength::new(self.gamma)
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.strength()?;
        if s.beyond_linear_regime() && self.mode == MeasurementMode::Linearized {
            log::warn!(
                "Γ = {} is beyond the linearized regime (Γ > 0.5)",
                self.gamma
            );
        }
        if self.trajectories == 0 {
            return Err(Error::config("at least one trajectory is required"));
        }
        if self.times.is_empty() {
            return Err(Error::config("time grid is empty"));
        }
        check_grid(&self.times)
    }
}

/// `0, dt, 2 dt, ..., t_max`. `t_max` must be a whole number of steps.
pub fn uniform_grid(t_max: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && dt.is_finite()) || !(t_max >= 0.0 && t_max.is_finite()) {
        return Err(Error::config(format!(
            "invalid grid: t_max = {t_max}, dt = {dt}"
        )));
    }
    let n = (t_max / dt).round();
    if (n * dt - t_max).abs() > 1e-9 * t_max.max(1.0) {
        return Err(Error::config(format!(
            "t_max = {t_max} is not a multiple of dt = {dt}"
        )));
    }
    Ok((0..=n as usize).map(|k| k as f64 * dt).collect())
}

/// Initial condition: one pure state, or a weighted mixture sampled per trajectory.
#[derive(Debug, Clone)]
pub enum InitialState {
    Pure(QuantumState),
    Mixture(Vec<(QuantumState, f64)>),
}

impl From<QuantumState> for InitialState {
    fn from(s: QuantumState) -> Self {
        InitialState::Pure(s)
    }
}

impl InitialState {
    pub fn mixture(members: Vec<(QuantumState, f64)>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::config("empty mixture"))?;
        let basis = first.0.basis();
        for (s, w) in &members {
            if !(*w >= 0.0 && w.is_finite()) {
                return Err(Error::config("mixture weights must be non-negative"));
            }
            if !Arc::ptr_eq(s.basis(), basis) && s.basis().spec() != basis.spec() {
                return Err(Error::config("mixture members live on different bases"));
            }
        }
        if !(members.iter().map(|m| m.1).sum::<f64>() > 0.0) {
            return Err(Error::config("mixture weights sum to zero"));
        }
        Ok(InitialState::Mixture(members))
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        match self {
            InitialState::Pure(s) => s.basis(),
            InitialState::Mixture(m) => m[0].0.basis(),
        }
    }

    /// Member used by trajectory `index`.
    pub fn pick(&self, master_seed: u64, index: u64) -> (usize, &QuantumState) {
        match self {
            InitialState::Pure(s) => (0, s),
            InitialState::Mixture(m) => {
                let u: f64 = StreamId::new(master_seed, index, MIXTURE_SLOT)
                    .rng()
                    .random();
                let w: Vec<f64> = m.iter().map(|x| x.1).collect();
                let k = sample_index(&w, u);
                (k, &m[k].0)
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            InitialState::Pure(_) => "pure".into(),
            InitialState::Mixture(m) => format!("mixture of {}", m.len()),
        }
    }
}

/// Readout at one grid time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Readout {
    /// `<n_j(t)>` in the conditional state.
    pub density: Vec<f64>,
    /// The second record; equal to `density` when noise is omitted.
    pub outcome: Vec<f64>,
    pub noise: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub index: u64,
    /// Mixture member; 0 for a pure initial state.
    pub member: usize,
    /// One first measurement, or one per grid time in strict mode.
    pub firsts: Vec<MeasurementOutcome>,
    pub readouts: Vec<Readout>,
}

impl TrajectoryRecord {
    pub fn first(&self) -> &MeasurementOutcome {
        &self.firsts[0]
    }

    /// First measurement paired with grid index `k`.
    pub fn first_at(&self, k: usize) -> &MeasurementOutcome {
        if self.firsts.len() == 1 {
            &self.firsts[0]
        } else {
            &self.firsts[k]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMeta {
    pub schema_version: u32,
    pub lattice: LatticeSpec,
    pub hamiltonian: BoseHubbardParams,
    pub protocol: ProtocolConfig,
    pub initial: String,
    /// Spatial cutoff already applied to every record, in radians per site.
    #[serde(default)]
    pub cutoff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub meta: EnsembleMeta,
    pub records: Vec<TrajectoryRecord>,
}

impl Ensemble {
    pub fn times(&self) -> &[f64] {
        &self.meta.protocol.times
    }

    pub fn sites(&self) -> usize {
        self.meta.lattice.sites
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Grid index of `t`, within a relative tolerance of `1e-9`.
    pub fn time_index(&self, t: f64) -> Result<usize> {
        time_index(self.times(), t)
    }

    /// The first `m` trajectories.
    pub fn truncated(&self, m: usize) -> Ensemble {
        Ensemble {
            meta: EnsembleMeta {
                protocol: ProtocolConfig {
                    trajectories: m.min(self.len()),
                    ..self.meta.protocol.clone()
                },
                ..self.meta.clone()
            },
            records: self.records[..m.min(self.len())].to_vec(),
        }
    }
}

pub(crate) fn time_index(times: &[f64], t: f64) -> Result<usize> {
    times
        .iter()
        .position(|&x| (x - t).abs() <= 1e-9 * t.abs().max(1.0))
        .ok_or(Error::TimeNotOnGrid(t))
}

fn readout(
    basis: &FockBasis,
    amplitudes: &[num_complex::Complex64],
    cfg: &ProtocolConfig,
    strength: MeasurementStrength,
    index: u64,
    k: usize,
) -> Readout {
    match cfg.second_noise {
        SecondNoise::Omit => {
            let density = densities(basis, amplitudes);
            Readout {
                outcome: density.clone(),
                density,
                noise: None,
            }
        }
        SecondNoise::Include => {
            let stream = StreamId::second(cfg.master_seed, index, k);
            let (outcome, noise, density) =
                terminal_record(basis, amplitudes, cfg.mode, strength, stream);
            Readout {
                density,
                outcome,
                noise: Some(noise),
            }
        }
    }
}

/// One trajectory of the two-measurement protocol.
pub fn run_trajectory(
    initial: &InitialState,
    propagator: &Propagator,
    cfg: &ProtocolConfig,
    index: u64,
) -> Result<TrajectoryRecord> {
    let strength = cfg.strength()?;
    check_grid(&cfg.times)?;
    let (member, psi0) = initial.pick(cfg.master_seed, index);
    check_normalized(psi0)?;
    let basis = propagator.basis();
    if basis.spec() != psi0.basis().spec() {
        return Err(Error::config(
            "initial state and Hamiltonian use different bases",
        ));
    }

    if !cfg.strict_grid {
        let (first, post) = measure(
            cfg.mode,
            psi0,
            strength,
            StreamId::new(cfg.master_seed, index, FIRST_SLOT),
        )?;
        let mut readouts = Vec::with_capacity(cfg.times.len());
        propagator.evolve_vector_grid_with(post.amplitudes(), &cfg.times, |k, v| {
            readouts.push(readout(basis, v, cfg, strength, index, k));
        })?;
        return Ok(TrajectoryRecord {
            index,
            member,
            firsts: vec![first],
            readouts,
        });
    }

    let mut firsts = Vec::with_capacity(cfg.times.len());
    let mut readouts = Vec::with_capacity(cfg.times.len());
    for (k, &t) in cfg.times.iter().enumerate() {
        let stream = StreamId::new(cfg.master_seed, index, STRICT_FIRST_BASE + k as u64);
        let (first, post) = measure(cfg.mode, psi0, strength, stream)?;
        let v = propagator.evolve_vector(post.amplitudes(), t)?;
        readouts.push(readout(basis, &v, cfg, strength, index, k));
        firsts.push(first);
    }
    Ok(TrajectoryRecord {
        index,
        member,
        firsts,
        readouts,
    })
}

/// Run trajectories `0..M` in parallel. The result does not depend on
/// scheduling; failed trajectories are reported together with their indices.
pub fn run_ensemble(
    initial: &InitialState,
    propagator: &Propagator,
    cfg: &ProtocolConfig,
) -> Result<Ensemble> {
    cfg.validate()?;
    let results: Vec<(u64, Result<TrajectoryRecord>)> = (0..cfg.trajectories as u64)
        .into_par_iter()
        .map(|i| (i, run_trajectory(initial, propagator, cfg, i)))
        .collect();
    let records = collect_results(results)?;
    Ok(Ensemble {
        meta: EnsembleMeta {
            schema_version: SCHEMA_VERSION,
            lattice: propagator.basis().spec(),
            hamiltonian: propagator.hamiltonian().params(),
            protocol: cfg.clone(),
            initial: initial.label(),
            cutoff: None,
        },
        records,
    })
}

fn collect_results<T>(results: Vec<(u64, Result<T>)>) -> Result<Vec<T>> {
    let mut ok = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (i, r) in results {
        match r {
            Ok(x) => ok.push(x),
            Err(e) => failures.push((i, e.to_string())),
        }
    }
    if failures.is_empty() {
        Ok(ok)
    } else {
        Err(Error::Trajectories { failures })
    }
}

/// Settings for three successive measurements at `t1 <= t2 <= t3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreeMeasurementConfig {
    pub gamma: f64,
    pub times: [f64; 3],
    pub trajectories: usize,
    #[serde(default)]
    pub mode: MeasurementMode,
    pub master_seed: u64,
    /// Noise on the last measurement; the first two always carry it.
    #[serde(default = "include")]
    pub final_noise: SecondNoise,
}

fn include() -> SecondNoise {
    SecondNoise::Include
}

impl ThreeMeasurementConfig {
    pub fn validate(&self) -> Result<()> {
        MeasurementStrength::new(self.gamma)?;
        if self.trajectories == 0 {
            return Err(Error::config("at least one trajectory is required"));
        }
        check_grid(&self.times)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreeMeasurementRecord {
    pub index: u64,
    pub member: usize,
    pub outcomes: [MeasurementOutcome; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreeMeasurementMeta {
    pub schema_version: u32,
    pub lattice: LatticeSpec,
    pub hamiltonian: BoseHubbardParams,
    pub protocol: ThreeMeasurementConfig,
    pub initial: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThreeMeasurementEnsemble {
    pub meta: ThreeMeasurementMeta,
    pub records: Vec<ThreeMeasurementRecord>,
}

/// Measure at `t1` and `t2` with backaction, then read out at `t3`.
pub fn run_three_measurement(
    initial: &InitialState,
    propagator: &Propagator,
    cfg: &ThreeMeasurementConfig,
    index: u64,
) -> Result<ThreeMeasurementRecord> {
    cfg.validate()?;
    let strength = MeasurementStrength::new(cfg.gamma)?;
    let (member, psi0) = initial.pick(cfg.master_seed, index);
    check_normalized(psi0)?;
    let [t1, t2, t3] = cfg.times;
    let stream = |slot| StreamId::new(cfg.master_seed, index, slot);

    let s1 = propagator.evolve(psi0, t1)?;
    let (o1, p1) = measure(cfg.mode, &s1, strength, stream(0))?;
    let s2 = propagator.evolve(&p1, t2 - t1)?;
    let (o2, p2) = measure(cfg.mode, &s2, strength, stream(1))?;
    let s3 = propagator.evolve(&p2, t3 - t2)?;
    let o3 = match cfg.final_noise {
        SecondNoise::Include => measure(cfg.mode, &s3, strength, stream(2))?.0,
        SecondNoise::Omit => {
            let d = s3.density_expectation();
            MeasurementOutcome {
                record: d.clone(),
                noise: vec![0.0; d.len()],
                densities: d,
            }
        }
    };
    Ok(ThreeMeasurementRecord {
        index,
        member,
        outcomes: [o1, o2, o3],
    })
}

pub fn run_three_measurement_ensemble(
    initial: &InitialState,
    propagator: &Propagator,
    cfg: &ThreeMeasurementConfig,
) -> Result<ThreeMeasurementEnsemble> {
    cfg.validate()?;
    let results: Vec<(u64, Result<ThreeMeasurementRecord>)> = (0..cfg.trajectories as u64)
        .into_par_iter()
        .map(|i| (i, run_three_measurement(initial, propagator, cfg, i)))
        .collect();
    Ok(ThreeMeasurementEnsemble {
        meta: ThreeMeasurementMeta {
            schema_version: SCHEMA_VERSION,
            lattice: propagator.basis().spec(),
            hamiltonian: propagator.hamiltonian().params(),
            protocol: cfg.clone(),
            initial: initial.label(),
        },
        records: collect_results(results)?,
    })
}
