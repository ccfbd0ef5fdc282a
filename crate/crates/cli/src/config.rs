//! Run configuration: a TOML file, then command-line overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use weakcorr::analysis::{
    omega_grid, CorrelatorKind, DsfOptions, ErrorScanConfig, SpatialWindow, TimeWindow,
};
use weakcorr::hamiltonian::{BoseHubbardParams, Boundary, InteractionConvention};
use weakcorr::prelude::{
    LatticeSpec, MeasurementMode, ProtocolConfig, SecondNoise, ThreeMeasurementConfig,
};
use weakcorr::trajectory::uniform_grid;

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub lattice: LatticeSection,
    pub hamiltonian: HamiltonianSection,
    pub protocol: ProtocolSection,
    pub analysis: AnalysisSection,
    pub error_scan: ErrorScanSection,
    pub leggett_garg: LeggettGargSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeSection {
    pub sites: usize,
    /// Defaults to one particle per site.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub particles: Option<usize>,
    pub max_occupancy: usize,
}

impl Default for LatticeSection {
    fn default() -> Self {
        LatticeSection {
            sites: 6,
            particles: None,
            max_occupancy: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HamiltonianSection {
    pub tunneling: f64,
    pub interaction: f64,
    pub convention: InteractionConvention,
    pub boundary: Boundary,
}

impl Default for HamiltonianSection {
    fn default() -> Self {
        HamiltonianSection {
            tunneling: 1.0,
            interaction: 2.0,
            convention: InteractionConvention::default(),
            boundary: Boundary::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    pub gamma: f64,
    pub trajectories: usize,
    pub t_max: f64,
    pub dt: f64,
    pub seed: u64,
    pub second_noise: SecondNoise,
    pub mode: MeasurementMode,
    pub strict_grid: bool,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        ProtocolSection {
            gamma: 0.05,
            trajectories: 1000,
            t_max: 3.0,
            dt: 0.05,
            seed: 2024,
            second_noise: SecondNoise::Omit,
            mode: MeasurementMode::Linearized,
            strict_grid: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub kind: CorrelatorKind,
    pub window: TimeWindow,
    pub spatial_window: SpatialWindow,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_count: Option<usize>,
    pub omega_max: f64,
    pub omega_step: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<f64>,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            kind: CorrelatorKind::Raw,
            window: TimeWindow::Hann,
            spatial_window: SpatialWindow::None,
            q_count: None,
            omega_max: 10.0,
            omega_step: 0.1,
            k_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErrorScanSection {
    pub gammas: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_displacement: Option<usize>,
}

impl Default for ErrorScanSection {
    fn default() -> Self {
        ErrorScanSection {
            gammas: vec![0.02, 0.05, 0.1, 0.2, 0.5],
            max_displacement: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LeggettGargSection {
    pub times: [f64; 3],
    pub final_noise: SecondNoise,
}

impl Default for LeggettGargSection {
    fn default() -> Self {
        LeggettGargSection {
            times: [0.0, 0.5, 1.0],
            final_noise: SecondNoise::Include,
        }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Config, CliError> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn lattice(&self) -> Result<LatticeSpec, CliError> {
        let l = &self.lattice;
        Ok(LatticeSpec::new(
            l.sites,
            l.particles.unwrap_or(l.sites),
            l.max_occupancy,
        )?)
    }

    pub fn hamiltonian(&self) -> Result<BoseHubbardParams, CliError> {
        let h = &self.hamiltonian;
        let params = BoseHubbardParams {
            tunneling: h.tunneling,
            interaction: h.interaction,
            convention: h.convention,
            boundary: h.boundary,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn times(&self) -> Result<Vec<f64>, CliError> {
        Ok(uniform_grid(self.protocol.t_max, self.protocol.dt)?)
    }

    pub fn protocol(&self) -> Result<ProtocolConfig, CliError> {
        let p = &self.protocol;
        let cfg = ProtocolConfig {
            gamma: p.gamma,
            times: self.times()?,
            trajectories: p.trajectories,
            second_noise: p.second_noise,
            mode: p.mode,
            master_seed: p.seed,
            strict_grid: p.strict_grid,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn error_scan(&self) -> Result<ErrorScanConfig, CliError> {
        if self.error_scan.gammas.is_empty() {
            return Err(CliError::Config("error scan needs at least one Γ".into()));
        }
        Ok(ErrorScanConfig {
            gammas: self.error_scan.gammas.clone(),
            trajectories: self.protocol.trajectories,
            times: self.times()?,
            master_seed: self.protocol.seed,
            mode: self.protocol.mode,
            max_displacement: self.error_scan.max_displacement,
        })
    }

    pub fn three_measurement(&self) -> Result<ThreeMeasurementConfig, CliError> {
        let cfg = ThreeMeasurementConfig {
            gamma: self.protocol.gamma,
            times: self.leggett_garg.times,
            trajectories: self.protocol.trajectories,
            mode: self.protocol.mode,
            master_seed: self.protocol.seed,
            final_noise: self.leggett_garg.final_noise,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn dsf_options(&self) -> Result<DsfOptions, CliError> {
        let a = &self.analysis;
        if !(a.omega_max >= 0.0 && a.omega_step > 0.0) {
            return Err(CliError::Config(
                "omega_max must be >= 0 and omega_step > 0".into(),
            ));
        }
        Ok(DsfOptions {
            time_window: a.window,
            spatial_window: a.spatial_window,
            q_count: a.q_count,
            omegas: omega_grid(a.omega_max, a.omega_step),
        })
    }
}
