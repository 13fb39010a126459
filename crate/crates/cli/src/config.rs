//! Run configuration: one TOML file holding every module's settings. Flags
//! given on the command line override the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sicspin::calibrate::{MismatchMetric, ScanGrid};
use sicspin::hamiltonian::EXPERIMENT_FIELD;
use sicspin::lattice::{LatticeParams, Species, VacancySite};
use sicspin::placement::PlacementConfig;
use sicspin::refine::RefineConfig;
use sicspin::spinphys::{Constants, FieldConfig};
use sicspin::synth::{register_structure, ClusterStructure, GrowthConfig, NoiseModel, TelegraphSpec};
use sicspin::telegraph::TelegraphConfig;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Subcommand the file was written for; informational.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    pub seed: u64,
    pub lattice: LatticeSection,
    pub constants: Constants,
    pub field: FieldSection,
    pub placement: PlacementConfig,
    pub refine: RefineConfig,
    pub calibration: CalibrationSection,
    pub telegraph: TelegraphConfig,
    pub synth: SynthSection,
    pub graph: GraphSection,
    pub paths: PathsSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeSection {
    /// Å
    pub a: f64,
    /// Å
    pub c: f64,
    pub vacancy: VacancySite,
    /// Radius of the `lattice` site listing, Å.
    pub radius: f64,
}

impl Default for LatticeSection {
    fn default() -> Self {
        let p = LatticeParams::default();
        Self { a: p.a, c: p.c, vacancy: p.vacancy, radius: 10.0 }
    }
}

impl LatticeSection {
    pub fn params(&self) -> LatticeParams {
        LatticeParams { a: self.a, c: self.c, vacancy: self.vacancy }
    }
}

/// Static field in gauss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldSection {
    pub b_z: f64,
    pub b_x: f64,
    pub b_y: f64,
}

impl Default for FieldSection {
    fn default() -> Self {
        Self { b_z: EXPERIMENT_FIELD, b_x: 0.0, b_y: 0.0 }
    }
}

impl FieldSection {
    pub fn field(&self, constants: &Constants) -> FieldConfig {
        FieldConfig { b_z: self.b_z, b_x: self.b_x, b_y: self.b_y, g_electron: constants.g_electron }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSection {
    pub grid: ScanGrid,
    pub metric: MismatchMetric,
    /// Nuclear species of the bath line used for the independent estimate.
    pub bath_species: Species,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        Self { grid: ScanGrid::default(), metric: MismatchMetric::default(), bath_species: Species::C }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub n_si: usize,
    pub n_c: usize,
    pub structure: ClusterStructure,
    pub growth: GrowthConfig,
    pub noise: NoiseModel,
    /// Hz
    pub min_detectable: f64,
    /// The coupling noise is drawn with seed `seed + noise_seed_offset`.
    pub noise_seed_offset: u64,
    pub telegraph: TelegraphSpec,
}

impl Default for SynthSection {
    fn default() -> Self {
        let (n_si, n_c, structure) = register_structure();
        Self {
            n_si,
            n_c,
            structure,
            growth: GrowthConfig::default(),
            noise: NoiseModel::default(),
            min_detectable: 3.0,
            noise_seed_offset: 1000,
            telegraph: TelegraphSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphSection {
    /// Edges below this coupling are left out, Hz.
    pub cutoff_hz: f64,
}

impl Default for GraphSection {
    fn default() -> Self {
        Self { cutoff_hz: 1.0 }
    }
}

/// Default input and output paths; the matching flags take precedence.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub couplings: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub freqs: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dft: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::usage(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::domain("internal", format!("config serialization: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        if !path.exists() {
            return Err(CliError::missing_input(path));
        }
        let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| CliError::usage(format!("{}: {}", path.display(), e.message)))
    }

    pub fn validate(&self) -> CliResult<()> {
        let usage = |e: sicspin::Error| CliError::usage(format!("invalid config: {e}"));
        self.lattice.params().validate().map_err(usage)?;
        self.constants.validate().map_err(usage)?;
        self.placement.validate().map_err(usage)?;
        self.calibration.grid.points().map_err(usage)?;
        if !(self.lattice.radius > 0.0) {
            return Err(CliError::usage("invalid config: lattice.radius must be > 0"));
        }
        if !(self.graph.cutoff_hz >= 0.0) {
            return Err(CliError::usage("invalid config: graph.cutoff_hz must be >= 0"));
        }
        if self.telegraph.window == 0 {
            return Err(CliError::usage("invalid config: telegraph.window must be >= 1"));
        }
        Ok(())
    }
}
