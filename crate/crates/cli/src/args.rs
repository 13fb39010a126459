use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "sicspin", version, about = "Nuclear spin cluster localization around a silicon vacancy in 4H-SiC")]
pub struct Cli {
    /// Run configuration (TOML). Flags override values from the file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Constants table (JSON with gamma_si29, gamma_c13, g_electron).
    #[arg(long, global = true, value_name = "FILE")]
    pub constants: Option<PathBuf>,
    /// Electron g-factor
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub g_electron: Option<f64>,
    /// Hz/T
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub gamma_si29: Option<f64>,
    /// Hz/T
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub gamma_c13: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List 4H-SiC lattice sites around the vacancy.
    Lattice(LatticeArgs),
    /// Place spins on lattice sites from a SEDOR coupling table.
    Place(PlaceArgs),
    /// Refine a placement off-lattice by least squares.
    Refine(RefineArgs),
    /// Field calibration against DFT hyperfine values, and g-factor arithmetic.
    Calibrate(CalibrateArgs),
    /// Switching rates from a photon-count time trace.
    Telegraph(TelegraphArgs),
    /// DDRF phase update, effective Rabi frequency and rotation angle.
    DdrfCalc(DdrfArgs),
    /// Synthetic clusters, coupling tables and telegraph traces.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Coupling graph as JSON and optionally DOT.
    ExportGraph(GraphArgs),
    /// Synthesize, place, refine and report in one deterministic run.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VacancyArg {
    K0,
    K1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpeciesArg {
    Si,
    C,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Perp,
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitModeArg {
    Mle,
    Histogram,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitialArg {
    Zero,
    One,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct LatticeArgs {
    /// Å
    #[arg(long)]
    pub radius: Option<f64>,
    /// Å
    #[arg(long)]
    pub a: Option<f64>,
    /// Å
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long, value_enum)]
    pub vacancy: Option<VacancyArg>,
    #[arg(long, value_enum)]
    pub species: Option<SpeciesArg>,
    /// CSV, or JSON when the name ends in `.json`. Stdout (CSV) when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct PlaceArgs {
    /// Coupling table (CSV or JSON).
    #[arg(long)]
    pub couplings: Option<PathBuf>,
    /// Default tolerance, Hz.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Per-pair tolerance, `A:B=hz`; repeatable.
    #[arg(long = "override", value_name = "A:B=HZ")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub anchor: Option<String>,
    /// Comma-separated placement order, anchor first.
    #[arg(long, value_delimiter = ',')]
    pub order: Vec<String>,
    /// Hz
    #[arg(long)]
    pub min_detectable: Option<f64>,
    #[arg(long)]
    pub max_branches: Option<usize>,
    /// Return every member of each symmetry class.
    #[arg(long)]
    pub all_symmetric: bool,
    /// Reject sites whose unmeasured couplings would have been observable.
    #[arg(long)]
    pub weak_exclusion: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    /// Placement output (all solutions) or a single solution, JSON.
    #[arg(long)]
    pub solution: Option<PathBuf>,
    /// Which solution of a placement output to refine.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[arg(long)]
    pub couplings: Option<PathBuf>,
    #[arg(long)]
    pub anchor: Option<String>,
    #[arg(long)]
    pub gauge: Option<String>,
    /// Weight residuals by 1/sigma.
    #[arg(long)]
    pub weighted: bool,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Refined coordinates and displacements as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct CalibrateArgs {
    /// Measured nuclear frequencies: label,f_a_hz,ms_a,f_b_hz,ms_b.
    #[arg(long)]
    pub freqs: Option<PathBuf>,
    /// DFT hyperfine table: label,A_zz_Hz,A_perp_Hz.
    #[arg(long)]
    pub dft: Option<PathBuf>,
    /// Bath spectrum (frequency_hz,amplitude) for an independent estimate.
    #[arg(long)]
    pub spectrum: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub bath_species: Option<SpeciesArg>,
    /// Nominal field, G.
    #[arg(long)]
    pub b_field: Option<f64>,
    /// G
    #[arg(long)]
    pub grid_min: Option<f64>,
    /// G
    #[arg(long)]
    pub grid_max: Option<f64>,
    /// G
    #[arg(long)]
    pub grid_step: Option<f64>,
    #[arg(long, value_enum)]
    pub metric: Option<MetricArg>,
    /// Use a known field correction (G) instead of scanning.
    #[arg(long)]
    pub delta_b: Option<f64>,
    /// Uncertainty of `--delta-b`, G.
    #[arg(long, default_value_t = 0.0)]
    pub delta_b_unc: f64,
    /// Rotational misalignment, degrees.
    #[arg(long)]
    pub rotation_deg: Option<f64>,
    /// Tilt misalignment, degrees.
    #[arg(long)]
    pub tilt_deg: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TelegraphArgs {
    /// Trace CSV: t_s,counts_per_s.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// counts/s
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Running-average window, bins.
    #[arg(long)]
    pub window: Option<usize>,
    /// Keep the truncated first and last dwell.
    #[arg(long)]
    pub include_censored: bool,
    #[arg(long, value_enum)]
    pub mode: Option<FitModeArg>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct DdrfArgs {
    /// Nuclear frequency with the electron in |0>, Hz.
    #[arg(long)]
    pub f0: f64,
    /// Nuclear frequency with the electron in |1>, Hz.
    #[arg(long)]
    pub f1: f64,
    /// RF drive frequency, Hz.
    #[arg(long)]
    pub f_rf: f64,
    /// Half the pulse spacing, s.
    #[arg(long)]
    pub tau: f64,
    /// Bare RF Rabi frequency, Hz.
    #[arg(long)]
    pub rabi: Option<f64>,
    /// Number of pulses N (even).
    #[arg(long, default_value_t = 2)]
    pub n_pulses: u32,
    /// Programmed phase increment to check against resonance, rad.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Target rotation angle; reports the Rabi frequency that gives it, rad.
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long, value_enum, default_value = "zero")]
    pub initial: InitialArg,
    /// Print JSON instead of `key = value` lines.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// Ground-truth cluster on the lattice (JSON).
    Cluster(SynthClusterArgs),
    /// Noisy coupling table for a cluster.
    Couplings(SynthCouplingsArgs),
    /// Random telegraph photon-count trace.
    Telegraph(SynthTelegraphArgs),
}

#[derive(Debug, Args)]
pub struct SynthClusterArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_si: Option<usize>,
    #[arg(long)]
    pub n_c: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthCouplingsArgs {
    /// Cluster JSON from `synth cluster`.
    #[arg(long)]
    pub cluster: PathBuf,
    /// Noise seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Gaussian noise, Hz.
    #[arg(long, conflicts_with = "uniform")]
    pub sigma: Option<f64>,
    /// Uniform noise half-width, Hz.
    #[arg(long)]
    pub uniform: Option<f64>,
    /// Hz
    #[arg(long)]
    pub min_detectable: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthTelegraphArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Bright to dark rate, Hz.
    #[arg(long)]
    pub rate_bd: Option<f64>,
    /// Dark to bright rate, Hz.
    #[arg(long)]
    pub rate_db: Option<f64>,
    /// s
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct GraphArgs {
    #[arg(long)]
    pub couplings: Option<PathBuf>,
    /// Node positions from a placement output.
    #[arg(long, conflicts_with_all = ["cluster", "refined"])]
    pub solution: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    /// Node positions from a synthetic cluster.
    #[arg(long, conflicts_with = "refined")]
    pub cluster: Option<PathBuf>,
    /// Node positions from a refinement result.
    #[arg(long)]
    pub refined: Option<PathBuf>,
    /// Hz
    #[arg(long)]
    pub cutoff: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub dot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// Rerun the configuration recorded in a manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Compare the new outputs with the digests in `--manifest`.
    #[arg(long, requires = "manifest")]
    pub verify: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}
