//! One runner per subcommand. Each reads its inputs, applies flags over the
//! run configuration, writes its outputs and, when it writes files, a manifest
//! next to the primary output.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sicspin::calibrate::{
    bath_center_shift, combine_scans, dft_comparison_report, field_scan_min_aperp, g_factor_from_delta_b,
    hyperfine_at_offset, BathShift, CalibrationResult, DftComparison, MismatchMetric,
};
use sicspin::io;
use sicspin::lattice::{build_lattice, write_sites_csv, sites_to_json, Lattice, Species, VacancySite};
use sicspin::placement::{pair_key, place_all, CouplingMeasurement, PlacementOutcome, PlacementSolution};
use sicspin::refine::{refine, RefinementResult};
use sicspin::sequences::{
    ddrf_phase_update, ddrf_resonance_condition, effective_rabi, rabi_for_rotation, rotation_angle, InitialElectron,
    SequenceParams,
};
use sicspin::spinphys::{transverse_field_from_misalignment, HyperfineEstimate};
use sicspin::synth::{emit_couplings, emit_telegraph, generate_cluster, NoiseModel, SyntheticCluster};
use sicspin::telegraph::{analyze, FitMode, TimeTrace};

use crate::args::*;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::graph::{export_graph, to_dot};
use crate::manifest::{manifest_path_for, Manifest};
use crate::reproduce::{reproduce, verify_outputs};

/// Effective configuration: defaults, then `--config`, then `--constants`,
/// then the constant flags.
pub fn resolve_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    apply_constant_flags(cli, &mut cfg)?;
    Ok(cfg)
}

fn apply_constant_flags(cli: &Cli, cfg: &mut RunConfig) -> CliResult<()> {
    if let Some(p) = &cli.constants {
        cfg.constants = read_input(p, io::read_json)?;
    }
    if let Some(g) = cli.g_electron {
        cfg.constants.g_electron = g;
    }
    if let Some(v) = cli.gamma_si29 {
        cfg.constants.gamma_si29 = v;
    }
    if let Some(v) = cli.gamma_c13 {
        cfg.constants.gamma_c13 = v;
    }
    cfg.constants.validate().map_err(|e| CliError::usage(format!("invalid constants: {e}")))
}

pub fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = resolve_config(&cli)?;
    match &cli.command {
        Command::Lattice(a) => cmd_lattice(&mut cfg, a),
        Command::Place(a) => cmd_place(&mut cfg, a),
        Command::Refine(a) => cmd_refine(&mut cfg, a),
        Command::Calibrate(a) => cmd_calibrate(&mut cfg, a),
        Command::Telegraph(a) => cmd_telegraph(&mut cfg, a),
        Command::DdrfCalc(a) => cmd_ddrf(a),
        Command::Synth(SynthCommand::Cluster(a)) => cmd_synth_cluster(&mut cfg, a),
        Command::Synth(SynthCommand::Couplings(a)) => cmd_synth_couplings(&mut cfg, a),
        Command::Synth(SynthCommand::Telegraph(a)) => cmd_synth_telegraph(&mut cfg, a),
        Command::ExportGraph(a) => cmd_export_graph(&mut cfg, a),
        Command::Reproduce(a) => cmd_reproduce(&cli, cfg, a),
    }
}

/// Reads a user-supplied file; a missing file or a parse failure is a usage error.
pub fn read_input<T>(path: &Path, parse: impl FnOnce(&Path) -> sicspin::Result<T>) -> CliResult<T> {
    if !path.is_file() {
        return Err(CliError::missing_input(path));
    }
    parse(path).map_err(|e| CliError::input(path, e))
}

fn required(flag: Option<PathBuf>, from_config: &Option<PathBuf>, name: &str) -> CliResult<PathBuf> {
    flag.or_else(|| from_config.clone())
        .ok_or_else(|| CliError::usage(format!("--{name} is required (or set paths.{name} in the config)")))
}

/// Exact label if present, else the unique case-insensitive match.
fn resolve_label<'a>(given: &str, labels: impl IntoIterator<Item = &'a str>) -> String {
    let matches: Vec<&str> = labels.into_iter().filter(|l| l.eq_ignore_ascii_case(given)).collect();
    if matches.contains(&given) || matches.len() != 1 {
        given.to_string()
    } else {
        matches[0].to_string()
    }
}

fn measurement_labels(ms: &[CouplingMeasurement]) -> impl Iterator<Item = &str> {
    ms.iter().flat_map(|m| [m.spin_a.as_str(), m.spin_b.as_str()])
}

fn species_of(s: SpeciesArg) -> Species {
    match s {
        SpeciesArg::Si => Species::Si,
        SpeciesArg::C => Species::C,
    }
}

fn write_text(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::domain("io", format!("{}: {e}", p.display()))),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes()).and_then(|_| so.flush()).map_err(|e| CliError::domain("io", e.to_string()))
        }
    }
}

fn write_json_out<T: Serialize>(out: Option<&Path>, value: &T) -> CliResult<()> {
    write_text(out, &io::to_json_string(value)?)
}

/// Manifest next to `outputs[0]`; nothing when output went to stdout.
fn finish(command: &str, cfg: &RunConfig, inputs: &[&Path], outputs: &[&Path]) -> CliResult<()> {
    let Some(primary) = outputs.first() else {
        return Ok(());
    };
    let mut m = Manifest::new(command, cfg)?;
    for p in inputs {
        m.add_input(p)?;
    }
    let base = primary.parent().unwrap_or(Path::new(""));
    for p in outputs {
        m.add_output(p, base)?;
    }
    m.write(&manifest_path_for(primary))
}

fn cmd_lattice(cfg: &mut RunConfig, a: &LatticeArgs) -> CliResult<()> {
    cfg.command = Some("lattice".into());
    if let Some(v) = a.radius {
        cfg.lattice.radius = v;
    }
    if let Some(v) = a.a {
        cfg.lattice.a = v;
    }
    if let Some(v) = a.c {
        cfg.lattice.c = v;
    }
    if let Some(v) = a.vacancy {
        cfg.lattice.vacancy = match v {
            VacancyArg::K0 => VacancySite::K0,
            VacancyArg::K1 => VacancySite::K1,
        };
    }
    cfg.validate()?;
    let mut sites = build_lattice(cfg.lattice.params(), cfg.lattice.radius)?;
    if let Some(s) = a.species {
        sites.retain(|x| x.species == species_of(s));
    }
    let json = a.out.as_deref().is_some_and(|p| p.extension().is_some_and(|e| e == "json"));
    let text = if json {
        io::to_json_string(&sites_to_json(&sites))?
    } else {
        let mut buf = Vec::new();
        write_sites_csv(&mut buf, &sites)?;
        String::from_utf8(buf).map_err(|e| CliError::domain("internal", e.to_string()))?
    };
    write_text(a.out.as_deref(), &text)?;
    eprintln!("{} sites within {} Å", sites.len(), cfg.lattice.radius);
    finish("lattice", cfg, &[], a.out.as_deref().into_iter().collect::<Vec<_>>().as_slice())
}

fn parse_override(s: &str) -> CliResult<(String, f64)> {
    let bad = || CliError::usage(format!("bad --override {s:?}; expected A:B=hz"));
    let (pair, v) = s.split_once('=').ok_or_else(bad)?;
    let (a, b) = pair.split_once(':').ok_or_else(bad)?;
    let v: f64 = v.trim().parse().map_err(|_| bad())?;
    Ok((pair_key(a.trim(), b.trim()), v))
}

fn cmd_place(cfg: &mut RunConfig, a: &PlaceArgs) -> CliResult<()> {
    cfg.command = Some("place".into());
    let path = required(a.couplings.clone(), &cfg.paths.couplings, "couplings")?;
    let ms = read_input(&path, io::read_couplings)?;
    let p = &mut cfg.placement;
    if let Some(t) = a.tolerance {
        p.tolerance_default = t;
    }
    for o in &a.overrides {
        let (k, v) = parse_override(o)?;
        p.tolerance_overrides.insert(k, v);
    }
    if let Some(anchor) = &a.anchor {
        p.anchor = resolve_label(anchor, measurement_labels(&ms));
    }
    if !a.order.is_empty() {
        p.placement_order = a.order.clone();
    }
    if let Some(v) = a.min_detectable {
        p.min_detectable = v;
    }
    if let Some(v) = a.max_branches {
        p.max_branches = v;
    }
    if a.all_symmetric {
        p.break_symmetry = false;
    }
    if a.weak_exclusion {
        p.weak_coupling_exclusion = true;
    }
    cfg.validate()?;
    let lattice = Lattice::new(cfg.lattice.params())?;
    let outcome = place_all(&ms, &lattice, &cfg.placement, &cfg.constants)?;
    eprintln!(
        "{} spins, {} solution(s), branch history {:?}",
        outcome.order.len(),
        outcome.solutions.len(),
        outcome.branch_history
    );
    write_json_out(a.out.as_deref(), &outcome)?;
    finish("place", cfg, &[&path], a.out.as_deref().into_iter().collect::<Vec<_>>().as_slice())
}

/// A placement output (picks `index`) or a bare solution.
pub fn load_solution(path: &Path, index: usize) -> CliResult<PlacementSolution> {
    let v: serde_json::Value = read_input(path, io::read_json)?;
    let parse_err = |e: serde_json::Error| CliError::usage(format!("{}: {e}", path.display()));
    if v.get("solutions").is_some() {
        let out: PlacementOutcome = serde_json::from_value(v).map_err(parse_err)?;
        let n = out.solutions.len();
        out.solutions.into_iter().nth(index).ok_or_else(|| {
            CliError::usage(format!("{}: solution index {index} out of range ({n} solutions)", path.display()))
        })
    } else {
        serde_json::from_value(v).map_err(parse_err)
    }
}

fn cmd_refine(cfg: &mut RunConfig, a: &RefineArgs) -> CliResult<()> {
    cfg.command = Some("refine".into());
    let sol_path = required(a.solution.clone(), &cfg.paths.solution, "solution")?;
    let ms_path = required(a.couplings.clone(), &cfg.paths.couplings, "couplings")?;
    let sol = load_solution(&sol_path, a.index)?;
    let ms = read_input(&ms_path, io::read_couplings)?;
    let r = &mut cfg.refine;
    if let Some(v) = &a.anchor {
        r.anchor = resolve_label(v, sol.assignment.keys().map(String::as_str));
    } else {
        r.anchor = resolve_label(&r.anchor, sol.assignment.keys().map(String::as_str));
    }
    if let Some(v) = &a.gauge {
        r.gauge_label = Some(resolve_label(v, sol.assignment.keys().map(String::as_str)));
    }
    if a.weighted {
        r.weighted = true;
    }
    if let Some(v) = a.max_iterations {
        r.max_iterations = v;
    }
    cfg.validate()?;
    let result = refine(&sol, &ms, &cfg.refine, &cfg.constants)?;
    eprintln!(
        "residual {:.4e} -> {:.4e} Hz², mean displacement {:.3} Å, max {:.3} Å",
        result.initial_residual, result.residual, result.displacements.mean, result.displacements.max
    );
    write_json_out(a.out.as_deref(), &result)?;
    if let Some(p) = &a.csv {
        let f = std::fs::File::create(p).map_err(|e| CliError::domain("io", format!("{}: {e}", p.display())))?;
        io::write_refinement_csv(f, &result)?;
    }
    let outputs: Vec<&Path> = a.out.as_deref().into_iter().chain(a.csv.as_deref()).collect();
    finish("refine", cfg, &[&sol_path, &ms_path], &outputs)
}

#[derive(Debug, Serialize)]
struct CalibrateReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    calibration: Option<CalibrationResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bath: Option<BathShift>,
    /// Hyperfine values recovered at the corrected field against DFT.
    #[serde(skip_serializing_if = "Option::is_none")]
    dft_comparison: Option<DftComparison>,
    #[serde(skip_serializing_if = "Option::is_none")]
    transverse_field_g: Option<f64>,
}

fn cmd_calibrate(cfg: &mut RunConfig, a: &CalibrateArgs) -> CliResult<()> {
    cfg.command = Some("calibrate".into());
    if let Some(v) = a.b_field {
        cfg.field.b_z = v;
    }
    let grid = &mut cfg.calibration.grid;
    if let Some(v) = a.grid_min {
        grid.min = v;
    }
    if let Some(v) = a.grid_max {
        grid.max = v;
    }
    if let Some(v) = a.grid_step {
        grid.step = v;
    }
    if let Some(m) = a.metric {
        cfg.calibration.metric = match m {
            MetricArg::Perp => MismatchMetric::Perp,
            MetricArg::Joint => MismatchMetric::Joint,
        };
    }
    if let Some(s) = a.bath_species {
        cfg.calibration.bath_species = species_of(s);
    }
    cfg.validate()?;
    let k = cfg.constants;
    let field = cfg.field.field(&k);
    let b = field.b_z;
    let mut inputs: Vec<PathBuf> = Vec::new();
    let mut report = CalibrateReport { calibration: None, bath: None, dft_comparison: None, transverse_field_g: None };

    if a.rotation_deg.is_some() || a.tilt_deg.is_some() {
        report.transverse_field_g =
            Some(transverse_field_from_misalignment(b, a.rotation_deg.unwrap_or(0.0), a.tilt_deg.unwrap_or(0.0)));
    }

    let spectrum_path = a.spectrum.clone().or_else(|| cfg.paths.spectrum.clone());
    if let Some(p) = &spectrum_path {
        let spec = read_input(p, |p| io::read_file(p, io::read_spectrum))?;
        report.bath = Some(bath_center_shift(&spec, &k.nucleus(cfg.calibration.bath_species), b)?);
        inputs.push(p.clone());
    }

    if let Some(db) = a.delta_b {
        report.calibration = Some(g_factor_from_delta_b(db, a.delta_b_unc, b, k.g_electron)?);
    } else {
        let freqs_path = a.freqs.clone().or_else(|| cfg.paths.freqs.clone());
        let dft_path = a.dft.clone().or_else(|| cfg.paths.dft.clone());
        match (freqs_path, dft_path) {
            (Some(fp), Some(dp)) => {
                let freqs = read_input(&fp, |p| io::read_file(p, io::read_frequency_table))?;
                let dft = read_input(&dp, |p| io::read_file(p, io::read_hyperfine_table))?;
                let mut scans = Vec::new();
                for f in freqs.iter().filter(|f| dft.contains_key(&f.label)) {
                    let sp = k.nucleus(cfg.placement.species_of(&f.label)?);
                    scans.push(field_scan_min_aperp(f, &dft[&f.label], &field, &sp, &cfg.calibration.grid, cfg.calibration.metric)?);
                }
                let cal = combine_scans(scans, report.bath.as_ref().map(|x| x.delta_b), b, k.g_electron)?;
                let mut exp: BTreeMap<String, HyperfineEstimate> = BTreeMap::new();
                for f in &freqs {
                    let sp = k.nucleus(cfg.placement.species_of(&f.label)?);
                    exp.insert(f.label.clone(), hyperfine_at_offset(f, &field, &sp, cal.delta_b)?);
                }
                report.dft_comparison = Some(dft_comparison_report(&exp, &dft));
                report.calibration = Some(cal);
                inputs.push(fp);
                inputs.push(dp);
            }
            (None, None) if report.bath.is_some() || report.transverse_field_g.is_some() => {}
            _ => {
                return Err(CliError::usage("calibrate needs --freqs and --dft, or --delta-b"));
            }
        }
    }
    if let Some(c) = &report.calibration {
        eprintln!("delta_B = {:.3} ± {:.3} G, g = {:.5} ± {:.5}", c.delta_b, c.delta_b_uncertainty, c.g_factor, c.g_uncertainty);
    }
    write_json_out(a.out.as_deref(), &report)?;
    let inputs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    finish("calibrate", cfg, &inputs, a.out.as_deref().into_iter().collect::<Vec<_>>().as_slice())
}

fn cmd_telegraph(cfg: &mut RunConfig, a: &TelegraphArgs) -> CliResult<()> {
    cfg.command = Some("telegraph".into());
    let path = required(a.trace.clone(), &cfg.paths.trace, "trace")?;
    let trace = read_input(&path, |p| io::read_file(p, TimeTrace::read_csv))?;
    let t = &mut cfg.telegraph;
    if let Some(v) = a.threshold {
        t.threshold = v;
    }
    if let Some(v) = a.window {
        t.window = v;
    }
    if a.include_censored {
        t.include_censored = true;
    }
    if let Some(m) = a.mode {
        t.mode = match m {
            FitModeArg::Mle => FitMode::Mle,
            FitModeArg::Histogram => FitMode::Histogram,
        };
    }
    cfg.validate()?;
    let r = analyze(&trace, &cfg.telegraph)?;
    eprintln!(
        "bright->dark {:.4} ± {:.4} Hz, dark->bright {:.4} ± {:.4} Hz, {} switches",
        r.rate_bright_to_dark.rate,
        r.rate_bright_to_dark.stderr,
        r.rate_dark_to_bright.rate,
        r.rate_dark_to_bright.stderr,
        r.switches
    );
    write_json_out(a.out.as_deref(), &r)?;
    finish("telegraph", cfg, &[&path], a.out.as_deref().into_iter().collect::<Vec<_>>().as_slice())
}

#[derive(Debug, Serialize)]
struct DdrfReport {
    f0_hz: f64,
    f1_hz: f64,
    f_rf_hz: f64,
    tau_s: f64,
    n_pulses: u32,
    /// RF phase step between blocks, rad.
    phase_update_rad: f64,
    /// Effective Rabi frequency per hertz of bare Rabi frequency.
    effective_rabi_factor: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    effective_rabi_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rotation_angle_rad: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    resonance_mismatch_rad: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rabi_for_theta_hz: Option<f64>,
}

fn cmd_ddrf(a: &DdrfArgs) -> CliResult<()> {
    let initial = match a.initial {
        InitialArg::Zero => InitialElectron::Zero,
        InitialArg::One => InitialElectron::One,
    };
    if !(a.tau > 0.0) {
        return Err(CliError::usage(format!("--tau must be > 0, got {}", a.tau)));
    }
    let mut r = DdrfReport {
        f0_hz: a.f0,
        f1_hz: a.f1,
        f_rf_hz: a.f_rf,
        tau_s: a.tau,
        n_pulses: a.n_pulses,
        phase_update_rad: ddrf_phase_update(a.f0, a.f1, a.f_rf, a.tau),
        effective_rabi_factor: effective_rabi(1.0, a.f0, a.f1, a.f_rf, a.tau),
        effective_rabi_hz: None,
        rotation_angle_rad: None,
        resonance_mismatch_rad: None,
        rabi_for_theta_hz: None,
    };
    if let Some(rabi) = a.rabi {
        r.effective_rabi_hz = Some(effective_rabi(rabi, a.f0, a.f1, a.f_rf, a.tau));
        let p = SequenceParams {
            tau: a.tau,
            n_pulses: a.n_pulses,
            f_rf: a.f_rf,
            rabi,
            f0: a.f0,
            f1: a.f1,
            phase_increment: a.delta.unwrap_or(r.phase_update_rad),
        };
        r.rotation_angle_rad = Some(rotation_angle(&p, initial)?);
    }
    if let Some(d) = a.delta {
        r.resonance_mismatch_rad = Some(ddrf_resonance_condition(d, a.f0, a.f1, a.f_rf, a.tau));
    }
    if let Some(theta) = a.theta {
        let sign = if initial == InitialElectron::One { -1.0 } else { 1.0 };
        r.rabi_for_theta_hz = Some(rabi_for_rotation(sign * theta, a.n_pulses, a.f0, a.f1, a.f_rf, a.tau)?);
    }
    if a.json {
        return write_json_out(None, &r);
    }
    let v = serde_json::to_value(&r).map_err(sicspin::Error::from)?;
    let mut text = String::new();
    if let serde_json::Value::Object(map) = v {
        for (k, v) in map {
            text.push_str(&format!("{k} = {v}\n"));
        }
    }
    write_text(None, &text)
}

fn cmd_synth_cluster(cfg: &mut RunConfig, a: &SynthClusterArgs) -> CliResult<()> {
    cfg.command = Some("synth cluster".into());
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.n_si {
        cfg.synth.n_si = n;
    }
    if let Some(n) = a.n_c {
        cfg.synth.n_c = n;
    }
    cfg.validate()?;
    let lattice = Lattice::new(cfg.lattice.params())?;
    let s = &cfg.synth;
    let cl = generate_cluster(&lattice, s.n_si, s.n_c, &s.structure, &s.growth, &cfg.constants, cfg.seed)?;
    write_json_out(a.out.as_deref(), &cl)?;
    finish("synth cluster", cfg, &[], a.out.as_deref().into_iter().collect::<Vec<_>>().as_slice())
}

fn cmd_synth_couplings(cfg: &mut RunConfig, a: &SynthCouplingsArgs) -> CliResult<()> {
    cfg.command = Some("synth couplings".into());
    let cl: SyntheticCluster = read_input(&a.cluster, io::read_json)?;
    let seed = a.seed.unwrap_or(cl.seed + cfg.synth.noise_seed_offset);
    cfg.seed = seed.wrapping_sub(cfg.synth.noise_seed_offset);
    if let Some(s) = a.sigma {
        cfg.synth.noise = if s == 0.0 { NoiseModel::None } else { NoiseModel::Gaussian { sigma: s } };
    }
    if let Some(h) = a.uniform {
        cfg.synth.noise = NoiseModel::Uniform { half_width: h };
    }
    if let Some(v) = a.min_detectable {
        cfg.synth.min_detectable = v;
    }
    cfg.validate()?;
    let ms = emit_couplings(&cl, cfg.synth.min_detectable, &cfg.synth.noise, &cfg.constants, seed)?;
    eprintln!("{} couplings above {} Hz", ms.len(), cfg.synth.min_detectable);
    match &a.out {
        Some(p) => io::write_couplings(p, &ms)?,
        None => io::write_couplings_csv(std::io::stdout().lock(), &ms)?,
    }
    finish("synth couplings", cfg, &[&a.cluster], a.out.as_deref().into_iter().collect::<Vec<_>>().as_slice())
}

fn cmd_synth_telegraph(cfg: &mut RunConfig, a: &SynthTelegraphArgs) -> CliResult<()> {
    cfg.command = Some("synth telegraph".into());
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let t = &mut cfg.synth.telegraph;
    if let Some(v) = a.rate_bd {
        t.rate_bd = v;
    }
    if let Some(v) = a.rate_db {
        t.rate_db = v;
    }
    if let Some(v) = a.duration {
        t.duration = v;
    }
    cfg.validate()?;
    let (trace, _) = emit_telegraph(&cfg.synth.telegraph, cfg.seed)?;
    match &a.out {
        Some(p) => {
            let f = std::fs::File::create(p).map_err(|e| CliError::domain("io", format!("{}: {e}", p.display())))?;
            trace.write_csv(std::io::BufWriter::new(f))?;
        }
        None => trace.write_csv(std::io::stdout().lock())?,
    }
    finish("synth telegraph", cfg, &[], a.out.as_deref().into_iter().collect::<Vec<_>>().as_slice())
}

fn cmd_export_graph(cfg: &mut RunConfig, a: &GraphArgs) -> CliResult<()> {
    cfg.command = Some("export-graph".into());
    if let Some(c) = a.cutoff {
        cfg.graph.cutoff_hz = c;
    }
    cfg.validate()?;
    let mut inputs: Vec<PathBuf> = Vec::new();
    let ms = match a.couplings.clone().or_else(|| cfg.paths.couplings.clone()) {
        Some(p) => {
            let ms = read_input(&p, io::read_couplings)?;
            inputs.push(p);
            ms
        }
        None => Vec::new(),
    };
    let mut spins: BTreeMap<String, (Species, Option<[f64; 3]>)> = BTreeMap::new();
    if let Some(p) = &a.solution {
        let sol = load_solution(p, a.index)?;
        for (l, s) in &sol.assignment {
            spins.insert(l.clone(), (s.species, Some([s.position.x, s.position.y, s.position.z])));
        }
        inputs.push(p.clone());
    } else if let Some(p) = &a.cluster {
        let cl: SyntheticCluster = read_input(p, io::read_json)?;
        for (l, s) in &cl.truth {
            spins.insert(l.clone(), (s.species, Some([s.position.x, s.position.y, s.position.z])));
        }
        inputs.push(p.clone());
    } else if let Some(p) = &a.refined {
        let r: RefinementResult = read_input(p, io::read_json)?;
        for (l, pos) in &r.positions {
            spins.insert(l.clone(), (cfg.placement.species_of(l)?, Some([pos.x, pos.y, pos.z])));
        }
        inputs.push(p.clone());
    }
    if ms.is_empty() && spins.is_empty() {
        return Err(CliError::usage("export-graph needs --couplings or a node source (--solution, --cluster, --refined)"));
    }
    let g = export_graph(&ms, &spins, cfg.graph.cutoff_hz, &cfg.placement)?;
    eprintln!("{} nodes, {} edges at or above {} Hz", g.nodes.len(), g.edges.len(), g.cutoff_hz);
    write_json_out(a.out.as_deref(), &g)?;
    if let Some(d) = &a.dot {
        write_text(Some(d), &to_dot(&g))?;
    }
    let inputs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    let outputs: Vec<&Path> = a.out.as_deref().into_iter().chain(a.dot.as_deref()).collect();
    finish("export-graph", cfg, &inputs, &outputs)
}

fn cmd_reproduce(cli: &Cli, mut cfg: RunConfig, a: &ReproduceArgs) -> CliResult<()> {
    let recorded = match &a.manifest {
        Some(p) => {
            if cli.config.is_some() {
                return Err(CliError::usage("use either --config or --manifest with reproduce, not both"));
            }
            let m = Manifest::load(p)?;
            cfg = m.config.clone();
            apply_constant_flags(cli, &mut cfg)?;
            Some(m)
        }
        None => None,
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.command = Some("reproduce".into());
    cfg.validate()?;
    std::fs::create_dir_all(&a.out).map_err(|e| CliError::domain("io", format!("{}: {e}", a.out.display())))?;
    let run = reproduce(&cfg, &a.out);
    if let (true, Some(m)) = (a.verify, &recorded) {
        let fresh = Manifest::load(&a.out.join("manifest.json"))?;
        verify_outputs(&m.outputs, &fresh.outputs)?;
        eprintln!("verified {} outputs against {}", m.outputs.len(), a.manifest.as_ref().unwrap().display());
    }
    let report = run?;
    eprintln!(
        "seed {}: {} spins, {} couplings, recovered = {}",
        report.seed, report.n_spins, report.n_measurements, report.recovered
    );
    Ok(())
}
