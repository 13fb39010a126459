//! `reproduce`: synthesize a cluster and its coupling table, place, refine,
//! analyze a telegraph trace and write every artifact plus a manifest. Output
//! bytes depend only on the configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sicspin::io;
use sicspin::lattice::{Lattice, Species};
use sicspin::placement::{equivalent_assignments, place_all, SymmetryGroup};
use sicspin::refine::refine;
use sicspin::synth::{emit_couplings, emit_telegraph, generate_cluster};
use sicspin::telegraph::analyze;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::graph::{export_graph, to_dot};
use crate::manifest::{FileDigest, Manifest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub n_solutions: usize,
    pub branch_history: Vec<usize>,
    pub symmetry_group_order: usize,
    /// Unique solution equal to the truth up to a point-group operation.
    pub recovered: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_hz2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementSummary {
    pub initial_residual_hz2: f64,
    pub residual_hz2: f64,
    pub mean_displacement_a: f64,
    pub max_displacement_a: f64,
    pub iterations: usize,
    pub n_parameters: usize,
    pub rank: usize,
    pub underdetermined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelegraphSummary {
    pub true_rate_bd_hz: f64,
    pub true_rate_db_hz: f64,
    pub rate_bd_hz: f64,
    pub rate_bd_stderr_hz: f64,
    pub rate_db_hz: f64,
    pub rate_db_stderr_hz: f64,
    pub switches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproduceReport {
    pub seed: u64,
    pub noise_seed: u64,
    pub n_spins: usize,
    pub n_si: usize,
    pub n_c: usize,
    pub n_measurements: usize,
    pub placement: PlacementSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refinement: Option<RefinementSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refinement_error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub telegraph: Option<TelegraphSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub telegraph_error: Option<String>,
    pub recovered: bool,
}

pub const OUTPUT_FILES: [&str; 9] = [
    "cluster_truth.json",
    "couplings.csv",
    "placement.json",
    "refinement.json",
    "refined_positions.csv",
    "graph.json",
    "graph.dot",
    "telegraph_trace.csv",
    "report.json",
];

fn io_err(p: &Path, e: std::io::Error) -> CliError {
    CliError::domain("io", format!("{}: {e}", p.display()))
}

/// Runs the pipeline into `out_dir` and writes `manifest.json` there. Returns
/// an error after writing everything when the truth was not recovered.
pub fn reproduce(cfg: &RunConfig, out_dir: &Path) -> CliResult<ReproduceReport> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let path = |name: &str| -> PathBuf { out_dir.join(name) };
    let k = &cfg.constants;
    let s = &cfg.synth;
    let lattice = Lattice::new(cfg.lattice.params())?;
    let noise_seed = cfg.seed.wrapping_add(s.noise_seed_offset);

    let cluster = generate_cluster(&lattice, s.n_si, s.n_c, &s.structure, &s.growth, k, cfg.seed)?;
    io::write_json(&path("cluster_truth.json"), &cluster)?;
    let ms = emit_couplings(&cluster, s.min_detectable, &s.noise, k, noise_seed)?;
    io::write_couplings(&path("couplings.csv"), &ms)?;

    let mut placement = PlacementSummary {
        error: None,
        n_solutions: 0,
        branch_history: Vec::new(),
        symmetry_group_order: 0,
        recovered: false,
        residual_hz2: None,
    };
    let mut refinement = None;
    let mut refinement_error = None;
    let placed = place_all(&ms, &lattice, &cfg.placement, k);
    match &placed {
        Ok(out) => {
            io::write_json(&path("placement.json"), out)?;
            placement.n_solutions = out.solutions.len();
            placement.branch_history = out.branch_history.clone();
            placement.symmetry_group_order = out.symmetry_group_order;
            let group = SymmetryGroup::find(&lattice, &lattice.origin(), &[Species::Si, Species::C].into_iter().collect());
            placement.recovered =
                out.solutions.len() == 1 && equivalent_assignments(&lattice, &group, &out.solutions[0].assignment, &cluster.truth);
            if let Some(sol) = out.solutions.first() {
                placement.residual_hz2 = Some(sol.residual);
                match refine(sol, &ms, &cfg.refine, k) {
                    Ok(r) => {
                        io::write_json(&path("refinement.json"), &r)?;
                        let f = std::fs::File::create(path("refined_positions.csv"))
                            .map_err(|e| io_err(&path("refined_positions.csv"), e))?;
                        io::write_refinement_csv(f, &r)?;
                        refinement = Some(RefinementSummary {
                            initial_residual_hz2: r.initial_residual,
                            residual_hz2: r.residual,
                            mean_displacement_a: r.displacements.mean,
                            max_displacement_a: r.displacements.max,
                            iterations: r.iterations,
                            n_parameters: r.n_parameters,
                            rank: r.rank,
                            underdetermined: r.underdetermined,
                        });
                    }
                    Err(e) => refinement_error = Some(e.to_string()),
                }
            }
        }
        Err(e) => placement.error = Some(e.to_string()),
    }

    let spins: BTreeMap<String, (Species, Option<[f64; 3]>)> = cluster
        .truth
        .iter()
        .map(|(l, site)| (l.clone(), (site.species, Some([site.position.x, site.position.y, site.position.z]))))
        .collect();
    let graph = export_graph(&ms, &spins, cfg.graph.cutoff_hz, &cfg.placement)?;
    io::write_json(&path("graph.json"), &graph)?;
    std::fs::write(path("graph.dot"), to_dot(&graph)).map_err(|e| io_err(&path("graph.dot"), e))?;

    let spec = &s.telegraph;
    let (trace, _) = emit_telegraph(spec, cfg.seed)?;
    let f = std::fs::File::create(path("telegraph_trace.csv")).map_err(|e| io_err(&path("telegraph_trace.csv"), e))?;
    trace.write_csv(std::io::BufWriter::new(f))?;
    let (telegraph, telegraph_error) = match analyze(&trace, &cfg.telegraph) {
        Ok(r) => (
            Some(TelegraphSummary {
                true_rate_bd_hz: spec.rate_bd,
                true_rate_db_hz: spec.rate_db,
                rate_bd_hz: r.rate_bright_to_dark.rate,
                rate_bd_stderr_hz: r.rate_bright_to_dark.stderr,
                rate_db_hz: r.rate_dark_to_bright.rate,
                rate_db_stderr_hz: r.rate_dark_to_bright.stderr,
                switches: r.switches,
            }),
            None,
        ),
        Err(e) => (None, Some(e.to_string())),
    };

    let report = ReproduceReport {
        seed: cfg.seed,
        noise_seed,
        n_spins: cluster.truth.len(),
        n_si: cluster.count(Species::Si),
        n_c: cluster.count(Species::C),
        n_measurements: ms.len(),
        recovered: placement.recovered,
        placement,
        refinement,
        refinement_error,
        telegraph,
        telegraph_error,
    };
    io::write_json(&path("report.json"), &report)?;

    let mut manifest = Manifest::new("reproduce", cfg)?;
    for name in OUTPUT_FILES {
        let p = path(name);
        if p.exists() {
            manifest.add_output(&p, out_dir)?;
        }
    }
    manifest.write(&path("manifest.json"))?;

    if let Err(e) = placed {
        return Err(CliError::from(e));
    }
    if !report.recovered {
        return Err(CliError::domain(
            "not_recovered",
            format!("placement gave {} solution(s) that do not reduce to the ground truth", report.placement.n_solutions),
        ));
    }
    Ok(report)
}

/// Compares output digests by name; lists every difference.
pub fn verify_outputs(expected: &[FileDigest], actual: &[FileDigest]) -> CliResult<()> {
    let a: BTreeMap<&str, &str> = actual.iter().map(|d| (d.path.as_str(), d.sha256.as_str())).collect();
    let e: BTreeMap<&str, &str> = expected.iter().map(|d| (d.path.as_str(), d.sha256.as_str())).collect();
    let mut diffs = Vec::new();
    for (name, h) in &e {
        match a.get(name) {
            Some(h2) if h2 == h => {}
            Some(_) => diffs.push(format!("{name} differs")),
            None => diffs.push(format!("{name} missing")),
        }
    }
    for name in a.keys().filter(|n| !e.contains_key(*n)) {
        diffs.push(format!("{name} unexpected"));
    }
    if diffs.is_empty() {
        Ok(())
    } else {
        Err(CliError::domain("verification_failed", diffs.join("; ")))
    }
}
