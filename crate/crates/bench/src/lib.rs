//! Workloads shared by the benchmarks.

use nalgebra::Vector3;
use sicspin::hamiltonian::{Nucleus, SpinSystemSpec, DEFAULT_D, EXPERIMENT_FIELD};
use sicspin::lattice::{Lattice, LatticeParams};
use sicspin::placement::{place_all, CouplingMeasurement, PlacementConfig, PlacementSolution};
use sicspin::spinphys::{Constants, FieldConfig, HyperfineTensor};
use sicspin::synth::{emit_couplings, generate_cluster, register_structure, GrowthConfig, NoiseModel, SyntheticCluster};

pub struct Workload {
    pub lattice: Lattice,
    pub constants: Constants,
    pub cluster: SyntheticCluster,
    pub measurements: Vec<CouplingMeasurement>,
    pub config: PlacementConfig,
}

/// 22 Si + 3 C cluster with 0.2 Hz Gaussian noise (noise seed `seed + 1000`).
pub fn register25(seed: u64) -> Workload {
    let lattice = Lattice::new(LatticeParams::default()).expect("default lattice");
    let constants = Constants::default();
    let (si, c, structure) = register_structure();
    let cluster = generate_cluster(&lattice, si, c, &structure, &GrowthConfig::default(), &constants, seed)
        .expect("cluster");
    let noise = NoiseModel::Gaussian { sigma: 0.2 };
    let measurements = emit_couplings(&cluster, 3.0, &noise, &constants, seed + 1000).expect("couplings");
    Workload { lattice, constants, cluster, measurements, config: PlacementConfig::default() }
}

impl Workload {
    pub fn solution(&self) -> PlacementSolution {
        let out = place_all(&self.measurements, &self.lattice, &self.config, &self.constants).expect("placement");
        out.solutions.into_iter().next().expect("at least one solution")
    }

    /// Separation vectors of every truth pair, Å.
    pub fn separations(&self) -> Vec<Vector3<f64>> {
        let p: Vec<Vector3<f64>> = self.cluster.truth.values().map(|s| s.position).collect();
        (0..p.len()).flat_map(|i| (i + 1..p.len()).map(move |j| (i, j))).map(|(i, j)| p[j] - p[i]).collect()
    }
}

/// Strongly coupled 29Si pair next to the vacancy, with a 2.3 G transverse field.
pub fn strong_pair(constants: &Constants) -> SpinSystemSpec {
    let p = LatticeParams::default();
    let n = |hf| Nucleus { species: constants.si29(), hyperfine: hf };
    SpinSystemSpec::with_geometry(
        DEFAULT_D,
        FieldConfig::aligned(EXPERIMENT_FIELD).with_transverse(2.3, 0.0),
        [n(HyperfineTensor::new(-4.8e6, 0.0, 0.0)), n(HyperfineTensor::from_parallel_perp(200e3, 80e3, 0.7))],
        &Vector3::new(p.a / 3f64.sqrt(), 0.0, -p.c / 4.0),
    )
    .expect("pair spec")
}
