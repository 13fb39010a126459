//! Ground-truth spin clusters on the lattice and synthetic measurement data.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::Vector3;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::SubspaceMode;
use crate::lattice::{Lattice, LatticeSite, SiteIndex, Species};
use crate::placement::CouplingMeasurement;
use crate::spinphys::{dipolar_coupling_alpha, dipolar_prefactor, Constants};
use crate::telegraph::TimeTrace;

/// Name of the generator recorded in output metadata.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9)";

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    None,
    Gaussian { sigma: f64 },
    Uniform { half_width: f64 },
}

impl NoiseModel {
    pub fn scale(&self) -> f64 {
        match self {
            NoiseModel::None => 0.0,
            NoiseModel::Gaussian { sigma } => *sigma,
            NoiseModel::Uniform { half_width } => *half_width,
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> Result<f64> {
        Ok(match self {
            NoiseModel::None => 0.0,
            NoiseModel::Gaussian { sigma } => Normal::new(0.0, *sigma)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?
                .sample(rng),
            NoiseModel::Uniform { half_width } => {
                if *half_width == 0.0 {
                    0.0
                } else {
                    rng.random_range(-half_width..=*half_width)
                }
            }
        })
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::Gaussian { sigma: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClusterStructure {
    /// Spins anywhere within `radius` of the vacancy, each coupled to the
    /// existing set.
    Random { radius: f64 },
    /// `clusters` sub-clusters of `min_size..=max_size` spins each; the first
    /// is grown around the anchor.
    Clustered { clusters: usize, min_size: usize, max_size: usize },
}

/// Growth rules for the generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrowthConfig {
    /// A coupling counts toward connectivity above this frequency, Hz.
    pub link_threshold: f64,
    /// Required number of links to the spins already present (capped by their number).
    pub min_links: usize,
    /// Links required for the first spin of a new sub-cluster.
    pub seed_links: usize,
    /// Shell (Å) around a member of the current sub-cluster for new members.
    pub member_shell: (f64, f64),
    /// Shell (Å) around any existing spin for a new sub-cluster seed.
    pub seed_shell: (f64, f64),
    /// Closest allowed approach to the vacancy, Å.
    pub min_vacancy_distance: f64,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        Self {
            link_threshold: 4.0,
            min_links: 3,
            seed_links: 2,
            member_shell: (3.0, 6.0),
            seed_shell: (6.0, 10.0),
            min_vacancy_distance: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCluster {
    pub truth: BTreeMap<String, LatticeSite>,
    /// Labels in generation order (anchor first).
    pub generation_order: Vec<String>,
    /// Sub-cluster index of every label.
    pub subcluster: BTreeMap<String, usize>,
    pub seed: u64,
    pub rng: String,
}

impl SyntheticCluster {
    pub fn species(&self, label: &str) -> Option<Species> {
        self.truth.get(label).map(|s| s.species)
    }

    pub fn count(&self, species: Species) -> usize {
        self.truth.values().filter(|s| s.species == species).count()
    }
}

/// 25-spin register preset: 22 ²⁹Si and 3 ¹³C in 4 sub-clusters of 5 to 7 spins.
pub fn register_structure() -> (usize, usize, ClusterStructure) {
    (22, 3, ClusterStructure::Clustered { clusters: 4, min_size: 5, max_size: 7 })
}

fn partition_sizes<R: Rng>(n: usize, k: usize, lo: usize, hi: usize, rng: &mut R) -> Result<Vec<usize>> {
    if k == 0 || n < k * lo || n > k * hi {
        return Err(Error::InvalidParameter(format!(
            "{n} spins cannot form {k} sub-clusters of {lo}..={hi}"
        )));
    }
    let mut sizes = vec![lo; k];
    let mut rest = n - k * lo;
    while rest > 0 {
        let open: Vec<usize> = (0..k).filter(|&i| sizes[i] < hi).collect();
        let i = *open.choose(rng).expect("capacity checked");
        sizes[i] += 1;
        rest -= 1;
    }
    Ok(sizes)
}

struct Grower<'a> {
    lattice: &'a Lattice,
    constants: &'a Constants,
    growth: GrowthConfig,
    sites: Vec<SiteIndex>,
    occupied: BTreeSet<SiteIndex>,
}

impl Grower<'_> {
    fn links(&self, site: &SiteIndex) -> usize {
        let p = self.lattice.position(site);
        let g = self.constants.nucleus(site.species()).gamma;
        self.sites
            .iter()
            .filter(|s| {
                let alpha = dipolar_prefactor(self.constants.nucleus(s.species()).gamma, g);
                dipolar_coupling_alpha(&(self.lattice.position(s) - p), alpha)
                    .map(|c| 0.5 * c.abs() >= self.growth.link_threshold)
                    .unwrap_or(false)
            })
            .count()
    }

    fn candidates(&self, around: &[SiteIndex], shell: (f64, f64), species: Species, need: usize) -> Vec<SiteIndex> {
        let mut set = BTreeSet::new();
        for c in around {
            let center = self.lattice.position(c);
            for s in self.lattice.sites_within(&center, shell.1, Some(species)) {
                let p = self.lattice.position(&s);
                if (p - center).norm() < shell.0 || self.occupied.contains(&s) || s == self.lattice.origin() {
                    continue;
                }
                if p.norm() < self.growth.min_vacancy_distance {
                    continue;
                }
                set.insert(s);
            }
        }
        set.into_iter().filter(|s| self.links(s) >= need.min(self.sites.len())).collect()
    }

    fn add(&mut self, s: SiteIndex) {
        self.sites.push(s);
        self.occupied.insert(s);
    }
}

/// Builds a ground-truth cluster that always contains the on-axis anchor Si1.
pub fn generate_cluster(
    lattice: &Lattice,
    n_si: usize,
    n_c: usize,
    structure: &ClusterStructure,
    growth: &GrowthConfig,
    constants: &Constants,
    seed: u64,
) -> Result<SyntheticCluster> {
    if n_si == 0 {
        return Err(Error::InvalidParameter("n_si must include the anchor (>= 1)".into()));
    }
    let mut rng = rng_from_seed(seed);
    let n = n_si + n_c;
    // Species of each slot after the anchor.
    let mut slots: Vec<Species> = std::iter::repeat_n(Species::Si, n_si - 1)
        .chain(std::iter::repeat_n(Species::C, n_c))
        .collect();
    for i in (1..slots.len()).rev() {
        let j = rng.random_range(0..=i);
        slots.swap(i, j);
    }
    let sizes = match structure {
        ClusterStructure::Random { .. } => vec![n],
        ClusterStructure::Clustered { clusters, min_size, max_size } => {
            partition_sizes(n, *clusters, *min_size, *max_size, &mut rng)?
        }
    };

    let mut g = Grower {
        lattice,
        constants,
        growth: *growth,
        sites: Vec::new(),
        occupied: BTreeSet::new(),
    };
    g.add(lattice.si1().index);
    let mut subcluster = vec![0usize];
    let mut slot = slots.into_iter();
    for (ci, &size) in sizes.iter().enumerate() {
        let mut members: Vec<SiteIndex> = if ci == 0 { vec![g.sites[0]] } else { Vec::new() };
        while members.len() < size {
            let species = slot.next().expect("sizes sum to n");
            let cands = match structure {
                ClusterStructure::Random { radius } => {
                    let mut c = g.candidates(&[lattice.origin()], (0.0, *radius), species, growth.min_links);
                    c.retain(|s| g.links(s) >= 1);
                    c
                }
                ClusterStructure::Clustered { .. } if members.is_empty() => {
                    let existing = g.sites.clone();
                    g.candidates(&existing, growth.seed_shell, species, growth.seed_links)
                }
                ClusterStructure::Clustered { .. } => {
                    g.candidates(&members, growth.member_shell, species, growth.min_links)
                }
            };
            let Some(&pick) = cands.choose(&mut rng) else {
                return Err(Error::InvalidParameter(format!(
                    "no admissible {species} site for sub-cluster {ci} (seed {seed})"
                )));
            };
            g.add(pick);
            members.push(pick);
            subcluster.push(ci);
        }
    }

    let mut si_count = 0;
    let mut c_count = 0;
    let mut truth = BTreeMap::new();
    let mut order = Vec::new();
    let mut sub = BTreeMap::new();
    for (s, ci) in g.sites.iter().zip(subcluster) {
        let label = match s.species() {
            Species::Si => {
                si_count += 1;
                format!("Si{si_count}")
            }
            Species::C => {
                c_count += 1;
                format!("C{c_count}")
            }
        };
        truth.insert(label.clone(), lattice.site(*s));
        sub.insert(label.clone(), ci);
        order.push(label);
    }
    Ok(SyntheticCluster {
        truth,
        generation_order: order,
        subcluster: sub,
        seed,
        rng: RNG_ALGORITHM.to_string(),
    })
}

/// Noisy SEDOR table: `f = |C_zz|/2 + noise` for every pair, kept when
/// `f >= min_detectable` after noise. Sigma is the noise scale (floored at 1 mHz).
pub fn emit_couplings(
    cluster: &SyntheticCluster,
    min_detectable: f64,
    noise: &NoiseModel,
    constants: &Constants,
    seed: u64,
) -> Result<Vec<CouplingMeasurement>> {
    let mut rng = rng_from_seed(seed);
    let labels = &cluster.generation_order;
    let mut out = Vec::new();
    for (i, a) in labels.iter().enumerate() {
        for b in &labels[i + 1..] {
            let (sa, sb) = (&cluster.truth[a], &cluster.truth[b]);
            let alpha = dipolar_prefactor(constants.nucleus(sa.species).gamma, constants.nucleus(sb.species).gamma);
            let f = 0.5 * dipolar_coupling_alpha(&(sb.position - sa.position), alpha)?.abs();
            let measured = f + noise.sample(&mut rng)?;
            if measured >= min_detectable {
                out.push(CouplingMeasurement {
                    spin_a: a.clone(),
                    spin_b: b.clone(),
                    f_hz: measured,
                    sigma_hz: noise.scale().max(1e-3),
                    subspace_mode: SubspaceMode::Averaged,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TelegraphSpec {
    /// Bright to dark rate, Hz.
    pub rate_bd: f64,
    /// Dark to bright rate, Hz.
    pub rate_db: f64,
    /// counts/s.
    pub bright_rate: f64,
    pub dark_rate: f64,
    pub shot_noise: bool,
    /// s.
    pub duration: f64,
    pub dt: f64,
}

impl Default for TelegraphSpec {
    fn default() -> Self {
        Self {
            rate_bd: 0.18,
            rate_db: 0.85,
            bright_rate: 4000.0,
            dark_rate: 300.0,
            shot_noise: true,
            duration: 200.0,
            dt: 0.01,
        }
    }
}

/// Continuous-time two-state Markov process sampled on a `dt` grid with
/// Poisson photon counts per bin. Returns the trace and the majority state of
/// each bin (`true` = bright).
pub fn emit_telegraph(spec: &TelegraphSpec, seed: u64) -> Result<(TimeTrace, Vec<bool>)> {
    if !(spec.rate_bd > 0.0 && spec.rate_db > 0.0) {
        return Err(Error::InvalidParameter("rates must be > 0".into()));
    }
    if !(spec.dt > 0.0 && spec.duration > spec.dt) {
        return Err(Error::InvalidParameter("need 0 < dt < duration".into()));
    }
    if spec.dt >= 0.1 / spec.rate_bd.max(spec.rate_db) {
        return Err(Error::InvalidParameter("dt must be below a tenth of the shortest mean dwell".into()));
    }
    if !(spec.bright_rate >= 0.0 && spec.dark_rate >= 0.0) {
        return Err(Error::InvalidParameter("count rates must be >= 0".into()));
    }
    let mut rng = rng_from_seed(seed);
    let exp_bd = Exp::new(spec.rate_bd).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let exp_db = Exp::new(spec.rate_db).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let p_bright = spec.rate_db / (spec.rate_bd + spec.rate_db);
    let mut bright = rng.random::<f64>() < p_bright;
    let mut next_switch = if bright { exp_bd.sample(&mut rng) } else { exp_db.sample(&mut rng) };

    let n = (spec.duration / spec.dt).round() as usize;
    let mut timestamps = Vec::with_capacity(n);
    let mut counts = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    for i in 0..n {
        let t0 = i as f64 * spec.dt;
        let t1 = t0 + spec.dt;
        let mut t = t0;
        let mut bright_time = 0.0;
        while next_switch < t1 {
            if bright {
                bright_time += next_switch - t;
            }
            t = next_switch;
            bright = !bright;
            next_switch += if bright { exp_bd.sample(&mut rng) } else { exp_db.sample(&mut rng) };
        }
        if bright {
            bright_time += t1 - t;
        }
        let frac = bright_time / spec.dt;
        let mean = (frac * spec.bright_rate + (1.0 - frac) * spec.dark_rate) * spec.dt;
        let c = if spec.shot_noise && mean > 0.0 {
            Poisson::new(mean)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?
                .sample(&mut rng)
        } else {
            mean
        };
        timestamps.push(t0);
        counts.push(c / spec.dt);
        states.push(frac >= 0.5);
    }
    Ok((TimeTrace { timestamps, counts }, states))
}

/// Flattens a cluster into `(label, position)` rows in generation order.
pub fn positions(cluster: &SyntheticCluster) -> Vec<(String, Vector3<f64>)> {
    cluster
        .generation_order
        .iter()
        .map(|l| (l.clone(), cluster.truth[l].position))
        .collect()
}
