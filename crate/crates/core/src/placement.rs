//! Branch-and-prune assignment of labelled nuclear spins to lattice sites.
//!
//! Spins are placed one at a time in a fixed order. Every partial solution is
//! extended by all lattice sites whose secular coupling magnitude `|C_zz|/2` to
//! each already placed partner matches the measured SEDOR frequency within the
//! pair tolerance. Partial solutions that differ only by a point-group
//! operation of the defect site are generated once (lex-leader rule) and the
//! size of the class is reported with each solution.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::SubspaceMode;
use crate::lattice::{Lattice, LatticeSite, SiteIndex, Species};
use crate::spinphys::{dipolar_prefactor, Constants};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingMeasurement {
    pub spin_a: String,
    pub spin_b: String,
    pub f_hz: f64,
    pub sigma_hz: f64,
    #[serde(default)]
    pub subspace_mode: SubspaceMode,
}

impl CouplingMeasurement {
    pub fn new(a: &str, b: &str, f_hz: f64, sigma_hz: f64) -> Self {
        Self {
            spin_a: a.to_string(),
            spin_b: b.to_string(),
            f_hz,
            sigma_hz,
            subspace_mode: SubspaceMode::Averaged,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_hz >= 0.0) || !self.f_hz.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "{}-{}: frequency must be >= 0, got {}",
                self.spin_a, self.spin_b, self.f_hz
            )));
        }
        if !(self.sigma_hz > 0.0) || !self.sigma_hz.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "{}-{}: sigma must be > 0, got {}",
                self.spin_a, self.spin_b, self.sigma_hz
            )));
        }
        if self.spin_a == self.spin_b || self.spin_a.is_empty() {
            return Err(Error::InvalidParameter(format!("invalid pair {}-{}", self.spin_a, self.spin_b)));
        }
        Ok(())
    }

    pub fn involves(&self, label: &str) -> bool {
        self.spin_a == label || self.spin_b == label
    }

    pub fn partner(&self, label: &str) -> Option<&str> {
        if self.spin_a == label {
            Some(&self.spin_b)
        } else if self.spin_b == label {
            Some(&self.spin_a)
        } else {
            None
        }
    }
}

/// Order-independent key for a pair of labels, `"A:B"` with `A < B`.
pub fn pair_key(a: &str, b: &str) -> String {
    if a <= b {
        format!("{a}:{b}")
    } else {
        format!("{b}:{a}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlacementConfig {
    pub tolerance_default: f64,
    /// Keyed by [`pair_key`]; a key written in either order is accepted.
    pub tolerance_overrides: BTreeMap<String, f64>,
    pub relative_tolerance_strong: f64,
    pub strong_threshold: f64,
    pub min_detectable: f64,
    /// Explicit order; the greedy heuristic is used when empty.
    pub placement_order: Vec<String>,
    pub max_branches: usize,
    pub anchor: String,
    /// Species for labels that do not start with `Si` or `C`.
    pub species_overrides: BTreeMap<String, Species>,
    /// Reject sites whose coupling to an unmeasured placed partner would have
    /// been clearly observable (above twice `min_detectable`).
    pub weak_coupling_exclusion: bool,
    /// Generate only one member of each point-group class of solutions.
    pub break_symmetry: bool,
    /// Upper bound on the search radius around a reference spin, Å.
    pub max_candidate_radius: f64,
    /// Per-pair deviation bounds from a Hamiltonian sweep, keyed like the overrides.
    pub sweep_bounds: BTreeMap<String, f64>,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        let mut overrides = BTreeMap::new();
        overrides.insert(pair_key("Si1", "Si2"), 3.0);
        overrides.insert(pair_key("Si1", "Si12"), 3.0);
        Self {
            tolerance_default: 0.6,
            tolerance_overrides: overrides,
            relative_tolerance_strong: 0.05,
            strong_threshold: 35.0,
            min_detectable: 3.0,
            placement_order: Vec::new(),
            max_branches: 1_000_000,
            anchor: "Si1".into(),
            species_overrides: BTreeMap::new(),
            weak_coupling_exclusion: false,
            break_symmetry: true,
            max_candidate_radius: 20.0,
            sweep_bounds: BTreeMap::new(),
        }
    }
}

impl PlacementConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance_default > 0.0) {
            return Err(Error::InvalidParameter("tolerance_default must be > 0".into()));
        }
        if !(self.strong_threshold > 0.0) {
            return Err(Error::InvalidParameter("strong_threshold must be > 0".into()));
        }
        if !(self.relative_tolerance_strong >= 0.0) || !(self.min_detectable >= 0.0) {
            return Err(Error::InvalidParameter("tolerances must be non-negative".into()));
        }
        if self.max_branches == 0 || !(self.max_candidate_radius > 0.0) {
            return Err(Error::InvalidParameter("max_branches and max_candidate_radius must be positive".into()));
        }
        if self.tolerance_overrides.values().chain(self.sweep_bounds.values()).any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidParameter("tolerance overrides must be >= 0".into()));
        }
        Ok(())
    }

    fn lookup<'a>(map: &'a BTreeMap<String, f64>, a: &str, b: &str) -> Option<&'a f64> {
        map.get(&pair_key(a, b))
            .or_else(|| map.get(&format!("{a}:{b}")))
            .or_else(|| map.get(&format!("{b}:{a}")))
    }

    pub fn species_of(&self, label: &str) -> Result<Species> {
        if let Some(s) = self.species_overrides.get(label) {
            return Ok(*s);
        }
        species_from_label(label)
    }
}

/// `Si...` labels are ²⁹Si, `C...` labels are ¹³C.
pub fn species_from_label(label: &str) -> Result<Species> {
    if label.starts_with("Si") {
        Ok(Species::Si)
    } else if label.starts_with('C') {
        Ok(Species::C)
    } else {
        Err(Error::InvalidParameter(format!(
            "cannot infer species of '{label}'; add it to species_overrides"
        )))
    }
}

/// Tolerance window for one measured pair: explicit override, else a relative
/// window above the strong threshold, else the default; widened to the sweep
/// bound when one is supplied.
pub fn tolerance_for_pair(pair: (&str, &str), f_hz: f64, config: &PlacementConfig, sweep_bound: Option<f64>) -> f64 {
    let base = if let Some(t) = PlacementConfig::lookup(&config.tolerance_overrides, pair.0, pair.1) {
        *t
    } else if f_hz > config.strong_threshold {
        config.relative_tolerance_strong * f_hz
    } else {
        config.tolerance_default
    };
    let bound = sweep_bound.or_else(|| PlacementConfig::lookup(&config.sweep_bounds, pair.0, pair.1).copied());
    match bound {
        Some(b) if b > base => b,
        _ => base,
    }
}

/// Greedy order: starting from `anchor`, repeatedly take the label with most
/// distinct partners already ordered, then the larger strongest coupling
/// into the ordered set, then the lexicographically smaller label.
pub fn order_heuristic(measurements: &[CouplingMeasurement], anchor: &str) -> Result<Vec<String>> {
    let mut labels = BTreeSet::new();
    for m in measurements {
        labels.insert(m.spin_a.clone());
        labels.insert(m.spin_b.clone());
    }
    labels.insert(anchor.to_string());
    let mut order = vec![anchor.to_string()];
    let mut placed: BTreeSet<String> = order.iter().cloned().collect();
    while placed.len() < labels.len() {
        let mut best: Option<(usize, f64, &String)> = None;
        for l in labels.iter().filter(|l| !placed.contains(*l)) {
            let mut partners = BTreeSet::new();
            let mut strongest = 0.0_f64;
            for m in measurements {
                if let Some(p) = m.partner(l) {
                    if placed.contains(p) {
                        partners.insert(p);
                        strongest = strongest.max(m.f_hz);
                    }
                }
            }
            if partners.is_empty() {
                continue;
            }
            let better = match best {
                None => true,
                Some((n, f, _)) => partners.len() > n || (partners.len() == n && strongest > f),
            };
            if better {
                best = Some((partners.len(), strongest, l));
            }
        }
        match best {
            Some((_, _, l)) => {
                let l = l.clone();
                placed.insert(l.clone());
                order.push(l);
            }
            None => {
                return Err(Error::Disconnected {
                    labels: labels.iter().filter(|l| !placed.contains(*l)).cloned().collect(),
                })
            }
        }
    }
    Ok(order)
}

/// A rigid operation about the defect axis `x = y = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryOp {
    pub name: String,
    rot: Matrix3<f64>,
    z_center: f64,
}

impl SymmetryOp {
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let shifted = Vector3::new(p.x, p.y, p.z - self.z_center);
        let q = self.rot * shifted;
        Vector3::new(q.x, q.y, q.z + self.z_center)
    }

    pub fn apply_site(&self, lattice: &Lattice, s: &SiteIndex) -> Option<SiteIndex> {
        lattice.site_at(&self.apply(&lattice.position(s)))
    }
}

/// Operations that map the occupied sublattices onto themselves and keep the
/// anchor fixed. `ops` also fix the vacancy (identity first); `mirror_partners`
/// move the vacancy and therefore give coupling-equivalent solutions around a
/// different defect position.
#[derive(Debug, Clone)]
pub struct SymmetryGroup {
    pub ops: Vec<SymmetryOp>,
    pub mirror_partners: Vec<SymmetryOp>,
}

impl SymmetryGroup {
    pub fn identity_only() -> Self {
        Self {
            ops: vec![SymmetryOp {
                name: "E".into(),
                rot: Matrix3::identity(),
                z_center: 0.0,
            }],
            mirror_partners: Vec::new(),
        }
    }

    pub fn find(lattice: &Lattice, anchor: &SiteIndex, species: &BTreeSet<Species>) -> Self {
        let anchor_pos = lattice.position(anchor);
        let test_sites: Vec<SiteIndex> = species
            .iter()
            .flat_map(|s| lattice.sites_within(&anchor_pos, 12.0, Some(*s)))
            .collect();
        let origin = Vector3::zeros();
        let mut group = Self { ops: Vec::new(), mirror_partners: Vec::new() };
        for flip_z in [false, true] {
            for mirror in [false, true] {
                for k in 0..6 {
                    let t = std::f64::consts::FRAC_PI_3 * k as f64;
                    let rz = Matrix3::new(t.cos(), -t.sin(), 0.0, t.sin(), t.cos(), 0.0, 0.0, 0.0, 1.0);
                    let mx = if mirror { Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, 1.0)) } else { Matrix3::identity() };
                    let fz = if flip_z { Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0)) } else { Matrix3::identity() };
                    let op = SymmetryOp {
                        name: format!("{}C6^{}{}", if flip_z { "sz·" } else { "" }, k, if mirror { "·sx" } else { "" }),
                        rot: fz * rz * mx,
                        z_center: anchor_pos.z,
                    };
                    let preserves = test_sites.iter().all(|s| {
                        op.apply_site(lattice, s)
                            .is_some_and(|t| t.species() == s.species())
                    });
                    if !preserves {
                        continue;
                    }
                    if (op.apply(&origin) - origin).norm() < 1e-6 {
                        group.ops.push(op);
                    } else {
                        group.mirror_partners.push(op);
                    }
                }
            }
        }
        group
    }

    pub fn order(&self) -> usize {
        self.ops.len()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlacementSolution {
    pub assignment: BTreeMap<String, LatticeSite>,
    /// Labels in placement order, anchor first.
    pub order: Vec<String>,
    /// Sum of squared frequency mismatches over all used measurements, Hz².
    pub residual: f64,
    /// Surviving partial solutions after each placement step.
    pub branch_history: Vec<usize>,
    /// Number of distinct solutions related to this one by the point group.
    pub symmetry_class_size: usize,
    /// Coupling-equivalent solutions that require a different vacancy position.
    pub mirror_partners: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlacementOutcome {
    pub order: Vec<String>,
    pub solutions: Vec<PlacementSolution>,
    pub branch_history: Vec<usize>,
    pub symmetry_group_order: usize,
    /// Labels placed on more than one site across the solutions.
    pub ambiguous: BTreeMap<String, Vec<LatticeSite>>,
    /// Measurements dropped for being below `min_detectable`.
    pub ignored_measurements: usize,
}

struct Constraint {
    placed: usize,
    f: f64,
    tol: f64,
    alpha: f64,
}

struct Step {
    species: Species,
    constraints: Vec<Constraint>,
    unmeasured: Vec<(usize, f64)>,
    /// Offsets from the reference partner, one table per basis index.
    tables: Vec<Option<std::sync::Arc<Vec<crate::lattice::Offset>>>>,
    reference: usize,
}

#[derive(Clone)]
struct Partial {
    sites: Vec<SiteIndex>,
    stab: u32,
}

struct Search<'a> {
    lattice: &'a Lattice,
    config: &'a PlacementConfig,
    group: SymmetryGroup,
    vacancy: SiteIndex,
}

impl Search<'_> {
    fn admissible(&self, step: &Step, partial: &Partial, site: &SiteIndex, pos: &Vector3<f64>) -> bool {
        if *site == self.vacancy || partial.sites.contains(site) {
            return false;
        }
        for c in &step.constraints {
            let d = self.lattice.position(&partial.sites[c.placed]) - pos;
            let f = 0.5 * secular(&d, c.alpha).abs();
            if (f - c.f).abs() > c.tol + 1e-9 {
                return false;
            }
        }
        if self.config.weak_coupling_exclusion {
            let limit = 2.0 * self.config.min_detectable;
            for &(p, alpha) in &step.unmeasured {
                let d = self.lattice.position(&partial.sites[p]) - pos;
                if 0.5 * secular(&d, alpha).abs() > limit {
                    return false;
                }
            }
        }
        true
    }

    fn extend(&self, step: &Step, partial: &Partial) -> Vec<Partial> {
        let reference = partial.sites[step.reference];
        let table = step.tables[reference.basis as usize]
            .as_ref()
            .expect("table for every reference basis");
        let mut out = Vec::new();
        for off in table.iter() {
            let site = SiteIndex {
                cell: [
                    reference.cell[0] + off.cell_shift[0],
                    reference.cell[1] + off.cell_shift[1],
                    reference.cell[2] + off.cell_shift[2],
                ],
                basis: off.basis,
            };
            let pos = self.lattice.position(&site);
            if !self.admissible(step, partial, &site, &pos) {
                continue;
            }
            let mut stab = partial.stab;
            let mut leader = true;
            for (g, op) in self.group.ops.iter().enumerate().skip(1) {
                if stab & (1 << g) == 0 {
                    continue;
                }
                match op.apply_site(self.lattice, &site) {
                    Some(image) if image == site => {}
                    Some(image) => {
                        if self.config.break_symmetry && image < site {
                            leader = false;
                            break;
                        }
                        stab &= !(1 << g);
                    }
                    None => stab &= !(1 << g),
                }
            }
            if !leader {
                continue;
            }
            let mut sites = partial.sites.clone();
            sites.push(site);
            out.push(Partial { sites, stab });
        }
        out
    }
}

fn secular(d: &Vector3<f64>, alpha: f64) -> f64 {
    let r2 = d.norm_squared();
    alpha / (r2 * r2.sqrt()) * (3.0 * d.z * d.z / r2 - 1.0)
}

fn usable<'m>(measurements: &'m [CouplingMeasurement], config: &PlacementConfig) -> Result<Vec<&'m CouplingMeasurement>> {
    for m in measurements {
        m.validate()?;
    }
    Ok(measurements.iter().filter(|m| m.f_hz >= config.min_detectable).collect())
}

fn build_step(
    label: &str,
    order: &[String],
    measurements: &[&CouplingMeasurement],
    lattice: &Lattice,
    config: &PlacementConfig,
    constants: &Constants,
    placed_species: &[Species],
) -> Result<Step> {
    let species = config.species_of(label)?;
    let gamma = constants.nucleus(species).gamma;
    let mut constraints = Vec::new();
    let mut measured = BTreeSet::new();
    for m in measurements {
        let Some(partner) = m.partner(label) else { continue };
        let Some(p) = order.iter().position(|l| l == partner) else { continue };
        let alpha = dipolar_prefactor(constants.nucleus(placed_species[p]).gamma, gamma);
        constraints.push(Constraint {
            placed: p,
            f: m.f_hz,
            tol: tolerance_for_pair((label, partner), m.f_hz, config, None),
            alpha,
        });
        measured.insert(p);
    }
    if constraints.is_empty() {
        return Err(Error::Connectivity { label: label.to_string() });
    }
    let unmeasured = (0..order.len())
        .filter(|p| !measured.contains(p))
        .map(|p| (p, dipolar_prefactor(constants.nucleus(placed_species[p]).gamma, gamma)))
        .collect();
    // The strongest coupling has the smallest candidate shell.
    let (ri, rc) = constraints
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.f.total_cmp(&b.1.f).then(b.0.cmp(&a.0)))
        .expect("non-empty");
    let floor = rc.f - rc.tol;
    let radius = if floor > 0.0 {
        (rc.alpha.abs() / floor).cbrt().min(config.max_candidate_radius)
    } else {
        config.max_candidate_radius
    };
    let ref_species = placed_species[rc.placed];
    let tables = (0..8u8)
        .map(|b| {
            (crate::lattice::BASIS[b as usize].0 == ref_species).then(|| lattice.offsets(b, species, radius))
        })
        .collect();
    let reference = constraints[ri].placed;
    Ok(Step { species, constraints, unmeasured, tables, reference })
}

fn placed_species_for(order: &[String], config: &PlacementConfig) -> Result<Vec<Species>> {
    order.iter().map(|l| config.species_of(l)).collect()
}

/// Sites admissible for `new_label` given already placed spins.
pub fn candidate_sites(
    placed: &BTreeMap<String, SiteIndex>,
    new_label: &str,
    measurements: &[CouplingMeasurement],
    lattice: &Lattice,
    config: &PlacementConfig,
    constants: &Constants,
) -> Result<Vec<LatticeSite>> {
    config.validate()?;
    let usable = usable(measurements, config)?;
    let order: Vec<String> = placed.keys().cloned().collect();
    let species = placed_species_for(&order, config)?;
    let step = build_step(new_label, &order, &usable, lattice, config, constants, &species)?;
    let search = Search {
        lattice,
        config: &PlacementConfig { break_symmetry: false, ..config.clone() },
        group: SymmetryGroup::identity_only(),
        vacancy: lattice.origin(),
    };
    let partial = Partial { sites: placed.values().copied().collect(), stab: 0 };
    let mut sites: Vec<LatticeSite> = search
        .extend(&step, &partial)
        .into_iter()
        .map(|p| lattice.site(*p.sites.last().expect("extended")))
        .collect();
    sites.sort_by_key(|a| a.index);
    Ok(sites)
}

/// Runs the full breadth-first search.
pub fn place_all(
    measurements: &[CouplingMeasurement],
    lattice: &Lattice,
    config: &PlacementConfig,
    constants: &Constants,
) -> Result<PlacementOutcome> {
    config.validate()?;
    let usable = usable(measurements, config)?;
    let owned: Vec<CouplingMeasurement> = usable.iter().map(|m| (*m).clone()).collect();
    let order = if config.placement_order.is_empty() {
        order_heuristic(&owned, &config.anchor)?
    } else {
        config.placement_order.clone()
    };
    if order.first() != Some(&config.anchor) {
        return Err(Error::InvalidParameter(format!(
            "placement order must start with the anchor '{}'",
            config.anchor
        )));
    }
    let unique: BTreeSet<&String> = order.iter().collect();
    if unique.len() != order.len() {
        return Err(Error::InvalidParameter("placement order repeats a label".into()));
    }
    let species = placed_species_for(&order, config)?;
    if species[0] != Species::Si {
        return Err(Error::InvalidParameter("the anchor must be a silicon spin".into()));
    }
    for m in &owned {
        for l in [&m.spin_a, &m.spin_b] {
            if !order.contains(l) {
                return Err(Error::InvalidParameter(format!("label '{l}' is missing from the placement order")));
            }
        }
    }

    let anchor_site = lattice.si1().index;
    let present: BTreeSet<Species> = species.iter().copied().collect();
    let group = if config.break_symmetry {
        SymmetryGroup::find(lattice, &anchor_site, &present)
    } else {
        SymmetryGroup::identity_only()
    };
    let full_mask: u32 = if group.ops.len() >= 32 { u32::MAX } else { (1u32 << group.ops.len()) - 1 };
    let search = Search { lattice, config, group, vacancy: lattice.origin() };

    let mut partials = vec![Partial { sites: vec![anchor_site], stab: full_mask }];
    let mut history = vec![1usize];
    for (k, label) in order.iter().enumerate().skip(1) {
        let step = build_step(label, &order[..k], &usable, lattice, config, constants, &species[..k])?;
        debug_assert_eq!(step.species, species[k]);
        let next: Vec<Partial> = partials
            .par_iter()
            .flat_map_iter(|p| search.extend(&step, p))
            .collect();
        if next.len() > config.max_branches {
            return Err(Error::Capacity(format!(
                "step {k} ({label}): {} partial solutions exceed the cap of {}",
                next.len(),
                config.max_branches
            )));
        }
        if next.is_empty() {
            return Err(Error::Infeasible { step: k, label: label.clone() });
        }
        history.push(next.len());
        partials = next;
    }

    let group_order = search.group.order();
    let mut solutions: Vec<PlacementSolution> = partials
        .iter()
        .map(|p| {
            let assignment: BTreeMap<String, LatticeSite> = order
                .iter()
                .zip(&p.sites)
                .map(|(l, s)| (l.clone(), lattice.site(*s)))
                .collect();
            let residual = residual_of(&assignment, &owned, constants);
            let stab = p.stab.count_ones() as usize;
            let mirror_partners = search
                .group
                .mirror_partners
                .iter()
                .filter(|op| {
                    p.sites.iter().all(|s| {
                        op.apply_site(lattice, s).is_some_and(|t| t != lattice.origin())
                    })
                })
                .count();
            PlacementSolution {
                assignment,
                order: order.clone(),
                residual,
                branch_history: history.clone(),
                symmetry_class_size: group_order / stab.max(1),
                mirror_partners,
            }
        })
        .collect();
    solutions.sort_by(|a, b| {
        a.residual.total_cmp(&b.residual).then_with(|| {
            let ka: Vec<SiteIndex> = a.assignment.values().map(|s| s.index).collect();
            let kb: Vec<SiteIndex> = b.assignment.values().map(|s| s.index).collect();
            ka.cmp(&kb)
        })
    });

    let mut sites_per_label: BTreeMap<String, BTreeMap<SiteIndex, LatticeSite>> = BTreeMap::new();
    for s in &solutions {
        for (l, site) in &s.assignment {
            sites_per_label.entry(l.clone()).or_default().insert(site.index, *site);
        }
    }
    let ambiguous = sites_per_label
        .into_iter()
        .filter(|(_, v)| v.len() > 1)
        .map(|(l, v)| (l, v.into_values().collect()))
        .collect();

    Ok(PlacementOutcome {
        order,
        solutions,
        branch_history: history,
        symmetry_group_order: group_order,
        ambiguous,
        ignored_measurements: measurements.len() - usable.len(),
    })
}

/// True when some point-group operation maps every site of `a` onto the site
/// `b` assigns to the same label.
pub fn equivalent_assignments(
    lattice: &Lattice,
    group: &SymmetryGroup,
    a: &BTreeMap<String, LatticeSite>,
    b: &BTreeMap<String, LatticeSite>,
) -> bool {
    if a.len() != b.len() || a.keys().ne(b.keys()) {
        return false;
    }
    group.ops.iter().any(|op| {
        a.iter()
            .all(|(l, s)| op.apply_site(lattice, &s.index) == Some(b[l].index))
    })
}

/// `sum (f - |C_zz|/2)^2` over the measurements whose both labels are assigned.
pub fn residual_of(
    assignment: &BTreeMap<String, LatticeSite>,
    measurements: &[CouplingMeasurement],
    constants: &Constants,
) -> f64 {
    measurements
        .iter()
        .filter_map(|m| {
            let a = assignment.get(&m.spin_a)?;
            let b = assignment.get(&m.spin_b)?;
            let alpha = dipolar_prefactor(constants.nucleus(a.species).gamma, constants.nucleus(b.species).gamma);
            let f = 0.5 * secular(&(b.position - a.position), alpha).abs();
            Some((m.f_hz - f).powi(2))
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeParams;

    fn lattice() -> Lattice {
        Lattice::new(LatticeParams::default()).unwrap()
    }

    #[test]
    fn tolerance_rules() {
        let cfg = PlacementConfig::default();
        assert_eq!(tolerance_for_pair(("Si1", "Si2"), 80.0, &cfg, None), 3.0);
        assert_eq!(tolerance_for_pair(("Si2", "Si1"), 80.0, &cfg, None), 3.0);
        assert!((tolerance_for_pair(("Si3", "Si4"), 80.06, &cfg, None) - 4.003).abs() < 1e-12);
        assert_eq!(tolerance_for_pair(("Si8", "Si9"), 4.31, &cfg, None), 0.6);
        assert_eq!(tolerance_for_pair(("Si8", "Si9"), 4.31, &cfg, Some(1.2)), 1.2);
        assert_eq!(tolerance_for_pair(("Si8", "Si9"), 4.31, &cfg, Some(0.1)), 0.6);
    }

    #[test]
    fn species_inference() {
        assert_eq!(species_from_label("Si12").unwrap(), Species::Si);
        assert_eq!(species_from_label("C3").unwrap(), Species::C);
        assert!(species_from_label("X1").is_err());
    }

    #[test]
    fn heuristic_star_and_bridge() {
        let star: Vec<_> = ["Si4", "Si2", "Si3"]
            .iter()
            .map(|l| CouplingMeasurement::new("Si1", l, 10.0, 0.2))
            .collect();
        assert_eq!(order_heuristic(&star, "Si1").unwrap(), ["Si1", "Si2", "Si3", "Si4"]);
        let mut ms = Vec::new();
        let a = ["Si1", "Si2", "Si3", "Si4"];
        let b = ["Si5", "Si6", "Si7", "Si8"];
        for clique in [a, b] {
            for i in 0..4 {
                for j in i + 1..4 {
                    ms.push(CouplingMeasurement::new(clique[i], clique[j], 10.0, 0.2));
                }
            }
        }
        ms.push(CouplingMeasurement::new("Si4", "Si5", 50.0, 0.2));
        let order = order_heuristic(&ms, "Si1").unwrap();
        let pos = |l: &str| order.iter().position(|x| x == l).unwrap();
        for l in &a[1..] {
            assert!(pos(l) < pos("Si5"));
        }
        ms.push(CouplingMeasurement::new("Si20", "Si21", 5.0, 0.2));
        match order_heuristic(&ms, "Si1") {
            Err(Error::Disconnected { labels }) => assert_eq!(labels, ["Si20", "Si21"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn point_group_of_k_site() {
        let l = lattice();
        let anchor = l.si1().index;
        let both: BTreeSet<_> = [Species::Si, Species::C].into_iter().collect();
        assert_eq!(SymmetryGroup::find(&l, &anchor, &both).order(), 6);
    }

    #[test]
    fn connectivity_error() {
        let l = lattice();
        let placed: BTreeMap<_, _> = [("Si1".to_string(), l.si1().index)].into_iter().collect();
        let ms = vec![CouplingMeasurement::new("Si2", "Si3", 10.0, 0.2)];
        let r = candidate_sites(&placed, "Si2", &ms, &l, &PlacementConfig::default(), &Constants::default());
        assert!(matches!(r, Err(Error::Connectivity { .. })));
    }
}
