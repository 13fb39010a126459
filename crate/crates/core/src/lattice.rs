//! 4H-SiC lattice around the silicon vacancy.
//!
//! Positions are measured from the vacancy. The hexagonal cell uses
//! `a1 = a x`, `a2 = a(-1/2, sqrt(3)/2, 0)`, `a3 = c z`; the basis table below
//! holds the four Si (ABCB stacking) followed by the four C, each C sitting
//! `3c/16` above its Si partner.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Species {
    Si,
    C,
}

impl Species {
    pub fn as_str(self) -> &'static str {
        match self {
            Species::Si => "Si",
            Species::C => "C",
        }
    }
}

impl std::fmt::Display for Species {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Species {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Si" | "si" | "Si29" => Ok(Species::Si),
            "C" | "c" | "C13" => Ok(Species::C),
            _ => Err(Error::Format(format!("unknown species '{s}'"))),
        }
    }
}

/// Fractional coordinates of the 8 basis atoms, ABCB stacking.
pub const BASIS: [(Species, [f64; 3]); 8] = [
    (Species::Si, [0.0, 0.0, 0.0]),
    (Species::Si, [1.0 / 3.0, 2.0 / 3.0, 0.25]),
    (Species::Si, [0.0, 0.0, 0.5]),
    (Species::Si, [2.0 / 3.0, 1.0 / 3.0, 0.75]),
    (Species::C, [0.0, 0.0, 0.1875]),
    (Species::C, [1.0 / 3.0, 2.0 / 3.0, 0.4375]),
    (Species::C, [0.0, 0.0, 0.6875]),
    (Species::C, [2.0 / 3.0, 1.0 / 3.0, 0.9375]),
];

/// Ideal c/a of the 4H polytype for close-packed stacking, `4 sqrt(2/3)`.
pub fn ideal_c_over_a() -> f64 {
    4.0 * (2.0_f64 / 3.0).sqrt()
}

/// Which of the two cubic Si sites of the cell hosts the vacancy. They are
/// related by a 180° screw and mirror the neighbor shells along z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VacancySite {
    /// Basis 0 (z = 0 in the cell).
    #[default]
    K0,
    /// Basis 2 (z = c/2 in the cell).
    K1,
}

impl VacancySite {
    fn basis(self) -> u8 {
        match self {
            VacancySite::K0 => 0,
            VacancySite::K1 => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeParams {
    pub a: f64,
    pub c: f64,
    pub vacancy: VacancySite,
}

impl Default for LatticeParams {
    fn default() -> Self {
        Self {
            a: 3.073,
            c: 10.053,
            vacancy: VacancySite::K0,
        }
    }
}

impl LatticeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.c > 0.0) || !self.a.is_finite() || !self.c.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lattice constants must be positive (a = {}, c = {})",
                self.a, self.c
            )));
        }
        let ratio = self.c / self.a / ideal_c_over_a();
        if !(0.95..=1.05).contains(&ratio) {
            return Err(Error::InvalidParameter(format!(
                "c/a = {:.4} is more than 5% from the 4H value {:.4}",
                self.c / self.a,
                ideal_c_over_a()
            )));
        }
        Ok(())
    }

    fn cell_matrix(&self) -> Matrix3<f64> {
        let h = 3.0_f64.sqrt() / 2.0;
        Matrix3::new(
            self.a, -0.5 * self.a, 0.0, //
            0.0, h * self.a, 0.0, //
            0.0, 0.0, self.c,
        )
    }
}

/// Integer cell plus basis index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SiteIndex {
    pub cell: [i32; 3],
    pub basis: u8,
}

impl SiteIndex {
    pub fn new(i: i32, j: i32, k: i32, basis: u8) -> Self {
        Self { cell: [i, j, k], basis }
    }

    pub fn species(&self) -> Species {
        BASIS[self.basis as usize].0
    }

    pub fn shifted(&self, d: [i32; 3]) -> Self {
        Self {
            cell: [self.cell[0] + d[0], self.cell[1] + d[1], self.cell[2] + d[2]],
            basis: self.basis,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSite {
    pub species: Species,
    pub index: SiteIndex,
    pub position: Vector3<f64>,
}

/// A site relative to some reference site: basis of the target, integer cell
/// shift, displacement vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Offset {
    pub cell_shift: [i32; 3],
    pub basis: u8,
    pub delta: Vector3<f64>,
}

/// Infinite 4H-SiC lattice with the vacancy at the origin.
#[derive(Debug, Clone)]
pub struct Lattice {
    params: LatticeParams,
    cell: Matrix3<f64>,
    inv_cell: Matrix3<f64>,
    origin_frac: Vector3<f64>,
    offsets: Arc<Mutex<HashMap<(u8, Species, u64), Arc<Vec<Offset>>>>>,
}

/// Default ceiling on the number of generated sites.
pub const DEFAULT_SITE_CAP: usize = 2_000_000;

impl Lattice {
    pub fn new(params: LatticeParams) -> Result<Self> {
        params.validate()?;
        let cell = params.cell_matrix();
        let inv_cell = cell.try_inverse().ok_or_else(|| Error::InvalidParameter("singular cell".into()))?;
        let b = BASIS[params.vacancy.basis() as usize].1;
        Ok(Self {
            params,
            cell,
            inv_cell,
            origin_frac: Vector3::new(b[0], b[1], b[2]),
            offsets: Arc::default(),
        })
    }

    pub fn params(&self) -> &LatticeParams {
        &self.params
    }

    /// Index of the vacancy site.
    pub fn origin(&self) -> SiteIndex {
        SiteIndex::new(0, 0, 0, self.params.vacancy.basis())
    }

    /// Cartesian position of a site, computed as `cell * (n + f_basis - f_origin)`.
    pub fn position(&self, idx: &SiteIndex) -> Vector3<f64> {
        let f = BASIS[idx.basis as usize].1;
        let frac = Vector3::new(
            (idx.cell[0] as f64 + f[0]) - self.origin_frac.x,
            (idx.cell[1] as f64 + f[1]) - self.origin_frac.y,
            (idx.cell[2] as f64 + f[2]) - self.origin_frac.z,
        );
        self.cell * frac
    }

    pub fn site(&self, idx: SiteIndex) -> LatticeSite {
        LatticeSite {
            species: idx.species(),
            index: idx,
            position: self.position(&idx),
        }
    }

    /// Site whose position lies within `1e-3` Å of `p`, if any.
    pub fn site_at(&self, p: &Vector3<f64>) -> Option<SiteIndex> {
        let frac = self.inv_cell * p + self.origin_frac;
        for (b, (_, f)) in BASIS.iter().enumerate() {
            let n = [
                (frac.x - f[0]).round(),
                (frac.y - f[1]).round(),
                (frac.z - f[2]).round(),
            ];
            let idx = SiteIndex::new(n[0] as i32, n[1] as i32, n[2] as i32, b as u8);
            if (self.position(&idx) - p).norm() < 1e-3 {
                return Some(idx);
            }
        }
        None
    }

    /// The on-axis Si directly above the vacancy at `(0, 0, c/2)`.
    pub fn si1(&self) -> LatticeSite {
        let idx = match self.params.vacancy {
            VacancySite::K0 => SiteIndex::new(0, 0, 0, 2),
            VacancySite::K1 => SiteIndex::new(0, 0, 1, 0),
        };
        self.site(idx)
    }

    /// Every site of `species` (or both if `None`) within `radius` of `center`,
    /// in cell/basis order.
    pub fn sites_within(&self, center: &Vector3<f64>, radius: f64, species: Option<Species>) -> Vec<SiteIndex> {
        let frac_c = self.inv_cell * center + self.origin_frac;
        let mut span = [0i32; 3];
        for (axis, s) in span.iter_mut().enumerate() {
            let row = self.inv_cell.row(axis);
            *s = (radius * row.norm()).ceil() as i32 + 1;
        }
        let base = [frac_c.x.floor() as i32, frac_c.y.floor() as i32, frac_c.z.floor() as i32];
        let r2 = radius * radius;
        let mut out = Vec::new();
        for i in base[0] - span[0]..=base[0] + span[0] {
            for j in base[1] - span[1]..=base[1] + span[1] {
                for k in base[2] - span[2]..=base[2] + span[2] {
                    for (b, (sp, _)) in BASIS.iter().enumerate() {
                        if species.is_some_and(|s| s != *sp) {
                            continue;
                        }
                        let idx = SiteIndex::new(i, j, k, b as u8);
                        if (self.position(&idx) - center).norm_squared() <= r2 {
                            out.push(idx);
                        }
                    }
                }
            }
        }
        out
    }

    /// Offsets from a site with basis `from_basis` to every `species` site
    /// within `radius`, excluding the site itself. Cached per radius.
    pub fn offsets(&self, from_basis: u8, species: Species, radius: f64) -> Arc<Vec<Offset>> {
        let key = (from_basis, species, radius.to_bits());
        if let Some(v) = self.offsets.lock().expect("offset cache poisoned").get(&key) {
            return v.clone();
        }
        let reference = SiteIndex::new(0, 0, 0, from_basis);
        let p0 = self.position(&reference);
        let mut list: Vec<Offset> = self
            .sites_within(&p0, radius, Some(species))
            .into_iter()
            .filter(|idx| *idx != reference)
            .map(|idx| Offset {
                cell_shift: idx.cell,
                basis: idx.basis,
                delta: self.position(&idx) - p0,
            })
            .collect();
        list.sort_by(|a, b| {
            quantized_r2(&a.delta)
                .cmp(&quantized_r2(&b.delta))
                .then(a.cell_shift.cmp(&b.cell_shift))
                .then(a.basis.cmp(&b.basis))
        });
        let list = Arc::new(list);
        self.offsets
            .lock()
            .expect("offset cache poisoned")
            .insert(key, list.clone());
        list
    }
}

fn quantized_r2(v: &Vector3<f64>) -> i64 {
    (v.norm_squared() * 1e6).round() as i64
}

/// All Si and C sites with `|position| <= radius`, vacancy excluded, sorted by
/// distance then cell index.
pub fn build_lattice(params: LatticeParams, radius: f64) -> Result<Vec<LatticeSite>> {
    build_lattice_capped(params, radius, DEFAULT_SITE_CAP)
}

pub fn build_lattice_capped(params: LatticeParams, radius: f64, cap: usize) -> Result<Vec<LatticeSite>> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParameter(format!("radius must be > 0, got {radius}")));
    }
    let lattice = Lattice::new(params)?;
    let cell_volume = lattice.cell.determinant().abs();
    let estimate = 8.0 * 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3) / cell_volume;
    if estimate > 1.2 * cap as f64 + 64.0 {
        return Err(Error::Capacity(format!(
            "radius {radius} Å would generate ~{estimate:.0} sites (cap {cap})"
        )));
    }
    let origin = lattice.origin();
    let mut sites: Vec<LatticeSite> = lattice
        .sites_within(&Vector3::zeros(), radius, None)
        .into_iter()
        .filter(|idx| *idx != origin)
        .map(|idx| lattice.site(idx))
        .collect();
    if sites.len() > cap {
        return Err(Error::Capacity(format!("{} sites exceed the cap of {cap}", sites.len())));
    }
    sites.sort_by(|a, b| {
        quantized_r2(&a.position)
            .cmp(&quantized_r2(&b.position))
            .then(a.index.cmp(&b.index))
    });
    Ok(sites)
}

/// Smallest distance between two distinct sites of the same species.
pub fn nearest_neighbor_distance(params: LatticeParams, species: Species) -> Result<f64> {
    let lattice = Lattice::new(params)?;
    let reach = 1.5 * params.a.max(params.c);
    let mut best = f64::INFINITY;
    for (b, (sp, _)) in BASIS.iter().enumerate() {
        if *sp != species {
            continue;
        }
        for off in lattice.offsets(b as u8, species, reach).iter() {
            best = best.min(off.delta.norm());
        }
    }
    Ok(best)
}

pub fn reference_site_si1(params: LatticeParams) -> Result<LatticeSite> {
    Ok(Lattice::new(params)?.si1())
}

#[derive(Serialize)]
struct SiteRecord {
    species: &'static str,
    i: i32,
    j: i32,
    k: i32,
    basis: u8,
    #[serde(rename = "x_A")]
    x: String,
    #[serde(rename = "y_A")]
    y: String,
    #[serde(rename = "z_A")]
    z: String,
}

impl From<&LatticeSite> for SiteRecord {
    fn from(s: &LatticeSite) -> Self {
        Self {
            species: s.species.as_str(),
            i: s.index.cell[0],
            j: s.index.cell[1],
            k: s.index.cell[2],
            basis: s.index.basis,
            x: format!("{:.6}", s.position.x),
            y: format!("{:.6}", s.position.y),
            z: format!("{:.6}", s.position.z),
        }
    }
}

/// CSV with columns `species,i,j,k,basis,x_A,y_A,z_A` (6 decimals).
pub fn write_sites_csv<W: std::io::Write>(out: W, sites: &[LatticeSite]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in sites {
        w.serialize(SiteRecord::from(s))?;
    }
    w.flush()?;
    Ok(())
}

/// JSON array of objects with the same fields as the CSV export.
pub fn sites_to_json(sites: &[LatticeSite]) -> serde_json::Value {
    let round6 = |v: f64| (v * 1e6).round() / 1e6;
    serde_json::Value::Array(
        sites
            .iter()
            .map(|s| {
                serde_json::json!({
                    "species": s.species.as_str(),
                    "i": s.index.cell[0],
                    "j": s.index.cell[1],
                    "k": s.index.cell[2],
                    "basis": s.index.basis,
                    "x_A": round6(s.position.x),
                    "y_A": round6(s.position.y),
                    "z_A": round6(s.position.z),
                })
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn lat() -> Lattice {
        Lattice::new(LatticeParams::default()).unwrap()
    }

    #[test]
    fn small_radius_is_empty() {
        assert!(build_lattice(LatticeParams::default(), 0.5).unwrap().is_empty());
    }

    #[test]
    fn four_carbon_neighbors_within_two_angstrom() {
        let sites = build_lattice(LatticeParams::default(), 2.0).unwrap();
        assert_eq!(sites.len(), 4);
        assert!(sites.iter().all(|s| s.species == Species::C));
        // Brute force over a generous block of cells, independent of sites_within.
        let l = lat();
        let mut count = 0;
        for i in -3..=3 {
            for j in -3..=3 {
                for k in -2..=2 {
                    for b in 0..8u8 {
                        let idx = SiteIndex::new(i, j, k, b);
                        if idx != l.origin() && l.position(&idx).norm() <= 2.0 {
                            count += 1;
                        }
                    }
                }
            }
        }
        assert_eq!(count, 4);
        for vac in [VacancySite::K0, VacancySite::K1] {
            let p = LatticeParams { vacancy: vac, ..Default::default() };
            assert_eq!(build_lattice(p, 2.0).unwrap().len(), 4);
        }
    }

    #[test]
    fn bond_and_neighbor_lengths() {
        let p = LatticeParams::default();
        let si = nearest_neighbor_distance(p, Species::Si).unwrap();
        let c = nearest_neighbor_distance(p, Species::C).unwrap();
        assert!((si - 3.08).abs() < 0.0308, "{si}");
        assert!((c - 3.08).abs() < 0.0308, "{c}");
        let bond = build_lattice(p, 2.0).unwrap()[0].position.norm();
        assert!((bond - 1.91).abs() < 0.05, "{bond}");
        assert!(nearest_neighbor_distance(LatticeParams { a: 0.0, c: 0.0, ..p }, Species::Si).is_err());
    }

    #[test]
    fn si1_on_axis() {
        for vac in [VacancySite::K0, VacancySite::K1] {
            let p = LatticeParams { vacancy: vac, ..Default::default() };
            let s = reference_site_si1(p).unwrap();
            assert_eq!(s.species, Species::Si);
            assert_eq!(s.position, Vector3::new(0.0, 0.0, p.c / 2.0));
        }
    }

    #[test]
    fn translation_and_cell_contents() {
        let l = lat();
        let idx = SiteIndex::new(1, -2, 3, 5);
        let d = l.position(&idx.shifted([1, 0, 0])) - l.position(&idx);
        assert_relative_eq!(d, Vector3::new(3.073, 0.0, 0.0), epsilon = 1e-12);
        let d = l.position(&idx.shifted([0, 0, -1])) - l.position(&idx);
        assert_relative_eq!(d, Vector3::new(0.0, 0.0, -10.053), epsilon = 1e-12);
        let si = BASIS.iter().filter(|b| b.0 == Species::Si).count();
        assert_eq!((si, BASIS.len() - si), (4, 4));
    }

    #[test]
    fn sorted_and_monotone_in_radius() {
        let p = LatticeParams::default();
        let s8 = build_lattice(p, 8.0).unwrap();
        let s9 = build_lattice(p, 9.0).unwrap();
        assert!(s8.iter().all(|s| s.position.norm() <= 8.0));
        for w in s8.windows(2) {
            assert!(quantized_r2(&w[0].position) <= quantized_r2(&w[1].position));
        }
        for s in &s8 {
            assert!(s9.iter().any(|t| t.index == s.index));
        }
        for s in &s9 {
            assert_eq!(s.species, s.index.species());
            assert_eq!(s.position, lat().position(&s.index));
        }
    }

    #[test]
    fn inverse_lookup() {
        let l = lat();
        for s in build_lattice(LatticeParams::default(), 7.0).unwrap() {
            assert_eq!(l.site_at(&s.position), Some(s.index));
        }
        assert_eq!(l.site_at(&Vector3::new(0.3, 0.1, 0.2)), None);
    }

    #[test]
    fn capacity_error() {
        let r = build_lattice_capped(LatticeParams::default(), 50.0, 1000);
        assert!(matches!(r, Err(Error::Capacity(_))));
    }

    #[test]
    fn rejects_bad_ratio() {
        let p = LatticeParams { c: 8.0, ..Default::default() };
        assert!(p.validate().is_err());
    }

    #[test]
    fn csv_export_columns() {
        let sites = build_lattice(LatticeParams::default(), 2.0).unwrap();
        let mut buf = Vec::new();
        write_sites_csv(&mut buf, &sites).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "species,i,j,k,basis,x_A,y_A,z_A");
        let first = lines.next().unwrap();
        assert!(first.starts_with("C,"));
        assert_eq!(first.split(',').next_back().unwrap().split('.').nth(1).unwrap().len(), 6);
        assert_eq!(sites_to_json(&sites).as_array().unwrap().len(), 4);
    }
}
