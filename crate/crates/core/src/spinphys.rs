//! Physical constants, dipolar couplings and hyperfine frequency algebra.
//!
//! Every unit conversion in the crate goes through [`units`]: frequencies are
//! ordinary frequencies in Hz, gyromagnetic ratios are Hz/T, fields are given
//! in gauss at the API boundary and converted to tesla here, and distances are
//! in ångström.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Species;

/// Unit conversion factors. Nothing else in the crate hard-codes these.
pub mod units {
    pub const GAUSS_TO_TESLA: f64 = 1e-4;
    pub const ANGSTROM_CUBED_TO_M3: f64 = 1e-30;
    /// Vacuum permeability over 4π (CODATA 2018), T·m/A.
    pub const MU0_OVER_4PI: f64 = 1.000_000_000_55e-7;
    /// Planck constant (exact, SI 2019), J·s.
    pub const PLANCK: f64 = 6.626_070_15e-34;
    /// Bohr magneton over Planck constant (CODATA 2018), Hz/T.
    pub const BOHR_MAGNETON_OVER_H: f64 = 1.399_624_493_61e10;

    #[inline]
    pub fn gauss_to_tesla(b_gauss: f64) -> f64 {
        b_gauss * GAUSS_TO_TESLA
    }

    #[inline]
    pub fn tesla_to_gauss(b_tesla: f64) -> f64 {
        b_tesla / GAUSS_TO_TESLA
    }

    /// Ordinary frequency (Hz) to angular frequency (rad/s).
    #[inline]
    pub fn hz_to_angular(f_hz: f64) -> f64 {
        std::f64::consts::TAU * f_hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpeciesName {
    Si29,
    C13,
    Electron,
}

/// A spin species with its signed gyromagnetic ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinSpecies {
    pub name: SpeciesName,
    /// Signed gyromagnetic ratio in Hz/T.
    pub gamma: f64,
    /// Spin quantum number (1/2 or 3/2).
    pub spin: f64,
}

/// Literature constants. All of them can be overridden from a JSON file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Constants {
    /// ²⁹Si gyromagnetic ratio, Hz/T.
    pub gamma_si29: f64,
    /// ¹³C gyromagnetic ratio, Hz/T.
    pub gamma_c13: f64,
    /// Electron g-factor (signed).
    pub g_electron: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            gamma_si29: -8.465e6,
            gamma_c13: 10.7084e6,
            g_electron: -2.0028,
        }
    }
}

impl Constants {
    pub fn si29(&self) -> SpinSpecies {
        SpinSpecies {
            name: SpeciesName::Si29,
            gamma: self.gamma_si29,
            spin: 0.5,
        }
    }

    pub fn c13(&self) -> SpinSpecies {
        SpinSpecies {
            name: SpeciesName::C13,
            gamma: self.gamma_c13,
            spin: 0.5,
        }
    }

    /// Electron species, gamma = g μ_B / h.
    pub fn electron(&self) -> SpinSpecies {
        SpinSpecies {
            name: SpeciesName::Electron,
            gamma: self.g_electron * units::BOHR_MAGNETON_OVER_H,
            spin: 1.5,
        }
    }

    pub fn nucleus(&self, species: Species) -> SpinSpecies {
        match species {
            Species::Si => self.si29(),
            Species::C => self.c13(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_si29 < 0.0) {
            return Err(Error::InvalidParameter("gamma_si29 must be negative".into()));
        }
        if !(self.gamma_c13 > 0.0) {
            return Err(Error::InvalidParameter("gamma_c13 must be positive".into()));
        }
        if !(self.g_electron < 0.0) {
            return Err(Error::InvalidParameter("g_electron must be negative".into()));
        }
        Ok(())
    }
}

/// Electron spin projection of the S = 3/2 defect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Ms {
    #[serde(rename = "+3/2")]
    PlusThreeHalves,
    #[serde(rename = "+1/2")]
    PlusHalf,
    #[serde(rename = "-1/2")]
    MinusHalf,
    #[serde(rename = "-3/2")]
    MinusThreeHalves,
}

impl Ms {
    pub const ALL: [Ms; 4] = [
        Ms::PlusThreeHalves,
        Ms::PlusHalf,
        Ms::MinusHalf,
        Ms::MinusThreeHalves,
    ];

    pub fn value(self) -> f64 {
        match self {
            Ms::PlusThreeHalves => 1.5,
            Ms::PlusHalf => 0.5,
            Ms::MinusHalf => -0.5,
            Ms::MinusThreeHalves => -1.5,
        }
    }

    pub fn from_value(m: f64) -> Option<Ms> {
        Ms::ALL.into_iter().find(|ms| ms.value() == m)
    }

    pub fn flipped(self) -> Ms {
        Ms::from_value(-self.value()).expect("closed under negation")
    }
}

impl std::fmt::Display for Ms {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Ms::PlusThreeHalves => "+3/2",
            Ms::PlusHalf => "+1/2",
            Ms::MinusHalf => "-1/2",
            Ms::MinusThreeHalves => "-3/2",
        };
        f.write_str(s)
    }
}

/// Hyperfine components coupling the electron S_z to one nucleus, in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HyperfineTensor {
    pub a_zz: f64,
    pub a_zx: f64,
    pub a_zy: f64,
}

impl HyperfineTensor {
    pub fn new(a_zz: f64, a_zx: f64, a_zy: f64) -> Self {
        Self { a_zz, a_zx, a_zy }
    }

    /// `A_zx = cos(phi) A_perp`, `A_zy = sin(phi) A_perp`.
    pub fn from_parallel_perp(a_zz: f64, a_perp: f64, phi: f64) -> Self {
        Self {
            a_zz,
            a_zx: phi.cos() * a_perp,
            a_zy: phi.sin() * a_perp,
        }
    }

    pub fn a_parallel(&self) -> f64 {
        self.a_zz
    }

    pub fn a_perp(&self) -> f64 {
        self.a_zx.hypot(self.a_zy)
    }

    pub fn is_finite(&self) -> bool {
        self.a_zz.is_finite() && self.a_zx.is_finite() && self.a_zy.is_finite()
    }
}

/// Secular and pseudo-secular part of the internuclear coupling, in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DipolarTensor {
    pub c_zz: f64,
    pub c_zx: f64,
    pub c_zy: f64,
}

/// Magnetic field (gauss) and electron g-factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub b_z: f64,
    pub b_x: f64,
    pub b_y: f64,
    pub g_electron: f64,
}

impl FieldConfig {
    /// Field of the experiment: 1960.9 G along c, aligned.
    pub fn aligned(b_z: f64) -> Self {
        Self {
            b_z,
            b_x: 0.0,
            b_y: 0.0,
            g_electron: Constants::default().g_electron,
        }
    }

    pub fn with_transverse(mut self, b_x: f64, b_y: f64) -> Self {
        self.b_x = b_x;
        self.b_y = b_y;
        self
    }

    pub fn b_z_tesla(&self) -> f64 {
        units::gauss_to_tesla(self.b_z)
    }

    pub fn b_tesla(&self) -> Vector3<f64> {
        Vector3::new(
            units::gauss_to_tesla(self.b_x),
            units::gauss_to_tesla(self.b_y),
            units::gauss_to_tesla(self.b_z),
        )
    }

    /// Electron gyromagnetic ratio implied by this field's g-factor.
    pub fn gamma_electron(&self) -> f64 {
        self.g_electron * units::BOHR_MAGNETON_OVER_H
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b_z > 0.0) || !self.b_z.is_finite() {
            return Err(Error::InvalidParameter(format!("B_z must be > 0, got {}", self.b_z)));
        }
        if !self.b_x.is_finite() || !self.b_y.is_finite() || !self.g_electron.is_finite() {
            return Err(Error::InvalidParameter("non-finite field component".into()));
        }
        Ok(())
    }
}

/// Dipolar prefactor `alpha = mu0 gamma_i gamma_j hbar / 4 pi` expressed in Hz·Å³
/// for gyromagnetic ratios given in Hz/T.
pub fn dipolar_prefactor(gamma_i: f64, gamma_j: f64) -> f64 {
    // With gamma in Hz/T, mu0/4pi * (2 pi gamma_i)(2 pi gamma_j) hbar / h = mu0/4pi * h * gamma_i gamma_j.
    units::MU0_OVER_4PI * units::PLANCK * gamma_i * gamma_j / units::ANGSTROM_CUBED_TO_M3
}

/// Secular dipolar coupling `C_zz` in Hz between two spins (positions in Å).
pub fn dipolar_coupling(
    pos_i: &Vector3<f64>,
    pos_j: &Vector3<f64>,
    species_i: &SpinSpecies,
    species_j: &SpinSpecies,
) -> Result<f64> {
    let alpha = dipolar_prefactor(species_i.gamma, species_j.gamma);
    dipolar_coupling_alpha(&(pos_j - pos_i), alpha)
}

/// `C_zz` for a separation vector and a precomputed prefactor.
pub fn dipolar_coupling_alpha(delta: &Vector3<f64>, alpha: f64) -> Result<f64> {
    let r2 = delta.norm_squared();
    if !(r2 > 0.0) {
        return Err(Error::Domain("coincident spin positions".into()));
    }
    let r = r2.sqrt();
    Ok(alpha / (r2 * r) * (3.0 * delta.z * delta.z / r2 - 1.0))
}

/// Full point-dipole tensor `alpha / r^3 (3 n n^T - 1)` in Hz, consistent in sign
/// with [`dipolar_coupling`] (its zz element equals `C_zz`).
pub fn dipolar_tensor_full(delta: &Vector3<f64>, alpha: f64) -> Result<nalgebra::Matrix3<f64>> {
    let r2 = delta.norm_squared();
    if !(r2 > 0.0) {
        return Err(Error::Domain("coincident spin positions".into()));
    }
    let r = r2.sqrt();
    let n = delta / r;
    Ok((n * n.transpose() * 3.0 - nalgebra::Matrix3::identity()) * (alpha / (r2 * r)))
}

/// SEDOR oscillation frequency for a secular coupling: `|C_zz| / 2`.
pub fn sedor_frequency_from_coupling(c_zz: f64) -> f64 {
    0.5 * c_zz.abs()
}

/// Exact nuclear transition frequency in electron manifold `m_s`:
/// `sqrt((gamma B + m_s A_zz)^2 + (m_s A_perp)^2)`.
pub fn nuclear_transition_frequency(
    field: &FieldConfig,
    species: &SpinSpecies,
    hf: &HyperfineTensor,
    m_s: Ms,
) -> f64 {
    let m = m_s.value();
    let longitudinal = species.gamma * field.b_z_tesla() + m * hf.a_zz;
    longitudinal.hypot(m * hf.a_perp())
}

/// Longitudinal and transverse hyperfine magnitude recovered from a pair of
/// nuclear frequencies. The azimuth of the transverse part is not observable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperfineEstimate {
    pub a_zz: f64,
    pub a_perp: f64,
}

impl HyperfineEstimate {
    pub fn to_tensor(&self, phi: f64) -> HyperfineTensor {
        HyperfineTensor::from_parallel_perp(self.a_zz, self.a_perp, phi)
    }
}

/// Solves the two-manifold frequency equations for `A_zz` and the signed
/// quantity `A_perp^2` (negative when the pair is inconsistent).
pub fn invert_hyperfine_squared(
    f_a: f64,
    f_b: f64,
    field: &FieldConfig,
    species: &SpinSpecies,
    subspaces: (Ms, Ms),
) -> Result<(f64, f64)> {
    let (ma, mb) = (subspaces.0.value(), subspaces.1.value());
    if ma == mb {
        return Err(Error::InvalidParameter("subspaces must be distinct".into()));
    }
    if !(f_a > 0.0 && f_b > 0.0) {
        return Err(Error::InvalidParameter("frequencies must be positive".into()));
    }
    let g = species.gamma * field.b_z_tesla();
    if g == 0.0 {
        return Err(Error::Singularity { term: "nuclear Zeeman frequency".into() });
    }
    // f^2/m^2 = (g/m + A)^2 + P for each manifold; the difference is linear in A.
    let qa = (f_a / ma).powi(2);
    let qb = (f_b / mb).powi(2);
    let inv_a = 1.0 / ma;
    let inv_b = 1.0 / mb;
    let a_zz = (qa - qb - g * g * (inv_a * inv_a - inv_b * inv_b)) / (2.0 * g * (inv_a - inv_b));
    // Average both manifolds for the transverse part; they agree for exact data.
    let sa = g * inv_a + a_zz;
    let sb = g * inv_b + a_zz;
    let pa = (f_a / ma.abs() - sa.abs()) * (f_a / ma.abs() + sa.abs());
    let pb = (f_b / mb.abs() - sb.abs()) * (f_b / mb.abs() + sb.abs());
    Ok((a_zz, 0.5 * (pa + pb)))
}

/// Recovers `(A_zz, A_perp)` from the nuclear frequencies measured in two
/// distinct electron manifolds.
pub fn invert_hyperfine(
    f_a: f64,
    f_b: f64,
    field: &FieldConfig,
    species: &SpinSpecies,
    subspaces: (Ms, Ms),
) -> Result<HyperfineEstimate> {
    let (a_zz, p) = invert_hyperfine_squared(f_a, f_b, field, species, subspaces)?;
    // Round-off tolerance on the transverse square, relative to the largest term.
    let scale = (f_a / subspaces.0.value()).powi(2).max((f_b / subspaces.1.value()).powi(2));
    let a_perp = if p >= 0.0 {
        p.sqrt()
    } else if -p <= 1e-12 * scale {
        0.0
    } else {
        return Err(Error::Inversion { residual: p });
    };
    Ok(HyperfineEstimate { a_zz, a_perp })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PerturbativeOrder {
    Zeroth,
    Second,
}

/// Perturbative nuclear frequency. Order 0 is the signed linear form
/// `gamma B + m_s A_zz`; order 2 adds `m_s^2 A_perp^2 / (2 (gamma B + m_s A_zz))`.
/// The first-order term vanishes identically.
pub fn nuclear_frequency_perturbative(
    field: &FieldConfig,
    species: &SpinSpecies,
    hf: &HyperfineTensor,
    m_s: Ms,
    order: PerturbativeOrder,
) -> Result<f64> {
    let m = m_s.value();
    let f0 = species.gamma * field.b_z_tesla() + m * hf.a_zz;
    match order {
        PerturbativeOrder::Zeroth => Ok(f0),
        PerturbativeOrder::Second => {
            if f0 == 0.0 {
                return Err(Error::Singularity {
                    term: "second-order nuclear frequency (gamma B + m_s A_zz = 0)".into(),
                });
            }
            let ap = m * hf.a_perp();
            Ok(f0 + ap * ap / (2.0 * f0))
        }
    }
}

/// Transverse field from rotational and tilt misalignment angles (degrees).
pub fn transverse_field_from_misalignment(b: f64, angle_rot_deg: f64, angle_tilt_deg: f64) -> f64 {
    let rot = b * angle_rot_deg.to_radians().sin();
    let tilt = b * angle_tilt_deg.to_radians().sin();
    rot.hypot(tilt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn si() -> SpinSpecies {
        Constants::default().si29()
    }

    #[test]
    fn axial_and_equatorial_factors() {
        let alpha = dipolar_prefactor(si().gamma, si().gamma);
        let r = 3.08;
        let axial = dipolar_coupling(&Vector3::zeros(), &Vector3::new(0.0, 0.0, r), &si(), &si()).unwrap();
        assert_relative_eq!(axial, 2.0 * alpha / r.powi(3), max_relative = 1e-14);
        let eq = dipolar_coupling(&Vector3::zeros(), &Vector3::new(r, 0.0, 0.0), &si(), &si()).unwrap();
        assert_relative_eq!(eq, -alpha / r.powi(3), max_relative = 1e-14);
    }

    #[test]
    fn magic_angle_vanishes() {
        let alpha = dipolar_prefactor(si().gamma, si().gamma);
        let r = 4.0_f64;
        let cos_t = (1.0_f64 / 3.0).sqrt();
        let p = Vector3::new(r * (1.0 - cos_t * cos_t).sqrt(), 0.0, r * cos_t);
        let c = dipolar_coupling(&Vector3::zeros(), &p, &si(), &si()).unwrap();
        assert!(c.abs() < 1e-12 * alpha / r.powi(3));
    }

    #[test]
    fn coincident_positions_rejected() {
        let p = Vector3::new(1.0, 2.0, 3.0);
        assert!(matches!(dipolar_coupling(&p, &p, &si(), &si()), Err(Error::Domain(_))));
    }

    #[test]
    fn prefactor_against_hbar_route() {
        // Independent route: mu0/(4 pi) * gamma_rad^2 * hbar, converted J -> Hz.
        let hbar = units::PLANCK / std::f64::consts::TAU;
        let g = si().gamma * std::f64::consts::TAU;
        let joule_m3 = 1.000_000_000_55e-7 * g * g * hbar * hbar;
        let hz_a3 = joule_m3 / units::PLANCK * 1e30;
        assert_relative_eq!(dipolar_prefactor(si().gamma, si().gamma), hz_a3, max_relative = 1e-12);
    }

    #[test]
    fn si_si_axial_at_nearest_separation() {
        // Frozen from an independent 30-digit evaluation of
        // 1e-7*(1+5.5e-10) * 6.62607015e-34 * (8.465e6)^2 * 2 / (3.08e-10)^3.
        let c = dipolar_coupling(&Vector3::zeros(), &Vector3::new(0.0, 0.0, 3.08), &si(), &si()).unwrap();
        assert_relative_eq!(c, 325.003_322_456_511, max_relative = 1e-12);
    }

    #[test]
    fn sedor_from_coupling() {
        assert_eq!(sedor_frequency_from_coupling(0.0), 0.0);
        assert_relative_eq!(sedor_frequency_from_coupling(-371.22), 185.61, max_relative = 1e-15);
        assert_eq!(sedor_frequency_from_coupling(7.0), 3.5);
    }

    #[test]
    fn bare_larmor_and_collinear_limit() {
        let field = FieldConfig::aligned(1960.9);
        let larmor = (si().gamma * field.b_z_tesla()).abs();
        let zero = HyperfineTensor::default();
        assert_relative_eq!(
            nuclear_transition_frequency(&field, &si(), &zero, Ms::PlusThreeHalves),
            larmor,
            max_relative = 1e-15
        );
        let hf = HyperfineTensor::new(-4.8e6, 0.0, 0.0);
        let fp = nuclear_transition_frequency(&field, &si(), &hf, Ms::PlusThreeHalves);
        let fm = nuclear_transition_frequency(&field, &si(), &hf, Ms::MinusThreeHalves);
        assert_relative_eq!(fp, (si().gamma * field.b_z_tesla() + 1.5 * -4.8e6).abs(), max_relative = 1e-15);
        // Splitting between the two manifolds: |f+ - f-| = 3|A_zz| only when both
        // longitudinal terms keep the same sign; here the Zeeman term (-1.66 MHz)
        // is smaller than 1.5|A_zz| so the frequencies straddle zero.
        assert_relative_eq!(fp + fm, 3.0 * 4.8e6, max_relative = 1e-12);
    }

    #[test]
    fn transverse_field_from_quoted_angles() {
        assert!((transverse_field_from_misalignment(1960.9, 0.037, 0.0) - 1.3).abs() < 0.05);
        assert!((transverse_field_from_misalignment(1960.9, 0.0, 0.056) - 1.9).abs() < 0.05);
        assert!((transverse_field_from_misalignment(1960.9, 0.037, 0.056) - 2.3).abs() < 0.05);
        assert_eq!(transverse_field_from_misalignment(500.0, 0.0, 0.0), 0.0);
    }

    #[test]
    fn inversion_round_trip_collinear() {
        let field = FieldConfig::aligned(1960.9);
        let hf = HyperfineTensor::new(-4.8e6, 0.0, 0.0);
        let fp = nuclear_transition_frequency(&field, &si(), &hf, Ms::PlusThreeHalves);
        let fm = nuclear_transition_frequency(&field, &si(), &hf, Ms::MinusThreeHalves);
        let est = invert_hyperfine(fp, fm, &field, &si(), (Ms::PlusThreeHalves, Ms::MinusThreeHalves)).unwrap();
        assert_relative_eq!(est.a_zz, -4.8e6, max_relative = 1e-12);
        assert!(est.a_perp < 1e-3 * 4.8e6 * 1e-3);
    }

    #[test]
    fn inversion_round_trip_with_transverse() {
        let field = FieldConfig::aligned(1960.9);
        let hf = HyperfineTensor::from_parallel_perp(50e3, 20e3, 0.3);
        let fp = nuclear_transition_frequency(&field, &si(), &hf, Ms::PlusThreeHalves);
        let fm = nuclear_transition_frequency(&field, &si(), &hf, Ms::MinusThreeHalves);
        let est = invert_hyperfine(fp, fm, &field, &si(), (Ms::PlusThreeHalves, Ms::MinusThreeHalves)).unwrap();
        assert_relative_eq!(est.a_zz, 50e3, max_relative = 1e-6);
        assert_relative_eq!(est.a_perp, 20e3, max_relative = 1e-6);
        // Works for an asymmetric pair of manifolds as well.
        let f12 = nuclear_transition_frequency(&field, &si(), &hf, Ms::PlusHalf);
        let est = invert_hyperfine(fp, f12, &field, &si(), (Ms::PlusThreeHalves, Ms::PlusHalf)).unwrap();
        assert_relative_eq!(est.a_zz, 50e3, max_relative = 1e-6);
        assert_relative_eq!(est.a_perp, 20e3, max_relative = 1e-6);
    }

    #[test]
    fn inversion_symmetric_and_inconsistent_inputs() {
        let field = FieldConfig::aligned(1960.9);
        let larmor = (si().gamma * field.b_z_tesla()).abs();
        // Equal frequencies in +-3/2 force the A_zz = 0 branch.
        let est = invert_hyperfine(larmor + 10e3, larmor + 10e3, &field, &si(), (Ms::PlusThreeHalves, Ms::MinusThreeHalves)).unwrap();
        assert!(est.a_zz.abs() < 1e-6);
        assert!(est.a_perp > 0.0);
        // Both frequencies below the Larmor frequency cannot be reproduced.
        let err = invert_hyperfine(larmor - 10e3, larmor - 10e3, &field, &si(), (Ms::PlusThreeHalves, Ms::MinusThreeHalves));
        assert!(matches!(err, Err(Error::Inversion { .. })));
        assert!(invert_hyperfine(1.0, 1.0, &field, &si(), (Ms::PlusHalf, Ms::PlusHalf)).is_err());
    }

    #[test]
    fn perturbative_orders() {
        let field = FieldConfig::aligned(1960.9);
        let hf = HyperfineTensor::new(30e3, 0.0, 0.0);
        let f0 = nuclear_frequency_perturbative(&field, &si(), &hf, Ms::PlusThreeHalves, PerturbativeOrder::Zeroth).unwrap();
        let f2 = nuclear_frequency_perturbative(&field, &si(), &hf, Ms::PlusThreeHalves, PerturbativeOrder::Second).unwrap();
        assert_eq!(f0, f2);
        let zero = HyperfineTensor::new(0.0, 10e3, 0.0);
        let a = nuclear_frequency_perturbative(&field, &si(), &zero, Ms::PlusThreeHalves, PerturbativeOrder::Zeroth).unwrap();
        let b = nuclear_frequency_perturbative(&field, &si(), &zero, Ms::MinusThreeHalves, PerturbativeOrder::Zeroth).unwrap();
        assert_eq!(a, b);
        // Taylor oracle: error of order 2 against the exact root is O(A_perp^4 / f0^3).
        let hf = HyperfineTensor::from_parallel_perp(30e3, 40e3, 1.0);
        let exact = nuclear_transition_frequency(&field, &si(), &hf, Ms::PlusThreeHalves);
        let f2 = nuclear_frequency_perturbative(&field, &si(), &hf, Ms::PlusThreeHalves, PerturbativeOrder::Second).unwrap();
        let f0 = nuclear_frequency_perturbative(&field, &si(), &hf, Ms::PlusThreeHalves, PerturbativeOrder::Zeroth).unwrap();
        let x = (1.5 * 40e3_f64).powi(2);
        let bound = x * x / (8.0 * f0.abs().powi(3));
        assert!(((f2.abs() - exact).abs() - bound).abs() < 0.05 * bound);
        let singular = HyperfineTensor::new(si().gamma * field.b_z_tesla() / -1.5, 1e3, 0.0);
        assert!(nuclear_frequency_perturbative(&field, &si(), &singular, Ms::PlusThreeHalves, PerturbativeOrder::Second).is_err());
    }

    #[test]
    fn constants_json_round_trip() {
        let c = Constants::default();
        let text = serde_json::to_string(&c).unwrap();
        let back: Constants = serde_json::from_str(&text).unwrap();
        assert_eq!(c, back);
        let partial: Constants = serde_json::from_str(r#"{"g_electron": -2.0012}"#).unwrap();
        assert_eq!(partial.gamma_si29, c.gamma_si29);
        assert_eq!(partial.g_electron, -2.0012);
        assert!(c.validate().is_ok());
        assert!(c.electron().gamma.abs() > 1000.0 * c.c13().gamma.abs());
    }
}
