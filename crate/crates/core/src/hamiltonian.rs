//! Electron (S = 3/2) plus two nuclear spins: exact diagonalization and the
//! second-order corrections to the SEDOR frequency.
//!
//! `H = D Sz^2 + gamma_e B.S + sum_j gamma_j B.I_j + sum_j S.A_j.I_j + I_1.C.I_2`,
//! all in Hz. Each hyperfine tensor is symmetric with only the
//! `zz`, `zx = xz` and `zy = yz` entries populated. The product basis index is
//! `4 * ms_index + 2 * m1_index + m2_index` with `m_s` ordered `+3/2 .. -3/2` and
//! nuclear projections ordered `+1/2, -1/2`.

use nalgebra::{Complex, Matrix3, SMatrix, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spinphys::{
    dipolar_prefactor, dipolar_tensor_full, units, DipolarTensor, FieldConfig, HyperfineTensor, Ms,
    SpinSpecies,
};

type C64 = Complex<f64>;
type Op4 = SMatrix<C64, 4, 4>;
type Op2 = SMatrix<C64, 2, 2>;
pub type Op16 = SMatrix<C64, 16, 16>;

/// Overlap below which an eigenstate is considered unassignable.
pub const LABEL_OVERLAP_THRESHOLD: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mi {
    #[serde(rename = "+1/2")]
    Up,
    #[serde(rename = "-1/2")]
    Down,
}

impl Mi {
    pub const ALL: [Mi; 2] = [Mi::Up, Mi::Down];

    pub fn value(self) -> f64 {
        match self {
            Mi::Up => 0.5,
            Mi::Down => -0.5,
        }
    }

    fn index(self) -> usize {
        match self {
            Mi::Up => 0,
            Mi::Down => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EigenstateLabel {
    pub m_s: Ms,
    pub m1: Mi,
    pub m2: Mi,
}

impl EigenstateLabel {
    pub fn new(m_s: Ms, m1: Mi, m2: Mi) -> Self {
        Self { m_s, m1, m2 }
    }

    pub fn index(&self) -> usize {
        let ms = Ms::ALL.iter().position(|m| *m == self.m_s).expect("valid m_s");
        4 * ms + 2 * self.m1.index() + self.m2.index()
    }

    pub fn from_index(i: usize) -> Self {
        Self {
            m_s: Ms::ALL[i / 4],
            m1: Mi::ALL[(i / 2) % 2],
            m2: Mi::ALL[i % 2],
        }
    }

    pub fn all() -> impl Iterator<Item = EigenstateLabel> {
        (0..16).map(Self::from_index)
    }
}

impl std::fmt::Display for EigenstateLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "|{}, {:+}, {:+}>", self.m_s, self.m1.value(), self.m2.value())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nucleus {
    pub species: SpinSpecies,
    pub hyperfine: HyperfineTensor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinSystemSpec {
    /// Zero-field splitting parameter, Hz.
    pub d: f64,
    pub field: FieldConfig,
    pub nuclei: [Nucleus; 2],
    /// Full internuclear tensor `C` in `I_1.C.I_2`, Hz.
    pub pair: Matrix3<f64>,
}

impl SpinSystemSpec {
    /// Pair tensor from the point-dipole formula for nucleus 2 at `delta` from nucleus 1 (Å).
    pub fn with_geometry(d: f64, field: FieldConfig, nuclei: [Nucleus; 2], delta: &Vector3<f64>) -> Result<Self> {
        let alpha = dipolar_prefactor(nuclei[0].species.gamma, nuclei[1].species.gamma);
        Ok(Self {
            d,
            field,
            nuclei,
            pair: dipolar_tensor_full(delta, alpha)?,
        })
    }

    /// Pair tensor completed from its secular part as a traceless axial tensor
    /// (`C_xx = C_yy = -C_zz/2`, `C_xy = 0`).
    pub fn with_secular_pair(d: f64, field: FieldConfig, nuclei: [Nucleus; 2], c: DipolarTensor) -> Self {
        let pair = Matrix3::new(
            -0.5 * c.c_zz, 0.0, c.c_zx, //
            0.0, -0.5 * c.c_zz, c.c_zy, //
            c.c_zx, c.c_zy, c.c_zz,
        );
        Self { d, field, nuclei, pair }
    }

    pub fn c_zz(&self) -> f64 {
        self.pair[(2, 2)]
    }

    pub fn secular_pair(&self) -> DipolarTensor {
        DipolarTensor {
            c_zz: self.pair[(2, 2)],
            c_zx: 0.5 * (self.pair[(0, 2)] + self.pair[(2, 0)]),
            c_zy: 0.5 * (self.pair[(1, 2)] + self.pair[(2, 1)]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.field.validate()?;
        let finite = self.d.is_finite()
            && self.pair.iter().all(|v| v.is_finite())
            && self.nuclei.iter().all(|n| n.hyperfine.is_finite() && n.species.gamma.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("non-finite entry in spin system".into()));
        }
        Ok(())
    }
}

fn c(re: f64) -> C64 {
    Complex::new(re, 0.0)
}

struct SpinOps {
    sx: Op4,
    sy: Op4,
    sz: Op4,
    ix: Op2,
    iy: Op2,
    iz: Op2,
    e4: Op4,
    e2: Op2,
}

impl SpinOps {
    fn new() -> Self {
        let s3 = 3.0_f64.sqrt();
        // <m+1|S+|m> for m = 1/2, -1/2, -3/2 in the descending basis.
        let mut sp = Op4::zeros();
        sp[(0, 1)] = c(s3);
        sp[(1, 2)] = c(2.0);
        sp[(2, 3)] = c(s3);
        let sm = sp.adjoint();
        let half = c(0.5);
        let sx = (sp + sm) * half;
        let sy = (sp - sm) * Complex::new(0.0, -0.5);
        let sz = Op4::from_diagonal(&nalgebra::Vector4::new(c(1.5), c(0.5), c(-0.5), c(-1.5)));
        let ix = Op2::new(c(0.0), half, half, c(0.0));
        let iy = Op2::new(c(0.0), Complex::new(0.0, -0.5), Complex::new(0.0, 0.5), c(0.0));
        let iz = Op2::new(half, c(0.0), c(0.0), c(-0.5));
        Self {
            sx,
            sy,
            sz,
            ix,
            iy,
            iz,
            e4: Op4::identity(),
            e2: Op2::identity(),
        }
    }
}

fn kron3(a: &Op4, b: &Op2, d: &Op2) -> Op16 {
    let mut out = Op16::zeros();
    for i in 0..4 {
        for j in 0..4 {
            let aij = a[(i, j)];
            if aij == c(0.0) {
                continue;
            }
            for k in 0..2 {
                for l in 0..2 {
                    let bkl = aij * b[(k, l)];
                    if bkl == c(0.0) {
                        continue;
                    }
                    for m in 0..2 {
                        for n in 0..2 {
                            out[(4 * i + 2 * k + m, 4 * j + 2 * l + n)] += bkl * d[(m, n)];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Full 16×16 Hamiltonian in Hz.
pub fn build_hamiltonian(spec: &SpinSystemSpec) -> Result<Op16> {
    spec.validate()?;
    let ops = SpinOps::new();
    let b = spec.field.b_tesla();
    let ge = spec.field.gamma_electron();
    let s = [ops.sx, ops.sy, ops.sz];
    let i = [ops.ix, ops.iy, ops.iz];

    let mut electron = ops.sz * ops.sz * c(spec.d);
    for k in 0..3 {
        electron += s[k] * c(ge * b[k]);
    }
    let mut h = kron3(&electron, &ops.e2, &ops.e2);

    for (j, nuc) in spec.nuclei.iter().enumerate() {
        let mut zeeman = Op2::zeros();
        for k in 0..3 {
            zeeman += i[k] * c(nuc.species.gamma * b[k]);
        }
        h += embed_nuclear(&ops.e4, &zeeman, j, &ops.e2);
        let a = hyperfine_matrix(&nuc.hyperfine);
        for p in 0..3 {
            for q in 0..3 {
                if a[(p, q)] != 0.0 {
                    h += embed_nuclear(&s[p], &(i[q] * c(a[(p, q)])), j, &ops.e2);
                }
            }
        }
    }
    for p in 0..3 {
        for q in 0..3 {
            if spec.pair[(p, q)] != 0.0 {
                h += kron3(&ops.e4, &i[p], &(i[q] * c(spec.pair[(p, q)])));
            }
        }
    }
    Ok(h)
}

fn embed_nuclear(electron: &Op4, op: &Op2, j: usize, e2: &Op2) -> Op16 {
    if j == 0 {
        kron3(electron, op, e2)
    } else {
        kron3(electron, e2, op)
    }
}

fn hyperfine_matrix(hf: &HyperfineTensor) -> Matrix3<f64> {
    Matrix3::new(
        0.0, 0.0, hf.a_zx, //
        0.0, 0.0, hf.a_zy, //
        hf.a_zx, hf.a_zy, hf.a_zz,
    )
}

/// Closed-form eigenenergy of the secular Hamiltonian.
pub fn eigenenergy_zeroth(spec: &SpinSystemSpec, label: EigenstateLabel) -> f64 {
    let bz = spec.field.b_z_tesla();
    let ms = label.m_s.value();
    let (m1, m2) = (label.m1.value(), label.m2.value());
    let [n1, n2] = &spec.nuclei;
    ms * ms * spec.d
        + spec.field.gamma_electron() * bz * ms
        + n1.species.gamma * bz * m1
        + n2.species.gamma * bz * m2
        + ms * m1 * n1.hyperfine.a_zz
        + ms * m2 * n2.hyperfine.a_zz
        + m1 * m2 * spec.c_zz()
}

/// Eigenvalues of the full Hamiltonian keyed by their zeroth-order label.
#[derive(Debug, Clone)]
pub struct LabeledSpectrum {
    /// Energy (Hz) for each label, indexed by [`EigenstateLabel::index`].
    pub energies: [f64; 16],
    /// Squared overlap of each labelled eigenvector with its basis state.
    pub overlaps: [f64; 16],
}

impl LabeledSpectrum {
    pub fn energy(&self, label: EigenstateLabel) -> f64 {
        self.energies[label.index()]
    }

    /// `lambda(++) + lambda(--) - lambda(-+) - lambda(+-)` within one manifold.
    pub fn sedor_combination(&self, m_s: Ms) -> f64 {
        let e = |m1, m2| self.energy(EigenstateLabel::new(m_s, m1, m2));
        e(Mi::Up, Mi::Up) + e(Mi::Down, Mi::Down) - e(Mi::Down, Mi::Up) - e(Mi::Up, Mi::Down)
    }
}

/// Diagonalizes the full Hamiltonian and assigns each eigenvector to the basis
/// state it overlaps most.
pub fn exact_spectrum(spec: &SpinSystemSpec) -> Result<LabeledSpectrum> {
    let h = build_hamiltonian(spec)?;
    // Remove the large diagonal offsets before diagonalizing so that the
    // eigensolver's absolute error is set by the small couplings.
    let shift: Vec<f64> = (0..16).map(|i| h[(i, i)].re).collect();
    let mean = shift.iter().sum::<f64>() / 16.0;
    let mut hs = h;
    for i in 0..16 {
        hs[(i, i)] -= c(mean);
    }
    let eig = hs.symmetric_eigen();
    let mut energies = [f64::NAN; 16];
    let mut overlaps = [0.0; 16];
    for col in 0..16 {
        let v = eig.eigenvectors.column(col);
        let (best, weight) = v
            .iter()
            .enumerate()
            .map(|(i, z)| (i, z.norm_sqr()))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        let label = EigenstateLabel::from_index(best);
        if weight < LABEL_OVERLAP_THRESHOLD {
            return Err(Error::Labeling { state: label.to_string(), overlap: weight });
        }
        if !energies[best].is_nan() {
            return Err(Error::Labeling { state: label.to_string(), overlap: weight });
        }
        energies[best] = eig.eigenvalues[col] + mean;
        overlaps[best] = weight;
    }
    Ok(LabeledSpectrum { energies, overlaps })
}

/// SEDOR frequency from the exact eigenenergies in manifold `m_s`.
pub fn sedor_frequency_exact(spec: &SpinSystemSpec, m_s: Ms) -> Result<f64> {
    Ok(0.5 * exact_spectrum(spec)?.sedor_combination(m_s).abs())
}

/// Mean of the exact SEDOR frequency over `m_s = +3/2` and `-3/2`.
pub fn subspace_averaged_sedor(spec: &SpinSystemSpec) -> Result<f64> {
    let s = exact_spectrum(spec)?;
    Ok(0.25
        * (s.sedor_combination(Ms::PlusThreeHalves).abs() + s.sedor_combination(Ms::MinusThreeHalves).abs()))
}

/// Second-order shifts of `lambda(++) + lambda(--) - lambda(-+) - lambda(+-)`.
///
/// `dl1` is the electron-mediated term. The nuclear-tilt shifts are split by
/// parity in `m_s`: `dl2 = m_s dl2_0 + dl2_1` from the transverse hyperfine
/// field and `dl3 = dl3_0 + m_s dl3_1` from the transverse external field.
/// `tilt_remainder` carries the remaining higher-order part of the tilted-axis
/// coupling, which matters for strongly coupled nuclei.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderCorrection {
    pub m_s: Ms,
    pub dl1: f64,
    pub dl2_0: f64,
    pub dl2_1: f64,
    pub dl3_0: f64,
    pub dl3_1: f64,
    pub tilt_remainder: f64,
}

impl SecondOrderCorrection {
    pub fn dl2(&self) -> f64 {
        self.m_s.value() * self.dl2_0 + self.dl2_1
    }

    pub fn dl3(&self) -> f64 {
        self.dl3_0 + self.m_s.value() * self.dl3_1
    }

    /// Total shift of the four-level combination.
    pub fn total(&self) -> f64 {
        self.dl1 + self.dl2() + self.dl3() + self.tilt_remainder
    }

    /// Corrected SEDOR frequency for secular coupling `c_zz`.
    pub fn frequency(&self, c_zz: f64) -> f64 {
        0.5 * (c_zz + self.total()).abs()
    }
}

struct TiltTerms {
    hyperfine: f64,
    field: f64,
    remainder: f64,
}

fn tilt_terms(spec: &SpinSystemSpec, m_s: f64) -> Result<TiltTerms> {
    let b = spec.field.b_tesla();
    let cp = &spec.pair;
    // Column of C seen by each nucleus' transverse components.
    let c_perp = [
        Vector3::new(cp[(0, 2)], cp[(1, 2)], 0.0),
        Vector3::new(cp[(2, 0)], cp[(2, 1)], 0.0),
    ];
    let mut axes = [Vector3::zeros(); 2];
    let mut t = TiltTerms { hyperfine: 0.0, field: 0.0, remainder: 0.0 };
    for (j, nuc) in spec.nuclei.iter().enumerate() {
        let g = nuc.species.gamma;
        let hf = &nuc.hyperfine;
        let hz = g * b.z + m_s * hf.a_zz;
        if hz == 0.0 {
            return Err(Error::Singularity {
                term: format!("nuclear tilt of nucleus {} (gamma B_z + m_s A_zz = 0)", j + 1),
            });
        }
        let h_hf = Vector3::new(m_s * hf.a_zx, m_s * hf.a_zy, 0.0);
        let h_b = Vector3::new(g * b.x, g * b.y, 0.0);
        t.hyperfine += h_hf.dot(&c_perp[j]) / hz;
        t.field += h_b.dot(&c_perp[j]) / hz;
        let h = h_hf + h_b + Vector3::new(0.0, 0.0, hz);
        axes[j] = h.normalize() * hz.signum();
    }
    let full = (axes[0].transpose() * cp * axes[1])[(0, 0)];
    t.remainder = full - cp[(2, 2)] - t.hyperfine - t.field;
    Ok(t)
}

fn electron_flip_term(spec: &SpinSystemSpec, m_s: Ms) -> Result<f64> {
    let ms = m_s.value();
    let m_other = ms - ms.signum();
    let ge = spec.field.gamma_electron();
    let b = spec.field.b_tesla();
    let [n1, n2] = &spec.nuclei;
    let mut sum = 0.0;
    for m1 in Mi::ALL {
        for m2 in Mi::ALL {
            let (v1, v2) = (m1.value(), m2.value());
            let bx = ge * b.x + n1.hyperfine.a_zx * v1 + n2.hyperfine.a_zx * v2;
            let by = ge * b.y + n1.hyperfine.a_zy * v1 + n2.hyperfine.a_zy * v2;
            let denom = spec.d * (ms * ms - m_other * m_other)
                + (ms - m_other) * (ge * b.z + n1.hyperfine.a_zz * v1 + n2.hyperfine.a_zz * v2);
            if denom == 0.0 {
                return Err(Error::Singularity { term: "dl1 (electron level crossing)".into() });
            }
            // |<m_s -/+ 1| S_-/+ |m_s>|^2 = 3 for the outer levels.
            let shift = 0.75 * (bx * bx + by * by) / denom;
            sum += 4.0 * v1 * v2 * shift;
        }
    }
    Ok(sum)
}

/// Second-order correction terms for `m_s = +3/2` or `-3/2`.
pub fn sedor_correction_second_order(spec: &SpinSystemSpec, m_s: Ms) -> Result<SecondOrderCorrection> {
    if !matches!(m_s, Ms::PlusThreeHalves | Ms::MinusThreeHalves) {
        return Err(Error::InvalidParameter("corrections are defined for m_s = +-3/2".into()));
    }
    spec.validate()?;
    let plus = tilt_terms(spec, 1.5)?;
    let minus = tilt_terms(spec, -1.5)?;
    let this = if m_s == Ms::PlusThreeHalves { &plus } else { &minus };
    Ok(SecondOrderCorrection {
        m_s,
        dl1: electron_flip_term(spec, m_s)?,
        dl2_0: (plus.hyperfine - minus.hyperfine) / 3.0,
        dl2_1: 0.5 * (plus.hyperfine + minus.hyperfine),
        dl3_0: 0.5 * (plus.field + minus.field),
        dl3_1: (plus.field - minus.field) / 3.0,
        tilt_remainder: this.remainder,
    })
}

/// Leading-order closed forms of the corrections (small-tilt expansion).
pub fn sedor_correction_leading(spec: &SpinSystemSpec, m_s: Ms) -> Result<SecondOrderCorrection> {
    spec.validate()?;
    let ms = m_s.value();
    let b = spec.field.b_tesla();
    let ge = spec.field.gamma_electron();
    let cp = &spec.pair;
    let c_perp = [(cp[(0, 2)], cp[(1, 2)]), (cp[(2, 0)], cp[(2, 1)])];
    let [n1, n2] = &spec.nuclei;
    let denom1 = ms * ge * b.z + 3.0 * spec.d;
    if denom1 == 0.0 {
        return Err(Error::Singularity { term: "dl1".into() });
    }
    let dl1 = 2.25 * (n1.hyperfine.a_zx * n2.hyperfine.a_zx + n1.hyperfine.a_zy * n2.hyperfine.a_zy) / denom1;
    let (mut dl2_0, mut dl2_1, mut dl3_0, mut dl3_1) = (0.0, 0.0, 0.0, 0.0);
    for (j, nuc) in spec.nuclei.iter().enumerate() {
        let gb = nuc.species.gamma * b.z;
        if gb == 0.0 {
            return Err(Error::Singularity { term: format!("nuclear Zeeman of nucleus {}", j + 1) });
        }
        let (cx, cy) = c_perp[j];
        let ac = nuc.hyperfine.a_zx * cx + nuc.hyperfine.a_zy * cy;
        let bc = b.x * cx + b.y * cy;
        dl2_0 += ac / gb;
        dl2_1 -= 2.25 * nuc.hyperfine.a_zz * ac / (gb * gb);
        dl3_0 += bc / b.z;
        dl3_1 -= nuc.hyperfine.a_zz * bc / (b.z * gb);
    }
    Ok(SecondOrderCorrection {
        m_s,
        dl1,
        dl2_0,
        dl2_1,
        dl3_0,
        dl3_1,
        tilt_remainder: 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum SubspaceMode {
    #[serde(rename = "ms_plus_3_2", alias = "+3/2")]
    MsPlus32,
    #[serde(rename = "ms_minus_3_2", alias = "-3/2")]
    MsMinus32,
    #[default]
    #[serde(rename = "averaged")]
    Averaged,
}

impl SubspaceMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SubspaceMode::MsPlus32 => "ms_plus_3_2",
            SubspaceMode::MsMinus32 => "ms_minus_3_2",
            SubspaceMode::Averaged => "averaged",
        }
    }
}

impl std::str::FromStr for SubspaceMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ms_plus_3_2" | "+3/2" => Ok(SubspaceMode::MsPlus32),
            "ms_minus_3_2" | "-3/2" => Ok(SubspaceMode::MsMinus32),
            "averaged" => Ok(SubspaceMode::Averaged),
            _ => Err(Error::Format(format!("unknown subspace mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub phi1: f64,
    pub phi2: f64,
    pub plus: f64,
    pub minus: f64,
    pub averaged: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub c_zz: f64,
    /// Worst |f - |C_zz|/2| over the grid and over both outer manifolds.
    pub max_single: f64,
    pub max_averaged: f64,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn max_for(&self, mode: SubspaceMode) -> f64 {
        match mode {
            SubspaceMode::MsPlus32 => self.points.iter().map(|p| p.plus).fold(0.0, f64::max),
            SubspaceMode::MsMinus32 => self.points.iter().map(|p| p.minus).fold(0.0, f64::max),
            SubspaceMode::Averaged => self.max_averaged,
        }
    }

    /// CSV rows `pair,ms_mode,phi1_rad,phi2_rad,deviation_hz`.
    pub fn write_csv<W: std::io::Write>(&self, pair: &str, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["pair", "ms_mode", "phi1_rad", "phi2_rad", "deviation_hz"])?;
        for p in &self.points {
            for (mode, v) in [
                (SubspaceMode::MsPlus32, p.plus),
                (SubspaceMode::MsMinus32, p.minus),
                (SubspaceMode::Averaged, p.averaged),
            ] {
                w.write_record([
                    pair.to_string(),
                    mode.as_str().to_string(),
                    format!("{:.6}", p.phi1),
                    format!("{:.6}", p.phi2),
                    format!("{:.6}", v),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Sweeps the transverse hyperfine azimuth of both nuclei (keeping each
/// `A_perp`) with a transverse field of `transverse_field` gauss along x, and
/// records the deviation of the exact SEDOR frequency from `|C_zz|/2`.
pub fn deviation_sweep(template: &SpinSystemSpec, phi_grid: &[f64], transverse_field: f64) -> Result<SweepResult> {
    let mut base = *template;
    base.field.b_x = transverse_field;
    base.field.b_y = 0.0;
    let ap = [
        template.nuclei[0].hyperfine.a_perp(),
        template.nuclei[1].hyperfine.a_perp(),
    ];
    let target = 0.5 * template.c_zz().abs();
    let grid: Vec<(f64, f64)> = phi_grid
        .iter()
        .flat_map(|&p1| phi_grid.iter().map(move |&p2| (p1, p2)))
        .collect();
    let points: Result<Vec<SweepPoint>> = grid
        .par_iter()
        .map(|&(phi1, phi2)| {
            let mut spec = base;
            spec.nuclei[0].hyperfine = HyperfineTensor::from_parallel_perp(spec.nuclei[0].hyperfine.a_zz, ap[0], phi1);
            spec.nuclei[1].hyperfine = HyperfineTensor::from_parallel_perp(spec.nuclei[1].hyperfine.a_zz, ap[1], phi2);
            let s = exact_spectrum(&spec)?;
            let fp = 0.5 * s.sedor_combination(Ms::PlusThreeHalves).abs();
            let fm = 0.5 * s.sedor_combination(Ms::MinusThreeHalves).abs();
            Ok(SweepPoint {
                phi1,
                phi2,
                plus: (fp - target).abs(),
                minus: (fm - target).abs(),
                averaged: (0.5 * (fp + fm) - target).abs(),
            })
        })
        .collect();
    let points = points?;
    let max_single = points.iter().map(|p| p.plus.max(p.minus)).fold(0.0, f64::max);
    let max_averaged = points.iter().map(|p| p.averaged).fold(0.0, f64::max);
    Ok(SweepResult {
        c_zz: template.c_zz(),
        max_single,
        max_averaged,
        points,
    })
}

/// Evenly spaced azimuths on `[0, 2 pi)`.
pub fn phi_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| std::f64::consts::TAU * k as f64 / n as f64).collect()
}

/// Default transverse field assumed for tolerance sweeps, gauss.
pub const DEFAULT_TRANSVERSE_FIELD: f64 = 2.3;
/// Default zero-field splitting, Hz.
pub const DEFAULT_D: f64 = 35e6;

/// Magnetic field of the experiment, gauss.
pub const EXPERIMENT_FIELD: f64 = 1960.9;

/// Converts a field in gauss to the electron Larmor frequency for `field.g_electron`.
pub fn electron_larmor(field: &FieldConfig) -> f64 {
    field.gamma_electron() * units::gauss_to_tesla(field.b_z)
}
