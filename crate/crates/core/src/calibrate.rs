//! Field-offset and g-factor calibration from hyperfine mismatch, bath-line
//! centre shifts, and the experiment-vs-DFT hyperfine comparison.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsq::{levenberg_marquardt, LeastSquaresProblem, LmConfig};
use crate::spinphys::{invert_hyperfine_squared, units, FieldConfig, HyperfineEstimate, Ms, SpinSpecies};

/// Nuclear frequencies of one spin in two electron manifolds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinFrequencies {
    pub label: String,
    pub f_a: f64,
    pub ms_a: Ms,
    pub f_b: f64,
    pub ms_b: Ms,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MismatchMetric {
    /// `|A_perp,exp - A_perp,dft|`
    #[default]
    Perp,
    /// Euclidean distance in the (A_zz, A_perp) plane.
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanGrid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Default for ScanGrid {
    fn default() -> Self {
        Self { min: -5.0, max: 5.0, step: 0.01 }
    }
}

impl ScanGrid {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || !(self.max > self.min) || !self.min.is_finite() || !self.max.is_finite() {
            return Err(Error::InvalidParameter(format!("bad delta-B grid {self:?}")));
        }
        let n = ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1;
        if n < 3 {
            return Err(Error::InvalidParameter("delta-B grid needs at least 3 points".into()));
        }
        Ok((0..n).map(|i| self.min + i as f64 * self.step).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldScanResult {
    pub label: String,
    /// G
    pub delta_b: f64,
    /// Hz; signed square root of the recovered `A_perp^2` at `delta_b`.
    pub a_perp: f64,
    pub a_zz: f64,
    /// Hz
    pub mismatch: f64,
    /// Second difference of the mismatch around the grid minimum.
    pub curvature: f64,
}

fn signed_sqrt(p: f64) -> f64 {
    p.signum() * p.abs().sqrt()
}

/// Hyperfine components recovered with the field shifted by `delta_b` (G).
/// `A_perp` is the signed root of the recovered square, so the value is
/// continuous when the square crosses zero.
pub fn hyperfine_at_offset(
    freqs: &SpinFrequencies,
    field: &FieldConfig,
    species: &SpinSpecies,
    delta_b: f64,
) -> Result<HyperfineEstimate> {
    let shifted = FieldConfig { b_z: field.b_z + delta_b, ..*field };
    let (a_zz, p) = invert_hyperfine_squared(freqs.f_a, freqs.f_b, &shifted, species, (freqs.ms_a, freqs.ms_b))?;
    Ok(HyperfineEstimate { a_zz, a_perp: signed_sqrt(p) })
}

fn mismatch(est: &HyperfineEstimate, dft: &HyperfineEstimate, metric: MismatchMetric) -> f64 {
    match metric {
        MismatchMetric::Perp => (est.a_perp - dft.a_perp).abs(),
        MismatchMetric::Joint => (est.a_zz - dft.a_zz).hypot(est.a_perp - dft.a_perp),
    }
}

/// Scan a field correction and return the one that best matches the DFT
/// hyperfine values. The grid minimum is refined by the zero crossing of the
/// signed `A_perp` difference when one brackets it, else by a parabola.
pub fn field_scan_min_aperp(
    freqs: &SpinFrequencies,
    dft: &HyperfineEstimate,
    field: &FieldConfig,
    species: &SpinSpecies,
    grid: &ScanGrid,
    metric: MismatchMetric,
) -> Result<FieldScanResult> {
    field.validate()?;
    let points = grid.points()?;
    let estimates: Vec<HyperfineEstimate> = points
        .par_iter()
        .map(|&db| hyperfine_at_offset(freqs, field, species, db))
        .collect::<Result<_>>()?;
    let values: Vec<f64> = estimates.iter().map(|e| mismatch(e, dft, metric)).collect();
    // Strict comparison keeps the lowest delta-B on ties.
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    if best == 0 || best == points.len() - 1 {
        return Err(Error::ScanBoundary { delta_b: points[best] });
    }
    let (ym, y0, yp) = (values[best - 1], values[best], values[best + 1]);
    let curvature = ym - 2.0 * y0 + yp;

    let diff = |i: usize| estimates[i].a_perp - dft.a_perp;
    let mut delta_b = points[best];
    let crossing = if metric == MismatchMetric::Perp {
        [(best - 1, best), (best, best + 1)]
            .into_iter()
            .find(|&(i, j)| diff(i) * diff(j) <= 0.0 && diff(i) != diff(j))
    } else {
        None
    };
    if let Some((i, j)) = crossing {
        let t = diff(i) / (diff(i) - diff(j));
        delta_b = points[i] + t * (points[j] - points[i]);
    } else if curvature > 0.0 {
        let offset = 0.5 * (ym - yp) / curvature;
        delta_b += offset.clamp(-1.0, 1.0) * grid.step;
    }
    let est = hyperfine_at_offset(freqs, field, species, delta_b)?;
    Ok(FieldScanResult {
        label: freqs.label.clone(),
        delta_b,
        a_perp: est.a_perp,
        a_zz: est.a_zz,
        mismatch: mismatch(&est, dft, metric),
        curvature,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    /// G
    pub delta_b: f64,
    pub delta_b_uncertainty: f64,
    /// `delta_b / B`
    pub relative_shift: f64,
    pub relative_shift_uncertainty: f64,
    pub g_factor: f64,
    pub g_uncertainty: f64,
    pub per_spin: Vec<FieldScanResult>,
}

/// Apply the relative field correction `delta_b / B` to the magnitude of the
/// baseline g-factor, propagating the uncertainty linearly.
pub fn g_factor_from_delta_b(delta_b: f64, delta_b_unc: f64, b: f64, g_baseline: f64) -> Result<CalibrationResult> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::InvalidParameter(format!("B must be > 0, got {b}")));
    }
    let rel = delta_b / b;
    let rel_unc = delta_b_unc.abs() / b;
    Ok(CalibrationResult {
        delta_b,
        delta_b_uncertainty: delta_b_unc.abs(),
        relative_shift: rel,
        relative_shift_uncertainty: rel_unc,
        g_factor: g_baseline * (1.0 + rel),
        g_uncertainty: g_baseline.abs() * rel_unc,
        per_spin: Vec::new(),
    })
}

/// Combine per-spin scans into one correction. The correction is their mean.
/// Its uncertainty is the distance to an independent bath-line estimate when
/// one is given, else half the spread of the per-spin values.
pub fn combine_scans(
    per_spin: Vec<FieldScanResult>,
    bath_delta_b: Option<f64>,
    b: f64,
    g_baseline: f64,
) -> Result<CalibrationResult> {
    if per_spin.is_empty() {
        return Err(Error::InvalidParameter("no per-spin scans to combine".into()));
    }
    let n = per_spin.len() as f64;
    let mean = per_spin.iter().map(|s| s.delta_b).sum::<f64>() / n;
    let unc = match bath_delta_b {
        Some(bath) => (bath - mean).abs(),
        None => {
            let lo = per_spin.iter().map(|s| s.delta_b).fold(f64::INFINITY, f64::min);
            let hi = per_spin.iter().map(|s| s.delta_b).fold(f64::NEG_INFINITY, f64::max);
            0.5 * (hi - lo)
        }
    };
    let mut out = g_factor_from_delta_b(mean, unc, b, g_baseline)?;
    out.per_spin = per_spin;
    Ok(out)
}

/// `|df/dA_perp| = m_s^2 A_perp / f` for the exact two-level frequency.
pub fn aperp_sensitivity(a_zz: f64, a_perp: f64, field: &FieldConfig, species: &SpinSpecies, m_s: Ms) -> f64 {
    let m = m_s.value();
    let long = species.gamma * field.b_z_tesla() + m * a_zz;
    let f = long.hypot(m * a_perp);
    if f == 0.0 {
        return 0.0;
    }
    (m * m * a_perp / f).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub amplitude: f64,
    /// Hz
    pub center: f64,
    pub width: f64,
    pub baseline: f64,
    pub center_stderr: f64,
    /// Amplitude over the RMS fit residual.
    pub snr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathShift {
    pub fit: GaussianFit,
    /// Hz, fitted centre minus `|gamma| B`.
    pub delta_f: f64,
    /// G
    pub delta_b: f64,
    pub delta_b_stderr: f64,
}

struct GaussianProblem<'a> {
    f: &'a [f64],
    y: &'a [f64],
    scale: f64,
}

impl GaussianProblem<'_> {
    // Parameters: amplitude, centre, log width, baseline. Frequencies are
    // shifted and scaled to keep the Jacobian columns comparable.
    fn eval(&self, x: &DVector<f64>, f: f64) -> (f64, [f64; 4]) {
        let w = x[2].exp();
        let u = (f - x[1]) / w;
        let e = (-0.5 * u * u).exp();
        (x[0] * e + x[3], [e, x[0] * e * u / w, x[0] * e * u * u, 1.0])
    }
}

impl LeastSquaresProblem for GaussianProblem<'_> {
    fn n_params(&self) -> usize {
        4
    }

    fn residuals(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(DVector::from_iterator(
            self.f.len(),
            self.f.iter().zip(self.y).map(|(&f, &y)| (self.eval(x, f).0 - y) / self.scale),
        ))
    }

    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let mut j = DMatrix::zeros(self.f.len(), 4);
        for (k, &f) in self.f.iter().enumerate() {
            let (_, d) = self.eval(x, f);
            for c in 0..4 {
                j[(k, c)] = d[c] / self.scale;
            }
        }
        Ok(j)
    }
}

/// Least-squares Gaussian-plus-baseline fit initialised from moments.
pub fn fit_gaussian(spectrum: &[(f64, f64)]) -> Result<GaussianFit> {
    if spectrum.len() < 5 {
        return Err(Error::Fit(format!("{} points are too few for a Gaussian fit", spectrum.len())));
    }
    if spectrum.iter().any(|(f, a)| !f.is_finite() || !a.is_finite()) {
        return Err(Error::InvalidParameter("non-finite spectrum value".into()));
    }
    let f0 = spectrum.iter().map(|p| p.0).sum::<f64>() / spectrum.len() as f64;
    let span = spectrum.iter().map(|p| (p.0 - f0).abs()).fold(0.0, f64::max);
    if span == 0.0 {
        return Err(Error::Fit("spectrum has no frequency spread".into()));
    }
    let f: Vec<f64> = spectrum.iter().map(|p| (p.0 - f0) / span).collect();
    let y: Vec<f64> = spectrum.iter().map(|p| p.1).collect();

    let mut sorted = y.clone();
    sorted.sort_by(f64::total_cmp);
    let baseline = sorted[sorted.len() / 2];
    let peak = sorted[sorted.len() - 1] - baseline;
    if !(peak > 0.0) {
        return Err(Error::Fit("no peak above the baseline".into()));
    }
    let weights: Vec<f64> = y.iter().map(|v| (v - baseline).max(0.0)).collect();
    let wsum: f64 = weights.iter().sum();
    let mu = weights.iter().zip(&f).map(|(w, f)| w * f).sum::<f64>() / wsum;
    let var = weights.iter().zip(&f).map(|(w, f)| w * (f - mu).powi(2)).sum::<f64>() / wsum;
    let min_step = f.windows(2).map(|p| (p[1] - p[0]).abs()).filter(|d| *d > 0.0).fold(f64::INFINITY, f64::min);
    let width0 = var.sqrt().max(min_step);

    let problem = GaussianProblem { f: &f, y: &y, scale: peak };
    let x0 = DVector::from_vec(vec![peak, mu, width0.ln(), baseline]);
    let cfg = LmConfig { max_iterations: 500, gradient_tol: 1e-14, step_tol: 1e-12, ..Default::default() };
    let rep = levenberg_marquardt(&problem, x0, &cfg).map_err(|e| Error::Fit(e.to_string()))?;
    let x = &rep.x;
    let n = f.len() as f64;
    let rss = rep.cost * peak * peak;
    let rms = (rss / n).sqrt();
    let amplitude = x[0];
    let snr = if rms > 0.0 { amplitude / rms } else { f64::INFINITY };
    if !(snr >= 3.0) {
        return Err(Error::Fit(format!("peak amplitude SNR {snr:.2} is below 3")));
    }
    let center = x[1] * span + f0;
    if !(x[1].abs() <= 1.0) {
        return Err(Error::Fit("fitted centre lies outside the spectrum".into()));
    }
    // Standard error of the centre from the Gauss-Newton covariance.
    let j = problem.jacobian(x)?;
    let dof = (n - 4.0).max(1.0);
    let sigma2 = rep.cost / dof;
    let center_stderr = (j.transpose() * &j)
        .try_inverse()
        .map(|c| (c[(1, 1)] * sigma2).sqrt() * span)
        .unwrap_or(f64::INFINITY);
    Ok(GaussianFit {
        amplitude,
        center,
        width: x[2].exp() * span,
        baseline: x[3],
        center_stderr,
        snr,
    })
}

/// Centre shift of a nuclear-bath line from its bare Larmor frequency
/// `|gamma| B`, converted to an equivalent field offset.
pub fn bath_center_shift(spectrum: &[(f64, f64)], species: &SpinSpecies, b_gauss: f64) -> Result<BathShift> {
    if !(b_gauss > 0.0) {
        return Err(Error::InvalidParameter(format!("B must be > 0, got {b_gauss}")));
    }
    let fit = fit_gaussian(spectrum)?;
    let gamma = species.gamma.abs();
    let delta_f = fit.center - gamma * units::gauss_to_tesla(b_gauss);
    let per_gauss = gamma * units::gauss_to_tesla(1.0);
    Ok(BathShift {
        fit,
        delta_f,
        delta_b: delta_f / per_gauss,
        delta_b_stderr: fit.center_stderr / per_gauss,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DftRow {
    pub a_zz_exp: f64,
    pub a_zz_dft: f64,
    /// `|exp - dft| / |dft|`; absent when the DFT value is zero.
    pub a_zz_deviation: Option<f64>,
    pub a_perp_exp: f64,
    pub a_perp_dft: f64,
    pub a_perp_deviation: Option<f64>,
    pub sign_agrees: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DeviationSummary {
    pub within_10_percent: usize,
    pub over_30_percent: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DftComparison {
    pub rows: BTreeMap<String, DftRow>,
    pub a_zz: DeviationSummary,
    pub a_perp: DeviationSummary,
    pub sign_mismatches: Vec<String>,
    pub missing_in_dft: Vec<String>,
    pub missing_in_experiment: Vec<String>,
}

fn rel_dev(exp: f64, dft: f64) -> Option<f64> {
    (dft != 0.0).then(|| (exp - dft).abs() / dft.abs())
}

fn tally(summary: &mut DeviationSummary, dev: Option<f64>) {
    if let Some(d) = dev {
        // Small slack so an exact 10% scaling counts as within 10%.
        if d <= 0.1 + 1e-12 {
            summary.within_10_percent += 1;
        }
        if d > 0.3 {
            summary.over_30_percent += 1;
        }
    }
}

/// Relative deviation of measured from DFT hyperfine values for every label
/// present in both tables.
pub fn dft_comparison_report(
    experimental: &BTreeMap<String, HyperfineEstimate>,
    dft: &BTreeMap<String, HyperfineEstimate>,
) -> DftComparison {
    let mut out = DftComparison {
        rows: BTreeMap::new(),
        a_zz: DeviationSummary::default(),
        a_perp: DeviationSummary::default(),
        sign_mismatches: Vec::new(),
        missing_in_dft: experimental.keys().filter(|l| !dft.contains_key(*l)).cloned().collect(),
        missing_in_experiment: dft.keys().filter(|l| !experimental.contains_key(*l)).cloned().collect(),
    };
    for (label, e) in experimental {
        let Some(d) = dft.get(label) else { continue };
        let row = DftRow {
            a_zz_exp: e.a_zz,
            a_zz_dft: d.a_zz,
            a_zz_deviation: rel_dev(e.a_zz, d.a_zz),
            a_perp_exp: e.a_perp,
            a_perp_dft: d.a_perp,
            a_perp_deviation: rel_dev(e.a_perp, d.a_perp),
            sign_agrees: e.a_zz.signum() == d.a_zz.signum() || e.a_zz == 0.0 || d.a_zz == 0.0,
        };
        tally(&mut out.a_zz, row.a_zz_deviation);
        tally(&mut out.a_perp, row.a_perp_deviation);
        if !row.sign_agrees {
            out.sign_mismatches.push(label.clone());
        }
        out.rows.insert(label.clone(), row);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinphys::{nuclear_transition_frequency, Constants, HyperfineTensor};
    use approx::assert_relative_eq;

    const B: f64 = 1960.9;

    fn freqs_at(b_true: f64, a_zz: f64, a_perp: f64, species: &SpinSpecies) -> SpinFrequencies {
        let field = FieldConfig::aligned(b_true);
        let hf = HyperfineTensor::from_parallel_perp(a_zz, a_perp, 0.3);
        SpinFrequencies {
            label: "X".into(),
            f_a: nuclear_transition_frequency(&field, species, &hf, Ms::PlusThreeHalves),
            ms_a: Ms::PlusThreeHalves,
            f_b: nuclear_transition_frequency(&field, species, &hf, Ms::MinusThreeHalves),
            ms_b: Ms::MinusThreeHalves,
        }
    }

    #[test]
    fn self_consistent_scan_finds_zero() {
        let si = Constants::default().si29();
        let fr = freqs_at(B, 25e3, 5e3, &si);
        let dft = HyperfineEstimate { a_zz: 25e3, a_perp: 5e3 };
        for metric in [MismatchMetric::Perp, MismatchMetric::Joint] {
            let r = field_scan_min_aperp(&fr, &dft, &FieldConfig::aligned(B), &si, &ScanGrid::default(), metric).unwrap();
            assert!(r.delta_b.abs() <= 0.01, "{metric:?} {}", r.delta_b);
            assert!(r.curvature > 0.0);
        }
    }

    #[test]
    fn boundary_minimum_is_reported() {
        let si = Constants::default().si29();
        let fr = freqs_at(B - 4.0, 25e3, 5e3, &si);
        let dft = HyperfineEstimate { a_zz: 25e3, a_perp: 5e3 };
        let grid = ScanGrid { min: -1.0, max: 1.0, step: 0.01 };
        let err = field_scan_min_aperp(&fr, &dft, &FieldConfig::aligned(B), &si, &grid, MismatchMetric::Perp).unwrap_err();
        assert!(matches!(err, Error::ScanBoundary { .. }));
    }

    #[test]
    fn g_factor_arithmetic() {
        let r = g_factor_from_delta_b(-1.53, 0.6, B, -2.0028).unwrap();
        assert!((r.g_factor - -2.0012).abs() < 5e-5, "{}", r.g_factor);
        assert!((r.g_uncertainty - 0.0006).abs() < 5e-5, "{}", r.g_uncertainty);
        assert!((r.relative_shift * 100.0 - -0.08).abs() < 0.005);
        assert!((r.relative_shift_uncertainty * 100.0 - 0.03).abs() < 0.005);

        let z = g_factor_from_delta_b(0.0, 0.6, B, -2.0028).unwrap();
        assert_eq!(z.g_factor, -2.0028);
        let p = g_factor_from_delta_b(1.53, 0.6, B, -2.0028).unwrap();
        assert_relative_eq!(p.g_factor - -2.0028, -(r.g_factor - -2.0028), max_relative = 1e-12);
        assert!(g_factor_from_delta_b(1.0, 0.1, 0.0, -2.0).is_err());
    }

    fn gaussian_spectrum(center: f64, width: f64, amp: f64, noise: &[f64]) -> Vec<(f64, f64)> {
        let n = noise.len();
        (0..n)
            .map(|i| {
                let f = center - 20e3 + 40e3 * i as f64 / (n - 1) as f64;
                (f, amp * (-0.5 * ((f - center) / width).powi(2)).exp() + 0.1 + noise[i])
            })
            .collect()
    }

    #[test]
    fn bath_centred_on_larmor_has_no_shift() {
        let c = Constants::default().c13();
        let f0 = c.gamma * units::gauss_to_tesla(B);
        let noise = vec![0.0; 201];
        let r = bath_center_shift(&gaussian_spectrum(f0, 3e3, 1.0, &noise), &c, B).unwrap();
        assert!(r.delta_f.abs() < 1e-3, "{}", r.delta_f);
    }

    #[test]
    fn bath_offset_converts_to_field() {
        let c = Constants::default().c13();
        let f0 = c.gamma * units::gauss_to_tesla(B);
        // Deterministic small ripple as noise.
        let noise: Vec<f64> = (0..201).map(|i| 0.01 * ((i * 37 % 17) as f64 / 8.0 - 1.0)).collect();
        let r = bath_center_shift(&gaussian_spectrum(f0 - 2.1e3, 3e3, 1.0, &noise), &c, B).unwrap();
        let expected = -2.1e3 / (c.gamma * 1e-4);
        assert!((r.delta_b - expected).abs() < 3.0 * r.delta_b_stderr.max(1e-3));
        assert!((r.delta_b - -1.96).abs() < 0.02);
    }

    #[test]
    fn flat_noise_fails_to_fit() {
        let c = Constants::default().c13();
        let noise: Vec<f64> = (0..201).map(|i| (i * 7919 % 101) as f64 / 50.0 - 1.0).collect();
        let spec: Vec<(f64, f64)> = (0..201).map(|i| (2.0e6 + 100.0 * i as f64, noise[i])).collect();
        assert!(matches!(bath_center_shift(&spec, &c, B), Err(Error::Fit(_))));
    }

    #[test]
    fn dft_report_counts() {
        let exp: BTreeMap<String, HyperfineEstimate> = [
            ("Si2".to_string(), HyperfineEstimate { a_zz: 110.0, a_perp: 22.0 }),
            ("Si3".to_string(), HyperfineEstimate { a_zz: -55.0, a_perp: 11.0 }),
            ("Si9".to_string(), HyperfineEstimate { a_zz: 1.0, a_perp: 1.0 }),
        ]
        .into();
        let dft: BTreeMap<String, HyperfineEstimate> = [
            ("Si2".to_string(), HyperfineEstimate { a_zz: 100.0, a_perp: 20.0 }),
            ("Si3".to_string(), HyperfineEstimate { a_zz: -50.0, a_perp: 10.0 }),
            ("Si4".to_string(), HyperfineEstimate { a_zz: 5.0, a_perp: 1.0 }),
        ]
        .into();
        let r = dft_comparison_report(&exp, &dft);
        assert_eq!(r.rows.len(), 2);
        for row in r.rows.values() {
            assert_relative_eq!(row.a_zz_deviation.unwrap(), 0.1, max_relative = 1e-12);
        }
        assert_eq!(r.a_zz.within_10_percent, 2);
        assert!(r.sign_mismatches.is_empty());
        assert_eq!(r.missing_in_dft, vec!["Si9"]);
        assert_eq!(r.missing_in_experiment, vec!["Si4"]);

        let same = dft_comparison_report(&dft, &dft);
        assert!(same.rows.values().all(|r| r.a_zz_deviation == Some(0.0) && r.a_perp_deviation == Some(0.0)));

        let mut flipped = dft.clone();
        flipped.get_mut("Si3").unwrap().a_zz = 50.0;
        assert_eq!(dft_comparison_report(&flipped, &dft).sign_mismatches, vec!["Si3"]);
    }

    #[test]
    fn aperp_sensitivity_falls_with_field() {
        let si = Constants::default().si29();
        let mut last = f64::INFINITY;
        for b in [200.0, 500.0, 1000.0, 1960.9, 4000.0] {
            let s = aperp_sensitivity(20e3, 5e3, &FieldConfig::aligned(b), &si, Ms::PlusThreeHalves);
            assert!(s < last);
            last = s;
        }
    }
}
