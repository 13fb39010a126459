//! Off-lattice least-squares refinement of a discrete placement.
//!
//! Residuals are `r_k = w_k (f_k - s_k C_k / 2)` with the signs `s_k` taken
//! from the lattice solution and frozen; they are re-checked at the end. The
//! anchor is fixed and one further spin (the gauge spin) is restricted to the
//! half-plane through the vertical axis of the anchor that it starts in, which
//! removes the rotation about `z` that leaves every `C_zz` unchanged.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Species;
use crate::lsq::{levenberg_marquardt, LeastSquaresProblem, LmConfig};
use crate::placement::{CouplingMeasurement, PlacementSolution};
use crate::spinphys::{dipolar_prefactor, Constants};

/// Gauge spins closer than this to the anchor axis have no usable azimuth.
const MIN_GAUGE_RHO: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    pub anchor: String,
    /// Spin whose azimuth is frozen; defaults to the first off-axis spin in
    /// placement order.
    pub gauge_label: Option<String>,
    /// Weight residuals by `1/sigma`. Off by default, which gives the plain
    /// `sum (f_exp - f_th)^2`.
    pub weighted: bool,
    pub max_iterations: usize,
    pub gradient_tol: f64,
    /// Å
    pub step_tol: f64,
    /// Relative cost decrease below which an accepted step ends the run.
    pub cost_tol: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            anchor: "Si1".into(),
            gauge_label: None,
            weighted: false,
            max_iterations: 5000,
            gradient_tol: 1e-10,
            step_tol: 1e-6,
            cost_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Spin {
    pub label: String,
    pub species: Species,
    pub position: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Displacement {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacementReport {
    pub rows: BTreeMap<String, Displacement>,
    pub mean: f64,
    pub max: f64,
    pub max_label: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefinementResult {
    pub positions: BTreeMap<String, Vector3<f64>>,
    /// Hz² (weighted when `weighted` is set).
    pub residual: f64,
    pub initial_residual: f64,
    pub displacements: DisplacementReport,
    pub iterations: usize,
    pub cost_history: Vec<f64>,
    pub gauge_label: Option<String>,
    pub n_parameters: usize,
    pub n_measurements: usize,
    /// Condition number of the Gauss–Newton Hessian `J^T J` at the solution.
    pub condition_number: f64,
    pub rank: usize,
    pub underdetermined: bool,
    /// Pairs whose `C_zz` changed sign during refinement; their frozen sign
    /// no longer describes the refined geometry.
    pub sign_flips: Vec<(String, String)>,
}

/// `C_zz` and its gradient with respect to the separation vector.
fn coupling_and_gradient(d: &Vector3<f64>, alpha: f64) -> Result<(f64, Vector3<f64>)> {
    let r2 = d.norm_squared();
    if !(r2 > 0.0) {
        return Err(Error::Domain("coincident spin positions".into()));
    }
    let r = r2.sqrt();
    let r3 = r2 * r;
    let r5 = r3 * r2;
    let r7 = r5 * r2;
    let z2 = d.z * d.z;
    let c = alpha * (3.0 * z2 / r5 - 1.0 / r3);
    let gxy = alpha * (3.0 / r5 - 15.0 * z2 / r7);
    let gz = alpha * (9.0 / r5 - 15.0 * z2 / r7);
    Ok((c, Vector3::new(d.x * gxy, d.y * gxy, d.z * gz)))
}

fn index_measurements<'m>(
    spins: &[Spin],
    measurements: &'m [CouplingMeasurement],
) -> Result<Vec<(usize, usize, &'m CouplingMeasurement)>> {
    let idx: BTreeMap<&str, usize> = spins.iter().enumerate().map(|(i, s)| (s.label.as_str(), i)).collect();
    measurements
        .iter()
        .map(|m| {
            let a = idx.get(m.spin_a.as_str());
            let b = idx.get(m.spin_b.as_str());
            match (a, b) {
                (Some(&a), Some(&b)) => Ok((a, b, m)),
                _ => Err(Error::LabelMismatch(format!(
                    "measurement {}-{} names a spin with no position",
                    m.spin_a, m.spin_b
                ))),
            }
        })
        .collect()
}

/// `eps = sum (f - |C_zz|/2)^2` and its gradient with respect to every
/// coordinate, returned per spin in input order.
pub fn residual_and_gradient(
    spins: &[Spin],
    measurements: &[CouplingMeasurement],
    constants: &Constants,
) -> Result<(f64, Vec<Vector3<f64>>)> {
    let pairs = index_measurements(spins, measurements)?;
    let mut eps = 0.0;
    let mut grad = vec![Vector3::zeros(); spins.len()];
    for (a, b, m) in pairs {
        let alpha = dipolar_prefactor(
            constants.nucleus(spins[a].species).gamma,
            constants.nucleus(spins[b].species).gamma,
        );
        let (c, dc) = coupling_and_gradient(&(spins[b].position - spins[a].position), alpha)?;
        let r = m.f_hz - 0.5 * c.abs();
        eps += r * r;
        // d|C|/dC is sign(C); at C = 0 either one-sided value is a subgradient.
        let g = dc * (-r * c.signum());
        grad[b] += g;
        grad[a] -= g;
    }
    Ok((eps, grad))
}

pub fn displacement_report(
    initial: &BTreeMap<String, Vector3<f64>>,
    refined: &BTreeMap<String, Vector3<f64>>,
) -> Result<DisplacementReport> {
    if initial.len() != refined.len() || initial.keys().ne(refined.keys()) {
        let a: BTreeSet<_> = initial.keys().collect();
        let b: BTreeSet<_> = refined.keys().collect();
        let diff: Vec<String> = a.symmetric_difference(&b).map(|s| s.to_string()).collect();
        return Err(Error::LabelMismatch(format!("label sets differ: {}", diff.join(", "))));
    }
    let rows: BTreeMap<String, Displacement> = initial
        .iter()
        .map(|(l, p0)| {
            let d = refined[l] - p0;
            (l.clone(), Displacement { dx: d.x, dy: d.y, dz: d.z, norm: d.norm() })
        })
        .collect();
    let mean = if rows.is_empty() {
        0.0
    } else {
        rows.values().map(|d| d.norm).sum::<f64>() / rows.len() as f64
    };
    let mut max = 0.0;
    let mut max_label = None;
    for (l, d) in &rows {
        if max_label.is_none() || d.norm > max {
            max = d.norm;
            max_label = Some(l.clone());
        }
    }
    Ok(DisplacementReport { rows, mean, max, max_label })
}

enum Param {
    Fixed,
    /// Offset into the parameter vector of a free (x, y, z).
    Free(usize),
    /// Offset of (rho, z) for the gauge spin, with its fixed azimuth direction.
    Gauge(usize, Vector3<f64>),
}

struct Problem<'a> {
    spins: &'a [Spin],
    anchor: Vector3<f64>,
    params: Vec<Param>,
    n_params: usize,
    pairs: Vec<(usize, usize, f64, f64, f64)>, // a, b, f, weight, alpha
    signs: Vec<f64>,
}

impl Problem<'_> {
    fn position(&self, i: usize, x: &DVector<f64>) -> Vector3<f64> {
        match &self.params[i] {
            Param::Fixed => self.spins[i].position,
            Param::Free(o) => Vector3::new(x[*o], x[o + 1], x[o + 2]),
            Param::Gauge(o, u) => self.anchor + u * x[*o] + Vector3::z() * x[o + 1],
        }
    }

    fn pack(&self) -> DVector<f64> {
        let mut x = DVector::zeros(self.n_params);
        for (i, p) in self.params.iter().enumerate() {
            let pos = self.spins[i].position;
            match p {
                Param::Fixed => {}
                Param::Free(o) => {
                    x[*o] = pos.x;
                    x[o + 1] = pos.y;
                    x[o + 2] = pos.z;
                }
                Param::Gauge(o, u) => {
                    let d = pos - self.anchor;
                    x[*o] = d.x * u.x + d.y * u.y;
                    x[o + 1] = d.z;
                }
            }
        }
        x
    }

    fn scatter(&self, j: &mut DMatrix<f64>, k: usize, i: usize, g: &Vector3<f64>) {
        match &self.params[i] {
            Param::Fixed => {}
            Param::Free(o) => {
                j[(k, *o)] += g.x;
                j[(k, o + 1)] += g.y;
                j[(k, o + 2)] += g.z;
            }
            Param::Gauge(o, u) => {
                j[(k, *o)] += g.x * u.x + g.y * u.y;
                j[(k, o + 1)] += g.z;
            }
        }
    }
}

impl LeastSquaresProblem for Problem<'_> {
    fn n_params(&self) -> usize {
        self.n_params
    }

    fn residuals(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let mut r = DVector::zeros(self.pairs.len());
        for (k, &(a, b, f, w, alpha)) in self.pairs.iter().enumerate() {
            let (c, _) = coupling_and_gradient(&(self.position(b, x) - self.position(a, x)), alpha)?;
            r[k] = w * (f - 0.5 * self.signs[k] * c);
        }
        Ok(r)
    }

    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let mut j = DMatrix::zeros(self.pairs.len(), self.n_params);
        for (k, &(a, b, _, w, alpha)) in self.pairs.iter().enumerate() {
            let (_, dc) = coupling_and_gradient(&(self.position(b, x) - self.position(a, x)), alpha)?;
            let g = dc * (-0.5 * w * self.signs[k]);
            self.scatter(&mut j, k, b, &g);
            self.scatter(&mut j, k, a, &(-g));
        }
        Ok(j)
    }
}

fn total_residual(spins: &[Spin], pairs: &[(usize, usize, f64, f64, f64)]) -> Result<f64> {
    let mut eps = 0.0;
    for &(a, b, f, w, alpha) in pairs {
        let (c, _) = coupling_and_gradient(&(spins[b].position - spins[a].position), alpha)?;
        eps += (w * (f - 0.5 * c.abs())).powi(2);
    }
    Ok(eps)
}

/// Refine a set of spins. Measurements naming spins outside `spins` are an
/// error; filter them first.
pub fn refine_spins(
    spins: &[Spin],
    order: &[String],
    measurements: &[CouplingMeasurement],
    config: &RefineConfig,
    constants: &Constants,
) -> Result<RefinementResult> {
    for m in measurements {
        m.validate()?;
    }
    let anchor_idx = spins
        .iter()
        .position(|s| s.label == config.anchor)
        .ok_or_else(|| Error::LabelMismatch(format!("anchor {} is not among the spins", config.anchor)))?;
    let anchor = spins[anchor_idx].position;
    let rho_of = |s: &Spin| (s.position - anchor).xy().norm();

    let gauge_idx = match &config.gauge_label {
        Some(l) => {
            let i = spins
                .iter()
                .position(|s| &s.label == l)
                .ok_or_else(|| Error::LabelMismatch(format!("gauge spin {l} is not among the spins")))?;
            if i == anchor_idx || rho_of(&spins[i]) < MIN_GAUGE_RHO {
                return Err(Error::InvalidParameter(format!("gauge spin {l} lies on the anchor axis")));
            }
            Some(i)
        }
        None => order
            .iter()
            .chain(spins.iter().map(|s| &s.label))
            .filter_map(|l| spins.iter().position(|s| &s.label == l))
            .find(|&i| i != anchor_idx && rho_of(&spins[i]) >= MIN_GAUGE_RHO),
    };

    let mut params = Vec::with_capacity(spins.len());
    let mut n_params = 0;
    for (i, s) in spins.iter().enumerate() {
        if i == anchor_idx {
            params.push(Param::Fixed);
        } else if Some(i) == gauge_idx {
            let d = (s.position - anchor).xy();
            let u = d / d.norm();
            params.push(Param::Gauge(n_params, Vector3::new(u.x, u.y, 0.0)));
            n_params += 2;
        } else {
            params.push(Param::Free(n_params));
            n_params += 3;
        }
    }

    let indexed = index_measurements(spins, measurements)?;
    let mut pairs = Vec::with_capacity(indexed.len());
    let mut signs = Vec::with_capacity(indexed.len());
    for (a, b, m) in &indexed {
        let alpha = dipolar_prefactor(
            constants.nucleus(spins[*a].species).gamma,
            constants.nucleus(spins[*b].species).gamma,
        );
        let w = if config.weighted { 1.0 / m.sigma_hz } else { 1.0 };
        let (c, _) = coupling_and_gradient(&(spins[*b].position - spins[*a].position), alpha)?;
        pairs.push((*a, *b, m.f_hz, w, alpha));
        signs.push(if c < 0.0 { -1.0 } else { 1.0 });
    }

    let problem = Problem { spins, anchor, params, n_params, pairs, signs };
    let lm = LmConfig {
        max_iterations: config.max_iterations,
        gradient_tol: config.gradient_tol,
        step_tol: config.step_tol,
        cost_tol: config.cost_tol,
        ..Default::default()
    };
    let initial_residual = total_residual(spins, &problem.pairs)?;
    let report = levenberg_marquardt(&problem, problem.pack(), &lm)?;

    let refined: Vec<Spin> = spins
        .iter()
        .enumerate()
        .map(|(i, s)| Spin { position: problem.position(i, &report.x), ..s.clone() })
        .collect();
    let residual = total_residual(&refined, &problem.pairs)?;

    let mut sign_flips = Vec::new();
    for (k, &(a, b, _, _, alpha)) in problem.pairs.iter().enumerate() {
        let (c, _) = coupling_and_gradient(&(refined[b].position - refined[a].position), alpha)?;
        if c * problem.signs[k] < 0.0 {
            sign_flips.push((spins[a].label.clone(), spins[b].label.clone()));
        }
    }
    // Without flips the frozen-sign cost is the true cost, and LM only accepts
    // non-increasing steps.
    if sign_flips.is_empty() && residual > initial_residual * (1.0 + 1e-12) + 1e-18 {
        return Err(Error::Internal(format!(
            "refinement increased the residual from {initial_residual} to {residual}"
        )));
    }

    let before: BTreeMap<String, Vector3<f64>> = spins.iter().map(|s| (s.label.clone(), s.position)).collect();
    let positions: BTreeMap<String, Vector3<f64>> =
        refined.iter().map(|s| (s.label.clone(), s.position)).collect();
    let displacements = displacement_report(&before, &positions)?;
    Ok(RefinementResult {
        positions,
        residual,
        initial_residual,
        displacements,
        iterations: report.iterations,
        cost_history: report.cost_history,
        gauge_label: gauge_idx.map(|i| spins[i].label.clone()),
        n_parameters: n_params,
        n_measurements: problem.pairs.len(),
        condition_number: report.condition_number,
        rank: report.rank,
        underdetermined: report.rank < n_params,
        sign_flips,
    })
}

/// Refine a discrete placement. Measurements touching labels outside the
/// assignment are ignored.
pub fn refine(
    initial: &PlacementSolution,
    measurements: &[CouplingMeasurement],
    config: &RefineConfig,
    constants: &Constants,
) -> Result<RefinementResult> {
    let spins: Vec<Spin> = initial
        .assignment
        .iter()
        .map(|(l, s)| Spin { label: l.clone(), species: s.species, position: s.position })
        .collect();
    let used: Vec<CouplingMeasurement> = measurements
        .iter()
        .filter(|m| initial.assignment.contains_key(&m.spin_a) && initial.assignment.contains_key(&m.spin_b))
        .cloned()
        .collect();
    refine_spins(&spins, &initial.order, &used, config, constants)
}
