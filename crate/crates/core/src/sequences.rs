//! Closed-form DDRF parameter calculators. All frequency inputs are ordinary
//! frequencies in Hz; `TWO_PI` below is the only place they become angular.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

/// Reduce an angle to `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TWO_PI);
    if r > PI {
        r - TWO_PI
    } else {
        r
    }
}

/// Unnormalised `sin(x)/x`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequenceParams {
    /// s; pulses are spaced by `2 tau`.
    pub tau: f64,
    pub n_pulses: u32,
    pub f_rf: f64,
    /// Bare Rabi frequency, Hz.
    pub rabi: f64,
    pub f0: f64,
    pub f1: f64,
    /// rad
    pub phase_increment: f64,
}

impl SequenceParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidParameter(format!("tau must be > 0, got {}", self.tau)));
        }
        if !self.n_pulses.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!("pulse count must be even, got {}", self.n_pulses)));
        }
        if !(self.rabi > 0.0) || !self.rabi.is_finite() {
            return Err(Error::InvalidParameter(format!("Rabi frequency must be > 0, got {}", self.rabi)));
        }
        if ![self.f_rf, self.f0, self.f1, self.phase_increment].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite sequence parameter".into()));
        }
        Ok(())
    }
}

/// Unwrapped phase accumulated per `tau` by the detuning, `(w0 + w1 - 2 w_rf) tau`.
fn detuning_phase(f0: f64, f1: f64, f_rf: f64, tau: f64) -> f64 {
    TWO_PI * (f0 + f1 - 2.0 * f_rf) * tau
}

/// RF phase step between consecutive blocks, `pi + (w0 + w1 - 2 w_rf) tau`,
/// wrapped to `(-pi, pi]`.
pub fn ddrf_phase_update(f0: f64, f1: f64, f_rf: f64, tau: f64) -> f64 {
    wrap_angle(PI + detuning_phase(f0, f1, f_rf, tau))
}

/// Wrapped difference between a programmed phase increment and the resonant
/// one; zero exactly on resonance.
pub fn ddrf_resonance_condition(delta: f64, f0: f64, f1: f64, f_rf: f64, tau: f64) -> f64 {
    wrap_angle(delta - detuning_phase(f0, f1, f_rf, tau))
}

/// `Omega [sinc((w1 - w_rf) tau) - sinc((w0 - w_rf) tau)]`, in Hz.
pub fn effective_rabi(rabi: f64, f0: f64, f1: f64, f_rf: f64, tau: f64) -> f64 {
    rabi * (sinc(TWO_PI * (f1 - f_rf) * tau) - sinc(TWO_PI * (f0 - f_rf) * tau))
}

/// Electron state at the start of the sequence; it sets the rotation sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialElectron {
    #[default]
    Zero,
    One,
}

/// `theta_N = +- N Omega_eff tau` in radians, `+` for an electron starting in `|0>`.
pub fn rotation_angle(params: &SequenceParams, initial: InitialElectron) -> Result<f64> {
    params.validate()?;
    let w = effective_rabi(params.rabi, params.f0, params.f1, params.f_rf, params.tau);
    let theta = TWO_PI * params.n_pulses as f64 * w * params.tau;
    Ok(match initial {
        InitialElectron::Zero => theta,
        InitialElectron::One => -theta,
    })
}

/// Bare Rabi frequency that gives rotation `theta` for an electron starting in
/// `|0>`. Negative when the sinc bracket is negative.
pub fn rabi_for_rotation(theta: f64, n_pulses: u32, f0: f64, f1: f64, f_rf: f64, tau: f64) -> Result<f64> {
    if !(tau > 0.0) || n_pulses == 0 {
        return Err(Error::InvalidParameter("need tau > 0 and at least one pulse".into()));
    }
    let per_unit = TWO_PI * n_pulses as f64 * effective_rabi(1.0, f0, f1, f_rf, tau) * tau;
    if per_unit == 0.0 {
        return Err(Error::Singularity { term: "effective Rabi bracket (no conditional drive)".into() });
    }
    Ok(theta / per_unit)
}

/// Resonant phase increment for each drive frequency, sampled from a
/// `(f_rf, delta)` grid: the zero of the wrapped mismatch is located between
/// neighbouring `delta` samples by linear interpolation.
pub fn resonance_locus(f0: f64, f1: f64, tau: f64, f_rf: &[f64], deltas: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for &f in f_rf {
        let m: Vec<f64> = deltas.iter().map(|&d| ddrf_resonance_condition(d, f0, f1, f, tau)).collect();
        for i in 0..deltas.len().saturating_sub(1) {
            let (a, b) = (m[i], m[i + 1]);
            // A wrap jump also changes sign; only accept small, continuous crossings.
            if a * b <= 0.0 && (a - b).abs() < PI && a != b {
                let t = a / (a - b);
                out.push((f, deltas[i] + t * (deltas[i + 1] - deltas[i])));
                break;
            }
        }
    }
    out
}
