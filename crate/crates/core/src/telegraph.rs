//! Flip rates of a two-level nuclear spin from a repetitive-readout photon trace.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsq::{levenberg_marquardt, LeastSquaresProblem, LmConfig};

/// Bright/dark discrimination level, counts/s.
pub const DEFAULT_THRESHOLD: f64 = 1295.0;
pub const DEFAULT_WINDOW: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeTrace {
    /// Seconds, uniform grid.
    pub timestamps: Vec<f64>,
    /// Photon count rate per bin, counts/s.
    pub counts: Vec<f64>,
}

impl TimeTrace {
    pub fn validate(&self) -> Result<()> {
        if self.timestamps.len() != self.counts.len() {
            return Err(Error::InvalidParameter("timestamps and counts differ in length".into()));
        }
        if self.timestamps.len() < 2 {
            return Err(Error::InvalidParameter("trace needs at least two samples".into()));
        }
        let dt = self.timestamps[1] - self.timestamps[0];
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter("timestamps must be strictly increasing".into()));
        }
        let t0 = self.timestamps[0];
        for (i, t) in self.timestamps.iter().enumerate() {
            if (t - (t0 + i as f64 * dt)).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!("non-uniform sampling at index {i}")));
            }
        }
        if let Some(i) = self.counts.iter().position(|c| !(*c >= 0.0) || !c.is_finite()) {
            return Err(Error::InvalidParameter(format!("invalid count at index {i}")));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.timestamps[1] - self.timestamps[0]
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            t_s: f64,
            counts_per_s: f64,
        }
        let mut rd = csv::Reader::from_reader(input);
        let mut trace = TimeTrace { timestamps: Vec::new(), counts: Vec::new() };
        for row in rd.deserialize() {
            let row: Row = row?;
            trace.timestamps.push(row.t_s);
            trace.counts.push(row.counts_per_s);
        }
        trace.validate()?;
        Ok(trace)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t_s", "counts_per_s"])?;
        for (t, c) in self.timestamps.iter().zip(&self.counts) {
            w.write_record([t.to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Centered running average (shrunken at the edges) followed by a threshold;
/// `true` marks the bright state.
pub fn smooth_and_threshold(trace: &TimeTrace, window: usize, threshold: f64) -> Result<Vec<bool>> {
    trace.validate()?;
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("window must be odd and >= 1, got {window}")));
    }
    let n = trace.counts.len();
    if window > n {
        return Err(Error::InvalidParameter(format!("window {window} longer than trace ({n} bins)")));
    }
    let mut prefix = vec![0.0; n + 1];
    for (i, c) in trace.counts.iter().enumerate() {
        prefix[i + 1] = prefix[i] + c;
    }
    let h = window / 2;
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(h);
            let hi = (i + h + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64 > threshold
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dwells {
    pub bright: Vec<f64>,
    pub dark: Vec<f64>,
}

/// Run lengths of each state times `dt`. The first and last runs are cut by
/// the trace boundaries and dropped unless `include_censored`.
pub fn dwell_times(states: &[bool], dt: f64, include_censored: bool) -> Result<Dwells> {
    if states.is_empty() {
        return Err(Error::InvalidParameter("empty state sequence".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter("dt must be > 0".into()));
    }
    let mut runs: Vec<(bool, usize)> = Vec::new();
    for &s in states {
        match runs.last_mut() {
            Some((state, len)) if *state == s => *len += 1,
            _ => runs.push((s, 1)),
        }
    }
    let complete: &[(bool, usize)] = if include_censored {
        &runs
    } else if runs.len() <= 2 {
        &[]
    } else {
        &runs[1..runs.len() - 1]
    };
    let mut d = Dwells { bright: Vec::new(), dark: Vec::new() };
    for &(s, len) in complete {
        let t = len as f64 * dt;
        if s {
            d.bright.push(t);
        } else {
            d.dark.push(t);
        }
    }
    if d.bright.len() < 3 || d.dark.len() < 3 {
        return Err(Error::InsufficientStatistics(format!(
            "{} bright and {} dark complete dwells (need 3 of each)",
            d.bright.len(),
            d.dark.len()
        )));
    }
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    /// Hz.
    pub rate: f64,
    /// Standard error, Hz.
    pub stderr: f64,
    pub n: usize,
}

/// Maximum-likelihood exponential rate `1 / mean` with standard error `rate / sqrt(N)`.
pub fn fit_rates(dwells: &[f64]) -> Result<RateEstimate> {
    if dwells.len() < 3 {
        return Err(Error::InsufficientStatistics(format!("{} dwells (need 3)", dwells.len())));
    }
    if dwells.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::InvalidParameter("dwell times must be positive".into()));
    }
    let n = dwells.len();
    let mean = dwells.iter().sum::<f64>() / n as f64;
    let rate = 1.0 / mean;
    Ok(RateEstimate { rate, stderr: rate / (n as f64).sqrt(), n })
}

struct ExpHistogram {
    centers: Vec<f64>,
    counts: Vec<f64>,
    weights: Vec<f64>,
}

impl LeastSquaresProblem for ExpHistogram {
    fn n_params(&self) -> usize {
        2
    }
    fn residuals(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(DVector::from_iterator(
            self.centers.len(),
            self.centers
                .iter()
                .zip(&self.counts)
                .zip(&self.weights)
                .map(|((t, c), w)| w * (x[0] * (-x[1] * t).exp() - c)),
        ))
    }
    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let mut j = DMatrix::zeros(self.centers.len(), 2);
        for (i, (t, w)) in self.centers.iter().zip(&self.weights).enumerate() {
            let e = (-x[1] * t).exp();
            j[(i, 0)] = w * e;
            j[(i, 1)] = -w * x[0] * t * e;
        }
        Ok(j)
    }
}

/// Freedman–Diaconis bin width.
pub fn freedman_diaconis_width(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    2.0 * (q(0.75) - q(0.25)) / (v.len() as f64).cbrt()
}

/// Exponential fit to the dwell-time histogram (Freedman–Diaconis bins,
/// Poisson-weighted least squares).
pub fn fit_rates_histogram(dwells: &[f64]) -> Result<RateEstimate> {
    let mle = fit_rates(dwells)?;
    let width = freedman_diaconis_width(dwells);
    if !(width > 0.0) {
        return Err(Error::Fit("degenerate dwell distribution (zero spread)".into()));
    }
    let max = dwells.iter().cloned().fold(0.0, f64::max);
    let nbins = ((max / width).ceil() as usize).max(1);
    let mut counts = vec![0.0; nbins];
    for d in dwells {
        let b = ((d / width) as usize).min(nbins - 1);
        counts[b] += 1.0;
    }
    let centers: Vec<f64> = (0..nbins).map(|b| (b as f64 + 0.5) * width).collect();
    let weights = counts.iter().map(|c: &f64| 1.0 / c.max(1.0).sqrt()).collect();
    let problem = ExpHistogram { centers, counts, weights };
    let a0 = dwells.len() as f64 * width * mle.rate;
    let rep = levenberg_marquardt(&problem, DVector::from_vec(vec![a0, mle.rate]), &LmConfig {
        step_tol: 1e-12,
        ..Default::default()
    })?;
    if !(rep.x[1] > 0.0) {
        return Err(Error::Fit(format!("non-positive fitted rate {}", rep.x[1])));
    }
    let j = problem.jacobian(&rep.x)?;
    let cov = (j.transpose() * j)
        .try_inverse()
        .ok_or_else(|| Error::Fit("singular histogram fit".into()))?;
    Ok(RateEstimate { rate: rep.x[1], stderr: cov[(1, 1)].max(0.0).sqrt(), n: dwells.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    #[default]
    Mle,
    Histogram,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TelegraphConfig {
    pub window: usize,
    pub threshold: f64,
    pub include_censored: bool,
    pub mode: FitMode,
}

impl Default for TelegraphConfig {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            threshold: DEFAULT_THRESHOLD,
            include_censored: false,
            mode: FitMode::Mle,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelegraphResult {
    pub rate_bright_to_dark: RateEstimate,
    pub rate_dark_to_bright: RateEstimate,
    pub dwell_times: Dwells,
    pub threshold: f64,
    pub smoothing_window: usize,
    pub switches: usize,
}

pub fn count_switches(states: &[bool]) -> usize {
    states.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Smoothing, thresholding, dwell extraction and rate fits in one call.
pub fn analyze(trace: &TimeTrace, config: &TelegraphConfig) -> Result<TelegraphResult> {
    let states = smooth_and_threshold(trace, config.window, config.threshold)?;
    let dwells = dwell_times(&states, trace.dt(), config.include_censored)?;
    let fit = match config.mode {
        FitMode::Mle => fit_rates,
        FitMode::Histogram => fit_rates_histogram,
    };
    Ok(TelegraphResult {
        rate_bright_to_dark: fit(&dwells.bright)?,
        rate_dark_to_bright: fit(&dwells.dark)?,
        threshold: config.threshold,
        smoothing_window: config.window,
        switches: count_switches(&states),
        dwell_times: dwells,
    })
}
