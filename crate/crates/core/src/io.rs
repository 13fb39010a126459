//! File formats: coupling tables, DFT hyperfine tables, calibration inputs,
//! spectra, and JSON documents.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::calibrate::SpinFrequencies;
use crate::error::{Error, Result};
use crate::placement::CouplingMeasurement;
use crate::refine::RefinementResult;
use crate::spinphys::{HyperfineEstimate, Ms};

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(r)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Pretty JSON with a trailing newline.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(to_json_string(value)?.as_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn read_couplings_csv<R: Read>(r: R) -> Result<Vec<CouplingMeasurement>> {
    let mut out = Vec::new();
    for (i, rec) in csv_reader(r).deserialize::<CouplingMeasurement>().enumerate() {
        let m = rec.map_err(|e| Error::Format(format!("coupling row {}: {e}", i + 1)))?;
        m.validate()?;
        out.push(m);
    }
    Ok(out)
}

pub fn write_couplings_csv<W: Write>(w: W, measurements: &[CouplingMeasurement]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for m in measurements {
        wr.serialize(m)?;
    }
    if measurements.is_empty() {
        wr.write_record(["spin_a", "spin_b", "f_hz", "sigma_hz", "subspace_mode"])?;
    }
    wr.flush()?;
    Ok(())
}

/// Coupling table from CSV, or JSON when the extension is `.json`.
pub fn read_couplings(path: &Path) -> Result<Vec<CouplingMeasurement>> {
    if is_json(path) {
        let ms: Vec<CouplingMeasurement> = read_json(path)?;
        for m in &ms {
            m.validate()?;
        }
        Ok(ms)
    } else {
        read_couplings_csv(open(path)?)
    }
}

pub fn write_couplings(path: &Path, measurements: &[CouplingMeasurement]) -> Result<()> {
    if is_json(path) {
        write_json(path, measurements)
    } else {
        write_couplings_csv(create(path)?, measurements)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct DftRecord {
    label: String,
    #[serde(rename = "A_zz_Hz")]
    a_zz: f64,
    #[serde(rename = "A_perp_Hz")]
    a_perp: f64,
}

/// `label, A_zz_Hz, A_perp_Hz`
pub fn read_hyperfine_table<R: Read>(r: R) -> Result<BTreeMap<String, HyperfineEstimate>> {
    let mut out = BTreeMap::new();
    for (i, rec) in csv_reader(r).deserialize::<DftRecord>().enumerate() {
        let d = rec.map_err(|e| Error::Format(format!("hyperfine row {}: {e}", i + 1)))?;
        if !d.a_zz.is_finite() || !d.a_perp.is_finite() {
            return Err(Error::Format(format!("hyperfine row {}: non-finite value", i + 1)));
        }
        if out.insert(d.label.clone(), HyperfineEstimate { a_zz: d.a_zz, a_perp: d.a_perp }).is_some() {
            return Err(Error::Format(format!("duplicate label {} in hyperfine table", d.label)));
        }
    }
    Ok(out)
}

pub fn write_hyperfine_table<W: Write>(w: W, table: &BTreeMap<String, HyperfineEstimate>) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["label", "A_zz_Hz", "A_perp_Hz"])?;
    for (l, h) in table {
        wr.write_record([l.clone(), h.a_zz.to_string(), h.a_perp.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct FreqRecord {
    label: String,
    f_a_hz: f64,
    ms_a: Ms,
    f_b_hz: f64,
    ms_b: Ms,
}

/// `label, f_a_hz, ms_a, f_b_hz, ms_b` with manifolds written as `+3/2` etc.
pub fn read_frequency_table<R: Read>(r: R) -> Result<Vec<SpinFrequencies>> {
    csv_reader(r)
        .deserialize::<FreqRecord>()
        .enumerate()
        .map(|(i, rec)| {
            let f = rec.map_err(|e| Error::Format(format!("frequency row {}: {e}", i + 1)))?;
            Ok(SpinFrequencies { label: f.label, f_a: f.f_a_hz, ms_a: f.ms_a, f_b: f.f_b_hz, ms_b: f.ms_b })
        })
        .collect()
}

pub fn write_frequency_table<W: Write>(w: W, rows: &[SpinFrequencies]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for s in rows {
        wr.serialize(FreqRecord {
            label: s.label.clone(),
            f_a_hz: s.f_a,
            ms_a: s.ms_a,
            f_b_hz: s.f_b,
            ms_b: s.ms_b,
        })?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct SpectrumRecord {
    frequency_hz: f64,
    amplitude: f64,
}

/// `frequency_hz, amplitude`
pub fn read_spectrum<R: Read>(r: R) -> Result<Vec<(f64, f64)>> {
    csv_reader(r)
        .deserialize::<SpectrumRecord>()
        .enumerate()
        .map(|(i, rec)| {
            let s = rec.map_err(|e| Error::Format(format!("spectrum row {}: {e}", i + 1)))?;
            Ok((s.frequency_hz, s.amplitude))
        })
        .collect()
}

pub fn read_file<T>(path: &Path, parse: impl FnOnce(BufReader<File>) -> Result<T>) -> Result<T> {
    parse(open(path)?)
}

/// Refined coordinates with their displacement from the lattice start, in Å.
pub fn write_refinement_csv<W: Write>(w: W, result: &RefinementResult) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["label", "x_A", "y_A", "z_A", "dx_A", "dy_A", "dz_A", "d_A"])?;
    for (l, p) in &result.positions {
        let d = result.displacements.rows[l];
        let cols = [p.x, p.y, p.z, d.dx, d.dy, d.dz, d.norm];
        let mut rec = vec![l.clone()];
        rec.extend(cols.iter().map(|v| format!("{v:.6}")));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}
