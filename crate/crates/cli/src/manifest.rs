//! Run manifests: enough to rerun a command and check its outputs byte for byte.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sicspin::spinphys::{dipolar_prefactor, units, Constants};
use sicspin::synth::RNG_ALGORITHM;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileDigest {
    /// Digest of `path`, recorded under `name`.
    pub fn of(path: &Path, name: &str) -> CliResult<Self> {
        let data = std::fs::read(path).map_err(|e| CliError::domain("io", format!("{}: {e}", path.display())))?;
        Ok(Self { path: name.to_string(), sha256: sha256_hex(&data), bytes: data.len() as u64 })
    }
}

/// Constants used by a run, including the derived dipolar prefactors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantTable {
    pub gamma_si29_hz_per_t: f64,
    pub gamma_c13_hz_per_t: f64,
    pub g_electron: f64,
    pub gamma_electron_hz_per_t: f64,
    pub mu0_over_4pi: f64,
    pub planck_j_s: f64,
    pub alpha_si_si_hz_a3: f64,
    pub alpha_si_c_hz_a3: f64,
    pub alpha_c_c_hz_a3: f64,
}

impl ConstantTable {
    pub fn new(k: &Constants) -> Self {
        Self {
            gamma_si29_hz_per_t: k.gamma_si29,
            gamma_c13_hz_per_t: k.gamma_c13,
            g_electron: k.g_electron,
            gamma_electron_hz_per_t: k.electron().gamma,
            mu0_over_4pi: units::MU0_OVER_4PI,
            planck_j_s: units::PLANCK,
            alpha_si_si_hz_a3: dipolar_prefactor(k.gamma_si29, k.gamma_si29),
            alpha_si_c_hz_a3: dipolar_prefactor(k.gamma_si29, k.gamma_c13),
            alpha_c_c_hz_a3: dipolar_prefactor(k.gamma_c13, k.gamma_c13),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub cli_version: String,
    pub core_version: String,
    pub command: String,
    pub rng: String,
    /// SHA-256 of the TOML serialization of `config`.
    pub config_sha256: String,
    pub config: RunConfig,
    pub constants: ConstantTable,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> CliResult<Self> {
        Ok(Self {
            tool: "sicspin".into(),
            cli_version: env!("CARGO_PKG_VERSION").into(),
            core_version: sicspin::VERSION.into(),
            command: command.into(),
            rng: RNG_ALGORITHM.into(),
            config_sha256: sha256_hex(config.to_toml()?.as_bytes()),
            config: config.clone(),
            constants: ConstantTable::new(&config.constants),
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn add_input(&mut self, path: &Path) -> CliResult<()> {
        let d = FileDigest::of(path, &path.display().to_string())?;
        self.inputs.push(d);
        Ok(())
    }

    /// Records an output by its path relative to `base` (the manifest's directory).
    pub fn add_output(&mut self, path: &Path, base: &Path) -> CliResult<()> {
        let name = path.strip_prefix(base).unwrap_or(path).display().to_string();
        self.outputs.push(FileDigest::of(path, &name)?);
        Ok(())
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        if !path.exists() {
            return Err(CliError::missing_input(path));
        }
        let m: Manifest = sicspin::io::read_json(path).map_err(|e| CliError::input(path, e))?;
        m.config.validate()?;
        let h = sha256_hex(m.config.to_toml()?.as_bytes());
        if h != m.config_sha256 {
            return Err(CliError::usage(format!(
                "{}: config hash mismatch (recorded {}, computed {h})",
                path.display(),
                m.config_sha256
            )));
        }
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        Ok(sicspin::io::write_json(path, self)?)
    }
}

/// `out.json` -> `out.manifest.json`, next to the output.
pub fn manifest_path_for(output: &Path) -> std::path::PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "output".into());
    output.with_file_name(format!("{stem}.manifest.json"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_sha256() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn manifest_json_round_trip() {
        let m = Manifest::new("reproduce", &RunConfig::default()).unwrap();
        let s = sicspin::io::to_json_string(&m).unwrap();
        let back: Manifest = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(!s.contains("time"));
    }

    #[test]
    fn sibling_manifest_path() {
        assert_eq!(manifest_path_for(Path::new("a/b/sol.json")), Path::new("a/b/sol.manifest.json"));
        assert_eq!(manifest_path_for(Path::new("trace.csv")), Path::new("trace.manifest.json"));
    }
}
