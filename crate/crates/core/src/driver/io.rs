//! File formats: JSON maps and chains, CSV traces.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::DriverError;
use crate::spectral::{Freq, PeriodicField, TorusMapLift};

pub const SCHEMA_VERSION: u32 = 1;

/// One coefficient as `[[k…], re, im]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffEntry(pub Vec<i64>, pub f64, pub f64);

/// On-disk form of a [`TorusMapLift`]. `coeffs[i]` lists the displacement
/// component `u_i` over the whole ℓ¹ ball in lexicographic order, both
/// members of every Hermitian pair included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapFile {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub dim: usize,
    pub degree: usize,
    pub rho: Vec<f64>,
    pub coeffs: Vec<Vec<CoeffEntry>>,
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

impl MapFile {
    pub fn from_map(f: &TorusMapLift) -> Self {
        let degree = f.degree();
        let coeffs = f
            .displacement()
            .iter()
            .map(|u| {
                u.resized(degree)
                    .modes()
                    .map(|(k, c)| CoeffEntry(k[..f.dim()].to_vec(), c.re, c.im))
                    .collect()
            })
            .collect();
        MapFile {
            schema_version: SCHEMA_VERSION,
            dim: f.dim(),
            degree,
            rho: f.rho().to_vec(),
            coeffs,
        }
    }

    pub fn to_map(&self) -> Result<TorusMapLift, DriverError> {
        let bad = |msg: String| DriverError::Format(msg);
        if self.schema_version != SCHEMA_VERSION {
            return Err(bad(format!(
                "unsupported schema_version {}",
                self.schema_version
            )));
        }
        if !(self.dim == 1 || self.dim == 2) {
            return Err(bad(format!("dim = {} not supported", self.dim)));
        }
        if self.rho.len() != self.dim || self.coeffs.len() != self.dim {
            return Err(bad(
                "rho and coeffs must have one entry per dimension".into()
            ));
        }
        let mut comps = Vec::with_capacity(self.dim);
        for entries in &self.coeffs {
            let mut table: BTreeMap<Freq, Complex64> = BTreeMap::new();
            for CoeffEntry(k, re, im) in entries {
                if k.len() != self.dim {
                    return Err(bad(format!("frequency {k:?} has wrong length")));
                }
                let kk: Freq = if self.dim == 1 {
                    [k[0], 0]
                } else {
                    [k[0], k[1]]
                };
                table.insert(kk, Complex64::new(*re, *im));
            }
            let mut u = PeriodicField::zeros(self.dim, self.degree);
            for (&k, &c) in &table {
                let partner = [-k[0], -k[1]];
                if let Some(p) = table.get(&partner) {
                    let scale = c.norm().max(p.norm()).max(f64::MIN_POSITIVE);
                    if (p - c.conj()).norm() > 1e-13 * scale {
                        return Err(bad(format!("coefficients at {k:?} are not Hermitian")));
                    }
                }
                if k == [0, 0] && c.im != 0.0 {
                    return Err(bad("zero mode must be real".into()));
                }
                u.set_pair(k, c).map_err(|e| bad(format!("{e}")))?;
            }
            comps.push(u);
        }
        Ok(TorusMapLift::new(self.rho.clone(), comps)?)
    }
}

/// Chain of step conjugacies and their running product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainFile {
    pub schema_version: u32,
    pub steps: Vec<MapFile>,
    pub composed: MapFile,
    pub step_norms: Vec<f64>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), DriverError> {
    let text = serde_json::to_string_pretty(value)?;
    write_text(path, &(text + "\n"))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, DriverError> {
    let text = fs::read_to_string(path).map_err(|e| DriverError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn export_map(f: &TorusMapLift, path: &Path) -> Result<(), DriverError> {
    write_json(path, &MapFile::from_map(f))
}

pub fn import_map(path: &Path) -> Result<TorusMapLift, DriverError> {
    read_json::<MapFile>(path)?.to_map()
}

pub fn write_text(path: &Path, text: &str) -> Result<(), DriverError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| DriverError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| DriverError::io(path, e))
}
