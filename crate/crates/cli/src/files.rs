//! On-disk formats: instance files, bare matrix files and mixture files.
//!
//! All three are JSON. Matrices are arrays of rows. A matrix whose largest
//! entry asymmetry is at most [`SILENT_ASYMMETRY`] relative to its largest
//! entry is symmetrized quietly, up to [`MAX_ASYMMETRY`] with a warning, and
//! rejected beyond that.

use std::fs;
use std::path::Path;

use epi_core::epi::EpiInstance;
use epi_core::mc::{MixtureComponent, MixtureSpec};
use epi_core::SymMatrix;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SILENT_ASYMMETRY: f64 = 1e-9;
pub const MAX_ASYMMETRY: f64 = 1e-6;

/// `{label?, n, sigma_x, sigma_z, a | a_sqrt}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub n: usize,
    pub sigma_x: Vec<Vec<f64>>,
    pub sigma_z: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_sqrt: Option<Vec<Vec<f64>>>,
}

impl InstanceFile {
    /// Stores `A` itself, never its root.
    pub fn from_instance(inst: &EpiInstance, label: Option<String>) -> Self {
        Self {
            label,
            n: inst.n(),
            sigma_x: inst.sigma_x().to_rows(),
            sigma_z: inst.sigma_z().to_rows(),
            a: Some(inst.a().to_rows()),
            a_sqrt: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Loaded<T> {
    pub value: T,
    pub warnings: Vec<String>,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct LoadedInstance {
    pub instance: EpiInstance,
    pub label: Option<String>,
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_json<'a, T: Deserialize<'a>>(bytes: &'a [u8], origin: &str) -> Result<T, CliError> {
    serde_json::from_slice(bytes).map_err(|e| CliError::Parse {
        origin: origin.to_string(),
        message: e.to_string(),
    })
}

/// Validates shape and symmetry and returns the symmetrized matrix.
pub fn matrix_from_rows(
    rows: &[Vec<f64>],
    n: usize,
    origin: &str,
    field: &str,
    warnings: &mut Vec<String>,
) -> Result<SymMatrix, CliError> {
    let bad = |message: String| CliError::Field {
        origin: origin.to_string(),
        field: field.to_string(),
        message,
    };
    if rows.len() != n {
        return Err(bad(format!("expected {n} rows, found {}", rows.len())));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(bad(format!(
            "row {i} has {} entries, expected {n}",
            r.len()
        )));
    }
    let scale = rows.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()));
    let mut worst = (0.0, 0, 0);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (rows[i][j] - rows[j][i]).abs();
            if d > worst.0 {
                worst = (d, i, j);
            }
        }
    }
    let (diff, i, j) = worst;
    let relative = if scale > 0.0 { diff / scale } else { 0.0 };
    if relative > MAX_ASYMMETRY {
        return Err(bad(format!(
            "not symmetric: entries [{i}][{j}] and [{j}][{i}] differ by {diff:e} \
             ({relative:e} relative, limit {MAX_ASYMMETRY:e})"
        )));
    }
    if relative > SILENT_ASYMMETRY {
        warnings.push(format!(
            "{origin}: field `{field}`: symmetrized, entries [{i}][{j}] and [{j}][{i}] differ \
             by {relative:e} relative"
        ));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    SymMatrix::from_row_slice(n, &flat).map_err(|e| bad(e.to_string()))
}

pub fn parse_instance(
    bytes: &[u8],
    origin: &str,
    tol: f64,
) -> Result<Loaded<LoadedInstance>, CliError> {
    let file: InstanceFile = parse_json(bytes, origin)?;
    let n = file.n;
    if n == 0 {
        return Err(CliError::Field {
            origin: origin.to_string(),
            field: "n".to_string(),
            message: "dimension must be at least 1".to_string(),
        });
    }
    let mut warnings = Vec::new();
    let sigma_x = matrix_from_rows(&file.sigma_x, n, origin, "sigma_x", &mut warnings)?;
    let sigma_z = matrix_from_rows(&file.sigma_z, n, origin, "sigma_z", &mut warnings)?;
    let instance = match (&file.a, &file.a_sqrt) {
        (Some(a), None) => {
            let a = matrix_from_rows(a, n, origin, "a", &mut warnings)?;
            EpiInstance::new(sigma_x, sigma_z, a, tol)
        }
        (None, Some(r)) => {
            let r = matrix_from_rows(r, n, origin, "a_sqrt", &mut warnings)?;
            EpiInstance::from_a_sqrt(sigma_x, sigma_z, &r, tol)
        }
        _ => {
            return Err(CliError::Field {
                origin: origin.to_string(),
                field: "a".to_string(),
                message: "exactly one of `a` and `a_sqrt` is required".to_string(),
            })
        }
    }
    .map_err(CliError::core(origin))?;
    Ok(Loaded {
        value: LoadedInstance {
            instance,
            label: file.label,
        },
        warnings,
        bytes: bytes.to_vec(),
    })
}

pub fn load_instance(path: &Path, tol: f64) -> Result<Loaded<LoadedInstance>, CliError> {
    let bytes = read(path)?;
    parse_instance(&bytes, &path.display().to_string(), tol)
}

/// A bare `[[...], ...]` matrix file.
pub fn load_matrix(path: &Path) -> Result<Loaded<SymMatrix>, CliError> {
    let bytes = read(path)?;
    let origin = path.display().to_string();
    let rows: Vec<Vec<f64>> = parse_json(&bytes, &origin)?;
    let mut warnings = Vec::new();
    let m = matrix_from_rows(&rows, rows.len(), &origin, "matrix", &mut warnings)?;
    Ok(Loaded {
        value: m,
        warnings,
        bytes,
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MixtureFile {
    components: Vec<ComponentFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentFile {
    weight: f64,
    /// Zero when absent.
    #[serde(default)]
    mean: Option<Vec<f64>>,
    cov: Vec<Vec<f64>>,
}

/// `{components: [{weight, mean?, cov}, ...]}`.
pub fn load_mixture(path: &Path) -> Result<Loaded<MixtureSpec>, CliError> {
    let bytes = read(path)?;
    let origin = path.display().to_string();
    let file: MixtureFile = parse_json(&bytes, &origin)?;
    let mut warnings = Vec::new();
    let mut components = Vec::with_capacity(file.components.len());
    for (c, comp) in file.components.iter().enumerate() {
        let n = comp.cov.len();
        let field = format!("components[{c}].cov");
        let cov = matrix_from_rows(&comp.cov, n, &origin, &field, &mut warnings)?;
        let mean = comp.mean.clone().unwrap_or_else(|| vec![0.0; n]);
        if mean.len() != n {
            return Err(CliError::Field {
                origin: origin.clone(),
                field: format!("components[{c}].mean"),
                message: format!("expected {n} entries, found {}", mean.len()),
            });
        }
        components.push(MixtureComponent {
            weight: comp.weight,
            mean,
            cov,
        });
    }
    let spec = MixtureSpec::new(components).map_err(CliError::core(origin))?;
    Ok(Loaded {
        value: spec,
        warnings,
        bytes,
    })
}
