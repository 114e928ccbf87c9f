//! Report envelope and JSON number formatting.
//!
//! Finite numbers are written with 17 significant digits so every `f64`
//! round-trips exactly; non-finite numbers become the strings `"inf"`,
//! `"-inf"` and `"nan"`.

use epi_core::epi::{Determinants, EpiReport};
use epi_core::matrix::Matrix;
use epi_core::{SymMatrix, TWO_PI_E};
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

pub const TOOL: &str = "epicheck";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Real(pub f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let x = self.0;
        if x.is_nan() {
            s.serialize_str("nan")
        } else if x.is_infinite() {
            s.serialize_str(if x > 0.0 { "inf" } else { "-inf" })
        } else {
            let raw =
                RawValue::from_string(format!("{x:.16e}")).map_err(serde::ser::Error::custom)?;
            raw.serialize(s)
        }
    }
}

pub fn reals(v: &[f64]) -> Vec<Real> {
    v.iter().copied().map(Real).collect()
}

pub fn sym_rows(m: &SymMatrix) -> Vec<Vec<Real>> {
    m.to_rows().iter().map(|r| reals(r)).collect()
}

pub fn matrix_rows(m: &Matrix) -> Vec<Vec<Real>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| Real(m[(i, j)])).collect())
        .collect()
}

/// SHA-256 over the inputs, each prefixed by its length.
pub fn digest(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Serialize)]
pub struct ReportFile<T> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub input_digest: String,
    pub timestamp: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub tol: Real,
    pub warnings: Vec<String>,
    pub body: T,
}

impl<T: Serialize> ReportFile<T> {
    pub fn new(
        command: &'static str,
        input_digest: String,
        seed: Option<u64>,
        tol: f64,
        body: T,
    ) -> Self {
        Self {
            tool: TOOL,
            version: VERSION,
            command,
            input_digest,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            seed,
            tol: Real(tol),
            warnings: Vec::new(),
            body,
        }
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}

#[derive(Debug, Serialize)]
pub struct DeterminantsBody {
    pub det_i_minus_a: Real,
    pub det_a: Real,
    pub det_sigma_x: Real,
    pub det_sigma_x_plus_z: Real,
    pub det_lhs_cov: Real,
    pub log_det_i_minus_a: Real,
    pub log_det_a: Real,
    pub log_det_sigma_x: Real,
    pub log_det_sigma_x_plus_z: Real,
    pub log_det_lhs_cov: Real,
}

impl From<&Determinants> for DeterminantsBody {
    fn from(d: &Determinants) -> Self {
        Self {
            det_i_minus_a: Real(d.i_minus_a()),
            det_a: Real(d.a()),
            det_sigma_x: Real(d.sigma_x()),
            det_sigma_x_plus_z: Real(d.sigma_x_plus_z()),
            det_lhs_cov: Real(d.lhs_cov()),
            log_det_i_minus_a: Real(d.log_i_minus_a),
            log_det_a: Real(d.log_a),
            log_det_sigma_x: Real(d.log_sigma_x),
            log_det_sigma_x_plus_z: Real(d.log_sigma_x_plus_z),
            log_det_lhs_cov: Real(d.log_lhs_cov),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct EpiBody {
    pub lhs: Real,
    pub rhs_term_x: Real,
    pub rhs_term_xz: Real,
    pub rhs: Real,
    pub gap: Real,
    pub relative_gap: Real,
    pub lhs_over_2pie: Real,
    pub rhs_over_2pie: Real,
    pub violated: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub determinants: Option<DeterminantsBody>,
}

impl From<&EpiReport> for EpiBody {
    fn from(r: &EpiReport) -> Self {
        Self {
            lhs: Real(r.lhs),
            rhs_term_x: Real(r.rhs_term_x),
            rhs_term_xz: Real(r.rhs_term_xz),
            rhs: Real(r.rhs),
            gap: Real(r.gap),
            relative_gap: Real(r.relative_gap()),
            lhs_over_2pie: Real(r.lhs / TWO_PI_E),
            rhs_over_2pie: Real(r.rhs / TWO_PI_E),
            violated: r.violated,
            determinants: r.dets.as_ref().map(DeterminantsBody::from),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct InstanceBody {
    pub n: usize,
    pub sigma_x: Vec<Vec<Real>>,
    pub sigma_z: Vec<Vec<Real>>,
    pub a: Vec<Vec<Real>>,
    pub a_sqrt: Vec<Vec<Real>>,
}

impl From<&epi_core::epi::EpiInstance> for InstanceBody {
    fn from(inst: &epi_core::epi::EpiInstance) -> Self {
        Self {
            n: inst.n(),
            sigma_x: sym_rows(inst.sigma_x()),
            sigma_z: sym_rows(inst.sigma_z()),
            a: sym_rows(inst.a()),
            a_sqrt: sym_rows(inst.a_sqrt()),
        }
    }
}
