//! Experiment configuration and report plumbing.  One JSON schema is used
//! for both configs and reports; (t, trace) sample tables are additionally
//! emitted as CSV for plotting.

use crate::algebra::{AlgebraContext, CoeffRecord, MatrixElement, TorusElement};
use crate::error::{NcError, Result};
use crate::modular::TruncationGrid;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Serialized form of a smearing operator F = f ⊗ M.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmearingConfig {
    /// Fourier coefficients of the algebra part f.
    pub scalar: Vec<CoeffRecord>,
    /// Row-major 2×2 matrix part as [re, im] pairs.
    pub matrix: [[f64; 2]; 4],
}

/// One experiment: deformation data, dilaton, smearing, grids, tolerances.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub theta: f64,
    /// τ as [re, im] with im > 0.
    pub tau: [f64; 2],
    /// Self-adjoint dilaton h.
    pub dilaton: Vec<CoeffRecord>,
    #[serde(default)]
    pub smearing_f: Option<SmearingConfig>,
    pub grid: TruncationGrid,
    /// Explicit heat-trace sample times; empty selects the documented
    /// window rule.
    #[serde(default)]
    pub t_grid: Vec<f64>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

impl Default for ExperimentConfig {
    /// The noncommutative reference configuration:
    /// θ = 0.37, τ = i, h = 0.3(U + U* + V + V*).
    fn default() -> Self {
        Self {
            theta: 0.37,
            tau: [0.0, 1.0],
            dilaton: TorusElement::cos_dilaton(0.3, 0.3).to_records(),
            smearing_f: None,
            grid: TruncationGrid::new(8, 10),
            t_grid: Vec::new(),
            tolerances: BTreeMap::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau[1] > 0.0) {
            return Err(NcError::BadConfig(format!("Im(tau) = {} must be > 0", self.tau[1])));
        }
        if self.grid.n < 1 || self.grid.guard < 0 {
            return Err(NcError::BadConfig(format!(
                "grid n={} guard={} out of range",
                self.grid.n, self.grid.guard
            )));
        }
        let ctx = self.context();
        let h = self.dilaton();
        if !h.is_self_adjoint(&ctx, 1e-10) {
            return Err(NcError::BadConfig("dilaton is not self-adjoint".into()));
        }
        if self.t_grid.iter().any(|&t| !(t > 0.0))
            || self.t_grid.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(NcError::BadConfig(
                "t_grid must be strictly positive and strictly increasing".into(),
            ));
        }
        Ok(())
    }

    pub fn context(&self) -> AlgebraContext {
        AlgebraContext::new(self.theta, self.tau[0], self.tau[1])
    }

    pub fn dilaton(&self) -> TorusElement {
        TorusElement::from_records(&self.dilaton)
    }

    /// The smearing operator (f, M); defaults to 1 ⊗ I₂.
    pub fn smearing(&self) -> (TorusElement, [Complex64; 4]) {
        match &self.smearing_f {
            Some(s) => (
                TorusElement::from_records(&s.scalar),
                std::array::from_fn(|i| Complex64::new(s.matrix[i][0], s.matrix[i][1])),
            ),
            None => (
                TorusElement::one(),
                [
                    Complex64::new(1.0, 0.0),
                    Complex64::default(),
                    Complex64::default(),
                    Complex64::new(1.0, 0.0),
                ],
            ),
        }
    }

    pub fn smearing_matrix_element(&self, ctx: &AlgebraContext) -> MatrixElement {
        let (f, m) = self.smearing();
        let _ = ctx;
        MatrixElement::tensor(&f, m)
    }

    pub fn tolerance(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

/// Envelope common to all reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report<T: Serialize> {
    pub command: String,
    pub config_hash: String,
    pub tolerances: BTreeMap<String, f64>,
    pub passed: bool,
    pub body: T,
}

impl<T: Serialize> Report<T> {
    pub fn new(command: &str, cfg: &ExperimentConfig, passed: bool, body: T) -> Self {
        Self {
            command: command.into(),
            config_hash: cfg.hash(),
            tolerances: cfg.tolerances.clone(),
            passed,
            body,
        }
    }

    /// Write the report to `<out>/<command>.json` (or stdout when no
    /// directory is given).
    pub fn emit(&self, out: Option<&Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        match out {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join(format!("{}.json", self.command)), text)?;
            }
            None => println!("{text}"),
        }
        Ok(())
    }
}

/// Write (t, trace) samples as a CSV table.
pub fn write_trace_csv(path: &Path, samples: &[crate::spectral::HeatSample]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| NcError::BadConfig(e.to_string()))?;
    w.write_record(["t", "trace"]).map_err(|e| NcError::BadConfig(e.to_string()))?;
    for s in samples {
        w.write_record([s.t.to_string(), s.trace.to_string()])
            .map_err(|e| NcError::BadConfig(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_hash_stable() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.hash(), cfg.hash());
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn rejects_bad_tau_and_unsorted_t_grid() {
        let mut cfg = ExperimentConfig::default();
        cfg.tau = [0.3, -1.0];
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.t_grid = vec![0.2, 0.1];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn roundtrip_json() {
        let cfg = ExperimentConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg.hash(), back.hash());
    }
}
