use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Provenance carried alongside every spectrum.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMeta {
    pub config_hash: String,
    pub seed: u64,
    pub trials: usize,
    /// Trials dropped because their state went non-finite.
    #[serde(default)]
    pub aborted: Vec<usize>,
}

/// Averaged excited-state population against probe detuning.
///
/// Detunings are probe detunings ω_L − ω_a in rad/s, so a positive line
/// centre is a blueshift.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub detunings: Vec<f64>,
    pub absorption: Vec<f64>,
    /// Standard error over trials; empty when unknown.
    pub std_err: Vec<f64>,
    pub meta: SpectrumMeta,
}

impl Spectrum {
    pub fn new(detunings: Vec<f64>, absorption: Vec<f64>, std_err: Vec<f64>) -> Result<Self> {
        let s = Self {
            detunings,
            absorption,
            std_err,
            meta: SpectrumMeta::default(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.detunings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detunings.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        !self.std_err.is_empty()
    }

    /// Grid strictly increasing, values finite, errors non-negative.
    pub fn validate(&self) -> Result<()> {
        if self.absorption.len() != self.detunings.len() {
            return Err(Error::domain("absorption and detuning grids differ in length"));
        }
        if !self.std_err.is_empty() && self.std_err.len() != self.detunings.len() {
            return Err(Error::domain("std_err and detuning grids differ in length"));
        }
        if let Some(i) = self.detunings.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::domain(format!(
                "detuning grid not strictly increasing at row {}",
                i + 1
            )));
        }
        for (i, (d, a)) in self.detunings.iter().zip(&self.absorption).enumerate() {
            if !d.is_finite() || !a.is_finite() {
                return Err(Error::domain(format!("non-finite value at row {i}")));
            }
        }
        if let Some(i) = self.std_err.iter().position(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::domain(format!("invalid standard error at row {i}")));
        }
        Ok(())
    }

    /// Uniform grid of `n` points over [lo, hi].
    pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![0.5 * (lo + hi)];
        }
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }
}
