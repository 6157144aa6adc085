//! Pure-state simulation, used for realization-conditioned circuits.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gate::QubitGate;
use crate::hybrid::MAX_QUBITS;
use crate::kernel::Prepared;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn plus_state(n: usize) -> Result<Self> {
        if n == 0 || n > 2 * MAX_QUBITS {
            return Err(Error::TooManyQubits { n, max: 2 * MAX_QUBITS });
        }
        let dim = 1usize << n;
        let amp = Complex64::new((1.0 / dim as f64).sqrt(), 0.0);
        Ok(Self { n, amps: vec![amp; dim] })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn apply(&mut self, gate: &QubitGate) -> Result<()> {
        gate.check_targets(self.n)?;
        Prepared::new(self.n, gate).apply_vector(&mut self.amps);
        Ok(())
    }

    pub fn expectation(&self, diag: &[f64]) -> Result<f64> {
        if diag.len() != self.amps.len() {
            return Err(Error::DimensionMismatch {
                expected: self.amps.len(),
                actual: diag.len(),
            });
        }
        Ok(self.amps.iter().zip(diag).map(|(a, h)| a.norm_sqr() * h).sum())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }
}
