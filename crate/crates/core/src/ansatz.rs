//! SWAP-network QAOA circuit with qubit-order tracking.
//!
//! Each cycle is `n` brickwork layers of `RZZ'(w_{x_a x_b} gamma_k)` followed by
//! one layer of `RX(beta_k)` on every qubit, so a depth-`r` circuit has
//! `m = r(n+1)` layers. Layers are numbered `1..=m`; time `0` denotes the
//! moment before the first layer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gate::QubitGate;
use crate::sk::{DiagonalHamiltonian, SkInstance};

/// One `RZZ'` gate: register positions and the logical spins it couples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EntanglingGate {
    pub positions: [usize; 2],
    pub spins: [usize; 2],
    pub weight: i8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerKind {
    Entangling(Vec<EntanglingGate>),
    Mixer,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layer {
    /// Zero-based cycle index `k - 1`.
    pub cycle: usize,
    pub kind: LayerKind,
    /// Positions hit by an `RZZ'` in this layer, ascending.
    pub active: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnsatzCircuit {
    n: usize,
    r: usize,
    layers: Vec<Layer>,
    permutation: Vec<usize>,
}

/// Variational angles, `r` of each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub betas: Vec<f64>,
    pub gammas: Vec<f64>,
}

impl Params {
    pub fn new(betas: Vec<f64>, gammas: Vec<f64>) -> Result<Self> {
        if betas.len() != gammas.len() {
            return Err(Error::ParamLength {
                expected: betas.len(),
                actual: gammas.len(),
            });
        }
        Ok(Self { betas, gammas })
    }

    pub fn zeros(r: usize) -> Self {
        Self {
            betas: vec![0.0; r],
            gammas: vec![0.0; r],
        }
    }

    /// Inverse of [`Params::to_flat`]: `[beta_1..beta_r, gamma_1..gamma_r]`.
    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if !flat.len().is_multiple_of(2) {
            return Err(Error::ParamLength {
                expected: flat.len() + 1,
                actual: flat.len(),
            });
        }
        let (b, g) = flat.split_at(flat.len() / 2);
        Ok(Self {
            betas: b.to_vec(),
            gammas: g.to_vec(),
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.betas.iter().chain(&self.gammas).copied().collect()
    }

    pub fn depth(&self) -> usize {
        self.betas.len()
    }
}

impl AnsatzCircuit {
    /// Builds the depth-`r` SWAP network for an instance with an even number of spins.
    pub fn build(instance: &SkInstance, r: usize) -> Result<Self> {
        let n = instance.num_spins();
        if !n.is_multiple_of(2) {
            return Err(Error::OddQubitCount(n));
        }
        if r == 0 {
            return Err(Error::InvalidConfig("circuit depth r must be at least 1".into()));
        }
        let mut x: Vec<usize> = (0..n).collect();
        let mut layers = Vec::with_capacity(r * (n + 1));
        for cycle in 0..r {
            for j in 0..n {
                let mut gates = Vec::new();
                let mut a = j % 2;
                while a + 1 < n {
                    let spins = [x[a], x[a + 1]];
                    gates.push(EntanglingGate {
                        positions: [a, a + 1],
                        spins,
                        weight: instance.weight(spins[0], spins[1]),
                    });
                    x.swap(a, a + 1);
                    a += 2;
                }
                let active = gates.iter().flat_map(|g| g.positions).collect();
                layers.push(Layer {
                    cycle,
                    kind: LayerKind::Entangling(gates),
                    active,
                });
            }
            layers.push(Layer {
                cycle,
                kind: LayerKind::Mixer,
                active: Vec::new(),
            });
        }
        Ok(Self {
            n,
            r,
            layers,
            permutation: x,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn depth(&self) -> usize {
        self.r
    }

    /// `m`, the number of layers.
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Layer at time `t` in `1..=m`.
    pub fn layer(&self, t: usize) -> &Layer {
        &self.layers[t - 1]
    }

    /// Logical spin held by each register position at the end of the circuit.
    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// Cost operator in the final register order.
    pub fn hamiltonian(&self, instance: &SkInstance) -> Result<DiagonalHamiltonian> {
        DiagonalHamiltonian::new(instance, &self.permutation)
    }

    pub fn check_params(&self, params: &Params) -> Result<()> {
        for len in [params.betas.len(), params.gammas.len()] {
            if len != self.r {
                return Err(Error::ParamLength {
                    expected: self.r,
                    actual: len,
                });
            }
        }
        Ok(())
    }

    /// Concrete gates of layer `t` (in `1..=m`).
    pub fn layer_gates(&self, t: usize, params: &Params) -> Vec<QubitGate> {
        let layer = self.layer(t);
        match &layer.kind {
            LayerKind::Entangling(gates) => {
                let gamma = params.gammas[layer.cycle];
                gates
                    .iter()
                    .map(|g| QubitGate::RzzSwap {
                        qubits: g.positions,
                        angle: g.weight as f64 * gamma,
                    })
                    .collect()
            }
            LayerKind::Mixer => {
                let beta = params.betas[layer.cycle];
                (0..self.n).map(|qubit| QubitGate::Rx { qubit, angle: beta }).collect()
            }
        }
    }
}
