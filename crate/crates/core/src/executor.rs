//! Fluctuator noise wired onto the SWAP-network circuit, and exact evaluation
//! of the resulting cost landscape.
//!
//! A slot `(q, t)` is a point where the fluctuator coupled to qubit `q` can
//! insert its error `V`, right after layer `t` (time `0` is before the first
//! layer). Slots are grouped into Markov chains: one chain per qubit ordered in
//! time (temporal model) or one chain per time ordered by qubit (spatial
//! model). A chain advances by one transition between consecutive slots.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ansatz::{AnsatzCircuit, Params};
use crate::error::{check_probability, Error, Result};
use crate::gate::ErrorOp;
use crate::hybrid::{FluctuatorId, HybridState};
use crate::markov::{FluctuatorChain, Realization};
use crate::sk::{DiagonalHamiltonian, SkInstance};
use crate::statevector::StateVector;
use crate::transfer::TransferProgram;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    #[default]
    None,
    Temporal,
    Spatial,
}

impl NoiseMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            NoiseMode::None => "none",
            NoiseMode::Temporal => "temporal",
            NoiseMode::Spatial => "spatial",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" | "noiseless" => Ok(NoiseMode::None),
            "temporal" => Ok(NoiseMode::Temporal),
            "spatial" => Ok(NoiseMode::Spatial),
            other => Err(Error::InvalidConfig(format!("unknown noise mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    /// Every qubit after every layer.
    AllSlots,
    /// Only qubits hit by an `RZZ'` gate in that layer.
    #[default]
    ActiveGates,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub mode: NoiseMode,
    pub p: f64,
    pub kappa: f64,
    #[serde(default)]
    pub error_op: ErrorOp,
    #[serde(default)]
    pub schedule: Schedule,
    /// Adds the slots at time 0, before any gate.
    #[serde(default)]
    pub include_boundary_slot: bool,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::noiseless()
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            mode: NoiseMode::None,
            p: 0.0,
            kappa: 0.0,
            error_op: ErrorOp::Y,
            schedule: Schedule::ActiveGates,
            include_boundary_slot: false,
        }
    }

    pub fn new(mode: NoiseMode, p: f64, kappa: f64) -> Result<Self> {
        let model = Self {
            mode,
            p,
            kappa,
            ..Self::noiseless()
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_schedule(mut self, schedule: Schedule, include_boundary_slot: bool) -> Self {
        self.schedule = schedule;
        self.include_boundary_slot = include_boundary_slot;
        self
    }

    pub fn with_error_op(mut self, op: ErrorOp) -> Self {
        self.error_op = op;
        self
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("p", self.p)?;
        check_probability("kappa", self.kappa)?;
        if let ErrorOp::Unitary(u) = self.error_op {
            let dev = (0..2)
                .flat_map(|i| (0..2).map(move |j| (i, j)))
                .map(|(i, j)| {
                    let s: num_complex::Complex64 = (0..2).map(|k| u[k][i].conj() * u[k][j]).sum();
                    (s - if i == j { 1.0 } else { 0.0 }).norm()
                })
                .fold(0.0, f64::max);
            if dev > 1e-10 {
                return Err(Error::InvalidConfig(format!("error operator is not unitary (deviation {dev:e})")));
            }
        }
        Ok(())
    }

    pub fn chain(&self) -> FluctuatorChain {
        FluctuatorChain::new(self.p, self.kappa).expect("validated model")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Slot {
    pub qubit: usize,
    pub time: usize,
}

impl Slot {
    pub fn new(qubit: usize, time: usize) -> Self {
        Self { qubit, time }
    }
}

/// Eligible error slots and their grouping into fluctuator chains.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotGrid {
    mode: NoiseMode,
    num_layers: usize,
    chains: Vec<Vec<Slot>>,
}

impl SlotGrid {
    pub fn build(circuit: &AnsatzCircuit, model: &NoiseModel) -> Self {
        let n = circuit.num_qubits();
        let m = circuit.num_layers();
        let mut by_time: Vec<Vec<usize>> = vec![Vec::new(); m + 1];
        if model.mode != NoiseMode::None {
            if model.include_boundary_slot {
                by_time[0] = (0..n).collect();
            }
            for (t, qubits) in by_time.iter_mut().enumerate().skip(1) {
                *qubits = match model.schedule {
                    Schedule::AllSlots => (0..n).collect(),
                    Schedule::ActiveGates => circuit.layer(t).active.clone(),
                };
            }
        }
        let chains = match model.mode {
            NoiseMode::None => Vec::new(),
            NoiseMode::Temporal => (0..n)
                .map(|q| {
                    (0..=m)
                        .filter(|&t| by_time[t].contains(&q))
                        .map(|t| Slot::new(q, t))
                        .collect::<Vec<_>>()
                })
                .filter(|c| !c.is_empty())
                .collect(),
            NoiseMode::Spatial => by_time
                .iter()
                .enumerate()
                .filter(|(_, qs)| !qs.is_empty())
                .map(|(t, qs)| qs.iter().map(|&q| Slot::new(q, t)).collect())
                .collect(),
        };
        Self {
            mode: model.mode,
            num_layers: m,
            chains,
        }
    }

    pub fn mode(&self) -> NoiseMode {
        self.mode
    }

    pub fn chains(&self) -> &[Vec<Slot>] {
        &self.chains
    }

    pub fn num_slots(&self) -> usize {
        self.chains.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.chains.is_empty()
    }

    /// All slots ordered by `(time, qubit)`.
    pub fn slots(&self) -> Vec<Slot> {
        let mut all: Vec<Slot> = self.chains.iter().flatten().copied().collect();
        all.sort_by_key(|s| (s.time, s.qubit));
        all
    }

    pub fn contains(&self, slot: Slot) -> bool {
        self.chains.iter().any(|c| c.contains(&slot))
    }

    /// Noise events grouped by time: `(chain, position in chain, qubit)`,
    /// ascending in qubit.
    fn events(&self) -> Vec<Vec<(usize, usize, usize)>> {
        let mut events = vec![Vec::new(); self.num_layers + 1];
        for (c, chain) in self.chains.iter().enumerate() {
            for (k, s) in chain.iter().enumerate() {
                events[s.time].push((c, k, s.qubit));
            }
        }
        for e in &mut events {
            e.sort_by_key(|&(_, _, q)| q);
        }
        events
    }

    /// Per-chain realization bits for a set of excited slots.
    pub fn realizations(&self, excited: &[Slot]) -> Result<Vec<Realization>> {
        let set: BTreeSet<Slot> = excited.iter().copied().collect();
        for s in &set {
            if !self.contains(*s) {
                return Err(Error::SlotOutsideGrid {
                    qubit: s.qubit,
                    time: s.time,
                });
            }
        }
        self.chains
            .iter()
            .map(|c| Realization::new(c.iter().map(|s| set.contains(s)).collect()))
            .collect()
    }

    /// Joint probability of an excitation pattern: the product over
    /// independent chains.
    pub fn realization_probability(&self, chain: &FluctuatorChain, excited: &[Slot]) -> Result<f64> {
        Ok(self
            .realizations(excited)?
            .iter()
            .map(|b| chain.realization_probability(b))
            .product())
    }
}

/// Everything needed to evaluate the landscape of one (instance, circuit, model).
#[derive(Debug, Clone)]
pub struct Landscape {
    instance: SkInstance,
    circuit: AnsatzCircuit,
    hamiltonian: DiagonalHamiltonian,
    model: NoiseModel,
    grid: SlotGrid,
    events: Vec<Vec<(usize, usize, usize)>>,
    program: Option<TransferProgram>,
}

impl Landscape {
    pub fn new(instance: &SkInstance, circuit: &AnsatzCircuit, model: &NoiseModel) -> Result<Self> {
        model.validate()?;
        if instance.num_spins() != circuit.num_qubits() {
            return Err(Error::DimensionMismatch {
                expected: circuit.num_qubits(),
                actual: instance.num_spins(),
            });
        }
        let grid = SlotGrid::build(circuit, model);
        Ok(Self {
            hamiltonian: circuit.hamiltonian(instance)?,
            program: TransferProgram::compile(instance, circuit, model, &grid),
            instance: instance.clone(),
            circuit: circuit.clone(),
            model: *model,
            events: grid.events(),
            grid,
        })
    }

    pub fn circuit(&self) -> &AnsatzCircuit {
        &self.circuit
    }

    pub fn model(&self) -> &NoiseModel {
        &self.model
    }

    pub fn grid(&self) -> &SlotGrid {
        &self.grid
    }

    pub fn hamiltonian(&self) -> &DiagonalHamiltonian {
        &self.hamiltonian
    }

    pub fn instance(&self) -> &SkInstance {
        &self.instance
    }

    /// Same circuit and grid with a different error rate.
    pub fn with_p(&self, p: f64) -> Result<Self> {
        Self::new(&self.instance, &self.circuit, &self.model.with_p(p))
    }

    pub fn num_params(&self) -> usize {
        2 * self.circuit.depth()
    }

    /// Exact noisy expectation value of the cost operator.
    pub fn evaluate(&self, params: &Params) -> Result<f64> {
        self.circuit.check_params(params)?;
        match &self.program {
            Some(prog) => Ok(prog.evaluate(&params.to_flat())),
            None => self.evaluate_dense(params),
        }
    }

    /// Value and gradient over the flat `[betas, gammas]` layout. Exact for
    /// Pauli errors; central differences with step `1e-6` otherwise.
    pub fn evaluate_with_gradient(&self, flat: &[f64]) -> Result<(f64, Vec<f64>)> {
        let params = Params::from_flat(flat)?;
        self.circuit.check_params(&params)?;
        if let Some(prog) = &self.program {
            return Ok(prog.evaluate_with_gradient(flat));
        }
        let value = self.evaluate_dense(&params)?;
        let h = 1e-6;
        let mut grad = Vec::with_capacity(flat.len());
        let mut x = flat.to_vec();
        for k in 0..flat.len() {
            x[k] = flat[k] + h;
            let up = self.evaluate_dense(&Params::from_flat(&x)?)?;
            x[k] = flat[k] - h;
            let down = self.evaluate_dense(&Params::from_flat(&x)?)?;
            x[k] = flat[k];
            grad.push((up - down) / (2.0 * h));
        }
        Ok((value, grad))
    }

    /// Evaluation through the dense block-diagonal density matrix.
    pub fn evaluate_dense(&self, params: &Params) -> Result<f64> {
        Ok(self.run_dense(params)?.0)
    }

    /// Largest number of fluctuator configurations held at once while
    /// evaluating.
    pub fn peak_blocks(&self) -> Result<usize> {
        match &self.program {
            Some(prog) => Ok(prog.peak_blocks()),
            None => Ok(self.run_dense(&Params::zeros(self.circuit.depth()))?.1),
        }
    }

    /// Dense peak block count, regardless of which engine `evaluate` uses.
    pub fn dense_peak_blocks(&self) -> Result<usize> {
        Ok(self.run_dense(&Params::zeros(self.circuit.depth()))?.1)
    }

    fn run_dense(&self, params: &Params) -> Result<(f64, usize)> {
        self.circuit.check_params(params)?;
        let n = self.circuit.num_qubits();
        let chain = self.model.chain();
        let transition = chain.transition_matrix();
        let op = &self.model.error_op;
        let mut state = HybridState::plus_state(n)?;
        if self.model.mode == NoiseMode::Temporal {
            for c in 0..self.grid.chains.len() {
                state.attach_fluctuator(FluctuatorId(c as u32), self.model.p)?;
            }
        }
        let mut peak = state.num_blocks();
        for (t, events) in self.events.iter().enumerate() {
            if t > 0 {
                for gate in self.circuit.layer_gates(t, params) {
                    state.apply_unitary(&gate)?;
                }
            }
            if events.is_empty() {
                continue;
            }
            let spatial = self.model.mode == NoiseMode::Spatial;
            if spatial {
                state.attach_fluctuator(FluctuatorId(events[0].0 as u32), self.model.p)?;
                peak = peak.max(state.num_blocks());
            }
            for &(c, k, q) in events {
                let id = FluctuatorId(c as u32);
                if k > 0 {
                    state.apply_classical_transition(id, &transition)?;
                }
                state.apply_controlled_error(id, q, op)?;
            }
            if spatial {
                state.trace_out_fluctuator(FluctuatorId(events[0].0 as u32))?;
            }
        }
        Ok((state.expectation(self.hamiltonian.diag())?, peak))
    }

    /// Noiseless circuit with `V` inserted at exactly the given slots.
    pub fn evaluate_realization(&self, params: &Params, excited: &[Slot]) -> Result<f64> {
        self.circuit.check_params(params)?;
        let mut at_time = vec![Vec::new(); self.circuit.num_layers() + 1];
        for s in excited {
            if !self.grid.contains(*s) {
                return Err(Error::SlotOutsideGrid {
                    qubit: s.qubit,
                    time: s.time,
                });
            }
            at_time[s.time].push(s.qubit);
        }
        let mut psi = StateVector::plus_state(self.circuit.num_qubits())?;
        for (t, qubits) in at_time.iter_mut().enumerate() {
            if t > 0 {
                for gate in self.circuit.layer_gates(t, params) {
                    psi.apply(&gate)?;
                }
            }
            qubits.sort_unstable();
            qubits.dedup();
            for &q in qubits.iter() {
                if let Some(gate) = self.model.error_op.on(q) {
                    psi.apply(&gate)?;
                }
            }
        }
        psi.expectation(self.hamiltonian.diag())
    }

    /// Noiseless value, ignoring the model.
    pub fn evaluate_noiseless(&self, params: &Params) -> Result<f64> {
        self.evaluate_realization(params, &[])
    }
}

pub fn build_slot_grid(circuit: &AnsatzCircuit, model: &NoiseModel) -> SlotGrid {
    SlotGrid::build(circuit, model)
}

pub fn evaluate_landscape(instance: &SkInstance, circuit: &AnsatzCircuit, params: &Params, model: &NoiseModel) -> Result<f64> {
    Landscape::new(instance, circuit, model)?.evaluate(params)
}

pub fn evaluate_given_realization(
    instance: &SkInstance,
    circuit: &AnsatzCircuit,
    params: &Params,
    model: &NoiseModel,
    excited: &[Slot],
) -> Result<f64> {
    Landscape::new(instance, circuit, model)?.evaluate_realization(params, excited)
}
