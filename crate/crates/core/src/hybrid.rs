//! Exact density-matrix simulation of qubits coupled to classical binary fluctuators.
//!
//! The joint state is block-diagonal in the classical bits: for every
//! configuration `c` of the live fluctuators we store the unnormalized qubit
//! density matrix `Pr(c) * rho_c`. Bit `k` of a configuration index belongs to
//! the `k`-th attached fluctuator.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{check_probability, Error, Result};
use crate::gate::{ErrorOp, QubitGate};
use crate::kernel::Prepared;
use crate::markov::Stochastic2;

/// Largest register the dense representation accepts.
pub const MAX_QUBITS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FluctuatorId(pub u32);

#[derive(Debug, Clone)]
pub struct HybridState {
    n: usize,
    dim: usize,
    fluctuators: Vec<FluctuatorId>,
    blocks: Vec<Vec<Complex64>>,
    scratch: Vec<Complex64>,
}

/// Consistency report produced by [`HybridState::validate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostics {
    pub blocks: usize,
    pub trace_deviation: f64,
    pub hermiticity_deviation: f64,
    pub min_eigenvalue: f64,
}

impl Diagnostics {
    pub fn is_valid(&self, tol: f64) -> bool {
        self.trace_deviation <= tol && self.hermiticity_deviation <= tol && self.min_eigenvalue >= -tol
    }
}

impl HybridState {
    /// `|+><+|` on every qubit, no fluctuators attached.
    pub fn plus_state(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::TooManyQubits { n, max: MAX_QUBITS });
        }
        let dim = 1usize << n;
        let value = Complex64::new(1.0 / dim as f64, 0.0);
        Ok(Self {
            n,
            dim,
            fluctuators: Vec::new(),
            blocks: vec![vec![value; dim * dim]],
            scratch: vec![Complex64::default(); dim * dim],
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn fluctuators(&self) -> &[FluctuatorId] {
        &self.fluctuators
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Block for a configuration; bit `k` is the value of the `k`-th live fluctuator.
    pub fn block(&self, config: usize) -> &[Complex64] {
        &self.blocks[config]
    }

    pub fn block_mut(&mut self, config: usize) -> &mut [Complex64] {
        &mut self.blocks[config]
    }

    fn position(&self, id: FluctuatorId) -> Result<usize> {
        self.fluctuators
            .iter()
            .position(|&f| f == id)
            .ok_or(Error::UnknownFluctuator(id.0))
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.n {
            Err(Error::QubitOutOfRange { qubit, n: self.n })
        } else {
            Ok(())
        }
    }

    /// Attaches a fluctuator drawn from its steady state `(1 - p, p)`.
    pub fn attach_fluctuator(&mut self, id: FluctuatorId, p: f64) -> Result<()> {
        check_probability("p", p)?;
        if self.fluctuators.contains(&id) {
            return Err(Error::DuplicateFluctuator(id.0));
        }
        let excited: Vec<Vec<Complex64>> = self
            .blocks
            .iter_mut()
            .map(|b| {
                let up = b.iter().map(|&x| x * p).collect();
                b.iter_mut().for_each(|x| *x *= 1.0 - p);
                up
            })
            .collect();
        self.blocks.extend(excited);
        self.fluctuators.push(id);
        Ok(())
    }

    pub fn apply_unitary(&mut self, gate: &QubitGate) -> Result<()> {
        gate.check_targets(self.n)?;
        let prepared = Prepared::new(self.n, gate);
        let dim = self.dim;
        for block in &mut self.blocks {
            prepared.conjugate(block, dim, &mut self.scratch);
        }
        Ok(())
    }

    /// Remixes blocks along one classical bit: `new(b) = sum_a t[b][a] old(a)`.
    pub fn apply_classical_transition(&mut self, id: FluctuatorId, t: &Stochastic2) -> Result<()> {
        let k = self.position(id)?;
        let stochastic = (0..2).all(|a| (t[0][a] + t[1][a] - 1.0).abs() <= 1e-12 && t[0][a] >= 0.0 && t[1][a] >= 0.0);
        if !stochastic {
            return Err(Error::NotStochastic(*t));
        }
        let bit = 1usize << k;
        for c in 0..self.blocks.len() {
            if c & bit != 0 {
                continue;
            }
            let (lo, hi) = self.blocks.split_at_mut(c | bit);
            let (b0, b1) = (&mut lo[c], &mut hi[0]);
            for (x0, x1) in b0.iter_mut().zip(b1.iter_mut()) {
                let (a, b) = (*x0, *x1);
                *x0 = a * t[0][0] + b * t[0][1];
                *x1 = a * t[1][0] + b * t[1][1];
            }
        }
        Ok(())
    }

    /// Conjugates the blocks in which the fluctuator is excited by `op` on `qubit`.
    pub fn apply_controlled_error(&mut self, id: FluctuatorId, qubit: usize, op: &ErrorOp) -> Result<()> {
        let k = self.position(id)?;
        self.check_qubit(qubit)?;
        let Some(gate) = op.on(qubit) else {
            return Ok(());
        };
        let prepared = Prepared::new(self.n, &gate);
        let dim = self.dim;
        for (c, block) in self.blocks.iter_mut().enumerate() {
            if c >> k & 1 == 1 {
                prepared.conjugate(block, dim, &mut self.scratch);
            }
        }
        Ok(())
    }

    /// Sums the blocks over one classical bit and forgets the fluctuator.
    pub fn trace_out_fluctuator(&mut self, id: FluctuatorId) -> Result<()> {
        let k = self.position(id)?;
        let bit = 1usize << k;
        let low = bit - 1;
        let mut old: Vec<Option<Vec<Complex64>>> = std::mem::take(&mut self.blocks).into_iter().map(Some).collect();
        let half = old.len() / 2;
        let mut merged = Vec::with_capacity(half);
        for c in 0..half {
            let c0 = (c & low) | ((c & !low) << 1);
            let mut b0 = old[c0].take().expect("block visited once");
            let b1 = old[c0 | bit].take().expect("block visited once");
            b0.iter_mut().zip(&b1).for_each(|(x, y)| *x += y);
            merged.push(b0);
        }
        self.blocks = merged;
        self.fluctuators.remove(k);
        Ok(())
    }

    /// `sum_c sum_z h[z] block_c[z][z]` for a diagonal observable.
    pub fn expectation(&self, diag: &[f64]) -> Result<f64> {
        if diag.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: diag.len(),
            });
        }
        let mut total = Complex64::default();
        for block in &self.blocks {
            for (z, &h) in diag.iter().enumerate() {
                total += block[z * self.dim + z] * h;
            }
        }
        if total.im.abs() > 1e-10 {
            return Err(Error::ComplexExpectation(total.im));
        }
        Ok(total.re)
    }

    pub fn total_trace(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| (0..self.dim).map(|z| b[z * self.dim + z].re).sum::<f64>())
            .sum()
    }

    /// Qubit density matrix with all fluctuators traced out.
    pub fn reduced_density_matrix(&self) -> Vec<Complex64> {
        let mut acc = vec![Complex64::default(); self.dim * self.dim];
        for block in &self.blocks {
            acc.iter_mut().zip(block).for_each(|(a, b)| *a += b);
        }
        acc
    }

    /// Embeds the blocks into the full (qubits x classical bits) density matrix.
    ///
    /// The classical bits are the least significant part of the joint index.
    pub fn to_full_matrix(&self) -> Vec<Complex64> {
        let nb = self.blocks.len();
        let full_dim = self.dim * nb;
        let mut full = vec![Complex64::default(); full_dim * full_dim];
        for (c, block) in self.blocks.iter().enumerate() {
            for i in 0..self.dim {
                for j in 0..self.dim {
                    full[(i * nb + c) * full_dim + j * nb + c] = block[i * self.dim + j];
                }
            }
        }
        full
    }

    pub fn validate(&self) -> Diagnostics {
        let dim = self.dim;
        let mut herm = 0.0f64;
        let mut min_eig = f64::INFINITY;
        for block in &self.blocks {
            for i in 0..dim {
                for j in 0..dim {
                    herm = herm.max((block[i * dim + j] - block[j * dim + i].conj()).norm());
                }
            }
            let m = DMatrix::from_fn(dim, dim, |i, j| (block[i * dim + j] + block[j * dim + i].conj()) * 0.5);
            let eig = SymmetricEigen::new(m);
            min_eig = min_eig.min(eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min));
        }
        Diagnostics {
            blocks: self.blocks.len(),
            trace_deviation: (self.total_trace() - 1.0).abs(),
            hermiticity_deviation: herm,
            min_eigenvalue: min_eig,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gate::{ry, GateMatrix};
    use crate::markov::FluctuatorChain;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    fn random_gate<R: Rng>(rng: &mut R, n: usize) -> QubitGate {
        let q = rng.gen_range(0..n);
        let mut r = rng.gen_range(0..n - 1);
        if r >= q {
            r += 1;
        }
        let angle = rng.gen_range(-PI..PI);
        match rng.gen_range(0..9) {
            0 => QubitGate::Rx { qubit: q, angle },
            1 => QubitGate::Ry { qubit: q, angle },
            2 => QubitGate::Rz { qubit: q, angle },
            3 => QubitGate::Rzz { qubits: [q, r], angle },
            4 => QubitGate::Swap { qubits: [q, r] },
            5 => QubitGate::RzzSwap { qubits: [q, r], angle },
            6 => QubitGate::X(q),
            7 => QubitGate::Y(q),
            _ => QubitGate::Z(q),
        }
    }

    /// Naive full-space simulator: fluctuators are decohered qubits appended as
    /// the least significant bits, everything acts by explicit matrix products.
    struct Naive {
        n: usize,
        k: usize,
        rho: DMatrix<Complex64>,
    }

    impl Naive {
        fn plus(n: usize) -> Self {
            let dim = 1 << n;
            Self {
                n,
                k: 0,
                rho: DMatrix::from_element(dim, dim, c(1.0 / dim as f64)),
            }
        }

        fn embed(&self, gate: &QubitGate, control: Option<usize>) -> DMatrix<Complex64> {
            let total = self.n + self.k;
            let dim = 1usize << total;
            let targets = gate.targets();
            let qubit_bit = |z: usize, q: usize| (z >> (total - 1 - q)) & 1;
            let mut u = DMatrix::zeros(dim, dim);
            for col in 0..dim {
                if let Some(f) = control {
                    if (col >> (self.k - 1 - f)) & 1 == 0 {
                        u[(col, col)] = c(1.0);
                        continue;
                    }
                }
                let local_col = targets.iter().fold(0, |acc, &q| acc * 2 + qubit_bit(col, q));
                for local_row in 0..1usize << targets.len() {
                    let mut row = col;
                    for (pos, &q) in targets.iter().enumerate() {
                        let bit = (local_row >> (targets.len() - 1 - pos)) & 1;
                        let m = 1 << (total - 1 - q);
                        row = if bit == 1 { row | m } else { row & !m };
                    }
                    let entry = match gate.matrix() {
                        GateMatrix::One(m) => m[local_row][local_col],
                        GateMatrix::Two(m) => m[local_row][local_col],
                    };
                    u[(row, col)] = entry;
                }
            }
            u
        }

        fn unitary(&mut self, gate: &QubitGate) {
            let u = self.embed(gate, None);
            self.rho = &u * &self.rho * u.adjoint();
        }

        fn controlled(&mut self, f: usize, gate: &QubitGate) {
            let u = self.embed(gate, Some(f));
            self.rho = &u * &self.rho * u.adjoint();
        }

        /// Fluctuators are appended with the newest as the least significant bit,
        /// whereas the hybrid state stores the newest as the most significant
        /// configuration bit; `classical_index` converts.
        fn attach(&mut self, p: f64) {
            let s = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0 - p), c(p)]));
            self.rho = self.rho.kronecker(&s);
            self.k += 1;
        }

        fn transition(&mut self, f: usize, t: &Stochastic2) {
            let dim = self.rho.nrows();
            let m = 1usize << (self.k - 1 - f);
            let mut out = DMatrix::zeros(dim, dim);
            // Kraus operators sqrt(t[b][a]) |b><a| on the fluctuator bit
            for a in 0..2 {
                for b in 0..2 {
                    let mut kraus = DMatrix::<Complex64>::zeros(dim, dim);
                    for z in 0..dim {
                        if (z & m != 0) as usize == a {
                            let target = if b == 1 { z | m } else { z & !m };
                            kraus[(target, z)] = c(t[b][a].sqrt());
                        }
                    }
                    out += &kraus * &self.rho * kraus.adjoint();
                }
            }
            self.rho = out;
        }

        fn to_hybrid_layout(&self) -> Vec<Complex64> {
            // reverse fluctuator bit order: naive bit (k-1-f) <-> hybrid bit f
            let dim = self.rho.nrows();
            let nq = 1usize << self.n;
            let nb = 1usize << self.k;
            let reverse = |cfg: usize| (0..self.k).fold(0, |acc, f| acc | (((cfg >> (self.k - 1 - f)) & 1) << f));
            let map = |z: usize| (z / nb) * nb + reverse(z % nb);
            let mut out = vec![Complex64::default(); dim * dim];
            for i in 0..dim {
                for j in 0..dim {
                    out[map(i) * dim + map(j)] = self.rho[(i, j)];
                }
            }
            let _ = nq;
            out
        }
    }

    #[test]
    fn plus_state_fixtures() {
        let s = HybridState::plus_state(1).unwrap();
        assert!(s.block(0).iter().all(|&x| x == c(0.5)));
        let s = HybridState::plus_state(2).unwrap();
        assert_eq!(s.block(0).len(), 16);
        assert!(s.block(0).iter().all(|&x| x == c(0.25)));
        for n in 1..=6 {
            let s = HybridState::plus_state(n).unwrap();
            assert!((s.total_trace() - 1.0).abs() < 1e-15);
            assert!(s.validate().is_valid(1e-14));
        }
        assert!(HybridState::plus_state(0).is_err());
        assert!(HybridState::plus_state(13).is_err());
    }

    #[test]
    fn attach_splits_traces() {
        let mut s = HybridState::plus_state(2).unwrap();
        s.attach_fluctuator(FluctuatorId(0), 0.3).unwrap();
        assert_eq!(s.num_blocks(), 2);
        let tr = |s: &HybridState, cfg: usize| (0..4).map(|z| s.block(cfg)[z * 4 + z].re).sum::<f64>();
        assert!((tr(&s, 0) - 0.7).abs() < 1e-15 && (tr(&s, 1) - 0.3).abs() < 1e-15);
        assert_eq!(s.attach_fluctuator(FluctuatorId(0), 0.5), Err(Error::DuplicateFluctuator(0)));

        let mut s = HybridState::plus_state(1).unwrap();
        s.attach_fluctuator(FluctuatorId(0), 0.5).unwrap();
        s.attach_fluctuator(FluctuatorId(1), 0.5).unwrap();
        assert_eq!(s.num_blocks(), 4);
        for cfg in 0..4 {
            let t: f64 = (0..2).map(|z| s.block(cfg)[z * 2 + z].re).sum();
            assert!((t - 0.25).abs() < 1e-15);
        }

        let mut s = HybridState::plus_state(1).unwrap();
        s.attach_fluctuator(FluctuatorId(3), 0.0).unwrap();
        assert!(s.block(1).iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn unitary_fixtures() {
        let mut s = HybridState::plus_state(1).unwrap();
        s.apply_unitary(&QubitGate::X(0)).unwrap();
        assert!(s.block(0).iter().all(|&x| (x - c(0.5)).norm() < 1e-15));

        let mut s = HybridState::plus_state(3).unwrap();
        s.apply_unitary(&QubitGate::Rx { qubit: 1, angle: 0.4 }).unwrap();
        let before = s.block(0).to_vec();
        s.apply_unitary(&QubitGate::Rzz { qubits: [0, 2], angle: 2.0 * PI }).unwrap();
        assert!(max_abs_diff(&before, s.block(0)) < 1e-13);
        s.apply_unitary(&QubitGate::RzzSwap { qubits: [0, 1], angle: 2.0 * PI }).unwrap();
        s.apply_unitary(&QubitGate::Swap { qubits: [0, 1] }).unwrap();
        assert!(max_abs_diff(&before, s.block(0)) < 1e-13);

        assert!(matches!(
            s.apply_unitary(&QubitGate::X(3)),
            Err(Error::QubitOutOfRange { .. })
        ));
        assert!(s.apply_unitary(&QubitGate::Swap { qubits: [1, 1] }).is_err());
    }

    #[test]
    fn swap_exchanges_product_factors() {
        // rho_A = |0><0| (qubit 0), rho_B = |+><+| (qubit 1)
        let mut s = HybridState::plus_state(2).unwrap();
        s.apply_unitary(&QubitGate::Ry { qubit: 0, angle: -PI / 2.0 }).unwrap();
        let a = [c(1.0), c(0.0), c(0.0), c(0.0)];
        let b = [c(0.5); 4];
        let kron = |x: &[Complex64; 4], y: &[Complex64; 4]| {
            let mut out = vec![Complex64::default(); 16];
            for i in 0..4 {
                for j in 0..4 {
                    out[i * 4 + j] = x[(i / 2) * 2 + j / 2] * y[(i % 2) * 2 + j % 2];
                }
            }
            out
        };
        assert!(max_abs_diff(s.block(0), &kron(&a, &b)) < 1e-15);
        s.apply_unitary(&QubitGate::Swap { qubits: [0, 1] }).unwrap();
        assert!(max_abs_diff(s.block(0), &kron(&b, &a)) < 1e-15);
    }

    #[test]
    fn transition_fixtures() {
        let mut s = HybridState::plus_state(1).unwrap();
        let f = FluctuatorId(0);
        s.attach_fluctuator(f, 0.4).unwrap();
        s.apply_controlled_error(f, 0, &ErrorOp::Y).unwrap();
        let before: Vec<_> = (0..2).map(|cfg| s.block(cfg).to_vec()).collect();
        s.apply_classical_transition(f, &[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        for cfg in 0..2 {
            assert_eq!(s.block(cfg), &before[cfg][..]);
        }

        // reset: bit marginal becomes (1-p, p) regardless of the input
        let mut s = HybridState::plus_state(1).unwrap();
        s.attach_fluctuator(f, 0.9).unwrap();
        let reset = FluctuatorChain::new(0.25, 0.0).unwrap().transition_matrix();
        s.apply_classical_transition(f, &reset).unwrap();
        let tr = |s: &HybridState, cfg: usize| (0..2).map(|z| s.block(cfg)[z * 2 + z].re).sum::<f64>();
        assert!((tr(&s, 0) - 0.75).abs() < 1e-15 && (tr(&s, 1) - 0.25).abs() < 1e-15);

        // steady state is preserved for any kappa
        for k in [0.0, 0.3, 1.0] {
            let mut s = HybridState::plus_state(1).unwrap();
            s.attach_fluctuator(f, 0.3).unwrap();
            let t = FluctuatorChain::new(0.3, k).unwrap().transition_matrix();
            s.apply_classical_transition(f, &t).unwrap();
            assert!((tr(&s, 0) - 0.7).abs() < 1e-15 && (tr(&s, 1) - 0.3).abs() < 1e-15);
        }

        assert_eq!(
            s.apply_classical_transition(FluctuatorId(9), &reset),
            Err(Error::UnknownFluctuator(9))
        );
        assert!(s.apply_classical_transition(f, &[[0.5, 0.0], [0.2, 1.0]]).is_err());
    }

    #[test]
    fn controlled_error_fixtures() {
        let f = FluctuatorId(0);
        let mut s = HybridState::plus_state(2).unwrap();
        s.apply_unitary(&QubitGate::Rx { qubit: 0, angle: 0.3 }).unwrap();
        let mut reference = s.clone();
        s.attach_fluctuator(f, 1.0).unwrap();
        s.apply_controlled_error(f, 1, &ErrorOp::Y).unwrap();
        s.trace_out_fluctuator(f).unwrap();
        reference.apply_unitary(&QubitGate::Y(1)).unwrap();
        assert!(max_abs_diff(s.block(0), reference.block(0)) < 1e-15);

        let mut s = HybridState::plus_state(2).unwrap();
        let before = s.block(0).to_vec();
        s.attach_fluctuator(f, 0.0).unwrap();
        s.apply_controlled_error(f, 0, &ErrorOp::X).unwrap();
        s.trace_out_fluctuator(f).unwrap();
        assert!(max_abs_diff(s.block(0), &before) < 1e-15);

        // <X> of Y-with-probability-1/2 on |+>: 0.5 * 1 + 0.5 * (-1)
        let mut s = HybridState::plus_state(1).unwrap();
        s.attach_fluctuator(f, 0.5).unwrap();
        s.apply_controlled_error(f, 0, &ErrorOp::Y).unwrap();
        s.trace_out_fluctuator(f).unwrap();
        let rho = s.block(0);
        let expect_x = (rho[1] + rho[2]).re;
        assert!(expect_x.abs() < 1e-15);

        assert!(s.apply_controlled_error(f, 0, &ErrorOp::Y).is_err());
        s.attach_fluctuator(f, 0.5).unwrap();
        assert!(s.apply_controlled_error(f, 1, &ErrorOp::Y).is_err());
    }

    #[test]
    fn trace_out_fixtures() {
        let mut s = HybridState::plus_state(2).unwrap();
        s.apply_unitary(&QubitGate::Ry { qubit: 1, angle: 0.8 }).unwrap();
        let before = s.block(0).to_vec();
        s.attach_fluctuator(FluctuatorId(4), 0.35).unwrap();
        s.trace_out_fluctuator(FluctuatorId(4)).unwrap();
        assert!(max_abs_diff(s.block(0), &before) < 1e-15);

        // channel form (1 - p) rho + p V rho V^dagger
        let p = 0.37;
        let mut s = HybridState::plus_state(1).unwrap();
        s.apply_unitary(&QubitGate::Rz { qubit: 0, angle: 0.5 }).unwrap();
        let rho = s.block(0).to_vec();
        let mut vrho = s.clone();
        vrho.apply_unitary(&QubitGate::Y(0)).unwrap();
        s.attach_fluctuator(FluctuatorId(0), p).unwrap();
        s.apply_controlled_error(FluctuatorId(0), 0, &ErrorOp::Y).unwrap();
        s.trace_out_fluctuator(FluctuatorId(0)).unwrap();
        let expected: Vec<_> = rho.iter().zip(vrho.block(0)).map(|(a, b)| a * (1.0 - p) + b * p).collect();
        assert!(max_abs_diff(s.block(0), &expected) < 1e-15);
        assert!((s.total_trace() - 1.0).abs() < 1e-15);

        // middle fluctuator of three
        let mut s = HybridState::plus_state(1).unwrap();
        for (i, p) in [0.2, 0.5, 0.7].into_iter().enumerate() {
            s.attach_fluctuator(FluctuatorId(i as u32), p).unwrap();
            s.apply_controlled_error(FluctuatorId(i as u32), 0, &ErrorOp::Unitary(ry(0.3 * (i + 1) as f64))).unwrap();
        }
        let full_reduced = s.reduced_density_matrix();
        s.trace_out_fluctuator(FluctuatorId(1)).unwrap();
        assert_eq!(s.num_blocks(), 4);
        assert_eq!(s.fluctuators(), &[FluctuatorId(0), FluctuatorId(2)]);
        assert!(max_abs_diff(&s.reduced_density_matrix(), &full_reduced) < 1e-15);
    }

    #[test]
    fn expectation_fixtures() {
        let s = HybridState::plus_state(3).unwrap();
        assert!((s.expectation(&[1.0; 8]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(s.expectation(&[1.0; 4]), Err(Error::DimensionMismatch { .. })));

        // single-qubit toy channel: (1 - p) rho + p RY(pi/2) rho RY(pi/2)^dagger, H = Z
        for p in [0.0, 0.25, 1.0] {
            let mut s = HybridState::plus_state(1).unwrap();
            s.attach_fluctuator(FluctuatorId(0), p).unwrap();
            s.apply_controlled_error(FluctuatorId(0), 0, &ErrorOp::Unitary(ry(PI / 2.0))).unwrap();
            s.trace_out_fluctuator(FluctuatorId(0)).unwrap();
            assert!((s.expectation(&[1.0, -1.0]).unwrap() + p).abs() < 1e-15);
        }
    }

    #[test]
    fn validate_flags_problems() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut s = HybridState::plus_state(4).unwrap();
        s.attach_fluctuator(FluctuatorId(0), 0.3).unwrap();
        for _ in 0..100 {
            let g = random_gate(&mut rng, 4);
            s.apply_unitary(&g).unwrap();
        }
        let d = s.validate();
        assert!(d.trace_deviation <= 1e-10);
        assert!(d.is_valid(1e-10), "{d:?}");

        s.block_mut(1)[1] += Complex64::new(0.0, 0.1);
        let d = s.validate();
        assert!(d.hermiticity_deviation > 0.05);
        assert!(!d.is_valid(1e-10));
    }

    #[test]
    fn matches_naive_full_space_evolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..20 {
            let n = 1 + trial % 2;
            let mut hybrid = HybridState::plus_state(n).unwrap();
            let mut naive = Naive::plus(n);
            let mut attached = 0usize;
            for _step in 0..12 {
                let choice = rng.gen_range(0..4);
                match choice {
                    0 if attached < 2 => {
                        let p = rng.gen_range(0.0..1.0);
                        hybrid.attach_fluctuator(FluctuatorId(attached as u32), p).unwrap();
                        naive.attach(p);
                        attached += 1;
                    }
                    1 if attached > 0 => {
                        let f = rng.gen_range(0..attached);
                        let chain = FluctuatorChain::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)).unwrap();
                        hybrid.apply_classical_transition(FluctuatorId(f as u32), &chain.transition_matrix()).unwrap();
                        naive.transition(f, &chain.transition_matrix());
                    }
                    2 if attached > 0 => {
                        let f = rng.gen_range(0..attached);
                        let q = rng.gen_range(0..n);
                        let op = [ErrorOp::X, ErrorOp::Y, ErrorOp::Z, ErrorOp::Unitary(ry(rng.gen_range(-3.0..3.0)))]
                            [rng.gen_range(0..4)];
                        hybrid.apply_controlled_error(FluctuatorId(f as u32), q, &op).unwrap();
                        naive.controlled(f, &op.on(q).unwrap());
                    }
                    _ => {
                        let g = if n == 1 {
                            QubitGate::Rx { qubit: 0, angle: rng.gen_range(-3.0..3.0) }
                        } else {
                            random_gate(&mut rng, n)
                        };
                        hybrid.apply_unitary(&g).unwrap();
                        naive.unitary(&g);
                    }
                }
                let diff = max_abs_diff(&hybrid.to_full_matrix(), &naive.to_hybrid_layout());
                assert!(diff < 1e-12, "trial {trial}: {diff}");
                assert!((hybrid.total_trace() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn controlled_error_commutes_with_disjoint_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let mut a = HybridState::plus_state(3).unwrap();
            for _ in 0..5 {
                a.apply_unitary(&random_gate(&mut rng, 3)).unwrap();
            }
            a.attach_fluctuator(FluctuatorId(0), rng.gen_range(0.0..1.0)).unwrap();
            let mut b = a.clone();
            let g = QubitGate::Rzz { qubits: [1, 2], angle: rng.gen_range(-3.0..3.0) };
            a.apply_controlled_error(FluctuatorId(0), 0, &ErrorOp::Y).unwrap();
            a.apply_unitary(&g).unwrap();
            b.apply_unitary(&g).unwrap();
            b.apply_controlled_error(FluctuatorId(0), 0, &ErrorOp::Y).unwrap();
            assert!(max_abs_diff(&a.to_full_matrix(), &b.to_full_matrix()) < 1e-13);
        }
    }

    fn purity(rho: &[Complex64], dim: usize) -> f64 {
        let mut acc = Complex64::default();
        for i in 0..dim {
            for j in 0..dim {
                acc += rho[i * dim + j] * rho[j * dim + i];
            }
        }
        acc.re
    }

    #[test]
    fn purity_does_not_increase_under_mixing() {
        // the transition acts only on the classical bit, so the reduced qubit
        // state, and with it its purity, is untouched
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..30 {
            let mut s = HybridState::plus_state(2).unwrap();
            for _ in 0..4 {
                s.apply_unitary(&random_gate(&mut rng, 2)).unwrap();
            }
            let f = FluctuatorId(0);
            let p = rng.gen_range(0.0..1.0);
            s.attach_fluctuator(f, p).unwrap();
            s.apply_controlled_error(f, rng.gen_range(0..2), &ErrorOp::Y).unwrap();
            let before = purity(&s.reduced_density_matrix(), 4);
            let t = FluctuatorChain::new(p, rng.gen_range(0.0..0.99)).unwrap().transition_matrix();
            s.apply_classical_transition(f, &t).unwrap();
            s.trace_out_fluctuator(f).unwrap();
            let after = purity(s.block(0), 4);
            assert!(after <= before + 1e-12, "{after} > {before}");
            assert!(after <= 1.0 + 1e-12);
        }
    }
}
