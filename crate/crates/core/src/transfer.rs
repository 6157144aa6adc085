//! Fast landscape engine in the real Pauli-transfer representation.
//!
//! A density matrix is stored through its Pauli coefficients
//! `r_P = tr(rho P)`. Every operation of the noisy SWAP-network circuit with a
//! Pauli error commutes with conjugation by `X` on all qubits, and so does the
//! initial state, so only strings with an even number of `Z`/`Y` factors are
//! kept. Gates become planar rotations of coefficient pairs, Pauli errors
//! become sign flips and fluctuator transitions stay classical mixing of blocks.
//!
//! The engine also provides the exact gradient by reverse-mode accumulation.

use crate::ansatz::{AnsatzCircuit, LayerKind};
use crate::executor::{NoiseMode, NoiseModel, SlotGrid};
use crate::gate::ErrorOp;
use crate::markov::Stochastic2;
use crate::sk::SkInstance;

const NONE: u32 = u32::MAX;

/// Pauli strings `i^{x.z} X^x Z^z`, qubit `q` on bit `q` of `x` and `z`.
#[derive(Debug, Clone)]
struct Basis {
    n: usize,
    keys: Vec<u32>,
    index: Vec<u32>,
}

impl Basis {
    fn new(n: usize) -> Self {
        let mut index = vec![NONE; 1 << (2 * n)];
        let mut keys = Vec::new();
        for key in 0..1u32 << (2 * n) {
            if (key >> n).count_ones().is_multiple_of(2) {
                index[key as usize] = keys.len() as u32;
                keys.push(key);
            }
        }
        Self { n, keys, index }
    }

    fn len(&self) -> usize {
        self.keys.len()
    }

    fn split(&self, key: u32) -> (u32, u32) {
        (key & ((1 << self.n) - 1), key >> self.n)
    }

    fn commutes(&self, a: u32, b: u32) -> bool {
        let ((xa, za), (xb, zb)) = (self.split(a), self.split(b));
        ((xa & zb).count_ones() + (za & xb).count_ones()) % 2 == 0
    }

    /// `P_a P_b = i^e P_{a xor b}`, returns `e mod 4`.
    fn product_phase(&self, a: u32, b: u32) -> u32 {
        let ((xa, za), (xb, zb)) = (self.split(a), self.split(b));
        let (x, z) = (xa ^ xb, za ^ zb);
        let e = (xa & za).count_ones() + (xb & zb).count_ones() + 2 * (za & xb).count_ones() + 4 * self.n as u32
            - (x & z).count_ones();
        e % 4
    }

    fn key_x(&self, q: usize) -> u32 {
        1 << q
    }

    fn key_z(&self, q: usize) -> u32 {
        1 << (q + self.n)
    }

    fn key_y(&self, q: usize) -> u32 {
        self.key_x(q) | self.key_z(q)
    }

    fn swap_key(&self, key: u32, a: usize, b: usize) -> u32 {
        let mut out = key;
        for shift in [0, self.n] {
            let (ba, bb) = ((key >> (a + shift)) & 1, (key >> (b + shift)) & 1);
            if ba != bb {
                out ^= (1 << (a + shift)) | (1 << (b + shift));
            }
        }
        out
    }
}

/// Conjugation by `exp(-i theta G / 2)`: each anticommuting pair `(i, j, s)`
/// rotates as `r_i <- c r_i + s sn r_j`, `r_j <- c r_j - s sn r_i`.
#[derive(Debug, Clone)]
struct Rotation {
    pairs: Vec<(u32, u32, f64)>,
}

impl Rotation {
    fn new(basis: &Basis, generator: u32) -> Self {
        let mut pairs = Vec::new();
        for (j, &key) in basis.keys.iter().enumerate() {
            if basis.commutes(generator, key) {
                continue;
            }
            let i = basis.index[(generator ^ key) as usize] as usize;
            if i < j {
                continue;
            }
            // -i G P_j = i^{e-1} P_i with e - 1 even
            let e = basis.product_phase(generator, key);
            let s = if (e + 3).is_multiple_of(4) { 1.0 } else { -1.0 };
            pairs.push((i as u32, j as u32, s));
        }
        pairs.sort_by_key(|p| p.0);
        Self { pairs }
    }

    /// Rotates every configuration column at once; `r` is label-major with
    /// `nb` entries per label.
    #[inline]
    fn apply(&self, r: &mut [f64], nb: usize, c: f64, sn: f64) {
        if nb == 1 {
            for &(i, j, s) in &self.pairs {
                let (x, y) = (r[i as usize], r[j as usize]);
                r[i as usize] = c * x + s * sn * y;
                r[j as usize] = c * y - s * sn * x;
            }
            return;
        }
        for &(i, j, s) in &self.pairs {
            let (ri, rj) = two_rows(r, i as usize, j as usize, nb);
            let ss = s * sn;
            for (a, b) in ri.iter_mut().zip(rj.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = c * x + ss * y;
                *b = c * y - ss * x;
            }
        }
    }

    /// `lambda . K r` with `K = dR/dtheta R^T` the generator of the rotation.
    #[inline]
    fn generator_dot(&self, lambda: &[f64], r: &[f64], nb: usize) -> f64 {
        let mut acc = 0.0;
        for &(i, j, s) in &self.pairs {
            let (i, j) = (i as usize * nb, j as usize * nb);
            let (li, lj) = (&lambda[i..i + nb], &lambda[j..j + nb]);
            let (ri, rj) = (&r[i..i + nb], &r[j..j + nb]);
            let mut part = 0.0;
            for k in 0..nb {
                part += li[k] * rj[k] - lj[k] * ri[k];
            }
            acc += s * part;
        }
        acc
    }
}

/// Disjoint mutable rows `i != j` of a label-major buffer.
#[inline]
fn two_rows(r: &mut [f64], i: usize, j: usize, nb: usize) -> (&mut [f64], &mut [f64]) {
    if i < j {
        let (lo, hi) = r.split_at_mut(j * nb);
        (&mut lo[i * nb..(i + 1) * nb], &mut hi[..nb])
    } else {
        let (lo, hi) = r.split_at_mut(i * nb);
        let (rj, ri) = (&mut lo[j * nb..(j + 1) * nb], &mut hi[..nb]);
        (ri, rj)
    }
}

/// Applies the row involution `i <-> perm[i]` in place.
#[inline]
fn swap_rows(r: &mut [f64], perm: &[u32], nb: usize) {
    if nb == 1 {
        for (i, &p) in perm.iter().enumerate() {
            if i < p as usize {
                r.swap(i, p as usize);
            }
        }
        return;
    }
    for (i, &p) in perm.iter().enumerate() {
        let p = p as usize;
        if i < p {
            let (a, b) = two_rows(r, i, p, nb);
            a.swap_with_slice(b);
        }
    }
}

/// Applies `f` to the halves of every configuration pair differing in `bit`:
/// `lo[k]` has the bit clear and `hi[k]` set.
#[inline]
fn for_each_half(row: &mut [f64], bit: usize, mut f: impl FnMut(&mut [f64], &mut [f64])) {
    let step = 1 << bit;
    for chunk in row.chunks_exact_mut(2 * step) {
        let (lo, hi) = chunk.split_at_mut(step);
        f(lo, hi);
    }
}

#[derive(Debug, Clone)]
enum GateOp {
    /// `RZZ(theta) SWAP` on positions `(a, a + 1)` with `theta = weight * params[param]`.
    Entangle { pair: usize, weight: f64, param: usize },
    Mixer { qubit: usize, param: usize },
}

/// Transition (unless `first`) then error on `qubit`, conditioned on `bit`.
#[derive(Debug, Clone, Copy)]
struct SlotOp {
    bit: usize,
    qubit: usize,
    first: bool,
}

#[derive(Debug, Clone)]
enum StepNoise {
    None,
    /// Events on fluctuators that stay attached.
    Slots(Vec<SlotOp>),
    /// A fresh fluctuator attached, walked over the slots and traced out.
    Chain(Vec<SlotOp>),
}

#[derive(Debug, Clone)]
struct Step {
    gates: Vec<GateOp>,
    noise: StepNoise,
}

/// A compiled (instance, circuit, model) ready for repeated evaluation.
#[derive(Debug, Clone)]
pub(crate) struct TransferProgram {
    len: usize,
    num_params: usize,
    initial_blocks: usize,
    initial: Vec<f64>,
    zz: Vec<Rotation>,
    swaps: Vec<Vec<u32>>,
    mixers: Vec<Rotation>,
    signs: Vec<Vec<f64>>,
    steps: Vec<Step>,
    observable: Vec<(u32, f64)>,
    p: f64,
    transition: Stochastic2,
}

impl TransferProgram {
    /// Returns `None` when the error is not a Pauli operator.
    pub(crate) fn compile(instance: &SkInstance, circuit: &AnsatzCircuit, model: &NoiseModel, grid: &SlotGrid) -> Option<Self> {
        let error = match model.error_op {
            ErrorOp::I | ErrorOp::X | ErrorOp::Y | ErrorOp::Z => model.error_op,
            ErrorOp::Unitary(_) => return None,
        };
        let n = circuit.num_qubits();
        let r = circuit.depth();
        let basis = Basis::new(n);
        let len = basis.len();

        let zz = (0..n.saturating_sub(1))
            .map(|a| Rotation::new(&basis, basis.key_z(a) | basis.key_z(a + 1)))
            .collect();
        let swaps = (0..n.saturating_sub(1))
            .map(|a| {
                basis
                    .keys
                    .iter()
                    .map(|&k| basis.index[basis.swap_key(k, a, a + 1) as usize])
                    .collect()
            })
            .collect();
        let mixers = (0..n).map(|q| Rotation::new(&basis, basis.key_x(q))).collect();
        let signs = (0..n)
            .map(|q| {
                let e = match error {
                    ErrorOp::X => Some(basis.key_x(q)),
                    ErrorOp::Y => Some(basis.key_y(q)),
                    ErrorOp::Z => Some(basis.key_z(q)),
                    _ => None,
                };
                basis
                    .keys
                    .iter()
                    .map(|&k| match e {
                        Some(e) if !basis.commutes(e, k) => -1.0,
                        _ => 1.0,
                    })
                    .collect()
            })
            .collect();

        let m = circuit.num_layers();
        let mut noise_at: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); m + 1];
        for (c, chain) in grid.chains().iter().enumerate() {
            for (k, s) in chain.iter().enumerate() {
                noise_at[s.time].push((c, k, s.qubit));
            }
        }
        let spatial = grid.mode() == NoiseMode::Spatial;
        let mut steps = Vec::with_capacity(m + 1);
        for (t, events) in noise_at.iter_mut().enumerate() {
            events.sort_by_key(|e| e.2);
            let gates = if t == 0 {
                Vec::new()
            } else {
                let layer = circuit.layer(t);
                match &layer.kind {
                    LayerKind::Entangling(gates) => gates
                        .iter()
                        .map(|g| GateOp::Entangle {
                            pair: g.positions[0],
                            weight: g.weight as f64,
                            param: r + layer.cycle,
                        })
                        .collect(),
                    LayerKind::Mixer => (0..n).map(|q| GateOp::Mixer { qubit: q, param: layer.cycle }).collect(),
                }
            };
            let ops: Vec<SlotOp> = events
                .iter()
                .map(|&(c, k, q)| SlotOp {
                    bit: if spatial { 0 } else { c },
                    qubit: q,
                    first: k == 0,
                })
                .collect();
            let noise = if ops.is_empty() {
                StepNoise::None
            } else if spatial {
                StepNoise::Chain(ops)
            } else {
                StepNoise::Slots(ops)
            };
            steps.push(Step { gates, noise });
        }

        let initial_blocks = if grid.mode() == NoiseMode::Temporal {
            1 << grid.chains().len()
        } else {
            1
        };
        let plus: Vec<f64> = basis
            .keys
            .iter()
            .map(|&k| if basis.split(k).1 == 0 { 1.0 } else { 0.0 })
            .collect();
        let mut initial = Vec::with_capacity(initial_blocks * len);
        let mut weights = Vec::with_capacity(initial_blocks);
        for c in 0..initial_blocks {
            let w: f64 = if initial_blocks > 1 {
                (0..grid.chains().len())
                    .map(|k| if c >> k & 1 == 1 { model.p } else { 1.0 - model.p })
                    .product()
            } else {
                1.0
            };
            weights.push(w);
        }
        for v in &plus {
            initial.extend(weights.iter().map(|w| v * w));
        }

        let perm = circuit.permutation();
        let mut observable = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                let key = basis.key_z(a) | basis.key_z(b);
                observable.push((basis.index[key as usize], instance.weight(perm[a], perm[b]) as f64));
            }
        }

        Some(Self {
            len,
            num_params: 2 * r,
            initial_blocks,
            initial,
            zz,
            swaps,
            mixers,
            signs,
            steps,
            observable,
            p: model.p,
            transition: model.chain().transition_matrix(),
        })
    }

    fn apply_gate(&self, gate: &GateOp, params: &[f64], state: &mut [f64]) {
        let nb = state.len() / self.len;
        match *gate {
            GateOp::Entangle { pair, weight, param } => {
                let (sn, c) = (weight * params[param]).sin_cos();
                swap_rows(state, &self.swaps[pair], nb);
                self.zz[pair].apply(state, nb, c, sn);
            }
            GateOp::Mixer { qubit, param } => {
                let (sn, c) = params[param].sin_cos();
                self.mixers[qubit].apply(state, nb, c, sn);
            }
        }
    }

    /// Transposed gate action on an adjoint vector.
    fn apply_gate_transpose(&self, gate: &GateOp, params: &[f64], lambda: &mut [f64]) {
        let nb = lambda.len() / self.len;
        match *gate {
            GateOp::Entangle { pair, weight, param } => {
                let (sn, c) = (-weight * params[param]).sin_cos();
                self.zz[pair].apply(lambda, nb, c, sn);
                swap_rows(lambda, &self.swaps[pair], nb);
            }
            GateOp::Mixer { qubit, param } => {
                let (sn, c) = (-params[param]).sin_cos();
                self.mixers[qubit].apply(lambda, nb, c, sn);
            }
        }
    }

    /// Derivative of `lambda . M r_before` in the gate's parameter, given the
    /// state `after` the gate's layer. Gates of one layer commute, so the
    /// generator can be moved to the end of the layer.
    fn gate_derivative(&self, gate: &GateOp, lambda: &[f64], after: &[f64]) -> (usize, f64) {
        let nb = after.len() / self.len;
        match *gate {
            GateOp::Entangle { pair, weight, param } => (param, weight * self.zz[pair].generator_dot(lambda, after, nb)),
            GateOp::Mixer { qubit, param } => (param, self.mixers[qubit].generator_dot(lambda, after, nb)),
        }
    }

    fn apply_step_noise(&self, step: &Step, state: &mut [f64]) {
        match &step.noise {
            StepNoise::None => {}
            StepNoise::Slots(ops) => self.apply_slots(ops, state),
            StepNoise::Chain(ops) => self.apply_chain(ops, state),
        }
    }

    fn apply_step_noise_transpose(&self, step: &Step, lambda: &mut [f64]) {
        match &step.noise {
            StepNoise::None => {}
            StepNoise::Slots(ops) => self.apply_slots_transpose(ops, lambda),
            StepNoise::Chain(ops) => self.apply_chain_transpose(ops, lambda),
        }
    }

    fn slot_matrix(&self, op: &SlotOp, sign: f64) -> [f64; 4] {
        let t = if op.first { [[1.0, 0.0], [0.0, 1.0]] } else { self.transition };
        [t[0][0], t[0][1], sign * t[1][0], sign * t[1][1]]
    }

    /// All slot events of a step in a single pass over the label rows.
    fn apply_slots(&self, ops: &[SlotOp], state: &mut [f64]) {
        let nb = state.len() / self.len;
        for (i, row) in state.chunks_exact_mut(nb).enumerate() {
            for op in ops {
                let s = self.signs[op.qubit][i];
                if op.first {
                    if s < 0.0 {
                        for_each_half(row, op.bit, |_, hi| hi.iter_mut().for_each(|x| *x = -*x));
                    }
                    continue;
                }
                let [t00, t01, t10, t11] = self.slot_matrix(op, s);
                for_each_half(row, op.bit, |lo, hi| {
                    for (x0, x1) in lo.iter_mut().zip(hi.iter_mut()) {
                        let (a, b) = (*x0, *x1);
                        *x0 = t00 * a + t01 * b;
                        *x1 = t10 * a + t11 * b;
                    }
                });
            }
        }
    }

    fn apply_slots_transpose(&self, ops: &[SlotOp], lambda: &mut [f64]) {
        let nb = lambda.len() / self.len;
        for (i, row) in lambda.chunks_exact_mut(nb).enumerate() {
            for op in ops.iter().rev() {
                let [t00, t01, t10, t11] = self.slot_matrix(op, self.signs[op.qubit][i]);
                for_each_half(row, op.bit, |lo, hi| {
                    for (x0, x1) in lo.iter_mut().zip(hi.iter_mut()) {
                        let (a, u) = (*x0, *x1);
                        *x0 = t00 * a + t10 * u;
                        *x1 = t01 * a + t11 * u;
                    }
                });
            }
        }
    }

    /// Attach, walk and trace out a fluctuator, one label at a time.
    fn apply_chain(&self, ops: &[SlotOp], state: &mut [f64]) {
        let nb = state.len() / self.len;
        for (i, row) in state.chunks_exact_mut(nb).enumerate() {
            for x in row.iter_mut() {
                let (mut a, mut b) = ((1.0 - self.p) * *x, self.p * *x);
                for op in ops {
                    let [t00, t01, t10, t11] = self.slot_matrix(op, self.signs[op.qubit][i]);
                    (a, b) = (t00 * a + t01 * b, t10 * a + t11 * b);
                }
                *x = a + b;
            }
        }
    }

    fn apply_chain_transpose(&self, ops: &[SlotOp], lambda: &mut [f64]) {
        let nb = lambda.len() / self.len;
        for (i, row) in lambda.chunks_exact_mut(nb).enumerate() {
            for x in row.iter_mut() {
                let (mut a, mut u) = (*x, *x);
                for op in ops.iter().rev() {
                    let [t00, t01, t10, t11] = self.slot_matrix(op, self.signs[op.qubit][i]);
                    (a, u) = (t00 * a + t10 * u, t01 * a + t11 * u);
                }
                *x = (1.0 - self.p) * a + self.p * u;
            }
        }
    }

    fn expectation(&self, state: &[f64]) -> f64 {
        let nb = state.len() / self.len;
        self.observable
            .iter()
            .map(|&(i, w)| w * state[i as usize * nb..(i as usize + 1) * nb].iter().sum::<f64>())
            .sum()
    }

    pub(crate) fn evaluate(&self, params: &[f64]) -> f64 {
        let mut state = self.initial.clone();
        for step in &self.steps {
            for g in &step.gates {
                self.apply_gate(g, params, &mut state);
            }
            self.apply_step_noise(step, &mut state);
        }
        self.expectation(&state)
    }

    /// Value and gradient with respect to the flat `[betas, gammas]` layout.
    pub(crate) fn evaluate_with_gradient(&self, params: &[f64]) -> (f64, Vec<f64>) {
        let mut state = self.initial.clone();
        let mut after_gates = Vec::with_capacity(self.steps.len());
        for step in &self.steps {
            for g in &step.gates {
                self.apply_gate(g, params, &mut state);
            }
            after_gates.push(if step.gates.is_empty() { Vec::new() } else { state.clone() });
            self.apply_step_noise(step, &mut state);
        }
        let value = self.expectation(&state);

        let nb = state.len() / self.len;
        let mut lambda = vec![0.0; state.len()];
        for &(i, w) in &self.observable {
            lambda[i as usize * nb..(i as usize + 1) * nb].fill(w);
        }
        let mut grad = vec![0.0; self.num_params];
        for (step, after) in self.steps.iter().zip(after_gates).rev() {
            self.apply_step_noise_transpose(step, &mut lambda);
            for g in step.gates.iter().rev() {
                let (k, d) = self.gate_derivative(g, &lambda, &after);
                grad[k] += d;
            }
            for g in step.gates.iter().rev() {
                self.apply_gate_transpose(g, params, &mut lambda);
            }
        }
        (value, grad)
    }

    /// Largest number of fluctuator configurations held at once.
    pub(crate) fn peak_blocks(&self) -> usize {
        let chained = self.steps.iter().any(|s| matches!(s.noise, StepNoise::Chain(_)));
        if chained {
            2 * self.initial_blocks
        } else {
            self.initial_blocks
        }
    }
}
