//! In-place gate kernels on dense row-major density matrices and state vectors.

use num_complex::Complex64;

use crate::gate::{zz_phases, GateMatrix, Mat2, Mat4, QubitGate};

#[inline]
pub(crate) fn mask(n: usize, qubit: usize) -> usize {
    1 << (n - 1 - qubit)
}

/// Phases of a diagonal gate over all basis states, or `None` if the gate is not diagonal.
fn diagonal_phases(n: usize, gate: &QubitGate) -> Option<Vec<Complex64>> {
    let dim = 1usize << n;
    match *gate {
        QubitGate::Rz { qubit, angle } => {
            let m = mask(n, qubit);
            let (up, down) = (Complex64::from_polar(1.0, -angle / 2.0), Complex64::from_polar(1.0, angle / 2.0));
            Some((0..dim).map(|z| if z & m == 0 { up } else { down }).collect())
        }
        QubitGate::Rzz { qubits: [a, b], angle } | QubitGate::RzzSwap { qubits: [a, b], angle } => {
            let (ma, mb) = (mask(n, a), mask(n, b));
            let ph = zz_phases(angle);
            Some((0..dim).map(|z| ph[2 * (z & ma != 0) as usize + (z & mb != 0) as usize]).collect())
        }
        _ => None,
    }
}

/// Basis permutation `z -> swap of bits a and b`.
#[inline]
fn swap_bits(z: usize, ma: usize, mb: usize) -> usize {
    if (z & ma == 0) != (z & mb == 0) {
        z ^ ma ^ mb
    } else {
        z
    }
}

/// Precomputed form of a gate, reused across the blocks of a hybrid state.
pub(crate) enum Prepared {
    Diagonal { d: Vec<Complex64>, dc: Vec<Complex64> },
    Permuted { d: Option<Vec<Complex64>>, ma: usize, mb: usize },
    /// Conjugation by X, Y or Z: a signed permutation.
    Pauli { m: usize, flip: bool, sign: bool },
    One { m: usize, u: Mat2 },
    Two { ma: usize, mb: usize, u: Mat4 },
}

impl Prepared {
    pub(crate) fn new(n: usize, gate: &QubitGate) -> Self {
        match *gate {
            QubitGate::Rz { .. } | QubitGate::Rzz { .. } => {
                let d = diagonal_phases(n, gate).expect("diagonal gate");
                let dc = d.iter().map(|x| x.conj()).collect();
                Prepared::Diagonal { d, dc }
            }
            QubitGate::Swap { qubits: [a, b] } => Prepared::Permuted { d: None, ma: mask(n, a), mb: mask(n, b) },
            QubitGate::RzzSwap { qubits: [a, b], .. } => Prepared::Permuted {
                d: diagonal_phases(n, gate),
                ma: mask(n, a),
                mb: mask(n, b),
            },
            QubitGate::X(q) => Prepared::Pauli { m: mask(n, q), flip: true, sign: false },
            QubitGate::Y(q) => Prepared::Pauli { m: mask(n, q), flip: true, sign: true },
            QubitGate::Z(q) => Prepared::Pauli { m: mask(n, q), flip: false, sign: true },
            QubitGate::Unitary2 { qubits: [a, b], matrix } => Prepared::Two { ma: mask(n, a), mb: mask(n, b), u: matrix },
            QubitGate::Rx { qubit, .. } | QubitGate::Ry { qubit, .. } | QubitGate::Unitary1 { qubit, .. } => {
                let GateMatrix::One(u) = gate.matrix() else { unreachable!() };
                Prepared::One { m: mask(n, qubit), u }
            }
        }
    }

    /// `rho -> U rho U^dagger` on one `dim x dim` block.
    pub(crate) fn conjugate(&self, rho: &mut [Complex64], dim: usize, scratch: &mut [Complex64]) {
        match self {
            Prepared::Diagonal { d, dc } => {
                for (i, row) in rho.chunks_exact_mut(dim).enumerate() {
                    let di = d[i];
                    for (x, &c) in row.iter_mut().zip(dc) {
                        *x *= di * c;
                    }
                }
            }
            Prepared::Permuted { d, ma, mb } => {
                scratch.copy_from_slice(rho);
                for (i, row) in rho.chunks_exact_mut(dim).enumerate() {
                    let pi = swap_bits(i, *ma, *mb);
                    let src = &scratch[pi * dim..(pi + 1) * dim];
                    match d {
                        None => {
                            for (j, x) in row.iter_mut().enumerate() {
                                *x = src[swap_bits(j, *ma, *mb)];
                            }
                        }
                        Some(d) => {
                            let di = d[pi];
                            for (j, x) in row.iter_mut().enumerate() {
                                let pj = swap_bits(j, *ma, *mb);
                                *x = di * d[pj].conj() * src[pj];
                            }
                        }
                    }
                }
            }
            Prepared::Pauli { m, flip, sign } => {
                let m = *m;
                if *flip {
                    for i in 0..dim {
                        if i & m != 0 {
                            continue;
                        }
                        let (top, bottom) = rho.split_at_mut((i | m) * dim);
                        let r0 = &mut top[i * dim..(i + 1) * dim];
                        let r1 = &mut bottom[..dim];
                        for j in 0..dim {
                            if j & m != 0 {
                                continue;
                            }
                            let jm = j | m;
                            // (i, j) <-> (i^m, j^m) and (i, j^m) <-> (i^m, j)
                            std::mem::swap(&mut r0[j], &mut r1[jm]);
                            std::mem::swap(&mut r0[jm], &mut r1[j]);
                            if *sign {
                                r0[jm] = -r0[jm];
                                r1[j] = -r1[j];
                            }
                        }
                    }
                } else {
                    for (i, row) in rho.chunks_exact_mut(dim).enumerate() {
                        let bi = i & m;
                        for (j, x) in row.iter_mut().enumerate() {
                            if (j & m) != bi {
                                *x = -*x;
                            }
                        }
                    }
                }
            }
            Prepared::One { m, u } => {
                let m = *m;
                for i in 0..dim {
                    if i & m != 0 {
                        continue;
                    }
                    let (top, bottom) = rho.split_at_mut((i | m) * dim);
                    let r0 = &mut top[i * dim..(i + 1) * dim];
                    let r1 = &mut bottom[..dim];
                    for (a, b) in r0.iter_mut().zip(r1.iter_mut()) {
                        let (x, y) = (*a, *b);
                        *a = u[0][0] * x + u[0][1] * y;
                        *b = u[1][0] * x + u[1][1] * y;
                    }
                }
                let uc = [[u[0][0].conj(), u[0][1].conj()], [u[1][0].conj(), u[1][1].conj()]];
                for row in rho.chunks_exact_mut(dim) {
                    for j in 0..dim {
                        if j & m != 0 {
                            continue;
                        }
                        let (x, y) = (row[j], row[j | m]);
                        row[j] = x * uc[0][0] + y * uc[0][1];
                        row[j | m] = x * uc[1][0] + y * uc[1][1];
                    }
                }
            }
            Prepared::Two { ma, mb, u } => {
                let (ma, mb) = (*ma, *mb);
                let offsets = [0, mb, ma, ma | mb];
                for i in 0..dim {
                    if i & (ma | mb) != 0 {
                        continue;
                    }
                    for j in 0..dim {
                        let v: [Complex64; 4] = std::array::from_fn(|k| rho[(i | offsets[k]) * dim + j]);
                        for (r, off) in offsets.iter().enumerate() {
                            rho[(i | off) * dim + j] = (0..4).map(|k| u[r][k] * v[k]).sum();
                        }
                    }
                }
                for row in rho.chunks_exact_mut(dim) {
                    for j in 0..dim {
                        if j & (ma | mb) != 0 {
                            continue;
                        }
                        let v: [Complex64; 4] = std::array::from_fn(|k| row[j | offsets[k]]);
                        for (r, off) in offsets.iter().enumerate() {
                            row[j | off] = (0..4).map(|k| v[k] * u[r][k].conj()).sum();
                        }
                    }
                }
            }
        }
    }

    /// `psi -> U psi`.
    pub(crate) fn apply_vector(&self, psi: &mut [Complex64]) {
        let dim = psi.len();
        match self {
            Prepared::Diagonal { d, .. } => {
                for (x, &di) in psi.iter_mut().zip(d) {
                    *x *= di;
                }
            }
            Prepared::Permuted { d, ma, mb } => {
                for z in 0..dim {
                    let pz = swap_bits(z, *ma, *mb);
                    if pz > z {
                        psi.swap(z, pz);
                    }
                }
                if let Some(d) = d {
                    // SWAP then RZZ: RZZ is symmetric under the swap
                    for (x, &di) in psi.iter_mut().zip(d) {
                        *x *= di;
                    }
                }
            }
            Prepared::Pauli { m, flip, sign } => {
                let m = *m;
                let i = Complex64::new(0.0, 1.0);
                for z in 0..dim {
                    if z & m != 0 {
                        continue;
                    }
                    let (a, b) = (psi[z], psi[z | m]);
                    let (na, nb) = match (flip, sign) {
                        (true, false) => (b, a),
                        (true, true) => (-i * b, i * a),
                        (false, _) => (a, -b),
                    };
                    psi[z] = na;
                    psi[z | m] = nb;
                }
            }
            Prepared::One { m, u } => {
                let m = *m;
                for z in 0..dim {
                    if z & m != 0 {
                        continue;
                    }
                    let (a, b) = (psi[z], psi[z | m]);
                    psi[z] = u[0][0] * a + u[0][1] * b;
                    psi[z | m] = u[1][0] * a + u[1][1] * b;
                }
            }
            Prepared::Two { ma, mb, u } => {
                let offsets = [0, *mb, *ma, *ma | *mb];
                for z in 0..dim {
                    if z & (ma | mb) != 0 {
                        continue;
                    }
                    let v: [Complex64; 4] = std::array::from_fn(|k| psi[z | offsets[k]]);
                    for (r, off) in offsets.iter().enumerate() {
                        psi[z | off] = (0..4).map(|k| u[r][k] * v[k]).sum();
                    }
                }
            }
        }
    }
}
