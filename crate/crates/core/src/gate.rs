//! Gates acting on the qubit register.
//!
//! Qubit 0 is the most significant bit of a basis-state index. Rotations
//! follow `R_P(a) = exp(-i a P / 2)`.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Mat2 = [[Complex64; 2]; 2];
pub type Mat4 = [[Complex64; 4]; 4];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq)]
pub enum QubitGate {
    Rx { qubit: usize, angle: f64 },
    Ry { qubit: usize, angle: f64 },
    Rz { qubit: usize, angle: f64 },
    Rzz { qubits: [usize; 2], angle: f64 },
    Swap { qubits: [usize; 2] },
    /// `RZZ(angle) * SWAP`, the SWAP-network interaction.
    RzzSwap { qubits: [usize; 2], angle: f64 },
    X(usize),
    Y(usize),
    Z(usize),
    Unitary1 { qubit: usize, matrix: Mat2 },
    Unitary2 { qubits: [usize; 2], matrix: Mat4 },
}

impl QubitGate {
    pub fn targets(&self) -> Vec<usize> {
        use QubitGate::*;
        match *self {
            Rx { qubit, .. } | Ry { qubit, .. } | Rz { qubit, .. } | Unitary1 { qubit, .. } => vec![qubit],
            X(q) | Y(q) | Z(q) => vec![q],
            Rzz { qubits, .. } | Swap { qubits } | RzzSwap { qubits, .. } | Unitary2 { qubits, .. } => {
                qubits.to_vec()
            }
        }
    }

    pub(crate) fn check_targets(&self, n: usize) -> Result<()> {
        let targets = self.targets();
        if let Some(&q) = targets.iter().find(|&&q| q >= n) {
            return Err(Error::QubitOutOfRange { qubit: q, n });
        }
        if targets.len() == 2 && targets[0] == targets[1] {
            return Err(Error::RepeatedTarget(targets));
        }
        Ok(())
    }

    /// The gate's matrix on its own targets (first target is the high bit).
    pub fn matrix(&self) -> GateMatrix {
        use QubitGate::*;
        match *self {
            Rx { angle, .. } => GateMatrix::One(rx(angle)),
            Ry { angle, .. } => GateMatrix::One(ry(angle)),
            Rz { angle, .. } => GateMatrix::One(rz(angle)),
            X(_) => GateMatrix::One(pauli_x()),
            Y(_) => GateMatrix::One(pauli_y()),
            Z(_) => GateMatrix::One(pauli_z()),
            Unitary1 { matrix, .. } => GateMatrix::One(matrix),
            Rzz { angle, .. } => GateMatrix::Two(diag4(zz_phases(angle))),
            Swap { .. } => GateMatrix::Two(swap4()),
            RzzSwap { angle, .. } => GateMatrix::Two(matmul4(&diag4(zz_phases(angle)), &swap4())),
            Unitary2 { matrix, .. } => GateMatrix::Two(matrix),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateMatrix {
    One(Mat2),
    Two(Mat4),
}

/// Single-qubit operator applied by an excited fluctuator.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub enum ErrorOp {
    I,
    X,
    #[default]
    Y,
    Z,
    Unitary(#[serde(with = "mat2_serde")] Mat2),
}

impl ErrorOp {
    /// The gate realizing this error on `qubit`; `None` for the identity.
    pub fn on(&self, qubit: usize) -> Option<QubitGate> {
        match *self {
            ErrorOp::I => None,
            ErrorOp::X => Some(QubitGate::X(qubit)),
            ErrorOp::Y => Some(QubitGate::Y(qubit)),
            ErrorOp::Z => Some(QubitGate::Z(qubit)),
            ErrorOp::Unitary(matrix) => Some(QubitGate::Unitary1 { qubit, matrix }),
        }
    }

    pub fn matrix(&self) -> Mat2 {
        match *self {
            ErrorOp::I => [[ONE, ZERO], [ZERO, ONE]],
            ErrorOp::X => pauli_x(),
            ErrorOp::Y => pauli_y(),
            ErrorOp::Z => pauli_z(),
            ErrorOp::Unitary(m) => m,
        }
    }

    pub fn is_pauli(&self) -> bool {
        !matches!(self, ErrorOp::Unitary(_))
    }

    /// `I`, `X`, `Y`, `Z`, or a rotation such as `ry(0.3)`.
    pub fn parse(s: &str) -> Result<Self> {
        let unknown = || Error::InvalidConfig(format!("unknown error operator {s:?}"));
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "i" => return Ok(ErrorOp::I),
            "x" => return Ok(ErrorOp::X),
            "y" => return Ok(ErrorOp::Y),
            "z" => return Ok(ErrorOp::Z),
            _ => {}
        }
        let (name, rest) = t.split_at(t.find('(').ok_or_else(unknown)?);
        let angle: f64 = rest
            .strip_prefix('(')
            .and_then(|r| r.strip_suffix(')'))
            .and_then(|a| a.trim().parse().ok())
            .ok_or_else(unknown)?;
        let matrix = match name.trim() {
            "rx" => rx(angle),
            "ry" => ry(angle),
            "rz" => rz(angle),
            _ => return Err(unknown()),
        };
        Ok(ErrorOp::Unitary(matrix))
    }
}

mod mat2_serde {
    use super::Mat2;
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Mat2, s: S) -> Result<S::Ok, S::Error> {
        let flat: Vec<[f64; 2]> = m.iter().flatten().map(|c| [c.re, c.im]).collect();
        flat.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat2, D::Error> {
        let flat: Vec<[f64; 2]> = Vec::deserialize(d)?;
        if flat.len() != 4 {
            return Err(serde::de::Error::custom("expected 4 complex entries"));
        }
        let c = |k: usize| Complex64::new(flat[k][0], flat[k][1]);
        Ok([[c(0), c(1)], [c(2), c(3)]])
    }
}

pub fn rx(angle: f64) -> Mat2 {
    let (s, c) = (angle / 2.0).sin_cos();
    [[Complex64::new(c, 0.0), Complex64::new(0.0, -s)], [Complex64::new(0.0, -s), Complex64::new(c, 0.0)]]
}

pub fn ry(angle: f64) -> Mat2 {
    let (s, c) = (angle / 2.0).sin_cos();
    [[Complex64::new(c, 0.0), Complex64::new(-s, 0.0)], [Complex64::new(s, 0.0), Complex64::new(c, 0.0)]]
}

pub fn rz(angle: f64) -> Mat2 {
    [[Complex64::from_polar(1.0, -angle / 2.0), ZERO], [ZERO, Complex64::from_polar(1.0, angle / 2.0)]]
}

pub fn pauli_x() -> Mat2 {
    [[ZERO, ONE], [ONE, ZERO]]
}

pub fn pauli_y() -> Mat2 {
    [[ZERO, -I], [I, ZERO]]
}

pub fn pauli_z() -> Mat2 {
    [[ONE, ZERO], [ZERO, -ONE]]
}

/// Diagonal of `RZZ(angle)` over `|00>, |01>, |10>, |11>`.
pub(crate) fn zz_phases(angle: f64) -> [Complex64; 4] {
    let same = Complex64::from_polar(1.0, -angle / 2.0);
    let diff = Complex64::from_polar(1.0, angle / 2.0);
    [same, diff, diff, same]
}

fn diag4(d: [Complex64; 4]) -> Mat4 {
    let mut m = [[ZERO; 4]; 4];
    for k in 0..4 {
        m[k][k] = d[k];
    }
    m
}

fn swap4() -> Mat4 {
    let mut m = [[ZERO; 4]; 4];
    m[0][0] = ONE;
    m[1][2] = ONE;
    m[2][1] = ONE;
    m[3][3] = ONE;
    m
}

fn matmul4(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut c = [[ZERO; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            c[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}
