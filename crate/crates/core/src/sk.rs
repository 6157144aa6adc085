//! Sherrington–Kirkpatrick instances and their diagonal cost operator.
//!
//! Spins are `z_i = +1` for bit value 0 and `-1` for bit value 1; qubit 0 is
//! the most significant bit of a basis index.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest instance the exhaustive search accepts.
pub const MAX_BRUTE_FORCE_QUBITS: usize = 24;

/// Complete graph with `+1/-1` edge weights, stored row-major over `i < j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SkInstance {
    n: usize,
    weights: Vec<i8>,
}

impl SkInstance {
    pub fn new(n: usize, weights: Vec<i8>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInstance(format!("need at least 2 spins, got {n}")));
        }
        if weights.len() != n * (n - 1) / 2 {
            return Err(Error::InvalidInstance(format!(
                "{} weights for {n} spins, expected {}",
                weights.len(),
                n * (n - 1) / 2
            )));
        }
        if let Some(w) = weights.iter().find(|&&w| w != 1 && w != -1) {
            return Err(Error::InvalidInstance(format!("weight {w} is not +1 or -1")));
        }
        Ok(Self { n, weights })
    }

    /// Parses a string of `+`/`-` signs, optionally prefixed by `w=`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = text.trim();
        for prefix in ["w=", "ω=", "omega="] {
            if let Some(rest) = s.strip_prefix(prefix) {
                s = rest;
                break;
            }
        }
        let s = s.trim_start_matches('=');
        let weights = s
            .chars()
            .map(|c| match c {
                '+' => Ok(1),
                '-' | '−' => Ok(-1),
                _ => Err(Error::InvalidInstance(format!("unexpected character {c:?}"))),
            })
            .collect::<Result<Vec<i8>>>()?;
        let len = weights.len();
        let n = (2..=64).find(|n| n * (n - 1) / 2 >= len).unwrap_or(0);
        if n * (n - 1) / 2 != len {
            return Err(Error::InvalidInstance(format!(
                "{len} signs is not n(n-1)/2 for any integer n >= 2"
            )));
        }
        Self::new(n, weights)
    }

    /// Uniformly random signs.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        let len = n * n.saturating_sub(1) / 2;
        Self::new(n, (0..len).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect())
    }

    pub fn num_spins(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &[i8] {
        &self.weights
    }

    /// `w_ij` for `i != j`, symmetric.
    pub fn weight(&self, i: usize, j: usize) -> i8 {
        assert!(i != j && i < self.n && j < self.n);
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.weights[a * self.n - a * (a + 1) / 2 + (b - a - 1)]
    }

    /// `C(z) = sum_{i<j} w_ij z_i z_j` for `z_i` in `{+1, -1}`.
    pub fn cost(&self, z: &[i8]) -> Result<i64> {
        if z.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: z.len(),
            });
        }
        if z.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidInstance("spins must be +1 or -1".into()));
        }
        Ok(self.cost_unchecked(|i| z[i]))
    }

    fn cost_unchecked(&self, spin: impl Fn(usize) -> i8) -> i64 {
        let mut k = 0;
        let mut total = 0i64;
        for i in 0..self.n {
            for j in i + 1..self.n {
                total += (self.weights[k] * spin(i) * spin(j)) as i64;
                k += 1;
            }
        }
        total
    }

    /// Spin assignment of a basis index.
    pub fn spins_of(&self, index: usize) -> Vec<i8> {
        (0..self.n).map(|q| spin_of(index, self.n, q)).collect()
    }

    /// Exhaustive minimum of `C` and every assignment attaining it.
    pub fn brute_force_optimum(&self) -> Result<BruteForce> {
        if self.n > MAX_BRUTE_FORCE_QUBITS {
            return Err(Error::TooManyQubits {
                n: self.n,
                max: MAX_BRUTE_FORCE_QUBITS,
            });
        }
        let mut best = i64::MAX;
        let mut minimizers = Vec::new();
        for index in 0..1usize << self.n {
            let c = self.cost_unchecked(|q| spin_of(index, self.n, q));
            if c < best {
                best = c;
                minimizers.clear();
            }
            if c == best {
                minimizers.push(self.spins_of(index));
            }
        }
        Ok(BruteForce {
            c_star: best,
            minimizers,
        })
    }
}

impl fmt::Display for SkInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &w in &self.weights {
            f.write_str(if w > 0 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

impl TryFrom<String> for SkInstance {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        Self::parse(&s)
    }
}

impl From<SkInstance> for String {
    fn from(inst: SkInstance) -> String {
        inst.to_string()
    }
}

#[inline]
fn spin_of(index: usize, n: usize, qubit: usize) -> i8 {
    if (index >> (n - 1 - qubit)) & 1 == 0 {
        1
    } else {
        -1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BruteForce {
    pub c_star: i64,
    pub minimizers: Vec<Vec<i8>>,
}

/// Diagonal of the cost operator over the `2^n` computational basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalHamiltonian {
    n: usize,
    diag: Vec<f64>,
}

impl DiagonalHamiltonian {
    /// Cost operator as seen on the physical register whose position `pos`
    /// holds logical spin `permutation[pos]`.
    pub fn new(instance: &SkInstance, permutation: &[usize]) -> Result<Self> {
        let n = instance.num_spins();
        check_permutation(permutation, n)?;
        let diag = (0..1usize << n)
            .map(|index| {
                let mut total = 0i64;
                for a in 0..n {
                    for b in a + 1..n {
                        let w = instance.weight(permutation[a], permutation[b]);
                        total += (w * spin_of(index, n, a) * spin_of(index, n, b)) as i64;
                    }
                }
                total as f64
            })
            .collect();
        Ok(Self { n, diag })
    }

    pub fn identity_order(instance: &SkInstance) -> Self {
        let id: Vec<usize> = (0..instance.num_spins()).collect();
        Self::new(instance, &id).expect("identity permutation")
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }
}

pub(crate) fn check_permutation(permutation: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if permutation.len() != n {
        return Err(Error::InvalidPermutation(permutation.to_vec()));
    }
    for &x in permutation {
        if x >= n || seen[x] {
            return Err(Error::InvalidPermutation(permutation.to_vec()));
        }
        seen[x] = true;
    }
    Ok(())
}

/// The instance used for the quantitative single-instance results.
pub const TYPICAL_INSTANCE: &str = "+-++-+-++-----+";
