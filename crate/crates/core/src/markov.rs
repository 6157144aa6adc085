//! Exact mathematics of a single classical binary fluctuator.
//!
//! The fluctuator is a two-state, discrete-time Markov chain. Its ensemble is
//! `s0 = (1 - p, p)`; at every step the state is kept with probability
//! `kappa` and reset to `s0` otherwise. Matrices are stored column-stochastic:
//! `t[b][a]` is the probability of moving from value `a` to value `b`.

use rand::Rng;

use crate::error::{check_probability, Error, Result};

/// Realizations longer than this are never enumerated.
pub const MAX_ENUMERATION_LENGTH: usize = 20;

/// 2x2 column-stochastic matrix, indexed `[to][from]`.
pub type Stochastic2 = [[f64; 2]; 2];

/// A binary fluctuator with excitation probability `p` and retention probability `kappa`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluctuatorChain {
    p: f64,
    kappa: f64,
}

impl FluctuatorChain {
    pub fn new(p: f64, kappa: f64) -> Result<Self> {
        Ok(Self {
            p: check_probability("p", p)?,
            kappa: check_probability("kappa", kappa)?,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// The steady-state ensemble `(1 - p, p)`.
    pub fn steady_state(&self) -> [f64; 2] {
        [1.0 - self.p, self.p]
    }

    pub fn transition_matrix(&self) -> Stochastic2 {
        let (p, k) = (self.p, self.kappa);
        [
            [k + (1.0 - k) * (1.0 - p), (1.0 - k) * (1.0 - p)],
            [(1.0 - k) * p, k + (1.0 - k) * p],
        ]
    }

    /// Closed form of the `t`-th matrix power of the transition matrix.
    pub fn transition_power(&self, t: u32) -> Stochastic2 {
        let (p, kt) = (self.p, pow_exact(self.kappa, t));
        [
            [1.0 - p + p * kt, (1.0 - p) * (1.0 - kt)],
            [p * (1.0 - kt), p + kt - p * kt],
        ]
    }

    pub fn correlation_time(&self) -> f64 {
        correlation_time(self.kappa)
    }

    /// Connected autocorrelation `E(B_t B_{t+dt}) - E(B_t) E(B_{t+dt})` in the steady state.
    pub fn correlator(&self, dt: i64) -> f64 {
        let t = self.transition_power(dt.unsigned_abs() as u32);
        // P(b_t = 1) * P(b_{t+dt} = 1 | b_t = 1) - p^2
        self.p * t[1][1] - self.p * self.p
    }

    /// Probability of observing `bits` as consecutive fluctuator values.
    pub fn realization_probability(&self, bits: &Realization) -> f64 {
        let t = self.transition_matrix();
        let b = bits.bits();
        let mut prob = self.steady_state()[b[0] as usize];
        for w in b.windows(2) {
            prob *= t[w[1] as usize][w[0] as usize];
        }
        prob
    }

    /// `P(b_t = 1)` over all realizations of the given length, by exact enumeration.
    pub fn marginal_excitation(&self, length: usize, t: usize) -> Result<f64> {
        if t >= length {
            return Err(Error::IndexOutOfRange { index: t, length });
        }
        Ok(enumerate(length)?
            .filter(|b| b.bits()[t])
            .map(|b| self.realization_probability(&b))
            .sum())
    }

    /// Draws `b_0` from the steady state and evolves it with the transition matrix.
    pub fn sample_realization<R: Rng + ?Sized>(&self, length: usize, rng: &mut R) -> Realization {
        assert!(length >= 1, "realizations have at least one bit");
        let t = self.transition_matrix();
        let mut bits = Vec::with_capacity(length);
        let mut current = rng.gen::<f64>() < self.p;
        bits.push(current);
        for _ in 1..length {
            current = rng.gen::<f64>() < t[1][current as usize];
            bits.push(current);
        }
        Realization(bits)
    }
}

/// `-1 / ln(kappa)`, continuously extended to 0 at `kappa = 0` and infinity at `kappa = 1`.
///
/// Returns NaN outside `[0, 1]`.
pub fn correlation_time(kappa: f64) -> f64 {
    if !(0.0..=1.0).contains(&kappa) {
        f64::NAN
    } else if kappa == 0.0 {
        0.0
    } else if kappa == 1.0 {
        f64::INFINITY
    } else {
        -1.0 / kappa.ln()
    }
}

/// A bitstring of fluctuator values `b_0 .. b_{L-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Realization(Vec<bool>);

impl Realization {
    pub fn new(bits: Vec<bool>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::LengthMismatch { expected: 1, actual: 0 });
        }
        Ok(Self(bits))
    }

    /// Bit `t` of the realization is bit `t` of `mask`.
    pub fn from_mask(mask: u64, length: usize) -> Self {
        assert!((1..=64).contains(&length));
        Self((0..length).map(|t| (mask >> t) & 1 == 1).collect())
    }

    /// Parses a string of `0`/`1` characters, first character is `b_0`.
    pub fn parse(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::InvalidConfig(format!("bad realization character {c:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(bits)
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn weight(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
}

/// All `2^length` realizations in mask order.
pub fn enumerate(length: usize) -> Result<impl Iterator<Item = Realization>> {
    if length == 0 || length > MAX_ENUMERATION_LENGTH {
        return Err(Error::EnumerationTooLarge {
            length,
            cap: MAX_ENUMERATION_LENGTH,
        });
    }
    Ok((0..1u64 << length).map(move |mask| Realization::from_mask(mask, length)))
}

/// `d p_b / d p` at `p = 0` for a realization of length `m + 1`.
///
/// Only the all-zero realization and realizations with a single run of
/// excitations `0^i 1^l 0^k` have a nonzero derivative.
pub fn realization_prob_derivative_at_zero(kappa: f64, m: usize, bits: &Realization) -> Result<f64> {
    check_probability("kappa", kappa)?;
    let length = m + 1;
    if bits.len() != length {
        return Err(Error::LengthMismatch {
            expected: length,
            actual: bits.len(),
        });
    }
    let b = bits.bits();
    let Some(start) = b.iter().position(|&x| x) else {
        return Ok(all_zero_derivative(kappa, length));
    };
    let run = b[start..].iter().take_while(|&&x| x).count();
    if b[start + run..].iter().any(|&x| x) {
        return Ok(0.0);
    }
    Ok(single_run_derivative(kappa, length, start, run))
}

/// Derivative at `p = 0` of the probability of `0^start 1^run 0^rest` in a chain of `length` slots.
pub fn single_run_derivative(kappa: f64, length: usize, start: usize, run: usize) -> f64 {
    debug_assert!(run >= 1 && start + run <= length);
    let boundaries = boundary_transitions(length, start, run);
    pow_exact(1.0 - kappa, boundaries) * pow_exact(kappa, run as u32 - 1)
}

/// Number of `0 <-> 1` transitions of `0^start 1^run 0^rest` (0, 1 or 2).
pub fn boundary_transitions(length: usize, start: usize, run: usize) -> u32 {
    (start > 0) as u32 + (start + run < length) as u32
}

/// Derivative at `p = 0` of the all-zero realization's probability: `-[(L - 1)(1 - kappa) + 1]`.
pub fn all_zero_derivative(kappa: f64, length: usize) -> f64 {
    -((length as f64 - 1.0) * (1.0 - kappa) + 1.0)
}

/// `x^n` with `0^0 = 1`, exact for the edge cases `x = 0` and `x = 1`.
pub(crate) fn pow_exact(x: f64, n: u32) -> f64 {
    if n == 0 {
        1.0
    } else {
        x.powi(n as i32)
    }
}
