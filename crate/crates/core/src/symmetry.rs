//! Parameter transformations that leave noiseless and Pauli-noise landscapes
//! invariant, plus checkers that measure the residual.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::Params;
use crate::error::{Error, Result};

/// Cycle indices `k` are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "k", rename_all = "kebab-case")]
pub enum SymmetryGenerator {
    /// `gamma_k += 2 pi`
    GammaShift(usize),
    /// `beta_k += pi`
    BetaShift(usize),
    /// `beta_k -> -beta_k`, `gamma_k += pi`, `gamma_{k+1} += pi` (only `gamma_r` when `k = r`)
    BetaNegateGammaShift(usize),
    /// every angle negated
    GlobalNegate,
}

impl SymmetryGenerator {
    /// Every generator for depth `r`.
    pub fn all(r: usize) -> Vec<Self> {
        let mut out = Vec::with_capacity(3 * r + 1);
        for k in 1..=r {
            out.extend([Self::GammaShift(k), Self::BetaShift(k), Self::BetaNegateGammaShift(k)]);
        }
        out.push(Self::GlobalNegate);
        out
    }

    fn cycle(&self) -> Option<usize> {
        match *self {
            Self::GammaShift(k) | Self::BetaShift(k) | Self::BetaNegateGammaShift(k) => Some(k),
            Self::GlobalNegate => None,
        }
    }
}

impl fmt::Display for SymmetryGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::GammaShift(k) => write!(f, "gamma-shift-2pi({k})"),
            Self::BetaShift(k) => write!(f, "beta-shift-pi({k})"),
            Self::BetaNegateGammaShift(k) => write!(f, "beta-negate-gamma-shift({k})"),
            Self::GlobalNegate => write!(f, "global-negate"),
        }
    }
}

pub fn apply_generator(params: &Params, generator: SymmetryGenerator) -> Result<Params> {
    let r = params.depth();
    if let Some(k) = generator.cycle() {
        if k == 0 || k > r {
            return Err(Error::InvalidGenerator { k, r });
        }
    }
    let mut out = params.clone();
    match generator {
        SymmetryGenerator::GammaShift(k) => out.gammas[k - 1] += 2.0 * PI,
        SymmetryGenerator::BetaShift(k) => out.betas[k - 1] += PI,
        SymmetryGenerator::BetaNegateGammaShift(k) => {
            out.betas[k - 1] = -out.betas[k - 1];
            out.gammas[k - 1] += PI;
            if k < r {
                out.gammas[k] += PI;
            }
        }
        SymmetryGenerator::GlobalNegate => {
            for v in out.betas.iter_mut().chain(out.gammas.iter_mut()) {
                *v = -*v;
            }
        }
    }
    Ok(out)
}

/// Applies `word` left to right.
pub fn apply_word(params: &Params, word: &[SymmetryGenerator]) -> Result<Params> {
    word.iter().try_fold(params.clone(), |p, &g| apply_generator(&p, g))
}

/// A uniformly drawn word of length `1..=max_len` over the generators of depth `r`.
pub fn random_word<R: Rng + ?Sized>(r: usize, max_len: usize, rng: &mut R) -> Vec<SymmetryGenerator> {
    let gens = SymmetryGenerator::all(r);
    let len = rng.gen_range(1..=max_len.max(1));
    (0..len).map(|_| gens[rng.gen_range(0..gens.len())]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub word: Vec<SymmetryGenerator>,
    pub original: f64,
    pub transformed: f64,
    pub residual: f64,
    pub tol: f64,
    pub passed: bool,
}

impl InvarianceReport {
    pub fn label(&self) -> String {
        self.word.iter().map(ToString::to_string).collect::<Vec<_>>().join(" * ")
    }
}

pub fn check_word<F>(landscape: F, params: &Params, word: &[SymmetryGenerator], tol: f64) -> Result<InvarianceReport>
where
    F: Fn(&Params) -> Result<f64>,
{
    let transformed_params = apply_word(params, word)?;
    let original = landscape(params)?;
    let transformed = landscape(&transformed_params)?;
    let residual = (original - transformed).abs();
    Ok(InvarianceReport {
        word: word.to_vec(),
        original,
        transformed,
        residual,
        tol,
        passed: residual <= tol,
    })
}

pub fn check_invariance<F>(landscape: F, params: &Params, generator: SymmetryGenerator, tol: f64) -> Result<InvarianceReport>
where
    F: Fn(&Params) -> Result<f64>,
{
    check_word(landscape, params, &[generator], tol)
}
