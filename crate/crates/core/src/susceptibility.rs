//! First-order response of the noisy landscape to the error rate `p` at `p = 0`.
//!
//! At `p = 0` only two kinds of realizations have a nonzero probability
//! derivative: the all-zero realization and realizations in which exactly one
//! chain carries one run of consecutive excitations. A run of length `l` on a
//! chain contributes `(1 - kappa)^h kappa^(l - 1)`, where `h` counts the run's
//! ends that do not touch the chain boundary.

use rayon::prelude::*;
use serde::Serialize;

use crate::ansatz::{AnsatzCircuit, Params};
use crate::error::{Error, Result};
use crate::executor::{Landscape, NoiseModel, Slot, SlotGrid};
use crate::markov::{all_zero_derivative, boundary_transitions, single_run_derivative};
use crate::sk::SkInstance;

/// One run of excitations on one chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainMember {
    pub chain: usize,
    pub start: usize,
    pub length: usize,
    /// Number of `0 <-> 1` transitions along the chain.
    pub boundary: u32,
    pub slots: Vec<Slot>,
}

impl ChainMember {
    /// `(d p_b / d p)` at `p = 0`.
    pub fn weight(&self, kappa: f64, chain_length: usize) -> f64 {
        single_run_derivative(kappa, chain_length, self.start, self.length)
    }
}

/// All single-run realizations with run length `length`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainRealizationSet {
    pub length: usize,
    pub members: Vec<ChainMember>,
}

/// Single-run realizations grouped by run length `1..=L_max`, where `L_max` is
/// the longest chain of the grid.
pub fn chain_sets(grid: &SlotGrid) -> Vec<ChainRealizationSet> {
    let max_len = grid.chains().iter().map(Vec::len).max().unwrap_or(0);
    (1..=max_len)
        .map(|length| {
            let members = grid
                .chains()
                .iter()
                .enumerate()
                .flat_map(|(c, chain)| {
                    (0..(chain.len() + 1).saturating_sub(length)).map(move |start| ChainMember {
                        chain: c,
                        start,
                        length,
                        boundary: boundary_transitions(chain.len(), start, length),
                        slots: chain[start..start + length].to_vec(),
                    })
                })
                .collect();
            ChainRealizationSet { length, members }
        })
        .collect()
}

/// Coefficient of `<H>_0` in the susceptibility: minus the derivative of the
/// all-zero probability, summed over independent chains.
pub fn zero_coefficient(grid: &SlotGrid, kappa: f64) -> f64 {
    grid.chains().iter().map(|c| -all_zero_derivative(kappa, c.len())).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthContribution {
    pub length: usize,
    /// `|B_l|`.
    pub count: usize,
    /// Boundary-weighted chain average `<H>^(l)`.
    pub average: f64,
    /// `|B_l| kappa^(l-1) <H>^(l)`.
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Susceptibility {
    pub chi: f64,
    pub kappa: f64,
    pub noiseless_value: f64,
    pub zero_coefficient: f64,
    pub per_length: Vec<LengthContribution>,
}

/// Exact susceptibility of `landscape` at `params`, by enumerating every
/// single-run realization of its slot grid. The landscape's `p` is ignored.
pub fn chi_exact_for(landscape: &Landscape, params: &Params) -> Result<Susceptibility> {
    let kappa = landscape.model().kappa;
    let grid = landscape.grid();
    let h0 = landscape.evaluate_noiseless(params)?;
    let mut per_length = Vec::new();
    let mut chi = 0.0;
    for set in chain_sets(grid) {
        let kpow = crate::markov::pow_exact(kappa, set.length as u32 - 1);
        let terms: Vec<f64> = set
            .members
            .par_iter()
            .map(|member| {
                let boundary_weight = crate::markov::pow_exact(1.0 - kappa, member.boundary);
                if boundary_weight * kpow == 0.0 {
                    return Ok(0.0);
                }
                Ok(boundary_weight * landscape.evaluate_realization(params, &member.slots)?)
            })
            .collect::<Result<_>>()?;
        let count = set.members.len();
        let average = terms.iter().sum::<f64>() / count as f64;
        let contribution = count as f64 * kpow * average;
        chi += contribution;
        per_length.push(LengthContribution {
            length: set.length,
            count,
            average,
            contribution,
        });
    }
    let zero = zero_coefficient(grid, kappa);
    chi -= zero * h0;
    Ok(Susceptibility {
        chi,
        kappa,
        noiseless_value: h0,
        zero_coefficient: zero,
        per_length,
    })
}

pub fn chi_exact(instance: &SkInstance, circuit: &AnsatzCircuit, params: &Params, model: &NoiseModel) -> Result<Susceptibility> {
    chi_exact_for(&Landscape::new(instance, circuit, model)?, params)
}

/// Richardson-extrapolated one-sided difference of the landscape in `p` at 0:
/// `2 D(h/2) - D(h)` with `D(h) = (C(h) - C(0)) / h`.
pub fn chi_finite_difference_for(landscape: &Landscape, params: &Params, h: f64) -> Result<f64> {
    if !(h > 0.0 && h <= 1e-3) {
        return Err(Error::InvalidStep(h));
    }
    let c0 = landscape.with_p(0.0)?.evaluate(params)?;
    let d = |step: f64| -> Result<f64> { Ok((landscape.with_p(step)?.evaluate(params)? - c0) / step) };
    Ok(2.0 * d(h / 2.0)? - d(h)?)
}

pub fn chi_finite_difference(instance: &SkInstance, circuit: &AnsatzCircuit, params: &Params, model: &NoiseModel, h: f64) -> Result<f64> {
    chi_finite_difference_for(&Landscape::new(instance, circuit, model)?, params, h)
}

/// `AR(0) + p chi / C*`.
pub fn linearized_ar(ar_at_zero: f64, chi: f64, c_star: f64, p: f64) -> Result<f64> {
    if c_star == 0.0 {
        return Err(Error::ZeroOptimum);
    }
    Ok(ar_at_zero + p * chi / c_star)
}
