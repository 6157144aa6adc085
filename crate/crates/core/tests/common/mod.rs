//! Oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use corrqaoa::ansatz::Params;
use corrqaoa::executor::{Landscape, Slot};
use corrqaoa::sk::SkInstance;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// `<psi|H|psi>` for `prod_k exp(-i beta_k B / 2) exp(-i gamma_k H / 2) |+>^n`
/// with dense matrices, `B = sum_i X_i`, and the exponential of `B` taken
/// numerically.
pub fn direct_ansatz_value(instance: &SkInstance, params: &Params) -> f64 {
    let n = instance.num_spins();
    let dim = 1usize << n;
    let cost: Vec<f64> = (0..dim)
        .map(|b| {
            let z: Vec<i8> = (0..n).map(|i| if (b >> i) & 1 == 0 { 1 } else { -1 }).collect();
            instance.cost(&z).unwrap() as f64
        })
        .collect();
    let mut mixer = DMatrix::<Complex64>::zeros(dim, dim);
    for b in 0..dim {
        for i in 0..n {
            mixer[(b ^ (1 << i), b)] += Complex64::new(1.0, 0.0);
        }
    }
    let amp = 1.0 / (dim as f64).sqrt();
    let mut psi = DVector::from_element(dim, Complex64::new(amp, 0.0));
    for (&beta, &gamma) in params.betas.iter().zip(&params.gammas) {
        for (b, c) in cost.iter().enumerate() {
            psi[b] *= Complex64::from_polar(1.0, -gamma * c / 2.0);
        }
        let u = (mixer.clone() * Complex64::new(0.0, -beta / 2.0)).exp();
        psi = u * psi;
    }
    psi.iter().zip(&cost).map(|(a, c)| a.norm_sqr() * c).sum()
}

/// `p_b` for one chain, from the initial distribution `(1-p, p)` and the
/// transition `T(b'|b) = kappa [b' = b] + (1 - kappa) s0(b')`.
pub fn chain_probability(p: f64, kappa: f64, bits: &[bool]) -> f64 {
    let s0 = |b: bool| if b { p } else { 1.0 - p };
    let mut prob = s0(bits[0]);
    for w in bits.windows(2) {
        prob *= kappa * if w[0] == w[1] { 1.0 } else { 0.0 } + (1.0 - kappa) * s0(w[1]);
    }
    prob
}

/// `sum_b p_b <H>_b` over every realization of the landscape's slot grid,
/// plus the total probability.
pub fn realization_mixture(landscape: &Landscape, params: &Params) -> (f64, f64) {
    let model = landscape.model();
    let chains = landscape.grid().chains();
    let slots: Vec<Slot> = chains.iter().flatten().copied().collect();
    assert!(slots.len() <= 22, "enumeration too large");
    let mut value = 0.0;
    let mut total = 0.0;
    for mask in 0u64..(1 << slots.len()) {
        let mut prob = 1.0;
        let mut offset = 0;
        for chain in chains {
            let bits: Vec<bool> = (0..chain.len()).map(|k| (mask >> (offset + k)) & 1 == 1).collect();
            prob *= chain_probability(model.p, model.kappa, &bits);
            offset += chain.len();
        }
        total += prob;
        if prob == 0.0 {
            continue;
        }
        let excited: Vec<Slot> = (0..slots.len()).filter(|&k| (mask >> k) & 1 == 1).map(|k| slots[k]).collect();
        value += prob * landscape.evaluate_realization(params, &excited).unwrap();
    }
    (value, total)
}
