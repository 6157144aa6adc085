//! Basin hopping over the QAOA angles and the approximation-ratio metrics.
//!
//! Each restart draws its starting point, hop perturbations and Metropolis
//! coins from a ChaCha stream keyed by `(seed, restart, hop)`, so the result
//! does not depend on how restarts are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{AnsatzCircuit, Params};
use crate::error::{Error, Result};
use crate::executor::{Landscape, NoiseMode, NoiseModel};
use crate::sk::SkInstance;

/// A function of `dim` real variables to minimize.
pub trait Objective: Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> Result<f64>;

    /// Value and gradient. The default uses central differences with `step`.
    fn value_and_gradient(&self, x: &[f64], step: f64) -> Result<(f64, Vec<f64>)> {
        Ok((self.value(x)?, central_difference(self, x, step)?))
    }
}

pub fn central_difference<O: Objective + ?Sized>(objective: &O, x: &[f64], step: f64) -> Result<Vec<f64>> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + step;
            let up = objective.value(&probe)?;
            probe[i] = x[i] - step;
            let down = objective.value(&probe)?;
            probe[i] = x[i];
            Ok((up - down) / (2.0 * step))
        })
        .collect()
}

/// Wraps a closure as an [`Objective`] with numerical gradients.
pub struct FnObjective<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnObjective<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Objective for FnObjective<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok((self.f)(x))
    }
}

/// Flat layout `[beta_1..beta_r, gamma_1..gamma_r]`.
impl Objective for Landscape {
    fn dim(&self) -> usize {
        self.num_params()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.evaluate(&Params::from_flat(x)?)
    }

    fn value_and_gradient(&self, x: &[f64], _step: f64) -> Result<(f64, Vec<f64>)> {
        self.evaluate_with_gradient(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalMethod {
    #[default]
    Bfgs,
    NelderMead,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMethod {
    /// The objective's own gradient (adjoint for landscapes).
    #[default]
    Exact,
    CentralDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalConfig {
    pub method: LocalMethod,
    pub gradient: GradientMethod,
    /// Relative decrease in `f` below which the minimizer stops.
    pub tol: f64,
    /// Max-norm of the gradient below which BFGS stops.
    pub gtol: f64,
    pub max_iter: usize,
    pub fd_step: f64,
}

impl Default for LocalConfig {
    fn default() -> Self {
        Self {
            method: LocalMethod::Bfgs,
            gradient: GradientMethod::Exact,
            tol: 1e-8,
            gtol: 1e-6,
            max_iter: 500,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub hops: usize,
    pub hop_step: f64,
    pub hop_temperature: f64,
    pub init_halfwidth: f64,
    pub local: LocalConfig,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 32,
            hops: 4,
            hop_step: 0.5,
            hop_temperature: 1.0,
            init_halfwidth: 0.5e-3,
            local: LocalConfig::default(),
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.restarts == 0 {
            return bad("restarts must be at least 1");
        }
        if !(self.hop_step > 0.0 && self.init_halfwidth > 0.0) {
            return bad("hop_step and init_halfwidth must be positive");
        }
        if !(self.hop_temperature > 0.0) {
            return bad("hop_temperature must be positive");
        }
        let l = &self.local;
        if !(l.tol > 0.0 && l.gtol > 0.0 && l.fd_step > 0.0) || l.max_iter == 0 {
            return bad("local tolerances, fd_step and max_iter must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopRecord {
    pub hop: usize,
    pub value: f64,
    pub accepted: bool,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartResult {
    pub seed: u64,
    pub restart: usize,
    pub params: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub initial_value: f64,
    pub hops: Vec<HopRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub best_params: Params,
    pub best_value: f64,
    pub per_restart: Vec<RestartResult>,
}

impl OptimizationResult {
    pub fn converged_restarts(&self) -> usize {
        self.per_restart.iter().filter(|r| r.converged).count()
    }
}

struct Counter<'a, O: ?Sized> {
    objective: &'a O,
    config: &'a LocalConfig,
    evaluations: usize,
}

impl<O: Objective + ?Sized> Counter<'_, O> {
    fn value(&mut self, x: &[f64]) -> Result<f64> {
        self.evaluations += 1;
        Ok(finite_or_inf(self.objective.value(x)?))
    }

    fn value_and_gradient(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.evaluations += 1;
        let (f, g) = match self.config.gradient {
            GradientMethod::Exact => self.objective.value_and_gradient(x, self.config.fd_step)?,
            GradientMethod::CentralDifference => (
                self.objective.value(x)?,
                central_difference(self.objective, x, self.config.fd_step)?,
            ),
        };
        Ok((finite_or_inf(f), g))
    }
}

fn finite_or_inf(f: f64) -> f64 {
    if f.is_nan() {
        f64::INFINITY
    } else {
        f
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn axpy(x: &[f64], a: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(xi, di)| xi + a * di).collect()
}

struct Point {
    alpha: f64,
    f: f64,
    g: Vec<f64>,
    slope: f64,
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;

/// Strong-Wolfe line search along `d` from `x`.
fn wolfe_search<O: Objective + ?Sized>(
    counter: &mut Counter<'_, O>,
    x: &[f64],
    f0: f64,
    slope0: f64,
    d: &[f64],
    alpha0: f64,
) -> Result<Option<Point>> {
    let probe = |counter: &mut Counter<'_, O>, alpha: f64| -> Result<Point> {
        let (f, g) = counter.value_and_gradient(&axpy(x, alpha, d))?;
        let slope = dot(&g, d);
        Ok(Point { alpha, f, g, slope })
    };
    let mut prev = Point {
        alpha: 0.0,
        f: f0,
        g: Vec::new(),
        slope: slope0,
    };
    let mut alpha = alpha0;
    for i in 0..30 {
        let cur = probe(counter, alpha)?;
        if cur.f > f0 + C1 * alpha * slope0 || (i > 0 && cur.f >= prev.f) {
            return zoom(counter, &probe, f0, slope0, prev, cur);
        }
        if cur.slope.abs() <= -C2 * slope0 {
            return Ok(Some(cur));
        }
        if cur.slope >= 0.0 {
            return zoom(counter, &probe, f0, slope0, cur, prev);
        }
        alpha *= 2.0;
        prev = cur;
    }
    Ok(None)
}

fn zoom<O: Objective + ?Sized>(
    counter: &mut Counter<'_, O>,
    probe: &dyn Fn(&mut Counter<'_, O>, f64) -> Result<Point>,
    f0: f64,
    slope0: f64,
    mut lo: Point,
    mut hi: Point,
) -> Result<Option<Point>> {
    for _ in 0..40 {
        let width = hi.alpha - lo.alpha;
        if width.abs() <= 1e-14 * lo.alpha.abs().max(1e-10) {
            break;
        }
        let alpha = interpolate(&lo, &hi).unwrap_or(lo.alpha + 0.5 * width);
        let cur = probe(counter, alpha)?;
        if cur.f > f0 + C1 * alpha * slope0 || cur.f >= lo.f {
            hi = cur;
        } else {
            if cur.slope.abs() <= -C2 * slope0 {
                return Ok(Some(cur));
            }
            if cur.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = std::mem::replace(&mut lo, cur);
            } else {
                lo = cur;
            }
        }
    }
    Ok((lo.alpha > 0.0 && lo.f < f0).then_some(lo))
}

/// Safeguarded cubic minimizer between two bracketing points.
fn interpolate(a: &Point, b: &Point) -> Option<f64> {
    if !(a.f.is_finite() && b.f.is_finite()) {
        return None;
    }
    let d1 = a.slope + b.slope - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.slope * b.slope;
    if disc < 0.0 {
        return None;
    }
    let d2 = (b.alpha - a.alpha).signum() * disc.sqrt();
    let denom = b.slope - a.slope + 2.0 * d2;
    if denom == 0.0 {
        return None;
    }
    let alpha = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / denom;
    let (left, right) = (a.alpha.min(b.alpha), a.alpha.max(b.alpha));
    let margin = 0.1 * (right - left);
    (alpha.is_finite() && alpha > left + margin && alpha < right - margin).then_some(alpha)
}

/// Quasi-Newton minimization with an inverse-Hessian BFGS update.
pub fn bfgs<O: Objective + ?Sized>(objective: &O, x0: &[f64], config: &LocalConfig) -> Result<LocalResult> {
    let n = x0.len();
    let mut counter = Counter {
        objective,
        config,
        evaluations: 0,
    };
    let identity = |h: &mut Vec<f64>| {
        h.iter_mut().for_each(|v| *v = 0.0);
        (0..n).for_each(|i| h[i * n + i] = 1.0);
    };
    let mut h = vec![0.0; n * n];
    identity(&mut h);
    let mut fresh = true;
    let mut x = x0.to_vec();
    let (mut f, mut g) = counter.value_and_gradient(&x)?;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iter {
        if max_abs(&g) <= config.gtol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut d: Vec<f64> = (0..n).map(|i| -dot(&h[i * n..(i + 1) * n], &g)).collect();
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            identity(&mut h);
            fresh = true;
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }
        let alpha0 = if fresh { (1.0 / max_abs(&d)).min(1.0) } else { 1.0 };
        let step = match wolfe_search(&mut counter, &x, f, slope, &d, alpha0)? {
            Some(p) => p,
            None if !fresh => {
                identity(&mut h);
                fresh = true;
                continue;
            }
            None => break,
        };
        let s: Vec<f64> = d.iter().map(|v| step.alpha * v).collect();
        let y: Vec<f64> = step.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let f_old = f;
        x = axpy(&x, 1.0, &s);
        f = step.f;
        g = step.g;
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if fresh {
                let scale = sy / dot(&y, &y);
                h.iter_mut().for_each(|v| *v *= scale);
                fresh = false;
            }
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
        if f_old - f <= config.tol * f_old.abs().max(f.abs()).max(1.0) {
            converged = true;
            break;
        }
    }
    Ok(LocalResult {
        x,
        value: f,
        converged,
        iterations,
        evaluations: counter.evaluations,
    })
}

/// Derivative-free simplex minimization.
pub fn nelder_mead<O: Objective + ?Sized>(objective: &O, x0: &[f64], config: &LocalConfig) -> Result<LocalResult> {
    let n = x0.len();
    let mut counter = Counter {
        objective,
        config,
        evaluations: 0,
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), counter.value(x0)?));
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += 0.1;
        let f = counter.value(&v)?;
        simplex.push((v, f));
    }
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[n].1);
        let spread_x = simplex[1..]
            .iter()
            .flat_map(|(v, _)| v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if worst - best <= config.tol * best.abs().max(1.0) && spread_x <= 1e-6 {
            converged = true;
            break;
        }
        iterations += 1;
        let mut centroid = vec![0.0; n];
        for (v, _) in &simplex[..n] {
            for (c, vi) in centroid.iter_mut().zip(v) {
                *c += vi / n as f64;
            }
        }
        let toward = |t: f64, w: &[f64]| -> Vec<f64> { centroid.iter().zip(w).map(|(c, wi)| c + t * (wi - c)).collect() };
        let reflected = toward(-1.0, &simplex[n].0);
        let fr = counter.value(&reflected)?;
        if fr < simplex[0].1 {
            let expanded = toward(-2.0, &simplex[n].0);
            let fe = counter.value(&expanded)?;
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
            continue;
        }
        let (contracted, fc) = if fr < simplex[n].1 {
            let c = toward(-0.5, &simplex[n].0);
            let f = counter.value(&c)?;
            (c, f)
        } else {
            let c = toward(0.5, &simplex[n].0);
            let f = counter.value(&c)?;
            (c, f)
        };
        if fc < fr.min(simplex[n].1) {
            simplex[n] = (contracted, fc);
            continue;
        }
        let anchor = simplex[0].0.clone();
        for (v, f) in simplex.iter_mut().skip(1) {
            *v = anchor.iter().zip(v.iter()).map(|(a, vi)| a + 0.5 * (vi - a)).collect();
            *f = counter.value(v)?;
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    Ok(LocalResult {
        x,
        value,
        converged,
        iterations,
        evaluations: counter.evaluations,
    })
}

/// Configured local minimizer. BFGS hands over to the simplex method if its
/// line search stalls before convergence.
pub fn local_minimize<O: Objective + ?Sized>(objective: &O, x0: &[f64], config: &LocalConfig) -> Result<LocalResult> {
    match config.method {
        LocalMethod::NelderMead => nelder_mead(objective, x0, config),
        LocalMethod::Bfgs => {
            let first = bfgs(objective, x0, config)?;
            if first.converged {
                return Ok(first);
            }
            let mut second = nelder_mead(objective, &first.x, config)?;
            second.iterations += first.iterations;
            second.evaluations += first.evaluations;
            Ok(if second.value <= first.value { second } else { LocalResult { converged: false, ..first } })
        }
    }
}

fn stream_rng(seed: u64, restart: usize, hop: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng.set_word_pos((hop as u128) << 32);
    rng
}

fn run_restart<O: Objective + ?Sized>(objective: &O, config: &OptimizerConfig, restart: usize) -> Result<RestartResult> {
    let dim = objective.dim();
    let w = config.init_halfwidth;
    let mut rng = stream_rng(config.seed, restart, 0);
    let x0: Vec<f64> = (0..dim).map(|_| rng.gen_range(-w..w)).collect();
    let mut current = local_minimize(objective, &x0, &config.local)?;
    let initial_value = current.value;
    let mut best = current.clone();
    let mut hops = Vec::with_capacity(config.hops);
    for hop in 1..=config.hops {
        let mut rng = stream_rng(config.seed, restart, hop);
        let s = config.hop_step;
        let trial: Vec<f64> = current.x.iter().map(|v| v + rng.gen_range(-s..=s)).collect();
        let found = local_minimize(objective, &trial, &config.local)?;
        let coin: f64 = rng.gen();
        let accepted = found.value < current.value || coin < (-(found.value - current.value) / config.hop_temperature).exp();
        hops.push(HopRecord {
            hop,
            value: found.value,
            accepted,
            converged: found.converged,
        });
        if found.value < best.value {
            best = found.clone();
        }
        if accepted {
            current = found;
        }
    }
    Ok(RestartResult {
        seed: config.seed,
        restart,
        params: best.x,
        value: best.value,
        converged: best.converged,
        initial_value,
        hops,
    })
}

/// Independent basin-hopping restarts; the best final value wins, ties going
/// to the lowest restart index.
pub fn basin_hop<O: Objective + ?Sized>(objective: &O, config: &OptimizerConfig) -> Result<OptimizationResult> {
    config.validate()?;
    if !objective.dim().is_multiple_of(2) {
        return Err(Error::ParamLength {
            expected: objective.dim() + 1,
            actual: objective.dim(),
        });
    }
    let per_restart: Vec<RestartResult> = (0..config.restarts)
        .into_par_iter()
        .map(|k| run_restart(objective, config, k))
        .collect::<Result<_>>()?;
    let best = per_restart
        .iter()
        .reduce(|a, b| if b.value < a.value { b } else { a })
        .expect("at least one restart");
    Ok(OptimizationResult {
        best_params: Params::from_flat(&best.params)?,
        best_value: best.value,
        per_restart,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub ar: f64,
    pub ar0: f64,
    pub dar: f64,
}

/// Approximation ratios for a minimization problem: `AR = c_opt / C*`.
pub fn metrics(c_opt: f64, c_unaware: f64, c_star: f64) -> Result<Metrics> {
    if c_star == 0.0 {
        return Err(Error::ZeroOptimum);
    }
    let ar = c_opt / c_star;
    let ar0 = c_unaware / c_star;
    Ok(Metrics { ar, ar0, dar: ar - ar0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyRun {
    pub optimization: OptimizationResult,
    /// Noisy landscape at the noise-aware optimum.
    pub c_tilde: f64,
    /// Noisy landscape at the noiseless optimum.
    pub c_unaware: f64,
    pub metrics: Metrics,
}

/// Optimizes `landscape` and compares it with the noiseless optimum
/// `noiseless`. A noiseless or zero-rate landscape reuses that optimum.
pub fn optimize_noisy(landscape: &Landscape, noiseless: &OptimizationResult, c_star: f64, config: &OptimizerConfig) -> Result<NoisyRun> {
    let model = landscape.model();
    let optimization = if model.mode == NoiseMode::None || model.p == 0.0 {
        noiseless.clone()
    } else {
        basin_hop(landscape, config)?
    };
    let c_tilde = landscape.evaluate(&optimization.best_params)?;
    let c_unaware = landscape.evaluate(&noiseless.best_params)?;
    Ok(NoisyRun {
        metrics: metrics(c_tilde, c_unaware, c_star)?,
        optimization,
        c_tilde,
        c_unaware,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaoaRun {
    pub c_star: i64,
    pub noiseless: OptimizationResult,
    pub noisy: NoisyRun,
}

/// Full pipeline for one instance and noise model.
pub fn run_qaoa(instance: &SkInstance, r: usize, model: &NoiseModel, config: &OptimizerConfig) -> Result<QaoaRun> {
    let circuit = AnsatzCircuit::build(instance, r)?;
    let c_star = instance.brute_force_optimum()?.c_star;
    let clean = Landscape::new(instance, &circuit, &NoiseModel::noiseless())?;
    let noiseless = basin_hop(&clean, config)?;
    let landscape = Landscape::new(instance, &circuit, model)?;
    let noisy = optimize_noisy(&landscape, &noiseless, c_star as f64, config)?;
    Ok(QaoaRun { c_star, noiseless, noisy })
}
