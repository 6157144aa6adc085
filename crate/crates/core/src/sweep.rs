//! Experiment sweeps over instances, noise models, `p` and `kappa`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::AnsatzCircuit;
use crate::error::{Error, Result};
use crate::executor::{Landscape, NoiseMode, NoiseModel, Schedule};
use crate::gate::ErrorOp;
use crate::optimizer::{basin_hop, optimize_noisy, OptimizationResult, OptimizerConfig};
use crate::plot::{line_plot, Series};
use crate::sk::SkInstance;
use crate::susceptibility::{chi_exact_for, linearized_ar};

pub const CSV_HEADER: &str = "instance,model,p,kappa,AR,AR0,dAR,chi,AR_lin,C_star,c_tilde,betas,gammas,seed,converged,wall_time_s";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
    /// Directory for SVG plots.
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub instances: Vec<SkInstance>,
    /// Optional check on every instance's spin count.
    pub n: Option<usize>,
    pub r: usize,
    pub models: Vec<NoiseMode>,
    pub p_values: Vec<f64>,
    pub kappa_values: Vec<f64>,
    pub error_op: ErrorOp,
    pub schedule: Schedule,
    pub include_boundary_slot: bool,
    pub optimizer: OptimizerConfig,
    pub outputs: Outputs,
    pub seed: u64,
    pub workers: Option<usize>,
    pub record_wall_time: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            instances: Vec::new(),
            n: None,
            r: 3,
            models: vec![NoiseMode::Temporal, NoiseMode::Spatial],
            p_values: vec![0.001, 0.01],
            kappa_values: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
            error_op: ErrorOp::Y,
            schedule: Schedule::ActiveGates,
            include_boundary_slot: false,
            optimizer: OptimizerConfig::default(),
            outputs: Outputs::default(),
            seed: 0,
            workers: None,
            record_wall_time: false,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SweepOutput {
    config: SweepConfig,
    records: Vec<ExperimentRecord>,
}

impl SweepConfig {
    /// Parses a config file, or the `config` member of a sweep's JSON output.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let inner = match value {
            serde_json::Value::Object(mut map) if map.contains_key("records") && map.contains_key("config") => {
                map.remove("config").expect("checked")
            }
            other => other,
        };
        let config: Self = serde_json::from_value(inner).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.instances.is_empty() || self.models.is_empty() || self.p_values.is_empty() || self.kappa_values.is_empty() {
            return bad("instances, models, p_values and kappa_values must be nonempty".into());
        }
        for (name, values) in [("p", &self.p_values), ("kappa", &self.kappa_values)] {
            if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return bad(format!("{name} = {v} is outside [0, 1]"));
            }
        }
        if let Some(n) = self.n {
            if let Some(inst) = self.instances.iter().find(|i| i.num_spins() != n) {
                return bad(format!("instance {inst} has {} spins, expected {n}", inst.num_spins()));
            }
        }
        if let Some(inst) = self.instances.iter().find(|i| i.num_spins() % 2 != 0) {
            return Err(Error::OddQubitCount(inst.num_spins()));
        }
        if self.r == 0 {
            return bad("r must be at least 1".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        self.optimizer.validate()
    }

    fn model(&self, mode: NoiseMode, p: f64, kappa: f64) -> Result<NoiseModel> {
        Ok(NoiseModel::new(mode, p, kappa)?
            .with_error_op(self.error_op)
            .with_schedule(self.schedule, self.include_boundary_slot))
    }

    /// Grid points in output order: instance, model, kappa, p.
    pub fn grid(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for instance in 0..self.instances.len() {
            for &model in &self.models {
                for (kappa_index, &kappa) in self.kappa_values.iter().enumerate() {
                    for &p in &self.p_values {
                        out.push(GridPoint {
                            instance,
                            model,
                            kappa_index,
                            p,
                            kappa,
                        });
                    }
                }
            }
        }
        out
    }

    /// Optimizer seed shared by every point of instance `index`.
    pub fn instance_seed(&self, index: usize) -> u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng.next_u64()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub instance: usize,
    pub model: NoiseMode,
    pub kappa_index: usize,
    pub p: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub instance: String,
    pub model: NoiseMode,
    pub p: f64,
    pub kappa: f64,
    #[serde(rename = "AR")]
    #[serde(deserialize_with = "nan_from_null")]
    pub ar: f64,
    #[serde(rename = "AR0")]
    #[serde(deserialize_with = "nan_from_null")]
    pub ar0: f64,
    #[serde(rename = "dAR")]
    #[serde(deserialize_with = "nan_from_null")]
    pub dar: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub chi: f64,
    #[serde(rename = "AR_lin")]
    #[serde(deserialize_with = "nan_from_null")]
    pub ar_lin: f64,
    /// Noiseless optimal AR, the intercept of `AR_lin`.
    #[serde(deserialize_with = "nan_from_null")]
    pub ar_noiseless: f64,
    #[serde(rename = "C_star")]
    pub c_star: i64,
    #[serde(deserialize_with = "nan_from_null")]
    pub c_tilde: f64,
    pub betas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub seed: u64,
    pub converged: usize,
    pub wall_time_s: Option<f64>,
    pub error: Option<String>,
}

fn nan_from_null<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

impl ExperimentRecord {
    fn failed(instance: String, point: &GridPoint, seed: u64, error: &Error) -> Self {
        Self {
            instance,
            model: point.model,
            p: point.p,
            kappa: point.kappa,
            ar: f64::NAN,
            ar0: f64::NAN,
            dar: f64::NAN,
            chi: f64::NAN,
            ar_lin: f64::NAN,
            ar_noiseless: f64::NAN,
            c_star: 0,
            c_tilde: f64::NAN,
            betas: Vec::new(),
            gammas: Vec::new(),
            seed,
            converged: 0,
            wall_time_s: None,
            error: Some(error.to_string()),
        }
    }

    pub fn csv_row(&self) -> String {
        let f = |v: f64| format!("{v:.16e}");
        let list = |v: &[f64]| v.iter().map(|x| f(*x)).collect::<Vec<_>>().join(";");
        [
            self.instance.clone(),
            self.model.as_str().to_string(),
            f(self.p),
            f(self.kappa),
            f(self.ar),
            f(self.ar0),
            f(self.dar),
            f(self.chi),
            f(self.ar_lin),
            self.c_star.to_string(),
            f(self.c_tilde),
            list(&self.betas),
            list(&self.gammas),
            self.seed.to_string(),
            self.converged.to_string(),
            self.wall_time_s.map(f).unwrap_or_default(),
        ]
        .join(",")
    }
}

struct InstanceRun {
    instance: SkInstance,
    circuit: AnsatzCircuit,
    c_star: i64,
    seed: u64,
    noiseless: OptimizationResult,
}

fn prepare(config: &SweepConfig, index: usize) -> Result<InstanceRun> {
    let instance = config.instances[index].clone();
    let circuit = AnsatzCircuit::build(&instance, config.r)?;
    let c_star = instance.brute_force_optimum()?.c_star;
    let seed = config.instance_seed(index);
    let clean = Landscape::new(&instance, &circuit, &NoiseModel::noiseless())?;
    let noiseless = basin_hop(&clean, &OptimizerConfig { seed, ..config.optimizer.clone() })?;
    Ok(InstanceRun {
        instance,
        circuit,
        c_star,
        seed,
        noiseless,
    })
}

fn chi_for(config: &SweepConfig, run: &InstanceRun, mode: NoiseMode, kappa: f64) -> Result<f64> {
    if mode == NoiseMode::None {
        return Ok(0.0);
    }
    let landscape = Landscape::new(&run.instance, &run.circuit, &config.model(mode, 0.0, kappa)?)?;
    Ok(chi_exact_for(&landscape, &run.noiseless.best_params)?.chi)
}

fn run_point(config: &SweepConfig, run: &InstanceRun, point: &GridPoint, chi: f64) -> Result<ExperimentRecord> {
    let start = Instant::now();
    let c_star = run.c_star as f64;
    let landscape = Landscape::new(&run.instance, &run.circuit, &config.model(point.model, point.p, point.kappa)?)?;
    let noisy = optimize_noisy(&landscape, &run.noiseless, c_star, &OptimizerConfig { seed: run.seed, ..config.optimizer.clone() })?;
    let ar_noiseless = run.noiseless.best_value / c_star;
    let best = &noisy.optimization.best_params;
    Ok(ExperimentRecord {
        instance: run.instance.to_string(),
        model: point.model,
        p: point.p,
        kappa: point.kappa,
        ar: noisy.metrics.ar,
        ar0: noisy.metrics.ar0,
        dar: noisy.metrics.dar,
        chi,
        ar_lin: linearized_ar(ar_noiseless, chi, c_star, point.p)?,
        ar_noiseless,
        c_star: run.c_star,
        c_tilde: noisy.c_tilde,
        betas: best.betas.clone(),
        gammas: best.gammas.clone(),
        seed: run.seed,
        converged: noisy.optimization.converged_restarts(),
        wall_time_s: config.record_wall_time.then(|| start.elapsed().as_secs_f64()),
        error: None,
    })
}

/// Runs every grid point. Per-point failures are recorded, not raised.
pub fn sweep(config: &SweepConfig) -> Result<Vec<ExperimentRecord>> {
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = config.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| Error::InvalidConfig(e.to_string()))?;
    pool.install(|| {
        let runs: Vec<Result<InstanceRun>> = (0..config.instances.len()).into_par_iter().map(|i| prepare(config, i)).collect();
        let chi_keys: Vec<(usize, NoiseMode, usize)> = (0..config.instances.len())
            .flat_map(|i| {
                config
                    .models
                    .iter()
                    .flat_map(move |&m| (0..config.kappa_values.len()).map(move |k| (i, m, k)))
            })
            .collect();
        let chis: Vec<Result<f64>> = chi_keys
            .par_iter()
            .map(|&(i, mode, k)| match &runs[i] {
                Ok(run) => chi_for(config, run, mode, config.kappa_values[k]),
                Err(e) => Err(e.clone()),
            })
            .collect();
        let lookup_chi = |point: &GridPoint| -> &Result<f64> {
            let idx = chi_keys
                .iter()
                .position(|&(i, m, k)| i == point.instance && m == point.model && k == point.kappa_index)
                .expect("every grid point has a chi key");
            &chis[idx]
        };
        Ok(config
            .grid()
            .par_iter()
            .map(|point| {
                let result = match (&runs[point.instance], lookup_chi(point)) {
                    (Ok(run), Ok(chi)) => run_point(config, run, point, *chi),
                    (Err(e), _) | (_, Err(e)) => Err(e.clone()),
                };
                result.unwrap_or_else(|e| {
                    ExperimentRecord::failed(
                        config.instances[point.instance].to_string(),
                        point,
                        config.instance_seed(point.instance),
                        &e,
                    )
                })
            })
            .collect())
    })
}

pub fn to_csv(records: &[ExperimentRecord]) -> String {
    let mut out = String::with_capacity(256 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

pub fn to_json(config: &SweepConfig, records: &[ExperimentRecord]) -> Result<String> {
    let out = SweepOutput {
        config: config.clone(),
        records: records.to_vec(),
    };
    serde_json::to_string_pretty(&out).map_err(|e| Error::InvalidConfig(e.to_string()))
}

/// Parses the `records` member of a sweep's JSON output.
pub fn records_from_json(text: &str) -> Result<Vec<ExperimentRecord>> {
    let out: SweepOutput = serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(out.records)
}

/// `AR` and `AR_lin` against `p` (one series per model and `kappa`), and
/// `AR` against `kappa` (one series per model and `p`), for each instance.
pub fn plots(records: &[ExperimentRecord]) -> Vec<(String, String)> {
    let mut instances: Vec<&str> = Vec::new();
    for r in records {
        if !instances.contains(&r.instance.as_str()) {
            instances.push(&r.instance);
        }
    }
    let mut files = Vec::new();
    for (idx, inst) in instances.iter().enumerate() {
        let rows: Vec<&ExperimentRecord> = records.iter().filter(|r| r.instance == *inst).collect();
        let mut keys: Vec<(NoiseMode, f64, f64)> = Vec::new();
        for r in &rows {
            if !keys.iter().any(|k| k.0 == r.model && k.1 == r.kappa && k.2 == r.p) {
                keys.push((r.model, r.kappa, r.p));
            }
        }
        let series_by = |pick: &dyn Fn(&ExperimentRecord) -> (f64, f64), group: &dyn Fn(&ExperimentRecord) -> String, dashed: bool| {
            let mut out: Vec<Series> = Vec::new();
            for r in &rows {
                let label = group(r);
                let point = pick(r);
                match out.iter_mut().find(|s| s.label == label) {
                    Some(s) => s.points.push(point),
                    None => out.push(Series {
                        label,
                        points: vec![point],
                        dashed,
                    }),
                }
            }
            for s in &mut out {
                s.points.sort_by(|a, b| a.0.total_cmp(&b.0));
            }
            out
        };
        let mut vs_p = series_by(&|r| (r.p, r.ar), &|r| format!("{} k={}", r.model.as_str(), r.kappa), false);
        vs_p.extend(series_by(&|r| (r.p, r.ar_lin), &|r| format!("{} k={} lin", r.model.as_str(), r.kappa), true));
        let vs_kappa = series_by(&|r| (r.kappa, r.ar), &|r| format!("{} p={}", r.model.as_str(), r.p), false);
        let mut title = String::new();
        let _ = write!(title, "instance {inst}");
        files.push((format!("instance{idx}_ar_vs_p.svg"), line_plot(&title, "p", "AR", &vs_p)));
        files.push((format!("instance{idx}_ar_vs_kappa.svg"), line_plot(&title, "kappa", "AR", &vs_kappa)));
    }
    files
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| io_error(path, e))
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Writes the configured outputs and returns the paths written.
pub fn persist(config: &SweepConfig, records: &[ExperimentRecord]) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if let Some(path) = &config.outputs.csv {
        write_file(path, &to_csv(records))?;
        written.push(path.clone());
    }
    if let Some(path) = &config.outputs.json {
        write_file(path, &to_json(config, records)?)?;
        written.push(path.clone());
    }
    if let Some(dir) = &config.outputs.svg {
        for (name, svg) in plots(records) {
            let path = dir.join(name);
            write_file(&path, &svg)?;
            written.push(path);
        }
    }
    Ok(written)
}
