use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use corrqaoa::ansatz::{AnsatzCircuit, Params};
use corrqaoa::executor::{Landscape, NoiseMode, NoiseModel, Schedule};
use corrqaoa::gate::ErrorOp;
use corrqaoa::optimizer::{basin_hop, OptimizerConfig};
use corrqaoa::sk::SkInstance;
use corrqaoa::susceptibility::{chi_exact_for, chi_finite_difference_for};
use corrqaoa::sweep::{persist, sweep, SweepConfig};
use corrqaoa::symmetry::{check_word, random_word, SymmetryGenerator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORKERS_ENV: &str = "CORRQAOA_WORKERS";

/// Exact emulation of QAOA on SK instances under correlated fluctuator noise.
#[derive(Parser)]
#[command(name = "corrqaoa", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a parameter sweep from a JSON config and write its outputs.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Also write SVG plots (next to the CSV unless `outputs.svg` is set).
        #[arg(long)]
        plot: bool,
        /// Worker threads; defaults to $CORRQAOA_WORKERS, then all cores.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print the optimum cost and its minimizers.
    BruteForce {
        #[arg(long, allow_hyphen_values = true)]
        instance: String,
    },
    /// Check landscape invariance under the parameter symmetry group.
    SymmetryCheck(SymmetryArgs),
    /// First-order response of the landscape to the error rate.
    Susceptibility(SusceptibilityArgs),
    /// Evaluate the noisy landscape at given angles.
    Evaluate {
        #[command(flatten)]
        noise: NoiseArgs,
        #[arg(long, allow_hyphen_values = true)]
        instance: String,
        #[arg(long, default_value_t = 3)]
        r: usize,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        betas: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        gammas: Vec<f64>,
    },
}

#[derive(Args)]
struct NoiseArgs {
    /// none, temporal or spatial.
    #[arg(long, alias = "noise", default_value = "temporal")]
    model: String,
    #[arg(long, default_value_t = 0.0)]
    p: f64,
    #[arg(long, default_value_t = 0.0)]
    kappa: f64,
    /// I, X, Y, Z or a rotation such as ry(0.3).
    #[arg(long, default_value = "Y")]
    error_op: String,
    #[arg(long, value_parser = ["active-gates", "all-slots"], default_value = "active-gates")]
    schedule: String,
    #[arg(long)]
    boundary_slot: bool,
}

impl NoiseArgs {
    fn model(&self) -> Result<NoiseModel> {
        let schedule = match self.schedule.as_str() {
            "all-slots" => Schedule::AllSlots,
            _ => Schedule::ActiveGates,
        };
        let mode = NoiseMode::parse(&self.model)?;
        Ok(NoiseModel::new(mode, self.p, self.kappa)?
            .with_error_op(ErrorOp::parse(&self.error_op)?)
            .with_schedule(schedule, self.boundary_slot))
    }
}

#[derive(Args)]
struct SymmetryArgs {
    #[command(flatten)]
    noise: NoiseArgs,
    /// Spin count of the random instance (ignored with --instance).
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    r: usize,
    #[arg(long, allow_hyphen_values = true)]
    instance: Option<String>,
    /// Random generator words checked after every single generator.
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, default_value_t = 5)]
    max_word: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SusceptibilityArgs {
    #[arg(long, allow_hyphen_values = true)]
    instance: String,
    #[arg(long, default_value = "temporal")]
    model: String,
    #[arg(long, default_value_t = 0.0)]
    kappa: f64,
    #[arg(long, default_value_t = 3)]
    r: usize,
    #[arg(long, default_value = "Y")]
    error_op: String,
    #[arg(long, value_parser = ["active-gates", "all-slots"], default_value = "active-gates")]
    schedule: String,
    #[arg(long)]
    boundary_slot: bool,
    /// Angles to evaluate at; the noiseless optimum is found when omitted.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, requires = "gammas")]
    betas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, requires = "betas")]
    gammas: Option<Vec<f64>>,
    /// Restarts for the noiseless optimization.
    #[arg(long, default_value_t = 32)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also report the Richardson finite difference with this step.
    #[arg(long)]
    fd_step: Option<f64>,
}

/// A problem with the command line or config, as opposed to a failed run.
#[derive(Debug)]
struct InputError(String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn input_error(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

fn parse_instance(text: &str) -> Result<SkInstance> {
    SkInstance::parse(text).map_err(|e| input_error(e.to_string()))
}

fn resolve_workers(flag: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| input_error(format!("{WORKERS_ENV}={v:?} is not a worker count"))),
        Err(_) => Ok(None),
    }
}

fn run_sweep(config_path: &PathBuf, plot: bool, workers: Option<usize>) -> Result<bool> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| input_error(format!("cannot read {}: {e}", config_path.display())))?;
    let mut config = SweepConfig::from_json_str(&text)?;
    if let Some(w) = resolve_workers(workers)? {
        config.workers = Some(w);
    }
    if plot && config.outputs.svg.is_none() {
        let base = config
            .outputs
            .csv
            .as_ref()
            .or(config.outputs.json.as_ref())
            .and_then(|p| p.parent().map(|d| d.to_path_buf()))
            .unwrap_or_default();
        config.outputs.svg = Some(base.join("plots"));
    }
    config.validate()?;
    let records = sweep(&config)?;
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    println!("{:<20} {:<9} {:>8} {:>6} {:>10} {:>10} {:>11} {:>10}", "instance", "model", "p", "kappa", "AR", "AR0", "dAR", "AR_lin");
    for r in &records {
        match &r.error {
            None => println!(
                "{:<20} {:<9} {:>8.2e} {:>6.3} {:>10.6} {:>10.6} {:>11.3e} {:>10.6}",
                r.instance,
                r.model.as_str(),
                r.p,
                r.kappa,
                r.ar,
                r.ar0,
                r.dar,
                r.ar_lin
            ),
            Some(e) => println!("{:<20} {:<9} {:>8.2e} {:>6.3} error: {e}", r.instance, r.model.as_str(), r.p, r.kappa),
        }
    }
    for path in persist(&config, &records)? {
        eprintln!("wrote {}", path.display());
    }
    if failed > 0 {
        eprintln!("{failed} of {} grid points failed", records.len());
    }
    Ok(failed == 0)
}

fn run_brute_force(instance: &str) -> Result<bool> {
    let inst = parse_instance(instance)?;
    let bf = inst.brute_force_optimum()?;
    println!("instance    {inst}");
    println!("n           {}", inst.num_spins());
    println!("C*          {}", bf.c_star);
    println!("minimizers  {}", bf.minimizers.len());
    for z in &bf.minimizers {
        let s: String = z.iter().map(|&v| if v > 0 { '+' } else { '-' }).collect();
        println!("  {s}");
    }
    Ok(true)
}

fn run_symmetry(args: &SymmetryArgs) -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let inst = match &args.instance {
        Some(text) => parse_instance(text)?,
        None => SkInstance::random(args.n, &mut rng)?,
    };
    let circuit = AnsatzCircuit::build(&inst, args.r)?;
    let model = args.noise.model()?;
    let landscape = Landscape::new(&inst, &circuit, &model)?;
    let draw = |rng: &mut ChaCha8Rng| -> Params {
        let pi = std::f64::consts::PI;
        Params {
            betas: (0..args.r).map(|_| rng.gen_range(-pi..pi)).collect(),
            gammas: (0..args.r).map(|_| rng.gen_range(-pi..pi)).collect(),
        }
    };
    let mut words: Vec<Vec<SymmetryGenerator>> = SymmetryGenerator::all(args.r).into_iter().map(|g| vec![g]).collect();
    words.extend((0..args.trials).map(|_| random_word(args.r, args.max_word, &mut rng)));
    println!("instance {inst}, r = {}, model {} p = {} kappa = {} V = {}", args.r, model.mode.as_str(), model.p, model.kappa, args.noise.error_op);
    println!("{:>4}  {:<8} {:>12}  word", "#", "result", "residual");
    let mut failures = 0;
    for (i, word) in words.iter().enumerate() {
        let params = draw(&mut rng);
        let report = check_word(|p| landscape.evaluate(p), &params, word, args.tol)?;
        if !report.passed {
            failures += 1;
        }
        println!("{:>4}  {:<8} {:>12.3e}  {}", i, if report.passed { "pass" } else { "FAIL" }, report.residual, report.label());
    }
    println!("{} of {} checks passed (tol {:e})", words.len() - failures, words.len(), args.tol);
    Ok(failures == 0)
}

fn run_susceptibility(args: &SusceptibilityArgs) -> Result<bool> {
    let inst = parse_instance(&args.instance)?;
    let circuit = AnsatzCircuit::build(&inst, args.r)?;
    let schedule = if args.schedule == "all-slots" { Schedule::AllSlots } else { Schedule::ActiveGates };
    let mode = NoiseMode::parse(&args.model)?;
    if mode == NoiseMode::None {
        bail!(input_error("susceptibility needs a temporal or spatial model"));
    }
    let model = NoiseModel::new(mode, 0.0, args.kappa)?
        .with_error_op(ErrorOp::parse(&args.error_op)?)
        .with_schedule(schedule, args.boundary_slot);
    let landscape = Landscape::new(&inst, &circuit, &model)?;
    let params = match (&args.betas, &args.gammas) {
        (Some(b), Some(g)) => {
            let p = Params::new(b.clone(), g.clone())?;
            circuit.check_params(&p)?;
            p
        }
        _ => {
            let clean = Landscape::new(&inst, &circuit, &NoiseModel::noiseless())?;
            let config = OptimizerConfig {
                restarts: args.restarts,
                seed: args.seed,
                ..OptimizerConfig::default()
            };
            let opt = basin_hop(&clean, &config)?;
            eprintln!("noiseless optimum {:.12} at betas {:?} gammas {:?}", opt.best_value, opt.best_params.betas, opt.best_params.gammas);
            opt.best_params
        }
    };
    let s = chi_exact_for(&landscape, &params)?;
    println!("model {} kappa {}", mode.as_str(), args.kappa);
    println!("<H>_0           {:.15e}", s.noiseless_value);
    println!("zero coefficient {:.15e}", s.zero_coefficient);
    println!("{:>4} {:>6} {:>24} {:>24}", "l", "|B_l|", "<H>^(l)", "contribution");
    for row in &s.per_length {
        println!("{:>4} {:>6} {:>24.15e} {:>24.15e}", row.length, row.count, row.average, row.contribution);
    }
    println!("chi             {:.15e}", s.chi);
    if let Some(h) = args.fd_step {
        let fd = chi_finite_difference_for(&landscape, &params, h)?;
        println!("chi (finite difference, h = {h:e}) {fd:.15e}");
        println!("relative difference {:.3e}", (fd - s.chi).abs() / s.chi.abs().max(f64::MIN_POSITIVE));
    }
    Ok(true)
}

fn run_evaluate(noise: &NoiseArgs, instance: &str, r: usize, betas: &[f64], gammas: &[f64]) -> Result<bool> {
    let inst = parse_instance(instance)?;
    let circuit = AnsatzCircuit::build(&inst, r)?;
    let landscape = Landscape::new(&inst, &circuit, &noise.model()?)?;
    let params = Params::new(betas.to_vec(), gammas.to_vec())?;
    let value = landscape.evaluate(&params)?;
    let c_star = inst.brute_force_optimum()?.c_star;
    println!("C~  {value:.16e}");
    println!("C*  {c_star}");
    println!("AR  {:.16e}", value / c_star as f64);
    Ok(true)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Sweep { config, plot, workers } => run_sweep(&config, plot, workers),
        Command::BruteForce { instance } => run_brute_force(&instance),
        Command::SymmetryCheck(args) => run_symmetry(&args),
        Command::Susceptibility(args) => run_susceptibility(&args),
        Command::Evaluate {
            noise,
            instance,
            r,
            betas,
            gammas,
        } => run_evaluate(&noise, &instance, r, &betas, &gammas),
    }
}

fn is_input_error(err: &anyhow::Error) -> bool {
    err.chain().any(|cause| {
        cause.downcast_ref::<InputError>().is_some() || cause.downcast_ref::<corrqaoa::Error>().is_some_and(|e| e.is_input_error())
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(err) => {
            eprintln!("error: {}", err.root_cause());
            ExitCode::from(if is_input_error(&err) { 1 } else { 2 })
        }
    }
}
