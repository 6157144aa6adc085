mod common;

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use corrqaoa::ansatz::{AnsatzCircuit, LayerKind, Params};
use corrqaoa::executor::{Landscape, NoiseMode, NoiseModel, Schedule, Slot};
use corrqaoa::gate::ErrorOp;
use corrqaoa::hybrid::{FluctuatorId, HybridState};
use corrqaoa::markov::{enumerate, FluctuatorChain, Realization};
use corrqaoa::optimizer::{basin_hop, metrics, OptimizerConfig};
use corrqaoa::sk::{SkInstance, TYPICAL_INSTANCE};
use corrqaoa::statevector::StateVector;
use corrqaoa::susceptibility::chi_exact_for;
use corrqaoa::sweep::{sweep, ExperimentRecord, SweepConfig};
use corrqaoa::symmetry::{check_word, random_word, SymmetryGenerator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_params(rng: &mut ChaCha8Rng, r: usize) -> Params {
    let pi = std::f64::consts::PI;
    Params::new(
        (0..r).map(|_| rng.gen_range(-pi..pi)).collect(),
        (0..r).map(|_| rng.gen_range(-pi..pi)).collect(),
    )
    .unwrap()
}

fn statevector_value(inst: &SkInstance, circuit: &AnsatzCircuit, params: &Params) -> f64 {
    let mut psi = StateVector::plus_state(inst.num_spins()).unwrap();
    for t in 1..=circuit.num_layers() {
        for g in circuit.layer_gates(t, params) {
            psi.apply(&g).unwrap();
        }
    }
    psi.expectation(circuit.hamiltonian(inst).unwrap().diag()).unwrap()
}

fn circuit_structure() -> Outcome {
    let inst = SkInstance::parse(TYPICAL_INSTANCE).unwrap();
    let circuit = AnsatzCircuit::build(&inst, 3).unwrap();
    ensure(circuit.num_layers() == 21, || format!("{} layers", circuit.num_layers()))?;
    for cycle in 0..3 {
        let mut pairs = HashSet::new();
        let mut count = 0;
        for layer in circuit.layers().iter().filter(|l| l.cycle == cycle) {
            if let LayerKind::Entangling(gates) = &layer.kind {
                for g in gates {
                    count += 1;
                    pairs.insert((g.spins[0].min(g.spins[1]), g.spins[0].max(g.spins[1])));
                }
            }
        }
        ensure(count == 15 && pairs.len() == 15, || format!("cycle {cycle}: {count} gates, {} pairs", pairs.len()))?;
    }
    let two = AnsatzCircuit::build(&inst, 2).unwrap();
    ensure(two.permutation().iter().enumerate().all(|(i, &q)| i == q), || {
        format!("permutation after two cycles {:?}", two.permutation())
    })?;
    Ok("21 layers, 15 pairs once per cycle, identity after cycle 2".into())
}

fn ansatz_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for n in [2, 4, 6] {
        for r in 1..=3 {
            let inst = SkInstance::random(n, &mut rng).unwrap();
            let circuit = AnsatzCircuit::build(&inst, r).unwrap();
            let land = Landscape::new(&inst, &circuit, &NoiseModel::noiseless()).unwrap();
            for _ in 0..20 {
                let params = random_params(&mut rng, r);
                let oracle = common::direct_ansatz_value(&inst, &params);
                for value in [
                    land.evaluate(&params).unwrap(),
                    land.evaluate_dense(&params).unwrap(),
                    statevector_value(&inst, &circuit, &params),
                ] {
                    worst = worst.max((value - oracle).abs());
                }
            }
        }
    }
    ensure(worst <= 1e-10, || format!("max |delta| {worst:e}"))?;
    Ok(format!("max |delta| {worst:.2e} <= 1e-10"))
}

fn markov_suite() -> Outcome {
    let chain = FluctuatorChain::new(0.3, 0.6).unwrap();
    let s = chain.steady_state();
    ensure(s == [0.7, 0.3], || format!("steady state {s:?}"))?;
    let kappas = [0.0, 0.25, 0.5, 0.9, 1.0];
    let ps = [0.0, 0.01, 0.3, 0.7, 1.0];
    let mut worst_prob = 0.0f64;
    for &p in &ps {
        for &kappa in &kappas {
            let c = FluctuatorChain::new(p, kappa).unwrap();
            let t = c.transition_matrix();
            for col in 0..2 {
                let sum = t[0][col] + t[1][col];
                ensure((sum - 1.0).abs() <= 1e-14, || format!("column {col} sums to {sum}"))?;
            }
            let ss = c.steady_state();
            for row in 0..2 {
                let image = t[row][0] * ss[0] + t[row][1] * ss[1];
                ensure((image - ss[row]).abs() <= 1e-14, || format!("steady state not fixed: {image}"))?;
            }
            for a in 0..6u32 {
                for b in 0..6u32 {
                    let (x, y, z) = (c.transition_power(a), c.transition_power(b), c.transition_power(a + b));
                    for i in 0..2 {
                        for j in 0..2 {
                            let prod = x[i][0] * y[0][j] + x[i][1] * y[1][j];
                            ensure((prod - z[i][j]).abs() <= 1e-13, || format!("semigroup T^{a} T^{b}"))?;
                        }
                    }
                }
            }
            for len in [1usize, 5, 12] {
                let mut total = 0.0;
                let mut marginal = vec![0.0; len];
                let mut joint = vec![0.0; len];
                for bits in enumerate(len).unwrap() {
                    let pb = c.realization_probability(&bits);
                    total += pb;
                    for t in 0..len {
                        if bits.bits()[t] {
                            marginal[t] += pb;
                            if bits.bits()[0] {
                                joint[t] += pb;
                            }
                        }
                    }
                }
                worst_prob = worst_prob.max((total - 1.0).abs());
                ensure((total - 1.0).abs() <= 1e-12, || format!("sum p_b = {total}"))?;
                for t in 0..len {
                    ensure((marginal[t] - p).abs() <= 1e-12, || format!("marginal at {t}: {}", marginal[t]))?;
                    let conn = joint[t] - p * p;
                    let expected = p * (1.0 - p) * kappa.powi(t as i32);
                    ensure((conn - expected).abs() <= 1e-12, || format!("correlator at dt={t}: {conn} vs {expected}"))?;
                    ensure((c.correlator(t as i64) - expected).abs() <= 1e-15, || format!("correlator({t})"))?;
                }
            }
            if p > 0.0 && p < 1.0 {
                let c0 = c.correlator(0);
                for dt in 0..8i64 {
                    let ratio = c.correlator(dt) / c0;
                    let exact = kappa.powi(dt as i32);
                    ensure((ratio - exact).abs() <= 1e-15, || format!("ratio at {dt}: {ratio} vs {exact}"))?;
                    ensure(c.correlator(-dt) == c.correlator(dt), || "correlator not symmetric".into())?;
                }
            }
        }
    }
    let fixture = FluctuatorChain::new(0.2, 0.5).unwrap().realization_probability(&Realization::parse("0110").unwrap());
    ensure((fixture - 0.8 * 0.1 * 0.6 * 0.4).abs() <= 1e-15, || format!("p(0110) = {fixture}"))?;
    Ok(format!("max |sum p_b - 1| {worst_prob:.1e}"))
}

fn mixture_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for (n, schedule, boundary) in [(2, Schedule::AllSlots, true), (4, Schedule::ActiveGates, false)] {
        let inst = SkInstance::random(n, &mut rng).unwrap();
        let circuit = AnsatzCircuit::build(&inst, 1).unwrap();
        let params = random_params(&mut rng, 1);
        for mode in [NoiseMode::Temporal, NoiseMode::Spatial] {
            for kappa in [0.0, 0.5, 1.0] {
                for p in [0.1, 0.7] {
                    let model = NoiseModel::new(mode, p, kappa).unwrap().with_schedule(schedule, boundary);
                    let land = Landscape::new(&inst, &circuit, &model).unwrap();
                    let (expected, total) = common::realization_mixture(&land, &params);
                    ensure((total - 1.0).abs() <= 1e-12, || format!("total probability {total}"))?;
                    for value in [land.evaluate(&params).unwrap(), land.evaluate_dense(&params).unwrap()] {
                        worst = worst.max((value - expected).abs());
                    }
                    cases += 1;
                }
            }
        }
    }
    ensure(worst <= 1e-11, || format!("max |delta| {worst:e}"))?;
    Ok(format!("{cases} cases at n=2 and n=4, max |delta| {worst:.2e} <= 1e-11"))
}

fn richardson(land: &Landscape, params: &Params, h: f64) -> f64 {
    let c0 = land.with_p(0.0).unwrap().evaluate(params).unwrap();
    let d = |step: f64| (land.with_p(step).unwrap().evaluate(params).unwrap() - c0) / step;
    2.0 * d(h / 2.0) - d(h)
}

fn susceptibility() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let inst = SkInstance::random(4, &mut rng).unwrap();
    let circuit = AnsatzCircuit::build(&inst, 2).unwrap();
    let clean = Landscape::new(&inst, &circuit, &NoiseModel::noiseless()).unwrap();
    let cfg = OptimizerConfig {
        restarts: 8,
        hops: 2,
        ..Default::default()
    };
    let optimum = basin_hop(&clean, &cfg).unwrap().best_params;
    let points = [random_params(&mut rng, 2), random_params(&mut rng, 2), optimum];
    let mut worst = 0.0f64;
    for mode in [NoiseMode::Temporal, NoiseMode::Spatial] {
        for kappa in [0.0, 0.5, 1.0] {
            let land = Landscape::new(&inst, &circuit, &NoiseModel::new(mode, 0.0, kappa).unwrap()).unwrap();
            for params in &points {
                let exact = chi_exact_for(&land, params).unwrap().chi;
                let fd = richardson(&land, params, 1e-4);
                let rel = (exact - fd).abs() / exact.abs().max(1e-12);
                worst = worst.max(rel);
            }
        }
    }
    ensure(worst <= 1e-4, || format!("max relative error {worst:e}"))?;

    let model = NoiseModel::new(NoiseMode::Temporal, 0.0, 1.0).unwrap().with_schedule(Schedule::AllSlots, true);
    let land = Landscape::new(&inst, &circuit, &model).unwrap();
    let chains = land.grid().chains().to_vec();
    let n = chains.len();
    ensure(n == 4 && chains.iter().all(|c| c.len() == circuit.num_layers() + 1), || "temporal chains of length m+1".into())?;
    let mut limit_worst = 0.0f64;
    for params in &points {
        let h0 = land.evaluate_noiseless(params).unwrap();
        let full: f64 = chains
            .iter()
            .map(|c: &Vec<Slot>| land.evaluate_realization(params, c).unwrap())
            .sum::<f64>()
            / n as f64;
        let expected = n as f64 * (full - h0);
        let chi = chi_exact_for(&land, params).unwrap().chi;
        limit_worst = limit_worst.max((chi - expected).abs());
    }
    ensure(limit_worst <= 1e-12, || format!("kappa=1 limit off by {limit_worst:e}"))?;
    Ok(format!("max relative error {worst:.2e} <= 1e-4, kappa=1 limit |delta| {limit_worst:.1e}"))
}

fn symmetry_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut checks = 0;
    let mut worst = 0.0f64;
    for (n, r) in [(4, 2), (4, 3), (6, 2), (6, 3)] {
        let inst = SkInstance::random(n, &mut rng).unwrap();
        let circuit = AnsatzCircuit::build(&inst, r).unwrap();
        let models = [
            NoiseModel::noiseless(),
            NoiseModel::new(NoiseMode::Temporal, 0.1, 0.5).unwrap().with_error_op(ErrorOp::Y),
            NoiseModel::new(NoiseMode::Spatial, 0.1, 0.5).unwrap().with_error_op(ErrorOp::Y),
        ];
        let mut words: Vec<Vec<SymmetryGenerator>> = SymmetryGenerator::all(r).into_iter().map(|g| vec![g]).collect();
        words.extend((0..50).map(|_| random_word(r, 6, &mut rng)));
        for model in &models {
            let land = Landscape::new(&inst, &circuit, model).unwrap();
            let params = random_params(&mut rng, r);
            for word in &words {
                let report = check_word(|x: &Params| land.evaluate(x), &params, word, 1e-9).unwrap();
                checks += 1;
                worst = worst.max(report.residual);
                ensure(report.passed, || format!("n={n} r={r} {}: residual {:e}", report.label(), report.residual))?;
            }
        }
    }
    Ok(format!("{checks} checks, max residual {worst:.2e} <= 1e-9"))
}

fn toy_channel() -> Outcome {
    let ry = ErrorOp::parse(&format!("ry({})", std::f64::consts::FRAC_PI_2)).unwrap();
    let z = [1.0, -1.0];
    let mut out = Vec::new();
    for p in [0.0, 0.25, 1.0] {
        let mut state = HybridState::plus_state(1).unwrap();
        state.attach_fluctuator(FluctuatorId(0), p).unwrap();
        state.apply_controlled_error(FluctuatorId(0), 0, &ry).unwrap();
        state.trace_out_fluctuator(FluctuatorId(0)).unwrap();
        let c = state.expectation(&z).unwrap();
        ensure((c + p).abs() <= 1e-15, || format!("C~ = {c} at p = {p}"))?;
        let ar = metrics(c, c, -1.0).unwrap().ar;
        ensure((ar - p).abs() <= 1e-15, || format!("AR = {ar} at p = {p}"))?;
        out.push(format!("AR({p})={ar:.15}"));
    }
    Ok(out.join(", "))
}

fn find(records: &[ExperimentRecord], model: NoiseMode, p: f64, kappa: f64) -> &ExperimentRecord {
    records
        .iter()
        .find(|r| r.model == model && r.p == p && r.kappa == kappa)
        .expect("grid point present")
}

fn typical_sweep() -> Vec<ExperimentRecord> {
    let config = SweepConfig {
        instances: vec![SkInstance::parse(TYPICAL_INSTANCE).unwrap()],
        r: 3,
        models: vec![NoiseMode::Temporal, NoiseMode::Spatial],
        p_values: vec![0.001, 0.01],
        kappa_values: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
        schedule: Schedule::ActiveGates,
        optimizer: OptimizerConfig::default(),
        seed: 0,
        ..Default::default()
    };
    let records = sweep(&config).unwrap();
    for r in &records {
        assert!(r.error.is_none(), "{:?}", r.error);
    }
    records
}

fn typical_instance(records: &[ExperimentRecord]) -> Outcome {
    let bf = SkInstance::parse(TYPICAL_INSTANCE).unwrap().brute_force_optimum().unwrap();
    ensure(bf.minimizers.len() == 4, || format!("{} minimizers", bf.minimizers.len()))?;

    let temporal = find(records, NoiseMode::Temporal, 0.01, 1.0).ar0;
    let spatial = find(records, NoiseMode::Spatial, 0.01, 1.0).ar0;
    let uncorrelated = find(records, NoiseMode::Temporal, 0.01, 0.0)
        .ar0
        .max(find(records, NoiseMode::Spatial, 0.01, 0.0).ar0);
    ensure(temporal > spatial && spatial > uncorrelated, || {
        format!("AR0 ordering temporal {temporal} spatial {spatial} uncorrelated {uncorrelated}")
    })?;

    for model in [NoiseMode::Temporal, NoiseMode::Spatial] {
        for p in [0.001, 0.01] {
            let ars: Vec<f64> = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0].iter().map(|&k| find(records, model, p, k).ar).collect();
            ensure(ars.windows(2).all(|w| w[1] >= w[0]), || format!("{} p={p}: AR vs kappa {ars:?}", model.as_str()))?;
        }
    }
    let worst_dar = records.iter().map(|r| r.dar).fold(f64::INFINITY, f64::min);
    ensure(worst_dar >= -1e-6, || format!("min dAR {worst_dar:e}"))?;
    Ok(format!(
        "C* {}, 4 minimizers; AR0 {temporal:.4} > {spatial:.4} > {uncorrelated:.4}; AR monotone in kappa; min dAR {worst_dar:.1e}",
        bf.c_star
    ))
}

fn linearized(records: &[ExperimentRecord]) -> Outcome {
    let worst = records
        .iter()
        .filter(|r| r.p == 0.001)
        .map(|r| (r.ar - r.ar_lin).abs())
        .fold(0.0f64, f64::max);
    let divergence: Vec<String> = [NoiseMode::Temporal, NoiseMode::Spatial]
        .iter()
        .map(|&m| {
            let r = find(records, m, 0.01, 0.0);
            format!("{} AR-AR0={:.3e} ({})", m.as_str(), r.dar, if r.ar > r.ar0 { "AR > AR0" } else { "AR = AR0" })
        })
        .collect();
    ensure(worst <= 1e-3, || format!("max |AR - AR_lin| at p=1e-3: {worst:e}"))?;
    Ok(format!("max |AR - AR_lin| {worst:.2e} <= 1e-3; kappa=0 p=0.01: {}", divergence.join(", ")))
}

fn run(label: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        Err(e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into()))
    });
    let secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => {
            println!("PASS {label}: {detail} [{secs:.1}s]");
            true
        }
        Err(detail) => {
            println!("FAIL {label}: {detail} [{secs:.1}s]");
            false
        }
    }
}

fn main() {
    let mut ok = true;
    ok &= run("1 circuit structure", circuit_structure);
    ok &= run("2 ansatz oracle", ansatz_oracle);
    ok &= run("3 markov suite", markov_suite);
    ok &= run("4 mixture identity", mixture_identity);
    ok &= run("5 susceptibility", susceptibility);
    ok &= run("6 symmetry suite", symmetry_suite);
    ok &= run("7 toy channel", toy_channel);
    let start = Instant::now();
    let records = catch_unwind(typical_sweep);
    println!("typical-instance sweep finished in {:.1}s", start.elapsed().as_secs_f64());
    match records {
        Ok(records) => {
            ok &= run("8 typical instance", || typical_instance(&records));
            ok &= run("9 linearized AR", || linearized(&records));
        }
        Err(_) => {
            println!("FAIL 8 typical instance: sweep failed");
            println!("FAIL 9 linearized AR: sweep failed");
            ok = false;
        }
    }
    if !ok {
        std::process::exit(1);
    }
}
