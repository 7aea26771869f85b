//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.
//!
//! Criteria 3 to 6 share six full training runs (three seeds each of the
//! constrained learner and the zero-multiplier ablation, 2×10⁵ env steps
//! apiece), so a complete run takes a couple of hours on one core. Run
//! artifacts land under `$CARGO_TARGET_TMPDIR/acceptance/`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ndarray::{s, Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ssac::env::{EnvConfig, Nav2d};
use ssac::harness::check::{gradient_suites, random_batch};
use ssac::harness::checkpoint::Checkpoint;
use ssac::harness::config::RunConfig;
use ssac::harness::eval::{check_invariance, evaluate, Actor, EvalReport, InvarianceReport};
use ssac::harness::metrics::{read_metrics, MetricsRow};
use ssac::harness::run;
use ssac::learner::losses::{critic_input, qc_loss};
use ssac::learner::{Batch, LearnerConfig, MultiplierMode, ReplayBuffer, Trainer, Transition};
use ssac::nn::{elu, elu_prime, Adam, LinearSchedule, Mlp};
use ssac::safety::{check_feasibility, SafetyIndexParams};

const SEEDS: [u64; 3] = [0, 1, 2];
/// Offset that keeps evaluation starts disjoint from any training stream.
const EVAL_SEED: u64 = 50_000;

struct Verdict {
    id: u32,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn verdict(id: u32, name: &'static str, passed: bool, detail: String) -> Verdict {
    let tag = if passed { "PASS" } else { "FAIL" };
    println!("{tag} criterion {id} ({name}): {detail}");
    Verdict {
        id,
        name,
        passed,
        detail,
    }
}

fn minutes(d: Duration) -> f64 {
    d.as_secs_f64() / 60.0
}

fn gradient_fidelity() -> Verdict {
    let start = Instant::now();
    let env = Nav2d::new(EnvConfig::default()).unwrap();
    let params = SafetyIndexParams::default();
    let mut worst = (0.0f64, "", 0u64);
    for seed in 0..20u64 {
        for r in gradient_suites(&env, &params, &[16, 16], 32, seed).unwrap() {
            if r.max_relative_error > worst.0 || worst.1.is_empty() {
                worst = (r.max_relative_error, r.name, seed);
            }
        }
    }
    let elapsed = start.elapsed();
    let passed = worst.0 < 1e-4 && elapsed < Duration::from_secs(120);
    verdict(
        1,
        "gradient fidelity",
        passed,
        format!(
            "worst max relative error {:.2e} ({} seed {}) over 20 seeds x 7 losses, {:.1}s",
            worst.0,
            worst.1,
            worst.2,
            elapsed.as_secs_f64()
        ),
    )
}

fn safety_critic_exactness() -> Verdict {
    let start = Instant::now();
    let env = Nav2d::new(EnvConfig::default()).unwrap();
    let params = SafetyIndexParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    let data = random_batch(&env, &params, 20_000, &mut rng).unwrap();
    let split = 16_000;
    let x = critic_input(data.observations.view(), data.actions.view());
    let (train_x, test_x) = (x.slice(s![..split, ..]), x.slice(s![split.., ..]));
    let (train_c, test_c) = (
        data.costs.slice(s![..split, ..]),
        data.costs.slice(s![split.., ..]),
    );

    let in_dim = x.ncols();
    let mut net = Mlp::new(&[in_dim, 64, 64, env.hazard_count()], 7).unwrap();
    let steps = 60_000u64;
    let mut adam = Adam::new(net.num_params(), LinearSchedule::new(3e-3, 1e-5, steps));
    let obs_dim = env.obs_dim();
    let batch_rows = 256;
    for _ in 0..steps {
        let idx: Vec<usize> = (0..batch_rows).map(|_| rng.random_range(0..split)).collect();
        let rows = train_x.select(Axis(0), &idx);
        let b = Batch {
            observations: rows.slice(s![.., ..obs_dim]).to_owned(),
            actions: rows.slice(s![.., obs_dim..]).to_owned(),
            costs: train_c.select(Axis(0), &idx),
            // the safety-critic loss reads only the three fields above
            rewards: Array1::zeros(batch_rows),
            phis: Array2::zeros((batch_rows, 1)),
            next_observations: Array2::zeros((batch_rows, obs_dim)),
            dones: Array1::zeros(batch_rows),
        };
        let g = qc_loss(&net, &b).grads;
        adam.step(net.params_mut(), g.as_slice()).unwrap();
    }
    let pred = net.predict(test_x);
    let mse = (&pred - &test_c).mapv(|d| d * d).mean().unwrap();
    let scale = test_c.mapv(f64::abs).mean().unwrap();
    let elapsed = start.elapsed();
    let passed = mse < 1e-2 && elapsed < Duration::from_secs(300);
    verdict(
        2,
        "safety-critic exactness",
        passed,
        format!(
            "held-out MSE {mse:.2e} on 4000 transitions (mean |cost| {scale:.3}), {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn feasibility_checker() -> Verdict {
    let env = Nav2d::new(EnvConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let default = check_feasibility(&env, &SafetyIndexParams::default(), 10_000, 21, &mut rng).unwrap();
    let fast = Nav2d::new(EnvConfig {
        v_max: 4.0,
        ..EnvConfig::default()
    })
    .unwrap();
    let adversarial = SafetyIndexParams {
        k: 1e-6,
        ..SafetyIndexParams::default()
    };
    let negative = check_feasibility(&fast, &adversarial, 10_000, 21, &mut rng).unwrap();
    let passed = default.states_with_empty_control_safe_set == 0 && negative.states_with_empty_control_safe_set > 0;
    verdict(
        7,
        "feasibility checker",
        passed,
        format!(
            "default index: {} of 10000 states without a control-safe action (min safe fraction {:.3}); \
             k=1e-6, v_max=4: {} of 10000",
            default.states_with_empty_control_safe_set,
            default.empirical_min_safe_action_fraction,
            negative.states_with_empty_control_safe_set
        ),
    )
}

fn transition(tag: f64) -> Transition {
    Transition {
        observation: vec![tag; 3],
        action: [0.0, 0.0],
        reward: tag,
        costs: vec![0.0],
        phis: vec![0.0],
        next_observation: vec![tag; 3],
        done: false,
    }
}

fn mechanics_suite() -> Verdict {
    let start = Instant::now();
    let mut failures = Vec::new();

    // replay buffer: FIFO eviction, saturation, reproducible sampling
    let mut buf = ReplayBuffer::new(1000).unwrap();
    for i in 0..10_000 {
        buf.push(transition(i as f64));
    }
    let oldest: Vec<f64> = buf.iter_oldest_first().map(|t| t.reward).collect();
    let expected: Vec<f64> = (9000..10_000).map(f64::from).collect();
    if buf.len() != 1000 || oldest != expected {
        failures.push("buffer eviction".to_string());
    }
    let draw = |seed| buf.sample_indices(64, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    if draw(5) != draw(5) {
        failures.push("buffer sampling".to_string());
    }

    // Polyak averaging at tau 0, 1 and 0.005
    let online = Mlp::new(&[3, 4, 1], 1).unwrap();
    let base = Mlp::new(&[3, 4, 1], 2).unwrap();
    for tau in [0.0, 1.0, 0.005] {
        let mut t = base.clone();
        t.soft_update_from(&online, tau).unwrap();
        let ok = t
            .params()
            .iter()
            .zip(online.params().iter().zip(base.params()))
            .all(|(got, (o, b))| (got - (tau * o + (1.0 - tau) * b)).abs() <= 1e-15);
        let exact = match tau {
            0.0 => t.params() == base.params(),
            1.0 => t.params() == online.params(),
            _ => true,
        };
        if !ok || !exact {
            failures.push(format!("soft update tau={tau}"));
        }
    }

    // multiplier stays non-negative on 10⁵ wide-range inputs after training
    let env = Nav2d::new(EnvConfig::default()).unwrap();
    let cfg = LearnerConfig {
        hidden_sizes: vec![16, 16],
        batch_size: 32,
        env_steps_per_iteration: 100,
        gradient_steps_per_iteration: 100,
        warmup_steps: 100,
        iterations: 6,
        ..LearnerConfig::default()
    };
    let mut trainer = Trainer::new(env.clone(), SafetyIndexParams::default(), cfg, 1).unwrap();
    while !trainer.is_finished() {
        trainer.run_iteration().unwrap();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let obs = Array2::from_shape_simple_fn((100_000, env.obs_dim()), || rng.random_range(-100.0..100.0));
    let mut multiplier = trainer.agent.multiplier.clone();
    let trained_min = multiplier.values(obs.view()).iter().copied().fold(f64::INFINITY, f64::min);
    for p in multiplier.net.params_mut() {
        *p *= 1e3;
    }
    let blown_min = multiplier.values(obs.view()).iter().copied().fold(f64::INFINITY, f64::min);
    if !(trained_min >= 0.0 && blown_min >= 0.0) {
        failures.push(format!("multiplier fuzz min {trained_min} / {blown_min}"));
    }

    // ELU identities: value, continuity at 0, derivative = value + 1 on the negative side
    for &x in &[-30.0, -2.0, -0.5, -1e-9, 0.0, 1e-9, 0.5, 3.0] {
        let (v, d) = (elu(x), elu_prime(x));
        let ok = if x > 0.0 {
            v == x && d == 1.0
        } else {
            (v - x.exp_m1()).abs() <= 1e-15 && (d - (v + 1.0)).abs() <= 1e-15
        };
        if !ok {
            failures.push(format!("elu at {x}"));
        }
    }

    // same seed gives a byte-identical metrics file
    let dir = tempfile::tempdir().unwrap();
    let tiny = |out: &Path| {
        let mut c = RunConfig::default();
        c.learner.hidden_sizes = vec![8, 8];
        c.learner.batch_size = 16;
        c.learner.env_steps_per_iteration = 50;
        c.learner.gradient_steps_per_iteration = 25;
        c.learner.warmup_steps = 50;
        c.learner.iterations = 4;
        c.run.seed = 9;
        c.run.feasibility_states = 100;
        c.run.out_dir = out.to_path_buf();
        run::train(&c, false).unwrap();
        std::fs::read(out.join("metrics.csv")).unwrap()
    };
    if tiny(&dir.path().join("a")) != tiny(&dir.path().join("b")) {
        failures.push("metrics.csv differs between identical runs".to_string());
    }

    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(60) {
        failures.push(format!("runtime {:.1}s", elapsed.as_secs_f64()));
    }
    let detail = if failures.is_empty() {
        format!(
            "buffer, soft update, multiplier fuzz (1e5 inputs, min {trained_min:.2e}), ELU, determinism ok in {:.1}s",
            elapsed.as_secs_f64()
        )
    } else {
        failures.join("; ")
    };
    verdict(8, "mechanics unit suite", failures.is_empty(), detail)
}

/// One finished training run plus everything measured on its final policy.
struct Trained {
    minutes: f64,
    rows: Vec<MetricsRow>,
    eval: EvalReport,
    invariance: Option<InvarianceReport>,
}

/// Violation steps per env step over the last quarter of iterations.
fn tail_cost_rate(rows: &[MetricsRow]) -> f64 {
    let n = rows.len();
    let first = n - n / 4;
    let steps_before = if first == 0 { 0 } else { rows[first - 1].env_steps };
    let steps = rows[n - 1].env_steps - steps_before;
    let violations: u64 = rows[first..].iter().map(|r| r.violation_steps).sum();
    violations as f64 / steps as f64
}

fn output_root() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance")
}

fn train_one(mode: MultiplierMode, seed: u64) -> Trained {
    let tag = match mode {
        MultiplierMode::Learned => "ssac",
        MultiplierMode::Zero => "ablation",
    };
    let out = output_root().join(format!("{tag}_seed{seed}"));
    let mut cfg = RunConfig::default();
    cfg.learner.multiplier = mode;
    cfg.run.seed = seed;
    cfg.run.out_dir = out.clone();
    cfg.run.checkpoint_interval = 0;
    let start = Instant::now();
    let summary = run::train(&cfg, false).expect("training run");
    let minutes = minutes(start.elapsed());
    let rows = read_metrics(&out.join("metrics.csv")).unwrap();
    let ckpt = Checkpoint::load(&summary.final_checkpoint).unwrap();
    let env = Nav2d::new(ckpt.config.env.clone()).unwrap();
    let params = ckpt.config.safety_index;
    let actor = Actor::Deterministic(&ckpt.agent.policy);
    let (eval, _) = evaluate(&env, &params, &actor, 50, EVAL_SEED + seed).unwrap();
    let invariance = (mode == MultiplierMode::Learned)
        .then(|| check_invariance(&env, &params, &actor, 100, EVAL_SEED + 100 + seed).unwrap());
    eprintln!(
        "  {tag} seed {seed}: {minutes:.1} min, eval return {:.2}, goal rate {:.2}, violation steps {}, \
         tail cost rate {:.2e}",
        eval.mean_return,
        eval.goal_rate,
        eval.total_violation_steps,
        tail_cost_rate(&rows)
    );
    Trained {
        minutes,
        rows,
        eval,
        invariance,
    }
}

fn end_to_end() -> Vec<Verdict> {
    let ssac: Vec<Trained> = SEEDS.iter().map(|&s| train_one(MultiplierMode::Learned, s)).collect();
    let ablation: Vec<Trained> = SEEDS.iter().map(|&s| train_one(MultiplierMode::Zero, s)).collect();
    let mut out = Vec::new();

    let ssac_viol: Vec<u64> = ssac.iter().map(|t| t.eval.total_violation_steps).collect();
    let abl_viol: Vec<u64> = ablation.iter().map(|t| t.eval.total_violation_steps).collect();
    let slowest = ssac.iter().chain(&ablation).map(|t| t.minutes).fold(0.0, f64::max);
    out.push(verdict(
        3,
        "zero-violation convergence",
        ssac_viol.iter().all(|&v| v == 0) && abl_viol.iter().all(|&v| v > 0) && slowest <= 30.0,
        format!(
            "violation steps in final 50 deterministic episodes, seeds {SEEDS:?}: SSAC {ssac_viol:?}, \
             zero-multiplier ablation {abl_viol:?}; slowest run {slowest:.1} min"
        ),
    ));

    let ssac_rate: Vec<f64> = ssac.iter().map(|t| tail_cost_rate(&t.rows)).collect();
    let abl_rate: Vec<f64> = ablation.iter().map(|t| tail_cost_rate(&t.rows)).collect();
    let rates_ok = ssac_rate
        .iter()
        .zip(&abl_rate)
        .all(|(&s, &a)| s <= 1e-3 && a > 0.0 && a >= 10.0 * s);
    out.push(verdict(
        4,
        "cost-rate convergence",
        rates_ok,
        format!(
            "last-quarter cost rate, SSAC {:?}, ablation {:?}",
            ssac_rate.iter().map(|r| format!("{r:.2e}")).collect::<Vec<_>>(),
            abl_rate.iter().map(|r| format!("{r:.2e}")).collect::<Vec<_>>()
        ),
    ));

    let escapes: Vec<usize> = ssac
        .iter()
        .map(|t| t.invariance.as_ref().map_or(usize::MAX, |r| r.escaping_rollouts))
        .collect();
    out.push(verdict(
        5,
        "forward invariance",
        escapes.iter().all(|&e| e == 0),
        format!("escaping rollouts out of 100 safe starts per SSAC seed: {escapes:?}"),
    ));

    let fractions: Vec<f64> = ssac.iter().map(|t| t.eval.positive_cost_fraction).collect();
    let max_phi: Vec<f64> = ssac.iter().map(|t| t.eval.max_phi).collect();
    out.push(verdict(
        6,
        "constraint confinement",
        fractions.iter().all(|&f| f <= 0.01) && max_phi.iter().all(|&p| p <= 0.05),
        format!(
            "fraction of steps with transition cost > 1e-3: {:?}; max phi: {:?}",
            fractions.iter().map(|f| format!("{f:.4}")).collect::<Vec<_>>(),
            max_phi.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>()
        ),
    ));
    out
}

fn main() -> ExitCode {
    let mut verdicts = vec![
        gradient_fidelity(),
        safety_critic_exactness(),
        feasibility_checker(),
        mechanics_suite(),
    ];
    verdicts.extend(end_to_end());
    verdicts.sort_by_key(|v| v.id);
    let failed: Vec<&Verdict> = verdicts.iter().filter(|v| !v.passed).collect();
    println!("\nsummary: {} of {} criteria passed", verdicts.len() - failed.len(), verdicts.len());
    for v in &failed {
        println!("  failed: {} ({}): {}", v.id, v.name, v.detail);
    }
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
