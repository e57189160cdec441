//! The release gate: nine end-to-end checks covering order invariance,
//! gradient correctness, reduction identities, oracle equivalence, schedule
//! conformance, ablation direction, determinism, entropy bounds, and the
//! untrained chance baseline. Each prints one PASS/FAIL line; the test fails
//! if any criterion does.

use std::time::{Duration, Instant};

use ucdir::clustering::kmeans;
use ucdir::data::{generate, Dataset, GeneratorSpec};
use ucdir::encoder::init_params;
use ucdir::evaluation::evaluate_both;
use ucdir::losses::Variant;
use ucdir::seeding::derive_seed;
use ucdir::training::{train, EvalSettings, TrainConfig};
use ucdir::verify::{
    check_cosine_schedule, check_distance_order_invariance, check_dd_permutation_invariance,
    check_entropy_bounds, check_gradients, check_kmeans_oracle, check_lambda_schedule,
    check_precision_oracle, check_shared_centroid_dd, check_singleton_reduction,
};

struct Criterion {
    number: usize,
    name: &'static str,
    passed: bool,
    detail: String,
    elapsed: Duration,
}

impl Criterion {
    fn line(&self) -> String {
        format!(
            "ACCEPTANCE {} {}: {} ({:.1}s) — {}",
            self.number,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

fn run(number: usize, name: &'static str, f: impl FnOnce() -> (bool, String)) -> Criterion {
    let start = Instant::now();
    let (passed, detail) = f();
    Criterion {
        number,
        name,
        passed,
        detail,
        elapsed: start.elapsed(),
    }
}

/// The benchmark dataset: the default generator (five classes, 200 samples
/// per class per domain, 32 input dims, moderate rotation+bias+tanh shift on
/// domain B) with the within-class noise widened to 0.3 so retrieval
/// precision degrades smoothly instead of jumping in whole-class steps.
fn benchmark_spec(seed: u64) -> GeneratorSpec {
    GeneratorSpec {
        noise_sigma: 0.3,
        seed,
        ..GeneratorSpec::default()
    }
}

/// Desk-scale training protocol for the ablation: 60 epochs at batch 32 with
/// a learning rate sized for a fresh 2-layer MLP, cluster count equal to the
/// class count.
fn ablation_config(variant: Variant, seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig {
        epochs: 60,
        batch_size: 32,
        lr0: 0.02,
        layer_dims: vec![32, 32, 16],
        k: 5,
        seed,
        ..TrainConfig::default()
    };
    variant.apply(&mut cfg.loss);
    cfg
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    xs[xs.len() / 2]
}

fn final_p1(dataset: &Dataset, cfg: &TrainConfig) -> f64 {
    let dir = tempfile::tempdir().expect("tempdir");
    let eval = EvalSettings {
        ks: vec![1],
        interval: cfg.epochs,
    };
    let summary = train(dataset, cfg, &eval, dir.path()).expect("training run");
    summary.final_precision.expect("final epoch evaluates")[&1]
}

fn criterion_order_invariance() -> Criterion {
    run(1, "order-invariance", || {
        let dist = check_distance_order_invariance(11, 1000);
        let ddp = check_dd_permutation_invariance(11, 100);
        let within_budget = dist.millis + ddp.millis < 5000;
        (
            dist.passed && ddp.passed && within_budget,
            format!(
                "distance worst {:.2e} (<1e-12), dd worst {:.2e} (<1e-10), {} ms",
                dist.worst,
                ddp.worst,
                dist.millis + ddp.millis
            ),
        )
    })
}

fn criterion_gradients() -> Criterion {
    run(2, "gradient-correctness", || {
        let start = Instant::now();
        let reports = check_gradients(11);
        let worst = reports.iter().map(|r| r.worst).fold(0.0, f64::max);
        let all = reports.iter().all(|r| r.passed);
        let within_budget = start.elapsed() < Duration::from_secs(30);
        (
            all && within_budget,
            format!(
                "worst relative error {worst:.2e} (<1e-4) across {} losses",
                reports.len()
            ),
        )
    })
}

fn criterion_reductions() -> Criterion {
    run(3, "reduction-identities", || {
        let singleton = check_singleton_reduction(11);
        let shared = check_shared_centroid_dd(11);
        (
            singleton.passed && shared.passed,
            format!(
                "singleton-cluster deviation {:.2e} (<1e-12), shared-centroid dd {:.2e} (<1e-10)",
                singleton.worst, shared.worst
            ),
        )
    })
}

fn criterion_oracles() -> Criterion {
    run(4, "oracle-equivalence", || {
        let km = check_kmeans_oracle(11);
        let pk = check_precision_oracle(11);
        (
            km.passed && pk.passed,
            format!(
                "kmeans {} (inertia gap {:.2e}), precision gap {:.2e} (<1e-12)",
                km.detail, km.worst, pk.worst
            ),
        )
    })
}

fn criterion_schedules() -> Criterion {
    run(5, "schedule-conformance", || {
        let lam = check_lambda_schedule();
        let lr = check_cosine_schedule();
        (
            lam.passed && lr.passed,
            format!(
                "lambda worst {:.2e}, cosine worst {:.2e} (each <1e-12)",
                lam.worst, lr.worst
            ),
        )
    })
}

fn criterion_ablation() -> Criterion {
    run(6, "ablation-direction", || {
        let start = Instant::now();
        let dataset = generate(&benchmark_spec(2024)).expect("benchmark dataset");
        let mut medians = Vec::new();
        for variant in [Variant::V1, Variant::V3, Variant::Full] {
            let p1s: Vec<f64> = (0..3)
                .map(|s| final_p1(&dataset, &ablation_config(variant, 100 + s)))
                .collect();
            medians.push(median(p1s));
        }
        let (v1, v3, full) = (medians[0], medians[1], medians[2]);
        let ordered = full >= v3 && v3 >= v1;
        let margin = full - v1;
        let within_budget = start.elapsed() < Duration::from_secs(900);
        (
            ordered && margin >= 0.05 && within_budget,
            format!(
                "median P@1 v1 {v1:.3}, v3 {v3:.3}, full {full:.3}; full-v1 {margin:+.3} (needs >= +0.050), {:.0}s",
                start.elapsed().as_secs_f64()
            ),
        )
    })
}

fn criterion_determinism() -> Criterion {
    run(7, "determinism", || {
        let spec = GeneratorSpec {
            per_class: 30,
            ..benchmark_spec(7)
        };
        let dataset = generate(&spec).expect("dataset");
        let cfg = TrainConfig {
            epochs: 8,
            ..ablation_config(Variant::Full, 5)
        };
        let eval = EvalSettings {
            ks: vec![1, 5, 15],
            interval: 2,
        };
        let run_once = || {
            let dir = tempfile::tempdir().expect("tempdir");
            let summary = train(&dataset, &cfg, &eval, dir.path()).expect("training run");
            std::fs::read(&summary.metrics).expect("metrics file")
        };
        let first = run_once();
        let second = run_once();
        let same = first == second;
        (
            same,
            format!(
                "two 8-epoch runs, metrics files {} ({} bytes)",
                if same { "byte-identical" } else { "DIFFER" },
                first.len()
            ),
        )
    })
}

fn criterion_entropy() -> Criterion {
    run(8, "entropy-bounds", || {
        let rep = check_entropy_bounds(11, 10_000);
        (
            rep.passed,
            format!("worst bound violation {:.2e} (<1e-12) over 10000 vectors", rep.worst),
        )
    })
}

fn criterion_chance_baseline() -> Criterion {
    run(9, "chance-baseline", || {
        let dataset = generate(&benchmark_spec(2024)).expect("benchmark dataset");
        let chance = 1.0 / 5.0;
        let mut p1s = Vec::new();
        for seed in 0..5u64 {
            let params = init_params(&[32, 32, 16], derive_seed(seed, "untrained-probe", 0))
                .expect("init");
            let (_, _, mean) = evaluate_both(&params, &dataset, &[1]).expect("evaluation");
            p1s.push(mean[&1]);
        }
        let mean_p1 = p1s.iter().sum::<f64>() / p1s.len() as f64;
        let gap = (mean_p1 - chance).abs();
        (
            gap <= 0.15,
            format!(
                "untrained P@1 per seed {:?}, mean {:.3}, |gap to 0.2| {:.3} (<= 0.150)",
                p1s.iter().map(|p| (p * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
                mean_p1,
                gap
            ),
        )
    })
}

#[test]
fn acceptance_gate() {
    // Exercised here so the suite covers the clusterer wired into training,
    // not only the verify fixtures: spot-check a real clustering run.
    let spec = GeneratorSpec {
        per_class: 20,
        ..benchmark_spec(3)
    };
    let ds = generate(&spec).expect("dataset");
    let params = init_params(&[32, 32, 16], 9).expect("init");
    let feats = ucdir::encoder::encode(
        &params,
        &ds.samples_a.iter().map(|s| s.raw.clone()).collect::<Vec<_>>(),
    )
    .expect("encode");
    kmeans(&feats, 5, 1).expect("clustering the benchmark features succeeds");

    let criteria = vec![
        criterion_order_invariance(),
        criterion_gradients(),
        criterion_reductions(),
        criterion_oracles(),
        criterion_schedules(),
        criterion_ablation(),
        criterion_determinism(),
        criterion_entropy(),
        criterion_chance_baseline(),
    ];

    let mut all_passed = true;
    for c in &criteria {
        println!("{}", c.line());
        all_passed &= c.passed;
    }
    assert!(
        all_passed,
        "acceptance criteria failed:\n{}",
        criteria
            .iter()
            .filter(|c| !c.passed)
            .map(Criterion::line)
            .collect::<Vec<_>>()
            .join("\n")
    );
}
