//! Acceptance suite: one test per release criterion, each printing a single
//! PASS/FAIL line with the measured values behind the verdict.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use streamforest_core::eval::{
    build_model, convergence_index, drift_recovery_trace, run_prequential, MetricConfig,
    ModelKind, PrequentialReport,
};
use streamforest_core::forest::{
    combine_classification, confidence, min_learners_for_confidence, prediction_correct,
    ImpactController,
};
use streamforest_core::hoeffding::{hoeffding_epsilon, HoeffdingBoundParams};
use streamforest_core::streams::{
    generate_redundant_sensors, generate_waveform, inject_drift, DriftKind, DriftSpec,
    DriftTransform, StreamSource,
};
use streamforest_core::types::{Prediction, RunConfig, Target};

#[path = "acceptance/properties.rs"]
mod properties;

fn report(criterion: usize, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion} ({name}): {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} ({name}) failed: {detail}");
}

fn run_model(
    kind: ModelKind,
    source: StreamSource,
    cfg: &RunConfig,
    metric: &MetricConfig,
) -> PrequentialReport {
    let schema = source.schema().clone();
    let mut model = build_model(kind, schema, cfg.clone()).unwrap();
    run_prequential(model.as_mut(), source, cfg, metric).unwrap()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn pop_stddev(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

// --- criterion 1: Hoeffding bound closed form + monotonicity ------------

#[test]
fn c1_hoeffding_bound_grid() {
    let e2 = (-2.0f64).exp();
    let rs = [1.0, (3.0f64).log2(), 3.0];
    let deltas = [e2, 1e-7];
    let ns: [u64; 5] = [1, 4, 37, 1000, 1_000_000];

    let mut worst_rel: f64 = 0.0;
    let mut points = 0;
    for &r in &rs {
        for &delta in &deltas {
            for &n in &ns {
                let got = hoeffding_epsilon(HoeffdingBoundParams::new(r, delta, n).unwrap());
                // Independent arithmetic path: R * sqrt(ln(1/d)) / sqrt(2n).
                let oracle = r * (1.0 / delta).ln().sqrt() / ((2 * n) as f64).sqrt();
                worst_rel = worst_rel.max(((got - oracle) / oracle).abs());
                points += 1;
            }
        }
    }
    let anchors_ok = {
        let a = hoeffding_epsilon(HoeffdingBoundParams::new(1.0, e2, 1).unwrap());
        let b = hoeffding_epsilon(HoeffdingBoundParams::new(1.0, e2, 4).unwrap());
        (a - 1.0).abs() < 1e-12 && (b - 0.5).abs() < 1e-12
    };
    // Monotone: decreasing in n, increasing in R, increasing as delta shrinks.
    let mut monotone = true;
    for &r in &rs {
        for &delta in &deltas {
            for w in ns.windows(2) {
                let hi = hoeffding_epsilon(HoeffdingBoundParams::new(r, delta, w[0]).unwrap());
                let lo = hoeffding_epsilon(HoeffdingBoundParams::new(r, delta, w[1]).unwrap());
                monotone &= lo < hi;
            }
        }
    }
    for &n in &ns {
        for w in rs.windows(2) {
            let lo = hoeffding_epsilon(HoeffdingBoundParams::new(w[0], 1e-7, n).unwrap());
            let hi = hoeffding_epsilon(HoeffdingBoundParams::new(w[1], 1e-7, n).unwrap());
            monotone &= lo < hi;
        }
        let loose = hoeffding_epsilon(HoeffdingBoundParams::new(1.0, e2, n).unwrap());
        let tight = hoeffding_epsilon(HoeffdingBoundParams::new(1.0, 1e-7, n).unwrap());
        monotone &= tight > loose;
    }
    report(
        1,
        "hoeffding bound",
        points == 30 && worst_rel < 1e-12 && anchors_ok && monotone,
        &format!(
            "{points}-point grid, worst relative error {worst_rel:.2e}, anchors {anchors_ok}, monotone {monotone}"
        ),
    );
}

// --- criterion 2: ensemble confidence vs Monte Carlo --------------------

#[test]
fn c2_confidence_monte_carlo() {
    const TRIALS: usize = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_817);
    let mut worst_z: f64 = 0.0;
    // n values are perfect squares so m*sqrt(n) is an exact draw count.
    for &n in &[4usize, 16, 64] {
        let root = (n as f64).sqrt() as usize;
        for &m in &[1usize, 10, 100] {
            let draws = m * root;
            let mut hits = 0usize;
            for _ in 0..TRIALS {
                for _ in 0..draws {
                    if rng.gen_range(0..n) == 0 {
                        hits += 1;
                        break;
                    }
                }
            }
            let p = confidence(n, m);
            let estimate = hits as f64 / TRIALS as f64;
            let se = (p * (1.0 - p) / TRIALS as f64).sqrt();
            // A fully saturated cell (p within 1/TRIALS of 1) has ~zero SE;
            // demand exact agreement there instead of dividing by it.
            let z = if se < 1e-9 {
                if (estimate - p).abs() < 1e-4 { 0.0 } else { f64::INFINITY }
            } else {
                (estimate - p).abs() / se
            };
            worst_z = worst_z.max(z);
        }
    }
    let mut monotone = true;
    for n in 1..=1024usize {
        let mut prev = confidence(n, 1);
        for m in 2..=1024usize {
            let cur = confidence(n, m);
            monotone &= cur >= prev;
            prev = cur;
        }
    }
    report(
        2,
        "eq. 8 confidence",
        worst_z <= 3.0 && monotone,
        &format!("worst |z| {worst_z:.2} over 9 cells x {TRIALS} trials, monotone grid {monotone}"),
    );
}

// --- criterion 3: Algorithm 1 golden trace ------------------------------

#[test]
fn c3_impact_controller_golden_trace() {
    // Scripted per-tree outputs: (weak classes, main class, truth), with the
    // expected branch, emitted class, window sum after the update, and
    // whether a drift event fires. Hand-stepped with d=0.2, k=15 (so the
    // ensemble is used only while sum(W) > 3, strictly) and the window
    // initialized to all ones.
    struct Step {
        weak: [usize; 4],
        main: usize,
        truth: usize,
        expect_ensemble: bool,
        expect_emitted: usize,
        expect_sum_after: usize,
        expect_drift: bool,
    }
    let mut script: Vec<Step> = Vec::new();
    // Samples 0-4: everyone agrees and is right; the all-ones window keeps
    // the ensemble branch and the sum pinned at 15.
    for _ in 0..5 {
        script.push(Step {
            weak: [1, 1, 1, 1],
            main: 1,
            truth: 1,
            expect_ensemble: true,
            expect_emitted: 1,
            expect_sum_after: 15,
            expect_drift: false,
        });
    }
    // Samples 5-19: unanimous wrong answers drain the window one entry per
    // sample. The branch flips to the main tree at sample 17, when the sum
    // before the update is exactly 3 (strict comparison).
    for i in 0..15usize {
        script.push(Step {
            weak: [0, 0, 0, 0],
            main: 0,
            truth: 2,
            expect_ensemble: i < 12,
            expect_emitted: 0,
            expect_sum_after: 14 - i,
            expect_drift: false,
        });
    }
    // Samples 20-27: ensemble right, main wrong, but the drained window
    // keeps the (wrong) main tree on the output. The disagreement window
    // accumulates a one per sample and crosses 0.5 at its 8th entry
    // (8/15), firing the drift event at sample 27.
    for i in 0..8usize {
        script.push(Step {
            weak: [2, 2, 2, 2],
            main: 0,
            truth: 2,
            expect_ensemble: false,
            expect_emitted: 0,
            expect_sum_after: 0,
            expect_drift: i == 7,
        });
    }
    // Samples 28-29: main recovers; weak learners split 0/0/1/1 so the
    // ensemble vote ties between 0 and 1 and resolves to class 0 (not the
    // truth), but the main branch emits the correct class 2.
    for i in 0..2usize {
        script.push(Step {
            weak: [0, 0, 1, 1],
            main: 2,
            truth: 2,
            expect_ensemble: false,
            expect_emitted: 2,
            expect_sum_after: i + 1,
            expect_drift: false,
        });
    }
    assert_eq!(script.len(), 30);

    let pred = |class: usize| Prediction::Classification {
        class,
        votes: vec![0.0; 3],
    };
    let mut controller = ImpactController::new(0.2, 15, 0.5);
    let mut failures = Vec::new();
    for (i, step) in script.iter().enumerate() {
        let weak: Vec<Prediction> = step.weak.iter().map(|&c| pred(c)).collect();
        let main = pred(step.main);
        let ensemble = combine_classification(&weak, &main);
        let used_ensemble = controller.use_ensemble();
        let emitted = if used_ensemble { ensemble.clone() } else { main.clone() };
        let truth = Target::Class(step.truth);
        let emitted_correct = prediction_correct(&emitted, &truth, 0.1);
        controller.record_outcome(emitted_correct);
        let drift = controller.record_disagreement(
            prediction_correct(&ensemble, &truth, 0.1),
            prediction_correct(&main, &truth, 0.1),
            i as u64,
        );
        let ok = used_ensemble == step.expect_ensemble
            && emitted.class() == Some(step.expect_emitted)
            && controller.window().sum() == step.expect_sum_after
            && drift.is_some() == step.expect_drift;
        if !ok {
            failures.push(format!(
                "sample {i}: ensemble {used_ensemble}/{}, emitted {:?}/{}, sum {}/{}, drift {}/{}",
                step.expect_ensemble,
                emitted.class(),
                step.expect_emitted,
                controller.window().sum(),
                step.expect_sum_after,
                drift.is_some(),
                step.expect_drift
            ));
        }
        if let Some(ev) = drift {
            if (ev.disagreement_fraction - 8.0 / 15.0).abs() > 1e-12 || ev.sample_index != 27 {
                failures.push(format!("drift event fields: {ev:?}"));
            }
        }
    }
    // Final window contents: 13 misses then the two recovered samples.
    let tail = controller.window().contents();
    if tail != [vec![false; 13], vec![true; 2]].concat() {
        failures.push(format!("final window {tail:?}"));
    }
    report(
        3,
        "algorithm 1 golden trace",
        failures.is_empty(),
        &format!("30 scripted samples; deviations: {failures:?}"),
    );
}

// --- criterion 4: waveform accuracy bands -------------------------------

#[test]
fn c4_waveform_accuracy() {
    let m = min_learners_for_confidence(21, 0.99).unwrap();
    let metric = MetricConfig::default();
    let mut singles = Vec::new();
    let mut hybrids = Vec::new();
    for seed in 0..10u64 {
        let cfg = RunConfig {
            weak_learner_count: m,
            d_hybrid_impact: 0.2,
            k_window_size: 15,
            rng_seed: seed,
            ..RunConfig::default()
        };
        let s = run_model(ModelKind::Single, generate_waveform(5000, seed), &cfg, &metric);
        let h = run_model(ModelKind::Hybrid, generate_waveform(5000, seed), &cfg, &metric);
        singles.push(s.final_cumulative_accuracy().unwrap());
        hybrids.push(h.final_cumulative_accuracy().unwrap());
    }
    let (sm, hm, hs) = (mean(&singles), mean(&hybrids), pop_stddev(&hybrids));
    let pass = (0.67..=0.78).contains(&sm) && hm >= sm + 0.02 && hs <= 0.05;
    report(
        4,
        "waveform accuracy",
        pass,
        &format!(
            "m={m}; single mean {sm:.4} (band 0.67..0.78), hybrid mean {hm:.4} (gap {:+.4}, need >= +0.02), hybrid stddev {hs:.4} (cap 0.05)",
            hm - sm
        ),
    );
}

// --- criterion 5: regression convergence ordering -----------------------

#[test]
fn c5_regression_convergence_ordering() {
    // The public abalone file is not bundled; per the criterion's fallback
    // this uses the synthetic redundant-sensor regression stream at the
    // same scale and asserts the convergence ordering only.
    let metric = MetricConfig::default();
    let mut lines = Vec::new();
    let mut pass = true;
    for seed in 0..5u64 {
        let cfg = RunConfig {
            rng_seed: seed,
            ..RunConfig::default()
        };
        let stream = |sd| generate_redundant_sensors(4177, 0.12, sd);
        let s = run_model(ModelKind::Single, stream(seed), &cfg, &metric);
        let h = run_model(ModelKind::Hybrid, stream(seed), &cfg, &metric);
        let sc = convergence_index(&s, 0.9);
        let hc = convergence_index(&h, 0.9);
        let ok = matches!((hc, sc), (Some(h), Some(s)) if h < s);
        pass &= ok;
        lines.push(format!("seed {seed}: hybrid {hc:?} vs single {sc:?}"));
    }
    report(
        5,
        "regression convergence",
        pass,
        &format!("threshold 0.90, w=200, 5 seeds: {}", lines.join("; ")),
    );
}

// --- criterion 6: drift detection and recovery --------------------------

#[test]
fn c6_drift_detection_and_recovery() {
    // Detector configuration: k and the drift threshold are free knobs per
    // the criterion; these values give the detector a full controller
    // window of post-drift evidence (bound 2*k*10 = 2200 samples).
    let k = 110usize;
    let bound = 2 * k * 10;
    let spec = DriftSpec {
        kind: DriftKind::Abrupt { at: 10_000 },
        transform: DriftTransform::class_swap(0, 1, 3),
    };
    let metric = MetricConfig::default();
    let mut latency_ok = true;
    let mut dip_ok = true;
    let mut lines = Vec::new();
    for seed in 0..5u64 {
        let cfg = RunConfig {
            weak_learner_count: 40,
            k_window_size: k,
            drift_threshold: 0.25,
            d_hybrid_impact: 0.2,
            rng_seed: seed,
            ..RunConfig::default()
        };
        let stream =
            |sd| inject_drift(generate_waveform(20_000, sd), spec.clone(), sd).unwrap();
        let s = run_model(ModelKind::Single, stream(seed), &cfg, &metric);
        let h = run_model(ModelKind::Hybrid, stream(seed), &cfg, &metric);
        let rh = drift_recovery_trace(&h, &spec);
        let rs = drift_recovery_trace(&s, &spec);
        latency_ok &= rh.detection_latency.is_some_and(|l| l <= bound);
        dip_ok &= rh.accuracy_dip < rs.accuracy_dip;
        lines.push(format!(
            "seed {seed}: latency {:?} (bound {bound}), hybrid dip {:.3} vs single dip {:.3}",
            rh.detection_latency, rh.accuracy_dip, rs.accuracy_dip
        ));
    }
    report(
        6,
        "drift handling",
        latency_ok && dip_ok,
        &format!(
            "detection within bound: {latency_ok}; hybrid dip < single dip: {dip_ok}; {}",
            lines.join("; ")
        ),
    );
}

// --- criterion 7: degenerate equivalences -------------------------------

#[test]
fn c7_degenerate_equivalences() {
    use streamforest_core::forest::RandomForest;
    use streamforest_core::hoeffding::HoeffdingTreeClassifier;

    let instances = generate_waveform(1000, 9).collect_instances().unwrap();
    let schema = streamforest_core::streams::waveform_schema();

    // m = 0 hybrid against a bare single tree, bit-exact predictions.
    let cfg0 = RunConfig {
        weak_learner_count: 0,
        rng_seed: 9,
        ..RunConfig::default()
    };
    let mut hybrid =
        streamforest_core::forest::HybridForest::new(schema.clone(), cfg0.clone()).unwrap();
    let mut bare = HoeffdingTreeClassifier::new(schema.clone(), cfg0);
    let mut m0_exact = true;
    for inst in &instances {
        let expect = bare.predict(inst);
        let got = hybrid.step(inst).unwrap().emitted;
        m0_exact &= got == expect;
        bare.train(inst);
    }

    // m = 1 random forest against its lone weak tree.
    let cfg1 = RunConfig {
        weak_learner_count: 1,
        rng_seed: 9,
        ..RunConfig::default()
    };
    let mut rf = RandomForest::new(schema.clone(), cfg1.clone()).unwrap();
    let bag = rf.bags()[0].clone();
    let mut lone = HoeffdingTreeClassifier::new(schema.project(&bag.features), cfg1);
    let mut m1_exact = true;
    for inst in &instances {
        let projected = inst.project(&bag.features);
        let expect = lone.predict(&projected);
        let got = rf.step(inst).unwrap();
        m1_exact &= got == expect;
        lone.train(&projected);
    }

    report(
        7,
        "degenerate equivalences",
        m0_exact && m1_exact,
        &format!("1000 samples: m=0 hybrid == single {m0_exact}, m=1 rf == lone weak tree {m1_exact}"),
    );
}

// --- criterion 8: memory ordering ---------------------------------------

#[test]
fn c8_memory_ordering() {
    let metric = MetricConfig::default();
    let cfg = RunConfig {
        weak_learner_count: 100,
        rng_seed: 3,
        ..RunConfig::default()
    };
    let single = run_model(ModelKind::Single, generate_waveform(5000, 3), &cfg, &metric);
    let rf = run_model(ModelKind::RandomForest, generate_waveform(5000, 3), &cfg, &metric);
    let hybrid = run_model(ModelKind::Hybrid, generate_waveform(5000, 3), &cfg, &metric);
    let (s, r, h) = (
        single.final_memory_estimate().unwrap() as f64,
        rf.final_memory_estimate().unwrap() as f64,
        hybrid.final_memory_estimate().unwrap() as f64,
    );
    let additive = (h - (r + s)).abs() <= 0.10 * (r + s);
    let pass = s < r && r <= h && additive;
    report(
        8,
        "memory ordering",
        pass,
        &format!(
            "m=100 on 5000 waveform samples: single {s:.0} < rf {r:.0} <= hybrid {h:.0}, hybrid vs rf+single {:.2}% (cap 10%)",
            100.0 * (h - (r + s)).abs() / (r + s)
        ),
    );
}

// --- criterion 9: property suites ---------------------------------------

#[test]
fn c9_property_suites() {
    let summary = properties::run_all();
    let pass = summary.iter().all(|(_, _, ok)| *ok);
    let detail: Vec<String> = summary
        .iter()
        .map(|(module, cases, ok)| format!("{module} ({cases} cases): {}", if *ok { "ok" } else { "FAILED" }))
        .collect();
    report(9, "property suites", pass, &detail.join("; "));
}
