//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::{oracle_fdm, oracle_logits, oracle_posterior, random_instance, relative_error, Lcg};
use gazepool_core::eval::{
    fixation_count_curve, noise_sweep, run_condition, sigma_sweep, synth_dataset, table1, Condition,
    EvalReport, Suite, SynthSpec,
};
use gazepool_core::io::report::{render_curve, render_noise, render_reports, OutputFormat};
use gazepool_core::io::tensor::{decode, encode, read_tensor, Tensor};
use gazepool_core::{
    acam, build_fdm, class_activation_map, classify, gap, gaze_weighted_feature_map, integrate,
    predict_image, DensityMode, EncodingConfig, FixationDensityMap, FixationPooling,
    FormatError, GridPoint, ImageEvidence, IntegrationConfig, TaskKind,
};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn encoding(sigma: f64, max_pooling: bool) -> EncodingConfig {
    let pooling = if max_pooling { FixationPooling::Max } else { FixationPooling::Avg };
    EncodingConfig::with_truncation(sigma, 3.0 * sigma, pooling).unwrap()
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = Lcg(0x5eed_0001);
    let mut worst = 0.0f64;
    for i in 0..200 {
        let kind = if i % 4 == 3 { TaskKind::Attribute } else { TaskKind::Category };
        let inst = random_instance(&mut rng, kind);
        let grid = inst.features.grid();
        let points: Vec<GridPoint> = inst.points.iter().map(|&(u, v)| GridPoint::new(u, v)).collect();
        let fdm = build_fdm(&points, grid, &encoding(inst.sigma, inst.max_pooling)).unwrap();
        let got = predict_image(&inst.features, &fdm, &inst.head).unwrap();
        let reference = oracle_fdm(&inst.points, grid.height, grid.width, inst.sigma, inst.max_pooling);
        let want = oracle_posterior(&inst.features, &reference, &inst.head);
        check(got.posteriors().len() == want.len(), || format!("instance {i}: length"))?;
        for (a, b) in got.posteriors().iter().zip(&want) {
            worst = worst.max(relative_error(*a, *b));
        }
    }
    let elapsed = start.elapsed();
    check(worst <= 1e-6, || format!("max relative error {worst:.3e} > 1e-6"))?;
    check(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("200 instances, max relative error {worst:.2e}, {elapsed:.2?}"))
}

fn uniform_reduction() -> Outcome {
    let mut rng = Lcg(0x5eed_0002);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let inst = random_instance(&mut rng, TaskKind::Category);
        let uniform = FixationDensityMap::uniform(inst.features.grid());
        let gazed = predict_image(&inst.features, &uniform, &inst.head).unwrap();
        let plain = classify(&gap(&inst.features), &inst.head).unwrap();
        for (a, b) in gazed.posteriors().iter().zip(plain.posteriors()) {
            worst = worst.max((a - b).abs());
        }
        let gwfm = gaze_weighted_feature_map(&inst.features, &uniform).unwrap();
        for label in inst.head.labels() {
            let a = acam(&gwfm, &inst.head, label).unwrap();
            let c = class_activation_map(&inst.features, &inst.head, label).unwrap();
            for (x, y) in a.data().iter().zip(c.data()) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    check(worst <= 1e-7, || format!("max deviation {worst:.3e} > 1e-7"))?;
    Ok(format!("100 instances, max deviation {worst:.2e}"))
}

fn acam_identity() -> Outcome {
    let mut rng = Lcg(0x5eed_0003);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let kind = if i % 2 == 0 { TaskKind::Category } else { TaskKind::Attribute };
        let inst = random_instance(&mut rng, kind);
        let grid = inst.features.grid();
        let points: Vec<GridPoint> = inst.points.iter().map(|&(u, v)| GridPoint::new(u, v)).collect();
        let fdm = build_fdm(&points, grid, &encoding(inst.sigma, inst.max_pooling)).unwrap();
        let gwfm = gaze_weighted_feature_map(&inst.features, &fdm).unwrap();
        let z = oracle_logits(&inst.features, fdm.data(), &inst.head);
        for (class, label) in inst.head.labels().iter().enumerate() {
            let map = acam(&gwfm, &inst.head, label).unwrap();
            let row = match kind {
                TaskKind::Category => class,
                TaskKind::Attribute => 2 * class + 1,
            };
            let b = inst.head.bias()[row] as f64;
            worst = worst.max((map.mean() + b - z[row]).abs());
        }
    }
    check(worst <= 1e-5, || format!("max |mean + b - logit| {worst:.3e} > 1e-5"))?;
    Ok(format!("100 instances, max |mean + b - logit| {worst:.2e}"))
}

fn integration_properties() -> Outcome {
    let mut rng = Lcg(0x5eed_0004);
    let dur = IntegrationConfig::new(DensityMode::Local, true);
    let flat = IntegrationConfig::new(DensityMode::Local, false);
    for set in 0..100 {
        let k = 2 + rng.below(5);
        let n = 1 + rng.below(6);
        let evidence: Vec<ImageEvidence> = (0..n)
            .map(|i| {
                let raw: Vec<f64> = (0..k).map(|_| rng.range(0.01, 1.0)).collect();
                let t: f64 = raw.iter().sum();
                let p = raw.iter().map(|v| v / t).collect();
                ImageEvidence::new(format!("i{i}"), p, rng.range(50.0, 900.0), 1).unwrap()
            })
            .collect();
        for cfg in [dur, flat] {
            let out = integrate(&evidence, cfg).unwrap();
            for c in 0..k {
                let lo = evidence.iter().map(|e| e.posterior()[c]).fold(f64::INFINITY, f64::min);
                let hi = evidence.iter().map(|e| e.posterior()[c]).fold(f64::NEG_INFINITY, f64::max);
                let v = out.posterior[c];
                check(v >= lo - 1e-12 && v <= hi + 1e-12, || format!("set {set}: class {c} outside hull"))?;
            }
            let mut reversed = evidence.clone();
            reversed.reverse();
            let rev = integrate(&reversed, cfg).unwrap();
            for (a, b) in out.posterior.iter().zip(&rev.posterior) {
                check((a - b).abs() <= 1e-12, || format!("set {set}: order dependence {:.3e}", (a - b).abs()))?;
            }
        }
        let factor = rng.range(0.1, 50.0);
        let scaled: Vec<ImageEvidence> = evidence
            .iter()
            .map(|e| ImageEvidence::new(e.image_id(), e.posterior().to_vec(), e.duration_ms() * factor, 1).unwrap())
            .collect();
        let a = integrate(&evidence, dur).unwrap();
        let b = integrate(&scaled, dur).unwrap();
        for (x, y) in a.posterior.iter().zip(&b.posterior) {
            check((x - y).abs() <= 1e-12, || format!("set {set}: duration scale changed result"))?;
        }
    }
    let hand = [
        ImageEvidence::new("a", vec![1.0, 0.0], 1.0, 1).unwrap(),
        ImageEvidence::new("b", vec![0.0, 1.0], 3.0, 1).unwrap(),
    ];
    let out = integrate(&hand, dur).unwrap();
    check(
        (out.posterior[0] - 0.25).abs() <= 1e-9 && (out.posterior[1] - 0.75).abs() <= 1e-9,
        || format!("hand case gave {:?}", out.posterior),
    )?;
    Ok("100 evidence sets; hand case (0.25, 0.75)".into())
}

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn suites() -> Vec<Suite> {
    SEEDS
        .iter()
        .map(|&seed| synth_dataset(&SynthSpec { seed, ..SynthSpec::default() }).unwrap())
        .collect()
}

fn evaluate_all(suites: &[Suite], cond: &Condition) -> f64 {
    let total: f64 = suites
        .iter()
        .map(|s| {
            let ctx = s.context(TaskKind::Category).unwrap();
            run_condition(&ctx, &s.trials, cond).unwrap().top1()
        })
        .sum();
    total / suites.len() as f64
}

fn ablation_ordering(suites: &mut Vec<Suite>) -> Outcome {
    let start = Instant::now();
    *suites = self::suites();
    let mut mean = [0.0f64; 4];
    for s in suites.iter() {
        let ctx = s.context(TaskKind::Category).unwrap();
        let rows = table1(&ctx, &s.trials, &Condition::default()).unwrap();
        for (m, r) in mean.iter_mut().zip(&rows) {
            *m += r.top1() / SEEDS.len() as f64;
        }
    }
    let elapsed = start.elapsed();
    let [global, local, global_dur, local_dur] = mean;
    let summary = format!(
        "Global {:.1}%, Local {:.1}%, Global+duration {:.1}%, Local+duration {:.1}%, {elapsed:.2?}",
        100.0 * global,
        100.0 * local,
        100.0 * global_dur,
        100.0 * local_dur
    );
    check(local_dur > global_dur && global_dur > global && local > global, || format!("ordering violated: {summary}"))?;
    check(local_dur - global >= 0.15, || format!("gap below 15pp: {summary}"))?;
    check(elapsed < Duration::from_secs(120), || format!("too slow: {summary}"))?;
    Ok(summary)
}

fn sigma_range(suites: &[Suite], base: &Condition) -> (Vec<f64>, f64) {
    let mut per_sigma = vec![0.0f64; EncodingConfig::SIGMA_SWEEP.len()];
    for s in suites {
        let ctx = s.context(TaskKind::Category).unwrap();
        let reports = sigma_sweep(&ctx, &s.trials, base, &EncodingConfig::SIGMA_SWEEP).unwrap();
        for (acc, r) in per_sigma.iter_mut().zip(&reports) {
            *acc += r.top1() / suites.len() as f64;
        }
    }
    let lo = per_sigma.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = per_sigma.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (per_sigma, hi - lo)
}

fn no_duration() -> Condition {
    Condition::default().with_integration(IntegrationConfig::new(DensityMode::Local, false))
}

fn sigma_insensitivity(suites: &[Suite]) -> Outcome {
    let (per_sigma, range) = sigma_range(suites, &Condition::default());
    let summary = format!(
        "Top-1 over sigma {:?}, range {:.2}pp",
        per_sigma.iter().map(|v| format!("{:.3}", v)).collect::<Vec<_>>(),
        100.0 * range
    );
    check(range <= 0.05, || summary.clone())?;
    // Informational: the same sweep away from the accuracy ceiling.
    let (_, local_range) = sigma_range(suites, &no_duration());
    Ok(format!("{summary} (Local without duration: range {:.2}pp)", 100.0 * local_range))
}

fn pooling_order(suites: &[Suite]) -> Outcome {
    let avg = evaluate_all(suites, &Condition::default());
    let max = evaluate_all(
        suites,
        &Condition {
            encoding: EncodingConfig::default().with_pooling(FixationPooling::Max),
            ..Condition::default()
        },
    );
    let summary = format!("avg {:.2}%, max {:.2}%", 100.0 * avg, 100.0 * max);
    check(avg >= max - 0.02, || summary.clone())?;
    let avg_local = evaluate_all(suites, &no_duration());
    let max_local = evaluate_all(
        suites,
        &Condition {
            encoding: EncodingConfig::default().with_pooling(FixationPooling::Max),
            ..no_duration()
        },
    );
    Ok(format!(
        "{summary} (Local without duration: avg {:.2}%, max {:.2}%)",
        100.0 * avg_local,
        100.0 * max_local
    ))
}

fn noise_robustness(suites: &[Suite]) -> Outcome {
    let s = &suites[0];
    let ctx = s.context(TaskKind::Category).unwrap();
    let levels = [0.0, 60.0, 120.0, 200.0];
    let local = IntegrationConfig::new(DensityMode::Local, true);
    let global = IntegrationConfig::new(DensityMode::Global, true);
    let points = noise_sweep(&ctx, &s.trials, &Condition::default(), &[local, global], &levels, 20, 11).unwrap();
    let curve = |cfg: IntegrationConfig| -> Vec<f64> {
        points
            .iter()
            .filter(|p| p.condition == cfg.to_string())
            .map(|p| p.top1())
            .collect()
    };
    let (l, g) = (curve(local), curve(global));
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{:.3}", x)).collect::<Vec<_>>().join("/");
    let summary = format!("local {} global {} over {:?}px", fmt(&l), fmt(&g), levels);
    for (name, c) in [("local", &l), ("global", &g)] {
        check(c.windows(2).all(|w| w[1] <= w[0]), || format!("{name} not non-increasing: {summary}"))?;
    }
    check(l.iter().zip(&g).all(|(a, b)| a > b), || format!("local not above global: {summary}"))?;
    let drop = l[0] - l[3];
    check(drop <= 0.15, || format!("local drop {:.1}pp > 15pp: {summary}", 100.0 * drop))?;
    Ok(format!("{summary}, local drop {:.1}pp", 100.0 * drop))
}

fn determinism_and_formats() -> Outcome {
    let spec = SynthSpec {
        participants: 3,
        collages_per_class: 2,
        seed: 5,
        ..SynthSpec::default()
    };
    let render = || {
        let s = synth_dataset(&spec).unwrap();
        let ctx = s.context(TaskKind::Category).unwrap();
        let base = Condition::default().with_noise(60.0, 3);
        let reports = table1(&ctx, &s.trials, &base).unwrap();
        let noise = noise_sweep(&ctx, &s.trials, &Condition::default(), &IntegrationConfig::TABLE1, &[0.0, 120.0], 2, 9).unwrap();
        let curve = fixation_count_curve(&ctx, &s.trials, &Condition::default(), 4).unwrap();
        [OutputFormat::Text, OutputFormat::Json, OutputFormat::Csv]
            .iter()
            .map(|&f| render_reports(&reports, f) + &render_noise(&noise, f) + &render_curve(&curve, f))
            .collect::<String>()
    };
    check(render() == render(), || "repeated seeded runs differ".into())?;

    let mut rng = Lcg(0x5eed_0009);
    let t = Tensor::new(vec![10, 14, 14], (0..1960).map(|_| rng.range(-1e3, 1e3) as f32).collect());
    let back = decode(&encode(&t)).unwrap();
    let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    check(back.dims == t.dims && bits(&back.data) == bits(&t.data), || "tensor round trip".into())?;

    let fixture = |name: &str| std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    let valid = read_tensor(&fixture("valid_v1.gzt")).map_err(|e| e.to_string())?;
    check(valid.dims == [2, 2, 3] && valid.data[10] == 111.0, || "golden fixture contents".into())?;
    for (name, code, text) in [
        ("bad_magic.gzt", "bad-magic", "bad magic at offset 0"),
        ("truncated.gzt", "payload-length-mismatch", "payload length mismatch at offset 20: expected 48 bytes, found 36"),
        ("crc_flip.gzt", "checksum-mismatch", "checksum mismatch at offset 68"),
    ] {
        let err = read_tensor(&fixture(name)).expect_err(name);
        let msg = err.to_string();
        check(err.code() == code && msg.contains(text) && msg.contains(name), || format!("{name}: {msg}"))?;
    }
    check(matches!(decode(b"GZ"), Err(FormatError::TruncatedHeader { .. })), || "short header".into())?;
    Ok("repeated runs byte-identical; tensor round trip bit-exact; 3 corrupt fixtures diagnosed".into())
}

fn fixation_curve(suites: &[Suite]) -> Outcome {
    let s = &suites[0];
    let ctx = s.context(TaskKind::Category).unwrap();
    let base = Condition::default();
    let longest = s.trials.iter().map(|t| t.log().fixations().len()).max().unwrap();
    let full = fixation_count_curve(&ctx, &s.trials, &base, longest).unwrap();
    let untruncated = run_condition(&ctx, &s.trials, &base).unwrap();
    let same = |a: &EvalReport, b: &EvalReport| a.accuracy == b.accuracy && a.per_participant == b.per_participant;
    check(same(&full[longest - 1].report, &untruncated), || "full-length prefix differs from untruncated run".into())?;
    let curve = fixation_count_curve(&ctx, &s.trials, &base, 12).unwrap();
    check(curve.len() == 12, || "curve length".into())?;
    let tops: Vec<String> = curve.iter().map(|p| format!("{:.2}", p.report.top1())).collect();
    Ok(format!("m = {longest} equals untruncated; Top-1 for m = 1..12: {}", tops.join(" ")))
}

fn main() {
    let mut suites = Vec::new();
    let mut failures = 0;
    let mut run = |id: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS  {id:>2} {name}: {detail}"),
            Err(detail) => {
                failures += 1;
                println!("FAIL  {id:>2} {name}: {detail}");
            }
        }
    };
    run(1, "oracle equivalence", &mut oracle_equivalence);
    run(2, "uniform-map reduction", &mut uniform_reduction);
    run(3, "attended CAM identity", &mut acam_identity);
    run(4, "collage integration properties", &mut integration_properties);
    run(5, "global/local and duration ablation", &mut || ablation_ordering(&mut suites));
    if suites.is_empty() {
        suites = self::suites();
    }
    run(6, "sigma insensitivity", &mut || sigma_insensitivity(&suites));
    run(7, "fixation pooling", &mut || pooling_order(&suites));
    run(8, "noise robustness", &mut || noise_robustness(&suites));
    run(9, "determinism and formats", &mut determinism_and_formats);
    run(10, "fixation-count curve", &mut || fixation_curve(&suites));
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
