use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use gazepool_core::eval::{run_condition, synth_dataset, Condition, SynthSpec};
use gazepool_core::{
    build_fdm, predict_image, run_collage, ClassifierHead, EncodingConfig, FeatureMap,
    FixationPooling, GridDims, GridPoint, IntegrationConfig, TaskKind,
};

fn points(n: usize) -> Vec<GridPoint> {
    (0..n)
        .map(|i| {
            let t = i as f64 * 0.618;
            GridPoint::new(14.0 * t.fract(), 14.0 * (t * 1.7).fract())
        })
        .collect()
}

fn fdm(c: &mut Criterion) {
    let mut group = c.benchmark_group("build_fdm");
    for n in [1, 8, 32] {
        for pooling in [FixationPooling::Avg, FixationPooling::Max] {
            let cfg = EncodingConfig::default().with_pooling(pooling);
            let pts = points(n);
            group.bench_with_input(BenchmarkId::new(pooling.to_string(), n), &pts, |b, pts| {
                b.iter(|| build_fdm(black_box(pts), GridDims::DEFAULT, &cfg).unwrap())
            });
        }
    }
    group.finish();
}

fn image_prediction(c: &mut Criterion) {
    let grid = GridDims::DEFAULT;
    let mut group = c.benchmark_group("predict_image");
    for channels in [64, 512, 1024] {
        let data = (0..channels * grid.cells()).map(|i| (i % 97) as f32 / 97.0).collect();
        let features = FeatureMap::new("bench", channels, grid, data).unwrap();
        let classes = 100;
        let weights = (0..classes * channels).map(|i| ((i % 13) as f32 - 6.0) / 13.0).collect();
        let labels = (0..classes).map(|k| format!("class-{k}")).collect();
        let head = ClassifierHead::new(TaskKind::Category, labels, channels, weights, vec![0.0; classes]).unwrap();
        let density = build_fdm(&points(8), grid, &EncodingConfig::default()).unwrap();
        group.bench_function(BenchmarkId::from_parameter(channels), |b| {
            b.iter(|| predict_image(black_box(&features), &density, &head).unwrap())
        });
    }
    group.finish();
}

fn collage(c: &mut Criterion) {
    let suite = synth_dataset(&SynthSpec {
        participants: 2,
        ..SynthSpec::default()
    })
    .unwrap();
    let head = suite.head(TaskKind::Category).unwrap();
    let trial = &suite.trials[0];
    let layout = &suite.layouts[trial.collage_id()];
    let enc = EncodingConfig::default();
    c.bench_function("run_collage", |b| {
        b.iter(|| run_collage(black_box(trial.log()), layout, &suite.features, head, &enc, IntegrationConfig::default()).unwrap())
    });
    let ctx = suite.context(TaskKind::Category).unwrap();
    let mut group = c.benchmark_group("run_condition");
    group.sample_size(10);
    group.bench_function("200 trials", |b| {
        b.iter(|| run_condition(&ctx, &suite.trials, &Condition::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, fdm, image_prediction, collage);
criterion_main!(benches);
