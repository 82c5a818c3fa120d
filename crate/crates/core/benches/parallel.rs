use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use floodsense_core::features::ProviderSpec;
use floodsense_core::idss::{
    build_prototype_bank, collect_class_pixels, segment_image, BankConfig,
};
use floodsense_core::raster::Class;
use floodsense_core::rse::{FrameView, PixelStatField};
use floodsense_core::synthetic::{flood_series, training_scene, SceneSpec};
use floodsense_core::Execution;

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn stage_one(c: &mut Criterion) {
    let series = flood_series(SceneSpec::new(256, 256, 1), 4, 0.0);
    let views: Vec<FrameView<'_>> = series.images.iter().map(FrameView::from).collect();
    let mut field = PixelStatField::empty(256, 256, 13);
    for v in &views[..3] {
        field.update(v, Execution::Sequential).unwrap();
    }

    let mut group = c.benchmark_group("similarity_map_256x256x13");
    group.throughput(Throughput::Elements(256 * 256));
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| field.similarity_map(black_box(&views[3]), exec).unwrap())
        });
    }
    group.finish();

    let mut group = c.benchmark_group("stat_update_256x256x13");
    group.throughput(Throughput::Elements(256 * 256));
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter_batched_ref(
                || field.clone(),
                |f| f.update(black_box(&views[3]), exec).unwrap(),
                criterion::BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

fn segmentation(c: &mut Criterion) {
    let (train, labels) = training_scene(SceneSpec::new(64, 64, 2));
    let samples = collect_class_pixels(
        [(&train, &labels)],
        &ProviderSpec::Identity,
        &Class::LABELLED,
        5_000,
        0,
    )
    .unwrap();
    let bank = build_prototype_bank(
        &samples,
        &BankConfig {
            iters: Some(200),
            ..Default::default()
        },
    )
    .unwrap();
    let image = &flood_series(SceneSpec::new(128, 128, 3), 0, 0.3).images[0];

    let mut group = c.benchmark_group("segment_128x128_300_prototypes_k10");
    group.sample_size(10);
    group.throughput(Throughput::Elements(128 * 128));
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                segment_image(black_box(image), &bank, &ProviderSpec::Identity, 10, exec).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, stage_one, segmentation);
criterion_main!(benches);
