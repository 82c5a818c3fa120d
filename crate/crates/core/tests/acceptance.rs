//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use floodsense_core::features::ProviderSpec;
use floodsense_core::idss::{
    classify_pixel, is_high_confidence, kmedoids, MiniBatchKMeans, Prototype,
};
use floodsense_core::metrics::{anomaly_csv, eval_anomaly_series, mean_defined};
use floodsense_core::pipeline::{run_to_dir, Pipeline, PipelineConfig};
use floodsense_core::raster::{
    decode, encode, read_tensor, write_tensor, Class, TensorData, Timestamp,
};
use floodsense_core::rse::{pixel_similarity, DetectorConfig, FrameView, NoveltyDetector};
use floodsense_core::synthetic::{flood_series, SceneSpec, LAND, WATER};
use floodsense_core::Execution;
use rand::Rng;

type Check = Result<String, String>;

struct Suite {
    failed: usize,
}

impl Suite {
    fn run(&mut self, name: &str, limit: Option<Duration>, f: impl FnOnce() -> Check) {
        let start = Instant::now();
        let mut result = f();
        let elapsed = start.elapsed();
        if let (Ok(detail), Some(limit)) = (&result, limit) {
            if elapsed > limit {
                result = Err(format!("{detail}; took {elapsed:.2?}, limit {limit:?}"));
            }
        }
        match result {
            Ok(detail) => println!("PASS  {name:<34} {detail} [{elapsed:.2?}]"),
            Err(detail) => {
                self.failed += 1;
                println!("FAIL  {name:<34} {detail} [{elapsed:.2?}]");
            }
        }
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn day(n: usize) -> Timestamp {
    Timestamp(Timestamp::from_ymd(2020, 1, 1).unwrap().0 + chrono::Duration::days(n as i64))
}

fn recursive_vs_batch() -> Check {
    let (h, w, d) = (8, 8, 13);
    let n_pix = h * w;
    let valid = vec![true; n_pix];
    let mut worst = 0.0f64;
    let mut novel_total = 0;
    let mut note =
        |a: f64, b: f64| worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(1e-12));
    for seed in 0..20 {
        let mut rng = rng(seed);
        let base: Vec<f32> = (0..n_pix * d).map(|_| rng.gen_range(0.0..3.0)).collect();
        let frames: Vec<Vec<f32>> = (0..100)
            .map(|_| base.iter().map(|&b| b + rng.gen_range(-0.3..0.3)).collect())
            .collect();
        let mut det = NoveltyDetector::new(DetectorConfig::default()).map_err(|e| e.to_string())?;
        let mut accepted: Vec<Vec<f32>> = Vec::new();
        let mut scores = Vec::new();
        for (t, f) in frames.iter().enumerate() {
            let view = FrameView::new((h, w, d), f, &valid).map_err(|e| e.to_string())?;
            let v = det.process(&view, "f", day(t)).map_err(|e| e.to_string())?;
            let expect = if t == 0 {
                1.0
            } else {
                let (mu, sigma) = batch_stats(&accepted, n_pix, d);
                batch_frame_similarity(f, &mu, &sigma, d)
            };
            note(v.similarity, expect);
            scores.push(v.similarity);
            if v.is_novel {
                novel_total += 1;
            } else {
                accepted.push(f.clone());
            }
        }
        let field = det.field().ok_or("no statistics after 100 frames")?;
        let (mu, sigma) = batch_stats(&accepted, n_pix, d);
        for p in 0..n_pix {
            for j in 0..d {
                note(field.mu(p)[j], mu[p * d + j]);
            }
            note(field.big_sigma(p), sigma[p]);
        }
        let (s_bar, sigma_sq) = series_batch(&scores);
        note(det.series().s_bar, s_bar);
        note(det.series().sigma_sq, sigma_sq);
    }
    ensure(worst <= 1e-5, || format!("max relative error {worst:.3e}"))?;
    Ok(format!(
        "20 x 100 frames 8x8x13, max relative error {worst:.2e}, {novel_total} frames flagged"
    ))
}

fn similarity_bounds() -> Check {
    let mut rng = rng(99);
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    let magnitude = |rng: &mut rand_chacha::ChaCha8Rng| 10f64.powf(rng.gen_range(-6.0..6.0));
    for case in 0..100_000 {
        let dim = rng.gen_range(1..=16);
        let scale = magnitude(&mut rng);
        let x: Vec<f64> = (0..dim).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
        let mu: Vec<f64> = (0..dim).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
        let big_sigma = magnitude(&mut rng) * rng.gen_range(0.0..1.0);
        let s = pixel_similarity(&x, &mu, big_sigma).map_err(|e| e.to_string())?;
        ensure(s > 0.0 && s <= 1.0, || format!("case {case}: s = {s}"))?;
        lo = lo.min(s);
        hi = hi.max(s);
    }
    Ok(format!("1e5 cases, s in [{lo:.3e}, {hi}]"))
}

fn synthetic_recall_and_efficiency() -> (Check, Check) {
    let bank = synthetic_bank(0);
    let shift = LAND
        .iter()
        .zip(WATER)
        .map(|(l, w)| (l - w).abs())
        .fold(f32::INFINITY, f32::min);
    let spec0 = SceneSpec::new(32, 32, 0);
    let sigmas = shift / spec0.noise;
    let mut flagged = 0;
    let mut efficiency_ok = 0;
    let mut worst_fraction = 1.0f64;
    let mut problems = Vec::new();
    for seed in 0..20 {
        let spec = SceneSpec::new(32, 32, seed);
        let series = flood_series(spec, 14, 0.2);
        let fraction = series.flood_mask.iter().filter(|&&m| m).count() as f64
            / series.flood_mask.len() as f64;
        worst_fraction = worst_fraction.min(fraction);
        let mut pipeline =
            match Pipeline::new(PipelineConfig::default(), &bank, &ProviderSpec::Identity) {
                Ok(p) => p,
                Err(e) => return (Err(e.to_string()), Err(e.to_string())),
            };
        let mut novel = Vec::new();
        for img in &series.images {
            match pipeline.push(img) {
                Ok(o) => novel.push(o.verdict.is_novel),
                Err(e) => return (Err(e.to_string()), Err(e.to_string())),
            }
        }
        if novel[14] {
            flagged += 1;
        }
        let c = pipeline.counts();
        if c.segment_calls == c.novel && c.novel == 1 {
            efficiency_ok += 1;
        } else {
            problems.push(format!(
                "seed {seed}: {} segment calls, {} novel",
                c.segment_calls, c.novel
            ));
        }
    }
    let recall = if flagged == 20 && worst_fraction >= 0.2 && sigmas >= 5.0 {
        Ok(format!(
            "20/20 flooded frames flagged (>= {:.1}% pixels, shift >= {sigmas:.1} sigma)",
            100.0 * worst_fraction
        ))
    } else {
        Err(format!(
            "{flagged}/20 flagged, fraction {worst_fraction:.3}, shift {sigmas:.1} sigma"
        ))
    };
    let efficiency = if efficiency_ok == 20 {
        Ok("segment calls = novel verdicts = 1 on 20/20 series".to_string())
    } else {
        Err(problems.join("; "))
    };
    (recall, efficiency)
}

fn knn_oracle_agreement() -> Check {
    let mut rng = rng(2024);
    let mut queries = 0;
    let mut largest = 0;
    for round in 0..10 {
        let size = if round == 0 {
            1000
        } else {
            rng.gen_range(50..=1000)
        };
        largest = largest.max(size);
        let dim = rng.gen_range(1..=8);
        let bank = random_bank(&mut rng, size, dim, 2);
        for _ in 0..100 {
            let q: Vec<f32> = (0..dim).map(|_| rng.gen_range(-2..=2) as f32).collect();
            let k = rng.gen_range(1..=20);
            let got = classify_pixel(&q, &bank, k).map_err(|e| e.to_string())?;
            let want = knn_oracle(&bank, &q, k);
            ensure(got == want, || {
                format!("query {queries}: {got:?} vs oracle {want:?}")
            })?;
            queries += 1;
        }
    }
    Ok(format!(
        "{queries} queries exact, banks up to {largest} prototypes, tie-heavy grid"
    ))
}

fn clustering_oracles() -> Check {
    let means = vec![
        vec![0.0, 0.0, 0.0],
        vec![5.0, 5.0, 0.0],
        vec![0.0, 5.0, 5.0],
    ];
    let mut worst_truth = 0.0f64;
    let mut worst_lloyd = 0.0f64;
    for seed in 0..5 {
        let mut rng = rng(seed);
        let (data, _) = blobs(&mut rng, &means, 0.3, 400);
        let centres = MiniBatchKMeans {
            iters: 300,
            ..MiniBatchKMeans::new(3, seed)
        }
        .fit(&data, 3, Execution::Sequential)
        .map_err(|e| e.to_string())?;
        let reference = lloyd(&data, 3, means.clone(), 50);
        for truth in &means {
            let nearest = |cs: &[Vec<f64>]| {
                cs.iter()
                    .min_by(|a, b| dist(a, truth).total_cmp(&dist(b, truth)))
                    .unwrap()
                    .clone()
            };
            let (c, l) = (nearest(&centres), nearest(&reference));
            for j in 0..3 {
                worst_truth = worst_truth.max((c[j] - truth[j]).abs());
                worst_lloyd = worst_lloyd.max((c[j] - l[j]).abs());
            }
        }
    }
    let kmeans_ok = worst_truth < 0.1 && worst_lloyd < 0.1;

    let mut rng = rng(7);
    let (mut exact, mut total, mut local_optima) = (0, 0, 0);
    for _ in 0..200 {
        let n = rng.gen_range(2..=12usize);
        let dim = rng.gen_range(1..=3);
        let k = rng.gen_range(1..=n.min(4));
        let data: Vec<f32> = (0..n * dim).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let got = kmedoids(&data, dim, k, Execution::Sequential).map_err(|e| e.to_string())?;
        let (best, cost, optima) = exhaustive_medoids(&data, dim, k);
        let matched = if optima == 1 {
            got == best
        } else {
            medoid_cost(&data, dim, &got) == cost
        };
        exact += matched as usize;
        total += 1;
        if !matched && no_improving_swap(&data, dim, &got) {
            local_optima += 1;
        }
    }
    let detail = format!(
        "k-means max error {worst_truth:.3} vs truth, {worst_lloyd:.3} vs Lloyd; PAM exact on {exact}/{total} random sets, {local_optima} of {} misses are swap-local optima",
        total - exact
    );
    ensure(kmeans_ok && exact == total, || detail.clone())?;
    Ok(detail)
}

fn no_improving_swap(data: &[f32], dim: usize, medoids: &[usize]) -> bool {
    let n = data.len() / dim;
    let cost = medoid_cost(data, dim, medoids);
    (0..medoids.len()).all(|slot| {
        (0..n).filter(|h| !medoids.contains(h)).all(|h| {
            let mut swapped = medoids.to_vec();
            swapped[slot] = h;
            medoid_cost(data, dim, &swapped) >= cost
        })
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn confidence_rule() -> Check {
    let mut bank = random_bank(&mut rng(0), 12, 2, 0);
    for (i, p) in bank.prototypes.iter_mut().enumerate() {
        let (class, r) = match i {
            0..=7 => (Class::Water, 1.0 + i as f32 * 0.01),
            8 | 9 => (Class::Land, 1.5),
            _ => (Class::Cloud, 50.0),
        };
        *p = Prototype {
            class,
            y: vec![r, 0.0],
            x: vec![r, 0.0],
            provenance: None,
        };
    }
    let (class, conf) = classify_pixel(&[0.0, 0.0], &bank, 10).map_err(|e| e.to_string())?;
    ensure(class == Class::Water && conf == 0.8, || {
        format!("{class:?} at {conf}")
    })?;
    ensure(
        is_high_confidence(conf, 0.8) && is_high_confidence(conf as f32 as f64, 0.8),
        || "0.8 not flagged high at tau 0.8".into(),
    )?;
    Ok("8 Water / 2 Land of k=10 -> Water, confidence 0.8, high at tau 0.8".into())
}

fn metrics_fidelity() -> Check {
    // one true anomaly, two alarms
    let scenario = eval_anomaly_series(&[true, true, false, false], &[true, false, false, false])
        .map_err(|e| e.to_string())?;
    let a = anomaly_csv(&scenario);
    ensure(a.lines().nth(1) == Some("0.50,1.00,0.67"), || {
        format!("got {a:?}")
    })?;
    // nine true anomalies, eleven alarms
    let mut pred = vec![true; 11];
    pred.extend([false; 9]);
    let mut gt = vec![true; 9];
    gt.extend([false; 11]);
    let b = anomaly_csv(&eval_anomaly_series(&pred, &gt).map_err(|e| e.to_string())?);
    ensure(b.lines().nth(1) == Some("0.82,1.00,0.90"), || {
        format!("got {b:?}")
    })?;

    let miou = 100.0
        * mean_defined([Some(0.7295), Some(0.8256), Some(0.8967)]).map_err(|e| e.to_string())?;
    let shown = format!("{miou:.2}");
    ensure(shown == "81.73", || format!("mIoU {shown}"))?;
    let gap = (miou - 81.71).abs();
    ensure(gap < 0.05, || {
        format!("mIoU {miou:.4} is {gap:.4} from 81.71")
    })?;
    Ok(format!(
        "0.50,1.00,0.67 | 0.82,1.00,0.90 | mIoU {shown} (reference 81.71, gap {gap:.4})"
    ))
}

fn format_golden() -> Check {
    let bytes = encode(
        &[2, 3],
        &TensorData::F32(vec![1.0, -2.0, 0.5, 0.0, 3.25, -0.125]),
    )
    .map_err(|e| e.to_string())?;
    let mut want = b"IMTF".to_vec();
    want.extend([1, 0, 1, 2, 2, 0, 0, 0, 3, 0, 0, 0]);
    for v in [1.0f32, -2.0, 0.5, 0.0, 3.25, -0.125] {
        want.extend(v.to_le_bytes());
    }
    ensure(bytes == want, || {
        "f32 encoding differs from the golden bytes".into()
    })?;
    let bytes = encode(&[3], &TensorData::U8(vec![0, 1, 255])).map_err(|e| e.to_string())?;
    ensure(
        bytes == [b'I', b'M', b'T', b'F', 1, 0, 2, 1, 3, 0, 0, 0, 0, 1, 255],
        || "u8 encoding differs from the golden bytes".into(),
    )?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = rng(5);
    for i in 0..100 {
        let ndim = rng.gen_range(0..=4);
        let dims: Vec<usize> = (0..ndim).map(|_| rng.gen_range(0..6)).collect();
        let count: usize = dims.iter().product();
        let data = if rng.gen_bool(0.5) {
            TensorData::F32((0..count).map(|_| f32::from_bits(rng.gen())).collect())
        } else {
            TensorData::U8((0..count).map(|_| rng.gen()).collect())
        };
        let path = dir.path().join(format!("t{i}.imtf"));
        write_tensor(&path, &dims, &data).map_err(|e| e.to_string())?;
        let back = read_tensor(&path).map_err(|e| e.to_string())?;
        let same = match (&back.data, &data) {
            (TensorData::F32(a), TensorData::F32(b)) => a
                .iter()
                .map(|x| x.to_bits())
                .eq(b.iter().map(|x| x.to_bits())),
            (TensorData::U8(a), TensorData::U8(b)) => a == b,
            _ => false,
        };
        ensure(same && back.dims == dims, || {
            format!("tensor {i} changed on round trip")
        })?;
        let raw = fs::read(&path).map_err(|e| e.to_string())?;
        ensure(decode(&raw).is_ok(), || {
            format!("tensor {i} does not decode")
        })?;
    }
    Ok("f32 and u8 headers bit-exact; 100 random tensors round-trip bit-identically".into())
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(dir)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Check {
    let series = flood_series(SceneSpec::new(24, 24, 31), 12, 0.25);
    let mut runs = Vec::new();
    for _ in 0..2 {
        let bank = synthetic_bank(9);
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        bank.save(dir.path().join("bank.json"))
            .map_err(|e| e.to_string())?;
        run_to_dir(
            &series.images,
            PipelineConfig::default(),
            &bank,
            &ProviderSpec::Identity,
            dir.path(),
        )
        .map_err(|e| e.to_string())?;
        runs.push(snapshot(dir.path()));
    }
    ensure(runs[0] == runs[1], || "outputs differ between runs".into())?;
    ensure(
        runs[0].contains_key("report.json") && runs[0].keys().any(|k| k.starts_with("maps")),
        || "expected report and maps".into(),
    )?;
    let bytes: usize = runs[0].values().map(Vec::len).sum();
    Ok(format!(
        "{} files ({bytes} bytes) identical across two runs",
        runs[0].len()
    ))
}

/// Seconds to push 100 frames of the given size through stage 1.
fn stage_one_seconds(h: usize, w: usize) -> Result<f64, String> {
    let d = 13;
    let mut rng = rng(h as u64 * 7 + w as u64);
    let base: Vec<f32> = (0..h * w * d).map(|_| rng.gen_range(0.0..3.0)).collect();
    let frames: Vec<Vec<f32>> = (0..4)
        .map(|_| {
            base.iter()
                .map(|&b| b + rng.gen_range(-0.05..0.05))
                .collect()
        })
        .collect();
    let valid = vec![true; h * w];
    let mut det = NoveltyDetector::new(DetectorConfig {
        exec: Execution::Sequential,
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    let start = Instant::now();
    for t in 0..100 {
        let view = FrameView::new((h, w, d), &frames[t % frames.len()], &valid)
            .map_err(|e| e.to_string())?;
        det.process(&view, "f", day(t)).map_err(|e| e.to_string())?;
    }
    Ok(start.elapsed().as_secs_f64())
}

fn throughput() -> Check {
    let best = |h, w| -> Result<f64, String> {
        Ok(stage_one_seconds(h, w)?.min(stage_one_seconds(h, w)?))
    };
    let small = best(256, 256)?;
    let large = best(256, 512)?;
    let ratio = large / small;
    let detail = format!("100 frames 256x256x13 in {small:.2} s; 2x pixels takes {ratio:.2}x");
    ensure(small < 60.0 && (1.6..=2.4).contains(&ratio), || {
        detail.clone()
    })?;
    Ok(detail)
}

fn main() -> ExitCode {
    let mut suite = Suite { failed: 0 };
    println!("acceptance suite");
    suite.run(
        "recursive vs batch equivalence",
        Some(Duration::from_secs(10)),
        recursive_vs_batch,
    );
    suite.run(
        "similarity bounds",
        Some(Duration::from_secs(5)),
        similarity_bounds,
    );
    let mut efficiency = Err("not run".to_string());
    suite.run(
        "synthetic flood recall",
        Some(Duration::from_secs(30)),
        || {
            let (recall, e) = synthetic_recall_and_efficiency();
            efficiency = e;
            recall
        },
    );
    suite.run("efficiency contract", None, || efficiency);
    suite.run("kNN oracle", None, knn_oracle_agreement);
    suite.run("clustering oracles", None, clustering_oracles);
    suite.run("confidence rule", None, confidence_rule);
    suite.run("metrics fidelity", None, metrics_fidelity);
    suite.run("format golden tests", None, format_golden);
    suite.run("determinism", None, determinism);
    suite.run("throughput sanity", None, throughput);
    if suite.failed == 0 {
        println!("all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("{} criteria failed", suite.failed);
        ExitCode::FAILURE
    }
}
