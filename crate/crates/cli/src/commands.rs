use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use floodsense_core::idss::{
    build_prototype_bank, explain_pixel, project_prototypes_2d, segment_image, ClassSampler,
    PrototypeBank,
};
use floodsense_core::metrics::{
    anomaly_csv, change_csv, eval_anomaly_series, eval_change_mask, ndwi, ndwi_class_map,
    ndwi_water_mask, segmentation_csv, BinaryCounts, ConfusionCounts, NdwiVariant,
};
use floodsense_core::pipeline::{OutputWriter, Pipeline};
use floodsense_core::raster::{
    read_tensor, BinaryChangeMap, Class, ClassMap, ConfidenceMap, Manifest,
};
use floodsense_core::render::{
    render_change_overlay, render_class_map, render_confidence, render_mask, render_projection,
    save_png,
};
use floodsense_core::rse::{
    binary_change_map, open_mask, DetectorConfig, NoveltyDetector, SimilarityMap, VerdictRecord,
};
use serde::Deserialize;

use crate::config::RunConfig;
use crate::{Failure, RenderKind};

const DEFAULT_OUT: &str = "floodsense-out";

fn load_manifest(cfg: &RunConfig, positional: Option<&Path>) -> Result<Manifest, Failure> {
    let path = cfg.manifest_path(positional)?;
    let mut manifest =
        Manifest::load(&path).map_err(|e| Failure::input(e).context(path.display()))?;
    if manifest.entries.is_empty() {
        return Err(Failure::input(format!(
            "{}: manifest has no entries",
            path.display()
        )));
    }
    if manifest.sort_by_time() {
        log::warn!(
            "{}: entries were not in time order and have been sorted by timestamp",
            path.display()
        );
    }
    Ok(manifest)
}

fn load_bank(cfg: &RunConfig) -> Result<PrototypeBank, Failure> {
    let path = cfg.bank_path()?;
    PrototypeBank::load(path).map_err(|e| Failure::input(e).context(path.display()))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir)
        .map_err(|e| Failure::input(format!("cannot create {}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text)
        .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))
}

/// Prints to stdout, or writes to `--out` when given.
fn emit(cfg: &RunConfig, text: &str) -> Result<(), Failure> {
    match &cfg.out {
        Some(path) => write_text(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn detect(cfg: &RunConfig, manifest: Option<&Path>, all_maps: bool) -> Result<(), Failure> {
    let manifest = load_manifest(cfg, manifest)?;
    let out = cfg.out_or(DEFAULT_OUT);
    let maps = out.join("maps");
    create_dir(&maps)?;
    let mut detector = NoveltyDetector::new(DetectorConfig {
        keep_all_maps: all_maps,
        ..cfg.detector()
    })?;
    let log_path = out.join("verdicts.jsonl");
    let file = File::create(&log_path)
        .map_err(|e| Failure::input(format!("{}: {e}", log_path.display())))?;
    let mut log = BufWriter::new(file);
    let mut novel = Vec::new();
    for entry in &manifest.entries {
        let image = manifest
            .load_image(entry)
            .map_err(|e| Failure::from(e).context(&entry.id))?;
        let verdict = detector
            .process_image(&image)
            .map_err(|e| Failure::from(e).context(&entry.id))?;
        let line = serde_json::to_string(&VerdictRecord::from(&verdict)).map_err(Failure::input)?;
        writeln!(log, "{line}").map_err(Failure::input)?;
        if let Some(map) = &verdict.similarity_map {
            map.save(maps.join(format!("{}.similarity.imtf", entry.id)))?;
        }
        if verdict.is_novel {
            novel.push(entry.id.clone());
        }
    }
    log.flush().map_err(Failure::input)?;
    println!(
        "{} frames, {} novel{}",
        manifest.entries.len(),
        novel.len(),
        if novel.is_empty() {
            String::new()
        } else {
            format!(": {}", novel.join(", "))
        }
    );
    Ok(())
}

pub fn change_map(cfg: &RunConfig, similarity: &Path) -> Result<(), Failure> {
    let map = SimilarityMap::load(similarity)
        .map_err(|e| Failure::from(e).context(similarity.display()))?;
    let mut change = binary_change_map(&map, cfg.epsilon)?;
    if cfg.despeckle {
        change = open_mask(&change);
    }
    let out = cfg.out.clone().unwrap_or_else(|| {
        let name = similarity.file_name().unwrap_or_default().to_string_lossy();
        let stem = name
            .strip_suffix(".similarity.imtf")
            .or(name.strip_suffix(".imtf"))
            .unwrap_or(&name);
        similarity.with_file_name(format!("{stem}.change.imtf"))
    });
    change.save(&out)?;
    println!(
        "{} of {} pixels changed -> {}",
        change.count(),
        change.changed.len(),
        out.display()
    );
    Ok(())
}

pub fn train_bank(cfg: &RunConfig, manifest: Option<&Path>) -> Result<(), Failure> {
    let manifest = load_manifest(cfg, manifest)?;
    let provider = cfg.provider_spec()?;
    let mut sampler = ClassSampler::new(&Class::LABELLED, cfg.sample_cap(), cfg.seed)?;
    for entry in &manifest.entries {
        let image = manifest
            .load_image(entry)
            .map_err(|e| Failure::from(e).context(&entry.id))?;
        let labels = manifest
            .load_label(entry)
            .map_err(|e| Failure::from(e).context(&entry.id))?;
        sampler
            .add(&image, &labels, &provider)
            .map_err(|e| Failure::from(e).context(&entry.id))?;
    }
    let seen = sampler.seen();
    let samples = sampler.finish()?;
    let bank = build_prototype_bank(&samples, &cfg.bank_config())?;
    let path = cfg
        .bank
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("bank.json"));
    bank.save(&path)?;
    let summary: Vec<String> = bank
        .class_counts()
        .iter()
        .map(|(c, n)| {
            format!(
                "{} {n} (from {} pixels)",
                c.name(),
                seen.get(c).copied().unwrap_or(0)
            )
        })
        .collect();
    println!(
        "{} prototypes, D={}: {} -> {}",
        bank.len(),
        bank.latent_dim,
        summary.join(", "),
        path.display()
    );
    Ok(())
}

pub fn segment(
    cfg: &RunConfig,
    manifest: Option<&Path>,
    only: Option<&str>,
    ndwi_variant: Option<(u8, f32)>,
) -> Result<(), Failure> {
    let manifest = load_manifest(cfg, manifest)?;
    let bank = match ndwi_variant {
        Some(_) => None,
        None => Some(load_bank(cfg)?),
    };
    let variant = ndwi_variant
        .map(|(v, t)| NdwiVariant::from_number(v).map(|v| (v, t)))
        .transpose()
        .map_err(Failure::config)?;
    let provider = cfg.provider_spec()?;
    let out = cfg.out_or(DEFAULT_OUT);
    create_dir(&out.join("maps"))?;
    create_dir(&out.join("png"))?;
    let mut done = 0;
    for entry in manifest
        .entries
        .iter()
        .filter(|e| only.is_none_or(|id| e.id == id))
    {
        let image = manifest
            .load_image(entry)
            .map_err(|e| Failure::from(e).context(&entry.id))?;
        let (classes, confidence) = match (&bank, variant) {
            (Some(bank), _) => {
                let (classes, confidence) =
                    segment_image(&image, bank, &provider, cfg.k, cfg.exec())
                        .map_err(|e| Failure::from(e).context(&entry.id))?;
                (classes, Some(confidence))
            }
            (None, Some((v, threshold))) => {
                let index = ndwi(&image, v)?;
                let water = ndwi_water_mask(&image, &index, threshold)?;
                (ndwi_class_map(&image, &water), None)
            }
            (None, None) => unreachable!("either a bank or an NDWI variant is set"),
        };
        let stem = out.join("maps").join(&entry.id);
        classes.save(stem.with_extension("classes.imtf"))?;
        save_png(
            &render_class_map(&classes)?,
            out.join("png").join(format!("{}.classes.png", entry.id)),
        )?;
        if let Some(confidence) = &confidence {
            confidence.save(stem.with_extension("confidence.imtf"))?;
            save_png(
                &render_confidence(confidence, &classes, cfg.confidence_threshold)?,
                out.join("png").join(format!("{}.confidence.png", entry.id)),
            )?;
        }
        done += 1;
    }
    if done == 0 {
        return Err(Failure::input(format!(
            "no manifest entry with id {:?}",
            only.unwrap_or_default()
        )));
    }
    println!("segmented {done} frame(s) -> {}", out.display());
    Ok(())
}

pub fn explain(
    cfg: &RunConfig,
    manifest: Option<&Path>,
    id: &str,
    (h, v): (usize, usize),
    json: bool,
) -> Result<(), Failure> {
    let manifest = load_manifest(cfg, manifest)?;
    let bank = load_bank(cfg)?;
    let entry = manifest
        .entries
        .iter()
        .find(|e| e.id == id)
        .ok_or_else(|| Failure::input(format!("no manifest entry with id {id:?}")))?;
    let image = manifest.load_image(entry)?;
    let explanation = explain_pixel(&image, h, v, &bank, &cfg.provider_spec()?, cfg.k)?;
    let text = if json {
        let mut s = serde_json::to_string_pretty(&explanation).map_err(Failure::input)?;
        s.push('\n');
        s
    } else {
        explanation.summary()
    };
    emit(cfg, &text)
}

pub fn pipeline(cfg: &RunConfig, manifest: Option<&Path>, png: bool) -> Result<(), Failure> {
    let manifest = load_manifest(cfg, manifest)?;
    let bank = load_bank(cfg)?;
    let provider = cfg.provider_spec()?;
    let out = cfg.out_or(DEFAULT_OUT);
    let mut pipeline = Pipeline::new(cfg.pipeline(), &bank, &provider).map_err(Failure::config)?;
    let mut writer = OutputWriter::create(&out)?;
    let png_dir = out.join("png");
    if png {
        create_dir(&png_dir)?;
    }
    for entry in &manifest.entries {
        let image = manifest
            .load_image(entry)
            .map_err(|e| Failure::from(e).context(&entry.id))?;
        let outcome = pipeline
            .push(&image)
            .map_err(|e| Failure::from(e).context(&entry.id))?;
        writer.write(&outcome)?;
        if let (true, Some(f)) = (png, &outcome.flagged) {
            let name = |kind: &str| png_dir.join(format!("{}.{kind}.png", entry.id));
            save_png(&render_class_map(&f.classes)?, name("classes"))?;
            save_png(
                &render_confidence(&f.confidence, &f.classes, cfg.confidence_threshold)?,
                name("confidence"),
            )?;
            save_png(
                &render_change_overlay(&f.change, &f.classes)?,
                name("change"),
            )?;
            log::info!(
                "{}: S = {:.4}, new water {:.2}% -> {:?}",
                entry.id,
                outcome.verdict.similarity,
                f.record.new_water_percentage,
                f.record.decision
            );
        }
    }
    let report = pipeline.report();
    let counts = pipeline.counts();
    writer.finish(&report, counts)?;
    if let (true, Some(extent)) = (png, &report.extent) {
        save_png(&render_mask(extent)?, png_dir.join("extent.png"))?;
    }
    println!(
        "{} frames, {} novel, {} segmented; flood onset: {}",
        counts.frames,
        counts.novel,
        counts.segment_calls,
        match (&report.onset_id, report.flood_onset) {
            (Some(id), Some(t)) => format!("{t} ({id}, {} pixels)", report.extent_pixels),
            _ => "none".into(),
        }
    );
    Ok(())
}

fn paired<'a>(
    pred: &'a [PathBuf],
    gt: &'a [PathBuf],
) -> Result<impl Iterator<Item = (&'a PathBuf, &'a PathBuf)>, Failure> {
    if pred.len() != gt.len() {
        return Err(Failure::input(format!(
            "{} prediction files but {} ground-truth files",
            pred.len(),
            gt.len()
        )));
    }
    Ok(pred.iter().zip(gt))
}

pub fn eval_segmentation(cfg: &RunConfig, pred: &[PathBuf], gt: &[PathBuf]) -> Result<(), Failure> {
    let mut counts = ConfusionCounts::default();
    for (p, g) in paired(pred, gt)? {
        let pm = ClassMap::load(p).map_err(|e| Failure::from(e).context(p.display()))?;
        let gm = ClassMap::load(g).map_err(|e| Failure::from(e).context(g.display()))?;
        counts
            .add(&pm, &gm)
            .map_err(|e| Failure::from(e).context(p.display()))?;
    }
    emit(cfg, &segmentation_csv(&counts))
}

#[derive(Deserialize)]
struct Flag {
    id: String,
    is_novel: bool,
}

fn read_flags(path: &Path) -> Result<Vec<Flag>, Failure> {
    let file = File::open(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let mut flags = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        flags.push(
            serde_json::from_str(&line)
                .map_err(|e| Failure::input(format!("{}:{}: {e}", path.display(), n + 1)))?,
        );
    }
    Ok(flags)
}

pub fn eval_anomaly(cfg: &RunConfig, pred: &[PathBuf], gt: &[PathBuf]) -> Result<(), Failure> {
    let mut counts = BinaryCounts::default();
    for (p, g) in paired(pred, gt)? {
        let predicted = read_flags(p)?;
        let truth: HashMap<String, bool> = read_flags(g)?
            .into_iter()
            .map(|f| (f.id, f.is_novel))
            .collect();
        if truth.len() != predicted.len() {
            return Err(Failure::input(format!(
                "{} has {} frames, {} has {}",
                p.display(),
                predicted.len(),
                g.display(),
                truth.len()
            )));
        }
        let mut actual = Vec::with_capacity(predicted.len());
        for f in &predicted {
            actual.push(*truth.get(&f.id).ok_or_else(|| {
                Failure::input(format!("frame {:?} missing from {}", f.id, g.display()))
            })?);
        }
        let flags: Vec<bool> = predicted.iter().map(|f| f.is_novel).collect();
        let c = eval_anomaly_series(&flags, &actual)?;
        counts.tp += c.tp;
        counts.fp += c.fp;
        counts.fn_ += c.fn_;
        counts.tn += c.tn;
    }
    emit(cfg, &anomaly_csv(&counts))
}

pub fn eval_change(
    cfg: &RunConfig,
    pred: &[PathBuf],
    gt: &[PathBuf],
    valid: &[PathBuf],
) -> Result<(), Failure> {
    if !valid.is_empty() && valid.len() != pred.len() {
        return Err(Failure::input(format!(
            "{} validity masks for {} predictions",
            valid.len(),
            pred.len()
        )));
    }
    let mut counts = BinaryCounts::default();
    for (i, (p, g)) in paired(pred, gt)?.enumerate() {
        let pm = BinaryChangeMap::load(p).map_err(|e| Failure::from(e).context(p.display()))?;
        let gm = BinaryChangeMap::load(g).map_err(|e| Failure::from(e).context(g.display()))?;
        let mask = match valid.get(i) {
            Some(v) => {
                let (_, m) = read_tensor(v)
                    .and_then(|t| t.into_u8())
                    .map_err(|e| Failure::from(e).context(v.display()))?;
                Some(m.into_iter().map(|x| x != 0).collect::<Vec<bool>>())
            }
            None => None,
        };
        let c = eval_change_mask(&pm, &gm, mask.as_deref())
            .map_err(|e| Failure::from(e).context(p.display()))?;
        counts.tp += c.tp;
        counts.fp += c.fp;
        counts.fn_ += c.fn_;
        counts.tn += c.tn;
    }
    emit(cfg, &change_csv(&counts))
}

pub fn render(
    cfg: &RunConfig,
    kind: RenderKind,
    input: &Path,
    classes: Option<&Path>,
    size: u32,
) -> Result<(), Failure> {
    if matches!(kind, RenderKind::Confidence | RenderKind::Change) && classes.is_none() {
        return Err(Failure::config("--classes is required for this rendering"));
    }
    let load_classes = || -> Result<ClassMap, Failure> {
        let path = classes.expect("checked above");
        ClassMap::load(path).map_err(|e| Failure::from(e).context(path.display()))
    };
    let ctx = |e: floodsense_core::Error| Failure::from(e).context(input.display());
    let image = match kind {
        RenderKind::Classes => render_class_map(&ClassMap::load(input).map_err(ctx)?)?,
        RenderKind::Confidence => render_confidence(
            &ConfidenceMap::load(input).map_err(ctx)?,
            &load_classes()?,
            cfg.confidence_threshold,
        )?,
        RenderKind::Change => render_change_overlay(
            &BinaryChangeMap::load(input).map_err(ctx)?,
            &load_classes()?,
        )?,
        RenderKind::Mask => render_mask(&BinaryChangeMap::load(input).map_err(ctx)?)?,
        RenderKind::Projection => {
            let bank = PrototypeBank::load(input).map_err(ctx)?;
            let points = project_prototypes_2d(&bank)?;
            let classes: Vec<Class> = bank.prototypes.iter().map(|p| p.class).collect();
            render_projection(&points, &classes, size)?
        }
    };
    let out = cfg
        .out
        .clone()
        .unwrap_or_else(|| input.with_extension("png"));
    save_png(&image, &out)?;
    println!("{}", out.display());
    Ok(())
}
