use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, TimeZone, Utc};
use flukefinder::acquisition::{
    fetch_video, AnonymizedRecord, Anonymizer, Credentials, FixtureTransport, PrivateMap, PrivateMapEntry,
    RateLimiter, ReqwestTransport, SearchClient, SystemClock,
};
use flukefinder::backbone::{extract, load_backbone, FeatureCache, FeatureSequence};
use flukefinder::command::CommandTemplate;
use flukefinder::corpus::{CorpusLock, FrameCache, FrameIndex, Interval, Manifest};
use flukefinder::evaluation::{
    average, parse_csv, render_report, run_crossval, CvSummary, FoldReport, ReportFormat,
};
use flukefinder::framepipe::{build_sequence, uniform_sample_indices, Decoder, FrameSequence};
use flukefinder::seqclassifier::{checkpoint, predict, Prediction};
use flukefinder::synthetic::{synthetic_corpus, SyntheticSpec};
use flukefinder::tensor_file::sidecar_path;
use flukefinder::{Label, LocalId};
use flukefinder_annotate::ServiceConfig;
use serde::Serialize;

use crate::config::Resolved;
use crate::error::CliError;

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const CROSSVAL_CSV: &str = "crossval.csv";
pub const CROSSVAL_TXT: &str = "crossval.txt";
pub const FOLDS_JSON: &str = "folds.json";
pub const PREDICTIONS_NDJSON: &str = "predictions.ndjson";

/// Shared by every subcommand: the resolved config and whether to stop
/// after printing the plan.
pub struct Ctx {
    pub run: Resolved,
    pub dry_run: bool,
}

impl Ctx {
    fn plan(&self, lines: &[String]) -> bool {
        for line in lines {
            if self.dry_run {
                println!("plan: {line}");
            } else {
                eprintln!("plan: {line}");
            }
        }
        if self.dry_run {
            println!("dry run: nothing written");
        }
        self.dry_run
    }

    fn lock(&self) -> Result<CorpusLock, CliError> {
        Ok(CorpusLock::acquire(&self.run.layout.corpus_dir)?)
    }

    fn feature_cache(&self) -> FeatureCache {
        FeatureCache::new(&self.run.layout.features)
    }

    fn tensor_stem(&self, id: &LocalId) -> PathBuf {
        self.run.layout.tensors.join(id.as_str())
    }
}

pub fn search(ctx: &Ctx, fixtures: Option<&Path>, limit: Option<usize>) -> Result<(), CliError> {
    let query = ctx.run.require_query("search")?;
    let s = &ctx.run.config.search;
    let limit = limit.unwrap_or(s.limit);
    let source = match fixtures {
        Some(dir) => format!("fixtures in {}", dir.display()),
        None => s.base_url.clone(),
    };
    if ctx.plan(&[
        format!("search {query:?} for up to {limit} videos via {source}"),
        format!("append new videos to {}", ctx.run.layout.manifest.display()),
        format!("append platform ids to {}", ctx.run.layout.private_map.display()),
    ]) {
        return Ok(());
    }

    let _lock = ctx.lock()?;
    let mut manifest = Manifest::load_or_default(&ctx.run.layout.manifest)?;
    let known = PrivateMap::load_or_default(&ctx.run.layout.private_map)?;
    let limiter = RateLimiter::new(s.rate_per_s, s.burst, SystemClock::default());
    let found = match fixtures {
        Some(dir) => {
            let creds = Credentials::from_env(&s.api_key_env).unwrap_or_else(|_| Credentials::new("fixture"));
            SearchClient::new(FixtureTransport::new(dir), creds, limiter).search_all(query, limit)?
        }
        None => {
            let creds = Credentials::from_env(&s.api_key_env)?;
            SearchClient::new(ReqwestTransport::new(&s.base_url)?, creds, limiter).search_all(query, limit)?
        }
    };

    let anonymizer = Anonymizer::resuming(manifest.videos().iter().filter_map(|v| v.local_id().counter()));
    let now = Utc::now();
    let mut entries = Vec::new();
    let mut skipped = 0;
    for meta in &found {
        if known.contains_platform_id(&meta.platform_video_id)
            || entries
                .iter()
                .any(|e: &PrivateMapEntry| e.platform_video_id == meta.platform_video_id)
        {
            skipped += 1;
            continue;
        }
        let (record, entry) = anonymizer.anonymize(meta, anonymizer.allocate(), query, now)?;
        manifest.insert(record)?;
        entries.push(entry);
    }
    PrivateMap::append(&ctx.run.layout.private_map, &entries)?;
    manifest.save(&ctx.run.layout.manifest)?;
    println!(
        "added {} videos ({skipped} already in the corpus); corpus now holds {}",
        entries.len(),
        manifest.len()
    );
    Ok(())
}

fn find_video(dir: &Path, id: &LocalId) -> Option<PathBuf> {
    let mut hits: Vec<PathBuf> = fs::read_dir(dir)
        .ok()?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.file_stem().is_some_and(|s| s == id.as_str()))
        .collect();
    hits.sort();
    hits.into_iter().next()
}

pub fn fetch(ctx: &Ctx) -> Result<(), CliError> {
    let template = CommandTemplate::parse(ctx.run.require_fetch_command("fetch")?)?;
    let videos = &ctx.run.layout.videos;
    if ctx.plan(&[format!(
        "download every manifest video without a file into {}",
        videos.display()
    )]) {
        return Ok(());
    }
    let _lock = ctx.lock()?;
    let manifest = Manifest::load(&ctx.run.layout.manifest)?;
    let private = PrivateMap::load_or_default(&ctx.run.layout.private_map)?;
    let (mut fetched, mut present, mut failed) = (0, 0, 0);
    for video in manifest.videos() {
        let id = video.local_id();
        if find_video(videos, id).is_some() {
            present += 1;
            continue;
        }
        let Some(platform) = private.platform_id(id) else {
            eprintln!("warning: {id} has no private map entry");
            failed += 1;
            continue;
        };
        let entry = PrivateMapEntry {
            local_id: id.clone(),
            platform_video_id: platform.to_owned(),
        };
        match fetch_video(&template, &entry, &videos.join(format!("{id}.mp4"))) {
            Ok(_) => fetched += 1,
            Err(e) => {
                eprintln!("warning: {e}");
                failed += 1;
            }
        }
    }
    println!("fetched {fetched}, already present {present}, failed {failed}");
    if failed > 0 {
        return Err(CliError::Failed(format!("{failed} videos could not be fetched")));
    }
    Ok(())
}

pub fn prepare_frames(ctx: &Ctx, strips: bool) -> Result<(), CliError> {
    let decoder = Decoder::parse(ctx.run.require_decoder_command("prepare-frames")?)?;
    let cfg = &ctx.run.config;
    let layout = &ctx.run.layout;
    let mut plan = vec![
        format!(
            "decode each labeled video's interval, standardize to {} frames of {}px",
            cfg.sample_policy.target_count, cfg.preprocess.side_px
        ),
        format!("write frame tensors to {}", layout.tensors.display()),
        "place intervals on irrelevant videos that lack one".to_owned(),
    ];
    if strips {
        plan.push(format!(
            "cache up to {} full-length frames per unlabeled video in {}",
            cfg.strip_frames,
            layout.frame_cache.display()
        ));
    }
    if ctx.plan(&plan) {
        return Ok(());
    }

    let _lock = ctx.lock()?;
    let mut manifest = Manifest::load(&layout.manifest)?;
    let cache = FrameCache::new(&layout.frame_cache);
    let ids: Vec<LocalId> = manifest.videos().iter().map(|v| v.local_id().clone()).collect();
    let (mut built, mut cached, mut skipped, mut failed, mut strip_count) = (0, 0, 0, 0, 0);
    let mut dirty = false;
    for id in &ids {
        let video = manifest.get(id).expect("listed above").clone();
        let Some(label) = video.label else {
            if strips && cache.load_index(id)?.is_none() {
                match build_strip(ctx, &decoder, &cache, id, video.record.duration_s) {
                    Ok(()) => strip_count += 1,
                    Err(e) => {
                        eprintln!("warning: strip for {id}: {e}");
                        failed += 1;
                    }
                }
            }
            continue;
        };
        let interval = match (label, video.interval) {
            (_, Some(iv)) => iv,
            (Label::Relevant, None) => {
                eprintln!("warning: {id} is relevant but has no interval yet");
                skipped += 1;
                continue;
            }
            (Label::Irrelevant, None) => {
                dirty = true;
                manifest
                    .assign_machine_interval(id, ctx.run.interval_seed(id))?
                    .interval
                    .expect("just assigned")
            }
        };
        let stem = ctx.tensor_stem(id);
        if sidecar_path(&stem).exists() {
            cached += 1;
            continue;
        }
        let Some(path) = find_video(&layout.videos, id) else {
            eprintln!("warning: no video file for {id} in {}", layout.videos.display());
            failed += 1;
            continue;
        };
        let seq = decoder
            .enumerate_frames(&path, &interval)
            .and_then(|raw| build_sequence(id.clone(), &raw.frames, &cfg.sample_policy, &cfg.preprocess));
        match seq {
            Ok(seq) => {
                seq.save(&stem)?;
                manifest.set_frame_count(id, seq.native_count as u64)?;
                dirty = true;
                built += 1;
            }
            Err(e) => {
                eprintln!("warning: {id}: {e}");
                failed += 1;
            }
        }
    }
    if dirty {
        manifest.save(&layout.manifest)?;
    }
    println!("built {built}, already cached {cached}, awaiting interval {skipped}, failed {failed}");
    if strips {
        println!("cached {strip_count} annotation strips");
    }
    if failed > 0 {
        return Err(CliError::Failed(format!("{failed} videos could not be prepared")));
    }
    Ok(())
}

fn build_strip(ctx: &Ctx, decoder: &Decoder, cache: &FrameCache, id: &LocalId, duration_s: f64) -> Result<(), CliError> {
    let path = find_video(&ctx.run.layout.videos, id)
        .ok_or_else(|| CliError::Failed(format!("no video file for {id}")))?;
    let whole = Interval::new(0.0, duration_s).map_err(flukefinder::corpus::CorpusError::from)?;
    let raw = decoder.enumerate_frames(&path, &whole)?;
    let n = raw.frames.len();
    let keep = uniform_sample_indices(n, ctx.run.config.strip_frames.clamp(1, n.max(1)))?;
    let frames: Vec<_> = keep.iter().map(|&i| raw.frames[i].clone()).collect();
    let index = FrameIndex {
        local_id: id.clone(),
        interval: whole,
        native_count: n,
        timestamps: keep.iter().map(|&i| raw.timestamps[i]).collect(),
        extracted_at: Utc::now(),
    };
    cache.store(&index, &frames)?;
    Ok(())
}

pub fn extract_features(ctx: &Ctx) -> Result<(), CliError> {
    let spec = &ctx.run.backbone;
    let features = ctx.feature_cache();
    let source = match &spec.model_path {
        Some(p) => p.display().to_string(),
        None => "built-in".to_owned(),
    };
    if ctx.plan(&[
        format!(
            "embed frame tensors from {} with backbone {:?} ({source}, D = {})",
            ctx.run.layout.tensors.display(),
            spec.name,
            spec.output_dim
        ),
        format!("write features to {}", features.root().join(&spec.name).display()),
    ]) {
        return Ok(());
    }
    let backbone = load_backbone(spec)?;
    let manifest = Manifest::load(&ctx.run.layout.manifest)?;
    let (mut done, mut cached, mut missing) = (0, 0, 0);
    for video in manifest.videos() {
        let id = video.local_id();
        let stem = ctx.tensor_stem(id);
        if !sidecar_path(&stem).exists() {
            if video.label.is_some() {
                missing += 1;
            }
            continue;
        }
        if features.contains(&spec.name, id) {
            cached += 1;
            continue;
        }
        let frames = FrameSequence::load(&stem)?;
        features.store(&spec.name, &extract(backbone.as_ref(), &frames)?)?;
        done += 1;
    }
    println!("extracted {done}, already cached {cached}, labeled without frames {missing}");
    Ok(())
}

/// Labeled videos with cached features, in manifest order.
fn labeled_dataset(ctx: &Ctx) -> Result<Vec<(FeatureSequence, Label)>, CliError> {
    let manifest = Manifest::load(&ctx.run.layout.manifest)?;
    let cache = ctx.feature_cache();
    let name = &ctx.run.backbone.name;
    let mut out = Vec::new();
    let mut missing = 0;
    for video in manifest.videos() {
        let Some(label) = video.label else { continue };
        if cache.contains(name, video.local_id()) {
            out.push((cache.load(name, video.local_id())?, label));
        } else {
            missing += 1;
        }
    }
    if missing > 0 {
        eprintln!("warning: {missing} labeled videos have no {name} features and are left out");
    }
    if out.is_empty() {
        return Err(CliError::Failed(format!(
            "no labeled videos with {name} features under {}",
            cache.root().display()
        )));
    }
    Ok(out)
}

pub fn train(ctx: &Ctx) -> Result<(), CliError> {
    let path = ctx.run.layout.checkpoints.join(CHECKPOINT_FILE);
    let t = &ctx.run.train;
    if ctx.plan(&[
        format!(
            "train on labeled {} features: {} epochs, batch {}, lr {}",
            ctx.run.backbone.name, t.epochs, t.batch_size, t.learning_rate
        ),
        format!("write checkpoint {}", path.display()),
    ]) {
        return Ok(());
    }
    let dataset = labeled_dataset(ctx)?;
    let outcome = flukefinder::seqclassifier::train(&dataset, t)?;
    checkpoint::save(&path, &outcome.params, t)?;
    let last = outcome.history.last().copied().unwrap_or(f64::NAN);
    println!(
        "trained on {} videos; final epoch loss {last:.4}; wrote {}",
        dataset.len(),
        path.display()
    );
    Ok(())
}

pub fn crossval(ctx: &Ctx) -> Result<(), CliError> {
    let reports = &ctx.run.layout.reports;
    let k = ctx.run.config.folds.k;
    if ctx.plan(&[
        format!("{k}-fold stratified cross-validation on labeled {} features", ctx.run.backbone.name),
        format!(
            "write {CROSSVAL_CSV}, {CROSSVAL_TXT}, {FOLDS_JSON} and {PREDICTIONS_NDJSON} to {}",
            reports.display()
        ),
    ]) {
        return Ok(());
    }
    let dataset = labeled_dataset(ctx)?;
    let outcome = run_crossval(&dataset, k, ctx.run.fold_seed, &ctx.run.train)?;

    fs::create_dir_all(reports).map_err(CliError::io(reports))?;
    let text = render_report(&outcome.summary, ReportFormat::Text);
    write_file(&reports.join(CROSSVAL_CSV), render_report(&outcome.summary, ReportFormat::Csv).as_bytes())?;
    write_file(&reports.join(CROSSVAL_TXT), text.as_bytes())?;
    let folds = serde_json::to_vec_pretty(&outcome.spec).expect("fold spec serializes");
    write_file(&reports.join(FOLDS_JSON), &folds)?;
    let mut lines = Vec::new();
    for p in &outcome.predictions {
        serde_json::to_writer(&mut lines, p).expect("prediction serializes");
        lines.push(b'\n');
    }
    write_file(&reports.join(PREDICTIONS_NDJSON), &lines)?;
    print!("{text}");
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    flukefinder::tensor_file::write_atomic(path, bytes).map_err(CliError::io(path))
}

#[derive(Serialize)]
struct PredictionLine<'a> {
    local_id: &'a LocalId,
    #[serde(flatten)]
    prediction: Prediction,
}

pub fn predict_cmd(ctx: &Ctx, checkpoint_path: Option<&Path>, inputs: &[String]) -> Result<(), CliError> {
    if inputs.is_empty() {
        return Err(CliError::Usage(
            "predict needs at least one feature file stem or local id".into(),
        ));
    }
    let path = checkpoint_path
        .map(Path::to_path_buf)
        .unwrap_or_else(|| ctx.run.layout.checkpoints.join(CHECKPOINT_FILE));
    if ctx.plan(&[format!(
        "score {} feature sequences with {}",
        inputs.len(),
        path.display()
    )]) {
        return Ok(());
    }
    let ckpt = checkpoint::load(&path)?;
    let cache = ctx.feature_cache();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for input in inputs {
        let stem = PathBuf::from(input);
        let features = if sidecar_path(&stem).exists() {
            FeatureSequence::load(&stem)?
        } else {
            cache.load(&ctx.run.backbone.name, &LocalId::new(input.as_str()))?
        };
        let prediction = predict(&ckpt.params, &features)?;
        let line = PredictionLine {
            local_id: &features.local_id,
            prediction,
        };
        let json = serde_json::to_string(&line).expect("prediction serializes");
        writeln!(out, "{json}").map_err(CliError::io("<stdout>"))?;
    }
    Ok(())
}

pub fn report(ctx: &Ctx, input: Option<&Path>, format: ReportFormat) -> Result<(), CliError> {
    let path = input
        .map(Path::to_path_buf)
        .unwrap_or_else(|| ctx.run.layout.reports.join(CROSSVAL_CSV));
    if ctx.plan(&[format!("render fold reports from {}", path.display())]) {
        return Ok(());
    }
    let text = fs::read_to_string(&path).map_err(CliError::io(&path))?;
    let mut folds = Vec::new();
    let mut stored = None;
    for (name, scores) in parse_csv(&text)? {
        if name.eq_ignore_ascii_case("average") {
            stored = Some(scores);
            continue;
        }
        let fold = name
            .parse()
            .map_err(|_| CliError::Failed(format!("{}: fold label {name:?} is not a number", path.display())))?;
        folds.push(FoldReport {
            fold,
            scores,
            confusion: None,
        });
    }
    // The stored average was taken before rounding; prefer it.
    let summary = match stored {
        Some(average) if !folds.is_empty() => CvSummary { folds, average },
        _ => average(folds)?,
    };
    print!("{}", render_report(&summary, format));
    Ok(())
}

pub fn annotate(ctx: &Ctx, bind: Option<&str>) -> Result<(), CliError> {
    let addr = ctx.run.bind_addr(bind)?;
    let layout = &ctx.run.layout;
    if ctx.plan(&[
        format!("serve the annotation API on http://{addr}"),
        format!("read and update {}", layout.manifest.display()),
        format!("serve frames from {}", layout.frame_cache.display()),
    ]) {
        return Ok(());
    }
    let config = ServiceConfig {
        corpus_dir: layout.corpus_dir.clone(),
        manifest_path: layout.manifest.clone(),
        frame_cache: layout.frame_cache.clone(),
        seed: ctx.run.config.seed,
    };
    let runtime = tokio::runtime::Runtime::new().map_err(CliError::io("<tokio runtime>"))?;
    eprintln!("annotation service listening on http://{addr}");
    runtime.block_on(flukefinder_annotate::serve(config, addr))?;
    Ok(())
}

/// Duration given to every synthetic video.
pub const SYNTH_DURATION_S: f64 = 60.0;

pub fn synth(ctx: &Ctx, spec: SyntheticSpec) -> Result<(), CliError> {
    let layout = &ctx.run.layout;
    let name = &ctx.run.backbone.name;
    if ctx.plan(&[
        format!(
            "generate {} labeled sequences of {}x{} (separation {} sd)",
            spec.count, spec.steps, spec.dim, spec.separation
        ),
        format!("write manifest {}", layout.manifest.display()),
        format!("write features to {}", layout.features.join(name).display()),
    ]) {
        return Ok(());
    }
    let _lock = ctx.lock()?;
    let data = synthetic_corpus(&spec);
    let cache = ctx.feature_cache();
    let retrieved_at: DateTime<Utc> = Utc.timestamp_opt(0, 0).single().expect("epoch");
    let mut manifest = Manifest::new();
    for (features, label) in &data {
        let id = &features.local_id;
        manifest.insert(AnonymizedRecord {
            local_id: id.clone(),
            duration_s: SYNTH_DURATION_S,
            retrieved_at,
            query: "synthetic".into(),
        })?;
        manifest.upsert_label(id, *label)?;
        match label {
            Label::Relevant => {
                let iv = Interval::new(10.0, 22.0).map_err(flukefinder::corpus::CorpusError::from)?;
                manifest.set_interval(id, iv)?;
            }
            Label::Irrelevant => {
                manifest.assign_machine_interval(id, ctx.run.interval_seed(id))?;
            }
        }
        manifest.set_frame_count(id, spec.steps as u64)?;
        cache.store(name, features)?;
    }
    manifest.save(&layout.manifest)?;
    let counts = manifest.class_counts();
    println!(
        "wrote {} synthetic videos ({} relevant, {} irrelevant)",
        manifest.len(),
        counts.relevant,
        counts.irrelevant
    );
    Ok(())
}
