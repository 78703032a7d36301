use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{anyhow, Context};
use lapsekit::catalog::{
    compute_stats, load_manifest, save_manifest, to_canonical_json_pretty, LoadedManifest, StatsConfig, Status,
};
use lapsekit::curation::{
    metadata_filter, run_closed_loop, CaptionProvider, CaptioningClient, DirStore, FilterDecision, FilterPolicy,
    HttpProvider, LoopOptions, MockProvider,
};
use lapsekit::embeddings::{clipsim, EmbeddingProvider, HttpEmbedder};
use lapsekit::media_io::{load_cmrv, ExternalDecoder, VideoBuffer};
use lapsekit::sampler::{extract, SamplerParams};
use lapsekit::transition::{detect_transitions, DetectorParams, TransitionReport};
use lapsekit_kernel::diffusion::{null_text_mask, sample_ddim, SampleOptions};
use lapsekit_kernel::{linear_beta_schedule, PointMassDenoiser, Tensor5};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::{
    CaptionArgs, ClipsimArgs, Command, DdimArgs, DetectorArgs, EmbedArgs, EmbedderKind, FilterArgs, InputArgs,
    OutputArgs, ProviderKind, SampleArgs, SegmentArgs, StatsArgs,
};

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Complete,
    Partial { failed: usize, total: usize },
}

impl Outcome {
    fn from_counts(failed: usize, total: usize) -> Self {
        if failed == 0 {
            Outcome::Complete
        } else {
            Outcome::Partial { failed, total }
        }
    }
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Fatal(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Fatal(e)
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

pub fn run(command: Command) -> Result<Outcome, Failure> {
    match command {
        Command::Segment(a) => segment(a),
        Command::Sample(a) => sample(a),
        Command::Filter(a) => filter(a),
        Command::Caption(a) => caption(a),
        Command::Stats(a) => stats(a),
        Command::Clipsim(a) => clipsim_cmd(a),
        Command::Ddim(a) => ddim(a),
    }
}

fn parse_size(s: &str) -> Result<(u32, u32), Failure> {
    let bad = || usage(format!("--decode-size expects WxH, got {s:?}"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let w: u32 = w.trim().parse().map_err(|_| bad())?;
    let h: u32 = h.trim().parse().map_err(|_| bad())?;
    if w == 0 || h == 0 {
        return Err(bad());
    }
    Ok((w, h))
}

struct VideoSource {
    decoder: Option<ExternalDecoder>,
}

impl VideoSource {
    fn new(args: &InputArgs) -> Result<Self, Failure> {
        let decoder = match &args.decoder {
            Some(program) => {
                let (w, h) = parse_size(&args.decode_size)?;
                Some(ExternalDecoder::new(program, w, h))
            }
            None => None,
        };
        Ok(VideoSource { decoder })
    }

    fn load(&self, path: &Path) -> anyhow::Result<VideoBuffer> {
        let is_cmrv = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("cmrv"));
        let video = match (&self.decoder, is_cmrv) {
            (_, true) => load_cmrv(path)?,
            (Some(d), false) => {
                let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                d.decode(path)?.with_source_id(id)
            }
            (None, false) => return Err(anyhow!("not a .cmrv file and no --decoder given")),
        };
        Ok(video)
    }
}

fn build_embedder(args: &EmbedArgs) -> Result<EmbeddingProvider, Failure> {
    match args.embedder {
        EmbedderKind::Pixel => Ok(EmbeddingProvider::pixel()),
        EmbedderKind::Http => {
            let endpoint = args
                .embed_endpoint
                .as_deref()
                .ok_or_else(|| usage("--embedder http needs --embed-endpoint or EMBED_ENDPOINT"))?;
            if args.embed_dim == 0 || args.embed_max_in_flight == 0 {
                return Err(usage("--embed-dim and --embed-max-in-flight must be positive"));
            }
            Ok(EmbeddingProvider::External(HttpEmbedder::new(
                endpoint,
                args.embed_dim,
                args.embed_max_in_flight,
            )))
        }
    }
}

fn detector_params(args: &DetectorArgs) -> Result<DetectorParams, Failure> {
    DetectorParams::new(args.theta, args.vartheta).map_err(|e| usage(e.to_string()))
}

/// Runs `f` over `items` on up to `jobs` threads; results keep input order.
fn parallel_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, items.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().unwrap_or_else(|e| e.into_inner()).expect("every slot filled"))
        .collect()
}

fn check_output(output: &OutputArgs, inputs: usize) -> Result<(), Failure> {
    if output.out.is_some() && inputs > 1 {
        return Err(usage("--out takes a single input; use --out-dir for several"));
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, format!("{text}\n")).with_context(|| format!("writing {}", path.display()))
}

/// Writes one JSON document per input and reports per-input failures.
fn emit(
    inputs: &[PathBuf],
    results: Vec<anyhow::Result<(String, String)>>,
    output: &OutputArgs,
    suffix: &str,
) -> Result<Outcome, Failure> {
    if let Some(dir) = &output.out_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut failed = 0;
    for (path, result) in inputs.iter().zip(results) {
        let written = result.and_then(|(id, body)| match (&output.out, &output.out_dir) {
            (Some(file), _) => write_text(file, &body),
            (None, Some(dir)) => write_text(&dir.join(format!("{id}.{suffix}.json")), &body),
            (None, None) => {
                println!("{body}");
                Ok(())
            }
        });
        if let Err(e) = written {
            eprintln!("error: {}: {e:#}", path.display());
            failed += 1;
        }
    }
    Ok(Outcome::from_counts(failed, inputs.len()))
}

fn segment(args: SegmentArgs) -> Result<Outcome, Failure> {
    check_output(&args.output, args.input.inputs.len())?;
    let params = detector_params(&args.detector)?;
    let embedder = build_embedder(&args.embed)?;
    let source = VideoSource::new(&args.input)?;
    let results = parallel_map(&args.input.inputs, args.input.jobs, |path| {
        let video = source.load(path)?;
        let report = detect_transitions(&video, &params, &embedder)?;
        Ok((video.source_id().to_string(), to_canonical_json_pretty(&report)?))
    });
    emit(&args.input.inputs, results, &args.output, "transitions")
}

fn sample(args: SampleArgs) -> Result<Outcome, Failure> {
    check_output(&args.output, args.input.inputs.len())?;
    if args.report.is_some() && args.input.inputs.len() > 1 {
        return Err(usage("--report takes a single input"));
    }
    let params = SamplerParams {
        n_frames: args.frames,
        delta: args.delta,
        prob: args.prob,
        seed: args.seed,
    };
    params.validate().map_err(|e| usage(e.to_string()))?;
    let detector = detector_params(&args.detector)?;
    let embedder = build_embedder(&args.embed)?;
    let source = VideoSource::new(&args.input)?;
    let given: Option<TransitionReport> = match &args.report {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Some(serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?)
        }
        None => None,
    };
    let results = parallel_map(&args.input.inputs, args.input.jobs, |path| {
        let video = source.load(path)?;
        let report = match &given {
            Some(r) => r.clone(),
            None => detect_transitions(&video, &detector, &embedder)?,
        };
        let mut rng = params.rng_for(video.source_id());
        let plan = extract(&video, &report, &params, &mut rng)?;
        Ok((video.source_id().to_string(), to_canonical_json_pretty(&plan)?))
    });
    emit(&args.input.inputs, results, &args.output, "plan")
}

fn read_manifest(path: &Path) -> Result<LoadedManifest, Failure> {
    let loaded = load_manifest(path).map_err(|e| Failure::Fatal(e.into()))?;
    for d in &loaded.diagnostics {
        eprintln!("error: {}:{}: {}", path.display(), d.line, d.message);
    }
    Ok(loaded)
}

/// Where an updated manifest goes; refuses to rewrite in place when lines were dropped.
fn manifest_target(input: &Path, out: &Option<PathBuf>, loaded: &LoadedManifest) -> anyhow::Result<PathBuf> {
    match out {
        Some(p) => Ok(p.clone()),
        None if loaded.diagnostics.is_empty() => Ok(input.to_path_buf()),
        None => Err(anyhow!(
            "{} has malformed lines; pass --out to write the readable records elsewhere",
            input.display()
        )),
    }
}

fn policy(min_title_chars: usize, min_views: u64, banned: &[String]) -> FilterPolicy {
    let mut p = FilterPolicy {
        min_title_chars,
        min_views,
        ..FilterPolicy::default()
    };
    for tag in banned {
        p = p.ban(tag);
    }
    p
}

fn filter(args: FilterArgs) -> Result<Outcome, Failure> {
    let loaded = read_manifest(&args.manifest)?;
    let target = manifest_target(&args.manifest, &args.out, &loaded)?;
    let policy = policy(args.min_title_chars, args.min_views, &args.banned);
    let mut failed = loaded.diagnostics.len();
    let mut records = loaded.records.clone();
    for r in records.iter_mut().filter(|r| r.status == Status::Ingested) {
        match metadata_filter(r, &policy) {
            Ok(FilterDecision::Keep) => r.status = Status::Kept,
            Ok(FilterDecision::Reject(reason)) => r.status = Status::Rejected(reason),
            Err(e) => {
                eprintln!("error: {e}");
                failed += 1;
            }
        }
    }
    save_manifest(&target, &records).map_err(|e| Failure::Fatal(e.into()))?;
    Ok(Outcome::from_counts(failed, records.len() + loaded.diagnostics.len()))
}

fn caption(args: CaptionArgs) -> Result<Outcome, Failure> {
    if args.keyframes == 0 || args.jobs == 0 || args.max_in_flight == 0 {
        return Err(usage("--keyframes, --jobs and --max-in-flight must be positive"));
    }
    let provider: Box<dyn CaptionProvider> = match args.provider {
        ProviderKind::Mock => {
            let mut m = MockProvider::new();
            for marker in &args.reject_markers {
                m = m.with_reject_marker(marker.clone());
            }
            Box::new(m)
        }
        ProviderKind::Http => {
            let endpoint = args
                .endpoint
                .as_deref()
                .ok_or_else(|| usage("--provider http needs --endpoint or CAPTION_ENDPOINT"))?;
            Box::new(HttpProvider::from_env(endpoint))
        }
    };
    let loaded = read_manifest(&args.manifest)?;
    let target = manifest_target(&args.manifest, &args.out, &loaded)?;
    let client = CaptioningClient::new(provider, args.max_in_flight, args.retries);
    let store = DirStore::new(&args.videos);
    let policy = policy(args.min_title_chars, args.min_views, &[]);
    let outcome = run_closed_loop(
        &loaded.records,
        &store,
        &policy,
        &client,
        LoopOptions {
            keyframes: args.keyframes,
            jobs: args.jobs,
        },
    );
    for f in &outcome.failures {
        eprintln!("error: record {:?}: {}", f.id, f.error);
    }
    save_manifest(&target, &outcome.records).map_err(|e| Failure::Fatal(e.into()))?;
    Ok(Outcome::from_counts(
        outcome.failures.len() + loaded.diagnostics.len(),
        outcome.records.len() + loaded.diagnostics.len(),
    ))
}

fn stats(args: StatsArgs) -> Result<Outcome, Failure> {
    let loaded = read_manifest(&args.manifest)?;
    let stats = compute_stats(&loaded.records, &StatsConfig::default());
    let body = to_canonical_json_pretty(&stats).map_err(|e| Failure::Fatal(e.into()))?;
    match &args.out {
        Some(p) => {
            write_text(p, &body)?;
            print!("{}", stats.to_table());
        }
        None => println!("{body}"),
    }
    Ok(Outcome::from_counts(
        loaded.diagnostics.len(),
        loaded.records.len() + loaded.diagnostics.len(),
    ))
}

fn clipsim_cmd(args: ClipsimArgs) -> Result<Outcome, Failure> {
    check_output(&args.output, args.input.inputs.len())?;
    let embedder = build_embedder(&args.embed)?;
    let source = VideoSource::new(&args.input)?;
    let results = parallel_map(&args.input.inputs, args.input.jobs, |path| {
        let video = source.load(path)?;
        let score = clipsim(video.frames(), &args.text, &embedder)?;
        let doc = json!({
            "schema": REPORT_SCHEMA,
            "source_id": video.source_id(),
            "text": args.text,
            "frames": video.frame_count(),
            "clipsim": score,
        });
        Ok((video.source_id().to_string(), serde_json::to_string_pretty(&doc)?))
    });
    emit(&args.input.inputs, results, &args.output, "clipsim")
}

fn parse_shape(s: &str) -> Result<[usize; 5], Failure> {
    let bad = || usage(format!("--shape expects five positive integers B,C,F,H,W, got {s:?}"));
    let dims: Vec<usize> = s
        .split(',')
        .map(|d| d.trim().parse::<usize>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    let shape: [usize; 5] = dims.try_into().map_err(|_| bad())?;
    if shape.contains(&0) {
        return Err(bad());
    }
    Ok(shape)
}

fn ddim(args: DdimArgs) -> Result<Outcome, Failure> {
    let shape = parse_shape(&args.shape)?;
    let schedule =
        linear_beta_schedule(args.train_steps, args.beta_start, args.beta_end).map_err(|e| usage(e.to_string()))?;
    if args.steps == 0 || args.steps > args.train_steps {
        return Err(usage(format!("--steps must lie in 1..={}", args.train_steps)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let null_mask = null_text_mask(shape[0], args.null_ratio, &mut rng).map_err(|e| usage(e.to_string()))?;
    let target = Tensor5::randn(shape, &mut rng);
    let start = Tensor5::randn(shape, &mut rng);
    let denoiser = PointMassDenoiser::new(target.clone(), schedule.clone());
    let options = SampleOptions {
        steps: args.steps,
        guidance: args.guidance,
    };
    let out = sample_ddim(&denoiser, &schedule, start, Some(&[1.0]), options).map_err(|e| Failure::Fatal(e.into()))?;
    let error = out.max_abs_diff(&target).map_err(|e| Failure::Fatal(e.into()))?;
    if let Some(p) = &args.out_tensor {
        std::fs::write(p, out.to_bytes()).with_context(|| format!("writing {}", p.display()))?;
    }
    let doc = json!({
        "schema": REPORT_SCHEMA,
        "shape": shape,
        "steps": args.steps,
        "guidance": args.guidance,
        "train_steps": args.train_steps,
        "seed": args.seed,
        "null_mask": null_mask,
        "max_abs_error": error,
    });
    let body = serde_json::to_string_pretty(&doc).map_err(|e| Failure::Fatal(e.into()))?;
    match &args.out {
        Some(p) => write_text(p, &body)?,
        None => println!("{body}"),
    }
    Ok(Outcome::Complete)
}
