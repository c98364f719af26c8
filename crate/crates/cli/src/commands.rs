use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Value};
use vigil_core::classify::{
    motion_features, reference_model_cards, train_toy, Classifier, LabeledFeatures, ModelCard, StubClassifier,
    ToyClassifier, ToyModel, ToyTrainConfig,
};
use vigil_core::eval::{
    capacity_plan, confusion_from_records, measure_throughput, misclass_breakdown, parse_annotation_file, percent,
    stratified_split, tradeoff_report, write_annotation_file, ChunkSample, ClassMetrics, DatasetManifest, EvalRecord,
    MacroMetrics, ManifestEntry, SplitSpec, NORMAL_ACTION_NAMES,
};
use vigil_core::fixtures::{write_fixtures, FixtureError, FixtureEvent, FixtureSpec, GroundTruth, GROUND_TRUTH_FILE};
use vigil_core::ingest::{
    open_stream, put_chunk, segment_all, ChunkStore, FsChunkStore, MemoryChunkStore, Segment, StoreError,
};
use vigil_core::pipeline::build_test_pipeline;
use vigil_core::ClassLabel;
use vigil_service::api::{router, ApiState};
use vigil_service::model_server::{model_server, ModelServerState};
use vigil_service::notify::{Dispatcher, LogSink, NotificationSink, WebhookSink};
use vigil_service::remote::{RemoteClassifier, RemoteConfig};
use vigil_service::server::serve_until_interrupt;
use vigil_service::simulate::{simulate, RunReport, SimulationConfig};
use vigil_service::{Backend, BackendError};

use crate::config::{ClassifierKind, RunConfig, SinkKind};
use crate::{failed, invalid, BenchArgs, CapacityArgs, CliError, Command, EvaluateArgs, GenFixturesArgs};
use crate::{Cli, PrepareDatasetArgs, ServeArgs, SimulateArgs, TradeoffArgs, TrainToyArgs};

type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn dispatch(cli: &Cli, cfg: &RunConfig) -> Result<()> {
    let json = cli.json;
    match &cli.command {
        Command::GenFixtures(a) => gen_fixtures(a, cfg, json),
        Command::PrepareDataset(a) => prepare_dataset(a, cfg, json),
        Command::Simulate(a) => simulate_cmd(a, cfg, json),
        Command::Serve(a) => serve(a, cfg),
        Command::Evaluate(a) => evaluate(a, json),
        Command::BenchThroughput(a) => bench(a, cfg, json),
        Command::CapacityPlan(a) => capacity(a, cfg, json),
        Command::ReportTradeoffs(a) => tradeoffs(a, json),
        Command::TrainToy(a) => train_toy_cmd(a, cfg, json),
    }
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(failed)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}").map_err(failed)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| failed(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| failed(format!("{}: {e}", path.display())))
}

fn fixture_error(e: FixtureError) -> CliError {
    match e {
        FixtureError::Io(_) => failed(e),
        other => invalid(other),
    }
}

fn backend_error(e: BackendError) -> CliError {
    match e {
        BackendError::Persistence(_) => failed(e),
        other => invalid(other),
    }
}

// gen-fixtures

fn parse_event(text: &str) -> Result<FixtureEvent> {
    let bad = || invalid(format!("malformed event {text:?}, expected STREAM:START_S:DURATION_S:CODE[:SUBTYPE]"));
    let parts: Vec<&str> = text.split(':').collect();
    if !(4..=5).contains(&parts.len()) {
        return Err(bad());
    }
    Ok(FixtureEvent {
        stream_id: parts[0].to_string(),
        start_s: parts[1].parse().map_err(|_| bad())?,
        duration_s: parts[2].parse().map_err(|_| bad())?,
        action_code: parts[3].parse().map_err(|_| bad())?,
        normal_subtype: parts.get(4).map(|s| s.parse()).transpose().map_err(|_| bad())?,
    })
}

fn load_fixture_spec(path: &Path) -> Result<FixtureSpec> {
    let bytes = read(path)?;
    let text = String::from_utf8(bytes).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let is_toml = path.extension().is_some_and(|e| e == "toml");
    if is_toml {
        toml::from_str(&text).map_err(|e| invalid(format!("{}: {}", path.display(), e.message())))
    } else {
        serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
    }
}

fn gen_fixtures(a: &GenFixturesArgs, cfg: &RunConfig, json: bool) -> Result<()> {
    let spec = match &a.spec {
        Some(p) => load_fixture_spec(p)?,
        None => {
            let events = a.events.iter().map(|e| parse_event(e)).collect::<Result<Vec<_>>>()?;
            let mut spec = FixtureSpec::new(a.streams, a.duration_s, a.seed.unwrap_or(cfg.seed), events);
            spec.window_s = cfg.window_s;
            spec
        }
    };
    let truth = write_fixtures(&a.out, &spec).map_err(fixture_error)?;
    if json {
        return print_json(&truth);
    }
    println!(
        "wrote {} streams ({} chunks, {} critical) to {}",
        truth.streams.len(),
        truth.chunks.len(),
        truth.critical_chunks(),
        a.out.display()
    );
    for c in truth.chunks.iter().filter(|c| c.label.is_critical()) {
        println!("  {} {}", c.chunk_id, c.label);
    }
    Ok(())
}

// prepare-dataset

fn synthetic_manifest(sizes: &[usize]) -> DatasetManifest {
    let mut entries = Vec::new();
    for (label, &n) in ClassLabel::ALL.iter().zip(sizes) {
        for i in 0..n {
            let normal_subtype = (*label == ClassLabel::Normal).then(|| (i % NORMAL_ACTION_NAMES.len()) as u8);
            entries.push(ManifestEntry {
                relative_path: format!("{}/{i:05}.svf", label.name().to_ascii_lowercase()),
                label: *label,
                normal_subtype,
            });
        }
    }
    DatasetManifest { entries }
}

fn prepare_dataset(a: &PrepareDatasetArgs, cfg: &RunConfig, json: bool) -> Result<()> {
    let manifest = if let Some(p) = &a.manifest {
        serde_json::from_slice::<DatasetManifest>(&read(p)?).map_err(|e| invalid(format!("{}: {e}", p.display())))?
    } else if let Some(p) = &a.annotations {
        parse_annotation_file(&read(p)?).map_err(|e| invalid(format!("{}: {e}", p.display())))?
    } else if let Some(sizes) = &a.class_sizes {
        if sizes.len() != ClassLabel::ALL.len() {
            return Err(invalid(format!("--class-sizes needs {} values, got {}", ClassLabel::ALL.len(), sizes.len())));
        }
        synthetic_manifest(sizes)
    } else {
        return Err(invalid("one of --manifest, --annotations or --class-sizes is required"));
    };
    let spec = SplitSpec { train: a.train, val: a.val, test: a.test, seed: a.seed.unwrap_or(cfg.seed) };
    let (train, val, test) = stratified_split(&manifest, &spec).map_err(invalid)?;
    let mut summary = BTreeMap::new();
    for (name, part) in [("train", &train), ("val", &val), ("test", &test)] {
        let bytes = write_annotation_file(part).map_err(invalid)?;
        write(&a.out.join(format!("{name}.txt")), &bytes)?;
        summary.insert(name, part.class_counts());
    }
    if json {
        return print_json(&json!({ "seed": spec.seed, "class_counts": summary }));
    }
    println!("{:<6} {:>8} {:>10} {:>9} {:>7}", "split", "Falling", "Staggering", "ChestPain", "Normal");
    for name in ["train", "val", "test"] {
        let c = summary[name];
        println!("{name:<6} {:>8} {:>10} {:>9} {:>7}", c[0], c[1], c[2], c[3]);
    }
    println!("annotation files in {}", a.out.display());
    Ok(())
}

// shared plumbing

fn build_classifier(cfg: &RunConfig) -> Result<Arc<dyn Classifier>> {
    let c = &cfg.classifier;
    Ok(match c.kind {
        ClassifierKind::Stub => Arc::new(StubClassifier),
        ClassifierKind::Toy => {
            let path = c.model_path.as_ref().expect("validated");
            let inner: ToyClassifier = serde_json::from_slice(&read(path)?)
                .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
            Arc::new(ToyModel::new("toy-linear", inner).map_err(invalid)?)
        }
        ClassifierKind::Remote => {
            let rc = RemoteConfig {
                endpoint: c.endpoint.clone().expect("validated"),
                timeout: Duration::from_secs_f64(c.timeout_s),
                retries: c.retries,
            };
            Arc::new(RemoteClassifier::new(rc).map_err(failed)?)
        }
    })
}

fn build_sink(cfg: &RunConfig) -> Result<Arc<dyn NotificationSink>> {
    let n = &cfg.notifications;
    Ok(match n.sink {
        SinkKind::Log => Arc::new(LogSink::stderr()),
        SinkKind::Webhook => {
            let url = n.url.clone().expect("validated");
            Arc::new(WebhookSink::new(url, Duration::from_secs_f64(n.timeout_s)).map_err(failed)?)
        }
    })
}

fn open_backend(path: &Path) -> Result<Backend> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| failed(format!("{}: {e}", parent.display())))?;
    }
    Backend::open(path).map_err(|e| failed(format!("{}: {e}", path.display())))
}

fn open_store(root: &Path) -> Result<FsChunkStore> {
    FsChunkStore::open(root).map_err(|e| failed(format!("{}: {e}", root.display())))
}

fn load_truth(path: &Path) -> Result<(GroundTruth, PathBuf)> {
    let (dir, file) = if path.is_dir() {
        (path.to_path_buf(), path.join(GROUND_TRUTH_FILE))
    } else {
        (path.parent().map(Path::to_path_buf).unwrap_or_default(), path.to_path_buf())
    };
    let truth: GroundTruth =
        serde_json::from_slice(&read(&file)?).map_err(|e| invalid(format!("{}: {e}", file.display())))?;
    Ok((truth, dir))
}

fn fixture_segments(dir: &Path, window_s: f64) -> Result<Vec<Segment>> {
    let (truth, dir) = load_truth(dir)?;
    let mut out = Vec::new();
    for src in truth.sources(&dir) {
        let handle = open_stream(src).map_err(invalid)?;
        out.extend(segment_all(handle, window_s).map_err(failed)?);
    }
    Ok(out)
}

// simulate

fn simulate_cmd(a: &SimulateArgs, cfg: &RunConfig, json: bool) -> Result<()> {
    let (truth, dir) = load_truth(&a.fixtures)?;
    let sim = SimulationConfig {
        window_s: cfg.window_s,
        strategy: cfg.sampling,
        transform: cfg.transform.clone(),
        retry: cfg.notifications.retry_policy(),
        ..SimulationConfig::default()
    };
    let classifier = build_classifier(cfg)?;
    let sink = build_sink(cfg)?;
    let (store, backend): (Box<dyn ChunkStore>, Backend) = if a.ephemeral {
        (Box::new(MemoryChunkStore::new()), Backend::open_in_memory().map_err(failed)?)
    } else {
        (Box::new(open_store(&cfg.store_root)?), open_backend(&cfg.database)?)
    };
    let report = simulate(truth.sources(&dir), &sim, store.as_ref(), &backend, classifier.as_ref(), sink.as_ref())
        .map_err(backend_error)?;
    if json {
        return print_json(&report);
    }
    print_run_report(&report);
    Ok(())
}

fn print_run_report(r: &RunReport) {
    println!("streams              {}", r.streams);
    println!("chunks processed     {}", r.chunks_processed);
    println!("inferences           {}", r.inferences);
    println!("alerts raised        {}", r.alerts_raised);
    println!("notifications sent   {}", r.notifications_sent);
    println!("notifications failed {}", r.notifications_failed);
    println!("chunk failures       {}", r.chunk_failures);
    for c in r.chunks.iter().filter(|c| c.alert) {
        println!("  alert  {} {}", c.chunk_id, c.label.map(|l| l.name()).unwrap_or("-"));
    }
    for c in r.chunks.iter().filter_map(|c| c.error.as_ref().map(|e| (c, e))) {
        println!("  failed {} {}", c.0.chunk_id, c.1);
    }
    for f in &r.stream_failures {
        println!("  stream {} failed: {}", f.stream_id, f.error);
    }
}

// serve

fn serve(a: &ServeArgs, cfg: &RunConfig) -> Result<()> {
    if !(a.poll_s.is_finite() && a.poll_s > 0.0) {
        return Err(invalid("--poll-s must be positive"));
    }
    let bind = a.bind.clone().unwrap_or_else(|| cfg.bind.clone());
    let store: Arc<dyn ChunkStore> = Arc::new(open_store(&cfg.store_root)?);
    let announce = |addr: std::net::SocketAddr| {
        println!("listening on http://{addr}");
        let _ = std::io::stdout().flush();
    };
    if a.model_server {
        if cfg.classifier.kind == ClassifierKind::Remote {
            return Err(invalid("a model server needs a local classifier (stub or toy)"));
        }
        let state = ModelServerState::new(store, build_classifier(cfg)?, cfg.sampling, cfg.transform.clone());
        return serve_until_interrupt(model_server(state), &bind, announce).map_err(failed);
    }
    let backend = Arc::new(open_backend(&cfg.database)?);
    let dispatcher = Dispatcher::spawn(
        backend.clone(),
        build_sink(cfg)?,
        cfg.notifications.retry_policy(),
        Duration::from_secs_f64(a.poll_s),
    );
    let state = ApiState { backend, store, token: cfg.api_token.clone() };
    let served = serve_until_interrupt(router(state), &bind, announce).map_err(failed);
    dispatcher.stop();
    served
}

// evaluate

#[derive(Deserialize)]
struct PredictionLine {
    chunk_id: String,
    label: Option<ClassLabel>,
}

fn load_predictions(path: &Path) -> Result<Vec<PredictionLine>> {
    let bytes = read(path)?;
    let bad = |e: String| invalid(format!("{}: {e}", path.display()));
    if let Ok(report) = serde_json::from_slice::<RunReport>(&bytes) {
        return Ok(report.chunks.into_iter().map(|c| PredictionLine { chunk_id: c.chunk_id, label: c.label }).collect());
    }
    let text = std::str::from_utf8(&bytes).map_err(|e| bad(e.to_string()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| bad(format!("line {}: {e}", i + 1))))
        .collect()
}

fn metrics_json(m: &ClassMetrics) -> Value {
    json!({
        "class": m.class.name(),
        "tp": m.tp, "fn": m.fn_, "fp": m.fp,
        "recall": round2(percent(m.recall)),
        "precision": round2(percent(m.precision)),
        "f1": round2(percent(m.f1)),
    })
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn evaluate(a: &EvaluateArgs, json: bool) -> Result<()> {
    let (truth, _) = load_truth(&a.truth)?;
    let predictions = load_predictions(&a.predictions)?;
    let mut by_chunk: HashMap<&str, ClassLabel> = HashMap::new();
    for p in &predictions {
        if let Some(label) = p.label {
            if by_chunk.insert(&p.chunk_id, label).is_some_and(|prev| prev != label) {
                return Err(invalid(format!("conflicting predictions for {}", p.chunk_id)));
            }
        }
    }
    let mut records = Vec::new();
    let mut missing = Vec::new();
    for c in &truth.chunks {
        match by_chunk.get(c.chunk_id.as_str()) {
            Some(&predicted) => {
                records.push(EvalRecord { truth: c.label, predicted, normal_subtype: c.normal_subtype })
            }
            None => missing.push(c.chunk_id.clone()),
        }
    }
    let known: std::collections::HashSet<&str> = truth.chunks.iter().map(|c| c.chunk_id.as_str()).collect();
    let unmatched = by_chunk.keys().filter(|k| !known.contains(*k)).count();
    if records.is_empty() {
        return Err(invalid("no prediction matches a ground-truth chunk"));
    }
    let truths: Vec<ClassLabel> = records.iter().map(|r| r.truth).collect();
    let preds: Vec<ClassLabel> = records.iter().map(|r| r.predicted).collect();
    let cm = confusion_from_records(&truths, &preds).map_err(invalid)?;
    let per_class = cm.all_class_metrics();
    let m: MacroMetrics = cm.macro_metrics();
    let breakdown = misclass_breakdown(&records, &NORMAL_ACTION_NAMES).map_err(invalid)?;
    if json {
        let mis: BTreeMap<&str, &[(String, u64)]> =
            ClassLabel::CRITICAL.iter().map(|c| (c.name(), breakdown.get(*c))).collect();
        return print_json(&json!({
            "evaluated": records.len(),
            "missing": missing,
            "unmatched_predictions": unmatched,
            "confusion": cm.counts,
            "per_class": per_class.iter().map(metrics_json).collect::<Vec<_>>(),
            "macro": {
                "recall": round2(percent(m.macro_recall)),
                "precision": round2(percent(m.macro_precision)),
                "f1": round2(percent(m.macro_f1)),
            },
            "micro_accuracy": round2(percent(cm.micro_accuracy())),
            "normal_misclassified_as": mis,
        }));
    }
    println!("evaluated {} chunks ({} without prediction, {} unmatched predictions)", records.len(), missing.len(), unmatched);
    println!();
    println!("confusion (rows truth, columns predicted)");
    print!("{:<11}", "");
    for c in ClassLabel::ALL {
        print!("{:>11}", c.name());
    }
    println!();
    for t in ClassLabel::ALL {
        print!("{:<11}", t.name());
        for p in ClassLabel::ALL {
            print!("{:>11}", cm.get(t, p));
        }
        println!();
    }
    println!();
    println!("{:<11}{:>6}{:>6}{:>6}{:>9}{:>11}{:>8}", "class", "tp", "fn", "fp", "recall", "precision", "f1");
    for m in &per_class {
        println!(
            "{:<11}{:>6}{:>6}{:>6}{:>9.2}{:>11.2}{:>8.2}",
            m.class.name(),
            m.tp,
            m.fn_,
            m.fp,
            percent(m.recall),
            percent(m.precision),
            percent(m.f1)
        );
    }
    println!(
        "{:<29}{:>9.2}{:>11.2}{:>8.2}",
        "macro",
        percent(m.macro_recall),
        percent(m.macro_precision),
        percent(m.macro_f1)
    );
    println!();
    println!("Normal chunks predicted critical, by activity:");
    for c in ClassLabel::CRITICAL {
        let list = breakdown.get(c);
        let text: Vec<String> = list.iter().map(|(n, k)| format!("{n} ({k})")).collect();
        println!("  {:<11}{}", c.name(), if text.is_empty() { "-".to_string() } else { text.join(", ") });
    }
    Ok(())
}

// bench-throughput

fn bench(a: &BenchArgs, cfg: &RunConfig, json: bool) -> Result<()> {
    let mut segments = fixture_segments(&a.fixtures, cfg.window_s)?;
    if let Some(n) = a.samples {
        segments.truncate(n);
    }
    let classifier = build_classifier(cfg)?;
    if cfg.classifier.kind == ClassifierKind::Remote {
        // the model server reads chunks from the shared store
        let store = open_store(&cfg.store_root)?;
        for s in &segments {
            match put_chunk(&store, &s.chunk, &s.bytes) {
                Ok(_) | Err(StoreError::Duplicate(_)) => {}
                Err(e) => return Err(failed(e)),
            }
        }
    }
    let samples: Vec<ChunkSample> = segments
        .into_iter()
        .map(|s| ChunkSample { chunk_id: s.chunk.chunk_id, storage_key: s.chunk.storage_key, bytes: s.bytes })
        .collect();
    let report = measure_throughput(classifier.as_ref(), &samples, &cfg.sampling, &cfg.transform).map_err(|e| {
        match e {
            vigil_core::eval::ThroughputError::TooFewSamples(_) => invalid(e),
            other => failed(other),
        }
    })?;
    if json {
        return print_json(&json!({
            "model_id": report.model_id,
            "samples": report.samples,
            "seconds": report.seconds,
            "samples_per_second": report.rate_display().parse::<f64>().unwrap_or(report.samples_per_second),
        }));
    }
    println!("{}: {} samples in {:.3} s, {} samples/s", report.model_id, report.samples, report.seconds, report.rate_display());
    Ok(())
}

// capacity-plan

fn capacity(a: &CapacityArgs, cfg: &RunConfig, json: bool) -> Result<()> {
    let plan = capacity_plan(a.throughput, a.chunk_s.unwrap_or(cfg.window_s), a.hourly_price).map_err(invalid)?;
    if json {
        return print_json(&plan);
    }
    println!("clients            {}", plan.clients);
    println!("monthly cost       ${:.2}", plan.monthly_cost);
    println!("cost per client    ${:.2}/month", plan.cost_per_client);
    Ok(())
}

// report-tradeoffs

fn tradeoffs(a: &TradeoffArgs, json: bool) -> Result<()> {
    let cards: Vec<ModelCard> = match &a.cards {
        Some(p) => serde_json::from_slice(&read(p)?).map_err(|e| invalid(format!("{}: {e}", p.display())))?,
        None => reference_model_cards(),
    };
    for c in &cards {
        c.validate().map_err(invalid)?;
    }
    let macros: BTreeMap<String, MacroMetrics> = match &a.macros {
        Some(p) => serde_json::from_slice(&read(p)?).map_err(|e| invalid(format!("{}: {e}", p.display())))?,
        None => BTreeMap::new(),
    };
    if let Some(unknown) = macros.keys().find(|k| !cards.iter().any(|c| &c.model_id == *k)) {
        return Err(invalid(format!("macro metrics for unknown model {unknown:?}")));
    }
    let report = tradeoff_report(&cards, &macros);
    if let Some(out) = &a.out {
        write(&out.join("tradeoffs.csv"), report.csv.as_bytes())?;
        write(&out.join("tradeoffs.md"), report.markdown.as_bytes())?;
        write(&out.join("metric_vs_throughput.csv"), report.metric_vs_throughput_csv.as_bytes())?;
        write(&out.join("metric_vs_params.csv"), report.metric_vs_params_csv.as_bytes())?;
    }
    if json {
        print_json(&report.rows)
    } else {
        print!("{}", report.markdown);
        Ok(())
    }
}

// train-toy

fn train_toy_cmd(a: &TrainToyArgs, cfg: &RunConfig, json: bool) -> Result<()> {
    let (truth, _) = load_truth(&a.fixtures)?;
    let labels: HashMap<&str, ClassLabel> = truth.chunks.iter().map(|c| (c.chunk_id.as_str(), c.label)).collect();
    let mut samples = Vec::new();
    for s in fixture_segments(&a.fixtures, truth.window_s)? {
        let Some(&label) = labels.get(s.chunk.chunk_id.as_str()) else { continue };
        let batch = build_test_pipeline(&s.bytes, &cfg.sampling, &cfg.transform).map_err(failed)?;
        samples.push(LabeledFeatures { features: motion_features(&batch).map_err(failed)?, label });
    }
    let defaults = ToyTrainConfig::default();
    let tc = ToyTrainConfig {
        epochs: a.epochs.unwrap_or(defaults.epochs),
        learning_rate: a.learning_rate.unwrap_or(defaults.learning_rate),
        seed: a.seed.unwrap_or(cfg.seed),
        ..defaults
    };
    let (model, history) = train_toy(&samples, &tc).map_err(|e| match e {
        vigil_core::classify::TrainError::NonFinite { .. } => failed(e),
        other => invalid(other),
    })?;
    let correct = samples.iter().filter(|s| model.predict(&s.features).is_ok_and(|p| p.label == s.label)).count();
    write(&a.out, &serde_json::to_vec_pretty(&model).map_err(failed)?)?;
    let final_loss = history.losses.last().copied().unwrap_or(f64::NAN);
    if json {
        return print_json(&json!({
            "samples": samples.len(),
            "epochs": tc.epochs,
            "final_loss": final_loss,
            "train_accuracy": correct as f64 / samples.len() as f64,
            "model": a.out,
        }));
    }
    println!(
        "trained on {} chunks, final loss {final_loss:.4}, training accuracy {:.2}%, model written to {}",
        samples.len(),
        percent(correct as f64 / samples.len() as f64),
        a.out.display()
    );
    Ok(())
}
