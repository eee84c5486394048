//! The pipeline stages behind every subcommand, each wrapped in a
//! content-addressed stamp so unchanged work is skipped. Stage bodies read
//! their inputs from the run directory rather than passing data in memory;
//! that keeps each stage resumable and independently verifiable.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write as _;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use senselabel_core::eval::report::write_report_files;
use senselabel_core::eval::{build_report, read_ground_truth_csv, write_ground_truth_csv, PriceTable};
use senselabel_core::ingest::{
    parse_dataset, read_windows, resample, split, windowize, write_windows, ChannelStats,
    SplitSpec, Window,
};
use senselabel_core::llm::{
    annotate_batch, estimate_tokens, AnnotationRecord, BackendConfig, MockScript, MockServer,
    ParserContext, PromptRequest, RetryPolicy, SystemClock, TestClock,
};
use senselabel_core::numeric::DistanceMetric;
use senselabel_core::projection::{
    pca_fit_transform, read_projected_points, tsne_fit, write_projected_points, ProjectedPoint,
    ProjectionMethod, SplitTag,
};
use senselabel_core::prompt::{
    embedding_spec_for_query, oracle_annotate, render_embedding_prompt, select_examples,
    SelectionStrategy,
};
use senselabel_core::ssl::{
    encode, load_model, pretrain, save_model, write_training_log, EmbedDomain, Encoder, SslMode,
    TrainedModel,
};

use crate::config::{Backend, Resolved};
use crate::error::{backend_error, stage_error, CliError};
use crate::manifest::run_stage;

const INGEST_VERSION: u32 = 1;
const PRETRAIN_VERSION: u32 = 1;
const ENCODE_VERSION: u32 = 1;
const PROJECT_VERSION: u32 = 1;
const ANNOTATE_VERSION: u32 = 1;
const EVALUATE_VERSION: u32 = 1;

pub const TRAIN_WINDOWS: &str = "data/train_windows.jsonl";
pub const TEST_WINDOWS: &str = "data/test_windows.jsonl";
pub const CHANNEL_STATS: &str = "data/channel_stats.json";
pub const GROUND_TRUTH: &str = "data/ground_truth.csv";
pub const MODEL_FILE: &str = "model/model.bin";
pub const TRAIN_LOG: &str = "model/train_log.csv";
pub const TRAIN_EMBEDDINGS: &str = "embeddings/train.jsonl";
pub const TEST_EMBEDDINGS: &str = "embeddings/test.jsonl";

pub fn metric_name(metric: DistanceMetric) -> &'static str {
    match metric {
        DistanceMetric::Euclidean => "euclidean",
        DistanceMetric::Manhattan => "manhattan",
        DistanceMetric::Cosine => "cosine",
    }
}

fn method_name(method: ProjectionMethod) -> &'static str {
    match method {
        ProjectionMethod::Tsne => "tsne",
        ProjectionMethod::Pca => "pca",
    }
}

pub fn projection_rel(method: ProjectionMethod, dim: usize) -> String {
    format!("projections/{}_d{dim:02}.jsonl", method_name(method))
}

fn projection_meta_rel(method: ProjectionMethod, dim: usize) -> String {
    format!("projections/{}_d{dim:02}.meta.json", method_name(method))
}

/// One grid cell: prompt dimensionality, distance metric, examples per class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub dim: usize,
    pub metric: DistanceMetric,
    pub examples: usize,
}

impl Cell {
    pub fn tag(&self) -> String {
        format!(
            "d{:02}_{}_k{:02}",
            self.dim,
            metric_name(self.metric),
            self.examples
        )
    }

    pub fn dir_rel(&self) -> String {
        format!("cells/{}", self.tag())
    }

    pub fn annotations_rel(&self) -> String {
        format!("{}/annotations.jsonl", self.dir_rel())
    }

    pub fn prompts_rel(&self) -> String {
        format!("{}/prompts.jsonl", self.dir_rel())
    }

    pub fn report_rel(&self) -> String {
        format!("{}/report.json", self.dir_rel())
    }
}

/// Every (dim, metric, example-count) combination the config asks for, in
/// deterministic dims-major order.
pub fn enumerate_cells(resolved: &Resolved) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &dim in &resolved.raw.projection.dims {
        for &metric in &resolved.metrics {
            for &examples in &resolved.raw.annotate.example_counts {
                cells.push(Cell {
                    dim,
                    metric,
                    examples,
                });
            }
        }
    }
    cells
}

fn note(stage: &str, ran: bool) {
    println!("stage {stage}: {}", if ran { "ran" } else { "cached" });
}

fn ensure_dir(resolved: &Resolved, rel: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(resolved.run_dir.join(rel))
        .map_err(|e| stage_error("setup", format!("cannot create {rel}: {e}")))
}

fn write_json_file(
    stage: &str,
    path: &PathBuf,
    value: &impl Serialize,
) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| stage_error(stage, format!("serialize {}: {e}", path.display())))?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| stage_error(stage, format!("write {}: {e}", path.display())))
}

pub fn cmd_ingest(resolved: &Resolved) -> Result<(), CliError> {
    let stage = "ingest";
    ensure_dir(resolved, "data")?;
    let digest = resolved.section_digest(&(&resolved.raw.dataset, &resolved.raw.windows));
    let inputs: BTreeMap<String, PathBuf> =
        [("dataset".to_string(), resolved.dataset_path.clone())]
            .into_iter()
            .collect();
    let mut outputs = vec![
        TRAIN_WINDOWS.to_string(),
        TEST_WINDOWS.to_string(),
        GROUND_TRUTH.to_string(),
    ];
    if resolved.raw.windows.normalize {
        outputs.push(CHANNEL_STATS.to_string());
    }

    let ran = run_stage(
        &resolved.run_dir,
        stage,
        INGEST_VERSION,
        &digest,
        &inputs,
        &outputs,
        || ingest_body(resolved),
    )?;
    note(stage, ran);
    Ok(())
}

fn ingest_body(resolved: &Resolved) -> Result<(), CliError> {
    let stage = "ingest";
    let config = &resolved.raw;
    let mut recordings = parse_dataset(&resolved.dataset_path, &config.dataset.adapter)
        .map_err(|e| stage_error(stage, e))?;
    if let Some(hz) = config.windows.target_hz {
        for recording in &mut recordings {
            *recording = resample(recording, hz).map_err(|e| stage_error(stage, e))?;
        }
    }
    let windows: Vec<Window> = recordings
        .iter()
        .flat_map(|r| windowize(r, config.windows.length, config.windows.stride))
        .collect();
    if windows.is_empty() {
        return Err(stage_error(
            stage,
            format!(
                "no recording is long enough for windows of {} samples",
                config.windows.length
            ),
        ));
    }
    let spec = SplitSpec {
        dataset_id: recordings
            .first()
            .map(|r| r.dataset_id.clone())
            .unwrap_or_else(|| config.dataset.adapter.clone()),
        test_subject_ids: config
            .dataset
            .test_subjects
            .iter()
            .cloned()
            .collect::<BTreeSet<_>>(),
        chosen_classes: config.dataset.classes.clone(),
    };
    let (mut train, mut test) = split(windows, &spec).map_err(|e| stage_error(stage, e))?;

    if config.windows.normalize {
        let stats = ChannelStats::fit(&train);
        for w in train.iter_mut().chain(test.iter_mut()) {
            stats.apply(w);
        }
        write_json_file(stage, &resolved.run_dir.join(CHANNEL_STATS), &stats)?;
    }

    for (rel, windows) in [(TRAIN_WINDOWS, &train), (TEST_WINDOWS, &test)] {
        let mut file = std::fs::File::create(resolved.run_dir.join(rel))
            .map_err(|e| stage_error(stage, format!("create {rel}: {e}")))?;
        write_windows(&mut file, windows).map_err(|e| stage_error(stage, e))?;
    }

    let truth: Vec<(String, String)> = test
        .iter()
        .enumerate()
        .map(|(i, w)| {
            (
                format!("test-{i:05}"),
                w.label.clone().unwrap_or_default(),
            )
        })
        .collect();
    write_ground_truth_csv(&resolved.run_dir.join(GROUND_TRUTH), &truth)
        .map_err(|e| stage_error(stage, e))?;
    Ok(())
}

pub fn cmd_pretrain(resolved: &Resolved) -> Result<(), CliError> {
    cmd_ingest(resolved)?;
    let stage = "pretrain";
    // Surface hyperparameter problems as config errors even on cached runs.
    let contrastive = resolved.contrastive_config()?;
    ensure_dir(resolved, "model")?;
    let digest = resolved.section_digest(&(
        &resolved.raw.ssl,
        resolved.raw.seeds.pretrain,
        resolved.raw.windows.length,
    ));
    let inputs: BTreeMap<String, PathBuf> = [(
        "train_windows".to_string(),
        resolved.run_dir.join(TRAIN_WINDOWS),
    )]
    .into_iter()
    .collect();
    let outputs = vec![MODEL_FILE.to_string(), TRAIN_LOG.to_string()];

    let ran = run_stage(
        &resolved.run_dir,
        stage,
        PRETRAIN_VERSION,
        &digest,
        &inputs,
        &outputs,
        || pretrain_body(resolved, &contrastive),
    )?;
    note(stage, ran);
    Ok(())
}

fn pretrain_body(
    resolved: &Resolved,
    contrastive: &senselabel_core::ssl::ContrastiveConfig,
) -> Result<(), CliError> {
    let stage = "pretrain";
    let (model, log) = if resolved.raw.ssl.mode == "random" {
        let mut rng = ChaCha8Rng::seed_from_u64(resolved.raw.seeds.pretrain);
        let encoder = Encoder::init(contrastive.encoder.clone(), &mut rng)
            .map_err(|e| stage_error(stage, e))?;
        (TrainedModel::Simclr(encoder), Vec::new())
    } else {
        let windows = read_windows(&resolved.run_dir.join(TRAIN_WINDOWS))
            .map_err(|e| stage_error(stage, e))?;
        pretrain(&windows, contrastive).map_err(|e| stage_error(stage, e))?
    };
    save_model(&resolved.run_dir.join(MODEL_FILE), &model)
        .map_err(|e| stage_error(stage, e))?;
    let mut file = std::fs::File::create(resolved.run_dir.join(TRAIN_LOG))
        .map_err(|e| stage_error(stage, format!("create {TRAIN_LOG}: {e}")))?;
    write_training_log(&mut file, &log).map_err(|e| stage_error(stage, e))?;
    Ok(())
}

pub fn cmd_encode(resolved: &Resolved) -> Result<(), CliError> {
    cmd_pretrain(resolved)?;
    let stage = "encode";
    ensure_dir(resolved, "embeddings")?;
    let digest = resolved.section_digest(&resolved.raw.ssl.mode);
    let inputs: BTreeMap<String, PathBuf> = [
        ("model".to_string(), resolved.run_dir.join(MODEL_FILE)),
        (
            "train_windows".to_string(),
            resolved.run_dir.join(TRAIN_WINDOWS),
        ),
        (
            "test_windows".to_string(),
            resolved.run_dir.join(TEST_WINDOWS),
        ),
    ]
    .into_iter()
    .collect();
    let outputs = vec![TRAIN_EMBEDDINGS.to_string(), TEST_EMBEDDINGS.to_string()];

    let ran = run_stage(
        &resolved.run_dir,
        stage,
        ENCODE_VERSION,
        &digest,
        &inputs,
        &outputs,
        || encode_body(resolved),
    )?;
    note(stage, ran);
    Ok(())
}

fn encode_body(resolved: &Resolved) -> Result<(), CliError> {
    let stage = "encode";
    let model = load_model(&resolved.run_dir.join(MODEL_FILE))
        .map_err(|e| stage_error(stage, e))?;
    let domain = match model.mode() {
        SslMode::Simclr => EmbedDomain::Time,
        SslMode::Tfc => EmbedDomain::Joint,
    };
    let jobs = [
        (TRAIN_WINDOWS, TRAIN_EMBEDDINGS, SplitTag::Train, "train", true),
        (TEST_WINDOWS, TEST_EMBEDDINGS, SplitTag::Test, "test", false),
    ];
    for (in_rel, out_rel, tag, prefix, keep_label) in jobs {
        let windows =
            read_windows(&resolved.run_dir.join(in_rel)).map_err(|e| stage_error(stage, e))?;
        let embeddings =
            encode(&windows, &model, domain).map_err(|e| stage_error(stage, e))?;
        let points: Vec<ProjectedPoint> = windows
            .iter()
            .zip(embeddings)
            .enumerate()
            .map(|(i, (w, values))| ProjectedPoint {
                id: format!("{prefix}-{i:05}"),
                split: tag,
                label: if keep_label { w.label.clone() } else { None },
                values,
            })
            .collect();
        let file = std::fs::File::create(resolved.run_dir.join(out_rel))
            .map_err(|e| stage_error(stage, format!("create {out_rel}: {e}")))?;
        write_projected_points(std::io::BufWriter::new(file), &points)
            .map_err(|e| stage_error(stage, e))?;
    }
    Ok(())
}

pub fn cmd_project(resolved: &Resolved) -> Result<(), CliError> {
    cmd_encode(resolved)?;
    for &dim in &resolved.raw.projection.dims {
        project_dim(resolved, dim)?;
    }
    Ok(())
}

fn project_dim(resolved: &Resolved, dim: usize) -> Result<(), CliError> {
    let stage = format!("project_d{dim:02}");
    ensure_dir(resolved, "projections")?;
    let projection = &resolved.raw.projection;
    let digest = resolved.section_digest(&(
        method_name(resolved.method),
        dim,
        projection.perplexity,
        projection.iterations,
        resolved.raw.seeds.projection,
    ));
    let inputs: BTreeMap<String, PathBuf> = [
        (
            "train_embeddings".to_string(),
            resolved.run_dir.join(TRAIN_EMBEDDINGS),
        ),
        (
            "test_embeddings".to_string(),
            resolved.run_dir.join(TEST_EMBEDDINGS),
        ),
    ]
    .into_iter()
    .collect();
    let outputs = vec![
        projection_rel(resolved.method, dim),
        projection_meta_rel(resolved.method, dim),
    ];

    let ran = run_stage(
        &resolved.run_dir,
        &stage,
        PROJECT_VERSION,
        &digest,
        &inputs,
        &outputs,
        || project_body(resolved, dim, &stage),
    )?;
    note(&stage, ran);
    Ok(())
}

fn project_body(resolved: &Resolved, dim: usize, stage: &str) -> Result<(), CliError> {
    let mut points = read_projected_points(&resolved.run_dir.join(TRAIN_EMBEDDINGS))
        .map_err(|e| stage_error(stage, e))?;
    let test = read_projected_points(&resolved.run_dir.join(TEST_EMBEDDINGS))
        .map_err(|e| stage_error(stage, e))?;
    points.extend(test);
    let embeddings: Vec<Vec<f64>> = points.iter().map(|p| p.values.clone()).collect();

    let projection = &resolved.raw.projection;
    let result = match resolved.method {
        ProjectionMethod::Tsne => tsne_fit(
            &embeddings,
            dim,
            projection.perplexity,
            projection.iterations,
            resolved.raw.seeds.projection,
        ),
        ProjectionMethod::Pca => pca_fit_transform(&embeddings, dim),
    }
    .map_err(|e| stage_error(stage, e))?;

    let projected: Vec<ProjectedPoint> = points
        .iter()
        .zip(&result.points)
        .map(|(p, values)| ProjectedPoint {
            id: p.id.clone(),
            split: p.split,
            label: p.label.clone(),
            values: values.clone(),
        })
        .collect();
    let rel = projection_rel(resolved.method, dim);
    let file = std::fs::File::create(resolved.run_dir.join(&rel))
        .map_err(|e| stage_error(stage, format!("create {rel}: {e}")))?;
    write_projected_points(std::io::BufWriter::new(file), &projected)
        .map_err(|e| stage_error(stage, e))?;

    let meta = serde_json::json!({
        "method": method_name(result.method),
        "dim": result.dim,
        "seed": result.seed,
        "diagnostics": result.diagnostics,
    });
    write_json_file(
        stage,
        &resolved.run_dir.join(projection_meta_rel(resolved.method, dim)),
        &meta,
    )
}

pub fn cmd_annotate(resolved: &Resolved) -> Result<(), CliError> {
    cmd_project(resolved)?;
    for cell in enumerate_cells(resolved) {
        annotate_cell(resolved, &cell)?;
    }
    Ok(())
}

/// Renders the cell's prompts and runs the configured backend over them.
/// The prompt file doubles as the resume guard: when it changes, a stale
/// annotation log is discarded rather than resumed.
pub fn annotate_cell(resolved: &Resolved, cell: &Cell) -> Result<(), CliError> {
    let stage = format!("annotate_{}", cell.tag());
    ensure_dir(resolved, &cell.dir_rel())?;
    let digest = resolved.section_digest(&(
        resolved.backend.name(),
        metric_name(cell.metric),
        cell.examples,
        resolved.raw.annotate.decimal_places,
        resolved.raw.seeds.selection,
        &resolved.raw.dataset.classes,
        &resolved.raw.annotate.http,
    ));
    let inputs: BTreeMap<String, PathBuf> = [(
        "projection".to_string(),
        resolved.run_dir.join(projection_rel(resolved.method, cell.dim)),
    )]
    .into_iter()
    .collect();
    let outputs = vec![cell.prompts_rel(), cell.annotations_rel()];

    let ran = run_stage(
        &resolved.run_dir,
        &stage,
        ANNOTATE_VERSION,
        &digest,
        &inputs,
        &outputs,
        || annotate_body(resolved, cell, &stage),
    )?;
    note(&stage, ran);
    Ok(())
}

fn annotate_body(resolved: &Resolved, cell: &Cell, stage: &str) -> Result<(), CliError> {
    let class_names = &resolved.raw.dataset.classes;
    let points = read_projected_points(
        &resolved.run_dir.join(projection_rel(resolved.method, cell.dim)),
    )
    .map_err(|e| stage_error(stage, e))?;
    let (train, test): (Vec<_>, Vec<_>) =
        points.into_iter().partition(|p| p.split == SplitTag::Train);
    if test.is_empty() {
        return Err(stage_error(stage, "projection holds no test points"));
    }

    let examples = select_examples(
        &train,
        class_names,
        cell.examples,
        SelectionStrategy::UniformRandom,
        resolved.raw.seeds.selection,
    )
    .map_err(|e| stage_error(stage, e))?;

    let mut specs = Vec::with_capacity(test.len());
    let mut prompts = Vec::with_capacity(test.len());
    for point in &test {
        let mut spec = embedding_spec_for_query(&examples, point.values.clone(), cell.metric);
        spec.decimal_places = resolved.raw.annotate.decimal_places;
        let text = render_embedding_prompt(&spec).map_err(|e| stage_error(stage, e))?;
        prompts.push(PromptRequest {
            query_id: point.id.clone(),
            prompt_text: text,
        });
        specs.push(spec);
    }

    let prompts_path = resolved.run_dir.join(cell.prompts_rel());
    let annotations_path = resolved.run_dir.join(cell.annotations_rel());
    let rendered = prompts
        .iter()
        .map(|p| serde_json::to_string(p).expect("prompt serializes") + "\n")
        .collect::<String>();
    let stale = std::fs::read_to_string(&prompts_path)
        .map(|old| old != rendered)
        .unwrap_or(false);
    if stale && annotations_path.exists() {
        std::fs::remove_file(&annotations_path)
            .map_err(|e| stage_error(stage, format!("drop stale annotations: {e}")))?;
    }
    std::fs::write(&prompts_path, rendered)
        .map_err(|e| stage_error(stage, format!("write prompts: {e}")))?;

    match resolved.backend {
        Backend::Oracle => {
            let parser = ParserContext::new(class_names.clone());
            let mut file = std::fs::File::create(&annotations_path)
                .map_err(|e| stage_error(stage, format!("create annotations: {e}")))?;
            for (spec, prompt) in specs.iter().zip(&prompts) {
                let label = oracle_annotate(spec).map_err(|e| stage_error(stage, e))?;
                let record = AnnotationRecord {
                    query_id: prompt.query_id.clone(),
                    prompt_text: prompt.prompt_text.clone(),
                    response_text: label.clone(),
                    parsed: parser.parse(&label),
                    prompt_tokens: estimate_tokens(&prompt.prompt_text),
                    completion_tokens: estimate_tokens(&label),
                    latency_ms: 0,
                    attempt_count: 1,
                    timestamp_ms: 0,
                };
                let line =
                    serde_json::to_string(&record).expect("annotation record serializes");
                writeln!(file, "{line}")
                    .map_err(|e| stage_error(stage, format!("write annotations: {e}")))?;
            }
        }
        Backend::Mock => {
            let http = resolved.raw.annotate.http.clone().unwrap_or_default();
            let script = MockScript {
                contents: class_names.clone(),
                ..MockScript::default()
            };
            let server = MockServer::start(script).map_err(|e| stage_error(stage, e))?;
            let config = BackendConfig {
                endpoint_url: server.endpoint_url(),
                model_name: http.model_name.clone(),
                api_key_env_var: None,
                max_requests_per_minute: http.max_requests_per_minute,
                // One request at a time keeps mock runs bit-reproducible.
                max_concurrent_inflight: 1,
                retry: RetryPolicy {
                    max_attempts: http.max_attempts,
                    backoff_base_ms: http.backoff_base_ms,
                },
                timeout_secs: http.timeout_secs,
            };
            let parser = ParserContext::new(class_names.clone());
            let clock = TestClock::new();
            annotate_batch(&prompts, &config, &parser, &annotations_path, &clock)
                .map_err(|e| backend_error(stage.to_string(), &e))?;
        }
        Backend::Live => {
            let http = resolved.raw.annotate.http.clone().unwrap_or_default();
            let endpoint = http.endpoint_url.clone().unwrap_or_default();
            let config = BackendConfig {
                endpoint_url: endpoint,
                model_name: http.model_name.clone(),
                api_key_env_var: http.api_key_env_var.clone(),
                max_requests_per_minute: http.max_requests_per_minute,
                max_concurrent_inflight: http.max_concurrent_inflight,
                retry: RetryPolicy {
                    max_attempts: http.max_attempts,
                    backoff_base_ms: http.backoff_base_ms,
                },
                timeout_secs: http.timeout_secs,
            };
            let parser = ParserContext::new(class_names.clone());
            annotate_batch(&prompts, &config, &parser, &annotations_path, &SystemClock)
                .map_err(|e| backend_error(stage.to_string(), &e))?;
        }
    }
    Ok(())
}

pub fn cmd_evaluate(resolved: &Resolved) -> Result<(), CliError> {
    cmd_annotate(resolved)?;
    for cell in enumerate_cells(resolved) {
        evaluate_cell(resolved, &cell)?;
    }
    Ok(())
}

pub fn evaluate_cell(resolved: &Resolved, cell: &Cell) -> Result<(), CliError> {
    let stage = format!("evaluate_{}", cell.tag());
    let digest = resolved.section_digest(&(
        &resolved.raw.prices,
        resolved.raw.annotate.rate_per_minute,
        &resolved.raw.dataset.classes,
    ));
    let inputs: BTreeMap<String, PathBuf> = [
        (
            "annotations".to_string(),
            resolved.run_dir.join(cell.annotations_rel()),
        ),
        (
            "ground_truth".to_string(),
            resolved.run_dir.join(GROUND_TRUTH),
        ),
    ]
    .into_iter()
    .collect();
    let dir_rel = cell.dir_rel();
    let outputs = vec![
        format!("{dir_rel}/report.json"),
        format!("{dir_rel}/confusion.csv"),
        format!("{dir_rel}/metrics.csv"),
        format!("{dir_rel}/confusion.svg"),
    ];

    let ran = run_stage(
        &resolved.run_dir,
        &stage,
        EVALUATE_VERSION,
        &digest,
        &inputs,
        &outputs,
        || evaluate_body(resolved, cell, &stage),
    )?;
    note(&stage, ran);
    Ok(())
}

fn evaluate_body(resolved: &Resolved, cell: &Cell, stage: &str) -> Result<(), CliError> {
    let records = read_annotation_records(resolved, cell, stage)?;
    let truth = read_ground_truth_csv(&resolved.run_dir.join(GROUND_TRUTH))
        .map_err(|e| stage_error(stage, e))?;
    let prices = price_table(resolved);
    let report = build_report(
        &records,
        &truth,
        &resolved.raw.dataset.classes,
        &prices,
        resolved.raw.annotate.rate_per_minute,
        None,
    )
    .map_err(|e| stage_error(stage, e))?;
    write_report_files(&resolved.run_dir.join(cell.dir_rel()), &report)
        .map_err(|e| stage_error(stage, e))
}

pub fn read_annotation_records(
    resolved: &Resolved,
    cell: &Cell,
    stage: &str,
) -> Result<Vec<AnnotationRecord>, CliError> {
    senselabel_core::llm::read_annotation_log(&resolved.run_dir.join(cell.annotations_rel()))
        .map_err(|e| stage_error(stage, e))
}

pub fn price_table(resolved: &Resolved) -> PriceTable {
    let prices = &resolved.raw.prices;
    PriceTable {
        currency: prices.currency.clone(),
        prompt_micro_per_1k: prices.prompt_micro_per_1k,
        completion_micro_per_1k: prices.completion_micro_per_1k,
        flat_micro_per_request: prices.flat_micro_per_request,
    }
}
