//! Declarative run configuration: one TOML document with per-stage
//! sections. Flags override file values (flag > file > built-in default);
//! seeds have no defaults and must be stated in the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use senselabel_core::numeric::DistanceMetric;
use senselabel_core::projection::ProjectionMethod;
use senselabel_core::ssl::{AugmentationSpec, ContrastiveConfig, EncoderConfig, SslMode};
use senselabel_core::numeric::{AdamParams, OptimizerKind};

use crate::error::CliError;
use crate::manifest::sha256_hex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub dataset: DatasetSection,
    #[serde(default)]
    pub windows: WindowsSection,
    #[serde(default)]
    pub ssl: SslSection,
    #[serde(default)]
    pub projection: ProjectionSection,
    #[serde(default)]
    pub annotate: AnnotateSection,
    #[serde(default)]
    pub prices: PricesSection,
    pub seeds: SeedsSection,
    #[serde(default)]
    pub grid: GridSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub out_dir: PathBuf,
    /// Defaults to run-<first 12 hex of the config hash>.
    #[serde(default)]
    pub id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    /// One of motionsense, pamap2, ucihar, hhar, generic-csv.
    pub adapter: String,
    pub path: PathBuf,
    pub test_subjects: Vec<String>,
    /// Classes annotated on the test side (2 or more).
    pub classes: Vec<String>,
    /// Sentence fragment describing where the device was worn, used in
    /// raw-signal prompts.
    #[serde(default)]
    pub body_position: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowsSection {
    pub length: usize,
    pub stride: usize,
    /// Resample every recording to this rate before windowing.
    pub target_hz: Option<f64>,
    /// Z-score per channel with train-split statistics.
    pub normalize: bool,
}

impl Default for WindowsSection {
    fn default() -> Self {
        WindowsSection {
            length: 128,
            stride: 64,
            target_hz: None,
            normalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SslSection {
    /// simclr | tfc | random (random = untrained encoder, saved as-is).
    pub mode: String,
    pub epochs: usize,
    pub batch_size: usize,
    pub temperature: f64,
    /// sgd-cosine | adam.
    pub optimizer: String,
    pub base_lr: f64,
    pub adam_lr: f64,
    pub joint_dim: usize,
    pub delta: f64,
    pub lambda: f64,
    pub cross_metric: String,
    pub noise_sigma: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub kernel_sizes: [usize; 3],
    pub channels: [usize; 3],
}

impl Default for SslSection {
    fn default() -> Self {
        SslSection {
            mode: "simclr".into(),
            epochs: 30,
            batch_size: 128,
            temperature: 0.1,
            optimizer: "sgd-cosine".into(),
            base_lr: 0.1,
            adam_lr: 3e-4,
            joint_dim: 668,
            delta: 1.0,
            lambda: 0.5,
            cross_metric: "cosine".into(),
            noise_sigma: 0.05,
            scale_min: 0.8,
            scale_max: 1.2,
            hidden_dim: 96,
            output_dim: 96,
            kernel_sizes: [24, 16, 8],
            channels: [32, 64, 96],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProjectionSection {
    /// tsne | pca.
    pub method: String,
    /// Prompt dimensions to produce; each in [2, 15].
    pub dims: Vec<usize>,
    pub perplexity: f64,
    pub iterations: usize,
}

impl Default for ProjectionSection {
    fn default() -> Self {
        ProjectionSection {
            method: "tsne".into(),
            dims: vec![2],
            perplexity: 10.0,
            iterations: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnotateSection {
    /// oracle | mock | live.
    pub backend: String,
    pub metrics: Vec<String>,
    pub example_counts: Vec<usize>,
    pub decimal_places: usize,
    /// Steady request rate assumed for wall-time estimates.
    pub rate_per_minute: f64,
    pub http: Option<HttpSection>,
}

impl Default for AnnotateSection {
    fn default() -> Self {
        AnnotateSection {
            backend: "oracle".into(),
            metrics: vec!["euclidean".into()],
            example_counts: vec![25],
            decimal_places: 7,
            rate_per_minute: 175.0,
            http: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HttpSection {
    pub endpoint_url: Option<String>,
    pub model_name: String,
    pub api_key_env_var: Option<String>,
    pub max_requests_per_minute: u32,
    pub max_concurrent_inflight: usize,
    pub max_attempts: u32,
    pub backoff_base_ms: u64,
    pub timeout_secs: u64,
}

impl Default for HttpSection {
    fn default() -> Self {
        HttpSection {
            endpoint_url: None,
            model_name: "annotator".into(),
            api_key_env_var: None,
            max_requests_per_minute: 175,
            max_concurrent_inflight: 4,
            max_attempts: 3,
            backoff_base_ms: 1_000,
            timeout_secs: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PricesSection {
    pub currency: String,
    pub prompt_micro_per_1k: u64,
    pub completion_micro_per_1k: u64,
    pub flat_micro_per_request: u64,
}

impl Default for PricesSection {
    fn default() -> Self {
        PricesSection {
            currency: "USD".into(),
            prompt_micro_per_1k: 30_000,
            completion_micro_per_1k: 60_000,
            flat_micro_per_request: 0,
        }
    }
}

/// No defaults on purpose: a run without pinned seeds is not reproducible.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedsSection {
    pub pretrain: u64,
    pub projection: u64,
    pub selection: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub workers: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { workers: 4 }
    }
}

/// Flag-level overrides; every field beats the corresponding file value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub run_id: Option<String>,
    pub backend: Option<String>,
    pub dims: Option<Vec<usize>>,
    pub metrics: Option<Vec<String>>,
    pub example_counts: Option<Vec<usize>>,
    pub dataset_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Oracle,
    Mock,
    Live,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Oracle => "oracle",
            Backend::Mock => "mock",
            Backend::Live => "live",
        }
    }
}

/// Config after overrides and validation, with string fields parsed.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub raw: RunConfig,
    pub config_hash: String,
    pub run_id: String,
    pub run_dir: PathBuf,
    /// Dataset path resolved against the config file's directory.
    pub dataset_path: PathBuf,
    pub backend: Backend,
    pub method: ProjectionMethod,
    pub metrics: Vec<DistanceMetric>,
}

impl Resolved {
    pub fn seeds_map(&self) -> BTreeMap<String, u64> {
        [
            ("pretrain".to_string(), self.raw.seeds.pretrain),
            ("projection".to_string(), self.raw.seeds.projection),
            ("selection".to_string(), self.raw.seeds.selection),
        ]
        .into_iter()
        .collect()
    }

    /// Stable digest of one config section, for stage stamps.
    pub fn section_digest(&self, value: &impl Serialize) -> String {
        sha256_hex(serde_json::to_string(value).expect("section serializes").as_bytes())
    }

    pub fn contrastive_config(&self) -> Result<ContrastiveConfig, CliError> {
        let ssl = &self.raw.ssl;
        let mode = match ssl.mode.as_str() {
            "simclr" | "random" => SslMode::Simclr,
            "tfc" => SslMode::Tfc,
            other => return Err(CliError::Config(format!("unknown ssl mode {other:?}"))),
        };
        let optimizer = match ssl.optimizer.as_str() {
            "sgd-cosine" => OptimizerKind::SgdCosine {
                base_lr: ssl.base_lr,
                total_epochs: ssl.epochs.max(1),
            },
            "adam" => OptimizerKind::Adam(AdamParams {
                lr: ssl.adam_lr,
                ..AdamParams::default()
            }),
            other => {
                return Err(CliError::Config(format!(
                    "unknown optimizer {other:?} (expected sgd-cosine or adam)"
                )))
            }
        };
        let config = ContrastiveConfig {
            mode,
            encoder: EncoderConfig {
                input_len: self.raw.windows.length,
                kernel_sizes: ssl.kernel_sizes,
                channels: ssl.channels,
                hidden_dim: ssl.hidden_dim,
                output_dim: ssl.output_dim,
            },
            temperature: ssl.temperature,
            batch_size: ssl.batch_size,
            epochs: ssl.epochs.max(1),
            optimizer,
            augmentation: AugmentationSpec {
                gaussian_noise_sigma: ssl.noise_sigma,
                scale_range: [ssl.scale_min, ssl.scale_max],
            },
            seed: self.raw.seeds.pretrain,
            joint_dim: ssl.joint_dim,
            delta: ssl.delta,
            lambda: ssl.lambda,
            cross_metric: parse_metric(&ssl.cross_metric)?,
        };
        config
            .validate()
            .map_err(|e| CliError::Config(format!("ssl section: {e}")))?;
        Ok(config)
    }
}

pub fn parse_metric(name: &str) -> Result<DistanceMetric, CliError> {
    match name {
        "euclidean" => Ok(DistanceMetric::Euclidean),
        "manhattan" => Ok(DistanceMetric::Manhattan),
        "cosine" => Ok(DistanceMetric::Cosine),
        other => Err(CliError::Config(format!(
            "unknown metric {other:?} (expected euclidean, manhattan, or cosine)"
        ))),
    }
}

const KNOWN_ADAPTERS: &[&str] = &["motionsense", "pamap2", "ucihar", "hhar", "generic-csv"];

fn apply_overrides(config: &mut RunConfig, overrides: &Overrides) {
    if let Some(out_dir) = &overrides.out_dir {
        config.run.out_dir = out_dir.clone();
    }
    if let Some(id) = &overrides.run_id {
        config.run.id = Some(id.clone());
    }
    if let Some(backend) = &overrides.backend {
        config.annotate.backend = backend.clone();
    }
    if let Some(dims) = &overrides.dims {
        config.projection.dims = dims.clone();
    }
    if let Some(metrics) = &overrides.metrics {
        config.annotate.metrics = metrics.clone();
    }
    if let Some(counts) = &overrides.example_counts {
        config.annotate.example_counts = counts.clone();
    }
    if let Some(path) = &overrides.dataset_path {
        config.dataset.path = path.clone();
    }
}

fn validate(config: &RunConfig, dataset_path: &Path) -> Result<(), CliError> {
    let bad = |msg: String| Err(CliError::Config(msg));

    if !KNOWN_ADAPTERS.contains(&config.dataset.adapter.as_str()) {
        return bad(format!(
            "unknown adapter {:?} (expected one of {})",
            config.dataset.adapter,
            KNOWN_ADAPTERS.join(", ")
        ));
    }
    if !dataset_path.exists() {
        return bad(format!(
            "dataset path does not exist: {}",
            dataset_path.display()
        ));
    }
    if config.dataset.test_subjects.is_empty() {
        return bad("dataset.test_subjects must name at least one subject".into());
    }
    let classes = &config.dataset.classes;
    if classes.len() < 2 {
        return bad("dataset.classes needs at least two classes".into());
    }
    let mut seen = std::collections::HashSet::new();
    for class in classes {
        if !seen.insert(class.as_str()) {
            return bad(format!("dataset.classes repeats {class:?}"));
        }
    }
    if config.windows.length == 0 || config.windows.stride == 0 {
        return bad("windows.length and windows.stride must be positive".into());
    }
    if let Some(hz) = config.windows.target_hz {
        if !(hz.is_finite() && hz > 0.0) {
            return bad(format!("windows.target_hz must be positive, got {hz}"));
        }
    }

    match config.projection.method.as_str() {
        "tsne" | "t-sne" | "pca" => {}
        other => return bad(format!("unknown projection method {other:?}")),
    }
    if config.projection.dims.is_empty() {
        return bad("projection.dims must list at least one dimension".into());
    }
    for &u in &config.projection.dims {
        if !(2..=15).contains(&u) {
            return bad(format!("projection dimension {u} outside [2, 15]"));
        }
    }
    if !(config.projection.perplexity.is_finite() && config.projection.perplexity > 0.0) {
        return bad("projection.perplexity must be positive".into());
    }
    if config.projection.iterations == 0 {
        return bad("projection.iterations must be at least 1".into());
    }

    match config.annotate.backend.as_str() {
        "oracle" | "mock" => {}
        "live" => {
            let http = config.annotate.http.as_ref();
            let endpoint = http.and_then(|h| h.endpoint_url.as_deref()).unwrap_or("");
            if endpoint.is_empty() {
                return bad(
                    "backend \"live\" needs [annotate.http] endpoint_url".into(),
                );
            }
        }
        other => return bad(format!("unknown backend {other:?}")),
    }
    if config.annotate.metrics.is_empty() {
        return bad("annotate.metrics must list at least one metric".into());
    }
    for metric in &config.annotate.metrics {
        parse_metric(metric)?;
    }
    if config.annotate.example_counts.is_empty() {
        return bad("annotate.example_counts must list at least one count".into());
    }
    if config.annotate.example_counts.iter().any(|&k| k == 0) {
        return bad("annotate.example_counts entries must be at least 1".into());
    }
    if config.annotate.decimal_places == 0 {
        return bad("annotate.decimal_places must be at least 1".into());
    }
    if !(config.annotate.rate_per_minute.is_finite() && config.annotate.rate_per_minute > 0.0) {
        return bad("annotate.rate_per_minute must be positive".into());
    }
    if config.grid.workers == 0 {
        return bad("grid.workers must be at least 1".into());
    }
    Ok(())
}

/// Loads, overrides, validates, and resolves a config file.
pub fn load(config_path: &Path, overrides: &Overrides) -> Result<Resolved, CliError> {
    let text = std::fs::read_to_string(config_path).map_err(|e| {
        CliError::Config(format!("cannot read {}: {e}", config_path.display()))
    })?;
    let mut raw: RunConfig = toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", config_path.display())))?;
    apply_overrides(&mut raw, overrides);

    let base = config_path.parent().unwrap_or(Path::new("."));
    let dataset_path = if raw.dataset.path.is_absolute() {
        raw.dataset.path.clone()
    } else {
        base.join(&raw.dataset.path)
    };
    validate(&raw, &dataset_path)?;

    let backend = match raw.annotate.backend.as_str() {
        "oracle" => Backend::Oracle,
        "mock" => Backend::Mock,
        _ => Backend::Live,
    };
    let method = match raw.projection.method.as_str() {
        "pca" => ProjectionMethod::Pca,
        _ => ProjectionMethod::Tsne,
    };
    let metrics = raw
        .annotate
        .metrics
        .iter()
        .map(|m| parse_metric(m))
        .collect::<Result<Vec<_>, _>>()?;

    let config_hash = sha256_hex(
        serde_json::to_string(&raw)
            .expect("config serializes")
            .as_bytes(),
    );
    let run_id = raw
        .run
        .id
        .clone()
        .unwrap_or_else(|| format!("run-{}", &config_hash[..12]));
    let out_dir = if raw.run.out_dir.is_absolute() {
        raw.run.out_dir.clone()
    } else {
        base.join(&raw.run.out_dir)
    };
    let run_dir = out_dir.join(&run_id);

    Ok(Resolved {
        raw,
        config_hash,
        run_id,
        run_dir,
        dataset_path,
        backend,
        method,
        metrics,
    })
}
