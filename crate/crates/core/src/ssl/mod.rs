//! Self-supervised contrastive pre-training and embedding extraction.
//!
//! Two modes: a single time-domain encoder trained with NT-Xent over two
//! augmented views (simclr), and a dual time/frequency encoder pair trained
//! with per-branch contrastive terms plus a cross-domain consistency term
//! (tfc).

mod augment;
mod loss;
mod net;

pub use augment::{augment, augment_spectrum, AugmentationSpec};
pub use loss::{
    nt_xent_loss, tfc_loss_from_embeddings, TfcEmbeddingBatch, TfcEmbeddingGrads, TfcLosses,
};
pub use net::{Encoder, EncoderConfig, TfcModel};

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ingest::Window;
use crate::numeric::{fft_magnitude, AdamParams, OptimizerKind, OptimizerState, Tensor};

#[derive(Debug, thiserror::Error)]
pub enum SslError {
    #[error("window of length {input_len} is consumed by the convolution stack")]
    WindowTooShort { input_len: usize },
    #[error("zero embedding has no direction")]
    ZeroVector,
    #[error("loss became non-finite at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("model file: {0}")]
    ModelFormat(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl From<crate::numeric::NumericError> for SslError {
    fn from(e: crate::numeric::NumericError) -> SslError {
        match e {
            crate::numeric::NumericError::ZeroVector => SslError::ZeroVector,
            crate::numeric::NumericError::NonFiniteLoss => {
                SslError::NonFiniteLoss { epoch: 0, batch: 0 }
            }
            crate::numeric::NumericError::ShapeMismatch { expected, actual } => {
                SslError::ShapeMismatch(format!("expected {expected:?}, got {actual:?}"))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SslMode {
    Simclr,
    Tfc,
}

impl std::fmt::Display for SslMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SslMode::Simclr => "simclr",
            SslMode::Tfc => "tfc",
        })
    }
}

/// Everything pretraining needs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastiveConfig {
    pub mode: SslMode,
    pub encoder: EncoderConfig,
    pub temperature: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: OptimizerKind,
    pub augmentation: AugmentationSpec,
    pub seed: u64,
    /// Dual-encoder settings; ignored in simclr mode.
    pub joint_dim: usize,
    pub delta: f64,
    pub lambda: f64,
    pub cross_metric: crate::numeric::DistanceMetric,
}

impl ContrastiveConfig {
    /// SGD with cosine-decayed learning rate 0.1, 200 epochs, batch 512.
    pub fn simclr_defaults() -> Self {
        ContrastiveConfig {
            mode: SslMode::Simclr,
            encoder: EncoderConfig::default(),
            temperature: 0.1,
            batch_size: 512,
            epochs: 200,
            optimizer: OptimizerKind::SgdCosine {
                base_lr: 0.1,
                total_epochs: 200,
            },
            augmentation: AugmentationSpec::default(),
            seed: 0,
            joint_dim: 668,
            delta: 1.0,
            lambda: 0.5,
            cross_metric: crate::numeric::DistanceMetric::Cosine,
        }
    }

    /// Adam at 3e-4 (beta2 = 0.99), 40 epochs, batch 128, joint dim 668.
    pub fn tfc_defaults() -> Self {
        ContrastiveConfig {
            mode: SslMode::Tfc,
            epochs: 40,
            batch_size: 128,
            optimizer: OptimizerKind::Adam(AdamParams::default()),
            ..ContrastiveConfig::simclr_defaults()
        }
    }

    pub fn validate(&self) -> Result<(), SslError> {
        if self.temperature <= 0.0 {
            return Err(SslError::BadConfig(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if self.batch_size < 2 {
            return Err(SslError::BadConfig(
                "batch size must be at least 2 (contrastive losses need negatives)".into(),
            ));
        }
        if self.epochs == 0 {
            return Err(SslError::BadConfig("epochs must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(SslError::BadConfig(format!(
                "lambda must lie in [0, 1], got {}",
                self.lambda
            )));
        }
        if self.delta <= 0.0 {
            return Err(SslError::BadConfig(format!(
                "margin delta must be positive, got {}",
                self.delta
            )));
        }
        if self.joint_dim == 0 || self.joint_dim % 2 != 0 {
            return Err(SslError::BadConfig(format!(
                "joint dimension must be a positive even number, got {}",
                self.joint_dim
            )));
        }
        self.augmentation.validate().map_err(SslError::BadConfig)?;
        self.encoder.stage_lengths()?;
        Ok(())
    }
}

/// Trained parameters for either mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrainedModel {
    Simclr(Encoder),
    Tfc(TfcModel),
}

impl TrainedModel {
    pub fn mode(&self) -> SslMode {
        match self {
            TrainedModel::Simclr(_) => SslMode::Simclr,
            TrainedModel::Tfc(_) => SslMode::Tfc,
        }
    }

    pub fn encoder_config(&self) -> &EncoderConfig {
        match self {
            TrainedModel::Simclr(e) => e.config(),
            TrainedModel::Tfc(m) => m.config(),
        }
    }
}

/// Which embedding a model should produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedDomain {
    Time,
    Frequency,
    Joint,
}

/// One training-log row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub lr: f64,
}

/// Writes the log as CSV: epoch,mean_loss,lr.
pub fn write_training_log<W: Write>(out: &mut W, log: &[EpochLog]) -> Result<(), SslError> {
    writeln!(out, "epoch,mean_loss,lr")?;
    for row in log {
        writeln!(out, "{},{},{}", row.epoch, row.mean_loss, row.lr)?;
    }
    Ok(())
}

/// Window samples transposed to channel-major [3][L] for the encoder.
pub fn window_channels(window: &Window) -> Vec<Vec<f64>> {
    let mut channels = vec![Vec::with_capacity(window.values.len()); 3];
    for sample in &window.values {
        for c in 0..3 {
            channels[c].push(sample[c]);
        }
    }
    channels
}

/// Magnitude spectrum of each axis, arranged [3][L].
pub fn frequency_view(channels: &[Vec<f64>]) -> Vec<Vec<f64>> {
    channels.iter().map(|row| fft_magnitude(row)).collect()
}

fn check_window_lengths(windows: &[Window], expected: usize) -> Result<(), SslError> {
    for w in windows {
        if w.values.len() != expected {
            return Err(SslError::ShapeMismatch(format!(
                "window of length {} does not match the encoder input length {expected}",
                w.values.len()
            )));
        }
    }
    Ok(())
}

/// Per-epoch stream derivation keeps shuffling and augmentation draws
/// independent of how earlier epochs consumed randomness. The +1 offset
/// keeps epoch 0 distinct from the parameter-init stream.
fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// The four view sets entering the dual-branch objective, each [n][3][L].
pub struct TfcViewBatch {
    pub time: Vec<Vec<Vec<f64>>>,
    pub time_aug: Vec<Vec<Vec<f64>>>,
    pub freq: Vec<Vec<Vec<f64>>>,
    pub freq_aug: Vec<Vec<Vec<f64>>>,
}

/// Builds the four views for a batch of windows: raw time view, augmented
/// time view, magnitude spectrum, and jittered magnitude spectrum.
pub fn make_tfc_views(
    windows: &[Window],
    spec: &AugmentationSpec,
    rng: &mut impl rand::Rng,
) -> TfcViewBatch {
    let mut views = TfcViewBatch {
        time: Vec::with_capacity(windows.len()),
        time_aug: Vec::with_capacity(windows.len()),
        freq: Vec::with_capacity(windows.len()),
        freq_aug: Vec::with_capacity(windows.len()),
    };
    for w in windows {
        let time = window_channels(w);
        let time_aug = window_channels(&augment(w, spec, rng));
        let freq = frequency_view(&time);
        let freq_aug = augment_spectrum(&freq, rng);
        views.time.push(time);
        views.time_aug.push(time_aug);
        views.freq.push(freq);
        views.freq_aug.push(freq_aug);
    }
    views
}

/// Full dual-branch objective for one prepared view batch: loss components
/// plus parameter gradients in the model's slot layout.
pub fn tfc_losses(
    views: &TfcViewBatch,
    model: &TfcModel,
    tau: f64,
) -> Result<(TfcLosses, Vec<Tensor>), SslError> {
    let n = views.time.len();
    let mut traces = Vec::with_capacity(4 * n);
    let mut batch = TfcEmbeddingBatch {
        h_time: Vec::with_capacity(n),
        h_time_aug: Vec::with_capacity(n),
        h_freq: Vec::with_capacity(n),
        h_freq_aug: Vec::with_capacity(n),
        z_time: Vec::with_capacity(n),
        z_time_aug: Vec::with_capacity(n),
        z_freq: Vec::with_capacity(n),
        z_freq_aug: Vec::with_capacity(n),
    };
    // Trace order per window: time, time_aug, freq, freq_aug.
    for i in 0..n {
        let (h_t, tr_t) = model.encode_h(false, views.time[i].clone())?;
        let (h_ta, tr_ta) = model.encode_h(false, views.time_aug[i].clone())?;
        let (h_f, tr_f) = model.encode_h(true, views.freq[i].clone())?;
        let (h_fa, tr_fa) = model.encode_h(true, views.freq_aug[i].clone())?;
        batch.z_time.push(model.project(false, &h_t));
        batch.z_time_aug.push(model.project(false, &h_ta));
        batch.z_freq.push(model.project(true, &h_f));
        batch.z_freq_aug.push(model.project(true, &h_fa));
        batch.h_time.push(h_t);
        batch.h_time_aug.push(h_ta);
        batch.h_freq.push(h_f);
        batch.h_freq_aug.push(h_fa);
        traces.extend([tr_t, tr_ta, tr_f, tr_fa]);
    }

    let (losses, egrads) =
        tfc_loss_from_embeddings(&batch, tau, model.delta, model.lambda, model.metric)?;

    let mut grads = model.zero_grads();
    for i in 0..n {
        // dL/dh = direct branch-loss term + projector chain from dL/dz.
        let add = |a: &[f64], b: Vec<f64>| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| x + y).collect()
        };
        let dh_t = add(
            &egrads.h_time[i],
            model.project_backward(false, &batch.h_time[i], &egrads.z_time[i], &mut grads),
        );
        let dh_ta = add(
            &egrads.h_time_aug[i],
            model.project_backward(false, &batch.h_time_aug[i], &egrads.z_time_aug[i], &mut grads),
        );
        let dh_f = add(
            &egrads.h_freq[i],
            model.project_backward(true, &batch.h_freq[i], &egrads.z_freq[i], &mut grads),
        );
        let dh_fa = add(
            &egrads.h_freq_aug[i],
            model.project_backward(true, &batch.h_freq_aug[i], &egrads.z_freq_aug[i], &mut grads),
        );
        model.encoder_backward_into(false, &traces[4 * i], &dh_t, &mut grads);
        model.encoder_backward_into(false, &traces[4 * i + 1], &dh_ta, &mut grads);
        model.encoder_backward_into(true, &traces[4 * i + 2], &dh_f, &mut grads);
        model.encoder_backward_into(true, &traces[4 * i + 3], &dh_fa, &mut grads);
    }
    Ok((losses, grads))
}

/// Pre-trains encoders on unlabeled windows. Deterministic given the seed;
/// labels on the windows are ignored.
pub fn pretrain(
    train: &[Window],
    config: &ContrastiveConfig,
) -> Result<(TrainedModel, Vec<EpochLog>), SslError> {
    config.validate()?;
    if train.is_empty() {
        return Err(SslError::EmptyTrainingSet);
    }
    check_window_lengths(train, config.encoder.input_len)?;

    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = match config.mode {
        SslMode::Simclr => {
            TrainedModel::Simclr(Encoder::init(config.encoder.clone(), &mut init_rng)?)
        }
        SslMode::Tfc => TrainedModel::Tfc(TfcModel::init(
            config.encoder.clone(),
            config.joint_dim,
            config.delta,
            config.lambda,
            config.cross_metric,
            &mut init_rng,
        )?),
    };
    let mut optimizer = match config.optimizer.clone() {
        OptimizerKind::SgdCosine {
            base_lr,
            total_epochs,
        } => OptimizerState::sgd_cosine(base_lr, total_epochs),
        OptimizerKind::Adam(p) => OptimizerState::adam(p),
    };

    let mut log = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..config.epochs {
        optimizer.set_epoch(epoch);
        let mut rng = epoch_rng(config.seed, epoch);
        order.shuffle(&mut rng);
        let mut batch_losses = Vec::new();
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            if chunk.len() < 2 {
                continue;
            }
            let windows: Vec<&Window> = chunk.iter().map(|&i| &train[i]).collect();
            let annotate = |e: SslError| match e {
                SslError::NonFiniteLoss { .. } => SslError::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                },
                other => other,
            };
            let loss = match &mut model {
                TrainedModel::Simclr(encoder) => {
                    simclr_batch_step(encoder, &windows, config, &mut rng, &mut optimizer)
                        .map_err(annotate)?
                }
                TrainedModel::Tfc(tfc) => {
                    let owned: Vec<Window> = windows.iter().map(|w| (*w).clone()).collect();
                    let views = make_tfc_views(&owned, &config.augmentation, &mut rng);
                    let (losses, grads) =
                        tfc_losses(&views, tfc, config.temperature).map_err(annotate)?;
                    optimizer
                        .step(tfc.params_mut(), &grads)
                        .map_err(|_| SslError::NonFiniteLoss {
                            epoch,
                            batch: batch_idx,
                        })?;
                    losses.total
                }
            };
            if !loss.is_finite() {
                return Err(SslError::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                });
            }
            batch_losses.push(loss);
        }
        if batch_losses.is_empty() {
            return Err(SslError::BadConfig(
                "no batch reached the minimum size of 2 windows".into(),
            ));
        }
        let mean_loss = batch_losses.iter().sum::<f64>() / batch_losses.len() as f64;
        log.push(EpochLog {
            epoch,
            mean_loss,
            lr: optimizer.learning_rate(),
        });
    }
    Ok((model, log))
}

fn simclr_batch_step(
    encoder: &mut Encoder,
    windows: &[&Window],
    config: &ContrastiveConfig,
    rng: &mut impl rand::Rng,
    optimizer: &mut OptimizerState,
) -> Result<f64, SslError> {
    let n = windows.len();
    let mut embeddings = vec![Vec::new(); 2 * n];
    let mut traces = Vec::with_capacity(2 * n);
    // Views i and i + n of the same window form the positive pair.
    for (i, w) in windows.iter().enumerate() {
        let v1 = augment(w, &config.augmentation, rng);
        let v2 = augment(w, &config.augmentation, rng);
        let (z1, t1) = encoder.forward_trace(window_channels(&v1))?;
        let (z2, t2) = encoder.forward_trace(window_channels(&v2))?;
        embeddings[i] = z1;
        embeddings[i + n] = z2;
        traces.push((i, t1));
        traces.push((i + n, t2));
    }
    let (loss, dz) = nt_xent_loss(&embeddings, config.temperature)?;
    let mut grads = encoder.zero_grads();
    for (slot, trace) in &traces {
        encoder.backward(trace, &dz[*slot], &mut grads);
    }
    optimizer
        .step(encoder.params_mut(), &grads)
        .map_err(|_| SslError::NonFiniteLoss { epoch: 0, batch: 0 })?;
    Ok(loss)
}

/// Embeds windows with a trained (or deliberately random-init) model.
pub fn encode(
    windows: &[Window],
    model: &TrainedModel,
    domain: EmbedDomain,
) -> Result<Vec<Vec<f64>>, SslError> {
    if windows.is_empty() {
        return Ok(Vec::new());
    }
    check_window_lengths(windows, model.encoder_config().input_len)?;
    match (model, domain) {
        (TrainedModel::Simclr(encoder), EmbedDomain::Time) => windows
            .iter()
            .map(|w| encoder.embed(window_channels(w)))
            .collect(),
        (TrainedModel::Simclr(_), _) => Err(SslError::BadConfig(
            "a simclr model only produces time-domain embeddings".into(),
        )),
        (TrainedModel::Tfc(model), domain) => windows
            .iter()
            .map(|w| {
                let time = window_channels(w);
                match domain {
                    EmbedDomain::Time => {
                        let (h, _) = model.encode_h(false, time)?;
                        Ok(model.project(false, &h))
                    }
                    EmbedDomain::Frequency => {
                        let (h, _) = model.encode_h(true, frequency_view(&time))?;
                        Ok(model.project(true, &h))
                    }
                    EmbedDomain::Joint => {
                        let (ht, _) = model.encode_h(false, time.clone())?;
                        let (hf, _) = model.encode_h(true, frequency_view(&time))?;
                        let mut joint = model.project(false, &ht);
                        joint.extend(model.project(true, &hf));
                        Ok(joint)
                    }
                }
            })
            .collect(),
    }
}

const MODEL_MAGIC: &[u8; 8] = b"SLMODEL\x01";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    mode: SslMode,
    encoder: EncoderConfig,
    joint_dim: Option<usize>,
    delta: Option<f64>,
    lambda: Option<f64>,
    metric: Option<crate::numeric::DistanceMetric>,
    param_shapes: Vec<Vec<usize>>,
}

/// Writes a model as a versioned binary: magic, version, JSON config header,
/// then raw little-endian f64 parameter data.
pub fn save_model(path: &Path, model: &TrainedModel) -> Result<(), SslError> {
    let (header, params) = match model {
        TrainedModel::Simclr(e) => (
            ModelHeader {
                mode: SslMode::Simclr,
                encoder: e.config().clone(),
                joint_dim: None,
                delta: None,
                lambda: None,
                metric: None,
                param_shapes: e.params().iter().map(|p| p.shape().to_vec()).collect(),
            },
            e.params(),
        ),
        TrainedModel::Tfc(m) => (
            ModelHeader {
                mode: SslMode::Tfc,
                encoder: m.config().clone(),
                joint_dim: Some(m.joint_dim()),
                delta: Some(m.delta),
                lambda: Some(m.lambda),
                metric: Some(m.metric),
                param_shapes: m.params().iter().map(|p| p.shape().to_vec()).collect(),
            },
            m.params(),
        ),
    };
    let header_bytes = serde_json::to_vec(&header).expect("header serializes");
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(MODEL_MAGIC)?;
    out.write_all(&MODEL_VERSION.to_le_bytes())?;
    out.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
    out.write_all(&header_bytes)?;
    for p in params {
        for v in p.data() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load_model(path: &Path) -> Result<TrainedModel, SslError> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    file.read_exact(&mut magic)?;
    if &magic != MODEL_MAGIC {
        return Err(SslError::ModelFormat("bad magic bytes".into()));
    }
    let mut version = [0u8; 4];
    file.read_exact(&mut version)?;
    let version = u32::from_le_bytes(version);
    if version != MODEL_VERSION {
        return Err(SslError::ModelFormat(format!(
            "unsupported model version {version}"
        )));
    }
    let mut len = [0u8; 8];
    file.read_exact(&mut len)?;
    let mut header_bytes = vec![0u8; u64::from_le_bytes(len) as usize];
    file.read_exact(&mut header_bytes)?;
    let header: ModelHeader = serde_json::from_slice(&header_bytes)
        .map_err(|e| SslError::ModelFormat(format!("bad header: {e}")))?;
    let mut params = Vec::with_capacity(header.param_shapes.len());
    for shape in &header.param_shapes {
        let count: usize = shape.iter().product();
        let mut data = Vec::with_capacity(count);
        let mut buf = [0u8; 8];
        for _ in 0..count {
            file.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        params.push(
            Tensor::from_vec(shape, data)
                .map_err(|_| SslError::ModelFormat("shape/data mismatch".into()))?,
        );
    }
    match header.mode {
        SslMode::Simclr => Ok(TrainedModel::Simclr(Encoder::from_params(
            header.encoder,
            params,
        ))),
        SslMode::Tfc => {
            let (Some(joint), Some(delta), Some(lambda), Some(metric)) = (
                header.joint_dim,
                header.delta,
                header.lambda,
                header.metric,
            ) else {
                return Err(SslError::ModelFormat(
                    "dual-encoder header missing joint settings".into(),
                ));
            };
            Ok(TrainedModel::Tfc(TfcModel::from_parts(
                header.encoder,
                joint,
                delta,
                lambda,
                metric,
                params,
            )))
        }
    }
}
