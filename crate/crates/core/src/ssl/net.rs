//! Convolutional encoder with hand-derived backpropagation.
//!
//! The encoder is a fixed family: three 1-D convolution blocks (valid
//! convolution, ReLU, max-pool of width 2 / stride 2) followed by global
//! average pooling over time and a two-layer projection head. Parameters
//! live in a flat `Vec<Tensor>` so one optimizer call updates a whole model.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numeric::{DistanceMetric, Tensor};

use super::SslError;

/// Architecture description. The defaults are the fixed stack used
/// throughout; tests shrink the fields to keep gradient checks cheap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub input_len: usize,
    pub kernel_sizes: [usize; 3],
    pub channels: [usize; 3],
    pub hidden_dim: usize,
    pub output_dim: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            input_len: 128,
            kernel_sizes: [24, 16, 8],
            channels: [32, 64, 96],
            hidden_dim: 96,
            output_dim: 96,
        }
    }
}

pub const INPUT_CHANNELS: usize = 3;

impl EncoderConfig {
    /// Sequence lengths after each conv and pool stage. Errors if the stack
    /// consumes the window entirely (for the default stack this means
    /// input_len < 89).
    pub fn stage_lengths(&self) -> Result<[usize; 6], SslError> {
        let mut lens = [0usize; 6];
        let mut len = self.input_len;
        for (i, k) in self.kernel_sizes.iter().enumerate() {
            if len < *k {
                return Err(SslError::WindowTooShort {
                    input_len: self.input_len,
                });
            }
            len = len - k + 1;
            lens[2 * i] = len;
            len /= 2;
            lens[2 * i + 1] = len;
            if len == 0 {
                return Err(SslError::WindowTooShort {
                    input_len: self.input_len,
                });
            }
        }
        Ok(lens)
    }
}

/// Parameter slot layout for one encoder:
/// [conv1_w, conv1_b, conv2_w, conv2_b, conv3_w, conv3_b,
///  fc1_w, fc1_b, fc2_w, fc2_b]
pub(crate) const ENCODER_SLOTS: usize = 10;

fn kaiming_uniform(shape: &[usize], fan_in: usize, rng: &mut impl Rng) -> Tensor {
    let limit = (6.0 / fan_in as f64).sqrt();
    let len: usize = shape.iter().product();
    let data = (0..len).map(|_| rng.random_range(-limit..limit)).collect();
    Tensor::from_vec(shape, data).expect("shape/data agree")
}

/// Nonzero bias init keeps the relu stack from being positively homogeneous,
/// which would pin the cross-view consistency distances of scale-like
/// augmentations onto the |.| kink at initialization.
fn bias_uniform(dim: usize, fan_in: usize, rng: &mut impl Rng) -> Tensor {
    let limit = 1.0 / (fan_in as f64).sqrt();
    let data = (0..dim).map(|_| rng.random_range(-limit..limit)).collect();
    Tensor::from_vec(&[dim], data).expect("shape/data agree")
}

pub(crate) fn init_encoder_params(cfg: &EncoderConfig, rng: &mut impl Rng) -> Vec<Tensor> {
    let [c1, c2, c3] = cfg.channels;
    let [k1, k2, k3] = cfg.kernel_sizes;
    vec![
        kaiming_uniform(&[c1, INPUT_CHANNELS, k1], INPUT_CHANNELS * k1, rng),
        bias_uniform(c1, INPUT_CHANNELS * k1, rng),
        kaiming_uniform(&[c2, c1, k2], c1 * k2, rng),
        bias_uniform(c2, c1 * k2, rng),
        kaiming_uniform(&[c3, c2, k3], c2 * k3, rng),
        bias_uniform(c3, c2 * k3, rng),
        kaiming_uniform(&[cfg.hidden_dim, c3], c3, rng),
        bias_uniform(cfg.hidden_dim, c3, rng),
        kaiming_uniform(&[cfg.output_dim, cfg.hidden_dim], cfg.hidden_dim, rng),
        bias_uniform(cfg.output_dim, cfg.hidden_dim, rng),
    ]
}

/// Valid 1-D convolution: y[o][t] = b[o] + sum_{i,j} w[o][i][j] x[i][t+j].
fn conv_forward(w: &Tensor, b: &Tensor, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (out_ch, in_ch, k) = (w.shape()[0], w.shape()[1], w.shape()[2]);
    let len = x[0].len();
    let out_len = len - k + 1;
    let wd = w.data();
    let mut y = vec![vec![0.0; out_len]; out_ch];
    for o in 0..out_ch {
        let bias = b.data()[o];
        for t in 0..out_len {
            let mut acc = bias;
            for i in 0..in_ch {
                let row = &wd[(o * in_ch + i) * k..(o * in_ch + i) * k + k];
                let xs = &x[i][t..t + k];
                for j in 0..k {
                    acc += row[j] * xs[j];
                }
            }
            y[o][t] = acc;
        }
    }
    y
}

fn conv_backward(
    w: &Tensor,
    x: &[Vec<f64>],
    dy: &[Vec<f64>],
    dw: &mut Tensor,
    db: &mut Tensor,
) -> Vec<Vec<f64>> {
    let (out_ch, in_ch, k) = (w.shape()[0], w.shape()[1], w.shape()[2]);
    let len = x[0].len();
    let out_len = dy[0].len();
    let wd = w.data();
    let dwd = dw.data_mut();
    let mut dx = vec![vec![0.0; len]; in_ch];
    for o in 0..out_ch {
        db.data_mut()[o] += dy[o].iter().sum::<f64>();
        for i in 0..in_ch {
            let base = (o * in_ch + i) * k;
            for j in 0..k {
                let mut acc = 0.0;
                for t in 0..out_len {
                    acc += dy[o][t] * x[i][t + j];
                }
                dwd[base + j] += acc;
            }
            for t in 0..out_len {
                let g = dy[o][t];
                for j in 0..k {
                    dx[i][t + j] += g * wd[base + j];
                }
            }
        }
    }
    dx
}

/// Max-pool width 2 / stride 2; an odd trailing element is dropped. Returns
/// pooled values and the absolute source index of each maximum.
fn maxpool_forward(x: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<usize>>) {
    let out_len = x[0].len() / 2;
    let mut y = vec![vec![0.0; out_len]; x.len()];
    let mut arg = vec![vec![0usize; out_len]; x.len()];
    for (c, row) in x.iter().enumerate() {
        for t in 0..out_len {
            let (a, b) = (row[2 * t], row[2 * t + 1]);
            if b > a {
                y[c][t] = b;
                arg[c][t] = 2 * t + 1;
            } else {
                y[c][t] = a;
                arg[c][t] = 2 * t;
            }
        }
    }
    (y, arg)
}

fn relu_rows(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    x.iter()
        .map(|row| row.iter().map(|v| v.max(0.0)).collect())
        .collect()
}

fn linear_forward(w: &Tensor, b: &Tensor, x: &[f64]) -> Vec<f64> {
    let (out, inp) = (w.shape()[0], w.shape()[1]);
    let wd = w.data();
    (0..out)
        .map(|o| {
            let row = &wd[o * inp..(o + 1) * inp];
            b.data()[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect()
}

fn linear_backward(
    w: &Tensor,
    x: &[f64],
    dy: &[f64],
    dw: &mut Tensor,
    db: &mut Tensor,
) -> Vec<f64> {
    let (out, inp) = (w.shape()[0], w.shape()[1]);
    let wd = w.data();
    let dwd = dw.data_mut();
    let mut dx = vec![0.0; inp];
    for o in 0..out {
        db.data_mut()[o] += dy[o];
        for i in 0..inp {
            dwd[o * inp + i] += dy[o] * x[i];
            dx[i] += dy[o] * wd[o * inp + i];
        }
    }
    dx
}

/// Cached activations from one forward pass, consumed by backward.
pub(crate) struct EncoderTrace {
    x: Vec<Vec<f64>>,
    conv_pre: [Vec<Vec<f64>>; 3],
    pooled: [Vec<Vec<f64>>; 3],
    pool_arg: [Vec<Vec<usize>>; 3],
    gap: Vec<f64>,
    fc1_pre: Vec<f64>,
    fc1_post: Vec<f64>,
}

/// Forward pass through the slots at `base..base+ENCODER_SLOTS`.
pub(crate) fn encoder_forward(
    params: &[Tensor],
    base: usize,
    x: Vec<Vec<f64>>,
) -> Result<(Vec<f64>, EncoderTrace), SslError> {
    if x.len() != INPUT_CHANNELS {
        return Err(SslError::ShapeMismatch(format!(
            "expected {INPUT_CHANNELS} input channels, got {}",
            x.len()
        )));
    }
    let mut conv_pre: [Vec<Vec<f64>>; 3] = Default::default();
    let mut pooled: [Vec<Vec<f64>>; 3] = Default::default();
    let mut pool_arg: [Vec<Vec<usize>>; 3] = Default::default();
    let mut cur = x.clone();
    for stage in 0..3 {
        let w = &params[base + 2 * stage];
        let b = &params[base + 2 * stage + 1];
        let k = w.shape()[2];
        if cur[0].len() < k {
            return Err(SslError::WindowTooShort { input_len: x[0].len() });
        }
        let pre = conv_forward(w, b, &cur);
        let post = relu_rows(&pre);
        let (p, arg) = maxpool_forward(&post);
        if p[0].is_empty() {
            return Err(SslError::WindowTooShort { input_len: x[0].len() });
        }
        conv_pre[stage] = pre;
        pool_arg[stage] = arg;
        cur = p.clone();
        pooled[stage] = p;
    }
    let t_final = pooled[2][0].len() as f64;
    let gap: Vec<f64> = pooled[2]
        .iter()
        .map(|row| row.iter().sum::<f64>() / t_final)
        .collect();
    let fc1_pre = linear_forward(&params[base + 6], &params[base + 7], &gap);
    let fc1_post: Vec<f64> = fc1_pre.iter().map(|v| v.max(0.0)).collect();
    let z = linear_forward(&params[base + 8], &params[base + 9], &fc1_post);
    Ok((
        z,
        EncoderTrace {
            x,
            conv_pre,
            pooled,
            pool_arg,
            gap,
            fc1_pre,
            fc1_post,
        },
    ))
}

/// Accumulates parameter gradients for one forward trace into `grads`
/// (same slot layout as `params`).
pub(crate) fn encoder_backward(
    params: &[Tensor],
    base: usize,
    trace: &EncoderTrace,
    dz: &[f64],
    grads: &mut [Tensor],
) {
    let dfc1_post = {
        let (head_w, head_b) = grads.split_at_mut(base + 9);
        linear_backward(
            &params[base + 8],
            &trace.fc1_post,
            dz,
            &mut head_w[base + 8],
            &mut head_b[0],
        )
    };
    let dfc1_pre: Vec<f64> = dfc1_post
        .iter()
        .zip(&trace.fc1_pre)
        .map(|(g, pre)| if *pre > 0.0 { *g } else { 0.0 })
        .collect();
    let dgap = {
        let (left, right) = grads.split_at_mut(base + 7);
        linear_backward(
            &params[base + 6],
            &trace.gap,
            &dfc1_pre,
            &mut left[base + 6],
            &mut right[0],
        )
    };
    // GAP spreads each channel gradient evenly over its time steps.
    let t_final = trace.pooled[2][0].len();
    let mut dcur: Vec<Vec<f64>> = dgap
        .iter()
        .map(|g| vec![g / t_final as f64; t_final])
        .collect();
    for stage in (0..3).rev() {
        // Un-pool: route each pooled gradient to the argmax position.
        let pre = &trace.conv_pre[stage];
        let mut dpre = vec![vec![0.0; pre[0].len()]; pre.len()];
        for (c, args) in trace.pool_arg[stage].iter().enumerate() {
            for (t, &src) in args.iter().enumerate() {
                // ReLU gate at the source position.
                if pre[c][src] > 0.0 {
                    dpre[c][src] += dcur[c][t];
                }
            }
        }
        let input: &[Vec<f64>] = if stage == 0 {
            &trace.x
        } else {
            &trace.pooled[stage - 1]
        };
        let (left, right) = grads.split_at_mut(base + 2 * stage + 1);
        dcur = conv_backward(
            &params[base + 2 * stage],
            input,
            &dpre,
            &mut left[base + 2 * stage],
            &mut right[0],
        );
    }
}

/// SimCLR-style encoder: one conv stack plus projection head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    config: EncoderConfig,
    params: Vec<Tensor>,
}

impl Encoder {
    pub fn init(config: EncoderConfig, rng: &mut impl Rng) -> Result<Encoder, SslError> {
        config.stage_lengths()?;
        let params = init_encoder_params(&config, rng);
        Ok(Encoder { config, params })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn output_dim(&self) -> usize {
        self.config.output_dim
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub(crate) fn from_params(config: EncoderConfig, params: Vec<Tensor>) -> Encoder {
        Encoder { config, params }
    }

    pub fn zero_grads(&self) -> Vec<Tensor> {
        self.params.iter().map(|p| Tensor::zeros(p.shape())).collect()
    }

    /// Embedding of one window given channel-major input [3][L].
    pub fn embed(&self, channels: Vec<Vec<f64>>) -> Result<Vec<f64>, SslError> {
        Ok(encoder_forward(&self.params, 0, channels)?.0)
    }

    pub(crate) fn forward_trace(
        &self,
        channels: Vec<Vec<f64>>,
    ) -> Result<(Vec<f64>, EncoderTrace), SslError> {
        encoder_forward(&self.params, 0, channels)
    }

    pub(crate) fn backward(&self, trace: &EncoderTrace, dz: &[f64], grads: &mut [Tensor]) {
        encoder_backward(&self.params, 0, trace, dz, grads)
    }
}

/// Dual-encoder model: time encoder, frequency encoder, and the two linear
/// projectors that map both embeddings into a shared space whose
/// concatenation forms the joint embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfcModel {
    config: EncoderConfig,
    joint_dim: usize,
    pub delta: f64,
    pub lambda: f64,
    pub metric: DistanceMetric,
    /// [G_T slots 0-9, G_F slots 10-19, R_T w/b slots 20-21, R_F w/b 22-23]
    params: Vec<Tensor>,
}

pub(crate) const TFC_TIME_BASE: usize = 0;
pub(crate) const TFC_FREQ_BASE: usize = ENCODER_SLOTS;
pub(crate) const TFC_RT_W: usize = 2 * ENCODER_SLOTS;
pub(crate) const TFC_RT_B: usize = 2 * ENCODER_SLOTS + 1;
pub(crate) const TFC_RF_W: usize = 2 * ENCODER_SLOTS + 2;
pub(crate) const TFC_RF_B: usize = 2 * ENCODER_SLOTS + 3;

impl TfcModel {
    pub fn init(
        config: EncoderConfig,
        joint_dim: usize,
        delta: f64,
        lambda: f64,
        metric: DistanceMetric,
        rng: &mut impl Rng,
    ) -> Result<TfcModel, SslError> {
        config.stage_lengths()?;
        if joint_dim % 2 != 0 || joint_dim == 0 {
            return Err(SslError::ShapeMismatch(format!(
                "joint dimension must be a positive even number, got {joint_dim}"
            )));
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(SslError::BadConfig(format!(
                "lambda must lie in [0, 1], got {lambda}"
            )));
        }
        let proj = joint_dim / 2;
        let mut params = init_encoder_params(&config, rng);
        params.extend(init_encoder_params(&config, rng));
        params.push(kaiming_uniform(
            &[proj, config.output_dim],
            config.output_dim,
            rng,
        ));
        params.push(bias_uniform(proj, config.output_dim, rng));
        params.push(kaiming_uniform(
            &[proj, config.output_dim],
            config.output_dim,
            rng,
        ));
        params.push(bias_uniform(proj, config.output_dim, rng));
        Ok(TfcModel {
            config,
            joint_dim,
            delta,
            lambda,
            metric,
            params,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn joint_dim(&self) -> usize {
        self.joint_dim
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub(crate) fn from_parts(
        config: EncoderConfig,
        joint_dim: usize,
        delta: f64,
        lambda: f64,
        metric: DistanceMetric,
        params: Vec<Tensor>,
    ) -> TfcModel {
        TfcModel {
            config,
            joint_dim,
            delta,
            lambda,
            metric,
            params,
        }
    }

    pub fn zero_grads(&self) -> Vec<Tensor> {
        self.params.iter().map(|p| Tensor::zeros(p.shape())).collect()
    }

    /// h embedding from the chosen encoder.
    pub(crate) fn encode_h(
        &self,
        freq: bool,
        channels: Vec<Vec<f64>>,
    ) -> Result<(Vec<f64>, EncoderTrace), SslError> {
        let base = if freq { TFC_FREQ_BASE } else { TFC_TIME_BASE };
        encoder_forward(&self.params, base, channels)
    }

    /// z = R(h) for the chosen branch.
    pub(crate) fn project(&self, freq: bool, h: &[f64]) -> Vec<f64> {
        let (w, b) = if freq {
            (&self.params[TFC_RF_W], &self.params[TFC_RF_B])
        } else {
            (&self.params[TFC_RT_W], &self.params[TFC_RT_B])
        };
        linear_forward(w, b, h)
    }

    /// Backward through a projector; returns dL/dh.
    pub(crate) fn project_backward(
        &self,
        freq: bool,
        h: &[f64],
        dz: &[f64],
        grads: &mut [Tensor],
    ) -> Vec<f64> {
        let (wi, bi) = if freq {
            (TFC_RF_W, TFC_RF_B)
        } else {
            (TFC_RT_W, TFC_RT_B)
        };
        let (left, right) = grads.split_at_mut(bi);
        linear_backward(&self.params[wi], h, dz, &mut left[wi], &mut right[0])
    }

    pub(crate) fn encoder_backward_into(
        &self,
        freq: bool,
        trace: &EncoderTrace,
        dh: &[f64],
        grads: &mut [Tensor],
    ) {
        let base = if freq { TFC_FREQ_BASE } else { TFC_TIME_BASE };
        encoder_backward(&self.params, base, trace, dh, grads)
    }
}

#[cfg(test)]
pub(crate) fn tiny_config() -> EncoderConfig {
    EncoderConfig {
        input_len: 20,
        kernel_sizes: [3, 2, 2],
        channels: [2, 2, 2],
        hidden_dim: 4,
        output_dim: 3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn stage_lengths_for_default_stack() {
        let cfg = EncoderConfig::default();
        assert_eq!(cfg.stage_lengths().unwrap(), [105, 52, 37, 18, 11, 5]);
    }

    #[test]
    fn stack_rejects_windows_it_would_consume() {
        let cfg = EncoderConfig {
            input_len: 88,
            ..EncoderConfig::default()
        };
        assert!(matches!(
            cfg.stage_lengths(),
            Err(SslError::WindowTooShort { input_len: 88 })
        ));
        let ok = EncoderConfig {
            input_len: 89,
            ..EncoderConfig::default()
        };
        assert_eq!(ok.stage_lengths().unwrap()[5], 1);
    }

    #[test]
    fn conv_known_values() {
        // Single input/output channel, kernel [1, -1] acts as a difference.
        let w = Tensor::from_vec(&[1, 1, 2], vec![1.0, -1.0]).unwrap();
        let b = Tensor::from_vec(&[1], vec![0.5]).unwrap();
        let y = conv_forward(&w, &b, &[vec![1.0, 3.0, 6.0, 10.0]]);
        assert_eq!(y, vec![vec![0.5 - 2.0, 0.5 - 3.0, 0.5 - 4.0]]);
    }

    #[test]
    fn maxpool_picks_first_on_ties_and_drops_odd_tail() {
        let (y, arg) = maxpool_forward(&[vec![2.0, 2.0, 1.0, 5.0, 9.0]]);
        assert_eq!(y, vec![vec![2.0, 5.0]]);
        assert_eq!(arg, vec![vec![0, 3]]);
    }

    #[test]
    fn embed_is_deterministic_and_correctly_sized() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let enc = Encoder::init(EncoderConfig::default(), &mut rng).unwrap();
        let x: Vec<Vec<f64>> = (0..3)
            .map(|c| (0..128).map(|t| ((t + c) as f64 * 0.1).sin()).collect())
            .collect();
        let z1 = enc.embed(x.clone()).unwrap();
        let z2 = enc.embed(x).unwrap();
        assert_eq!(z1.len(), 96);
        assert_eq!(z1, z2);
    }

    #[test]
    fn seeded_init_is_reproducible() {
        let cfg = tiny_config();
        let a = Encoder::init(
            cfg.clone(),
            &mut rand_chacha::ChaCha8Rng::seed_from_u64(42),
        )
        .unwrap();
        let b = Encoder::init(cfg, &mut rand_chacha::ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a, b);
    }

    /// Central-difference check of the whole conv/pool/GAP/head chain using
    /// a scalar readout sum(z * coef).
    #[test]
    fn encoder_backward_matches_finite_differences() {
        let cfg = tiny_config();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let enc = Encoder::init(cfg.clone(), &mut rng).unwrap();
        let x: Vec<Vec<f64>> = (0..3)
            .map(|c| {
                (0..cfg.input_len)
                    .map(|t| ((t * (c + 1)) as f64 * 0.37).sin())
                    .collect()
            })
            .collect();
        let coef: Vec<f64> = (0..cfg.output_dim)
            .map(|i| 0.5 + 0.25 * i as f64)
            .collect();

        let (z, trace) = enc.forward_trace(x.clone()).unwrap();
        assert_eq!(z.len(), cfg.output_dim);
        let mut grads = enc.zero_grads();
        enc.backward(&trace, &coef, &mut grads);
        let analytic: Vec<f64> = grads.iter().flat_map(|g| g.data().to_vec()).collect();

        let flat: Vec<f64> = enc
            .params()
            .iter()
            .flat_map(|p| p.data().to_vec())
            .collect();
        let shapes: Vec<Vec<usize>> = enc.params().iter().map(|p| p.shape().to_vec()).collect();
        let f = |theta: &[f64]| {
            let mut params = Vec::new();
            let mut offset = 0;
            for shape in &shapes {
                let len: usize = shape.iter().product();
                params.push(
                    Tensor::from_vec(shape, theta[offset..offset + len].to_vec()).unwrap(),
                );
                offset += len;
            }
            let model = Encoder::from_params(cfg.clone(), params);
            let z = model.embed(x.clone()).unwrap();
            z.iter().zip(&coef).map(|(a, b)| a * b).sum::<f64>()
        };
        let err = crate::numeric::grad_check(f, &flat, &analytic, 1e-5).unwrap();
        assert!(err < 1e-6, "max relative error {err}");
    }
}
