//! Contrastive losses with analytic gradients w.r.t. the embeddings.
//!
//! Both losses operate on already-computed embedding batches so they can be
//! validated directly against formula-level reference implementations;
//! model-level code chains these gradients through the encoders.

use crate::numeric::{cosine_similarity, distance, norm, DistanceMetric};

use super::SslError;

/// d cos(u,v) / du and / dv.
fn cosine_grads(u: &[f64], v: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>), SslError> {
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 {
        return Err(SslError::ZeroVector);
    }
    let c = cosine_similarity(u, v)?;
    let du: Vec<f64> = u
        .iter()
        .zip(v)
        .map(|(ui, vi)| (vi / nv - c * ui / nu) / nu)
        .collect();
    let dv: Vec<f64> = u
        .iter()
        .zip(v)
        .map(|(ui, vi)| (ui / nu - c * vi / nv) / nv)
        .collect();
    Ok((c, du, dv))
}

/// log sum exp with max subtraction; exact when only one term is present.
fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// NT-Xent over 2N embeddings where views i and i+N are positives.
///
/// Returns the mean anchor loss and its gradient w.r.t. every embedding:
/// mean_i of -log[ exp(sim(z_i, z_p)/tau) / sum_{k != i} exp(sim(z_i, z_k)/tau) ].
pub fn nt_xent_loss(
    embeddings: &[Vec<f64>],
    tau: f64,
) -> Result<(f64, Vec<Vec<f64>>), SslError> {
    let m = embeddings.len();
    if m < 2 || m % 2 != 0 {
        return Err(SslError::BadConfig(format!(
            "NT-Xent needs an even number of embeddings (two views per window), got {m}"
        )));
    }
    if tau <= 0.0 {
        return Err(SslError::BadConfig(format!(
            "temperature must be positive, got {tau}"
        )));
    }
    let n = m / 2;
    let dim = embeddings[0].len();
    for z in embeddings {
        if z.len() != dim {
            return Err(SslError::ShapeMismatch(
                "embedding dimensions disagree".into(),
            ));
        }
        if norm(z) == 0.0 {
            return Err(SslError::ZeroVector);
        }
    }

    // Pairwise cosine similarities.
    let mut sim = vec![vec![0.0f64; m]; m];
    for i in 0..m {
        for k in i + 1..m {
            let s = cosine_similarity(&embeddings[i], &embeddings[k])?;
            sim[i][k] = s;
            sim[k][i] = s;
        }
    }

    let mut loss = 0.0;
    let mut dsim = vec![vec![0.0f64; m]; m]; // dL/dsim[i][k] per ordered anchor pair
    let scale = 1.0 / m as f64;
    for i in 0..m {
        let partner = (i + n) % m;
        let others: Vec<f64> = (0..m).filter(|&k| k != i).map(|k| sim[i][k] / tau).collect();
        let lse = log_sum_exp(&others);
        loss += lse - sim[i][partner] / tau;
        // softmax weights over k != i
        for k in (0..m).filter(|&k| k != i) {
            let w = (sim[i][k] / tau - lse).exp();
            dsim[i][k] += scale * w / tau;
        }
        dsim[i][partner] -= scale / tau;
    }
    loss *= scale;
    if !loss.is_finite() {
        return Err(SslError::NonFiniteLoss { epoch: 0, batch: 0 });
    }

    let mut grads = vec![vec![0.0f64; dim]; m];
    for i in 0..m {
        for k in 0..m {
            if i == k || dsim[i][k] == 0.0 {
                continue;
            }
            let (_, di, dk) = cosine_grads(&embeddings[i], &embeddings[k])?;
            let coeff = dsim[i][k];
            for d in 0..dim {
                grads[i][d] += coeff * di[d];
                grads[k][d] += coeff * dk[d];
            }
        }
    }
    Ok((loss, grads))
}

/// One batch of the eight embedding groups entering the TFC objective:
/// encoder outputs h for the time/frequency branches and their augmented
/// views, plus the projected embeddings z for the same four paths.
#[derive(Debug, Clone, PartialEq)]
pub struct TfcEmbeddingBatch {
    pub h_time: Vec<Vec<f64>>,
    pub h_time_aug: Vec<Vec<f64>>,
    pub h_freq: Vec<Vec<f64>>,
    pub h_freq_aug: Vec<Vec<f64>>,
    pub z_time: Vec<Vec<f64>>,
    pub z_time_aug: Vec<Vec<f64>>,
    pub z_freq: Vec<Vec<f64>>,
    pub z_freq_aug: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TfcLosses {
    pub time: f64,
    pub freq: f64,
    pub consistency: f64,
    pub total: f64,
}

/// Gradients of the mixed objective w.r.t. each embedding group.
#[derive(Debug, Clone, PartialEq)]
pub struct TfcEmbeddingGrads {
    pub h_time: Vec<Vec<f64>>,
    pub h_time_aug: Vec<Vec<f64>>,
    pub h_freq: Vec<Vec<f64>>,
    pub h_freq_aug: Vec<Vec<f64>>,
    pub z_time: Vec<Vec<f64>>,
    pub z_time_aug: Vec<Vec<f64>>,
    pub z_freq: Vec<Vec<f64>>,
    pub z_freq_aug: Vec<Vec<f64>>,
}

fn zeros_like(groups: &[Vec<f64>]) -> Vec<Vec<f64>> {
    groups.iter().map(|g| vec![0.0; g.len()]).collect()
}

/// Distance value plus gradients w.r.t. both endpoints.
fn distance_grads(
    u: &[f64],
    v: &[f64],
    metric: DistanceMetric,
) -> Result<(f64, Vec<f64>, Vec<f64>), SslError> {
    match metric {
        DistanceMetric::Euclidean => {
            let d = distance(u, v, metric).expect("equal lengths");
            if d == 0.0 {
                return Ok((0.0, vec![0.0; u.len()], vec![0.0; v.len()]));
            }
            let du: Vec<f64> = u.iter().zip(v).map(|(a, b)| (a - b) / d).collect();
            let dv: Vec<f64> = du.iter().map(|g| -g).collect();
            Ok((d, du, dv))
        }
        DistanceMetric::Manhattan => {
            let d = distance(u, v, metric).expect("equal lengths");
            let du: Vec<f64> = u.iter().zip(v).map(|(a, b)| (a - b).signum()).collect();
            let dv: Vec<f64> = du.iter().map(|g| -g).collect();
            Ok((d, du, dv))
        }
        DistanceMetric::Cosine => {
            let (c, dcu, dcv) = cosine_grads(u, v)?;
            let du: Vec<f64> = dcu.iter().map(|g| -g).collect();
            let dv: Vec<f64> = dcv.iter().map(|g| -g).collect();
            Ok((1.0 - c, du, dv))
        }
    }
}

/// Contrastive term of one branch: anchors are the unaugmented embeddings,
/// positives their augmented views, negatives the other unaugmented
/// embeddings in the batch (the positive does not join the denominator).
/// Gradients are accumulated with the given weight.
fn branch_loss(
    h: &[Vec<f64>],
    h_aug: &[Vec<f64>],
    tau: f64,
    weight: f64,
    dh: &mut [Vec<f64>],
    dh_aug: &mut [Vec<f64>],
) -> Result<f64, SslError> {
    let n = h.len();
    let scale = weight / n as f64;
    let mut loss = 0.0;
    for i in 0..n {
        let (pos, dpos_h, dpos_aug) = {
            let (c, du, dv) = cosine_grads(&h[i], &h_aug[i])?;
            (c / tau, du, dv)
        };
        let mut sims = Vec::with_capacity(n - 1);
        let mut grad_pairs = Vec::with_capacity(n - 1);
        for j in (0..n).filter(|&j| j != i) {
            let (c, du, dv) = cosine_grads(&h[i], &h[j])?;
            sims.push(c / tau);
            grad_pairs.push((j, du, dv));
        }
        let lse = log_sum_exp(&sims);
        loss += lse - pos;
        for d in 0..h[i].len() {
            dh[i][d] -= scale * dpos_h[d] / tau;
            dh_aug[i][d] -= scale * dpos_aug[d] / tau;
        }
        for (s, (j, du, dv)) in sims.iter().zip(&grad_pairs) {
            let w = (s - lse).exp();
            for d in 0..h[i].len() {
                dh[i][d] += scale * w * du[d] / tau;
                dh[*j][d] += scale * w * dv[d] / tau;
            }
        }
    }
    Ok(loss / n as f64)
}

/// Evaluates the dual-branch objective
/// total = lambda (L_time + L_freq) + (1 - lambda) L_consistency
/// with L_consistency,i = sum over the three cross pairs of
/// |S_i - S_i^pair| + delta, S = distance between projected embeddings.
pub fn tfc_loss_from_embeddings(
    batch: &TfcEmbeddingBatch,
    tau: f64,
    delta: f64,
    lambda: f64,
    metric: DistanceMetric,
) -> Result<(TfcLosses, TfcEmbeddingGrads), SslError> {
    let n = batch.h_time.len();
    if n < 2 {
        return Err(SslError::BadConfig(format!(
            "dual-branch loss needs at least 2 windows per batch for negatives, got {n}"
        )));
    }
    if tau <= 0.0 {
        return Err(SslError::BadConfig(format!(
            "temperature must be positive, got {tau}"
        )));
    }
    let groups = [
        &batch.h_time_aug,
        &batch.h_freq,
        &batch.h_freq_aug,
        &batch.z_time,
        &batch.z_time_aug,
        &batch.z_freq,
        &batch.z_freq_aug,
    ];
    if groups.iter().any(|g| g.len() != n) {
        return Err(SslError::ShapeMismatch(
            "all embedding groups must hold one row per window".into(),
        ));
    }

    let mut grads = TfcEmbeddingGrads {
        h_time: zeros_like(&batch.h_time),
        h_time_aug: zeros_like(&batch.h_time_aug),
        h_freq: zeros_like(&batch.h_freq),
        h_freq_aug: zeros_like(&batch.h_freq_aug),
        z_time: zeros_like(&batch.z_time),
        z_time_aug: zeros_like(&batch.z_time_aug),
        z_freq: zeros_like(&batch.z_freq),
        z_freq_aug: zeros_like(&batch.z_freq_aug),
    };

    let l_time = branch_loss(
        &batch.h_time,
        &batch.h_time_aug,
        tau,
        lambda,
        &mut grads.h_time,
        &mut grads.h_time_aug,
    )?;
    let l_freq = branch_loss(
        &batch.h_freq,
        &batch.h_freq_aug,
        tau,
        lambda,
        &mut grads.h_freq,
        &mut grads.h_freq_aug,
    )?;

    // Consistency term over projected embeddings.
    let weight = (1.0 - lambda) / n as f64;
    let mut l_cons = 0.0;
    for i in 0..n {
        let (s_base, db_t, db_f) =
            distance_grads(&batch.z_time[i], &batch.z_freq[i], metric)?;
        // (z group of the pair's first leg, second leg, their grad sinks)
        let pairs: [(&[f64], &[f64], usize); 3] = [
            (&batch.z_time[i], &batch.z_freq_aug[i], 0),
            (&batch.z_time_aug[i], &batch.z_freq[i], 1),
            (&batch.z_time_aug[i], &batch.z_freq_aug[i], 2),
        ];
        for (u, v, which) in pairs {
            let (s_pair, du, dv) = distance_grads(u, v, metric)?;
            let diff = s_base - s_pair;
            l_cons += diff.abs() + delta;
            let sgn = if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            };
            for d in 0..db_t.len() {
                grads.z_time[i][d] += weight * sgn * db_t[d];
                grads.z_freq[i][d] += weight * sgn * db_f[d];
            }
            let (sink_u, sink_v): (&mut Vec<f64>, &mut Vec<f64>) = match which {
                0 => (&mut grads.z_time[i], &mut grads.z_freq_aug[i]),
                1 => (&mut grads.z_time_aug[i], &mut grads.z_freq[i]),
                _ => (&mut grads.z_time_aug[i], &mut grads.z_freq_aug[i]),
            };
            for d in 0..du.len() {
                sink_u[d] -= weight * sgn * du[d];
                sink_v[d] -= weight * sgn * dv[d];
            }
        }
    }
    l_cons /= n as f64;

    let total = lambda * (l_time + l_freq) + (1.0 - lambda) * l_cons;
    if !total.is_finite() {
        return Err(SslError::NonFiniteLoss { epoch: 0, batch: 0 });
    }
    Ok((
        TfcLosses {
            time: l_time,
            freq: l_freq,
            consistency: l_cons,
            total,
        },
        grads,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::grad_check;
    use rand::Rng;
    use rand::SeedableRng;

    fn random_rows(rng: &mut impl Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn single_pair_loss_is_exactly_zero() {
        let embeddings = vec![vec![0.3, -1.2, 0.7], vec![2.0, 0.1, 0.4]];
        let (loss, _) = nt_xent_loss(&embeddings, 0.5).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn orthogonal_pairs_anchor_value() {
        // Two identical pairs on orthogonal axes at tau = 1: each anchor
        // contributes ln(1 + 2/e).
        let embeddings = vec![
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
        ];
        let (loss, _) = nt_xent_loss(&embeddings, 1.0).unwrap();
        let expected = (1.0 + 2.0 / std::f64::consts::E).ln();
        assert!((loss - expected).abs() < 1e-9, "{loss} vs {expected}");
    }

    #[test]
    fn loss_is_scale_invariant() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let embeddings = random_rows(&mut rng, 8, 6);
        let scaled: Vec<Vec<f64>> = embeddings
            .iter()
            .map(|z| z.iter().map(|v| v * 3.0).collect())
            .collect();
        let (a, _) = nt_xent_loss(&embeddings, 0.3).unwrap();
        let (b, _) = nt_xent_loss(&scaled, 0.3).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn loss_is_nonnegative_on_random_batches() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let embeddings = random_rows(&mut rng, 12, 4);
            let (loss, _) = nt_xent_loss(&embeddings, 0.7).unwrap();
            assert!(loss >= 0.0, "negative loss {loss}");
        }
    }

    #[test]
    fn zero_embedding_is_rejected() {
        let embeddings = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
        assert!(matches!(
            nt_xent_loss(&embeddings, 1.0),
            Err(SslError::ZeroVector)
        ));
    }

    #[test]
    fn odd_count_is_rejected() {
        let embeddings = vec![vec![1.0], vec![2.0], vec![3.0]];
        assert!(matches!(
            nt_xent_loss(&embeddings, 1.0),
            Err(SslError::BadConfig(_))
        ));
    }

    #[test]
    fn nt_xent_gradient_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let embeddings = random_rows(&mut rng, 8, 5);
        let (_, grads) = nt_xent_loss(&embeddings, 0.4).unwrap();
        let flat: Vec<f64> = embeddings.iter().flatten().cloned().collect();
        let analytic: Vec<f64> = grads.iter().flatten().cloned().collect();
        let f = |theta: &[f64]| {
            let rows: Vec<Vec<f64>> = theta.chunks(5).map(|c| c.to_vec()).collect();
            nt_xent_loss(&rows, 0.4).unwrap().0
        };
        let err = grad_check(f, &flat, &analytic, 1e-5).unwrap();
        assert!(err < 1e-4, "max relative error {err}");
    }

    fn random_batch(rng: &mut impl Rng, n: usize, h_dim: usize, z_dim: usize) -> TfcEmbeddingBatch {
        TfcEmbeddingBatch {
            h_time: random_rows(rng, n, h_dim),
            h_time_aug: random_rows(rng, n, h_dim),
            h_freq: random_rows(rng, n, h_dim),
            h_freq_aug: random_rows(rng, n, h_dim),
            z_time: random_rows(rng, n, z_dim),
            z_time_aug: random_rows(rng, n, z_dim),
            z_freq: random_rows(rng, n, z_dim),
            z_freq_aug: random_rows(rng, n, z_dim),
        }
    }

    #[test]
    fn lambda_one_reduces_to_branch_sum() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let batch = random_batch(&mut rng, 4, 5, 6);
        let (l, _) =
            tfc_loss_from_embeddings(&batch, 0.5, 1.0, 1.0, DistanceMetric::Cosine).unwrap();
        assert_eq!(l.total, l.time + l.freq);
    }

    #[test]
    fn lambda_zero_with_equal_cross_distances_gives_three_delta() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let mut batch = random_batch(&mut rng, 3, 5, 6);
        // All four projected views identical per window -> every S equal.
        batch.z_time_aug = batch.z_time.clone();
        batch.z_freq = batch.z_time.clone();
        batch.z_freq_aug = batch.z_time.clone();
        let delta = 1.25;
        let (l, _) =
            tfc_loss_from_embeddings(&batch, 0.5, delta, 0.0, DistanceMetric::Euclidean).unwrap();
        assert_eq!(l.total, 3.0 * delta);
        assert_eq!(l.consistency, 3.0 * delta);
    }

    #[test]
    fn total_is_continuous_in_lambda() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
        let batch = random_batch(&mut rng, 5, 4, 4);
        for lambda in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let (l, _) =
                tfc_loss_from_embeddings(&batch, 0.6, 1.0, lambda, DistanceMetric::Cosine)
                    .unwrap();
            let recomposed = lambda * (l.time + l.freq) + (1.0 - lambda) * l.consistency;
            assert!((l.total - recomposed).abs() < 1e-12);
        }
    }

    #[test]
    fn tfc_gradients_match_finite_differences() {
        for metric in [DistanceMetric::Cosine, DistanceMetric::Euclidean] {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
            let n = 3;
            let (h_dim, z_dim) = (4, 5);
            let batch = random_batch(&mut rng, n, h_dim, z_dim);
            let (_, grads) =
                tfc_loss_from_embeddings(&batch, 0.5, 1.0, 0.4, metric).unwrap();

            let pack = |b: &TfcEmbeddingBatch| -> Vec<f64> {
                [
                    &b.h_time, &b.h_time_aug, &b.h_freq, &b.h_freq_aug, &b.z_time,
                    &b.z_time_aug, &b.z_freq, &b.z_freq_aug,
                ]
                .iter()
                .flat_map(|g| g.iter().flatten().cloned())
                .collect()
            };
            let analytic: Vec<f64> = [
                &grads.h_time,
                &grads.h_time_aug,
                &grads.h_freq,
                &grads.h_freq_aug,
                &grads.z_time,
                &grads.z_time_aug,
                &grads.z_freq,
                &grads.z_freq_aug,
            ]
            .iter()
            .flat_map(|g| g.iter().flatten().cloned())
            .collect();

            let unpack = |theta: &[f64]| -> TfcEmbeddingBatch {
                let h_len = n * h_dim;
                let z_len = n * z_dim;
                let rows = |slice: &[f64], dim: usize| -> Vec<Vec<f64>> {
                    slice.chunks(dim).map(|c| c.to_vec()).collect()
                };
                let mut offset = 0;
                let mut take = |len: usize| {
                    let s = &theta[offset..offset + len];
                    offset += len;
                    s
                };
                TfcEmbeddingBatch {
                    h_time: rows(take(h_len), h_dim),
                    h_time_aug: rows(take(h_len), h_dim),
                    h_freq: rows(take(h_len), h_dim),
                    h_freq_aug: rows(take(h_len), h_dim),
                    z_time: rows(take(z_len), z_dim),
                    z_time_aug: rows(take(z_len), z_dim),
                    z_freq: rows(take(z_len), z_dim),
                    z_freq_aug: rows(take(z_len), z_dim),
                }
            };
            let f = |theta: &[f64]| {
                tfc_loss_from_embeddings(&unpack(theta), 0.5, 1.0, 0.4, metric)
                    .unwrap()
                    .0
                    .total
            };
            let err = grad_check(f, &pack(&batch), &analytic, 1e-6).unwrap();
            assert!(err < 1e-4, "{metric}: max relative error {err}");
        }
    }
}
