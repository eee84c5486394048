//! Dimensionality reduction from encoder embeddings to the low-dimensional
//! vectors that go into prompts: exact t-SNE (the faithful path) and PCA
//! (the deterministic fast path).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

use crate::numeric::symmetric_eigen;

#[derive(Debug, thiserror::Error)]
pub enum ProjectionError {
    /// Exact t-SNE needs clearly more points than the perplexity says a
    /// neighborhood holds; the conventional floor is count > 3 * perplexity.
    #[error("perplexity {perplexity} too large for {count} points (need count > 3 * perplexity)")]
    PerplexityTooLarge { perplexity: f64, count: usize },
    #[error("all input points are identical; no structure to project")]
    DegenerateInput,
    #[error("projection needs at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("cannot project {input_dim}-dimensional points to dimension {requested}")]
    InvalidDimension { requested: usize, input_dim: usize },
    #[error("input embeddings must share one dimension")]
    MixedDimensions,
    #[error("input embeddings must be finite")]
    NonFiniteInput,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("record format: {0}")]
    RecordFormat(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionMethod {
    Tsne,
    Pca,
}

impl std::fmt::Display for ProjectionMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProjectionMethod::Tsne => write!(f, "tsne"),
            ProjectionMethod::Pca => write!(f, "pca"),
        }
    }
}

impl std::str::FromStr for ProjectionMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tsne" | "t-sne" => Ok(ProjectionMethod::Tsne),
            "pca" => Ok(ProjectionMethod::Pca),
            other => Err(format!("unknown projection method {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionDiagnostics {
    /// Final KL divergence plus the trace sampled every 50 iterations.
    Tsne {
        kl_divergence: f64,
        kl_trace: Vec<(usize, f64)>,
    },
    /// Variance captured by each retained component, descending.
    Pca {
        explained_variance: Vec<f64>,
        total_variance: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectionResult {
    pub method: ProjectionMethod,
    pub dim: usize,
    /// One low-dimensional point per input embedding, index-aligned.
    pub points: Vec<Vec<f64>>,
    pub seed: u64,
    pub diagnostics: ProjectionDiagnostics,
}

/// One projected embedding as persisted between pipeline stages. Train
/// records carry their label so the prompt stage can pick class examples;
/// test labels travel separately as the ground-truth manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedPoint {
    pub id: String,
    pub split: SplitTag,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub label: Option<String>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Test,
}

pub fn write_projected_points<W: Write>(
    mut out: W,
    points: &[ProjectedPoint],
) -> Result<(), ProjectionError> {
    for p in points {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_projected_points(path: &std::path::Path) -> Result<Vec<ProjectedPoint>, ProjectionError> {
    let file = std::fs::File::open(path)?;
    let mut points = Vec::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        points.push(serde_json::from_str(&line)?);
    }
    Ok(points)
}

fn validate_embeddings(embeddings: &[Vec<f64>]) -> Result<usize, ProjectionError> {
    let dim = embeddings.first().map_or(0, Vec::len);
    if embeddings.iter().any(|e| e.len() != dim) {
        return Err(ProjectionError::MixedDimensions);
    }
    if embeddings.iter().flatten().any(|v| !v.is_finite()) {
        return Err(ProjectionError::NonFiniteInput);
    }
    if embeddings.iter().all(|e| e == &embeddings[0]) && embeddings.len() > 1 {
        return Err(ProjectionError::DegenerateInput);
    }
    Ok(dim)
}

const EARLY_EXAGGERATION: f64 = 12.0;
const EXAGGERATION_ITERS: usize = 250;
const INITIAL_MOMENTUM: f64 = 0.5;
const FINAL_MOMENTUM: f64 = 0.8;
const LEARNING_RATE: f64 = 200.0;
const MIN_GAIN: f64 = 0.01;
const PROB_FLOOR: f64 = 1e-12;
const KL_SAMPLE_EVERY: usize = 50;

/// Squared euclidean distances between all rows.
fn pairwise_sq_dists(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let s: f64 = rows[i]
                .iter()
                .zip(&rows[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d[i][j] = s;
            d[j][i] = s;
        }
    }
    d
}

/// Conditional distribution row and its Shannon entropy (nats) at the given
/// precision beta = 1 / (2 sigma^2). The row excludes index `i`.
fn conditional_row(dists: &[f64], i: usize, beta: f64) -> (Vec<f64>, f64) {
    let shift = dists
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &d)| d)
        .fold(f64::INFINITY, f64::min);
    let mut row = vec![0.0; dists.len()];
    let mut sum = 0.0;
    let mut weighted = 0.0;
    for (j, &d) in dists.iter().enumerate() {
        if j == i {
            continue;
        }
        let w = (-beta * (d - shift)).exp();
        row[j] = w;
        sum += w;
        weighted += d * w;
    }
    // H = ln sum(exp(-beta d)) + beta * E[d]; undo the stabilizing shift.
    let entropy = sum.ln() - beta * shift + beta * weighted / sum;
    for w in &mut row {
        *w /= sum;
    }
    (row, entropy)
}

/// Binary search each point's precision so the conditional distribution has
/// entropy ln(perplexity), then symmetrize to the joint affinities p_ij.
fn joint_affinities(dists: &[Vec<f64>], perplexity: f64) -> Vec<Vec<f64>> {
    let n = dists.len();
    let target = perplexity.ln();
    let mut cond = vec![vec![0.0; n]; n];
    for i in 0..n {
        let mut beta = 1.0;
        let mut beta_min = f64::NEG_INFINITY;
        let mut beta_max = f64::INFINITY;
        let mut row = Vec::new();
        for _ in 0..50 {
            let (r, entropy) = conditional_row(&dists[i], i, beta);
            row = r;
            let diff = entropy - target;
            if diff.abs() < 1e-5 {
                break;
            }
            if diff > 0.0 {
                beta_min = beta;
                beta = if beta_max.is_infinite() {
                    beta * 2.0
                } else {
                    (beta + beta_max) / 2.0
                };
            } else {
                beta_max = beta;
                beta = if beta_min.is_infinite() {
                    beta / 2.0
                } else {
                    (beta + beta_min) / 2.0
                };
            }
        }
        cond[i] = row;
    }
    let mut joint = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            joint[i][j] = ((cond[i][j] + cond[j][i]) / (2.0 * n as f64)).max(PROB_FLOOR);
        }
    }
    joint
}

/// Student-t affinities in the embedding space: unnormalized kernel matrix
/// and its total, of which q_ij = num_ij / total.
fn student_t_kernel(y: &[Vec<f64>]) -> (Vec<Vec<f64>>, f64) {
    let n = y.len();
    let mut num = vec![vec![0.0; n]; n];
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let s: f64 = y[i]
                .iter()
                .zip(&y[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let k = 1.0 / (1.0 + s);
            num[i][j] = k;
            num[j][i] = k;
            total += 2.0 * k;
        }
    }
    (num, total)
}

fn kl_divergence(p: &[Vec<f64>], num: &[Vec<f64>], total: f64) -> f64 {
    let n = p.len();
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let q = (num[i][j] / total).max(PROB_FLOOR);
            kl += p[i][j] * (p[i][j] / q).ln();
        }
    }
    kl
}

/// Canonical processing order: indices sorted by coordinate lexicographic
/// order (stable). Running the optimizer in this order makes the whole fit,
/// including floating-point summation order, independent of how the caller
/// arranged the input.
fn canonical_order(embeddings: &[Vec<f64>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..embeddings.len()).collect();
    order.sort_by(|&a, &b| {
        embeddings[a]
            .partial_cmp(&embeddings[b])
            .expect("finite values compare")
    });
    order
}

/// Exact t-SNE with standard early exaggeration, momentum switching, and
/// adaptive per-coordinate gains. Deterministic given the seed; permuting
/// the input rows permutes the output rows bit-identically.
pub fn tsne_fit(
    embeddings: &[Vec<f64>],
    u: usize,
    perplexity: f64,
    iterations: usize,
    seed: u64,
) -> Result<ProjectionResult, ProjectionError> {
    let n = embeddings.len();
    let dim = validate_embeddings(embeddings)?;
    if n < 4 {
        return Err(ProjectionError::TooFewPoints { needed: 4, got: n });
    }
    if u < 2 || u >= dim {
        return Err(ProjectionError::InvalidDimension {
            requested: u,
            input_dim: dim,
        });
    }
    if !(perplexity > 0.0) || n as f64 <= 3.0 * perplexity {
        return Err(ProjectionError::PerplexityTooLarge {
            perplexity,
            count: n,
        });
    }

    let order = canonical_order(embeddings);
    let canon: Vec<Vec<f64>> = order.iter().map(|&i| embeddings[i].clone()).collect();

    let dists = pairwise_sq_dists(&canon);
    let p = joint_affinities(&dists, perplexity);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..u)
                .map(|_| 1e-4 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
                .collect()
        })
        .collect();
    let mut velocity = vec![vec![0.0_f64; u]; n];
    let mut gains = vec![vec![1.0_f64; u]; n];
    let mut kl_trace = Vec::new();

    for iter in 0..iterations {
        let exaggeration = if iter < EXAGGERATION_ITERS {
            EARLY_EXAGGERATION
        } else {
            1.0
        };
        let momentum = if iter < EXAGGERATION_ITERS {
            INITIAL_MOMENTUM
        } else {
            FINAL_MOMENTUM
        };

        let (num, total) = student_t_kernel(&y);
        let mut grad = vec![vec![0.0; u]; n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let q = (num[i][j] / total).max(PROB_FLOOR);
                let mult = 4.0 * (exaggeration * p[i][j] - q) * num[i][j];
                for d in 0..u {
                    grad[i][d] += mult * (y[i][d] - y[j][d]);
                }
            }
        }
        for i in 0..n {
            for d in 0..u {
                let same_sign = (grad[i][d] > 0.0) == (velocity[i][d] > 0.0);
                gains[i][d] = if same_sign {
                    (gains[i][d] * 0.8).max(MIN_GAIN)
                } else {
                    gains[i][d] + 0.2
                };
                velocity[i][d] =
                    momentum * velocity[i][d] - LEARNING_RATE * gains[i][d] * grad[i][d];
                y[i][d] += velocity[i][d];
            }
        }
        // Recenter so the embedding does not drift.
        for d in 0..u {
            let mean: f64 = y.iter().map(|row| row[d]).sum::<f64>() / n as f64;
            for row in &mut y {
                row[d] -= mean;
            }
        }
        let step = iter + 1;
        if step % KL_SAMPLE_EVERY == 0 || step == iterations {
            let (num, total) = student_t_kernel(&y);
            let kl = kl_divergence(&p, &num, total);
            if kl_trace.last().map(|&(s, _)| s) != Some(step) {
                kl_trace.push((step, kl));
            }
        }
    }

    let kl_final = kl_trace.last().map_or(0.0, |&(_, kl)| kl);
    let mut points = vec![Vec::new(); n];
    for (canon_pos, &orig) in order.iter().enumerate() {
        points[orig] = y[canon_pos].clone();
    }
    Ok(ProjectionResult {
        method: ProjectionMethod::Tsne,
        dim: u,
        points,
        seed,
        diagnostics: ProjectionDiagnostics::Tsne {
            kl_divergence: kl_final,
            kl_trace,
        },
    })
}

/// Mean-centered projection onto the top-u principal directions, components
/// ordered by decreasing variance. Deterministic (no randomness involved).
pub fn pca_fit_transform(
    embeddings: &[Vec<f64>],
    u: usize,
) -> Result<ProjectionResult, ProjectionError> {
    let n = embeddings.len();
    let dim = validate_embeddings(embeddings)?;
    if n < 2 {
        return Err(ProjectionError::TooFewPoints { needed: 2, got: n });
    }
    if u == 0 || u > dim {
        return Err(ProjectionError::InvalidDimension {
            requested: u,
            input_dim: dim,
        });
    }

    let mean: Vec<f64> = (0..dim)
        .map(|d| embeddings.iter().map(|e| e[d]).sum::<f64>() / n as f64)
        .collect();
    let centered: Vec<Vec<f64>> = embeddings
        .iter()
        .map(|e| e.iter().zip(&mean).map(|(v, m)| v - m).collect())
        .collect();
    let mut cov = vec![vec![0.0; dim]; dim];
    for row in &centered {
        for a in 0..dim {
            for b in a..dim {
                cov[a][b] += row[a] * row[b];
            }
        }
    }
    let denom = (n - 1) as f64;
    for a in 0..dim {
        for b in a..dim {
            cov[a][b] /= denom;
            cov[b][a] = cov[a][b];
        }
    }

    let (values, vectors) = symmetric_eigen(&cov);
    let total_variance: f64 = values.iter().sum();
    let explained: Vec<f64> = values.iter().take(u).copied().collect();
    let points: Vec<Vec<f64>> = centered
        .iter()
        .map(|row| {
            vectors
                .iter()
                .take(u)
                .map(|axis| row.iter().zip(axis).map(|(r, a)| r * a).sum())
                .collect()
        })
        .collect();

    Ok(ProjectionResult {
        method: ProjectionMethod::Pca,
        dim: u,
        points,
        seed: 0,
        diagnostics: ProjectionDiagnostics::Pca {
            explained_variance: explained,
            total_variance,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn blob(
        rng: &mut ChaCha8Rng,
        center: &[f64],
        spread: f64,
        count: usize,
    ) -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| {
                center
                    .iter()
                    .map(|&c| {
                        c + spread
                            * <StandardNormal as Distribution<f64>>::sample(
                                &StandardNormal,
                                rng,
                            )
                    })
                    .collect()
            })
            .collect()
    }

    fn two_blobs(dim: usize, per_blob: usize, gap: f64, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c1 = vec![0.0; dim];
        let c2 = vec![gap / (dim as f64).sqrt(); dim];
        let mut pts = blob(&mut rng, &c1, 1.0, per_blob);
        pts.extend(blob(&mut rng, &c2, 1.0, per_blob));
        pts
    }

    #[test]
    fn tsne_output_shape_and_determinism() {
        let pts = two_blobs(10, 10, 20.0, 3);
        let a = tsne_fit(&pts, 2, 5.0, 120, 7).unwrap();
        let b = tsne_fit(&pts, 2, 5.0, 120, 7).unwrap();
        assert_eq!(a.points.len(), 20);
        assert!(a.points.iter().all(|p| p.len() == 2));
        assert_eq!(a.points, b.points);
        let c = tsne_fit(&pts, 2, 5.0, 120, 8).unwrap();
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn tsne_rejects_bad_inputs() {
        let pts = two_blobs(5, 10, 10.0, 1);
        assert!(matches!(
            tsne_fit(&pts, 2, 10.0, 50, 0),
            Err(ProjectionError::PerplexityTooLarge { .. })
        ));
        assert!(matches!(
            tsne_fit(&pts, 1, 2.0, 50, 0),
            Err(ProjectionError::InvalidDimension { .. })
        ));
        assert!(matches!(
            tsne_fit(&pts, 5, 2.0, 50, 0),
            Err(ProjectionError::InvalidDimension { .. })
        ));
        let same = vec![vec![1.0, 2.0, 3.0]; 12];
        assert!(matches!(
            tsne_fit(&same, 2, 2.0, 50, 0),
            Err(ProjectionError::DegenerateInput)
        ));
    }

    /// Well-separated blobs in 96-D stay separated in the 2-D output:
    /// leave-one-out 1-NN on the projected points recovers the blob of
    /// nearly every point.
    #[test]
    fn tsne_separates_distant_gaussian_blobs() {
        let pts = two_blobs(96, 50, 40.0, 11);
        let result = tsne_fit(&pts, 2, 10.0, 500, 5).unwrap();
        let labels: Vec<usize> = (0..100).map(|i| i / 50).collect();
        let mut correct = 0;
        for i in 0..100 {
            let mut best = (f64::INFINITY, 0);
            for j in 0..100 {
                if i == j {
                    continue;
                }
                let d: f64 = result.points[i]
                    .iter()
                    .zip(&result.points[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                if d < best.0 {
                    best = (d, j);
                }
            }
            if labels[best.1] == labels[i] {
                correct += 1;
            }
        }
        assert!(correct >= 95, "1-NN recovered only {correct}/100");
    }

    /// The KL divergence at the end of the run does not exceed the value at
    /// the start of the post-exaggeration phase.
    #[test]
    fn tsne_kl_improves_after_exaggeration() {
        let pts = two_blobs(10, 20, 12.0, 9);
        let result = tsne_fit(&pts, 2, 8.0, 600, 2).unwrap();
        let ProjectionDiagnostics::Tsne { kl_trace, kl_divergence } = &result.diagnostics
        else {
            panic!("tsne diagnostics expected");
        };
        assert!(kl_divergence.is_finite());
        let phase_start = kl_trace
            .iter()
            .find(|&&(step, _)| step >= EXAGGERATION_ITERS)
            .expect("trace covers the post-exaggeration phase");
        let end = kl_trace.last().unwrap();
        assert!(
            end.1 <= phase_start.1 + 1e-9,
            "KL rose from {} to {}",
            phase_start.1,
            end.1
        );
        assert!(kl_trace.iter().all(|&(_, kl)| kl.is_finite()));
    }

    #[test]
    fn tsne_permutation_equivariance() {
        let pts = two_blobs(6, 8, 8.0, 21);
        let base = tsne_fit(&pts, 2, 4.0, 80, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let mut perm: Vec<usize> = (0..pts.len()).collect();
        for i in (1..perm.len()).rev() {
            let j = rng.random_range(0..=i);
            perm.swap(i, j);
        }
        let shuffled: Vec<Vec<f64>> = perm.iter().map(|&i| pts[i].clone()).collect();
        let moved = tsne_fit(&shuffled, 2, 4.0, 80, 3).unwrap();
        for (new_pos, &old_pos) in perm.iter().enumerate() {
            assert_eq!(moved.points[new_pos], base.points[old_pos]);
        }
    }

    #[test]
    fn pca_line_in_3d_is_rank_one() {
        let pts: Vec<Vec<f64>> = (0..10)
            .map(|i| {
                let t = i as f64;
                vec![1.0 + 2.0 * t, -3.0 * t, 0.5 * t]
            })
            .collect();
        let result = pca_fit_transform(&pts, 2).unwrap();
        let ProjectionDiagnostics::Pca { explained_variance, total_variance } =
            &result.diagnostics
        else {
            panic!("pca diagnostics expected");
        };
        assert!((explained_variance[0] - total_variance).abs() < 1e-9 * total_variance);
        assert!(explained_variance[1].abs() < 1e-9 * total_variance);
    }

    #[test]
    fn pca_full_basis_reconstructs_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..4).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let result = pca_fit_transform(&pts, 4).unwrap();
        // Re-expand through the same eigenbasis and compare with the
        // centered data.
        let dim = 4;
        let n = pts.len();
        let mean: Vec<f64> = (0..dim)
            .map(|d| pts.iter().map(|e| e[d]).sum::<f64>() / n as f64)
            .collect();
        let mut cov = vec![vec![0.0; dim]; dim];
        for e in &pts {
            for a in 0..dim {
                for b in 0..dim {
                    cov[a][b] += (e[a] - mean[a]) * (e[b] - mean[b]) / (n - 1) as f64;
                }
            }
        }
        let (_, axes) = symmetric_eigen(&cov);
        for (e, proj) in pts.iter().zip(&result.points) {
            for d in 0..dim {
                let rebuilt: f64 = (0..dim).map(|k| proj[k] * axes[k][d]).sum();
                assert!((rebuilt - (e[d] - mean[d])).abs() < 1e-9);
            }
        }
    }

    /// Independent oracle: power iteration with deflation on the covariance
    /// matrix reproduces the explained variances.
    #[test]
    fn pca_matches_power_iteration_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let pts: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..10).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let result = pca_fit_transform(&pts, 4).unwrap();
        let ProjectionDiagnostics::Pca { explained_variance, .. } = &result.diagnostics
        else {
            panic!("pca diagnostics expected");
        };

        let dim = 10;
        let n = pts.len();
        let mean: Vec<f64> = (0..dim)
            .map(|d| pts.iter().map(|e| e[d]).sum::<f64>() / n as f64)
            .collect();
        let mut cov = vec![vec![0.0; dim]; dim];
        for e in &pts {
            for a in 0..dim {
                for b in 0..dim {
                    cov[a][b] += (e[a] - mean[a]) * (e[b] - mean[b]) / (n - 1) as f64;
                }
            }
        }
        let mut deflated = cov;
        for expected in explained_variance.iter().take(4) {
            // Power iteration on the deflated matrix.
            let mut v = vec![1.0; dim];
            let mut value = 0.0;
            for _ in 0..10_000 {
                let mut next = vec![0.0; dim];
                for a in 0..dim {
                    for b in 0..dim {
                        next[a] += deflated[a][b] * v[b];
                    }
                }
                let norm: f64 = next.iter().map(|x| x * x).sum::<f64>().sqrt();
                for x in &mut next {
                    *x /= norm;
                }
                value = norm;
                v = next;
            }
            assert!(
                (expected - value).abs() < 1e-8 * value.max(1.0),
                "component variance {expected} vs oracle {value}"
            );
            for a in 0..dim {
                for b in 0..dim {
                    deflated[a][b] -= value * v[a] * v[b];
                }
            }
        }
    }

    #[test]
    fn pca_translation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let pts: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let shifted: Vec<Vec<f64>> = pts
            .iter()
            .map(|e| e.iter().enumerate().map(|(d, v)| v + (d as f64 + 7.0)).collect())
            .collect();
        let a = pca_fit_transform(&pts, 3).unwrap();
        let b = pca_fit_transform(&shifted, 3).unwrap();
        for (pa, pb) in a.points.iter().zip(&b.points) {
            for (va, vb) in pa.iter().zip(pb) {
                assert!((va - vb).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn pca_rejects_degenerate_and_tiny_inputs() {
        let same = vec![vec![4.0, 4.0]; 5];
        assert!(matches!(
            pca_fit_transform(&same, 1),
            Err(ProjectionError::DegenerateInput)
        ));
        assert!(matches!(
            pca_fit_transform(&[vec![1.0, 2.0]], 1),
            Err(ProjectionError::TooFewPoints { .. })
        ));
        let pts = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert!(matches!(
            pca_fit_transform(&pts, 3),
            Err(ProjectionError::InvalidDimension { .. })
        ));
    }

    #[test]
    fn projected_point_records_round_trip() {
        let points = vec![
            ProjectedPoint {
                id: "w-0".into(),
                split: SplitTag::Train,
                label: Some("Walking".into()),
                values: vec![0.5, -1.25],
            },
            ProjectedPoint {
                id: "w-1".into(),
                split: SplitTag::Test,
                label: None,
                values: vec![2.0, 3.5],
            },
        ];
        let mut buf = Vec::new();
        write_projected_points(&mut buf, &points).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("points.jsonl");
        std::fs::write(&path, &buf).unwrap();
        let back = read_projected_points(&path).unwrap();
        assert_eq!(back, points);
        let text = String::from_utf8(buf).unwrap();
        assert!(!text.lines().next().unwrap().contains("null"));
    }
}
