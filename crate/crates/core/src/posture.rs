//! Body-posture vector quantization: normalized part-displacement vectors
//! clustered into a codebook by hierarchical bisecting k-means.

use std::fs;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Detection;

#[derive(Debug, Error)]
pub enum PostureError {
    #[error("detection has no parts; not a person model")]
    NotAPerson,
    #[error("need at least {k} vectors to train a {k}-entry codebook, got {n}")]
    InsufficientData { k: usize, n: usize },
    #[error("displacement vectors have mixed dimensions ({a} vs {b})")]
    MixedDimensions { a: usize, b: usize },
    #[error("vector has dimension {got}, codebook expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("bad codebook file {path}: {message}")]
    Format { path: String, message: String },
}

/// Vector-quantization dictionary over part-displacement vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostureCodebook {
    pub k: usize,
    #[serde(rename = "partCount")]
    pub part_count: usize,
    pub means: Vec<Vec<f64>>,
    pub seed: u64,
}

impl PostureCodebook {
    pub fn dim(&self) -> usize {
        2 * self.part_count
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PostureError> {
        let path = path.as_ref();
        let text = serde_json::to_string(self).expect("codebook serialization");
        fs::write(path, text).map_err(|source| PostureError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PostureError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| PostureError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| PostureError::Format {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// Flatten a detection's part offsets into a single vector normalized to
/// unit box area, so jointly scaling box and parts leaves it unchanged.
pub fn part_displacements(det: &Detection) -> Result<Vec<f64>, PostureError> {
    if det.parts.is_empty() {
        return Err(PostureError::NotAPerson);
    }
    let scale = det.bbox.area().sqrt();
    let mut v = Vec::with_capacity(2 * det.parts.len());
    for &(dx, dy) in &det.parts {
        v.push(dx / scale);
        v.push(dy / scale);
    }
    Ok(v)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn centroid(vectors: &[Vec<f64>], members: &[usize]) -> Vec<f64> {
    let dim = vectors[members[0]].len();
    let mut c = vec![0.0; dim];
    for &i in members {
        for (acc, x) in c.iter_mut().zip(&vectors[i]) {
            *acc += x;
        }
    }
    for acc in &mut c {
        *acc /= members.len() as f64;
    }
    c
}

fn cluster_sse(vectors: &[Vec<f64>], members: &[usize], center: &[f64]) -> f64 {
    members.iter().map(|&i| sq_dist(&vectors[i], center)).sum()
}

/// One 2-means run over the member set; ensures both halves are nonempty.
fn two_means(
    vectors: &[Vec<f64>],
    members: &[usize],
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, Vec<usize>, f64) {
    let mut seeds = members.to_vec();
    seeds.shuffle(rng);
    let mut c0 = vectors[seeds[0]].clone();
    let mut c1 = vectors[seeds[1]].clone();
    let mut assign = vec![false; members.len()];
    for _ in 0..50 {
        let mut changed = false;
        for (slot, &i) in members.iter().enumerate() {
            let to_second = sq_dist(&vectors[i], &c1) < sq_dist(&vectors[i], &c0);
            if assign[slot] != to_second {
                assign[slot] = to_second;
                changed = true;
            }
        }
        let mut a: Vec<usize> = Vec::new();
        let mut b: Vec<usize> = Vec::new();
        for (slot, &i) in members.iter().enumerate() {
            if assign[slot] {
                b.push(i);
            } else {
                a.push(i);
            }
        }
        if a.is_empty() {
            a.push(b.pop().unwrap());
        } else if b.is_empty() {
            b.push(a.pop().unwrap());
        }
        c0 = centroid(vectors, &a);
        c1 = centroid(vectors, &b);
        if !changed {
            break;
        }
    }
    let mut a = Vec::new();
    let mut b = Vec::new();
    for &i in members {
        if sq_dist(&vectors[i], &c1) < sq_dist(&vectors[i], &c0) {
            b.push(i);
        } else {
            a.push(i);
        }
    }
    if a.is_empty() {
        a.push(b.pop().unwrap());
    } else if b.is_empty() {
        b.push(a.pop().unwrap());
    }
    let ca = centroid(vectors, &a);
    let cb = centroid(vectors, &b);
    let sse = cluster_sse(vectors, &a, &ca) + cluster_sse(vectors, &b, &cb);
    (a, b, sse)
}

const SPLIT_RESTARTS: usize = 5;

/// Bisecting k-means: repeatedly split the cluster with the largest
/// within-cluster sum of squared distances (best of five seeded 2-means
/// restarts) until `k` clusters exist.
pub fn train_codebook(
    vectors: &[Vec<f64>],
    k: usize,
    seed: u64,
) -> Result<PostureCodebook, PostureError> {
    if vectors.len() < k {
        return Err(PostureError::InsufficientData {
            k,
            n: vectors.len(),
        });
    }
    let dim = vectors[0].len();
    for v in vectors {
        if v.len() != dim {
            return Err(PostureError::MixedDimensions {
                a: dim,
                b: v.len(),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clusters: Vec<Vec<usize>> = vec![(0..vectors.len()).collect()];
    while clusters.len() < k {
        // Pick the splittable cluster with the largest SSE.
        let mut target = None;
        let mut worst = -1.0;
        for (ci, members) in clusters.iter().enumerate() {
            if members.len() < 2 {
                continue;
            }
            let c = centroid(vectors, members);
            let sse = cluster_sse(vectors, members, &c);
            if sse > worst {
                worst = sse;
                target = Some(ci);
            }
        }
        let target = target.expect("splittable cluster exists while clusters < k <= n");
        let members = clusters.swap_remove(target);
        let mut best: Option<(Vec<usize>, Vec<usize>, f64)> = None;
        for _ in 0..SPLIT_RESTARTS {
            let (a, b, sse) = two_means(vectors, &members, &mut rng);
            if best.as_ref().map_or(true, |(_, _, s)| sse < *s) {
                best = Some((a, b, sse));
            }
        }
        let (a, b, _) = best.unwrap();
        clusters.push(a);
        clusters.push(b);
    }
    let means = clusters.iter().map(|m| centroid(vectors, m)).collect();
    Ok(PostureCodebook {
        k,
        part_count: dim / 2,
        means,
        seed,
    })
}

/// Nearest codebook entry by Euclidean distance; ties resolve to the
/// smallest index.
pub fn codebook_index(cb: &PostureCodebook, v: &[f64]) -> Result<usize, PostureError> {
    if v.len() != cb.dim() {
        return Err(PostureError::DimensionMismatch {
            expected: cb.dim(),
            got: v.len(),
        });
    }
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, mean) in cb.means.iter().enumerate() {
        let d = sq_dist(mean, v);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    Ok(best)
}
