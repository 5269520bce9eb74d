//! Detection-based tracking: select temporally coherent tracks from capped
//! candidates by dynamic programming, extract several per class, smooth, and
//! prune the unreliable ones.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{BBox, Detection, DetectionStream};

#[derive(Debug, Error)]
pub enum TrackError {
    #[error("no detections of model {model} in video {video}")]
    NoCandidates { video: String, model: String },
    #[error("model {model} has no candidates in frame {frame} of video {video}; project forward first")]
    Gap {
        video: String,
        model: String,
        frame: usize,
    },
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("bad track file {path}: {message}")]
    Format { path: String, message: String },
}

/// Weights for the dynamic-programming track objective.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CoherenceParams {
    /// Weight of the flow-coherence term relative to detection score.
    pub lambda: f64,
    /// Per-frame mean score below which iterative extraction stops.
    pub min_track_score: f64,
}

impl Default for CoherenceParams {
    fn default() -> Self {
        CoherenceParams {
            lambda: 1.0,
            min_track_score: 0.5,
        }
    }
}

/// One detection per frame over a contiguous interval, for one object class.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub video: String,
    pub object_class: String,
    pub t0: usize,
    pub detections: Vec<Detection>,
    pub total_score: f64,
}

impl Track {
    pub fn t1(&self) -> usize {
        self.t0 + self.detections.len() - 1
    }

    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    /// Restrict the track to the frame interval [t0, t1], inclusive.
    pub fn slice(&self, t0: usize, t1: usize) -> Track {
        assert!(t0 >= self.t0 && t1 <= self.t1() && t0 <= t1);
        Track {
            video: self.video.clone(),
            object_class: self.object_class.clone(),
            t0,
            detections: self.detections[t0 - self.t0..=t1 - self.t0].to_vec(),
            total_score: self.total_score,
        }
    }

    pub fn scores(&self) -> Vec<f64> {
        self.detections.iter().map(|d| d.score).collect()
    }
}

/// Objective value of a candidate selection: sum of detection scores plus
/// lambda times the IoU between each flow-shifted box and its successor.
#[cfg(test)]
fn objective(selection: &[&Detection], lambda: f64) -> (f64, f64) {
    let score: f64 = selection.iter().map(|d| d.score).sum();
    let mut coherence = 0.0;
    for w in selection.windows(2) {
        coherence += shifted_iou(w[0], w[1]);
    }
    (score + lambda * coherence, coherence)
}

fn shifted_iou(from: &Detection, to: &Detection) -> f64 {
    let (fx, fy) = from.flow.unwrap_or((0.0, 0.0));
    from.bbox.translated(fx, fy).iou(&to.bbox)
}

/// Candidates of one model per frame over the model's span, as indices into
/// the stream. Fails on interior frames with no candidates.
fn candidate_span(
    stream: &DetectionStream,
    model: &str,
) -> Result<(usize, Vec<Vec<usize>>), TrackError> {
    let frames_with: Vec<usize> = (0..stream.frame_count)
        .filter(|&f| stream.per_frame[f].iter().any(|d| d.model == model))
        .collect();
    let (&t0, &t1) = match (frames_with.first(), frames_with.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(TrackError::NoCandidates {
                video: stream.video.clone(),
                model: model.to_string(),
            })
        }
    };
    let mut candidates = Vec::with_capacity(t1 - t0 + 1);
    for f in t0..=t1 {
        let idxs: Vec<usize> = stream.per_frame[f]
            .iter()
            .enumerate()
            .filter(|(_, d)| d.model == model)
            .map(|(i, _)| i)
            .collect();
        if idxs.is_empty() {
            return Err(TrackError::Gap {
                video: stream.video.clone(),
                model: model.to_string(),
                frame: f,
            });
        }
        candidates.push(idxs);
    }
    Ok((t0, candidates))
}

fn viterbi(cands: &[Vec<&Detection>], lambda: f64) -> (Vec<usize>, f64) {
    let frames = cands.len();
    let mut dp: Vec<Vec<f64>> = Vec::with_capacity(frames);
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(frames);
    dp.push(cands[0].iter().map(|d| d.score).collect());
    back.push(vec![0; cands[0].len()]);
    for t in 1..frames {
        let prev = &dp[t - 1];
        let mut row = Vec::with_capacity(cands[t].len());
        let mut arg = Vec::with_capacity(cands[t].len());
        for d in &cands[t] {
            let mut best = f64::NEG_INFINITY;
            let mut best_i = 0;
            for (i, p) in cands[t - 1].iter().enumerate() {
                let v = prev[i] + lambda * shifted_iou(p, d);
                if v > best {
                    best = v;
                    best_i = i;
                }
            }
            row.push(best + d.score);
            arg.push(best_i);
        }
        dp.push(row);
        back.push(arg);
    }
    let last = &dp[frames - 1];
    let (mut j, mut best) = (0, f64::NEG_INFINITY);
    for (i, &v) in last.iter().enumerate() {
        if v > best {
            best = v;
            j = i;
        }
    }
    let mut selection = vec![0; frames];
    selection[frames - 1] = j;
    for t in (1..frames).rev() {
        j = back[t][selection[t]];
        selection[t - 1] = j;
    }
    (selection, best)
}

/// Select the single best track of `model` by the Viterbi recurrence over
/// the model's candidate span.
pub fn best_track(
    stream: &DetectionStream,
    model: &str,
    params: &CoherenceParams,
) -> Result<Track, TrackError> {
    let (t0, index_span) = candidate_span(stream, model)?;
    let cands: Vec<Vec<&Detection>> = index_span
        .iter()
        .enumerate()
        .map(|(off, idxs)| {
            idxs.iter()
                .map(|&i| &stream.per_frame[t0 + off][i])
                .collect()
        })
        .collect();
    let (selection, total) = viterbi(&cands, params.lambda);
    let detections: Vec<Detection> = selection
        .iter()
        .enumerate()
        .map(|(off, &j)| cands[off][j].clone())
        .collect();
    Ok(Track {
        video: stream.video.clone(),
        object_class: model.to_string(),
        t0,
        detections,
        total_score: total,
    })
}

/// Repeatedly extract the best remaining track of `model`, removing its
/// detections from the candidate pool. The first track is always returned;
/// extraction stops once a new track's per-frame mean score falls below
/// `min_track_score` or the pool can no longer span the model's frames.
pub fn extract_tracks(
    stream: &DetectionStream,
    model: &str,
    params: &CoherenceParams,
) -> Result<Vec<Track>, TrackError> {
    let mut pool = stream.clone();
    let mut tracks = Vec::new();
    loop {
        let track = match best_track(&pool, model, params) {
            Ok(t) => t,
            Err(e) => {
                if tracks.is_empty() {
                    return Err(e);
                }
                break;
            }
        };
        let accept =
            tracks.is_empty() || track.total_score / track.len() as f64 >= params.min_track_score;
        if !accept {
            break;
        }
        for (off, det) in track.detections.iter().enumerate() {
            let frame = track.t0 + off;
            let pos = pool.per_frame[frame]
                .iter()
                .position(|d| d == det)
                .expect("selected detection present in pool");
            pool.per_frame[frame].remove(pos);
        }
        tracks.push(track);
    }
    Ok(tracks)
}

/// Replace each box coordinate by a centered moving average, truncated at
/// the track ends. Scores, parts, and discrete fields are untouched.
pub fn smooth_track(track: &Track, window: usize) -> Track {
    let n = track.len();
    let mut w = window.min(n);
    if w % 2 == 0 {
        w = w.saturating_sub(1).max(1);
    }
    let half = w / 2;
    let mut out = track.clone();
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(n - 1);
        let count = (hi - lo + 1) as f64;
        let mut acc = [0.0; 4];
        for d in &track.detections[lo..=hi] {
            acc[0] += d.bbox.x1;
            acc[1] += d.bbox.y1;
            acc[2] += d.bbox.x2;
            acc[3] += d.bbox.y2;
        }
        out.detections[i].bbox = BBox::new(
            acc[0] / count,
            acc[1] / count,
            acc[2] / count,
            acc[3] / count,
        );
    }
    out
}

fn variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if n == 0.0 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

const MODALITY_GRID: usize = 50;

/// Gaussian-kernel density of the scores on a uniform grid over their range.
fn smoothed_score_grid(scores: &[f64], bandwidth: Option<f64>) -> Vec<f64> {
    let lo = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if range <= 0.0 {
        return vec![1.0; 1];
    }
    let h = bandwidth.unwrap_or(0.1 * range).max(1e-12);
    (0..MODALITY_GRID)
        .map(|i| {
            let x = lo + range * i as f64 / (MODALITY_GRID - 1) as f64;
            scores
                .iter()
                .map(|s| {
                    let z = (x - s) / h;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
        })
        .collect()
}

fn count_local_maxima(grid: &[f64]) -> usize {
    let n = grid.len();
    if n == 1 {
        return 1;
    }
    let mut count = 0;
    for i in 0..n {
        let left_ok = i == 0 || grid[i] > grid[i - 1];
        let right_ok = i == n - 1 || grid[i] > grid[i + 1];
        if left_ok && right_ok {
            count += 1;
        }
    }
    count
}

/// Discard tracks with detection-score variance above `var_threshold` or
/// whose kernel-smoothed score histogram has three or more modes (neither
/// unimodal nor bimodal). `modality_bandwidth` defaults to 0.1 times the
/// track's score range.
pub fn prune_tracks(
    tracks: Vec<Track>,
    var_threshold: f64,
    modality_bandwidth: Option<f64>,
) -> Vec<Track> {
    tracks
        .into_iter()
        .filter(|t| {
            let scores = t.scores();
            if variance(&scores) > var_threshold {
                return false;
            }
            let grid = smoothed_score_grid(&scores, modality_bandwidth);
            count_local_maxima(&grid) < 3
        })
        .collect()
}

/// Wire format for a single track file.
#[derive(Serialize, Deserialize)]
struct TrackFile {
    video: String,
    #[serde(rename = "objectClass")]
    object_class: String,
    t0: usize,
    t1: usize,
    boxes: Vec<[f64; 4]>,
    scores: Vec<f64>,
    parts: Vec<Vec<(f64, f64)>>,
    #[serde(rename = "rootFilters")]
    root_filters: Vec<usize>,
    #[serde(rename = "totalScore")]
    total_score: f64,
}

impl Track {
    pub fn to_json(&self) -> String {
        let file = TrackFile {
            video: self.video.clone(),
            object_class: self.object_class.clone(),
            t0: self.t0,
            t1: self.t1(),
            boxes: self
                .detections
                .iter()
                .map(|d| [d.bbox.x1, d.bbox.y1, d.bbox.x2, d.bbox.y2])
                .collect(),
            scores: self.scores(),
            parts: self.detections.iter().map(|d| d.parts.clone()).collect(),
            root_filters: self.detections.iter().map(|d| d.root_filter).collect(),
            total_score: self.total_score,
        };
        serde_json::to_string(&file).expect("track serialization")
    }

    pub fn from_json(text: &str, path: &str) -> Result<Track, TrackError> {
        let file: TrackFile = serde_json::from_str(text).map_err(|e| TrackError::Format {
            path: path.to_string(),
            message: e.to_string(),
        })?;
        let n = file.t1 + 1 - file.t0;
        if file.boxes.len() != n || file.scores.len() != n {
            return Err(TrackError::Format {
                path: path.to_string(),
                message: format!(
                    "expected {n} frames, got {} boxes / {} scores",
                    file.boxes.len(),
                    file.scores.len()
                ),
            });
        }
        let detections = (0..n)
            .map(|i| Detection {
                frame: file.t0 + i,
                model: file.object_class.clone(),
                score: file.scores[i],
                bbox: BBox::new(
                    file.boxes[i][0],
                    file.boxes[i][1],
                    file.boxes[i][2],
                    file.boxes[i][3],
                ),
                parts: file.parts.get(i).cloned().unwrap_or_default(),
                root_filter: file.root_filters.get(i).copied().unwrap_or(0),
                flow: None,
                hsv: None,
                projected: false,
            })
            .collect();
        Ok(Track {
            video: file.video,
            object_class: file.object_class,
            t0: file.t0,
            detections,
            total_score: file.total_score,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TrackError> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|source| TrackError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Track, TrackError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| TrackError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Track::from_json(&text, &path.display().to_string())
    }
}
