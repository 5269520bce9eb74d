//! Detection-stream parsing, score normalization, per-frame capping, and
//! flow-based forward projection.
//!
//! A detection stream file is UTF-8 JSON lines: a header record
//! `{"video": ..., "frameCount": ..., "fps": ...}` followed by one record per
//! frame carrying that frame's candidate detections.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },
    #[error("histogram has fewer than two nonzero bins; no bipartition exists")]
    NoBipartition,
    #[error("histogram has {bins} bins but {edges} edges (expected bins + 1)")]
    EdgeMismatch { bins: usize, edges: usize },
}

/// Axis-aligned box in image coordinates (y grows downward).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        BBox { x1, y1, x2, y2 }
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// width / height.
    pub fn aspect(&self) -> f64 {
        self.width() / self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x1 + self.x2), 0.5 * (self.y1 + self.y2))
    }

    pub fn translated(&self, dx: f64, dy: f64) -> BBox {
        BBox::new(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)
    }

    pub fn is_valid(&self) -> bool {
        self.x1 < self.x2 && self.y1 < self.y2
    }

    /// Intersection over union of two boxes, in [0, 1].
    pub fn iou(&self, other: &BBox) -> f64 {
        let ix = (self.x2.min(other.x2) - self.x1.max(other.x1)).max(0.0);
        let iy = (self.y2.min(other.y2) - self.y1.max(other.y1)).max(0.0);
        let inter = ix * iy;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

/// One scored candidate box in one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub frame: usize,
    pub model: String,
    pub score: f64,
    pub bbox: BBox,
    /// Part-center offsets (dx, dy) from the box center; empty for
    /// non-person models.
    pub parts: Vec<(f64, f64)>,
    pub root_filter: usize,
    /// Mean displacement (dx, dy) in pixels/frame within the box.
    pub flow: Option<(f64, f64)>,
    /// Precomputed mean HSV inside the eroded box, when the upstream
    /// detector supplies it.
    pub hsv: Option<(f64, f64, f64)>,
    /// True when synthesized by forward projection rather than detected.
    pub projected: bool,
}

/// All candidate detections of one video, indexed by frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionStream {
    pub video: String,
    pub frame_count: usize,
    pub fps: f64,
    pub per_frame: Vec<Vec<Detection>>,
}

impl DetectionStream {
    pub fn empty(video: impl Into<String>, frame_count: usize, fps: f64) -> Self {
        DetectionStream {
            video: video.into(),
            frame_count,
            fps,
            per_frame: vec![Vec::new(); frame_count],
        }
    }

    pub fn detection_count(&self) -> usize {
        self.per_frame.iter().map(Vec::len).sum()
    }

    /// Model names occurring anywhere in the stream, sorted and deduplicated.
    pub fn models(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .per_frame
            .iter()
            .flatten()
            .map(|d| d.model.clone())
            .collect();
        names.sort();
        names.dedup();
        names
    }
}

#[derive(Deserialize)]
struct HeaderRecord {
    video: String,
    #[serde(rename = "frameCount")]
    frame_count: usize,
    #[serde(default = "default_fps")]
    fps: f64,
}

fn default_fps() -> f64 {
    30.0
}

#[derive(Deserialize)]
struct FrameRecord {
    #[allow(dead_code)]
    video: Option<String>,
    frame: usize,
    detections: Vec<DetectionRecord>,
}

#[derive(Serialize, Deserialize)]
struct DetectionRecord {
    model: String,
    score: f64,
    #[serde(rename = "box")]
    bbox: [f64; 4],
    #[serde(default)]
    parts: Vec<(f64, f64)>,
    #[serde(rename = "rootFilter", default)]
    root_filter: usize,
    #[serde(default)]
    flow: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hsv: Option<(f64, f64, f64)>,
}

pub fn parse_detection_stream(path: impl AsRef<Path>) -> Result<DetectionStream, IngestError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_detection_stream_str(&text)
}

/// Parse the JSON-lines wire format from an in-memory string. Line numbers
/// in errors are 1-based.
pub fn parse_detection_stream_str(text: &str) -> Result<DetectionStream, IngestError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (line_no, header_line) = lines.next().ok_or(IngestError::Parse {
        line: 1,
        message: "empty file; expected header record".into(),
    })?;
    let header: HeaderRecord =
        serde_json::from_str(header_line).map_err(|e| IngestError::Parse {
            line: line_no + 1,
            message: format!("bad header record: {e}"),
        })?;
    if header.frame_count == 0 {
        return Err(IngestError::Validation {
            line: line_no + 1,
            message: "frameCount must be >= 1".into(),
        });
    }

    let mut stream = DetectionStream::empty(header.video, header.frame_count, header.fps);
    let mut seen = vec![false; header.frame_count];
    for (idx, line) in lines {
        let line_no = idx + 1;
        let record: FrameRecord = serde_json::from_str(line).map_err(|e| IngestError::Parse {
            line: line_no,
            message: format!("bad frame record: {e}"),
        })?;
        if record.frame >= header.frame_count {
            return Err(IngestError::Validation {
                line: line_no,
                message: format!(
                    "frame index {} out of range (frameCount {})",
                    record.frame, header.frame_count
                ),
            });
        }
        if seen[record.frame] {
            return Err(IngestError::Validation {
                line: line_no,
                message: format!("duplicate record for frame {}", record.frame),
            });
        }
        seen[record.frame] = true;
        let mut detections = Vec::with_capacity(record.detections.len());
        for d in record.detections {
            let bbox = BBox::new(d.bbox[0], d.bbox[1], d.bbox[2], d.bbox[3]);
            if !bbox.is_valid() {
                return Err(IngestError::Validation {
                    line: line_no,
                    message: format!(
                        "degenerate box [{}, {}, {}, {}]",
                        d.bbox[0], d.bbox[1], d.bbox[2], d.bbox[3]
                    ),
                });
            }
            if let Some((fx, fy)) = d.flow {
                if !fx.is_finite() || !fy.is_finite() {
                    return Err(IngestError::Validation {
                        line: line_no,
                        message: "non-finite flow vector".into(),
                    });
                }
            }
            detections.push(Detection {
                frame: record.frame,
                model: d.model,
                score: d.score,
                bbox,
                parts: d.parts,
                root_filter: d.root_filter,
                flow: d.flow,
                hsv: d.hsv,
                projected: false,
            });
        }
        stream.per_frame[record.frame] = detections;
    }
    Ok(stream)
}

/// Serialize a stream back to the JSON-lines wire format.
pub fn write_detection_stream(stream: &DetectionStream) -> String {
    let mut out = String::new();
    out.push_str(
        &serde_json::json!({
            "video": stream.video,
            "frameCount": stream.frame_count,
            "fps": stream.fps,
        })
        .to_string(),
    );
    out.push('\n');
    for (frame, dets) in stream.per_frame.iter().enumerate() {
        let records: Vec<DetectionRecord> = dets
            .iter()
            .map(|d| DetectionRecord {
                model: d.model.clone(),
                score: d.score,
                bbox: [d.bbox.x1, d.bbox.y1, d.bbox.x2, d.bbox.y2],
                parts: d.parts.clone(),
                root_filter: d.root_filter,
                flow: d.flow,
                hsv: d.hsv,
            })
            .collect();
        out.push_str(
            &serde_json::json!({
                "video": stream.video,
                "frame": frame,
                "detections": records,
            })
            .to_string(),
        );
        out.push('\n');
    }
    out
}

/// Find the bin boundary that best bipartitions a histogram, by maximizing
/// the between-class variance w0*w1*(mu0 - mu1)^2 over all interior
/// boundaries. Ties resolve to the smallest boundary. Bin values are taken
/// at bin centers.
pub fn otsu_bipartition(histogram: &[f64], bin_edges: &[f64]) -> Result<f64, IngestError> {
    let n = histogram.len();
    if bin_edges.len() != n + 1 {
        return Err(IngestError::EdgeMismatch {
            bins: n,
            edges: bin_edges.len(),
        });
    }
    let nonzero = histogram.iter().filter(|&&c| c > 0.0).count();
    if nonzero < 2 {
        return Err(IngestError::NoBipartition);
    }

    let centers: Vec<f64> = (0..n).map(|i| 0.5 * (bin_edges[i] + bin_edges[i + 1])).collect();
    let total: f64 = histogram.iter().sum();
    let total_mass: f64 = histogram
        .iter()
        .zip(&centers)
        .map(|(c, x)| c * x)
        .sum();

    let mut w0 = 0.0;
    let mut m0 = 0.0;
    let mut best = f64::NEG_INFINITY;
    let mut best_boundary = bin_edges[1];
    for i in 1..n {
        w0 += histogram[i - 1];
        m0 += histogram[i - 1] * centers[i - 1];
        let w1 = total - w0;
        if w0 <= 0.0 || w1 <= 0.0 {
            continue;
        }
        let mu0 = m0 / w0;
        let mu1 = (total_mass - m0) / w1;
        let sigma = (w0 / total) * (w1 / total) * (mu0 - mu1) * (mu0 - mu1);
        if sigma > best {
            best = sigma;
            best_boundary = bin_edges[i];
        }
    }
    Ok(best_boundary)
}

/// Outcome of a per-model score normalization pass.
#[derive(Debug, Clone, PartialEq)]
pub enum NormalizeStatus {
    /// Offset subtracted from every detection score of the model.
    Applied { offset: f64 },
    /// No detections of the model; the stream is returned untouched.
    ModelAbsent,
}

/// Histogram of the per-frame top score of `model`, over frames holding at
/// least one detection of the model: 50 equal bins spanning [min, max].
const SCORE_HIST_BINS: usize = 50;

fn top_score_histogram(stream: &DetectionStream, model: &str) -> Option<(Vec<f64>, Vec<f64>)> {
    let tops: Vec<f64> = stream
        .per_frame
        .iter()
        .filter_map(|dets| {
            dets.iter()
                .filter(|d| d.model == model)
                .map(|d| d.score)
                .fold(None, |acc: Option<f64>, s| {
                    Some(acc.map_or(s, |a| a.max(s)))
                })
        })
        .collect();
    if tops.is_empty() {
        return None;
    }
    let lo = tops.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = tops.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut hist = vec![0.0; SCORE_HIST_BINS];
    let width = (hi - lo) / SCORE_HIST_BINS as f64;
    for &s in &tops {
        let bin = if width > 0.0 {
            (((s - lo) / width) as usize).min(SCORE_HIST_BINS - 1)
        } else {
            0
        };
        hist[bin] += 1.0;
    }
    let edges: Vec<f64> = (0..=SCORE_HIST_BINS)
        .map(|i| lo + width * i as f64)
        .collect();
    Some((hist, edges))
}

/// Subtract a per-model offset from every score of `model`, making pooled
/// detections comparable across models. The offset is
/// min(Otsu bipartition of the per-frame top-score histogram,
/// trained_threshold + 0.4); when the histogram cannot be bipartitioned the
/// capped value alone is used.
pub fn normalize_scores(
    mut stream: DetectionStream,
    model: &str,
    trained_threshold: f64,
) -> (DetectionStream, NormalizeStatus) {
    let capped = trained_threshold + 0.4;
    let offset = match top_score_histogram(&stream, model) {
        None => return (stream, NormalizeStatus::ModelAbsent),
        Some((hist, edges)) => match otsu_bipartition(&hist, &edges) {
            Ok(otsu) => otsu.min(capped),
            Err(_) => capped,
        },
    };
    for dets in &mut stream.per_frame {
        for d in dets.iter_mut() {
            if d.model == model {
                d.score -= offset;
            }
        }
    }
    (stream, NormalizeStatus::Applied { offset })
}

/// Keep the `k` highest-scoring detections in each frame, ties resolved by
/// input order, which is preserved among survivors.
pub fn cap_per_frame(mut stream: DetectionStream, k: usize) -> DetectionStream {
    for dets in &mut stream.per_frame {
        if dets.len() <= k {
            continue;
        }
        let mut order: Vec<usize> = (0..dets.len()).collect();
        order.sort_by(|&a, &b| {
            dets[b]
                .score
                .partial_cmp(&dets[a].score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let mut keep = vec![false; dets.len()];
        for &i in order.iter().take(k) {
            keep[i] = true;
        }
        let mut idx = 0;
        dets.retain(|_| {
            let r = keep[idx];
            idx += 1;
            r
        });
    }
    stream
}

/// Augment the stream by copying each detection forward along its flow
/// vector for up to `horizon` frames (missing flow projects in place), then
/// re-apply the per-frame cap with original detections winning ties over
/// projected ones.
pub fn project_forward(mut stream: DetectionStream, horizon: usize, cap: usize) -> DetectionStream {
    let frame_count = stream.frame_count;
    let mut additions: Vec<Vec<Detection>> = vec![Vec::new(); frame_count];
    for dets in &stream.per_frame {
        for d in dets {
            if d.projected {
                continue;
            }
            let (fx, fy) = d.flow.unwrap_or((0.0, 0.0));
            for h in 1..=horizon {
                let target = d.frame + h;
                if target >= frame_count {
                    break;
                }
                let mut copy = d.clone();
                copy.frame = target;
                copy.bbox = d.bbox.translated(fx * h as f64, fy * h as f64);
                copy.projected = true;
                additions[target].push(copy);
            }
        }
    }
    for (frame, extra) in additions.into_iter().enumerate() {
        stream.per_frame[frame].extend(extra);
    }
    // Re-cap: score descending, originals before projected on ties, then
    // input order.
    for dets in &mut stream.per_frame {
        if dets.len() <= cap {
            continue;
        }
        let mut order: Vec<usize> = (0..dets.len()).collect();
        order.sort_by(|&a, &b| {
            dets[b]
                .score
                .partial_cmp(&dets[a].score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(dets[a].projected.cmp(&dets[b].projected))
                .then(a.cmp(&b))
        });
        let mut keep = vec![false; dets.len()];
        for &i in order.iter().take(cap) {
            keep[i] = true;
        }
        let mut idx = 0;
        dets.retain(|_| {
            let r = keep[idx];
            idx += 1;
            r
        });
    }
    stream
}

#[cfg(test)]
pub(crate) fn test_detection(frame: usize, model: &str, score: f64, bbox: BBox) -> Detection {
    Detection {
        frame,
        model: model.to_string(),
        score,
        bbox,
        parts: Vec::new(),
        root_filter: 0,
        flow: None,
        hsv: None,
        projected: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    /// Independent exhaustive scan over every interior boundary.
    fn otsu_oracle(hist: &[f64], edges: &[f64]) -> f64 {
        let n = hist.len();
        let centers: Vec<f64> = (0..n).map(|i| 0.5 * (edges[i] + edges[i + 1])).collect();
        let total: f64 = hist.iter().sum();
        let mut best = f64::NEG_INFINITY;
        let mut best_edge = edges[1];
        for i in 1..n {
            let w0: f64 = hist[..i].iter().sum();
            let w1: f64 = hist[i..].iter().sum();
            if w0 == 0.0 || w1 == 0.0 {
                continue;
            }
            let mu0: f64 = hist[..i]
                .iter()
                .zip(&centers[..i])
                .map(|(c, x)| c * x)
                .sum::<f64>()
                / w0;
            let mu1: f64 = hist[i..]
                .iter()
                .zip(&centers[i..])
                .map(|(c, x)| c * x)
                .sum::<f64>()
                / w1;
            let sigma = (w0 / total) * (w1 / total) * (mu0 - mu1).powi(2);
            if sigma > best {
                best = sigma;
                best_edge = edges[i];
            }
        }
        best_edge
    }

    fn unit_edges(n: usize) -> Vec<f64> {
        (0..=n).map(|i| i as f64).collect()
    }

    #[test]
    fn parse_round_trip_and_sizes() {
        let text = concat!(
            r#"{"video": "v1", "frameCount": 2, "fps": 30.0}"#,
            "\n",
            r#"{"video": "v1", "frame": 0, "detections": [{"model": "person", "score": 1.5, "box": [0, 0, 10, 20], "parts": [[1, 2]], "rootFilter": 1, "flow": [0.5, 0.0]}, {"model": "chair", "score": 0.2, "box": [5, 5, 9, 9], "parts": [], "rootFilter": 0, "flow": null}]}"#,
            "\n",
            r#"{"video": "v1", "frame": 1, "detections": [{"model": "person", "score": 1.4, "box": [1, 0, 11, 20], "parts": [[1, 2]], "rootFilter": 1, "flow": [0.5, 0.0]}]}"#,
            "\n",
        );
        let stream = parse_detection_stream_str(text).unwrap();
        assert_eq!(stream.frame_count, 2);
        assert_eq!(stream.per_frame[0].len(), 2);
        assert_eq!(stream.per_frame[1].len(), 1);
        assert_eq!(stream.detection_count(), 3);
        let back = write_detection_stream(&stream);
        let again = parse_detection_stream_str(&back).unwrap();
        assert_eq!(stream, again);
    }

    #[test]
    fn parse_empty_frame_list_ok() {
        let text = concat!(
            r#"{"video": "v", "frameCount": 2}"#,
            "\n",
            r#"{"video": "v", "frame": 0, "detections": []}"#,
            "\n",
        );
        let stream = parse_detection_stream_str(text).unwrap();
        assert!(stream.per_frame[0].is_empty());
        assert!(stream.per_frame[1].is_empty());
        assert_eq!(stream.fps, 30.0);
    }

    #[test]
    fn parse_rejects_degenerate_box() {
        let text = concat!(
            r#"{"video": "v", "frameCount": 1}"#,
            "\n",
            r#"{"video": "v", "frame": 0, "detections": [{"model": "dog", "score": 1.0, "box": [10, 0, 10, 5]}]}"#,
            "\n",
        );
        match parse_detection_stream_str(text) {
            Err(IngestError::Validation { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_out_of_range_frame() {
        let text = concat!(
            r#"{"video": "v", "frameCount": 1}"#,
            "\n",
            r#"{"video": "v", "frame": 3, "detections": []}"#,
            "\n",
        );
        assert!(matches!(
            parse_detection_stream_str(text),
            Err(IngestError::Validation { line: 2, .. })
        ));
    }

    #[test]
    fn otsu_two_point_masses() {
        let mut hist = vec![0.0; 50];
        hist[10] = 5.0;
        hist[40] = 7.0;
        let edges = unit_edges(50);
        // Boundaries 11..=40 all separate the masses equally; smallest wins.
        let t = otsu_bipartition(&hist, &edges).unwrap();
        assert_eq!(t, edges[11]);
    }

    #[test]
    fn otsu_uniform_matches_oracle() {
        let hist = vec![1.0; 50];
        let edges = unit_edges(50);
        let t = otsu_bipartition(&hist, &edges).unwrap();
        assert_eq!(t, otsu_oracle(&hist, &edges));
    }

    #[test]
    fn otsu_random_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let hist: Vec<f64> = (0..50)
                .map(|_| {
                    if rng.gen_bool(0.3) {
                        0.0
                    } else {
                        rng.gen_range(0.0..20.0f64).floor()
                    }
                })
                .collect();
            if hist.iter().filter(|&&c| c > 0.0).count() < 2 {
                continue;
            }
            let lo: f64 = rng.gen_range(-5.0..0.0);
            let width: f64 = rng.gen_range(0.01..2.0);
            let edges: Vec<f64> = (0..=50).map(|i| lo + width * i as f64).collect();
            assert_eq!(
                otsu_bipartition(&hist, &edges).unwrap(),
                otsu_oracle(&hist, &edges)
            );
        }
    }

    #[test]
    fn otsu_rejects_single_mass() {
        let mut hist = vec![0.0; 50];
        hist[3] = 9.0;
        assert!(matches!(
            otsu_bipartition(&hist, &unit_edges(50)),
            Err(IngestError::NoBipartition)
        ));
    }

    fn bimodal_stream(rng: &mut ChaCha8Rng, frames: usize) -> DetectionStream {
        let mut stream = DetectionStream::empty("v", frames, 30.0);
        for f in 0..frames {
            let base: f64 = if f % 2 == 0 {
                rng.gen_range(-1.1..-0.9)
            } else {
                rng.gen_range(0.9..1.1)
            };
            stream.per_frame[f].push(test_detection(f, "dog", base, BBox::new(0.0, 0.0, 4.0, 4.0)));
            stream.per_frame[f].push(test_detection(
                f,
                "dog",
                base - 0.5,
                BBox::new(1.0, 1.0, 5.0, 5.0),
            ));
        }
        stream
    }

    #[test]
    fn normalize_uses_min_of_otsu_and_capped_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let stream = bimodal_stream(&mut rng, 40);
        let (hist, edges) = top_score_histogram(&stream, "dog").unwrap();
        let otsu = otsu_bipartition(&hist, &edges).unwrap();

        // Trained threshold low enough that its capped value wins.
        let (_, status) = normalize_scores(stream.clone(), "dog", -5.0);
        assert_eq!(status, NormalizeStatus::Applied { offset: -4.6 });

        // Trained threshold high enough that the Otsu value wins.
        let (shifted, status) = normalize_scores(stream.clone(), "dog", 10.0);
        assert_eq!(status, NormalizeStatus::Applied { offset: otsu });
        // Every score of the model is offset exactly once (reconstruction).
        for (orig, new) in stream
            .per_frame
            .iter()
            .flatten()
            .zip(shifted.per_frame.iter().flatten())
        {
            assert!((new.score - (orig.score - otsu)).abs() < 1e-12);
        }
    }

    #[test]
    fn normalize_single_frame_falls_back_to_capped() {
        let mut stream = DetectionStream::empty("v", 1, 30.0);
        stream.per_frame[0].push(test_detection(0, "dog", 2.0, BBox::new(0.0, 0.0, 2.0, 2.0)));
        let (out, status) = normalize_scores(stream, "dog", -1.0);
        assert_eq!(status, NormalizeStatus::Applied { offset: -0.6 });
        assert!((out.per_frame[0][0].score - 2.6).abs() < 1e-12);
    }

    #[test]
    fn normalize_absent_model_is_noop() {
        let stream = DetectionStream::empty("v", 3, 30.0);
        let (out, status) = normalize_scores(stream.clone(), "dog", 0.0);
        assert_eq!(status, NormalizeStatus::ModelAbsent);
        assert_eq!(out, stream);
    }

    #[test]
    fn cap_retains_top_k_and_ties_by_order() {
        let mut stream = DetectionStream::empty("v", 1, 30.0);
        for i in 0..15 {
            stream.per_frame[0].push(test_detection(
                0,
                "dog",
                i as f64,
                BBox::new(0.0, 0.0, 1.0, 1.0),
            ));
        }
        let capped = cap_per_frame(stream, 12);
        assert_eq!(capped.per_frame[0].len(), 12);
        let min_kept = capped.per_frame[0]
            .iter()
            .map(|d| d.score)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(min_kept, 3.0);

        let mut tied = DetectionStream::empty("v", 1, 30.0);
        for i in 0..4 {
            let mut d = test_detection(0, "dog", 1.0, BBox::new(0.0, 0.0, 1.0, 1.0));
            d.root_filter = i;
            tied.per_frame[0].push(d);
        }
        let capped = cap_per_frame(tied, 2);
        let kept: Vec<usize> = capped.per_frame[0].iter().map(|d| d.root_filter).collect();
        assert_eq!(kept, vec![0, 1]);
    }

    #[test]
    fn cap_under_k_unchanged() {
        let mut stream = DetectionStream::empty("v", 1, 30.0);
        for i in 0..3 {
            stream.per_frame[0].push(test_detection(
                0,
                "dog",
                i as f64,
                BBox::new(0.0, 0.0, 1.0, 1.0),
            ));
        }
        let capped = cap_per_frame(stream.clone(), 12);
        assert_eq!(capped, stream);
    }

    #[test]
    fn project_copies_along_flow() {
        let mut stream = DetectionStream::empty("v", 10, 30.0);
        let mut d = test_detection(0, "dog", 1.0, BBox::new(0.0, 0.0, 4.0, 4.0));
        d.flow = Some((2.0, 0.0));
        stream.per_frame[0].push(d);
        let out = project_forward(stream, 5, 12);
        for h in 1..=5usize {
            let dets = &out.per_frame[h];
            assert_eq!(dets.len(), 1);
            assert!(dets[0].projected);
            assert_eq!(dets[0].bbox.x1, 2.0 * h as f64);
            assert_eq!(dets[0].score, 1.0);
        }
        assert!(out.per_frame[6].is_empty());
    }

    #[test]
    fn project_last_frame_no_copies() {
        let mut stream = DetectionStream::empty("v", 3, 30.0);
        stream.per_frame[2].push(test_detection(2, "dog", 1.0, BBox::new(0.0, 0.0, 4.0, 4.0)));
        let out = project_forward(stream, 5, 12);
        assert_eq!(out.detection_count(), 1);
    }

    #[test]
    fn project_missing_flow_stays_in_place() {
        let mut stream = DetectionStream::empty("v", 3, 30.0);
        let d = test_detection(0, "dog", 1.0, BBox::new(1.0, 1.0, 4.0, 4.0));
        stream.per_frame[0].push(d.clone());
        let out = project_forward(stream, 5, 12);
        assert_eq!(out.per_frame[1][0].bbox, d.bbox);
        assert_eq!(out.per_frame[2][0].bbox, d.bbox);
    }

    #[test]
    fn project_recap_prefers_originals_on_ties() {
        let mut stream = DetectionStream::empty("v", 2, 30.0);
        stream.per_frame[0].push(test_detection(0, "dog", 1.0, BBox::new(0.0, 0.0, 1.0, 1.0)));
        stream.per_frame[1].push(test_detection(1, "dog", 1.0, BBox::new(5.0, 5.0, 6.0, 6.0)));
        let out = project_forward(stream, 1, 1);
        assert_eq!(out.per_frame[1].len(), 1);
        assert!(!out.per_frame[1][0].projected);
    }

    #[test]
    fn project_adds_at_most_horizon_copies_with_sources() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..25 {
            let frames = rng.gen_range(2..12);
            let mut stream = DetectionStream::empty("v", frames, 30.0);
            for f in 0..frames {
                for _ in 0..rng.gen_range(0..3) {
                    let x = rng.gen_range(0.0..50.0);
                    let mut d =
                        test_detection(f, "dog", rng.gen_range(0.0..1.0), BBox::new(x, 0.0, x + 4.0, 4.0));
                    if rng.gen_bool(0.5) {
                        d.flow = Some((rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)));
                    }
                    stream.per_frame[f].push(d);
                }
            }
            let originals = stream.detection_count();
            let horizon = rng.gen_range(1..6);
            let out = project_forward(stream.clone(), horizon, usize::MAX);
            let projected = out
                .per_frame
                .iter()
                .flatten()
                .filter(|d| d.projected)
                .count();
            assert!(projected <= originals * horizon);
            assert_eq!(out.detection_count() - projected, originals);
            // Every projected detection has a source at the right offset.
            for d in out.per_frame.iter().flatten().filter(|d| d.projected) {
                let found = (1..=horizon).any(|h| {
                    d.frame >= h
                        && stream.per_frame[d.frame - h].iter().any(|s| {
                            let (fx, fy) = s.flow.unwrap_or((0.0, 0.0));
                            s.model == d.model
                                && s.score == d.score
                                && (s.bbox.x1 + fx * h as f64 - d.bbox.x1).abs() < 1e-9
                                && (s.bbox.y1 + fy * h as f64 - d.bbox.y1).abs() < 1e-9
                        })
                });
                assert!(found, "projected detection without source");
            }
        }
    }
}
