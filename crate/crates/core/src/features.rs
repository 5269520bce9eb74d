//! Per-frame feature series computed from smoothed tracks: kinematics and
//! posture for a single participant, plus relational features for an
//! agent-patient pair.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classes::{class_index, is_person_class, ROOT_FILTER_CARDINALITY};
use crate::posture::{codebook_index, part_displacements, PostureCodebook};
use crate::tracker::Track;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("person track of class {class} requires a posture codebook")]
    MissingCodebook { class: String },
    #[error("unknown object class {class}")]
    UnknownClass { class: String },
    #[error("root-filter index {index} exceeds cardinality {cardinality}")]
    RootFilterRange { index: usize, cardinality: usize },
    #[error("tracks do not overlap in time ([{a0}, {a1}] vs [{b0}, {b1}])")]
    NoOverlap {
        a0: usize,
        a1: usize,
        b0: usize,
        b1: usize,
    },
    #[error("posture error: {0}")]
    Posture(#[from] crate::posture::PostureError),
}

/// Modeling family of one feature column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum FeatureKind {
    Linear,
    Angular,
    Discrete { cardinality: usize },
}

/// Which part of the pipeline a feature comes from; used by the schema
/// masks that drop feature families wholesale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureGroup {
    /// Box kinematics and pair geometry.
    Motion,
    /// Part displacements, their derivatives, and the codebook index.
    Posture,
    /// Object class and root-filter identity.
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
    pub group: FeatureGroup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub features: Vec<FeatureDescriptor>,
}

impl FeatureSchema {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Concatenate two schemas, prefixing every feature name.
    fn concat_prefixed(parts: &[(&str, &FeatureSchema)]) -> FeatureSchema {
        let mut features = Vec::new();
        for (prefix, schema) in parts {
            for f in &schema.features {
                features.push(FeatureDescriptor {
                    name: format!("{prefix}{}", f.name),
                    kind: f.kind,
                    group: f.group,
                });
            }
        }
        FeatureSchema { features }
    }
}

/// Feature-subset selections. Training and scoring must agree on the mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemaMask {
    /// All features.
    #[default]
    Full,
    /// Drop every discrete feature.
    NoDiscrete,
    /// Drop the continuous posture features only.
    NoPostureContinuous,
    /// Drop discrete and posture features alike, keeping pure motion.
    MotionOnly,
}

impl SchemaMask {
    fn keeps(&self, d: &FeatureDescriptor) -> bool {
        let discrete = matches!(d.kind, FeatureKind::Discrete { .. });
        let posture = d.group == FeatureGroup::Posture;
        match self {
            SchemaMask::Full => true,
            SchemaMask::NoDiscrete => !discrete,
            SchemaMask::NoPostureContinuous => !(posture && !discrete),
            SchemaMask::MotionOnly => !discrete && !posture,
        }
    }
}

/// Time series of feature rows under a declared schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSeries {
    pub schema: FeatureSchema,
    pub fps: f64,
    /// Row-major values, one row per frame.
    pub frames: Vec<Vec<f64>>,
}

impl FeatureSeries {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Drop the columns excluded by `mask`.
    pub fn apply_mask(&self, mask: SchemaMask) -> FeatureSeries {
        let keep: Vec<bool> = self.schema.features.iter().map(|d| mask.keeps(d)).collect();
        let features = self
            .schema
            .features
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(d, _)| d.clone())
            .collect();
        let frames = self
            .frames
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&keep)
                    .filter(|(_, &k)| k)
                    .map(|(v, _)| *v)
                    .collect()
            })
            .collect();
        FeatureSeries {
            schema: FeatureSchema { features },
            fps: self.fps,
            frames,
        }
    }
}

/// Wrap an angle into (-pi, pi].
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    }
    if t <= -PI {
        t += 2.0 * PI;
    }
    // rem_euclid maps -pi to +pi already; keep exact zero sign clean.
    if t == -0.0 {
        0.0
    } else {
        t
    }
}

/// First-order derivative scaled by fps: central differences inside,
/// forward/backward at the ends, zero for single-sample series.
pub fn derivative(xs: &[f64], fps: f64) -> Vec<f64> {
    let n = xs.len();
    if n <= 1 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| {
            if i == 0 {
                (xs[1] - xs[0]) * fps
            } else if i == n - 1 {
                (xs[n - 1] - xs[n - 2]) * fps
            } else {
                (xs[i + 1] - xs[i - 1]) * 0.5 * fps
            }
        })
        .collect()
}

/// Speed below which a direction estimate is considered unreliable and the
/// previous frame's direction is carried forward.
pub const DIRECTION_EPSILON: f64 = 5.0;

fn directions(vx: &[f64], vy: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(vx.len());
    let mut prev = 0.0;
    for (&x, &y) in vx.iter().zip(vy) {
        let mag = (x * x + y * y).sqrt();
        let dir = if mag < DIRECTION_EPSILON {
            prev
        } else {
            // Screen-up convention: positive angles point up on screen.
            wrap_angle((-y).atan2(x))
        };
        out.push(dir);
        prev = dir;
    }
    out
}

fn magnitudes(vx: &[f64], vy: &[f64]) -> Vec<f64> {
    vx.iter()
        .zip(vy)
        .map(|(&x, &y)| (x * x + y * y).sqrt())
        .collect()
}

fn descriptor(name: &str, kind: FeatureKind, group: FeatureGroup) -> FeatureDescriptor {
    FeatureDescriptor {
        name: name.to_string(),
        kind,
        group,
    }
}

/// Single-participant features: box-center position, aspect ratio and its
/// derivative, velocity and acceleration (magnitude + direction), and for
/// person tracks the normalized part displacements, their derivatives, and
/// the posture codebook index, plus the object-class and root-filter
/// discrete features.
pub fn single_track_features(
    track: &Track,
    codebook: Option<&PostureCodebook>,
    fps: f64,
) -> Result<FeatureSeries, FeatureError> {
    let n = track.len();
    let class_idx = class_index(&track.object_class).ok_or(FeatureError::UnknownClass {
        class: track.object_class.clone(),
    })? as f64;
    let person = is_person_class(&track.object_class);
    let cb = if person {
        Some(codebook.ok_or(FeatureError::MissingCodebook {
            class: track.object_class.clone(),
        })?)
    } else {
        None
    };

    let cx: Vec<f64> = track.detections.iter().map(|d| d.bbox.center().0).collect();
    let cy: Vec<f64> = track.detections.iter().map(|d| d.bbox.center().1).collect();
    let aspect: Vec<f64> = track.detections.iter().map(|d| d.bbox.aspect()).collect();
    let aspect_d = derivative(&aspect, fps);
    let vx = derivative(&cx, fps);
    let vy = derivative(&cy, fps);
    let speed = magnitudes(&vx, &vy);
    let vel_dir = directions(&vx, &vy);
    let ax = derivative(&vx, 1.0);
    let ay = derivative(&vy, 1.0);
    let accel = magnitudes(&ax, &ay);
    let accel_dir = directions(&ax, &ay);

    let mut features = vec![
        descriptor("cx", FeatureKind::Linear, FeatureGroup::Motion),
        descriptor("cy", FeatureKind::Linear, FeatureGroup::Motion),
        descriptor("aspect", FeatureKind::Linear, FeatureGroup::Motion),
        descriptor("aspect_d", FeatureKind::Linear, FeatureGroup::Motion),
        descriptor("speed", FeatureKind::Linear, FeatureGroup::Motion),
        descriptor("vel_dir", FeatureKind::Angular, FeatureGroup::Motion),
        descriptor("accel", FeatureKind::Linear, FeatureGroup::Motion),
        descriptor("accel_dir", FeatureKind::Angular, FeatureGroup::Motion),
    ];
    let mut columns: Vec<Vec<f64>> = vec![cx, cy, aspect, aspect_d, speed, vel_dir, accel, accel_dir];

    if let Some(cb) = cb {
        let displacement_rows: Vec<Vec<f64>> = track
            .detections
            .iter()
            .map(part_displacements)
            .collect::<Result<_, _>>()?;
        let dim = cb.dim();
        for c in 0..dim {
            let part = c / 2;
            let axis = if c % 2 == 0 { "x" } else { "y" };
            features.push(descriptor(
                &format!("part{part}{axis}"),
                FeatureKind::Linear,
                FeatureGroup::Posture,
            ));
            columns.push(displacement_rows.iter().map(|r| r[c]).collect());
        }
        for c in 0..dim {
            let part = c / 2;
            let axis = if c % 2 == 0 { "x" } else { "y" };
            features.push(descriptor(
                &format!("part{part}{axis}_d"),
                FeatureKind::Linear,
                FeatureGroup::Posture,
            ));
            let col: Vec<f64> = displacement_rows.iter().map(|r| r[c]).collect();
            columns.push(derivative(&col, fps));
        }
        features.push(descriptor(
            "posture",
            FeatureKind::Discrete { cardinality: cb.k },
            FeatureGroup::Posture,
        ));
        let idx_col: Vec<f64> = displacement_rows
            .iter()
            .map(|r| codebook_index(cb, r).map(|i| i as f64))
            .collect::<Result<_, _>>()?;
        columns.push(idx_col);
    }

    features.push(descriptor(
        "class",
        FeatureKind::Discrete {
            cardinality: crate::classes::OBJECT_CLASSES.len(),
        },
        FeatureGroup::Identity,
    ));
    columns.push(vec![class_idx; n]);

    features.push(descriptor(
        "root_filter",
        FeatureKind::Discrete {
            cardinality: ROOT_FILTER_CARDINALITY,
        },
        FeatureGroup::Identity,
    ));
    let root_col: Vec<f64> = track
        .detections
        .iter()
        .map(|d| {
            if d.root_filter >= ROOT_FILTER_CARDINALITY {
                Err(FeatureError::RootFilterRange {
                    index: d.root_filter,
                    cardinality: ROOT_FILTER_CARDINALITY,
                })
            } else {
                Ok(d.root_filter as f64)
            }
        })
        .collect::<Result<_, _>>()?;
    columns.push(root_col);

    let frames = (0..n)
        .map(|t| columns.iter().map(|c| c[t]).collect())
        .collect();
    Ok(FeatureSeries {
        schema: FeatureSchema { features },
        fps,
        frames,
    })
}

/// Frame interval shared by two tracks, if any.
pub fn overlap(a: &Track, b: &Track) -> Option<(usize, usize)> {
    let t0 = a.t0.max(b.t0);
    let t1 = a.t1().min(b.t1());
    if t0 <= t1 {
        Some((t0, t1))
    } else {
        None
    }
}

/// Agent-patient relational features over the overlap interval: center
/// distance, its derivative, and the orientation of the agent-to-patient
/// vector (screen-up convention).
pub fn pair_features(agent: &Track, patient: &Track, fps: f64) -> Result<FeatureSeries, FeatureError> {
    let (t0, t1) = overlap(agent, patient).ok_or(FeatureError::NoOverlap {
        a0: agent.t0,
        a1: agent.t1(),
        b0: patient.t0,
        b1: patient.t1(),
    })?;
    let mut dist = Vec::with_capacity(t1 - t0 + 1);
    let mut orient = Vec::with_capacity(t1 - t0 + 1);
    for t in t0..=t1 {
        let (ax, ay) = agent.detections[t - agent.t0].bbox.center();
        let (px, py) = patient.detections[t - patient.t0].bbox.center();
        let dx = px - ax;
        let dy = py - ay;
        dist.push((dx * dx + dy * dy).sqrt());
        orient.push(wrap_angle((-dy).atan2(dx)));
    }
    let dist_d = derivative(&dist, fps);
    let features = vec![
        descriptor("pair_dist", FeatureKind::Linear, FeatureGroup::Motion),
        descriptor("pair_dist_d", FeatureKind::Linear, FeatureGroup::Motion),
        descriptor("pair_orient", FeatureKind::Angular, FeatureGroup::Motion),
    ];
    let frames = (0..dist.len())
        .map(|t| vec![dist[t], dist_d[t], orient[t]])
        .collect();
    Ok(FeatureSeries {
        schema: FeatureSchema { features },
        fps,
        frames,
    })
}

/// Combined two-participant series over the overlap: agent single-track
/// features, patient single-track features, then pair features, with
/// prefixed names.
pub fn two_track_features(
    agent: &Track,
    patient: &Track,
    codebook: Option<&PostureCodebook>,
    fps: f64,
) -> Result<FeatureSeries, FeatureError> {
    let (t0, t1) = overlap(agent, patient).ok_or(FeatureError::NoOverlap {
        a0: agent.t0,
        a1: agent.t1(),
        b0: patient.t0,
        b1: patient.t1(),
    })?;
    let a = single_track_features(&agent.slice(t0, t1), codebook, fps)?;
    let p = single_track_features(&patient.slice(t0, t1), codebook, fps)?;
    let pair = pair_features(agent, patient, fps)?;
    let schema = FeatureSchema::concat_prefixed(&[
        ("a_", &a.schema),
        ("p_", &p.schema),
        ("pair_", &pair.schema),
    ]);
    let frames = (0..a.len())
        .map(|t| {
            let mut row = a.frames[t].clone();
            row.extend_from_slice(&p.frames[t]);
            row.extend_from_slice(&pair.frames[t]);
            row
        })
        .collect();
    Ok(FeatureSeries {
        schema,
        fps,
        frames,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{test_detection, BBox, Detection};
    use std::f64::consts::PI;

    fn track_from_centers(class: &str, centers: &[(f64, f64)]) -> Track {
        let detections: Vec<Detection> = centers
            .iter()
            .enumerate()
            .map(|(f, &(x, y))| {
                test_detection(f, class, 1.0, BBox::new(x - 5.0, y - 10.0, x + 5.0, y + 10.0))
            })
            .collect();
        Track {
            video: "v".into(),
            object_class: class.into(),
            t0: 0,
            detections,
            total_score: centers.len() as f64,
        }
    }

    fn col(series: &FeatureSeries, name: &str) -> Vec<f64> {
        let idx = series
            .schema
            .features
            .iter()
            .position(|d| d.name == name)
            .unwrap_or_else(|| panic!("no feature {name}"));
        series.frames.iter().map(|r| r[idx]).collect()
    }

    #[test]
    fn stationary_track_zero_velocity() {
        let t = track_from_centers("dog", &[(50.0, 50.0); 6]);
        let s = single_track_features(&t, None, 30.0).unwrap();
        assert!(col(&s, "speed").iter().all(|&v| v == 0.0));
        // Stationary convention: direction stays at the initial 0.
        assert!(col(&s, "vel_dir").iter().all(|&v| v == 0.0));
    }

    #[test]
    fn uniform_motion_kinematics() {
        let centers: Vec<(f64, f64)> = (0..8).map(|f| (3.0 * f as f64, 40.0)).collect();
        let t = track_from_centers("dog", &centers);
        let s = single_track_features(&t, None, 30.0).unwrap();
        for &v in &col(&s, "speed") {
            assert!((v - 90.0).abs() < 1e-9);
        }
        for &d in &col(&s, "vel_dir") {
            assert_eq!(d, 0.0);
        }
        // Interior acceleration is zero for uniform motion.
        let accel = col(&s, "accel");
        for &a in &accel[1..accel.len() - 1] {
            assert!(a.abs() < 1e-9);
        }
    }

    #[test]
    fn single_frame_track_zero_derivatives() {
        let t = track_from_centers("dog", &[(10.0, 10.0)]);
        let s = single_track_features(&t, None, 30.0).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(col(&s, "speed")[0], 0.0);
        assert_eq!(col(&s, "aspect_d")[0], 0.0);
        assert_eq!(col(&s, "accel")[0], 0.0);
    }

    #[test]
    fn upward_screen_motion_has_positive_direction() {
        // Image y decreases over time = moving up on screen.
        let centers: Vec<(f64, f64)> = (0..6).map(|f| (40.0, 100.0 - 8.0 * f as f64)).collect();
        let t = track_from_centers("dog", &centers);
        let s = single_track_features(&t, None, 30.0).unwrap();
        for &d in &col(&s, "vel_dir") {
            assert!((d - PI / 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn person_track_requires_codebook() {
        let t = track_from_centers("person", &[(10.0, 10.0); 3]);
        assert!(matches!(
            single_track_features(&t, None, 30.0),
            Err(FeatureError::MissingCodebook { .. })
        ));
    }

    fn person_track_with_parts(frames: usize) -> Track {
        let mut t = track_from_centers("person", &vec![(30.0, 30.0); frames]);
        for d in &mut t.detections {
            d.parts = vec![(0.0, -8.0), (0.0, 8.0)];
        }
        t
    }

    fn tiny_codebook() -> PostureCodebook {
        PostureCodebook {
            k: 2,
            part_count: 2,
            means: vec![vec![0.0, -0.5, 0.0, 0.5], vec![0.5, 0.0, -0.5, 0.0]],
            seed: 0,
        }
    }

    #[test]
    fn person_track_emits_posture_features() {
        let t = person_track_with_parts(4);
        let cb = tiny_codebook();
        let s = single_track_features(&t, Some(&cb), 30.0).unwrap();
        let names: Vec<&str> = s.schema.features.iter().map(|d| d.name.as_str()).collect();
        assert!(names.contains(&"part0x"));
        assert!(names.contains(&"part1y_d"));
        assert!(names.contains(&"posture"));
        // 8 kinematic + 4 displacements + 4 derivatives + posture + class + root.
        assert_eq!(s.schema.len(), 8 + 4 + 4 + 1 + 2);
        let posture = col(&s, "posture");
        assert!(posture.iter().all(|&p| p == 0.0 || p == 1.0));
    }

    #[test]
    fn nonperson_track_has_no_posture_features() {
        let t = track_from_centers("chair", &[(10.0, 10.0); 3]);
        let s = single_track_features(&t, None, 30.0).unwrap();
        assert_eq!(s.schema.len(), 10);
        let class = col(&s, "class");
        assert!(class.iter().all(|&c| c == class_index("chair").unwrap() as f64));
    }

    #[test]
    fn angular_outputs_in_range() {
        let centers: Vec<(f64, f64)> = (0..20)
            .map(|f| {
                let a = f as f64 * 0.9;
                (100.0 + 50.0 * a.cos(), 100.0 + 50.0 * a.sin())
            })
            .collect();
        let t = track_from_centers("dog", &centers);
        let s = single_track_features(&t, None, 30.0).unwrap();
        for name in ["vel_dir", "accel_dir"] {
            for &v in &col(&s, name) {
                assert!(v > -PI && v <= PI, "{name} out of range: {v}");
            }
        }
    }

    #[test]
    fn derivative_converges_at_second_order() {
        // x(t) = t^3 on [0, 1]; halving dt should shrink the max interior
        // central-difference error by ~4x (allow >= 3.5x).
        let f = |t: f64| t * t * t;
        let df = |t: f64| 3.0 * t * t;
        let mut errors = Vec::new();
        for &n in &[16usize, 32] {
            let fps = n as f64;
            let xs: Vec<f64> = (0..=n).map(|i| f(i as f64 / fps)).collect();
            let d = derivative(&xs, fps);
            let err = (1..n)
                .map(|i| (d[i] - df(i as f64 / fps)).abs())
                .fold(0.0, f64::max);
            errors.push(err);
        }
        assert!(errors[0] / errors[1] >= 3.5, "ratio {}", errors[0] / errors[1]);
    }

    #[test]
    fn pair_coincident_centers() {
        let a = track_from_centers("dog", &[(10.0, 10.0); 4]);
        let b = track_from_centers("chair", &[(10.0, 10.0); 4]);
        let s = pair_features(&a, &b, 30.0).unwrap();
        assert!(col(&s, "pair_dist").iter().all(|&d| d == 0.0));
    }

    #[test]
    fn pair_geometry_and_sign_convention() {
        let a = track_from_centers("dog", &[(10.0, 10.0); 4]);
        let right = track_from_centers("chair", &[(20.0, 10.0); 4]);
        let s = pair_features(&a, &right, 30.0).unwrap();
        assert!(col(&s, "pair_dist").iter().all(|&d| (d - 10.0).abs() < 1e-12));
        assert!(col(&s, "pair_dist_d").iter().all(|&d| d == 0.0));
        assert!(col(&s, "pair_orient").iter().all(|&o| o == 0.0));

        // Patient above the agent on screen: smaller image y.
        let above = track_from_centers("chair", &[(10.0, 0.0); 4]);
        let s = pair_features(&a, &above, 30.0).unwrap();
        assert!(col(&s, "pair_orient")
            .iter()
            .all(|&o| (o - PI / 2.0).abs() < 1e-12));
    }

    #[test]
    fn pair_requires_overlap() {
        let mut a = track_from_centers("dog", &[(0.0, 0.0); 3]);
        let mut b = track_from_centers("chair", &[(0.0, 0.0); 3]);
        a.t0 = 0;
        b.t0 = 10;
        for (i, d) in b.detections.iter_mut().enumerate() {
            d.frame = 10 + i;
        }
        assert!(matches!(
            pair_features(&a, &b, 30.0),
            Err(FeatureError::NoOverlap { .. })
        ));
    }

    #[test]
    fn translation_invariance() {
        let centers: Vec<(f64, f64)> = (0..6).map(|f| (5.0 * f as f64, 3.0 * f as f64)).collect();
        let a = track_from_centers("dog", &centers);
        let b = track_from_centers("chair", &[(50.0, 60.0); 6]);
        let sa = single_track_features(&a, None, 30.0).unwrap();
        let sp = pair_features(&a, &b, 30.0).unwrap();

        let shift = |t: &Track| {
            let mut t = t.clone();
            for d in &mut t.detections {
                d.bbox = d.bbox.translated(17.0, -23.0);
            }
            t
        };
        let sa2 = single_track_features(&shift(&a), None, 30.0).unwrap();
        let sp2 = pair_features(&shift(&a), &shift(&b), 30.0).unwrap();
        for name in ["speed", "vel_dir", "accel", "accel_dir", "aspect", "aspect_d"] {
            assert_eq!(col(&sa, name), col(&sa2, name), "{name}");
        }
        for (x, x2) in col(&sa, "cx").iter().zip(col(&sa2, "cx")) {
            assert!((x + 17.0 - x2).abs() < 1e-12);
        }
        assert_eq!(sp.frames, sp2.frames);
    }

    #[test]
    fn two_track_series_shapes_and_masks() {
        let mut a = person_track_with_parts(5);
        a.detections.iter_mut().for_each(|d| d.root_filter = 1);
        let b = track_from_centers("chair", &[(80.0, 30.0); 5]);
        let cb = tiny_codebook();
        let s = two_track_features(&a, &b, Some(&cb), 30.0).unwrap();
        assert_eq!(s.len(), 5);
        assert_eq!(s.schema.len(), 19 + 10 + 3);
        assert!(s.schema.features.iter().any(|d| d.name == "a_posture"));
        assert!(s.schema.features.iter().any(|d| d.name == "pair_pair_dist"));

        let no_discrete = s.apply_mask(SchemaMask::NoDiscrete);
        assert!(no_discrete
            .schema
            .features
            .iter()
            .all(|d| !matches!(d.kind, FeatureKind::Discrete { .. })));
        let motion = s.apply_mask(SchemaMask::MotionOnly);
        assert_eq!(motion.schema.len(), 8 + 8 + 3);
        for row in &motion.frames {
            assert_eq!(row.len(), motion.schema.len());
        }
        let no_posture = s.apply_mask(SchemaMask::NoPostureContinuous);
        assert!(no_posture.schema.features.iter().any(|d| d.name == "a_posture"));
        assert!(no_posture
            .schema
            .features
            .iter()
            .all(|d| !d.name.starts_with("a_part")));
    }

    #[test]
    fn wrap_angle_range() {
        for i in -20..=20 {
            let theta = i as f64 * 0.7;
            let w = wrap_angle(theta);
            assert!(w > -PI && w <= PI);
            assert!(((w - theta).rem_euclid(2.0 * PI)).abs() < 1e-9 || ((w - theta).rem_euclid(2.0 * PI) - 2.0 * PI).abs() < 1e-9);
        }
        assert_eq!(wrap_angle(-PI), PI);
    }
}
