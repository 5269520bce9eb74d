//! Adverbs, direction adjuncts, static spatial relations, and color words.
//!
//! All direction logic uses the screen-up convention: positive angles point
//! up on screen, so image-space y components are negated before atan2.

use crate::features::wrap_angle;

use super::stats::ActionThresholds;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Adverb {
    Quickly,
    Slowly,
}

impl Adverb {
    pub fn as_str(&self) -> &'static str {
        match self {
            Adverb::Quickly => "quickly",
            Adverb::Slowly => "slowly",
        }
    }
}

/// quickly when v > v2; slowly when v1 <= v <= v3; nothing otherwise.
pub fn select_adverb(mean_speed: f64, th: &ActionThresholds) -> Option<Adverb> {
    if mean_speed > th.v2 {
        Some(Adverb::Quickly)
    } else if th.v1 <= mean_speed && mean_speed <= th.v3 {
        Some(Adverb::Slowly)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdjunctKind {
    /// From the subject's perspective: "leftward".
    Endogenous,
    /// From the viewer's perspective: "from the left".
    Exogenous,
}

/// Eight 45-degree sectors counterclockwise from screen-right.
fn direction_sector(theta: f64) -> usize {
    let deg = theta.to_degrees();
    ((deg + 22.5).rem_euclid(360.0) / 45.0) as usize % 8
}

const ENDOGENOUS_LABELS: [&str; 8] = [
    "rightward",
    "rightward and upward",
    "upward",
    "leftward and upward",
    "leftward",
    "leftward and downward",
    "downward",
    "rightward and downward",
];

/// Motion toward a sector is described as coming from the opposite side.
const EXOGENOUS_LABELS: [&str; 8] = [
    "from the left",
    "from below and to the left",
    "from below",
    "from below and to the right",
    "from the right",
    "from above and to the right",
    "from above",
    "from above and to the left",
];

/// Direction adjunct for the subject's mean velocity (image coordinates).
/// Omitted when the speed is below the action's v1 floor.
pub fn select_adjunct(mean_velocity: (f64, f64), kind: AdjunctKind, v1: f64) -> Option<String> {
    let (vx, vy) = mean_velocity;
    let speed = (vx * vx + vy * vy).sqrt();
    if speed < v1 || speed == 0.0 {
        return None;
    }
    let sector = direction_sector(wrap_angle((-vy).atan2(vx)));
    let label = match kind {
        AdjunctKind::Endogenous => ENDOGENOUS_LABELS[sector],
        AdjunctKind::Exogenous => EXOGENOUS_LABELS[sector],
    };
    Some(label.to_string())
}

/// Viewer-relative relations of the subject X to the reference object Y;
/// the returned phrase precedes the Y noun phrase.
const SPATIAL_RELATIONS: [&str; 8] = [
    "to the right of",
    "above and to the right of",
    "above",
    "above and to the left of",
    "to the left of",
    "below and to the left of",
    "below",
    "below and to the right of",
];

/// Static 2D relation of X relative to Y, from box centers in image
/// coordinates.
pub fn static_spatial_relation(
    agent_center: (f64, f64),
    patient_center: (f64, f64),
) -> &'static str {
    let dx = agent_center.0 - patient_center.0;
    let dy_up = -(agent_center.1 - patient_center.1);
    let sector = direction_sector(wrap_angle(dy_up.atan2(dx)));
    SPATIAL_RELATIONS[sector]
}

const HUE_WORDS: [(f64, &str); 6] = [
    (0.0, "red"),
    (60.0, "yellow"),
    (120.0, "green"),
    (180.0, "teal"),
    (240.0, "blue"),
    (300.0, "pink"),
];

/// Color word from mean HSV: black below V 0.2, white above V 0.8, else a
/// hue word when saturated enough, ties to the smaller hue center.
pub fn color_adjective(hsv: (f64, f64, f64)) -> Option<&'static str> {
    let (h, s, v) = hsv;
    if v <= 0.2 {
        return Some("black");
    }
    if v >= 0.8 {
        return Some("white");
    }
    if s < 0.7 {
        return None;
    }
    let mut best = "red";
    let mut best_d = f64::INFINITY;
    for (center, word) in HUE_WORDS {
        let raw = (h - center).abs() % 360.0;
        let d = raw.min(360.0 - raw);
        if d < best_d {
            best_d = d;
            best = word;
        }
    }
    Some(best)
}
