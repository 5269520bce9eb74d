//! Hidden Markov event classifiers with independent per-feature emissions
//! (discrete, Gaussian, or von Mises), role assignment by maximum
//! likelihood, present/absent thresholding, and ROC evaluation.

pub mod train;
pub mod von_mises;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{
    single_track_features, two_track_features, FeatureSchema, FeatureSeries, SchemaMask,
};
use crate::posture::PostureCodebook;
use crate::tracker::Track;
use von_mises::von_mises_log_density;

#[derive(Debug, Error)]
pub enum HmmError {
    #[error("feature series schema does not match the model schema")]
    SchemaMismatch,
    #[error("discrete value {value} out of range for cardinality {cardinality}")]
    DiscreteRange { value: f64, cardinality: usize },
    #[error("emission parameter count {got} does not match schema length {expected}")]
    EmissionArity { expected: usize, got: usize },
    #[error("zero total weight in circular fit")]
    ZeroWeight,
    #[error("no training series supplied")]
    EmptyTrainingSet,
    #[error("training series at index {index} does not match the schema")]
    TrainingSchemaMismatch { index: usize },
    #[error("ROC requires at least one positive and one negative label")]
    SingleClassLabels,
    #[error("no tracks to score")]
    NoTracks,
    #[error("feature error: {0}")]
    Feature(#[from] crate::features::FeatureError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("bad bank file {path}: {message}")]
    Format { path: String, message: String },
}

/// Per-feature output distribution of one hidden state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Emission {
    Discrete { log_probs: Vec<f64> },
    Gaussian { mean: f64, var: f64 },
    VonMises { mean_dir: f64, kappa: f64 },
}

impl Emission {
    pub fn log_density(&self, value: f64) -> Result<f64, HmmError> {
        match self {
            Emission::Discrete { log_probs } => {
                let idx = value as usize;
                if value < 0.0 || value.fract() != 0.0 || idx >= log_probs.len() {
                    return Err(HmmError::DiscreteRange {
                        value,
                        cardinality: log_probs.len(),
                    });
                }
                Ok(log_probs[idx])
            }
            Emission::Gaussian { mean, var } => {
                let d = value - mean;
                Ok(-0.5 * (2.0 * std::f64::consts::PI * var).ln() - d * d / (2.0 * var))
            }
            Emission::VonMises { mean_dir, kappa } => {
                Ok(von_mises_log_density(value, *mean_dir, *kappa))
            }
        }
    }
}

/// Sum of per-feature log-densities of one row under one state's emissions.
pub fn emission_log_density(state: &[Emission], row: &[f64]) -> Result<f64, HmmError> {
    if state.len() != row.len() {
        return Err(HmmError::EmissionArity {
            expected: row.len(),
            got: state.len(),
        });
    }
    let mut total = 0.0;
    for (em, &v) in state.iter().zip(row) {
        total += em.log_density(v)?;
    }
    Ok(total)
}

/// One trained classifier for one (action class, arity) key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmModel {
    #[serde(rename = "actionClass")]
    pub action_class: String,
    pub arity: u8,
    #[serde(rename = "nStates")]
    pub n_states: usize,
    /// Initial state log-probabilities.
    pub log_initial: Vec<f64>,
    /// Row-stochastic transition matrix, in log space.
    pub log_transition: Vec<Vec<f64>>,
    /// Per-state, per-feature emission parameters.
    pub states: Vec<Vec<Emission>>,
    pub schema: FeatureSchema,
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Exact log P(series | model) by the forward recurrence in log space.
pub fn forward_log_likelihood(model: &HmmModel, series: &FeatureSeries) -> Result<f64, HmmError> {
    if series.schema != model.schema {
        return Err(HmmError::SchemaMismatch);
    }
    let n = model.n_states;
    let mut alpha = vec![0.0; n];
    for (i, a) in alpha.iter_mut().enumerate() {
        *a = model.log_initial[i] + emission_log_density(&model.states[i], &series.frames[0])?;
    }
    let mut scratch = vec![0.0; n];
    for row in &series.frames[1..] {
        let mut next = vec![0.0; n];
        for (j, nj) in next.iter_mut().enumerate() {
            for i in 0..n {
                scratch[i] = alpha[i] + model.log_transition[i][j];
            }
            *nj = log_sum_exp(&scratch) + emission_log_density(&model.states[j], row)?;
        }
        alpha = next;
    }
    Ok(log_sum_exp(&alpha))
}

/// The trained bank: one model per (action class, arity), per-action
/// judgment thresholds, and the schema mask everything was trained under.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HmmBank {
    pub version: u32,
    #[serde(rename = "schemaMask")]
    pub schema_mask: SchemaMask,
    pub models: Vec<HmmModel>,
    /// Per-action present/absent thresholds on per-frame log-likelihood.
    pub thresholds: BTreeMap<String, f64>,
}

impl HmmBank {
    pub fn new(schema_mask: SchemaMask) -> Self {
        HmmBank {
            version: 1,
            schema_mask,
            models: Vec::new(),
            thresholds: BTreeMap::new(),
        }
    }

    /// Insert a model, replacing any existing model with the same key.
    pub fn insert(&mut self, model: HmmModel) {
        self.models
            .retain(|m| !(m.action_class == model.action_class && m.arity == model.arity));
        self.models.push(model);
        self.models
            .sort_by(|a, b| (&a.action_class, a.arity).cmp(&(&b.action_class, b.arity)));
    }

    pub fn get(&self, action: &str, arity: u8) -> Option<&HmmModel> {
        self.models
            .iter()
            .find(|m| m.action_class == action && m.arity == arity)
    }

    pub fn models_of_arity(&self, arity: u8) -> impl Iterator<Item = &HmmModel> {
        self.models.iter().filter(move |m| m.arity == arity)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), HmmError> {
        let path = path.as_ref();
        let text = serde_json::to_string(self).expect("bank serialization");
        fs::write(path, text).map_err(|source| HmmError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HmmError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| HmmError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| HmmError::Format {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// A scored (action, role-assignment) candidate for one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventHypothesis {
    #[serde(rename = "actionClass")]
    pub action_class: String,
    pub arity: u8,
    /// Index of the agent track in the scored track list.
    pub agent: usize,
    /// Index of the patient track; absent for one-track hypotheses.
    pub patient: Option<usize>,
    /// Total log-likelihood divided by the scored interval length.
    #[serde(rename = "perFrameLogLikelihood")]
    pub per_frame_log_likelihood: f64,
}

/// Result of scoring one video's tracks against the bank.
#[derive(Debug, Clone)]
pub struct ScoreOutcome {
    /// Hypotheses sorted by per-frame log-likelihood, descending.
    pub hypotheses: Vec<EventHypothesis>,
    /// Set when two or more tracks existed but no two-track model could be
    /// applied, forcing a fall back to the one-track models.
    pub fell_back_to_one_track: bool,
}

fn one_track_hypotheses(
    bank: &HmmBank,
    singles: &[Option<FeatureSeries>],
) -> Vec<EventHypothesis> {
    let mut hyps = Vec::new();
    for model in bank.models_of_arity(1) {
        let mut best: Option<EventHypothesis> = None;
        for (i, series) in singles.iter().enumerate() {
            let Some(series) = series else { continue };
            if series.schema != model.schema {
                continue;
            }
            let Ok(ll) = forward_log_likelihood(model, series) else {
                continue;
            };
            let per_frame = ll / series.len() as f64;
            if best
                .as_ref()
                .map_or(true, |b| per_frame > b.per_frame_log_likelihood)
            {
                best = Some(EventHypothesis {
                    action_class: model.action_class.clone(),
                    arity: 1,
                    agent: i,
                    patient: None,
                    per_frame_log_likelihood: per_frame,
                });
            }
        }
        if let Some(h) = best {
            hyps.push(h);
        }
    }
    hyps
}

/// Score every model of the appropriate arity against every admissible
/// track-to-role mapping and keep the best mapping per action class.
/// Videos with two or more tracks are tested against the two-track models
/// only, falling back to one-track models when no pair can be formed.
pub fn score_video(
    bank: &HmmBank,
    tracks: &[Track],
    codebook: Option<&PostureCodebook>,
    fps: f64,
) -> Result<ScoreOutcome, HmmError> {
    if tracks.is_empty() {
        return Err(HmmError::NoTracks);
    }
    let mask = bank.schema_mask;
    let singles: Vec<Option<FeatureSeries>> = tracks
        .iter()
        .map(|t| {
            single_track_features(t, codebook, fps)
                .ok()
                .map(|s| s.apply_mask(mask))
        })
        .collect();

    let mut hypotheses = Vec::new();
    let mut fell_back = false;
    if tracks.len() >= 2 {
        // Pair feature series cache keyed by (agent, patient).
        let mut pairs: BTreeMap<(usize, usize), Option<FeatureSeries>> = BTreeMap::new();
        for a in 0..tracks.len() {
            for p in 0..tracks.len() {
                if a == p {
                    continue;
                }
                let series = two_track_features(&tracks[a], &tracks[p], codebook, fps)
                    .ok()
                    .map(|s| s.apply_mask(mask));
                pairs.insert((a, p), series);
            }
        }
        for model in bank.models_of_arity(2) {
            let mut best: Option<EventHypothesis> = None;
            for ((a, p), series) in &pairs {
                let Some(series) = series else { continue };
                if series.schema != model.schema {
                    continue;
                }
                let Ok(ll) = forward_log_likelihood(model, series) else {
                    continue;
                };
                let per_frame = ll / series.len() as f64;
                if best
                    .as_ref()
                    .map_or(true, |b| per_frame > b.per_frame_log_likelihood)
                {
                    best = Some(EventHypothesis {
                        action_class: model.action_class.clone(),
                        arity: 2,
                        agent: *a,
                        patient: Some(*p),
                        per_frame_log_likelihood: per_frame,
                    });
                }
            }
            if let Some(h) = best {
                hypotheses.push(h);
            }
        }
        if hypotheses.is_empty() {
            fell_back = true;
            hypotheses = one_track_hypotheses(bank, &singles);
        }
    } else {
        hypotheses = one_track_hypotheses(bank, &singles);
    }
    hypotheses.sort_by(|a, b| {
        b.per_frame_log_likelihood
            .partial_cmp(&a.per_frame_log_likelihood)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.action_class.cmp(&b.action_class))
    });
    Ok(ScoreOutcome {
        hypotheses,
        fell_back_to_one_track: fell_back,
    })
}

/// Present/absent judgment per action: present iff the best per-frame
/// log-likelihood for the action reaches its threshold.
pub fn judge(bank: &HmmBank, hypotheses: &[EventHypothesis]) -> BTreeMap<String, bool> {
    let mut best: BTreeMap<&str, f64> = BTreeMap::new();
    for h in hypotheses {
        let entry = best
            .entry(h.action_class.as_str())
            .or_insert(f64::NEG_INFINITY);
        if h.per_frame_log_likelihood > *entry {
            *entry = h.per_frame_log_likelihood;
        }
    }
    bank.thresholds
        .iter()
        .map(|(action, &threshold)| {
            let score = best.get(action.as_str()).copied().unwrap_or(f64::NEG_INFINITY);
            (action.clone(), score >= threshold)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// (false-positive rate, true-positive rate), monotone in fpr, from
    /// (0, 0) to (1, 1).
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// Threshold sweep over the distinct score values; area by the trapezoid
/// rule (equivalently the tie-corrected rank statistic).
pub fn roc_curve(scores: &[(f64, bool)]) -> Result<RocCurve, HmmError> {
    let positives = scores.iter().filter(|(_, l)| *l).count();
    let negatives = scores.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(HmmError::SingleClassLabels);
    }
    let mut sorted: Vec<(f64, bool)> = scores.to_vec();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));

    let mut points = vec![(0.0, 0.0)];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < sorted.len() {
        let score = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == score {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / negatives as f64, tp as f64 / positives as f64));
    }
    let mut auc = 0.0;
    for w in points.windows(2) {
        auc += (w[1].0 - w[0].0) * (w[1].1 + w[0].1) * 0.5;
    }
    Ok(RocCurve { points, auc })
}
