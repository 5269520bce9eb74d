//! Baum-Welch EM for the mixed-emission HMMs: forward-backward in log
//! space, closed-form per-family M-steps, multiple seeded restarts.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::von_mises::fit_von_mises;
use super::{emission_log_density, Emission, HmmError, HmmModel};
use crate::features::{FeatureKind, FeatureSchema, FeatureSeries};

/// Log-probability floor; keeps serialized parameters finite while adding
/// only ~1e-304 of probability mass.
const LOG_FLOOR: f64 = -700.0;

#[derive(Debug, Clone, Copy)]
pub struct TrainOptions {
    pub n_states: usize,
    pub restarts: usize,
    pub max_iter: usize,
    /// Stop when the total log-likelihood improves by less than this.
    pub tol: f64,
    pub seed: u64,
    /// Gaussian variance floor.
    pub var_floor: f64,
    /// Add-lambda smoothing for discrete emissions.
    pub add_lambda: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            n_states: 10,
            restarts: 3,
            max_iter: 100,
            tol: 1e-4,
            seed: 0,
            var_floor: 1e-4,
            add_lambda: 1.0,
        }
    }
}

fn log_sum_exp_pairwise(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn floored_ln(p: f64) -> f64 {
    if p <= 0.0 {
        LOG_FLOOR
    } else {
        p.ln().max(LOG_FLOOR)
    }
}

/// Per-feature weighted sufficient statistics for one state.
#[derive(Clone)]
enum EmissionStats {
    Discrete { counts: Vec<f64> },
    Gaussian { w: f64, wx: f64, wxx: f64 },
    VonMises { angles: Vec<f64>, weights: Vec<f64> },
}

impl EmissionStats {
    fn new(kind: &FeatureKind) -> Self {
        match kind {
            FeatureKind::Discrete { cardinality } => EmissionStats::Discrete {
                counts: vec![0.0; *cardinality],
            },
            FeatureKind::Linear => EmissionStats::Gaussian {
                w: 0.0,
                wx: 0.0,
                wxx: 0.0,
            },
            FeatureKind::Angular => EmissionStats::VonMises {
                angles: Vec::new(),
                weights: Vec::new(),
            },
        }
    }

    fn add(&mut self, value: f64, weight: f64) {
        match self {
            EmissionStats::Discrete { counts } => counts[value as usize] += weight,
            EmissionStats::Gaussian { w, wx, wxx } => {
                *w += weight;
                *wx += weight * value;
                *wxx += weight * value * value;
            }
            EmissionStats::VonMises { angles, weights } => {
                angles.push(value);
                weights.push(weight);
            }
        }
    }

    fn finish(self, opts: &TrainOptions, previous: &Emission) -> Emission {
        match self {
            EmissionStats::Discrete { counts } => {
                let lambda = opts.add_lambda;
                let total: f64 = counts.iter().sum::<f64>() + lambda * counts.len() as f64;
                Emission::Discrete {
                    log_probs: counts.iter().map(|c| ((c + lambda) / total).ln()).collect(),
                }
            }
            EmissionStats::Gaussian { w, wx, wxx } => {
                if w <= 1e-12 {
                    return previous.clone();
                }
                let mean = wx / w;
                let var = (wxx / w - mean * mean).max(opts.var_floor);
                Emission::Gaussian { mean, var }
            }
            EmissionStats::VonMises { angles, weights } => {
                match fit_von_mises(&angles, &weights) {
                    Ok((mean_dir, kappa)) => Emission::VonMises { mean_dir, kappa },
                    Err(_) => previous.clone(),
                }
            }
        }
    }
}

/// Closed-form fit of one emission from unweighted values; used for
/// block initialization.
fn fit_emission(kind: &FeatureKind, values: &[f64], opts: &TrainOptions) -> Emission {
    let mut stats = EmissionStats::new(kind);
    for &v in values {
        stats.add(v, 1.0);
    }
    let fallback = match kind {
        FeatureKind::Discrete { cardinality } => Emission::Discrete {
            log_probs: vec![(1.0 / *cardinality as f64).ln(); *cardinality],
        },
        FeatureKind::Linear => Emission::Gaussian { mean: 0.0, var: 1.0 },
        FeatureKind::Angular => Emission::VonMises {
            mean_dir: 0.0,
            kappa: 0.0,
        },
    };
    stats.finish(opts, &fallback)
}

fn dirichlet_log_row(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    // Uniform Dirichlet via normalized exponentials.
    let raw: Vec<f64> = (0..n)
        .map(|_| -(rng.gen_range(0.0f64..1.0).max(1e-12)).ln())
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.iter().map(|x| floored_ln(x / sum)).collect()
}

/// Initial model: random ergodic transitions, emissions fitted on equal
/// temporal blocks of the training series.
fn initial_model(
    data: &[FeatureSeries],
    schema: &FeatureSchema,
    opts: &TrainOptions,
    rng: &mut ChaCha8Rng,
    action: &str,
    arity: u8,
) -> HmmModel {
    let n = opts.n_states;
    let mut states = Vec::with_capacity(n);
    for state in 0..n {
        let mut emissions = Vec::with_capacity(schema.len());
        for (f, desc) in schema.features.iter().enumerate() {
            let mut values = Vec::new();
            for series in data {
                let t_max = series.len();
                let lo = state * t_max / n;
                let hi = ((state + 1) * t_max / n).max(lo + 1).min(t_max);
                for row in &series.frames[lo..hi] {
                    values.push(row[f]);
                }
            }
            if values.is_empty() {
                for series in data {
                    for row in &series.frames {
                        values.push(row[f]);
                    }
                }
            }
            emissions.push(fit_emission(&desc.kind, &values, opts));
        }
        states.push(emissions);
    }
    HmmModel {
        action_class: action.to_string(),
        arity,
        n_states: n,
        log_initial: dirichlet_log_row(rng, n),
        log_transition: (0..n).map(|_| dirichlet_log_row(rng, n)).collect(),
        states,
        schema: schema.clone(),
    }
}

struct EStep {
    log_likelihood: f64,
    initial: Vec<f64>,
    transition: Vec<Vec<f64>>,
    emission_stats: Vec<Vec<EmissionStats>>,
}

fn e_step(model: &HmmModel, data: &[FeatureSeries]) -> Result<EStep, HmmError> {
    let n = model.n_states;
    let mut total_ll = 0.0;
    let mut initial = vec![0.0; n];
    let mut transition = vec![vec![0.0; n]; n];
    let mut emission_stats: Vec<Vec<EmissionStats>> = (0..n)
        .map(|_| {
            model
                .schema
                .features
                .iter()
                .map(|d| EmissionStats::new(&d.kind))
                .collect()
        })
        .collect();

    let mut scratch = vec![0.0; n];
    for series in data {
        let t_max = series.len();
        // Per-frame emission log-densities.
        let mut emit = vec![vec![0.0; n]; t_max];
        for (t, row) in series.frames.iter().enumerate() {
            for i in 0..n {
                emit[t][i] = emission_log_density(&model.states[i], row)?;
            }
        }
        // Forward.
        let mut alpha = vec![vec![f64::NEG_INFINITY; n]; t_max];
        for i in 0..n {
            alpha[0][i] = model.log_initial[i] + emit[0][i];
        }
        for t in 1..t_max {
            for j in 0..n {
                for i in 0..n {
                    scratch[i] = alpha[t - 1][i] + model.log_transition[i][j];
                }
                alpha[t][j] = log_sum_exp(&scratch) + emit[t][j];
            }
        }
        let series_ll = log_sum_exp(&alpha[t_max - 1]);
        total_ll += series_ll;
        // Backward.
        let mut beta = vec![vec![0.0; n]; t_max];
        for t in (0..t_max - 1).rev() {
            for i in 0..n {
                for j in 0..n {
                    scratch[j] = model.log_transition[i][j] + emit[t + 1][j] + beta[t + 1][j];
                }
                beta[t][i] = log_sum_exp(&scratch);
            }
        }
        // Accumulate posteriors.
        for t in 0..t_max {
            for i in 0..n {
                let gamma = (alpha[t][i] + beta[t][i] - series_ll).exp();
                if t == 0 {
                    initial[i] += gamma;
                }
                for (f, stat) in emission_stats[i].iter_mut().enumerate() {
                    stat.add(series.frames[t][f], gamma);
                }
            }
        }
        for t in 1..t_max {
            for i in 0..n {
                for j in 0..n {
                    let xi = (alpha[t - 1][i]
                        + model.log_transition[i][j]
                        + emit[t][j]
                        + beta[t][j]
                        - series_ll)
                        .exp();
                    transition[i][j] += xi;
                }
            }
        }
    }
    Ok(EStep {
        log_likelihood: total_ll,
        initial,
        transition,
        emission_stats,
    })
}

fn m_step(model: &mut HmmModel, step: EStep, opts: &TrainOptions) {
    let n = model.n_states;
    let init_total: f64 = step.initial.iter().sum();
    if init_total > 0.0 {
        for i in 0..n {
            model.log_initial[i] = floored_ln(step.initial[i] / init_total);
        }
    }
    for i in 0..n {
        let row_total: f64 = step.transition[i].iter().sum();
        if row_total > 0.0 {
            for j in 0..n {
                model.log_transition[i][j] = floored_ln(step.transition[i][j] / row_total);
            }
        } else {
            // State unreachable before the final frame; keep it ergodic.
            for j in 0..n {
                model.log_transition[i][j] = (1.0 / n as f64).ln();
            }
        }
    }
    for (i, stats) in step.emission_stats.into_iter().enumerate() {
        for (f, stat) in stats.into_iter().enumerate() {
            let updated = stat.finish(opts, &model.states[i][f]);
            model.states[i][f] = updated;
        }
    }
}

fn run_em(
    data: &[FeatureSeries],
    schema: &FeatureSchema,
    opts: &TrainOptions,
    rng: &mut ChaCha8Rng,
    action: &str,
    arity: u8,
) -> Result<(HmmModel, Vec<f64>), HmmError> {
    let mut model = initial_model(data, schema, opts, rng, action, arity);
    let mut history: Vec<f64> = Vec::new();
    let mut prev_model: Option<HmmModel> = None;
    let mut iterations = 0;
    loop {
        let step = e_step(&model, data)?;
        let ll = step.log_likelihood;
        match history.last().copied() {
            // The smoothed discrete update and the approximate von Mises
            // concentration update are not exact M-steps; reject any step
            // that lowers the likelihood and keep the previous parameters.
            Some(prev) if ll < prev => {
                model = prev_model.take().expect("a rejected step has a predecessor");
                break;
            }
            Some(prev) => {
                history.push(ll);
                if ll - prev < opts.tol {
                    break;
                }
            }
            None => history.push(ll),
        }
        iterations += 1;
        if iterations >= opts.max_iter {
            break;
        }
        prev_model = Some(model.clone());
        m_step(&mut model, step, opts);
    }
    Ok((model, history))
}

/// Train one HMM by EM with seeded restarts, returning the model with the
/// best final training log-likelihood and the per-iteration log-likelihood
/// history of every restart.
pub fn baum_welch_train_with_history(
    data: &[FeatureSeries],
    schema: &FeatureSchema,
    opts: &TrainOptions,
    action: &str,
    arity: u8,
) -> Result<(HmmModel, Vec<Vec<f64>>), HmmError> {
    if data.is_empty() {
        return Err(HmmError::EmptyTrainingSet);
    }
    for (index, series) in data.iter().enumerate() {
        if &series.schema != schema || series.is_empty() {
            return Err(HmmError::TrainingSchemaMismatch { index });
        }
    }
    let mut best: Option<(HmmModel, f64)> = None;
    let mut histories = Vec::with_capacity(opts.restarts);
    for restart in 0..opts.restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(restart as u64));
        let (model, history) = run_em(data, schema, opts, &mut rng, action, arity)?;
        let final_ll = *history.last().expect("history nonempty");
        if best.as_ref().map_or(true, |(_, ll)| final_ll > *ll) {
            best = Some((model, final_ll));
        }
        histories.push(history);
    }
    Ok((best.unwrap().0, histories))
}

/// Train one HMM by EM with seeded restarts.
pub fn baum_welch_train(
    data: &[FeatureSeries],
    schema: &FeatureSchema,
    opts: &TrainOptions,
    action: &str,
    arity: u8,
) -> Result<HmmModel, HmmError> {
    baum_welch_train_with_history(data, schema, opts, action, arity).map(|(m, _)| m)
}

/// Draw a sample path and observations from a model; test and synthetic
/// tooling for generator-oracle checks.
pub fn sample_series(model: &HmmModel, frames: usize, fps: f64, rng: &mut ChaCha8Rng) -> FeatureSeries {
    let n = model.n_states;
    let pick = |log_probs: &[f64], rng: &mut ChaCha8Rng| -> usize {
        let u: f64 = rng.gen_range(0.0..1.0);
        let mut acc = 0.0;
        for (i, lp) in log_probs.iter().enumerate() {
            acc += lp.exp();
            if u < acc {
                return i;
            }
        }
        n - 1
    };
    let mut state = pick(&model.log_initial, rng);
    let mut rows = Vec::with_capacity(frames);
    for t in 0..frames {
        if t > 0 {
            state = pick(&model.log_transition[state], rng);
        }
        let row: Vec<f64> = model.states[state]
            .iter()
            .map(|em| match em {
                Emission::Discrete { log_probs } => pick(log_probs, rng) as f64,
                Emission::Gaussian { mean, var } => {
                    let std = var.sqrt();
                    let (u1, u2): (f64, f64) = (rng.gen_range(1e-12..1.0), rng.gen_range(0.0..1.0));
                    mean + std * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
                }
                Emission::VonMises { mean_dir, kappa } => {
                    sample_von_mises(*mean_dir, *kappa, rng)
                }
            })
            .collect();
        rows.push(row);
    }
    FeatureSeries {
        schema: model.schema.clone(),
        fps,
        frames: rows,
    }
}

/// Best-Fisher rejection sampler for the von Mises distribution.
pub fn sample_von_mises(mean_dir: f64, kappa: f64, rng: &mut ChaCha8Rng) -> f64 {
    use std::f64::consts::PI;
    if kappa < 1e-9 {
        return rng.gen_range(-PI..PI);
    }
    let a = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let b = (a - (2.0 * a).sqrt()) / (2.0 * kappa);
    let r = (1.0 + b * b) / (2.0 * b);
    loop {
        let u1: f64 = rng.gen_range(0.0..1.0);
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        let u2: f64 = rng.gen_range(0.0..1.0);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let u3: f64 = rng.gen_range(0.0..1.0);
            let sign = if u3 > 0.5 { 1.0 } else { -1.0 };
            return crate::features::wrap_angle(mean_dir + sign * f.acos());
        }
    }
}

/// Keep the pairwise helper alive for tests that exercise tiny sums.
#[allow(dead_code)]
fn lse2(a: f64, b: f64) -> f64 {
    log_sum_exp_pairwise(a, b)
}
