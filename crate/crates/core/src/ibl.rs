//! Instance-based learning with optional mutual-information attention.
//!
//! Activation of instance `i` queried with option `q` at time `t`:
//!
//! ```text
//! A_i(t) = ln Σ_{t' ∈ T_i} (t - t')^(-d)  +  μ Σ_j w_j (S_ij - 1)  +  σ ξ
//! ```
//!
//! `S_ij` is 1 when the instance matches the query on dimension `j` and 0
//! otherwise. The blended value of `q` is the mean of instance utilities
//! weighted by `softmax(A / τ)` over the whole memory.
//!
//! With attention enabled (`wibl`) the weights `w_j` are a softmax, with
//! inverse temperature `τ_w`, of the mutual information between each
//! dimension and the binned utility over every stored occurrence.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::env::{FeedbackEvent, OptionStimulus, Trial};
use crate::learner::{argmax_random_tie, sample_index, softmax, Learner};
use crate::mi::{mi_per_dimension, Binning};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    /// `ξ = ln((1 - u) / u)`, `u ~ U(0, 1)`.
    Logistic,
    Gaussian,
    /// `ξ ~ U(-1, 1)`.
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChoiceRule {
    Argmax,
    Softmax,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightPolicy {
    /// Weights are the softmax of per-dimension MI, recomputed every trial.
    Softmax,
    /// Weights move toward the raw MI: `w += rate * (I - w)`.
    Iterative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IblConfig {
    /// Power-law memory decay `d`.
    pub decay: f64,
    /// Activation noise scale `σ`.
    pub noise: f64,
    pub noise_kind: NoiseKind,
    /// Blending temperature `τ`; `σ√2` when unset.
    pub temperature: Option<f64>,
    /// Mismatch penalty `μ`. Weights sum to one, so the default of 3 charges
    /// one unit per mismatched dimension under uniform attention.
    pub mismatch_penalty: f64,
    /// Inverse temperature of the MI softmax.
    pub attention_temperature: f64,
    /// Whether memory starts with a wildcard instance.
    pub prepopulate: bool,
    /// Utility of the wildcard instance.
    pub default_utility: f64,
    pub choice_rule: ChoiceRule,
    /// Inverse temperature for [`ChoiceRule::Softmax`].
    pub choice_inverse_temperature: f64,
    pub weight_policy: WeightPolicy,
    /// Step size for [`WeightPolicy::Iterative`].
    pub weight_rate: f64,
    pub binning: Binning,
    /// Set from the model kind, never read from a config file.
    #[serde(skip)]
    pub weights_enabled: bool,
}

impl Default for IblConfig {
    fn default() -> Self {
        Self {
            decay: 0.5,
            noise: 0.25,
            noise_kind: NoiseKind::Logistic,
            temperature: None,
            mismatch_penalty: 3.0,
            attention_temperature: 20.0,
            prepopulate: true,
            default_utility: 1.0,
            choice_rule: ChoiceRule::Argmax,
            choice_inverse_temperature: 5.0,
            weight_policy: WeightPolicy::Softmax,
            weight_rate: 0.3,
            binning: Binning::default(),
            weights_enabled: false,
        }
    }
}

impl IblConfig {
    pub fn weighted() -> Self {
        Self {
            weights_enabled: true,
            ..Self::default()
        }
    }

    pub fn temperature(&self) -> f64 {
        self.temperature.unwrap_or(self.noise * std::f64::consts::SQRT_2)
    }

    pub fn validate(&self, block: &str) -> Result<()> {
        let bad = |key: &str, why: &str| Err(Error::Config(format!("{block}.{key}: {why}")));
        if !(self.decay >= 0.0 && self.decay.is_finite()) {
            return bad("decay", "must be finite and non-negative");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad("noise", "must be finite and non-negative");
        }
        let tau = self.temperature();
        if !(tau > 0.0 && tau.is_finite()) {
            return bad("temperature", "must be positive (set it explicitly when noise = 0)");
        }
        if !(self.mismatch_penalty >= 0.0 && self.mismatch_penalty.is_finite()) {
            return bad("mismatch_penalty", "must be finite and non-negative");
        }
        if !(self.attention_temperature >= 0.0 && self.attention_temperature.is_finite()) {
            return bad("attention_temperature", "must be finite and non-negative");
        }
        if !self.default_utility.is_finite() {
            return bad("default_utility", "must be finite");
        }
        if !(self.choice_inverse_temperature >= 0.0 && self.choice_inverse_temperature.is_finite()) {
            return bad("choice_inverse_temperature", "must be finite and non-negative");
        }
        if !(self.weight_rate > 0.0 && self.weight_rate <= 1.0) {
            return bad("weight_rate", "must lie in (0, 1]");
        }
        if let Err(why) = self.binning.validate() {
            return bad("binning", &why);
        }
        Ok(())
    }
}

/// What an instance's features match against.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Pattern {
    /// Matches every query on every dimension.
    Wildcard,
    Exact(OptionStimulus),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub pattern: Pattern,
    pub utility: f64,
    /// Strictly increasing occurrence times.
    pub occurrences: Vec<usize>,
}

/// Per-dimension exact-match similarity (1 or 0).
pub fn similarity(query: &OptionStimulus, pattern: &Pattern) -> Vec<f64> {
    match pattern {
        Pattern::Wildcard => vec![1.0; query.num_dimensions()],
        Pattern::Exact(features) => query
            .values
            .iter()
            .zip(&features.values)
            .map(|(a, b)| if a == b { 1.0 } else { 0.0 })
            .collect(),
    }
}

/// `Σ_j w_j (S_j - 1)`: minus the total weight of the mismatched dimensions.
fn weighted_mismatch(query: &OptionStimulus, pattern: &Pattern, weights: &[f64]) -> f64 {
    match pattern {
        Pattern::Wildcard => 0.0,
        Pattern::Exact(features) => -query
            .values
            .iter()
            .zip(&features.values)
            .zip(weights)
            .filter(|((a, b), _)| a != b)
            .map(|(_, w)| w)
            .sum::<f64>(),
    }
}

fn draw_noise<R: Rng + ?Sized>(kind: NoiseKind, rng: &mut R) -> f64 {
    match kind {
        NoiseKind::Logistic => {
            let u: f64 = Open01.sample(rng);
            ((1.0 - u) / u).ln()
        }
        NoiseKind::Gaussian => StandardNormal.sample(rng),
        NoiseKind::Uniform => rng.random_range(-1.0..1.0),
    }
}

/// Log power-law recency `ln Σ (t - t')^(-d)`.
pub fn recency(occurrences: &[usize], t: usize, decay: f64) -> Result<f64> {
    let mut sum = 0.0;
    for &o in occurrences {
        if o >= t {
            return Err(Error::OccurrenceNotBeforeQuery {
                occurrence: o,
                query: t,
            });
        }
        sum += ((t - o) as f64).powf(-decay);
    }
    Ok(sum.ln())
}

/// Activation of `instance` for `query` at time `t`, drawing fresh noise.
pub fn activation<R: Rng + ?Sized>(
    instance: &Instance,
    query: &OptionStimulus,
    weights: &[f64],
    t: usize,
    config: &IblConfig,
    rng: &mut R,
) -> Result<f64> {
    let mut a = recency(&instance.occurrences, t, config.decay)?;
    a += config.mismatch_penalty * weighted_mismatch(query, &instance.pattern, weights);
    if config.noise > 0.0 {
        a += config.noise * draw_noise(config.noise_kind, rng);
    }
    Ok(a)
}

/// Retrieval-weighted mean utility for a set of activations.
pub fn blend(activations: &[f64], utilities: &[f64], temperature: f64) -> f64 {
    softmax(activations, 1.0 / temperature)
        .iter()
        .zip(utilities)
        .map(|(p, u)| p * u)
        .sum()
}

#[derive(Clone, Debug, Default)]
pub struct InstanceMemory {
    instances: Vec<Instance>,
    index: HashMap<(OptionStimulus, i64), usize>,
}

fn utility_key(u: f64) -> i64 {
    (u * 1e6).trunc() as i64
}

impl InstanceMemory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Memory holding only the wildcard instance, or empty when no default
    /// utility is configured.
    pub fn prepopulated(default_utility: Option<f64>) -> Self {
        let mut m = Self::new();
        if let Some(u) = default_utility {
            m.instances.push(Instance {
                pattern: Pattern::Wildcard,
                utility: u,
                occurrences: vec![0],
            });
        }
        m
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    /// Stores one occurrence, merging with an instance of identical features
    /// and utility (compared after truncation to 6 decimals).
    pub fn record(&mut self, option: &OptionStimulus, utility: f64, time: usize) -> Result<()> {
        if time == 0 {
            return Err(Error::Inconsistent("occurrence times start at 1".into()));
        }
        let key = (option.clone(), utility_key(utility));
        match self.index.get(&key) {
            Some(&i) => {
                let occ = &mut self.instances[i].occurrences;
                match occ.binary_search(&time) {
                    Ok(_) => {
                        return Err(Error::Inconsistent(format!(
                            "duplicate occurrence at time {time} for {:?}",
                            option.values
                        )))
                    }
                    Err(pos) => occ.insert(pos, time),
                }
            }
            None => {
                self.index.insert(key, self.instances.len());
                self.instances.push(Instance {
                    pattern: Pattern::Exact(option.clone()),
                    utility,
                    occurrences: vec![time],
                });
            }
        }
        Ok(())
    }

    /// Every stored occurrence of a non-wildcard instance as `(features, utility)`.
    pub fn occurrences(&self) -> impl Iterator<Item = (&OptionStimulus, f64)> + '_ {
        self.instances.iter().flat_map(|inst| {
            let features = match &inst.pattern {
                Pattern::Exact(f) => Some(f),
                Pattern::Wildcard => None,
            };
            features
                .into_iter()
                .flat_map(move |f| inst.occurrences.iter().map(move |_| (f, inst.utility)))
        })
    }

    /// Activations of every instance for `query`, in storage order.
    pub fn activations<R: Rng + ?Sized>(
        &self,
        query: &OptionStimulus,
        weights: &[f64],
        t: usize,
        config: &IblConfig,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        self.instances
            .iter()
            .map(|inst| activation(inst, query, weights, t, config, rng))
            .collect()
    }

    pub fn blended_value<R: Rng + ?Sized>(
        &self,
        query: &OptionStimulus,
        weights: &[f64],
        t: usize,
        config: &IblConfig,
        rng: &mut R,
    ) -> Result<f64> {
        if self.instances.is_empty() {
            return Err(Error::EmptyMemory);
        }
        let a = self.activations(query, weights, t, config, rng)?;
        let u: Vec<f64> = self.instances.iter().map(|i| i.utility).collect();
        Ok(blend(&a, &u, config.temperature()))
    }
}

/// Per-dimension attention weights on the simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionWeights(pub Vec<f64>);

impl AttentionWeights {
    pub fn uniform(num_dimensions: usize) -> Self {
        Self(vec![1.0 / num_dimensions as f64; num_dimensions])
    }

    /// `w_j = exp(τ_w I_j) / Σ_k exp(τ_w I_k)`.
    pub fn from_information(information: &[f64], attention_temperature: f64) -> Self {
        Self(softmax(information, attention_temperature))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// MI-derived attention over the whole memory; uniform when attention is
/// disabled or no real instance has been stored yet.
pub fn compute_attention(memory: &InstanceMemory, num_dimensions: usize, config: &IblConfig) -> AttentionWeights {
    if !config.weights_enabled || memory.occurrences().next().is_none() {
        return AttentionWeights::uniform(num_dimensions);
    }
    let info = mi_per_dimension(memory.occurrences(), num_dimensions, &config.binning);
    AttentionWeights::from_information(&info, config.attention_temperature)
}

#[derive(Debug)]
pub struct IblModel {
    config: IblConfig,
    num_dimensions: usize,
    memory: InstanceMemory,
    weights: Vec<f64>,
    rng: ChaCha8Rng,
}

impl IblModel {
    pub fn new(config: IblConfig, num_dimensions: usize, seed: u64) -> Self {
        Self {
            memory: InstanceMemory::prepopulated(config.prepopulate.then_some(config.default_utility)),
            weights: AttentionWeights::uniform(num_dimensions).0,
            config,
            num_dimensions,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn memory(&self) -> &InstanceMemory {
        &self.memory
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn blended_values(&mut self, trial: &Trial) -> Result<Vec<f64>> {
        trial
            .options
            .iter()
            .map(|o| {
                self.memory
                    .blended_value(o, &self.weights, trial.index, &self.config, &mut self.rng)
            })
            .collect()
    }

    fn record(&mut self, option: &OptionStimulus, utility: f64, time: usize) -> Result<()> {
        if option.num_dimensions() != self.num_dimensions {
            return Err(Error::Inconsistent(format!(
                "option {:?} has {} dimensions, expected {}",
                option.values,
                option.num_dimensions(),
                self.num_dimensions
            )));
        }
        self.memory.record(option, utility, time)
    }
}

fn chosen(trial: &Trial, choice: usize) -> Result<&OptionStimulus> {
    trial
        .options
        .get(choice)
        .ok_or_else(|| Error::Inconsistent(format!("trial {}: choice {choice} out of range", trial.index)))
}

impl Learner for IblModel {
    fn prepare(&mut self, _trial_index: usize) -> Result<()> {
        if !self.config.weights_enabled {
            return Ok(());
        }
        match self.config.weight_policy {
            WeightPolicy::Softmax => {
                self.weights = compute_attention(&self.memory, self.num_dimensions, &self.config).0;
            }
            WeightPolicy::Iterative => {
                if self.memory.occurrences().next().is_some() {
                    let info = mi_per_dimension(self.memory.occurrences(), self.num_dimensions, &self.config.binning);
                    let rate = self.config.weight_rate;
                    for (w, i) in self.weights.iter_mut().zip(info) {
                        *w += rate * (i - *w);
                    }
                }
            }
        }
        Ok(())
    }

    fn choose(&mut self, trial: &Trial) -> Result<usize> {
        let values = self.blended_values(trial)?;
        Ok(match self.config.choice_rule {
            ChoiceRule::Argmax => argmax_random_tie(&values, &mut self.rng),
            ChoiceRule::Softmax => {
                let p = softmax(&values, self.config.choice_inverse_temperature);
                sample_index(&p, &mut self.rng)
            }
        })
    }

    fn observe(&mut self, event: &FeedbackEvent) -> Result<()> {
        match event {
            FeedbackEvent::Immediate { trial, choice, outcome } => {
                let option = chosen(trial, *choice)?;
                self.record(option, *outcome, trial.index)
            }
            FeedbackEvent::Counterfactual {
                trial,
                choice,
                outcomes,
            } => {
                chosen(trial, *choice)?;
                if outcomes.len() != trial.options.len() {
                    return Err(Error::Inconsistent(format!(
                        "trial {}: {} outcomes for {} options",
                        trial.index,
                        outcomes.len(),
                        trial.options.len()
                    )));
                }
                for (option, &u) in trial.options.iter().zip(outcomes) {
                    self.record(option, u, trial.index)?;
                }
                Ok(())
            }
            FeedbackEvent::Delayed { sum, steps } => {
                if steps.is_empty() {
                    return Err(Error::Inconsistent("empty delayed cluster".into()));
                }
                let credit = FeedbackEvent::credited_reward(*sum, steps.len());
                for step in steps {
                    let option = chosen(&step.trial, step.choice)?;
                    self.record(option, credit, step.trial.index)?;
                }
                Ok(())
            }
        }
    }
}
