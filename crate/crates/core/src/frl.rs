//! Feature reinforcement learning.
//!
//! Option value is the (optionally weighted) sum of the learned values of its
//! features. Chosen features move toward the reward by the delta rule,
//! presented-but-unchosen features decay multiplicatively, and choices are
//! drawn from a softmax. With weights enabled (the `wrl` variant) every
//! dimension weight also moves toward the reward.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{FeedbackEvent, OptionStimulus, Trial};
use crate::learner::{sample_index, softmax, Learner};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrlConfig {
    /// Feature learning rate.
    pub alpha: f64,
    /// Retention factor applied to unchosen presented features.
    pub decay: f64,
    /// Softmax inverse temperature.
    pub tau: f64,
    /// Weight learning rate (weighted variant only).
    pub alpha_w: f64,
    pub initial_value: f64,
    /// Set from the model kind, never read from a config file.
    #[serde(skip)]
    pub weights_enabled: bool,
}

impl Default for FrlConfig {
    fn default() -> Self {
        Self {
            alpha: 0.15,
            decay: 0.5,
            tau: 15.0,
            alpha_w: 0.3,
            initial_value: 0.0,
            weights_enabled: false,
        }
    }
}

impl FrlConfig {
    pub fn weighted() -> Self {
        Self {
            weights_enabled: true,
            ..Self::default()
        }
    }

    pub fn validate(&self, block: &str) -> Result<()> {
        let bad = |key: &str, why: &str| Err(Error::Config(format!("{block}.{key}: {why}")));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha", "must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.decay) {
            return bad("decay", "must lie in [0, 1]");
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return bad("tau", "must be finite and non-negative");
        }
        if !(self.alpha_w > 0.0 && self.alpha_w <= 1.0) {
            return bad("alpha_w", "must lie in (0, 1]");
        }
        if !self.initial_value.is_finite() {
            return bad("initial_value", "must be finite");
        }
        Ok(())
    }
}

/// Learned value per (dimension, value) pair plus one weight per dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureValueTable {
    values_per_dimension: usize,
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl FeatureValueTable {
    pub fn new(num_dimensions: usize, values_per_dimension: usize, initial_value: f64) -> Self {
        Self {
            values_per_dimension,
            values: vec![initial_value; num_dimensions * values_per_dimension],
            weights: vec![1.0 / num_dimensions as f64; num_dimensions],
        }
    }

    pub fn num_dimensions(&self) -> usize {
        self.weights.len()
    }

    pub fn value(&self, dimension: usize, value: usize) -> f64 {
        self.values[self.slot(dimension, value)]
    }

    pub fn set_value(&mut self, dimension: usize, value: usize, v: f64) {
        let i = self.slot(dimension, value);
        self.values[i] = v;
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn set_weights(&mut self, weights: &[f64]) {
        self.weights.copy_from_slice(weights);
    }

    fn slot(&self, dimension: usize, value: usize) -> usize {
        debug_assert!(value < self.values_per_dimension);
        dimension * self.values_per_dimension + value
    }

    fn check(&self, option: &OptionStimulus) -> Result<()> {
        if option.values.len() != self.num_dimensions() || option.values.iter().any(|&v| v >= self.values_per_dimension)
        {
            return Err(Error::Inconsistent(format!(
                "option {:?} does not fit a {}x{} feature table",
                option.values,
                self.num_dimensions(),
                self.values_per_dimension
            )));
        }
        Ok(())
    }

    /// `Σ_d w_d v[d, option_d]`, or the plain sum with weights disabled.
    pub fn option_value(&self, option: &OptionStimulus, weights_enabled: bool) -> f64 {
        option
            .values
            .iter()
            .enumerate()
            .map(|(d, &v)| {
                let w = if weights_enabled { self.weights[d] } else { 1.0 };
                w * self.value(d, v)
            })
            .sum()
    }

    pub fn update_chosen(&mut self, option: &OptionStimulus, reward: f64, alpha: f64) {
        for (d, &v) in option.values.iter().enumerate() {
            let i = self.slot(d, v);
            self.values[i] += alpha * (reward - self.values[i]);
        }
    }

    /// Multiplies by `delta` every feature shown on an unchosen option that the
    /// chosen option does not share. Each such feature decays once.
    pub fn decay_unchosen(&mut self, options: &[OptionStimulus], chosen: usize, delta: f64) {
        let chosen_values = &options[chosen].values;
        let mut decayed: Vec<usize> = Vec::new();
        for (o, option) in options.iter().enumerate() {
            if o == chosen {
                continue;
            }
            for (d, &v) in option.values.iter().enumerate() {
                if chosen_values[d] == v {
                    continue;
                }
                let i = self.slot(d, v);
                if !decayed.contains(&i) {
                    decayed.push(i);
                    self.values[i] *= delta;
                }
            }
        }
    }

    pub fn update_weights(&mut self, reward: f64, alpha_w: f64) {
        for w in &mut self.weights {
            *w += alpha_w * (reward - *w);
        }
    }
}

/// Probabilities `∝ exp(tau * V(c))` over all options.
pub fn choice_probabilities(values: &[f64], tau: f64) -> Vec<f64> {
    softmax(values, tau)
}

/// How many primitive updates the model has applied; used by tests and
/// diagnostics to check the per-regime update schedule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UpdateCounts {
    pub chosen: usize,
    pub decay: usize,
    pub weights: usize,
}

#[derive(Debug)]
pub struct FrlModel {
    config: FrlConfig,
    table: FeatureValueTable,
    rng: ChaCha8Rng,
    counts: UpdateCounts,
}

impl FrlModel {
    pub fn new(config: FrlConfig, num_dimensions: usize, values_per_dimension: usize, seed: u64) -> Self {
        Self {
            table: FeatureValueTable::new(num_dimensions, values_per_dimension, config.initial_value),
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
            counts: UpdateCounts::default(),
        }
    }

    pub fn table(&self) -> &FeatureValueTable {
        &self.table
    }

    pub fn table_mut(&mut self) -> &mut FeatureValueTable {
        &mut self.table
    }

    pub fn counts(&self) -> UpdateCounts {
        self.counts
    }

    pub fn probabilities(&self, options: &[OptionStimulus]) -> Vec<f64> {
        let values: Vec<f64> = options
            .iter()
            .map(|o| self.table.option_value(o, self.config.weights_enabled))
            .collect();
        choice_probabilities(&values, self.config.tau)
    }

    fn learn_chosen(&mut self, option: &OptionStimulus, reward: f64) {
        self.table.update_chosen(option, reward, self.config.alpha);
        self.counts.chosen += 1;
    }

    fn learn_decay(&mut self, options: &[OptionStimulus], chosen: usize) {
        self.table.decay_unchosen(options, chosen, self.config.decay);
        self.counts.decay += 1;
    }

    fn learn_weights(&mut self, reward: f64) {
        if self.config.weights_enabled {
            self.table.update_weights(reward, self.config.alpha_w);
            self.counts.weights += 1;
        }
    }

    fn check_trial(&self, trial: &Trial, choice: usize) -> Result<()> {
        if choice >= trial.options.len() {
            return Err(Error::Inconsistent(format!(
                "trial {}: choice {choice} out of range",
                trial.index
            )));
        }
        trial.options.iter().try_for_each(|o| self.table.check(o))
    }
}

impl Learner for FrlModel {
    fn choose(&mut self, trial: &Trial) -> Result<usize> {
        trial.options.iter().try_for_each(|o| self.table.check(o))?;
        let p = self.probabilities(&trial.options);
        Ok(sample_index(&p, &mut self.rng))
    }

    fn observe(&mut self, event: &FeedbackEvent) -> Result<()> {
        match event {
            FeedbackEvent::Immediate { trial, choice, outcome } => {
                self.check_trial(trial, *choice)?;
                self.learn_chosen(&trial.options[*choice], *outcome);
                self.learn_decay(&trial.options, *choice);
                self.learn_weights(*outcome);
            }
            FeedbackEvent::Counterfactual {
                trial,
                choice,
                outcomes,
            } => {
                self.check_trial(trial, *choice)?;
                if outcomes.len() != trial.options.len() {
                    return Err(Error::Inconsistent(format!(
                        "trial {}: {} outcomes for {} options",
                        trial.index,
                        outcomes.len(),
                        trial.options.len()
                    )));
                }
                for (option, &r) in trial.options.iter().zip(outcomes) {
                    self.learn_chosen(option, r);
                }
                self.learn_weights(outcomes[*choice]);
            }
            FeedbackEvent::Delayed { sum, steps } => {
                if steps.is_empty() {
                    return Err(Error::Inconsistent("empty delayed cluster".into()));
                }
                let credit = FeedbackEvent::credited_reward(*sum, steps.len());
                for step in steps {
                    self.check_trial(&step.trial, step.choice)?;
                    self.learn_chosen(&step.trial.options[step.choice], credit);
                    self.learn_decay(&step.trial.options, step.choice);
                    self.learn_weights(credit);
                }
            }
        }
        Ok(())
    }
}
