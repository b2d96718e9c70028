//! The dimensional-shift contextual bandit.
//!
//! Each trial presents `num_options` options. An option assigns one value to
//! every feature dimension, and within a dimension the options carry distinct
//! values drawn from the active value pool. Before the shift the pool is
//! `0..num_options`; after it, `num_options..2 * num_options`, so every
//! post-shift value is novel. The option holding the target (dimension, value)
//! pair is rewarded with `p_high`, the others with `p_low`.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{seed, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftKind {
    Intra,
    Extra,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeedbackKind {
    Immediate,
    Delayed,
    Counterfactual,
}

impl ShiftKind {
    pub const ALL: [ShiftKind; 2] = [ShiftKind::Intra, ShiftKind::Extra];

    pub fn as_str(self) -> &'static str {
        match self {
            ShiftKind::Intra => "intra",
            ShiftKind::Extra => "extra",
        }
    }
}

impl FeedbackKind {
    pub const ALL: [FeedbackKind; 3] = [
        FeedbackKind::Immediate,
        FeedbackKind::Delayed,
        FeedbackKind::Counterfactual,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeedbackKind::Immediate => "immediate",
            FeedbackKind::Delayed => "delayed",
            FeedbackKind::Counterfactual => "counterfactual",
        }
    }
}

impl fmt::Display for ShiftKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for FeedbackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ShiftKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "intra" | "id" => Ok(ShiftKind::Intra),
            "extra" | "ed" => Ok(ShiftKind::Extra),
            _ => Err(Error::Config(format!(
                "unknown shift kind `{s}` (expected intra or extra)"
            ))),
        }
    }
}

impl FromStr for FeedbackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "immediate" => Ok(FeedbackKind::Immediate),
            "delayed" => Ok(FeedbackKind::Delayed),
            "counterfactual" => Ok(FeedbackKind::Counterfactual),
            _ => Err(Error::Config(format!(
                "unknown feedback kind `{s}` (expected immediate, delayed or counterfactual)"
            ))),
        }
    }
}

/// Task shape and reward structure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskConfig {
    pub num_dimensions: usize,
    pub values_per_dimension: usize,
    pub num_options: usize,
    pub p_high: f64,
    pub p_low: f64,
    pub outcome_noise_sd: f64,
    pub trials_total: usize,
    /// Last trial of the pre-shift phase.
    pub shift_trial: usize,
    pub cluster_size: usize,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            num_dimensions: 3,
            values_per_dimension: 6,
            num_options: 3,
            p_high: 0.75,
            p_low: 0.25,
            outcome_noise_sd: 0.1,
            trials_total: 100,
            shift_trial: 50,
            cluster_size: 10,
        }
    }
}

impl TaskConfig {
    /// Checks the invariants that do not depend on the shift or feedback kind.
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, why: &str| Err(Error::Config(format!("task.{key}: {why}")));
        if self.num_dimensions == 0 {
            return bad("num_dimensions", "must be at least 1");
        }
        if self.num_options == 0 {
            return bad("num_options", "must be at least 1");
        }
        if 2 * self.num_options > self.values_per_dimension {
            return bad(
                "values_per_dimension",
                "must be at least 2 * num_options so both value pools are full",
            );
        }
        if !(0.0..=1.0).contains(&self.p_low) || !(0.0..=1.0).contains(&self.p_high) {
            return bad("p_high", "reward probabilities must lie in [0, 1]");
        }
        if self.p_low >= self.p_high {
            return bad("p_low", "must be strictly below p_high");
        }
        if !(self.outcome_noise_sd >= 0.0 && self.outcome_noise_sd.is_finite()) {
            return bad("outcome_noise_sd", "must be finite and non-negative");
        }
        if self.shift_trial == 0 || self.shift_trial >= self.trials_total {
            return bad("shift_trial", "must satisfy 1 <= shift_trial < trials_total");
        }
        if self.cluster_size == 0 {
            return bad("cluster_size", "must be at least 1");
        }
        Ok(())
    }

    /// Full validation for a concrete (shift, feedback) cell.
    pub fn validate_for(&self, shift: ShiftKind, feedback: FeedbackKind) -> Result<()> {
        self.validate()?;
        if shift == ShiftKind::Extra && self.num_dimensions < 2 {
            return Err(Error::Config(
                "task.num_dimensions: an extra-dimensional shift needs at least 2 dimensions".into(),
            ));
        }
        if feedback == FeedbackKind::Delayed && !self.trials_total.is_multiple_of(self.cluster_size) {
            return Err(Error::Config(
                "task.cluster_size: must divide trials_total under delayed feedback".into(),
            ));
        }
        Ok(())
    }

    pub fn is_post_shift(&self, trial_index: usize) -> bool {
        trial_index > self.shift_trial
    }

    /// Value pool active on `trial_index`.
    pub fn pool(&self, trial_index: usize) -> Range<usize> {
        if self.is_post_shift(trial_index) {
            self.num_options..2 * self.num_options
        } else {
            0..self.num_options
        }
    }
}

/// The rewarded (dimension, value) pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TargetRule {
    pub dimension: usize,
    pub value: usize,
}

/// One value index per feature dimension.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OptionStimulus {
    pub values: Vec<usize>,
}

impl OptionStimulus {
    pub fn new(values: Vec<usize>) -> Self {
        Self { values }
    }

    pub fn num_dimensions(&self) -> usize {
        self.values.len()
    }
}

impl From<Vec<usize>> for OptionStimulus {
    fn from(values: Vec<usize>) -> Self {
        Self { values }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trial {
    /// 1-based trial number.
    pub index: usize,
    pub options: Vec<OptionStimulus>,
    pub target_option: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub base: u8,
    pub noisy: f64,
}

/// Everything that happened on one trial, including outcomes the learner may
/// never see.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub trial: Trial,
    pub choice: usize,
    pub outcomes: Vec<Outcome>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterStep {
    pub trial: Trial,
    pub choice: usize,
}

/// What a learner is told after a trial.
#[derive(Clone, Debug, PartialEq)]
pub enum FeedbackEvent {
    Immediate {
        trial: Trial,
        choice: usize,
        outcome: f64,
    },
    /// Delivered only at cluster boundaries: the sum of the cluster's chosen
    /// outcomes together with the (options, choice) history it covers.
    Delayed {
        sum: f64,
        steps: Vec<ClusterStep>,
    },
    Counterfactual {
        trial: Trial,
        choice: usize,
        outcomes: Vec<f64>,
    },
}

impl FeedbackEvent {
    /// Reward credited to each chosen option of a delayed cluster.
    pub fn credited_reward(sum: f64, steps: usize) -> f64 {
        sum / steps as f64
    }
}

pub fn initial_rule<R: Rng + ?Sized>(config: &TaskConfig, rng: &mut R) -> TargetRule {
    TargetRule {
        dimension: rng.random_range(0..config.num_dimensions),
        value: rng.random_range(config.pool(1)),
    }
}

pub fn generate_trial<R: Rng + ?Sized>(
    config: &TaskConfig,
    rule: &TargetRule,
    trial_index: usize,
    rng: &mut R,
) -> Result<Trial> {
    if trial_index == 0 || trial_index > config.trials_total {
        return Err(Error::TrialOutOfRange {
            index: trial_index,
            total: config.trials_total,
        });
    }
    let pool = config.pool(trial_index);
    if rule.dimension >= config.num_dimensions || !pool.contains(&rule.value) {
        return Err(Error::InvalidRule {
            dimension: rule.dimension,
            value: rule.value,
            trial: trial_index,
        });
    }

    let n = config.num_options;
    let mut options = vec![Vec::with_capacity(config.num_dimensions); n];
    for _ in 0..config.num_dimensions {
        let mut column: Vec<usize> = pool.clone().collect();
        column.shuffle(rng);
        for (option, &value) in options.iter_mut().zip(&column) {
            option.push(value);
        }
    }
    let target_option = options
        .iter()
        .position(|o| o[rule.dimension] == rule.value)
        .expect("pool of size num_options places the target value on exactly one option");

    Ok(Trial {
        index: trial_index,
        options: options.into_iter().map(OptionStimulus::new).collect(),
        target_option,
    })
}

pub fn sample_outcome<R: Rng + ?Sized>(option_is_target: bool, config: &TaskConfig, rng: &mut R) -> Outcome {
    let p = if option_is_target { config.p_high } else { config.p_low };
    // One uniform and one normal draw per call regardless of p keeps the
    // stream layout independent of the reward probabilities.
    let base = u8::from(rng.random::<f64>() < p);
    let noise = Normal::new(0.0, config.outcome_noise_sd)
        .expect("validated noise sd")
        .sample(rng);
    Outcome {
        base,
        noisy: f64::from(base) + noise,
    }
}

pub fn apply_shift<R: Rng + ?Sized>(
    rule: &TargetRule,
    config: &TaskConfig,
    shift: ShiftKind,
    rng: &mut R,
) -> TargetRule {
    let dimension = match shift {
        ShiftKind::Intra => rule.dimension,
        ShiftKind::Extra => {
            let k = rng.random_range(0..config.num_dimensions - 1);
            if k >= rule.dimension {
                k + 1
            } else {
                k
            }
        }
    };
    TargetRule {
        dimension,
        value: rng.random_range(config.pool(config.shift_trial + 1)),
    }
}

/// Decides what the learner observes after `trial_index`, given the full
/// history up to and including that trial.
pub fn package_feedback(
    kind: FeedbackKind,
    cluster_size: usize,
    history: &[TrialRecord],
    trial_index: usize,
) -> Result<Option<FeedbackEvent>> {
    let record = |i: usize| {
        history
            .get(i.wrapping_sub(1))
            .filter(|r| r.trial.index == i)
            .ok_or_else(|| Error::Inconsistent(format!("no history for trial {i}")))
    };
    let noisy = |r: &TrialRecord| -> Result<f64> {
        r.outcomes
            .get(r.choice)
            .map(|o| o.noisy)
            .ok_or_else(|| Error::Inconsistent(format!("trial {} has no chosen outcome", r.trial.index)))
    };

    match kind {
        FeedbackKind::Immediate => {
            let r = record(trial_index)?;
            Ok(Some(FeedbackEvent::Immediate {
                trial: r.trial.clone(),
                choice: r.choice,
                outcome: noisy(r)?,
            }))
        }
        FeedbackKind::Counterfactual => {
            let r = record(trial_index)?;
            Ok(Some(FeedbackEvent::Counterfactual {
                trial: r.trial.clone(),
                choice: r.choice,
                outcomes: r.outcomes.iter().map(|o| o.noisy).collect(),
            }))
        }
        FeedbackKind::Delayed => {
            if cluster_size == 0 || !trial_index.is_multiple_of(cluster_size) {
                return Ok(None);
            }
            let mut sum = 0.0;
            let mut steps = Vec::with_capacity(cluster_size);
            for i in trial_index + 1 - cluster_size..=trial_index {
                let r = record(i)?;
                sum += noisy(r)?;
                steps.push(ClusterStep {
                    trial: r.trial.clone(),
                    choice: r.choice,
                });
            }
            Ok(Some(FeedbackEvent::Delayed { sum, steps }))
        }
    }
}

/// One episode of the task: owns the rule, the random streams and the history.
///
/// Trial generation and outcome sampling share one stream whose consumption
/// never depends on the learner's choices, so every learner driven from the
/// same seed faces the same options and outcomes. The target rule and the
/// shift draw from a second stream, which keeps the pre-shift phase identical
/// between intra- and extra-dimensional runs from the same seed.
#[derive(Debug)]
pub struct Environment {
    config: TaskConfig,
    shift: ShiftKind,
    feedback: FeedbackKind,
    rule: TargetRule,
    trial_rng: ChaCha8Rng,
    rule_rng: ChaCha8Rng,
    history: Vec<TrialRecord>,
    pending: Option<Trial>,
    shifted: bool,
}

impl Environment {
    pub fn new(config: TaskConfig, shift: ShiftKind, feedback: FeedbackKind, seed: u64) -> Result<Self> {
        config.validate_for(shift, feedback)?;
        let trial_rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, &[seed::label("trials")]));
        let mut rule_rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, &[seed::label("rule")]));
        let rule = initial_rule(&config, &mut rule_rng);
        Ok(Self {
            history: Vec::with_capacity(config.trials_total),
            config,
            shift,
            feedback,
            rule,
            trial_rng,
            rule_rng,
            pending: None,
            shifted: false,
        })
    }

    pub fn config(&self) -> &TaskConfig {
        &self.config
    }

    pub fn rule(&self) -> TargetRule {
        self.rule
    }

    pub fn history(&self) -> &[TrialRecord] {
        &self.history
    }

    pub fn is_finished(&self) -> bool {
        self.history.len() >= self.config.trials_total
    }

    /// Presents the next trial, applying the shift first when the episode
    /// crosses into the post-shift phase.
    pub fn next_trial(&mut self) -> Result<Trial> {
        if let Some(trial) = &self.pending {
            return Ok(trial.clone());
        }
        let index = self.history.len() + 1;
        if !self.shifted && self.config.is_post_shift(index) {
            self.rule = apply_shift(&self.rule, &self.config, self.shift, &mut self.rule_rng);
            self.shifted = true;
        }
        let trial = generate_trial(&self.config, &self.rule, index, &mut self.trial_rng)?;
        self.pending = Some(trial.clone());
        Ok(trial)
    }

    /// Records the learner's choice, samples every option's outcome and
    /// returns whatever the feedback regime discloses.
    pub fn resolve(&mut self, choice: usize) -> Result<Option<FeedbackEvent>> {
        let trial = self
            .pending
            .take()
            .ok_or_else(|| Error::Inconsistent("resolve called without a pending trial".into()))?;
        if choice >= trial.options.len() {
            return Err(Error::Inconsistent(format!(
                "choice {choice} out of range for {} options",
                trial.options.len()
            )));
        }
        let outcomes = (0..trial.options.len())
            .map(|o| sample_outcome(o == trial.target_option, &self.config, &mut self.trial_rng))
            .collect();
        let index = trial.index;
        self.history.push(TrialRecord {
            trial,
            choice,
            outcomes,
        });
        package_feedback(self.feedback, self.config.cluster_size, &self.history, index)
    }
}
