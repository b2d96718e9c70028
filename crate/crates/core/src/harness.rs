//! Episode loop, per-condition aggregation and the full condition grid.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{Environment, FeedbackKind, ShiftKind, TaskConfig};
use crate::frl::{FrlConfig, FrlModel};
use crate::ibl::{IblConfig, IblModel};
use crate::learner::Learner;
use crate::{seed, Error, Result};

/// Trials averaged by the jumpstart and asymptote metrics.
pub const METRIC_WINDOW: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Frl,
    Wrl,
    Ibl,
    Wibl,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Frl, ModelKind::Wrl, ModelKind::Ibl, ModelKind::Wibl];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Frl => "frl",
            ModelKind::Wrl => "wrl",
            ModelKind::Ibl => "ibl",
            ModelKind::Wibl => "wibl",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frl" => Ok(ModelKind::Frl),
            "wrl" => Ok(ModelKind::Wrl),
            "ibl" => Ok(ModelKind::Ibl),
            "wibl" => Ok(ModelKind::Wibl),
            _ => Err(Error::Config(format!(
                "unknown model `{s}` (expected frl, wrl, ibl or wibl)"
            ))),
        }
    }
}

/// Parameter blocks for every model kind.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub frl: FrlConfig,
    pub wrl: FrlConfig,
    pub ibl: IblConfig,
    pub wibl: IblConfig,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            frl: FrlConfig::default(),
            wrl: FrlConfig::weighted(),
            ibl: IblConfig::default(),
            wibl: IblConfig::weighted(),
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        self.frl.validate("frl")?;
        self.wrl.validate("wrl")?;
        self.ibl.validate("ibl")?;
        self.wibl.validate("wibl")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionSpec {
    pub model: ModelKind,
    pub shift: ShiftKind,
    pub feedback: FeedbackKind,
    pub n_agents: usize,
    pub task: TaskConfig,
    pub params: ModelParams,
    pub master_seed: u64,
}

impl ConditionSpec {
    pub fn id(&self) -> String {
        condition_id(self.model, self.shift, self.feedback)
    }

    /// Seed for one agent. It depends on the feedback regime and the agent
    /// index but not on the model or shift kind, so every model in a regime
    /// sees the same task stream and the two shift kinds share a pre-shift
    /// phase.
    pub fn agent_seed(&self, agent_index: usize) -> u64 {
        seed::derive(
            self.master_seed,
            &[seed::label(self.feedback.as_str()), agent_index as u64],
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 {
            return Err(Error::Config("n_agents: must be at least 1".into()));
        }
        self.task.validate_for(self.shift, self.feedback)?;
        self.params.validate()
    }

    pub fn build_learner(&self, agent_seed: u64) -> Box<dyn Learner> {
        let model_seed = seed::derive(agent_seed, &[seed::label("model")]);
        let task = &self.task;
        match self.model {
            ModelKind::Frl => Box::new(FrlModel::new(
                self.params.frl.clone(),
                task.num_dimensions,
                task.values_per_dimension,
                model_seed,
            )),
            ModelKind::Wrl => Box::new(FrlModel::new(
                self.params.wrl.clone(),
                task.num_dimensions,
                task.values_per_dimension,
                model_seed,
            )),
            ModelKind::Ibl => Box::new(IblModel::new(self.params.ibl.clone(), task.num_dimensions, model_seed)),
            ModelKind::Wibl => Box::new(IblModel::new(self.params.wibl.clone(), task.num_dimensions, model_seed)),
        }
    }
}

pub fn condition_id(model: ModelKind, shift: ShiftKind, feedback: FeedbackKind) -> String {
    format!("{model}-{shift}-{feedback}")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub correct: Vec<bool>,
    pub choices: Vec<usize>,
    pub agent_seed: u64,
}

impl EpisodeTrace {
    pub fn correct_f64(&self) -> Vec<f64> {
        self.correct.iter().map(|&c| f64::from(u8::from(c))).collect()
    }
}

/// Drives `learner` through one episode seeded by `agent_seed`.
pub fn run_episode(
    task: &TaskConfig,
    shift: ShiftKind,
    feedback: FeedbackKind,
    agent_seed: u64,
    learner: &mut dyn Learner,
) -> Result<EpisodeTrace> {
    let mut env = Environment::new(task.clone(), shift, feedback, agent_seed)?;
    let mut correct = Vec::with_capacity(task.trials_total);
    let mut choices = Vec::with_capacity(task.trials_total);
    for t in 1..=task.trials_total {
        learner.prepare(t)?;
        let trial = env.next_trial()?;
        let choice = learner.choose(&trial)?;
        correct.push(choice == trial.target_option);
        choices.push(choice);
        if let Some(event) = env.resolve(choice)? {
            learner.observe(&event)?;
        }
    }
    Ok(EpisodeTrace {
        correct,
        choices,
        agent_seed,
    })
}

pub fn run_agent(spec: &ConditionSpec, agent_index: usize) -> Result<EpisodeTrace> {
    let agent_seed = spec.agent_seed(agent_index);
    let mut learner = spec.build_learner(agent_seed);
    run_episode(&spec.task, spec.shift, spec.feedback, agent_seed, learner.as_mut()).map_err(|e| Error::Condition {
        condition: format!("{} agent {agent_index}", spec.id()),
        source: Box::new(e),
    })
}

fn window_mean(curve: &[f64], first: usize, last: usize) -> f64 {
    assert!(
        first >= 1 && first <= last && last <= curve.len(),
        "metric window {first}..={last} outside 1..={}",
        curve.len()
    );
    curve[first - 1..last].iter().sum::<f64>() / (last - first + 1) as f64
}

/// Mean correctness over trials `shift_trial + 1 ..= shift_trial + window`.
pub fn jumpstart(curve: &[f64], shift_trial: usize, window: usize) -> f64 {
    window_mean(curve, shift_trial + 1, shift_trial + window)
}

/// Mean correctness over trials `end_trial - window + 1 ..= end_trial`.
pub fn asymptote(curve: &[f64], end_trial: usize, window: usize) -> f64 {
    window_mean(curve, end_trial + 1 - window, end_trial)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub model: ModelKind,
    pub shift: ShiftKind,
    pub feedback: FeedbackKind,
    pub n_agents: usize,
    pub mean_correct: Vec<f64>,
    /// Population standard deviation across agents.
    pub sd_correct: Vec<f64>,
    pub jumpstart: f64,
    pub pre_shift_asymptote: f64,
    pub final_asymptote: f64,
    pub agent_jumpstart: Vec<f64>,
    pub agent_pre_shift_asymptote: Vec<f64>,
    pub agent_final_asymptote: Vec<f64>,
}

impl ConditionResult {
    pub fn id(&self) -> String {
        condition_id(self.model, self.shift, self.feedback)
    }

    /// Mean correctness on a 1-based trial.
    pub fn at(&self, trial: usize) -> f64 {
        self.mean_correct[trial - 1]
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Aggregates traces into per-trial curves and averaged per-agent metrics.
pub fn aggregate(
    model: ModelKind,
    shift: ShiftKind,
    feedback: FeedbackKind,
    task: &TaskConfig,
    traces: &[EpisodeTrace],
) -> ConditionResult {
    assert!(!traces.is_empty(), "aggregate needs at least one trace");
    let n = traces.len() as f64;
    let trials = task.trials_total;
    let mut mean_correct = vec![0.0; trials];
    let mut sd_correct = vec![0.0; trials];
    for t in 0..trials {
        let hits = traces.iter().filter(|tr| tr.correct[t]).count() as f64;
        let m = hits / n;
        mean_correct[t] = m;
        // for 0/1 data the population variance is m (1 - m)
        sd_correct[t] = (m * (1.0 - m)).max(0.0).sqrt();
    }

    let curves: Vec<Vec<f64>> = traces.iter().map(EpisodeTrace::correct_f64).collect();
    let agent_jumpstart: Vec<f64> = curves
        .iter()
        .map(|c| jumpstart(c, task.shift_trial, METRIC_WINDOW))
        .collect();
    let agent_pre_shift_asymptote: Vec<f64> = curves
        .iter()
        .map(|c| asymptote(c, task.shift_trial, METRIC_WINDOW))
        .collect();
    let agent_final_asymptote: Vec<f64> = curves
        .iter()
        .map(|c| asymptote(c, task.trials_total, METRIC_WINDOW))
        .collect();

    ConditionResult {
        model,
        shift,
        feedback,
        n_agents: traces.len(),
        mean_correct,
        sd_correct,
        jumpstart: mean(&agent_jumpstart),
        pre_shift_asymptote: mean(&agent_pre_shift_asymptote),
        final_asymptote: mean(&agent_final_asymptote),
        agent_jumpstart,
        agent_pre_shift_asymptote,
        agent_final_asymptote,
    }
}

/// Runs every agent of a condition in parallel. Traces are collected in agent
/// order, so the result does not depend on the thread schedule.
pub fn run_condition(spec: &ConditionSpec) -> Result<ConditionResult> {
    spec.validate()?;
    let traces = (0..spec.n_agents)
        .into_par_iter()
        .map(|i| run_agent(spec, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(spec.model, spec.shift, spec.feedback, &spec.task, &traces))
}

/// Models × shifts × feedback regimes to run.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub models: Vec<ModelKind>,
    pub shifts: Vec<ShiftKind>,
    pub feedback: Vec<FeedbackKind>,
    pub n_agents: usize,
    pub task: TaskConfig,
    pub params: ModelParams,
    pub master_seed: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            models: ModelKind::ALL.to_vec(),
            shifts: ShiftKind::ALL.to_vec(),
            feedback: FeedbackKind::ALL.to_vec(),
            n_agents: 200,
            task: TaskConfig::default(),
            params: ModelParams::default(),
            master_seed: crate::config::DEFAULT_SEED,
        }
    }
}

impl GridSpec {
    /// Cells in model-major, then shift, then feedback order.
    pub fn cells(&self) -> Vec<ConditionSpec> {
        let mut cells = Vec::new();
        for &model in &self.models {
            for &shift in &self.shifts {
                for &feedback in &self.feedback {
                    cells.push(ConditionSpec {
                        model,
                        shift,
                        feedback,
                        n_agents: self.n_agents,
                        task: self.task.clone(),
                        params: self.params.clone(),
                        master_seed: self.master_seed,
                    });
                }
            }
        }
        cells
    }
}

pub fn run_grid(grid: &GridSpec) -> Result<Vec<ConditionResult>> {
    let cells = grid.cells();
    cells.iter().try_for_each(ConditionSpec::validate)?;
    cells.par_iter().map(run_condition).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{FeedbackEvent, Trial};

    struct Fixed(usize);

    impl Learner for Fixed {
        fn choose(&mut self, _: &Trial) -> Result<usize> {
            Ok(self.0)
        }
        fn observe(&mut self, _: &FeedbackEvent) -> Result<()> {
            Ok(())
        }
    }

    fn small(model: ModelKind) -> ConditionSpec {
        ConditionSpec {
            model,
            shift: ShiftKind::Extra,
            feedback: FeedbackKind::Immediate,
            n_agents: 8,
            task: TaskConfig::default(),
            params: ModelParams::default(),
            master_seed: 5,
        }
    }

    #[test]
    fn metric_examples() {
        let ones = vec![1.0; 100];
        assert_eq!(jumpstart(&ones, 50, 10), 1.0);
        let alt: Vec<f64> = (1..=100).map(|t| if t % 2 == 1 { 1.0 } else { 0.0 }).collect();
        assert_eq!(jumpstart(&alt, 50, 10), 0.5);
        assert_eq!(jumpstart(&alt, 50, 1), alt[50]);
        assert_eq!(asymptote(&ones, 50, 10), 1.0);
        assert_eq!(asymptote(&alt, 100, 10), 0.5);
        assert_eq!(asymptote(&alt, 50, 1), alt[49]);
    }

    #[test]
    #[should_panic(expected = "metric window")]
    fn metric_window_past_the_end_panics() {
        jumpstart(&[1.0; 10], 5, 10);
    }

    #[test]
    fn agents_are_reproducible() {
        for model in ModelKind::ALL {
            let spec = small(model);
            assert_eq!(run_agent(&spec, 3).unwrap(), run_agent(&spec, 3).unwrap());
        }
    }

    #[test]
    fn fixed_choice_is_right_a_third_of_the_time() {
        let task = TaskConfig::default();
        let mut hits = 0;
        let mut total = 0;
        for s in 0..300 {
            let tr = run_episode(&task, ShiftKind::Intra, FeedbackKind::Immediate, s, &mut Fixed(0)).unwrap();
            hits += tr.correct.iter().filter(|&&c| c).count();
            total += tr.correct.len();
        }
        let rate = hits as f64 / total as f64;
        assert!((rate - 1.0 / 3.0).abs() < 0.01, "{rate}");
    }

    #[test]
    fn single_agent_has_zero_spread() {
        let mut spec = small(ModelKind::Ibl);
        spec.n_agents = 1;
        let r = run_condition(&spec).unwrap();
        assert!(r.sd_correct.iter().all(|&s| s == 0.0));
        assert_eq!(r.mean_correct.len(), 100);
    }

    #[test]
    fn duplicated_traces_collapse_to_one() {
        let spec = small(ModelKind::Frl);
        let trace = run_agent(&spec, 0).unwrap();
        let traces = vec![trace.clone(); 5];
        let r = aggregate(spec.model, spec.shift, spec.feedback, &spec.task, &traces);
        assert!(r.sd_correct.iter().all(|&s| s == 0.0));
        assert_eq!(r.mean_correct, trace.correct_f64());
    }

    #[test]
    fn jumpstart_of_the_mean_curve_is_the_mean_jumpstart() {
        let r = run_condition(&small(ModelKind::Wibl)).unwrap();
        let from_curve = jumpstart(&r.mean_correct, 50, METRIC_WINDOW);
        assert!((from_curve - r.jumpstart).abs() < 1e-12);
        let pre = asymptote(&r.mean_correct, 50, METRIC_WINDOW);
        assert!((pre - r.pre_shift_asymptote).abs() < 1e-12);
    }

    #[test]
    fn no_signal_means_chance() {
        let task = TaskConfig {
            p_high: 0.5,
            p_low: 0.5 - 1e-12,
            ..TaskConfig::default()
        };
        for model in ModelKind::ALL {
            let spec = ConditionSpec {
                n_agents: 60,
                task: task.clone(),
                ..small(model)
            };
            let r = run_condition(&spec).unwrap();
            let overall = mean(&r.mean_correct);
            assert!((overall - 1.0 / 3.0).abs() < 0.05, "{model}: {overall}");
        }
    }

    #[test]
    fn grid_cells_and_order() {
        let grid = GridSpec::default();
        let cells = grid.cells();
        assert_eq!(cells.len(), 24);
        assert_eq!(cells[0].id(), "frl-intra-immediate");
        assert_eq!(cells[23].id(), "wibl-extra-counterfactual");
        let only_ibl = GridSpec {
            models: vec![ModelKind::Ibl],
            ..GridSpec::default()
        };
        assert_eq!(only_ibl.cells().len(), 6);
    }

    #[test]
    fn errors_carry_condition_context() {
        let mut spec = small(ModelKind::Frl);
        spec.n_agents = 0;
        assert!(run_condition(&spec).is_err());
        let mut spec = small(ModelKind::Frl);
        spec.params.frl.alpha = 2.0;
        let err = run_condition(&spec).unwrap_err().to_string();
        assert!(err.contains("frl.alpha"), "{err}");
    }

    #[test]
    fn seeds_ignore_model_and_shift() {
        let a = small(ModelKind::Frl);
        let b = ConditionSpec {
            model: ModelKind::Wibl,
            shift: ShiftKind::Intra,
            ..a.clone()
        };
        assert_eq!(a.agent_seed(4), b.agent_seed(4));
        let c = ConditionSpec {
            feedback: FeedbackKind::Delayed,
            ..a.clone()
        };
        assert_ne!(a.agent_seed(4), c.agent_seed(4));
        assert_ne!(a.agent_seed(4), a.agent_seed(5));
    }
}
