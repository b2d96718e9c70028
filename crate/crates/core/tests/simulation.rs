use dimshift::config::RunConfig;
use dimshift::env::{FeedbackEvent, FeedbackKind, ShiftKind, TaskConfig, Trial};
use dimshift::frl::{FrlConfig, FrlModel};
use dimshift::harness::{aggregate, run_episode, run_grid, GridSpec, ModelKind};
use dimshift::ibl::{IblConfig, IblModel};
use dimshift::learner::Learner;
use dimshift::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Random(ChaCha8Rng);

impl Learner for Random {
    fn choose(&mut self, trial: &Trial) -> Result<usize> {
        Ok(self.0.random_range(0..trial.options.len()))
    }

    fn observe(&mut self, _: &FeedbackEvent) -> Result<()> {
        Ok(())
    }
}

#[test]
fn random_agent_sits_at_chance() {
    let task = TaskConfig::default();
    for feedback in FeedbackKind::ALL {
        let traces: Vec<_> = (0..200u64)
            .map(|i| {
                run_episode(
                    &task,
                    ShiftKind::Extra,
                    feedback,
                    i,
                    &mut Random(ChaCha8Rng::seed_from_u64(i)),
                )
                .unwrap()
            })
            .collect();
        let r = aggregate(ModelKind::Frl, ShiftKind::Extra, feedback, &task, &traces);
        for m in [r.pre_shift_asymptote, r.jumpstart, r.final_asymptote] {
            assert!((0.28..=0.39).contains(&m), "{feedback}: {m}");
        }
        let overall = r.mean_correct.iter().sum::<f64>() / r.mean_correct.len() as f64;
        assert!((overall - 1.0 / 3.0).abs() < 0.02, "{feedback}: {overall}");
    }
}

/// Records, for trials 51..=60, whether the wrapped model saw every option as
/// equally good.
struct Probe<L> {
    inner: L,
    values: fn(&mut L, &Trial) -> Vec<f64>,
    indifferent: Vec<bool>,
}

impl<L: Learner> Learner for Probe<L> {
    fn prepare(&mut self, t: usize) -> Result<()> {
        self.inner.prepare(t)
    }

    fn choose(&mut self, trial: &Trial) -> Result<usize> {
        if (51..=60).contains(&trial.index) {
            let v = (self.values)(&mut self.inner, trial);
            self.indifferent.push(v.iter().all(|&x| (x - v[0]).abs() < 1e-12));
        }
        self.inner.choose(trial)
    }

    fn observe(&mut self, event: &FeedbackEvent) -> Result<()> {
        self.inner.observe(event)
    }
}

// Nothing about the post-shift features is known until the first delayed
// cluster after the shift resolves, so both shift kinds start at chance.
#[test]
fn delayed_feedback_leaves_the_first_post_shift_cluster_uninformed() {
    let task = TaskConfig::default();
    for shift in ShiftKind::ALL {
        for seed in 0..20u64 {
            let mut frl = Probe {
                inner: FrlModel::new(FrlConfig::weighted(), 3, 6, seed),
                values: |m, t| m.probabilities(&t.options),
                indifferent: Vec::new(),
            };
            run_episode(&task, shift, FeedbackKind::Delayed, seed, &mut frl).unwrap();
            assert_eq!(frl.indifferent, vec![true; 10], "wrl {shift} seed {seed}");

            let quiet = IblConfig {
                noise: 0.0,
                temperature: Some(0.25 * std::f64::consts::SQRT_2),
                ..IblConfig::weighted()
            };
            let mut ibl = Probe {
                inner: IblModel::new(quiet, 3, seed),
                values: |m, t| m.blended_values(t).unwrap(),
                indifferent: Vec::new(),
            };
            run_episode(&task, shift, FeedbackKind::Delayed, seed, &mut ibl).unwrap();
            assert_eq!(ibl.indifferent, vec![true; 10], "wibl {shift} seed {seed}");
        }
    }
}

#[test]
fn shift_kinds_share_the_pre_shift_phase() {
    let grid = GridSpec {
        n_agents: 20,
        ..GridSpec::default()
    };
    let results = run_grid(&grid).unwrap();
    assert_eq!(results.len(), 24);
    for r in results.iter().filter(|r| r.shift == ShiftKind::Intra) {
        let e = results
            .iter()
            .find(|x| x.model == r.model && x.feedback == r.feedback && x.shift == ShiftKind::Extra)
            .unwrap();
        assert_eq!(r.mean_correct[..50], e.mean_correct[..50], "{}", r.id());
        assert_eq!(r.pre_shift_asymptote, e.pre_shift_asymptote);
    }
}

#[test]
fn curves_are_probabilities() {
    let grid = GridSpec {
        n_agents: 15,
        master_seed: 9,
        ..GridSpec::default()
    };
    for r in run_grid(&grid).unwrap() {
        assert_eq!(r.mean_correct.len(), 100);
        for (&m, &s) in r.mean_correct.iter().zip(&r.sd_correct) {
            assert!((0.0..=1.0).contains(&m));
            assert!((s - (m * (1.0 - m)).sqrt()).abs() < 1e-12);
        }
    }
}

#[test]
fn printed_config_reloads_to_the_same_grid() {
    let cfg = RunConfig::from_toml_str("n_agents = 5\nmaster_seed = 3\n[wibl]\nmismatch_penalty = 2.0\n").unwrap();
    let again = RunConfig::from_toml_str(&cfg.to_toml()).unwrap();
    assert_eq!(again.grid(), cfg.grid());
    assert!(again.grid().params.wibl.weights_enabled);
    assert!(!again.grid().params.ibl.weights_enabled);
}
