use crate::env::{FeedbackEvent, Trial};
use crate::Result;

/// An agent that can be driven through an episode.
pub trait Learner {
    /// Called once at the start of every trial, before the options are shown.
    fn prepare(&mut self, _trial_index: usize) -> Result<()> {
        Ok(())
    }

    fn choose(&mut self, trial: &Trial) -> Result<usize>;

    fn observe(&mut self, event: &FeedbackEvent) -> Result<()>;
}

/// Picks the index with the largest value; exact ties are broken uniformly
/// with one draw from `rng` whenever more than one index is tied.
pub(crate) fn argmax_random_tie<R: rand::Rng + ?Sized>(values: &[f64], rng: &mut R) -> usize {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> = (0..values.len()).filter(|&i| values[i] == best).collect();
    match tied.len() {
        0 => 0,
        1 => tied[0],
        n => tied[rng.random_range(0..n)],
    }
}

/// Softmax with inverse temperature `beta`, computed with max subtraction.
pub fn softmax(values: &[f64], beta: f64) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = values.iter().map(|v| (beta * (v - max)).exp()).collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= z);
    p
}

/// Draws an index from a discrete distribution with one uniform draw.
pub(crate) fn sample_index<R: rand::Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}
