//! Luce choice rule and scoring of similarity / identification trials.
//!
//! A trial shows `n` stimuli and a probe. The model picks stimulus `i` with
//! probability `D_i = g(x_i, p) / sum_k g(x_k, p)`; the correct answer is the
//! stimulus nearest the probe (or, for identification, the stimulus the probe
//! was copied from). When every similarity is zero the choice is uniform.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::similarity::Similarity;
use crate::spaces::{Point, Space};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Similarity,
    Identification { probe_index: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trial {
    pub stimuli: Vec<Point>,
    pub probe: Point,
    pub task: Task,
}

impl Trial {
    pub fn similarity(stimuli: Vec<Point>, probe: Point) -> Result<Self> {
        let trial = Trial {
            stimuli,
            probe,
            task: Task::Similarity,
        };
        trial.validate()?;
        Ok(trial)
    }

    /// Identification trial whose probe is `stimuli[probe_index]`.
    pub fn identification(stimuli: Vec<Point>, probe_index: usize) -> Result<Self> {
        let probe = *stimuli.get(probe_index).ok_or(Error::IndexOutOfRange {
            index: probe_index,
            size: stimuli.len(),
        })?;
        let trial = Trial {
            stimuli,
            probe,
            task: Task::Identification { probe_index },
        };
        trial.validate()?;
        Ok(trial)
    }

    pub fn validate(&self) -> Result<()> {
        if self.stimuli.len() < 2 {
            return Err(Error::invalid("n", "a trial needs at least 2 stimuli"));
        }
        if let Task::Identification { probe_index } = self.task {
            match self.stimuli.get(probe_index) {
                None => {
                    return Err(Error::IndexOutOfRange {
                        index: probe_index,
                        size: self.stimuli.len(),
                    })
                }
                Some(p) if *p != self.probe => {
                    return Err(Error::invalid(
                        "probe",
                        "identification probe must equal the indexed stimulus",
                    ))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }
}

/// `D_i = s_i / sum_k s_k`, uniform when every similarity is zero.
pub fn decision_probs(sims: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; sims.len()];
    fill_decision_probs(sims, &mut out)?;
    Ok(out)
}

pub(crate) fn fill_decision_probs(sims: &[f64], out: &mut [f64]) -> Result<()> {
    if sims.is_empty() {
        return Err(Error::invalid("sims", "need at least one similarity"));
    }
    if let Some(&bad) = sims.iter().find(|s| s.is_nan() || **s < 0.0) {
        return Err(Error::Domain {
            name: "similarity",
            value: bad,
        });
    }
    let total: f64 = sims.iter().sum();
    if total > 0.0 {
        for (o, s) in out.iter_mut().zip(sims) {
            *o = s / total;
        }
    } else {
        let uniform = 1.0 / sims.len() as f64;
        out.iter_mut().for_each(|o| *o = uniform);
    }
    Ok(())
}

/// Indices of the stimuli at minimal distance from the probe. Identification
/// trials have the single answer `probe_index`.
pub fn correct_set(space: &Space, trial: &Trial) -> Result<Vec<usize>> {
    trial.validate()?;
    let mut set = Vec::new();
    correct_set_into(space, trial, &mut set)?;
    Ok(set)
}

fn correct_set_into(space: &Space, trial: &Trial, set: &mut Vec<usize>) -> Result<()> {
    set.clear();
    if let Task::Identification { probe_index } = trial.task {
        set.push(probe_index);
        return Ok(());
    }
    let mut best = f64::INFINITY;
    for (i, x) in trial.stimuli.iter().enumerate() {
        let d = space.distance(x, &trial.probe)?;
        if d < best {
            best = d;
            set.clear();
            set.push(i);
        } else if d == best {
            set.push(i);
        }
    }
    Ok(())
}

/// `X`, the index of the stimulus nearest the probe. Exact ties (possible only
/// on discrete spaces) are broken uniformly at random.
pub fn correct_index<R: Rng + ?Sized>(space: &Space, trial: &Trial, rng: &mut R) -> Result<usize> {
    let set = correct_set(space, trial)?;
    Ok(if set.len() == 1 {
        set[0]
    } else {
        set[rng.random_range(0..set.len())]
    })
}

/// Probability mass the decision rule puts on the correct answer, averaged
/// over the argmin set when the correct answer is tied.
pub fn success_prob(space: &Space, sim: &Similarity, trial: &Trial) -> Result<f64> {
    trial.validate()?;
    Scorer::new(trial.stimuli.len()).expected(space, sim, trial)
}

/// One sampled outcome: draws `Y` from the decision rule and `X` with uniform
/// tie breaking, returns `1` on a match and `0` otherwise.
pub fn sampled_success<R: Rng + ?Sized>(
    space: &Space,
    sim: &Similarity,
    trial: &Trial,
    rng: &mut R,
) -> Result<f64> {
    trial.validate()?;
    Scorer::new(trial.stimuli.len()).sampled(space, sim, trial, rng)
}

/// Mean of `probs[i]` over `correct`.
pub fn score(probs: &[f64], correct: &[usize]) -> f64 {
    correct.iter().map(|&i| probs[i]).sum::<f64>() / correct.len() as f64
}

/// Reusable buffers for scoring many trials of the same size.
#[derive(Debug, Clone)]
pub(crate) struct Scorer {
    sims: Vec<f64>,
    probs: Vec<f64>,
    correct: Vec<usize>,
}

impl Scorer {
    pub(crate) fn new(n: usize) -> Self {
        Scorer {
            sims: vec![0.0; n],
            probs: vec![0.0; n],
            correct: Vec::with_capacity(n),
        }
    }

    fn prepare(&mut self, space: &Space, sim: &Similarity, trial: &Trial) -> Result<()> {
        let n = trial.stimuli.len();
        self.sims.resize(n, 0.0);
        self.probs.resize(n, 0.0);
        for (s, x) in self.sims.iter_mut().zip(&trial.stimuli) {
            *s = sim.between(space, x, &trial.probe)?;
        }
        fill_decision_probs(&self.sims, &mut self.probs)?;
        correct_set_into(space, trial, &mut self.correct)
    }

    pub(crate) fn expected(&mut self, space: &Space, sim: &Similarity, trial: &Trial) -> Result<f64> {
        self.prepare(space, sim, trial)?;
        Ok(score(&self.probs, &self.correct))
    }

    pub(crate) fn sampled<R: Rng + ?Sized>(
        &mut self,
        space: &Space,
        sim: &Similarity,
        trial: &Trial,
        rng: &mut R,
    ) -> Result<f64> {
        self.prepare(space, sim, trial)?;
        let truth = if self.correct.len() == 1 {
            self.correct[0]
        } else {
            self.correct[rng.random_range(0..self.correct.len())]
        };
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut choice = self.probs.len() - 1;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                choice = i;
                break;
            }
        }
        Ok(if choice == truth { 1.0 } else { 0.0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn r(x: f64) -> Point {
        Point::Real(x)
    }

    #[test]
    fn probs_examples() {
        assert_eq!(decision_probs(&[1.0, 1.0]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(decision_probs(&[0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        let p = decision_probs(&[1.0, 0.1, 0.1]).unwrap();
        let expected = [1.0 / 1.2, 0.1 / 1.2, 0.1 / 1.2];
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn probs_errors() {
        assert!(decision_probs(&[]).is_err());
        assert!(decision_probs(&[1.0, -0.5]).is_err());
        assert!(decision_probs(&[f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn nearest_stimulus_on_circle() {
        let trial = Trial::similarity(vec![r(0.1), r(0.6)], r(0.2)).unwrap();
        let mut g = rng::stream(0, 0);
        assert_eq!(correct_index(&Space::Circle, &trial, &mut g).unwrap(), 0);
    }

    #[test]
    fn identification_answer_is_the_probe_index() {
        let trial = Trial::identification(vec![r(0.1), r(0.6)], 1).unwrap();
        let mut g = rng::stream(0, 0);
        assert_eq!(correct_index(&Space::Circle, &trial, &mut g).unwrap(), 1);
    }

    #[test]
    fn identification_probe_must_match() {
        let bad = Trial {
            stimuli: vec![r(0.1), r(0.6)],
            probe: r(0.3),
            task: Task::Identification { probe_index: 0 },
        };
        assert!(bad.validate().is_err());
        assert!(Trial::identification(vec![r(0.1), r(0.6)], 2).is_err());
        assert!(Trial::similarity(vec![r(0.1)], r(0.2)).is_err());
    }

    #[test]
    fn discrete_ties_break_uniformly() {
        let space = Space::DiscreteCircle { points: 4 };
        let trial =
            Trial::similarity(vec![Point::Index(0), Point::Index(2)], Point::Index(1)).unwrap();
        assert_eq!(correct_set(&space, &trial).unwrap(), vec![0, 1]);
        let mut g = rng::stream(99, 0);
        let zeros = (0..10_000)
            .filter(|_| correct_index(&space, &trial, &mut g).unwrap() == 0)
            .count();
        // Binomial(10^4, 1/2): sd = 50, so 200 is four standard deviations.
        assert!((4800..=5200).contains(&zeros), "{zeros}");
    }

    #[test]
    fn success_examples() {
        let g = Similarity::constant(0.1, 0.0).unwrap();
        let s = Space::Circle;
        let on_top = Trial::similarity(vec![r(0.3), r(0.7)], r(0.3)).unwrap();
        assert_eq!(success_prob(&s, &g, &on_top).unwrap(), 1.0);
        let both_near = Trial::similarity(vec![r(0.3), r(0.35)], r(0.32)).unwrap();
        assert_eq!(success_prob(&s, &g, &both_near).unwrap(), 0.5);
        let both_far = Trial::similarity(vec![r(0.1), r(0.3)], r(0.7)).unwrap();
        assert_eq!(success_prob(&s, &g, &both_far).unwrap(), 0.5);
    }

    #[test]
    fn clean_identification_succeeds() {
        let g = Similarity::constant(0.05, 0.0).unwrap();
        let trial = Trial::identification(vec![r(0.1), r(0.5), r(0.8)], 2).unwrap();
        assert_eq!(success_prob(&Space::Circle, &g, &trial).unwrap(), 1.0);
    }

    #[test]
    fn tied_answers_average_the_decision_mass() {
        let space = Space::DiscreteCircle { points: 8 };
        let table = crate::similarity::SimilarityTable::new(
            8,
            (0..64).map(|k| if k % 9 == 0 { 1.0 } else { (k % 5) as f64 * 0.1 }).collect(),
        )
        .unwrap();
        let g = Similarity::Table(table);
        let trial =
            Trial::similarity(vec![Point::Index(2), Point::Index(4)], Point::Index(3)).unwrap();
        let probs = decision_probs(&[
            g.eval_table(2, 3).unwrap(),
            g.eval_table(4, 3).unwrap(),
        ])
        .unwrap();
        let expected = 0.5 * (probs[0] + probs[1]);
        assert!((success_prob(&space, &g, &trial).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn sampled_mode_converges_to_expected() {
        let g = Similarity::exponential(4.0, 0.05).unwrap();
        let trial = Trial::similarity(vec![r(0.1), r(0.35), r(0.6)], r(0.2)).unwrap();
        let exact = success_prob(&Space::Circle, &g, &trial).unwrap();
        let mut rg = rng::stream(5, 0);
        let n = 200_000;
        let hits: f64 = (0..n)
            .map(|_| sampled_success(&Space::Circle, &g, &trial, &mut rg).unwrap())
            .sum();
        let mean = hits / n as f64;
        let se = (exact * (1.0 - exact) / n as f64).sqrt();
        assert!((mean - exact).abs() < 4.0 * se, "{mean} vs {exact}");
    }
}
