//! Seeded Monte Carlo estimates of `p_S` and `p_I`.
//!
//! Every trial draws `n` stimuli i.i.d. from the uniform measure of the space.
//! A similarity trial draws an independent probe; an identification trial
//! copies a uniformly chosen stimulus. Trials are split into contiguous blocks
//! across workers and worker `w` draws from stream `w` of the seed, so the
//! merged result depends only on the config and the worker count.

use alloc::vec::Vec;
use rand::Rng;

use crate::decision::{Scorer, Task, Trial};
use crate::rng::{self, RandomSource};
use crate::similarity::Similarity;
use crate::spaces::{Point, Space};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TaskKind {
    Similarity,
    Identification,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Similarity => "similarity",
            TaskKind::Identification => "identification",
        }
    }
}

/// Per-trial score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Scoring {
    /// Decision mass on the correct answer (Rao-Blackwellized, lower variance).
    #[default]
    Expected,
    /// A sampled 0/1 outcome `[Y = X]`.
    Sampled,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialConfig {
    pub space: Space,
    pub sim: Similarity,
    pub n: usize,
    pub task: TaskKind,
    pub trials: usize,
    pub seed: u64,
    pub scoring: Scoring,
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials", "need at least one trial"));
        }
        if self.n < 2 {
            return Err(Error::invalid("n", "a trial needs at least 2 stimuli"));
        }
        if let Similarity::Table(t) = &self.sim {
            if self.space.points() != Some(t.size()) {
                return Err(Error::invalid(
                    "sim",
                    "a similarity table needs a discrete space with one point per row",
                ));
            }
        }
        self.space.clone().validated()?;
        self.sim.clone().validated()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateResult {
    pub estimate: f64,
    /// `sqrt(sample variance / trials)`.
    pub std_error: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Running mean and sum of squared deviations (Welford).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Tally {
    pub count: usize,
    pub mean: f64,
    pub m2: f64,
}

impl Tally {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Combines two disjoint tallies.
    pub fn merge(self, other: Tally) -> Tally {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let (na, nb, n) = (self.count as f64, other.count as f64, count as f64);
        let delta = other.mean - self.mean;
        Tally {
            count,
            mean: self.mean + delta * nb / n,
            m2: self.m2 + other.m2 + delta * delta * na * nb / n,
        }
    }

    pub fn sample_variance(&self) -> f64 {
        if self.count > 1 {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        } else {
            0.0
        }
    }

    pub fn result(&self, seed: u64) -> EstimateResult {
        EstimateResult {
            estimate: self.mean.clamp(0.0, 1.0),
            std_error: libm::sqrt(self.sample_variance() / self.count.max(1) as f64),
            trials: self.count,
            seed,
        }
    }
}

/// Trial range `[start, end)` handled by `worker` out of `workers`.
pub fn worker_range(trials: usize, worker: usize, workers: usize) -> (usize, usize) {
    let base = trials / workers;
    let extra = trials % workers;
    let start = worker * base + worker.min(extra);
    let len = base + usize::from(worker < extra);
    (start, start + len)
}

fn draw_trial<R: Rng + ?Sized>(config: &TrialConfig, trial: &mut Trial, rng: &mut R) {
    for s in trial.stimuli.iter_mut() {
        *s = config.space.sample(rng);
    }
    match config.task {
        TaskKind::Similarity => {
            trial.probe = config.space.sample(rng);
            trial.task = Task::Similarity;
        }
        TaskKind::Identification => {
            let probe_index = rng.random_range(0..config.n);
            trial.probe = trial.stimuli[probe_index];
            trial.task = Task::Identification { probe_index };
        }
    }
}

fn blank_trial(config: &TrialConfig) -> Trial {
    let origin = config.space.sample(&mut rng::stream(0, 0));
    Trial {
        stimuli: alloc::vec![origin; config.n],
        probe: origin,
        task: Task::Similarity,
    }
}

/// Scores of one worker's share of the trials.
pub fn run_worker(config: &TrialConfig, worker: usize, workers: usize) -> Result<Tally> {
    config.validate()?;
    if workers == 0 || worker >= workers {
        return Err(Error::IndexOutOfRange {
            index: worker,
            size: workers,
        });
    }
    let (start, end) = worker_range(config.trials, worker, workers);
    let mut rng: RandomSource = rng::stream(config.seed, worker as u64);
    let mut scorer = Scorer::new(config.n);
    let mut trial = blank_trial(config);
    let mut tally = Tally::default();
    for _ in start..end {
        draw_trial(config, &mut trial, &mut rng);
        let v = match config.scoring {
            Scoring::Expected => scorer.expected(&config.space, &config.sim, &trial)?,
            Scoring::Sampled => scorer.sampled(&config.space, &config.sim, &trial, &mut rng)?,
        };
        tally.push(v);
    }
    Ok(tally)
}

/// Merges worker tallies in worker order.
pub fn merge_workers<I: IntoIterator<Item = Tally>>(tallies: I) -> Tally {
    tallies.into_iter().fold(Tally::default(), Tally::merge)
}

/// Single-worker estimate; the reproducibility reference.
pub fn estimate(config: &TrialConfig) -> Result<EstimateResult> {
    estimate_with_workers(config, 1)
}

/// Runs the `workers` shares one after another and merges them. Equal to a
/// parallel run with the same worker count.
pub fn estimate_with_workers(config: &TrialConfig, workers: usize) -> Result<EstimateResult> {
    let mut tallies = Vec::with_capacity(workers);
    for w in 0..workers.max(1) {
        tallies.push(run_worker(config, w, workers.max(1))?);
    }
    Ok(merge_workers(tallies).result(config.seed))
}

#[derive(Clone, Debug, PartialEq)]
pub enum SweepAxis {
    /// Resolutions, applied with [`Similarity::with_resolution`].
    Eps(Vec<f64>),
    /// Stimulus counts.
    N(Vec<usize>),
}

impl SweepAxis {
    pub fn len(&self) -> usize {
        match self {
            SweepAxis::Eps(v) => v.len(),
            SweepAxis::N(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    /// Grid value (resolution or `n`).
    pub param: f64,
    pub n: usize,
    pub sim: Similarity,
    pub similarity: EstimateResult,
    pub identification: EstimateResult,
}

/// The per-point configuration of a sweep, with seed `base + index`.
pub fn sweep_configs(base: &TrialConfig, axis: &SweepAxis) -> Result<Vec<(f64, TrialConfig)>> {
    if axis.is_empty() {
        return Err(Error::invalid("grid", "sweep grid is empty"));
    }
    let mut out = Vec::with_capacity(axis.len());
    for index in 0..axis.len() {
        let mut config = base.clone();
        config.seed = base.seed.wrapping_add(index as u64);
        let param = match axis {
            SweepAxis::Eps(grid) => {
                config.sim = base.sim.with_resolution(grid[index])?;
                grid[index]
            }
            SweepAxis::N(grid) => {
                config.n = grid[index];
                grid[index] as f64
            }
        };
        config.validate()?;
        out.push((param, config));
    }
    Ok(out)
}

/// Estimates both tasks at every grid point. The `task` of `base` is ignored.
pub fn estimate_sweep(base: &TrialConfig, axis: &SweepAxis, workers: usize) -> Result<Vec<SweepRow>> {
    sweep_configs(base, axis)?
        .into_iter()
        .map(|(param, config)| {
            let similarity = estimate_with_workers(
                &TrialConfig {
                    task: TaskKind::Similarity,
                    ..config.clone()
                },
                workers,
            )?;
            let identification = estimate_with_workers(
                &TrialConfig {
                    task: TaskKind::Identification,
                    ..config.clone()
                },
                workers,
            )?;
            Ok(SweepRow {
                param,
                n: config.n,
                sim: config.sim,
                similarity,
                identification,
            })
        })
        .collect()
}

/// Uniform probe grid: `k / grid` on the circle, `k / (grid - 1)` on the
/// segment, the `grid x grid` lattice `(a / grid, b / grid)` on the torus and
/// every point of a discrete space (where `grid` is ignored).
pub fn probe_grid(space: &Space, grid: usize) -> Result<Vec<Point>> {
    if grid == 0 {
        return Err(Error::invalid("grid", "probe grid must be non-empty"));
    }
    Ok(match *space {
        Space::Circle => (0..grid).map(|k| Point::Real(k as f64 / grid as f64)).collect(),
        Space::Segment => {
            if grid == 1 {
                alloc::vec![Point::Real(0.5)]
            } else {
                (0..grid)
                    .map(|k| Point::Real(k as f64 / (grid - 1) as f64))
                    .collect()
            }
        }
        Space::Torus => (0..grid * grid)
            .map(|k| Point::Planar((k / grid) as f64 / grid as f64, (k % grid) as f64 / grid as f64))
            .collect(),
        Space::DiscreteCircle { points } | Space::DiscreteSegment { points } => {
            (0..points).map(Point::Index).collect()
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfilePoint {
    pub probe: Point,
    /// `g(x1, p) / (g(x1, p) + g(x2, p))`.
    pub d1: f64,
}

/// The two-stimulus decision function `D_1` over a probe grid.
pub fn decision_profile(
    space: &Space,
    sim: &Similarity,
    x1: Point,
    x2: Point,
    grid: usize,
) -> Result<Vec<ProfilePoint>> {
    if !space.contains(&x1) || !space.contains(&x2) {
        return Err(Error::invalid("stimulus", "stimulus is not a point of the space"));
    }
    if x1 == x2 {
        return Err(Error::invalid("stimulus", "x1 and x2 must differ"));
    }
    let mut probs = [0.0; 2];
    probe_grid(space, grid)?
        .into_iter()
        .map(|probe| {
            let sims = [sim.between(space, &x1, &probe)?, sim.between(space, &x2, &probe)?];
            crate::decision::fill_decision_probs(&sims, &mut probs)?;
            Ok(ProfilePoint { probe, d1: probs[0] })
        })
        .collect()
}
