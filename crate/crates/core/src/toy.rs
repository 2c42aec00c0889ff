//! Toy autoencoder `f(x) = relu(W^T W x)` on one-hot stimuli.
//!
//! Column `w_i` of `W` (`m x l`) is the embedding of stimulus `i`, and the
//! network output `f(e_i)_j = relu(w_j . w_i)` is read as the learned
//! similarity `g(x_i, x_j)`. Two objectives are supported: reconstruction of
//! the one-hot inputs, and a two-reference similarity test on a distance
//! matrix. Gradients are written out by hand; the optimizer is Adam.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::decision::{Scorer, Trial};
use crate::matrix::Matrix;
use crate::rng::{self, RandomSource};
use crate::similarity::{Similarity, SimilarityTable};
use crate::spaces::{Point, Space};
use crate::{Error, Result};

/// Smallest decision probability fed to the log in the NLL objective.
pub const NLL_FLOOR: f64 = 1e-12;

/// Stream of the training sampler; evaluation after epoch `e` uses stream `1 + e`.
const TRAIN_STREAM: u64 = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Loss {
    Reconstruction,
    Semantic,
}

/// How a semantic triplet is scored.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SemanticForm {
    /// `-log D_correct`.
    Nll,
    /// `-D_correct / 2`.
    HalfD,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Stimulus space; must be discrete. Its point count is `l`.
    pub space: Space,
    /// Hidden dimension `m`.
    pub hidden: usize,
    pub loss: Loss,
    pub semantic_form: SemanticForm,
    pub epochs: usize,
    pub samples_per_epoch: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub init_low: f64,
    pub init_high: f64,
    pub eval_trials: usize,
    pub seed: u64,
    /// Record a similarity profile every this many epochs (and at the last
    /// one). Zero disables profiles.
    pub profile_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            space: Space::DiscreteCircle { points: 50 },
            hidden: 10,
            loss: Loss::Semantic,
            semantic_form: SemanticForm::Nll,
            epochs: 500,
            samples_per_epoch: 2000,
            batch_size: 128,
            lr: 0.0007,
            weight_decay: 0.0,
            init_low: 0.0,
            init_high: 2.0,
            eval_trials: 1000,
            seed: 0,
            profile_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn stimuli(&self) -> usize {
        self.space.points().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let l = self
            .space
            .points()
            .ok_or(Error::invalid("space", "the toy model needs a discrete space"))?;
        if self.loss == Loss::Semantic && l < 3 {
            return Err(Error::invalid("space", "semantic triplets need at least 3 points"));
        }
        if self.hidden == 0 {
            return Err(Error::invalid("m", "hidden dimension must be positive"));
        }
        if self.samples_per_epoch == 0 || self.batch_size == 0 || self.eval_trials == 0 {
            return Err(Error::invalid(
                "samples",
                "sample, batch and evaluation counts must be positive",
            ));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Domain {
                name: "lr",
                value: self.lr,
            });
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::Domain {
                name: "weight_decay",
                value: self.weight_decay,
            });
        }
        if !(self.init_low.is_finite() && self.init_high.is_finite())
            || self.init_low > self.init_high
        {
            return Err(Error::invalid("init", "need finite init_low <= init_high"));
        }
        Ok(())
    }

    pub fn optimizer(&self) -> Adam {
        Adam {
            lr: self.lr,
            weight_decay: self.weight_decay,
            ..Adam::default()
        }
    }
}

/// Adam hyper-parameters. Weight decay is added to the gradient (L2 form).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Adam {
            lr: 0.0007,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ToyModelState {
    pub weights: Matrix,
    pub adam_m: Matrix,
    pub adam_v: Matrix,
    pub step: u64,
    pub rng: RandomSource,
}

impl ToyModelState {
    /// State with the given weights, zeroed moments and a sampler seeded by `seed`.
    pub fn from_weights(weights: Matrix, seed: u64) -> Self {
        let (m, l) = weights.shape();
        ToyModelState {
            adam_m: Matrix::zeros(m, l),
            adam_v: Matrix::zeros(m, l),
            weights,
            step: 0,
            rng: rng::stream(seed, TRAIN_STREAM),
        }
    }
}

/// `W` with i.i.d. entries uniform in `[init_low, init_high]`.
pub fn init_model(config: &TrainConfig) -> Result<ToyModelState> {
    config.validate()?;
    let l = config.stimuli();
    let mut rng = rng::stream(config.seed, TRAIN_STREAM);
    let (lo, hi) = (config.init_low, config.init_high);
    let weights = Matrix::from_fn(config.hidden, l, |_, _| {
        if lo == hi {
            lo
        } else {
            rng.random_range(lo..=hi)
        }
    });
    Ok(ToyModelState {
        adam_m: Matrix::zeros(config.hidden, l),
        adam_v: Matrix::zeros(config.hidden, l),
        weights,
        step: 0,
        rng,
    })
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

fn check_index(weights: &Matrix, i: usize) -> Result<()> {
    if i < weights.cols() {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange {
            index: i,
            size: weights.cols(),
        })
    }
}

/// `f(e_i)_j = relu(w_j . w_i)`.
pub fn forward(weights: &Matrix, i: usize) -> Result<Vec<f64>> {
    check_index(weights, i)?;
    Ok((0..weights.cols())
        .map(|j| relu(weights.column_dot(j, i)))
        .collect())
}

/// `W^T W`, `l x l`.
pub fn gram(weights: &Matrix) -> Matrix {
    let l = weights.cols();
    let mut g = Matrix::zeros(l, l);
    for i in 0..l {
        for j in i..l {
            let v = weights.column_dot(i, j);
            g.set(i, j, v);
            g.set(j, i, v);
        }
    }
    g
}

/// `relu(w_i . w_j)` as a similarity table.
pub fn learned_table(weights: &Matrix) -> SimilarityTable {
    let l = weights.cols();
    let mut entries = Vec::with_capacity(l * l);
    for i in 0..l {
        for j in 0..l {
            entries.push(relu(weights.column_dot(i, j)));
        }
    }
    SimilarityTable::new(l, entries).expect("relu outputs are non-negative")
}

/// `||e_i - relu(W^T w_i)||^2`, adding its gradient into `grad` when given.
fn reconstruction_term(weights: &Matrix, i: usize, mut grad: Option<(&mut Matrix, f64)>) -> f64 {
    let mut loss = 0.0;
    for j in 0..weights.cols() {
        let s = weights.column_dot(j, i);
        let target = if i == j { 1.0 } else { 0.0 };
        let r = relu(s) - target;
        loss += r * r;
        if let Some((g, scale)) = grad.as_mut() {
            if s > 0.0 {
                let c = *scale * 2.0 * r;
                g.add_scaled_column(j, c, weights, i);
                g.add_scaled_column(i, c, weights, j);
            }
        }
    }
    loss
}

/// `L_rec = sum_i ||e_i - relu(W^T w_i)||^2`.
pub fn loss_reconstruction(weights: &Matrix) -> f64 {
    (0..weights.cols())
        .map(|i| reconstruction_term(weights, i, None))
        .sum()
}

/// Gradient of [`loss_reconstruction`] with respect to `W`.
pub fn grad_reconstruction(weights: &Matrix) -> Matrix {
    let mut g = Matrix::zeros(weights.rows(), weights.cols());
    for i in 0..weights.cols() {
        reconstruction_term(weights, i, Some((&mut g, 1.0)));
    }
    g
}

/// Two references `i`, `j` and a probe `k` (all stimulus indices).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Triplet {
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

/// Pairwise distances `d(x_a, x_b)` between the points of a discrete space.
pub fn distance_matrix(space: &Space) -> Result<Matrix> {
    let l = space
        .points()
        .ok_or(Error::invalid("space", "distance matrix needs a discrete space"))?;
    let mut d = Matrix::zeros(l, l);
    for a in 0..l {
        for b in 0..l {
            d.set(a, b, space.distance(&Point::Index(a), &Point::Index(b))?);
        }
    }
    Ok(d)
}

fn semantic_term(
    weights: &Matrix,
    t: Triplet,
    dist: &Matrix,
    form: SemanticForm,
    grad: Option<(&mut Matrix, f64)>,
) -> f64 {
    let refs = [t.i, t.j];
    let scores = [weights.column_dot(t.i, t.k), weights.column_dot(t.j, t.k)];
    let sims = [relu(scores[0]), relu(scores[1])];
    let total = sims[0] + sims[1];
    let (di, dj) = (dist.get(t.i, t.k), dist.get(t.j, t.k));
    let target = if di < dj {
        [1.0, 0.0]
    } else if dj < di {
        [0.0, 1.0]
    } else {
        [0.5, 0.5]
    };

    if total == 0.0 {
        // Uniform decision, no gradient.
        return match form {
            SemanticForm::Nll => core::f64::consts::LN_2,
            SemanticForm::HalfD => -0.25,
        };
    }
    let probs = [sims[0] / total, sims[1] / total];

    // dL/dsim_y for y in {0, 1}.
    let mut dsim = [0.0; 2];
    let loss = match form {
        SemanticForm::Nll => {
            let mut loss = 0.0;
            for x in 0..2 {
                if target[x] == 0.0 {
                    continue;
                }
                if probs[x] < NLL_FLOOR {
                    loss -= target[x] * libm::log(NLL_FLOOR);
                    continue;
                }
                loss -= target[x] * libm::log(probs[x]);
                // d log D_x / d sim_y = [x = y] / sim_x - 1 / total
                for (y, d) in dsim.iter_mut().enumerate() {
                    let own = if x == y { 1.0 / sims[x] } else { 0.0 };
                    *d -= target[x] * (own - 1.0 / total);
                }
            }
            loss
        }
        SemanticForm::HalfD => {
            let mut loss = 0.0;
            for x in 0..2 {
                loss -= 0.5 * target[x] * probs[x];
                // d D_x / d sim_y = [x = y] / total - sim_x / total^2
                for (y, d) in dsim.iter_mut().enumerate() {
                    let own = if x == y { 1.0 / total } else { 0.0 };
                    *d -= 0.5 * target[x] * (own - sims[x] / (total * total));
                }
            }
            loss
        }
    };

    if let Some((g, scale)) = grad {
        for y in 0..2 {
            if scores[y] > 0.0 && dsim[y] != 0.0 {
                let c = scale * dsim[y];
                // score_y = w_ref . w_k
                g.add_scaled_column(refs[y], c, weights, t.k);
                g.add_scaled_column(t.k, c, weights, refs[y]);
            }
        }
    }
    loss
}

fn check_triplet(weights: &Matrix, t: Triplet, dist: &Matrix) -> Result<()> {
    for idx in [t.i, t.j, t.k] {
        check_index(weights, idx)?;
    }
    if t.i == t.j {
        return Err(Error::invalid("triplet", "references must differ"));
    }
    dist.check_shape(weights.cols(), weights.cols())
}

/// Semantic loss of one triplet. The correct reference is the one nearer the
/// probe under `dist`; exact ties use the target `(1/2, 1/2)`. When both
/// similarities vanish the decision is uniform and the loss is constant.
pub fn loss_semantic(weights: &Matrix, t: Triplet, dist: &Matrix, form: SemanticForm) -> Result<f64> {
    check_triplet(weights, t, dist)?;
    Ok(semantic_term(weights, t, dist, form, None))
}

pub fn grad_semantic(
    weights: &Matrix,
    t: Triplet,
    dist: &Matrix,
    form: SemanticForm,
) -> Result<Matrix> {
    check_triplet(weights, t, dist)?;
    let mut g = Matrix::zeros(weights.rows(), weights.cols());
    semantic_term(weights, t, dist, form, Some((&mut g, 1.0)));
    Ok(g)
}

/// One bias-corrected Adam update of `state.weights`.
pub fn adam_step(state: &mut ToyModelState, grad: &Matrix, opt: &Adam) -> Result<()> {
    let (rows, cols) = state.weights.shape();
    grad.check_shape(rows, cols)?;
    state.adam_m.check_shape(rows, cols)?;
    state.adam_v.check_shape(rows, cols)?;
    state.step += 1;
    let t = state.step as f64;
    let bias1 = 1.0 - libm::pow(opt.beta1, t);
    let bias2 = 1.0 - libm::pow(opt.beta2, t);
    let w = state.weights.as_mut_slice();
    let m = state.adam_m.as_mut_slice();
    let v = state.adam_v.as_mut_slice();
    for (((w, m), v), g) in w.iter_mut().zip(m).zip(v).zip(grad.as_slice()) {
        let g = g + opt.weight_decay * *w;
        *m = opt.beta1 * *m + (1.0 - opt.beta1) * g;
        *v = opt.beta2 * *v + (1.0 - opt.beta2) * g * g;
        let m_hat = *m / bias1;
        let v_hat = *v / bias2;
        *w -= opt.lr * m_hat / (libm::sqrt(v_hat) + opt.eps);
    }
    Ok(())
}

/// Mean decision mass on the correct answer, with standard errors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub p_s: f64,
    pub p_i: f64,
    pub p_s_se: f64,
    pub p_i_se: f64,
}

fn distinct_pair<R: Rng + ?Sized>(l: usize, rng: &mut R) -> (usize, usize) {
    let i = rng.random_range(0..l);
    let mut j = rng.random_range(0..l - 1);
    if j >= i {
        j += 1;
    }
    (i, j)
}

fn distinct_triplet<R: Rng + ?Sized>(l: usize, rng: &mut R) -> Triplet {
    let (i, j) = distinct_pair(l, rng);
    let k = loop {
        let k = rng.random_range(0..l);
        if k != i && k != j {
            break k;
        }
    };
    Triplet { i, j, k }
}

fn mean_and_se(sum: f64, sum_sq: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = sum / nf;
    let se = if n > 1 {
        let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
        libm::sqrt(var / nf)
    } else {
        0.0
    };
    (mean, se)
}

/// Scores `trials` similarity triplets (three distinct stimuli) and `trials`
/// identification triplets (two distinct stimuli, probe equal to one of them)
/// under the learned similarity `relu(w_i . w_j)` and the distances of `space`.
pub fn evaluate<R: Rng + ?Sized>(
    weights: &Matrix,
    space: &Space,
    trials: usize,
    rng: &mut R,
) -> Result<Evaluation> {
    let l = weights.cols();
    if space.points() != Some(l) {
        return Err(Error::invalid(
            "space",
            "space must be discrete with one point per column of W",
        ));
    }
    if l < 3 {
        return Err(Error::invalid("space", "evaluation needs at least 3 stimuli"));
    }
    if trials == 0 {
        return Err(Error::invalid("trials", "need at least one trial"));
    }
    let sim = Similarity::Table(learned_table(weights));
    let mut scorer = Scorer::new(2);
    let mut trial = Trial::similarity(vec![Point::Index(0), Point::Index(1)], Point::Index(2))?;

    let (mut s_sum, mut s_sq) = (0.0, 0.0);
    for _ in 0..trials {
        let t = distinct_triplet(l, rng);
        trial.stimuli[0] = Point::Index(t.i);
        trial.stimuli[1] = Point::Index(t.j);
        trial.probe = Point::Index(t.k);
        trial.task = crate::decision::Task::Similarity;
        let v = scorer.expected(space, &sim, &trial)?;
        s_sum += v;
        s_sq += v * v;
    }
    let (mut i_sum, mut i_sq) = (0.0, 0.0);
    for _ in 0..trials {
        let (i, j) = distinct_pair(l, rng);
        let probe_index = rng.random_range(0..2usize);
        trial.stimuli[0] = Point::Index(i);
        trial.stimuli[1] = Point::Index(j);
        trial.probe = trial.stimuli[probe_index];
        trial.task = crate::decision::Task::Identification { probe_index };
        let v = scorer.expected(space, &sim, &trial)?;
        i_sum += v;
        i_sq += v * v;
    }
    let (p_s, p_s_se) = mean_and_se(s_sum, s_sq, trials);
    let (p_i, p_i_se) = mean_and_se(i_sum, i_sq, trials);
    Ok(Evaluation {
        p_s,
        p_i,
        p_s_se,
        p_i_se,
    })
}

/// [`evaluate`] with a generator derived from `seed`.
pub fn evaluate_seeded(weights: &Matrix, space: &Space, trials: usize, seed: u64) -> Result<Evaluation> {
    let mut rng = rng::stream(seed, 1);
    evaluate(weights, space, trials, &mut rng)
}

/// Learned similarity rows, each circularly shifted so that its own stimulus
/// sits at index `l / 2`, averaged over stimuli.
pub fn similarity_profile(weights: &Matrix, space: &Space) -> Result<Vec<f64>> {
    let l = weights.cols();
    match space {
        Space::DiscreteCircle { points } if *points == l => {}
        Space::DiscreteCircle { .. } => {
            return Err(Error::invalid(
                "space",
                "space must have one point per column of W",
            ))
        }
        _ => {
            return Err(Error::Unsupported(
                "profile averaging needs the shift symmetry of a discrete circle",
            ))
        }
    }
    let centre = l / 2;
    let mut profile = vec![0.0; l];
    for i in 0..l {
        for j in 0..l {
            let shifted = (j + l + centre - i) % l;
            profile[shifted] += relu(weights.column_dot(i, j));
        }
    }
    profile.iter_mut().for_each(|v| *v /= l as f64);
    Ok(profile)
}

/// Circle distance of profile index `k` from the centre `l / 2`.
pub fn profile_distance(l: usize, k: usize) -> f64 {
    let offset = k.abs_diff(l / 2);
    offset.min(l - offset) as f64 / l as f64
}

/// Far-field cutoff for the noise estimate, in circle-distance units.
pub const NOISE_FAR_FIELD: f64 = 0.35;
/// Margin above the noise floor that still counts as inside the resolution.
pub const RESOLUTION_MARGIN: f64 = 0.05;

/// Noise level and resolution read off a centred similarity profile.
///
/// The profile is divided by its centre value. `delta_hat` is the mean of the
/// normalized profile at circle distance above [`NOISE_FAR_FIELD`], clamped to
/// `[0, 1]`. `eps_hat` is the largest distance `r` such that the profile,
/// averaged over both sides of the centre, stays at or above
/// `delta_hat + RESOLUTION_MARGIN` for every distance up to `r`.
pub fn estimate_noise_and_resolution(profile: &[f64]) -> Result<(f64, f64)> {
    let l = profile.len();
    if l < 2 {
        return Err(Error::invalid("profile", "profile needs at least 2 entries"));
    }
    let centre = l / 2;
    let peak = profile[centre];
    if !(peak.is_finite() && peak > 0.0) {
        return Err(Error::Domain {
            name: "profile peak",
            value: peak,
        });
    }
    let (far_sum, far_count) = profile
        .iter()
        .enumerate()
        .filter(|(k, _)| profile_distance(l, *k) > NOISE_FAR_FIELD)
        .fold((0.0, 0usize), |(s, c), (_, v)| (s + v / peak, c + 1));
    if far_count == 0 {
        return Err(Error::invalid(
            "profile",
            "profile too short to have a far field",
        ));
    }
    let delta_hat = (far_sum / far_count as f64).clamp(0.0, 1.0);
    let threshold = delta_hat + RESOLUTION_MARGIN;

    let mut eps_hat = 0.0;
    for offset in 1..=l / 2 {
        let right = profile[(centre + offset) % l] / peak;
        let left = profile[(centre + l - offset) % l] / peak;
        if 0.5 * (left + right) < threshold {
            break;
        }
        eps_hat = offset as f64 / l as f64;
    }
    Ok((delta_hat, eps_hat))
}

/// Snapshot of the learned similarity.
#[derive(Clone, Debug, PartialEq)]
pub enum Profile {
    /// Centred and averaged (circle spaces).
    Averaged(Vec<f64>),
    /// Full table, one row per stimulus (spaces without shift symmetry).
    Raw(SimilarityTable),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub epoch: usize,
    pub p_s: f64,
    pub p_i: f64,
    pub loss: f64,
    pub profile: Option<Profile>,
}

/// Step-by-step training driver.
#[derive(Debug, Clone)]
pub struct Trainer {
    config: TrainConfig,
    state: ToyModelState,
    dist: Matrix,
    opt: Adam,
    epoch: usize,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        let state = init_model(&config)?;
        Trainer::with_state(config, state)
    }

    /// Training from a given state (e.g. hand-built weights).
    pub fn with_state(config: TrainConfig, state: ToyModelState) -> Result<Self> {
        config.validate()?;
        state.weights.check_shape(config.hidden, config.stimuli())?;
        let dist = distance_matrix(&config.space)?;
        let opt = config.optimizer();
        Ok(Trainer {
            config,
            state,
            dist,
            opt,
            epoch: 0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn state(&self) -> &ToyModelState {
        &self.state
    }

    pub fn into_state(self) -> ToyModelState {
        self.state
    }

    /// Number of completed epochs.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// Exact mean of the per-sample training objective at the current weights.
    pub fn objective(&self) -> f64 {
        let w = &self.state.weights;
        let l = w.cols();
        match self.config.loss {
            Loss::Reconstruction => loss_reconstruction(w) / l as f64,
            Loss::Semantic => {
                let mut sum = 0.0;
                let mut count = 0usize;
                for i in 0..l {
                    for j in 0..l {
                        for k in 0..l {
                            if i != j && k != i && k != j {
                                let t = Triplet { i, j, k };
                                sum += semantic_term(w, t, &self.dist, self.config.semantic_form, None);
                                count += 1;
                            }
                        }
                    }
                }
                sum / count as f64
            }
        }
    }

    /// One epoch of mini-batch Adam. Returns the mean per-sample loss.
    pub fn run_epoch(&mut self) -> Result<f64> {
        let l = self.config.stimuli();
        let (m, _) = self.state.weights.shape();
        let mut grad = Matrix::zeros(m, l);
        let mut remaining = self.config.samples_per_epoch;
        let mut loss_sum = 0.0;
        while remaining > 0 {
            let batch = remaining.min(self.config.batch_size);
            remaining -= batch;
            grad.fill(0.0);
            let scale = 1.0 / batch as f64;
            for _ in 0..batch {
                let w = &self.state.weights;
                loss_sum += match self.config.loss {
                    Loss::Reconstruction => {
                        let i = self.state.rng.random_range(0..l);
                        reconstruction_term(w, i, Some((&mut grad, scale)))
                    }
                    Loss::Semantic => {
                        let t = distinct_triplet(l, &mut self.state.rng);
                        semantic_term(
                            w,
                            t,
                            &self.dist,
                            self.config.semantic_form,
                            Some((&mut grad, scale)),
                        )
                    }
                };
            }
            adam_step(&mut self.state, &grad, &self.opt)?;
        }
        self.epoch += 1;
        Ok(loss_sum / self.config.samples_per_epoch as f64)
    }

    /// Evaluation of the current weights, tagged with the current epoch.
    pub fn record(&self, loss: f64, with_profile: bool) -> Result<TrajectoryRecord> {
        let mut rng = rng::stream(self.config.seed, 1 + self.epoch as u64);
        let eval = evaluate(
            &self.state.weights,
            &self.config.space,
            self.config.eval_trials,
            &mut rng,
        )?;
        let profile = if with_profile {
            Some(self.profile()?)
        } else {
            None
        };
        Ok(TrajectoryRecord {
            epoch: self.epoch,
            p_s: eval.p_s,
            p_i: eval.p_i,
            loss,
            profile,
        })
    }

    pub fn profile(&self) -> Result<Profile> {
        Ok(match self.config.space {
            Space::DiscreteCircle { .. } => Profile::Averaged(similarity_profile(
                &self.state.weights,
                &self.config.space,
            )?),
            _ => Profile::Raw(learned_table(&self.state.weights)),
        })
    }

    fn wants_profile(&self) -> bool {
        let every = self.config.profile_every;
        every > 0 && (self.epoch % every == 0 || self.epoch == self.config.epochs)
    }

    /// Record describing the untrained model (epoch 0).
    pub fn initial_record(&self) -> Result<TrajectoryRecord> {
        self.record(self.objective(), self.config.profile_every > 0)
    }

    /// Runs the remaining epochs and returns one record per epoch, evaluated
    /// after that epoch's updates. With zero epochs the single record is the
    /// initial evaluation.
    pub fn run(&mut self) -> Result<Vec<TrajectoryRecord>> {
        if self.config.epochs == 0 {
            return Ok(vec![self.initial_record()?]);
        }
        let mut records = Vec::with_capacity(self.config.epochs);
        while self.epoch < self.config.epochs {
            let loss = self.run_epoch()?;
            if !self.state.weights.is_finite() {
                return Err(Error::Unsupported("training diverged to non-finite weights"));
            }
            records.push(self.record(loss, self.wants_profile())?);
        }
        Ok(records)
    }
}

/// Trains from [`init_model`] and returns the per-epoch trajectory.
pub fn train(config: &TrainConfig) -> Result<Vec<TrajectoryRecord>> {
    Trainer::new(config.clone())?.run()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_weights(m: usize, l: usize, seed: u64, lo: f64, hi: f64) -> Matrix {
        let mut r = rng::stream(seed, 9);
        Matrix::from_fn(m, l, |_, _| r.random_range(lo..hi))
    }

    /// `m x l` with orthonormal columns (requires `l <= m`).
    fn orthonormal(m: usize, l: usize) -> Matrix {
        Matrix::from_fn(m, l, |r, c| if r == c { 1.0 } else { 0.0 })
    }

    #[test]
    fn init_ranges_and_determinism() {
        let cfg = TrainConfig::default();
        let a = init_model(&cfg).unwrap();
        assert_eq!(a.weights.shape(), (10, 50));
        assert!(a.weights.as_slice().iter().all(|v| (0.0..=2.0).contains(v)));
        assert!(a.adam_m.as_slice().iter().all(|v| *v == 0.0));
        assert_eq!(a.step, 0);
        let b = init_model(&cfg).unwrap();
        assert_eq!(a.weights, b.weights);

        let constant = TrainConfig {
            init_low: 0.3,
            init_high: 0.3,
            ..TrainConfig::default()
        };
        let c = init_model(&constant).unwrap();
        assert!(c.weights.as_slice().iter().all(|v| *v == 0.3));
    }

    #[test]
    fn config_validation() {
        let bad = [
            TrainConfig {
                space: Space::Circle,
                ..TrainConfig::default()
            },
            TrainConfig {
                lr: 0.0,
                ..TrainConfig::default()
            },
            TrainConfig {
                batch_size: 0,
                ..TrainConfig::default()
            },
            TrainConfig {
                init_low: 2.0,
                init_high: 1.0,
                ..TrainConfig::default()
            },
        ];
        for cfg in bad {
            assert!(init_model(&cfg).is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn forward_examples() {
        let w = orthonormal(6, 4);
        for i in 0..4 {
            let out = forward(&w, i).unwrap();
            let expected: Vec<f64> = (0..4).map(|j| if i == j { 1.0 } else { 0.0 }).collect();
            assert_eq!(out, expected);
        }
        let zero = Matrix::zeros(3, 5);
        assert_eq!(forward(&zero, 2).unwrap(), vec![0.0; 5]);
        assert!(forward(&zero, 5).is_err());
    }

    #[test]
    fn forward_matches_dense_product() {
        let w = random_weights(4, 7, 1, -1.0, 1.0);
        for i in 0..7 {
            let out = forward(&w, i).unwrap();
            for j in 0..7 {
                // relu(sum_r W[r][j] W[r][i]) by an explicit loop over rows.
                let mut s = 0.0;
                for r in 0..4 {
                    s += w.get(r, j) * w.get(r, i);
                }
                assert!((out[j] - s.max(0.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reconstruction_loss_examples() {
        assert_eq!(loss_reconstruction(&orthonormal(8, 5)), 0.0);
        assert_eq!(loss_reconstruction(&Matrix::zeros(3, 6)), 6.0);
    }

    #[test]
    fn table_is_symmetric_and_matches_dots() {
        let w = random_weights(5, 9, 4, -1.0, 1.0);
        let t = learned_table(&w);
        assert!(t.asymmetry() <= 1e-9);
        for i in 0..9 {
            for j in 0..9 {
                let mut s = 0.0;
                for r in 0..5 {
                    s += w.get(r, i) * w.get(r, j);
                }
                assert_eq!(t.get(i, j).unwrap(), s.max(0.0));
            }
        }
        let ortho = learned_table(&orthonormal(4, 4));
        assert_eq!(ortho.get(1, 2).unwrap(), 0.0);
        assert_eq!(ortho.get(3, 3).unwrap(), 1.0);
    }

    #[test]
    fn semantic_loss_values() {
        let space = Space::DiscreteCircle { points: 6 };
        let dist = distance_matrix(&space).unwrap();
        // w_0 . w_2 > 0 and w_1 . w_2 = 0: D for the nearer reference 0 is 1.
        let w = Matrix::from_rows(&[
            vec![1.0, 0.0, 1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        ])
        .unwrap();
        let t = Triplet { i: 0, j: 3, k: 1 };
        // refs 0 and 3, probe 1 (nearer to 0); w_0 . w_1 = 0 and w_3 . w_1 = 0
        assert!((loss_semantic(&w, t, &dist, SemanticForm::Nll).unwrap() - core::f64::consts::LN_2).abs() < 1e-15);
        let t = Triplet { i: 0, j: 3, k: 2 };
        // refs 0 and 3, probe 2: d(0,2)=2/6 < d(3,2)=1/6? no, 3 is nearer.
        let nll = loss_semantic(&w, t, &dist, SemanticForm::Nll).unwrap();
        assert!((nll - (-libm::log(NLL_FLOOR))).abs() < 1e-12);
        let t = Triplet { i: 0, j: 4, k: 2 };
        // d(0,2) = d(4,2): tie, target (1/2, 1/2); D_0 = 1, D_4 = 0 -> floored term.
        let half = loss_semantic(&w, t, &dist, SemanticForm::HalfD).unwrap();
        assert!((half + 0.25).abs() < 1e-15);
        let t = Triplet { i: 0, j: 5, k: 2 };
        // d(0,2)=2/6 < d(5,2)=3/6, D_0 = 1.
        assert_eq!(loss_semantic(&w, t, &dist, SemanticForm::Nll).unwrap(), 0.0);
        assert_eq!(loss_semantic(&w, t, &dist, SemanticForm::HalfD).unwrap(), -0.5);
    }

    #[test]
    fn equal_similarities_give_log_two() {
        let space = Space::DiscreteCircle { points: 6 };
        let dist = distance_matrix(&space).unwrap();
        let w = Matrix::filled(3, 6, 1.0);
        let t = Triplet { i: 0, j: 3, k: 1 };
        let v = loss_semantic(&w, t, &dist, SemanticForm::Nll).unwrap();
        assert!((v - core::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn triplet_validation() {
        let dist = distance_matrix(&Space::DiscreteCircle { points: 4 }).unwrap();
        let w = Matrix::filled(2, 4, 1.0);
        assert!(loss_semantic(&w, Triplet { i: 1, j: 1, k: 2 }, &dist, SemanticForm::Nll).is_err());
        assert!(loss_semantic(&w, Triplet { i: 0, j: 1, k: 4 }, &dist, SemanticForm::Nll).is_err());
        let small = distance_matrix(&Space::DiscreteCircle { points: 3 }).unwrap();
        assert!(loss_semantic(&w, Triplet { i: 0, j: 1, k: 2 }, &small, SemanticForm::Nll).is_err());
    }

    #[test]
    fn zero_similarity_triplet_has_zero_gradient() {
        let dist = distance_matrix(&Space::DiscreteCircle { points: 5 }).unwrap();
        let w = Matrix::zeros(3, 5);
        for form in [SemanticForm::Nll, SemanticForm::HalfD] {
            let g = grad_semantic(&w, Triplet { i: 0, j: 2, k: 1 }, &dist, form).unwrap();
            assert!(g.as_slice().iter().all(|v| *v == 0.0));
        }
    }

    /// Reference Adam written against plain slices.
    fn reference_adam(w: &mut [f64], m: &mut [f64], v: &mut [f64], g: &[f64], t: i32, lr: f64) {
        let (b1, b2, eps) = (0.9_f64, 0.999_f64, 1e-8);
        for idx in 0..w.len() {
            m[idx] = b1 * m[idx] + (1.0 - b1) * g[idx];
            v[idx] = b2 * v[idx] + (1.0 - b2) * g[idx] * g[idx];
            let mh = m[idx] / (1.0 - b1.powi(t));
            let vh = v[idx] / (1.0 - b2.powi(t));
            w[idx] -= lr * mh / (vh.sqrt() + eps);
        }
    }

    #[test]
    fn adam_zero_gradient_keeps_weights() {
        let w = random_weights(3, 4, 2, -1.0, 1.0);
        let mut s = ToyModelState::from_weights(w.clone(), 0);
        adam_step(&mut s, &Matrix::zeros(3, 4), &Adam::default()).unwrap();
        assert_eq!(s.weights, w);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn adam_first_step_is_sign_sized() {
        let w = random_weights(3, 4, 2, -1.0, 1.0);
        let mut s = ToyModelState::from_weights(w.clone(), 0);
        let g = Matrix::from_fn(3, 4, |r, c| if (r + c) % 2 == 0 { 0.3 } else { -2.0 });
        let opt = Adam {
            lr: 0.01,
            ..Adam::default()
        };
        adam_step(&mut s, &g, &opt).unwrap();
        for idx in 0..12 {
            let delta = s.weights.as_slice()[idx] - w.as_slice()[idx];
            let expected = -0.01 * g.as_slice()[idx].signum();
            assert!((delta - expected).abs() < 1e-8);
        }
    }

    #[test]
    fn adam_matches_reference() {
        let w0 = random_weights(3, 5, 3, -1.0, 1.0);
        let g1 = random_weights(3, 5, 4, -2.0, 2.0);
        let g2 = random_weights(3, 5, 5, -2.0, 2.0);
        let opt = Adam {
            lr: 0.05,
            ..Adam::default()
        };
        let mut s = ToyModelState::from_weights(w0.clone(), 0);
        adam_step(&mut s, &g1, &opt).unwrap();
        adam_step(&mut s, &g2, &opt).unwrap();

        let mut w = w0.as_slice().to_vec();
        let mut m = vec![0.0; 15];
        let mut v = vec![0.0; 15];
        reference_adam(&mut w, &mut m, &mut v, g1.as_slice(), 1, 0.05);
        reference_adam(&mut w, &mut m, &mut v, g2.as_slice(), 2, 0.05);
        for (a, b) in s.weights.as_slice().iter().zip(&w) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn adam_rejects_shape_mismatch() {
        let mut s = ToyModelState::from_weights(Matrix::zeros(3, 5), 0);
        assert!(adam_step(&mut s, &Matrix::zeros(5, 3), &Adam::default()).is_err());
    }

    #[test]
    fn evaluate_orthonormal_and_zero() {
        let space = Space::DiscreteCircle { points: 6 };
        let mut r = rng::stream(1, 1);
        let e = evaluate(&orthonormal(6, 6), &space, 2000, &mut r).unwrap();
        assert_eq!(e.p_i, 1.0);
        assert_eq!(e.p_s, 0.5);
        let e = evaluate(&Matrix::zeros(4, 6), &space, 500, &mut r).unwrap();
        assert_eq!((e.p_s, e.p_i), (0.5, 0.5));
        assert!(evaluate(&Matrix::zeros(4, 5), &space, 10, &mut r).is_err());
    }

    #[test]
    fn profile_examples() {
        let space = Space::DiscreteCircle { points: 6 };
        let p = similarity_profile(&orthonormal(6, 6), &space).unwrap();
        assert_eq!(p, vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let z = similarity_profile(&Matrix::zeros(2, 6), &space).unwrap();
        assert_eq!(z, vec![0.0; 6]);
        assert!(similarity_profile(&Matrix::zeros(2, 6), &Space::DiscreteSegment { points: 6 }).is_err());
    }

    #[test]
    fn profile_of_rotation_equivariant_embedding() {
        // w_i = R^i w_0 on the plane with R the rotation by 2 pi / l, which
        // makes w_i . w_j depend only on i - j mod l.
        let l = 12;
        let w = Matrix::from_fn(2, l, |r, c| {
            let angle = 2.0 * core::f64::consts::PI * c as f64 / l as f64;
            if r == 0 {
                libm::cos(angle)
            } else {
                libm::sin(angle)
            }
        });
        let profile = similarity_profile(&w, &Space::DiscreteCircle { points: l }).unwrap();
        let row = forward(&w, 3).unwrap();
        for j in 0..l {
            let shifted = (j + l + l / 2 - 3) % l;
            assert!((profile[shifted] - row[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn estimator_on_constant_profiles() {
        let l = 50;
        for (eps_steps, delta) in [(5usize, 0.1), (8, 0.0), (3, 0.3), (12, 0.05)] {
            let profile: Vec<f64> = (0..l)
                .map(|k: usize| {
                    if k.abs_diff(l / 2) <= eps_steps {
                        1.0
                    } else {
                        delta
                    }
                })
                .collect();
            let (d, e) = estimate_noise_and_resolution(&profile).unwrap();
            assert!((d - delta).abs() < 1e-12, "{d} vs {delta}");
            assert_eq!(e, eps_steps as f64 / l as f64);
        }
    }

    #[test]
    fn estimator_on_linear_profiles() {
        let l = 50;
        for eps in [0.1, 0.2, 0.3] {
            let profile: Vec<f64> = (0..l)
                .map(|k| (1.0 - profile_distance(l, k) / eps).max(0.0))
                .collect();
            let (d, e) = estimate_noise_and_resolution(&profile).unwrap();
            assert_eq!(d, 0.0);
            assert!((e - eps).abs() <= 1.0 / l as f64 + 1e-12, "eps={eps}: {e}");
        }
    }

    #[test]
    fn estimator_on_spike_and_errors() {
        let mut spike = vec![0.0; 50];
        spike[25] = 3.0;
        let (d, e) = estimate_noise_and_resolution(&spike).unwrap();
        assert_eq!((d, e), (0.0, 0.0));
        assert!(estimate_noise_and_resolution(&[0.0; 50]).is_err());
        assert!(estimate_noise_and_resolution(&[1.0]).is_err());
    }

    #[test]
    fn zero_epochs_gives_initial_record() {
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let records = train(&cfg).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].epoch, 0);
    }

    #[test]
    fn short_training_is_deterministic() {
        let cfg = TrainConfig {
            epochs: 3,
            samples_per_epoch: 300,
            eval_trials: 200,
            profile_every: 2,
            seed: 17,
            ..TrainConfig::default()
        };
        let a = train(&cfg).unwrap();
        let b = train(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert_eq!(
            a.iter().map(|r| r.profile.is_some()).collect::<Vec<_>>(),
            vec![false, true, true]
        );
        for r in &a {
            assert!((0.0..=1.0).contains(&r.p_s) && (0.0..=1.0).contains(&r.p_i));
        }
    }
}
