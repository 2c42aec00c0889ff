//! Closed-form success probabilities under constant and linearly decaying
//! similarity, and the Pareto fronts they trace.
//!
//! Everything here is parameterized by the ball-measure moments
//! `<b(eps)>` and `<b(eps)^2>` (or by `b` itself in homogeneous spaces).

use alloc::vec::Vec;

use crate::similarity::Similarity;
use crate::spaces::Space;
use crate::{Error, Result};

/// Slack allowed on the moment constraints before a value counts as a domain
/// violation.
const MOMENT_SLACK: f64 = 1e-12;

/// A point of a `(p_S, p_I)` curve together with the parameters that produced it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoryPoint {
    pub n: usize,
    pub b_mean: f64,
    pub b_mean_sq: f64,
    pub delta: f64,
    pub p_s: f64,
    pub p_i: f64,
}

fn check_unit(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain { name, value })
    }
}

fn check_moments(b_mean: f64, b_mean_sq: f64) -> Result<()> {
    check_unit("b_mean", b_mean)?;
    let ok = b_mean_sq.is_finite()
        && b_mean_sq >= b_mean * b_mean - MOMENT_SLACK
        && b_mean_sq <= b_mean + MOMENT_SLACK;
    if ok {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "b_mean_sq",
            value: b_mean_sq,
        })
    }
}

fn check_noise(delta: f64) -> Result<()> {
    if delta.is_finite() && delta >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "delta",
            value: delta,
        })
    }
}

fn check_items(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::invalid("n", "tests need at least 2 items"));
    }
    Ok(())
}

/// Two-item similarity success, noise free: `1/2 + <b> - <b^2>`.
///
/// Equivalent to `1/2 + <b> - <b>^2 - Var(b)`.
pub fn ps2(b_mean: f64, b_mean_sq: f64) -> Result<f64> {
    check_moments(b_mean, b_mean_sq)?;
    Ok(0.5 + b_mean - b_mean_sq)
}

/// Two-item identification success, noise free: `1 - <b>/2`.
pub fn pi2(b_mean: f64) -> Result<f64> {
    check_unit("b_mean", b_mean)?;
    Ok(1.0 - 0.5 * b_mean)
}

/// `1/2 + (1 - Delta)/(1 + Delta) (<b> - <b^2>)`.
pub fn ps2_noise(b_mean: f64, b_mean_sq: f64, delta: f64) -> Result<f64> {
    check_moments(b_mean, b_mean_sq)?;
    check_noise(delta)?;
    Ok(0.5 + (1.0 - delta) / (1.0 + delta) * (b_mean - b_mean_sq))
}

/// `(2 - (1 - Delta) <b>) / (2 + 2 Delta)`.
pub fn pi2_noise(b_mean: f64, delta: f64) -> Result<f64> {
    check_unit("b_mean", b_mean)?;
    check_noise(delta)?;
    Ok((2.0 - (1.0 - delta) * b_mean) / (2.0 + 2.0 * delta))
}

/// `n`-item similarity success in a homogeneous space:
/// `1/n + sum_{k=1}^{n-1} ((1-b)^{n-k} - (1-b)^n) / k`.
pub fn psn(n: usize, b: f64) -> Result<f64> {
    check_items(n)?;
    check_unit("b", b)?;
    Ok(psn_unchecked(n, b))
}

fn psn_unchecked(n: usize, b: f64) -> f64 {
    let q = 1.0 - b;
    let qn = libm::pow(q, n as f64);
    let mut sum = 1.0 / n as f64;
    // (1-b)^{n-k} built up from k = n-1 (power 1) down to k = 1.
    let mut power = 1.0;
    for k in (1..n).rev() {
        power *= q;
        sum += (power - qn) / k as f64;
    }
    sum
}

/// `n`-item identification success in a homogeneous space:
/// `(1 - (1-b)^n) / (n b)`, extended by continuity to `1` at `b = 0`.
pub fn pin(n: usize, b: f64) -> Result<f64> {
    check_items(n)?;
    check_unit("b", b)?;
    Ok(pin_unchecked(n, b))
}

fn pin_unchecked(n: usize, b: f64) -> f64 {
    if b == 0.0 {
        return 1.0;
    }
    // 1 - (1-b)^n without cancellation for small b.
    let covered = -libm::expm1(n as f64 * libm::log1p(-b));
    covered / (n as f64 * b)
}

/// `E_{p ~ nu}` of [`psn`] at `b_p(eps)`, by the probe quadrature of `space`.
pub fn psn_hetero(space: &Space, eps: f64, n: usize, nodes: usize) -> Result<f64> {
    check_items(n)?;
    space.probe_average(eps, nodes, |b| psn_unchecked(n, b.clamp(0.0, 1.0)))
}

/// `E_{p ~ nu}` of [`pin`] at `b_p(eps)`.
pub fn pin_hetero(space: &Space, eps: f64, n: usize, nodes: usize) -> Result<f64> {
    check_items(n)?;
    space.probe_average(eps, nodes, |b| pin_unchecked(n, b.clamp(0.0, 1.0)))
}

/// Two-item `(p_S, p_I)` on the uniform circle under
/// `g(d) = max(0, 1 - d/eps)`, with `b = 2 eps`.
pub fn linear_decay_circle(b: f64) -> Result<(f64, f64)> {
    check_unit("b", b)?;
    let ln2 = core::f64::consts::LN_2;
    let p_s = 0.5 + b - (1.5 - ln2) * b * b;
    let p_i = 1.0 - (1.0 - ln2) * b;
    Ok((p_s, p_i))
}

fn unit_grid(grid: usize) -> Result<impl Iterator<Item = f64>> {
    if grid < 2 {
        return Err(Error::invalid("grid", "need at least 2 grid points"));
    }
    let last = (grid - 1) as f64;
    Ok((0..grid).map(move |k| k as f64 / last))
}

/// Homogeneous `(p_S, p_I)` front over `b` in `linspace(0, 1, grid)`.
///
/// Noisy fronts exist in closed form only for `n = 2`.
pub fn pareto_front(n: usize, delta: f64, grid: usize) -> Result<Vec<TheoryPoint>> {
    check_items(n)?;
    check_noise(delta)?;
    if n > 2 && delta != 0.0 {
        return Err(Error::Unsupported(
            "no closed form for noisy tests with more than 2 items",
        ));
    }
    unit_grid(grid)?
        .map(|b| {
            let (p_s, p_i) = if n == 2 {
                (ps2_noise(b, b * b, delta)?, pi2_noise(b, delta)?)
            } else {
                (psn_unchecked(n, b), pin_unchecked(n, b))
            };
            Ok(TheoryPoint {
                n,
                b_mean: b,
                b_mean_sq: b * b,
                delta,
                p_s,
                p_i,
            })
        })
        .collect()
}

/// Linear-decay circle curve over `b` in `linspace(0, 1, grid)`.
pub fn linear_decay_front(grid: usize) -> Result<Vec<TheoryPoint>> {
    unit_grid(grid)?
        .map(|b| {
            let (p_s, p_i) = linear_decay_circle(b)?;
            Ok(TheoryPoint {
                n: 2,
                b_mean: b,
                b_mean_sq: b * b,
                delta: 0.0,
                p_s,
                p_i,
            })
        })
        .collect()
}

/// Closed-form `(p_S, p_I)` for a trial configuration, or `None` when no
/// closed form is known (discrete spaces, noisy tests with `n > 2`,
/// exponential or tabulated similarities, linear decay off the circle).
pub fn closed_form(space: &Space, sim: &Similarity, n: usize, nodes: usize) -> Result<Option<(f64, f64)>> {
    check_items(n)?;
    if space.is_discrete() {
        return Ok(None);
    }
    match *sim {
        Similarity::Constant { resolution, noise } if n == 2 => {
            let m = space.ball_moments(resolution, nodes)?;
            let mean = m.mean.clamp(0.0, 1.0);
            let mean_sq = m.mean_sq.clamp(mean * mean, mean);
            Ok(Some((ps2_noise(mean, mean_sq, noise)?, pi2_noise(mean, noise)?)))
        }
        Similarity::Constant { resolution, noise } if noise == 0.0 => Ok(Some((
            psn_hetero(space, resolution, n, nodes)?,
            pin_hetero(space, resolution, n, nodes)?,
        ))),
        Similarity::LinearDecay { resolution } if n == 2 && *space == Space::Circle && resolution <= 0.5 => {
            Ok(Some(linear_decay_circle(2.0 * resolution)?))
        }
        _ => Ok(None),
    }
}

/// Euclidean distance in the `(p_S, p_I)` plane from `point` to the polyline
/// through `curve`.
pub fn distance_to_curve(point: (f64, f64), curve: &[TheoryPoint]) -> f64 {
    let (x, y) = point;
    match curve {
        [] => f64::INFINITY,
        [only] => libm::hypot(x - only.p_s, y - only.p_i),
        _ => curve
            .windows(2)
            .map(|w| {
                let (ax, ay) = (w[0].p_s, w[0].p_i);
                let (dx, dy) = (w[1].p_s - ax, w[1].p_i - ay);
                let len2 = dx * dx + dy * dy;
                let t = if len2 > 0.0 {
                    (((x - ax) * dx + (y - ay) * dy) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                libm::hypot(x - ax - t * dx, y - ay - t * dy)
            })
            .fold(f64::INFINITY, f64::min),
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `sum_{j=1}^n C(n, j) x^j (1-x)^{n-j} / j`.
pub fn lemma2_lhs(n: usize, x: f64) -> Result<f64> {
    if n < 1 {
        return Err(Error::invalid("n", "need n >= 1"));
    }
    check_unit("x", x)?;
    Ok((1..=n)
        .map(|j| {
            binomial(n, j) * libm::pow(x, j as f64) * libm::pow(1.0 - x, (n - j) as f64) / j as f64
        })
        .sum())
}

/// `sum_{j=1}^n ((1-x)^{n-j} - (1-x)^n) / j`.
pub fn lemma2_rhs(n: usize, x: f64) -> Result<f64> {
    if n < 1 {
        return Err(Error::invalid("n", "need n >= 1"));
    }
    check_unit("x", x)?;
    let q = 1.0 - x;
    let qn = libm::pow(q, n as f64);
    Ok((1..=n)
        .map(|j| (libm::pow(q, (n - j) as f64) - qn) / j as f64)
        .sum())
}
