//! Metric probability spaces `(M, d, nu)` with uniform `nu`.
//!
//! All spaces are normalized to unit scale. Continuous spaces use coordinates
//! in `[0, 1)`; discrete spaces are `l` equally spaced points indexed `0..l`.
//! Balls are closed: `B_eps(p) = { y : d(p, y) <= eps }`.

use core::fmt;
use core::str::FromStr;

use alloc::string::ToString;
use rand::Rng;

use crate::quadrature::trapezoid;
use crate::{Error, Result};

/// Default number of nodes of the uniform quadrature grid over probes.
pub const DEFAULT_QUADRATURE_NODES: usize = 10_001;

/// Nodes used for the torus ball-area integral.
const TORUS_AREA_NODES: usize = 2_001;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    /// Unit circle `[0, 1)` with `d(x, y) = min(|x - y|, 1 - |x - y|)`.
    Circle,
    /// Unit segment `[0, 1]` with `d(x, y) = |x - y|`.
    Segment,
    /// Flat torus `R^2 / Z^2` with the quotient Euclidean metric.
    Torus,
    /// `points` equally spaced points `i / points` on the unit circle.
    DiscreteCircle { points: usize },
    /// `points` equally spaced points `i / (points - 1)` on the unit segment.
    DiscreteSegment { points: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Point {
    Real(f64),
    Planar(f64, f64),
    Index(usize),
}

impl Point {
    fn kind(&self) -> &'static str {
        match self {
            Point::Real(_) => "real",
            Point::Planar(..) => "planar",
            Point::Index(_) => "index",
        }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Real(x) => write!(f, "{x}"),
            Point::Planar(x, y) => write!(f, "{x};{y}"),
            Point::Index(i) => write!(f, "{i}"),
        }
    }
}

/// First and second moments of the ball measure over probes `p ~ nu`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallMoments {
    pub mean: f64,
    pub variance: f64,
    pub mean_sq: f64,
}

impl Space {
    pub fn discrete_circle(points: usize) -> Result<Self> {
        Space::DiscreteCircle { points }.validated()
    }

    pub fn discrete_segment(points: usize) -> Result<Self> {
        Space::DiscreteSegment { points }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        match self {
            Space::DiscreteCircle { points } | Space::DiscreteSegment { points } if points < 2 => {
                Err(Error::invalid("l", "a discrete space needs at least 2 points"))
            }
            s => Ok(s),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Space::Circle => "circle",
            Space::Segment => "segment",
            Space::Torus => "torus",
            Space::DiscreteCircle { .. } => "discrete-circle",
            Space::DiscreteSegment { .. } => "discrete-segment",
        }
    }

    /// Number of points of a discrete space.
    pub fn points(&self) -> Option<usize> {
        match *self {
            Space::DiscreteCircle { points } | Space::DiscreteSegment { points } => Some(points),
            _ => None,
        }
    }

    pub fn is_discrete(&self) -> bool {
        self.points().is_some()
    }

    /// `true` when `b_p(eps)` does not depend on `p`.
    pub fn is_homogeneous(&self) -> bool {
        matches!(
            self,
            Space::Circle | Space::Torus | Space::DiscreteCircle { .. }
        )
    }

    pub fn diameter(&self) -> f64 {
        match *self {
            Space::Circle => 0.5,
            Space::Segment => 1.0,
            Space::Torus => core::f64::consts::FRAC_1_SQRT_2,
            Space::DiscreteCircle { points } => (points / 2) as f64 / points as f64,
            Space::DiscreteSegment { .. } => 1.0,
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        let unit = |x: f64| (0.0..1.0).contains(&x);
        match (*self, *p) {
            (Space::Circle, Point::Real(x)) => unit(x),
            (Space::Segment, Point::Real(x)) => (0.0..=1.0).contains(&x),
            (Space::Torus, Point::Planar(x, y)) => unit(x) && unit(y),
            (Space::DiscreteCircle { points }, Point::Index(i))
            | (Space::DiscreteSegment { points }, Point::Index(i)) => i < points,
            _ => false,
        }
    }

    fn check(&self, p: &Point) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::PointMismatch {
                space: self.name(),
                point: p.kind(),
            })
        }
    }

    /// Coordinate in `[0, 1]` of a discrete point.
    pub fn coordinate(&self, index: usize) -> Option<f64> {
        match *self {
            Space::DiscreteCircle { points } if index < points => {
                Some(index as f64 / points as f64)
            }
            Space::DiscreteSegment { points } if index < points => {
                Some(index as f64 / (points - 1) as f64)
            }
            _ => None,
        }
    }

    /// A point drawn from the uniform measure.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match *self {
            Space::Circle | Space::Segment => Point::Real(rng.random::<f64>()),
            Space::Torus => {
                let x = rng.random::<f64>();
                let y = rng.random::<f64>();
                Point::Planar(x, y)
            }
            Space::DiscreteCircle { points } | Space::DiscreteSegment { points } => {
                Point::Index(rng.random_range(0..points))
            }
        }
    }

    pub fn distance(&self, a: &Point, b: &Point) -> Result<f64> {
        self.check(a)?;
        self.check(b)?;
        Ok(match (*self, *a, *b) {
            (Space::Circle, Point::Real(x), Point::Real(y)) => circle_distance(x, y),
            (Space::Segment, Point::Real(x), Point::Real(y)) => (x - y).abs(),
            (Space::Torus, Point::Planar(ax, ay), Point::Planar(bx, by)) => {
                torus_distance((ax, ay), (bx, by))
            }
            (Space::DiscreteCircle { points }, Point::Index(i), Point::Index(j)) => {
                let k = i.abs_diff(j);
                k.min(points - k) as f64 / points as f64
            }
            (Space::DiscreteSegment { points }, Point::Index(i), Point::Index(j)) => {
                i.abs_diff(j) as f64 / (points - 1) as f64
            }
            _ => unreachable!("points validated against the space"),
        })
    }

    /// `b_p(eps) = nu(B_eps(p))`.
    pub fn ball_measure(&self, p: &Point, eps: f64) -> Result<f64> {
        check_radius(eps)?;
        self.check(p)?;
        Ok(match (*self, *p) {
            (Space::Circle, _) => (2.0 * eps).min(1.0),
            (Space::Segment, Point::Real(x)) => segment_ball(x, eps),
            (Space::Torus, _) => torus_ball(eps),
            (Space::DiscreteCircle { points }, Point::Index(i))
            | (Space::DiscreteSegment { points }, Point::Index(i)) => {
                let inside = (0..points)
                    .filter(|&j| {
                        self.distance(&Point::Index(i), &Point::Index(j))
                            .is_ok_and(|d| d <= eps)
                    })
                    .count();
                inside as f64 / points as f64
            }
            _ => unreachable!("points validated against the space"),
        })
    }

    /// `E_{p ~ nu}[f(b_p(eps))]`.
    ///
    /// Homogeneous spaces evaluate `f` once. The segment uses the trapezoid rule
    /// on `nodes` uniform probe positions; discrete spaces average exactly over
    /// their points.
    pub fn probe_average<F: FnMut(f64) -> f64>(
        &self,
        eps: f64,
        nodes: usize,
        mut f: F,
    ) -> Result<f64> {
        check_radius(eps)?;
        if nodes < 2 {
            return Err(Error::invalid("nodes", "quadrature needs at least 2 nodes"));
        }
        Ok(match *self {
            Space::Circle => f((2.0 * eps).min(1.0)),
            Space::Torus => f(torus_ball(eps)),
            Space::DiscreteCircle { .. } => f(self.ball_measure(&Point::Index(0), eps)?),
            Space::Segment => trapezoid(|p| f(segment_ball(p, eps)), 0.0, 1.0, nodes),
            Space::DiscreteSegment { points } => {
                let mut sum = 0.0;
                for i in 0..points {
                    sum += f(self.ball_measure(&Point::Index(i), eps)?);
                }
                sum / points as f64
            }
        })
    }

    /// `<b(eps)>`, `Var(b(eps))` and `<b(eps)^2>`.
    pub fn ball_moments(&self, eps: f64, nodes: usize) -> Result<BallMoments> {
        let (mean, mean_sq) = if self.is_homogeneous() {
            let b = self.probe_average(eps, nodes, |b| b)?;
            (b, b * b)
        } else {
            (
                self.probe_average(eps, nodes, |b| b)?,
                self.probe_average(eps, nodes, |b| b * b)?,
            )
        };
        Ok(BallMoments {
            mean,
            variance: (mean_sq - mean * mean).max(0.0),
            mean_sq,
        })
    }
}

fn check_radius(eps: f64) -> Result<()> {
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::Domain {
            name: "eps",
            value: eps,
        });
    }
    Ok(())
}

fn circle_distance(x: f64, y: f64) -> f64 {
    let t = (x - y).abs();
    t.min(1.0 - t)
}

fn torus_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    let mut best = f64::INFINITY;
    for sx in [-1.0, 0.0, 1.0] {
        for sy in [-1.0, 0.0, 1.0] {
            let dx = a.0 - b.0 + sx;
            let dy = a.1 - b.1 + sy;
            best = best.min(libm::sqrt(dx * dx + dy * dy));
        }
    }
    best
}

fn segment_ball(p: f64, eps: f64) -> f64 {
    (p + eps).min(1.0) - (p - eps).max(0.0)
}

/// Area of the closed disk of radius `eps` intersected with the fundamental
/// square `[-1/2, 1/2]^2`, which is the torus ball measure for every centre.
///
/// By symmetry this is `4 * int_0^{1/2} min(1/2, sqrt(eps^2 - x^2)_+) dx`. The
/// part where the chord is clipped at `1/2` is a rectangle; the remaining arc
/// is integrated in the angle `x = eps sin(t)`, where the integrand
/// `eps^2 cos^2 t` is smooth.
fn torus_ball(eps: f64) -> f64 {
    if eps <= 0.0 {
        return 0.0;
    }
    let clipped = libm::sqrt((eps * eps - 0.25).max(0.0)).min(0.5);
    let outer = eps.min(0.5);
    let t0 = libm::asin((clipped / eps).min(1.0));
    let t1 = libm::asin((outer / eps).min(1.0));
    let arc = trapezoid(
        |t| {
            let c = libm::cos(t);
            eps * eps * c * c
        },
        t0,
        t1,
        TORUS_AREA_NODES,
    );
    (4.0 * (0.5 * clipped + arc)).min(1.0)
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Space::DiscreteCircle { points } | Space::DiscreteSegment { points } => {
                write!(f, "{}:l={points}", self.name())
            }
            _ => f.write_str(self.name()),
        }
    }
}

impl FromStr for Space {
    type Err = Error;

    /// `circle`, `segment`, `torus`, `discrete-circle:l=50`, `discrete-segment:l=50`.
    fn from_str(s: &str) -> Result<Self> {
        let parse_err = |reason| Error::Parse {
            input: s.to_string(),
            reason,
        };
        let (kind, params) = match s.trim().split_once(':') {
            Some((k, p)) => (k.trim(), Some(p.trim())),
            None => (s.trim(), None),
        };
        let points = |params: Option<&str>| -> Result<usize> {
            let params = params.ok_or_else(|| parse_err("missing `l=<points>`"))?;
            let value = params
                .strip_prefix("l=")
                .ok_or_else(|| parse_err("expected `l=<points>`"))?;
            value
                .trim()
                .parse::<usize>()
                .map_err(|_| parse_err("`l` must be a positive integer"))
        };
        let space = match kind {
            "circle" | "segment" | "torus" if params.is_some() => {
                return Err(parse_err("continuous spaces take no parameters"))
            }
            "circle" => Space::Circle,
            "segment" => Space::Segment,
            "torus" => Space::Torus,
            "discrete-circle" => Space::DiscreteCircle {
                points: points(params)?,
            },
            "discrete-segment" => Space::DiscreteSegment {
                points: points(params)?,
            },
            _ => return Err(parse_err("unknown space kind")),
        };
        space.validated()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use alloc::vec::Vec;

    const ALL: [Space; 5] = [
        Space::Circle,
        Space::Segment,
        Space::Torus,
        Space::DiscreteCircle { points: 50 },
        Space::DiscreteSegment { points: 21 },
    ];

    #[test]
    fn circle_and_segment_distances() {
        let d = Space::Circle
            .distance(&Point::Real(0.1), &Point::Real(0.9))
            .unwrap();
        assert!((d - 0.2).abs() < 1e-15);
        let d = Space::Segment
            .distance(&Point::Real(0.1), &Point::Real(0.9))
            .unwrap();
        assert!((d - 0.8).abs() < 1e-15);
    }

    #[test]
    fn torus_distance_matches_lattice_brute_force() {
        // Independent route: minimum over a 5x5 block of lattice translates.
        let brute = |a: (f64, f64), b: (f64, f64)| {
            let mut best = f64::INFINITY;
            for i in -2..=2 {
                for j in -2..=2 {
                    let dx = a.0 - b.0 - i as f64;
                    let dy = a.1 - b.1 - j as f64;
                    best = best.min((dx * dx + dy * dy).sqrt());
                }
            }
            best
        };
        let d = Space::Torus
            .distance(&Point::Planar(0.0, 0.0), &Point::Planar(0.5, 0.5))
            .unwrap();
        assert!((d - brute((0.0, 0.0), (0.5, 0.5))).abs() < 1e-15);
        assert!((d - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);

        let mut r = rng::stream(7, 0);
        for _ in 0..500 {
            let a = Space::Torus.sample(&mut r);
            let b = Space::Torus.sample(&mut r);
            let (Point::Planar(ax, ay), Point::Planar(bx, by)) = (a, b) else {
                unreachable!()
            };
            let d = Space::Torus.distance(&a, &b).unwrap();
            assert!((d - brute((ax, ay), (bx, by))).abs() < 1e-14);
        }
    }

    #[test]
    fn mismatched_points_are_rejected() {
        assert!(matches!(
            Space::Circle.distance(&Point::Index(0), &Point::Real(0.1)),
            Err(Error::PointMismatch { .. })
        ));
        assert!(Space::Torus
            .distance(&Point::Real(0.1), &Point::Real(0.2))
            .is_err());
        assert!(Space::DiscreteCircle { points: 4 }
            .distance(&Point::Index(4), &Point::Index(0))
            .is_err());
    }

    #[test]
    fn sampling_stays_in_domain() {
        let mut r = rng::stream(1, 0);
        for space in ALL {
            for _ in 0..1000 {
                let p = space.sample(&mut r);
                assert!(space.contains(&p), "{space} produced {p:?}");
            }
        }
        let space = Space::DiscreteCircle { points: 50 };
        for _ in 0..1000 {
            let Point::Index(i) = space.sample(&mut r) else {
                panic!()
            };
            assert!(i < 50);
        }
    }

    #[test]
    fn segment_sample_mean() {
        let mut r = rng::stream(3, 0);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let Point::Real(x) = Space::Segment.sample(&mut r) else {
                panic!()
            };
            sum += x;
        }
        assert!((sum / n as f64 - 0.5).abs() < 0.005);
    }

    #[test]
    fn ball_measure_examples() {
        let b = |s: Space, p: f64, e: f64| s.ball_measure(&Point::Real(p), e).unwrap();
        assert_eq!(b(Space::Circle, 0.3, 0.25), 0.5);
        assert_eq!(b(Space::Segment, 0.0, 0.25), 0.25);
        assert_eq!(b(Space::Segment, 0.5, 0.25), 0.5);
        assert!(Space::Circle.ball_measure(&Point::Real(0.1), -0.1).is_err());
    }

    #[test]
    fn ball_measure_endpoints() {
        let mut r = rng::stream(11, 0);
        for space in ALL {
            for _ in 0..20 {
                let p = space.sample(&mut r);
                let full = space.ball_measure(&p, space.diameter()).unwrap();
                assert!((full - 1.0).abs() < 1e-12, "{space}: {full}");
                let empty = space.ball_measure(&p, 0.0).unwrap();
                if space.is_discrete() {
                    let l = space.points().unwrap() as f64;
                    assert_eq!(empty, 1.0 / l);
                } else {
                    assert_eq!(empty, 0.0);
                }
            }
        }
    }

    #[test]
    fn ball_measure_is_monotone() {
        let mut r = rng::stream(12, 0);
        for space in ALL {
            for _ in 0..10 {
                let p = space.sample(&mut r);
                let mut prev = 0.0;
                for k in 0..=200 {
                    let eps = k as f64 / 200.0;
                    let b = space.ball_measure(&p, eps).unwrap();
                    assert!(b + 1e-12 >= prev, "{space} at eps={eps}");
                    assert!((0.0..=1.0 + 1e-12).contains(&b));
                    prev = b;
                }
            }
        }
    }

    #[test]
    fn circle_ball_is_probe_independent() {
        let mut r = rng::stream(13, 0);
        for eps in [0.05, 0.2, 0.37, 0.6] {
            let b0 = Space::Circle.ball_measure(&Point::Real(0.0), eps).unwrap();
            let worst = (0..100)
                .map(|_| {
                    let p = Space::Circle.sample(&mut r);
                    (Space::Circle.ball_measure(&p, eps).unwrap() - b0).abs()
                })
                .fold(0.0, f64::max);
            assert_eq!(worst, 0.0);
        }
    }

    #[test]
    fn torus_ball_small_radius_is_disk_area() {
        for eps in [0.01, 0.1, 0.3, 0.5] {
            let b = torus_ball(eps);
            let disk = core::f64::consts::PI * eps * eps;
            assert!((b - disk).abs() < 1e-9, "eps={eps}: {b} vs {disk}");
        }
    }

    #[test]
    fn ball_measure_matches_sampling() {
        let mut r = rng::stream(21, 0);
        let n = 100_000;
        for space in ALL {
            for eps in [0.1, 0.3, 0.55] {
                let p = space.sample(&mut r);
                let b = space.ball_measure(&p, eps).unwrap();
                let hits = (0..n)
                    .filter(|_| space.distance(&p, &space.sample(&mut r)).unwrap() <= eps)
                    .count();
                let frac = hits as f64 / n as f64;
                let se = (b * (1.0 - b) / n as f64).sqrt().max(1e-9);
                assert!(
                    (frac - b).abs() <= 4.0 * se,
                    "{space} eps={eps}: empirical {frac}, exact {b}"
                );
            }
        }
    }

    #[test]
    fn moments_examples() {
        let m = Space::Circle.ball_moments(0.25, DEFAULT_QUADRATURE_NODES).unwrap();
        assert_eq!((m.mean, m.variance), (0.5, 0.0));

        let m = Space::Segment.ball_moments(0.25, DEFAULT_QUADRATURE_NODES).unwrap();
        // 2 eps - eps^2 and 4 eps^2 - 10 eps^3 / 3 for eps <= 1/2.
        assert!((m.mean - 0.4375).abs() < 1e-9);
        assert!((m.mean_sq - 0.197_916_666_666_666_7).abs() < 1e-8);
        assert!((m.variance - 6.510_416_666_666_7e-3).abs() < 1e-8);
    }

    #[test]
    fn segment_mean_matches_closed_form() {
        for k in 0..=20 {
            let eps = k as f64 / 20.0;
            let m = Space::Segment.ball_moments(eps, DEFAULT_QUADRATURE_NODES).unwrap();
            let exact = if eps <= 1.0 { 2.0 * eps - eps * eps } else { 1.0 };
            assert!((m.mean - exact).abs() < 1e-8, "eps={eps}");
        }
    }

    #[test]
    fn homogeneous_spaces_have_zero_variance() {
        for space in [Space::Circle, Space::Torus, Space::DiscreteCircle { points: 50 }] {
            for eps in [0.0, 0.1, 0.25, 0.4, 0.7] {
                let m = space.ball_moments(eps, DEFAULT_QUADRATURE_NODES).unwrap();
                assert_eq!(m.variance, 0.0);
            }
        }
    }

    #[test]
    fn discrete_ball_counts() {
        let space = Space::DiscreteCircle { points: 50 };
        // eps = 5/50 covers offsets -5..=5.
        let b = space.ball_measure(&Point::Index(7), 0.1).unwrap();
        assert_eq!(b, 11.0 / 50.0);
        let seg = Space::DiscreteSegment { points: 11 };
        let b = seg.ball_measure(&Point::Index(0), 0.2).unwrap();
        assert_eq!(b, 3.0 / 11.0);
    }

    #[test]
    fn parse_and_display() {
        let cases: Vec<(&str, Space)> = alloc::vec![
            ("circle", Space::Circle),
            ("segment", Space::Segment),
            ("torus", Space::Torus),
            ("discrete-circle:l=50", Space::DiscreteCircle { points: 50 }),
            ("discrete-segment:l=8", Space::DiscreteSegment { points: 8 }),
        ];
        for (text, space) in cases {
            assert_eq!(text.parse::<Space>().unwrap(), space);
            assert_eq!(space.to_string(), text);
        }
        for bad in ["sphere", "circle:l=3", "discrete-circle", "discrete-circle:l=1", "discrete-circle:n=4"] {
            assert!(bad.parse::<Space>().is_err(), "{bad}");
        }
    }
}
