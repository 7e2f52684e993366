//! Convex test objectives, their known optima, and black-box plumbing.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::lattice::{Domain, LatticePoint};

/// A function on integer points. Implementations must be pure.
pub trait Objective: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn eval(&self, x: &[i64]) -> f64;
}

/// Wraps a closure as an [`Objective`].
pub struct FnObjective<F> {
    name: String,
    dim: usize,
    f: F,
}

impl<F: Fn(&[i64]) -> f64 + Send + Sync> FnObjective<F> {
    pub fn new(name: impl Into<String>, dim: usize, f: F) -> Self {
        Self { name: name.into(), dim, f }
    }
}

impl<F: Fn(&[i64]) -> f64 + Send + Sync> Objective for FnObjective<F> {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[i64]) -> f64 {
        (self.f)(x)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ProblemError {
    #[error("unknown problem `{0}` (try `list-problems`)")]
    UnknownProblem(String),
    #[error("problem {name} needs n >= {min}, got {got}")]
    DimensionTooSmall { name: &'static str, min: usize, got: usize },
    #[error("point has dimension {got}, problem has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point {0} was already evaluated")]
    RepeatedEvaluation(LatticePoint),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ProblemKind {
    Cb3ii,
    Cb3i,
    Klt,
    Lq,
    Abhi,
    Maxq,
    Mxhilb,
    Quad,
}

/// Where the minimizers are.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OptimizerSet {
    Origin,
    /// The all-ones vector `e`.
    Ones,
    /// `2e`.
    Twos,
    /// Both `e` and `2e` (KLT at n = 4).
    OnesAndTwos,
    /// Binary points with no two consecutive zeros (LQ).
    BinaryNoAdjacentZeros,
}

impl OptimizerSet {
    pub fn contains(&self, x: &[i64]) -> bool {
        match self {
            Self::Origin => x.iter().all(|&v| v == 0),
            Self::Ones => x.iter().all(|&v| v == 1),
            Self::Twos => x.iter().all(|&v| v == 2),
            Self::OnesAndTwos => Self::Ones.contains(x) || Self::Twos.contains(x),
            Self::BinaryNoAdjacentZeros => {
                x.iter().all(|&v| v == 0 || v == 1) && x.windows(2).all(|w| w[0] + w[1] > 0)
            }
        }
    }

    /// One representative minimizer.
    pub fn representative(&self, n: usize) -> LatticePoint {
        match self {
            Self::Origin => LatticePoint::origin(n),
            Self::Ones | Self::BinaryNoAdjacentZeros => LatticePoint::splat(n, 1),
            Self::Twos | Self::OnesAndTwos => LatticePoint::splat(n, 2),
        }
    }
}

impl fmt::Display for OptimizerSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Origin => "0",
            Self::Ones => "e",
            Self::Twos => "2e",
            Self::OnesAndTwos => "e, 2e",
            Self::BinaryNoAdjacentZeros => "many",
        })
    }
}

/// Registry row for listings.
#[derive(Debug, Clone, Serialize)]
pub struct ProblemInfo {
    pub name: &'static str,
    pub kind: ProblemKind,
    pub min_dim: usize,
    pub formula: &'static str,
    pub optimal_value: &'static str,
    pub optimizer: &'static str,
}

pub const PROBLEMS: [ProblemInfo; 8] = [
    ProblemInfo {
        name: "CB3II",
        kind: ProblemKind::Cb3ii,
        min_dim: 2,
        formula: "max{ sum x_i^4 + x_{i+1}^2, sum (2-x_i)^2 + (2-x_{i+1})^2, sum 2exp(-x_i + x_{i+1}) }",
        optimal_value: "2(n-1)",
        optimizer: "e",
    },
    ProblemInfo {
        name: "CB3I",
        kind: ProblemKind::Cb3i,
        min_dim: 2,
        formula: "sum max{ x_i^4 + x_{i+1}^2, (2-x_i)^2 + (2-x_{i+1})^2, 2exp(-x_i + x_{i+1}) }",
        optimal_value: "2(n-1)",
        optimizer: "e",
    },
    ProblemInfo {
        name: "KLT",
        kind: ProblemKind::Klt,
        min_dim: 1,
        formula: "max_i ||x - c_i - 2e||^2, c_i = 2e_i - e",
        optimal_value: "min(n,4)",
        optimizer: "2e / e",
    },
    ProblemInfo {
        name: "LQ",
        kind: ProblemKind::Lq,
        min_dim: 2,
        formula: "sum max{ -x_i - x_{i+1}, -x_i - x_{i+1} + x_i^2 + x_{i+1}^2 - 1 }",
        optimal_value: "-(n-1)",
        optimizer: "many",
    },
    ProblemInfo {
        name: "abhi",
        kind: ProblemKind::Abhi,
        min_dim: 2,
        formula: "sum 64(c1(x_i-2) - c2(x_{i+1}-2))^2 + (c2(x_i-2) - c1(x_{i+1}-2))^2, c1 = cos(pi/8), c2 = sin(pi/8)",
        optimal_value: "0",
        optimizer: "2e",
    },
    ProblemInfo {
        name: "maxq",
        kind: ProblemKind::Maxq,
        min_dim: 1,
        formula: "max_i x_i^2",
        optimal_value: "0",
        optimizer: "0",
    },
    ProblemInfo {
        name: "mxhilb",
        kind: ProblemKind::Mxhilb,
        min_dim: 1,
        formula: "max_i sum_j |x_j / (i+j-1)|",
        optimal_value: "0",
        optimizer: "0",
    },
    ProblemInfo {
        name: "quad",
        kind: ProblemKind::Quad,
        min_dim: 1,
        formula: "sum (x_i - 2)^2",
        optimal_value: "0",
        optimizer: "2e",
    },
];

pub fn lookup(name: &str) -> Result<&'static ProblemInfo, ProblemError> {
    PROBLEMS
        .iter()
        .find(|p| p.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| ProblemError::UnknownProblem(name.to_string()))
}

/// One of the benchmark objectives at a fixed dimension.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    info: &'static ProblemInfo,
    n: usize,
    /// abhi only: sum over `i < n` instead of wrapping `x_{n+1} = x_1`.
    abhi_chain: bool,
}

impl ProblemSpec {
    pub fn new(name: &str, n: usize) -> Result<Self, ProblemError> {
        let info = lookup(name)?;
        if n < info.min_dim {
            return Err(ProblemError::DimensionTooSmall { name: info.name, min: info.min_dim, got: n });
        }
        Ok(Self { info, n, abhi_chain: false })
    }

    pub fn with_abhi_chain(mut self, chain: bool) -> Self {
        self.abhi_chain = chain;
        self
    }

    pub fn kind(&self) -> ProblemKind {
        self.info.kind
    }

    pub fn info(&self) -> &'static ProblemInfo {
        self.info
    }

    pub fn optimal_value(&self) -> f64 {
        let n = self.n as f64;
        match self.info.kind {
            ProblemKind::Cb3i | ProblemKind::Cb3ii => 2.0 * (n - 1.0),
            // f = |y|^2 + 4 - 4 min_i y_i with y = x - e, so e wins once n > 4
            ProblemKind::Klt => n.min(4.0),
            ProblemKind::Lq => -(n - 1.0),
            _ => 0.0,
        }
    }

    pub fn optimizers(&self) -> OptimizerSet {
        match self.info.kind {
            ProblemKind::Cb3i | ProblemKind::Cb3ii => OptimizerSet::Ones,
            ProblemKind::Klt if self.n == 4 => OptimizerSet::OnesAndTwos,
            ProblemKind::Klt if self.n > 4 => OptimizerSet::Ones,
            ProblemKind::Klt | ProblemKind::Abhi | ProblemKind::Quad => OptimizerSet::Twos,
            ProblemKind::Lq => OptimizerSet::BinaryNoAdjacentZeros,
            ProblemKind::Maxq | ProblemKind::Mxhilb => OptimizerSet::Origin,
        }
    }

    /// Starting point: the origin for maxq and mxhilb, otherwise the box
    /// midpoint rounded toward zero.
    pub fn default_start(&self, dom: &Domain) -> LatticePoint {
        match self.info.kind {
            ProblemKind::Maxq | ProblemKind::Mxhilb => LatticePoint::origin(self.n),
            _ => dom.midpoint(),
        }
    }

    pub fn evaluate(&self, x: &[i64]) -> Result<f64, ProblemError> {
        if x.len() != self.n {
            return Err(ProblemError::DimensionMismatch { expected: self.n, got: x.len() });
        }
        Ok(self.eval(x))
    }
}

impl Objective for ProblemSpec {
    fn name(&self) -> &str {
        self.info.name
    }

    fn dim(&self) -> usize {
        self.n
    }

    fn eval(&self, x: &[i64]) -> f64 {
        let x: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let pairs = || x.windows(2).map(|w| (w[0], w[1]));
        match self.info.kind {
            ProblemKind::Cb3ii => {
                let a = pairs().map(|(p, q)| p.powi(4) + q * q).sum::<f64>();
                let b = pairs().map(|(p, q)| (2.0 - p).powi(2) + (2.0 - q).powi(2)).sum::<f64>();
                let c = pairs().map(|(p, q)| 2.0 * (q - p).exp()).sum::<f64>();
                a.max(b).max(c)
            }
            ProblemKind::Cb3i => pairs()
                .map(|(p, q)| (p.powi(4) + q * q).max((2.0 - p).powi(2) + (2.0 - q).powi(2)).max(2.0 * (q - p).exp()))
                .sum(),
            ProblemKind::Klt => (0..self.n)
                .map(|i| {
                    // x - c_i - 2e with c_i = 2e_i - e
                    x.iter()
                        .enumerate()
                        .map(|(j, &v)| {
                            let c = if i == j { 1.0 } else { -1.0 };
                            (v - c - 2.0).powi(2)
                        })
                        .sum::<f64>()
                })
                .fold(f64::NEG_INFINITY, f64::max),
            ProblemKind::Lq => pairs().map(|(p, q)| (-p - q).max(-p - q + p * p + q * q - 1.0)).sum(),
            ProblemKind::Abhi => {
                let (c1, c2) = ((PI / 8.0).cos(), (PI / 8.0).sin());
                let terms = if self.abhi_chain { self.n - 1 } else { self.n };
                (0..terms)
                    .map(|i| {
                        let p = x[i] - 2.0;
                        let q = x[(i + 1) % self.n] - 2.0;
                        64.0 * (c1 * p - c2 * q).powi(2) + (c2 * p - c1 * q).powi(2)
                    })
                    .sum()
            }
            ProblemKind::Maxq => x.iter().map(|v| v * v).fold(0.0, f64::max),
            ProblemKind::Mxhilb => (1..=self.n)
                .map(|i| x.iter().enumerate().map(|(j, v)| (v / (i + j) as f64).abs()).sum::<f64>())
                .fold(0.0, f64::max),
            ProblemKind::Quad => x.iter().map(|v| (v - 2.0).powi(2)).sum(),
        }
    }
}

/// Evaluate a registered problem by name.
pub fn evaluate(name: &str, x: &LatticePoint) -> Result<f64, ProblemError> {
    ProblemSpec::new(name, x.dim())?.evaluate(x.coords())
}

/// Black-box wrapper that logs every request and refuses repeats.
pub struct CountingOracle<'a> {
    inner: &'a dyn Objective,
    log: Vec<(LatticePoint, f64)>,
    seen: HashSet<LatticePoint>,
}

impl<'a> CountingOracle<'a> {
    pub fn new(inner: &'a dyn Objective) -> Self {
        Self { inner, log: Vec::new(), seen: HashSet::new() }
    }

    pub fn evaluate(&mut self, x: &LatticePoint) -> Result<f64, ProblemError> {
        if x.dim() != self.inner.dim() {
            return Err(ProblemError::DimensionMismatch { expected: self.inner.dim(), got: x.dim() });
        }
        if !self.seen.insert(x.clone()) {
            return Err(ProblemError::RepeatedEvaluation(x.clone()));
        }
        let v = self.inner.eval(x.coords());
        self.log.push((x.clone(), v));
        Ok(v)
    }

    pub fn count(&self) -> usize {
        self.log.len()
    }

    pub fn log(&self) -> &[(LatticePoint, f64)] {
        &self.log
    }

    pub fn objective(&self) -> &dyn Objective {
        self.inner
    }
}

/// A failed convexity check: `f(x) > sum w_i f(y_i)` although
/// `x = sum w_i y_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityViolation {
    pub x: LatticePoint,
    pub points: Vec<LatticePoint>,
    pub weights: Vec<f64>,
    pub fx: f64,
    pub combination: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub trials: usize,
    /// Trials for which no feasible combination was found.
    pub skipped: usize,
    pub violation: Option<ConvexityViolation>,
}

impl ProbeReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

/// Randomized check of convexity on `dom`: each trial writes a random point
/// `x` as a convex combination of other points of `dom` and compares values.
/// Two kinds of combination are drawn: two points on a line through `x` with
/// unequal weights, and `p` points averaging to `x`.
pub fn convexity_probe(f: &dyn Objective, dom: &Domain, trials: usize, seed: u64) -> ProbeReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = dom.dim();
    let mut skipped = 0;
    let radius = dom.linf_diameter().max(1);
    for _ in 0..trials {
        let x = dom.point_slice(rng.gen_range(0..dom.len())).to_vec();
        let mut found = None;
        for _attempt in 0..32 {
            let d: Vec<i64> = (0..n).map(|_| rng.gen_range(-radius..=radius)).collect();
            if d.iter().all(|&v| v == 0) {
                continue;
            }
            let cand = if rng.gen_bool(0.5) {
                let s = rng.gen_range(1..=3);
                let t = rng.gen_range(1..=3);
                let a: Vec<i64> = x.iter().zip(&d).map(|(x, d)| x + s * d).collect();
                let b: Vec<i64> = x.iter().zip(&d).map(|(x, d)| x - t * d).collect();
                let w = (s + t) as f64;
                (vec![a, b], vec![t as f64 / w, s as f64 / w])
            } else {
                let p = rng.gen_range(2..=n + 2);
                let mut pts = Vec::with_capacity(p);
                let mut sum = vec![0i64; n];
                for _ in 0..p - 1 {
                    let dj: Vec<i64> = (0..n).map(|_| rng.gen_range(-radius..=radius)).collect();
                    sum.iter_mut().zip(&dj).for_each(|(s, v)| *s += v);
                    pts.push(x.iter().zip(&dj).map(|(x, d)| x + d).collect::<Vec<_>>());
                }
                pts.push(x.iter().zip(&sum).map(|(x, s)| x - s).collect());
                (pts, vec![1.0 / p as f64; p])
            };
            if cand.0.iter().all(|y| dom.contains(y)) {
                found = Some(cand);
                break;
            }
        }
        let Some((pts, weights)) = found else {
            skipped += 1;
            continue;
        };
        let fx = f.eval(&x);
        let combination: f64 = pts.iter().zip(&weights).map(|(y, w)| w * f.eval(y)).sum();
        if fx > combination + 1e-9 * (1.0 + combination.abs()) {
            return ProbeReport {
                trials,
                skipped,
                violation: Some(ConvexityViolation {
                    x: LatticePoint(x),
                    points: pts.into_iter().map(LatticePoint).collect(),
                    weights,
                    fx,
                    combination,
                }),
            };
        }
    }
    ProbeReport { trials, skipped, violation: None }
}
