//! Information bottleneck trade-off for a discrete joint `p_XY`.
//!
//! The solver minimizes the Lagrangian `I(X;T) + β·E d_IB(X,T)` over encoders
//! `p_{T|X}` by alternating self-consistent updates. Because
//! `E d_IB = I(X;Y) − I(Y;T)` under the chain `Y - X - T`, the resulting
//! curve is simultaneously the IB learning curve (rate vs. relevance) and the
//! IB quantization rate-distortion curve (rate vs. distortion).

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::prob::{
    conditional_y_given_x, entropy, kl_divergence_floored, mutual_information, ConditionalDistribution,
    JointDistribution, ProbError,
};
use crate::seed::SeedStream;

/// Floor applied to induced conditional cells inside KL terms.
pub const KL_FLOOR: f64 = 1e-12;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITERS: usize = 10_000;
pub const DEFAULT_RESTARTS: usize = 5;
/// Magnitude of the uniform perturbation added to the identity-like start.
pub const INIT_NOISE: f64 = 0.01;

#[derive(Debug, Error)]
pub enum IbError {
    #[error("encoder maps from {got} symbols but the joint has {expected}")]
    EncoderShape { expected: usize, got: usize },

    #[error("invalid trade-off parameter beta = {0}")]
    InvalidBeta(f64),

    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),

    #[error("bottleneck alphabet must be non-empty")]
    EmptyBottleneck,

    #[error("beta grid must be ascending")]
    UnsortedBetaGrid,

    #[error("encoder row {x} has no admissible output (normalizer underflow)")]
    DegenerateEncoder { x: usize },

    #[error("no convergence after {iterations} iterations at beta = {}", point.beta)]
    NonConvergence {
        point: Box<IbCurvePoint>,
        iterations: usize,
    },

    #[error(transparent)]
    Prob(#[from] ProbError),
}

pub type Result<T> = std::result::Result<T, IbError>;

/// One solved point of the trade-off.
#[derive(Debug, Clone, Serialize)]
pub struct IbCurvePoint {
    pub beta: f64,
    /// `I(X;T)` in nats.
    pub rate: f64,
    /// `I(Y;T)` in nats.
    pub relevance: f64,
    /// `I(X;Y) − I(Y;T)` in nats.
    pub distortion: f64,
    pub encoder: ConditionalDistribution,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

fn check_encoder(j: &JointDistribution, enc: &ConditionalDistribution) -> Result<()> {
    if enc.from_size() != j.x_size() {
        return Err(IbError::EncoderShape {
            expected: j.x_size(),
            got: enc.from_size(),
        });
    }
    Ok(())
}

/// Joint of `(X, T)` when `T` is drawn from `enc` given `X`.
pub fn joint_xt(j: &JointDistribution, enc: &ConditionalDistribution) -> Result<JointDistribution> {
    check_encoder(j, enc)?;
    Ok(JointDistribution::from_marginal_and_channel(&j.marginal_x(), enc)?)
}

/// Joint of `(T, Y)` under the Markov chain `Y - X - T`.
pub fn joint_ty(j: &JointDistribution, enc: &ConditionalDistribution) -> Result<JointDistribution> {
    check_encoder(j, enc)?;
    let (t_size, y_size) = (enc.to_size(), j.y_size());
    let mut p = vec![0.0; t_size * y_size];
    for x in 0..j.x_size() {
        for t in 0..t_size {
            let w = enc.get(x, t);
            if w == 0.0 {
                continue;
            }
            for y in 0..y_size {
                p[t * y_size + y] += w * j.get(x, y);
            }
        }
    }
    Ok(JointDistribution::new(t_size, y_size, p)?)
}

/// `p_T` and the induced `p_{Y|T}` (uniform rows where `p_T(t) = 0`).
pub fn induced_y_given_t(
    j: &JointDistribution,
    enc: &ConditionalDistribution,
) -> Result<(Vec<f64>, ConditionalDistribution)> {
    let ty = joint_ty(j, enc)?;
    Ok((ty.marginal_x(), conditional_y_given_x(&ty)))
}

/// `I(X;T)` for encoder `enc`.
pub fn encoder_rate(j: &JointDistribution, enc: &ConditionalDistribution) -> Result<f64> {
    Ok(mutual_information(&joint_xt(j, enc)?))
}

/// `I(Y;T)` for encoder `enc`.
pub fn encoder_relevance(j: &JointDistribution, enc: &ConditionalDistribution) -> Result<f64> {
    Ok(mutual_information(&joint_ty(j, enc)?))
}

/// `Σ_{x,t} p(x,t) · KL(p_{Y|X}(·|x) ‖ p_{Y|T}(·|t))` computed directly from
/// the KL terms.
pub fn expected_ib_distortion(j: &JointDistribution, enc: &ConditionalDistribution) -> Result<f64> {
    let p_y_x = conditional_y_given_x(j);
    let (_, p_y_t) = induced_y_given_t(j, enc)?;
    let p_x = j.marginal_x();
    let mut total = 0.0;
    for (x, &px) in p_x.iter().enumerate() {
        for t in 0..enc.to_size() {
            let pxt = px * enc.get(x, t);
            if pxt > 0.0 {
                total += pxt * kl_divergence_floored(p_y_x.row(x), p_y_t.row(t), KL_FLOOR);
            }
        }
    }
    Ok(total)
}

/// `E log q(Y|T) + H(Y)` under `p_ty`, a lower bound on `I(Y;T)` for any
/// decoder `q: T → Y`. Tight exactly at `q = p_{Y|T}`.
pub fn variational_relevance(p_ty: &JointDistribution, q: &ConditionalDistribution) -> Result<f64> {
    if q.from_size() != p_ty.x_size() || q.to_size() != p_ty.y_size() {
        return Err(IbError::EncoderShape {
            expected: p_ty.x_size(),
            got: q.from_size(),
        });
    }
    let mut expected_log = 0.0;
    for t in 0..p_ty.x_size() {
        for y in 0..p_ty.y_size() {
            let p = p_ty.get(t, y);
            if p > 0.0 {
                expected_log += p * q.get(t, y).ln();
            }
        }
    }
    Ok(expected_log + entropy(&p_ty.marginal_y()))
}

/// Lagrangian `I(X;T) + β · (I(X;Y) − I(Y;T))`.
pub fn ib_objective(j: &JointDistribution, beta: f64, enc: &ConditionalDistribution) -> Result<f64> {
    let rate = encoder_rate(j, enc)?;
    let distortion = mutual_information(j) - encoder_relevance(j, enc)?;
    Ok(rate + beta * distortion)
}

/// One self-consistent update
/// `enc′(t|x) ∝ p_T(t) · exp(−β · KL(p_{Y|X}(·|x) ‖ p_{Y|T}(·|t)))`.
pub fn ib_iterate(
    j: &JointDistribution,
    beta: f64,
    enc: &ConditionalDistribution,
) -> Result<ConditionalDistribution> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(IbError::InvalidBeta(beta));
    }
    let (p_t, p_y_t) = induced_y_given_t(j, enc)?;
    let p_y_x = conditional_y_given_x(j);
    let t_size = enc.to_size();

    let mut weights = Vec::with_capacity(j.x_size() * t_size);
    let mut log_w = vec![f64::NEG_INFINITY; t_size];
    for x in 0..j.x_size() {
        for t in 0..t_size {
            log_w[t] = if p_t[t] > 0.0 {
                p_t[t].ln() - beta * kl_divergence_floored(p_y_x.row(x), p_y_t.row(t), KL_FLOOR)
            } else {
                f64::NEG_INFINITY
            };
        }
        let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(IbError::DegenerateEncoder { x });
        }
        let row: Vec<f64> = log_w.iter().map(|&lw| (lw - top).exp()).collect();
        let z: f64 = row.iter().sum();
        if !(z > 0.0) || !z.is_finite() {
            return Err(IbError::DegenerateEncoder { x });
        }
        weights.extend(row.into_iter().map(|w| w / z));
    }
    Ok(ConditionalDistribution::new(j.x_size(), t_size, weights)?)
}

fn make_point(
    j: &JointDistribution,
    beta: f64,
    enc: ConditionalDistribution,
    converged: bool,
    iterations: usize,
) -> Result<IbCurvePoint> {
    let rate = encoder_rate(j, &enc)?;
    let relevance = encoder_relevance(j, &enc)?;
    Ok(IbCurvePoint {
        beta,
        rate,
        relevance,
        distortion: mutual_information(j) - relevance,
        encoder: enc,
        converged,
        iterations,
    })
}

/// Iterates [`ib_iterate`] from `init` until the objective changes by less
/// than `opts.tol`.
pub fn solve_ib_point(
    j: &JointDistribution,
    beta: f64,
    init: &ConditionalDistribution,
    opts: &SolveOptions,
) -> Result<IbCurvePoint> {
    if !(opts.tol > 0.0) {
        return Err(IbError::InvalidTolerance(opts.tol));
    }
    check_encoder(j, init)?;
    let mut enc = init.clone();
    let mut objective = ib_objective(j, beta, &enc)?;
    for iteration in 1..=opts.max_iters {
        let next = ib_iterate(j, beta, &enc)?;
        let next_objective = ib_objective(j, beta, &next)?;
        let change = (objective - next_objective).abs();
        enc = next;
        objective = next_objective;
        if change < opts.tol {
            return make_point(j, beta, enc, true, iteration);
        }
    }
    let point = make_point(j, beta, enc, false, opts.max_iters)?;
    Err(IbError::NonConvergence {
        point: Box::new(point),
        iterations: opts.max_iters,
    })
}

/// Identity-like encoder (`x ↦ x mod |T|`) perturbed by uniform noise of
/// magnitude [`INIT_NOISE`] and renormalized.
pub fn initial_encoder<R: Rng>(x_size: usize, t_size: usize, rng: &mut R) -> ConditionalDistribution {
    let mut w = vec![0.0; x_size * t_size];
    for x in 0..x_size {
        for t in 0..t_size {
            let base = if x % t_size == t { 1.0 } else { 0.0 };
            w[x * t_size + t] = base + INIT_NOISE * rng.random::<f64>();
        }
    }
    ConditionalDistribution::from_weights(x_size, t_size, w).expect("positive weights")
}

/// A vertex of the lower convex envelope in the `(distortion, rate)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveVertex {
    pub distortion: f64,
    pub rate: f64,
}

/// Lower convex envelope of `points`, trimmed to its non-increasing part.
pub fn lower_convex_envelope(points: &[CurveVertex]) -> Vec<CurveVertex> {
    let mut pts: Vec<CurveVertex> = points
        .iter()
        .copied()
        .filter(|p| p.distortion.is_finite() && p.rate.is_finite())
        .collect();
    pts.sort_by(|a, b| {
        a.distortion
            .total_cmp(&b.distortion)
            .then(a.rate.total_cmp(&b.rate))
    });
    pts.dedup_by(|later, earlier| later.distortion == earlier.distortion);

    let mut hull: Vec<CurveVertex> = Vec::with_capacity(pts.len());
    for p in pts {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (b.distortion - a.distortion) * (p.rate - a.rate)
                - (b.rate - a.rate) * (p.distortion - a.distortion);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    // keep everything up to the minimum-rate vertex
    if let Some(min_idx) = hull
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.rate.total_cmp(&b.1.rate))
        .map(|(i, _)| i)
    {
        hull.truncate(min_idx + 1);
    }
    hull
}

/// A solved trade-off curve.
#[derive(Debug, Clone, Serialize)]
pub struct IbCurve {
    /// `I(X;Y)` in nats.
    pub mutual_information: f64,
    /// Best-of-restarts point per beta, in grid order.
    pub points: Vec<IbCurvePoint>,
    /// Lower convex envelope of the points plus the degenerate
    /// `(I(X;Y), 0)` encoder.
    pub envelope: Vec<CurveVertex>,
}

impl IbCurve {
    pub fn from_points(mutual_information: f64, points: Vec<IbCurvePoint>) -> Self {
        let mut vertices: Vec<CurveVertex> = points
            .iter()
            .map(|p| CurveVertex {
                distortion: p.distortion,
                rate: p.rate,
            })
            .collect();
        vertices.push(CurveVertex {
            distortion: mutual_information,
            rate: 0.0,
        });
        let envelope = lower_convex_envelope(&vertices);
        Self {
            mutual_information,
            points,
            envelope,
        }
    }

    /// Quantization view: envelope rate at distortion `d`, linearly
    /// interpolated. Below the smallest solved distortion the first vertex's
    /// rate is returned; at or beyond `I(X;Y)` the rate is zero.
    pub fn rate_at_distortion(&self, d: f64) -> f64 {
        let env = &self.envelope;
        if d >= self.mutual_information {
            return 0.0;
        }
        let first = env[0];
        if d <= first.distortion {
            return first.rate;
        }
        for w in env.windows(2) {
            let (a, b) = (w[0], w[1]);
            if d <= b.distortion {
                let span = b.distortion - a.distortion;
                let frac = if span > 0.0 { (d - a.distortion) / span } else { 1.0 };
                return a.rate + frac * (b.rate - a.rate);
            }
        }
        env[env.len() - 1].rate
    }

    /// Learning view: rate needed to keep relevance at least `a`.
    pub fn rate_at_relevance(&self, a: f64) -> f64 {
        self.rate_at_distortion(self.mutual_information - a)
    }

    /// The point with the largest relevance.
    pub fn best_relevance(&self) -> Option<&IbCurvePoint> {
        self.points
            .iter()
            .max_by(|a, b| a.relevance.total_cmp(&b.relevance))
    }
}

/// Lagrangian value of a point.
fn point_objective(p: &IbCurvePoint) -> f64 {
    p.rate + p.beta * p.distortion
}

/// Solves every beta of an ascending grid with `restarts` random starts each
/// and keeps the best objective. Points that hit the iteration cap are kept
/// with `converged = false`.
pub fn solve_ib_curve(
    j: &JointDistribution,
    betas: &[f64],
    t_size: usize,
    restarts: usize,
    seed: u64,
) -> Result<IbCurve> {
    solve_ib_curve_with(j, betas, t_size, restarts, seed, &SolveOptions::default())
}

pub fn solve_ib_curve_with(
    j: &JointDistribution,
    betas: &[f64],
    t_size: usize,
    restarts: usize,
    seed: u64,
    opts: &SolveOptions,
) -> Result<IbCurve> {
    if t_size == 0 {
        return Err(IbError::EmptyBottleneck);
    }
    if betas.windows(2).any(|w| w[1] < w[0]) {
        return Err(IbError::UnsortedBetaGrid);
    }
    let seeds = SeedStream::new(seed);
    let restarts = restarts.max(1);
    let mut points = Vec::with_capacity(betas.len());
    for (bi, &beta) in betas.iter().enumerate() {
        let per_beta = seeds.child("beta", bi as u64);
        let mut best: Option<IbCurvePoint> = None;
        for r in 0..restarts {
            let mut rng = per_beta.rng("restart", r as u64);
            let init = initial_encoder(j.x_size(), t_size, &mut rng);
            let point = match solve_ib_point(j, beta, &init, opts) {
                Ok(p) => p,
                Err(IbError::NonConvergence { point, .. }) => *point,
                Err(e) => return Err(e),
            };
            let better = best
                .as_ref()
                .is_none_or(|b| point_objective(&point) < point_objective(b));
            if better {
                best = Some(point);
            }
        }
        points.push(best.expect("at least one restart"));
    }
    Ok(IbCurve::from_points(mutual_information(j), points))
}

/// Parses `start:stop:step` (inclusive of `stop` up to rounding).
pub fn parse_beta_grid(spec: &str) -> Option<Vec<f64>> {
    let parts: Vec<f64> = spec
        .split(':')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .ok()?;
    match parts.as_slice() {
        [single] => Some(vec![*single]),
        [start, stop, step] if *step > 0.0 && stop >= start => {
            let count = ((stop - start) / step + 1e-9).floor() as usize;
            Some((0..=count).map(|k| start + k as f64 * step).collect())
        }
        _ => None,
    }
}
