//! Fitting an ellipse to a target by gradient descent on a distance.
//!
//! This treats the distances from [`crate::metrics`] as regression objectives
//! outside any network: descend on the five parameters of `init` until it
//! matches `target`. Regression is on absolute parameters, not on offsets in
//! an anchor-normalized frame.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ellipse::{normalize_angle, wrap_angle_diff, Ellipse};
use crate::error::{Error, Result};
use crate::iou::iou_grid;
use crate::metrics::{metric_between_ellipses, metric_gradient, MetricKind};

/// Loss above which a descent is declared divergent.
pub const DIVERGENCE_LOSS: f64 = 1e12;
/// Smallest step tried by the line search.
pub const MIN_STEP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FitMetric {
    #[serde(rename = "kl")]
    Kl,
    #[serde(rename = "w2")]
    W2Squared,
    #[serde(rename = "l2")]
    L2Params,
}

impl FitMetric {
    pub const ALL: [FitMetric; 3] = [FitMetric::W2Squared, FitMetric::Kl, FitMetric::L2Params];
}

impl fmt::Display for FitMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitMetric::Kl => "kl",
            FitMetric::W2Squared => "w2",
            FitMetric::L2Params => "l2",
        })
    }
}

impl FromStr for FitMetric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kl" => Ok(FitMetric::Kl),
            "w2" | "w2sq" | "w2_squared" => Ok(FitMetric::W2Squared),
            "l2" => Ok(FitMetric::L2Params),
            other => Err(Error::invalid(format!("unknown fit metric `{other}` (kl, w2, l2)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub metric: FitMetric,
    /// First trial step of the line search.
    pub step_size: f64,
    pub max_iters: usize,
    /// Stop once the gradient's ∞-norm falls below this.
    pub grad_tolerance: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            metric: FitMetric::W2Squared,
            step_size: 1.0,
            max_iters: 5000,
            grad_tolerance: 1e-6,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(Error::invalid(format!("step size must be positive, got {}", self.step_size)));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be ≥ 1"));
        }
        if !(self.grad_tolerance > 0.0) {
            return Err(Error::invalid(format!(
                "gradient tolerance must be positive, got {}",
                self.grad_tolerance
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    MaxIterations,
    /// The line search could not decrease the loss even at [`MIN_STEP`].
    LineSearchStalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    pub iterations: usize,
    #[serde(rename = "final")]
    pub final_params: Ellipse,
    pub final_loss: f64,
    pub loss_history: Vec<f64>,
    pub stop: StopReason,
}

/// Squared parameter differences, with the angle difference wrapped to
/// `[-π/2, π/2)` since an ellipse is unchanged by `θ → θ + π`.
pub fn l2_param_loss(a: &Ellipse, b: &Ellipse) -> f64 {
    let dt = wrap_angle_diff(a.theta, b.theta);
    let sq = |x: f64| x * x;
    sq(a.cx - b.cx) + sq(a.cy - b.cy) + sq(a.rx - b.rx) + sq(a.ry - b.ry) + dt * dt
}

fn loss(metric: FitMetric, a: &Ellipse, target: &Ellipse) -> Result<f64> {
    match metric {
        FitMetric::Kl => metric_between_ellipses(a, target, MetricKind::Kl).map(|m| m.value),
        FitMetric::W2Squared => metric_between_ellipses(a, target, MetricKind::W2Squared).map(|m| m.value),
        FitMetric::L2Params => Ok(l2_param_loss(a, target)),
    }
}

fn gradient(metric: FitMetric, a: &Ellipse, target: &Ellipse) -> Result<[f64; 5]> {
    match metric {
        FitMetric::Kl => metric_gradient(a, target, MetricKind::Kl).map(|g| g.d),
        FitMetric::W2Squared => metric_gradient(a, target, MetricKind::W2Squared).map(|g| g.d),
        FitMetric::L2Params => Ok([
            2.0 * (a.cx - target.cx),
            2.0 * (a.cy - target.cy),
            2.0 * (a.rx - target.rx),
            2.0 * (a.ry - target.ry),
            2.0 * wrap_angle_diff(a.theta, target.theta),
        ]),
    }
}

/// Loss at a trial point; invalid shapes (non-positive semi-diameters) count
/// as infinitely bad so the line search backs off from them.
fn trial_loss(metric: FitMetric, a: &Ellipse, target: &Ellipse) -> f64 {
    if a.validate().is_err() {
        return f64::INFINITY;
    }
    loss(metric, a, target).unwrap_or(f64::INFINITY)
}

/// Step multiplier for the angle. Moving θ by `δ` sweeps the boundary by up
/// to `max(rx, ry)·δ` pixels, so the angle is stepped as that arc length:
/// its gradient is divided by `max(rx, ry)²`. Without this the angle's
/// curvature under W2² grows like `(rx − ry)²` and dominates the step size.
fn angle_scale(e: &Ellipse) -> f64 {
    let l = e.rx.max(e.ry).max(1.0);
    1.0 / (l * l)
}

fn diverged(cfg: &FitConfig, iteration: usize, loss: f64) -> Error {
    Error::Divergence {
        metric: cfg.metric.to_string(),
        iteration,
        loss,
    }
}

/// Gradient descent with a halving line search.
///
/// Each iteration starts from twice the last accepted step (the first from
/// `cfg.step_size`) and halves until the loss strictly decreases. The angle
/// moves freely, in arc-length units (see [`angle_scale`]), and is re-wrapped
/// into `[-π/2, π/2]` after every step.
pub fn fit_ellipse(init: &Ellipse, target: &Ellipse, cfg: &FitConfig) -> Result<FitTrace> {
    cfg.validate()?;
    init.validate()?;
    target.validate()?;
    let mut current = *init;
    current.theta = normalize_angle(current.theta);
    let mut value = loss(cfg.metric, &current, target)?;
    if !value.is_finite() || value > DIVERGENCE_LOSS {
        return Err(diverged(cfg, 0, value));
    }
    let mut history = vec![value];
    let mut step = cfg.step_size;
    let mut stop = StopReason::MaxIterations;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        let g = gradient(cfg.metric, &current, target)?;
        if g.iter().any(|v| !v.is_finite()) {
            return Err(diverged(cfg, iterations, value));
        }
        if g.iter().fold(0.0f64, |m, v| m.max(v.abs())) < cfg.grad_tolerance {
            stop = StopReason::GradientTolerance;
            break;
        }
        let base = current.params();
        let scale = angle_scale(&current);
        let accepted = loop {
            let mut p = base;
            for (i, (x, d)) in p.iter_mut().zip(g).enumerate() {
                *x -= step * d * if i == 4 { scale } else { 1.0 };
            }
            p[4] = normalize_angle(p[4]);
            let trial = Ellipse::from_params(p);
            let tl = trial_loss(cfg.metric, &trial, target);
            if tl < value {
                break Some((trial, tl));
            }
            step *= 0.5;
            if step < MIN_STEP {
                break None;
            }
        };
        let Some((next, next_value)) = accepted else {
            stop = StopReason::LineSearchStalled;
            break;
        };
        iterations += 1;
        if next_value > DIVERGENCE_LOSS {
            return Err(diverged(cfg, iterations, next_value));
        }
        current = next;
        value = next_value;
        history.push(value);
        step *= 2.0;
    }

    Ok(FitTrace {
        iterations,
        final_params: current,
        final_loss: value,
        loss_history: history,
        stop,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub w_proposal: f64,
    pub w_regression: f64,
    pub w_classification: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            w_proposal: 1.0,
            w_regression: 1.0,
            w_classification: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let w = [self.w_proposal, self.w_regression, self.w_classification];
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid(format!("loss weights must be finite and ≥ 0, got {w:?}")));
        }
        if w.iter().all(|v| *v == 0.0) {
            return Err(Error::invalid("at least one loss weight must be positive"));
        }
        Ok(())
    }
}

/// Probabilities are clamped this far away from 0 and 1.
pub const PROB_CLAMP: f64 = 1e-12;

/// Binary cross entropy of `class_prob` against the label `is_object`.
pub fn cross_entropy(class_prob: f64, is_object: bool) -> f64 {
    let p = class_prob.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    if is_object {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Detector training objective: KL proposal loss, W2² regression loss and
/// classification cross entropy, weighted.
pub fn composite_loss(
    proposal: &Ellipse,
    refined: &Ellipse,
    target: &Ellipse,
    class_prob: f64,
    is_object: bool,
    w: &LossWeights,
) -> Result<f64> {
    w.validate()?;
    if class_prob.is_nan() {
        return Err(Error::invalid("class probability is NaN"));
    }
    let proposal_loss = metric_between_ellipses(proposal, target, MetricKind::Kl)?.value;
    let regression_loss = metric_between_ellipses(refined, target, MetricKind::W2Squared)?.value;
    let ce = cross_entropy(class_prob, is_object);
    Ok(w.w_proposal * proposal_loss + w.w_regression * regression_loss + w.w_classification * ce)
}

/// A target and a perturbed starting point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitCase {
    pub target: Ellipse,
    pub init: Ellipse,
}

/// Random targets (center in `[50, 450]²`, semi-diameters in `[8, 100]`,
/// any orientation) with inits perturbed by up to ±10 px in the center,
/// ×[0.67, 1.5] on each axis and ±0.3 rad.
pub fn perturbed_cases(count: usize, seed: u64) -> Vec<FitCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let target = Ellipse {
                cx: rng.gen_range(50.0..450.0),
                cy: rng.gen_range(50.0..450.0),
                rx: rng.gen_range(8.0..100.0),
                ry: rng.gen_range(8.0..100.0),
                theta: rng.gen_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2),
            };
            let init = Ellipse {
                cx: target.cx + rng.gen_range(-10.0..=10.0),
                cy: target.cy + rng.gen_range(-10.0..=10.0),
                rx: target.rx * rng.gen_range(0.67..=1.5),
                ry: target.ry * rng.gen_range(0.67..=1.5),
                theta: normalize_angle(target.theta + rng.gen_range(-0.3..=0.3)),
            };
            FitCase { target, init }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasinStats {
    pub metric: FitMetric,
    pub runs: usize,
    /// Runs ending with IoU above the success threshold.
    pub successes: usize,
    /// Runs that returned a divergence or numerical error.
    pub failures: usize,
    pub mean_final_iou: f64,
    pub mean_iterations: f64,
}

/// Fits every case with `cfg` (its metric overridden by `metric`) and tallies
/// final grid IoU against the target.
pub fn basin_stats(cases: &[FitCase], metric: FitMetric, cfg: &FitConfig, success_iou: f64) -> BasinStats {
    let cfg = FitConfig { metric, ..*cfg };
    let mut stats = BasinStats {
        metric,
        runs: cases.len(),
        successes: 0,
        failures: 0,
        mean_final_iou: 0.0,
        mean_iterations: 0.0,
    };
    let mut finished = 0usize;
    for c in cases {
        match fit_ellipse(&c.init, &c.target, &cfg) {
            Ok(trace) => {
                let iou = iou_grid(&trace.final_params, &c.target).map_or(0.0, |r| r.iou);
                if iou > success_iou {
                    stats.successes += 1;
                }
                stats.mean_final_iou += iou;
                stats.mean_iterations += trace.iterations as f64;
                finished += 1;
            }
            Err(_) => stats.failures += 1,
        }
    }
    if finished > 0 {
        stats.mean_final_iou /= finished as f64;
        stats.mean_iterations /= finished as f64;
    }
    stats
}
