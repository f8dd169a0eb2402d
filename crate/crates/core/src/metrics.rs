//! Distances between Gaussian-parameterized ellipses.
//!
//! Two measures are provided: the KL divergence `D_KL(p ‖ t)`, which is
//! asymmetric and blows up for far-apart or thin distributions, and the
//! 2-Wasserstein distance, which is a true metric. Both have closed forms for
//! Gaussians; in 2D the matrix square root inside W2 has one too
//! ([`spd_sqrt`]).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ellipse::{check_spd, ellipse_to_gaussian, Ellipse, Gaussian2};
use crate::error::{Error, Result};
use crate::linalg::{Mat2, Vec2};

/// Above this condition number a target covariance is rejected by KL.
pub const KL_MAX_CONDITION: f64 = 1e12;

/// Eigenvalue floor, relative to the trace, applied before inverting in KL.
pub const KL_EIGEN_FLOOR: f64 = 1e-12;

/// Default relative finite-difference step for [`metric_gradient`].
pub const FD_REL_STEP: f64 = 1e-5;

/// `|rx − ry| < CIRCULAR_TOL · max(rx, ry)` makes the orientation unidentifiable.
pub const CIRCULAR_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MetricKind {
    #[serde(rename = "kl")]
    Kl,
    #[serde(rename = "w2_squared")]
    W2Squared,
    #[serde(rename = "w2")]
    W2,
}

impl MetricKind {
    pub const ALL: [MetricKind; 3] = [MetricKind::Kl, MetricKind::W2Squared, MetricKind::W2];
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricKind::Kl => "kl",
            MetricKind::W2Squared => "w2_squared",
            MetricKind::W2 => "w2",
        })
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kl" => Ok(MetricKind::Kl),
            "w2_squared" | "w2sq" | "w2squared" => Ok(MetricKind::W2Squared),
            "w2" => Ok(MetricKind::W2),
            other => Err(Error::invalid(format!("unknown metric `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub value: f64,
    pub kind: MetricKind,
}

/// Finite-difference gradient with respect to `(cx, cy, rx, ry, theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gradient5 {
    pub d: [f64; 5],
    /// Set when the ellipse is (numerically) a circle; `d[4]` is then 0.
    pub degenerate_theta: bool,
}

impl Gradient5 {
    pub fn inf_norm(&self) -> f64 {
        self.d.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Principal square root of a 2×2 SPD matrix:
/// `S = (M + √det(M)·I) / √(tr(M) + 2√det(M))`.
pub fn spd_sqrt(m: Mat2) -> Result<Mat2> {
    check_spd(m, "matrix")?;
    Ok(sqrt_unchecked(m.symmetrized()))
}

/// The closed form without the SPD check. Tiny negative determinants from
/// rounding are clamped to zero.
fn sqrt_unchecked(m: Mat2) -> Mat2 {
    let s = m.det().max(0.0).sqrt();
    let t = (m.trace() + 2.0 * s).sqrt();
    let out = Mat2::new(m.m00 + s, m.m01, m.m10, m.m11 + s) * (1.0 / t);
    out.symmetrized()
}

/// Pushes eigenvalues below `floor` up to it along the matching eigenvector.
fn clamp_eigen(m: Mat2, floor: f64) -> (Mat2, f64, f64) {
    let (l1, l2, angle) = m.sym_eigen();
    if l2 >= floor {
        return (m, l1, l2);
    }
    let (s, c) = angle.sin_cos();
    // Minor eigenvector (−sin, cos).
    let bump = floor - l2;
    let adj = Mat2::new(s * s, -s * c, -s * c, c * c) * bump;
    (m + adj, l1.max(floor), floor)
}

/// `D_KL(p ‖ t) = ½[tr(Σt⁻¹Σp) + (μp−μt)ᵀΣt⁻¹(μp−μt) + ln(|Σt|/|Σp|) − 2]`.
pub fn kl_divergence(p: &Gaussian2, t: &Gaussian2) -> Result<MetricValue> {
    p.validate()?;
    t.validate()?;
    let (tl1, tl2) = t.sigma.sym_eigenvalues();
    if tl1 > KL_MAX_CONDITION * tl2 {
        return Err(Error::Numerical(format!(
            "target covariance is ill-conditioned (condition number {:e})",
            tl1 / tl2
        )));
    }
    let (st, tl1, tl2) = clamp_eigen(t.sigma, KL_EIGEN_FLOOR * t.sigma.trace());
    let (_, pl1, pl2) = clamp_eigen(p.sigma, KL_EIGEN_FLOOR * p.sigma.trace());
    let inv = st
        .inverse()
        .ok_or_else(|| Error::Numerical("target covariance is singular".into()))?;
    let d = p.mu - t.mu;
    let trace_term = (inv * p.sigma).trace();
    let maha = inv.quadratic_form(d);
    let log_det_ratio = (tl1.ln() + tl2.ln()) - (pl1.ln() + pl2.ln());
    let value = 0.5 * (trace_term + maha + log_det_ratio - 2.0);
    Ok(MetricValue {
        value,
        kind: MetricKind::Kl,
    })
}

/// 2-Wasserstein distance squared,
/// `‖μp−μt‖² + tr[Σp + Σt − 2(Σp^½ Σt Σp^½)^½]`.
///
/// With `X = Σp^½ Σt^½` the trace of the inner root is the sum of the
/// singular values of `X`, which for 2×2 is `√(‖X‖²_F + 2 det X)`. Writing
/// `tr Σp + tr Σt = ‖Σp^½ − Σt^½‖²_F + 2 tr X` and using
/// `(σ1 + σ2) − tr X = (X01 − X10)² / (σ1 + σ2 + tr X)` gives
///
/// ```text
/// W2² = ‖μp−μt‖² + ‖Σp^½ − Σt^½‖²_F − 2 (X01 − X10)² / (σ1 + σ2 + tr X)
/// ```
///
/// which has no cancellation between O(‖Σ‖) terms, is symmetric in its
/// arguments, and reduces to [`wasserstein2_squared_commuting`] when the
/// covariances commute (then `X` is symmetric).
pub fn wasserstein2_squared(p: &Gaussian2, t: &Gaussian2) -> Result<MetricValue> {
    p.validate()?;
    t.validate()?;
    let sp = sqrt_unchecked(p.sigma.symmetrized());
    let st = sqrt_unchecked(t.sigma.symmetrized());
    let x = sp * st;
    let diff = (sp - st).frobenius_norm();
    let fro2 = x.m00 * x.m00 + x.m01 * x.m01 + x.m10 * x.m10 + x.m11 * x.m11;
    let nuclear = (fro2 + 2.0 * x.det().max(0.0)).sqrt();
    let skew = x.m01 - x.m10;
    let denom = nuclear + x.trace();
    let correction = if denom > 0.0 { 2.0 * skew * skew / denom } else { 0.0 };
    let value = (mean_term(p.mu, t.mu) + diff * diff - correction).max(0.0);
    Ok(MetricValue {
        value,
        kind: MetricKind::W2Squared,
    })
}

/// The same quantity evaluated literally, through the root of the sandwiched
/// product `√Σp Σt √Σp`. Loses about
/// `1e-16 · tr(Σ)` absolute accuracy to cancellation; kept as a second route.
pub fn wasserstein2_squared_literal(p: &Gaussian2, t: &Gaussian2) -> Result<MetricValue> {
    p.validate()?;
    t.validate()?;
    let sp = sqrt_unchecked(p.sigma.symmetrized());
    let inner = (sp * t.sigma.symmetrized() * sp).symmetrized();
    let cross = sqrt_unchecked(inner).trace();
    let cov_term = p.sigma.trace() + t.sigma.trace() - 2.0 * cross;
    let value = (mean_term(p.mu, t.mu) + cov_term).max(0.0);
    Ok(MetricValue {
        value,
        kind: MetricKind::W2Squared,
    })
}

/// Simplified form valid when `Σp Σt = Σt Σp`:
/// `‖μp−μt‖² + ‖Σp^½ − Σt^½‖²_F`. No commutation check is made.
pub fn wasserstein2_squared_commuting(p: &Gaussian2, t: &Gaussian2) -> Result<MetricValue> {
    let sp = spd_sqrt(p.sigma)?;
    let st = spd_sqrt(t.sigma)?;
    let f = (sp - st).frobenius_norm();
    Ok(MetricValue {
        value: mean_term(p.mu, t.mu) + f * f,
        kind: MetricKind::W2Squared,
    })
}

pub fn wasserstein2(p: &Gaussian2, t: &Gaussian2) -> Result<MetricValue> {
    let sq = wasserstein2_squared(p, t)?;
    Ok(MetricValue {
        value: sq.value.sqrt(),
        kind: MetricKind::W2,
    })
}

fn mean_term(a: Vec2, b: Vec2) -> f64 {
    (a - b).norm_squared()
}

pub fn metric_between_gaussians(p: &Gaussian2, t: &Gaussian2, kind: MetricKind) -> Result<MetricValue> {
    match kind {
        MetricKind::Kl => kl_divergence(p, t),
        MetricKind::W2Squared => wasserstein2_squared(p, t),
        MetricKind::W2 => wasserstein2(p, t),
    }
}

/// Converts both ellipses to Gaussians and evaluates `kind`; `a` plays the
/// role of the proposal `p`, `b` of the target `t`.
pub fn metric_between_ellipses(a: &Ellipse, b: &Ellipse, kind: MetricKind) -> Result<MetricValue> {
    let ga = ellipse_to_gaussian(a)?;
    let gb = ellipse_to_gaussian(b)?;
    metric_between_gaussians(&ga, &gb, kind)
}

/// Gradient of [`metric_between_ellipses`] with respect to `a`'s parameters by
/// central differences with step `FD_REL_STEP · max(|param|, 1)`.
pub fn metric_gradient(a: &Ellipse, b: &Ellipse, kind: MetricKind) -> Result<Gradient5> {
    metric_gradient_with_step(a, b, kind, FD_REL_STEP)
}

pub fn metric_gradient_with_step(
    a: &Ellipse,
    b: &Ellipse,
    kind: MetricKind,
    rel_step: f64,
) -> Result<Gradient5> {
    a.validate()?;
    b.validate()?;
    let base = a.params();
    let degenerate_theta = (a.rx - a.ry).abs() < CIRCULAR_TOL * a.rx.max(a.ry);
    let mut d = [0.0; 5];
    for (i, slot) in d.iter_mut().enumerate() {
        if i == 4 && degenerate_theta {
            continue;
        }
        let h = rel_step * base[i].abs().max(1.0);
        let mut plus = base;
        let mut minus = base;
        plus[i] += h;
        minus[i] -= h;
        let fp = metric_between_ellipses(&Ellipse::from_params(plus), b, kind)?.value;
        let fm = metric_between_ellipses(&Ellipse::from_params(minus), b, kind)?.value;
        *slot = (fp - fm) / (2.0 * h);
    }
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("non-finite {kind} gradient at {a:?}")));
    }
    Ok(Gradient5 {
        d,
        degenerate_theta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Values from an independent numpy/scipy evaluation (scipy.linalg.sqrtm).
    const KL_ID_TO_DIAG: f64 = 2.986203913672499;
    const KL_DIAG_TO_ID: f64 = 16.208240530771945;

    fn g(mx: f64, my: f64, s: Mat2) -> Gaussian2 {
        Gaussian2::new(Vec2::new(mx, my), s).unwrap()
    }

    #[test]
    fn kl_worked_values() {
        let p = g(0.0, 0.0, Mat2::IDENTITY);
        let t = g(3.0, 4.0, Mat2::diag(4.0, 9.0));
        assert!((kl_divergence(&p, &t).unwrap().value - KL_ID_TO_DIAG).abs() < 1e-12);
        assert!((kl_divergence(&t, &p).unwrap().value - KL_DIAG_TO_ID).abs() < 1e-12);
        assert!(kl_divergence(&t, &t).unwrap().value.abs() < 1e-12);
    }

    #[test]
    fn kl_rejects_ill_conditioned_target() {
        let p = g(0.0, 0.0, Mat2::IDENTITY);
        let t = g(0.0, 0.0, Mat2::diag(1.0, 1e-13));
        assert!(matches!(kl_divergence(&p, &t), Err(Error::Numerical(_))));
        // The proposal may be as thin as it likes.
        assert!(kl_divergence(&t, &p).is_ok());
    }

    #[test]
    fn spd_sqrt_examples() {
        assert_eq!(spd_sqrt(Mat2::diag(4.0, 9.0)).unwrap(), Mat2::diag(2.0, 3.0));
        assert_eq!(spd_sqrt(Mat2::IDENTITY).unwrap(), Mat2::IDENTITY);
        let s = spd_sqrt(Mat2::new(2.0, 1.0, 1.0, 2.0)).unwrap();
        let a = (3f64.sqrt() + 1.0) / 2.0;
        let b = (3f64.sqrt() - 1.0) / 2.0;
        assert!((s - Mat2::new(a, b, b, a)).max_abs() < 1e-15);
        assert!(spd_sqrt(Mat2::new(1.0, 2.0, 2.0, 1.0)).is_err());
        assert!(spd_sqrt(Mat2::new(1.0, 0.0, 1.0, 1.0)).is_err());
    }

    #[test]
    fn w2_worked_values() {
        let p = g(0.0, 0.0, Mat2::IDENTITY);
        let t = g(3.0, 4.0, Mat2::diag(4.0, 9.0));
        assert!((wasserstein2_squared(&p, &t).unwrap().value - 30.0).abs() < 1e-12);
        assert!((wasserstein2_squared(&t, &p).unwrap().value - 30.0).abs() < 1e-12);
        assert!((wasserstein2_squared_commuting(&p, &t).unwrap().value - 30.0).abs() < 1e-12);
        assert!((wasserstein2_squared_literal(&p, &t).unwrap().value - 30.0).abs() < 1e-12);
        assert!((wasserstein2(&p, &t).unwrap().value - 30f64.sqrt()).abs() < 1e-12);
        assert!(wasserstein2_squared(&t, &t).unwrap().value.abs() < 1e-12);
    }

    #[test]
    fn ellipse_metric_examples() {
        let a = Ellipse::circle(0.0, 0.0, 1.0);
        let b = Ellipse::new(3.0, 4.0, 2.0, 3.0, 0.0).unwrap();
        for kind in MetricKind::ALL {
            assert!(metric_between_ellipses(&b, &b, kind).unwrap().value.abs() < 1e-9);
        }
        let w = metric_between_ellipses(&a, &b, MetricKind::W2Squared).unwrap();
        assert!((w.value - 30.0).abs() < 1e-12);
        let k = metric_between_ellipses(&a, &b, MetricKind::Kl).unwrap();
        assert!((k.value - KL_ID_TO_DIAG).abs() < 1e-12);
    }

    #[test]
    fn gradient_examples() {
        let b = Ellipse::circle(0.0, 0.0, 1.0);
        let a = Ellipse::new(3.0, -1.0, 5.0, 2.0, 0.3).unwrap();
        for kind in MetricKind::ALL {
            let gr = metric_gradient(&a, &a, kind).unwrap();
            assert!(gr.inf_norm() < 1e-4, "{kind}: {gr:?}");
        }

        let gr = metric_gradient(&Ellipse::circle(1.0, 0.0, 1.0), &b, MetricKind::W2Squared).unwrap();
        assert!((gr.d[0] - 2.0).abs() < 1e-4);
        assert!(gr.degenerate_theta);
        assert_eq!(gr.d[4], 0.0);

        let a = Ellipse::new(0.0, 0.0, 2.0, 1.0, 0.0).unwrap();
        let gr = metric_gradient(&a, &b, MetricKind::W2Squared).unwrap();
        assert!((gr.d[2] - 2.0).abs() < 1e-4);
        assert!(!gr.degenerate_theta);
    }

    #[test]
    fn metric_kind_parsing() {
        assert_eq!("KL".parse::<MetricKind>().unwrap(), MetricKind::Kl);
        assert_eq!("w2".parse::<MetricKind>().unwrap(), MetricKind::W2);
        assert!("l3".parse::<MetricKind>().is_err());
    }
}
