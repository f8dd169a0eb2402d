//! Ellipses and their equivalent 2D Gaussians.
//!
//! An [`Ellipse`] is stored the way annotators write it down: a center, the
//! semi-diameters along the ellipse's own two axes, and the counterclockwise
//! rotation of the first axis. `rx` is not required to be the larger one.
//! A [`Gaussian2`] is the equivalent density whose unit Mahalanobis contour is
//! the ellipse, i.e. `Σ = Rᵀ(θ) diag(σl², σs²) R(θ)` with
//! `R(θ) = [[cos θ, sin θ], [−sin θ, cos θ]]`.
//!
//! `rx`/`ry` are measured along the rotated axes (before rotation is applied),
//! not as extents along the image x/y axes.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat2, Vec2};

/// Eigenvalues closer than this (relative) are treated as one repeated value.
pub const EIGEN_DEGENERACY_TOL: f64 = 1e-9;

/// Relative tolerance on `|Σ01 − Σ10|` when validating a covariance.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Maps an angle into `[-π/2, π/2]`.
///
/// Values already in the closed interval are returned untouched, so both
/// `−π/2` and `π/2` are fixed points and the map is idempotent. Anything else
/// is reduced modulo π into `(−π/2, π/2]`.
pub fn normalize_angle(theta: f64) -> f64 {
    if (-FRAC_PI_2..=FRAC_PI_2).contains(&theta) {
        return theta;
    }
    let t = theta.rem_euclid(PI);
    if t > FRAC_PI_2 {
        t - PI
    } else {
        t
    }
}

/// Signed difference `a − b` reduced to `[-π/2, π/2)`, the period of an
/// ellipse's orientation.
pub fn wrap_angle_diff(a: f64, b: f64) -> f64 {
    (a - b + FRAC_PI_2).rem_euclid(PI) - FRAC_PI_2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    pub rx: f64,
    pub ry: f64,
    pub theta: f64,
}

impl Ellipse {
    /// Validated constructor; `theta` is normalized.
    pub fn new(cx: f64, cy: f64, rx: f64, ry: f64, theta: f64) -> Result<Self> {
        let e = Ellipse {
            cx,
            cy,
            rx,
            ry,
            theta,
        };
        e.validate()?;
        Ok(Ellipse {
            theta: normalize_angle(theta),
            ..e
        })
    }

    pub const fn circle(cx: f64, cy: f64, r: f64) -> Self {
        Ellipse {
            cx,
            cy,
            rx: r,
            ry: r,
            theta: 0.0,
        }
    }

    /// Parses `cx,cy,rx,ry,theta`.
    pub fn parse_csv(s: &str) -> Result<Self> {
        let vals: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::invalid(format!("ellipse `{s}`: {e}")))?;
        match vals[..] {
            [cx, cy, rx, ry, theta] => Ellipse::new(cx, cy, rx, ry, theta),
            _ => Err(Error::invalid(format!(
                "ellipse `{s}`: expected 5 comma-separated values, got {}",
                vals.len()
            ))),
        }
    }

    /// Checks finiteness and positive semi-diameters. The angle may be any
    /// finite value; operations normalize it on the fly.
    pub fn validate(&self) -> Result<()> {
        let all = [self.cx, self.cy, self.rx, self.ry, self.theta];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite ellipse {self:?}")));
        }
        if self.rx <= 0.0 || self.ry <= 0.0 {
            return Err(Error::invalid(format!(
                "ellipse semi-diameters must be positive, got rx={} ry={}",
                self.rx, self.ry
            )));
        }
        Ok(())
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(self.cx, self.cy)
    }

    pub fn area(&self) -> f64 {
        PI * self.rx * self.ry
    }

    pub fn params(&self) -> [f64; 5] {
        [self.cx, self.cy, self.rx, self.ry, self.theta]
    }

    pub fn from_params(p: [f64; 5]) -> Self {
        Ellipse {
            cx: p[0],
            cy: p[1],
            rx: p[2],
            ry: p[3],
            theta: p[4],
        }
    }

    /// `(σl, σs, angle)`: the semi-major and semi-minor lengths and the
    /// normalized direction of the major axis.
    pub fn major_minor(&self) -> (f64, f64, f64) {
        if self.rx >= self.ry {
            (self.rx, self.ry, normalize_angle(self.theta))
        } else {
            (self.ry, self.rx, normalize_angle(self.theta + FRAC_PI_2))
        }
    }

    /// Point on the boundary at parameter `t` (radians, measured from the
    /// first axis).
    pub fn boundary_point(&self, t: f64) -> Vec2 {
        let (s, c) = self.theta.sin_cos();
        let (st, ct) = t.sin_cos();
        let u = self.rx * ct;
        let v = self.ry * st;
        Vec2::new(self.cx + u * c - v * s, self.cy + u * s + v * c)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Ellipse {
        Ellipse {
            cx: self.cx + dx,
            cy: self.cy + dy,
            ..*self
        }
    }

    /// Rotates the ellipse by `angle` (counterclockwise) about `pivot`.
    pub fn rotated_about(&self, pivot: Vec2, angle: f64) -> Ellipse {
        let (s, c) = angle.sin_cos();
        let d = self.center() - pivot;
        Ellipse {
            cx: pivot.x + c * d.x - s * d.y,
            cy: pivot.y + s * d.x + c * d.y,
            theta: normalize_angle(self.theta + angle),
            ..*self
        }
    }

    /// Scales the whole plane by `s` about the origin.
    pub fn scaled(&self, s: f64) -> Ellipse {
        Ellipse {
            cx: self.cx * s,
            cy: self.cy * s,
            rx: self.rx * s,
            ry: self.ry * s,
            theta: self.theta,
        }
    }

    /// Whether `other` describes the same point set, up to `tol` on each of
    /// center, semi-axes and (for non-circles) orientation modulo π.
    pub fn approx_same_shape(&self, other: &Ellipse, tol: f64) -> bool {
        let (la, sa, ta) = self.major_minor();
        let (lb, sb, tb) = other.major_minor();
        let base = (self.cx - other.cx).abs() <= tol
            && (self.cy - other.cy).abs() <= tol
            && (la - lb).abs() <= tol
            && (sa - sb).abs() <= tol;
        if !base {
            return false;
        }
        let circular = (la - sa).abs() <= tol.max(EIGEN_DEGENERACY_TOL * la);
        circular || wrap_angle_diff(ta, tb).abs() <= tol
    }
}

/// A 2D normal distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian2 {
    pub mu: Vec2,
    pub sigma: Mat2,
}

impl Gaussian2 {
    pub fn new(mu: Vec2, sigma: Mat2) -> Result<Self> {
        let g = Gaussian2 { mu, sigma };
        g.validate()?;
        Ok(g)
    }

    /// Symmetric within [`SYMMETRY_TOL`], finite, and both eigenvalues > 0.
    pub fn validate(&self) -> Result<()> {
        if !(self.mu.x.is_finite() && self.mu.y.is_finite()) {
            return Err(Error::invalid("non-finite Gaussian mean"));
        }
        check_spd(self.sigma, "covariance")
    }
}

pub(crate) fn check_spd(m: Mat2, what: &str) -> Result<()> {
    if !m.is_finite() {
        return Err(Error::invalid(format!("{what} has non-finite entries")));
    }
    if !m.is_symmetric(SYMMETRY_TOL) {
        return Err(Error::invalid(format!("{what} is not symmetric: {m:?}")));
    }
    let (_, small) = m.sym_eigenvalues();
    if small <= 0.0 || m.m00 <= 0.0 {
        return Err(Error::invalid(format!(
            "{what} is not positive definite: {m:?}"
        )));
    }
    Ok(())
}

/// Axis-aligned rectangle in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl AxisBox {
    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn union(&self, o: &AxisBox) -> AxisBox {
        AxisBox {
            x_min: self.x_min.min(o.x_min),
            y_min: self.y_min.min(o.y_min),
            x_max: self.x_max.max(o.x_max),
            y_max: self.y_max.max(o.y_max),
        }
    }

    /// Closed-interval overlap test.
    pub fn intersects(&self, o: &AxisBox) -> bool {
        self.x_min <= o.x_max && o.x_min <= self.x_max && self.y_min <= o.y_max && o.y_min <= self.y_max
    }
}

/// `R(θ) = [[cos θ, sin θ], [−sin θ, cos θ]]`.
pub fn rotation_matrix(theta: f64) -> Result<Mat2> {
    if !theta.is_finite() {
        return Err(Error::invalid(format!("rotation angle {theta} is not finite")));
    }
    let (s, c) = theta.sin_cos();
    Ok(Mat2::new(c, s, -s, c))
}

pub fn ellipse_to_gaussian(e: &Ellipse) -> Result<Gaussian2> {
    e.validate()?;
    let (l, s, angle) = e.major_minor();
    let r = rotation_matrix(angle)?;
    let sigma = (r.transpose() * Mat2::diag(l * l, s * s) * r).symmetrized();
    Ok(Gaussian2 {
        mu: e.center(),
        sigma,
    })
}

/// Inverse of [`ellipse_to_gaussian`]. The result always has `rx ≥ ry`;
/// circles come back with `theta = 0`.
pub fn gaussian_to_ellipse(g: &Gaussian2) -> Result<Ellipse> {
    g.validate()?;
    let (l1, l2, angle) = g.sigma.sym_eigen();
    if l1 - l2 <= EIGEN_DEGENERACY_TOL * l1 {
        let r = (0.5 * (l1 + l2)).sqrt();
        return Ok(Ellipse::circle(g.mu.x, g.mu.y, r));
    }
    Ok(Ellipse {
        cx: g.mu.x,
        cy: g.mu.y,
        rx: l1.sqrt(),
        ry: l2.sqrt(),
        theta: angle,
    })
}

/// Tightest axis-aligned box around the ellipse.
pub fn ellipse_bbox(e: &Ellipse) -> Result<AxisBox> {
    e.validate()?;
    let (s, c) = e.theta.sin_cos();
    let (a2, b2) = (e.rx * e.rx, e.ry * e.ry);
    let hx = (a2 * c * c + b2 * s * s).sqrt();
    let hy = (a2 * s * s + b2 * c * c).sqrt();
    Ok(AxisBox {
        x_min: e.cx - hx,
        y_min: e.cy - hy,
        x_max: e.cx + hx,
        y_max: e.cy + hy,
    })
}

/// Precomputed interior test, for evaluating one ellipse at many points.
#[derive(Debug, Clone, Copy)]
pub struct InsideTest {
    cx: f64,
    cy: f64,
    cos: f64,
    sin: f64,
    inv_rx2: f64,
    inv_ry2: f64,
}

impl InsideTest {
    pub fn new(e: &Ellipse) -> Self {
        let (sin, cos) = e.theta.sin_cos();
        InsideTest {
            cx: e.cx,
            cy: e.cy,
            cos,
            sin,
            inv_rx2: 1.0 / (e.rx * e.rx),
            inv_ry2: 1.0 / (e.ry * e.ry),
        }
    }

    /// `(x−μ)ᵀ Σ⁻¹ (x−μ)`, evaluated in the ellipse's own frame.
    #[inline]
    pub fn quadratic_form(&self, x: f64, y: f64) -> f64 {
        let dx = x - self.cx;
        let dy = y - self.cy;
        let u = dx * self.cos + dy * self.sin;
        let v = -dx * self.sin + dy * self.cos;
        u * u * self.inv_rx2 + v * v * self.inv_ry2
    }

    #[inline]
    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.quadratic_form(x, y) <= 1.0
    }
}

/// Closed interior test: Mahalanobis quadratic form ≤ 1.
pub fn contains(e: &Ellipse, point: Vec2) -> bool {
    InsideTest::new(e).contains(point.x, point.y)
}
