//! Closed planar billiard boundaries in unit-speed parametrization.
//!
//! A curve is built from a shape descriptor (circle, ellipse, or a truncated
//! polar Fourier graph) and exposes position, tangent angle, and signed
//! curvature as functions of arc length t in [0, l). Orientation is
//! counterclockwise and curvature is positive for convex curves. The native
//! parameter is the polar/elliptic angle phi; a dense arc-length table maps
//! between phi and t.

use crate::geom::{circ_dist, wrap, Vec2};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use thiserror::Error;

/// Default resolution of the arc-length lookup table.
pub const DEFAULT_KNOTS: usize = 8192;

/// Highest Fourier mode accepted by [`ShapeDescriptor::Fourier`].
pub const MAX_FOURIER_MODE: usize = 32;

/// Curvature magnitudes beyond this bound are rejected as non-smooth.
pub const MAX_CURVATURE: f64 = 1e4;

const SIMPLICITY_SAMPLES: usize = 4096;
const VALIDATION_SAMPLES: usize = 4096;
const COARSE_SAMPLES: usize = 512;

/// Shape descriptors, matching the JSON wire format exactly:
/// `{"kind":"circle","R":1.0}`, `{"kind":"ellipse","a":2.0,"b":1.0}`,
/// `{"kind":"fourier","r0":1.0,"cos":[0,0,0.1],"sin":[]}`.
///
/// A Fourier descriptor is the polar graph
/// r(phi) = r0 + sum_m (cos[m-1] cos(m phi) + sin[m-1] sin(m phi)),
/// coefficient index m starting at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ShapeDescriptor {
    Circle {
        #[serde(rename = "R")]
        r: f64,
    },
    Ellipse {
        a: f64,
        b: f64,
    },
    Fourier {
        r0: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
}

impl ShapeDescriptor {
    #[must_use]
    pub fn circle(r: f64) -> Self {
        Self::Circle { r }
    }

    #[must_use]
    pub fn ellipse(a: f64, b: f64) -> Self {
        Self::Ellipse { a, b }
    }

    #[must_use]
    pub fn fourier(r0: f64, cos: Vec<f64>, sin: Vec<f64>) -> Self {
        Self::Fourier { r0, cos, sin }
    }
}

#[derive(Debug, Error)]
pub enum BoundaryError {
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("curve self-intersects near arc length {0:.6}")]
    SelfIntersecting(f64),
    #[error("descriptor is not smooth enough: {0}")]
    NonSmooth(String),
}

/// Evaluators in the native parameter phi in [0, 2pi).
#[derive(Debug, Clone)]
enum Shape {
    Circle {
        r: f64,
    },
    Ellipse {
        a: f64,
        b: f64,
    },
    Fourier {
        r0: f64,
        cos: Vec<f64>,
        sin: Vec<f64>,
    },
}

impl Shape {
    fn point(&self, phi: f64) -> Vec2 {
        let (s, c) = phi.sin_cos();
        match self {
            Shape::Circle { r } => Vec2::new(r * c, r * s),
            Shape::Ellipse { a, b } => Vec2::new(a * c, b * s),
            Shape::Fourier { r0, cos, sin } => {
                let (r, _, _) = radial(*r0, cos, sin, phi);
                Vec2::new(r * c, r * s)
            }
        }
    }

    /// d point / d phi.
    fn velocity(&self, phi: f64) -> Vec2 {
        let (s, c) = phi.sin_cos();
        match self {
            Shape::Circle { r } => Vec2::new(-r * s, r * c),
            Shape::Ellipse { a, b } => Vec2::new(-a * s, b * c),
            Shape::Fourier { r0, cos, sin } => {
                let (r, r1, _) = radial(*r0, cos, sin, phi);
                Vec2::new(r1 * c - r * s, r1 * s + r * c)
            }
        }
    }

    fn speed(&self, phi: f64) -> f64 {
        self.velocity(phi).norm()
    }

    fn curvature(&self, phi: f64) -> f64 {
        match self {
            Shape::Circle { r } => 1.0 / r,
            Shape::Ellipse { a, b } => {
                let (s, c) = phi.sin_cos();
                let g = (a * s).powi(2) + (b * c).powi(2);
                a * b / (g * g.sqrt())
            }
            Shape::Fourier { r0, cos, sin } => {
                let (r, r1, r2) = radial(*r0, cos, sin, phi);
                let g = r * r + r1 * r1;
                (r * r + 2.0 * r1 * r1 - r * r2) / (g * g.sqrt())
            }
        }
    }
}

/// Polar radius and its first two phi-derivatives.
fn radial(r0: f64, cos: &[f64], sin: &[f64], phi: f64) -> (f64, f64, f64) {
    let (mut r, mut r1, mut r2) = (r0, 0.0, 0.0);
    for (i, &a) in cos.iter().enumerate() {
        let m = (i + 1) as f64;
        let (s, c) = (m * phi).sin_cos();
        r += a * c;
        r1 -= a * m * s;
        r2 -= a * m * m * c;
    }
    for (i, &b) in sin.iter().enumerate() {
        let m = (i + 1) as f64;
        let (s, c) = (m * phi).sin_cos();
        r += b * s;
        r1 += b * m * c;
        r2 -= b * m * m * s;
    }
    (r, r1, r2)
}

// 8-point Gauss-Legendre rule on [-1, 1].
const GL8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329, 0.313_706_645_877_887_29),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_29),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
];

fn gauss8(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    GL8.iter().map(|&(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}

/// A closed curve in arc-length parametrization.
///
/// Immutable after construction; all accessors are pure and reduce t modulo
/// the total length, so any real t is accepted.
#[derive(Debug, Clone)]
pub struct BoundaryCurve {
    descriptor: ShapeDescriptor,
    shape: Shape,
    knots: usize,
    phi_step: f64,
    /// Cumulative arc length at the uniform phi knots, length knots + 1.
    arc: Vec<f64>,
    /// Speed |d point/d phi| at the knots.
    spd: Vec<f64>,
    /// Unwrapped tangent angle at the knots, continuous lift from psi(0).
    psi: Vec<f64>,
    total: f64,
    /// Position samples at 512 uniform arc lengths, used by the
    /// ray-intersection sweep in the dynamics module.
    coarse: Vec<Vec2>,
}

impl BoundaryCurve {
    /// Build with the default table resolution.
    pub fn build(descriptor: ShapeDescriptor) -> Result<Self, BoundaryError> {
        Self::with_resolution(descriptor, DEFAULT_KNOTS)
    }

    /// Build with an explicit arc-length table resolution (`knots` >= 64).
    pub fn with_resolution(
        descriptor: ShapeDescriptor,
        knots: usize,
    ) -> Result<Self, BoundaryError> {
        assert!(knots >= 64, "arc-length table needs at least 64 knots");
        let shape = validate(&descriptor)?;

        let phi_step = TAU / knots as f64;
        let mut arc = Vec::with_capacity(knots + 1);
        let mut spd = Vec::with_capacity(knots + 1);
        let mut psi = Vec::with_capacity(knots + 1);
        arc.push(0.0);
        spd.push(shape.speed(0.0));
        psi.push(shape.velocity(0.0).angle());
        for i in 1..=knots {
            let lo = (i - 1) as f64 * phi_step;
            let hi = i as f64 * phi_step;
            arc.push(arc[i - 1] + gauss8(|p| shape.speed(p), lo, hi));
            spd.push(shape.speed(hi));
            let raw = shape.velocity(hi).angle();
            let prev = psi[i - 1];
            psi.push(prev + crate::geom::wrap_signed(raw - prev, TAU));
        }
        let total = arc[knots];

        let mut curve = Self {
            descriptor,
            shape,
            knots,
            phi_step,
            arc,
            spd,
            psi,
            total,
            coarse: Vec::new(),
        };
        curve.check_simplicity()?;
        curve.coarse = (0..COARSE_SAMPLES)
            .map(|j| curve.position(j as f64 * total / COARSE_SAMPLES as f64))
            .collect();
        Ok(curve)
    }

    #[must_use]
    pub fn descriptor(&self) -> &ShapeDescriptor {
        &self.descriptor
    }

    #[must_use]
    pub fn total_length(&self) -> f64 {
        self.total
    }

    /// Map arc length to the native parameter phi.
    fn invert(&self, t: f64) -> f64 {
        let t = wrap(t, self.total);
        // arc[0] = 0 <= t, so idx >= 1.
        let idx = self.arc.partition_point(|&a| a <= t);
        let i = (idx - 1).min(self.knots - 1);
        let (a0, a1) = (self.arc[i], self.arc[i + 1]);
        // Cubic Hermite model of arc(phi) on the knot interval, in the local
        // coordinate u in [0, 1]; derivatives are the knot speeds.
        let d0 = self.spd[i] * self.phi_step;
        let d1 = self.spd[i + 1] * self.phi_step;
        let mut u = (t - a0) / (a1 - a0);
        for _ in 0..3 {
            let u2 = u * u;
            let u3 = u2 * u;
            let f = (2.0 * u3 - 3.0 * u2 + 1.0) * a0
                + (u3 - 2.0 * u2 + u) * d0
                + (-2.0 * u3 + 3.0 * u2) * a1
                + (u3 - u2) * d1;
            let df = (6.0 * u2 - 6.0 * u) * a0
                + (3.0 * u2 - 4.0 * u + 1.0) * d0
                + (-6.0 * u2 + 6.0 * u) * a1
                + (3.0 * u2 - 2.0 * u) * d1;
            u -= (f - t) / df;
            u = u.clamp(-0.5, 1.5);
        }
        (i as f64 + u) * self.phi_step
    }

    /// Point on the curve at arc length t (any real; reduced mod l).
    #[must_use]
    pub fn position(&self, t: f64) -> Vec2 {
        self.shape.point(self.invert(t))
    }

    /// Position and unit tangent at arc length t in one inversion.
    #[must_use]
    pub fn frame(&self, t: f64) -> (Vec2, Vec2) {
        let phi = self.invert(t);
        (self.shape.point(phi), self.shape.velocity(phi).normalized())
    }

    /// Signed curvature; positive for convex counterclockwise curves.
    #[must_use]
    pub fn curvature(&self, t: f64) -> f64 {
        self.shape.curvature(self.invert(t))
    }

    /// Angle of the unit tangent, as a continuous lift along one period
    /// starting from the angle at t = 0 (so it increases by 2pi over a full
    /// counterclockwise traversal).
    #[must_use]
    pub fn tangent_angle(&self, t: f64) -> f64 {
        let phi = self.invert(t);
        let raw = self.shape.velocity(phi).angle();
        let est = {
            let i = ((phi / self.phi_step).round() as usize).min(self.knots);
            self.psi[i]
        };
        raw + TAU * ((est - raw) / TAU).round()
    }

    pub(crate) fn coarse_positions(&self) -> &[Vec2] {
        &self.coarse
    }

    fn check_simplicity(&self) -> Result<(), BoundaryError> {
        let n = SIMPLICITY_SAMPLES;
        let l = self.total;
        let pts: Vec<Vec2> = (0..n)
            .map(|j| self.position(j as f64 * l / n as f64))
            .collect();
        let min_sep = l / 10_000.0;
        let min_sep2 = min_sep * min_sep;
        let param_gap = l / 100.0;
        for j in 0..n {
            let tj = j as f64 * l / n as f64;
            for k in (j + 1)..n {
                let tk = k as f64 * l / n as f64;
                if circ_dist(tj, tk, l) > param_gap && (pts[j] - pts[k]).norm_squared() < min_sep2 {
                    return Err(BoundaryError::SelfIntersecting(tj));
                }
            }
        }
        Ok(())
    }
}

/// Check the descriptor and return the native-parameter evaluator.
fn validate(descriptor: &ShapeDescriptor) -> Result<Shape, BoundaryError> {
    let shape = match descriptor {
        ShapeDescriptor::Circle { r } => {
            if !(r.is_finite() && *r > 0.0) {
                return Err(BoundaryError::NonPositiveRadius(*r));
            }
            Shape::Circle { r: *r }
        }
        ShapeDescriptor::Ellipse { a, b } => {
            for v in [a, b] {
                if !(v.is_finite() && *v > 0.0) {
                    return Err(BoundaryError::NonPositiveRadius(*v));
                }
            }
            Shape::Ellipse { a: *a, b: *b }
        }
        ShapeDescriptor::Fourier { r0, cos, sin } => {
            if cos.len() > MAX_FOURIER_MODE || sin.len() > MAX_FOURIER_MODE {
                return Err(BoundaryError::NonSmooth(format!(
                    "fourier series truncated at mode {MAX_FOURIER_MODE}, got {}",
                    cos.len().max(sin.len())
                )));
            }
            if !r0.is_finite() || cos.iter().chain(sin).any(|c| !c.is_finite()) {
                return Err(BoundaryError::NonSmooth(
                    "non-finite fourier coefficient".into(),
                ));
            }
            let shape = Shape::Fourier {
                r0: *r0,
                cos: cos.clone(),
                sin: sin.clone(),
            };
            for j in 0..VALIDATION_SAMPLES {
                let phi = j as f64 * TAU / VALIDATION_SAMPLES as f64;
                let (r, _, _) = radial(*r0, cos, sin, phi);
                if r <= 0.0 {
                    return Err(BoundaryError::NonPositiveRadius(r));
                }
            }
            shape
        }
    };
    // Smoothness guard: curvature bounded and tangent turning resolvable by
    // the knot grid, so the unwrapped tangent-angle table is reliable.
    let mut max_turn_rate: f64 = 0.0;
    for j in 0..VALIDATION_SAMPLES {
        let phi = j as f64 * TAU / VALIDATION_SAMPLES as f64;
        let k = shape.curvature(phi);
        if !k.is_finite() || k.abs() > MAX_CURVATURE {
            return Err(BoundaryError::NonSmooth(format!(
                "curvature {k:.3e} at phi = {phi:.4} exceeds bound {MAX_CURVATURE:.0e}"
            )));
        }
        max_turn_rate = max_turn_rate.max((k * shape.speed(phi)).abs());
    }
    if max_turn_rate * TAU / DEFAULT_KNOTS as f64 > std::f64::consts::FRAC_PI_2 {
        return Err(BoundaryError::NonSmooth(
            "tangent turns faster than the arc-length table can resolve".into(),
        ));
    }
    Ok(shape)
}
