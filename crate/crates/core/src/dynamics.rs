//! The billiard map T on the open annulus (t, theta) in [0, l) x (0, pi).
//!
//! A phase point is a collision site t (arc length) plus the angle theta
//! between the outgoing ray and the forward tangent, measured
//! counterclockwise, so theta in (0, pi) sends the ray into the region
//! bounded by the counterclockwise curve. `shoot` advances one collision,
//! `differential` estimates the 2x2 derivative of T or T^3 by Richardson
//! finite differences, and `measure_defect` probes invariance of the measure
//! sin(theta) dtheta dt.

use crate::boundary::BoundaryCurve;
use crate::geom::{circ_dist, wrap, wrap_signed, Vec2};
use std::f64::consts::PI;
use thiserror::Error;

/// Collisions with incidence angle closer than this to tangency are refused.
pub const GRAZING_TOL: f64 = 1e-7;

/// Half-width of the parameter neighborhood of the start point excluded from
/// intersection search, as a fraction of total length.
const EXCLUSION: f64 = 1e-6;

/// Root refinement target for the intersection parameter, as a fraction of
/// total length. Newton converges well past the contractual 1e-12 l, which
/// keeps downstream length identities tight.
const REFINE_TOL: f64 = 1e-15;

/// Minimal forward chord, as a fraction of total length.
const MIN_CHORD: f64 = 1e-9;

const UNDERFLOW_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DynamicsError {
    #[error("phase coordinate {0} is outside the open annulus")]
    InvalidPhase(f64),
    #[error("grazing collision at arc length {t:.6}: incidence {angle:.3e} rad below tolerance")]
    GrazingIntersection { t: f64, angle: f64 },
    #[error("no transversal intersection for the ray leaving arc length {0:.6}")]
    NoIntersection(f64),
    #[error("finite-difference step shrank below {0:.1e}")]
    StepUnderflow(f64),
}

/// A shoot failure tagged with its 1-based position in an orbit. The cause
/// stays in the source chain; printing it here too would double it up in
/// alternate-format renderings.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("step {step}")]
pub struct StepFailure {
    pub step: usize,
    #[source]
    pub source: DynamicsError,
}

/// Birkhoff coordinates of a collision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    t: f64,
    theta: f64,
}

impl PhasePoint {
    /// `t` is reduced modulo `period`; `theta` must lie strictly in (0, pi).
    pub fn new(t: f64, theta: f64, period: f64) -> Result<Self, DynamicsError> {
        if !t.is_finite() {
            return Err(DynamicsError::InvalidPhase(t));
        }
        if !(theta.is_finite() && theta > 0.0 && theta < PI) {
            return Err(DynamicsError::InvalidPhase(theta));
        }
        Ok(Self {
            t: wrap(t, period),
            theta,
        })
    }

    #[must_use]
    pub fn t(&self) -> f64 {
        self.t
    }

    #[must_use]
    pub fn theta(&self) -> f64 {
        self.theta
    }
}

/// Derivative of the (possibly iterated) billiard map: row 0 is d t', row 1
/// is d theta', columns are the input directions (dt, dtheta).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobian2(pub [[f64; 2]; 2]);

impl Jacobian2 {
    pub const IDENTITY: Self = Self([[1.0, 0.0], [0.0, 1.0]]);

    #[must_use]
    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    /// Frobenius norm of J minus the identity.
    #[must_use]
    pub fn defect_from_identity(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let d = self.0[i][j] - if i == j { 1.0 } else { 0.0 };
                s += d * d;
            }
        }
        s.sqrt()
    }

    #[must_use]
    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }
}

/// One application of the billiard map: next collision and the chord length.
pub fn shoot(curve: &BoundaryCurve, p: PhasePoint) -> Result<(PhasePoint, f64), DynamicsError> {
    let l = curve.total_length();
    if p.theta < GRAZING_TOL || p.theta > PI - GRAZING_TOL {
        return Err(DynamicsError::GrazingIntersection {
            t: p.t,
            angle: p.theta.min(PI - p.theta),
        });
    }
    let (x1, tan1) = curve.frame(p.t);
    let alpha = tan1.angle() + p.theta;
    let d = Vec2::from_angle(alpha);
    let g = |tau: f64| d.cross(curve.position(tau) - x1);

    let excl = EXCLUSION * l;
    let coarse = curve.coarse_positions();
    let n = coarse.len();
    let step = l / n as f64;
    let j1 = ((p.t / step) as usize).min(n - 1);

    // Samples ordered by unwrapped tau in (p.t, p.t + l), grid values first
    // bracketed by finer sweeps of the two intervals adjacent to the start.
    let mut samples: Vec<(f64, f64)> = Vec::with_capacity(n + 20);
    let mut grid: Vec<(f64, f64)> = Vec::with_capacity(n);
    for k in 1..n {
        let idx = (j1 + k) % n;
        let tau = (j1 + k) as f64 * step;
        if tau - p.t < excl || (p.t + l) - tau < excl {
            continue;
        }
        grid.push((tau, d.cross(coarse[idx] - x1)));
    }
    let lead = grid.first().map_or(p.t + l - excl, |s| s.0);
    let trail = grid.last().map_or(p.t + excl, |s| s.0);
    for i in 0..8 {
        let tau = p.t + excl + (lead - p.t - excl) * i as f64 / 8.0;
        samples.push((tau, g(tau)));
    }
    samples.extend_from_slice(&grid);
    for i in 1..=8 {
        let tau = trail + (p.t + l - excl - trail) * i as f64 / 8.0;
        samples.push((tau, g(tau)));
    }

    let assess = |tau: f64| -> Option<(f64, f64, Vec2, Vec2)> {
        let tw = wrap(tau, l);
        if circ_dist(tw, p.t, l) < excl {
            return None;
        }
        let (x2, tan2) = curve.frame(tw);
        let s = d.dot(x2 - x1);
        // first hit from inside must cross the boundary outward
        if s <= MIN_CHORD * l || d.cross(tan2) <= 0.0 {
            return None;
        }
        Some((tw, s, x2, tan2))
    };
    let mut best: Option<(f64, f64, Vec2, Vec2)> = None;
    for tau in scan_brackets(&samples, &g, curve, d, l) {
        if let Some(cand) = assess(tau) {
            if best.as_ref().is_none_or(|b| cand.1 < b.1) {
                best = Some(cand);
            }
        }
    }
    if best.is_none() {
        // rare fallback: dense relative sweep, e.g. for very glancing rays
        let m = 4096;
        let dense: Vec<(f64, f64)> = (0..=m)
            .map(|i| {
                let tau = p.t + excl + (l - 2.0 * excl) * i as f64 / m as f64;
                (tau, g(tau))
            })
            .collect();
        for tau in scan_brackets(&dense, &g, curve, d, l) {
            if let Some(cand) = assess(tau) {
                if best.as_ref().is_none_or(|b| cand.1 < b.1) {
                    best = Some(cand);
                }
            }
        }
    }
    let Some((t2, _, x2, tan2)) = best else {
        return Err(DynamicsError::NoIntersection(p.t));
    };

    // reflection: angle in equals angle out relative to the tangent at t2
    let theta2 = d.cross(tan2).atan2(d.dot(tan2));
    if !(GRAZING_TOL..=PI - GRAZING_TOL).contains(&theta2) {
        return Err(DynamicsError::GrazingIntersection {
            t: t2,
            angle: theta2.min(PI - theta2),
        });
    }
    let chord = (x2 - x1).norm();
    Ok((
        PhasePoint {
            t: t2,
            theta: theta2,
        },
        chord,
    ))
}

/// Walk consecutive samples and refine every sign change to a root.
fn scan_brackets(
    samples: &[(f64, f64)],
    g: &impl Fn(f64) -> f64,
    curve: &BoundaryCurve,
    d: Vec2,
    l: f64,
) -> Vec<f64> {
    let dg = |tau: f64| d.cross(curve.frame(wrap(tau, l)).1);
    let mut roots = Vec::new();
    for w in samples.windows(2) {
        let ((a, ga), (b, gb)) = (w[0], w[1]);
        if ga == 0.0 {
            roots.push(a);
        }
        if ga * gb < 0.0 {
            roots.push(refine_root(g, &dg, a, b, ga, REFINE_TOL * l));
        }
    }
    if let Some(&(last, gl)) = samples.last() {
        if gl == 0.0 {
            roots.push(last);
        }
    }
    roots
}

/// Safeguarded Newton: keeps the root bracketed, falls back to bisection
/// whenever the Newton step leaves the bracket.
fn refine_root(
    g: &impl Fn(f64) -> f64,
    dg: &impl Fn(f64) -> f64,
    mut a: f64,
    mut b: f64,
    mut ga: f64,
    tol: f64,
) -> f64 {
    let mut x = 0.5 * (a + b);
    for _ in 0..80 {
        let gx = g(x);
        if gx == 0.0 {
            return x;
        }
        if (gx > 0.0) == (ga > 0.0) {
            a = x;
            ga = gx;
        } else {
            b = x;
        }
        let slope = dg(x);
        let mut next = if slope != 0.0 {
            x - gx / slope
        } else {
            f64::NAN
        };
        if !(next > a && next < b) {
            next = 0.5 * (a + b);
        }
        if (next - x).abs() < tol {
            return next;
        }
        x = next;
    }
    x
}

/// Orbit segment (T p, T^2 p, ..., T^n p).
pub fn iterate(
    curve: &BoundaryCurve,
    p: PhasePoint,
    n: usize,
) -> Result<Vec<PhasePoint>, StepFailure> {
    assert!(n >= 1, "iterate needs at least one step");
    let mut out = Vec::with_capacity(n);
    let mut cur = p;
    for step in 1..=n {
        match shoot(curve, cur) {
            Ok((q, _)) => {
                out.push(q);
                cur = q;
            }
            Err(source) => return Err(StepFailure { step, source }),
        }
    }
    Ok(out)
}

/// Derivative of T (order 1) or T^3 (order 3) at p by central differences
/// with one Richardson combination; base step 1e-5 (times l on the t axis),
/// halved adaptively when a stencil point fails.
pub fn differential(
    curve: &BoundaryCurve,
    p: PhasePoint,
    order: usize,
) -> Result<Jacobian2, DynamicsError> {
    assert!(order == 1 || order == 3, "order must be 1 or 3");
    let l = curve.total_length();
    let map = |q: PhasePoint| -> Result<(f64, f64), DynamicsError> {
        let mut cur = q;
        for _ in 0..order {
            cur = shoot(curve, cur)?.0;
        }
        Ok((cur.t, cur.theta))
    };
    let mut h = 1e-5;
    loop {
        match jacobian_attempt(&map, p, h, l) {
            Ok(j) => return Ok(j),
            Err(e @ DynamicsError::StepUnderflow(_)) => return Err(e),
            // any failed stencil point (outside the annulus, grazing, lost
            // intersection) just means the stencil is too wide
            Err(_) => {
                h *= 0.5;
                if h < UNDERFLOW_FLOOR {
                    return Err(DynamicsError::StepUnderflow(UNDERFLOW_FLOOR));
                }
            }
        }
    }
}

fn jacobian_attempt(
    map: &impl Fn(PhasePoint) -> Result<(f64, f64), DynamicsError>,
    p: PhasePoint,
    h: f64,
    l: f64,
) -> Result<Jacobian2, DynamicsError> {
    let column = |axis: usize, hh: f64| -> Result<[f64; 2], DynamicsError> {
        let step = if axis == 0 { hh * l } else { hh };
        let (pp, pm) = if axis == 0 {
            (
                PhasePoint::new(p.t + step, p.theta, l)?,
                PhasePoint::new(p.t - step, p.theta, l)?,
            )
        } else {
            (
                PhasePoint::new(p.t, p.theta + step, l)?,
                PhasePoint::new(p.t, p.theta - step, l)?,
            )
        };
        let (tp, thp) = map(pp)?;
        let (tm, thm) = map(pm)?;
        Ok([
            wrap_signed(tp - tm, l) / (2.0 * step),
            (thp - thm) / (2.0 * step),
        ])
    };
    let mut m = [[0.0; 2]; 2];
    for axis in 0..2 {
        let ch = column(axis, h)?;
        let ch2 = column(axis, 0.5 * h)?;
        m[0][axis] = (4.0 * ch2[0] - ch[0]) / 3.0;
        m[1][axis] = (4.0 * ch2[1] - ch[1]) / 3.0;
    }
    let j = Jacobian2(m);
    if !j.is_finite() {
        return Err(DynamicsError::StepUnderflow(h));
    }
    Ok(j)
}

/// |det DT| sin(theta2) / sin(theta1) - 1; near zero when the map preserves
/// the measure sin(theta) dtheta dt.
pub fn measure_defect(curve: &BoundaryCurve, p: PhasePoint) -> Result<f64, DynamicsError> {
    let (q, _) = shoot(curve, p)?;
    let j = differential(curve, p, 1)?;
    Ok(j.det().abs() * q.theta.sin() / p.theta.sin() - 1.0)
}
