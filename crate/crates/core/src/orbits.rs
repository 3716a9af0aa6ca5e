//! Period-3 orbits of the billiard map.
//!
//! Orbits are found variationally: a triangle inscribed in the boundary is
//! an orbit exactly when its perimeter is stationary in all three vertex
//! parameters, so the finder runs damped multistart Newton on the closed
//! form perimeter gradient. An independent pipeline (`sample_p3`) locates
//! fixed points of T^3 on a phase-space grid; the two must agree, which
//! makes disagreement a bug detector. On top of the orbits sit the
//! diagnostics: the extended length function (chords of the first two
//! collisions plus the closing segment), its theta-derivative, the residual
//! of the identity k(t) L = 2 sin^3(theta), and the Frobenius distance of
//! DT^3 from the identity.

use crate::boundary::BoundaryCurve;
use crate::dynamics::{differential, iterate, shoot, DynamicsError, PhasePoint, GRAZING_TOL};
use crate::fractal::PointCloud;
use crate::geom::{circ_dist, wrap, wrap_signed, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::{PI, TAU};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OrbitError {
    #[error("triangle vertices nearly coincide (separation {0:.3e})")]
    DegenerateTriangle(f64),
}

/// Sign pattern of the perimeter Hessian at the orbit. Eigenvalues within
/// 1e-8 of zero (continuous families have one exact zero along the family
/// direction) make the label `Other`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Maximum,
    Saddle,
    Other,
}

/// A period-3 orbit in canonical form: positively oriented triangle,
/// cyclically rotated so t[0] is the smallest arc length.
#[derive(Debug, Clone, Serialize)]
pub struct OrbitTriple {
    pub t: [f64; 3],
    pub theta: [f64; 3],
    pub perimeter: f64,
    pub classification: Classification,
}

/// Sum of the three chord lengths of the inscribed triangle (t0, t1, t2).
pub fn perimeter(curve: &BoundaryCurve, t0: f64, t1: f64, t2: f64) -> f64 {
    let a = curve.position(t0);
    let b = curve.position(t1);
    let c = curve.position(t2);
    a.distance(b) + b.distance(c) + c.distance(a)
}

/// Closed-form partials of the perimeter in the vertex parameters: at each
/// vertex, the tangent dotted with the difference of incoming and outgoing
/// unit chord directions. Zero exactly at the reflection law.
pub fn perimeter_gradient(
    curve: &BoundaryCurve,
    t0: f64,
    t1: f64,
    t2: f64,
) -> Result<[f64; 3], OrbitError> {
    let l = curve.total_length();
    let t = [t0, t1, t2];
    let x = [curve.position(t0), curve.position(t1), curve.position(t2)];
    for i in 0..3 {
        let d = x[i].distance(x[(i + 1) % 3]);
        if d < 1e-9 * l {
            return Err(OrbitError::DegenerateTriangle(d));
        }
    }
    let mut g = [0.0; 3];
    for i in 0..3 {
        let u_in = (x[i] - x[(i + 2) % 3]).normalized();
        let u_out = (x[(i + 1) % 3] - x[i]).normalized();
        let (_, tan) = curve.frame(t[i]);
        g[i] = tan.dot(u_in - u_out);
    }
    Ok(g)
}

fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Gaussian elimination with partial pivoting; None on numerical rank loss.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut s = b[row];
        for k in row + 1..3 {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    x.is_finite().then_some(x)
}

trait FiniteAll {
    fn is_finite(&self) -> bool;
}
impl FiniteAll for [f64; 3] {
    fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

/// Eigenvalues of a symmetric 3x3 matrix by the trigonometric closed form.
fn sym3_eigenvalues(m: &[[f64; 3]; 3]) -> [f64; 3] {
    let p1 = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
    let q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
    let p2 = (m[0][0] - q).powi(2) + (m[1][1] - q).powi(2) + (m[2][2] - q).powi(2) + 2.0 * p1;
    if p2 <= 1e-300 {
        return [q, q, q];
    }
    let p = (p2 / 6.0).sqrt();
    let mut b = *m;
    for i in 0..3 {
        b[i][i] -= q;
    }
    let r = (det3(&b) / (2.0 * p * p * p)).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
    [e1, 3.0 * q - e1 - e3, e3]
}

fn classify(eigs: [f64; 3]) -> Classification {
    const TH: f64 = 1e-8;
    if eigs.iter().all(|&e| e < -TH) {
        Classification::Maximum
    } else if eigs.iter().all(|&e| e.abs() > TH)
        && eigs.iter().any(|&e| e > TH)
        && eigs.iter().any(|&e| e < -TH)
    {
        Classification::Saddle
    } else {
        Classification::Other
    }
}

/// Central-difference Hessian of the perimeter, from the analytic gradient.
fn hessian(curve: &BoundaryCurve, ts: &[f64; 3]) -> Option<[[f64; 3]; 3]> {
    let h = 1e-6 * curve.total_length();
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        let mut tp = *ts;
        tp[i] += h;
        let mut tm = *ts;
        tm[i] -= h;
        let gp = perimeter_gradient(curve, tp[0], tp[1], tp[2]).ok()?;
        let gm = perimeter_gradient(curve, tm[0], tm[1], tm[2]).ok()?;
        for j in 0..3 {
            m[j][i] = (gp[j] - gm[j]) / (2.0 * h);
        }
    }
    for i in 0..3 {
        for j in i + 1..3 {
            let v = 0.5 * (m[i][j] + m[j][i]);
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    Some(m)
}

/// Damped Gauss-Newton on |gradient|^2. The Hessian is singular along
/// one-parameter orbit families, so the step is always regularized.
fn refine_critical_triple(curve: &BoundaryCurve, start: [f64; 3]) -> Option<[f64; 3]> {
    let l = curve.total_length();
    let mut ts = start;
    let mut g = perimeter_gradient(curve, ts[0], ts[1], ts[2]).ok()?;
    let mut gn = norm3(&g);
    let mut lambda = 1e-4;
    for _ in 0..200 {
        if gn < 1e-11 * l {
            return Some(ts);
        }
        let h = hessian(curve, &ts)?;
        let mut hh = [[0.0; 3]; 3];
        let mut rhs = [0.0; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    hh[i][j] += h[k][i] * h[k][j];
                }
            }
            for k in 0..3 {
                rhs[i] += h[k][i] * g[k];
            }
        }
        let mut stepped = false;
        for _ in 0..12 {
            let mut a = hh;
            for i in 0..3 {
                a[i][i] += lambda * (1.0 + hh[i][i]);
            }
            let Some(delta) = solve3(a, [-rhs[0], -rhs[1], -rhs[2]]) else {
                lambda *= 6.0;
                continue;
            };
            let trial = [ts[0] + delta[0], ts[1] + delta[1], ts[2] + delta[2]];
            if let Ok(tg) = perimeter_gradient(curve, trial[0], trial[1], trial[2]) {
                let tn = norm3(&tg);
                if tn < gn {
                    ts = trial;
                    g = tg;
                    gn = tn;
                    lambda = (lambda * 0.35).max(1e-12);
                    stepped = true;
                    break;
                }
            }
            lambda *= 6.0;
            if lambda > 1e10 {
                break;
            }
        }
        if !stepped {
            break;
        }
    }
    (gn < 1e-10 * l).then_some(ts)
}

/// Canonical form plus full validation: positive orientation, smallest t
/// first, nondegenerate vertices, legal reflection angles, and an exact
/// round trip under the first-hit map.
fn canonical_triple(curve: &BoundaryCurve, ts: [f64; 3]) -> Option<OrbitTriple> {
    let l = curve.total_length();
    let mut t = ts.map(|v| wrap(v, l));
    for i in 0..3 {
        if circ_dist(t[i], t[(i + 1) % 3], l) < 1e-4 * l {
            return None;
        }
    }
    let x = t.map(|ti| curve.position(ti));
    let area2 = (x[1] - x[0]).cross(x[2] - x[0]);
    if area2.abs() < 1e-10 * l * l {
        return None;
    }
    if area2 < 0.0 {
        t.swap(1, 2);
    }
    let k = (0..3).min_by(|&a, &b| t[a].total_cmp(&t[b])).unwrap();
    t.rotate_left(k);

    let x = t.map(|ti| curve.position(ti));
    let mut theta = [0.0; 3];
    for i in 0..3 {
        let u = (x[(i + 1) % 3] - x[i]).normalized();
        let (_, tan) = curve.frame(t[i]);
        let a = tan.cross(u).atan2(tan.dot(u));
        if !(GRAZING_TOL..=PI - GRAZING_TOL).contains(&a) {
            return None;
        }
        theta[i] = a;
    }
    let p0 = PhasePoint::new(t[0], theta[0], l).ok()?;
    let steps = iterate(curve, p0, 3).ok()?;
    for (i, expect) in [(0usize, 1usize), (1, 2), (2, 0)] {
        if circ_dist(steps[i].t(), t[expect], l) > 1e-7
            || (steps[i].theta() - theta[expect]).abs() > 1e-7
        {
            return None;
        }
    }
    let perim = perimeter(curve, t[0], t[1], t[2]);
    Some(OrbitTriple {
        t,
        theta,
        perimeter: perim,
        classification: Classification::Other,
    })
}

fn same_orbit(a: &OrbitTriple, b: &OrbitTriple, tol: f64, l: f64) -> bool {
    (0..3).all(|i| circ_dist(a.t[i], b.t[i], l) < tol)
}

/// Multistart search for period-3 orbits: damped Newton on the perimeter
/// gradient from `n_seeds` reproducible random triangles, deduplicated
/// modulo rotation and reflection at resolution 1e-6 of the boundary
/// length, sorted by (t0, theta0). An empty result is legal.
pub fn find_period3(curve: &BoundaryCurve, n_seeds: usize, rng_seed: u64) -> Vec<OrbitTriple> {
    assert!(n_seeds >= 1, "need at least one seed");
    let l = curve.total_length();
    let seeds: Vec<[f64; 3]> = {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        (0..n_seeds)
            .map(|_| std::array::from_fn(|_| rng.gen_range(0.0..l)))
            .collect()
    };
    let refined: Vec<Option<OrbitTriple>> = seeds
        .par_iter()
        .map(|&s| {
            let ts = refine_critical_triple(curve, s)?;
            let h = hessian(curve, &ts)?;
            let mut orb = canonical_triple(curve, ts)?;
            orb.classification = classify(sym3_eigenvalues(&h));
            Some(orb)
        })
        .collect();
    let mut unique: Vec<OrbitTriple> = Vec::new();
    'cand: for orb in refined.into_iter().flatten() {
        for seen in &unique {
            if same_orbit(seen, &orb, 1e-6 * l, l) {
                continue 'cand;
            }
        }
        unique.push(orb);
    }
    unique.sort_by(|a, b| {
        a.t[0]
            .total_cmp(&b.t[0])
            .then(a.theta[0].total_cmp(&b.theta[0]))
    });
    unique
}

/// Chords of the first two collisions plus the straight closing segment
/// back to the start point. Agrees with the perimeter on a period-3 orbit
/// and extends it C^1-smoothly off the orbit.
pub fn extended_length(curve: &BoundaryCurve, p: PhasePoint) -> Result<f64, DynamicsError> {
    let (q1, c1) = shoot(curve, p)?;
    let (q2, c2) = shoot(curve, q1)?;
    let x0 = curve.position(p.t());
    let x2 = curve.position(q2.t());
    Ok(c1 + c2 + x2.distance(x0))
}

/// d(extended_length)/d(theta) by central differences, step 1e-6. Zero at
/// genuine orbits (Fermat criticality).
pub fn fermat_defect_at(curve: &BoundaryCurve, p: PhasePoint) -> Result<f64, DynamicsError> {
    const H: f64 = 1e-6;
    let l = curve.total_length();
    let fp = extended_length(curve, PhasePoint::new(p.t(), p.theta() + H, l)?)?;
    let fm = extended_length(curve, PhasePoint::new(p.t(), p.theta() - H, l)?)?;
    Ok((fp - fm) / (2.0 * H))
}

/// [`fermat_defect_at`] evaluated at the orbit's first phase point.
pub fn fermat_defect(curve: &BoundaryCurve, orbit: &OrbitTriple) -> Result<f64, DynamicsError> {
    let p = PhasePoint::new(orbit.t[0], orbit.theta[0], curve.total_length())?;
    fermat_defect_at(curve, p)
}

/// k(t0) * perimeter - 2 sin^3(theta0). Vanishes when additionally DT^3 is
/// the identity at the orbit; nonzero values are meaningful (the circle's
/// equilateral family gives 9 sqrt(3) / 4).
pub fn wojtkowski_residual(curve: &BoundaryCurve, orbit: &OrbitTriple) -> f64 {
    curve.curvature(orbit.t[0]) * orbit.perimeter - 2.0 * orbit.theta[0].sin().powi(3)
}

/// Same residual from a raw phase point, with the orbit length taken from
/// the extended length function.
pub fn wojtkowski_residual_at(curve: &BoundaryCurve, p: PhasePoint) -> Result<f64, DynamicsError> {
    let len = extended_length(curve, p)?;
    Ok(curve.curvature(p.t()) * len - 2.0 * p.theta().sin().powi(3))
}

/// Frobenius norm of DT^3 - id at p.
pub fn dt3_defect(curve: &BoundaryCurve, p: PhasePoint) -> Result<f64, DynamicsError> {
    Ok(differential(curve, p, 3)?.defect_from_identity())
}

/// One damped Newton run for a fixed point of T^3 from a grid cell.
fn fixed_point_from(curve: &BoundaryCurve, t0: f64, th0: f64, tol: f64) -> Option<(f64, f64)> {
    let l = curve.total_length();
    let map3 = |t: f64, th: f64| -> Option<(f64, f64)> {
        let p = PhasePoint::new(t, th, l).ok()?;
        let q = iterate(curve, p, 3).ok()?;
        Some((wrap_signed(q[2].t() - t, l), q[2].theta() - th))
    };
    let (mut t, mut th) = (t0, th0);
    let mut r = map3(t, th)?;
    let mut rn = r.0.hypot(r.1);
    let mut lambda = 1e-3;
    // polish far below the acceptance residual, otherwise two runs landing
    // on the same isolated fixed point can sit further apart than the
    // deduplication resolution
    let polish = tol * 1e-3;
    for _ in 0..40 {
        if rn < polish {
            break;
        }
        let ht = 1e-7 * l;
        let hh = 1e-7;
        let rtp = map3(t + ht, th)?;
        let rtm = map3(t - ht, th)?;
        let rhp = map3(t, th + hh)?;
        let rhm = map3(t, th - hh)?;
        let j = [
            [(rtp.0 - rtm.0) / (2.0 * ht), (rhp.0 - rhm.0) / (2.0 * hh)],
            [(rtp.1 - rtm.1) / (2.0 * ht), (rhp.1 - rhm.1) / (2.0 * hh)],
        ];
        let jtj = [
            [
                j[0][0] * j[0][0] + j[1][0] * j[1][0],
                j[0][0] * j[0][1] + j[1][0] * j[1][1],
            ],
            [
                j[0][0] * j[0][1] + j[1][0] * j[1][1],
                j[0][1] * j[0][1] + j[1][1] * j[1][1],
            ],
        ];
        let jtr = [j[0][0] * r.0 + j[1][0] * r.1, j[0][1] * r.0 + j[1][1] * r.1];
        let mut stepped = false;
        for _ in 0..8 {
            let a = [
                [jtj[0][0] + lambda * (1.0 + jtj[0][0]), jtj[0][1]],
                [jtj[1][0], jtj[1][1] + lambda * (1.0 + jtj[1][1])],
            ];
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            if det.abs() < 1e-300 {
                lambda *= 8.0;
                continue;
            }
            let dt = (-jtr[0] * a[1][1] + jtr[1] * a[0][1]) / det;
            let dth = (-jtr[1] * a[0][0] + jtr[0] * a[1][0]) / det;
            let tt = t + dt;
            let tth = (th + dth).clamp(2.0 * GRAZING_TOL, PI - 2.0 * GRAZING_TOL);
            if let Some(tr) = map3(tt, tth) {
                let tn = tr.0.hypot(tr.1);
                if tn < rn {
                    t = tt;
                    th = tth;
                    r = tr;
                    rn = tn;
                    lambda = (lambda * 0.3).max(1e-14);
                    stepped = true;
                    break;
                }
            }
            lambda *= 8.0;
            if lambda > 1e12 {
                break;
            }
        }
        if !stepped {
            break;
        }
    }
    (rn < tol * 1e-2 && th > GRAZING_TOL && th < PI - GRAZING_TOL).then_some((wrap(t, l), th))
}

/// Grid scan for the period-3 set: damped Newton on T^3 - id from every
/// cell of a grid_t x grid_theta phase grid, keeping fixed points with
/// residual below `tol`, deduplicated at resolution `tol`. Points come back
/// as (t * 2 pi / l, theta) so both coordinates are angle-like.
pub fn sample_p3(curve: &BoundaryCurve, grid_t: usize, grid_theta: usize, tol: f64) -> PointCloud {
    assert!(grid_t >= 8 && grid_theta >= 8, "grid too coarse");
    assert!(tol > 0.0, "tolerance must be positive");
    let l = curve.total_length();
    let cells: Vec<(f64, f64)> = (0..grid_t)
        .flat_map(|i| {
            let t = (i as f64 + 0.5) * l / grid_t as f64;
            (0..grid_theta).map(move |j| (t, (j as f64 + 0.5) * PI / grid_theta as f64))
        })
        .collect();
    let found: Vec<Option<(f64, f64)>> = cells
        .par_iter()
        .map(|&(t, th)| fixed_point_from(curve, t, th, tol))
        .collect();
    let mut pts: Vec<(f64, f64)> = found.into_iter().flatten().collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut kept: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for &(t, th) in &pts {
        let dup = kept
            .iter()
            .rev()
            .take_while(|&&(kt, _)| t - kt < tol)
            .any(|&(_, kth)| (th - kth).abs() < tol);
        if !dup {
            kept.push((t, th));
        }
    }
    // seam duplicates: t near 0 versus t near l
    let head: Vec<(f64, f64)> = kept.iter().copied().take_while(|&(t, _)| t < tol).collect();
    kept.retain(|&(t, th)| {
        !(l - t < tol
            && head
                .iter()
                .any(|&(ht, hth)| circ_dist(t, ht, l) < tol && (th - hth).abs() < tol))
    });
    let scale = TAU / l;
    PointCloud::new(
        kept.iter()
            .map(|&(t, th)| Vec2::new(t * scale, th))
            .collect(),
        "period-3 fixed points",
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::ShapeDescriptor;

    fn circle(r: f64) -> BoundaryCurve {
        BoundaryCurve::build(ShapeDescriptor::circle(r)).unwrap()
    }

    fn ellipse(a: f64, b: f64) -> BoundaryCurve {
        BoundaryCurve::build(ShapeDescriptor::ellipse(a, b)).unwrap()
    }

    fn trefoil() -> BoundaryCurve {
        BoundaryCurve::build(ShapeDescriptor::fourier(1.0, vec![0.0, 0.0, 0.1], vec![])).unwrap()
    }

    const EQUILATERAL: f64 = 5.196152422706632; // 3 sqrt(3)

    #[test]
    fn perimeter_examples() {
        let c = circle(1.0);
        let p = perimeter(&c, 0.0, TAU / 3.0, 2.0 * TAU / 3.0);
        assert!((p - EQUILATERAL).abs() < 1e-9, "{p}");
        let d = perimeter(&c, 0.0, PI, 0.0);
        assert!((d - 4.0).abs() < 1e-10, "{d}");
    }

    #[test]
    fn perimeter_on_ellipse_matches_independent_parametrization() {
        // independent route: Simpson arc length of the ellipse plus
        // bisection to invert it, avoiding the curve's own tables
        let (a, b) = (2.0, 1.0);
        let speed = |phi: f64| ((a * phi.sin()).powi(2) + (b * phi.cos()).powi(2)).sqrt();
        let arc = |phi: f64| {
            let n = 40_000;
            let h = phi / n as f64;
            let mut s = speed(0.0) + speed(phi);
            for i in 1..n {
                s += speed(i as f64 * h) * if i % 2 == 0 { 2.0 } else { 4.0 };
            }
            s * h / 3.0
        };
        let total = arc(TAU);
        let invert = |target: f64| {
            let (mut lo, mut hi) = (0.0, TAU);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if arc(mid) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let pos = |phi: f64| Vec2::new(a * phi.cos(), b * phi.sin());
        let x0 = pos(0.0);
        let x1 = pos(invert(total / 3.0));
        let x2 = pos(invert(2.0 * total / 3.0));
        let expect = x0.distance(x1) + x1.distance(x2) + x2.distance(x0);

        let e = ellipse(a, b);
        let l = e.total_length();
        let got = perimeter(&e, 0.0, l / 3.0, 2.0 * l / 3.0);
        assert!((got - expect).abs() < 1e-8, "{got} vs {expect}");
    }

    #[test]
    fn gradient_vanishes_exactly_on_the_equilateral_orbit() {
        let c = circle(1.0);
        let g = perimeter_gradient(&c, 0.0, TAU / 3.0, 2.0 * TAU / 3.0).unwrap();
        assert!(norm3(&g) < 1e-10, "{g:?}");
    }

    fn fd_gradient(curve: &BoundaryCurve, ts: [f64; 3]) -> [f64; 3] {
        let h = 1e-6;
        std::array::from_fn(|i| {
            let mut tp = ts;
            tp[i] += h;
            let mut tm = ts;
            tm[i] -= h;
            (perimeter(curve, tp[0], tp[1], tp[2]) - perimeter(curve, tm[0], tm[1], tm[2]))
                / (2.0 * h)
        })
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let c = circle(1.0);
        let ts = [0.0, TAU / 3.0 + 0.01, 2.0 * TAU / 3.0];
        let g = perimeter_gradient(&c, ts[0], ts[1], ts[2]).unwrap();
        assert!(norm3(&g) > 1e-4, "perturbed triple must not be critical");
        let fd = fd_gradient(&c, ts);
        for i in 0..3 {
            assert!(
                (g[i] - fd[i]).abs() < 1e-6,
                "entry {i}: {} vs {}",
                g[i],
                fd[i]
            );
        }

        let e = ellipse(2.0, 1.0);
        let ts = [0.3, 3.1, 7.0];
        let g = perimeter_gradient(&e, ts[0], ts[1], ts[2]).unwrap();
        let fd = fd_gradient(&e, ts);
        for i in 0..3 {
            assert!(
                (g[i] - fd[i]).abs() < 1e-6,
                "entry {i}: {} vs {}",
                g[i],
                fd[i]
            );
        }
    }

    #[test]
    fn gradient_rejects_coincident_vertices() {
        let c = circle(1.0);
        assert!(matches!(
            perimeter_gradient(&c, 0.0, 1e-12, 2.0),
            Err(OrbitError::DegenerateTriangle(_))
        ));
    }

    #[test]
    fn circle_orbits_are_the_equilateral_family() {
        let c = circle(1.0);
        let l = c.total_length();
        let orbits = find_period3(&c, 64, 7);
        assert!(orbits.len() >= 2, "found {}", orbits.len());
        let mut t0s: Vec<f64> = Vec::new();
        for orb in &orbits {
            assert!(
                (orb.perimeter - EQUILATERAL).abs() < 1e-8,
                "{}",
                orb.perimeter
            );
            for i in 0..3 {
                assert!((orb.theta[i] - PI / 3.0).abs() < 1e-8, "{:?}", orb.theta);
            }
            let g = perimeter_gradient(&c, orb.t[0], orb.t[1], orb.t[2]).unwrap();
            assert!(norm3(&g) < 1e-9 * l);
            assert_eq!(orb.classification, Classification::Other);
            t0s.push(orb.t[0]);
        }
        t0s.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
        assert!(t0s.len() >= 2, "t0 should vary across the family");
    }

    // Closing angle of the period-3 family through t0, by bisection on the
    // third-return arc length. Independent of the variational finder.
    fn closing_theta(curve: &BoundaryCurve, t0: f64) -> Option<f64> {
        let l = curve.total_length();
        let gap = |th: f64| -> Option<f64> {
            let q = iterate(curve, PhasePoint::new(t0, th, l).ok()?, 3).ok()?;
            Some(wrap_signed(q[2].t() - t0, l))
        };
        let (mut lo, mut hi) = (1.0f64, 1.1f64);
        let (mut glo, ghi) = (gap(lo)?, gap(hi)?);
        if glo * ghi > 0.0 {
            return None;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let gm = gap(mid)?;
            if gm * glo <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
                glo = gm;
            }
        }
        Some(0.5 * (lo + hi))
    }

    #[test]
    fn near_circular_ellipse_carries_a_poncelet_family() {
        let e = ellipse(1.05, 1.0);
        let l = e.total_length();
        let orbits = find_period3(&e, 256, 11);
        let mut t0s: Vec<f64> = orbits.iter().map(|o| o.t[0]).collect();
        t0s.dedup_by(|a, b| (*a - *b).abs() < 1e-6 * l);
        assert!(
            t0s.len() >= 8,
            "family should give many representatives, got {}",
            t0s.len()
        );
        let mut th_min = f64::INFINITY;
        let mut th_max = f64::NEG_INFINITY;
        for orb in &orbits {
            let g = perimeter_gradient(&e, orb.t[0], orb.t[1], orb.t[2]).unwrap();
            assert!(norm3(&g) < 1e-9, "gradient {:?}", g);
            th_min = th_min.min(orb.theta[0]);
            th_max = th_max.max(orb.theta[0]);
            let oracle = closing_theta(&e, orb.t[0]).expect("closing angle exists");
            assert!(
                (oracle - orb.theta[0]).abs() < 1e-6,
                "oracle {oracle} vs {}",
                orb.theta[0]
            );
        }
        assert!(th_max - th_min > 1e-4, "theta should vary along the family");
    }

    #[test]
    fn trefoil_orbits_are_isolated_and_stable_under_more_seeds() {
        let f = trefoil();
        let l = f.total_length();
        let base = find_period3(&f, 256, 3);
        assert!(!base.is_empty());
        assert!(
            base.len() < 40,
            "expected isolated orbits, got {}",
            base.len()
        );
        // same stream, twice as many seeds: the extra starts must not
        // discover new orbits
        let more = find_period3(&f, 512, 3);
        assert_eq!(base.len(), more.len(), "orbit count must be seed-stable");
        for (a, b) in base.iter().zip(&more) {
            assert!(same_orbit(a, b, 1e-6 * l, l));
        }
    }

    #[test]
    fn extended_length_examples() {
        let c = circle(1.0);
        let v = extended_length(&c, PhasePoint::new(0.0, PI / 3.0, TAU).unwrap()).unwrap();
        assert!((v - EQUILATERAL).abs() < 1e-9, "{v}");

        let p = PhasePoint::new(0.0, PI / 3.0 + 0.05, TAU).unwrap();
        let v = extended_length(&c, p).unwrap();
        let q = iterate(&c, p, 2).unwrap();
        let x0 = c.position(p.t());
        let x1 = c.position(q[0].t());
        let x2 = c.position(q[1].t());
        let direct = x0.distance(x1) + x1.distance(x2) + x2.distance(x0);
        assert!((v - direct).abs() < 1e-12, "{v} vs {direct}");
        assert!(v > 0.0);

        let v = extended_length(&c, PhasePoint::new(0.0, PI / 2.0, TAU).unwrap()).unwrap();
        assert!((v - 4.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn fermat_criticality_at_orbits_only() {
        let c = circle(1.0);
        let orb = &find_period3(&c, 16, 5)[0];
        let d = fermat_defect(&c, orb).unwrap();
        assert!(d.abs() < 1e-5, "{d}");

        let e = ellipse(1.05, 1.0);
        let orb = &find_period3(&e, 64, 5)[0];
        let d = fermat_defect(&e, orb).unwrap();
        assert!(d.abs() < 1e-5, "{d}");

        let off = fermat_defect_at(&c, PhasePoint::new(0.0, PI / 3.0 + 0.1, TAU).unwrap()).unwrap();
        assert!(off.abs() > 1e-2, "{off}");
    }

    #[test]
    fn curvature_length_residual_on_circles() {
        let expect = 9.0 * 3f64.sqrt() / 4.0;
        for r in [1.0, 2.0] {
            let c = circle(r);
            let orbits = find_period3(&c, 32, 13);
            assert!(!orbits.is_empty());
            for orb in &orbits {
                let w = wojtkowski_residual(&c, orb);
                assert!((w - expect).abs() < 1e-8, "R = {r}: {w}");
            }
            let l = c.total_length();
            let p = PhasePoint::new(orbits[0].t[0], orbits[0].theta[0], l).unwrap();
            let w = wojtkowski_residual_at(&c, p).unwrap();
            assert!((w - expect).abs() < 1e-8, "at-point residual {w}");
        }
    }

    #[test]
    fn dt3_defect_is_the_cubed_shear_norm() {
        let c = circle(1.0);
        let d = dt3_defect(&c, PhasePoint::new(0.0, PI / 3.0, TAU).unwrap()).unwrap();
        assert!((d - 6.0).abs() < 1e-6, "{d}");
        let c2 = circle(2.0);
        let l2 = c2.total_length();
        let d = dt3_defect(&c2, PhasePoint::new(0.0, PI / 3.0, l2).unwrap()).unwrap();
        assert!((d - 12.0).abs() < 1e-6, "{d}");
    }

    #[test]
    fn extended_length_is_c1_near_orbits() {
        use rand::{Rng, SeedableRng};
        let cases = [(circle(1.0), 16usize), (ellipse(1.05, 1.0), 64usize)];
        for (curve, seeds) in &cases {
            let l = curve.total_length();
            let orbits = find_period3(curve, *seeds, 21);
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            for orb in orbits.iter().take(2) {
                for _ in 0..100 {
                    let t = orb.t[0] + rng.gen_range(-0.02..0.02) * l;
                    let th = orb.theta[0]
                        + rng.gen_range(0.005..0.02) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                    let grad = |h: f64| -> Option<(f64, f64)> {
                        let f = |tt: f64, tth: f64| {
                            extended_length(curve, PhasePoint::new(tt, tth, l).ok()?).ok()
                        };
                        Some((
                            (f(t + h, th)? - f(t - h, th)?) / (2.0 * h),
                            (f(t, th + h)? - f(t, th - h)?) / (2.0 * h),
                        ))
                    };
                    let (Some(g5), Some(g6)) = (grad(1e-5), grad(1e-6)) else {
                        continue;
                    };
                    let diff = (g5.0 - g6.0).hypot(g5.1 - g6.1);
                    let scale = g6.0.hypot(g6.1);
                    assert!(
                        diff <= 1e-3 * scale + 1e-9,
                        "gradients {g5:?} vs {g6:?} at ({t}, {th})"
                    );
                }
            }
        }
    }

    #[test]
    fn phase_representations_agree_on_length() {
        for curve in [circle(1.0), ellipse(1.05, 1.0)] {
            let l = curve.total_length();
            let orbits = find_period3(&curve, 32, 2);
            assert!(!orbits.is_empty());
            for orb in orbits.iter().take(3) {
                let vals: Vec<f64> = (0..3)
                    .map(|i| {
                        extended_length(&curve, PhasePoint::new(orb.t[i], orb.theta[i], l).unwrap())
                            .unwrap()
                    })
                    .collect();
                for v in &vals {
                    assert!((v - vals[0]).abs() < 1e-12, "{vals:?}");
                }
                assert!((vals[0] - orb.perimeter).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn sampled_circle_fixed_points_lie_on_two_lines() {
        let c = circle(1.0);
        let tol = 1e-9;
        let cloud = sample_p3(&c, 48, 48, tol);
        assert!(cloud.len() > 100, "cloud size {}", cloud.len());
        let mut saw_low = false;
        let mut saw_high = false;
        for p in cloud.points() {
            let th = p.y;
            let low = (th - PI / 3.0).abs() < 1e-8;
            let high = (th - 2.0 * PI / 3.0).abs() < 1e-8;
            assert!(low || high, "theta {th} off both lines");
            saw_low |= low;
            saw_high |= high;
        }
        assert!(saw_low && saw_high, "both orientations expected");
        // sampled points are fixed points of the third iterate
        let l = c.total_length();
        for p in cloud.points().iter().step_by(97) {
            let t = p.x * l / TAU;
            let q = iterate(&c, PhasePoint::new(t, p.y, l).unwrap(), 3).unwrap();
            assert!(circ_dist(q[2].t(), t, l) < 10.0 * tol);
            assert!((q[2].theta() - p.y).abs() < 10.0 * tol);
        }
    }

    #[test]
    fn sampled_trefoil_fixed_points_are_finite_and_grid_stable() {
        let f = trefoil();
        let coarse = sample_p3(&f, 12, 12, 1e-9);
        let fine = sample_p3(&f, 24, 24, 1e-9);
        assert!(!coarse.is_empty());
        assert!(
            coarse.len() < 100,
            "isolated set expected, got {}",
            coarse.len()
        );
        assert_eq!(coarse.len(), fine.len(), "count must be grid-stable");
    }

    #[test]
    #[should_panic(expected = "grid too coarse")]
    fn sample_rejects_tiny_grids() {
        sample_p3(&circle(1.0), 4, 48, 1e-9);
    }

    #[test]
    fn eigenvalue_helper_matches_known_spectrum() {
        let m = [[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 5.0]];
        let mut e = sym3_eigenvalues(&m);
        e.sort_by(f64::total_cmp);
        assert!((e[0] - 1.0).abs() < 1e-12);
        assert!((e[1] - 3.0).abs() < 1e-12);
        assert!((e[2] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn classification_thresholds() {
        assert_eq!(classify([-1.0, -2.0, -0.5]), Classification::Maximum);
        assert_eq!(classify([-1.0, 2.0, -0.5]), Classification::Saddle);
        assert_eq!(classify([-1.0, -2.0, 1e-10]), Classification::Other);
        assert_eq!(classify([1.0, 2.0, 0.5]), Classification::Other);
    }
}
