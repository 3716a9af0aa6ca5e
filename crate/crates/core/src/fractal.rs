//! Estimators of dimension, pre-measure, densities, and tangent structure
//! for finite planar point clouds, plus the ray-extraction and
//! derivative-along-a-sequence constructions they feed.
//!
//! A finite sample cannot carry Hausdorff measure, so every estimator works
//! with the normalized counting measure; the normalization (`mass_scale`) is
//! surfaced instead of hidden, and box counting stands in for the
//! uncomputable covering infimum.

use crate::geom::{wrap, wrap_signed, Vec2};
use serde::Serialize;
use std::collections::HashMap;
use std::collections::HashSet;
use std::f64::consts::{FRAC_PI_2, PI, SQRT_2, TAU};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FractalError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("base point is not an accumulation point at the requested depth")]
    NotAccumulationPoint,
    #[error("sequence is not asymptotic to a ray")]
    NotAsymptotic,
}

/// Finite stand-in for a planar set under study.
#[derive(Debug, Clone)]
pub struct PointCloud {
    points: Vec<Vec2>,
    note: String,
}

impl PointCloud {
    /// Drops non-finite entries and duplicates at resolution 1e-12, keeping
    /// first occurrences in order. An empty cloud is representable; the
    /// estimators that need points report `TooFewPoints` instead.
    pub fn new(points: Vec<Vec2>, note: impl Into<String>) -> Self {
        const RES: f64 = 1e-12;
        let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        let mut kept: Vec<Vec2> = Vec::with_capacity(points.len());
        'input: for p in points {
            if !p.is_finite() {
                continue;
            }
            let ci = (p.x / RES).floor() as i64;
            let cj = (p.y / RES).floor() as i64;
            for di in -1..=1_i64 {
                for dj in -1..=1_i64 {
                    if let Some(ids) = grid.get(&(ci + di, cj + dj)) {
                        if ids.iter().any(|&k| kept[k].distance(p) < RES) {
                            continue 'input;
                        }
                    }
                }
            }
            grid.entry((ci, cj)).or_default().push(kept.len());
            kept.push(p);
        }
        Self {
            points: kept,
            note: note.into(),
        }
    }

    #[must_use]
    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    #[must_use]
    pub fn note(&self) -> &str {
        &self.note
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[must_use]
    pub fn bounding_box(&self) -> Option<(Vec2, Vec2)> {
        let first = *self.points.first()?;
        let mut lo = first;
        let mut hi = first;
        for p in &self.points {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        Some((lo, hi))
    }

    /// Exact diameter via the convex hull.
    #[must_use]
    pub fn diameter(&self) -> f64 {
        set_diameter(&self.points)
    }
}

/// Log-log box-count fit.
#[derive(Debug, Clone, Serialize)]
pub struct DimensionEstimate {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub scales: Vec<f64>,
}

/// Tangent-line verdict at one base point. `curve` lists, per radius, the
/// fraction of ball mass outside the best double sector at the smallest
/// half-angle tried.
#[derive(Debug, Clone, Serialize)]
pub struct TangentReport {
    pub has_tangent: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub eta: f64,
    pub curve: Vec<(f64, f64)>,
}

/// Knobs for [`tangent_test`]. The finite-scale stand-ins for the r -> 0
/// limit: dyadic radii from an eighth of the cloud diameter, a few sector
/// half-angles, and the mass fraction below which the complement of the
/// double sector counts as negligible.
#[derive(Debug, Clone)]
pub struct TangentParams {
    pub eta_grid: Vec<f64>,
    pub radii: Vec<f64>,
    pub threshold: f64,
}

impl TangentParams {
    #[must_use]
    pub fn for_cloud(cloud: &PointCloud) -> Self {
        let d = cloud.diameter().max(f64::MIN_POSITIVE);
        Self {
            eta_grid: vec![0.05, 0.1, 0.2],
            radii: (0..6).map(|k| d / (8u32 << k) as f64).collect(),
            threshold: 0.05,
        }
    }
}

fn monotone_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup_by(|a, b| a.x == b.x && a.y == b.y);
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Vec2> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vec2>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 {
                let a = hull[hull.len() - 2];
                let b = hull[hull.len() - 1];
                if (b - a).cross(p - a) <= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn set_diameter(points: &[Vec2]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let hull = if points.len() > 48 {
        monotone_hull(points)
    } else {
        points.to_vec()
    };
    let mut d: f64 = 0.0;
    for i in 0..hull.len() {
        for j in i + 1..hull.len() {
            d = d.max(hull[i].distance(hull[j]));
        }
    }
    d
}

// Square grids repeat under quarter-turn rotations and unit-cell shifts, so
// this family of placements samples the whole placement space uniformly.
const GRID_ORIENTATIONS: usize = 8;
const GRID_OFFSETS: [f64; 2] = [0.0, 0.5];

/// Box-counting estimate of dimension: occupied-cell counts on dyadic grids
/// of mesh D/8 ... D/2^(2+n_scales) where D is the cloud diameter, fitted by
/// least squares in log-log coordinates. The count at each scale is the log
/// count averaged over grid placements (orientation and offset); a single
/// anchored grid leaks its alignment with the cloud into the slope.
pub fn box_dimension(
    cloud: &PointCloud,
    n_scales: usize,
) -> Result<DimensionEstimate, FractalError> {
    assert!(n_scales >= 4, "need at least 4 scales for a fit");
    if cloud.len() < 100 {
        return Err(FractalError::TooFewPoints {
            needed: 100,
            got: cloud.len(),
        });
    }
    let d = cloud.diameter();
    let scales: Vec<f64> = (1..=n_scales)
        .map(|k| d / 2f64.powi(2 + k as i32))
        .collect();
    let mut ys = vec![0.0; n_scales];
    let mut rotated = vec![Vec2::new(0.0, 0.0); cloud.len()];
    let mut cells: HashSet<(i64, i64)> = HashSet::new();
    for o in 0..GRID_ORIENTATIONS {
        let phi = o as f64 * FRAC_PI_2 / GRID_ORIENTATIONS as f64;
        let (sin, cos) = phi.sin_cos();
        for (buf, p) in rotated.iter_mut().zip(cloud.points()) {
            *buf = Vec2::new(p.x * cos + p.y * sin, p.y * cos - p.x * sin);
        }
        let (mut lo_x, mut lo_y) = (f64::INFINITY, f64::INFINITY);
        for p in &rotated {
            lo_x = lo_x.min(p.x);
            lo_y = lo_y.min(p.y);
        }
        for (k, &eps) in scales.iter().enumerate() {
            for ox in GRID_OFFSETS {
                for oy in GRID_OFFSETS {
                    cells.clear();
                    for p in &rotated {
                        cells.insert((
                            ((p.x - lo_x) / eps + ox).floor() as i64,
                            ((p.y - lo_y) / eps + oy).floor() as i64,
                        ));
                    }
                    ys[k] += (cells.len() as f64).ln();
                }
            }
        }
    }
    let placements = (GRID_ORIENTATIONS * GRID_OFFSETS.len() * GRID_OFFSETS.len()) as f64;
    for y in &mut ys {
        *y /= placements;
    }
    let xs: Vec<f64> = scales.iter().map(|&eps| (1.0 / eps).ln()).collect();
    let (slope, intercept, r_squared) = linear_fit(&xs, &ys);
    Ok(DimensionEstimate {
        slope,
        intercept,
        r_squared,
        scales,
    })
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = syy - slope * sxy;
    let r2 = if syy <= 1e-30 {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    (slope, intercept, r2)
}

/// Covering sum at scale `delta` from the square grid of mesh delta/sqrt(2)
/// (every cell has diameter <= delta): each occupied cell contributes
/// mesh^s. This is one particular grid cover, not the infimum over covers,
/// so for s = 0 it is exactly the occupied cell count.
pub fn hausdorff_premeasure(cloud: &PointCloud, s: f64, delta: f64) -> f64 {
    assert!((0.0..=2.0).contains(&s), "exponent must lie in [0, 2]");
    assert!(delta > 0.0, "scale must be positive");
    let Some((lo, _)) = cloud.bounding_box() else {
        return 0.0;
    };
    let h = delta / SQRT_2;
    let mut cells: HashSet<(i64, i64)> = HashSet::new();
    for &p in cloud.points() {
        cells.insert((
            ((p.x - lo.x) / h).floor() as i64,
            ((p.y - lo.y) / h).floor() as i64,
        ));
    }
    cells.len() as f64 * h.powf(s)
}

fn validate_radii(radii: &[f64], min_len: usize) -> Result<(), FractalError> {
    if radii.len() < min_len {
        return Err(FractalError::OutOfRange(format!(
            "need at least {min_len} radii, got {}",
            radii.len()
        )));
    }
    if radii.iter().any(|&r| r.is_nan() || r <= 0.0) {
        return Err(FractalError::OutOfRange("radii must be positive".into()));
    }
    if radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(FractalError::OutOfRange(
            "radii must be strictly decreasing".into(),
        ));
    }
    Ok(())
}

fn validate_exponent(s: f64) -> Result<(), FractalError> {
    if !(0.0..=2.0).contains(&s) {
        return Err(FractalError::OutOfRange(format!(
            "exponent {s} outside [0, 2]"
        )));
    }
    Ok(())
}

fn empirical_mass_scale(cloud: &PointCloud, s: f64, radii: &[f64], mass_scale: Option<f64>) -> f64 {
    mass_scale.unwrap_or_else(|| hausdorff_premeasure(cloud, s, *radii.last().unwrap()))
}

/// Lower and upper density of the cloud at `p`: min and max over the radii
/// of mass(B(p, r)) / (2r)^s under the normalized counting measure scaled by
/// `mass_scale` (defaulting to the covering sum at the finest radius).
pub fn density(
    cloud: &PointCloud,
    p: Vec2,
    s: f64,
    radii: &[f64],
    mass_scale: Option<f64>,
) -> Result<(f64, f64), FractalError> {
    validate_exponent(s)?;
    validate_radii(radii, 4)?;
    if cloud.is_empty() {
        return Err(FractalError::TooFewPoints { needed: 1, got: 0 });
    }
    let scale = empirical_mass_scale(cloud, s, radii, mass_scale);
    let n = cloud.len() as f64;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &r in radii {
        let count = cloud.points().iter().filter(|q| q.distance(p) <= r).count();
        let v = (count as f64 / n) * scale / (2.0 * r).powf(s);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((lo, hi))
}

/// Max over radii of sector mass / (2r)^s for the single circular sector of
/// half-angle `eta` around direction `gamma`.
pub fn angular_density(
    cloud: &PointCloud,
    p: Vec2,
    s: f64,
    gamma: f64,
    eta: f64,
    radii: &[f64],
    mass_scale: Option<f64>,
) -> Result<f64, FractalError> {
    validate_exponent(s)?;
    validate_radii(radii, 1)?;
    if !(eta > 0.0 && eta <= PI / 2.0) {
        return Err(FractalError::OutOfRange(format!(
            "sector half-angle {eta} outside (0, pi/2]"
        )));
    }
    if cloud.is_empty() {
        return Err(FractalError::TooFewPoints { needed: 1, got: 0 });
    }
    let scale = empirical_mass_scale(cloud, s, radii, mass_scale);
    let n = cloud.len() as f64;
    let mut best = f64::NEG_INFINITY;
    for &r in radii {
        let count = cloud
            .points()
            .iter()
            .filter(|q| {
                let v = **q - p;
                let d = v.norm();
                // the vertex belongs to every sector
                d <= r && (d < 1e-12 || wrap_signed(v.angle() - gamma, TAU).abs() <= eta)
            })
            .count();
        best = best.max((count as f64 / n) * scale / (2.0 * r).powf(s));
    }
    Ok(best)
}

/// Angle of q - p folded to a line direction in [0, pi).
fn line_angle(v: Vec2) -> f64 {
    wrap(v.angle(), PI)
}

/// Angular distance between two line directions, in [0, pi/2].
fn line_dist(a: f64, b: f64) -> f64 {
    wrap_signed(a - b, PI).abs()
}

/// Fraction of ball mass outside the double sector of half-angle `eta`
/// around the line through `p` in direction `gamma`, at radius `r`.
/// `local` holds (line angle, distance) pairs for points near `p`; an empty
/// ball counts as fraction 1 (no tangent evidence).
fn complement_fraction(local: &[(f64, f64)], gamma: f64, eta: f64, r: f64) -> f64 {
    let mut ball = 0usize;
    let mut outside = 0usize;
    for &(ang, d) in local {
        if d > r {
            continue;
        }
        ball += 1;
        if d >= 1e-12 && line_dist(ang, gamma) > eta {
            outside += 1;
        }
    }
    if ball == 0 {
        1.0
    } else {
        outside as f64 / ball as f64
    }
}

/// Decide whether the cloud has a tangent line at `p`: pick the direction
/// that best explains the points near `p` (360-point grid over [0, pi), then
/// golden-section refinement to 1e-3 rad of the spread objective
/// sum sin^2(angle - gamma)), and accept when, for every half-angle in the
/// grid, the mass fraction outside the double sector at the two finest radii
/// stays below the threshold.
pub fn tangent_test(
    cloud: &PointCloud,
    p: Vec2,
    s: f64,
    params: &TangentParams,
) -> Result<TangentReport, FractalError> {
    validate_exponent(s)?;
    validate_radii(&params.radii, 4)?;
    if params.eta_grid.is_empty()
        || params
            .eta_grid
            .iter()
            .any(|&eta| !(eta > 0.0 && eta <= PI / 2.0))
    {
        return Err(FractalError::OutOfRange(
            "sector half-angles must lie in (0, pi/2]".into(),
        ));
    }
    let eta_min = params
        .eta_grid
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let r_max = params.radii[0];
    let local: Vec<(f64, f64)> = cloud
        .points()
        .iter()
        .filter_map(|&q| {
            let v = q - p;
            let d = v.norm();
            (d <= r_max).then(|| (if d < 1e-12 { 0.0 } else { line_angle(v) }, d))
        })
        .collect();

    let (_, upper) = density(cloud, p, s, &params.radii, None)?;
    if upper <= 0.0 || local.iter().all(|&(_, d)| d < 1e-12) {
        return Ok(TangentReport {
            has_tangent: false,
            gamma: None,
            eta: eta_min,
            curve: params.radii.iter().map(|&r| (r, 1.0)).collect(),
        });
    }

    // fit scale: the smallest radius that still sees enough directions
    let fit_r = params
        .radii
        .iter()
        .rev()
        .copied()
        .find(|&r| local.iter().filter(|&&(_, d)| d >= 1e-12 && d <= r).count() >= 16)
        .unwrap_or(r_max);
    let spread = |gamma: f64| -> f64 {
        local
            .iter()
            .filter(|&&(_, d)| d >= 1e-12 && d <= fit_r)
            .map(|&(ang, _)| {
                let dev = (ang - gamma).sin();
                dev * dev
            })
            .sum()
    };
    let step = PI / 360.0;
    let mut best_k = 0;
    let mut best_v = f64::INFINITY;
    for k in 0..360 {
        let v = spread(k as f64 * step);
        if v < best_v {
            best_v = v;
            best_k = k;
        }
    }
    let center = best_k as f64 * step;
    let gamma = wrap(golden_min(&spread, center - step, center + step, 1e-3), PI);

    let fractions: Vec<Vec<f64>> = params
        .eta_grid
        .iter()
        .map(|&eta| {
            params
                .radii
                .iter()
                .map(|&r| complement_fraction(&local, gamma, eta, r))
                .collect()
        })
        .collect();
    let finest = params.radii.len() - 2..params.radii.len();
    let has_tangent = fractions
        .iter()
        .all(|per_eta| finest.clone().all(|i| per_eta[i] < params.threshold));
    let min_eta_idx = params
        .eta_grid
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    let curve = params
        .radii
        .iter()
        .zip(&fractions[min_eta_idx])
        .map(|(&r, &f)| (r, f))
        .collect();
    Ok(TangentReport {
        has_tangent,
        gamma: Some(gamma),
        eta: eta_min,
        curve,
    })
}

fn golden_min(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

fn dist_to_ray(q: Vec2, p: Vec2, dir: Vec2) -> f64 {
    let v = q - p;
    let along = v.dot(dir).max(0.0);
    (v - dir * along).norm()
}

/// Extract a limiting direction at `p` by nested angular windows: level k
/// looks at points within radius 1/k and keeps the window of half-width
/// 1/2^k (nested in the previous window's closure) containing the most of
/// them; ties go to the smallest window center. Returns the final direction
/// and one chosen point index per level.
pub fn asymptotic_ray(
    cloud: &PointCloud,
    p: Vec2,
    n_levels: usize,
) -> Result<(f64, Vec<usize>), FractalError> {
    assert!((1..=48).contains(&n_levels), "level count out of range");
    let pts: Vec<(usize, f64, f64)> = cloud
        .points()
        .iter()
        .enumerate()
        .filter_map(|(i, &q)| {
            let v = q - p;
            let d = v.norm();
            (d >= 1e-12).then(|| (i, d, wrap(v.angle(), TAU)))
        })
        .collect();
    for n in 1..=n_levels {
        let r = 1.0 / n as f64;
        if pts.iter().filter(|&&(_, d, _)| d <= r).count() < n_levels {
            return Err(FractalError::NotAccumulationPoint);
        }
    }

    let mut center = 0.0f64;
    let mut picks = Vec::with_capacity(n_levels);
    for k in 1..=n_levels {
        let r = 1.0 / k as f64;
        let w = 0.5f64.powi(k as i32);
        let candidates: Vec<f64> = if k == 1 {
            (0..360).map(|i| i as f64 * TAU / 360.0).collect()
        } else {
            // |new center - old center| <= w keeps the window nested
            (0..=64)
                .map(|i| wrap(center - w + 2.0 * w * i as f64 / 64.0, TAU))
                .collect()
        };
        let mut best: Option<(usize, f64)> = None;
        for &c in &candidates {
            let count = pts
                .iter()
                .filter(|&&(_, d, a)| d <= r && wrap_signed(a - c, TAU).abs() <= w)
                .count();
            let better = match best {
                None => true,
                Some((bc, bcen)) => count > bc || (count == bc && c < bcen),
            };
            if better {
                best = Some((count, c));
            }
        }
        let (count, c) = best.expect("candidate list is nonempty");
        if count == 0 {
            return Err(FractalError::NotAccumulationPoint);
        }
        center = c;
        let pick = pts
            .iter()
            .filter(|&&(_, d, a)| d <= r && wrap_signed(a - center, TAU).abs() <= w)
            .min_by(|x, y| {
                wrap_signed(x.2 - center, TAU)
                    .abs()
                    .total_cmp(&wrap_signed(y.2 - center, TAU).abs())
                    .then(x.0.cmp(&y.0))
            })
            .expect("window has points");
        picks.push(pick.0);
    }
    Ok((wrap(center, TAU), picks))
}

/// Directional derivative of a scalar function along a point sequence
/// converging to `p`: linear-in-distance extrapolation of the difference
/// quotients over the tail of the sequence.
pub fn derivative_along(
    points: &[Vec2],
    p: Vec2,
    f_points: &[f64],
    f_p: f64,
) -> Result<f64, FractalError> {
    assert_eq!(points.len(), f_points.len(), "value per point required");
    let tail = asymptotic_tail(points, p)?;
    let ds: Vec<f64> = points[tail.clone()].iter().map(|q| q.distance(p)).collect();
    let qs: Vec<f64> = f_points[tail]
        .iter()
        .zip(&ds)
        .map(|(&f, &d)| (f - f_p) / d)
        .collect();
    let (_, intercept, _) = linear_fit(&ds, &qs);
    Ok(intercept)
}

/// Componentwise [`derivative_along`] for a planar map.
pub fn derivative_along_map(
    points: &[Vec2],
    p: Vec2,
    f_points: &[Vec2],
    f_p: Vec2,
) -> Result<Vec2, FractalError> {
    assert_eq!(points.len(), f_points.len(), "value per point required");
    let xs: Vec<f64> = f_points.iter().map(|v| v.x).collect();
    let ys: Vec<f64> = f_points.iter().map(|v| v.y).collect();
    Ok(Vec2::new(
        derivative_along(points, p, &xs, f_p.x)?,
        derivative_along(points, p, &ys, f_p.y)?,
    ))
}

/// Tail window of a sequence checked to converge to `p` along a ray:
/// unit secants must agree with their mean direction to relative
/// transverse error 1e-2.
fn asymptotic_tail(points: &[Vec2], p: Vec2) -> Result<std::ops::Range<usize>, FractalError> {
    let n = points.len();
    if n < 8 {
        return Err(FractalError::TooFewPoints { needed: 8, got: n });
    }
    let start = n - (n / 4).max(8);
    let tail = start..n;
    let mut mean = Vec2::new(0.0, 0.0);
    for q in &points[tail.clone()] {
        let d = q.distance(p);
        if d < 1e-300 {
            return Err(FractalError::NotAsymptotic);
        }
        mean = mean + (*q - p) / d;
    }
    if mean.norm() < 1e-9 {
        return Err(FractalError::NotAsymptotic);
    }
    let dir = mean.normalized();
    for q in &points[tail.clone()] {
        let d = q.distance(p);
        if dist_to_ray(*q, p, dir) / d > 1e-2 {
            return Err(FractalError::NotAsymptotic);
        }
    }
    Ok(tail)
}

/// `n` evenly spaced points on the unit segment [0,1] x {0}.
#[must_use]
pub fn segment_fixture(n: usize) -> PointCloud {
    assert!(n >= 2);
    let pts = (0..n)
        .map(|i| Vec2::new(i as f64 / (n - 1) as f64, 0.0))
        .collect();
    PointCloud::new(pts, "unit segment")
}

/// The 4^level corner points of the product of two middle-third Cantor
/// sets: left endpoints of the level-k construction intervals in each axis.
#[must_use]
pub fn cantor_dust_fixture(level: u32) -> PointCloud {
    assert!((1..=10).contains(&level));
    let mut xs = vec![0.0f64];
    let mut step = 1.0;
    for _ in 0..level {
        step /= 3.0;
        xs = xs.iter().flat_map(|&x| [x, x + 2.0 * step]).collect();
    }
    let pts = xs
        .iter()
        .flat_map(|&x| xs.iter().map(move |&y| Vec2::new(x, y)))
        .collect();
    PointCloud::new(pts, "cantor dust")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const DUST_DIM: f64 = 1.261859507142915; // 2 ln 2 / ln 3

    #[test]
    fn cloud_dedup_and_accessors() {
        let c = PointCloud::new(
            vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(0.0, 0.0),
                Vec2::new(1e-13, 0.0),
                Vec2::new(1.0, 2.0),
                Vec2::new(f64::NAN, 0.0),
            ],
            "t",
        );
        assert_eq!(c.len(), 2);
        assert_eq!(c.note(), "t");
        assert!((c.diameter() - 5f64.sqrt()).abs() < 1e-12);
        let (lo, hi) = c.bounding_box().unwrap();
        assert_eq!((lo.x, lo.y, hi.x, hi.y), (0.0, 0.0, 1.0, 2.0));
        assert!(PointCloud::new(vec![], "empty").is_empty());
    }

    #[test]
    fn segment_dimension_is_one() {
        let est = box_dimension(&segment_fixture(10_000), 6).unwrap();
        assert!((est.slope - 1.0).abs() < 0.05, "slope {}", est.slope);
        assert!(est.r_squared > 0.99);
        assert!(est.scales.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(est.scales.len(), 6);
    }

    #[test]
    fn dust_dimension_matches_self_similarity() {
        let est = box_dimension(&cantor_dust_fixture(7), 6).unwrap();
        assert!(
            (est.slope - DUST_DIM).abs() < 0.1,
            "slope {} vs {DUST_DIM}",
            est.slope
        );
    }

    #[test]
    fn dimension_needs_points() {
        let single = PointCloud::new(vec![Vec2::new(0.5, 0.5); 50], "dup");
        assert!(matches!(
            box_dimension(&single, 4),
            Err(FractalError::TooFewPoints { got: 1, .. })
        ));
    }

    #[test]
    fn dimension_is_rigid_motion_invariant() {
        let dust = cantor_dust_fixture(7);
        let base = box_dimension(&dust, 6).unwrap().slope;
        let (s, c) = 0.7f64.sin_cos();
        let moved = PointCloud::new(
            dust.points()
                .iter()
                .map(|p| Vec2::new(c * p.x - s * p.y + 3.1, s * p.x + c * p.y - 1.2))
                .collect(),
            "moved dust",
        );
        let turned = box_dimension(&moved, 6).unwrap().slope;
        assert!((turned - base).abs() <= 0.02, "{base} vs {turned}");
    }

    #[test]
    fn premeasure_of_segment() {
        let seg = segment_fixture(10_000);
        let v1 = hausdorff_premeasure(&seg, 1.0, 0.01);
        assert!((1.0..=1.5).contains(&v1), "{v1}");
        let v0 = hausdorff_premeasure(&seg, 0.0, 0.37);
        assert!(v0 >= 1.0 && v0.fract() == 0.0, "{v0}");
        let v2 = hausdorff_premeasure(&seg, 2.0, 0.01);
        assert!(v2 <= 0.02, "{v2}");
    }

    #[test]
    fn density_on_the_segment() {
        let seg = segment_fixture(10_000);
        let radii = [0.2, 0.1, 0.05, 0.025];
        let (lo, hi) = density(&seg, Vec2::new(0.5, 0.0), 1.0, &radii, None).unwrap();
        assert!(
            (lo - 1.0).abs() < 0.2 && (hi - 1.0).abs() < 0.2,
            "{lo} {hi}"
        );
        let (lo, hi) = density(&seg, Vec2::new(0.0, 0.0), 1.0, &radii, None).unwrap();
        assert!(
            (lo - 0.5).abs() < 0.2 && (hi - 0.5).abs() < 0.2,
            "{lo} {hi}"
        );
        let (lo, hi) = density(&seg, Vec2::new(10.0, 10.0), 1.0, &radii, None).unwrap();
        assert_eq!((lo, hi), (0.0, 0.0));
    }

    #[test]
    fn density_validates_input() {
        let seg = segment_fixture(100);
        let bad = [0.1, 0.2, 0.3, 0.4];
        assert!(matches!(
            density(&seg, Vec2::new(0.5, 0.0), 1.0, &bad, None),
            Err(FractalError::OutOfRange(_))
        ));
        assert!(density(
            &seg,
            Vec2::new(0.5, 0.0),
            2.5,
            &[0.2, 0.1, 0.05, 0.02],
            None
        )
        .is_err());
        assert!(density(&seg, Vec2::new(0.5, 0.0), 1.0, &[0.2, 0.1], None).is_err());
    }

    #[test]
    fn angular_density_of_segment_directions() {
        let seg = segment_fixture(10_000);
        let radii = [0.2, 0.1, 0.05, 0.025];
        let p = Vec2::new(0.5, 0.0);
        let along = angular_density(&seg, p, 1.0, 0.0, 0.1, &radii, None).unwrap();
        assert!((along - 0.5).abs() < 0.2, "{along}");
        let across = angular_density(&seg, p, 1.0, PI / 2.0, 0.1, &radii, None).unwrap();
        assert!(across < 1e-9, "{across}");
        let dust = cantor_dust_fixture(6);
        let q = dust.points()[123];
        let half = angular_density(&dust, q, DUST_DIM, 1.0, PI / 2.0, &radii, None).unwrap();
        assert!(half > 0.0);
    }

    #[test]
    fn sector_mass_bounded_by_ball_mass_and_monotone_in_eta() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cloud = PointCloud::new(
            (0..2000)
                .map(|_| Vec2::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)))
                .collect(),
            "uniform square",
        );
        let radii = [0.4, 0.2, 0.1, 0.05];
        for _ in 0..25 {
            let p = Vec2::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
            let gamma = rng.gen_range(0.0..TAU);
            let s = rng.gen_range(0.0..2.0);
            let (_, upper) = density(&cloud, p, s, &radii, None).unwrap();
            let mut last = 0.0;
            for eta in [0.05, 0.1, 0.3, 0.8, PI / 2.0] {
                let a = angular_density(&cloud, p, s, gamma, eta, &radii, None).unwrap();
                assert!(a <= upper + 1e-12, "sector {a} above ball {upper}");
                assert!(a + 1e-12 >= last, "not monotone in eta");
                last = a;
            }
        }
    }

    #[test]
    fn tangent_on_a_line_cloud() {
        let seg = segment_fixture(5_000);
        let params = TangentParams::for_cloud(&seg);
        for i in 1..10 {
            let p = Vec2::new(i as f64 / 10.0, 0.0);
            let rep = tangent_test(&seg, p, 1.0, &params).unwrap();
            assert!(rep.has_tangent, "interior point {i}");
            let g = rep.gamma.unwrap();
            assert!(line_dist(g, 0.0) < 1e-2, "gamma {g}");
            assert_eq!(rep.curve.len(), params.radii.len());
            assert!(rep.curve.iter().all(|&(r, _)| r > 0.0));
        }
    }

    #[test]
    fn tangent_direction_tracks_a_rotated_line() {
        let (s, c) = 0.7f64.sin_cos();
        let line = PointCloud::new(
            (0..5000)
                .map(|i| {
                    let u = i as f64 / 4999.0 - 0.5;
                    Vec2::new(c * u, s * u)
                })
                .collect(),
            "rotated line",
        );
        let params = TangentParams::for_cloud(&line);
        let rep = tangent_test(&line, Vec2::new(0.0, 0.0), 1.0, &params).unwrap();
        assert!(rep.has_tangent);
        assert!(line_dist(rep.gamma.unwrap(), 0.7) < 1e-2);
    }

    #[test]
    fn no_tangent_on_cantor_dust() {
        let dust = cantor_dust_fixture(7);
        let params = TangentParams::for_cloud(&dust);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let p = dust.points()[rng.gen_range(0..dust.len())];
            let rep = tangent_test(&dust, p, DUST_DIM, &params).unwrap();
            assert!(!rep.has_tangent, "dust point {p:?}");
        }
    }

    #[test]
    fn tangent_test_far_from_the_cloud() {
        let seg = segment_fixture(500);
        let params = TangentParams::for_cloud(&seg);
        let rep = tangent_test(&seg, Vec2::new(40.0, 40.0), 1.0, &params).unwrap();
        assert!(!rep.has_tangent);
        assert!(rep.gamma.is_none());
    }

    #[test]
    fn ray_from_points_on_one_ray() {
        let p = Vec2::new(0.3, -0.2);
        let dir = Vec2::from_angle(0.3);
        let cloud = PointCloud::new(
            (1..=1000).map(|k| p + dir * (1.0 / k as f64)).collect(),
            "single ray",
        );
        let (gamma, picks) = asymptotic_ray(&cloud, p, 10).unwrap();
        assert!((gamma - 0.3).abs() < 1e-3, "{gamma}");
        assert_eq!(picks.len(), 10);
        check_level_bound(&cloud, p, gamma, &picks);
    }

    #[test]
    fn ray_tie_breaks_toward_smaller_center() {
        let p = Vec2::new(0.0, 0.0);
        let mut pts = Vec::new();
        for k in 1..=500 {
            pts.push(p + Vec2::new(1.0 / k as f64, 0.0));
            pts.push(p + Vec2::new(0.0, 1.0 / k as f64));
        }
        let (gamma, _) = asymptotic_ray(&PointCloud::new(pts, "two rays"), p, 8).unwrap();
        assert!(gamma.abs() < 1e-6, "{gamma}");
    }

    #[test]
    fn ray_follows_a_slow_spiral() {
        let p = Vec2::new(1.0, 1.0);
        let cloud = PointCloud::new(
            (1..=40_000)
                .map(|k| {
                    let kf = k as f64;
                    p + Vec2::from_angle(1.0 / kf.sqrt()) * (1.0 / kf)
                })
                .collect(),
            "spiral",
        );
        let (gamma, picks) = asymptotic_ray(&cloud, p, 10).unwrap();
        let folded = wrap_signed(gamma, TAU).abs();
        assert!(folded < 1e-2, "{gamma}");
        check_level_bound(&cloud, p, gamma, &picks);
    }

    fn check_level_bound(cloud: &PointCloud, p: Vec2, gamma: f64, picks: &[usize]) {
        let dir = Vec2::from_angle(gamma);
        for (k, &i) in picks.iter().enumerate() {
            let q = cloud.points()[i];
            let d = q.distance(p);
            let bound = (3.0 * 0.5f64.powi(k as i32 + 1)).min(PI / 2.0).sin() + TAU / 360.0;
            assert!(
                dist_to_ray(q, p, dir) / d <= bound,
                "level {} ratio {} bound {bound}",
                k + 1,
                dist_to_ray(q, p, dir) / d
            );
        }
    }

    #[test]
    fn ray_needs_an_accumulation_point() {
        let cloud = PointCloud::new(
            (0..50).map(|i| Vec2::new(i as f64, 0.0)).collect(),
            "sparse",
        );
        assert!(matches!(
            asymptotic_ray(&cloud, Vec2::new(0.0, 0.0), 6),
            Err(FractalError::NotAccumulationPoint)
        ));
    }

    #[test]
    fn derivative_of_the_identity_map() {
        let p = Vec2::new(0.2, 0.8);
        let v = Vec2::from_angle(0.4);
        let w = Vec2::new(-v.y, v.x);
        let pts: Vec<Vec2> = (1..=2000)
            .map(|k| {
                let kf = k as f64;
                p + v * (1.0 / kf) + w * (1.0 / (kf * kf))
            })
            .collect();
        let d = derivative_along_map(&pts, p, &pts, p).unwrap();
        assert!(
            (d.x - v.x).abs() < 1e-6 && (d.y - v.y).abs() < 1e-6,
            "{d:?}"
        );
    }

    #[test]
    fn derivative_of_a_quadratic_map() {
        let p = Vec2::new(1.0, 0.0);
        let pts: Vec<Vec2> = (1..=2000)
            .map(|k| Vec2::new(1.0 + 1.0 / k as f64, 0.0))
            .collect();
        let f = |q: Vec2| Vec2::new(q.x * q.x, q.x * q.y);
        let vals: Vec<Vec2> = pts.iter().map(|&q| f(q)).collect();
        let d = derivative_along_map(&pts, p, &vals, f(p)).unwrap();
        assert!((d.x - 2.0).abs() < 1e-3 && d.y.abs() < 1e-3, "{d:?}");
    }

    #[test]
    fn derivative_orthogonal_to_the_gradient() {
        let p = Vec2::new(0.0, 0.0);
        let pts: Vec<Vec2> = (1..=2000)
            .map(|k| {
                let kf = k as f64;
                Vec2::new(1.0 / (kf * kf), 1.0 / kf)
            })
            .collect();
        let f = |q: Vec2| q.x.sin() + q.y * q.y;
        let vals: Vec<f64> = pts.iter().map(|&q| f(q)).collect();
        let d = derivative_along(&pts, p, &vals, f(p)).unwrap();
        assert!(d.abs() < 1e-3, "{d}");
    }

    #[test]
    fn derivative_rejects_non_asymptotic_sequences() {
        let p = Vec2::new(0.0, 0.0);
        let pts: Vec<Vec2> = (1..=200)
            .map(|k| {
                let d = 1.0 / k as f64;
                if k % 2 == 0 {
                    Vec2::new(d, 0.0)
                } else {
                    Vec2::new(0.0, d)
                }
            })
            .collect();
        let vals = vec![0.0; pts.len()];
        assert!(matches!(
            derivative_along(&pts, p, &vals, 0.0),
            Err(FractalError::NotAsymptotic)
        ));
    }

    #[test]
    fn derivative_matches_random_polynomial_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for trial in 0..10 {
            // random cubic map F and its hand-differentiated Jacobian
            let coef: Vec<[f64; 10]> = (0..2)
                .map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0)))
                .collect();
            let eval = |c: &[f64; 10], x: f64, y: f64| {
                c[0] + c[1] * x
                    + c[2] * y
                    + c[3] * x * x
                    + c[4] * x * y
                    + c[5] * y * y
                    + c[6] * x * x * x
                    + c[7] * x * x * y
                    + c[8] * x * y * y
                    + c[9] * y * y * y
            };
            let grad = |c: &[f64; 10], x: f64, y: f64| {
                Vec2::new(
                    c[1] + 2.0 * c[3] * x
                        + c[4] * y
                        + 3.0 * c[6] * x * x
                        + 2.0 * c[7] * x * y
                        + c[8] * y * y,
                    c[2] + c[4] * x
                        + 2.0 * c[5] * y
                        + c[7] * x * x
                        + 2.0 * c[8] * x * y
                        + 3.0 * c[9] * y * y,
                )
            };
            let p = Vec2::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
            let v = Vec2::from_angle(rng.gen_range(0.0..TAU));
            let w = Vec2::new(-v.y, v.x);
            let pts: Vec<Vec2> = (1..=2000)
                .map(|k| {
                    let kf = k as f64;
                    p + v * (1.0 / kf) + w * (0.3 / (kf * kf))
                })
                .collect();
            let vals: Vec<Vec2> = pts
                .iter()
                .map(|&q| Vec2::new(eval(&coef[0], q.x, q.y), eval(&coef[1], q.x, q.y)))
                .collect();
            let fp = Vec2::new(eval(&coef[0], p.x, p.y), eval(&coef[1], p.x, p.y));
            let got = derivative_along_map(&pts, p, &vals, fp).unwrap();
            let want = Vec2::new(
                grad(&coef[0], p.x, p.y).dot(v),
                grad(&coef[1], p.x, p.y).dot(v),
            );
            assert!(
                (got.x - want.x).abs() < 1e-3 && (got.y - want.y).abs() < 1e-3,
                "trial {trial}: {got:?} vs {want:?}"
            );
        }
    }
}
