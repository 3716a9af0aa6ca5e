//! The four experiment drivers. Each one loads what it needs from the
//! config, runs the core routines, and writes digest-stamped artifacts.

use crate::config::{digest_of, ExperimentConfig};
use crate::output::{read_cloud_csv, write_cloud_csv, write_json, write_trace_csv};
use anyhow::{anyhow, Context, Result};
use blab_core::{
    angular_density, box_dimension, cantor_dust_fixture, density, dt3_defect, fermat_defect,
    find_period3, iterate, sample_p3, segment_fixture, tangent_test, wojtkowski_residual,
    BoundaryCurve, Classification, DimensionEstimate, PhasePoint, PointCloud, TangentParams,
    TangentReport, Vec2,
};
use serde::Serialize;
use std::path::{Path, PathBuf};

/// Densities divide sector and ball mass by (2r)^s while the tangent
/// criterion works with fractions of ball mass (the r^s convention); the two
/// conventions differ by the factor 2^s.
const NORMALIZATION_NOTE: &str =
    "ball and sector densities are normalized by (2r)^s; tangent fractions by ball mass (r^s convention); the conventions differ by 2^s";

fn build_curve(cfg: &ExperimentConfig) -> Result<BoundaryCurve> {
    let desc = cfg.boundary()?.clone();
    BoundaryCurve::build(desc).map_err(|e| anyhow!("invalid boundary: {e}"))
}

pub fn cmd_map(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let params = cfg
        .map
        .as_ref()
        .context("config is missing the `map` section")?;
    let curve = build_curve(cfg)?;
    let start = PhasePoint::new(params.start_t, params.start_theta, curve.total_length())
        .map_err(|e| anyhow!("invalid start point: {e}"))?;
    let mut rows = vec![(0, start.t(), start.theta())];
    if params.steps > 0 {
        let trace = iterate(&curve, start, params.steps).map_err(anyhow::Error::new)?;
        rows.extend(
            trace
                .iter()
                .enumerate()
                .map(|(i, p)| (i + 1, p.t(), p.theta())),
        );
    }
    write_trace_csv(out, &cfg.digest(), &rows)
}

#[derive(Serialize)]
struct OrbitRow {
    t: [f64; 3],
    theta: [f64; 3],
    perimeter: f64,
    classification: Classification,
    dt3_defect: f64,
    wojtkowski_residual: f64,
    fermat_defect: f64,
}

#[derive(Serialize)]
struct OrbitReport<'a> {
    config_digest: String,
    boundary: &'a blab_core::ShapeDescriptor,
    rng_seed: u64,
    n_seeds: usize,
    count: usize,
    orbits: Vec<OrbitRow>,
}

pub fn cmd_orbits(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let params = cfg
        .orbits
        .as_ref()
        .context("config is missing the `orbits` section")?;
    let curve = build_curve(cfg)?;
    let l = curve.total_length();
    let orbits = find_period3(&curve, params.n_seeds, cfg.rng_seed);
    let mut rows = Vec::with_capacity(orbits.len());
    for orb in &orbits {
        let p = PhasePoint::new(orb.t[0], orb.theta[0], l).map_err(anyhow::Error::new)?;
        rows.push(OrbitRow {
            t: orb.t,
            theta: orb.theta,
            perimeter: orb.perimeter,
            classification: orb.classification,
            dt3_defect: dt3_defect(&curve, p).map_err(anyhow::Error::new)?,
            wojtkowski_residual: wojtkowski_residual(&curve, orb),
            fermat_defect: fermat_defect(&curve, orb).map_err(anyhow::Error::new)?,
        });
    }
    write_json(
        out,
        &OrbitReport {
            config_digest: cfg.digest(),
            boundary: cfg.boundary()?,
            rng_seed: cfg.rng_seed,
            n_seeds: params.n_seeds,
            count: rows.len(),
            orbits: rows,
        },
    )
}

#[derive(Serialize)]
struct TangentAtPoint {
    point: [f64; 2],
    #[serde(flatten)]
    report: TangentReport,
}

#[derive(Serialize)]
struct P3Analysis<'a> {
    config_digest: String,
    boundary: &'a blab_core::ShapeDescriptor,
    grid_t: usize,
    grid_theta: usize,
    tol: f64,
    n_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    dimension: Option<DimensionEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    warning: Option<String>,
    tangent_points: Vec<TangentAtPoint>,
}

/// Where the JSON side of a p3 run lands, next to the cloud CSV.
pub fn p3_analysis_path(out: &Path) -> PathBuf {
    out.with_extension("analysis.json")
}

pub fn cmd_p3(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let params = cfg
        .p3
        .as_ref()
        .context("config is missing the `p3` section")?;
    let curve = build_curve(cfg)?;
    let cloud = sample_p3(&curve, params.grid_t, params.grid_theta, params.tol);
    let digest = cfg.digest();
    write_cloud_csv(out, &digest, cloud.points())?;

    let mut analysis = P3Analysis {
        config_digest: digest,
        boundary: cfg.boundary()?,
        grid_t: params.grid_t,
        grid_theta: params.grid_theta,
        tol: params.tol,
        n_points: cloud.len(),
        dimension: None,
        warning: None,
        tangent_points: Vec::new(),
    };
    if cloud.len() >= 100 {
        analysis.dimension = Some(box_dimension(&cloud, 6).map_err(anyhow::Error::new)?);
        let tparams = TangentParams::for_cloud(&cloud);
        let stride = cloud.len().div_ceil(50);
        for p in cloud.points().iter().step_by(stride) {
            let report = tangent_test(&cloud, *p, 1.0, &tparams).map_err(anyhow::Error::new)?;
            analysis.tangent_points.push(TangentAtPoint {
                point: [p.x, p.y],
                report,
            });
        }
    } else {
        let w = format!(
            "only {} distinct points: the sampled set looks like isolated points, too few for a dimension estimate",
            cloud.len()
        );
        eprintln!("warning: {w}");
        analysis.warning = Some(w);
    }
    write_json(&p3_analysis_path(out), &analysis)
}

#[derive(Serialize)]
struct PointReport {
    point: [f64; 2],
    density_lower: f64,
    density_upper: f64,
    angular_density: f64,
    tangent: TangentReport,
}

#[derive(Serialize)]
struct FractalAnalysis {
    config_digest: String,
    input: String,
    n_points: usize,
    dimension: DimensionEstimate,
    points: Vec<PointReport>,
    normalization_note: &'static str,
}

pub fn cmd_fractal(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let params = cfg
        .fractal
        .as_ref()
        .context("config is missing the `fractal` section")?;
    let cloud = PointCloud::new(
        read_cloud_csv(&params.input_cloud)?,
        format!("csv: {}", params.input_cloud.display()),
    );
    let dimension = box_dimension(&cloud, params.n_scales).map_err(anyhow::Error::new)?;
    let radii: Vec<f64> = params.radii.clone().unwrap_or_else(|| {
        let d = cloud.diameter();
        (0..6u32).map(|k| d / (8u64 << k) as f64).collect()
    });
    let mut tparams = TangentParams::for_cloud(&cloud);
    if let Some(th) = params.tangent_threshold {
        tparams.threshold = th;
    }
    let mut points = Vec::with_capacity(params.points.len());
    for &[x, y] in &params.points {
        let p = Vec2::new(x, y);
        let (density_lower, density_upper) =
            density(&cloud, p, params.s, &radii, None).map_err(anyhow::Error::new)?;
        let sector = angular_density(&cloud, p, params.s, params.gamma, params.eta, &radii, None)
            .map_err(anyhow::Error::new)?;
        let tangent = tangent_test(&cloud, p, params.s, &tparams).map_err(anyhow::Error::new)?;
        points.push(PointReport {
            point: [x, y],
            density_lower,
            density_upper,
            angular_density: sector,
            tangent,
        });
    }
    write_json(
        out,
        &FractalAnalysis {
            config_digest: cfg.digest(),
            input: params.input_cloud.display().to_string(),
            n_points: cloud.len(),
            dimension,
            points,
            normalization_note: NORMALIZATION_NOTE,
        },
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum FixtureKind {
    /// 10 000 evenly spaced points on the unit segment.
    Segment,
    /// Level-7 product of two middle-thirds Cantor sets (4^7 points).
    Cantor,
}

#[derive(Serialize)]
struct FixtureSpec {
    fixture: &'static str,
}

pub fn make_fixture(kind: FixtureKind, out: &Path) -> Result<()> {
    let (cloud, name) = match kind {
        FixtureKind::Segment => (segment_fixture(10_000), "segment"),
        FixtureKind::Cantor => (cantor_dust_fixture(7), "cantor"),
    };
    write_cloud_csv(
        out,
        &digest_of(&FixtureSpec { fixture: name }),
        cloud.points(),
    )
}
