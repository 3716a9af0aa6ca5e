//! One JSON file describes an experiment; the digest of that description is
//! stamped into every output so results can be traced back to their inputs.

use anyhow::{Context, Result};
use blab_core::ShapeDescriptor;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary: Option<ShapeDescriptor>,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map: Option<MapParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orbits: Option<OrbitsParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p3: Option<P3Params>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fractal: Option<FractalParams>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapParams {
    pub start_t: f64,
    pub start_theta: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitsParams {
    pub n_seeds: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct P3Params {
    pub grid_t: usize,
    pub grid_theta: usize,
    pub tol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FractalParams {
    pub input_cloud: PathBuf,
    #[serde(default = "default_n_scales")]
    pub n_scales: usize,
    #[serde(default = "default_exponent")]
    pub s: f64,
    /// Base points for the per-point density, sector and tangent reports.
    #[serde(default)]
    pub points: Vec<[f64; 2]>,
    /// Radii for the density reports; dyadic from an eighth of the cloud
    /// diameter when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tangent_threshold: Option<f64>,
}

fn default_n_scales() -> usize {
    6
}

fn default_exponent() -> f64 {
    1.0
}

fn default_eta() -> f64 {
    0.1
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Content digest of the experiment. The output path is excluded: where
    /// a result lands does not change what it is.
    pub fn digest(&self) -> String {
        let mut masked = self.clone();
        masked.output_path = None;
        digest_of(&masked)
    }

    pub fn boundary(&self) -> Result<&ShapeDescriptor> {
        self.boundary
            .as_ref()
            .context("config is missing the `boundary` section")
    }
}

pub fn digest_of<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config types serialize");
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    format!("{:x}", hasher.finalize())
}
