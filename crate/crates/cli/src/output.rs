//! Output rendering. Every float is written as `{:.16e}` (17 significant
//! digits) in both CSV and JSON so reruns compare byte for byte, and every
//! file starts with or embeds the config digest.

use anyhow::{bail, Context, Result};
use blab_core::Vec2;
use serde::Serialize;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFormatter);
    value
        .serialize(&mut ser)
        .context("serializing the report")?;
    buf.push(b'\n');
    std::fs::write(path, buf).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_cloud_csv(path: &Path, digest: &str, points: &[Vec2]) -> Result<()> {
    let mut text = String::with_capacity(64 * (points.len() + 2));
    let _ = writeln!(text, "# config_digest: {digest}");
    text.push_str("x,y\n");
    for p in points {
        let _ = writeln!(text, "{},{}", fmt_float(p.x), fmt_float(p.y));
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_cloud_csv(path: &Path) -> Result<Vec<Vec2>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading cloud {}", path.display()))?;
    let mut points = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line == "x,y" {
            continue;
        }
        let n = idx + 1;
        let Some((sx, sy)) = line.split_once(',') else {
            bail!(
                "{}: line {n}: expected two comma-separated columns",
                path.display()
            );
        };
        if sy.contains(',') {
            bail!(
                "{}: line {n}: expected two columns, got more",
                path.display()
            );
        }
        let x: f64 = sx
            .trim()
            .parse()
            .with_context(|| format!("{}: line {n}: bad number {sx:?}", path.display()))?;
        let y: f64 = sy
            .trim()
            .parse()
            .with_context(|| format!("{}: line {n}: bad number {sy:?}", path.display()))?;
        points.push(Vec2::new(x, y));
    }
    Ok(points)
}

pub fn write_trace_csv(path: &Path, digest: &str, rows: &[(usize, f64, f64)]) -> Result<()> {
    let mut text = String::with_capacity(64 * (rows.len() + 2));
    let _ = writeln!(text, "# config_digest: {digest}");
    text.push_str("step,t,theta\n");
    for &(step, t, theta) in rows {
        let _ = writeln!(text, "{step},{},{}", fmt_float(t), fmt_float(theta));
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
