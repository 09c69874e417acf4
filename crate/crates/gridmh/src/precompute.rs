//! The offline pre-computation stage: simulate `n` auxiliary draws at every
//! grid point (in parallel, one RNG stream per point), keep only the
//! sufficient statistics, and persist the whole bundle as a line-oriented
//! text file with a trailing checksum.

use std::fmt::Write as _;
use std::path::Path;

use crate::grid::Grid;
use crate::models::GrfModel;
use crate::rngstream;
use crate::{Error, Result};

/// Errors specific to the on-disk format.
#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("unknown format version: `{0}`")]
    UnknownVersion(String),
    #[error("file is truncated: expected {0}")]
    Truncated(&'static str),
    #[error("checksum mismatch: header says {expected}, payload hashes to {found}")]
    Checksum { expected: String, found: String },
    #[error("corrupt file: {0}")]
    Corrupt(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Immutable bundle of pre-computed sufficient statistics: the grid, the
/// model it was sampled from, and an n×d block of statistics per grid point.
#[derive(Debug, Clone)]
pub struct PrecompData {
    model: GrfModel,
    seed: u64,
    grid: Grid,
    n: usize,
    /// stats[m][k] is the statistics vector of draw k at grid point m.
    stats: Vec<Vec<Vec<f64>>>,
}

/// Simulate `n` draws at every grid point and store their statistics. Each
/// grid point uses its own RNG stream derived from `(seed, point index)`,
/// so the result is independent of scheduling and thread count.
pub fn run_precompute(
    model: &GrfModel,
    grid: Grid,
    n: usize,
    sweeps: usize,
    seed: u64,
) -> Result<PrecompData> {
    if n == 0 {
        return Err(Error::TooFewValues { need: 1, got: 0 });
    }
    if model.dims() != grid.dims() {
        return Err(Error::DimMismatch { expected: model.dims(), got: grid.dims() });
    }
    let jobs: Vec<(usize, Vec<f64>)> = grid
        .points()
        .iter()
        .enumerate()
        .map(|(m, p)| (m, p.theta.clone()))
        .collect();
    let blocks = crate::par_map(jobs, |(m, theta)| {
        // stream 0 is reserved for the caller's sequential RNG
        let mut rng = rngstream::stream(seed, m as u64 + 1);
        let mut block = Vec::with_capacity(n);
        for _ in 0..n {
            block.push(model.sample_stats(&theta, sweeps, &mut rng).map(|s| s.0)?);
        }
        Ok::<_, Error>(block)
    });
    let stats = blocks.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(PrecompData { model: model.clone(), seed, grid, n, stats })
}

impl PrecompData {
    /// Assemble a bundle from explicit parts, validating the block shapes.
    /// `run_precompute` is the normal entry point; this exists for callers
    /// that generate statistics through other means (tests, studies).
    pub fn from_parts(
        model: GrfModel,
        seed: u64,
        grid: Grid,
        stats: Vec<Vec<Vec<f64>>>,
    ) -> Result<PrecompData> {
        let d = model.dims();
        if grid.dims() != d {
            return Err(Error::DimMismatch { expected: d, got: grid.dims() });
        }
        if stats.len() != grid.len() {
            return Err(Error::DimMismatch { expected: grid.len(), got: stats.len() });
        }
        let n = stats.first().map(|b| b.len()).unwrap_or(0);
        if n == 0 {
            return Err(Error::TooFewValues { need: 1, got: 0 });
        }
        for block in &stats {
            if block.len() != n {
                return Err(Error::DimMismatch { expected: n, got: block.len() });
            }
            for row in block {
                if row.len() != d {
                    return Err(Error::DimMismatch { expected: d, got: row.len() });
                }
            }
        }
        Ok(PrecompData { model, seed, grid, n, stats })
    }

    pub fn model(&self) -> &GrfModel {
        &self.model
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Draws stored per grid point.
    pub fn n(&self) -> usize {
        self.n
    }

    /// The n×d statistics block of grid point `m`.
    pub fn stats(&self, m: usize) -> &[Vec<f64>] {
        &self.stats[m]
    }

    /// Index of the grid point nearest to `theta` in eigen-coordinates.
    pub fn nearest_grid_point(&self, theta: &[f64]) -> usize {
        self.grid.nearest_point(theta)
    }

    /// Real-valued eigen-coordinates of `theta` on the underlying grid.
    pub fn eigen_coords(&self, theta: &[f64]) -> Vec<f64> {
        self.grid.eigen_coords(theta)
    }

    /// Column means of the statistics at grid point `m`, the Monte Carlo
    /// estimate of E_{grid point}[s(X)].
    pub fn mean_stats(&self, m: usize) -> Vec<f64> {
        let d = self.grid.dims();
        let mut mean = vec![0.0; d];
        for row in &self.stats[m] {
            for (acc, v) in mean.iter_mut().zip(row) {
                *acc += v;
            }
        }
        for acc in mean.iter_mut() {
            *acc /= self.n as f64;
        }
        mean
    }

    /// Render to the version-1 text format.
    pub fn to_text(&self) -> String {
        let d = self.grid.dims();
        let mut out = String::new();
        out.push_str("gridmh-precomp v1\n");
        let _ = writeln!(out, "model {} {}", self.model.kind_name(), self.model.size_label());
        let _ = writeln!(out, "seed {}", self.seed);
        let _ = writeln!(out, "d {d}");
        let _ = writeln!(out, "eps {}", self.grid.step());
        let _ = writeln!(out, "M {}", self.grid.len());
        let _ = writeln!(out, "n {}", self.n);
        out.push_str(&join_reals(self.grid.mode()));
        out.push('\n');
        for row in self.grid.eigvecs() {
            out.push_str(&join_reals(row));
            out.push('\n');
        }
        out.push_str(&join_reals(self.grid.eigvals()));
        out.push('\n');
        for (m, p) in self.grid.points().iter().enumerate() {
            let zs: Vec<String> = p.z.iter().map(|z| z.to_string()).collect();
            let _ = writeln!(out, "point {m} {} {}", zs.join(" "), join_reals(&p.theta));
            for row in &self.stats[m] {
                out.push_str(&join_reals(row));
                out.push('\n');
            }
        }
        let checksum = fnv1a64(out.as_bytes());
        let _ = writeln!(out, "{checksum:016x}");
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(FileError::Io)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<PrecompData> {
        let text = std::fs::read_to_string(path).map_err(FileError::Io)?;
        Self::from_text(&text)
    }

    /// Parse the version-1 text format, verifying the trailing checksum.
    pub fn from_text(text: &str) -> Result<PrecompData> {
        // the checksum line covers every byte before it, newline included
        let body = text.strip_suffix('\n').unwrap_or(text);
        let split = body
            .rfind('\n')
            .ok_or(FileError::Truncated("checksum line"))?;
        let (payload, checksum_line) = (&text[..split + 1], &body[split + 1..]);
        let found = format!("{:016x}", fnv1a64(payload.as_bytes()));
        if !checksum_line.eq_ignore_ascii_case(&found) {
            return Err(FileError::Checksum {
                expected: checksum_line.to_string(),
                found,
            }
            .into());
        }

        let mut lines = payload.lines();
        let mut next = |what: &'static str| -> Result<&str, FileError> {
            lines.next().ok_or(FileError::Truncated(what))
        };

        let version = next("version header")?;
        if version != "gridmh-precomp v1" {
            return Err(FileError::UnknownVersion(version.to_string()).into());
        }
        let model_line = next("model header")?;
        let mut toks = model_line.split_whitespace();
        let model = match (toks.next(), toks.next(), toks.next()) {
            (Some("model"), Some(kind), Some(size)) => GrfModel::from_kind_size(kind, size)
                .map_err(|e| FileError::Corrupt(e.to_string()))?,
            _ => return Err(FileError::Corrupt(format!("bad model line `{model_line}`")).into()),
        };
        let seed: u64 = parse_kv(next("seed header")?, "seed")?;
        let d: usize = parse_kv(next("d header")?, "d")?;
        let eps: f64 = parse_kv(next("eps header")?, "eps")?;
        let m_count: usize = parse_kv(next("M header")?, "M")?;
        let n: usize = parse_kv(next("n header")?, "n")?;
        if d != model.dims() {
            return Err(FileError::Corrupt(format!(
                "d = {d} does not match model {}",
                model.kind_name()
            ))
            .into());
        }
        if m_count == 0 || n == 0 {
            return Err(FileError::Corrupt("M and n must be positive".into()).into());
        }

        let mode = parse_reals(next("mode line")?, d)?;
        let mut eigvecs = Vec::with_capacity(d);
        for _ in 0..d {
            eigvecs.push(parse_reals(next("eigenvector row")?, d)?);
        }
        let eigvals = parse_reals(next("eigenvalue line")?, d)?;

        let mut zs = Vec::with_capacity(m_count);
        let mut thetas = Vec::with_capacity(m_count);
        let mut stats = Vec::with_capacity(m_count);
        for m in 0..m_count {
            let line = next("point header")?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 2 + 2 * d || toks[0] != "point" {
                return Err(FileError::Corrupt(format!("bad point line `{line}`")).into());
            }
            let idx: usize = toks[1]
                .parse()
                .map_err(|_| FileError::Corrupt(format!("bad point index `{}`", toks[1])))?;
            if idx != m {
                return Err(FileError::Corrupt(format!(
                    "point index {idx} out of order (expected {m})"
                ))
                .into());
            }
            let z: Vec<i64> = toks[2..2 + d]
                .iter()
                .map(|t| {
                    t.parse()
                        .map_err(|_| FileError::Corrupt(format!("bad eigen coordinate `{t}`")))
                })
                .collect::<Result<_, _>>()?;
            let theta: Vec<f64> = toks[2 + d..]
                .iter()
                .map(|t| {
                    t.parse()
                        .map_err(|_| FileError::Corrupt(format!("bad coordinate `{t}`")))
                })
                .collect::<Result<_, _>>()?;
            zs.push(z);
            thetas.push(theta);
            let mut block = Vec::with_capacity(n);
            for _ in 0..n {
                block.push(parse_reals(next("statistics line")?, d)?);
            }
            stats.push(block);
        }
        if lines.next().is_some() {
            return Err(FileError::Corrupt("trailing data after last point block".into()).into());
        }

        let grid = Grid::from_integer_points(mode, eigvecs, eigvals, eps, zs)
            .map_err(|e| FileError::Corrupt(e.to_string()))?;
        if grid.len() != m_count {
            return Err(FileError::Corrupt("duplicate grid points in file".into()).into());
        }
        for (p, theta) in grid.points().iter().zip(&thetas) {
            let drift = p
                .theta
                .iter()
                .zip(theta)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            if drift > 1e-9 {
                return Err(FileError::Corrupt(format!(
                    "stored coordinates disagree with the grid map by {drift:e}"
                ))
                .into());
            }
        }
        Ok(PrecompData { model, seed, grid, n, stats })
    }
}

fn join_reals(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_reals(line: &str, d: usize) -> Result<Vec<f64>, FileError> {
    let vals: Vec<f64> = line
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| FileError::Corrupt(format!("bad real `{t}`")))
        })
        .collect::<Result<_, _>>()?;
    if vals.len() != d {
        return Err(FileError::Corrupt(format!(
            "expected {d} reals, got {} in `{line}`",
            vals.len()
        )));
    }
    Ok(vals)
}

fn parse_kv<T: std::str::FromStr>(line: &str, key: &str) -> Result<T, FileError> {
    match line.split_once(' ') {
        Some((k, v)) if k == key => v
            .trim()
            .parse()
            .map_err(|_| FileError::Corrupt(format!("bad value in `{line}`"))),
        _ => Err(FileError::Corrupt(format!("expected `{key} <value>`, got `{line}`"))),
    }
}

/// FNV-1a, 64-bit.
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::rngstream::stream;
    use rand::Rng;

    fn toy_grid() -> Grid {
        Grid::from_integer_points(
            vec![0.0],
            vec![vec![1.0]],
            vec![1.0],
            0.5,
            (1..=5).map(|z| vec![z]).collect(),
        )
        .unwrap()
    }

    #[test]
    fn cardinality_and_shape() {
        let model = GrfModel::ToyGaussian;
        let pd = run_precompute(&model, toy_grid(), 10, 1, 99).unwrap();
        assert_eq!(pd.grid().len(), 5);
        assert_eq!(pd.n(), 10);
        let total: usize = (0..5).map(|m| pd.stats(m).len()).sum();
        assert_eq!(total, 50);
        assert!(pd.stats(0).iter().all(|r| r.len() == 1));
    }

    #[test]
    fn deterministic_bytes_across_runs() {
        let model = GrfModel::ErdosRenyi { nodes: 5 };
        let a = run_precompute(&model, toy_grid(), 20, 1, 7).unwrap();
        let b = run_precompute(&model, toy_grid(), 20, 1, 7).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        let c = run_precompute(&model, toy_grid(), 20, 1, 8).unwrap();
        assert_ne!(a.to_text(), c.to_text());
    }

    #[test]
    fn erdos_renyi_mean_matches_binomial() {
        // grid point at theta = 0 on 4 nodes: edges ~ Binomial(6, 1/2)
        let model = GrfModel::ErdosRenyi { nodes: 4 };
        let grid = Grid::from_integer_points(
            vec![0.0],
            vec![vec![1.0]],
            vec![1.0],
            0.5,
            vec![vec![0]],
        )
        .unwrap();
        let pd = run_precompute(&model, grid, 10_000, 1, 3).unwrap();
        let mean = pd.mean_stats(0)[0];
        // sd of the mean = sqrt(6 * 1/4) / 100
        let se = (6.0f64 * 0.25).sqrt() / 100.0;
        assert!((mean - 3.0).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn round_trip_is_lossless() {
        let model = GrfModel::ToyGaussian;
        let pd = run_precompute(&model, toy_grid(), 7, 1, 123).unwrap();
        let text = pd.to_text();
        let back = PrecompData::from_text(&text).unwrap();
        assert_eq!(back.to_text(), text);
        assert_eq!(back.n(), 7);
        assert_eq!(back.seed(), 123);
        assert_eq!(back.model(), &model);
        for m in 0..5 {
            assert_eq!(back.stats(m), pd.stats(m));
        }
    }

    #[test]
    fn version_checksum_and_truncation_errors_are_distinct() {
        let model = GrfModel::ToyGaussian;
        let pd = run_precompute(&model, toy_grid(), 3, 1, 5).unwrap();
        let text = pd.to_text();

        // version bump changes the payload, so re-stamp a valid checksum to
        // reach the version check itself
        let bumped = stamp(&strip_checksum(&text).replacen("gridmh-precomp v1", "gridmh-precomp v2", 1));
        assert!(matches!(
            PrecompData::from_text(&bumped).unwrap_err(),
            crate::Error::Precomp(FileError::UnknownVersion(_))
        ));

        // flipped payload byte under the original checksum
        let corrupted = text.replacen("seed 5", "seed 6", 1);
        assert!(matches!(
            PrecompData::from_text(&corrupted).unwrap_err(),
            crate::Error::Precomp(FileError::Checksum { .. })
        ));

        // drop the last statistics line but keep a valid checksum
        let lines: Vec<&str> = text.lines().collect();
        let shortened = stamp(&(lines[..lines.len() - 2].join("\n") + "\n"));
        assert!(matches!(
            PrecompData::from_text(&shortened).unwrap_err(),
            crate::Error::Precomp(FileError::Truncated(_))
        ));

        // header says more draws than the body holds
        let inflated = stamp(&strip_checksum(&text).replacen("n 3", "n 4", 1));
        assert!(PrecompData::from_text(&inflated).is_err());
    }

    #[test]
    fn nearest_point_agrees_with_brute_force_in_rotated_2d() {
        let (c, s) = (0.8, 0.6);
        let zs: Vec<Vec<i64>> = (-3..=3)
            .flat_map(|a| (-2..=2).map(move |b| vec![a, b]))
            .collect();
        let grid = Grid::from_integer_points(
            vec![0.5, -1.0],
            vec![vec![c, -s], vec![s, c]],
            vec![2.0, 0.5],
            0.3,
            zs,
        )
        .unwrap();
        let mut rng = stream(21, 0);
        for _ in 0..100 {
            let theta = [
                0.5 + rng.gen_range(-2.0..2.0),
                -1.0 + rng.gen_range(-2.0..2.0),
            ];
            let fast = grid.nearest_point(&theta);
            let zc = grid.eigen_coords(&theta);
            let brute = grid
                .points()
                .iter()
                .enumerate()
                .min_by(|(_, p), (_, q)| {
                    let dp: f64 = p.z.iter().zip(&zc).map(|(&z, &c)| (z as f64 - c).powi(2)).sum();
                    let dq: f64 = q.z.iter().zip(&zc).map(|(&z, &c)| (z as f64 - c).powi(2)).sum();
                    dp.partial_cmp(&dq).unwrap()
                })
                .unwrap()
                .0;
            assert_eq!(fast, brute);
        }
    }

    /// Drop the trailing checksum line.
    fn strip_checksum(text: &str) -> String {
        let body = text.strip_suffix('\n').unwrap_or(text);
        let cut = body.rfind('\n').map(|i| i + 1).unwrap_or(0);
        text[..cut].to_string()
    }

    /// Append a valid checksum line to a payload.
    fn stamp(payload: &str) -> String {
        format!("{payload}{:016x}\n", super::fnv1a64(payload.as_bytes()))
    }
}
