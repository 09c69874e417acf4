//! Posterior-adapted parameter grids.
//!
//! The grid lives on an integer lattice in the eigenbasis of the log
//! posterior curvature at the mode: grid point `z ∈ Z^d` maps to
//! `theta(z) = theta* + eps * V * Lambda^{1/2} * z`, where `V` holds the
//! curvature eigenvectors and `Lambda` the eigenvalues of the inverse
//! curvature (approximate posterior variances along each eigendirection).
//! Points are added axis by axis until successive Monte Carlo gradient
//! estimates stop changing, which signals that the posterior support
//! boundary has been reached.

use std::collections::HashMap;

use rand::Rng;

use crate::linalg;
use crate::models::{GrfModel, SuffStats};
use crate::prior::Prior;
use crate::{Error, Result};

/// Monte Carlo estimate of the log posterior gradient at `theta`:
/// `s(y) - mean_i s(X_i) + grad log p(theta)` with `X_i ~ f(.|theta)`.
pub fn estimate_gradient<R: Rng>(
    model: &GrfModel,
    prior: &Prior,
    obs: &SuffStats,
    theta: &[f64],
    n_draws: usize,
    sweeps: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if n_draws == 0 {
        return Err(Error::TooFewValues { need: 1, got: 0 });
    }
    let d = model.dims();
    let mut mean = vec![0.0; d];
    for _ in 0..n_draws {
        let s = model.sample_stats(theta, sweeps, rng)?;
        for (m, v) in mean.iter_mut().zip(s.values()) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n_draws as f64;
    }
    let gp = prior.grad_log_density(theta);
    Ok((0..d).map(|k| obs.values()[k] - mean[k] + gp[k]).collect())
}

/// Monte Carlo estimate of the log posterior curvature at `theta`:
/// `C(theta) = cov_theta(s(X)) - diag(hessian log p)`, the negated Hessian,
/// which is positive definite near the mode. Returned row-major.
pub fn estimate_curvature<R: Rng>(
    model: &GrfModel,
    prior: &Prior,
    theta: &[f64],
    n_draws: usize,
    sweeps: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    if n_draws < 2 {
        return Err(Error::TooFewValues { need: 2, got: n_draws });
    }
    let d = model.dims();
    let mut draws = Vec::with_capacity(n_draws);
    let mut mean = vec![0.0; d];
    for _ in 0..n_draws {
        let s = model.sample_stats(theta, sweeps, rng)?;
        for (m, v) in mean.iter_mut().zip(s.values()) {
            *m += v;
        }
        draws.push(s.0);
    }
    for m in mean.iter_mut() {
        *m /= n_draws as f64;
    }
    let mut c = vec![vec![0.0; d]; d];
    for s in &draws {
        for i in 0..d {
            for j in 0..d {
                c[i][j] += (s[i] - mean[i]) * (s[j] - mean[j]);
            }
        }
    }
    for row in c.iter_mut() {
        for v in row.iter_mut() {
            *v /= (n_draws - 1) as f64;
        }
    }
    let hp = prior.hessian_log_density_diag(theta);
    for k in 0..d {
        c[k][k] -= hp[k];
    }
    Ok(c)
}

/// Robbins-Monro mode search settings.
#[derive(Debug, Clone)]
pub struct ModeSearch {
    /// Number of stochastic-approximation steps.
    pub iters: usize,
    /// Gain numerator a0 in a_t = a0 / (t0 + t). Defaults to
    /// 1 / max(1, ||s(y)||_inf) so step sizes are insensitive to the raw
    /// scale of the statistics.
    pub gain: Option<f64>,
    /// Gain offset t0.
    pub offset: f64,
    /// Auxiliary draws per gradient estimate.
    pub grad_draws: usize,
    /// Hard bound on ||theta||_inf; exceeding it aborts with `Diverged`.
    pub bound: f64,
}

impl Default for ModeSearch {
    fn default() -> Self {
        ModeSearch { iters: 500, gain: None, offset: 10.0, grad_draws: 20, bound: 1e4 }
    }
}

/// Estimate the posterior mode by Robbins-Monro ascent on the Monte Carlo
/// gradient, returning the average of the second half of the trajectory.
pub fn find_mode<R: Rng>(
    model: &GrfModel,
    prior: &Prior,
    obs: &SuffStats,
    init: &[f64],
    cfg: &ModeSearch,
    sweeps: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if cfg.iters == 0 {
        return Err(Error::TooFewValues { need: 1, got: 0 });
    }
    let gain = cfg.gain.unwrap_or_else(|| {
        let s_inf = obs.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        1.0 / s_inf.max(1.0)
    });
    let mut theta = init.to_vec();
    prior.project(&mut theta);
    let tail_from = cfg.iters / 2;
    let mut tail_sum = vec![0.0; theta.len()];
    for t in 0..cfg.iters {
        let g = estimate_gradient(model, prior, obs, &theta, cfg.grad_draws, sweeps, rng)?;
        let a = gain / (cfg.offset + t as f64);
        for (th, gi) in theta.iter_mut().zip(&g) {
            *th += a * gi;
        }
        prior.project(&mut theta);
        if theta.iter().any(|v| !v.is_finite() || v.abs() > cfg.bound) {
            return Err(Error::Diverged { bound: cfg.bound, step: t });
        }
        if t >= tail_from {
            for (s, th) in tail_sum.iter_mut().zip(&theta) {
                *s += th;
            }
        }
    }
    let tail_len = (cfg.iters - tail_from) as f64;
    Ok(tail_sum.into_iter().map(|s| s / tail_len).collect())
}

/// One grid vertex: integer eigenbasis coordinates and the parameter value.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub z: Vec<i64>,
    pub theta: Vec<f64>,
}

/// A finite set of parameter values on the integer lattice of the curvature
/// eigenbasis, with constant-time lookup by integer coordinates.
#[derive(Debug, Clone)]
pub struct Grid {
    mode: Vec<f64>,
    eigvecs: Vec<Vec<f64>>,
    eigvals: Vec<f64>,
    step: f64,
    points: Vec<GridPoint>,
    index: HashMap<Vec<i64>, usize>,
    z_lo: Vec<i64>,
    z_hi: Vec<i64>,
}

impl Grid {
    /// Assemble a grid from explicit integer points. Duplicates collapse to
    /// their first occurrence.
    pub fn from_integer_points(
        mode: Vec<f64>,
        eigvecs: Vec<Vec<f64>>,
        eigvals: Vec<f64>,
        step: f64,
        zs: Vec<Vec<i64>>,
    ) -> Result<Grid> {
        let d = mode.len();
        if eigvecs.len() != d || eigvecs.iter().any(|r| r.len() != d) || eigvals.len() != d {
            return Err(Error::DimMismatch { expected: d, got: eigvals.len() });
        }
        if !(step > 0.0) || eigvals.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::InvalidParameter(
                "grid step and eigenvalues must be positive".into(),
            ));
        }
        if zs.is_empty() {
            return Err(Error::TooFewValues { need: 1, got: 0 });
        }
        let mut grid = Grid {
            mode,
            eigvecs,
            eigvals,
            step,
            points: Vec::with_capacity(zs.len()),
            index: HashMap::with_capacity(zs.len()),
            z_lo: vec![i64::MAX; d],
            z_hi: vec![i64::MIN; d],
        };
        for z in zs {
            if z.len() != d {
                return Err(Error::DimMismatch { expected: d, got: z.len() });
            }
            if grid.index.contains_key(&z) {
                continue;
            }
            let theta = grid.theta_of(&z);
            for k in 0..d {
                grid.z_lo[k] = grid.z_lo[k].min(z[k]);
                grid.z_hi[k] = grid.z_hi[k].max(z[k]);
            }
            grid.index.insert(z.clone(), grid.points.len());
            grid.points.push(GridPoint { z, theta });
        }
        Ok(grid)
    }

    pub fn dims(&self) -> usize {
        self.mode.len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mode(&self) -> &[f64] {
        &self.mode
    }

    pub fn eigvecs(&self) -> &[Vec<f64>] {
        &self.eigvecs
    }

    pub fn eigvals(&self) -> &[f64] {
        &self.eigvals
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn points(&self) -> &[GridPoint] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &GridPoint {
        &self.points[i]
    }

    pub fn index_of(&self, z: &[i64]) -> Option<usize> {
        self.index.get(z).copied()
    }

    /// Parameter value of integer coordinates z (whether or not z is a
    /// grid point): theta* + eps V Lambda^{1/2} z.
    pub fn theta_of(&self, z: &[i64]) -> Vec<f64> {
        let u: Vec<f64> = z
            .iter()
            .zip(&self.eigvals)
            .map(|(&zi, &l)| self.step * l.sqrt() * zi as f64)
            .collect();
        linalg::add(&self.mode, &linalg::matvec(&self.eigvecs, &u))
    }

    /// Real-valued eigenbasis coordinates of an arbitrary parameter:
    /// the z solving theta = theta* + eps V Lambda^{1/2} z.
    pub fn eigen_coords(&self, theta: &[f64]) -> Vec<f64> {
        let u = linalg::matvec_t(&self.eigvecs, &linalg::sub(theta, &self.mode));
        u.iter()
            .zip(&self.eigvals)
            .map(|(&ui, &l)| ui / (self.step * l.sqrt()))
            .collect()
    }

    /// Index of the grid point closest to `theta` in the eigenbasis
    /// (Euclidean distance on the z coordinates). Rounding resolves it in
    /// O(d) when that lattice site exists and no coordinate sits exactly
    /// midway; otherwise all points are scanned with ties broken toward the
    /// lower index.
    pub fn nearest_point(&self, theta: &[f64]) -> usize {
        let mut zc = self.eigen_coords(theta);
        // snap near-half coordinates so exact midway ties survive the
        // floating-point trip through eigen_coords
        for v in zc.iter_mut() {
            let half = v.floor() + 0.5;
            if (*v - half).abs() < 1e-9 {
                *v = half;
            }
        }
        let midway = zc.iter().any(|v| v - v.floor() == 0.5);
        if !midway {
            let rounded: Vec<i64> = zc.iter().map(|v| v.round() as i64).collect();
            if let Some(i) = self.index_of(&rounded) {
                return i;
            }
        }
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d: f64 = p
                .z
                .iter()
                .zip(&zc)
                .map(|(&zi, &c)| (zi as f64 - c).powi(2))
                .sum();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Whether `theta` lies in the box spanned by the grid, extended half a
    /// step in each direction in the eigenbasis. Chains built on the grid
    /// restrict their state to this region.
    pub fn in_support(&self, theta: &[f64]) -> bool {
        self.eigen_coords(theta).iter().enumerate().all(|(k, &z)| {
            z >= self.z_lo[k] as f64 - 0.5 && z <= self.z_hi[k] as f64 + 0.5
        })
    }
}

/// Grid construction from an arbitrary gradient oracle. Starting from the
/// origin, each eigendirection is extended one step at a time while
/// successive gradient estimates differ by more than `threshold`; the
/// positive and negative passes each start from a fresh single-point grid
/// and the result is their union.
pub fn build_grid_with(
    mode: Vec<f64>,
    eigvecs: Vec<Vec<f64>>,
    eigvals: Vec<f64>,
    step: f64,
    threshold: f64,
    max_points: usize,
    mut grad: impl FnMut(&[f64]) -> Result<Vec<f64>>,
) -> Result<Grid> {
    let d = mode.len();
    let probe = Grid::from_integer_points(
        mode.clone(),
        eigvecs.clone(),
        eigvals.clone(),
        step,
        vec![vec![0; d]],
    )?;
    let mut zs: Vec<Vec<i64>> = Vec::new();
    for sign in [1i64, -1] {
        let mut pass: Vec<Vec<i64>> = vec![vec![0; d]];
        for axis in 0..d {
            let snapshot = pass.clone();
            for base in snapshot {
                let mut z = base;
                let mut g_prev = grad(&probe.theta_of(&z))?;
                loop {
                    let mut z_next = z.clone();
                    z_next[axis] += sign;
                    let g_next = grad(&probe.theta_of(&z_next))?;
                    if linalg::norm(&linalg::sub(&g_next, &g_prev)) <= threshold {
                        break;
                    }
                    pass.push(z_next.clone());
                    if zs.len() + pass.len() > max_points {
                        return Err(Error::InvalidParameter(format!(
                            "grid exceeded {max_points} points; raise the gradient \
                             threshold or the point budget"
                        )));
                    }
                    z = z_next;
                    g_prev = g_next;
                }
            }
        }
        zs.extend(pass);
    }
    Grid::from_integer_points(mode, eigvecs, eigvals, step, zs)
}

/// Grid construction settings for `adapt_grid`.
#[derive(Debug, Clone)]
pub struct GridConfig {
    /// Exploratory step magnitude eps.
    pub step: f64,
    /// Gradient comparison threshold m.
    pub threshold: f64,
    /// Auxiliary draws per gradient estimate during the axis walks.
    pub grad_draws: usize,
    /// Auxiliary draws for the curvature estimate at the mode.
    pub curvature_draws: usize,
    /// Gibbs sweeps per auxiliary draw; `None` uses the model default.
    pub sweeps: Option<usize>,
    /// Hard cap on the number of grid points.
    pub max_points: usize,
    pub mode_search: ModeSearch,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            step: 0.5,
            threshold: 1.0,
            grad_draws: 100,
            curvature_draws: 500,
            sweeps: None,
            max_points: 10_000,
            mode_search: ModeSearch::default(),
        }
    }
}

/// The full grid-specification pipeline: Robbins-Monro mode search, Monte
/// Carlo curvature at the mode, eigendecomposition, then the axis walks.
pub fn adapt_grid<R: Rng>(
    model: &GrfModel,
    prior: &Prior,
    obs: &SuffStats,
    init: &[f64],
    cfg: &GridConfig,
    rng: &mut R,
) -> Result<Grid> {
    let sweeps = cfg.sweeps.unwrap_or_else(|| model.default_sweeps());
    let mode = find_mode(model, prior, obs, init, &cfg.mode_search, sweeps, rng)?;
    let c = estimate_curvature(model, prior, &mode, cfg.curvature_draws, sweeps, rng)?;
    let (cvals, cvecs) = linalg::sym_eigen(&c);
    // Floor the curvature spectrum so a degenerate direction cannot blow up
    // the inverse; the grid then simply takes wide steps along it.
    let floor = cvals[0].max(f64::MIN_POSITIVE) * 1e-8;
    let eigvals: Vec<f64> = cvals.iter().map(|&v| 1.0 / v.max(floor)).collect();
    build_grid_with(
        mode,
        cvecs,
        eigvals,
        cfg.step,
        cfg.threshold,
        cfg.max_points,
        |theta| estimate_gradient(model, prior, obs, theta, cfg.grad_draws, sweeps, rng),
    )
}
