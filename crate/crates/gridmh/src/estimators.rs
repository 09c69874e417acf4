//! One Pivot, Direct Path and Full Path estimators of `Z(theta)/Z(theta')`
//! from pre-computed statistics.
//!
//! Everything is computed in log space. The building block is the anchored
//! ratio `(1/n) sum_k exp{(theta - theta_m)' s_m^k}`, an unbiased estimate
//! of `Z(theta)/Z(theta_m)` from the statistics stored at grid point m.
//! Path estimators multiply such factors along a chain of grid points; the
//! per-link factors between fixed neighboring grid points never change, so
//! they are computed once per data bundle and memoized.

use std::collections::HashMap;
use std::collections::VecDeque;

use crate::linalg;
use crate::precompute::PrecompData;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    OnePivot,
    DirectPath,
    FullPath,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::OnePivot => "one_pivot",
            EstimatorKind::DirectPath => "direct_path",
            EstimatorKind::FullPath => "full_path",
        }
    }
}

/// An ordered walk through grid-point indices in which consecutive points
/// differ by one step along one eigen-axis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridPath {
    pub indices: Vec<usize>,
}

impl GridPath {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// A finished ratio estimate. `value = exp(log_value)`; estimates whose
/// value cannot be represented as a positive finite float are reported as
/// errors rather than infinities or zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioEstimate {
    pub value: f64,
    pub log_value: f64,
    pub kind: EstimatorKind,
    pub path_len: usize,
}

fn finish(kind: EstimatorKind, log_value: f64, path_len: usize) -> Result<RatioEstimate> {
    if !log_value.is_finite() {
        return Err(Error::NonFiniteEstimate(format!(
            "{} log-ratio = {log_value}",
            kind.name()
        )));
    }
    let value = log_value.exp();
    if !value.is_finite() || value <= 0.0 {
        return Err(Error::NonFiniteEstimate(format!(
            "{} ratio = {value} (log {log_value})",
            kind.name()
        )));
    }
    Ok(RatioEstimate { value, log_value, kind, path_len })
}

/// Estimator machinery bound to one immutable `PrecompData` bundle.
pub struct Estimators<'a> {
    pd: &'a PrecompData,
    /// adjacency in the integer lattice: neighbors[i] lists the grid indices
    /// one eigen-step away from point i, in ascending order
    neighbors: Vec<Vec<usize>>,
    /// memoized log of the link factor for the ordered pair (prev, cur):
    /// log (1/n) sum_k exp{(theta_prev - theta_cur)' s_cur^k}
    links: HashMap<(usize, usize), f64>,
}

impl<'a> Estimators<'a> {
    pub fn new(pd: &'a PrecompData) -> Estimators<'a> {
        let grid = pd.grid();
        let d = grid.dims();
        let mut neighbors = vec![Vec::new(); grid.len()];
        let mut links = HashMap::new();
        for (i, p) in grid.points().iter().enumerate() {
            for axis in 0..d {
                for sign in [-1i64, 1] {
                    let mut z = p.z.clone();
                    z[axis] += sign;
                    if let Some(j) = grid.index_of(&z) {
                        neighbors[i].push(j);
                        // factor for the link i -> j, drawn at j
                        links.insert((i, j), log_anchored(pd, &p.theta, j));
                    }
                }
            }
        }
        for nb in neighbors.iter_mut() {
            nb.sort_unstable();
        }
        Estimators { pd, neighbors, links }
    }

    pub fn data(&self) -> &PrecompData {
        self.pd
    }

    /// Log of the anchored ratio: an unbiased estimate (on the natural
    /// scale) of Z(theta)/Z(grid point m) from the statistics stored at m.
    pub fn log_anchored_ratio(&self, theta: &[f64], grid_index: usize) -> Result<f64> {
        self.check_theta(theta)?;
        let v = log_anchored(self.pd, theta, grid_index);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteEstimate(format!("anchored log-ratio = {v}")))
        }
    }

    /// The anchored ratio on the natural scale; errors if the value cannot
    /// be represented as a positive finite float.
    pub fn anchored_ratio(&self, theta: &[f64], grid_index: usize) -> Result<f64> {
        let log = self.log_anchored_ratio(theta, grid_index)?;
        let v = log.exp();
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(Error::NonFiniteEstimate(format!("anchored ratio = {v} (log {log})")))
        }
    }

    /// Deterministic path from one grid point to another: a staircase that
    /// exhausts each axis in `axis_order` (ascending when `None`), falling
    /// back to a breadth-first shortest path through existing grid points
    /// when the staircase leaves the grid.
    pub fn build_path(
        &self,
        from: usize,
        to: usize,
        axis_order: Option<&[usize]>,
    ) -> Result<GridPath> {
        let grid = self.pd.grid();
        let d = grid.dims();
        if from == to {
            return Ok(GridPath { indices: vec![from] });
        }
        let default_order: Vec<usize> = (0..d).collect();
        let order = axis_order.unwrap_or(&default_order);
        let target = &grid.point(to).z;

        let mut indices = vec![from];
        let mut z = grid.point(from).z.clone();
        'staircase: for &axis in order {
            let sign = (target[axis] - z[axis]).signum();
            while z[axis] != target[axis] {
                z[axis] += sign;
                match grid.index_of(&z) {
                    Some(i) => indices.push(i),
                    None => break 'staircase,
                }
            }
        }
        if indices.last() == Some(&to) {
            return Ok(GridPath { indices });
        }
        self.bfs_path(from, to)
    }

    fn bfs_path(&self, from: usize, to: usize) -> Result<GridPath> {
        let mut parent: Vec<Option<usize>> = vec![None; self.pd.grid().len()];
        let mut queue = VecDeque::new();
        parent[from] = Some(from);
        queue.push_back(from);
        while let Some(i) = queue.pop_front() {
            if i == to {
                let mut indices = vec![to];
                let mut cur = to;
                while cur != from {
                    cur = parent[cur].expect("visited nodes have parents");
                    indices.push(cur);
                }
                indices.reverse();
                return Ok(GridPath { indices });
            }
            for &j in &self.neighbors[i] {
                if parent[j].is_none() {
                    parent[j] = Some(i);
                    queue.push_back(j);
                }
            }
        }
        Err(Error::DisconnectedGrid { from, to })
    }

    /// Sum of memoized log link factors along a path: the log estimate of
    /// Z(first)/Z(last).
    pub fn log_path_factor(&self, path: &GridPath) -> f64 {
        path.indices
            .windows(2)
            .map(|w| self.links[&(w[0], w[1])])
            .sum()
    }

    /// One Pivot: both ends anchored at the grid point nearest the midpoint.
    pub fn one_pivot(&self, theta: &[f64], theta_prime: &[f64]) -> Result<RatioEstimate> {
        let mid: Vec<f64> = theta
            .iter()
            .zip(theta_prime)
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        let pivot = self.pd.nearest_grid_point(&mid);
        let log = self.log_anchored_ratio(theta, pivot)? - self.log_anchored_ratio(theta_prime, pivot)?;
        finish(EstimatorKind::OnePivot, log, 1)
    }

    /// Direct Path: anchor each end at its own nearest grid point, with one
    /// jump factor between them drawn at the second point.
    pub fn direct_path(&self, theta: &[f64], theta_prime: &[f64]) -> Result<RatioEstimate> {
        let t1 = self.pd.nearest_grid_point(theta);
        let t2 = self.pd.nearest_grid_point(theta_prime);
        let mut log = self.log_anchored_ratio(theta, t1)? - self.log_anchored_ratio(theta_prime, t2)?;
        let path_len = if t1 == t2 { 1 } else { 2 };
        if t1 != t2 {
            log += log_anchored(self.pd, &self.pd.grid().point(t1).theta, t2);
        }
        finish(EstimatorKind::DirectPath, log, path_len)
    }

    /// Full Path: anchored ends plus the chain of memoized neighbor links
    /// along the staircase between the two nearest grid points. With
    /// `average_axis_orders` set on a 2-d grid, the estimates from both axis
    /// orders are averaged on the natural scale.
    pub fn full_path(
        &self,
        theta: &[f64],
        theta_prime: &[f64],
        average_axis_orders: bool,
    ) -> Result<RatioEstimate> {
        let d = self.pd.grid().dims();
        let t1 = self.pd.nearest_grid_point(theta);
        let tc = self.pd.nearest_grid_point(theta_prime);
        let orders: Vec<Vec<usize>> = if average_axis_orders && d == 2 {
            vec![vec![0, 1], vec![1, 0]]
        } else {
            vec![(0..d).collect()]
        };
        let log_ends = self.log_anchored_ratio(theta, t1)? - self.log_anchored_ratio(theta_prime, tc)?;
        let mut logs = Vec::with_capacity(orders.len());
        let mut path_len = 0;
        for order in &orders {
            let path = self.build_path(t1, tc, Some(order))?;
            path_len = path_len.max(path.len());
            logs.push(log_ends + self.log_path_factor(&path));
        }
        let log = linalg::log_mean_exp(logs.iter().copied());
        finish(EstimatorKind::FullPath, log, path_len)
    }

    /// Dispatch on the estimator kind (Full Path without order averaging).
    pub fn estimate(
        &self,
        kind: EstimatorKind,
        theta: &[f64],
        theta_prime: &[f64],
    ) -> Result<RatioEstimate> {
        match kind {
            EstimatorKind::OnePivot => self.one_pivot(theta, theta_prime),
            EstimatorKind::DirectPath => self.direct_path(theta, theta_prime),
            EstimatorKind::FullPath => self.full_path(theta, theta_prime, false),
        }
    }

    /// Log of the estimated ratio Z(theta)/Z(theta'), staying in log space
    /// so the chains never materialize a potentially overflowing value.
    pub fn log_rho(
        &self,
        kind: EstimatorKind,
        theta: &[f64],
        theta_prime: &[f64],
    ) -> Result<f64> {
        match kind {
            EstimatorKind::OnePivot => {
                let mid: Vec<f64> = theta
                    .iter()
                    .zip(theta_prime)
                    .map(|(a, b)| 0.5 * (a + b))
                    .collect();
                let pivot = self.pd.nearest_grid_point(&mid);
                Ok(self.log_anchored_ratio(theta, pivot)?
                    - self.log_anchored_ratio(theta_prime, pivot)?)
            }
            EstimatorKind::DirectPath => {
                let t1 = self.pd.nearest_grid_point(theta);
                let t2 = self.pd.nearest_grid_point(theta_prime);
                let mut log = self.log_anchored_ratio(theta, t1)?
                    - self.log_anchored_ratio(theta_prime, t2)?;
                if t1 != t2 {
                    log += log_anchored(self.pd, &self.pd.grid().point(t1).theta, t2);
                }
                Ok(log)
            }
            EstimatorKind::FullPath => {
                let t1 = self.pd.nearest_grid_point(theta);
                let tc = self.pd.nearest_grid_point(theta_prime);
                let path = self.build_path(t1, tc, None)?;
                Ok(self.log_anchored_ratio(theta, t1)? + self.log_path_factor(&path)
                    - self.log_anchored_ratio(theta_prime, tc)?)
            }
        }
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        let d = self.pd.grid().dims();
        if theta.len() != d {
            return Err(Error::DimMismatch { expected: d, got: theta.len() });
        }
        Ok(())
    }
}

fn log_anchored(pd: &PrecompData, theta: &[f64], m: usize) -> f64 {
    let anchor = &pd.grid().point(m).theta;
    let delta = linalg::sub(theta, anchor);
    linalg::log_mean_exp(pd.stats(m).iter().map(|s| linalg::dot(&delta, s)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::models::GrfModel;
    use crate::precompute::run_precompute;

    fn line_precomp(n: usize, seed: u64) -> PrecompData {
        let grid = Grid::from_integer_points(
            vec![0.0],
            vec![vec![1.0]],
            vec![1.0],
            0.1,
            (1..=30).map(|z| vec![z]).collect(),
        )
        .unwrap();
        run_precompute(&GrfModel::ToyGaussian, grid, n, 1, seed).unwrap()
    }

    fn rect_precomp() -> PrecompData {
        let zs: Vec<Vec<i64>> = (0..=3).flat_map(|a| (0..=2).map(move |b| vec![a, b])).collect();
        let grid = Grid::from_integer_points(
            vec![0.1, 0.2],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![1.0, 1.0],
            0.05,
            zs,
        )
        .unwrap();
        run_precompute(&GrfModel::Autologistic { height: 2, width: 2 }, grid, 3, 2, 5).unwrap()
    }

    #[test]
    fn anchored_ratio_at_the_anchor_is_one() {
        let pd = line_precomp(10, 1);
        let est = Estimators::new(&pd);
        let theta = pd.grid().point(4).theta.clone();
        assert_eq!(est.anchored_ratio(&theta, 4).unwrap(), 1.0);
    }

    #[test]
    fn anchored_ratio_with_one_draw_is_the_definition() {
        let pd = line_precomp(1, 2);
        let est = Estimators::new(&pd);
        let s = pd.stats(7)[0][0];
        let anchor = pd.grid().point(7).theta[0];
        let theta = [1.3];
        let expect = ((theta[0] - anchor) * s).exp();
        assert!((est.anchored_ratio(&theta, 7).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn anchored_ratio_converges_to_toy_closed_form() {
        // Z(1.2)/Z(1.0) = sqrt(1/1.2); exact MC sd of the n = 1e6 mean is
        // sqrt(1/sqrt(1.8) - 1/1.2) / 1000 ~ 1.1e-4
        let grid = Grid::from_integer_points(
            vec![0.0],
            vec![vec![1.0]],
            vec![1.0],
            1.0,
            vec![vec![1]],
        )
        .unwrap();
        let pd = run_precompute(&GrfModel::ToyGaussian, grid, 1_000_000, 1, 33).unwrap();
        let est = Estimators::new(&pd);
        let v = est.anchored_ratio(&[1.2], 0).unwrap();
        let expect = (1.0f64 / 1.2).sqrt();
        let se = (1.0 / 1.8f64.sqrt() - 1.0 / 1.2).sqrt() / 1000.0;
        assert!((v - expect).abs() < 3.0 * se, "{v} vs {expect}");
    }

    #[test]
    fn overflow_is_an_error_not_an_infinity() {
        // 40 nodes: statistics around 390 at theta = 0, so a displacement
        // of 1.8 puts the exponents near 700
        let grid = Grid::from_integer_points(
            vec![0.0],
            vec![vec![1.0]],
            vec![1.0],
            1.0,
            vec![vec![0]],
        )
        .unwrap();
        let pd = run_precompute(&GrfModel::ErdosRenyi { nodes: 40 }, grid, 50, 1, 9).unwrap();
        let est = Estimators::new(&pd);
        let log = est.log_anchored_ratio(&[1.8], 0).unwrap();
        assert!(log.is_finite() && log > 600.0);
        assert!(matches!(
            est.anchored_ratio(&[1.8], 0),
            Err(Error::NonFiniteEstimate(_))
        ));
    }

    #[test]
    fn staircase_path_in_a_rectangle() {
        let pd = rect_precomp();
        let est = Estimators::new(&pd);
        let from = pd.grid().index_of(&[0, 0]).unwrap();
        let to = pd.grid().index_of(&[3, 2]).unwrap();
        let path = est.build_path(from, to, None).unwrap();
        assert_eq!(path.len(), 6);
        // first three steps exhaust axis 0
        let zs: Vec<&[i64]> = path
            .indices
            .iter()
            .map(|&i| pd.grid().point(i).z.as_slice())
            .collect();
        assert_eq!(zs[..4], [&[0, 0][..], &[1, 0], &[2, 0], &[3, 0]]);
        for w in path.indices.windows(2) {
            let a = &pd.grid().point(w[0]).z;
            let b = &pd.grid().point(w[1]).z;
            let diff: i64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum();
            assert_eq!(diff, 1);
        }
        // same endpoints, reversed axis order: axis 1 first
        let path2 = est.build_path(from, to, Some(&[1, 0])).unwrap();
        let z1 = &pd.grid().point(path2.indices[1]).z;
        assert_eq!(z1.as_slice(), &[0, 1]);

        let trivial = est.build_path(from, from, None).unwrap();
        assert_eq!(trivial.indices, vec![from]);
    }

    #[test]
    fn bfs_rescues_a_staircase_that_leaves_the_grid() {
        // two quadrant boxes sharing only the origin row/column
        let mut zs: Vec<Vec<i64>> = (0..=2).flat_map(|a| (0..=2).map(move |b| vec![a, b])).collect();
        zs.extend((-2..=0).flat_map(|a| (-2..=0).map(move |b| vec![a, b])));
        let grid = Grid::from_integer_points(
            vec![0.0, 0.0],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![1.0, 1.0],
            0.05,
            zs,
        )
        .unwrap();
        let pd = run_precompute(&GrfModel::Autologistic { height: 2, width: 2 }, grid, 2, 1, 11)
            .unwrap();
        let est = Estimators::new(&pd);
        let from = pd.grid().index_of(&[2, 2]).unwrap();
        let to = pd.grid().index_of(&[-2, -2]).unwrap();
        let path = est.build_path(from, to, None).unwrap();
        assert_eq!(path.indices.first(), Some(&from));
        assert_eq!(path.indices.last(), Some(&to));
        assert_eq!(path.len(), 9);
        let mut seen = std::collections::HashSet::new();
        for w in path.indices.windows(2) {
            assert!(seen.insert(w[0]));
            let a = &pd.grid().point(w[0]).z;
            let b = &pd.grid().point(w[1]).z;
            let diff: i64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum();
            assert_eq!(diff, 1);
        }
    }

    #[test]
    fn disconnected_grid_is_an_explicit_error() {
        let grid = Grid::from_integer_points(
            vec![0.0],
            vec![vec![1.0]],
            vec![1.0],
            0.5,
            vec![vec![0], vec![5]],
        )
        .unwrap();
        let pd = run_precompute(&GrfModel::ToyGaussian, grid, 2, 1, 3).unwrap();
        let est = Estimators::new(&pd);
        assert!(matches!(
            est.build_path(0, 1, None),
            Err(Error::DisconnectedGrid { from: 0, to: 1 })
        ));
    }

    #[test]
    fn identical_endpoints_give_exactly_one() {
        let pd = line_precomp(10, 4);
        let est = Estimators::new(&pd);
        let theta = [0.73];
        assert_eq!(est.one_pivot(&theta, &theta).unwrap().value, 1.0);
        assert_eq!(est.direct_path(&theta, &theta).unwrap().value, 1.0);
        assert_eq!(est.full_path(&theta, &theta, false).unwrap().value, 1.0);
    }

    #[test]
    fn shared_nearest_point_collapses_dp_and_fp_to_op_form() {
        let pd = line_precomp(10, 6);
        let est = Estimators::new(&pd);
        // both within half a step of grid point 1.0 (z = 10)
        let (a, b) = ([0.98], [1.03]);
        let m = pd.nearest_grid_point(&a);
        assert_eq!(m, pd.nearest_grid_point(&b));
        let op_form =
            (est.log_anchored_ratio(&a, m).unwrap() - est.log_anchored_ratio(&b, m).unwrap()).exp();
        let dp = est.direct_path(&a, &b).unwrap();
        let fp = est.full_path(&a, &b, false).unwrap();
        assert_eq!(dp.value, op_form);
        assert_eq!(fp.value, op_form);
        assert_eq!(dp.path_len, 1);
        assert_eq!(fp.path_len, 1);
    }

    #[test]
    fn one_pivot_reciprocity_is_exact() {
        let pd = line_precomp(10, 8);
        let est = Estimators::new(&pd);
        let (a, b) = ([0.4], [1.7]);
        let fwd = est.one_pivot(&a, &b).unwrap();
        let bwd = est.one_pivot(&b, &a).unwrap();
        assert!((fwd.log_value + bwd.log_value).abs() < 1e-14);
    }

    #[test]
    fn axis_order_averaging_is_the_arithmetic_mean() {
        let pd = rect_precomp();
        let est = Estimators::new(&pd);
        let a = pd.grid().point(pd.grid().index_of(&[0, 0]).unwrap()).theta.clone();
        let b = pd.grid().point(pd.grid().index_of(&[3, 2]).unwrap()).theta.clone();
        let t1 = pd.nearest_grid_point(&a);
        let tc = pd.nearest_grid_point(&b);
        let ends = est.log_anchored_ratio(&a, t1).unwrap() - est.log_anchored_ratio(&b, tc).unwrap();
        let p01 = est.build_path(t1, tc, Some(&[0, 1])).unwrap();
        let p10 = est.build_path(t1, tc, Some(&[1, 0])).unwrap();
        let v01 = (ends + est.log_path_factor(&p01)).exp();
        let v10 = (ends + est.log_path_factor(&p10)).exp();
        let avg = est.full_path(&a, &b, true).unwrap();
        assert!((avg.value - 0.5 * (v01 + v10)).abs() < 1e-12 * avg.value);
        let plain = est.full_path(&a, &b, false).unwrap();
        assert!((plain.value - v01).abs() < 1e-12 * plain.value);
    }

    #[test]
    fn log_rho_matches_estimate() {
        let pd = line_precomp(20, 13);
        let est = Estimators::new(&pd);
        let (a, b) = ([0.31], [1.52]);
        for kind in [EstimatorKind::OnePivot, EstimatorKind::DirectPath, EstimatorKind::FullPath] {
            let r = est.estimate(kind, &a, &b).unwrap();
            let lr = est.log_rho(kind, &a, &b).unwrap();
            assert!((r.log_value - lr).abs() < 1e-12, "{kind:?}");
        }
    }
}
