//! Gibbs random field families: sufficient statistics, unnormalized
//! log-densities `log q_theta(y) = theta' s(y)`, auxiliary samplers, and
//! exact normalizing constants where tractable.

mod graph;
mod lattice;

pub use graph::{karate_graph, Graph};
pub use lattice::SpinLattice;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg;
use crate::{Error, Result};

/// Cutoff for the brute-force normalizing-constant path: models whose state
/// space has more than 2^20 configurations report `Intractable`.
const BRUTE_FORCE_MAX_BITS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GrfModel {
    /// Independent dyads; every graph with the same edge count equally likely.
    ErdosRenyi { nodes: usize },
    /// Spins on a rectangular lattice with free boundaries, s = sum of
    /// nearest-neighbour agreements.
    Ising { height: usize, width: usize },
    /// Two-parameter lattice model: s1 = sum of spins, s2 = neighbour
    /// agreement sum.
    Autologistic { height: usize, width: usize },
    /// ERGM with statistics (edge count, triangle count).
    ErgmEdgesTriangles { nodes: usize },
    /// ERGM with statistics (edge count, two-star count).
    ErgmEdgesTwostars { nodes: usize },
    /// Gaussian precision model with s(y) = -y^2/2, so q_theta(y) =
    /// exp(-theta y^2 / 2) and Z(theta) = sqrt(2 pi / theta).
    ToyGaussian,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelState {
    Graph(Graph),
    Spins(SpinLattice),
    Scalar(f64),
}

/// The d-dimensional sufficient statistics vector s(y) — the only per-sample
/// artifact the pre-computation stage ever stores.
#[derive(Debug, Clone, PartialEq)]
pub struct SuffStats(pub Vec<f64>);

impl SuffStats {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dims(&self) -> usize {
        self.0.len()
    }
}

impl GrfModel {
    /// Parameter dimension d.
    pub fn dims(&self) -> usize {
        match self {
            GrfModel::ErdosRenyi { .. } | GrfModel::Ising { .. } | GrfModel::ToyGaussian => 1,
            GrfModel::Autologistic { .. }
            | GrfModel::ErgmEdgesTriangles { .. }
            | GrfModel::ErgmEdgesTwostars { .. } => 2,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            GrfModel::ErdosRenyi { .. } => "erdos_renyi",
            GrfModel::Ising { .. } => "ising",
            GrfModel::Autologistic { .. } => "autologistic",
            GrfModel::ErgmEdgesTriangles { .. } => "ergm_edges_triangles",
            GrfModel::ErgmEdgesTwostars { .. } => "ergm_edges_twostars",
            GrfModel::ToyGaussian => "toy_gaussian",
        }
    }

    /// Model extent rendered for file headers: node count for graphs,
    /// `HxW` for lattices, `-` for the toy model.
    pub fn size_label(&self) -> String {
        match self {
            GrfModel::ErdosRenyi { nodes }
            | GrfModel::ErgmEdgesTriangles { nodes }
            | GrfModel::ErgmEdgesTwostars { nodes } => nodes.to_string(),
            GrfModel::Ising { height, width } | GrfModel::Autologistic { height, width } => {
                format!("{height}x{width}")
            }
            GrfModel::ToyGaussian => "-".to_string(),
        }
    }

    /// Inverse of `kind_name`/`size_label`, used when loading data files.
    pub fn from_kind_size(kind: &str, size: &str) -> Result<GrfModel> {
        let nodes = || -> Result<usize> {
            size.parse()
                .map_err(|_| Error::InvalidParameter(format!("bad node count `{size}`")))
        };
        let lattice = || -> Result<(usize, usize)> {
            let (h, w) = size
                .split_once('x')
                .ok_or_else(|| Error::InvalidParameter(format!("bad lattice size `{size}`")))?;
            Ok((
                h.parse()
                    .map_err(|_| Error::InvalidParameter(format!("bad lattice size `{size}`")))?,
                w.parse()
                    .map_err(|_| Error::InvalidParameter(format!("bad lattice size `{size}`")))?,
            ))
        };
        match kind {
            "erdos_renyi" => Ok(GrfModel::ErdosRenyi { nodes: nodes()? }),
            "ising" => {
                let (height, width) = lattice()?;
                Ok(GrfModel::Ising { height, width })
            }
            "autologistic" => {
                let (height, width) = lattice()?;
                Ok(GrfModel::Autologistic { height, width })
            }
            "ergm_edges_triangles" => Ok(GrfModel::ErgmEdgesTriangles { nodes: nodes()? }),
            "ergm_edges_twostars" => Ok(GrfModel::ErgmEdgesTwostars { nodes: nodes()? }),
            "toy_gaussian" => Ok(GrfModel::ToyGaussian),
            other => Err(Error::InvalidParameter(format!("unknown model kind `{other}`"))),
        }
    }

    /// Number of single-site (single-dyad) Gibbs updates in one full sweep.
    pub fn site_count(&self) -> usize {
        match self {
            GrfModel::ErdosRenyi { nodes }
            | GrfModel::ErgmEdgesTriangles { nodes }
            | GrfModel::ErgmEdgesTwostars { nodes } => nodes * (nodes - 1) / 2,
            GrfModel::Ising { height, width } | GrfModel::Autologistic { height, width } => {
                height * width
            }
            GrfModel::ToyGaussian => 1,
        }
    }

    /// Default number of full systematic scans for the auxiliary sampler.
    pub fn default_sweeps(&self) -> usize {
        5
    }

    fn check_dims(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dims() {
            return Err(Error::DimMismatch { expected: self.dims(), got: theta.len() });
        }
        Ok(())
    }

    fn check_state(&self, state: &ModelState) -> Result<()> {
        let ok = match (self, state) {
            (
                GrfModel::ErdosRenyi { nodes }
                | GrfModel::ErgmEdgesTriangles { nodes }
                | GrfModel::ErgmEdgesTwostars { nodes },
                ModelState::Graph(g),
            ) => g.nodes() == *nodes,
            (
                GrfModel::Ising { height, width } | GrfModel::Autologistic { height, width },
                ModelState::Spins(s),
            ) => s.height() == *height && s.width() == *width,
            (GrfModel::ToyGaussian, ModelState::Scalar(_)) => true,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidState(format!(
                "state does not match {} of size {}",
                self.kind_name(),
                self.size_label()
            )))
        }
    }

    /// Sufficient statistics s(y). Deterministic in the state.
    pub fn suff_stats(&self, state: &ModelState) -> Result<SuffStats> {
        self.check_state(state)?;
        let values = match (self, state) {
            (GrfModel::ErdosRenyi { .. }, ModelState::Graph(g)) => vec![g.edge_count() as f64],
            (GrfModel::ErgmEdgesTriangles { .. }, ModelState::Graph(g)) => {
                vec![g.edge_count() as f64, g.triangle_count() as f64]
            }
            (GrfModel::ErgmEdgesTwostars { .. }, ModelState::Graph(g)) => {
                vec![g.edge_count() as f64, g.twostar_count() as f64]
            }
            (GrfModel::Ising { .. }, ModelState::Spins(s)) => vec![s.neighbor_agreement() as f64],
            (GrfModel::Autologistic { .. }, ModelState::Spins(s)) => {
                vec![s.spin_sum() as f64, s.neighbor_agreement() as f64]
            }
            (GrfModel::ToyGaussian, ModelState::Scalar(y)) => vec![-y * y / 2.0],
            _ => unreachable!("check_state verified the pairing"),
        };
        Ok(SuffStats(values))
    }

    /// log q_theta(y) = theta' s(y).
    pub fn log_q(&self, theta: &[f64], stats: &SuffStats) -> Result<f64> {
        self.check_dims(theta)?;
        if stats.dims() != self.dims() {
            return Err(Error::DimMismatch { expected: self.dims(), got: stats.dims() });
        }
        Ok(linalg::dot(theta, stats.values()))
    }

    /// Exact log normalizing constant. Closed form for Erdős–Rényi and the
    /// toy model; brute-force enumeration for any other model whose state
    /// space fits in 2^20 configurations; `Intractable` otherwise.
    pub fn exact_log_z(&self, theta: &[f64]) -> Result<f64> {
        self.check_dims(theta)?;
        match self {
            GrfModel::ErdosRenyi { nodes } => {
                let dyads = (nodes * (nodes - 1) / 2) as f64;
                Ok(dyads * softplus(theta[0]))
            }
            GrfModel::ToyGaussian => {
                if theta[0] <= 0.0 {
                    return Err(Error::InvalidParameter(
                        "toy_gaussian requires theta > 0".into(),
                    ));
                }
                Ok(0.5 * ((2.0 * std::f64::consts::PI).ln() - theta[0].ln()))
            }
            _ => self.brute_force_log_z(theta),
        }
    }

    /// Brute-force log Z by exhaustive enumeration of the state space.
    /// Available whenever the state space has at most 2^20 configurations.
    pub fn brute_force_log_z(&self, theta: &[f64]) -> Result<f64> {
        self.check_dims(theta)?;
        let mut acc = LogSum::new();
        self.for_each_state(|stats| {
            acc.add(linalg::dot(theta, &stats));
        })?;
        Ok(acc.log_sum())
    }

    /// Brute-force E_theta[s(X)], the enumeration oracle used by tests and
    /// diagnostics on tiny models.
    pub fn brute_force_mean_stats(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_dims(theta)?;
        let log_z = self.brute_force_log_z(theta)?;
        let mut mean = vec![0.0; self.dims()];
        self.for_each_state(|stats| {
            let w = (linalg::dot(theta, &stats) - log_z).exp();
            for (m, s) in mean.iter_mut().zip(&stats) {
                *m += w * s;
            }
        })?;
        Ok(mean)
    }

    /// Enumerate the sufficient statistics of every configuration.
    fn for_each_state(&self, mut f: impl FnMut(Vec<f64>)) -> Result<()> {
        match self {
            GrfModel::ErdosRenyi { nodes }
            | GrfModel::ErgmEdgesTriangles { nodes }
            | GrfModel::ErgmEdgesTwostars { nodes } => {
                let dyads = nodes * (nodes - 1) / 2;
                if dyads > BRUTE_FORCE_MAX_BITS {
                    return Err(Error::Intractable);
                }
                for mask in 0u64..(1u64 << dyads) {
                    let g = Graph::from_dyad_mask(*nodes, mask);
                    let stats = self
                        .suff_stats(&ModelState::Graph(g))
                        .expect("enumerated state is valid");
                    f(stats.0);
                }
                Ok(())
            }
            GrfModel::Ising { height, width } | GrfModel::Autologistic { height, width } => {
                let sites = height * width;
                if sites > BRUTE_FORCE_MAX_BITS {
                    return Err(Error::Intractable);
                }
                for mask in 0u64..(1u64 << sites) {
                    let s = SpinLattice::from_mask(*height, *width, mask);
                    let stats = self
                        .suff_stats(&ModelState::Spins(s))
                        .expect("enumerated state is valid");
                    f(stats.0);
                }
                Ok(())
            }
            GrfModel::ToyGaussian => Err(Error::Intractable),
        }
    }

    /// One approximate draw from f(.|theta). Erdős–Rényi and the toy model
    /// sample exactly; the lattice and ERGM families run `sweeps` full
    /// systematic scans of single-site Gibbs updates from a uniformly random
    /// initial state.
    pub fn sample_aux<R: Rng>(&self, theta: &[f64], sweeps: usize, rng: &mut R) -> Result<ModelState> {
        self.check_dims(theta)?;
        match self {
            GrfModel::ToyGaussian => {
                if theta[0] <= 0.0 {
                    return Err(Error::InvalidParameter(
                        "toy_gaussian requires theta > 0".into(),
                    ));
                }
                let z: f64 = rng.sample(StandardNormal);
                Ok(ModelState::Scalar(z / theta[0].sqrt()))
            }
            GrfModel::ErdosRenyi { nodes } => {
                let p = sigmoid(theta[0]);
                let mut g = Graph::empty(*nodes);
                for i in 0..*nodes {
                    for j in (i + 1)..*nodes {
                        g.set_edge(i, j, rng.gen::<f64>() < p);
                    }
                }
                Ok(ModelState::Graph(g))
            }
            GrfModel::Ising { height, width } => {
                let mut s = SpinLattice::random(*height, *width, rng);
                for _ in 0..sweeps {
                    s.gibbs_sweep_ising(theta[0], rng);
                }
                Ok(ModelState::Spins(s))
            }
            GrfModel::Autologistic { height, width } => {
                let mut s = SpinLattice::random(*height, *width, rng);
                for _ in 0..sweeps {
                    s.gibbs_sweep_autologistic(theta[0], theta[1], rng);
                }
                Ok(ModelState::Spins(s))
            }
            GrfModel::ErgmEdgesTriangles { nodes } => {
                let mut g = Graph::random(*nodes, rng);
                for _ in 0..sweeps {
                    g.gibbs_sweep(theta[0], theta[1], graph::ErgmStat::Triangles, rng);
                }
                Ok(ModelState::Graph(g))
            }
            GrfModel::ErgmEdgesTwostars { nodes } => {
                let mut g = Graph::random(*nodes, rng);
                for _ in 0..sweeps {
                    g.gibbs_sweep(theta[0], theta[1], graph::ErgmStat::Twostars, rng);
                }
                Ok(ModelState::Graph(g))
            }
        }
    }

    /// Convenience: sample and reduce to sufficient statistics.
    pub fn sample_stats<R: Rng>(&self, theta: &[f64], sweeps: usize, rng: &mut R) -> Result<SuffStats> {
        let state = self.sample_aux(theta, sweeps, rng)?;
        self.suff_stats(&state)
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Numerically stable ln(1 + e^x).
fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Streaming log-sum-exp accumulator.
struct LogSum {
    max: f64,
    sum: f64,
}

impl LogSum {
    fn new() -> Self {
        LogSum { max: f64::NEG_INFINITY, sum: 0.0 }
    }

    fn add(&mut self, x: f64) {
        if x <= self.max {
            self.sum += (x - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        }
    }

    fn log_sum(&self) -> f64 {
        self.max + self.sum.ln()
    }
}
