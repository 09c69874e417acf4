//! Small undirected simple graphs stored as adjacency bit-rows (one u64 per
//! node), which keeps triangle and two-star counting to popcounts.

use rand::Rng;

use super::sigmoid;

const MAX_NODES: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    nodes: usize,
    rows: Vec<u64>,
}

pub(crate) enum ErgmStat {
    Triangles,
    Twostars,
}

impl Graph {
    pub fn empty(nodes: usize) -> Graph {
        assert!(nodes >= 2 && nodes <= MAX_NODES, "node count out of range");
        Graph { nodes, rows: vec![0; nodes] }
    }

    /// Uniformly random graph: each dyad present with probability 1/2.
    pub fn random<R: Rng>(nodes: usize, rng: &mut R) -> Graph {
        let mut g = Graph::empty(nodes);
        for i in 0..nodes {
            for j in (i + 1)..nodes {
                g.set_edge(i, j, rng.gen::<bool>());
            }
        }
        g
    }

    /// Decode a graph from a bitmask over dyads ordered (0,1), (0,2), ...,
    /// (0,n-1), (1,2), ... Used by the enumeration oracle.
    pub fn from_dyad_mask(nodes: usize, mask: u64) -> Graph {
        let mut g = Graph::empty(nodes);
        let mut bit = 0;
        for i in 0..nodes {
            for j in (i + 1)..nodes {
                g.set_edge(i, j, mask >> bit & 1 == 1);
                bit += 1;
            }
        }
        g
    }

    /// Parse a whitespace-separated edge list with 1-based node labels.
    /// Blank lines and `#` comments are skipped.
    pub fn from_edge_list(nodes: usize, text: &str) -> crate::Result<Graph> {
        let mut g = Graph::empty(nodes);
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let (a, b) = (it.next(), it.next());
            let parse = |tok: Option<&str>| -> crate::Result<usize> {
                let tok = tok.ok_or_else(|| {
                    crate::Error::InvalidState(format!("bad edge list line `{line}`"))
                })?;
                let v: usize = tok.parse().map_err(|_| {
                    crate::Error::InvalidState(format!("bad edge list line `{line}`"))
                })?;
                if v < 1 || v > nodes {
                    return Err(crate::Error::InvalidState(format!(
                        "node label {v} outside 1..={nodes}"
                    )));
                }
                Ok(v - 1)
            };
            let (a, b) = (parse(a)?, parse(b)?);
            if a == b {
                return Err(crate::Error::InvalidState(format!("self-loop on node {}", a + 1)));
            }
            g.set_edge(a, b, true);
        }
        Ok(g)
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.rows[i] >> j & 1 == 1
    }

    pub fn set_edge(&mut self, i: usize, j: usize, present: bool) {
        assert!(i != j && i < self.nodes && j < self.nodes);
        if present {
            self.rows[i] |= 1 << j;
            self.rows[j] |= 1 << i;
        } else {
            self.rows[i] &= !(1 << j);
            self.rows[j] &= !(1 << i);
        }
    }

    pub fn degree(&self, i: usize) -> u32 {
        self.rows[i].count_ones()
    }

    pub fn edge_count(&self) -> u64 {
        let total: u64 = self.rows.iter().map(|r| r.count_ones() as u64).sum();
        total / 2
    }

    /// Number of unordered node triples with all three edges present.
    pub fn triangle_count(&self) -> u64 {
        let mut count = 0u64;
        for i in 0..self.nodes {
            for j in (i + 1)..self.nodes {
                if self.has_edge(i, j) {
                    // common neighbours above j close a triangle exactly once
                    let above = !((1u64 << (j + 1)) - 1);
                    count += (self.rows[i] & self.rows[j] & above).count_ones() as u64;
                }
            }
        }
        count
    }

    /// Number of two-stars: sum over nodes of C(degree, 2).
    pub fn twostar_count(&self) -> u64 {
        self.rows
            .iter()
            .map(|r| {
                let d = r.count_ones() as u64;
                d * (d - 1) / 2
            })
            .sum()
    }

    fn common_neighbors(&self, i: usize, j: usize) -> u32 {
        (self.rows[i] & self.rows[j]).count_ones()
    }

    /// One systematic dyad scan of single-dyad Gibbs updates for an ERGM
    /// with statistics (edges, triangles) or (edges, twostars). Toggling
    /// dyad (i,j) changes triangles by |N(i) ∩ N(j)| and two-stars by
    /// deg(i) + deg(j) counted without the dyad itself.
    pub(crate) fn gibbs_sweep<R: Rng>(&mut self, t1: f64, t2: f64, stat: ErgmStat, rng: &mut R) {
        for i in 0..self.nodes {
            for j in (i + 1)..self.nodes {
                let delta2 = match stat {
                    ErgmStat::Triangles => self.common_neighbors(i, j) as f64,
                    ErgmStat::Twostars => {
                        let present = self.has_edge(i, j) as u32;
                        (self.degree(i) - present + self.degree(j) - present) as f64
                    }
                };
                let p = sigmoid(t1 + t2 * delta2);
                self.set_edge(i, j, rng.gen::<f64>() < p);
            }
        }
    }
}

/// Zachary's karate club network: 34 nodes, 78 edges.
pub fn karate_graph() -> Graph {
    Graph::from_edge_list(34, include_str!("../../data/karate.txt"))
        .expect("bundled edge list is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_on_a_path_and_a_triangle() {
        // path 0-1-2: 2 edges, 0 triangles, 1 two-star
        let mut p = Graph::empty(3);
        p.set_edge(0, 1, true);
        p.set_edge(1, 2, true);
        assert_eq!(p.edge_count(), 2);
        assert_eq!(p.triangle_count(), 0);
        assert_eq!(p.twostar_count(), 1);
        p.set_edge(0, 2, true);
        assert_eq!(p.triangle_count(), 1);
        assert_eq!(p.twostar_count(), 3);
    }

    #[test]
    fn complete_graph_counts() {
        // K5: C(5,2)=10 edges, C(5,3)=10 triangles, 5*C(4,2)=30 two-stars
        let g = Graph::from_dyad_mask(5, (1 << 10) - 1);
        assert_eq!(g.edge_count(), 10);
        assert_eq!(g.triangle_count(), 10);
        assert_eq!(g.twostar_count(), 30);
    }

    #[test]
    fn dyad_mask_round_trip() {
        let g = Graph::from_dyad_mask(4, 0b101011);
        // dyad order: (0,1) (0,2) (0,3) (1,2) (1,3) (2,3)
        assert!(g.has_edge(0, 1));
        assert!(g.has_edge(0, 2));
        assert!(!g.has_edge(0, 3));
        assert!(g.has_edge(1, 2));
        assert!(!g.has_edge(1, 3));
        assert!(g.has_edge(2, 3));
        assert_eq!(g.edge_count(), 4);
    }

    #[test]
    fn karate_club_counts() {
        let g = karate_graph();
        assert_eq!(g.nodes(), 34);
        assert_eq!(g.edge_count(), 78);
        assert_eq!(g.triangle_count(), 45);
        assert_eq!(g.degree(33), 17);
        assert_eq!(g.degree(0), 16);
    }

    #[test]
    fn set_edge_is_symmetric_and_idempotent() {
        let mut g = Graph::empty(6);
        g.set_edge(2, 5, true);
        assert!(g.has_edge(5, 2));
        g.set_edge(5, 2, true);
        assert_eq!(g.edge_count(), 1);
        g.set_edge(2, 5, false);
        assert_eq!(g.edge_count(), 0);
    }
}
