//! ±1 spin configurations on a rectangular lattice with free boundaries.

use rand::Rng;

use super::sigmoid;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinLattice {
    height: usize,
    width: usize,
    spins: Vec<i8>,
}

impl SpinLattice {
    pub fn random<R: Rng>(height: usize, width: usize, rng: &mut R) -> SpinLattice {
        assert!(height >= 1 && width >= 1);
        let spins = (0..height * width)
            .map(|_| if rng.gen::<bool>() { 1 } else { -1 })
            .collect();
        SpinLattice { height, width, spins }
    }

    /// Decode from a bitmask (bit set = spin +1), sites in row-major order.
    /// Used by the enumeration oracle.
    pub fn from_mask(height: usize, width: usize, mask: u64) -> SpinLattice {
        assert!(height * width <= 64);
        let spins = (0..height * width)
            .map(|k| if mask >> k & 1 == 1 { 1 } else { -1 })
            .collect();
        SpinLattice { height, width, spins }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn spin(&self, row: usize, col: usize) -> i8 {
        self.spins[row * self.width + col]
    }

    pub fn spin_sum(&self) -> i64 {
        self.spins.iter().map(|&s| s as i64).sum()
    }

    /// Sum of y_i y_j over nearest-neighbour pairs (right and down edges,
    /// free boundaries).
    pub fn neighbor_agreement(&self) -> i64 {
        let mut total = 0i64;
        for r in 0..self.height {
            for c in 0..self.width {
                let s = self.spin(r, c) as i64;
                if c + 1 < self.width {
                    total += s * self.spin(r, c + 1) as i64;
                }
                if r + 1 < self.height {
                    total += s * self.spin(r + 1, c) as i64;
                }
            }
        }
        total
    }

    fn neighbor_sum(&self, r: usize, c: usize) -> i64 {
        let mut total = 0i64;
        if c > 0 {
            total += self.spin(r, c - 1) as i64;
        }
        if c + 1 < self.width {
            total += self.spin(r, c + 1) as i64;
        }
        if r > 0 {
            total += self.spin(r - 1, c) as i64;
        }
        if r + 1 < self.height {
            total += self.spin(r + 1, c) as i64;
        }
        total
    }

    /// One systematic scan of single-site Gibbs updates for the Ising model:
    /// p(y_k = +1 | rest) = sigmoid(2 theta * neighbour sum).
    pub(crate) fn gibbs_sweep_ising<R: Rng>(&mut self, theta: f64, rng: &mut R) {
        self.gibbs_sweep_autologistic(0.0, theta, rng);
    }

    /// One systematic scan for the autologistic model with field t1 and
    /// interaction t2: p(y_k = +1 | rest) = sigmoid(2 (t1 + t2 * nb sum)).
    pub(crate) fn gibbs_sweep_autologistic<R: Rng>(&mut self, t1: f64, t2: f64, rng: &mut R) {
        for r in 0..self.height {
            for c in 0..self.width {
                let nb = self.neighbor_sum(r, c) as f64;
                let p = sigmoid(2.0 * (t1 + t2 * nb));
                self.spins[r * self.width + c] = if rng.gen::<f64>() < p { 1 } else { -1 };
            }
        }
    }
}
