//! Discretized Brownian excursions and the trees they code.
//!
//! The tree coded by `e` has pseudo-distance
//! `d(s, t) = e_s + e_t - 2 min_{[s, t]} e` on the grid `0..=N`, and its mass
//! measure is uniform on the grid.

mod glue;

use std::sync::OnceLock;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{domain, Result};

pub use glue::{glue_coupling, CoupledTree, CutPoint, GlueSample, Piece, TreeRegion, MAX_GLUE_LEAVES};

pub const MIN_GRID: usize = 1 << 8;
pub const MAX_GRID: usize = 1 << 20;

/// Sparse table answering range-minimum queries in O(1).
#[derive(Clone, Debug)]
pub struct SparseTable {
    levels: Vec<Vec<f64>>,
}

impl SparseTable {
    pub fn new(values: &[f64]) -> SparseTable {
        let mut levels = vec![values.to_vec()];
        let mut width = 1;
        while 2 * width <= values.len() {
            let prev = levels.last().expect("non-empty");
            let next: Vec<f64> = (0..=values.len() - 2 * width).map(|i| prev[i].min(prev[i + width])).collect();
            levels.push(next);
            width *= 2;
        }
        SparseTable { levels }
    }

    /// Minimum over the inclusive range `[lo, hi]`.
    pub fn min(&self, lo: usize, hi: usize) -> f64 {
        let k = (usize::BITS - 1 - (hi - lo + 1).leading_zeros()) as usize;
        self.levels[k][lo].min(self.levels[k][hi + 1 - (1 << k)])
    }
}

#[derive(Clone, Debug)]
pub struct ExcursionTree {
    values: Vec<f64>,
    /// Built on the first distance query.
    rmq: OnceLock<SparseTable>,
}

impl ExcursionTree {
    pub fn from_values(values: Vec<f64>) -> Result<ExcursionTree> {
        if values.len() < 2 {
            return Err(domain("an excursion needs at least two grid points"));
        }
        if values[0] != 0.0 || values[values.len() - 1] != 0.0 {
            return Err(domain("an excursion starts and ends at 0"));
        }
        if values.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(domain("excursion values must be finite and non-negative"));
        }
        Ok(ExcursionTree { values, rmq: OnceLock::new() })
    }

    /// Bridge on the grid shifted cyclically to start at its minimum.
    pub fn sample<R: Rng + ?Sized>(grid: usize, rng: &mut R) -> Result<ExcursionTree> {
        if !grid.is_power_of_two() || !(MIN_GRID..=MAX_GRID).contains(&grid) {
            return Err(domain(format!("grid size {grid} is not a power of two in [2^8, 2^20]")));
        }
        let step = (1.0 / grid as f64).sqrt();
        let mut walk = Vec::with_capacity(grid + 1);
        walk.push(0.0f64);
        let mut s = 0.0;
        for _ in 0..grid {
            let z: f64 = StandardNormal.sample(rng);
            s += step * z;
            walk.push(s);
        }
        let end = walk[grid];
        for (i, b) in walk.iter_mut().enumerate() {
            *b -= end * i as f64 / grid as f64;
        }
        let (argmin, low) =
            walk[..grid]
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (i, &b)| if b < acc.1 { (i, b) } else { acc });
        let mut values: Vec<f64> = (0..=grid).map(|i| (walk[(argmin + i) % grid] - low).max(0.0)).collect();
        values[0] = 0.0;
        values[grid] = 0.0;
        ExcursionTree::from_values(values)
    }

    /// Number of grid steps `N`.
    pub fn grid(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn height(&self, s: usize) -> f64 {
        self.values[s]
    }

    pub fn max_height(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn distance(&self, s: usize, t: usize) -> Result<f64> {
        let n = self.grid();
        if s > n || t > n {
            return Err(domain(format!("grid index out of range 0..={n}")));
        }
        Ok(self.distance_unchecked(s, t))
    }

    #[inline]
    pub(crate) fn distance_unchecked(&self, s: usize, t: usize) -> f64 {
        let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
        (self.values[s] + self.values[t] - 2.0 * self.rmq.get_or_init(|| SparseTable::new(&self.values)).min(lo, hi))
            .max(0.0)
    }

    /// `max_{s <= u <= t} e_s - 2 e_u + e_t` in one pass; for fixed `s, t`
    /// the inner maximum over `u` picks out the minimum on `[s, t]`.
    pub fn diameter(&self) -> f64 {
        let mut best_s = f64::NEG_INFINITY;
        let mut best_su = f64::NEG_INFINITY;
        let mut best = 0.0f64;
        for &e in &self.values {
            best_s = best_s.max(e);
            best_su = best_su.max(best_s - 2.0 * e);
            best = best.max(best_su + e);
        }
        best
    }
}

pub fn sample_excursion<R: Rng + ?Sized>(grid: usize, rng: &mut R) -> Result<ExcursionTree> {
    ExcursionTree::sample(grid, rng)
}

pub fn tree_distance(tree: &ExcursionTree, s: usize, t: usize) -> Result<f64> {
    tree.distance(s, t)
}

pub fn diameter(tree: &ExcursionTree) -> f64 {
    tree.diameter()
}
