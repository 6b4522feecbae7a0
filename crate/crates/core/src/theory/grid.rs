use alloc::vec::Vec;

use crate::env::Environment;
use crate::{Error, Result};

/// Tensor grid with `counts[i]` equally spaced points on `[lows[i], highs[i]]`
/// (endpoints included).
#[derive(Debug, Clone, PartialEq)]
pub struct StateGrid {
    lows: Vec<f64>,
    highs: Vec<f64>,
    counts: Vec<usize>,
}

impl StateGrid {
    pub fn new(bounds: &[(f64, f64)], counts: &[usize]) -> Result<Self> {
        if bounds.is_empty() || bounds.len() != counts.len() {
            return Err(Error::DimensionMismatch {
                expected: bounds.len(),
                found: counts.len(),
            });
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidConfig(alloc::format!(
                    "grid axis {i}: bad bounds [{lo}, {hi}]"
                )));
            }
            if counts[i] < 2 {
                return Err(Error::InvalidConfig(alloc::format!(
                    "grid axis {i}: need at least 2 points"
                )));
            }
        }
        Ok(Self {
            lows: bounds.iter().map(|b| b.0).collect(),
            highs: bounds.iter().map(|b| b.1).collect(),
            counts: counts.to_vec(),
        })
    }

    /// Grid over the environment's state box with `per_axis` points per axis.
    pub fn for_env<E: Environment + ?Sized>(env: &E, per_axis: usize) -> Result<Self> {
        let bounds = env.state_bounds();
        let counts = alloc::vec![per_axis; bounds.len()];
        Self::new(&bounds, &counts)
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| (self.highs[i] - self.lows[i]) / (self.counts[i] - 1) as f64)
            .collect()
    }

    fn coord(&self, axis: usize, j: usize) -> f64 {
        let n = self.counts[axis] - 1;
        if j == n {
            return self.highs[axis];
        }
        let (lo, hi) = (self.lows[axis], self.highs[axis]);
        lo + (hi - lo) * (j as f64 / n as f64)
    }

    /// The `index`-th point, last axis varying fastest.
    pub fn point(&self, mut index: usize, out: &mut Vec<f64>) {
        out.clear();
        out.resize(self.dim(), 0.0);
        for axis in (0..self.dim()).rev() {
            let j = index % self.counts[axis];
            index /= self.counts[axis];
            out[axis] = self.coord(axis, j);
        }
    }

    /// Inserts a midpoint into every cell: `n -> 2n - 1` points per axis.
    /// The refined grid contains every point of the original.
    pub fn refine(&self) -> Self {
        Self {
            lows: self.lows.clone(),
            highs: self.highs.clone(),
            counts: self.counts.iter().map(|n| 2 * n - 1).collect(),
        }
    }

    /// Refines `k` times.
    pub fn refined(&self, k: usize) -> Self {
        (0..k).fold(self.clone(), |g, _| g.refine())
    }

    /// Every grid point as an environment state.
    pub fn states<E: Environment + ?Sized>(&self, env: &E) -> Result<Vec<E::State>> {
        let mut buf = Vec::with_capacity(self.dim());
        (0..self.len())
            .map(|i| {
                self.point(i, &mut buf);
                env.state_from_slice(&buf)
            })
            .collect()
    }
}

/// Equally spaced actions over `[low, high]` (both included).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionGrid {
    pub low: f64,
    pub high: f64,
    pub count: usize,
}

impl ActionGrid {
    pub fn for_env<E: Environment + ?Sized>(env: &E, count: usize) -> Self {
        let d = env.descriptor();
        Self {
            low: d.action_low,
            high: d.action_high,
            count,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => alloc::vec![0.5 * (self.low + self.high)],
            n => (0..n)
                .map(|j| {
                    if j == n - 1 {
                        self.high
                    } else {
                        self.low + (self.high - self.low) * (j as f64 / (n - 1) as f64)
                    }
                })
                .collect(),
        }
    }
}
