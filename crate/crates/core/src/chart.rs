//! Coordinate charts: dimension, per-variable sign declarations, box bounds.

use alloc::vec;
use alloc::vec::Vec;

/// Declared sign of a chart variable. Densities and distance functions that
/// involve `abs(xi)` are only meaningful on sign-definite charts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Free,
    Positive,
    Negative,
}

/// Orientation label for the two sides of a hypersurface `{psi = 0}`:
/// `Pos` is the side where `psi > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Pos,
    Neg,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Pos => 1.0,
            Side::Neg => -1.0,
        }
    }
}

/// A coordinate chart on which all expressions of a model live.
#[derive(Debug, Clone)]
pub struct Chart {
    dim: usize,
    signs: Vec<Sign>,
    bounds: Option<Vec<[f64; 2]>>,
}

impl Chart {
    pub fn new(dim: usize) -> Self {
        Chart {
            dim,
            signs: vec![Sign::Free; dim],
            bounds: None,
        }
    }

    pub fn with_sign(mut self, var: usize, sign: Sign) -> Self {
        assert!(var < self.dim, "variable index out of range");
        self.signs[var] = sign;
        self
    }

    pub fn with_bounds(mut self, bounds: Vec<[f64; 2]>) -> Self {
        assert_eq!(bounds.len(), self.dim, "bounds dimension mismatch");
        self.bounds = Some(bounds);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sign(&self, var: usize) -> Sign {
        self.signs[var]
    }

    pub fn signs(&self) -> &[Sign] {
        &self.signs
    }

    pub fn bounds(&self) -> Option<&[[f64; 2]]> {
        self.bounds.as_deref()
    }

    /// Whether a point lies inside the declared box (true when no box given).
    pub fn contains(&self, p: &[f64]) -> bool {
        if p.len() != self.dim {
            return false;
        }
        match &self.bounds {
            None => true,
            Some(b) => p.iter().zip(b).all(|(x, [lo, hi])| *x >= *lo && *x <= *hi),
        }
    }

    /// Center of the declared box; origin if no box was declared.
    pub fn center(&self) -> Vec<f64> {
        match &self.bounds {
            None => vec![0.0; self.dim],
            Some(b) => b.iter().map(|[lo, hi]| 0.5 * (lo + hi)).collect(),
        }
    }
}
