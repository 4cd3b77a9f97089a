//! Hybrid search spaces.
//!
//! A space has `m` categorical variables (stored as indices `0..arity`) and
//! `n` bounded continuous variables. Continuous coordinates live in the
//! normalized box `[-1, 1]^n` everywhere except at benchmark-evaluation and
//! I/O boundaries, where [`SpaceSpec::denormalize`] maps them back to raw
//! units.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteVar {
    pub name: String,
    pub arity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousVar {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SpaceSpec {
    #[serde(default)]
    pub discrete: Vec<DiscreteVar>,
    #[serde(default)]
    pub continuous: Vec<ContinuousVar>,
}

/// One assignment `(x_d, x_c)`: category indices and normalized reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridPoint {
    pub discrete: Vec<usize>,
    pub continuous: Vec<f64>,
}

impl HybridPoint {
    pub fn new(discrete: Vec<usize>, continuous: Vec<f64>) -> Self {
        Self {
            discrete,
            continuous,
        }
    }
}

impl SpaceSpec {
    pub fn new(discrete: Vec<DiscreteVar>, continuous: Vec<ContinuousVar>) -> Self {
        Self {
            discrete,
            continuous,
        }
    }

    /// Convenience constructor with generated variable names `d0.., c0..`.
    pub fn from_parts(arities: &[usize], bounds: &[(f64, f64)]) -> Self {
        let discrete = arities
            .iter()
            .enumerate()
            .map(|(i, &arity)| DiscreteVar {
                name: format!("d{i}"),
                arity,
            })
            .collect();
        let continuous = bounds
            .iter()
            .enumerate()
            .map(|(i, &(lower, upper))| ContinuousVar {
                name: format!("c{i}"),
                lower,
                upper,
            })
            .collect();
        Self::new(discrete, continuous)
    }

    /// Returns the spec unchanged if every invariant holds, otherwise the
    /// first violation.
    pub fn validate(self) -> Result<Self> {
        if self.discrete.is_empty() && self.continuous.is_empty() {
            return Err(Error::InvalidSpace(
                "empty space: at least one variable is required".into(),
            ));
        }
        for v in &self.discrete {
            if v.arity < 2 {
                return Err(Error::InvalidSpace(format!(
                    "arity must be ≥ 2 (variable `{}` has arity {})",
                    v.name, v.arity
                )));
            }
        }
        for v in &self.continuous {
            if !(v.lower.is_finite() && v.upper.is_finite()) {
                return Err(Error::InvalidSpace(format!(
                    "non-finite bounds for variable `{}`",
                    v.name
                )));
            }
            if v.lower >= v.upper {
                return Err(Error::InvalidSpace(format!(
                    "inverted bounds for variable `{}`: [{}, {}]",
                    v.name, v.lower, v.upper
                )));
            }
        }
        Ok(self)
    }

    /// Number of discrete variables.
    pub fn m(&self) -> usize {
        self.discrete.len()
    }

    /// Number of continuous variables.
    pub fn n(&self) -> usize {
        self.continuous.len()
    }

    /// Total dimension `m + n`.
    pub fn dims(&self) -> usize {
        self.m() + self.n()
    }

    pub fn arities(&self) -> Vec<usize> {
        self.discrete.iter().map(|v| v.arity).collect()
    }

    /// Names in the fixed dimension order: discrete block, then continuous.
    pub fn variable_names(&self) -> Vec<&str> {
        self.discrete
            .iter()
            .map(|v| v.name.as_str())
            .chain(self.continuous.iter().map(|v| v.name.as_str()))
            .collect()
    }

    /// Affine map of raw continuous values onto `[-1, 1]`.
    pub fn normalize(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: raw.len(),
            });
        }
        raw.iter()
            .zip(&self.continuous)
            .map(|(&value, var)| {
                if !(var.lower..=var.upper).contains(&value) {
                    return Err(Error::OutOfBounds {
                        name: var.name.clone(),
                        value,
                        lower: var.lower,
                        upper: var.upper,
                    });
                }
                Ok(2.0 * (value - var.lower) / (var.upper - var.lower) - 1.0)
            })
            .collect()
    }

    /// Inverse of [`normalize`](Self::normalize). Inputs are clamped to
    /// `[-1, 1]` first, so the result is always within bounds.
    pub fn denormalize(&self, normalized: &[f64]) -> Result<Vec<f64>> {
        if normalized.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: normalized.len(),
            });
        }
        Ok(normalized
            .iter()
            .zip(&self.continuous)
            .map(|(&u, var)| {
                let u = u.clamp(-1.0, 1.0);
                let v = var.lower + (u + 1.0) * 0.5 * (var.upper - var.lower);
                v.clamp(var.lower, var.upper)
            })
            .collect())
    }

    /// Checks the point invariants against this space.
    pub fn check_point(&self, x: &HybridPoint) -> Result<()> {
        if x.discrete.len() != self.m() {
            return Err(Error::DimensionMismatch {
                expected: self.m(),
                got: x.discrete.len(),
            });
        }
        if x.continuous.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: x.continuous.len(),
            });
        }
        for (v, &c) in self.discrete.iter().zip(&x.discrete) {
            if c >= v.arity {
                return Err(Error::InvalidPoint(format!(
                    "category {c} of `{}` exceeds arity {}",
                    v.name, v.arity
                )));
            }
        }
        for (v, &u) in self.continuous.iter().zip(&x.continuous) {
            if !(-1.0..=1.0).contains(&u) {
                return Err(Error::InvalidPoint(format!(
                    "normalized coordinate {u} of `{}` is outside [-1, 1]",
                    v.name
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &HybridPoint) -> bool {
        self.check_point(x).is_ok()
    }

    /// Uniform draw: categories uniform per variable, continuous coordinates
    /// uniform on `[-1, 1]`.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> HybridPoint {
        let discrete = self
            .discrete
            .iter()
            .map(|v| rng.random_range(0..v.arity))
            .collect();
        let continuous = (0..self.n())
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect();
        HybridPoint::new(discrete, continuous)
    }

    /// Uniform draw of the discrete block only.
    pub fn sample_discrete<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        self.discrete
            .iter()
            .map(|v| rng.random_range(0..v.arity))
            .collect()
    }

    /// All assignments at Hamming distance exactly one from `x_d`, ordered
    /// by variable, then by category.
    pub fn hamming_neighbors(&self, x_d: &[usize]) -> Vec<Vec<usize>> {
        let mut out = Vec::with_capacity(self.neighbor_count());
        for (i, v) in self.discrete.iter().enumerate() {
            for c in (0..v.arity).filter(|&c| c != x_d[i]) {
                let mut y = x_d.to_vec();
                y[i] = c;
                out.push(y);
            }
        }
        out
    }

    /// `Σ_i (arity_i − 1)`.
    pub fn neighbor_count(&self) -> usize {
        self.discrete.iter().map(|v| v.arity - 1).sum()
    }

    /// Space where every discrete variable is relaxed to a continuous one
    /// spanning its category indices `[0, arity − 1]`.
    pub fn relaxed(&self) -> SpaceSpec {
        let continuous = self
            .discrete
            .iter()
            .map(|v| ContinuousVar {
                name: v.name.clone(),
                lower: 0.0,
                upper: (v.arity - 1) as f64,
            })
            .chain(self.continuous.iter().cloned())
            .collect();
        SpaceSpec::new(Vec::new(), continuous)
    }

    /// Maps a point of this space into [`relaxed`](Self::relaxed)
    /// coordinates.
    pub fn relax_point(&self, x: &HybridPoint) -> HybridPoint {
        let continuous = self
            .discrete
            .iter()
            .zip(&x.discrete)
            .map(|(v, &c)| 2.0 * c as f64 / (v.arity - 1) as f64 - 1.0)
            .chain(x.continuous.iter().copied())
            .collect();
        HybridPoint::new(Vec::new(), continuous)
    }

    /// Rounds a relaxed point back to the nearest valid category per
    /// discrete variable.
    pub fn round_relaxed(&self, relaxed: &HybridPoint) -> HybridPoint {
        let m = self.m();
        let discrete = self
            .discrete
            .iter()
            .zip(&relaxed.continuous[..m])
            .map(|(v, &u)| {
                let top = (v.arity - 1) as f64;
                let idx = ((u.clamp(-1.0, 1.0) + 1.0) * 0.5 * top).round();
                (idx.max(0.0) as usize).min(v.arity - 1)
            })
            .collect();
        let continuous = relaxed.continuous[m..]
            .iter()
            .map(|u| u.clamp(-1.0, 1.0))
            .collect();
        HybridPoint::new(discrete, continuous)
    }
}
