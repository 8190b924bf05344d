//! Time-sampled source terms: the scalar `g(x, t)` of the porous-medium
//! equation and the vector `F(x, t)` of the curl system.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{GridSpec, ScalarField, VectorField2};

/// Minimal linear structure needed to interpolate and integrate samples.
pub trait GridValued: Clone {
    fn zeros_on(grid: GridSpec) -> Self;
    fn grid_of(&self) -> GridSpec;
    /// `self + a * other`
    fn plus_scaled(&self, a: f64, other: &Self) -> Self;
}

impl GridValued for ScalarField {
    fn zeros_on(grid: GridSpec) -> Self {
        ScalarField::zeros(grid)
    }
    fn grid_of(&self) -> GridSpec {
        *self.grid()
    }
    fn plus_scaled(&self, a: f64, other: &Self) -> Self {
        self.axpy(a, other)
    }
}

impl GridValued for VectorField2 {
    fn zeros_on(grid: GridSpec) -> Self {
        VectorField2::zeros(grid)
    }
    fn grid_of(&self) -> GridSpec {
        *self.grid()
    }
    fn plus_scaled(&self, a: f64, other: &Self) -> Self {
        self.axpy(a, other)
    }
}

/// A source given by samples in time, linearly interpolated between them
/// and held constant outside the sampled window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Forcing<T> {
    Zero(GridSpec),
    Steady(T),
    Samples(Vec<(f64, T)>),
}

pub type ScalarForcing = Forcing<ScalarField>;
pub type VectorForcing = Forcing<VectorField2>;

impl<T: GridValued> Forcing<T> {
    pub fn samples(samples: Vec<(f64, T)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Domain("forcing needs at least one sample".into()));
        }
        if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Domain("forcing sample times must increase strictly".into()));
        }
        let grid = samples[0].1.grid_of();
        if samples.iter().any(|(_, f)| f.grid_of() != grid) {
            return Err(Error::Domain("forcing samples live on different grids".into()));
        }
        Ok(Forcing::Samples(samples))
    }

    pub fn grid(&self) -> GridSpec {
        match self {
            Forcing::Zero(g) => *g,
            Forcing::Steady(f) => f.grid_of(),
            Forcing::Samples(s) => s[0].1.grid_of(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Forcing::Zero(_))
    }

    /// Every distinct field the forcing can take (used for support checks).
    pub fn sample_fields(&self) -> Vec<&T> {
        match self {
            Forcing::Zero(_) => Vec::new(),
            Forcing::Steady(f) => vec![f],
            Forcing::Samples(s) => s.iter().map(|(_, f)| f).collect(),
        }
    }

    pub fn at(&self, t: f64) -> T {
        match self {
            Forcing::Zero(g) => T::zeros_on(*g),
            Forcing::Steady(f) => f.clone(),
            Forcing::Samples(s) => {
                if t <= s[0].0 {
                    return s[0].1.clone();
                }
                let last = s.len() - 1;
                if t >= s[last].0 {
                    return s[last].1.clone();
                }
                let k = s.partition_point(|(ts, _)| *ts <= t) - 1;
                let (t0, f0) = &s[k];
                let (t1, f1) = &s[k + 1];
                let theta = (t - t0) / (t1 - t0);
                f0.plus_scaled(-theta, f0).plus_scaled(theta, f1)
            }
        }
    }

    /// `int_0^t F(tau) d tau` by the trapezoidal rule over the samples.
    pub fn accumulated(&self, t: f64) -> T {
        match self {
            Forcing::Zero(g) => T::zeros_on(*g),
            Forcing::Steady(f) => T::zeros_on(f.grid_of()).plus_scaled(t, f),
            Forcing::Samples(_) if t <= 0.0 => T::zeros_on(self.grid()),
            Forcing::Samples(_) => {
                let mut nodes: Vec<f64> = vec![0.0];
                if let Forcing::Samples(s) = self {
                    nodes.extend(s.iter().map(|(ts, _)| *ts).filter(|&ts| ts > 0.0 && ts < t));
                }
                nodes.push(t);
                let mut acc = T::zeros_on(self.grid());
                let mut prev = self.at(nodes[0]);
                for w in nodes.windows(2) {
                    let next = self.at(w[1]);
                    let half = 0.5 * (w[1] - w[0]);
                    acc = acc.plus_scaled(half, &prev).plus_scaled(half, &next);
                    prev = next;
                }
                acc
            }
        }
    }
}
