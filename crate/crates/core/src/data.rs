//! Data generators: radial profiles for initial data and sources, stream
//! potentials for divergence-free fields, random admissible test fields.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::field::{curl_z, from_stream, GridSpec, ScalarField, VectorField2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Radial {
    Zero,
    /// `height (1 - r^2/R^2)_+^3`.
    Bump { height: f64, radius: f64 },
    /// `height` on `r <= inner`, then a C^1 decay reaching zero at `outer`.
    FlatTop { height: f64, inner: f64, outer: f64 },
    /// `height` on `r < radius`, zero outside.
    Disk { height: f64, radius: f64 },
}

impl Radial {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            Radial::Zero => 0.0,
            Radial::Bump { height, radius } => {
                let s = 1.0 - (r * r) / (radius * radius);
                if s > 0.0 { height * s * s * s } else { 0.0 }
            }
            Radial::FlatTop { height, inner, outer } => {
                if r <= inner {
                    height
                } else if r < outer {
                    let s = (r - inner) / (outer - inner);
                    height * (1.0 - s * s).powi(2)
                } else {
                    0.0
                }
            }
            Radial::Disk { height, radius } => {
                if r < radius { height } else { 0.0 }
            }
        }
    }

    pub fn support_radius(&self) -> f64 {
        match *self {
            Radial::Zero => 0.0,
            Radial::Bump { radius, .. } | Radial::Disk { radius, .. } => radius,
            Radial::FlatTop { outer, .. } => outer,
        }
    }

    pub fn peak(&self) -> f64 {
        self.eval(0.0)
    }

    pub fn field(&self, grid: GridSpec) -> ScalarField {
        self.field_at(grid, 0.0, 0.0)
    }

    pub fn field_at(&self, grid: GridSpec, cx: f64, cy: f64) -> ScalarField {
        ScalarField::from_fn(grid, |x, y| self.eval(((x - cx).powi(2) + (y - cy).powi(2)).sqrt()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Stream {
    Zero,
    /// `amplitude (1 - r^2/R^2)_+^4`.
    Bump { amplitude: f64, radius: f64 },
    /// `amplitude exp(-r^2 / (2 sigma^2))`, cut to zero beyond `cutoff`.
    Gaussian { amplitude: f64, sigma: f64, cutoff: f64 },
}

impl Stream {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            Stream::Zero => 0.0,
            Stream::Bump { amplitude, radius } => {
                let s = 1.0 - (r * r) / (radius * radius);
                if s > 0.0 { amplitude * s.powi(4) } else { 0.0 }
            }
            Stream::Gaussian { amplitude, sigma, cutoff } => {
                if r < cutoff { amplitude * (-(r * r) / (2.0 * sigma * sigma)).exp() } else { 0.0 }
            }
        }
    }

    /// Exact `-Lap phi` of the continuum potential (for two-path checks).
    pub fn minus_laplacian(&self, r: f64) -> f64 {
        match *self {
            Stream::Zero => 0.0,
            Stream::Bump { amplitude, radius } => {
                // phi = A s^4, s = 1 - r^2/R^2: Lap phi = A (48 r^2 s^2 / R^4 - 16 s^3 / R^2)
                let r2 = radius * radius;
                let s = 1.0 - r * r / r2;
                if s > 0.0 { -amplitude * (48.0 * r * r * s * s / (r2 * r2) - 16.0 * s.powi(3) / r2) } else { 0.0 }
            }
            Stream::Gaussian { amplitude, sigma, cutoff } => {
                if r < cutoff {
                    let s2 = sigma * sigma;
                    let e = amplitude * (-(r * r) / (2.0 * s2)).exp();
                    -e * (r * r / (s2 * s2) - 2.0 / s2)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn potential(&self, grid: GridSpec) -> ScalarField {
        ScalarField::from_fn(grid, |x, y| self.eval((x * x + y * y).sqrt()))
    }

    /// The divergence-free field `from_stream(potential)`.
    pub fn field(&self, grid: GridSpec) -> VectorField2 {
        from_stream(&self.potential(grid))
    }
}

/// Rescales `phi` so the curl of `from_stream(phi)` peaks at `target`.
/// A potential with zero curl is returned unchanged.
pub fn normalize_stream(phi: &ScalarField, target: f64) -> ScalarField {
    let peak = curl_z(&from_stream(phi)).max_abs();
    if peak == 0.0 { phi.clone() } else { phi.scale(target / peak) }
}

/// `count` random divergence-free fields with `|curl|_inf <= 1`, each a sum
/// of a few stream bumps centred within `spread` of the origin. Seeded, so
/// identical arguments give identical fields.
pub fn random_admissible_fields(grid: GridSpec, count: usize, seed: u64, spread: f64) -> Vec<VectorField2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let lobes = rng.gen_range(2..=5);
            let params: Vec<(f64, f64, f64, f64)> = (0..lobes)
                .map(|_| {
                    let radius = rng.gen_range(0.25 * spread..0.6 * spread);
                    let reach = spread - radius;
                    let cx = rng.gen_range(-reach..reach) / std::f64::consts::SQRT_2;
                    let cy = rng.gen_range(-reach..reach) / std::f64::consts::SQRT_2;
                    (cx, cy, radius, rng.gen_range(-1.0..1.0))
                })
                .collect();
            let phi = ScalarField::from_fn(grid, |x, y| {
                params
                    .iter()
                    .map(|&(cx, cy, radius, amp)| {
                        Stream::Bump { amplitude: amp, radius }.eval(((x - cx).powi(2) + (y - cy).powi(2)).sqrt())
                    })
                    .sum()
            });
            let level = rng.gen_range(0.3..1.0);
            from_stream(&normalize_stream(&phi, level))
        })
        .collect()
}
