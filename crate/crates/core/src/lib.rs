//! Numerical laboratory for the plane-wave p-curl evolution system, its
//! porous-medium reduction, and the obstacle-problem description of the
//! large-exponent (Bean critical-state) limit.

pub mod barenblatt;
pub mod curl;
pub mod data;
pub mod error;
pub mod field;
pub mod forcing;
pub mod lab;
pub mod linalg;
pub mod obstacle;
pub mod pme;
pub mod power;

pub use barenblatt::{barenblatt_eval, Barenblatt};
pub use curl::{current_density, curl_solve, curl_step, energy_budget, resistivity_coeff, vi_residual, CurlConfig, CurlProblem, CurlSolution};
pub use error::{Error, Result};
pub use field::{curl_z, divergence, from_stream, laplacian5, norms, GridSpec, Norms, ScalarField, VectorField2};
pub use forcing::{Forcing, ScalarForcing, VectorForcing};
pub use obstacle::{collapse_profile, mesa_profile, psor_solve, radial_obstacle_oracle, MesaProfile, ObstacleData, PsorOptions, RadialProfile, ViSolution};
pub use pme::{mass_balance_residual, pme_solve, pme_step, pressure_field, PmeConfig, PmeProblem, PmeSolution};
pub use power::{psi, psi_inv, psi_prime, PowerLaw};
