//! The Barenblatt self-similar solution of `u_t = Lap u^m`, used as an
//! exact-solution oracle for the implicit solver.
//!
//! ```text
//! u(x, t) = t^{-a} [xi0^2 - k |x|^2 t^{-2b}]_+^{1/(m-1)}
//! a = n b,  b = 1 / (n (m - 1) + 2),  k = (m - 1) b / (2 m)
//! ```
//!
//! `xi0` is fixed by requiring the profile to carry total mass `M`:
//! `xi0 = [M k^{n/2} / (w_n I)]^{(m-1) b}` with `w_n` the measure of the unit
//! sphere (`2` for `n = 1`, `2 pi` for `n = 2`) and
//! `I = int_0^1 (1 - y^2)^{1/(m-1)} y^{n-1} dy`.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::field::{GridSpec, ScalarField};
use crate::power::PowerLaw;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Barenblatt {
    law: PowerLaw,
    dim: usize,
    mass: f64,
    xi0: f64,
    k: f64,
    b: f64,
}

impl Barenblatt {
    pub fn new(law: PowerLaw, dim: usize, mass: f64) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::Domain(format!("Barenblatt dimension must be 1 or 2, got {dim}")));
        }
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::Domain(format!("Barenblatt mass must be positive, got {mass}")));
        }
        let m = law.m();
        let nd = dim as f64;
        let b = 1.0 / (nd * (m - 1.0) + 2.0);
        let k = (m - 1.0) * b / (2.0 * m);
        let sphere = if dim == 1 { 2.0 } else { 2.0 * PI };
        let integral = profile_integral(m, dim);
        let xi0 = (mass * k.powf(nd / 2.0) / (sphere * integral)).powf((m - 1.0) * b);
        Ok(Self { law, dim, mass, xi0, k, b })
    }

    pub fn xi0(&self) -> f64 {
        self.xi0
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn law(&self) -> PowerLaw {
        self.law
    }

    /// Radius of the support at time `t`.
    pub fn support_radius(&self, t: f64) -> f64 {
        (self.xi0 * self.xi0 / self.k).sqrt() * t.powf(self.b)
    }

    /// Value at squared distance `r2` from the origin.
    pub fn eval_r2(&self, r2: f64, t: f64) -> f64 {
        let m = self.law.m();
        let bracket = self.xi0 * self.xi0 - self.k * r2 * t.powf(-2.0 * self.b);
        if bracket <= 0.0 {
            return 0.0;
        }
        t.powf(-(self.dim as f64) * self.b) * bracket.powf(1.0 / (m - 1.0))
    }

    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        let r2: f64 = x.iter().map(|c| c * c).sum();
        self.eval_r2(r2, t)
    }

    /// The two-dimensional profile sampled at cell centres.
    pub fn field(&self, grid: GridSpec, t: f64) -> ScalarField {
        ScalarField::from_fn(grid, |x, y| self.eval_r2(x * x + y * y, t))
    }
}

/// Evaluates the Barenblatt profile of mass `mass` at point `x` and time `t`.
pub fn barenblatt_eval(x: &[f64], t: f64, law: &PowerLaw, n_dim: usize, mass: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("Barenblatt time must be positive, got {t}")));
    }
    if x.len() != n_dim {
        return Err(Error::Domain(format!("point has {} coordinates, expected {n_dim}", x.len())));
    }
    Ok(Barenblatt::new(*law, n_dim, mass)?.eval(x, t))
}

/// `int_0^1 (1 - y^2)^{1/(m-1)} y^{n-1} dy`, integrated in `y = sin(theta)`
/// where the endpoint behaviour is milder.
pub fn profile_integral(m: f64, dim: usize) -> f64 {
    let a = 1.0 / (m - 1.0);
    let e = dim as i32 - 1;
    let f = |th: f64| {
        let c = th.cos();
        c.powf(2.0 * a + 1.0) * th.sin().powi(e)
    };
    adaptive_simpson(&f, 0.0, FRAC_PI_2, 1e-13)
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 48)
}
