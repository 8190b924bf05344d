//! The odd power nonlinearity `psi_m(s) = sign(s) |s|^m`, with `m = p - 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    m: f64,
}

impl PowerLaw {
    pub fn new(m: f64) -> Result<Self> {
        if !(m.is_finite() && m > 1.0) {
            return Err(Error::Domain(format!("power-law exponent must exceed 1, got {m}")));
        }
        Ok(Self { m })
    }

    /// The law `psi_{p-1}` belonging to the curl exponent `p > 2`.
    pub fn from_curl_exponent(p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 2.0) {
            return Err(Error::Domain(format!("curl exponent must exceed 2, got {p}")));
        }
        Self::new(p - 1.0)
    }

    #[inline]
    pub fn m(&self) -> f64 {
        self.m
    }

    #[inline]
    pub fn psi(&self, s: f64) -> f64 {
        psi(s, self)
    }

    #[inline]
    pub fn psi_inv(&self, v: f64) -> f64 {
        psi_inv(v, self)
    }

    #[inline]
    pub fn psi_prime(&self, s: f64) -> f64 {
        psi_prime(s, self)
    }
}

#[inline]
pub fn psi(s: f64, law: &PowerLaw) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s.signum() * s.abs().powf(law.m)
    }
}

#[inline]
pub fn psi_inv(v: f64, law: &PowerLaw) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v.signum() * v.abs().powf(1.0 / law.m)
    }
}

#[inline]
pub fn psi_prime(s: f64, law: &PowerLaw) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        law.m * s.abs().powf(law.m - 1.0)
    }
}
