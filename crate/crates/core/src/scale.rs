//! q-scale functions `W^(q)`, `Z^(q)` and their derivatives.
//!
//! For both supported model families `W(x) = Σ_i A_i e^{θ_i x}` over the
//! real roots `θ_i` of `ψ(θ) = q`, with `A_i = 1/ψ′(θ_i)`. Small arguments
//! go through `expm1` so that `W(0+) = 0` (σ > 0) comes out exactly;
//! large arguments are evaluated in the factored form
//! `e^{Φx}(A_Φ + Σ A_i e^{(θ_i - Φ)x})`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::LevyModel;
use crate::numeric::bisect;

/// Largest exponent evaluated before reporting overflow.
pub const OVERFLOW_EXPONENT: f64 = 700.0;

/// Scale-function evaluator bound to one model.
#[derive(Debug, Clone)]
pub struct ScaleFunctions {
    model: LevyModel,
    // (θ_i, A_i), with the Φ(q) entry last.
    terms: Vec<(f64, f64)>,
    phi: f64,
    zeta1: Option<f64>,
    w0: f64,
    astar: f64,
}

impl ScaleFunctions {
    /// Finds the roots of `ψ = q`, the expansion coefficients and a*.
    pub fn new(model: &LevyModel) -> Result<Self> {
        let (terms, zeta1) = if model.is_brownian() {
            let (d, phi, zeta) = model.brownian_constants();
            (alloc::vec![(-zeta, -1.0 / d), (phi, 1.0 / d)], Some(zeta))
        } else {
            let roots = model.psi_roots()?;
            let terms = roots
                .iter()
                .map(|&t| (t, 1.0 / model.laplace_exponent_d1(t)))
                .collect();
            (terms, None)
        };
        let phi = terms.last().map(|t| t.0).unwrap_or(0.0);
        if !(phi > 0.0) {
            return Err(Error::ConvergenceFailure("scale: Phi(q) not positive"));
        }
        // W(0) = 0 with a diffusion part, 1/μ for bounded variation.
        let w0 = if model.sigma() > 0.0 { 0.0 } else { 1.0 / model.mu() };
        let mut sf = Self { model: model.clone(), terms, phi, zeta1, w0, astar: 0.0 };
        sf.astar = sf.compute_a_star()?;
        Ok(sf)
    }

    /// The model these functions belong to.
    pub fn model(&self) -> &LevyModel {
        &self.model
    }

    /// Φ(q).
    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// ζ₁ (Brownian case only); `-ζ₁` is the negative root of ψ = q.
    pub fn zeta1(&self) -> Option<f64> {
        self.zeta1
    }

    /// Roots `θ_i` and coefficients `A_i = 1/ψ′(θ_i)`.
    pub fn terms(&self) -> &[(f64, f64)] {
        &self.terms
    }

    /// Minimizer of W′ on [0, ∞).
    pub fn a_star(&self) -> f64 {
        self.astar
    }

    fn sum_k(&self, x: f64, k: i32) -> f64 {
        if self.phi * x > OVERFLOW_EXPONENT {
            return f64::INFINITY;
        }
        let mut s = 0.0;
        for &(t, a) in &self.terms {
            s += a * libm::pow(t, k as f64) * libm::exp(t * x);
        }
        s
    }

    /// `W^(q)(x)`; zero for `x < 0`.
    pub fn w(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        if self.phi * x > OVERFLOW_EXPONENT {
            return f64::INFINITY;
        }
        let mut s = self.w0;
        for &(t, a) in &self.terms {
            s += a * libm::expm1(t * x);
        }
        s
    }

    /// Right derivative `W′(x)`; zero for `x < 0`.
    pub fn w1(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        self.sum_k(x, 1)
    }

    /// Right second derivative `W″(x)`; zero for `x < 0`.
    pub fn w2(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        self.sum_k(x, 2)
    }

    /// `Z^(q)(x) = 1 + q ∫_0^x W`; one for `x <= 0`.
    pub fn z(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        if self.phi * x > OVERFLOW_EXPONENT {
            return f64::INFINITY;
        }
        let q = self.model.q();
        let mut s = 1.0;
        for &(t, a) in &self.terms {
            s += q * a * libm::expm1(t * x) / t;
        }
        s
    }

    /// `e^{-Φx} W(x)`, finite for every `x >= 0`.
    pub fn w_scaled(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        if self.phi * x <= 1.0 {
            return self.w(x) * libm::exp(-self.phi * x);
        }
        let e = libm::exp(-self.phi * x);
        let mut s = self.w0 * e;
        for &(t, a) in &self.terms {
            s += a * (libm::exp((t - self.phi) * x) - e);
        }
        s
    }

    /// `e^{-Φx} W^{(k)}(x)` for `k = 1, 2`.
    pub fn wk_scaled(&self, x: f64, k: i32) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let mut s = 0.0;
        for &(t, a) in &self.terms {
            s += a * libm::pow(t, k as f64) * libm::exp((t - self.phi) * x);
        }
        s
    }

    /// `e^{-Φx} Z(x)`.
    pub fn z_scaled(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return libm::exp(-self.phi * x.max(0.0));
        }
        if self.phi * x <= 1.0 {
            return self.z(x) * libm::exp(-self.phi * x);
        }
        let q = self.model.q();
        let e = libm::exp(-self.phi * x);
        let mut s = e;
        for &(t, a) in &self.terms {
            s += q * a * (libm::exp((t - self.phi) * x) - e) / t;
        }
        s
    }

    /// Two-sided exit identities for `b <= x <= a`, `b < a`: the discounted
    /// probabilities of leaving `[b, a]` upwards and downwards.
    pub fn exit_probabilities(&self, x: f64, a: f64, b: f64) -> Result<(f64, f64)> {
        if !(b <= x && x <= a && b < a) {
            return Err(Error::InvalidInterval { x, a, b });
        }
        let (wx, wa) = (self.w_scaled(x - b), self.w_scaled(a - b));
        let up = wx / wa * libm::exp(self.phi * (x - a));
        let down = self.z(x - b) - self.z_scaled(a - b) * wx / wa * libm::exp(self.phi * (x - b));
        Ok((up.clamp(0.0, 1.0), down.clamp(0.0, 1.0)))
    }

    fn compute_a_star(&self) -> Result<f64> {
        if let Some(zeta) = self.zeta1 {
            return Ok(if zeta > self.phi {
                2.0 * libm::log(zeta / self.phi) / (self.phi + zeta)
            } else {
                0.0
            });
        }
        if self.w2(0.0) >= 0.0 {
            return Ok(0.0);
        }
        let mut hi = 1.0 / self.phi;
        let mut n = 0;
        while self.wk_scaled(hi, 2) <= 0.0 {
            hi *= 2.0;
            n += 1;
            if n > 200 {
                return Err(Error::ConvergenceFailure("a_star: W'' never turns positive"));
            }
        }
        bisect(|u| self.wk_scaled(u, 2), 0.0, hi, 1e-14)
    }
}
