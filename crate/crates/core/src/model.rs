//! The uncontrolled spectrally negative Lévy process and its Laplace exponent.
//!
//! Two families are supported: Brownian motion with drift, and a diffusion
//! (possibly with σ = 0) plus compound Poisson downward jumps whose sizes
//! follow a hyperexponential law. The jump density of the second family,
//! `λ Σ p_j α_j e^{-α_j z}`, is completely monotone, and `1/(ψ(θ) - q)` is a
//! rational function, so the scale function reduces to a finite sum of
//! exponentials over the real roots of `ψ(θ) = q`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numeric::bisect;

/// One exponential component of the jump-size law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phase {
    /// Mixture weight.
    pub p: f64,
    /// Exponential rate.
    pub alpha: f64,
}

/// Compound Poisson jumps with hyperexponential sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperExpJumps {
    lambda: f64,
    phases: Vec<Phase>,
}

impl HyperExpJumps {
    /// Validates weights (positive, summing to one) and rates (positive,
    /// pairwise separated by at least `1e-9` relative). Phases are stored
    /// sorted by rate.
    pub fn new(lambda: f64, mut phases: Vec<Phase>) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidModel(format!("jump intensity must be positive, got {lambda}")));
        }
        if phases.is_empty() {
            return Err(Error::InvalidModel("jump law needs at least one phase".into()));
        }
        for ph in &phases {
            if !(ph.p > 0.0 && ph.p.is_finite()) {
                return Err(Error::InvalidModel(format!("phase weight must be positive, got {}", ph.p)));
            }
            if !(ph.alpha > 0.0 && ph.alpha.is_finite()) {
                return Err(Error::InvalidModel(format!("phase rate must be positive, got {}", ph.alpha)));
            }
        }
        let total: f64 = phases.iter().map(|p| p.p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidModel(format!("phase weights sum to {total}, expected 1")));
        }
        phases.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
        for w in phases.windows(2) {
            if w[1].alpha - w[0].alpha < 1e-9 * w[1].alpha {
                return Err(Error::InvalidModel(format!(
                    "phase rates {} and {} are not distinct; merge them",
                    w[0].alpha, w[1].alpha
                )));
            }
        }
        Ok(Self { lambda, phases })
    }

    /// Jump intensity λ.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Phases sorted by increasing rate.
    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    /// Lévy density `ν(z) = λ Σ p_j α_j e^{-α_j z}` for `z > 0`.
    pub fn density(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        self.lambda
            * self
                .phases
                .iter()
                .map(|ph| ph.p * ph.alpha * libm::exp(-ph.alpha * z))
                .sum::<f64>()
    }
}

/// Parameters of the uncontrolled process plus the discount rate.
///
/// Immutable once built. The Laplace exponent is
/// `ψ(θ) = μθ + σ²θ²/2 + λ(Σ p_j α_j/(α_j + θ) - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyModel {
    mu: f64,
    sigma: f64,
    q: f64,
    jumps: Option<HyperExpJumps>,
}

impl LevyModel {
    /// Builds and validates a model.
    pub fn new(mu: f64, sigma: f64, q: f64, jumps: Option<HyperExpJumps>) -> Result<Self> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::InvalidModel(format!("discount rate must be positive, got {q}")));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidModel(format!("volatility must be non-negative, got {sigma}")));
        }
        if !mu.is_finite() {
            return Err(Error::InvalidModel("drift must be finite".into()));
        }
        if sigma == 0.0 {
            if jumps.is_none() {
                return Err(Error::InvalidModel(
                    "Brownian motion with drift needs sigma > 0".into(),
                ));
            }
            if mu <= 0.0 {
                return Err(Error::InvalidModel(
                    "with sigma = 0 the drift must be positive for non-monotone paths".into(),
                ));
            }
        }
        Ok(Self { mu, sigma, q, jumps })
    }

    /// Brownian motion with drift `μ`, volatility `σ > 0`.
    pub fn brownian(mu: f64, sigma: f64, q: f64) -> Result<Self> {
        Self::new(mu, sigma, q, None)
    }

    /// Drift μ.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Volatility σ.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Discount rate q.
    pub fn q(&self) -> f64 {
        self.q
    }

    /// Jump part, if any.
    pub fn jumps(&self) -> Option<&HyperExpJumps> {
        self.jumps.as_ref()
    }

    /// True when there is no jump part.
    pub fn is_brownian(&self) -> bool {
        self.jumps.is_none()
    }

    /// ψ(θ). Defined for every θ except the poles `-α_j`.
    pub fn laplace_exponent(&self, theta: f64) -> f64 {
        let mut v = self.mu * theta + 0.5 * self.sigma * self.sigma * theta * theta;
        if let Some(j) = &self.jumps {
            let s: f64 = j.phases.iter().map(|ph| ph.p * ph.alpha / (ph.alpha + theta)).sum();
            v += j.lambda * (s - 1.0);
        }
        v
    }

    /// ψ′(θ).
    pub fn laplace_exponent_d1(&self, theta: f64) -> f64 {
        let mut v = self.mu + self.sigma * self.sigma * theta;
        if let Some(j) = &self.jumps {
            let s: f64 = j
                .phases
                .iter()
                .map(|ph| {
                    let d = ph.alpha + theta;
                    ph.p * ph.alpha / (d * d)
                })
                .sum();
            v -= j.lambda * s;
        }
        v
    }

    /// Brownian constants `(D, Φ(q), ζ₁)` with `D = √(μ² + 2qσ²)`, computed
    /// without cancellation.
    pub(crate) fn brownian_constants(&self) -> (f64, f64, f64) {
        let s2 = self.sigma * self.sigma;
        let d = libm::sqrt(self.mu * self.mu + 2.0 * self.q * s2);
        let (phi, zeta) = if self.mu >= 0.0 {
            (2.0 * self.q / (d + self.mu), (d + self.mu) / s2)
        } else {
            ((d - self.mu) / s2, 2.0 * self.q / (d - self.mu))
        };
        (d, phi, zeta)
    }

    /// Φ(q), the largest root of ψ(θ) = q.
    pub fn phi_q(&self) -> Result<f64> {
        if self.is_brownian() {
            return Ok(self.brownian_constants().1);
        }
        let f = |t: f64| self.laplace_exponent(t) - self.q;
        let mut hi = 1.0;
        let mut n = 0;
        while f(hi) <= 0.0 {
            hi *= 2.0;
            n += 1;
            if n > 1100 {
                return Err(Error::ConvergenceFailure("phi_q: no upper bracket"));
            }
        }
        let root = bisect(f, 0.0, hi, 1e-14)?;
        Ok(self.polish(root, 0.0, hi))
    }

    /// All real roots of ψ(θ) = q in ascending order.
    ///
    /// With `m` phases there are `m + 2` roots when σ > 0 and `m + 1`
    /// when σ = 0. Exactly one is positive; the negative ones interlace
    /// with the poles `-α_j`.
    pub fn psi_roots(&self) -> Result<Vec<f64>> {
        let Some(jumps) = &self.jumps else {
            let (_, phi, zeta) = self.brownian_constants();
            return Ok(alloc::vec![-zeta, phi]);
        };
        let f = |t: f64| self.laplace_exponent(t) - self.q;
        let alphas: Vec<f64> = jumps.phases.iter().map(|p| p.alpha).collect();
        let m = alphas.len();
        let mut roots = Vec::with_capacity(m + 2);

        if self.sigma > 0.0 {
            let a = alphas[m - 1];
            let hi = -a * (1.0 + 1e-12);
            let mut lo = -a - 1.0;
            let mut n = 0;
            while f(lo) <= 0.0 {
                lo = -a - 2.0 * (-a - lo);
                n += 1;
                if n > 1100 {
                    return Err(Error::ConvergenceFailure("psi_roots: no lower bracket"));
                }
            }
            roots.push(self.bracketed_root(lo, hi)?);
        }
        for j in (0..m.saturating_sub(1)).rev() {
            let left = -alphas[j + 1];
            let right = -alphas[j];
            let gap = right - left;
            let lo = left + 1e-12 * gap;
            let hi = right - 1e-12 * gap;
            roots.push(self.bracketed_root(lo, hi)?);
        }
        {
            let left = -alphas[0];
            let lo = left * (1.0 - 1e-12);
            let hi = 0.0;
            roots.push(self.bracketed_root(lo, hi)?);
        }
        roots.push(self.phi_q()?);
        Ok(roots)
    }

    fn bracketed_root(&self, lo: f64, hi: f64) -> Result<f64> {
        let f = |t: f64| self.laplace_exponent(t) - self.q;
        let (flo, fhi) = (f(lo), f(hi));
        if !(flo > 0.0 && fhi < 0.0) {
            return Err(Error::DegenerateModel(format!(
                "no sign change of psi - q on ({lo}, {hi}); jump rates too close"
            )));
        }
        let r = bisect(f, lo, hi, 1e-14)?;
        Ok(self.polish(r, lo, hi))
    }

    // One Newton step, kept only if it stays in the bracket and lowers the residual.
    fn polish(&self, t: f64, lo: f64, hi: f64) -> f64 {
        let r0 = self.laplace_exponent(t) - self.q;
        let d = self.laplace_exponent_d1(t);
        if d == 0.0 || !d.is_finite() {
            return t;
        }
        let t1 = t - r0 / d;
        if t1 > lo && t1 < hi {
            let r1 = self.laplace_exponent(t1) - self.q;
            if r1.abs() < r0.abs() {
                return t1;
            }
        }
        t
    }
}
