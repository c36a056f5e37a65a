//! The instantaneous marginal yield `g`, its derivatives and `G = ∫_0^x g`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numeric::{integrate_adaptive, linspace};

/// Knot spacing of the cached `G` table for rewards without a closed form.
const G_KNOT_STEP: f64 = 0.25;
const G_KNOT_COUNT: usize = 257;

/// Family of the marginal yield.
#[derive(Debug, Clone, PartialEq)]
pub enum RewardKind {
    /// `g(x) = x^α`, α ≥ 0.
    Power {
        /// Exponent.
        alpha: f64,
    },
    /// `g(x) = e^{-βx}`, β > 0.
    Exponential {
        /// Decay rate.
        beta: f64,
    },
    /// `g(x) = c`, c > 0.
    Constant {
        /// Level.
        c: f64,
    },
    /// `g(x) = N(x)/D(x)` with coefficients in ascending degree.
    Rational {
        /// Numerator coefficients.
        num: Vec<f64>,
        /// Denominator coefficients.
        den: Vec<f64>,
    },
    /// Natural cubic spline through tabulated values, extended linearly past
    /// the last knot. Derivatives carry the O(h²) interpolation error.
    Table {
        /// Abscissae, starting at 0 and strictly increasing.
        x: Vec<f64>,
        /// Values of g at the abscissae.
        g: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct Spline {
    x: Vec<f64>,
    // Per segment: value, slope, curvature/2, cubic coefficient.
    coef: Vec<[f64; 4]>,
    cum: Vec<f64>,
}

impl Spline {
    fn natural(x: &[f64], y: &[f64]) -> Self {
        let n = x.len();
        let mut m = alloc::vec![0.0; n];
        if n > 2 {
            // Thomas algorithm for the interior second derivatives.
            let k = n - 2;
            let mut diag = alloc::vec![0.0; k];
            let mut rhs = alloc::vec![0.0; k];
            let mut sup = alloc::vec![0.0; k];
            for i in 0..k {
                let h0 = x[i + 1] - x[i];
                let h1 = x[i + 2] - x[i + 1];
                diag[i] = 2.0 * (h0 + h1);
                sup[i] = h1;
                rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h1 - (y[i + 1] - y[i]) / h0);
            }
            for i in 1..k {
                let h = x[i + 1] - x[i];
                let w = h / diag[i - 1];
                diag[i] -= w * sup[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - sup[i] * m[i + 2]) / diag[i];
            }
        }
        let mut coef = Vec::with_capacity(n - 1);
        let mut cum = Vec::with_capacity(n);
        cum.push(0.0);
        for i in 0..n - 1 {
            let h = x[i + 1] - x[i];
            let b = (y[i + 1] - y[i]) / h - h * (2.0 * m[i] + m[i + 1]) / 6.0;
            let c = m[i] / 2.0;
            let d = (m[i + 1] - m[i]) / (6.0 * h);
            coef.push([y[i], b, c, d]);
            let seg = y[i] * h + b * h * h / 2.0 + c * h * h * h / 3.0 + d * h * h * h * h / 4.0;
            cum.push(cum[i] + seg);
        }
        Self { x: x.to_vec(), coef, cum }
    }

    fn segment(&self, x: f64) -> usize {
        let n = self.x.len();
        match self.x.binary_search_by(|k| k.total_cmp(&x)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    fn eval(&self, x: f64) -> (f64, f64, f64) {
        let last = self.x.len() - 1;
        if x > self.x[last] {
            let (v, d, _) = self.eval(self.x[last]);
            return (v + d * (x - self.x[last]), d, 0.0);
        }
        let i = self.segment(x);
        let t = x - self.x[i];
        let [a, b, c, d] = self.coef[i];
        (
            a + t * (b + t * (c + t * d)),
            b + t * (2.0 * c + 3.0 * d * t),
            2.0 * c + 6.0 * d * t,
        )
    }

    fn integral(&self, x: f64) -> f64 {
        let last = self.x.len() - 1;
        if x > self.x[last] {
            let (v, d, _) = self.eval(self.x[last]);
            let t = x - self.x[last];
            return self.cum[last] + v * t + d * t * t / 2.0;
        }
        let i = self.segment(x);
        let t = x - self.x[i];
        let [a, b, c, d] = self.coef[i];
        self.cum[i] + t * (a + t * (b / 2.0 + t * (c / 3.0 + t * d / 4.0)))
    }
}

/// Marginal yield `g` together with `g′`, `g″` and `G`.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardFunction {
    kind: RewardKind,
    scale: f64,
    spline: Option<Spline>,
    // G at multiples of G_KNOT_STEP for the rational kind.
    g_knots: Vec<f64>,
}

/// Numerical check of `g(z) e^{-Φz} → 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthCheck {
    /// Points `z_k = 10k/Φ`, k = 1..5.
    pub points: [f64; 5],
    /// `g(z_k) e^{-Φ z_k}`.
    pub ratios: [f64; 5],
    /// True when the ratios strictly decrease.
    pub passes: bool,
}

fn poly3(c: &[f64], x: f64) -> (f64, f64, f64) {
    let (mut p, mut d1, mut d2) = (0.0, 0.0, 0.0);
    for &a in c.iter().rev() {
        d2 = d2 * x + 2.0 * d1;
        d1 = d1 * x + p;
        p = p * x + a;
    }
    (p, d1, d2)
}

impl RewardFunction {
    /// Validates parameters; for the rational kind also checks that `g > 0`
    /// on a sample of (0, 50] and precomputes the `G` knot table.
    pub fn new(kind: RewardKind) -> Result<Self> {
        let mut spline = None;
        match &kind {
            RewardKind::Power { alpha } if !(*alpha >= 0.0 && alpha.is_finite()) => {
                return Err(Error::InvalidReward(format!("power exponent must be >= 0, got {alpha}")));
            }
            RewardKind::Exponential { beta } if !(*beta > 0.0 && beta.is_finite()) => {
                return Err(Error::InvalidReward(format!("decay rate must be > 0, got {beta}")));
            }
            RewardKind::Constant { c } if !(*c > 0.0 && c.is_finite()) => {
                return Err(Error::InvalidReward(format!("constant must be > 0, got {c}")));
            }
            RewardKind::Rational { num, den } => {
                if num.is_empty() || den.is_empty() || den.iter().all(|&d| d == 0.0) {
                    return Err(Error::InvalidReward("rational reward needs non-zero coefficients".into()));
                }
                if num.iter().chain(den).any(|c| !c.is_finite()) {
                    return Err(Error::InvalidReward("rational coefficients must be finite".into()));
                }
            }
            RewardKind::Table { x, g } => {
                if x.len() < 2 || x.len() != g.len() {
                    return Err(Error::InvalidReward("table needs >= 2 matching (x, g) pairs".into()));
                }
                if x[0] != 0.0 || x.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::InvalidReward("table abscissae must start at 0 and increase".into()));
                }
                if g.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || g[1..].contains(&0.0) {
                    return Err(Error::InvalidReward("table values must be positive".into()));
                }
                spline = Some(Spline::natural(x, g));
            }
            _ => {}
        }
        let mut r = Self { kind, scale: 1.0, spline, g_knots: Vec::new() };
        if matches!(r.kind, RewardKind::Rational { .. }) {
            for x in linspace(0.0, 50.0, 2001).into_iter().skip(1) {
                match r.g_eval(x) {
                    Ok((g, _, _)) if g > 0.0 => {}
                    Ok((g, _, _)) => {
                        return Err(Error::InvalidReward(format!("rational g not positive at x = {x}: {g}")))
                    }
                    Err(e) => return Err(e),
                }
            }
            let (gx, _, _) = r.triple(0.0);
            if !(gx >= 0.0) {
                return Err(Error::InvalidReward("rational g negative at 0".into()));
            }
            let mut knots = Vec::with_capacity(G_KNOT_COUNT);
            knots.push(0.0);
            for k in 1..G_KNOT_COUNT {
                let a = (k - 1) as f64 * G_KNOT_STEP;
                let piece = integrate_adaptive(|y| r.g(y), a, a + G_KNOT_STEP, 1e-15, 1e-14);
                knots.push(knots[k - 1] + piece);
            }
            r.g_knots = knots;
        }
        Ok(r)
    }

    /// The reward of the worked counterexample,
    /// `0.3x² / (0.5x³ - 0.32x + 0.2)`.
    pub fn reference_rational() -> Self {
        Self::new(RewardKind::Rational {
            num: alloc::vec![0.0, 0.0, 0.3],
            den: alloc::vec![0.2, -0.32, 0.0, 0.5],
        })
        .expect("reference reward is valid")
    }

    /// Same shape multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidReward(format!("scale must be > 0, got {c}")));
        }
        let mut r = self.clone();
        r.scale *= c;
        Ok(r)
    }

    /// Family and parameters.
    pub fn kind(&self) -> &RewardKind {
        &self.kind
    }

    /// Multiplier applied on top of the family.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `(g, g′, g″)` at `x`; `DomainError` when the rational denominator
    /// vanishes or `x < 0`.
    pub fn g_eval(&self, x: f64) -> Result<(f64, f64, f64)> {
        if !(x >= 0.0) {
            return Err(Error::DomainError(x));
        }
        if let RewardKind::Rational { den, .. } = &self.kind {
            let (d, _, _) = poly3(den, x);
            let size: f64 = den.iter().enumerate().map(|(i, c)| c.abs() * libm::pow(x, i as f64)).sum();
            if d.abs() <= 1e-14 * size {
                return Err(Error::DomainError(x));
            }
        }
        Ok(self.triple(x))
    }

    /// `(g, g′, g″)` without domain checks. Internal callers only evaluate
    /// where the reward was validated.
    pub fn triple(&self, x: f64) -> (f64, f64, f64) {
        let (g, g1, g2) = match &self.kind {
            RewardKind::Power { alpha } => {
                let a = *alpha;
                if a == 0.0 {
                    (1.0, 0.0, 0.0)
                } else {
                    let g = libm::pow(x, a);
                    let g1 = if a == 1.0 { 1.0 } else { a * libm::pow(x, a - 1.0) };
                    let g2 = match a {
                        1.0 => 0.0,
                        2.0 => 2.0,
                        _ => a * (a - 1.0) * libm::pow(x, a - 2.0),
                    };
                    (g, g1, g2)
                }
            }
            RewardKind::Exponential { beta } => {
                let e = libm::exp(-beta * x);
                (e, -beta * e, beta * beta * e)
            }
            RewardKind::Constant { c } => (*c, 0.0, 0.0),
            RewardKind::Rational { num, den } => {
                let (n, n1, n2) = poly3(num, x);
                let (d, d1, d2) = poly3(den, x);
                let g = n / d;
                let g1 = (n1 * d - n * d1) / (d * d);
                let g2 = (n2 - 2.0 * d1 * g1 - d2 * g) / d;
                (g, g1, g2)
            }
            RewardKind::Table { .. } => self.spline.as_ref().map(|s| s.eval(x)).unwrap_or((f64::NAN, f64::NAN, f64::NAN)),
        };
        (self.scale * g, self.scale * g1, self.scale * g2)
    }

    /// `g(x)`.
    pub fn g(&self, x: f64) -> f64 {
        self.triple(x).0
    }

    /// `G(x) = ∫_0^x g`; zero for `x <= 0`.
    pub fn integral(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return 0.0;
        }
        let base = match &self.kind {
            RewardKind::Power { alpha } => libm::pow(x, alpha + 1.0) / (alpha + 1.0),
            RewardKind::Exponential { beta } => -libm::expm1(-beta * x) / beta,
            RewardKind::Constant { c } => c * x,
            RewardKind::Table { .. } => self.spline.as_ref().map(|s| s.integral(x)).unwrap_or(f64::NAN),
            RewardKind::Rational { .. } => {
                let k = ((x / G_KNOT_STEP) as usize).min(G_KNOT_COUNT - 1);
                let a = k as f64 * G_KNOT_STEP;
                let unscaled = |y: f64| self.g(y) / self.scale;
                self.g_knots[k] + integrate_adaptive(unscaled, a, x, 1e-15, 1e-14)
            }
        };
        self.scale * base
    }

    /// Reward of an instantaneous push from `from` down to `to`:
    /// `G(from) - G(to)`.
    pub fn lump_reward(&self, from: f64, to: f64) -> Result<f64> {
        if !(from >= to) || to < 0.0 {
            return Err(Error::InvalidPush { from, to });
        }
        if from == to {
            return Ok(0.0);
        }
        Ok(self.integral(from) - self.integral(to))
    }

    /// Heuristic check of `g(z) = o(e^{Φz})` at `z = 10k/Φ`, k = 1..5.
    pub fn growth_check(&self, phi: f64) -> GrowthCheck {
        let mut points = [0.0; 5];
        let mut ratios = [0.0; 5];
        for k in 0..5 {
            let z = 10.0 * (k + 1) as f64 / phi;
            points[k] = z;
            ratios[k] = self.g(z) * libm::exp(-phi * z);
        }
        let passes = ratios.windows(2).all(|w| w[1] < w[0]) && ratios.iter().all(|r| r.is_finite());
        GrowthCheck { points, ratios, passes }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn power_triple() {
        let r = RewardFunction::new(RewardKind::Power { alpha: 2.0 }).unwrap();
        assert_eq!(r.g_eval(3.0).unwrap(), (9.0, 6.0, 2.0));
        let r1 = RewardFunction::new(RewardKind::Power { alpha: 1.0 }).unwrap();
        assert_eq!(r1.integral(2.0), 2.0);
        assert!((r1.lump_reward(2.0, 1.0).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn exponential_triple() {
        let r = RewardFunction::new(RewardKind::Exponential { beta: 1.0 }).unwrap();
        let e = libm::exp(-0.5);
        let (g, g1, g2) = r.g_eval(0.5).unwrap();
        assert!((g - e).abs() < 1e-16 && (g1 + e).abs() < 1e-16 && (g2 - e).abs() < 1e-16);
    }

    #[test]
    fn reference_rational_at_one() {
        let r = RewardFunction::reference_rational();
        let (g, _, _) = r.g_eval(1.0).unwrap();
        assert!((g - 0.3 / 0.38).abs() < 1e-15);
        assert!((g - 0.789_474).abs() < 1e-6);
        assert_eq!(r.g(0.0), 0.0);
        assert_eq!(r.integral(0.0), 0.0);
    }

    #[test]
    fn rational_derivatives_match_quotient_rule() {
        let r = RewardFunction::reference_rational();
        for x in [0.1, 0.9, 2.5, 7.0] {
            let (_, g1, g2) = r.triple(x);
            let h = 1e-4;
            let fd1 = (r.g(x + h) - r.g(x - h)) / (2.0 * h);
            let fd2 = (r.g(x + h) - 2.0 * r.g(x) + r.g(x - h)) / (h * h);
            assert!((g1 - fd1).abs() < 1e-7, "x = {x}");
            assert!((g2 - fd2).abs() < 1e-5, "x = {x}");
        }
    }

    #[test]
    fn domain_error_at_denominator_root() {
        // g = 1/(1 - x) has a pole at 1; construction rejects it.
        let bad = RewardFunction::new(RewardKind::Rational { num: vec![1.0], den: vec![1.0, -1.0] });
        assert!(bad.is_err());
        let r = RewardFunction::reference_rational();
        assert!(matches!(r.g_eval(-1.0), Err(Error::DomainError(_))));
    }

    #[test]
    fn lump_reward_rejects_upward_push() {
        let r = RewardFunction::reference_rational();
        assert!(matches!(r.lump_reward(1.0, 2.0), Err(Error::InvalidPush { .. })));
        assert_eq!(r.lump_reward(1.3, 1.3).unwrap(), 0.0);
    }

    #[test]
    fn table_reproduces_cubic_data_closely() {
        let xs = linspace(0.0, 5.0, 201);
        let gs: Vec<f64> = xs.iter().map(|x| 1.0 + x * x).collect();
        let r = RewardFunction::new(RewardKind::Table { x: xs, g: gs }).unwrap();
        let (g, g1, _) = r.triple(2.1);
        assert!((g - (1.0 + 2.1 * 2.1)).abs() < 1e-4);
        assert!((g1 - 4.2).abs() < 1e-3);
        assert!((r.integral(3.0) - (3.0 + 9.0)).abs() < 1e-3);
        // Linear continuation keeps G consistent with g beyond the table.
        let h = 1e-5;
        let fd = (r.integral(6.0 + h) - r.integral(6.0 - h)) / (2.0 * h);
        assert!((fd - r.g(6.0)).abs() < 1e-6);
    }

    #[test]
    fn scaling_multiplies_everything() {
        let r = RewardFunction::reference_rational();
        let s = r.scaled(3.0).unwrap();
        assert!((s.g(1.2) - 3.0 * r.g(1.2)).abs() < 1e-15);
        assert!((s.integral(2.0) - 3.0 * r.integral(2.0)).abs() < 1e-13);
    }

    #[test]
    fn growth_check_flags_fast_growth() {
        let slow = RewardFunction::new(RewardKind::Power { alpha: 2.0 }).unwrap();
        assert!(slow.growth_check(0.08).passes);
        let fast = RewardFunction::new(RewardKind::Exponential { beta: 1e-9 }).unwrap();
        assert!(fast.growth_check(0.08).passes);
    }
}
