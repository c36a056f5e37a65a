//! Numerical check of the variational inequality
//! `max{(L - q)V, g - V′} <= 0` and of smooth pasting at the barriers.

use alloc::vec::Vec;

use crate::model::LevyModel;
use crate::numeric::{linspace, GaussLaguerre, GaussLegendre};
use crate::one_barrier::default_upper;
use crate::value::ValueFunction;

/// Relative disagreement between the two quadrature orders that counts as
/// a warning.
const QUADRATURE_TOL: f64 = 1e-7;

/// `(L - q)` for one model, with the quadrature rules of its jump part.
#[derive(Debug, Clone)]
pub struct Generator {
    model: LevyModel,
    legendre: [GaussLegendre; 2],
    laguerre: [GaussLaguerre; 2],
}

/// Output of [`Generator::apply`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorValue {
    /// `(L - q)f(x)`.
    pub value: f64,
    /// The 64- and 128-node jump integrals disagreed.
    pub quadrature_warning: bool,
}

impl Generator {
    /// Builds the quadrature rules once; Brownian models never use them.
    pub fn new(model: &LevyModel) -> Self {
        Self {
            model: model.clone(),
            legendre: [GaussLegendre::new(64), GaussLegendre::new(128)],
            laguerre: [GaussLaguerre::new(64), GaussLaguerre::new(128)],
        }
    }

    /// The model.
    pub fn model(&self) -> &LevyModel {
        &self.model
    }

    /// `σ²f″/2 + μf′ - qf + ∫(f(x-z) - f(x))ν(dz)` at `x`.
    ///
    /// `triple` is `(f, f′, f″)` at `x`; `f` itself is only called for the
    /// jump integral, and must already include its extension below zero.
    /// `breaks` lists points where `f` is not smooth, so that the integral
    /// over `[0, x]` is split there.
    pub fn apply<F: Fn(f64) -> f64>(&self, f: F, triple: (f64, f64, f64), x: f64, breaks: &[f64]) -> GeneratorValue {
        let m = &self.model;
        let (v, d1, d2) = triple;
        let local = m.sigma() * m.sigma() / 2.0 * d2 + m.mu() * d1 - m.q() * v;
        let Some(jumps) = m.jumps() else {
            return GeneratorValue { value: local, quadrature_warning: false };
        };
        let mut cuts = Vec::with_capacity(breaks.len() + 2);
        cuts.push(0.0);
        cuts.extend(breaks.iter().copied().filter(|&b| b > 0.0 && b < x));
        cuts.push(x.max(0.0));
        let mut est = [0.0; 2];
        for (slot, (gl, lag)) in self.legendre.iter().zip(&self.laguerre).enumerate() {
            let mut total = 0.0;
            for ph in jumps.phases() {
                let a = ph.alpha;
                let mut body = 0.0;
                for w in cuts.windows(2) {
                    if w[1] > w[0] {
                        body += gl.integrate(|y| f(y) * libm::exp(-a * (x - y)), w[0], w[1]);
                    }
                }
                let tail = libm::exp(-a * x.max(0.0)) * lag.integrate(|t| f(x.min(0.0) - t / a)) / a;
                total += ph.p * a * (body + tail);
            }
            est[slot] = jumps.lambda() * (total - v);
        }
        let warn = (est[0] - est[1]).abs() > QUADRATURE_TOL * (1.0 + est[1].abs());
        GeneratorValue { value: local + est[1], quadrature_warning: warn }
    }
}

/// `(L - q)` applied at `x` to a function given by its triple there.
pub fn apply_generator<F: Fn(f64) -> f64>(
    generator: &Generator,
    f: F,
    triple: (f64, f64, f64),
    x: f64,
    breaks: &[f64],
) -> GeneratorValue {
    generator.apply(f, triple, x, breaks)
}

/// Where and how densely to check.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    /// Right end; `None` means `max(3 b_last, 2U)` with U the default
    /// one-barrier search limit.
    pub upper: Option<f64>,
    /// Number of equally spaced points on `[0, upper]`.
    pub points: usize,
    /// Absolute tolerance; `None` means `1e-7 (1 + max|V|)`.
    pub tol: Option<f64>,
    /// Half-width of the neighborhood of each barrier left out of the
    /// generator residual.
    pub exclusion: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { upper: None, points: 10_000, tol: None, exclusion: 1e-6 }
    }
}

/// Left/right mismatch of `V`, `V′`, `V″` at one barrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PastingGap {
    /// Barrier index, starting at 0 for `b_1`.
    pub index: usize,
    /// Barrier level.
    pub level: f64,
    /// `|V(b+) - V(b-)|`.
    pub gap_v: f64,
    /// `|V′(b+) - V′(b-)|`.
    pub gap_d1: f64,
    /// `|V″(b+) - V″(b-)|`.
    pub gap_d2: f64,
    /// Whether `C²` is required (odd barriers `b_1, b_3, …`).
    pub requires_c2: bool,
    /// `V` continuous within `1e-9 (1 + |V|)`.
    pub c0_ok: bool,
    /// `V′` continuous within `1e-8 (1 + |V′|)`.
    pub c1_ok: bool,
    /// `V″` continuous within `1e-8 (1 + |V″|)`.
    pub c2_ok: bool,
}

impl PastingGap {
    /// All required classes hold.
    pub fn passes(&self) -> bool {
        self.c0_ok && self.c1_ok && (!self.requires_c2 || self.c2_ok)
    }
}

/// Result of [`check_hjb`].
#[derive(Debug, Clone, PartialEq)]
pub struct HjbReport {
    /// Abscissae.
    pub grid: Vec<f64>,
    /// `(L - q)V`; NaN where excluded.
    pub residual_gen: Vec<f64>,
    /// `g - V′`; NaN at 0.
    pub residual_grad: Vec<f64>,
    /// Largest generator residual.
    pub max_violation_gen: f64,
    /// Where it occurs.
    pub argmax_gen: f64,
    /// Largest gradient residual.
    pub max_violation_grad: f64,
    /// Where it occurs.
    pub argmax_grad: f64,
    /// Per-barrier pasting gaps; a barrier at 0 has no left side and is
    /// left out.
    pub pasting: Vec<PastingGap>,
    /// Tolerance applied to both residuals.
    pub tol: f64,
    /// Grid points whose jump integral was flagged.
    pub quadrature_warnings: usize,
    /// Both residuals within `tol` and every pasting class satisfied.
    pub verdict: bool,
}

fn argmax(grid: &[f64], vals: &[f64]) -> (f64, f64) {
    let mut best = (f64::NEG_INFINITY, f64::NAN);
    for (&x, &v) in grid.iter().zip(vals) {
        if v > best.0 {
            best = (v, x);
        }
    }
    best
}

/// Evaluates both branches of the variational inequality on a grid and the
/// pasting conditions at every barrier.
pub fn check_hjb(value: &ValueFunction, spec: &GridSpec) -> HjbReport {
    let sf = value.scale();
    let r = value.reward();
    let levels = value.barriers().levels();
    let upper = spec.upper.unwrap_or_else(|| (3.0 * value.barriers().last()).max(2.0 * default_upper(sf)));
    let grid = linspace(0.0, upper, spec.points.max(2));
    let generator = Generator::new(sf.model());
    let vfun = |y: f64| value.value(y);

    let mut residual_gen = Vec::with_capacity(grid.len());
    let mut residual_grad = Vec::with_capacity(grid.len());
    let mut vmax: f64 = 0.0;
    let mut warnings = 0;
    for &x in &grid {
        let p = value.eval(x);
        vmax = vmax.max(p.v.abs());
        if x <= 0.0 {
            residual_gen.push(f64::NAN);
            residual_grad.push(f64::NAN);
            continue;
        }
        residual_grad.push(r.g(x) - p.d1);
        if levels.iter().any(|&b| (x - b).abs() <= spec.exclusion) {
            residual_gen.push(f64::NAN);
            continue;
        }
        let gv = generator.apply(vfun, (p.v, p.d1, p.d2), x, levels);
        if gv.quadrature_warning {
            warnings += 1;
        }
        residual_gen.push(gv.value);
    }
    let tol = spec.tol.unwrap_or(1e-7 * (1.0 + vmax));
    let (max_violation_gen, argmax_gen) = argmax(&grid, &residual_gen);
    let (max_violation_grad, argmax_grad) = argmax(&grid, &residual_grad);

    let pasting: Vec<PastingGap> = levels
        .iter()
        .enumerate()
        .filter(|(_, &b)| b > 0.0)
        .map(|(index, &level)| {
            let (l, rt) = (value.eval_left(level), value.eval_right(level));
            let gap_v = (rt.v - l.v).abs();
            let gap_d1 = (rt.d1 - l.d1).abs();
            let gap_d2 = (rt.d2 - l.d2).abs();
            PastingGap {
                index,
                level,
                gap_v,
                gap_d1,
                gap_d2,
                requires_c2: index % 2 == 0,
                c0_ok: gap_v <= 1e-9 * (1.0 + rt.v.abs()),
                c1_ok: gap_d1 <= 1e-8 * (1.0 + rt.d1.abs()),
                c2_ok: gap_d2 <= 1e-8 * (1.0 + rt.d2.abs()),
            }
        })
        .collect();

    let verdict = max_violation_gen <= tol && max_violation_grad <= tol && pasting.iter().all(PastingGap::passes);
    HjbReport {
        grid,
        residual_gen,
        residual_grad,
        max_violation_gen,
        argmax_gen,
        max_violation_grad,
        argmax_grad,
        pasting,
        tol,
        quadrature_warnings: warnings,
        verdict,
    }
}
