//! The one-barrier threshold `b* = sup argmax F`, `F(u) = g(u)/W′(u)`, and
//! the value function of the barrier strategy at any level.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numeric::{linspace, refine_max};
use crate::reward::RewardFunction;
use crate::scale::ScaleFunctions;

/// Relative gap under which two maxima of F count as tied.
const TIE_TOL: f64 = 1e-9;

/// Search settings for [`find_bstar`].
#[derive(Debug, Clone, PartialEq)]
pub struct OneBarrierOptions {
    /// Fixed upper end of the search. `None` picks `max(10a*, 20/Φ)` and
    /// doubles it up to twice while F is still near its maximum there.
    pub upper: Option<f64>,
    /// Number of grid points on `[0, U]`.
    pub grid_points: usize,
    /// Keep the `(u, F, F′)` grid in the solution.
    pub keep_diagnostics: bool,
}

impl Default for OneBarrierOptions {
    fn default() -> Self {
        Self { upper: None, grid_points: 4001, keep_diagnostics: false }
    }
}

/// Result of the threshold search.
#[derive(Debug, Clone, PartialEq)]
pub struct OneBarrierSolution {
    /// Largest global maximizer of F on `[0, U]`.
    pub bstar: f64,
    /// `F(b*)`.
    pub f_max: f64,
    /// Whether `F′ <= 1e-9 (1 + |F|)` on every grid point of `[b*, U]`.
    pub decr_f1_holds: bool,
    /// Upper end `U` actually searched.
    pub search_upper: f64,
    /// `(u, F(u), F′(u))` on the final grid, if requested.
    pub diagnostics: Vec<(f64, f64, f64)>,
}

/// `(F(u), F′(u))` with `F = g/W′` and `F′ = (g′W′ - gW″)/W′²`, evaluated in
/// the scaled form so that large `u` never overflows.
pub fn f_ratio(sf: &ScaleFunctions, r: &RewardFunction, u: f64) -> (f64, f64) {
    let (g, g1, _) = r.triple(u);
    let e = libm::exp(-sf.phi() * u);
    let w1 = sf.wk_scaled(u, 1);
    let w2 = sf.wk_scaled(u, 2);
    let f = g * e / w1;
    let df = (g1 * w1 - g * w2) * e / (w1 * w1);
    (f, df)
}

/// Default search limit `max(10a*, 20/Φ)`.
pub fn default_upper(sf: &ScaleFunctions) -> f64 {
    (10.0 * sf.a_star()).max(20.0 / sf.phi())
}

/// Locates b*.
pub fn find_bstar(sf: &ScaleFunctions, r: &RewardFunction, opts: &OneBarrierOptions) -> Result<OneBarrierSolution> {
    let n = opts.grid_points.max(3);
    let mut upper = opts.upper.unwrap_or_else(|| default_upper(sf));
    if !(upper > 0.0 && upper.is_finite()) {
        return Err(Error::UnboundedSearch(upper));
    }
    let mut doublings = 0;
    loop {
        let grid = linspace(0.0, upper, n);
        let vals: Vec<(f64, f64)> = grid.iter().map(|&u| f_ratio(sf, r, u)).collect();
        let best_grid = vals.iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max);
        let (f_end, df_end) = vals[n - 1];
        let near_top = f_end > 0.99 * best_grid;
        if opts.upper.is_none() && near_top {
            if doublings < 2 {
                upper *= 2.0;
                doublings += 1;
                continue;
            }
            if df_end > 0.0 {
                return Err(Error::UnboundedSearch(upper));
            }
        }

        let f = |u: f64| f_ratio(sf, r, u).0;
        let df = |u: f64| f_ratio(sf, r, u).1;
        let mut candidates: Vec<(f64, f64)> = Vec::new();
        for i in 0..n {
            let fi = vals[i].0;
            let left_ok = i == 0 || fi >= vals[i - 1].0;
            let right_ok = i == n - 1 || fi >= vals[i + 1].0;
            if !(left_ok && right_ok) {
                continue;
            }
            // At an end of the range the maximum sits on the end itself
            // unless F still rises into the range there.
            let at_end = (i == 0 && vals[0].1 <= 0.0) || (i == n - 1 && vals[i].1 >= 0.0);
            if at_end {
                candidates.push((grid[i], fi));
                continue;
            }
            let a = grid[i.saturating_sub(1)];
            let b = grid[(i + 1).min(n - 1)];
            candidates.push(refine_max(f, df, a, b));
        }
        let best = candidates.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
        let slack = TIE_TOL * best.abs();
        let (bstar, f_max) = candidates
            .iter()
            .filter(|c| c.1 >= best - slack)
            .fold((f64::NEG_INFINITY, 0.0), |acc, c| if c.0 > acc.0 { *c } else { acc });

        let decr_f1_holds = grid
            .iter()
            .zip(&vals)
            .filter(|(u, _)| **u >= bstar)
            .all(|(_, (fu, dfu))| *dfu <= 1e-9 * (1.0 + fu.abs()));
        let diagnostics = if opts.keep_diagnostics {
            grid.iter().zip(&vals).map(|(&u, &(a, b))| (u, a, b)).collect()
        } else {
            Vec::new()
        };
        return Ok(OneBarrierSolution { bstar, f_max, decr_f1_holds, search_upper: upper, diagnostics });
    }
}

/// `(V, V′, V″)` of the barrier strategy at level `b`, right-sided at `b`.
pub fn value_one_barrier(sf: &ScaleFunctions, r: &RewardFunction, b: f64, x: f64) -> (f64, f64, f64) {
    if x < 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let k = r.g(b) / sf.w1(b);
    if x < b {
        (k * sf.w(x), k * sf.w1(x), k * sf.w2(x))
    } else {
        let (g, g1, _) = r.triple(x);
        (r.integral(x) - r.integral(b) + k * sf.w(b), g, g1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LevyModel;
    use crate::reward::RewardKind;

    fn sf(mu: f64) -> ScaleFunctions {
        ScaleFunctions::new(&LevyModel::brownian(mu, 2.0, 0.2).unwrap()).unwrap()
    }

    #[test]
    fn reference_thresholds() {
        let r = RewardFunction::reference_rational();
        let lo = find_bstar(&sf(2.3), &r, &OneBarrierOptions::default()).unwrap();
        assert!((lo.bstar - 0.8925).abs() < 2e-3, "{}", lo.bstar);
        assert!(!lo.decr_f1_holds);
        let hi = find_bstar(&sf(2.4), &r, &OneBarrierOptions::default()).unwrap();
        assert!((hi.bstar - 0.9165).abs() < 2e-3, "{}", hi.bstar);
        let (f, df) = f_ratio(&sf(2.3), &r, lo.bstar);
        assert!(df.abs() < 1e-3 * f);
    }

    #[test]
    fn constant_reward_gives_a_star() {
        let s = sf(2.4);
        let r = RewardFunction::new(RewardKind::Constant { c: 1.0 }).unwrap();
        let sol = find_bstar(&s, &r, &OneBarrierOptions::default()).unwrap();
        assert!((sol.bstar - s.a_star()).abs() < 1e-6, "{} vs {}", sol.bstar, s.a_star());
        assert!(sol.decr_f1_holds);
    }

    #[test]
    fn value_pastes_at_bstar() {
        let s = sf(2.3);
        let r = RewardFunction::reference_rational();
        let b = find_bstar(&s, &r, &OneBarrierOptions::default()).unwrap().bstar;
        let k = r.g(b) / s.w1(b);
        let left = (k * s.w(b), k * s.w1(b), k * s.w2(b));
        let right = value_one_barrier(&s, &r, b, b);
        assert!((left.0 - right.0).abs() < 1e-14);
        assert!((left.1 - right.1).abs() < 1e-14);
        assert!((left.2 - right.2).abs() < 1e-8 * (1.0 + right.2.abs()));
    }
}
