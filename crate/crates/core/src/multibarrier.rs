//! The multibarrier algorithm for Brownian motion with drift.
//!
//! Starting from the one-barrier threshold `b_1`, each round looks for the
//! first point `c` where the push-region generator `(L - q)H` turns
//! positive, then for the smallest `v` in `[b_{2k-1}, c]` whose auxiliary
//! curve `z ↦ F(v, z)` has an interior maximum at least as large as its
//! boundary value `σ²g(v)/2`. That `v` and its maximizer become the next
//! (even, odd) pair. The loop ends once `(L - q)H <= 0` above the top
//! barrier.

use alloc::vec::Vec;
use core::cell::RefCell;

use crate::error::{Error, Result};
use crate::numeric::{bisect, bisect_predicate, composite_grid, linspace, refine_max};
use crate::one_barrier::{find_bstar, OneBarrierOptions, OneBarrierSolution};
use crate::reward::RewardFunction;
use crate::scale::ScaleFunctions;
use crate::value::{chain, BarrierSet, ValueFunction};

/// `(L - q)H` counts as positive above `GEN_TOL · (1 + |g| + q|H|)`.
const GEN_TOL: f64 = 1e-9;
/// Slack for "interior maximum beats the boundary".
const BEAT_TOL: f64 = 1e-9;
/// Relative tolerance of the matching condition at even barriers.
const MATCH_TOL: f64 = 1e-6;

/// Settings for [`solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Cap on the total number of levels; reaching it stops the loop.
    pub max_barriers: usize,
    /// Upper end of all scans. `None` reuses the one-barrier search limit.
    pub upper: Option<f64>,
    /// Points per scanned interval.
    pub grid_points: usize,
    /// Width of the finely resolved segment at the start of each scan.
    pub fine_width: f64,
    /// Record trace rows.
    pub trace: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { max_barriers: 9, upper: None, grid_points: 2001, fine_width: 10.0, trace: true }
    }
}

/// Why the loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// `(L - q)H(·; b_1) <= 0` above `b_1`: the single barrier is final.
    ConditionIneq1,
    /// `(L - q)H <= 0` above the top barrier, or the auxiliary curve of the
    /// last pair is non-increasing beyond its odd barrier.
    ConditionIneq2,
    /// The level cap was reached.
    MaxBarriers,
}

impl StopReason {
    /// Snake-case label used in output files.
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::ConditionIneq1 => "condition_ineq1",
            StopReason::ConditionIneq2 => "condition_ineq2",
            StopReason::MaxBarriers => "max_barriers",
        }
    }
}

/// Non-fatal findings of the solver.
#[derive(Debug, Clone, PartialEq)]
pub enum SolveWarning {
    /// `(L - q)g` vanishes on a whole stretch of the scan grid, where the
    /// algorithm's case analysis does not apply.
    RewardGeneratorVanishes {
        /// Left end of the stretch.
        from: f64,
        /// Right end of the stretch.
        to: f64,
    },
    /// `(L - q)H` was not negative just right of the even barrier of pair `k`.
    Cond3Failed {
        /// Pair index, starting at 1.
        k: usize,
    },
    /// `g(z)e^{-Φz}` did not decrease on the check points.
    GrowthCheckFailed,
}

/// Kind of trace row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceStage {
    /// Scan of `(L - q)H` above the top barrier.
    GenH,
    /// Point of the maximizer curve `z(v)`.
    ZCurve,
    /// An accepted barrier level.
    Barrier,
}

impl TraceStage {
    /// Label used in output files.
    pub fn as_str(self) -> &'static str {
        match self {
            TraceStage::GenH => "genH",
            TraceStage::ZCurve => "zcurve",
            TraceStage::Barrier => "barrier",
        }
    }
}

/// One row of the solver trace; unused fields are NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    /// Stage.
    pub stage: TraceStage,
    /// Round, starting at 1.
    pub k: usize,
    /// Abscissa.
    pub v: f64,
    /// Maximizer `z(v)`.
    pub z: f64,
    /// `F(v, z(v))`.
    pub f: f64,
    /// `(L - q)H(v)`.
    pub gen_h: f64,
}

/// Output of [`solve`].
#[derive(Debug, Clone)]
pub struct MultibarrierSolution {
    /// Accepted levels.
    pub barriers: BarrierSet,
    /// The c points, one per accepted pair.
    pub c_points: Vec<f64>,
    /// Why the loop ended.
    pub stopped_reason: StopReason,
    /// Whether `z ↦ F(b_{2n}, z)` of the last pair is non-increasing beyond
    /// its odd barrier, which on its own justifies stopping.
    pub monotone_tail: bool,
    /// `(F(b_{2k}, b_{2k}+), F(b_{2k}, b_{2k+1}))` per pair.
    pub matching: Vec<(f64, f64)>,
    /// Whether `(L - q)H < 0` just right of each even barrier.
    pub cond3: Vec<bool>,
    /// The one-barrier search that produced `b_1`.
    pub one_barrier: OneBarrierSolution,
    /// Upper end of the scans.
    pub upper: f64,
    /// Non-fatal findings.
    pub warnings: Vec<SolveWarning>,
    /// Trace rows, if requested.
    pub trace: Vec<TraceRow>,
    /// Value function of the accepted barriers.
    pub value: ValueFunction,
}

/// Push branch above the current top barrier: `H(v) = G(v) - G(b) + c`.
#[derive(Clone, Copy)]
struct Top<'a> {
    sf: &'a ScaleFunctions,
    r: &'a RewardFunction,
    b: f64,
    c: f64,
    g_b: f64,
}

/// Search result for the maximizer of `z ↦ F(v, z)`.
#[derive(Debug, Clone, Copy)]
struct ZSearch {
    z: f64,
    f: f64,
    boundary: f64,
}

impl<'a> Top<'a> {
    fn new(sf: &'a ScaleFunctions, r: &'a RewardFunction, bset: &BarrierSet) -> Self {
        let (c, _) = chain(sf, r, bset.levels());
        let b = bset.last();
        Self { sf, r, b, c, g_b: r.integral(b) }
    }

    fn h(&self, v: f64) -> f64 {
        self.r.integral(v) - self.g_b + self.c
    }

    fn gen(&self, v: f64) -> f64 {
        let m = self.sf.model();
        let (g, g1, _) = self.r.triple(v);
        m.sigma() * m.sigma() / 2.0 * g1 + m.mu() * g - m.q() * self.h(v)
    }

    fn gen_tol(&self, v: f64) -> f64 {
        GEN_TOL * (1.0 + self.r.g(v).abs() + self.sf.model().q() * self.h(v).abs())
    }

    fn boundary(&self, v: f64) -> f64 {
        let s = self.sf.model().sigma();
        s * s * self.r.g(v) / 2.0
    }

    /// `(F, ∂F/∂z)` for `z >= v` with `H = h`, in the scaled form.
    fn surface(&self, hv: f64, v: f64, z: f64) -> (f64, f64) {
        let d = z - v;
        let q = self.sf.model().q();
        let (g, g1, _) = self.r.triple(z);
        let e = libm::exp(-self.sf.phi() * d);
        let w = self.sf.w_scaled(d);
        let w1 = self.sf.wk_scaled(d, 1);
        let w2 = self.sf.wk_scaled(d, 2);
        let f = (g * e - q * hv * w) / w1;
        let df = (g1 * e - q * hv * w1 - w2 * f) / w1;
        (f, df)
    }

    fn z_search(&self, v: f64, upper: f64, opts: &SolveOptions) -> Result<ZSearch> {
        let hv = self.h(v);
        let boundary = self.boundary(v);
        let grid = composite_grid(v, upper, opts.fine_width, opts.grid_points.max(3));
        let n = grid.len();
        let mut vals: Vec<(f64, f64)> = Vec::with_capacity(n);
        vals.push((boundary, self.gen(v)));
        for &z in &grid[1..] {
            vals.push(self.surface(hv, v, z));
        }
        if vals[n - 1].0 >= vals[n - 2].0 && vals[n - 1].1 > 0.0 {
            return Err(Error::UnboundedSearch(upper));
        }
        let f = |z: f64| self.surface(hv, v, z).0;
        let df = |z: f64| self.surface(hv, v, z).1;
        let mut best: Option<(f64, f64)> = None;
        // Index 0 is the boundary; an initial decreasing run never produces a
        // local maximum here, so the candidates are genuinely interior.
        for i in 1..n {
            let fi = vals[i].0;
            if fi < vals[i - 1].0 || (i + 1 < n && fi < vals[i + 1].0) {
                continue;
            }
            let hi = grid[(i + 1).min(n - 1)];
            let cand = refine_max(f, df, grid[i - 1], hi);
            if cand.0 - v <= 1e-7 * (1.0 + v) {
                continue;
            }
            best = match best {
                None => Some(cand),
                Some(b) => {
                    let slack = BEAT_TOL * (1.0 + b.1.abs().max(cand.1.abs()));
                    if cand.1 > b.1 + slack || (cand.1 >= b.1 - slack && cand.0 > b.0) {
                        Some(cand)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        let (z, fz) = match best {
            Some((z, fz)) if fz - boundary > -BEAT_TOL * (1.0 + boundary.abs()) => (z, fz),
            _ => (v, boundary),
        };
        Ok(ZSearch { z, f: fz, boundary })
    }

    fn in_d(&self, v: f64, upper: f64, opts: &SolveOptions) -> Result<bool> {
        let s = self.z_search(v, upper, opts)?;
        Ok(s.z > v)
    }

    fn scan_gen(&self, upper: f64, opts: &SolveOptions) -> Vec<(f64, f64)> {
        composite_grid(self.b, upper, opts.fine_width, opts.grid_points.max(3))
            .into_iter()
            .map(|v| (v, self.gen(v)))
            .collect()
    }

    fn crossing(&self, scan: &[(f64, f64)]) -> Option<f64> {
        let j = scan.iter().position(|&(v, gh)| gh > self.gen_tol(v))?;
        if j == 0 {
            return Some(scan[0].0);
        }
        let (lo, hi) = (scan[j - 1].0, scan[j].0);
        if self.gen(lo) > 0.0 {
            return Some(lo);
        }
        bisect(|v| self.gen(v), lo, hi, 1e-12).ok().or(Some(hi))
    }
}

fn require_brownian(sf: &ScaleFunctions) -> Result<()> {
    if sf.model().is_brownian() {
        Ok(())
    } else {
        Err(Error::UnsupportedModel("the multibarrier algorithm needs a Brownian model"))
    }
}

/// `H(x; 𝕓)` for `x >= b_{2n+1}`, the push-branch value above the top barrier.
pub fn h_eval(sf: &ScaleFunctions, r: &RewardFunction, bset: &BarrierSet, x: f64) -> Result<f64> {
    if x < bset.last() {
        return Err(Error::OutOfRegime { x, lo: bset.last(), hi: f64::INFINITY });
    }
    Ok(Top::new(sf, r, bset).h(x))
}

/// `φ(x; 𝕓)` on the top wait interval `(b_{2n}, b_{2n+1})`.
pub fn phi_eval(sf: &ScaleFunctions, r: &RewardFunction, bset: &BarrierSet, x: f64) -> Result<f64> {
    let n = bset.n();
    let l = bset.levels();
    if n == 0 {
        return Err(Error::OutOfRegime { x, lo: f64::NAN, hi: f64::NAN });
    }
    let (lo, hi) = (l[2 * n - 1], l[2 * n]);
    if !(x > lo && x < hi) {
        return Err(Error::OutOfRegime { x, lo, hi });
    }
    let (_, pairs) = chain(sf, r, l);
    let p = pairs[n - 1];
    Ok(p.h * sf.z(x - lo) + sf.w(x - lo) * p.f)
}

/// `(F(v, z; 𝕓), ∂F/∂z)` for `b_{2n+1} <= v < z`.
pub fn f_surface(sf: &ScaleFunctions, r: &RewardFunction, bset: &BarrierSet, v: f64, z: f64) -> Result<(f64, f64)> {
    if !(z > v) {
        return Err(Error::InvalidPair { v, z });
    }
    if v < bset.last() {
        return Err(Error::OutOfRegime { x: v, lo: bset.last(), hi: f64::INFINITY });
    }
    let top = Top::new(sf, r, bset);
    Ok(top.surface(top.h(v), v, z))
}

/// `(L - q)H(v; 𝕓) = σ²g′(v)/2 + μg(v) - qH(v; 𝕓)`.
pub fn gen_h(sf: &ScaleFunctions, r: &RewardFunction, bset: &BarrierSet, v: f64) -> Result<f64> {
    require_brownian(sf)?;
    Ok(Top::new(sf, r, bset).gen(v))
}

/// First point above the top barrier where `(L - q)H` turns positive.
pub fn find_c(sf: &ScaleFunctions, r: &RewardFunction, bset: &BarrierSet, upper: f64, opts: &SolveOptions) -> Result<f64> {
    require_brownian(sf)?;
    let top = Top::new(sf, r, bset);
    let scan = top.scan_gen(upper, opts);
    top.crossing(&scan).ok_or(Error::NoSignChange { from: top.b, to: upper })
}

/// Largest global maximizer of `z ↦ F(v, z; 𝕓)` on `[v, U]` and the value
/// there; `(v, σ²g(v)/2)` when the boundary wins.
pub fn z_of_v(
    sf: &ScaleFunctions,
    r: &RewardFunction,
    bset: &BarrierSet,
    v: f64,
    upper: f64,
    opts: &SolveOptions,
) -> Result<(f64, f64)> {
    require_brownian(sf)?;
    let s = Top::new(sf, r, bset).z_search(v, upper, opts)?;
    Ok((s.z, s.f))
}

/// Next (even, odd) pair above `𝕓` given its c point.
pub fn next_pair(
    sf: &ScaleFunctions,
    r: &RewardFunction,
    bset: &BarrierSet,
    c: f64,
    upper: f64,
    opts: &SolveOptions,
) -> Result<(f64, f64)> {
    require_brownian(sf)?;
    let top = Top::new(sf, r, bset);
    let (even, odd, _, _) = pair_search(&top, c, upper, opts, 0, &mut None)?;
    Ok((even, odd))
}

fn pair_search(
    top: &Top<'_>,
    c: f64,
    upper: f64,
    opts: &SolveOptions,
    k: usize,
    trace: &mut Option<&mut Vec<TraceRow>>,
) -> Result<(f64, f64, f64, f64)> {
    let vs = linspace(top.b, c, opts.grid_points.max(3));
    let mut first = None;
    for (i, &v) in vs.iter().enumerate() {
        let s = top.z_search(v, upper, opts)?;
        if let Some(t) = trace.as_deref_mut() {
            t.push(TraceRow { stage: TraceStage::ZCurve, k, v, z: s.z, f: s.f, gen_h: top.gen(v) });
        }
        if s.z > v && first.is_none() {
            first = Some(i);
            if trace.is_none() {
                break;
            }
        }
    }
    let j = match first {
        Some(j) if j > 0 => j,
        _ => return Err(Error::EmptyD { from: top.b, to: c }),
    };
    let failure = RefCell::new(None);
    let even = bisect_predicate(
        |v| match top.in_d(v, upper, opts) {
            Ok(b) => b,
            Err(e) => {
                *failure.borrow_mut() = Some(e);
                true
            }
        },
        vs[j - 1],
        vs[j],
        1e-11,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let s = top.z_search(even, upper, opts)?;
    if !(s.z > even) {
        return Err(Error::EmptyD { from: top.b, to: c });
    }
    if (s.f - s.boundary).abs() > MATCH_TOL * s.boundary.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::MatchingFailure { v: even, boundary: s.boundary, interior: s.f });
    }
    Ok((even, s.z, s.boundary, s.f))
}

/// Stretches of the grid where `(L - q)g` vanishes identically.
fn reward_generator_flats(sf: &ScaleFunctions, r: &RewardFunction, grid: &[f64]) -> Vec<SolveWarning> {
    let m = sf.model();
    let s2 = m.sigma() * m.sigma() / 2.0;
    let mut out = Vec::new();
    let mut run: Option<(f64, f64, usize)> = None;
    let close = |run: &mut Option<(f64, f64, usize)>, out: &mut Vec<SolveWarning>| {
        if let Some((from, to, len)) = run.take() {
            if len >= 5 {
                out.push(SolveWarning::RewardGeneratorVanishes { from, to });
            }
        }
    };
    for &x in grid {
        let (g, g1, g2) = r.triple(x);
        let lg = s2 * g2 + m.mu() * g1 - m.q() * g;
        let scale = 1.0 + g.abs() + g1.abs() + g2.abs();
        if lg.abs() <= 1e-12 * scale {
            run = Some(match run {
                Some((from, _, len)) => (from, x, len + 1),
                None => (x, x, 1),
            });
        } else {
            close(&mut run, &mut out);
        }
    }
    close(&mut run, &mut out);
    out
}

/// Runs the whole algorithm.
pub fn solve(sf: &ScaleFunctions, r: &RewardFunction, opts: &SolveOptions) -> Result<MultibarrierSolution> {
    require_brownian(sf)?;
    let ob_opts = OneBarrierOptions { upper: opts.upper, ..OneBarrierOptions::default() };
    let one = find_bstar(sf, r, &ob_opts)?;
    let upper = opts.upper.unwrap_or(one.search_upper);
    let mut warnings = Vec::new();
    if !r.growth_check(sf.phi()).passes {
        warnings.push(SolveWarning::GrowthCheckFailed);
    }
    let scan_grid = composite_grid(one.bstar, upper, opts.fine_width, opts.grid_points.max(3));
    warnings.extend(reward_generator_flats(sf, r, &scan_grid));

    let mut trace = Vec::new();
    let mut bset = BarrierSet::single(one.bstar)?;
    let mut c_points = Vec::new();
    let mut matching = Vec::new();
    let mut cond3 = Vec::new();
    let mut monotone_tail = false;
    let mut k = 1;
    let stopped_reason = loop {
        let top = Top::new(sf, r, &bset);
        let scan = top.scan_gen(upper, opts);
        if opts.trace {
            trace.extend(scan.iter().map(|&(v, gh)| TraceRow { stage: TraceStage::GenH, k, v, z: f64::NAN, f: f64::NAN, gen_h: gh }));
        }
        let Some(c) = top.crossing(&scan) else {
            break if k == 1 { StopReason::ConditionIneq1 } else { StopReason::ConditionIneq2 };
        };
        if monotone_tail {
            break StopReason::ConditionIneq2;
        }
        if bset.levels().len() + 2 > opts.max_barriers {
            break StopReason::MaxBarriers;
        }
        let mut sink = if opts.trace { Some(&mut trace) } else { None };
        let (even, odd, boundary, interior) = pair_search(&top, c, upper, opts, k, &mut sink)?;

        // Just right of the even barrier the push branch should still lose.
        let mesh = linspace(even, even + 0.05 * (c - even), 11);
        let ok = mesh[1..].iter().all(|&v| top.gen(v) < 0.0);
        if !ok {
            warnings.push(SolveWarning::Cond3Failed { k });
        }
        cond3.push(ok);

        let hv = top.h(even);
        let tail = composite_grid(odd, upper, opts.fine_width, opts.grid_points.max(3));
        let fs: Vec<f64> = tail.iter().map(|&z| top.surface(hv, even, z).0).collect();
        monotone_tail = fs.windows(2).all(|w| w[1] <= w[0] + 1e-12 * (1.0 + w[0].abs()));

        c_points.push(c);
        matching.push((boundary, interior));
        bset = bset.push_pair(even, odd)?;
        k += 1;
    };
    if opts.trace {
        for (i, &b) in bset.levels().iter().enumerate() {
            let row = TraceRow { stage: TraceStage::Barrier, k: i.div_ceil(2), v: b, z: f64::NAN, f: f64::NAN, gen_h: f64::NAN };
            trace.push(row);
        }
    }
    let value = ValueFunction::new(sf, r, bset.clone())?;
    Ok(MultibarrierSolution {
        barriers: bset,
        c_points,
        stopped_reason,
        monotone_tail,
        matching,
        cond3,
        one_barrier: one,
        upper,
        warnings,
        trace,
        value,
    })
}
