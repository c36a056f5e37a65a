//! Barrier sets and the piecewise value function of a (2n+1)-barrier
//! strategy.
//!
//! With barriers `b_1 < … < b_{2n+1}` the state is pushed down to `b_{2k+1}`
//! whenever it sits in `[b_{2k+1}, b_{2k+2})` (push regions) and left alone
//! in `(b_{2k}, b_{2k+1})` (wait regions). Hitting `b_{2k}` from above moves
//! the strategy into regime `k - 1`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::reward::RewardFunction;
use crate::scale::ScaleFunctions;

/// Strictly increasing, odd-length list of barrier levels in `[0, ∞)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierSet {
    levels: Vec<f64>,
}

impl BarrierSet {
    /// Validates and wraps the levels.
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.len().is_multiple_of(2) {
            return Err(Error::InvalidBarriers(format!("need an odd number of levels, got {}", levels.len())));
        }
        if levels.iter().any(|b| !b.is_finite()) || levels[0] < 0.0 {
            return Err(Error::InvalidBarriers("levels must be finite and >= 0".into()));
        }
        if levels.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidBarriers("levels must be strictly increasing".into()));
        }
        Ok(Self { levels })
    }

    /// Single barrier `b`.
    pub fn single(b: f64) -> Result<Self> {
        Self::new(alloc::vec![b])
    }

    /// The levels `b_1, …, b_{2n+1}`.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Number `n` of (even, odd) pairs above `b_1`.
    pub fn n(&self) -> usize {
        self.levels.len() / 2
    }

    /// Topmost barrier `b_{2n+1}`.
    pub fn last(&self) -> f64 {
        self.levels[self.levels.len() - 1]
    }

    /// The first `2k + 1` levels.
    pub fn truncated(&self, k: usize) -> Self {
        Self { levels: self.levels[..(2 * k + 1).min(self.levels.len())].to_vec() }
    }

    /// Appends a pair above the current top.
    pub fn push_pair(&self, even: f64, odd: f64) -> Result<Self> {
        let mut levels = self.levels.clone();
        levels.push(even);
        levels.push(odd);
        Self::new(levels)
    }
}

/// Constants of one (even, odd) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct PairConstants {
    /// `H(b_{2k}; 𝕓_{2k-1})`.
    pub h: f64,
    /// `F(b_{2k}, b_{2k+1}; 𝕓_{2k-1})`.
    pub f: f64,
    /// `φ(b_{2k+1}; 𝕓_{2k+1})`, the value at the odd barrier.
    pub c: f64,
}

/// Value at the first barrier and the per-pair constants of the recursion.
pub(crate) fn chain(sf: &ScaleFunctions, r: &RewardFunction, levels: &[f64]) -> (f64, Vec<PairConstants>) {
    let q = sf.model().q();
    let b1 = levels[0];
    let mut c = r.g(b1) * sf.w(b1) / sf.w1(b1);
    let mut pairs = Vec::with_capacity(levels.len() / 2);
    for k in 1..=levels.len() / 2 {
        let (lo, even, odd) = (levels[2 * k - 2], levels[2 * k - 1], levels[2 * k]);
        let h = r.integral(even) - r.integral(lo) + c;
        let d = odd - even;
        let f = (r.g(odd) - q * h * sf.w(d)) / sf.w1(d);
        c = h * sf.z(d) + sf.w(d) * f;
        pairs.push(PairConstants { h, f, c });
    }
    (c, pairs)
}

/// Which formula of the piecewise value function applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Below zero, after ruin.
    Ruin,
    /// `[0, b_1)`, the W-multiple.
    Initial,
    /// Push region `[b_{2k+1}, b_{2k+2})` (unbounded for `k = n`).
    Push(usize),
    /// Wait region `[b_{2k}, b_{2k+1})`, `k >= 1`.
    Wait(usize),
}

/// `V`, `V′`, `V″` at one point with the regime that produced them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValuePoint {
    /// Value.
    pub v: f64,
    /// First derivative.
    pub d1: f64,
    /// Second derivative.
    pub d2: f64,
    /// Formula used.
    pub regime: Regime,
}

/// Expected reward of a barrier strategy as a function of the start level.
#[derive(Debug, Clone)]
pub struct ValueFunction {
    sf: ScaleFunctions,
    reward: RewardFunction,
    barriers: BarrierSet,
    c0: f64,
    pairs: Vec<PairConstants>,
    top: f64,
}

impl ValueFunction {
    /// Precomputes the recursion constants. More than one barrier requires
    /// Brownian motion with drift.
    pub fn new(sf: &ScaleFunctions, reward: &RewardFunction, barriers: BarrierSet) -> Result<Self> {
        if barriers.n() > 0 && !sf.model().is_brownian() {
            return Err(Error::UnsupportedModel("multibarrier value functions need a Brownian model"));
        }
        let b1 = barriers.levels()[0];
        let c0 = reward.g(b1) * sf.w(b1) / sf.w1(b1);
        let (top, pairs) = chain(sf, reward, barriers.levels());
        Ok(Self { sf: sf.clone(), reward: reward.clone(), barriers, c0, pairs, top })
    }

    /// The barrier levels.
    pub fn barriers(&self) -> &BarrierSet {
        &self.barriers
    }

    /// Scale functions of the underlying model.
    pub fn scale(&self) -> &ScaleFunctions {
        &self.sf
    }

    /// The reward function.
    pub fn reward(&self) -> &RewardFunction {
        &self.reward
    }

    /// `H(b_{2k}; 𝕓_{2k-1})` for k = 1..n.
    pub fn h_constants(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.h).collect()
    }

    /// `F(b_{2k}, b_{2k+1}; 𝕓_{2k-1})` for k = 1..n.
    pub fn f_constants(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.f).collect()
    }

    /// Value at the top barrier.
    pub fn top_value(&self) -> f64 {
        self.top
    }

    /// Regime of `x` with half-open intervals closed on the left.
    pub fn regime(&self, x: f64) -> Regime {
        if x < 0.0 {
            return Regime::Ruin;
        }
        let b = self.barriers.levels();
        let idx = b.partition_point(|&l| l <= x);
        match idx {
            0 => Regime::Initial,
            i if i % 2 == 1 => Regime::Push(i / 2),
            i => Regime::Wait(i / 2),
        }
    }

    fn eval_in(&self, regime: Regime, x: f64) -> ValuePoint {
        let b = self.barriers.levels();
        let (v, d1, d2) = match regime {
            Regime::Ruin => (0.0, 0.0, 0.0),
            Regime::Initial => {
                let k = self.reward.g(b[0]) / self.sf.w1(b[0]);
                (k * self.sf.w(x), k * self.sf.w1(x), k * self.sf.w2(x))
            }
            Regime::Push(k) => {
                let base = if k == 0 { self.c0 } else { self.pairs[k - 1].c };
                let (g, g1, _) = self.reward.triple(x);
                (self.reward.integral(x) - self.reward.integral(b[2 * k]) + base, g, g1)
            }
            Regime::Wait(k) => {
                let p = self.pairs[k - 1];
                let y = x - b[2 * k - 1];
                let q = self.sf.model().q();
                let (w, w1, w2) = (self.sf.w(y), self.sf.w1(y), self.sf.w2(y));
                (p.h * self.sf.z(y) + w * p.f, q * p.h * w + w1 * p.f, q * p.h * w1 + w2 * p.f)
            }
        };
        ValuePoint { v, d1, d2, regime }
    }

    /// `V`, `V′`, `V″` at `x`, right-sided at barriers.
    pub fn eval(&self, x: f64) -> ValuePoint {
        self.eval_in(self.regime(x), x)
    }

    /// Same as [`eval`](Self::eval).
    pub fn eval_right(&self, x: f64) -> ValuePoint {
        self.eval(x)
    }

    /// Left-sided evaluation: the formula of the regime just below `x`.
    pub fn eval_left(&self, x: f64) -> ValuePoint {
        let b = self.barriers.levels();
        let regime = match b.iter().position(|&l| l == x) {
            Some(0) => {
                if x > 0.0 {
                    Regime::Initial
                } else {
                    Regime::Ruin
                }
            }
            Some(i) if i % 2 == 1 => Regime::Push(i / 2),
            Some(i) => Regime::Wait(i / 2),
            None if x == 0.0 => Regime::Ruin,
            None => self.regime(x),
        };
        self.eval_in(regime, x)
    }

    /// `V(x)`.
    pub fn value(&self, x: f64) -> f64 {
        self.eval(x).v
    }
}
