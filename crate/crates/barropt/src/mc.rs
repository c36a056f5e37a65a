//! Monte Carlo estimate of the expected discounted reward of a barrier
//! strategy, built only from the model parameters, `g` and `G`.
//!
//! Each path runs the regime state machine directly: in regime `k` the state
//! is reflected down at `b_{2k+1}` (discretized Skorokhod map, reward
//! `g(b_{2k+1}) dL` discounted at the step midpoint) and the regime drops to
//! `k - 1` when the state reaches `b_{2k}`, which pushes it from `b_{2k}` to
//! `b_{2k-1}` and pays `G(b_{2k}) - G(b_{2k-1})`. Gaussian increments are
//! exact, so reflection and level detection are the only sources of bias.
//!
//! Far from every level the step is lengthened up to `max_dt`; it is only
//! coarsened where crossing a level within the step would need an 8σ move,
//! so this changes run time and not the estimate beyond that probability.
//! With the bridge option the reflection uses the exact running maximum of
//! each step and the reflecting barrier no longer limits the step.

use barropt_core::{BarrierSet, LevyModel, RewardFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

/// Safety factor, in standard deviations of one step, kept between the
/// state and the nearest level before a step is lengthened.
const COARSE_SIGMAS: f64 = 8.0;

/// Simulation settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    /// Number of paths (an even number with `antithetic`).
    pub n_paths: usize,
    /// Step length near the levels.
    pub dt: f64,
    /// Truncation time T.
    pub horizon: f64,
    /// Base seed; path `i` uses stream `i` of this seed.
    pub seed: u64,
    /// Starting level.
    pub x0: f64,
    /// Pair each path with its sign-flipped twin.
    pub antithetic: bool,
    /// Brownian-bridge corrections: sample the running maximum for the
    /// reflection and the crossing probability for the lower levels.
    pub bridge: bool,
    /// Longest step taken far from the levels. Set equal to `dt` for a plain
    /// fixed-step scheme. Ignored for jump models.
    pub max_dt: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            dt: 1e-4,
            horizon: 200.0,
            seed: 42,
            x0: 0.0,
            antithetic: false,
            bridge: false,
            max_dt: 0.05,
        }
    }
}

/// Estimate and its uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimEstimate {
    /// Sample mean of the per-path totals.
    pub mean: f64,
    /// Standard error of the mean.
    pub stderr: f64,
    /// Paths simulated.
    pub n_paths: usize,
    /// Paths ruined before the horizon.
    pub n_ruined: usize,
    /// `e^{-qT}` times the largest per-path total, a stand-in for the
    /// reward that could still arrive after T.
    pub truncation_bound: f64,
    /// Total number of time steps taken.
    pub steps: u64,
}

/// Simulation failures.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    /// Settings out of range.
    #[error("invalid simulation config: {0}")]
    Config(String),
    /// Jump models can only be simulated under a single barrier.
    #[error("unsupported model: {0}")]
    UnsupportedModel(&'static str),
}

/// One row of a traced path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathRow {
    /// Path index.
    pub path: usize,
    /// Time.
    pub t: f64,
    /// Controlled state.
    pub x: f64,
    /// Cumulative control.
    pub l: f64,
    /// Regime index `k` (reflecting at `b_{2k+1}`).
    pub regime: usize,
    /// Cumulative discounted reward.
    pub reward: f64,
    /// Whether the path is ruined at this row.
    pub ruined: bool,
}

#[derive(Debug, Clone, Copy)]
struct Outcome {
    reward: f64,
    ruined: bool,
    steps: u64,
}

struct Sim<'a> {
    mu: f64,
    sigma: f64,
    q: f64,
    jumps: Option<(f64, Vec<(f64, f64)>)>,
    levels: &'a [f64],
    r: &'a RewardFunction,
    cfg: &'a SimConfig,
}

fn validate(model: &LevyModel, bset: &BarrierSet, cfg: &SimConfig) -> Result<(), SimError> {
    if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
        return Err(SimError::Config(format!("dt must be positive, got {}", cfg.dt)));
    }
    if !(cfg.horizon > cfg.dt && cfg.horizon.is_finite()) {
        return Err(SimError::Config(format!("need dt < horizon, got dt = {}, horizon = {}", cfg.dt, cfg.horizon)));
    }
    if !(cfg.max_dt >= cfg.dt) {
        return Err(SimError::Config(format!("max_dt must be >= dt, got {}", cfg.max_dt)));
    }
    if cfg.n_paths < 2 {
        return Err(SimError::Config("need at least two paths".into()));
    }
    if cfg.antithetic && !cfg.n_paths.is_multiple_of(2) {
        return Err(SimError::Config("antithetic sampling needs an even path count".into()));
    }
    if !cfg.x0.is_finite() {
        return Err(SimError::Config("x0 must be finite".into()));
    }
    if bset.n() > 0 && !model.is_brownian() {
        return Err(SimError::UnsupportedModel("jump models are simulated under a single barrier only"));
    }
    Ok(())
}

impl<'a> Sim<'a> {
    fn new(model: &LevyModel, r: &'a RewardFunction, bset: &'a BarrierSet, cfg: &'a SimConfig) -> Self {
        let jumps = model
            .jumps()
            .map(|j| (j.lambda(), j.phases().iter().map(|p| (p.p, p.alpha)).collect()));
        Self { mu: model.mu(), sigma: model.sigma(), q: model.q(), jumps, levels: bset.levels(), r, cfg }
    }

    fn lump(&self, from: f64, to: f64) -> f64 {
        self.r.integral(from) - self.r.integral(to)
    }

    fn is_ruined(&self, x: f64) -> bool {
        if self.sigma > 0.0 {
            x <= 0.0
        } else {
            x < 0.0
        }
    }

    /// Step length that keeps `COARSE_SIGMAS` step deviations plus the drift
    /// inside the distance `d` to the nearest level.
    fn step(&self, d: f64) -> f64 {
        if self.jumps.is_some() || self.cfg.max_dt <= self.cfg.dt {
            return self.cfg.dt;
        }
        let (a, m) = (COARSE_SIGMAS * self.sigma, self.mu.abs());
        let root = if m > 0.0 { (-a + (a * a + 4.0 * m * d).sqrt()) / (2.0 * m) } else { d / a };
        (root * root).clamp(self.cfg.dt, self.cfg.max_dt)
    }

    fn jump_total(&self, rng: &mut ChaCha8Rng, h: f64, poisson: &Option<Poisson<f64>>) -> f64 {
        let Some((lambda, phases)) = &self.jumps else { return 0.0 };
        let count = match poisson {
            Some(p) if (h - self.cfg.dt).abs() <= 1e-15 * self.cfg.dt => p.sample(rng),
            _ => Poisson::new(lambda * h).map(|p| p.sample(rng)).unwrap_or(0.0),
        } as usize;
        let mut total = 0.0;
        for _ in 0..count {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut alpha = phases[phases.len() - 1].1;
            for &(p, a) in phases {
                acc += p;
                if u < acc {
                    alpha = a;
                    break;
                }
            }
            let e: f64 = 1.0 - rng.random::<f64>();
            total += -e.ln() / alpha;
        }
        total
    }

    /// Runs one path. `sign` flips every Gaussian draw.
    fn run(&self, stream: u64, sign: f64, mut trace: Option<(&mut Vec<PathRow>, usize)>) -> Outcome {
        let cfg = self.cfg;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(stream);
        let poisson = self.jumps.as_ref().and_then(|(lambda, _)| Poisson::new(lambda * cfg.dt).ok());
        let levels = self.levels;
        let sigma2 = self.sigma * self.sigma;

        let mut reward = 0.0;
        let mut l = 0.0;
        let mut t = 0.0;
        let mut x = cfg.x0;
        let mut steps = 0u64;
        let above = levels.iter().filter(|&&b| x >= b).count();
        let mut k = above / 2;
        if above % 2 == 1 && x > levels[2 * k] {
            // Push region: one control jump down to the odd barrier.
            reward += self.lump(x, levels[2 * k]);
            l += x - levels[2 * k];
            x = levels[2 * k];
        }
        while k > 0 && x <= levels[2 * k - 1] {
            let (s, target) = (levels[2 * k - 1], levels[2 * k - 2]);
            reward += self.lump(s, target);
            l += s - target;
            x -= s - target;
            k -= 1;
        }
        let mut ruined = self.is_ruined(x);
        let record = |trace: &mut Option<(&mut Vec<PathRow>, usize)>, t, x, l, k, reward, ruined| {
            if let Some((rows, path)) = trace {
                rows.push(PathRow { path: *path, t, x, l, regime: k, reward, ruined });
            }
        };
        record(&mut trace, 0.0, x, l, k, reward, ruined);

        while !ruined && t < cfg.horizon {
            let a = levels[2 * k];
            let lower = if k > 0 { levels[2 * k - 1] } else { 0.0 };
            // With the bridge the reflection is exact for any step length,
            // so only the lower levels limit the step.
            let room = if cfg.bridge { x - lower } else { (x - lower).min(a - x) };
            let mut h = self.step(room);
            if t + h > cfg.horizon {
                h = cfg.horizon - t;
            }
            let z: f64 = rng.sample(StandardNormal);
            let start = x;
            let mut y = x + self.mu * h + self.sigma * h.sqrt() * sign * z;
            let disc = || (-self.q * (t + 0.5 * h)).exp();
            let (u_max, u_min) = if cfg.bridge { (1.0 - rng.random::<f64>(), rng.random::<f64>()) } else { (1.0, 1.0) };
            // Bridge probability that a path from `start` to `y` dipped to `level`.
            let crossed = |level: f64, y: f64| {
                if y <= level {
                    return true;
                }
                cfg.bridge && sigma2 > 0.0 && u_min < (-2.0 * (start - level) * (y - level) / (sigma2 * h)).exp()
            };

            let mut switched = false;
            if k == 0 && self.sigma > 0.0 && crossed(0.0, y) {
                ruined = true;
            }
            while !ruined && k > 0 && crossed(levels[2 * k - 1], y) {
                let (s, target) = (levels[2 * k - 1], levels[2 * k - 2]);
                reward += disc() * self.lump(s, target);
                l += s - target;
                y -= s - target;
                k -= 1;
                switched = true;
                if self.is_ruined(y) {
                    ruined = true;
                }
            }
            if !ruined {
                let a = levels[2 * k];
                let dl = if cfg.bridge && !switched {
                    let top = 0.5 * (start + y + ((y - start).powi(2) - 2.0 * sigma2 * h * u_max.ln()).sqrt());
                    (top - a).max(0.0)
                } else {
                    (y - a).max(0.0)
                };
                if dl > 0.0 {
                    reward += disc() * self.r.g(a) * dl;
                    l += dl;
                    y -= dl;
                }
                let j = self.jump_total(&mut rng, h, &poisson);
                if j > 0.0 {
                    y -= j;
                    ruined = self.is_ruined(y);
                }
            }
            x = y;
            t += h;
            steps += 1;
            record(&mut trace, t, x, l, k, reward, ruined);
        }
        Outcome { reward, ruined, steps }
    }
}

/// Sum in a fixed binary tree so the result does not depend on scheduling.
fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Estimates `V_𝕓(x0)`.
pub fn simulate_value(
    model: &LevyModel,
    r: &RewardFunction,
    bset: &BarrierSet,
    cfg: &SimConfig,
) -> Result<SimEstimate, SimError> {
    validate(model, bset, cfg)?;
    let sim = Sim::new(model, r, bset, cfg);
    let samples = if cfg.antithetic { cfg.n_paths / 2 } else { cfg.n_paths };
    let outcomes: Vec<(f64, usize, u64, f64)> = (0..samples)
        .into_par_iter()
        .map(|i| {
            if cfg.antithetic {
                let a = sim.run(i as u64, 1.0, None);
                let b = sim.run(i as u64, -1.0, None);
                (
                    0.5 * (a.reward + b.reward),
                    a.ruined as usize + b.ruined as usize,
                    a.steps + b.steps,
                    a.reward.max(b.reward),
                )
            } else {
                let a = sim.run(i as u64, 1.0, None);
                (a.reward, a.ruined as usize, a.steps, a.reward)
            }
        })
        .collect();
    let values: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
    let n = values.len() as f64;
    let mean = pairwise_sum(&values) / n;
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    let top = outcomes.iter().map(|o| o.3).fold(0.0, f64::max);
    Ok(SimEstimate {
        mean,
        stderr: (var / n).sqrt(),
        n_paths: cfg.n_paths,
        n_ruined: outcomes.iter().map(|o| o.1).sum(),
        truncation_bound: (-model.q() * cfg.horizon).exp() * top,
        steps: outcomes.iter().map(|o| o.2).sum(),
    })
}

/// Full step-by-step trace of the first `n_trace` paths, identical to the
/// paths behind [`simulate_value`] without antithetic pairing.
pub fn simulate_paths(
    model: &LevyModel,
    r: &RewardFunction,
    bset: &BarrierSet,
    cfg: &SimConfig,
    n_trace: usize,
) -> Result<Vec<PathRow>, SimError> {
    validate(model, bset, cfg)?;
    if n_trace > cfg.n_paths {
        return Err(SimError::Config(format!("n_trace = {n_trace} exceeds n_paths = {}", cfg.n_paths)));
    }
    let sim = Sim::new(model, r, bset, cfg);
    let per_path: Vec<Vec<PathRow>> = (0..n_trace)
        .into_par_iter()
        .map(|i| {
            let mut rows = Vec::new();
            sim.run(i as u64, 1.0, Some((&mut rows, i)));
            rows
        })
        .collect();
    Ok(per_path.into_iter().flatten().collect())
}
