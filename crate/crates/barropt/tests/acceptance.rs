//! Acceptance suite: one PASS/FAIL line per criterion, then a single
//! assertion over all of them. Run with `--nocapture` to see the lines.

use std::time::Instant;

use barropt::mc::{simulate_value, SimConfig};
use barropt_core::multibarrier::{f_surface, solve};
use barropt_core::one_barrier::f_ratio;
use barropt_core::{
    check_hjb, find_bstar, BarrierSet, GridSpec, HyperExpJumps, LevyModel, OneBarrierOptions, Phase, RewardFunction,
    RewardKind, ScaleFunctions, SolveOptions, ValueFunction,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
    seconds: f64,
}

fn timed(id: u32, name: &'static str, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let t = Instant::now();
    let (pass, detail) = f();
    let seconds = t.elapsed().as_secs_f64();
    let o = Outcome { id, name, pass, detail, seconds };
    println!(
        "criterion {} {}: {} ({:.1} s) {}",
        o.id,
        if o.pass { "PASS" } else { "FAIL" },
        o.name,
        o.seconds,
        o.detail
    );
    o
}

fn model(mu: f64) -> LevyModel {
    LevyModel::brownian(mu, 2.0, 0.2).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn one_barrier_reproduction() -> (bool, String) {
    let r = RewardFunction::reference_rational();
    let mut ok = true;
    let mut detail = String::new();
    for (mu, target, should_pass) in [(2.3, 0.8925, true), (2.4, 0.9165, false)] {
        let t = Instant::now();
        let sf = ScaleFunctions::new(&model(mu)).unwrap();
        let sol = find_bstar(&sf, &r, &OneBarrierOptions::default()).unwrap();
        let vf = ValueFunction::new(&sf, &r, BarrierSet::single(sol.bstar).unwrap()).unwrap();
        let rep = check_hjb(&vf, &GridSpec::default());
        let beyond = rep
            .grid
            .iter()
            .zip(&rep.residual_gen)
            .filter(|(x, g)| **x > sol.bstar && g.is_finite())
            .map(|(_, g)| *g)
            .fold(f64::NEG_INFINITY, f64::max);
        let secs = t.elapsed().as_secs_f64();
        let verdict_ok = if should_pass { rep.verdict } else { !rep.verdict && beyond > 0.0 };
        ok &= (sol.bstar - target).abs() <= 2e-3 && verdict_ok && secs < 10.0;
        detail += &format!(
            "mu={mu}: b*={:.5} verify={} max genV beyond b*={:.3e} [{secs:.1} s]; ",
            sol.bstar,
            if rep.verdict { "pass" } else { "fail" },
            beyond
        );
    }
    (ok, detail)
}

fn multibarrier_reproduction() -> (bool, String) {
    let sf = ScaleFunctions::new(&model(2.4)).unwrap();
    let r = RewardFunction::reference_rational();
    let sol = solve(&sf, &r, &SolveOptions::default()).unwrap();
    let l = sol.barriers.levels().to_vec();
    let c1 = sol.c_points.first().copied().unwrap_or(f64::NAN);
    let (fb, fi) = sol.matching.first().copied().unwrap_or((f64::NAN, f64::NAN));
    let rep = check_hjb(&sol.value, &GridSpec::default());
    let near = |a: f64, b: f64| (a - b).abs() <= 2e-3;
    let ok = l.len() == 3
        && sol.barriers.n() == 1
        && near(c1, 1.5113)
        && near(l[1], 1.1496)
        && near(l[2], 2.1925)
        && near(fb, 1.3401)
        && near(fi, 1.3401)
        && rep.verdict;
    let detail = format!(
        "barriers={l:.5?} c1={c1:.5} F(b2,b2+)={fb:.5} F(b2,b3)={fi:.5} n={} stop={} verify={}",
        sol.barriers.n(),
        sol.stopped_reason.as_str(),
        if rep.verdict { "pass" } else { "fail" }
    );
    (ok, detail)
}

/// Adaptive Simpson rule.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
}

/// `∫_0^∞ e^{-θx} W(x) dx` by quadrature of the scaled function.
fn laplace_of_w(sf: &ScaleFunctions, theta: f64) -> f64 {
    let gap = theta - sf.phi();
    let scale = sf.w_scaled(1.0 / sf.phi()).max(1.0);
    let t_max = (scale / (1e-12 * gap)).ln() / gap;
    let f = |x: f64| (-gap * x).exp() * sf.w_scaled(x);
    let cuts: [f64; 7] = [0.0, 0.1, 1.0, 10.0, 100.0, 1000.0, 1e4];
    cuts.windows(2)
        .map(|w| (w[0], w[1].min(t_max)))
        .filter(|(a, b)| b > a)
        .map(|(a, b)| simpson(&f, a, b, 1e-14))
        .sum()
}

fn random_brownian(rng: &mut ChaCha8Rng) -> LevyModel {
    LevyModel::brownian(rng.random_range(-2.0..3.0), rng.random_range(0.3..3.0), rng.random_range(0.05..1.0)).unwrap()
}

fn random_hyperexp(rng: &mut ChaCha8Rng) -> LevyModel {
    loop {
        let k = rng.random_range(1..4usize);
        let raw: Vec<(f64, f64)> = (0..k).map(|_| (rng.random_range(0.1..1.0), rng.random_range(0.5..6.0))).collect();
        let lambda = rng.random_range(0.2..3.0);
        let sigma = if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.2..2.0) };
        let mu = rng.random_range(0.3..3.0);
        let q = rng.random_range(0.05..1.0);
        let mut rates: Vec<f64> = raw.iter().map(|r| r.1).collect();
        rates.sort_by(f64::total_cmp);
        if rates.windows(2).any(|w| w[1] - w[0] < 0.05) {
            continue;
        }
        let total: f64 = raw.iter().map(|r| r.0).sum();
        let phases = raw.iter().map(|&(p, alpha)| Phase { p: p / total, alpha }).collect();
        let Ok(jumps) = HyperExpJumps::new(lambda, phases) else { continue };
        if let Ok(m) = LevyModel::new(mu, sigma, q, Some(jumps)) {
            return m;
        }
    }
}

fn scale_function_suite() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut failures: Vec<String> = Vec::new();
    for i in 0..100 {
        let m = random_brownian(&mut rng);
        let sf = ScaleFunctions::new(&m).unwrap();
        let (phi, zeta) = (sf.phi(), sf.zeta1().unwrap());
        let (s2, mu, q) = (m.sigma() * m.sigma(), m.mu(), m.q());
        for _ in 0..5 {
            let theta = phi + rng.random_range(0.1..5.0);
            let expect = 1.0 / (m.laplace_exponent(theta) - q);
            if rel(laplace_of_w(&sf, theta), expect) >= 1e-8 {
                failures.push(format!("brownian {i}: transform at {theta}"));
            }
        }
        let span = 30.0 / (phi + zeta);
        for _ in 0..10 {
            let x = 1e-3 + rng.random_range(0.0..1.0) * span;
            let wp1 = s2 / 2.0 * sf.w2(x) + mu * sf.w1(x) - q * sf.w(x);
            let size = s2 / 2.0 * sf.w2(x).abs() + mu.abs() * sf.w1(x) + q * sf.w(x);
            let zp1 = s2 / 2.0 * q * sf.w1(x) + mu * q * sf.w(x) - q * sf.z(x);
            let zsize = s2 / 2.0 * q * sf.w1(x) + mu.abs() * q * sf.w(x) + q * sf.z(x);
            if wp1.abs() > 1e-10 * size || zp1.abs() > 1e-10 * zsize {
                failures.push(format!("brownian {i}: Wp1/Zp1 at {x}"));
            }
        }
        let short = 4.0 / (phi + zeta);
        let b = rng.random_range(0.0..1.0) * short;
        let v = b + 1e-3 * short + rng.random_range(0.0..1.0) * short;
        let z = v + 1e-3 * short + rng.random_range(0.0..1.0) * short;
        let s4 = s2 * s2;
        let w2 = sf.w1(v).powi(2) - sf.w(v) * sf.w2(v);
        let w1 = sf.w2(z - b) * sf.w1(z - v) - sf.w1(z - b) * sf.w2(z - v);
        let w7 = sf.w1(z - b) * sf.w1(z - v) - sf.w2(z - v) * sf.w(z - b);
        let e = ((phi - zeta) * (z - v)).exp();
        if rel(w2, 4.0 / s4 * ((phi - zeta) * v).exp()) >= 1e-10
            || rel(w1, 4.0 * q / s4 * e * sf.w(v - b)) >= 1e-10
            || rel(w7, 4.0 / s4 * e * sf.z(v - b)) >= 1e-10
        {
            failures.push(format!("brownian {i}: W2/W1/W7"));
        }
        if rel(sf.w1(0.0), 2.0 / s2) >= 1e-12 {
            failures.push(format!("brownian {i}: W'(0)"));
        }
        let u = 50.0 / phi;
        if (sf.wk_scaled(u, 2) / sf.wk_scaled(u, 1) - phi).abs() >= 1e-6 {
            failures.push(format!("brownian {i}: W''/W' limit"));
        }
    }
    for i in 0..50 {
        let m = random_hyperexp(&mut rng);
        let sf = ScaleFunctions::new(&m).unwrap();
        let phi = sf.phi();
        for _ in 0..5 {
            let theta = phi + rng.random_range(0.1..5.0);
            let expect = 1.0 / (m.laplace_exponent(theta) - m.q());
            if rel(laplace_of_w(&sf, theta), expect) >= 1e-8 {
                failures.push(format!("hyperexp {i}: transform at {theta}"));
            }
        }
        let span = 20.0 / phi;
        let l = |u: f64| sf.wk_scaled(u, 1).ln() + phi * u;
        for _ in 0..20 {
            let (x, y) = (rng.random_range(0.0..span), rng.random_range(0.0..span));
            let mid = 0.5 * (x + y);
            if l(mid) > 0.5 * (l(x) + l(y)) + 1e-12 * (1.0 + l(mid).abs()) {
                failures.push(format!("hyperexp {i}: log-convexity"));
            }
        }
    }
    let detail = format!("150 models, {} failures {:?}", failures.len(), failures.iter().take(3).collect::<Vec<_>>());
    (failures.is_empty(), detail)
}

fn boundary_identities() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let r = RewardFunction::reference_rational();
    let mut worst = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let m = LevyModel::brownian(rng.random_range(0.5..3.0), rng.random_range(0.8..3.0), rng.random_range(0.05..0.5))
            .unwrap();
        let sf = ScaleFunctions::new(&m).unwrap();
        let mut levels = vec![rng.random_range(0.0..2.0)];
        for _ in 0..2 * rng.random_range(0..3usize) {
            let last = *levels.last().unwrap();
            levels.push(last + rng.random_range(0.05..1.5));
        }
        let bset = BarrierSet::new(levels).unwrap();
        let top = bset.last();
        let v = top + rng.random_range(0.0..4.0);
        let (f, df) = f_surface(&sf, &r, &bset, v, v + 1e-12 * (1.0 + v)).unwrap();
        // (L - q)H with H(v) = G(v) - G(top) + V(top), from the value function.
        let vf = ValueFunction::new(&sf, &r, bset.clone()).unwrap();
        let h = r.integral(v) - r.integral(top) + vf.value(top);
        let (g, g1, _) = r.g_eval(v).unwrap();
        let s2 = m.sigma() * m.sigma();
        let gen = s2 / 2.0 * g1 + m.mu() * g - m.q() * h;
        worst.0 = worst.0.max(rel(f, s2 * g / 2.0));
        worst.1 = worst.1.max(rel(df, gen));
    }
    (
        worst.0 < 1e-6 && worst.1 < 1e-6,
        format!("200 cases, worst relative error F {:.2e}, dF/dz {:.2e}", worst.0, worst.1),
    )
}

fn monte_carlo_agreement() -> (bool, String) {
    let m = model(2.4);
    let sf = ScaleFunctions::new(&m).unwrap();
    let r = RewardFunction::reference_rational();
    let optimal = solve(&sf, &r, &SolveOptions { trace: false, ..SolveOptions::default() }).unwrap().barriers;
    let sets = [
        optimal,
        BarrierSet::single(0.9165).unwrap(),
        BarrierSet::single(0.5).unwrap(),
        BarrierSet::single(1.6).unwrap(),
        BarrierSet::new(vec![0.6, 1.0, 1.8]).unwrap(),
    ];
    let xs = [0.4, 1.0, 1.3, 1.7, 2.5];
    let mut hits = 0;
    let mut worst = 0.0f64;
    let mut misses = Vec::new();
    for (si, bset) in sets.iter().enumerate() {
        let vf = ValueFunction::new(&sf, &r, bset.clone()).unwrap();
        for (xi, &x0) in xs.iter().enumerate() {
            let cfg = SimConfig {
                n_paths: 200_000,
                dt: 1e-4,
                x0,
                bridge: true,
                seed: 1000 + (5 * si + xi) as u64,
                ..SimConfig::default()
            };
            let est = simulate_value(&m, &r, bset, &cfg).unwrap();
            let z = (est.mean - vf.value(x0)) / est.stderr;
            worst = worst.max(z.abs());
            if z.abs() <= 3.0 {
                hits += 1;
            } else {
                misses.push(format!("set {si} x={x0}: z={z:.2}"));
            }
        }
    }
    (hits * 100 >= 95 * 25, format!("{hits}/25 cells within 3 stderr, worst |z|={worst:.2} {misses:?}"))
}

fn smooth_pasting() -> (bool, String) {
    let sf = ScaleFunctions::new(&model(2.4)).unwrap();
    let r = RewardFunction::reference_rational();
    let sol = solve(&sf, &r, &SolveOptions { trace: false, ..SolveOptions::default() }).unwrap();
    let rep = check_hjb(&sol.value, &GridSpec::default());
    let optimal_ok = rep.pasting.iter().all(|p| p.c0_ok && p.c1_ok && (!p.requires_c2 || p.c2_ok));
    let mut levels = sol.barriers.levels().to_vec();
    levels[1] += 0.05;
    let vf = ValueFunction::new(&sf, &r, BarrierSet::new(levels).unwrap()).unwrap();
    let bad = check_hjb(&vf, &GridSpec::default());
    let gap = bad.pasting.iter().find(|p| p.index == 1).unwrap();
    let gaps: Vec<String> =
        rep.pasting.iter().map(|p| format!("b{}: {:.1e}/{:.1e}/{:.1e}", p.index + 1, p.gap_v, p.gap_d1, p.gap_d2)).collect();
    (
        optimal_ok && gap.c0_ok && !gap.c1_ok,
        format!("optimal gaps V/V'/V'' {gaps:?}; perturbed b2 V' gap {:.3e}", gap.gap_d1),
    )
}

fn closed_form_examples() -> (bool, String) {
    let sf = ScaleFunctions::new(&model(2.4)).unwrap();
    let sq = RewardFunction::new(RewardKind::Power { alpha: 2.0 }).unwrap();
    let opts = OneBarrierOptions { keep_diagnostics: true, ..OneBarrierOptions::default() };
    let sol = find_bstar(&sf, &sq, &opts).unwrap();
    let signs: Vec<f64> = sol.diagnostics.iter().map(|d| d.2).filter(|d| *d != 0.0).collect();
    let changes = signs.windows(2).filter(|w| w[0].signum() != w[1].signum()).count();
    let (_, dfb) = f_ratio(&sf, &sq, sol.bstar);

    let flat = ScaleFunctions::new(&LevyModel::brownian(-0.5, 1.0, 0.3).unwrap()).unwrap();
    let ex = RewardFunction::new(RewardKind::Exponential { beta: 0.8 }).unwrap();
    let b_exp = find_bstar(&flat, &ex, &OneBarrierOptions::default()).unwrap().bstar;

    let c = RewardFunction::new(RewardKind::Constant { c: 3.0 }).unwrap();
    let b_c = find_bstar(&sf, &c, &OneBarrierOptions::default()).unwrap().bstar;
    let ok = changes == 1 && flat.a_star() == 0.0 && b_exp == 0.0 && (b_c - sf.a_star()).abs() <= 1e-6;
    (
        ok,
        format!(
            "x^2: {changes} sign change, b*={:.5} F'(b*)={dfb:.1e}; exp with a*=0: b*={b_exp}; constant: b*-a*={:.1e}",
            sol.bstar,
            b_c - sf.a_star()
        ),
    )
}

#[test]
fn acceptance() {
    let results = [
        timed(1, "one-barrier reproduction", one_barrier_reproduction),
        timed(2, "multibarrier reproduction", || {
            let t = Instant::now();
            let (ok, d) = multibarrier_reproduction();
            (ok && t.elapsed().as_secs_f64() < 60.0, d)
        }),
        timed(3, "scale-function property suite", || {
            let t = Instant::now();
            let (ok, d) = scale_function_suite();
            (ok && t.elapsed().as_secs_f64() < 30.0, d)
        }),
        timed(4, "F-surface boundary identities", boundary_identities),
        timed(5, "Monte Carlo agreement", || {
            let t = Instant::now();
            let (ok, d) = monte_carlo_agreement();
            (ok && t.elapsed().as_secs_f64() < 600.0, d)
        }),
        timed(6, "smooth-pasting suite", smooth_pasting),
        timed(7, "closed-form examples", closed_form_examples),
    ];
    let failed: Vec<u32> = results.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    println!("acceptance: {}/{} criteria passed", results.len() - failed.len(), results.len());
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
