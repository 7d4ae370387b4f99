//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report is always printed;
//! the process exits non-zero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use common::*;
use shallow_landscape::construct::{
    make_leaky_duplication, make_leaky_saddle, make_relu_local_min, make_relu_saddle, transform_p, transform_q, MassSplit,
    MinNeuron,
};
use shallow_landscape::descent::{sweep, InitSpec, RunStatus, SimConfig};
use shallow_landscape::scalar::parse_rational;
use shallow_landscape::taxonomy::stability_margin;
use shallow_landscape::verify::{descent_direction_search, fd_gradient, local_min_margin, saddle_probe, FdSide};
use shallow_landscape::wire::realization_csv;
use shallow_landscape::{
    generalized_gradient, loss, realize, Activation, GradientVector, NetworkParams, Rational, Scalar, TargetSpec, Tolerances,
};

/// Pinned tolerances.
const LADDER_REL: f64 = 1e-12;
const ZERO_GRAD: f64 = 1e-12;
const FD_REL: f64 = 1e-5;
const FD_CENTRAL_STEP: f64 = 1e-6;
const FD_RIGHT_STEP: f64 = 1e-7;
const KIND_MARGIN: f64 = 1e-4;
const NEG_EIG: f64 = -1e-10;
const GAMMA_FACTOR_TOL: f64 = 1e-10;
const ESCAPE_RADIUS: f64 = 0.1;
const ESCAPE_TRIALS: usize = 2_000;
const NO_ESCAPE_TRIALS: usize = 100_000;
const NO_ESCAPE_SHRINK: f64 = 0.99;
const REALIZATION_ABS: f64 = 1e-12;
const TRANSFORM_REL: f64 = 1e-12;
const GD_LADDER_TOL: f64 = 1e-3;

type Outcome = std::result::Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn r(p: i64, q: i64) -> Rational {
    Rational::ratio(p, q)
}

// ------------------------------------------------------------------ 1

fn loss_ladder() -> Outcome {
    let mut checked = 0;
    let tf = TargetSpec::<f64>::identity();
    let tq = TargetSpec::<Rational>::identity();
    for width in 1..=4 {
        for menu in [vec![MinNeuron::inactive(); width], vec![MinNeuron::left(&tf); width], vec![MinNeuron::right(&tf); width]] {
            let l = loss(&make_relu_local_min(width, &tf, &menu).unwrap(), &tf);
            ensure(rel_err(l, 1.0 / 12.0) <= LADDER_REL, || format!("local min N={width}: loss {l}"))?;
            checked += 1;
        }
        for menu in [vec![MinNeuron::inactive(); width], vec![MinNeuron::left(&tq); width], vec![MinNeuron::right(&tq); width]] {
            let l = loss(&make_relu_local_min(width, &tq, &menu).unwrap(), &tq);
            ensure(l == r(1, 12), || format!("rational local min N={width}: loss {l}"))?;
            checked += 1;
        }
    }
    for n in [2usize, 4, 6] {
        let expect = 1.0 / (12.0 * ((n + 1) as f64).powi(4));
        let expect_q = r(1, 12 * (n as i64 + 1).pow(4));
        for width in [n, n + 2] {
            let l = loss(&make_relu_saddle(width, &tf, n, &MassSplit::unit(n)).unwrap(), &tf);
            ensure(rel_err(l, expect) <= LADDER_REL, || format!("saddle n={n} N={width}: loss {l}, want {expect}"))?;
            let l = loss(&make_relu_saddle(width, &tq, n, &MassSplit::unit(n)).unwrap(), &tq);
            ensure(l == expect_q, || format!("rational saddle n={n} N={width}: loss {l}"))?;
            checked += 2;
        }
    }
    Ok(format!("{checked} constructions on the ladder"))
}

// ------------------------------------------------------------------ 2

fn float_zero(items: &[Labeled<f64>], t: &TargetSpec<f64>, worst: &mut f64) -> std::result::Result<usize, String> {
    let tol = Tolerances::default();
    for item in items {
        let g = generalized_gradient(&item.net, t, &tol).sup_norm();
        *worst = worst.max(g);
        ensure(g <= ZERO_GRAD, || format!("{} on {t:?}: |G| = {g:e}", item.label))?;
    }
    Ok(items.len())
}

fn exact_zero(items: &[Labeled<Rational>], t: &TargetSpec<Rational>) -> std::result::Result<usize, String> {
    let tol = Tolerances::default();
    for item in items {
        let g = generalized_gradient(&item.net, t, &tol);
        ensure(g.is_exactly_zero(), || format!("{} (rational): G = {:?}", item.label, g.to_vec()))?;
    }
    Ok(items.len())
}

fn zero_gradients() -> Outcome {
    let mut float_count = 0;
    let mut exact_count = 0;
    let mut worst = 0.0f64;
    for t in targets::<f64>() {
        float_count += float_zero(&relu_minima(&t), &t, &mut worst)?;
        float_count += float_zero(&relu_saddles(&t), &t, &mut worst)?;
        float_count += float_zero(&relu_trivial_saddles(&t), &t, &mut worst)?;
        float_count += float_zero(&quadratic_saddles(&t), &t, &mut worst)?;
        float_count += float_zero(&quadratic_global_minima(&t), &t, &mut worst)?;
        for gamma in GAMMAS {
            float_count += float_zero(&leaky_saddles(&t, &gamma), &t, &mut worst)?;
            float_count += float_zero(&leaky_trivial_saddles(&t, &gamma), &t, &mut worst)?;
        }
    }
    for t in targets::<Rational>() {
        exact_count += exact_zero(&relu_minima(&t), &t)?;
        exact_count += exact_zero(&relu_saddles(&t), &t)?;
        exact_count += exact_zero(&relu_trivial_saddles(&t), &t)?;
        exact_count += exact_zero(&quadratic_saddles(&t), &t)?;
        exact_count += exact_zero(&quadratic_global_minima(&t), &t)?;
        let gamma = r(9, 16);
        exact_count += exact_zero(&leaky_saddles(&t, &gamma), &t)?;
        exact_count += exact_zero(&leaky_trivial_saddles(&t, &gamma), &t)?;
    }
    Ok(format!("{float_count} float points (max |G| = {worst:.1e}), {exact_count} rational points exactly zero"))
}

// ------------------------------------------------------------------ 3

fn random_target(rng: &mut ChaCha8Rng) -> TargetSpec<f64> {
    let alpha = rng.gen_range(0.5..2.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let t0 = rng.gen_range(-2.0..1.0);
    TargetSpec::new(alpha, rng.gen_range(-2.0..2.0), t0, t0 + rng.gen_range(0.5..3.0)).unwrap()
}

fn random_activation(kind: usize, rng: &mut ChaCha8Rng) -> Activation<f64> {
    match kind {
        0 => Activation::Relu,
        1 => Activation::leaky(rng.gen_range(0.01..0.99)).unwrap(),
        _ => Activation::Quadratic,
    }
}

/// Random network whose neurons are all at least `KIND_MARGIN` from a change of kind.
fn stable_network(kind: usize, t: &TargetSpec<f64>, rng: &mut ChaCha8Rng) -> NetworkParams<f64> {
    let act = random_activation(kind, rng);
    let width = rng.gen_range(1..=MAX_WIDTH);
    let mut w = Vec::new();
    let mut b = Vec::new();
    while w.len() < width {
        let (wj, bj) = (rng.gen_range(-2.0..2.0), rng.gen_range(-3.0..3.0));
        if stability_margin(wj, bj, t.t0, t.t1) >= KIND_MARGIN {
            w.push(wj);
            b.push(bj);
        }
    }
    let v = (0..width).map(|_| rng.gen_range(-2.0..2.0)).collect();
    NetworkParams::new(w, b, v, rng.gen_range(-1.0..1.0), act).unwrap()
}

fn fd_mismatch(fd: &GradientVector<f64>, an: &GradientVector<f64>) -> f64 {
    let diff = fd.to_vec().iter().zip(an.to_vec()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    diff / an.sup_norm().max(1e-8)
}

fn gradient_oracle() -> Outcome {
    let tol = Tolerances::default();
    let mut worst = 0.0f64;
    for kind in 0..3 {
        let errs: Vec<std::result::Result<f64, String>> = (0..1000u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(1000 * kind as u64 + i);
                let t = random_target(&mut rng);
                let net = stable_network(kind, &t, &mut rng);
                let fd = fd_gradient(&net, &t, FD_CENTRAL_STEP, FdSide::Central).map_err(|e| e.to_string())?;
                let e = fd_mismatch(&fd, &generalized_gradient(&net, &t, &tol));
                ensure(e <= FD_REL, || format!("{} network {i}: relative error {e:e}", net.activation.name()))?;
                Ok(e)
            })
            .collect();
        for e in errs {
            worst = worst.max(e?);
        }
    }
    let mut worst_right = 0.0f64;
    for i in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(50_000 + i);
        let t = random_target(&mut rng);
        let mut net = stable_network((i % 2) as usize, &t, &mut rng);
        let j = rng.gen_range(0..net.width());
        net.w[j] = 0.0;
        net.b[j] = 0.0;
        net.v[j] = rng.gen_range(0.5..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let fd = fd_gradient(&net, &t, FD_RIGHT_STEP, FdSide::Right).map_err(|e| e.to_string())?;
        let e = fd_mismatch(&fd, &generalized_gradient(&net, &t, &tol));
        ensure(e <= FD_REL, || format!("degenerate network {i}: right-sided relative error {e:e}"))?;
        worst_right = worst_right.max(e);
    }
    Ok(format!("3000 central checks (worst {worst:.1e}), 100 right-sided degenerate checks (worst {worst_right:.1e})"))
}

// ------------------------------------------------------------------ 4

fn saddle_spectra() -> Outcome {
    let tol = Tolerances::default();
    let mut saddles = Vec::new();
    for t in targets::<f64>() {
        for item in relu_saddles(&t) {
            saddles.push((t.clone(), item));
        }
        for gamma in GAMMAS {
            for item in leaky_saddles(&t, &gamma) {
                saddles.push((t.clone(), item));
            }
        }
    }
    let results: Vec<std::result::Result<(f64, bool), String>> = saddles
        .par_iter()
        .map(|(t, item)| {
            let probe = saddle_probe(&item.net, t, &tol).map_err(|e| format!("{}: {e}", item.label))?;
            let m = probe.certified_min_eigenvalue();
            ensure(m < NEG_EIG, || format!("{} on {t:?}: min eigenvalue {m:e}", item.label))?;
            Ok((m, probe.block_certifies()))
        })
        .collect();
    let mut block_ok = 0;
    let mut least_negative = f64::NEG_INFINITY;
    for res in results {
        let (m, certified) = res?;
        least_negative = least_negative.max(m);
        block_ok += usize::from(certified);
    }
    let unit = TargetSpec::<f64>::identity();
    for n in [2usize, 4, 6, 8] {
        let nf = n as f64;
        let expect = (32.0 * nf * nf - 21.0 * nf + 3.0) / (16.0 * nf * (2.0 * nf - 1.0));
        let net = make_relu_saddle(n, &unit, n, &MassSplit::unit(n)).unwrap();
        let probe = saddle_probe(&net, &unit, &tol).map_err(|e| e.to_string())?;
        let got = probe.gamma_factor.ok_or("no Γ reported")?;
        ensure((got - expect).abs() <= GAMMA_FACTOR_TOL, || format!("n={n}: Γ = {got}, want {expect}"))?;
    }
    Ok(format!(
        "{} saddles with negative curvature (largest min eigenvalue {least_negative:.2e}); \
         selected block alone certifies {block_ok}; Γ matches for n = 2, 4, 6, 8",
        saddles.len()
    ))
}

// ------------------------------------------------------------------ 5

fn escape() -> Outcome {
    let mut saddles = Vec::new();
    for t in targets::<f64>() {
        let mut push = |items: Vec<Labeled<f64>>| saddles.extend(items.into_iter().map(|i| (t.clone(), i)));
        push(relu_saddles(&t));
        push(relu_trivial_saddles(&t));
        push(quadratic_saddles(&t));
        for gamma in GAMMAS {
            push(leaky_saddles(&t, &gamma));
            push(leaky_trivial_saddles(&t, &gamma));
        }
    }
    for (k, (t, item)) in saddles.iter().enumerate() {
        let found = descent_direction_search(&item.net, t, ESCAPE_RADIUS, ESCAPE_TRIALS, k as u64).map_err(|e| e.to_string())?;
        ensure(found.is_some(), || format!("no escape found at {} on {t:?}", item.label))?;
    }

    let mut minima = Vec::new();
    for t in targets::<f64>() {
        for item in relu_minima(&t) {
            if item.net.width() % 3 == 1 {
                minima.push((t.clone(), item));
            }
        }
    }
    for (k, (t, item)) in minima.iter().enumerate() {
        let r0 = local_min_margin(&item.net, t).ok_or_else(|| format!("{}: not recognized as a local minimum", item.label))?;
        let found = descent_direction_search(&item.net, t, NO_ESCAPE_SHRINK * r0, NO_ESCAPE_TRIALS, 7_000 + k as u64)
            .map_err(|e| e.to_string())?;
        ensure(found.is_none(), || format!("{} on {t:?}: lower loss found inside the margin ball", item.label))?;
    }
    Ok(format!(
        "escape at all {} saddles; none at {} local minima ({NO_ESCAPE_TRIALS} samples each)",
        saddles.len(),
        minima.len()
    ))
}

// ------------------------------------------------------------------ 6

fn realizations() -> Outcome {
    let tol = Tolerances::default();
    let mut worst = 0.0f64;
    let mut compare = |label: &str, net: &NetworkParams<f64>, t: &TargetSpec<f64>, want: &dyn Fn(f64) -> f64| {
        let form = realize(net, t, &tol);
        for k in 0..1000 {
            let x = t.t0 + (t.t1 - t.t0) * k as f64 / 999.0;
            let expect = want(x);
            for got in [form.evaluate(&x).unwrap(), net.eval_direct(&x)] {
                let e = (got - expect).abs();
                worst = worst.max(e);
                ensure(e <= REALIZATION_ABS * expect.abs().max(1.0), || format!("{label} at x = {x}: {got} vs {expect}"))?;
            }
        }
        Ok::<(), String>(())
    };
    let mut count = 0;
    for t in targets::<f64>() {
        for n in [2usize, 4, 6, 8] {
            let net = make_relu_saddle(8, &t, n, &MassSplit::unit(n)).unwrap();
            compare(&format!("relu n={n}"), &net, &t, &|x| relu_saddle_formula(&t, n, &x))?;
            count += 1;
        }
        for gamma in GAMMAS {
            for n in 1..=6 {
                for sigma in [1i8, -1] {
                    let (net, _) = make_leaky_saddle(n, &t, &gamma, n, sigma, &MassSplit::unit(n)).unwrap();
                    compare(&format!("leaky γ={gamma} n={n} σ={sigma}"), &net, &t, &|x| {
                        leaky_saddle_formula(&t, gamma, n, sigma, x)
                    })?;
                    count += 1;
                }
            }
        }
    }

    let unit = TargetSpec::<Rational>::identity();
    for n in [2usize, 4] {
        let net = make_relu_saddle(n, &unit, n, &MassSplit::unit(n)).unwrap();
        let csv = realization_csv(&net, &unit, 1000, &tol).map_err(|e| e.to_string())?;
        let mut lines = csv.lines();
        ensure(lines.next() == Some("x,f,target"), || "bad CSV header".into())?;
        let mut rows = 0;
        for line in lines {
            let cols: Vec<_> = line.split(',').map(|c| parse_rational(c).ok_or(format!("bad CSV cell {c:?}"))).collect();
            let [x, f, g] = [cols[0].clone()?, cols[1].clone()?, cols[2].clone()?];
            ensure(f == relu_saddle_formula(&unit, n, &x) && g == x, || format!("n={n}: CSV row {line}"))?;
            rows += 1;
        }
        ensure(rows == 1001, || format!("n={n}: {rows} CSV rows"))?;
    }
    Ok(format!("{count} saddle realizations match (max error {worst:.1e}); rational CSV for n = 2, 4 exact"))
}

// ------------------------------------------------------------------ 7

fn random_network(rng: &mut ChaCha8Rng, act: Activation<f64>) -> NetworkParams<f64> {
    let width = rng.gen_range(1..=MAX_WIDTH);
    let mut draw = |lo: f64, hi: f64| (0..width).map(|_| rng.gen_range(lo..hi)).collect::<Vec<_>>();
    let (w, b, v) = (draw(-2.0, 2.0), draw(-3.0, 3.0), draw(-2.0, 2.0));
    NetworkParams::new(w, b, v, rng.gen_range(-1.0..1.0), act).unwrap()
}

fn transform_identities() -> Outcome {
    let mut worst = 0.0f64;
    let mut check = |what: &str, i: usize, lhs: f64, rhs: f64| {
        let e = rel_err(lhs, rhs);
        worst = worst.max(e);
        ensure(e <= TRANSFORM_REL, || format!("{what} at network {i}: {lhs} vs {rhs}"))
    };
    for i in 0..1000 {
        let mut rng = ChaCha8Rng::seed_from_u64(90_000 + i as u64);
        let t = random_target(&mut rng);
        let act = random_activation(i % 3, &mut rng);
        let net = random_network(&mut rng, act);
        let l = loss(&net, &t);
        let (p, pt) = transform_p(&net, &t).map_err(|e| e.to_string())?;
        check("P", i, l, t.alpha * t.alpha * loss(&p, &pt))?;
        let (q, qt) = transform_q(&net, &t);
        check("Q", i, l, (t.t1 - t.t0) * loss(&q, &qt))?;

        let gamma = rng.gen_range(0.01..0.99);
        let leaky = random_network(&mut rng, Activation::leaky(gamma).unwrap());
        let dup = make_leaky_duplication(&leaky).map_err(|e| e.to_string())?;
        check("duplication", i, loss(&leaky, &t), loss(&dup, &t))?;
    }
    Ok(format!("1000 networks each for P, Q and duplication (max relative error {worst:.1e})"))
}

// ------------------------------------------------------------------ 8

fn gd_terminal_set() -> Outcome {
    let t = TargetSpec::<f64>::identity();
    let config = SimConfig { step_size: 0.2, max_iters: 1_000_000, stop_grad_norm: 1e-8, seed: 0, record_every: usize::MAX };
    let inits = InitSpec::Random { count: 200, width: 4, activation: Activation::Relu, scale: 0.5 };
    let summary = sweep(&inits, &t, &config, GD_LADDER_TOL).map_err(|e| e.to_string())?;
    let values = relu_loss_values(&t, 4);
    let converged: Vec<_> = summary.rows.iter().filter(|r| r.status == RunStatus::Converged).collect();
    ensure(!converged.is_empty(), || "no run converged".into())?;
    let mut hist = vec![0usize; values.len()];
    for row in &converged {
        let (k, d) = values
            .iter()
            .enumerate()
            .map(|(k, v)| (k, (v - row.final_loss).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        ensure(d <= GD_LADDER_TOL, || format!("run {} ended at loss {} off the ladder", row.index, row.final_loss))?;
        hist[k] += 1;
    }
    let labels = ["0", "1/12", "1/972", "1/7500"];
    let hist: Vec<String> = labels.iter().zip(&hist).map(|(l, c)| format!("{l}: {c}")).collect();
    Ok(format!("{} of 200 runs converged, all on the ladder ({})", converged.len(), hist.join(", ")))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("loss ladder", Duration::from_secs(1), loss_ladder),
        ("zero-gradient certificates", Duration::from_secs(10), zero_gradients),
        ("gradient oracle", Duration::from_secs(30), gradient_oracle),
        ("saddle spectra", Duration::from_secs(5), saddle_spectra),
        ("escape / no escape", Duration::from_secs(60), escape),
        ("realization formulas", Duration::from_secs(10), realizations),
        ("transform identities", Duration::from_secs(10), transform_identities),
        ("gradient-descent terminal set", Duration::from_secs(300), gd_terminal_set),
    ];
    let mut failures = 0;
    for (k, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let over = elapsed > *budget;
        let status = if outcome.is_ok() && !over { "PASS" } else { "FAIL" };
        let detail = match &outcome {
            Ok(msg) => msg.clone(),
            Err(msg) => msg.clone(),
        };
        let timing = format!("{:.2}s of {}s{}", elapsed.as_secs_f64(), budget.as_secs(), if over { ", over budget" } else { "" });
        println!("{status} [{}] {name}: {detail} ({timing})", k + 1);
        if status == "FAIL" {
            failures += 1;
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
