//! Catalogue of constructed critical points and closed-form realizations
//! written out independently of the library.

#![allow(dead_code)]

use shallow_landscape::construct::{
    make_leaky_saddle, make_leaky_trivial_saddle, make_quadratic_global_min, make_quadratic_saddle, make_relu_local_min,
    make_relu_saddle, make_relu_trivial_saddle, MassSplit, MinNeuron, QuadNeuron, TrivialSaddleKind,
};
use shallow_landscape::{NetworkParams, Scalar, TargetSpec};

pub const MAX_WIDTH: usize = 8;
pub const GAMMAS: [f64; 3] = [0.01, 0.04, 0.25];

/// `(alpha, beta, t0, t1)` as exact fractions `(p, q)`.
pub const TARGETS: [[(i64, i64); 4]; 3] = [
    [(1, 1), (0, 1), (0, 1), (1, 1)],
    [(-2, 1), (3, 1), (-1, 1), (2, 1)],
    [(1, 2), (0, 1), (0, 1), (4, 1)],
];

pub fn targets<S: Scalar>() -> Vec<TargetSpec<S>> {
    TARGETS
        .iter()
        .map(|t| {
            let q = |(p, d): (i64, i64)| S::ratio(p, d);
            TargetSpec::new(q(t[0]), q(t[1]), q(t[2]), q(t[3])).unwrap()
        })
        .collect()
}

pub struct Labeled<S> {
    pub label: String,
    pub net: NetworkParams<S>,
}

fn labeled<S>(label: String, net: NetworkParams<S>) -> Labeled<S> {
    Labeled { label, net }
}

pub fn relu_minima<S: Scalar>(t: &TargetSpec<S>) -> Vec<Labeled<S>> {
    let mut out = Vec::new();
    for width in 1..=MAX_WIDTH {
        let choices = [MinNeuron::inactive(), MinNeuron::left(t), MinNeuron::right(t)];
        let menus = [
            vec![choices[0].clone(); width],
            vec![choices[1].clone(); width],
            vec![choices[2].clone(); width],
            (0..width).map(|j| choices[j % 3].clone()).collect(),
        ];
        for (k, menu) in menus.iter().enumerate() {
            out.push(labeled(format!("relu min N={width} menu {k}"), make_relu_local_min(width, t, menu).unwrap()));
        }
    }
    out
}

pub fn relu_saddles<S: Scalar>(t: &TargetSpec<S>) -> Vec<Labeled<S>> {
    let mut out = Vec::new();
    for width in 2..=MAX_WIDTH {
        for n in (2..=width).step_by(2) {
            let net = make_relu_saddle(width, t, n, &MassSplit::unit(n)).unwrap();
            out.push(labeled(format!("relu saddle N={width} n={n}"), net));
            if width > n {
                let mut counts = vec![1; n];
                counts[n - 1] = 2;
                let net = make_relu_saddle(width, t, n, &MassSplit::Equal(counts)).unwrap();
                out.push(labeled(format!("relu saddle N={width} n={n} shared"), net));
            }
        }
    }
    out
}

pub fn relu_trivial_saddles<S: Scalar>(t: &TargetSpec<S>) -> Vec<Labeled<S>> {
    let mut out = Vec::new();
    for width in 1..=MAX_WIDTH {
        for kind in TrivialSaddleKind::ALL {
            let net = make_relu_trivial_saddle(width, t, kind).unwrap();
            out.push(labeled(format!("relu {} N={width}", kind.name()), net));
        }
    }
    out
}

pub fn leaky_saddles<S: Scalar>(t: &TargetSpec<S>, gamma: &S) -> Vec<Labeled<S>> {
    let mut out = Vec::new();
    for width in 1..=MAX_WIDTH {
        for n in 1..=width {
            for sigma in [1i8, -1] {
                let (net, _) = make_leaky_saddle(width, t, gamma, n, sigma, &MassSplit::unit(n)).unwrap();
                out.push(labeled(format!("leaky γ={gamma} saddle N={width} n={n} σ={sigma}"), net));
            }
        }
    }
    out
}

pub fn leaky_trivial_saddles<S: Scalar>(t: &TargetSpec<S>, gamma: &S) -> Vec<Labeled<S>> {
    (1..=MAX_WIDTH)
        .map(|width| labeled(format!("leaky γ={gamma} flat N={width}"), make_leaky_trivial_saddle(width, t, gamma).unwrap()))
        .collect()
}

pub fn quadratic_saddles<S: Scalar>(t: &TargetSpec<S>) -> Vec<Labeled<S>> {
    let palette = [
        QuadNeuron::ZeroSlope { b: S::zero(), v: S::one() },
        QuadNeuron::ZeroSlope { b: S::one(), v: S::zero() },
        QuadNeuron::FlatCentered { w: S::one() },
        QuadNeuron::ZeroSlope { b: S::zero(), v: -S::two() },
        QuadNeuron::FlatCentered { w: -S::ratio(3, 2) },
    ];
    let mut out = Vec::new();
    for width in 1..=MAX_WIDTH {
        for shift in 0..palette.len() {
            let menu: Vec<_> = (0..width).map(|j| palette[(j + shift) % palette.len()].clone()).collect();
            out.push(labeled(format!("quadratic saddle N={width} shift {shift}"), make_quadratic_saddle(width, t, &menu).unwrap()));
        }
    }
    out
}

pub fn quadratic_global_minima<S: Scalar>(t: &TargetSpec<S>) -> Vec<Labeled<S>> {
    (2..=MAX_WIDTH)
        .map(|width| labeled(format!("quadratic global min N={width}"), make_quadratic_global_min(width, t).unwrap()))
        .collect()
}

/// ReLU saddle realization with `n` kinks on `[t0, t1]`:
/// on the `i`-th of `n + 1` equal pieces,
/// `f(x) = αx + β - (-1)^i α/(n+1) (x - t0 - (i + 1/2)(t1 - t0)/(n+1))`.
pub fn relu_saddle_formula<S: Scalar>(t: &TargetSpec<S>, n: usize, x: &S) -> S {
    let np1 = S::from_int(n as i64 + 1);
    let len = t.t1.clone() - t.t0.clone();
    let mut i = 0;
    while i < n && *x > t.t0.clone() + S::from_int(i as i64 + 1) * len.clone() / np1.clone() {
        i += 1;
    }
    let sign = if i % 2 == 0 { S::one() } else { -S::one() };
    let centre = t.t0.clone() + (S::from_int(i as i64) + S::ratio(1, 2)) * len / np1.clone();
    t.alpha.clone() * x.clone() + t.beta.clone() - sign * t.alpha.clone() / np1 * (x.clone() - centre)
}

/// Leaky saddle realization with `n` kinks and orientation `sigma`.
pub fn leaky_saddle_formula(t: &TargetSpec<f64>, gamma: f64, n: usize, sigma: i8, x: f64) -> f64 {
    let s = f64::from(sigma);
    let ga = gamma.powf((1.0 - s) / 4.0);
    let gb = gamma.powf((1.0 - s * if n % 2 == 0 { 1.0 } else { -1.0 }) / 4.0);
    let r = (1.0 + gamma).sqrt();
    let len = t.t1 - t.t0;
    let delta = ga + gb + (n as f64 - 1.0) * r;
    let q = |i: usize| t.t0 + len / delta * (ga + (i as f64 - 1.0) * r);
    let mut i = 0;
    while i < n && x > q(i + 1) {
        i += 1;
    }
    let parity = if i % 2 == 0 { 1.0 } else { -1.0 };
    let scale = -s * parity * (1.0 - gamma) * t.alpha / delta;
    let u = x - t.t0;
    let shape = if i == 0 {
        u / ga - len / (2.0 * delta)
    } else if i < n {
        u / r - (i as f64 - 0.5) * len / delta - ga * len / (delta * r)
    } else {
        u / gb + len / (2.0 * delta) - len / gb
    };
    t.alpha * x + t.beta + scale * shape
}

/// `{α²(t1-t0)³ / (12(n+1)⁴) : n = 0, 2, 4, ..}` for widths up to `width`, plus zero.
pub fn relu_loss_values(t: &TargetSpec<f64>, width: usize) -> Vec<f64> {
    let len = t.t1 - t.t0;
    let mut out = vec![0.0];
    for n in (0..=width).step_by(2) {
        out.push(t.alpha * t.alpha * len.powi(3) / (12.0 * ((n + 1) as f64).powi(4)));
    }
    out
}
