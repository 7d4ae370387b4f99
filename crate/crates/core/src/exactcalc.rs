//! Closed-form loss, right-hand generalized gradient and second derivatives.
//!
//! Every quantity is a sum of integrals `∫ p(x) r(x) dx` or `∫ p(x) q(x) dx`
//! of explicit polynomials over explicit subintervals, where `r = f_φ - target`
//! is the residual in piecewise form.

use std::fmt;

use crate::error::{LandscapeError, Result};
use crate::model::{residual, Activation, NetworkParams, PiecewiseForm, TargetSpec};
use crate::poly::Poly;
use crate::scalar::{Scalar, Tolerances};
use crate::taxonomy::{classify_neurons, Interval, NeuronKind, NeuronReport};

/// `∫_{t0}^{t1} (f_φ(x) - αx - β)^2 dx`.
pub fn loss<S: Scalar>(params: &NetworkParams<S>, target: &TargetSpec<S>) -> S {
    residual(params, target, &Tolerances::default()).integrate_square()
}

/// Vector of right-hand partial derivatives of the loss.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector<S> {
    pub dw: Vec<S>,
    pub db: Vec<S>,
    pub dv: Vec<S>,
    pub dc: S,
}

impl<S: Scalar> GradientVector<S> {
    pub fn zeros(n: usize) -> Self {
        Self { dw: vec![S::zero(); n], db: vec![S::zero(); n], dv: vec![S::zero(); n], dc: S::zero() }
    }

    /// Entries flattened as `[dw.., db.., dv.., dc]`.
    pub fn to_vec(&self) -> Vec<S> {
        let mut out: Vec<S> = self.dw.iter().chain(&self.db).chain(&self.dv).cloned().collect();
        out.push(self.dc.clone());
        out
    }

    pub fn sup_norm(&self) -> f64 {
        self.to_vec().iter().map(|g| g.to_f64().abs()).fold(0.0, f64::max)
    }

    pub fn is_exactly_zero(&self) -> bool {
        self.to_vec().iter().all(|g| g.is_zero())
    }

    pub fn get(&self, coord: Coord) -> &S {
        match coord {
            Coord::W(j) => &self.dw[j],
            Coord::B(j) => &self.db[j],
            Coord::V(j) => &self.dv[j],
            Coord::C => &self.dc,
        }
    }
}

/// A single coordinate of `φ = (w, b, v, c)`; neuron indices are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Coord {
    W(usize),
    B(usize),
    V(usize),
    C,
}

impl Coord {
    pub fn neuron(self) -> Option<usize> {
        match self {
            Self::W(j) | Self::B(j) | Self::V(j) => Some(j),
            Self::C => None,
        }
    }

    /// Position in the flattened `[w.., b.., v.., c]` layout.
    pub fn flat_index(self, width: usize) -> usize {
        match self {
            Self::W(j) => j,
            Self::B(j) => width + j,
            Self::V(j) => 2 * width + j,
            Self::C => 3 * width,
        }
    }

    pub fn all(width: usize) -> Vec<Coord> {
        let mut out: Vec<Coord> = (0..width).map(Coord::W).collect();
        out.extend((0..width).map(Coord::B));
        out.extend((0..width).map(Coord::V));
        out.push(Coord::C);
        out
    }

    /// Parses `w3`, `b0`, `v1`, `c` (zero-based).
    pub fn parse(text: &str) -> Option<Coord> {
        let text = text.trim();
        if text == "c" {
            return Some(Coord::C);
        }
        let (head, tail) = text.split_at(1);
        let j: usize = tail.trim_start_matches('[').trim_end_matches(']').parse().ok()?;
        match head {
            "w" => Some(Coord::W(j)),
            "b" => Some(Coord::B(j)),
            "v" => Some(Coord::V(j)),
            _ => None,
        }
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::W(j) => write!(f, "w{j}"),
            Self::B(j) => write!(f, "b{j}"),
            Self::V(j) => write!(f, "v{j}"),
            Self::C => f.write_str("c"),
        }
    }
}

fn integrate_on<S: Scalar>(form: &PiecewiseForm<S>, weight: &Poly<S>, interval: &Interval<S>) -> S {
    match interval.bounds() {
        Some((lo, hi)) if lo < hi => form.integrate_against(weight, lo, hi),
        _ => S::zero(),
    }
}

/// Right-hand generalized gradient.
///
/// At a degenerate neuron the `w` partial integrates over the part of the
/// interval where `x ≥ 0` (that is where `h·x ≥ 0` for a small `h > 0`), and
/// the `b` partial over the whole interval.
pub fn generalized_gradient<S: Scalar>(
    params: &NetworkParams<S>,
    target: &TargetSpec<S>,
    tol: &Tolerances,
) -> GradientVector<S> {
    let res = residual(params, target, tol);
    let n = params.width();
    let mut grad = GradientVector::zeros(n);
    let whole = Interval::Closed(target.t0.clone(), target.t1.clone());
    let one = Poly::constant(S::one());
    let x = Poly::monomial(1);
    let two = S::two();
    grad.dc = two.clone() * integrate_on(&res, &one, &whole);

    match &params.activation {
        Activation::Quadratic => {
            for j in 0..n {
                let p = Poly::linear(params.w[j].clone(), params.b[j].clone());
                let m_p = integrate_on(&res, &p, &whole);
                let m_xp = integrate_on(&res, &(&x * &p), &whole);
                let m_pp = integrate_on(&res, &(&p * &p), &whole);
                let four_v = S::from_int(4) * params.v[j].clone();
                grad.dw[j] = four_v.clone() * m_xp;
                grad.db[j] = four_v * m_p;
                grad.dv[j] = two.clone() * m_pp;
            }
        }
        act => {
            let gamma = act.negative_slope().expect("piecewise-linear activation");
            let reports = classify_neurons(params, target, tol);
            let nonneg = whole.intersect(&Interval::Closed(S::zero(), S::max_of(S::zero(), target.t1.clone())));
            let neg = whole.intersect(&Interval::Closed(S::min_of(S::zero(), target.t0.clone()), S::zero()));
            for (j, rep) in reports.iter().enumerate() {
                let moments = |interval: &Interval<S>| (integrate_on(&res, &one, interval), integrate_on(&res, &x, interval));
                let (a0, a1) = moments(&rep.active_interval);
                let (c0, c1) = moments(&rep.complement_interval);
                let m0 = a0 + gamma.clone() * c0;
                let m1 = a1 + gamma.clone() * c1;
                let v = params.v[j].clone();
                if rep.kind == NeuronKind::Degenerate {
                    let (_, p1) = moments(&nonneg);
                    let (_, n1) = moments(&neg);
                    grad.dw[j] = two.clone() * v * (p1 + gamma.clone() * n1);
                } else {
                    grad.dw[j] = two.clone() * v.clone() * m1.clone();
                }
                grad.db[j] = two.clone() * params.v[j].clone() * m0.clone();
                grad.dv[j] = two.clone() * (params.w[j].clone() * m1 + params.b[j].clone() * m0);
            }
        }
    }
    grad
}

/// Smoothness class of the loss in one coordinate, weakest last.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Smoothness {
    Analytic,
    C2,
    C1,
    Differentiable,
    RightHandOnly,
}

impl Smoothness {
    pub fn name(self) -> &'static str {
        match self {
            Self::Analytic => "analytic",
            Self::C2 => "C2",
            Self::C1 => "C1",
            Self::Differentiable => "differentiable",
            Self::RightHandOnly => "right-hand-only",
        }
    }

    pub fn twice_differentiable(self) -> bool {
        self <= Self::C2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DifferentiabilityReport {
    pub entries: Vec<(Coord, Smoothness)>,
}

impl DifferentiabilityReport {
    pub fn of(&self, coord: Coord) -> Smoothness {
        self.entries.iter().find(|(c, _)| *c == coord).map(|(_, s)| *s).expect("coordinate in range")
    }
}

fn neuron_smoothness<S: Scalar>(rep: &NeuronReport<S>) -> Smoothness {
    match rep.kind {
        NeuronKind::Inactive | NeuronKind::SemiActive => Smoothness::Analytic,
        NeuronKind::Type1Active if rep.touches.is_none() => Smoothness::Analytic,
        NeuronKind::Type1Active | NeuronKind::SemiInactive => Smoothness::C1,
        NeuronKind::Type2Active => Smoothness::C2,
        NeuronKind::Degenerate if rep.flat => Smoothness::Differentiable,
        NeuronKind::Degenerate => Smoothness::RightHandOnly,
    }
}

/// Per-coordinate smoothness of the loss at `φ`, derived from the neuron taxonomy.
pub fn differentiability_report<S: Scalar>(
    params: &NetworkParams<S>,
    target: &TargetSpec<S>,
    tol: &Tolerances,
) -> DifferentiabilityReport {
    let n = params.width();
    let mut entries = Vec::with_capacity(3 * n + 1);
    let reports = classify_neurons(params, target, tol);
    let quadratic = matches!(params.activation, Activation::Quadratic);
    for rep in &reports {
        let s = if quadratic { Smoothness::Analytic } else { neuron_smoothness(rep) };
        entries.push((Coord::W(rep.index), s));
    }
    for rep in &reports {
        let s = if quadratic { Smoothness::Analytic } else { neuron_smoothness(rep) };
        entries.push((Coord::B(rep.index), s));
    }
    entries.extend((0..n).map(|j| (Coord::V(j), Smoothness::Analytic)));
    entries.push((Coord::C, Smoothness::Analytic));
    DifferentiabilityReport { entries }
}

/// Symmetric block of second derivatives in the listed coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianBlock<S> {
    pub coordinates: Vec<Coord>,
    pub matrix: Vec<Vec<S>>,
}

impl<S: Scalar> HessianBlock<S> {
    pub fn to_f64(&self) -> nalgebra::DMatrix<f64> {
        let k = self.coordinates.len();
        nalgebra::DMatrix::from_fn(k, k, |i, j| self.matrix[i][j].to_f64())
    }

    pub fn max_asymmetry(&self) -> f64 {
        let k = self.coordinates.len();
        let mut worst = 0.0f64;
        for i in 0..k {
            for j in 0..i {
                worst = worst.max((self.matrix[i][j].clone() - self.matrix[j][i].clone()).to_f64().abs());
            }
        }
        worst
    }

    /// Eigenvalues in increasing order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut eig: Vec<f64> = nalgebra::SymmetricEigen::new(self.to_f64()).eigenvalues.iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        eig
    }
}

/// Kernel `k_a` with `∂f/∂a = k_a · ρ_a`, plus the pieces where `ρ_a` is nonzero.
struct Kernel<S> {
    poly: Poly<S>,
    pieces: Vec<(Interval<S>, S)>,
}

fn kernel<S: Scalar>(
    params: &NetworkParams<S>,
    target: &TargetSpec<S>,
    reports: &[NeuronReport<S>],
    coord: Coord,
) -> Kernel<S> {
    let whole = Interval::Closed(target.t0.clone(), target.t1.clone());
    let Some(j) = coord.neuron() else {
        return Kernel { poly: Poly::constant(S::one()), pieces: vec![(whole, S::one())] };
    };
    let p = Poly::linear(params.w[j].clone(), params.b[j].clone());
    let v = params.v[j].clone();
    match &params.activation {
        Activation::Quadratic => {
            let two_v = S::two() * v;
            let poly = match coord {
                Coord::W(_) => (&Poly::monomial(1) * &p).scale(&two_v),
                Coord::B(_) => p.scale(&two_v),
                _ => &p * &p,
            };
            Kernel { poly, pieces: vec![(whole, S::one())] }
        }
        act => {
            let poly = match coord {
                Coord::W(_) => Poly::linear(v, S::zero()),
                Coord::B(_) => Poly::constant(v),
                _ => p,
            };
            let mut pieces = vec![(reports[j].active_interval.clone(), S::one())];
            let gamma = act.negative_slope().expect("piecewise-linear activation");
            if !gamma.is_zero() {
                pieces.push((reports[j].complement_interval.clone(), gamma));
            }
            Kernel { poly, pieces }
        }
    }
}

/// `∂k_a/∂e` for coordinates of the same neuron.
fn kernel_derivative<S: Scalar>(params: &NetworkParams<S>, a: Coord, e: Coord) -> Option<Poly<S>> {
    let j = a.neuron()?;
    if e.neuron() != Some(j) {
        return None;
    }
    let x = Poly::monomial(1);
    let one = Poly::constant(S::one());
    match &params.activation {
        Activation::Quadratic => {
            let p = Poly::linear(params.w[j].clone(), params.b[j].clone());
            let two = S::two();
            let two_v = two.clone() * params.v[j].clone();
            match (a, e) {
                (Coord::W(_), Coord::W(_)) => Some((&x * &x).scale(&two_v)),
                (Coord::W(_), Coord::B(_)) | (Coord::B(_), Coord::W(_)) => Some(x.scale(&two_v)),
                (Coord::B(_), Coord::B(_)) => Some(one.scale(&two_v)),
                (Coord::W(_), Coord::V(_)) | (Coord::V(_), Coord::W(_)) => Some((&x * &p).scale(&two)),
                (Coord::B(_), Coord::V(_)) | (Coord::V(_), Coord::B(_)) => Some(p.scale(&two)),
                _ => None,
            }
        }
        _ => match (a, e) {
            (Coord::W(_), Coord::V(_)) | (Coord::V(_), Coord::W(_)) => Some(x),
            (Coord::B(_), Coord::V(_)) | (Coord::V(_), Coord::B(_)) => Some(one),
            _ => None,
        },
    }
}

/// Second derivatives of the loss in the requested coordinates.
///
/// Fails unless every requested coordinate is at least twice continuously
/// differentiable at `φ`.
pub fn restricted_hessian<S: Scalar>(
    params: &NetworkParams<S>,
    target: &TargetSpec<S>,
    coordinates: &[Coord],
    tol: &Tolerances,
) -> Result<HessianBlock<S>> {
    let n = params.width();
    let reports = classify_neurons(params, target, tol);
    let smooth = differentiability_report(params, target, tol);
    for &coord in coordinates {
        if coord.neuron().is_some_and(|j| j >= n) {
            return Err(LandscapeError::invalid("coordinates", format!("{coord} refers to a missing neuron")));
        }
        let class = smooth.of(coord);
        if !class.twice_differentiable() {
            let j = coord.neuron().expect("v and c are analytic");
            return Err(LandscapeError::Precondition(format!(
                "coordinate {coord} is only {} at this point (neuron {j} is {})",
                class.name(),
                reports[j].kind
            )));
        }
    }

    let res = residual(params, target, tol);
    let kernels: Vec<Kernel<S>> = coordinates.iter().map(|&c| kernel(params, target, &reports, c)).collect();
    let two = S::two();
    let k = coordinates.len();
    let mut matrix = vec![vec![S::zero(); k]; k];
    for a in 0..k {
        for e in 0..=a {
            let ka = &kernels[a];
            let ke = &kernels[e];
            let prod = &ka.poly * &ke.poly;
            let mut terms = Vec::new();
            for (ia, wa) in &ka.pieces {
                for (ie, we) in &ke.pieces {
                    if let Some((lo, hi)) = ia.intersect(ie).bounds() {
                        if lo < hi {
                            terms.push(wa.clone() * we.clone() * prod.integrate(lo, hi));
                        }
                    }
                }
            }
            if let Some(dk) = kernel_derivative(params, coordinates[a], coordinates[e]) {
                for (ia, wa) in &ka.pieces {
                    terms.push(wa.clone() * integrate_on(&res, &dk, ia));
                }
            }
            let mut value = two.clone() * S::sum_all(terms);
            value = value + boundary_term(params, &reports, &res, coordinates[a], coordinates[e]);
            matrix[a][e] = value.clone();
            matrix[e][a] = value;
        }
    }
    Ok(HessianBlock { coordinates: coordinates.to_vec(), matrix })
}

/// Contribution of the moving breakpoint for `w`/`b` pairs of one type-2-active neuron.
fn boundary_term<S: Scalar>(
    params: &NetworkParams<S>,
    reports: &[NeuronReport<S>],
    res: &PiecewiseForm<S>,
    a: Coord,
    e: Coord,
) -> S {
    let (Some(j), Some(je)) = (a.neuron(), e.neuron()) else {
        return S::zero();
    };
    let is_wb = |c: Coord| matches!(c, Coord::W(_) | Coord::B(_));
    if j != je || !is_wb(a) || !is_wb(e) || reports[j].kind != NeuronKind::Type2Active {
        return S::zero();
    }
    let Some(gamma) = params.activation.negative_slope() else {
        return S::zero();
    };
    let t = reports[j].breakpoint.clone().expect("type-2 neurons have breakpoints");
    let v = params.v[j].clone();
    let k_at = match a {
        Coord::W(_) => v * t.clone(),
        _ => v,
    };
    let lever = match e {
        Coord::W(_) => t.clone(),
        _ => S::one(),
    };
    let r_at = res.evaluate(&t).expect("breakpoint lies inside the interval");
    S::two() * (S::one() - gamma) * k_at * r_at * lever / params.w[j].abs()
}
