//! Canonical representatives of every family of critical points, the
//! reparametrizations that normalize the target, and the leaky-to-ReLU
//! duplication map.

use crate::error::{LandscapeError, Result};
use crate::model::{Activation, NetworkParams, PiecewiseForm, TargetSpec};
use crate::poly::Poly;
use crate::scalar::Scalar;

/// Breakpoints, slope sums and weight signs of a saddle with `n` kinks.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleFamilySpec<S> {
    pub n: usize,
    /// Orientation `σ ∈ {-1, 1}` of a leaky family.
    pub sigma: Option<i8>,
    pub gamma: Option<S>,
    /// Leaky normalizer `δ`.
    pub delta: Option<S>,
    pub breakpoints: Vec<S>,
    /// Required `Σ v_k w_k` over the neurons at each breakpoint.
    pub slope_sums: Vec<S>,
    /// Required sign of `w` at each breakpoint.
    pub weight_signs: Vec<i8>,
    /// Neurons placed at each breakpoint (empty until a network is attached).
    pub multiplicity: Vec<usize>,
}

fn alternating(i: usize) -> i8 {
    if i % 2 == 1 {
        1
    } else {
        -1
    }
}

fn sqrt_or_err<S: Scalar>(x: &S, what: &str) -> Result<S> {
    x.sqrt().ok_or_else(|| {
        LandscapeError::Construction(format!("{what} = {x} has no exact square root; use float mode"))
    })
}

impl<S: Scalar> SaddleFamilySpec<S> {
    /// ReLU family: `n` equally spaced kinks of alternating orientation.
    pub fn relu(target: &TargetSpec<S>, n: usize) -> Result<Self> {
        if n == 0 || n % 2 == 1 {
            return Err(LandscapeError::Construction(format!("ReLU saddles need an even n ≥ 2, got {n}")));
        }
        let np1 = S::from_int(n as i64 + 1);
        let len = target.length();
        Ok(Self {
            n,
            sigma: None,
            gamma: None,
            delta: None,
            breakpoints: (1..=n).map(|i| target.t0.clone() + S::from_int(i as i64) * len.clone() / np1.clone()).collect(),
            slope_sums: vec![S::two() * target.alpha.clone() / np1; n],
            weight_signs: (1..=n).map(alternating).collect(),
            multiplicity: Vec::new(),
        })
    }

    /// Leaky family with orientation `sigma`. Exact backends need rational
    /// square roots of `γ` and `1 + γ`.
    pub fn leaky(target: &TargetSpec<S>, gamma: &S, n: usize, sigma: i8) -> Result<Self> {
        if n == 0 {
            return Err(LandscapeError::Construction("leaky saddles need n ≥ 1".into()));
        }
        if sigma != 1 && sigma != -1 {
            return Err(LandscapeError::invalid("sigma", format!("must be 1 or -1, got {sigma}")));
        }
        let parts = LeakyParts::new(gamma, n, sigma)?;
        let len = target.length();
        let alpha = target.alpha.clone();
        let breakpoints = (1..=n)
            .map(|i| {
                let offset = parts.first.clone() + S::from_int(i as i64 - 1) * parts.root_1pg.clone();
                target.t0.clone() + len.clone() / parts.delta.clone() * offset
            })
            .collect();
        let inv_root = S::one() / parts.root_1pg.clone();
        let slope_sums = (1..=n)
            .map(|i| {
                if n == 1 {
                    alpha.clone() / parts.root_g.clone()
                } else if i == 1 {
                    alpha.clone() / parts.delta.clone() * (inv_root.clone() + S::one() / parts.first.clone())
                } else if i == n {
                    alpha.clone() / parts.delta.clone() * (inv_root.clone() + S::one() / parts.last.clone())
                } else {
                    alpha.clone() / parts.delta.clone() * S::two() * inv_root.clone()
                }
            })
            .collect();
        Ok(Self {
            n,
            sigma: Some(sigma),
            gamma: Some(gamma.clone()),
            delta: Some(parts.delta),
            breakpoints,
            slope_sums,
            weight_signs: (1..=n).map(|i| sigma * alternating(i)).collect(),
            multiplicity: Vec::new(),
        })
    }

    /// The residual `f - αx - β` every member of the family realizes.
    pub fn residual_form(&self, target: &TargetSpec<S>) -> Result<PiecewiseForm<S>> {
        let mut knots = vec![target.t0.clone()];
        knots.extend(self.breakpoints.iter().cloned());
        knots.push(target.t1.clone());
        let len = target.length();
        let t0 = target.t0.clone();
        let n = self.n;
        let segments = match (&self.gamma, self.sigma) {
            (Some(gamma), Some(sigma)) => {
                let parts = LeakyParts::new(gamma, n, sigma)?;
                let delta = parts.delta.clone();
                let half_len = len.clone() / (S::two() * delta.clone());
                (0..=n)
                    .map(|i| {
                        let sign = if (i % 2 == 0) == (sigma == 1) { -1 } else { 1 };
                        let factor = S::from_int(sign) * (S::one() - gamma.clone()) * target.alpha.clone() / delta.clone();
                        let (scale, offset) = if i == 0 {
                            (parts.first.clone(), -half_len.clone())
                        } else if i == n {
                            (parts.last.clone(), half_len.clone() - len.clone() / parts.last.clone())
                        } else {
                            let mid = (S::from_int(i as i64) - S::half()) * len.clone() / delta.clone();
                            let shift = parts.first.clone() * len.clone() / (delta.clone() * parts.root_1pg.clone());
                            (parts.root_1pg.clone(), -mid - shift)
                        };
                        let slope = S::one() / scale;
                        Poly::linear(factor.clone() * slope.clone(), factor * (offset - slope * t0.clone()))
                    })
                    .collect()
            }
            _ => {
                let np1 = S::from_int(n as i64 + 1);
                (0..=n)
                    .map(|i| {
                        let sign = if i % 2 == 0 { -1 } else { 1 };
                        let factor = S::from_int(sign) * target.alpha.clone() / np1.clone();
                        let center = t0.clone() + (S::from_int(i as i64) + S::half()) * len.clone() / np1.clone();
                        Poly::linear(factor.clone(), -factor * center)
                    })
                    .collect()
            }
        };
        Ok(PiecewiseForm { knots, segments })
    }
}

/// `γ^{(1-σ)/4}`, `γ^{(1-σ(-1)^n)/4}`, `√γ`, `√(1+γ)` and `δ`.
struct LeakyParts<S> {
    first: S,
    last: S,
    root_g: S,
    root_1pg: S,
    delta: S,
}

impl<S: Scalar> LeakyParts<S> {
    fn new(gamma: &S, n: usize, sigma: i8) -> Result<Self> {
        let root_g = sqrt_or_err(gamma, "gamma")?;
        let root_1pg = sqrt_or_err(&(S::one() + gamma.clone()), "1 + gamma")?;
        let first = if sigma == 1 { S::one() } else { root_g.clone() };
        let last_sign = if n % 2 == 0 { sigma } else { -sigma };
        let last = if last_sign == 1 { S::one() } else { root_g.clone() };
        let delta = first.clone() + last.clone() + S::from_int(n as i64 - 1) * root_1pg.clone();
        Ok(Self { first, last, root_g, root_1pg, delta })
    }
}

/// Predicted loss `α²(t1-t0)³ / (12 (n+1)^4)` on the ReLU ladder; `n = 0`
/// gives the value of every critical point with constant realization.
pub fn relu_ladder_value<S: Scalar>(target: &TargetSpec<S>, n: usize) -> S {
    let len = target.length();
    let np1 = S::from_int(n as i64 + 1);
    target.alpha.clone() * target.alpha.clone() * len.powi(3) / (S::from_int(12) * np1.powi(4))
}

fn require_alpha<S: Scalar>(target: &TargetSpec<S>) -> Result<()> {
    if target.alpha.is_zero() {
        Err(LandscapeError::Construction("the target slope alpha must be nonzero".into()))
    } else {
        Ok(())
    }
}

fn sign_of<S: Scalar>(x: &S) -> S {
    if x.is_positive() {
        S::one()
    } else if x.is_negative() {
        -S::one()
    } else {
        S::zero()
    }
}

/// Choice for one neuron of a non-global local minimum.
#[derive(Debug, Clone, PartialEq)]
pub enum MinNeuron<S> {
    Inactive { v: S },
    /// `I_j = {t0}`, requires `αv > 0`.
    SemiInactiveLeft { v: S },
    /// `I_j = {t1}`, requires `αv < 0`.
    SemiInactiveRight { v: S },
}

impl<S: Scalar> MinNeuron<S> {
    pub fn inactive() -> Self {
        Self::Inactive { v: S::one() }
    }

    pub fn left(target: &TargetSpec<S>) -> Self {
        Self::SemiInactiveLeft { v: sign_of(&target.alpha) }
    }

    pub fn right(target: &TargetSpec<S>) -> Self {
        Self::SemiInactiveRight { v: -sign_of(&target.alpha) }
    }
}

/// `(w, b)` of an inactive neuron with its kink half an interval to the left.
fn inactive_neuron<S: Scalar>(target: &TargetSpec<S>) -> (S, S) {
    (-S::one(), target.t0.clone() - target.length() * S::half())
}

fn build<S: Scalar>(neurons: Vec<(S, S, S)>, c: S, activation: Activation<S>) -> Result<NetworkParams<S>> {
    let mut w = Vec::with_capacity(neurons.len());
    let mut b = Vec::with_capacity(neurons.len());
    let mut v = Vec::with_capacity(neurons.len());
    for (wj, bj, vj) in neurons {
        w.push(wj);
        b.push(bj);
        v.push(vj);
    }
    NetworkParams::new(w, b, v, c, activation)
}

fn relu_filler<S: Scalar>(target: &TargetSpec<S>) -> (S, S, S) {
    let (w, b) = inactive_neuron(target);
    (w, b, S::one())
}

/// Centered ReLU network whose neurons follow `menu`, one entry per neuron.
pub fn make_relu_local_min<S: Scalar>(width: usize, target: &TargetSpec<S>, menu: &[MinNeuron<S>]) -> Result<NetworkParams<S>> {
    require_alpha(target)?;
    if menu.len() != width {
        return Err(LandscapeError::Construction(format!("menu has {} entries for {width} neurons", menu.len())));
    }
    let alpha = &target.alpha;
    let neurons = menu
        .iter()
        .enumerate()
        .map(|(j, choice)| match choice {
            MinNeuron::Inactive { v } => {
                let (w, b) = inactive_neuron(target);
                Ok((w, b, v.clone()))
            }
            MinNeuron::SemiInactiveLeft { v } => {
                if (alpha.clone() * v.clone()).is_positive() {
                    Ok((-S::one(), target.t0.clone(), v.clone()))
                } else {
                    Err(LandscapeError::Construction(format!("neuron {j}: semi-inactive at t0 needs alpha*v > 0")))
                }
            }
            MinNeuron::SemiInactiveRight { v } => {
                if (alpha.clone() * v.clone()).is_negative() {
                    Ok((S::one(), -target.t1.clone(), v.clone()))
                } else {
                    Err(LandscapeError::Construction(format!("neuron {j}: semi-inactive at t1 needs alpha*v < 0")))
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    build(neurons, target.centered_constant(), Activation::Relu)
}

/// How the slope sum at each breakpoint is spread over neurons.
#[derive(Debug, Clone, PartialEq)]
pub enum MassSplit<S> {
    /// `counts[i]` neurons share breakpoint `i` equally.
    Equal(Vec<usize>),
    /// Explicit fractions per breakpoint; each list must sum to one.
    Fractions(Vec<Vec<S>>),
}

impl<S: Scalar> MassSplit<S> {
    pub fn unit(n: usize) -> Self {
        Self::Equal(vec![1; n])
    }

    fn fractions(&self, n: usize) -> Result<Vec<Vec<S>>> {
        let out: Vec<Vec<S>> = match self {
            Self::Equal(counts) => counts
                .iter()
                .map(|&m| vec![S::one() / S::from_int(m.max(1) as i64); m])
                .collect(),
            Self::Fractions(f) => f.clone(),
        };
        if out.len() != n {
            return Err(LandscapeError::Construction(format!("mass split covers {} breakpoints, expected {n}", out.len())));
        }
        for (i, group) in out.iter().enumerate() {
            if group.is_empty() {
                return Err(LandscapeError::Construction(format!("breakpoint {i} has no neurons")));
            }
            let total = S::sum_all(group.iter().cloned());
            if !total.approx_eq(&S::one(), 1.0, 1e-12) {
                return Err(LandscapeError::Construction(format!("fractions at breakpoint {i} sum to {total}, not 1")));
            }
        }
        Ok(out)
    }
}

/// Places neurons `w = ±1` at the family's breakpoints, then appends fillers.
fn place_family<S: Scalar>(
    spec: &mut SaddleFamilySpec<S>,
    width: usize,
    split: &MassSplit<S>,
    filler: (S, S, S),
    c: S,
    activation: Activation<S>,
) -> Result<NetworkParams<S>> {
    let fractions = split.fractions(spec.n)?;
    let needed: usize = fractions.iter().map(Vec::len).sum();
    if needed > width {
        return Err(LandscapeError::Construction(format!("the family needs {needed} neurons but the width is {width}")));
    }
    let mut neurons = Vec::with_capacity(width);
    for (i, group) in fractions.iter().enumerate() {
        let w = S::from_int(spec.weight_signs[i] as i64);
        for f in group {
            let b = -w.clone() * spec.breakpoints[i].clone();
            let v = f.clone() * spec.slope_sums[i].clone() * w.clone();
            neurons.push((w.clone(), b, v));
        }
    }
    spec.multiplicity = fractions.iter().map(Vec::len).collect();
    neurons.resize(width, filler);
    build(neurons, c, activation)
}

/// ReLU saddle with `n` type-2 kinks on the equally spaced lattice.
pub fn make_relu_saddle<S: Scalar>(width: usize, target: &TargetSpec<S>, n: usize, split: &MassSplit<S>) -> Result<NetworkParams<S>> {
    Ok(make_relu_saddle_with_spec(width, target, n, split)?.0)
}

pub fn make_relu_saddle_with_spec<S: Scalar>(
    width: usize,
    target: &TargetSpec<S>,
    n: usize,
    split: &MassSplit<S>,
) -> Result<(NetworkParams<S>, SaddleFamilySpec<S>)> {
    require_alpha(target)?;
    if n > width {
        return Err(LandscapeError::Construction(format!("n = {n} exceeds the width {width}")));
    }
    let mut spec = SaddleFamilySpec::relu(target, n)?;
    let net = place_family(&mut spec, width, split, relu_filler(target), target.centered_constant(), Activation::Relu)?;
    Ok((net, spec))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrivialSaddleKind {
    FlatSemiActive,
    SemiInactiveLeftWrongSign,
    SemiInactiveRightWrongSign,
    FlatDegenerate,
}

impl TrivialSaddleKind {
    pub const ALL: [TrivialSaddleKind; 4] = [
        Self::FlatSemiActive,
        Self::SemiInactiveLeftWrongSign,
        Self::SemiInactiveRightWrongSign,
        Self::FlatDegenerate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::FlatSemiActive => "flat-semi-active",
            Self::SemiInactiveLeftWrongSign => "semi-inactive-left-wrong-sign",
            Self::SemiInactiveRightWrongSign => "semi-inactive-right-wrong-sign",
            Self::FlatDegenerate => "flat-degenerate",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == text)
    }
}

/// ReLU saddle with constant realization: the first neuron has the requested
/// kind and the rest are inactive.
pub fn make_relu_trivial_saddle<S: Scalar>(width: usize, target: &TargetSpec<S>, kind: TrivialSaddleKind) -> Result<NetworkParams<S>> {
    require_alpha(target)?;
    if width == 0 {
        return Err(LandscapeError::Construction("width must be at least 1".into()));
    }
    let sa = sign_of(&target.alpha);
    let first = match kind {
        TrivialSaddleKind::FlatSemiActive => (S::zero(), S::one(), S::zero()),
        TrivialSaddleKind::SemiInactiveLeftWrongSign => (-S::one(), target.t0.clone(), -sa),
        TrivialSaddleKind::SemiInactiveRightWrongSign => (S::one(), -target.t1.clone(), sa),
        TrivialSaddleKind::FlatDegenerate => (S::zero(), S::zero(), S::zero()),
    };
    let mut neurons = vec![first];
    neurons.resize(width, relu_filler(target));
    build(neurons, target.centered_constant(), Activation::Relu)
}

/// Leaky filler: flat with `w = 0`, `b = -1`.
fn leaky_filler<S: Scalar>() -> (S, S, S) {
    (S::zero(), -S::one(), S::zero())
}

/// Leaky ReLU saddle with `n` kinks and orientation `sigma`.
pub fn make_leaky_saddle<S: Scalar>(
    width: usize,
    target: &TargetSpec<S>,
    gamma: &S,
    n: usize,
    sigma: i8,
    split: &MassSplit<S>,
) -> Result<(NetworkParams<S>, SaddleFamilySpec<S>)> {
    require_alpha(target)?;
    let activation = Activation::leaky(gamma.clone())?;
    if n > width {
        return Err(LandscapeError::Construction(format!("n = {n} exceeds the width {width}")));
    }
    let mut spec = SaddleFamilySpec::leaky(target, gamma, n, sigma)?;
    let net = place_family(&mut spec, width, split, leaky_filler(), target.centered_constant(), activation)?;
    Ok((net, spec))
}

/// Leaky ReLU saddle without kinks: all neurons flat with `w = 0`.
pub fn make_leaky_trivial_saddle<S: Scalar>(width: usize, target: &TargetSpec<S>, gamma: &S) -> Result<NetworkParams<S>> {
    require_alpha(target)?;
    build(vec![leaky_filler(); width], target.centered_constant(), Activation::leaky(gamma.clone())?)
}

/// Admissible neuron of a quadratic saddle.
#[derive(Debug, Clone, PartialEq)]
pub enum QuadNeuron<S> {
    /// `w = 0` with `v b = 0`.
    ZeroSlope { b: S, v: S },
    /// `v = 0`, `w ≠ 0`, kink at the interval midpoint.
    FlatCentered { w: S },
}

pub fn make_quadratic_saddle<S: Scalar>(width: usize, target: &TargetSpec<S>, menu: &[QuadNeuron<S>]) -> Result<NetworkParams<S>> {
    require_alpha(target)?;
    if menu.len() != width {
        return Err(LandscapeError::Construction(format!("menu has {} entries for {width} neurons", menu.len())));
    }
    let mid = target.midpoint();
    let neurons = menu
        .iter()
        .enumerate()
        .map(|(j, choice)| match choice {
            QuadNeuron::ZeroSlope { b, v } => {
                if (b.clone() * v.clone()).is_zero() {
                    Ok((S::zero(), b.clone(), v.clone()))
                } else {
                    Err(LandscapeError::Construction(format!("neuron {j}: need v*b = 0")))
                }
            }
            QuadNeuron::FlatCentered { w } => {
                if w.is_zero() {
                    Err(LandscapeError::Construction(format!("neuron {j}: need w != 0")))
                } else {
                    Ok((w.clone(), -mid.clone() * w.clone(), S::zero()))
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    build(neurons, target.centered_constant(), Activation::Quadratic)
}

/// Quadratic network realizing the target exactly: `(α/2)(x+1)² - (α/2)x² + β - α/2`.
pub fn make_quadratic_global_min<S: Scalar>(width: usize, target: &TargetSpec<S>) -> Result<NetworkParams<S>> {
    if width < 2 {
        return Err(LandscapeError::Construction("a single quadratic neuron cannot fit a non-constant affine target".into()));
    }
    let half_alpha = target.alpha.clone() * S::half();
    let mut neurons = vec![
        (S::one(), S::one(), half_alpha.clone()),
        (S::one(), S::zero(), -half_alpha.clone()),
    ];
    neurons.resize(width, (S::zero(), S::zero(), S::zero()));
    build(neurons, target.beta.clone() - half_alpha, Activation::Quadratic)
}

/// `P(w, b, v, c) = (w, b, v/α, (c-β)/α)`; the returned target is `(1, 0)` on the same interval.
pub fn transform_p<S: Scalar>(params: &NetworkParams<S>, target: &TargetSpec<S>) -> Result<(NetworkParams<S>, TargetSpec<S>)> {
    if target.alpha.is_zero() {
        return Err(LandscapeError::invalid("alpha", "the normalizing map needs alpha != 0"));
    }
    let alpha = &target.alpha;
    let mut out = params.clone();
    out.v = params.v.iter().map(|v| v.clone() / alpha.clone()).collect();
    out.c = (params.c.clone() - target.beta.clone()) / alpha.clone();
    let unit = TargetSpec { alpha: S::one(), beta: S::zero(), t0: target.t0.clone(), t1: target.t1.clone() };
    Ok((out, unit))
}

/// Inverse of [`transform_p`] for the original `target`.
pub fn transform_p_inverse<S: Scalar>(params: &NetworkParams<S>, target: &TargetSpec<S>) -> NetworkParams<S> {
    let alpha = &target.alpha;
    let mut out = params.clone();
    out.v = params.v.iter().map(|v| v.clone() * alpha.clone()).collect();
    out.c = params.c.clone() * alpha.clone() + target.beta.clone();
    out
}

/// `Q(w, b, v, c) = ((t1-t0)w, t0 w + b, v, c)`; the returned target lives on `[0, 1]`.
pub fn transform_q<S: Scalar>(params: &NetworkParams<S>, target: &TargetSpec<S>) -> (NetworkParams<S>, TargetSpec<S>) {
    let len = target.length();
    let mut out = params.clone();
    out.w = params.w.iter().map(|w| w.clone() * len.clone()).collect();
    out.b = params.w.iter().zip(&params.b).map(|(w, b)| target.t0.clone() * w.clone() + b.clone()).collect();
    let unit = TargetSpec {
        alpha: target.alpha.clone() * len,
        beta: target.alpha.clone() * target.t0.clone() + target.beta.clone(),
        t0: S::zero(),
        t1: S::one(),
    };
    (out, unit)
}

/// Inverse of [`transform_q`] for the original `target`.
pub fn transform_q_inverse<S: Scalar>(params: &NetworkParams<S>, target: &TargetSpec<S>) -> NetworkParams<S> {
    let len = target.length();
    let mut out = params.clone();
    out.w = params.w.iter().map(|w| w.clone() / len.clone()).collect();
    out.b = out.w.iter().zip(&params.b).map(|(w, b)| b.clone() - target.t0.clone() * w.clone()).collect();
    out
}

/// `P ∘ Q`: an equivalent network for the identity target on `[0, 1]`.
pub fn canonicalize<S: Scalar>(params: &NetworkParams<S>, target: &TargetSpec<S>) -> Result<NetworkParams<S>> {
    let (q, qt) = transform_q(params, target);
    Ok(transform_p(&q, &qt)?.0)
}

/// Inverse of [`canonicalize`].
pub fn decanonicalize<S: Scalar>(params: &NetworkParams<S>, target: &TargetSpec<S>) -> NetworkParams<S> {
    let (_, qt) = transform_q(params, target);
    transform_q_inverse(&transform_p_inverse(params, &qt), target)
}

/// ReLU network with `2N` neurons realizing the same function as a leaky network:
/// `(w, -w, b, -b, v, -γv, c)`.
pub fn make_leaky_duplication<S: Scalar>(params: &NetworkParams<S>) -> Result<NetworkParams<S>> {
    let Activation::Leaky { gamma } = &params.activation else {
        return Err(LandscapeError::invalid("activation.kind", "duplication needs a leaky network"));
    };
    let mut w = params.w.clone();
    w.extend(params.w.iter().map(|x| -x.clone()));
    let mut b = params.b.clone();
    b.extend(params.b.iter().map(|x| -x.clone()));
    let mut v = params.v.clone();
    v.extend(params.v.iter().map(|x| -(gamma.clone() * x.clone())));
    NetworkParams::new(w, b, v, params.c.clone(), Activation::Relu)
}
