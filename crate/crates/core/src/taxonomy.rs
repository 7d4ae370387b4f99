//! Per-neuron classification on the target interval and the centering test.

use std::fmt;

use crate::model::{NetworkParams, TargetSpec};
use crate::scalar::{Scalar, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NeuronKind {
    /// Pre-activation negative on the whole interval.
    Inactive,
    /// Pre-activation vanishes at one endpoint and is negative elsewhere.
    SemiInactive,
    /// `w = 0 < b`.
    SemiActive,
    /// Active with the breakpoint outside the open interval.
    Type1Active,
    /// Breakpoint strictly inside the interval.
    Type2Active,
    /// `w = b = 0`.
    Degenerate,
}

impl NeuronKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Inactive => "Inactive",
            Self::SemiInactive => "SemiInactive",
            Self::SemiActive => "SemiActive",
            Self::Type1Active => "Type1Active",
            Self::Type2Active => "Type2Active",
            Self::Degenerate => "Degenerate",
        }
    }

    pub fn is_active(self) -> bool {
        matches!(self, Self::Type1Active | Self::Type2Active)
    }
}

impl fmt::Display for NeuronKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Left,
    Right,
}

/// A closed subinterval of the target interval, possibly a single point.
#[derive(Debug, Clone, PartialEq)]
pub enum Interval<S> {
    Empty,
    Closed(S, S),
}

impl<S: Scalar> Interval<S> {
    pub fn bounds(&self) -> Option<(&S, &S)> {
        match self {
            Self::Empty => None,
            Self::Closed(a, b) => Some((a, b)),
        }
    }

    pub fn length(&self) -> S {
        match self {
            Self::Empty => S::zero(),
            Self::Closed(a, b) => b.clone() - a.clone(),
        }
    }

    pub fn is_singleton(&self) -> bool {
        matches!(self, Self::Closed(a, b) if a == b)
    }

    pub fn intersect(&self, other: &Self) -> Self {
        match (self, other) {
            (Self::Closed(a, b), Self::Closed(c, d)) => {
                let lo = S::max_of(a.clone(), c.clone());
                let hi = S::min_of(b.clone(), d.clone());
                if lo <= hi {
                    Self::Closed(lo, hi)
                } else {
                    Self::Empty
                }
            }
            _ => Self::Empty,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuronReport<S> {
    /// Zero-based neuron index.
    pub index: usize,
    pub kind: NeuronKind,
    pub flat: bool,
    /// `I_j`: where the pre-activation is nonnegative.
    pub active_interval: Interval<S>,
    /// Closure of the rest of the interval, where leaky neurons use slope `γ`.
    pub complement_interval: Interval<S>,
    /// `-b/w`, present iff `w ≠ 0`.
    pub breakpoint: Option<S>,
    /// Endpoint at which the pre-activation vanishes, for semi-inactive and
    /// type-1-active neurons whose breakpoint sits on the boundary.
    pub touches: Option<Endpoint>,
}

impl<S: Scalar> NeuronReport<S> {
    /// Semi-inactive with `I_j` equal to the given endpoint.
    pub fn is_semi_inactive_at(&self, side: Endpoint) -> bool {
        self.kind == NeuronKind::SemiInactive && self.touches == Some(side)
    }
}

fn location_scale<S: Scalar>(w: &S, b: &S, target: &TargetSpec<S>) -> f64 {
    (w.to_f64().abs() + b.to_f64().abs()).max(1.0) * target.location_scale()
}

/// Applies the neuron taxonomy to neuron `j`.
pub fn classify_neuron<S: Scalar>(
    params: &NetworkParams<S>,
    target: &TargetSpec<S>,
    j: usize,
    tol: &Tolerances,
) -> NeuronReport<S> {
    let w = &params.w[j];
    let b = &params.b[j];
    let eps = tol.structural;
    let flat = params.v[j].is_negligible(1.0, eps);
    let whole = Interval::Closed(target.t0.clone(), target.t1.clone());
    let (t0, t1) = (target.t0.clone(), target.t1.clone());
    let breakpoint = (!w.is_zero()).then(|| -b.clone() / w.clone());

    let report = |kind, active: Interval<S>, complement: Interval<S>, touches| NeuronReport {
        index: j,
        kind,
        flat,
        active_interval: active,
        complement_interval: complement,
        breakpoint: breakpoint.clone(),
        touches,
    };

    let wb_scale = (w.to_f64().abs() + b.to_f64().abs()).max(1.0);
    if w.is_negligible(wb_scale, eps) {
        return match b.sign_tol(wb_scale, eps) {
            1 => report(NeuronKind::SemiActive, whole, Interval::Empty, None),
            -1 => report(NeuronKind::Inactive, Interval::Empty, whole, None),
            _ => report(NeuronKind::Degenerate, whole, Interval::Empty, None),
        };
    }

    let scale = location_scale(w, b, target);
    let s0 = (w.clone() * t0.clone() + b.clone()).sign_tol(scale, eps);
    let s1 = (w.clone() * t1.clone() + b.clone()).sign_tol(scale, eps);
    match (s0, s1) {
        (a, c) if a >= 0 && c >= 0 => {
            let touches = match (a, c) {
                (0, _) => Some(Endpoint::Left),
                (_, 0) => Some(Endpoint::Right),
                _ => None,
            };
            report(NeuronKind::Type1Active, whole, Interval::Empty, touches)
        }
        (0, -1) => report(
            NeuronKind::SemiInactive,
            Interval::Closed(t0.clone(), t0),
            whole,
            Some(Endpoint::Left),
        ),
        (-1, 0) => report(
            NeuronKind::SemiInactive,
            Interval::Closed(t1.clone(), t1),
            whole,
            Some(Endpoint::Right),
        ),
        (-1, -1) => report(NeuronKind::Inactive, Interval::Empty, whole, None),
        _ => {
            let t = breakpoint.clone().expect("w is nonzero");
            let (active, complement) = if s1 > 0 {
                (Interval::Closed(t.clone(), t1), Interval::Closed(t0, t))
            } else {
                (Interval::Closed(t0, t.clone()), Interval::Closed(t, t1))
            };
            report(NeuronKind::Type2Active, active, complement, None)
        }
    }
}

pub fn classify_neurons<S: Scalar>(
    params: &NetworkParams<S>,
    target: &TargetSpec<S>,
    tol: &Tolerances,
) -> Vec<NeuronReport<S>> {
    (0..params.width()).map(|j| classify_neuron(params, target, j, tol)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CenterednessReport<S> {
    pub centered: bool,
    pub required_c: S,
    pub actual_c: S,
}

pub fn centeredness<S: Scalar>(
    params: &NetworkParams<S>,
    target: &TargetSpec<S>,
    tol: &Tolerances,
) -> CenterednessReport<S> {
    let required_c = target.centered_constant();
    let scale = required_c.to_f64().abs().max(target.alpha.to_f64().abs() * target.location_scale());
    CenterednessReport {
        centered: params.c.approx_eq(&required_c, scale, tol.structural),
        required_c,
        actual_c: params.c.clone(),
    }
}

/// Radius of a ball in the `(w_j, b_j)` plane inside which the neuron keeps its kind.
///
/// Only inactive and non-boundary type-1/type-2-active neurons are stable; other
/// kinds return zero.
pub fn stability_margin(w: f64, b: f64, t0: f64, t1: f64) -> f64 {
    let dist = |x: f64| (w * x + b).abs() / (1.0 + x * x).sqrt();
    let e0 = w * t0 + b;
    let e1 = w * t1 + b;
    if (e0 < 0.0 && e1 < 0.0) || (e0 > 0.0 && e1 > 0.0) || (e0 * e1 < 0.0) {
        dist(t0).min(dist(t1))
    } else {
        0.0
    }
}
