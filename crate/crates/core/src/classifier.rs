//! Structural classification of critical points.
//!
//! The verdict is decided from centering, the neuron taxonomy, the breakpoint
//! lattice, weight signs and slope sums alone. The generalized gradient is
//! evaluated separately and only used to flag disagreement.

use std::fmt;

use crate::construct::{relu_ladder_value, SaddleFamilySpec};
use crate::exactcalc::{generalized_gradient, loss};
use crate::model::{Activation, NetworkParams, TargetSpec};
use crate::scalar::{Scalar, Tolerances};
use crate::taxonomy::{centeredness, classify_neurons, Endpoint, NeuronKind, NeuronReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    NotCritical,
    GlobalMinimum,
    NonGlobalLocalMinimum,
    Saddle,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Self::NotCritical => "NotCritical",
            Self::GlobalMinimum => "GlobalMinimum",
            Self::NonGlobalLocalMinimum => "NonGlobalLocalMinimum",
            Self::Saddle => "Saddle",
        }
    }

    pub fn is_critical(self) -> bool {
        self != Self::NotCritical
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One condition checked on the way to a verdict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evidence {
    pub check: String,
    pub holds: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaAdvisory {
    /// Outside `(0, 1)`.
    Invalid,
    /// Believed but not proven to satisfy the smallness assumption on `γ`.
    ConjecturedValid,
    /// As above, but close enough to 1 that the saddle certificates are untested.
    ConjecturedValidWithWarning,
}

impl GammaAdvisory {
    pub fn name(self) -> &'static str {
        match self {
            Self::Invalid => "invalid",
            Self::ConjecturedValid => "conjectured-valid",
            Self::ConjecturedValidWithWarning => "conjectured-valid-with-warning",
        }
    }
}

/// Largest leaky slope at which the test suite checks saddle certificates.
pub const GAMMA_WARNING_THRESHOLD: f64 = 0.9;

/// Advisory on whether the leaky classification is expected to apply at this `γ`.
///
/// The classification is only proven for `γ` below an unspecified threshold,
/// so "guaranteed" is never reported.
pub fn gamma_validity(gamma: f64) -> GammaAdvisory {
    if !(gamma > 0.0 && gamma < 1.0) {
        GammaAdvisory::Invalid
    } else if gamma > GAMMA_WARNING_THRESHOLD {
        GammaAdvisory::ConjecturedValidWithWarning
    } else {
        GammaAdvisory::ConjecturedValid
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationResult<S> {
    pub verdict: Verdict,
    /// Number of distinct kinks of a saddle (0 for constant realizations).
    pub saddle_order: Option<usize>,
    /// Orientation of a leaky saddle family.
    pub sigma: Option<i8>,
    pub predicted_loss: Option<S>,
    pub loss: S,
    pub gradient_sup_norm: f64,
    /// `true` when "gradient vanishes" agrees with "verdict is critical".
    pub gradient_consistent: bool,
    /// Set when `α = 0`, where every critical point is a global minimum.
    pub constant_target: bool,
    pub gamma_advisory: Option<GammaAdvisory>,
    pub family: Option<SaddleFamilySpec<S>>,
    pub neurons: Vec<NeuronReport<S>>,
    pub evidence: Vec<Evidence>,
}

struct Outcome<S> {
    verdict: Verdict,
    saddle_order: Option<usize>,
    sigma: Option<i8>,
    predicted: Option<S>,
    family: Option<SaddleFamilySpec<S>>,
}

impl<S> Outcome<S> {
    fn not_critical() -> Self {
        Self { verdict: Verdict::NotCritical, saddle_order: None, sigma: None, predicted: None, family: None }
    }
}

struct Ctx<'a, S> {
    params: &'a NetworkParams<S>,
    target: &'a TargetSpec<S>,
    tol: &'a Tolerances,
    neurons: &'a [NeuronReport<S>],
    evidence: Vec<Evidence>,
}

impl<S: Scalar> Ctx<'_, S> {
    fn note(&mut self, check: &str, holds: bool, detail: impl Into<String>) -> bool {
        self.evidence.push(Evidence { check: check.into(), holds, detail: detail.into() });
        holds
    }

    fn is_zero(&self, x: &S, scale: f64) -> bool {
        x.is_negligible(scale, self.tol.structural)
    }

    fn alpha_v_sign(&self, j: usize) -> i8 {
        let av = self.target.alpha.clone() * self.params.v[j].clone();
        av.sign_tol(self.target.alpha.to_f64().abs().max(1.0), self.tol.structural)
    }

    fn w_is_zero(&self, j: usize) -> bool {
        let (w, b) = (&self.params.w[j], &self.params.b[j]);
        self.is_zero(w, w.to_f64().abs() + b.to_f64().abs())
    }

    fn loc_scale(&self) -> f64 {
        self.target.location_scale()
    }

    /// Checks centering; records the outcome.
    fn centered(&mut self) -> bool {
        let rep = centeredness(self.params, self.target, self.tol);
        self.note(
            "centered",
            rep.centered,
            format!("c = {}, best constant = {}", rep.actual_c, rep.required_c),
        )
    }

    /// First neuron violating `ok`, recorded under `check`.
    fn all_neurons(&mut self, check: &str, ok: impl Fn(&Self, &NeuronReport<S>) -> bool) -> bool {
        let bad = self.neurons.iter().find(|rep| !ok(self, rep)).map(|rep| (rep.index, rep.kind, rep.flat));
        match bad {
            None => self.note(check, true, "all neurons"),
            Some((j, kind, flat)) => {
                let flat = if flat { "flat " } else { "" };
                self.note(check, false, format!("neuron {j} is {flat}{kind}"))
            }
        }
    }

    /// Type-2-active neurons grouped by breakpoint, sorted left to right.
    fn kink_groups(&self) -> Vec<(S, Vec<usize>)> {
        let mut items: Vec<(S, usize)> = self
            .neurons
            .iter()
            .filter(|rep| rep.kind == NeuronKind::Type2Active)
            .map(|rep| (rep.breakpoint.clone().expect("type-2 neurons have breakpoints"), rep.index))
            .collect();
        items.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite breakpoints"));
        let mut groups: Vec<(S, Vec<usize>)> = Vec::new();
        for (t, j) in items {
            match groups.last_mut() {
                Some((t_prev, members)) if t.approx_eq(t_prev, self.loc_scale(), self.tol.structural) => members.push(j),
                _ => groups.push((t, vec![j])),
            }
        }
        groups
    }

    /// Matches kink groups against a family: positions, weight signs and slope sums.
    fn matches_family(&mut self, groups: &[(S, Vec<usize>)], spec: &SaddleFamilySpec<S>, label: &str) -> bool {
        for (i, (t, members)) in groups.iter().enumerate() {
            if !t.approx_eq(&spec.breakpoints[i], self.loc_scale(), self.tol.structural) {
                return self.note(
                    &format!("{label}: breakpoint lattice"),
                    false,
                    format!("kink {} at {t}, expected {} (neuron {})", i + 1, spec.breakpoints[i], members[0]),
                );
            }
            for &j in members {
                let sign = self.params.w[j].sign_tol(1.0, 0.0);
                if sign != spec.weight_signs[i] {
                    return self.note(
                        &format!("{label}: weight signs"),
                        false,
                        format!("neuron {j} at kink {} has sign(w) = {sign}, expected {}", i + 1, spec.weight_signs[i]),
                    );
                }
            }
            let sum = S::sum_all(members.iter().map(|&j| self.params.v[j].clone() * self.params.w[j].clone()));
            let want = &spec.slope_sums[i];
            if !sum.approx_eq(want, want.to_f64().abs(), self.tol.structural) {
                return self.note(
                    &format!("{label}: slope sums"),
                    false,
                    format!("sum of v*w at kink {} is {sum}, expected {want} (first neuron {})", i + 1, members[0]),
                );
            }
        }
        self.note(&format!("{label}: kinks"), true, format!("{} kinks match lattice, signs and slope sums", groups.len()))
    }

    fn constant_saddle_loss(&self) -> S {
        relu_ladder_value(self.target, 0)
    }
}

fn relu_outcome<S: Scalar>(ctx: &mut Ctx<'_, S>) -> Outcome<S> {
    if !ctx.centered() {
        return Outcome::not_critical();
    }
    let local_min = ctx.all_neurons("local-min neuron pattern", |c, rep| match rep.kind {
        NeuronKind::Inactive => true,
        NeuronKind::SemiInactive if rep.touches == Some(Endpoint::Left) => c.alpha_v_sign(rep.index) > 0,
        NeuronKind::SemiInactive => c.alpha_v_sign(rep.index) < 0,
        _ => false,
    });
    if local_min {
        return Outcome {
            verdict: Verdict::NonGlobalLocalMinimum,
            saddle_order: None,
            sigma: None,
            predicted: Some(ctx.constant_saddle_loss()),
            family: None,
        };
    }
    let allowed = ctx.all_neurons("no type-1-active, non-flat semi-active or non-flat degenerate neuron", |_, rep| {
        !(rep.kind == NeuronKind::Type1Active
            || (rep.kind == NeuronKind::SemiActive && !rep.flat)
            || (rep.kind == NeuronKind::Degenerate && !rep.flat))
    });
    if !allowed {
        return Outcome::not_critical();
    }
    let groups = ctx.kink_groups();
    if groups.is_empty() {
        let witness = ctx.neurons.iter().find(|rep| match rep.kind {
            NeuronKind::SemiActive | NeuronKind::Degenerate => rep.flat,
            NeuronKind::SemiInactive if rep.touches == Some(Endpoint::Left) => ctx.alpha_v_sign(rep.index) <= 0,
            NeuronKind::SemiInactive => ctx.alpha_v_sign(rep.index) >= 0,
            _ => false,
        });
        let Some(rep) = witness else {
            ctx.note("saddle witness neuron", false, "no neuron escapes the local-min pattern");
            return Outcome::not_critical();
        };
        let detail = format!("neuron {} is {}{}", rep.index, if rep.flat { "flat " } else { "" }, rep.kind);
        ctx.note("saddle witness neuron", true, detail);
        return Outcome {
            verdict: Verdict::Saddle,
            saddle_order: Some(0),
            sigma: None,
            predicted: Some(ctx.constant_saddle_loss()),
            family: None,
        };
    }
    let n = groups.len();
    if n % 2 == 1 {
        ctx.note("even number of kinks", false, format!("{n} distinct type-2 breakpoints"));
        return Outcome::not_critical();
    }
    let mut spec = SaddleFamilySpec::relu(ctx.target, n).expect("n is even and positive");
    if !ctx.matches_family(&groups, &spec, "relu family") {
        return Outcome::not_critical();
    }
    spec.multiplicity = groups.iter().map(|(_, m)| m.len()).collect();
    Outcome {
        verdict: Verdict::Saddle,
        saddle_order: Some(n),
        sigma: None,
        predicted: Some(relu_ladder_value(ctx.target, n)),
        family: Some(spec),
    }
}

fn leaky_outcome<S: Scalar>(ctx: &mut Ctx<'_, S>, gamma: &S) -> Outcome<S> {
    if !ctx.centered() {
        return Outcome::not_critical();
    }
    let allowed = ctx.all_neurons("each neuron flat semi-active, flat inactive with w = 0, flat degenerate or type-2-active", |c, rep| {
        match rep.kind {
            NeuronKind::Type2Active => true,
            NeuronKind::SemiActive | NeuronKind::Degenerate => rep.flat,
            NeuronKind::Inactive => rep.flat && c.w_is_zero(rep.index),
            _ => false,
        }
    });
    if !allowed {
        return Outcome::not_critical();
    }
    let groups = ctx.kink_groups();
    if groups.is_empty() {
        ctx.note("no type-2-active neuron", true, "constant realization");
        return Outcome {
            verdict: Verdict::Saddle,
            saddle_order: Some(0),
            sigma: None,
            predicted: Some(ctx.constant_saddle_loss()),
            family: None,
        };
    }
    let n = groups.len();
    for sigma in [1i8, -1] {
        let label = format!("leaky family sigma = {sigma}");
        let mut spec = match SaddleFamilySpec::leaky(ctx.target, gamma, n, sigma) {
            Ok(spec) => spec,
            Err(err) => {
                ctx.note(&label, false, err.to_string());
                continue;
            }
        };
        if ctx.matches_family(&groups, &spec, &label) {
            spec.multiplicity = groups.iter().map(|(_, m)| m.len()).collect();
            let predicted = spec.residual_form(ctx.target).ok().map(|form| form.integrate_square());
            return Outcome { verdict: Verdict::Saddle, saddle_order: Some(n), sigma: Some(sigma), predicted, family: Some(spec) };
        }
    }
    Outcome::not_critical()
}

fn quadratic_outcome<S: Scalar>(ctx: &mut Ctx<'_, S>) -> Outcome<S> {
    if !ctx.centered() {
        return Outcome::not_critical();
    }
    let mid = ctx.target.midpoint();
    let ok = ctx.all_neurons("each neuron has w = 0 = v*b, or v = 0 != w with its kink at the midpoint", |c, rep| {
        let j = rep.index;
        let (w, b, v) = (&c.params.w[j], &c.params.b[j], &c.params.v[j]);
        let wb = w.to_f64().abs() + b.to_f64().abs();
        let zero_slope = c.w_is_zero(j) && c.is_zero(&(v.clone() * b.clone()), v.to_f64().abs() * b.to_f64().abs());
        let flat_centered = c.is_zero(v, 1.0)
            && !c.w_is_zero(j)
            && (b.clone() + mid.clone() * w.clone()).is_negligible(wb * c.loc_scale(), c.tol.structural);
        zero_slope || flat_centered
    });
    if !ok {
        return Outcome::not_critical();
    }
    Outcome {
        verdict: Verdict::Saddle,
        saddle_order: None,
        sigma: None,
        predicted: Some(ctx.constant_saddle_loss()),
        family: None,
    }
}

/// Scale used to decide whether a gradient entry is zero.
pub fn gradient_scale<S: Scalar>(params: &NetworkParams<S>, target: &TargetSpec<S>) -> f64 {
    let mut m = target.alpha.to_f64().abs().max(target.beta.to_f64().abs()).max(params.c.to_f64().abs());
    for v in &params.v {
        m = m.max(v.to_f64().abs());
    }
    m.max(1.0) * target.location_scale().powi(2)
}

/// Classifies `φ` as a global minimum, non-global local minimum, saddle or
/// non-critical point.
pub fn classify<S: Scalar>(params: &NetworkParams<S>, target: &TargetSpec<S>, tol: &Tolerances) -> ClassificationResult<S> {
    let neurons = classify_neurons(params, target, tol);
    let value = loss(params, target);
    let grad = generalized_gradient(params, target, tol);
    let grad_norm = grad.sup_norm();
    let grad_zero = if S::EXACT {
        grad.is_exactly_zero()
    } else {
        grad_norm <= tol.grad * gradient_scale(params, target)
    };
    let mut ctx = Ctx { params, target, tol, neurons: &neurons, evidence: Vec::new() };
    ctx.note(
        "gradient vanishes",
        grad_zero,
        format!("sup-norm of the generalized gradient is {grad_norm:e}"),
    );

    let len = target.length().to_f64();
    let size = target.alpha.to_f64().abs() * target.location_scale() + target.beta.to_f64().abs() + params.c.to_f64().abs();
    let loss_scale = size * size * len;
    let gamma_advisory = match &params.activation {
        Activation::Leaky { gamma } => Some(gamma_validity(gamma.to_f64())),
        _ => None,
    };
    let constant_target = target.alpha.is_negligible(target.beta.to_f64().abs(), tol.structural);

    let outcome = if value.is_negligible(loss_scale, tol.structural) {
        ctx.note("zero loss", true, format!("loss = {value}"));
        Outcome { verdict: Verdict::GlobalMinimum, saddle_order: None, sigma: None, predicted: Some(S::zero()), family: None }
    } else if constant_target {
        ctx.note(
            "nonzero target slope",
            false,
            "for a constant target every critical point is a global minimum, and the loss is positive here",
        );
        Outcome::not_critical()
    } else {
        match &params.activation {
            Activation::Relu => relu_outcome(&mut ctx),
            Activation::Leaky { gamma } => leaky_outcome(&mut ctx, gamma),
            Activation::Quadratic => quadratic_outcome(&mut ctx),
        }
    };

    ClassificationResult {
        verdict: outcome.verdict,
        saddle_order: outcome.saddle_order,
        sigma: outcome.sigma,
        predicted_loss: outcome.predicted,
        loss: value,
        gradient_sup_norm: grad_norm,
        gradient_consistent: grad_zero == outcome.verdict.is_critical(),
        constant_target,
        gamma_advisory,
        family: outcome.family,
        evidence: ctx.evidence,
        neurons,
    }
}

/// The loss values a critical point can have, by activation.
///
/// ReLU: the ladder `α²(t1-t0)³/(12(n+1)^4)` for even `n ≤ width` plus `n = 0`;
/// quadratic: the constant-realization value; leaky: the constant value and
/// the family values for every `n ≤ width`, both orientations.
pub fn predicted_loss_values(activation: &Activation<f64>, target: &TargetSpec<f64>, width: usize) -> Vec<f64> {
    let mut out = vec![0.0, relu_ladder_value(target, 0)];
    match activation {
        Activation::Relu => out.extend((2..=width).step_by(2).map(|n| relu_ladder_value(target, n))),
        Activation::Leaky { gamma } => {
            for n in 1..=width {
                for sigma in [1, -1] {
                    if let Ok(form) = SaddleFamilySpec::leaky(target, gamma, n, sigma).and_then(|s| s.residual_form(target)) {
                        out.push(form.integrate_square());
                    }
                }
            }
        }
        Activation::Quadratic => {}
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::*;
    use crate::scalar::Rational;

    fn r(p: i64, q: i64) -> Rational {
        Rational::ratio(p, q)
    }

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn local_min_example() {
        let t = TargetSpec::<f64>::identity();
        let net = NetworkParams::relu(vec![-1.0], vec![-0.5], vec![1.0], 0.5).unwrap();
        let res = classify(&net, &t, &tol());
        assert_eq!(res.verdict, Verdict::NonGlobalLocalMinimum);
        assert_eq!(res.predicted_loss, Some(1.0 / 12.0));
        assert!(res.gradient_consistent);
    }

    #[test]
    fn relu_saddle_round_trip_exact() {
        let t = TargetSpec::<Rational>::identity();
        for n in [2, 4, 6] {
            let net = make_relu_saddle(n + 1, &t, n, &MassSplit::unit(n)).unwrap();
            let res = classify(&net, &t, &tol());
            assert_eq!(res.verdict, Verdict::Saddle);
            assert_eq!(res.saddle_order, Some(n));
            assert_eq!(res.predicted_loss.clone().unwrap(), res.loss);
            assert!(res.gradient_consistent);
        }
    }

    #[test]
    fn trivial_saddles_and_witness() {
        let t = TargetSpec::<f64>::identity();
        let net = NetworkParams::relu(vec![0.0, -1.0], vec![1.0, -0.5], vec![0.0, 1.0], 0.5).unwrap();
        let res = classify(&net, &t, &tol());
        assert_eq!(res.verdict, Verdict::Saddle);
        assert_eq!(res.saddle_order, Some(0));
        for kind in TrivialSaddleKind::ALL {
            let net = make_relu_trivial_saddle(3, &t, kind).unwrap();
            let res = classify(&net, &t, &tol());
            assert_eq!(res.verdict, Verdict::Saddle, "{kind:?}");
            assert!(res.gradient_consistent, "{kind:?}");
        }
    }

    #[test]
    fn quadratic_cases() {
        let t = TargetSpec::<Rational>::identity();
        let g = make_quadratic_global_min(2, &t).unwrap();
        assert_eq!(classify(&g, &t, &tol()).verdict, Verdict::GlobalMinimum);
        let s = make_quadratic_saddle(2, &t, &[QuadNeuron::ZeroSlope { b: r(0, 1), v: r(3, 1) }, QuadNeuron::FlatCentered { w: r(2, 1) }]).unwrap();
        let res = classify(&s, &t, &tol());
        assert_eq!(res.verdict, Verdict::Saddle);
        assert_eq!(res.predicted_loss.unwrap(), r(1, 12));
        assert!(res.gradient_consistent);
        let sym = TargetSpec::new(r(1, 1), r(0, 1), r(-1, 1), r(1, 1)).unwrap();
        let s = make_quadratic_saddle(1, &sym, &[QuadNeuron::FlatCentered { w: r(1, 1) }]).unwrap();
        assert_eq!(classify(&s, &sym, &tol()).verdict, Verdict::Saddle);
    }

    #[test]
    fn leaky_saddle_round_trip() {
        let t = TargetSpec::<f64>::identity();
        for n in 1..=4 {
            for sigma in [1, -1] {
                let (net, _) = make_leaky_saddle(n + 1, &t, &0.04, n, sigma, &MassSplit::unit(n)).unwrap();
                let res = classify(&net, &t, &tol());
                assert_eq!(res.verdict, Verdict::Saddle, "n={n} sigma={sigma} {:?}", res.evidence);
                assert_eq!((res.saddle_order, res.sigma), (Some(n), Some(sigma)));
                assert!(res.gradient_consistent);
                let p = res.predicted_loss.unwrap();
                assert!((p - res.loss).abs() <= 1e-12 * p);
            }
        }
    }

    #[test]
    fn constant_target_and_not_critical() {
        let t = TargetSpec::new(0.0, 1.0, 0.0, 1.0).unwrap();
        let net = NetworkParams::relu(vec![-1.0], vec![-0.5], vec![1.0], 0.0).unwrap();
        let res = classify(&net, &t, &tol());
        assert_eq!(res.verdict, Verdict::NotCritical);
        assert!(res.constant_target);
        let random = NetworkParams::relu(vec![0.7], vec![0.1], vec![0.4], 0.2).unwrap();
        let res = classify(&random, &TargetSpec::identity(), &tol());
        assert_eq!(res.verdict, Verdict::NotCritical);
        assert!(res.gradient_consistent);
        assert!(res.evidence.iter().any(|e| !e.holds));
    }

    #[test]
    fn gamma_advisory() {
        assert_eq!(gamma_validity(0.01), GammaAdvisory::ConjecturedValid);
        assert_eq!(gamma_validity(0.95), GammaAdvisory::ConjecturedValidWithWarning);
        assert_eq!(gamma_validity(0.9), GammaAdvisory::ConjecturedValid);
        assert_eq!(gamma_validity(1.0), GammaAdvisory::Invalid);
    }

    #[test]
    fn ladder_examples() {
        let t = TargetSpec::new(2.0, 0.0, 0.0, 3.0).unwrap();
        assert!((relu_ladder_value(&t, 0) - 9.0).abs() < 1e-14);
        let id = TargetSpec::<Rational>::identity();
        assert_eq!(relu_ladder_value(&id, 4), r(1, 7500));
    }
}
