//! JSON formats for networks, targets and analysis results.
//!
//! Network: `{"activation": {"kind": "relu" | "leaky" | "quadratic", "gamma": γ},
//! "w": [..], "b": [..], "v": [..], "c": c}`. Target: `{"alpha", "beta", "t0", "t1"}`.
//! Scalars may be JSON numbers or strings holding a decimal or `"p/q"`.
//! Float output writes numbers; rational output writes `"p/q"` strings.

use serde_json::{json, Map, Value};

use crate::classifier::{ClassificationResult, Evidence};
use crate::construct::SaddleFamilySpec;
use crate::descent::{SweepSummary, TrajectoryRecord};
use crate::error::{LandscapeError, Result};
use crate::exactcalc::{GradientVector, HessianBlock};
use crate::model::{realize, Activation, NetworkParams, PiecewiseForm, TargetSpec};
use crate::scalar::{format_rational, parse_rational, Rational, Scalar, Tolerances};
use crate::taxonomy::{Endpoint, NeuronReport};
use crate::verify::{EscapeWitness, HessianProbeResult, RecurrenceReport};

/// Scalars with a JSON representation.
pub trait WireScalar: Scalar {
    fn parse_json(value: &Value, field: &str) -> Result<Self>;
    fn to_json(&self) -> Value;
    /// Plain-text form used in CSV output.
    fn to_text(&self) -> String;
}

fn scalar_text(value: &Value, field: &str) -> Result<String> {
    match value {
        Value::Number(n) => Ok(n.to_string()),
        Value::String(s) => Ok(s.clone()),
        other => Err(LandscapeError::invalid(field, format!("expected a number, got {other}"))),
    }
}

impl WireScalar for f64 {
    fn parse_json(value: &Value, field: &str) -> Result<Self> {
        let text = scalar_text(value, field)?;
        let x = match parse_rational(&text) {
            Some(q) => q.to_f64(),
            None => text.trim().parse::<f64>().map_err(|_| LandscapeError::invalid(field, format!("cannot parse {text:?}")))?,
        };
        if x.is_finite() {
            Ok(x)
        } else {
            Err(LandscapeError::invalid(field, "not finite"))
        }
    }

    fn to_json(&self) -> Value {
        serde_json::Number::from_f64(*self).map_or(Value::Null, Value::Number)
    }

    fn to_text(&self) -> String {
        format!("{self:?}")
    }
}

impl WireScalar for Rational {
    fn parse_json(value: &Value, field: &str) -> Result<Self> {
        let text = scalar_text(value, field)?;
        parse_rational(&text).ok_or_else(|| LandscapeError::invalid(field, format!("{text:?} is not a rational number")))
    }

    fn to_json(&self) -> Value {
        Value::String(format_rational(self))
    }

    fn to_text(&self) -> String {
        format_rational(self)
    }
}

fn field<'a>(obj: &'a Map<String, Value>, name: &str) -> Result<&'a Value> {
    obj.get(name).ok_or_else(|| LandscapeError::invalid(name, "missing"))
}

fn object<'a>(value: &'a Value, name: &str) -> Result<&'a Map<String, Value>> {
    value.as_object().ok_or_else(|| LandscapeError::invalid(name, "expected an object"))
}

fn scalar_list<S: WireScalar>(obj: &Map<String, Value>, name: &str) -> Result<Vec<S>> {
    let arr = field(obj, name)?.as_array().ok_or_else(|| LandscapeError::invalid(name, "expected an array"))?;
    arr.iter().enumerate().map(|(i, x)| S::parse_json(x, &format!("{name}[{i}]"))).collect()
}

pub fn parse_activation<S: WireScalar>(value: &Value) -> Result<Activation<S>> {
    let obj = object(value, "activation")?;
    let kind = obj
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| LandscapeError::invalid("activation.kind", "missing or not a string"))?;
    match kind {
        "relu" => Ok(Activation::Relu),
        "quadratic" => Ok(Activation::Quadratic),
        "leaky" => {
            let gamma = obj.get("gamma").ok_or_else(|| LandscapeError::invalid("activation.gamma", "missing"))?;
            Activation::leaky(S::parse_json(gamma, "activation.gamma")?)
        }
        other => Err(LandscapeError::invalid("activation.kind", format!("unknown kind {other:?}"))),
    }
}

pub fn parse_network<S: WireScalar>(value: &Value) -> Result<NetworkParams<S>> {
    let obj = object(value, "network")?;
    let activation = parse_activation(field(obj, "activation")?)?;
    let w = scalar_list(obj, "w")?;
    let b = scalar_list(obj, "b")?;
    let v = scalar_list(obj, "v")?;
    let c = S::parse_json(field(obj, "c")?, "c")?;
    NetworkParams::new(w, b, v, c, activation)
}

pub fn parse_target<S: WireScalar>(value: &Value) -> Result<TargetSpec<S>> {
    let obj = object(value, "target")?;
    let get = |name: &str| -> Result<S> { S::parse_json(field(obj, name)?, name) };
    TargetSpec::new(get("alpha")?, get("beta")?, get("t0")?, get("t1")?)
}

fn list<S: WireScalar>(xs: &[S]) -> Value {
    Value::Array(xs.iter().map(WireScalar::to_json).collect())
}

pub fn activation_to_json<S: WireScalar>(act: &Activation<S>) -> Value {
    match act {
        Activation::Leaky { gamma } => json!({ "kind": "leaky", "gamma": gamma.to_json() }),
        other => json!({ "kind": other.name() }),
    }
}

pub fn network_to_json<S: WireScalar>(net: &NetworkParams<S>) -> Value {
    json!({
        "activation": activation_to_json(&net.activation),
        "w": list(&net.w),
        "b": list(&net.b),
        "v": list(&net.v),
        "c": net.c.to_json(),
    })
}

pub fn target_to_json<S: WireScalar>(t: &TargetSpec<S>) -> Value {
    json!({ "alpha": t.alpha.to_json(), "beta": t.beta.to_json(), "t0": t.t0.to_json(), "t1": t.t1.to_json() })
}

pub fn gradient_to_json<S: WireScalar>(g: &GradientVector<S>) -> Value {
    json!({
        "dw": list(&g.dw),
        "db": list(&g.db),
        "dv": list(&g.dv),
        "dc": g.dc.to_json(),
        "sup_norm": g.sup_norm(),
    })
}

pub fn hessian_to_json<S: WireScalar>(h: &HessianBlock<S>) -> Value {
    json!({
        "coordinates": h.coordinates.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "matrix": h.matrix.iter().map(|row| list(row)).collect::<Vec<_>>(),
        "eigenvalues": h.eigenvalues(),
    })
}

pub fn form_to_json<S: WireScalar>(form: &PiecewiseForm<S>) -> Value {
    json!({
        "knots": list(&form.knots),
        "segments": form.segments.iter().map(|p| list(&p.coeffs)).collect::<Vec<_>>(),
    })
}

pub fn family_to_json<S: WireScalar>(spec: &SaddleFamilySpec<S>) -> Value {
    json!({
        "n": spec.n,
        "sigma": spec.sigma,
        "gamma": spec.gamma.as_ref().map(WireScalar::to_json),
        "delta": spec.delta.as_ref().map(WireScalar::to_json),
        "breakpoints": list(&spec.breakpoints),
        "slope_sums": list(&spec.slope_sums),
        "weight_signs": spec.weight_signs,
        "multiplicity": spec.multiplicity,
    })
}

fn neuron_to_json<S: WireScalar>(rep: &NeuronReport<S>) -> Value {
    json!({
        "index": rep.index,
        "kind": rep.kind.name(),
        "flat": rep.flat,
        "breakpoint": rep.breakpoint.as_ref().map(WireScalar::to_json),
        "touches": rep.touches.map(|e| match e {
            Endpoint::Left => "t0",
            Endpoint::Right => "t1",
        }),
    })
}

fn evidence_to_json(e: &Evidence) -> Value {
    json!({ "check": e.check, "holds": e.holds, "detail": e.detail })
}

pub fn classification_to_json<S: WireScalar>(res: &ClassificationResult<S>) -> Value {
    json!({
        "verdict": res.verdict.name(),
        "saddle_order": res.saddle_order,
        "sigma": res.sigma,
        "predicted_loss": res.predicted_loss.as_ref().map(WireScalar::to_json),
        "loss": res.loss.to_json(),
        "gradient_sup_norm": res.gradient_sup_norm,
        "gradient_consistent": res.gradient_consistent,
        "constant_target": res.constant_target,
        "gamma_advisory": res.gamma_advisory.map(|g| g.name()),
        "family": res.family.as_ref().map(family_to_json),
        "neurons": res.neurons.iter().map(neuron_to_json).collect::<Vec<_>>(),
        "evidence": res.evidence.iter().map(evidence_to_json).collect::<Vec<_>>(),
    })
}

pub fn probe_to_json(p: &HessianProbeResult) -> Value {
    json!({
        "coordinates": p.coordinates.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "determinant": p.determinant,
        "eigenvalues": p.eigenvalues,
        "min_eigenvalue": p.min_eigenvalue,
        "gamma_factor": p.gamma_factor,
        "mu": p.mu,
        "lambdas": p.lambdas,
        "criterion": p.criterion,
        "full_coordinates": p.full_coordinates.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "full_min_eigenvalue": p.full_min_eigenvalue,
        "full_min_eigenvector": p.full_min_eigenvector,
    })
}

pub fn witness_to_json(w: &EscapeWitness) -> Value {
    json!({
        "method": w.method,
        "loss_drop": w.loss_drop,
        "direction": w.direction,
        "point": network_to_json(&w.point),
    })
}

pub fn recurrence_to_json(r: &RecurrenceReport) -> Value {
    json!({
        "knots": r.knots,
        "segment_means": r.segment_means,
        "segment_means_vanish": r.segment_means_vanish,
        "slope_recurrence": r.slope_recurrence,
        "intercept_recurrence": r.intercept_recurrence,
        "sign_alternation": r.sign_alternation,
        "moment_identity": r.moment_identity,
        "first_moment": r.first_moment,
        "first_moment_vanishes": r.first_moment_vanishes,
        "alternating_sum": r.alternating_sum,
        "vanishing_moment_consequences": r.vanishing_moment_consequences,
        "equals_target": r.equals_target,
    })
}

/// CSV `x,f,target` on `grid + 1` equally spaced points of the target interval.
pub fn realization_csv<S: WireScalar>(params: &NetworkParams<S>, target: &TargetSpec<S>, grid: usize, tol: &Tolerances) -> Result<String> {
    if grid == 0 {
        return Err(LandscapeError::invalid("grid", "must be at least 1"));
    }
    let form = realize(params, target, tol);
    let step = target.length() / S::from_int(grid as i64);
    let mut out = String::from("x,f,target\n");
    for k in 0..=grid {
        let x = if k == grid { target.t1.clone() } else { target.t0.clone() + S::from_int(k as i64) * step.clone() };
        let f = form.evaluate(&x)?;
        out.push_str(&format!("{},{},{}\n", x.to_text(), f.to_text(), target.eval(&x).to_text()));
    }
    Ok(out)
}

/// CSV `iter,loss,grad_norm` of the recorded iterates, optionally followed
/// by the parameters `w0.., b0.., v0.., c`.
pub fn trajectory_csv(rec: &TrajectoryRecord, with_params: bool) -> String {
    let mut out = String::from("iter,loss,grad_norm");
    let width = rec.final_params.width();
    if with_params {
        for name in ["w", "b", "v"] {
            for j in 0..width {
                out.push_str(&format!(",{name}{j}"));
            }
        }
        out.push_str(",c");
    }
    out.push('\n');
    for (((iter, p), loss), gn) in rec.iterates.iter().zip(&rec.losses).zip(&rec.grad_norms) {
        out.push_str(&format!("{iter},{},{}", loss.to_text(), gn.to_text()));
        if with_params {
            for x in p.to_vec() {
                out.push(',');
                out.push_str(&x.to_text());
            }
        }
        out.push('\n');
    }
    out
}

pub fn sweep_to_json(summary: &SweepSummary) -> Value {
    json!({
        "ladder": summary.ladder,
        "histogram": summary.histogram,
        "off_ladder": summary.off_ladder,
        "bin_tolerance": summary.bin_tolerance,
        "runs": summary.rows.iter().map(|r| json!({
            "index": r.index,
            "seed": r.seed,
            "status": r.status.name(),
            "iterations": r.iterations,
            "final_loss": r.final_loss,
            "final_grad_norm": r.final_grad_norm,
            "verdict": r.verdict.name(),
            "ladder_bin": r.ladder_bin,
        })).collect::<Vec<_>>(),
    })
}
