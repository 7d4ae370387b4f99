//! Browser bindings: build a critical point, classify it and sample its realization.
//!
//! Networks and targets cross the boundary as JSON strings in the same
//! format the command-line tool reads.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use shallow_landscape::construct::{make_leaky_saddle, make_relu_saddle_with_spec, MassSplit};
use shallow_landscape::wire::{classification_to_json, family_to_json, network_to_json, parse_network, parse_target};
use shallow_landscape::{classify, loss, realize, LandscapeError, NetworkParams, TargetSpec, Tolerances};

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn parse_pair(network_json: &str, target_json: &str) -> Result<(NetworkParams<f64>, TargetSpec<f64>), LandscapeError> {
    let net = parse_network(&serde_json::from_str::<Value>(network_json)?)?;
    let target = parse_target(&serde_json::from_str::<Value>(target_json)?)?;
    Ok((net, target))
}

/// Samples `f`, the target and the residual at `grid + 1` points.
pub fn realize_curve_json(network_json: &str, target_json: &str, grid: usize) -> Result<Value, LandscapeError> {
    if grid == 0 {
        return Err(LandscapeError::invalid("grid", "must be at least 1"));
    }
    let (net, t) = parse_pair(network_json, target_json)?;
    let form = realize(&net, &t, &Tolerances::default());
    let xs: Vec<f64> = (0..=grid).map(|k| t.t0 + (t.t1 - t.t0) * k as f64 / grid as f64).collect();
    let f = xs.iter().map(|x| form.evaluate(x)).collect::<Result<Vec<_>, _>>()?;
    let target: Vec<f64> = xs.iter().map(|x| t.eval(x)).collect();
    Ok(json!({ "x": xs, "f": f, "target": target, "knots": form.knots, "loss": loss(&net, &t) }))
}

pub fn construct_saddle_json(target_json: &str, activation: &str, n: usize, sigma: i8, gamma: f64) -> Result<Value, LandscapeError> {
    let t = parse_target::<f64>(&serde_json::from_str::<Value>(target_json)?)?;
    let (net, spec) = match activation {
        "relu" => make_relu_saddle_with_spec(n, &t, n, &MassSplit::unit(n))?,
        "leaky" => make_leaky_saddle(n, &t, &gamma, n, sigma, &MassSplit::unit(n))?,
        other => return Err(LandscapeError::invalid("activation", format!("expected relu or leaky, got {other:?}"))),
    };
    let mut out = network_to_json(&net);
    out["family"] = family_to_json(&spec);
    Ok(out)
}

/// JSON `{x, f, target, knots, loss}` for plotting.
#[wasm_bindgen]
pub fn realize_curve(network_json: &str, target_json: &str, grid: usize) -> Result<String, JsValue> {
    realize_curve_json(network_json, target_json, grid).map(|v| v.to_string()).map_err(js_err)
}

/// Classification result with its evidence list, as JSON.
#[wasm_bindgen]
pub fn classify_network(network_json: &str, target_json: &str) -> Result<String, JsValue> {
    let (net, t) = parse_pair(network_json, target_json).map_err(js_err)?;
    Ok(classification_to_json(&classify(&net, &t, &Tolerances::default())).to_string())
}

/// Saddle with `n` kinks and one neuron per kink, as network JSON.
#[wasm_bindgen]
pub fn construct_saddle(target_json: &str, activation: &str, n: usize, sigma: i8, gamma: f64) -> Result<String, JsValue> {
    construct_saddle_json(target_json, activation, n, sigma, gamma).map(|v| v.to_string()).map_err(js_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    const UNIT: &str = r#"{"alpha": 1, "beta": 0, "t0": 0, "t1": 1}"#;

    #[test]
    fn saddle_round_trip() {
        let net = construct_saddle_json(UNIT, "relu", 4, 1, 0.0).unwrap().to_string();
        let cls: Value = serde_json::from_str(&classify_network(&net, UNIT).unwrap()).unwrap();
        assert_eq!(cls["verdict"], "Saddle");
        let curve = realize_curve_json(&net, UNIT, 10).unwrap();
        assert_eq!(curve["x"].as_array().unwrap().len(), 11);
        assert!((curve["loss"].as_f64().unwrap() - 1.0 / 7500.0).abs() < 1e-15);
    }

    #[test]
    fn leaky_and_errors() {
        let net = construct_saddle_json(UNIT, "leaky", 2, -1, 0.25).unwrap();
        assert_eq!(net["family"]["sigma"], -1);
        assert!(construct_saddle_json(UNIT, "relu", 3, 1, 0.0).is_err());
        assert!(construct_saddle_json(UNIT, "tanh", 2, 1, 0.0).is_err());
        assert!(realize_curve_json("{", UNIT, 10).is_err());
    }
}
