//! `landscape`: command-line front end for the shallow-landscape library.
//!
//! Exit status is 0 on success, 2 when an input fails validation and 1 on
//! internal errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use shallow_landscape::construct::{
    canonicalize, make_leaky_duplication, make_leaky_saddle, make_leaky_trivial_saddle, make_quadratic_global_min,
    make_quadratic_saddle, make_relu_local_min, make_relu_saddle_with_spec, make_relu_trivial_saddle, transform_p,
    transform_q, MassSplit, MinNeuron, QuadNeuron, TrivialSaddleKind,
};
use shallow_landscape::descent::{run_gd, sweep, InitSpec, SimConfig};
use shallow_landscape::exactcalc::differentiability_report;
use shallow_landscape::verify::{
    descent_direction_search, fd_gradient, lemma_recurrence_check, local_min_margin, quadrature_oracle, saddle_probe, FdSide,
};
use shallow_landscape::wire::{
    classification_to_json, family_to_json, gradient_to_json, network_to_json, parse_network, parse_target, probe_to_json,
    realization_csv, recurrence_to_json, sweep_to_json, trajectory_csv, witness_to_json, WireScalar,
};
use shallow_landscape::{
    classify, generalized_gradient, loss, realize, Activation, LandscapeError, NetworkParams, Rational, TargetSpec, Tolerances,
    Verdict,
};

#[derive(Parser)]
#[command(name = "landscape", version, about = "Loss landscape analysis for one-hidden-layer networks on affine targets")]
struct Cli {
    /// Number backend.
    #[arg(long, global = true, value_enum, env = "LANDSCAPE_MODE", default_value_t = Mode::Float)]
    mode: Mode,
    /// Relative threshold for structural predicates such as `w = 0` (float mode).
    #[arg(long, global = true)]
    tol_struct: Option<f64>,
    /// Threshold on the gradient sup-norm for criticality (float mode).
    #[arg(long, global = true)]
    tol_grad: Option<f64>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Float,
    Rational,
}

#[derive(Args)]
struct Inputs {
    /// Network JSON file.
    network: PathBuf,
    /// Target JSON file.
    target: PathBuf,
}

#[derive(Args, Clone)]
struct SimArgs {
    #[arg(long, default_value_t = 0.2)]
    step_size: f64,
    #[arg(long, default_value_t = 1_000_000)]
    max_iters: usize,
    /// Stop once the gradient sup-norm is at most this.
    #[arg(long, default_value_t = 1e-8)]
    stop_grad: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Gradient,
    Hessian,
    Escape,
    Identities,
    Recurrence,
    All,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Family {
    LocalMin,
    Saddle,
    TrivialSaddle,
    LeakySaddle,
    LeakyTrivialSaddle,
    QuadraticSaddle,
    QuadraticGlobalMin,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ActivationKind {
    Relu,
    Leaky,
    Quadratic,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form loss.
    Eval(Inputs),
    /// Right-hand generalized gradient.
    Grad(Inputs),
    /// Critical-point classification with evidence.
    Classify(Inputs),
    /// Build a member of a critical-point family.
    Construct {
        #[arg(long, value_enum)]
        family: Family,
        /// Number of kinks.
        #[arg(long)]
        n: Option<usize>,
        /// Number of hidden neurons (defaults to the smallest admissible width).
        #[arg(long)]
        width: Option<usize>,
        #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
        sigma: i8,
        /// Leaky slope, as a decimal or `p/q`.
        #[arg(long)]
        gamma: Option<String>,
        /// Trivial saddle kind.
        #[arg(long, default_value = "flat-semi-active")]
        kind: String,
        /// Comma-separated neuron choices: `inactive,left,right` for local
        /// minima, `centered,bias,outer` for quadratic saddles.
        #[arg(long)]
        menu: Option<String>,
        /// Target JSON file (defaults to the identity on [0, 1]).
        #[arg(long)]
        target: Option<PathBuf>,
    },
    /// Numerical and analytic cross-checks.
    Verify {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
        /// Search radius for the escape suite.
        #[arg(long, default_value_t = 0.1)]
        radius: f64,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
    },
    /// Gradient descent from one start; CSV trajectory.
    Descend {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        sim: SimArgs,
        /// Record every k-th iterate.
        #[arg(long, default_value_t = 1000)]
        record_every: usize,
        /// Append the parameters to each CSV row.
        #[arg(long)]
        params: bool,
    },
    /// Many descent runs; JSON summary with a histogram over predicted loss values.
    Sweep {
        /// Target JSON file.
        target: PathBuf,
        /// JSON array of starting networks (otherwise random starts).
        #[arg(long)]
        inits: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 4)]
        width: usize,
        #[arg(long, value_enum, default_value_t = ActivationKind::Relu)]
        activation: ActivationKind,
        #[arg(long)]
        gamma: Option<f64>,
        /// Outer weights start in `U(-scale, scale)`.
        #[arg(long, default_value_t = 0.5)]
        scale: f64,
        #[arg(long, default_value_t = 1e-3)]
        bin_tolerance: f64,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// CSV `x,f,target` on a grid.
    Realize {
        #[command(flatten)]
        inputs: Inputs,
        /// Number of grid intervals.
        #[arg(long, default_value_t = 200)]
        grid: usize,
    },
}

enum Failure {
    Validation(String),
    Internal(String),
}

impl From<LandscapeError> for Failure {
    fn from(e: LandscapeError) -> Self {
        if e.is_validation() || matches!(e, LandscapeError::Construction(_)) {
            Failure::Validation(e.to_string())
        } else {
            Failure::Internal(e.to_string())
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

enum Output {
    Json(Value),
    Text(String),
}

fn read_json(path: &Path) -> Outcome<Value> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Validation(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Validation(format!("malformed JSON in {}: {e}", path.display())))
}

fn load_network<S: WireScalar>(path: &Path) -> Outcome<NetworkParams<S>> {
    parse_network(&read_json(path)?).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn load_target<S: WireScalar>(path: &Path) -> Outcome<TargetSpec<S>> {
    parse_target(&read_json(path)?).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn load_inputs<S: WireScalar>(inputs: &Inputs) -> Outcome<(NetworkParams<S>, TargetSpec<S>)> {
    Ok((load_network(&inputs.network)?, load_target(&inputs.target)?))
}

fn parse_scalar<S: WireScalar>(text: &str, field: &str) -> Outcome<S> {
    Ok(S::parse_json(&Value::String(text.to_string()), field)?)
}

fn tolerances(cli: &Cli) -> Outcome<Tolerances> {
    let mut tol = Tolerances::default();
    for (value, slot, name) in [(cli.tol_struct, &mut tol.structural, "tol-struct"), (cli.tol_grad, &mut tol.grad, "tol-grad")] {
        if let Some(x) = value {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Failure::Validation(format!("invalid `{name}`: must be positive")));
            }
            *slot = x;
        }
    }
    Ok(tol)
}

fn sim_config(sim: &SimArgs, seed: u64, record_every: usize) -> SimConfig {
    SimConfig { step_size: sim.step_size, max_iters: sim.max_iters, stop_grad_norm: sim.stop_grad, seed, record_every }
}

fn run<S: WireScalar>(cli: &Cli) -> Outcome<Output> {
    let tol = tolerances(cli)?;
    match &cli.command {
        Command::Eval(inputs) => {
            let (net, t) = load_inputs::<S>(inputs)?;
            Ok(Output::Json(json!({ "loss": loss(&net, &t).to_json() })))
        }
        Command::Grad(inputs) => {
            let (net, t) = load_inputs::<S>(inputs)?;
            let mut out = gradient_to_json(&generalized_gradient(&net, &t, &tol));
            let smooth: Vec<Value> = differentiability_report(&net, &t, &tol)
                .entries
                .iter()
                .map(|(c, s)| json!({ "coordinate": c.to_string(), "smoothness": s.name() }))
                .collect();
            out["differentiability"] = Value::Array(smooth);
            Ok(Output::Json(out))
        }
        Command::Classify(inputs) => {
            let (net, t) = load_inputs::<S>(inputs)?;
            Ok(Output::Json(classification_to_json(&classify(&net, &t, &tol))))
        }
        Command::Construct { family, n, width, sigma, gamma, kind, menu, target } => {
            let t = match target {
                Some(path) => load_target::<S>(path)?,
                None => TargetSpec::identity(),
            };
            construct::<S>(*family, *n, *width, *sigma, gamma.as_deref(), kind, menu.as_deref(), &t)
        }
        Command::Verify { inputs, suite, radius, trials } => {
            let (net, t) = load_inputs::<S>(inputs)?;
            verify(&net, &t, *suite, *radius, *trials, cli.seed, &tol)
        }
        Command::Descend { inputs, sim, record_every, params } => {
            let (net, t) = load_inputs::<S>(inputs)?;
            let rec = run_gd(&net.to_f64(), &t.to_f64(), &sim_config(sim, cli.seed, *record_every))?;
            eprintln!(
                "{} after {} iterations: loss {:e}, gradient norm {:e}, terminal point {}",
                rec.status.name(),
                rec.iterations,
                rec.final_loss,
                rec.final_grad_norm,
                rec.terminal_classification.verdict
            );
            Ok(Output::Text(trajectory_csv(&rec, *params)))
        }
        Command::Sweep { target, inits, count, width, activation, gamma, scale, bin_tolerance, sim } => {
            let t = load_target::<S>(target)?.to_f64();
            let spec = match inits {
                Some(path) => {
                    let list = read_json(path)?;
                    let arr = list.as_array().ok_or_else(|| Failure::Validation("invalid `inits`: expected a JSON array".into()))?;
                    let nets = arr
                        .iter()
                        .enumerate()
                        .map(|(i, v)| parse_network::<f64>(v).map_err(|e| Failure::Validation(format!("inits[{i}]: {e}"))))
                        .collect::<Outcome<Vec<_>>>()?;
                    InitSpec::List(nets)
                }
                None => {
                    let act = match (activation, gamma) {
                        (ActivationKind::Relu, _) => Activation::Relu,
                        (ActivationKind::Quadratic, _) => Activation::Quadratic,
                        (ActivationKind::Leaky, Some(g)) => Activation::leaky(*g)?,
                        (ActivationKind::Leaky, None) => return Err(Failure::Validation("invalid `gamma`: required for leaky".into())),
                    };
                    InitSpec::Random { count: *count, width: *width, activation: act, scale: *scale }
                }
            };
            let summary = sweep(&spec, &t, &sim_config(sim, cli.seed, usize::MAX), *bin_tolerance)?;
            Ok(Output::Json(sweep_to_json(&summary)))
        }
        Command::Realize { inputs, grid } => {
            let (net, t) = load_inputs::<S>(inputs)?;
            Ok(Output::Text(realization_csv(&net, &t, *grid, &tol)?))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn construct<S: WireScalar>(
    family: Family,
    n: Option<usize>,
    width: Option<usize>,
    sigma: i8,
    gamma: Option<&str>,
    kind: &str,
    menu: Option<&str>,
    t: &TargetSpec<S>,
) -> Outcome<Output> {
    let need_n = || n.ok_or_else(|| Failure::Validation("invalid `n`: required for this family".into()));
    let need_gamma = || -> Outcome<S> {
        parse_scalar(gamma.ok_or_else(|| Failure::Validation("invalid `gamma`: required for leaky families".into()))?, "gamma")
    };
    let tokens = |default: &str, w: usize| -> Vec<String> {
        match menu {
            Some(m) => m.split(',').map(|s| s.trim().to_string()).collect(),
            None => vec![default.to_string(); w],
        }
    };
    let (net, family_json) = match family {
        Family::LocalMin => {
            let choices = tokens("inactive", width.unwrap_or(1));
            let menu = choices
                .iter()
                .map(|c| match c.as_str() {
                    "inactive" => Ok(MinNeuron::inactive()),
                    "left" => Ok(MinNeuron::left(t)),
                    "right" => Ok(MinNeuron::right(t)),
                    other => Err(Failure::Validation(format!("invalid `menu`: unknown choice {other:?}"))),
                })
                .collect::<Outcome<Vec<_>>>()?;
            (make_relu_local_min(width.unwrap_or(menu.len()), t, &menu)?, None)
        }
        Family::Saddle => {
            let n = need_n()?;
            let (net, spec) = make_relu_saddle_with_spec(width.unwrap_or(n), t, n, &MassSplit::unit(n))?;
            (net, Some(family_to_json(&spec)))
        }
        Family::TrivialSaddle => {
            let k = TrivialSaddleKind::parse(kind).ok_or_else(|| Failure::Validation(format!("invalid `kind`: unknown {kind:?}")))?;
            (make_relu_trivial_saddle(width.unwrap_or(1), t, k)?, None)
        }
        Family::LeakySaddle => {
            let n = need_n()?;
            let (net, spec) = make_leaky_saddle(width.unwrap_or(n), t, &need_gamma()?, n, sigma, &MassSplit::unit(n))?;
            (net, Some(family_to_json(&spec)))
        }
        Family::LeakyTrivialSaddle => (make_leaky_trivial_saddle(width.unwrap_or(1), t, &need_gamma()?)?, None),
        Family::QuadraticSaddle => {
            let choices = tokens("centered", width.unwrap_or(1));
            let menu = choices
                .iter()
                .map(|c| match c.as_str() {
                    "centered" => Ok(QuadNeuron::FlatCentered { w: S::one() }),
                    "bias" => Ok(QuadNeuron::ZeroSlope { b: S::one(), v: S::zero() }),
                    "outer" => Ok(QuadNeuron::ZeroSlope { b: S::zero(), v: S::one() }),
                    other => Err(Failure::Validation(format!("invalid `menu`: unknown choice {other:?}"))),
                })
                .collect::<Outcome<Vec<_>>>()?;
            (make_quadratic_saddle(width.unwrap_or(menu.len()), t, &menu)?, None)
        }
        Family::QuadraticGlobalMin => (make_quadratic_global_min(width.unwrap_or(2), t)?, None),
    };
    let mut out = network_to_json(&net);
    if let Some(f) = family_json {
        out["family"] = f;
    }
    Ok(Output::Json(out))
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn verify<S: WireScalar>(
    net: &NetworkParams<S>,
    t: &TargetSpec<S>,
    suite: Suite,
    radius: f64,
    trials: usize,
    seed: u64,
    tol: &Tolerances,
) -> Outcome<Output> {
    let (nf, tf) = (net.to_f64(), t.to_f64());
    let mut out = serde_json::Map::new();
    let wants = |s: Suite| suite == s || suite == Suite::All;

    if wants(Suite::Gradient) {
        let analytic = generalized_gradient(&nf, &tf, tol);
        let scale = analytic.sup_norm().max(1.0);
        let gap = |fd: shallow_landscape::GradientVector<f64>| {
            fd.to_vec().iter().zip(analytic.to_vec()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale
        };
        let central = gap(fd_gradient(&nf, &tf, 1e-6, FdSide::Central)?);
        let right = gap(fd_gradient(&nf, &tf, 1e-7, FdSide::Right)?);
        let closed = loss(&nf, &tf);
        let quad = quadrature_oracle(&nf, &tf, 16)?;
        out.insert(
            "gradient".into(),
            json!({
                "analytic": gradient_to_json(&analytic),
                "central_fd_gap": central,
                "right_fd_gap": right,
                "right_fd_agrees": right <= 1e-5,
                "loss": closed,
                "quadrature_loss": quad,
                "quadrature_gap": relative_gap(closed, quad),
            }),
        );
    }
    if wants(Suite::Hessian) {
        let value = match saddle_probe(net, t, tol) {
            Ok(p) => {
                let mut v = probe_to_json(&p);
                v["certified_min_eigenvalue"] = json!(p.certified_min_eigenvalue());
                v["block_certifies"] = json!(p.block_certifies());
                v
            }
            Err(e @ LandscapeError::Precondition(_)) => json!({ "applicable": false, "reason": e.to_string() }),
            Err(e) => return Err(e.into()),
        };
        out.insert("hessian".into(), value);
    }
    if wants(Suite::Escape) {
        let verdict = classify(&nf, &tf, tol).verdict;
        let value = if verdict == Verdict::NonGlobalLocalMinimum {
            let r0 = local_min_margin(&nf, &tf).unwrap_or(0.0);
            let found = if r0 > 0.0 { descent_direction_search(&nf, &tf, 0.99 * r0, trials, seed)? } else { None };
            json!({ "verdict": verdict.name(), "margin": r0, "radius": 0.99 * r0, "trials": trials,
                    "escape_found": found.is_some(), "witness": found.as_ref().map(witness_to_json) })
        } else {
            let found = descent_direction_search(&nf, &tf, radius, trials, seed)?;
            json!({ "verdict": verdict.name(), "radius": radius, "trials": trials,
                    "escape_found": found.is_some(), "witness": found.as_ref().map(witness_to_json) })
        };
        out.insert("escape".into(), value);
    }
    if wants(Suite::Identities) {
        let l = loss(net, t);
        let mut ids = serde_json::Map::new();
        if !t.alpha.is_zero() {
            let (p, pt) = transform_p(net, t)?;
            let rhs = t.alpha.clone() * t.alpha.clone() * loss(&p, &pt);
            ids.insert("p".into(), json!({ "lhs": l.to_json(), "rhs": rhs.to_json(), "gap": relative_gap(l.to_f64(), rhs.to_f64()) }));
            let canon = canonicalize(net, t)?;
            ids.insert("canonical".into(), network_to_json(&canon));
        }
        let (q, qt) = transform_q(net, t);
        let rhs = t.length() * loss(&q, &qt);
        ids.insert("q".into(), json!({ "lhs": l.to_json(), "rhs": rhs.to_json(), "gap": relative_gap(l.to_f64(), rhs.to_f64()) }));
        if matches!(net.activation, Activation::Leaky { .. }) {
            let dup = make_leaky_duplication(net)?;
            let rhs = loss(&dup, t);
            ids.insert(
                "duplication".into(),
                json!({ "lhs": l.to_json(), "rhs": rhs.to_json(), "gap": relative_gap(l.to_f64(), rhs.to_f64()) }),
            );
        }
        out.insert("identities".into(), Value::Object(ids));
    }
    if wants(Suite::Recurrence) {
        let value = match lemma_recurrence_check(&realize(net, t, tol), t, tol) {
            Ok(r) => recurrence_to_json(&r),
            Err(e @ LandscapeError::Precondition(_)) => json!({ "applicable": false, "reason": e.to_string() }),
            Err(e) => return Err(e.into()),
        };
        out.insert("recurrence".into(), value);
    }
    Ok(Output::Json(Value::Object(out)))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.mode {
        Mode::Float => run::<f64>(&cli),
        Mode::Rational => run::<Rational>(&cli),
    };
    let text = match result {
        Ok(Output::Json(v)) => format!("{}\n", serde_json::to_string_pretty(&v).expect("serializable")),
        Ok(Output::Text(s)) => s,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            return ExitCode::from(1);
        }
    };
    match &cli.out {
        Some(path) => {
            if let Err(e) = fs::write(path, text) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(1);
            }
        }
        None => print!("{text}"),
    }
    ExitCode::SUCCESS
}
