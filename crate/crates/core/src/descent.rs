//! Fixed-step descent along the right-hand generalized gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::classifier::{classify, predicted_loss_values, ClassificationResult, Verdict};
use crate::error::{LandscapeError, Result};
use crate::exactcalc::{generalized_gradient, loss};
use crate::model::{Activation, NetworkParams, TargetSpec};
use crate::scalar::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Step size `η`.
    pub step_size: f64,
    pub max_iters: usize,
    pub stop_grad_norm: f64,
    pub seed: u64,
    /// Keep every `record_every`-th iterate (the first and last are always kept).
    pub record_every: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { step_size: 0.2, max_iters: 1_000_000, stop_grad_norm: 1e-8, seed: 0, record_every: 1000 }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(LandscapeError::invalid("step_size", "must be positive"));
        }
        if !(self.stop_grad_norm >= 0.0) {
            return Err(LandscapeError::invalid("stop_grad_norm", "must be nonnegative"));
        }
        if self.record_every == 0 {
            return Err(LandscapeError::invalid("record_every", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    /// `‖G‖∞ ≤ stop_grad_norm`.
    Converged,
    MaxIters,
    /// Loss above `1e12` or not finite.
    Diverged,
}

impl RunStatus {
    pub fn name(self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::MaxIters => "max-iters",
            Self::Diverged => "diverged",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    /// `(iteration, parameters)` snapshots.
    pub iterates: Vec<(usize, NetworkParams<f64>)>,
    pub losses: Vec<f64>,
    pub grad_norms: Vec<f64>,
    pub status: RunStatus,
    pub iterations: usize,
    pub final_params: NetworkParams<f64>,
    pub final_loss: f64,
    pub final_grad_norm: f64,
    /// Classification of the last iterate with [`Tolerances::relaxed`].
    pub terminal_classification: ClassificationResult<f64>,
}

/// Loss and flattened gradient `[dw.., db.., dv.., dc]` of a piecewise-linear
/// network in `O(N log N)`, from prefix sums of the residual moments between
/// consecutive kinks. Returns `None` when a neuron has `w = b = 0`, whose
/// right-hand partials need the general routine.
fn fast_loss_grad(p: &NetworkParams<f64>, t: &TargetSpec<f64>, gamma: f64) -> Option<(f64, Vec<f64>)> {
    let n = p.width();
    let (t0, t1) = (t.t0, t.t1);
    if (0..n).any(|j| p.w[j] == 0.0 && p.b[j] == 0.0) {
        return None;
    }
    // Kinks strictly inside, with the neuron that owns each.
    let mut kinks: Vec<(f64, usize)> = (0..n)
        .filter(|&j| p.w[j] != 0.0)
        .map(|j| (-p.b[j] / p.w[j], j))
        .filter(|&(x, _)| x > t0 && x < t1)
        .collect();
    kinks.sort_by(|a, b| a.0.total_cmp(&b.0));
    let knots: Vec<f64> = std::iter::once(t0).chain(kinks.iter().map(|k| k.0)).chain(std::iter::once(t1)).collect();

    // Slope and intercept on the first segment.
    let probe = 0.5 * (knots[0] + knots[1]);
    let mut active: Vec<bool> = (0..n).map(|j| p.w[j] * probe + p.b[j] >= 0.0).collect();
    let weight = |on: bool| if on { 1.0 } else { gamma };
    let mut slope = -t.alpha;
    let mut icpt = p.c - t.beta;
    for j in 0..n {
        let s = p.v[j] * weight(active[j]);
        slope += s * p.w[j];
        icpt += s * p.b[j];
    }

    let segs = knots.len() - 1;
    let mut m0 = vec![0.0; segs + 1];
    let mut m1 = vec![0.0; segs + 1];
    let mut total = 0.0;
    for i in 0..segs {
        if i > 0 {
            let j = kinks[i - 1].1;
            let before = weight(active[j]);
            active[j] = !active[j];
            let delta = p.v[j] * (weight(active[j]) - before);
            slope += delta * p.w[j];
            icpt += delta * p.b[j];
        }
        let (a, b) = (knots[i], knots[i + 1]);
        let (d1, d2, d3) = (b - a, (b * b - a * a) / 2.0, (b * b * b - a * a * a) / 3.0);
        m0[i + 1] = m0[i] + slope * d2 + icpt * d1;
        m1[i + 1] = m1[i] + slope * d3 + icpt * d2;
        let (ra, rb) = (slope * a + icpt, slope * b + icpt);
        total += d1 * (ra * ra + ra * rb + rb * rb) / 3.0;
    }

    // Prefix moments up to the knot holding each kink.
    let mut pos = vec![usize::MAX; n];
    for (i, &(_, j)) in kinks.iter().enumerate() {
        pos[j] = i + 1;
    }
    let (all0, all1) = (m0[segs], m1[segs]);
    let mut grad = vec![0.0; 3 * n + 1];
    for j in 0..n {
        let (a0, a1) = if pos[j] != usize::MAX {
            let (l0, l1) = (m0[pos[j]], m1[pos[j]]);
            if p.w[j] > 0.0 {
                (all0 - l0, all1 - l1)
            } else {
                (l0, l1)
            }
        } else if p.w[j] * probe + p.b[j] >= 0.0 || (p.w[j] == 0.0 && p.b[j] > 0.0) {
            (all0, all1)
        } else {
            (0.0, 0.0)
        };
        let e0 = a0 + gamma * (all0 - a0);
        let e1 = a1 + gamma * (all1 - a1);
        grad[j] = 2.0 * p.v[j] * e1;
        grad[n + j] = 2.0 * p.v[j] * e0;
        grad[2 * n + j] = 2.0 * (p.w[j] * e1 + p.b[j] * e0);
    }
    grad[3 * n] = 2.0 * all0;
    Some((total, grad))
}

/// Loss and flattened generalized gradient, using the fast path when possible.
pub fn loss_and_gradient(p: &NetworkParams<f64>, t: &TargetSpec<f64>) -> (f64, Vec<f64>) {
    if let Some(gamma) = p.activation.negative_slope() {
        if let Some(out) = fast_loss_grad(p, t, gamma) {
            return out;
        }
    }
    (loss(p, t), generalized_gradient(p, t, &Tolerances::default()).to_vec())
}

/// Runs `φ ← φ - η G(φ)` from `start`.
pub fn run_gd(start: &NetworkParams<f64>, target: &TargetSpec<f64>, config: &SimConfig) -> Result<TrajectoryRecord> {
    config.validate()?;
    let mut x = start.to_vec();
    let mut iterates = Vec::new();
    let mut losses = Vec::new();
    let mut grad_norms = Vec::new();
    let mut status = RunStatus::MaxIters;
    let mut iter = 0;
    let (mut l, mut g, mut gn);
    loop {
        let p = start.with_vec(&x);
        (l, g) = loss_and_gradient(&p, target);
        gn = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let done = if !l.is_finite() || l > 1e12 || !gn.is_finite() {
            status = RunStatus::Diverged;
            true
        } else if gn <= config.stop_grad_norm {
            status = RunStatus::Converged;
            true
        } else {
            iter >= config.max_iters
        };
        if iter % config.record_every == 0 || done {
            iterates.push((iter, p));
            losses.push(l);
            grad_norms.push(gn);
        }
        if done {
            break;
        }
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi -= config.step_size * gi;
        }
        iter += 1;
    }
    let final_params = start.with_vec(&x);
    let terminal_classification = classify(&final_params, target, &Tolerances::relaxed());
    Ok(TrajectoryRecord {
        iterates,
        losses,
        grad_norms,
        status,
        iterations: iter,
        final_params,
        final_loss: l,
        final_grad_norm: gn,
        terminal_classification,
    })
}

/// Random start: `w, b ~ U(-1, 1)`, `v ~ U(-scale, scale)`, `c = 0`.
pub fn random_init(width: usize, activation: &Activation<f64>, scale: f64, seed: u64) -> Result<NetworkParams<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |s: f64, k: usize| -> Vec<f64> { (0..k).map(|_| rng.gen_range(-s..s)).collect() };
    let w = draw(1.0, width);
    let b = draw(1.0, width);
    let v = draw(scale, width);
    NetworkParams::new(w, b, v, 0.0, activation.clone())
}

/// How starting points of a sweep are produced.
#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    List(Vec<NetworkParams<f64>>),
    Random { count: usize, width: usize, activation: Activation<f64>, scale: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub index: usize,
    pub seed: u64,
    pub status: RunStatus,
    pub iterations: usize,
    pub final_loss: f64,
    pub final_grad_norm: f64,
    pub verdict: Verdict,
    /// Index into [`SweepSummary::ladder`] of the nearest predicted value.
    pub ladder_bin: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
    /// Possible critical-point losses for this activation and width.
    pub ladder: Vec<f64>,
    /// Converged runs whose final loss is within `bin_tolerance` of each ladder value.
    pub histogram: Vec<usize>,
    pub off_ladder: usize,
    pub bin_tolerance: f64,
}

/// Runs many trajectories in parallel; rows come back in input order.
///
/// Random starts use seed `config.seed + i` for run `i`.
pub fn sweep(inits: &InitSpec, target: &TargetSpec<f64>, config: &SimConfig, bin_tolerance: f64) -> Result<SweepSummary> {
    config.validate()?;
    let starts: Vec<(u64, NetworkParams<f64>)> = match inits {
        InitSpec::List(list) => list.iter().cloned().enumerate().map(|(i, p)| (config.seed + i as u64, p)).collect(),
        InitSpec::Random { count, width, activation, scale } => (0..*count)
            .map(|i| {
                let seed = config.seed + i as u64;
                random_init(*width, activation, *scale, seed).map(|p| (seed, p))
            })
            .collect::<Result<_>>()?,
    };
    let mut ladder = match starts.first() {
        Some((_, p)) => predicted_loss_values(&p.activation, target, starts.iter().map(|s| s.1.width()).max().unwrap_or(0)),
        None => Vec::new(),
    };
    ladder.sort_by(f64::total_cmp);
    ladder.dedup_by(|a, b| (*a - *b).abs() <= 1e-15);
    let rows: Vec<SweepRow> = starts
        .par_iter()
        .enumerate()
        .map(|(index, (seed, start))| {
            let rec = run_gd(start, target, &SimConfig { record_every: usize::MAX, ..*config })?;
            let ladder_bin = ladder
                .iter()
                .enumerate()
                .map(|(k, v)| (k, (v - rec.final_loss).abs()))
                .filter(|&(_, d)| d <= bin_tolerance)
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(k, _)| k);
            Ok(SweepRow {
                index,
                seed: *seed,
                status: rec.status,
                iterations: rec.iterations,
                final_loss: rec.final_loss,
                final_grad_norm: rec.final_grad_norm,
                verdict: rec.terminal_classification.verdict,
                ladder_bin,
            })
        })
        .collect::<Result<_>>()?;
    let mut histogram = vec![0; ladder.len()];
    let mut off_ladder = 0;
    for row in rows.iter().filter(|r| r.status == RunStatus::Converged) {
        match row.ladder_bin {
            Some(k) => histogram[k] += 1,
            None => off_ladder += 1,
        }
    }
    Ok(SweepSummary { rows, ladder, histogram, off_ladder, bin_tolerance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::*;

    #[test]
    fn fast_path_matches_closed_form() {
        let t = TargetSpec::new(-2.0, 3.0, -1.0, 2.0).unwrap();
        for (seed, act) in [(1, Activation::Relu), (2, Activation::Leaky { gamma: 0.1 })] {
            for k in 0..20 {
                let p = random_init(5, &act, 1.0, seed * 100 + k).unwrap();
                let (l, g) = fast_loss_grad(&p, &t, act.negative_slope().unwrap()).unwrap();
                assert!((l - loss(&p, &t)).abs() <= 1e-12 * l.max(1.0));
                let exact = generalized_gradient(&p, &t, &Tolerances::default()).to_vec();
                for (a, b) in g.iter().zip(&exact) {
                    assert!((a - b).abs() <= 1e-11 * b.abs().max(1.0), "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn stationary_start_does_not_move() {
        let t = TargetSpec::identity();
        let start = make_relu_local_min(2, &t, &[MinNeuron::inactive(), MinNeuron::left(&t)]).unwrap();
        let rec = run_gd(&start, &t, &SimConfig::default()).unwrap();
        assert_eq!(rec.iterations, 0);
        assert_eq!(rec.final_params, start);
        assert_eq!(rec.status, RunStatus::Converged);
        assert_eq!(rec.terminal_classification.verdict, Verdict::NonGlobalLocalMinimum);
    }

    #[test]
    fn determinism_and_divergence() {
        let t = TargetSpec::identity();
        let start = random_init(3, &Activation::Relu, 0.5, 9).unwrap();
        let cfg = SimConfig { max_iters: 2000, record_every: 100, ..SimConfig::default() };
        assert_eq!(run_gd(&start, &t, &cfg).unwrap(), run_gd(&start, &t, &cfg).unwrap());
        let wild = SimConfig { step_size: 50.0, max_iters: 1000, ..cfg };
        assert_eq!(run_gd(&start, &t, &wild).unwrap().status, RunStatus::Diverged);
        assert!(run_gd(&start, &t, &SimConfig { step_size: 0.0, ..cfg }).is_err());
    }

    #[test]
    fn empty_sweep() {
        let s = sweep(&InitSpec::List(vec![]), &TargetSpec::identity(), &SimConfig::default(), 1e-3).unwrap();
        assert!(s.rows.is_empty() && s.ladder.is_empty());
    }
}
