//! Independent checks of the closed-form machinery: adaptive quadrature,
//! finite differences, Hessian probes at saddles, a search for nearby points
//! of lower loss, and the segment recurrences of critical realizations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::classifier::{classify, Verdict};
use crate::construct::{canonicalize, decanonicalize, SaddleFamilySpec};
use crate::error::{LandscapeError, Result};
use crate::exactcalc::{differentiability_report, generalized_gradient, loss, restricted_hessian, Coord, GradientVector};
use crate::model::{Activation, NetworkParams, PiecewiseForm, TargetSpec};
use crate::poly::Poly;
use crate::scalar::{Rational, Scalar, Tolerances};
use crate::taxonomy::{classify_neurons, Endpoint, NeuronKind};

// ---------------------------------------------------------------- quadrature

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    for i in 0..order {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = order as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

struct Rule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Rule {
    fn apply(&self, f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        half * self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(mid + half * x)).sum::<f64>()
    }

    fn adaptive(&self, f: &impl Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let left = self.apply(f, a, m);
        let right = self.apply(f, m, b);
        let err = (left + right - whole).abs();
        if depth == 0 || err <= tol || err <= 16.0 * f64::EPSILON * (left.abs() + right.abs()) {
            return left + right;
        }
        self.adaptive(f, a, m, left, 0.5 * tol, depth - 1) + self.adaptive(f, m, b, right, 0.5 * tol, depth - 1)
    }
}

/// Loss by adaptive Gauss–Legendre quadrature of the directly evaluated network.
///
/// The interval is cut into `subdivisions` equal pieces, further cut at every
/// neuron breakpoint, and each piece is refined until an order-8 rule agrees
/// with its two halves.
pub fn quadrature_oracle(params: &NetworkParams<f64>, target: &TargetSpec<f64>, subdivisions: usize) -> Result<f64> {
    if subdivisions == 0 {
        return Err(LandscapeError::invalid("subdivisions", "must be at least 1"));
    }
    let (nodes, weights) = gauss_legendre(8);
    let rule = Rule { nodes, weights };
    let f = |x: f64| {
        let r = params.eval_direct(&x) - target.eval(&x);
        r * r
    };
    let (t0, t1) = (target.t0, target.t1);
    let h = (t1 - t0) / subdivisions as f64;
    let mut cuts: Vec<f64> = (0..subdivisions).map(|i| t0 + i as f64 * h).collect();
    cuts.extend(params.w.iter().zip(&params.b).filter(|(w, _)| **w != 0.0).map(|(w, b)| -b / w).filter(|&q| q > t0 && q < t1));
    cuts.push(t1);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let pieces: Vec<(f64, f64, f64)> = cuts.windows(2).map(|ab| (ab[0], ab[1], rule.apply(&f, ab[0], ab[1]))).collect();
    let rough: f64 = pieces.iter().map(|p| p.2).sum();
    let tol = 1e-13 * rough.abs().max(f64::MIN_POSITIVE) / pieces.len() as f64;
    Ok(f64::sum_all(pieces.into_iter().map(|(a, b, est)| rule.adaptive(&f, a, b, est, tol, 48))))
}

// ------------------------------------------------------- finite differences

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdSide {
    Right,
    Central,
}

/// Finite-difference gradient of the closed-form float loss.
pub fn fd_gradient(params: &NetworkParams<f64>, target: &TargetSpec<f64>, step: f64, side: FdSide) -> Result<GradientVector<f64>> {
    if !(step > 0.0) {
        return Err(LandscapeError::invalid("step", "must be positive"));
    }
    let base = params.to_vec();
    let at = |k: usize, h: f64| {
        let mut x = base.clone();
        x[k] += h;
        loss(&params.with_vec(&x), target)
    };
    let l0 = loss(params, target);
    let flat: Vec<f64> = (0..base.len())
        .map(|k| match side {
            FdSide::Right => (at(k, step) - l0) / step,
            FdSide::Central => (at(k, step) - at(k, -step)) / (2.0 * step),
        })
        .collect();
    let n = params.width();
    Ok(GradientVector {
        dw: flat[..n].to_vec(),
        db: flat[n..2 * n].to_vec(),
        dv: flat[2 * n..3 * n].to_vec(),
        dc: flat[3 * n],
    })
}

// ------------------------------------------------------------ saddle probe

/// Restricted-Hessian certificate at a saddle with kinks.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianProbeResult {
    /// Coordinates of the block whose determinant certifies the saddle.
    pub coordinates: Vec<Coord>,
    pub determinant: f64,
    pub eigenvalues: Vec<f64>,
    pub min_eigenvalue: f64,
    /// `Γ = u₂ᵀA⁻¹u₂/μ` of the two-coordinate tail, where the block has one.
    pub gamma_factor: Option<f64>,
    pub mu: Option<f64>,
    pub lambdas: Vec<f64>,
    /// Factor `κ` with `det H < 0` iff `κ Σλ < 1` (for ReLU `κ = 4n(1-Γ)`).
    pub criterion: Option<f64>,
    /// Every coordinate in which the loss is twice continuously differentiable.
    pub full_coordinates: Vec<Coord>,
    pub full_min_eigenvalue: f64,
    /// Unit eigenvector of `full_min_eigenvalue`, in `full_coordinates` order.
    pub full_min_eigenvector: Vec<f64>,
}

impl HessianProbeResult {
    /// Negative curvature shown by the probe. The selected block is a
    /// sub-block of the smooth block, so by interlacing the latter is never larger.
    pub fn certified_min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue.min(self.full_min_eigenvalue)
    }

    /// `true` when the selected block alone has a negative determinant.
    pub fn block_certifies(&self) -> bool {
        self.determinant < 0.0
    }
}

fn determinant<S: Scalar>(matrix: &[Vec<S>]) -> S {
    let k = matrix.len();
    let mut m = matrix.to_vec();
    let mut det = S::one();
    for col in 0..k {
        let pivot = (col..k)
            .filter(|&r| !m[r][col].is_zero())
            .max_by(|&a, &b| m[a][col].to_f64().abs().total_cmp(&m[b][col].to_f64().abs()));
        let Some(p) = pivot else {
            return S::zero();
        };
        if p != col {
            m.swap(p, col);
            det = -det;
        }
        let d = m[col][col].clone();
        det = det * d.clone();
        for r in col + 1..k {
            let factor = m[r][col].clone() / d.clone();
            if factor.is_zero() {
                continue;
            }
            for c in col..k {
                let delta = factor.clone() * m[col][c].clone();
                m[r][c] = m[r][c].clone() - delta;
            }
        }
    }
    det
}

/// `u ᵀ A⁻¹ u` for a symmetric 2×2 block.
fn quad_form_inverse(a: &[[f64; 2]; 2], u: [f64; 2]) -> f64 {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    (a[1][1] * u[0] * u[0] - 2.0 * a[0][1] * u[0] * u[1] + a[0][0] * u[1] * u[1]) / det
}

struct Selection {
    coords: Vec<Coord>,
    lambdas: Vec<f64>,
    /// `(μ, u₂)` when the block ends in `(v_k, c)`.
    tail: Option<(f64, [f64; 2])>,
    mu: f64,
    criterion: Box<dyn Fn(Option<f64>) -> f64>,
}

/// Members of each kink of the canonical network, by family breakpoint.
fn kink_members(canon: &NetworkParams<f64>, spec: &SaddleFamilySpec<f64>, tol: &Tolerances) -> Vec<Vec<usize>> {
    let unit = TargetSpec::identity();
    let reports = classify_neurons(canon, &unit, tol);
    spec.breakpoints
        .iter()
        .map(|q| {
            reports
                .iter()
                .filter(|r| r.kind == NeuronKind::Type2Active)
                .filter(|r| r.breakpoint.is_some_and(|t| (t - q).abs() <= 1e-8))
                .map(|r| r.index)
                .collect()
        })
        .collect()
}

fn pick(members: &[usize], canon: &NetworkParams<f64>, lead_sign: f64) -> Result<(usize, Vec<usize>)> {
    let lead = members
        .iter()
        .copied()
        .find(|&j| canon.v[j] * lead_sign > 0.0)
        .ok_or_else(|| LandscapeError::Precondition("no neuron with the required outer-weight sign at the first kink".into()))?;
    let rest = members.iter().copied().filter(|&j| canon.v[j] * lead_sign < 0.0).collect();
    Ok((lead, rest))
}

fn select(canon: &NetworkParams<f64>, spec: &SaddleFamilySpec<f64>, tol: &Tolerances) -> Result<Selection> {
    let groups = kink_members(canon, spec, tol);
    let n = spec.n;
    let vw = |j: usize| canon.v[j] * canon.w[j];
    match (&canon.activation, spec.sigma) {
        (Activation::Relu, _) => {
            let (j1, rest) = pick(&groups[0], canon, 1.0)?;
            let k = groups[1][0];
            let nf = n as f64;
            let mu = (nf + 1.0) / (2.0 * nf);
            let mut coords = vec![Coord::B(j1)];
            coords.extend(rest.iter().map(|&j| Coord::B(j)));
            let lambdas = std::iter::once(j1).chain(rest.iter().copied()).map(|j| (nf + 1.0) / 2.0 * vw(j)).collect();
            coords.extend([Coord::V(k), Coord::C]);
            let u2 = [-canon.w[k] / (4.0 * nf * nf * mu), 1.0];
            Ok(Selection {
                coords,
                lambdas,
                tail: Some((mu, u2)),
                mu,
                criterion: Box::new(move |g| 4.0 * nf * (1.0 - g.expect("ReLU blocks have a tail"))),
            })
        }
        (Activation::Leaky { gamma }, Some(sigma)) => {
            let g = *gamma;
            let delta = spec.delta.expect("leaky families carry delta");
            if n == 1 {
                let members = &groups[0];
                let (j1, rest) = pick(members, canon, sigma as f64)?;
                let a = spec.slope_sums[0];
                let mut coords = vec![Coord::B(j1)];
                coords.extend(rest.iter().map(|&j| Coord::B(j)));
                coords.push(Coord::V(j1));
                let lambdas = std::iter::once(j1).chain(rest.iter().copied()).map(|j| vw(j) / a).collect();
                let rg = g.sqrt();
                let mu = 0.5 / (rg * (1.0 - rg + g));
                let kappa = 0.5 * ((1.0 + rg) / (1.0 - rg)).powi(2);
                Ok(Selection { coords, lambdas, tail: None, mu, criterion: Box::new(move |_| kappa) })
            } else if n == 2 && sigma == -1 {
                let (j1, rest) = pick(&groups[0], canon, -1.0)?;
                let a = spec.slope_sums[0];
                let q1 = spec.breakpoints[0];
                let mut coords = vec![Coord::W(j1)];
                coords.extend(rest.iter().map(|&j| Coord::W(j)));
                let lambdas = std::iter::once(j1).chain(rest.iter().copied()).map(|j| vw(j) / a).collect();
                let mu = 1.5 / (q1.powi(3) + g * g - g * g * q1.powi(3));
                let kappa = a * delta * delta / (mu * (1.0 - g).powi(2) * q1 * q1);
                Ok(Selection { coords, lambdas, tail: None, mu, criterion: Box::new(move |_| kappa) })
            } else {
                let tau = if sigma == 1 { 1 } else { 2 };
                let (j1, rest) = pick(&groups[tau - 1], canon, 1.0)?;
                let k = groups[tau][0];
                let a = spec.slope_sums[tau - 1];
                let (qt, qn) = (spec.breakpoints[tau - 1], spec.breakpoints[tau]);
                let mu = 0.5 / (1.0 - (1.0 - g * g) * qt);
                let wk = canon.w[k];
                let u2 = [
                    mu * wk * (g * (1.0 - 2.0 * qn) - (1.0 - g) * (qn - qt).powi(2)),
                    mu * 2.0 * (1.0 - (1.0 - g) * qt),
                ];
                let mut coords = vec![Coord::B(j1)];
                coords.extend(rest.iter().map(|&j| Coord::B(j)));
                let lambdas = std::iter::once(j1).chain(rest.iter().copied()).map(|j| vw(j) / a).collect();
                coords.extend([Coord::V(k), Coord::C]);
                let scale = a / mu * (delta / (1.0 - g)).powi(2);
                Ok(Selection {
                    coords,
                    lambdas,
                    tail: Some((mu, u2)),
                    mu,
                    criterion: Box::new(move |gm| scale * (1.0 - gm.expect("block has a tail"))),
                })
            }
        }
        _ => Err(LandscapeError::Precondition("the probe needs a ReLU or leaky ReLU saddle with kinks".into())),
    }
}

/// Hessian of the loss on every twice continuously differentiable coordinate,
/// with its smallest eigenpair.
pub fn smooth_block_min_eigen<S: Scalar>(params: &NetworkParams<S>, target: &TargetSpec<S>, tol: &Tolerances) -> Result<(Vec<Coord>, f64, Vec<f64>)> {
    let coords: Vec<Coord> = differentiability_report(params, target, tol)
        .entries
        .into_iter()
        .filter(|(_, s)| s.twice_differentiable())
        .map(|(c, _)| c)
        .collect();
    let block = restricted_hessian(params, target, &coords, tol)?;
    let eig = nalgebra::SymmetricEigen::new(block.to_f64());
    let (idx, &min) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("block is non-empty");
    let vec = eig.eigenvectors.column(idx).iter().copied().collect();
    Ok((coords, min, vec))
}

/// Hessian certificate at a saddle with type-2-active neurons.
///
/// The block is chosen on the canonical network (target `x` on `[0, 1]`),
/// where `Γ`, `μ` and the `λ_i` are defined; determinant and eigenvalues are
/// those of the same coordinates for the network as given.
pub fn saddle_probe<S: Scalar>(params: &NetworkParams<S>, target: &TargetSpec<S>, tol: &Tolerances) -> Result<HessianProbeResult> {
    let reports = classify_neurons(params, target, tol);
    if !reports.iter().any(|r| r.kind == NeuronKind::Type2Active) {
        return Err(LandscapeError::Precondition("no type-2-active neuron".into()));
    }
    let canon = canonicalize(params, target)?;
    let unit = TargetSpec::<S>::identity();
    let cls = classify(&canon.to_f64(), &unit.to_f64(), tol);
    let (Verdict::Saddle, Some(spec)) = (cls.verdict, cls.family.as_ref()) else {
        return Err(LandscapeError::Precondition(format!("not a saddle with kinks (verdict {})", cls.verdict)));
    };
    let sel = select(&canon.to_f64(), spec, tol)?;

    let gamma_factor = match sel.tail {
        Some((mu, u2)) => {
            let h = restricted_hessian(&canon, &unit, &sel.coords, tol)?.to_f64();
            let k = sel.coords.len();
            let a = [[h[(k - 2, k - 2)], h[(k - 2, k - 1)]], [h[(k - 1, k - 2)], h[(k - 1, k - 1)]]];
            Some(quad_form_inverse(&a, u2) / mu)
        }
        None => None,
    };
    let block = restricted_hessian(params, target, &sel.coords, tol)?;
    let eigenvalues = block.eigenvalues();
    let (full_coordinates, full_min_eigenvalue, full_min_eigenvector) = smooth_block_min_eigen(params, target, tol)?;
    Ok(HessianProbeResult {
        coordinates: sel.coords.clone(),
        determinant: determinant(&block.matrix).to_f64(),
        min_eigenvalue: eigenvalues[0],
        eigenvalues,
        gamma_factor,
        mu: Some(sel.mu),
        criterion: Some((sel.criterion)(gamma_factor)),
        lambdas: sel.lambdas,
        full_coordinates,
        full_min_eigenvalue,
        full_min_eigenvector,
    })
}

/// `(32n² - 21n + 3) / (16n(2n - 1))`.
pub fn relu_gamma_factor(n: usize) -> f64 {
    let n = n as f64;
    (32.0 * n * n - 21.0 * n + 3.0) / (16.0 * n * (2.0 * n - 1.0))
}

// ------------------------------------------------------------ escape search

/// A nearby point of strictly lower loss.
#[derive(Debug, Clone, PartialEq)]
pub struct EscapeWitness {
    pub point: NetworkParams<f64>,
    /// `point - φ` in `[w.., b.., v.., c]` order.
    pub direction: Vec<f64>,
    /// Exact loss decrease, rounded.
    pub loss_drop: f64,
    pub method: String,
}

fn exact_loss(params: &NetworkParams<f64>, target: &TargetSpec<f64>) -> Rational {
    let to_q = |x: &f64| Rational::from_f64(*x).expect("finite parameters");
    loss(&params.map(to_q), &target.map(to_q))
}

fn distance(a: &NetworkParams<f64>, b: &NetworkParams<f64>) -> f64 {
    a.to_vec().iter().zip(b.to_vec()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn alpha_sign(target: &TargetSpec<f64>) -> f64 {
    if target.alpha < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Points on the explicit escape curves at parameter `s`.
fn curve_points(params: &NetworkParams<f64>, target: &TargetSpec<f64>, s: f64, tol: &Tolerances) -> Vec<(String, NetworkParams<f64>)> {
    let mut out = Vec::new();
    let reports = classify_neurons(params, target, tol);
    match &params.activation {
        Activation::Quadratic => {
            let sa = alpha_sign(target);
            let (t0, t1) = (target.t0, target.t1);
            let mid = 0.5 * (t0 + t1);
            let mean = |w: f64, b: f64, v: f64| v * (w * w * (t0 * t0 + t0 * t1 + t1 * t1) / 3.0 + w * b * (t0 + t1) + b * b);
            for j in 0..params.width() {
                let (w, b, v) = (params.w[j], params.b[j], params.v[j]);
                let zero = |x: f64| x.abs() <= tol.structural * (w.abs() + b.abs()).max(1.0);
                let moved = if zero(v) && !zero(w) {
                    Some(("quadratic flat kink shift", w, b - s * w, -sa * s * s))
                } else if !zero(v) && zero(w) {
                    Some(("quadratic zero-slope tilt", s, -mid * s + sa * v.signum() * s * s, v))
                } else if zero(v) && zero(w) && (b + s).abs() > 0.0 {
                    let bs = b + s;
                    Some(("quadratic flat zero-slope", s * bs, bs, sa * s.powi(3) / (bs * bs)))
                } else {
                    None
                };
                if let Some((name, ws, bs, vs)) = moved {
                    let mut p = params.clone();
                    p.w[j] = ws;
                    p.b[j] = bs;
                    p.v[j] = vs;
                    p.c = params.c + mean(w, b, v) - mean(ws, bs, vs);
                    out.push((format!("{name} (neuron {j})"), p));
                }
            }
        }
        act => {
            let Ok(canon) = canonicalize(params, target) else {
                return out;
            };
            let leaky = matches!(act, Activation::Leaky { .. });
            for rep in &reports {
                let j = rep.index;
                let v = canon.v[j];
                let mut curves: Vec<(&str, f64, f64, f64)> = Vec::new();
                let w = canon.w[j];
                let left = ("left endpoint curve", w - s, -s * (w - s), v - s);
                let right = ("right endpoint curve", w + s, -(1.0 - s) * (w + s), v + s);
                match rep.kind {
                    NeuronKind::Degenerate if leaky => {
                        let tau = if v >= 0.0 { 1.0 } else { -1.0 };
                        curves.push(("degenerate curve", tau * s, -tau * s * s, v + tau * s));
                    }
                    NeuronKind::Degenerate => {
                        if v <= 0.0 {
                            curves.push(left);
                        }
                        if v >= 0.0 {
                            curves.push(right);
                        }
                    }
                    NeuronKind::SemiInactive if !leaky && rep.touches == Some(Endpoint::Left) && v <= 0.0 => curves.push(left),
                    NeuronKind::SemiInactive if !leaky && rep.touches == Some(Endpoint::Right) && v >= 0.0 => curves.push(right),
                    _ => {}
                }
                for (name, ws, bs, vs) in curves {
                    let mut p = canon.clone();
                    p.w[j] = ws;
                    p.b[j] = bs;
                    p.v[j] = vs;
                    out.push((format!("{name} (neuron {j})"), decanonicalize(&p, target)));
                }
            }
        }
    }
    out
}

/// Directions worth trying before random sampling: the negative gradient and
/// the lowest-curvature direction of the smooth block.
fn special_directions(params: &NetworkParams<f64>, target: &TargetSpec<f64>, tol: &Tolerances) -> Vec<(String, Vec<f64>)> {
    let mut out = Vec::new();
    let grad = generalized_gradient(params, target, tol).to_vec();
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > 0.0 {
        out.push(("negative gradient".to_string(), grad.iter().map(|g| -g / norm).collect()));
    }
    if let Ok((coords, min, vec)) = smooth_block_min_eigen(params, target, tol) {
        if min < 0.0 {
            let width = params.width();
            let mut dir = vec![0.0; 3 * width + 1];
            for (c, x) in coords.iter().zip(&vec) {
                dir[c.flat_index(width)] = *x;
            }
            out.push(("negative curvature".to_string(), dir.clone()));
            out.push(("negative curvature (reversed)".to_string(), dir.iter().map(|x| -x).collect()));
        }
    }
    out
}

/// Looks for a point within `radius` of `φ` with strictly lower loss.
///
/// Explicit escape curves and special directions are tried at radii
/// `radius·2^-k` first, then `trials` uniform samples from the ball. A
/// candidate counts only if its exact rational loss (of the rounded
/// parameters) is below that of `φ` by more than `1e-14·max(1, L)`.
pub fn descent_direction_search(
    params: &NetworkParams<f64>,
    target: &TargetSpec<f64>,
    radius: f64,
    trials: usize,
    seed: u64,
) -> Result<Option<EscapeWitness>> {
    if !(radius > 0.0) {
        return Err(LandscapeError::invalid("radius", "must be positive"));
    }
    if trials == 0 {
        return Err(LandscapeError::invalid("trials", "must be at least 1"));
    }
    let tol = Tolerances::default();
    let base_exact = exact_loss(params, target);
    if num_traits::Zero::is_zero(&base_exact) {
        return Ok(None);
    }
    let base_f = loss(params, target);
    let margin = 1e-14 * base_f.abs().max(1.0);
    let confirm = |cand: &NetworkParams<f64>, method: &str| -> Option<EscapeWitness> {
        if distance(cand, params) > radius || !(loss(cand, target) < base_f) {
            return None;
        }
        let drop = (base_exact.clone() - exact_loss(cand, target)).to_f64();
        (drop > margin).then(|| EscapeWitness {
            point: cand.clone(),
            direction: cand.to_vec().iter().zip(params.to_vec()).map(|(a, b)| a - b).collect(),
            loss_drop: drop,
            method: method.to_string(),
        })
    };

    let dirs = special_directions(params, target, &tol);
    let base_vec = params.to_vec();
    for k in 0..48 {
        let s = radius * 0.5f64.powi(k);
        for (name, cand) in curve_points(params, target, s, &tol) {
            if let Some(found) = confirm(&cand, &name) {
                return Ok(Some(found));
            }
        }
        for (name, dir) in &dirs {
            let x: Vec<f64> = base_vec.iter().zip(dir).map(|(a, d)| a + s * d).collect();
            if let Some(found) = confirm(&params.with_vec(&x), name) {
                return Ok(Some(found));
            }
        }
    }

    let dim = base_vec.len();
    let found = (0..trials).into_par_iter().find_map_first(|trial| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial as u64);
        let mut dir: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        let len = radius * rng.gen::<f64>().powf(1.0 / dim as f64) / norm;
        dir.iter_mut().for_each(|d| *d *= len);
        let x: Vec<f64> = base_vec.iter().zip(&dir).map(|(a, d)| a + d).collect();
        let cand = params.with_vec(&x);
        if loss(&cand, target) < base_f - margin {
            confirm(&cand, "random sample")
        } else {
            None
        }
    });
    Ok(found)
}

/// Radius of a ball around a non-global local minimum inside which no point
/// has lower loss: inactive neurons stay inactive, semi-inactive ones can
/// only switch on within a quarter interval of their endpoint, with their
/// original outer-weight sign, and the bias stays within `|α|(t1-t0)/4` of
/// its centered value.
pub fn local_min_margin(params: &NetworkParams<f64>, target: &TargetSpec<f64>) -> Option<f64> {
    let tol = Tolerances::default();
    if classify(params, target, &tol).verdict != Verdict::NonGlobalLocalMinimum {
        return None;
    }
    let (t0, t1) = (target.t0, target.t1);
    let quarter = 0.25 * (t1 - t0);
    let dist = |w: f64, b: f64, x: f64| (w * x + b).abs() / (1.0 + x * x).sqrt();
    let mut r = f64::INFINITY;
    let mut semi = false;
    for rep in classify_neurons(params, target, &tol) {
        let (w, b, v) = (params.w[rep.index], params.b[rep.index], params.v[rep.index]);
        match (rep.kind, rep.touches) {
            (NeuronKind::Inactive, _) => r = r.min(dist(w, b, t0)).min(dist(w, b, t1)),
            (NeuronKind::SemiInactive, Some(side)) => {
                semi = true;
                let x = if side == Endpoint::Left { t0 + quarter } else { t1 - quarter };
                r = r.min(dist(w, b, x)).min(w.abs()).min(v.abs());
            }
            _ => return None,
        }
    }
    if semi {
        r = r.min(target.alpha.abs() * quarter);
    }
    Some(r)
}

// ------------------------------------------------------ segment recurrences

/// Segment-wise identities satisfied by a piecewise affine realization whose
/// residual has zero mean on every piece between consecutive kinks.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceReport {
    /// Kinks of the roughest partition, endpoints included.
    pub knots: Vec<f64>,
    pub segment_means: Vec<f64>,
    pub segment_means_vanish: bool,
    /// `A_i - α = (-1)^i (q₁-q₀)/(q_{i+1}-q_i) (A₀ - α)`.
    pub slope_recurrence: Option<bool>,
    /// `B_i - β = (-1)^{i+1} (q_i+q_{i+1})/2 · (q₁-q₀)/(q_{i+1}-q_i) (A₀ - α)`.
    pub intercept_recurrence: Option<bool>,
    /// `sign(A_i - α) = (-1)^i sign(A₀ - α)`.
    pub sign_alternation: Option<bool>,
    /// `∫ x r = (q₁-q₀)/12 · (A₀-α) · Σ (-1)^i (q_{i+1}-q_i)²`.
    pub moment_identity: Option<bool>,
    pub first_moment: f64,
    pub first_moment_vanishes: bool,
    /// `Σ (-1)^{i+1} (q_{i+1}-q_i)²`.
    pub alternating_sum: f64,
    /// When the first moment vanishes: the realization equals the target or
    /// the alternating sum vanishes, and a single piece forces the target.
    pub vanishing_moment_consequences: Option<bool>,
    pub equals_target: bool,
}

/// Merges adjacent pieces carrying the same polynomial.
fn roughest<S: Scalar>(form: &PiecewiseForm<S>, tol: &Tolerances) -> PiecewiseForm<S> {
    let mut knots = vec![form.knots[0].clone()];
    let mut segments: Vec<Poly<S>> = Vec::new();
    for (i, seg) in form.segments.iter().enumerate() {
        match segments.last() {
            Some(prev) if prev.approx_eq(seg, seg.magnitude().max(1.0), tol.structural) => {
                *knots.last_mut().expect("non-empty") = form.knots[i + 1].clone();
            }
            _ => {
                segments.push(seg.clone());
                knots.push(form.knots[i + 1].clone());
            }
        }
    }
    PiecewiseForm { knots, segments }
}

/// Checks the segment recurrences for the realization `form` of a critical point.
pub fn lemma_recurrence_check<S: Scalar>(form: &PiecewiseForm<S>, target: &TargetSpec<S>, tol: &Tolerances) -> Result<RecurrenceReport> {
    if form.segments.iter().any(|s| s.degree() > 1) {
        return Err(LandscapeError::invalid("form", "segments must be affine"));
    }
    let form = roughest(form, tol);
    let res = form.minus_poly(&target.as_poly());
    let q = &res.knots;
    let scale = target.alpha.to_f64().abs().max(target.beta.to_f64().abs()) * target.location_scale().powi(2);
    let zero = |x: &S, s: f64| x.is_negligible(s * scale, tol.structural);
    let one = Poly::constant(S::one());
    let means: Vec<S> = (0..res.segments.len()).map(|i| res.integrate_against(&one, &q[i], &q[i + 1])).collect();
    let means_vanish = means.iter().all(|m| zero(m, 1.0));
    let first_moment = res.integrate_against(&Poly::monomial(1), res.start(), res.end());
    let first_moment_vanishes = zero(&first_moment, 1.0);
    let len = |i: usize| q[i + 1].clone() - q[i].clone();
    let alt = S::sum_all((0..res.segments.len()).map(|i| {
        let d = len(i);
        let sq = d.clone() * d;
        if i % 2 == 0 {
            -sq
        } else {
            sq
        }
    }));
    let equals_target = res.segments.iter().all(|s| zero(&s.coeff(1), 1.0) && zero(&s.coeff(0), 1.0));

    let mut report = RecurrenceReport {
        knots: q.iter().map(Scalar::to_f64).collect(),
        segment_means: means.iter().map(Scalar::to_f64).collect(),
        segment_means_vanish: means_vanish,
        slope_recurrence: None,
        intercept_recurrence: None,
        sign_alternation: None,
        moment_identity: None,
        first_moment: first_moment.to_f64(),
        first_moment_vanishes,
        alternating_sum: alt.to_f64(),
        vanishing_moment_consequences: None,
        equals_target,
    };
    if !means_vanish {
        return Ok(report);
    }
    let a0 = res.segments[0].coeff(1);
    let d0 = len(0);
    let mut slopes = true;
    let mut intercepts = true;
    let mut signs = true;
    let s0 = a0.sign_tol(scale, tol.structural);
    for (i, seg) in res.segments.iter().enumerate() {
        let sign = if i % 2 == 0 { S::one() } else { -S::one() };
        let ratio = d0.clone() / len(i);
        let want_a = sign.clone() * ratio.clone() * a0.clone();
        let want_b = -sign * (q[i].clone() + q[i + 1].clone()) * S::half() * ratio * a0.clone();
        slopes &= zero(&(seg.coeff(1) - want_a), 1.0);
        intercepts &= zero(&(seg.coeff(0) - want_b), 1.0);
        let si = seg.coeff(1).sign_tol(scale, tol.structural);
        signs &= si == if i % 2 == 0 { s0 } else { -s0 };
    }
    let predicted_moment = d0 / S::from_int(12) * a0 * -alt.clone();
    report.slope_recurrence = Some(slopes);
    report.intercept_recurrence = Some(intercepts);
    report.sign_alternation = Some(signs);
    report.moment_identity = Some(zero(&(first_moment - predicted_moment), 1.0));
    if first_moment_vanishes {
        let single = res.segments.len() > 1 || equals_target;
        report.vanishing_moment_consequences = Some((equals_target || zero(&alt, 1.0)) && single);
    }
    Ok(report)
}
