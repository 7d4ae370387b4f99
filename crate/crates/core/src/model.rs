//! Network parameters, affine targets, and the realization function as an
//! explicit piecewise polynomial on the target interval.

use crate::error::{LandscapeError, Result};
use crate::poly::Poly;
use crate::scalar::{Scalar, Tolerances};

#[derive(Debug, Clone, PartialEq)]
pub enum Activation<S> {
    Relu,
    /// `x ↦ max(x, γx)` with `0 < γ < 1`.
    Leaky { gamma: S },
    Quadratic,
}

impl<S: Scalar> Activation<S> {
    pub fn leaky(gamma: S) -> Result<Self> {
        if gamma > S::zero() && gamma < S::one() {
            Ok(Self::Leaky { gamma })
        } else {
            Err(LandscapeError::invalid("activation.gamma", format!("{gamma} is not in (0, 1)")))
        }
    }

    pub fn apply(&self, z: &S) -> S {
        match self {
            Self::Relu => {
                if *z >= S::zero() {
                    z.clone()
                } else {
                    S::zero()
                }
            }
            Self::Leaky { gamma } => {
                if *z >= S::zero() {
                    z.clone()
                } else {
                    gamma.clone() * z.clone()
                }
            }
            Self::Quadratic => z.clone() * z.clone(),
        }
    }

    /// Slope of the activation on the negative half-line (`None` for quadratic).
    pub fn negative_slope(&self) -> Option<S> {
        match self {
            Self::Relu => Some(S::zero()),
            Self::Leaky { gamma } => Some(gamma.clone()),
            Self::Quadratic => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Relu => "relu",
            Self::Leaky { .. } => "leaky",
            Self::Quadratic => "quadratic",
        }
    }

    pub fn is_piecewise_linear(&self) -> bool {
        !matches!(self, Self::Quadratic)
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Activation<T> {
        match self {
            Self::Relu => Activation::Relu,
            Self::Leaky { gamma } => Activation::Leaky { gamma: f(gamma) },
            Self::Quadratic => Activation::Quadratic,
        }
    }
}

/// Affine target `x ↦ αx + β` on `[t0, t1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpec<S> {
    pub alpha: S,
    pub beta: S,
    pub t0: S,
    pub t1: S,
}

impl<S: Scalar> TargetSpec<S> {
    pub fn new(alpha: S, beta: S, t0: S, t1: S) -> Result<Self> {
        for (name, value) in [("alpha", &alpha), ("beta", &beta), ("t0", &t0), ("t1", &t1)] {
            if !value.to_f64().is_finite() {
                return Err(LandscapeError::invalid(name, "not finite"));
            }
        }
        if t0 >= t1 {
            return Err(LandscapeError::invalid("t1", format!("need t0 < t1, got t0 = {t0}, t1 = {t1}")));
        }
        Ok(Self { alpha, beta, t0, t1 })
    }

    /// The identity on `[0, 1]`.
    pub fn identity() -> Self {
        Self { alpha: S::one(), beta: S::zero(), t0: S::zero(), t1: S::one() }
    }

    pub fn from_f64(alpha: f64, beta: f64, t0: f64, t1: f64) -> Result<Self> {
        let conv = |name: &str, x: f64| S::from_f64(x).ok_or_else(|| LandscapeError::invalid(name, "not finite"));
        Self::new(conv("alpha", alpha)?, conv("beta", beta)?, conv("t0", t0)?, conv("t1", t1)?)
    }

    pub fn eval(&self, x: &S) -> S {
        self.alpha.clone() * x.clone() + self.beta.clone()
    }

    pub fn as_poly(&self) -> Poly<S> {
        Poly::linear(self.alpha.clone(), self.beta.clone())
    }

    pub fn length(&self) -> S {
        self.t1.clone() - self.t0.clone()
    }

    pub fn midpoint(&self) -> S {
        (self.t0.clone() + self.t1.clone()) * S::half()
    }

    /// Best constant approximation `α(t0 + t1)/2 + β` of the target.
    pub fn centered_constant(&self) -> S {
        self.alpha.clone() * self.midpoint() + self.beta.clone()
    }

    /// Magnitude of the interval endpoints, used to scale location tolerances.
    pub fn location_scale(&self) -> f64 {
        self.t0.to_f64().abs().max(self.t1.to_f64().abs()).max(1.0)
    }

    pub fn contains(&self, x: &S) -> bool {
        *x >= self.t0 && *x <= self.t1
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> TargetSpec<T> {
        TargetSpec { alpha: f(&self.alpha), beta: f(&self.beta), t0: f(&self.t0), t1: f(&self.t1) }
    }

    pub fn to_f64(&self) -> TargetSpec<f64> {
        self.map(|x| x.to_f64())
    }
}

/// Parameters `φ = (w, b, v, c)` of a network with `N` hidden neurons.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams<S> {
    pub w: Vec<S>,
    pub b: Vec<S>,
    pub v: Vec<S>,
    pub c: S,
    pub activation: Activation<S>,
}

impl<S: Scalar> NetworkParams<S> {
    pub fn new(w: Vec<S>, b: Vec<S>, v: Vec<S>, c: S, activation: Activation<S>) -> Result<Self> {
        if w.is_empty() {
            return Err(LandscapeError::invalid("w", "a network needs at least one hidden neuron"));
        }
        if b.len() != w.len() {
            return Err(LandscapeError::invalid("b", format!("length {} differs from len(w) = {}", b.len(), w.len())));
        }
        if v.len() != w.len() {
            return Err(LandscapeError::invalid("v", format!("length {} differs from len(w) = {}", v.len(), w.len())));
        }
        for (name, values) in [("w", &w), ("b", &b), ("v", &v)] {
            if let Some(j) = values.iter().position(|x| !x.to_f64().is_finite()) {
                return Err(LandscapeError::invalid(format!("{name}[{j}]"), "not finite"));
            }
        }
        if !c.to_f64().is_finite() {
            return Err(LandscapeError::invalid("c", "not finite"));
        }
        if let Activation::Leaky { gamma } = &activation {
            Activation::leaky(gamma.clone())?;
        }
        Ok(Self { w, b, v, c, activation })
    }

    pub fn relu(w: Vec<S>, b: Vec<S>, v: Vec<S>, c: S) -> Result<Self> {
        Self::new(w, b, v, c, Activation::Relu)
    }

    pub fn width(&self) -> usize {
        self.w.len()
    }

    /// Pre-activation `w_j x + b_j`.
    pub fn preactivation(&self, j: usize, x: &S) -> S {
        self.w[j].clone() * x.clone() + self.b[j].clone()
    }

    /// Direct summation `c + Σ v_j act(w_j x + b_j)`.
    pub fn eval_direct(&self, x: &S) -> S {
        let terms = (0..self.width()).map(|j| self.v[j].clone() * self.activation.apply(&self.preactivation(j, x)));
        self.c.clone() + S::sum_all(terms)
    }

    /// Breakpoint `-b_j / w_j`, present iff `w_j ≠ 0` exactly.
    pub fn breakpoint(&self, j: usize) -> Option<S> {
        (!self.w[j].is_zero()).then(|| -self.b[j].clone() / self.w[j].clone())
    }

    /// Coordinates flattened as `[w.., b.., v.., c]`.
    pub fn to_vec(&self) -> Vec<S> {
        let mut out = Vec::with_capacity(3 * self.width() + 1);
        out.extend(self.w.iter().cloned());
        out.extend(self.b.iter().cloned());
        out.extend(self.v.iter().cloned());
        out.push(self.c.clone());
        out
    }

    /// Inverse of [`NetworkParams::to_vec`] keeping this network's activation.
    pub fn with_vec(&self, coords: &[S]) -> Self {
        let n = self.width();
        assert_eq!(coords.len(), 3 * n + 1, "coordinate vector has the wrong length");
        Self {
            w: coords[..n].to_vec(),
            b: coords[n..2 * n].to_vec(),
            v: coords[2 * n..3 * n].to_vec(),
            c: coords[3 * n].clone(),
            activation: self.activation.clone(),
        }
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> NetworkParams<T> {
        NetworkParams {
            w: self.w.iter().map(&f).collect(),
            b: self.b.iter().map(&f).collect(),
            v: self.v.iter().map(&f).collect(),
            c: f(&self.c),
            activation: self.activation.map(&f),
        }
    }

    pub fn to_f64(&self) -> NetworkParams<f64> {
        self.map(|x| x.to_f64())
    }
}

/// Continuous piecewise polynomial on `[knots[0], knots[last]]`.
///
/// `segments[i]` is valid on `[knots[i], knots[i + 1]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseForm<S> {
    pub knots: Vec<S>,
    pub segments: Vec<Poly<S>>,
}

impl<S: Scalar> PiecewiseForm<S> {
    pub fn single(t0: S, t1: S, poly: Poly<S>) -> Self {
        Self { knots: vec![t0, t1], segments: vec![poly] }
    }

    pub fn start(&self) -> &S {
        &self.knots[0]
    }

    pub fn end(&self) -> &S {
        self.knots.last().expect("a form has at least two knots")
    }

    /// Interior knots, i.e. all knots except the two endpoints.
    pub fn interior_knots(&self) -> &[S] {
        &self.knots[1..self.knots.len() - 1]
    }

    /// Index of the segment containing `x` (the left one at interior knots).
    pub fn segment_index(&self, x: &S) -> Option<usize> {
        if *x < self.knots[0] || x > self.end() {
            return None;
        }
        let idx = self.knots[1..].partition_point(|k| k < x);
        Some(idx.min(self.segments.len() - 1))
    }

    pub fn evaluate(&self, x: &S) -> Result<S> {
        match self.segment_index(x) {
            Some(i) => Ok(self.segments[i].eval(x)),
            None => Err(LandscapeError::Domain { x: x.to_f64(), t0: self.start().to_f64(), t1: self.end().to_f64() }),
        }
    }

    /// Subtracts the same polynomial from every segment.
    pub fn minus_poly(&self, p: &Poly<S>) -> Self {
        Self { knots: self.knots.clone(), segments: self.segments.iter().map(|s| s - p).collect() }
    }

    /// `∫_lo^hi weight(x) · self(x) dx`, with `[lo, hi]` clipped to the form's domain.
    pub fn integrate_against(&self, weight: &Poly<S>, lo: &S, hi: &S) -> S {
        let terms = self.segments.iter().enumerate().filter_map(|(i, seg)| {
            let a = S::max_of(self.knots[i].clone(), lo.clone());
            let b = S::min_of(self.knots[i + 1].clone(), hi.clone());
            (a < b).then(|| (weight * seg).integrate(&a, &b))
        });
        S::sum_all(terms)
    }

    /// `∫ self(x)^2 dx` over the whole domain.
    pub fn integrate_square(&self) -> S {
        let terms = self
            .segments
            .iter()
            .enumerate()
            .map(|(i, seg)| (seg * seg).integrate(&self.knots[i], &self.knots[i + 1]));
        S::sum_all(terms)
    }

    /// Largest mismatch between adjacent segments at interior knots.
    pub fn continuity_defect(&self) -> f64 {
        (1..self.segments.len())
            .map(|i| (self.segments[i - 1].eval(&self.knots[i]) - self.segments[i].eval(&self.knots[i])).to_f64().abs())
            .fold(0.0, f64::max)
    }
}

/// Sorted, deduplicated interior breakpoints of non-flat neurons.
pub fn interior_breakpoints<S: Scalar>(params: &NetworkParams<S>, target: &TargetSpec<S>, tol: &Tolerances) -> Vec<S> {
    let mut points: Vec<S> = (0..params.width())
        .filter(|&j| !params.v[j].is_zero())
        .filter_map(|j| params.breakpoint(j))
        .filter(|t| *t > target.t0 && *t < target.t1)
        .collect();
    points.sort_by(|a, b| a.partial_cmp(b).expect("breakpoints are finite"));
    let merge_scale = target.length().to_f64();
    let mut out: Vec<S> = Vec::with_capacity(points.len());
    for t in points {
        match out.last() {
            Some(prev) if (t.clone() - prev.clone()).is_negligible(merge_scale, tol.knot) && !S::EXACT => {}
            Some(prev) if *prev == t => {}
            _ => out.push(t),
        }
    }
    out
}

/// Exact piecewise-polynomial representation of the realization on `[t0, t1]`.
pub fn realize<S: Scalar>(params: &NetworkParams<S>, target: &TargetSpec<S>, tol: &Tolerances) -> PiecewiseForm<S> {
    if let Activation::Quadratic = params.activation {
        let mut poly = Poly::constant(params.c.clone());
        for j in 0..params.width() {
            let lin = Poly::linear(params.w[j].clone(), params.b[j].clone());
            poly = &poly + &(&lin * &lin).scale(&params.v[j]);
        }
        return PiecewiseForm::single(target.t0.clone(), target.t1.clone(), poly);
    }
    let negative_slope = params.activation.negative_slope().expect("piecewise-linear activation");
    let mut knots = Vec::with_capacity(params.width() + 2);
    knots.push(target.t0.clone());
    knots.extend(interior_breakpoints(params, target, tol));
    knots.push(target.t1.clone());
    let segments = knots
        .windows(2)
        .map(|pair| {
            let mid = (pair[0].clone() + pair[1].clone()) * S::half();
            let mut slope = S::zero();
            let mut intercept = params.c.clone();
            for j in 0..params.width() {
                if params.v[j].is_zero() {
                    continue;
                }
                let gain = if params.preactivation(j, &mid) >= S::zero() {
                    params.v[j].clone()
                } else {
                    params.v[j].clone() * negative_slope.clone()
                };
                slope = slope + gain.clone() * params.w[j].clone();
                intercept = intercept + gain * params.b[j].clone();
            }
            Poly::linear(slope, intercept)
        })
        .collect();
    PiecewiseForm { knots, segments }
}

/// Residual `f_φ - (αx + β)` as a piecewise polynomial.
pub fn residual<S: Scalar>(params: &NetworkParams<S>, target: &TargetSpec<S>, tol: &Tolerances) -> PiecewiseForm<S> {
    realize(params, target, tol).minus_poly(&target.as_poly())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn r(p: i64, q: i64) -> Rational {
        Rational::ratio(p, q)
    }

    fn n2_saddle() -> NetworkParams<Rational> {
        NetworkParams::relu(
            vec![r(1, 1), r(-1, 1)],
            vec![r(-1, 3), r(2, 3)],
            vec![r(2, 3), r(-2, 3)],
            r(1, 2),
        )
        .unwrap()
    }

    #[test]
    fn identity_network_is_single_segment() {
        let net = NetworkParams::relu(vec![1.0], vec![0.0], vec![1.0], 0.0).unwrap();
        let form = realize(&net, &TargetSpec::identity(), &Tolerances::default());
        assert_eq!(form.knots, vec![0.0, 1.0]);
        assert_eq!(form.segments[0].coeffs, vec![0.0, 1.0]);
        assert_eq!(form.evaluate(&0.5).unwrap(), 0.5);
    }

    #[test]
    fn saddle_n2_realization_matches_hand_values() {
        let form = realize(&n2_saddle(), &TargetSpec::identity(), &Tolerances::default());
        assert_eq!(form.knots, vec![r(0, 1), r(1, 3), r(2, 3), r(1, 1)]);
        let slopes: Vec<_> = form.segments.iter().map(|s| s.coeff(1)).collect();
        assert_eq!(slopes, vec![r(2, 3), r(4, 3), r(2, 3)]);
        assert_eq!(form.evaluate(&r(0, 1)).unwrap(), r(1, 18));
        assert_eq!(form.evaluate(&r(1, 2)).unwrap(), r(1, 2));
        assert_eq!(form.continuity_defect(), 0.0);
    }

    #[test]
    fn quadratic_realization() {
        let net = NetworkParams::new(vec![1.0], vec![0.0], vec![1.0], 0.0, Activation::Quadratic).unwrap();
        let form = realize(&net, &TargetSpec::identity(), &Tolerances::default());
        assert_eq!(form.segments.len(), 1);
        assert_eq!(form.evaluate(&0.5).unwrap(), 0.25);
    }

    #[test]
    fn evaluate_rejects_points_outside() {
        let form = realize(&n2_saddle().to_f64(), &TargetSpec::identity(), &Tolerances::default());
        assert!(matches!(form.evaluate(&1.5), Err(LandscapeError::Domain { .. })));
        assert!(form.evaluate(&-0.1).is_err());
    }

    #[test]
    fn flat_neurons_add_no_knots_and_duplicates_merge() {
        let net = NetworkParams::relu(vec![1.0, 3.0, 2.0], vec![-0.5, -1.5, -0.4], vec![1.0, 2.0, 0.0], 0.0).unwrap();
        let form = realize(&net, &TargetSpec::identity(), &Tolerances::default());
        assert_eq!(form.knots, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn constructor_validates_lengths_and_gamma() {
        assert!(NetworkParams::relu(vec![1.0], vec![], vec![1.0], 0.0).is_err());
        assert!(NetworkParams::<f64>::relu(vec![], vec![], vec![], 0.0).is_err());
        assert!(NetworkParams::new(vec![1.0], vec![0.0], vec![1.0], 0.0, Activation::Leaky { gamma: 1.0 }).is_err());
        assert!(NetworkParams::relu(vec![f64::NAN], vec![0.0], vec![1.0], 0.0).is_err());
        assert!(TargetSpec::new(1.0, 0.0, 1.0, 1.0).is_err());
    }
}
