//! Curves in S^n = SO(n+1)/SO(n) via horizontal lifts: the lifting
//! algorithm built on R_{p,q}, the K-action on Q-representations, the
//! orbit-distance functional F and its gradient, gradient descent over K
//! with multistart (plus a dense 1-D fast path for K = SO(2)), and
//! geodesics/distances in AC([0,1], S^n).

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::lie_group::{
    self, conjugate, efficient_rotation, group_exp, group_log, group_log_strict, AlgebraElement,
    LieGroupError, RotationMatrix, SubalgebraBasis,
};
use crate::scalar::Scalar;
use crate::srv_core::{self, l2_distance, q_map, SrvError, SrvPair};
use crate::srv_core::GroupCurve;

#[derive(Debug, Error)]
pub enum HomogeneousError {
    #[error("sample {0} is not a unit vector")]
    NotUnit(usize),
    #[error("adjacent samples {0},{1} are antipodal")]
    AdjacentAntipodal(usize, usize),
    #[error("curves live on different grids: {0} vs {1} intervals")]
    GridMismatch(usize, usize),
    #[error(transparent)]
    Lie(#[from] LieGroupError),
    #[error(transparent)]
    Srv(#[from] SrvError),
}

pub type Result<V> = std::result::Result<V, HomogeneousError>;

/// Discretized curve β in S^n on the uniform grid t_i = i/T.
#[derive(Debug, Clone)]
pub struct SphereCurve<T: Scalar> {
    samples: Vec<DVector<T>>,
}

impl<T: Scalar> SphereCurve<T> {
    /// Validates unit norms (1e-10) and rejects antipodal adjacent samples.
    pub fn new(samples: Vec<DVector<T>>) -> Result<Self> {
        assert!(samples.len() >= 2, "a curve needs at least two samples");
        let tol = T::of_f64(1e-10).max(T::default_epsilon() * T::of_f64(5e5));
        for (i, s) in samples.iter().enumerate() {
            if (s.norm() - T::one()).abs() > tol {
                return Err(HomogeneousError::NotUnit(i));
            }
        }
        for i in 0..samples.len() - 1 {
            if T::one() + samples[i].dot(&samples[i + 1]) <= T::of_f64(1e-12) {
                return Err(HomogeneousError::AdjacentAntipodal(i, i + 1));
            }
        }
        Ok(Self { samples })
    }

    /// Normalizes each sample before validating.
    pub fn from_points(points: Vec<DVector<T>>) -> Result<Self> {
        let samples = points.into_iter().map(|p| {
            let n = p.norm();
            p / n
        });
        Self::new(samples.collect())
    }

    pub fn samples(&self) -> &[DVector<T>] {
        &self.samples
    }

    pub fn num_intervals(&self) -> usize {
        self.samples.len() - 1
    }

    /// Ambient dimension n+1.
    pub fn ambient_dim(&self) -> usize {
        self.samples[0].len()
    }

    /// Piecewise-geodesic (slerp) evaluation at t ∈ [0,1].
    pub fn evaluate(&self, t: T) -> DVector<T> {
        let n = self.num_intervals();
        let x = (t.clamp(T::zero(), T::one()) * T::of_usize(n)).as_f64();
        let k = (x.floor() as usize).min(n - 1);
        let s = T::of_f64(x - k as f64);
        slerp(&self.samples[k], &self.samples[k + 1], s)
    }

    /// Resamples along β∘γ on the same grid.
    pub fn reparametrized(&self, gamma: &crate::alignment::Reparametrization<T>) -> Result<Self> {
        let n = self.num_intervals();
        let samples = (0..=n)
            .map(|i| self.evaluate(gamma.eval(T::of_usize(i) / T::of_usize(n))))
            .collect();
        Self::new(samples)
    }

    /// Applies a rigid motion g ∈ SO(n+1) pointwise.
    pub fn rotated(&self, g: &RotationMatrix<T>) -> Self {
        Self { samples: self.samples.iter().map(|s| g.apply(s)).collect() }
    }
}

/// Great-circle interpolation between non-antipodal unit vectors.
pub fn slerp<T: Scalar>(p: &DVector<T>, q: &DVector<T>, s: T) -> DVector<T> {
    let cos = p.dot(q).clamp(-T::one(), T::one());
    let omega = cos.acos();
    if omega < T::of_f64(1e-9) {
        let v = p * (T::one() - s) + q * s;
        let n = v.norm();
        return v / n;
    }
    let sin = omega.sin();
    p * (((T::one() - s) * omega).sin() / sin) + q * ((s * omega).sin() / sin)
}

/// Gradient-descent settings for the minimization over K.
#[derive(Debug, Clone)]
pub struct OptimizerConfig<T: Scalar> {
    /// Initial step size ε.
    pub step: T,
    /// Stop when ‖∇F‖ falls below this.
    pub grad_tol: T,
    pub max_iters: usize,
    /// Number of initializations y ∈ K.
    pub multistarts: usize,
    /// Seed for the random multistart draws (dim > 3).
    pub seed: u64,
    /// Solve K = SO(2) by dense 1-D sampling plus local refinement
    /// instead of gradient descent, when applicable.
    pub so2_fast_path: bool,
    /// Predecessor window for the reparametrization DP.
    pub dp_window: usize,
}

impl<T: Scalar> Default for OptimizerConfig<T> {
    fn default() -> Self {
        Self {
            step: T::of_f64(0.1),
            grad_tol: T::of_f64(1e-8),
            max_iters: 1000,
            multistarts: 8,
            seed: 0,
            so2_fast_path: true,
            dp_window: 4,
        }
    }
}

/// North pole (0, …, 0, 1).
pub fn north_pole<T: Scalar>(dim: usize) -> DVector<T> {
    let mut n = DVector::zeros(dim);
    n[dim - 1] = T::one();
    n
}

/// Quotient map π(α) = α·n applied samplewise.
pub fn project_pi<T: Scalar>(alpha: &GroupCurve<T>) -> Result<SphereCurve<T>> {
    let n = north_pole(alpha.dim());
    SphereCurve::from_points(alpha.samples().iter().map(|a| a.apply(&n)).collect())
}

/// Lift of an initial point: R_{n,β(0)}, or the explicit
/// diag(−1, I_{n−1}, −1) matrix at the antipode of n.
pub fn lift_initial<T: Scalar>(b0: &DVector<T>) -> RotationMatrix<T> {
    let dim = b0.len();
    let n = north_pole(dim);
    match efficient_rotation(&n, b0) {
        Ok(r) => r,
        Err(LieGroupError::AntipodalPoints) => {
            let mut m = nalgebra::DMatrix::<T>::identity(dim, dim);
            m[(0, 0)] = -T::one();
            m[(dim - 1, dim - 1)] = -T::one();
            RotationMatrix::from_rotation_unchecked(m)
        }
        Err(e) => unreachable!("efficient_rotation on unit vectors: {e}"),
    }
}

/// Horizontal lift: α(0) = lift_initial(β(0)), α_{i+1} = R_{β_i, β_{i+1}} α_i.
/// Satisfies π(α_i) = β_i and discrete horizontality by construction.
pub fn horizontal_lift<T: Scalar>(beta: &SphereCurve<T>) -> Result<GroupCurve<T>> {
    horizontal_lift_from(beta, lift_initial(&beta.samples[0]))
}

/// Horizontal lift with a caller-chosen initial lift α₀ (π(α₀) = β(0)).
pub fn horizontal_lift_from<T: Scalar>(
    beta: &SphereCurve<T>,
    alpha0: RotationMatrix<T>,
) -> Result<GroupCurve<T>> {
    let mut samples = Vec::with_capacity(beta.samples.len());
    samples.push(alpha0);
    for i in 0..beta.num_intervals() {
        let r = efficient_rotation(&beta.samples[i], &beta.samples[i + 1])?;
        let mut next = r.compose(&samples[i]);
        if (i + 1) % 100 == 0 {
            next = next.renormalized();
        }
        samples.push(next);
    }
    Ok(GroupCurve::new(samples))
}

/// Horizontal SRV representation of a sphere curve.
pub fn lift_to_srv<T: Scalar>(
    beta: &SphereCurve<T>,
    basis: &SubalgebraBasis<T>,
) -> Result<SrvPair<T>> {
    let alpha = horizontal_lift(beta)?;
    Ok(q_map(&alpha)?.into_horizontal(basis)?)
}

/// Right K-action on the Q-representation: (α₀, q) ∗ y = (α₀y, y⁻¹qy).
pub fn k_action<T: Scalar>(pair: &SrvPair<T>, y: &RotationMatrix<T>) -> Result<SrvPair<T>> {
    y.check_in_k()?;
    let q = pair
        .q
        .iter()
        .map(|qk| conjugate(y, qk))
        .collect::<lie_group::Result<Vec<_>>>()?;
    Ok(SrvPair { start: pair.start.compose(y), q, horizontal: pair.horizontal })
}

/// F(y) = d²(α₁(0), α₂(0)y) + ‖q₁ − y⁻¹q₂y‖².
pub fn f_value<T: Scalar>(p1: &SrvPair<T>, p2: &SrvPair<T>, y: &RotationMatrix<T>) -> Result<T> {
    let moved = k_action(p2, y)?;
    let d0 = lie_group::geodesic_distance(&p1.start, &moved.start)?;
    let dq = l2_distance(&p1.q, &moved.q)?;
    Ok(d0 * d0 + dq * dq)
}

/// ∇_I F = 2 Proj_𝔨(−Log(α₂(0)⁻¹α₁(0)) + ∫(q₁q₂ᵗ − q₂ᵗq₁)dt),
/// with the integral discretized as a Riemann sum. `include_start_term`
/// drops the Log term for the rigid-motion quotients where only the
/// q-term is minimized.
pub fn f_gradient<T: Scalar>(
    p1: &SrvPair<T>,
    p2: &SrvPair<T>,
    basis: &SubalgebraBasis<T>,
    include_start_term: bool,
) -> Result<AlgebraElement<T>> {
    if p1.num_intervals() != p2.num_intervals() {
        return Err(HomogeneousError::GridMismatch(p1.num_intervals(), p2.num_intervals()));
    }
    let dim = p1.dim();
    let dt = T::one() / T::of_usize(p1.num_intervals().max(1));
    let mut acc = nalgebra::DMatrix::<T>::zeros(dim, dim);
    for (q1, q2) in p1.q.iter().zip(&p2.q) {
        let m1 = q1.matrix();
        let m2 = q2.matrix();
        acc += (m1 * m2.transpose() - m2.transpose() * m1) * dt;
    }
    let mut total = AlgebraElement::from_matrix(acc);
    if include_start_term {
        let rel = p2.start.inverse().compose(&p1.start);
        let log = group_log(&rel)?;
        if log.ambiguous {
            return Err(HomogeneousError::Lie(LieGroupError::AngleAmbiguity));
        }
        total = &total - &log.value;
    }
    Ok(lie_group::proj_k(&total, basis).scale(T::of_f64(2.0)))
}

/// Outcome of the minimization over K.
#[derive(Debug, Clone)]
pub struct KMinimum<T: Scalar> {
    pub y: RotationMatrix<T>,
    pub f: T,
    /// False when every start exhausted max_iters with ‖∇F‖ ≥ grad_tol.
    pub converged: bool,
}

/// Minimizes F over K by multistart gradient descent with backtracking;
/// for K = SO(2) and horizontal data an exact dense 1-D search is used
/// instead when `cfg.so2_fast_path` is set.
pub fn minimize_over_k<T: Scalar>(
    p1: &SrvPair<T>,
    p2: &SrvPair<T>,
    cfg: &OptimizerConfig<T>,
) -> Result<KMinimum<T>> {
    minimize_over_k_impl(p1, p2, cfg, true, &[])
}

/// Variant minimizing only ‖q₁ − y⁻¹q₂y‖² (rigid-motion quotients).
pub fn minimize_over_k_q_only<T: Scalar>(
    p1: &SrvPair<T>,
    p2: &SrvPair<T>,
    cfg: &OptimizerConfig<T>,
) -> Result<KMinimum<T>> {
    minimize_over_k_impl(p1, p2, cfg, false, &[])
}

pub(crate) fn minimize_over_k_impl<T: Scalar>(
    p1: &SrvPair<T>,
    p2: &SrvPair<T>,
    cfg: &OptimizerConfig<T>,
    include_start_term: bool,
    extra_inits: &[RotationMatrix<T>],
) -> Result<KMinimum<T>> {
    if p1.num_intervals() != p2.num_intervals() {
        return Err(HomogeneousError::GridMismatch(p1.num_intervals(), p2.num_intervals()));
    }
    let dim = p1.dim();
    if dim == 3 && cfg.so2_fast_path && p1.horizontal && p2.horizontal {
        return minimize_over_so2_dense(p1, p2, include_start_term, extra_inits);
    }
    let basis = SubalgebraBasis::standard(dim);
    let mut starts: Vec<RotationMatrix<T>> = extra_inits.to_vec();
    starts.push(RotationMatrix::identity(dim));
    if dim == 3 {
        // uniformly spaced in SO(2)
        let e = AlgebraElement::basis_element(3, 0, 1);
        for j in 1..cfg.multistarts {
            let theta = T::of_f64(2.0) * T::pi() * T::of_usize(j) / T::of_usize(cfg.multistarts);
            starts.push(group_exp(&e.scale(theta)));
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for _ in 1..cfg.multistarts {
            starts.push(random_k_element(&mut rng, &basis));
        }
    }

    let mut best: Option<KMinimum<T>> = None;
    for y0 in starts {
        let run = match descend_from(p1, p2, &y0, cfg, include_start_term, &basis) {
            Ok(r) => r,
            Err(HomogeneousError::Lie(LieGroupError::AngleAmbiguity)) => {
                // start lands on the cut locus of the Log term; retry
                // from a slightly perturbed initialization
                let nudge = group_exp(&basis.k_basis[0].scale(T::of_f64(1e-3)));
                descend_from(p1, p2, &y0.compose(&nudge), cfg, include_start_term, &basis)?
            }
            Err(e) => return Err(e),
        };
        best = Some(match best {
            Some(b) if b.f <= run.f => b,
            _ => run,
        });
    }
    Ok(best.expect("at least one start"))
}

fn descend_from<T: Scalar>(
    p1: &SrvPair<T>,
    p2: &SrvPair<T>,
    y0: &RotationMatrix<T>,
    cfg: &OptimizerConfig<T>,
    include_start_term: bool,
    basis: &SubalgebraBasis<T>,
) -> Result<KMinimum<T>> {
    let f_of = |pair: &SrvPair<T>| -> Result<T> {
        let dq = l2_distance(&p1.q, &pair.q)?;
        if include_start_term {
            let d0 = lie_group::geodesic_distance(&p1.start, &pair.start)?;
            Ok(d0 * d0 + dq * dq)
        } else {
            Ok(dq * dq)
        }
    };
    let mut y_acc = y0.clone();
    let mut current = k_action(p2, &y_acc)?;
    let mut f_cur = f_of(&current)?;
    let mut eps = cfg.step;
    let mut converged = false;
    for _ in 0..cfg.max_iters {
        let grad = f_gradient(p1, &current, basis, include_start_term)?;
        if grad.norm() < cfg.grad_tol {
            converged = true;
            break;
        }
        // backtracking: halve ε until F decreases
        let mut accepted = false;
        for _ in 0..60 {
            let y_step = group_exp(&grad.scale(-eps));
            let trial = k_action(&current, &y_step)?;
            let f_trial = f_of(&trial)?;
            if f_trial < f_cur {
                y_acc = y_acc.compose(&y_step);
                current = trial;
                f_cur = f_trial;
                eps = (eps * T::of_f64(1.5)).min(cfg.step * T::of_f64(10.0));
                accepted = true;
                break;
            }
            eps *= T::of_f64(0.5);
        }
        if !accepted {
            // step underflow: gradient is numerically a descent-free point
            converged = grad.norm() < cfg.grad_tol * T::of_f64(1e3);
            break;
        }
    }
    Ok(KMinimum { y: y_acc, f: f_cur, converged })
}

fn random_k_element<T: Scalar>(
    rng: &mut impl Rng,
    basis: &SubalgebraBasis<T>,
) -> RotationMatrix<T> {
    let dim = basis.dim();
    let mut v = AlgebraElement::zeros(dim);
    for e in &basis.k_basis {
        v = &v + &e.scale(T::of_f64(rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)));
    }
    group_exp(&v)
}

// ---- K = SO(2) dense fast path --------------------------------------------
//
// For horizontal pairs in so(3), q_k is determined by the 2-vector
// w_k = (q_k[0,2], q_k[1,2]) with ‖q_k‖² = 2|w_k|², and conjugation by
// y(θ) ∈ SO(2) rotates w_k by −θ. Both terms of F therefore reduce to
// closed trigonometric forms of θ, which a dense sweep plus golden-section
// refinement minimizes to machine precision.

pub(crate) fn so2_components<T: Scalar>(q: &[AlgebraElement<T>]) -> Vec<[T; 2]> {
    q.iter().map(|qk| [qk.matrix()[(0, 2)], qk.matrix()[(1, 2)]]).collect()
}

pub(crate) fn so2_element<T: Scalar>(theta: T) -> RotationMatrix<T> {
    group_exp(&AlgebraElement::basis_element(3, 0, 1).scale(theta))
}

struct So2Objective<T: Scalar> {
    // q cross-correlations: Σ w1·w2 and Σ (w1 × w2)
    c: T,
    s: T,
    p: T,
    dt: T,
    // start-term trace coefficients
    start: Option<(T, T, T)>,
}

impl<T: Scalar> So2Objective<T> {
    fn new(p1: &SrvPair<T>, p2: &SrvPair<T>, include_start_term: bool) -> Self {
        let w1 = so2_components(&p1.q);
        let w2 = so2_components(&p2.q);
        let mut c = T::zero();
        let mut s = T::zero();
        let mut p = T::zero();
        for (a, b) in w1.iter().zip(&w2) {
            c += a[0] * b[0] + a[1] * b[1];
            s += a[0] * b[1] - a[1] * b[0];
            p += a[0] * a[0] + a[1] * a[1] + b[0] * b[0] + b[1] * b[1];
        }
        let dt = T::one() / T::of_usize(p1.q.len().max(1));
        let start = include_start_term.then(|| {
            let a = p2.start.inverse().compose(&p1.start);
            let m = a.matrix();
            (m[(0, 0)] + m[(1, 1)], m[(0, 1)] - m[(1, 0)], m[(2, 2)])
        });
        Self { c, s, p, dt, start }
    }

    fn eval(&self, theta: T) -> T {
        let (ct, st) = (theta.cos(), theta.sin());
        let two = T::of_f64(2.0);
        let mut f = two * self.dt * (self.p - two * (self.c * ct - self.s * st));
        if let Some((a, b, d)) = self.start {
            let tr = ct * a + st * b + d;
            let angle = ((tr - T::one()) * T::of_f64(0.5)).clamp(-T::one(), T::one()).acos();
            f += two * angle * angle;
        }
        f
    }

    /// dF/dθ. Unlike `eval`, which loses precision to cancellation near a
    /// zero minimum, the derivative is well conditioned at the root.
    fn deriv(&self, theta: T) -> T {
        let (ct, st) = (theta.cos(), theta.sin());
        let two = T::of_f64(2.0);
        let four = T::of_f64(4.0);
        let mut df = four * self.dt * (self.c * st + self.s * ct);
        if let Some((a, b, d)) = self.start {
            let tr = ct * a + st * b + d;
            let ca = ((tr - T::one()) * T::of_f64(0.5)).clamp(-T::one(), T::one());
            let angle = ca.acos();
            let sa = angle.sin();
            // d(angle²)/dθ = −tr′ · angle/sin(angle); the ratio → 1 as angle → 0
            let ratio = if angle < T::of_f64(1e-9) { T::one() } else { angle / sa.max(T::of_f64(1e-300)) };
            let tr_prime = b * ct - a * st;
            df -= two * tr_prime * ratio;
        }
        df
    }
}

fn minimize_over_so2_dense<T: Scalar>(
    p1: &SrvPair<T>,
    p2: &SrvPair<T>,
    include_start_term: bool,
    extra_inits: &[RotationMatrix<T>],
) -> Result<KMinimum<T>> {
    let obj = So2Objective::new(p1, p2, include_start_term);
    let two_pi = T::two_pi();
    let n = 3600usize;
    let mut best_theta = T::zero();
    let mut best_f = obj.eval(T::zero());
    for k in 1..n {
        let theta = two_pi * T::of_usize(k) / T::of_usize(n);
        let f = obj.eval(theta);
        if f < best_f {
            best_f = f;
            best_theta = theta;
        }
    }
    // seed angles from caller-provided inits (e.g. the incumbent of an
    // alternation) so the refinement bracket never loses them
    for y in extra_inits {
        let theta = T::atan2(y.matrix()[(0, 1)], y.matrix()[(0, 0)]);
        let f = obj.eval(theta);
        if f < best_f {
            best_f = f;
            best_theta = theta;
        }
    }
    // refinement: bisect on dF/dθ inside each finalist's bracket (the
    // derivative stays well conditioned where F itself cancels near a
    // zero minimum), falling back to golden section when the bracket does
    // not straddle a root of dF/dθ
    let width = two_pi / T::of_usize(n);
    let refine = |center: T| -> T {
        let (mut lo, mut hi) = (center - width, center + width);
        if obj.deriv(lo) < T::zero() && obj.deriv(hi) > T::zero() {
            for _ in 0..100 {
                let mid = (lo + hi) * T::of_f64(0.5);
                if obj.deriv(mid) < T::zero() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return (lo + hi) * T::of_f64(0.5);
        }
        let gr = T::of_f64(0.618_033_988_749_894_9);
        let mut x1 = hi - (hi - lo) * gr;
        let mut x2 = lo + (hi - lo) * gr;
        let mut f1 = obj.eval(x1);
        let mut f2 = obj.eval(x2);
        for _ in 0..90 {
            if f1 < f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - (hi - lo) * gr;
                f1 = obj.eval(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + (hi - lo) * gr;
                f2 = obj.eval(x2);
            }
        }
        (lo + hi) * T::of_f64(0.5)
    };
    // evaluate the finalists by the direct residual: the closed
    // trigonometric form cancels catastrophically near zero minima
    let honest = |theta: T| -> Result<(T, RotationMatrix<T>)> {
        let y = so2_element(theta);
        let moved = k_action(p2, &y)?;
        let dq = l2_distance(&p1.q, &moved.q)?;
        let mut f = dq * dq;
        if include_start_term {
            let d0 = lie_group::geodesic_distance(&p1.start, &moved.start)?;
            f += d0 * d0;
        }
        Ok((f, y))
    };
    let mut candidates = vec![refine(best_theta), best_theta];
    for y in extra_inits {
        let theta = T::atan2(y.matrix()[(0, 1)], y.matrix()[(0, 0)]);
        candidates.push(refine(theta));
        candidates.push(theta);
    }
    let mut best: Option<(T, RotationMatrix<T>)> = None;
    for theta in candidates {
        let (f, y) = honest(theta)?;
        best = Some(match best {
            Some(b) if b.0 <= f => b,
            _ => (f, y),
        });
    }
    let (f, y) = best.expect("at least one candidate");
    Ok(KMinimum { y, f, converged: true })
}

// ---- distances and geodesics on AC([0,1], S^n) ----------------------------

/// d(β₁, β₂) = inf_{y∈K} (d²(α₁(0), α₂(0)y) + ‖q₁ − y⁻¹q₂y‖²)^½.
pub fn distance_m<T: Scalar>(
    b1: &SphereCurve<T>,
    b2: &SphereCurve<T>,
    cfg: &OptimizerConfig<T>,
) -> Result<T> {
    if b1.num_intervals() != b2.num_intervals() {
        return Err(HomogeneousError::GridMismatch(b1.num_intervals(), b2.num_intervals()));
    }
    let basis = SubalgebraBasis::standard(b1.ambient_dim());
    let p1 = lift_to_srv(b1, &basis)?;
    let p2 = lift_to_srv(b2, &basis)?;
    let min = minimize_over_k(&p1, &p2, cfg)?;
    Ok(min.f.max(T::zero()).sqrt())
}

/// Geodesic between β₁ and β₂ as `steps` intermediate sphere curves:
/// after the optimal y, the product-space straight line (G-geodesic on
/// starts, linear interpolation of q) projects through Q⁻¹ and π.
pub fn geodesic_m<T: Scalar>(
    b1: &SphereCurve<T>,
    b2: &SphereCurve<T>,
    cfg: &OptimizerConfig<T>,
    steps: usize,
) -> Result<Vec<SphereCurve<T>>> {
    assert!(steps >= 2, "a geodesic needs at least its two endpoints");
    let basis = SubalgebraBasis::standard(b1.ambient_dim());
    let p1 = lift_to_srv(b1, &basis)?;
    let p2 = lift_to_srv(b2, &basis)?;
    let min = minimize_over_k(&p1, &p2, cfg)?;
    let p2y = k_action(&p2, &min.y)?;
    geodesic_between_pairs(&p1, &p2y, steps)
}

/// Product-space geodesic between two (aligned) horizontal pairs,
/// projected back to sphere curves.
pub fn geodesic_between_pairs<T: Scalar>(
    p1: &SrvPair<T>,
    p2: &SrvPair<T>,
    steps: usize,
) -> Result<Vec<SphereCurve<T>>> {
    let dir = group_log_strict(&p1.start.inverse().compose(&p2.start))?;
    let mut frames = Vec::with_capacity(steps);
    for j in 0..steps {
        let s = T::of_usize(j) / T::of_usize(steps - 1);
        let start = p1.start.compose(&group_exp(&dir.scale(s)));
        let q = p1
            .q
            .iter()
            .zip(&p2.q)
            .map(|(a, b)| &a.scale(T::one() - s) + &b.scale(s))
            .collect();
        let pair = SrvPair { start, q, horizontal: p1.horizontal && p2.horizontal };
        frames.push(project_pi(&srv_core::q_inverse(&pair))?);
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn north() -> DVector<f64> {
        north_pole(3)
    }

    #[test]
    fn project_pi_of_identity_curve_is_north_pole() {
        let a = GroupCurve::new(vec![RotationMatrix::identity(3); 5]);
        let b = project_pi(&a).unwrap();
        for s in b.samples() {
            assert_relative_eq!(s, &north(), epsilon = 1e-15);
        }
    }

    #[test]
    fn project_pi_of_antipodal_lift() {
        let mut m = DMatrix::<f64>::identity(3, 3);
        m[(0, 0)] = -1.0;
        m[(2, 2)] = -1.0;
        let a = GroupCurve::new(vec![RotationMatrix::from_matrix(m).unwrap(); 3]);
        let b = project_pi(&a).unwrap();
        for s in b.samples() {
            assert_relative_eq!(s, &(-north()), epsilon = 1e-15);
        }
    }

    #[test]
    fn lift_initial_cases() {
        assert_relative_eq!(
            lift_initial(&north()).matrix(),
            &DMatrix::identity(3, 3),
            epsilon = 1e-14
        );
        let neg = -north();
        let a = lift_initial(&neg);
        assert!(a.defect() < 1e-14);
        assert_relative_eq!(a.apply(&north()), neg, epsilon = 1e-14);
        assert_eq!(a.matrix()[(0, 0)], -1.0);

        let e1 = DVector::from_row_slice(&[1.0, 0.0, 0.0]);
        assert_relative_eq!(lift_initial(&e1).apply(&north()), e1, epsilon = 1e-12);
    }

    #[test]
    fn lift_of_constant_north_curve_is_identity() {
        let b = SphereCurve::new(vec![north(); 6]).unwrap();
        let a = horizontal_lift(&b).unwrap();
        for s in a.samples() {
            assert_relative_eq!(s.matrix(), &DMatrix::identity(3, 3), epsilon = 1e-13);
        }
    }

    #[test]
    fn lift_of_great_circle_through_pole() {
        // β(t) = (sin t, 0, cos t): rotation by t about +y
        let t = 200;
        let samples: Vec<_> = (0..=t)
            .map(|i| {
                let s = i as f64 / t as f64;
                DVector::from_row_slice(&[s.sin(), 0.0, s.cos()])
            })
            .collect();
        let b = SphereCurve::new(samples).unwrap();
        let a = horizontal_lift(&b).unwrap();
        for (i, s) in a.samples().iter().enumerate() {
            let angle = i as f64 / t as f64;
            let expected = group_exp(
                &crate::lie_group::AlgebraElement::basis_element(3, 0, 2).scale(angle),
            );
            assert!(
                (s.matrix() - expected.matrix()).norm() < 1e-8,
                "deviation at {i}: {}",
                (s.matrix() - expected.matrix()).norm()
            );
        }
    }

    #[test]
    fn lift_projects_back_and_is_horizontal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let basis = SubalgebraBasis::standard(3);
        for _ in 0..5 {
            let b = synthetic::random_sphere_curve(&mut rng, 200, 1.0);
            let a = horizontal_lift(&b).unwrap();
            let back = project_pi(&a).unwrap();
            for (x, y) in b.samples().iter().zip(back.samples()) {
                assert!((x - y).norm() < 1e-12);
            }
            // discrete horizontality: 𝔨-component of the velocity
            // vanishes by construction (it is exact for R_{p,q} steps)
            let pair = q_map(&a).unwrap();
            let mut worst = 0.0f64;
            for qk in &pair.q {
                if qk.norm() == 0.0 {
                    continue;
                }
                let ratio = crate::lie_group::proj_k(qk, &basis).norm()
                    / crate::lie_group::proj_kperp(qk, &basis).norm();
                worst = worst.max(ratio);
            }
            assert!(worst < 1e-3, "horizontality ratio {worst}");
        }
    }

    #[test]
    fn lift_equivariance_under_initial_choice() {
        // lifting from α₀y equals (lift from α₀)·y at every grid point
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = synthetic::random_sphere_curve(&mut rng, 100, 1.0);
        let a = horizontal_lift(&b).unwrap();
        let y = so2_element(1.2345);
        let a0y = a.samples()[0].compose(&y);
        let tilted = horizontal_lift_from(&b, a0y).unwrap();
        for (s, t) in a.samples().iter().zip(tilted.samples()) {
            assert!((s.compose(&y).matrix() - t.matrix()).norm() < 1e-9);
        }
    }

    #[test]
    fn k_action_identity_and_two_lifts_relation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let basis = SubalgebraBasis::standard(3);
        let b = synthetic::random_sphere_curve(&mut rng, 80, 1.0);
        let pair = lift_to_srv(&b, &basis).unwrap();
        let same = k_action(&pair, &RotationMatrix::identity(3)).unwrap();
        assert!((same.start.matrix() - pair.start.matrix()).norm() < 1e-15);

        let y = so2_element(0.77);
        let acted = k_action(&pair, &y).unwrap();
        assert!(acted.horizontal);
        // consistency of the two F terms with direct computation
        let d0 = crate::lie_group::geodesic_distance(&pair.start, &acted.start).unwrap();
        assert_relative_eq!(d0, crate::lie_group::group_log(&y).unwrap().value.norm(), epsilon = 1e-10);

        // both lifts project to the same sphere curve
        let projected = project_pi(&crate::srv_core::q_inverse(&acted)).unwrap();
        for (x, yv) in b.samples().iter().zip(projected.samples()) {
            assert!((x - yv).norm() < 1e-9);
        }
    }

    #[test]
    fn f_value_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let basis = SubalgebraBasis::standard(3);
        let b = synthetic::random_sphere_curve(&mut rng, 60, 1.0);
        let p = lift_to_srv(&b, &basis).unwrap();
        let id = RotationMatrix::identity(3);
        assert!(f_value(&p, &p, &id).unwrap().abs() < 1e-20);

        let y = so2_element(1.9);
        let f = f_value(&p, &p, &y).unwrap();
        assert!(f >= 0.0);
        // term-by-term: ‖log y‖² + ‖q − y⁻¹qy‖²
        let logy = crate::lie_group::group_log(&y).unwrap().value.norm();
        let conj_q: Vec<_> =
            p.q.iter().map(|qk| conjugate(&y, qk).unwrap()).collect();
        let dq = l2_distance(&p.q, &conj_q).unwrap();
        assert_relative_eq!(f, logy * logy + dq * dq, epsilon = 1e-10);
    }

    #[test]
    fn f_gradient_analytic_case() {
        // q₁ = q₂ = 0, α₁(0) = I, α₂(0) = exp(θE12): ∇F = 2θ·E12
        let theta = 0.6;
        let e12 = crate::lie_group::AlgebraElement::basis_element(3, 0, 1);
        let basis = SubalgebraBasis::standard(3);
        let zeros = vec![crate::lie_group::AlgebraElement::zeros(3); 10];
        let p1 = SrvPair { start: RotationMatrix::identity(3), q: zeros.clone(), horizontal: true };
        let p2 = SrvPair { start: group_exp(&e12.scale(theta)), q: zeros, horizontal: true };
        let grad = f_gradient(&p1, &p2, &basis, true).unwrap();
        assert_relative_eq!(grad.matrix(), e12.scale(2.0 * theta).matrix(), epsilon = 1e-12);
    }

    #[test]
    fn f_gradient_is_zero_at_coincident_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let basis = SubalgebraBasis::standard(3);
        let b = synthetic::random_sphere_curve(&mut rng, 50, 1.0);
        let p = lift_to_srv(&b, &basis).unwrap();
        let grad = f_gradient(&p, &p, &basis, true).unwrap();
        assert!(grad.norm() < 1e-12);
    }

    #[test]
    fn f_gradient_matches_directional_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let basis = SubalgebraBasis::standard(3);
        let b1 = synthetic::random_sphere_curve(&mut rng, 80, 1.0);
        let b2 = synthetic::random_sphere_curve(&mut rng, 80, 1.0);
        let p1 = lift_to_srv(&b1, &basis).unwrap();
        let p2 = lift_to_srv(&b2, &basis).unwrap();
        let grad = f_gradient(&p1, &p2, &basis, true).unwrap();
        let s = 1e-6;
        for _ in 0..20 {
            let v = basis.k_basis[0].scale(rng.gen_range(-1.0..1.0f64));
            let fp = f_value(&p1, &p2, &group_exp(&v.scale(s))).unwrap();
            let fm = f_value(&p1, &p2, &group_exp(&v.scale(-s))).unwrap();
            let fd = (fp - fm) / (2.0 * s);
            let dir = crate::lie_group::inner(&grad, &v).unwrap();
            assert!(
                (fd - dir).abs() / dir.abs().max(1e-12) < 1e-5,
                "fd {fd} vs ⟨∇F, V⟩ {dir}"
            );
        }
    }

    #[test]
    fn minimize_recovers_planted_k_element() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let basis = SubalgebraBasis::standard(3);
        let cfg = OptimizerConfig::default();
        for _ in 0..5 {
            let b = synthetic::random_sphere_curve(&mut rng, 60, 1.0);
            let p1 = lift_to_srv(&b, &basis).unwrap();
            let y0 = so2_element(rng.gen_range(-3.0..3.0f64));
            let p2 = k_action(&p1, &y0.inverse()).unwrap();
            let min = minimize_over_k(&p1, &p2, &cfg).unwrap();
            assert!(min.f < 1e-8, "planted minimum missed: f = {}", min.f);
        }
    }

    #[test]
    fn gradient_method_agrees_with_dense_so2_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let basis = SubalgebraBasis::standard(3);
        let dense_cfg = OptimizerConfig::default();
        let grad_cfg = OptimizerConfig { so2_fast_path: false, ..OptimizerConfig::default() };
        for _ in 0..5 {
            let b1 = synthetic::random_sphere_curve(&mut rng, 50, 1.0);
            let b2 = synthetic::random_sphere_curve(&mut rng, 50, 1.0);
            let p1 = lift_to_srv(&b1, &basis).unwrap();
            let p2 = lift_to_srv(&b2, &basis).unwrap();
            let dense = minimize_over_k(&p1, &p2, &dense_cfg).unwrap();
            let grad = minimize_over_k(&p1, &p2, &grad_cfg).unwrap();
            assert!(
                (dense.f - grad.f).abs() < 1e-4,
                "dense {} vs gradient {}",
                dense.f,
                grad.f
            );
        }
    }

    #[test]
    fn distance_m_metric_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cfg = OptimizerConfig::default();
        let b1 = synthetic::random_sphere_curve(&mut rng, 60, 1.0);
        let b2 = synthetic::random_sphere_curve(&mut rng, 60, 1.0);
        assert!(distance_m(&b1, &b1, &cfg).unwrap() < 1e-8);
        let d12 = distance_m(&b1, &b2, &cfg).unwrap();
        let d21 = distance_m(&b2, &b1, &cfg).unwrap();
        assert!((d12 - d21).abs() < 1e-6, "asymmetry {}", (d12 - d21).abs());

        // invariance under the G-action
        let g = group_exp(&crate::lie_group::AlgebraElement::from_matrix(
            DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0)),
        ));
        let d_rot = distance_m(&b1.rotated(&g), &b2.rotated(&g), &cfg).unwrap();
        assert!((d12 - d_rot).abs() < 1e-8, "G-invariance broken: {}", (d12 - d_rot).abs());
    }

    #[test]
    fn distance_m_independent_of_initial_lift() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let cfg = OptimizerConfig::default();
        let basis = SubalgebraBasis::standard(3);
        let b1 = synthetic::random_sphere_curve(&mut rng, 60, 1.0);
        let b2 = synthetic::random_sphere_curve(&mut rng, 60, 1.0);
        let d = distance_m(&b1, &b2, &cfg).unwrap();

        // recompute with a rotated initial lift of b2
        let y0 = so2_element(2.2);
        let a2 = horizontal_lift_from(&b2, lift_initial(&b2.samples()[0]).compose(&y0)).unwrap();
        let p1 = lift_to_srv(&b1, &basis).unwrap();
        let p2 = q_map(&a2).unwrap().into_horizontal(&basis).unwrap();
        let min = minimize_over_k(&p1, &p2, &cfg).unwrap();
        assert!((d - min.f.max(0.0).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn geodesic_endpoints_and_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cfg = OptimizerConfig::default();
        let b1 = synthetic::random_sphere_curve(&mut rng, 60, 1.0);
        let b2 = synthetic::random_sphere_curve(&mut rng, 60, 1.0);
        let steps = 20;
        let frames = geodesic_m(&b1, &b2, &cfg, steps).unwrap();
        assert_eq!(frames.len(), steps);
        for (x, y) in b1.samples().iter().zip(frames[0].samples()) {
            assert!((x - y).norm() < 1e-8);
        }
        for (x, y) in b2.samples().iter().zip(frames[steps - 1].samples()) {
            assert!((x - y).norm() < 1e-8);
        }
        // path length ≈ distance (flat product representation)
        let d = distance_m(&b1, &b2, &cfg).unwrap();
        let mut len = 0.0;
        for w in frames.windows(2) {
            len += distance_m(&w[0], &w[1], &cfg).unwrap();
        }
        assert!((len - d).abs() / d < 0.01, "length {len} vs distance {d}");
    }

    #[test]
    fn geodesic_of_identical_curves_is_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let cfg = OptimizerConfig::default();
        let b = synthetic::random_sphere_curve(&mut rng, 40, 1.0);
        let frames = geodesic_m(&b, &b, &cfg, 5).unwrap();
        for f in &frames {
            for (x, y) in b.samples().iter().zip(f.samples()) {
                assert!((x - y).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn geodesic_midpoint_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let cfg = OptimizerConfig::default();
        let b1 = synthetic::random_sphere_curve(&mut rng, 50, 1.0);
        let b2 = synthetic::random_sphere_curve(&mut rng, 50, 1.0);
        let fwd = geodesic_m(&b1, &b2, &cfg, 21).unwrap();
        let bwd = geodesic_m(&b2, &b1, &cfg, 21).unwrap();
        for (x, y) in fwd[10].samples().iter().zip(bwd[10].samples()) {
            assert!((x - y).norm() < 1e-6);
        }
    }

    #[test]
    fn geodesic_intermediate_pairs_are_horizontal() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let basis = SubalgebraBasis::standard(3);
        let cfg = OptimizerConfig::default();
        let b1 = synthetic::random_sphere_curve(&mut rng, 40, 1.0);
        let b2 = synthetic::random_sphere_curve(&mut rng, 40, 1.0);
        let p1 = lift_to_srv(&b1, &basis).unwrap();
        let p2 = lift_to_srv(&b2, &basis).unwrap();
        let min = minimize_over_k(&p1, &p2, &cfg).unwrap();
        let p2y = k_action(&p2, &min.y).unwrap();
        for j in 0..=10 {
            let s = j as f64 / 10.0;
            for (a, b) in p1.q.iter().zip(&p2y.q) {
                let q = &a.scale(1.0 - s) + &b.scale(s);
                assert!(crate::lie_group::proj_k(&q, &basis).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn sphere_curve_validation() {
        let bad = vec![north(), DVector::from_row_slice(&[0.5, 0.0, 0.0])];
        assert!(matches!(SphereCurve::new(bad), Err(HomogeneousError::NotUnit(1))));
        let anti = vec![north(), -north()];
        assert!(matches!(
            SphereCurve::new(anti),
            Err(HomogeneousError::AdjacentAntipodal(0, 1))
        ));
    }
}
