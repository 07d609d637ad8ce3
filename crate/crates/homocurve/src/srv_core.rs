//! The square-root-velocity transform for Lie-group curves: the Q-map
//! Q(α) = (α(0), q) with q = α⁻¹α′/√‖α′‖, its exact inverse on
//! piecewise-constant data, the product distance on G × L², the group
//! and reparametrization actions, and the pullback elastic metric.

use thiserror::Error;

use crate::alignment::Reparametrization;
use crate::lie_group::{
    self, group_log, group_log_strict, inner, AlgebraElement, LieGroupError, RotationMatrix,
    SubalgebraBasis,
};
use crate::scalar::Scalar;

/// Velocities below this (trace) norm are treated as zero, mirroring the
/// two-branch definition q = 0 where α′ = 0.
pub const ZERO_VELOCITY_TOL: f64 = 1e-12;
/// Residual 𝔨-components below this are zeroed when storing horizontal pairs.
pub const HORIZONTAL_TOL: f64 = 1e-9;
/// Rotation products are re-orthonormalized after this many chained steps.
const RENORM_PERIOD: usize = 100;

#[derive(Debug, Error)]
pub enum SrvError {
    #[error("curves/q-parts live on different grids: {0} vs {1} intervals")]
    GridMismatch(usize, usize),
    #[error("consecutive samples at the cut locus (interval {0}): curve under-resolved")]
    ConsecutiveSamplesAtCutLocus(usize),
    #[error("zero-speed interval at node {0}: arc-length derivative undefined")]
    DegenerateSpeed(usize),
    #[error(transparent)]
    Lie(#[from] LieGroupError),
}

pub type Result<V> = std::result::Result<V, SrvError>;

/// Discretized absolutely continuous curve in G = SO(n+1), sampled on the
/// uniform grid t_i = i/T.
#[derive(Debug, Clone)]
pub struct GroupCurve<T: Scalar> {
    samples: Vec<RotationMatrix<T>>,
}

impl<T: Scalar> GroupCurve<T> {
    pub fn new(samples: Vec<RotationMatrix<T>>) -> Self {
        assert!(samples.len() >= 2, "a curve needs at least two samples (T >= 1)");
        Self { samples }
    }

    pub fn samples(&self) -> &[RotationMatrix<T>] {
        &self.samples
    }

    /// Number of grid intervals T (= samples − 1).
    pub fn num_intervals(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.samples[0].dim()
    }
}

/// The Q-representation (α₀, q): a group element plus a piecewise-constant
/// 𝔤-valued function, value k attached to [k/T, (k+1)/T).
#[derive(Debug, Clone)]
pub struct SrvPair<T: Scalar> {
    pub start: RotationMatrix<T>,
    pub q: Vec<AlgebraElement<T>>,
    /// Set when q is known to take values in 𝔨⊥ (horizontal lift data).
    pub horizontal: bool,
}

impl<T: Scalar> SrvPair<T> {
    pub fn num_intervals(&self) -> usize {
        self.q.len()
    }

    pub fn dim(&self) -> usize {
        self.start.dim()
    }

    /// Marks the pair horizontal, zeroing sub-tolerance 𝔨-residuals.
    /// Keeps the K-action exactly norm-preserving on lifted data.
    pub fn into_horizontal(mut self, basis: &SubalgebraBasis<T>) -> Result<Self> {
        for (k, qk) in self.q.iter_mut().enumerate() {
            let k_part = lie_group::proj_k(qk, basis);
            if k_part.norm() > T::of_f64(HORIZONTAL_TOL) * (T::one() + qk.norm()) {
                return Err(SrvError::ConsecutiveSamplesAtCutLocus(k));
            }
            *qk = lie_group::proj_kperp(qk, basis);
        }
        self.horizontal = true;
        Ok(self)
    }
}

/// In the linearized coordinates of the Q-map: a variation of α₀ (left
/// trivialized) together with a variation of q.
#[derive(Debug, Clone)]
pub struct TangentVector<T: Scalar> {
    pub at_start: AlgebraElement<T>,
    pub dq: Vec<AlgebraElement<T>>,
}

impl<T: Scalar> TangentVector<T> {
    pub fn zeros(dim: usize, intervals: usize) -> Self {
        Self {
            at_start: AlgebraElement::zeros(dim),
            dq: vec![AlgebraElement::zeros(dim); intervals],
        }
    }

    /// Product inner product: ⟨a,b⟩ + (1/T)Σ⟨dq_k, dp_k⟩.
    pub fn inner(&self, other: &Self) -> Result<T> {
        if self.dq.len() != other.dq.len() {
            return Err(SrvError::GridMismatch(self.dq.len(), other.dq.len()));
        }
        let mut acc = inner(&self.at_start, &other.at_start)?;
        let dt = T::one() / T::of_usize(self.dq.len());
        for (a, b) in self.dq.iter().zip(&other.dq) {
            acc += inner(a, b)? * dt;
        }
        Ok(acc)
    }

    pub fn norm(&self) -> T {
        self.inner(self).expect("matching grids").max(T::zero()).sqrt()
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            at_start: self.at_start.scale(s),
            dq: self.dq.iter().map(|v| v.scale(s)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            at_start: &self.at_start + &other.at_start,
            dq: self.dq.iter().zip(&other.dq).map(|(a, b)| a + b).collect(),
        }
    }
}

/// Q(α) = (α(0), q) with q_k = v_k/√‖v_k‖ from the left-trivialized
/// discrete velocity v_k = T·log(α_k⁻¹α_{k+1}).
pub fn q_map<T: Scalar>(alpha: &GroupCurve<T>) -> Result<SrvPair<T>> {
    let t = alpha.num_intervals();
    let scale = T::of_usize(t);
    let mut q = Vec::with_capacity(t);
    for k in 0..t {
        let rel = alpha.samples[k].inverse().compose(&alpha.samples[k + 1]);
        let log = group_log(&rel).map_err(|e| match e {
            LieGroupError::AngleAmbiguity => SrvError::ConsecutiveSamplesAtCutLocus(k),
            other => SrvError::Lie(other),
        })?;
        if log.ambiguous {
            return Err(SrvError::ConsecutiveSamplesAtCutLocus(k));
        }
        let v = log.value.scale(scale);
        let n = v.norm();
        if n > T::of_f64(ZERO_VELOCITY_TOL) {
            q.push(v.scale(T::one() / n.sqrt()));
        } else {
            q.push(AlgebraElement::zeros(alpha.dim()));
        }
    }
    Ok(SrvPair { start: alpha.samples[0].clone(), q, horizontal: false })
}

/// Exact inverse of the Q-map on piecewise-constant q:
/// α_{k+1} = α_k · exp(‖q_k‖ q_k / T).
pub fn q_inverse<T: Scalar>(pair: &SrvPair<T>) -> GroupCurve<T> {
    let t = pair.num_intervals();
    let dt = T::one() / T::of_usize(t.max(1));
    let mut samples = Vec::with_capacity(t + 1);
    samples.push(pair.start.clone());
    for (k, qk) in pair.q.iter().enumerate() {
        let step = qk.scale(qk.norm() * dt);
        let mut next = samples[k].compose(&lie_group::group_exp(&step));
        if (k + 1) % RENORM_PERIOD == 0 {
            next = next.renormalized();
        }
        samples.push(next);
    }
    GroupCurve::new(samples)
}

/// L² distance of q-parts under the trace metric: (Σ‖q1_k − q2_k‖²/T)^½.
pub fn l2_distance<T: Scalar>(q1: &[AlgebraElement<T>], q2: &[AlgebraElement<T>]) -> Result<T> {
    if q1.len() != q2.len() {
        return Err(SrvError::GridMismatch(q1.len(), q2.len()));
    }
    let dt = T::one() / T::of_usize(q1.len().max(1));
    let mut acc = T::zero();
    for (a, b) in q1.iter().zip(q2) {
        let d = a - b;
        acc += d.norm() * d.norm() * dt;
    }
    Ok(acc.sqrt())
}

/// L² norm of a q-part.
pub fn l2_norm<T: Scalar>(q: &[AlgebraElement<T>]) -> T {
    let dt = T::one() / T::of_usize(q.len().max(1));
    let mut acc = T::zero();
    for a in q {
        acc += a.norm() * a.norm() * dt;
    }
    acc.sqrt()
}

/// Distance between SrvPairs in the product metric on G × L².
pub fn pair_distance<T: Scalar>(p1: &SrvPair<T>, p2: &SrvPair<T>) -> Result<T> {
    let d0 = lie_group::geodesic_distance(&p1.start, &p2.start)?;
    let dq = l2_distance(&p1.q, &p2.q)?;
    Ok((d0 * d0 + dq * dq).sqrt())
}

/// d(α₁, α₂) = (d²(α₁(0), α₂(0)) + ‖q₁ − q₂‖²)^½ on AC([0,1], G).
pub fn curve_distance_g<T: Scalar>(a1: &GroupCurve<T>, a2: &GroupCurve<T>) -> Result<T> {
    if a1.num_intervals() != a2.num_intervals() {
        return Err(SrvError::GridMismatch(a1.num_intervals(), a2.num_intervals()));
    }
    pair_distance(&q_map(a1)?, &q_map(a2)?)
}

/// Left action of g ∈ G on the Q-representation: (gα₀, q).
pub fn act_group<T: Scalar>(g: &RotationMatrix<T>, pair: &SrvPair<T>) -> SrvPair<T> {
    SrvPair { start: g.compose(&pair.start), q: pair.q.clone(), horizontal: pair.horizontal }
}

/// Right action of γ ∈ Γ on the q-part: (q∘γ)√γ′, with q piecewise
/// constant. The exact result is piecewise constant on a finer partition;
/// it is resampled to the original grid by cell averaging (the L²
/// projection, so the result is the best same-grid representative).
pub fn act_reparam_q<T: Scalar>(
    q: &[AlgebraElement<T>],
    gamma: &Reparametrization<T>,
) -> Vec<AlgebraElement<T>> {
    let t = q.len();
    let tf = T::of_usize(t);
    let dim = q.first().map_or(0, |e| e.dim());
    let mut out = vec![AlgebraElement::zeros(dim); t];
    for (len, c1, c2, slope) in crate::alignment::reparam_pieces(gamma, t) {
        out[c1] = &out[c1] + &q[c2].scale(slope.sqrt() * len * tf);
    }
    out
}

/// (α₀, q) ⋆ γ = (α₀, (q∘γ)√γ′).
pub fn act_reparam<T: Scalar>(pair: &SrvPair<T>, gamma: &Reparametrization<T>) -> SrvPair<T> {
    SrvPair {
        start: pair.start.clone(),
        q: act_reparam_q(&pair.q, gamma),
        horizontal: pair.horizontal,
    }
}

/// Pullback elastic metric of the Q-map at α:
/// 𝒢_α(u,v) = ⟨u(0),v(0)⟩ + ∫ ⟨D_s uᴺ, D_s vᴺ⟩ + ¼⟨D_s uᵀ, D_s vᵀ⟩ ds,
/// with D_s u = (w′ + [δˡ(α), w])/‖α′‖ for the left-trivialized variation w,
/// ds = ‖α′‖dt, and the tangential/normal split along δˡ(α)/‖α′‖.
///
/// Variations are discrete fields w_i = α_i⁻¹ u_i on the grid nodes.
pub fn pullback_metric<T: Scalar>(
    alpha: &GroupCurve<T>,
    u: &[AlgebraElement<T>],
    v: &[AlgebraElement<T>],
) -> Result<T> {
    let t = alpha.num_intervals();
    if u.len() != t + 1 || v.len() != t + 1 {
        return Err(SrvError::GridMismatch(u.len().max(v.len()), t + 1));
    }
    let tf = T::of_usize(t);

    // per-cell left-trivialized velocity, then node values by averaging
    let mut cell_vel = Vec::with_capacity(t);
    for k in 0..t {
        let rel = alpha.samples[k].inverse().compose(&alpha.samples[k + 1]);
        cell_vel.push(group_log_strict(&rel)?.scale(tf));
    }
    let node_vel = |i: usize| -> AlgebraElement<T> {
        if i == 0 {
            cell_vel[0].clone()
        } else if i == t {
            cell_vel[t - 1].clone()
        } else {
            (&cell_vel[i - 1] + &cell_vel[i]).scale(T::of_f64(0.5))
        }
    };

    let ds_of = |w: &[AlgebraElement<T>], i: usize| -> Result<AlgebraElement<T>> {
        let w_prime = if i == 0 {
            (&w[1] - &w[0]).scale(tf)
        } else if i == t {
            (&w[t] - &w[t - 1]).scale(tf)
        } else {
            (&w[i + 1] - &w[i - 1]).scale(tf * T::of_f64(0.5))
        };
        let vel = node_vel(i);
        let speed = vel.norm();
        if speed < T::of_f64(ZERO_VELOCITY_TOL) {
            return Err(SrvError::DegenerateSpeed(i));
        }
        Ok((&w_prime + &vel.bracket(&w[i])).scale(T::one() / speed))
    };

    let mut total = inner(&u[0], &v[0])?;
    let quarter = T::of_f64(0.25);
    for i in 0..=t {
        let vel = node_vel(i);
        let speed = vel.norm();
        if speed < T::of_f64(ZERO_VELOCITY_TOL) {
            return Err(SrvError::DegenerateSpeed(i));
        }
        let tau = vel.scale(T::one() / speed);
        let du = ds_of(u, i)?;
        let dv = ds_of(v, i)?;
        let du_t = inner(&du, &tau)?;
        let dv_t = inner(&dv, &tau)?;
        let du_n = &du - &tau.scale(du_t);
        let dv_n = &dv - &tau.scale(dv_t);
        let integrand = inner(&du_n, &dv_n)? + quarter * du_t * dv_t;
        // trapezoidal weights for ∫ · ds with ds = speed · dt
        let weight = if i == 0 || i == t { T::of_f64(0.5) } else { T::one() };
        total += integrand * speed * weight / tf;
    }
    Ok(total)
}
