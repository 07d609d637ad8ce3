//! Quotients by reparametrization and rigid motion: dynamic programming
//! over monotone piecewise-linear γ, alternation with the K-optimization,
//! and the closed-form optimal rigid motion g.

use nalgebra::DVector;
use thiserror::Error;

use crate::homogeneous::{
    k_action, lift_to_srv, minimize_over_k_impl, HomogeneousError, OptimizerConfig, SphereCurve,
};
use crate::lie_group::{AlgebraElement, LieGroupError, RotationMatrix, SubalgebraBasis};
use crate::scalar::Scalar;
use crate::srv_core::{SrvError, SrvPair};

/// Alternation is capped at this many rounds.
const MAX_ROUNDS: usize = 20;
/// Alternation stops when the cost decreases by less than this.
const COST_DECREASE_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum AlignmentError {
    #[error("reparametrization is not strictly monotone at knot {0}")]
    NonMonotone(usize),
    #[error("reparametrization endpoints must be (0,0) and (1,1)")]
    BadEndpoints,
    #[error("q-parts live on different grids: {0} vs {1}")]
    GridMismatch(usize, usize),
    #[error(transparent)]
    Homogeneous(#[from] HomogeneousError),
    #[error(transparent)]
    Srv(#[from] SrvError),
    #[error(transparent)]
    Lie(#[from] LieGroupError),
}

pub type Result<V> = std::result::Result<V, AlignmentError>;

/// Monotone piecewise-linear homeomorphism γ: [0,1] → [0,1], given by its
/// knots (strictly increasing in both coordinates).
#[derive(Debug, Clone, PartialEq)]
pub struct Reparametrization<T: Scalar> {
    knots: Vec<(T, T)>,
}

impl<T: Scalar> Reparametrization<T> {
    pub fn new(knots: Vec<(T, T)>) -> Result<Self> {
        if knots.len() < 2
            || knots[0] != (T::zero(), T::zero())
            || *knots.last().unwrap() != (T::one(), T::one())
        {
            return Err(AlignmentError::BadEndpoints);
        }
        for (i, w) in knots.windows(2).enumerate() {
            if w[1].0 <= w[0].0 || w[1].1 <= w[0].1 {
                return Err(AlignmentError::NonMonotone(i + 1));
            }
        }
        Ok(Self { knots })
    }

    pub fn identity() -> Self {
        Self { knots: vec![(T::zero(), T::zero()), (T::one(), T::one())] }
    }

    pub fn knots(&self) -> &[(T, T)] {
        &self.knots
    }

    fn segment(&self, t: T) -> usize {
        // index k of the segment [x_k, x_{k+1}) containing t
        let mut lo = 0usize;
        let mut hi = self.knots.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.knots[mid].0 <= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    pub fn eval(&self, t: T) -> T {
        self.eval_with_slope(t).0
    }

    /// Value and local slope at t.
    pub fn eval_with_slope(&self, t: T) -> (T, T) {
        let t = t.clamp(T::zero(), T::one());
        let k = self.segment(t);
        let (x0, y0) = self.knots[k];
        let (x1, y1) = self.knots[k + 1];
        let slope = (y1 - y0) / (x1 - x0);
        ((y0 + slope * (t - x0)).clamp(T::zero(), T::one()), slope)
    }

    /// γ⁻¹: knots mirrored across the diagonal.
    pub fn inverse(&self) -> Self {
        Self { knots: self.knots.iter().map(|&(x, y)| (y, x)).collect() }
    }

    /// Composition self∘other: t ↦ self(other(t)), so that acting by
    /// `other` after `self` equals acting by the composition once.
    pub fn compose(&self, other: &Self) -> Self {
        let mut xs: Vec<T> = other.knots.iter().map(|&(x, _)| x).collect();
        let other_inv = other.inverse();
        for &(u, _) in &self.knots {
            xs.push(other_inv.eval(u));
        }
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut knots: Vec<(T, T)> = Vec::with_capacity(xs.len());
        for x in xs {
            let y = self.eval(other.eval(x));
            if let Some(&(px, py)) = knots.last() {
                if x - px <= T::of_f64(1e-14) || y - py <= T::of_f64(1e-14) {
                    continue;
                }
            }
            knots.push((x, y));
        }
        let last = knots.len() - 1;
        knots[0] = (T::zero(), T::zero());
        knots[last] = (T::one(), T::one());
        Self { knots }
    }

    /// sup_t |γ₁(t) − γ₂(t)|, attained at a knot of either function.
    pub fn sup_distance(&self, other: &Self) -> T {
        let mut worst = T::zero();
        for &(x, _) in self.knots.iter().chain(&other.knots) {
            worst = worst.max((self.eval(x) - other.eval(x)).abs());
        }
        worst
    }
}

/// Flattens a q-part for the DP inner loops. Horizontal so(3) values are
/// packed as √2-scaled 2-vectors (same norms and inner products as the
/// full matrices under the trace metric); everything else row-major.
pub fn flatten_q<T: Scalar>(q: &[AlgebraElement<T>], horizontal: bool) -> Vec<DVector<T>> {
    let dim = q.first().map_or(0, |e| e.dim());
    if horizontal && dim == 3 {
        let s = T::of_f64(std::f64::consts::SQRT_2);
        q.iter()
            .map(|e| DVector::from_vec(vec![e.matrix()[(0, 2)] * s, e.matrix()[(1, 2)] * s]))
            .collect()
    } else {
        q.iter().map(|e| DVector::from_column_slice(e.matrix().as_slice())).collect()
    }
}

/// Cost of one DP edge from grid node (i₁,j₁) to (i₂,j₂): the exact
/// integral of ‖q₁ − (q₂∘γ)√γ′‖² over [i₁/T, i₂/T] with γ linear on the
/// edge and both q's piecewise constant on the fine grid. The integrand is
/// constant between grid crossings, so the integral is a finite sum over
/// the merged partitions of both axes (crossings compared in exact integer
/// arithmetic). Shared between the DP and the enumeration oracles.
pub fn dp_edge_cost<T: Scalar>(
    v1: &[DVector<T>],
    v2: &[DVector<T>],
    from: (usize, usize),
    to: (usize, usize),
) -> T {
    let t = v1.len();
    let tf = T::of_usize(t);
    let (i1, j1) = from;
    let (i2, j2) = to;
    let di = i2 - i1;
    let dj = j2 - j1;
    let slope = T::of_usize(dj) / T::of_usize(di);
    let sqrt_slope = slope.sqrt();
    // walk in units of 1/(di·dj) cells: v1 boundaries at (d+1)·dj,
    // v2 crossings at (l+1)·di
    let diff_sq = |a: &DVector<T>, b: &DVector<T>| {
        let mut acc = T::zero();
        for (x, y) in a.iter().zip(b.iter()) {
            let d = *x - sqrt_slope * *y;
            acc += d * d;
        }
        acc
    };
    let mut acc = T::zero();
    let (mut d, mut l, mut cur) = (0usize, 0usize, 0usize);
    while d < di && l < dj {
        let nb1 = (d + 1) * dj;
        let nb2 = (l + 1) * di;
        let next = nb1.min(nb2);
        acc += diff_sq(&v1[i1 + d], &v2[j1 + l]) * T::of_usize(next - cur);
        if nb1 == next {
            d += 1;
        }
        if nb2 == next {
            l += 1;
        }
        cur = next;
    }
    acc / (T::of_usize(dj) * tf)
}

/// Dynamic program over monotone PL grid paths: minimizes the discretized
/// ‖q₁ − (q₂∘γ)√γ′‖² with per-step increments of 1..=window on both axes.
/// Returns the optimal γ (knots on the grid) and the achieved energy.
pub fn dp_reparametrize<T: Scalar>(
    q1: &[AlgebraElement<T>],
    q2: &[AlgebraElement<T>],
    window: usize,
    horizontal: bool,
) -> Result<(Reparametrization<T>, T)> {
    if q1.len() != q2.len() {
        return Err(AlignmentError::GridMismatch(q1.len(), q2.len()));
    }
    let v1 = flatten_q(q1, horizontal);
    let v2 = flatten_q(q2, horizontal);
    dp_reparametrize_flat(&v1, &v2, window)
}

pub(crate) fn dp_reparametrize_flat<T: Scalar>(
    v1: &[DVector<T>],
    v2: &[DVector<T>],
    window: usize,
) -> Result<(Reparametrization<T>, T)> {
    let t = v1.len();
    assert!(t >= 1 && window >= 1);
    let n = t + 1;
    let inf = T::of_f64(f64::MAX);
    let mut cost = vec![inf; n * n];
    let mut parent = vec![(0usize, 0usize); n * n];
    cost[0] = T::zero();
    for i in 1..n {
        for j in 1..n {
            let mut best = inf;
            let mut best_parent = (0, 0);
            for k in 1..=window.min(i) {
                for l in 1..=window.min(j) {
                    let prev = cost[(i - k) * n + (j - l)];
                    if prev >= inf {
                        continue;
                    }
                    let cand = prev + dp_edge_cost(v1, v2, (i - k, j - l), (i, j));
                    if cand < best {
                        best = cand;
                        best_parent = (i - k, j - l);
                    }
                }
            }
            cost[i * n + j] = best;
            parent[i * n + j] = best_parent;
        }
    }
    let total = cost[n * n - 1];
    let mut path = vec![(t, t)];
    let mut node = (t, t);
    while node != (0, 0) {
        node = parent[node.0 * n + node.1];
        path.push(node);
    }
    path.reverse();
    let tf = T::of_usize(t);
    let knots = path.into_iter().map(|(i, j)| (T::of_usize(i) / tf, T::of_usize(j) / tf)).collect();
    Ok((Reparametrization::new(knots)?, total))
}

/// Decomposes [0,1] into the maximal intervals on which both q₁ and
/// (q₂∘γ)√γ′ are constant (piecewise-constant q's on a T-cell grid, PL γ):
/// returns (length, q₁ cell, q₂ cell, γ slope) per piece.
pub(crate) fn reparam_pieces<T: Scalar>(
    gamma: &Reparametrization<T>,
    t: usize,
) -> Vec<(T, usize, usize, T)> {
    let tf = T::of_usize(t);
    let mut cuts: Vec<T> = Vec::with_capacity(2 * t + gamma.knots().len());
    for i in 0..=t {
        cuts.push(T::of_usize(i) / tf);
    }
    for seg in gamma.knots().windows(2) {
        let (x0, y0) = seg[0];
        let (x1, y1) = seg[1];
        cuts.push(x0);
        let slope = (y1 - y0) / (x1 - x0);
        // x-positions where γ crosses the q₂ grid inside this segment
        let j_lo = (y0 * tf).ceil().to_usize().unwrap_or(0);
        let j_hi = (y1 * tf).floor().to_usize().unwrap_or(0).min(t);
        for j in j_lo..=j_hi {
            let x = x0 + (T::of_usize(j) / tf - y0) / slope;
            if x > x0 && x < x1 {
                cuts.push(x);
            }
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let eps = T::of_f64(1e-14);
    let mut pieces = Vec::with_capacity(cuts.len());
    let mut prev = T::zero();
    for &x in cuts.iter().skip(1) {
        if x - prev <= eps {
            continue;
        }
        let mid = (prev + x) * T::of_f64(0.5);
        let c1 = (mid * tf).floor().to_usize().unwrap_or(0).min(t - 1);
        let (value, slope) = gamma.eval_with_slope(mid);
        let c2 = (value * tf).floor().to_usize().unwrap_or(0).min(t - 1);
        pieces.push((x - prev, c1, c2, slope));
        prev = x;
    }
    pieces
}

/// The defining infimand of the quotient distances, evaluated exactly at
/// (y, γ): d²(α₁(0), α₂(0)y) (when `include_start_term`) plus the exact
/// integral ‖q₁ − y⁻¹(q₂∘γ)√γ′ y‖²_{L²} over the piecewise-constant data.
pub fn infimand<T: Scalar>(
    p1: &SrvPair<T>,
    p2: &SrvPair<T>,
    y: &RotationMatrix<T>,
    gamma: &Reparametrization<T>,
    include_start_term: bool,
) -> Result<T> {
    if p1.num_intervals() != p2.num_intervals() {
        return Err(AlignmentError::GridMismatch(p1.num_intervals(), p2.num_intervals()));
    }
    let p2y = k_action(p2, y)?;
    let mut acc = T::zero();
    for (len, c1, c2, slope) in reparam_pieces(gamma, p1.num_intervals()) {
        let diff = &p1.q[c1] - &p2y.q[c2].scale(slope.sqrt());
        acc += diff.norm() * diff.norm() * len;
    }
    if include_start_term {
        let d0 = crate::lie_group::geodesic_distance(&p1.start, &p2y.start)?;
        acc += d0 * d0;
    }
    Ok(acc)
}

/// Re-expresses q₁ and (q₂∘γ)√γ′ on their merged partition so that the
/// uniform-grid K-optimizer minimizes the exact integral: each piece value
/// is scaled by √(length·P) (P pieces), which turns the optimizer's
/// uniform 1/P quadrature into the true piece-length weights for every
/// inner product.
fn refine_for_k_step<T: Scalar>(
    p1: &SrvPair<T>,
    p2: &SrvPair<T>,
    gamma: &Reparametrization<T>,
) -> (SrvPair<T>, SrvPair<T>) {
    let pieces = reparam_pieces(gamma, p1.num_intervals());
    let pf = T::of_usize(pieces.len());
    let mut a = Vec::with_capacity(pieces.len());
    let mut b = Vec::with_capacity(pieces.len());
    for (len, c1, c2, slope) in pieces {
        let w = (len * pf).sqrt();
        a.push(p1.q[c1].scale(w));
        b.push(p2.q[c2].scale(slope.sqrt() * w));
    }
    (
        SrvPair { start: p1.start.clone(), q: a, horizontal: p1.horizontal },
        SrvPair { start: p2.start.clone(), q: b, horizontal: p2.horizontal },
    )
}

/// The optimizing (y, γ, g) triple of a quotient distance, with the
/// achieved cost (value of the defining infimand) and per-round costs of
/// the alternation.
#[derive(Debug, Clone)]
pub struct AlignmentResult<T: Scalar> {
    pub y: RotationMatrix<T>,
    pub gamma: Reparametrization<T>,
    /// Optimal rigid motion, for the mod-rotation quotients.
    pub g: Option<RotationMatrix<T>>,
    pub cost: T,
    /// Cost after every alternation round (including the initial K-only
    /// solve); non-increasing by construction.
    pub round_costs: Vec<T>,
    pub converged: bool,
}

fn alternate<T: Scalar>(
    p1: &SrvPair<T>,
    p2: &SrvPair<T>,
    cfg: &OptimizerConfig<T>,
    include_start_term: bool,
) -> Result<AlignmentResult<T>> {
    let plain = alternate_from(p1, p2, cfg, include_start_term, None)?;
    if include_start_term {
        return Ok(plain);
    }
    // The q-only landscape over (y, γ) is more multimodal than the
    // start-penalized one: the start term anchors y and often steers the
    // alternation into the globally better basin. Warm-start a second run
    // from that registration and keep whichever run achieves the lower
    // q-only cost; this also makes the mod-both distance never exceed the
    // shape distance, as the underlying infima require.
    let guide = alternate_from(p1, p2, cfg, true, None)?;
    let guided =
        alternate_from(p1, p2, cfg, false, Some((guide.y.clone(), guide.gamma.clone())))?;
    Ok(if guided.cost < plain.cost { guided } else { plain })
}

fn alternate_from<T: Scalar>(
    p1: &SrvPair<T>,
    p2: &SrvPair<T>,
    cfg: &OptimizerConfig<T>,
    include_start_term: bool,
    init: Option<(RotationMatrix<T>, Reparametrization<T>)>,
) -> Result<AlignmentResult<T>> {
    if p1.num_intervals() != p2.num_intervals() {
        return Err(AlignmentError::GridMismatch(p1.num_intervals(), p2.num_intervals()));
    }
    let (mut y, mut gamma, init_f, init_conv) = match init {
        None => {
            let m = minimize_over_k_impl(p1, p2, cfg, include_start_term, &[])?;
            (m.y, Reparametrization::identity(), m.f, m.converged)
        }
        Some((y0, gamma0)) => {
            // K-step at the supplied γ, seeded with the supplied y
            let (r1, r2) = refine_for_k_step(p1, p2, &gamma0);
            let m = minimize_over_k_impl(&r1, &r2, cfg, include_start_term, &[y0])?;
            (m.y, gamma0, m.f, m.converged)
        }
    };
    let mut cost = init_f.max(T::zero()).sqrt();
    let mut round_costs = vec![cost];
    let mut converged = init_conv;
    for _ in 0..MAX_ROUNDS {
        // γ-step: global DP against the conjugated q₂ (the K- and
        // Γ-actions commute, so the order of application is immaterial)
        let p2y = k_action(p2, &y)?;
        let (gamma_new, _) = dp_reparametrize(&p1.q, &p2y.q, cfg.dp_window, p2y.horizontal)?;
        // K-step: re-solve over K against the freshly reparametrized q₂
        // (expressed exactly on the merged partition), seeding with the
        // incumbent y so the cost cannot increase
        let (r1, r2) = refine_for_k_step(p1, p2, &gamma_new);
        let m = minimize_over_k_impl(&r1, &r2, cfg, include_start_term, &[y.clone()])?;
        let new_cost = m.f.max(T::zero()).sqrt();
        if new_cost > cost {
            // both sub-steps minimize the same functional, so this can
            // only be floating-point noise; keep the incumbent
            break;
        }
        y = m.y;
        gamma = gamma_new;
        converged = m.converged;
        round_costs.push(new_cost);
        let decreased = cost - new_cost;
        cost = new_cost;
        if decreased < T::of_f64(COST_DECREASE_TOL) {
            break;
        }
    }
    Ok(AlignmentResult { y, gamma, g: None, cost, round_costs, converged })
}

/// Optimal rigid motion once y (and γ) are fixed: the g ∈ G with
/// d(α₁(0), g·α₂(0)·y) = 0, i.e. g = α₁(0)·(α₂(0)y)⁻¹.
fn optimal_g<T: Scalar>(p1: &SrvPair<T>, p2: &SrvPair<T>, y: &RotationMatrix<T>) -> RotationMatrix<T> {
    p1.start.compose(&p2.start.compose(y).inverse())
}

/// Shape distance (mod reparametrization):
/// inf over y ∈ K, γ ∈ Γ of (d²(α₁(0), α₂(0)y) + ‖q₁ − y⁻¹(q₂,γ)y‖²)^½.
pub fn align_pairs_shape<T: Scalar>(
    p1: &SrvPair<T>,
    p2: &SrvPair<T>,
    cfg: &OptimizerConfig<T>,
) -> Result<AlignmentResult<T>> {
    alternate(p1, p2, cfg, true)
}

/// Distance mod rigid motion: inf over y ∈ K of ‖q₁ − y⁻¹q₂y‖; the start
/// term is annihilated by the closed-form g.
pub fn align_pairs_mod_rotation<T: Scalar>(
    p1: &SrvPair<T>,
    p2: &SrvPair<T>,
    cfg: &OptimizerConfig<T>,
) -> Result<AlignmentResult<T>> {
    let m = minimize_over_k_impl(p1, p2, cfg, false, &[])?;
    let g = optimal_g(p1, p2, &m.y);
    Ok(AlignmentResult {
        g: Some(g),
        gamma: Reparametrization::identity(),
        cost: m.f.max(T::zero()).sqrt(),
        round_costs: vec![m.f.max(T::zero()).sqrt()],
        converged: m.converged,
        y: m.y,
    })
}

/// Distance mod rigid motion and reparametrization:
/// inf over y ∈ K, γ ∈ Γ of ‖q₁ − y⁻¹(q₂,γ)y‖, then g as in the
/// rotation-only case.
pub fn align_pairs_mod_both<T: Scalar>(
    p1: &SrvPair<T>,
    p2: &SrvPair<T>,
    cfg: &OptimizerConfig<T>,
) -> Result<AlignmentResult<T>> {
    let mut out = alternate(p1, p2, cfg, false)?;
    out.g = Some(optimal_g(p1, p2, &out.y));
    Ok(out)
}

fn lift_pair<T: Scalar>(
    b1: &SphereCurve<T>,
    b2: &SphereCurve<T>,
) -> Result<(SrvPair<T>, SrvPair<T>)> {
    let basis = SubalgebraBasis::standard(b1.ambient_dim());
    Ok((lift_to_srv(b1, &basis)?, lift_to_srv(b2, &basis)?))
}

/// Shape distance between sphere curves.
pub fn distance_shape<T: Scalar>(
    b1: &SphereCurve<T>,
    b2: &SphereCurve<T>,
    cfg: &OptimizerConfig<T>,
) -> Result<AlignmentResult<T>> {
    let (p1, p2) = lift_pair(b1, b2)?;
    align_pairs_shape(&p1, &p2, cfg)
}

/// Distance mod rigid motion between sphere curves.
pub fn distance_mod_rotation<T: Scalar>(
    b1: &SphereCurve<T>,
    b2: &SphereCurve<T>,
    cfg: &OptimizerConfig<T>,
) -> Result<AlignmentResult<T>> {
    let (p1, p2) = lift_pair(b1, b2)?;
    align_pairs_mod_rotation(&p1, &p2, cfg)
}

/// Distance mod rigid motion and reparametrization between sphere curves.
pub fn distance_mod_both<T: Scalar>(
    b1: &SphereCurve<T>,
    b2: &SphereCurve<T>,
    cfg: &OptimizerConfig<T>,
) -> Result<AlignmentResult<T>> {
    let (p1, p2) = lift_pair(b1, b2)?;
    align_pairs_mod_both(&p1, &p2, cfg)
}
