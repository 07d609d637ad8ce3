//! Numerics for SO(n+1) with the trace metric ⟨x,y⟩ = tr(xᵗy), the
//! 𝔨 ⊕ 𝔨⊥ split induced by embedding SO(n) as the upper-left block,
//! and the closed-form "most efficient rotation" R_{p,q}.
//!
//! The flagship dimension is n+1 = 3 (curves on S²), which gets
//! closed-form Rodrigues exp/log. Other dimensions fall back to
//! scaling-and-squaring for exp and inverse scaling-and-squaring
//! (Denman–Beavers square roots plus a truncated series) for log.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::scalar::Scalar;

/// Tolerance for the rotation invariants AᵗA = I, det A = 1.
pub const ROTATION_TOL: f64 = 1e-10;
/// Window around θ = π (n+1 = 3) where the ill-conditioned asin branch
/// is replaced by axis extraction from the symmetric part.
const LOG_ROBUST_WINDOW: f64 = 1e-6;
/// Window around θ = π where the axis sign is genuinely ambiguous.
const LOG_AMBIGUOUS_WINDOW: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LieGroupError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("not a rotation matrix (invariant defect {defect:e})")]
    NotARotation { defect: f64 },
    #[error("rotation at the cut locus: log axis ambiguous")]
    AngleAmbiguity,
    #[error("element is not in the subgroup K (defect {defect:e})")]
    YNotInK { defect: f64 },
    #[error("antipodal points: no unique shortest rotation")]
    AntipodalPoints,
    #[error("matrix logarithm did not converge")]
    LogDivergence,
}

pub type Result<V> = std::result::Result<V, LieGroupError>;

fn invariant_tol<T: Scalar>() -> T {
    // 1e-10 at f64; loosened proportionally for narrower scalars.
    T::of_f64(ROTATION_TOL).max(T::default_epsilon() * T::of_f64(5e5))
}

/// Skew-symmetric matrix in 𝔰𝔬(n+1). Symmetrized on construction, so
/// X + Xᵗ = 0 holds exactly as stored.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement<T: Scalar> {
    m: DMatrix<T>,
}

impl<T: Scalar> AlgebraElement<T> {
    /// Skew-symmetrizes the input: (m − mᵗ)/2.
    pub fn from_matrix(m: DMatrix<T>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "algebra element must be square");
        let half = T::of_f64(0.5);
        let skew = (&m - m.transpose()) * half;
        Self { m: skew }
    }

    /// Trusts the caller that `m` is already exactly skew.
    pub(crate) fn from_skew_unchecked(m: DMatrix<T>) -> Self {
        Self { m }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { m: DMatrix::zeros(dim, dim) }
    }

    /// Basis element E_ij = e_i e_jᵗ − e_j e_iᵗ (i < j, zero-based).
    pub fn basis_element(dim: usize, i: usize, j: usize) -> Self {
        assert!(i < j && j < dim);
        let mut m = DMatrix::zeros(dim, dim);
        m[(i, j)] = T::one();
        m[(j, i)] = -T::one();
        Self { m }
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    /// Norm under the trace metric: √tr(xᵗx) (= Frobenius norm).
    pub fn norm(&self) -> T {
        self.m.norm()
    }

    pub fn scale(&self, s: T) -> Self {
        Self { m: &self.m * s }
    }

    pub fn is_zero(&self) -> bool {
        self.norm() == T::zero()
    }

    /// Lie bracket [x, y] = xy − yx.
    pub fn bracket(&self, other: &Self) -> Self {
        Self { m: &self.m * &other.m - &other.m * &self.m }
    }
}

impl<T: Scalar> std::ops::Add for &AlgebraElement<T> {
    type Output = AlgebraElement<T>;
    fn add(self, rhs: Self) -> AlgebraElement<T> {
        AlgebraElement { m: &self.m + &rhs.m }
    }
}

impl<T: Scalar> std::ops::Sub for &AlgebraElement<T> {
    type Output = AlgebraElement<T>;
    fn sub(self, rhs: Self) -> AlgebraElement<T> {
        AlgebraElement { m: &self.m - &rhs.m }
    }
}

impl<T: Scalar> std::ops::Neg for &AlgebraElement<T> {
    type Output = AlgebraElement<T>;
    fn neg(self) -> AlgebraElement<T> {
        AlgebraElement { m: -&self.m }
    }
}

/// Element of SO(n+1): AᵗA = I, det A = 1, each to `ROTATION_TOL`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationMatrix<T: Scalar> {
    m: DMatrix<T>,
}

impl<T: Scalar> RotationMatrix<T> {
    pub fn identity(dim: usize) -> Self {
        Self { m: DMatrix::identity(dim, dim) }
    }

    /// Validates the SO(n+1) invariants before accepting the matrix.
    pub fn from_matrix(m: DMatrix<T>) -> Result<Self> {
        let defect = rotation_defect(&m);
        if defect > invariant_tol::<T>() {
            return Err(LieGroupError::NotARotation { defect: defect.as_f64() });
        }
        Ok(Self { m })
    }

    /// Accepts a matrix produced by operations that preserve SO(n+1)
    /// analytically (products, exponentials of skew matrices).
    pub(crate) fn from_rotation_unchecked(m: DMatrix<T>) -> Self {
        Self { m }
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn transpose(&self) -> Self {
        Self { m: self.m.transpose() }
    }

    /// Inverse = transpose on SO(n+1).
    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    pub fn compose(&self, rhs: &Self) -> Self {
        Self { m: &self.m * &rhs.m }
    }

    pub fn apply(&self, v: &DVector<T>) -> DVector<T> {
        &self.m * v
    }

    /// Nearest rotation in the Frobenius sense (polar projection).
    /// Used to control drift after long product chains.
    pub fn renormalized(&self) -> Self {
        let svd = self.m.clone().svd(true, true);
        let u = svd.u.expect("svd with u");
        let vt = svd.v_t.expect("svd with v_t");
        let mut r = u * vt;
        if r.determinant() < T::zero() {
            // never expected for a drifted rotation; flip the last
            // singular direction to stay in SO(n+1)
            let dim = r.nrows();
            let mut flip = DMatrix::identity(dim, dim);
            flip[(dim - 1, dim - 1)] = -T::one();
            r *= flip;
        }
        Self { m: r }
    }

    pub fn defect(&self) -> T {
        rotation_defect(&self.m)
    }

    /// Deviation of `self` from the K-embedding (upper-left SO(n) block,
    /// last row/column = e_{n+1}).
    pub fn k_defect(&self) -> T {
        let dim = self.dim();
        let last = dim - 1;
        let mut d = (self.m[(last, last)] - T::one()).abs();
        for i in 0..last {
            d = d.max(self.m[(i, last)].abs()).max(self.m[(last, i)].abs());
        }
        d
    }

    /// Checks membership in K ⊂ SO(n+1) within 1e-9.
    pub fn check_in_k(&self) -> Result<()> {
        let d = self.k_defect();
        if d > T::of_f64(1e-9).max(T::default_epsilon() * T::of_f64(5e6)) {
            return Err(LieGroupError::YNotInK { defect: d.as_f64() });
        }
        Ok(())
    }
}

impl<T: Scalar> std::ops::Mul for &RotationMatrix<T> {
    type Output = RotationMatrix<T>;
    fn mul(self, rhs: Self) -> RotationMatrix<T> {
        self.compose(rhs)
    }
}

fn rotation_defect<T: Scalar>(m: &DMatrix<T>) -> T {
    let dim = m.nrows();
    let gram_defect = (m.transpose() * m - DMatrix::<T>::identity(dim, dim)).norm();
    let det_defect = (m.determinant() - T::one()).abs();
    gram_defect.max(det_defect)
}

/// Trace inner product on 𝔰𝔬(n+1): ⟨x, y⟩ = tr(xᵗy).
pub fn inner<T: Scalar>(x: &AlgebraElement<T>, y: &AlgebraElement<T>) -> Result<T> {
    if x.dim() != y.dim() {
        return Err(LieGroupError::DimensionMismatch(x.dim(), y.dim()));
    }
    Ok(x.m.dot(&y.m))
}

/// Orthogonal 𝔨 / 𝔨⊥ split of 𝔰𝔬(n+1) for the embedding A ↦ (A 0; 0 1).
/// 𝔨 = span{E_ij : i,j ≤ n}, 𝔨⊥ = span{E_i,n+1}; dim 𝔨 = n(n−1)/2, dim 𝔨⊥ = n.
#[derive(Debug, Clone)]
pub struct SubalgebraBasis<T: Scalar> {
    pub k_basis: Vec<AlgebraElement<T>>,
    pub kperp_basis: Vec<AlgebraElement<T>>,
}

impl<T: Scalar> SubalgebraBasis<T> {
    pub fn standard(dim: usize) -> Self {
        assert!(dim >= 2);
        let mut k_basis = Vec::new();
        for i in 0..dim - 1 {
            for j in i + 1..dim - 1 {
                k_basis.push(AlgebraElement::basis_element(dim, i, j));
            }
        }
        let kperp_basis =
            (0..dim - 1).map(|i| AlgebraElement::basis_element(dim, i, dim - 1)).collect();
        Self { k_basis, kperp_basis }
    }

    pub fn dim(&self) -> usize {
        if let Some(e) = self.k_basis.first() {
            e.dim()
        } else {
            self.kperp_basis.first().map_or(0, |e| e.dim())
        }
    }
}

/// Orthogonal projection of x onto 𝔨.
pub fn proj_k<T: Scalar>(x: &AlgebraElement<T>, basis: &SubalgebraBasis<T>) -> AlgebraElement<T> {
    project_onto(x, &basis.k_basis)
}

/// Orthogonal projection of x onto 𝔨⊥; proj_k + proj_kperp = identity.
pub fn proj_kperp<T: Scalar>(
    x: &AlgebraElement<T>,
    basis: &SubalgebraBasis<T>,
) -> AlgebraElement<T> {
    project_onto(x, &basis.kperp_basis)
}

fn project_onto<T: Scalar>(
    x: &AlgebraElement<T>,
    basis: &[AlgebraElement<T>],
) -> AlgebraElement<T> {
    let mut out = DMatrix::zeros(x.dim(), x.dim());
    for e in basis {
        let c = x.m.dot(&e.m) / e.m.dot(&e.m);
        out += &e.m * c;
    }
    AlgebraElement::from_skew_unchecked(out)
}

/// Ad-action of y ∈ K on the algebra: y⁻¹xy. Preserves skewness, the
/// trace norm, and the 𝔨 / 𝔨⊥ split.
pub fn conjugate<T: Scalar>(
    y: &RotationMatrix<T>,
    x: &AlgebraElement<T>,
) -> Result<AlgebraElement<T>> {
    if y.dim() != x.dim() {
        return Err(LieGroupError::DimensionMismatch(y.dim(), x.dim()));
    }
    y.check_in_k()?;
    let m = y.m.transpose() * &x.m * &y.m;
    // symmetrize away the O(eps) skewness drift of the product
    Ok(AlgebraElement::from_matrix(m))
}

/// Lie group / Riemannian exponential at the identity: v ↦ eᵛ.
pub fn group_exp<T: Scalar>(v: &AlgebraElement<T>) -> RotationMatrix<T> {
    if v.dim() == 3 {
        exp_rodrigues(v)
    } else {
        exp_series(v)
    }
}

/// Principal matrix logarithm on SO(n+1); smallest-norm preimage of exp.
pub struct LogResult<T: Scalar> {
    pub value: AlgebraElement<T>,
    /// True when the rotation is at the cut locus (angle π for n+1 = 3)
    /// and the axis sign is one consistent but arbitrary choice.
    pub ambiguous: bool,
}

pub fn group_log<T: Scalar>(a: &RotationMatrix<T>) -> Result<LogResult<T>> {
    let defect = a.defect();
    if defect > invariant_tol::<T>() {
        return Err(LieGroupError::NotARotation { defect: defect.as_f64() });
    }
    if a.dim() == 3 {
        Ok(log_so3(a))
    } else {
        log_general(a)
    }
}

/// Convenience for rotations known to be away from the cut locus.
pub fn group_log_strict<T: Scalar>(a: &RotationMatrix<T>) -> Result<AlgebraElement<T>> {
    let out = group_log(a)?;
    if out.ambiguous {
        return Err(LieGroupError::AngleAmbiguity);
    }
    Ok(out.value)
}

/// Geodesic distance on SO(n+1) under the trace metric:
/// d(a, b) = ‖log(a⁻¹b)‖.
pub fn geodesic_distance<T: Scalar>(a: &RotationMatrix<T>, b: &RotationMatrix<T>) -> Result<T> {
    let rel = a.inverse().compose(b);
    Ok(group_log(&rel)?.value.norm())
}

/// The most efficient rotation taking p to q:
/// R_{p,q} = (I − 2/|p+q|² (p+q)(p+q)ᵗ)(I − 2ppᵗ).
/// Closest rotation to I (trace metric) among all rotations with Rp = q.
pub fn efficient_rotation<T: Scalar>(p: &DVector<T>, q: &DVector<T>) -> Result<RotationMatrix<T>> {
    if p.len() != q.len() {
        return Err(LieGroupError::DimensionMismatch(p.len(), q.len()));
    }
    if T::one() + p.dot(q) <= T::of_f64(1e-12) {
        return Err(LieGroupError::AntipodalPoints);
    }
    let dim = p.len();
    let s = p + q;
    let two = T::of_f64(2.0);
    let refl_s = DMatrix::identity(dim, dim) - (&s * s.transpose()) * (two / s.norm_squared());
    let refl_p = DMatrix::identity(dim, dim) - (p * p.transpose()) * two;
    Ok(RotationMatrix::from_rotation_unchecked(refl_s * refl_p))
}

// ---- n+1 = 3 closed forms -------------------------------------------------

/// Axis vector (w₁,w₂,w₃) of a 3×3 skew matrix; ‖skew‖_F = √2 |w|.
fn so3_axis<T: Scalar>(v: &AlgebraElement<T>) -> [T; 3] {
    [v.m[(2, 1)], v.m[(0, 2)], v.m[(1, 0)]]
}

fn exp_rodrigues<T: Scalar>(v: &AlgebraElement<T>) -> RotationMatrix<T> {
    let w = so3_axis(v);
    let theta2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
    let theta = theta2.sqrt();
    // sinθ/θ and (1−cosθ)/θ², series-expanded for small θ
    let (c1, c2) = if theta < T::of_f64(1e-4) {
        let sixth = T::of_f64(1.0 / 6.0);
        let c1 = T::one() - theta2 * sixth + theta2 * theta2 * T::of_f64(1.0 / 120.0);
        let c2 = T::of_f64(0.5) - theta2 * T::of_f64(1.0 / 24.0) + theta2 * theta2 * T::of_f64(1.0 / 720.0);
        (c1, c2)
    } else {
        (theta.sin() / theta, (T::one() - theta.cos()) / theta2)
    };
    let m = DMatrix::identity(3, 3) + &v.m * c1 + &v.m * &v.m * c2;
    RotationMatrix::from_rotation_unchecked(m)
}

fn log_so3<T: Scalar>(a: &RotationMatrix<T>) -> LogResult<T> {
    let m = &a.m;
    let tr = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
    let cos_theta = ((tr - T::one()) * T::of_f64(0.5)).clamp(-T::one(), T::one());
    let theta = cos_theta.acos();
    let pi = T::pi();

    if (pi - theta) < T::of_f64(LOG_ROBUST_WINDOW) {
        // near θ = π the skew part is O(π−θ); extract the axis from the
        // symmetric part instead: (R + I)/2 → aaᵗ at θ = π
        let half = T::of_f64(0.5);
        let b = m * half + DMatrix::identity(3, 3) * half;
        let mut best = 0;
        for i in 1..3 {
            if b[(i, i)] > b[(best, best)] {
                best = i;
            }
        }
        let col = b.column(best);
        let mut axis = [col[0], col[1], col[2]];
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        for a in &mut axis {
            *a /= n;
        }
        // align the sign with the (small) skew part when it still carries
        // information; otherwise fix an arbitrary consistent choice
        let skew_axis = [
            (m[(2, 1)] - m[(1, 2)]) * half,
            (m[(0, 2)] - m[(2, 0)]) * half,
            (m[(1, 0)] - m[(0, 1)]) * half,
        ];
        let skew_norm =
            (skew_axis[0] * skew_axis[0] + skew_axis[1] * skew_axis[1] + skew_axis[2] * skew_axis[2])
                .sqrt();
        let ambiguous = (pi - theta) < T::of_f64(LOG_AMBIGUOUS_WINDOW);
        let dot = axis[0] * skew_axis[0] + axis[1] * skew_axis[1] + axis[2] * skew_axis[2];
        if skew_norm > T::of_f64(1e-12) {
            if dot < T::zero() {
                for a in &mut axis {
                    *a = -*a;
                }
            }
        } else {
            // canonical sign: first nonzero component positive
            let lead = if axis[0].abs() > T::of_f64(0.5) {
                axis[0]
            } else if axis[1].abs() > T::of_f64(0.5) {
                axis[1]
            } else {
                axis[2]
            };
            if lead < T::zero() {
                for a in &mut axis {
                    *a = -*a;
                }
            }
        }
        let mut out = DMatrix::zeros(3, 3);
        out[(2, 1)] = theta * axis[0];
        out[(1, 2)] = -theta * axis[0];
        out[(0, 2)] = theta * axis[1];
        out[(2, 0)] = -theta * axis[1];
        out[(1, 0)] = theta * axis[2];
        out[(0, 1)] = -theta * axis[2];
        return LogResult { value: AlgebraElement::from_skew_unchecked(out), ambiguous };
    }

    // factor θ/(2 sinθ), series-expanded for small θ
    let f = if theta < T::of_f64(1e-4) {
        let t2 = theta * theta;
        T::of_f64(0.5) + t2 * T::of_f64(1.0 / 12.0) + t2 * t2 * T::of_f64(7.0 / 720.0)
    } else {
        theta / (T::of_f64(2.0) * theta.sin())
    };
    let skew = (m - m.transpose()) * f;
    LogResult { value: AlgebraElement::from_skew_unchecked(skew), ambiguous: false }
}

// ---- general dimension fallbacks -----------------------------------------

fn exp_series<T: Scalar>(v: &AlgebraElement<T>) -> RotationMatrix<T> {
    let dim = v.dim();
    let norm = v.norm();
    let mut scalings = 0u32;
    let mut w = v.m.clone();
    let half = T::of_f64(0.5);
    let mut n = norm;
    while n > half && scalings < 60 {
        w *= half;
        n *= half;
        scalings += 1;
    }
    let mut acc = DMatrix::identity(dim, dim);
    let mut term = DMatrix::identity(dim, dim);
    for k in 1..=20usize {
        term = &term * &w / T::of_usize(k);
        acc += &term;
    }
    for _ in 0..scalings {
        acc = &acc * &acc;
    }
    RotationMatrix::from_rotation_unchecked(acc)
}

fn log_general<T: Scalar>(a: &RotationMatrix<T>) -> Result<LogResult<T>> {
    let dim = a.dim();
    let eye = DMatrix::<T>::identity(dim, dim);
    let mut m = a.m.clone();
    let mut scalings = 0u32;
    while (&m - &eye).norm() > T::of_f64(0.25) {
        if scalings >= 40 {
            return Err(LieGroupError::LogDivergence);
        }
        m = sqrtm_denman_beavers(&m)?;
        scalings += 1;
    }
    // log(I+E) = Σ (−1)^{k+1} Eᵏ/k
    let e = &m - &eye;
    let mut acc = DMatrix::zeros(dim, dim);
    let mut power = eye.clone();
    for k in 1..=30usize {
        power = &power * &e;
        let coeff = if k % 2 == 1 { T::one() } else { -T::one() } / T::of_usize(k);
        acc += &power * coeff;
    }
    acc *= T::of_usize(1 << scalings);
    Ok(LogResult { value: AlgebraElement::from_matrix(acc), ambiguous: false })
}

fn sqrtm_denman_beavers<T: Scalar>(a: &DMatrix<T>) -> Result<DMatrix<T>> {
    let dim = a.nrows();
    let half = T::of_f64(0.5);
    let mut y = a.clone();
    let mut z = DMatrix::<T>::identity(dim, dim);
    for _ in 0..60 {
        let yi = y.clone().try_inverse().ok_or(LieGroupError::LogDivergence)?;
        let zi = z.clone().try_inverse().ok_or(LieGroupError::LogDivergence)?;
        let y_next = (&y + zi) * half;
        let z_next = (&z + yi) * half;
        let delta = (&y_next - &y).norm();
        y = y_next;
        z = z_next;
        if delta < T::default_epsilon() * T::of_f64(100.0) {
            return Ok(y);
        }
    }
    Err(LieGroupError::LogDivergence)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type E = AlgebraElement<f64>;

    fn e(i: usize, j: usize) -> E {
        E::basis_element(3, i, j)
    }

    fn random_skew(rng: &mut impl Rng, dim: usize, scale: f64) -> E {
        let m = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-scale..scale));
        E::from_matrix(m)
    }

    fn random_rotation(rng: &mut impl Rng, dim: usize) -> RotationMatrix<f64> {
        group_exp(&random_skew(rng, dim, 1.0))
    }

    /// Taylor-series oracle for the matrix exponential, independent of
    /// the Rodrigues / scaling-and-squaring implementation path.
    fn exp_taylor_oracle(v: &E) -> DMatrix<f64> {
        let dim = v.dim();
        let mut acc = DMatrix::identity(dim, dim);
        let mut term = DMatrix::<f64>::identity(dim, dim);
        for k in 1..=60usize {
            term = &term * v.matrix() / k as f64;
            acc += &term;
        }
        acc
    }

    #[test]
    fn inner_on_elementary_basis() {
        assert_eq!(inner(&e(0, 1), &e(0, 1)).unwrap(), 2.0);
        assert_eq!(inner(&e(0, 1), &E::zeros(3)).unwrap(), 0.0);
        assert_eq!(inner(&e(0, 1), &e(0, 2)).unwrap(), 0.0);
    }

    #[test]
    fn inner_dimension_mismatch() {
        let x = E::zeros(3);
        let y = E::zeros(4);
        assert!(matches!(inner(&x, &y), Err(LieGroupError::DimensionMismatch(3, 4))));
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let r = group_exp(&E::zeros(3));
        assert_relative_eq!(r.matrix(), &DMatrix::identity(3, 3), epsilon = 1e-15);
    }

    #[test]
    fn exp_of_planar_rotation_matches_closed_form() {
        let theta = 0.7;
        let r = group_exp(&e(0, 1).scale(theta));
        let expected = DMatrix::from_row_slice(
            3,
            3,
            &[
                theta.cos(),
                theta.sin(),
                0.0,
                -theta.sin(),
                theta.cos(),
                0.0,
                0.0,
                0.0,
                1.0,
            ],
        );
        assert_relative_eq!(r.matrix(), &expected, epsilon = 1e-14);
    }

    #[test]
    fn exp_matches_series_oracle() {
        let v = e(0, 2).scale(std::f64::consts::PI);
        let r = group_exp(&v);
        assert_relative_eq!(r.matrix(), &exp_taylor_oracle(&v), epsilon = 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let v = random_skew(&mut rng, 3, 1.5);
            assert_relative_eq!(group_exp(&v).matrix(), &exp_taylor_oracle(&v), epsilon = 1e-12);
        }
    }

    #[test]
    fn exp_matches_series_oracle_so4() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let v = random_skew(&mut rng, 4, 1.2);
            let r = group_exp(&v);
            assert!(r.defect() < 1e-12);
            assert_relative_eq!(r.matrix(), &exp_taylor_oracle(&v), epsilon = 1e-11);
        }
    }

    #[test]
    fn log_of_identity_is_zero() {
        let out = group_log(&RotationMatrix::<f64>::identity(3)).unwrap();
        assert!(!out.ambiguous);
        assert_eq!(out.value.norm(), 0.0);
    }

    #[test]
    fn log_exp_round_trip() {
        let v = e(0, 1).scale(0.3);
        let back = group_log_strict(&group_exp(&v)).unwrap();
        assert_relative_eq!(back.matrix(), v.matrix(), epsilon = 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            // ‖v‖ < π√2 keeps the rotation below the cut locus
            let mut v = random_skew(&mut rng, 3, 1.0);
            let max = std::f64::consts::PI * std::f64::consts::SQRT_2 * 0.98;
            if v.norm() >= max {
                v = v.scale(max / v.norm());
            }
            let back = group_log_strict(&group_exp(&v)).unwrap();
            assert_relative_eq!(back.matrix(), v.matrix(), epsilon = 1e-10);
        }
    }

    #[test]
    fn log_round_trip_so4() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10 {
            let v = random_skew(&mut rng, 4, 0.8);
            let back = group_log(&group_exp(&v)).unwrap().value;
            assert_relative_eq!(back.matrix(), v.matrix(), epsilon = 1e-9);
        }
    }

    /// Quaternion-based oracle for the SO(3) log: rotation by `angle`
    /// about `axis`, recovered via half-angle arithmetic.
    fn axis_angle_rotation(axis: [f64; 3], angle: f64) -> RotationMatrix<f64> {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let mut m = DMatrix::zeros(3, 3);
        m[(2, 1)] = angle * axis[0] / n;
        m[(1, 2)] = -angle * axis[0] / n;
        m[(0, 2)] = angle * axis[1] / n;
        m[(2, 0)] = -angle * axis[1] / n;
        m[(1, 0)] = angle * axis[2] / n;
        m[(0, 1)] = -angle * axis[2] / n;
        group_exp(&E::from_skew_unchecked(m))
    }

    #[test]
    fn log_near_pi_matches_quaternion_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let axis = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let angle = 3.1;
            let r = axis_angle_rotation(axis, angle);
            let out = group_log(&r).unwrap();
            assert!(!out.ambiguous);
            // oracle: quaternion components from the half angle
            let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
            let w = so3_axis(&out.value);
            for k in 0..3 {
                assert_relative_eq!(w[k], angle * axis[k] / n, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn log_at_pi_is_flagged_and_consistent() {
        let r = axis_angle_rotation([0.0, 1.0, 0.0], std::f64::consts::PI);
        let out = group_log(&r).unwrap();
        assert!(out.ambiguous);
        // a valid preimage regardless of sign choice
        let back = group_exp(&out.value);
        assert_relative_eq!(back.matrix(), r.matrix(), epsilon = 1e-9);
        assert_relative_eq!(out.value.norm(), std::f64::consts::PI * std::f64::consts::SQRT_2, epsilon = 1e-8);
    }

    #[test]
    fn log_rejects_non_rotation() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let r = RotationMatrix { m };
        assert!(matches!(group_log(&r), Err(LieGroupError::NotARotation { .. })));
    }

    #[test]
    fn projections_split_the_algebra() {
        let basis = SubalgebraBasis::<f64>::standard(3);
        assert_eq!(basis.k_basis.len(), 1);
        assert_eq!(basis.kperp_basis.len(), 2);

        assert_relative_eq!(proj_k(&e(0, 1), &basis).matrix(), e(0, 1).matrix());
        assert_eq!(proj_k(&e(0, 2), &basis).norm(), 0.0);
        let x = &e(0, 1) + &e(1, 2).scale(2.0);
        assert_relative_eq!(proj_k(&x, &basis).matrix(), e(0, 1).matrix(), epsilon = 1e-15);

        // idempotent, orthogonal, summing to the identity on random input
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let x = random_skew(&mut rng, 4, 1.0);
            let basis4 = SubalgebraBasis::<f64>::standard(4);
            let pk = proj_k(&x, &basis4);
            let pp = proj_kperp(&x, &basis4);
            assert_relative_eq!((&pk + &pp).matrix(), x.matrix(), epsilon = 1e-13);
            assert_relative_eq!(proj_k(&pk, &basis4).matrix(), pk.matrix(), epsilon = 1e-13);
            assert!(inner(&pk, &pp).unwrap().abs() < 1e-13);
        }
    }

    #[test]
    fn conjugate_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let basis = SubalgebraBasis::<f64>::standard(3);
        let x = random_skew(&mut rng, 3, 1.0);
        let id = RotationMatrix::identity(3);
        assert_relative_eq!(conjugate(&id, &x).unwrap().matrix(), x.matrix());

        for _ in 0..20 {
            let y = group_exp(&e(0, 1).scale(rng.gen_range(-3.0..3.0)));
            let x = proj_kperp(&random_skew(&mut rng, 3, 1.0), &basis);
            let c = conjugate(&y, &x).unwrap();
            assert_relative_eq!(c.norm(), x.norm(), epsilon = 1e-12);
            assert!(proj_k(&c, &basis).norm() < 1e-12);
        }
    }

    #[test]
    fn conjugate_rejects_non_k_element() {
        let y = group_exp(&e(0, 2).scale(0.5));
        let x = e(0, 1);
        assert!(matches!(conjugate(&y, &x), Err(LieGroupError::YNotInK { .. })));
    }

    #[test]
    fn exp_commutes_with_conjugation() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        for _ in 0..10 {
            let y = group_exp(&e(0, 1).scale(rng.gen_range(-3.0..3.0)));
            let v = random_skew(&mut rng, 3, 1.0);
            let lhs = group_exp(&conjugate(&y, &v).unwrap());
            let rhs = y.inverse().compose(&group_exp(&v)).compose(&y);
            assert_relative_eq!(lhs.matrix(), rhs.matrix(), epsilon = 1e-12);
        }
    }

    fn random_unit(rng: &mut impl Rng, dim: usize) -> DVector<f64> {
        loop {
            let v = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
            let n = v.norm();
            if n > 1e-3 {
                return v / n;
            }
        }
    }

    #[test]
    fn efficient_rotation_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let p = random_unit(&mut rng, 3);
        let r = efficient_rotation(&p, &p).unwrap();
        assert_relative_eq!(r.matrix(), &DMatrix::identity(3, 3), epsilon = 1e-14);
    }

    #[test]
    fn efficient_rotation_maps_p_to_q() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..30 {
            let p = random_unit(&mut rng, 3);
            let q = random_unit(&mut rng, 3);
            let r = efficient_rotation(&p, &q).unwrap();
            assert!(r.defect() < 1e-12);
            assert_relative_eq!(r.apply(&p), q, epsilon = 1e-12);
        }
    }

    #[test]
    fn efficient_rotation_rejects_antipodal() {
        let p = DVector::from_row_slice(&[0.0, 0.0, 1.0]);
        let q = DVector::from_row_slice(&[0.0, 0.0, -1.0]);
        assert!(matches!(efficient_rotation(&p, &q), Err(LieGroupError::AntipodalPoints)));
    }

    #[test]
    fn efficient_rotation_angle_formula() {
        // d(I, R_{p,q}) = √2 · arccos(p·q)
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        for _ in 0..30 {
            let p = random_unit(&mut rng, 3);
            let q = random_unit(&mut rng, 3);
            if 1.0 + p.dot(&q) < 1e-6 {
                continue;
            }
            let r = efficient_rotation(&p, &q).unwrap();
            let d = group_log(&r).unwrap().value.norm();
            let expected = std::f64::consts::SQRT_2 * p.dot(&q).clamp(-1.0, 1.0).acos();
            assert_relative_eq!(d, expected, epsilon = 1e-8);
        }
    }

    #[test]
    fn efficient_rotation_is_minimal_over_stabilizer_coset() {
        // grid oracle: every rotation with Rp = q is R_{p,q}·exp(s·Ẑ_p)
        // for Ẑ_p generating the stabilizer of p; sweep s
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..5 {
            let p = random_unit(&mut rng, 3);
            let q = random_unit(&mut rng, 3);
            let r = efficient_rotation(&p, &q).unwrap();
            let r_norm = group_log(&r).unwrap().value.norm();
            // stabilizer generator: rotation about p
            let mut z = DMatrix::zeros(3, 3);
            z[(2, 1)] = p[0];
            z[(1, 2)] = -p[0];
            z[(0, 2)] = p[1];
            z[(2, 0)] = -p[1];
            z[(1, 0)] = p[2];
            z[(0, 1)] = -p[2];
            let z = E::from_skew_unchecked(z);
            for k in 1..100 {
                let s = -3.0 + 6.0 * (k as f64) / 100.0;
                let other = r.compose(&group_exp(&z.scale(s)));
                assert_relative_eq!(other.apply(&p), q, epsilon = 1e-10);
                let other_norm = group_log(&other).unwrap().value.norm();
                assert!(r_norm <= other_norm + 1e-8);
            }
        }
    }

    #[test]
    fn renormalized_projects_back_to_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut r = random_rotation(&mut rng, 3);
        // contaminate with drift
        let noise = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1e-6..1e-6));
        r.m += noise;
        let clean = r.renormalized();
        assert!(clean.defect() < 1e-12);
        assert!((clean.matrix() - r.matrix()).norm() < 1e-5);
    }
}
