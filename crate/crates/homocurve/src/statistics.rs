//! Ensemble statistics in the quotient spaces: Karcher means, tangent PCA
//! in the linearized chart at the mean, pairwise distance matrices, and
//! classical multidimensional scaling.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use crate::alignment::{
    align_pairs_mod_both, align_pairs_mod_rotation, align_pairs_shape, AlignmentError,
};
use crate::homogeneous::{
    distance_m, k_action, lift_to_srv, minimize_over_k, project_pi, HomogeneousError,
    OptimizerConfig, SphereCurve,
};
use crate::lie_group::{
    group_exp, group_log, LieGroupError, RotationMatrix, SubalgebraBasis,
};
use crate::scalar::Scalar;
use crate::srv_core::{
    act_group, act_reparam, q_inverse, SrvError, SrvPair, TangentVector,
};

/// Iteration caps and stopping thresholds for the Karcher mean.
const MEAN_MAX_ITERS: usize = 50;
const MEAN_OBJECTIVE_TOL: f64 = 1e-8;
const FRECHET_MAX_ITERS: usize = 100;
const FRECHET_TOL: f64 = 1e-13;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("ensemble is empty")]
    EmptyEnsemble,
    #[error("curves have differing sample counts: {0} vs {1}")]
    MixedGrids(usize, usize),
    #[error("principal component {index} out of range ({available} available)")]
    ComponentOutOfRange { index: usize, available: usize },
    #[error("unknown quotient mode {0:?} (expected param|shape|rot|shape-rot)")]
    UnknownMode(String),
    #[error(transparent)]
    Alignment(#[from] AlignmentError),
    #[error(transparent)]
    Homogeneous(#[from] HomogeneousError),
    #[error(transparent)]
    Srv(#[from] SrvError),
    #[error(transparent)]
    Lie(#[from] LieGroupError),
}

pub type Result<V> = std::result::Result<V, StatsError>;

/// Which distance/alignment is used throughout an analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuotientMode {
    /// No alignment: the product distance on M.
    Parametrized,
    /// Mod reparametrization.
    Shape,
    /// Mod rigid motion.
    ModRotation,
    /// Mod rigid motion and reparametrization.
    ShapeModRotation,
}

impl FromStr for QuotientMode {
    type Err = StatsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "param" | "parametrized" => Ok(Self::Parametrized),
            "shape" => Ok(Self::Shape),
            "rot" | "mod-rotation" => Ok(Self::ModRotation),
            "shape-rot" | "shape-mod-rotation" => Ok(Self::ShapeModRotation),
            other => Err(StatsError::UnknownMode(other.to_string())),
        }
    }
}

impl fmt::Display for QuotientMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Parametrized => "param",
            Self::Shape => "shape",
            Self::ModRotation => "rot",
            Self::ShapeModRotation => "shape-rot",
        })
    }
}

/// A family of sphere curves on a common grid together with the quotient
/// mode used for every distance and alignment.
#[derive(Debug, Clone)]
pub struct Ensemble<T: Scalar> {
    curves: Vec<SphereCurve<T>>,
    pub mode: QuotientMode,
}

impl<T: Scalar> Ensemble<T> {
    pub fn new(curves: Vec<SphereCurve<T>>, mode: QuotientMode) -> Result<Self> {
        let first = curves.first().ok_or(StatsError::EmptyEnsemble)?;
        let t = first.num_intervals();
        for c in &curves {
            if c.num_intervals() != t {
                return Err(StatsError::MixedGrids(t, c.num_intervals()));
            }
        }
        Ok(Self { curves, mode })
    }

    pub fn curves(&self) -> &[SphereCurve<T>] {
        &self.curves
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }
}

/// Quotient distance between two curves under `mode`.
pub fn quotient_distance<T: Scalar>(
    b1: &SphereCurve<T>,
    b2: &SphereCurve<T>,
    mode: QuotientMode,
    cfg: &OptimizerConfig<T>,
) -> Result<T> {
    Ok(match mode {
        QuotientMode::Parametrized => distance_m(b1, b2, cfg)?,
        QuotientMode::Shape => crate::alignment::distance_shape(b1, b2, cfg)?.cost,
        QuotientMode::ModRotation => crate::alignment::distance_mod_rotation(b1, b2, cfg)?.cost,
        QuotientMode::ShapeModRotation => crate::alignment::distance_mod_both(b1, b2, cfg)?.cost,
    })
}

/// Aligns `p` onto `reference` per the mode and returns the moved pair
/// together with the achieved quotient distance.
pub fn aligned_to<T: Scalar>(
    reference: &SrvPair<T>,
    p: &SrvPair<T>,
    mode: QuotientMode,
    cfg: &OptimizerConfig<T>,
) -> Result<(SrvPair<T>, T)> {
    match mode {
        QuotientMode::Parametrized => {
            // the K-fiber ambiguity of the lift is part of the metric on
            // M even before quotienting by Γ or G
            let m = minimize_over_k(reference, p, cfg)?;
            Ok((k_action(p, &m.y)?, m.f.max(T::zero()).sqrt()))
        }
        QuotientMode::Shape => {
            let r = align_pairs_shape(reference, p, cfg)?;
            Ok((k_action(&act_reparam(p, &r.gamma), &r.y)?, r.cost))
        }
        QuotientMode::ModRotation => {
            let r = align_pairs_mod_rotation(reference, p, cfg)?;
            let moved = act_group(&r.g.expect("rotation mode returns g"), &k_action(p, &r.y)?);
            Ok((moved, r.cost))
        }
        QuotientMode::ShapeModRotation => {
            let r = align_pairs_mod_both(reference, p, cfg)?;
            let moved = act_group(
                &r.g.expect("rotation mode returns g"),
                &k_action(&act_reparam(p, &r.gamma), &r.y)?,
            );
            Ok((moved, r.cost))
        }
    }
}

/// Fréchet mean of rotations by fixed-point iteration on the group log.
fn frechet_mean_rotations<T: Scalar>(starts: &[RotationMatrix<T>]) -> Result<RotationMatrix<T>> {
    let mut m = starts[0].clone();
    let n = T::of_usize(starts.len());
    for _ in 0..FRECHET_MAX_ITERS {
        let mut avg = crate::lie_group::AlgebraElement::zeros(m.dim());
        for s in starts {
            let log = group_log(&m.inverse().compose(s))?;
            avg = &avg + &log.value;
        }
        let step = avg.scale(T::one() / n);
        m = m.compose(&group_exp(&step));
        if step.norm() < T::of_f64(FRECHET_TOL) {
            break;
        }
    }
    Ok(m)
}

/// Karcher mean with diagnostics: the mean curve, its Q-representation,
/// the Fréchet objective after every iteration, and a convergence flag.
#[derive(Debug, Clone)]
pub struct KarcherMean<T: Scalar> {
    pub curve: SphereCurve<T>,
    pub pair: SrvPair<T>,
    /// Σᵢ d²(mean, βᵢ) after each iteration (non-increasing).
    pub objectives: Vec<T>,
    pub converged: bool,
}

/// Iterative Karcher mean: medoid initialization, then align-to-mean /
/// average-in-the-flat-representation until the Fréchet objective stalls.
pub fn karcher_mean<T: Scalar>(
    ens: &Ensemble<T>,
    cfg: &OptimizerConfig<T>,
) -> Result<KarcherMean<T>> {
    if ens.is_empty() {
        return Err(StatsError::EmptyEnsemble);
    }
    let basis = SubalgebraBasis::standard(ens.curves[0].ambient_dim());
    let pairs: Vec<SrvPair<T>> = ens
        .curves
        .iter()
        .map(|b| lift_to_srv(b, &basis))
        .collect::<std::result::Result<_, _>>()?;
    let n = pairs.len();

    // medoid initialization: the member minimizing the sum of squared
    // distances to all others
    let medoid = if n == 1 {
        0
    } else {
        let sums: Vec<(usize, T)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut acc = T::zero();
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let d = aligned_to(&pairs[i], &pairs[j], ens.mode, cfg)
                        .map(|(_, d)| d)
                        .unwrap_or_else(|_| T::of_f64(f64::MAX));
                    acc += d * d;
                }
                (i, acc)
            })
            .collect();
        sums.iter().min_by(|a, b| a.1.partial_cmp(&b.1).unwrap()).unwrap().0
    };

    let mut mean_pair = pairs[medoid].clone();
    let mut objectives: Vec<T> = Vec::new();
    let mut converged = false;
    for _ in 0..MEAN_MAX_ITERS {
        let aligned: Vec<(SrvPair<T>, T)> = pairs
            .par_iter()
            .map(|p| aligned_to(&mean_pair, p, ens.mode, cfg))
            .collect::<Result<_>>()?;
        let objective = aligned.iter().map(|(_, d)| *d * *d).fold(T::zero(), |a, b| a + b);
        let done = objectives
            .last()
            .is_some_and(|prev| *prev - objective < T::of_f64(MEAN_OBJECTIVE_TOL));
        objectives.push(objective);
        if done {
            converged = true;
            break;
        }
        let starts: Vec<RotationMatrix<T>> = aligned.iter().map(|(p, _)| p.start.clone()).collect();
        let start = frechet_mean_rotations(&starts)?;
        let intervals = mean_pair.num_intervals();
        let mut q = vec![crate::lie_group::AlgebraElement::zeros(mean_pair.dim()); intervals];
        for (p, _) in &aligned {
            for (acc, v) in q.iter_mut().zip(&p.q) {
                *acc = &*acc + v;
            }
        }
        let inv_n = T::one() / T::of_usize(n);
        for acc in &mut q {
            *acc = acc.scale(inv_n);
        }
        let horizontal = aligned.iter().all(|(p, _)| p.horizontal);
        mean_pair = SrvPair { start, q, horizontal };
    }
    let curve = project_pi(&q_inverse(&mean_pair))?;
    Ok(KarcherMean { curve, pair: mean_pair, objectives, converged })
}

/// Tangent PCA at a mean: eigenvalues (descending), the orthonormal
/// principal directions in the linearized (𝔤 × L²) chart, and the chart
/// base point.
#[derive(Debug, Clone)]
pub struct PcaResult<T: Scalar> {
    pub mean: SphereCurve<T>,
    /// Q-representation of the mean; base point of the chart.
    pub mean_pair: SrvPair<T>,
    /// All N eigenvalues of the empirical covariance, descending.
    pub eigenvalues: Vec<T>,
    /// Unit directions for the numerically positive eigenvalues.
    pub directions: Vec<TangentVector<T>>,
}

/// Shooting vectors of every ensemble member at the mean, in the chart.
pub(crate) fn shooting_vectors<T: Scalar>(
    ens: &Ensemble<T>,
    mean_pair: &SrvPair<T>,
    cfg: &OptimizerConfig<T>,
) -> Result<Vec<TangentVector<T>>> {
    let basis = SubalgebraBasis::standard(ens.curves[0].ambient_dim());
    ens.curves
        .par_iter()
        .map(|b| {
            let p = lift_to_srv(b, &basis)?;
            let (aligned, _) = aligned_to(mean_pair, &p, ens.mode, cfg)?;
            let at_start = group_log(&mean_pair.start.inverse().compose(&aligned.start))?.value;
            let dq = aligned.q.iter().zip(&mean_pair.q).map(|(a, m)| a - m).collect();
            Ok(TangentVector { at_start, dq })
        })
        .collect()
}

/// PCA of the shooting vectors under the product inner product, via the
/// Gram matrix (covariance and Gram share spectra up to the 1/N factor).
pub fn tangent_pca<T: Scalar>(
    ens: &Ensemble<T>,
    mean: &SphereCurve<T>,
    cfg: &OptimizerConfig<T>,
) -> Result<PcaResult<T>> {
    let basis = SubalgebraBasis::standard(ens.curves[0].ambient_dim());
    let mean_pair = lift_to_srv(mean, &basis)?;
    let w = shooting_vectors(ens, &mean_pair, cfg)?;
    let n = w.len();
    let mut gram = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = w[i].inner(&w[j])?;
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let n_t = T::of_usize(n);
    let eigenvalues: Vec<T> = order.iter().map(|&k| eig.eigenvalues[k] / n_t).collect();
    let g_max = eig.eigenvalues[order[0]].max(T::zero());
    // eigenvalues at the alignment/mean tolerance floor are pure noise
    // (e.g. the Σwᵢ ≈ 0 null mode at a Karcher mean): normalizing such a
    // direction divides rounding error of the dominant modes by a nearly
    // vanishing norm, so treat them as rank-deficient
    let cutoff = T::of_f64(1e-9) * g_max.max(T::one());
    let mut directions = Vec::new();
    for &k in &order {
        let g = eig.eigenvalues[k];
        if g <= cutoff {
            break;
        }
        let coeffs = eig.eigenvectors.column(k);
        let mut dir = TangentVector::zeros(mean_pair.dim(), mean_pair.num_intervals());
        for (i, wi) in w.iter().enumerate() {
            dir = dir.add(&wi.scale(coeffs[i]));
        }
        directions.push(dir.scale(T::one() / g.sqrt()));
    }
    Ok(PcaResult { mean: mean.clone(), mean_pair, eigenvalues, directions })
}

/// Curves along the k-th principal direction at `frames` equispaced
/// parameters s ∈ [−spread·√λₖ, +spread·√λₖ].
pub fn principal_geodesic<T: Scalar>(
    res: &PcaResult<T>,
    component: usize,
    spread: T,
    frames: usize,
) -> Result<Vec<SphereCurve<T>>> {
    if component >= res.directions.len() {
        return Err(StatsError::ComponentOutOfRange {
            index: component,
            available: res.directions.len(),
        });
    }
    let dir = &res.directions[component];
    let half = spread * res.eigenvalues[component].max(T::zero()).sqrt();
    let mut out = Vec::with_capacity(frames.max(1));
    let denom = T::of_usize(frames.max(2) - 1);
    for f in 0..frames.max(1) {
        let s = if frames <= 1 {
            T::zero()
        } else {
            -half + T::of_usize(2 * f) * half / denom
        };
        let start = res.mean_pair.start.compose(&group_exp(&dir.at_start.scale(s)));
        let q = res
            .mean_pair
            .q
            .iter()
            .zip(&dir.dq)
            .map(|(m, d)| m + &d.scale(s))
            .collect();
        let pair = SrvPair { start, q, horizontal: false };
        out.push(project_pi(&q_inverse(&pair))?);
    }
    Ok(out)
}

/// A pairwise distance computation that failed; the matrix entry is NaN.
#[derive(Debug, Clone)]
pub struct PairFailure {
    pub i: usize,
    pub j: usize,
    pub message: String,
}

/// Symmetric matrix of pairwise quotient distances with zero diagonal.
#[derive(Debug, Clone)]
pub struct DistanceMatrix<T: Scalar> {
    pub data: DMatrix<T>,
    pub failures: Vec<PairFailure>,
}

/// Total order on curves by sample bytes, for canonical pair ordering.
fn curve_key<T: Scalar>(c: &SphereCurve<T>) -> Vec<u64> {
    c.samples()
        .iter()
        .flat_map(|s| s.iter().map(|x| x.as_f64().to_bits()))
        .collect()
}

/// All pairwise distances under the ensemble's mode, one solve per
/// unordered pair, pairs evaluated in parallel.
pub fn distance_matrix<T: Scalar>(
    ens: &Ensemble<T>,
    cfg: &OptimizerConfig<T>,
) -> Result<DistanceMatrix<T>> {
    if ens.is_empty() {
        return Err(StatsError::EmptyEnsemble);
    }
    let n = ens.len();
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            pairs.push((i, j));
        }
    }
    let results: Vec<(usize, usize, std::result::Result<T, String>)> = pairs
        .into_par_iter()
        .map(|(i, j)| {
            // canonicalize the argument order by curve content so the
            // matrix is an exact function of the unordered curve pair,
            // independent of ensemble ordering
            let (a, b) = (&ens.curves[i], &ens.curves[j]);
            let (a, b) = if curve_key(a) <= curve_key(b) { (a, b) } else { (b, a) };
            let r = quotient_distance(a, b, ens.mode, cfg).map_err(|e| e.to_string());
            (i, j, r)
        })
        .collect();
    let mut data = DMatrix::zeros(n, n);
    let mut failures = Vec::new();
    for (i, j, r) in results {
        match r {
            Ok(d) => {
                data[(i, j)] = d;
                data[(j, i)] = d;
            }
            Err(message) => {
                data[(i, j)] = T::of_f64(f64::NAN);
                data[(j, i)] = T::of_f64(f64::NAN);
                failures.push(PairFailure { i, j, message });
            }
        }
    }
    Ok(DistanceMatrix { data, failures })
}

/// Classical (Torgerson) MDS embedding.
#[derive(Debug, Clone)]
pub struct MdsResult<T: Scalar> {
    /// One coordinate vector of length `dims` per input point.
    pub coordinates: Vec<DVector<T>>,
    /// Eigenvalues of the doubly centered matrix, descending.
    pub eigenvalues: Vec<T>,
    /// True when fewer positive eigenvalues than requested dimensions
    /// existed and coordinates were zero-padded.
    pub padded: bool,
}

/// Double-centers −½·D∘D and embeds via the top nonnegative eigenpairs.
/// Negative eigenvalues (non-Euclidean D) are truncated at zero.
pub fn classical_mds<T: Scalar>(d: &DMatrix<T>, dims: usize) -> MdsResult<T> {
    let n = d.nrows();
    let sq = d.map(|x| x * x);
    let inv_n = T::one() / T::of_usize(n);
    let row_means: Vec<T> = (0..n).map(|i| sq.row(i).sum() * inv_n).collect();
    let total = row_means.iter().fold(T::zero(), |a, &b| a + b) * inv_n;
    let half = T::of_f64(0.5);
    let b = DMatrix::from_fn(n, n, |i, j| {
        -half * (sq[(i, j)] - row_means[i] - row_means[j] + total)
    });
    let eig = b.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let eigenvalues: Vec<T> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut coordinates = vec![DVector::zeros(dims); n];
    let mut used = 0;
    for (axis, &k) in order.iter().take(dims).enumerate() {
        let lam = eig.eigenvalues[k];
        if lam <= T::zero() {
            break;
        }
        let scale = lam.sqrt();
        for i in 0..n {
            coordinates[i][axis] = eig.eigenvectors[(i, k)] * scale;
        }
        used += 1;
    }
    MdsResult { coordinates, eigenvalues, padded: used < dims }
}
