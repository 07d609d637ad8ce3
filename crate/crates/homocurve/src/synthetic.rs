//! Seeded generators for synthetic sphere curves, reparametrizations and
//! track ensembles. Used by the test suites and the self-check verb.

use rand::Rng;

use crate::alignment::Reparametrization;
use crate::homogeneous::{north_pole, SphereCurve};
use crate::lie_group::{group_exp, AlgebraElement};
use crate::Real;

/// Smooth random curve on S²: β(t) = exp(V(t))·n with V a low-frequency
/// trigonometric combination of skew matrices. Unit samples by construction.
pub fn random_sphere_curve(
    rng: &mut impl Rng,
    intervals: usize,
    amplitude: Real,
) -> SphereCurve<Real> {
    let coeffs: Vec<(AlgebraElement<Real>, AlgebraElement<Real>)> = (0..3)
        .map(|_| (random_skew(rng, amplitude), random_skew(rng, amplitude * 0.5)))
        .collect();
    let drift = random_skew(rng, amplitude);
    let n = north_pole(3);
    let samples = (0..=intervals)
        .map(|i| {
            let t = i as Real / intervals as Real;
            let mut v = drift.scale(t);
            for (m, (a, b)) in coeffs.iter().enumerate() {
                let w = 2.0 * std::f64::consts::PI * (m + 1) as Real * t;
                v = &v + &(&a.scale(w.cos() / (m + 1) as Real) + &b.scale(w.sin() / (m + 1) as Real));
            }
            group_exp(&v).apply(&n)
        })
        .collect();
    SphereCurve::new(samples).expect("exp(V)·n is unit and smooth")
}

fn random_skew(rng: &mut impl Rng, scale: Real) -> AlgebraElement<Real> {
    let m = nalgebra::DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-scale..scale));
    AlgebraElement::from_matrix(m)
}

/// Random monotone piecewise-linear reparametrization with knots on the
/// T-grid and slopes within [1/window, window].
pub fn random_grid_reparametrization(
    rng: &mut impl Rng,
    intervals: usize,
    window: usize,
) -> Reparametrization<Real> {
    let t = intervals as Real;
    // monotone lattice path from (0,0) to (T,T) with per-step increments
    // in 1..=window on both axes, so slopes stay within [1/window, window]
    let min_steps = intervals.div_ceil(window);
    let steps = rng.gen_range(min_steps.max(1)..=intervals);
    let xs = random_composition(rng, intervals, steps, window);
    let ys = random_composition(rng, intervals, steps, window);
    let mut i = 0usize;
    let mut j = 0usize;
    let mut knots = vec![(0.0, 0.0)];
    for (di, dj) in xs.into_iter().zip(ys) {
        i += di;
        j += dj;
        knots.push((i as Real / t, j as Real / t));
    }
    Reparametrization::new(knots).expect("monotone lattice path")
}

/// Random grid-knot PL reparametrization built from slope-2 runs with
/// compensating slope-½ runs (elsewhere slope 1). Integer slopes keep the
/// composed samples on the original polygon except where a cell spans an
/// interior vertex, so planted-recovery floors stay near the sampling
/// resolution while γ still deviates from the identity by several cells.
pub fn gentle_grid_reparametrization(
    rng: &mut impl Rng,
    intervals: usize,
    run_cells: usize,
) -> Reparametrization<Real> {
    let t = intervals as Real;
    let run = run_cells.max(1);
    // slope-2 run of `run` x-cells consumes 2·run y-cells; the slope-½ run
    // of 2·run x-cells restores the balance after a random slope-1 gap
    let max_start = intervals.saturating_sub(5 * run + 2);
    let x1 = rng.gen_range(1..=(max_start / 2).max(1));
    let x2 = x1 + run;
    let gap = rng.gen_range(1..=(intervals - x2 - 4 * run));
    let x3 = x2 + gap;
    let x4 = x3 + 2 * run;
    let (y2, y3, y4) = (x2 + run, x3 + run, x4);
    let knots: Vec<(Real, Real)> = [(0, 0), (x1, x1), (x2, y2), (x3, y3), (x4, y4)]
        .iter()
        .map(|&(x, y)| (x as Real / t, y as Real / t))
        .chain(std::iter::once((1.0, 1.0)))
        .collect();
    Reparametrization::new(knots).expect("monotone by construction")
}

/// Random composition of `total` into `parts` summands, each in 1..=cap.
fn random_composition(rng: &mut impl Rng, total: usize, parts: usize, cap: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(parts);
    let mut remaining = total;
    for k in 0..parts {
        let left = parts - k - 1;
        let lo = remaining.saturating_sub(left * cap).max(1);
        let hi = (remaining - left).min(cap);
        let d = rng.gen_range(lo..=hi);
        out.push(d);
        remaining -= d;
    }
    out
}

/// Two well-separated clusters of similar-shaped tracks, mimicking the
/// basin contrast of real hurricane data.
pub fn two_cluster_tracks(
    rng: &mut impl Rng,
    per_cluster: usize,
    intervals: usize,
) -> (Vec<SphereCurve<Real>>, Vec<usize>) {
    let mut curves = Vec::with_capacity(2 * per_cluster);
    let mut labels = Vec::with_capacity(2 * per_cluster);
    let centers = [
        group_exp(&AlgebraElement::basis_element(3, 0, 2).scale(1.2)),
        group_exp(&AlgebraElement::basis_element(3, 1, 2).scale(-1.2)),
    ];
    for (label, center) in centers.iter().enumerate() {
        for _ in 0..per_cluster {
            let base = random_sphere_curve(rng, intervals, 0.35);
            curves.push(base.rotated(center));
            labels.push(label);
        }
    }
    (curves, labels)
}
