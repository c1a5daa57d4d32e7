//! Fibre attractors by pullback, invariant graphs, bones and the
//! multi-graph summary.
//!
//! The pullback at `θ` to depth `d` is `f_{t₋₁} ∘ ⋯ ∘ f_{t₋d}(I_i)`; since
//! every fibre map is increasing it is the interval spanned by the images of
//! the band endpoints. The composition runs along the past only, so `γ(Sθ)`
//! at depth `d` is `f_{t₀}` applied to the depth `d - 1` pullback at `θ`.
//!
//! Under weak contraction fibres shrink like `d^{-1/2}`, so at any feasible
//! depth a point fibre still has width far above `bone_tol`. Fibres are
//! classified from widths at `d/4`, `d/2` and `d`: Aitken's extrapolation
//! sends geometric (and `d^{-1/2}`) decay to 0 and leaves converged bone
//! widths unchanged.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::base::{baker_to_solenoid, BaseKind, BaseMeasureSampler, BasePoint};
use crate::error::{Error, Result};
use crate::system::SkewSystem;

/// Default width above which a converged fibre counts as a bone.
pub const DEFAULT_BONE_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct FiberAttractor {
    pub band: usize,
    pub base: BasePoint,
    pub depth: usize,
    pub lo: f64,
    pub hi: f64,
    /// `(depth, width)` at `d/4`, `d/2`, `d`.
    pub widths: [(usize, f64); 3],
    /// Extrapolated limit width, clamped to `[0, hi - lo]`.
    pub limit_width: f64,
    pub is_bone: bool,
}

impl FiberAttractor {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Contraction ratio of the last two width halvings of depth.
    pub fn cauchy_ratio(&self) -> f64 {
        let [(_, a), (_, b), (_, c)] = self.widths;
        if a - b == 0.0 {
            0.0
        } else {
            (b - c) / (a - b)
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Pullback of band `i` along the first `depth` entries of `pre`, where
/// `pre[k] = t₋ₖ`.
pub fn pullback_along(sys: &SkewSystem, i: usize, pre: &[f64], depth: usize) -> (f64, f64) {
    let iv = sys.bands[i].interval;
    let (mut lo, mut hi) = (iv.lo, iv.hi);
    for k in (1..=depth).rev() {
        let w = sys.weight(pre[k]);
        lo = sys.value_deriv_w(i, w, lo).0;
        hi = sys.value_deriv_w(i, w, hi).0;
    }
    (lo, hi)
}

/// Extrapolated limit of the width sequence at depths `d/4`, `d/2`, `d`.
/// Widths of nested pullbacks never grow, so both differences are `<= 0`.
/// A shrink that speeds up from one halving to the next has no finite
/// geometric limit above 0 and extrapolates to 0.
pub fn extrapolate_width(w: [f64; 3]) -> f64 {
    let [a, b, c] = w;
    let (d1, d2) = (b - a, c - b);
    if d2 >= 0.0 {
        return c.max(0.0);
    }
    if d1 >= 0.0 || d2 / d1 >= 1.0 {
        return 0.0;
    }
    (c - d2 * d2 / (d2 - d1)).clamp(0.0, c)
}

fn depth_checked(p: &BasePoint, depth: usize) -> Result<Vec<f64>> {
    if depth == 0 {
        return Err(Error::config("pullback depth must be >= 1"));
    }
    p.preorbit(depth)
}

/// Fibre attractor of band `i` over `p`.
pub fn pullback_fiber(sys: &SkewSystem, i: usize, p: &BasePoint, depth: usize) -> Result<FiberAttractor> {
    pullback_fiber_tol(sys, i, p, depth, DEFAULT_BONE_TOL)
}

pub fn pullback_fiber_tol(
    sys: &SkewSystem,
    i: usize,
    p: &BasePoint,
    depth: usize,
    bone_tol: f64,
) -> Result<FiberAttractor> {
    sys.band(i)?;
    let pre = depth_checked(p, depth)?;
    let depths = [(depth / 4).max(1), (depth / 2).max(1), depth];
    let mut widths = [(0, 0.0); 3];
    let mut last = (0.0, 0.0);
    for (slot, &d) in depths.iter().enumerate() {
        let (lo, hi) = pullback_along(sys, i, &pre, d);
        widths[slot] = (d, hi - lo);
        last = (lo, hi);
    }
    let (lo, hi) = last;
    let limit_width = extrapolate_width([widths[0].1, widths[1].1, widths[2].1]);
    let is_point = limit_width <= bone_tol || hi - lo <= bone_tol;
    Ok(FiberAttractor {
        band: i,
        base: p.clone(),
        depth,
        lo,
        hi,
        widths,
        limit_width,
        is_bone: !is_point,
    })
}

/// `γ_i(p)`: the pullback of the left band endpoint.
pub fn graph_value(sys: &SkewSystem, i: usize, p: &BasePoint, depth: usize) -> Result<f64> {
    sys.band(i)?;
    let pre = depth_checked(p, depth)?;
    Ok(pullback_along(sys, i, &pre, depth).0)
}

/// `|f_{t₀}(γ_i(p)) - γ_i(Sp)|` for every band.
pub fn point_residuals(sys: &SkewSystem, p: &BasePoint, depth: usize) -> Result<Vec<f64>> {
    let q = p.step();
    (0..sys.bands.len())
        .map(|i| {
            let g = graph_value(sys, i, p, depth)?;
            let gs = graph_value(sys, i, &q, depth)?;
            Ok((sys.value(i, p.t0(), g) - gs).abs())
        })
        .collect()
}

/// Max over samples and bands of the invariance residual.
pub fn invariance_residual(sys: &SkewSystem, samples: &[BasePoint], depth: usize) -> Result<f64> {
    let per: Result<Vec<f64>> = samples
        .par_iter()
        .map(|p| Ok(point_residuals(sys, p, depth)?.into_iter().fold(0.0, f64::max)))
        .collect();
    Ok(per?.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone)]
pub struct MultiGraphSample {
    pub depth: usize,
    pub bone_tol: f64,
    /// Per base point: one attractor per band.
    pub points: Vec<(BasePoint, Vec<FiberAttractor>)>,
    /// Per base point: max invariance residual over the bands.
    pub residuals: Vec<f64>,
    /// Number of point fibres per base point → count of base points.
    pub cardinality_histogram: BTreeMap<usize, usize>,
    /// Fraction of bone fibres per band.
    pub bone_fraction_by_band: Vec<f64>,
    pub max_residual: f64,
}

impl MultiGraphSample {
    /// Fraction of base points with exactly `n` point fibres.
    pub fn cardinality_fraction(&self, n: usize) -> f64 {
        *self.cardinality_histogram.get(&n).unwrap_or(&0) as f64 / self.points.len().max(1) as f64
    }

    /// Fraction of bone fibres over all bands.
    pub fn bone_fraction(&self) -> f64 {
        let total = self.points.len() * self.bone_fraction_by_band.len();
        let bones: usize = self
            .points
            .iter()
            .map(|(_, fs)| fs.iter().filter(|f| f.is_bone).count())
            .sum();
        bones as f64 / total.max(1) as f64
    }

    /// `(min lo, max hi)` of band `i` over the sample.
    pub fn band_hull(&self, i: usize) -> (f64, f64) {
        self.points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (_, fs)| {
            (a.min(fs[i].lo), b.max(fs[i].hi))
        })
    }
}

/// Attractors of every band over `count` sampled base points. The sampler's
/// past depth is raised to `depth + 1` when needed.
pub fn sample_multigraph(
    sys: &SkewSystem,
    sampler: &BaseMeasureSampler,
    count: usize,
    depth: usize,
    bone_tol: f64,
) -> Result<MultiGraphSample> {
    let kind = match sys.base {
        BaseKind::Circle => {
            return Err(Error::UnsupportedVariant {
                op: "sample_multigraph",
                variant: "circle",
            })
        }
        k => k,
    };
    let sampler = sampler.with_past_depth(sampler.past_depth.max(depth + 1));
    let bases = sampler.sample(kind, count);
    multigraph_over(sys, bases, depth, bone_tol)
}

/// As [`sample_multigraph`] over given base points.
pub fn multigraph_over(
    sys: &SkewSystem,
    bases: Vec<BasePoint>,
    depth: usize,
    bone_tol: f64,
) -> Result<MultiGraphSample> {
    let nb = sys.bands.len();
    let rows: Result<Vec<(Vec<FiberAttractor>, f64)>> = bases
        .par_iter()
        .map(|p| {
            let fibers = (0..nb)
                .map(|i| pullback_fiber_tol(sys, i, p, depth, bone_tol))
                .collect::<Result<Vec<_>>>()?;
            let res = point_residuals(sys, p, depth)?.into_iter().fold(0.0, f64::max);
            Ok((fibers, res))
        })
        .collect();
    let rows = rows?;
    let mut cardinality_histogram = BTreeMap::new();
    let mut bones = vec![0usize; nb];
    let mut points = Vec::with_capacity(rows.len());
    let mut residuals = Vec::with_capacity(rows.len());
    for (p, (fibers, res)) in bases.into_iter().zip(rows) {
        let n_points = fibers.iter().filter(|f| !f.is_bone).count();
        *cardinality_histogram.entry(n_points).or_insert(0) += 1;
        for f in &fibers {
            if f.is_bone {
                bones[f.band] += 1;
            }
        }
        points.push((p, fibers));
        residuals.push(res);
    }
    let n = points.len().max(1) as f64;
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    Ok(MultiGraphSample {
        depth,
        bone_tol,
        points,
        residuals,
        cardinality_histogram,
        bone_fraction_by_band: bones.into_iter().map(|b| b as f64 / n).collect(),
        max_residual,
    })
}

#[derive(Debug, Clone)]
pub struct UscReport {
    pub center: FiberAttractor,
    /// Digits shared with the centre on each side.
    pub shared_digits: usize,
    /// Hausdorff excess of the depth-`shared_digits` pullback at the centre
    /// over the centre attractor.
    pub eps: f64,
    /// Max excess of a neighbour attractor over the centre attractor.
    pub max_excess: f64,
    /// Max excess of the centre attractor over a neighbour attractor.
    pub max_deficit: f64,
    pub max_neighbor_width: f64,
    /// Every neighbour lies in `U_eps(Δ)`, up to `1e-12`.
    pub within_eps: bool,
    /// Every neighbour has `diam ≤ diam(Δ) + 2 eps`, up to `1e-12`.
    pub diameter_bound: bool,
    pub neighbors: usize,
}

/// Samples `count` points within `radius` of `p` in both baker coordinates
/// and compares their attractors with the one at `p`.
pub fn usc_probe(
    sys: &SkewSystem,
    i: usize,
    p: &BasePoint,
    radius: f64,
    count: usize,
    depth: usize,
    seed: u64,
) -> Result<UscReport> {
    let sp = match p {
        BasePoint::Circle { .. } => {
            return Err(Error::UnsupportedVariant {
                op: "usc_probe",
                variant: "circle",
            })
        }
        BasePoint::Baker { t, s } => baker_to_solenoid(*t, *s, depth + 1),
        BasePoint::Solenoid(sp) => sp.clone(),
    };
    let center_point = BasePoint::Solenoid(sp.clone());
    let center = pullback_fiber(sys, i, &center_point, depth)?;
    let shared = if radius <= 0.0 {
        usize::MAX
    } else {
        (-radius.log(4.0)).ceil().max(0.0) as usize
    };
    let k = shared.min(depth);
    let pre = center_point.preorbit(depth)?;
    let (klo, khi) = pullback_along(sys, i, &pre, k.max(1));
    let eps = if radius <= 0.0 {
        0.0
    } else {
        (center.lo - klo).max(khi - center.hi).max(0.0)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let neighbours: Vec<BasePoint> = (0..count)
        .map(|_| {
            if radius <= 0.0 {
                center_point.clone()
            } else {
                BasePoint::Solenoid(sp.neighbour(shared, &mut rng))
            }
        })
        .collect();
    let fibers: Result<Vec<FiberAttractor>> = neighbours
        .par_iter()
        .map(|q| pullback_fiber(sys, i, q, depth))
        .collect();
    let fibers = fibers?;

    let mut max_excess: f64 = 0.0;
    let mut max_deficit: f64 = 0.0;
    let mut max_w: f64 = 0.0;
    for f in &fibers {
        max_excess = max_excess.max((f.hi - center.hi).max(center.lo - f.lo).max(0.0));
        max_deficit = max_deficit.max((center.hi - f.hi).max(f.lo - center.lo).max(0.0));
        max_w = max_w.max(f.width());
    }
    Ok(UscReport {
        within_eps: max_excess <= eps + 1e-12,
        diameter_bound: max_w <= center.width() + 2.0 * eps + 1e-12,
        center,
        shared_digits: shared,
        eps,
        max_excess,
        max_deficit,
        max_neighbor_width: max_w,
        neighbors: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::SampleMode;
    use crate::fiber_maps::find_fixed_points;
    use proptest::prelude::*;

    fn iterate_endpoints(f: &crate::fiber_maps::FiberMap, lo: f64, hi: f64, n: usize) -> (f64, f64) {
        let (mut a, mut b) = (lo, hi);
        for _ in 0..n {
            a = f.value(a);
            b = f.value(b);
        }
        (a, b)
    }

    #[test]
    fn fixed_base_point_is_pure_f0_iteration() {
        let sys = SkewSystem::reference();
        let fa = pullback_fiber(&sys, 0, &BasePoint::baker(0.0, 0.0), 200).unwrap();
        let (lo, hi) = iterate_endpoints(&sys.bands[0].f0, 0.08, 0.42, 200);
        assert_eq!((fa.lo, fa.hi), (lo, hi));
        assert!(fa.lo < 0.18 && 0.18 < fa.hi);
        // weak contraction: width ≈ 1/sqrt(c·n) on each side
        assert!(fa.width() > 1e-3);
        assert!(!fa.is_bone, "extrapolated {}", fa.limit_width);
    }

    #[test]
    fn bone_over_fixed_base_point() {
        let sys = SkewSystem::reference_perturbed(0.3).unwrap();
        let fa = pullback_fiber(&sys, 0, &BasePoint::baker(0.0, 0.0), 200).unwrap();
        let g0 = &sys.bands[0].f0;
        let fps = find_fixed_points(g0, 1e-9);
        let (a_minus, a_plus) = (fps[0].location, fps[2].location);
        let (lo, hi) = iterate_endpoints(g0, 0.08, 0.42, 200);
        assert!(((fa.hi - fa.lo) - (hi - lo)).abs() < 1e-6);
        assert!(((fa.hi - fa.lo) - (a_plus - a_minus)).abs() < 1e-6);
        assert!(fa.is_bone);
        assert!(fa.contains(a_minus) && fa.contains(a_plus));
    }

    #[test]
    fn nestedness_in_depth() {
        let sys = SkewSystem::reference();
        let p = BaseMeasureSampler::new(4, 0).with_past_depth(120).sample(BaseKind::Baker, 1).remove(0);
        let a = pullback_fiber(&sys, 0, &p, 50).unwrap();
        let b = pullback_fiber(&sys, 0, &p, 100).unwrap();
        assert!(a.lo <= b.lo + 1e-12 && b.hi <= a.hi + 1e-12);
    }

    #[test]
    fn graph_value_is_lower_endpoint_and_cauchy() {
        let sys = SkewSystem::reference();
        let p = BaseMeasureSampler::new(8, 0).with_past_depth(200).sample(BaseKind::Baker, 1).remove(0);
        let fa = pullback_fiber(&sys, 1, &p, 120).unwrap();
        assert_eq!(graph_value(&sys, 1, &p, 120).unwrap(), fa.lo);
        assert!(sys.bands[1].interval.contains_interior(fa.lo));
        let g0 = graph_value(&sys, 0, &BasePoint::baker(0.0, 0.0), 200).unwrap();
        assert!((g0 - 0.18).abs() < 0.05);
    }

    #[test]
    fn circle_points_are_rejected() {
        let sys = SkewSystem::reference();
        assert!(matches!(
            pullback_fiber(&sys, 0, &BasePoint::circle(0.3), 10),
            Err(Error::UnsupportedVariant { .. })
        ));
    }

    #[test]
    fn residual_is_zero_at_fixed_point_with_exact_fiber() {
        // γ over Baker(0,0) is the f₀-pullback; at the pinch point itself the
        // residual is |f₀(p₀) - p₀| = 0.
        let sys = SkewSystem::reference();
        let f0 = &sys.bands[0].f0;
        assert_eq!(f0.value(0.18) - 0.18, 0.0);
        let r = invariance_residual(&sys, &[BasePoint::baker(0.0, 0.0)], 100).unwrap();
        // both sides are f₀-iterates of the same endpoint, one step apart
        let (lo99, _) = iterate_endpoints(f0, 0.08, 0.42, 99);
        let (lo100, _) = iterate_endpoints(f0, 0.08, 0.42, 100);
        let expected = (f0.value(lo100) - f0.value(lo99)).abs();
        assert!((r - expected).abs() < 1e-15);
    }

    #[test]
    fn special_points_are_bones_random_points_are_not() {
        let sys = SkewSystem::reference_perturbed(0.3).unwrap();
        let special = BaseMeasureSampler::new(1, 0).with_mode(SampleMode::BoneSite);
        let m = sample_multigraph(&sys, &special, 20, 120, DEFAULT_BONE_TOL).unwrap();
        assert_eq!(m.bone_fraction_by_band[0], 1.0);
        let random = BaseMeasureSampler::new(1, 1);
        let m = sample_multigraph(&sys, &random, 200, 200, DEFAULT_BONE_TOL).unwrap();
        assert!(m.bone_fraction_by_band[0] < 0.02);
    }

    #[test]
    fn usc_zero_radius_has_no_excess() {
        let sys = SkewSystem::reference();
        let p = BaseMeasureSampler::new(2, 0).with_past_depth(80).sample(BaseKind::Baker, 1).remove(0);
        let r = usc_probe(&sys, 0, &p, 0.0, 5, 60, 0).unwrap();
        assert_eq!(r.max_excess, 0.0);
        assert_eq!(r.max_deficit, 0.0);
    }

    #[test]
    fn usc_at_bone_is_one_sided() {
        let sys = SkewSystem::reference_perturbed(0.3).unwrap();
        let r = usc_probe(&sys, 0, &BasePoint::baker(0.0, 0.0), 4f64.powi(-5), 40, 120, 3).unwrap();
        assert!(r.within_eps, "{r:?}");
        assert!(r.max_deficit > 0.05);
        assert!(r.max_neighbor_width < r.center.width());
    }

    #[test]
    fn extrapolation_examples() {
        // geometric decay: Aitken is exact
        let lim = extrapolate_width([0.3 + 0.2, 0.3 + 0.1, 0.3 + 0.05]);
        assert!((lim - 0.3).abs() < 1e-12);
        // d^{-1/2} decay extrapolates to 0
        let c = 0.4;
        let lim = extrapolate_width([c / 50f64.sqrt(), c / 100f64.sqrt(), c / 200f64.sqrt()]);
        assert!(lim < 1e-12);
        // converged
        assert_eq!(extrapolate_width([0.2, 0.2, 0.2]), 0.2);
        // accelerating collapse
        assert_eq!(extrapolate_width([0.12, 0.1, 3e-4]), 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn pullbacks_are_nested(seed in any::<u64>(), d in 1usize..80, eta in 0.0f64..0.5) {
            let sys = SkewSystem::reference_perturbed(eta).unwrap();
            let p = BaseMeasureSampler::new(seed, 0).with_past_depth(161).sample(BaseKind::Baker, 1).remove(0);
            let pre = p.preorbit(160).unwrap();
            for i in 0..2 {
                let (a, b) = pullback_along(&sys, i, &pre, d);
                let (c, e) = pullback_along(&sys, i, &pre, 2 * d);
                prop_assert!(a <= b);
                prop_assert!(a <= c + 1e-12 && e <= b + 1e-12);
                prop_assert!(sys.bands[i].interval.contains_interior(a));
                prop_assert!(sys.bands[i].interval.contains_interior(b));
            }
        }
    }
}
