//! Skew products `F(θ, x) = (S θ, f_{t₀(θ)}(x))` with fibre family
//! `f_t = (1 - ℓ(t)²) f₀ + ℓ(t)² f₁` on each band, structural validation,
//! forward orbits, the C² distance and the bone-generating perturbation.

use rayon::prelude::*;

use crate::base::{BaseKind, BasePoint};
use crate::error::{Error, Result};
use crate::fiber_maps::{
    validate_s_weak_contractive, validate_weak_pair, BumpProfile, FiberMap, Interval, SWeakTolerance,
    PROBE_GRID,
};

/// Default width of the perturbation bump.
pub const DEFAULT_PERTURBATION_WIDTH: f64 = 0.04;

/// Default `c` of the reference cubic pinches.
pub const DEFAULT_PINCH: f64 = 2.0;

/// Base-grid size used by the structural checks.
pub const T_GRID: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub interval: Interval,
    pub f0: FiberMap,
    pub f1: FiberMap,
}

impl Band {
    pub fn new(interval: Interval, f0: FiberMap, f1: FiberMap) -> Self {
        Band { interval, f0, f1 }
    }

    /// Cubic pinches at `p0 < p1` with common constant `c`.
    pub fn pinch_pair(interval: Interval, p0: f64, p1: f64, c: f64) -> Self {
        Band {
            interval,
            f0: FiberMap::cubic_pinch(p0, c, interval),
            f1: FiberMap::cubic_pinch(p1, c, interval),
        }
    }

    pub fn is_perturbed(&self) -> bool {
        self.f0 != self.f0.unperturbed() || self.f1 != self.f1.unperturbed()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perturbation {
    pub band: usize,
    pub eta: f64,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkewSystem {
    pub base: BaseKind,
    pub bands: Vec<Band>,
    pub profile: BumpProfile,
    pub perturbation: Option<Perturbation>,
}

impl SkewSystem {
    /// Two cubic-pinch bands `[0.08, 0.42]` and `[0.58, 0.92]` over the baker
    /// base with the default bump.
    pub fn reference() -> Self {
        SkewSystem {
            base: BaseKind::Baker,
            bands: vec![
                Band::pinch_pair(Interval { lo: 0.08, hi: 0.42 }, 0.18, 0.32, DEFAULT_PINCH),
                Band::pinch_pair(Interval { lo: 0.58, hi: 0.92 }, 0.68, 0.82, DEFAULT_PINCH),
            ],
            profile: BumpProfile::default(),
            perturbation: None,
        }
    }

    /// The reference system with its band-1 `f₀` perturbed by `eta`.
    pub fn reference_perturbed(eta: f64) -> Result<Self> {
        perturb(&SkewSystem::reference(), eta)
    }

    pub fn band(&self, i: usize) -> Result<&Band> {
        self.bands
            .get(i)
            .ok_or_else(|| Error::config(format!("no band {i} (system has {})", self.bands.len())))
    }

    /// Index of the band containing `x`.
    pub fn band_of(&self, x: f64) -> Option<usize> {
        self.bands.iter().position(|b| b.interval.contains(x))
    }

    /// Isotopy weight `ℓ(t)²`.
    #[inline]
    pub fn weight(&self, t: f64) -> f64 {
        self.profile.weight(t)
    }

    /// `f_t(x)` on band `i`, unchecked.
    #[inline]
    pub fn value(&self, i: usize, t: f64, x: f64) -> f64 {
        let b = &self.bands[i];
        let w = self.weight(t);
        (1.0 - w) * b.f0.value(x) + w * b.f1.value(x)
    }

    /// `Df_t(x)` on band `i`, unchecked.
    #[inline]
    pub fn deriv(&self, i: usize, t: f64, x: f64) -> f64 {
        let b = &self.bands[i];
        let w = self.weight(t);
        (1.0 - w) * b.f0.deriv(x) + w * b.f1.deriv(x)
    }

    /// Value and derivative for a precomputed weight.
    #[inline]
    pub fn value_deriv_w(&self, i: usize, w: f64, x: f64) -> (f64, f64) {
        let b = &self.bands[i];
        (
            (1.0 - w) * b.f0.value(x) + w * b.f1.value(x),
            (1.0 - w) * b.f0.deriv(x) + w * b.f1.deriv(x),
        )
    }

    #[inline]
    fn jet_w(&self, i: usize, w: f64, x: f64) -> [f64; 3] {
        let b = &self.bands[i];
        [
            (1.0 - w) * b.f0.value(x) + w * b.f1.value(x),
            (1.0 - w) * b.f0.deriv(x) + w * b.f1.deriv(x),
            (1.0 - w) * b.f0.deriv2(x) + w * b.f1.deriv2(x),
        ]
    }

    /// Checked `f_t`, `Df_t` or `D²f_t` on band `i`.
    pub fn fiber_eval(&self, i: usize, t: f64, x: f64, order: u8) -> Result<f64> {
        let b = self.band(i)?;
        if !b.interval.contains(x) {
            return Err(Error::Domain {
                x,
                lo: b.interval.lo,
                hi: b.interval.hi,
            });
        }
        if order > 2 {
            return Err(Error::Order(order));
        }
        Ok(self.jet_w(i, self.weight(t), x)[order as usize])
    }

    /// `[f_t⁻¹, D(f_t⁻¹), D²(f_t⁻¹)]` at `y` by bisection.
    pub fn inverse_jet(&self, i: usize, t: f64, y: f64) -> Result<[f64; 3]> {
        let b = self.band(i)?;
        let w = self.weight(t);
        let (mut a, mut c) = (b.interval.lo, b.interval.hi);
        let (ya, yc) = (self.jet_w(i, w, a)[0], self.jet_w(i, w, c)[0]);
        if !(ya <= y && y <= yc) {
            return Err(Error::Domain { x: y, lo: ya, hi: yc });
        }
        while c - a > 1e-13 {
            let mid = 0.5 * (a + c);
            if mid <= a || mid >= c {
                break;
            }
            if self.jet_w(i, w, mid)[0] < y {
                a = mid;
            } else {
                c = mid;
            }
        }
        let x = 0.5 * (a + c);
        let [_, d, d2] = self.jet_w(i, w, x);
        Ok([x, 1.0 / d, -d2 / (d * d * d)])
    }

    /// One skew step from `(p, x)` with `x` in band `i`.
    pub fn step(&self, i: usize, p: &BasePoint, x: f64) -> Result<(BasePoint, f64)> {
        let y = self.fiber_eval(i, p.t0(), x, 0)?;
        Ok((p.step(), y))
    }
}

/// One structural check with its witness.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub band: Option<usize>,
    pub passed: bool,
    /// Required checks decide [`SystemReport::passed`]; the others are
    /// reported only.
    pub required: bool,
    pub witness: String,
}

#[derive(Debug, Clone, Default)]
pub struct SystemReport {
    pub checks: Vec<Check>,
}

impl SystemReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || !c.required)
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn find(&self, name: &str, band: Option<usize>) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name && c.band == band)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn push(&mut self, name: &str, band: Option<usize>, passed: bool, required: bool, witness: String) {
        self.checks.push(Check {
            name: name.to_string(),
            band,
            passed,
            required,
            witness,
        });
    }
}

fn t_grid(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| k as f64 / n as f64)
}

/// Structural checks: bump profile, monotonicity, trapping on a `10³`
/// t-grid, continuity in `t`, and the weak-pair conditions. Weak-pair
/// checks are required only on unperturbed bands; on a perturbed band they
/// are expected to fail and are reported for information.
pub fn validate_system(sys: &SkewSystem) -> SystemReport {
    let mut r = SystemReport::default();

    match sys.profile.check() {
        Ok(()) => r.push("bump_profile", None, true, true, "arcs of length 1/4, disjoint".into()),
        Err(e) => r.push("bump_profile", None, false, true, e.to_string()),
    }
    let ordered = sys
        .bands
        .windows(2)
        .all(|w| w[0].interval.hi < w[1].interval.lo);
    r.push(
        "bands_disjoint",
        None,
        ordered && !sys.bands.is_empty(),
        true,
        format!("{} bands", sys.bands.len()),
    );

    // Bound on |d/dt ℓ(t)²| for the continuity check.
    let lip_weight = (0..PROBE_GRID)
        .map(|k| {
            let [l, dl, _] = sys.profile.jet(k as f64 / PROBE_GRID as f64);
            (2.0 * l * dl).abs()
        })
        .fold(0.0, f64::max);

    for (i, b) in sys.bands.iter().enumerate() {
        let band = Some(i);
        let iv = b.interval;

        let min_d = b.f0.min_derivative().min(b.f1.min_derivative());
        let domains_ok = b.f0.domain() == iv && b.f1.domain() == iv;
        r.push(
            "monotone",
            band,
            min_d > 0.0 && domains_ok,
            true,
            format!("min Df = {min_d:.6e}"),
        );

        let mut worst = f64::INFINITY;
        let mut worst_t = 0.0;
        for t in t_grid(T_GRID) {
            let lo = sys.value(i, t, iv.lo);
            let hi = sys.value(i, t, iv.hi);
            let margin = (lo - iv.lo).min(iv.hi - hi).min(hi - lo);
            if margin < worst {
                worst = margin;
                worst_t = t;
            }
        }
        r.push(
            "trapping",
            band,
            worst > 0.0,
            true,
            format!("min interior margin {worst:.6e} at t = {worst_t}"),
        );

        let sup_gap = iv
            .grid(101)
            .map(|x| (b.f1.value(x) - b.f0.value(x)).abs())
            .fold(0.0, f64::max);
        let dt = 1.0 / T_GRID as f64;
        let bound = lip_weight * sup_gap * dt * (1.0 + 1e-6) + 1e-15;
        let mut max_jump: f64 = 0.0;
        for x in iv.grid(21) {
            let mut prev = sys.value(i, 0.0, x);
            for t in t_grid(T_GRID).skip(1).chain(std::iter::once(1.0)) {
                let v = sys.value(i, t, x);
                max_jump = max_jump.max((v - prev).abs());
                prev = v;
            }
        }
        r.push(
            "t_continuity",
            band,
            max_jump <= bound,
            true,
            format!("max step {max_jump:.3e} <= bound {bound:.3e}"),
        );

        let required = !b.is_perturbed();
        match validate_weak_pair(&b.f0, &b.f1, iv) {
            Ok(wp) => {
                let fp = |k: usize| {
                    wp.fixed_points[k]
                        .iter()
                        .map(|p| format!("{:.6}(Df={:.4})", p.location, p.derivative))
                        .collect::<Vec<_>>()
                        .join(",")
                };
                r.push(
                    "weak_pair_s_weak",
                    band,
                    wp.passed.s_weak,
                    required,
                    format!("f0 fixed points [{}], f1 fixed points [{}]", fp(0), fp(1)),
                );
                r.push(
                    "weak_pair_caverage",
                    band,
                    wp.passed.contraction_on_average,
                    required,
                    format!("min margin {:.6}", wp.caverage_min_margin),
                );
                r.push(
                    "weak_pair_separated",
                    band,
                    wp.passed.separated_fixed_points,
                    required,
                    String::new(),
                );
                r.push(
                    "weak_pair_covering",
                    band,
                    wp.passed.covering,
                    required,
                    match wp.covering_interval {
                        Some((a, c)) => format!("B = ({a:.6}, {c:.6})"),
                        None => "no covering interval certified".into(),
                    },
                );
            }
            Err(e) => r.push("weak_pair_ordering", band, false, required, e.to_string()),
        }
        if !required {
            let s = validate_s_weak_contractive(&b.f0, &SWeakTolerance::default());
            let df = s.fixed_points.iter().map(|p| p.derivative).fold(f64::NAN, f64::max);
            r.push(
                "perturbed_f0_fixed_points",
                band,
                true,
                false,
                format!("{} fixed points, max Df at a fixed point {df:.6}", s.fixed_points.len()),
            );
        }
    }
    r
}

#[derive(Debug, Clone)]
pub struct OrbitRecord {
    pub band: usize,
    /// `(θ_k, x_k)` for `k = 0..=n`.
    pub points: Vec<(BasePoint, f64)>,
    /// `log Df_{θ_k}(x_k)` for `k = 0..n`.
    pub log_derivs: Vec<f64>,
}

impl OrbitRecord {
    pub fn last(&self) -> &(BasePoint, f64) {
        self.points.last().expect("orbit has its start point")
    }

    /// `log Dfⁿ_θ(x)`.
    pub fn log_derivative(&self) -> f64 {
        self.log_derivs.iter().sum()
    }
}

/// `n` steps of `F` from `start`; `x` picks its band.
pub fn forward_orbit(sys: &SkewSystem, start: (&BasePoint, f64), n: usize) -> Result<OrbitRecord> {
    let (p0, x0) = start;
    let i = sys.band_of(x0).ok_or_else(|| Error::Domain {
        x: x0,
        lo: sys.bands.first().map_or(0.0, |b| b.interval.lo),
        hi: sys.bands.last().map_or(1.0, |b| b.interval.hi),
    })?;
    let iv = sys.bands[i].interval;
    let mut points = Vec::with_capacity(n + 1);
    let mut log_derivs = Vec::with_capacity(n);
    let (mut p, mut x) = (p0.clone(), x0);
    for step in 0..n {
        let w = sys.weight(p.t0());
        let (y, d) = sys.value_deriv_w(i, w, x);
        log_derivs.push(d.ln());
        let q = p.step();
        points.push((p, x));
        if !iv.contains(y) {
            return Err(Error::LeftBand {
                x: y,
                lo: iv.lo,
                hi: iv.hi,
                step: step + 1,
            });
        }
        p = q;
        x = y;
    }
    points.push((p, x));
    Ok(OrbitRecord {
        band: i,
        points,
        log_derivs,
    })
}

/// Grid lower bound for `sup_t dist_{C²}(f_t^{±1}, g_t^{±1})` over all bands.
/// Inverses are compared on the common part of the two images.
pub fn c2_distance(a: &SkewSystem, b: &SkewSystem, nt: usize, nx: usize) -> Result<f64> {
    if a.bands.len() != b.bands.len()
        || a.bands.iter().zip(&b.bands).any(|(p, q)| p.interval != q.interval)
    {
        return Err(Error::config("c2_distance needs identical bands"));
    }
    let nt = nt.max(1);
    let per_band = |i: usize| -> Result<f64> {
        let iv = a.bands[i].interval;
        let rows: Result<Vec<f64>> = (0..nt)
            .into_par_iter()
            .map(|k| {
                let t = k as f64 / nt as f64;
                let (wa, wb) = (a.weight(t), b.weight(t));
                let mut m: f64 = 0.0;
                for x in iv.grid(nx) {
                    let (ja, jb) = (a.jet_w(i, wa, x), b.jet_w(i, wb, x));
                    for o in 0..3 {
                        m = m.max((ja[o] - jb[o]).abs());
                    }
                }
                let lo = a.jet_w(i, wa, iv.lo)[0].max(b.jet_w(i, wb, iv.lo)[0]);
                let hi = a.jet_w(i, wa, iv.hi)[0].min(b.jet_w(i, wb, iv.hi)[0]);
                if lo < hi {
                    for y in (Interval { lo, hi }).grid(nx) {
                        let (ia, ib) = (a.inverse_jet(i, t, y)?, b.inverse_jet(i, t, y)?);
                        for o in 0..3 {
                            m = m.max((ia[o] - ib[o]).abs());
                        }
                    }
                }
                Ok(m)
            })
            .collect();
        Ok(rows?.into_iter().fold(0.0, f64::max))
    };
    let mut out: f64 = 0.0;
    for i in 0..a.bands.len() {
        out = out.max(per_band(i)?);
    }
    Ok(out)
}

/// Replaces band-1 `f₀` by its perturbation with the system's bump width
/// (default 0.04).
pub fn perturb(sys: &SkewSystem, eta: f64) -> Result<SkewSystem> {
    let w = sys.perturbation.map_or(DEFAULT_PERTURBATION_WIDTH, |p| p.w);
    perturb_band(sys, 0, eta, w)
}

/// Replaces `f₀` on band `band` by `f₀ + eta·e·exp(-(e/w)²)` and re-checks
/// monotonicity and trapping. `eta = 0` restores the unperturbed map.
pub fn perturb_band(sys: &SkewSystem, band: usize, eta: f64, w: f64) -> Result<SkewSystem> {
    if !(eta >= 0.0) {
        return Err(Error::config(format!("eta must be >= 0, got {eta}")));
    }
    let mut out = sys.clone();
    let b = out
        .bands
        .get_mut(band)
        .ok_or_else(|| Error::config(format!("no band {band}")))?;
    if eta == 0.0 {
        b.f0 = b.f0.unperturbed();
        out.perturbation = None;
        return Ok(out);
    }
    b.f0 = FiberMap::perturbed(&b.f0, eta, w)?;
    out.perturbation = Some(Perturbation { band, eta, w });
    let report = validate_system(&out);
    let broken: Vec<String> = report
        .checks
        .iter()
        .filter(|c| c.required && !c.passed)
        .map(|c| format!("{}[band {:?}]: {}", c.name, c.band, c.witness))
        .collect();
    if !broken.is_empty() {
        return Err(Error::Validation(broken.join("; ")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{BaseKind, BaseMeasureSampler};
    use crate::fiber_maps::find_fixed_points;
    use proptest::prelude::*;

    #[test]
    fn reference_system_validates() {
        let r = validate_system(&SkewSystem::reference());
        assert!(r.all_passed(), "{:#?}", r.failures().collect::<Vec<_>>());
    }

    #[test]
    fn perturbed_system_keeps_trapping_but_loses_weak_pair() {
        let sys = SkewSystem::reference_perturbed(0.3).unwrap();
        let r = validate_system(&sys);
        assert!(r.passed());
        assert!(!r.find("weak_pair_s_weak", Some(0)).unwrap().passed);
        assert!(r.find("trapping", Some(0)).unwrap().passed);
        assert!(r.find("weak_pair_s_weak", Some(1)).unwrap().passed);
        let g0 = &sys.bands[0].f0;
        assert!((g0.deriv(0.18) - 1.3).abs() < 1e-12);
        assert_eq!(find_fixed_points(g0, 1e-9).len(), 3);
    }

    #[test]
    fn wide_bump_breaks_trapping() {
        // g₀(0.08) = 0.082 - 0.1·eta·exp(-1/4) drops below 0.08 for eta = 0.1
        let err = perturb_band(&SkewSystem::reference(), 0, 0.1, 0.2).unwrap_err();
        assert!(err.to_string().contains("trapping"), "{err}");
    }

    #[test]
    fn fixed_point_orbit_is_constant() {
        let sys = SkewSystem::reference();
        let o = forward_orbit(&sys, (&BasePoint::baker(0.0, 0.0), 0.18), 25).unwrap();
        assert!(o.points.iter().all(|(p, x)| *x == 0.18 && p.baker_coords() == Some((0.0, 0.0))));
        assert!(o.log_derivs.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn orbit_over_fixed_base_point_follows_f0() {
        let sys = SkewSystem::reference();
        let o = forward_orbit(&sys, (&BasePoint::baker(0.0, 0.0), 0.35), 200).unwrap();
        let f0 = &sys.bands[0].f0;
        let mut x = 0.35;
        for (k, (_, y)) in o.points.iter().enumerate() {
            assert_eq!(*y, x, "step {k}");
            x = f0.value(x);
        }
        assert!(o.points.windows(2).all(|w| w[1].1 < w[0].1));
    }

    #[test]
    fn orbit_rejects_points_outside_bands() {
        let sys = SkewSystem::reference();
        assert!(forward_orbit(&sys, (&BasePoint::baker(0.0, 0.0), 0.5), 3).is_err());
    }

    #[test]
    fn c2_distance_examples() {
        let a = SkewSystem::reference();
        assert_eq!(c2_distance(&a, &a, 64, 64).unwrap(), 0.0);
        let b = perturb(&a, 1e-3).unwrap();
        let c = perturb(&a, 1e-4).unwrap();
        let dab = c2_distance(&a, &b, 64, 128).unwrap();
        assert_eq!(dab, c2_distance(&b, &a, 64, 128).unwrap());
        let dac = c2_distance(&a, &c, 64, 128).unwrap();
        let ratio = dab / dac;
        assert!((9.5..10.5).contains(&ratio), "ratio {ratio}");
        assert_eq!(c2_distance(&a, &perturb(&a, 0.0).unwrap(), 16, 16).unwrap(), 0.0);
    }

    #[test]
    fn c2_distance_second_derivative_oracle() {
        // The perturbation's second derivative peaks at |u| ≈ 0.602 with
        // value (eta/w)·|4u³ - 6u|·exp(-u²); at t in L₀ this dominates.
        let a = SkewSystem::reference();
        let b = perturb(&a, 1e-3).unwrap();
        let u: f64 = ((3.0 - 6.0f64.sqrt()) / 2.0).sqrt();
        let peak = 1e-3 / 0.04 * (4.0 * u.powi(3) - 6.0 * u).abs() * (-u * u).exp();
        let d = c2_distance(&a, &b, 256, 2048).unwrap();
        assert!(d <= peak * 1.05 && d >= peak * 0.95, "d {d} vs {peak}");
    }

    proptest! {
        #[test]
        fn cocycle_identity(seed in any::<u64>(), x in 0.08f64..0.42, n in 1usize..30, k in 1usize..30) {
            let sys = SkewSystem::reference();
            let p = BaseMeasureSampler::new(seed, 0).with_future_len(100).sample(BaseKind::Baker, 1).remove(0);
            let whole = forward_orbit(&sys, (&p, x), n + k).unwrap();
            let first = forward_orbit(&sys, (&p, x), k).unwrap();
            let (q, y) = first.last().clone();
            let rest = forward_orbit(&sys, (&q, y), n).unwrap();
            prop_assert!((whole.last().1 - rest.last().1).abs() < 1e-12);
            prop_assert!((whole.log_derivative() - first.log_derivative() - rest.log_derivative()).abs() < 1e-12);
        }

        #[test]
        fn bands_map_into_their_interiors(t in 0.0f64..1.0, eta in 0.0f64..0.5) {
            let sys = SkewSystem::reference_perturbed(eta).unwrap();
            for (i, b) in sys.bands.iter().enumerate() {
                let lo = sys.value(i, t, b.interval.lo);
                let hi = sys.value(i, t, b.interval.hi);
                prop_assert!(b.interval.contains_interior(lo) && b.interval.contains_interior(hi));
            }
        }

        #[test]
        fn log_derivative_matches_slope(t in 0.0f64..1.0, x in 0.1f64..0.4) {
            let sys = SkewSystem::reference_perturbed(0.3).unwrap();
            let p = BasePoint::circle(t);
            let o = forward_orbit(&sys, (&p, x), 1).unwrap();
            let h = 1e-7;
            let slope = (sys.value(0, t, x + h) - sys.value(0, t, x - h)) / (2.0 * h);
            prop_assert!((o.log_derivs[0] - slope.ln()).abs() < 1e-6);
        }
    }
}
