//! Increasing interval maps and the structural checks a fibre family has to
//! pass: s-weak contractivity, weak pairs with contraction on average and the
//! covering property, the plateau bump `ℓ` and the isotopy
//! `f_t = (1 - ℓ(t)²) f₀ + ℓ(t)² f₁`.
//!
//! Every value, first and second derivative is a closed form. Finite
//! differences only show up in tests.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid used for sign-change root scans and monotonicity probes.
pub const PROBE_GRID: usize = 10_000;

/// Bisection stops once the fixed-point residual is below this.
pub const FIXED_POINT_RESIDUAL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::config(format!("degenerate interval [{lo}, {hi}]")));
        }
        Ok(Interval { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interior(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }

    /// `n` equally spaced points including both endpoints (`n >= 2`).
    pub fn grid(&self, n: usize) -> impl Iterator<Item = f64> + '_ {
        let n = n.max(2);
        let h = self.width() / (n - 1) as f64;
        (0..n).map(move |k| if k + 1 == n { self.hi } else { self.lo + h * k as f64 })
    }
}

/// Closed-form shape of a fibre map.
#[derive(Debug, Clone, PartialEq)]
pub enum FiberForm {
    /// `a·x^p + b·x^q + c`.
    PowerPoly { a: f64, p: f64, b: f64, q: f64, c: f64 },
    /// `x - c·(x - p)³`: fixed point `p` with `Df(p) = 1`.
    CubicPinch { p: f64, c: f64 },
    /// `base(x) + eta·(x - center)·exp(-((x - center)/w)²)`, where `center`
    /// is the fixed point of `base`.
    Perturbed {
        base: Box<FiberForm>,
        eta: f64,
        w: f64,
        center: f64,
    },
}

impl FiberForm {
    fn value(&self, x: f64) -> f64 {
        match *self {
            FiberForm::PowerPoly { a, p, b, q, c } => a * x.powf(p) + b * x.powf(q) + c,
            FiberForm::CubicPinch { p, c } => {
                let e = x - p;
                x - c * e * e * e
            }
            FiberForm::Perturbed {
                ref base,
                eta,
                w,
                center,
            } => {
                let e = x - center;
                let u = e / w;
                base.value(x) + eta * e * (-u * u).exp()
            }
        }
    }

    /// `f(x) - x` without cancellation near fixed points.
    fn displacement(&self, x: f64) -> f64 {
        match *self {
            FiberForm::PowerPoly { .. } => self.value(x) - x,
            FiberForm::CubicPinch { p, c } => {
                let e = x - p;
                -c * e * e * e
            }
            FiberForm::Perturbed {
                ref base,
                eta,
                w,
                center,
            } => {
                let e = x - center;
                let u = e / w;
                base.displacement(x) + eta * e * (-u * u).exp()
            }
        }
    }

    fn deriv(&self, x: f64) -> f64 {
        match *self {
            FiberForm::PowerPoly { a, p, b, q, .. } => {
                a * p * x.powf(p - 1.0) + b * q * x.powf(q - 1.0)
            }
            FiberForm::CubicPinch { p, c } => {
                let e = x - p;
                1.0 - 3.0 * c * e * e
            }
            FiberForm::Perturbed {
                ref base,
                eta,
                w,
                center,
            } => {
                let u = (x - center) / w;
                base.deriv(x) + eta * (-u * u).exp() * (1.0 - 2.0 * u * u)
            }
        }
    }

    fn deriv2(&self, x: f64) -> f64 {
        match *self {
            FiberForm::PowerPoly { a, p, b, q, .. } => {
                a * p * (p - 1.0) * x.powf(p - 2.0) + b * q * (q - 1.0) * x.powf(q - 2.0)
            }
            FiberForm::CubicPinch { p, c } => -6.0 * c * (x - p),
            FiberForm::Perturbed {
                ref base,
                eta,
                w,
                center,
            } => {
                let u = (x - center) / w;
                base.deriv2(x) + eta / w * (-u * u).exp() * (4.0 * u * u * u - 6.0 * u)
            }
        }
    }
}

/// A C² increasing self-map of a closed interval.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberMap {
    form: FiberForm,
    domain: Interval,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub location: f64,
    pub derivative: f64,
}

impl FiberMap {
    pub fn new(form: FiberForm, domain: Interval) -> Self {
        FiberMap { form, domain }
    }

    pub fn cubic_pinch(p: f64, c: f64, domain: Interval) -> Self {
        FiberMap::new(FiberForm::CubicPinch { p, c }, domain)
    }

    pub fn power_poly(a: f64, p: f64, b: f64, q: f64, c: f64, domain: Interval) -> Self {
        FiberMap::new(FiberForm::PowerPoly { a, p, b, q, c }, domain)
    }

    /// The polynomial-type example `3.098x^1.83 - 2.5x^2.4 + 0.1` on `[0.1, 0.7]`.
    pub fn example_map() -> Self {
        FiberMap::power_poly(
            3.098,
            1.83,
            -2.5,
            2.4,
            0.1,
            Interval { lo: 0.1, hi: 0.7 },
        )
    }

    /// Adds the bump `eta·e·exp(-(e/w)²)`, `e = x - p`, centred at the unique
    /// fixed point `p` of `base`. Perturbing an already perturbed map
    /// replaces the previous bump instead of stacking a second one.
    pub fn perturbed(base: &FiberMap, eta: f64, w: f64) -> Result<Self> {
        if !(w > 0.0) || !eta.is_finite() {
            return Err(Error::config(format!("bad perturbation eta={eta}, w={w}")));
        }
        let inner = base.unperturbed();
        let center = match inner.form {
            FiberForm::CubicPinch { p, .. } => p,
            _ => {
                let fps = find_fixed_points(&inner, 1e-9);
                if fps.len() != 1 {
                    return Err(Error::config(format!(
                        "perturbation needs a unique fixed point, found {}",
                        fps.len()
                    )));
                }
                fps[0].location
            }
        };
        Ok(FiberMap::new(
            FiberForm::Perturbed {
                base: Box::new(inner.form),
                eta,
                w,
                center,
            },
            base.domain,
        ))
    }

    pub fn form(&self) -> &FiberForm {
        &self.form
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    /// The unperturbed map underneath a `Perturbed` form, or `self`.
    pub fn unperturbed(&self) -> FiberMap {
        match &self.form {
            FiberForm::Perturbed { base, .. } => FiberMap::new((**base).clone(), self.domain),
            _ => self.clone(),
        }
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        self.form.value(x)
    }

    #[inline]
    pub fn deriv(&self, x: f64) -> f64 {
        self.form.deriv(x)
    }

    #[inline]
    pub fn deriv2(&self, x: f64) -> f64 {
        self.form.deriv2(x)
    }

    /// Value (`order = 0`), first or second derivative at `x`.
    pub fn eval(&self, x: f64, order: u8) -> Result<f64> {
        if !self.domain.contains(x) {
            return Err(Error::Domain {
                x,
                lo: self.domain.lo,
                hi: self.domain.hi,
            });
        }
        match order {
            0 => Ok(self.value(x)),
            1 => Ok(self.deriv(x)),
            2 => Ok(self.deriv2(x)),
            o => Err(Error::Order(o)),
        }
    }

    /// Inverse by bisection on the domain; `y` must lie in `f(domain)`.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        let (mut a, mut b) = (self.domain.lo, self.domain.hi);
        let (fa, fb) = (self.value(a), self.value(b));
        if !(fa <= y && y <= fb) {
            return Err(Error::Domain { x: y, lo: fa, hi: fb });
        }
        while b - a > 1e-13 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if self.value(mid) < y {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok(0.5 * (a + b))
    }

    /// Value, first and second derivative of `f⁻¹` at `y`.
    pub fn inverse_jet(&self, y: f64) -> Result<[f64; 3]> {
        let x = self.inverse(y)?;
        let d = self.deriv(x);
        Ok([x, 1.0 / d, -self.deriv2(x) / (d * d * d)])
    }

    /// `f(domain) ⊂ int(domain)`, checked at the endpoints.
    pub fn is_trapping(&self) -> bool {
        self.domain.contains_interior(self.value(self.domain.lo))
            && self.domain.contains_interior(self.value(self.domain.hi))
    }

    /// Smallest derivative over the probe grid; positive means increasing.
    pub fn min_derivative(&self) -> f64 {
        self.domain
            .grid(PROBE_GRID)
            .map(|x| self.deriv(x))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Every root of `f(x) = x` on the domain that shows up as a sign change (or
/// an exact zero) on the probe grid, refined by bisection to floating-point
/// resolution. Roots closer than `tol` are merged.
pub fn find_fixed_points(map: &FiberMap, tol: f64) -> Vec<FixedPoint> {
    let g = |x: f64| map.form.displacement(x);
    let xs: Vec<f64> = map.domain.grid(PROBE_GRID + 1).collect();
    let mut roots: Vec<f64> = Vec::new();
    let push = |r: f64, roots: &mut Vec<f64>| {
        if roots.last().is_none_or(|&last| (r - last).abs() > tol) {
            roots.push(r);
        }
    };
    let mut ga = g(xs[0]);
    if ga == 0.0 {
        push(xs[0], &mut roots);
    }
    for pair in xs.windows(2) {
        let gb = g(pair[1]);
        if gb == 0.0 {
            push(pair[1], &mut roots);
        } else if ga != 0.0 && (ga < 0.0) != (gb < 0.0) {
            push(bisect_root(&g, pair[0], pair[1], ga), &mut roots);
        }
        ga = gb;
    }
    roots
        .into_iter()
        .map(|location| FixedPoint {
            location,
            derivative: map.deriv(location),
        })
        .collect()
}

fn bisect_root(g: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut ga: f64) -> f64 {
    loop {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if (gm < 0.0) == (ga < 0.0) {
            a = mid;
            ga = gm;
        } else {
            b = mid;
        }
    }
    let gb = g(b);
    let best = if ga.abs() <= gb.abs() { a } else { b };
    debug_assert!(g(best).abs() < FIXED_POINT_RESIDUAL);
    best
}

#[derive(Debug, Clone, Copy)]
pub struct SWeakTolerance {
    /// Allowed deviation of `Df(p)` from 1.
    pub derivative: f64,
    /// Grid points closer than this to `p` are exempt from `Df < 1`.
    pub exclusion: f64,
    /// Grid size for the pairwise `|f(x) - f(y)| < |x - y|` check.
    pub pair_grid: usize,
}

impl Default for SWeakTolerance {
    fn default() -> Self {
        SWeakTolerance {
            derivative: 1e-9,
            exclusion: 1e-3,
            pair_grid: 200,
        }
    }
}

impl SWeakTolerance {
    /// The published example constants are rounded, so `Df(p)` only comes
    /// out near 0.95.
    pub fn example_map() -> Self {
        SWeakTolerance {
            derivative: 0.06,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct SWeakReport {
    pub fixed_points: Vec<FixedPoint>,
    /// `Df(p)` within tolerance of 1.
    pub neutral_fixed_point: bool,
    /// `Df(x) < 1` away from `p`; carries the largest such derivative.
    pub contracting_elsewhere: bool,
    pub max_derivative_off_fixed_point: f64,
    /// `|f(x) - f(y)| < |x - y|` on all grid pairs.
    pub pairwise_contractive: bool,
}

impl SWeakReport {
    pub fn unique_fixed_point(&self) -> Option<FixedPoint> {
        (self.fixed_points.len() == 1).then(|| self.fixed_points[0])
    }

    pub fn passed(&self) -> bool {
        self.fixed_points.len() == 1
            && self.neutral_fixed_point
            && self.contracting_elsewhere
            && self.pairwise_contractive
    }
}

pub fn validate_s_weak_contractive(map: &FiberMap, tol: &SWeakTolerance) -> SWeakReport {
    let fixed_points = find_fixed_points(map, 1e-9);
    let p = (fixed_points.len() == 1).then(|| fixed_points[0]);

    let neutral_fixed_point = p.is_some_and(|fp| (fp.derivative - 1.0).abs() <= tol.derivative);

    let mut max_off = f64::NEG_INFINITY;
    for x in map.domain.grid(PROBE_GRID) {
        let far = p.is_none_or(|fp| (x - fp.location).abs() > tol.exclusion);
        if far {
            max_off = max_off.max(map.deriv(x));
        }
    }
    let contracting_elsewhere = p.is_some() && max_off < 1.0;

    let xs: Vec<f64> = map.domain.grid(tol.pair_grid).collect();
    let fx: Vec<f64> = xs.iter().map(|&x| map.value(x)).collect();
    let pairwise_contractive = (0..xs.len()).all(|i| {
        (i + 1..xs.len()).all(|j| (fx[j] - fx[i]).abs() < (xs[j] - xs[i]).abs())
    });

    SWeakReport {
        fixed_points,
        neutral_fixed_point,
        contracting_elsewhere,
        max_derivative_off_fixed_point: max_off,
        pairwise_contractive,
    }
}

/// Which weak-pair conditions held.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WeakPairConditions {
    /// Both maps s-weakly contractive.
    pub s_weak: bool,
    /// `log Df₀ + log Df₁ < 0` on the whole band.
    pub contraction_on_average: bool,
    /// Distinct fixed points away from the band ends, `f_i(p_j) ≠ p_i`.
    pub separated_fixed_points: bool,
    /// A covering interval was certified.
    pub covering: bool,
}

impl WeakPairConditions {
    pub fn all(&self) -> bool {
        self.s_weak && self.contraction_on_average && self.separated_fixed_points && self.covering
    }
}

#[derive(Debug, Clone)]
pub struct WeakPairReport {
    pub fixed_points: [Vec<FixedPoint>; 2],
    /// Grid minimum of `-(log Df₀ + log Df₁)`.
    pub caverage_min_margin: f64,
    pub covering_interval: Option<(f64, f64)>,
    pub passed: WeakPairConditions,
}

/// Contraction-on-average margin `-(log Df₀(x) + log Df₁(x))`.
pub fn caverage_margin(f0: &FiberMap, f1: &FiberMap, x: f64) -> f64 {
    let (d0, d1) = (f0.deriv(x), f1.deriv(x));
    if d0 <= 0.0 || d1 <= 0.0 {
        return f64::NEG_INFINITY;
    }
    -(d0.ln() + d1.ln())
}

/// Endpoint test for `Cl(B) ⊂ f₀(B) ∪ f₁(B)` with `B = (x0, x1)` together
/// with `Df_i < 1` on `[x0, x1]`.
pub fn certify_covering(f0: &FiberMap, f1: &FiberMap, x0: f64, x1: f64) -> bool {
    if !(x0 < x1) {
        return false;
    }
    let covers = f0.value(x0) < x0 && f1.value(x1) > x1 && f0.value(x1) > f1.value(x0);
    let interval = Interval { lo: x0, hi: x1 };
    covers
        && interval
            .grid(1000)
            .all(|x| f0.deriv(x) < 1.0 && f1.deriv(x) < 1.0)
}

/// Checks the weak-pair conditions for `(f0, f1)` on `band` and searches for
/// a covering interval strictly between the fixed points.
pub fn validate_weak_pair(f0: &FiberMap, f1: &FiberMap, band: Interval) -> Result<WeakPairReport> {
    let tol = SWeakTolerance::default();
    let r0 = validate_s_weak_contractive(f0, &tol);
    let r1 = validate_s_weak_contractive(f1, &tol);

    let caverage_min_margin = band
        .grid(PROBE_GRID)
        .map(|x| caverage_margin(f0, f1, x))
        .fold(f64::INFINITY, f64::min);

    let mut passed = WeakPairConditions {
        s_weak: r0.passed() && r1.passed(),
        contraction_on_average: caverage_min_margin > 0.0,
        ..Default::default()
    };
    let mut covering_interval = None;

    if let (Some(p0), Some(p1)) = (r0.unique_fixed_point(), r1.unique_fixed_point()) {
        let (p0, p1) = (p0.location, p1.location);
        if p0 > p1 {
            return Err(Error::Ordering { p0, p1 });
        }
        let inside = |p: f64| band.contains_interior(p);
        passed.separated_fixed_points = p0 < p1
            && inside(p0)
            && inside(p1)
            && f0.value(p1) != p0
            && f1.value(p0) != p1;
        if p0 < p1 {
            // Try symmetric insets, widest certified interval first.
            for frac in [1.0 / 7.0, 1.0 / 10.0, 1.0 / 5.0, 1.0 / 4.0, 1.0 / 3.0, 1.0 / 20.0] {
                let gap = p1 - p0;
                let (x0, x1) = (p0 + frac * gap, p1 - frac * gap);
                if certify_covering(f0, f1, x0, x1) {
                    covering_interval = Some((x0, x1));
                    break;
                }
            }
        }
    }
    passed.covering = covering_interval.is_some();

    Ok(WeakPairReport {
        fixed_points: [r0.fixed_points, r1.fixed_points],
        caverage_min_margin,
        covering_interval,
        passed,
    })
}

/// A closed arc `[start, end]` on the circle `[0, 1)`, `start < end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub start: f64,
    pub end: f64,
}

impl Arc {
    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start <= t && t <= self.end
    }

    /// Circle distance from `t` to the arc.
    pub fn distance(&self, t: f64) -> f64 {
        let t = t.rem_euclid(1.0);
        if self.contains(t) {
            return 0.0;
        }
        let d = |a: f64| {
            let r = (t - a).rem_euclid(1.0);
            r.min(1.0 - r)
        };
        d(self.start).min(d(self.end))
    }
}

/// Quintic smoothstep `6u⁵ - 15u⁴ + 10u³` and its derivatives.
fn smoothstep(u: f64) -> [f64; 3] {
    let u2 = u * u;
    [
        u2 * u * (10.0 + u * (-15.0 + 6.0 * u)),
        30.0 * u2 * (u - 1.0) * (u - 1.0),
        60.0 * u * (u - 1.0) * (2.0 * u - 1.0),
    ]
}

/// `ℓ: 𝕋¹ → [0, 1]` with `ℓ ≡ 0` on `l0`, `ℓ ≡ 1` on `l1`, quintic
/// smoothstep across both gaps. `l1` must follow `l0` counter-clockwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpProfile {
    pub l0: Arc,
    pub l1: Arc,
    pub delta: f64,
}

impl Default for BumpProfile {
    fn default() -> Self {
        BumpProfile {
            l0: Arc { start: 0.0, end: 0.25 },
            l1: Arc { start: 0.5, end: 0.75 },
            delta: 0.02,
        }
    }
}

impl BumpProfile {
    pub fn new(l0: Arc, l1: Arc, delta: f64) -> Result<Self> {
        let p = BumpProfile { l0, l1, delta };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        let quarter = |a: &Arc| (a.length() - 0.25).abs() < 1e-12;
        let in_circle = |a: &Arc| 0.0 <= a.start && a.start < a.end && a.end <= 1.0;
        if !(in_circle(&self.l0) && in_circle(&self.l1)) {
            return Err(Error::config("bump arcs must satisfy 0 <= start < end <= 1"));
        }
        if !(quarter(&self.l0) && quarter(&self.l1)) {
            return Err(Error::config("bump arcs must each have length 1/4"));
        }
        if !(self.l0.end < self.l1.start) {
            return Err(Error::config("arc L1 must start after L0 ends"));
        }
        let falling_gap = self.l0.start + 1.0 - self.l1.end;
        if !(falling_gap > 0.0) {
            return Err(Error::config("arcs L0 and L1 overlap across 0"));
        }
        if !(self.delta > 0.0) {
            return Err(Error::config("bump delta must be positive"));
        }
        Ok(())
    }

    /// `[ℓ, ℓ', ℓ'']` at `t`.
    pub fn jet(&self, t: f64) -> [f64; 3] {
        let t = t.rem_euclid(1.0);
        let (l0, l1) = (self.l0, self.l1);
        if l0.contains(t) {
            return [0.0, 0.0, 0.0];
        }
        if l1.contains(t) {
            return [1.0, 0.0, 0.0];
        }
        if t > l0.end && t < l1.start {
            let gap = l1.start - l0.end;
            let [s, ds, d2s] = smoothstep((t - l0.end) / gap);
            return [s, ds / gap, d2s / (gap * gap)];
        }
        let gap = l0.start + 1.0 - l1.end;
        let u = (t - l1.end).rem_euclid(1.0) / gap;
        let [s, ds, d2s] = smoothstep(u);
        [1.0 - s, -ds / gap, -d2s / (gap * gap)]
    }

    pub fn value(&self, t: f64) -> f64 {
        self.jet(t)[0]
    }

    /// `ℓ(t)` (order 0) or `ℓ'(t)` (order 1).
    pub fn eval(&self, t: f64, order: u8) -> Result<f64> {
        match order {
            0 | 1 => Ok(self.jet(t)[order as usize]),
            o => Err(Error::Order(o)),
        }
    }

    /// Isotopy weight `ℓ(t)²` on `f₁`.
    #[inline]
    pub fn weight(&self, t: f64) -> f64 {
        let l = self.value(t);
        l * l
    }

    /// Circle distance from `t` to `L₀ ∪ L₁`.
    pub fn plateau_distance(&self, t: f64) -> f64 {
        self.l0.distance(t).min(self.l1.distance(t))
    }
}

pub fn bump_eval(profile: &BumpProfile, t: f64, order: u8) -> Result<f64> {
    profile.eval(t, order)
}

/// `f_t(x) = (1 - ℓ(t)²) f₀(x) + ℓ(t)² f₁(x)` or its x-derivatives.
pub fn isotopy_eval(
    f0: &FiberMap,
    f1: &FiberMap,
    profile: &BumpProfile,
    t: f64,
    x: f64,
    order: u8,
) -> Result<f64> {
    let a = f0.eval(x, order)?;
    let b = f1.eval(x, order)?;
    let w = profile.weight(t);
    Ok((1.0 - w) * a + w * b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn band1() -> Interval {
        Interval { lo: 0.08, hi: 0.42 }
    }

    #[test]
    fn cubic_pinch_closed_forms() {
        let f = FiberMap::cubic_pinch(0.18, 2.0, band1());
        assert_eq!(f.eval(0.18, 1).unwrap(), 1.0);
        assert!((f.eval(0.30, 0).unwrap() - 0.296544).abs() < 1e-15);
        assert!((f.eval(0.30, 2).unwrap() + 12.0 * 0.12).abs() < 1e-14);
    }

    #[test]
    fn eval_rejects_out_of_domain_and_bad_order() {
        let f = FiberMap::cubic_pinch(0.18, 2.0, band1());
        assert!(matches!(f.eval(0.5, 0), Err(Error::Domain { .. })));
        assert!(matches!(f.eval(0.2, 3), Err(Error::Order(3))));
    }

    #[test]
    fn example_map_fixed_point() {
        let f = FiberMap::example_map();
        assert!((f.eval(0.466, 0).unwrap() - 0.466).abs() < 1e-3);
        let fps = find_fixed_points(&f, 1e-9);
        assert_eq!(fps.len(), 1);
        assert!((fps[0].location - 0.466).abs() < 0.005);
        let r = validate_s_weak_contractive(&f, &SWeakTolerance::example_map());
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn pinch_fixed_point_is_exact() {
        let f = FiberMap::cubic_pinch(0.32, 2.0, band1());
        let fps = find_fixed_points(&f, 1e-9);
        assert_eq!(fps.len(), 1);
        assert!((fps[0].location - 0.32).abs() < 1e-12);
        assert!((fps[0].derivative - 1.0).abs() < 1e-15);
    }

    #[test]
    fn perturbation_creates_repeller_and_two_attractors() {
        let f = FiberMap::cubic_pinch(0.18, 2.0, band1());
        let g = FiberMap::perturbed(&f, 0.3, 0.04).unwrap();
        let fps = find_fixed_points(&g, 1e-9);
        assert_eq!(fps.len(), 3);
        assert!((fps[1].location - 0.18).abs() < 1e-12);
        assert!((fps[1].derivative - 1.3).abs() < 1e-12);
        assert!(fps[0].derivative < 1.0 && fps[2].derivative < 1.0);
        // symmetric about the repeller
        assert!(((0.18 - fps[0].location) - (fps[2].location - 0.18)).abs() < 1e-12);
        let r = validate_s_weak_contractive(&g, &SWeakTolerance::default());
        assert!(!r.passed());
        // re-perturbing replaces the bump
        let g2 = FiberMap::perturbed(&g, 0.1, 0.04).unwrap();
        assert!((g2.deriv(0.18) - 1.1).abs() < 1e-12);
    }

    #[test]
    fn default_pair_is_weak_pair() {
        let f0 = FiberMap::cubic_pinch(0.18, 2.0, band1());
        let f1 = FiberMap::cubic_pinch(0.32, 2.0, band1());
        let r = validate_weak_pair(&f0, &f1, band1()).unwrap();
        assert!(r.passed.all(), "{r:?}");
        let (x0, x1) = r.covering_interval.unwrap();
        assert!((x0 - 0.20).abs() < 1e-12 && (x1 - 0.30).abs() < 1e-12);
        assert!(r.caverage_min_margin > 0.05);
        let at_p0 = caverage_margin(&f0, &f1, 0.18);
        assert!((at_p0 + (1.0f64 - 6.0 * 0.14 * 0.14).ln()).abs() < 1e-12);
    }

    #[test]
    fn identical_maps_fail_separation() {
        let f0 = FiberMap::cubic_pinch(0.18, 2.0, band1());
        let r = validate_weak_pair(&f0, &f0, band1()).unwrap();
        assert!(!r.passed.separated_fixed_points);
        assert!(r.covering_interval.is_none());
    }

    #[test]
    fn reversed_pair_is_an_ordering_error() {
        let f0 = FiberMap::cubic_pinch(0.32, 2.0, band1());
        let f1 = FiberMap::cubic_pinch(0.18, 2.0, band1());
        assert!(matches!(
            validate_weak_pair(&f0, &f1, band1()),
            Err(Error::Ordering { .. })
        ));
    }

    #[test]
    fn bump_plateaus_and_midpoint() {
        let b = BumpProfile::default();
        assert_eq!(b.eval(0.1, 0).unwrap(), 0.0);
        assert_eq!(b.eval(0.6, 0).unwrap(), 1.0);
        assert!((b.eval(0.375, 0).unwrap() - 0.5).abs() < 1e-15);
        assert!((b.eval(0.875, 0).unwrap() - 0.5).abs() < 1e-15);
        assert!(b.eval(0.375, 2).is_err());
    }

    #[test]
    fn bump_is_c2_at_arc_endpoints() {
        let b = BumpProfile::default();
        for t in [0.25, 0.5, 0.75, 1.0] {
            let left = b.jet(t - 1e-12);
            let right = b.jet(t + 1e-12);
            for k in 0..3 {
                assert!((left[k] - right[k]).abs() < 1e-6, "t={t}, k={k}");
            }
        }
    }

    #[test]
    fn bump_rejects_bad_arcs() {
        let bad = BumpProfile::new(Arc { start: 0.0, end: 0.3 }, Arc { start: 0.5, end: 0.75 }, 0.02);
        assert!(bad.is_err());
        let overlap = BumpProfile::new(Arc { start: 0.0, end: 0.25 }, Arc { start: 0.2, end: 0.45 }, 0.02);
        assert!(overlap.is_err());
    }

    #[test]
    fn isotopy_endpoints_and_midpoint() {
        let f0 = FiberMap::cubic_pinch(0.18, 2.0, band1());
        let f1 = FiberMap::cubic_pinch(0.32, 2.0, band1());
        let b = BumpProfile::default();
        for x in [0.1, 0.2, 0.33] {
            assert_eq!(isotopy_eval(&f0, &f1, &b, 0.1, x, 0).unwrap(), f0.value(x));
            assert_eq!(isotopy_eval(&f0, &f1, &b, 0.6, x, 0).unwrap(), f1.value(x));
            let d = isotopy_eval(&f0, &f1, &b, 0.375, x, 1).unwrap();
            assert!((d - (0.75 * f0.deriv(x) + 0.25 * f1.deriv(x))).abs() < 1e-15);
            assert!(d < 1.0);
        }
        assert!(isotopy_eval(&f0, &f1, &b, 0.3, 0.5, 0).is_err());
    }

    #[test]
    fn inverse_jet_matches_forward() {
        let f = FiberMap::perturbed(&FiberMap::cubic_pinch(0.18, 2.0, band1()), 0.1, 0.04).unwrap();
        let x = 0.23;
        let [xi, d1, d2] = f.inverse_jet(f.value(x)).unwrap();
        assert!((xi - x).abs() < 1e-12);
        assert!((d1 - 1.0 / f.deriv(x)).abs() < 1e-9);
        let h = 1e-5;
        let y = f.value(x);
        let fd2 = (f.inverse(y + h).unwrap() - 2.0 * x + f.inverse(y - h).unwrap()) / (h * h);
        assert!((d2 - fd2).abs() < 1e-2 * d2.abs().max(1.0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn pair() -> (FiberMap, FiberMap, BumpProfile) {
            (
                FiberMap::cubic_pinch(0.18, 2.0, band1()),
                FiberMap::cubic_pinch(0.32, 2.0, band1()),
                BumpProfile::default(),
            )
        }

        proptest! {
            #[test]
            fn monotone_on_band(x in 0.08f64..0.42, y in 0.08f64..0.42, eta in 0.0f64..0.5) {
                let g = FiberMap::perturbed(&FiberMap::cubic_pinch(0.18, 2.0, band1()), eta, 0.04).unwrap();
                prop_assume!(x < y);
                prop_assert!(g.value(x) < g.value(y));
            }

            #[test]
            fn isotopy_is_convex(t in 0.0f64..1.0, x in 0.08f64..0.42) {
                let (f0, f1, b) = pair();
                let v = isotopy_eval(&f0, &f1, &b, t, x, 0).unwrap();
                let (a, c) = (f0.value(x), f1.value(x));
                prop_assert!(a.min(c) - 1e-15 <= v && v <= a.max(c) + 1e-15);
            }

            #[test]
            fn derivatives_match_finite_differences(x in 0.1f64..0.4, eta in 0.0f64..0.5) {
                let g = FiberMap::perturbed(&FiberMap::cubic_pinch(0.18, 2.0, band1()), eta, 0.04).unwrap();
                let h = 1e-6;
                let d1 = (g.value(x + h) - g.value(x - h)) / (2.0 * h);
                let d2 = (g.deriv(x + h) - g.deriv(x - h)) / (2.0 * h);
                prop_assert!((d1 - g.deriv(x)).abs() <= 1e-6 * g.deriv(x).abs().max(1.0));
                prop_assert!((d2 - g.deriv2(x)).abs() <= 1e-6 * g.deriv2(x).abs().max(1.0));
            }

            #[test]
            fn example_map_derivatives_match(x in 0.11f64..0.69) {
                let f = FiberMap::example_map();
                let h = 1e-6;
                let d1 = (f.value(x + h) - f.value(x - h)) / (2.0 * h);
                prop_assert!((d1 - f.deriv(x)).abs() <= 1e-6 * f.deriv(x).abs());
            }

            #[test]
            fn strict_contraction_off_plateaus(t in 0.0f64..1.0, x in 0.08f64..0.42) {
                let (f0, f1, b) = pair();
                prop_assume!(b.plateau_distance(t) > b.delta);
                prop_assert!(isotopy_eval(&f0, &f1, &b, t, x, 1).unwrap() < 1.0);
            }

            #[test]
            fn bump_stays_in_unit_interval(t in -2.0f64..2.0) {
                let b = BumpProfile::default();
                let l = b.value(t);
                prop_assert!((0.0..=1.0).contains(&l));
                if b.plateau_distance(t) > b.delta {
                    prop_assert!(0.0 < l && l < 1.0);
                }
            }
        }
    }
}
