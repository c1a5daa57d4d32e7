//! Birkhoff averages, Kingman sup-rates, graph Lyapunov exponents, SRB
//! histograms, graph measures and measure comparison.
//!
//! Every Monte Carlo quantity carries a standard error. Atoms that come from
//! one trajectory share a group id and errors are computed from group means,
//! which absorbs the autocorrelation along orbits.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::base::{circle_step, BaseKind, BaseMeasureSampler, BasePoint, WINDOW};
use crate::error::{Error, Result};
use crate::graph::{graph_value, pullback_along};
use crate::system::SkewSystem;

/// Grid for the Kingman derivative supremum.
pub const KINGMAN_GRID: usize = 512;

/// Grid maxima refined by golden-section search.
const KINGMAN_REFINE: usize = 4;

/// Pullback depth used to place orbits on the graph.
pub const DEFAULT_GRAPH_DEPTH: usize = 200;

/// Batches for batch-means standard errors along one orbit.
const BATCHES: usize = 20;

pub type ObservableFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A function of `(t, x)`.
#[derive(Clone)]
pub struct Observable {
    pub name: String,
    f: ObservableFn,
}

impl std::fmt::Debug for Observable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Observable").field("name", &self.name).finish()
    }
}

impl Observable {
    pub fn new(name: impl Into<String>, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Observable {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    #[inline]
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        (self.f)(t, x)
    }

    pub fn fiber() -> Self {
        Observable::new("x", |_, x| x)
    }

    pub fn one() -> Self {
        Observable::new("1", |_, _| 1.0)
    }
}

/// `x`, `x²`, `cos 2πt`, `x·sin 2πt` and Gaussian bumps of width 0.1 at
/// `x = 0.1, 0.3, …, 0.9`.
pub fn default_observables() -> Vec<Observable> {
    use std::f64::consts::TAU;
    let mut out = vec![
        Observable::new("x", |_, x| x),
        Observable::new("x^2", |_, x| x * x),
        Observable::new("cos(2 pi t)", |t, _| (TAU * t).cos()),
        Observable::new("x sin(2 pi t)", |t, x| x * (TAU * t).sin()),
    ];
    for k in 0..5 {
        let c = 0.1 + 0.2 * k as f64;
        out.push(Observable::new(format!("bump({c:.1})"), move |_, x| {
            let u = (x - c) / 0.1;
            (-u * u).exp()
        }));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub t: f64,
    pub x: f64,
    pub weight: f64,
    /// Atoms with the same group come from one trajectory.
    pub group: u32,
}

/// Mass on a `t_bins × x_bins` grid over `[0,1) × [x_lo, x_hi]`, row-major
/// in `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub t_bins: usize,
    pub x_bins: usize,
    pub x_lo: f64,
    pub x_hi: f64,
    pub mass: Vec<f64>,
}

impl Histogram {
    pub fn cell_center(&self, j: usize, k: usize) -> (f64, f64) {
        let h = (self.x_hi - self.x_lo) / self.x_bins as f64;
        ((j as f64 + 0.5) / self.t_bins as f64, self.x_lo + (k as f64 + 0.5) * h)
    }

    fn index(&self, t: f64, x: f64) -> usize {
        let j = ((t * self.t_bins as f64) as usize).min(self.t_bins - 1);
        let k = (((x - self.x_lo) / (self.x_hi - self.x_lo) * self.x_bins as f64).max(0.0) as usize)
            .min(self.x_bins - 1);
        j * self.x_bins + k
    }

    /// Total variation over bins, `½ Σ |a - b|`.
    pub fn tv_distance(&self, other: &Histogram) -> Result<f64> {
        if self.t_bins != other.t_bins || self.x_bins != other.x_bins {
            return Err(Error::config("histograms have different shapes"));
        }
        Ok(0.5 * self.mass.iter().zip(&other.mass).map(|(a, b)| (a - b).abs()).sum::<f64>())
    }

    /// Mass-weighted mean over t-bins of the conditional variance of `x`.
    pub fn mean_conditional_variance(&self) -> f64 {
        let mut out = 0.0;
        for j in 0..self.t_bins {
            let row = &self.mass[j * self.x_bins..(j + 1) * self.x_bins];
            let m: f64 = row.iter().sum();
            if m == 0.0 {
                continue;
            }
            let mean = row.iter().enumerate().map(|(k, w)| w * self.cell_center(j, k).1).sum::<f64>() / m;
            let var = row
                .iter()
                .enumerate()
                .map(|(k, w)| w * (self.cell_center(j, k).1 - mean).powi(2))
                .sum::<f64>()
                / m;
            out += m * var;
        }
        out
    }
}

/// A normalized weighted atom set on band `band`, optionally with the
/// histogram it was accumulated into.
#[derive(Debug, Clone)]
pub struct EmpiricalMeasure {
    pub band: usize,
    pub atoms: Vec<Atom>,
    pub histogram: Option<Histogram>,
    /// Largest `|x - γ(θ)|` seen over the atoms, when tracked.
    pub support_distance: Option<f64>,
}

impl EmpiricalMeasure {
    /// Normalizes the weights to sum to 1.
    pub fn from_atoms(band: usize, mut atoms: Vec<Atom>) -> Result<Self> {
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if atoms.iter().any(|a| !(a.weight >= 0.0)) || !(total > 0.0) {
            return Err(Error::numerical("measure weights must be >= 0 with positive total"));
        }
        for a in &mut atoms {
            a.weight /= total;
        }
        Ok(EmpiricalMeasure {
            band,
            atoms,
            histogram: None,
            support_distance: None,
        })
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    pub fn integrate(&self, obs: &Observable) -> f64 {
        self.atoms.iter().map(|a| a.weight * obs.eval(a.t, a.x)).sum()
    }

    /// `∫ φ` and its standard error from group means.
    pub fn integrate_se(&self, obs: &Observable) -> (f64, f64) {
        let mut groups: std::collections::BTreeMap<u32, (f64, f64)> = Default::default();
        for a in &self.atoms {
            let e = groups.entry(a.group).or_insert((0.0, 0.0));
            e.0 += a.weight;
            e.1 += a.weight * obs.eval(a.t, a.x);
        }
        let mean: f64 = groups.values().map(|(_, s)| s).sum();
        let g = groups.len();
        if g < 2 {
            return (mean, f64::INFINITY);
        }
        let var: f64 = groups
            .values()
            .map(|&(w, s)| {
                let m = s / w;
                w * w * (m - mean).powi(2)
            })
            .sum::<f64>()
            * g as f64
            / (g - 1) as f64;
        (mean, var.sqrt())
    }

    /// The histogram as a measure with one atom per non-empty cell.
    pub fn binned(&self) -> Option<EmpiricalMeasure> {
        let h = self.histogram.as_ref()?;
        let mut atoms = Vec::new();
        for j in 0..h.t_bins {
            for k in 0..h.x_bins {
                let w = h.mass[j * h.x_bins + k];
                if w > 0.0 {
                    let (t, x) = h.cell_center(j, k);
                    atoms.push(Atom {
                        t,
                        x,
                        weight: w,
                        group: atoms.len() as u32,
                    });
                }
            }
        }
        let mut m = EmpiricalMeasure::from_atoms(self.band, atoms).ok()?;
        m.histogram = Some(h.clone());
        Some(m)
    }

    /// Image under one step of `F`, atom by atom.
    pub fn push_forward(&self, sys: &SkewSystem) -> EmpiricalMeasure {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                t: circle_step(a.t),
                x: sys.value(self.band, a.t, a.x),
                ..*a
            })
            .collect();
        EmpiricalMeasure {
            band: self.band,
            atoms,
            histogram: None,
            support_distance: None,
        }
    }

    /// Weighted Kolmogorov–Smirnov distance of the t-marginal to uniform.
    pub fn t_marginal_ks(&self) -> f64 {
        let mut ts: Vec<(f64, f64)> = self.atoms.iter().map(|a| (a.t, a.weight)).collect();
        ts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut cdf = 0.0;
        let mut d: f64 = 0.0;
        for (t, w) in ts {
            d = d.max((t - cdf).abs());
            cdf += w;
            d = d.max((cdf - t).abs());
        }
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    /// `mean ± k·se`.
    pub fn band(&self, k: f64) -> (f64, f64) {
        (self.mean - k * self.se, self.mean + k * self.se)
    }

    fn from_samples(xs: &[f64]) -> Estimate {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        if xs.len() < 2 {
            return Estimate { mean, se: f64::INFINITY };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Estimate {
            mean,
            se: (var / n).sqrt(),
        }
    }
}

fn batch_means(values: &[f64]) -> Estimate {
    let b = BATCHES.min(values.len()).max(1);
    let len = values.len() / b;
    if len == 0 {
        return Estimate::from_samples(values);
    }
    let means: Vec<f64> = (0..b)
        .map(|k| values[k * len..(k + 1) * len].iter().sum::<f64>() / len as f64)
        .collect();
    let mut e = Estimate::from_samples(&means);
    e.mean = values.iter().sum::<f64>() / values.len() as f64;
    e
}

/// `(1/n) Σ φ(F^k(start))`, `k = burn_in..burn_in + n`, with a batch-means
/// standard error.
pub fn birkhoff_average(
    sys: &SkewSystem,
    obs: &Observable,
    start: (&BasePoint, f64),
    n: usize,
    burn_in: usize,
) -> Result<Estimate> {
    if n == 0 {
        return Err(Error::config("birkhoff_average needs n >= 1"));
    }
    let (p, x0) = start;
    let i = sys.band_of(x0).ok_or_else(|| Error::Domain {
        x: x0,
        lo: sys.bands[0].interval.lo,
        hi: sys.bands[sys.bands.len() - 1].interval.hi,
    })?;
    let ts = p.forward_ts(burn_in + n);
    let mut x = x0;
    let mut values = Vec::with_capacity(n);
    for (k, &t) in ts.iter().enumerate() {
        if k >= burn_in {
            values.push(obs.eval(t, x));
        }
        x = sys.value(i, t, x);
    }
    Ok(batch_means(&values))
}

/// `log Dfᵐ` along `ts[0..m]` at `x`.
fn log_deriv_along(sys: &SkewSystem, i: usize, ws: &[f64], x: f64) -> f64 {
    let mut x = x;
    let mut acc = 0.0;
    for &w in ws {
        let (y, d) = sys.value_deriv_w(i, w, x);
        acc += d.ln();
        x = y;
    }
    acc
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    const G: f64 = 0.618_033_988_749_894_8;
    let mut c = b - G * (b - a);
    let mut d = a + G * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..60 {
        if b - a < 1e-12 {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - G * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + G * (b - a);
            fd = f(d);
        }
    }
    fc.max(fd)
}

/// `log ς_m` for every `m` in `ms` (ascending) along the weights `ws`
/// (`ws[k] = ℓ(t_k)²`): the supremum of `log Dfᵐ` over the band, from a
/// 512-point grid evolved jointly and golden-section refinement around the
/// largest grid values and at the band ends.
pub fn log_sigma_ladder(sys: &SkewSystem, i: usize, ws: &[f64], ms: &[usize]) -> Vec<f64> {
    let iv = sys.bands[i].interval;
    let grid: Vec<f64> = iv.grid(KINGMAN_GRID).collect();
    let mut xs = grid.clone();
    let mut acc = vec![0.0; xs.len()];
    let mut out = Vec::with_capacity(ms.len());
    let mut done = 0;
    for &m in ms {
        for &w in &ws[done..m] {
            for (x, a) in xs.iter_mut().zip(acc.iter_mut()) {
                let (y, d) = sys.value_deriv_w(i, w, *x);
                *a += d.ln();
                *x = y;
            }
        }
        done = m;
        let mut order: Vec<usize> = (0..acc.len()).collect();
        order.sort_by(|&a, &b| acc[b].total_cmp(&acc[a]));
        let mut best = acc[order[0]];
        let seg = &ws[..m];
        let h = |x: f64| log_deriv_along(sys, i, seg, x);
        for &k in order.iter().take(KINGMAN_REFINE) {
            let a = grid[k.saturating_sub(1)];
            let b = grid[(k + 1).min(grid.len() - 1)];
            best = best.max(golden_max(h, a, b));
        }
        out.push(best);
    }
    out
}

/// `log ς_m` along `ws[0..m]`.
pub fn log_sigma(sys: &SkewSystem, i: usize, ws: &[f64], m: usize) -> f64 {
    log_sigma_ladder(sys, i, ws, &[m])[0]
}

pub fn default_ladder() -> Vec<usize> {
    (0..=8).map(|k| 1usize << k).collect()
}

#[derive(Debug, Clone)]
pub struct KingmanEstimate {
    pub band: usize,
    pub ladder: Vec<usize>,
    pub log_sigma: Vec<f64>,
    /// `(1/m) log ς_m`.
    pub rates: Vec<f64>,
    /// Running infimum of `rates`.
    pub running_inf: Vec<f64>,
    pub base: BasePoint,
}

impl KingmanEstimate {
    pub fn estimate(&self) -> f64 {
        *self.running_inf.last().expect("ladder is non-empty")
    }
}

fn check_ladder(ladder: &[usize]) -> Result<()> {
    if ladder.is_empty() || ladder[0] == 0 || ladder.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("m ladder must be strictly increasing and start at >= 1"));
    }
    Ok(())
}

fn weights_along(sys: &SkewSystem, p: &BasePoint, n: usize) -> Vec<f64> {
    p.forward_ts(n).into_iter().map(|t| sys.weight(t)).collect()
}

/// `(1/m) log ς_{m,i}(θ)` over the ladder with its running infimum.
pub fn kingman_rate(sys: &SkewSystem, i: usize, p: &BasePoint, ladder: &[usize]) -> Result<KingmanEstimate> {
    sys.band(i)?;
    check_ladder(ladder)?;
    let ws = weights_along(sys, p, *ladder.last().unwrap());
    let log_sigma = log_sigma_ladder(sys, i, &ws, ladder);
    let rates: Vec<f64> = log_sigma.iter().zip(ladder).map(|(l, &m)| l / m as f64).collect();
    let mut running_inf = Vec::with_capacity(rates.len());
    let mut r = f64::INFINITY;
    for &x in &rates {
        r = r.min(x);
        running_inf.push(r);
    }
    Ok(KingmanEstimate {
        band: i,
        ladder: ladder.to_vec(),
        log_sigma,
        rates,
        running_inf,
        base: p.clone(),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct SubadditivityReport {
    pub pairs: usize,
    /// `max(log ς_{m+k}(θ) - log ς_m(θ) - log ς_k(S^m θ))`.
    pub max_violation: f64,
}

/// Checks `log ς_{m+k}(θ) ≤ log ς_m(θ) + log ς_k(S^m θ)` on all ladder pairs
/// with `m + k ≤ max(ladder)`.
pub fn kingman_subadditivity(
    sys: &SkewSystem,
    i: usize,
    p: &BasePoint,
    ladder: &[usize],
) -> Result<SubadditivityReport> {
    sys.band(i)?;
    check_ladder(ladder)?;
    let top = *ladder.last().unwrap();
    let ws = weights_along(sys, p, top);
    let head = log_sigma_ladder(sys, i, &ws, &(1..=top).collect::<Vec<_>>());
    let mut pairs = Vec::new();
    for &m in ladder {
        for &k in ladder {
            if m + k <= top {
                pairs.push((m, k));
            }
        }
    }
    let tails: Vec<f64> = pairs
        .par_iter()
        .map(|&(m, k)| log_sigma(sys, i, &ws[m..], k))
        .collect();
    let max_violation = pairs
        .iter()
        .zip(&tails)
        .map(|(&(m, k), tail)| head[m + k - 1] - head[m - 1] - tail)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(SubadditivityReport {
        pairs: pairs.len(),
        max_violation,
    })
}

#[derive(Debug, Clone)]
pub struct KingmanSummary {
    pub band: usize,
    pub ladder: Vec<usize>,
    /// Mean of `(1/m) log ς_m` per ladder entry.
    pub mean_rates: Vec<f64>,
    /// Mean running infimum at the top of the ladder, with standard error.
    pub estimate: Estimate,
    pub samples: Vec<KingmanEstimate>,
}

/// Monte Carlo mean of the running-infimum estimate over sampled base points.
pub fn kingman_monte_carlo(
    sys: &SkewSystem,
    i: usize,
    sampler: &BaseMeasureSampler,
    count: usize,
    ladder: &[usize],
) -> Result<KingmanSummary> {
    check_ladder(ladder)?;
    let top = *ladder.last().unwrap();
    let sampler = sampler.with_future_len(sampler.future_len.max(top + WINDOW));
    let kind = if sys.base == BaseKind::Circle { BaseKind::Solenoid } else { sys.base };
    let pts = sampler.sample(kind, count);
    let samples: Result<Vec<KingmanEstimate>> =
        pts.par_iter().map(|p| kingman_rate(sys, i, p, ladder)).collect();
    let samples = samples?;
    let n = samples.len() as f64;
    let mean_rates = (0..ladder.len())
        .map(|j| samples.iter().map(|s| s.rates[j]).sum::<f64>() / n)
        .collect();
    let finals: Vec<f64> = samples.iter().map(|s| s.estimate()).collect();
    Ok(KingmanSummary {
        band: i,
        ladder: ladder.to_vec(),
        mean_rates,
        estimate: Estimate::from_samples(&finals),
        samples,
    })
}

/// Orbit average of `log Df` started on the graph at `p`.
pub fn graph_lyapunov_at(sys: &SkewSystem, i: usize, p: &BasePoint, n: usize, depth: usize) -> Result<f64> {
    let x0 = graph_value(sys, i, p, depth)?;
    let ws = weights_along(sys, p, n);
    Ok(log_deriv_along(sys, i, &ws, x0) / n as f64)
}

#[derive(Debug, Clone)]
pub struct LyapunovEstimate {
    pub band: usize,
    pub estimate: Estimate,
    pub samples: Vec<f64>,
    pub n: usize,
}

/// Mean over sampled base points of the orbit average of `log Df` along the
/// graph, with standard error.
pub fn graph_lyapunov(
    sys: &SkewSystem,
    i: usize,
    sampler: &BaseMeasureSampler,
    count: usize,
    n: usize,
) -> Result<LyapunovEstimate> {
    graph_lyapunov_depth(sys, i, sampler, count, n, DEFAULT_GRAPH_DEPTH)
}

pub fn graph_lyapunov_depth(
    sys: &SkewSystem,
    i: usize,
    sampler: &BaseMeasureSampler,
    count: usize,
    n: usize,
    depth: usize,
) -> Result<LyapunovEstimate> {
    if count == 0 || n == 0 {
        return Err(Error::config("graph_lyapunov needs count, n >= 1"));
    }
    sys.band(i)?;
    let sampler = sampler
        .with_past_depth(sampler.past_depth.max(depth + 1))
        .with_future_len(sampler.future_len.max(n + WINDOW));
    let pts = sampler.sample(BaseKind::Solenoid, count);
    let samples: Result<Vec<f64>> = pts
        .par_iter()
        .map(|p| graph_lyapunov_at(sys, i, p, n, depth))
        .collect();
    let samples = samples?;
    Ok(LyapunovEstimate {
        band: i,
        estimate: Estimate::from_samples(&samples),
        samples,
        n,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct SrbBudget {
    pub n_points: usize,
    pub n_iter: usize,
    pub burn_in: usize,
    pub t_bins: usize,
    pub x_bins: usize,
    /// Keep every `thin`-th iterate as an atom.
    pub thin: usize,
    /// Pullback depth for the support distance; 0 skips it.
    pub support_depth: usize,
}

impl Default for SrbBudget {
    fn default() -> Self {
        SrbBudget {
            n_points: 1000,
            n_iter: 10_000,
            burn_in: 1000,
            t_bins: 128,
            x_bins: 256,
            thin: 10,
            support_depth: 0,
        }
    }
}

/// Histogram and thinned atoms of Lebesgue-random trajectories in band `i`
/// after burn-in. Fibre starts are uniform in the band; trajectories form
/// the error groups.
pub fn srb_estimate(
    sys: &SkewSystem,
    i: usize,
    sampler: &BaseMeasureSampler,
    budget: &SrbBudget,
) -> Result<EmpiricalMeasure> {
    let b = *budget;
    if b.n_points == 0 || b.n_iter == 0 || b.t_bins == 0 || b.x_bins == 0 || b.thin == 0 {
        return Err(Error::config("srb budgets must be >= 1"));
    }
    let iv = sys.band(i)?.interval;
    let steps = b.burn_in + b.n_iter;
    let sampler = sampler
        .with_future_len(sampler.future_len.max(steps + WINDOW))
        .with_past_depth(sampler.past_depth.max(b.support_depth + 1));
    let pts = sampler.sample(BaseKind::Solenoid, b.n_points);
    let mut xrng = sampler.with_stream(sampler.stream ^ (1 << 63)).rng();
    let x0s: Vec<f64> = (0..b.n_points).map(|_| xrng.gen_range(iv.lo..iv.hi)).collect();

    let template = Histogram {
        t_bins: b.t_bins,
        x_bins: b.x_bins,
        x_lo: iv.lo,
        x_hi: iv.hi,
        mass: Vec::new(),
    };
    let per: Vec<(Vec<u32>, Vec<Atom>, f64)> = pts
        .par_iter()
        .zip(&x0s)
        .enumerate()
        .map(|(g, (p, &x0))| {
            let mut counts = vec![0u32; b.t_bins * b.x_bins];
            let mut atoms = Vec::with_capacity(b.n_iter / b.thin + 1);
            let mut dist: f64 = 0.0;
            let BasePoint::Solenoid(sp) = p else { unreachable!("sampled solenoid points") };
            let mut x = x0;
            for (k, t) in sp.forward_ts(steps).enumerate() {
                if k >= b.burn_in {
                    counts[template.index(t, x)] += 1;
                    if (k - b.burn_in).is_multiple_of(b.thin) {
                        atoms.push(Atom {
                            t,
                            x,
                            weight: 1.0,
                            group: g as u32,
                        });
                        if b.support_depth > 0 {
                            let q = BasePoint::Solenoid(sp.shifted(k));
                            let pre = q.preorbit(b.support_depth).expect("past covers the support depth");
                            let (lo, hi) = pullback_along(sys, i, &pre, b.support_depth);
                            dist = dist.max((lo - x).max(x - hi).max(0.0));
                        }
                    }
                }
                x = sys.value(i, t, x);
            }
            (counts, atoms, dist)
        })
        .collect();

    let mut counts = vec![0u64; b.t_bins * b.x_bins];
    let mut atoms = Vec::new();
    let mut dist: f64 = 0.0;
    for (c, a, d) in per {
        for (acc, v) in counts.iter_mut().zip(c) {
            *acc += v as u64;
        }
        atoms.extend(a);
        dist = dist.max(d);
    }
    let total = counts.iter().sum::<u64>() as f64;
    let mut m = EmpiricalMeasure::from_atoms(i, atoms)?;
    m.histogram = Some(Histogram {
        mass: counts.into_iter().map(|c| c as f64 / total).collect(),
        ..template
    });
    if b.support_depth > 0 {
        m.support_distance = Some(dist);
    }
    Ok(m)
}

/// `ν ∘ (id × γ_i)⁻¹`: equal-weight atoms `(t₀(p), γ_i(p))` over sampled
/// base points.
pub fn graph_measure(
    sys: &SkewSystem,
    i: usize,
    sampler: &BaseMeasureSampler,
    count: usize,
    depth: usize,
) -> Result<EmpiricalMeasure> {
    if count == 0 {
        return Err(Error::config("graph_measure needs count >= 1"));
    }
    let sampler = sampler.with_past_depth(sampler.past_depth.max(depth + 1));
    let pts = sampler.sample(BaseKind::Solenoid, count);
    graph_measure_over(sys, i, &pts, &vec![1.0; pts.len()], depth)
}

/// Atoms `(t₀(p), γ_i(p))` with the given weights.
pub fn graph_measure_over(
    sys: &SkewSystem,
    i: usize,
    pts: &[BasePoint],
    weights: &[f64],
    depth: usize,
) -> Result<EmpiricalMeasure> {
    let xs: Result<Vec<f64>> = pts.par_iter().map(|p| graph_value(sys, i, p, depth)).collect();
    let atoms = pts
        .iter()
        .zip(xs?)
        .zip(weights)
        .enumerate()
        .map(|(g, ((p, x), &w))| Atom {
            t: p.t0(),
            x,
            weight: w,
            group: g as u32,
        })
        .collect();
    EmpiricalMeasure::from_atoms(i, atoms)
}

#[derive(Debug, Clone)]
pub struct Discrepancy {
    /// `(observable, ∫φ dA - ∫φ dB, combined standard error)`.
    pub per_observable: Vec<(String, f64, f64)>,
    pub max: f64,
}

impl Discrepancy {
    /// Every difference within `k` combined standard errors.
    pub fn within_sigma(&self, k: f64) -> bool {
        self.per_observable.iter().all(|(_, d, se)| d.abs() <= k * se)
    }
}

/// `max_φ |∫φ dA - ∫φ dB|` with per-observable errors.
pub fn measure_discrepancy_report(a: &EmpiricalMeasure, b: &EmpiricalMeasure, obs: &[Observable]) -> Discrepancy {
    let per_observable: Vec<(String, f64, f64)> = obs
        .iter()
        .map(|o| {
            let (ma, sa) = a.integrate_se(o);
            let (mb, sb) = b.integrate_se(o);
            let se = (sa * sa + sb * sb).sqrt();
            (o.name.clone(), ma - mb, se)
        })
        .collect();
    let max = per_observable.iter().map(|(_, d, _)| d.abs()).fold(0.0, f64::max);
    Discrepancy { per_observable, max }
}

pub fn measure_discrepancy(a: &EmpiricalMeasure, b: &EmpiricalMeasure, obs: &[Observable]) -> f64 {
    obs.iter()
        .map(|o| (a.integrate(o) - b.integrate(o)).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_point(seed: u64, future: usize) -> BasePoint {
        BaseMeasureSampler::new(seed, 0)
            .with_future_len(future)
            .with_past_depth(260)
            .sample(BaseKind::Solenoid, 1)
            .remove(0)
    }

    #[test]
    fn birkhoff_trivial_cases() {
        let sys = SkewSystem::reference();
        let p = random_point(1, 3000);
        let e = birkhoff_average(&sys, &Observable::one(), (&p, 0.3), 2000, 100).unwrap();
        assert_eq!(e.mean, 1.0);
        let z = BasePoint::baker(0.0, 0.0);
        let e = birkhoff_average(&sys, &Observable::fiber(), (&z, 0.18), 500, 0).unwrap();
        assert!((e.mean - 0.18).abs() < 1e-14);
    }

    #[test]
    fn kingman_m1_in_l0_is_sup_df0() {
        let sys = SkewSystem::reference();
        let k = kingman_rate(&sys, 0, &BasePoint::baker(0.1, 0.0), &[1]).unwrap();
        assert!(k.log_sigma[0].abs() < 1e-12, "{}", k.log_sigma[0]);
    }

    #[test]
    fn kingman_oracle_on_short_orbit() {
        // brute-force sup of Df^m over a 20000-point grid
        let sys = SkewSystem::reference_perturbed(0.3).unwrap();
        let p = random_point(7, 100);
        let m = 16;
        let ws = weights_along(&sys, &p, m);
        let iv = sys.bands[0].interval;
        let brute = iv
            .grid(20_000)
            .map(|x| log_deriv_along(&sys, 0, &ws, x))
            .fold(f64::NEG_INFINITY, f64::max);
        let k = kingman_rate(&sys, 0, &p, &[m]).unwrap();
        assert!(k.log_sigma[0] >= brute - 1e-12);
        assert!(k.log_sigma[0] - brute < 1e-6);
    }

    #[test]
    fn subadditivity_on_ladder() {
        for eta in [0.0, 0.3] {
            let sys = SkewSystem::reference_perturbed(eta).unwrap();
            let p = random_point(3, 200);
            let r = kingman_subadditivity(&sys, 0, &p, &[1, 2, 4, 8, 16, 32, 64]).unwrap();
            assert!(r.pairs > 10);
            assert!(r.max_violation <= 1e-9, "eta {eta}: {}", r.max_violation);
        }
    }

    #[test]
    fn running_infimum_is_monotone() {
        let sys = SkewSystem::reference();
        let k = kingman_rate(&sys, 1, &random_point(5, 400), &default_ladder()).unwrap();
        assert!(k.running_inf.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn lyapunov_at_fixed_point_matches_f0_oracle() {
        let sys = SkewSystem::reference();
        let z = BasePoint::baker(0.0, 0.0);
        let n = 5000;
        let lam = graph_lyapunov_at(&sys, 0, &z, n, 200).unwrap();
        let f0 = &sys.bands[0].f0;
        let mut x = 0.08;
        for _ in 0..200 {
            x = f0.value(x);
        }
        let mut acc = 0.0;
        for _ in 0..n {
            acc += f0.deriv(x).ln();
            x = f0.value(x);
        }
        assert!((lam - acc / n as f64).abs() < 1e-12);
        assert!(lam.abs() < 2e-3);
        let start = graph_lyapunov_at(&sys, 0, &z, 100, 1).unwrap();
        assert!(start.is_finite());
    }

    #[test]
    fn graph_measure_weights_and_push_forward() {
        let sys = SkewSystem::reference();
        let m = graph_measure(&sys, 0, &BaseMeasureSampler::new(2, 0), 300, 120).unwrap();
        assert!((m.total_weight() - 1.0).abs() < 1e-12);
        assert!((m.integrate(&Observable::one()) - 1.0).abs() < 1e-12);
        let pushed = m.push_forward(&sys);
        let d = measure_discrepancy_report(&m, &pushed, &[Observable::fiber()]);
        assert!(d.within_sigma(3.0), "{d:?}");
    }

    #[test]
    fn discrepancy_examples() {
        let sys = SkewSystem::reference();
        let a = graph_measure(&sys, 0, &BaseMeasureSampler::new(2, 0), 200, 100).unwrap();
        let b = graph_measure(&sys, 1, &BaseMeasureSampler::new(2, 0), 200, 100).unwrap();
        assert_eq!(measure_discrepancy(&a, &a, &default_observables()), 0.0);
        assert!(measure_discrepancy(&a, &b, &[Observable::fiber()]) > 0.2);
    }

    #[test]
    fn srb_histogram_is_normalized() {
        let sys = SkewSystem::reference();
        let budget = SrbBudget {
            n_points: 20,
            n_iter: 500,
            burn_in: 100,
            t_bins: 16,
            x_bins: 32,
            thin: 5,
            support_depth: 60,
        };
        let m = srb_estimate(&sys, 0, &BaseMeasureSampler::new(4, 0), &budget).unwrap();
        let h = m.histogram.as_ref().unwrap();
        assert!((h.mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(m.atoms.len(), 20 * 100);
        assert!(m.support_distance.unwrap() < 1e-2);
        let binned = m.binned().unwrap();
        assert!((binned.total_weight() - 1.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn kingman_is_subadditive(seed in any::<u64>(), m in 1usize..40, k in 1usize..40, eta in 0.0f64..0.5) {
            let sys = SkewSystem::reference_perturbed(eta).unwrap();
            let p = random_point(seed, 120);
            let ws = weights_along(&sys, &p, m + k);
            let whole = log_sigma(&sys, 0, &ws, m + k);
            let a = log_sigma(&sys, 0, &ws, m);
            let b = log_sigma(&sys, 0, &ws[m..], k);
            prop_assert!(whole <= a + b + 1e-9);
        }

        #[test]
        fn integrating_one_gives_one(seed in any::<u64>(), n in 1usize..50) {
            let sys = SkewSystem::reference();
            let m = graph_measure(&sys, 1, &BaseMeasureSampler::new(seed, 0), n, 30).unwrap();
            prop_assert!((m.integrate(&Observable::one()) - 1.0).abs() < 1e-12);
        }
    }
}
