//! Topological pressure of `ω(t) = 4t mod 1` and of the baker map, by
//! greedy `(ε, n)`-separated sets and by an Ulam discretization of the
//! transfer operator; equilibrium densities, the variational inequality on
//! periodic orbits, lifted potentials `ψ(θ) = φ(t₀, γ(θ))` and equilibrium
//! states pushed onto invariant graphs.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::base::{BaseMeasureSampler, BasePoint};
use crate::ergodic::{graph_measure_over, EmpiricalMeasure};
use crate::error::{Error, Result};
use crate::graph::graph_value;
use crate::system::SkewSystem;

/// Power iteration tolerance on the eigenvalue and the eigenvector.
pub const POWER_TOL: f64 = 1e-12;
pub const POWER_MAX_ITER: usize = 100_000;

const GAUSS4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_8),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_8),
];

pub type PotentialFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Potential {
    Constant(f64),
    /// `amplitude · cos 2πt`.
    Cosine(f64),
    /// `-log|Dω| = -log 4`.
    NegLogDeriv,
    FiberDependent { f: PotentialFn, holder: bool },
}

impl std::fmt::Debug for Potential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Potential({})", self.name())
    }
}

impl Potential {
    pub fn fiber_dependent(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Potential::FiberDependent {
            f: Arc::new(f),
            holder: true,
        }
    }

    /// `0`, `-log 4` and `0.5·cos 2πt`.
    pub fn shipped() -> Vec<Potential> {
        vec![Potential::Constant(0.0), Potential::NegLogDeriv, Potential::Cosine(0.5)]
    }

    pub fn name(&self) -> String {
        match self {
            Potential::Constant(c) => format!("constant({c})"),
            Potential::Cosine(a) => format!("cosine({a})"),
            Potential::NegLogDeriv => "neg_log_deriv".into(),
            Potential::FiberDependent { .. } => "fiber_dependent".into(),
        }
    }

    pub fn is_holder(&self) -> bool {
        match self {
            Potential::FiberDependent { holder, .. } => *holder,
            _ => true,
        }
    }

    pub fn is_fiber_independent(&self) -> bool {
        !matches!(self, Potential::FiberDependent { .. })
    }

    /// `φ(t)` for a fibre-independent potential.
    pub fn eval_t(&self, t: f64) -> Result<f64> {
        match *self {
            Potential::Constant(c) => Ok(c),
            Potential::Cosine(a) => Ok(a * (std::f64::consts::TAU * t).cos()),
            Potential::NegLogDeriv => Ok(-(4f64.ln())),
            Potential::FiberDependent { .. } => Err(Error::UnsupportedVariant {
                op: "eval_t",
                variant: "fiber_dependent",
            }),
        }
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match self {
            Potential::FiberDependent { f, .. } => f(t, x),
            p => p.eval_t(t).expect("fibre-independent"),
        }
    }

    /// `min_t φ(t)`.
    pub fn min_t(&self) -> Result<f64> {
        match *self {
            Potential::Constant(c) => Ok(c),
            Potential::Cosine(a) => Ok(-a.abs()),
            Potential::NegLogDeriv => Ok(-(4f64.ln())),
            Potential::FiberDependent { .. } => Err(Error::UnsupportedVariant {
                op: "min_t",
                variant: "fiber_dependent",
            }),
        }
    }

    fn require_base(&self, op: &'static str) -> Result<()> {
        if self.is_fiber_independent() {
            Ok(())
        } else {
            Err(Error::UnsupportedVariant {
                op,
                variant: "fiber_dependent",
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PressureMethod {
    SeparatedSets,
    TransferOperator,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparatedRow {
    pub epsilon: f64,
    pub n: usize,
    /// Size of the greedy separated set.
    pub count: usize,
    /// `log Σ_{x∈E} exp S_nφ(x)`.
    pub log_sum: f64,
    /// `(1/n) log Σ`.
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferRow {
    pub resolution: usize,
    pub eigenvalue: f64,
    pub pressure: f64,
    pub iterations: usize,
    /// Estimate of `|λ₂|` from deflated power iteration.
    pub second_modulus: f64,
    /// `|P(R) - P(previous R)|`.
    pub cauchy: Option<f64>,
}

impl TransferRow {
    pub fn gap(&self) -> f64 {
        self.eigenvalue - self.second_modulus
    }
}

#[derive(Debug, Clone)]
pub struct PressureResult {
    pub method: PressureMethod,
    pub value: f64,
    pub separated: Vec<SeparatedRow>,
    pub transfer: Vec<TransferRow>,
}

/// Base map for the separated-set estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeparatedSpace {
    Circle,
    Baker,
}

#[derive(Debug, Clone, Copy)]
pub struct SeparatedConfig {
    /// Grid points per minimal needed spacing.
    pub oversample: usize,
}

impl Default for SeparatedConfig {
    fn default() -> Self {
        SeparatedConfig { oversample: 2 }
    }
}

#[inline]
fn circ(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    d.min(1.0 - d)
}

/// Accepted points indexed by their itinerary through `K` cells per
/// coordinate, so that only points in the same or adjacent cells at every
/// time are compared exactly.
struct CellTrie {
    children: Vec<Vec<(u32, u32)>>,
    leaves: Vec<Vec<u32>>,
    k: u32,
}

impl CellTrie {
    fn new(k: u32) -> Self {
        CellTrie {
            children: vec![Vec::new()],
            leaves: vec![Vec::new()],
            k,
        }
    }

    fn insert(&mut self, code: &[u32], id: u32) {
        let mut node = 0usize;
        for &c in code {
            let next = self.children[node].iter().find(|(cc, _)| *cc == c).map(|&(_, n)| n as usize);
            node = match next {
                Some(n) => n,
                None => {
                    let n = self.children.len();
                    self.children.push(Vec::new());
                    self.leaves.push(Vec::new());
                    self.children[node].push((c, n as u32));
                    n
                }
            };
        }
        self.leaves[node].push(id);
    }

    /// Calls `hit` on every stored id whose code is within one cell of
    /// `code` (circularly) at every position, stopping when `hit` returns
    /// true. `dims` codes per time step are packed as `c₀·K + c₁ …`.
    fn any_near(&self, code: &[u32], dims: usize, hit: &mut impl FnMut(u32) -> bool) -> bool {
        self.walk(0, code, dims, hit)
    }

    fn near(&self, a: u32, b: u32, dims: usize) -> bool {
        let k = self.k;
        let (mut a, mut b) = (a, b);
        for _ in 0..dims {
            let (x, y) = (a % k, b % k);
            let d = x.abs_diff(y);
            if d > 1 && d != k - 1 {
                return false;
            }
            a /= k;
            b /= k;
        }
        true
    }

    fn walk(&self, node: usize, code: &[u32], dims: usize, hit: &mut impl FnMut(u32) -> bool) -> bool {
        if code.is_empty() {
            return self.leaves[node].iter().any(|&id| hit(id));
        }
        for &(c, child) in &self.children[node] {
            if self.near(c, code[0], dims) && self.walk(child as usize, &code[1..], dims, hit) {
                return true;
            }
        }
        false
    }
}

/// Greedy `(ε, n)`-separated set from a grid; returns `(count, log Σ e^{S_nφ})`.
fn greedy_separated(
    space: SeparatedSpace,
    phi: &Potential,
    eps: f64,
    n: usize,
    cfg: &SeparatedConfig,
) -> Result<(usize, f64)> {
    let k = (1.0 / eps).floor() as u32;
    let nt = cfg.oversample * ((4f64.powi(n as i32 - 1) / eps).ceil() as usize);
    let ns = match space {
        SeparatedSpace::Circle => 1,
        SeparatedSpace::Baker => cfg.oversample * (1.0 / eps).ceil() as usize,
    };
    if nt < k as usize {
        return Err(Error::config(format!(
            "separated-set grid of {nt} points is coarser than 1/eps = {k}"
        )));
    }
    let dims = if space == SeparatedSpace::Baker { 2 } else { 1 };
    let mut trie = CellTrie::new(k);
    let mut orbits: Vec<f64> = Vec::new(); // (t, s) per time step
    let mut weights: Vec<f64> = Vec::new();
    let mut orbit = vec![(0.0, 0.0); n];
    let mut code = vec![0u32; n];
    let cell = |v: f64| ((v * k as f64) as u32).min(k - 1);
    for it in 0..nt {
        for is in 0..ns {
            let (mut t, mut s) = (it as f64 / nt as f64, (is as f64 + 0.5) / ns as f64);
            let mut sum = 0.0;
            for step in 0..n {
                orbit[step] = (t, s);
                code[step] = if dims == 2 { cell(t) * k + cell(s) } else { cell(t) };
                sum += phi.eval_t(t)?;
                let y = 4.0 * t;
                let d = y.floor();
                (t, s) = (y - d, (s + d) / 4.0);
            }
            let mut check = |id: u32| {
                let base = id as usize * n * 2;
                (0..n).all(|step| {
                    let (t, s) = orbit[step];
                    let (u, v) = (orbits[base + 2 * step], orbits[base + 2 * step + 1]);
                    circ(t, u) < eps && (dims == 1 || circ(s, v) < eps)
                })
            };
            if trie.any_near(&code, dims, &mut check) {
                continue;
            }
            let id = weights.len() as u32;
            for &(t, s) in &orbit {
                orbits.push(t);
                orbits.push(s);
            }
            weights.push(sum);
            trie.insert(&code, id);
        }
    }
    let m = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = m + weights.iter().map(|w| (w - m).exp()).sum::<f64>().ln();
    Ok((weights.len(), log_sum))
}

/// Pressure from greedy `(ε, n)`-separated sets built on a grid fine enough
/// to resolve `ε` after `n - 1` expansions. The headline value is
/// `log Z_{n_max} - log Z_{n_max - 1}` at the smallest `ε`, which cancels
/// the `ε`-dependent prefactor of `Z_n`.
pub fn pressure_separated(
    space: SeparatedSpace,
    phi: &Potential,
    epsilons: &[f64],
    n_max: usize,
    cfg: &SeparatedConfig,
) -> Result<PressureResult> {
    phi.require_base("pressure_separated")?;
    if n_max < 2 {
        return Err(Error::config("n_max must be >= 2"));
    }
    if epsilons.is_empty()
        || epsilons.iter().any(|&e| !(e > 0.0 && e < 0.5))
        || epsilons.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::config("epsilons must be decreasing and in (0, 1/2)"));
    }
    if cfg.oversample == 0 {
        return Err(Error::config("oversample must be >= 1"));
    }
    let jobs: Vec<(f64, usize)> = epsilons
        .iter()
        .flat_map(|&e| (1..=n_max).map(move |n| (e, n)))
        .collect();
    let rows: Result<Vec<SeparatedRow>> = jobs
        .par_iter()
        .map(|&(epsilon, n)| {
            let (count, log_sum) = greedy_separated(space, phi, epsilon, n, cfg)?;
            Ok(SeparatedRow {
                epsilon,
                n,
                count,
                log_sum,
                value: log_sum / n as f64,
            })
        })
        .collect();
    let rows = rows?;
    let eps = *epsilons.last().unwrap();
    let at = |n: usize| {
        rows.iter()
            .find(|r| r.epsilon == eps && r.n == n)
            .expect("row computed")
            .log_sum
    };
    Ok(PressureResult {
        method: PressureMethod::SeparatedSets,
        value: at(n_max) - at(n_max - 1),
        separated: rows,
        transfer: Vec::new(),
    })
}

/// Ulam matrix of the transfer operator: column `k` has the four entries
/// `L[(4k + r) mod R, k] = 4R ∫ e^φ` over `[(4k + r)/4R, (4k + r + 1)/4R]`.
#[derive(Debug, Clone)]
pub struct TransferDiscretization {
    pub resolution: usize,
    /// `entries[k][r]`.
    pub entries: Vec<[f64; 4]>,
}

impl TransferDiscretization {
    pub fn new(phi: &Potential, resolution: usize) -> Result<Self> {
        phi.require_base("transfer operator")?;
        if resolution == 0 {
            return Err(Error::config("resolution must be >= 1"));
        }
        let r = resolution as f64;
        let h = 1.0 / (4.0 * r);
        let entries: Result<Vec<[f64; 4]>> = (0..resolution)
            .into_par_iter()
            .map(|k| {
                let mut col = [0.0; 4];
                for (b, slot) in col.iter_mut().enumerate() {
                    let a = (4 * k + b) as f64 * h;
                    let mut acc = 0.0;
                    for &(node, w) in &GAUSS4 {
                        acc += w * phi.eval_t(a + 0.5 * h * (node + 1.0))?.exp();
                    }
                    *slot = 4.0 * r * 0.5 * h * acc;
                }
                Ok(col)
            })
            .collect();
        Ok(TransferDiscretization {
            resolution,
            entries: entries?,
        })
    }

    #[inline]
    fn row(&self, k: usize, b: usize) -> usize {
        (4 * k + b) % self.resolution
    }

    pub fn entry(&self, j: usize, k: usize) -> f64 {
        (0..4).filter(|&b| self.row(k, b) == j).map(|b| self.entries[k][b]).sum()
    }

    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (k, col) in self.entries.iter().enumerate() {
            for (b, &e) in col.iter().enumerate() {
                out[self.row(k, b)] += e * v[k];
            }
        }
    }

    pub fn apply_transpose(&self, v: &[f64], out: &mut [f64]) {
        for (k, col) in self.entries.iter().enumerate() {
            out[k] = col.iter().enumerate().map(|(b, &e)| e * v[self.row(k, b)]).sum();
        }
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.entries.iter().map(|c| c.iter().sum()).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.resolution];
        self.apply(&vec![1.0; self.resolution], &mut out);
        out
    }
}

/// Leading eigenvalue and positive eigenvector by power iteration.
fn power_iteration(op: impl Fn(&[f64], &mut [f64]), n: usize) -> Result<(f64, Vec<f64>, usize)> {
    let mut v = vec![1.0 / n as f64; n];
    let mut w = vec![0.0; n];
    let mut lambda = 0.0;
    let mut trace = Vec::new();
    for it in 1..=POWER_MAX_ITER {
        op(&v, &mut w);
        let s: f64 = w.iter().sum();
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::numerical(format!("power iteration lost positivity at step {it}")));
        }
        w.iter_mut().for_each(|x| *x /= s);
        let dv = v.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let vmax = w.iter().copied().fold(0.0, f64::max);
        std::mem::swap(&mut v, &mut w);
        let done = (s - lambda).abs() <= POWER_TOL * s && dv <= POWER_TOL * vmax;
        lambda = s;
        if trace.len() == 8 {
            trace.remove(0);
        }
        trace.push(s);
        if done {
            return Ok((lambda, v, it));
        }
    }
    Err(Error::numerical(format!(
        "power iteration did not converge in {POWER_MAX_ITER} steps; last eigenvalues {trace:?}"
    )))
}

/// `|λ₂|` from power iteration on `L - λ h ℓᵀ/(ℓᵀh)`.
fn second_modulus(d: &TransferDiscretization, lambda: f64, h: &[f64], l: &[f64]) -> f64 {
    let n = d.resolution;
    let lh: f64 = l.iter().zip(h).map(|(a, b)| a * b).sum();
    let mut v: Vec<f64> = (0..n).map(|k| ((k * 7919 + 13) % 101) as f64 / 101.0 - 0.5).collect();
    let mut w = vec![0.0; n];
    let deflate = |v: &mut Vec<f64>| {
        let c: f64 = l.iter().zip(v.iter()).map(|(a, b)| a * b).sum::<f64>() / lh;
        v.iter_mut().zip(h).for_each(|(x, hh)| *x -= c * hh);
    };
    deflate(&mut v);
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut nv = norm(&v);
    if nv == 0.0 {
        return 0.0;
    }
    v.iter_mut().for_each(|x| *x /= nv);
    let mut logs = Vec::new();
    for _ in 0..400 {
        d.apply(&v, &mut w);
        deflate(&mut w);
        nv = norm(&w);
        if nv <= 1e-300 * lambda {
            return 0.0;
        }
        logs.push(nv.ln());
        w.iter_mut().for_each(|x| *x /= nv);
        std::mem::swap(&mut v, &mut w);
    }
    let tail = &logs[logs.len() - 100..];
    (tail.iter().sum::<f64>() / tail.len() as f64).exp()
}

#[derive(Debug, Clone)]
pub struct TransferResult {
    pub pressure: PressureResult,
    /// At the finest resolution: equilibrium mass per cell.
    pub cell_mass: Vec<f64>,
    /// Equilibrium density per cell (`R · mass`).
    pub density: Vec<f64>,
    /// `∫ φ dμ` under the discrete equilibrium state.
    pub potential_integral: f64,
}

impl TransferResult {
    pub fn resolution(&self) -> usize {
        self.cell_mass.len()
    }

    /// `h = P - ∫ φ dμ`.
    pub fn entropy(&self) -> f64 {
        self.pressure.value - self.potential_integral
    }

    /// Cell index of `u ∈ [0, 1)` under the equilibrium CDF.
    pub fn quantile_cell(&self, cdf: &[f64], u: f64) -> usize {
        cdf.partition_point(|&c| c <= u).min(self.cell_mass.len() - 1)
    }

    pub fn cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.cell_mass
            .iter()
            .map(|m| {
                acc += m;
                acc
            })
            .collect()
    }
}

fn cell_average(phi: &Potential, j: usize, r: usize) -> Result<f64> {
    let h = 1.0 / r as f64;
    let a = j as f64 * h;
    let mut acc = 0.0;
    for &(node, w) in &GAUSS4 {
        acc += w * phi.eval_t(a + 0.5 * h * (node + 1.0))?;
    }
    Ok(0.5 * acc)
}

/// Pressure `log λ₁` of the discretized transfer operator on a resolution
/// ladder, with the equilibrium state at the finest resolution.
pub fn transfer_pressure(phi: &Potential, resolutions: &[usize]) -> Result<TransferResult> {
    phi.require_base("transfer_pressure")?;
    if !phi.is_holder() {
        return Err(Error::config("transfer pressure needs a Hölder potential"));
    }
    if resolutions.is_empty() || resolutions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("resolution ladder must be increasing"));
    }
    let mut rows: Vec<TransferRow> = Vec::new();
    let mut last = None;
    for &r in resolutions {
        let d = TransferDiscretization::new(phi, r)?;
        let (lambda, h, iterations) = power_iteration(|v, o| d.apply(v, o), r)?;
        let (_, l, _) = power_iteration(|v, o| d.apply_transpose(v, o), r)?;
        let second = second_modulus(&d, lambda, &h, &l);
        let pressure = lambda.ln();
        rows.push(TransferRow {
            resolution: r,
            eigenvalue: lambda,
            pressure,
            iterations,
            second_modulus: second,
            cauchy: rows.last().map(|p: &TransferRow| (pressure - p.pressure).abs()),
        });
        last = Some((h, l));
    }
    let (h, l) = last.expect("ladder is non-empty");
    let r = *resolutions.last().unwrap();
    let mut mass: Vec<f64> = h.iter().zip(&l).map(|(a, b)| a * b).collect();
    let total: f64 = mass.iter().sum();
    mass.iter_mut().for_each(|m| *m /= total);
    let mut potential_integral = 0.0;
    for (j, m) in mass.iter().enumerate() {
        potential_integral += m * cell_average(phi, j, r)?;
    }
    let value = rows.last().unwrap().pressure;
    Ok(TransferResult {
        pressure: PressureResult {
            method: PressureMethod::TransferOperator,
            value,
            separated: Vec::new(),
            transfer: rows,
        },
        density: mass.iter().map(|m| m * r as f64).collect(),
        cell_mass: mass,
        potential_integral,
    })
}

#[derive(Debug, Clone)]
pub struct VariationalReport {
    pub pressure: f64,
    pub orbits_checked: usize,
    /// Largest cycle average of `φ`, with its period and `k` in
    /// `t = k/(4^p - 1)`.
    pub max_cycle_average: f64,
    pub argmax: (u32, u64),
    /// `P ≥` every cycle average.
    pub periodic_bound: bool,
    /// `P ≥ P(0) + min φ`, when `P(0)` was given.
    pub entropy_bound: Option<bool>,
}

impl VariationalReport {
    pub fn passed(&self) -> bool {
        self.periodic_bound && self.entropy_bound.unwrap_or(true)
    }
}

/// Checks `P(φ) ≥ (1/p) Σ φ(ωⁱ t)` on every periodic point
/// `t = k/(4^p - 1)`, `p ≤ max_period`, iterated exactly in integers.
pub fn variational_check(
    phi: &Potential,
    pressure: f64,
    max_period: u32,
    pressure_zero: Option<f64>,
) -> Result<VariationalReport> {
    phi.require_base("variational_check")?;
    if !(1..=13).contains(&max_period) {
        return Err(Error::config("max_period must be in 1..=13"));
    }
    let mut best = (f64::NEG_INFINITY, (0u32, 0u64));
    let mut count = 0usize;
    for p in 1..=max_period {
        let m = 4u64.pow(p) - 1;
        for k in 0..m {
            let mut q = k;
            let mut sum = 0.0;
            for _ in 0..p {
                sum += phi.eval_t(q as f64 / m as f64)?;
                q = (q * 4) % m;
            }
            let avg = sum / p as f64;
            if avg > best.0 {
                best = (avg, (p, k));
            }
            count += 1;
        }
    }
    let entropy_bound = match pressure_zero {
        Some(p0) => Some(pressure >= p0 + phi.min_t()? - 1e-12),
        None => None,
    };
    Ok(VariationalReport {
        pressure,
        orbits_checked: count,
        max_cycle_average: best.0,
        argmax: best.1,
        periodic_bound: pressure >= best.0,
        entropy_bound,
    })
}

/// `ψ_i(θ) = φ(t₀(θ), γ_i(θ))`.
#[derive(Debug, Clone)]
pub struct LiftedPotential<'a> {
    pub sys: &'a SkewSystem,
    pub band: usize,
    pub potential: Potential,
    pub depth: usize,
}

impl LiftedPotential<'_> {
    pub fn eval(&self, p: &BasePoint) -> Result<f64> {
        if self.potential.is_fiber_independent() {
            return self.potential.eval_t(p.t0());
        }
        let x = graph_value(self.sys, self.band, p, self.depth)?;
        Ok(self.potential.eval(p.t0(), x))
    }
}

pub fn lift_potential(sys: &SkewSystem, i: usize, potential: Potential, depth: usize) -> Result<LiftedPotential<'_>> {
    sys.band(i)?;
    Ok(LiftedPotential {
        sys,
        band: i,
        potential,
        depth,
    })
}

#[derive(Debug, Clone)]
pub struct LiftReport {
    pub circle_transfer: f64,
    pub baker_separated: f64,
    pub difference: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub separated: PressureResult,
}

/// Tolerance between the two pressure estimators in [`lifted_pressure_check`].
pub const LIFT_TOLERANCE: f64 = 0.15;

/// Circle transfer pressure of `φ` against the separated-set pressure of
/// `φ ∘ p` over the baker map.
pub fn lifted_pressure_check(
    phi: &Potential,
    resolutions: &[usize],
    baker_epsilons: &[f64],
    baker_n_max: usize,
    cfg: &SeparatedConfig,
) -> Result<LiftReport> {
    phi.require_base("lifted_pressure_check")?;
    let circle = transfer_pressure(phi, resolutions)?.pressure.value;
    let separated = pressure_separated(SeparatedSpace::Baker, phi, baker_epsilons, baker_n_max, cfg)?;
    let difference = (circle - separated.value).abs();
    Ok(LiftReport {
        circle_transfer: circle,
        baker_separated: separated.value,
        difference,
        tolerance: LIFT_TOLERANCE,
        passed: difference <= LIFT_TOLERANCE,
        separated,
    })
}

/// Base points drawn from the equilibrium state by inverse CDF on cells and
/// uniformly within a cell, lifted with a uniform random past.
pub fn sample_equilibrium(eq: &TransferResult, sampler: &BaseMeasureSampler, count: usize) -> Vec<BasePoint> {
    let cdf = eq.cdf();
    let r = eq.resolution() as f64;
    let mut rng = sampler.with_stream(sampler.stream ^ (1 << 62)).rng();
    let ts: Vec<f64> = (0..count)
        .map(|_| {
            let j = eq.quantile_cell(&cdf, rng.gen::<f64>());
            ((j as f64 + rng.gen::<f64>()) / r).min(1.0 - f64::EPSILON)
        })
        .collect();
    sampler
        .lift_circle_points(&ts)
        .into_iter()
        .map(BasePoint::Solenoid)
        .collect()
}

/// `μ_ψ ∘ (id × γ_i)⁻¹`: equilibrium-distributed base points pushed onto
/// the graph. Points are drawn from the equilibrium density, so the atoms
/// carry equal weights.
pub fn pushforward_equilibrium(
    sys: &SkewSystem,
    i: usize,
    eq: &TransferResult,
    sampler: &BaseMeasureSampler,
    count: usize,
    depth: usize,
) -> Result<EmpiricalMeasure> {
    if count == 0 {
        return Err(Error::config("pushforward_equilibrium needs count >= 1"));
    }
    let sampler = sampler.with_past_depth(sampler.past_depth.max(depth + 1));
    let pts = sample_equilibrium(eq, &sampler, count);
    graph_measure_over(sys, i, &pts, &vec![1.0; count], depth)
}
