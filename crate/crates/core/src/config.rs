//! Run configuration: TOML sections for the system, budgets, potential and
//! sweep, dotted-path overrides and a content hash.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::base::BaseKind;
use crate::error::{Error, Result};
use crate::fiber_maps::{Arc, BumpProfile, Interval};
use crate::system::{perturb_band, Band, SkewSystem};
use crate::thermo::Potential;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    #[serde(default = "default_out")]
    pub out: String,
    pub system: SystemConfig,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default)]
    pub potential: PotentialConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

fn default_out() -> String {
    "out".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    pub lo: f64,
    pub hi: f64,
    pub p0: f64,
    pub p1: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub base: BaseKind,
    pub l0: [f64; 2],
    pub l1: [f64; 2],
    pub delta: f64,
    pub eta: f64,
    pub w: f64,
    /// Band whose `f₀` receives the perturbation.
    #[serde(default)]
    pub perturbed_band: usize,
    pub bands: Vec<BandConfig>,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            base: BaseKind::Baker,
            l0: [0.0, 0.25],
            l1: [0.5, 0.75],
            delta: 0.02,
            eta: 0.0,
            w: 0.04,
            perturbed_band: 0,
            bands: vec![
                BandConfig { lo: 0.08, hi: 0.42, p0: 0.18, p1: 0.32, c: 2.0 },
                BandConfig { lo: 0.58, hi: 0.92, p0: 0.68, p1: 0.82, c: 2.0 },
            ],
        }
    }
}

impl SystemConfig {
    pub fn build(&self) -> Result<SkewSystem> {
        if self.bands.is_empty() {
            return Err(Error::config("system needs at least one band"));
        }
        let bands = self
            .bands
            .iter()
            .map(|b| {
                if !(b.lo < b.p0 && b.p0 < b.p1 && b.p1 < b.hi) {
                    return Err(Error::config(format!(
                        "band [{}, {}] needs lo < p0 < p1 < hi, got p0 = {}, p1 = {}",
                        b.lo, b.hi, b.p0, b.p1
                    )));
                }
                Ok(Band::pinch_pair(Interval::new(b.lo, b.hi)?, b.p0, b.p1, b.c))
            })
            .collect::<Result<Vec<_>>>()?;
        let arc = |a: [f64; 2]| Arc { start: a[0], end: a[1] };
        let profile = BumpProfile::new(arc(self.l0), arc(self.l1), self.delta)?;
        let sys = SkewSystem {
            base: self.base,
            bands,
            profile,
            perturbation: None,
        };
        if self.eta == 0.0 {
            Ok(sys)
        } else {
            perturb_band(&sys, self.perturbed_band, self.eta, self.w)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budgets {
    /// Pullback depth for attractors and residuals.
    pub depth: usize,
    /// Pullback depth for graph measures.
    pub measure_depth: usize,
    pub bone_tol: f64,
    /// Base points per Monte Carlo sample.
    pub count: usize,
    /// Orbit length.
    pub n: usize,
    pub burn_in: usize,
    pub t_bins: usize,
    pub x_bins: usize,
    pub thin: usize,
    /// Base points for Kingman and graph Lyapunov estimates.
    pub lyapunov_count: usize,
    /// Orbit length for graph Lyapunov estimates.
    pub lyapunov_n: usize,
    /// Largest `m` of the Kingman ladder (a power of two).
    pub ladder_max: usize,
    pub resolution: Vec<usize>,
    pub epsilons: Vec<f64>,
    pub n_max: usize,
    pub baker_epsilons: Vec<f64>,
    pub baker_n_max: usize,
    pub oversample: usize,
    pub max_period: u32,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            depth: 200,
            measure_depth: 400,
            bone_tol: 1e-4,
            count: 1000,
            n: 10_000,
            burn_in: 1000,
            t_bins: 128,
            x_bins: 256,
            thin: 10,
            lyapunov_count: 200,
            lyapunov_n: 2000,
            ladder_max: 256,
            resolution: vec![256, 512, 1024],
            epsilons: vec![0.125, 0.0625, 0.03125],
            n_max: 7,
            baker_epsilons: vec![0.125, 0.0625],
            baker_n_max: 5,
            oversample: 2,
            max_period: 6,
        }
    }
}

impl Budgets {
    pub fn ladder(&self) -> Vec<usize> {
        std::iter::successors(Some(1usize), |m| Some(m * 2))
            .take_while(|&m| m <= self.ladder_max)
            .collect()
    }

    fn check(&self) -> Result<()> {
        let positive = [
            ("depth", self.depth),
            ("measure_depth", self.measure_depth),
            ("count", self.count),
            ("n", self.n),
            ("t_bins", self.t_bins),
            ("x_bins", self.x_bins),
            ("thin", self.thin),
            ("lyapunov_count", self.lyapunov_count),
            ("lyapunov_n", self.lyapunov_n),
            ("ladder_max", self.ladder_max),
            ("n_max", self.n_max),
            ("baker_n_max", self.baker_n_max),
            ("oversample", self.oversample),
            ("max_period", self.max_period as usize),
        ];
        if let Some((k, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::config(format!("budgets.{k} must be positive")));
        }
        if !(self.bone_tol > 0.0) {
            return Err(Error::config("budgets.bone_tol must be positive"));
        }
        if self.resolution.is_empty() || self.epsilons.is_empty() || self.baker_epsilons.is_empty() {
            return Err(Error::config("budgets.resolution and epsilon lists must be non-empty"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    Constant { value: f64 },
    Cosine { amplitude: f64 },
    NegLogDeriv,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        PotentialConfig::Constant { value: 0.0 }
    }
}

impl PotentialConfig {
    pub fn potential(&self) -> Potential {
        match *self {
            PotentialConfig::Constant { value } => Potential::Constant(value),
            PotentialConfig::Cosine { amplitude } => Potential::Cosine(amplitude),
            PotentialConfig::NegLogDeriv => Potential::NegLogDeriv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub command: String,
    pub etas: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            command: "bones".into(),
            etas: vec![0.0, 0.1, 0.2, 0.3],
        }
    }
}

fn parse_error(src: &str, e: &toml::de::Error) -> Error {
    let (line, column) = match e.span() {
        Some(span) => {
            let before = &src[..span.start.min(src.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
            (line, column)
        }
        None => (0, 0),
    };
    Error::Parse {
        line,
        column,
        message: e.message().to_string(),
    }
}

/// Parses `v` as a TOML value, falling back to a bare string.
fn override_value(v: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {v}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(v.to_string()))
}

fn apply_override(root: &mut toml::Table, entry: &str) -> Result<()> {
    let (path, value) = entry
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override '{entry}' is not key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    let (last, parents) = keys.split_last().expect("split yields one item");
    let bad = |k: &str| Error::config(format!("override path '{path}' has no element '{k}'"));
    let mut node = toml::Value::Table(std::mem::take(root));
    let mut cur = &mut node;
    for k in parents {
        cur = match cur {
            toml::Value::Table(t) => t
                .entry(k.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new())),
            toml::Value::Array(a) => k.parse::<usize>().ok().and_then(|i| a.get_mut(i)).ok_or_else(|| bad(k))?,
            _ => return Err(bad(k)),
        };
    }
    let v = override_value(value.trim());
    if path.trim() == "potential.kind" {
        // a new kind starts from an empty parameter table
        if let toml::Value::Table(t) = cur {
            t.clear();
        }
    }
    match cur {
        toml::Value::Table(t) => {
            t.insert(last.to_string(), v);
        }
        toml::Value::Array(a) => {
            *last.parse::<usize>().ok().and_then(|i| a.get_mut(i)).ok_or_else(|| bad(last))? = v;
        }
        _ => return Err(bad(last)),
    }
    let toml::Value::Table(t) = node else { unreachable!() };
    *root = t;
    Ok(())
}

impl RunConfig {
    pub fn parse(src: &str) -> Result<Self> {
        Self::parse_with(src, &[])
    }

    /// Parses `src`, applies `section.key=value` overrides and checks budgets.
    pub fn parse_with(src: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(src).map_err(|e| parse_error(src, &e))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = if overrides.is_empty() {
            toml::from_str(src).map_err(|e| parse_error(src, &e))?
        } else {
            table
                .try_into()
                .map_err(|e: toml::de::Error| Error::config(e.message().to_string()))?
        };
        cfg.budgets.check()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path, overrides: &[String]) -> Result<Self> {
        let src = std::fs::read_to_string(path)?;
        Self::parse_with(&src, overrides)
    }

    /// The shipped reference configuration.
    pub fn reference(seed: u64) -> Self {
        RunConfig {
            seed: Some(seed),
            out: default_out(),
            system: SystemConfig::default(),
            budgets: Budgets::default(),
            potential: PotentialConfig::default(),
            sweep: SweepConfig::default(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization, leaving out the output
    /// directory so that reruns elsewhere carry the same hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out.clear();
        hex::encode(Sha256::digest(c.to_toml().as_bytes()))
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::config("no seed: set `seed` in the config, --seed or SEED"))
    }

    pub fn system(&self) -> Result<SkewSystem> {
        self.system.build()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SHIPPED: &str = include_str!("../../../configs/default.toml");

    #[test]
    fn shipped_config_is_the_reference() {
        let cfg = RunConfig::parse(SHIPPED).unwrap();
        assert_eq!(cfg, RunConfig::reference(20240601));
        assert_eq!(cfg.system().unwrap(), SkewSystem::reference());
        assert_eq!(cfg.budgets.ladder(), vec![1, 2, 4, 8, 16, 32, 64, 128, 256]);
    }

    #[test]
    fn round_trip_is_a_fixed_point() {
        let cfg = RunConfig::parse(SHIPPED).unwrap();
        let again = RunConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.to_toml(), again.to_toml());
    }

    #[test]
    fn overrides() {
        let cfg = RunConfig::parse_with(
            SHIPPED,
            &[
                "system.eta=0.3".into(),
                "potential.kind=neg_log_deriv".into(),
                "budgets.epsilons=[0.25, 0.125]".into(),
                "out=elsewhere".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.system.eta, 0.3);
        assert_eq!(cfg.potential, PotentialConfig::NegLogDeriv);
        assert_eq!(cfg.budgets.epsilons, vec![0.25, 0.125]);
        assert_eq!(cfg.out, "elsewhere");
        let mut moved = cfg.clone();
        moved.out = "again".into();
        assert_eq!(moved.hash(), cfg.hash());
        assert!(cfg.system().unwrap().perturbation.is_some());
        assert_ne!(cfg.hash(), RunConfig::parse(SHIPPED).unwrap().hash());
    }

    #[test]
    fn parse_errors_carry_position() {
        let src = "seed = 1\n[system]\nbase = \"baker\"\ndelta = ]\n";
        match RunConfig::parse(src) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (4, 9)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_values_are_config_errors() {
        assert!(matches!(
            RunConfig::parse_with(SHIPPED, &["budgets.count=0".into()]),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            RunConfig::parse_with(SHIPPED, &["budgets.colour=1".into()]),
            Err(Error::Config(_))
        ));
        let cfg = RunConfig::parse_with(SHIPPED, &["system.bands.1.c=1.5".into()]).unwrap();
        assert_eq!(cfg.system.bands[1].c, 1.5);
        assert!(RunConfig::parse_with(SHIPPED, &["system.bands.7.c=1.5".into()]).is_err());
        let mut bad = RunConfig::reference(1);
        bad.system.bands[0].p0 = 0.35;
        assert!(bad.system().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn random_configs_round_trip(seed in any::<u32>(), eta in 0.0f64..0.4, depth in 1usize..500, amp in -2.0f64..2.0) {
            let mut cfg = RunConfig::reference(seed as u64);
            cfg.system.eta = eta;
            cfg.budgets.depth = depth;
            cfg.potential = PotentialConfig::Cosine { amplitude: amp };
            let again = RunConfig::parse(&cfg.to_toml()).unwrap();
            prop_assert_eq!(&cfg, &again);
            prop_assert_eq!(cfg.hash(), again.hash());
        }
    }
}
