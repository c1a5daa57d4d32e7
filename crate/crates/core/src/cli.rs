//! Command-line runner: loads a [`RunConfig`], dispatches one command and
//! writes CSV tables plus a TOML manifest into the output directory.
//!
//! Every CSV starts with a `# config_hash=<sha256>` comment line followed by
//! a header whose column names carry their units in brackets.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde::Serialize;

use crate::base::{BaseKind, BaseMeasureSampler, SampleMode};
use crate::config::RunConfig;
use crate::ergodic::{
    default_observables, graph_lyapunov_depth, graph_measure, kingman_monte_carlo, measure_discrepancy_report,
    srb_estimate, SrbBudget,
};
use crate::error::{Error, Result};
use crate::fiber_maps::find_fixed_points;
use crate::graph::{pullback_fiber_tol, sample_multigraph};
use crate::system::{validate_system, SkewSystem, SystemReport};
use crate::thermo::{
    lifted_pressure_check, pressure_separated, pushforward_equilibrium, transfer_pressure, variational_check,
    Potential, SeparatedConfig, SeparatedSpace,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Validate,
    Graph,
    Bones,
    Lyapunov,
    Srb,
    Pressure,
    Equilibrium,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Graph => "graph",
            Command::Bones => "bones",
            Command::Lyapunov => "lyapunov",
            Command::Srb => "srb",
            Command::Pressure => "pressure",
            Command::Equilibrium => "equilibrium",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Parser)]
#[command(name = "skewgraph", version, about = "Invariant graphs, bones, SRB measures and pressure for skew products")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    #[arg(long)]
    pub config: PathBuf,
    /// Override a config entry, e.g. `--set system.eta=0.3`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Random seed; wins over the SEED environment variable and the config.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Exit status for an error: 2 parse/config, 3 validation, 4 numerical.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } | Error::Config(_) => 2,
        Error::Validation(_) => 3,
        Error::Io(_) | Error::Csv(_) => 1,
        _ => 4,
    }
}

/// A table destined for one CSV file.
struct Table {
    file: String,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(file: impl Into<String>, header: Vec<&'static str>) -> Self {
        Table {
            file: file.into(),
            header,
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

fn f(v: f64) -> String {
    format!("{v}")
}

fn u(v: usize) -> String {
    v.to_string()
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputEntry {
    pub path: String,
    pub rows: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub artifact: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub threads: usize,
    pub wall_time_s: f64,
    pub outputs: Vec<OutputEntry>,
    pub summary: BTreeMap<String, f64>,
}

/// Result of one command before it is written out.
#[derive(Default)]
struct Report {
    tables: Vec<Table>,
    summary: BTreeMap<String, f64>,
    /// Sub-runs of a sweep.
    children: Vec<OutputEntry>,
}

fn write_csv(dir: &Path, hash: &str, table: &Table) -> Result<OutputEntry> {
    let path = dir.join(&table.file);
    let mut buf = format!("# config_hash={hash}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(&table.header)?;
        for r in &table.rows {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    std::fs::write(&path, buf)?;
    Ok(OutputEntry {
        path: table.file.clone(),
        rows: table.rows.len(),
    })
}

fn sampler(seed: u64, stream: u64) -> BaseMeasureSampler {
    BaseMeasureSampler::new(seed, stream)
}

fn ensure_valid(report: &SystemReport) -> Result<()> {
    if report.passed() {
        return Ok(());
    }
    let broken: Vec<String> = report
        .checks
        .iter()
        .filter(|c| c.required && !c.passed)
        .map(|c| format!("{}[band {:?}]: {}", c.name, c.band, c.witness))
        .collect();
    Err(Error::Validation(broken.join("; ")))
}

fn validate_table(report: &SystemReport) -> Table {
    let mut t = Table::new("validate.csv", vec!["check", "band", "required[bool]", "passed[bool]", "witness"]);
    for c in &report.checks {
        t.push(vec![
            c.name.clone(),
            c.band.map_or(String::new(), u),
            c.required.to_string(),
            c.passed.to_string(),
            c.witness.clone(),
        ]);
    }
    t
}

fn cmd_graph(cfg: &RunConfig, sys: &SkewSystem, seed: u64) -> Result<Report> {
    let b = &cfg.budgets;
    let sample = sample_multigraph(sys, &sampler(seed, 0), b.count, b.depth, b.bone_tol)?;
    let mut t = Table::new(
        "graph.csv",
        vec![
            "point", "t0[turn]", "s[1]", "band", "lo[x]", "hi[x]", "width[x]", "limit_width[x]", "cauchy_ratio[1]",
            "is_bone[bool]", "residual[x]",
        ],
    );
    for (k, ((p, fibers), res)) in sample.points.iter().zip(&sample.residuals).enumerate() {
        let (t0, s) = p.baker_coords().unwrap_or((p.t0(), f64::NAN));
        for a in fibers {
            t.push(vec![
                u(k),
                f(t0),
                f(s),
                u(a.band),
                f(a.lo),
                f(a.hi),
                f(a.width()),
                f(a.limit_width),
                f(a.cauchy_ratio()),
                a.is_bone.to_string(),
                f(*res),
            ]);
        }
    }
    let mut r = Report::default();
    r.summary.insert("max_residual".into(), sample.max_residual);
    r.summary.insert("bone_fraction".into(), sample.bone_fraction());
    for (n, c) in &sample.cardinality_histogram {
        r.summary
            .insert(format!("cardinality_{n}"), *c as f64 / sample.points.len() as f64);
    }
    r.tables.push(t);
    Ok(r)
}

fn cmd_bones(cfg: &RunConfig, seed: u64) -> Result<Report> {
    let b = &cfg.budgets;
    let mut t = Table::new(
        "bones.csv",
        vec![
            "eta[1]", "band", "random_bone_fraction[1]", "random_mean_width[x]", "special_width[x]",
            "special_is_bone[bool]", "oracle_width[x]",
        ],
    );
    let mut r = Report::default();
    for &eta in &cfg.sweep.etas {
        let mut c = cfg.clone();
        c.system.eta = eta;
        let sys = c.system()?;
        ensure_valid(&validate_system(&sys))?;
        let sample = sample_multigraph(&sys, &sampler(seed, 0), b.count, b.depth, b.bone_tol)?;
        let special = sampler(seed, 1)
            .with_mode(SampleMode::BoneSite)
            .with_past_depth(b.depth + 1)
            .sample(BaseKind::Solenoid, 1)
            .remove(0);
        for (i, band) in sys.bands.iter().enumerate() {
            let n = sample.points.len() as f64;
            let mean_width = sample.points.iter().map(|(_, fs)| fs[i].width()).sum::<f64>() / n;
            let a = pullback_fiber_tol(&sys, i, &special, b.depth, b.bone_tol)?;
            let fps = find_fixed_points(&band.f0, 1e-9);
            let oracle = match (fps.first(), fps.last()) {
                (Some(lo), Some(hi)) => hi.location - lo.location,
                _ => f64::NAN,
            };
            t.push(vec![
                f(eta),
                u(i),
                f(sample.bone_fraction_by_band[i]),
                f(mean_width),
                f(a.width()),
                a.is_bone.to_string(),
                f(oracle),
            ]);
            r.summary
                .insert(format!("eta_{eta}_band_{i}_bone_fraction"), sample.bone_fraction_by_band[i]);
        }
    }
    r.tables.push(t);
    Ok(r)
}

fn cmd_lyapunov(cfg: &RunConfig, sys: &SkewSystem, seed: u64) -> Result<Report> {
    let b = &cfg.budgets;
    let ladder = b.ladder();
    let mut est = Table::new("lyapunov.csv", vec!["band", "method", "value[1/step]", "se[1/step]", "count"]);
    let mut rates = Table::new("lyapunov_ladder.csv", vec!["band", "m[step]", "mean_rate[1/step]"]);
    let mut r = Report::default();
    for i in 0..sys.bands.len() {
        let stream = 10 + i as u64;
        let k = kingman_monte_carlo(sys, i, &sampler(seed, stream), b.lyapunov_count, &ladder)?;
        let g = graph_lyapunov_depth(sys, i, &sampler(seed, stream), b.lyapunov_count, b.lyapunov_n, b.depth)?;
        est.push(vec![u(i), "kingman".into(), f(k.estimate.mean), f(k.estimate.se), u(b.lyapunov_count)]);
        est.push(vec![u(i), "graph".into(), f(g.estimate.mean), f(g.estimate.se), u(b.lyapunov_count)]);
        for (m, v) in k.ladder.iter().zip(&k.mean_rates) {
            rates.push(vec![u(i), u(*m), f(*v)]);
        }
        r.summary.insert(format!("band_{i}_kingman"), k.estimate.mean);
        r.summary.insert(format!("band_{i}_graph"), g.estimate.mean);
    }
    r.tables.push(est);
    r.tables.push(rates);
    Ok(r)
}

fn cmd_srb(cfg: &RunConfig, sys: &SkewSystem, seed: u64) -> Result<Report> {
    let b = &cfg.budgets;
    let budget = SrbBudget {
        n_points: b.count,
        n_iter: b.n,
        burn_in: b.burn_in,
        t_bins: b.t_bins,
        x_bins: b.x_bins,
        thin: b.thin,
        support_depth: 0,
    };
    let obs = default_observables();
    let mut hist = Table::new(
        "srb_histogram.csv",
        vec!["band", "t_bin", "x_bin", "t_lo[turn]", "t_hi[turn]", "x_lo[x]", "x_hi[x]", "mass[1]"],
    );
    let mut disc = Table::new(
        "srb_discrepancy.csv",
        vec!["band", "observable", "srb[1]", "srb_se[1]", "graph[1]", "graph_se[1]", "diff[1]", "sigma[1]"],
    );
    let mut r = Report::default();
    for i in 0..sys.bands.len() {
        let m = srb_estimate(sys, i, &sampler(seed, 20 + i as u64), &budget)?;
        let g = graph_measure(sys, i, &sampler(seed, 30 + i as u64), b.count, b.measure_depth)?;
        let h = m.histogram.as_ref().expect("srb measures are binned");
        let dx = (h.x_hi - h.x_lo) / h.x_bins as f64;
        for j in 0..h.t_bins {
            for k in 0..h.x_bins {
                let mass = h.mass[j * h.x_bins + k];
                if mass > 0.0 {
                    hist.push(vec![
                        u(i),
                        u(j),
                        u(k),
                        f(j as f64 / h.t_bins as f64),
                        f((j + 1) as f64 / h.t_bins as f64),
                        f(h.x_lo + k as f64 * dx),
                        f(h.x_lo + (k + 1) as f64 * dx),
                        f(mass),
                    ]);
                }
            }
        }
        let rep = measure_discrepancy_report(&m, &g, &obs);
        for (o, (name, diff, se)) in obs.iter().zip(&rep.per_observable) {
            let (a, sa) = m.integrate_se(o);
            let (c, sc) = g.integrate_se(o);
            disc.push(vec![u(i), name.clone(), f(a), f(sa), f(c), f(sc), f(*diff), f(diff / se)]);
        }
        r.summary.insert(format!("band_{i}_max_discrepancy"), rep.max);
    }
    r.tables.push(hist);
    r.tables.push(disc);
    Ok(r)
}

fn cmd_pressure(cfg: &RunConfig) -> Result<Report> {
    let b = &cfg.budgets;
    let phi = cfg.potential.potential();
    let sep = SeparatedConfig { oversample: b.oversample };
    let tr = transfer_pressure(&phi, &b.resolution)?;
    let circle = pressure_separated(SeparatedSpace::Circle, &phi, &b.epsilons, b.n_max, &sep)?;
    let zero = transfer_pressure(&Potential::Constant(0.0), &b.resolution)?.pressure.value;
    let var = variational_check(&phi, tr.pressure.value, b.max_period, Some(zero))?;
    let lift = lifted_pressure_check(&phi, &b.resolution, &b.baker_epsilons, b.baker_n_max, &sep)?;
    let mut t = Table::new(
        "pressure.csv",
        vec!["method", "space", "row", "epsilon[1]", "n_or_resolution", "value[nat]", "diagnostic"],
    );
    for row in &tr.pressure.transfer {
        t.push(vec![
            "transfer".into(),
            "circle".into(),
            "ladder".into(),
            String::new(),
            u(row.resolution),
            f(row.pressure),
            row.cauchy.map_or(String::new(), f),
        ]);
    }
    for (space, res) in [("circle", &circle), ("baker", &lift.separated)] {
        for row in &res.separated {
            t.push(vec![
                "separated".into(),
                space.into(),
                "ladder".into(),
                f(row.epsilon),
                u(row.n),
                f(row.value),
                u(row.count),
            ]);
        }
    }
    let headline = [
        ("transfer", "circle", tr.pressure.value),
        ("separated", "circle", circle.value),
        ("separated", "baker", lift.baker_separated),
    ];
    for (m, s, v) in headline {
        t.push(vec![m.into(), s.into(), "estimate".into(), String::new(), String::new(), f(v), String::new()]);
    }
    let mut r = Report::default();
    r.summary.insert("transfer".into(), tr.pressure.value);
    r.summary.insert("separated_circle".into(), circle.value);
    r.summary.insert("separated_baker".into(), lift.baker_separated);
    r.summary.insert("entropy".into(), tr.entropy());
    r.summary.insert(
        "spectral_gap".into(),
        tr.pressure.transfer.last().expect("ladder is non-empty").gap(),
    );
    r.summary.insert("max_cycle_average".into(), var.max_cycle_average);
    r.summary.insert("variational_passed".into(), var.passed() as u8 as f64);
    r.summary.insert("lift_passed".into(), lift.passed as u8 as f64);
    r.tables.push(t);
    Ok(r)
}

fn cmd_equilibrium(cfg: &RunConfig, sys: &SkewSystem, seed: u64) -> Result<Report> {
    let b = &cfg.budgets;
    let phi = cfg.potential.potential();
    let eq = transfer_pressure(&phi, &b.resolution)?;
    let res = eq.resolution();
    let mut dens = Table::new(
        "equilibrium_density.csv",
        vec!["cell", "t_lo[turn]", "t_hi[turn]", "mass[1]", "density[1/turn]"],
    );
    for (j, (m, d)) in eq.cell_mass.iter().zip(&eq.density).enumerate() {
        dens.push(vec![
            u(j),
            f(j as f64 / res as f64),
            f((j + 1) as f64 / res as f64),
            f(*m),
            f(*d),
        ]);
    }
    let mut atoms = Table::new("equilibrium_atoms.csv", vec!["band", "t[turn]", "x[x]", "weight[1]"]);
    let obs = default_observables();
    let mut r = Report::default();
    for i in 0..sys.bands.len() {
        let m = pushforward_equilibrium(sys, i, &eq, &sampler(seed, 40 + i as u64), b.count, b.measure_depth)?;
        for a in &m.atoms {
            atoms.push(vec![u(i), f(a.t), f(a.x), f(a.weight)]);
        }
        let g = graph_measure(sys, i, &sampler(seed, 50 + i as u64), b.count, b.measure_depth)?;
        let d = measure_discrepancy_report(&m, &g, &obs);
        let pushed = measure_discrepancy_report(&m.push_forward(sys), &m, &obs);
        r.summary.insert(format!("band_{i}_graph_discrepancy"), d.max);
        r.summary.insert(format!("band_{i}_invariance_discrepancy"), pushed.max);
    }
    r.summary.insert("pressure".into(), eq.pressure.value);
    r.summary.insert("entropy".into(), eq.entropy());
    r.tables.push(dens);
    r.tables.push(atoms);
    Ok(r)
}

fn execute(cmd: Command, cfg: &RunConfig, seed: u64, dir: &Path) -> Result<Report> {
    let sys = cfg.system()?;
    let report = validate_system(&sys);
    if cmd == Command::Validate {
        let mut r = Report::default();
        r.summary.insert("passed".into(), report.passed() as u8 as f64);
        r.tables.push(validate_table(&report));
        return Ok(r);
    }
    ensure_valid(&report)?;
    match cmd {
        Command::Validate => unreachable!("handled above"),
        Command::Graph => cmd_graph(cfg, &sys, seed),
        Command::Bones => cmd_bones(cfg, seed),
        Command::Lyapunov => cmd_lyapunov(cfg, &sys, seed),
        Command::Srb => cmd_srb(cfg, &sys, seed),
        Command::Pressure => cmd_pressure(cfg),
        Command::Equilibrium => cmd_equilibrium(cfg, &sys, seed),
        Command::Sweep => cmd_sweep(cfg, seed, dir),
    }
}

fn cmd_sweep(cfg: &RunConfig, seed: u64, dir: &Path) -> Result<Report> {
    let cmd = Command::from_str(&cfg.sweep.command, true)
        .map_err(|_| Error::Config(format!("unknown sweep command '{}'", cfg.sweep.command)))?;
    if matches!(cmd, Command::Sweep | Command::Bones) {
        return Err(Error::Config(format!("sweep cannot run '{}'", cmd.name())));
    }
    let mut index = Table::new("sweep.csv", vec!["eta[1]", "dir", "status"]);
    let mut r = Report::default();
    for (k, &eta) in cfg.sweep.etas.iter().enumerate() {
        let mut c = cfg.clone();
        c.system.eta = eta;
        let sub = format!("eta_{k:02}");
        let subdir = dir.join(&sub);
        std::fs::create_dir_all(&subdir)?;
        let status = match execute(cmd, &c, seed, &subdir) {
            Ok(rep) => {
                for t in &rep.tables {
                    let e = write_csv(&subdir, &c.hash(), t)?;
                    r.children.push(OutputEntry {
                        path: format!("{sub}/{}", e.path),
                        rows: e.rows,
                    });
                }
                for (key, v) in rep.summary {
                    r.summary.insert(format!("{sub}.{key}"), v);
                }
                "ok".to_string()
            }
            Err(e @ (Error::Validation(_) | Error::Numerical(_))) => format!("exit {}", exit_code(&e)),
            Err(e) => return Err(e),
        };
        index.push(vec![f(eta), sub, status]);
    }
    r.tables.push(index);
    Ok(r)
}

/// Resolves the seed (flag, then `SEED`, then config), runs the command in
/// the requested thread pool and writes outputs and `manifest.toml`.
pub fn run(cli: &Cli) -> Result<RunManifest> {
    let mut cfg = RunConfig::load(&cli.config, &cli.overrides)?;
    let env_seed = match std::env::var("SEED") {
        Ok(s) => Some(
            s.trim()
                .parse::<u64>()
                .map_err(|_| Error::Config(format!("SEED='{s}' is not an unsigned integer")))?,
        ),
        Err(_) => None,
    };
    if let Some(s) = cli.seed.or(env_seed) {
        cfg.seed = Some(s);
    }
    if let Some(out) = &cli.out {
        cfg.out = out.to_string_lossy().into_owned();
    }
    run_config(cli.command, &cfg, cli.threads)
}

/// Runs `cmd` on a resolved configuration.
pub fn run_config(cmd: Command, cfg: &RunConfig, threads: Option<usize>) -> Result<RunManifest> {
    let seed = cfg.seed()?;
    let dir = PathBuf::from(&cfg.out);
    std::fs::create_dir_all(&dir)?;
    let hash = cfg.hash();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Config("--threads must be >= 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let start = Instant::now();
    std::fs::write(dir.join("config.toml"), cfg.to_toml())?;
    let result = pool.install(|| execute(cmd, cfg, seed, &dir));
    let report = result?;
    let mut outputs = Vec::new();
    for t in &report.tables {
        outputs.push(write_csv(&dir, &hash, t)?);
    }
    outputs.extend(report.children);
    let manifest = RunManifest {
        artifact: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cmd.name().into(),
        config_hash: hash,
        seed,
        threads: pool.current_num_threads(),
        wall_time_s: start.elapsed().as_secs_f64(),
        outputs,
        summary: report.summary,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(format!("manifest: {e}")))?;
    std::fs::write(dir.join("manifest.toml"), text)?;
    if cmd == Command::Validate && manifest.summary.get("passed") != Some(&1.0) {
        return Err(ensure_valid(&validate_system(&cfg.system()?)).unwrap_err());
    }
    Ok(manifest)
}

/// Entry point for the binary; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(m) => {
            println!(
                "{}: wrote {} file(s) to {} (config {})",
                m.command,
                m.outputs.len(),
                cli.out.as_deref().map_or_else(|| "the configured directory".into(), |p| p.display().to_string()),
                &m.config_hash[..12]
            );
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(
            exit_code(&Error::Parse {
                line: 1,
                column: 1,
                message: String::new()
            }),
            2
        );
        assert_eq!(exit_code(&Error::Validation("x".into())), 3);
        assert_eq!(exit_code(&Error::Numerical("x".into())), 4);
    }

    #[test]
    fn csv_has_hash_comment_and_units() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new("t.csv", vec!["a[1]", "note"]);
        t.push(vec![f(0.5), "x, y".into()]);
        let e = write_csv(dir.path(), "abc", &t).unwrap();
        assert_eq!(e.rows, 1);
        let text = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
        assert_eq!(text, "# config_hash=abc\na[1],note\n0.5,\"x, y\"\n");
    }

    #[test]
    fn validate_command_runs_on_reference() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::reference(3);
        cfg.out = dir.path().to_string_lossy().into_owned();
        let m = run_config(Command::Validate, &cfg, Some(1)).unwrap();
        assert_eq!(m.summary["passed"], 1.0);
        assert!(dir.path().join("manifest.toml").exists());
    }

    #[test]
    fn missing_seed_is_a_config_error() {
        let mut cfg = RunConfig::reference(3);
        cfg.seed = None;
        assert_eq!(exit_code(&run_config(Command::Validate, &cfg, None).unwrap_err()), 2);
    }
}
