use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use nlmp::analysis::{
    empirical_modulus, lattice_edges, regularization_experiment, ExperimentOptions, SamplingConfig,
};
use nlmp::criterion::{
    check_keyineq, find_constants, CheckOptions, CriterionConstants, GridSpec, SearchConfig,
};
use nlmp::dissipation::{d_alpha, d_alpha_tail_bound, QuadratureConfig};
use nlmp::field::{read_snapshot, write_snapshot};
use nlmp::moduli::{ModulusParams, ModulusSpec};
use nlmp::solver::{initial_field, run, InitialData, SimConfig};
use nlmp::velocity::{omega_bound, verify_ll23, verify_ll43, EquationParams};

#[derive(Parser)]
#[command(name = "nlmp", version, about = "Moduli of continuity and nonlocal dissipation for active scalars")]
struct Cli {
    /// JSON configuration for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads for data-parallel scans (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides every RNG seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pseudo-spectral solver; writes records.csv and snapshots.
    Simulate,
    /// Empirical modulus of a snapshot; writes modulus.csv.
    Measure {
        snapshot: PathBuf,
    },
    /// Full regularization experiment; writes experiment.json and records.csv.
    Experiment,
    /// Far-field average and velocity bound checks; writes lemmas.json.
    VerifyLemmas,
    /// CSV of xi, D_alpha, tail_bound.
    DalphaTable,
    /// CSV of xi, Omega.
    OmegaBound,
    /// Check the key inequality; writes criterion.json and margins.csv.
    CheckCriterion,
    /// Search admissible constants; writes constants.json.
    FindConstants,
}

fn load<T: DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    let p = dir.join(name);
    Ok(BufWriter::new(File::create(&p).with_context(|| format!("creating {}", p.display()))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n.max(2) - 1) as f64))
        .collect()
}

#[derive(Serialize, Deserialize)]
#[serde(default)]
struct SimulateConfig {
    sim: SimConfig,
    initial: InitialData,
    /// Write a snapshot at every this many records (0: final state only).
    snapshot_every: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::new(EquationParams::burgers(0.25, 1e-3), 1024, 1e-3, 1.0),
            initial: InitialData::SingleMode {
                amplitude: 1.0,
                k: [1, 0],
            },
            snapshot_every: 0,
        }
    }
}

fn simulate(cli: &Cli) -> Result<()> {
    let mut c: SimulateConfig = load(&cli.config)?;
    if let Some(s) = cli.seed {
        c.sim.seed = s;
    }
    let theta0 = initial_field(&c.initial, c.sim.eq.dimension(), c.sim.n, c.sim.seed)?;
    let mut rows = csv::Writer::from_writer(create(&cli.out, "records.csv")?);
    let mut count = 0usize;
    let out = run(&theta0, &c.sim, |rec, f| {
        rows.serialize(rec)?;
        if c.snapshot_every > 0 && count % c.snapshot_every == 0 {
            let w = create(&cli.out, &format!("snapshot_{count:05}.bin")).map_err(|e| nlmp::Error::Argument(e.to_string()))?;
            write_snapshot(w, f, rec.t, &c.sim.eq)?;
        }
        count += 1;
        Ok(())
    })?;
    rows.flush()?;
    if let Some(f) = &out.final_field {
        let t = out.records.last().map_or(0.0, |r| r.t);
        write_snapshot(create(&cli.out, "final.bin")?, f, t, &c.sim.eq)?;
    }
    if let Some((t, msg)) = out.blow_up {
        bail!("blow-up at t = {t}: {msg}");
    }
    println!("{} records written to {}", out.records.len(), cli.out.display());
    Ok(())
}

#[derive(Default, Serialize, Deserialize)]
#[serde(default)]
struct MeasureConfig {
    sampling: SamplingConfig,
    /// Bin edges; default is one bin per lattice separation.
    edges: Option<Vec<f64>>,
}

fn measure(cli: &Cli, snapshot: &Path) -> Result<()> {
    let mut c: MeasureConfig = load(&cli.config)?;
    if let Some(s) = cli.seed {
        c.sampling.seed = s;
    }
    let (field, _) = read_snapshot(File::open(snapshot).with_context(|| format!("opening {}", snapshot.display()))?)?;
    let edges = c.edges.unwrap_or_else(|| lattice_edges(field.n(), field.dim()));
    let bins = empirical_modulus(&field, &edges, &c.sampling)?;
    let mut w = csv::Writer::from_writer(create(&cli.out, "modulus.csv")?);
    w.write_record(["lo", "hi", "max_increment"])?;
    for b in bins.iter().filter(|b| !b.max_increment.is_nan()) {
        w.write_record(&[b.lo.to_string(), b.hi.to_string(), b.max_increment.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(default)]
struct ExperimentConfig {
    sim: SimConfig,
    initial: InitialData,
    modulus: ModulusParams,
    /// Searched on the stationary and moving families when absent.
    constants: Option<CriterionConstants>,
    /// Fit the amplitude of the initial data to `2‖θ₀‖∞ = (1-β)H`.
    saturate: bool,
    grid: GridSpec,
    options: ExperimentOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut sim = SimConfig::new(EquationParams::burgers(0.25, 1e-4), 4096, 1e-3, 0.0);
        sim.record_every = 20;
        Self {
            sim,
            initial: InitialData::Rough { sup: 1.0, s: 0.1 },
            modulus: ModulusParams::stationary(1.0, 1.0, 0.6).expect("valid"),
            constants: None,
            saturate: true,
            grid: GridSpec::default(),
            options: ExperimentOptions::default(),
        }
    }
}

fn experiment(cli: &Cli) -> Result<()> {
    let mut c: ExperimentConfig = load(&cli.config)?;
    if let Some(s) = cli.seed {
        c.sim.seed = s;
        c.options.sampling.seed = s;
    }
    let eq = c.sim.eq;
    let exp = eq.size_exponent();
    let consts = match c.constants {
        Some(k) => k,
        None => {
            let mut search = SearchConfig::default();
            search.options.quadrature = QuadratureConfig::for_fractional_laplacian(eq.alpha);
            let found = find_constants(&eq, c.modulus.beta, &c.grid, &search)?;
            match found.constants {
                Some(k) if found.found => k,
                _ => bail!("no admissible constants: {}", found.failure.unwrap_or_default()),
            }
        }
    };
    let mut base = c.modulus;
    base.h = consts.c1 * base.delta.powf(exp);
    base.xi0 = 0.0;
    let mut theta0 = initial_field(&c.initial, eq.dimension(), c.sim.n, c.sim.seed)?;
    if c.saturate {
        theta0 = theta0.scaled(0.5 * (1.0 - base.beta) * base.h / theta0.sup_norm());
    }
    if c.sim.t_end <= 0.0 {
        c.sim.t_end = 2.0 * base.delta.powf(2.0 * eq.alpha) / (2.0 * eq.alpha * consts.c2);
    }
    let outcome = regularization_experiment(&c.sim, &theta0, &base, &consts, &c.options)?;
    let mut rows = csv::Writer::from_writer(create(&cli.out, "records.csv")?);
    rows.write_record(["t", "sup_norm", "xi0", "margin", "holder", "energy", "max_gradient"])?;
    let key = format!("{}", base.beta);
    for r in &outcome.records {
        rows.write_record(&[
            r.t.to_string(),
            r.sup_norm.to_string(),
            r.xi0.to_string(),
            r.margin.to_string(),
            r.holder[&key].to_string(),
            r.energy.to_string(),
            r.max_gradient.to_string(),
        ])?;
    }
    rows.flush()?;
    #[derive(Serialize)]
    struct Summary<'a> {
        constants: CriterionConstants,
        modulus: ModulusParams,
        verdict: &'a nlmp::analysis::ExperimentOutcome,
    }
    write_json(
        &cli.out,
        "experiment.json",
        &Summary {
            constants: consts,
            modulus: base,
            verdict: &outcome,
        },
    )?;
    println!("{:?}", outcome.verdict);
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(default)]
struct LemmaConfig {
    betas: Vec<f64>,
    gammas: Vec<f64>,
    delta: f64,
    #[serde(rename = "A")]
    a: f64,
    xi_points: usize,
    xi0_points: usize,
    rel_tol: f64,
}

impl Default for LemmaConfig {
    fn default() -> Self {
        Self {
            betas: vec![0.3, 0.6],
            gammas: vec![0.6, 0.75],
            delta: 1.0,
            a: 1.0,
            xi_points: 100,
            xi0_points: 20,
            rel_tol: 1e-9,
        }
    }
}

fn verify_lemmas(cli: &Cli) -> Result<()> {
    let c: LemmaConfig = load(&cli.config)?;
    let xis = log_grid(1e-4 * c.delta, 10.0 * c.delta, c.xi_points);
    let xi0s = log_grid(1e-3 * c.delta, c.delta, c.xi0_points);
    let mut reports = Vec::new();
    for &b in &c.betas {
        let base = ModulusParams::stationary(1.0, c.delta, b)?;
        reports.push(verify_ll23(&base, &xis, &xi0s, c.rel_tol)?);
        for &g in &c.gammas {
            if b < 2.0 - 2.0 * g {
                reports.push(verify_ll43(&base, g, c.a, &xis, &xi0s, c.rel_tol)?);
            }
        }
    }
    #[derive(Serialize)]
    struct Brief<'a> {
        name: &'a str,
        passed: bool,
        worst_slack: f64,
        worst: Option<nlmp::velocity::LemmaRow>,
    }
    let brief: Vec<Brief> = reports
        .iter()
        .map(|r| Brief {
            name: &r.name,
            passed: r.passed,
            worst_slack: r.worst_slack,
            worst: r.worst,
        })
        .collect();
    write_json(&cli.out, "lemmas.json", &brief)?;
    let ok = reports.iter().all(|r| r.passed);
    println!("{}", if ok { "all checks passed" } else { "some checks failed" });
    if !ok {
        bail!("lemma checks failed");
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(default)]
struct TableConfig {
    modulus: ModulusSpec,
    alpha: f64,
    equation: EquationParams,
    xi_min: f64,
    xi_max: f64,
    points: usize,
    quadrature: QuadratureConfig,
}

impl Default for TableConfig {
    fn default() -> Self {
        Self {
            modulus: ModulusSpec::Family(ModulusParams::new(1.0, 1.0, 0.6, 0.1).expect("valid")),
            alpha: 0.25,
            equation: EquationParams::burgers(0.25, 0.0),
            xi_min: 1e-4,
            xi_max: 10.0,
            points: 60,
            quadrature: QuadratureConfig::default(),
        }
    }
}

fn dalpha_table(cli: &Cli) -> Result<()> {
    let c: TableConfig = load(&cli.config)?;
    c.modulus.check()?;
    let mut w = csv::Writer::from_writer(create(&cli.out, "dalpha.csv")?);
    w.write_record(["xi", "D_alpha", "tail_bound"])?;
    for xi in log_grid(c.xi_min, c.xi_max, c.points) {
        let d = d_alpha(&c.modulus, c.alpha, xi, &c.quadrature)?;
        let b = d_alpha_tail_bound(&c.modulus, c.alpha, xi, c.quadrature.c_alpha)?;
        w.write_record(&[xi.to_string(), d.to_string(), b.value.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn omega_table(cli: &Cli) -> Result<()> {
    let c: TableConfig = load(&cli.config)?;
    c.modulus.check()?;
    c.equation.check()?;
    let mut w = csv::Writer::from_writer(create(&cli.out, "omega.csv")?);
    w.write_record(["xi", "Omega"])?;
    for xi in log_grid(c.xi_min, c.xi_max, c.points) {
        let o = omega_bound(&c.modulus, &c.equation, xi, c.quadrature.rel_tol)?;
        w.write_record(&[xi.to_string(), o.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(default)]
struct CriterionConfig {
    equation: EquationParams,
    modulus: ModulusParams,
    constants: Option<CriterionConstants>,
    grid: GridSpec,
    options: CheckOptions,
    search: SearchConfig,
}

impl Default for CriterionConfig {
    fn default() -> Self {
        Self {
            equation: EquationParams::burgers(0.25, 0.0),
            modulus: ModulusParams::stationary(1.0, 1.0, 0.6).expect("valid"),
            constants: None,
            grid: GridSpec::default(),
            options: CheckOptions::default(),
            search: SearchConfig::default(),
        }
    }
}

fn check_criterion(cli: &Cli) -> Result<()> {
    let c: CriterionConfig = load(&cli.config)?;
    let Some(consts) = c.constants else {
        bail!("check-criterion needs \"constants\": {{\"C1\": .., \"C2\": ..}}");
    };
    let report = check_keyineq(&c.equation, &c.modulus, &consts, &c.grid, &c.options)?;
    report.write_csv(create(&cli.out, "margins.csv")?)?;
    #[derive(Serialize)]
    struct Brief<'a> {
        passed: bool,
        size_ok: bool,
        failure: &'a Option<String>,
        worst: Option<nlmp::criterion::CriterionPoint>,
        extinction_time: f64,
        points: usize,
    }
    write_json(
        &cli.out,
        "criterion.json",
        &Brief {
            passed: report.passed,
            size_ok: report.size_ok,
            failure: &report.failure,
            worst: report.worst,
            extinction_time: report.extinction_time,
            points: report.points.len(),
        },
    )?;
    println!("{}", if report.passed { "PASS" } else { "FAIL" });
    Ok(())
}

fn find(cli: &Cli) -> Result<()> {
    let c: CriterionConfig = load(&cli.config)?;
    let out = find_constants(&c.equation, c.modulus.beta, &c.grid, &c.search)?;
    #[derive(Serialize)]
    struct Brief<'a> {
        found: bool,
        constants: Option<CriterionConstants>,
        small_scale_trend: f64,
        failure: &'a Option<String>,
        worst: Option<nlmp::criterion::CriterionPoint>,
    }
    write_json(
        &cli.out,
        "constants.json",
        &Brief {
            found: out.found,
            constants: out.constants,
            small_scale_trend: out.small_scale_trend,
            failure: &out.failure,
            worst: out.report.as_ref().and_then(|r| r.worst),
        },
    )?;
    match out.constants {
        Some(k) if out.found => println!("C1 = {:.6e}, C2 = {:.6e}", k.c1, k.c2),
        _ => println!("no constants found: {}", out.failure.unwrap_or_default()),
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let threads = cli
        .threads
        .or_else(|| std::env::var("NLMP_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match &cli.command {
        Command::Simulate => simulate(&cli),
        Command::Measure { snapshot } => measure(&cli, snapshot),
        Command::Experiment => experiment(&cli),
        Command::VerifyLemmas => verify_lemmas(&cli),
        Command::DalphaTable => dalpha_table(&cli),
        Command::OmegaBound => omega_table(&cli),
        Command::CheckCriterion => check_criterion(&cli),
        Command::FindConstants => find(&cli),
    }
}
