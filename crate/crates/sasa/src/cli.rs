//! Command-line interface.
//!
//! Exit codes: 0 on success, 1 for usage and input errors, 2 when the
//! numerics fail (singular systems, divergence, every tuning cell failing).

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use sasa_core::graph::{build_grid_adjacency, neighbor_orders, Contiguity, NeighborOrders};
use sasa_core::oracle::{min_group_gap, oracle_fit};
use sasa_core::simgen::{MethodConfig, Setting, SimScenario};
use sasa_core::tuning::{bic, lambda_grid, lambda_max, solve_path, tune, Criterion, TuneGrid, TuneInputs};
use sasa_core::weights::DEFAULT_PSIS;
use sasa_core::{
    compute_weights, initialize, Admm, Dataset, InitMethod, Partition, SasaError, SasaFit, SolverConfig, WeightKind,
    WeightSpec,
};

use crate::bench;
use crate::harness::{pool, run_replicates, summarize};
use crate::io::{
    load_adjacency, load_dataset, load_partition, location_ids, write_adjacency, write_dataset, write_partition,
    LoadError,
};
use crate::manifest::{emit_csv, emit_json, emit_json_sharing, RunManifest};

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "sasa",
    version,
    about = "Spatially weighted subgroup regression for areal data"
)]
pub struct Cli {
    /// Worker threads for replicate runs; defaults to the number of cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Fit at a single (psi, lambda).
    Fit(FitArgs),
    /// Warm-started fits along a lambda grid.
    Path(PathArgs),
    /// Select (psi, lambda) by modified BIC or cross-validation.
    Tune(TuneArgs),
    /// Unpenalized fit on a known partition.
    Oracle(OracleArgs),
    /// Simulation study replicates.
    Simulate(SimulateArgs),
    /// Reproduce a published simulation table.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightsArg {
    Equal,
    #[value(name = "reg_sp")]
    RegSp,
    Reg,
    Sp,
}

impl From<WeightsArg> for WeightKind {
    fn from(w: WeightsArg) -> Self {
        match w {
            WeightsArg::Equal => WeightKind::Equal,
            WeightsArg::RegSp => WeightKind::RegSp,
            WeightsArg::Reg => WeightKind::Reg,
            WeightsArg::Sp => WeightKind::Sp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ContiguityArg {
    Rook,
    Queen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitArg {
    #[value(name = "per_location")]
    PerLocation,
    #[value(name = "ridge_fusion")]
    RidgeFusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionArg {
    Bic,
    Cv,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected RxC, found `{s}`"))?;
    let r: usize = r.trim().parse().map_err(|_| format!("bad row count in `{s}`"))?;
    let c: usize = c.trim().parse().map_err(|_| format!("bad column count in `{s}`"))?;
    if r == 0 || c == 0 {
        return Err("grid dimensions must be positive".into());
    }
    Ok((r, c))
}

fn parse_scale(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("not a number: `{s}`"))?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err("scale must lie in (0, 1]".into())
    }
}

#[derive(Debug, Args, Serialize)]
pub struct DataArgs {
    /// Long-format dataset CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Adjacency edge list `id_a,id_b`.
    #[arg(long, conflicts_with = "grid")]
    pub adj: Option<PathBuf>,
    /// Lattice RxC over the locations in file order, row-major.
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<(usize, usize)>,
    #[arg(long, value_enum, default_value_t = ContiguityArg::Rook)]
    pub contiguity: ContiguityArg,
    #[arg(long, value_enum, default_value_t = WeightsArg::Sp)]
    pub weights: WeightsArg,
}

#[derive(Debug, Args, Serialize)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 3.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub vartheta: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub group_tol: f64,
    /// Starting values; `ridge_fusion` works when a location cannot be fit alone.
    #[arg(long, value_enum, default_value_t = InitArg::PerLocation)]
    pub init: InitArg,
    /// Groups for the ridge-fusion start.
    #[arg(long, default_value_t = 4)]
    pub init_groups: usize,
    /// Ridge weight on pairwise differences for the ridge-fusion start.
    #[arg(long, default_value_t = 0.1)]
    pub ridge: f64,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            gamma: self.gamma,
            vartheta: self.vartheta,
            tol: self.tol,
            max_iter: self.max_iter,
            group_tol: self.group_tol,
        }
    }

    fn init(&self) -> InitMethod {
        match self.init {
            InitArg::PerLocation => InitMethod::PerLocation,
            InitArg::RidgeFusion => InitMethod::RidgeFusion {
                groups: self.init_groups,
                ridge: self.ridge,
            },
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct LambdaGridArgs {
    #[arg(long, default_value_t = 50)]
    pub nlambda: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lambda_min_ratio: f64,
    /// Explicit ascending lambda values, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 1.0)]
    pub psi: f64,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PathArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub grid: LambdaGridArgs,
    #[arg(long, default_value_t = 1.0)]
    pub psi: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct TuneArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub grid: LambdaGridArgs,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_PSIS.to_vec())]
    pub psis: Vec<f64>,
    #[arg(long, value_enum, default_value_t = CriterionArg::Bic)]
    pub criterion: CriterionArg,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct OracleArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// CSV with columns `location_id,group`.
    #[arg(long)]
    pub partition: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_parser = ["s1", "s2", "unbalanced", "random", "random_s1", "random_s2", "two_group"])]
    pub setting: String,
    #[arg(long, value_parser = parse_grid, default_value = "7x7")]
    pub grid: (usize, usize),
    #[arg(long, default_value_t = 10)]
    pub ni: usize,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [WeightsArg::Equal, WeightsArg::RegSp, WeightsArg::Reg, WeightsArg::Sp])]
    pub weights: Vec<WeightsArg>,
    #[arg(long, value_enum, default_value_t = CriterionArg::Bic)]
    pub criterion: CriterionArg,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_PSIS.to_vec())]
    pub psis: Vec<f64>,
    #[arg(long, default_value_t = 50)]
    pub nlambda: usize,
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
    #[arg(long, env = "SASA_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Per-replicate CSV; the aggregate goes to the same stem with `.summary.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write each replicate's data, true partition and adjacency here.
    #[arg(long)]
    pub export_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=8))]
    pub table: u8,
    /// Fraction of the 100 published replicates to run.
    #[arg(long, value_parser = parse_scale, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long, env = "SASA_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub nlambda: usize,
    /// Folds for the cross-validated column.
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Why a command stopped.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }
}

impl From<SasaError> for Failure {
    fn from(e: SasaError) -> Self {
        use SasaError::*;
        match e {
            GlobalRankDeficient
            | PartitionRankDeficient
            | LocationRankDeficient { .. }
            | SingularSystem { .. }
            | Divergence { .. }
            | NonPositiveDof { .. }
            | AllCellsFailed => Failure::Numerical(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Dataset(inner) => inner.into(),
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(format!("i/o: {e}"))
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let argv = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match run(&cli, argv) {
        Ok(()) => 0,
        Err(f) => {
            match &f {
                Failure::Usage(m) => eprintln!("error: {m}"),
                Failure::Numerical(m) => eprintln!("numerical failure: {m}"),
            }
            f.exit_code()
        }
    }
}

fn run(cli: &Cli, argv: Vec<String>) -> Result<(), Failure> {
    let flags = serde_json::to_value(cli).map_err(|e| Failure::Usage(e.to_string()))?;
    let (name, seed) = match &cli.command {
        Command::Fit(_) => ("fit", None),
        Command::Path(_) => ("path", None),
        Command::Tune(_) => ("tune", None),
        Command::Oracle(_) => ("oracle", None),
        Command::Simulate(a) => ("simulate", Some(a.seed)),
        Command::Bench(a) => ("bench", Some(a.seed)),
    };
    let mut manifest = RunManifest::new(name, argv, flags, seed);
    match &cli.command {
        Command::Fit(a) => cmd_fit(a, &mut manifest),
        Command::Path(a) => cmd_path(a, &mut manifest),
        Command::Tune(a) => cmd_tune(a, &mut manifest),
        Command::Oracle(a) => cmd_oracle(a, &mut manifest),
        Command::Simulate(a) => cmd_simulate(a, cli.jobs, &mut manifest),
        Command::Bench(a) => cmd_bench(a, cli.jobs, &mut manifest),
    }
}

struct Inputs {
    dataset: Dataset,
    orders: Option<NeighborOrders>,
}

fn load_inputs(a: &DataArgs, manifest: &mut RunManifest) -> Result<Inputs, Failure> {
    let dataset = load_dataset(&a.data)?;
    manifest.add_input(&a.data)?;
    let ids = location_ids(&dataset);
    let graph = match (&a.adj, a.grid) {
        (Some(path), _) => {
            manifest.add_input(path)?;
            Some(load_adjacency(path, &ids)?)
        }
        (None, Some((r, c))) => {
            if r * c != dataset.n() {
                return Err(Failure::Usage(format!(
                    "grid {r}x{c} has {} cells but the dataset has {} locations",
                    r * c,
                    dataset.n()
                )));
            }
            let contiguity = match a.contiguity {
                ContiguityArg::Rook => Contiguity::Rook,
                ContiguityArg::Queen => Contiguity::Queen,
            };
            Some(build_grid_adjacency(r, c, contiguity)?)
        }
        (None, None) => None,
    };
    Ok(Inputs {
        dataset,
        orders: graph.as_ref().map(neighbor_orders),
    })
}

fn rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn one_based(p: &Partition) -> Vec<usize> {
    p.assignment().iter().map(|g| g + 1).collect()
}

fn fit_json(dataset: &Dataset, fit: &SasaFit, kind: WeightKind, psi: f64) -> Value {
    let c = &fit.coefficients;
    let alpha = c
        .alpha
        .clone()
        .unwrap_or_else(|| sasa_core::solver::group_means(&fit.state.beta(), &fit.partition));
    json!({
        "weights": kind.name(),
        "psi": psi,
        "lambda": fit.lambda,
        "location_ids": location_ids(dataset),
        "eta": c.eta.as_slice(),
        "beta": rows(&c.beta),
        "alpha": rows(&alpha),
        "assignment": one_based(&fit.partition),
        "K": fit.k(),
        "converged": fit.converged,
        "iters": fit.iterations,
        "objective": fit.objective,
        "primal_residuals": fit.primal_residuals,
    })
}

fn cmd_fit(a: &FitArgs, manifest: &mut RunManifest) -> Result<(), Failure> {
    let inp = load_inputs(&a.data, manifest)?;
    let kind: WeightKind = a.data.weights.into();
    let config = a.solver.config();
    let admm = Admm::new(&inp.dataset, config)?;
    let init = initialize(&inp.dataset, a.solver.init())?;
    let weights = compute_weights(
        inp.dataset.n(),
        &WeightSpec::new(kind, a.psi),
        inp.orders.as_ref(),
        Some(&init.beta()),
    )?;
    let fit = admm.fit(&weights, a.lambda, Some(&init))?;
    emit_json(a.out.as_deref(), fit_json(&inp.dataset, &fit, kind, a.psi), manifest)?;
    Ok(())
}

fn cmd_path(a: &PathArgs, manifest: &mut RunManifest) -> Result<(), Failure> {
    let inp = load_inputs(&a.data, manifest)?;
    let ds = &inp.dataset;
    let kind: WeightKind = a.data.weights.into();
    let admm = Admm::new(ds, a.solver.config())?;
    let init = initialize(ds, a.solver.init())?;
    let weights = compute_weights(
        ds.n(),
        &WeightSpec::new(kind, a.psi),
        inp.orders.as_ref(),
        Some(&init.beta()),
    )?;
    let lambdas = match &a.grid.lambdas {
        Some(l) => {
            if l.windows(2).any(|w| w[1] < w[0]) {
                return Err(Failure::Usage("--lambdas must be ascending".into()));
            }
            l.clone()
        }
        None => {
            if a.grid.nlambda < 2 || !(a.grid.lambda_min_ratio > 0.0 && a.grid.lambda_min_ratio < 1.0) {
                return Err(Failure::Usage(
                    "need --nlambda >= 2 and --lambda-min-ratio in (0, 1)".into(),
                ));
            }
            lambda_grid(
                lambda_max(&admm, &weights, &init)?,
                a.grid.nlambda,
                a.grid.lambda_min_ratio,
            )
        }
    };
    let fits: Vec<Value> = solve_path(&admm, &weights, &lambdas, &init)
        .into_iter()
        .zip(&lambdas)
        .map(|(res, &lambda)| match res {
            Ok(f) => json!({
                "lambda": lambda,
                "K": f.k(),
                "bic": bic(ds, &f.coefficients.eta, &f.coefficients.beta, f.k()),
                "converged": f.converged,
                "iters": f.iterations,
                "objective": f.objective,
                "assignment": one_based(&f.partition),
                "error": Value::Null,
            }),
            Err(e) => json!({ "lambda": lambda, "K": Value::Null, "error": e.to_string() }),
        })
        .collect();
    let doc = json!({
        "weights": kind.name(),
        "psi": a.psi,
        "location_ids": location_ids(ds),
        "lambdas": lambdas,
        "path": fits,
    });
    emit_json(a.out.as_deref(), doc, manifest)?;
    Ok(())
}

fn tune_grid(psis: &[f64], g: &LambdaGridArgs) -> TuneGrid {
    TuneGrid {
        psis: psis.to_vec(),
        nlambda: g.nlambda,
        lambda_min_ratio: g.lambda_min_ratio,
        lambdas: g.lambdas.clone(),
    }
}

fn criterion(c: CriterionArg, folds: usize) -> Criterion {
    match c {
        CriterionArg::Bic => Criterion::Bic,
        CriterionArg::Cv => Criterion::Cv { folds },
    }
}

fn cmd_tune(a: &TuneArgs, manifest: &mut RunManifest) -> Result<(), Failure> {
    let inp = load_inputs(&a.data, manifest)?;
    let kind: WeightKind = a.data.weights.into();
    let inputs = TuneInputs {
        kind,
        orders: inp.orders.as_ref(),
        init: a.solver.init(),
    };
    let crit = criterion(a.criterion, a.folds);
    let res = tune(
        &inp.dataset,
        inputs,
        &tune_grid(&a.psis, &a.grid),
        crit,
        a.solver.config(),
    )?;
    let surface: Vec<Value> = res
        .cells
        .iter()
        .map(|c| {
            json!({
                "psi": c.psi,
                "lambda": c.lambda,
                "K": c.k,
                "score": c.score,
                "converged": c.converged,
                "iters": c.iterations,
                "error": c.error.as_ref().map(|e| e.to_string()),
            })
        })
        .collect();
    let doc = json!({
        "criterion": match a.criterion { CriterionArg::Bic => "bic", CriterionArg::Cv => "cv" },
        "psi": res.psi,
        "lambda": res.lambda,
        "K": res.best.k(),
        "fallback": res.fallback,
        "fit": fit_json(&inp.dataset, &res.best, kind, res.psi),
        "surface": surface,
    });
    emit_json(a.out.as_deref(), doc, manifest)?;
    Ok(())
}

fn cmd_oracle(a: &OracleArgs, manifest: &mut RunManifest) -> Result<(), Failure> {
    let ds = load_dataset(&a.data)?;
    manifest.add_input(&a.data)?;
    let partition = load_partition(&a.partition, &location_ids(&ds))?;
    manifest.add_input(&a.partition)?;
    let fit = oracle_fit(&ds, &partition)?;
    let b_n = match min_group_gap(&fit.alpha) {
        Ok(g) => json!(g),
        Err(SasaError::GapUndefined) => Value::Null,
        Err(e) => return Err(e.into()),
    };
    let doc = json!({
        "location_ids": location_ids(&ds),
        "assignment": one_based(&partition),
        "K": partition.k(),
        "eta": fit.eta.as_slice(),
        "alpha": rows(&fit.alpha),
        "sigma2": fit.sigma2,
        "se": fit.se.as_slice(),
        "b_n": b_n,
    });
    emit_json(a.out.as_deref(), doc, manifest)?;
    Ok(())
}

fn summary_path(out: &Path) -> PathBuf {
    out.with_extension("summary.json")
}

fn cmd_simulate(a: &SimulateArgs, jobs: Option<usize>, manifest: &mut RunManifest) -> Result<(), Failure> {
    let setting: Setting = a.setting.parse()?;
    let (rows_, cols) = a.grid;
    let scenario = SimScenario::new(setting, rows_, cols, a.ni).with_sigma(a.sigma);
    if a.reps == 0 {
        return Err(Failure::Usage("--reps must be at least 1".into()));
    }
    let methods: Vec<MethodConfig> = a
        .weights
        .iter()
        .map(|&w| MethodConfig {
            kind: w.into(),
            criterion: criterion(a.criterion, a.folds),
            grid: TuneGrid {
                psis: a.psis.clone(),
                nlambda: a.nlambda,
                ..TuneGrid::default()
            },
            solver: SolverConfig::default(),
        })
        .collect();
    // surface setting errors before spawning work
    sasa_core::simgen::generate(&scenario, a.seed, 0)?;
    if let Some(dir) = &a.export_dir {
        export_replicates(&scenario, a.seed, a.reps, dir)?;
    }
    let pool = pool(jobs).map_err(|e| Failure::Usage(e.to_string()))?;
    let outcomes = run_replicates(&scenario, &methods, a.seed, a.reps, &pool);

    let crit_name = match a.criterion {
        CriterionArg::Bic => "bic",
        CriterionArg::Cv => "cv",
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Failure::Usage(e.to_string());
    w.write_record([
        "replicate",
        "weights",
        "criterion",
        "k_hat",
        "ari",
        "rmse",
        "rmse_refit",
        "converged",
        "lambda",
        "psi",
        "error",
    ])
    .map_err(csv_err)?;
    for o in &outcomes {
        let kind = methods[o.method].kind.name();
        let rec: Vec<String> = match &o.result {
            Ok(m) => vec![
                m.replicate.to_string(),
                kind.into(),
                crit_name.into(),
                m.k_hat.to_string(),
                m.ari.to_string(),
                m.rmse.to_string(),
                m.rmse_refit.map_or(String::new(), |v| v.to_string()),
                m.converged.to_string(),
                m.lambda.to_string(),
                m.psi.to_string(),
                String::new(),
            ],
            Err(e) => {
                let mut r = vec![o.replicate.to_string(), kind.into(), crit_name.into()];
                r.extend(std::iter::repeat_n(String::new(), 7));
                r.push(e.to_string());
                r
            }
        };
        w.write_record(&rec).map_err(csv_err)?;
    }
    let body = w.into_inner().map_err(|e| Failure::Usage(e.to_string()))?;

    let k = setting.groups();
    let summaries: Vec<Value> = methods
        .iter()
        .enumerate()
        .map(|(m, cfg)| {
            let s = summarize(&outcomes, m, k);
            let r = s.report.as_ref();
            json!({
                "weights": cfg.kind.name(),
                "criterion": crit_name,
                "replicates": r.map_or(0, |r| r.replicates),
                "failures": s.failures,
                "khat": r.map(|r| json!({"mean": r.khat.mean, "se": r.khat.se, "per": r.khat.per})),
                "ari": r.map(|r| json!({"mean": r.ari_mean, "se": r.ari_se})),
                "rmse": r.map(|r| json!({"mean": r.rmse_mean, "se": r.rmse_se})),
                "converged_fraction": r.map(|r| r.converged_fraction),
                "first_error": s.first_error,
            })
        })
        .collect();
    let summary = json!({
        "setting": setting.name(),
        "grid": format!("{rows_}x{cols}"),
        "ni": a.ni,
        "sigma": a.sigma,
        "reps": a.reps,
        "seed": a.seed,
        "true_k": k,
        "methods": summaries,
    });
    emit_csv(&a.out, &body, manifest)?;
    emit_json_sharing(&summary_path(&a.out), summary, &a.out)?;
    Ok(())
}

fn export_replicates(scenario: &SimScenario, seed: u64, reps: usize, dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)?;
    let csv_err = |e: csv::Error| Failure::Usage(e.to_string());
    for r in 0..reps {
        let d = sasa_core::simgen::generate(scenario, seed, r)?;
        let ids = location_ids(&d.dataset);
        let file = |name: String| std::fs::File::create(dir.join(name));
        write_dataset(&d.dataset, file(format!("rep{r}_data.csv"))?).map_err(csv_err)?;
        write_partition(&d.truth, &ids, file(format!("rep{r}_truth.csv"))?).map_err(csv_err)?;
        if r == 0 {
            write_adjacency(&d.graph, &ids, file("adjacency.csv".into())?).map_err(csv_err)?;
        }
    }
    Ok(())
}

fn cmd_bench(a: &BenchArgs, jobs: Option<usize>, manifest: &mut RunManifest) -> Result<(), Failure> {
    let table = bench::table(a.table).ok_or_else(|| Failure::Usage(format!("no table {}", a.table)))?;
    let opts = bench::BenchOptions {
        replicates: bench::replicates_for(a.scale),
        seed: a.seed,
        nlambda: a.nlambda,
        folds: a.folds,
    };
    let pool = pool(jobs).map_err(|e| Failure::Usage(e.to_string()))?;
    let report = bench::run(&table, &opts, &pool);
    let text = bench::render(&report);
    let value = serde_json::to_value(&report).map_err(|e| Failure::Usage(e.to_string()))?;
    match &a.out {
        Some(path) => {
            emit_json(Some(path), value, manifest)?;
            print!("{text}");
        }
        None => {
            eprint!("{text}");
            emit_json(None, value, manifest)?;
        }
    }
    Ok(())
}
