//! `drlp` command-line front-end.
//!
//! Results go to stdout as JSON (or to `--out`). Exit codes: 0 success,
//! 2 no feasible point, 3 unbounded, 64 usage error, 65 data error.
//! Thread count follows `RAYON_NUM_THREADS`.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use drlp::io::{self, Timings};
use drlp::lab::{benchmark, convergence_experiment, DistributionSpec};
use drlp::portfolio::{grid_oracle, portfolio_report, portfolio_solve, PortfolioOptions};
use drlp::region::{region_exact, region_support_oracle_with, OracleOptions};
use drlp::risk::{eval_risk, make_weights, value_at_risk, DistortionSpec};
use drlp::solver::{solve_iterative_with, solve_ray, transform_max, IterOptions, Mode, RobustLp, Status};
use drlp::{Region, Sample};
use serde_json::json;

const EXIT_NONE: u8 = 2;
const EXIT_INFINITE: u8 = 3;
const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;

#[derive(Parser, Debug)]
#[command(name = "drlp", version, about = "Linear programs under a distortion risk constraint")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the uncertainty region of a sample.
    Region(RegionArgs),
    /// Solve `min c.x` subject to `rho(Y.x) <= -b`.
    Solve(SolveArgs),
    /// Return-maximising allocation under a risk budget.
    Portfolio(PortfolioArgs),
    /// Evaluate the risk of a single column.
    Risk(RiskArgs),
    /// Consistency experiment on a simulated distribution.
    Converge(ConvergeArgs),
    /// Runtime benchmark of the iterative solver.
    Bench(BenchArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum MeasureKind {
    Es,
    Expectation,
}

#[derive(Args, Debug)]
#[group(id = "measure_source", multiple = false)]
struct MeasureArgs {
    /// Named risk measure.
    #[arg(long, value_enum, group = "measure_source")]
    measure: Option<MeasureKind>,
    /// JSON array of ascending weights, one per scenario.
    #[arg(long, value_name = "FILE", group = "measure_source")]
    weights: Option<PathBuf>,
    /// Two-column CSV of concave generator knots `(t, r(t))`.
    #[arg(long, value_name = "FILE", group = "measure_source")]
    generator: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Measure {
    #[command(flatten)]
    source: MeasureArgs,
    /// Tail level of expected shortfall.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

#[derive(Args, Debug)]
struct Output {
    /// Write JSON here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Construction {
    Auto,
    Exact,
    Oracle,
}

#[derive(Args, Debug)]
struct RegionArgs {
    #[arg(long, value_name = "FILE")]
    csv: PathBuf,
    #[command(flatten)]
    measure: Measure,
    /// Permutation hull (small n only), oracle refinement, or by size.
    #[arg(long, value_enum, default_value_t = Construction::Auto)]
    construction: Construction,
    #[arg(long, default_value_t = 200)]
    max_rounds: usize,
    #[arg(long, default_value_t = 0x5eed)]
    seed: u64,
    /// Also write an OFF mesh (three-dimensional samples only).
    #[arg(long, value_name = "FILE")]
    off: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SolveMode {
    Exact,
    Iterative,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long, value_name = "FILE")]
    csv: PathBuf,
    /// Cost vector, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    c: Vec<f64>,
    #[arg(long, allow_hyphen_values = true)]
    b: f64,
    #[command(flatten)]
    measure: Measure,
    /// Restrict to `x >= 0`.
    #[arg(long)]
    nonneg: bool,
    #[arg(long, value_enum, default_value_t = SolveMode::Exact)]
    mode: SolveMode,
    /// Read the program as `max c.x` subject to `a.x <= b` for all `a` in the region.
    #[arg(long)]
    max_form: bool,
    /// Cutting-plane round cap for iterative mode.
    #[arg(long)]
    max_rounds: Option<usize>,
    /// Wall-clock limit for iterative mode, in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    #[arg(long, default_value_t = 0x5eed)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct PortfolioArgs {
    /// Scenario returns, one column per asset.
    #[arg(long, value_name = "FILE")]
    csv: PathBuf,
    /// Risk budget.
    #[arg(long, allow_hyphen_values = true)]
    rho0: f64,
    #[command(flatten)]
    measure: Measure,
    #[arg(long)]
    nonneg: bool,
    #[arg(long, value_enum)]
    mode: Option<SolveMode>,
    /// Compare with a simplex grid search of this step (up to three assets).
    #[arg(long, value_name = "STEP")]
    oracle_check: Option<f64>,
    /// Perturb riskless columns with this seed instead of rejecting them.
    #[arg(long)]
    jitter_seed: Option<u64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct RiskArgs {
    #[arg(long, value_name = "FILE")]
    csv: PathBuf,
    /// 1-based column to evaluate.
    #[arg(long, default_value_t = 1)]
    column: usize,
    #[command(flatten)]
    measure: Measure,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct ConvergeArgs {
    /// Distribution as JSON, e.g. `{"kind":"uniform_box","lower":[0,0],"upper":[1,1],"seed":1}`.
    #[arg(long, value_name = "FILE")]
    dist: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "250,1000,4000")]
    n_list: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 500)]
    dirs: usize,
    /// Overrides the seed in the distribution file.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    measure: Measure,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "3")]
    d_list: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1000,2000,3000,4000,5000")]
    n_list: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Per-replication limit in seconds.
    #[arg(long, default_value_t = 30.0)]
    timeout: f64,
    #[command(flatten)]
    measure: Measure,
    #[command(flatten)]
    output: Output,
}

enum Failure {
    Usage(String),
    Data(drlp::Error),
}

impl From<drlp::Error> for Failure {
    fn from(e: drlp::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Data(e.into())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Data(e) => write!(f, "{e}"),
        }
    }
}

type Run = Result<u8, Failure>;

fn existing(path: &Path) -> Result<&Path, Failure> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(Failure::Usage(format!("no such file: {}", path.display())))
    }
}

fn load_sample(path: &Path) -> Result<io::SampleTable, Failure> {
    Ok(io::read_sample_table(existing(path)?)?)
}

impl Measure {
    fn spec(&self) -> Result<DistortionSpec, Failure> {
        let s = &self.source;
        if let Some(p) = &s.weights {
            return Ok(DistortionSpec::Explicit(io::read_weights_json(existing(p)?)?));
        }
        if let Some(p) = &s.generator {
            return Ok(DistortionSpec::Generator(io::read_generator_csv(existing(p)?)?));
        }
        Ok(match s.measure.unwrap_or(MeasureKind::Es) {
            MeasureKind::Es => DistortionSpec::ExpectedShortfall { alpha: self.alpha },
            MeasureKind::Expectation => DistortionSpec::Expectation,
        })
    }
}

fn write_out(output: &Output, text: &str) -> Result<(), Failure> {
    match &output.out {
        Some(p) => fs::write(p, format!("{text}\n")).map_err(|e| Failure::Data(e.into())),
        None => match writeln!(std::io::stdout(), "{text}") {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::Data(e.into())),
            _ => Ok(()),
        },
    }
}

fn status_code(status: Status) -> u8 {
    match status {
        Status::Finite => 0,
        Status::None => EXIT_NONE,
        Status::Infinite => EXIT_INFINITE,
    }
}

fn millis(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn build(sample: &Sample, w: &drlp::risk::WeightVector, how: Construction, max_rounds: usize, seed: u64) -> drlp::Result<Region> {
    let opts = OracleOptions {
        max_rounds,
        seed,
        ..OracleOptions::default()
    };
    match how {
        Construction::Exact => region_exact(sample, w),
        Construction::Oracle => region_support_oracle_with(sample, w, &opts),
        Construction::Auto if sample.n() <= 6 => region_exact(sample, w),
        Construction::Auto => region_support_oracle_with(sample, w, &opts),
    }
}

fn run_region(a: &RegionArgs) -> Run {
    let sample = load_sample(&a.csv)?.sample;
    let w = make_weights(&a.measure.spec()?, sample.n())?;
    let t = Instant::now();
    let region = build(&sample, &w, a.construction, a.max_rounds, a.seed)?;
    let ms = millis(t);
    if let Some(off) = &a.off {
        fs::write(off, io::polytope_off(&region.polytope)?).map_err(|e| Failure::Data(e.into()))?;
    }
    write_out(&a.output, &io::region_json(&region, Some(a.seed), Some(ms))?)?;
    Ok(0)
}

fn run_solve(a: &SolveArgs) -> Run {
    let total = Instant::now();
    let sample = load_sample(&a.csv)?.sample;
    if a.c.len() != sample.d() {
        return Err(Failure::Usage(format!(
            "--c has {} entries but the sample has {} columns",
            a.c.len(),
            sample.d()
        )));
    }
    let w = make_weights(&a.measure.spec()?, sample.n())?;
    let mut lp = RobustLp::new(a.c.clone(), a.b, sample, w)?.with_nonneg(a.nonneg);
    if a.max_form {
        lp = transform_max(lp);
    }
    let mut timings = Timings::default();
    let outcome = match a.mode {
        SolveMode::Exact => {
            let t = Instant::now();
            let region = build(&lp.sample, &lp.weights, Construction::Auto, 200, a.seed)?;
            timings.region_ms = millis(t);
            let t = Instant::now();
            let out = solve_ray(&lp, &region)?;
            timings.solve_ms = millis(t);
            out
        }
        SolveMode::Iterative => {
            let opts = IterOptions {
                max_rounds: a.max_rounds,
                deadline: a.timeout.map(|s| Instant::now() + Duration::from_secs_f64(s.max(0.0))),
            };
            let t = Instant::now();
            let out = solve_iterative_with(&lp, &opts)?;
            timings.region_ms = f64::NAN;
            timings.solve_ms = millis(t);
            out
        }
    };
    timings.total_ms = millis(total);
    write_out(&a.output, &io::emit_result(&outcome, io::Format::Json, timings, Some(a.seed))?)?;
    Ok(status_code(outcome.status))
}

fn run_portfolio(a: &PortfolioArgs) -> Run {
    let t = Instant::now();
    let table = load_sample(&a.csv)?;
    let returns = table.sample;
    let w = make_weights(&a.measure.spec()?, returns.n())?;
    let opts = PortfolioOptions {
        nonneg: a.nonneg,
        jitter_seed: a.jitter_seed,
        names: table.header,
        mode: a.mode.map(|m| match m {
            SolveMode::Exact => Mode::Exact,
            SolveMode::Iterative => Mode::Iterative,
        }),
    };
    let res = portfolio_solve(&returns, &w, a.rho0, &opts)?;
    let mut doc = serde_json::to_value(&res)?;
    if let Some(out) = &res.outcome {
        doc["iterations"] = json!(out.iterations);
        doc["region"] = json!({
            "n_vertices": out.region.n_vertices,
            "n_facets": out.region.n_facets,
            "exact": out.region.exact,
        });
    }
    if let Some(step) = a.oracle_check {
        let grid = grid_oracle(&returns, &w, a.rho0, step)?;
        doc["grid_oracle"] = match grid {
            Some(g) => {
                let m = portfolio_report(&g, &returns, &w)?;
                let diff = res
                    .x
                    .as_ref()
                    .map(|x| x.iter().zip(&g).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max));
                json!({"x": g, "expected_return": m.expected_return, "risk": m.risk, "max_abs_diff": diff})
            }
            None => json!(null),
        };
    }
    doc["timings_ms"] = json!({"total": millis(t)});
    doc["seed"] = json!(a.jitter_seed);
    write_out(&a.output, &io::to_json(&doc)?)?;
    Ok(status_code(res.status))
}

fn run_risk(a: &RiskArgs) -> Run {
    let sample = load_sample(&a.csv)?.sample;
    if a.column == 0 || a.column > sample.d() {
        return Err(Failure::Usage(format!(
            "--column {} is outside 1..={}",
            a.column,
            sample.d()
        )));
    }
    let y = sample.column(a.column - 1);
    let w = make_weights(&a.measure.spec()?, y.len())?;
    let var = match w.es_alpha() {
        Some(alpha) => Some(value_at_risk(&y, alpha)?),
        None => None,
    };
    let doc = json!({
        "n": y.len(),
        "risk": eval_risk(&w, &y)?,
        "coherent": w.is_coherent(),
        "var_level": var,
    });
    write_out(&a.output, &io::to_json(&doc)?)?;
    Ok(0)
}

fn run_converge(a: &ConvergeArgs) -> Run {
    let text = fs::read_to_string(existing(&a.dist)?).map_err(|e| Failure::Data(e.into()))?;
    let mut dist: DistributionSpec = serde_json::from_str(&text)?;
    if let Some(seed) = a.seed {
        dist.seed = seed;
    }
    let t = Instant::now();
    let report = convergence_experiment(&dist, &a.measure.spec()?, &a.n_list, a.reps, a.dirs)?;
    let mut doc = serde_json::to_value(&report)?;
    let medians: Vec<f64> = report.rows.iter().map(|r| r.median).collect();
    doc["strictly_decreasing"] = json!(medians.windows(2).all(|p| p[1] < p[0]));
    doc["seed"] = json!(dist.seed);
    doc["timings_ms"] = json!({"total": millis(t)});
    write_out(&a.output, &io::to_json(&doc)?)?;
    Ok(0)
}

fn run_bench(a: &BenchArgs) -> Run {
    if !(a.timeout > 0.0) {
        return Err(Failure::Usage("--timeout must be positive".into()));
    }
    let report = benchmark(
        &a.d_list,
        &a.n_list,
        &a.measure.spec()?,
        a.reps,
        a.seed,
        Duration::from_secs_f64(a.timeout),
    )?;
    let mut doc = serde_json::to_value(&report)?;
    doc["seed"] = json!(a.seed);
    write_out(&a.output, &io::to_json(&doc)?)?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Region(a) => run_region(a),
        Command::Solve(a) => run_solve(a),
        Command::Portfolio(a) => run_portfolio(a),
        Command::Risk(a) => run_risk(a),
        Command::Converge(a) => run_converge(a),
        Command::Bench(a) => run_bench(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("drlp: {e}");
            ExitCode::from(match e {
                Failure::Usage(_) => EXIT_USAGE,
                Failure::Data(_) => EXIT_DATA,
            })
        }
    }
}
