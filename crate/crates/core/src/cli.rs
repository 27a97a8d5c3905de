//! Command-line front end.
//!
//! Every subcommand resolves into a [`RunConfig`], which can be saved with
//! `--save-config` and replayed with `run --config`. Exit codes: 0 on
//! success, 2 on usage errors, 1 on numeric or I/O failures.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::bootstrap::{bootstrap_solve, BootstrapConfig, FirstHop};
use crate::error::Error;
use crate::grid::SpatialGrid;
use crate::kernel::KernelSpec;
use crate::models::{BasepointRule, Model};
use crate::oracles::{oracle_curve, OracleKind};
use crate::pricing::{fmt17, greeks, Payoff, PriceCurve, PriceRequest, PricingMethod};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numeric(Error),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) | CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numeric(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Numeric(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Parser, Debug)]
#[command(name = "lvasym", version, about = "Short-time asymptotic option pricing for local-volatility models")]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Subcommand, Debug)]
enum CliCommand {
    /// Option prices at a spot or over a grid
    Price {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: PriceArgs,
    },
    /// Kernel values G(x, y) over a grid of y
    Kernel {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: KernelArgs,
    },
    /// Finite-difference delta and gamma over a grid
    Greeks {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: GreeksArgs,
    },
    /// Long-maturity prices by repeated short-time steps
    Bootstrap {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: BootstrapArgs,
    },
    /// Error table against a reference oracle
    Compare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: CompareArgs,
    },
    /// Replay a saved configuration
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the output path stored in the configuration
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Model definition file (JSON)
    #[arg(long, conflicts_with = "model")]
    model_file: Option<PathBuf>,
    /// Inline model definition (JSON)
    #[arg(long)]
    model: Option<String>,
    /// Output file; `.json` selects JSON, anything else CSV
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the resolved configuration to this file
    #[arg(long)]
    save_config: Option<PathBuf>,
    /// Reserved; the engine is deterministic
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_order(s: &str) -> std::result::Result<u8, String> {
    match s {
        "1" => Ok(1),
        "2" => Ok(2),
        _ => Err("order must be 1 or 2".into()),
    }
}

fn parse_kernel_order(s: &str) -> std::result::Result<u8, String> {
    match s {
        "0" => Ok(0),
        "1" => Ok(1),
        "2" => Ok(2),
        _ => Err("order must be 0, 1 or 2".into()),
    }
}

fn parse_positive(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        Ok(v) => Err(format!("must be > 0, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_grid(s: &str) -> std::result::Result<SpatialGrid, String> {
    SpatialGrid::parse(s).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayoffKind {
    Call,
    Put,
    Butterfly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasepointArg {
    Atx,
    Aty,
    Mid,
}

impl From<BasepointArg> for BasepointRule {
    fn from(b: BasepointArg) -> Self {
        match b {
            BasepointArg::Atx => BasepointRule::AtX,
            BasepointArg::Aty => BasepointRule::AtY,
            BasepointArg::Mid => BasepointRule::Midpoint,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodArg {
    Closed,
    Quadrature,
}

impl From<MethodArg> for PricingMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Closed => PricingMethod::Closed,
            MethodArg::Quadrature => PricingMethod::Quadrature,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreeksMethod {
    Closed,
    Quadrature,
    Bootstrap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
#[value(rename_all = "kebab-case")]
pub enum OracleArg {
    BsExact,
    HaganWoodward,
    Cn,
}

impl From<OracleArg> for OracleKind {
    fn from(o: OracleArg) -> Self {
        match o {
            OracleArg::BsExact => OracleKind::BsExact,
            OracleArg::HaganWoodward => OracleKind::HaganWoodward,
            OracleArg::Cn => OracleKind::Cn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompareMethod {
    Order1,
    Order2,
    Bootstrap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FirstHopArg {
    Auto,
    Closed,
    Quadrature,
}

impl From<FirstHopArg> for FirstHop {
    fn from(f: FirstHopArg) -> Self {
        match f {
            FirstHopArg::Auto => FirstHop::Auto,
            FirstHopArg::Closed => FirstHop::Closed,
            FirstHopArg::Quadrature => FirstHop::Quadrature,
        }
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffArgs {
    #[arg(long, value_enum, default_value = "call")]
    pub payoff: PayoffKind,
    /// Strike; the peak for a butterfly
    #[arg(long, value_parser = parse_positive)]
    pub strike: Option<f64>,
    #[arg(long, value_parser = parse_positive)]
    pub k1: Option<f64>,
    #[arg(long, value_parser = parse_positive)]
    pub k2: Option<f64>,
}

impl PayoffArgs {
    fn payoff(&self) -> CliResult<Payoff> {
        let strike = || self.strike.ok_or_else(|| usage("--strike is required"));
        Ok(match self.payoff {
            PayoffKind::Call => Payoff::call(strike()?)?,
            PayoffKind::Put => Payoff::put(strike()?)?,
            PayoffKind::Butterfly => {
                let (k1, k2) = match (self.k1, self.k2) {
                    (Some(a), Some(b)) => (a, b),
                    _ => return Err(usage("butterfly needs --k1, --strike and --k2")),
                };
                Payoff::butterfly(k1, strike()?, k2).map_err(|e| usage(e.to_string()))?
            }
        })
    }

    fn top_strike(&self) -> f64 {
        [self.strike, self.k2].into_iter().flatten().fold(0.0, f64::max)
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceArgs {
    #[arg(long, value_parser = parse_order, default_value = "1")]
    pub order: u8,
    #[arg(long, value_parser = parse_positive)]
    pub t: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub payoff: PayoffArgs,
    #[arg(long, value_parser = parse_positive, conflicts_with = "grid")]
    pub spot: Option<f64>,
    /// Spot grid `xmin:xmax:dx`
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<SpatialGrid>,
    #[arg(long, value_enum, default_value = "atx")]
    pub basepoint: BasepointArg,
    #[arg(long, value_enum, default_value = "closed")]
    pub method: MethodArg,
    /// Quadrature truncation; defaults to ten times the largest strike
    #[arg(long, value_parser = parse_positive)]
    pub quad_xmax: Option<f64>,
    #[arg(long, value_parser = parse_positive, default_value = "0.01")]
    pub quad_dx: f64,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelArgs {
    #[arg(long, value_parser = parse_kernel_order, default_value = "2")]
    pub order: u8,
    #[arg(long, value_parser = parse_positive)]
    pub t: f64,
    #[arg(long, value_parser = parse_positive)]
    pub x: f64,
    /// Grid of `y` values `ymin:ymax:dy`
    #[arg(long, value_parser = parse_grid)]
    pub grid: SpatialGrid,
    #[arg(long, value_enum, default_value = "atx")]
    pub basepoint: BasepointArg,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreeksArgs {
    #[arg(long, value_parser = parse_order, default_value = "2")]
    pub order: u8,
    #[arg(long, value_parser = parse_positive)]
    pub t: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub payoff: PayoffArgs,
    #[arg(long, value_parser = parse_grid)]
    pub grid: SpatialGrid,
    /// Difference step; defaults to the grid spacing
    #[arg(long, value_parser = parse_positive)]
    pub dx: Option<f64>,
    #[arg(long, value_enum, default_value = "closed")]
    pub method: GreeksMethod,
    #[arg(long, default_value = "10")]
    pub steps: usize,
    /// Truncation for quadrature and bootstrap; defaults to ten times the largest strike
    #[arg(long, value_parser = parse_positive)]
    pub xmax: Option<f64>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapArgs {
    #[arg(long, value_parser = parse_kernel_order, default_value = "2")]
    pub order: u8,
    #[arg(long, default_value = "10")]
    pub steps: usize,
    #[arg(long, value_parser = parse_positive)]
    pub t: f64,
    #[arg(long, value_parser = parse_positive)]
    pub xmax: Option<f64>,
    #[arg(long, value_parser = parse_positive, default_value = "0.1")]
    pub dx: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub payoff: PayoffArgs,
    #[arg(long, value_enum, default_value = "atx")]
    pub basepoint: BasepointArg,
    #[arg(long, value_enum, default_value = "auto")]
    pub first_hop: FirstHopArg,
    #[arg(long, value_enum)]
    pub compare_oracle: Option<OracleArg>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareArgs {
    #[arg(long, value_enum)]
    pub oracle: OracleArg,
    #[arg(long, value_enum)]
    pub method: CompareMethod,
    /// Spots `xmin:xmax:dx`
    #[arg(long, value_parser = parse_grid)]
    pub grid: SpatialGrid,
    /// Comma-separated maturities
    #[arg(long, value_delimiter = ',', value_parser = parse_positive, required = true)]
    pub times: Vec<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub payoff: PayoffArgs,
    #[arg(long, default_value = "10")]
    pub steps: usize,
    /// Truncation for bootstrap and Crank-Nicolson grids
    #[arg(long, value_parser = parse_positive)]
    pub xmax: Option<f64>,
    /// Spacing for bootstrap and Crank-Nicolson grids
    #[arg(long, value_parser = parse_positive)]
    pub dx: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Task {
    Price(PriceArgs),
    Kernel(KernelArgs),
    Greeks(GreeksArgs),
    Bootstrap(BootstrapArgs),
    Compare(CompareArgs),
}

/// A fully resolved invocation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: Model,
    pub task: Task,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn to_json(&self) -> CliResult<String> {
        serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))
    }

    pub fn from_json(s: &str) -> CliResult<Self> {
        let cfg: RunConfig = serde_json::from_str(s).map_err(|e| usage(format!("bad config: {e}")))?;
        Ok(RunConfig {
            model: cfg.model.validated()?,
            ..cfg
        })
    }
}

#[derive(Debug, Clone, Copy)]
enum Cell {
    Real(f64),
    Int(i64),
}

/// Rows with named columns, rendered as CSV or JSON.
struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(header: Vec<&'static str>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        self.rows.push(row);
    }

    fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Real(v) => fmt17(*v),
                    Cell::Int(i) => i.to_string(),
                })
                .collect();
            writeln!(out, "{}", cells.join(",")).unwrap();
        }
        out
    }

    fn to_json(&self) -> String {
        let rows: Vec<serde_json::Map<String, serde_json::Value>> = self
            .rows
            .iter()
            .map(|row| {
                self.header
                    .iter()
                    .zip(row)
                    .map(|(h, c)| {
                        let v = match c {
                            Cell::Real(v) => serde_json::json!(v),
                            Cell::Int(i) => serde_json::json!(i),
                        };
                        (h.to_string(), v)
                    })
                    .collect()
            })
            .collect();
        let mut s = serde_json::to_string_pretty(&rows).expect("rows serialize");
        s.push('\n');
        s
    }
}

fn curve_table(curve: &PriceCurve) -> Table {
    let mut t = Table::new(vec!["x", "price"]);
    for (x, v) in curve.iter() {
        t.push(vec![Cell::Real(x), Cell::Real(v)]);
    }
    t
}

fn default_xmax(payoff: &PayoffArgs, given: Option<f64>) -> f64 {
    given.unwrap_or(10.0 * payoff.top_strike())
}

fn half_line(xmax: f64, dx: f64) -> CliResult<SpatialGrid> {
    let cells = (xmax / dx).round();
    SpatialGrid::half_line(cells * dx, dx).map_err(|e| usage(e.to_string()))
}

/// What a run produces: a table, plus a scalar echoed to stdout for single prices.
struct Outcome {
    table: Table,
    scalar: Option<f64>,
}

fn execute(cfg: &RunConfig) -> CliResult<Outcome> {
    let model = &cfg.model;
    match &cfg.task {
        Task::Price(a) => {
            let payoff = a.payoff.payoff()?;
            let spec = KernelSpec::new(model.clone(), a.order, a.basepoint.into())?;
            let method: PricingMethod = a.method.into();
            if method == PricingMethod::Closed && a.basepoint != BasepointArg::Atx {
                return Err(usage("closed-form prices require --basepoint atx"));
            }
            let quad = half_line(default_xmax(&a.payoff, a.quad_xmax), a.quad_dx)?;
            let req = PriceRequest::new(spec, a.t, payoff)?;
            match (a.spot, a.grid) {
                (Some(x), None) => {
                    let v = req.at(x, method, &quad)?;
                    let mut table = Table::new(vec!["x", "price"]);
                    table.push(vec![Cell::Real(x), Cell::Real(v)]);
                    Ok(Outcome {
                        table,
                        scalar: Some(v),
                    })
                }
                (None, Some(grid)) => Ok(Outcome {
                    table: curve_table(&req.curve(&grid.nodes(), method, &quad)?),
                    scalar: None,
                }),
                _ => Err(usage("exactly one of --spot or --grid is required")),
            }
        }
        Task::Kernel(a) => {
            let spec = KernelSpec::new(model.clone(), a.order, a.basepoint.into())?;
            let mut table = Table::new(vec!["x", "y", "t", "order", "value"]);
            for y in a.grid.nodes() {
                let v = spec.eval(a.t, a.x, y)?;
                table.push(vec![
                    Cell::Real(a.x),
                    Cell::Real(y),
                    Cell::Real(a.t),
                    Cell::Int(a.order as i64),
                    Cell::Real(v),
                ]);
            }
            Ok(Outcome { table, scalar: None })
        }
        Task::Greeks(a) => {
            let payoff = a.payoff.payoff()?;
            let dx = a.dx.unwrap_or(a.grid.dx);
            let xmax = default_xmax(&a.payoff, a.xmax);
            let spec = KernelSpec::new(model.clone(), a.order, BasepointRule::AtX)?;
            let mut table = Table::new(vec!["x", "delta", "gamma"]);
            match a.method {
                GreeksMethod::Bootstrap => {
                    let grid = half_line(xmax, dx)?;
                    let cfg = BootstrapConfig::new(spec, a.t, a.steps, grid)?;
                    let curve = bootstrap_solve(&cfg, &payoff)?;
                    for (x, g) in curve.greeks() {
                        if a.grid.contains(x) {
                            table.push(vec![Cell::Real(x), Cell::Real(g.delta), Cell::Real(g.gamma)]);
                        }
                    }
                }
                m => {
                    let method = if m == GreeksMethod::Closed {
                        PricingMethod::Closed
                    } else {
                        PricingMethod::Quadrature
                    };
                    let quad = half_line(xmax, dx.min(0.01))?;
                    let req = PriceRequest::new(spec, a.t, payoff)?;
                    for x in a.grid.nodes() {
                        let g = greeks(|s| req.at(s, method, &quad), x, dx)?;
                        table.push(vec![Cell::Real(x), Cell::Real(g.delta), Cell::Real(g.gamma)]);
                    }
                }
            }
            Ok(Outcome { table, scalar: None })
        }
        Task::Bootstrap(a) => {
            let payoff = a.payoff.payoff()?;
            let grid = half_line(default_xmax(&a.payoff, a.xmax), a.dx)?;
            let spec = KernelSpec::new(model.clone(), a.order, a.basepoint.into())?;
            let cfg = BootstrapConfig::new(spec, a.t, a.steps, grid)?.with_first_hop(a.first_hop.into());
            let curve = bootstrap_solve(&cfg, &payoff)?;
            let table = match a.compare_oracle {
                None => {
                    let mut t = Table::new(vec!["x", "value"]);
                    for (x, v) in curve.iter() {
                        t.push(vec![Cell::Real(x), Cell::Real(v)]);
                    }
                    t
                }
                Some(o) => {
                    let reference = oracle_curve(o.into(), model, a.t, &payoff, &grid, &curve.x)?;
                    let mut t = Table::new(vec!["x", "value", "oracle", "abs_error"]);
                    for ((x, v), r) in curve.iter().zip(reference.value) {
                        t.push(vec![Cell::Real(x), Cell::Real(v), Cell::Real(r), Cell::Real((v - r).abs())]);
                    }
                    t
                }
            };
            Ok(Outcome { table, scalar: None })
        }
        Task::Compare(a) => {
            let payoff = a.payoff.payoff()?;
            let xs = a.grid.nodes();
            let xmax = default_xmax(&a.payoff, a.xmax).max(a.grid.x_max);
            let mut table = Table::new(vec!["t", "x", "approx", "oracle", "abs_error"]);
            for &t in &a.times {
                let approx = match a.method {
                    CompareMethod::Order1 | CompareMethod::Order2 => {
                        let order = if a.method == CompareMethod::Order1 { 1 } else { 2 };
                        let spec = KernelSpec::new(model.clone(), order, BasepointRule::AtX)?;
                        let req = PriceRequest::new(spec, t, payoff.clone())?;
                        xs.iter()
                            .map(|&x| req.closed(x))
                            .collect::<crate::Result<Vec<_>>>()?
                    }
                    CompareMethod::Bootstrap => {
                        let grid = half_line(xmax, a.dx.unwrap_or(0.1))?;
                        let spec = KernelSpec::new(model.clone(), 2, BasepointRule::AtX)?;
                        let curve = bootstrap_solve(&BootstrapConfig::new(spec, t, a.steps, grid)?, &payoff)?;
                        let sampled = Payoff::sampled(grid, curve.value)?;
                        xs.iter().map(|&x| sampled.eval(x)).collect()
                    }
                };
                let oracle_grid = half_line(xmax, a.dx.unwrap_or(0.01))?;
                let reference = oracle_curve(a.oracle.into(), model, t, &payoff, &oracle_grid, &xs)?;
                for ((&x, v), r) in xs.iter().zip(approx).zip(reference.value) {
                    table.push(vec![
                        Cell::Real(t),
                        Cell::Real(x),
                        Cell::Real(v),
                        Cell::Real(r),
                        Cell::Real((v - r).abs()),
                    ]);
                }
            }
            Ok(Outcome { table, scalar: None })
        }
    }
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

fn render(table: &Table, out: Option<&Path>) -> String {
    let json = out
        .and_then(|p| p.extension())
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if json {
        table.to_json()
    } else {
        table.to_csv()
    }
}

fn load_model(common: &Common) -> CliResult<Model> {
    let text = match (&common.model_file, &common.model) {
        (Some(path), None) => fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read model file {}: {e}", path.display())))?,
        (None, Some(inline)) => inline.clone(),
        _ => return Err(usage("one of --model-file or --model is required")),
    };
    Ok(Model::from_json(&text)?)
}

fn resolve(command: CliCommand) -> CliResult<(RunConfig, Option<PathBuf>)> {
    let (common, task) = match command {
        CliCommand::Run { config, out } => {
            let text = fs::read_to_string(&config)
                .map_err(|e| usage(format!("cannot read config {}: {e}", config.display())))?;
            let mut cfg = RunConfig::from_json(&text)?;
            if out.is_some() {
                cfg.out = out;
            }
            return Ok((cfg, None));
        }
        CliCommand::Price { common, args } => (common, Task::Price(args)),
        CliCommand::Kernel { common, args } => (common, Task::Kernel(args)),
        CliCommand::Greeks { common, args } => (common, Task::Greeks(args)),
        CliCommand::Bootstrap { common, args } => (common, Task::Bootstrap(args)),
        CliCommand::Compare { common, args } => (common, Task::Compare(args)),
    };
    let cfg = RunConfig {
        model: load_model(&common)?,
        task,
        out: common.out.clone(),
        seed: common.seed,
    };
    Ok((cfg, common.save_config))
}

/// Executes a configuration, writing its artifact; returns what goes to stdout.
pub fn run_config(cfg: &RunConfig) -> CliResult<String> {
    let outcome = execute(cfg)?;
    let text = render(&outcome.table, cfg.out.as_deref());
    match &cfg.out {
        Some(path) => {
            write_atomic(path, &text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            Ok(outcome.scalar.map(|v| format!("{}\n", fmt17(v))).unwrap_or_default())
        }
        None => Ok(match outcome.scalar {
            Some(v) => format!("{}\n", fmt17(v)),
            None => text,
        }),
    }
}

fn run_inner(command: CliCommand) -> CliResult<String> {
    let (cfg, save) = resolve(command)?;
    if let Some(path) = save {
        write_atomic(&path, &cfg.to_json()?).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    run_config(&cfg)
}

/// Parses `argv` (program name first), runs it and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run_inner(cli.command) {
        Ok(stdout) => {
            print!("{stdout}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
