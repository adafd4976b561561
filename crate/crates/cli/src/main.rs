//! `spanlab` command-line tool.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use spanlab::analytic::{
    cone_lk, prop38_lower_bound, psi_star, reference_constants, s_m_bound, theta_mean_length, BoundTable,
};
use spanlab::configs::{hex_config, poisson, square_grid, tri_config, uniform_n, PointConfig};
use spanlab::mc::{
    append_results, crossing_experiment, empirical_lk, empirical_lm, estimate_psi_ave_upper, length_experiment,
    window_sweep, ExperimentResult, PsiAveOptions, RESULTS_CSV_HEADER,
};
use spanlab::metrics::{
    intersection_rate_with, normalized_length, stretch_with, PairFilter, StretchMode, StretchOptions,
    DEFAULT_MARGIN, DEFAULT_TORUS_RADIUS, METRICS_SCHEMA_VERSION,
};
use spanlab::nets::{BuilderSpec, GridVariant, Network};
use spanlab::Rect;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const RUN_CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "spanlab", version, about = "Stretch and length of geometric spanner networks")]
struct Cli {
    /// Worker threads (defaults to all cores)
    #[arg(long, global = true, env = "SPANLAB_THREADS")]
    threads: Option<usize>,
    /// Also write the run configuration to this file, for `spanlab repro`
    #[arg(long, global = true, value_name = "FILE")]
    record: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Command {
    /// Generate a city configuration
    Generate(GenerateArgs),
    /// Build a road network over a configuration file
    Build(BuildArgs),
    /// Measure stretch, normalized length and intersection rate of a network file
    Measure(MeasureArgs),
    /// Evaluate analytic bounds and constants
    Bounds(BoundsArgs),
    /// Run a seeded Monte Carlo experiment
    Experiment(ExperimentArgs),
    /// Replay a recorded run configuration
    Repro {
        file: PathBuf,
    },
}

/// Everything needed to rerun a command.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunConfig {
    schema_version: u32,
    threads: Option<usize>,
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ConfigKindArg {
    Poisson,
    Uniform,
    SquareGrid,
    Hex,
    Tri,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct GenerateArgs {
    #[arg(value_enum)]
    kind: ConfigKindArg,
    /// Side of the square window [0, side]²
    #[arg(long, default_value_t = 40.0)]
    side: f64,
    /// Window as x0,y0,x1,y1 (overrides --side)
    #[arg(long, value_name = "X0,Y0,X1,Y1")]
    window: Option<String>,
    /// Intensity for Poisson configurations
    #[arg(long, default_value_t = 1.0)]
    rate: f64,
    /// Number of points for uniform configurations
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Treat the window as a torus
    #[arg(long)]
    torus: bool,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum BuilderKind {
    Delaunay,
    Theta,
    Yao,
    Cone,
    ConeDirection,
    Grid,
    Diagonals,
    Lattice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
enum VariantArg {
    N1,
    N2,
    N3,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct BuilderParams {
    /// Number of cones for θ and Yao graphs
    #[arg(long, default_value_t = 6)]
    m: u32,
    /// Cone roads use 2k cones of angle π/k
    #[arg(long, default_value_t = 4)]
    k: u32,
    /// Direction index for cone-direction
    #[arg(long, default_value_t = 0)]
    i: u32,
    /// Grid spacing
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long, value_enum, default_value = "n1")]
    variant: VariantArg,
}

impl BuilderParams {
    fn spec(&self, kind: BuilderKind) -> BuilderSpec {
        match kind {
            BuilderKind::Delaunay => BuilderSpec::Delaunay,
            BuilderKind::Theta => BuilderSpec::Theta { m: self.m },
            BuilderKind::Yao => BuilderSpec::Yao { m: self.m },
            BuilderKind::Cone => BuilderSpec::Cone { k: self.k },
            BuilderKind::ConeDirection => BuilderSpec::ConeDirection { k: self.k, i: self.i },
            BuilderKind::Grid => BuilderSpec::Grid {
                t: self.t,
                variant: match self.variant {
                    VariantArg::N1 => GridVariant::N1,
                    VariantArg::N2 => GridVariant::N2,
                    VariantArg::N3 => GridVariant::N3,
                },
            },
            BuilderKind::Diagonals => BuilderSpec::AlternateDiagonals,
            BuilderKind::Lattice => BuilderSpec::Lattice,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct BuildArgs {
    /// Configuration file written by `generate`
    config: PathBuf,
    #[arg(value_enum)]
    kind: BuilderKind,
    #[command(flatten)]
    params: BuilderParams,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ModeArg {
    Steiner,
    Graph,
}

impl From<ModeArg> for StretchMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Steiner => StretchMode::Steiner,
            ModeArg::Graph => StretchMode::Graph,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum FilterArg {
    /// Interior pairs on a plane, nearby pairs on a torus
    Auto,
    All,
    Interior,
    Torus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct MeasureArgs {
    /// Network file written by `build`
    network: PathBuf,
    #[arg(long, value_enum, default_value = "steiner")]
    stretch: ModeArg,
    /// Fraction of the window trimmed per side for length and pair filtering
    #[arg(long, default_value_t = DEFAULT_MARGIN)]
    margin: f64,
    /// Random test lines for the intersection rate (0 skips it)
    #[arg(long, default_value_t = 0)]
    lines: usize,
    #[arg(long, value_enum, default_value = "auto")]
    filter: FilterArg,
    /// Sample this many sources when more cities pass the filter
    #[arg(long, default_value_t = 400)]
    max_sources: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct BoundsArgs {
    #[command(flatten)]
    query: BoundsQuery,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[group(required = true, multiple = true)]
struct BoundsQuery {
    /// Reference constants
    #[arg(long)]
    table: bool,
    /// Ψ*(s) for 1 < s < 2
    #[arg(long, value_name = "S")]
    psi_star: Option<f64>,
    /// Second-moment lower bound at stretch excess s, 0 < s < 0.1
    #[arg(long, value_name = "S")]
    prop38: Option<f64>,
    /// Mean length per unit area of the θ_m graph (even m ≥ 6), with s_m
    #[arg(long, value_name = "M")]
    lm: Option<u32>,
    /// Cone-road direction length L_k, with stretch 1/cos(π/k) and total length k L_k
    #[arg(long, value_name = "K")]
    lk: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ExperimentName {
    /// Length and stretch of a builder on Poisson cities
    PsiAve,
    /// Normalized length of a builder on Poisson cities
    Length,
    /// θ_m graph length per unit area on the torus
    Lm,
    /// Single-direction cone-road length on the torus
    Lk,
    /// Moments of the friend-pair crossing count
    Crossing,
    /// Length at several window sizes
    Sweep,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct ExperimentArgs {
    #[arg(value_enum)]
    name: ExperimentName,
    #[arg(long, value_enum, default_value = "delaunay")]
    builder: BuilderKind,
    #[command(flatten)]
    params: BuilderParams,
    #[arg(long, default_value_t = 40.0)]
    side: f64,
    /// Window sides for `sweep`
    #[arg(long, value_delimiter = ',', default_values_t = [10.0, 20.0, 40.0])]
    sides: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Planar windows with a margin instead of tori
    #[arg(long)]
    planar: bool,
    #[arg(long, value_enum, default_value = "steiner")]
    mode: ModeArg,
    /// Strip half-height for `crossing`
    #[arg(long, default_value_t = 1.0)]
    h: f64,
    /// Interval length for `crossing`
    #[arg(long, default_value_t = 1.0)]
    l: f64,
    /// Strip width for `crossing` (default 40 max(h, L, 1))
    #[arg(long)]
    width: Option<f64>,
    /// Results file to append to (.csv, or .jsonl for JSON lines)
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Core(#[from] spanlab::Error),
    #[error("usage: {0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use spanlab::Error as E;
        match self {
            Self::Usage(_) => 2,
            Self::Core(E::Domain(_) | E::Unsupported(_) | E::DisconnectedCity { .. }) => 3,
            Self::Core(_) => 4,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Core(spanlab::Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn read_file(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| io_err(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_window(spec: &str) -> CliResult<Rect> {
    let v: Vec<f64> = spec
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("window {spec:?}: {e}")))?;
    match v[..] {
        [x0, y0, x1, y1] => Ok(Rect::new(x0, y0, x1, y1)),
        _ => Err(CliError::Usage(format!("window {spec:?} needs four numbers x0,y0,x1,y1"))),
    }
}

fn generate(a: &GenerateArgs) -> CliResult<()> {
    let window = match &a.window {
        Some(w) => parse_window(w)?,
        None => Rect::square(a.side),
    };
    let mut cfg = match a.kind {
        ConfigKindArg::Poisson => poisson(window, a.rate, a.seed)?,
        ConfigKindArg::Uniform => uniform_n(a.n, window, a.seed)?,
        ConfigKindArg::SquareGrid => square_grid(window)?,
        ConfigKindArg::Hex => hex_config(window)?,
        ConfigKindArg::Tri => tri_config(window)?,
    };
    if a.torus {
        cfg = cfg.into_torus()?;
    }
    emit(a.out.as_deref(), &(cfg.to_json()? + "\n"))
}

fn build(a: &BuildArgs) -> CliResult<()> {
    let cfg = PointConfig::from_json(&read_file(&a.config)?)?;
    let net = a.params.spec(a.kind).build(&cfg)?;
    emit(a.out.as_deref(), &(net.to_json()? + "\n"))
}

#[derive(Serialize)]
struct MeasureRow {
    schema_version: u32,
    network: String,
    cities: usize,
    normalized_length: f64,
    stretch: spanlab::metrics::StretchReport,
    intersection: Option<spanlab::metrics::IntersectionRate>,
}

fn measure(a: &MeasureArgs) -> CliResult<()> {
    let net = Network::from_json(&read_file(&a.network)?)?;
    let filter = match a.filter {
        FilterArg::Auto if net.torus => PairFilter::TorusRadius { fraction: DEFAULT_TORUS_RADIUS },
        FilterArg::Auto | FilterArg::Interior => PairFilter::Interior { margin: a.margin },
        FilterArg::All => PairFilter::All,
        FilterArg::Torus => PairFilter::TorusRadius { fraction: DEFAULT_TORUS_RADIUS },
    };
    let margin = if net.torus { 0.0 } else { a.margin };
    let length = normalized_length(&net, margin)?;
    let mut opts = StretchOptions::new(a.stretch.into(), filter);
    opts.max_sources = a.max_sources;
    opts.seed = a.seed;
    let st = stretch_with(&net, &opts)?;
    let rate = if a.lines > 0 {
        Some(intersection_rate_with(&net, margin, a.lines, a.seed)?)
    } else {
        None
    };
    let text = match a.format {
        FormatArg::Json => {
            let row = MeasureRow {
                schema_version: METRICS_SCHEMA_VERSION,
                network: net.kind.clone(),
                cities: net.cities.len(),
                normalized_length: length,
                stretch: st,
                intersection: rate,
            };
            serde_json::to_string_pretty(&row).map_err(spanlab::Error::from)? + "\n"
        }
        FormatArg::Csv => {
            let (r, se, n) = rate.map_or((f64::NAN, f64::NAN, 0), |r| (r.rate, r.se, r.lines));
            let stretch_header = spanlab::metrics::StretchReport::csv_header().trim_end_matches(",schema_version");
            let stretch_row = st.csv_row();
            let stretch_row = stretch_row.rsplit_once(',').map_or(stretch_row.as_str(), |(head, _)| head);
            format!(
                "network,total_cities,normalized_length,{stretch_header},intersection_rate,intersection_se,lines,schema_version\n\
                 {},{},{length},{stretch_row},{r},{se},{n},{METRICS_SCHEMA_VERSION}\n",
                net.kind,
                net.cities.len(),
            )
        }
    };
    emit(a.out.as_deref(), &text)
}

fn bounds(args: &BoundsArgs) -> CliResult<()> {
    let a = &args.query;
    let mut t = if a.table { reference_constants() } else { BoundTable::default() };
    if let Some(s) = a.psi_star {
        t.push("psi_star", format!("s={s}"), psi_star(s)?, "T-Tamar");
    }
    if let Some(s) = a.prop38 {
        let p = prop38_lower_bound(s)?;
        let param = format!("s={s}");
        t.push("prop38_lower_bound", param.clone(), p.value, "aveLB");
        t.push("prop38_argmax_h", param.clone(), p.h, "aveLB");
        t.push("prop38_argmax_l", param.clone(), p.l, "aveLB");
        t.push("prop38_schedule_value", param, p.schedule_value, "aveLB");
    }
    if let Some(m) = a.lm {
        t.push("theta_mean_length", format!("m={m}"), theta_mean_length(m)?, "Lm");
        t.push("theta_stretch_bound", format!("m={m}"), s_m_bound(m)?, "sec5");
    }
    if let Some(k) = a.lk {
        let lk: f64 = cone_lk(k)?;
        t.push("cone_lk", format!("k={k}"), lk, "Lkformula");
        t.push("cone_stretch", format!("k={k}"), 1.0 / (PI / f64::from(k)).cos(), "Prop7");
        t.push("cone_length", format!("k={k}"), f64::from(k) * lk, "Prop7");
    }
    emit(args.out.as_deref(), &t.to_csv())
}

fn experiment(a: &ExperimentArgs) -> CliResult<()> {
    let spec = a.params.spec(a.builder);
    let torus = !a.planar;
    let results: Vec<ExperimentResult> = match a.name {
        ExperimentName::PsiAve => {
            let mut o = PsiAveOptions::new(spec, a.side, a.replicates, a.seed);
            o.mode = a.mode.into();
            o.torus = torus;
            let est = estimate_psi_ave_upper(&o)?;
            let (mean, se) = spanlab::mc::mean_se(&est.stretches);
            let mut params = est.length.params.clone();
            params.insert("max_stretch".into(), est.max_stretch.into());
            let stretch_row = ExperimentResult {
                estimator: "psi_ave_stretch".into(),
                params,
                mean,
                se,
                values: est.stretches.clone(),
                ..est.length.clone()
            };
            vec![est.length, stretch_row]
        }
        ExperimentName::Length => vec![length_experiment(&spec, a.side, a.replicates, a.seed, torus)?],
        ExperimentName::Lm => vec![empirical_lm(a.params.m, a.side, a.replicates, a.seed)?],
        ExperimentName::Lk => vec![empirical_lk(a.params.k, a.side, a.replicates, a.seed)?],
        ExperimentName::Crossing => crossing_experiment(a.h, a.l, a.width, a.replicates, a.seed)?.results().to_vec(),
        ExperimentName::Sweep => window_sweep(&spec, &a.sides, a.replicates, a.seed, torus)?,
    };
    match &a.out {
        Some(p) => append_results(p, &results)?,
        None => {
            let mut text = format!("{RESULTS_CSV_HEADER}\n");
            for r in &results {
                text.push_str(&r.csv_row());
                text.push('\n');
            }
            emit(None, &text)?;
        }
    }
    Ok(())
}

fn configure_threads(n: Option<usize>) -> CliResult<()> {
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // a second initialisation (after repro) keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn run(config: &RunConfig, nested: bool) -> CliResult<()> {
    configure_threads(config.threads)?;
    match &config.command {
        Command::Generate(a) => generate(a),
        Command::Build(a) => build(a),
        Command::Measure(a) => measure(a),
        Command::Bounds(a) => bounds(a),
        Command::Experiment(a) => experiment(a),
        Command::Repro { file } => {
            if nested {
                return Err(CliError::Usage("a recorded run cannot itself be `repro`".into()));
            }
            let text = read_file(file)?;
            let stored: RunConfig = serde_json::from_str(&text).map_err(spanlab::Error::from)?;
            if stored.schema_version != RUN_CONFIG_SCHEMA_VERSION {
                return Err(spanlab::Error::InvalidInput(format!(
                    "unsupported run configuration schema version {}",
                    stored.schema_version
                ))
                .into());
            }
            run(&stored, true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = RunConfig {
        schema_version: RUN_CONFIG_SCHEMA_VERSION,
        threads: cli.threads,
        command: cli.command,
    };
    let result = (|| {
        if let Some(path) = &cli.record {
            let text = serde_json::to_string_pretty(&config).map_err(spanlab::Error::from)?;
            std::fs::write(path, text + "\n").map_err(|e| io_err(path, e))?;
        }
        run(&config, false)
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spanlab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
