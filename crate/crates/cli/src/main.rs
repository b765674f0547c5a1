//! `rdd` command-line tool: analyze CSV data, simulate datasets, run Monte
//! Carlo studies, and emit binned-plot data.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error. Fatal failures
//! print a machine-readable error document to stderr.

use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use rdd_core::balance::Correction;
use rdd_core::data::{load_dataset, ColumnMapping, RdDataset};
use rdd_core::design::{BandwidthSpec, DesignKind, Kernel, RdDesign, TreatedSide};
use rdd_core::error::Error;
use rdd_core::plot::{binned_scatter, BinsSpec};
use rdd_core::report::{run_pipeline, to_json, PipelineConfig};
use rdd_core::sim::{generate, monte_carlo, DgpSpec, McAnalysis};
use rdd_core::wls::FitTarget;

#[derive(Parser)]
#[command(name = "rdd", version, about = "Regression discontinuity analysis toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full analysis pipeline on a CSV file and emit a JSON report.
    Analyze(AnalyzeArgs),
    /// Generate a dataset from a named DGP family and write it as CSV.
    Simulate(SimulateArgs),
    /// Run a seeded Monte Carlo study and print summary statistics.
    Mc(McArgs),
    /// Compute binned-scatter data for a CSV file.
    Plot(PlotArgs),
}

#[derive(Args, Default)]
struct AnalyzeArgs {
    /// JSON config file with the same keys; command-line flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV input path.
    #[arg(long)]
    data: Option<String>,
    /// Assignment (running) variable column.
    #[arg(long)]
    running: Option<String>,
    /// Outcome column.
    #[arg(long)]
    outcome: Option<String>,
    /// Cutoff value in the running variable.
    #[arg(long)]
    cutoff: Option<f64>,
    /// Which side of the cutoff is treated: above | below.
    #[arg(long)]
    treated_side: Option<String>,
    /// Treatment indicator column (0/1); required for fuzzy designs.
    #[arg(long)]
    treatment: Option<String>,
    /// Design kind: sharp | fuzzy | kink.
    #[arg(long)]
    design: Option<String>,
    /// Kernel: triangular | uniform | epanechnikov.
    #[arg(long)]
    kernel: Option<String>,
    /// Local polynomial order (0, 1, or 2).
    #[arg(long)]
    order: Option<usize>,
    /// Bandwidth: "cv" or a positive number.
    #[arg(long)]
    bandwidth: Option<String>,
    /// Comma-separated covariate columns.
    #[arg(long)]
    covariates: Option<String>,
    /// Donut radius around the cutoff.
    #[arg(long)]
    donut: Option<f64>,
    /// Comma-separated placebo cutoffs.
    #[arg(long)]
    placebos: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format (json only).
    #[arg(long)]
    format: Option<String>,
}

/// The config-file document: same keys as the analyze flags.
#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    data: Option<String>,
    running: Option<String>,
    outcome: Option<String>,
    cutoff: Option<f64>,
    treated_side: Option<String>,
    treatment: Option<String>,
    design: Option<String>,
    kernel: Option<String>,
    order: Option<usize>,
    bandwidth: Option<String>,
    covariates: Option<String>,
    donut: Option<f64>,
    placebos: Option<String>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    format: Option<String>,
}

#[derive(Args)]
struct SimulateArgs {
    /// DGP family name or preset alias (e.g. fuzzy_obstetrician, gestage-259).
    #[arg(long)]
    family: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct McArgs {
    #[arg(long)]
    family: String,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    /// Analysis to replicate: sharp | fuzzy | kink | density_test | placebo | balance.
    #[arg(long, default_value = "sharp")]
    analysis: String,
    /// Comma-separated key=value overrides for the analysis design
    /// (bandwidth, order, kernel, donut) and the DGP (n, tau, noise_sd).
    #[arg(long)]
    design_args: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    data: String,
    #[arg(long)]
    running: String,
    #[arg(long)]
    outcome: String,
    #[arg(long)]
    cutoff: f64,
    #[arg(long, default_value = "above")]
    treated_side: String,
    #[arg(long)]
    treatment: Option<String>,
    /// Bin selection: "fixed:K" or "auto".
    #[arg(long, default_value = "auto")]
    bins: String,
    /// Bandwidth for the fitted curve: "cv" or a positive number.
    #[arg(long, default_value = "cv")]
    bandwidth: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ErrorBody {
    code: String,
    message: String,
}

#[derive(Serialize)]
struct ErrorDoc {
    error: ErrorBody,
}

struct Fatal {
    exit_code: i32,
    code: String,
    message: String,
}

impl From<Error> for Fatal {
    fn from(e: Error) -> Fatal {
        Fatal {
            exit_code: if e.is_config_error() { 2 } else { 3 },
            code: e.code().to_string(),
            message: e.to_string(),
        }
    }
}

fn config_error(code: &str, message: impl Into<String>) -> Fatal {
    Fatal {
        exit_code: 2,
        code: code.to_string(),
        message: message.into(),
    }
}

fn parse_treated_side(s: &str) -> Result<TreatedSide, Fatal> {
    match s {
        "above" => Ok(TreatedSide::Above),
        "below" => Ok(TreatedSide::Below),
        _ => Err(config_error(
            "INVALID_CONFIG",
            format!("treated-side must be above or below, got {s:?}"),
        )),
    }
}

fn parse_design(s: &str) -> Result<DesignKind, Fatal> {
    match s {
        "sharp" => Ok(DesignKind::Sharp),
        "fuzzy" => Ok(DesignKind::Fuzzy),
        "kink" => Ok(DesignKind::Kink),
        _ => Err(config_error(
            "INVALID_CONFIG",
            format!("design must be sharp, fuzzy, or kink, got {s:?}"),
        )),
    }
}

fn parse_kernel(s: &str) -> Result<Kernel, Fatal> {
    match s {
        "triangular" => Ok(Kernel::Triangular),
        "uniform" => Ok(Kernel::Uniform),
        "epanechnikov" => Ok(Kernel::Epanechnikov),
        _ => Err(config_error(
            "INVALID_CONFIG",
            format!("kernel must be triangular, uniform, or epanechnikov, got {s:?}"),
        )),
    }
}

fn parse_bandwidth(s: &str) -> Result<BandwidthSpec, Fatal> {
    if s == "cv" {
        return Ok(BandwidthSpec::CrossValidated);
    }
    s.parse::<f64>()
        .ok()
        .filter(|h| h.is_finite() && *h > 0.0)
        .map(BandwidthSpec::Fixed)
        .ok_or_else(|| {
            config_error(
                "INVALID_CONFIG",
                format!("bandwidth must be \"cv\" or a positive number, got {s:?}"),
            )
        })
}

fn parse_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(String::from)
        .collect()
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>, Fatal> {
    parse_list(s)
        .iter()
        .map(|t| {
            t.parse::<f64>().map_err(|_| {
                config_error("INVALID_CONFIG", format!("expected a number, got {t:?}"))
            })
        })
        .collect()
}

fn required<T>(v: Option<T>, flag: &str) -> Result<T, Fatal> {
    v.ok_or_else(|| config_error("INVALID_CONFIG", format!("missing required option --{flag}")))
}

fn load_config_file(path: &PathBuf) -> Result<ConfigFile, Fatal> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        config_error("INVALID_CONFIG", format!("cannot read config file: {e}"))
    })?;
    serde_json::from_str(&text)
        .map_err(|e| config_error("INVALID_CONFIG", format!("invalid config file: {e}")))
}

fn write_output(out: &Option<PathBuf>, text: &str) -> Result<(), Fatal> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Fatal {
            exit_code: 3,
            code: "IO_ERROR".to_string(),
            message: format!("cannot write {}: {e}", path.display()),
        }),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), Fatal> {
    let file = match &args.config {
        Some(path) => load_config_file(path)?,
        None => ConfigFile::default(),
    };
    // command line wins over the config file, field by field
    let data = required(args.data.or(file.data), "data")?;
    let running = required(args.running.or(file.running), "running")?;
    let outcome = required(args.outcome.or(file.outcome), "outcome")?;
    let cutoff = required(args.cutoff.or(file.cutoff), "cutoff")?;
    let treated_side =
        parse_treated_side(&args.treated_side.or(file.treated_side).unwrap_or_else(|| "above".into()))?;
    let kind = parse_design(&args.design.or(file.design).unwrap_or_else(|| "sharp".into()))?;
    let kernel = parse_kernel(&args.kernel.or(file.kernel).unwrap_or_else(|| "triangular".into()))?;
    let order = args.order.or(file.order).unwrap_or(1);
    let bandwidth = parse_bandwidth(&args.bandwidth.or(file.bandwidth).unwrap_or_else(|| "cv".into()))?;
    let covariates = args
        .covariates
        .or(file.covariates)
        .map(|s| parse_list(&s))
        .unwrap_or_default();
    let donut = args.donut.or(file.donut).unwrap_or(0.0);
    let placebos = match args.placebos.or(file.placebos) {
        Some(s) => parse_f64_list(&s)?,
        None => Vec::new(),
    };
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let out = args.out.or(file.out);
    let format = args.format.or(file.format).unwrap_or_else(|| "json".into());
    if format != "json" {
        return Err(config_error(
            "INVALID_CONFIG",
            format!("unsupported format {format:?}; only json is available"),
        ));
    }

    let treatment = args.treatment.or(file.treatment);
    let mapping = ColumnMapping {
        x: running,
        y: outcome,
        d: treatment,
        covariates: covariates.clone(),
    };
    let mut design = RdDesign::sharp(cutoff, treated_side)
        .with_kind(kind)
        .with_kernel(kernel)
        .with_order(order)
        .with_bandwidth(bandwidth)
        .with_donut(donut);
    design.covariate_adjust = false;
    design.covariates = covariates;

    let mut config = PipelineConfig::new(data, mapping, design);
    config.placebos = placebos;
    config.seed = seed;
    config.correction = Correction::BenjaminiHochberg;

    let report = run_pipeline(&config)?;
    write_output(&out, &to_json(&report)?)
}

fn resolve_spec(family: &str) -> Result<DgpSpec, Fatal> {
    DgpSpec::preset_alias(family).ok_or_else(|| {
        config_error("INVALID_SPEC", format!("unknown DGP family {family:?}"))
    })
}

fn dataset_to_csv(data: &RdDataset) -> String {
    let mut out = String::from("x");
    if data.has_treatment() {
        out.push_str(",d");
    }
    out.push_str(",y");
    for name in &data.covariate_names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for row in &data.rows {
        out.push_str(&format!("{:.17e}", row.x));
        if data.has_treatment() {
            out.push_str(&format!(",{}", row.d.unwrap_or(0)));
        }
        out.push_str(&format!(",{:.17e}", row.y));
        for v in &row.covariates {
            match v {
                Some(v) => out.push_str(&format!(",{v:.17e}")),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Fatal> {
    let mut spec = resolve_spec(&args.family)?;
    if let Some(n) = args.n {
        spec.n = n;
    }
    let data = generate(&spec, args.seed)?;
    write_output(&args.out, &dataset_to_csv(&data))
}

fn cmd_mc(args: McArgs) -> Result<(), Fatal> {
    let mut spec = resolve_spec(&args.family)?;
    let mut design = spec.default_design();
    let analysis = match args.analysis.as_str() {
        "sharp" => McAnalysis::Sharp,
        "fuzzy" => McAnalysis::Fuzzy,
        "kink" => McAnalysis::Kink,
        "density_test" => McAnalysis::DensityTest,
        "placebo" => McAnalysis::Placebo,
        "balance" => McAnalysis::Balance,
        other => {
            return Err(config_error(
                "INVALID_CONFIG",
                format!("unknown analysis {other:?}"),
            ))
        }
    };
    if let Some(s) = &args.design_args {
        for pair in parse_list(s) {
            let (key, value) = pair.split_once('=').ok_or_else(|| {
                config_error("INVALID_CONFIG", format!("expected key=value, got {pair:?}"))
            })?;
            let num = || {
                value.parse::<f64>().map_err(|_| {
                    config_error("INVALID_CONFIG", format!("expected a number for {key}, got {value:?}"))
                })
            };
            match key {
                "bandwidth" => design.bandwidth = parse_bandwidth(value)?,
                "order" => design.order = num()? as usize,
                "kernel" => design.kernel = parse_kernel(value)?,
                "donut" => design.donut_radius = num()?,
                "n" => spec.n = num()? as usize,
                "tau" => spec.true_tau = num()?,
                "noise_sd" => spec.noise_sd = num()?,
                other => {
                    spec.parameters.insert(other.to_string(), num()?);
                }
            }
        }
    }
    let summary = monte_carlo(&spec, &design, analysis, args.reps, args.seed)?;
    println!("{}", to_json(&summary)?);
    Ok(())
}

fn cmd_plot(args: PlotArgs) -> Result<(), Fatal> {
    let bins = if args.bins == "auto" {
        BinsSpec::DataDriven
    } else if let Some(k) = args.bins.strip_prefix("fixed:") {
        let k: usize = k.parse().map_err(|_| {
            config_error("INVALID_CONFIG", format!("invalid bin count in {:?}", args.bins))
        })?;
        BinsSpec::Fixed(k)
    } else {
        return Err(config_error(
            "INVALID_CONFIG",
            format!("bins must be \"auto\" or \"fixed:K\", got {:?}", args.bins),
        ));
    };
    let mapping = ColumnMapping {
        x: args.running.clone(),
        y: args.outcome.clone(),
        d: args.treatment.clone(),
        covariates: Vec::new(),
    };
    let bytes = std::fs::read(&args.data).map_err(|e| Fatal::from(Error::from(e)))?;
    let data = load_dataset(bytes.as_slice(), &mapping)?;
    let design = RdDesign::sharp(args.cutoff, parse_treated_side(&args.treated_side)?)
        .with_bandwidth(parse_bandwidth(&args.bandwidth)?);
    let plot = binned_scatter(&data, &design, FitTarget::Outcome, bins)?;
    write_output(&args.out, &to_json(&plot)?)
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(args) => cmd_analyze(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Mc(args) => cmd_mc(args),
        Command::Plot(args) => cmd_plot(args),
    };
    if let Err(fatal) = result {
        let doc = ErrorDoc {
            error: ErrorBody {
                code: fatal.code,
                message: fatal.message,
            },
        };
        let mut stderr = std::io::stderr();
        let _ = writeln!(
            stderr,
            "{}",
            serde_json::to_string(&doc).unwrap_or_else(|_| "{\"error\":{}}".into())
        );
        std::process::exit(fatal.exit_code);
    }
}
