//! Command-line surface over the feedback-recovery library: emits the
//! correlation-threshold and fidelity-versus-size grids as CSV or JSON
//! (optionally rendering a small standalone SVG), prints recovery
//! reports for single parameter points or custom noise tables, and
//! runs the randomized cross-check suite against the dense oracle.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 verification
//! failures, 3 resource cap exceeded.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qfeedback::{
    corrected_fidelity, optimize_mixture, optimize_recovery, region_rows, sweep_rows,
    verify_suite, DepolarizingParams, Error, FidelityReport, MeasurementPartition, NoiseModel,
    Oracle, Pauli, PauliString, RecoveryStrategy, RegionRow, SweepRow,
};

#[derive(Parser)]
#[command(
    name = "qfeedback",
    version,
    about = "Feedback-corrected Pauli channels: threshold grids, fidelity sweeps, verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Correlation thresholds mu_AB and mu_BC over a p grid.
    Regions(RegionsArgs),
    /// Optimal corrected fidelity versus qubit count.
    SweepN(SweepArgs),
    /// Recovery report for one parameter point or noise table (JSON).
    Fidelity(FidelityArgs),
    /// Randomized cross-checks against the dense oracle (JSON report).
    Verify(VerifyArgs),
}

#[derive(Args)]
struct RegionsArgs {
    /// Qubit counts, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 3, 4, 5])]
    n: Vec<usize>,
    /// Number of p grid points across [0, 1].
    #[arg(long, default_value_t = 401)]
    p_steps: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SweepArgs {
    /// Single-qubit error probability.
    #[arg(long, default_value_t = 0.4)]
    p: f64,
    /// Correlation weights, comma separated; one curve per value.
    #[arg(long, value_delimiter = ',', default_values_t = [0.9, 0.7, 0.5])]
    mu: Vec<f64>,
    /// Largest qubit count; rows run n = 2..=n-max.
    #[arg(long, default_value_t = 12)]
    n_max: usize,
    /// Dense-oracle cap; the F_oracle column is filled for n up to this.
    #[arg(long, default_value_t = 4)]
    oracle_cap: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct FidelityArgs {
    /// Single-qubit error probability (required without --noise-file).
    #[arg(long)]
    p: Option<f64>,
    /// Correlation weight (required without --noise-file).
    #[arg(long)]
    mu: Option<f64>,
    /// Qubit count (required without --noise-file).
    #[arg(long)]
    n: Option<usize>,
    /// Recovery to evaluate: optimal, A, B, C, or file:<path>.
    #[arg(long, default_value = "optimal", value_parser = parse_selector)]
    strategy: StrategySelector,
    /// Noise table JSON ({"n": .., "weights": {"II": .., ..}}) used
    /// instead of the depolarizing mixture.
    #[arg(long)]
    noise_file: Option<PathBuf>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// RNG seed for the model and strategy draws.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Number of random models per suite.
    #[arg(long, default_value_t = 25)]
    trials: usize,
    /// Qubit count under test (must stay within the oracle cap).
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Dense-oracle cap.
    #[arg(long, default_value_t = 4)]
    oracle_cap: usize,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OutputArgs {
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Data format.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Also render the grid as a standalone SVG at this path.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone)]
enum StrategySelector {
    Optimal,
    Named(NamedStrategy),
    File(PathBuf),
}

#[derive(Clone, Copy)]
enum NamedStrategy {
    A,
    B,
    C,
}

fn parse_selector(text: &str) -> Result<StrategySelector, String> {
    match text {
        "optimal" => Ok(StrategySelector::Optimal),
        "A" => Ok(StrategySelector::Named(NamedStrategy::A)),
        "B" => Ok(StrategySelector::Named(NamedStrategy::B)),
        "C" => Ok(StrategySelector::Named(NamedStrategy::C)),
        _ => match text.strip_prefix("file:") {
            Some(path) if !path.is_empty() => Ok(StrategySelector::File(PathBuf::from(path))),
            _ => Err(format!(
                "expected one of optimal, A, B, C, file:<path>; got {text:?}"
            )),
        },
    }
}

/// Terminal error carrying the process exit code.
struct Failure {
    message: String,
    code: u8,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Failure {
        Failure {
            message: message.into(),
            code: 1,
        }
    }

    fn io(path: &Path, err: std::io::Error) -> Failure {
        Failure::usage(format!("{}: {err}", path.display()))
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Failure {
        let code = if matches!(err, Error::ResourceCap { .. }) {
            3
        } else {
            1
        };
        Failure {
            message: err.to_string(),
            code,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if matches!(
                err.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) {
                0
            } else {
                1
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Regions(args) => run_regions(args),
        Command::SweepN(args) => run_sweep(args),
        Command::Fidelity(args) => run_fidelity(args),
        Command::Verify(args) => run_verify(args),
    }
}

fn run_regions(args: RegionsArgs) -> Result<u8, Failure> {
    let rows = region_rows(&args.n, args.p_steps)?;
    let text = match args.output.format {
        Format::Csv => regions_csv(&rows),
        Format::Json => to_json(&rows)?,
    };
    emit(&args.output.out, &text)?;
    if let Some(path) = &args.output.svg {
        fs::write(path, regions_svg(&rows)).map_err(|err| Failure::io(path, err))?;
    }
    Ok(0)
}

fn run_sweep(args: SweepArgs) -> Result<u8, Failure> {
    let oracle = Oracle::new(args.oracle_cap)?;
    let rows = sweep_rows(args.p, &args.mu, args.n_max, &oracle)?;
    let text = match args.output.format {
        Format::Csv => sweep_csv(&rows),
        Format::Json => to_json(&rows)?,
    };
    emit(&args.output.out, &text)?;
    if let Some(path) = &args.output.svg {
        fs::write(path, sweep_svg(&rows)).map_err(|err| Failure::io(path, err))?;
    }
    Ok(0)
}

fn run_fidelity(args: FidelityArgs) -> Result<u8, Failure> {
    let report: FidelityReport = if let Some(path) = &args.noise_file {
        let text = fs::read_to_string(path).map_err(|err| Failure::io(path, err))?;
        let model: NoiseModel = serde_json::from_str(&text)
            .map_err(|err| Failure::usage(format!("{}: {err}", path.display())))?;
        let partition = first_qubit_partition(model.n())?;
        match &args.strategy {
            StrategySelector::Optimal => optimize_recovery(&model, &partition)?,
            other => {
                let strategy = resolve_strategy(other, model.n())?;
                corrected_fidelity(&model, &partition, &strategy)?
            }
        }
    } else {
        let p = require(args.p, "--p")?;
        let mu = require(args.mu, "--mu")?;
        let n = require(args.n, "--n")?;
        let params = DepolarizingParams::new(p, mu, n)?;
        match &args.strategy {
            StrategySelector::Optimal => optimize_mixture(&params)?,
            other => {
                let model = NoiseModel::convex_mixture(&params)?;
                let partition = first_qubit_partition(n)?;
                let strategy = resolve_strategy(other, n)?;
                corrected_fidelity(&model, &partition, &strategy)?
            }
        }
    };
    emit(&args.out, &to_json(&report)?)?;
    Ok(0)
}

fn run_verify(args: VerifyArgs) -> Result<u8, Failure> {
    let oracle = Oracle::new(args.oracle_cap)?;
    let report = verify_suite(args.seed, args.trials, args.n, &oracle)?;
    emit(&args.out, &to_json(&report)?)?;
    Ok(if report.passed() { 0 } else { 2 })
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T, Failure> {
    value.ok_or_else(|| Failure::usage(format!("{flag} is required without --noise-file")))
}

/// The feedback scheme measures the environment of the first qubit and
/// leaves the rest hidden; records are the length-1 restrictions.
fn first_qubit_partition(n: usize) -> Result<MeasurementPartition, Failure> {
    Ok(MeasurementPartition::new(n, vec![0])?)
}

fn resolve_strategy(selector: &StrategySelector, n: usize) -> Result<RecoveryStrategy, Failure> {
    match selector {
        StrategySelector::Optimal => Err(Failure::usage(
            "optimal strategy is computed, not resolved from a rule",
        )),
        StrategySelector::Named(kind) => Ok(named_strategy(*kind, n)?),
        StrategySelector::File(path) => {
            let text = fs::read_to_string(path).map_err(|err| Failure::io(path, err))?;
            serde_json::from_str(&text)
                .map_err(|err| Failure::usage(format!("{}: {err}", path.display())))
        }
    }
}

/// The three closed-form rules: complete the record with identities
/// (A), repeat the observed letter on every qubit (B), or repeat
/// letters while pairing the identity record with a non-identity
/// completion (C).
fn named_strategy(kind: NamedStrategy, n: usize) -> qfeedback::Result<RecoveryStrategy> {
    let mut assignments = Vec::new();
    for letter in Pauli::ALL {
        let record = PauliString::new(vec![letter])?;
        let correction = match kind {
            NamedStrategy::A => {
                let mut factors = vec![Pauli::I; n];
                factors[0] = letter;
                PauliString::new(factors)?
            }
            NamedStrategy::B => PauliString::repeat(letter, n)?,
            NamedStrategy::C => {
                if letter == Pauli::I {
                    let mut factors = vec![Pauli::X; n];
                    factors[0] = Pauli::I;
                    PauliString::new(factors)?
                } else {
                    PauliString::repeat(letter, n)?
                }
            }
        };
        assignments.push((record, correction));
    }
    RecoveryStrategy::deterministic(n, assignments)
}

// ===================================================================
// Output formatting
// ===================================================================

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|err| Failure::io(path, err)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|err| Failure::usage(err.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// Shortest decimal that round-trips, capped at 12 significant digits
/// so golden files stay stable.
fn fmt_sig12(value: f64) -> String {
    let shortest = format!("{value}");
    if significant_digits(&shortest) <= 12 {
        return shortest;
    }
    let rounded: f64 = format!("{value:.11e}")
        .parse()
        .expect("formatted float reparses");
    format!("{rounded}")
}

fn significant_digits(text: &str) -> usize {
    text.chars()
        .take_while(|&c| c != 'e' && c != 'E')
        .filter(char::is_ascii_digit)
        .skip_while(|&c| c == '0')
        .count()
}

fn fmt_opt(value: Option<f64>) -> String {
    value.map(fmt_sig12).unwrap_or_default()
}

fn regions_csv(rows: &[RegionRow]) -> String {
    let mut text = String::from("n,p,mu_AB,mu_BC\n");
    for row in rows {
        let _ = writeln!(
            text,
            "{},{},{},{}",
            row.n,
            fmt_sig12(row.p),
            fmt_opt(row.mu_ab),
            fmt_opt(row.mu_bc)
        );
    }
    text
}

fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut text = String::from("n,mu,F_theoretical,F_optimized,F_oracle,region\n");
    for row in rows {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{}",
            row.n,
            fmt_sig12(row.mu),
            fmt_sig12(row.f_theoretical),
            fmt_sig12(row.f_optimized),
            fmt_opt(row.f_oracle),
            row.region
        );
    }
    text
}

// ===================================================================
// Minimal SVG rendering
// ===================================================================

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#7f7f7f",
];

fn regions_svg(rows: &[RegionRow]) -> String {
    let mut counts: Vec<usize> = rows.iter().map(|row| row.n).collect();
    counts.dedup();
    let mut series = Vec::new();
    for &n in &counts {
        let ab: Vec<(f64, f64)> = rows
            .iter()
            .filter(|row| row.n == n)
            .filter_map(|row| row.mu_ab.map(|mu| (row.p, mu)))
            .collect();
        if !ab.is_empty() {
            series.push(Series {
                label: format!("mu_AB n={n}"),
                points: ab,
            });
        }
        let bc: Vec<(f64, f64)> = rows
            .iter()
            .filter(|row| row.n == n)
            .filter_map(|row| row.mu_bc.map(|mu| (row.p, mu)))
            .collect();
        if !bc.is_empty() {
            series.push(Series {
                label: format!("mu_BC n={n}"),
                points: bc,
            });
        }
    }
    svg_plot("correlation thresholds", "p", "mu", &series)
}

fn sweep_svg(rows: &[SweepRow]) -> String {
    let mut curves: Vec<u64> = rows.iter().map(|row| row.mu.to_bits()).collect();
    curves.dedup();
    let series: Vec<Series> = curves
        .iter()
        .map(|&bits| {
            let mu = f64::from_bits(bits);
            Series {
                label: format!("mu={}", fmt_sig12(mu)),
                points: rows
                    .iter()
                    .filter(|row| row.mu.to_bits() == bits)
                    .map(|row| (row.n as f64, row.f_optimized))
                    .collect(),
            }
        })
        .collect();
    svg_plot("corrected fidelity versus size", "n", "F", &series)
}

fn svg_plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (width, height) = (640.0, 440.0);
    let (left, right, top, bottom) = (64.0, 20.0, 34.0, 46.0);
    let points = series.iter().flat_map(|s| s.points.iter().copied());
    let (x_min, x_max) = padded_range(points.clone().map(|(x, _)| x));
    let (y_min, y_max) = padded_range(points.map(|(_, y)| y));
    let to_x = |x: f64| left + (x - x_min) / (x_max - x_min) * (width - left - right);
    let to_y = |y: f64| (height - bottom) - (y - y_min) / (y_max - y_min) * (height - top - bottom);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {width} {height}\" \
         font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(svg, "  <rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "  <rect x=\"{left}\" y=\"{top}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>",
        width - left - right,
        height - top - bottom
    );
    let _ = writeln!(
        svg,
        "  <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{title}</text>",
        width / 2.0
    );
    // Axis end labels: enough to read values off a small diagnostic plot.
    let _ = writeln!(
        svg,
        "  <text x=\"{left}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
        height - bottom + 16.0,
        fmt_axis(x_min)
    );
    let _ = writeln!(
        svg,
        "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
        width - right,
        height - bottom + 16.0,
        fmt_axis(x_max)
    );
    let _ = writeln!(
        svg,
        "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{x_label}</text>",
        (left + width - right) / 2.0,
        height - bottom + 32.0
    );
    let _ = writeln!(
        svg,
        "  <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>",
        left - 6.0,
        height - bottom + 4.0,
        fmt_axis(y_min)
    );
    let _ = writeln!(
        svg,
        "  <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>",
        left - 6.0,
        top + 10.0,
        fmt_axis(y_max)
    );
    let _ = writeln!(
        svg,
        "  <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{y_label}</text>",
        left - 6.0,
        (top + height - bottom) / 2.0
    );
    for (index, entry) in series.iter().enumerate() {
        let color = PALETTE[index % PALETTE.len()];
        if entry.points.len() > 1 {
            let mut coords = String::new();
            for &(x, y) in &entry.points {
                let _ = write!(coords, "{:.2},{:.2} ", to_x(x), to_y(y));
            }
            let _ = writeln!(
                svg,
                "  <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
                coords.trim_end()
            );
        } else if let Some(&(x, y)) = entry.points.first() {
            let _ = writeln!(
                svg,
                "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{color}\"/>",
                to_x(x),
                to_y(y)
            );
        }
        // Legend swatch and label, stacked inside the top-right corner.
        let legend_y = top + 14.0 + 16.0 * index as f64;
        let _ = writeln!(
            svg,
            "  <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\" stroke-width=\"2\"/>",
            width - right - 150.0,
            legend_y - 4.0,
            width - right - 130.0,
            legend_y - 4.0
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{}\" y=\"{}\">{}</text>",
            width - right - 124.0,
            legend_y,
            entry.label
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for value in values {
        min = min.min(value);
        max = max.max(value);
    }
    if !min.is_finite() || !max.is_finite() {
        return (0.0, 1.0);
    }
    if min == max {
        return (min - 0.5, max + 0.5);
    }
    let pad = (max - min) * 0.04;
    (min - pad, max + pad)
}

fn fmt_axis(value: f64) -> String {
    let text = format!("{value:.2}");
    let trimmed = text.trim_end_matches('0').trim_end_matches('.');
    if trimmed.is_empty() || trimmed == "-" {
        "0".to_string()
    } else {
        trimmed.to_string()
    }
}
