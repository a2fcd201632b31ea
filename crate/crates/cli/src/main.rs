use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use compound_sums::closed::ClosedModel;
use compound_sums::closed_mn::{cmn_correlation, cmn_correlation_fi_form};
use compound_sums::closed_nmn::cnmn_correlation_fi_form;
use compound_sums::compound::{compound_pmf_table, conditional_pmf, correlation, format_prob};
use compound_sums::montecarlo::sample_compound;
use compound_sums::plot::model_scatter_svg;
use compound_sums::verify::{self, Level};
use compound_sums::{CompoundModel, CountLaw, Error, SummandLaw};

const THREADS_VAR: &str = "COMPOUND_SUMS_THREADS";

#[derive(Parser)]
#[command(name = "compound-sums", version, about = "Compound multinomial and negative multinomial distributions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ModelArgs {
    /// Count law, e.g. `poisson:2`, `ls:0.9`, `geometric:0.4`, `negbin:3,0.5`,
    /// `table:0=0.5,3=0.5`, `degenerate:4`.
    #[arg(long)]
    count: String,
    /// Summand law, e.g. `mn:s=5,p=0.3,0.7` or `nmn:s=5,p=0.2,0.3`.
    #[arg(long)]
    summand: String,
}

#[derive(Args)]
struct OutArgs {
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Engine {
    /// Closed-form expressions for the summand family.
    Closed,
    /// Iterated convolution, valid for any summand law.
    Generic,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Text,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScatterFormat {
    Csv,
    Svg,
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyLevel {
    Quick,
    Full,
}

#[derive(Subcommand)]
enum Command {
    /// Joint p.m.f. on a box as CSV.
    Pmf {
        #[command(flatten)]
        model: ModelArgs,
        /// Upper bounds of the box, one per coordinate: `a,b,...`.
        #[arg(long = "box")]
        bounds: String,
        #[arg(long, default_value_t = 1e-12)]
        eps: f64,
        #[arg(long, value_enum, default_value = "closed")]
        engine: Engine,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Means, covariances, Fisher indices and correlations.
    Moments {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value = "text")]
        format: ReportFormat,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Conditional law of X_i given X_j = x_j as CSV (coordinates are 1-based).
    Conditional {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        i: usize,
        #[arg(long)]
        j: usize,
        #[arg(long)]
        xj: u64,
        #[arg(long, default_value_t = 1e-12)]
        eps: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Regression E(X_i | X_j = x_j) over a range of x_j as CSV (1-based coordinates).
    Regress {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        i: usize,
        #[arg(long)]
        j: usize,
        /// Range of x_j as `from..to` (inclusive).
        #[arg(long, default_value = "0..20")]
        range: String,
        #[arg(long, default_value_t = 1e-12)]
        eps: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Simulated batch as CSV `x1,...,xk,n`.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Simulated scatter as CSV or SVG (SVG needs two coordinates).
    Scatter {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "svg")]
        format: ScatterFormat,
        #[arg(long, default_value_t = 1e-12)]
        eps: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run the self-checks.
    Verify {
        #[arg(long, value_enum, default_value = "quick")]
        level: VerifyLevel,
    },
}

enum Failure {
    Usage(String),
    Domain(String),
    Verification(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_usage() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Domain(e.to_string())
        }
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Domain(_) => 3,
            Failure::Verification(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Domain(m) | Failure::Verification(m) | Failure::Io(m) => m,
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn parse_model(args: &ModelArgs) -> CliResult<CompoundModel> {
    let count: CountLaw = args.count.parse()?;
    let summand: SummandLaw = args.summand.parse()?;
    Ok(CompoundModel::new(count, summand))
}

fn parse_bounds(text: &str, dim: usize) -> CliResult<Vec<u64>> {
    let bounds = text
        .split(',')
        .map(|v| v.trim().parse::<u64>().map_err(|_| Failure::Usage(format!("box bound `{v}` is not a non-negative integer"))))
        .collect::<CliResult<Vec<_>>>()?;
    if bounds.len() != dim {
        return Err(Failure::Usage(format!("--box has {} bounds but the model has {dim} coordinates", bounds.len())));
    }
    Ok(bounds)
}

fn parse_range(text: &str) -> CliResult<(u64, u64)> {
    let bad = || Failure::Usage(format!("range `{text}` is not `from..to` with from <= to"));
    let (a, b) = text.split_once("..").ok_or_else(bad)?;
    let (a, b) = (a.trim().parse::<u64>().map_err(|_| bad())?, b.trim().parse::<u64>().map_err(|_| bad())?);
    if a > b {
        return Err(bad());
    }
    Ok((a, b))
}

/// 1-based coordinate from the command line to a 0-based index.
fn coordinate(name: &str, value: usize, dim: usize) -> CliResult<usize> {
    if value == 0 || value > dim {
        return Err(Failure::Usage(format!("--{name} must lie in 1..={dim}, got {value}")));
    }
    Ok(value - 1)
}

fn emit(out: &OutArgs, text: &str) -> CliResult<()> {
    match &out.out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), format_prob)
}

fn moments_report(model: &CompoundModel, format: ReportFormat) -> String {
    let closed = ClosedModel::from(model);
    let report = closed.moments();
    let k = model.dim();
    let fi_form = |i: usize, j: usize| match &closed {
        ClosedModel::Mn(m) => cmn_correlation_fi_form(m, i, j),
        ClosedModel::NMn(m) => cnmn_correlation_fi_form(m, i, j),
    };
    let direct = |i: usize, j: usize| match &closed {
        ClosedModel::Mn(m) => cmn_correlation(m, i, j),
        ClosedModel::NMn(_) => correlation(model, i, j),
    };
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            out.push_str("quantity,i,j,value\n");
            for i in 0..k {
                let _ = writeln!(out, "mean,{},,{}", i + 1, format_prob(report.mean[i]));
                let _ = writeln!(out, "fisher_index,{},,{}", i + 1, fmt_opt(report.fisher_index[i]));
                let _ = writeln!(out, "cv,{},,{}", i + 1, fmt_opt(report.cv[i]));
                let _ = writeln!(out, "cov_with_n,{},,{}", i + 1, format_prob(report.cov_with_n[i]));
                let _ = writeln!(out, "cor_with_n,{},,{}", i + 1, fmt_opt(report.cor_with_n[i]));
            }
            for i in 0..k {
                for j in 0..k {
                    let _ = writeln!(out, "cov,{},{},{}", i + 1, j + 1, format_prob(report.cov[i][j]));
                }
            }
            for i in 0..k {
                for j in (0..k).filter(|&j| j != i) {
                    let _ = writeln!(out, "cor,{},{},{}", i + 1, j + 1, fmt_opt(direct(i, j)));
                    let _ = writeln!(out, "cor_fi_form,{},{},{}", i + 1, j + 1, fmt_opt(fi_form(i, j)));
                }
            }
        }
        ReportFormat::Text => {
            let _ = writeln!(out, "model: {model}");
            let _ = writeln!(out, "{:>5} {:>24} {:>24} {:>24} {:>24}", "coord", "mean", "variance", "fisher index", "cor with N");
            for i in 0..k {
                let _ = writeln!(
                    out,
                    "{:>5} {:>24} {:>24} {:>24} {:>24}",
                    format!("x{}", i + 1),
                    format_prob(report.mean[i]),
                    format_prob(report.cov[i][i]),
                    fmt_opt(report.fisher_index[i]),
                    fmt_opt(report.cor_with_n[i])
                );
            }
            if k > 1 {
                let _ = writeln!(out, "{:>5} {:>24} {:>24} {:>24}", "pair", "covariance", "correlation", "correlation (FI form)");
                for i in 0..k {
                    for j in (i + 1)..k {
                        let _ = writeln!(
                            out,
                            "{:>5} {:>24} {:>24} {:>24}",
                            format!("{},{}", i + 1, j + 1),
                            format_prob(report.cov[i][j]),
                            fmt_opt(direct(i, j)),
                            fmt_opt(fi_form(i, j))
                        );
                    }
                }
            }
        }
    }
    out
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Pmf { model, bounds, eps, engine, out } => {
            let model = parse_model(&model)?;
            let bounds = parse_bounds(&bounds, model.dim())?;
            let table = match engine {
                Engine::Closed => ClosedModel::from(&model).pmf_table(&bounds, eps)?,
                Engine::Generic => compound_pmf_table(&model, &bounds, eps)?,
            };
            emit(&out, &table.to_csv())
        }
        Command::Moments { model, format, out } => {
            let model = parse_model(&model)?;
            emit(&out, &moments_report(&model, format))
        }
        Command::Conditional { model, i, j, xj, eps, out } => {
            let model = parse_model(&model)?;
            let (i, j) = (coordinate("i", i, model.dim())?, coordinate("j", j, model.dim())?);
            let law = conditional_pmf(&model, i, j, xj, eps)?;
            let mut text = format!("x{},prob\n", i + 1);
            for (x, p) in law {
                let _ = writeln!(text, "{x},{}", format_prob(p));
            }
            emit(&out, &text)
        }
        Command::Regress { model, i, j, range, eps, out } => {
            let model = parse_model(&model)?;
            let (i, j) = (coordinate("i", i, model.dim())?, coordinate("j", j, model.dim())?);
            let (from, to) = parse_range(&range)?;
            let curve = ClosedModel::from(&model).regression_curve(i, j, from..=to, 0.0, eps)?;
            let mut text = format!("x{},regression\n", j + 1);
            for (x, r) in curve {
                let _ = writeln!(text, "{x},{}", format_prob(r));
            }
            emit(&out, &text)
        }
        Command::Simulate { model, samples, seed, out } => {
            let model = parse_model(&model)?;
            emit(&out, &sample_compound(&model, samples, seed)?.to_csv())
        }
        Command::Scatter { model, samples, seed, format, eps, out } => {
            let model = parse_model(&model)?;
            if matches!(format, ScatterFormat::Svg) && model.dim() != 2 {
                return Err(Failure::Domain(format!(
                    "SVG scatter needs exactly two coordinates, the model has {}",
                    model.dim()
                )));
            }
            let batch = sample_compound(&model, samples, seed)?;
            let text = match format {
                ScatterFormat::Csv => batch.to_csv(),
                ScatterFormat::Svg => model_scatter_svg(&model, &batch, eps)?,
            };
            emit(&out, &text)
        }
        Command::Verify { level } => {
            let level = match level {
                VerifyLevel::Quick => Level::Quick,
                VerifyLevel::Full => Level::Full,
            };
            let outcomes = verify::run(level);
            for o in &outcomes {
                println!("{o}");
            }
            match outcomes.iter().find(|o| !o.passed) {
                Some(first) => Err(Failure::Verification(format!("verification failed: {}", first.name))),
                None => Ok(()),
            }
        }
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else { return Ok(()) };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Failure::Usage(format!("{THREADS_VAR} must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Domain(format!("cannot configure thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|()| run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.exit_code())
        }
    }
}
