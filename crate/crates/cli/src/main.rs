//! Command-line front end: aggregation on dictionary CSVs, the adversarial
//! ERM demonstration, the lasso simulation study, and raw LARS paths.
//!
//! All randomness flows from --seed, and outputs are byte-identical across
//! runs and thread counts. Files are written atomically (temp file +
//! rename).

use std::fmt::Write as _;
use std::fs::File;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use staragg::adversarial::{
    erm_excess_risk_mc, star_excess_risk_mc, AdversarialModel, ErmMcReport, StarMcReport,
};
use staragg::aggregate::{
    acew_weights, aew_weights, convex_aggregate, segment_aggregate, star_aggregate,
    AggregateResult, Variant,
};
use staragg::experiments::{run_section4, Section4Config};
use staragg::lars::{lars_path, LassoPath};
use staragg::preselect::{preselect, PreselectConfig};
use staragg::{
    read_dictionary_csv, split_sample, Matrix, Regime, Sample, SplitMode, SplitSample,
};

#[derive(Parser)]
#[command(
    name = "staragg",
    version,
    about = "Hyper-sparse aggregation over dictionaries of predictors",
    propagate_version = true
)]
struct Cli {
    /// Master seed; fully determines all randomness.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Output path (stdout when omitted). Files are written atomically.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Output format; each subcommand documents its default and schema.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Worker threads (0 = auto). Never affects output bytes.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Star,
    Segment,
    Convex,
    Aew,
    Acew,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RegimeArg {
    Bounded,
    Subgaussian,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SplitArg {
    Sequential,
    Random,
}

#[derive(Args)]
struct SplitFlags {
    /// How to split when the input CSV does not pin one.
    #[arg(long, value_enum, default_value = "sequential")]
    split: SplitArg,

    /// Fraction of observations in the training half.
    #[arg(long, default_value_t = 0.5)]
    ratio: f64,
}

#[derive(Args)]
struct RegimeFlags {
    /// Noise regime for the preselection threshold φ.
    #[arg(long, value_enum, default_value = "bounded")]
    regime: RegimeArg,

    /// Envelope constant b (default: max |y| of the input sample).
    #[arg(long)]
    b: Option<f64>,

    /// Noise scale σ_ε; required for --regime subgaussian.
    #[arg(long)]
    sigma_eps: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one aggregation procedure on a dictionary CSV.
    ///
    /// Input: header `y,f_1,...,f_M[,split]`, one row per observation
    /// (split values 1/2 pin the partition). Output (JSON): {variant,
    /// weights: [[index, value]...], lambda, pair, kept, validation_risk,
    /// converged}. star/segment/convex use the training/validation split;
    /// aew/acew compute weights on the full sample.
    Aggregate {
        /// Dictionary CSV path.
        #[arg(long)]
        input: PathBuf,

        #[arg(long, value_enum)]
        variant: VariantArg,

        /// Preselection confidence level x.
        #[arg(long, default_value_t = 1.0)]
        x: f64,

        /// Preselection threshold constant c.
        #[arg(long, default_value_t = 2.0)]
        c: f64,

        #[command(flatten)]
        regime: RegimeFlags,

        #[command(flatten)]
        split: SplitFlags,

        /// Exponential-weights temperature; required for aew/acew.
        #[arg(long)]
        temperature: Option<f64>,

        /// Duality-gap tolerance for the convex variant.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,

        /// Iteration cap for the convex variant (0 = auto).
        #[arg(long, default_value_t = 0)]
        max_iters: usize,
    },

    /// Run the preselection step on a dictionary CSV.
    ///
    /// Output (JSON): {kept, erm_index, phi, per_predictor: [{risk,
    /// threshold}...]} — the per-predictor risks and threshold values.
    Preselect {
        /// Dictionary CSV path.
        #[arg(long)]
        input: PathBuf,

        #[arg(long, default_value_t = 1.0)]
        x: f64,

        #[arg(long, default_value_t = 2.0)]
        c: f64,

        #[command(flatten)]
        regime: RegimeFlags,

        #[command(flatten)]
        split: SplitFlags,
    },

    /// Monte Carlo excess risk of ERM selection on the dyadic dictionary.
    ///
    /// Output (CSV): `M,n,reps,p_misselect,excess_risk,stderr,
    /// sqrt_logM_over_n[,star_excess_risk]` with one row per (M, n); the
    /// star column appears with --with-star (the star aggregate runs on 2n
    /// observations split in half, under a subgaussian φ with σ_ε = sigma,
    /// b = 1).
    AdversarialDemo {
        /// Dictionary size; repeatable.
        #[arg(long = "M", default_values_t = vec![16usize, 64, 256])]
        m: Vec<usize>,

        /// Sample size; repeatable.
        #[arg(long, default_values_t = vec![50usize, 100, 200, 400, 800])]
        n: Vec<usize>,

        /// Separation constant in h = (C/4)√(log M / n).
        #[arg(long = "C", default_value_t = 1.0)]
        c_const: f64,

        /// Gaussian noise level.
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,

        /// Monte Carlo replications per (M, n).
        #[arg(long, default_value_t = 5000)]
        reps: usize,

        /// Also measure the star aggregate's population excess risk.
        #[arg(long)]
        with_star: bool,

        /// Replications for the star head-to-head (0 = same as --reps).
        #[arg(long, default_value_t = 0)]
        star_reps: usize,

        /// Preselection confidence level for the star aggregate.
        #[arg(long, default_value_t = 1.0)]
        x: f64,

        /// Preselection constant for the star aggregate.
        #[arg(long, default_value_t = 2.0)]
        c: f64,
    },

    /// The lasso simulation study: Cp selection vs AEW vs star.
    ///
    /// Output: CSV `rep,method,beta_err,pred_err` (one row per replication
    /// and method) or JSON {failed_reps, summary: {method: {beta_err,
    /// pred_err: {mean, median, q1, q3}}}}.
    LassoExperiment {
        /// Per-replication sample size.
        #[arg(long, default_value_t = 150)]
        n: usize,

        /// Noise level σ.
        #[arg(long, default_value_t = 2.0)]
        sigma: f64,

        #[arg(long, default_value_t = 100)]
        reps: usize,

        /// Random half/half splits averaged per aggregate.
        #[arg(long, default_value_t = 10)]
        jackknife_splits: usize,

        /// Exponential-weights temperature (default 4σ²).
        #[arg(long)]
        temperature: Option<f64>,

        /// Preselection constant for the star aggregate.
        #[arg(long, default_value_t = 2.0)]
        star_c: f64,

        /// Preselection confidence level.
        #[arg(long, default_value_t = 1.0)]
        x: f64,

        /// Override the bounded-regime envelope b (default: max |y| per
        /// replication).
        #[arg(long)]
        b: Option<f64>,

        /// LARS step cap (0 = unlimited).
        #[arg(long, default_value_t = 0)]
        max_steps: usize,
    },

    /// Compute a lasso path with LARS on a regression CSV.
    ///
    /// Input: header row, first column y, remaining columns features.
    /// Output (CSV): step,penalty_level,df,rss followed by one coefficient
    /// column per feature.
    LarsPath {
        /// Regression CSV path.
        #[arg(long)]
        input: PathBuf,

        /// Step cap (0 = unlimited).
        #[arg(long, default_value_t = 0)]
        max_steps: usize,

        /// Skip internal centering/scaling of the design columns.
        #[arg(long)]
        no_standardize: bool,
    },
}

enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse(); // clap exits with code 2 on argument errors
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("Run with --help for usage.");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| anyhow!(e).context("thread pool setup"))?;
    }
    let format = cli.format;
    let out = cli.out.as_deref();
    let seed = cli.seed;
    match cli.command {
        Command::Aggregate {
            input,
            variant,
            x,
            c,
            regime,
            split,
            temperature,
            tol,
            max_iters,
        } => cmd_aggregate(
            &input, variant, x, c, &regime, &split, temperature, tol, max_iters, seed, out, format,
        ),
        Command::Preselect {
            input,
            x,
            c,
            regime,
            split,
        } => cmd_preselect(&input, x, c, &regime, &split, seed, out, format),
        Command::AdversarialDemo {
            m,
            n,
            c_const,
            sigma,
            reps,
            with_star,
            star_reps,
            x,
            c,
        } => cmd_adversarial(
            &m, &n, c_const, sigma, reps, with_star, star_reps, x, c, seed, out, format,
        ),
        Command::LassoExperiment {
            n,
            sigma,
            reps,
            jackknife_splits,
            temperature,
            star_c,
            x,
            b,
            max_steps,
        } => {
            let cfg = Section4Config {
                n,
                sigma,
                reps,
                jackknife_splits,
                temperature,
                star_c,
                confidence_x: x,
                seed,
                regime: b.map(|b| Regime::Bounded { b }),
                max_steps,
                ..Default::default()
            };
            cmd_lasso_experiment(&cfg, out, format)
        }
        Command::LarsPath {
            input,
            max_steps,
            no_standardize,
        } => cmd_lars_path(&input, max_steps, !no_standardize, out, format),
    }
}

/// Writes atomically when a path is given, to stdout otherwise.
fn write_output(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        None => {
            print!("{content}");
            Ok(())
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir)
                .with_context(|| format!("writing output: creating temp file in {dir:?}"))?;
            tmp.write_all(content.as_bytes())
                .context("writing output: temp file write")?;
            tmp.persist(path)
                .map_err(|e| anyhow!(e).context("writing output: rename into place"))?;
            Ok(())
        }
    }
}

struct LoadedDictionary {
    sample: Sample,
    dictionary: staragg::Dictionary,
    split: SplitSample,
}

fn load_dictionary(
    input: &Path,
    split_flags: &SplitFlags,
    seed: u64,
) -> Result<LoadedDictionary, CliError> {
    let file =
        File::open(input).with_context(|| format!("reading input: opening {input:?}"))?;
    let parsed = read_dictionary_csv(file)
        .map_err(|e| anyhow!(e).context("reading input: parsing dictionary csv"))?;
    let split = match parsed.split {
        Some(s) => s,
        None => {
            let mode = match split_flags.split {
                SplitArg::Sequential => SplitMode::Sequential,
                SplitArg::Random => SplitMode::Random,
            };
            split_sample(parsed.sample.clone(), seed, split_flags.ratio, mode)
                .map_err(|e| anyhow!(e).context("splitting sample"))?
        }
    };
    Ok(LoadedDictionary {
        sample: parsed.sample,
        dictionary: parsed.dictionary,
        split,
    })
}

fn build_regime(flags: &RegimeFlags, y: &[f64]) -> Result<Regime, CliError> {
    let b = flags
        .b
        .unwrap_or_else(|| y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12));
    match flags.regime {
        RegimeArg::Bounded => Ok(Regime::Bounded { b }),
        RegimeArg::Subgaussian => {
            let sigma_eps = flags
                .sigma_eps
                .ok_or_else(|| usage("--regime subgaussian requires --sigma-eps"))?;
            Ok(Regime::Subgaussian { sigma_eps, b })
        }
    }
}

fn require_json(format: Option<Format>, what: &str) -> Result<(), CliError> {
    if format == Some(Format::Csv) {
        return Err(usage(format!("{what} only supports --format json")));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_aggregate(
    input: &Path,
    variant: VariantArg,
    x: f64,
    c: f64,
    regime: &RegimeFlags,
    split_flags: &SplitFlags,
    temperature: Option<f64>,
    tol: f64,
    max_iters: usize,
    seed: u64,
    out: Option<&Path>,
    format: Option<Format>,
) -> Result<(), CliError> {
    require_json(format, "aggregate")?;
    let loaded = load_dictionary(input, split_flags, seed)?;
    let cfg = PreselectConfig::new(x, c, build_regime(regime, loaded.sample.y())?)
        .map_err(|e| usage(e.to_string()))?;

    let result: AggregateResult = match variant {
        VariantArg::Star => star_aggregate(&loaded.dictionary, &loaded.split, &cfg)
            .map_err(|e| anyhow!(e).context("star aggregation"))?,
        VariantArg::Segment => segment_aggregate(&loaded.dictionary, &loaded.split, &cfg)
            .map_err(|e| anyhow!(e).context("segment aggregation"))?,
        VariantArg::Convex => {
            convex_aggregate(&loaded.dictionary, &loaded.split, &cfg, tol, max_iters)
                .map_err(|e| anyhow!(e).context("convex-hull aggregation"))?
        }
        VariantArg::Aew | VariantArg::Acew => {
            let t = temperature
                .ok_or_else(|| usage("--temperature is required for aew/acew"))?;
            let idx: Vec<usize> = (0..loaded.sample.n_total()).collect();
            let weights = if variant == VariantArg::Aew {
                aew_weights(&loaded.dictionary, &loaded.sample, &idx, t)
            } else {
                acew_weights(&loaded.dictionary, &loaded.sample, &idx, t)
            }
            .map_err(|e| anyhow!(e).context("exponential-weights aggregation"))?;
            AggregateResult {
                variant: if variant == VariantArg::Aew {
                    Variant::Aew
                } else {
                    Variant::Acew
                },
                weights,
                validation_risk: None,
                kept: (0..loaded.dictionary.m()).collect(),
                lambda: None,
                pair: None,
                converged: true,
            }
        }
    };
    let json =
        serde_json::to_string_pretty(&result).map_err(|e| anyhow!(e).context("serializing"))?;
    write_output(out, &format!("{json}\n"))
}

#[allow(clippy::too_many_arguments)]
fn cmd_preselect(
    input: &Path,
    x: f64,
    c: f64,
    regime: &RegimeFlags,
    split_flags: &SplitFlags,
    seed: u64,
    out: Option<&Path>,
    format: Option<Format>,
) -> Result<(), CliError> {
    require_json(format, "preselect")?;
    let loaded = load_dictionary(input, split_flags, seed)?;
    let cfg = PreselectConfig::new(x, c, build_regime(regime, loaded.sample.y())?)
        .map_err(|e| usage(e.to_string()))?;
    let result = preselect(&loaded.dictionary, &loaded.split, &cfg)
        .map_err(|e| anyhow!(e).context("preselection"))?;
    let json =
        serde_json::to_string_pretty(&result).map_err(|e| anyhow!(e).context("serializing"))?;
    write_output(out, &format!("{json}\n"))
}

#[allow(clippy::too_many_arguments)]
fn cmd_adversarial(
    ms: &[usize],
    ns: &[usize],
    c_const: f64,
    sigma: f64,
    reps: usize,
    with_star: bool,
    star_reps: usize,
    x: f64,
    c: f64,
    seed: u64,
    out: Option<&Path>,
    format: Option<Format>,
) -> Result<(), CliError> {
    let star_reps = if star_reps == 0 { reps } else { star_reps };

    struct Row {
        erm: ErmMcReport,
        star: Option<StarMcReport>,
    }
    let mut rows = Vec::new();
    for (gi, (&m, &n)) in ms
        .iter()
        .flat_map(|m| ns.iter().map(move |n| (m, n)))
        .enumerate()
    {
        let model = AdversarialModel::new(m, n, c_const, sigma)
            .map_err(|e| usage(e.to_string()))?;
        let grid_seed = seed.wrapping_add(gi as u64);
        let erm = erm_excess_risk_mc(&model, reps, grid_seed)
            .map_err(|e| anyhow!(e).context("erm monte carlo"))?;
        let star = if with_star {
            let cfg = PreselectConfig::new(
                x,
                c,
                Regime::Subgaussian {
                    sigma_eps: sigma,
                    b: 1.0,
                },
            )
            .map_err(|e| usage(e.to_string()))?;
            Some(
                star_excess_risk_mc(&model, &cfg, star_reps, grid_seed.wrapping_add(1))
                    .map_err(|e| anyhow!(e).context("star monte carlo"))?,
            )
        } else {
            None
        };
        rows.push(Row { erm, star });
    }

    let content = match format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut s = String::from("M,n,reps,p_misselect,excess_risk,stderr,sqrt_logM_over_n");
            if with_star {
                s.push_str(",star_excess_risk");
            }
            s.push('\n');
            for row in &rows {
                let e = &row.erm;
                let _ = write!(
                    s,
                    "{},{},{},{},{},{},{}",
                    e.m, e.n, e.reps, e.p_misselect, e.excess_risk, e.stderr, e.sqrt_log_m_over_n
                );
                if let Some(st) = &row.star {
                    let _ = write!(s, ",{}", st.mean_star_excess);
                }
                s.push('\n');
            }
            s
        }
        Format::Json => {
            let objs: Vec<serde_json::Value> = rows
                .iter()
                .map(|row| {
                    let mut v = serde_json::to_value(row.erm).unwrap();
                    if let Some(st) = &row.star {
                        v["star_excess_risk"] = serde_json::json!(st.mean_star_excess);
                        v["star_stderr"] = serde_json::json!(st.stderr_star);
                    }
                    v
                })
                .collect();
            format!(
                "{}\n",
                serde_json::to_string_pretty(&objs)
                    .map_err(|e| anyhow!(e).context("serializing"))?
            )
        }
    };
    write_output(out, &content)
}

fn cmd_lasso_experiment(
    cfg: &Section4Config,
    out: Option<&Path>,
    format: Option<Format>,
) -> Result<(), CliError> {
    let report = run_section4(cfg).map_err(|e| anyhow!(e).context("simulation study"))?;
    let content = match format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut s = String::from("rep,method,beta_err,pred_err\n");
            for r in &report.records {
                let _ = writeln!(s, "{},{},{},{}", r.rep, r.method, r.beta_err, r.pred_err);
            }
            s
        }
        Format::Json => {
            let summary = serde_json::json!({
                "failed_reps": report.failed_reps,
                "summary": report.summary,
            });
            format!(
                "{}\n",
                serde_json::to_string_pretty(&summary)
                    .map_err(|e| anyhow!(e).context("serializing"))?
            )
        }
    };
    write_output(out, &content)
}

fn read_regression_csv(input: &Path) -> Result<(Vec<f64>, Matrix, Vec<String>), CliError> {
    let file =
        File::open(input).with_context(|| format!("reading input: opening {input:?}"))?;
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = rd
        .headers()
        .map_err(|e| anyhow!(e).context("reading input: csv header"))?
        .clone();
    if headers.len() < 2 {
        return Err(usage("regression csv needs a y column and at least one feature"));
    }
    let names: Vec<String> = headers.iter().skip(1).map(|s| s.to_string()).collect();
    let mut y = Vec::new();
    let mut rows = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| anyhow!(e).context("reading input: csv record"))?;
        if rec.len() != headers.len() {
            return Err(usage(format!(
                "row {}: expected {} fields, got {}",
                line + 2,
                headers.len(),
                rec.len()
            )));
        }
        let parse = |s: &str| -> Result<f64, CliError> {
            s.parse::<f64>()
                .map_err(|_| usage(format!("row {}: bad numeric value '{s}'", line + 2)))
        };
        y.push(parse(&rec[0])?);
        let mut row = Vec::with_capacity(names.len());
        for v in rec.iter().skip(1) {
            row.push(parse(v)?);
        }
        rows.push(row);
    }
    let x = Matrix::from_rows(rows).map_err(|e| anyhow!(e).context("reading input"))?;
    Ok((y, x, names))
}

fn cmd_lars_path(
    input: &Path,
    max_steps: usize,
    standardize: bool,
    out: Option<&Path>,
    format: Option<Format>,
) -> Result<(), CliError> {
    let (y, x, names) = read_regression_csv(input)?;
    let path: LassoPath = lars_path(&x, &y, max_steps, standardize)
        .map_err(|e| anyhow!(e).context("lars path"))?;
    let content = match format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut s = String::from("step,penalty_level,df,rss");
            for n in &names {
                s.push(',');
                s.push_str(n);
            }
            s.push('\n');
            for (k, knot) in path.knots.iter().enumerate() {
                let _ = write!(
                    s,
                    "{},{},{},{}",
                    k,
                    knot.penalty_level,
                    knot.active_set.len(),
                    knot.rss
                );
                for c in &knot.coefs {
                    let _ = write!(s, ",{c}");
                }
                s.push('\n');
            }
            s
        }
        Format::Json => format!(
            "{}\n",
            serde_json::to_string_pretty(&path)
                .map_err(|e| anyhow!(e).context("serializing"))?
        ),
    };
    write_output(out, &content)
}
