//! Batch command-line front end for the covwalk interaction tests.
//!
//! Subcommands: `test` (per-statistic tests on every covariate), `combine`
//! (min-p combined test), `bench` (synthetic power benchmark), `calibrate`
//! (Type-I check on null data), and `quantile` (closed-form tails).
//!
//! Exit codes: 0 success, 2 input/validation error, 3 internal numerical
//! degeneracy.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use covwalk::data::{ingest_csv, ArmPair, DoseEncoding, IngestConfig, TrialDataset};
use covwalk::dist::{TailKind, TailSeries};
use covwalk::mc::{
    curve_envelope, reports_to_csv, screen_covariates_with, ComparisonMode, Correction, McConfig,
    TestReport, RNG_ALGORITHM,
};
use covwalk::preprocess::{build_outcome, variance_diagnostics, OutcomePath};
use covwalk::stats::StatisticKind;
use covwalk::synth::{
    centering_to_csv, compare_centering, default_grid, generate, run_axis, Axis, BenchConfig,
    PowerReport, SyntheticModel, SyntheticSpec,
};

#[derive(Parser)]
#[command(
    name = "covwalk",
    version,
    about = "Random-walk statistical tests for covariate-treatment interactions"
)]
struct Cli {
    /// Worker threads (0 = one per core). Overrides COVWALK_THREADS.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run individual tests on every covariate of a CSV dataset.
    Test(TestArgs),
    /// Run the min-p combined test on every covariate of a CSV dataset.
    Combine(TestArgs),
    /// Run the synthetic power benchmark.
    Bench(BenchArgs),
    /// Check Type-I calibration on synthetic null data.
    Calibrate(CalibrateArgs),
    /// Closed-form tail probabilities and quantiles.
    Quantile(QuantileArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum CorrectionArg {
    None,
    Bonferroni,
}

#[derive(Args)]
struct TestArgs {
    /// Input CSV (UTF-8, header row, `.` decimal separator).
    #[arg(long)]
    input: PathBuf,
    /// Name of the treatment column.
    #[arg(long)]
    treatment_col: String,
    /// Name of the response column.
    #[arg(long)]
    response_col: String,
    /// Restrict to two arms, e.g. `A,B` (A -> +1, B -> -1; other rows dropped).
    #[arg(long)]
    arm_pair: Option<String>,
    /// Dose encoding, e.g. `low=-1,mid=0,high=1`.
    #[arg(long)]
    dose_encoding: Option<String>,
    /// CSV delimiter.
    #[arg(long, default_value = ",")]
    delimiter: char,
    /// Statistics to run (comma separated). Default for `test`: maxb;
    /// for `combine`: maxb,maxb_n,maxbe,maxbe_n,sareab.
    #[arg(long, value_delimiter = ',')]
    stats: Vec<String>,
    /// Monte-Carlo permutations.
    #[arg(long, default_value_t = 10_000)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Add-one smoothing for p-values ((1 + #{S >= V}) / (M + 1)).
    #[arg(long)]
    smoothing: bool,
    /// Use the uncentered modified outcome R x T (walk null) instead of the
    /// centered bridge pipeline.
    #[arg(long)]
    uncentered: bool,
    /// Fit MoLin without an intercept (regression through the origin).
    #[arg(long)]
    no_molin_intercept: bool,
    #[arg(long, value_enum, default_value_t = CorrectionArg::None)]
    correction: CorrectionArg,
    /// Significance threshold for flags.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Output file path.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
    /// Directory for per-covariate cumulative-curve CSVs with permutation
    /// envelopes.
    #[arg(long)]
    emit_curves: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Models to benchmark (comma separated; default all six).
    #[arg(long, value_delimiter = ',')]
    models: Vec<String>,
    /// Axes to sweep (noise, w1, w2, decoy; default noise,w1,decoy).
    #[arg(long, value_delimiter = ',')]
    axes: Vec<String>,
    /// Explicit grid as comma-separated values (default: per-axis grid).
    #[arg(long, value_delimiter = ',')]
    grid: Vec<f64>,
    /// Statistics to benchmark (default: all eight).
    #[arg(long, value_delimiter = ',')]
    stats: Vec<String>,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 96)]
    reps: usize,
    #[arg(long, default_value_t = 1000)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2.0)]
    w1: f64,
    #[arg(long, default_value_t = 1.0)]
    w2: f64,
    /// Baseline noise level sqrt(Delta) for non-noise axes.
    #[arg(long, default_value_t = 1.0)]
    sqrt_delta: f64,
    #[arg(long, default_value_t = 4)]
    decoys: usize,
    /// Skip the combined-test column.
    #[arg(long)]
    no_comb: bool,
    /// Skip the paper-style regression baseline column (MoLinO).
    #[arg(long)]
    no_fidelity_molin: bool,
    /// Also write a Max-vs-MaxB centering comparison.
    #[arg(long)]
    compare_centering: bool,
    /// Output directory (power.csv, areas.csv, summary.json).
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Null replications.
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 2000)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Statistics to calibrate (default: all eight plus the combined test).
    #[arg(long, value_delimiter = ',')]
    stats: Vec<String>,
    /// Output JSON report; a p-value histogram CSV is written alongside.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct QuantileArgs {
    /// Functional: brownian-max, bridge-max, or excursion-max.
    #[arg(long)]
    kind: String,
    /// Upper-tail probability to invert.
    #[arg(long)]
    p: Option<f64>,
    /// Evaluate the tail at this threshold instead of inverting.
    #[arg(long)]
    tail: Option<f64>,
}

#[derive(Serialize)]
struct Provenance {
    version: String,
    command: String,
    seed: u64,
    m: usize,
    statistics: Vec<String>,
    rng_algorithm: String,
    config_hash: String,
}

fn provenance<C: Serialize>(
    command: &str,
    seed: u64,
    m: usize,
    stats: &[StatisticKind],
    cfg: &C,
) -> Provenance {
    let canonical = serde_json::to_string(cfg).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    Provenance {
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        seed,
        m,
        statistics: stats.iter().map(|s| s.name().to_string()).collect(),
        rng_algorithm: RNG_ALGORITHM.to_string(),
        config_hash: format!("sha256:{:x}", hasher.finalize()),
    }
}

#[derive(Serialize)]
struct TestRunOutput {
    provenance: Provenance,
    diagnostics: Option<covwalk::preprocess::VarianceDiagnostics>,
    reports: Vec<TestReport>,
}

// analysis-relevant configuration, hashed for provenance; output paths and
// thread counts are excluded so identical analyses hash identically
#[derive(Serialize)]
struct AnalysisConfig {
    treatment_col: String,
    response_col: String,
    arm_pair: Option<String>,
    dose_encoding: Option<String>,
    delimiter: char,
    statistics: Vec<String>,
    m: usize,
    seed: u64,
    smoothing: bool,
    uncentered: bool,
    molin_intercept: bool,
    correction: String,
    alpha: f64,
    combine: bool,
}

fn parse_stats(names: &[String], default: &[StatisticKind]) -> covwalk::Result<Vec<StatisticKind>> {
    if names.is_empty() {
        return Ok(default.to_vec());
    }
    names.iter().map(|s| StatisticKind::parse(s)).collect()
}

fn parse_arm_pair(s: &str) -> covwalk::Result<ArmPair> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(covwalk::Error::Invalid(format!(
            "arm pair must be `A,B`, got `{s}`"
        )));
    }
    ArmPair::new(parts[0].trim(), parts[1].trim())
}

fn parse_dose_encoding(s: &str) -> covwalk::Result<DoseEncoding> {
    let mut map = Vec::new();
    for part in s.split(',') {
        let (label, value) = part.split_once('=').ok_or_else(|| {
            covwalk::Error::Invalid(format!(
                "dose encoding entries are `label=value`, got `{part}`"
            ))
        })?;
        let v: f64 = value.trim().parse().map_err(|_| {
            covwalk::Error::Invalid(format!("dose value `{value}` is not a number"))
        })?;
        map.push((label.trim().to_string(), v));
    }
    DoseEncoding::new(map)
}

fn load_dataset(args: &TestArgs) -> covwalk::Result<TrialDataset> {
    let mut cfg = IngestConfig::new(&args.treatment_col, &args.response_col);
    if let Some(pair) = &args.arm_pair {
        cfg.arm_pair = Some(parse_arm_pair(pair)?);
    }
    if let Some(enc) = &args.dose_encoding {
        cfg.dose_encoding = Some(parse_dose_encoding(enc)?);
    }
    let mut buf = [0u8; 4];
    let encoded = args.delimiter.encode_utf8(&mut buf);
    if encoded.len() != 1 {
        return Err(covwalk::Error::Invalid(
            "delimiter must be a single-byte character".into(),
        ));
    }
    cfg.delimiter = encoded.as_bytes()[0];
    ingest_csv(&args.input, &cfg)
}

fn cmd_test(args: &TestArgs, combine: bool) -> covwalk::Result<()> {
    let default_stats: Vec<StatisticKind> = if combine {
        covwalk::mc::default_combined_statistics().to_vec()
    } else {
        vec![StatisticKind::MaxB]
    };
    let stats = parse_stats(&args.stats, &default_stats)?;
    let dataset = load_dataset(args)?;
    let path = if args.uncentered {
        OutcomePath::Uncentered
    } else {
        OutcomePath::Centered
    };
    let outcome = build_outcome(&dataset, path)?;
    let diagnostics = variance_diagnostics(&dataset).ok().flatten();

    let correction = match args.correction {
        CorrectionArg::None => Correction::None,
        CorrectionArg::Bonferroni => Correction::Bonferroni,
    };
    let mc = McConfig {
        m: args.m,
        seed: args.seed,
        statistics: stats.clone(),
        comparison: if args.smoothing {
            ComparisonMode::AddOneSmoothing
        } else {
            ComparisonMode::Strict
        },
        molin_intercept: !args.no_molin_intercept,
    };
    let reports =
        screen_covariates_with(&dataset, &outcome, &mc, correction, args.alpha, combine)?;

    if let Some(dir) = &args.emit_curves {
        std::fs::create_dir_all(dir)?;
        for (j, name) in dataset.covariate_names().iter().enumerate() {
            let env =
                curve_envelope(&outcome, dataset.covariate(j), name, &mc, 0.025, 0.975, 2000)?;
            let mut text = String::from("t,observed,lower,upper\n");
            use std::fmt::Write as _;
            for i in 0..env.t.len() {
                let _ = writeln!(
                    text,
                    "{},{},{},{}",
                    env.t[i], env.observed[i], env.lower[i], env.upper[i]
                );
            }
            std::fs::write(dir.join(format!("{name}_curve.csv")), text)?;
        }
    }

    let analysis = AnalysisConfig {
        treatment_col: args.treatment_col.clone(),
        response_col: args.response_col.clone(),
        arm_pair: args.arm_pair.clone(),
        dose_encoding: args.dose_encoding.clone(),
        delimiter: args.delimiter,
        statistics: stats.iter().map(|s| s.name().to_string()).collect(),
        m: args.m,
        seed: args.seed,
        smoothing: args.smoothing,
        uncentered: args.uncentered,
        molin_intercept: !args.no_molin_intercept,
        correction: format!("{correction:?}"),
        alpha: args.alpha,
        combine,
    };
    let prov = provenance(
        if combine { "combine" } else { "test" },
        args.seed,
        args.m,
        &stats,
        &analysis,
    );

    let n_significant = reports
        .iter()
        .filter(|r| r.significant == Some(true))
        .count();
    match args.format {
        OutputFormat::Json => {
            let out = TestRunOutput {
                provenance: prov,
                diagnostics,
                reports,
            };
            std::fs::write(&args.output, serde_json::to_string_pretty(&out).unwrap())?;
        }
        OutputFormat::Csv => {
            let mut text = provenance_preamble(&prov);
            text.push_str(&reports_to_csv(&reports));
            std::fs::write(&args.output, text)?;
        }
    }
    eprintln!(
        "wrote {} ({} covariates, {} significant at alpha = {})",
        args.output.display(),
        dataset.n_covariates(),
        n_significant,
        args.alpha
    );
    Ok(())
}

fn provenance_preamble(p: &Provenance) -> String {
    format!(
        "# version={}\n# command={}\n# seed={}\n# m={}\n# statistics={}\n# rng_algorithm={}\n# config_hash={}\n",
        p.version,
        p.command,
        p.seed,
        p.m,
        p.statistics.join("+"),
        p.rng_algorithm,
        p.config_hash
    )
}

fn cmd_bench(args: &BenchArgs) -> covwalk::Result<()> {
    let models: Vec<SyntheticModel> = if args.models.is_empty() {
        SyntheticModel::ALL.to_vec()
    } else {
        args.models
            .iter()
            .map(|s| SyntheticModel::parse(s))
            .collect::<covwalk::Result<_>>()?
    };
    let axes: Vec<Axis> = if args.axes.is_empty() {
        vec![Axis::Noise, Axis::W1, Axis::Decoy]
    } else {
        args.axes
            .iter()
            .map(|s| Axis::parse(s))
            .collect::<covwalk::Result<_>>()?
    };
    let stats = parse_stats(&args.stats, &StatisticKind::ALL)?;

    let cfg = BenchConfig {
        n: args.n,
        replications: args.reps,
        m: args.m,
        seed: args.seed,
        alpha: 0.05,
        w1: args.w1,
        w2: args.w2,
        sqrt_delta: args.sqrt_delta,
        decoys: args.decoys,
        include_combined: !args.no_comb,
        include_fidelity_molin: !args.no_fidelity_molin,
        track_decoy: true,
        molin_intercept: true,
    };

    std::fs::create_dir_all(&args.output)?;
    let mut merged = PowerReport::default();
    for &model in &models {
        for &axis in &axes {
            if matches!(axis, Axis::W1 | Axis::W2) && model == SyntheticModel::NL {
                eprintln!(
                    "skipping NL on the {} axis (fixed coefficients)",
                    axis.name()
                );
                continue;
            }
            let grid = if args.grid.is_empty() {
                default_grid(axis)
            } else {
                args.grid.clone()
            };
            eprintln!(
                "bench: {} / {} over {} grid points x {} replications",
                model.name(),
                axis.name(),
                grid.len(),
                cfg.replications
            );
            merged.merge(run_axis(model, axis, &grid, &stats, &cfg)?);
        }
    }

    std::fs::write(args.output.join("power.csv"), merged.to_csv())?;
    std::fs::write(args.output.join("areas.csv"), merged.areas_to_csv())?;
    let prov = provenance("bench", args.seed, args.m, &stats, &cfg);
    #[derive(Serialize)]
    struct BenchOutput {
        provenance: Provenance,
        config: BenchConfig,
        report: PowerReport,
    }
    std::fs::write(
        args.output.join("summary.json"),
        serde_json::to_string_pretty(&BenchOutput {
            provenance: prov,
            config: cfg.clone(),
            report: merged,
        })
        .unwrap(),
    )?;

    if args.compare_centering {
        let grid = if args.grid.is_empty() {
            default_grid(Axis::Noise)
        } else {
            args.grid.clone()
        };
        let cells = compare_centering(&models, Axis::Noise, &grid, &cfg)?;
        std::fs::write(args.output.join("centering.csv"), centering_to_csv(&cells))?;
    }
    eprintln!("wrote benchmark reports to {}", args.output.display());
    Ok(())
}

fn cmd_calibrate(args: &CalibrateArgs) -> covwalk::Result<()> {
    let stats = parse_stats(&args.stats, &StatisticKind::ALL)?;
    let centered_stats: Vec<StatisticKind> = stats
        .iter()
        .copied()
        .filter(|s| *s != StatisticKind::Max)
        .collect();
    let combined_set: Vec<StatisticKind> = covwalk::mc::default_combined_statistics()
        .into_iter()
        .filter(|s| centered_stats.contains(s))
        .collect();
    let combine = combined_set.len() >= 2;

    let mut rejections: std::collections::BTreeMap<String, usize> = Default::default();
    let mut histograms: std::collections::BTreeMap<String, Vec<usize>> = Default::default();
    const BINS: usize = 20;

    for rep in 0..args.reps {
        // exchangeable null: no trend, no interaction (the hypothesis the
        // permutation test is exact for)
        let spec = SyntheticSpec {
            model: SyntheticModel::L,
            n: args.n,
            w1: 0.0,
            w2: 0.0,
            delta: 1.0,
            decoys: 0,
            seed: args.seed ^ 0x5eed_0000 ^ (rep as u64) << 8,
        };
        let (ds, _) = generate(&spec)?;
        let centered = build_outcome(&ds, OutcomePath::Centered)?;
        let mc = McConfig {
            m: args.m,
            seed: args.seed ^ 0xabc0_0000 ^ (rep as u64) << 8,
            statistics: centered_stats.clone(),
            comparison: ComparisonMode::Strict,
            molin_intercept: true,
        };
        let mut record = |name: &str, p: f64| {
            *rejections.entry(name.to_string()).or_insert(0) += usize::from(p < args.alpha);
            let bin = ((p * BINS as f64) as usize).min(BINS - 1);
            histograms
                .entry(name.to_string())
                .or_insert_with(|| vec![0; BINS])[bin] += 1;
        };
        if !centered_stats.is_empty() {
            let report = covwalk::mc::run_suite(
                &centered,
                ds.covariate(0),
                "X1",
                &centered_stats,
                combine.then_some(combined_set.as_slice()),
                &mc,
            )?;
            for s in &report.stats {
                record(s.statistic.name(), s.p_value);
            }
            if let Some(p) = report.combined_p {
                record("Comb", p);
            }
        }
        if stats.contains(&StatisticKind::Max) {
            let uncentered = build_outcome(&ds, OutcomePath::Uncentered)?;
            let rep_max = covwalk::mc::run_single_test(
                &uncentered,
                ds.covariate(0),
                "X1",
                StatisticKind::Max,
                &mc,
            )?;
            record("Max", rep_max.stats[0].p_value);
        }
    }

    let se = (args.alpha * (1.0 - args.alpha) / args.reps as f64).sqrt();
    let (lo, hi) = (args.alpha - 2.576 * se, args.alpha + 2.576 * se);
    #[derive(Serialize)]
    struct CalibrationRow {
        statistic: String,
        rejection_rate: f64,
        ci_low: f64,
        ci_high: f64,
        inside_99_ci: bool,
    }
    #[derive(Serialize)]
    struct CalibrationOutput {
        provenance: Provenance,
        n: usize,
        replications: usize,
        alpha: f64,
        rows: Vec<CalibrationRow>,
    }
    let rows: Vec<CalibrationRow> = rejections
        .iter()
        .map(|(name, count)| {
            let rate = *count as f64 / args.reps as f64;
            CalibrationRow {
                statistic: name.clone(),
                rejection_rate: rate,
                ci_low: lo,
                ci_high: hi,
                inside_99_ci: rate >= lo && rate <= hi,
            }
        })
        .collect();
    for row in &rows {
        eprintln!(
            "{:8} {:.4} {}",
            row.statistic,
            row.rejection_rate,
            if row.inside_99_ci { "ok" } else { "OUTSIDE CI" }
        );
    }
    #[derive(Serialize)]
    struct CalCfg {
        n: usize,
        reps: usize,
        m: usize,
        seed: u64,
        alpha: f64,
        statistics: Vec<String>,
    }
    let cal_cfg = CalCfg {
        n: args.n,
        reps: args.reps,
        m: args.m,
        seed: args.seed,
        alpha: args.alpha,
        statistics: stats.iter().map(|s| s.name().to_string()).collect(),
    };
    let out = CalibrationOutput {
        provenance: provenance("calibrate", args.seed, args.m, &stats, &cal_cfg),
        n: args.n,
        replications: args.reps,
        alpha: args.alpha,
        rows,
    };
    std::fs::write(&args.output, serde_json::to_string_pretty(&out).unwrap())?;

    let mut hist = String::from("statistic,bin_low,bin_high,count\n");
    use std::fmt::Write as _;
    for (name, bins) in &histograms {
        for (b, count) in bins.iter().enumerate() {
            let _ = writeln!(
                hist,
                "{},{},{},{}",
                name,
                b as f64 / BINS as f64,
                (b + 1) as f64 / BINS as f64,
                count
            );
        }
    }
    let hist_path = args.output.with_extension("histograms.csv");
    std::fs::write(&hist_path, hist)?;
    eprintln!(
        "wrote {} and {}",
        args.output.display(),
        hist_path.display()
    );
    Ok(())
}

fn cmd_quantile(args: &QuantileArgs) -> covwalk::Result<()> {
    let kind = TailKind::parse(&args.kind)?;
    let series = TailSeries::new(kind);
    match (args.p, args.tail) {
        (Some(p), None) => println!("{}", series.quantile(p)?),
        (None, Some(alpha)) => println!("{}", series.tail(alpha)),
        _ => {
            return Err(covwalk::Error::Invalid(
                "provide exactly one of --p (invert) or --tail (evaluate)".into(),
            ))
        }
    }
    Ok(())
}

fn exit_code_for(err: &covwalk::Error) -> u8 {
    match err {
        covwalk::Error::UncenteredPath { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let threads = if cli.threads > 0 {
        cli.threads
    } else {
        std::env::var("COVWALK_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(0)
    };
    if threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: could not configure {threads} worker threads: {e}");
            return ExitCode::from(2);
        }
    }

    let result = match &cli.command {
        Command::Test(args) => cmd_test(args, false),
        Command::Combine(args) => cmd_test(args, true),
        Command::Bench(args) => cmd_bench(args),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Quantile(args) => cmd_quantile(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
