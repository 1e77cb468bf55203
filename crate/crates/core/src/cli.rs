//! The `hdlss` command line.
//!
//! Exit codes: 0 success, 1 usage, 2 data or parameter error, 3 internal.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::classifiers::{fit_binary, fit_ovo, Rule};
use crate::dataio::{
    load_csv, load_features_csv, load_model, save_model, save_plot_csv, save_result_json, save_summary_csv,
    LabelColumn, SavedModel,
};
use crate::distributions::example_spec;
use crate::experiments::{
    run_real_data, run_simulation, theorem5_report, ClassifierKind, ExperimentConfig, ExperimentResult, DEFAULT_DIMS,
    DEFAULT_REPS,
};
use crate::stats::AnchorPolicy;
use crate::theory::{separation_is_zero, theta_constants, TheoryParams};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "hdlss", version, about = "Energy-distance classifiers for HDLSS data")]
pub struct Cli {
    /// Worker threads (default: all cores)
    #[arg(long, global = true, env = "HDLSS_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the Monte Carlo protocol on a simulation example
    Simulate(SimulateArgs),
    /// Fit a classifier on a labeled CSV and save it
    Fit(FitArgs),
    /// Label the rows of a CSV with a saved model
    Predict(PredictArgs),
    /// Repeated stratified 50/50 splits of a labeled CSV
    Bench(BenchArgs),
    /// Print the high-dimensional limits of the statistics
    Theory(TheoryArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
    pub example: u8,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_DIMS)]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_REPS)]
    pub reps: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',', default_values_t = ClassifierKind::ALL)]
    pub classifiers: Vec<ClassifierKind>,
    #[arg(long, default_value_t = 20)]
    pub train_per_class: usize,
    #[arg(long, default_value_t = 100)]
    pub test_per_class: usize,
    /// Result JSON
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Summary CSV
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
    /// Anchor pool for test points: with-test-point or training
    #[arg(long, default_value_t = AnchorPolicy::default())]
    pub anchor_policy: AnchorPolicy,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Label column, by header name or zero-based index
    #[arg(long)]
    pub label: String,
    /// The CSV has no header row
    #[arg(long)]
    pub no_header: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub rule: Rule,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub model: PathBuf,
    /// Tie-break seed stored with multi-class models
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = AnchorPolicy::default())]
    pub anchor_policy: AnchorPolicy,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Column to ignore (and score against) if the file carries labels
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long)]
    pub no_header: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Tie-break seed (default: the one stored in the model)
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = DEFAULT_REPS)]
    pub reps: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',', default_values_t = ClassifierKind::ALL[..5].to_vec())]
    pub classifiers: Vec<ClassifierKind>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[arg(long, default_value_t = AnchorPolicy::default())]
    pub anchor_policy: AnchorPolicy,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub dmu2: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub sigmaf2: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub sigmag2: f64,
    #[arg(long, default_value_t = 20)]
    pub m: usize,
    #[arg(long, default_value_t = 20)]
    pub n: usize,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Internal(_) | Error::NanDensity => EXIT_INTERNAL,
        Error::UnknownClassifier(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let mut out = std::io::stdout().lock();
    match execute(cli, &mut out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs a parsed command, writing the human-readable report to `out`.
pub fn execute(cli: Cli, out: &mut dyn std::io::Write) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::invalid("--threads must be positive"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Internal(e.to_string()))?;
    let report = pool.install(|| match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Predict(a) => predict(a),
        Command::Bench(a) => bench(a),
        Command::Theory(a) => theory(a),
    })?;
    out.write_all(report.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(rand::random)
}

fn simulate(a: SimulateArgs) -> Result<String> {
    let seed = resolve_seed(a.seed);
    let cfg = ExperimentConfig {
        dims: a.dims,
        reps: a.reps,
        classifiers: a.classifiers,
        train_per_class: a.train_per_class,
        test_per_class: a.test_per_class,
        anchor_policy: a.anchor_policy,
        ..ExperimentConfig::protocol_defaults(example_spec(a.example)?, seed)
    };
    let res = run_simulation(&cfg)?;
    write_artifacts(&res, a.out, a.summary, a.plot_data)?;
    let mut s = format!("master seed: {seed}\n");
    s += &error_table(&res);
    if let Ok(verdicts) = theorem5_report(&res) {
        s += "\n   d  regime  T_ff     T_fg     T_gg     predicted         consistent\n";
        for (v, t) in verdicts.iter().zip(&res.per_dim) {
            let regime = format!("{:?}", v.regime).to_lowercase();
            let _ = writeln!(
                s,
                "{:>5}  ({regime})     {:.5}  {:.5}  {:.5}  {:<16}  {}",
                v.d,
                t.t_ff,
                t.t_fg,
                t.t_gg,
                v.predicted(),
                if v.consistent { "yes" } else { "no" }
            );
        }
    }
    Ok(s)
}

fn write_artifacts(
    res: &ExperimentResult,
    json: Option<PathBuf>,
    summary: Option<PathBuf>,
    plot: Option<PathBuf>,
) -> Result<()> {
    if let Some(p) = json {
        save_result_json(p, res)?;
    }
    if let Some(p) = summary {
        save_summary_csv(p, res)?;
    }
    if let Some(p) = plot {
        save_plot_csv(p, res)?;
    }
    Ok(())
}

/// Mean errors in percent with standard errors in parentheses.
fn error_table(res: &ExperimentResult) -> String {
    let kinds = &res.config.classifiers;
    let mut s = format!("{:>6}", "d");
    for k in kinds {
        let _ = write!(s, "  {:>15}", k.token());
    }
    s.push('\n');
    for &d in &res.config.dims {
        let _ = write!(s, "{d:>6}");
        for &k in kinds {
            if let Some(c) = res.cell(k, d) {
                let cell = format!("{:.2} ({:.2})", 100.0 * c.mean_error, 100.0 * c.std_error);
                let _ = write!(s, "  {cell:>15}");
            }
        }
        s.push('\n');
    }
    s
}

fn fit(a: FitArgs) -> Result<String> {
    let seed = resolve_seed(a.seed);
    let data = load_csv(&a.data.data, &LabelColumn::parse(&a.data.label), !a.data.no_header)?;
    let mut labels = data.vocabulary().to_vec();
    labels.sort();
    let model = match labels.len() {
        0 | 1 => {
            return Err(Error::invalid(format!(
                "a binary rule needs two classes, found {} in {}",
                labels.len(),
                a.data.data.display()
            )))
        }
        2 => {
            let m = fit_binary(a.rule, data.class_matrix(&labels[0]), data.class_matrix(&labels[1]))?;
            SavedModel::Binary(
                m.with_labels(labels[0].clone(), labels[1].clone())
                    .with_policy(a.anchor_policy),
            )
        }
        _ => SavedModel::Ovo(fit_ovo(a.rule, data.features(), data.labels(), seed)?.with_policy(a.anchor_policy)),
    };
    save_model(&a.model, &model)?;
    Ok(format!(
        "master seed: {seed}\nfitted {} on {} rows, {} classes, d = {}\n",
        a.rule,
        data.len(),
        labels.len(),
        data.dim()
    ))
}

fn predict(a: PredictArgs) -> Result<String> {
    let model = load_model(&a.model)?;
    let seed = match (&model, a.seed) {
        (_, Some(s)) => s,
        (SavedModel::Ovo(e), None) => e.rng_seed(),
        (SavedModel::Binary(_), None) => 0,
    };
    let header = !a.no_header;
    let label = a.label.as_deref().map(LabelColumn::parse);
    let features = load_features_csv(&a.data, label.as_ref(), header)?;
    let predicted: Vec<String> = match &model {
        SavedModel::Binary(m) => m
            .predict_batch(features.view())?
            .into_iter()
            .map(|c| {
                let (f, g) = m.labels();
                if c == crate::classifiers::Class::One { f } else { g }.to_string()
            })
            .collect(),
        SavedModel::Ovo(e) => e.predict_batch(features.view(), seed)?,
    };
    let mut w = csv::Writer::from_path(&a.out).map_err(|e| Error::Format(e.to_string()))?;
    w.write_record(["prediction"]).map_err(|e| Error::Format(e.to_string()))?;
    for p in &predicted {
        w.write_record([p]).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(&a.out, e))?;

    let mut s = format!("master seed: {seed}\npredicted {} rows\n", predicted.len());
    if let Some(col) = &label {
        let truth = load_csv(&a.data, col, header)?;
        let wrong = truth.labels().iter().zip(&predicted).filter(|(t, p)| t != p).count();
        let _ = writeln!(s, "error rate: {:.4}", wrong as f64 / predicted.len().max(1) as f64);
    }
    Ok(s)
}

fn bench(a: BenchArgs) -> Result<String> {
    let seed = resolve_seed(a.seed);
    let data = load_csv(&a.data.data, &LabelColumn::parse(&a.data.label), !a.data.no_header)?;
    let mut cfg = ExperimentConfig::for_dataset(a.data.data.display().to_string(), a.reps, seed);
    cfg.classifiers = a.classifiers;
    cfg.anchor_policy = a.anchor_policy;
    let res = run_real_data(&data, &cfg)?;
    write_artifacts(&res, a.out, a.summary, None)?;
    Ok(format!(
        "master seed: {seed}\n{} rows, {} classes, d = {}\n{}",
        data.len(),
        data.vocabulary().len(),
        data.dim(),
        error_table(&res)
    ))
}

fn theory(a: TheoryArgs) -> Result<String> {
    let p = TheoryParams::new(a.dmu2, a.sigmaf2, a.sigmag2, a.m, a.n)?;
    let t = theta_constants(&p)?;
    let zero = separation_is_zero(&p);
    Ok(format!(
        "theta_FF   = {:.6}\ntheta_GG   = {:.6}\ntheta_FG   = {:.6}\ntheta_star = {:.6}\nseparation: {}\n",
        t.theta_ff,
        t.theta_gg,
        t.theta_fg,
        t.theta_star,
        if zero {
            "zero (equal means and variances)"
        } else {
            "positive (classes separate as d grows)"
        }
    ))
}
