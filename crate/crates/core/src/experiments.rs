//! Seeded Monte Carlo harness.
//!
//! A simulation cell is one `(d, rep)` pair. Its four samples (train and
//! test, per class) come from independent substreams keyed by
//! `(master_seed, example_id, d, rep)`, so results do not depend on how the
//! cells are scheduled across threads, and adding dimensions or classifiers
//! leaves every other cell untouched.

use std::fmt;
use std::str::FromStr;

use ndarray::{concatenate, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{bayes_predict, fit_ovo, knn1_predict, Class, Rule};
use crate::dataio::{stratified_split, LabeledDataset};
use crate::distributions::{sample, ExampleSpec};
use crate::rng::{mix, substream, Role};
use crate::stats::{AnchorPolicy, StatsEngine, TrainingSet};
use crate::{Error, Result};

pub const DEFAULT_DIMS: [usize; 8] = [5, 10, 25, 50, 100, 250, 500, 1000];
pub const DEFAULT_REPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassifierKind {
    #[serde(rename = "d0")]
    Delta0,
    #[serde(rename = "d1")]
    Delta1,
    #[serde(rename = "d2")]
    Delta2,
    #[serde(rename = "d3")]
    Delta3,
    #[serde(rename = "knn1")]
    Knn1,
    #[serde(rename = "bayes")]
    Bayes,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 6] = [
        ClassifierKind::Delta0,
        ClassifierKind::Delta1,
        ClassifierKind::Delta2,
        ClassifierKind::Delta3,
        ClassifierKind::Knn1,
        ClassifierKind::Bayes,
    ];

    pub fn rule(self) -> Option<Rule> {
        match self {
            ClassifierKind::Delta0 => Some(Rule::Delta0),
            ClassifierKind::Delta1 => Some(Rule::Delta1),
            ClassifierKind::Delta2 => Some(Rule::Delta2),
            ClassifierKind::Delta3 => Some(Rule::Delta3),
            ClassifierKind::Knn1 | ClassifierKind::Bayes => None,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            ClassifierKind::Delta0 => "d0",
            ClassifierKind::Delta1 => "d1",
            ClassifierKind::Delta2 => "d2",
            ClassifierKind::Delta3 => "d3",
            ClassifierKind::Knn1 => "knn1",
            ClassifierKind::Bayes => "bayes",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "knn1" | "1nn" => Ok(ClassifierKind::Knn1),
            "bayes" => Ok(ClassifierKind::Bayes),
            other => Ok(match other.parse::<Rule>()? {
                Rule::Delta0 => ClassifierKind::Delta0,
                Rule::Delta1 => ClassifierKind::Delta1,
                Rule::Delta2 => ClassifierKind::Delta2,
                Rule::Delta3 => ClassifierKind::Delta3,
            }),
        }
    }
}

/// Where the observations come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Example(ExampleSpec),
    Dataset { path: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub dims: Vec<usize>,
    pub reps: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub classifiers: Vec<ClassifierKind>,
    pub master_seed: u64,
    #[serde(default)]
    pub anchor_policy: AnchorPolicy,
}

impl ExperimentConfig {
    /// The standard protocol: 20 training and 100 test points per class,
    /// 100 repetitions, the eight-point dimension grid, every classifier.
    pub fn protocol_defaults(example: ExampleSpec, master_seed: u64) -> Self {
        Self {
            source: DataSource::Example(example),
            dims: DEFAULT_DIMS.to_vec(),
            reps: DEFAULT_REPS,
            train_per_class: 20,
            test_per_class: 100,
            classifiers: ClassifierKind::ALL.to_vec(),
            master_seed,
            anchor_policy: AnchorPolicy::default(),
        }
    }

    /// Settings for repeated 50/50 splits of a real dataset.
    pub fn for_dataset(path: impl Into<String>, reps: usize, master_seed: u64) -> Self {
        Self {
            source: DataSource::Dataset { path: path.into() },
            dims: Vec::new(),
            reps,
            train_per_class: 0,
            test_per_class: 0,
            classifiers: vec![
                ClassifierKind::Delta0,
                ClassifierKind::Delta1,
                ClassifierKind::Delta2,
                ClassifierKind::Delta3,
                ClassifierKind::Knn1,
            ],
            master_seed,
            anchor_policy: AnchorPolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::invalid("reps must be at least 1"));
        }
        if self.classifiers.is_empty() {
            return Err(Error::invalid("no classifiers selected"));
        }
        for (i, c) in self.classifiers.iter().enumerate() {
            if self.classifiers[..i].contains(c) {
                return Err(Error::invalid(format!("classifier {c} listed twice")));
            }
        }
        if let DataSource::Example(spec) = &self.source {
            if self.dims.is_empty() || self.dims.contains(&0) {
                return Err(Error::invalid("dims must be a nonempty list of positive integers"));
            }
            if self.train_per_class < 2 {
                return Err(Error::invalid("train_per_class must be at least 2"));
            }
            if self.test_per_class == 0 {
                return Err(Error::invalid("test_per_class must be positive"));
            }
            spec.f.validate()?;
            spec.g.validate()?;
        }
        Ok(())
    }

    /// Label used in the `example` column of summary files.
    pub fn source_name(&self) -> String {
        match &self.source {
            DataSource::Example(spec) if spec.id == 0 => "custom".into(),
            DataSource::Example(spec) => spec.id.to_string(),
            DataSource::Dataset { path } => path.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// `max(T_FF, T_GG) > T_FG`: predicted `Δ₂ ≤ Δ₃ ≤ Δ₁`.
    A,
    /// `T_FG ≥ max(T_FF, T_GG)`: predicted `Δ₂ ≥ Δ₃ ≥ Δ₁`.
    B,
}

pub fn regime(t_ff: f64, t_fg: f64, t_gg: f64) -> Regime {
    if t_ff.max(t_gg) > t_fg {
        Regime::A
    } else {
        Regime::B
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub classifier: ClassifierKind,
    pub d: usize,
    pub reps: usize,
    pub mean_error: f64,
    pub std_error: f64,
    /// Raw test-error proportion of each repetition.
    pub errors: Vec<f64>,
    /// Prior-weighted estimate of each repetition.
    pub weighted_errors: Vec<f64>,
}

/// Mean coordinatewise statistics at one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimSummary {
    pub d: usize,
    #[serde(rename = "T_ff")]
    pub t_ff: f64,
    #[serde(rename = "T_fg")]
    pub t_fg: f64,
    #[serde(rename = "T_gg")]
    pub t_gg: f64,
    pub regime: Regime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub cells: Vec<CellResult>,
    pub per_dim: Vec<DimSummary>,
}

impl ExperimentResult {
    pub fn cell(&self, classifier: ClassifierKind, d: usize) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.classifier == classifier && c.d == d)
    }

    pub fn dim_summary(&self, d: usize) -> Option<&DimSummary> {
        self.per_dim.iter().find(|s| s.d == d)
    }
}

/// `α·err_F + (1 − α)·err_G`.
pub fn estimate_delta(err_f: f64, err_g: f64, alpha: f64) -> f64 {
    alpha * err_f + (1.0 - alpha) * err_g
}

/// Mean and `sd / √reps` of per-repetition errors (sample sd; zero for a
/// single repetition).
pub fn aggregate(errors: &[f64]) -> (f64, f64) {
    let k = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / k;
    if errors.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = errors.iter().map(|e| (e - mean) * (e - mean)).sum();
    (mean, (ss / (k - 1.0)).sqrt() / k.sqrt())
}

struct RepOutcome {
    errors: Vec<f64>,
    weighted: Vec<f64>,
    t: [f64; 3],
}

fn simulate_rep(cfg: &ExperimentConfig, spec: &ExampleSpec, d: usize, rep: usize) -> Result<RepOutcome> {
    let parts = [spec.id as u64, d as u64, rep as u64];
    let draw = |which: &crate::distributions::MarginalSpec, count, role| {
        sample(which, d, count, &mut substream(cfg.master_seed, &parts, role))
    };
    let (m, t) = (cfg.train_per_class, cfg.test_per_class);
    let train_f = draw(&spec.f, m, Role::TrainF)?;
    let train_g = draw(&spec.g, m, Role::TrainG)?;
    let test_f = draw(&spec.f, t, Role::TestF)?;
    let test_g = draw(&spec.g, t, Role::TestG)?;

    let pooled = concatenate(Axis(0), &[train_f.view(), train_g.view()]).expect("equal widths");
    let pooled_labels: Vec<Class> = (0..2 * m).map(|i| if i < m { Class::One } else { Class::Two }).collect();
    let engine = StatsEngine::new(TrainingSet::new(train_f, train_g)?).with_policy(cfg.anchor_policy);
    let needs_disc = cfg
        .classifiers
        .iter()
        .any(|c| matches!(c, ClassifierKind::Delta1 | ClassifierKind::Delta2 | ClassifierKind::Delta3));

    let k = cfg.classifiers.len();
    let mut wrong = [vec![0usize; k], vec![0usize; k]];
    for (truth, test) in [(Class::One, &test_f), (Class::Two, &test_g)] {
        let slot = &mut wrong[(truth == Class::Two) as usize];
        for z in test.outer_iter() {
            let z = z.as_slice().expect("sampled rows are contiguous");
            let disc = if needs_disc { Some(engine.discriminants(z)?) } else { None };
            for (c, kind) in cfg.classifiers.iter().enumerate() {
                let predicted = match kind {
                    ClassifierKind::Delta0 => Class::from_score(engine.delta0_score(z)?),
                    ClassifierKind::Delta1 => Class::from_score(disc.as_ref().expect("computed").d1),
                    ClassifierKind::Delta2 => Class::from_score(disc.as_ref().expect("computed").d2),
                    ClassifierKind::Delta3 => Class::from_score(disc.as_ref().expect("computed").d3),
                    ClassifierKind::Knn1 => *knn1_predict(pooled.view(), &pooled_labels, z)?,
                    ClassifierKind::Bayes => bayes_predict(
                        |x| x.iter().map(|&v| spec.f.log_density(v)).sum(),
                        |x| x.iter().map(|&v| spec.g.log_density(v)).sum(),
                        z,
                    )?,
                };
                slot[c] += (predicted != truth) as usize;
            }
        }
    }

    let alpha = engine.training().alpha();
    let errors = (0..k).map(|c| (wrong[0][c] + wrong[1][c]) as f64 / (2 * t) as f64).collect();
    let weighted = (0..k)
        .map(|c| estimate_delta(wrong[0][c] as f64 / t as f64, wrong[1][c] as f64 / t as f64, alpha))
        .collect();
    let s = engine.stats();
    Ok(RepOutcome {
        errors,
        weighted,
        t: [s.tbar_ff, s.tbar_fg, s.tbar_gg],
    })
}

fn assemble(
    cfg: &ExperimentConfig,
    dims: &[usize],
    outcomes: Vec<RepOutcome>,
    with_t: bool,
) -> ExperimentResult {
    let reps = cfg.reps;
    let mut cells = Vec::with_capacity(dims.len() * cfg.classifiers.len());
    let mut per_dim = Vec::new();
    for (di, &d) in dims.iter().enumerate() {
        let block = &outcomes[di * reps..(di + 1) * reps];
        for (c, &classifier) in cfg.classifiers.iter().enumerate() {
            let errors: Vec<f64> = block.iter().map(|o| o.errors[c]).collect();
            let weighted_errors = block.iter().map(|o| o.weighted[c]).collect();
            let (mean_error, std_error) = aggregate(&errors);
            cells.push(CellResult {
                classifier,
                d,
                reps,
                mean_error,
                std_error,
                errors,
                weighted_errors,
            });
        }
        if with_t {
            let mean = |j: usize| block.iter().map(|o| o.t[j]).sum::<f64>() / reps as f64;
            let (t_ff, t_fg, t_gg) = (mean(0), mean(1), mean(2));
            per_dim.push(DimSummary {
                d,
                t_ff,
                t_fg,
                t_gg,
                regime: regime(t_ff, t_fg, t_gg),
            });
        }
    }
    ExperimentResult {
        config: cfg.clone(),
        cells,
        per_dim,
    }
}

/// Runs every `(d, rep)` cell of a simulation config.
pub fn run_simulation(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let DataSource::Example(spec) = &cfg.source else {
        return Err(Error::invalid("run_simulation needs an example source"));
    };
    let cells: Vec<(usize, usize)> = cfg
        .dims
        .iter()
        .flat_map(|&d| (0..cfg.reps).map(move |r| (d, r)))
        .collect();
    let outcomes = cells
        .into_par_iter()
        .map(|(d, r)| simulate_rep(cfg, spec, d, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(cfg, &cfg.dims, outcomes, true))
}

fn real_rep(cfg: &ExperimentConfig, data: &LabeledDataset, rep: usize) -> Result<RepOutcome> {
    let seed = cfg.master_seed;
    let (train, test) = stratified_split(data, 0.5, &mut substream(seed, &[rep as u64], Role::Split))?;
    let binary = data.vocabulary().len() == 2;
    let tie_seed = mix(seed, &[rep as u64]);

    let truth = test.labels();
    let mut first = data.vocabulary().to_vec();
    first.sort();
    let class_f = &first[0];
    let n_f = truth.iter().filter(|l| *l == class_f).count();
    let n_g = truth.len() - n_f;
    let alpha = train.class_count(class_f) as f64 / train.len() as f64;

    let mut errors = Vec::new();
    let mut weighted = Vec::new();
    let mut t = [f64::NAN; 3];
    let mut record = |predicted: Vec<&str>| {
        let (mut wf, mut wg) = (0usize, 0usize);
        for (p, l) in predicted.iter().zip(truth) {
            if *p != l.as_str() {
                if l == class_f {
                    wf += 1;
                } else {
                    wg += 1;
                }
            }
        }
        let raw = (wf + wg) as f64 / truth.len() as f64;
        errors.push(raw);
        weighted.push(if binary {
            estimate_delta(wf as f64 / n_f as f64, wg as f64 / n_g as f64, alpha)
        } else {
            raw
        });
    };

    for kind in &cfg.classifiers {
        match kind.rule() {
            Some(rule) => {
                let ens = fit_ovo(rule, train.features(), train.labels(), tie_seed)?.with_policy(cfg.anchor_policy);
                if binary {
                    let s = ens.models().next().expect("one pair").stats();
                    t = [s.tbar_ff, s.tbar_fg, s.tbar_gg];
                }
                let predicted = ens.predict_batch(test.features(), tie_seed)?;
                record(predicted.iter().map(String::as_str).collect());
            }
            None if *kind == ClassifierKind::Knn1 => {
                let features = train.features();
                let predicted = test
                    .features()
                    .outer_iter()
                    .map(|z| {
                        let z = z.to_vec();
                        knn1_predict(features, train.labels(), &z).map(String::as_str)
                    })
                    .collect::<Result<Vec<_>>>()?;
                record(predicted);
            }
            None => return Err(Error::invalid("the Bayes rule needs known class densities")),
        }
    }
    Ok(RepOutcome { errors, weighted, t })
}

/// Repeated stratified 50/50 splits of a labeled dataset. Three or more
/// classes use the one-vs-one ensemble.
pub fn run_real_data(data: &LabeledDataset, cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    if cfg.classifiers.contains(&ClassifierKind::Bayes) {
        return Err(Error::invalid("the Bayes rule needs known class densities"));
    }
    if data.vocabulary().len() < 2 {
        return Err(Error::invalid("need at least two classes"));
    }
    for label in data.vocabulary() {
        let count = data.class_count(label);
        if count < 4 {
            return Err(Error::InsufficientSample {
                class: label.clone(),
                count,
                required: 4,
            });
        }
    }
    let outcomes = (0..cfg.reps)
        .into_par_iter()
        .map(|r| real_rep(cfg, data, r))
        .collect::<Result<Vec<_>>>()?;
    let with_t = data.vocabulary().len() == 2 && cfg.classifiers.iter().any(|c| c.rule().is_some());
    let mut cfg = cfg.clone();
    cfg.dims = vec![data.dim()];
    Ok(assemble(&cfg, &[data.dim()], outcomes, with_t))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingVerdict {
    pub d: usize,
    pub regime: Regime,
    /// Mean errors of `δ₁`, `δ₂`, `δ₃`.
    pub errors: [f64; 3],
    pub std_errors: [f64; 3],
    /// Whether the predicted ordering holds within one pooled standard error.
    pub consistent: bool,
}

impl OrderingVerdict {
    pub fn predicted(&self) -> &'static str {
        match self.regime {
            Regime::A => "D2 <= D3 <= D1",
            Regime::B => "D2 >= D3 >= D1",
        }
    }
}

/// `a ≤ b` up to the pooled standard error of the two means.
fn weakly_le(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 <= b.0 + (a.1 * a.1 + b.1 * b.1).sqrt()
}

pub fn ordering_verdict(d: usize, regime: Regime, errors: [f64; 3], std_errors: [f64; 3]) -> OrderingVerdict {
    let e = |i: usize| (errors[i], std_errors[i]);
    let (e1, e2, e3) = (e(0), e(1), e(2));
    let consistent = match regime {
        Regime::A => weakly_le(e2, e3) && weakly_le(e3, e1),
        Regime::B => weakly_le(e3, e2) && weakly_le(e1, e3),
    };
    OrderingVerdict {
        d,
        regime,
        errors,
        std_errors,
        consistent,
    }
}

/// Regime and ordering check at every dimension of a result.
pub fn theorem5_report(res: &ExperimentResult) -> Result<Vec<OrderingVerdict>> {
    let kinds = [ClassifierKind::Delta1, ClassifierKind::Delta2, ClassifierKind::Delta3];
    let missing: Vec<&str> = kinds
        .iter()
        .filter(|k| !res.config.classifiers.contains(k))
        .map(|k| k.token())
        .collect();
    if !missing.is_empty() {
        return Err(Error::invalid(format!("ordering check needs {}", missing.join(", "))));
    }
    res.per_dim
        .iter()
        .map(|s| {
            let cell = |k| {
                res.cell(k, s.d)
                    .ok_or_else(|| Error::invalid(format!("no {k} cell at d = {}", s.d)))
            };
            let [c1, c2, c3] = [cell(kinds[0])?, cell(kinds[1])?, cell(kinds[2])?];
            Ok(ordering_verdict(
                s.d,
                s.regime,
                [c1.mean_error, c2.mean_error, c3.mean_error],
                [c1.std_error, c2.std_error, c3.std_error],
            ))
        })
        .collect()
}
