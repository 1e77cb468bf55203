//! Decision rules built on the pooled statistics, the one-vs-one ensemble
//! and the two baselines.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angular::check_dim;
use crate::rng::{substream, Role};
use crate::stats::{AnchorPolicy, StatsEngine, TrainStats, TrainingSet};
use crate::{Error, Result};

/// Which discriminant decides the class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Delta0,
    Delta1,
    Delta2,
    Delta3,
}

impl Rule {
    pub const ALL: [Rule; 4] = [Rule::Delta0, Rule::Delta1, Rule::Delta2, Rule::Delta3];

    pub fn short_name(self) -> &'static str {
        match self {
            Rule::Delta0 => "d0",
            Rule::Delta1 => "d1",
            Rule::Delta2 => "d2",
            Rule::Delta3 => "d3",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "d0" | "delta0" => Ok(Rule::Delta0),
            "d1" | "delta1" => Ok(Rule::Delta1),
            "d2" | "delta2" => Ok(Rule::Delta2),
            "d3" | "delta3" => Ok(Rule::Delta3),
            _ => Err(Error::UnknownClassifier(s.to_string())),
        }
    }
}

/// Outcome of a binary rule: class 1 (`F`) or class 2 (`G`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Class {
    One,
    Two,
}

impl Class {
    /// Class 1 iff `score > 0`; zero and negative scores go to class 2.
    #[inline]
    pub fn from_score(score: f64) -> Self {
        if score > 0.0 {
            Class::One
        } else {
            Class::Two
        }
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Class::One => 1,
            Class::Two => 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BinaryModel {
    rule: Rule,
    label_f: String,
    label_g: String,
    engine: StatsEngine,
}

impl BinaryModel {
    pub fn rule(&self) -> Rule {
        self.rule
    }

    pub fn stats(&self) -> &TrainStats {
        self.engine.stats()
    }

    pub fn training(&self) -> &TrainingSet {
        self.engine.training()
    }

    pub fn engine(&self) -> &StatsEngine {
        &self.engine
    }

    pub fn labels(&self) -> (&str, &str) {
        (&self.label_f, &self.label_g)
    }

    pub fn dim(&self) -> usize {
        self.training().dim()
    }

    pub fn policy(&self) -> AnchorPolicy {
        self.engine.policy()
    }

    pub fn with_policy(mut self, policy: AnchorPolicy) -> Self {
        self.engine = self.engine.with_policy(policy);
        self
    }

    pub fn with_labels(mut self, label_f: impl Into<String>, label_g: impl Into<String>) -> Self {
        self.label_f = label_f.into();
        self.label_g = label_g.into();
        self
    }

    /// Rebuilds a model from stored parts, rejecting statistics that do not
    /// match a fresh fit of the training data.
    pub fn from_parts(
        rule: Rule,
        training: TrainingSet,
        stats: TrainStats,
        label_f: String,
        label_g: String,
        policy: AnchorPolicy,
    ) -> Result<Self> {
        stats.validate()?;
        let engine = StatsEngine::new(training).with_policy(policy);
        if engine.stats() != &stats {
            return Err(Error::Corrupted(
                "stored statistics do not match the stored training data".into(),
            ));
        }
        Ok(Self {
            rule,
            label_f,
            label_g,
            engine,
        })
    }

    /// The rule's discriminant at `z`; positive means class 1.
    pub fn score(&self, z: &[f64]) -> Result<f64> {
        rule_score(self.rule, &self.engine, z)
    }

    pub fn predict(&self, z: &[f64]) -> Result<Class> {
        self.score(z).map(Class::from_score)
    }

    pub fn predict_label(&self, z: &[f64]) -> Result<&str> {
        Ok(match self.predict(z)? {
            Class::One => &self.label_f,
            Class::Two => &self.label_g,
        })
    }

    pub fn predict_batch(&self, points: ArrayView2<'_, f64>) -> Result<Vec<Class>> {
        check_dim(self.dim(), points.ncols())?;
        let points = points.as_standard_layout();
        points
            .outer_iter()
            .into_par_iter()
            .map(|z| self.predict(z.as_slice().expect("standard layout")))
            .collect()
    }
}

/// Discriminant of `rule` at `z` from an already fitted engine.
pub fn rule_score(rule: Rule, engine: &StatsEngine, z: &[f64]) -> Result<f64> {
    if rule == Rule::Delta0 {
        return engine.delta0_score(z);
    }
    let d = engine.discriminants(z)?;
    Ok(match rule {
        Rule::Delta1 => d.d1,
        Rule::Delta2 => d.d2,
        Rule::Delta3 => d.d3,
        Rule::Delta0 => unreachable!(),
    })
}

pub fn fit_binary(rule: Rule, class_f: Array2<f64>, class_g: Array2<f64>) -> Result<BinaryModel> {
    let engine = StatsEngine::new(TrainingSet::new(class_f, class_g)?);
    Ok(BinaryModel {
        rule,
        label_f: "1".to_string(),
        label_g: "2".to_string(),
        engine,
    })
}

pub fn predict_binary(model: &BinaryModel, z: &[f64]) -> Result<Class> {
    model.predict(z)
}

/// One binary model per unordered label pair, combined by plurality vote.
#[derive(Debug, Clone)]
pub struct OvoEnsemble {
    rule: Rule,
    labels: Vec<String>,
    /// `(i, j, model)` with `i < j` indexing `labels`; class 1 is `labels[i]`.
    models: Vec<(usize, usize, BinaryModel)>,
    rng_seed: u64,
}

impl OvoEnsemble {
    pub fn rule(&self) -> Rule {
        self.rule
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn models(&self) -> impl Iterator<Item = &BinaryModel> {
        self.models.iter().map(|(_, _, m)| m)
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.models[0].2.dim()
    }

    pub fn with_policy(mut self, policy: AnchorPolicy) -> Self {
        self.models = self
            .models
            .into_iter()
            .map(|(i, j, m)| (i, j, m.with_policy(policy)))
            .collect();
        self
    }

    /// Reassembles an ensemble from per-pair models ordered `(0,1), (0,2), …`.
    pub fn from_parts(rule: Rule, labels: Vec<String>, models: Vec<BinaryModel>, rng_seed: u64) -> Result<Self> {
        let pairs = pair_indices(labels.len());
        if labels.len() < 2 || pairs.len() != models.len() {
            return Err(Error::Corrupted(format!(
                "{} labels need {} pairwise models, found {}",
                labels.len(),
                pairs.len(),
                models.len()
            )));
        }
        let mut out = Vec::with_capacity(models.len());
        for ((i, j), model) in pairs.into_iter().zip(models) {
            if model.labels() != (labels[i].as_str(), labels[j].as_str()) || model.rule() != rule {
                return Err(Error::Corrupted(format!(
                    "pair model for ({}, {}) is inconsistent",
                    labels[i], labels[j]
                )));
            }
            out.push((i, j, model));
        }
        Ok(Self {
            rule,
            labels,
            models: out,
            rng_seed,
        })
    }

    /// Votes per label, in `labels()` order.
    pub fn votes(&self, z: &[f64]) -> Result<Vec<usize>> {
        let mut votes = vec![0usize; self.labels.len()];
        for (i, j, model) in &self.models {
            match model.predict(z)? {
                Class::One => votes[*i] += 1,
                Class::Two => votes[*j] += 1,
            }
        }
        Ok(votes)
    }

    pub fn predict<R: Rng + ?Sized>(&self, z: &[f64], rng: &mut R) -> Result<&str> {
        let votes = self.votes(z)?;
        Ok(&self.labels[plurality(&votes, rng)])
    }

    /// Predicts every row; point `k` breaks ties with its own substream of
    /// `(seed, k)`, so the result does not depend on scheduling.
    pub fn predict_batch(&self, points: ArrayView2<'_, f64>, seed: u64) -> Result<Vec<String>> {
        check_dim(self.dim(), points.ncols())?;
        let points = points.as_standard_layout();
        points
            .outer_iter()
            .into_par_iter()
            .enumerate()
            .map(|(k, z)| {
                let mut rng = substream(seed, &[k as u64], Role::TieBreak);
                self.predict(z.as_slice().expect("standard layout"), &mut rng)
                    .map(str::to_string)
            })
            .collect()
    }
}

fn pair_indices(j: usize) -> Vec<(usize, usize)> {
    (0..j).flat_map(|a| ((a + 1)..j).map(move |b| (a, b))).collect()
}

/// Index of the strict maximum, or a uniform draw among tied maxima.
pub fn plurality<R: Rng + ?Sized>(votes: &[usize], rng: &mut R) -> usize {
    let best = votes.iter().copied().max().unwrap_or(0);
    let tied: Vec<usize> = (0..votes.len()).filter(|&i| votes[i] == best).collect();
    if tied.len() == 1 {
        tied[0]
    } else {
        tied[rng.random_range(0..tied.len())]
    }
}

/// Fits one binary model per unordered pair of labels. Labels are sorted, so
/// for each pair the lexicographically smaller label plays class `F`.
pub fn fit_ovo<L: AsRef<str>>(rule: Rule, features: ArrayView2<'_, f64>, labels: &[L], seed: u64) -> Result<OvoEnsemble> {
    check_dim(features.nrows(), labels.len())?;
    let mut vocab: Vec<String> = labels.iter().map(|l| l.as_ref().to_string()).collect();
    vocab.sort();
    vocab.dedup();
    if vocab.len() < 2 {
        return Err(Error::InsufficientSample {
            class: "<distinct labels>".into(),
            count: vocab.len(),
            required: 2,
        });
    }
    let rows_of = |label: &str| -> Result<Array2<f64>> {
        let idx: Vec<usize> = (0..labels.len()).filter(|&r| labels[r].as_ref() == label).collect();
        if idx.len() < 2 {
            return Err(Error::InsufficientSample {
                class: label.to_string(),
                count: idx.len(),
                required: 2,
            });
        }
        Ok(features.select(ndarray::Axis(0), &idx))
    };
    let per_class: Vec<Array2<f64>> = vocab.iter().map(|l| rows_of(l)).collect::<Result<_>>()?;
    let models = pair_indices(vocab.len())
        .into_iter()
        .map(|(i, j)| {
            fit_binary(rule, per_class[i].clone(), per_class[j].clone())
                .map(|m| (i, j, m.with_labels(vocab[i].clone(), vocab[j].clone())))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OvoEnsemble {
        rule,
        labels: vocab,
        models,
        rng_seed: seed,
    })
}

pub fn predict_ovo<'a, R: Rng + ?Sized>(ens: &'a OvoEnsemble, z: &[f64], rng: &mut R) -> Result<&'a str> {
    ens.predict(z, rng)
}

/// Label of the Euclidean-nearest training row; ties go to the lowest index.
pub fn knn1_predict<'a, L>(train: ArrayView2<'_, f64>, labels: &'a [L], z: &[f64]) -> Result<&'a L> {
    if train.nrows() == 0 {
        return Err(Error::EmptyTraining);
    }
    check_dim(train.nrows(), labels.len())?;
    check_dim(train.ncols(), z.len())?;
    let mut best = (0usize, f64::INFINITY);
    for (i, row) in train.outer_iter().enumerate() {
        let d2: f64 = row.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2 < best.1 {
            best = (i, d2);
        }
    }
    Ok(&labels[best.0])
}

/// Equal-prior Bayes rule from the two class log-densities. Ties go to class 1.
pub fn bayes_predict<F, G>(log_f: F, log_g: G, z: &[f64]) -> Result<Class>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> f64,
{
    let (lf, lg) = (log_f(z), log_g(z));
    if lf.is_nan() || lg.is_nan() {
        return Err(Error::NanDensity);
    }
    Ok(if lf >= lg { Class::One } else { Class::Two })
}
