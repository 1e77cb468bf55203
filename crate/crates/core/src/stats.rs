//! Pooled training statistics and per-point discriminants.
//!
//! Two families of statistics are computed from a [`TrainingSet`]:
//!
//! - the vector-level `t̂` family built from `rho_hat`, used by `δ₀`;
//! - the coordinatewise `T̂` family built from `rho_bar_hat`, used by
//!   `δ₁`, `δ₂` and `δ₃`.
//!
//! The anchor pool is always the full training set. The coordinatewise
//! statistics are accumulated as integer betweenness counts and divided once,
//! so they are exactly invariant to the order of the training rows. The
//! vector-level sums are taken over value-sorted terms for the same reason.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angular::{check_dim, rho0_from_sq, squared_distance, strictly_between, AnchorPool};
use crate::{Error, Result};

/// Two labelled samples `X_1..X_m ~ F` and `Y_1..Y_n ~ G`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    class_f: Array2<f64>,
    class_g: Array2<f64>,
}

impl TrainingSet {
    pub fn new(class_f: Array2<f64>, class_g: Array2<f64>) -> Result<Self> {
        for (name, sample) in [("F", &class_f), ("G", &class_g)] {
            if sample.nrows() < 2 {
                return Err(Error::InsufficientSample {
                    class: name.to_string(),
                    count: sample.nrows(),
                    required: 2,
                });
            }
        }
        if class_f.ncols() == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        check_dim(class_f.ncols(), class_g.ncols())?;
        for sample in [&class_f, &class_g] {
            if let Some(((row, column), _)) = sample.indexed_iter().find(|(_, v)| !v.is_finite()) {
                return Err(Error::NonFinite { row, column });
            }
        }
        Ok(Self {
            class_f: class_f.as_standard_layout().into_owned(),
            class_g: class_g.as_standard_layout().into_owned(),
        })
    }

    pub fn m(&self) -> usize {
        self.class_f.nrows()
    }

    pub fn n(&self) -> usize {
        self.class_g.nrows()
    }

    pub fn dim(&self) -> usize {
        self.class_f.ncols()
    }

    /// Class proportion `m / (m + n)`.
    pub fn alpha(&self) -> f64 {
        self.m() as f64 / (self.m() + self.n()) as f64
    }

    pub fn class_f(&self) -> ArrayView2<'_, f64> {
        self.class_f.view()
    }

    pub fn class_g(&self) -> ArrayView2<'_, f64> {
        self.class_g.view()
    }

    pub fn pool(&self) -> AnchorPool<'_> {
        AnchorPool::new(self.class_f.view(), self.class_g.view()).expect("validated at construction")
    }

    /// Anchor `i` in pool order (`X` rows, then `Y` rows).
    fn anchor(&self, i: usize) -> ArrayView1<'_, f64> {
        if i < self.m() {
            self.class_f.row(i)
        } else {
            self.class_g.row(i - self.m())
        }
    }

    fn anchor_count(&self) -> usize {
        self.m() + self.n()
    }

    /// The same data with the two classes exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            class_f: self.class_g.clone(),
            class_g: self.class_f.clone(),
        }
    }
}

/// Precomputed statistics of a fitted binary problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub t_ff: f64,
    pub t_gg: f64,
    pub t_fg: f64,
    #[serde(rename = "T_ff")]
    pub tbar_ff: f64,
    #[serde(rename = "T_gg")]
    pub tbar_gg: f64,
    #[serde(rename = "T_fg")]
    pub tbar_fg: f64,
    /// `2 T̂_FG - T̂_FF - T̂_GG`; may be negative on finite samples.
    pub w_bar_star: f64,
    /// `T̂_FF - T̂_GG`, signed.
    pub s_fg: f64,
}

impl TrainStats {
    fn from_parts(t: [f64; 3], tbar: [f64; 3]) -> Self {
        let [t_ff, t_gg, t_fg] = t;
        let [tbar_ff, tbar_gg, tbar_fg] = tbar;
        Self {
            t_ff,
            t_gg,
            t_fg,
            tbar_ff,
            tbar_gg,
            tbar_fg,
            w_bar_star: w_bar_star(tbar_ff, tbar_gg, tbar_fg),
            s_fg: tbar_ff - tbar_gg,
        }
    }

    /// Checks ranges and the derived-field identities.
    pub fn validate(&self) -> Result<()> {
        let entries = [
            ("t_ff", self.t_ff),
            ("t_gg", self.t_gg),
            ("t_fg", self.t_fg),
            ("T_ff", self.tbar_ff),
            ("T_gg", self.tbar_gg),
            ("T_fg", self.tbar_fg),
        ];
        for (name, v) in entries {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Corrupted(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if self.w_bar_star != w_bar_star(self.tbar_ff, self.tbar_gg, self.tbar_fg)
            || self.s_fg != self.tbar_ff - self.tbar_gg
        {
            return Err(Error::Corrupted("w_bar_star / s_fg inconsistent with T entries".into()));
        }
        Ok(())
    }
}

#[inline]
fn w_bar_star(t_ff: f64, t_gg: f64, t_fg: f64) -> f64 {
    2.0 * t_fg - (t_ff + t_gg)
}

/// Per-test-point values consumed by `δ₁`, `δ₂`, `δ₃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discriminants {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub s_z: f64,
}

/// Population-level separation measures derived from a `T` triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Separation {
    pub w_bar_star: f64,
    pub tau_bar: f64,
    pub psi_bar: f64,
}

/// `(𝒲̄*, τ̄, ψ̄)` from `(T_FF, T_GG, T_FG)`.
pub fn tau_psi_from_t(t_ff: f64, t_gg: f64, t_fg: f64) -> Separation {
    let w = w_bar_star(t_ff, t_gg, t_fg);
    let s = t_ff - t_gg;
    let tau_bar = 0.5 * w * w + 0.5 * s * s;
    debug_assert!(
        ((t_fg - t_ff).powi(2) + (t_fg - t_gg).powi(2) - tau_bar).abs() <= 1e-12,
        "convex-combination identity violated"
    );
    Separation {
        w_bar_star: w,
        tau_bar,
        psi_bar: 0.5 * w + 0.5 * s.abs(),
    }
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[inline]
fn denominator(pairs: usize, anchors: usize, d: usize) -> f64 {
    (pairs * anchors * d) as f64
}

/// Sum whose result depends only on the multiset of terms.
fn order_free_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_unstable_by(f64::total_cmp);
    terms.iter().sum()
}

/// Per-coordinate sorted anchor values.
///
/// For a value `a` at coordinate `k`, `(lo, hi)` are the number of anchors
/// strictly below and at-or-below `a`. The anchors strictly between `a` and
/// `b` number `max(0, lo_b - hi_a, lo_a - hi_b)`.
#[derive(Debug, Clone)]
struct MarginalIndex {
    d: usize,
    anchors: usize,
    /// column `k` occupies `sorted[k * anchors..(k + 1) * anchors]`
    sorted: Vec<f64>,
    /// positions of every anchor, anchor-major
    anchor_pos: Vec<Vec<(u32, u32)>>,
}

impl MarginalIndex {
    fn new(ts: &TrainingSet) -> Self {
        let d = ts.dim();
        let anchors = ts.anchor_count();
        let mut sorted = Vec::with_capacity(d * anchors);
        for k in 0..d {
            let start = sorted.len();
            sorted.extend(ts.class_f.column(k).iter().chain(ts.class_g.column(k).iter()));
            sorted[start..].sort_unstable_by(f64::total_cmp);
        }
        let mut index = Self {
            d,
            anchors,
            sorted,
            anchor_pos: Vec::new(),
        };
        index.anchor_pos = (0..anchors)
            .map(|i| index.positions(ts.anchor(i).as_slice().expect("standard layout")))
            .collect();
        index
    }

    fn positions(&self, z: &[f64]) -> Vec<(u32, u32)> {
        z.iter()
            .enumerate()
            .map(|(k, &v)| {
                let col = &self.sorted[k * self.anchors..(k + 1) * self.anchors];
                let lo = col.partition_point(|&c| c < v);
                let hi = lo + col[lo..].partition_point(|&c| c <= v);
                (lo as u32, hi as u32)
            })
            .collect()
    }

    #[inline]
    fn pair_count(a: &[(u32, u32)], b: &[(u32, u32)]) -> u64 {
        a.iter()
            .zip(b)
            .map(|(&(lo_a, hi_a), &(lo_b, hi_b))| {
                let up = lo_b as i64 - hi_a as i64;
                let down = lo_a as i64 - hi_b as i64;
                up.max(down).max(0) as u64
            })
            .sum()
    }

    /// `[T̂_FF, T̂_GG, T̂_FG]`.
    fn train_stats(&self, m: usize, n: usize) -> [f64; 3] {
        let pos = &self.anchor_pos;
        let within = |range: std::ops::Range<usize>| -> u64 {
            let mut c = 0;
            for i in range.clone() {
                for j in (i + 1)..range.end {
                    c += Self::pair_count(&pos[i], &pos[j]);
                }
            }
            2 * c
        };
        let c_ff = within(0..m);
        let c_gg = within(m..m + n);
        let mut c_fg = 0;
        for i in 0..m {
            for j in m..m + n {
                c_fg += Self::pair_count(&pos[i], &pos[j]);
            }
        }
        [
            c_ff as f64 / denominator(m * (m - 1), self.anchors, self.d),
            c_gg as f64 / denominator(n * (n - 1), self.anchors, self.d),
            c_fg as f64 / denominator(m * n, self.anchors, self.d),
        ]
    }

    /// `[T̂_F(z), T̂_G(z)]` over `anchors + extra` anchors, the extra ones
    /// being copies of `z` that contribute zero.
    fn point_stats(&self, z: &[f64], m: usize, n: usize, extra: usize) -> [f64; 2] {
        let zp = self.positions(z);
        let c_f: u64 = self.anchor_pos[..m].iter().map(|p| Self::pair_count(p, &zp)).sum();
        let c_g: u64 = self.anchor_pos[m..].iter().map(|p| Self::pair_count(p, &zp)).sum();
        [
            c_f as f64 / denominator(m, self.anchors + extra, self.d),
            c_g as f64 / denominator(n, self.anchors + extra, self.d),
        ]
    }
}

/// Vector-level kernel evaluated from pairwise squared distances.
///
/// `cos ∠(u - w, v - w) = (|u-w|² + |v-w|² - |u-v|²) / (2 |u-w| |v-w|)`.
/// In one dimension the exact betweenness test is used instead so the
/// vector and coordinatewise statistics coincide bit for bit.
#[derive(Debug, Clone)]
struct VectorKernel {
    anchors: usize,
    /// anchors × anchors squared distances
    sq: Vec<f64>,
    /// raw anchor values when `d == 1`
    scalar: Option<Vec<f64>>,
}

impl VectorKernel {
    fn new(ts: &TrainingSet) -> Self {
        let anchors = ts.anchor_count();
        let rows: Vec<&[f64]> = (0..anchors)
            .map(|i| ts.anchor(i).to_slice().expect("standard layout"))
            .collect();
        let mut sq = vec![0.0; anchors * anchors];
        for i in 0..anchors {
            for j in (i + 1)..anchors {
                let v = squared_distance(rows[i], rows[j]);
                sq[i * anchors + j] = v;
                sq[j * anchors + i] = v;
            }
        }
        let scalar = (ts.dim() == 1).then(|| rows.iter().map(|r| r[0]).collect());
        Self { anchors, sq, scalar }
    }

    #[inline]
    fn sq(&self, i: usize, j: usize) -> f64 {
        self.sq[i * self.anchors + j]
    }

    /// Sum over anchors `w` of `rho0(anchor_i, anchor_j; w)`, pushed as terms.
    fn pair_terms(&self, i: usize, j: usize, out: &mut Vec<f64>) {
        match &self.scalar {
            Some(vals) => out.extend(
                vals.iter()
                    .map(|&w| if strictly_between(vals[i], vals[j], w) { 1.0 } else { 0.0 }),
            ),
            None => {
                let uv = self.sq(i, j);
                out.extend((0..self.anchors).map(|k| rho0_from_sq(self.sq(i, k), self.sq(j, k), uv)));
            }
        }
    }

    /// `[t̂_FF, t̂_GG, t̂_FG]`.
    fn train_stats(&self, m: usize, n: usize) -> [f64; 3] {
        let within = |range: std::ops::Range<usize>| -> f64 {
            let mut terms = Vec::new();
            for i in range.clone() {
                for j in (i + 1)..range.end {
                    self.pair_terms(i, j, &mut terms);
                }
            }
            2.0 * order_free_sum(terms)
        };
        let s_ff = within(0..m);
        let s_gg = within(m..m + n);
        let mut terms = Vec::with_capacity(m * n * self.anchors);
        for i in 0..m {
            for j in m..m + n {
                self.pair_terms(i, j, &mut terms);
            }
        }
        let s_fg = order_free_sum(terms);
        [
            s_ff / denominator(m * (m - 1), self.anchors, 1),
            s_gg / denominator(n * (n - 1), self.anchors, 1),
            s_fg / denominator(m * n, self.anchors, 1),
        ]
    }

    /// `[t̂_F(z), t̂_G(z)]`.
    fn point_stats(&self, ts: &TrainingSet, z: &[f64], extra: usize) -> [f64; 2] {
        let (m, n) = (ts.m(), ts.n());
        let class_sum = |range: std::ops::Range<usize>| -> f64 {
            let mut terms = Vec::with_capacity(range.len() * self.anchors);
            match &self.scalar {
                Some(vals) => {
                    for i in range {
                        terms.extend(vals.iter().map(|&w| {
                            if strictly_between(vals[i], z[0], w) {
                                1.0
                            } else {
                                0.0
                            }
                        }));
                    }
                }
                None => {
                    let zw: Vec<f64> = (0..self.anchors)
                        .map(|k| squared_distance(ts.anchor(k).to_slice().expect("standard layout"), z))
                        .collect();
                    for i in range {
                        let uv = zw[i];
                        terms.extend((0..self.anchors).map(|k| rho0_from_sq(self.sq(i, k), zw[k], uv)));
                    }
                }
            }
            order_free_sum(terms)
        };
        [
            class_sum(0..m) / denominator(m, self.anchors + extra, 1),
            class_sum(m..m + n) / denominator(n, self.anchors + extra, 1),
        ]
    }
}

/// Anchor pool used when scoring a test point `z`.
///
/// `TrainingOnly` averages over the `m + n` training anchors. `WithTestPoint`
/// adds `z` itself, which contributes zero, so every statistic is scaled by
/// `(m + n) / (m + n + 1)`. A training pair always has its own two points
/// among the anchors; adding `z` gives a test pair the same footing, and it
/// is the variant that reproduces the published error rates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorPolicy {
    TrainingOnly,
    #[default]
    WithTestPoint,
}

impl AnchorPolicy {
    fn extra(self) -> usize {
        match self {
            AnchorPolicy::TrainingOnly => 0,
            AnchorPolicy::WithTestPoint => 1,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            AnchorPolicy::TrainingOnly => "training",
            AnchorPolicy::WithTestPoint => "with-test-point",
        }
    }
}

impl std::fmt::Display for AnchorPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.token())
    }
}

impl std::str::FromStr for AnchorPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "training" | "training_only" => Ok(AnchorPolicy::TrainingOnly),
            "with-test-point" | "with_test_point" => Ok(AnchorPolicy::WithTestPoint),
            _ => Err(Error::invalid(format!("unknown anchor policy {s:?}"))),
        }
    }
}

/// A training set together with the indices needed to score test points.
#[derive(Debug, Clone)]
pub struct StatsEngine {
    training: TrainingSet,
    marginal: MarginalIndex,
    vector: VectorKernel,
    stats: TrainStats,
    policy: AnchorPolicy,
}

impl StatsEngine {
    pub fn new(training: TrainingSet) -> Self {
        let marginal = MarginalIndex::new(&training);
        let vector = VectorKernel::new(&training);
        let (m, n) = (training.m(), training.n());
        let stats = TrainStats::from_parts(vector.train_stats(m, n), marginal.train_stats(m, n));
        Self {
            training,
            marginal,
            vector,
            stats,
            policy: AnchorPolicy::default(),
        }
    }

    pub fn with_policy(mut self, policy: AnchorPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn policy(&self) -> AnchorPolicy {
        self.policy
    }

    pub fn training(&self) -> &TrainingSet {
        &self.training
    }

    pub fn stats(&self) -> &TrainStats {
        &self.stats
    }

    /// `l_G(z) - l_F(z)` for `δ₀`.
    pub fn delta0_score(&self, z: &[f64]) -> Result<f64> {
        check_dim(self.training.dim(), z.len())?;
        let [t_f, t_g] = self.vector.point_stats(&self.training, z, self.policy.extra());
        Ok(delta0_from_parts(t_f, t_g, &self.stats))
    }

    pub fn discriminants(&self, z: &[f64]) -> Result<Discriminants> {
        check_dim(self.training.dim(), z.len())?;
        let [t_f, t_g] = self
            .marginal
            .point_stats(z, self.training.m(), self.training.n(), self.policy.extra());
        Ok(discriminants_from_parts(t_f, t_g, &self.stats))
    }

    pub fn discriminants_batch(&self, points: ArrayView2<'_, f64>) -> Result<Vec<Discriminants>> {
        check_dim(self.training.dim(), points.ncols())?;
        let points = points.as_standard_layout();
        points
            .outer_iter()
            .into_par_iter()
            .map(|z| self.discriminants(z.as_slice().expect("standard layout")))
            .collect()
    }
}

fn delta0_from_parts(t_f: f64, t_g: f64, stats: &TrainStats) -> f64 {
    let l_f = t_f - 0.5 * stats.t_ff;
    let l_g = t_g - 0.5 * stats.t_gg;
    l_g - l_f
}

fn discriminants_from_parts(t_f: f64, t_g: f64, stats: &TrainStats) -> Discriminants {
    let l_f = t_f - 0.5 * stats.tbar_ff;
    let l_g = t_g - 0.5 * stats.tbar_gg;
    let s_z = (t_f + t_g) - 0.5 * (stats.tbar_ff + stats.tbar_gg) - stats.tbar_fg;
    let d1 = l_g - l_f;
    let d2 = 0.5 * stats.w_bar_star * d1 + 0.5 * stats.s_fg * s_z;
    let d3 = 0.5 * stats.w_bar_star * sign(d1) + 0.5 * stats.s_fg * sign(s_z);
    Discriminants { d1, d2, d3, s_z }
}

pub fn compute_train_stats(ts: &TrainingSet) -> TrainStats {
    let (m, n) = (ts.m(), ts.n());
    TrainStats::from_parts(
        VectorKernel::new(ts).train_stats(m, n),
        MarginalIndex::new(ts).train_stats(m, n),
    )
}

/// `l_G(z) - l_F(z)` using caller-supplied statistics.
pub fn point_stats_delta0(z: &[f64], ts: &TrainingSet, stats: &TrainStats) -> Result<f64> {
    check_dim(ts.dim(), z.len())?;
    let [t_f, t_g] = VectorKernel::new(ts).point_stats(ts, z, 0);
    Ok(delta0_from_parts(t_f, t_g, stats))
}

pub fn point_discriminants(z: &[f64], ts: &TrainingSet, stats: &TrainStats) -> Result<Discriminants> {
    check_dim(ts.dim(), z.len())?;
    let [t_f, t_g] = MarginalIndex::new(ts).point_stats(z, ts.m(), ts.n(), 0);
    Ok(discriminants_from_parts(t_f, t_g, stats))
}
