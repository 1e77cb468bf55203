//! Brute-force reference implementations used as test oracles.
//!
//! Everything here goes through the public per-triple kernels only, with
//! plain nested loops and no indexing tricks.

#![allow(dead_code)]

use hdlss_energy::angular::{rho0_vec, rho_hat, AnchorPool};
use hdlss_energy::stats::{AnchorPolicy, TrainingSet};
use ndarray::{concatenate, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Coordinatewise statistics counted with `rho0_vec` on 1-D slices.
/// Every term is exactly 0 or 1, so the count is exact and a single
/// division reproduces the fast path bit for bit.
pub fn bar_count(u: &[f64], v: &[f64], anchors: &Array2<f64>) -> f64 {
    let mut c = 0.0;
    for w in anchors.outer_iter() {
        for k in 0..u.len() {
            c += rho0_vec(&[u[k]], &[v[k]], &[w[k]]).unwrap();
        }
    }
    c
}

pub fn pooled(ts: &TrainingSet) -> Array2<f64> {
    concatenate(Axis(0), &[ts.class_f(), ts.class_g()]).unwrap()
}

pub struct NaiveTrain {
    pub t_ff: f64,
    pub t_gg: f64,
    pub t_fg: f64,
    pub tbar_ff: f64,
    pub tbar_gg: f64,
    pub tbar_fg: f64,
}

pub fn naive_train(ts: &TrainingSet) -> NaiveTrain {
    let (m, n, d) = (ts.m(), ts.n(), ts.dim());
    let anchors = pooled(ts);
    let pool = AnchorPool::new(ts.class_f(), ts.class_g()).unwrap();
    let row = |a: ndarray::ArrayView2<'_, f64>, i: usize| a.row(i).to_vec();
    let (x, y) = (ts.class_f(), ts.class_g());
    let big = (m + n) as f64;

    let (mut s_ff, mut c_ff) = (0.0, 0.0);
    for i in 0..m {
        for j in 0..m {
            if i != j {
                s_ff += rho_hat(&row(x, i), &row(x, j), &pool).unwrap();
                c_ff += bar_count(&row(x, i), &row(x, j), &anchors);
            }
        }
    }
    let (mut s_gg, mut c_gg) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s_gg += rho_hat(&row(y, i), &row(y, j), &pool).unwrap();
                c_gg += bar_count(&row(y, i), &row(y, j), &anchors);
            }
        }
    }
    let (mut s_fg, mut c_fg) = (0.0, 0.0);
    for i in 0..m {
        for j in 0..n {
            s_fg += rho_hat(&row(x, i), &row(y, j), &pool).unwrap();
            c_fg += bar_count(&row(x, i), &row(y, j), &anchors);
        }
    }
    let den = |pairs: usize| (pairs * (m + n) * d) as f64;
    let _ = big;
    NaiveTrain {
        t_ff: s_ff / (m * (m - 1)) as f64,
        t_gg: s_gg / (n * (n - 1)) as f64,
        t_fg: s_fg / (m * n) as f64,
        tbar_ff: c_ff / den(m * (m - 1)),
        tbar_gg: c_gg / den(n * (n - 1)),
        tbar_fg: c_fg / den(m * n),
    }
}

/// `(t_F(z), t_G(z), T_F(z), T_G(z))`, with `z` appended to the anchors
/// under `WithTestPoint`.
pub fn naive_point(ts: &TrainingSet, z: &[f64], policy: AnchorPolicy) -> [f64; 4] {
    let (m, n, d) = (ts.m(), ts.n(), ts.dim());
    let zrow = Array2::from_shape_vec((1, d), z.to_vec()).unwrap();
    let y_pool = match policy {
        AnchorPolicy::TrainingOnly => ts.class_g().to_owned(),
        AnchorPolicy::WithTestPoint => concatenate(Axis(0), &[ts.class_g(), zrow.view()]).unwrap(),
    };
    let pool = AnchorPool::new(ts.class_f(), y_pool.view()).unwrap();
    let anchors = concatenate(Axis(0), &[ts.class_f(), y_pool.view()]).unwrap();
    let total = anchors.nrows();
    let mut out = [0.0; 4];
    for (slot, class, size) in [(0usize, ts.class_f(), m), (1, ts.class_g(), n)] {
        let (mut s, mut c) = (0.0, 0.0);
        for r in class.outer_iter() {
            let r = r.to_vec();
            s += rho_hat(&r, z, &pool).unwrap();
            c += bar_count(&r, z, &anchors);
        }
        out[slot] = s / size as f64;
        out[2 + slot] = c / (size * total * d) as f64;
    }
    out
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, shift: f64, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| {
        let z: f64 = rng.sample(rand_distr::StandardNormal);
        shift + scale * z
    })
}

pub fn grid_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-3i32..=3) as f64)
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `(δ₀ score, d1, d2, d3)` straight from the definitions.
pub fn naive_scores(ts: &TrainingSet, z: &[f64], policy: AnchorPolicy) -> [f64; 4] {
    let t = naive_train(ts);
    let [tf, tg, bf, bg] = naive_point(ts, z, policy);
    let delta0 = (tg - 0.5 * t.t_gg) - (tf - 0.5 * t.t_ff);
    let d1 = (bg - 0.5 * t.tbar_gg) - (bf - 0.5 * t.tbar_ff);
    let s = (bf + bg) - 0.5 * (t.tbar_ff + t.tbar_gg) - t.tbar_fg;
    let w = 2.0 * t.tbar_fg - t.tbar_ff - t.tbar_gg;
    let sfg = t.tbar_ff - t.tbar_gg;
    [
        delta0,
        d1,
        0.5 * w * d1 + 0.5 * sfg * s,
        0.5 * w * sgn(d1) + 0.5 * sfg * sgn(s),
    ]
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}
