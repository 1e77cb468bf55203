//! Angular-distance kernels.
//!
//! `rho0_vec(u, v; w)` is the angle at the anchor `w` between `u - w` and
//! `v - w`, scaled to `[0, 1]`. It is zero whenever `u` or `v` coincides with
//! the anchor. In one dimension the angle is either `0` or `π`, so the kernel
//! reduces to a strict betweenness test ([`rho0_scalar`]).

use ndarray::ArrayView2;

use crate::{Error, Result};

/// `acos` with its argument clamped to `[-1, 1]`.
#[inline]
pub fn safe_acos(x: f64) -> f64 {
    x.clamp(-1.0, 1.0).acos()
}

/// Normalised angle at `w` between `u - w` and `v - w`.
pub fn rho0_vec(u: &[f64], v: &[f64], w: &[f64]) -> Result<f64> {
    check_dim(u.len(), v.len())?;
    check_dim(u.len(), w.len())?;
    Ok(rho0_vec_unchecked(u, v, w))
}

pub(crate) fn rho0_vec_unchecked(u: &[f64], v: &[f64], w: &[f64]) -> f64 {
    if u == w || v == w {
        return 0.0;
    }
    let (nu, nv) = (squared_distance(u, w).sqrt(), squared_distance(v, w).sqrt());
    if nu == 0.0 || nv == 0.0 {
        // underflow without exact coincidence
        return 0.0;
    }
    // angle = 2 atan2(|û - v̂|, |û + v̂|), exact at 0 and π in one dimension
    let (mut diff, mut sum) = (0.0, 0.0);
    for ((&a, &b), &c) in u.iter().zip(v).zip(w) {
        let (eu, ev) = ((a - c) / nu, (b - c) / nv);
        diff += (eu - ev) * (eu - ev);
        sum += (eu + ev) * (eu + ev);
    }
    2.0 * diff.sqrt().atan2(sum.sqrt()) / std::f64::consts::PI
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Normalised angle at `w` in the triangle with squared side lengths `uw`,
/// `vw`, `uv`. Works on the squared lengths directly,
/// `θ = atan2(√(4·uw·vw − n²), n)` with `n = uw + vw − uv`, so data whose
/// squared distances are exact (integer grids) give exactly `0` or `π` on
/// collinear triples. Inputs are rescaled by a power of two first.
#[inline]
pub(crate) fn rho0_from_sq(uw: f64, vw: f64, uv: f64) -> f64 {
    if uw == 0.0 || vw == 0.0 {
        return 0.0;
    }
    let top = uw.max(vw).max(uv);
    let k = 2f64.powi(-(top.log2().floor() as i32));
    let (a, b, c) = (uw * k, vw * k, uv * k);
    let n = (a + b) - c;
    let s2 = 4.0 * a * b - n * n;
    if s2 <= 0.0 {
        return if n >= 0.0 { 0.0 } else { 1.0 };
    }
    s2.sqrt().atan2(n) / std::f64::consts::PI
}

/// One-dimensional kernel: `1` when the anchor `c` lies strictly between
/// `a` and `b`, `0` otherwise.
#[inline]
pub fn rho0_scalar(a: f64, b: f64, c: f64) -> f64 {
    if strictly_between(a, b, c) {
        1.0
    } else {
        0.0
    }
}

#[inline]
pub(crate) fn strictly_between(a: f64, b: f64, c: f64) -> bool {
    (a < c && c < b) || (b < c && c < a)
}

/// The pooled sample `X_1..X_m, Y_1..Y_n` used as anchors.
#[derive(Debug, Clone, Copy)]
pub struct AnchorPool<'a> {
    x: ArrayView2<'a, f64>,
    y: ArrayView2<'a, f64>,
}

impl<'a> AnchorPool<'a> {
    pub fn new(x: ArrayView2<'a, f64>, y: ArrayView2<'a, f64>) -> Result<Self> {
        if x.nrows() == 0 || y.nrows() == 0 {
            return Err(Error::EmptyPool);
        }
        check_dim(x.ncols(), y.ncols())?;
        Ok(Self { x, y })
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn len(&self) -> usize {
        self.x.nrows() + self.y.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All anchors, `X` rows first.
    pub fn rows(&self) -> impl Iterator<Item = ndarray::ArrayView1<'a, f64>> {
        let (x, y) = (self.x, self.y);
        let row = |a: ArrayView2<'a, f64>, i| a.index_axis_move(ndarray::Axis(0), i);
        (0..x.nrows()).map(move |i| row(x, i)).chain((0..y.nrows()).map(move |i| row(y, i)))
    }
}

/// Sample version of the data-adaptive angular distance: the average of
/// `rho0_vec(u, v; w)` over every anchor in the pool.
///
/// Anchors equal to `u` or `v` are kept in the average and contribute zero.
pub fn rho_hat(u: &[f64], v: &[f64], pool: &AnchorPool<'_>) -> Result<f64> {
    check_dim(pool.dim(), u.len())?;
    check_dim(pool.dim(), v.len())?;
    let mut sum = 0.0;
    for w in pool.rows() {
        let w = w.to_vec();
        sum += rho0_vec_unchecked(u, v, &w);
    }
    Ok(sum / pool.len() as f64)
}

/// Coordinatewise average of the one-dimensional [`rho_hat`].
///
/// Every term is a betweenness indicator, so the value is
/// `count / ((m + n) d)` for an integer `count`.
pub fn rho_bar_hat(u: &[f64], v: &[f64], pool: &AnchorPool<'_>) -> Result<f64> {
    let d = pool.dim();
    check_dim(d, u.len())?;
    check_dim(d, v.len())?;
    let mut count: u64 = 0;
    for w in pool.rows() {
        for k in 0..d {
            count += strictly_between(u[k], v[k], w[k]) as u64;
        }
    }
    Ok(count as f64 / (pool.len() as f64 * d as f64))
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn safe_acos_clamps() {
        assert_eq!(safe_acos(1.0), 0.0);
        assert_eq!(safe_acos(1.0 + 1e-15), 0.0);
        assert_eq!(safe_acos(-1.0 - 1e-12), PI);
        assert_eq!(safe_acos(0.0), PI / 2.0);
    }

    #[test]
    fn rho0_vec_examples() {
        assert_abs_diff_eq!(rho0_vec(&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0]).unwrap(), 0.5);
        assert_eq!(rho0_vec(&[3.0, 3.0], &[1.0, 2.0], &[3.0, 3.0]).unwrap(), 0.0);
        assert_eq!(rho0_vec(&[1.0, 1.0], &[-1.0, -1.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert!(matches!(
            rho0_vec(&[1.0], &[1.0, 2.0], &[0.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rho0_scalar_examples() {
        assert_eq!(rho0_scalar(2.0, 5.0, 3.0), 1.0);
        assert_eq!(rho0_scalar(2.0, 5.0, 1.0), 0.0);
        assert_eq!(rho0_scalar(2.0, 5.0, 2.0), 0.0);
        assert_eq!(rho0_scalar(5.0, 2.0, 3.0), 1.0);
    }

    #[test]
    fn rho_hat_examples() {
        let x = array![[0.0, 0.0]];
        let y = array![[2.0, 0.0]];
        let pool = AnchorPool::new(x.view(), y.view()).unwrap();
        assert_abs_diff_eq!(rho_hat(&[0.0, 2.0], &[2.0, 2.0], &pool).unwrap(), 0.25, epsilon = 1e-15);
        assert_eq!(rho_hat(&[0.7, -3.0], &[0.7, -3.0], &pool).unwrap(), 0.0);

        let x = array![[0.0]];
        let y = array![[2.0]];
        let pool = AnchorPool::new(x.view(), y.view()).unwrap();
        // both anchors lie outside [0.5, 1.5]
        assert_eq!(rho_hat(&[0.5], &[1.5], &pool).unwrap(), 0.0);
        assert_eq!(rho_hat(&[0.5], &[2.5], &pool).unwrap(), 0.5);
    }

    #[test]
    fn rho_bar_hat_examples() {
        let x = array![[0.0], [2.0]];
        let y = array![[1.0], [3.0]];
        let pool = AnchorPool::new(x.view(), y.view()).unwrap();
        assert_eq!(rho_bar_hat(&[0.0], &[2.0], &pool).unwrap(), 0.25);
        assert_eq!(rho_bar_hat(&[0.0], &[3.0], &pool).unwrap(), 0.5);
        for (u, v) in [(0.0, 2.0), (0.0, 3.0), (-1.0, 2.5), (1.0, 1.0)] {
            assert_eq!(
                rho_bar_hat(&[u], &[v], &pool).unwrap(),
                rho_hat(&[u], &[v], &pool).unwrap()
            );
        }
    }

    #[test]
    fn empty_pool_is_rejected() {
        let x = Array2::<f64>::zeros((0, 2));
        let y = array![[1.0, 2.0]];
        assert!(matches!(AnchorPool::new(x.view(), y.view()), Err(Error::EmptyPool)));
    }

    fn vec_strategy(d: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, d)
    }

    proptest! {
        #[test]
        fn rho0_vec_symmetric_and_bounded(
            (u, v, w) in (1usize..6).prop_flat_map(|d| (vec_strategy(d), vec_strategy(d), vec_strategy(d)))
        ) {
            let a = rho0_vec(&u, &v, &w).unwrap();
            let b = rho0_vec(&v, &u, &w).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn rho0_vec_scale_invariant(
            (u, v, w) in (2usize..6).prop_flat_map(|d| (vec_strategy(d), vec_strategy(d), vec_strategy(d))),
            a in 0.1f64..10.0,
            b in 0.1f64..10.0,
        ) {
            let su: Vec<f64> = u.iter().zip(&w).map(|(x, c)| c + a * (x - c)).collect();
            let sv: Vec<f64> = v.iter().zip(&w).map(|(x, c)| c + b * (x - c)).collect();
            let lhs = rho0_vec(&su, &sv, &w).unwrap();
            let rhs = rho0_vec(&u, &v, &w).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-7, "{} vs {}", lhs, rhs);
        }

        #[test]
        fn rho0_vec_matches_scalar_in_one_dimension(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0) {
            prop_assert_eq!(rho0_vec(&[a], &[b], &[c]).unwrap(), rho0_scalar(a, b, c));
        }

        #[test]
        fn rho0_scalar_matches_integer_grid(a in -3i32..3, b in -3i32..3, c in -3i32..3) {
            // integer grid hits every equality branch
            let (a, b, c) = (a as f64, b as f64, c as f64);
            prop_assert_eq!(rho0_vec(&[a], &[b], &[c]).unwrap(), rho0_scalar(a, b, c));
        }

        #[test]
        fn pooled_estimators_symmetric(
            seed in any::<u64>(),
            d in 1usize..5,
            m in 1usize..4,
            n in 1usize..4,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x = Array2::from_shape_fn((m, d), |_| rng.random_range(-2.0..2.0));
            let y = Array2::from_shape_fn((n, d), |_| rng.random_range(-2.0..2.0));
            let u: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let v: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let pool = AnchorPool::new(x.view(), y.view()).unwrap();
            let r = rho_hat(&u, &v, &pool).unwrap();
            prop_assert_eq!(r, rho_hat(&v, &u, &pool).unwrap());
            prop_assert!((0.0..=1.0).contains(&r));
            let rb = rho_bar_hat(&u, &v, &pool).unwrap();
            prop_assert_eq!(rb, rho_bar_hat(&v, &u, &pool).unwrap());
            prop_assert!((0.0..=1.0).contains(&rb));

            // brute force through one-dimensional rho0_vec slices
            let mut count = 0.0;
            for w in pool.rows() {
                for k in 0..d {
                    count += rho0_vec(&[u[k]], &[v[k]], &[w[k]]).unwrap();
                }
            }
            prop_assert_eq!(rb, count / ((m + n) as f64 * d as f64));
        }
    }
}
