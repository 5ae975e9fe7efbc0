//! Maximization of a bilinear form `x^T B y` over the product of two sign cubes.
//!
//! The form is bilinear, so its maximum over `[-1, 1]^r x [-1, 1]^c` is attained at
//! vertices, and for a fixed `x` the best `y` is `sign(B^T x)`, giving `||B^T x||_1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::real::Real;

/// Largest `rows + cols` for which [`cube_max`] enumerates exhaustively.
pub const EXACT_LIMIT: usize = 26;

#[derive(Clone, Debug, PartialEq)]
pub struct CubeMax<T> {
    pub value: T,
    pub x: Vec<i8>,
    pub y: Vec<i8>,
    /// `false` when the value comes from the local search and is only a lower bound.
    pub exact: bool,
}

fn sign<T: Real>(v: T) -> i8 {
    if v < T::zero() {
        -1
    } else {
        1
    }
}

/// `(||B^T x||_1, sign(B^T x))` for a row-major `rows x cols` matrix.
fn best_y<T: Real>(b: &[T], rows: usize, cols: usize, x: &[i8]) -> (T, Vec<i8>) {
    let mut s = vec![T::zero(); cols];
    for i in 0..rows {
        let xi = T::lit(x[i] as f64);
        for (sj, &bij) in s.iter_mut().zip(&b[i * cols..(i + 1) * cols]) {
            *sj = *sj + xi * bij;
        }
    }
    let value = s.iter().fold(T::zero(), |a, v| a + v.abs());
    (value, s.iter().map(|&v| sign(v)).collect())
}

fn transpose<T: Real>(b: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut t = vec![T::zero(); b.len()];
    for i in 0..rows {
        for j in 0..cols {
            t[j * rows + i] = b[i * cols + j];
        }
    }
    t
}

/// Exhaustive maximum over the smaller sign cube with the closed-form optimal partner.
///
/// Enumerates `2^(k-1)` vectors in Gray-code order, `k = min(rows, cols)`;
/// the first sign is fixed since `(x, y)` and `(-x, -y)` give the same value.
pub fn cube_max_exact<T: Real>(b: &[T], rows: usize, cols: usize) -> CubeMax<T> {
    assert_eq!(b.len(), rows * cols);
    if rows == 0 || cols == 0 {
        return CubeMax { value: T::zero(), x: vec![1; rows], y: vec![1; cols], exact: true };
    }
    if cols < rows {
        let m = cube_max_exact(&transpose(b, rows, cols), cols, rows);
        return CubeMax { value: m.value, x: m.y, y: m.x, exact: true };
    }
    let mut x = vec![1i8; rows];
    let mut s = vec![T::zero(); cols];
    for i in 0..rows {
        for (sj, &bij) in s.iter_mut().zip(&b[i * cols..(i + 1) * cols]) {
            *sj = *sj + bij;
        }
    }
    let l1 = |s: &[T]| s.iter().fold(T::zero(), |a, v| a + v.abs());
    let mut best = l1(&s);
    let mut best_x = x.clone();
    let two = T::lit(2.0);
    for g in 1u64..(1u64 << (rows - 1)) {
        let i = g.trailing_zeros() as usize + 1;
        x[i] = -x[i];
        let delta = if x[i] > 0 { two } else { -two };
        for (sj, &bij) in s.iter_mut().zip(&b[i * cols..(i + 1) * cols]) {
            *sj = *sj + delta * bij;
        }
        let v = l1(&s);
        if v > best {
            best = v;
            best_x.copy_from_slice(&x);
        }
    }
    let (value, y) = best_y(b, rows, cols, &best_x);
    CubeMax { value, x: best_x, y, exact: true }
}

/// Alternating sign updates from `starts` seeded random initial vectors.
///
/// The result is attained by its witnesses, hence a certified lower bound.
pub fn cube_max_heuristic<T: Real>(b: &[T], rows: usize, cols: usize, starts: usize, seed: u64) -> CubeMax<T> {
    assert_eq!(b.len(), rows * cols);
    let bt = transpose(b, rows, cols);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = CubeMax { value: T::neg_infinity(), x: vec![1; rows], y: vec![1; cols], exact: false };
    for _ in 0..starts.max(1) {
        let mut x: Vec<i8> = (0..rows).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
        let mut value = T::neg_infinity();
        loop {
            let (vy, y) = best_y(b, rows, cols, &x);
            let (vx, nx) = best_y(&bt, cols, rows, &y);
            if vx <= value {
                break;
            }
            value = vx.max(vy);
            x = nx;
            if value > best.value {
                let (v, y2) = best_y(b, rows, cols, &x);
                best = CubeMax { value: v, x: x.clone(), y: y2, exact: false };
            }
        }
    }
    best
}

/// Exact up to [`EXACT_LIMIT`] total dimension, local search above it.
pub fn cube_max<T: Real>(b: &[T], rows: usize, cols: usize, seed: u64) -> CubeMax<T> {
    if rows + cols <= EXACT_LIMIT {
        cube_max_exact(b, rows, cols)
    } else {
        cube_max_heuristic(b, rows, cols, 32, seed)
    }
}

/// Value of `x^T B y`.
pub fn bilinear<T: Real>(b: &[T], rows: usize, cols: usize, x: &[i8], y: &[i8]) -> T {
    let mut acc = T::zero();
    for i in 0..rows {
        for j in 0..cols {
            acc = acc + T::lit((x[i] * y[j]) as f64) * b[i * cols + j];
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest};

    fn brute(b: &[f64], rows: usize, cols: usize) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for mx in 0..(1u32 << rows) {
            let x: Vec<i8> = (0..rows).map(|i| if mx >> i & 1 == 1 { -1 } else { 1 }).collect();
            for my in 0..(1u32 << cols) {
                let y: Vec<i8> = (0..cols).map(|j| if my >> j & 1 == 1 { -1 } else { 1 }).collect();
                best = best.max(bilinear(b, rows, cols, &x, &y));
            }
        }
        best
    }

    #[test]
    fn single_pair_gives_twice_the_bracket() {
        // B for f1, f2 with {f1, f2} = b
        let b = 0.7f64;
        let m = [0.0, b, -b, 0.0];
        let r = cube_max_exact(&m, 2, 2);
        assert!((r.value - 2.0 * b).abs() < 1e-15);
        assert!((bilinear(&m, 2, 2, &r.x, &r.y) - r.value).abs() < 1e-15);
    }

    #[test]
    fn empty_and_zero() {
        assert_eq!(cube_max_exact::<f64>(&[], 0, 3).value, 0.0);
        assert_eq!(cube_max_exact(&[0.0; 6], 2, 3).value, 0.0);
    }

    proptest! {
        #[test]
        fn exact_matches_brute_force(rows in 1usize..6, cols in 1usize..6, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let e = cube_max_exact(&b, rows, cols);
            prop_assert!((e.value - brute(&b, rows, cols)).abs() < 1e-12);
            prop_assert!((bilinear(&b, rows, cols, &e.x, &e.y) - e.value).abs() < 1e-12);
            let h = cube_max_heuristic(&b, rows, cols, 32, seed);
            prop_assert!(h.value <= e.value + 1e-12);
        }
    }
}
