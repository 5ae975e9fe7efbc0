//! Linear algebra in the standard symplectic space `R^{2n}`.
//!
//! Coordinates are ordered `(q1, p1, ..., qn, pn)`. The complex structure is
//! `J0 (q, p) = (p, -q)` on each pair, so that `omega0(a, b) = <a, J0 b>` and
//! `omega0(e_q1, e_p1) = 1`.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::cube::{cube_max_exact, cube_max_heuristic, CubeMax};
use crate::dense::{dot, norm, Mat};
use crate::error::{Error, Result};
use crate::real::Real;

/// Largest family size solved by exhaustive enumeration.
pub const EXACT_FAMILY_LIMIT: usize = 24;
/// Relative singular value below which a direction counts as kernel.
pub const RANK_TOL: f64 = 1e-9;

pub fn omega0<T: Real>(u: &[T], v: &[T]) -> T {
    assert_eq!(u.len(), v.len());
    assert!(u.len().is_multiple_of(2));
    u.chunks_exact(2).zip(v.chunks_exact(2)).fold(T::zero(), |s, (a, b)| s + (a[0] * b[1] - a[1] * b[0]))
}

pub fn apply_j0<T: Real>(u: &[T]) -> Vec<T> {
    u.chunks_exact(2).flat_map(|a| [a[1], -a[0]]).collect()
}

/// Matrix of `J0`.
pub fn j0_matrix<T: Real>(n: usize) -> Mat<T> {
    Mat::from_fn(2 * n, |i, j| {
        if i % 2 == 0 && j == i + 1 {
            T::one()
        } else if i % 2 == 1 && j + 1 == i {
            -T::one()
        } else {
            T::zero()
        }
    })
}

/// `N` vectors in `R^{2n}` with their antisymmetric Gram matrix `A_ij = omega0(v_i, v_j)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SympVectorSet<T> {
    n: usize,
    vectors: Vec<Vec<T>>,
    gram: Vec<T>,
}

impl<T: Real> SympVectorSet<T> {
    pub fn new(n: usize, vectors: Vec<Vec<T>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("half-dimension must be positive".into()));
        }
        if let Some(v) = vectors.iter().find(|v| v.len() != 2 * n) {
            return Err(Error::InvalidArgument(format!("vector of length {} in R^{}", v.len(), 2 * n)));
        }
        if vectors.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coordinate".into()));
        }
        let m = vectors.len();
        let mut gram = vec![T::zero(); m * m];
        for i in 0..m {
            for j in i + 1..m {
                let w = omega0(&vectors[i], &vectors[j]);
                gram[i * m + j] = w;
                gram[j * m + i] = -w;
            }
        }
        Ok(Self { n, vectors, gram })
    }

    /// `count` vectors with independent standard normal coordinates.
    pub fn random_gaussian(n: usize, count: usize, rng: &mut ChaCha8Rng) -> Self {
        let vectors = (0..count).map(|_| (0..2 * n).map(|_| T::lit(StandardNormal.sample(rng))).collect()).collect();
        Self::new(n, vectors).expect("gaussian vectors are finite")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[Vec<T>] {
        &self.vectors
    }

    /// Row-major `N x N` Gram matrix.
    pub fn gram(&self) -> &[T] {
        &self.gram
    }

    pub fn transformed(&self, s: &Mat<T>) -> Self {
        Self::new(self.n, self.vectors.iter().map(|v| s.apply(v)).collect()).expect("linear image is finite")
    }

    pub fn norm_sum(&self) -> T {
        self.vectors.iter().map(|v| norm(v)).fold(T::zero(), |a, b| a + b)
    }
}

/// `max_{x, y in [-1,1]^N} omega0(sum x_i v_i, sum y_j v_j)` with sign witnesses.
///
/// Exhaustive up to [`EXACT_FAMILY_LIMIT`] vectors, seeded local search beyond.
pub fn max_bilinear_cube<T: Real>(vs: &SympVectorSet<T>) -> CubeMax<T> {
    let m = vs.len();
    if m <= EXACT_FAMILY_LIMIT {
        cube_max_exact(&vs.gram, m, m)
    } else {
        cube_max_heuristic(&vs.gram, m, m, 32, 0)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CubeRatio<T> {
    pub max_bilinear: T,
    pub sum_abs_gram: T,
    /// `None` when the Gram matrix vanishes and the inequality is vacuous.
    pub ratio: Option<T>,
}

pub fn cube_ratio<T: Real>(vs: &SympVectorSet<T>) -> CubeRatio<T> {
    let max_bilinear = max_bilinear_cube(vs).value;
    let sum_abs_gram = vs.gram.iter().fold(T::zero(), |a, v| a + v.abs());
    let ratio = (sum_abs_gram > T::zero()).then(|| max_bilinear / sum_abs_gram);
    CubeRatio { max_bilinear, sum_abs_gram, ratio }
}

/// Singular values (descending) and right singular vectors of a row-major
/// `rows x cols` matrix, by one-sided Jacobi on its columns.
pub fn right_singular<T: Real>(x: &[T], rows: usize, cols: usize) -> (Vec<T>, Mat<T>) {
    let mut a: Vec<Vec<T>> = (0..cols).map(|c| (0..rows).map(|r| x[r * cols + c]).collect()).collect();
    let mut v = Mat::identity(cols);
    let eps = T::epsilon();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = dot(&a[p], &a[p]);
                let beta = dot(&a[q], &a[q]);
                let gamma = dot(&a[p], &a[q]);
                if gamma.abs() <= eps * (alpha * beta).sqrt() || gamma == T::zero() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for r in 0..rows {
                    let (ap, aq) = (a[p][r], a[q][r]);
                    a[p][r] = c * ap - s * aq;
                    a[q][r] = s * ap + c * aq;
                }
                for r in 0..cols {
                    let (vp, vq) = (v[(r, p)], v[(r, q)]);
                    v[(r, p)] = c * vp - s * vq;
                    v[(r, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma: Vec<T> = a.iter().map(|c| norm(c)).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).unwrap_or(std::cmp::Ordering::Equal));
    let sorted = order.iter().map(|&i| sigma[i]).collect();
    (sorted, Mat::from_fn(cols, |r, c| v[(r, order[c])]))
}

/// Number of singular values above `tol * scale`, failing when one sits within a decade of the threshold.
fn numerical_rank<T: Real>(sigma: &[T], scale: T) -> Result<usize> {
    if scale <= T::zero() {
        return Ok(0);
    }
    let tol = T::lit(RANK_TOL);
    let mut rank = 0;
    for &s in sigma {
        let r = s / scale;
        if r > tol * T::lit(10.0) {
            rank += 1;
        } else if r >= tol / T::lit(10.0) {
            return Err(Error::RankAmbiguous(r.f64()));
        }
    }
    Ok(rank)
}

/// Orthonormal basis (as columns) of the span of the vectors.
fn span_basis<T: Real>(vs: &SympVectorSet<T>) -> Result<Vec<Vec<T>>> {
    let d = 2 * vs.n;
    let flat: Vec<T> = vs.vectors.iter().flatten().copied().collect();
    let (sigma, v) = right_singular(&flat, vs.len(), d);
    let rank = numerical_rank(&sigma, sigma.first().copied().unwrap_or(T::zero()))?;
    Ok((0..rank).map(|c| v.column(c)).collect())
}

/// Projects every vector along the isotropic kernel of its span onto an
/// orthogonal symplectic complement. The Gram matrix is unchanged.
pub fn symplectic_reduce<T: Real>(vs: &SympVectorSet<T>) -> Result<SympVectorSet<T>> {
    let basis = span_basis(vs)?;
    let r = basis.len();
    if r == 0 {
        return Ok(vs.clone());
    }
    // restricted form W_ab = omega0(e_a, e_b) on the orthonormal basis
    let w: Vec<T> = (0..r * r).map(|k| omega0(&basis[k / r], &basis[k % r])).collect();
    let (sigma, v) = right_singular(&w, r, r);
    let rank = numerical_rank(&sigma, T::one())?;
    let kernel: Vec<Vec<T>> = (rank..r)
        .map(|c| {
            let coef = v.column(c);
            (0..2 * vs.n).map(|x| (0..r).fold(T::zero(), |s, a| s + coef[a] * basis[a][x])).collect()
        })
        .collect();
    let projected = vs
        .vectors
        .iter()
        .map(|u| {
            let mut p = u.clone();
            for k in &kernel {
                let c = dot(u, k);
                for (pi, ki) in p.iter_mut().zip(k) {
                    *pi = *pi - c * *ki;
                }
            }
            p
        })
        .collect();
    SympVectorSet::new(vs.n, projected)
}

/// Finitely many closed cones `{u : <u, z_j> >= cos(theta) |u|}` covering `R^{2n}`.
#[derive(Clone, Debug, Serialize)]
pub struct ConeCover {
    pub n: usize,
    pub theta: f64,
    pub centers: Vec<Vec<f64>>,
    /// Angular slack kept by every certification sample, zero for the explicit planar cover.
    pub margin: f64,
    pub samples: usize,
}

impl ConeCover {
    pub fn m(&self) -> usize {
        self.centers.len()
    }

    /// Cone containing `u`, lowest index first.
    pub fn locate(&self, u: &[f64]) -> Option<usize> {
        let nu = norm(u);
        if nu == 0.0 {
            return None;
        }
        let c = self.theta.cos();
        self.centers.iter().position(|z| dot(u, z) / nu >= c)
    }
}

#[derive(Clone, Debug)]
pub struct ConeCoverOptions {
    pub samples: usize,
    pub max_centers: usize,
    /// Fraction of `theta` kept as slack by every sample.
    pub margin_fraction: f64,
}

impl Default for ConeCoverOptions {
    fn default() -> Self {
        Self { samples: 1_000_000, max_centers: 20_000, margin_fraction: 0.1 }
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let (mut f, mut r) = (inv, 0.0);
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Deterministic low-discrepancy points on the unit sphere of `R^{dim}` (Halton + Box-Muller).
fn sphere_point(index: u64, dim: usize) -> Vec<f64> {
    const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
    let mut g = Vec::with_capacity(dim);
    for pair in 0..dim.div_ceil(2) {
        let u1 = radical_inverse(index + 1, PRIMES[2 * pair]);
        let u2 = radical_inverse(index + 1, PRIMES[2 * pair + 1]);
        let r = (-2.0 * u1.max(f64::MIN_POSITIVE).ln()).sqrt();
        let a = std::f64::consts::TAU * u2;
        g.push(r * a.cos());
        g.push(r * a.sin());
    }
    g.truncate(dim);
    let nn = norm(&g);
    g.iter().map(|x| x / nn).collect()
}

struct CenterIndex {
    cell: f64,
    buckets: HashMap<Vec<i32>, Vec<usize>>,
}

impl CenterIndex {
    fn key(&self, u: &[f64]) -> Vec<i32> {
        u.iter().map(|x| (x / self.cell).floor() as i32).collect()
    }

    fn insert(&mut self, u: &[f64], id: usize) {
        let k = self.key(u);
        self.buckets.entry(k).or_default().push(id);
    }

    /// Visits ids in every bucket adjacent to `u` until `f` returns true.
    fn any_near(&self, u: &[f64], mut f: impl FnMut(usize) -> bool) -> bool {
        let base = self.key(u);
        let dim = base.len();
        let mut offset = vec![-1i32; dim];
        loop {
            let k: Vec<i32> = base.iter().zip(&offset).map(|(a, b)| a + b).collect();
            if let Some(ids) = self.buckets.get(&k) {
                if ids.iter().any(|&id| f(id)) {
                    return true;
                }
            }
            let mut d = 0;
            while d < dim && offset[d] == 1 {
                offset[d] = -1;
                d += 1;
            }
            if d == dim {
                return false;
            }
            offset[d] += 1;
        }
    }
}

/// Cone cover of half-angle `theta`.
///
/// In the plane the centers sit at angles `2 theta k`, `m = ceil(pi / theta)`.
/// In higher dimensions centers are chosen greedily among low-discrepancy sphere
/// samples so that every sample lies within `theta - margin` of a center.
pub fn cone_cover(n: usize, theta: f64, options: &ConeCoverOptions) -> Result<ConeCover> {
    let quarter = std::f64::consts::FRAC_PI_4;
    if !(theta > 0.0 && theta < quarter) {
        return Err(Error::InvalidArgument(format!("cone angle must lie in (0, pi/4), got {theta}")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("half-dimension must be positive".into()));
    }
    if n == 1 {
        let m = (std::f64::consts::PI / theta - 1e-12).ceil() as usize;
        let centers = (0..m).map(|k| {
            let a = 2.0 * theta * k as f64;
            vec![a.cos(), a.sin()]
        });
        return Ok(ConeCover { n, theta, centers: centers.collect(), margin: 0.0, samples: 0 });
    }
    let dim = 2 * n;
    let margin = options.margin_fraction * theta;
    let accept = (theta - margin).cos();
    // chord length of the acceptance angle bounds coordinate differences
    let chord = 2.0 * ((theta - margin) / 2.0).sin();
    let mut index = CenterIndex { cell: chord.max(1e-3), buckets: HashMap::new() };
    let mut centers: Vec<Vec<f64>> = Vec::new();
    for s in 0..options.samples as u64 {
        let u = sphere_point(s, dim);
        let covered = index.any_near(&u, |id| dot(&u, &centers[id]) >= accept);
        if !covered {
            if centers.len() == options.max_centers {
                return Err(Error::CoverageUncertified { theta, centers: centers.len() });
            }
            index.insert(&u, centers.len());
            centers.push(u);
        }
    }
    Ok(ConeCover { n, theta, centers, margin, samples: options.samples })
}

/// Index of the cone with the largest total norm of member vectors, lowest index on ties.
pub fn max_cone<T: Real>(vs: &SympVectorSet<T>, cc: &ConeCover) -> usize {
    let c = cc.theta.cos();
    let mut best = (0usize, f64::NEG_INFINITY);
    for (j, z) in cc.centers.iter().enumerate() {
        let total: f64 = vs
            .vectors
            .iter()
            .map(|v| v.iter().map(|x| x.f64()).collect::<Vec<f64>>())
            .filter_map(|v| {
                let nv = norm(&v);
                (nv > 0.0 && dot(&v, z) / nv >= c).then_some(nv)
            })
            .sum();
        if total > best.1 {
            best = (j, total);
        }
    }
    best.0
}

/// Total norm of the vectors inside cone `j`.
pub fn cone_norm_sum<T: Real>(vs: &SympVectorSet<T>, cc: &ConeCover, j: usize) -> f64 {
    let c = cc.theta.cos();
    let z = &cc.centers[j];
    vs.vectors
        .iter()
        .map(|v| v.iter().map(|x| x.f64()).collect::<Vec<f64>>())
        .filter_map(|v| {
            let nv = norm(&v);
            (nv > 0.0 && dot(&v, z) / nv >= c).then_some(nv)
        })
        .sum()
}

/// The symplectic map halving `v`, doubling `J0 v` and fixing their orthogonal complement:
/// `S = I - v v^T / 2 + (J0 v)(J0 v)^T`, for a unit vector `v`.
pub fn shear_map<T: Real>(v: &[T]) -> Mat<T> {
    let jv = apply_j0(v);
    let a = Mat::outer(v, v).scale(T::lit(0.5));
    let b = Mat::outer(&jv, &jv);
    &(&Mat::identity(v.len()) - &a) + &b
}

/// `sqrt(cos theta) / (9 m^2)`, with `m` the size of [`cone_cover`].
pub fn proof_constant(n: usize, theta: f64) -> Result<f64> {
    let m = cone_cover(n, theta, &ConeCoverOptions::default())?.m();
    Ok(theta.cos().sqrt() / (9.0 * (m * m) as f64))
}

/// Factor `9 / sqrt(cos theta)` relating the squared cone norm to the cube maximum.
pub fn chain_factor(theta: f64) -> f64 {
    9.0 / theta.cos().sqrt()
}

#[derive(Clone, Debug)]
pub struct SpMinimum<T> {
    pub s: Mat<T>,
    pub objective: T,
    pub initial: T,
}

/// `sum_i ||S u_i||` and its gradient in the symmetric generator `H`, `X = -J0 H`.
fn objective_and_gradient<T: Real>(vectors: &[Vec<T>], s: &Mat<T>) -> (T, Mat<T>) {
    let d = s.dim();
    let mut total = T::zero();
    let mut grad = Mat::zeros(d);
    for v in vectors {
        let u = s.apply(v);
        let nu = norm(&u);
        total = total + nu;
        if nu > T::zero() {
            let ju = apply_j0(&u);
            grad = &grad + &Mat::outer(&ju, &u).scale(T::one() / nu);
        }
    }
    (total, grad.symmetric_part())
}

fn norm_sum<T: Real>(vectors: &[Vec<T>], s: &Mat<T>) -> T {
    vectors.iter().map(|v| norm(&s.apply(v))).fold(T::zero(), |a, b| a + b)
}

fn descend<T: Real>(vectors: &[Vec<T>], start: Mat<T>, steps: usize, j0: &Mat<T>) -> (Mat<T>, T) {
    let mut s = start;
    let (mut value, _) = objective_and_gradient(vectors, &s);
    let mut step = T::lit(0.5);
    for _ in 0..steps {
        let (_, grad) = objective_and_gradient(vectors, &s);
        let gnorm = grad.as_slice().iter().fold(T::zero(), |a, x| a + *x * *x).sqrt();
        if gnorm <= T::lit(1e-14) * (T::one() + value) {
            break;
        }
        let mut accepted = false;
        let mut t = step;
        for _ in 0..40 {
            // X = -J0 H with H = -t grad / |grad|
            let h = grad.scale(-t / gnorm);
            let x = (j0 * &h).scale(-T::one());
            let candidate = &x.exp() * &s;
            let v = norm_sum(vectors, &candidate);
            if v < value {
                s = candidate;
                value = v;
                accepted = true;
                step = (t * T::lit(2.0)).min(T::one());
                break;
            }
            t = t * T::lit(0.5);
        }
        if !accepted {
            break;
        }
    }
    (s, value)
}

/// Seeded descent of `S -> sum ||S v_i||` over `Sp(2n)` via exponential retraction.
///
/// Starts from the identity and from `restarts` random symplectic matrices and
/// keeps the best result, so the objective never exceeds `sum ||v_i||`.
pub fn minimize_over_sp<T: Real>(vs: &SympVectorSet<T>, steps: usize, seed: u64) -> Result<SpMinimum<T>> {
    let d = 2 * vs.n;
    let basis = span_basis(vs)?;
    if basis.len() < d {
        return Err(Error::RequiresSpanning { rank: basis.len(), dim: d });
    }
    let j0 = j0_matrix::<T>(vs.n);
    let initial = vs.norm_sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = descend(&vs.vectors, Mat::identity(d), steps, &j0);
    for _ in 0..10 {
        let draws: Vec<f64> = (0..d * d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let h = Mat::from_fn(d, |i, j| T::lit(0.3 * draws[i * d + j])).symmetric_part();
        let start = (&j0 * &h).scale(-T::one()).exp();
        let candidate = descend(&vs.vectors, start, steps, &j0);
        if candidate.1 < best.1 {
            best = candidate;
        }
    }
    Ok(SpMinimum { s: best.0, objective: best.1, initial })
}

/// `max |omega0(S a, S b) - omega0(a, b)|` over the given test pairs.
pub fn symplectic_defect<T: Real>(s: &Mat<T>, pairs: &[(Vec<T>, Vec<T>)]) -> T {
    pairs.iter().map(|(a, b)| (omega0(&s.apply(a), &s.apply(b)) - omega0(a, b)).abs()).fold(T::zero(), T::max)
}
