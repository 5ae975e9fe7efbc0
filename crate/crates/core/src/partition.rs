//! Partitions of unity subordinate to covers: bump construction, the sharp
//! lattice example, nonnegative relaxation and a seeded optimizer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bracket::{pair_brackets, pb_upper_of_brackets, PairBrackets};
use crate::cover::Cover;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::surface::{ScalarField, SurfaceGrid, Topology};

const NEG_TOL: f64 = 1e-12;
const SUM_TOL: f64 = 1e-9;
const SUPPORT_TOL: f64 = 1e-12;

/// Nonnegative fields summing to one, each supported in one set of a cover.
#[derive(Clone, Debug)]
pub struct PartitionOfUnity<T> {
    fields: Vec<ScalarField<T>>,
    cover: Cover<T>,
    subordination: Vec<usize>,
}

impl<T: Real> PartitionOfUnity<T> {
    /// Checked constructor: `subordination[i]` is the cover set containing the support of field `i`.
    pub fn new(fields: Vec<ScalarField<T>>, cover: Cover<T>, subordination: Vec<usize>) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::InvalidPartition("no fields".into()));
        }
        if subordination.len() != fields.len() {
            return Err(Error::InvalidPartition("subordination length differs from field count".into()));
        }
        let grid = cover.grid();
        let neg = T::lit(-NEG_TOL);
        let support = T::lit(SUPPORT_TOL);
        for (i, (f, &s)) in fields.iter().zip(&subordination).enumerate() {
            f.grid().same_as(grid)?;
            let set = cover.sets().get(s).ok_or_else(|| Error::InvalidPartition(format!("field {i} mapped to missing set {s}")))?;
            if let Some(k) = f.values().iter().position(|&v| v < neg) {
                return Err(Error::InvalidPartition(format!("field {i} negative at node {k}")));
            }
            if let Some(k) = f.values().iter().zip(&set.mask).position(|(&v, &m)| !m && v.abs() > support) {
                return Err(Error::InvalidPartition(format!("field {i} leaves set {s} at node {k}")));
            }
        }
        let sum = pointwise_sum(&fields);
        let tol = T::lit(SUM_TOL);
        if let Some(k) = sum.iter().position(|&v| (v - T::one()).abs() > tol) {
            return Err(Error::InvalidPartition(format!("sum is {} at node {k}", sum[k])));
        }
        Ok(Self { fields, cover, subordination })
    }

    /// The one-function partition `{1}` of the single-set cover `{M}`.
    pub fn constant(grid: &SurfaceGrid<T>) -> Self {
        let cover = Cover::new(grid.clone(), vec![vec![true; grid.len()]]).expect("whole surface is a cover");
        Self::new(vec![ScalarField::constant(grid, T::one())], cover, vec![0]).expect("constant partition is valid")
    }

    pub fn fields(&self) -> &[ScalarField<T>] {
        &self.fields
    }

    pub fn cover(&self) -> &Cover<T> {
        &self.cover
    }

    pub fn subordination(&self) -> &[usize] {
        &self.subordination
    }

    pub fn grid(&self) -> &SurfaceGrid<T> {
        self.cover.grid()
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// `F^m`: every field replaced by `m` copies of `f_i / m` on the duplicated cover.
    pub fn duplicated(&self, m: usize) -> Self {
        assert!(m >= 1);
        let cover = self.cover.duplicated(m);
        let inv = T::one() / T::count(m);
        let mut fields = Vec::with_capacity(self.fields.len() * m);
        let mut sub = Vec::with_capacity(self.fields.len() * m);
        for (f, &s) in self.fields.iter().zip(&self.subordination) {
            let scaled = f.scale(inv);
            for c in 0..m {
                fields.push(scaled.clone());
                sub.push(s * m + c);
            }
        }
        Self::new(fields, cover, sub).expect("duplicated partition is valid")
    }
}

/// Node-wise sum of several fields on one grid.
pub fn pointwise_sum<T: Real>(fields: &[ScalarField<T>]) -> Vec<T> {
    let n = fields[0].values().len();
    (0..n)
        .into_par_iter()
        .map(|k| {
            let mut s = T::zero();
            for f in fields {
                s = s + f.values()[k];
            }
            s
        })
        .collect()
}

/// Strict superlevel set `{f > t}`.
pub fn superlevel_set<T: Real>(f: &ScalarField<T>, t: T) -> Vec<bool> {
    f.values().iter().map(|&v| v > t).collect()
}

/// Chart spacing rescaled so that the product of the two steps is the cell area.
fn metric_spacing<T: Real>(grid: &SurfaceGrid<T>) -> (f64, f64) {
    let (hx, hy) = grid.spacing();
    (hx.f64(), (hy * grid.density()).f64())
}

/// Exact squared Euclidean distance transform along one line, spacing 1.
///
/// `f` holds squared distances (or `INFINITY`); `out[p] = min_q (p-q)^2 + f[q]`.
fn edt_line(f: &[f64], out: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    v.clear();
    z.clear();
    for (q, &fq) in f.iter().enumerate() {
        if !fq.is_finite() {
            continue;
        }
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&p) => {
                    let (qf, pf) = (q as f64, p as f64);
                    let s = ((fq + qf * qf) - (f[p] + pf * pf)) / (2.0 * (qf - pf));
                    if s <= *z.last().unwrap() {
                        v.pop();
                        z.pop();
                    } else {
                        v.push(q);
                        z.push(s);
                        break;
                    }
                }
            }
        }
    }
    if v.is_empty() {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (p, o) in out.iter_mut().enumerate() {
        let pf = p as f64;
        while k + 1 < v.len() && z[k + 1] < pf {
            k += 1;
        }
        let d = pf - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// 1D transform along a line with spacing `h`, unrolled three times when periodic.
fn edt_axis(line: &[f64], h: f64, periodic: bool) -> Vec<f64> {
    let n = line.len();
    let inv = 1.0 / (h * h);
    let mut v = Vec::new();
    let mut z = Vec::new();
    if periodic {
        let f: Vec<f64> = (0..3 * n).map(|p| line[p % n] * inv).collect();
        let mut out = vec![0.0; 3 * n];
        edt_line(&f, &mut out, &mut v, &mut z);
        out[n..2 * n].iter().map(|d| d * h * h).collect()
    } else {
        let f: Vec<f64> = line.iter().map(|d| d * inv).collect();
        let mut out = vec![0.0; n];
        edt_line(&f, &mut out, &mut v, &mut z);
        out.into_iter().map(|d| d * h * h).collect()
    }
}

/// Euclidean distance from every node to the nearest node outside `mask`.
///
/// `INFINITY` everywhere when the mask is the whole surface.
pub fn distance_to_complement<T: Real>(grid: &SurfaceGrid<T>, mask: &[bool]) -> Vec<f64> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let (sx, sy) = metric_spacing(grid);
    let mut rows: Vec<f64> = Vec::with_capacity(grid.len());
    let per_row: Vec<Vec<f64>> = (0..nx)
        .into_par_iter()
        .map(|i| {
            let line: Vec<f64> = (0..ny).map(|j| if mask[grid.index(i, j)] { f64::INFINITY } else { 0.0 }).collect();
            edt_axis(&line, sy, true)
        })
        .collect();
    for r in per_row {
        rows.extend(r);
    }
    let cols: Vec<Vec<f64>> = (0..ny)
        .into_par_iter()
        .map(|j| {
            let line: Vec<f64> = (0..nx).map(|i| rows[i * ny + j]).collect();
            edt_axis(&line, sx, grid.periodic_x())
        })
        .collect();
    let mut out = vec![0.0; grid.len()];
    for (j, col) in cols.into_iter().enumerate() {
        for (i, d) in col.into_iter().enumerate() {
            out[i * ny + j] = d.sqrt();
        }
    }
    out
}

/// Smooth step on `[0, 1]`: zero with zero slope at 0, one with zero slope at 1.
#[inline]
fn smooth_step(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    let s = 1.0 - t * t;
    1.0 - s * s * s
}

/// Unnormalized bumps `g_i`, one per cover set, before division by their sum.
pub fn bump_envelopes<T: Real>(cover: &Cover<T>, margin: f64) -> Result<Vec<Vec<f64>>> {
    if !(margin > 0.0 && margin <= 1.0) {
        return Err(Error::InvalidArgument(format!("margin must lie in (0, 1], got {margin}")));
    }
    let grid = cover.grid();
    let (sx, sy) = metric_spacing(grid);
    let h_min = sx.min(sy);
    let mut bumps: Vec<Vec<f64>> = cover
        .sets()
        .par_iter()
        .map(|s| {
            let dist = distance_to_complement(grid, &s.mask);
            let depth: Vec<f64> = dist.iter().map(|d| d - h_min).collect();
            let deepest = depth.iter().copied().fold(0.0, f64::max);
            if deepest.is_infinite() {
                return vec![1.0; grid.len()];
            }
            let width = margin * 2.0 * deepest;
            if width <= 0.0 {
                return vec![0.0; grid.len()];
            }
            depth.iter().map(|&d| smooth_step(d / width)).collect()
        })
        .collect();
    if !grid.is_torus() {
        // pole-adjacent rows must be constant; take the row minimum
        let ny = grid.ny();
        for b in &mut bumps {
            for row in [0, grid.nx() - 1] {
                let r = &mut b[row * ny..(row + 1) * ny];
                let m = r.iter().copied().fold(f64::INFINITY, f64::min);
                r.iter_mut().for_each(|v| *v = m);
            }
        }
    }
    for k in 0..grid.len() {
        let total: f64 = bumps.iter().map(|b| b[k]).sum();
        if total < 1.0 {
            return Err(Error::UncoveredInterior { node: k });
        }
    }
    Ok(bumps)
}

fn normalize<T: Real>(grid: &SurfaceGrid<T>, bumps: &[Vec<f64>]) -> Vec<ScalarField<T>> {
    let n = grid.len();
    let totals: Vec<f64> = (0..n).into_par_iter().map(|k| bumps.iter().map(|b| b[k]).sum()).collect();
    bumps
        .par_iter()
        .map(|b| {
            let values = b.iter().zip(&totals).map(|(&g, &s)| T::lit(g / s)).collect();
            ScalarField::from_parts_unchecked(grid.clone(), values)
        })
        .collect()
}

/// Partition `f_i = g_i / sum_j g_j` from distance bumps.
///
/// `g_i` rises smoothly from zero one grid step inside the boundary of set `i`
/// to one at depth `margin * d_i`, where `d_i` is the diameter of the largest
/// inscribed disc of the set. Every node must reach depth one in some set.
pub fn bump_partition<T: Real>(cover: &Cover<T>, margin: f64) -> Result<PartitionOfUnity<T>> {
    let bumps = bump_envelopes(cover, margin)?;
    let fields = normalize(cover.grid(), &bumps);
    PartitionOfUnity::new(fields, cover.clone(), (0..cover.len()).collect())
}

/// Support radius of the lattice profile, in lattice units.
pub const SHARP_PROFILE_RADIUS: f64 = 0.85;
/// Radius of the covering discs, in lattice units.
pub const SHARP_DISC_RADIUS: f64 = 0.9;

/// The lattice cover by `k * k` translated discs of radius `0.9 / k` on a torus,
/// with the partition built from the profile `max(0, 1 - |u|^2 / 0.85^2)^3`.
///
/// `offset` shifts every center by half a lattice cell in both directions.
pub fn sharp_cover<T: Real>(k: usize, grid: &SurfaceGrid<T>, offset: bool) -> Result<(Cover<T>, PartitionOfUnity<T>)> {
    let Topology::Torus { lx, ly } = grid.topology() else {
        return Err(Error::InvalidArgument("the lattice cover lives on a torus".into()));
    };
    if k == 0 {
        return Err(Error::InvalidArgument("lattice size must be positive".into()));
    }
    let need = 8 * k;
    let have = grid.nx().min(grid.ny());
    if have < need {
        return Err(Error::UnderResolved { have, need });
    }
    let (lx, ly) = (lx.f64(), ly.f64());
    let shift = if offset { 0.5 } else { 0.0 };
    let (nx, ny) = (grid.nx(), grid.ny());
    let (hx, hy) = grid.spacing();
    let (hx, hy) = (hx.f64(), hy.f64());
    let rho2 = SHARP_PROFILE_RADIUS * SHARP_PROFILE_RADIUS;
    let disc2 = SHARP_DISC_RADIUS * SHARP_DISC_RADIUS;

    let centers: Vec<(f64, f64)> = (0..k).flat_map(|a| (0..k).map(move |b| (a as f64 + shift, b as f64 + shift))).collect();
    let per_set: Vec<(Vec<bool>, Vec<f64>)> = centers
        .par_iter()
        .map(|&(ca, cb)| {
            let mut mask = vec![false; grid.len()];
            let mut bump = vec![0.0; grid.len()];
            // lattice-unit offsets, wrapped to (-k/2, k/2]
            let wrap = |u: f64| {
                let kf = k as f64;
                (u + kf / 2.0).rem_euclid(kf) - kf / 2.0
            };
            for i in 0..nx {
                let du = wrap(i as f64 * hx / lx * k as f64 - ca);
                if du.abs() >= SHARP_DISC_RADIUS {
                    continue;
                }
                for j in 0..ny {
                    let dv = wrap(j as f64 * hy / ly * k as f64 - cb);
                    let r2 = du * du + dv * dv;
                    if r2 < disc2 {
                        let idx = i * ny + j;
                        mask[idx] = true;
                        let s = 1.0 - r2 / rho2;
                        if s > 0.0 {
                            bump[idx] = s * s * s;
                        }
                    }
                }
            }
            (mask, bump)
        })
        .collect();
    let (masks, bumps): (Vec<_>, Vec<_>) = per_set.into_iter().unzip();
    let cover = Cover::new(grid.clone(), masks)?;
    let fields = normalize(grid, &bumps);
    let partition = PartitionOfUnity::new(fields, cover.clone(), (0..k * k).collect())?;
    Ok((cover, partition))
}

/// The relaxation profile: zero on `|t| <= delta`, `|t| - 2 delta` beyond `3 delta`,
/// joined by a quadratic so that it is `C^1` with slope at most one.
pub fn relax_profile<T: Real>(t: T, delta: T) -> T {
    let a = t.abs();
    let three = T::lit(3.0);
    if a <= delta {
        T::zero()
    } else if a <= three * delta {
        let s = a - delta;
        s * s / (T::lit(4.0) * delta)
    } else {
        a - T::lit(2.0) * delta
    }
}

/// Derivative of [`relax_profile`].
pub fn relax_profile_slope<T: Real>(t: T, delta: T) -> T {
    let a = t.abs();
    let mag = if a <= delta {
        T::zero()
    } else if a <= T::lit(3.0) * delta {
        (a - delta) / (T::lit(2.0) * delta)
    } else {
        T::one()
    };
    if t < T::zero() {
        -mag
    } else {
        mag
    }
}

/// Nonnegative fields `rho(f_i) / (1 - 2 N delta)` whose sum stays at least one.
pub fn relax_to_nonnegative<T: Real>(fields: &[ScalarField<T>], delta: T) -> Result<Vec<ScalarField<T>>> {
    if fields.is_empty() {
        return Ok(Vec::new());
    }
    let n = T::count(fields.len());
    let load = T::lit(2.0) * n * delta;
    if !(delta > T::zero()) || load >= T::one() {
        return Err(Error::DeltaTooLarge(load.f64()));
    }
    let grid = fields[0].grid();
    for f in fields {
        f.grid().same_as(grid)?;
    }
    let slack = T::lit(SUM_TOL);
    for k in 0..grid.len() {
        let s: T = fields.iter().map(|f| f.values()[k].abs()).sum();
        if s < T::one() - slack {
            return Err(Error::InvalidArgument(format!("sum of |f_i| is {s} < 1 at node {k}")));
        }
    }
    let scale = T::one() / (T::one() - load);
    Ok(fields.iter().map(|f| f.map(|v| relax_profile(v, delta) * scale)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// sup over nodes of `sum_ij |{f_i, f_j}|`
    Supsum,
    /// exact cube maximum of the bracket matrix, sup over nodes
    PbUpper,
    /// `sum_ij int |{f_i, f_j}|`
    L1sum,
}

pub fn evaluate_objective<T: Real>(fields: &[ScalarField<T>], objective: Objective) -> f64 {
    let pb: PairBrackets<T> = pair_brackets(fields, fields).expect("fields share a grid");
    match objective {
        Objective::Supsum => pb.sum_field().iter().fold(0.0, |m, &v| m.max(v.f64())),
        Objective::L1sum => pb.pair_l1().iter().flatten().map(|v| v.f64()).sum(),
        Objective::PbUpper => pb_upper_of_brackets(&pb, 0).value.f64(),
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct OptimizeOptions {
    pub margin: f64,
    pub step: f64,
    pub probe: f64,
    pub modes: usize,
}

impl OptimizeOptions {
    pub fn standard() -> Self {
        Self { margin: 0.5, step: 0.5, probe: 0.1, modes: 2 }
    }
}

#[derive(Clone, Debug)]
pub struct OptimizeResult<T> {
    pub partition: PartitionOfUnity<T>,
    pub initial: f64,
    pub best: f64,
    /// `(step, best objective so far)`, step 0 is the initialization.
    pub trace: Vec<(usize, f64)>,
}

/// Low-frequency perturbation: random Fourier modes in normalized chart
/// coordinates, damped to zero on the pole-adjacent rows of a sphere.
fn random_mode<T: Real>(grid: &SurfaceGrid<T>, modes: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let m = modes as i64;
    let mut terms = Vec::new();
    for a in -m..=m {
        for b in 0..=m {
            if a == 0 && b == 0 {
                continue;
            }
            let amp: f64 = rng.gen_range(-1.0..1.0);
            let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            terms.push((a as f64, b as f64, amp, phase));
        }
    }
    let norm = (terms.len() as f64).sqrt();
    let (nx, ny) = (grid.nx() as f64, grid.ny() as f64);
    (0..grid.len())
        .map(|k| {
            let (i, j) = grid.ij(k);
            if grid.is_pole_row(i) {
                return 0.0;
            }
            let u = i as f64 / nx;
            let v = j as f64 / ny;
            let mut s = 0.0;
            for &(a, b, amp, phase) in &terms {
                s += amp * (std::f64::consts::TAU * (a * u + b * v) + phase).cos();
            }
            let damp = if grid.is_torus() { 1.0 } else { (std::f64::consts::PI * (i as f64 + 0.5) / nx).sin().powi(2) };
            damp * s / norm
        })
        .collect()
}

fn fields_from_logits<T: Real>(grid: &SurfaceGrid<T>, env: &[Vec<f64>], logits: &[Vec<f64>]) -> Vec<ScalarField<T>> {
    let g: Vec<Vec<f64>> =
        env.iter().zip(logits).map(|(e, l)| e.iter().zip(l).map(|(&e, &l)| if e > 0.0 { e * l.exp() } else { 0.0 }).collect()).collect();
    normalize(grid, &g)
}

/// Seeded descent on per-set logit fields `g_i = bump_i * exp(logit_i)`,
/// `f_i = g_i / sum g`, with simultaneous-perturbation gradient estimates along
/// random low-frequency modes. Returns the best iterate seen.
pub fn optimize_partition<T: Real>(
    cover: &Cover<T>,
    objective: Objective,
    steps: usize,
    seed: u64,
    options: &OptimizeOptions,
) -> Result<OptimizeResult<T>> {
    let grid = cover.grid();
    let env = bump_envelopes(cover, options.margin)?;
    let n = env.len();
    let mut logits = vec![vec![0.0; grid.len()]; n];
    let mut current = fields_from_logits(grid, &env, &logits);
    let mut value = evaluate_objective(&current, objective);
    let initial = value;
    let mut best = (value, current.clone());
    let mut trace = vec![(0, value)];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for step in 1..=steps {
        if best.0 == 0.0 {
            trace.push((step, 0.0));
            continue;
        }
        let dirs: Vec<Vec<f64>> = (0..n).map(|_| random_mode(grid, options.modes, &mut rng)).collect();
        let probe = |sign: f64| {
            let l: Vec<Vec<f64>> =
                logits.iter().zip(&dirs).map(|(l, d)| l.iter().zip(d).map(|(a, b)| a + sign * options.probe * b).collect()).collect();
            evaluate_objective(&fields_from_logits(grid, &env, &l), objective)
        };
        let (plus, minus) = (probe(1.0), probe(-1.0));
        let slope = (plus - minus) / (2.0 * options.probe);
        let scale = if value > 0.0 { options.step / value } else { options.step };
        for (l, d) in logits.iter_mut().zip(&dirs) {
            for (a, b) in l.iter_mut().zip(d) {
                *a -= scale * slope * b;
            }
        }
        current = fields_from_logits(grid, &env, &logits);
        value = evaluate_objective(&current, objective);
        if value < best.0 {
            best = (value, current.clone());
        }
        trace.push((step, best.0));
    }
    let partition = PartitionOfUnity::new(best.1, cover.clone(), (0..n).collect())?;
    Ok(OptimizeResult { partition, initial, best: best.0, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::poisson_bracket;

    fn torus(n: usize) -> SurfaceGrid<f64> {
        SurfaceGrid::torus(n, n, 1.0, 1.0).unwrap()
    }

    #[test]
    fn edt_matches_brute_force() {
        let g = SurfaceGrid::torus(16, 12, 1.0, 0.75).unwrap();
        let mask: Vec<bool> = (0..g.len()).map(|k| (k * 7919) % 5 != 0).collect();
        let d = distance_to_complement(&g, &mask);
        let (hx, hy) = g.spacing();
        for k in 0..g.len() {
            let (i, j) = g.ij(k);
            let mut best = f64::INFINITY;
            for q in 0..g.len() {
                if mask[q] {
                    continue;
                }
                let (a, b) = g.ij(q);
                let di = (i as f64 - a as f64).abs().min(16.0 - (i as f64 - a as f64).abs());
                let dj = (j as f64 - b as f64).abs().min(12.0 - (j as f64 - b as f64).abs());
                best = best.min(((di * hx).powi(2) + (dj * hy).powi(2)).sqrt());
            }
            assert!((d[k] - best).abs() < 1e-12, "node {k}: {} vs {best}", d[k]);
        }
    }

    #[test]
    fn whole_surface_gives_constant_one() {
        let g = torus(16);
        let c = Cover::new(g.clone(), vec![vec![true; g.len()]]).unwrap();
        let p = bump_partition(&c, 0.25).unwrap();
        assert!(p.fields()[0].values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn sphere_height_bands_commute() {
        let g = SurfaceGrid::<f64>::sphere(64, 32, 1.0).unwrap();
        let south: Vec<bool> = (0..g.len()).map(|k| g.ij(k).0 < 40).collect();
        let north: Vec<bool> = (0..g.len()).map(|k| g.ij(k).0 >= 24).collect();
        let c = Cover::new(g.clone(), vec![south, north]).unwrap();
        let p = bump_partition(&c, 0.1).unwrap();
        let b = poisson_bracket(&p.fields()[0], &p.fields()[1]).unwrap();
        assert!(b.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn uncovered_interior_is_reported() {
        let g = torus(32);
        let left: Vec<bool> = (0..g.len()).map(|k| g.ij(k).0 < 17).collect();
        let right: Vec<bool> = (0..g.len()).map(|k| g.ij(k).0 >= 15).collect();
        let c = Cover::new(g, vec![left, right]).unwrap();
        assert!(matches!(bump_partition(&c, 1.0), Err(Error::UncoveredInterior { .. })));
    }

    #[test]
    fn sharp_cover_counts() {
        let g = torus(64);
        let (c, p) = sharp_cover(4, &g, false).unwrap();
        assert_eq!(c.len(), 16);
        assert_eq!(c.essential_indices().len(), 16);
        assert_eq!(p.len(), 16);
        assert!(matches!(sharp_cover(16, &g, false), Err(Error::UnderResolved { have: 64, need: 128 })));
        let (c2, _) = sharp_cover(4, &g, true).unwrap();
        assert_eq!(c2.essential_indices().len(), 16);
    }

    #[test]
    fn relax_profile_shape() {
        let d = 0.01f64;
        assert_eq!(relax_profile(0.005, d), 0.0);
        assert!((relax_profile(0.5, d) - 0.48).abs() < 1e-15);
        assert!((relax_profile(0.03, d) - 0.01).abs() < 1e-15);
        for k in -400..400 {
            let t = k as f64 * 1e-4;
            assert!(relax_profile(t, d) >= t.abs() - 2.0 * d - 1e-15);
            assert!(relax_profile_slope(t, d).abs() <= 1.0);
        }
    }

    #[test]
    fn relax_rejects_large_delta() {
        let g = torus(8);
        let f = vec![ScalarField::constant(&g, 1.0); 4];
        assert!(matches!(relax_to_nonnegative(&f, 0.2), Err(Error::DeltaTooLarge(_))));
        let out = relax_to_nonnegative(&f, 0.01).unwrap();
        assert!((out[0].values()[0] - 0.98 / 0.92).abs() < 1e-12);
    }

    #[test]
    fn superlevel_sets_nest() {
        let g = torus(16);
        let f = ScalarField::from_fn(&g, |x, y| (x * 6.0).sin() * y);
        assert!(superlevel_set(&f, 2.0).iter().all(|&b| !b));
        let a = superlevel_set(&f, 0.1);
        let b = superlevel_set(&f, 0.3);
        assert!(a.iter().zip(&b).all(|(x, y)| !*y || *x));
    }
}
