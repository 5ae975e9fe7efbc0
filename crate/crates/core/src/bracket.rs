//! Pairwise bracket aggregation between two partitions, the cube maximum
//! that bounds the pb invariant from above, and the lower bounds it is
//! compared against.

use rayon::prelude::*;
use serde::Serialize;

use crate::cover::{connected_components, enclosing_disc, Cover};
use crate::cube::{cube_max, CubeMax};
use crate::error::{Error, Result};
use crate::partition::PartitionOfUnity;
use crate::real::{pairwise_sum, Real};
use crate::surface::{bracket_from_derivatives, gradient, ScalarField, SurfaceGrid};
use crate::symplinalg::proof_constant;

/// Relative slack used by bound checks: 5% below 1024 nodes per axis, 2% from there on.
pub fn bound_tolerance<T: Real>(grid: &SurfaceGrid<T>) -> f64 {
    if grid.nx().min(grid.ny()) >= 1024 {
        0.02
    } else {
        0.05
    }
}

/// Gradient restricted to the nodes where it does not vanish.
struct SparseGradient<T> {
    nodes: Vec<u32>,
    dx: Vec<T>,
    dy: Vec<T>,
}

fn sparse_gradient<T: Real>(f: &ScalarField<T>) -> SparseGradient<T> {
    let grid = f.grid();
    let g = gradient(f);
    let mut out = SparseGradient { nodes: Vec::new(), dx: Vec::new(), dy: Vec::new() };
    for k in 0..grid.len() {
        let (i, _) = grid.ij(k);
        if grid.is_pole_row(i) {
            continue;
        }
        if g.dx[k] != T::zero() || g.dy[k] != T::zero() {
            out.nodes.push(k as u32);
            out.dx.push(g.dx[k]);
            out.dy.push(g.dy[k]);
        }
    }
    out
}

/// Bracket `{f_i, g_j}` on the nodes where it is nonzero.
#[derive(Clone, Debug)]
pub struct PairEntry<T> {
    pub i: usize,
    pub j: usize,
    pub nodes: Vec<u32>,
    pub values: Vec<T>,
}

/// All nonvanishing pairwise brackets of two families of fields.
#[derive(Clone, Debug)]
pub struct PairBrackets<T> {
    grid: SurfaceGrid<T>,
    rows: usize,
    cols: usize,
    pairs: Vec<PairEntry<T>>,
    pair_l1: Vec<Vec<T>>,
    pair_sup: Vec<Vec<T>>,
    sum: Vec<T>,
}

impl<T: Real> PairBrackets<T> {
    pub fn grid(&self) -> &SurfaceGrid<T> {
        &self.grid
    }

    pub fn pairs(&self) -> &[PairEntry<T>] {
        &self.pairs
    }

    /// `int |{f_i, g_j}| omega`, indexed `[i][j]`.
    pub fn pair_l1(&self) -> &[Vec<T>] {
        &self.pair_l1
    }

    /// `max |{f_i, g_j}|`, indexed `[i][j]`.
    pub fn pair_sup(&self) -> &[Vec<T>] {
        &self.pair_sup
    }

    /// Node values of `sum_ij |{f_i, g_j}|`.
    pub fn sum_field(&self) -> &[T] {
        &self.sum
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
}

/// Merge-joins the sparse gradients of every pair; a pair costs only its overlap.
pub fn pair_brackets<T: Real>(f: &[ScalarField<T>], g: &[ScalarField<T>]) -> Result<PairBrackets<T>> {
    let grid = f.first().or(g.first()).map(|x| x.grid().clone()).ok_or_else(|| Error::InvalidArgument("no fields".into()))?;
    for h in f.iter().chain(g) {
        h.grid().same_as(&grid)?;
        h.check_pole_regularity()?;
    }
    let sf: Vec<SparseGradient<T>> = f.par_iter().map(sparse_gradient).collect();
    let sg: Vec<SparseGradient<T>> = g.par_iter().map(sparse_gradient).collect();
    let rho = grid.density();
    let index_pairs: Vec<(usize, usize)> = (0..f.len()).flat_map(|i| (0..g.len()).map(move |j| (i, j))).collect();
    let pairs: Vec<PairEntry<T>> = index_pairs
        .par_iter()
        .filter_map(|&(i, j)| {
            let (a, b) = (&sf[i], &sg[j]);
            let (Some(&a0), Some(&b0)) = (a.nodes.first(), b.nodes.first()) else {
                return None;
            };
            if a0 > *b.nodes.last().unwrap() || b0 > *a.nodes.last().unwrap() {
                return None;
            }
            let mut entry = PairEntry { i, j, nodes: Vec::new(), values: Vec::new() };
            let (mut p, mut q) = (0, 0);
            while p < a.nodes.len() && q < b.nodes.len() {
                match a.nodes[p].cmp(&b.nodes[q]) {
                    std::cmp::Ordering::Less => p += 1,
                    std::cmp::Ordering::Greater => q += 1,
                    std::cmp::Ordering::Equal => {
                        let v = bracket_from_derivatives(a.dx[p], a.dy[p], b.dx[q], b.dy[q], rho);
                        if v != T::zero() {
                            entry.nodes.push(a.nodes[p]);
                            entry.values.push(v);
                        }
                        p += 1;
                        q += 1;
                    }
                }
            }
            (!entry.nodes.is_empty()).then_some(entry)
        })
        .collect();

    let mut pair_l1 = vec![vec![T::zero(); g.len()]; f.len()];
    let mut pair_sup = vec![vec![T::zero(); g.len()]; f.len()];
    let mut sum = vec![T::zero(); grid.len()];
    for e in &pairs {
        let abs: Vec<T> = e.values.iter().map(|v| v.abs()).collect();
        pair_l1[e.i][e.j] = pairwise_sum(&abs) * grid.cell_area();
        pair_sup[e.i][e.j] = abs.iter().copied().fold(T::zero(), T::max);
        for (&k, &v) in e.nodes.iter().zip(&abs) {
            sum[k as usize] = sum[k as usize] + v;
        }
    }
    Ok(PairBrackets { grid, rows: f.len(), cols: g.len(), pairs, pair_l1, pair_sup, sum })
}

/// Per-node bracket matrices in compressed form.
struct NodeMatrices<T> {
    start: Vec<usize>,
    entries: Vec<(u32, u32, T)>,
}

fn node_matrices<T: Real>(pb: &PairBrackets<T>) -> NodeMatrices<T> {
    let n = pb.grid.len();
    let mut count = vec![0usize; n + 1];
    for e in &pb.pairs {
        for &k in &e.nodes {
            count[k as usize + 1] += 1;
        }
    }
    for k in 0..n {
        count[k + 1] += count[k];
    }
    let start = count.clone();
    let mut fill = count;
    let mut entries = vec![(0u32, 0u32, T::zero()); start[n]];
    for e in &pb.pairs {
        for (&k, &v) in e.nodes.iter().zip(&e.values) {
            entries[fill[k as usize]] = (e.i as u32, e.j as u32, v);
            fill[k as usize] += 1;
        }
    }
    NodeMatrices { start, entries }
}

/// Dense local matrix over the active rows and columns of one node.
fn local_matrix<T: Real>(entries: &[(u32, u32, T)]) -> (Vec<T>, Vec<u32>, Vec<u32>) {
    let mut rows: Vec<u32> = entries.iter().map(|e| e.0).collect();
    let mut cols: Vec<u32> = entries.iter().map(|e| e.1).collect();
    rows.sort_unstable();
    rows.dedup();
    cols.sort_unstable();
    cols.dedup();
    let mut b = vec![T::zero(); rows.len() * cols.len()];
    for &(i, j, v) in entries {
        let r = rows.binary_search(&i).unwrap();
        let c = cols.binary_search(&j).unwrap();
        b[r * cols.len() + c] = v;
    }
    (b, rows, cols)
}

#[derive(Clone, Debug, Serialize)]
pub struct PbUpper<T> {
    /// `max_p max_{x,y} x^T B(p) y`.
    pub value: T,
    /// Node attaining the maximum.
    pub node: usize,
    /// Sign witnesses over all fields (zero-bracket fields get `+1`).
    pub x: Vec<i8>,
    pub y: Vec<i8>,
    /// `true` iff every node was solved by exhaustive enumeration.
    pub exact: bool,
    /// Nodes that fell back to the local search.
    pub heuristic_nodes: usize,
}

/// Node-wise cube maxima of the bracket matrix, zero where no bracket is active.
fn node_cube_maxima<T: Real>(pb: &PairBrackets<T>, seed: u64) -> Vec<Option<CubeMax<T>>> {
    let m = node_matrices(pb);
    (0..pb.grid.len())
        .into_par_iter()
        .map(|k| {
            let e = &m.entries[m.start[k]..m.start[k + 1]];
            if e.is_empty() {
                return None;
            }
            let (b, rows, cols) = local_matrix(e);
            let mut r = cube_max(&b, rows.len(), cols.len(), seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let mut x = vec![1i8; pb.rows];
            let mut y = vec![1i8; pb.cols];
            for (s, &i) in r.x.iter().zip(&rows) {
                x[i as usize] = *s;
            }
            for (s, &j) in r.y.iter().zip(&cols) {
                y[j as usize] = *s;
            }
            r.x = x;
            r.y = y;
            Some(r)
        })
        .collect()
}

fn pb_upper_from_maxima<T: Real>(pb: &PairBrackets<T>, maxima: &[Option<CubeMax<T>>]) -> PbUpper<T> {
    let mut best = PbUpper { value: T::zero(), node: 0, x: vec![1; pb.rows], y: vec![1; pb.cols], exact: true, heuristic_nodes: 0 };
    for (k, r) in maxima.iter().enumerate() {
        let Some(r) = r else { continue };
        if !r.exact {
            best.heuristic_nodes += 1;
            best.exact = false;
        }
        if r.value > best.value {
            best.value = r.value;
            best.node = k;
            best.x = r.x.clone();
            best.y = r.y.clone();
        }
    }
    best
}

pub fn pb_upper_of_brackets<T: Real>(pb: &PairBrackets<T>, seed: u64) -> PbUpper<T> {
    pb_upper_from_maxima(pb, &node_cube_maxima(pb, seed))
}

/// `sup_p max_{x, y in [-1,1]} |x^T B(p) y|` with `B(p)_ij = {f_i, g_j}(p)`.
///
/// An upper bound for the pb invariant of the cover when `F = G`.
pub fn pb_upper<T: Real>(f: &PartitionOfUnity<T>, g: &PartitionOfUnity<T>) -> Result<PbUpper<T>> {
    let pb = pair_brackets(f.fields(), g.fields())?;
    Ok(pb_upper_of_brackets(&pb, 0))
}

#[derive(Clone, Debug, Serialize)]
pub struct PbLowerBound<T> {
    pub constant: f64,
    /// `constant * sup_sum`.
    pub bound: T,
    /// `min_p cube max / sum_ij |B_ij|` over nodes with a non-negligible sum.
    pub min_ratio: Option<T>,
    pub sampled_nodes: usize,
}

fn pb_lower_from<T: Real>(pb: &PairBrackets<T>, maxima: &[Option<CubeMax<T>>]) -> PbLowerBound<T> {
    let constant = proof_constant(1, std::f64::consts::PI / 30.0).expect("planar cone cover is explicit");
    let sup_sum = pb.sum.iter().copied().fold(T::zero(), T::max);
    let floor = sup_sum * T::lit(1e-12);
    let mut min_ratio: Option<T> = None;
    let mut sampled = 0;
    for (k, r) in maxima.iter().enumerate() {
        let (Some(r), s) = (r, pb.sum[k]) else { continue };
        if s <= floor {
            continue;
        }
        sampled += 1;
        let ratio = r.value / s;
        min_ratio = Some(min_ratio.map_or(ratio, |m| m.min(ratio)));
    }
    PbLowerBound { constant, bound: T::lit(constant) * sup_sum, min_ratio, sampled_nodes: sampled }
}

/// Lower bound `c * sup_sum` on the cube maximum, with the empirical worst ratio.
pub fn pb_lower_bound<T: Real>(f: &PartitionOfUnity<T>, g: &PartitionOfUnity<T>) -> Result<PbLowerBound<T>> {
    let pb = pair_brackets(f.fields(), g.fields())?;
    let maxima = node_cube_maxima(&pb, 0);
    Ok(pb_lower_from(&pb, &maxima))
}

/// Largest enclosing-disc area over all connected components of all sets, `+inf` if any is not enclosable.
pub fn max_enclosing_area<T: Real>(cover: &Cover<T>) -> T {
    cover.displacement_energy()
}

#[derive(Clone, Debug, Serialize)]
pub struct Bounds {
    /// `area / (2A)`, `A` the largest enclosing-disc area of both covers; 0 if some set is not enclosable.
    pub gen_cover_bound: f64,
    /// `|I_ess|` of the first cover, 0 when its sets are not small discs.
    pub ess_l1_bound: f64,
    /// `1 / min essential area`, 0 for no essential set or failed hypotheses.
    pub ess_sup_bound: f64,
    /// `1 / (2 d^2 e)` of the first cover.
    pub degree_bound: f64,
}

pub struct BracketReport<T> {
    pub pair_l1: Vec<Vec<T>>,
    pub sum_field: ScalarField<T>,
    pub sup_sum: T,
    pub total_l1: T,
    pub pb_upper: PbUpper<T>,
    pub pb_lower: PbLowerBound<T>,
    pub bounds: Bounds,
}

impl<T: Real> BracketReport<T> {
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "sup_sum": self.sup_sum.f64(),
            "total_l1": self.total_l1.f64(),
            "pb_upper": self.pb_upper.value.f64(),
            "pb_upper_exact": self.pb_upper.exact,
            "pb_lower_bound": self.pb_lower.bound.f64(),
            "pb_lower_min_ratio": self.pb_lower.min_ratio.map(|r| r.f64()),
            "bounds": self.bounds,
        })
    }
}

/// Checks that every set is a disc of area below half the surface.
fn small_disc_hypothesis<T: Real>(cover: &Cover<T>) -> Result<()> {
    let grid = cover.grid();
    let half = grid.total_area() / T::lit(2.0);
    for s in cover.sets() {
        let fail = |reason: &str| Error::HypothesisViolation { id: s.id, reason: reason.into() };
        if s.area >= half {
            return Err(fail("area is not below half the surface"));
        }
        if connected_components(grid, &s.mask).len() != 1 {
            return Err(fail("set is not connected"));
        }
        match enclosing_disc(grid, &s.mask) {
            Ok(d) if d == s.mask => {}
            Ok(_) => return Err(fail("set has holes")),
            Err(_) => return Err(fail("set is not contained in a disc")),
        }
    }
    Ok(())
}

fn essential_bounds<T: Real>(cover: &Cover<T>) -> (f64, f64) {
    if small_disc_hypothesis(cover).is_err() {
        return (0.0, 0.0);
    }
    let ess = cover.essential_indices();
    let min_area = ess.iter().map(|&i| cover.sets()[i].area.f64()).fold(f64::INFINITY, f64::min);
    (ess.len() as f64, 1.0 / min_area)
}

fn degree_rhs<T: Real>(cover: &Cover<T>) -> (usize, f64, f64) {
    let d = cover.degree();
    let e = cover.displacement_energy().f64();
    let rhs = if e.is_finite() { 1.0 / (2.0 * (d * d) as f64 * e) } else { 0.0 };
    (d, e, rhs)
}

/// Everything the bound checks need for one pair of partitions.
pub fn bracket_report<T: Real>(f: &PartitionOfUnity<T>, g: &PartitionOfUnity<T>) -> Result<BracketReport<T>> {
    f.grid().same_as(g.grid())?;
    let pb = pair_brackets(f.fields(), g.fields())?;
    let maxima = node_cube_maxima(&pb, 0);
    let pb_up = pb_upper_from_maxima(&pb, &maxima);
    let pb_lower = pb_lower_from(&pb, &maxima);
    let grid = f.grid();
    let sup_sum = pb.sum.iter().copied().fold(T::zero(), T::max);
    let all: Vec<T> = pb.pair_l1.iter().flatten().copied().collect();
    let total_l1 = pairwise_sum(&all);

    let a = max_enclosing_area(f.cover()).max(max_enclosing_area(g.cover())).f64();
    let gen_cover_bound = if a.is_finite() && a > 0.0 { grid.total_area().f64() / (2.0 * a) } else { 0.0 };
    let (ess_l1_bound, ess_sup_bound) = essential_bounds(f.cover());
    let (_, _, degree_bound) = degree_rhs(f.cover());
    let sum_field = ScalarField::new(grid.clone(), pb.sum.clone())?;
    Ok(BracketReport {
        pair_l1: pb.pair_l1.clone(),
        sum_field,
        sup_sum,
        total_l1,
        pb_upper: pb_up,
        pb_lower,
        bounds: Bounds { gen_cover_bound, ess_l1_bound, ess_sup_bound, degree_bound },
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DegreeCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub degree: usize,
    pub energy: f64,
    pub pass: bool,
}

/// `max_ij ||{f_i, f_j}|| >= 1 / (2 d^2 e)` with relative slack `tol`.
pub fn degree_bound_check<T: Real>(f: &PartitionOfUnity<T>, tol: f64) -> Result<DegreeCheck> {
    let pb = pair_brackets(f.fields(), f.fields())?;
    let lhs = pb.pair_sup.iter().flatten().fold(0.0f64, |m, v| m.max(v.f64()));
    let (degree, energy, rhs) = degree_rhs(f.cover());
    Ok(DegreeCheck { lhs, rhs, degree, energy, pass: lhs >= rhs * (1.0 - tol) })
}

#[derive(Clone, Debug, Serialize)]
pub struct EssentialEntry {
    pub index: usize,
    pub row_l1: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct EssentialLedger {
    pub entries: Vec<EssentialEntry>,
    /// `sum_ij int |{f_i, f_j}|` against `|I_ess|`.
    pub total_l1: f64,
    pub total_bound: f64,
    pub total_pass: bool,
    /// `sup sum_ij |{f_i, f_j}|` against `1 / min essential area` (0 when no set is essential).
    pub sup_sum: f64,
    pub sup_bound: f64,
    pub sup_pass: bool,
    pub tolerance: f64,
}

impl EssentialLedger {
    pub fn pass(&self) -> bool {
        self.total_pass && self.sup_pass && self.entries.iter().all(|e| e.pass)
    }
}

/// Per essential index `i`, `sum_j int |{f_i, f_j}| >= 1 - tol`, plus the two aggregate bounds.
pub fn essential_bound_check<T: Real>(f: &PartitionOfUnity<T>, tol: f64) -> Result<EssentialLedger> {
    small_disc_hypothesis(f.cover())?;
    let pb = pair_brackets(f.fields(), f.fields())?;
    let cover = f.cover();
    let ess = cover.essential_indices();
    // fields map to sets through the subordination; sum rows of fields in set i
    let mut entries = Vec::new();
    for &set in &ess {
        let row_l1: f64 = f
            .subordination()
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == set)
            .map(|(fi, _)| pb.pair_l1[fi].iter().map(|v| v.f64()).sum::<f64>())
            .sum();
        entries.push(EssentialEntry { index: set, row_l1, pass: row_l1 >= 1.0 - tol });
    }
    let total_l1: f64 = pb.pair_l1.iter().flatten().map(|v| v.f64()).sum();
    let sup_sum = pb.sum.iter().fold(0.0f64, |m, v| m.max(v.f64()));
    let (total_bound, sup_bound) = essential_bounds(cover);
    Ok(EssentialLedger {
        entries,
        total_l1,
        total_bound,
        total_pass: total_l1 >= total_bound * (1.0 - tol),
        sup_sum,
        sup_bound,
        sup_pass: sup_sum >= sup_bound * (1.0 - tol),
        tolerance: tol,
    })
}
