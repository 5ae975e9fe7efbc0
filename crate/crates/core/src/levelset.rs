//! Marching-squares level sets, crossing counts between two level sets, and a
//! numerical check of the coarea identity
//! `integral over (f,g)^-1(Omega) of |{f,g}| = integral over Omega of #(f^-1(s) ∩ g^-1(t)) ds dt`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::{classify, Crossing};
use crate::real::{pairwise_sum, Real};
use crate::surface::{poisson_bracket, ScalarField, SurfaceGrid};

/// Number of level perturbations tried before giving up.
pub const NUDGE_ATTEMPTS: usize = 8;
/// Relative size of one level perturbation step.
pub const NUDGE_STEP: f64 = 1e-9;
pub const DEFAULT_QUAD: usize = 64;

/// One marching-squares segment, in the chart frame of its cell.
///
/// Cells on a periodic seam use unwrapped coordinates (`x = lx` rather than `0`),
/// so two segments are only geometrically comparable when they share a cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Segment<T> {
    pub cell: usize,
    pub a: [T; 2],
    pub b: [T; 2],
}

impl<T: Real> Segment<T> {
    pub fn chart_length(&self) -> T {
        let dx = self.b[0] - self.a[0];
        let dy = self.b[1] - self.a[1];
        (dx * dx + dy * dy).sqrt()
    }

    pub fn to_f64(&self) -> ([f64; 2], [f64; 2]) {
        ([self.a[0].f64(), self.a[1].f64()], [self.b[0].f64(), self.b[1].f64()])
    }
}

/// A level set `f^-1(level)` as cell-tagged segments sorted by cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Contour<T> {
    pub level: T,
    pub owner: Option<usize>,
    pub segments: Vec<Segment<T>>,
}

impl<T: Real> Contour<T> {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn chart_length(&self) -> T {
        self.segments.iter().fold(T::zero(), |a, s| a + s.chart_length())
    }

    pub fn with_owner(mut self, owner: usize) -> Self {
        self.owner = Some(owner);
        self
    }
}

/// Cell index, corner chart coordinates and corner values for cell `(i, j)`.
///
/// Corners run `(i, j)`, `(i+1, j)`, `(i+1, j+1)`, `(i, j+1)`.
pub(crate) fn cell_corners<T: Real>(grid: &SurfaceGrid<T>, values: &[T], i: usize, j: usize) -> ([[T; 2]; 4], [T; 4]) {
    let (hx, hy) = grid.spacing();
    let i1 = grid.step_x(i, 1).expect("cell rows exclude the last sphere row");
    let j1 = grid.step_y(j, 1);
    let x0 = grid.x_origin() + T::count(i) * hx;
    let x1 = grid.x_origin() + T::count(i + 1) * hx;
    let y0 = T::count(j) * hy;
    let y1 = T::count(j + 1) * hy;
    let v = [values[grid.index(i, j)], values[grid.index(i1, j)], values[grid.index(i1, j1)], values[grid.index(i, j1)]];
    ([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], v)
}

// edge k joins these corners, always interpolated in this orientation so that
// neighbouring cells produce identical points on shared edges
const EDGES: [(usize, usize); 4] = [(0, 1), (1, 2), (3, 2), (0, 3)];

fn edge_point<T: Real>(p: &[[T; 2]; 4], v: &[T; 4], e: usize, s: T) -> [T; 2] {
    let (a, b) = EDGES[e];
    let t = (s - v[a]) / (v[b] - v[a]);
    [p[a][0] + t * (p[b][0] - p[a][0]), p[a][1] + t * (p[b][1] - p[a][1])]
}

/// Segments of one cell at level `s`; `None` when a corner equals the level.
fn cell_segments<T: Real>(p: &[[T; 2]; 4], v: &[T; 4], s: T, out: &mut Vec<([T; 2], [T; 2])>) -> Option<()> {
    if v.contains(&s) {
        return None;
    }
    let above = v.map(|x| x > s);
    let mut crossed = [0usize; 4];
    let mut n = 0;
    for (e, &(a, b)) in EDGES.iter().enumerate() {
        if above[a] != above[b] {
            crossed[n] = e;
            n += 1;
        }
    }
    match n {
        0 => {}
        2 => out.push((edge_point(p, v, crossed[0], s), edge_point(p, v, crossed[1], s))),
        _ => {
            // saddle: cut off each corner whose side disagrees with the cell-centre average
            let centre = (v[0] + v[1] + v[2] + v[3]) / T::lit(4.0) > s;
            for c in 0..4 {
                if above[c] != centre {
                    let (ea, eb) = match c {
                        0 => (3, 0),
                        1 => (0, 1),
                        2 => (1, 2),
                        _ => (2, 3),
                    };
                    out.push((edge_point(p, v, ea, s), edge_point(p, v, eb, s)));
                }
            }
        }
    }
    Some(())
}

/// Contour at exactly `s`, or `None` if the level touches a node or yields a zero-length segment.
fn try_extract<T: Real>(f: &ScalarField<T>, s: T) -> Option<Contour<T>> {
    let grid = f.grid();
    let values = f.values();
    let ny = grid.ny();
    let rows: Vec<Option<Vec<Segment<T>>>> = (0..grid.cell_rows())
        .into_par_iter()
        .map(|i| {
            let mut segs = Vec::new();
            let mut buf = Vec::with_capacity(2);
            let i1 = grid.step_x(i, 1).expect("cell rows exclude the last sphere row");
            let (row, next) = (&values[i * ny..(i + 1) * ny], &values[i1 * ny..(i1 + 1) * ny]);
            for j in 0..ny {
                let j1 = if j + 1 == ny { 0 } else { j + 1 };
                let corners = [row[j], next[j], next[j1], row[j1]];
                let up = corners.iter().filter(|&&x| x > s).count();
                if (up == 0 || up == 4) && corners.iter().all(|&x| x != s) {
                    continue;
                }
                let (p, v) = cell_corners(grid, values, i, j);
                buf.clear();
                cell_segments(&p, &v, s, &mut buf)?;
                for &(a, b) in &buf {
                    if a == b {
                        return None;
                    }
                    segs.push(Segment { cell: i * ny + j, a, b });
                }
            }
            Some(segs)
        })
        .collect();
    let mut segments = Vec::new();
    for r in rows {
        segments.extend(r?);
    }
    Some(Contour { level: s, owner: None, segments })
}

/// Perturbation step `NUDGE_STEP * range(f)` (unit range for constant fields).
pub fn nudge_step<T: Real>(f: &ScalarField<T>) -> T {
    let range = f.max() - f.min();
    let range = if range > T::zero() { range } else { T::one() };
    T::lit(NUDGE_STEP) * range
}

/// Level set of `f` at `s`, nudged upward by up to [`NUDGE_ATTEMPTS`] steps if `s` is not generic.
///
/// The level actually used is stored in [`Contour::level`].
pub fn extract_level<T: Real>(f: &ScalarField<T>, s: T) -> Result<Contour<T>> {
    let step = nudge_step(f);
    for k in 0..=NUDGE_ATTEMPTS {
        let level = s + T::count(k) * step;
        if let Some(c) = try_extract(f, level) {
            return Ok(c);
        }
    }
    Err(Error::DegenerateLevel { level: s.f64(), attempts: NUDGE_ATTEMPTS })
}

/// Proper crossings between two segment lists sorted by cell, or `None` on a degenerate pair.
pub fn count_crossings<T: Real>(a: &[Segment<T>], b: &[Segment<T>]) -> Option<usize> {
    let mut count = 0;
    let (mut p, mut q) = (0, 0);
    while p < a.len() && q < b.len() {
        let (ca, cb) = (a[p].cell, b[q].cell);
        if ca < cb {
            p += 1;
        } else if cb < ca {
            q += 1;
        } else {
            let pe = p + a[p..].iter().take_while(|s| s.cell == ca).count();
            let qe = q + b[q..].iter().take_while(|s| s.cell == ca).count();
            for sa in &a[p..pe] {
                let (a0, a1) = sa.to_f64();
                for sb in &b[q..qe] {
                    let (b0, b1) = sb.to_f64();
                    match classify(a0, a1, b0, b1) {
                        Crossing::Proper => count += 1,
                        Crossing::Disjoint => {}
                        Crossing::Degenerate => return None,
                    }
                }
            }
            p = pe;
            q = qe;
        }
    }
    Some(count)
}

/// Generic crossing count of `f^-1(s)` and `g^-1(t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Intersections<T> {
    pub count: usize,
    pub s: T,
    pub t: T,
    pub nudges: usize,
}

/// Number of points in `f^-1(s) ∩ g^-1(t)`, nudging both levels jointly until generic.
pub fn count_intersections<T: Real>(f: &ScalarField<T>, s: T, g: &ScalarField<T>, t: T) -> Result<Intersections<T>> {
    f.grid().same_as(g.grid())?;
    let (sf, sg) = (nudge_step(f), nudge_step(g));
    for k in 0..=NUDGE_ATTEMPTS {
        let (ls, lt) = (s + T::count(k) * sf, t + T::count(k) * sg);
        let (Some(cf), Some(cg)) = (try_extract(f, ls), try_extract(g, lt)) else {
            continue;
        };
        if let Some(count) = count_crossings(&cf.segments, &cg.segments) {
            return Ok(Intersections { count, s: ls, t: lt, nudges: k });
        }
    }
    Err(Error::DegenerateLevel { level: s.f64(), attempts: NUDGE_ATTEMPTS })
}

/// Half-open rectangle `[s0, s1) x [t0, t1)` in the value plane of `(f, g)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub s: [f64; 2],
    pub t: [f64; 2],
}

impl Rect {
    pub fn new(s0: f64, s1: f64, t0: f64, t1: f64) -> Self {
        Self { s: [s0, s1], t: [t0, t1] }
    }

    pub fn measure(&self) -> f64 {
        (self.s[1] - self.s[0]).max(0.0) * (self.t[1] - self.t[0]).max(0.0)
    }

    pub fn contains(&self, s: f64, t: f64) -> bool {
        s >= self.s[0] && s < self.s[1] && t >= self.t[0] && t < self.t[1]
    }

    fn midpoints(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        let h = (hi - lo) / n as f64;
        (0..n).map(|a| lo + (a as f64 + 0.5) * h).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoareaReport {
    pub lhs: f64,
    pub rhs: f64,
    pub rel_err: f64,
    /// Number of `(s, t)` quadrature samples.
    pub samples: usize,
    /// Samples whose crossing count came out odd (zero for closed generic contours).
    pub odd_samples: usize,
    /// Samples that needed a joint level perturbation beyond the per-contour one.
    pub nudged_samples: usize,
    pub max_count: usize,
}

/// Both sides of the coarea identity over a union of rectangles.
///
/// The left side integrates `|{f,g}|` over nodes whose value pair falls in a rectangle;
/// the right side applies a `quad x quad` midpoint rule to the crossing count in each.
pub fn coarea_check<T: Real>(f: &ScalarField<T>, g: &ScalarField<T>, rects: &[Rect], quad: usize) -> Result<CoareaReport> {
    let bracket = poisson_bracket(f, g)?;
    let area = f.grid().cell_area().f64();
    let quad = quad.max(1);
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    let mut report = CoareaReport { lhs: 0.0, rhs: 0.0, rel_err: 0.0, samples: 0, odd_samples: 0, nudged_samples: 0, max_count: 0 };
    for r in rects {
        let masked: Vec<f64> = bracket
            .values()
            .iter()
            .zip(f.values().iter().zip(g.values()))
            .map(|(b, (fv, gv))| if r.contains(fv.f64(), gv.f64()) { b.f64().abs() * area } else { 0.0 })
            .collect();
        lhs += pairwise_sum(&masked);
        if r.measure() == 0.0 {
            continue;
        }
        let ss = Rect::midpoints(r.s[0], r.s[1], quad);
        let ts = Rect::midpoints(r.t[0], r.t[1], quad);
        let cf: Vec<Contour<T>> = ss.par_iter().map(|&s| extract_level(f, T::lit(s))).collect::<Result<_>>()?;
        let cg: Vec<Contour<T>> = ts.par_iter().map(|&t| extract_level(g, T::lit(t))).collect::<Result<_>>()?;
        let counts: Vec<(usize, bool)> = (0..quad * quad)
            .into_par_iter()
            .map(|k| {
                let (a, b) = (k / quad, k % quad);
                match count_crossings(&cf[a].segments, &cg[b].segments) {
                    Some(n) => Ok((n, false)),
                    None => count_intersections(f, cf[a].level, g, cg[b].level).map(|i| (i.count, true)),
                }
            })
            .collect::<Result<_>>()?;
        let total: usize = counts.iter().map(|c| c.0).sum();
        report.samples += counts.len();
        report.odd_samples += counts.iter().filter(|c| c.0 % 2 == 1).count();
        report.nudged_samples += counts.iter().filter(|c| c.1).count();
        report.max_count = report.max_count.max(counts.iter().map(|c| c.0).max().unwrap_or(0));
        rhs += total as f64 * r.measure() / (quad * quad) as f64;
    }
    report.lhs = lhs;
    report.rhs = rhs;
    report.rel_err = (lhs - rhs).abs() / lhs.max(rhs).max(f64::MIN_POSITIVE);
    Ok(report)
}

/// `[min, max]` value box of a field pair as a single rectangle, widened so the maxima are inside.
pub fn value_box<T: Real>(f: &ScalarField<T>, g: &ScalarField<T>) -> Rect {
    let widen = |lo: f64, hi: f64| [lo, hi + 1e-12 * (hi - lo).abs().max(1.0)];
    Rect { s: widen(f.min().f64(), f.max().f64()), t: widen(g.min().f64(), g.max().f64()) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn trig(n: usize) -> (ScalarField<f64>, ScalarField<f64>) {
        let grid = SurfaceGrid::torus(n, n, 1.0, 1.0).unwrap();
        let f = ScalarField::from_fn(&grid, |x, _| (2.0 * PI * x).cos());
        let g = ScalarField::from_fn(&grid, |_, y| (2.0 * PI * y).cos());
        (f, g)
    }

    #[test]
    fn cosine_zero_level_is_two_circles() {
        let (f, _) = trig(64);
        let c = extract_level(&f, 0.0).unwrap();
        let h = 1.0 / 64.0;
        assert_eq!(c.len(), 128);
        for s in &c.segments {
            for p in [s.a, s.b] {
                assert!((p[0] - 0.25).abs() < h || (p[0] - 0.75).abs() < h);
            }
        }
        assert!((c.chart_length() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn level_above_range_is_empty() {
        let (f, _) = trig(32);
        assert!(extract_level(&f, 1.5).unwrap().is_empty());
    }

    #[test]
    fn node_level_is_nudged() {
        let (f, _) = trig(32);
        // x = 0 nodes take the value 1 exactly; 0.5 nodes take -1
        let c = extract_level(&f, f.values()[8 * 32]).unwrap();
        assert!(c.level > f.values()[8 * 32]);
    }

    #[test]
    fn segment_count_scales_linearly() {
        let a = extract_level(&trig(32).0, 0.3).unwrap().len();
        let b = extract_level(&trig(64).0, 0.3).unwrap().len();
        assert_eq!(b, 2 * a);
    }

    #[test]
    fn four_crossings_for_transverse_circles() {
        let (f, g) = trig(64);
        for (s, t) in [(0.1, -0.3), (0.77, 0.5), (-0.95, 0.95)] {
            assert_eq!(count_intersections(&f, s, &g, t).unwrap().count, 4);
        }
        assert_eq!(count_intersections(&f, 1.2, &g, 0.0).unwrap().count, 0);
        assert_eq!(count_intersections(&f, 0.2, &f, 0.4).unwrap().count, 0);
    }

    #[test]
    fn saddle_cells_produce_two_segments() {
        let p = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let mut out = Vec::new();
        cell_segments(&p, &[1.0, -1.0, 1.0, -1.0], 0.1, &mut out).unwrap();
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn coarea_splits_additively() {
        let (f, g) = trig(64);
        let whole = coarea_check(&f, &g, &[Rect::new(-1.0, 1.0, -1.0, 1.0)], 8).unwrap();
        let halves = coarea_check(&f, &g, &[Rect::new(-1.0, 0.0, -1.0, 1.0), Rect::new(0.0, 1.0, -1.0, 1.0)], 8).unwrap();
        assert!((whole.lhs - halves.lhs).abs() < 1e-9);
        assert_eq!(whole.odd_samples, 0);
    }

    #[test]
    fn degenerate_rectangle_gives_zero() {
        let (f, g) = trig(32);
        let r = coarea_check(&f, &g, &[Rect::new(1.0, 1.0, -1.0, 1.0)], 8).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
    }
}
