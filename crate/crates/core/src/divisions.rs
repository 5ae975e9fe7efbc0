//! Curve systems cut out of cover boundaries, their faces, and crossing counts between two of them.
//!
//! A cover is given by sets `U = {field > level}` whose boundaries are marching-squares
//! contours. For an order `alpha` of the sets, the division keeps the part of each
//! boundary `∂U_alpha(i)` lying outside all sets placed before it. Crossings are counted
//! exactly on segments; faces are measured on a supersampled raster.

use std::borrow::Cow;
use std::sync::{Arc, OnceLock};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cover::{enclosing_disc_nodes, label_components, Connectivity, Cover};
use crate::error::{Error, Result};
use crate::geom::{classify, crossing_param, Crossing};
use crate::levelset::{cell_corners, count_crossings, extract_level, Contour, Segment};
use crate::partition::PartitionOfUnity;
use crate::real::Real;
use crate::surface::{ScalarField, SurfaceGrid};

/// Raster refinement used to measure faces.
pub const SUPERSAMPLE: usize = 4;
/// Relative magnitude of the level jitter applied after a genericity failure.
pub const JITTER: f64 = 1e-6;
pub const JITTER_ATTEMPTS: usize = 8;

fn not_generic(what: impl Into<String>) -> Error {
    Error::GenericityFailure(what.into())
}

fn lerp(a: [f64; 2], b: [f64; 2], t: f64) -> [f64; 2] {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

/// Open set `{field > level}` together with its boundary contour.
#[derive(Clone, Debug)]
pub struct BoundedSet<T> {
    field: Arc<ScalarField<T>>,
    level: T,
    contour: Contour<T>,
}

impl<T: Real> BoundedSet<T> {
    /// The level may be nudged to make the contour generic; [`BoundedSet::level`] reports the one used.
    pub fn new(field: Arc<ScalarField<T>>, level: T) -> Result<Self> {
        let contour = extract_level(&field, level)?;
        Ok(Self { level: contour.level, field, contour })
    }

    pub fn field(&self) -> &ScalarField<T> {
        &self.field
    }

    pub fn level(&self) -> T {
        self.level
    }

    pub fn contour(&self) -> &Contour<T> {
        &self.contour
    }

    pub fn contains_node(&self, k: usize) -> bool {
        self.field.values()[k] > self.level
    }

    pub fn mask(&self) -> Vec<bool> {
        self.field.values().iter().map(|&v| v > self.level).collect()
    }

    pub fn is_empty(&self) -> bool {
        !self.field.values().iter().any(|&v| v > self.level)
    }

    fn segments_in(&self, cell: usize) -> &[Segment<T>] {
        let s = &self.contour.segments;
        let lo = s.partition_point(|x| x.cell < cell);
        let len = s[lo..].iter().take_while(|x| x.cell == cell).count();
        &s[lo..lo + len]
    }

    /// Membership of a chart point of `cell`, by crossing parity along the chord from
    /// the cell's first corner. `None` if the chord meets the boundary degenerately.
    pub fn contains_point(&self, cell: usize, p: [f64; 2]) -> Option<bool> {
        let grid = self.field.grid();
        let (i, j) = grid.ij(cell);
        let (corners, values) = cell_corners(grid, self.field.values(), i, j);
        let c0 = [corners[0][0].f64(), corners[0][1].f64()];
        let mut inside = values[0] > self.level;
        for s in self.segments_in(cell) {
            let (a, b) = s.to_f64();
            match classify(c0, p, a, b) {
                Crossing::Proper => inside = !inside,
                Crossing::Disjoint => {}
                Crossing::Degenerate => return None,
            }
        }
        Some(inside)
    }
}

/// Cover whose sets carry contour boundaries.
#[derive(Clone, Debug)]
pub struct BoundaryCover<T> {
    grid: SurfaceGrid<T>,
    sets: Vec<BoundedSet<T>>,
    // CSR list of the sets with boundary segments in each cell
    cell_start: Vec<usize>,
    cell_sets: Vec<u32>,
}

impl<T: Real> BoundaryCover<T> {
    /// Empty sets are allowed; every node must lie in some set.
    pub fn new(grid: SurfaceGrid<T>, sets: Vec<BoundedSet<T>>) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::InvalidCover("no sets".into()));
        }
        for s in &sets {
            grid.same_as(s.field.grid())?;
        }
        if let Some(k) = (0..grid.len()).find(|&k| !sets.iter().any(|s| s.contains_node(k))) {
            return Err(Error::InvalidCover(format!("node {k} is not covered")));
        }
        let mut counts = vec![0usize; grid.len() + 1];
        let mut touched: Vec<Vec<usize>> = Vec::with_capacity(sets.len());
        for s in &sets {
            let mut cells: Vec<usize> = s.contour.segments.iter().map(|x| x.cell).collect();
            cells.dedup();
            for &c in &cells {
                counts[c + 1] += 1;
            }
            touched.push(cells);
        }
        for c in 0..grid.len() {
            counts[c + 1] += counts[c];
        }
        let mut fill = counts.clone();
        let mut cell_sets = vec![0u32; counts[grid.len()]];
        for (id, cells) in touched.iter().enumerate() {
            for &c in cells {
                cell_sets[fill[c]] = id as u32;
                fill[c] += 1;
            }
        }
        Ok(Self { grid, sets, cell_start: counts, cell_sets })
    }

    /// Sets `{fields[i] > levels[i]}`.
    pub fn from_fields(fields: Vec<Arc<ScalarField<T>>>, levels: &[T]) -> Result<Self> {
        if fields.len() != levels.len() || fields.is_empty() {
            return Err(Error::InvalidArgument("need one level per field".into()));
        }
        let grid = fields[0].grid().clone();
        let sets = fields.into_par_iter().zip(levels.par_iter()).map(|(f, &l)| BoundedSet::new(f, l)).collect::<Result<_>>()?;
        Self::new(grid, sets)
    }

    pub fn grid(&self) -> &SurfaceGrid<T> {
        &self.grid
    }

    pub fn sets(&self) -> &[BoundedSet<T>] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    fn sets_in_cell(&self, cell: usize) -> &[u32] {
        &self.cell_sets[self.cell_start[cell]..self.cell_start[cell + 1]]
    }

    /// Number of sets containing each node.
    pub fn multiplicity(&self) -> Vec<usize> {
        (0..self.grid.len()).into_par_iter().map(|k| self.sets.iter().filter(|s| s.contains_node(k)).count()).collect()
    }

    /// The nonempty sets as a plain mask cover.
    pub fn to_cover(&self) -> Result<Cover<T>> {
        let masks = self.sets.iter().map(|s| s.mask()).filter(|m| m.iter().any(|&b| b)).collect();
        Cover::new(self.grid.clone(), masks)
    }

    /// Same sets with every level moved by seeded uniform noise of size `JITTER * range`.
    pub fn jittered(&self, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let levels: Vec<T> = self
            .sets
            .iter()
            .map(|s| {
                let range = s.field.max() - s.field.min();
                let range = if range > T::zero() { range } else { T::one() };
                s.level + T::lit(rng.gen_range(-1.0..1.0) * JITTER) * range
            })
            .collect();
        Self::from_fields(self.sets.iter().map(|s| s.field.clone()).collect(), &levels)
    }

    /// Largest enclosing-disc area over the dilated connected components of the sets.
    ///
    /// `+inf` if some component fits in no disc.
    pub fn max_enclosing_area(&self) -> f64 {
        let grid = &self.grid;
        self.sets
            .par_iter()
            .map(|s| {
                let mask = crate::cover::dilate(grid, &s.mask());
                let (labels, sizes) = label_components(grid, &mask, Connectivity::Four);
                let mut members: Vec<Vec<usize>> = vec![Vec::new(); sizes.len()];
                for (k, &l) in labels.iter().enumerate() {
                    if l != u32::MAX {
                        members[l as usize].push(k);
                    }
                }
                members
                    .iter()
                    .enumerate()
                    .map(|(c, m)| match enclosing_disc_nodes(grid, m, |k| labels[k] == c as u32) {
                        Ok(d) => d.len() as f64 * grid.cell_area().f64(),
                        Err(_) => f64::INFINITY,
                    })
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }
}

/// Where a division segment came from: set, segment of that set's contour, and the kept parameter span.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PieceInfo {
    pub source: usize,
    pub origin: usize,
    pub span: [f64; 2],
}

/// A system of curves given as cell-tagged segments.
#[derive(Clone, Debug)]
pub struct Division<T> {
    grid: SurfaceGrid<T>,
    segments: Vec<Segment<T>>,
    info: Vec<PieceInfo>,
    faces: OnceLock<Faces<T>>,
}

impl<T: Real> Division<T> {
    pub fn new(grid: SurfaceGrid<T>, mut pieces: Vec<(Segment<T>, PieceInfo)>) -> Self {
        pieces.sort_by(|a, b| {
            (a.0.cell, a.1.source, a.1.origin).cmp(&(b.0.cell, b.1.source, b.1.origin)).then(a.1.span[0].total_cmp(&b.1.span[0]))
        });
        let (segments, info) = pieces.into_iter().unzip();
        Self { grid, segments, info, faces: OnceLock::new() }
    }

    pub fn empty(grid: SurfaceGrid<T>) -> Self {
        Self::new(grid, Vec::new())
    }

    /// Union of whole contours; contour `c` becomes source `c`.
    pub fn from_contours(grid: SurfaceGrid<T>, contours: &[Contour<T>]) -> Self {
        let pieces = contours
            .iter()
            .enumerate()
            .flat_map(|(c, k)| k.segments.iter().enumerate().map(move |(o, s)| (*s, PieceInfo { source: c, origin: o, span: [0.0, 1.0] })))
            .collect();
        Self::new(grid, pieces)
    }

    pub fn grid(&self) -> &SurfaceGrid<T> {
        &self.grid
    }

    pub fn segments(&self) -> &[Segment<T>] {
        &self.segments
    }

    pub fn info(&self) -> &[PieceInfo] {
        &self.info
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn chart_length(&self) -> T {
        self.segments.iter().fold(T::zero(), |a, s| a + s.chart_length())
    }

    /// Faces on the supersampled raster, computed on first use.
    pub fn faces(&self) -> &Faces<T> {
        self.faces.get_or_init(|| Faces::rasterize(&self.grid, &self.segments))
    }

    /// Copy without the pieces flagged in `remove`.
    pub fn without(&self, remove: &[bool]) -> Self {
        let pieces = self.segments.iter().zip(&self.info).zip(remove).filter(|(_, &r)| !r).map(|((s, i), _)| (*s, *i)).collect();
        Self::new(self.grid.clone(), pieces)
    }
}

/// Complementary components of a rasterized curve system.
#[derive(Clone, Debug)]
pub struct Faces<T> {
    fine: SurfaceGrid<T>,
    curve: Vec<bool>,
    labels: Vec<u32>,
    start: Vec<usize>,
    nodes: Vec<usize>,
}

impl<T: Real> Faces<T> {
    fn rasterize(grid: &SurfaceGrid<T>, segments: &[Segment<T>]) -> Self {
        let fine = grid.refined(SUPERSAMPLE);
        let (hx, hy) = fine.spacing();
        let step = hx.min(hy) / T::lit(2.0);
        let mut curve = vec![false; fine.len()];
        for s in segments {
            let n = (s.chart_length() / step).ceil().to_usize().unwrap_or(0) + 1;
            for q in 0..=n {
                let t = T::count(q) / T::count(n);
                let p = [s.a[0] + t * (s.b[0] - s.a[0]), s.a[1] + t * (s.b[1] - s.a[1])];
                curve[fine.nearest_node(p)] = true;
            }
        }
        let open: Vec<bool> = curve.iter().map(|&c| !c).collect();
        let (labels, sizes) = label_components(&fine, &open, Connectivity::Four);
        let mut start = vec![0usize; sizes.len() + 1];
        for (f, &s) in sizes.iter().enumerate() {
            start[f + 1] = start[f] + s;
        }
        let mut fill = start.clone();
        let mut nodes = vec![0usize; start[sizes.len()]];
        for (k, &l) in labels.iter().enumerate() {
            if l != u32::MAX {
                nodes[fill[l as usize]] = k;
                fill[l as usize] += 1;
            }
        }
        Self { fine, curve, labels, start, nodes }
    }

    /// The supersampled grid the faces live on.
    pub fn grid(&self) -> &SurfaceGrid<T> {
        &self.fine
    }

    pub fn len(&self) -> usize {
        self.start.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, k: usize) -> Option<usize> {
        let l = self.labels[k];
        (l != u32::MAX).then_some(l as usize)
    }

    pub fn is_curve(&self, k: usize) -> bool {
        self.curve[k]
    }

    pub fn members(&self, f: usize) -> &[usize] {
        &self.nodes[self.start[f]..self.start[f + 1]]
    }

    pub fn area(&self, f: usize) -> T {
        T::count(self.members(f).len()) * self.fine.cell_area()
    }

    /// Area of the raster pixels occupied by curves.
    pub fn curve_area(&self) -> T {
        T::count(self.curve.iter().filter(|&&c| c).count()) * self.fine.cell_area()
    }

    pub fn face_at(&self, p: [T; 2]) -> Option<usize> {
        self.label(self.fine.nearest_node(p))
    }

    fn dilated_nodes(&self, f: usize) -> Vec<usize> {
        let g = &self.fine;
        let mut out = Vec::with_capacity(self.members(f).len() * 2);
        for &k in self.members(f) {
            out.push(k);
            // interior nodes add nothing new
            if g.neighbors4(k).all(|n| self.labels[n] == f as u32) {
                continue;
            }
            out.extend(g.neighbors8(k));
        }
        out
    }

    /// Enclosing-disc area of the face grown by one raster cell, `+inf` if none exists.
    pub fn enclosing_area(&self, f: usize) -> f64 {
        let nodes = self.dilated_nodes(f);
        let mut mark = vec![false; self.fine.len()];
        nodes.iter().for_each(|&k| mark[k] = true);
        match enclosing_disc_nodes(&self.fine, &nodes, |k| mark[k]) {
            Ok(d) => d.len() as f64 * self.fine.cell_area().f64(),
            Err(_) => f64::INFINITY,
        }
    }
}

/// Kept parameter intervals of `seg` (a boundary segment of set `owner`) after
/// removing every set ranked before `owner`.
fn clip_segment<T: Real>(cover: &BoundaryCover<T>, rank: &[usize], owner: usize, seg: &Segment<T>) -> Result<Vec<[f64; 2]>> {
    let my_rank = rank[owner];
    let touching = cover.sets_in_cell(seg.cell);
    // a set with no boundary in the cell contains all of it or none of it; the cell's first corner is its node
    for (j, set) in cover.sets.iter().enumerate() {
        if rank[j] < my_rank && set.contains_node(seg.cell) && !touching.contains(&(j as u32)) {
            return Ok(Vec::new());
        }
    }
    let (a, b) = seg.to_f64();
    let mut kept = vec![[0.0, 1.0]];
    for &j in touching {
        let j = j as usize;
        if rank[j] >= my_rank {
            continue;
        }
        let set = &cover.sets[j];
        let mut cuts = vec![0.0];
        for s in set.segments_in(seg.cell) {
            let (c, d) = s.to_f64();
            match classify(a, b, c, d) {
                Crossing::Proper => cuts.push(crossing_param(a, b, c, d)),
                Crossing::Disjoint => {}
                Crossing::Degenerate => return Err(not_generic(format!("boundaries of sets {owner} and {j} touch in cell {}", seg.cell))),
            }
        }
        cuts[1..].sort_by(f64::total_cmp);
        cuts.push(1.0);
        let probe = lerp(a, b, 0.5 * (cuts[0] + cuts[1]));
        let mut inside =
            set.contains_point(seg.cell, probe).ok_or_else(|| not_generic(format!("membership chord of set {j} is degenerate")))?;
        let mut outside = Vec::new();
        for w in cuts.windows(2) {
            if !inside {
                outside.push([w[0], w[1]]);
            }
            inside = !inside;
        }
        kept = intersect(&kept, &outside);
        if kept.is_empty() {
            break;
        }
    }
    Ok(kept)
}

fn intersect(a: &[[f64; 2]], b: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    let (mut p, mut q) = (0, 0);
    while p < a.len() && q < b.len() {
        let lo = a[p][0].max(b[q][0]);
        let hi = a[p][1].min(b[q][1]);
        if lo < hi {
            out.push([lo, hi]);
        }
        if a[p][1] < b[q][1] {
            p += 1;
        } else {
            q += 1;
        }
    }
    out
}

fn ranks(alpha: &[usize], n: usize) -> Result<Vec<usize>> {
    let mut rank = vec![usize::MAX; n];
    if alpha.len() != n {
        return Err(Error::InvalidArgument(format!("order has {} entries for {n} sets", alpha.len())));
    }
    for (p, &i) in alpha.iter().enumerate() {
        if i >= n || rank[i] != usize::MAX {
            return Err(Error::InvalidArgument("order is not a permutation".into()));
        }
        rank[i] = p;
    }
    Ok(rank)
}

/// Boundary pieces of each set `alpha[p]` lying outside the sets `alpha[..p]`.
pub fn division_from_cover_order<T: Real>(cover: &BoundaryCover<T>, alpha: &[usize]) -> Result<Division<T>> {
    let rank = ranks(alpha, cover.len())?;
    let per_set: Vec<Vec<(Segment<T>, PieceInfo)>> = (0..cover.len())
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::new();
            for (o, seg) in cover.sets[i].contour.segments.iter().enumerate() {
                for span in clip_segment(cover, &rank, i, seg)? {
                    let at = |t: f64| {
                        let t = T::lit(t);
                        [seg.a[0] + t * (seg.b[0] - seg.a[0]), seg.a[1] + t * (seg.b[1] - seg.a[1])]
                    };
                    let piece = Segment { cell: seg.cell, a: at(span[0]), b: at(span[1]) };
                    out.push((piece, PieceInfo { source: i, origin: o, span }));
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(Division::new(cover.grid.clone(), per_set.into_iter().flatten().collect()))
}

/// Exact number of proper crossings between two divisions on the same grid.
pub fn count_division_intersections<T: Real>(d1: &Division<T>, d2: &Division<T>) -> Result<usize> {
    d1.grid.same_as(&d2.grid)?;
    count_crossings(&d1.segments, &d2.segments).ok_or_else(|| not_generic("divisions meet at a vertex or overlap"))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FaceReport {
    pub face: usize,
    pub area: f64,
    pub enclosing_area: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ADivisionCheck {
    pub area_bound: f64,
    pub pass: bool,
    /// First face whose enclosing disc is larger than the bound.
    pub violating: Option<usize>,
    pub max_enclosing_area: f64,
    pub faces: Vec<FaceReport>,
}

/// Whether every face, grown by one raster cell, fits in a disc of area at most `area_bound`.
pub fn is_a_division<T: Real>(d: &Division<T>, area_bound: f64) -> ADivisionCheck {
    let faces = d.faces();
    let reports: Vec<FaceReport> = (0..faces.len())
        .into_par_iter()
        .map(|f| FaceReport { face: f, area: faces.area(f).f64(), enclosing_area: faces.enclosing_area(f) })
        .collect();
    let violating = reports.iter().find(|r| r.enclosing_area > area_bound).map(|r| r.face);
    let max_enclosing_area = reports.iter().map(|r| r.enclosing_area).fold(0.0, f64::max);
    ADivisionCheck { area_bound, pass: violating.is_none(), violating, max_enclosing_area, faces: reports }
}

/// Removes the curves inside the enclosing disc of every face that is not itself a disc,
/// repeating until all faces are discs.
pub fn trim_to_disc_faces<T: Real>(d: &Division<T>) -> Result<Division<T>> {
    let mut current = d.clone();
    loop {
        let faces = current.faces();
        let fine = faces.grid();
        let mut in_disc = vec![false; fine.len()];
        let mut remove = vec![false; current.len()];
        for f in 0..faces.len() {
            let members = faces.members(f);
            let disc = enclosing_disc_nodes(fine, members, |k| faces.labels[k] == f as u32)
                .map_err(|_| Error::HypothesisViolation { id: f, reason: "face is not contained in a disc".into() })?;
            if disc.len() == members.len() {
                continue;
            }
            disc.iter().for_each(|&k| in_disc[k] = true);
            for (p, s) in current.segments.iter().enumerate() {
                let two = T::lit(2.0);
                let mid = [(s.a[0] + s.b[0]) / two, (s.a[1] + s.b[1]) / two];
                if in_disc[fine.nearest_node(mid)] {
                    remove[p] = true;
                }
            }
            disc.iter().for_each(|&k| in_disc[k] = false);
        }
        if !remove.iter().any(|&r| r) {
            return Ok(current);
        }
        current = current.without(&remove);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaximalFaces {
    pub first: Vec<usize>,
    pub second: Vec<usize>,
    pub first_area: f64,
    pub second_area: f64,
    /// Fraction of the surface covered by the closures (one-cell dilations) of all maximal faces.
    pub covered_fraction: f64,
}

/// Whether face `f` of `a` lies inside a face of `b` that differs from it.
///
/// Pixels of `f` on the curves of `b` are ignored.
fn properly_contained<T: Real>(a: &Faces<T>, f: usize, b: &Faces<T>) -> bool {
    let mut target = None;
    let mut exact = true;
    for &k in a.members(f) {
        match b.label(k) {
            None => exact = false,
            Some(g) => match target {
                None => target = Some(g),
                Some(t) if t != g => return false,
                _ => {}
            },
        }
    }
    match target {
        None => false,
        Some(g) => !(exact && b.members(g).len() == a.members(f).len()),
    }
}

/// Faces of each division not properly contained in a face of the other.
pub fn maximal_faces<T: Real>(d1: &Division<T>, d2: &Division<T>) -> Result<MaximalFaces> {
    d1.grid.same_as(&d2.grid)?;
    let (a, b) = (d1.faces(), d2.faces());
    let first: Vec<usize> = (0..a.len()).into_par_iter().filter(|&f| !properly_contained(a, f, b)).collect();
    let second: Vec<usize> = (0..b.len()).into_par_iter().filter(|&f| !properly_contained(b, f, a)).collect();
    let fine = a.grid();
    let mut covered = vec![false; fine.len()];
    for (faces, list) in [(a, &first), (b, &second)] {
        for &f in list.iter() {
            for &k in faces.members(f) {
                covered[k] = true;
                fine.neighbors8(k).for_each(|n| covered[n] = true);
            }
        }
    }
    let area = |faces: &Faces<T>, list: &[usize]| list.iter().map(|&f| faces.area(f).f64()).sum::<f64>();
    Ok(MaximalFaces {
        first_area: area(a, &first),
        second_area: area(b, &second),
        covered_fraction: covered.iter().filter(|&&c| c).count() as f64 / fine.len() as f64,
        first,
        second,
    })
}

/// Crossings of `other` with the pieces of `d` bordering each face of `d`.
///
/// A piece borders the faces found a short step to either side of its midpoint.
pub fn face_boundary_crossings<T: Real>(d: &Division<T>, other: &Division<T>) -> Result<Vec<usize>> {
    d.grid.same_as(&other.grid)?;
    let faces = d.faces();
    let (hx, hy) = faces.grid().spacing();
    let offset = T::lit(1.5) * hx.max(hy);
    let mut totals = vec![0usize; faces.len()];
    for (p, s) in d.segments.iter().enumerate() {
        let n = count_crossings(&d.segments[p..p + 1], &other.segments).ok_or_else(|| not_generic("divisions meet at a vertex"))?;
        if n == 0 {
            continue;
        }
        let len = s.chart_length();
        if len == T::zero() {
            continue;
        }
        let two = T::lit(2.0);
        let mid = [(s.a[0] + s.b[0]) / two, (s.a[1] + s.b[1]) / two];
        let normal = [-(s.b[1] - s.a[1]) / len, (s.b[0] - s.a[0]) / len];
        let left = faces.face_at([mid[0] + offset * normal[0], mid[1] + offset * normal[1]]);
        let right = faces.face_at([mid[0] - offset * normal[0], mid[1] - offset * normal[1]]);
        for f in [left, right].into_iter().flatten() {
            totals[f] += n;
        }
        if let Some(f) = left.filter(|_| left == right) {
            totals[f] -= n;
        }
    }
    Ok(totals)
}

/// Superlevel sets `{f_i > s_ik}` with `s_ik` uniform in `[(k-1)/L, k/L]`, `k = 1..=L`.
///
/// Every node ends up in at least `L - |I|` sets; this is checked.
pub fn threshold_covers<T: Real>(partition: &PartitionOfUnity<T>, l: usize, seed: u64) -> Result<BoundaryCover<T>> {
    if l == 0 {
        return Err(Error::InvalidArgument("need at least one threshold per function".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fields = Vec::new();
    let mut levels = Vec::new();
    for f in partition.fields() {
        let shared = Arc::new(f.clone());
        for k in 0..l {
            fields.push(shared.clone());
            levels.push(T::lit((k as f64 + rng.gen::<f64>()) / l as f64));
        }
    }
    let cover = BoundaryCover::from_fields(fields, &levels)?;
    let need = l.saturating_sub(partition.len());
    let mult = cover.multiplicity();
    if let Some((node, &m)) = mult.iter().enumerate().find(|(_, &m)| m < need) {
        return Err(Error::HypothesisViolation { id: node, reason: format!("node covered {m} times, expected at least {need}") });
    }
    Ok(cover)
}

/// Factor `((L - |I| - |J|) / L)^2` relating the threshold-cover count to the partition bound.
pub fn threshold_bound_factor(l: usize, first: usize, second: usize) -> f64 {
    let r = (l as f64 - first as f64 - second as f64).max(0.0) / l as f64;
    r * r
}

/// Discs of a common radius on a torus; set `c` is `{radius - dist(., centers[c]) > 0}`.
pub fn disc_cover<T: Real>(grid: &SurfaceGrid<T>, centers: &[[f64; 2]], radius: f64) -> Result<BoundaryCover<T>> {
    let (lx, ly) = match grid.topology() {
        crate::surface::Topology::Torus { lx, ly } => (lx.f64(), ly.f64()),
        _ => return Err(Error::InvalidArgument("disc covers are built on the torus".into())),
    };
    let fields: Vec<Arc<ScalarField<T>>> = centers
        .iter()
        .map(|&[cx, cy]| {
            Arc::new(ScalarField::from_fn(grid, move |x, y| {
                let dx = (x.f64() - cx + 0.5 * lx).rem_euclid(lx) - 0.5 * lx;
                let dy = (y.f64() - cy + 0.5 * ly).rem_euclid(ly) - 0.5 * ly;
                T::lit(radius - (dx * dx + dy * dy).sqrt())
            }))
        })
        .collect();
    let levels = vec![T::zero(); fields.len()];
    BoundaryCover::from_fields(fields, &levels)
}

/// `copies` independently jittered copies of the `k x k` lattice of discs.
///
/// Centers sit at cell midpoints moved by up to `jitter` along each axis.
pub fn lattice_disc_cover<T: Real>(
    grid: &SurfaceGrid<T>,
    k: usize,
    radius: f64,
    jitter: f64,
    copies: usize,
    seed: u64,
) -> Result<BoundaryCover<T>> {
    let (lx, ly) = match grid.topology() {
        crate::surface::Topology::Torus { lx, ly } => (lx.f64(), ly.f64()),
        _ => return Err(Error::InvalidArgument("disc covers are built on the torus".into())),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = Vec::with_capacity(copies * k * k);
    for _ in 0..copies {
        for a in 0..k {
            for b in 0..k {
                let mut shift = || if jitter > 0.0 { rng.gen_range(-jitter..jitter) } else { 0.0 };
                centers.push([(a as f64 + 0.5) * lx / k as f64 + shift(), (b as f64 + 0.5) * ly / k as f64 + shift()]);
            }
        }
    }
    disc_cover(grid, &centers, radius)
}

fn permutation(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

/// A pair of divisions drawn for random orders of two covers.
#[derive(Clone, Debug)]
pub struct PairSample<T> {
    pub first: Division<T>,
    pub second: Division<T>,
    pub count: usize,
    /// Jitter rounds needed before the pair was generic (0 if none).
    pub attempts: usize,
}

/// Draws orders for both covers and counts crossings, re-jittering both covers' levels
/// up to [`JITTER_ATTEMPTS`] times when the configuration is not generic.
pub fn sample_division_pair<T: Real>(cu: &BoundaryCover<T>, cv: &BoundaryCover<T>, seed: u64) -> Result<PairSample<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha = permutation(cu.len(), &mut rng);
    let beta = permutation(cv.len(), &mut rng);
    let mut last = None;
    for attempt in 0..=JITTER_ATTEMPTS {
        let (u, v): (Cow<BoundaryCover<T>>, Cow<BoundaryCover<T>>) = if attempt == 0 {
            (Cow::Borrowed(cu), Cow::Borrowed(cv))
        } else {
            let s = rng.gen::<u64>();
            (Cow::Owned(cu.jittered(s)?), Cow::Owned(cv.jittered(s ^ 0x9e37_79b9_7f4a_7c15)?))
        };
        let attempt_result = division_from_cover_order(&u, &alpha)
            .and_then(|first| division_from_cover_order(&v, &beta).map(|second| (first, second)))
            .and_then(|(first, second)| count_division_intersections(&first, &second).map(|count| (first, second, count)));
        match attempt_result {
            Ok((first, second, count)) => return Ok(PairSample { first, second, count, attempts: attempt }),
            Err(Error::GenericityFailure(msg)) => last = Some(msg),
            Err(e) => return Err(e),
        }
    }
    Err(not_generic(last.unwrap_or_default()))
}

struct Tracked {
    set: usize,
    segment: usize,
    competitors: Vec<usize>,
}

/// Boundary-segment midpoints together with the other sets containing them.
fn tracked_points<T: Real>(cover: &BoundaryCover<T>, multiplicity: Option<usize>) -> Vec<Tracked> {
    (0..cover.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            cover.sets[i].contour.segments.iter().enumerate().filter_map(move |(o, seg)| {
                let (a, b) = seg.to_f64();
                let mid = lerp(a, b, 0.5);
                let touching = cover.sets_in_cell(seg.cell);
                let mut competitors = Vec::new();
                for (j, set) in cover.sets.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    let inside =
                        if touching.contains(&(j as u32)) { set.contains_point(seg.cell, mid)? } else { set.contains_node(seg.cell) };
                    if inside {
                        competitors.push(j);
                    }
                }
                match multiplicity {
                    Some(m) if competitors.len() != m => None,
                    _ => Some(Tracked { set: i, segment: o, competitors }),
                }
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SurvivalStats {
    pub permutations: usize,
    pub trials: usize,
    pub survived: usize,
    pub frequency: f64,
    /// `1 / (L + 1)`.
    pub bound: f64,
    /// Mean of `1 / (m + 1)` over the trials, `m` the number of other sets containing the point.
    pub predicted: f64,
    /// Binomial standard error of the frequency at probability `bound`.
    pub sigma: f64,
    /// Trials where the clipped curve disagreed with the order rule.
    pub mismatches: usize,
    pub degenerate: usize,
}

impl SurvivalStats {
    pub fn within_sigmas(&self, k: f64) -> bool {
        (self.frequency - self.bound).abs() <= k * self.sigma
    }
}

/// Monte-Carlo frequency with which a boundary point survives into the division of a random order.
///
/// Only points lying in exactly `multiplicity` other sets are tracked when given. In each
/// permutation, trials use points whose sets (own and containing) are pairwise disjoint, so
/// trials are independent.
pub fn survival_experiment<T: Real>(
    cover: &BoundaryCover<T>,
    l: usize,
    multiplicity: Option<usize>,
    permutations: usize,
    seed: u64,
) -> Result<SurvivalStats> {
    let tracked = tracked_points(cover, multiplicity);
    if tracked.is_empty() {
        return Err(Error::InvalidArgument("no boundary points with the requested multiplicity".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cover.len();
    let (mut trials, mut survived, mut mismatches, mut degenerate) = (0usize, 0usize, 0usize, 0usize);
    let mut predicted = 0.0;
    for _ in 0..permutations {
        let alpha = permutation(n, &mut rng);
        let rank = ranks(&alpha, n)?;
        let order = permutation(tracked.len(), &mut rng);
        let mut used = vec![false; n];
        for &t in &order {
            let p = &tracked[t];
            if used[p.set] || p.competitors.iter().any(|&c| used[c]) {
                continue;
            }
            used[p.set] = true;
            p.competitors.iter().for_each(|&c| used[c] = true);
            let seg = &cover.sets[p.set].contour.segments[p.segment];
            let kept = match clip_segment(cover, &rank, p.set, seg) {
                Ok(k) => k,
                Err(Error::GenericityFailure(_)) => {
                    degenerate += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let alive = kept.iter().any(|s| s[0] < 0.5 && 0.5 < s[1]);
            let rule = p.competitors.iter().all(|&c| rank[c] > rank[p.set]);
            trials += 1;
            survived += alive as usize;
            mismatches += (alive != rule) as usize;
            predicted += 1.0 / (p.competitors.len() as f64 + 1.0);
        }
    }
    let bound = 1.0 / (l as f64 + 1.0);
    let frequency = survived as f64 / trials.max(1) as f64;
    Ok(SurvivalStats {
        permutations,
        trials,
        survived,
        frequency,
        bound,
        predicted: predicted / trials.max(1) as f64,
        sigma: (bound * (1.0 - bound) / trials.max(1) as f64).sqrt(),
        mismatches,
        degenerate,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PermutationReport {
    pub l: usize,
    pub samples: usize,
    pub area: f64,
    /// Largest enclosing-disc area over the sets of both covers.
    pub area_bound: f64,
    /// `area / (2 A)`.
    pub division_bound: f64,
    /// Per-sample crossing counts; `None` for a genericity failure.
    pub counts: Vec<Option<usize>>,
    pub failures: usize,
    pub mean_count: f64,
    pub min_count: Option<usize>,
    /// Total crossings between all boundaries of the two covers.
    pub boundary_crossings: usize,
    /// `(L + 1)^2 * mean_count`.
    pub averaged_lower: f64,
    /// `(L + 1)^2 * area / (2 A)`.
    pub implied_lower: f64,
    pub survival: SurvivalStats,
}

/// Averages division crossing counts over random order pairs and compares with the total
/// boundary crossings of the covers.
pub fn permutation_average_experiment<T: Real>(
    cu: &BoundaryCover<T>,
    cv: &BoundaryCover<T>,
    l: usize,
    samples: usize,
    seed: u64,
) -> Result<PermutationReport> {
    cu.grid.same_as(&cv.grid)?;
    let area_bound = cu.max_enclosing_area().max(cv.max_enclosing_area());
    let area = cu.grid.total_area().f64();
    let division_bound = area / (2.0 * area_bound);
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let sample_seeds: Vec<u64> = (0..samples).map(|_| seeds.gen()).collect();
    let counts: Vec<Option<usize>> = sample_seeds
        .par_iter()
        .map(|&s| match sample_division_pair(cu, cv, s) {
            Ok(p) => Ok(Some(p.count)),
            Err(Error::GenericityFailure(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let ok: Vec<usize> = counts.iter().flatten().copied().collect();
    let mean_count = ok.iter().sum::<usize>() as f64 / ok.len().max(1) as f64;
    let boundary_crossings = cu
        .sets
        .par_iter()
        .map(|u| {
            cv.sets.iter().try_fold(0usize, |acc, v| {
                count_crossings(&u.contour.segments, &v.contour.segments)
                    .map(|n| acc + n)
                    .ok_or_else(|| not_generic("cover boundaries touch"))
            })
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    let survival = survival_experiment(cu, l, None, samples.max(1), seed ^ 0x5eed)?;
    let lp1 = (l + 1) as f64;
    Ok(PermutationReport {
        l,
        samples,
        area,
        area_bound,
        division_bound,
        failures: counts.iter().filter(|c| c.is_none()).count(),
        min_count: ok.iter().copied().min(),
        counts,
        mean_count,
        boundary_crossings,
        averaged_lower: lp1 * lp1 * mean_count,
        implied_lower: lp1 * lp1 * division_bound,
        survival,
    })
}
