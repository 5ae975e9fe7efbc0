//! Covers by node masks: degree, essential sets, connected components,
//! enclosing discs and displacement energy.
//!
//! Masks use 4-connectivity and their complements 8-connectivity, so a
//! diagonal chain of mask nodes never separates the complement and vice versa.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::surface::SurfaceGrid;

/// Neighborhood used by flood fills.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    Four,
    Eight,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverSet<T> {
    pub id: usize,
    pub mask: Vec<bool>,
    pub area: T,
}

/// Finite cover of the surface by node masks.
#[derive(Clone, Debug, PartialEq)]
pub struct Cover<T> {
    grid: SurfaceGrid<T>,
    sets: Vec<CoverSet<T>>,
}

pub fn mask_count(mask: &[bool]) -> usize {
    mask.iter().filter(|&&b| b).count()
}

pub fn mask_area<T: Real>(grid: &SurfaceGrid<T>, mask: &[bool]) -> T {
    T::count(mask_count(mask)) * grid.cell_area()
}

impl<T: Real> Cover<T> {
    /// Builds a cover, checking that masks are nonempty and jointly cover every node.
    pub fn new(grid: SurfaceGrid<T>, masks: Vec<Vec<bool>>) -> Result<Self> {
        if masks.is_empty() {
            return Err(Error::InvalidCover("no sets".into()));
        }
        let mut covered = vec![false; grid.len()];
        for (id, m) in masks.iter().enumerate() {
            if m.len() != grid.len() {
                return Err(Error::InvalidCover(format!("set {id} has {} nodes, grid has {}", m.len(), grid.len())));
            }
            if !m.iter().any(|&b| b) {
                return Err(Error::InvalidCover(format!("set {id} is empty")));
            }
            for (c, &b) in covered.iter_mut().zip(m) {
                *c |= b;
            }
        }
        if let Some(k) = covered.iter().position(|&c| !c) {
            return Err(Error::InvalidCover(format!("node {k} is not covered")));
        }
        let sets = masks
            .into_iter()
            .enumerate()
            .map(|(id, mask)| {
                let area = mask_area(&grid, &mask);
                CoverSet { id, mask, area }
            })
            .collect();
        Ok(Self { grid, sets })
    }

    pub fn grid(&self) -> &SurfaceGrid<T> {
        &self.grid
    }

    pub fn sets(&self) -> &[CoverSet<T>] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn masks(&self) -> impl Iterator<Item = &[bool]> {
        self.sets.iter().map(|s| s.mask.as_slice())
    }

    /// The cover with every set repeated `m` times, set `i` at indices `i*m .. i*m+m`.
    pub fn duplicated(&self, m: usize) -> Self {
        assert!(m >= 1);
        let masks = self.sets.iter().flat_map(|s| std::iter::repeat_n(s.mask.clone(), m)).collect();
        Self::new(self.grid.clone(), masks).expect("duplicating a cover keeps it a cover")
    }

    /// Number of sets containing each node.
    pub fn multiplicity(&self) -> Vec<usize> {
        let mut count = vec![0usize; self.grid.len()];
        for s in &self.sets {
            for (c, &b) in count.iter_mut().zip(&s.mask) {
                *c += b as usize;
            }
        }
        count
    }

    /// Maximal number of sets through a single node.
    pub fn degree(&self) -> usize {
        self.multiplicity().into_iter().max().unwrap_or(0)
    }

    /// Indices whose removal leaves some node uncovered.
    pub fn essential_indices(&self) -> Vec<usize> {
        let count = self.multiplicity();
        let mut essential = vec![false; self.sets.len()];
        for (k, &c) in count.iter().enumerate() {
            if c == 1 {
                if let Some(s) = self.sets.iter().find(|s| s.mask[k]) {
                    essential[s.id] = true;
                }
            }
        }
        essential.iter().enumerate().filter_map(|(i, &e)| e.then_some(i)).collect()
    }

    /// Largest displacement energy over all connected components of all sets.
    ///
    /// `+inf` when some component is not contained in a small disc.
    pub fn displacement_energy(&self) -> T {
        let mut worst = T::zero();
        for s in &self.sets {
            for comp in connected_components(&self.grid, &s.mask) {
                let e = displacement_energy(&self.grid, &comp).expect("components are connected");
                worst = worst.max(e);
            }
        }
        worst
    }
}

/// Component labels (`u32::MAX` outside the mask) and component sizes.
///
/// Components are numbered in order of their smallest node index.
pub fn label_components<T: Real>(grid: &SurfaceGrid<T>, mask: &[bool], conn: Connectivity) -> (Vec<u32>, Vec<usize>) {
    let mut label = vec![u32::MAX; grid.len()];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for start in 0..grid.len() {
        if !mask[start] || label[start] != u32::MAX {
            continue;
        }
        let id = sizes.len() as u32;
        let mut size = 0;
        label[start] = id;
        stack.push(start);
        while let Some(k) = stack.pop() {
            size += 1;
            let mut visit = |n: usize| {
                if mask[n] && label[n] == u32::MAX {
                    label[n] = id;
                    stack.push(n);
                }
            };
            match conn {
                Connectivity::Four => grid.neighbors4(k).for_each(&mut visit),
                Connectivity::Eight => grid.neighbors8(k).for_each(&mut visit),
            }
        }
        sizes.push(size);
    }
    (label, sizes)
}

/// 4-connected components of a mask, ordered by smallest node index.
pub fn connected_components<T: Real>(grid: &SurfaceGrid<T>, mask: &[bool]) -> Vec<Vec<bool>> {
    let (label, sizes) = label_components(grid, mask, Connectivity::Four);
    (0..sizes.len() as u32).map(|c| label.iter().map(|&l| l == c).collect()).collect()
}

pub fn is_connected<T: Real>(grid: &SurfaceGrid<T>, mask: &[bool]) -> bool {
    label_components(grid, mask, Connectivity::Four).1.len() == 1
}

/// Smallest closed disc-like region containing a connected mask.
///
/// Returns the complement of the unique complement component (8-connected)
/// whose area exceeds half the total area. On the torus the result must in
/// addition have Euler characteristic 1, otherwise the set wraps around a
/// handle and no disc contains it.
pub fn enclosing_disc<T: Real>(grid: &SurfaceGrid<T>, mask: &[bool]) -> Result<Vec<bool>> {
    let occupied = mask.iter().enumerate().filter(|(_, &b)| b).map(|(k, _)| k);
    let (disc, euler) = match enclosing_disc_windowed(grid, occupied, |k| mask[k]) {
        Some(w) => {
            let mut d = vec![false; grid.len()];
            w.nodes.iter().for_each(|&k| d[k] = true);
            (d, w.euler)
        }
        None => {
            let d = enclosing_disc_global(grid, mask)?;
            let e = euler_characteristic(grid, &d);
            (d, e)
        }
    };
    if grid.is_torus() && euler != 1 {
        return Err(Error::NotEnclosable);
    }
    Ok(disc)
}

/// Reference implementation labelling every complement component of the whole grid.
pub fn enclosing_disc_global<T: Real>(grid: &SurfaceGrid<T>, mask: &[bool]) -> Result<Vec<bool>> {
    let complement: Vec<bool> = mask.iter().map(|&b| !b).collect();
    let (label, sizes) = label_components(grid, &complement, Connectivity::Eight);
    let half = grid.total_area() / T::lit(2.0);
    let big: Vec<usize> = (0..sizes.len()).filter(|&c| T::count(sizes[c]) * grid.cell_area() > half).collect();
    match big.as_slice() {
        [c] => Ok(label.iter().map(|&l| l != *c as u32).collect()),
        _ => Err(Error::NotEnclosable),
    }
}

/// Cyclic span `[start, start + len)` of occupied indices leaving the largest gap.
fn occupied_span(occupied: &[bool], periodic: bool) -> Option<(usize, usize)> {
    let n = occupied.len();
    let first = occupied.iter().position(|&b| b)?;
    if !periodic {
        let last = occupied.iter().rposition(|&b| b).unwrap();
        return Some((first, last - first + 1));
    }
    let (mut best_gap, mut best_end) = (0usize, 0usize);
    let mut run = 0usize;
    for step in 1..=n {
        let idx = (first + step) % n;
        if occupied[idx] {
            if run > best_gap {
                best_gap = run;
                best_end = idx;
            }
            run = 0;
        } else {
            run += 1;
        }
    }
    if best_gap == 0 {
        return Some((0, n));
    }
    // best_end is the first occupied index after the largest gap
    Some((best_end, n - best_gap))
}

/// Result of the windowed enclosing-disc search.
pub(crate) struct WindowDisc {
    pub nodes: Vec<usize>,
    /// Euler characteristic of the disc region.
    pub euler: i64,
}

/// Fast path: flood the complement inside the grown bounding box of a node set.
///
/// `occupied` lists the member nodes (repeats allowed) and `member` answers membership.
/// Returns `None` when the bounding box leaves no exterior ring or the exterior
/// does not exceed half the area; the caller then falls back to a full labelling.
pub(crate) fn enclosing_disc_windowed<T: Real>(
    grid: &SurfaceGrid<T>,
    occupied: impl Iterator<Item = usize>,
    member: impl Fn(usize) -> bool,
) -> Option<WindowDisc> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut rows = vec![false; nx];
    let mut cols = vec![false; ny];
    for k in occupied {
        let (i, j) = grid.ij(k);
        rows[i] = true;
        cols[j] = true;
    }
    let (r0, rlen) = occupied_span(&rows, grid.periodic_x())?;
    let (c0, clen) = occupied_span(&cols, true)?;
    if clen + 2 > ny || (grid.periodic_x() && rlen + 2 > nx) {
        return None;
    }
    // window rows as offsets from r0 - 1 (clipped on the non-periodic axis)
    let (wr0, wrlen) = if grid.periodic_x() {
        (r0 as isize - 1, rlen + 2)
    } else {
        let lo = r0.saturating_sub(1);
        let hi = (r0 + rlen).min(nx - 1);
        (lo as isize, hi - lo + 1)
    };
    let wc0 = c0 as isize - 1;
    let wclen = clen + 2;
    let rows_at: Vec<usize> = (0..wrlen).map(|a| grid.step_x(0, wr0 + a as isize).unwrap_or((wr0 + a as isize) as usize)).collect();
    let cols_at: Vec<usize> = (0..wclen).map(|b| (wc0 + b as isize).rem_euclid(ny as isize) as usize).collect();
    let row_in: Vec<bool> =
        rows_at.iter().map(|&i| (if grid.periodic_x() { (i + nx - r0) % nx } else { i.wrapping_sub(r0) }) < rlen).collect();
    let col_in: Vec<bool> = cols_at.iter().map(|&j| (j + ny - c0) % ny < clen).collect();

    let w = wrlen * wclen;
    let mut reached = vec![false; w];
    let mut stack = Vec::new();
    for a in 0..wrlen {
        for b in 0..wclen {
            if !(row_in[a] && col_in[b]) {
                // ring nodes lie outside the bounding box, hence outside the mask
                reached[a * wclen + b] = true;
                stack.push((a, b));
            }
        }
    }
    while let Some((a, b)) = stack.pop() {
        for da in -1isize..=1 {
            for db in -1isize..=1 {
                let (na, nb) = (a as isize + da, b as isize + db);
                if na < 0 || nb < 0 || na >= wrlen as isize || nb >= wclen as isize {
                    continue;
                }
                let (na, nb) = (na as usize, nb as usize);
                let idx = na * wclen + nb;
                if !reached[idx] && !member(rows_at[na] * ny + cols_at[nb]) {
                    reached[idx] = true;
                    stack.push((na, nb));
                }
            }
        }
    }
    let inside = |a: usize, b: usize| a < wrlen && b < wclen && !reached[a * wclen + b];
    let mut nodes = Vec::new();
    let (mut v, mut e, mut f) = (0i64, 0i64, 0i64);
    for a in 0..wrlen {
        for b in 0..wclen {
            if inside(a, b) {
                nodes.push(rows_at[a] * ny + cols_at[b]);
                let (up, right) = (inside(a + 1, b), inside(a, b + 1));
                v += 1;
                e += up as i64 + right as i64;
                f += (up && right && inside(a + 1, b + 1)) as i64;
            }
        }
    }
    let exterior = T::count(grid.len() - nodes.len()) * grid.cell_area();
    (exterior > grid.total_area() / T::lit(2.0)).then_some(WindowDisc { nodes, euler: v - e + f })
}

/// Area of the enclosing disc of a node set given by membership, `Err(NotEnclosable)` if none.
///
/// Works in a window around the set when possible, so the cost scales with the set's
/// bounding box rather than the grid.
pub fn enclosing_disc_area_of<T: Real>(grid: &SurfaceGrid<T>, occupied: &[usize], member: impl Fn(usize) -> bool) -> Result<T> {
    enclosing_disc_nodes(grid, occupied, member).map(|d| T::count(d.len()) * grid.cell_area())
}

/// Nodes of the enclosing disc of a node set given by membership.
pub fn enclosing_disc_nodes<T: Real>(grid: &SurfaceGrid<T>, occupied: &[usize], member: impl Fn(usize) -> bool) -> Result<Vec<usize>> {
    if let Some(w) = enclosing_disc_windowed(grid, occupied.iter().copied(), &member) {
        if grid.is_torus() && w.euler != 1 {
            return Err(Error::NotEnclosable);
        }
        return Ok(w.nodes);
    }
    let mask: Vec<bool> = (0..grid.len()).map(&member).collect();
    let disc = enclosing_disc(grid, &mask)?;
    Ok(disc.iter().enumerate().filter(|(_, &b)| b).map(|(k, _)| k).collect())
}

/// `V - E + F` of the cubical complex spanned by a 4-connected mask.
pub fn euler_characteristic<T: Real>(grid: &SurfaceGrid<T>, mask: &[bool]) -> i64 {
    let (mut v, mut e, mut f) = (0i64, 0i64, 0i64);
    for (k, _) in mask.iter().enumerate().filter(|(_, &b)| b) {
        let (i, j) = grid.ij(k);
        v += 1;
        let right = mask[grid.index(i, grid.step_y(j, 1))];
        let up = grid.step_x(i, 1).map(|r| mask[grid.index(r, j)]).unwrap_or(false);
        e += right as i64 + up as i64;
        if right && up {
            let r = grid.step_x(i, 1).unwrap();
            f += mask[grid.index(r, grid.step_y(j, 1))] as i64;
        }
    }
    v - e + f
}

/// Area of the enclosing disc of a connected mask, `+inf` when not enclosable.
pub fn displacement_energy<T: Real>(grid: &SurfaceGrid<T>, mask: &[bool]) -> Result<T> {
    let components = label_components(grid, mask, Connectivity::Four).1.len();
    if components != 1 {
        return Err(Error::RequiresConnected { components });
    }
    match enclosing_disc(grid, mask) {
        Ok(d) => Ok(mask_area(grid, &d)),
        Err(Error::NotEnclosable) => Ok(T::infinity()),
        Err(e) => Err(e),
    }
}

/// Mask grown by one node in every 8-neighbor direction.
pub fn dilate<T: Real>(grid: &SurfaceGrid<T>, mask: &[bool]) -> Vec<bool> {
    let mut out = mask.to_vec();
    for (k, _) in mask.iter().enumerate().filter(|(_, &b)| b) {
        for n in grid.neighbors8(k) {
            out[n] = true;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn torus(n: usize) -> SurfaceGrid<f64> {
        SurfaceGrid::torus(n, n, 1.0, 1.0).unwrap()
    }

    fn disc_mask(g: &SurfaceGrid<f64>, cx: f64, cy: f64, r: f64) -> Vec<bool> {
        (0..g.len())
            .map(|k| {
                let (i, j) = g.ij(k);
                let [x, y] = g.coord(i, j);
                let dx = (x - cx + 0.5).rem_euclid(1.0) - 0.5;
                let dy = (y - cy + 0.5).rem_euclid(1.0) - 0.5;
                dx * dx + dy * dy < r * r
            })
            .collect()
    }

    #[test]
    fn degree_and_essential() {
        let g = torus(16);
        let all = vec![true; g.len()];
        let c = Cover::new(g.clone(), vec![all.clone()]).unwrap();
        assert_eq!(c.degree(), 1);
        assert_eq!(c.essential_indices(), vec![0]);
        assert_eq!(c.duplicated(3).degree(), 3);
        assert!(c.duplicated(2).essential_indices().is_empty());

        // two half tori overlapping in two bands
        let a: Vec<bool> = (0..g.len()).map(|k| g.ij(k).0 < 10).collect();
        let b: Vec<bool> = (0..g.len()).map(|k| g.ij(k).0 >= 7 || g.ij(k).0 < 2).collect();
        let c = Cover::new(g.clone(), vec![a.clone(), b]).unwrap();
        assert_eq!(c.degree(), 2);
        assert_eq!(c.essential_indices(), vec![0, 1]);
        let small: Vec<bool> = (0..g.len()).map(|k| g.ij(k).0 == 3).collect();
        let c = Cover::new(g, vec![a, c.sets()[1].mask.clone(), small]).unwrap();
        assert_eq!(c.essential_indices(), vec![0, 1]);
    }

    #[test]
    fn uncovered_is_rejected() {
        let g = torus(8);
        let a: Vec<bool> = (0..g.len()).map(|k| k != 5).collect();
        assert!(matches!(Cover::new(g, vec![a]), Err(Error::InvalidCover(_))));
    }

    #[test]
    fn components_wrap_around() {
        let g = torus(32);
        let band: Vec<bool> = (0..g.len()).map(|k| g.ij(k).1 < 3 || g.ij(k).1 > 29).collect();
        let comps = connected_components(&g, &band);
        assert_eq!(comps.len(), 1);
        let two: Vec<bool> = disc_mask(&g, 0.25, 0.25, 0.1).iter().zip(disc_mask(&g, 0.75, 0.75, 0.1)).map(|(a, b)| *a || b).collect();
        let comps = connected_components(&g, &two);
        assert_eq!(comps.len(), 2);
        assert_eq!(comps.iter().map(|c| mask_count(c)).sum::<usize>(), mask_count(&two));
    }

    #[test]
    fn band_is_not_enclosable() {
        let g = torus(32);
        let band: Vec<bool> = (0..g.len()).map(|k| (12..20).contains(&g.ij(k).0)).collect();
        assert!(matches!(enclosing_disc(&g, &band), Err(Error::NotEnclosable)));
        assert_eq!(displacement_energy(&g, &band).unwrap(), f64::INFINITY);
    }

    #[test]
    fn annulus_hole_is_filled() {
        let g = torus(128);
        let outer = disc_mask(&g, 0.5, 0.5, 0.2);
        let inner = disc_mask(&g, 0.5, 0.5, 0.1);
        let ring: Vec<bool> = outer.iter().zip(&inner).map(|(a, b)| *a && !b).collect();
        let d = enclosing_disc(&g, &ring).unwrap();
        assert_eq!(d, outer);
        assert_eq!(enclosing_disc_global(&g, &ring).unwrap(), outer);
    }

    #[test]
    fn disconnected_energy_is_an_error() {
        let g = torus(32);
        let mut m = vec![false; g.len()];
        m[0] = true;
        m[g.index(10, 10)] = true;
        assert!(matches!(displacement_energy(&g, &m), Err(Error::RequiresConnected { components: 2 })));
    }

    #[test]
    fn half_area_tie_is_not_enclosable() {
        let g = torus(16);
        let half: Vec<bool> = (0..g.len()).map(|k| g.ij(k).0 < 8).collect();
        assert!(matches!(enclosing_disc_global(&g, &half), Err(Error::NotEnclosable)));
    }

    #[test]
    fn sphere_cap_annulus() {
        let g = SurfaceGrid::<f64>::sphere(64, 64, 1.0).unwrap();
        let annulus: Vec<bool> = (0..g.len()).map(|k| (52..58).contains(&g.ij(k).0)).collect();
        let d = enclosing_disc(&g, &annulus).unwrap();
        let expected: Vec<bool> = (0..g.len()).map(|k| g.ij(k).0 >= 52).collect();
        assert_eq!(d, expected);
    }

    #[test]
    fn euler_counts() {
        let g = torus(16);
        assert_eq!(euler_characteristic(&g, &disc_mask(&g, 0.5, 0.5, 0.3)), 1);
        assert_eq!(euler_characteristic(&g, &vec![true; g.len()]), 0);
        let band: Vec<bool> = (0..g.len()).map(|k| g.ij(k).0 < 4).collect();
        assert_eq!(euler_characteristic(&g, &band), 0);
    }
}
