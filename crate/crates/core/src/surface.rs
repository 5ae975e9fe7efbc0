//! Discretized closed surfaces with an area form.
//!
//! Two topologies are supported: the flat torus `R^2 / (Lx Z x Ly Z)` with
//! `omega = dx ^ dy`, and the round sphere of radius `R` in the cylindrical
//! equal-area chart `(z, theta)` where `omega = R dz ^ dtheta`. Grids are
//! node-centered and uniform, so every node owns one cell of identical area.
//!
//! Node `(i, j)` has flat index `k = i * ny + j`. The first axis `i` runs
//! along `x` (torus) or `z` (sphere, south to north); the second axis `j`
//! runs along `y` or `theta`. On the sphere the first and last rows sit half a
//! cell away from the poles and are called pole-adjacent.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::{pairwise_sum, Real};

const MIN_NODES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Topology<T> {
    Torus { lx: T, ly: T },
    Sphere { radius: T },
}

/// Serializable grid description, used as the header of field and cover files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "topology", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridDescriptor {
    Torus { nx: usize, ny: usize, lx: f64, ly: f64 },
    Sphere { nz: usize, ntheta: usize, radius: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceGrid<T> {
    topology: Topology<T>,
    nx: usize,
    ny: usize,
    hx: T,
    hy: T,
    density: T,
    cell_area: T,
    total_area: T,
}

impl<T: Real> SurfaceGrid<T> {
    /// Flat torus with periods `lx`, `ly` and `nx * ny` nodes.
    pub fn torus(nx: usize, ny: usize, lx: T, ly: T) -> Result<Self> {
        check_resolution(nx, ny)?;
        if !(lx > T::zero() && ly > T::zero() && lx.is_finite() && ly.is_finite()) {
            return Err(Error::InvalidGrid(format!("torus periods must be positive, got {lx}, {ly}")));
        }
        let hx = lx / T::count(nx);
        let hy = ly / T::count(ny);
        Ok(Self { topology: Topology::Torus { lx, ly }, nx, ny, hx, hy, density: T::one(), cell_area: hx * hy, total_area: lx * ly })
    }

    /// Round sphere of radius `radius` in the equal-area `(z, theta)` chart.
    pub fn sphere(nz: usize, ntheta: usize, radius: T) -> Result<Self> {
        check_resolution(nz, ntheta)?;
        if !(radius > T::zero() && radius.is_finite()) {
            return Err(Error::InvalidGrid(format!("sphere radius must be positive, got {radius}")));
        }
        let two = T::lit(2.0);
        let hx = two * radius / T::count(nz);
        let hy = two * T::PI() / T::count(ntheta);
        Ok(Self {
            topology: Topology::Sphere { radius },
            nx: nz,
            ny: ntheta,
            hx,
            hy,
            density: radius,
            cell_area: radius * hx * hy,
            total_area: T::lit(4.0) * T::PI() * radius * radius,
        })
    }

    pub fn from_descriptor(d: &GridDescriptor) -> Result<Self> {
        match *d {
            GridDescriptor::Torus { nx, ny, lx, ly } => Self::torus(nx, ny, T::lit(lx), T::lit(ly)),
            GridDescriptor::Sphere { nz, ntheta, radius } => Self::sphere(nz, ntheta, T::lit(radius)),
        }
    }

    pub fn descriptor(&self) -> GridDescriptor {
        match self.topology {
            Topology::Torus { lx, ly } => GridDescriptor::Torus { nx: self.nx, ny: self.ny, lx: lx.f64(), ly: ly.f64() },
            Topology::Sphere { radius } => GridDescriptor::Sphere { nz: self.nx, ntheta: self.ny, radius: radius.f64() },
        }
    }

    /// Same surface at `factor` times the resolution along each axis.
    pub fn refined(&self, factor: usize) -> Self {
        assert!(factor >= 1);
        match self.topology {
            Topology::Torus { lx, ly } => Self::torus(self.nx * factor, self.ny * factor, lx, ly),
            Topology::Sphere { radius } => Self::sphere(self.nx * factor, self.ny * factor, radius),
        }
        .expect("refinement of a valid grid is valid")
    }

    pub fn topology(&self) -> Topology<T> {
        self.topology
    }

    pub fn is_torus(&self) -> bool {
        matches!(self.topology, Topology::Torus { .. })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Chart spacing `(hx, hy)`.
    pub fn spacing(&self) -> (T, T) {
        (self.hx, self.hy)
    }

    /// Area-form density in chart coordinates: `omega = density * dx ^ dy`.
    pub fn density(&self) -> T {
        self.density
    }

    pub fn cell_area(&self) -> T {
        self.cell_area
    }

    pub fn total_area(&self) -> T {
        self.total_area
    }

    /// Per-node cell weights. Uniform for every supported chart.
    pub fn cell_areas(&self) -> Vec<T> {
        vec![self.cell_area; self.len()]
    }

    pub fn periodic_x(&self) -> bool {
        self.is_torus()
    }

    /// Chart period along the first axis, if periodic.
    pub fn period_x(&self) -> Option<T> {
        match self.topology {
            Topology::Torus { lx, .. } => Some(lx),
            Topology::Sphere { .. } => None,
        }
    }

    /// Chart period along the second axis (always periodic).
    pub fn period_y(&self) -> T {
        match self.topology {
            Topology::Torus { ly, .. } => ly,
            Topology::Sphere { .. } => T::lit(2.0) * T::PI(),
        }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k / self.ny, k % self.ny)
    }

    /// Chart coordinates of node `(i, j)`.
    pub fn coord(&self, i: usize, j: usize) -> [T; 2] {
        let x = match self.topology {
            Topology::Torus { .. } => T::count(i) * self.hx,
            Topology::Sphere { radius } => -radius + (T::count(i) + T::lit(0.5)) * self.hx,
        };
        [x, T::count(j) * self.hy]
    }

    /// Coordinate of the first node row along the first axis.
    pub fn x_origin(&self) -> T {
        match self.topology {
            Topology::Torus { .. } => T::zero(),
            Topology::Sphere { radius } => -radius + T::lit(0.5) * self.hx,
        }
    }

    pub fn is_pole_row(&self, i: usize) -> bool {
        !self.is_torus() && (i == 0 || i + 1 == self.nx)
    }

    /// Neighbor row index along the first axis, respecting periodicity.
    #[inline]
    pub fn step_x(&self, i: usize, delta: isize) -> Option<usize> {
        let n = self.nx as isize;
        let t = i as isize + delta;
        if self.periodic_x() {
            Some(t.rem_euclid(n) as usize)
        } else if (0..n).contains(&t) {
            Some(t as usize)
        } else {
            None
        }
    }

    #[inline]
    pub fn step_y(&self, j: usize, delta: isize) -> usize {
        (j as isize + delta).rem_euclid(self.ny as isize) as usize
    }

    /// Edge-adjacent neighbors of node `k`.
    pub fn neighbors4(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = self.ij(k);
        let up = self.step_x(i, 1).map(|r| self.index(r, j));
        let down = self.step_x(i, -1).map(|r| self.index(r, j));
        let left = Some(self.index(i, self.step_y(j, -1)));
        let right = Some(self.index(i, self.step_y(j, 1)));
        [up, down, left, right].into_iter().flatten()
    }

    /// Edge- and corner-adjacent neighbors of node `k`.
    pub fn neighbors8(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = self.ij(k);
        (-1isize..=1).flat_map(move |di| {
            (-1isize..=1).filter_map(move |dj| {
                if di == 0 && dj == 0 {
                    return None;
                }
                self.step_x(i, di).map(|r| self.index(r, self.step_y(j, dj)))
            })
        })
    }

    /// Node nearest to a chart point. Periodic axes wrap, the sphere's `z` axis clamps.
    pub fn nearest_node(&self, p: [T; 2]) -> usize {
        let fi = ((p[0] - self.x_origin()) / self.hx).round();
        let i = if self.periodic_x() {
            fi.to_i64().unwrap_or(0).rem_euclid(self.nx as i64) as usize
        } else {
            fi.max(T::zero()).min(T::count(self.nx - 1)).to_usize().unwrap_or(0)
        };
        let j = (p[1] / self.hy).round().to_i64().unwrap_or(0).rem_euclid(self.ny as i64) as usize;
        self.index(i, j)
    }

    /// Number of cells used by contouring: on the sphere the `z` axis is not periodic.
    pub fn cell_rows(&self) -> usize {
        if self.periodic_x() {
            self.nx
        } else {
            self.nx - 1
        }
    }

    pub fn same_as(&self, other: &Self) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

fn check_resolution(a: usize, b: usize) -> Result<()> {
    if a < MIN_NODES || b < MIN_NODES {
        return Err(Error::InvalidGrid(format!("need at least {MIN_NODES} nodes per axis, got {a} x {b}")));
    }
    Ok(())
}

/// Node values of a smooth function on a [`SurfaceGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T> {
    grid: SurfaceGrid<T>,
    values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn new(grid: SurfaceGrid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidField(format!("expected {} values, got {}", grid.len(), values.len())));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("non-finite value at node {k}")));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: &SurfaceGrid<T>, c: T) -> Self {
        Self { grid: grid.clone(), values: vec![c; grid.len()] }
    }

    pub fn zeros(grid: &SurfaceGrid<T>) -> Self {
        Self::constant(grid, T::zero())
    }

    /// Samples `f(x, y)` at every node, in chart coordinates.
    pub fn from_fn(grid: &SurfaceGrid<T>, f: impl Fn(T, T) -> T + Sync) -> Self {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let (i, j) = grid.ij(k);
                let [x, y] = grid.coord(i, j);
                f(x, y)
            })
            .collect();
        Self::new(grid.clone(), values).expect("sampled function must be finite")
    }

    pub(crate) fn from_parts_unchecked(grid: SurfaceGrid<T>, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &SurfaceGrid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[self.grid.index(i, j)]
    }

    pub fn map(&self, f: impl Fn(T) -> T + Sync) -> Self {
        Self { grid: self.grid.clone(), values: self.values.par_iter().map(|&v| f(v)).collect() }
    }

    pub fn scale(&self, c: T) -> Self {
        self.map(|v| v * c)
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T + Sync) -> Result<Self> {
        self.grid.same_as(&other.grid)?;
        let values = self.values.par_iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { grid: self.grid.clone(), values })
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    /// Checks that the field is constant on both pole-adjacent rows (sphere only).
    pub fn check_pole_regularity(&self) -> Result<()> {
        if self.grid.is_torus() {
            return Ok(());
        }
        let scale = T::one() + self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let tol = T::lit(64.0) * T::epsilon() * scale;
        for row in [0, self.grid.nx - 1] {
            let r = &self.values[row * self.grid.ny..(row + 1) * self.grid.ny];
            if r.iter().any(|&v| (v - r[0]).abs() > tol) {
                return Err(Error::PoleSingularity { row });
            }
        }
        Ok(())
    }
}

/// Chart-coordinate derivatives of a field, second-order central differences.
#[derive(Clone, Debug)]
pub struct Gradient<T> {
    pub dx: Vec<T>,
    pub dy: Vec<T>,
}

/// Central differences along both chart axes.
///
/// On the sphere the pole-adjacent rows use one-sided differences along `z`;
/// their `theta` derivative vanishes for pole-regular fields.
pub fn gradient<T: Real>(f: &ScalarField<T>) -> Gradient<T> {
    let g = &f.grid;
    let (hx, hy) = g.spacing();
    let two_hx = T::lit(2.0) * hx;
    let two_hy = T::lit(2.0) * hy;
    let ny = g.ny;
    let v = &f.values;
    let mut dx = vec![T::zero(); g.len()];
    let mut dy = vec![T::zero(); g.len()];
    dx.par_chunks_mut(ny).zip(dy.par_chunks_mut(ny)).enumerate().for_each(|(i, (rx, ry))| {
        let up = g.step_x(i, 1);
        let down = g.step_x(i, -1);
        for j in 0..ny {
            let jp = g.step_y(j, 1);
            let jm = g.step_y(j, -1);
            ry[j] = (v[i * ny + jp] - v[i * ny + jm]) / two_hy;
            rx[j] = match (up, down) {
                (Some(u), Some(d)) => (v[u * ny + j] - v[d * ny + j]) / two_hx,
                (Some(u), None) => (v[u * ny + j] - v[i * ny + j]) / hx,
                (None, Some(d)) => (v[i * ny + j] - v[d * ny + j]) / hx,
                (None, None) => T::zero(),
            };
        }
    });
    Gradient { dx, dy }
}

/// Bracket value from chart derivatives: `(fx gy - fy gx) / density`.
///
/// Written so that swapping the roles of `f` and `g` negates the result exactly.
#[inline]
pub fn bracket_from_derivatives<T: Real>(fx: T, fy: T, gx: T, gy: T, density: T) -> T {
    (fx * gy - fy * gx) / density
}

/// Poisson bracket `{f, g}` defined by `df ^ dg = {f, g} omega`.
pub fn poisson_bracket<T: Real>(f: &ScalarField<T>, g: &ScalarField<T>) -> Result<ScalarField<T>> {
    f.grid.same_as(&g.grid)?;
    f.check_pole_regularity()?;
    g.check_pole_regularity()?;
    let a = gradient(f);
    let b = gradient(g);
    Ok(bracket_of_gradients(&f.grid, &a, &b))
}

pub(crate) fn bracket_of_gradients<T: Real>(grid: &SurfaceGrid<T>, a: &Gradient<T>, b: &Gradient<T>) -> ScalarField<T> {
    let rho = grid.density();
    let ny = grid.ny;
    let mut out = vec![T::zero(); grid.len()];
    out.par_chunks_mut(ny).enumerate().for_each(|(i, row)| {
        if grid.is_pole_row(i) {
            return;
        }
        for (j, o) in row.iter_mut().enumerate() {
            let k = i * ny + j;
            *o = bracket_from_derivatives(a.dx[k], a.dy[k], b.dx[k], b.dy[k], rho);
        }
    });
    ScalarField::from_parts_unchecked(grid.clone(), out)
}

/// Length of the Riemannian gradient at every node.
///
/// Torus: Euclidean. Sphere: `|grad f|^2 = (1 - z^2/R^2) f_z^2 + f_theta^2 / (R^2 - z^2)`.
pub fn gradient_norm<T: Real>(f: &ScalarField<T>) -> ScalarField<T> {
    let g = &f.grid;
    let d = gradient(f);
    let values = (0..g.len())
        .map(|k| match g.topology {
            Topology::Torus { .. } => (d.dx[k] * d.dx[k] + d.dy[k] * d.dy[k]).sqrt(),
            Topology::Sphere { radius } => {
                let (i, j) = g.ij(k);
                let z = g.coord(i, j)[0];
                let r2 = radius * radius;
                let s = (r2 - z * z).max(T::min_positive_value());
                ((s / r2) * d.dx[k] * d.dx[k] + d.dy[k] * d.dy[k] / s).sqrt()
            }
        })
        .collect();
    ScalarField::from_parts_unchecked(g.clone(), values)
}

/// `sum_k value_k * cell_area`, deterministic pairwise order.
pub fn integrate<T: Real>(f: &ScalarField<T>) -> T {
    pairwise_sum(&f.values) * f.grid.cell_area
}

pub fn sup_norm<T: Real>(f: &ScalarField<T>) -> T {
    f.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
}

pub fn l1_norm<T: Real>(f: &ScalarField<T>) -> T {
    let abs: Vec<T> = f.values.iter().map(|v| v.abs()).collect();
    pairwise_sum(&abs) * f.grid.cell_area
}
