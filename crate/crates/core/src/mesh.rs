//! Uniform cell-centered grids, field storage and the matrix-free
//! Laplacian / biharmonic stencils with homogeneous Neumann ghosts.
//!
//! Ghost cells are never stored. The Laplacian synthesizes the first ghost
//! layer by mirroring (`m_0 = m_1`, `m_{N+1} = m_N`); the biharmonic is the
//! Laplacian applied to the (again mirrored) Laplacian, which is the same as
//! using the second ghost layer `m_{-1} = m_2`, `m_{N+2} = m_{N-1}`.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Uniform rectangular cell-centered grid.
///
/// Axes with a single cell are degenerate: they carry no Laplacian
/// contribution, which is how 1D and 2D problems are encoded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n: [usize; 3],
    len: [f64; 3],
    h: [f64; 3],
}

impl Grid {
    pub fn new(n: [usize; 3], len: [f64; 3]) -> Result<Self> {
        for axis in 0..3 {
            if n[axis] == 0 {
                return Err(Error::InvalidGrid(format!("axis {axis} has zero cells")));
            }
            if !(len[axis].is_finite() && len[axis] > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis} length {} is not positive",
                    len[axis]
                )));
            }
        }
        let h = [
            len[0] / n[0] as f64,
            len[1] / n[1] as f64,
            len[2] / n[2] as f64,
        ];
        Ok(Self { n, len, h })
    }

    /// `n` cells on `(0, l)` along x, degenerate y and z of unit length.
    pub fn line(n: usize, l: f64) -> Result<Self> {
        Self::new([n, 1, 1], [l, 1.0, 1.0])
    }

    pub fn nx(&self) -> usize {
        self.n[0]
    }
    pub fn ny(&self) -> usize {
        self.n[1]
    }
    pub fn nz(&self) -> usize {
        self.n[2]
    }
    pub fn cells_per_axis(&self) -> [usize; 3] {
        self.n
    }
    pub fn lengths(&self) -> [f64; 3] {
        self.len
    }
    pub fn spacing(&self) -> [f64; 3] {
        self.h
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.h[0] * self.h[1] * self.h[2]
    }

    /// Axes with more than one cell.
    pub fn active_axes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..3).filter(move |&a| self.n[a] > 1)
    }

    /// Lexicographic index, x fastest.
    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n[0] * (j + self.n[1] * k)
    }

    #[inline]
    pub fn cell(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.n[0];
        let rest = idx / self.n[0];
        [i, rest % self.n[1], rest / self.n[1]]
    }

    /// Center of the zero-based cell `(i, j, k)`: `((i + 1/2) hx, ...)`.
    #[inline]
    pub fn center(&self, cell: [usize; 3]) -> [f64; 3] {
        [
            (cell[0] as f64 + 0.5) * self.h[0],
            (cell[1] as f64 + 0.5) * self.h[1],
            (cell[2] as f64 + 0.5) * self.h[2],
        ]
    }

    /// Distance between consecutive cells along `axis` in the flat layout.
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => 1,
            1 => self.n[0],
            _ => self.n[0] * self.n[1],
        }
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self == other
    }
}

/// Which norm to compute over a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    /// Maximum of the pointwise magnitude.
    Inf,
    /// `sqrt(sum |u|^2 * cell volume)`.
    L2,
}

/// One real value per interior cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                data.len()
            )));
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                cell: grid.cell(idx),
            });
        }
        Ok(Self { grid, data })
    }

    /// Wraps data that is known to be finite and of the right length.
    pub(crate) fn from_raw(grid: Grid, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), grid.len());
        Self { grid, data }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self {
            grid,
            data: vec![value; grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn norm(&self, kind: NormKind) -> f64 {
        match kind {
            NormKind::Inf => self.data.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())),
            NormKind::L2 => {
                let sum: f64 = self.data.iter().map(|v| v * v).sum();
                (sum * self.grid.cell_volume()).sqrt()
            }
        }
    }
}

/// Three-component field (`m1`, `m2`, `m3`) on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid,
    comps: [Vec<f64>; 3],
}

impl VectorField {
    pub fn new(grid: Grid, comps: [Vec<f64>; 3]) -> Result<Self> {
        for c in &comps {
            if c.len() != grid.len() {
                return Err(Error::GridMismatch(format!(
                    "component has {} values, grid has {} cells",
                    c.len(),
                    grid.len()
                )));
            }
            if let Some(idx) = c.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    cell: grid.cell(idx),
                });
            }
        }
        Ok(Self { grid, comps })
    }

    pub(crate) fn from_raw(grid: Grid, comps: [Vec<f64>; 3]) -> Self {
        debug_assert!(comps.iter().all(|c| c.len() == grid.len()));
        Self { grid, comps }
    }

    pub fn from_scalars(fields: [ScalarField; 3]) -> Result<Self> {
        let grid = *fields[0].grid();
        if fields.iter().any(|f| f.grid() != &grid) {
            return Err(Error::GridMismatch(
                "vector components live on different grids".into(),
            ));
        }
        let [a, b, c] = fields;
        Ok(Self {
            grid,
            comps: [a.data, b.data, c.data],
        })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::uniform(grid, [0.0; 3])
    }

    pub fn uniform(grid: Grid, value: [f64; 3]) -> Self {
        Self {
            grid,
            comps: [
                vec![value[0]; grid.len()],
                vec![value[1]; grid.len()],
                vec![value[2]; grid.len()],
            ],
        }
    }

    /// Evaluates `f` at every cell center.
    pub fn sample_function<F>(grid: Grid, f: F) -> Result<Self>
    where
        F: Fn([f64; 3]) -> [f64; 3],
    {
        let mut comps = [
            Vec::with_capacity(grid.len()),
            Vec::with_capacity(grid.len()),
            Vec::with_capacity(grid.len()),
        ];
        for idx in 0..grid.len() {
            let cell = grid.cell(idx);
            let v = f(grid.center(cell));
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite { cell });
            }
            for a in 0..3 {
                comps[a].push(v[a]);
            }
        }
        Ok(Self { grid, comps })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn component(&self, axis: usize) -> &[f64] {
        &self.comps[axis]
    }

    pub fn component_mut(&mut self, axis: usize) -> &mut [f64] {
        &mut self.comps[axis]
    }

    pub fn components(&self) -> &[Vec<f64>; 3] {
        &self.comps
    }

    pub fn into_components(self) -> [Vec<f64>; 3] {
        self.comps
    }

    pub fn scalar(&self, axis: usize) -> ScalarField {
        ScalarField::from_raw(self.grid, self.comps[axis].clone())
    }

    #[inline]
    pub fn at(&self, idx: usize) -> [f64; 3] {
        [self.comps[0][idx], self.comps[1][idx], self.comps[2][idx]]
    }

    #[inline]
    pub fn set(&mut self, idx: usize, v: [f64; 3]) {
        for (c, x) in self.comps.iter_mut().zip(v) {
            c[idx] = x;
        }
    }

    /// Componentwise `self - other`.
    pub fn difference(&self, other: &VectorField) -> Result<VectorField> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("difference of fields".into()));
        }
        let comps = std::array::from_fn(|a| {
            self.comps[a]
                .iter()
                .zip(&other.comps[a])
                .map(|(x, y)| x - y)
                .collect()
        });
        Ok(VectorField::from_raw(self.grid, comps))
    }

    /// Largest `||m| - 1|` over all cells.
    pub fn max_unit_deviation(&self) -> f64 {
        (0..self.grid.len())
            .map(|idx| {
                let v = self.at(idx);
                ((v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt() - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn norm(&self, kind: NormKind) -> f64 {
        let mags = (0..self.grid.len()).map(|idx| {
            let v = self.at(idx);
            v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
        });
        match kind {
            NormKind::Inf => mags.fold(0.0_f64, f64::max).sqrt(),
            NormKind::L2 => (mags.sum::<f64>() * self.grid.cell_volume()).sqrt(),
        }
    }

    /// The `k`-th xy layer as a field on a grid with one z cell.
    pub fn z_slice(&self, k: usize) -> VectorField {
        let g = self.grid;
        let n = g.cells_per_axis();
        let len = g.lengths();
        let h = g.spacing();
        let slice_grid =
            Grid::new([n[0], n[1], 1], [len[0], len[1], h[2]]).expect("slice of a valid grid");
        let layer = n[0] * n[1];
        let comps = std::array::from_fn(|a| self.comps[a][k * layer..(k + 1) * layer].to_vec());
        VectorField::from_raw(slice_grid, comps)
    }
}

/// Writes `Δ_h u` into `out` (mirrored ghosts, degenerate axes skipped).
pub(crate) fn laplacian_into(grid: &Grid, u: &[f64], out: &mut [f64]) {
    debug_assert_eq!(u.len(), grid.len());
    debug_assert_eq!(out.len(), grid.len());
    out.iter_mut().for_each(|v| *v = 0.0);
    let n = grid.cells_per_axis();
    let h = grid.spacing();
    for axis in grid.active_axes() {
        let stride = grid.stride(axis);
        let inv_h2 = 1.0 / (h[axis] * h[axis]);
        let extent = n[axis];
        for (idx, o) in out.iter_mut().enumerate() {
            let pos = (idx / stride) % extent;
            let c = u[idx];
            let lo = if pos == 0 { c } else { u[idx - stride] };
            let hi = if pos + 1 == extent {
                c
            } else {
                u[idx + stride]
            };
            *o += (lo - 2.0 * c + hi) * inv_h2;
        }
    }
}

/// Standard 7-point (or reduced) Laplacian under homogeneous Neumann ghosts.
pub fn apply_laplacian(field: &ScalarField) -> ScalarField {
    let mut out = vec![0.0; field.grid.len()];
    laplacian_into(&field.grid, &field.data, &mut out);
    ScalarField::from_raw(field.grid, out)
}

/// Discrete biharmonic `Δ_h (Δ_h u)` with the intermediate Laplacian mirrored.
pub fn apply_biharmonic(field: &ScalarField) -> ScalarField {
    let mut tmp = vec![0.0; field.grid.len()];
    let mut out = vec![0.0; field.grid.len()];
    laplacian_into(&field.grid, &field.data, &mut tmp);
    laplacian_into(&field.grid, &tmp, &mut out);
    ScalarField::from_raw(field.grid, out)
}
