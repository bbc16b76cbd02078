//! Uniform staggered (MAC) grid, cell/face field containers and the discrete
//! difference operators that act between them.
//!
//! Storage is axis-major with `i` fastest: cell `(i, j, l)` (0-based) lives at
//! `i + nx * (j + ny * l)`. The face component normal to axis `a` has
//! `n_a + 1` entries along that axis (boundary faces included) and the same
//! layout otherwise; face index `0` along axis `a` is the low boundary face.
//! In 2D the third axis is degenerate (`nz = 1`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("axis {axis} out of range for a {dim}D grid")]
    AxisOutOfRange { axis: usize, dim: usize },
    #[error("grid dimension must be 2 or 3, got {0}")]
    BadDimension(usize),
    #[error("axis {axis}: extent ({lo}, {hi}) is empty or not finite")]
    BadExtent { axis: usize, lo: f64, hi: f64 },
    #[error("axis {axis}: cell count must be positive")]
    NoCells { axis: usize },
    #[error("field shape does not match grid (expected {expected} values, got {got})")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("time step must be positive, got {0}")]
    NonPositiveDt(f64),
}

/// One uniformly divided coordinate axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, cells: usize) -> Self {
        Axis { lo, hi, cells }
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / self.cells as f64
    }

    /// Cell center of 0-based cell `i`, i.e. `x_{i+1}` in 1-based notation.
    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.spacing()
    }

    /// Face `i` for `i = 0..=cells`; face 0 is the low boundary.
    pub fn face(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.spacing()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaggeredGrid {
    dim: usize,
    axes: [Axis; 3],
}

impl StaggeredGrid {
    pub fn new(axes: &[Axis]) -> Result<Self, GridError> {
        let dim = axes.len();
        if !(2..=3).contains(&dim) {
            return Err(GridError::BadDimension(dim));
        }
        for (a, ax) in axes.iter().enumerate() {
            if !(ax.lo.is_finite() && ax.hi.is_finite() && ax.hi > ax.lo) {
                return Err(GridError::BadExtent { axis: a, lo: ax.lo, hi: ax.hi });
            }
            if ax.cells == 0 {
                return Err(GridError::NoCells { axis: a });
            }
        }
        // Degenerate third axis for 2D grids: one unit-thickness layer.
        let mut all = [Axis::new(0.0, 1.0, 1); 3];
        all[..dim].copy_from_slice(axes);
        Ok(StaggeredGrid { dim, axes: all })
    }

    /// The unit square/cube `(0,1)^dim` with `n` cells per axis.
    pub fn unit(dim: usize, n: usize) -> Result<Self, GridError> {
        Self::new(&vec![Axis::new(0.0, 1.0, n); dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn axis(&self, a: usize) -> &Axis {
        &self.axes[a]
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes[..self.dim]
    }

    pub fn spacing(&self, a: usize) -> f64 {
        self.axes[a].spacing()
    }

    /// Cell counts `[nx, ny, nz]` (`nz = 1` in 2D).
    pub fn shape(&self) -> [usize; 3] {
        [self.axes[0].cells, self.axes[1].cells, self.axes[2].cells]
    }

    pub fn num_cells(&self) -> usize {
        let [nx, ny, nz] = self.shape();
        nx * ny * nz
    }

    /// Volume (area in 2D) of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.axes().iter().map(Axis::spacing).product()
    }

    /// Measure of the whole domain.
    pub fn domain_volume(&self) -> f64 {
        self.axes().iter().map(|a| a.hi - a.lo).product()
    }

    pub fn cell_index(&self, ijk: [usize; 3]) -> usize {
        let [nx, ny, _] = self.shape();
        ijk[0] + nx * (ijk[1] + ny * ijk[2])
    }

    pub fn cell_ijk(&self, idx: usize) -> [usize; 3] {
        let [nx, ny, _] = self.shape();
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    /// Shape of the face component normal to `axis`.
    pub fn face_shape(&self, axis: usize) -> [usize; 3] {
        let mut s = self.shape();
        s[axis] += 1;
        s
    }

    pub fn num_faces(&self, axis: usize) -> usize {
        self.face_shape(axis).iter().product()
    }

    pub fn face_index(&self, axis: usize, ijk: [usize; 3]) -> usize {
        let [fx, fy, _] = self.face_shape(axis);
        ijk[0] + fx * (ijk[1] + fy * ijk[2])
    }

    pub fn face_ijk(&self, axis: usize, idx: usize) -> [usize; 3] {
        let [fx, fy, _] = self.face_shape(axis);
        [idx % fx, (idx / fx) % fy, idx / (fx * fy)]
    }

    /// Coordinates of a cell center.
    pub fn cell_center(&self, ijk: [usize; 3]) -> [f64; 3] {
        let mut x = [0.0; 3];
        for (a, xa) in x.iter_mut().enumerate().take(self.dim) {
            *xa = self.axes[a].center(ijk[a]);
        }
        x
    }

    /// Coordinates of the center of a face normal to `axis`.
    pub fn face_center(&self, axis: usize, ijk: [usize; 3]) -> [f64; 3] {
        let mut x = self.cell_center(ijk);
        x[axis] = self.axes[axis].face(ijk[axis]);
        x
    }

    /// Whether face `ijk` normal to `axis` lies on the domain boundary.
    pub fn is_boundary_face(&self, axis: usize, ijk: [usize; 3]) -> bool {
        ijk[axis] == 0 || ijk[axis] == self.axes[axis].cells
    }

    /// Maps a physical point to the 0-based cell whose center it is, if any.
    pub fn locate_center(&self, x: &[f64]) -> Option<[usize; 3]> {
        if x.len() != self.dim {
            return None;
        }
        let mut ijk = [0usize; 3];
        for a in 0..self.dim {
            let ax = &self.axes[a];
            let s = (x[a] - ax.lo) / ax.spacing() - 0.5;
            let i = s.round();
            if i < 0.0 || i >= ax.cells as f64 || (s - i).abs() > 1e-6 {
                return None;
            }
            ijk[a] = i as usize;
        }
        Some(ijk)
    }

    /// Maps a coordinate along one axis to the 0-based index of the cell
    /// column whose centers sit at that coordinate.
    pub fn locate_column(&self, axis: usize, x: f64) -> Option<usize> {
        let ax = &self.axes[axis];
        let s = (x - ax.lo) / ax.spacing() - 0.5;
        let i = s.round();
        if i < 0.0 || i >= ax.cells as f64 || (s - i).abs() > 1e-6 {
            return None;
        }
        Some(i as usize)
    }

    fn check_axis(&self, axis: usize) -> Result<(), GridError> {
        if axis >= self.dim {
            Err(GridError::AxisOutOfRange { axis, dim: self.dim })
        } else {
            Ok(())
        }
    }

    fn check_cells(&self, f: &CellField) -> Result<(), GridError> {
        if f.values.len() != self.num_cells() {
            return Err(GridError::ShapeMismatch { expected: self.num_cells(), got: f.values.len() });
        }
        Ok(())
    }

    fn check_faces(&self, w: &FaceField) -> Result<(), GridError> {
        if w.comps.len() != self.dim {
            return Err(GridError::ShapeMismatch { expected: self.dim, got: w.comps.len() });
        }
        for (a, c) in w.comps.iter().enumerate() {
            if c.len() != self.num_faces(a) {
                return Err(GridError::ShapeMismatch { expected: self.num_faces(a), got: c.len() });
            }
        }
        Ok(())
    }

    /// Samples a function at every cell center.
    pub fn sample_cells(&self, role: FieldRole, f: impl Fn(&[f64; 3]) -> f64) -> CellField {
        let values = (0..self.num_cells())
            .map(|c| f(&self.cell_center(self.cell_ijk(c))))
            .collect();
        CellField { role, values }
    }

    /// Samples a vector function at face centers, keeping only the component
    /// normal to each face.
    pub fn sample_faces(&self, role: FieldRole, f: impl Fn(usize, &[f64; 3]) -> f64) -> FaceField {
        let comps = (0..self.dim)
            .map(|a| {
                (0..self.num_faces(a))
                    .map(|idx| f(a, &self.face_center(a, self.face_ijk(a, idx))))
                    .collect()
            })
            .collect();
        FaceField { role, comps }
    }

    /// Two-point difference quotient `[d_a f]` at interior faces normal to
    /// `axis`. Only that component of the result is populated; boundary faces
    /// and the other components are zero.
    pub fn d_face(&self, f: &CellField, axis: usize) -> Result<FaceField, GridError> {
        self.check_axis(axis)?;
        self.check_cells(f)?;
        let mut out = FaceField::zeros(self, FieldRole::Generic);
        self.d_face_into(&f.values, axis, &mut out.comps[axis]);
        Ok(out)
    }

    /// Gradient on all axes; boundary faces zero.
    pub fn gradient(&self, f: &CellField) -> Result<FaceField, GridError> {
        self.check_cells(f)?;
        let mut out = FaceField::zeros(self, FieldRole::Generic);
        for a in 0..self.dim {
            self.d_face_into(&f.values, a, &mut out.comps[a]);
        }
        Ok(out)
    }

    pub(crate) fn d_face_into(&self, f: &[f64], axis: usize, out: &mut [f64]) {
        let h = self.spacing(axis);
        let [nx, ny, nz] = self.shape();
        for l in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let mut nb = [i, j, l];
                    nb[axis] += 1;
                    if nb[axis] >= self.axes[axis].cells {
                        continue;
                    }
                    let c = self.cell_index([i, j, l]);
                    let e = self.cell_index(nb);
                    out[self.face_index(axis, nb)] = (f[e] - f[c]) / h;
                }
            }
        }
        for idx in 0..out.len() {
            if self.is_boundary_face(axis, self.face_ijk(axis, idx)) {
                out[idx] = 0.0;
            }
        }
    }

    /// `[D_a w]` at every cell, from the `axis` component of `w` including
    /// its boundary faces.
    pub fn d_cell(&self, w: &FaceField, axis: usize) -> Result<CellField, GridError> {
        self.check_axis(axis)?;
        self.check_faces(w)?;
        let mut out = CellField::zeros(self, FieldRole::Generic);
        self.d_cell_accumulate(&w.comps[axis], axis, &mut out.values);
        Ok(out)
    }

    /// Discrete divergence `sum_a [D_a w]`.
    pub fn divergence(&self, w: &FaceField) -> Result<CellField, GridError> {
        self.check_faces(w)?;
        let mut out = CellField::zeros(self, FieldRole::Generic);
        for a in 0..self.dim {
            self.d_cell_accumulate(&w.comps[a], a, &mut out.values);
        }
        Ok(out)
    }

    pub(crate) fn d_cell_accumulate(&self, w: &[f64], axis: usize, out: &mut [f64]) {
        let h = self.spacing(axis);
        for (c, o) in out.iter_mut().enumerate() {
            let lo = self.cell_ijk(c);
            let mut hi = lo;
            hi[axis] += 1;
            *o += (w[self.face_index(axis, hi)] - w[self.face_index(axis, lo)]) / h;
        }
    }

    /// `Π_h`: interior faces take the mean of the two adjacent cells, boundary
    /// faces copy the adjacent cell.
    pub fn interp_face(&self, f: &CellField, axis: usize) -> Result<FaceField, GridError> {
        self.check_axis(axis)?;
        self.check_cells(f)?;
        let mut out = FaceField::zeros(self, f.role);
        self.interp_face_into(&f.values, axis, &mut out.comps[axis]);
        Ok(out)
    }

    /// `Π_h` on every axis.
    pub fn interp_all(&self, f: &CellField) -> Result<FaceField, GridError> {
        self.check_cells(f)?;
        let mut out = FaceField::zeros(self, f.role);
        for a in 0..self.dim {
            self.interp_face_into(&f.values, a, &mut out.comps[a]);
        }
        Ok(out)
    }

    pub(crate) fn interp_face_into(&self, f: &[f64], axis: usize, out: &mut [f64]) {
        let n = self.axes[axis].cells;
        for (idx, o) in out.iter_mut().enumerate() {
            let ijk = self.face_ijk(axis, idx);
            let k = ijk[axis];
            let mut lo = ijk;
            let mut hi = ijk;
            *o = if k == 0 {
                f[self.cell_index(ijk)]
            } else if k == n {
                lo[axis] -= 1;
                f[self.cell_index(lo)]
            } else {
                lo[axis] -= 1;
                hi[axis] = k;
                0.5 * (f[self.cell_index(lo)] + f[self.cell_index(hi)])
            };
        }
    }

    /// `[d_t f]` between two time levels.
    pub fn dt_quotient(&self, new: &CellField, old: &CellField, dt: f64) -> Result<CellField, GridError> {
        if !(dt > 0.0) {
            return Err(GridError::NonPositiveDt(dt));
        }
        self.check_cells(new)?;
        self.check_cells(old)?;
        let values = new.values.iter().zip(&old.values).map(|(a, b)| (a - b) / dt).collect();
        Ok(CellField { role: FieldRole::Generic, values })
    }

    /// `(f, g)_M`.
    pub fn inner_m(&self, f: &CellField, g: &CellField) -> Result<f64, GridError> {
        self.check_cells(f)?;
        self.check_cells(g)?;
        Ok(self.cell_volume() * f.values.iter().zip(&g.values).map(|(a, b)| a * b).sum::<f64>())
    }

    pub fn norm_m(&self, f: &CellField) -> Result<f64, GridError> {
        Ok(self.inner_m(f, f)?.sqrt())
    }

    /// `(f, g)_M` against the constant 1, i.e. the discrete integral.
    pub fn integral(&self, f: &CellField) -> f64 {
        self.cell_volume() * f.values.iter().sum::<f64>()
    }

    /// Face inner product `(f, g)_a` over interior faces normal to `axis`.
    pub fn inner_face(&self, f: &FaceField, g: &FaceField, axis: usize) -> Result<f64, GridError> {
        self.check_axis(axis)?;
        self.check_faces(f)?;
        self.check_faces(g)?;
        let mut s = 0.0;
        for (idx, (a, b)) in f.comps[axis].iter().zip(&g.comps[axis]).enumerate() {
            if !self.is_boundary_face(axis, self.face_ijk(axis, idx)) {
                s += a * b;
            }
        }
        // h_{i+1/2} equals h on a uniform mesh, so every face carries the cell volume.
        Ok(self.cell_volume() * s)
    }

    /// `(v, r)_TM`.
    pub fn inner_tm(&self, f: &FaceField, g: &FaceField) -> Result<f64, GridError> {
        (0..self.dim).map(|a| self.inner_face(f, g, a)).sum()
    }

    pub fn norm_tm(&self, f: &FaceField) -> Result<f64, GridError> {
        Ok(self.inner_tm(f, f)?.sqrt())
    }
}

/// Physical meaning of a field; carried for output labelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FieldRole {
    #[default]
    Generic,
    Pressure,
    Concentration,
    Temperature,
    Porosity,
    Permeability,
    DarcyVelocity,
    ConcentrationFlux,
    HeatFlux,
}

/// Scalar values at cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    pub role: FieldRole,
    pub values: Vec<f64>,
}

impl CellField {
    pub fn zeros(grid: &StaggeredGrid, role: FieldRole) -> Self {
        Self::constant(grid, role, 0.0)
    }

    pub fn constant(grid: &StaggeredGrid, role: FieldRole, v: f64) -> Self {
        CellField { role, values: vec![v; grid.num_cells()] }
    }

    pub fn from_values(grid: &StaggeredGrid, role: FieldRole, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.num_cells() {
            return Err(GridError::ShapeMismatch { expected: grid.num_cells(), got: values.len() });
        }
        Ok(CellField { role, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs_diff(&self, other: &CellField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Normal components on cell faces, one array per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceField {
    pub role: FieldRole,
    pub comps: Vec<Vec<f64>>,
}

impl FaceField {
    pub fn zeros(grid: &StaggeredGrid, role: FieldRole) -> Self {
        FaceField { role, comps: (0..grid.dim()).map(|a| vec![0.0; grid.num_faces(a)]).collect() }
    }

    /// Largest absolute value over boundary faces.
    pub fn max_boundary_abs(&self, grid: &StaggeredGrid) -> f64 {
        let mut m: f64 = 0.0;
        for (a, c) in self.comps.iter().enumerate() {
            for (idx, v) in c.iter().enumerate() {
                if grid.is_boundary_face(a, grid.face_ijk(a, idx)) {
                    m = m.max(v.abs());
                }
            }
        }
        m
    }

    /// Cell-centered average of each component, for output.
    pub fn cell_average(&self, grid: &StaggeredGrid) -> Vec<[f64; 3]> {
        (0..grid.num_cells())
            .map(|c| {
                let lo = grid.cell_ijk(c);
                let mut v = [0.0; 3];
                for (a, va) in v.iter_mut().enumerate().take(grid.dim()) {
                    let mut hi = lo;
                    hi[a] += 1;
                    *va = 0.5 * (self.comps[a][grid.face_index(a, lo)] + self.comps[a][grid.face_index(a, hi)]);
                }
                v
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid1d_like(n: usize) -> StaggeredGrid {
        StaggeredGrid::new(&[Axis::new(0.0, 1.0, n), Axis::new(0.0, 1.0, 3)]).unwrap()
    }

    #[test]
    fn spacing_and_centers() {
        let g = StaggeredGrid::new(&[Axis::new(0.0, 0.2, 80), Axis::new(0.0, 0.2, 80)]).unwrap();
        assert!((g.spacing(0) - 2.5e-3).abs() < 1e-18);
        assert!((g.axis(0).center(0) - 1.25e-3).abs() < 1e-15);
        assert_eq!(g.locate_center(&[1.25e-3, 1.0125e-1]), Some([0, 40, 0]));
        assert_eq!(g.locate_center(&[1.25e-3, 5.125e-2]), Some([0, 20, 0]));
        assert_eq!(g.locate_column(0, 1.9875e-1), Some(79));
        assert_eq!(g.locate_center(&[2.5e-3, 0.1]), None);
    }

    #[test]
    fn index_maps_roundtrip() {
        let g = StaggeredGrid::new(&[Axis::new(0.0, 1.0, 3), Axis::new(0.0, 2.0, 4), Axis::new(0.0, 1.0, 5)]).unwrap();
        for c in 0..g.num_cells() {
            assert_eq!(g.cell_index(g.cell_ijk(c)), c);
        }
        for a in 0..3 {
            for f in 0..g.num_faces(a) {
                assert_eq!(g.face_index(a, g.face_ijk(a, f)), f);
            }
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert_eq!(StaggeredGrid::unit(1, 4).unwrap_err(), GridError::BadDimension(1));
        assert!(StaggeredGrid::new(&[Axis::new(1.0, 0.0, 3), Axis::new(0.0, 1.0, 3)]).is_err());
        assert!(StaggeredGrid::new(&[Axis::new(0.0, 1.0, 0), Axis::new(0.0, 1.0, 3)]).is_err());
    }

    #[test]
    fn d_face_constant_linear_quadratic() {
        let g = grid1d_like(4);
        let c = CellField::constant(&g, FieldRole::Generic, 5.0);
        assert!(g.d_face(&c, 0).unwrap().comps[0].iter().all(|v| *v == 0.0));

        let lin = g.sample_cells(FieldRole::Generic, |x| x[0]);
        let d = g.d_face(&lin, 0).unwrap();
        for (idx, v) in d.comps[0].iter().enumerate() {
            if g.is_boundary_face(0, g.face_ijk(0, idx)) {
                assert_eq!(*v, 0.0);
            } else {
                assert!((v - 1.0).abs() < 1e-14);
            }
        }

        let quad = g.sample_cells(FieldRole::Generic, |x| x[0] * x[0]);
        let d = g.d_face(&quad, 0).unwrap();
        // face at x = 0.5 is face index 2 along x
        assert!((d.comps[0][g.face_index(0, [2, 1, 0])] - 1.0).abs() < 1e-14);
        assert!(g.d_face(&quad, 2).is_err());
    }

    #[test]
    fn d_cell_examples() {
        let g = grid1d_like(5);
        let z = FaceField::zeros(&g, FieldRole::Generic);
        assert!(g.d_cell(&z, 0).unwrap().values.iter().all(|v| *v == 0.0));

        // w_{i+1/2} = i
        let mut w = FaceField::zeros(&g, FieldRole::Generic);
        for (idx, v) in w.comps[0].iter_mut().enumerate() {
            *v = g.face_ijk(0, idx)[0] as f64;
        }
        let d = g.d_cell(&w, 0).unwrap();
        for v in &d.values {
            assert!((v - 1.0 / g.spacing(0)).abs() < 1e-12);
        }
        assert!(g.d_cell(&w, 3).is_err());
    }

    #[test]
    fn d_cell_telescopes_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = StaggeredGrid::new(&[Axis::new(0.0, 1.0, 7), Axis::new(0.0, 0.5, 6)]).unwrap();
        for a in 0..2 {
            let mut w = FaceField::zeros(&g, FieldRole::Generic);
            for (idx, v) in w.comps[a].iter_mut().enumerate() {
                if !g.is_boundary_face(a, g.face_ijk(a, idx)) {
                    *v = rng.gen_range(-1.0..1.0);
                }
            }
            let d = g.d_cell(&w, a).unwrap();
            // independent summation of cell contributions
            let mut s = 0.0;
            for v in &d.values {
                s += v * g.cell_volume();
            }
            assert!(s.abs() < 1e-13);
        }
    }

    #[test]
    fn inner_products() {
        let g = StaggeredGrid::unit(2, 8).unwrap();
        let one = CellField::constant(&g, FieldRole::Generic, 1.0);
        assert!((g.inner_m(&one, &one).unwrap() - 1.0).abs() < 1e-14);
        let g2 = StaggeredGrid::new(&[Axis::new(0.0, 0.2, 5), Axis::new(0.0, 0.2, 5)]).unwrap();
        let one2 = CellField::constant(&g2, FieldRole::Generic, 1.0);
        assert!((g2.inner_m(&one2, &one2).unwrap() - 0.04).abs() < 1e-15);
        assert_eq!(g.norm_m(&CellField::zeros(&g, FieldRole::Generic)).unwrap(), 0.0);
        assert!(g.inner_m(&one, &one2).is_err());
    }

    #[test]
    fn interp_face_examples() {
        let g = StaggeredGrid::unit(2, 20).unwrap();
        let c = CellField::constant(&g, FieldRole::Generic, 7.0);
        let f = g.interp_all(&c).unwrap();
        assert!(f.comps.iter().flatten().all(|v| *v == 7.0));

        let lin = g.sample_cells(FieldRole::Generic, |x| 3.0 * x[0] - 1.0);
        let f = g.interp_face(&lin, 0).unwrap();
        for (idx, v) in f.comps[0].iter().enumerate() {
            let ijk = g.face_ijk(0, idx);
            if !g.is_boundary_face(0, ijk) {
                let x = g.face_center(0, ijk)[0];
                assert!((v - (3.0 * x - 1.0)).abs() < 1e-14);
            }
        }

        let pi = std::f64::consts::PI;
        let s = g.sample_cells(FieldRole::Generic, |x| (pi * x[0]).sin());
        let f = g.interp_face(&s, 0).unwrap();
        let h = g.spacing(0);
        let bound = pi * pi / 8.0 * h * h;
        let mut worst: f64 = 0.0;
        for (idx, v) in f.comps[0].iter().enumerate() {
            let ijk = g.face_ijk(0, idx);
            if !g.is_boundary_face(0, ijk) {
                worst = worst.max((v - (pi * g.face_center(0, ijk)[0]).sin()).abs());
            }
        }
        assert!(worst <= bound, "{worst} > {bound}");
        assert!(bound < 0.0031);
    }

    #[test]
    fn dt_quotient_examples() {
        let g = StaggeredGrid::unit(2, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let old = CellField::from_values(&g, FieldRole::Generic, (0..9).map(|_| rng.gen()).collect()).unwrap();
        assert!(g.dt_quotient(&old, &old, 0.1).unwrap().values.iter().all(|v| *v == 0.0));
        let new = CellField { role: FieldRole::Generic, values: old.values.iter().map(|v| v + 0.5 * 2.0).collect() };
        let q = g.dt_quotient(&new, &old, 0.5).unwrap();
        for v in &q.values {
            assert!((v - 2.0).abs() < 1e-12);
        }
        let new2 = CellField::from_values(&g, FieldRole::Generic, (0..9).map(|_| rng.gen()).collect()).unwrap();
        let q = g.dt_quotient(&new2, &old, 0.25).unwrap();
        for k in 0..9 {
            assert_eq!(q.values[k], (new2.values[k] - old.values[k]) / 0.25);
        }
        assert_eq!(g.dt_quotient(&old, &old, 0.0).unwrap_err(), GridError::NonPositiveDt(0.0));
    }
}
