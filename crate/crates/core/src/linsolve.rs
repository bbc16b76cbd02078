//! 5-point (2D) / 7-point (3D) banded systems on the cell lattice and their
//! solvers: Jacobi-preconditioned conjugate gradients for the symmetric
//! pressure system, Jacobi-preconditioned BiCGStab for the nonsymmetric
//! transport systems, and dense elimination for tiny systems and tests.

use thiserror::Error;

use crate::grid::StaggeredGrid;

/// Neighbour directions in band order: `-x, +x, -y, +y, -z, +z`.
pub const DIRECTIONS: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("row {row} is not strictly diagonally dominant (|diag| = {diag:.6e}, off-diagonal sum = {off:.6e})")]
    NotDiagonallyDominant { row: usize, diag: f64, off: f64 },
    #[error("row {row} couples across the domain boundary (direction {dir})")]
    BoundaryCoupling { row: usize, dir: usize },
    #[error("non-finite coefficient in row {row}")]
    NonFinite { row: usize },
    #[error("right-hand side has {got} entries, system has {expected} unknowns")]
    SizeMismatch { expected: usize, got: usize },
    #[error("{method} did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { method: &'static str, iterations: usize, residual: f64 },
    #[error("{method} broke down at iteration {iteration}")]
    Breakdown { method: &'static str, iteration: usize },
    #[error("singular matrix in dense elimination at column {0}")]
    Singular(usize),
    #[error("dense elimination limited to {limit} unknowns, got {n}")]
    TooLarge { n: usize, limit: usize },
}

/// Coefficients of one matrix row: the diagonal and one entry per neighbour
/// direction (`-x, +x, -y, +y, -z, +z`).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Stencil {
    pub diag: f64,
    pub off: [f64; DIRECTIONS],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dominance {
    /// Reject rows that are not strictly diagonally dominant.
    Strict,
    /// Assemble anyway; the count of failing rows is kept on the system.
    Monitor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandedSystem {
    shape: [usize; 3],
    diag: Vec<f64>,
    off: Vec<[f64; DIRECTIONS]>,
    rhs: Vec<f64>,
    non_dominant_rows: usize,
}

fn neighbour(shape: [usize; 3], ijk: [usize; 3], dir: usize) -> Option<usize> {
    let axis = dir / 2;
    let mut n = ijk;
    if dir % 2 == 0 {
        if n[axis] == 0 {
            return None;
        }
        n[axis] -= 1;
    } else {
        n[axis] += 1;
        if n[axis] >= shape[axis] {
            return None;
        }
    }
    Some(n[0] + shape[0] * (n[1] + shape[1] * n[2]))
}

/// Builds a banded system row by row from a per-cell coefficient provider.
pub fn assemble(
    grid: &StaggeredGrid,
    coeffs: impl Fn(usize) -> Stencil,
    rhs: Vec<f64>,
    dominance: Dominance,
) -> Result<BandedSystem, SolveError> {
    let n = grid.num_cells();
    if rhs.len() != n {
        return Err(SolveError::SizeMismatch { expected: n, got: rhs.len() });
    }
    let shape = grid.shape();
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n);
    let mut non_dominant_rows = 0;
    for row in 0..n {
        let s = coeffs(row);
        let ijk = grid.cell_ijk(row);
        if !s.diag.is_finite() || !rhs[row].is_finite() {
            return Err(SolveError::NonFinite { row });
        }
        let mut sum = 0.0;
        for (dir, &v) in s.off.iter().enumerate() {
            if !v.is_finite() {
                return Err(SolveError::NonFinite { row });
            }
            if v != 0.0 && neighbour(shape, ijk, dir).is_none() {
                return Err(SolveError::BoundaryCoupling { row, dir });
            }
            sum += v.abs();
        }
        if !(s.diag.abs() > sum) {
            if dominance == Dominance::Strict {
                return Err(SolveError::NotDiagonallyDominant { row, diag: s.diag.abs(), off: sum });
            }
            non_dominant_rows += 1;
        }
        diag.push(s.diag);
        off.push(s.off);
    }
    Ok(BandedSystem { shape, diag, off, rhs, non_dominant_rows })
}

impl BandedSystem {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn stencil(&self, row: usize) -> Stencil {
        Stencil { diag: self.diag[row], off: self.off[row] }
    }

    /// Rows that failed strict diagonal dominance (only nonzero under
    /// [`Dominance::Monitor`]).
    pub fn non_dominant_rows(&self) -> usize {
        self.non_dominant_rows
    }

    fn ijk(&self, row: usize) -> [usize; 3] {
        let [nx, ny, _] = self.shape;
        [row % nx, (row / nx) % ny, row / (nx * ny)]
    }

    /// Column index coupled to `row` through direction `dir`.
    pub fn neighbour(&self, row: usize, dir: usize) -> Option<usize> {
        neighbour(self.shape, self.ijk(row), dir)
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let [nx, ny, _] = self.shape;
        let strides = [1, nx, nx * ny];
        for row in 0..self.len() {
            let mut acc = self.diag[row] * x[row];
            let o = &self.off[row];
            for axis in 0..3 {
                let s = strides[axis];
                // boundary-crossing bands are zero, so only bounds matter here
                if o[2 * axis] != 0.0 {
                    acc += o[2 * axis] * x[row - s];
                }
                if o[2 * axis + 1] != 0.0 {
                    acc += o[2 * axis + 1] * x[row + s];
                }
            }
            y[row] = acc;
        }
    }

    /// Exact structural symmetry of the band coefficients.
    pub fn is_symmetric(&self) -> bool {
        for row in 0..self.len() {
            for dir in (1..DIRECTIONS).step_by(2) {
                if let Some(col) = self.neighbour(row, dir) {
                    let a = self.off[row][dir];
                    let b = self.off[col][dir - 1];
                    if (a - b).abs() > 1e-14 * (a.abs() + b.abs()) {
                        return false;
                    }
                }
            }
        }
        true
    }

    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut ax = vec![0.0; self.len()];
        self.matvec(x, &mut ax);
        self.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect()
    }

    /// Row-major dense copy of the matrix.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.len();
        let mut a = vec![0.0; n * n];
        for row in 0..n {
            a[row * n + row] = self.diag[row];
            for dir in 0..DIRECTIONS {
                if let Some(col) = self.neighbour(row, dir) {
                    a[row * n + col] += self.off[row][dir];
                }
            }
        }
        a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Conjugate gradients for symmetric systems, BiCGStab otherwise. A
    /// failed nonsymmetric solve is retried with restarted GMRES, and any
    /// failed solve small enough for dense elimination falls back to it.
    Auto,
    ConjugateGradient,
    BiCgStab,
    Gmres,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Relative residual target `||b - A x|| <= tol ||b||`.
    pub tol: f64,
    /// Defaults to `10 * N` when `None`.
    pub max_iter: Option<usize>,
    pub method: Method,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-10, max_iter: None, method: Method::Auto }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub method: &'static str,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Largest system handed to dense elimination.
pub const DENSE_LIMIT: usize = 4096;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b`; `guess` seeds the Krylov iterations.
pub fn solve(
    sys: &BandedSystem,
    guess: Option<&[f64]>,
    opts: &SolveOptions,
) -> Result<(Vec<f64>, SolveReport), SolveError> {
    let n = sys.len();
    let bnorm = norm(&sys.rhs);
    if bnorm == 0.0 {
        let report = SolveReport { method: "trivial", iterations: 0, residual: 0.0, converged: true };
        return Ok((vec![0.0; n], report));
    }
    let method = match opts.method {
        Method::Auto if sys.is_symmetric() => Method::ConjugateGradient,
        Method::Auto => Method::BiCgStab,
        m => m,
    };
    let max_iter = opts.max_iter.unwrap_or(10 * n).max(1);
    let x0 = match guess {
        Some(g) if g.len() == n => g.to_vec(),
        _ => vec![0.0; n],
    };
    let dense = || -> Result<(Vec<f64>, SolveReport), SolveError> {
        let x = solve_dense(sys.to_dense(), sys.rhs.clone())?;
        let residual = norm(&sys.residual(&x)) / bnorm;
        Ok((x, SolveReport { method: "dense", iterations: 1, residual, converged: true }))
    };
    let first = match method {
        Method::ConjugateGradient => pcg(sys, x0.clone(), bnorm, opts.tol, max_iter),
        Method::BiCgStab => bicgstab(sys, x0.clone(), bnorm, opts.tol, max_iter),
        Method::Gmres => gmres(sys, x0.clone(), bnorm, opts.tol, max_iter),
        Method::Dense => return dense(),
        Method::Auto => unreachable!(),
    };
    let retryable = |e: &SolveError| matches!(e, SolveError::NotConverged { .. } | SolveError::Breakdown { .. });
    match first {
        Err(e) if opts.method == Method::Auto && retryable(&e) => {
            let second = if method == Method::BiCgStab { gmres(sys, x0, bnorm, opts.tol, max_iter) } else { Err(e) };
            match second {
                Err(e) if retryable(&e) && n <= DENSE_LIMIT => dense(),
                other => other,
            }
        }
        other => other,
    }
}

fn pcg(
    sys: &BandedSystem,
    mut x: Vec<f64>,
    bnorm: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport), SolveError> {
    const NAME: &str = "conjugate gradients";
    let n = sys.len();
    let inv_diag: Vec<f64> = sys.diag.iter().map(|d| 1.0 / d).collect();
    let mut r = sys.residual(&x);
    let mut res = norm(&r) / bnorm;
    if res <= tol {
        return Ok((x, SolveReport { method: NAME, iterations: 0, residual: res, converged: true }));
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        sys.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap == 0.0 || !pap.is_finite() {
            return Err(SolveError::Breakdown { method: NAME, iteration: it });
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        res = norm(&r) / bnorm;
        if res <= tol {
            // confirm against the true residual
            res = norm(&sys.residual(&x)) / bnorm;
            if res <= tol {
                return Ok((x, SolveReport { method: NAME, iterations: it, residual: res, converged: true }));
            }
            r = sys.residual(&x);
        }
        for k in 0..n {
            z[k] = r[k] * inv_diag[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(SolveError::NotConverged { method: NAME, iterations: max_iter, residual: res })
}

fn bicgstab(
    sys: &BandedSystem,
    mut x: Vec<f64>,
    bnorm: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport), SolveError> {
    const NAME: &str = "BiCGStab";
    let n = sys.len();
    let inv_diag: Vec<f64> = sys.diag.iter().map(|d| 1.0 / d).collect();
    let mut r = sys.residual(&x);
    let mut res = norm(&r) / bnorm;
    if res <= tol {
        return Ok((x, SolveReport { method: NAME, iterations: 0, residual: res, converged: true }));
    }
    let mut r_hat = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut zs = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut restarts = 0;
    let mut it = 0;
    while it < max_iter {
        it += 1;
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() < 1e-300 || omega == 0.0 {
            // restart with the current residual as shadow vector
            if restarts > 20 {
                return Err(SolveError::Breakdown { method: NAME, iteration: it });
            }
            restarts += 1;
            r = sys.residual(&x);
            r_hat.copy_from_slice(&r);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            v.iter_mut().for_each(|e| *e = 0.0);
            p.iter_mut().for_each(|e| *e = 0.0);
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for k in 0..n {
            p[k] = r[k] + beta * (p[k] - omega * v[k]);
            y[k] = p[k] * inv_diag[k];
        }
        sys.matvec(&y, &mut v);
        let rv = dot(&r_hat, &v);
        if rv == 0.0 || !rv.is_finite() {
            return Err(SolveError::Breakdown { method: NAME, iteration: it });
        }
        alpha = rho / rv;
        for k in 0..n {
            s[k] = r[k] - alpha * v[k];
        }
        if norm(&s) / bnorm <= tol {
            for k in 0..n {
                x[k] += alpha * y[k];
            }
            res = norm(&sys.residual(&x)) / bnorm;
            if res <= tol {
                return Ok((x, SolveReport { method: NAME, iterations: it, residual: res, converged: true }));
            }
            r = sys.residual(&x);
            continue;
        }
        for k in 0..n {
            zs[k] = s[k] * inv_diag[k];
        }
        sys.matvec(&zs, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for k in 0..n {
            x[k] += alpha * y[k] + omega * zs[k];
            r[k] = s[k] - omega * t[k];
        }
        res = norm(&r) / bnorm;
        if !res.is_finite() {
            return Err(SolveError::Breakdown { method: NAME, iteration: it });
        }
        if res <= tol {
            res = norm(&sys.residual(&x)) / bnorm;
            if res <= tol {
                return Ok((x, SolveReport { method: NAME, iterations: it, residual: res, converged: true }));
            }
            r = sys.residual(&x);
        }
    }
    Err(SolveError::NotConverged { method: NAME, iterations: max_iter, residual: res })
}

/// Krylov dimension between GMRES restarts.
const GMRES_RESTART: usize = 50;

/// Restarted GMRES with right Jacobi preconditioning, so the minimized
/// residual is the true one.
fn gmres(
    sys: &BandedSystem,
    mut x: Vec<f64>,
    bnorm: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport), SolveError> {
    const NAME: &str = "GMRES";
    let n = sys.len();
    let m = GMRES_RESTART.min(n).max(1);
    let inv_diag: Vec<f64> = sys.diag.iter().map(|d| 1.0 / d).collect();
    let mut total = 0;
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    loop {
        let r = sys.residual(&x);
        let beta = norm(&r);
        let res = beta / bnorm;
        if !res.is_finite() {
            return Err(SolveError::Breakdown { method: NAME, iteration: total });
        }
        if res <= tol {
            return Ok((x, SolveReport { method: NAME, iterations: total, residual: res, converged: true }));
        }
        if total >= max_iter {
            return Err(SolveError::NotConverged { method: NAME, iterations: total, residual: res });
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        // column j of the Hessenberg matrix, rotated in place
        let mut h = vec![vec![0.0; m + 1]; m];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        for j in 0..m {
            total += 1;
            for i in 0..n {
                z[i] = basis[j][i] * inv_diag[i];
            }
            sys.matvec(&z, &mut w);
            for i in 0..=j {
                let hij = dot(&w, &basis[i]);
                h[j][i] = hij;
                for (wk, vk) in w.iter_mut().zip(&basis[i]) {
                    *wk -= hij * vk;
                }
            }
            let hn = norm(&w);
            h[j][j + 1] = hn;
            for i in 0..j {
                let (a, b) = (h[j][i], h[j][i + 1]);
                h[j][i] = cs[i] * a + sn[i] * b;
                h[j][i + 1] = -sn[i] * a + cs[i] * b;
            }
            let (a, b) = (h[j][j], h[j][j + 1]);
            let rho = a.hypot(b);
            if rho == 0.0 {
                return Err(SolveError::Breakdown { method: NAME, iteration: total });
            }
            cs[j] = a / rho;
            sn[j] = b / rho;
            h[j][j] = rho;
            h[j][j + 1] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            k = j + 1;
            if hn == 0.0 || g[j + 1].abs() / bnorm <= tol || total >= max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut acc = g[i];
            for l in i + 1..k {
                acc -= h[l][i] * y[l];
            }
            y[i] = acc / h[i][i];
        }
        for (yi, v) in y.iter().zip(&basis) {
            for l in 0..n {
                x[l] += yi * v[l] * inv_diag[l];
            }
        }
    }
}

/// Gaussian elimination with partial pivoting on a row-major `n x n` matrix.
pub fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>) -> Result<Vec<f64>, SolveError> {
    let n = b.len();
    if n > DENSE_LIMIT {
        return Err(SolveError::TooLarge { n, limit: DENSE_LIMIT });
    }
    if a.len() != n * n {
        return Err(SolveError::SizeMismatch { expected: n * n, got: a.len() });
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .unwrap_or(col);
        if a[piv * n + col] == 0.0 {
            return Err(SolveError::Singular(col));
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            b.swap(piv, col);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row * n + k] * x[k];
        }
        x[row] = acc / a[row * n + row];
    }
    Ok(x)
}
