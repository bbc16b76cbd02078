//! Invariant self-tests shared by the `check` subcommand and the test suites:
//! the summation-by-parts identity of the difference operators, agreement of
//! the two algebraic forms of the closures, and a finite-difference residual
//! oracle for the manufactured sources.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constitutive::{
    heat_capacity, interfacial_area, interfacial_area_ck, permeability, reaction_heat, reaction_rate,
    reaction_rate_factored, reactive_fraction, thermal_conductivity, PhysParams,
};
use crate::grid::{CellField, FaceField, FieldRole, StaggeredGrid};
use crate::mms::ManufacturedCase;
use crate::stepper::ManufacturedSources;

/// Largest relative defect of `(d_face f, w)_TM = -(f, D_cell w)_M` over
/// `pairs` random pairs per axis, `w` vanishing on boundary faces.
pub fn adjoint_identity_defect(grid: &StaggeredGrid, pairs: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for axis in 0..grid.dim() {
        for _ in 0..pairs {
            let f = CellField {
                role: FieldRole::Generic,
                values: (0..grid.num_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            };
            let mut w = FaceField::zeros(grid, FieldRole::Generic);
            for idx in 0..grid.num_faces(axis) {
                if !grid.is_boundary_face(axis, grid.face_ijk(axis, idx)) {
                    w.comps[axis][idx] = rng.gen_range(-1.0..1.0);
                }
            }
            let df = grid.d_face(&f, axis).expect("matching shapes");
            let lhs = grid.inner_face(&df, &w, axis).expect("matching shapes");
            let dw = grid.d_cell(&w, axis).expect("matching shapes");
            let rhs = -grid.inner_m(&f, &dw).expect("matching shapes");
            // scale by the sum of absolute products so cancellation cannot hide a defect
            let scale: f64 = grid.cell_volume()
                * (0..grid.num_cells()).map(|c| (f.values[c] * dw.values[c]).abs()).sum::<f64>();
            worst = worst.max((lhs - rhs).abs() / scale.max(f64::MIN_POSITIVE));
        }
    }
    worst
}

/// Largest relative disagreement between the two forms of the interfacial
/// area and of the reaction rate over `samples` random admissible inputs.
/// The rate is sampled over concentration and temperature for the built-in
/// parameter sets.
pub fn constitutive_dual_form_defect(samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sets = [PhysParams::carbonate(), PhysParams::verification()];
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let phi0 = rng.gen_range(0.05..0.7);
        let phi = rng.gen_range(phi0..0.999);
        let k0 = 10f64.powf(rng.gen_range(-12.0..-5.0));
        let a0 = rng.gen_range(0.1..10.0);
        let k = permeability(phi, phi0, k0).expect("admissible porosity");
        let general = interfacial_area(phi, phi0, a0, k, k0).expect("admissible inputs");
        let closed = interfacial_area_ck(phi, phi0, a0);
        worst = worst.max((general - closed).abs() / closed.abs());

        // random (c_f, T) for each fixed parameter set; randomizing k_c against
        // k_s as well drives both forms into the same 1 - 1/(1 + r) cancellation
        let p = &sets[rng.gen_range(0..sets.len())];
        let temp = p.t_ref * rng.gen_range(0.8..1.6);
        let c = rng.gen_range(0.0..2e3);
        let direct = reaction_rate(c, temp, p).expect("positive temperature");
        let factored = reaction_rate_factored(c, temp, p).expect("positive temperature");
        if factored > 0.0 {
            worst = worst.max((direct - factored).abs() / factored);
        }
    }
    worst
}

/// Tenth-order central first derivative of `f` at `x` with step `h`.
fn d1(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    const W: [f64; 5] = [5.0 / 6.0, -5.0 / 21.0, 5.0 / 84.0, -5.0 / 504.0, 1.0 / 1260.0];
    W.iter().enumerate().map(|(k, w)| w * (f(x + (k + 1) as f64 * h) - f(x - (k + 1) as f64 * h))).sum::<f64>() / h
}

fn shifted(x: &[f64; 3], axis: usize, s: f64) -> [f64; 3] {
    let mut y = *x;
    y[axis] = s;
    y
}

/// Max-norm of `source - operator(solution)` for each equation
/// `[pressure, concentration, porosity, temperature]`, with every derivative
/// of the closed-form fields taken by tenth-order differences of point
/// values. Evaluated at the centers of an `n`-per-axis lattice on the unit
/// square/cube at each of `times`.
pub fn mms_residual(case: &ManufacturedCase, n: usize, times: &[f64]) -> [f64; 4] {
    residual_of(case, case, n, times)
}

/// [`mms_residual`] for an arbitrary source provider.
pub fn residual_of(case: &ManufacturedCase, src: &dyn ManufacturedSources, n: usize, times: &[f64]) -> [f64; 4] {
    // Nested differences (divergence of a flux built from a gradient) lose
    // about eps/h^2 to rounding, so the order is raised instead of shrinking h.
    let hx = 5e-3;
    let ht = 1e-2;
    let pr = &case.params;
    let dim = case.dim;
    let p = |x: &[f64; 3], t: f64| case.pressure.value(x, t, dim);
    let c = |x: &[f64; 3], t: f64| case.concentration.value(x, t, dim);
    let z = |x: &[f64; 3], t: f64| case.temperature.value(x, t, dim);
    let phi = |x: &[f64; 3], t: f64| case.porosity.value(x, t, dim);
    let phi0 = |x: &[f64; 3]| phi(x, 0.0);
    let grad = |f: &dyn Fn(&[f64; 3]) -> f64, x: &[f64; 3], a: usize| d1(|s| f(&shifted(x, a, s)), x[a], hx);
    // divergence of a vector field given component-wise
    let div = |flux: &dyn Fn(&[f64; 3], usize) -> f64, x: &[f64; 3]| -> f64 {
        (0..dim).map(|a| d1(|s| flux(&shifted(x, a, s), a), x[a], hx)).sum()
    };
    let u = |x: &[f64; 3], t: f64, a: usize| {
        let k = permeability(phi(x, t), phi0(x), case.k0).expect("admissible porosity");
        -k / pr.mu * grad(&|y| p(y, t), x, a)
    };
    let rate = |x: &[f64; 3], t: f64| pr.k_c * reactive_fraction(z(x, t), pr) * c(x, t);
    let area = |x: &[f64; 3], t: f64| interfacial_area_ck(phi(x, t), phi0(x), pr.a0);

    let mut worst = [0.0f64; 4];
    let total = n.pow(dim as u32);
    for &t in times {
        for k in 0..total {
            let mut x = [0.0; 3];
            let mut rem = k;
            for xa in x.iter_mut().take(dim) {
                *xa = ((rem % n) as f64 + 0.5) / n as f64;
                rem /= n;
            }
            let dt = |f: &dyn Fn(f64) -> f64| d1(f, t, ht);

            let res_p = src.pressure(&x, t)
                - (pr.gamma * dt(&|s| p(&x, s)) + dt(&|s| phi(&x, s)) + div(&|y, a| u(y, t, a), &x));

            let conc_flux = |y: &[f64; 3], a: usize| {
                u(y, t, a) * c(y, t) - phi(y, t) * pr.diffusion(a) * grad(&|q| c(q, t), y, a)
            };
            let res_c = src.concentration(&x, t)
                - (dt(&|s| phi(&x, s) * c(&x, s)) + div(&conc_flux, &x) + area(&x, t) * rate(&x, t));

            let res_phi =
                src.porosity(&x, t) - (dt(&|s| phi(&x, s)) - pr.alpha * area(&x, t) * rate(&x, t) / pr.rho_s);

            let heat_flux = |y: &[f64; 3], a: usize| {
                pr.rho_f * pr.theta_f * u(y, t, a) * z(y, t)
                    - thermal_conductivity(phi(y, t), pr) * grad(&|q| z(q, t), y, a)
            };
            let res_z = src.temperature(&x, t)
                - (dt(&|s| heat_capacity(phi(&x, s), pr) * z(&x, s)) + div(&heat_flux, &x)
                    - area(&x, t) * reaction_heat(z(&x, t)) * rate(&x, t));

            for (w, r) in worst.iter_mut().zip([res_p, res_c, res_phi, res_z]) {
                *w = w.max(r.abs());
            }
        }
    }
    worst
}

/// Analytic no-flux compatibility of a manufactured case: the largest normal
/// derivative of pressure, concentration and temperature over an
/// `n`-per-side lattice of boundary points. Porosity carries no boundary
/// condition and is not checked.
pub fn mms_boundary_defect(case: &ManufacturedCase, n: usize, times: &[f64]) -> f64 {
    let dim = case.dim;
    let mut worst = 0.0f64;
    for &t in times {
        for a in 0..dim {
            for side in [0.0, 1.0] {
                let others: Vec<usize> = (0..dim).filter(|&b| b != a).collect();
                for k in 0..n.pow(others.len() as u32) {
                    let mut x = [0.0; 3];
                    x[a] = side;
                    let mut rem = k;
                    for &b in &others {
                        x[b] = ((rem % n) as f64 + 0.5) / n as f64;
                        rem /= n;
                    }
                    for jet in [case.p(&x, t), case.c(&x, t), case.temp(&x, t)] {
                        worst = worst.max(jet.d[a].abs());
                    }
                }
            }
        }
    }
    worst
}
