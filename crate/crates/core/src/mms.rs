//! Manufactured-solution verification: closed-form solutions on the unit
//! square/cube, the sources that make them exact, discrete error norms and
//! convergence studies with `dt = h^2`.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::constitutive::{
    heat_capacity, interfacial_area_ck, permeability_derivative, permeability_guarded, reaction_heat,
    reactive_fraction, thermal_conductivity, PhysParams,
};
use crate::grid::{CellField, FaceField, FieldRole, StaggeredGrid};
use crate::linsolve::Dominance;
use crate::stepper::{
    BoundarySpec, ManufacturedSources, MediumFields, Model, SimState, SourceSpec, StepError, StepOptions,
};

/// Value and the derivatives a source evaluation needs at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub v: f64,
    /// `d/dt`.
    pub t: f64,
    /// `d/dx_k`.
    pub d: [f64; 3],
    /// `d^2/dx_k^2`.
    pub dd: [f64; 3],
}

/// One-dimensional profile in a separable field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    One,
    /// `cos(pi x)`
    Cos,
    /// `sin(pi x)`
    Sin,
    /// `(x (1 - x))^n`
    Bubble(i32),
}

impl Profile {
    fn eval(self, x: f64) -> (f64, f64, f64) {
        use std::f64::consts::PI;
        match self {
            Profile::One => (1.0, 0.0, 0.0),
            Profile::Cos => ((PI * x).cos(), -PI * (PI * x).sin(), -PI * PI * (PI * x).cos()),
            Profile::Sin => ((PI * x).sin(), PI * (PI * x).cos(), -PI * PI * (PI * x).sin()),
            Profile::Bubble(n) => {
                let s = x * (1.0 - x);
                let ds = 1.0 - 2.0 * x;
                let nf = n as f64;
                let v = s.powi(n);
                let d1 = nf * s.powi(n - 1) * ds;
                let d2 = nf * (nf - 1.0) * s.powi(n - 2) * ds * ds - 2.0 * nf * s.powi(n - 1);
                (v, d1, d2)
            }
        }
    }
}

/// Time amplitude of a separable field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Amplitude {
    /// `c t`
    Linear(f64),
    /// `c (e^t - 1)`
    ExpM1(f64),
}

impl Amplitude {
    fn eval(self, t: f64) -> (f64, f64) {
        match self {
            Amplitude::Linear(c) => (c * t, c),
            Amplitude::ExpM1(c) => (c * t.exp_m1(), c * t.exp()),
        }
    }
}

/// `amp(t) * prod_k profile_k(x_k) + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Separable {
    pub amp: Amplitude,
    pub profiles: [Profile; 3],
    pub offset: f64,
}

impl Separable {
    pub fn jet(&self, x: &[f64; 3], t: f64, dim: usize) -> Jet {
        let (a, at) = self.amp.eval(t);
        let mut vals = [(1.0, 0.0, 0.0); 3];
        for k in 0..dim {
            vals[k] = self.profiles[k].eval(x[k]);
        }
        let prod: f64 = vals.iter().map(|v| v.0).product();
        let mut jet = Jet { v: a * prod + self.offset, t: at * prod, ..Jet::default() };
        for k in 0..dim {
            let others: f64 = (0..3).filter(|&m| m != k).map(|m| vals[m].0).product();
            jet.d[k] = a * vals[k].1 * others;
            jet.dd[k] = a * vals[k].2 * others;
        }
        jet
    }

    pub fn value(&self, x: &[f64; 3], t: f64, dim: usize) -> f64 {
        self.jet(x, t, dim).v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseKind {
    Example1,
    Example2,
}

impl std::str::FromStr for CaseKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "example1" => Ok(CaseKind::Example1),
            "example2" => Ok(CaseKind::Example2),
            other => Err(format!("unknown manufactured case `{other}` (expected example1 or example2)")),
        }
    }
}

/// A manufactured solution together with the parameters its sources are
/// built for.
#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedCase {
    pub kind: CaseKind,
    pub dim: usize,
    pub pressure: Separable,
    pub concentration: Separable,
    pub temperature: Separable,
    pub porosity: Separable,
    pub params: PhysParams,
    /// Initial permeability, uniform.
    pub k0: f64,
}

/// Initial permeability of the manufactured cases.
pub const MMS_K0: f64 = 1.0;

/// 2D case on the unit square.
pub fn example1_case() -> ManufacturedCase {
    use Profile::*;
    ManufacturedCase {
        kind: CaseKind::Example1,
        dim: 2,
        pressure: Separable { amp: Amplitude::Linear(1.0), profiles: [Bubble(2), Bubble(2), One], offset: 1.0 },
        concentration: Separable { amp: Amplitude::Linear(1.0), profiles: [Cos, Cos, One], offset: 1.0 },
        temperature: Separable { amp: Amplitude::Linear(0.5), profiles: [Cos, Cos, One], offset: 10.0 },
        porosity: Separable { amp: Amplitude::Linear(0.25), profiles: [Bubble(2), Sin, One], offset: 0.25 },
        params: PhysParams::verification(),
        k0: MMS_K0,
    }
}

/// 3D case on the unit cube.
pub fn example2_case() -> ManufacturedCase {
    use Profile::*;
    ManufacturedCase {
        kind: CaseKind::Example2,
        dim: 3,
        pressure: Separable { amp: Amplitude::ExpM1(1.0), profiles: [Bubble(4), Cos, Cos], offset: 1.0 },
        concentration: Separable { amp: Amplitude::Linear(1.0), profiles: [Bubble(3), Cos, Cos], offset: 1.0 },
        temperature: Separable { amp: Amplitude::ExpM1(0.5), profiles: [Cos, Cos, Cos], offset: 10.0 },
        porosity: Separable { amp: Amplitude::ExpM1(0.25), profiles: [Cos, Sin, Cos], offset: 0.5 },
        params: PhysParams::verification(),
        k0: MMS_K0,
    }
}

pub fn case(kind: CaseKind) -> ManufacturedCase {
    match kind {
        CaseKind::Example1 => example1_case(),
        CaseKind::Example2 => example2_case(),
    }
}

impl ManufacturedCase {
    pub fn p(&self, x: &[f64; 3], t: f64) -> Jet {
        self.pressure.jet(x, t, self.dim)
    }
    pub fn c(&self, x: &[f64; 3], t: f64) -> Jet {
        self.concentration.jet(x, t, self.dim)
    }
    pub fn temp(&self, x: &[f64; 3], t: f64) -> Jet {
        self.temperature.jet(x, t, self.dim)
    }
    pub fn phi(&self, x: &[f64; 3], t: f64) -> Jet {
        self.porosity.jet(x, t, self.dim)
    }

    /// Initial porosity, the solution at `t = 0`.
    pub fn phi0(&self, x: &[f64; 3]) -> f64 {
        self.porosity.value(x, 0.0, self.dim)
    }

    fn perm(&self, x: &[f64; 3], phi: f64) -> (f64, f64) {
        let phi0 = self.phi0(x);
        (permeability_guarded(phi, phi0, self.k0).0, permeability_derivative(phi, phi0, self.k0))
    }

    /// Darcy velocity `-K(phi)/mu grad p`.
    pub fn velocity(&self, x: &[f64; 3], t: f64) -> [f64; 3] {
        let p = self.p(x, t);
        let (k, _) = self.perm(x, self.phi(x, t).v);
        let mut u = [0.0; 3];
        for a in 0..self.dim {
            u[a] = -k / self.params.mu * p.d[a];
        }
        u
    }

    /// `div u`, using that the initial porosity is uniform in both cases.
    fn div_velocity(&self, x: &[f64; 3], t: f64) -> f64 {
        let p = self.p(x, t);
        let phi = self.phi(x, t);
        let (k, dk) = self.perm(x, phi.v);
        -(0..self.dim).map(|a| dk * phi.d[a] * p.d[a] + k * p.dd[a]).sum::<f64>() / self.params.mu
    }

    pub fn source_pressure(&self, x: &[f64; 3], t: f64) -> f64 {
        self.params.gamma * self.p(x, t).t + self.phi(x, t).t + self.div_velocity(x, t)
    }

    pub fn source_concentration(&self, x: &[f64; 3], t: f64) -> f64 {
        let pr = &self.params;
        let c = self.c(x, t);
        let phi = self.phi(x, t);
        let z = self.temp(x, t);
        let u = self.velocity(x, t);
        let div_u = self.div_velocity(x, t);
        let storage = phi.t * c.v + phi.v * c.t;
        let convection = c.v * div_u + (0..self.dim).map(|a| u[a] * c.d[a]).sum::<f64>();
        let diffusion = (0..self.dim).map(|a| pr.diffusion(a) * (phi.d[a] * c.d[a] + phi.v * c.dd[a])).sum::<f64>();
        let a_v = interfacial_area_ck(phi.v, self.phi0(x), pr.a0);
        storage + convection - diffusion + pr.k_c * a_v * reactive_fraction(z.v, pr) * c.v
    }

    pub fn source_porosity(&self, x: &[f64; 3], t: f64) -> f64 {
        let pr = &self.params;
        let phi = self.phi(x, t);
        let a_v = interfacial_area_ck(phi.v, self.phi0(x), pr.a0);
        let rate = pr.k_c * reactive_fraction(self.temp(x, t).v, pr) * self.c(x, t).v;
        phi.t - pr.alpha * a_v * rate / pr.rho_s
    }

    pub fn source_temperature(&self, x: &[f64; 3], t: f64) -> f64 {
        let pr = &self.params;
        let z = self.temp(x, t);
        let phi = self.phi(x, t);
        let u = self.velocity(x, t);
        let div_u = self.div_velocity(x, t);
        let cap = pr.rho_f * pr.theta_f;
        let sigma = heat_capacity(phi.v, pr);
        let sigma_t = (pr.rho_f * pr.theta_f - pr.rho_s * pr.theta_s) * phi.t;
        let storage = sigma_t * z.v + sigma * z.t;
        let convection = cap * (z.v * div_u + (0..self.dim).map(|a| u[a] * z.d[a]).sum::<f64>());
        let lambda = thermal_conductivity(phi.v, pr);
        let dlambda = pr.lambda_f - pr.lambda_s;
        let conduction = (0..self.dim).map(|a| dlambda * phi.d[a] * z.d[a] + lambda * z.dd[a]).sum::<f64>();
        let a_v = interfacial_area_ck(phi.v, self.phi0(x), pr.a0);
        let rate = pr.k_c * reactive_fraction(z.v, pr) * self.c(x, t).v;
        storage + convection - conduction - a_v * reaction_heat(z.v) * rate
    }
}

impl ManufacturedSources for ManufacturedCase {
    fn pressure(&self, x: &[f64; 3], t: f64) -> f64 {
        self.source_pressure(x, t)
    }
    fn concentration(&self, x: &[f64; 3], t: f64) -> f64 {
        self.source_concentration(x, t)
    }
    fn porosity(&self, x: &[f64; 3], t: f64) -> f64 {
        self.source_porosity(x, t)
    }
    fn temperature(&self, x: &[f64; 3], t: f64) -> f64 {
        self.source_temperature(x, t)
    }
}

/// Error magnitudes of one run: `max_n ||E^n||` in the `M` norm for cell
/// fields and the `TM` norm for velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldErrors {
    pub porosity: f64,
    pub pressure: f64,
    pub velocity: f64,
    pub concentration: f64,
    pub temperature: f64,
    /// `(dt sum_n ||d E_c^n||_TM^2)^(1/2)`, reported but not rated.
    pub concentration_grad: f64,
    /// Same for temperature.
    pub temperature_grad: f64,
}

impl FieldErrors {
    pub const NAMES: [&'static str; 5] = ["E_phi", "E_p", "E_u", "E_cf", "E_T"];

    pub fn rated(&self) -> [f64; 5] {
        [self.porosity, self.pressure, self.velocity, self.concentration, self.temperature]
    }
}

/// Running `l^infinity`-in-time tracker of the discrete errors.
#[derive(Debug, Clone)]
pub struct ErrorTracker<'a> {
    grid: &'a StaggeredGrid,
    case: &'a ManufacturedCase,
    pub errors: FieldErrors,
    grad_c_sq: f64,
    grad_t_sq: f64,
    steps: usize,
}

impl<'a> ErrorTracker<'a> {
    pub fn new(grid: &'a StaggeredGrid, case: &'a ManufacturedCase) -> Self {
        ErrorTracker { grid, case, errors: FieldErrors::default(), grad_c_sq: 0.0, grad_t_sq: 0.0, steps: 0 }
    }

    fn cell_error(&self, field: &CellField, exact: impl Fn(&[f64; 3]) -> f64) -> CellField {
        let ex = self.grid.sample_cells(FieldRole::Generic, exact);
        CellField {
            role: FieldRole::Generic,
            values: field.values.iter().zip(&ex.values).map(|(a, b)| a - b).collect(),
        }
    }

    /// Folds the errors of `state` (at `state.time`) into the running maxima.
    pub fn record(&mut self, state: &SimState, dt: f64) {
        let g = self.grid;
        let cs = self.case;
        let t = state.time;
        let e_phi = self.cell_error(&state.porosity, |x| cs.phi(x, t).v);
        let e_p = self.cell_error(&state.pressure, |x| cs.p(x, t).v);
        let e_c = self.cell_error(&state.concentration, |x| cs.c(x, t).v);
        let e_t = self.cell_error(&state.temperature, |x| cs.temp(x, t).v);
        let exact_u = g.sample_faces(FieldRole::DarcyVelocity, |a, x| cs.velocity(x, t)[a]);
        let e_u = FaceField {
            role: FieldRole::Generic,
            comps: state
                .velocity
                .comps
                .iter()
                .zip(&exact_u.comps)
                .map(|(n, e)| n.iter().zip(e).map(|(a, b)| a - b).collect())
                .collect(),
        };
        let norm = |f: &CellField| g.norm_m(f).unwrap_or(f64::NAN);
        let e = &mut self.errors;
        e.porosity = e.porosity.max(norm(&e_phi));
        e.pressure = e.pressure.max(norm(&e_p));
        e.concentration = e.concentration.max(norm(&e_c));
        e.temperature = e.temperature.max(norm(&e_t));
        e.velocity = e.velocity.max(g.norm_tm(&e_u).unwrap_or(f64::NAN));
        let grad_sq = |f: &CellField| g.gradient(f).and_then(|d| g.inner_tm(&d, &d)).unwrap_or(f64::NAN);
        self.grad_c_sq += dt * grad_sq(&e_c);
        self.grad_t_sq += dt * grad_sq(&e_t);
        e.concentration_grad = self.grad_c_sq.sqrt();
        e.temperature_grad = self.grad_t_sq.sqrt();
        self.steps += 1;
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}

/// Model and initial state of a manufactured run on `n` cells per axis.
pub fn setup(case: &ManufacturedCase, n: usize) -> Result<(Model, SimState), StepError> {
    let grid = StaggeredGrid::unit(case.dim, n)?;
    let medium = MediumFields {
        phi0: grid.sample_cells(FieldRole::Porosity, |x| case.phi0(x)),
        k0: CellField::constant(&grid, FieldRole::Permeability, case.k0),
    };
    let state = SimState::initial(
        &grid,
        &medium,
        grid.sample_cells(FieldRole::Pressure, |x| case.p(x, 0.0).v),
        grid.sample_cells(FieldRole::Concentration, |x| case.c(x, 0.0).v),
        grid.sample_cells(FieldRole::Temperature, |x| case.temp(x, 0.0).v),
    );
    let mut sources = SourceSpec::none(&grid, case.params.c_inj);
    sources.manufactured = Some(Arc::new(case.clone()));
    let options = StepOptions {
        // the manufactured concentration exceeds 1, so only the lower clamp applies
        clamp_cmax: f64::INFINITY,
        check_invariants: false,
        transport_dominance: Dominance::Strict,
        ..StepOptions::default()
    };
    let model = Model::new(grid, case.params.clone(), medium, sources, BoundarySpec::no_flux(), options)?;
    Ok((model, state))
}

/// Runs `[0, 1]` with `dt = h^2` on `n` cells per axis and returns the
/// error norms.
pub fn run_case(case: &ManufacturedCase, n: usize) -> Result<FieldErrors, StepError> {
    run_case_with_steps(case, n, n * n)
}

/// Runs `[0, 1]` in `steps` uniform steps on `n` cells per axis.
pub fn run_case_with_steps(case: &ManufacturedCase, n: usize, steps: usize) -> Result<FieldErrors, StepError> {
    let (model, mut state) = setup(case, n)?;
    let dt = 1.0 / steps as f64;
    let mut tracker = ErrorTracker::new(&model.grid, case);
    for k in 1..=steps {
        let (mut next, _) = model.advance(&state, dt)?;
        // pin the clock to n dt so sampling does not accumulate rounding
        next.time = k as f64 * dt;
        tracker.record(&next, dt);
        state = next;
    }
    Ok(tracker.errors)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub kind: CaseKind,
    /// Cells per axis of each mesh, coarse to fine.
    pub meshes: Vec<usize>,
    pub errors: Vec<FieldErrors>,
}

impl ConvergenceReport {
    pub fn h(&self) -> Vec<f64> {
        self.meshes.iter().map(|&n| 1.0 / n as f64).collect()
    }

    /// `log2(e_h / e_{h/2})` for each consecutive pair whose mesh ratio is 2.
    pub fn rates(&self) -> Vec<Option<[f64; 5]>> {
        self.meshes
            .windows(2)
            .zip(self.errors.windows(2))
            .map(|(m, e)| {
                if m[1] != 2 * m[0] {
                    return None;
                }
                let (a, b) = (e[0].rated(), e[1].rated());
                let mut r = [0.0; 5];
                for k in 0..5 {
                    r[k] = (a[k] / b[k]).log2();
                }
                Some(r)
            })
            .collect()
    }

    /// Machine-readable table: `h,E_phi,rate,E_p,rate,E_u,rate,E_cf,rate,E_T,rate`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("h");
        for name in FieldErrors::NAMES {
            let _ = write!(s, ",{name},rate_{name}");
        }
        s.push('\n');
        let rates = self.rates();
        for (k, (&n, e)) in self.meshes.iter().zip(&self.errors).enumerate() {
            let _ = write!(s, "1/{n}");
            let r = if k == 0 { None } else { rates[k - 1] };
            for (f, v) in e.rated().iter().enumerate() {
                match r {
                    Some(r) => {
                        let _ = write!(s, ",{v:.6e},{:.4}", r[f]);
                    }
                    None => {
                        let _ = write!(s, ",{v:.6e},");
                    }
                }
            }
            s.push('\n');
        }
        s
    }

    /// Aligned text table in the same column order.
    pub fn to_text(&self) -> String {
        let mut s = format!("{:<8}", "h");
        for name in FieldErrors::NAMES {
            let _ = write!(s, "{:>11}{:>7}", name, "rate");
        }
        s.push('\n');
        let rates = self.rates();
        for (k, (&n, e)) in self.meshes.iter().zip(&self.errors).enumerate() {
            let _ = write!(s, "{:<8}", format!("1/{n}"));
            let r = if k == 0 { None } else { rates[k - 1] };
            for (f, v) in e.rated().iter().enumerate() {
                let rate = r.map_or("---".to_string(), |r| format!("{:.2}", r[f]));
                let _ = write!(s, "{:>11}{:>7}", format!("{v:.2E}"), rate);
            }
            s.push('\n');
        }
        s
    }
}

/// Runs every mesh (concurrently) and collects the error table.
pub fn run_convergence_study(case: &ManufacturedCase, meshes: &[usize]) -> Result<ConvergenceReport, StepError> {
    let results: Vec<Result<FieldErrors, StepError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = meshes.iter().map(|&n| scope.spawn(move || run_case(case, n))).collect();
        handles.into_iter().map(|h| h.join().expect("convergence worker panicked")).collect()
    });
    let errors = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(ConvergenceReport { kind: case.kind, meshes: meshes.to_vec(), errors })
}
