//! The decoupled time step. Each step runs four stages in order:
//!
//! 1. explicit-in-data porosity update (closed form, no solve);
//! 2. pressure from a symmetric banded system, then Darcy face velocities;
//! 3. acid concentration from a nonsymmetric banded system, then its flux;
//! 4. temperature from a nonsymmetric banded system, then the heat flux.
//!
//! Every stage uses only already-computed data (stage 3 lags temperature,
//! stage 4 uses the new concentration), so a step is three linear solves and
//! no fixed-point iteration.

use std::sync::Arc;

use thiserror::Error;

use crate::constitutive::{
    clamp_conc, heat_capacity, interfacial_area_ck, permeability_capped, reaction_heat, reactive_fraction,
    thermal_conductivity, PhysParams, POROSITY_EPS,
};
use crate::grid::{CellField, FaceField, FieldRole, GridError, StaggeredGrid};
use crate::linsolve::{assemble, solve, Dominance, SolveError, SolveOptions, SolveReport, Stencil};

#[derive(Debug, Error)]
pub enum StepError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("{stage} solve failed: {source}")]
    Solve { stage: Stage, source: SolveError },
    #[error("invalid medium: {0}")]
    InvalidMedium(String),
    #[error("invariant violated after {stage}: {detail}")]
    Invariant { stage: Stage, detail: String },
    #[error("invalid time control: {0}")]
    TimeControl(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Porosity,
    Pressure,
    Concentration,
    Temperature,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Porosity => "porosity stage",
            Stage::Pressure => "pressure stage",
            Stage::Concentration => "concentration stage",
            Stage::Temperature => "temperature stage",
        })
    }
}

/// Uniform time stepping `t^n = n dt`, `n = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeControl {
    pub dt: f64,
    pub steps: usize,
}

impl TimeControl {
    /// Splits `[0, final_time]` into steps of `dt`; the ratio must be an
    /// integer up to rounding.
    pub fn new(dt: f64, final_time: f64) -> Result<Self, StepError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(StepError::TimeControl(format!("dt must be positive, got {dt}")));
        }
        if !(final_time > 0.0 && final_time.is_finite()) {
            return Err(StepError::TimeControl(format!("final time must be positive, got {final_time}")));
        }
        let n = (final_time / dt).round();
        if n < 1.0 || ((n * dt - final_time) / final_time).abs() > 1e-9 {
            return Err(StepError::TimeControl(format!(
                "final time {final_time} is not an integer multiple of dt {dt}"
            )));
        }
        Ok(TimeControl { dt, steps: n as usize })
    }

    pub fn final_time(&self) -> f64 {
        self.dt * self.steps as f64
    }
}

/// Condition on one side of the domain for the temperature equation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SideCondition {
    #[default]
    NoFlux,
    Fixed(f64),
}

/// Temperature conditions per axis, `[low, high]`. Velocity and acid flux
/// are always no-flux.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundarySpec {
    pub temperature: [[SideCondition; 2]; 3],
}

impl BoundarySpec {
    pub fn no_flux() -> Self {
        Self::default()
    }

    pub fn fixed_sides(&self) -> usize {
        self.temperature.iter().flatten().filter(|s| matches!(s, SideCondition::Fixed(_))).count()
    }
}

/// Extra volumetric sources of a manufactured solution, evaluated at cell
/// centers and the new time level.
pub trait ManufacturedSources: Send + Sync {
    /// Added to the right side of the mass balance.
    fn pressure(&self, x: &[f64; 3], t: f64) -> f64;
    /// Added to the right side of the acid balance.
    fn concentration(&self, x: &[f64; 3], t: f64) -> f64;
    /// Added to the porosity rate.
    fn porosity(&self, x: &[f64; 3], t: f64) -> f64;
    /// Added to the right side of the energy balance.
    fn temperature(&self, x: &[f64; 3], t: f64) -> f64;
}

#[derive(Clone)]
pub struct SourceSpec {
    /// Injection rate density `f_I >= 0` (1/s).
    pub injection: CellField,
    /// Production rate density `f_P <= 0` (1/s).
    pub production: CellField,
    /// Injected concentration.
    pub c_inj: f64,
    pub manufactured: Option<Arc<dyn ManufacturedSources>>,
}

impl SourceSpec {
    pub fn none(grid: &StaggeredGrid, c_inj: f64) -> Self {
        SourceSpec {
            injection: CellField::zeros(grid, FieldRole::Generic),
            production: CellField::zeros(grid, FieldRole::Generic),
            c_inj,
            manufactured: None,
        }
    }
}

impl std::fmt::Debug for SourceSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SourceSpec")
            .field("c_inj", &self.c_inj)
            .field("manufactured", &self.manufactured.is_some())
            .finish_non_exhaustive()
    }
}

/// Initial porosity and permeability of the rock.
#[derive(Debug, Clone, PartialEq)]
pub struct MediumFields {
    pub phi0: CellField,
    pub k0: CellField,
}

impl MediumFields {
    pub fn validate(&self) -> Result<(), StepError> {
        for (c, &p) in self.phi0.values.iter().enumerate() {
            if !(p > 0.0 && p < 1.0) {
                return Err(StepError::InvalidMedium(format!("initial porosity {p} at cell {c} outside (0, 1)")));
            }
        }
        for (c, &k) in self.k0.values.iter().enumerate() {
            if !(k > 0.0 && k.is_finite()) {
                return Err(StepError::InvalidMedium(format!("initial permeability {k} at cell {c} not positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub step: usize,
    pub time: f64,
    pub pressure: CellField,
    pub concentration: CellField,
    pub temperature: CellField,
    pub porosity: CellField,
    pub velocity: FaceField,
    pub conc_flux: FaceField,
    pub heat_flux: FaceField,
}

impl SimState {
    /// Fields sampled at cell centers at `t = 0`; porosity starts at `phi0`.
    pub fn initial(
        grid: &StaggeredGrid,
        medium: &MediumFields,
        pressure: CellField,
        concentration: CellField,
        temperature: CellField,
    ) -> Self {
        let mut porosity = medium.phi0.clone();
        porosity.role = FieldRole::Porosity;
        SimState {
            step: 0,
            time: 0.0,
            pressure: CellField { role: FieldRole::Pressure, ..pressure },
            concentration: CellField { role: FieldRole::Concentration, ..concentration },
            temperature: CellField { role: FieldRole::Temperature, ..temperature },
            porosity,
            velocity: FaceField::zeros(grid, FieldRole::DarcyVelocity),
            conc_flux: FaceField::zeros(grid, FieldRole::ConcentrationFlux),
            heat_flux: FaceField::zeros(grid, FieldRole::HeatFlux),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    /// Upper bound of the concentration clamp used in the porosity and
    /// reaction-heat terms.
    pub clamp_cmax: f64,
    pub solver: SolveOptions,
    /// Check the porosity bounds after stage 1. Ignored with manufactured
    /// sources, whose porosity source can drive the update either way.
    pub check_invariants: bool,
    /// Dominance policy for the concentration and temperature systems. The
    /// pressure system is always checked strictly.
    pub transport_dominance: Dominance,
    /// Porosity above which the permeability stops growing. Carman-Kozeny
    /// diverges as porosity approaches one; the default only keeps the
    /// evaluation finite.
    pub permeability_porosity_max: f64,
}

impl Default for StepOptions {
    fn default() -> Self {
        StepOptions {
            clamp_cmax: 1.0,
            solver: SolveOptions::default(),
            check_invariants: true,
            transport_dominance: Dominance::Strict,
            permeability_porosity_max: 1.0 - POROSITY_EPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepDiagnostics {
    pub pressure: Option<SolveReport>,
    pub concentration: Option<SolveReport>,
    pub temperature: Option<SolveReport>,
    /// Face porosities clipped before the Carman-Kozeny evaluation.
    pub permeability_clips: usize,
    /// Transport rows failing strict dominance (only under `Monitor`).
    pub non_dominant_rows: usize,
    /// `|gamma d_t<P> + d_t<Psi> - <f>|` relative to the largest term.
    pub pressure_balance_defect: f64,
}

/// Everything that stays fixed over a run: grid, parameters, medium,
/// sources, boundary conditions and the face-interpolated medium.
#[derive(Debug, Clone)]
pub struct Model {
    pub grid: StaggeredGrid,
    pub params: PhysParams,
    pub medium: MediumFields,
    pub sources: SourceSpec,
    pub boundary: BoundarySpec,
    pub options: StepOptions,
    phi0_faces: FaceField,
    k0_faces: FaceField,
}

/// Calls `f(low_cell, high_cell, face_index)` for every interior face normal to `axis`.
fn for_each_interior_face(grid: &StaggeredGrid, axis: usize, mut f: impl FnMut(usize, usize, usize)) {
    let [nx, ny, nz] = grid.shape();
    for l in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let lo = [i, j, l];
                let mut hi = lo;
                hi[axis] += 1;
                if hi[axis] >= grid.shape()[axis] {
                    continue;
                }
                f(grid.cell_index(lo), grid.cell_index(hi), grid.face_index(axis, hi));
            }
        }
    }
}

impl Model {
    pub fn new(
        grid: StaggeredGrid,
        params: PhysParams,
        medium: MediumFields,
        sources: SourceSpec,
        boundary: BoundarySpec,
        options: StepOptions,
    ) -> Result<Self, StepError> {
        params.validate().map_err(|e| StepError::InvalidMedium(e.to_string()))?;
        for f in [&medium.phi0, &medium.k0, &sources.injection, &sources.production] {
            if f.len() != grid.num_cells() {
                return Err(GridError::ShapeMismatch { expected: grid.num_cells(), got: f.len() }.into());
            }
        }
        medium.validate()?;
        let phi0_faces = grid.interp_all(&medium.phi0)?;
        let k0_faces = grid.interp_all(&medium.k0)?;
        Ok(Model { grid, params, medium, sources, boundary, options, phi0_faces, k0_faces })
    }

    fn manufactured(&self, t: f64, pick: impl Fn(&dyn ManufacturedSources, &[f64; 3], f64) -> f64) -> Option<Vec<f64>> {
        self.sources.manufactured.as_ref().map(|m| {
            (0..self.grid.num_cells())
                .map(|c| pick(m.as_ref(), &self.grid.cell_center(self.grid.cell_ijk(c)), t))
                .collect()
        })
    }

    /// Upper bound of `[d_t Psi]` in cell `c`.
    pub fn porosity_rate_bound(&self, c: usize) -> f64 {
        let p = &self.params;
        p.alpha * p.k_c * p.a0 * self.options.clamp_cmax / (p.rho_s * (1.0 - self.medium.phi0.values[c]))
    }

    /// Stage 1: `Psi^{n+1} = Psi^n + beta (1 - Psi^n) / (1 + beta)`, the
    /// closed-form solution of the linearly implicit porosity update.
    pub fn porosity_step(&self, state: &SimState, dt: f64) -> Result<CellField, StepError> {
        let p = &self.params;
        let rate = p.alpha * p.k_c * p.a0 / p.rho_s;
        let t_new = state.time + dt;
        let extra = self.manufactured(t_new, |m, x, t| m.porosity(x, t));
        let mut out = Vec::with_capacity(self.grid.num_cells());
        for c in 0..self.grid.num_cells() {
            let phi0 = self.medium.phi0.values[c];
            if phi0 >= 1.0 {
                return Err(StepError::InvalidMedium(format!("initial porosity {phi0} >= 1 at cell {c}")));
            }
            let psi = state.porosity.values[c];
            let cbar = clamp_conc(state.concentration.values[c], self.options.clamp_cmax);
            let beta = rate * reactive_fraction(state.temperature.values[c], p) / (1.0 - phi0) * cbar * dt;
            let mut next = psi + beta * (1.0 - psi) / (1.0 + beta);
            if next >= 1.0 && psi < 1.0 {
                // only reachable through rounding when beta is enormous
                next = 1.0 - f64::EPSILON / 2.0;
            }
            if let Some(h) = &extra {
                next += dt * h[c];
            }
            out.push(next);
        }
        let next = CellField { role: FieldRole::Porosity, values: out };
        if self.options.check_invariants && self.sources.manufactured.is_none() {
            self.check_porosity_bounds(state, &next, dt)?;
        }
        Ok(next)
    }

    /// Per-cell bounds `phi0 <= Psi^{n+1} < 1`, `Psi^{n+1} >= Psi^n` and
    /// `0 <= d_t Psi < alpha k_c a0 cmax / (rho_s (1 - phi0))`.
    pub fn check_porosity_bounds(&self, old: &SimState, new: &CellField, dt: f64) -> Result<(), StepError> {
        for c in 0..self.grid.num_cells() {
            let (phi0, before, after) = (self.medium.phi0.values[c], old.porosity.values[c], new.values[c]);
            let rate = (after - before) / dt;
            let bound = self.porosity_rate_bound(c);
            let detail = if !(after >= phi0) {
                Some(format!("Psi = {after} below initial porosity {phi0}"))
            } else if !(after < 1.0) {
                Some(format!("Psi = {after} not below 1"))
            } else if !(after >= before) {
                Some(format!("Psi decreased from {before} to {after}"))
            } else if !(rate >= 0.0 && rate < bound) {
                Some(format!("d_t Psi = {rate} outside [0, {bound})"))
            } else {
                None
            };
            if let Some(d) = detail {
                return Err(StepError::Invariant { stage: Stage::Porosity, detail: format!("cell {c}: {d}") });
            }
        }
        Ok(())
    }

    /// Face permeability `K(Pi_h Psi; Pi_h phi0, Pi_h K0)` over every face;
    /// returns the number of clipped evaluations.
    fn face_permeability(&self, psi: &CellField) -> Result<(FaceField, usize), StepError> {
        let psi_f = self.grid.interp_all(psi)?;
        let mut clips = 0;
        let mut k = FaceField::zeros(&self.grid, FieldRole::Permeability);
        for a in 0..self.grid.dim() {
            for (idx, v) in k.comps[a].iter_mut().enumerate() {
                let (kv, clipped) = permeability_capped(
                    psi_f.comps[a][idx],
                    self.phi0_faces.comps[a][idx],
                    self.k0_faces.comps[a][idx],
                    self.options.permeability_porosity_max,
                );
                clips += clipped as usize;
                *v = kv;
            }
        }
        Ok((k, clips))
    }

    /// Stage 2: pressure from the mass balance with the Darcy flux
    /// substituted, then the face velocity.
    pub fn pressure_velocity_step(
        &self,
        state: &SimState,
        psi_new: &CellField,
        dt: f64,
    ) -> Result<(CellField, FaceField, SolveReport, usize), StepError> {
        let g = &self.grid;
        let p = &self.params;
        let n = g.num_cells();
        let (kf, clips) = self.face_permeability(psi_new)?;
        let mass = p.gamma / dt;
        let mut st = vec![Stencil { diag: mass, off: [0.0; 6] }; n];
        for a in 0..g.dim() {
            let h = g.spacing(a);
            for_each_interior_face(g, a, |lo, hi, f| {
                let t = kf.comps[a][f] / (p.mu * h * h);
                st[lo].diag += t;
                st[lo].off[2 * a + 1] -= t;
                st[hi].diag += t;
                st[hi].off[2 * a] -= t;
            });
        }
        // Solved for the increment P^{n+1} - P^n: the (gamma/dt) P^n terms
        // cancel exactly and the flux of P^n is formed from differences, which
        // keeps the system well scaled when P is large and gamma/dt is tiny.
        let src = self.pressure_source(state.time + dt);
        let mut rhs: Vec<f64> =
            (0..n).map(|c| src[c] - (psi_new.values[c] - state.porosity.values[c]) / dt).collect();
        let p_old = &state.pressure.values;
        for a in 0..g.dim() {
            let h = g.spacing(a);
            for_each_interior_face(g, a, |lo, hi, f| {
                let flux = kf.comps[a][f] / (p.mu * h * h) * (p_old[hi] - p_old[lo]);
                rhs[lo] += flux;
                rhs[hi] -= flux;
            });
        }
        let sys = assemble(g, |r| st[r], rhs, Dominance::Strict)
            .map_err(|source| StepError::Solve { stage: Stage::Pressure, source })?;
        let (dp, report) = solve(&sys, None, &self.options.solver)
            .map_err(|source| StepError::Solve { stage: Stage::Pressure, source })?;
        let values = p_old.iter().zip(&dp).map(|(p, d)| p + d).collect();
        let pressure = CellField { role: FieldRole::Pressure, values };
        let velocity = self.darcy_velocity(&pressure, &kf);
        Ok((pressure, velocity, report, clips))
    }

    /// `f = f_I + f_P` plus any manufactured pressure source, at time `t`.
    pub fn pressure_source(&self, t: f64) -> Vec<f64> {
        let extra = self.manufactured(t, |m, x, t| m.pressure(x, t));
        (0..self.grid.num_cells())
            .map(|c| {
                self.sources.injection.values[c]
                    + self.sources.production.values[c]
                    + extra.as_ref().map_or(0.0, |e| e[c])
            })
            .collect()
    }

    fn darcy_velocity(&self, pressure: &CellField, kf: &FaceField) -> FaceField {
        let g = &self.grid;
        let mut u = FaceField::zeros(g, FieldRole::DarcyVelocity);
        for a in 0..g.dim() {
            let h = g.spacing(a);
            for_each_interior_face(g, a, |lo, hi, f| {
                u.comps[a][f] = -kf.comps[a][f] / self.params.mu * (pressure.values[hi] - pressure.values[lo]) / h;
            });
        }
        u
    }

    /// Stage 3: acid concentration with convection, porosity-weighted
    /// diffusion, the implicit reaction sink and the production sink; then
    /// the total acid flux `W`.
    pub fn concentration_step(
        &self,
        state: &SimState,
        psi_new: &CellField,
        velocity: &FaceField,
        dt: f64,
    ) -> Result<(CellField, FaceField, SolveReport, usize), StepError> {
        let g = &self.grid;
        let p = &self.params;
        let n = g.num_cells();
        let psi_f = g.interp_all(psi_new)?;
        let mut st: Vec<Stencil> = (0..n)
            .map(|c| {
                let psi = psi_new.values[c];
                let a_v = interfacial_area_ck(psi, self.medium.phi0.values[c], p.a0);
                let reaction = p.k_c * a_v * reactive_fraction(state.temperature.values[c], p);
                let diag = psi / dt + reaction - self.sources.production.values[c];
                Stencil { diag, off: [0.0; 6] }
            })
            .collect();
        for a in 0..g.dim() {
            let h = g.spacing(a);
            let d = p.diffusion(a);
            for_each_interior_face(g, a, |lo, hi, f| {
                let adv = velocity.comps[a][f] / (2.0 * h);
                let dif = psi_f.comps[a][f] * d / (h * h);
                st[lo].diag += adv + dif;
                st[lo].off[2 * a + 1] += adv - dif;
                st[hi].diag += -adv + dif;
                st[hi].off[2 * a] += -adv - dif;
            });
        }
        let extra = self.manufactured(state.time + dt, |m, x, t| m.concentration(x, t));
        let rhs: Vec<f64> = (0..n)
            .map(|c| {
                state.porosity.values[c] * state.concentration.values[c] / dt
                    + self.sources.injection.values[c] * self.sources.c_inj
                    + extra.as_ref().map_or(0.0, |e| e[c])
            })
            .collect();
        let sys = assemble(g, |r| st[r], rhs, self.options.transport_dominance)
            .map_err(|source| StepError::Solve { stage: Stage::Concentration, source })?;
        let (x, report) = solve(&sys, Some(&state.concentration.values), &self.options.solver)
            .map_err(|source| StepError::Solve { stage: Stage::Concentration, source })?;
        let conc = CellField { role: FieldRole::Concentration, values: x };
        let mut w = FaceField::zeros(g, FieldRole::ConcentrationFlux);
        for a in 0..g.dim() {
            let h = g.spacing(a);
            let d = p.diffusion(a);
            for_each_interior_face(g, a, |lo, hi, f| {
                let (cl, ch) = (conc.values[lo], conc.values[hi]);
                w.comps[a][f] = velocity.comps[a][f] * 0.5 * (cl + ch) - psi_f.comps[a][f] * d * (ch - cl) / h;
            });
        }
        Ok((conc, w, report, sys.non_dominant_rows()))
    }

    /// Stage 4: temperature with convection, conduction and the lagged
    /// reaction heat; then the heat flux `V`. Fixed-temperature sides use a
    /// reflected ghost value, so the boundary face sits half a cell away.
    pub fn temperature_step(
        &self,
        state: &SimState,
        psi_new: &CellField,
        velocity: &FaceField,
        conc_new: &CellField,
        dt: f64,
    ) -> Result<(CellField, FaceField, SolveReport, usize), StepError> {
        let g = &self.grid;
        let p = &self.params;
        let n = g.num_cells();
        let psi_f = g.interp_all(psi_new)?;
        let cap = p.rho_f * p.theta_f;
        let extra = self.manufactured(state.time + dt, |m, x, t| m.temperature(x, t));
        let mut rhs = Vec::with_capacity(n);
        let mut st = Vec::with_capacity(n);
        for c in 0..n {
            let z_old = state.temperature.values[c];
            let psi = psi_new.values[c];
            let sigma_new = heat_capacity(psi, p);
            let sigma_old = heat_capacity(state.porosity.values[c], p);
            let a_v = interfacial_area_ck(psi, self.medium.phi0.values[c], p.a0);
            let cbar = clamp_conc(conc_new.values[c], self.options.clamp_cmax);
            let rate = p.k_c * reactive_fraction(z_old, p) * cbar;
            rhs.push(sigma_old * z_old / dt + a_v * reaction_heat(z_old) * rate + extra.as_ref().map_or(0.0, |e| e[c]));
            st.push(Stencil { diag: sigma_new / dt, off: [0.0; 6] });
        }
        for a in 0..g.dim() {
            let h = g.spacing(a);
            for_each_interior_face(g, a, |lo, hi, f| {
                let adv = cap * velocity.comps[a][f] / (2.0 * h);
                let cond = thermal_conductivity(psi_f.comps[a][f], p) / (h * h);
                st[lo].diag += adv + cond;
                st[lo].off[2 * a + 1] += adv - cond;
                st[hi].diag += -adv + cond;
                st[hi].off[2 * a] += -adv - cond;
            });
        }
        let fixed = self.fixed_faces(&psi_f);
        for bf in &fixed {
            let h = g.spacing(bf.axis);
            let k = 2.0 * bf.lambda / (h * h);
            // outward advective flux U n Z_b leaves the cell through this face
            let adv = cap * bf.velocity * bf.outward / h;
            st[bf.cell].diag += k;
            rhs[bf.cell] += k * bf.value - adv * bf.value;
        }
        let sys = assemble(g, |r| st[r], rhs, self.options.transport_dominance)
            .map_err(|source| StepError::Solve { stage: Stage::Temperature, source })?;
        let (x, report) = solve(&sys, Some(&state.temperature.values), &self.options.solver)
            .map_err(|source| StepError::Solve { stage: Stage::Temperature, source })?;
        let temp = CellField { role: FieldRole::Temperature, values: x };
        let mut v = FaceField::zeros(g, FieldRole::HeatFlux);
        for a in 0..g.dim() {
            let h = g.spacing(a);
            for_each_interior_face(g, a, |lo, hi, f| {
                let (zl, zh) = (temp.values[lo], temp.values[hi]);
                v.comps[a][f] = cap * velocity.comps[a][f] * 0.5 * (zl + zh)
                    - thermal_conductivity(psi_f.comps[a][f], p) * (zh - zl) / h;
            });
        }
        for bf in &fixed {
            let h = g.spacing(bf.axis);
            let z = temp.values[bf.cell];
            // gradient along +axis across the half cell between center and face
            let grad = -bf.outward * (z - bf.value) / (0.5 * h);
            v.comps[bf.axis][bf.face] = cap * bf.velocity * bf.value - bf.lambda * grad;
        }
        Ok((temp, v, report, sys.non_dominant_rows()))
    }

    fn fixed_faces(&self, psi_f: &FaceField) -> Vec<FixedFace> {
        let g = &self.grid;
        let mut out = Vec::new();
        for a in 0..g.dim() {
            for (side, cond) in self.boundary.temperature[a].iter().enumerate() {
                let SideCondition::Fixed(value) = *cond else { continue };
                for idx in 0..g.num_faces(a) {
                    let ijk = g.face_ijk(a, idx);
                    let on_side = if side == 0 { ijk[a] == 0 } else { ijk[a] == g.shape()[a] };
                    if !on_side {
                        continue;
                    }
                    let mut cell = ijk;
                    if side == 1 {
                        cell[a] -= 1;
                    }
                    out.push(FixedFace {
                        axis: a,
                        face: idx,
                        cell: g.cell_index(cell),
                        outward: if side == 0 { -1.0 } else { 1.0 },
                        value,
                        lambda: thermal_conductivity(psi_f.comps[a][idx], &self.params),
                        velocity: 0.0,
                    });
                }
            }
        }
        out
    }

    /// One full step `n -> n + 1`.
    pub fn advance(&self, state: &SimState, dt: f64) -> Result<(SimState, StepDiagnostics), StepError> {
        if !(dt > 0.0) {
            return Err(GridError::NonPositiveDt(dt).into());
        }
        let mut diag = StepDiagnostics::default();
        let psi = self.porosity_step(state, dt)?;
        let (pressure, velocity, rep, clips) = self.pressure_velocity_step(state, &psi, dt)?;
        diag.pressure = Some(rep);
        diag.permeability_clips = clips;
        diag.pressure_balance_defect = self.pressure_balance_defect(state, &psi, &pressure, dt);
        let (conc, conc_flux, rep, nd) = self.concentration_step(state, &psi, &velocity, dt)?;
        diag.concentration = Some(rep);
        diag.non_dominant_rows += nd;
        let (temp, heat_flux, rep, nd) = self.temperature_step(state, &psi, &velocity, &conc, dt)?;
        diag.temperature = Some(rep);
        diag.non_dominant_rows += nd;
        let next = SimState {
            step: state.step + 1,
            time: state.time + dt,
            pressure,
            concentration: conc,
            temperature: temp,
            porosity: psi,
            velocity,
            conc_flux,
            heat_flux,
        };
        if !next.pressure.values.iter().chain(&next.concentration.values).chain(&next.temperature.values).all(|v| v.is_finite())
        {
            return Err(StepError::Invariant { stage: Stage::Temperature, detail: "non-finite field value".into() });
        }
        Ok((next, diag))
    }

    /// Relative defect of the discrete total-pressure balance
    /// `gamma d_t<P> + d_t<Psi> = <f>`, `<.>` the integral over the domain.
    pub fn pressure_balance_defect(&self, old: &SimState, psi_new: &CellField, p_new: &CellField, dt: f64) -> f64 {
        let g = &self.grid;
        let gamma = self.params.gamma;
        let f = self.pressure_source(old.time + dt);
        let fsum = CellField { role: FieldRole::Generic, values: f };
        let p1 = gamma * g.integral(p_new) / dt;
        let p0 = gamma * g.integral(&old.pressure) / dt;
        let s1 = g.integral(psi_new) / dt;
        let s0 = g.integral(&old.porosity) / dt;
        let fi = g.integral(&fsum);
        let scale = [p1, p0, s1, s0, fi].iter().map(|v| v.abs()).fold(f64::MIN_POSITIVE, f64::max);
        ((p1 - p0) + (s1 - s0) - fi).abs() / scale
    }
}

struct FixedFace {
    axis: usize,
    face: usize,
    cell: usize,
    /// `-1` on the low side, `+1` on the high side.
    outward: f64,
    value: f64,
    lambda: f64,
    /// Normal Darcy velocity on the face, zero under the no-flow condition.
    velocity: f64,
}
