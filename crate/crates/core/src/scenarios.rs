//! Dissolution scenarios: the TOML configuration schema, its validation, the
//! built-in presets and the construction of a ready-to-run [`Model`].

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constitutive::{PhysParams, POROSITY_EPS};
use crate::grid::{Axis, CellField, FieldRole, StaggeredGrid};
use crate::linsolve::{Dominance, SolveOptions};
use crate::stepper::{
    BoundarySpec, MediumFields, Model, SideCondition, SimState, SourceSpec, StepError, StepOptions, TimeControl,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("unknown preset `{0}` (expected example3, example4 or example5)")]
    UnknownPreset(String),
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub grid: GridConfig,
    pub time: TimeConfig,
    #[serde(default = "PhysParams::carbonate")]
    pub params: PhysParams,
    /// Upper clamp of the acid concentration in the reaction terms; defaults
    /// to the injected concentration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clamp_cmax: Option<f64>,
    pub initial: InitialConfig,
    #[serde(default)]
    pub sources: SourcesConfig,
    #[serde(default)]
    pub boundary: BoundaryConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Cells per axis; two or three entries.
    pub cells: Vec<usize>,
    /// Domain length per axis, lower corner at the origin.
    #[serde(default = "default_extent")]
    pub extent: Vec<f64>,
}

fn default_extent() -> Vec<f64> {
    vec![0.2]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub dt: f64,
    pub final_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub pressure: f64,
    pub concentration: f64,
    pub temperature: f64,
    pub porosity: f64,
    pub permeability: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<Seed>,
}

/// Single-cell heterogeneity; `at` must be a cell center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seed {
    pub at: Vec<f64>,
    pub porosity: f64,
    pub permeability: f64,
}

/// Injection and production on whole cell columns normal to x. Columns
/// default to the first and last.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourcesConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub injection_x: Option<f64>,
    #[serde(default)]
    pub injection_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub production_x: Option<f64>,
    #[serde(default)]
    pub production_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    /// Fixed-temperature sides; every other side is insulated.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub temperature: Vec<FixedSide>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisName {
    X,
    Y,
    Z,
}

impl AxisName {
    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Low,
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedSide {
    pub axis: AxisName,
    pub side: Side,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DominancePolicy {
    Strict,
    Monitor,
}

/// Solver and guard settings. The defaults are the ones used for the
/// manufactured-solution runs; the dissolution presets relax them because
/// Carman-Kozeny drives the pressure coefficients up by many orders of
/// magnitude once a column dissolves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    #[serde(default = "default_tol")]
    pub solver_tol: f64,
    #[serde(default = "default_phi_max")]
    pub permeability_porosity_max: f64,
    #[serde(default = "default_dominance")]
    pub transport_dominance: DominancePolicy,
}

fn default_tol() -> f64 {
    SolveOptions::default().tol
}

fn default_phi_max() -> f64 {
    1.0 - POROSITY_EPS
}

fn default_dominance() -> DominancePolicy {
    DominancePolicy::Strict
}

impl Default for NumericsConfig {
    fn default() -> Self {
        NumericsConfig {
            solver_tol: default_tol(),
            permeability_porosity_max: default_phi_max(),
            transport_dominance: default_dominance(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SnapshotFormat {
    Csv,
    Vtk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Evenly spaced snapshots after the initial one; the last falls on the
    /// final step.
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
    #[serde(default = "default_formats")]
    pub formats: Vec<SnapshotFormat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
}

fn default_snapshots() -> usize {
    10
}

fn default_formats() -> Vec<SnapshotFormat> {
    vec![SnapshotFormat::Csv, SnapshotFormat::Vtk]
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { snapshots: default_snapshots(), formats: default_formats(), directory: None }
    }
}

/// Parses and validates a scenario file.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let cfg: ScenarioConfig = toml::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads `arg` as a preset name first, then as a file path.
pub fn load(arg: &str) -> Result<ScenarioConfig, ConfigError> {
    if let Some(cfg) = builtin_scenarios().remove(arg) {
        return Ok(cfg);
    }
    let path = PathBuf::from(arg);
    if !path.exists() && !arg.contains('.') && !arg.contains('/') {
        return Err(ConfigError::UnknownPreset(arg.to_string()));
    }
    let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Io { path, source })?;
    parse_config(&text)
}

impl ScenarioConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    pub fn dim(&self) -> usize {
        self.grid.cells.len()
    }

    pub fn clamp(&self) -> f64 {
        self.clamp_cmax.unwrap_or(self.params.c_inj)
    }

    pub fn build_grid(&self) -> Result<StaggeredGrid, ConfigError> {
        let g = &self.grid;
        if !(2..=3).contains(&g.cells.len()) {
            return Err(invalid(format!("grid.cells needs 2 or 3 entries, got {}", g.cells.len())));
        }
        if g.extent.len() != 1 && g.extent.len() != g.cells.len() {
            return Err(invalid("grid.extent needs one entry or one per axis"));
        }
        let axes: Vec<Axis> = g
            .cells
            .iter()
            .enumerate()
            .map(|(a, &n)| Axis::new(0.0, *g.extent.get(a).unwrap_or(&g.extent[0]), n))
            .collect();
        StaggeredGrid::new(&axes).map_err(|e| invalid(format!("grid: {e}")))
    }

    pub fn time_control(&self) -> Result<TimeControl, ConfigError> {
        TimeControl::new(self.time.dt, self.time.final_time).map_err(|e| invalid(format!("time: {e}")))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let grid = self.build_grid()?;
        self.time_control()?;
        self.params.validate().map_err(|e| invalid(format!("params: {e}")))?;
        let cmax = self.clamp();
        if !(cmax > 0.0) {
            return Err(invalid(format!("clamp_cmax must be positive, got {cmax}")));
        }
        let num = &self.numerics;
        if !(num.solver_tol > 0.0 && num.solver_tol < 1.0) {
            return Err(invalid(format!("numerics.solver_tol must lie in (0, 1), got {}", num.solver_tol)));
        }
        if !(num.permeability_porosity_max > 0.0 && num.permeability_porosity_max < 1.0) {
            return Err(invalid("numerics.permeability_porosity_max must lie in (0, 1)"));
        }
        let init = &self.initial;
        for (what, v) in [("pressure", init.pressure), ("concentration", init.concentration), ("temperature", init.temperature)]
        {
            if !v.is_finite() {
                return Err(invalid(format!("initial.{what} is not finite")));
            }
        }
        if init.concentration < 0.0 || !(init.temperature > 0.0) {
            return Err(invalid("initial concentration must be >= 0 and temperature > 0"));
        }
        check_medium("initial", init.porosity, init.permeability)?;
        let mut seen = Vec::new();
        for (k, s) in init.seeds.iter().enumerate() {
            check_medium(&format!("initial.seeds[{k}]"), s.porosity, s.permeability)?;
            let ijk = grid.locate_center(&s.at).ok_or_else(|| {
                invalid(format!("initial.seeds[{k}].at = {:?} is not a cell center of the {}D grid", s.at, grid.dim()))
            })?;
            if seen.contains(&ijk) {
                return Err(invalid(format!("initial.seeds[{k}] repeats a cell")));
            }
            seen.push(ijk);
        }
        let src = &self.sources;
        if !(src.injection_rate >= 0.0 && src.production_rate <= 0.0) {
            return Err(invalid(format!(
                "injection_rate must be >= 0 and production_rate <= 0 (got {} and {})",
                src.injection_rate, src.production_rate
            )));
        }
        self.source_columns(&grid)?;
        let mut sides = Vec::new();
        for b in &self.boundary.temperature {
            if b.axis.index() >= grid.dim() {
                return Err(invalid(format!("boundary side on axis {:?} of a {}D grid", b.axis, grid.dim())));
            }
            if !(b.value > 0.0 && b.value.is_finite()) {
                return Err(invalid(format!("boundary temperature {} must be positive", b.value)));
            }
            if sides.contains(&(b.axis, b.side)) {
                return Err(invalid(format!("boundary side {:?}/{:?} given twice", b.axis, b.side)));
            }
            sides.push((b.axis, b.side));
        }
        Ok(())
    }

    fn source_columns(&self, grid: &StaggeredGrid) -> Result<(usize, usize), ConfigError> {
        let column = |x: Option<f64>, default: usize, what: &str| match x {
            None => Ok(default),
            Some(x) => grid
                .locate_column(0, x)
                .ok_or_else(|| invalid(format!("sources.{what}_x = {x} is not a cell-center x coordinate"))),
        };
        let inj = column(self.sources.injection_x, 0, "injection")?;
        let prod = column(self.sources.production_x, grid.shape()[0] - 1, "production")?;
        Ok((inj, prod))
    }

    /// Initial porosity and permeability, with the seeds applied.
    pub fn medium(&self, grid: &StaggeredGrid) -> Result<MediumFields, ConfigError> {
        let mut phi0 = CellField::constant(grid, FieldRole::Porosity, self.initial.porosity);
        let mut k0 = CellField::constant(grid, FieldRole::Permeability, self.initial.permeability);
        for s in &self.initial.seeds {
            let c = grid.cell_index(grid.locate_center(&s.at).ok_or_else(|| invalid("seed off the grid"))?);
            phi0.values[c] = s.porosity;
            k0.values[c] = s.permeability;
        }
        Ok(MediumFields { phi0, k0 })
    }

    /// Cells hosting a seed, in declaration order.
    pub fn seed_cells(&self, grid: &StaggeredGrid) -> Vec<usize> {
        self.initial.seeds.iter().filter_map(|s| grid.locate_center(&s.at)).map(|ijk| grid.cell_index(ijk)).collect()
    }

    pub fn sources(&self, grid: &StaggeredGrid) -> Result<SourceSpec, ConfigError> {
        let (inj, prod) = self.source_columns(grid)?;
        let mut spec = SourceSpec::none(grid, self.params.c_inj);
        for c in 0..grid.num_cells() {
            let i = grid.cell_ijk(c)[0];
            if i == inj {
                spec.injection.values[c] += self.sources.injection_rate;
            }
            if i == prod {
                spec.production.values[c] += self.sources.production_rate;
            }
        }
        Ok(spec)
    }

    pub fn boundary_spec(&self) -> BoundarySpec {
        let mut b = BoundarySpec::no_flux();
        for s in &self.boundary.temperature {
            let side = match s.side {
                Side::Low => 0,
                Side::High => 1,
            };
            b.temperature[s.axis.index()][side] = SideCondition::Fixed(s.value);
        }
        b
    }

    /// Validates and builds the model and its initial state.
    pub fn build(&self) -> Result<(Model, SimState), ConfigError> {
        self.validate()?;
        let grid = self.build_grid()?;
        let medium = self.medium(&grid)?;
        let state = SimState::initial(
            &grid,
            &medium,
            CellField::constant(&grid, FieldRole::Pressure, self.initial.pressure),
            CellField::constant(&grid, FieldRole::Concentration, self.initial.concentration),
            CellField::constant(&grid, FieldRole::Temperature, self.initial.temperature),
        );
        let num = &self.numerics;
        let mut options = StepOptions {
            clamp_cmax: self.clamp(),
            transport_dominance: match num.transport_dominance {
                DominancePolicy::Strict => Dominance::Strict,
                DominancePolicy::Monitor => Dominance::Monitor,
            },
            permeability_porosity_max: num.permeability_porosity_max,
            ..StepOptions::default()
        };
        options.solver.tol = num.solver_tol;
        let sources = self.sources(&grid)?;
        let model = Model::new(grid, self.params.clone(), medium, sources, self.boundary_spec(), options)
            .map_err(|e: StepError| invalid(e.to_string()))?;
        Ok((model, state))
    }
}

fn check_medium(what: &str, phi: f64, k: f64) -> Result<(), ConfigError> {
    if !(phi > 0.0 && phi < 1.0) {
        return Err(invalid(format!("{what}: porosity {phi} outside (0, 1)")));
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(invalid(format!("{what}: permeability {k} must be positive")));
    }
    Ok(())
}

/// Volume-weighted mean porosity.
pub fn average_porosity(grid: &StaggeredGrid, psi: &CellField) -> f64 {
    grid.integral(psi) / grid.domain_volume()
}

fn dissolution_2d(name: &str, dt: f64, final_time: f64, rate: f64) -> ScenarioConfig {
    ScenarioConfig {
        name: name.to_string(),
        grid: GridConfig { cells: vec![80, 80], extent: vec![0.2, 0.2] },
        time: TimeConfig { dt, final_time },
        params: PhysParams::carbonate(),
        clamp_cmax: Some(1e3),
        initial: InitialConfig {
            pressure: 1.52e5,
            concentration: 0.0,
            temperature: 298.0,
            porosity: 0.2,
            permeability: 1e-8,
            seeds: vec![
                Seed { at: vec![1.25e-3, 1.0125e-1], porosity: 0.5, permeability: 1e-7 },
                Seed { at: vec![1.25e-3, 5.125e-2], porosity: 0.6, permeability: 1e-6 },
            ],
        },
        sources: SourcesConfig { injection_x: None, injection_rate: rate, production_x: None, production_rate: -rate },
        boundary: BoundaryConfig::default(),
        numerics: NumericsConfig {
            solver_tol: 1e-6,
            permeability_porosity_max: 0.99,
            transport_dominance: DominancePolicy::Monitor,
        },
        output: OutputConfig::default(),
    }
}

/// The three dissolution presets, keyed by name.
pub fn builtin_scenarios() -> BTreeMap<String, ScenarioConfig> {
    let ex3 = dissolution_2d("example3", 1e5, 1e7, 1e-4);
    let mut ex4 = dissolution_2d("example4", 1e4, 1e6, 5e-4);
    ex4.boundary.temperature.push(FixedSide { axis: AxisName::X, side: Side::Low, value: 298.0 });
    let mut ex5 = dissolution_2d("example5", 1e4, 1e6, 1e-4);
    ex5.grid = GridConfig { cells: vec![40, 40, 40], extent: vec![0.2, 0.2, 0.2] };
    ex5.initial.seeds = vec![
        Seed { at: vec![2.5e-3, 1.025e-1, 1.025e-1], porosity: 0.5, permeability: 1e-7 },
        Seed { at: vec![2.5e-3, 5.25e-2, 5.25e-2], porosity: 0.6, permeability: 1e-6 },
    ];
    ex5.sources.injection_x = Some(2.5e-3);
    ex5.sources.production_x = Some(1.975e-1);
    [ex3, ex4, ex5].into_iter().map(|c| (c.name.clone(), c)).collect()
}
