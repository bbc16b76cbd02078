//! Time loop of a dissolution scenario: stepping, snapshots and the
//! per-step run assertions.

use std::path::PathBuf;

use thiserror::Error;

use crate::output::{self, OutputError, Snapshot};
use crate::scenarios::{average_porosity, ConfigError, ScenarioConfig};
use crate::stepper::StepError;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("invariant violated at step {step}: {detail}")]
    Invariant { step: usize, detail: String },
}

impl RunError {
    /// 2 config, 3 solver, 4 invariant. Output failures count as config
    /// problems (unwritable directory).
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Output(_) => 2,
            RunError::Step(StepError::Invariant { .. }) | RunError::Invariant { .. } => 4,
            RunError::Step(StepError::InvalidMedium(_) | StepError::TimeControl(_)) => 2,
            RunError::Step(_) => 3,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Skip snapshot and series files entirely.
    pub no_files: bool,
    /// Print one progress line per snapshot to stderr.
    pub progress: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub name: String,
    pub steps: usize,
    pub final_time: f64,
    /// `(step, time, average porosity)` including the initial state.
    pub porosity_series: Vec<(usize, f64, f64)>,
    /// Final porosity at each seed cell, in declaration order.
    pub seed_porosity: Vec<f64>,
    /// Mean final porosity over the cells without a seed.
    pub background_porosity: f64,
    pub files: Vec<PathBuf>,
    pub output_dir: Option<PathBuf>,
    /// Most iterations any solve of each stage took.
    pub max_iterations: [usize; 3],
    pub max_non_dominant_rows: usize,
    pub max_permeability_clips: usize,
    pub max_balance_defect: f64,
}

impl RunSummary {
    pub fn to_text(&self) -> String {
        let first = self.porosity_series.first().map_or(f64::NAN, |s| s.2);
        let last = self.porosity_series.last().map_or(f64::NAN, |s| s.2);
        let seeds: Vec<String> = self.seed_porosity.iter().map(|p| format!("{p:.6}")).collect();
        let mut out = format!(
            "scenario {}: {} steps to t = {:e} s\n\
             average porosity {first:.9} -> {last:.9}\n\
             final seed porosity [{}], background mean {:.6}\n\
             max iterations (pressure, concentration, temperature) = {:?}\n\
             max non-dominant transport rows {}, max permeability clips {}, max pressure balance defect {:.2e}\n",
            self.name,
            self.steps,
            self.final_time,
            seeds.join(", "),
            self.background_porosity,
            self.max_iterations,
            self.max_non_dominant_rows,
            self.max_permeability_clips,
            self.max_balance_defect,
        );
        if let Some(dir) = &self.output_dir {
            out.push_str(&format!("{} files written to {}\n", self.files.len(), dir.display()));
        }
        out
    }
}

/// Runs the whole scenario. Every step asserts the porosity bounds (inside
/// the stepper) and that the average porosity does not decrease.
pub fn run_scenario(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunSummary, RunError> {
    let (model, mut state) = cfg.build()?;
    let tc = cfg.time_control()?;
    let grid = &model.grid;
    let dir = (!opts.no_files).then(|| output::output_dir(cfg.output.directory.as_deref(), &cfg.name));
    let cadence = output::snapshot_steps(tc.steps, cfg.output.snapshots);
    let mut files = Vec::new();
    let mut write = |state: &crate::stepper::SimState| -> Result<(), RunError> {
        if let Some(dir) = &dir {
            if cadence.contains(&state.step) {
                let snap = Snapshot::from_state(state);
                files.extend(output::write_snapshot(dir, &cfg.name, grid, &snap, &cfg.output.formats)?);
            }
        }
        Ok(())
    };
    write(&state)?;
    let mut series = vec![(0, 0.0, average_porosity(grid, &state.porosity))];
    let mut max_iterations = [0usize; 3];
    let (mut max_nd, mut max_clips, mut max_defect) = (0, 0, 0.0f64);
    for k in 1..=tc.steps {
        let (mut next, diag) = model.advance(&state, tc.dt)?;
        next.time = k as f64 * tc.dt;
        let avg = average_porosity(grid, &next.porosity);
        let prev = series.last().map_or(avg, |s| s.2);
        if !(avg >= prev) {
            return Err(RunError::Invariant { step: k, detail: format!("average porosity fell from {prev} to {avg}") });
        }
        series.push((k, next.time, avg));
        for (m, rep) in max_iterations.iter_mut().zip([&diag.pressure, &diag.concentration, &diag.temperature]) {
            *m = (*m).max(rep.as_ref().map_or(0, |r| r.iterations));
        }
        max_nd = max_nd.max(diag.non_dominant_rows);
        max_clips = max_clips.max(diag.permeability_clips);
        max_defect = max_defect.max(diag.pressure_balance_defect);
        state = next;
        write(&state)?;
        if opts.progress && cadence.contains(&k) {
            eprintln!("step {k}/{} t = {:e} s average porosity {avg:.9}", tc.steps, state.time);
        }
    }
    let seeds = cfg.seed_cells(grid);
    let seed_porosity = seeds.iter().map(|&c| state.porosity.values[c]).collect();
    let background: Vec<f64> =
        (0..grid.num_cells()).filter(|c| !seeds.contains(c)).map(|c| state.porosity.values[c]).collect();
    let background_porosity = background.iter().sum::<f64>() / background.len().max(1) as f64;
    if let Some(dir) = &dir {
        files.push(output::write_porosity_series(dir, &cfg.name, &series)?);
    }
    Ok(RunSummary {
        name: cfg.name.clone(),
        steps: tc.steps,
        final_time: tc.final_time(),
        porosity_series: series,
        seed_porosity,
        background_porosity,
        files,
        output_dir: dir,
        max_iterations,
        max_non_dominant_rows: max_nd,
        max_permeability_clips: max_clips,
        max_balance_defect: max_defect,
    })
}
