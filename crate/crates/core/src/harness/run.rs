//! Experiment dispatch and the thin-film driver.

use super::config::{
    Converge2d, ConvergeSpace, ConvergeTime, Experiment, ExperimentConfig, InitialState, Micromag,
    Solve,
};
use crate::linsolve::SpectralPlan;
use crate::mesh::{Grid, VectorField};
use crate::physics::{self, DemagKernel, EnergyBreakdown, MaterialParams, StrayEnergy};
use crate::schemes::{self, SchemeKind, SchemeState, StepContext, StepOptions};
use crate::verify::{
    self, ConvergenceReport, ConvergenceSpec, ManufacturedCase, Problem, Refinement,
    StabilityReport,
};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub step: usize,
    /// Dimensionless time.
    pub t: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingSample {
    pub step: usize,
    pub t: f64,
    /// Wall time of this step alone.
    pub walltime_ms: f64,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub m: VectorField,
}

/// In-plane angle `atan2(m2, m1)` at each cell centre along a line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AngleProfile {
    pub x: Vec<f64>,
    pub angle: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicromagSummary {
    pub scheme: SchemeKind,
    pub alpha: f64,
    pub cells: [usize; 3],
    pub eps: f64,
    pub q: f64,
    /// Seconds per unit of dimensionless time.
    pub time_unit: f64,
    pub dt: f64,
    pub steps: usize,
    pub initial_energy: EnergyBreakdown,
    pub final_energy: EnergyBreakdown,
    pub solves: usize,
    /// Evaluations of the local field (stray field included).
    pub field_evaluations: usize,
    pub max_unit_deviation: f64,
    /// Angle along the horizontal centreline of the mid-plane.
    pub profile: AngleProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub scheme: SchemeKind,
    pub steps: usize,
    pub dt: f64,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub solves: usize,
    pub max_unit_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Payload {
    Convergence(ConvergenceReport),
    Stability(StabilityReport),
    Micromag(MicromagSummary),
    Solve(SolveSummary),
}

/// Everything a run produces. Snapshots and timing are kept out of the
/// JSON payload so that the report stays byte-identical across runs.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub payload: Payload,
    pub energy: Vec<EnergySample>,
    pub timing: Vec<TimingSample>,
    pub snapshots: Vec<Snapshot>,
}

#[derive(Debug, Default)]
struct Series {
    energy: Vec<EnergySample>,
    timing: Vec<TimingSample>,
    snapshots: Vec<Snapshot>,
}

/// Validates and runs `config`.
pub fn run(config: &ExperimentConfig) -> Result<RunRecord> {
    config.validate()?;
    let mut series = Series::default();
    let payload = match &config.experiment {
        Experiment::ConvergeTime(c) => Payload::Convergence(converge_time(c)?),
        Experiment::ConvergeSpace(c) => Payload::Convergence(converge_space(c)?),
        Experiment::Converge2d(c) => Payload::Convergence(converge_2d(c)?),
        Experiment::Stability(s) => Payload::Stability(verify::stability_scan(s)?),
        Experiment::Micromag(m) => {
            Payload::Micromag(micromag(m, config.snapshot_every, &mut series)?)
        }
        Experiment::Solve(s) => Payload::Solve(solve(s, config, &mut series)?),
    };
    Ok(RunRecord {
        config: config.clone(),
        payload,
        energy: series.energy,
        timing: series.timing,
        snapshots: series.snapshots,
    })
}

fn converge_time(c: &ConvergeTime) -> Result<ConvergenceReport> {
    verify::run_convergence(&ConvergenceSpec {
        scheme: c.scheme,
        problem: Problem::Manufactured(ManufacturedCase::new(c.dimension, c.alpha)),
        t_final: c.t_final,
        refinement: Refinement::Time {
            cells: c.cells,
            steps: c.steps.clone(),
        },
    })
}

fn converge_space(c: &ConvergeSpace) -> Result<ConvergenceReport> {
    verify::run_convergence(&ConvergenceSpec {
        scheme: c.scheme,
        problem: Problem::Manufactured(ManufacturedCase::new(c.dimension, c.alpha)),
        t_final: c.t_final,
        refinement: Refinement::Space {
            cells: c.cells.clone(),
            dt: c.dt,
        },
    })
}

fn converge_2d(c: &Converge2d) -> Result<ConvergenceReport> {
    verify::run_convergence(&ConvergenceSpec {
        scheme: c.scheme,
        problem: Problem::NeelWall {
            alpha: c.alpha,
            eta: c.eta,
            reference_steps: c.reference_steps,
            reference_tol: c.reference_tol,
        },
        t_final: c.t_final,
        refinement: Refinement::Time {
            cells: c.cells,
            steps: c.steps.clone(),
        },
    })
}

/// Two in-plane domains: `(0,1,0)` in the outer fifths along x, `(1,0,0)` between.
pub fn thin_film_initial(grid: Grid) -> Result<VectorField> {
    let lx = grid.lengths()[0];
    VectorField::sample_function(grid, |x| {
        if x[0] <= lx / 5.0 || x[0] >= 4.0 * lx / 5.0 {
            [0.0, 1.0, 0.0]
        } else {
            [1.0, 0.0, 0.0]
        }
    })
}

/// Angle `atan2(m2, m1)` along the middle row (in y) of the middle layer (in z).
pub fn centreline_angle(m: &VectorField) -> AngleProfile {
    let grid = *m.grid();
    let [nx, ny, nz] = grid.cells_per_axis();
    let (j, k) = (ny / 2, nz / 2);
    let mut out = AngleProfile::default();
    for i in 0..nx {
        let v = m.at(grid.index(i, j, k));
        out.x.push(grid.center([i, j, k])[0]);
        out.angle.push(v[1].atan2(v[0]));
    }
    out
}

fn mid_plane(m: &VectorField) -> VectorField {
    m.z_slice(m.grid().nz() / 2)
}

fn micromag(cfg: &Micromag, snapshot_every: usize, series: &mut Series) -> Result<MicromagSummary> {
    let dimless = physics::nondimensionalize(&cfg.constants);
    let len = cfg.constants.length;
    let cells = cfg.active_cells();
    let grid = Grid::new(
        cells,
        [cfg.film[0] / len, cfg.film[1] / len, cfg.film[2] / len],
    )?;
    let params = MaterialParams {
        eps: dimless.eps,
        q: dimless.q,
        alpha: cfg.alpha,
        h_ext: [0.0; 3],
        stray_enabled: true,
    };
    params.validate()?;
    let dt = cfg.dt / dimless.time_unit;
    let steps = (cfg.t_final / cfg.dt).round() as usize;
    log::info!(
        "micromag: {}x{}x{} cells, eps = {:.4e}, q = {:.4e}, dt = {dt:.4}, {steps} steps",
        cells[0],
        cells[1],
        cells[2],
        dimless.eps,
        dimless.q
    );

    let kernel = DemagKernel::new(grid);
    let plan = SpectralPlan::new(grid);
    let ctx = StepContext::new(&params, &plan).with_kernel(Some(&kernel));
    let m0 = thin_film_initial(grid)?;
    let initial_energy =
        physics::energy_breakdown(&params, Some(&kernel), &m0, StrayEnergy::Functional)?;
    series.energy.push(EnergySample {
        step: 0,
        t: 0.0,
        energy: initial_energy.total(),
    });
    series.snapshots.push(Snapshot {
        step: 0,
        t: 0.0,
        m: mid_plane(&m0),
    });

    let mut dev: f64 = 0.0;
    let mut clock = Instant::now();
    let state = schemes::integrate(cfg.scheme, m0, &ctx, dt, steps, |s: &SchemeState| {
        let elapsed = clock.elapsed().as_secs_f64() * 1e3;
        dev = dev.max(s.m_curr.max_unit_deviation());
        let e = physics::energy(&params, Some(&kernel), &s.m_curr)?;
        if !e.is_finite() {
            return Err(Error::NonFinite { cell: [0; 3] });
        }
        series.energy.push(EnergySample {
            step: s.step_index,
            t: s.t,
            energy: e,
        });
        series.timing.push(TimingSample {
            step: s.step_index,
            t: s.t,
            walltime_ms: elapsed,
        });
        if snapshot_every > 0
            && s.step_index.is_multiple_of(snapshot_every)
            && s.step_index != steps
        {
            series.snapshots.push(Snapshot {
                step: s.step_index,
                t: s.t,
                m: mid_plane(&s.m_curr),
            });
        }
        clock = Instant::now();
        Ok(())
    })?;
    let final_energy = physics::energy_breakdown(
        &params,
        Some(&kernel),
        &state.m_curr,
        StrayEnergy::Functional,
    )?;
    series.snapshots.push(Snapshot {
        step: state.step_index,
        t: state.t,
        m: mid_plane(&state.m_curr),
    });
    Ok(MicromagSummary {
        scheme: cfg.scheme,
        alpha: cfg.alpha,
        cells,
        eps: dimless.eps,
        q: dimless.q,
        time_unit: dimless.time_unit,
        dt,
        steps,
        initial_energy,
        final_energy,
        solves: ctx.solve_count(),
        field_evaluations: ctx.field_evaluations(),
        max_unit_deviation: dev,
        profile: centreline_angle(&state.m_curr),
    })
}

fn initial_state(init: &InitialState, grid: Grid, seed: u64) -> Result<VectorField> {
    match *init {
        InitialState::Uniform { m } => {
            let n = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
            Ok(VectorField::uniform(grid, [m[0] / n, m[1] / n, m[2] / n]))
        }
        InitialState::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut f = VectorField::zeros(grid);
            for idx in 0..grid.len() {
                // rejection sampling in the unit ball keeps directions uniform
                loop {
                    let v: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
                    let n2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
                    if n2 > 1e-6 && n2 <= 1.0 {
                        let n = n2.sqrt();
                        f.set(idx, [v[0] / n, v[1] / n, v[2] / n]);
                        break;
                    }
                }
            }
            Ok(f)
        }
        InitialState::NeelWall { eta } => {
            let lx = grid.lengths()[0];
            VectorField::sample_function(grid, |x| {
                let l = (0.5 * lx - x[0]) / (2.0 * eta);
                [l.tanh(), 1.0 / l.cosh(), 0.0]
            })
        }
    }
}

fn solve(cfg: &Solve, top: &ExperimentConfig, series: &mut Series) -> Result<SolveSummary> {
    let grid = Grid::new(cfg.cells, cfg.lengths)?;
    let params = cfg.material;
    let kernel = params.stray_enabled.then(|| DemagKernel::new(grid));
    let plan = SpectralPlan::new(grid);
    let ctx = StepContext::new(&params, &plan)
        .with_kernel(kernel.as_ref())
        .with_options(StepOptions::default());
    let m0 = initial_state(&cfg.initial, grid, top.seed)?;
    let initial_energy = physics::energy(&params, kernel.as_ref(), &m0)?;
    series.energy.push(EnergySample {
        step: 0,
        t: 0.0,
        energy: initial_energy,
    });
    series.snapshots.push(Snapshot {
        step: 0,
        t: 0.0,
        m: m0.clone(),
    });
    let every = top.snapshot_every;
    let mut dev: f64 = 0.0;
    let mut clock = Instant::now();
    let state = schemes::integrate(
        cfg.scheme,
        m0,
        &ctx,
        cfg.dt,
        cfg.steps,
        |s: &SchemeState| {
            let elapsed = clock.elapsed().as_secs_f64() * 1e3;
            dev = dev.max(s.m_curr.max_unit_deviation());
            series.energy.push(EnergySample {
                step: s.step_index,
                t: s.t,
                energy: physics::energy(&params, kernel.as_ref(), &s.m_curr)?,
            });
            series.timing.push(TimingSample {
                step: s.step_index,
                t: s.t,
                walltime_ms: elapsed,
            });
            if every > 0 && s.step_index.is_multiple_of(every) && s.step_index != cfg.steps {
                series.snapshots.push(Snapshot {
                    step: s.step_index,
                    t: s.t,
                    m: s.m_curr.clone(),
                });
            }
            clock = Instant::now();
            Ok(())
        },
    )?;
    let final_energy = physics::energy(&params, kernel.as_ref(), &state.m_curr)?;
    if cfg.steps > 0 {
        series.snapshots.push(Snapshot {
            step: state.step_index,
            t: state.t,
            m: state.m_curr,
        });
    }
    Ok(SolveSummary {
        scheme: cfg.scheme,
        steps: cfg.steps,
        dt: cfg.dt,
        initial_energy,
        final_energy,
        solves: ctx.solve_count(),
        max_unit_deviation: dev,
    })
}
