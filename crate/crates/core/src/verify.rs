//! Manufactured solutions, convergence studies and the stability scan.
//!
//! The manufactured solutions have the form
//! `m = (cos φ sin t, sin φ sin t, cos t)` with `φ = x̄` in 1D and
//! `φ = x̄ȳz̄` in 3D, `x̄ = x²(1-x)²`. They are unit length for every `φ`
//! and satisfy homogeneous Neumann conditions on the unit interval/cube
//! because `x̄'` vanishes at 0 and 1.

use crate::linsolve::SpectralPlan;
use crate::mesh::{Grid, NormKind, VectorField};
use crate::physics::MaterialParams;
use crate::schemes::{
    self, KrylovOptions, SchemeKind, SchemeState, SourceHook, StepContext, StepOptions,
};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// `x²(1-x)²` and its first two derivatives.
#[inline]
fn bump(x: f64) -> [f64; 3] {
    let y = x * (1.0 - x);
    [
        y * y,
        2.0 * y * (1.0 - 2.0 * x),
        2.0 - 12.0 * x + 12.0 * x * x,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    #[serde(rename = "1d")]
    One,
    #[serde(rename = "3d")]
    Three,
}

/// Exact solution of `∂t m = -m×Δm - α m×(m×Δm) + g` with `ε = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManufacturedCase {
    pub dimension: Dimension,
    pub alpha: f64,
}

impl ManufacturedCase {
    pub fn new(dimension: Dimension, alpha: f64) -> Self {
        Self { dimension, alpha }
    }

    /// `φ`, `|∇φ|²` and `Δφ`.
    fn phase(&self, x: [f64; 3]) -> (f64, f64, f64) {
        match self.dimension {
            Dimension::One => {
                let [p, dp, ddp] = bump(x[0]);
                (p, dp * dp, ddp)
            }
            Dimension::Three => {
                let [a, da, dda] = bump(x[0]);
                let [b, db, ddb] = bump(x[1]);
                let [c, dc, ddc] = bump(x[2]);
                let grad = [da * b * c, a * db * c, a * b * dc];
                let lap = dda * b * c + a * ddb * c + a * b * ddc;
                (a * b * c, grad.iter().map(|g| g * g).sum(), lap)
            }
        }
    }

    pub fn exact(&self, x: [f64; 3], t: f64) -> [f64; 3] {
        let (p, _, _) = self.phase(x);
        let s = t.sin();
        [p.cos() * s, p.sin() * s, t.cos()]
    }

    pub fn time_derivative(&self, x: [f64; 3], t: f64) -> [f64; 3] {
        let (p, _, _) = self.phase(x);
        let c = t.cos();
        [p.cos() * c, p.sin() * c, -t.sin()]
    }

    pub fn laplacian(&self, x: [f64; 3], t: f64) -> [f64; 3] {
        let (p, grad2, lap) = self.phase(x);
        let s = t.sin();
        let (sp, cp) = p.sin_cos();
        [
            s * (-cp * grad2 - sp * lap),
            s * (-sp * grad2 + cp * lap),
            0.0,
        ]
    }

    /// `g = ∂t m + m×Δm + α m×(m×Δm)`.
    pub fn source(&self, x: [f64; 3], t: f64) -> [f64; 3] {
        let m = self.exact(x, t);
        let dm = self.time_derivative(x, t);
        let l = self.laplacian(x, t);
        let c = cross(m, l);
        let cc = cross(m, c);
        std::array::from_fn(|a| dm[a] + c[a] + self.alpha * cc[a])
    }

    /// Unit domain discretized with `n` cells per active axis.
    pub fn grid(&self, n: usize) -> Result<Grid> {
        match self.dimension {
            Dimension::One => Grid::line(n, 1.0),
            Dimension::Three => Grid::new([n; 3], [1.0; 3]),
        }
    }

    pub fn sample(&self, grid: Grid, t: f64) -> Result<VectorField> {
        VectorField::sample_function(grid, |x| self.exact(x, t))
    }
}

struct CaseSource(ManufacturedCase);

impl SourceHook for CaseSource {
    fn eval(&self, x: [f64; 3], t: f64) -> [f64; 3] {
        self.0.source(x, t)
    }
}

#[inline]
fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Néel-wall profile `(tanh ℓ, sech ℓ, 0)`, `ℓ = (0.5 - x) / (2η)`.
pub fn neel_wall(grid: Grid, eta: f64) -> Result<VectorField> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "wall width must be positive, got {eta}"
        )));
    }
    VectorField::sample_function(grid, |x| {
        let l = (0.5 - x[0]) / (2.0 * eta);
        [l.tanh(), 1.0 / l.cosh(), 0.0]
    })
}

/// Least-squares slope of `log(error)` against `log(step)`.
pub fn observed_order(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InvalidParameter(
            "need at least two points to fit an order".into(),
        ));
    }
    if let Some(p) = points.iter().find(|p| !(p.0 > 0.0 && p.1 > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "step sizes and errors must be positive, got ({}, {})",
            p.0, p.1
        )));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter(
            "step sizes must not all be equal".into(),
        ));
    }
    Ok(sxy / sxx)
}

/// Test problem for convergence and stability runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "problem", rename_all = "kebab-case")]
pub enum Problem {
    /// Manufactured solution with its source term on the unit interval or cube.
    Manufactured(ManufacturedCase),
    /// Source-free exchange-only LL on `(0,1)×(0,0.2)` from a Néel wall,
    /// measured against a fine BDF2 reference.
    NeelWall {
        alpha: f64,
        /// Wall width; defaults to the mesh spacing.
        #[serde(default)]
        eta: Option<f64>,
        /// Steps of the reference run over the whole interval.
        #[serde(default = "default_reference_steps")]
        reference_steps: usize,
        /// Relative Krylov tolerance of the reference run. Per-step solver
        /// residuals accumulate over the reference steps, so this is tighter
        /// than the default.
        #[serde(default = "default_reference_tol")]
        reference_tol: f64,
    },
}

fn default_reference_steps() -> usize {
    5000
}

fn default_reference_tol() -> f64 {
    1e-14
}

impl Problem {
    pub fn alpha(&self) -> f64 {
        match self {
            Problem::Manufactured(c) => c.alpha,
            Problem::NeelWall { alpha, .. } => *alpha,
        }
    }

    /// Grid with `n` cells per unit length along x.
    pub fn grid(&self, n: usize) -> Result<Grid> {
        match self {
            Problem::Manufactured(c) => c.grid(n),
            Problem::NeelWall { .. } => {
                let ny = ((n as f64) * 0.2).round().max(1.0) as usize;
                Grid::new([n, ny, 1], [1.0, 0.2, 1.0])
            }
        }
    }

    fn initial(&self, grid: Grid) -> Result<VectorField> {
        match self {
            Problem::Manufactured(c) => c.sample(grid, 0.0),
            Problem::NeelWall { eta, .. } => neel_wall(grid, eta.unwrap_or(grid.spacing()[0])),
        }
    }
}

/// Outcome of one fixed-step integration.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub m: VectorField,
    pub steps: usize,
    pub dt: f64,
    /// Largest `||m| - 1|` observed after any step.
    pub max_unit_deviation: f64,
    pub solves: usize,
}

/// Integrates `problem` with `steps` steps of size `t_final / steps`.
pub fn run_problem(
    scheme: SchemeKind,
    problem: &Problem,
    grid: Grid,
    t_final: f64,
    steps: usize,
    options: StepOptions,
) -> Result<RunOutcome> {
    if steps == 0 || !(t_final.is_finite() && t_final > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need a positive interval and step count, got T={t_final}, steps={steps}"
        )));
    }
    let alpha = problem.alpha();
    let params = MaterialParams::exchange_only(1.0, alpha);
    params.validate()?;
    let plan = SpectralPlan::new(grid);
    let source = match problem {
        Problem::Manufactured(c) => Some(CaseSource(*c)),
        Problem::NeelWall { .. } => None,
    };
    let ctx = StepContext::new(&params, &plan)
        .with_source(source.as_ref().map(|s| s as &dyn SourceHook))
        .with_options(options);
    let dt = t_final / steps as f64;
    let mut dev: f64 = 0.0;
    let m0 = problem.initial(grid)?;
    let state = schemes::integrate(scheme, m0, &ctx, dt, steps, |s: &SchemeState| {
        dev = dev.max(s.m_curr.max_unit_deviation());
        Ok(())
    })?;
    Ok(RunOutcome {
        m: state.m_curr,
        steps,
        dt,
        max_unit_deviation: dev,
        solves: ctx.solve_count(),
    })
}

/// Which discretization parameter a study refines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "refine", rename_all = "kebab-case")]
pub enum Refinement {
    /// Fixed mesh, step counts over `[0, T]`.
    Time { cells: usize, steps: Vec<usize> },
    /// Fixed step size, cells per unit length.
    Space { cells: Vec<usize>, dt: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSpec {
    pub scheme: SchemeKind,
    #[serde(flatten)]
    pub problem: Problem,
    pub t_final: f64,
    #[serde(flatten)]
    pub refinement: Refinement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    /// `Δt` for time studies, `h` for space studies.
    pub step: f64,
    pub dt: f64,
    pub h: f64,
    pub steps: usize,
    pub error_inf: f64,
    pub error_l2: f64,
    pub max_unit_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub scheme: SchemeKind,
    pub variable: String,
    pub points: Vec<ConvergencePoint>,
    pub order_inf: f64,
    pub order_l2: f64,
}

impl ConvergenceReport {
    pub fn order(&self, kind: NormKind) -> f64 {
        match kind {
            NormKind::Inf => self.order_inf,
            NormKind::L2 => self.order_l2,
        }
    }
}

/// Runs every configuration of `spec` (in parallel) and fits the orders.
pub fn run_convergence(spec: &ConvergenceSpec) -> Result<ConvergenceReport> {
    if !(spec.t_final.is_finite() && spec.t_final > 0.0) {
        return Err(Error::InvalidParameter(
            "terminal time must be positive".into(),
        ));
    }
    let opts = StepOptions::default();
    let runs: Vec<(usize, usize)> = match &spec.refinement {
        Refinement::Time { cells, steps } => steps.iter().map(|&s| (*cells, s)).collect(),
        Refinement::Space { cells, dt } => {
            let steps = (spec.t_final / dt).round() as usize;
            if steps == 0 || ((steps as f64) * dt - spec.t_final).abs() > 1e-9 * spec.t_final {
                return Err(Error::InvalidParameter(format!(
                    "dt {dt} does not divide T = {}",
                    spec.t_final
                )));
            }
            cells.iter().map(|&n| (n, steps)).collect()
        }
    };
    if runs.len() < 3 {
        return Err(Error::InvalidParameter(
            "a convergence study needs at least three runs".into(),
        ));
    }

    // Reference trajectories for the source-free problem, one per mesh.
    let reference = |grid: Grid| -> Result<Option<VectorField>> {
        match spec.problem {
            Problem::Manufactured(c) => Ok(Some(c.sample(grid, spec.t_final)?)),
            Problem::NeelWall {
                reference_steps,
                reference_tol,
                ..
            } => run_problem(
                SchemeKind::Bdf2Ref,
                &spec.problem,
                grid,
                spec.t_final,
                reference_steps,
                StepOptions {
                    krylov: KrylovOptions {
                        tol: reference_tol,
                        ..opts.krylov
                    },
                    ..opts
                },
            )
            .map(|r| Some(r.m)),
        }
    };

    let points: Vec<ConvergencePoint> = runs
        .par_iter()
        .map(|&(cells, steps)| {
            let grid = spec.problem.grid(cells)?;
            let out = run_problem(spec.scheme, &spec.problem, grid, spec.t_final, steps, opts)?;
            let exact = reference(grid)?.expect("reference available");
            let err = out.m.difference(&exact)?;
            let h = grid.spacing()[0];
            Ok(ConvergencePoint {
                step: match spec.refinement {
                    Refinement::Time { .. } => out.dt,
                    Refinement::Space { .. } => h,
                },
                dt: out.dt,
                h,
                steps,
                error_inf: err.norm(NormKind::Inf),
                error_l2: err.norm(NormKind::L2),
                max_unit_deviation: out.max_unit_deviation,
            })
        })
        .collect::<Result<_>>()?;

    let fit = |f: fn(&ConvergencePoint) -> f64| {
        observed_order(&points.iter().map(|p| (p.step, f(p))).collect::<Vec<_>>())
    };
    Ok(ConvergenceReport {
        scheme: spec.scheme,
        variable: match spec.refinement {
            Refinement::Time { .. } => "dt".into(),
            Refinement::Space { .. } => "h".into(),
        },
        order_inf: fit(|p| p.error_inf)?,
        order_l2: fit(|p| p.error_l2)?,
        points,
    })
}

/// Errors of `scheme` at each step count against the same scheme run with
/// `reference_factor` times the finest step count. Returns `(Δt, inf error)`.
pub fn self_convergence(
    scheme: SchemeKind,
    problem: &Problem,
    cells: usize,
    t_final: f64,
    steps: &[usize],
    reference_factor: usize,
) -> Result<Vec<(f64, f64)>> {
    let finest = steps
        .iter()
        .copied()
        .max()
        .ok_or_else(|| Error::InvalidParameter("no step counts given".into()))?;
    let grid = problem.grid(cells)?;
    let opts = StepOptions::default();
    let reference = run_problem(
        scheme,
        problem,
        grid,
        t_final,
        finest * reference_factor,
        opts,
    )?;
    steps
        .par_iter()
        .map(|&n| {
            let out = run_problem(scheme, problem, grid, t_final, n, opts)?;
            Ok((out.dt, out.m.difference(&reference.m)?.norm(NormKind::Inf)))
        })
        .collect()
}

/// Settings of the stability classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityCriteria {
    /// Final inf-norm error above which a run counts as unstable.
    pub error_cap: f64,
    /// Largest tolerated `error(Δt) / error(Δt/2)`.
    pub growth_factor: f64,
}

impl Default for StabilityCriteria {
    fn default() -> Self {
        Self {
            error_cap: 0.5,
            growth_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Classification {
    Stable { error: f64, halved_error: f64 },
    BlowUp { message: String },
    ErrorCap { error: f64 },
    ErrorGrowth { error: f64, halved_error: f64 },
}

impl Classification {
    pub fn is_stable(&self) -> bool {
        matches!(self, Classification::Stable { .. })
    }
}

fn final_error(
    scheme: SchemeKind,
    case: &ManufacturedCase,
    grid: Grid,
    t_final: f64,
    steps: usize,
) -> Result<std::result::Result<f64, String>> {
    let problem = Problem::Manufactured(*case);
    match run_problem(
        scheme,
        &problem,
        grid,
        t_final,
        steps,
        StepOptions::default(),
    ) {
        Ok(out) => {
            let exact = case.sample(grid, t_final)?;
            let e = out.m.difference(&exact)?.norm(NormKind::Inf);
            if e.is_finite() {
                Ok(Ok(e))
            } else {
                Ok(Err("non-finite error".into()))
            }
        }
        Err(e) if e.is_blow_up() => Ok(Err(e.to_string())),
        Err(e) => Err(e),
    }
}

/// Runs `case` to `t_final` with `steps` steps and classifies the outcome:
/// unstable on blow-up, on a final error above the cap, or when halving
/// the step reduces the error by more than `growth_factor`.
pub fn classify(
    scheme: SchemeKind,
    case: &ManufacturedCase,
    cells: usize,
    t_final: f64,
    steps: usize,
    criteria: &StabilityCriteria,
) -> Result<Classification> {
    let grid = case.grid(cells)?;
    let (coarse, fine) = rayon::join(
        || final_error(scheme, case, grid, t_final, steps),
        || final_error(scheme, case, grid, t_final, 2 * steps),
    );
    let error = match coarse? {
        Ok(e) => e,
        Err(message) => return Ok(Classification::BlowUp { message }),
    };
    if error > criteria.error_cap {
        return Ok(Classification::ErrorCap { error });
    }
    let halved_error = match fine? {
        Ok(e) => e,
        // the finer run failing means the coarse result cannot be trusted either
        Err(message) => return Ok(Classification::BlowUp { message }),
    };
    if error > criteria.growth_factor * halved_error {
        return Ok(Classification::ErrorGrowth {
            error,
            halved_error,
        });
    }
    Ok(Classification::Stable {
        error,
        halved_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityMesh {
    /// Cells on the unit interval.
    pub cells: usize,
    /// Known-stable step size.
    pub dt_stable: f64,
    /// Known-unstable step size.
    pub dt_unstable: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySpec {
    pub scheme: SchemeKind,
    pub alpha: f64,
    pub t_final: f64,
    pub meshes: Vec<StabilityMesh>,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default)]
    pub criteria: StabilityCriteria,
}

fn default_rounds() -> usize {
    6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub h: f64,
    /// Largest step classified stable.
    pub dt_stable: f64,
    /// Smallest step classified unstable.
    pub dt_unstable: f64,
    /// Geometric midpoint of the final bracket.
    pub dt_threshold: f64,
    pub evidence_stable: Classification,
    pub evidence_unstable: Classification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub scheme: SchemeKind,
    pub rows: Vec<StabilityRow>,
}

fn steps_for(t_final: f64, dt: f64) -> usize {
    (t_final / dt).ceil().max(1.0) as usize
}

/// Bisects (geometrically) between a stable and an unstable step size on
/// each mesh of the 1D manufactured problem.
pub fn stability_scan(spec: &StabilitySpec) -> Result<StabilityReport> {
    let case = ManufacturedCase::new(Dimension::One, spec.alpha);
    let rounds = spec.rounds.max(6);
    let rows = spec
        .meshes
        .iter()
        .map(|mesh| {
            let h = 1.0 / mesh.cells as f64;
            if !(mesh.dt_stable > 0.0 && mesh.dt_stable < mesh.dt_unstable) {
                return Err(Error::InvalidBracket(format!(
                    "need 0 < dt_stable < dt_unstable, got {} and {}",
                    mesh.dt_stable, mesh.dt_unstable
                )));
            }
            let check = |dt: f64| -> Result<(f64, Classification)> {
                let steps = steps_for(spec.t_final, dt);
                let c = classify(
                    spec.scheme,
                    &case,
                    mesh.cells,
                    spec.t_final,
                    steps,
                    &spec.criteria,
                )?;
                Ok((spec.t_final / steps as f64, c))
            };
            let (mut lo, mut lo_ev) = check(mesh.dt_stable)?;
            if !lo_ev.is_stable() {
                return Err(Error::InvalidBracket(format!(
                    "h = {h}: lower end {} is not stable ({lo_ev:?})",
                    mesh.dt_stable
                )));
            }
            let (mut hi, mut hi_ev) = check(mesh.dt_unstable)?;
            if hi_ev.is_stable() {
                return Err(Error::InvalidBracket(format!(
                    "h = {h}: upper end {} is not unstable",
                    mesh.dt_unstable
                )));
            }
            for _ in 0..rounds {
                let mid = (lo * hi).sqrt();
                let (dt, ev) = check(mid)?;
                if dt <= lo || dt >= hi {
                    break;
                }
                if ev.is_stable() {
                    lo = dt;
                    lo_ev = ev;
                } else {
                    hi = dt;
                    hi_ev = ev;
                }
            }
            log::info!("{} h={h}: stable {lo:e}, unstable {hi:e}", spec.scheme);
            Ok(StabilityRow {
                h,
                dt_stable: lo,
                dt_unstable: hi,
                dt_threshold: (lo * hi).sqrt(),
                evidence_stable: lo_ev,
                evidence_unstable: hi_ev,
            })
        })
        .collect::<Result<_>>()?;
    Ok(StabilityReport {
        scheme: spec.scheme,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cases() -> [ManufacturedCase; 2] {
        [
            ManufacturedCase::new(Dimension::One, 0.01),
            ManufacturedCase::new(Dimension::Three, 0.1),
        ]
    }

    /// Sixth-order central second difference along `axis`.
    fn fd_second(f: impl Fn([f64; 3]) -> [f64; 3], x: [f64; 3], axis: usize, h: f64) -> [f64; 3] {
        const W: [(f64, f64); 7] = [
            (-3.0, 1.0 / 90.0),
            (-2.0, -3.0 / 20.0),
            (-1.0, 3.0 / 2.0),
            (0.0, -49.0 / 18.0),
            (1.0, 3.0 / 2.0),
            (2.0, -3.0 / 20.0),
            (3.0, 1.0 / 90.0),
        ];
        let mut out = [0.0; 3];
        for (k, w) in W {
            let mut y = x;
            y[axis] += k * h;
            let v = f(y);
            for a in 0..3 {
                out[a] += w * v[a] / (h * h);
            }
        }
        out
    }

    #[test]
    fn closed_forms_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for case in cases() {
            let axes = match case.dimension {
                Dimension::One => 1,
                Dimension::Three => 3,
            };
            for _ in 0..200 {
                let x = [
                    rng.gen_range(0.05..0.95),
                    rng.gen_range(0.05..0.95),
                    rng.gen_range(0.05..0.95),
                ];
                let t = rng.gen_range(0.0..4.0);
                let f = |y: [f64; 3]| case.exact(y, t);
                let mut lap = [0.0; 3];
                for axis in 0..axes {
                    let d = fd_second(f, x, axis, 1e-2);
                    for a in 0..3 {
                        lap[a] += d[a];
                    }
                }
                let exact = case.laplacian(x, t);
                for a in 0..3 {
                    assert!((lap[a] - exact[a]).abs() < 1e-8, "{lap:?} vs {exact:?}");
                }
                let dt = 1e-4;
                let fwd = case.exact(x, t + dt);
                let bwd = case.exact(x, t - dt);
                let td = case.time_derivative(x, t);
                for a in 0..3 {
                    assert!(((fwd[a] - bwd[a]) / (2.0 * dt) - td[a]).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn exact_solution_special_values() {
        let c = ManufacturedCase::new(Dimension::One, 0.01);
        for x in [0.0, 0.3, 1.0] {
            assert_eq!(c.exact([x, 0.5, 0.5], 0.0), [0.0, 0.0, 1.0]);
            assert_eq!(c.laplacian([x, 0.5, 0.5], 0.0), [0.0, 0.0, 0.0]);
        }
        let t: f64 = 0.7;
        assert_eq!(c.exact([1.0, 0.0, 0.0], t), [t.sin(), 0.0, t.cos()]);
        // at t = 0 the source reduces to the time derivative
        let x = [0.37, 0.0, 0.0];
        let p = bump(x[0])[0];
        let g = c.source(x, 0.0);
        assert_relative_eq!(g[0], p.cos(), epsilon = 1e-15);
        assert_relative_eq!(g[1], p.sin(), epsilon = 1e-15);
        assert_eq!(g[2], 0.0);
    }

    #[test]
    fn unit_length_and_neumann_boundaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for case in cases() {
            for _ in 0..100 {
                let x = [rng.gen(), rng.gen(), rng.gen()];
                let m = case.exact(x, rng.gen_range(0.0..5.0));
                let n = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
                assert!((n - 1.0).abs() < 1e-14);
            }
        }
        for end in [0.0, 1.0] {
            let [_, d, _] = bump(end);
            assert_eq!(d, 0.0);
        }
    }

    #[test]
    fn source_closes_the_equation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for case in cases() {
            for _ in 0..1000 {
                let x = [rng.gen(), rng.gen(), rng.gen()];
                let t = rng.gen_range(0.0..4.0);
                let m = case.exact(x, t);
                let l = case.laplacian(x, t);
                let g = case.source(x, t);
                let dm = case.time_derivative(x, t);
                let c = cross(m, l);
                let cc = cross(m, c);
                for a in 0..3 {
                    let r = dm[a] - (-c[a] - case.alpha * cc[a] + g[a]);
                    assert!(r.abs() <= 1e-12);
                }
            }
        }
        let c0 = ManufacturedCase::new(Dimension::One, 0.0);
        let x = [0.2, 0.0, 0.0];
        let g = c0.source(x, 1.1);
        let c = cross(c0.exact(x, 1.1), c0.laplacian(x, 1.1));
        let dm = c0.time_derivative(x, 1.1);
        for a in 0..3 {
            assert_relative_eq!(g[a], dm[a] + c[a], epsilon = 1e-15);
        }
    }

    #[test]
    fn observed_order_examples() {
        assert_relative_eq!(observed_order(&[(2.0, 4.0), (1.0, 1.0)]).unwrap(), 2.0);
        assert_relative_eq!(observed_order(&[(2.0, 2.0), (1.0, 1.0)]).unwrap(), 1.0);
        let t = 0.3;
        let row = [1.5771e-4, 7.4962e-5, 3.9885e-5, 2.3881e-5];
        let pts: Vec<_> = [200.0, 300.0, 400.0, 500.0]
            .iter()
            .zip(row)
            .map(|(d, e)| (t / d, e))
            .collect();
        let p = observed_order(&pts).unwrap();
        assert!((p - 2.06).abs() <= 0.02, "{p}");
        assert!(observed_order(&[(1.0, 0.0), (2.0, 1.0)]).is_err());
        assert!(observed_order(&[(1.0, 1.0)]).is_err());
    }

    #[test]
    fn observed_order_is_scale_invariant() {
        let pts = [(0.1, 3e-3), (0.05, 9e-4), (0.02, 1.7e-4)];
        let base = observed_order(&pts).unwrap();
        let scaled: Vec<_> = pts.iter().map(|p| (p.0, p.1 * 37.5)).collect();
        assert!((observed_order(&scaled).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn neel_wall_profile() {
        let grid = Grid::new([10, 2, 1], [1.0, 0.2, 1.0]).unwrap();
        let m = neel_wall(grid, 0.1).unwrap();
        assert!(m.max_unit_deviation() < 1e-15);
        // left of the wall m1 > 0, right of it m1 < 0, symmetric about x = 0.5
        assert!(m.at(0)[0] > 0.0 && m.at(9)[0] < 0.0);
        assert_relative_eq!(m.at(0)[0], -m.at(9)[0], epsilon = 1e-15);
    }

    #[test]
    fn problem_spec_serde() {
        let spec = ConvergenceSpec {
            scheme: SchemeKind::SchemeA,
            problem: Problem::Manufactured(ManufacturedCase::new(Dimension::One, 0.01)),
            t_final: 0.3,
            refinement: Refinement::Time {
                cells: 100,
                steps: vec![10, 20, 40],
            },
        };
        let s = serde_json::to_string(&spec).unwrap();
        let back: ConvergenceSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn gspm1_is_first_order_in_time() {
        let spec = ConvergenceSpec {
            scheme: SchemeKind::Gspm1,
            problem: Problem::Manufactured(ManufacturedCase::new(Dimension::One, 0.01)),
            t_final: 0.3,
            refinement: Refinement::Time {
                cells: 200,
                steps: vec![20, 40, 80],
            },
        };
        let r = run_convergence(&spec).unwrap();
        assert!((0.8..1.3).contains(&r.order_inf), "{r:?}");
    }

    #[test]
    fn self_convergence_orders() {
        let problem = Problem::Manufactured(ManufacturedCase::new(Dimension::One, 0.1));
        // si2 treats the cross product explicitly and needs Δt/h² below ~0.15
        for (scheme, lo, hi) in [
            (SchemeKind::Gspm1, 0.8, 1.3),
            (SchemeKind::Si2, 1.8, 2.3),
            (SchemeKind::SchemeA, 1.8, 2.3),
            (SchemeKind::SchemeB, 1.8, 2.3),
            (SchemeKind::Bdf2Ref, 1.8, 2.3),
        ] {
            let pts = self_convergence(scheme, &problem, 10, 0.3, &[200, 400, 800], 16).unwrap();
            let p = observed_order(&pts).unwrap();
            assert!((lo..hi).contains(&p), "{scheme}: {p} {pts:?}");
        }
    }

    #[test]
    fn invalid_brackets_are_rejected() {
        let spec = StabilitySpec {
            scheme: SchemeKind::SchemeA,
            alpha: 1.0,
            t_final: 0.1,
            meshes: vec![StabilityMesh {
                cells: 10,
                dt_stable: 1e-3,
                dt_unstable: 1e-2,
            }],
            rounds: 6,
            criteria: StabilityCriteria::default(),
        };
        assert!(matches!(
            stability_scan(&spec),
            Err(Error::InvalidBracket(_))
        ));
        let mut bad = spec.clone();
        bad.meshes[0].dt_unstable = 1e-4;
        assert!(matches!(
            stability_scan(&bad),
            Err(Error::InvalidBracket(_))
        ));
    }
}
