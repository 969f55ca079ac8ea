//! Time integrators for the Landau-Lifshitz equation
//! `∂t m = -m × h - α m × (m × h)`, `h = εΔm + f(m)`.
//!
//! Every scheme approximates `Δt·h` by `g - m̂` where `g` solves a linear
//! system with the exchange operator, then applies a pointwise
//! cross-product update and projects back onto the unit sphere:
//!
//! | scheme | operator | time levels | solves/step |
//! |--------|----------|-------------|-------------|
//! | [`gspm1_step`] | `I - εΔtΔ_h` | 1 | 5 |
//! | [`si2_step`] | `I - εΔtΔ_h + ε²Δt²Δ_h²` | 2 | 3 |
//! | [`scheme_a_step`] | same | 2 | 5 |
//! | [`scheme_b_step`] | same, lagged `g` | 2 | 3 |
//! | [`bdf2_reference_step`] | coupled Krylov solve | 2 | - |
//!
//! The update rows use `m̂×(m̂×g) = (m̂·g)m̂ - |m̂|²g` with `|m̂| ≠ 1` kept.

mod krylov;

pub use krylov::{gmres, KrylovOptions, KrylovOutcome};

use crate::linsolve::{OperatorCoefficients, SpectralPlan};
use crate::mesh::{laplacian_into, ScalarField, VectorField};
use crate::physics::{local_field, DemagKernel, MaterialParams};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicUsize, Ordering};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    Gspm1,
    Si2,
    SchemeA,
    SchemeB,
    Bdf2Ref,
}

impl SchemeKind {
    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::Gspm1 => "gspm1",
            SchemeKind::Si2 => "si2",
            SchemeKind::SchemeA => "scheme-a",
            SchemeKind::SchemeB => "scheme-b",
            SchemeKind::Bdf2Ref => "bdf2-ref",
        }
    }

    pub fn is_two_step(&self) -> bool {
        !matches!(self, SchemeKind::Gspm1)
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gspm1" => Ok(SchemeKind::Gspm1),
            "si2" => Ok(SchemeKind::Si2),
            "scheme-a" => Ok(SchemeKind::SchemeA),
            "scheme-b" => Ok(SchemeKind::SchemeB),
            "bdf2-ref" => Ok(SchemeKind::Bdf2Ref),
            other => Err(format!("unknown scheme '{other}'")),
        }
    }
}

/// Space-time source `g(x, t)` added to the right-hand side of the LL equation.
pub trait SourceHook: Sync {
    fn eval(&self, x: [f64; 3], t: f64) -> [f64; 3];
}

impl<F> SourceHook for F
where
    F: Fn([f64; 3], f64) -> [f64; 3] + Sync,
{
    fn eval(&self, x: [f64; 3], t: f64) -> [f64; 3] {
        self(x, t)
    }
}

/// The time levels a two-step method advances.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeState {
    /// `m^{n-1}`; absent before the first step.
    pub m_prev: Option<VectorField>,
    /// `m^n`.
    pub m_curr: VectorField,
    /// Scheme B's lagged `g^n`.
    pub g_prev: Option<[ScalarField; 3]>,
    pub t: f64,
    pub step_index: usize,
}

impl SchemeState {
    pub fn initial(m0: VectorField) -> Self {
        Self {
            m_prev: None,
            m_curr: m0,
            g_prev: None,
            t: 0.0,
            step_index: 0,
        }
    }

    fn advanced(self, m_next: VectorField, dt: f64) -> Self {
        Self {
            m_prev: Some(self.m_curr),
            m_curr: m_next,
            g_prev: None,
            t: self.t + dt,
            step_index: self.step_index + 1,
        }
    }

    fn levels(&self) -> Result<(&VectorField, &VectorField)> {
        let prev = self.m_prev.as_ref().ok_or_else(|| {
            Error::InvalidParameter("two-step scheme needs m^{n-1}; bootstrap first".into())
        })?;
        if prev.grid() != self.m_curr.grid() {
            return Err(Error::GridMismatch("time levels on different grids".into()));
        }
        Ok((prev, &self.m_curr))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOptions {
    /// Re-evaluate `f(m)` (including the stray field) before every
    /// Gauss-Seidel refresh instead of once per step.
    pub refresh_field_per_stage: bool,
    /// Pre-projection magnitude above which a step is declared unstable.
    pub blowup_threshold: f64,
    pub krylov: KrylovOptions,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            refresh_field_per_stage: false,
            blowup_threshold: 10.0,
            krylov: KrylovOptions::default(),
        }
    }
}

/// Everything a step needs besides the state and `Δt`.
pub struct StepContext<'a> {
    pub params: &'a MaterialParams,
    pub plan: &'a SpectralPlan,
    pub kernel: Option<&'a DemagKernel>,
    pub source: Option<&'a dyn SourceHook>,
    pub options: StepOptions,
    solves: AtomicUsize,
    field_evaluations: AtomicUsize,
    krylov_iterations: AtomicUsize,
}

impl<'a> StepContext<'a> {
    pub fn new(params: &'a MaterialParams, plan: &'a SpectralPlan) -> Self {
        Self {
            params,
            plan,
            kernel: None,
            source: None,
            options: StepOptions::default(),
            solves: AtomicUsize::new(0),
            field_evaluations: AtomicUsize::new(0),
            krylov_iterations: AtomicUsize::new(0),
        }
    }

    pub fn with_kernel(mut self, kernel: Option<&'a DemagKernel>) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn with_source(mut self, source: Option<&'a dyn SourceHook>) -> Self {
        self.source = source;
        self
    }

    pub fn with_options(mut self, options: StepOptions) -> Self {
        self.options = options;
        self
    }

    /// Operator solves performed through this context so far.
    pub fn solve_count(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }

    /// Evaluations of `f(m)` (each includes one stray-field convolution when enabled).
    pub fn field_evaluations(&self) -> usize {
        self.field_evaluations.load(Ordering::Relaxed)
    }

    pub fn krylov_iterations(&self) -> usize {
        self.krylov_iterations.load(Ordering::Relaxed)
    }

    pub fn reset_counters(&self) {
        self.solves.store(0, Ordering::Relaxed);
        self.field_evaluations.store(0, Ordering::Relaxed);
        self.krylov_iterations.store(0, Ordering::Relaxed);
    }

    fn solve(&self, coeffs: OperatorCoefficients, rhs: &[f64]) -> Vec<f64> {
        self.solves.fetch_add(1, Ordering::Relaxed);
        self.plan.solve_slice(coeffs, rhs)
    }

    fn local_field(&self, m: &VectorField) -> Result<Option<VectorField>> {
        if self.params.has_local_field() {
            self.field_evaluations.fetch_add(1, Ordering::Relaxed);
            local_field(self.params, self.kernel, m).map(Some)
        } else {
            Ok(None)
        }
    }

    fn sample_source(&self, t: f64) -> Option<[Vec<f64>; 3]> {
        let src = self.source?;
        let grid = self.plan.grid();
        let mut out: [Vec<f64>; 3] = std::array::from_fn(|_| Vec::with_capacity(grid.len()));
        for idx in 0..grid.len() {
            let v = src.eval(grid.center(grid.cell(idx)), t);
            for a in 0..3 {
                out[a].push(v[a]);
            }
        }
        Some(out)
    }

    fn check_grid(&self, m: &VectorField) -> Result<()> {
        if m.grid() != self.plan.grid() {
            return Err(Error::GridMismatch(
                "state not on the spectral plan grid".into(),
            ));
        }
        Ok(())
    }

    /// `rhs_i = m_i + Δt f_i` then one operator solve.
    fn solve_component(
        &self,
        coeffs: OperatorCoefficients,
        m: &[f64],
        field: Option<&VectorField>,
        axis: usize,
        dt: f64,
    ) -> Vec<f64> {
        match field {
            Some(f) => {
                let rhs: Vec<f64> = m
                    .iter()
                    .zip(f.component(axis))
                    .map(|(x, y)| x + dt * y)
                    .collect();
                self.solve(coeffs, &rhs)
            }
            None => self.solve(coeffs, m),
        }
    }
}

/// `m̂ = 2 m_curr - m_prev`. The result is not unit length in general.
pub fn extrapolate(m_prev: &VectorField, m_curr: &VectorField) -> Result<VectorField> {
    if m_prev.grid() != m_curr.grid() {
        return Err(Error::GridMismatch("extrapolation of fields".into()));
    }
    let comps = std::array::from_fn(|a| {
        m_curr
            .component(a)
            .iter()
            .zip(m_prev.component(a))
            .map(|(c, p)| 2.0 * c - p)
            .collect()
    });
    Ok(VectorField::from_raw(*m_curr.grid(), comps))
}

const MIN_PROJECTION_MAGNITUDE: f64 = 1e-12;

/// Pointwise normalization onto the unit sphere.
pub fn project(m: &VectorField) -> Result<VectorField> {
    project_components(m.grid(), m.components().clone(), f64::INFINITY)
}

fn project_components(
    grid: &crate::Grid,
    mut comps: [Vec<f64>; 3],
    blowup: f64,
) -> Result<VectorField> {
    let [x, y, z] = &mut comps;
    for idx in 0..grid.len() {
        let (a, b, c) = (x[idx], y[idx], z[idx]);
        let mag = (a * a + b * b + c * c).sqrt();
        if !mag.is_finite() {
            return Err(Error::NonFinite {
                cell: grid.cell(idx),
            });
        }
        if mag > blowup {
            return Err(Error::BlowUp {
                cell: grid.cell(idx),
                stage: "projection",
                magnitude: mag,
            });
        }
        if mag < MIN_PROJECTION_MAGNITUDE {
            return Err(Error::DegenerateProjection {
                cell: grid.cell(idx),
                magnitude: mag,
            });
        }
        x[idx] = a / mag;
        y[idx] = b / mag;
        z[idx] = c / mag;
    }
    Ok(VectorField::from_raw(*grid, comps))
}

/// Which components refresh `m̂` and `g` after their row is updated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Refresh {
    /// Jacobi-style: every row sees the initial `m̂` and `g`.
    None,
    /// Rows 1 and 2 refresh (Scheme A, first-order GSPM).
    FirstTwo,
    /// Every row refreshes, the last one for the next step (Scheme B).
    All,
}

impl Refresh {
    fn after_row(&self, row: usize) -> bool {
        match self {
            Refresh::None => false,
            Refresh::FirstTwo => row < 2,
            Refresh::All => true,
        }
    }
}

enum Levels<'s> {
    /// `m* = m^n + ...`
    Euler(&'s VectorField),
    /// `(3/2) m* = 2m^n - (1/2)m^{n-1} + ...`
    Bdf2(&'s VectorField, &'s VectorField),
}

struct Sweep<'s, 'c> {
    ctx: &'s StepContext<'c>,
    coeffs: OperatorCoefficients,
    levels: Levels<'s>,
    refresh: Refresh,
    dt: f64,
    /// `f` at the start of the step (or refreshed per stage).
    field: Option<VectorField>,
    source: Option<[Vec<f64>; 3]>,
}

type Components = [Vec<f64>; 3];

impl Sweep<'_, '_> {
    /// Runs the three component rows; returns the unprojected `m*` and the final `g`.
    fn run(
        mut self,
        mut mhat: [Vec<f64>; 3],
        mut g: [Vec<f64>; 3],
    ) -> Result<(Components, Components)> {
        let alpha = self.ctx.params.alpha;
        let dt = self.dt;
        let grid = *self.ctx.plan.grid();
        let n = grid.len();
        let mut mstar: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; n]);

        for row in 0..3 {
            let (j, k) = ((row + 1) % 3, (row + 2) % 3);
            let out = &mut mstar[row];
            for idx in 0..n {
                let mh = [mhat[0][idx], mhat[1][idx], mhat[2][idx]];
                let gv = [g[0][idx], g[1][idx], g[2][idx]];
                let cross = mh[j] * gv[k] - mh[k] * gv[j];
                let dot = mh[0] * gv[0] + mh[1] * gv[1] + mh[2] * gv[2];
                let norm2 = mh[0] * mh[0] + mh[1] * mh[1] + mh[2] * mh[2];
                let mut rhs = -cross - alpha * dot * mh[row] + alpha * norm2 * gv[row];
                if let Some(s) = &self.source {
                    rhs += dt * s[row][idx];
                }
                out[idx] = match self.levels {
                    Levels::Euler(curr) => curr.component(row)[idx] + rhs,
                    Levels::Bdf2(prev, curr) => {
                        (2.0 * curr.component(row)[idx] - 0.5 * prev.component(row)[idx] + rhs)
                            / 1.5
                    }
                };
            }

            if self.refresh.after_row(row) {
                mhat[row] = match self.levels {
                    Levels::Euler(_) => out.clone(),
                    Levels::Bdf2(_, curr) => out
                        .iter()
                        .zip(curr.component(row))
                        .map(|(s, c)| 2.0 * s - c)
                        .collect(),
                };
                if self.ctx.options.refresh_field_per_stage && self.field.is_some() {
                    let current = VectorField::from_raw(grid, mhat.clone());
                    self.field = self.ctx.local_field(&current)?;
                }
                g[row] =
                    self.ctx
                        .solve_component(self.coeffs, &mhat[row], self.field.as_ref(), row, dt);
            }
        }
        Ok((mstar, g))
    }
}

fn finish(ctx: &StepContext<'_>, mstar: [Vec<f64>; 3], stage: &'static str) -> Result<VectorField> {
    let grid = *ctx.plan.grid();
    project_components(&grid, mstar, ctx.options.blowup_threshold).map_err(|e| match e {
        Error::BlowUp {
            cell, magnitude, ..
        } => Error::BlowUp {
            cell,
            stage,
            magnitude,
        },
        other => other,
    })
}

fn initial_g(
    ctx: &StepContext<'_>,
    coeffs: OperatorCoefficients,
    base: &VectorField,
    field: Option<&VectorField>,
    dt: f64,
) -> [Vec<f64>; 3] {
    std::array::from_fn(|a| ctx.solve_component(coeffs, base.component(a), field, a, dt))
}

/// One first-order GSPM step with heat solves and Gauss-Seidel refresh of
/// `g1`, `g2`. Uses only `m^n`.
pub fn gspm1_step(state: SchemeState, ctx: &StepContext<'_>, dt: f64) -> Result<SchemeState> {
    ctx.check_grid(&state.m_curr)?;
    let coeffs = OperatorCoefficients::heat(ctx.params.eps, dt)?;
    let curr = &state.m_curr;
    let field = ctx.local_field(curr)?;
    let g = initial_g(ctx, coeffs, curr, field.as_ref(), dt);
    let sweep = Sweep {
        ctx,
        coeffs,
        levels: Levels::Euler(curr),
        refresh: Refresh::FirstTwo,
        dt,
        field,
        source: ctx.sample_source(state.t + dt),
    };
    let (mstar, _) = sweep.run(curr.components().clone(), g)?;
    let next = finish(ctx, mstar, "gspm1")?;
    Ok(state.advanced(next, dt))
}

fn two_step(
    state: SchemeState,
    ctx: &StepContext<'_>,
    dt: f64,
    refresh: Refresh,
    stage: &'static str,
) -> Result<SchemeState> {
    ctx.check_grid(&state.m_curr)?;
    let coeffs = OperatorCoefficients::biharmonic(ctx.params.eps, dt)?;
    let (prev, curr) = state.levels()?;
    let mhat = extrapolate(prev, curr)?;
    let field = ctx.local_field(&mhat)?;
    let g = initial_g(ctx, coeffs, &mhat, field.as_ref(), dt);
    let sweep = Sweep {
        ctx,
        coeffs,
        levels: Levels::Bdf2(prev, curr),
        refresh,
        dt,
        field,
        source: ctx.sample_source(state.t + dt),
    };
    let (mstar, _) = sweep.run(mhat.into_components(), g)?;
    let next = finish(ctx, mstar, stage)?;
    Ok(state.advanced(next, dt))
}

/// Plain second-order step: three biharmonic-type solves from `m̂`, then a
/// Jacobi BDF2 cross-product update and projection.
pub fn si2_step(state: SchemeState, ctx: &StepContext<'_>, dt: f64) -> Result<SchemeState> {
    two_step(state, ctx, dt, Refresh::None, "si2")
}

/// Scheme A: five solves per step with Gauss-Seidel refresh of `m̂1, g1` and `m̂2, g2`.
pub fn scheme_a_step(state: SchemeState, ctx: &StepContext<'_>, dt: f64) -> Result<SchemeState> {
    two_step(state, ctx, dt, Refresh::FirstTwo, "scheme-a")
}

/// Populates Scheme B's lagged `g^0 = L⁻¹(2m¹ - m⁰ (+ Δt f))` from a bootstrapped state.
pub fn scheme_b_init(
    mut state: SchemeState,
    ctx: &StepContext<'_>,
    dt: f64,
) -> Result<SchemeState> {
    ctx.check_grid(&state.m_curr)?;
    let coeffs = OperatorCoefficients::biharmonic(ctx.params.eps, dt)?;
    let (prev, curr) = state.levels()?;
    let mhat = extrapolate(prev, curr)?;
    let field = ctx.local_field(&mhat)?;
    let grid = *mhat.grid();
    let g = initial_g(ctx, coeffs, &mhat, field.as_ref(), dt);
    state.g_prev = Some(g.map(|c| ScalarField::from_raw(grid, c)));
    Ok(state)
}

/// Scheme B: three solves per step, using lagged `g^n` for not-yet-refreshed components.
pub fn scheme_b_step(state: SchemeState, ctx: &StepContext<'_>, dt: f64) -> Result<SchemeState> {
    ctx.check_grid(&state.m_curr)?;
    let coeffs = OperatorCoefficients::biharmonic(ctx.params.eps, dt)?;
    let g_prev = state.g_prev.as_ref().ok_or_else(|| {
        Error::InvalidParameter("scheme B step requires lagged g; call scheme_b_init".into())
    })?;
    let (prev, curr) = state.levels()?;
    let mhat = extrapolate(prev, curr)?;
    let field = ctx.local_field(&mhat)?;
    let g: [Vec<f64>; 3] = std::array::from_fn(|a| g_prev[a].data().to_vec());
    let sweep = Sweep {
        ctx,
        coeffs,
        levels: Levels::Bdf2(prev, curr),
        refresh: Refresh::All,
        dt,
        field,
        source: ctx.sample_source(state.t + dt),
    };
    let (mstar, g_next) = sweep.run(mhat.into_components(), g)?;
    let next = finish(ctx, mstar, "scheme-b")?;
    let grid = *next.grid();
    let mut out = state.advanced(next, dt);
    out.g_prev = Some(g_next.map(|c| ScalarField::from_raw(grid, c)));
    Ok(out)
}

/// `A x = 3/2 x + Δt [m̂ × εΔx + α((m̂·εΔx) m̂ - |m̂|² εΔx)]` on stacked components.
pub(crate) fn apply_coupled_bdf2(
    grid: &crate::Grid,
    mhat: &VectorField,
    eps: f64,
    alpha: f64,
    dt: f64,
    x: &[f64],
    out: &mut [f64],
) {
    let n = grid.len();
    let mut lap = vec![0.0; 3 * n];
    for a in 0..3 {
        laplacian_into(grid, &x[a * n..(a + 1) * n], &mut lap[a * n..(a + 1) * n]);
    }
    for idx in 0..n {
        let mh = mhat.at(idx);
        let l = [eps * lap[idx], eps * lap[n + idx], eps * lap[2 * n + idx]];
        let tt = bdf2_torque(mh, l, alpha);
        for a in 0..3 {
            out[a * n + idx] = 1.5 * x[a * n + idx] + dt * tt[a];
        }
    }
}

/// `m̂ × v + α((m̂·v) m̂ - |m̂|² v)`.
#[inline]
fn bdf2_torque(mh: [f64; 3], v: [f64; 3], alpha: f64) -> [f64; 3] {
    let dot = mh[0] * v[0] + mh[1] * v[1] + mh[2] * v[2];
    let norm2 = mh[0] * mh[0] + mh[1] * mh[1] + mh[2] * mh[2];
    std::array::from_fn(|a| {
        let (j, k) = ((a + 1) % 3, (a + 2) % 3);
        mh[j] * v[k] - mh[k] * v[j] + alpha * (dot * mh[a] - norm2 * v[a])
    })
}

/// Semi-implicit BDF2 projection step: the coupled linear system for
/// `m^{n+1}` is solved by preconditioned GMRES, then projected.
pub fn bdf2_reference_step(
    state: SchemeState,
    ctx: &StepContext<'_>,
    dt: f64,
) -> Result<SchemeState> {
    ctx.check_grid(&state.m_curr)?;
    let grid = *ctx.plan.grid();
    let n = grid.len();
    let (prev, curr) = state.levels()?;
    let mhat = extrapolate(prev, curr)?;
    let field = ctx.local_field(&mhat)?;
    let source = ctx.sample_source(state.t + dt);
    let (eps, alpha) = (ctx.params.eps, ctx.params.alpha);

    let mut b = vec![0.0; 3 * n];
    for idx in 0..n {
        let mh = mhat.at(idx);
        let explicit = match &field {
            Some(f) => bdf2_torque(mh, f.at(idx), alpha),
            None => [0.0; 3],
        };
        for a in 0..3 {
            let mut v =
                2.0 * curr.component(a)[idx] - 0.5 * prev.component(a)[idx] - dt * explicit[a];
            if let Some(s) = &source {
                v += dt * s[a][idx];
            }
            b[a * n + idx] = v;
        }
    }

    let precond_coeffs = OperatorCoefficients::heat(eps, 2.0 * dt / 3.0)?;
    let plan = ctx.plan;
    let precond = |r: &[f64], out: &mut [f64]| {
        for a in 0..3 {
            let u = plan.solve_slice(precond_coeffs, &r[a * n..(a + 1) * n]);
            for (o, v) in out[a * n..(a + 1) * n].iter_mut().zip(u) {
                *o = v * (2.0 / 3.0);
            }
        }
    };
    let apply = |x: &[f64], out: &mut [f64]| {
        apply_coupled_bdf2(&grid, &mhat, eps, alpha, dt, x, out);
    };
    let x0: Vec<f64> = mhat.components().iter().flatten().copied().collect();
    let outcome = gmres(apply, precond, &b, x0, &ctx.options.krylov)?;
    ctx.krylov_iterations
        .fetch_add(outcome.iterations, Ordering::Relaxed);

    let x = outcome.x;
    let comps = std::array::from_fn(|a| x[a * n..(a + 1) * n].to_vec());
    let next = finish(ctx, comps, "bdf2-ref")?;
    Ok(state.advanced(next, dt))
}

/// Advances `state` by one step of `kind`, bootstrapping two-step schemes
/// with a first-order step (and Scheme B's `g^0`) when only `m^n` exists.
pub fn step(
    kind: SchemeKind,
    state: SchemeState,
    ctx: &StepContext<'_>,
    dt: f64,
) -> Result<SchemeState> {
    let step_no = state.step_index + 1;
    let needs_bootstrap = kind.is_two_step() && state.m_prev.is_none();
    let res = if needs_bootstrap {
        gspm1_step(state, ctx, dt).and_then(|s| {
            if kind == SchemeKind::SchemeB {
                scheme_b_init(s, ctx, dt)
            } else {
                Ok(s)
            }
        })
    } else {
        match kind {
            SchemeKind::Gspm1 => gspm1_step(state, ctx, dt),
            SchemeKind::Si2 => si2_step(state, ctx, dt),
            SchemeKind::SchemeA => scheme_a_step(state, ctx, dt),
            SchemeKind::SchemeB => scheme_b_step(state, ctx, dt),
            SchemeKind::Bdf2Ref => bdf2_reference_step(state, ctx, dt),
        }
    };
    res.map_err(|e| Error::AtStep {
        step: step_no,
        scheme: kind.name(),
        source: Box::new(e),
    })
}

/// Runs `steps` steps from `m0`, calling `observe` after each one.
pub fn integrate<F>(
    kind: SchemeKind,
    m0: VectorField,
    ctx: &StepContext<'_>,
    dt: f64,
    steps: usize,
    mut observe: F,
) -> Result<SchemeState>
where
    F: FnMut(&SchemeState) -> Result<()>,
{
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let mut state = SchemeState::initial(m0);
    for _ in 0..steps {
        state = step(kind, state, ctx, dt)?;
        observe(&state)?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests;
