//! Explicit execution of two- and three-level schemes on structured grids.
//!
//! The macroscopic field is the only state: equilibrium values are rebuilt
//! from it at every stencil read, so memory stays at a handful of scalar
//! fields per run. Two independent update routes are provided, the direct
//! streaming sum ([`step`]) and the bulk-plus-central-differences form
//! ([`central_form_step`]); they agree to roundoff and cross-check each
//! other in the tests.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::edf::{self, DirectionKernel, EdfError, EdfSpec};
use crate::lattice::{idx2, LatticeModel};
use crate::scheme::{coefficient_moments, SchemeCoefficients};

#[derive(Debug, Error)]
pub enum StepError {
    #[error("axis {axis} has {cells} cells; at least 4 required")]
    TooCoarse { axis: usize, cells: usize },
    #[error("missing initial data: {0}")]
    MissingInitialData(&'static str),
    #[error("unshifted scheme has terms at the implicit level q = 0")]
    ImplicitSchemeUnsupported,
    #[error("stencil not executable here: {0}")]
    UnsupportedStencil(String),
    #[error("final time {t} is not an integer multiple of dt = {dt}")]
    NonIntegerStepCount { t: f64, dt: f64 },
    #[error("lattice speed on axis {axis} gives dx = {got}, grid has {expected}")]
    LatticeGridMismatch { axis: usize, expected: f64, got: f64 },
    #[error("scheme recovers alpha = {from_scheme}, problem declares {declared}")]
    SchemeProblemMismatch { from_scheme: f64, declared: f64 },
    #[error("state holds too few levels for this operation")]
    InsufficientHistory,
    #[error(transparent)]
    Edf(#[from] EdfError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    DirichletExact,
}

/// Structured grid with per-axis extent, spacing, and boundary kind.
/// Periodic axes store one node per cell (the upper edge is identified with
/// the lower); exact-Dirichlet axes store both endpoints.
#[derive(Debug, Clone, Serialize)]
pub struct Grid {
    pub dim: usize,
    pub lower: [f64; 3],
    pub upper: [f64; 3],
    pub cells: [usize; 3],
    pub nodes: [usize; 3],
    pub spacing: [f64; 3],
    pub boundary: [Boundary; 3],
}

pub fn make_grid(
    domain: &[(f64, f64)],
    cells_per_axis: &[usize],
    boundary: &[Boundary],
) -> Result<Grid, StepError> {
    let dim = domain.len();
    assert!(
        dim >= 1 && dim <= 3 && cells_per_axis.len() == dim && boundary.len() == dim,
        "domain, cells, and boundary must agree on a dimension of 1..=3"
    );
    let mut g = Grid {
        dim,
        lower: [0.0; 3],
        upper: [0.0; 3],
        cells: [1; 3],
        nodes: [1; 3],
        spacing: [1.0; 3],
        boundary: [Boundary::Periodic; 3],
    };
    for a in 0..dim {
        let cells = cells_per_axis[a];
        if cells < 4 {
            return Err(StepError::TooCoarse { axis: a, cells });
        }
        g.lower[a] = domain[a].0;
        g.upper[a] = domain[a].1;
        g.cells[a] = cells;
        g.boundary[a] = boundary[a];
        g.spacing[a] = (domain[a].1 - domain[a].0) / cells as f64;
        g.nodes[a] = match boundary[a] {
            Boundary::Periodic => cells,
            Boundary::DirichletExact => cells + 1,
        };
    }
    Ok(g)
}

impl Grid {
    pub fn num_nodes(&self) -> usize {
        self.nodes[..self.dim].iter().product()
    }

    #[inline]
    fn unflatten(&self, idx: usize) -> [i64; 3] {
        let mut out = [0i64; 3];
        let mut rem = idx;
        for a in 0..self.dim {
            out[a] = (rem % self.nodes[a]) as i64;
            rem /= self.nodes[a];
        }
        out
    }

    #[inline]
    fn flatten(&self, ijk: [i64; 3]) -> usize {
        let mut idx = 0usize;
        for a in (0..self.dim).rev() {
            idx = idx * self.nodes[a] + ijk[a] as usize;
        }
        idx
    }

    #[inline]
    fn shifted(&self, ijk: [i64; 3], offset: [i32; 3]) -> usize {
        let mut out = ijk;
        for a in 0..self.dim {
            let n = self.nodes[a] as i64;
            let mut v = ijk[a] + offset[a] as i64;
            if matches!(self.boundary[a], Boundary::Periodic) {
                v = v.rem_euclid(n);
            } else {
                debug_assert!(v >= 0 && v < n, "dirichlet stencil read out of range");
            }
            out[a] = v;
        }
        self.flatten(out)
    }

    #[inline]
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let ijk = self.unflatten(idx);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = self.lower[a] + ijk[a] as f64 * self.spacing[a];
        }
        x
    }

    #[inline]
    fn on_dirichlet_boundary(&self, idx: usize) -> bool {
        let ijk = self.unflatten(idx);
        (0..self.dim).any(|a| {
            matches!(self.boundary[a], Boundary::DirichletExact)
                && (ijk[a] == 0 || ijk[a] == self.nodes[a] as i64 - 1)
        })
    }
}

/// Scalar field callback (position, time).
pub type ScalarFn = Arc<dyn Fn(&[f64; 3], f64) -> f64 + Send + Sync>;

/// Source moments at a point: the zeroth moment and the first-moment target
/// of the source distribution.
#[derive(Debug, Clone, Copy)]
pub struct SourceMoments {
    pub s: f64,
    pub m1f: [f64; 3],
}

pub type SourceFn = Arc<dyn Fn(&[f64; 3], f64) -> SourceMoments + Send + Sync>;

/// Builds the equilibrium moment triple from the local field value. The
/// position/time arguments admit space- or time-dependent coefficients.
pub trait EdfBuild: Sync {
    fn spec(&self, phi: f64, x: &[f64; 3], t: f64) -> EdfSpec;
}

/// Equilibrium builder linear in the field: `(phi, phi u, phi M)` with
/// `M = (beta - 1) cs2 I + lambda_bar u u` for constant `u`.
#[derive(Debug, Clone)]
pub struct LinearNcdeBuilder {
    pub u: [f64; 3],
    pub unit_c: [f64; 9],
    pub lambda_bar: f64,
}

impl LinearNcdeBuilder {
    pub fn new(lat: &LatticeModel, u: [f64; 3], beta: f64, lambda_bar: f64) -> Self {
        let mut unit_c = [0.0; 9];
        for a in 0..lat.dim {
            unit_c[idx2(a, a)] = (beta - 1.0) * lat.cs2;
            for b in 0..lat.dim {
                unit_c[idx2(a, b)] += lambda_bar * u[a] * u[b];
            }
        }
        LinearNcdeBuilder { u, unit_c, lambda_bar }
    }
}

impl EdfBuild for LinearNcdeBuilder {
    #[inline]
    fn spec(&self, phi: f64, _x: &[f64; 3], _t: f64) -> EdfSpec {
        let mut spec = EdfSpec::new(
            phi,
            [phi * self.u[0], phi * self.u[1], phi * self.u[2]],
            [
                phi * self.unit_c[0],
                phi * self.unit_c[1],
                phi * self.unit_c[2],
                phi * self.unit_c[3],
                phi * self.unit_c[4],
                phi * self.unit_c[5],
                phi * self.unit_c[6],
                phi * self.unit_c[7],
                phi * self.unit_c[8],
            ],
        );
        spec.lambda_bar = Some(self.lambda_bar);
        spec
    }
}

/// Adapter for closure-defined builders.
pub struct FnBuilder<F>(pub F);

impl<F: Fn(f64, &[f64; 3], f64) -> EdfSpec + Sync> EdfBuild for FnBuilder<F> {
    #[inline]
    fn spec(&self, phi: f64, x: &[f64; 3], t: f64) -> EdfSpec {
        self.0(phi, x, t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PdeKind {
    Ncde,
    Wave,
}

/// How the second time level of a three-level run is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SecondLevelInit {
    /// Taylor step `phi + dt dphi + (alpha dt^2 / 2) laplacian(phi)` using
    /// the axis-aligned grid Laplacian.
    WaveTaylor,
    /// Sample the exact solution at `t = dt`.
    ExactSolution,
    /// One step of a reduced two-level scheme with matching first-order
    /// constants.
    Bootstrap,
}

/// Everything defining one run apart from the scheme and grid.
#[derive(Clone)]
pub struct ProblemSpec {
    pub kind: PdeKind,
    /// Constant advection velocity, used for consistency reporting and the
    /// preset builders; space/time-dependent velocities enter through a
    /// custom [`EdfBuild`] implementation.
    pub velocity: [f64; 3],
    /// Diffusion coefficient (convection-diffusion) or wave coefficient.
    pub alpha: f64,
    pub beta: f64,
    pub lambda_bar: f64,
    pub source: Option<SourceFn>,
    pub exact: Option<ScalarFn>,
    pub initial: Option<ScalarFn>,
    /// Time derivative of the initial condition, for the Taylor first step.
    pub initial_dt: Option<ScalarFn>,
    pub dt: f64,
    pub final_time: f64,
    pub second_level_init: SecondLevelInit,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("kind", &self.kind)
            .field("velocity", &self.velocity)
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .field("lambda_bar", &self.lambda_bar)
            .field("dt", &self.dt)
            .field("final_time", &self.final_time)
            .field("second_level_init", &self.second_level_init)
            .finish_non_exhaustive()
    }
}

/// Ring buffer of the scheme's time levels over a grid. `fields[0]` is the
/// newest level; one extra level beyond the scheme's history depth is
/// retained so distribution views of the newest time stay computable.
#[derive(Debug, Clone)]
pub struct SimulationState {
    pub fields: VecDeque<Vec<f64>>,
    pub time: f64,
    pub steps: u64,
    pub init_method: SecondLevelInit,
}

impl SimulationState {
    pub fn newest(&self) -> &[f64] {
        &self.fields[0]
    }
}

/// Newest-level view of the macroscopic field.
pub fn macro_field(s: &SimulationState) -> &[f64] {
    s.newest()
}

/// Execution schedule for the node loops. Results are identical either way;
/// `Parallel` falls back to sequential when the `parallel` feature is off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    #[default]
    Parallel,
    Sequential,
}

#[cfg(feature = "parallel")]
fn fill_nodes<F: Fn(usize) -> f64 + Sync>(out: &mut [f64], mode: ExecMode, f: F) {
    match mode {
        ExecMode::Parallel => {
            use rayon::prelude::*;
            out.par_iter_mut().enumerate().for_each(|(i, v)| *v = f(i));
        }
        ExecMode::Sequential => {
            for (i, v) in out.iter_mut().enumerate() {
                *v = f(i);
            }
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn fill_nodes<F: Fn(usize) -> f64 + Sync>(out: &mut [f64], _mode: ExecMode, f: F) {
    for (i, v) in out.iter_mut().enumerate() {
        *v = f(i);
    }
}

struct Term {
    k: i32,
    hist: usize,
    t_read: f64,
    a: f64,
    b: f64,
}

struct StepPlan {
    terms: Vec<Term>,
    kernels: Vec<DirectionKernel>,
    history_depth: usize,
}

fn build_plan(
    c: &SchemeCoefficients,
    p: &ProblemSpec,
    g: &Grid,
    lat: &LatticeModel,
    t_new: f64,
) -> Result<StepPlan, StepError> {
    if lat.dim != g.dim {
        return Err(StepError::UnsupportedStencil(format!(
            "lattice dim {} vs grid dim {}",
            lat.dim, g.dim
        )));
    }
    for a in 0..g.dim {
        let dx = lat.axis_speeds[a] * p.dt;
        if (dx - g.spacing[a]).abs() > 1e-12 * g.spacing[a].max(1.0) {
            return Err(StepError::LatticeGridMismatch {
                axis: a,
                expected: g.spacing[a],
                got: dx,
            });
        }
    }
    if !c.shifted
        && c.a
            .keys()
            .chain(c.b.keys())
            .any(|&(_, q)| q == 0)
    {
        return Err(StepError::ImplicitSchemeUnsupported);
    }

    let history_depth = c.levels() as usize;
    let mut keys: Vec<(i32, i32)> = c.a.keys().chain(c.b.keys()).copied().collect();
    keys.sort_by_key(|&(k, q)| (q, k));
    keys.dedup();
    let mut max_reach = 0;
    let terms = keys
        .into_iter()
        .map(|(k, q)| {
            max_reach = max_reach.max(k.abs());
            let hist = if c.shifted { -q } else { -q - 1 } as usize;
            let t_read = if c.shifted {
                t_new + (q as f64 - 1.0) * p.dt
            } else {
                t_new + q as f64 * p.dt
            };
            Term {
                k,
                hist,
                t_read,
                a: c.a_at(k, q),
                b: c.b_at(k, q),
            }
        })
        .collect();

    let dirichlet = (0..g.dim).any(|a| matches!(g.boundary[a], Boundary::DirichletExact));
    if dirichlet {
        if max_reach > 1 {
            return Err(StepError::UnsupportedStencil(
                "stencil offsets beyond one ring on a Dirichlet grid".into(),
            ));
        }
        if p.exact.is_none() {
            return Err(StepError::MissingInitialData(
                "exact solution required for Dirichlet boundaries",
            ));
        }
    }

    Ok(StepPlan {
        terms,
        kernels: edf::direction_kernels(lat)?,
        history_depth,
    })
}

fn push_level(s: &mut SimulationState, field: Vec<f64>, dt: f64, keep: usize) {
    s.fields.push_front(field);
    while s.fields.len() > keep {
        s.fields.pop_back();
    }
    s.time += dt;
    s.steps += 1;
}

/// Advance one time step through the direct streaming form.
pub fn step<B: EdfBuild>(
    s: &mut SimulationState,
    c: &SchemeCoefficients,
    p: &ProblemSpec,
    g: &Grid,
    lat: &LatticeModel,
    builder: &B,
    mode: ExecMode,
) -> Result<(), StepError> {
    let t_new = s.time + p.dt;
    let plan = build_plan(c, p, g, lat, t_new)?;
    if s.fields.len() < plan.history_depth {
        return Err(StepError::InsufficientHistory);
    }
    let hist: Vec<&[f64]> = s.fields.iter().map(|v| v.as_slice()).collect();
    let nj = lat.num_velocities();
    let dirs = &lat.directions;
    let exact = p.exact.clone();
    let source = p.source.clone();
    let dt = p.dt;

    let mut out = vec![0.0; g.num_nodes()];
    fill_nodes(&mut out, mode, |idx| {
        if g.on_dirichlet_boundary(idx) {
            let x = g.position(idx);
            return (exact.as_ref().unwrap())(&x, t_new);
        }
        let ijk = g.unflatten(idx);
        let mut acc = 0.0;
        for term in &plan.terms {
            let field = hist[term.hist];
            for j in 0..nj {
                let offset = [
                    term.k * dirs[j][0],
                    term.k * dirs[j][1],
                    term.k * dirs[j][2],
                ];
                let y = g.shifted(ijk, offset);
                let x = g.position(y);
                if term.a != 0.0 {
                    let spec = builder.spec(field[y], &x, term.t_read);
                    acc += term.a * plan.kernels[j].eval(&spec);
                }
                if term.b != 0.0 {
                    if let Some(src) = &source {
                        let sm = src(&x, term.t_read);
                        let kern = &plan.kernels[j];
                        let fj = kern.base * sm.s
                            + kern.b_coef[0] * sm.m1f[0]
                            + kern.b_coef[1] * sm.m1f[1]
                            + kern.b_coef[2] * sm.m1f[2];
                        acc += dt * term.b * fj;
                    }
                }
            }
        }
        acc
    });
    push_level(s, out, dt, plan.history_depth + 1);
    Ok(())
}

/// Advance one time step through the bulk-plus-central-differences form;
/// field-identical to [`step`] up to roundoff.
pub fn central_form_step<B: EdfBuild>(
    s: &mut SimulationState,
    c: &SchemeCoefficients,
    p: &ProblemSpec,
    g: &Grid,
    lat: &LatticeModel,
    builder: &B,
    mode: ExecMode,
) -> Result<(), StepError> {
    let t_new = s.time + p.dt;
    let plan = build_plan(c, p, g, lat, t_new)?;
    if s.fields.len() < plan.history_depth {
        return Err(StepError::InsufficientHistory);
    }
    let hist: Vec<&[f64]> = s.fields.iter().map(|v| v.as_slice()).collect();
    let nj = lat.num_velocities();
    let exact = p.exact.clone();
    let source = p.source.clone();
    let dt = p.dt;
    let split = crate::scheme::split_even_odd(c);

    // Per-(q) bulk coefficients and per-(k,q) correction weights.
    struct Correction {
        k: i32,
        hist: usize,
        t_read: f64,
        a_plus: f64,
        a_minus: f64,
        b_plus: f64,
        b_minus: f64,
    }
    let mut bulks: Vec<(usize, f64, f64, f64)> = Vec::new(); // (hist, t_read, a_sum, b_sum)
    for q in c.level_set() {
        let (asum, bsum) = c.level_sums(q);
        let hist = if c.shifted { -q } else { -q - 1 } as usize;
        let t_read = if c.shifted {
            t_new + (q as f64 - 1.0) * dt
        } else {
            t_new + q as f64 * dt
        };
        bulks.push((hist, t_read, asum, bsum));
    }
    let mut corrections: Vec<Correction> = Vec::new();
    let mut keys: Vec<(i32, i32)> = split
        .a_plus
        .keys()
        .chain(split.b_plus.keys())
        .copied()
        .collect();
    keys.sort_by_key(|&(k, q)| (q, k));
    keys.dedup();
    for (k, q) in keys {
        let hist = if c.shifted { -q } else { -q - 1 } as usize;
        let t_read = if c.shifted {
            t_new + (q as f64 - 1.0) * dt
        } else {
            t_new + q as f64 * dt
        };
        corrections.push(Correction {
            k,
            hist,
            t_read,
            a_plus: split.a_plus.get(&(k, q)).copied().unwrap_or(0.0),
            a_minus: split.a_minus.get(&(k, q)).copied().unwrap_or(0.0),
            b_plus: split.b_plus.get(&(k, q)).copied().unwrap_or(0.0),
            b_minus: split.b_minus.get(&(k, q)).copied().unwrap_or(0.0),
        });
    }

    let dirs = &lat.directions;
    let opp = &lat.opposite;
    let mut out = vec![0.0; g.num_nodes()];
    fill_nodes(&mut out, mode, |idx| {
        if g.on_dirichlet_boundary(idx) {
            let x = g.position(idx);
            return (exact.as_ref().unwrap())(&x, t_new);
        }
        let ijk = g.unflatten(idx);
        let x0 = g.position(idx);
        let mut acc = 0.0;
        for &(h, t_read, asum, bsum) in &bulks {
            acc += asum * hist[h][idx];
            if bsum != 0.0 {
                if let Some(src) = &source {
                    acc += dt * bsum * src(&x0, t_read).s;
                }
            }
        }
        // g_j^{+-}(y) at one position, for one direction pair.
        let eval_pm = |h: usize, t_read: f64, y: usize, j: usize| -> (f64, f64) {
            let xy = g.position(y);
            let spec = builder.spec(hist[h][y], &xy, t_read);
            let gj = plan.kernels[j].eval(&spec);
            let gjb = plan.kernels[opp[j]].eval(&spec);
            (0.5 * (gj + gjb), 0.5 * (gj - gjb))
        };
        let source_pm = |t_read: f64, y: usize, j: usize| -> (f64, f64) {
            match &source {
                None => (0.0, 0.0),
                Some(src) => {
                    let xy = g.position(y);
                    let sm = src(&xy, t_read);
                    let f = |jj: usize| {
                        let kern = &plan.kernels[jj];
                        kern.base * sm.s
                            + kern.b_coef[0] * sm.m1f[0]
                            + kern.b_coef[1] * sm.m1f[1]
                            + kern.b_coef[2] * sm.m1f[2]
                    };
                    let fj = f(j);
                    let fjb = f(opp[j]);
                    (0.5 * (fj + fjb), 0.5 * (fj - fjb))
                }
            }
        };
        for corr in &corrections {
            for j in 0..nj {
                if dirs[j] == [0, 0, 0] {
                    continue;
                }
                let offset = [
                    corr.k * dirs[j][0],
                    corr.k * dirs[j][1],
                    corr.k * dirs[j][2],
                ];
                let y_plus = g.shifted(ijk, offset);
                let y_minus = g.shifted(ijk, [-offset[0], -offset[1], -offset[2]]);
                let (gp_p, gm_p) = eval_pm(corr.hist, corr.t_read, y_plus, j);
                let (gp_0, _) = eval_pm(corr.hist, corr.t_read, idx, j);
                let (gp_m, gm_m) = eval_pm(corr.hist, corr.t_read, y_minus, j);
                acc += 0.5 * corr.a_plus * (gp_p - 2.0 * gp_0 + gp_m);
                acc += 0.5 * corr.a_minus * (gm_p - gm_m);
                if corr.b_plus != 0.0 || corr.b_minus != 0.0 {
                    let (fp_p, fm_p) = source_pm(corr.t_read, y_plus, j);
                    let (fp_0, _) = source_pm(corr.t_read, idx, j);
                    let (fp_m, fm_m) = source_pm(corr.t_read, y_minus, j);
                    acc += 0.5 * dt * corr.b_plus * (fp_p - 2.0 * fp_0 + fp_m);
                    acc += 0.5 * dt * corr.b_minus * (fm_p - fm_m);
                }
            }
        }
        acc
    });
    push_level(s, out, dt, plan.history_depth + 1);
    Ok(())
}

/// Sample a scalar callback over the grid at one time.
fn sample(g: &Grid, f: &ScalarFn, t: f64) -> Vec<f64> {
    (0..g.num_nodes())
        .map(|idx| f(&g.position(idx), t))
        .collect()
}

/// Initialize the state: level zero from the initial condition (or the
/// exact solution at t = 0), and for three-level schemes the second level
/// per the configured strategy.
pub fn initialize<B: EdfBuild>(
    p: &ProblemSpec,
    g: &Grid,
    c: &SchemeCoefficients,
    lat: &LatticeModel,
    builder: &B,
    mode: ExecMode,
) -> Result<SimulationState, StepError> {
    let ic: ScalarFn = match (&p.initial, &p.exact) {
        (Some(f), _) => f.clone(),
        (None, Some(f)) => f.clone(),
        (None, None) => {
            return Err(StepError::MissingInitialData(
                "neither an initial condition nor an exact solution is set",
            ))
        }
    };
    let depth = c.levels() as usize;
    if depth > 2 {
        return Err(StepError::UnsupportedStencil(format!(
            "initialization for history depth {depth}"
        )));
    }
    let level0 = sample(g, &ic, 0.0);
    let mut state = SimulationState {
        fields: VecDeque::from(vec![level0]),
        time: 0.0,
        steps: 0,
        init_method: p.second_level_init,
    };
    if depth == 1 {
        return Ok(state);
    }

    match p.second_level_init {
        SecondLevelInit::ExactSolution => {
            let exact = p
                .exact
                .as_ref()
                .ok_or(StepError::MissingInitialData("exact solution for level two"))?;
            let level1 = sample(g, exact, p.dt);
            state.fields.push_front(level1);
            state.time = p.dt;
        }
        SecondLevelInit::WaveTaylor => {
            let dphi = p.initial_dt.as_ref().ok_or(StepError::MissingInitialData(
                "time derivative of the initial condition",
            ))?;
            let phi0 = state.fields[0].clone();
            let mut level1 = vec![0.0; g.num_nodes()];
            let exact = p.exact.clone();
            fill_nodes(&mut level1, mode, |idx| {
                let x = g.position(idx);
                if g.on_dirichlet_boundary(idx) {
                    return match &exact {
                        Some(f) => f(&x, p.dt),
                        None => phi0[idx] + p.dt * dphi(&x, 0.0),
                    };
                }
                let ijk = g.unflatten(idx);
                let mut lap = 0.0;
                for a in 0..g.dim {
                    let mut e = [0i32; 3];
                    e[a] = 1;
                    let plus = g.shifted(ijk, e);
                    e[a] = -1;
                    let minus = g.shifted(ijk, e);
                    lap += (phi0[plus] - 2.0 * phi0[idx] + phi0[minus])
                        / (g.spacing[a] * g.spacing[a]);
                }
                phi0[idx] + p.dt * dphi(&x, 0.0) + 0.5 * p.alpha * p.dt * p.dt * lap
            });
            state.fields.push_front(level1);
            state.time = p.dt;
        }
        SecondLevelInit::Bootstrap => {
            // Two-level scheme sharing the first-order constants and the
            // second-moment weight of the target scheme.
            let mc = coefficient_moments(c);
            let a11 = mc.a_at(1, 1);
            let a22 = mc.a_at(2, 2);
            let mut boot = SchemeCoefficients::new(true)
                .with_a(0, 0, 1.0 - 2.0 * a22)
                .with_a(1, 0, a22 + a11 / 2.0)
                .with_a(-1, 0, a22 - a11 / 2.0);
            if !c.b.is_empty() {
                boot = boot.with_b(-1, 0, mc.b_at(0, 0));
            }
            step(&mut state, &boot, p, g, lat, builder, mode)?;
        }
    }
    state.steps = 0;
    Ok(state)
}

/// Per-direction distribution fields at the newest time, assembled from the
/// history levels that produced it. Periodic grids only.
pub fn meso_distributions<B: EdfBuild>(
    s: &SimulationState,
    c: &SchemeCoefficients,
    p: &ProblemSpec,
    g: &Grid,
    lat: &LatticeModel,
    builder: &B,
) -> Result<Vec<Vec<f64>>, StepError> {
    if (0..g.dim).any(|a| !matches!(g.boundary[a], Boundary::Periodic)) {
        return Err(StepError::UnsupportedStencil(
            "distribution views on non-periodic grids".into(),
        ));
    }
    let plan = build_plan(c, p, g, lat, s.time)?;
    if s.fields.len() < plan.history_depth + 1 {
        return Err(StepError::InsufficientHistory);
    }
    let nj = lat.num_velocities();
    let mut out = vec![vec![0.0; g.num_nodes()]; nj];
    for idx in 0..g.num_nodes() {
        let ijk = g.unflatten(idx);
        for term in &plan.terms {
            let field = &s.fields[term.hist + 1];
            for (j, out_j) in out.iter_mut().enumerate() {
                let offset = [
                    term.k * lat.directions[j][0],
                    term.k * lat.directions[j][1],
                    term.k * lat.directions[j][2],
                ];
                let y = g.shifted(ijk, offset);
                let x = g.position(y);
                if term.a != 0.0 {
                    let spec = builder.spec(field[y], &x, term.t_read);
                    out_j[idx] += term.a * plan.kernels[j].eval(&spec);
                }
                if term.b != 0.0 {
                    if let Some(src) = &p.source {
                        let sm = src(&x, term.t_read);
                        let kern = &plan.kernels[j];
                        out_j[idx] += p.dt
                            * term.b
                            * (kern.base * sm.s
                                + kern.b_coef[0] * sm.m1f[0]
                                + kern.b_coef[1] * sm.m1f[1]
                                + kern.b_coef[2] * sm.m1f[2]);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Field magnitude that flags a run as blown up.
pub const BLOWUP_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, Serialize)]
pub struct RunDiagnostics {
    pub gre: Option<f64>,
    pub mass: Vec<f64>,
    pub max_abs: Vec<f64>,
    pub blowup: bool,
    pub steps_completed: u64,
    pub init_method: SecondLevelInit,
    pub dt: f64,
    pub final_time: f64,
}

#[derive(Debug)]
pub struct RunResult {
    pub state: SimulationState,
    pub diagnostics: RunDiagnostics,
}

fn field_mass(field: &[f64]) -> f64 {
    field.iter().sum()
}

fn field_max_abs(field: &[f64]) -> f64 {
    field.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Enforce that the problem's declared coefficient matches what the scheme
/// recovers for this lattice and time step.
pub fn check_problem_scheme(
    p: &ProblemSpec,
    c: &SchemeCoefficients,
    lat: &LatticeModel,
) -> Result<(), StepError> {
    let mc = coefficient_moments(c);
    let from_scheme = match p.kind {
        PdeKind::Ncde => -(mc.a_at(2, 2) / mc.a_at(1, 0)) * p.dt * p.beta * lat.cs2,
        PdeKind::Wave => mc.a_at(2, 2) * p.beta * lat.cs2,
    };
    if (from_scheme - p.alpha).abs() > 1e-12 * p.alpha.abs().max(1.0) {
        return Err(StepError::SchemeProblemMismatch {
            from_scheme,
            declared: p.alpha,
        });
    }
    Ok(())
}

/// Initialize and march to the final time, collecting per-step diagnostics.
/// Blowup (max |phi| above [`BLOWUP_THRESHOLD`]) halts the run and is
/// flagged rather than returned as an error.
pub fn run<B: EdfBuild>(
    p: &ProblemSpec,
    c: &SchemeCoefficients,
    g: &Grid,
    lat: &LatticeModel,
    builder: &B,
    mode: ExecMode,
) -> Result<RunResult, StepError> {
    let ratio = p.final_time / p.dt;
    let total = ratio.round();
    if (ratio - total).abs() > 1e-9 * total.max(1.0) {
        return Err(StepError::NonIntegerStepCount {
            t: p.final_time,
            dt: p.dt,
        });
    }
    check_problem_scheme(p, c, lat)?;
    let mut state = initialize(p, g, c, lat, builder, mode)?;
    let consumed = (state.time / p.dt).round() as i64;
    let remaining = total as i64 - consumed;
    if remaining < 0 {
        return Err(StepError::NonIntegerStepCount {
            t: p.final_time,
            dt: p.dt,
        });
    }

    let mut diag = RunDiagnostics {
        gre: None,
        mass: vec![field_mass(state.newest())],
        max_abs: vec![field_max_abs(state.newest())],
        blowup: false,
        steps_completed: 0,
        init_method: state.init_method,
        dt: p.dt,
        final_time: p.final_time,
    };

    for n in 0..remaining {
        step(&mut state, c, p, g, lat, builder, mode)?;
        // Keep the clock exact on long runs.
        state.time = (consumed + n + 1) as f64 * p.dt;
        let mx = field_max_abs(state.newest());
        diag.mass.push(field_mass(state.newest()));
        diag.max_abs.push(mx);
        diag.steps_completed += 1;
        if mx > BLOWUP_THRESHOLD {
            diag.blowup = true;
            break;
        }
    }

    if diag.blowup {
        diag.gre = Some(f64::INFINITY);
    } else if let Some(exact) = &p.exact {
        // Error over the nodes the scheme actually updates: imposed
        // Dirichlet values carry no information.
        let reference = sample(g, exact, state.time);
        let mask: Vec<bool> = (0..g.num_nodes())
            .map(|idx| !g.on_dirichlet_boundary(idx))
            .collect();
        let pick = |f: &[f64]| -> Vec<f64> {
            f.iter()
                .zip(&mask)
                .filter(|(_, m)| **m)
                .map(|(v, _)| *v)
                .collect()
        };
        diag.gre = crate::harness::gre(&pick(state.newest()), &pick(&reference)).ok();
    }
    Ok(RunResult {
        state,
        diagnostics: diag,
    })
}
