//! Built-in benchmark problems, error norms, convergence ladders, and table
//! emission.
//!
//! Three example problems are wired: (1) an isotropic convection-diffusion
//! equation with a manufactured source, (2) the homogeneous version without
//! a source, and (3) a two-dimensional wave equation with exact Dirichlet
//! data. Grids follow the `N_x = 1/dx` convention, so a `[0, 2]` axis holds
//! `2 N_x` cells.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::lattice::{build_lattice, LatticeError, LatticeModel, LatticeName};
use crate::scheme::{
    coefficient_moments, solve_three_level, SchemeCoefficients, SchemeError, StencilTargets,
};
use crate::stepper::{
    make_grid, run, Boundary, ExecMode, Grid, LinearNcdeBuilder, PdeKind, ProblemSpec, RunResult,
    ScalarFn, SecondLevelInit, SourceMoments, StepError,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown example {example} case {case}")]
    UnknownExample { example: u32, case: u32 },
    #[error("a convergence study needs at least two levels")]
    TooFewLevels,
    #[error("reference field is identically zero")]
    ZeroReference,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
}

/// Global relative error `sum |phi - phi*| / sum |phi*|` over grid nodes.
pub fn gre(numeric: &[f64], exact: &[f64]) -> Result<f64, HarnessError> {
    assert_eq!(numeric.len(), exact.len(), "field shapes must match");
    let denom: f64 = exact.iter().map(|v| v.abs()).sum();
    if denom == 0.0 {
        return Err(HarnessError::ZeroReference);
    }
    let num: f64 = numeric
        .iter()
        .zip(exact)
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(num / denom)
}

/// Fully wired example setup.
pub struct ExampleSetup {
    pub problem: ProblemSpec,
    pub scheme: SchemeCoefficients,
    pub lattice: LatticeModel,
    pub grid: Grid,
    pub builder: LinearNcdeBuilder,
    /// Human-readable provenance of derived parameters.
    pub notes: String,
}

const THIRD: f64 = 1.0 / 3.0;
const PI: f64 = std::f64::consts::PI;

fn case_targets(example: u32, case: u32) -> Result<(StencilTargets, f64), HarnessError> {
    // (targets, beta)
    let t = |a0: f64, a21: f64, a22: f64| StencilTargets {
        a0,
        a10: -1.0,
        a11: -1.0,
        a21,
        a22,
        source_targets: None,
    };
    match (example, case) {
        (1, 1) => Ok((t(0.0, 0.0, 0.5), 1.0)),
        (1, 2) => Ok((t(0.25, 0.0, 0.5), 1.0)),
        (1, 3) => Ok((t(0.0, 0.25, 0.5), 1.0)),
        (2, 1) => Ok((t(0.0, 0.0, 0.5), 1.0)),
        (2, 2) => Ok((t(0.0, 0.25, 0.5), 1.0)),
        (2, 3) => Ok((t(0.0, 0.0, 1.0), 0.5)),
        _ => Err(HarnessError::UnknownExample { example, case }),
    }
}

/// The scheme coefficient set of one example case, with the source weights
/// it uses (examples 1 and 2 share the a-side solver; example 3 is the wave
/// preset family).
pub fn example_scheme(example: u32, case: u32, cs2: f64) -> Result<(SchemeCoefficients, f64), HarnessError> {
    match example {
        1 => {
            let (targets, beta) = case_targets(example, case)?;
            let scheme = solve_three_level(&targets)
                .with_b(-1, 0, 1.5)
                .with_b(-1, -1, -0.5);
            Ok((scheme, beta))
        }
        2 => {
            let (targets, beta) = case_targets(example, case)?;
            Ok((solve_three_level(&targets), beta))
        }
        3 => {
            let beta = match case {
                1 | 2 => 1.0,
                3 => 0.75,
                _ => return Err(HarnessError::UnknownExample { example, case }),
            };
            let gamma = 0.5 / (beta * cs2);
            Ok((
                crate::scheme::preset(crate::scheme::Preset::Wave { gamma })?,
                beta,
            ))
        }
        _ => Err(HarnessError::UnknownExample { example, case }),
    }
}

/// Build the complete setup for one example case at resolution `(nx, nt)`
/// with `dx = 1/nx` and `dt = 1/nt`, using the default convective-tensor
/// weight for the example kind.
pub fn example_problem(
    example: u32,
    case: u32,
    nx: usize,
    nt: usize,
) -> Result<ExampleSetup, HarnessError> {
    example_problem_with(example, case, nx, nt, default_lambda_bar(example))
}

/// Convective-tensor weight used by the examples: the convergence problems
/// run with the linear-in-velocity equilibrium (no uu term), which is what
/// the published second-order error tables correspond to.
pub fn default_lambda_bar(example: u32) -> f64 {
    let _ = example;
    0.0
}

/// [`example_problem`] with an explicit convective-tensor weight
/// `lambda_bar` (0 drops the uu term from the equilibrium, 1 keeps it).
pub fn example_problem_with(
    example: u32,
    case: u32,
    nx: usize,
    nt: usize,
    lambda_bar: f64,
) -> Result<ExampleSetup, HarnessError> {
    let dx = 1.0 / nx as f64;
    let dt = 1.0 / nt as f64;
    let c = dx / dt;
    let cs2 = c * c / 3.0;

    match example {
        1 | 2 => {
            let grid = make_grid(
                &[(0.0, 2.0), (0.0, 2.0)],
                &[2 * nx, 2 * nx],
                &[Boundary::Periodic, Boundary::Periodic],
            )?;
            let lattice = build_lattice(LatticeName::RD2Q9, &[THIRD, THIRD], &[c, c])?;
            let (scheme, beta) = example_scheme(example, case, cs2)?;
            let mc = coefficient_moments(&scheme);
            let alpha = -(mc.a_at(2, 2) / mc.a_at(1, 0)) * dt * beta * cs2;
            let u = if example == 1 {
                [0.1, 0.1, 0.0]
            } else {
                [1.0, 1.0, 0.0]
            };
            let builder = LinearNcdeBuilder::new(&lattice, u, beta, lambda_bar);
            let (exact, source): (ScalarFn, _) = if example == 1 {
                let kappa = alpha;
                let growth = 1.0 - 2.0 * PI * PI * kappa;
                let exact: ScalarFn = Arc::new(move |x: &[f64; 3], t: f64| {
                    (growth * t).exp() * (PI * (x[0] + x[1])).sin()
                });
                let usum = u[0] + u[1];
                let src = Arc::new(move |x: &[f64; 3], t: f64| {
                    let phase = PI * (x[0] + x[1]);
                    let r = (growth * t).exp() * (phase.sin() + PI * usum * phase.cos());
                    SourceMoments {
                        s: r,
                        m1f: [r * u[0], r * u[1], 0.0],
                    }
                });
                (exact, Some(src as crate::stepper::SourceFn))
            } else {
                let d = alpha;
                let usum = u[0] + u[1];
                let exact: ScalarFn = Arc::new(move |x: &[f64; 3], t: f64| {
                    (-2.0 * d * PI * PI * t).exp() * (PI * (x[0] + x[1]) - PI * usum * t).cos()
                });
                (exact, None)
            };
            let problem = ProblemSpec {
                kind: PdeKind::Ncde,
                velocity: u,
                alpha,
                beta,
                lambda_bar,
                source,
                exact: Some(exact),
                initial: None,
                initial_dt: None,
                dt,
                final_time: 1.0,
                second_level_init: SecondLevelInit::ExactSolution,
            };
            let notes = format!(
                "diffusion coefficient {alpha:.6} derived from the scheme constants with beta = {beta}, cs2 = {cs2:.6}, lambda_bar = {lambda_bar}"
            );
            Ok(ExampleSetup {
                problem,
                scheme,
                lattice,
                grid,
                builder,
                notes,
            })
        }
        3 => {
            let grid = make_grid(
                &[(0.0, 1.0), (0.0, 1.0)],
                &[nx, nx],
                &[Boundary::DirichletExact, Boundary::DirichletExact],
            )?;
            let name = if case == 1 {
                LatticeName::RD2Q5I
            } else {
                LatticeName::RD2Q9
            };
            let lattice = build_lattice(name, &[THIRD, THIRD], &[c, c])?;
            let (scheme, beta) = example_scheme(example, case, cs2)?;
            let exact: ScalarFn = Arc::new(|x: &[f64; 3], t: f64| (x[0] + x[1] + t).exp());
            let problem = ProblemSpec {
                kind: PdeKind::Wave,
                velocity: [0.0; 3],
                alpha: 0.5,
                beta,
                lambda_bar: 0.0,
                source: None,
                exact: Some(exact),
                initial: Some(Arc::new(|x: &[f64; 3], _| (x[0] + x[1]).exp())),
                initial_dt: Some(Arc::new(|x: &[f64; 3], _| (x[0] + x[1]).exp())),
                dt,
                final_time: 1.0,
                second_level_init: SecondLevelInit::WaveTaylor,
            };
            let builder = LinearNcdeBuilder::new(&lattice, [0.0; 3], beta, 0.0);
            let notes = format!(
                "wave coefficient 0.5; gamma = {:.6} from beta = {beta}, cs2 = {cs2:.6}",
                0.5 / (beta * cs2)
            );
            Ok(ExampleSetup {
                problem,
                scheme,
                lattice,
                grid,
                builder,
                notes,
            })
        }
        _ => Err(HarnessError::UnknownExample { example, case }),
    }
}

/// Run one example case to its final time.
pub fn run_example(
    example: u32,
    case: u32,
    nx: usize,
    nt: usize,
    mode: ExecMode,
) -> Result<(ExampleSetup, RunResult), HarnessError> {
    let setup = example_problem(example, case, nx, nt)?;
    let result = run(
        &setup.problem,
        &setup.scheme,
        &setup.grid,
        &setup.lattice,
        &setup.builder,
        mode,
    )?;
    Ok((setup, result))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    Diffusive,
    Acoustic,
    Irregular,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub nx: usize,
    pub nt: usize,
    pub gre: f64,
    pub order: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    pub example: u32,
    pub case: u32,
    pub scaling: Scaling,
    pub notes: String,
    pub rows: Vec<ConvergenceRow>,
}

/// Published refinement ladders for the three examples.
pub fn default_ladder(example: u32) -> Vec<(usize, usize)> {
    match example {
        1 => vec![(10, 6), (20, 24), (40, 96), (80, 384)],
        2 => vec![(10, 12), (20, 48), (40, 192), (80, 768)],
        _ => vec![(5, 10), (10, 20), (20, 40), (40, 80)],
    }
}

fn detect_scaling(levels: &[(usize, usize)]) -> Scaling {
    let ratio_diff: Vec<f64> = levels
        .iter()
        .map(|&(nx, nt)| nx as f64 * nx as f64 / nt as f64)
        .collect();
    let ratio_ac: Vec<f64> = levels
        .iter()
        .map(|&(nx, nt)| nx as f64 / nt as f64)
        .collect();
    let near = |v: &[f64]| {
        v.iter()
            .all(|&x| (x - v[0]).abs() <= 1e-12 * v[0].abs().max(1.0))
    };
    if near(&ratio_diff) {
        Scaling::Diffusive
    } else if near(&ratio_ac) {
        Scaling::Acoustic
    } else {
        Scaling::Irregular
    }
}

/// Run a refinement ladder and collect errors and observed orders.
pub fn convergence_study(
    example: u32,
    case: u32,
    levels: &[(usize, usize)],
    mode: ExecMode,
) -> Result<ConvergenceTable, HarnessError> {
    if levels.len() < 2 {
        return Err(HarnessError::TooFewLevels);
    }
    let run_level = |&(nx, nt): &(usize, usize)| -> Result<(f64, String), HarnessError> {
        let (setup, result) = run_example(example, case, nx, nt, mode)?;
        let gre = result.diagnostics.gre.unwrap_or(f64::INFINITY);
        Ok((gre, setup.notes))
    };

    #[cfg(feature = "parallel")]
    let outcomes: Vec<(f64, String)> = {
        use rayon::prelude::*;
        levels
            .par_iter()
            .map(run_level)
            .collect::<Result<Vec<_>, _>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<(f64, String)> = levels
        .iter()
        .map(run_level)
        .collect::<Result<Vec<_>, _>>()?;

    let mut rows = Vec::with_capacity(levels.len());
    for (i, (&(nx, nt), (gre, _))) in levels.iter().zip(&outcomes).enumerate() {
        let order = if i == 0 {
            None
        } else {
            let prev = outcomes[i - 1].0;
            (prev.is_finite() && gre.is_finite() && *gre > 0.0)
                .then(|| (prev / gre).log2())
        };
        rows.push(ConvergenceRow {
            nx,
            nt,
            gre: *gre,
            order,
        });
    }
    Ok(ConvergenceTable {
        example,
        case,
        scaling: detect_scaling(levels),
        notes: outcomes[0].1.clone(),
        rows,
    })
}

/// GRE beyond which a table row is reported as blown up even when the field
/// magnitude stayed below the hard runtime threshold: a relative error above
/// one means no correct digits remain.
pub const GRE_BLOWUP: f64 = 1.0;

#[derive(Debug, Clone, Serialize)]
pub enum StabilityOutcome {
    Gre(f64),
    Blowup,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityRow {
    pub nx: usize,
    pub nt: usize,
    pub dx: f64,
    pub dt: f64,
    /// `|u|^2 / cs2` as an exact reduced fraction.
    pub ratio: (u64, u64),
    pub outcome: StabilityOutcome,
    /// Largest amplification modulus from the spectral scan of the frozen
    /// symbol.
    pub max_modulus: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityTable {
    pub rows: Vec<StabilityRow>,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Time-step sweep of the streaming scheme at fixed diffusion 0.01 and
/// velocity (1, 1): four rows from strongly unstable to comfortably stable.
/// Rows run with the full quadratic equilibrium (lambda_bar = 1), matching
/// the frozen symbol used for the per-row spectral scan.
pub fn stability_table(mode: ExecMode, scan_resolution: usize) -> Result<StabilityTable, HarnessError> {
    let levels = [(10usize, 6usize), (20, 24), (40, 96), (80, 384)];
    let mut rows = Vec::new();
    for (nx, nt) in levels {
        let setup = stability_row_setup(nx, nt)?;
        let result = run(
            &setup.problem,
            &setup.scheme,
            &setup.grid,
            &setup.lattice,
            &setup.builder,
            mode,
        )?;
        let gre_val = result.diagnostics.gre.unwrap_or(f64::INFINITY);
        let outcome = if result.diagnostics.blowup || !gre_val.is_finite() || gre_val > GRE_BLOWUP
        {
            StabilityOutcome::Blowup
        } else {
            StabilityOutcome::Gre(gre_val)
        };
        // u^2 / cs2 = 6 nx^2 / nt^2 exactly.
        let (num, den) = (6 * (nx * nx) as u64, (nt * nt) as u64);
        let g = gcd(num, den);

        let spec = crate::stability::frozen_ncde_spec(
            &setup.lattice,
            setup.problem.velocity,
            setup.problem.beta,
            1.0,
        );
        let dec = crate::stability::symbol_decomposition(&setup.lattice, &spec)
            .expect("frozen spec has unit zeroth moment");
        let (max_modulus, _) =
            crate::stability::spectral_scan(&setup.scheme, &dec, scan_resolution)
                .expect("streaming scheme symbol is explicit");

        rows.push(StabilityRow {
            nx,
            nt,
            dx: 1.0 / nx as f64,
            dt: 1.0 / nt as f64,
            ratio: (num / g, den / g),
            outcome,
            max_modulus,
        });
    }
    Ok(StabilityTable { rows })
}

/// Example-2 problem with the case-1 scheme at diffusion 0.01 (set by the
/// `(nx, nt)` pairing rather than the example ladder).
fn stability_row_setup(nx: usize, nt: usize) -> Result<ExampleSetup, HarnessError> {
    let mut setup = example_problem_with(2, 1, nx, nt, 1.0)?;
    debug_assert!((setup.problem.alpha - 0.01).abs() < 1e-12);
    setup.notes = format!("{} (stability sweep row)", setup.notes);
    Ok(setup)
}

fn fmt_sci(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{:.5e}", v)
    }
}

/// Write a convergence table as CSV: header `Nx,Nt,GRE,order`, order blank
/// on the first row, values in scientific notation with six significant
/// digits, `inf` for blown-up rows.
pub fn emit_csv(table: &ConvergenceTable, dest: &Path) -> Result<(), HarnessError> {
    let mut f = std::fs::File::create(dest)?;
    writeln!(f, "Nx,Nt,GRE,order")?;
    for row in &table.rows {
        let order = row.order.map_or(String::new(), fmt_sci);
        writeln!(f, "{},{},{},{}", row.nx, row.nt, fmt_sci(row.gre), order)?;
    }
    Ok(())
}

/// Write the stability sweep as CSV with the exact velocity/sound-speed
/// ratio and the scan maximum per row.
pub fn emit_stability_csv(table: &StabilityTable, dest: &Path) -> Result<(), HarnessError> {
    let mut f = std::fs::File::create(dest)?;
    writeln!(f, "dx,dt,u2_over_cs2,GRE,max_modulus")?;
    for row in &table.rows {
        let gre = match row.outcome {
            StabilityOutcome::Gre(v) => fmt_sci(v),
            StabilityOutcome::Blowup => "inf".to_string(),
        };
        writeln!(
            f,
            "1/{},1/{},{}/{},{},{}",
            row.nx,
            row.nt,
            row.ratio.0,
            row.ratio.1,
            gre,
            fmt_sci(row.max_modulus)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gre_hand_cases() {
        assert_eq!(gre(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(gre(&[2.0, 4.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(gre(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]).unwrap(), 1.0);
        assert!(matches!(
            gre(&[1.0], &[0.0]),
            Err(HarnessError::ZeroReference)
        ));
    }

    #[test]
    fn example1_derived_diffusion() {
        let setup = example_problem(1, 1, 10, 6).unwrap();
        assert!((setup.problem.alpha - 0.01).abs() < 1e-15);
        assert!((setup.lattice.cs2 - 0.12).abs() < 1e-15);
        assert!((setup.grid.spacing[0] - 0.1).abs() < 1e-15);
        // Source weights present on every example-1 case.
        for case in 1..=3 {
            let s = example_problem(1, case, 10, 6).unwrap();
            assert!((s.scheme.b_at(-1, 0) - 1.5).abs() < 1e-15);
            assert!((s.scheme.b_at(-1, -1) + 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn example2_case3_coefficients() {
        let setup = example_problem(2, 3, 10, 12).unwrap();
        let c = &setup.scheme;
        assert!((c.a_at(-1, 0) - 1.0).abs() < 1e-15);
        assert!((c.a_at(0, -1) + 1.0).abs() < 1e-15);
        assert!((c.a_at(1, -1) - 0.5).abs() < 1e-15);
        assert!((c.a_at(-1, -1) - 0.5).abs() < 1e-15);
        assert_eq!(setup.problem.beta, 0.5);
        assert!((setup.problem.alpha - 0.02).abs() < 1e-15);
    }

    #[test]
    fn example2_diffusion_is_002_on_ladder() {
        for (nx, nt) in default_ladder(2) {
            for case in 1..=3 {
                let setup = example_problem(2, case, nx, nt).unwrap();
                assert!(
                    (setup.problem.alpha - 0.02).abs() < 1e-14,
                    "case {case} at ({nx},{nt})"
                );
            }
        }
    }

    #[test]
    fn example3_gamma_values() {
        let setup = example_problem(3, 1, 5, 10).unwrap();
        assert_eq!(setup.lattice.num_velocities(), 5);
        assert!((setup.lattice.cs2 - 4.0 / 3.0).abs() < 1e-14);
        assert!((setup.scheme.a_at(0, 0) - 1.25).abs() < 1e-14);
        assert!((setup.scheme.a_at(1, 0) - 0.375).abs() < 1e-14);

        let setup = example_problem(3, 3, 5, 10).unwrap();
        assert_eq!(setup.lattice.num_velocities(), 9);
        assert!((setup.scheme.a_at(1, 0) - 0.5).abs() < 1e-14);
        assert!((setup.scheme.a_at(0, 0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn unknown_example_rejected() {
        assert!(matches!(
            example_problem(4, 1, 10, 10),
            Err(HarnessError::UnknownExample { .. })
        ));
        assert!(matches!(
            example_problem(2, 5, 10, 10),
            Err(HarnessError::UnknownExample { .. })
        ));
    }

    #[test]
    fn ladder_scaling_kinds() {
        assert_eq!(detect_scaling(&default_ladder(1)), Scaling::Diffusive);
        assert_eq!(detect_scaling(&default_ladder(2)), Scaling::Diffusive);
        assert_eq!(detect_scaling(&default_ladder(3)), Scaling::Acoustic);
        assert_eq!(detect_scaling(&[(10, 10), (20, 80)]), Scaling::Irregular);
    }

    #[test]
    fn study_needs_two_levels() {
        assert!(matches!(
            convergence_study(2, 1, &[(10, 12)], ExecMode::Sequential),
            Err(HarnessError::TooFewLevels)
        ));
    }

    #[test]
    fn ratio_column_exact() {
        let pairs = [
            (10usize, 6usize, (50u64, 3u64)),
            (20, 24, (25, 6)),
            (40, 96, (25, 24)),
            (80, 384, (25, 96)),
        ];
        for (nx, nt, expect) in pairs {
            let num = 6 * (nx * nx) as u64;
            let den = (nt * nt) as u64;
            let g = gcd(num, den);
            assert_eq!((num / g, den / g), expect);
        }
    }

    #[test]
    fn csv_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("table.csv");
        let table = ConvergenceTable {
            example: 2,
            case: 1,
            scaling: Scaling::Diffusive,
            notes: String::new(),
            rows: vec![
                ConvergenceRow {
                    nx: 10,
                    nt: 12,
                    gre: 0.544,
                    order: None,
                },
                ConvergenceRow {
                    nx: 20,
                    nt: 48,
                    gre: f64::INFINITY,
                    order: None,
                },
            ],
        };
        emit_csv(&table, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "Nx,Nt,GRE,order");
        assert_eq!(lines.next().unwrap(), "10,12,5.44000e-1,");
        assert_eq!(lines.next().unwrap(), "20,48,inf,");

        let empty = ConvergenceTable {
            example: 1,
            case: 1,
            scaling: Scaling::Diffusive,
            notes: String::new(),
            rows: vec![],
        };
        emit_csv(&empty, &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "Nx,Nt,GRE,order\n");
    }

    #[test]
    fn csv_deterministic_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        let table = convergence_study(
            2,
            1,
            &[(10, 12), (20, 48)],
            ExecMode::Sequential,
        )
        .unwrap();
        emit_csv(&table, &a).unwrap();
        let table2 = convergence_study(
            2,
            1,
            &[(10, 12), (20, 48)],
            ExecMode::Sequential,
        )
        .unwrap();
        emit_csv(&table2, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn orders_recomputable_from_rows() {
        let table = convergence_study(3, 1, &[(5, 10), (10, 20), (20, 40)], ExecMode::Sequential)
            .unwrap();
        for i in 1..table.rows.len() {
            let expect = (table.rows[i - 1].gre / table.rows[i].gre).log2();
            assert_eq!(table.rows[i].order.unwrap(), expect);
        }
    }
}
