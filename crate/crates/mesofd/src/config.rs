//! INI-style run configuration for custom problems.
//!
//! Sections `[problem]`, `[scheme]`, `[grid]` with `key = value` lines;
//! `#` or `;` start comments. Custom convection-diffusion problems run the
//! manufactured solution `exp(-2 alpha pi^2 t) cos(pi (x+y) - pi (ux+uy) t)`
//! on `[0, 2]^2`; wave problems run `exp(x + y + sqrt(2 alpha) t)` on
//! `[0, 1]^2` with exact Dirichlet data.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::harness::ExampleSetup;
use crate::lattice::{build_lattice, LatticeName};
use crate::scheme::{solve_three_level, StencilTargets};
use crate::stepper::{
    make_grid, Boundary, LinearNcdeBuilder, PdeKind, ProblemSpec, ScalarFn, SecondLevelInit,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {0}: expected `key = value` or `[section]`")]
    Malformed(usize),
    #[error("unknown section `{0}`")]
    UnknownSection(String),
    #[error("unknown key `{0}` in section `{1}`")]
    UnknownKey(String, String),
    #[error("key `{0}`: {1}")]
    BadValue(String, String),
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error(transparent)]
    Harness(#[from] crate::harness::HarnessError),
    #[error(transparent)]
    Lattice(#[from] crate::lattice::LatticeError),
    #[error(transparent)]
    Step(#[from] crate::stepper::StepError),
}

const KEYS: &[(&str, &str)] = &[
    ("problem", "pde"),
    ("problem", "ux"),
    ("problem", "uy"),
    ("problem", "alpha"),
    ("problem", "beta"),
    ("problem", "T"),
    ("scheme", "a0"),
    ("scheme", "A10"),
    ("scheme", "A11"),
    ("scheme", "A21"),
    ("scheme", "A22"),
    ("grid", "lattice"),
    ("grid", "d0"),
    ("grid", "nx"),
    ("grid", "nt"),
    ("grid", "boundary"),
];

/// Parsed key/value view of the file, keyed by `(section, key)`.
pub fn parse_ini(text: &str) -> Result<BTreeMap<(String, String), String>, ConfigError> {
    let mut out = BTreeMap::new();
    let mut section = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = name.trim().to_string();
            if !["problem", "scheme", "grid"].contains(&section.as_str()) {
                return Err(ConfigError::UnknownSection(section));
            }
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Malformed(lineno + 1));
        };
        let key = key.trim().to_string();
        if !KEYS.contains(&(section.as_str(), key.as_str())) {
            return Err(ConfigError::UnknownKey(key, section));
        }
        out.insert((section.clone(), key), value.trim().to_string());
    }
    Ok(out)
}

fn get_f64(
    map: &BTreeMap<(String, String), String>,
    section: &str,
    key: &str,
    default: Option<f64>,
) -> Result<f64, ConfigError> {
    match map.get(&(section.to_string(), key.to_string())) {
        Some(v) => v
            .parse()
            .map_err(|e| ConfigError::BadValue(key.to_string(), format!("{e}"))),
        None => default.ok_or(ConfigError::Missing(Box::leak(
            format!("{section}.{key}").into_boxed_str(),
        ))),
    }
}

fn get_usize(
    map: &BTreeMap<(String, String), String>,
    section: &str,
    key: &str,
) -> Result<usize, ConfigError> {
    let v = map
        .get(&(section.to_string(), key.to_string()))
        .ok_or(ConfigError::Missing(Box::leak(
            format!("{section}.{key}").into_boxed_str(),
        )))?;
    v.parse()
        .map_err(|e| ConfigError::BadValue(key.to_string(), format!("{e}")))
}

/// Build a complete run setup from INI text.
pub fn setup_from_ini(text: &str) -> Result<ExampleSetup, ConfigError> {
    let map = parse_ini(text)?;
    let get = |s: &str, k: &str| map.get(&(s.to_string(), k.to_string()));

    let pde = match get("problem", "pde").map(|s| s.as_str()) {
        None | Some("ncde") => PdeKind::Ncde,
        Some("wave") => PdeKind::Wave,
        Some(other) => {
            return Err(ConfigError::BadValue(
                "pde".into(),
                format!("expected ncde or wave, got {other}"),
            ))
        }
    };
    let ux = get_f64(&map, "problem", "ux", Some(0.0))?;
    let uy = get_f64(&map, "problem", "uy", Some(0.0))?;
    let alpha = get_f64(&map, "problem", "alpha", None)?;
    let beta = get_f64(&map, "problem", "beta", Some(1.0))?;
    let final_time = get_f64(&map, "problem", "T", Some(1.0))?;

    let nx = get_usize(&map, "grid", "nx")?;
    let nt = get_usize(&map, "grid", "nt")?;
    let lattice_name: LatticeName = get("grid", "lattice")
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(LatticeName::RD2Q9);
    let d0: Vec<f64> = match get("grid", "d0") {
        None => vec![1.0 / 3.0; 2],
        Some(v) => {
            let parts: Result<Vec<f64>, _> = v.split(',').map(|p| p.trim().parse()).collect();
            let parts =
                parts.map_err(|e| ConfigError::BadValue("d0".into(), format!("{e}")))?;
            if parts.len() == 1 {
                vec![parts[0]; 2]
            } else {
                parts
            }
        }
    };
    let boundary = match get("grid", "boundary").map(|s| s.as_str()) {
        Some("periodic") => Boundary::Periodic,
        Some("dirichlet") | Some("dirichlet_exact") => Boundary::DirichletExact,
        None => match pde {
            PdeKind::Ncde => Boundary::Periodic,
            PdeKind::Wave => Boundary::DirichletExact,
        },
        Some(other) => {
            return Err(ConfigError::BadValue(
                "boundary".into(),
                format!("expected periodic or dirichlet, got {other}"),
            ))
        }
    };
    if pde == PdeKind::Wave && boundary == Boundary::Periodic {
        return Err(ConfigError::BadValue(
            "boundary".into(),
            "the wave manufactured solution needs dirichlet boundaries".into(),
        ));
    }

    let dt = 1.0 / nt as f64;
    let dx = 1.0 / nx as f64;
    let c = dx / dt;

    let targets = StencilTargets {
        a0: get_f64(&map, "scheme", "a0", Some(0.0))?,
        a10: get_f64(&map, "scheme", "A10", Some(if pde == PdeKind::Wave { 0.0 } else { -1.0 }))?,
        a11: get_f64(&map, "scheme", "A11", Some(if pde == PdeKind::Wave { 0.0 } else { -1.0 }))?,
        a21: get_f64(&map, "scheme", "A21", Some(0.0))?,
        a22: get_f64(&map, "scheme", "A22", Some(0.5))?,
        source_targets: None,
    };
    let scheme = solve_three_level(&targets);
    let lattice = build_lattice(lattice_name, &d0, &vec![c; d0.len()])?;

    let (domain, cells): ([(f64, f64); 2], [usize; 2]) = match pde {
        PdeKind::Ncde => ([(0.0, 2.0), (0.0, 2.0)], [2 * nx, 2 * nx]),
        PdeKind::Wave => ([(0.0, 1.0), (0.0, 1.0)], [nx, nx]),
    };
    let grid = make_grid(&domain, &cells, &[boundary, boundary])?;

    const PI: f64 = std::f64::consts::PI;
    let (exact, initial_dt, second_level_init): (ScalarFn, Option<ScalarFn>, _) = match pde {
        PdeKind::Ncde => {
            let usum = ux + uy;
            let a = alpha;
            let f: ScalarFn = Arc::new(move |x: &[f64; 3], t: f64| {
                (-2.0 * a * PI * PI * t).exp() * (PI * (x[0] + x[1]) - PI * usum * t).cos()
            });
            (f, None, SecondLevelInit::ExactSolution)
        }
        PdeKind::Wave => {
            let speed = (2.0 * alpha).sqrt();
            let f: ScalarFn =
                Arc::new(move |x: &[f64; 3], t: f64| (x[0] + x[1] + speed * t).exp());
            let d: ScalarFn =
                Arc::new(move |x: &[f64; 3], _| speed * (x[0] + x[1]).exp());
            (f, Some(d), SecondLevelInit::WaveTaylor)
        }
    };

    let u = [ux, uy, 0.0];
    let builder = LinearNcdeBuilder::new(&lattice, u, beta, 0.0);
    let problem = ProblemSpec {
        kind: pde,
        velocity: u,
        alpha,
        beta,
        lambda_bar: 0.0,
        source: None,
        exact: Some(exact),
        initial: None,
        initial_dt,
        dt,
        final_time,
        second_level_init,
    };
    // Surface inconsistent alpha declarations here rather than mid-run.
    crate::stepper::check_problem_scheme(&problem, &scheme, &lattice)?;
    let notes = format!(
        "custom problem from config; lattice {lattice_name}, cs2 = {:.6}",
        lattice.cs2
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
