use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mesofd::config::setup_from_ini;
use mesofd::harness::{
    convergence_study, default_ladder, emit_csv, emit_stability_csv, stability_table,
    ExampleSetup,
};
use mesofd::lattice::{build_lattice, validate_lattice, LatticeName};
use mesofd::scheme::{
    coefficient_moments, preset_by_name, recovered_pde, solve_three_level, SchemeCoefficients,
    StencilTargets,
};
use mesofd::stability::{
    frozen_ncde_spec, spectral_scan, symbol_decomposition, two_level_explicit_check, Verdict,
    MODULUS_TOL,
};
use mesofd::stepper::{run, ExecMode};

#[derive(Parser)]
#[command(
    name = "mesofd",
    about = "Equilibrium-distribution-function based finite-difference schemes: synthesis, stability analysis, and convergence studies"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a lattice model and print weights, sound speed, and validation
    /// residuals.
    Lattice(LatticeArgs),
    /// Coefficient-set tools.
    #[command(subcommand)]
    Scheme(SchemeCmd),
    /// Von Neumann analysis of a preset scheme with a frozen equilibrium.
    Stability(StabilityArgs),
    /// Run one benchmark problem and write the field plus diagnostics.
    Run(RunArgs),
    /// Run a refinement ladder (or the stability sweep) and write a CSV table.
    Converge(ConvergeArgs),
}

#[derive(Args)]
struct LatticeArgs {
    /// Lattice name (rd2q9, rd2q5i, rd2q5ii, rd3q27, rd3q19, rd3q9, rd3q7).
    #[arg(long)]
    name: LatticeName,
    /// Comma-separated per-axis d0 values.
    #[arg(long, value_delimiter = ',')]
    d0: Vec<f64>,
    /// Comma-separated per-axis speeds dx/dt.
    #[arg(long, value_delimiter = ',')]
    c: Vec<f64>,
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum SchemeCmd {
    /// Solve the three-level constraint system for given Taylor targets.
    Solve(SolveArgs),
    /// Print a named preset coefficient set.
    Preset(PresetArgs),
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, allow_negative_numbers = true)]
    a0: f64,
    #[arg(long = "A10", allow_negative_numbers = true)]
    a10: f64,
    #[arg(long = "A11", allow_negative_numbers = true)]
    a11: f64,
    #[arg(long = "A21", allow_negative_numbers = true)]
    a21: f64,
    #[arg(long = "A22", allow_negative_numbers = true)]
    a22: f64,
    /// Time step used for the recovered-equation report.
    #[arg(long, default_value_t = 1.0)]
    dt: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Lattice sound speed squared for the report.
    #[arg(long, default_value_t = 1.0 / 3.0)]
    cs2: f64,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct PresetArgs {
    /// srt, trt, simplified_lb, or wave.
    #[arg(long)]
    name: String,
    /// Odd relaxation rate for trt.
    #[arg(long)]
    s_minus: Option<f64>,
    /// Relaxation time for simplified_lb.
    #[arg(long)]
    tau: Option<f64>,
    /// Second-moment weight for wave.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct StabilityArgs {
    /// srt, trt, simplified_lb, or wave.
    #[arg(long)]
    preset: String,
    #[arg(long)]
    s_minus: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value = "rd2q9")]
    lattice: LatticeName,
    /// Per-axis d0 (one value is broadcast).
    #[arg(long, value_delimiter = ',', default_value = "0.3333333333333333")]
    d0: Vec<f64>,
    /// Advection velocity components.
    #[arg(long, value_delimiter = ',', default_value = "0,0", allow_negative_numbers = true)]
    u: Vec<f64>,
    /// Target diffusion (or wave) coefficient; fixes cs2 together with dt.
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    dt: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Weight of the uu term in the frozen equilibrium (0 or 1).
    #[arg(long, default_value_t = 1.0)]
    lambda_bar: f64,
    /// Scan resolution per axis.
    #[arg(long, default_value_t = 64)]
    scan: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    example: Option<u32>,
    #[arg(long, default_value_t = 1)]
    case: u32,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    nt: Option<usize>,
    /// Weight of the uu equilibrium term for the convection-diffusion
    /// examples.
    #[arg(long)]
    lambda_bar: Option<f64>,
    /// INI config defining a custom problem (alternative to --example).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path (x,y,phi); diagnostics go to <stem>.diag.json.
    #[arg(long)]
    out: PathBuf,
    /// Run the node loops sequentially.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct ConvergeArgs {
    #[arg(long)]
    example: Option<u32>,
    #[arg(long, default_value_t = 1)]
    case: u32,
    /// Emit the time-step stability sweep instead of a refinement ladder.
    #[arg(long)]
    stability_table: bool,
    /// INI config for a custom problem; the ladder refines it 4 times.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    sequential: bool,
}

fn preset_param(name: &str, s_minus: Option<f64>, tau: Option<f64>, gamma: Option<f64>) -> Option<f64> {
    match name.to_ascii_lowercase().as_str() {
        "trt" | "trt_magic" => s_minus,
        "simplified_lb" | "slb" => tau,
        "wave" => gamma,
        _ => None,
    }
}

fn scheme_summary(c: &SchemeCoefficients) -> serde_json::Value {
    let mc = coefficient_moments(c);
    serde_json::json!({
        "shifted": c.shifted,
        "a": c.a.iter().map(|(&(k, q), v)| serde_json::json!({"k": k, "q": q, "value": v})).collect::<Vec<_>>(),
        "b": c.b.iter().map(|(&(k, q), v)| serde_json::json!({"k": k, "q": q, "value": v})).collect::<Vec<_>>(),
        "moment_constants": {
            "A": mc.a.iter().map(|(&(l, m), v)| serde_json::json!({"l": l, "m": m, "value": v})).collect::<Vec<_>>(),
            "B": mc.b.iter().map(|(&(l, m), v)| serde_json::json!({"l": l, "m": m, "value": v})).collect::<Vec<_>>(),
        },
    })
}

fn print_scheme(c: &SchemeCoefficients) {
    let mc = coefficient_moments(c);
    println!("coefficients (k, q) -> a:");
    for (&(k, q), v) in &c.a {
        println!("  a[{k:>2},{q:>2}] = {v:+.6}");
    }
    if !c.b.is_empty() {
        println!("source weights (k, q) -> b:");
        for (&(k, q), v) in &c.b {
            println!("  b[{k:>2},{q:>2}] = {v:+.6}");
        }
    }
    println!("moment constants:");
    for l in 0..=3u32 {
        let row: Vec<String> = (0..=l)
            .map(|m| format!("A{l}{m} = {:+.6}", mc.a_at(l, m)))
            .collect();
        println!("  {}", row.join("  "));
    }
    if !c.b.is_empty() {
        for l in 0..=2u32 {
            let row: Vec<String> = (0..=l)
                .map(|m| format!("B{l}{m} = {:+.6}", mc.b_at(l, m)))
                .collect();
            println!("  {}", row.join("  "));
        }
    }
}

fn cmd_lattice(args: LatticeArgs) -> Result<()> {
    let lat = build_lattice(args.name, &args.d0, &args.c)?;
    let diag = validate_lattice(&lat);
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&serde_json::json!({
                "lattice": lat,
                "validation": diag,
            }))?
        );
        return Ok(());
    }
    println!("{} (d = {}, q = {})", lat.name, lat.dim, lat.num_velocities());
    println!("cs2 = {:.12}", lat.cs2);
    for j in 0..lat.num_velocities() {
        let d = lat.directions[j];
        println!(
            "  j = {j:>2}: dir = ({:>2},{:>2},{:>2})  w = {:.12}",
            d[0], d[1], d[2], lat.weights[j]
        );
    }
    println!("validation:");
    for c in &diag.checks {
        println!(
            "  {:<32} {}  residual = {:.3e}",
            c.name,
            if c.passed { "pass" } else { "FAIL" },
            c.residual
        );
    }
    if !diag.all_passed() {
        bail!("lattice validation failed");
    }
    Ok(())
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let c = solve_three_level(&StencilTargets {
        a0: args.a0,
        a10: args.a10,
        a11: args.a11,
        a21: args.a21,
        a22: args.a22,
        source_targets: None,
    });
    let report = recovered_pde(&c, args.dt, args.beta, args.cs2);
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&serde_json::json!({
                "scheme": scheme_summary(&c),
                "recovered": report,
            }))?
        );
        return Ok(());
    }
    print_scheme(&c);
    println!("recovered equation: {report:?}");
    Ok(())
}

fn cmd_preset(args: PresetArgs) -> Result<()> {
    let param = preset_param(&args.name, args.s_minus, args.tau, args.gamma);
    let c = preset_by_name(&args.name, param)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&scheme_summary(&c))?);
        return Ok(());
    }
    print_scheme(&c);
    Ok(())
}

fn cmd_stability(args: StabilityArgs) -> Result<()> {
    let param = preset_param(&args.preset, args.s_minus, args.tau, args.gamma);
    let c = preset_by_name(&args.preset, param)?;
    let mc = coefficient_moments(&c);
    // cs2 follows from the requested coefficient: alpha = -(A22/A10) dt beta cs2
    // for convection-diffusion shapes, alpha = A22 beta cs2 for wave shapes.
    let a10 = mc.a_at(1, 0);
    let a22 = mc.a_at(2, 2);
    let cs2 = if a10.abs() > 1e-12 {
        -args.alpha * a10 / (a22 * args.dt * args.beta)
    } else {
        args.alpha / (a22 * args.beta)
    };
    if cs2 <= 0.0 {
        bail!("derived cs2 = {cs2} is not positive");
    }
    let d0: Vec<f64> = if args.d0.len() == 1 {
        vec![args.d0[0]; args.lattice.dim()]
    } else {
        args.d0.clone()
    };
    let speeds: Vec<f64> = d0.iter().map(|v| (cs2 / v).sqrt()).collect();
    let lat = build_lattice(args.lattice, &d0, &speeds)?;
    let mut u = [0.0; 3];
    for (a, v) in u.iter_mut().zip(&args.u) {
        *a = *v;
    }
    let spec = frozen_ncde_spec(&lat, u, args.beta, args.lambda_bar);
    let dec = symbol_decomposition(&lat, &spec)?;
    let closed_form = two_level_explicit_check(&c, &dec).ok();
    let (max_modulus, witness) = spectral_scan(&c, &dec, args.scan)?;
    let verdict = if max_modulus <= 1.0 + MODULUS_TOL {
        Verdict::Stable
    } else {
        Verdict::Unstable
    };

    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&serde_json::json!({
                "cs2": cs2,
                "closed_form": closed_form,
                "scan": {"max_modulus": max_modulus, "witness": witness, "resolution": args.scan},
                "verdict": verdict,
            }))?
        );
        return Ok(());
    }
    println!("lattice {} with cs2 = {cs2:.9}", lat.name);
    if let Some(rep) = &closed_form {
        println!("closed-form conditions ({:?}):", rep.verdict);
        for cond in &rep.conditions {
            println!(
                "  {:<28} {}  value = {:+.6e}  bound = {:+.6e}",
                cond.name,
                if cond.passed { "pass" } else { "FAIL" },
                cond.value,
                cond.bound
            );
        }
    } else {
        println!("closed-form two-level conditions not applicable to this scheme shape");
    }
    println!(
        "scan (res {}): max |lambda| = {:.9} at xi = ({:+.4}, {:+.4}, {:+.4})",
        args.scan, max_modulus, witness[0], witness[1], witness[2]
    );
    println!("verdict: {verdict:?}");
    Ok(())
}

fn load_setup(
    example: Option<u32>,
    case: u32,
    nx: Option<usize>,
    nt: Option<usize>,
    lambda_bar: Option<f64>,
    config: &Option<PathBuf>,
) -> Result<ExampleSetup> {
    if let Some(path) = config {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        return Ok(setup_from_ini(&text)?);
    }
    let example = example.context("--example or --config is required")?;
    let (dnx, dnt) = default_ladder(example)[0];
    let nx = nx.unwrap_or(dnx);
    let nt = nt.unwrap_or(dnt);
    let lb = lambda_bar.unwrap_or_else(|| mesofd::harness::default_lambda_bar(example));
    Ok(mesofd::harness::example_problem_with(
        example, case, nx, nt, lb,
    )?)
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mode = if args.sequential {
        ExecMode::Sequential
    } else {
        ExecMode::Parallel
    };
    let setup = load_setup(
        args.example,
        args.case,
        args.nx,
        args.nt,
        args.lambda_bar,
        &args.config,
    )?;
    let result = run(
        &setup.problem,
        &setup.scheme,
        &setup.grid,
        &setup.lattice,
        &setup.builder,
        mode,
    )?;

    let mut f = std::fs::File::create(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    writeln!(f, "x,y,phi")?;
    let field = result.state.newest();
    for idx in 0..setup.grid.num_nodes() {
        let x = setup.grid.position(idx);
        writeln!(f, "{:.12e},{:.12e},{:.12e}", x[0], x[1], field[idx])?;
    }

    let diag_path = args.out.with_extension("diag.json");
    std::fs::write(
        &diag_path,
        serde_json::to_string_pretty(&serde_json::json!({
            "notes": setup.notes,
            "diagnostics": result.diagnostics,
        }))?,
    )?;
    println!(
        "wrote {} and {}; gre = {:?}, blowup = {}",
        args.out.display(),
        diag_path.display(),
        result.diagnostics.gre,
        result.diagnostics.blowup
    );
    Ok(())
}

fn cmd_converge(args: ConvergeArgs) -> Result<()> {
    let mode = if args.sequential {
        ExecMode::Sequential
    } else {
        ExecMode::Parallel
    };
    if args.stability_table {
        let table = stability_table(mode, 64)?;
        emit_stability_csv(&table, &args.out)?;
        println!("wrote {}", args.out.display());
        return Ok(());
    }
    if let Some(path) = &args.config {
        // Refine the configured problem four times under its own scaling.
        let text = std::fs::read_to_string(path)?;
        let base = setup_from_ini(&text)?;
        let nx0 = (base.grid.spacing[0].recip()).round() as usize;
        let nt0 = (base.problem.dt.recip()).round() as usize;
        let diffusive = base.problem.kind == mesofd::stepper::PdeKind::Ncde;
        let mut rows = Vec::new();
        for i in 0..4usize {
            let nx = nx0 << i;
            let nt = if diffusive { nt0 << (2 * i) } else { nt0 << i };
            let text_scaled = scale_config(&text, nx, nt);
            let setup = setup_from_ini(&text_scaled)?;
            let result = run(
                &setup.problem,
                &setup.scheme,
                &setup.grid,
                &setup.lattice,
                &setup.builder,
                mode,
            )?;
            rows.push(mesofd::harness::ConvergenceRow {
                nx,
                nt,
                gre: result.diagnostics.gre.unwrap_or(f64::INFINITY),
                order: None,
            });
        }
        for i in 1..rows.len() {
            let (prev, cur) = (rows[i - 1].gre, rows[i].gre);
            if prev.is_finite() && cur.is_finite() && cur > 0.0 {
                rows[i].order = Some((prev / cur).log2());
            }
        }
        let table = mesofd::harness::ConvergenceTable {
            example: 0,
            case: 0,
            scaling: if diffusive {
                mesofd::harness::Scaling::Diffusive
            } else {
                mesofd::harness::Scaling::Acoustic
            },
            notes: base.notes,
            rows,
        };
        emit_csv(&table, &args.out)?;
        println!("wrote {}", args.out.display());
        return Ok(());
    }
    let example = args.example.context("--example or --config is required")?;
    let table = convergence_study(example, args.case, &default_ladder(example), mode)?;
    emit_csv(&table, &args.out)?;
    println!("wrote {} ({})", args.out.display(), table.notes);
    Ok(())
}

/// Rewrite the nx/nt keys of a config for one ladder level.
fn scale_config(text: &str, nx: usize, nt: usize) -> String {
    text.lines()
        .map(|line| {
            let key = line.split('=').next().unwrap_or("").trim();
            match key {
                "nx" => format!("nx = {nx}"),
                "nt" => format!("nt = {nt}"),
                _ => line.to_string(),
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Lattice(args) => cmd_lattice(args),
        Cmd::Scheme(SchemeCmd::Solve(args)) => cmd_solve(args),
        Cmd::Scheme(SchemeCmd::Preset(args)) => cmd_preset(args),
        Cmd::Stability(args) => cmd_stability(args),
        Cmd::Run(args) => cmd_run(args),
        Cmd::Converge(args) => cmd_converge(args),
    }
}
