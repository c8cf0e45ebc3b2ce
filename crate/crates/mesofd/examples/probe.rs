use mesofd::harness::{convergence_study, default_ladder, stability_table};
use mesofd::stepper::ExecMode;

fn main() {
    for example in [1u32, 2, 3] {
        for case in 1u32..=3 {
            let t0 = std::time::Instant::now();
            let table =
                convergence_study(example, case, &default_ladder(example), ExecMode::Parallel)
                    .unwrap();
            print!("example {example} case {case}:");
            for row in &table.rows {
                print!(" {:.3e}({})", row.gre, row.order.map_or("-".into(), |o| format!("{o:.2}")));
            }
            println!("  [{:.1}s]", t0.elapsed().as_secs_f64());
        }
    }
    let t0 = std::time::Instant::now();
    let table = stability_table(ExecMode::Parallel, 64).unwrap();
    for row in &table.rows {
        println!(
            "stability nx={} nt={} ratio={}/{} outcome={:?} maxmod={:.6}",
            row.nx, row.nt, row.ratio.0, row.ratio.1, row.outcome, row.max_modulus
        );
    }
    println!("stability table [{:.1}s]", t0.elapsed().as_secs_f64());
}
