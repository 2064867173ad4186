//! Numerical efficiency of the three integrators relative to velocity Verlet:
//! critical stepsize per millisecond of wall time, as a percentage.
//!
//! Pass sweep CSVs written by the `convergence_sweep` example to reuse them;
//! otherwise a short sweep is run for each method.
//!
//! ```text
//! cargo run --release --example efficiency -- [sweep_vv_gamma4.5.csv sweep_s1_gamma4.5.csv ...]
//! ```

use dpd::harness::{convergence_sweep, critical_stepsize, efficiency_table, time_per_step, EfficiencyInput};
use dpd::{Observable, RunConfig, Scheme, SweepResult};

fn main() -> dpd::Result<()> {
    let files: Vec<String> = std::env::args().skip(1).collect();
    let base = RunConfig { t_total: 40.0, n_replicas: 1, ..RunConfig::default() };

    let mut inputs = Vec::new();
    for scheme in Scheme::ALL {
        let sweep = match files.iter().find(|f| f.contains(&format!("_{}_", scheme.name()))) {
            Some(path) => SweepResult::read_csv(path)?,
            None => {
                println!("sweeping {scheme} (short desk run)...");
                let config = RunConfig { integrator: scheme, ..base.clone() };
                convergence_sweep(&config, 0.03, 1.15, Observable::ConfigTemp, Some(0.2))?
            }
        };
        // Timing protocol: fixed dt = 0.05, observables off.
        let timing_config = RunConfig { dt: 0.05, ..base.clone() };
        let ms = time_per_step(&timing_config, scheme, 2000)?;
        inputs.push(EfficiencyInput {
            method: scheme.name().to_string(),
            critical_dt: critical_stepsize(&sweep, 0.1).ok(),
            ms_per_step: ms,
        });
    }

    let table = efficiency_table(&inputs, "vv")?;
    println!("{:<8} {:>12} {:>12} {:>12}", "method", "critical dt", "ms/step", "efficiency");
    for row in &table.rows {
        println!(
            "{:<8} {:>12.4} {:>12.4} {:>11.1}%",
            row.method, row.critical_dt, row.ms_per_step, row.scaled_efficiency_pct
        );
    }
    for note in &table.notes {
        println!("note: {note}");
    }
    Ok(())
}
