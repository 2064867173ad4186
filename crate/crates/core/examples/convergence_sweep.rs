//! Stepsize sweep of the configurational-temperature error.
//!
//! Starts at `dt_start` and grows the stepsize by 15% until the run diverges
//! or the error exceeds 100%, then reports the log-log slope and the stepsize
//! at which the error reaches 10%.
//!
//! ```text
//! cargo run --release --example convergence_sweep -- aboba 4.5 [dt_start] [t_total] [replicas]
//! ```

use dpd::harness::{convergence_sweep, critical_stepsize};
use dpd::{Observable, RunConfig, Scheme};

fn main() -> dpd::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |k: usize, default: &str| args.get(k).cloned().unwrap_or_else(|| default.to_string());
    let integrator: Scheme = arg(0, "aboba").parse()?;
    let gamma: f64 = arg(1, "4.5").parse().expect("gamma");
    let dt_start: f64 = arg(2, "0.02").parse().expect("dt_start");
    let t_total: f64 = arg(3, "100").parse().expect("t_total");
    let n_replicas: usize = arg(4, "2").parse().expect("replicas");

    let base = RunConfig { integrator, gamma, t_total, n_replicas, ..RunConfig::default() };
    let sweep = convergence_sweep(&base, dt_start, 1.15, Observable::ConfigTemp, None)?;

    println!("{:>8} {:>12} {:>10}", "dt", "rel_error", "std_err");
    for row in &sweep.rows {
        match (row.rel_error, row.std_err) {
            (Some(e), Some(s)) => println!("{:>8.4} {e:>12.5} {s:>10.5}", row.dt),
            _ => println!("{:>8.4} {:>12}", row.dt, "diverged"),
        }
    }
    if let Some(slope) = sweep.loglog_slope(0.02, 0.09) {
        println!("log-log slope over dt in [0.02, 0.09]: {slope:.2}");
    }
    match critical_stepsize(&sweep, 0.1) {
        Ok(dt) => println!("critical stepsize (10% error): {dt:.4}"),
        Err(e) => println!("critical stepsize: {e}"),
    }
    let path = format!("sweep_{integrator}_gamma{gamma}.csv");
    std::fs::write(&path, sweep.to_csv()?)?;
    println!("wrote {path}");
    Ok(())
}
