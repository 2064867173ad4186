//! Equilibrium run with the standard parameter set.
//!
//! ```text
//! cargo run --release --example equilibrium -- [aboba|s1|vv] [dt] [t_total]
//! ```

use dpd::harness::run_simulation;
use dpd::{Observable, RunConfig, Scheme};

fn main() -> dpd::Result<()> {
    let mut args = std::env::args().skip(1);
    let integrator: Scheme = args.next().as_deref().unwrap_or("aboba").parse()?;
    let dt = args.next().map_or(Ok(0.05), |s| s.parse()).expect("dt must be a number");
    let t_total = args.next().map_or(Ok(50.0), |s| s.parse()).expect("t_total must be a number");

    let config = RunConfig {
        integrator,
        dt,
        t_total,
        n_replicas: 2,
        outputs: "out/equilibrium".into(),
        ..RunConfig::default()
    };
    println!("{integrator}: N={} rho={} gamma={} dt={dt}, {} steps x {} replicas", config.n_particles, config.density, config.gamma, config.steps(), config.n_replicas);

    let report = run_simulation(&config)?;
    if let Some((step, why)) = report.diverged() {
        println!("diverged at step {step}: {why}");
        return Ok(());
    }
    let (tc, tc_err) = report.estimate(Observable::ConfigTemp)?;
    let (tk, tk_err) = report.estimate(Observable::KineticTemp)?;
    println!("configurational temperature {tc:.4} +/- {tc_err:.4}");
    println!("kinetic temperature         {tk:.4} +/- {tk_err:.4}");
    println!("potential energy / N        {:.4}", report.merged_series()?.mean_potential_energy()? / config.n_particles as f64);
    for path in report.write_outputs()? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
