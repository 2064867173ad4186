//! Shear viscosity from Lees–Edwards Couette flow at γ = 450, κ = 0.2.
//!
//! Each scheme is run at a few stepsizes and compared against the S1
//! dt = 0.001 reference in `tests/data/viscosity_reference.csv`. With
//! `--reference` the reference is regenerated (a few minutes).
//!
//! ```text
//! cargo run --release --example viscosity -- [dt ...]
//! cargo run --release --example viscosity -- --reference
//! ```

use std::path::Path;

use dpd::harness::run_simulation;
use dpd::{Boundary, RunConfig, Scheme};

const REFERENCE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/viscosity_reference.csv");

fn shear_config(integrator: Scheme, dt: f64) -> RunConfig {
    RunConfig {
        integrator,
        dt,
        gamma: 450.0,
        boundary: Boundary::LeesEdwards,
        shear_rate: 0.2,
        stress: true,
        ..RunConfig::desk()
    }
}

fn main() -> dpd::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.first().map(String::as_str) == Some("--reference") {
        let config = shear_config(Scheme::S1, 0.001);
        println!("reference: S1 dt=0.001, {} steps x {} replicas", config.steps(), config.n_replicas);
        let eta = run_simulation(&config)?.viscosity()?;
        let text = format!(
            "# S1 dt=0.001 gamma=450 shear_rate=0.2 n=500 t_total={} replicas={} seed={}\neta = {}\nstd_err = {}\n",
            config.t_total, config.n_replicas, config.seed, eta.eta, eta.std_err
        );
        std::fs::write(REFERENCE, text)?;
        println!("eta = {:.4} +/- {:.4}, wrote {REFERENCE}", eta.eta, eta.std_err);
        return Ok(());
    }

    let dts: Vec<f64> = if args.is_empty() {
        vec![0.005, 0.012, 0.022]
    } else {
        args.iter().map(|s| s.parse().expect("numeric dt")).collect()
    };
    let reference = Path::new(REFERENCE)
        .exists()
        .then(|| std::fs::read_to_string(REFERENCE).ok())
        .flatten()
        .and_then(|t| t.lines().find_map(|l| l.strip_prefix("eta = ").and_then(|v| v.trim().parse::<f64>().ok())));
    match reference {
        Some(r) => println!("reference eta {r:.4}"),
        None => println!("no reference at {REFERENCE}; run with --reference for relative errors"),
    }
    println!("{:>7} {:>6} {:>9} {:>8} {:>9}", "scheme", "dt", "eta", "+/-", "rel.err");
    for scheme in [Scheme::S1, Scheme::Aboba] {
        for &dt in &dts {
            let eta = run_simulation(&shear_config(scheme, dt))?.viscosity()?;
            let rel = reference.map_or(f64::NAN, |r| (eta.eta / r - 1.0).abs());
            println!("{:>7} {dt:>6} {:>9.4} {:>8.4} {rel:>9.3}", scheme.name(), eta.eta, eta.std_err);
        }
    }
    Ok(())
}
