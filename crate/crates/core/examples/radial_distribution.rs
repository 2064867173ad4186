//! Radial distribution function at a large stepsize compared against a
//! small-stepsize reference.
//!
//! With `--reference` the reference itself is regenerated (S1, dt = 0.001)
//! and written to `tests/data/rdf_reference.csv`; this takes several minutes.
//!
//! ```text
//! cargo run --release --example radial_distribution -- [aboba|s1|vv] [dt]
//! cargo run --release --example radial_distribution -- --reference
//! ```

use std::path::Path;

use dpd::harness::{rdf_csv, read_rdf_csv, run_simulation};
use dpd::{RunConfig, Scheme};

pub const REFERENCE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/rdf_reference.csv");

fn rdf_config(integrator: Scheme, dt: f64) -> RunConfig {
    RunConfig {
        integrator,
        dt,
        rdf: true,
        rdf_bin_width: 0.01,
        rdf_max_r: Some(2.0),
        ..RunConfig::default()
    }
}

fn main() -> dpd::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.first().map(String::as_str) == Some("--reference") {
        let config = RunConfig { t_total: 50.0, n_replicas: 4, rdf_every: 8, seed: 1000, ..rdf_config(Scheme::S1, 0.001) };
        println!("reference: S1 dt=0.001, {} steps x {} replicas", config.steps(), config.n_replicas);
        let g = run_simulation(&config)?.merged_rdf()?.expect("rdf enabled");
        std::fs::write(REFERENCE, rdf_csv(&g))?;
        println!("wrote {REFERENCE}");
        return Ok(());
    }

    let integrator: Scheme = args.first().map_or("aboba", String::as_str).parse()?;
    let dt: f64 = args.get(1).map_or(0.05, |s| s.parse().expect("dt"));
    let config = RunConfig { t_total: 320.0, n_replicas: 4, rdf_every: 1, ..rdf_config(integrator, dt) };
    let report = run_simulation(&config)?;
    let g = report.merged_rdf()?.expect("rdf enabled");

    if !Path::new(REFERENCE).exists() {
        println!("no reference at {REFERENCE}; run with --reference first");
        return Ok(());
    }
    let reference = read_rdf_csv(REFERENCE)?;
    let worst = g
        .iter()
        .zip(&reference)
        .filter(|((r, _), _)| (0.2..=1.5).contains(r))
        .map(|((r, a), (_, b))| (*r, (a - b).abs()))
        .fold((0.0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    println!("{integrator} dt={dt}: max |g - g_ref| over r in [0.2, 1.5] = {:.4} at r = {:.3}", worst.1, worst.0);
    println!("{:>6} {:>8} {:>8}", "r", "g", "g_ref");
    for ((r, a), (_, b)) in g.iter().zip(&reference).step_by(10) {
        println!("{r:>6.3} {a:>8.4} {b:>8.4}");
    }
    Ok(())
}
