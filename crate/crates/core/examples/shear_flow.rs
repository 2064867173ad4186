//! Planar Couette flow under Lees–Edwards boundaries.
//!
//! Prints the binned streaming velocity against height, its fitted slope
//! (which should match the imposed shear rate) and the peculiar kinetic
//! temperature.
//!
//! ```text
//! cargo run --release --example shear_flow -- [gamma] [shear_rate] [dt]
//! ```

use dpd::harness::run_simulation;
use dpd::{Boundary, Observable, RunConfig, Scheme};

fn main() -> dpd::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).map(|s| s.parse().expect("numeric argument")).collect();
    let gamma = args.first().copied().unwrap_or(450.0);
    let shear_rate = args.get(1).copied().unwrap_or(0.2);
    let dt = args.get(2).copied().unwrap_or(0.01);

    let config = RunConfig {
        integrator: Scheme::Aboba,
        gamma,
        dt,
        t_total: 40.0,
        n_replicas: 2,
        boundary: Boundary::LeesEdwards,
        shear_rate,
        stress: true,
        profile_bins: 12,
        ..RunConfig::default()
    };
    let report = run_simulation(&config)?;
    let profile = report.merged_profile().expect("profile enabled");

    println!("{:>8} {:>10} {:>10}", "y", "<v_x>", "kappa*y");
    for (y, v) in profile.profile() {
        println!("{y:>8.3} {v:>10.4} {:>10.4}", shear_rate * y);
    }
    println!("fitted slope {:.4} (imposed {shear_rate})", profile.slope().unwrap_or(f64::NAN));
    let (t, err) = report.estimate(Observable::KineticTemp)?;
    println!("peculiar kinetic temperature {t:.4} +/- {err:.4}");
    let eta = report.viscosity()?;
    println!("shear viscosity {:.3} +/- {:.3}", eta.eta, eta.std_err);
    let crossings: i64 = report.replicas.iter().map(|r| r.net_y_crossings).sum();
    println!("net boundary crossings {crossings}");
    Ok(())
}
