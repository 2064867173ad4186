//! With the conservative force switched off the fluid is an ideal gas:
//! g(r) = 1, kinetic temperature kT and mean diagonal stress -ρkT, each within
//! three standard errors estimated from the spread across replicas.

use dpd::harness::run_simulation;
use dpd::{Observable, RunConfig, Scheme};

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn ideal(integrator: Scheme) -> RunConfig {
    RunConfig {
        n_particles: 300,
        a: 0.0,
        integrator,
        dt: 0.01,
        t_total: 15.0,
        n_replicas: 16,
        rdf: true,
        rdf_bin_width: 0.25,
        rdf_max_r: Some(1.5),
        rdf_every: 5,
        stress: true,
        ..RunConfig::default()
    }
}

#[test]
fn ideal_gas_closures() {
    for scheme in [Scheme::Vv, Scheme::S1, Scheme::Aboba] {
        let config = ideal(scheme);
        let sim_box = config.sim_box().unwrap();
        let report = run_simulation(&config).unwrap();

        let (t, t_se) = report.estimate(Observable::KineticTemp).unwrap();
        assert!((t - 1.0).abs() <= 3.0 * t_se.max(1e-3), "{scheme}: kinetic temperature {t} +/- {t_se}");

        let stresses: Vec<_> = report.replicas.iter().map(|r| r.series.mean_stress().unwrap()).collect();
        let (s, se) = mean_and_se(&stresses.iter().map(|m| m.trace() / 3.0).collect::<Vec<_>>());
        assert!((s + config.density).abs() <= 3.0 * se.max(1e-3), "{scheme}: mean diagonal stress {s} +/- {se}");

        let curves: Vec<Vec<(f64, f64)>> = report
            .replicas
            .iter()
            .map(|r| r.rdf.as_ref().unwrap().finalize(config.n_particles, &sim_box).unwrap())
            .collect();
        for bin in 0..curves[0].len() {
            let (g, se) = mean_and_se(&curves.iter().map(|c| c[bin].1).collect::<Vec<_>>());
            assert!((g - 1.0).abs() <= 3.0 * se.max(1e-3), "{scheme}: g({}) = {g} +/- {se}", curves[0][bin].0);
        }
    }
}
