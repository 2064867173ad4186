//! The two pairwise thermostat kernels on one isolated pair.
//!
//! The exact Ornstein–Uhlenbeck update and the BBK update used by S1 are
//! applied repeatedly to the relative velocity along the line of centres;
//! both should settle at variance kT / m_ij. The exact kernel also
//! reproduces the analytic one-step mean and variance for any stepsize.

use dpd::{bbk_pair_update, ou_pair_update, DpdParams, RngStream, Vector3};

fn main() -> dpd::Result<()> {
    let params = DpdParams::new(25.0, 4.5, 1.0, 1.0)?;
    let e = Vector3::x();
    let r = 0.5;
    let (m_i, m_j) = (1.0, 1.0);
    let m_ij = m_i * m_j / (m_i + m_j);
    let w = 1.0 - r;
    let tau = params.gamma() * w * w / m_ij;
    let rng = RngStream::new(2);

    println!("tau = {tau}, m_ij = {m_ij}");
    for dt in [0.01, 0.1, 1.0] {
        let v0 = Vector3::new(1.0, 0.0, 0.0);
        let draws = 200_000u64;
        let (mut s, mut s2) = (0.0, 0.0);
        for k in 0..draws {
            let kick = ou_pair_update(r, &e, &v0, m_i, m_j, &params, dt, rng.ordered_pair_gaussian(k, 0, 1));
            let v = v0.x + kick.dp.x / m_ij;
            s += v;
            s2 += v * v;
        }
        let mean = s / draws as f64;
        let var = s2 / draws as f64 - mean * mean;
        let sd = params.sigma() * w / m_ij;
        let var_exact = sd * sd * (1.0 - (-2.0 * tau * dt).exp()) / (2.0 * tau);
        println!(
            "dt {dt:>5}: mean {mean:.4} (exact {:.4}), variance {var:.4} (exact {var_exact:.4})",
            (-tau * dt).exp()
        );
    }

    for (name, exact) in [("exact OU", true), ("BBK", false)] {
        let dt = 0.2;
        let (mut p_i, mut p_j) = (Vector3::zeros(), Vector3::<f64>::zeros());
        let (mut s2, mut n) = (0.0, 0.0);
        for step in 0..200_000u64 {
            let v_rel = p_i / m_i - p_j / m_j;
            let noise = rng.ordered_pair_gaussian(step, 3, 4);
            let kick = if exact {
                ou_pair_update(r, &e, &v_rel, m_i, m_j, &params, dt, noise)
            } else {
                bbk_pair_update(r, &e, &v_rel, m_i, m_j, &params, dt, noise)
            };
            p_i += kick.dp;
            p_j -= kick.dp;
            if step > 100 {
                s2 += (p_i / m_i - p_j / m_j).x.powi(2);
                n += 1.0;
            }
        }
        println!("{name:>8}: stationary <(e.v)^2> m_ij = {:.4} (kT = {})", s2 / n * m_ij, params.kbt());
    }
    Ok(())
}
