//! Brute-force references shared by integration tests.

use dpd::{SimBox, SystemState, Vector3};

/// Shortest separation over the sheared image lattice, independent of the
/// library's minimum-image routine.
pub fn oracle_distance(qi: &Vector3<f64>, qj: &Vector3<f64>, b: &SimBox) -> f64 {
    let l = b.edge();
    let mut best = f64::INFINITY;
    for ny in -1i32..=1 {
        for nx in -2i32..=2 {
            for nz in -1i32..=1 {
                let image = qj + Vector3::new(nx as f64 * l + ny as f64 * b.le_offset(), ny as f64 * l, nz as f64 * l);
                best = best.min((qi - image).norm());
            }
        }
    }
    best
}

/// All pairs `i < j` closer than `cutoff`, in lexicographic order.
pub fn oracle_pairs(state: &SystemState, b: &SimBox, cutoff: f64) -> Vec<(u32, u32)> {
    let q = &state.positions;
    let mut out = Vec::new();
    for i in 0..q.len() {
        for j in (i + 1)..q.len() {
            if oracle_distance(&q[i], &q[j], b) < cutoff {
                out.push((i as u32, j as u32));
            }
        }
    }
    out
}
