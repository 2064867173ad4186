//! Cell-list accelerated Verlet pair list.
//!
//! The list holds every pair closer than `r_c + skin` at build time, sorted
//! lexicographically by `(i, j)` with `i < j`. It stays valid until some
//! particle has moved more than `skin / 2` (plus a margin for the drift of
//! the Lees–Edwards offset under shear).

use nalgebra::Vector3;

use crate::boundary::{le_minimum_image, wrap_scalar, SimBox};
use crate::error::{DpdError, Result};
use crate::model::SystemState;

#[derive(Debug, Clone, PartialEq)]
pub struct PairList {
    pairs: Vec<(u32, u32)>,
    list_cutoff: f64,
    skin: f64,
    reference_positions: Vec<Vector3<f64>>,
    reference_offset: f64,
}

impl PairList {
    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn list_cutoff(&self) -> f64 {
        self.list_cutoff
    }

    pub fn skin(&self) -> f64 {
        self.skin
    }

    pub fn reference_positions(&self) -> &[Vector3<f64>] {
        &self.reference_positions
    }

    pub(crate) fn len_particles(&self) -> usize {
        self.reference_positions.len()
    }
}

pub fn build_pair_list(state: &SystemState, sim_box: &SimBox, r_c: f64, skin: f64) -> Result<PairList> {
    if !(skin >= 0.0 && r_c > 0.0) {
        return Err(DpdError::Config(format!("invalid cutoff {r_c} or skin {skin}")));
    }
    let list_cutoff = r_c + skin;
    let l = sim_box.edge();
    if list_cutoff > 0.5 * l {
        return Err(DpdError::Config(format!(
            "cutoff + skin = {list_cutoff} exceeds half the box edge {}",
            0.5 * l
        )));
    }
    let n_cells = (l / list_cutoff).floor() as usize;
    let pairs = if n_cells < 3 {
        all_pairs_within(state, sim_box, list_cutoff)
    } else {
        cell_pairs_within(state, sim_box, list_cutoff, n_cells)
    };
    Ok(PairList {
        pairs,
        list_cutoff,
        skin,
        reference_positions: state.positions.clone(),
        reference_offset: sim_box.le_offset(),
    })
}

fn all_pairs_within(state: &SystemState, sim_box: &SimBox, cutoff: f64) -> Vec<(u32, u32)> {
    let cut2 = cutoff * cutoff;
    let q = &state.positions;
    let mut pairs = Vec::new();
    for i in 0..q.len() {
        for j in (i + 1)..q.len() {
            let (d, _) = le_minimum_image(&q[i], &q[j], sim_box);
            if d.norm_squared() < cut2 {
                pairs.push((i as u32, j as u32));
            }
        }
    }
    pairs
}

fn cell_pairs_within(state: &SystemState, sim_box: &SimBox, cutoff: f64, nc: usize) -> Vec<(u32, u32)> {
    let l = sim_box.edge();
    let half = 0.5 * l;
    let w = l / nc as f64;
    let cell_of = |x: f64| -> usize { (((x + half) / w).floor().max(0.0) as usize).min(nc - 1) };
    let q = &state.positions;
    let n = q.len();

    let cells: Vec<[usize; 3]> = q.iter().map(|p| [cell_of(p.x), cell_of(p.y), cell_of(p.z)]).collect();
    let flat = |c: [usize; 3]| (c[0] * nc + c[1]) * nc + c[2];

    // Counting sort of particle indices by cell, stable in index order.
    let mut start = vec![0usize; nc * nc * nc + 1];
    for c in &cells {
        start[flat(*c) + 1] += 1;
    }
    for k in 1..start.len() {
        start[k] += start[k - 1];
    }
    let mut fill = start.clone();
    let mut members = vec![0u32; n];
    for (i, c) in cells.iter().enumerate() {
        let f = flat(*c);
        members[fill[f]] = i as u32;
        fill[f] += 1;
    }

    // Image shift of a neighbour cell index that wrapped around the box.
    let wrap_index = |k: isize| -> (usize, f64) {
        let nci = nc as isize;
        if k < 0 {
            ((k + nci) as usize, -l)
        } else if k >= nci {
            ((k - nci) as usize, l)
        } else {
            (k as usize, 0.0)
        }
    };
    let offset = sim_box.le_offset();
    let cut2 = cutoff * cutoff;
    let mut pairs = Vec::new();
    let mut row: Vec<u32> = Vec::new();
    let mut x_cells: Vec<(usize, f64)> = Vec::with_capacity(6);
    for i in 0..n {
        let [cx, cy, cz] = cells[i];
        let qi = q[i];
        row.clear();
        for dy in -1isize..=1 {
            let (ny, shift_y) = wrap_index(cy as isize + dy);
            let crossing = shift_y / l;
            let sheared_row = crossing != 0.0 && sim_box.is_sheared();
            x_cells.clear();
            if !sheared_row {
                x_cells.extend((-1isize..=1).map(|dx| wrap_index(cx as isize + dx)));
            } else {
                // The image of j is displaced by crossing * offset in x.
                let centre = wrap_scalar(qi.x - crossing * offset, l);
                let lo = ((centre - cutoff + half) / w).floor() as isize;
                let hi = ((centre + cutoff + half) / w).floor() as isize;
                for k in lo..=hi {
                    let c = wrap_index(k).0;
                    if !x_cells.iter().any(|&(x, _)| x == c) {
                        x_cells.push((c, f64::NAN));
                    }
                }
            }
            for dz in -1isize..=1 {
                let (nz, shift_z) = wrap_index(cz as isize + dz);
                for &(nx, shift_x) in &x_cells {
                    let f = flat([nx, ny, nz]);
                    for &j in &members[start[f]..start[f + 1]] {
                        if (j as usize) <= i {
                            continue;
                        }
                        let dq = qi - q[j as usize];
                        let dx = if sheared_row { wrap_scalar(dq.x - crossing * offset, l) } else { dq.x - shift_x };
                        let (dy, dz) = (dq.y - shift_y, dq.z - shift_z);
                        if dx * dx + dy * dy + dz * dz < cut2 {
                            row.push(j);
                        }
                    }
                }
            }
        }
        row.sort_unstable();
        pairs.extend(row.iter().map(|&j| (i as u32, j)));
    }
    pairs
}

/// Largest minimum-image displacement of any particle since the list was built.
pub fn max_displacement(state: &SystemState, list: &PairList, sim_box: &SimBox) -> f64 {
    state
        .positions
        .iter()
        .zip(&list.reference_positions)
        .map(|(q, q0)| le_minimum_image(q, q0, sim_box).0.norm_squared())
        .fold(0.0, f64::max)
        .sqrt()
}

/// True when the list may miss a pair inside `r_c`.
///
/// Without shear this is exactly "some particle moved more than skin/2".
/// Under shear the offset drift `|Δ|` since the build is budgeted as
/// `2 max_disp + 3 |Δ| > skin`: once for pairs straddling the y boundary and
/// twice for the displacement error of particles that re-entered.
pub fn needs_rebuild(state: &SystemState, list: &PairList, sim_box: &SimBox) -> bool {
    if state.len() != list.len_particles() {
        return true;
    }
    let drift = if sim_box.is_sheared() {
        wrap_scalar(sim_box.le_offset() - list.reference_offset, sim_box.edge()).abs()
    } else {
        0.0
    };
    let budget = 0.5 * (list.skin - 3.0 * drift);
    budget < 0.0 || max_displacement(state, list, sim_box) > budget
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_at(d: f64) -> SystemState {
        SystemState::new(vec![Vector3::zeros(), Vector3::new(d, 0.0, 0.0)], vec![Vector3::zeros(); 2], vec![1.0; 2])
            .unwrap()
    }

    #[test]
    fn two_particle_lists() {
        let b = SimBox::periodic(5.0).unwrap();
        assert_eq!(build_pair_list(&two_at(0.8), &b, 1.0, 0.3).unwrap().pairs(), &[(0, 1)]);
        assert!(build_pair_list(&two_at(1.4), &b, 1.0, 0.3).unwrap().is_empty());
    }

    #[test]
    fn oversize_cutoff_is_rejected() {
        let b = SimBox::periodic(2.0).unwrap();
        assert!(matches!(build_pair_list(&two_at(0.5), &b, 1.0, 0.3), Err(DpdError::Config(_))));
    }

    #[test]
    fn rebuild_threshold() {
        let b = SimBox::periodic(6.0).unwrap();
        let mut s = SystemState::random(50, 1.0, 1.0, &b, 11).unwrap();
        let list = build_pair_list(&s, &b, 1.0, 0.3).unwrap();
        assert!(!needs_rebuild(&s, &list, &b));
        s.positions[7].y += 0.15 - 1e-9;
        assert!(!needs_rebuild(&s, &list, &b));
        s.positions[7].y += 2e-6;
        assert!(needs_rebuild(&s, &list, &b));
    }

    #[test]
    fn identical_positions_give_identical_lists() {
        let b = SimBox::sheared(6.0, 0.2).unwrap().with_offset(2.2);
        let s = SystemState::random(300, 1.0, 1.0, &b, 5).unwrap();
        let a = build_pair_list(&s, &b, 1.0, 0.3).unwrap();
        let c = build_pair_list(&s.clone(), &b, 1.0, 0.3).unwrap();
        assert_eq!(a.pairs(), c.pairs());
        assert!(a.pairs().windows(2).all(|w| w[0] < w[1]));
    }
}
