//! Domain types and the soft-core conservative interaction.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::boundary::{le_minimum_image, le_wrap, SimBox};
use crate::error::{DpdError, Result};
use crate::neighbor::{needs_rebuild, PairList};

/// Pairs closer than this have no defined line of centres and are skipped.
pub const OVERLAP_GUARD: f64 = 1e-9;

/// Interaction parameters in reduced units.
///
/// `sigma` is never set directly; it is recomputed from `gamma` and `kbt`
/// so that `sigma^2 = 2 gamma kbt` always holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpdParams {
    a: f64,
    gamma: f64,
    sigma: f64,
    r_c: f64,
    kbt: f64,
    dim: usize,
}

impl Default for DpdParams {
    fn default() -> Self {
        Self::new(25.0, 4.5, 1.0, 1.0).expect("default parameters are valid")
    }
}

impl DpdParams {
    pub fn new(a: f64, gamma: f64, r_c: f64, kbt: f64) -> Result<Self> {
        let mut p = Self { a: 0.0, gamma: 0.0, sigma: 0.0, r_c: 1.0, kbt: 1.0, dim: 3 };
        p.set_repulsion(a)?;
        p.set_cutoff(r_c)?;
        p.set_kbt(kbt)?;
        p.set_gamma(gamma)?;
        Ok(p)
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn r_c(&self) -> f64 {
        self.r_c
    }
    pub fn kbt(&self) -> f64 {
        self.kbt
    }
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn set_repulsion(&mut self, a: f64) -> Result<()> {
        if !(a.is_finite() && a >= 0.0) {
            return Err(DpdError::Config(format!("repulsion a must be >= 0, got {a}")));
        }
        self.a = a;
        Ok(())
    }

    pub fn set_gamma(&mut self, gamma: f64) -> Result<()> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(DpdError::Config(format!("gamma must be >= 0, got {gamma}")));
        }
        self.gamma = gamma;
        self.sigma = (2.0 * self.gamma * self.kbt).sqrt();
        Ok(())
    }

    pub fn set_kbt(&mut self, kbt: f64) -> Result<()> {
        if !(kbt.is_finite() && kbt > 0.0) {
            return Err(DpdError::Config(format!("kbt must be > 0, got {kbt}")));
        }
        self.kbt = kbt;
        self.sigma = (2.0 * self.gamma * self.kbt).sqrt();
        Ok(())
    }

    pub fn set_cutoff(&mut self, r_c: f64) -> Result<()> {
        if !(r_c.is_finite() && r_c > 0.0) {
            return Err(DpdError::Config(format!("cutoff must be > 0, got {r_c}")));
        }
        self.r_c = r_c;
        Ok(())
    }

    /// Only three-dimensional systems are supported.
    pub fn set_dim(&mut self, dim: usize) -> Result<()> {
        if dim != 3 {
            return Err(DpdError::Config(format!("only d = 3 is supported, got {dim}")));
        }
        self.dim = dim;
        Ok(())
    }
}

/// Phase point of the particle system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub positions: Vec<Vector3<f64>>,
    pub momenta: Vec<Vector3<f64>>,
    pub masses: Vec<f64>,
    pub step_index: u64,
}

impl SystemState {
    pub fn new(positions: Vec<Vector3<f64>>, momenta: Vec<Vector3<f64>>, masses: Vec<f64>) -> Result<Self> {
        let n = positions.len();
        if n < 2 {
            return Err(DpdError::Config(format!("need at least 2 particles, got {n}")));
        }
        if momenta.len() != n || masses.len() != n {
            return Err(DpdError::Config("positions, momenta and masses differ in length".into()));
        }
        if let Some(m) = masses.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return Err(DpdError::Config(format!("masses must be positive, got {m}")));
        }
        Ok(Self { positions, momenta, masses, step_index: 0 })
    }

    /// Uniform positions in the box and Maxwell–Boltzmann momenta at `kbt`,
    /// with the centre-of-mass momentum removed.
    pub fn random(n: usize, mass: f64, kbt: f64, sim_box: &SimBox, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = sim_box.edge();
        let positions: Vec<_> = (0..n)
            .map(|_| Vector3::from_fn(|_, _| (rng.gen::<f64>() - 0.5) * l))
            .collect();
        let scale = (mass * kbt).sqrt();
        let mut momenta: Vec<Vector3<f64>> = (0..n)
            .map(|_| Vector3::from_fn(|_, _| scale * rng.sample::<f64, _>(StandardNormal)))
            .collect();
        if n > 0 {
            let mean = momenta.iter().sum::<Vector3<f64>>() / n as f64;
            momenta.iter_mut().for_each(|p| *p -= mean);
        }
        let mut state = Self::new(positions, momenta, vec![mass; n])?;
        le_wrap(&mut state, sim_box);
        Ok(state)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn total_momentum(&self) -> Vector3<f64> {
        self.momenta.iter().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.positions.iter().chain(&self.momenta).all(|v| v.iter().all(|c| c.is_finite()))
    }
}

/// Separation, line of centres and relative velocity of one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGeometry {
    pub r: f64,
    pub e: Vector3<f64>,
    pub v_rel: Vector3<f64>,
}

impl PairGeometry {
    /// Builds the geometry from a separation vector `q_i - q_j`; `None` inside the overlap guard.
    pub fn from_separation(q_ij: Vector3<f64>, v_rel: Vector3<f64>) -> Option<Self> {
        let r = q_ij.norm();
        (r >= OVERLAP_GUARD).then(|| Self { r, e: q_ij / r, v_rel })
    }
}

/// Random weight `1 - r/r_c` inside the cutoff. The dissipative weight is its square.
#[inline(always)]
pub fn weight_r(r: f64, r_c: f64) -> f64 {
    if r < r_c {
        1.0 - r / r_c
    } else {
        0.0
    }
}

#[inline]
pub fn conservative_pair_force(geom: &PairGeometry, params: &DpdParams) -> Vector3<f64> {
    geom.e * (params.a * weight_r(geom.r, params.r_c))
}

#[inline]
pub fn pair_potential(r: f64, params: &DpdParams) -> f64 {
    let w = weight_r(r, params.r_c);
    0.5 * params.a * params.r_c * w * w
}

/// Per-particle conservative forces and total potential energy.
pub fn total_conservative(
    state: &SystemState,
    pairs: &PairList,
    sim_box: &SimBox,
    params: &DpdParams,
) -> Result<(Vec<Vector3<f64>>, f64)> {
    if pairs.len_particles() != state.len() || needs_rebuild(state, pairs, sim_box) {
        return Err(DpdError::StalePairList);
    }
    let mut forces = vec![Vector3::zeros(); state.len()];
    let mut energy = 0.0;
    for &(i, j) in pairs.pairs() {
        let (i, j) = (i as usize, j as usize);
        let (q_ij, _) = le_minimum_image(&state.positions[i], &state.positions[j], sim_box);
        let Some(geom) = PairGeometry::from_separation(q_ij, Vector3::zeros()) else {
            continue;
        };
        if geom.r >= params.r_c {
            continue;
        }
        let f = conservative_pair_force(&geom, params);
        forces[i] += f;
        forces[j] -= f;
        energy += pair_potential(geom.r, params);
    }
    Ok((forces, energy))
}

/// Estimated Schmidt number of standard DPD at friction `gamma` and density `rho_d`.
pub fn schmidt_number_estimate(gamma: f64, rho_d: f64, params: &DpdParams) -> f64 {
    let x = 2.0 * PI * gamma * rho_d * params.r_c.powi(4);
    0.5 + x * x / (70875.0 * params.kbt)
}
