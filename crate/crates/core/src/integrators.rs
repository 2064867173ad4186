//! Stepping schemes for DPD built from pairwise kernels.
//!
//! * `Vv`: velocity Verlet with dissipative and random forces folded into the
//!   kicks; forces from the end of one step are reused at the start of the next.
//! * `S1`: Shardlow's splitting, a sequential BBK sweep over pairs followed by
//!   velocity Verlet for the conservative part (OBAB).
//! * `Aboba`: half drift, half kick, sequential exact pairwise
//!   Ornstein–Uhlenbeck sweep, half kick, half drift. Pair geometry and the
//!   conservative force are evaluated once, at the midpoint positions.

use std::fmt;
use std::str::FromStr;

use log::warn;
use nalgebra::{Matrix3, Vector3};

use crate::boundary::{le_minimum_image, le_relative_velocity, le_wrap, SimBox};
use crate::error::{DpdError, Result};
use crate::model::{pair_potential, weight_r, DpdParams, SystemState, OVERLAP_GUARD};
use crate::neighbor::{build_pair_list, needs_rebuild, PairList};
use crate::observables::{kinetic_temperature, ConfigurationalTerms};
use crate::rng::RngStream;

/// Below this `tau * dt` the OU noise amplitude uses its series expansion.
pub const TAU_DT_SERIES_LIMIT: f64 = 1e-8;

/// Kinetic temperature above which a run is declared diverged.
pub const DIVERGENCE_TEMPERATURE: f64 = 1e6;

/// How the thermostat enters the pair virial of a splitting step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThermostatVirial {
    /// Realised momentum exchange of each pair update divided by `dt`.
    #[default]
    Impulse,
    /// `-γ ω^D (e·v) + σ ω^R R / sqrt(dt)`, with `v` the relative velocity a
    /// pair sees just before its update.
    PairForce,
}

impl ThermostatVirial {
    pub fn name(&self) -> &'static str {
        match self {
            ThermostatVirial::Impulse => "impulse",
            ThermostatVirial::PairForce => "pair_force",
        }
    }
}

impl FromStr for ThermostatVirial {
    type Err = DpdError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "impulse" => Ok(ThermostatVirial::Impulse),
            "pair_force" => Ok(ThermostatVirial::PairForce),
            other => Err(DpdError::Config(format!("unknown stress convention '{other}' (expected impulse or pair_force)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Vv,
    S1,
    Aboba,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Vv, Scheme::S1, Scheme::Aboba];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Vv => "vv",
            Scheme::S1 => "s1",
            Scheme::Aboba => "aboba",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = DpdError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "vv" => Ok(Scheme::Vv),
            "s1" | "dpd-s1" => Ok(Scheme::S1),
            "aboba" => Ok(Scheme::Aboba),
            other => Err(DpdError::Config(format!("unknown integrator '{other}' (expected vv, s1 or aboba)"))),
        }
    }
}

/// Momentum handed to particle `i` by a pair update; `j` receives `-dp`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairKickResult {
    pub dp: Vector3<f64>,
}

impl PairKickResult {
    #[inline(always)]
    pub fn apply(&self, momenta: &mut [Vector3<f64>], i: usize, j: usize) {
        momenta[i] += self.dp;
        momenta[j] -= self.dp;
    }
}

#[inline(always)]
fn reduced_mass(m_i: f64, m_j: f64) -> f64 {
    m_i * m_j / (m_i + m_j)
}

/// Exact Ornstein–Uhlenbeck update of the relative velocity along `e`.
///
/// `r` is the separation, `e` the unit line of centres and `v_rel` the
/// relative velocity `v_i - v_j`.
#[inline]
pub fn ou_pair_update(
    r: f64,
    e: &Vector3<f64>,
    v_rel: &Vector3<f64>,
    m_i: f64,
    m_j: f64,
    params: &DpdParams,
    dt: f64,
    noise: f64,
) -> PairKickResult {
    let w_r = weight_r(r, params.r_c());
    if w_r == 0.0 || params.gamma() == 0.0 {
        return PairKickResult { dp: Vector3::zeros() };
    }
    let m_ij = reduced_mass(m_i, m_j);
    let tau = params.gamma() * w_r * w_r / m_ij;
    let x = tau * dt;
    let amplitude = if x < TAU_DT_SERIES_LIMIT {
        dt.sqrt() * (1.0 - 0.5 * x)
    } else {
        (-(-2.0 * x).exp_m1() / (2.0 * tau)).sqrt()
    };
    let dv = e.dot(v_rel) * (-x).exp_m1() + params.sigma() * w_r / m_ij * amplitude * noise;
    PairKickResult { dp: e * (m_ij * dv) }
}

/// Brünger–Brooks–Karplus pair update as used in Shardlow's S1 splitting:
/// an explicit half kick followed by a semi-implicit half kick.
#[inline]
pub fn bbk_pair_update(
    r: f64,
    e: &Vector3<f64>,
    v_rel: &Vector3<f64>,
    m_i: f64,
    m_j: f64,
    params: &DpdParams,
    dt: f64,
    noise: f64,
) -> PairKickResult {
    let w_r = weight_r(r, params.r_c());
    if w_r == 0.0 {
        return PairKickResult { dp: Vector3::zeros() };
    }
    let k = 0.5 * params.gamma() * w_r * w_r * dt;
    let j = 0.5 * params.sigma() * w_r * dt.sqrt() * noise;
    let dp1 = -k * e.dot(v_rel) + j;
    let inv_m_ij = 1.0 / m_i + 1.0 / m_j;
    let v_quarter = v_rel + e * (dp1 * inv_m_ij);
    // Implicit in the post-kick velocity: dp2 = J - K e·(v_quarter + dp2 e / m_ij).
    let dp2 = (j - k * e.dot(&v_quarter)) / (1.0 + k * inv_m_ij);
    PairKickResult { dp: e * (dp1 + dp2) }
}

/// A pair inside the cutoff with its geometry frozen at evaluation time.
#[derive(Debug, Clone, Copy)]
struct PairEntry {
    i: u32,
    j: u32,
    r: f64,
    e: Vector3<f64>,
    crossing: i8,
}

/// Runtime counters exposed for diagnostics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepCounters {
    pub list_rebuilds: u64,
    pub overlaps_skipped: u64,
    pub net_y_crossings: i64,
}

/// One trajectory: state, box, parameters and the caches a scheme needs.
#[derive(Debug, Clone)]
pub struct Simulation {
    state: SystemState,
    sim_box: SimBox,
    params: DpdParams,
    scheme: Scheme,
    dt: f64,
    noise: RngStream,
    skin: f64,
    pairs: PairList,
    geometry: Vec<PairEntry>,
    conservative: Vec<Vector3<f64>>,
    vv_forces: Vec<Vector3<f64>>,
    potential_energy: f64,
    /// Forces (VV) or geometry and conservative forces (S1) match the current positions.
    cache_valid: bool,
    track_virial: bool,
    thermostat_virial: ThermostatVirial,
    geometry_virial: Matrix3<f64>,
    step_virial: Matrix3<f64>,
    counters: StepCounters,
}

impl Simulation {
    pub fn new(
        state: SystemState,
        sim_box: SimBox,
        params: DpdParams,
        scheme: Scheme,
        dt: f64,
        seed: u64,
        skin: f64,
    ) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(DpdError::Config(format!("time step must be positive, got {dt}")));
        }
        let mut state = state;
        le_wrap(&mut state, &sim_box);
        let pairs = build_pair_list(&state, &sim_box, params.r_c(), skin)?;
        let n = state.len();
        Ok(Self {
            state,
            sim_box,
            params,
            scheme,
            dt,
            noise: RngStream::new(seed),
            skin,
            pairs,
            geometry: Vec::new(),
            conservative: vec![Vector3::zeros(); n],
            vv_forces: vec![Vector3::zeros(); n],
            potential_energy: 0.0,
            cache_valid: false,
            track_virial: false,
            thermostat_virial: ThermostatVirial::default(),
            geometry_virial: Matrix3::zeros(),
            step_virial: Matrix3::zeros(),
            counters: StepCounters::default(),
        })
    }

    pub fn state(&self) -> &SystemState {
        &self.state
    }
    pub fn sim_box(&self) -> &SimBox {
        &self.sim_box
    }
    pub fn params(&self) -> &DpdParams {
        &self.params
    }
    pub fn scheme(&self) -> Scheme {
        self.scheme
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn counters(&self) -> StepCounters {
        self.counters
    }
    pub fn pair_list(&self) -> &PairList {
        &self.pairs
    }

    /// Enables accumulation of `Σ q_ij ⊗ F_ij` over all three pair forces each step.
    pub fn set_track_virial(&mut self, on: bool) {
        self.track_virial = on;
    }

    pub fn set_thermostat_virial(&mut self, convention: ThermostatVirial) {
        self.thermostat_virial = convention;
    }

    /// Pair virial `Σ_{i<j} q_ij ⊗ F_ij` realised during the last step.
    pub fn step_virial(&self) -> &Matrix3<f64> {
        &self.step_virial
    }

    pub fn set_params(&mut self, params: DpdParams) {
        self.params = params;
        self.cache_valid = false;
    }

    pub fn set_dt(&mut self, dt: f64) -> Result<()> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(DpdError::Config(format!("time step must be positive, got {dt}")));
        }
        self.dt = dt;
        self.cache_valid = false;
        Ok(())
    }

    pub fn step(&mut self) -> Result<()> {
        self.step_virial = Matrix3::zeros();
        match self.scheme {
            Scheme::Vv => self.vv_step()?,
            Scheme::S1 => self.s1_step()?,
            Scheme::Aboba => self.aboba_step()?,
        }
        self.state.step_index += 1;
        self.check_divergence()
    }

    pub fn run(&mut self, steps: u64) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    /// Gradient and Laplacian sums of the potential at the current positions.
    pub fn configurational_terms(&mut self) -> Result<ConfigurationalTerms> {
        self.ensure_pair_list()?;
        crate::observables::configurational_terms(&self.state, &self.pairs, &self.sim_box, &self.params)
    }

    fn check_divergence(&self) -> Result<()> {
        if !self.state.is_finite() {
            return Err(DpdError::Divergence {
                step: self.state.step_index,
                reason: "non-finite coordinate or momentum".into(),
            });
        }
        let t = kinetic_temperature(&self.state, &self.sim_box);
        if !(t <= DIVERGENCE_TEMPERATURE) {
            return Err(DpdError::Divergence {
                step: self.state.step_index,
                reason: format!("kinetic temperature {t:.3e} exceeds {DIVERGENCE_TEMPERATURE:.0e}"),
            });
        }
        Ok(())
    }

    fn ensure_pair_list(&mut self) -> Result<()> {
        if needs_rebuild(&self.state, &self.pairs, &self.sim_box) {
            self.pairs = build_pair_list(&self.state, &self.sim_box, self.params.r_c(), self.skin)?;
            self.counters.list_rebuilds += 1;
        }
        Ok(())
    }

    fn drift(&mut self, h: f64) {
        for ((q, p), m) in self.state.positions.iter_mut().zip(&self.state.momenta).zip(&self.state.masses) {
            *q += p * (h / m);
        }
        self.sim_box.advance_offset(h);
        self.counters.net_y_crossings += le_wrap(&mut self.state, &self.sim_box);
    }

    fn kick(&mut self, h: f64, forces_are_vv: bool) {
        let f = if forces_are_vv { &self.vv_forces } else { &self.conservative };
        for (p, f) in self.state.momenta.iter_mut().zip(f) {
            *p += f * h;
        }
    }

    /// Pair geometry, conservative forces, potential and conservative virial at the current positions.
    fn evaluate_geometry(&mut self) -> Result<()> {
        self.ensure_pair_list()?;
        let r_c = self.params.r_c();
        let a = self.params.a();
        self.geometry.clear();
        self.conservative.iter_mut().for_each(|f| *f = Vector3::zeros());
        self.geometry_virial = Matrix3::zeros();
        let mut energy = 0.0;
        let mut overlaps = 0u64;
        let q = &self.state.positions;
        for &(i, j) in self.pairs.pairs() {
            let (d, crossing) = le_minimum_image(&q[i as usize], &q[j as usize], &self.sim_box);
            let r2 = d.norm_squared();
            if r2 >= r_c * r_c {
                continue;
            }
            let r = r2.sqrt();
            if r < OVERLAP_GUARD {
                overlaps += 1;
                continue;
            }
            let e = d / r;
            let fmag = a * weight_r(r, r_c);
            self.conservative[i as usize] += e * fmag;
            self.conservative[j as usize] -= e * fmag;
            energy += pair_potential(r, &self.params);
            if self.track_virial {
                self.geometry_virial += (e * e.transpose()) * (r * fmag);
            }
            self.geometry.push(PairEntry { i, j, r, e, crossing });
        }
        if overlaps > 0 {
            if self.counters.overlaps_skipped == 0 {
                warn!("skipping overlapping pair(s) closer than {OVERLAP_GUARD:e}");
            }
            self.counters.overlaps_skipped += overlaps;
        }
        self.potential_energy = energy;
        Ok(())
    }

    /// Sequential pairwise thermostat sweep over the cached geometry.
    fn thermostat_sweep(&mut self, exact: bool) -> Matrix3<f64> {
        let step = self.state.step_index;
        let mut virial = Matrix3::zeros();
        let inv_dt = 1.0 / self.dt;
        for entry in &self.geometry {
            let (i, j) = (entry.i as usize, entry.j as usize);
            let (m_i, m_j) = (self.state.masses[i], self.state.masses[j]);
            let v_rel = le_relative_velocity(
                &self.state.momenta[i],
                &self.state.momenta[j],
                m_i,
                m_j,
                entry.crossing,
                &self.sim_box,
            );
            let noise = self.noise.ordered_pair_gaussian(step, i, j);
            let kick = if exact {
                ou_pair_update(entry.r, &entry.e, &v_rel, m_i, m_j, &self.params, self.dt, noise)
            } else {
                bbk_pair_update(entry.r, &entry.e, &v_rel, m_i, m_j, &self.params, self.dt, noise)
            };
            kick.apply(&mut self.state.momenta, i, j);
            if self.track_virial {
                let f = match self.thermostat_virial {
                    ThermostatVirial::Impulse => kick.dp * inv_dt,
                    ThermostatVirial::PairForce => {
                        let w_r = weight_r(entry.r, self.params.r_c());
                        entry.e
                            * (-self.params.gamma() * w_r * w_r * entry.e.dot(&v_rel)
                                + self.params.sigma() * w_r * noise * inv_dt.sqrt())
                    }
                };
                virial += (entry.e * f.transpose()) * entry.r;
            }
        }
        virial
    }

    /// Total VV force rates `F^C + F^D + σ ω^R R e / sqrt(dt)` keyed to `noise_step`.
    fn evaluate_vv_forces(&mut self, noise_step: u64) -> Result<()> {
        self.evaluate_geometry()?;
        self.vv_forces.copy_from_slice(&self.conservative);
        let gamma = self.params.gamma();
        let sigma = self.params.sigma();
        let r_c = self.params.r_c();
        let inv_sqrt_dt = 1.0 / self.dt.sqrt();
        let mut virial = Matrix3::zeros();
        for entry in &self.geometry {
            let (i, j) = (entry.i as usize, entry.j as usize);
            let (m_i, m_j) = (self.state.masses[i], self.state.masses[j]);
            let v_rel = le_relative_velocity(
                &self.state.momenta[i],
                &self.state.momenta[j],
                m_i,
                m_j,
                entry.crossing,
                &self.sim_box,
            );
            let w_r = weight_r(entry.r, r_c);
            let noise = self.noise.ordered_pair_gaussian(noise_step, i, j);
            let fmag = -gamma * w_r * w_r * entry.e.dot(&v_rel) + sigma * w_r * noise * inv_sqrt_dt;
            let f = entry.e * fmag;
            self.vv_forces[i] += f;
            self.vv_forces[j] -= f;
            if self.track_virial {
                virial += (entry.e * entry.e.transpose()) * (entry.r * fmag);
            }
        }
        self.geometry_virial += virial;
        Ok(())
    }

    fn vv_step(&mut self) -> Result<()> {
        let h = 0.5 * self.dt;
        if !self.cache_valid {
            self.evaluate_vv_forces(self.state.step_index)?;
        }
        self.kick(h, true);
        self.drift(self.dt);
        self.evaluate_vv_forces(self.state.step_index + 1)?;
        self.kick(h, true);
        self.step_virial = self.geometry_virial;
        self.cache_valid = true;
        Ok(())
    }

    fn s1_step(&mut self) -> Result<()> {
        let h = 0.5 * self.dt;
        if !self.cache_valid {
            self.evaluate_geometry()?;
        }
        let thermostat_virial = self.thermostat_sweep(false);
        self.kick(h, false);
        self.drift(self.dt);
        self.evaluate_geometry()?;
        self.kick(h, false);
        self.step_virial = thermostat_virial + self.geometry_virial;
        self.cache_valid = true;
        Ok(())
    }

    fn aboba_step(&mut self) -> Result<()> {
        let h = 0.5 * self.dt;
        self.drift(h);
        self.evaluate_geometry()?;
        self.kick(h, false);
        let thermostat_virial = self.thermostat_sweep(true);
        self.kick(h, false);
        self.drift(h);
        self.step_virial = thermostat_virial + self.geometry_virial;
        self.cache_valid = false;
        Ok(())
    }

    /// Potential energy at the most recent force evaluation.
    pub fn last_potential_energy(&self) -> f64 {
        self.potential_energy
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(a: f64, gamma: f64) -> DpdParams {
        DpdParams::new(a, gamma, 1.0, 1.0).unwrap()
    }

    #[test]
    fn ou_identity_without_friction() {
        let e = Vector3::x();
        let v = Vector3::new(1.0, 0.3, -0.2);
        let k = ou_pair_update(0.5, &e, &v, 1.0, 1.0, &params(25.0, 0.0), 0.1, 1.7);
        assert_eq!(k.dp, Vector3::zeros());
    }

    #[test]
    fn ou_closed_form_example() {
        // tau = 4.5 * 0.25 / 0.5 = 2.25, dt = 0.1, R = 0.
        let e = Vector3::x();
        let v = Vector3::new(1.0, 0.0, 0.0);
        let k = ou_pair_update(0.5, &e, &v, 1.0, 1.0, &params(25.0, 4.5), 0.1, 0.0);
        let dv = (-0.225f64).exp() - 1.0;
        assert_relative_eq!(dv, -0.201_483_8, epsilon = 1e-6);
        assert_relative_eq!(k.dp, Vector3::new(0.5 * dv, 0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn ou_series_branch_is_continuous() {
        let p = params(25.0, 1e-6);
        let e = Vector3::y();
        let v = Vector3::zeros();
        let below = ou_pair_update(0.5, &e, &v, 1.0, 1.0, &p, 1e-3, 1.0).dp.y;
        let above = ou_pair_update(0.5, &e, &v, 1.0, 1.0, &p, 1e-1, 1.0).dp.y;
        // Both branches approximate sigma * w_R * sqrt(dt) for tiny tau * dt.
        assert_relative_eq!(below, p.sigma() * 0.5 * 1e-3f64.sqrt(), max_relative = 1e-8);
        assert_relative_eq!(above, p.sigma() * 0.5 * 1e-1f64.sqrt(), max_relative = 1e-6);
    }

    #[test]
    fn bbk_deterministic_contraction() {
        let p = params(25.0, 4.5);
        let e = Vector3::new(0.6, 0.8, 0.0);
        let v = Vector3::new(1.0, -0.5, 0.25);
        let dt = 0.05;
        let k = 0.5 * 4.5 * 0.25 * dt;
        let kick = bbk_pair_update(0.5, &e, &v, 1.0, 1.0, &p, dt, 0.0);
        let v_new = v + kick.dp * 2.0;
        assert_relative_eq!(e.dot(&v_new), e.dot(&v) * (1.0 - 2.0 * k) / (1.0 + 2.0 * k), epsilon = 1e-14);
    }

    #[test]
    fn bbk_identity_without_coupling() {
        let e = Vector3::z();
        let v = Vector3::new(0.4, 0.1, 2.0);
        let kick = bbk_pair_update(0.3, &e, &v, 1.0, 1.0, &params(25.0, 0.0), 0.05, 0.0);
        assert_eq!(kick.dp, Vector3::zeros());
    }

    #[test]
    fn pair_kicks_leave_orthogonal_velocity_alone() {
        let p = params(25.0, 40.5);
        let e = Vector3::new(0.0, 0.6, 0.8);
        let v = Vector3::new(1.0, 2.0, -1.0);
        for kick in [
            bbk_pair_update(0.4, &e, &v, 1.0, 2.0, &p, 0.05, -0.7),
            ou_pair_update(0.4, &e, &v, 1.0, 2.0, &p, 0.05, -0.7),
        ] {
            let v_new = v + kick.dp * (1.0 + 0.5);
            let perp = |w: Vector3<f64>| w - e * e.dot(&w);
            assert_relative_eq!(perp(v_new), perp(v), epsilon = 1e-14);
        }
    }

    #[test]
    fn kicks_vanish_at_cutoff() {
        let p = params(25.0, 450.0);
        let e = Vector3::x();
        let v = Vector3::new(3.0, 0.0, 0.0);
        let mut last = f64::INFINITY;
        for r in [0.99, 0.999, 0.9999, 1.0] {
            let dp = ou_pair_update(r, &e, &v, 1.0, 1.0, &p, 0.01, 1.0).dp.norm();
            assert!(dp < last);
            last = dp;
        }
        assert_eq!(last, 0.0);
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("baoab".parse::<Scheme>().is_err());
    }
}
