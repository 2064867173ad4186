//! Streaming estimators: temperatures, pair correlation, stress and viscosity.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

use crate::boundary::{le_minimum_image, streaming_velocity, SimBox};
use crate::error::{DpdError, Result};
use crate::model::{DpdParams, SystemState, OVERLAP_GUARD};
use crate::neighbor::{needs_rebuild, PairList};

/// Equilibration discard used throughout: the first 20% of samples.
pub const DEFAULT_EQUILIBRATION_FRACTION: f64 = 0.2;

/// Exactly rounded floating-point sum (Shewchuk partials).
///
/// The result is the correctly rounded value of the exact sum of every
/// input, so it does not depend on insertion or merge order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExactSum {
    partials: Vec<f64>,
    special: f64,
}

impl ExactSum {
    pub fn add(&mut self, value: f64) {
        if !value.is_finite() {
            self.special += value;
            return;
        }
        let mut x = value;
        let mut i = 0;
        for k in 0..self.partials.len() {
            let mut y = self.partials[k];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    pub fn merge(&mut self, other: &ExactSum) {
        for &p in &other.partials {
            self.add(p);
        }
        self.special += other.special;
    }

    pub fn value(&self) -> f64 {
        if self.special != 0.0 || self.special.is_nan() {
            return self.special;
        }
        let p = &self.partials;
        let Some(mut n) = p.len().checked_sub(1) else {
            return 0.0;
        };
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        // Round half-way cases using the sign of the next partial.
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }
}

/// One per-step measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub kinetic_temp: f64,
    pub config_num: f64,
    pub config_den: f64,
    pub potential_energy: f64,
    pub stress: Matrix3<f64>,
}

/// Post-equilibration accumulators, mergeable across replicas.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSeries {
    equilibration_fraction: f64,
    discard: u64,
    seen: u64,
    count: u64,
    kinetic_temp: ExactSum,
    config_num: ExactSum,
    config_den: ExactSum,
    potential_energy: ExactSum,
    stress: [ExactSum; 9],
}

impl ObservableSeries {
    /// Series that will receive `expected_samples` pushes and ignore the first
    /// `equilibration_fraction` of them.
    pub fn new(expected_samples: u64, equilibration_fraction: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&equilibration_fraction) {
            return Err(DpdError::Config(format!(
                "equilibration fraction must lie in [0, 1), got {equilibration_fraction}"
            )));
        }
        Ok(Self {
            equilibration_fraction,
            discard: (expected_samples as f64 * equilibration_fraction).floor() as u64,
            seen: 0,
            count: 0,
            kinetic_temp: ExactSum::default(),
            config_num: ExactSum::default(),
            config_den: ExactSum::default(),
            potential_energy: ExactSum::default(),
            stress: Default::default(),
        })
    }

    pub fn equilibration_fraction(&self) -> f64 {
        self.equilibration_fraction
    }

    /// Whether the next push will be kept.
    pub fn is_collecting(&self) -> bool {
        self.seen >= self.discard
    }

    pub fn push(&mut self, s: &Sample) {
        self.seen += 1;
        if self.seen <= self.discard {
            return;
        }
        self.count += 1;
        self.kinetic_temp.add(s.kinetic_temp);
        self.config_num.add(s.config_num);
        self.config_den.add(s.config_den);
        self.potential_energy.add(s.potential_energy);
        for (acc, v) in self.stress.iter_mut().zip(s.stress.iter()) {
            acc.add(*v);
        }
    }

    pub fn merge(&mut self, other: &ObservableSeries) {
        self.seen += other.seen;
        self.count += other.count;
        self.kinetic_temp.merge(&other.kinetic_temp);
        self.config_num.merge(&other.config_num);
        self.config_den.merge(&other.config_den);
        self.potential_energy.merge(&other.potential_energy);
        for (a, b) in self.stress.iter_mut().zip(&other.stress) {
            a.merge(b);
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    fn mean(&self, sum: &ExactSum) -> Result<f64> {
        if self.count == 0 {
            return Err(DpdError::UndefinedEstimate("no post-equilibration samples".into()));
        }
        Ok(sum.value() / self.count as f64)
    }

    pub fn mean_kinetic_temperature(&self) -> Result<f64> {
        self.mean(&self.kinetic_temp)
    }

    pub fn mean_potential_energy(&self) -> Result<f64> {
        self.mean(&self.potential_energy)
    }

    /// Ratio of the averaged gradient norm to the averaged Laplacian.
    pub fn configurational_temperature(&self) -> Result<f64> {
        let num = self.mean(&self.config_num)?;
        let den = self.mean(&self.config_den)?;
        if den == 0.0 {
            return Err(DpdError::UndefinedEstimate("accumulated Laplacian is zero".into()));
        }
        Ok(num / den)
    }

    pub fn mean_stress(&self) -> Result<Matrix3<f64>> {
        if self.count == 0 {
            return Err(DpdError::UndefinedEstimate("no post-equilibration samples".into()));
        }
        let n = self.count as f64;
        Ok(Matrix3::from_iterator(self.stress.iter().map(|s| s.value() / n)))
    }
}

/// `Σ m |v - u(q)|² / (d N)`, with `u` the imposed streaming velocity.
pub fn kinetic_temperature(state: &SystemState, sim_box: &SimBox) -> f64 {
    let sheared = sim_box.is_sheared();
    let twice_ke: f64 = state
        .positions
        .iter()
        .zip(&state.momenta)
        .zip(&state.masses)
        .map(|((q, p), &m)| {
            let mut v = p / m;
            if sheared {
                v -= streaming_velocity(q, sim_box);
            }
            m * v.norm_squared()
        })
        .sum();
    twice_ke / (3.0 * state.len() as f64)
}

/// Summed ingredients of the configurational temperature at one configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfigurationalTerms {
    /// `Σ_i |∇_i U|²`
    pub grad_sq: f64,
    /// `Σ_i ∇²_i U`
    pub laplacian: f64,
    pub potential_energy: f64,
}

pub fn configurational_terms(
    state: &SystemState,
    pairs: &PairList,
    sim_box: &SimBox,
    params: &DpdParams,
) -> Result<ConfigurationalTerms> {
    if needs_rebuild(state, pairs, sim_box) {
        return Err(DpdError::StalePairList);
    }
    let (a, r_c) = (params.a(), params.r_c());
    let d_minus_1 = (params.dim() - 1) as f64;
    let mut grad = vec![Vector3::<f64>::zeros(); state.len()];
    let mut laplacian = 0.0;
    let mut energy = 0.0;
    for &(i, j) in pairs.pairs() {
        let (i, j) = (i as usize, j as usize);
        let (d, _) = le_minimum_image(&state.positions[i], &state.positions[j], sim_box);
        let r = d.norm();
        if r >= r_c || r < OVERLAP_GUARD {
            continue;
        }
        let w = 1.0 - r / r_c;
        let dphi = -a * w;
        let e = d / r;
        grad[i] += e * dphi;
        grad[j] -= e * dphi;
        // Both particles see the same radial Laplacian.
        laplacian += 2.0 * (a / r_c + d_minus_1 * dphi / r);
        energy += 0.5 * a * r_c * w * w;
    }
    Ok(ConfigurationalTerms {
        grad_sq: grad.iter().map(|g| g.norm_squared()).sum(),
        laplacian,
        potential_energy: energy,
    })
}

/// Adds one configuration's terms to a pair of running sums.
pub fn configurational_temperature_accumulate(terms: &ConfigurationalTerms, num: &mut ExactSum, den: &mut ExactSum) {
    num.add(terms.grad_sq);
    den.add(terms.laplacian);
}

/// Ratio of time averages; errors when the Laplacian sum vanishes.
pub fn configurational_temperature_finalize(num: &ExactSum, den: &ExactSum) -> Result<f64> {
    let d = den.value();
    if d == 0.0 {
        return Err(DpdError::UndefinedEstimate("accumulated Laplacian is zero".into()));
    }
    Ok(num.value() / d)
}

/// Pair-separation histogram for the radial distribution function.
#[derive(Debug, Clone, PartialEq)]
pub struct RdfHistogram {
    bin_width: f64,
    max_r: f64,
    counts: Vec<u64>,
    snapshots: u64,
}

impl RdfHistogram {
    pub fn new(bin_width: f64, max_r: f64, sim_box: &SimBox) -> Result<Self> {
        if !(bin_width > 0.0 && max_r > 0.0) {
            return Err(DpdError::Config(format!("invalid rdf binning: width {bin_width}, max_r {max_r}")));
        }
        if max_r > 0.5 * sim_box.edge() * (1.0 + 1e-12) {
            return Err(DpdError::Config(format!(
                "rdf max_r {max_r} exceeds half the box edge {}",
                0.5 * sim_box.edge()
            )));
        }
        let bins = (max_r / bin_width).round().max(1.0) as usize;
        Ok(Self { bin_width, max_r: bins as f64 * bin_width, counts: vec![0; bins], snapshots: 0 })
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }
    pub fn max_r(&self) -> f64 {
        self.max_r
    }
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
    pub fn snapshots(&self) -> u64 {
        self.snapshots
    }

    pub fn accumulate(&mut self, state: &SystemState, sim_box: &SimBox) {
        let q = &state.positions;
        let max2 = self.max_r * self.max_r;
        let inv_w = 1.0 / self.bin_width;
        for i in 0..q.len() {
            for j in (i + 1)..q.len() {
                let (d, _) = le_minimum_image(&q[i], &q[j], sim_box);
                let r2 = d.norm_squared();
                if r2 < max2 {
                    let k = (r2.sqrt() * inv_w) as usize;
                    if let Some(c) = self.counts.get_mut(k) {
                        *c += 1;
                    }
                }
            }
        }
        self.snapshots += 1;
    }

    pub fn merge(&mut self, other: &RdfHistogram) -> Result<()> {
        if self.counts.len() != other.counts.len() || self.bin_width != other.bin_width {
            return Err(DpdError::Config("cannot merge histograms with different binning".into()));
        }
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
        self.snapshots += other.snapshots;
        Ok(())
    }

    /// `(r, g(r))` at bin centres, normalised by the exact shell volume.
    pub fn finalize(&self, n_particles: usize, sim_box: &SimBox) -> Result<Vec<(f64, f64)>> {
        if self.snapshots == 0 {
            return Err(DpdError::UndefinedEstimate("rdf histogram has no snapshots".into()));
        }
        let n = n_particles as f64;
        let pair_density = 0.5 * n * (n - 1.0) / sim_box.volume();
        Ok(self
            .counts
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                let lo = k as f64 * self.bin_width;
                let hi = lo + self.bin_width;
                let shell = 4.0 / 3.0 * PI * (hi.powi(3) - lo.powi(3));
                (lo + 0.5 * self.bin_width, c as f64 / (pair_density * self.snapshots as f64 * shell))
            })
            .collect())
    }
}

/// Irving–Kirkwood stress `-(1/V) [Σ m (v-u)⊗(v-u) + Σ q_ij ⊗ F_ij]`.
pub fn stress_tensor(state: &SystemState, sim_box: &SimBox, pair_virial: &Matrix3<f64>) -> Matrix3<f64> {
    let mut kinetic = Matrix3::zeros();
    for ((q, p), &m) in state.positions.iter().zip(&state.momenta).zip(&state.masses) {
        let c = p / m - streaming_velocity(q, sim_box);
        kinetic += (c * c.transpose()) * m;
    }
    -(kinetic + pair_virial) / sim_box.volume()
}

/// `q_ij ⊗ F_ij` for a single pair.
pub fn pair_virial(q_ij: &Vector3<f64>, f_ij: &Vector3<f64>) -> Matrix3<f64> {
    q_ij * f_ij.transpose()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViscosityEstimate {
    pub eta: f64,
    /// Standard error from the spread of the supplied samples; NaN for a single sample.
    pub std_err: f64,
}

/// `η = <σ_xy> / κ` over post-equilibration (or per-replica mean) stress samples.
pub fn viscosity_estimate(shear_stress: &[f64], shear_rate: f64) -> Result<ViscosityEstimate> {
    if shear_rate == 0.0 {
        return Err(DpdError::Config("viscosity needs a non-zero shear rate".into()));
    }
    if shear_stress.is_empty() {
        return Err(DpdError::UndefinedEstimate("no stress samples".into()));
    }
    let (mean, se) = mean_and_std_err(shear_stress);
    Ok(ViscosityEstimate { eta: mean / shear_rate, std_err: se / shear_rate.abs() })
}

/// Sample mean and standard error of the mean (NaN for fewer than two values).
pub fn mean_and_std_err(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neighbor::build_pair_list;
    use approx::assert_relative_eq;

    fn pair_state(r: f64) -> SystemState {
        SystemState::new(vec![Vector3::zeros(), Vector3::new(r, 0.0, 0.0)], vec![Vector3::zeros(); 2], vec![1.0; 2])
            .unwrap()
    }

    #[test]
    fn exact_sum_is_order_free() {
        let xs = [1e16, 1.0, -1e16, 3.0, 1e-8, -2.5];
        let mut a = ExactSum::default();
        xs.iter().for_each(|&x| a.add(x));
        let mut b = ExactSum::default();
        xs.iter().rev().for_each(|&x| b.add(x));
        assert_eq!(a.value().to_bits(), b.value().to_bits());
        assert_eq!(a.value(), 1.5 + 1e-8);
    }

    #[test]
    fn kinetic_temperature_cases() {
        let b = SimBox::sheared(5.0, 0.2).unwrap();
        let mut s = pair_state(0.5);
        assert_eq!(kinetic_temperature(&s, &SimBox::periodic(5.0).unwrap()), 0.0);
        s.positions[1].y = 1.5;
        s.momenta[1] = streaming_velocity(&s.positions[1], &b);
        assert_eq!(kinetic_temperature(&s, &b), 0.0);
    }

    #[test]
    fn two_particle_configurational_terms() {
        let p = DpdParams::new(25.0, 4.5, 1.0, 1.0).unwrap();
        let b = SimBox::periodic(5.0).unwrap();
        let s = pair_state(0.5);
        let list = build_pair_list(&s, &b, 1.0, 0.3).unwrap();
        let t = configurational_terms(&s, &list, &b, &p).unwrap();
        assert_relative_eq!(t.grad_sq, 2.0 * 156.25, epsilon = 1e-12);
        assert_relative_eq!(t.laplacian, 2.0 * -25.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_laplacian_is_undefined() {
        let p = DpdParams::default();
        let b = SimBox::periodic(5.0).unwrap();
        let s = pair_state(1.5);
        let list = build_pair_list(&s, &b, 1.0, 0.3).unwrap();
        let t = configurational_terms(&s, &list, &b, &p).unwrap();
        assert_eq!((t.grad_sq, t.laplacian), (0.0, 0.0));
        let (mut num, mut den) = (ExactSum::default(), ExactSum::default());
        configurational_temperature_accumulate(&t, &mut num, &mut den);
        assert!(matches!(
            configurational_temperature_finalize(&num, &den),
            Err(DpdError::UndefinedEstimate(_))
        ));
    }

    #[test]
    fn single_pair_rdf_bin() {
        let b = SimBox::periodic(5.0).unwrap();
        let mut h = RdfHistogram::new(0.1, 2.5, &b).unwrap();
        h.accumulate(&pair_state(0.55), &b);
        let nonzero: Vec<_> = h.counts().iter().enumerate().filter(|(_, &c)| c > 0).collect();
        assert_eq!(nonzero, vec![(5, &1)]);
        assert!(RdfHistogram::new(0.1, 2.6, &b).is_err());
    }

    #[test]
    fn viscosity_arithmetic() {
        let v = viscosity_estimate(&[0.1, 0.1, 0.1], 0.2).unwrap();
        assert_relative_eq!(v.eta, 0.5, epsilon = 1e-15);
        assert!(v.std_err < 1e-15);
        assert!(viscosity_estimate(&[0.1], 0.0).is_err());
    }

    #[test]
    fn single_pair_stress() {
        // Two particles at rest along x with a repulsive pair force of 12.5.
        let b = SimBox::periodic(5.0).unwrap();
        let s = pair_state(0.5);
        let q_ij = Vector3::new(-0.5, 0.0, 0.0);
        let f_ij = Vector3::new(-12.5, 0.0, 0.0);
        let sigma = stress_tensor(&s, &b, &pair_virial(&q_ij, &f_ij));
        let mut expected = Matrix3::zeros();
        expected[(0, 0)] = -6.25 / 125.0;
        assert_relative_eq!(sigma, expected, epsilon = 1e-15);
    }

    #[test]
    fn series_discards_equilibration() {
        let mut s = ObservableSeries::new(10, 0.2).unwrap();
        for k in 0..10 {
            let v = k as f64;
            s.push(&Sample {
                kinetic_temp: v,
                config_num: v,
                config_den: 1.0,
                potential_energy: 0.0,
                stress: Matrix3::zeros(),
            });
        }
        assert_eq!(s.count(), 8);
        assert_relative_eq!(s.mean_kinetic_temperature().unwrap(), 5.5);
        assert_relative_eq!(s.configurational_temperature().unwrap(), 5.5);
        assert!(ObservableSeries::new(10, 0.2).unwrap().mean_stress().is_err());
    }
}

/// Mean streaming (x) velocity binned along y, for checking Couette profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityProfile {
    sums: Vec<f64>,
    counts: Vec<u64>,
    edge: f64,
}

impl VelocityProfile {
    pub fn new(bins: usize, sim_box: &SimBox) -> Result<Self> {
        if bins == 0 {
            return Err(DpdError::Config("velocity profile needs at least one bin".into()));
        }
        Ok(Self { sums: vec![0.0; bins], counts: vec![0; bins], edge: sim_box.edge() })
    }

    pub fn accumulate(&mut self, state: &SystemState) {
        let bins = self.sums.len();
        for ((q, p), m) in state.positions.iter().zip(&state.momenta).zip(&state.masses) {
            let k = (((q.y / self.edge + 0.5) * bins as f64) as usize).min(bins - 1);
            self.sums[k] += p.x / m;
            self.counts[k] += 1;
        }
    }

    pub fn merge(&mut self, other: &VelocityProfile) {
        self.sums.iter_mut().zip(&other.sums).for_each(|(a, b)| *a += b);
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
    }

    /// `(y, <v_x>)` at bin centres; empty bins are skipped.
    pub fn profile(&self) -> Vec<(f64, f64)> {
        let bins = self.sums.len() as f64;
        self.sums
            .iter()
            .zip(&self.counts)
            .enumerate()
            .filter(|(_, (_, &c))| c > 0)
            .map(|(k, (s, &c))| (((k as f64 + 0.5) / bins - 0.5) * self.edge, s / c as f64))
            .collect()
    }

    /// Least-squares slope of `<v_x>` against `y`.
    pub fn slope(&self) -> Option<f64> {
        linear_fit(&self.profile()).map(|(slope, _)| slope)
    }
}

/// Ordinary least-squares `(slope, intercept)`; `None` for fewer than two distinct x.
pub fn linear_fit(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}
