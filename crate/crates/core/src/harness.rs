//! Experiment drivers: replica runs, stepsize sweeps, critical stepsizes and
//! efficiency tables, plus the CSV and config-file formats they use.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::SimBox;
use crate::error::{DpdError, Result};
use crate::integrators::{Scheme, Simulation, ThermostatVirial};
use crate::model::{DpdParams, SystemState};
use crate::observables::{
    kinetic_temperature, mean_and_std_err, stress_tensor, viscosity_estimate, ObservableSeries, RdfHistogram, Sample,
    VelocityProfile, ViscosityEstimate, DEFAULT_EQUILIBRATION_FRACTION,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    LeesEdwards,
}

impl FromStr for Boundary {
    type Err = DpdError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "periodic" => Ok(Boundary::Periodic),
            "lees_edwards" => Ok(Boundary::LeesEdwards),
            other => Err(DpdError::Config(format!("unknown boundary '{other}' (expected periodic or lees_edwards)"))),
        }
    }
}

impl Boundary {
    pub fn name(&self) -> &'static str {
        match self {
            Boundary::Periodic => "periodic",
            Boundary::LeesEdwards => "lees_edwards",
        }
    }
}

/// Which equilibrium observable a sweep measures against `k_B T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    ConfigTemp,
    KineticTemp,
}

impl FromStr for Observable {
    type Err = DpdError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ctemp" => Ok(Observable::ConfigTemp),
            "ktemp" => Ok(Observable::KineticTemp),
            other => Err(DpdError::Config(format!("unknown observable '{other}' (expected ctemp or ktemp)"))),
        }
    }
}

/// A complete run description. Parsed from flat `key = value` files.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n_particles: usize,
    pub density: f64,
    pub a: f64,
    pub gamma: f64,
    pub kbt: f64,
    pub r_c: f64,
    pub integrator: Scheme,
    pub dt: f64,
    pub t_total: f64,
    pub equilibration_fraction: f64,
    pub seed: u64,
    pub n_replicas: usize,
    pub boundary: Boundary,
    pub shear_rate: f64,
    pub outputs: PathBuf,
    pub mass: f64,
    pub skin: f64,
    /// Collect g(r) every `rdf_every` steps after equilibration.
    pub rdf: bool,
    pub rdf_bin_width: f64,
    /// Defaults to half the box edge.
    pub rdf_max_r: Option<f64>,
    pub rdf_every: u64,
    /// Record the Irving–Kirkwood stress every step.
    pub stress: bool,
    /// How thermostat updates of the splitting schemes enter the stress.
    pub stress_convention: ThermostatVirial,
    /// Bins along y for the streaming-velocity profile; 0 disables it.
    pub profile_bins: usize,
    /// Stride of rows written to observables.csv and stress.csv.
    pub output_every: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_particles: 500,
            density: 3.0,
            a: 25.0,
            gamma: 4.5,
            kbt: 1.0,
            r_c: 1.0,
            integrator: Scheme::Aboba,
            dt: 0.05,
            t_total: 1000.0,
            equilibration_fraction: DEFAULT_EQUILIBRATION_FRACTION,
            seed: 1,
            n_replicas: 10,
            boundary: Boundary::Periodic,
            shear_rate: 0.0,
            outputs: PathBuf::from("out"),
            mass: 1.0,
            skin: 0.3,
            rdf: false,
            rdf_bin_width: 0.01,
            rdf_max_r: None,
            rdf_every: 10,
            stress: false,
            stress_convention: ThermostatVirial::Impulse,
            profile_bins: 0,
            output_every: 10,
        }
    }
}

impl RunConfig {
    /// Reduced-time budget and replica count for quick desk-scale runs.
    pub fn desk() -> Self {
        Self { t_total: 200.0, n_replicas: 4, ..Self::default() }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref())
            .map_err(|e| DpdError::Config(format!("cannot read {}: {e}", path.as_ref().display())))?;
        text.parse()
    }

    /// Number of integration steps, `floor(t_total / dt)`.
    pub fn steps(&self) -> u64 {
        // Nudge by a relative epsilon so that e.g. 200 / 0.01 is not floored to 19999.
        ((self.t_total / self.dt) * (1.0 + 1e-12)).floor() as u64
    }

    pub fn params(&self) -> Result<DpdParams> {
        DpdParams::new(self.a, self.gamma, self.r_c, self.kbt)
    }

    pub fn sim_box(&self) -> Result<SimBox> {
        let shear = match self.boundary {
            Boundary::Periodic => 0.0,
            Boundary::LeesEdwards => self.shear_rate,
        };
        SimBox::for_density(self.n_particles, self.density, shear)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(DpdError::Config(m));
        if self.n_particles < 2 {
            return fail(format!("n_particles must be >= 2, got {}", self.n_particles));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return fail(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_total > 0.0 && self.t_total.is_finite()) {
            return fail(format!("t_total must be positive, got {}", self.t_total));
        }
        if self.steps() == 0 {
            return fail("t_total / dt yields zero steps".into());
        }
        if !(0.0..1.0).contains(&self.equilibration_fraction) {
            return fail(format!("equilibration_fraction must lie in [0, 1), got {}", self.equilibration_fraction));
        }
        if self.n_replicas == 0 {
            return fail("n_replicas must be >= 1".into());
        }
        if self.boundary == Boundary::Periodic && self.shear_rate != 0.0 {
            return fail("shear_rate requires boundary = lees_edwards".into());
        }
        if !(self.mass > 0.0) {
            return fail(format!("mass must be positive, got {}", self.mass));
        }
        if self.rdf_every == 0 || self.output_every == 0 {
            return fail("rdf_every and output_every must be >= 1".into());
        }
        self.params()?;
        let sim_box = self.sim_box()?;
        if self.r_c + self.skin > 0.5 * sim_box.edge() {
            return fail(format!(
                "r_c + skin = {} exceeds half the box edge {:.4}; use more particles",
                self.r_c + self.skin,
                0.5 * sim_box.edge()
            ));
        }
        if self.rdf {
            RdfHistogram::new(self.rdf_bin_width, self.rdf_max_r.unwrap_or(0.5 * sim_box.edge()), &sim_box)?;
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value.parse().map_err(|_| DpdError::Config(format!("bad value for {key}: '{value}'")))
        }
        fn flag(key: &str, value: &str) -> Result<bool> {
            match value {
                "true" | "yes" | "1" | "on" => Ok(true),
                "false" | "no" | "0" | "off" => Ok(false),
                _ => Err(DpdError::Config(format!("bad value for {key}: '{value}'"))),
            }
        }
        match key {
            "n_particles" => self.n_particles = num(key, value)?,
            "density" => self.density = num(key, value)?,
            "a" => self.a = num(key, value)?,
            "gamma" => self.gamma = num(key, value)?,
            "kbt" => self.kbt = num(key, value)?,
            "r_c" => self.r_c = num(key, value)?,
            "integrator" => self.integrator = value.parse()?,
            "dt" => self.dt = num(key, value)?,
            "t_total" => self.t_total = num(key, value)?,
            "equilibration_fraction" => self.equilibration_fraction = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "n_replicas" => self.n_replicas = num(key, value)?,
            "boundary" => self.boundary = value.parse()?,
            "shear_rate" => self.shear_rate = num(key, value)?,
            "outputs" => self.outputs = PathBuf::from(value),
            "mass" => self.mass = num(key, value)?,
            "skin" => self.skin = num(key, value)?,
            "rdf" => self.rdf = flag(key, value)?,
            "rdf_bin_width" => self.rdf_bin_width = num(key, value)?,
            "rdf_max_r" => self.rdf_max_r = Some(num(key, value)?),
            "rdf_every" => self.rdf_every = num(key, value)?,
            "stress" => self.stress = flag(key, value)?,
            "stress_convention" => self.stress_convention = value.parse()?,
            "profile_bins" => self.profile_bins = num(key, value)?,
            "output_every" => self.output_every = num(key, value)?,
            _ => return Err(DpdError::Config(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Renders the config in the same `key = value` format it is parsed from.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("n_particles", self.n_particles.to_string());
        kv("density", self.density.to_string());
        kv("a", self.a.to_string());
        kv("gamma", self.gamma.to_string());
        kv("kbt", self.kbt.to_string());
        kv("r_c", self.r_c.to_string());
        kv("integrator", self.integrator.to_string());
        kv("dt", self.dt.to_string());
        kv("t_total", self.t_total.to_string());
        kv("equilibration_fraction", self.equilibration_fraction.to_string());
        kv("seed", self.seed.to_string());
        kv("n_replicas", self.n_replicas.to_string());
        kv("boundary", self.boundary.name().to_string());
        kv("shear_rate", self.shear_rate.to_string());
        kv("outputs", self.outputs.display().to_string());
        kv("mass", self.mass.to_string());
        kv("skin", self.skin.to_string());
        kv("rdf", self.rdf.to_string());
        kv("rdf_bin_width", self.rdf_bin_width.to_string());
        if let Some(r) = self.rdf_max_r {
            kv("rdf_max_r", r.to_string());
        }
        kv("rdf_every", self.rdf_every.to_string());
        kv("stress", self.stress.to_string());
        kv("stress_convention", self.stress_convention.name().to_string());
        kv("profile_bins", self.profile_bins.to_string());
        kv("output_every", self.output_every.to_string());
        s
    }
}

impl FromStr for RunConfig {
    type Err = DpdError;

    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| DpdError::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }
}

/// One row of the replica-averaged time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeRow {
    pub step: u64,
    pub kinetic_temp: f64,
    pub config_num: f64,
    pub config_den: f64,
    pub potential_energy: f64,
    pub momentum: Vector3<f64>,
    pub stress: Matrix3<f64>,
}

impl TimeRow {
    fn scaled(&self, k: f64) -> TimeRow {
        TimeRow {
            step: self.step,
            kinetic_temp: self.kinetic_temp * k,
            config_num: self.config_num * k,
            config_den: self.config_den * k,
            potential_energy: self.potential_energy * k,
            momentum: self.momentum * k,
            stress: self.stress * k,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReplicaReport {
    pub seed: u64,
    pub series: ObservableSeries,
    pub rdf: Option<RdfHistogram>,
    pub profile: Option<VelocityProfile>,
    pub rows: Vec<TimeRow>,
    /// `(step, reason)` of the first divergence.
    pub divergence: Option<(u64, String)>,
    pub net_y_crossings: i64,
    pub x_momentum_drift: f64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub config: RunConfig,
    pub steps: u64,
    pub sim_box: SimBox,
    pub replicas: Vec<ReplicaReport>,
}

fn run_replica(config: &RunConfig, replica: usize) -> Result<ReplicaReport> {
    let seed = config.seed.wrapping_add(replica as u64);
    let params = config.params()?;
    let sim_box = config.sim_box()?;
    let state = SystemState::random(config.n_particles, config.mass, config.kbt, &sim_box, seed)?;
    let initial_px = state.total_momentum().x;
    let mut sim = Simulation::new(state, sim_box, params, config.integrator, config.dt, seed, config.skin)?;
    sim.set_track_virial(config.stress);
    sim.set_thermostat_virial(config.stress_convention);

    let steps = config.steps();
    let mut series = ObservableSeries::new(steps, config.equilibration_fraction)?;
    let rdf_max = config.rdf_max_r.unwrap_or(0.5 * sim_box.edge());
    let mut rdf = config.rdf.then(|| RdfHistogram::new(config.rdf_bin_width, rdf_max, &sim_box)).transpose()?;
    let mut profile =
        (config.profile_bins > 0).then(|| VelocityProfile::new(config.profile_bins, &sim_box)).transpose()?;
    let mut rows = Vec::new();
    let mut divergence = None;

    for k in 1..=steps {
        if let Err(e) = sim.step() {
            match e {
                DpdError::Divergence { step, reason } => {
                    divergence = Some((step, reason));
                    break;
                }
                other => return Err(other),
            }
        }
        let collecting = series.is_collecting();
        let write_row = k % config.output_every == 0;
        if !(collecting || write_row) {
            series.push(&Sample {
                kinetic_temp: 0.0,
                config_num: 0.0,
                config_den: 0.0,
                potential_energy: 0.0,
                stress: Matrix3::zeros(),
            });
            continue;
        }
        let terms = sim.configurational_terms()?;
        let state = sim.state();
        let stress = if config.stress {
            stress_tensor(state, sim.sim_box(), sim.step_virial())
        } else {
            Matrix3::zeros()
        };
        let sample = Sample {
            kinetic_temp: kinetic_temperature(state, sim.sim_box()),
            config_num: terms.grad_sq,
            config_den: terms.laplacian,
            potential_energy: terms.potential_energy,
            stress,
        };
        series.push(&sample);
        if collecting {
            if let Some(h) = rdf.as_mut() {
                if k % config.rdf_every == 0 {
                    h.accumulate(state, sim.sim_box());
                }
            }
            if let Some(p) = profile.as_mut() {
                p.accumulate(state);
            }
        }
        if write_row {
            rows.push(TimeRow {
                step: k,
                kinetic_temp: sample.kinetic_temp,
                config_num: sample.config_num,
                config_den: sample.config_den,
                potential_energy: sample.potential_energy,
                momentum: state.total_momentum(),
                stress,
            });
        }
    }
    let counters = sim.counters();
    Ok(ReplicaReport {
        seed,
        series,
        rdf,
        profile,
        rows,
        divergence,
        net_y_crossings: counters.net_y_crossings,
        x_momentum_drift: sim.state().total_momentum().x - initial_px,
    })
}

/// Runs `n_replicas` independent trajectories (seed + replica index).
pub fn run_simulation(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let replicas = (0..config.n_replicas)
        .into_par_iter()
        .map(|r| run_replica(config, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(RunReport { config: config.clone(), steps: config.steps(), sim_box: config.sim_box()?, replicas })
}

impl RunReport {
    pub fn diverged(&self) -> Option<(u64, &str)> {
        self.replicas
            .iter()
            .filter_map(|r| r.divergence.as_ref().map(|(s, why)| (*s, why.as_str())))
            .min_by_key(|(s, _)| *s)
    }

    pub fn merged_series(&self) -> Result<ObservableSeries> {
        let mut it = self.replicas.iter();
        let mut merged = it.next().expect("at least one replica").series.clone();
        for r in it {
            merged.merge(&r.series);
        }
        Ok(merged)
    }

    /// Replica-merged estimate of `observable` and its standard error across replicas.
    pub fn estimate(&self, observable: Observable) -> Result<(f64, f64)> {
        let pick = |s: &ObservableSeries| match observable {
            Observable::ConfigTemp => s.configurational_temperature(),
            Observable::KineticTemp => s.mean_kinetic_temperature(),
        };
        let mean = pick(&self.merged_series()?)?;
        let per_replica = self.replicas.iter().map(|r| pick(&r.series)).collect::<Result<Vec<_>>>()?;
        Ok((mean, mean_and_std_err(&per_replica).1))
    }

    pub fn merged_rdf(&self) -> Result<Option<Vec<(f64, f64)>>> {
        let mut hists = self.replicas.iter().filter_map(|r| r.rdf.as_ref());
        let Some(first) = hists.next() else {
            return Ok(None);
        };
        let mut merged = first.clone();
        for h in hists {
            merged.merge(h)?;
        }
        merged.finalize(self.config.n_particles, &self.sim_box).map(Some)
    }

    pub fn merged_profile(&self) -> Option<VelocityProfile> {
        let mut it = self.replicas.iter().filter_map(|r| r.profile.as_ref());
        let mut merged = it.next()?.clone();
        for p in it {
            merged.merge(p);
        }
        Some(merged)
    }

    /// Shear viscosity from each replica's mean `σ_xy`.
    pub fn viscosity(&self) -> Result<ViscosityEstimate> {
        let per_replica = self
            .replicas
            .iter()
            .map(|r| r.series.mean_stress().map(|s| s[(0, 1)]))
            .collect::<Result<Vec<_>>>()?;
        viscosity_estimate(&per_replica, self.sim_box.shear_rate())
    }

    /// Replica-averaged rows, truncated to the shortest replica.
    pub fn averaged_rows(&self) -> Vec<TimeRow> {
        let len = self.replicas.iter().map(|r| r.rows.len()).min().unwrap_or(0);
        let k = 1.0 / self.replicas.len() as f64;
        (0..len)
            .map(|t| {
                let mut acc = self.replicas[0].rows[t];
                for r in &self.replicas[1..] {
                    let row = &r.rows[t];
                    acc.kinetic_temp += row.kinetic_temp;
                    acc.config_num += row.config_num;
                    acc.config_den += row.config_den;
                    acc.potential_energy += row.potential_energy;
                    acc.momentum += row.momentum;
                    acc.stress += row.stress;
                }
                acc.scaled(k)
            })
            .collect()
    }

    /// Writes observables.csv, summary.txt and, when enabled, rdf.csv,
    /// stress.csv and profile.csv into `config.outputs`.
    pub fn write_outputs(&self) -> Result<Vec<PathBuf>> {
        let dir = &self.config.outputs;
        fs::create_dir_all(dir)?;
        let dt = self.config.dt;
        let rows = self.averaged_rows();
        let mut written = Vec::new();

        let mut obs = String::from("step,time,kinetic_temp,config_temp_num,config_temp_den,potential_energy,px,py,pz\n");
        for r in &rows {
            let _ = writeln!(
                obs,
                "{},{},{},{},{},{},{},{},{}",
                r.step,
                r.step as f64 * dt,
                r.kinetic_temp,
                r.config_num,
                r.config_den,
                r.potential_energy,
                r.momentum.x,
                r.momentum.y,
                r.momentum.z
            );
        }
        written.push(write_file(dir.join("observables.csv"), &obs)?);

        if self.config.stress {
            let mut st = String::from("step,time,sxx,syy,szz,sxy,sxz,syz\n");
            for r in &rows {
                let s = &r.stress;
                let _ = writeln!(
                    st,
                    "{},{},{},{},{},{},{},{}",
                    r.step,
                    r.step as f64 * dt,
                    s[(0, 0)],
                    s[(1, 1)],
                    s[(2, 2)],
                    s[(0, 1)],
                    s[(0, 2)],
                    s[(1, 2)]
                );
            }
            written.push(write_file(dir.join("stress.csv"), &st)?);
        }
        if let Some(g) = self.merged_rdf()? {
            written.push(write_file(dir.join("rdf.csv"), &rdf_csv(&g))?);
        }
        if let Some(p) = self.merged_profile() {
            let mut s = String::from("y,vx\n");
            for (y, v) in p.profile() {
                let _ = writeln!(s, "{y},{v}");
            }
            written.push(write_file(dir.join("profile.csv"), &s)?);
        }
        written.push(write_file(dir.join("summary.txt"), &self.summary())?);
        Ok(written)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let c = &self.config;
        let _ = writeln!(s, "integrator = {}", c.integrator);
        let _ = writeln!(s, "dt = {}", c.dt);
        let _ = writeln!(s, "steps = {}", self.steps);
        let _ = writeln!(s, "replicas = {}", c.n_replicas);
        let _ = writeln!(s, "box_edge = {}", self.sim_box.edge());
        match self.diverged() {
            Some((step, why)) => {
                let _ = writeln!(s, "diverged = true");
                let _ = writeln!(s, "first_bad_step = {step}");
                let _ = writeln!(s, "reason = {why}");
            }
            None => {
                let _ = writeln!(s, "diverged = false");
            }
        }
        if let Ok((t, se)) = self.estimate(Observable::ConfigTemp) {
            let _ = writeln!(s, "config_temp = {t}");
            let _ = writeln!(s, "config_temp_std_err = {se}");
        }
        if let Ok((t, se)) = self.estimate(Observable::KineticTemp) {
            let _ = writeln!(s, "kinetic_temp = {t}");
            let _ = writeln!(s, "kinetic_temp_std_err = {se}");
        }
        if c.stress && self.sim_box.is_sheared() {
            if let Ok(v) = self.viscosity() {
                let _ = writeln!(s, "viscosity = {}", v.eta);
                let _ = writeln!(s, "viscosity_std_err = {}", v.std_err);
            }
        }
        if let Some(slope) = self.merged_profile().and_then(|p| p.slope()) {
            let _ = writeln!(s, "profile_slope = {slope}");
        }
        s
    }
}

fn write_file(path: PathBuf, contents: &str) -> Result<PathBuf> {
    fs::write(&path, contents)?;
    Ok(path)
}

pub fn rdf_csv(g: &[(f64, f64)]) -> String {
    let mut s = String::from("r,g\n");
    for (r, v) in g {
        let _ = writeln!(s, "{r},{v}");
    }
    s
}

pub fn read_rdf_csv(path: impl AsRef<Path>) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::Reader::from_path(path)?;
    rdr.deserialize::<(f64, f64)>().map(|r| r.map_err(DpdError::from)).collect()
}

/// One stepsize of a sweep. Diverged rows carry no observable values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub dt: f64,
    pub observable_mean: Option<f64>,
    pub rel_error: Option<f64>,
    pub std_err: Option<f64>,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn from_rows(mut rows: Vec<SweepRow>) -> Self {
        rows.sort_by(|a, b| a.dt.total_cmp(&b.dt));
        Self { rows }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| DpdError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| DpdError::Io(e.to_string()))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let rows = rdr.deserialize::<SweepRow>().collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self::from_rows(rows))
    }

    /// Least-squares slope of `ln(rel_error)` against `ln(dt)` over stable rows in `[dt_lo, dt_hi]`.
    pub fn loglog_slope(&self, dt_lo: f64, dt_hi: f64) -> Option<f64> {
        let pts: Vec<_> = self
            .rows
            .iter()
            .filter(|r| !r.diverged && r.dt >= dt_lo && r.dt <= dt_hi)
            .filter_map(|r| r.rel_error.filter(|e| *e > 0.0).map(|e| (r.dt.ln(), e.ln())))
            .collect();
        crate::observables::linear_fit(&pts).map(|(s, _)| s)
    }

    /// Slope over the stable rows with relative error below `max_error`.
    pub fn low_error_slope(&self, max_error: f64) -> Option<f64> {
        let rows: Vec<_> =
            self.rows.iter().filter(|r| !r.diverged && r.rel_error.is_some_and(|e| e <= max_error)).collect();
        let (lo, hi) = (rows.first()?.dt, rows.last()?.dt);
        self.loglog_slope(lo, hi)
    }
}

/// Runs `base` at each stepsize in `dts` and records the error of `observable` against `k_B T`.
pub fn sweep_over(base: &RunConfig, dts: &[f64], observable: Observable) -> Result<SweepResult> {
    let mut rows = Vec::with_capacity(dts.len());
    for &dt in dts {
        rows.push(sweep_row(base, dt, observable)?);
    }
    Ok(SweepResult::from_rows(rows))
}

fn sweep_row(base: &RunConfig, dt: f64, observable: Observable) -> Result<SweepRow> {
    let config = RunConfig { dt, ..base.clone() };
    let report = run_simulation(&config)?;
    if report.diverged().is_some() {
        return Ok(SweepRow { dt, observable_mean: None, rel_error: None, std_err: None, diverged: true });
    }
    let (mean, se) = report.estimate(observable)?;
    Ok(SweepRow {
        dt,
        observable_mean: Some(mean),
        rel_error: Some((mean - base.kbt).abs() / base.kbt),
        std_err: Some(se / base.kbt),
        diverged: false,
    })
}

/// Geometric stepsize sweep from `dt_start`, stopping at divergence, at a
/// relative error above 100%, or past `dt_max`.
pub fn convergence_sweep(
    base: &RunConfig,
    dt_start: f64,
    dt_growth: f64,
    observable: Observable,
    dt_max: Option<f64>,
) -> Result<SweepResult> {
    if !(dt_start > 0.0) || !(dt_growth > 1.0) {
        return Err(DpdError::Config(format!("need dt_start > 0 and growth > 1, got {dt_start}, {dt_growth}")));
    }
    let mut rows = Vec::new();
    let mut dt = dt_start;
    loop {
        if dt_max.is_some_and(|m| dt > m * (1.0 + 1e-12)) {
            break;
        }
        let row = sweep_row(base, dt, observable)?;
        rows.push(row);
        if row.diverged || row.rel_error.is_some_and(|e| e > 1.0) {
            break;
        }
        dt *= dt_growth;
    }
    Ok(SweepResult::from_rows(rows))
}

/// Stepsize at which the relative error first reaches `threshold`,
/// interpolated linearly in log-log between the straddling stable rows.
pub fn critical_stepsize(sweep: &SweepResult, threshold: f64) -> Result<f64> {
    let stable: Vec<(f64, f64)> =
        sweep.rows.iter().take_while(|r| !r.diverged).filter_map(|r| r.rel_error.map(|e| (r.dt, e))).collect();
    let k = stable
        .iter()
        .position(|&(_, e)| e >= threshold)
        .ok_or_else(|| DpdError::NotDetermined(format!("relative error never reaches {threshold} in stable rows")))?;
    let (dt_hi, e_hi) = stable[k];
    if e_hi == threshold {
        return Ok(dt_hi);
    }
    if k == 0 {
        return Err(DpdError::NotDetermined(format!(
            "smallest stepsize {dt_hi} already exceeds relative error {threshold}"
        )));
    }
    let (dt_lo, e_lo) = stable[k - 1];
    if e_lo <= 0.0 {
        return Ok(dt_lo + (dt_hi - dt_lo) * (threshold - e_lo) / (e_hi - e_lo));
    }
    let t = (threshold.ln() - e_lo.ln()) / (e_hi.ln() - e_lo.ln());
    Ok((dt_lo.ln() + t * (dt_hi.ln() - dt_lo.ln())).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyInput {
    pub method: String,
    pub critical_dt: Option<f64>,
    pub ms_per_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyRow {
    pub method: String,
    pub critical_dt: f64,
    pub ms_per_step: f64,
    pub scaled_efficiency_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EfficiencyTable {
    pub rows: Vec<EfficiencyRow>,
    /// Methods left out because their critical stepsize is missing.
    pub notes: Vec<String>,
}

impl EfficiencyTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| DpdError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| DpdError::Io(e.to_string()))
    }
}

/// Efficiency `dt*/time` of each method relative to `baseline`, in percent.
pub fn efficiency_table(inputs: &[EfficiencyInput], baseline: &str) -> Result<EfficiencyTable> {
    let base = inputs
        .iter()
        .find(|i| i.method == baseline)
        .ok_or_else(|| DpdError::Config(format!("baseline method '{baseline}' not among inputs")))?;
    let base_dt = base
        .critical_dt
        .ok_or_else(|| DpdError::NotDetermined(format!("baseline '{baseline}' has no critical stepsize")))?;
    let base_eff = base_dt / base.ms_per_step;
    let mut table = EfficiencyTable::default();
    for i in inputs {
        match i.critical_dt {
            Some(dt) => table.rows.push(EfficiencyRow {
                method: i.method.clone(),
                critical_dt: dt,
                ms_per_step: i.ms_per_step,
                scaled_efficiency_pct: 100.0 * (dt / i.ms_per_step) / base_eff,
            }),
            None => table.notes.push(format!("{}: critical stepsize not determined, row omitted", i.method)),
        }
    }
    Ok(table)
}

/// Wall-clock milliseconds per integration step, observables off.
pub fn time_per_step(config: &RunConfig, scheme: Scheme, steps: u64) -> Result<f64> {
    let config = RunConfig { integrator: scheme, n_replicas: 1, ..config.clone() };
    config.validate()?;
    let sim_box = config.sim_box()?;
    let state = SystemState::random(config.n_particles, config.mass, config.kbt, &sim_box, config.seed)?;
    let mut sim = Simulation::new(state, sim_box, config.params()?, scheme, config.dt, config.seed, config.skin)?;
    // Warm-up so list building at start-up does not dominate short timings.
    sim.run(steps.min(100))?;
    let start = Instant::now();
    sim.run(steps)?;
    Ok(start.elapsed().as_secs_f64() * 1e3 / steps as f64)
}

/// Timings for several schemes; `method,ms_per_step` CSV.
pub fn timing_csv(timings: &BTreeMap<Scheme, f64>) -> String {
    let mut s = String::from("method,ms_per_step\n");
    for (m, t) in timings {
        let _ = writeln!(s, "{m},{t}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn row(dt: f64, e: f64) -> SweepRow {
        SweepRow { dt, observable_mean: Some(1.0 + e), rel_error: Some(e), std_err: Some(0.0), diverged: false }
    }

    #[test]
    fn config_parsing() {
        let cfg: RunConfig = "# test\nn_particles = 100\n integrator = s1 # inline\nseed=9\nboundary = lees_edwards\nshear_rate = 0.2\n"
            .parse()
            .unwrap();
        assert_eq!(cfg.n_particles, 100);
        assert_eq!(cfg.integrator, Scheme::S1);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.boundary, Boundary::LeesEdwards);
        let round: RunConfig = cfg.to_config_string().parse().unwrap();
        assert_eq!(round, cfg);
        assert!("bogus = 1".parse::<RunConfig>().is_err());
        assert!("dt 0.1".parse::<RunConfig>().is_err());
        assert!("integrator = baoab".parse::<RunConfig>().is_err());
    }

    #[test]
    fn step_count_rounds_down() {
        let cfg = RunConfig { t_total: 200.0, dt: 0.01, ..RunConfig::default() };
        assert_eq!(cfg.steps(), 20000);
        let cfg = RunConfig { t_total: 1.0, dt: 0.3, ..RunConfig::default() };
        assert_eq!(cfg.steps(), 3);
    }

    #[test]
    fn validation_catches_bad_configs() {
        let ok = RunConfig { n_particles: 200, t_total: 1.0, ..RunConfig::default() };
        assert!(ok.validate().is_ok());
        assert!(RunConfig { n_replicas: 0, ..ok.clone() }.validate().is_err());
        assert!(RunConfig { shear_rate: 0.2, ..ok.clone() }.validate().is_err());
        assert!(RunConfig { n_particles: 20, ..ok.clone() }.validate().is_err());
        assert!(RunConfig { gamma: -1.0, ..ok.clone() }.validate().is_err());
    }

    #[test]
    fn critical_stepsize_interpolates() {
        let sweep = SweepResult::from_rows(vec![row(0.01, 0.01), row(0.02, 0.04), row(0.04, 0.16)]);
        // Exact power law e = 100 dt^2 crosses 0.1 at dt = sqrt(1e-3).
        assert_relative_eq!(critical_stepsize(&sweep, 0.1).unwrap(), 1e-3f64.sqrt(), max_relative = 1e-12);
        assert_eq!(critical_stepsize(&sweep, 0.04).unwrap(), 0.02);
        assert!(matches!(critical_stepsize(&sweep, 0.5), Err(DpdError::NotDetermined(_))));
        assert_relative_eq!(sweep.loglog_slope(0.0, 1.0).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn diverged_rows_end_the_stable_region() {
        let mut rows = vec![row(0.01, 0.01), row(0.02, 0.05)];
        rows.push(SweepRow { dt: 0.03, observable_mean: None, rel_error: None, std_err: None, diverged: true });
        let sweep = SweepResult::from_rows(rows);
        assert!(critical_stepsize(&sweep, 0.1).is_err());
    }

    #[test]
    fn efficiency_examples() {
        let inputs = vec![
            EfficiencyInput { method: "vv".into(), critical_dt: Some(0.050), ms_per_step: 6.829 },
            EfficiencyInput { method: "s1".into(), critical_dt: Some(0.057), ms_per_step: 7.852 },
            EfficiencyInput { method: "aboba".into(), critical_dt: Some(0.116), ms_per_step: 7.742 },
            EfficiencyInput { method: "none".into(), critical_dt: None, ms_per_step: 1.0 },
        ];
        let t = efficiency_table(&inputs, "vv").unwrap();
        let pct: Vec<_> = t.rows.iter().map(|r| (r.scaled_efficiency_pct * 10.0).round() / 10.0).collect();
        assert_eq!(pct[0], 100.0);
        assert_eq!(pct[2], 204.6);
        assert_eq!(t.notes.len(), 1);

        let high_friction = vec![
            EfficiencyInput { method: "s1".into(), critical_dt: Some(0.044), ms_per_step: 7.852 },
            EfficiencyInput { method: "aboba".into(), critical_dt: Some(0.116), ms_per_step: 7.742 },
        ];
        let t = efficiency_table(&high_friction, "s1").unwrap();
        assert_relative_eq!(t.rows[0].scaled_efficiency_pct, 100.0);
        assert_eq!((t.rows[1].scaled_efficiency_pct * 10.0).round() / 10.0, 267.4);
        assert!(efficiency_table(&inputs, "baoab").is_err());
    }

    #[test]
    fn sweep_csv_round_trip() {
        let mut rows = vec![row(0.02, 0.04), row(0.01, 0.01)];
        rows.push(SweepRow { dt: 0.03, observable_mean: None, rel_error: None, std_err: None, diverged: true });
        let sweep = SweepResult::from_rows(rows);
        let text = sweep.to_csv().unwrap();
        assert!(text.starts_with("dt,observable_mean,rel_error,std_err,diverged\n"));
        assert!(text.contains("0.03,,,,true"));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        fs::write(&path, &text).unwrap();
        assert_eq!(SweepResult::read_csv(&path).unwrap(), sweep);
    }
}
