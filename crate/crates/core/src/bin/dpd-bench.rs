use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dpd::harness::{
    convergence_sweep, critical_stepsize, efficiency_table, rdf_csv, run_simulation, time_per_step, timing_csv,
    EfficiencyInput, SweepResult,
};
use dpd::{DpdError, Observable, RunConfig, Scheme};

#[derive(Parser)]
#[command(name = "dpd-bench", about = "DPD integrator benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the replicas described by a config file and write CSV outputs.
    Simulate { config: PathBuf },
    /// Geometric stepsize sweep; writes sweep.csv.
    Sweep {
        config: PathBuf,
        #[arg(long, default_value = "ctemp")]
        observable: String,
        #[arg(long, default_value_t = 0.01)]
        dt_start: f64,
        #[arg(long, default_value_t = 1.15)]
        dt_growth: f64,
        #[arg(long)]
        dt_max: Option<f64>,
    },
    /// g(r) at each listed stepsize; writes rdf_dt<dt>.csv.
    Rdf {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        dts: Vec<f64>,
    },
    /// Shear viscosity under Lees-Edwards flow.
    Viscosity { config: PathBuf },
    /// Efficiency table from sweep CSVs named <method>.csv or <method>_*.csv.
    Efficiency {
        sweeps: Vec<PathBuf>,
        #[arg(long)]
        baseline: String,
        /// CSV with `method,ms_per_step`, as written by `timing`.
        #[arg(long)]
        timing: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        threshold: f64,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Wall time per step for every integrator; writes timing.csv.
    Timing {
        config: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        steps: u64,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                DpdError::Config(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn run(command: Command) -> dpd::Result<ExitCode> {
    match command {
        Command::Simulate { config } => {
            let cfg = RunConfig::from_file(config)?;
            let report = run_simulation(&cfg)?;
            for path in report.write_outputs()? {
                println!("wrote {}", path.display());
            }
            print!("{}", report.summary());
            if let Some((step, why)) = report.diverged() {
                eprintln!("diverged at step {step}: {why}");
                return Ok(ExitCode::from(3));
            }
        }
        Command::Sweep { config, observable, dt_start, dt_growth, dt_max } => {
            let cfg = RunConfig::from_file(config)?;
            let obs: Observable = observable.parse()?;
            let sweep = convergence_sweep(&cfg, dt_start, dt_growth, obs, dt_max)?;
            fs::create_dir_all(&cfg.outputs)?;
            let path = cfg.outputs.join("sweep.csv");
            fs::write(&path, sweep.to_csv()?)?;
            print!("{}", sweep.to_csv()?);
            match sweep.low_error_slope(0.5) {
                Some(s) => println!("log-log slope = {s:.3}"),
                None => println!("log-log slope = n/a"),
            }
            match critical_stepsize(&sweep, 0.1) {
                Ok(dt) => println!("critical dt (10%) = {dt:.4}"),
                Err(e) => println!("critical dt (10%): {e}"),
            }
            println!("wrote {}", path.display());
        }
        Command::Rdf { config, dts } => {
            let base = RunConfig::from_file(config)?;
            fs::create_dir_all(&base.outputs)?;
            for dt in dts {
                let cfg = RunConfig { dt, rdf: true, ..base.clone() };
                let report = run_simulation(&cfg)?;
                if let Some((step, why)) = report.diverged() {
                    println!("dt = {dt}: diverged at step {step} ({why})");
                    continue;
                }
                let g = report.merged_rdf()?.expect("rdf enabled");
                let path = base.outputs.join(format!("rdf_dt{dt}.csv"));
                fs::write(&path, rdf_csv(&g))?;
                println!("wrote {}", path.display());
            }
        }
        Command::Viscosity { config } => {
            let cfg = RunConfig { stress: true, ..RunConfig::from_file(config)? };
            let report = run_simulation(&cfg)?;
            report.write_outputs()?;
            if let Some((step, why)) = report.diverged() {
                println!("diverged at step {step}: {why}");
                return Ok(ExitCode::FAILURE);
            }
            let v = report.viscosity()?;
            println!("viscosity = {:.5} +/- {:.5}", v.eta, v.std_err);
        }
        Command::Efficiency { sweeps, baseline, timing, threshold, output } => {
            let times = read_timing(&timing)?;
            let mut inputs = Vec::new();
            for path in &sweeps {
                let method = method_from_path(path)?;
                let sweep = SweepResult::read_csv(path)?;
                let ms = *times
                    .get(&method)
                    .ok_or_else(|| DpdError::Config(format!("no timing for method '{method}'")))?;
                inputs.push(EfficiencyInput { critical_dt: critical_stepsize(&sweep, threshold).ok(), method, ms_per_step: ms });
            }
            let table = efficiency_table(&inputs, &baseline)?;
            let text = table.to_csv()?;
            print!("{text}");
            for note in &table.notes {
                eprintln!("note: {note}");
            }
            if let Some(out) = output {
                fs::write(out, text)?;
            }
        }
        Command::Timing { config, steps } => {
            let cfg = RunConfig::from_file(config)?;
            let mut timings = BTreeMap::new();
            for scheme in Scheme::ALL {
                let ms = time_per_step(&cfg, scheme, steps)?;
                timings.insert(scheme, ms);
            }
            let text = timing_csv(&timings);
            fs::create_dir_all(&cfg.outputs)?;
            fs::write(cfg.outputs.join("timing.csv"), &text)?;
            print!("{text}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn method_from_path(path: &std::path::Path) -> dpd::Result<String> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| DpdError::Config(format!("bad sweep path {}", path.display())))?;
    let head = stem.split('_').next().unwrap_or(stem);
    let scheme: Scheme = head.parse()?;
    Ok(scheme.name().to_string())
}

fn read_timing(path: &std::path::Path) -> dpd::Result<BTreeMap<String, f64>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = BTreeMap::new();
    for rec in rdr.deserialize::<(String, f64)>() {
        let (m, t) = rec?;
        let scheme: Scheme = m.parse()?;
        out.insert(scheme.name().to_string(), t);
    }
    Ok(out)
}
