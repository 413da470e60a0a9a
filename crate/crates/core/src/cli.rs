//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::dynamics::{evolve_checked, trajectory, write_trajectory_csv, EvolutionSpec};
use crate::error::{Error, Result};
use crate::estimators::{
    estimate_numeric, estimator_trajectory, estimator_trajectory_numeric, estimator_variance, optimal_observable,
    write_estimator_csv,
};
use crate::fisher::{
    drho, qfi_cat, qfi_closed, qfi_freq_lower_bound, qfi_numeric, qfi_quadratic_bound, qfi_time_lower_bound,
    Parameter,
};
use crate::hilbert::{load_model, CatSpec, SensorModel};
use crate::plot::heatmap_svg;
use crate::protocols::{heatmap_scan, maximize_ratio, GridSpec, Region, SearchBox};
use crate::schedule::NoiseSchedule;

#[derive(Debug, Parser)]
#[command(name = "dephase", version, about = "Dephasing-enhanced quantum metrology toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ParamArg {
    Time,
    Omega,
}

impl From<ParamArg> for Parameter {
    fn from(p: ParamArg) -> Self {
        match p {
            ParamArg::Time => Parameter::Time,
            ParamArg::Omega => Parameter::Omega,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Analytic,
    Numeric,
    Bound,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundArg {
    /// Commutator-norm bound for the chosen parameter.
    Lower,
    /// `tr[(∂ρ)²]`.
    Quadratic,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a model file and check its invariants.
    Validate {
        #[arg(long)]
        model: PathBuf,
    },
    /// Integrate the dephasing master equation from the model's cat state.
    Evolve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "none")]
        schedule: NoiseSchedule,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        dt: Option<f64>,
        /// Trajectory CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Record every n-th step in the trajectory.
        #[arg(long, default_value_t = 100)]
        stride: usize,
    },
    /// Quantum Fisher information of the evolved cat state.
    Qfi {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "none")]
        schedule: NoiseSchedule,
        #[arg(long)]
        t: f64,
        #[arg(long, value_enum)]
        param: ParamArg,
        #[arg(long, value_enum, default_value = "analytic")]
        method: MethodArg,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lower bounds on the QFI.
    Bound {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "none")]
        schedule: NoiseSchedule,
        #[arg(long)]
        t: f64,
        #[arg(long, value_enum)]
        param: ParamArg,
        #[arg(long = "kind", value_enum, default_value = "lower")]
        kind: BoundArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Error-propagation estimator with the model's optimal observable.
    Estimate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "none")]
        schedule: NoiseSchedule,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long, value_enum)]
        param: ParamArg,
        #[arg(long, value_enum, default_value = "analytic")]
        method: MethodArg,
        /// `start:stop:count` time sweep written as CSV.
        #[arg(long)]
        sweep: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Advantage-ratio heatmap.
    Scan {
        #[arg(long, value_enum)]
        param: ParamArg,
        /// `default_fig1`, inline JSON, or a JSON file.
        #[arg(long, default_value = "default_fig1")]
        grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Maximize the advantage ratio over a search box.
    Optimize {
        /// Model supplying δE, δL and ω; defaults to δE = 2ω, ω = 1, L = H.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum)]
        param: ParamArg,
        /// `t=<a>[:<b>],gamma=<a>[:<b>][,family=constant|ramp]`.
        #[arg(long = "box")]
        search_box: SearchBox,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn check_output(path: &Option<PathBuf>) -> Result<()> {
    if let Some(p) = path {
        let parent = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
        if !parent.is_dir() {
            return Err(Error::InvalidParameter(format!("output directory {} does not exist", parent.display())));
        }
        if p.is_dir() {
            return Err(Error::InvalidParameter(format!("output path {} is a directory", p.display())));
        }
    }
    Ok(())
}

fn check_input(path: &Path) -> Result<()> {
    if !path.is_file() {
        return Err(Error::Model(format!("{}: no such file", path.display())));
    }
    Ok(())
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let parent = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn check_time(t: f64) -> Result<f64> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("--t must be >= 0, got {t}")));
    }
    Ok(t)
}

fn parse_sweep(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidParameter(format!("sweep {s:?} is not start:stop:count"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n < 2 || !(a >= 0.0) || !(b > a) {
        return Err(bad());
    }
    Ok((0..n).map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect())
}

fn model_summary(model: &SensorModel) -> Result<Value> {
    let spec = model.cat_spec();
    Ok(json!({
        "kind": model.kind(),
        "N": model.size(),
        "omega": model.omega(),
        "dim": model.dim(),
        "lindblad_is_energy": model.lindblad_is_energy(),
        "commutator_norm": model.commutator_norm(),
        "spectrum_min": model.spectrum().first(),
        "spectrum_max": model.spectrum().last(),
        "delta_e": spec.delta_e,
        "delta_l": spec.delta_l,
        "max_lindblad_gap": model.max_lindblad_gap()?,
    }))
}

/// Output of a command: the text for standard output plus files to write.
struct Outcome {
    stdout: String,
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outcome {
    fn json<T: Serialize>(v: &T, out: &Option<PathBuf>) -> Result<Self> {
        let text = to_json(v)?;
        let files = out.iter().map(|p| (p.clone(), text.clone().into_bytes())).collect();
        Ok(Outcome { stdout: text, files })
    }
}

fn execute(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Validate { model } => {
            check_input(&model)?;
            let m = load_model(&model)?;
            let mut v = model_summary(&m)?;
            v["valid"] = json!(true);
            Outcome::json(&v, &None)
        }

        Command::Evolve { model, schedule, t, dt, out, stride } => {
            check_input(&model)?;
            check_output(&out)?;
            let m = load_model(&model)?;
            let mut spec = EvolutionSpec::new(m.clone(), schedule, check_time(t)?)?;
            if let Some(dt) = dt {
                spec = spec.with_dt(dt)?;
            }
            let rho0 = m.cat_state()?;
            let (evo, report) = evolve_checked(&spec, &rho0)?;
            let sub = evo.state.project(m.branches());
            let v = json!({
                "t": t,
                "schedule": spec.schedule.to_string(),
                "rho00": sub[(0, 0)].re,
                "rho11": sub[(1, 1)].re,
                "rho01": [sub[(0, 1)].re, sub[(0, 1)].im],
                "purity": evo.state.purity(),
                "steps": evo.steps,
                "convergence": report,
            });
            let mut outcome = Outcome::json(&v, &None)?;
            if let Some(p) = out {
                let rows = trajectory(&spec, &rho0, stride)?;
                let mut buf = Vec::new();
                write_trajectory_csv(&rows, &mut buf)?;
                outcome.files.push((p, buf));
            }
            Ok(outcome)
        }

        Command::Qfi { model, schedule, t, param, method, dt, out } => {
            check_input(&model)?;
            check_output(&out)?;
            let m = load_model(&model)?;
            let t = check_time(t)?;
            let p: Parameter = param.into();
            let report = match method {
                MethodArg::Analytic => qfi_cat(&m.cat_spec(), &schedule, t, p)?,
                MethodArg::Numeric => {
                    let mut spec = EvolutionSpec::new(m.clone(), schedule, t)?;
                    if let Some(dt) = dt {
                        spec = spec.with_dt(dt)?;
                    }
                    qfi_numeric(&spec, &m.cat_state()?, p)?
                }
                MethodArg::Bound => lower_bound(&m, &schedule, t, p)?,
                MethodArg::Closed => qfi_closed(&m, &m.cat_state()?, t, p)?,
            };
            Outcome::json(&report, &out)
        }

        Command::Bound { model, schedule, t, param, kind, out } => {
            check_input(&model)?;
            check_output(&out)?;
            let m = load_model(&model)?;
            let t = check_time(t)?;
            let p: Parameter = param.into();
            let report = match kind {
                BoundArg::Lower => lower_bound(&m, &schedule, t, p)?,
                BoundArg::Quadratic => {
                    let rho = crate::dynamics::evolve_exact(&m, &schedule, &m.cat_state()?, t)?;
                    let d = drho(&m, &schedule, &rho, t, p)?;
                    let mut r = qfi_quadratic_bound(&rho, &d)?;
                    r.parameter = Some(p);
                    r
                }
            };
            Outcome::json(&report, &out)
        }

        Command::Estimate { model, schedule, t, param, method, sweep, out } => {
            check_input(&model)?;
            check_output(&out)?;
            let m = load_model(&model)?;
            let p: Parameter = param.into();
            let spec = m.cat_spec();
            let numeric = match method {
                MethodArg::Analytic => false,
                MethodArg::Numeric => true,
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "estimate supports --method analytic|numeric, got {other:?}"
                    )))
                }
            };
            if let Some(s) = sweep {
                let times = parse_sweep(&s)?;
                let points = if numeric {
                    estimator_trajectory_numeric(&m, &optimal_observable(&m)?, &schedule, &times, p)?
                } else {
                    estimator_trajectory(&spec, &schedule, &times, p)?
                };
                let mut buf = Vec::new();
                write_estimator_csv(&points, &mut buf)?;
                let stdout = String::from_utf8(buf.clone()).expect("csv is utf-8");
                return Ok(Outcome { stdout, files: out.into_iter().map(|p| (p, buf.clone())).collect() });
            }
            let t = check_time(t.ok_or_else(|| Error::InvalidParameter("estimate needs --t or --sweep".into()))?)?;
            let report = if numeric {
                estimate_numeric(&m, &optimal_observable(&m)?, &schedule, &m.cat_state()?, t, p)?
            } else {
                estimator_variance(&spec, &schedule, t, p)?
            };
            let f = qfi_cat(&spec, &schedule, t, p)?;
            let v = json!({
                "estimate": report,
                "qfi": f.value,
                "saturation_ratio": report.variance_estimator * f.value,
            });
            Outcome::json(&v, &out)
        }

        Command::Scan { param, grid, out, svg } => {
            check_output(&out)?;
            check_output(&svg)?;
            let grid = GridSpec::resolve(&grid)?;
            let map = heatmap_scan(&grid, param.into())?;
            let mut csv = Vec::new();
            map.write_csv(&mut csv)?;
            let summary = json!({
                "parameter": map.parameter,
                "cells": map.cells.len(),
                "enhanced": map.count(Region::Enhanced),
                "hindered": map.count(Region::Hindered),
                "max_ratio": map.max_ratio(),
                "x_axis": grid.x_axis,
                "y_axis": grid.y_axis,
                "fixed": grid.fixed,
                "family": grid.family,
            });
            let mut outcome = Outcome::json(&summary, &None)?;
            if let Some(p) = out {
                outcome.files.push((p, csv));
            }
            if let Some(p) = svg {
                outcome.files.push((p, heatmap_svg(&map).into_bytes()));
            }
            Ok(outcome)
        }

        Command::Optimize { model, param, search_box, out } => {
            check_output(&out)?;
            let spec = match model {
                Some(path) => {
                    check_input(&path)?;
                    load_model(&path)?.cat_spec()
                }
                None => CatSpec::energy(2.0, 1.0)?,
            };
            let report = maximize_ratio(&spec, param.into(), &search_box)?;
            Outcome::json(&report, &out)
        }
    }
}

fn lower_bound(m: &SensorModel, schedule: &NoiseSchedule, t: f64, p: Parameter) -> Result<crate::fisher::QfiReport> {
    let rho = crate::dynamics::evolve_exact(m, schedule, &m.cat_state()?, t)?;
    match p {
        Parameter::Time => qfi_time_lower_bound(m, schedule, &rho, t),
        Parameter::Omega => qfi_freq_lower_bound(m, schedule, &rho, t),
    }
}

fn error_line(kind: &str, message: &str) -> String {
    json!({ "error": kind, "message": message }).to_string()
}

/// Parses `argv`, runs the command and returns the process exit code:
/// 0 on success, 1 on validation errors, 2 on numerical-contract violations.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            let _ = writeln!(stderr, "{}", error_line("usage", first));
            return 1;
        }
    };
    let result = execute(cli.command).and_then(|outcome| {
        for (path, bytes) in &outcome.files {
            write_atomic(path, bytes)?;
        }
        Ok(outcome.stdout)
    });
    match result {
        Ok(text) => {
            let _ = stdout.write_all(text.as_bytes());
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "{}", error_line(e.kind(), &e.to_string()));
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}
