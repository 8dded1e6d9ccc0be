//! Experiment runner: `run`, `list` and `plot-data`.
//!
//! Exit statuses: 0 when every check passes, 2 for configuration or input errors, 3 when a
//! numerical contract fails, 4 for engine errors.

pub mod config;
pub mod report;
pub mod studies;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

pub use config::{ExperimentConfig, Study};
pub use report::{Check, Report, RunInfo, Series};

use crate::error::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_ENGINE: i32 = 4;

/// Environment variable naming the default report directory.
pub const OUT_ENV: &str = "WARPCONV_OUT";
const DEFAULT_OUT: &str = "warpconv-out";

#[derive(Debug, Parser)]
#[command(name = "warpconv", version, about = "Warped-convolution experiments on finite grids and Fock spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Run a study and write its JSON report and CSV of headline numbers.
    Run(RunArgs),
    /// List the available studies.
    List,
    /// Print a convergence series of a report as two-column CSV.
    PlotData {
        /// Report written by `run`.
        report: PathBuf,
        /// Series name; the first series when omitted.
        #[arg(long)]
        series: Option<String>,
        /// Write to this file instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// List the series names instead.
        #[arg(long)]
        list: bool,
    },
}

/// Flags override the matching configuration fields.
#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// Study name; overrides `study` in the config.
    pub study: Option<String>,
    /// TOML or JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// deformation.b: axial vector of the skew matrix.
    #[arg(long = "B", num_args = 3, value_names = ["B1", "B2", "B3"], allow_negative_numbers = true)]
    pub b: Option<Vec<f64>>,
    /// deformation.n: exponents of Q = X/|X|^n.
    #[arg(long, num_args = 1.., allow_negative_numbers = true)]
    pub n: Option<Vec<f64>>,
    /// fock.theta_spatial
    #[arg(long, allow_negative_numbers = true)]
    pub theta_spatial: Option<f64>,
    /// fock.modes_per_axis
    #[arg(long)]
    pub modes_per_axis: Option<usize>,
    /// fock.max_particles
    #[arg(long)]
    pub max_particles: Option<usize>,
    /// grid.points_per_axis
    #[arg(long)]
    pub points_per_axis: Option<usize>,
    /// grid.half_width
    #[arg(long)]
    pub half_width: Option<f64>,
    /// warp.quad_points
    #[arg(long)]
    pub quad_points: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub b_cap: Option<f64>,
    /// Run the parts of full-dossier in parallel.
    #[arg(long)]
    pub parallel: bool,
    /// output.dir; falls back to WARPCONV_OUT.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// output.stem
    #[arg(long)]
    pub stem: Option<String>,
}

impl RunArgs {
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        if let Some(s) = &self.study {
            cfg.study = Study::parse(s).ok_or_else(|| {
                let names: Vec<&str> = Study::ALL.iter().map(|s| s.name()).collect();
                Error::Config(format!("study: unknown study {s:?}; expected one of {}", names.join(", ")))
            })?;
        }
        if let Some(b) = &self.b {
            cfg.deformation.b = [b[0], b[1], b[2]];
        }
        if let Some(n) = &self.n {
            cfg.deformation.n = n.clone();
        }
        if let Some(v) = self.theta_spatial {
            cfg.fock.theta_spatial = Some(v);
        }
        if let Some(v) = self.modes_per_axis {
            cfg.fock.modes_per_axis = v;
        }
        if let Some(v) = self.max_particles {
            cfg.fock.max_particles = v;
        }
        if let Some(v) = self.points_per_axis {
            cfg.grid.points_per_axis = v;
        }
        if let Some(v) = self.half_width {
            cfg.grid.half_width = v;
        }
        if let Some(v) = self.quad_points {
            cfg.warp.quad_points = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.b_cap {
            cfg.b_cap = v;
        }
        if self.parallel {
            cfg.parallel = true;
        }
        if let Some(d) = &self.out_dir {
            cfg.output.dir = Some(d.clone());
        }
        if let Some(s) = &self.stem {
            cfg.output.stem = Some(s.clone());
        }
        cfg.validate()
    }
}

pub fn list_studies() -> String {
    Study::ALL.iter().map(|s| format!("{:<16} {}\n", s.name(), s.description())).collect()
}

/// Runs the configured study and stamps the report with timing data.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
    let t0 = Instant::now();
    let body = studies::run_study(cfg)?;
    Ok(body.finish(RunInfo { started_unix_s: started, wall_time_s: t0.elapsed().as_secs_f64() }))
}

/// Directory precedence: config or flag, then WARPCONV_OUT, then `warpconv-out`.
pub fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output
        .dir
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

pub fn emit_plot_data(path: &Path, series: Option<&str>) -> Result<String> {
    let text = std::fs::read_to_string(path)?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    report::plot_data(&v, series)
}

fn run_command(args: &RunArgs) -> i32 {
    let mut cfg = match &args.config {
        Some(p) => match ExperimentConfig::load(p) {
            Ok(c) => c,
            Err(e) => return fail(EXIT_CONFIG, "config error", &e),
        },
        None => ExperimentConfig::default(),
    };
    if let Err(e) = args.apply(&mut cfg) {
        return fail(EXIT_CONFIG, "config error", &e);
    }
    let report = match run_experiment(&cfg) {
        Ok(r) => r,
        Err(e @ Error::Config(_)) => return fail(EXIT_CONFIG, "config error", &e),
        Err(e) => return fail(EXIT_ENGINE, "engine error", &e),
    };
    let dir = output_dir(&cfg);
    let stem = cfg.output.stem.clone().unwrap_or_else(|| cfg.study.name().to_string());
    let (json, _) = match report.write(&dir, &stem) {
        Ok(p) => p,
        Err(e) => return fail(EXIT_ENGINE, "cannot write report", &e),
    };
    for c in report.failures() {
        let q = match (c.value, c.tolerance) {
            (Some(v), Some(t)) => format!("{v:.3e} (tolerance {t:.1e})"),
            _ => String::new(),
        };
        let detail = c.detail.as_deref().map(|d| format!(" {d}")).unwrap_or_default();
        eprintln!("FAIL {} {q}{detail}", c.name);
    }
    let total = report.body.checks.len();
    let passed = report.body.checks.iter().filter(|c| c.passed).count();
    println!(
        "{}: {passed}/{total} checks passed in {:.1} s; report {}",
        cfg.study,
        report.run.wall_time_s,
        json.display()
    );
    if report.body.passed {
        EXIT_OK
    } else {
        EXIT_NUMERICAL
    }
}

fn fail(code: i32, what: &str, e: &Error) -> i32 {
    eprintln!("{what}: {e}");
    code
}

/// Entry point of the binary; returns the exit status.
pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Run(a) => run_command(&a),
        Command::List => {
            print!("{}", list_studies());
            EXIT_OK
        }
        Command::PlotData { report, series, out, list } => {
            if list {
                return match std::fs::read_to_string(&report)
                    .map_err(Error::from)
                    .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).map_err(Error::from))
                {
                    Ok(v) => {
                        report::series_names(&v).iter().for_each(|n| println!("{n}"));
                        EXIT_OK
                    }
                    Err(e) => fail(EXIT_CONFIG, "input error", &e),
                };
            }
            let csv = match emit_plot_data(&report, series.as_deref()) {
                Ok(c) => c,
                Err(e) => return fail(EXIT_CONFIG, "input error", &e),
            };
            match out {
                Some(p) => match report::write_atomic(&p, csv.as_bytes()) {
                    Ok(()) => EXIT_OK,
                    Err(e) => fail(EXIT_ENGINE, "cannot write", &e),
                },
                None => {
                    print!("{csv}");
                    EXIT_OK
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_studies_listed() {
        assert_eq!(list_studies().lines().count(), 6);
    }

    #[test]
    fn flags_override_config() {
        let cli =
            Cli::try_parse_from(["warpconv", "run", "qm-deform", "--B", "0", "0", "-0.1", "--n", "1", "2"]).unwrap();
        let Command::Run(a) = cli.command else { panic!("expected run") };
        let mut cfg = ExperimentConfig::default();
        a.apply(&mut cfg).unwrap();
        assert_eq!(cfg.study, Study::QmDeform);
        assert_eq!(cfg.deformation.b, [0.0, 0.0, -0.1]);
        assert_eq!(cfg.deformation.n, vec![1.0, 2.0]);
    }

    #[test]
    fn unknown_study_is_config_error() {
        let a = RunArgs { study: Some("nope".into()), ..Default::default() };
        assert!(matches!(a.apply(&mut ExperimentConfig::default()), Err(Error::Config(_))));
        assert_eq!(main_from(["warpconv", "run", "nope"]), EXIT_CONFIG);
    }

    #[test]
    fn bad_flag_is_config_error() {
        assert_eq!(main_from(["warpconv", "run", "--B", "1", "2"]), EXIT_CONFIG);
    }
}
