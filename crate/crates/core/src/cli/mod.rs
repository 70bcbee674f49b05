//! Batch front-end: config loading, energy sweeps and output files.

mod config;
pub mod output;
pub mod verify;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{DistributionSpec, Mode, RunConfig, SCHEMA_VERSION};

use crate::energy::Energy;
use crate::ensemble::EnsembleConfig;
use crate::ids::{energy_grid, full_curve, jump_set, IdsError};
use crate::scattering::hill_discriminant;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric abort at energy index {index}: {message}")]
    Numeric { index: usize, message: String },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numeric { .. } => 3,
            _ => 2,
        }
    }
}

impl From<IdsError> for CliError {
    fn from(e: IdsError) -> Self {
        match e {
            IdsError::Ensemble { index, .. } => CliError::Numeric {
                index,
                message: e.to_string(),
            },
            other => CliError::Config(other.to_string()),
        }
    }
}

/// Command-line overrides of config fields.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub points: Option<usize>,
    pub chain: Option<usize>,
    pub realizations: Option<usize>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(v) = o.seed {
            self.master_seed = v;
        }
        if let Some(v) = o.points {
            self.n_points = v;
        }
        if let Some(v) = o.chain {
            self.chain_length = v;
        }
        if let Some(v) = o.realizations {
            self.realizations = v;
        }
        if let Some(v) = &o.out {
            self.output_path = v.clone();
        }
        if o.workers.is_some() {
            self.workers = o.workers;
        }
        self.validate()
    }
}

/// What a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub rows: usize,
    pub files: Vec<PathBuf>,
    /// `false` only when `verify` found a failing check.
    pub passed: bool,
}

fn write(path: &Path, contents: &str) -> Result<PathBuf, CliError> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, contents).map_err(io)?;
    Ok(path.to_path_buf())
}

/// Executes `mode` on a validated config.
pub fn run(config: &RunConfig, mode: Mode) -> Result<RunReport, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_mode(config, mode))
}

fn run_mode(config: &RunConfig, mode: Mode) -> Result<RunReport, CliError> {
    let dist = config.distribution.build()?;
    let grid = energy_grid(config.e_min, config.e_max, config.n_points, config.sqrt_grid);
    let path = &config.output_path;
    match mode {
        Mode::Ids | Mode::Lyapunov => {
            let ensemble = EnsembleConfig {
                chain_length: config.chain_length,
                realizations: config.realizations,
                seed: config.master_seed,
                field: config.magnetic_field,
            };
            let curve = full_curve(&dist, &grid, &ensemble)?;
            let csv = write(path, &output::curve_csv(&curve))?;
            let xs = curve.energies();
            let (ys, title, label): (Vec<f64>, _, _) = if mode == Mode::Ids {
                (curve.points.iter().map(|p| p.n_total).collect(), "Integrated density of states", "N(E)")
            } else {
                (curve.points.iter().map(|p| p.gamma).collect(), "Lyapunov exponent", "gamma(E)")
            };
            let svg = write(&path.with_extension("svg"), &output::line_plot(&xs, &ys, title, "E", label))?;
            Ok(RunReport {
                rows: curve.points.len(),
                files: vec![csv, svg],
                passed: true,
            })
        }
        Mode::Jumps => {
            let jumps = jump_set(&dist, config.e_max, config.magnetic_field);
            let csv = write(path, &output::jumps_csv(&jumps))?;
            Ok(RunReport {
                rows: jumps.len(),
                files: vec![csv],
                passed: true,
            })
        }
        Mode::Bands => {
            let omega = config.periodic_length()?;
            let rows: Vec<(f64, f64, bool)> = grid
                .iter()
                .map(|&x| {
                    let h = hill_discriminant(Energy::new(x).expect("validated grid"), omega);
                    (x, h, h.abs() <= 2.0)
                })
                .collect();
            let csv = write(path, &output::bands_csv(&rows))?;
            Ok(RunReport {
                rows: rows.len(),
                files: vec![csv],
                passed: true,
            })
        }
        Mode::Verify => {
            let results = verify::run_suite(config.chain_length, config.master_seed);
            print!("{}", verify::render_table(&results));
            let mut csv = String::from("check,passed,detail\n");
            for r in &results {
                csv.push_str(&format!("{},{},\"{}\"\n", r.name, r.passed, r.detail.replace('"', "'")));
            }
            let file = write(path, &csv)?;
            Ok(RunReport {
                rows: results.len(),
                files: vec![file],
                passed: results.iter().all(|r| r.passed),
            })
        }
    }
}
