//! Convergence experiments: random band-limited test signal, sampling,
//! multi-pass fitting, and CSV traces of the coefficient error per pass.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use thiserror::Error;

use crate::harmonics::CoefficientVector;
use crate::irf::{
    residual_operator_check, run_passes, BlockSystems, FitReport, IrfConfig, IrfError,
    DEFAULT_OPERATOR_CAP,
};
use crate::partition::{Partition, PartitionChoice, PartitionError};
use crate::rng::{PortableRng, SIGNAL_STREAM};
use crate::sampling::{attach_signal, SamplingError, SamplingScheme};

/// ε_max threshold used when counting passes to convergence.
pub const PASSES_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("solver failed for {context}: {source}")]
    Solver {
        context: String,
        #[source]
        source: IrfError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl ExperimentError {
    /// 1 for solver and output failures, 2 for configuration errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Solver { .. } | Self::Io { .. } | Self::Csv(_) => 1,
            Self::Config(_) | Self::Sampling(_) | Self::Partition(_) => 2,
        }
    }
}

/// `L²` coefficients with real and imaginary parts uniform on `[-1, 1)`,
/// drawn in flat order (real part first) from the signal stream of `seed`.
pub fn generate_test_signal(band_limit: usize, seed: u64) -> CoefficientVector {
    let mut rng = PortableRng::new(seed, SIGNAL_STREAM);
    let values = (0..band_limit * band_limit)
        .map(|_| {
            let re = rng.next_symmetric();
            let im = rng.next_symmetric();
            Complex64::new(re, im)
        })
        .collect();
    CoefficientVector::from_values(band_limit.max(1), values).expect("L² values")
}

#[derive(Debug, Clone, PartialEq)]
pub enum PartitionSpec {
    Choice(PartitionChoice),
    File(PathBuf),
}

impl PartitionSpec {
    /// `1`–`4` (or a choice name) select a named partition; anything else is
    /// read as a partition JSON file.
    pub fn parse(arg: &str) -> Self {
        match arg.parse::<PartitionChoice>() {
            Ok(c) if c != PartitionChoice::Custom => Self::Choice(c),
            _ => Self::File(PathBuf::from(arg)),
        }
    }

    pub fn resolve(&self, band_limit: usize) -> Result<Partition, ExperimentError> {
        match self {
            Self::Choice(c) => Ok(c.build(band_limit)?),
            Self::File(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    ExperimentError::Config(format!(
                        "cannot read partition file {}: {e}",
                        path.display()
                    ))
                })?;
                let p = Partition::from_json(&text)?;
                if p.band_limit() != band_limit {
                    return Err(ExperimentError::Config(format!(
                        "partition file is for band limit {}, experiment uses {band_limit}",
                        p.band_limit()
                    )));
                }
                Ok(p)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub band_limit: usize,
    pub scheme: SamplingScheme,
    pub partition: PartitionSpec,
    pub passes: usize,
    /// Stop once ε_max drops below this.
    pub tolerance: Option<f64>,
    pub ridge: f64,
    /// Seeds the test signal.
    pub seed: u64,
    /// Trace CSV; the metadata block goes next to it with a `.meta` suffix.
    pub output: Option<PathBuf>,
    pub validate_residual_operator: bool,
    pub operator_cap: usize,
    /// Write wall-clock times into the trace. Off gives byte-identical files
    /// for identical configurations.
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn new(band_limit: usize, scheme: SamplingScheme, partition: PartitionChoice) -> Self {
        Self {
            band_limit,
            scheme,
            partition: PartitionSpec::Choice(partition),
            passes: 200,
            tolerance: None,
            ridge: 0.0,
            seed: 0,
            output: None,
            validate_residual_operator: false,
            operator_cap: DEFAULT_OPERATOR_CAP,
            timing: true,
        }
    }

    fn validate(&self) -> Result<(), ExperimentError> {
        if self.band_limit == 0 {
            return Err(ExperimentError::Config("band limit must be >= 1".into()));
        }
        if self.passes == 0 {
            return Err(ExperimentError::Config("passes must be >= 1".into()));
        }
        if let Some(t) = self.tolerance {
            if !(t > 0.0) {
                return Err(ExperimentError::Config(format!(
                    "tolerance must be > 0 (got {t})"
                )));
            }
        }
        if !(self.ridge >= 0.0) {
            return Err(ExperimentError::Config(format!(
                "ridge must be >= 0 (got {})",
                self.ridge
            )));
        }
        Ok(())
    }

    fn context(&self) -> String {
        format!(
            "L={}, scheme={}, partition={}, seed={}",
            self.band_limit,
            self.scheme,
            match &self.partition {
                PartitionSpec::Choice(c) => c.to_string(),
                PartitionSpec::File(p) => p.display().to_string(),
            },
            self.seed
        )
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub reference: CoefficientVector,
    pub report: FitReport,
    pub partition: Partition,
    pub sample_count: usize,
    /// Discrepancy between the operator-form residual and the fitted one.
    pub residual_discrepancy: Option<f64>,
}

impl ExperimentOutcome {
    /// `key=value` lines describing the run, without timings.
    pub fn metadata(&self, config: &ExperimentConfig) -> String {
        let mut lines = vec![
            format!("scheme={}", config.scheme.name()),
            format!("scheme_parameters={}", config.scheme),
            format!("scheme_fidelity={}", config.scheme.fidelity()),
            format!("partition={}", self.partition.choice()),
            format!("blocks={}", self.partition.len()),
            format!("band_limit={}", config.band_limit),
            format!("samples={}", self.sample_count),
            format!("seed={}", config.seed),
            format!("ridge={}", config.ridge),
            format!("passes_run={}", self.report.passes_run),
        ];
        if let Some(e) = self.report.final_epsilon_max() {
            lines.push(format!("final_epsilon_max={e:.16e}"));
        }
        if let Some(d) = self.residual_discrepancy {
            lines.push(format!("residual_operator_discrepancy={d:.16e}"));
        }
        lines.extend(self.report.warnings.iter().map(|w| format!("warning={w}")));
        lines.join("\n") + "\n"
    }
}

/// Generates the test signal, samples it, fits it and, when configured,
/// writes the trace CSV and metadata.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome, ExperimentError> {
    config.validate()?;
    let partition = config.partition.resolve(config.band_limit)?;
    let reference = generate_test_signal(config.band_limit, config.seed);
    let points = config.scheme.generate()?;
    let samples = attach_signal(&points, &reference);
    let g = samples.values().expect("values attached");

    let irf_config = IrfConfig {
        passes: config.passes,
        tolerance: config.tolerance,
        ridge: config.ridge,
        ..IrfConfig::default()
    };
    let solver_err = |source| ExperimentError::Solver {
        context: config.context(),
        source,
    };
    let systems = BlockSystems::build(&samples, &partition, &irf_config).map_err(solver_err)?;
    let report = run_passes(&systems, g, &irf_config, Some(&reference)).map_err(solver_err)?;
    let residual_discrepancy = if config.validate_residual_operator {
        Some(
            residual_operator_check(&systems, g, report.passes_run, config.operator_cap)
                .map_err(solver_err)?,
        )
    } else {
        None
    };

    let outcome = ExperimentOutcome {
        reference,
        report,
        partition,
        sample_count: samples.len(),
        residual_discrepancy,
    };
    if let Some(path) = &config.output {
        write_file(path, |w| Ok(outcome.report.write_csv(w, config.timing)?))?;
        let meta = metadata_path(path);
        write_file(&meta, |w| {
            w.write_all(outcome.metadata(config).as_bytes())
                .map_err(|source| ExperimentError::Io {
                    path: meta.clone(),
                    source,
                })
        })?;
    }
    Ok(outcome)
}

/// `trace.csv` → `trace.csv.meta`.
pub fn metadata_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut io::BufWriter<fs::File>) -> Result<(), ExperimentError>,
) -> Result<(), ExperimentError> {
    let io_err = |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = io::BufWriter::new(fs::File::create(path).map_err(io_err)?);
    body(&mut w)?;
    w.flush().map_err(io_err)
}

#[derive(Debug, Clone)]
pub struct SweepRun {
    pub multiplier: usize,
    pub seed: u64,
    pub outcome: ExperimentOutcome,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub runs: Vec<SweepRun>,
    /// `(multiplier, median passes to ε_max < 1e-10)`; runs that never get
    /// there count as one pass past the budget.
    pub median_passes: Vec<(usize, usize)>,
    /// Whether the median is non-increasing as the multiplier grows.
    pub trend_holds: bool,
}

/// Median of `values` (upper median for even lengths).
pub fn median(values: &mut [usize]) -> usize {
    values.sort_unstable();
    values[values.len() / 2]
}

/// Passes to ε_max below [`PASSES_THRESHOLD`], or `budget + 1` when never
/// reached.
pub fn passes_to_threshold(report: &FitReport, budget: usize) -> usize {
    report
        .passes_to_threshold(PASSES_THRESHOLD)
        .unwrap_or(budget + 1)
}

/// Repeats `base` for every multiplier and seed. `base.scheme` must be the
/// optimal-dimensionality style; each run uses its seed for both the signal
/// and the ring rotations.
pub fn sweep_sample_counts(
    base: &ExperimentConfig,
    multipliers: &[usize],
    seeds: &[u64],
) -> Result<SweepOutcome, ExperimentError> {
    let band_limit = match base.scheme {
        SamplingScheme::OptimalDimensionality { band_limit, .. } => band_limit,
        _ => {
            return Err(ExperimentError::Config(
                "sample-count sweeps need the optimal-dimensionality scheme".into(),
            ))
        }
    };
    if multipliers.is_empty() || seeds.is_empty() {
        return Err(ExperimentError::Config(
            "sweep needs at least one multiplier and one seed".into(),
        ));
    }
    let mut runs = Vec::new();
    let mut median_passes = Vec::new();
    for &multiplier in multipliers {
        let mut counts = Vec::new();
        for &seed in seeds {
            let config = ExperimentConfig {
                scheme: SamplingScheme::OptimalDimensionality {
                    band_limit,
                    multiplier,
                    seed,
                },
                seed,
                output: None,
                ..base.clone()
            };
            let outcome = run_experiment(&config)?;
            counts.push(passes_to_threshold(&outcome.report, base.passes));
            runs.push(SweepRun {
                multiplier,
                seed,
                outcome,
            });
        }
        median_passes.push((multiplier, median(&mut counts)));
    }
    let mut order = median_passes.clone();
    order.sort_by_key(|&(m, _)| m);
    let trend_holds = order.windows(2).all(|w| w[1].1 <= w[0].1);
    let sweep = SweepOutcome {
        runs,
        median_passes,
        trend_holds,
    };
    if let Some(path) = &base.output {
        write_file(path, |w| Ok(sweep.write_csv(w, base.timing)?))?;
    }
    Ok(sweep)
}

impl SweepOutcome {
    /// `multiplier,seed,pass,epsilon_max,residual_norm2,elapsed_ms`.
    pub fn write_csv<W: Write>(&self, writer: W, timing: bool) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "multiplier",
            "seed",
            "pass",
            "epsilon_max",
            "residual_norm2",
            "elapsed_ms",
        ])?;
        for run in &self.runs {
            for row in run.outcome.report.csv_rows(timing) {
                let mut record = vec![run.multiplier.to_string(), run.seed.to_string()];
                record.extend(row);
                w.write_record(&record)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
