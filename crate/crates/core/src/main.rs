use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use sht_irf::experiment::{
    run_experiment, sweep_sample_counts, ExperimentConfig, ExperimentError, PartitionSpec,
};
use sht_irf::irf::DEFAULT_OPERATOR_CAP;
use sht_irf::SamplingScheme;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Scheme {
    Equiangular,
    Healpix,
    Optimal,
    Random,
}

/// Multi-pass iterative residual fitting of a random band-limited signal;
/// writes the per-pass coefficient error trace as CSV.
#[derive(Debug, Parser)]
#[command(name = "sht-irf", version)]
struct Args {
    #[arg(long, value_name = "L")]
    band_limit: usize,
    #[arg(long, value_enum)]
    scheme: Scheme,
    /// Equiangular colatitude count (default 2L).
    #[arg(long)]
    n_theta: Option<usize>,
    /// Equiangular longitude count (default 2L+1).
    #[arg(long)]
    n_phi: Option<usize>,
    /// HEALPix resolution (default round(0.6 L)).
    #[arg(long)]
    nside: Option<usize>,
    /// Optimal-dimensionality style: points = multiplier · L² (default 4).
    #[arg(long)]
    multiplier: Option<usize>,
    /// Random point count (default 4L²).
    #[arg(long)]
    count: Option<usize>,
    /// 1, 2, 3, 4 or a partition JSON file.
    #[arg(long, default_value = "4")]
    partition: String,
    #[arg(long, default_value_t = 200)]
    passes: usize,
    /// Stop once ε_max drops below this.
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    ridge: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Check the residual against the explicit product-of-projectors operator.
    #[arg(long)]
    validate_residual: bool,
    #[arg(long, default_value_t = DEFAULT_OPERATOR_CAP)]
    operator_cap: usize,
    /// Trace CSV path; metadata is written next to it with a `.meta` suffix.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write zero in the elapsed_ms column for byte-reproducible output.
    #[arg(long)]
    no_timing: bool,
    /// Sweep these optimal-style multipliers instead of a single run, e.g. 2,4,6.
    #[arg(long, value_delimiter = ',')]
    sweep: Vec<usize>,
    /// Number of consecutive seeds per sweep multiplier, starting at --seed.
    #[arg(long, default_value_t = 11)]
    sweep_seeds: u64,
}

impl Args {
    fn scheme(&self) -> SamplingScheme {
        let l = self.band_limit;
        match self.scheme {
            Scheme::Equiangular => SamplingScheme::Equiangular {
                n_theta: self.n_theta.unwrap_or(2 * l),
                n_phi: self.n_phi.unwrap_or(2 * l + 1),
            },
            Scheme::Healpix => SamplingScheme::Healpix {
                nside: self
                    .nside
                    .unwrap_or(((0.6 * l as f64).round() as usize).max(1)),
            },
            Scheme::Optimal => SamplingScheme::OptimalDimensionality {
                band_limit: l,
                multiplier: self.multiplier.unwrap_or(4),
                seed: self.seed,
            },
            Scheme::Random => SamplingScheme::RandomUniform {
                count: self.count.unwrap_or(4 * l * l),
                seed: self.seed,
            },
        }
    }

    fn config(&self) -> ExperimentConfig {
        ExperimentConfig {
            band_limit: self.band_limit,
            scheme: self.scheme(),
            partition: PartitionSpec::parse(&self.partition),
            passes: self.passes,
            tolerance: self.tolerance,
            ridge: self.ridge,
            seed: self.seed,
            output: self.out.clone(),
            validate_residual_operator: self.validate_residual,
            operator_cap: self.operator_cap,
            timing: !self.no_timing,
        }
    }
}

fn run(args: &Args) -> Result<(), ExperimentError> {
    let config = args.config();
    if args.sweep.is_empty() {
        let outcome = run_experiment(&config)?;
        if config.output.is_none() {
            eprint!("{}", outcome.metadata(&config));
            outcome
                .report
                .write_csv(std::io::stdout().lock(), config.timing)?;
        } else {
            print!("{}", outcome.metadata(&config));
        }
    } else {
        let seeds: Vec<u64> = (0..args.sweep_seeds).map(|s| args.seed + s).collect();
        let sweep = sweep_sample_counts(&config, &args.sweep, &seeds)?;
        let summary: String = sweep
            .median_passes
            .iter()
            .map(|(multiplier, passes)| {
                format!("multiplier={multiplier} median_passes_to_1e-10={passes}\n")
            })
            .chain(std::iter::once(format!(
                "trend_holds={}\n",
                sweep.trend_holds
            )))
            .collect();
        if config.output.is_none() {
            eprint!("{summary}");
        } else {
            print!("{summary}");
        }
        if config.output.is_none() {
            sweep.write_csv(std::io::stdout().lock(), config.timing)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
