//! Iterative residual fitting.
//!
//! For a partition of the harmonics into blocks `k = 1..K`, one pass fits each
//! block in turn to whatever the earlier blocks left unexplained:
//!
//! ```text
//! g_k = (Y_k^H Y_k)^{-1} Y_k^H r_{k-1}
//! r_k = r_{k-1} - Y_k g_k
//! ```
//!
//! Multi-pass fitting starts every pass from the final residual of the
//! previous one and sums the per-pass increments. After `i` passes the
//! residual is `((I - C_K) ··· (I - C_1))^i G` with `C_k = Y_k A_k`, which
//! [`residual_operator_check`] verifies by forming the operator explicitly.
//!
//! Design matrices and Cholesky factors depend only on the sample points, so
//! they are built once in [`BlockSystems`] and reused by every pass.

use std::fmt;
use std::io::Write;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::harmonics::{basis_matrix, CoefficientVector};
use crate::linalg::{norm2, Cholesky, ComplexMatrix, LinalgError, DEFAULT_PIVOT_TOLERANCE};
use crate::partition::{validate_partition, Partition, PartitionError};
use crate::sampling::SampleSet;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Condition estimate above which a block is reported in the warnings.
pub const ILL_CONDITIONED_WARNING: f64 = 1e10;

/// Largest sample count for which the `M × M` residual operator is formed.
pub const DEFAULT_OPERATOR_CAP: usize = 2048;

#[derive(Debug, Error)]
pub enum IrfError {
    #[error("block {block} ({size} harmonics): {source}")]
    Block {
        block: usize,
        size: usize,
        #[source]
        source: LinalgError,
    },
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("band limit mismatch: {left} vs {right}")]
    BandLimitMismatch { left: usize, right: usize },
    #[error("sample set carries no signal values")]
    MissingValues,
    #[error("residual has length {got}, expected {expected}")]
    ResidualLength { expected: usize, got: usize },
    #[error("{samples} samples exceed the operator cap of {cap}")]
    MemoryGuard { samples: usize, cap: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FitWarning {
    /// A ridge term was added to every block's normal matrix.
    RidgeActive {
        ridge: f64,
    },
    /// The block was rank deficient and was refactored with a ridge.
    RankDeficientBlock {
        block: usize,
        ridge: f64,
    },
    IllConditionedBlock {
        block: usize,
        condition: f64,
    },
}

impl fmt::Display for FitWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::RidgeActive { ridge } => write!(f, "ridge {ridge:e} active on all blocks"),
            Self::RankDeficientBlock { block, ridge } => {
                write!(
                    f,
                    "block {block} rank deficient; refactored with ridge {ridge:e}"
                )
            }
            Self::IllConditionedBlock { block, condition } => {
                write!(f, "block {block} ill conditioned (estimate {condition:e})")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct IrfConfig {
    /// Pass budget, at least one.
    pub passes: usize,
    /// Early stop: ε_max below this when a reference is supplied, otherwise
    /// the residual norm below this.
    pub tolerance: Option<f64>,
    /// Added to the diagonal of every normal matrix.
    pub ridge: f64,
    /// Keep the residual norm after every block step.
    pub record_trace: bool,
    /// When set, a rank-deficient block is refactored with this ridge
    /// instead of failing the fit.
    pub fallback_ridge: Option<f64>,
    pub pivot_tolerance: f64,
}

impl Default for IrfConfig {
    fn default() -> Self {
        Self {
            passes: 200,
            tolerance: None,
            ridge: 0.0,
            record_trace: true,
            fallback_ridge: None,
            pivot_tolerance: DEFAULT_PIVOT_TOLERANCE,
        }
    }
}

impl IrfConfig {
    pub fn with_passes(passes: usize) -> Self {
        Self {
            passes,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), IrfError> {
        if self.passes == 0 {
            return Err(IrfError::InvalidConfig("passes must be >= 1".into()));
        }
        if let Some(t) = self.tolerance {
            if !(t > 0.0) {
                return Err(IrfError::InvalidConfig(format!(
                    "tolerance must be > 0 (got {t})"
                )));
            }
        }
        if !(self.ridge >= 0.0) {
            return Err(IrfError::InvalidConfig(format!(
                "ridge must be >= 0 (got {})",
                self.ridge
            )));
        }
        Ok(())
    }
}

/// Design matrix and factored normal matrix of one partition block.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    indices: Vec<usize>,
    design: ComplexMatrix,
    factor: Cholesky,
    ridge: f64,
}

impl BlockSystem {
    /// Builds the `M × N_k` design matrix of `block` at the sample points and
    /// factors `Y_k^H Y_k + ridge·I`.
    pub fn build(
        samples: &SampleSet,
        band_limit: usize,
        block: &[usize],
        ridge: f64,
    ) -> Result<Self, LinalgError> {
        let basis = basis_matrix(band_limit, samples.points());
        Self::from_basis(&basis, block, ridge, DEFAULT_PIVOT_TOLERANCE)
    }

    /// Same as [`BlockSystem::build`] with the full basis matrix precomputed.
    pub fn from_basis(
        basis: &ComplexMatrix,
        block: &[usize],
        ridge: f64,
        pivot_tolerance: f64,
    ) -> Result<Self, LinalgError> {
        let design = basis.select_columns(block);
        let factor = Cholesky::factor(&design.gram(), pivot_tolerance, ridge)?;
        Ok(Self {
            indices: block.to_vec(),
            design,
            factor,
            ridge,
        })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn design(&self) -> &ComplexMatrix {
        &self.design
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn condition_estimate(&self) -> f64 {
        self.factor.condition_estimate()
    }

    /// `A_k r`: least-squares coefficients of this block for `r`.
    pub fn fit(&self, residual: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
        self.factor.solve(&self.design.hermitian_mul_vec(residual)?)
    }

    /// `r ← r − Y_k g`.
    pub fn subtract_fitted(&self, residual: &mut [Complex64], coeffs: &[Complex64]) {
        for (r, p) in residual.iter_mut().enumerate() {
            let row = self.design.row(r);
            *p -= row.iter().zip(coeffs).fold(ZERO, |acc, (y, g)| acc + y * g);
        }
    }

    /// `A_k X` for every column of `x` (an `M × n` matrix).
    fn fit_columns(&self, x: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
        let rhs = self.design.hermitian().matmul(x)?;
        let n = self.factor.dim();
        let cols: Vec<Vec<Complex64>> = (0..rhs.cols())
            .into_par_iter()
            .map(|j| {
                let b: Vec<Complex64> = (0..n).map(|i| rhs.get(i, j)).collect();
                self.factor.solve(&b)
            })
            .collect::<Result<_, _>>()?;
        Ok(ComplexMatrix::from_fn(n, rhs.cols(), |i, j| cols[j][i]))
    }
}

/// The factored systems of every block of a partition, in partition order.
#[derive(Debug, Clone)]
pub struct BlockSystems {
    band_limit: usize,
    samples: usize,
    systems: Vec<BlockSystem>,
    warnings: Vec<FitWarning>,
}

impl BlockSystems {
    pub fn build(
        samples: &SampleSet,
        partition: &Partition,
        config: &IrfConfig,
    ) -> Result<Self, IrfError> {
        validate_partition(partition)?;
        let basis = basis_matrix(partition.band_limit(), samples.points());
        let mut warnings = Vec::new();
        if config.ridge > 0.0 {
            warnings.push(FitWarning::RidgeActive {
                ridge: config.ridge,
            });
        }
        let built: Vec<Result<BlockSystem, LinalgError>> = partition
            .blocks()
            .par_iter()
            .map(|block| {
                BlockSystem::from_basis(&basis, block, config.ridge, config.pivot_tolerance)
            })
            .collect();
        let mut systems = Vec::with_capacity(built.len());
        for (k, result) in built.into_iter().enumerate() {
            let block = &partition.blocks()[k];
            let system = match (result, config.fallback_ridge) {
                (Ok(s), _) => s,
                (Err(LinalgError::NotPositiveDefinite { .. }), Some(ridge)) => {
                    let ridge = config.ridge + ridge;
                    warnings.push(FitWarning::RankDeficientBlock { block: k, ridge });
                    BlockSystem::from_basis(&basis, block, ridge, config.pivot_tolerance).map_err(
                        |source| IrfError::Block {
                            block: k,
                            size: block.len(),
                            source,
                        },
                    )?
                }
                (Err(source), _) => {
                    return Err(IrfError::Block {
                        block: k,
                        size: block.len(),
                        source,
                    })
                }
            };
            let condition = system.condition_estimate();
            if condition > ILL_CONDITIONED_WARNING {
                warnings.push(FitWarning::IllConditionedBlock {
                    block: k,
                    condition,
                });
            }
            systems.push(system);
        }
        Ok(Self {
            band_limit: partition.band_limit(),
            samples: samples.len(),
            systems,
            warnings,
        })
    }

    pub fn band_limit(&self) -> usize {
        self.band_limit
    }

    pub fn sample_count(&self) -> usize {
        self.samples
    }

    pub fn systems(&self) -> &[BlockSystem] {
        &self.systems
    }

    pub fn warnings(&self) -> &[FitWarning] {
        &self.warnings
    }

    /// `Π_k (I − C_k)` as an `M × M` matrix, block 1 applied first.
    pub fn residual_operator(&self, cap: usize) -> Result<ComplexMatrix, IrfError> {
        if self.samples > cap {
            return Err(IrfError::MemoryGuard {
                samples: self.samples,
                cap,
            });
        }
        let mut op = ComplexMatrix::identity(self.samples);
        for (k, s) in self.systems.iter().enumerate() {
            let block_err = |source| IrfError::Block {
                block: k,
                size: s.indices.len(),
                source,
            };
            // (I − Y_k A_k) P = P − Y_k (A_k P)
            let fitted = s.fit_columns(&op).map_err(block_err)?;
            let projected = s.design.matmul(&fitted).map_err(block_err)?;
            op = op.sub(&projected).map_err(block_err)?;
        }
        Ok(op)
    }
}

/// Output of one sweep over all blocks.
#[derive(Debug, Clone)]
pub struct PassResult {
    /// Coefficient increment of each block, aligned with its indices.
    pub increments: Vec<Vec<Complex64>>,
    pub residual: Vec<Complex64>,
    /// `‖r_k‖₂` after each block step.
    pub step_norms: Vec<f64>,
}

/// One sweep of residual fitting over the blocks, starting from `residual_in`.
pub fn irf_pass(systems: &BlockSystems, residual_in: &[Complex64]) -> Result<PassResult, IrfError> {
    if residual_in.len() != systems.samples {
        return Err(IrfError::ResidualLength {
            expected: systems.samples,
            got: residual_in.len(),
        });
    }
    let mut residual = residual_in.to_vec();
    let mut increments = Vec::with_capacity(systems.systems.len());
    let mut step_norms = Vec::with_capacity(systems.systems.len());
    for (k, s) in systems.systems.iter().enumerate() {
        let g = s.fit(&residual).map_err(|source| IrfError::Block {
            block: k,
            size: s.indices.len(),
            source,
        })?;
        s.subtract_fitted(&mut residual, &g);
        step_norms.push(norm2(&residual));
        increments.push(g);
    }
    Ok(PassResult {
        increments,
        residual,
        step_norms,
    })
}

/// Maximum absolute coefficient error between a reference and an estimate.
pub fn epsilon_max(
    reference: &CoefficientVector,
    estimate: &CoefficientVector,
) -> Result<f64, IrfError> {
    if reference.band_limit() != estimate.band_limit() {
        return Err(IrfError::BandLimitMismatch {
            left: reference.band_limit(),
            right: estimate.band_limit(),
        });
    }
    Ok(reference
        .values()
        .iter()
        .zip(estimate.values())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone)]
pub struct FitReport {
    /// Running sum of every pass's increments.
    pub estimate: CoefficientVector,
    /// ε_max after each pass; empty when no reference was supplied.
    pub per_pass_epsilon_max: Vec<f64>,
    /// `‖r_K‖₂` after each pass.
    pub per_pass_residual_norm2: Vec<f64>,
    /// `‖G‖₂` followed by `‖r_k‖₂` after every block step of every pass.
    /// Empty unless the trace was requested.
    pub per_step_residual_norm2: Vec<f64>,
    /// Largest coefficient increment applied in each pass.
    pub per_pass_max_increment: Vec<f64>,
    pub per_pass_elapsed: Vec<Duration>,
    pub passes_run: usize,
    pub warnings: Vec<FitWarning>,
    pub final_residual: Vec<Complex64>,
    pub signal_norm2: f64,
}

impl FitReport {
    /// First pass (1-based) whose ε_max is below `threshold`.
    pub fn passes_to_threshold(&self, threshold: f64) -> Option<usize> {
        self.per_pass_epsilon_max
            .iter()
            .position(|&e| e < threshold)
            .map(|p| p + 1)
    }

    pub fn final_epsilon_max(&self) -> Option<f64> {
        self.per_pass_epsilon_max.last().copied()
    }

    /// Largest increase of the per-step residual norm, zero when the trace is
    /// non-increasing.
    pub fn max_residual_increase(&self) -> f64 {
        self.per_step_residual_norm2
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Writes `pass,epsilon_max,residual_norm2,elapsed_ms`, one row per pass.
    /// Without `timing` the elapsed column is written as zero so that
    /// identical runs produce identical bytes.
    pub fn write_csv<W: Write>(&self, writer: W, timing: bool) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["pass", "epsilon_max", "residual_norm2", "elapsed_ms"])?;
        for row in self.csv_rows(timing) {
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub(crate) fn csv_rows(&self, timing: bool) -> Vec<[String; 4]> {
        (0..self.passes_run)
            .map(|p| {
                let eps = self
                    .per_pass_epsilon_max
                    .get(p)
                    .map_or_else(|| "nan".to_string(), |e| format!("{e:.16e}"));
                let elapsed = if timing {
                    format!("{:.3}", self.per_pass_elapsed[p].as_secs_f64() * 1e3)
                } else {
                    "0".to_string()
                };
                [
                    (p + 1).to_string(),
                    eps,
                    format!("{:.16e}", self.per_pass_residual_norm2[p]),
                    elapsed,
                ]
            })
            .collect()
    }
}

/// Multi-pass fitting: builds the block systems and runs [`run_passes`].
pub fn multi_pass_irf(
    samples: &SampleSet,
    partition: &Partition,
    config: &IrfConfig,
    reference: Option<&CoefficientVector>,
) -> Result<FitReport, IrfError> {
    config.validate()?;
    let systems = BlockSystems::build(samples, partition, config)?;
    let values = samples.values().ok_or(IrfError::MissingValues)?;
    run_passes(&systems, values, config, reference)
}

/// Multi-pass fitting over prebuilt systems, starting from the samples `g`.
pub fn run_passes(
    systems: &BlockSystems,
    g: &[Complex64],
    config: &IrfConfig,
    reference: Option<&CoefficientVector>,
) -> Result<FitReport, IrfError> {
    config.validate()?;
    if let Some(r) = reference {
        if r.band_limit() != systems.band_limit {
            return Err(IrfError::BandLimitMismatch {
                left: r.band_limit(),
                right: systems.band_limit,
            });
        }
    }
    let signal_norm2 = norm2(g);
    let mut report = FitReport {
        estimate: CoefficientVector::zeros(systems.band_limit),
        per_pass_epsilon_max: Vec::new(),
        per_pass_residual_norm2: Vec::new(),
        per_step_residual_norm2: if config.record_trace {
            vec![signal_norm2]
        } else {
            Vec::new()
        },
        per_pass_max_increment: Vec::new(),
        per_pass_elapsed: Vec::new(),
        passes_run: 0,
        warnings: systems.warnings.clone(),
        final_residual: g.to_vec(),
        signal_norm2,
    };

    for _ in 0..config.passes {
        let start = Instant::now();
        let pass = irf_pass(systems, &report.final_residual)?;
        let mut max_increment = 0.0_f64;
        {
            let est = report.estimate.values_mut();
            for (s, inc) in systems.systems.iter().zip(&pass.increments) {
                for (&i, d) in s.indices.iter().zip(inc) {
                    est[i] += d;
                    max_increment = max_increment.max(d.norm());
                }
            }
        }
        report.per_pass_elapsed.push(start.elapsed());
        report.per_pass_max_increment.push(max_increment);
        report.per_pass_residual_norm2.push(norm2(&pass.residual));
        if config.record_trace {
            report.per_step_residual_norm2.extend(&pass.step_norms);
        }
        report.final_residual = pass.residual;
        report.passes_run += 1;

        let converged = match (reference, config.tolerance) {
            (Some(r), tol) => {
                let eps = epsilon_max(r, &report.estimate)?;
                report.per_pass_epsilon_max.push(eps);
                tol.is_some_and(|t| eps < t)
            }
            (None, Some(t)) => *report.per_pass_residual_norm2.last().unwrap() < t,
            (None, None) => false,
        };
        if converged {
            break;
        }
    }
    Ok(report)
}

/// Forms `(Π_k (I − C_k))^passes`, applies it to the samples and returns the
/// largest absolute difference from the residual left by that many passes of
/// [`run_passes`].
pub fn residual_operator_check(
    systems: &BlockSystems,
    g: &[Complex64],
    passes: usize,
    cap: usize,
) -> Result<f64, IrfError> {
    let op = systems.residual_operator(cap)?;
    let powered = matrix_power(&op, passes);
    let predicted = powered.mul_vec(g).map_err(|_| IrfError::ResidualLength {
        expected: systems.samples,
        got: g.len(),
    })?;
    let actual = if passes == 0 {
        g.to_vec()
    } else {
        let config = IrfConfig {
            passes,
            record_trace: false,
            ..IrfConfig::default()
        };
        run_passes(systems, g, &config, None)?.final_residual
    };
    Ok(predicted
        .iter()
        .zip(&actual)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max))
}

/// Discrepancies of [`residual_operator_check`] for every pass count
/// `0..=max_passes`, forming the operator once and multiplying up its powers.
pub fn residual_operator_discrepancies(
    systems: &BlockSystems,
    g: &[Complex64],
    max_passes: usize,
    cap: usize,
) -> Result<Vec<f64>, IrfError> {
    if g.len() != systems.samples {
        return Err(IrfError::ResidualLength {
            expected: systems.samples,
            got: g.len(),
        });
    }
    let op = systems.residual_operator(cap)?;
    let mut power = ComplexMatrix::identity(systems.samples);
    let mut residual = g.to_vec();
    let mut out = vec![0.0];
    for _ in 0..max_passes {
        power = op.matmul(&power).expect("square");
        residual = irf_pass(systems, &residual)?.residual;
        let predicted = power.mul_vec(g).expect("length checked");
        out.push(
            predicted
                .iter()
                .zip(&residual)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max),
        );
    }
    Ok(out)
}

fn matrix_power(m: &ComplexMatrix, mut exponent: usize) -> ComplexMatrix {
    let mut result = ComplexMatrix::identity(m.rows());
    let mut base = m.clone();
    while exponent > 0 {
        if exponent & 1 == 1 {
            result = result.matmul(&base).expect("square");
        }
        exponent >>= 1;
        if exponent > 0 {
            base = base.matmul(&base).expect("square");
        }
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::{synthesize, SpherePoint};
    use crate::partition::{partition_choice_1, partition_choice_4};
    use crate::rng::PortableRng;
    use crate::sampling::{attach_signal, optimal_dimensionality_style, random_uniform};
    use std::f64::consts::PI;

    fn random_coeffs(band_limit: usize, seed: u64) -> CoefficientVector {
        let mut rng = PortableRng::new(seed, 7);
        let v = (0..band_limit * band_limit)
            .map(|_| Complex64::new(rng.next_symmetric(), rng.next_symmetric()))
            .collect();
        CoefficientVector::from_values(band_limit, v).unwrap()
    }

    #[test]
    fn constant_block_design_matrix() {
        let samples = random_uniform(12, 1).unwrap();
        let s = BlockSystem::build(&samples, 3, &[0], 0.0).unwrap();
        let want = 0.5 / PI.sqrt();
        for r in 0..12 {
            assert!((s.design().get(r, 0) - Complex64::new(want, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn square_block_is_exactly_inverted() {
        let band_limit = 3;
        let samples = random_uniform(9, 4).unwrap();
        let block: Vec<usize> = (0..9).collect();
        let s = BlockSystem::build(&samples, band_limit, &block, 0.0).unwrap();
        let g: Vec<Complex64> = (0..9).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let coeffs = s.fit(&g).unwrap();
        let mut r = g.clone();
        s.subtract_fitted(&mut r, &coeffs);
        assert!(norm2(&r) < 1e-10 * norm2(&g));
    }

    #[test]
    fn left_inverse_on_column_space() {
        let samples = random_uniform(80, 2).unwrap();
        let block: Vec<usize> = (4..9).collect();
        let s = BlockSystem::build(&samples, 3, &block, 0.0).unwrap();
        let c: Vec<Complex64> = (0..5)
            .map(|i| Complex64::new(0.3 * i as f64, -0.1))
            .collect();
        let yc = s.design().mul_vec(&c).unwrap();
        let back = s.fit(&yc).unwrap();
        for (a, b) in back.iter().zip(&c) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn largest_degree_block_factors_with_450_samples() {
        let samples = optimal_dimensionality_style(15, 2, 0).unwrap();
        let block = partition_choice_1(15).blocks()[14].clone();
        assert_eq!(block.len(), 29);
        let s = BlockSystem::build(&samples, 15, &block, 0.0).unwrap();
        assert!(s.condition_estimate().is_finite());
    }

    #[test]
    fn rank_deficient_block_fails_fast_or_falls_back() {
        // two points cannot determine the three degree-1 harmonics
        let pts = vec![
            SpherePoint::new(0.3, 0.0).unwrap(),
            SpherePoint::new(2.0, 1.0).unwrap(),
        ];
        let samples = attach_signal(&SampleSet::new(pts).unwrap(), &random_coeffs(2, 1));
        let p = partition_choice_1(2);
        let err = multi_pass_irf(&samples, &p, &IrfConfig::with_passes(2), None).unwrap_err();
        assert!(matches!(
            err,
            IrfError::Block {
                block: 1,
                source: LinalgError::NotPositiveDefinite { .. },
                ..
            }
        ));
        let config = IrfConfig {
            passes: 2,
            fallback_ridge: Some(1e-8),
            ..IrfConfig::default()
        };
        let report = multi_pass_irf(&samples, &p, &config, None).unwrap();
        assert!(report
            .warnings
            .iter()
            .any(|w| matches!(w, FitWarning::RankDeficientBlock { block: 1, .. })));
    }

    #[test]
    fn ridge_is_reported() {
        let coeffs = random_coeffs(3, 2);
        let samples = attach_signal(&random_uniform(40, 3).unwrap(), &coeffs);
        let config = IrfConfig {
            passes: 1,
            ridge: 1e-6,
            ..IrfConfig::default()
        };
        let report = multi_pass_irf(&samples, &partition_choice_1(3), &config, None).unwrap();
        assert_eq!(report.warnings[0], FitWarning::RidgeActive { ridge: 1e-6 });
    }

    #[test]
    fn signal_in_first_block_is_fit_in_one_step() {
        let samples = random_uniform(50, 5).unwrap();
        let mut c = CoefficientVector::zeros(4);
        c.values_mut()[0] = Complex64::new(0.7, -0.2);
        let g = synthesize(&c, samples.points());
        let systems =
            BlockSystems::build(&samples, &partition_choice_1(4), &IrfConfig::default()).unwrap();
        let pass = irf_pass(&systems, &g).unwrap();
        assert!(pass.step_norms[0] <= 1e-10 * norm2(&g));
    }

    #[test]
    fn zero_residual_gives_zero_increments() {
        let samples = random_uniform(50, 6).unwrap();
        let systems =
            BlockSystems::build(&samples, &partition_choice_4(4), &IrfConfig::default()).unwrap();
        let pass = irf_pass(&systems, &vec![ZERO; 50]).unwrap();
        assert!(pass.residual.iter().all(|z| *z == ZERO));
        assert!(pass.increments.iter().flatten().all(|z| *z == ZERO));
        assert!(matches!(
            irf_pass(&systems, &[ZERO; 3]),
            Err(IrfError::ResidualLength {
                expected: 50,
                got: 3
            })
        ));
    }

    #[test]
    fn single_pass_single_block_matches_irf_pass() {
        let coeffs = random_coeffs(4, 8);
        let samples = attach_signal(&random_uniform(60, 8).unwrap(), &coeffs);
        let p = Partition::single_block(4);
        let report = multi_pass_irf(&samples, &p, &IrfConfig::with_passes(1), None).unwrap();
        let systems = BlockSystems::build(&samples, &p, &IrfConfig::default()).unwrap();
        let pass = irf_pass(&systems, samples.values().unwrap()).unwrap();
        assert_eq!(report.estimate.values(), pass.increments[0].as_slice());
        assert_eq!(report.final_residual, pass.residual);
    }

    #[test]
    fn converged_fit_is_a_fixed_point() {
        let coeffs = random_coeffs(5, 9);
        let samples = attach_signal(&random_uniform(120, 9).unwrap(), &coeffs);
        let config = IrfConfig::with_passes(60);
        let report =
            multi_pass_irf(&samples, &partition_choice_4(5), &config, Some(&coeffs)).unwrap();
        assert!(report.final_epsilon_max().unwrap() < 1e-12);
        let tail = &report.per_pass_max_increment[50..];
        assert!(tail.iter().all(|&d| d < 1e-14), "{tail:?}");
    }

    #[test]
    fn tolerance_stops_early() {
        let coeffs = random_coeffs(4, 10);
        let samples = attach_signal(&random_uniform(100, 10).unwrap(), &coeffs);
        let config = IrfConfig {
            passes: 500,
            tolerance: Some(1e-8),
            ..IrfConfig::default()
        };
        let report =
            multi_pass_irf(&samples, &partition_choice_1(4), &config, Some(&coeffs)).unwrap();
        assert!(report.passes_run < 500);
        assert!(report.final_epsilon_max().unwrap() < 1e-8);
        assert_eq!(report.per_pass_epsilon_max.len(), report.passes_run);

        let by_residual = multi_pass_irf(&samples, &partition_choice_1(4), &config, None).unwrap();
        assert!(by_residual.passes_run < 500);
        assert!(*by_residual.per_pass_residual_norm2.last().unwrap() < 1e-8);
    }

    #[test]
    fn config_errors() {
        let samples = attach_signal(&random_uniform(10, 1).unwrap(), &random_coeffs(2, 1));
        let p = partition_choice_1(2);
        for config in [
            IrfConfig::with_passes(0),
            IrfConfig {
                tolerance: Some(0.0),
                ..IrfConfig::default()
            },
            IrfConfig {
                ridge: -1.0,
                ..IrfConfig::default()
            },
        ] {
            assert!(matches!(
                multi_pass_irf(&samples, &p, &config, None),
                Err(IrfError::InvalidConfig(_))
            ));
        }
        let bare = random_uniform(10, 1).unwrap();
        assert!(matches!(
            multi_pass_irf(&bare, &p, &IrfConfig::default(), None),
            Err(IrfError::MissingValues)
        ));
        assert!(matches!(
            multi_pass_irf(
                &samples,
                &p,
                &IrfConfig::default(),
                Some(&random_coeffs(3, 1))
            ),
            Err(IrfError::BandLimitMismatch { .. })
        ));
    }

    #[test]
    fn epsilon_max_examples() {
        let a = random_coeffs(4, 11);
        assert_eq!(epsilon_max(&a, &a).unwrap(), 0.0);
        let mut b = a.clone();
        b.values_mut()[3] += Complex64::new(1e-4, 0.0);
        assert!((epsilon_max(&a, &b).unwrap() - 1e-4).abs() < 1e-15);
        let c = random_coeffs(4, 12);
        let mut want = 0.0_f64;
        for i in 0..16 {
            let d = a.values()[i] - c.values()[i];
            want = want.max((d.re * d.re + d.im * d.im).sqrt());
        }
        assert_eq!(epsilon_max(&a, &c).unwrap(), want);
        assert!(epsilon_max(&a, &random_coeffs(3, 1)).is_err());
    }

    #[test]
    fn residual_operator_identity_cases() {
        let coeffs = random_coeffs(3, 13);
        let samples = attach_signal(&random_uniform(30, 13).unwrap(), &coeffs);
        let g = samples.values().unwrap();
        let systems =
            BlockSystems::build(&samples, &partition_choice_1(3), &IrfConfig::default()).unwrap();
        assert_eq!(residual_operator_check(&systems, g, 0, 100).unwrap(), 0.0);
        for i in 1..4 {
            assert!(residual_operator_check(&systems, g, i, 100).unwrap() < 1e-10 * norm2(g));
        }
        let trace = residual_operator_discrepancies(&systems, g, 3, 100).unwrap();
        assert_eq!(trace.len(), 4);
        assert!(trace.iter().all(|&d| d < 1e-10 * norm2(g)));
        assert!(matches!(
            residual_operator_check(&systems, g, 1, 10),
            Err(IrfError::MemoryGuard {
                samples: 30,
                cap: 10
            })
        ));
    }

    #[test]
    fn square_single_block_operator_annihilates() {
        let coeffs = random_coeffs(3, 14);
        let samples = attach_signal(&random_uniform(9, 14).unwrap(), &coeffs);
        let g = samples.values().unwrap();
        let systems =
            BlockSystems::build(&samples, &Partition::single_block(3), &IrfConfig::default())
                .unwrap();
        let op = systems.residual_operator(100).unwrap();
        assert!(op.max_abs() < 1e-8, "{}", op.max_abs());
        assert!(residual_operator_check(&systems, g, 1, 100).unwrap() < 1e-10);
    }

    #[test]
    fn csv_rows_without_timing_are_stable() {
        let coeffs = random_coeffs(3, 15);
        let samples = attach_signal(&random_uniform(40, 15).unwrap(), &coeffs);
        let report = multi_pass_irf(
            &samples,
            &partition_choice_1(3),
            &IrfConfig::with_passes(3),
            Some(&coeffs),
        )
        .unwrap();
        let mut buf = Vec::new();
        report.write_csv(&mut buf, false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "pass,epsilon_max,residual_norm2,elapsed_ms");
        assert_eq!(lines.len(), 4);
        assert!(lines[3].starts_with("3,") && lines[3].ends_with(",0"));
    }
}
