//! Sample-point distributions on the sphere and the measurement vector built
//! from them.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::io::{Read, Write};

use num_complex::Complex64;
use thiserror::Error;

use crate::harmonics::{synthesize, CoefficientVector, HarmonicError, SpherePoint};
use crate::rng::{PortableRng, RANDOM_POINTS_STREAM, RING_ROTATION_STREAM};

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("invalid sampling parameter: {0}")]
    InvalidParameter(String),
    #[error("sample set is empty")]
    Empty,
    #[error("{values} values for {points} points")]
    LengthMismatch { points: usize, values: usize },
    #[error(transparent)]
    Point(#[from] HarmonicError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed csv row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
}

/// Points on the sphere, optionally with the signal values measured there.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    points: Vec<SpherePoint>,
    values: Option<Vec<Complex64>>,
}

impl SampleSet {
    pub fn new(points: Vec<SpherePoint>) -> Result<Self, SamplingError> {
        if points.is_empty() {
            return Err(SamplingError::Empty);
        }
        Ok(Self {
            points,
            values: None,
        })
    }

    pub fn with_values(
        points: Vec<SpherePoint>,
        values: Vec<Complex64>,
    ) -> Result<Self, SamplingError> {
        if values.len() != points.len() {
            return Err(SamplingError::LengthMismatch {
                points: points.len(),
                values: values.len(),
            });
        }
        let mut set = Self::new(points)?;
        set.values = Some(values);
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[SpherePoint] {
        &self.points
    }

    pub fn values(&self) -> Option<&[Complex64]> {
        self.values.as_deref()
    }

    /// Writes `theta,phi,re,im` rows with 17 significant digits. Missing
    /// values leave the last two fields empty.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), SamplingError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["theta", "phi", "re", "im"])?;
        for (i, p) in self.points.iter().enumerate() {
            let (re, im) = match &self.values {
                Some(v) => (format!("{:.16e}", v[i].re), format!("{:.16e}", v[i].im)),
                None => (String::new(), String::new()),
            };
            w.write_record([
                format!("{:.16e}", p.theta()),
                format!("{:.16e}", p.phi()),
                re,
                im,
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, SamplingError> {
        let mut r = csv::Reader::from_reader(reader);
        let mut points = Vec::new();
        let mut values = Vec::new();
        let mut missing = 0usize;
        for (row, record) in r.records().enumerate() {
            let record = record?;
            let field = |i: usize| record.get(i).unwrap_or("");
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| SamplingError::MalformedRow {
                    row: row + 1,
                    reason: format!("{s:?}: {e}"),
                })
            };
            points.push(SpherePoint::new(parse(field(0))?, parse(field(1))?)?);
            if field(2).is_empty() && field(3).is_empty() {
                missing += 1;
            } else {
                values.push(Complex64::new(parse(field(2))?, parse(field(3))?));
            }
        }
        match (missing, values.len()) {
            (_, 0) => Self::new(points),
            (0, _) => Self::with_values(points, values),
            _ => Err(SamplingError::MalformedRow {
                row: 0,
                reason: "some rows carry values and some do not".into(),
            }),
        }
    }
}

/// Measures a band-limited signal at every point of `samples`.
pub fn attach_signal(samples: &SampleSet, coeffs: &CoefficientVector) -> SampleSet {
    SampleSet {
        points: samples.points.clone(),
        values: Some(synthesize(coeffs, &samples.points)),
    }
}

/// The sampling families used in the convergence experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingScheme {
    Equiangular {
        n_theta: usize,
        n_phi: usize,
    },
    Healpix {
        nside: usize,
    },
    /// Iso-latitude rings with the point totals `multiplier · L²` used for
    /// optimal-dimensionality runs; see [`optimal_dimensionality_style`].
    OptimalDimensionality {
        band_limit: usize,
        multiplier: usize,
        seed: u64,
    },
    RandomUniform {
        count: usize,
        seed: u64,
    },
}

impl SamplingScheme {
    pub fn generate(&self) -> Result<SampleSet, SamplingError> {
        match *self {
            Self::Equiangular { n_theta, n_phi } => equiangular_grid(n_theta, n_phi),
            Self::Healpix { nside } => healpix_ring_centers(nside),
            Self::OptimalDimensionality {
                band_limit,
                multiplier,
                seed,
            } => optimal_dimensionality_style(band_limit, multiplier, seed),
            Self::RandomUniform { count, seed } => random_uniform(count, seed),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Equiangular { .. } => "equiangular",
            Self::Healpix { .. } => "healpix",
            Self::OptimalDimensionality { .. } => "optimal",
            Self::RandomUniform { .. } => "random",
        }
    }

    /// Whether the points follow the named scheme exactly or only mimic its
    /// structure and point count.
    pub fn fidelity(&self) -> &'static str {
        match self {
            Self::OptimalDimensionality { .. } => "style",
            _ => "exact",
        }
    }

    pub fn expected_len(&self) -> usize {
        match *self {
            Self::Equiangular { n_theta, n_phi } => n_theta * n_phi,
            Self::Healpix { nside } => 12 * nside * nside,
            Self::OptimalDimensionality {
                band_limit,
                multiplier,
                ..
            } => multiplier * band_limit * band_limit,
            Self::RandomUniform { count, .. } => count,
        }
    }
}

impl fmt::Display for SamplingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Equiangular { n_theta, n_phi } => {
                write!(f, "equiangular(n_theta={n_theta}, n_phi={n_phi})")
            }
            Self::Healpix { nside } => write!(f, "healpix(nside={nside})"),
            Self::OptimalDimensionality {
                band_limit,
                multiplier,
                seed,
            } => write!(
                f,
                "optimal-style(L={band_limit}, multiplier={multiplier}, seed={seed})"
            ),
            Self::RandomUniform { count, seed } => write!(f, "random(count={count}, seed={seed})"),
        }
    }
}

fn point(theta: f64, phi: f64) -> SpherePoint {
    SpherePoint::new(theta.clamp(0.0, PI), phi).expect("generated colatitude is clamped")
}

/// `n_theta × n_phi` grid with `θ_t = π(2t+1)/(2 n_theta)` and
/// `φ_p = 2πp / n_phi`. No point lands on a pole.
pub fn equiangular_grid(n_theta: usize, n_phi: usize) -> Result<SampleSet, SamplingError> {
    if n_theta == 0 || n_phi == 0 {
        return Err(SamplingError::InvalidParameter(format!(
            "equiangular grid needs n_theta, n_phi >= 1 (got {n_theta}, {n_phi})"
        )));
    }
    let points = (0..n_theta)
        .flat_map(|t| {
            let theta = PI * (2 * t + 1) as f64 / (2 * n_theta) as f64;
            (0..n_phi).map(move |p| point(theta, TAU * p as f64 / n_phi as f64))
        })
        .collect();
    SampleSet::new(points)
}

/// Pixel centres of the HEALPix RING scheme, north to south, `12·nside²`
/// points.
pub fn healpix_ring_centers(nside: usize) -> Result<SampleSet, SamplingError> {
    if nside == 0 {
        return Err(SamplingError::InvalidParameter(
            "healpix nside must be >= 1".into(),
        ));
    }
    let ns = nside as f64;
    let mut points = Vec::with_capacity(12 * nside * nside);
    for ring in 1..4 * nside {
        if ring < nside || ring > 3 * nside {
            // polar caps
            let k = if ring < nside { ring } else { 4 * nside - ring };
            let z = 1.0 - (k * k) as f64 / (3.0 * ns * ns);
            let z = if ring < nside { z } else { -z };
            let theta = z.acos();
            for j in 1..=4 * k {
                points.push(point(theta, (j as f64 - 0.5) * PI / (2 * k) as f64));
            }
        } else {
            let z = 4.0 / 3.0 - 2.0 * ring as f64 / (3.0 * ns);
            let theta = z.acos();
            let shift = if (ring + nside) % 2 == 1 { 1.0 } else { 0.5 };
            for j in 1..=4 * nside {
                points.push(point(theta, (j as f64 - shift) * PI / (2.0 * ns)));
            }
        }
    }
    SampleSet::new(points)
}

/// Iso-latitude rings totalling `multiplier · L²` points.
///
/// There are `(multiplier/2)·L` rings at `θ_r = π(2r+1)/(multiplier·L)`, each
/// holding `2L` equispaced longitudes rotated by a per-ring offset drawn
/// uniformly from `[0, 2π/(2L))` on the ring-rotation stream of `seed`.
pub fn optimal_dimensionality_style(
    band_limit: usize,
    multiplier: usize,
    seed: u64,
) -> Result<SampleSet, SamplingError> {
    if band_limit == 0 {
        return Err(SamplingError::InvalidParameter(
            "band limit must be >= 1".into(),
        ));
    }
    if multiplier < 2 || multiplier % 2 != 0 {
        return Err(SamplingError::InvalidParameter(format!(
            "multiplier must be even and >= 2 (got {multiplier})"
        )));
    }
    let rings = multiplier / 2 * band_limit;
    let per_ring = 2 * band_limit;
    let spacing = TAU / per_ring as f64;
    let mut rng = PortableRng::new(seed, RING_ROTATION_STREAM);
    let mut points = Vec::with_capacity(rings * per_ring);
    for r in 0..rings {
        let theta = PI * (2 * r + 1) as f64 / (multiplier * band_limit) as f64;
        let offset = rng.next_unit() * spacing;
        for p in 0..per_ring {
            points.push(point(theta, offset + spacing * p as f64));
        }
    }
    SampleSet::new(points)
}

/// `count` points uniform with respect to `sin θ dθ dφ`:
/// `θ = arccos(1 − 2u)`, `φ = 2πv`.
pub fn random_uniform(count: usize, seed: u64) -> Result<SampleSet, SamplingError> {
    if count == 0 {
        return Err(SamplingError::InvalidParameter("count must be >= 1".into()));
    }
    let mut rng = PortableRng::new(seed, RANDOM_POINTS_STREAM);
    let points = (0..count)
        .map(|_| {
            let u = rng.next_unit();
            let v = rng.next_unit();
            point(colatitude_from_unit(u), TAU * v)
        })
        .collect();
    SampleSet::new(points)
}

fn colatitude_from_unit(u: f64) -> f64 {
    (1.0 - 2.0 * u).clamp(-1.0, 1.0).acos()
}
