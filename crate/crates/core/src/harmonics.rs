//! Spherical harmonic basis functions and synthesis of band-limited signals.
//!
//! Harmonics are orthonormal over the unit sphere with the Condon–Shortley
//! phase folded into the associated Legendre functions:
//!
//! ```text
//! Y_l^m(θ, φ) = N_l^m P_l^m(cos θ) e^{imφ},   N_l^m = sqrt((2l+1)/(4π) (l-m)!/(l+m)!)
//! Y_l^{-m}    = (-1)^m conj(Y_l^m)
//! ```
//!
//! Coefficients are stored degree-major with order ascending inside a degree,
//! so `(l, m)` lives at flat index `l² + l + m`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::linalg::ComplexMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarmonicError {
    #[error("invalid harmonic index: degree {degree}, order {order}")]
    InvalidIndex { degree: i64, order: i64 },
    #[error("argument {0} outside [-1, 1]")]
    ArgumentOutOfDomain(f64),
    #[error("colatitude {0} outside [0, pi]")]
    InvalidColatitude(f64),
    #[error("band limit must be positive")]
    ZeroBandLimit,
    #[error("expected {expected} coefficients for the band limit, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("flat index {index} is outside band limit {band_limit}")]
    IndexOutOfBand { index: usize, band_limit: usize },
}

/// A `(degree, order)` pair naming one spherical harmonic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HarmonicIndex {
    degree: usize,
    order: i64,
}

impl HarmonicIndex {
    pub fn new(degree: usize, order: i64) -> Result<Self, HarmonicError> {
        if order.unsigned_abs() as usize > degree {
            return Err(HarmonicError::InvalidIndex {
                degree: degree as i64,
                order,
            });
        }
        Ok(Self { degree, order })
    }

    /// Inverse of [`HarmonicIndex::flat`].
    pub fn from_flat(flat: usize) -> Self {
        let mut degree = (flat as f64).sqrt() as usize;
        // guard the float sqrt at perfect squares
        while degree * degree > flat {
            degree -= 1;
        }
        while (degree + 1) * (degree + 1) <= flat {
            degree += 1;
        }
        let order = flat as i64 - (degree * degree + degree) as i64;
        Self { degree, order }
    }

    pub fn degree(self) -> usize {
        self.degree
    }

    pub fn order(self) -> i64 {
        self.order
    }

    /// Zero-based position `l² + l + m` in a coefficient vector.
    pub fn flat(self) -> usize {
        ((self.degree * self.degree + self.degree) as i64 + self.order) as usize
    }
}

/// Flat index of `(degree, order)`, rejecting `|order| > degree`.
pub fn flat_index(degree: usize, order: i64) -> Result<usize, HarmonicError> {
    HarmonicIndex::new(degree, order).map(HarmonicIndex::flat)
}

/// A point on the unit sphere given by colatitude and longitude in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint {
    theta: f64,
    phi: f64,
}

impl SpherePoint {
    /// Longitude is wrapped into `[0, 2π)`; colatitude must lie in `[0, π]`.
    pub fn new(theta: f64, phi: f64) -> Result<Self, HarmonicError> {
        if !(0.0..=PI).contains(&theta) {
            return Err(HarmonicError::InvalidColatitude(theta));
        }
        let mut phi = phi.rem_euclid(TAU);
        if phi >= TAU {
            phi = 0.0;
        }
        Ok(Self { theta, phi })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }
}

/// Length-`L²` coefficient vector of a signal band-limited at degree `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    band_limit: usize,
    values: Vec<Complex64>,
}

impl CoefficientVector {
    pub fn zeros(band_limit: usize) -> Self {
        Self {
            band_limit,
            values: vec![Complex64::new(0.0, 0.0); band_limit * band_limit],
        }
    }

    pub fn from_values(band_limit: usize, values: Vec<Complex64>) -> Result<Self, HarmonicError> {
        if band_limit == 0 {
            return Err(HarmonicError::ZeroBandLimit);
        }
        if values.len() != band_limit * band_limit {
            return Err(HarmonicError::LengthMismatch {
                expected: band_limit * band_limit,
                got: values.len(),
            });
        }
        Ok(Self { band_limit, values })
    }

    /// All zeros except a one at `index`.
    pub fn unit(band_limit: usize, index: usize) -> Result<Self, HarmonicError> {
        let mut c = Self::zeros(band_limit);
        if index >= c.values.len() {
            return Err(HarmonicError::IndexOutOfBand { index, band_limit });
        }
        c.values[index] = Complex64::new(1.0, 0.0);
        Ok(c)
    }

    pub fn band_limit(&self) -> usize {
        self.band_limit
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn get(&self, index: HarmonicIndex) -> Option<Complex64> {
        self.values.get(index.flat()).copied()
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }
}

/// Unnormalized associated Legendre function `P_l^m(x)` with the
/// Condon–Shortley phase, by upward recursion in degree from `P_m^m`.
pub fn associated_legendre(degree: i64, order: i64, x: f64) -> Result<f64, HarmonicError> {
    if order < 0 || order > degree {
        return Err(HarmonicError::InvalidIndex { degree, order });
    }
    if !(-1.0..=1.0).contains(&x) {
        return Err(HarmonicError::ArgumentOutOfDomain(x));
    }
    let m = order as usize;
    let l = degree as usize;

    // P_m^m = (-1)^m (2m-1)!! (1-x²)^{m/2}
    let s = ((1.0 - x) * (1.0 + x)).sqrt();
    let mut pmm = 1.0;
    for k in 1..=m {
        pmm *= -((2 * k - 1) as f64) * s;
    }
    if l == m {
        return Ok(pmm);
    }
    let mut prev = pmm;
    let mut cur = x * (2 * m + 1) as f64 * pmm;
    for n in (m + 2)..=l {
        let next = ((2 * n - 1) as f64 * x * cur - (n + m - 1) as f64 * prev) / (n - m) as f64;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Orthonormalized Legendre values `N_l^m P_l^m(cos θ)` for `0 ≤ m ≤ l < L`,
/// packed as `l(l+1)/2 + m`.
///
/// The recursion runs on the normalized quantities directly so that no
/// factorial ratio is ever formed.
fn normalized_legendre_table(band_limit: usize, theta: f64) -> Vec<f64> {
    let x = theta.cos();
    let s = theta.sin();
    let tri = |l: usize, m: usize| l * (l + 1) / 2 + m;
    let mut p = vec![0.0; band_limit * (band_limit + 1) / 2];
    if band_limit == 0 {
        return p;
    }

    let mut pmm = (1.0 / (4.0 * PI)).sqrt();
    for m in 0..band_limit {
        if m > 0 {
            pmm *= -(((2 * m + 1) as f64) / ((2 * m) as f64)).sqrt() * s;
        }
        p[tri(m, m)] = pmm;
        if m + 1 < band_limit {
            p[tri(m + 1, m)] = ((2 * m + 3) as f64).sqrt() * x * pmm;
        }
        for l in (m + 2)..band_limit {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0))
                .sqrt();
            p[tri(l, m)] = a * (x * p[tri(l - 1, m)] - b * p[tri(l - 2, m)]);
        }
    }
    p
}

/// `Y_l^m(θ, φ)` for a single index.
pub fn evaluate_harmonic(index: HarmonicIndex, point: SpherePoint) -> Complex64 {
    let l = index.degree();
    let m = index.order().unsigned_abs() as usize;
    let table = normalized_legendre_table(l + 1, point.theta());
    let value = table[l * (l + 1) / 2 + m];
    let y = Complex64::from_polar(value, m as f64 * point.phi());
    if index.order() < 0 {
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        y.conj() * sign
    } else {
        y
    }
}

/// Every `Y_l^m` with `l < band_limit` at one point, in flat order.
pub fn harmonics_at(band_limit: usize, point: SpherePoint) -> Vec<Complex64> {
    let table = normalized_legendre_table(band_limit, point.theta());
    let phases: Vec<Complex64> = (0..band_limit)
        .map(|m| Complex64::from_polar(1.0, m as f64 * point.phi()))
        .collect();
    let mut out = vec![Complex64::new(0.0, 0.0); band_limit * band_limit];
    for l in 0..band_limit {
        let centre = l * l + l;
        for m in 0..=l {
            let y = phases[m] * table[l * (l + 1) / 2 + m];
            out[centre + m] = y;
            if m > 0 {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                out[centre - m] = y.conj() * sign;
            }
        }
    }
    out
}

/// The `M × L²` matrix whose row `p` holds every harmonic at `points[p]`.
pub fn basis_matrix(band_limit: usize, points: &[SpherePoint]) -> ComplexMatrix {
    let cols = band_limit * band_limit;
    let entries: Vec<Complex64> = points
        .par_iter()
        .flat_map_iter(|&p| harmonics_at(band_limit, p))
        .collect();
    ComplexMatrix::from_row_major(points.len(), cols, entries)
        .expect("basis rows have L² entries each")
}

/// Evaluates `Σ_{l<L} Σ_{|m|≤l} c_l^m Y_l^m` at each point.
pub fn synthesize(coeffs: &CoefficientVector, points: &[SpherePoint]) -> Vec<Complex64> {
    let band_limit = coeffs.band_limit();
    points
        .par_iter()
        .map(|&p| {
            harmonics_at(band_limit, p)
                .iter()
                .zip(coeffs.values())
                .fold(Complex64::new(0.0, 0.0), |acc, (y, c)| acc + y * c)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    // Closed forms with the Condon–Shortley phase, l ≤ 4.
    fn legendre_closed_form(l: usize, m: usize, x: f64) -> f64 {
        let s = (1.0 - x * x).sqrt();
        match (l, m) {
            (0, 0) => 1.0,
            (1, 0) => x,
            (1, 1) => -s,
            (2, 0) => 0.5 * (3.0 * x * x - 1.0),
            (2, 1) => -3.0 * x * s,
            (2, 2) => 3.0 * s * s,
            (3, 0) => 0.5 * (5.0 * x.powi(3) - 3.0 * x),
            (3, 1) => -1.5 * (5.0 * x * x - 1.0) * s,
            (3, 2) => 15.0 * x * s * s,
            (3, 3) => -15.0 * s.powi(3),
            (4, 0) => (35.0 * x.powi(4) - 30.0 * x * x + 3.0) / 8.0,
            (4, 1) => -2.5 * (7.0 * x.powi(3) - 3.0 * x) * s,
            (4, 2) => 7.5 * (7.0 * x * x - 1.0) * s * s,
            (4, 3) => -105.0 * x * s.powi(3),
            (4, 4) => 105.0 * s.powi(4),
            _ => unreachable!(),
        }
    }

    #[test]
    fn legendre_examples() {
        assert_eq!(associated_legendre(0, 0, 0.3).unwrap(), 1.0);
        assert_eq!(associated_legendre(1, 0, 0.5).unwrap(), 0.5);
        assert!(associated_legendre(2, 1, 0.0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn legendre_matches_closed_forms() {
        for l in 0..=4 {
            for m in 0..=l {
                for &x in &[-1.0, -0.7, -0.2, 0.0, 0.35, 0.9, 1.0] {
                    let got = associated_legendre(l as i64, m as i64, x).unwrap();
                    let want = legendre_closed_form(l, m, x);
                    assert!(
                        close(got, want, 1e-12),
                        "P_{l}^{m}({x}) = {got}, want {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn legendre_domain_errors() {
        assert!(matches!(
            associated_legendre(2, 0, 1.5),
            Err(HarmonicError::ArgumentOutOfDomain(_))
        ));
        assert!(matches!(
            associated_legendre(1, 2, 0.1),
            Err(HarmonicError::InvalidIndex { .. })
        ));
        assert!(associated_legendre(1, -1, 0.1).is_err());
    }

    #[test]
    fn harmonic_spot_values() {
        let y00 = evaluate_harmonic(
            HarmonicIndex::new(0, 0).unwrap(),
            SpherePoint::new(1.1, 4.0).unwrap(),
        );
        assert!(close(y00.re, 0.2820947918, 1e-10) && y00.im == 0.0);

        let y10 = evaluate_harmonic(
            HarmonicIndex::new(1, 0).unwrap(),
            SpherePoint::new(0.0, 0.0).unwrap(),
        );
        assert!(close(y10.re, 0.4886025119, 1e-10) && y10.im.abs() < 1e-15);

        let y11 = evaluate_harmonic(
            HarmonicIndex::new(1, 1).unwrap(),
            SpherePoint::new(PI / 2.0, 0.0).unwrap(),
        );
        assert!(close(y11.re, -0.3454941494, 1e-10) && y11.im.abs() < 1e-15);
    }

    #[test]
    fn normalized_table_agrees_with_unnormalized_recursion() {
        fn factorial(n: usize) -> f64 {
            (1..=n).map(|k| k as f64).product()
        }
        let theta = 0.83_f64;
        let table = normalized_legendre_table(12, theta);
        for l in 0..12 {
            for m in 0..=l {
                let norm =
                    ((2 * l + 1) as f64 / (4.0 * PI) * factorial(l - m) / factorial(l + m)).sqrt();
                let want = norm * associated_legendre(l as i64, m as i64, theta.cos()).unwrap();
                let got = table[l * (l + 1) / 2 + m];
                assert!(close(got, want, 1e-12 * want.abs().max(1.0)), "({l},{m})");
            }
        }
    }

    #[test]
    fn flat_index_examples() {
        assert_eq!(flat_index(0, 0).unwrap(), 0);
        assert_eq!(flat_index(1, -1).unwrap(), 1);
        assert_eq!(flat_index(2, 2).unwrap(), 8);
        assert!(matches!(
            flat_index(1, 2),
            Err(HarmonicError::InvalidIndex { .. })
        ));
    }

    #[test]
    fn flat_index_round_trip() {
        for l in 0..32usize {
            for m in -(l as i64)..=(l as i64) {
                let idx = HarmonicIndex::new(l, m).unwrap();
                assert_eq!(HarmonicIndex::from_flat(idx.flat()), idx);
            }
        }
        for f in 0..(32 * 32) {
            assert_eq!(HarmonicIndex::from_flat(f).flat(), f);
        }
    }

    #[test]
    fn longitude_is_wrapped() {
        let p = SpherePoint::new(1.0, -PI / 2.0).unwrap();
        assert!(close(p.phi(), 1.5 * PI, 1e-15));
        let p = SpherePoint::new(1.0, TAU).unwrap();
        assert_eq!(p.phi(), 0.0);
        assert!(SpherePoint::new(-0.1, 0.0).is_err());
        assert!(SpherePoint::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn harmonics_at_matches_single_evaluation() {
        let p = SpherePoint::new(2.2, 5.1).unwrap();
        let all = harmonics_at(9, p);
        for (f, y) in all.iter().enumerate() {
            let single = evaluate_harmonic(HarmonicIndex::from_flat(f), p);
            assert!((single - y).norm() < 1e-14);
        }
    }

    #[test]
    fn synthesize_trivial_cases() {
        let pts: Vec<_> = (0..7)
            .map(|i| SpherePoint::new(0.4 * i as f64, 0.9 * i as f64).unwrap())
            .collect();
        let unit = CoefficientVector::unit(4, 0).unwrap();
        for v in synthesize(&unit, &pts) {
            assert!(close(v.re, 0.5 / PI.sqrt(), 1e-15) && v.im.abs() < 1e-15);
        }
        for v in synthesize(&CoefficientVector::zeros(4), &pts) {
            assert_eq!(v, Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn coefficient_vector_rejects_bad_lengths() {
        assert!(CoefficientVector::from_values(3, vec![Complex64::new(0.0, 0.0); 8]).is_err());
        assert!(CoefficientVector::from_values(0, vec![]).is_err());
        assert!(CoefficientVector::unit(2, 4).is_err());
    }
}
