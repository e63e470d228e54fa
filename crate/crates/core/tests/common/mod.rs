//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use sht_irf::harmonics::{associated_legendre, CoefficientVector, HarmonicIndex, SpherePoint};
use sht_irf::linalg::norm2;
use sht_irf::rng::PortableRng;
use sht_irf::SamplingScheme;

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 1..=n {
        let mut x = (PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `Y_l^m` from the unnormalized Legendre function and explicit factorials,
/// using `P_l^{-m} = (-1)^m (l-m)!/(l+m)! P_l^m` for negative orders.
pub fn oracle_harmonic(l: usize, m: i64, p: SpherePoint) -> Complex64 {
    let am = m.unsigned_abs() as usize;
    let plm = associated_legendre(l as i64, am as i64, p.theta().cos()).unwrap();
    let (plm, ratio) = if m >= 0 {
        (plm, factorial(l - am) / factorial(l + am))
    } else {
        let sign = if am % 2 == 0 { 1.0 } else { -1.0 };
        (
            sign * factorial(l - am) / factorial(l + am) * plm,
            factorial(l + am) / factorial(l - am),
        )
    };
    let norm = ((2 * l + 1) as f64 / (4.0 * PI) * ratio).sqrt();
    Complex64::from_polar(norm * plm, m as f64 * p.phi())
}

pub fn oracle_basis(band_limit: usize, points: &[SpherePoint]) -> DMatrix<Complex64> {
    DMatrix::from_fn(points.len(), band_limit * band_limit, |r, c| {
        let idx = HarmonicIndex::from_flat(c);
        oracle_harmonic(idx.degree(), idx.order(), points[r])
    })
}

/// Least-squares solution of the full design system through a Householder
/// QR factorization, `R x = Q^H g`.
pub fn direct_least_squares(
    band_limit: usize,
    points: &[SpherePoint],
    g: &[Complex64],
) -> CoefficientVector {
    let a = oracle_basis(band_limit, points);
    let b = DVector::from_column_slice(g);
    let qr = a.qr();
    let rhs = qr.q().adjoint() * b;
    let x = qr
        .r()
        .solve_upper_triangular(&rhs)
        .expect("full column rank");
    CoefficientVector::from_values(band_limit, x.iter().copied().collect()).unwrap()
}

/// Ratio of the smallest to the largest singular value from the eigenvalues
/// of the Gram matrix.
pub fn singular_value_ratio_from_gram(band_limit: usize, points: &[SpherePoint]) -> f64 {
    let a = oracle_basis(band_limit, points);
    let eig = (a.adjoint() * a).symmetric_eigenvalues();
    let max = eig.iter().cloned().fold(0.0, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    (min.max(0.0) / max).sqrt()
}

/// Ratio of the smallest to the largest singular value of the full design
/// matrix.
pub fn singular_value_ratio(band_limit: usize, points: &[SpherePoint]) -> f64 {
    let sv = oracle_basis(band_limit, points).singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    min / max
}

/// The four sampling schemes at roughly `4L²` points.
pub fn schemes_for(band_limit: usize, seed: u64) -> [SamplingScheme; 4] {
    [
        SamplingScheme::Equiangular {
            n_theta: 2 * band_limit,
            n_phi: 2 * band_limit + 1,
        },
        SamplingScheme::Healpix {
            nside: ((0.6 * band_limit as f64).round() as usize).max(1),
        },
        SamplingScheme::OptimalDimensionality {
            band_limit,
            multiplier: 4,
            seed,
        },
        SamplingScheme::RandomUniform {
            count: 4 * band_limit * band_limit,
            seed,
        },
    ]
}

pub fn random_coefficients(band_limit: usize, seed: u64) -> CoefficientVector {
    let mut rng = PortableRng::new(seed, 99);
    let v = (0..band_limit * band_limit)
        .map(|_| Complex64::new(rng.next_symmetric(), rng.next_symmetric()))
        .collect();
    CoefficientVector::from_values(band_limit, v).unwrap()
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn relative_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    let d: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm2(&d) / norm2(b).max(f64::MIN_POSITIVE)
}
