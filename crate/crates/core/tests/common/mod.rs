//! Shared helpers for the integration suites: independent quadrature
//! oracles, seeded random inputs, and convergence-order fitting.
//!
//! Not every suite uses every helper.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use starflow::symbols::{GaussPolySymbol, MultiIndex, Poly};

/// Deterministic RNG for a test, keyed by a per-test tag.
pub fn rng(tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x0bad_cafe ^ tag)
}

/// Gauss–Hermite nodes and weights for `∫ g(y) e^{-y²} dy ≈ Σ wᵢ g(yᵢ)`,
/// computed by the Golub–Welsch eigenvalue method.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2, "need at least two quadrature nodes");
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let off = (k as f64 / 2.0).sqrt();
        j[(k - 1, k)] = off;
        j[(k, k - 1)] = off;
    }
    let eig = j.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let node = eig.eigenvalues[i];
            let v0 = eig.eigenvectors[(0, i)];
            (node, std::f64::consts::PI.sqrt() * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

/// Tensor two-dimensional cubature of `∫∫ g(y₁, y₂) e^{-(y₁²+y₂²)} dy`.
pub fn hermite_cubature_2d<G: Fn(f64, f64) -> f64>(nodes: usize, g: G) -> f64 {
    let (ys, ws) = gauss_hermite(nodes);
    let mut acc = 0.0;
    for (y1, w1) in ys.iter().zip(&ws) {
        for (y2, w2) in ys.iter().zip(&ws) {
            acc += w1 * w2 * g(*y1, *y2);
        }
    }
    acc
}

/// Random sparse polynomial with real coefficients in `[-1, 1]`.
pub fn random_poly(rng: &mut ChaCha8Rng, dim: usize, max_degree: usize, terms: usize) -> Poly {
    let mut p = Poly::constant(dim, Complex64::new(rng.gen_range(-1.0..1.0), 0.0));
    for _ in 0..terms {
        let degree = rng.gen_range(0..=max_degree);
        let mut idx = MultiIndex::zeros(dim);
        for _ in 0..degree {
            idx = idx.plus(&MultiIndex::unit(dim, rng.gen_range(0..dim)));
        }
        p.add_term(idx, Complex64::new(rng.gen_range(-1.0..1.0), 0.0));
    }
    p
}

/// Random integrable Gaussian-polynomial symbol (positive-definite real
/// exponent part, modest couplings).
pub fn random_gaussian_poly(rng: &mut ChaCha8Rng, dim: usize) -> GaussPolySymbol {
    let mut m = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        m[(i, i)] = 1.0 + rng.gen_range(0.0..1.0);
        for j in (i + 1)..dim {
            let off = rng.gen_range(-0.15..0.15);
            m[(i, j)] = off;
            m[(j, i)] = off;
        }
    }
    let b = DVector::from_fn(dim, |_, _| rng.gen_range(-0.5..0.5));
    let g = GaussPolySymbol::gaussian_real(&m, &b, rng.gen_range(-0.3..0.3)).expect("gaussian");
    let p = GaussPolySymbol::polynomial(random_poly(rng, dim, 2, 4));
    g.pointwise_mul(&p).expect("product")
}

/// Random Hurwitz-stable coefficient matrix: every eigenvalue has a strictly
/// negative real part (shifted by a bound on the spectral radius).
pub fn random_stable_matrix(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<f64> {
    let r = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
    let bound = r.abs().iter().copied().fold(0.0, f64::max) * dim as f64;
    &r - DMatrix::identity(dim, dim) * (bound + 0.2)
}

/// Least-squares slope of `ln y` against `ln x` — the empirical convergence
/// order of `y ~ C·x^slope`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}
