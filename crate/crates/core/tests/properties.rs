//! Randomized algebraic properties of the symbol calculus, checked with
//! shrinking inputs: star associativity, reality/symmetry structure, trace
//! pairing, strategy agreement, moment-oracle agreement with quadrature, and
//! exactness of affine pullbacks.

mod common;

use common::hermite_cubature_2d;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use starflow::symbols::{
    gaussian_moment, moyal_star, moyal_star_gaussian, moyal_star_series, trace_at,
    ComplexQuadraticForm, GaussPolySymbol, MultiIndex, Poly,
};
use starflow::symplectic::canonical_pi0;

/// Raw term data: exponent tuple per variable plus a real coefficient.
type TermData = Vec<(Vec<u16>, f64)>;

fn poly_data(dim: usize, deg: u16, max_terms: usize) -> impl Strategy<Value = TermData> {
    prop::collection::vec(
        (prop::collection::vec(0u16..=deg, dim), -1.0..1.0f64),
        1..=max_terms,
    )
    .prop_map(move |raw| {
        raw.into_iter()
            .map(|(mut exps, c)| {
                // Trim exponents until the total degree fits the cap.
                let mut total: u16 = exps.iter().sum();
                while total > deg {
                    for e in exps.iter_mut() {
                        if *e > 0 && total > deg {
                            *e -= 1;
                            total -= 1;
                        }
                    }
                }
                (exps, c)
            })
            .collect()
    })
}

fn build_poly(dim: usize, data: &TermData) -> Poly {
    let mut p = Poly::zero(dim);
    for (exps, c) in data {
        let mut idx = MultiIndex::zeros(dim);
        for (k, &e) in exps.iter().enumerate() {
            idx.0[k] = e;
        }
        p.add_term(idx, Complex64::new(*c, 0.0));
    }
    p
}

/// Raw data for a convergent real Gaussian factor in dimension 2.
#[derive(Clone, Debug)]
struct GaussData {
    diag: (f64, f64),
    off: f64,
    b: (f64, f64),
    c: f64,
}

fn gauss_data() -> impl Strategy<Value = GaussData> {
    (
        (1.0..2.0f64, 1.0..2.0f64),
        -0.15..0.15f64,
        (-0.5..0.5f64, -0.5..0.5f64),
        -0.3..0.3f64,
    )
        .prop_map(|(diag, off, b, c)| GaussData { diag, off, b, c })
}

fn build_gaussian(g: &GaussData, poly: &TermData) -> GaussPolySymbol {
    let m = DMatrix::from_row_slice(2, 2, &[g.diag.0, g.off, g.off, g.diag.1]);
    let b = DVector::from_vec(vec![g.b.0, g.b.1]);
    let base = GaussPolySymbol::gaussian_real(&m, &b, g.c).expect("convergent exponent");
    base.pointwise_mul(&GaussPolySymbol::polynomial(build_poly(2, poly)))
        .expect("same dimension")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn star_is_associative(
        fd in poly_data(2, 3, 5),
        gd in poly_data(2, 3, 5),
        hd in poly_data(2, 3, 5),
    ) {
        let pi = canonical_pi0(2).unwrap();
        let f = GaussPolySymbol::polynomial(build_poly(2, &fd));
        let g = GaussPolySymbol::polynomial(build_poly(2, &gd));
        let h = GaussPolySymbol::polynomial(build_poly(2, &hd));
        let left = moyal_star(&moyal_star(&f, &g, &pi, 1.0).unwrap(), &h, &pi, 1.0).unwrap();
        let right = moyal_star(&f, &moyal_star(&g, &h, &pi, 1.0).unwrap(), &pi, 1.0).unwrap();
        let scale = 1.0 + left.coeff_sup().max(right.coeff_sup());
        prop_assert!(
            left.distance(&right) <= 1e-11 * scale,
            "associativity defect {} at scale {}",
            left.distance(&right),
            scale
        );
    }

    #[test]
    fn real_star_splits_into_real_even_and_imaginary_odd_parts(
        fd in poly_data(2, 4, 5),
        gd in poly_data(2, 4, 5),
    ) {
        let pi = canonical_pi0(2).unwrap();
        let f = GaussPolySymbol::polynomial(build_poly(2, &fd));
        let g = GaussPolySymbol::polynomial(build_poly(2, &gd));
        let fg = moyal_star(&f, &g, &pi, 1.0).unwrap();
        let gf = moyal_star(&g, &f, &pi, 1.0).unwrap();
        let anti = fg.try_add(&gf).unwrap();
        let comm = fg.try_add_scaled(&gf, Complex64::new(-1.0, 0.0)).unwrap();
        let scale = 1.0 + fg.coeff_sup();
        // For real symbols the even-order terms (anticommutator) are real and
        // the odd-order terms (commutator) are purely imaginary.
        let worst_im = anti
            .folded_poly()
            .terms()
            .map(|(_, c)| c.im.abs())
            .fold(0.0, f64::max);
        let worst_re = comm
            .folded_poly()
            .terms()
            .map(|(_, c)| c.re.abs())
            .fold(0.0, f64::max);
        prop_assert!(worst_im <= 1e-12 * scale, "anticommutator imaginary part {worst_im}");
        prop_assert!(worst_re <= 1e-12 * scale, "commutator real part {worst_re}");
    }

    #[test]
    fn trace_pairs_with_pointwise_product(
        g in gauss_data(),
        gp in poly_data(2, 2, 3),
        pd in poly_data(2, 3, 5),
    ) {
        let pi = canonical_pi0(2).unwrap();
        let a = build_gaussian(&g, &gp);
        let b = GaussPolySymbol::polynomial(build_poly(2, &pd));
        let star_fw = trace_at(&moyal_star(&a, &b, &pi, 1.0).unwrap(), 1.0, 1.0).unwrap();
        let star_bw = trace_at(&moyal_star(&b, &a, &pi, 1.0).unwrap(), 1.0, 1.0).unwrap();
        let plain = trace_at(&a.pointwise_mul(&b).unwrap(), 1.0, 1.0).unwrap();
        let scale = 1.0 + plain.norm();
        prop_assert!((star_fw - plain).norm() <= 1e-10 * scale);
        prop_assert!((star_bw - plain).norm() <= 1e-10 * scale);
    }

    #[test]
    fn star_strategies_agree(
        g in gauss_data(),
        gp in poly_data(2, 2, 3),
        pd in poly_data(2, 3, 5),
        swap in any::<bool>(),
    ) {
        let pi = canonical_pi0(2).unwrap();
        let a = build_gaussian(&g, &gp);
        let b = GaussPolySymbol::polynomial(build_poly(2, &pd));
        let (x, y) = if swap { (&b, &a) } else { (&a, &b) };
        let series = moyal_star_series(x, y, &pi, 1.0).unwrap();
        let gaussian = moyal_star_gaussian(x, y, &pi, 1.0).unwrap();
        let scale = 1.0 + series.coeff_sup().max(gaussian.coeff_sup());
        prop_assert!(
            series.distance(&gaussian) <= 1e-9 * scale,
            "strategy gap {} at scale {}",
            series.distance(&gaussian),
            scale
        );
    }

    #[test]
    fn gaussian_moment_matches_quadrature(
        s11 in -0.25..0.25f64,
        s22 in -0.25..0.25f64,
        s12 in -0.2..0.2f64,
        b1 in -0.4..0.4f64,
        b2 in -0.4..0.4f64,
        c in -0.3..0.3f64,
        pd in poly_data(2, 4, 5),
    ) {
        // Exponent −½xᵀ(2I + S)x + bᵀx + c: the unit-Gaussian factor e^{−|x|²}
        // is the quadrature weight, the rest rides along analytically.
        let m = DMatrix::from_row_slice(2, 2, &[2.0 + s11, s12, s12, 2.0 + s22])
            .map(Complex64::from);
        let b = DVector::from_vec(vec![b1, b2]).map(Complex64::from);
        let q = ComplexQuadraticForm::new(m, b, Complex64::from(c));
        let p = build_poly(2, &pd);
        let exact = gaussian_moment(&q, &p).unwrap();
        let quad = hermite_cubature_2d(48, |x, y| {
            let extra = -0.5 * (s11 * x * x + 2.0 * s12 * x * y + s22 * y * y)
                + b1 * x
                + b2 * y
                + c;
            let v = p.eval(&DVector::from_vec(vec![
                Complex64::from(x),
                Complex64::from(y),
            ]));
            v.re * extra.exp()
        });
        prop_assert!(
            (exact.re - quad).abs() <= 1e-9 * (1.0 + quad.abs()),
            "moment {} vs quadrature {}",
            exact.re,
            quad
        );
        prop_assert!(exact.im.abs() <= 1e-12 * (1.0 + quad.abs()));
    }

    #[test]
    fn affine_pullback_evaluates_exactly(
        g in gauss_data(),
        gp in poly_data(2, 3, 4),
        sm in prop::collection::vec(-1.0..1.0f64, 4),
        dv in prop::collection::vec(-0.8..0.8f64, 2),
        pts in prop::collection::vec((-1.5..1.5f64, -1.5..1.5f64), 6),
    ) {
        let f = build_gaussian(&g, &gp);
        let s = DMatrix::from_row_slice(2, 2, &sm);
        let d = DVector::from_vec(dv);
        let pulled = f.affine_pullback(&s, &d).unwrap();
        for (x, y) in pts {
            let at = DVector::from_vec(vec![x, y]);
            let direct = f.eval_real(&(&s * (&at - &d)));
            let via = pulled.eval_real(&at);
            let scale = 1.0 + direct.norm().max(via.norm());
            prop_assert!(
                (direct - via).norm() <= 1e-11 * scale,
                "pullback mismatch at ({x}, {y}): {direct} vs {via}"
            );
        }
    }
}
