//! Linear parametrizations reduce every parametric step to the exact
//! Fourier-Galerkin step of the same Runge-Kutta method.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stiffparam::netparam::{FourierBasis, ParamVector};
use stiffparam::quadrature::QuadratureRule;
use stiffparam::semilinear::Problem;
use stiffparam::steppers::{
    galerkin_step, ButcherTableau, Method, SpectralTableau, StepContext, Stepper,
};

fn coefficients(len: usize, seed: u64) -> ParamVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ParamVector::from_vec((0..len).map(|_| rng.random_range(-1.0..1.0)).collect())
}

#[test]
fn parametric_steps_match_galerkin_steps() {
    let rule = QuadratureRule::periodic(20, 4).unwrap();
    let basis = FourierBasis::new(6);
    let ctx = StepContext::new(&basis, &rule);
    let theta0 = coefficients(13, 21);
    for method in Method::ALL {
        let stepper = Stepper::new(method).unwrap();
        for problem in [Problem::transport(), Problem::heat()] {
            for h in [0.1, 0.01] {
                let res = stepper.step(&ctx, &theta0, h, 1e-12, 2, &problem).unwrap();
                let oracle = galerkin_step(&method.tableau(), &theta0, h, &problem).unwrap();
                let err = (&*res.theta_next - &*oracle).amax();
                assert!(err < 1e-8, "{method} {problem} h = {h}: {err:e}");
                assert!(res.trace.iterations() <= 2);
            }
        }
    }
}

#[test]
fn galerkin_oracle_applies_the_stability_function() {
    // Mode k of transport is multiplied by R(−ihk), of heat by R(−hk²).
    let h = 0.1;
    for method in Method::ALL {
        let tab = method.tableau();
        for k in 1..5usize {
            let mut c = ParamVector::zeros(9);
            c[2 * k - 1] = 1.0;
            let kf = k as f64;
            let heat = galerkin_step(&tab, &c, h, &Problem::heat()).unwrap();
            let r = tab.stability(Complex64::new(-h * kf * kf, 0.0)).unwrap();
            assert!((heat[2 * k - 1] - r.re).abs() < 1e-13);
            let tr = galerkin_step(&tab, &c, h, &Problem::transport()).unwrap();
            let r = tab.stability(Complex64::new(0.0, -h * kf)).unwrap();
            let amp = (tr[2 * k - 1].powi(2) + tr[2 * k].powi(2)).sqrt();
            assert!((amp - r.norm()).abs() < 1e-13, "{method} k = {k}");
        }
    }
}

#[test]
fn gauss_and_radau_spectral_data() {
    let gauss = SpectralTableau::build(ButcherTableau::gauss2()).unwrap();
    let radau = SpectralTableau::build(ButcherTableau::radau2()).unwrap();
    let s3 = 3f64.sqrt();
    let s2 = 2f64.sqrt();
    for (spec, re, im) in [(&gauss, 3.0, s3), (&radau, 2.0, s2)] {
        assert!((spec.lambdas[0] - Complex64::new(re, im)).norm() < 1e-12);
        assert!((spec.lambdas[1] - Complex64::new(re, -im)).norm() < 1e-12);
        let tn = spec.t.clone().svd(false, false).singular_values.max();
        assert!((tn - 1.0).abs() < 1e-12);
    }
    assert!((gauss.w[0] + s3).abs() < 1e-12 && (gauss.w[1] - s3).abs() < 1e-12);
    assert!(radau.tableau.stiffly_accurate);
    assert!(!gauss.tableau.stiffly_accurate);
    // Against a generic eigen-solve of 𝒜⁻¹.
    for spec in [&gauss, &radau] {
        let inv = spec.tableau.a.clone().try_inverse().unwrap();
        let mut generic: Vec<Complex64> = inv.complex_eigenvalues().iter().copied().collect();
        generic.sort_by(|a, b| b.im.total_cmp(&a.im));
        for (g, l) in generic.iter().zip(&spec.lambdas) {
            assert!((g - l).norm() < 1e-12);
        }
    }
}

#[test]
fn stage_decomposition_reconstructs_the_inverse() {
    for tab in [
        ButcherTableau::gauss2(),
        ButcherTableau::radau2(),
        ButcherTableau::implicit_midpoint(),
    ] {
        let spec = SpectralTableau::build(tab.clone()).unwrap();
        let lambda =
            nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(spec.lambdas.clone()));
        let recon = &spec.t * lambda * &spec.t_inv;
        let inv = tab
            .a
            .clone()
            .try_inverse()
            .unwrap()
            .map(|v| Complex64::new(v, 0.0));
        assert!((recon - inv).camax() < 1e-12);
        // wᵀ𝒜 = bᵀ.
        let wa = tab.a.transpose() * &spec.w;
        assert!((wa - &tab.b).amax() < 1e-12);
        assert!(spec.mu > 0.0 && spec.condition_number() >= 1.0);
    }
}
