use antithetic_core::diffusion::{MixtureParams, MixtureScore, Schedule};
use antithetic_core::fkg::{antithetic_corr, build_random_chain, ddim_monotonicity_check, partial_monotone_corr, random_additive_map};
use antithetic_core::ou::{decay_curve, mixture_fisher_information, project_mixture, symmetry_preservation_check, Orthogonal};
use antithetic_core::symmetry::{antisymmetry_score, slice_curve, SliceCurve};
use antithetic_core::RngStream;

#[test]
fn fisher_information_of_shifted_gaussian() {
    let m = MixtureParams::single(vec![2.0], 1.0).unwrap();
    for k in 1..=20 {
        let t = 0.1 * k as f64;
        let fi = mixture_fisher_information(&m, t).unwrap();
        assert!((fi - 4.0 * (-2.0 * t).exp()).abs() < 1e-6, "t = {t}: {fi}");
    }
}

#[test]
fn bimodal_fisher_and_norm_decay() {
    let m = MixtureParams::new(vec![0.5, 0.5], vec![vec![-1.5], vec![1.5]], vec![0.3, 0.3]).unwrap();
    let e = project_mixture(&m, 24, 64).unwrap();
    let times: Vec<f64> = (1..=20).map(|k| 0.1 * k as f64).collect();
    let rows = decay_curve(&m, Some(&e), &times).unwrap();
    for w in rows.windows(2) {
        assert!(w[1].fisher <= w[0].fisher);
        assert!(w[1].norm.unwrap() <= w[0].norm.unwrap());
    }
    for r in &rows {
        assert!(r.fisher <= r.fisher_bound * (1.0 + 1e-6));
    }
}

#[test]
fn antisymmetry_scores() {
    let lin = SliceCurve::from_fn(2001, |c| c).unwrap();
    let sq = SliceCurve::from_fn(2001, |c| c * c).unwrap();
    let mixed = SliceCurve::from_fn(2001, |c| c + c * c).unwrap();
    assert!((antisymmetry_score(&lin).unwrap() - 1.0).abs() < 1e-12);
    assert!(antisymmetry_score(&sq).unwrap().abs() < 1e-12);
    assert!((antisymmetry_score(&mixed).unwrap() - 15.0 / 19.0).abs() < 1e-3);

    let s = Schedule::linear_beta(1000, 1e-4, 0.02).unwrap().respaced(20).unwrap();
    let m = MixtureParams::symmetric_pair(&[0.0, 0.0, 0.0], &[1.0, -0.5, 0.8], 0.3).unwrap();
    let f = MixtureScore::new(m, &s);
    for t in 1..=20 {
        for coord in 0..3 {
            let curve = slice_curve(&f, t, &[0.7, -1.1, 0.4], coord, 201).unwrap();
            assert!(antisymmetry_score(&curve).unwrap() >= 1.0 - 1e-8);
        }
    }
}

#[test]
fn monotone_maps_are_never_positively_correlated() {
    for k in 0..100u64 {
        let chain = build_random_chain(RngStream::new(31, k), 1 + (k as usize % 6), 1.0).unwrap();
        let (rho, se) = antithetic_corr(|z| chain.eval(z), 10_000, RngStream::new(32, k)).unwrap();
        assert!(rho <= 3.0 * se, "chain {k}: rho {rho} se {se}");
    }
    for k in 0..20u64 {
        let map = random_additive_map(RngStream::new(33, k), 3, 2).unwrap();
        let (rho, se) = partial_monotone_corr(&map, &[0.7, 0.3], 5_000, RngStream::new(34, k)).unwrap();
        assert!(rho <= 3.0 * se);
    }
}

#[test]
fn gaussian_ddim_steps_are_monotone() {
    let s = Schedule::linear_beta(1000, 1e-4, 0.02).unwrap().respaced(25).unwrap();
    let m = MixtureParams::standard_normal(4);
    for t in 1..=25 {
        let r = ddim_monotonicity_check(&m, &s, t, 128, RngStream::new(35, t as u64)).unwrap();
        assert!(r.condition_holds);
        assert!(r.min_jacobian >= -1e-8);
    }
}

#[test]
fn reflection_symmetry_survives_the_flow() {
    let m = MixtureParams::symmetric_pair(&[0.0, 0.0], &[1.2, -0.6], 0.4).unwrap();
    let times: Vec<f64> = (1..=30).map(|k| 0.1 * k as f64).collect();
    let r = symmetry_preservation_check(&m, &Orthogonal::CentralReflection, &[0.0, 0.0], &times, 256, RngStream::new(36, 0)).unwrap();
    assert!(r.max_density_residual < 1e-10 && r.max_score_residual < 1e-10);
}
