use lrwm_core::approximations::{cumulants, cumulants_from_moments, moments_from_cumulants, spectral_surrogate};
use lrwm_core::mortality::MortalityModel;
use lrwm_core::numerics::{trace_of_product, QuadratureConfig, SpdMatrix, SymMatrix};
use lrwm_core::pricing::{
    annuity_coeffs, gao_setup, survival_bond, AnnuitySchedule, DiscountCurve, GaoContract, PayoffTransform,
};
use lrwm_core::wishart::WishartParams;
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Two-life model around the reference parameters with a variable volatility correlation.
fn model(rho: f64, alpha: f64) -> MortalityModel {
    let s12 = rho * (0.06f64 * 0.04).sqrt();
    let v12 = 0.5 * (0.005f64 * 0.0025).sqrt();
    let w = WishartParams::new(
        3.5,
        SpdMatrix::from_row_slice(2, &[0.06, s12, s12, 0.04]).unwrap(),
        -DMatrix::identity(2, 2),
        SpdMatrix::from_row_slice(2, &[0.005, v12, v12, 0.0025]).unwrap(),
    )
    .unwrap();
    MortalityModel::new(w, vec![SymMatrix::unit_diagonal(2, 0), SymMatrix::unit_diagonal(2, 1)], alpha).unwrap()
}

fn v0(m: &MortalityModel) -> SymMatrix {
    m.wishart().v0().as_sym().clone()
}

fn cfg() -> QuadratureConfig {
    QuadratureConfig::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bell_round_trip(k1 in -2.0..2.0f64, k2 in 0.01..3.0f64, k3 in -1.0..1.0f64, k4 in -1.0..1.0f64) {
        let kappas = [k1, k2, k3, k4];
        let back = cumulants_from_moments(&moments_from_cumulants(&kappas));
        for (a, b) in kappas.iter().zip(&back) {
            prop_assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn bond_is_bounded_and_decreasing(rho in 0.0..0.9f64, t1 in 0.0..10.0f64, dt in 0.01..10.0f64) {
        let m = model(rho, 0.04);
        let curve = DiscountCurve::flat(0.01).unwrap();
        let v = m.wishart().v0().as_matrix().clone();
        let a = survival_bond(&m, &curve, 0.0, t1, &v).unwrap();
        let b = survival_bond(&m, &curve, 0.0, t1 + dt, &v).unwrap();
        prop_assert!(b > 0.0 && b < a && a <= 1.0);
    }

    #[test]
    fn spectral_components_rebuild_the_payoff(rho in 0.0..0.9f64, g in 0.15..0.3f64) {
        let m = model(rho, 0.04);
        let curve = DiscountCurve::flat(0.0).unwrap();
        let contract = GaoContract::new(AnnuitySchedule::yearly(2.0, 5).unwrap(), g, -0.025).unwrap();
        let (payoff, cm) = gao_setup(&m, &curve, 0.0, &contract, &v0(&m)).unwrap();
        let s = spectral_surrogate(&cm, &payoff);
        let kappa1 = cumulants(&cm, &payoff, 1).kappa(1);
        prop_assert!((s.mean() - kappa1).abs() < 1e-10 * (1.0 + kappa1.abs()));
        let mean_state = m.wishart().conditional_mean(2.0, &v0(&m));
        let direct = payoff.b4 + trace_of_product(payoff.a4.as_matrix(), mean_state.as_matrix());
        prop_assert!((kappa1 - direct).abs() < 1e-12 * (1.0 + direct.abs()));
    }
}

proptest! {
    // Each case runs several adaptive Fourier integrals.
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn intensity_cdf_is_monotone(rho in 0.0..0.9f64, z in 0.005..0.2f64, dz in 0.0005..0.05f64) {
        let m = model(rho, 0.04);
        let d = m.intensity_distribution(0, 2.0, &v0(&m)).unwrap();
        let a = d.cdf(z, &cfg()).unwrap();
        let b = d.cdf(z + dz, &cfg()).unwrap();
        prop_assert!((-1e-9..=1.0 + 1e-9).contains(&a));
        prop_assert!(b >= a - 1e-9, "F({z}) = {a} > F({}) = {b}", z + dz);
    }

    #[test]
    fn put_call_parity_holds(rho in 0.0..0.9f64, g in 0.2..0.26f64, damping in -0.2..-0.01f64) {
        let m = model(rho, 0.04);
        let curve = DiscountCurve::flat(0.0).unwrap();
        let contract = GaoContract::new(AnnuitySchedule::yearly(2.0, 5).unwrap(), g, damping).unwrap();
        let (payoff, cm) = gao_setup(&m, &curve, 0.0, &contract, &v0(&m)).unwrap();
        let tr = PayoffTransform::new(&payoff, &cm).unwrap();
        let call = tr.call(damping, &cfg()).unwrap().value;
        let put = tr.put(damping, &cfg()).unwrap().value;
        let mean = cumulants(&cm, &payoff, 1).kappa(1);
        prop_assert!((call - put - mean).abs() < 1e-8, "{call} - {put} vs {mean}");
    }

    #[test]
    fn price_does_not_depend_on_damping(g in 0.2..0.26f64, d1 in -0.3..-0.005f64, d2 in -0.3..-0.005f64) {
        let m = model(0.5, 0.04);
        let curve = DiscountCurve::flat(0.0).unwrap();
        let contract = GaoContract::new(AnnuitySchedule::yearly(2.0, 5).unwrap(), g, d1).unwrap();
        let (payoff, cm) = gao_setup(&m, &curve, 0.0, &contract, &v0(&m)).unwrap();
        let tr = PayoffTransform::new(&payoff, &cm).unwrap();
        let a = tr.call(d1, &cfg()).unwrap().value;
        let b = tr.call(d2, &cfg()).unwrap().value;
        prop_assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }

    #[test]
    fn annuity_is_bounded_by_payment_count(rho in 0.0..0.9f64, payments in 1usize..8) {
        // With r = 0 every bond is worth at most one, so the annuity is at most the payment count.
        let m = model(rho, 0.04);
        let curve = DiscountCurve::flat(0.0).unwrap();
        let sched = AnnuitySchedule::yearly(2.0, payments).unwrap();
        let c = annuity_coeffs(&m, &curve, &sched);
        let v = m.wishart().conditional_mean(2.0, &v0(&m));
        let a = lrwm_core::pricing::annuity_value(&c, &m, v.as_matrix());
        prop_assert!(a > 0.0 && a <= payments as f64);
    }
}
