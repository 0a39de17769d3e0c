use proptest::prelude::*;
use wannuity::compute::Grid;
use wannuity::config::{reference, ModelConfig, SweepParam};

proptest! {
    #[test]
    fn grid_text_round_trips(lo in -10.0..10.0f64, width in 0.001..10.0f64, steps in 1usize..500) {
        let g = Grid::new(lo, lo + width, steps).unwrap();
        let back: Grid = g.to_string().parse().unwrap();
        prop_assert_eq!(back, g);
        let pts = g.points();
        prop_assert_eq!(pts.len(), steps);
        prop_assert_eq!(pts[0], lo);
        prop_assert!(pts.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn canonical_form_is_stable(alpha in 0.01..0.1f64, g in 0.1..0.4f64, seed in any::<u64>()) {
        let mut cfg = reference();
        cfg.alpha = alpha;
        cfg.g = g;
        cfg.mc.seed = seed;
        let text = cfg.canonical();
        let back = ModelConfig::from_json(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.canonical(), text);
    }

    #[test]
    fn volatility_sweeps_keep_the_correlation(rho in 0.0..0.95f64, s11 in 0.02..0.1f64) {
        let cfg = reference().with_param(SweepParam::RhoSigma, rho).unwrap();
        let moved = cfg.with_param(SweepParam::Sigma11, s11).unwrap();
        prop_assert!((moved.rho_sigma().unwrap() - rho).abs() < 1e-12);
        prop_assert_eq!(moved.sigma[0][1], moved.sigma[1][0]);
        let s = &moved.sigma;
        prop_assert!(s[0][0] * s[1][1] - s[0][1] * s[1][0] >= 0.0);
    }
}
