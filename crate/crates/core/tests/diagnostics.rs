use proptest::prelude::*;
use steepest_core::diagnostics::{kkt_residuals, KktOptions};
use steepest_core::norms::norm_value;
use steepest_core::{Dataset, LossSpec, Model, ModelSpec, NormSpec, Params};

fn separable() -> Dataset<f64> {
    Dataset::from_rows(
        &[vec![2.0, 0.5], vec![1.0, 1.5], vec![-1.5, -0.2], vec![-0.4, -2.0]],
        vec![1.0, 1.0, -1.0, -1.0],
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// The gap equals `||θ̃||²(1 − α)`, so it is below `(1 − α)/γ̃(t0)^{2/L}`
    /// exactly when the margin at θ is at least `γ̃(t0)`.
    #[test]
    fn gap_is_norm_square_times_misalignment(a in 0.2f64..3.0, b in 0.2f64..3.0, sm0 in 0.01f64..2.0) {
        let model = Model::new(ModelSpec::Linear { input_dim: 2 }).unwrap();
        let theta = Params::from_vector(vec![a, b]);
        for norm in [NormSpec::L1, NormSpec::L2, NormSpec::Linf] {
            let k = kkt_residuals(&model, &theta, &separable(), LossSpec::Exponential, &norm, Some(sm0), &KktOptions::default()).unwrap();
            let nt = norm_value(&norm, &k.theta_tilde).unwrap();
            let expected = nt * nt * (1.0 - k.alignment);
            prop_assert!((k.bregman_gap - expected).abs() <= 1e-10 * (1.0 + expected.abs()), "{norm}");
            let bound = k.bregman_bound.unwrap();
            let gamma = 1.0 / nt;
            if (gamma - sm0).abs() > 1e-9 {
                prop_assert_eq!(k.bregman_gap <= bound, gamma >= sm0 || k.alignment >= 1.0 - 1e-12, "{}", norm);
            }
        }
    }
}
