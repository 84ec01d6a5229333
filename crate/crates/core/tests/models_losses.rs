use proptest::prelude::*;
use steepest_core::losses::{loss_subgradient, log_loss};
use steepest_core::models::init_params;
use steepest_core::{Dataset, InitScheme, InitSpec, LossSpec, Matrix, Model, ModelSpec, Params};

fn relu(width: usize, frozen: bool) -> ModelSpec {
    ModelSpec::TwoLayerRelu {
        input_dim: 3,
        width,
        freeze_second_layer: frozen,
    }
}

fn model_and_theta(spec: ModelSpec, seed: u64) -> (Model<f64>, Params<f64>) {
    init_params(
        &spec,
        &InitSpec {
            scale: 3.0,
            scheme: InitScheme::PaperUniform,
            seed,
        },
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn scaling_and_euler(seed in 0u64..10_000, x in prop::collection::vec(-2.0f64..2.0, 3), c in 0.1f64..5.0, frozen in any::<bool>()) {
        let (model, theta) = model_and_theta(relu(5, frozen), seed);
        let l = model.degree() as i32;
        let f = model.forward(&theta, &x).unwrap();
        let fc = model.forward(&theta.scaled(c), &x).unwrap();
        prop_assert!((fc - c.powi(l) * f).abs() <= 1e-9 * (1.0 + fc.abs()));
        let r = model.euler_residual(&theta, &x).unwrap();
        prop_assert!(r <= 1e-9 * (1.0 + f.abs()));
    }

    #[test]
    fn phi_inverse_round_trip(u in -1.0f64..700.0) {
        for loss in [LossSpec::Exponential, LossSpec::Logistic] {
            let v = loss.phi(u);
            let back = loss.phi_inverse(v).unwrap();
            prop_assert!((back - u).abs() <= 1e-9 * (1.0 + u.abs()), "{loss}: {u} -> {v} -> {back}");
        }
    }
}

fn data() -> Dataset<f64> {
    Dataset::from_rows(
        &[
            vec![1.0, 0.5, -0.2],
            vec![-0.3, 1.2, 0.7],
            vec![0.8, -1.0, 0.4],
            vec![-1.1, -0.4, 0.9],
        ],
        vec![1.0, -1.0, 1.0, -1.0],
    )
    .unwrap()
}

/// Central differences of `L(θ)` against the analytic gradient, away from kinks.
#[test]
fn loss_gradient_matches_finite_differences() {
    let ds = data();
    for spec in [relu(4, false), relu(4, true), ModelSpec::Linear { input_dim: 3 }] {
        for loss in [LossSpec::Exponential, LossSpec::Logistic] {
            let (model, theta) = model_and_theta(spec, 7);
            let g = loss_subgradient(loss, &model, &theta, &ds).unwrap().gradient();
            let value = |p: &Params<f64>| log_loss(loss, &model.output_margins(p, &ds).unwrap()).exp();
            let shapes = theta.shapes();
            let flat = theta.to_flat();
            let h = 1e-6;
            for (i, gi) in g.to_flat().into_iter().enumerate() {
                let mut plus = flat.clone();
                plus[i] += h;
                let mut minus = flat.clone();
                minus[i] -= h;
                let fd = (value(&Params::from_flat(&shapes, &plus).unwrap())
                    - value(&Params::from_flat(&shapes, &minus).unwrap()))
                    / (2.0 * h);
                assert!((fd - gi).abs() <= 1e-6 * (1.0 + gi.abs()), "{loss} coord {i}: {fd} vs {gi}");
            }
        }
    }
}

#[test]
fn single_precision_path() {
    let (model, theta) = init_params::<f32>(
        &relu(4, false),
        &InitSpec {
            scale: 1.0,
            scheme: InitScheme::PaperUniform,
            seed: 3,
        },
    )
    .unwrap();
    let ds = Dataset::<f32>::new(
        Matrix::from_rows(&[vec![1.0f32, 0.5, -0.2], vec![-0.3, 1.2, 0.7]]),
        vec![1.0, -1.0],
        "",
    )
    .unwrap();
    let g = loss_subgradient(LossSpec::Exponential, &model, &theta, &ds).unwrap();
    assert!(g.gradient().is_finite());
    let x = [1.0f32, -0.5, 0.25];
    let r = model.euler_residual(&theta, &x).unwrap();
    assert!(r <= 1e-5);
    let d = steepest_core::norms::steepest_direction(&steepest_core::NormSpec::Linf, &g.gradient()).unwrap();
    let dual = steepest_core::norms::dual_norm_value(&steepest_core::NormSpec::Linf, &g.gradient()).unwrap();
    let pairing = d.dot(&g.gradient()).unwrap();
    assert!((pairing + dual * dual).abs() <= 1e-5 * (dual * dual).max(1.0));
}
