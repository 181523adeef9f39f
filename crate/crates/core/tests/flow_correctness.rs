#![allow(clippy::needless_range_loop)]
mod common;

use common::*;
use condflow::flow::Mixing;
use condflow::training::ObjectiveSpec;

#[test]
fn inverse_recovers_inputs() {
    for dim in [2, 3, 6] {
        let xs = random_points(dim, 20, 1.5, 1);
        for (name, model) in model_zoo(dim) {
            let e = max_roundtrip_error(&model, &xs);
            assert!(e < 1e-8, "{name} dim {dim}: round trip error {e:e}");
        }
    }
}

#[test]
fn logdet_matches_numerical_jacobian() {
    for dim in [2, 4, 6] {
        let xs = random_points(dim, 5, 1.0, 2);
        for (name, model) in model_zoo(dim) {
            let e = max_logdet_error(&model, &xs);
            assert!(e < 1e-5, "{name} dim {dim}: logdet error {e:e}");
        }
    }
}

#[test]
fn parameter_gradients_match_finite_differences() {
    let batch = random_batch(4, 2, 6, 3);
    for (name, model) in model_zoo(4) {
        for objective in [ObjectiveSpec::joint_nll(), ObjectiveSpec::reweighted()] {
            let (e, at) = max_param_grad_error(&model, &batch, &objective);
            assert!(e < 1e-4, "{name} {:?}: relative error {e:e} at {at}", objective.kind);
        }
    }
}

#[test]
fn input_gradients_match_finite_differences() {
    let xs = random_points(3, 4, 1.0, 4);
    for (name, model) in model_zoo(3) {
        for y in 0..2 {
            let e = max_input_grad_error(&model, &xs, y);
            assert!(e < 1e-4, "{name} class {y}: relative error {e:e}");
        }
    }
}

#[test]
fn class_densities_normalize_in_two_dimensions() {
    for (k, mixing) in [Mixing::Lu, Mixing::Permutation, Mixing::None].into_iter().enumerate() {
        let model = quadrature_model(mixing, 7 + k as u64);
        for y in 0..2 {
            let mass = quadrature_mass_2d(&model, y, 40.0, 800);
            assert!((mass - 1.0).abs() < 0.02, "{mixing:?} class {y}: mass {mass}");
        }
    }
}
