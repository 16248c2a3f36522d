//! Central finite-difference checks (f64, h = 1e-5) for every primitive's
//! reverse-mode gradient and for the full micro network. The shared check
//! bodies live in `common::nn_checks`; the acceptance suite re-runs them
//! under its timing budget.

mod common;

use common::nn_checks;

#[test]
fn conv2d_gradients() {
    nn_checks::conv2d_gradients();
}

#[test]
fn relu_gradients() {
    nn_checks::relu_gradients();
}

#[test]
fn maxpool_gradients() {
    nn_checks::maxpool_gradients();
}

#[test]
fn avgpool_gradients() {
    nn_checks::avgpool_gradients();
}

#[test]
fn linear_gradients() {
    nn_checks::linear_gradients();
}

#[test]
fn batchnorm_gradients() {
    nn_checks::batchnorm_gradients();
}

#[test]
fn full_micro_model_gradients() {
    nn_checks::full_micro_model_gradients();
}

#[test]
fn full_micro_model_gradients_with_batchnorm() {
    nn_checks::full_micro_model_gradients_with_batchnorm();
}
