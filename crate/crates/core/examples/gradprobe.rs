//! Scratch probe: finite-difference sweep on one parameter.

use ndarray::Array3;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use velotrace_core::frontend::{SEGMENT_FRAMES, SPEC_FRAMES};
use velotrace_core::tcn::{build_model, masked_mse, Model, ModelConfig};

fn main() {
    let cfg = ModelConfig {
        in_channels: 8,
        pre_filters: 8,
        dilated_filters: 8,
        seed: 33,
        ..ModelConfig::with_targets(2)
    };
    let mut model = build_model::<f64>(&cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    let x = Array3::from_shape_fn((2, 8, SPEC_FRAMES), |_| rng.gen_range(0.0..1.2));
    let y = Array3::from_shape_fn((2, 2, SEGMENT_FRAMES), |_| rng.gen_range(-1.0..1.0));
    let valid = vec![SEGMENT_FRAMES, 137];

    model.zero_grad();
    let pred = model.forward_train(&x).unwrap();
    let (_, dpred) = masked_mse(&pred, &y, &valid).unwrap();
    model.backward(&dpred).unwrap();
    let mut analytic = None;
    model.visit_params(|n, _, g| {
        if n == "c1.weight" {
            analytic = Some(g[5].to_owned());
        }
    });
    let analytic = analytic.unwrap();
    println!("analytic = {analytic:.12e}");

    let nudge = |model: &mut Model<f64>, delta: f64| {
        model.visit_params(|n, p, _| {
            if n == "c1.weight" {
                p[5] += delta;
            }
        });
    };
    let loss_of = |model: &mut Model<f64>| -> f64 {
        let pred = model.forward_train(&x).unwrap();
        masked_mse(&pred, &y, &valid).unwrap().0
    };
    for eps in [1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8] {
        nudge(&mut model, eps);
        let up = loss_of(&mut model);
        nudge(&mut model, -2.0 * eps);
        let down = loss_of(&mut model);
        nudge(&mut model, eps);
        let numeric = (up - down) / (2.0 * eps);
        println!(
            "eps {eps:.0e}: numeric = {numeric:.12e}  rel = {:.3e}",
            (numeric - analytic).abs() / analytic.abs()
        );
    }
}
