//! Adam with bias correction; moments kept in f64 regardless of the
//! model precision.

use super::model::Model;
use super::tensor::Elem;
use crate::error::{Error, Result};

pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new() -> Self {
        AdamState {
            m: Vec::new(),
            v: Vec::new(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

impl Default for AdamState {
    fn default() -> Self {
        Self::new()
    }
}

/// Per-step constants shared by every parameter array.
struct StepScale {
    lr: f64,
    b1: f64,
    b2: f64,
    eps: f64,
    corr1: f64,
    corr2: f64,
}

impl StepScale {
    fn at(lr: f64, betas: (f64, f64), eps: f64, step: u64) -> Self {
        StepScale {
            lr,
            b1: betas.0,
            b2: betas.1,
            eps,
            corr1: 1.0 - betas.0.powi(step as i32),
            corr2: 1.0 - betas.1.powi(step as i32),
        }
    }
}

fn adam_step<E: Elem>(params: &mut [E], grads: &[E], m: &mut [f64], v: &mut [f64], h: &StepScale) {
    for i in 0..params.len() {
        let g = grads[i].to_f64();
        m[i] = h.b1 * m[i] + (1.0 - h.b1) * g;
        v[i] = h.b2 * v[i] + (1.0 - h.b2) * g * g;
        let m_hat = m[i] / h.corr1;
        let v_hat = v[i] / h.corr2;
        let p = params[i].to_f64() - h.lr * m_hat / (v_hat.sqrt() + h.eps);
        params[i] = E::from_f64(p);
    }
}

/// One optimizer step over every trainable parameter array, in the
/// model's fixed visit order. Moment buffers are allocated on first
/// use and shape-checked afterwards.
pub fn adam_update<E: Elem>(
    model: &mut Model<E>,
    state: &mut AdamState,
    lr: f64,
    betas: (f64, f64),
    eps: f64,
) -> Result<()> {
    state.step += 1;
    let scale = StepScale::at(lr, betas, eps, state.step);
    let (m_store, v_store) = (&mut state.m, &mut state.v);
    let mut index = 0usize;
    let mut failure: Option<Error> = None;
    model.visit_params(|_name, params, grads| {
        if failure.is_some() {
            return;
        }
        if m_store.len() == index {
            m_store.push(vec![0.0; params.len()]);
            v_store.push(vec![0.0; params.len()]);
        }
        if m_store[index].len() != params.len() {
            failure = Some(Error::ShapeMismatch {
                expected: format!("{} optimizer moments", m_store[index].len()),
                got: format!("{} parameters", params.len()),
            });
            return;
        }
        adam_step(
            params,
            grads,
            &mut m_store[index],
            &mut v_store[index],
            &scale,
        );
        index += 1;
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_is_a_signed_unit_move() {
        let mut p = [1.0f64, -2.0];
        let g = [0.5f64, -0.25];
        let mut m = [0.0; 2];
        let mut v = [0.0; 2];
        adam_step(&mut p, &g, &mut m, &mut v, &StepScale::at(0.1, (0.9, 0.999), 1e-8, 1));
        // With zero moments the bias-corrected update is lr * sign(g).
        assert!((p[0] - 0.9).abs() < 1e-6);
        assert!((p[1] - (-1.9)).abs() < 1e-6);
    }

    #[test]
    fn second_step_tracks_moment_estimates() {
        let mut p = [0.0f64];
        let g = [1.0f64];
        let mut m = [0.0];
        let mut v = [0.0];
        let betas = (0.9, 0.999);
        adam_step(&mut p, &g, &mut m, &mut v, &StepScale::at(0.01, betas, 1e-8, 1));
        adam_step(&mut p, &g, &mut m, &mut v, &StepScale::at(0.01, betas, 1e-8, 2));
        // Constant gradient keeps m_hat = g and v_hat = g^2 exactly.
        assert!((m[0] - (0.9 * 0.1 + 0.1)).abs() < 1e-12);
        assert!((p[0] + 0.02).abs() < 1e-6);
    }

    #[test]
    fn descends_a_quadratic() {
        let mut p = [5.0f64];
        let mut m = [0.0];
        let mut v = [0.0];
        for step in 1..=2000 {
            let g = [2.0 * p[0]];
            adam_step(&mut p, &g, &mut m, &mut v, &StepScale::at(0.01, (0.9, 0.999), 1e-8, step));
        }
        assert!(p[0].abs() < 0.05, "did not converge: {}", p[0]);
    }
}
