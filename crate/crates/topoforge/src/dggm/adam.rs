//! Bias-corrected adaptive-moment updates with global-norm gradient
//! clipping.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AdamError {
    #[error("gradient has {got} entries, parameters have {expected}")]
    ShapeMismatch { got: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment buffers congruent with the flat parameters,
/// plus the step counter driving bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

/// Scale `grads` so its global L2 norm is at most `max_norm`; returns the
/// pre-clip norm.
pub fn clip_gradient_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            *g *= scale;
        }
    }
    norm
}

/// One optimizer step: clip, update the biased moments, and apply the
/// bias-corrected update at learning rate `lr`.
pub fn adam_step(
    params: &mut [f64],
    grads: &mut [f64],
    state: &mut AdamState,
    lr: f64,
    grad_clip: f64,
    cfg: &AdamConfig,
) -> Result<(), AdamError> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(AdamError::ShapeMismatch {
            got: grads.len(),
            expected: params.len(),
        });
    }
    clip_gradient_norm(grads, grad_clip);
    state.t += 1;
    let bc1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(state.t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut params = vec![1.0, -2.0, 0.5];
        let mut state = AdamState::new(3);
        // seed the moments with one non-zero step, then feed zeros
        let mut g = vec![0.1, 0.1, 0.1];
        adam_step(&mut params, &mut g, &mut state, 0.01, 5.0, &AdamConfig::default()).unwrap();
        let snapshot = params.clone();
        let m_before = state.m.clone();
        for _ in 0..3 {
            let mut zeros = vec![0.0; 3];
            adam_step(
                &mut params,
                &mut zeros,
                &mut state,
                0.0,
                5.0,
                &AdamConfig::default(),
            )
            .unwrap();
        }
        assert_eq!(params, snapshot); // lr 0 isolates the moment decay
        assert!(state.m.iter().zip(&m_before).all(|(a, b)| a.abs() < b.abs()));
    }

    #[test]
    fn first_step_delta_is_learning_rate() {
        // one step from zero moments with grad 1.0: bias correction cancels
        let mut params = vec![0.0];
        let mut grads = vec![1.0];
        let mut state = AdamState::new(1);
        adam_step(
            &mut params,
            &mut grads,
            &mut state,
            0.003,
            5.0,
            &AdamConfig::default(),
        )
        .unwrap();
        assert!((params[0] + 0.003).abs() < 1e-9);
    }

    #[test]
    fn constant_gradient_step_magnitude_is_bounded_by_lr() {
        let mut params = vec![0.0];
        let mut state = AdamState::new(1);
        let cfg = AdamConfig::default();
        let mut prev = 0.0;
        for _ in 0..500 {
            let mut grads = vec![2.5];
            adam_step(&mut params, &mut grads, &mut state, 0.01, 50.0, &cfg).unwrap();
            let delta = (params[0] - prev).abs();
            assert!(delta <= 0.01 * 1.01);
            prev = params[0];
        }
        // with a constant gradient the step approaches -lr per iteration
        assert!(params[0] < -0.01 * 400.0);
    }

    #[test]
    fn clipping_rescales_to_max_norm() {
        let mut grads = vec![3.0, 4.0]; // norm 5
        let norm = clip_gradient_norm(&mut grads, 1.0);
        assert_eq!(norm, 5.0);
        assert!((grads[0] - 0.6).abs() < 1e-12);
        assert!((grads[1] - 0.8).abs() < 1e-12);
        let mut small = vec![0.3, 0.4];
        clip_gradient_norm(&mut small, 1.0);
        assert_eq!(small, vec![0.3, 0.4]);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut params = vec![0.0; 3];
        let mut grads = vec![0.0; 2];
        let mut state = AdamState::new(3);
        assert!(adam_step(
            &mut params,
            &mut grads,
            &mut state,
            0.01,
            5.0,
            &AdamConfig::default()
        )
        .is_err());
    }
}
