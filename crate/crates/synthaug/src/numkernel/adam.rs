use crate::error::{contract, Error, Result};

/// Bias-corrected Adam accumulator over a flat parameter block.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self::with_hyperparams(n, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyperparams(n: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            beta1,
            beta2,
            eps,
        }
    }
}

/// One Adam update: params ← params − lr · m̂ / (√v̂ + ε), with bias-corrected
/// moments. `block` names the parameter block in diagnostics.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
    block: &str,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(contract(format!(
            "adam_step shape mismatch in `{block}`: params {}, grads {}, state {}",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if lr <= 0.0 {
        return Err(contract(format!("adam_step lr must be positive, got {lr}")));
    }
    if !grads.iter().all(|g| g.is_finite()) {
        return Err(Error::NonFiniteGradient {
            block: block.to_string(),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for i in 0..params.len() {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = vec![1.0, -2.0, 0.5];
        let mut s = AdamState::new(3);
        adam_step(&mut p, &[0.0; 3], &mut s, 0.1, "test").unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_sign_rule() {
        // Bias corrections cancel at step 1: update ≈ −lr·sign(g) up to eps.
        let mut p = vec![0.0];
        let mut s = AdamState::new(1);
        adam_step(&mut p, &[2.0], &mut s, 0.1, "test").unwrap();
        assert!((p[0] + 0.1).abs() < 1e-7, "param {}", p[0]);
    }

    #[test]
    fn three_steps_match_hand_executed_recurrence() {
        // Independent execution of the Adam recurrence on a scalar.
        let (b1, b2, eps, lr) = (0.9, 0.999, 1e-8, 0.05);
        let grads = [1.5, -0.7, 0.2];
        let mut theta_ref = 0.3f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        for (k, &g) in grads.iter().enumerate() {
            let t = (k + 1) as i32;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            theta_ref -= lr * mh / (vh.sqrt() + eps);
        }

        let mut p = vec![0.3];
        let mut s = AdamState::with_hyperparams(1, b1, b2, eps);
        for &g in &grads {
            adam_step(&mut p, &[g], &mut s, lr, "scalar").unwrap();
        }
        assert!((p[0] - theta_ref).abs() < 1e-12);
        assert_eq!(s.step, 3);
    }

    #[test]
    fn non_finite_gradient_names_block() {
        let mut p = vec![0.0];
        let mut s = AdamState::new(1);
        let err = adam_step(&mut p, &[f64::NAN], &mut s, 0.1, "energy_net").unwrap_err();
        assert!(err.to_string().contains("energy_net"));
    }
}
