//! First-order Adam optimizer over flat parameter slices.

#[derive(Clone, Copy, Debug, PartialEq)]
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

/// Moment buffers for one parameter group.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// Keeps only the entries whose index is in `keep` (sorted ascending).
    pub fn retain(&mut self, keep: &[usize], stride: usize) {
        let pick = |x: &[f64]| {
            keep.iter()
                .flat_map(|&i| x[i * stride..(i + 1) * stride].iter().copied())
                .collect()
        };
        self.m = pick(&self.m);
        self.v = pick(&self.v);
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64, cfg: &AdamConfig) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_params() {
        let mut p = vec![1.0, -2.0, 3.0];
        let mut st = AdamState::new(3);
        st.m = vec![0.5, 0.5, 0.5];
        st.v = vec![0.1, 0.1, 0.1];
        let cfg = AdamConfig::default();
        let before = p.clone();
        adam_step(&mut p, &[0.0; 3], &mut st, 0.0, &cfg);
        assert_eq!(p, before);
        assert!((st.m[0] - 0.45).abs() < 1e-15);
        assert!((st.v[0] - 0.0999).abs() < 1e-15);
    }

    #[test]
    fn constant_gradient_step_tends_to_lr_sign() {
        let cfg = AdamConfig::default();
        let lr = 1e-2;
        for g in [3.0, -0.02] {
            let mut p = vec![0.0];
            let mut st = AdamState::new(1);
            let mut last = 0.0;
            for _ in 0..5000 {
                let before = p[0];
                adam_step(&mut p, &[g], &mut st, lr, &cfg);
                last = p[0] - before;
            }
            let expect = -lr * f64::signum(g);
            assert!((last - expect).abs() < 1e-6 * lr.max(1.0), "{last} vs {expect}");
        }
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut p = vec![0.3, -0.1];
            let mut st = AdamState::new(2);
            for k in 0..50 {
                let g = [p[0] * 2.0 + k as f64 * 0.01, (p[1] - 1.0).sin()];
                adam_step(&mut p, &g, &mut st, 1e-2, &AdamConfig::default());
            }
            (p, st)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn retain_keeps_selected_rows() {
        let mut st = AdamState::new(6);
        st.m = vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        st.v = st.m.clone();
        st.retain(&[0, 2], 2);
        assert_eq!(st.m, vec![0.0, 1.0, 4.0, 5.0]);
    }
}
