//! Adam optimizer with bias-corrected moment estimates.

use super::{QNetGrads, QNetworkParams, N_TENSORS};

/// Optimizer state: one pair of moment accumulators per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(alpha: f64, params: &QNetworkParams) -> Self {
        let shapes: Vec<usize> = params.tensor_slices().iter().map(|s| s.len()).collect();
        AdamState {
            alpha,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            t: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }
}

/// One bias-corrected update of every trainable tensor in place.
pub fn adam_step(params: &mut QNetworkParams, grads: &QNetGrads, opt: &mut AdamState) {
    opt.t += 1;
    let bc1 = 1.0 - opt.beta1.powi(opt.t as i32);
    let bc2 = 1.0 - opt.beta2.powi(opt.t as i32);
    let gslices = grads.tensor_slices();
    let mut pslices = params.tensor_slices_mut();
    for ti in 0..N_TENSORS {
        let g = gslices[ti];
        let m = &mut opt.m[ti];
        let v = &mut opt.v[ti];
        let p = &mut pslices[ti];
        debug_assert_eq!(g.len(), p.len());
        for i in 0..g.len() {
            m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g[i];
            v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= opt.alpha * m_hat / (v_hat.sqrt() + opt.epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::EmbeddingTable;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn params(seed: u64) -> QNetworkParams {
        let table = EmbeddingTable::from_entries(2, [("a".to_string(), vec![0.5, -0.5])]);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        QNetworkParams::init(table, 3, 2, &mut rng)
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = params(1);
        let before = p.clone();
        let grads = QNetGrads::zeros_like(&p);
        let mut opt = AdamState::new(0.01, &p);
        adam_step(&mut p, &grads, &mut opt);
        assert_eq!(p, before);
        assert_eq!(opt.t, 1);
    }

    #[test]
    fn first_step_moves_by_alpha_sign() {
        // with every gradient entry equal to g, the bias-corrected first step
        // is -alpha * g / (|g| + eps) ~ -alpha * sign(g)
        let mut p = params(2);
        let before = p.clone();
        let mut grads = QNetGrads::zeros_like(&p);
        grads.b1.iter_mut().for_each(|g| *g = 0.3);
        let mut opt = AdamState::new(0.01, &p);
        adam_step(&mut p, &grads, &mut opt);
        for (after, orig) in p.b1.iter().zip(&before.b1) {
            let delta = after - orig;
            assert!((delta + 0.01).abs() < 1e-9, "delta={delta}");
        }
        // untouched tensors with zero gradient stay identical
        assert_eq!(p.w2, before.w2);
    }

    #[test]
    fn updates_are_deterministic() {
        let run = || {
            let mut p = params(3);
            let mut grads = QNetGrads::zeros_like(&p);
            for (i, g) in grads.w1.as_mut_slice().iter_mut().enumerate() {
                *g = ((i as f64) * 0.13).sin();
            }
            let mut opt = AdamState::new(0.01, &p);
            for _ in 0..5 {
                adam_step(&mut p, &grads, &mut opt);
            }
            p
        };
        assert_eq!(run(), run());
    }
}
