//! LSTM cell with exact backpropagation through time.
//!
//! Gate layout: the 4H-row weight blocks stack the input (i), forget (f),
//! cell (g) and output (o) gates in that order. Standard formulation:
//!
//! ```text
//! i,f,o = sigmoid(Wx.x + Wh.h + b)    g = tanh(...)
//! c' = f.c + i.g                      h' = o.tanh(c')
//! ```

use super::tensor::Mat;
use super::NeuralError;

/// Weights of one LSTM direction.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmWeights {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// 4H x d input weights.
    pub wx: Mat,
    /// 4H x H recurrent weights.
    pub wh: Mat,
    /// 4H bias.
    pub b: Vec<f64>,
}

impl LstmWeights {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        LstmWeights {
            input_dim,
            hidden_dim,
            wx: Mat::zeros(4 * hidden_dim, input_dim),
            wh: Mat::zeros(4 * hidden_dim, hidden_dim),
            b: vec![0.0; 4 * hidden_dim],
        }
    }
}

/// Gradient accumulators shaped like [`LstmWeights`].
#[derive(Debug, Clone, PartialEq)]
pub struct LstmGrads {
    pub wx: Mat,
    pub wh: Mat,
    pub b: Vec<f64>,
}

impl LstmGrads {
    pub fn zeros_like(w: &LstmWeights) -> Self {
        LstmGrads {
            wx: Mat::zeros(4 * w.hidden_dim, w.input_dim),
            wh: Mat::zeros(4 * w.hidden_dim, w.hidden_dim),
            b: vec![0.0; 4 * w.hidden_dim],
        }
    }
}

/// One checked LSTM step: `(h', c') = step(x, h, c)`.
pub fn lstm_step(
    weights: &LstmWeights,
    x: &[f64],
    h: &[f64],
    c: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), NeuralError> {
    let hd = weights.hidden_dim;
    if x.len() != weights.input_dim {
        return Err(NeuralError::ShapeMismatch {
            what: "lstm input".to_string(),
            expected: weights.input_dim,
            found: x.len(),
        });
    }
    if h.len() != hd || c.len() != hd {
        return Err(NeuralError::ShapeMismatch {
            what: "lstm state".to_string(),
            expected: hd,
            found: if h.len() != hd { h.len() } else { c.len() },
        });
    }
    let mut gates = vec![0.0; 4 * hd];
    let mut h_new = vec![0.0; hd];
    let mut c_new = vec![0.0; hd];
    let mut tanh_c = vec![0.0; hd];
    step_into(weights, x, h, c, &mut gates, &mut c_new, &mut tanh_c, &mut h_new);
    Ok((h_new, c_new))
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Unchecked single step writing post-activation gates and new state into
/// caller buffers.
#[allow(clippy::too_many_arguments)]
fn step_into(
    w: &LstmWeights,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    gates: &mut [f64],
    c_new: &mut [f64],
    tanh_c: &mut [f64],
    h_new: &mut [f64],
) {
    let hd = w.hidden_dim;
    w.wx.matvec(x, gates);
    w.wh.matvec_add(h_prev, gates);
    for (g, bi) in gates.iter_mut().zip(&w.b) {
        *g += bi;
    }
    let (ii, rest) = gates.split_at_mut(hd);
    let (ff, rest) = rest.split_at_mut(hd);
    let (gg, oo) = rest.split_at_mut(hd);
    for v in ii.iter_mut() {
        *v = sigmoid(*v);
    }
    for v in ff.iter_mut() {
        *v = sigmoid(*v);
    }
    for v in gg.iter_mut() {
        *v = v.tanh();
    }
    for v in oo.iter_mut() {
        *v = sigmoid(*v);
    }
    for j in 0..hd {
        c_new[j] = ff[j] * c_prev[j] + ii[j] * gg[j];
        tanh_c[j] = c_new[j].tanh();
        h_new[j] = oo[j] * tanh_c[j];
    }
}

/// Forward pass over a whole sequence with everything the backward pass
/// needs. `h`/`c` hold n+1 states of length H each (index 0 = initial zero
/// state); `gates` holds n post-activation gate blocks of length 4H;
/// `tanh_c` holds n blocks of length H.
#[derive(Debug, Clone)]
pub struct SeqForward {
    pub n: usize,
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    pub gates: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

impl SeqForward {
    /// Final hidden state (zeros for an empty sequence).
    pub fn final_h(&self, hidden: usize) -> &[f64] {
        &self.h[self.n * hidden..(self.n + 1) * hidden]
    }
}

/// Run the direction over `xs` in the given order.
pub fn forward_seq(w: &LstmWeights, xs: &[&[f64]]) -> SeqForward {
    let hd = w.hidden_dim;
    let n = xs.len();
    let mut h = vec![0.0; (n + 1) * hd];
    let mut c = vec![0.0; (n + 1) * hd];
    let mut gates = vec![0.0; n * 4 * hd];
    let mut tanh_c = vec![0.0; n * hd];
    for (t, x) in xs.iter().enumerate() {
        let (h_done, h_rest) = h.split_at_mut((t + 1) * hd);
        let (c_done, c_rest) = c.split_at_mut((t + 1) * hd);
        step_into(
            w,
            x,
            &h_done[t * hd..],
            &c_done[t * hd..],
            &mut gates[t * 4 * hd..(t + 1) * 4 * hd],
            &mut c_rest[..hd],
            &mut tanh_c[t * hd..(t + 1) * hd],
            &mut h_rest[..hd],
        );
    }
    SeqForward { n, h, c, gates, tanh_c }
}

/// Backpropagate through time. `d_h_final` is the loss gradient w.r.t. the
/// final hidden state; parameter gradients accumulate into `grads`.
/// Gradients w.r.t. the inputs are not produced (token embeddings are
/// frozen).
pub fn backward_seq(
    w: &LstmWeights,
    xs: &[&[f64]],
    fwd: &SeqForward,
    d_h_final: &[f64],
    grads: &mut LstmGrads,
) {
    let hd = w.hidden_dim;
    let n = fwd.n;
    debug_assert_eq!(xs.len(), n);
    debug_assert_eq!(d_h_final.len(), hd);

    let mut dh = d_h_final.to_vec();
    let mut dc = vec![0.0; hd];
    let mut da = vec![0.0; 4 * hd];

    for t in (0..n).rev() {
        let gates = &fwd.gates[t * 4 * hd..(t + 1) * 4 * hd];
        let (ii, rest) = gates.split_at(hd);
        let (ff, rest) = rest.split_at(hd);
        let (gg, oo) = rest.split_at(hd);
        let tanh_c = &fwd.tanh_c[t * hd..(t + 1) * hd];
        let h_prev = &fwd.h[t * hd..(t + 1) * hd];
        let c_prev = &fwd.c[t * hd..(t + 1) * hd];

        // dc accumulates the carry from step t+1 plus the path through h'.
        for j in 0..hd {
            let d_o = dh[j] * tanh_c[j];
            dc[j] += dh[j] * oo[j] * (1.0 - tanh_c[j] * tanh_c[j]);
            let d_i = dc[j] * gg[j];
            let d_f = dc[j] * c_prev[j];
            let d_g = dc[j] * ii[j];
            da[j] = d_i * ii[j] * (1.0 - ii[j]);
            da[hd + j] = d_f * ff[j] * (1.0 - ff[j]);
            da[2 * hd + j] = d_g * (1.0 - gg[j] * gg[j]);
            da[3 * hd + j] = d_o * oo[j] * (1.0 - oo[j]);
        }
        grads.wx.outer_add(&da, xs[t]);
        grads.wh.outer_add(&da, h_prev);
        for (gb, dai) in grads.b.iter_mut().zip(&da) {
            *gb += dai;
        }
        dh.iter_mut().for_each(|v| *v = 0.0);
        w.wh.matvec_transpose_add(&da, &mut dh);
        for j in 0..hd {
            dc[j] *= ff[j];
        }
    }
}
