//! Dense-numeric stack for the trigger Q-network: a Siamese bidirectional
//! LSTM encoder over frozen word vectors, a shared fully-connected layer,
//! a two-way output head, exact gradients, an Adam optimizer and versioned
//! checkpoint I/O.
//!
//! The network maps a session state `(q1, q2)` to estimated action values
//! `[r_WAIT, r_SEARCH]`:
//!
//! ```text
//! u1 = bilstm(q1)        u2 = bilstm(q2)        (shared LSTM weights)
//! v1 = relu(W1 u1 + b1)  v2 = relu(W1 u2 + b1)  (shared projection)
//! out = W2 [v1 ++ v2] + b2
//! ```

pub mod adam;
pub mod lstm;
pub mod tensor;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embeddings::EmbeddingTable;
use lstm::{backward_seq, forward_seq, LstmGrads, LstmWeights, SeqForward};
use tensor::Mat;

pub use adam::{adam_step, AdamState};
pub use lstm::lstm_step;

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch in {what}: expected {expected}, found {found}")]
    ShapeMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid checkpoint: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error("{path}: unsupported checkpoint version {found} (expected {CHECKPOINT_VERSION})")]
    UnsupportedVersion { path: PathBuf, found: u32 },
}

/// Layer sizes: embedding dim `d`, LSTM hidden size `H`, projection size `P`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QNetDims {
    pub embed: usize,
    pub hidden: usize,
    pub proj: usize,
}

impl Default for QNetDims {
    fn default() -> Self {
        QNetDims {
            embed: 50,
            hidden: 64,
            proj: 32,
        }
    }
}

/// All learnable weights plus the frozen embedding table.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetworkParams {
    pub dims: QNetDims,
    /// Frozen word vectors; never updated by training.
    pub embedding: EmbeddingTable,
    pub lstm_fwd: LstmWeights,
    pub lstm_bwd: LstmWeights,
    /// P x 2H shared projection.
    pub w1: Mat,
    pub b1: Vec<f64>,
    /// 2 x 2P output head; row 0 = WAIT, row 1 = SEARCH.
    pub w2: Mat,
    pub b2: Vec<f64>,
}

/// Number of parameter tensors reported by [`QNetworkParams::tensor_slices`].
pub const N_TENSORS: usize = 10;

/// Names of the parameter tensors, in slice order.
pub const TENSOR_NAMES: [&str; N_TENSORS] = [
    "lstm_fwd.wx",
    "lstm_fwd.wh",
    "lstm_fwd.b",
    "lstm_bwd.wx",
    "lstm_bwd.wh",
    "lstm_bwd.b",
    "w1",
    "b1",
    "w2",
    "b2",
];

impl QNetworkParams {
    /// Seed-deterministic initialization: each weight matrix is uniform in
    /// (-1/sqrt(fan_in), +1/sqrt(fan_in)), biases are zero except the forget
    /// gates' +1. Draw order is fixed: fwd.wx, fwd.wh, bwd.wx, bwd.wh, w1, w2.
    pub fn init<R: Rng>(
        embedding: EmbeddingTable,
        hidden: usize,
        proj: usize,
        rng: &mut R,
    ) -> Self {
        let dims = QNetDims {
            embed: embedding.dim(),
            hidden,
            proj,
        };
        let mut fill = |m: &mut Mat| {
            let bound = 1.0 / (m.cols() as f64).sqrt();
            for v in m.as_mut_slice() {
                *v = rng.gen_range(-bound..bound);
            }
        };
        let mut lstm_fwd = LstmWeights::zeros(dims.embed, hidden);
        fill(&mut lstm_fwd.wx);
        fill(&mut lstm_fwd.wh);
        let mut lstm_bwd = LstmWeights::zeros(dims.embed, hidden);
        fill(&mut lstm_bwd.wx);
        fill(&mut lstm_bwd.wh);
        // forget-gate bias +1 keeps early memory open
        for b in [&mut lstm_fwd.b, &mut lstm_bwd.b] {
            for v in &mut b[hidden..2 * hidden] {
                *v = 1.0;
            }
        }
        let mut w1 = Mat::zeros(proj, 2 * hidden);
        fill(&mut w1);
        let mut w2 = Mat::zeros(2, 2 * proj);
        fill(&mut w2);
        QNetworkParams {
            dims,
            embedding,
            lstm_fwd,
            lstm_bwd,
            w1,
            b1: vec![0.0; proj],
            w2,
            b2: vec![0.0; 2],
        }
    }

    /// The trainable tensors in a fixed order (embedding excluded: frozen).
    pub fn tensor_slices(&self) -> [&[f64]; N_TENSORS] {
        [
            self.lstm_fwd.wx.as_slice(),
            self.lstm_fwd.wh.as_slice(),
            &self.lstm_fwd.b,
            self.lstm_bwd.wx.as_slice(),
            self.lstm_bwd.wh.as_slice(),
            &self.lstm_bwd.b,
            self.w1.as_slice(),
            &self.b1,
            self.w2.as_slice(),
            &self.b2,
        ]
    }

    pub fn tensor_slices_mut(&mut self) -> [&mut [f64]; N_TENSORS] {
        [
            self.lstm_fwd.wx.as_mut_slice(),
            self.lstm_fwd.wh.as_mut_slice(),
            &mut self.lstm_fwd.b,
            self.lstm_bwd.wx.as_mut_slice(),
            self.lstm_bwd.wh.as_mut_slice(),
            &mut self.lstm_bwd.b,
            self.w1.as_mut_slice(),
            &mut self.b1,
            self.w2.as_mut_slice(),
            &mut self.b2,
        ]
    }
}

/// Gradients shaped like the trainable part of [`QNetworkParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct QNetGrads {
    pub lstm_fwd: LstmGrads,
    pub lstm_bwd: LstmGrads,
    pub w1: Mat,
    pub b1: Vec<f64>,
    pub w2: Mat,
    pub b2: Vec<f64>,
}

impl QNetGrads {
    pub fn zeros_like(params: &QNetworkParams) -> Self {
        QNetGrads {
            lstm_fwd: LstmGrads::zeros_like(&params.lstm_fwd),
            lstm_bwd: LstmGrads::zeros_like(&params.lstm_bwd),
            w1: Mat::zeros(params.w1.rows(), params.w1.cols()),
            b1: vec![0.0; params.b1.len()],
            w2: Mat::zeros(params.w2.rows(), params.w2.cols()),
            b2: vec![0.0; params.b2.len()],
        }
    }

    pub fn tensor_slices(&self) -> [&[f64]; N_TENSORS] {
        [
            self.lstm_fwd.wx.as_slice(),
            self.lstm_fwd.wh.as_slice(),
            &self.lstm_fwd.b,
            self.lstm_bwd.wx.as_slice(),
            self.lstm_bwd.wh.as_slice(),
            &self.lstm_bwd.b,
            self.w1.as_slice(),
            &self.b1,
            self.w2.as_slice(),
            &self.b2,
        ]
    }
}

/// Look up token vectors; out-of-vocabulary tokens map to `zeros`.
fn lookup<'a, S: AsRef<str>>(
    table: &'a EmbeddingTable,
    tokens: &[S],
    zeros: &'a [f64],
) -> Vec<&'a [f64]> {
    tokens
        .iter()
        .map(|t| table.get(t.as_ref()).unwrap_or(zeros))
        .collect()
}

/// Bidirectional encoding: concatenation of the forward direction's final
/// hidden state and the backward direction's final hidden state. An empty
/// token list encodes to the zero vector.
pub fn bilstm_encode<S: AsRef<str>>(params: &QNetworkParams, tokens: &[S]) -> Vec<f64> {
    let hd = params.dims.hidden;
    let zeros = vec![0.0; params.dims.embed];
    let xs = lookup(&params.embedding, tokens, &zeros);
    let mut u = vec![0.0; 2 * hd];
    if !xs.is_empty() {
        let fwd = forward_seq(&params.lstm_fwd, &xs);
        let rev: Vec<&[f64]> = xs.iter().rev().copied().collect();
        let bwd = forward_seq(&params.lstm_bwd, &rev);
        u[..hd].copy_from_slice(fwd.final_h(hd));
        u[hd..].copy_from_slice(bwd.final_h(hd));
    }
    u
}

/// Full per-branch forward cache used by the backward pass.
struct BranchCache<'a> {
    xs: Vec<&'a [f64]>,
    fwd: Option<SeqForward>,
    bwd: Option<SeqForward>,
    u: Vec<f64>,
    z: Vec<f64>,
    v: Vec<f64>,
}

fn encode_branch<'a, S: AsRef<str>>(
    params: &'a QNetworkParams,
    tokens: &[S],
    zeros: &'a [f64],
) -> BranchCache<'a> {
    let hd = params.dims.hidden;
    let xs = lookup(&params.embedding, tokens, zeros);
    let mut u = vec![0.0; 2 * hd];
    let (fwd, bwd) = if xs.is_empty() {
        (None, None)
    } else {
        let fwd = forward_seq(&params.lstm_fwd, &xs);
        let rev: Vec<&[f64]> = xs.iter().rev().copied().collect();
        let bwd = forward_seq(&params.lstm_bwd, &rev);
        u[..hd].copy_from_slice(fwd.final_h(hd));
        u[hd..].copy_from_slice(bwd.final_h(hd));
        (Some(fwd), Some(bwd))
    };
    let mut z = params.b1.clone();
    params.w1.matvec_add(&u, &mut z);
    let v = z.iter().map(|&x| x.max(0.0)).collect();
    BranchCache { xs, fwd, bwd, u, z, v }
}

/// Estimated action values `[r_WAIT, r_SEARCH]` for a state. Pure function
/// of the parameters and token lists.
pub fn qnet_forward<S: AsRef<str>>(
    params: &QNetworkParams,
    q1_tokens: &[S],
    q2_tokens: &[S],
) -> [f64; 2] {
    let zeros = vec![0.0; params.dims.embed];
    let b1 = encode_branch(params, q1_tokens, &zeros);
    let b2 = encode_branch(params, q2_tokens, &zeros);
    head_forward(params, &b1.v, &b2.v)
}

fn head_forward(params: &QNetworkParams, v1: &[f64], v2: &[f64]) -> [f64; 2] {
    let p = params.dims.proj;
    let mut hvec = vec![0.0; 2 * p];
    hvec[..p].copy_from_slice(v1);
    hvec[p..].copy_from_slice(v2);
    let mut out = params.b2.clone();
    params.w2.matvec_add(&hvec, &mut out);
    [out[0], out[1]]
}

/// One training example: a state, the action taken (0 = WAIT, 1 = SEARCH)
/// and the regression target for that action's output.
#[derive(Debug, Clone, Copy)]
pub struct BatchItem<'a> {
    pub q1: &'a [String],
    pub q2: &'a [String],
    pub action: usize,
    pub target: f64,
}

/// Mean squared error of the taken-action outputs against their targets.
pub fn batch_loss(params: &QNetworkParams, batch: &[BatchItem]) -> f64 {
    let mut loss = 0.0;
    for item in batch {
        let out = qnet_forward(params, item.q1, item.q2);
        let e = out[item.action] - item.target;
        loss += e * e;
    }
    loss / batch.len() as f64
}

/// Exact gradients of [`batch_loss`] w.r.t. every trainable tensor, via
/// backpropagation through time. The untaken action's head row receives no
/// gradient from an example; both Siamese branches accumulate into the same
/// shared weights. Returns (gradients, loss).
pub fn qnet_backward(params: &QNetworkParams, batch: &[BatchItem]) -> (QNetGrads, f64) {
    assert!(!batch.is_empty(), "qnet_backward requires a non-empty batch");
    let hd = params.dims.hidden;
    let pj = params.dims.proj;
    let zeros = vec![0.0; params.dims.embed];
    let mut grads = QNetGrads::zeros_like(params);
    let mut loss = 0.0;
    let inv_n = 1.0 / batch.len() as f64;

    for item in batch {
        let c1 = encode_branch(params, item.q1, &zeros);
        let c2 = encode_branch(params, item.q2, &zeros);
        let out = head_forward(params, &c1.v, &c2.v);
        let e = out[item.action] - item.target;
        loss += e * e * inv_n;
        let dout = 2.0 * e * inv_n;

        // head: only the taken action's row sees gradient
        let mut hvec = vec![0.0; 2 * pj];
        hvec[..pj].copy_from_slice(&c1.v);
        hvec[pj..].copy_from_slice(&c2.v);
        let row = grads.w2.as_mut_slice();
        for (w, hv) in row[item.action * 2 * pj..(item.action + 1) * 2 * pj]
            .iter_mut()
            .zip(&hvec)
        {
            *w += dout * hv;
        }
        grads.b2[item.action] += dout;

        let w2_row = params.w2.row(item.action);
        for (branch, dv_slice) in [(&c1, &w2_row[..pj]), (&c2, &w2_row[pj..])] {
            // dz = dv . relu'(z)
            let dz: Vec<f64> = branch
                .z
                .iter()
                .zip(dv_slice)
                .map(|(&z, &w)| if z > 0.0 { dout * w } else { 0.0 })
                .collect();
            grads.w1.outer_add(&dz, &branch.u);
            for (g, d) in grads.b1.iter_mut().zip(&dz) {
                *g += d;
            }
            let mut du = vec![0.0; 2 * hd];
            params.w1.matvec_transpose_add(&dz, &mut du);
            if let (Some(fwd), Some(bwd)) = (&branch.fwd, &branch.bwd) {
                backward_seq(&params.lstm_fwd, &branch.xs, fwd, &du[..hd], &mut grads.lstm_fwd);
                let rev: Vec<&[f64]> = branch.xs.iter().rev().copied().collect();
                backward_seq(&params.lstm_bwd, &rev, bwd, &du[hd..], &mut grads.lstm_bwd);
            }
        }
    }
    (grads, loss)
}

// ---------------------------------------------------------------------------
// Checkpoint I/O: versioned JSON with explicit shape metadata; reals are
// written in shortest round-trip decimal form so reload is bit-exact.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct LstmJson {
    wx: Vec<f64>,
    wh: Vec<f64>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    dims: QNetDims,
    embedding: Vec<(String, Vec<f64>)>,
    lstm_fwd: LstmJson,
    lstm_bwd: LstmJson,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
}

fn lstm_to_json(w: &LstmWeights) -> LstmJson {
    LstmJson {
        wx: w.wx.as_slice().to_vec(),
        wh: w.wh.as_slice().to_vec(),
        b: w.b.clone(),
    }
}

fn lstm_from_json(
    j: LstmJson,
    input_dim: usize,
    hidden: usize,
    path: &Path,
    which: &str,
) -> Result<LstmWeights, NeuralError> {
    let wx = Mat::from_vec(4 * hidden, input_dim, j.wx).ok_or_else(|| NeuralError::Parse {
        path: path.to_path_buf(),
        msg: format!("{which}.wx has wrong element count"),
    })?;
    let wh = Mat::from_vec(4 * hidden, hidden, j.wh).ok_or_else(|| NeuralError::Parse {
        path: path.to_path_buf(),
        msg: format!("{which}.wh has wrong element count"),
    })?;
    if j.b.len() != 4 * hidden {
        return Err(NeuralError::Parse {
            path: path.to_path_buf(),
            msg: format!("{which}.b has wrong element count"),
        });
    }
    Ok(LstmWeights {
        input_dim,
        hidden_dim: hidden,
        wx,
        wh,
        b: j.b,
    })
}

pub fn save_checkpoint(params: &QNetworkParams, path: &Path) -> Result<(), NeuralError> {
    let file = File::create(path).map_err(|source| NeuralError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let cp = CheckpointFile {
        version: CHECKPOINT_VERSION,
        dims: params.dims,
        embedding: params
            .embedding
            .iter()
            .map(|(t, v)| (t.to_string(), v.to_vec()))
            .collect(),
        lstm_fwd: lstm_to_json(&params.lstm_fwd),
        lstm_bwd: lstm_to_json(&params.lstm_bwd),
        w1: params.w1.as_slice().to_vec(),
        b1: params.b1.clone(),
        w2: params.w2.as_slice().to_vec(),
        b2: params.b2.clone(),
    };
    serde_json::to_writer(BufWriter::new(file), &cp).map_err(|e| NeuralError::Parse {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

pub fn load_checkpoint(path: &Path) -> Result<QNetworkParams, NeuralError> {
    let file = File::open(path).map_err(|source| NeuralError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let cp: CheckpointFile =
        serde_json::from_reader(BufReader::new(file)).map_err(|e| NeuralError::Parse {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
    if cp.version != CHECKPOINT_VERSION {
        return Err(NeuralError::UnsupportedVersion {
            path: path.to_path_buf(),
            found: cp.version,
        });
    }
    let QNetDims { embed, hidden, proj } = cp.dims;
    for (token, v) in &cp.embedding {
        if v.len() != embed {
            return Err(NeuralError::Parse {
                path: path.to_path_buf(),
                msg: format!("embedding vector for {token:?} has wrong dimension"),
            });
        }
    }
    let embedding = EmbeddingTable::from_entries(embed, cp.embedding);
    let lstm_fwd = lstm_from_json(cp.lstm_fwd, embed, hidden, path, "lstm_fwd")?;
    let lstm_bwd = lstm_from_json(cp.lstm_bwd, embed, hidden, path, "lstm_bwd")?;
    let w1 = Mat::from_vec(proj, 2 * hidden, cp.w1).ok_or_else(|| NeuralError::Parse {
        path: path.to_path_buf(),
        msg: "w1 has wrong element count".to_string(),
    })?;
    let w2 = Mat::from_vec(2, 2 * proj, cp.w2).ok_or_else(|| NeuralError::Parse {
        path: path.to_path_buf(),
        msg: "w2 has wrong element count".to_string(),
    })?;
    if cp.b1.len() != proj {
        return Err(NeuralError::Parse {
            path: path.to_path_buf(),
            msg: "b1 has wrong element count".to_string(),
        });
    }
    if cp.b2.len() != 2 {
        return Err(NeuralError::Parse {
            path: path.to_path_buf(),
            msg: "b2 has wrong element count".to_string(),
        });
    }
    Ok(QNetworkParams {
        dims: cp.dims,
        embedding,
        lstm_fwd,
        lstm_bwd,
        w1,
        b1: cp.b1,
        w2,
        b2: cp.b2,
    })
}
