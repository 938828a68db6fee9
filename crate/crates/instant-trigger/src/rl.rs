//! Reinforcement learning around the retriever: the token-by-token decision
//! environment, the reward function, epsilon-greedy exploration, experience
//! replay, a target network, the training loop and greedy inference.
//!
//! Determinism: a single seeded RNG stream drives everything, consumed in a
//! fixed order: network initialization first, then per pass-over-the-data
//! one query shuffle, then per step one exploration draw (plus one action
//! draw when exploring) followed by the replay-sampling draws.

use std::collections::{BTreeSet, VecDeque};
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::corpus::{Qrels, Query};
use crate::embeddings::EmbeddingTable;
use crate::metrics::MetricsError;
use crate::neural::{
    adam_step, qnet_backward, qnet_forward, AdamState, BatchItem, QNetworkParams,
};
use crate::policies::{apply_action, Action, Policy, SessionState};
use crate::retrieval::{RetrievalError, RetrieverHandle};

#[derive(Debug, Error)]
pub enum RlError {
    #[error("training requires a non-empty query set")]
    NoQueries,
    #[error("no relevance judgments for training query {qid:?}")]
    MissingQrels { qid: String },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// One stored transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: (Vec<String>, Vec<String>),
    pub action: Action,
    pub reward: f64,
    pub next_state: (Vec<String>, Vec<String>),
    pub terminal: bool,
}

/// Training hyper-parameters. Defaults: gamma 0.05, eps 1.0 decaying by
/// 0.995 per episode to a 0.7 floor, Adam alpha 0.01, batch 32, reward
/// threshold 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub gamma: f64,
    pub eps_start: f64,
    pub eps_decay: f64,
    pub eps_min: f64,
    pub alpha: f64,
    pub batch: usize,
    pub r_th: f64,
    pub replay_capacity: usize,
    pub target_sync_interval: usize,
    pub episodes: usize,
    pub seed: u64,
    pub hidden: usize,
    pub proj: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.05,
            eps_start: 1.0,
            eps_decay: 0.995,
            eps_min: 0.7,
            alpha: 0.01,
            batch: 32,
            r_th: 0.0,
            replay_capacity: 10_000,
            target_sync_interval: 100,
            episodes: 500,
            seed: 0,
            hidden: 64,
            proj: 32,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), RlError> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(RlError::Config(format!("gamma must be in [0,1), got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.eps_start)
            || !(0.0..=1.0).contains(&self.eps_min)
            || self.eps_min > self.eps_start
        {
            return Err(RlError::Config(format!(
                "need 0 <= eps_min <= eps_start <= 1, got eps_min={} eps_start={}",
                self.eps_min, self.eps_start
            )));
        }
        if self.batch == 0 {
            return Err(RlError::Config("batch must be >= 1".to_string()));
        }
        if self.replay_capacity < self.batch {
            return Err(RlError::Config(format!(
                "replay capacity {} smaller than batch {}",
                self.replay_capacity, self.batch
            )));
        }
        if self.hidden == 0 || self.proj == 0 {
            return Err(RlError::Config("hidden and proj must be >= 1".to_string()));
        }
        Ok(())
    }
}

/// The three-case reward: WAIT earns 0; SEARCH earns `1 + delta_map` when
/// the AP improvement reaches the threshold and a flat -1 otherwise.
pub fn reward_of(action: Action, delta_map: f64, r_th: f64) -> f64 {
    match action {
        Action::Wait => 0.0,
        Action::Search => {
            if delta_map >= r_th {
                1.0 + delta_map
            } else {
                -1.0
            }
        }
    }
}

/// Apply the chosen action to the session, emit the reward, then feed the
/// next token into `q2` (or mark the episode terminal when the consumed
/// token was the query's last).
pub fn env_step(
    state: &mut SessionState,
    action: Action,
    next_token: Option<&str>,
    handle: &RetrieverHandle,
    relevant: &BTreeSet<String>,
    r_th: f64,
) -> Result<(f64, bool), MetricsError> {
    let delta = apply_action(state, action, handle, relevant)?;
    let reward = reward_of(action, delta, r_th);
    let terminal = match next_token {
        Some(token) => {
            state.q2.push(token.to_string());
            false
        }
        None => true,
    };
    Ok((reward, terminal))
}

/// Epsilon-greedy over the two action values; greedy ties resolve to SEARCH.
pub fn epsilon_greedy<R: Rng>(qvals: [f64; 2], eps: f64, rng: &mut R) -> Action {
    if rng.gen::<f64>() < eps {
        if rng.gen_range(0..2u8) == 1 {
            Action::Search
        } else {
            Action::Wait
        }
    } else {
        greedy(qvals)
    }
}

fn greedy(qvals: [f64; 2]) -> Action {
    if qvals[1] >= qvals[0] {
        Action::Search
    } else {
        Action::Wait
    }
}

/// Q-learning regression target: `r` for terminal transitions, otherwise
/// `r + gamma * max_a Q_target(s', a)` using the lagged target network.
pub fn td_target(exp: &Experience, target_params: &QNetworkParams, gamma: f64) -> f64 {
    if exp.terminal {
        exp.reward
    } else {
        let q = qnet_forward(target_params, &exp.next_state.0, &exp.next_state.1);
        exp.reward + gamma * q[0].max(q[1])
    }
}

/// Bounded FIFO replay memory; sampling is uniform with replacement.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    buf: VecDeque<Experience>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            buf: VecDeque::with_capacity(capacity.min(65_536)),
            capacity,
        }
    }

    pub fn push(&mut self, exp: Experience) {
        if self.buf.len() == self.capacity {
            self.buf.pop_front();
        }
        self.buf.push_back(exp);
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, idx: usize) -> &Experience {
        &self.buf[idx]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.buf.iter()
    }

    pub fn sample_indices<R: Rng>(&self, batch: usize, rng: &mut R) -> Vec<usize> {
        (0..batch).map(|_| rng.gen_range(0..self.buf.len())).collect()
    }
}

/// One row of the training log CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainLogRow {
    pub episode: usize,
    pub eps: f64,
    pub total_reward: f64,
    pub mean_loss: f64,
    pub searches: usize,
}

/// Per-episode training diagnostics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub rows: Vec<TrainLogRow>,
}

impl TrainLog {
    /// CSV with header `episode,eps,total_reward,mean_loss,searches`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "episode,eps,total_reward,mean_loss,searches")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.episode, r.eps, r.total_reward, r.mean_loss, r.searches
            )?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut file)
    }
}

/// A trained network plus its per-episode log.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: QNetworkParams,
    pub log: TrainLog,
}

/// Train the Q-network against the retriever. Episodes walk queries in a
/// seeded shuffled round-robin; every step stores one transition and (once
/// the buffer holds a batch) regresses a sampled batch toward the target
/// network's TD targets. Fully deterministic for a fixed config.
pub fn train(
    config: &TrainConfig,
    queries: &[Query],
    handle: &RetrieverHandle,
    qrels: &Qrels,
    table: &EmbeddingTable,
) -> Result<TrainOutcome, RlError> {
    config.validate()?;
    if queries.is_empty() {
        return Err(RlError::NoQueries);
    }
    let relevant_sets: Vec<BTreeSet<String>> = queries
        .iter()
        .map(|q| {
            qrels.relevant_set(&q.id).ok_or_else(|| RlError::MissingQrels {
                qid: q.id.clone(),
            })
        })
        .collect::<Result<_, _>>()?;

    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut params = QNetworkParams::init(table.clone(), config.hidden, config.proj, &mut rng);
    let mut target = params.clone();
    let mut opt = AdamState::new(config.alpha, &params);
    let mut replay = ReplayBuffer::new(config.replay_capacity);
    let mut log = TrainLog::default();

    let mut order: Vec<usize> = (0..queries.len()).collect();
    let mut eps = config.eps_start;
    let mut updates = 0usize;

    for episode in 0..config.episodes {
        if episode % queries.len() == 0 {
            shuffle(&mut order, &mut rng);
        }
        let qi = order[episode % queries.len()];
        let query = &queries[qi];
        let relevant = &relevant_sets[qi];

        let mut state = SessionState::new();
        state.q2.push(query.tokens[0].clone());
        let mut total_reward = 0.0;
        let mut searches = 0usize;
        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;

        for t in 0..query.tokens.len() {
            let qvals = qnet_forward(&params, &state.q1, &state.q2);
            let action = epsilon_greedy(qvals, eps, &mut rng);
            if action == Action::Search {
                searches += 1;
            }
            let before = (state.q1.clone(), state.q2.clone());
            let next_token = query.tokens.get(t + 1).map(String::as_str);
            let (reward, terminal) =
                env_step(&mut state, action, next_token, handle, relevant, config.r_th)?;
            total_reward += reward;
            replay.push(Experience {
                state: before,
                action,
                reward,
                next_state: (state.q1.clone(), state.q2.clone()),
                terminal,
            });

            if replay.len() >= config.batch {
                let idxs = replay.sample_indices(config.batch, &mut rng);
                let sampled: Vec<&Experience> = idxs.iter().map(|&i| replay.get(i)).collect();
                let targets: Vec<f64> = sampled
                    .iter()
                    .map(|e| td_target(e, &target, config.gamma))
                    .collect();
                let batch: Vec<BatchItem> = sampled
                    .iter()
                    .zip(&targets)
                    .map(|(e, &tgt)| BatchItem {
                        q1: &e.state.0,
                        q2: &e.state.1,
                        action: match e.action {
                            Action::Wait => 0,
                            Action::Search => 1,
                        },
                        target: tgt,
                    })
                    .collect();
                let (grads, loss) = qnet_backward(&params, &batch);
                adam_step(&mut params, &grads, &mut opt);
                loss_sum += loss;
                loss_count += 1;
                updates += 1;
                if updates.is_multiple_of(config.target_sync_interval) {
                    target = params.clone();
                }
            }
        }

        log.rows.push(TrainLogRow {
            episode: episode + 1,
            eps,
            total_reward,
            mean_loss: if loss_count > 0 { loss_sum / loss_count as f64 } else { 0.0 },
            searches,
        });
        eps = (eps * config.eps_decay).max(config.eps_min);
    }

    Ok(TrainOutcome { params, log })
}

/// Fisher-Yates shuffle driven by the training RNG stream.
fn shuffle<R: Rng>(order: &mut [usize], rng: &mut R) {
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
}

/// Greedy action for a session state; ties resolve to SEARCH.
pub fn dqn_decide(params: &QNetworkParams, state: &SessionState) -> Action {
    greedy(qnet_forward(params, &state.q1, &state.q2))
}

/// Trained-network trigger policy (greedy inference, no exploration).
#[derive(Debug, Clone)]
pub struct DqnPolicy {
    params: QNetworkParams,
}

impl DqnPolicy {
    pub fn new(params: QNetworkParams) -> Self {
        DqnPolicy { params }
    }

    pub fn params(&self) -> &QNetworkParams {
        &self.params
    }
}

impl Policy for DqnPolicy {
    fn name(&self) -> &str {
        "dqn"
    }

    fn decide(&self, state: &SessionState, _new_token: &str, _is_last: bool) -> Action {
        dqn_decide(&self.params, state)
    }
}
