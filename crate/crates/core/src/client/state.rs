use crate::client::PredictorParams;
use crate::error::{Error, Result};
use crate::numerics::{xavier_init, Matrix, ParamSet};

/// Parameters every client synchronizes from the server.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedParams {
    /// `M x d`
    pub item_embeddings: Matrix,
    pub predictor: PredictorParams,
}

impl SharedParams {
    pub fn init(num_items: usize, d: usize, h: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            item_embeddings: xavier_init(num_items, d, seed)?,
            predictor: PredictorParams::init(d, h, seed.wrapping_add(0x5eed))?,
        })
    }

    pub fn num_items(&self) -> usize {
        self.item_embeddings.rows()
    }

    pub fn dim(&self) -> usize {
        self.item_embeddings.cols()
    }

    pub fn is_finite(&self) -> bool {
        self.item_embeddings.is_finite() && self.predictor.is_finite()
    }
}

/// Scoring interface a backbone model exposes to training and evaluation.
pub trait Backbone {
    fn num_items(&self) -> usize;

    /// Interaction probability for `item`.
    fn predict(&self, item: usize) -> f64;

    fn score_all(&self) -> Vec<f64> {
        (0..self.num_items()).map(|i| self.predict(i)).collect()
    }
}

/// One simulated client: a private user embedding plus local copies of the
/// shared item table and predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientState {
    pub user_id: usize,
    /// Private; never leaves the client.
    pub user_embedding: Vec<f64>,
    pub item_embeddings: Matrix,
    pub predictor: PredictorParams,
    pub group_id: Option<usize>,
    pub train_items: Vec<usize>,
}

/// How a client's private user embedding starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UserInit {
    /// All ones, so the predictor initially sees raw item rows.
    #[default]
    Ones,
    /// Xavier-uniform like the shared tables.
    Xavier,
}

pub(crate) const USER: &str = "user_embedding";
pub(crate) const ITEMS: &str = "item_embeddings";

impl ClientState {
    /// Client with a Xavier-initialized user embedding.
    pub fn new(user_id: usize, shared: &SharedParams, train_items: Vec<usize>, seed: u64) -> Result<Self> {
        Self::with_init(user_id, shared, train_items, UserInit::Xavier, seed)
    }

    pub fn with_init(
        user_id: usize,
        shared: &SharedParams,
        train_items: Vec<usize>,
        init: UserInit,
        seed: u64,
    ) -> Result<Self> {
        let d = shared.dim();
        let user_embedding = match init {
            UserInit::Ones => vec![1.0; d],
            UserInit::Xavier => xavier_init(1, d, seed)?.into_vec(),
        };
        Ok(Self {
            user_id,
            user_embedding,
            item_embeddings: shared.item_embeddings.clone(),
            predictor: shared.predictor.clone(),
            group_id: None,
            train_items,
        })
    }

    pub fn dim(&self) -> usize {
        self.user_embedding.len()
    }

    /// Overwrites the local shared components with the server's copy.
    pub fn sync(&mut self, shared: &SharedParams) {
        self.item_embeddings.clone_from(&shared.item_embeddings);
        self.predictor.clone_from(&shared.predictor);
    }

    /// Elementwise product of the user embedding and item row `item`.
    pub(crate) fn input_for(&self, item: usize) -> Vec<f64> {
        self.user_embedding
            .iter()
            .zip(self.item_embeddings.row(item))
            .map(|(u, e)| u * e)
            .collect()
    }

    /// Trainable parameters in a stable order:
    /// `user_embedding, item_embeddings, w1, b1, w2, b2`.
    pub fn to_param_set(&self) -> ParamSet {
        let mut set = ParamSet::new()
            .with(USER, Matrix::row_vector(&self.user_embedding))
            .with(ITEMS, self.item_embeddings.clone());
        self.predictor.push_into(&mut set);
        set
    }

    pub fn load_param_set(&mut self, set: &ParamSet) {
        self.user_embedding
            .copy_from_slice(set.get(USER).expect("user").as_slice());
        self.item_embeddings = set.get(ITEMS).expect("items").clone();
        self.predictor.load_from(set);
    }
}

impl Backbone for ClientState {
    fn num_items(&self) -> usize {
        self.item_embeddings.rows()
    }

    fn predict(&self, item: usize) -> f64 {
        self.predictor.forward(&self.input_for(item))
    }
}

/// Probability of interaction under `state`'s local model.
pub fn predict(state: &ClientState, item: usize) -> f64 {
    state.predict(item)
}

/// Group preference rows `[p_interact, p_not]`, `M x 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceSignal {
    rows: Matrix,
}

impl PreferenceSignal {
    pub fn from_probs(probs: &[f64]) -> Self {
        let mut rows = Matrix::zeros(probs.len(), 2);
        for (i, &p) in probs.iter().enumerate() {
            rows[(i, 0)] = p;
            rows[(i, 1)] = 1.0 - p;
        }
        Self { rows }
    }

    pub fn from_rows(rows: Matrix) -> Result<Self> {
        if rows.cols() != 2 {
            return Err(Error::invalid("preference signal must have two columns"));
        }
        for i in 0..rows.rows() {
            let r = rows.row(i);
            if r[0] < 0.0 || r[1] < 0.0 || (r[0] + r[1] - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!("signal row {i} is not a distribution")));
            }
        }
        Ok(Self { rows })
    }

    pub fn num_items(&self) -> usize {
        self.rows.rows()
    }

    pub fn p_interact(&self, item: usize) -> f64 {
        self.rows[(item, 0)]
    }

    pub fn rows(&self) -> &Matrix {
        &self.rows
    }

    pub const WIRE_BYTES_PER_ITEM: usize = 2 * 4;
}

/// What a client uploads after local training. Carries no user embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdate {
    pub user_id: usize,
    pub item_embeddings: Matrix,
    pub predictor: PredictorParams,
    pub sample_count: usize,
}

const UPDATE_MAGIC: &[u8; 4] = b"GCU1";
const UPDATE_VERSION: u32 = 1;
const UPDATE_HEADER: usize = 4 + 4 * 6;

impl ClientUpdate {
    /// Serialized tensor fields, in wire order.
    pub const WIRE_FIELDS: [&'static str; 5] = ["item_embeddings", "w1", "b1", "w2", "b2"];

    /// Bytes of tensor payload on the wire (32-bit reals).
    pub fn payload_bytes(num_items: usize, d: usize, h: usize) -> usize {
        4 * (num_items * d + d * h + 2 * h + 1)
    }

    pub fn encode(&self) -> Vec<u8> {
        let (m, d) = self.item_embeddings.shape();
        let h = self.predictor.hidden_dim();
        let mut out = Vec::with_capacity(UPDATE_HEADER + Self::payload_bytes(m, d, h));
        out.extend_from_slice(UPDATE_MAGIC);
        for w in [UPDATE_VERSION, self.user_id as u32, self.sample_count as u32, m as u32, d as u32, h as u32] {
            out.extend_from_slice(&w.to_le_bytes());
        }
        let tensors = self
            .item_embeddings
            .as_slice()
            .iter()
            .chain(self.predictor.flatten().iter())
            .map(|&x| x as f32)
            .collect::<Vec<f32>>();
        for x in tensors {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let bad = |detail: &str| Error::invalid(format!("client update: {detail}"));
        if bytes.len() < UPDATE_HEADER || &bytes[..4] != UPDATE_MAGIC {
            return Err(bad("bad header"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
        if word(0) != UPDATE_VERSION as usize {
            return Err(bad("unsupported version"));
        }
        let (user_id, sample_count, m, d, h) = (word(1), word(2), word(3), word(4), word(5));
        if bytes.len() != UPDATE_HEADER + Self::payload_bytes(m, d, h) {
            return Err(bad("length does not match header"));
        }
        let vals: Vec<f64> = bytes[UPDATE_HEADER..]
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
            .collect();
        let (items, pred) = vals.split_at(m * d);
        Ok(Self {
            user_id,
            item_embeddings: Matrix::from_vec(m, d, items.to_vec())?,
            predictor: PredictorParams::from_flat(d, h, pred)?,
            sample_count,
        })
    }
}
