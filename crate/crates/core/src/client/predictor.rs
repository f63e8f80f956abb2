use crate::error::{Error, Result};
use crate::numerics::{dot, sigmoid, xavier_init, Matrix, ParamSet};

/// Two-layer scoring head: `sigmoid(w2 . relu(x W1 + b1) + b2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorParams {
    /// `d x h`
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

/// Intermediate values of one forward pass, kept for backprop.
#[derive(Debug, Clone)]
pub(crate) struct ForwardCache {
    pub pre: Vec<f64>,
    pub hidden: Vec<f64>,
    pub prob: f64,
}

impl PredictorParams {
    pub fn zeros(d: usize, h: usize) -> Self {
        Self {
            w1: Matrix::zeros(d, h),
            b1: vec![0.0; h],
            w2: vec![0.0; h],
            b2: 0.0,
        }
    }

    /// Xavier weights, zero biases.
    pub fn init(d: usize, h: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            w1: xavier_init(d, h, seed)?,
            b1: vec![0.0; h],
            w2: xavier_init(1, h, seed.wrapping_add(1))?.into_vec(),
            b2: 0.0,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn num_scalars(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    pub fn same_shape(&self, other: &PredictorParams) -> bool {
        self.w1.shape() == other.w1.shape()
            && self.b1.len() == other.b1.len()
            && self.w2.len() == other.w2.len()
    }

    pub(crate) fn forward_cached(&self, x: &[f64]) -> ForwardCache {
        let mut pre = self.w1.vec_mat(x);
        for (z, b) in pre.iter_mut().zip(&self.b1) {
            *z += b;
        }
        let hidden: Vec<f64> = pre.iter().map(|&z| z.max(0.0)).collect();
        let prob = sigmoid(dot(&hidden, &self.w2) + self.b2);
        ForwardCache { pre, hidden, prob }
    }

    /// Interaction probability for input vector `x`.
    pub fn forward(&self, x: &[f64]) -> f64 {
        self.forward_cached(x).prob
    }

    /// Accumulates `dlogit`-scaled parameter gradients into `grad` and
    /// returns the gradient with respect to the input.
    pub(crate) fn backward(
        &self,
        x: &[f64],
        cache: &ForwardCache,
        dlogit: f64,
        grad: &mut PredictorParams,
    ) -> Vec<f64> {
        grad.b2 += dlogit;
        let mut dpre = vec![0.0; self.hidden_dim()];
        for (j, dp) in dpre.iter_mut().enumerate() {
            grad.w2[j] += dlogit * cache.hidden[j];
            if cache.pre[j] > 0.0 {
                *dp = dlogit * self.w2[j];
            }
        }
        for (j, &g) in dpre.iter().enumerate() {
            grad.b1[j] += g;
        }
        for (k, &xk) in x.iter().enumerate() {
            for (w, &g) in grad.w1.row_mut(k).iter_mut().zip(&dpre) {
                *w += xk * g;
            }
        }
        self.w1.mat_vec(&dpre)
    }

    /// Fixed field order `W1, b1, w2, b2`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_scalars());
        v.extend_from_slice(self.w1.as_slice());
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(&self.w2);
        v.push(self.b2);
        v
    }

    pub fn from_flat(d: usize, h: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != d * h + 2 * h + 1 {
            return Err(Error::invalid(format!(
                "flat predictor has {} values, expected {}",
                flat.len(),
                d * h + 2 * h + 1
            )));
        }
        let (w1, rest) = flat.split_at(d * h);
        let (b1, rest) = rest.split_at(h);
        let (w2, rest) = rest.split_at(h);
        Ok(Self {
            w1: Matrix::from_vec(d, h, w1.to_vec())?,
            b1: b1.to_vec(),
            w2: w2.to_vec(),
            b2: rest[0],
        })
    }

    pub fn scale(&mut self, alpha: f64) {
        self.w1.scale(alpha);
        self.b1.iter_mut().for_each(|x| *x *= alpha);
        self.w2.iter_mut().for_each(|x| *x *= alpha);
        self.b2 *= alpha;
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &PredictorParams) {
        self.w1.axpy(alpha, &other.w1);
        for (a, b) in self.b1.iter_mut().zip(&other.b1) {
            *a += alpha * b;
        }
        for (a, b) in self.w2.iter_mut().zip(&other.w2) {
            *a += alpha * b;
        }
        self.b2 += alpha * other.b2;
    }

    pub fn is_finite(&self) -> bool {
        self.w1.is_finite()
            && self.b1.iter().chain(&self.w2).all(|x| x.is_finite())
            && self.b2.is_finite()
    }

    pub(crate) fn push_into(&self, set: &mut ParamSet) {
        set.push("w1", self.w1.clone()).expect("unique");
        set.push("b1", Matrix::row_vector(&self.b1)).expect("unique");
        set.push("w2", Matrix::row_vector(&self.w2)).expect("unique");
        set.push("b2", Matrix::row_vector(&[self.b2])).expect("unique");
    }

    pub(crate) fn load_from(&mut self, set: &ParamSet) {
        self.w1 = set.get("w1").expect("w1").clone();
        self.b1.copy_from_slice(set.get("b1").expect("b1").as_slice());
        self.w2.copy_from_slice(set.get("w2").expect("w2").as_slice());
        self.b2 = set.get("b2").expect("b2").as_slice()[0];
    }
}
