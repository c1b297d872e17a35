//! Low-rank adaptation of a frozen dense layer.
//!
//! `W` is `d×k`, `A` is `d×r`, `B` is `k×r`, and the adapted map is
//! `y = W x + (α/r) A (Bᵀ x)`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

mod checkpoint;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, AdapterCheckpoint, CHECKPOINT_MAGIC};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum LoraError {
    #[error("shape mismatch for {what}: expected {expected}, found {found}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("target {index} out of range for {len} classes")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("rank {r} must lie in 1..={max}")]
    InvalidRank { r: usize, max: usize },
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("no training examples")]
    EmptyData,
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
}

fn check(what: &'static str, expected: usize, found: usize) -> Result<(), LoraError> {
    if expected == found {
        Ok(())
    } else {
        Err(LoraError::ShapeMismatch { what, expected, found })
    }
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LoraError> {
        check("matrix data", rows * cols, data.len())?;
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Entries drawn from `N(0, sigma²)`.
    pub fn gaussian(rows: usize, cols: usize, sigma: f64, rng: &mut ChaCha8Rng) -> Self {
        let normal = Normal::new(0.0, sigma).expect("finite non-negative sigma");
        Matrix::from_fn(rows, cols, |_, _| normal.sample(rng))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `M x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>, LoraError> {
        check("input vector", self.cols, x.len())?;
        Ok(self
            .data
            .chunks_exact(self.cols.max(1))
            .take(self.rows)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `Mᵀ x`.
    pub fn t_matvec(&self, x: &[f64]) -> Result<Vec<f64>, LoraError> {
        check("input vector", self.rows, x.len())?;
        let mut out = vec![0.0; self.cols];
        for (i, xi) in x.iter().enumerate() {
            for (j, o) in out.iter_mut().enumerate() {
                *o += self.get(i, j) * xi;
            }
        }
        Ok(out)
    }
}

/// A frozen base weight. There is no mutable access after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    w: Matrix,
}

impl DenseLayer {
    pub fn new(w: Matrix) -> Result<Self, LoraError> {
        if !w.is_finite() {
            return Err(LoraError::NonFinite("W"));
        }
        Ok(DenseLayer { w })
    }

    pub fn weights(&self) -> &Matrix {
        &self.w
    }

    pub fn d(&self) -> usize {
        self.w.rows
    }

    pub fn k(&self) -> usize {
        self.w.cols
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, LoraError> {
        self.w.matvec(x)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// `A` Gaussian, `B = 0`, so the adapter starts as the identity update.
    #[default]
    Zero,
    /// Both factors Gaussian.
    Gauss,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdapterPair {
    pub a: Matrix,
    pub b: Matrix,
    pub alpha: f64,
}

pub const INIT_SIGMA: f64 = 0.1;

impl AdapterPair {
    pub fn new(a: Matrix, b: Matrix, alpha: f64) -> Result<Self, LoraError> {
        let r = a.cols;
        check("rank of B", r, b.cols)?;
        let max = a.rows.min(b.rows);
        if r == 0 || r > max {
            return Err(LoraError::InvalidRank { r, max });
        }
        if !a.is_finite() || !b.is_finite() || !alpha.is_finite() {
            return Err(LoraError::NonFinite("adapter"));
        }
        Ok(AdapterPair { a, b, alpha })
    }

    pub fn init(d: usize, k: usize, r: usize, alpha: f64, mode: InitMode, seed: u64) -> Result<Self, LoraError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Matrix::gaussian(d, r, INIT_SIGMA, &mut rng);
        let b = match mode {
            InitMode::Zero => Matrix::zeros(k, r),
            InitMode::Gauss => Matrix::gaussian(k, r, INIT_SIGMA, &mut rng),
        };
        AdapterPair::new(a, b, alpha)
    }

    pub fn rank(&self) -> usize {
        self.a.cols
    }

    pub fn scale(&self) -> f64 {
        self.alpha / self.rank() as f64
    }

    fn check_layer(&self, layer: &DenseLayer) -> Result<(), LoraError> {
        check("rows of A", layer.d(), self.a.rows)?;
        check("rows of B", layer.k(), self.b.rows)
    }

    /// `(α/r) A Bᵀ`.
    pub fn delta(&self) -> Matrix {
        let s = self.scale();
        Matrix::from_fn(self.a.rows, self.b.rows, |i, j| {
            s * (0..self.rank()).map(|q| self.a.get(i, q) * self.b.get(j, q)).sum::<f64>()
        })
    }
}

/// `W x + (α/r) A (Bᵀ x)`, never forming `A Bᵀ`.
pub fn lora_forward(layer: &DenseLayer, adapter: &AdapterPair, x: &[f64]) -> Result<Vec<f64>, LoraError> {
    adapter.check_layer(layer)?;
    let mut y = layer.forward(x)?;
    let z = adapter.b.t_matvec(x)?;
    let dy = adapter.a.matvec(&z)?;
    let s = adapter.scale();
    for (yi, di) in y.iter_mut().zip(dy) {
        *yi += s * di;
    }
    Ok(y)
}

/// `W' = W + (α/r) A Bᵀ` as a new layer.
pub fn lora_merge(layer: &DenseLayer, adapter: &AdapterPair) -> Result<DenseLayer, LoraError> {
    adapter.check_layer(layer)?;
    let delta = adapter.delta();
    let data = layer.w.data.iter().zip(&delta.data).map(|(w, d)| w + d).collect();
    DenseLayer::new(Matrix::from_vec(layer.d(), layer.k(), data)?)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Reduction {
    #[default]
    Sum,
    Mean,
}

fn log_softmax(row: &[f64]) -> Vec<f64> {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + libm::log(row.iter().map(|l| libm::exp(l - m)).sum::<f64>());
    row.iter().map(|l| l - lse).collect()
}

/// `-Σ log softmax(logits_i)[y_i]`, or its mean.
pub fn nll_loss(rows: &[Vec<f64>], targets: &[usize], reduction: Reduction) -> Result<f64, LoraError> {
    check("targets", rows.len(), targets.len())?;
    let mut total = 0.0;
    for (row, &t) in rows.iter().zip(targets) {
        if t >= row.len() {
            return Err(LoraError::IndexOutOfRange {
                index: t,
                len: row.len(),
            });
        }
        total -= log_softmax(row)[t];
    }
    Ok(match reduction {
        Reduction::Sum => total,
        Reduction::Mean if rows.is_empty() => 0.0,
        Reduction::Mean => total / rows.len() as f64,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub steps: usize,
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            steps: 1200,
            batch_size: 8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LoraError> {
        let bad = |m: &str| Err(LoraError::InvalidConfig(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be non-negative");
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return bad("betas must lie in [0, 1)");
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return bad("eps must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        Ok(())
    }
}

/// First and second moment estimates and the step count.
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
}

/// One AdamW update with weight decay decoupled from the gradient:
/// `p ← p − lr·(m̂ / (√v̂ + ε) + λ p)`.
pub fn adamw_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, cfg: &TrainConfig) -> Result<(), LoraError> {
    check("gradient", params.len(), grads.len())?;
    check("first moment", params.len(), state.m.len())?;
    check("second moment", params.len(), state.v.len())?;
    state.t += 1;
    let t = state.t as f64;
    let c1 = 1.0 - libm::pow(cfg.beta1, t);
    let c2 = 1.0 - libm::pow(cfg.beta2, t);
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let step = (*m / c1) / (libm::sqrt(*v / c2) + cfg.eps);
        *p -= cfg.learning_rate * (step + cfg.weight_decay * *p);
    }
    Ok(())
}

/// An input vector and its target class.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub x: Vec<f64>,
    pub target: usize,
}

/// Mean token NLL over `batch` and its gradients with respect to `A` and
/// `B`.
///
/// With `g = softmax(y) − e_t`, `z = Bᵀx` and `s = α/r`:
/// `∂ℓ/∂A = s g zᵀ` and `∂ℓ/∂B = x (s Aᵀ g)ᵀ`.
pub fn loss_and_grads(
    layer: &DenseLayer,
    adapter: &AdapterPair,
    batch: &[Example],
) -> Result<(f64, Matrix, Matrix), LoraError> {
    if batch.is_empty() {
        return Err(LoraError::EmptyData);
    }
    let s = adapter.scale();
    let r = adapter.rank();
    let mut ga = Matrix::zeros(layer.d(), r);
    let mut gb = Matrix::zeros(layer.k(), r);
    let n = batch.len() as f64;
    let mut rows = Vec::with_capacity(batch.len());
    for ex in batch {
        rows.push(lora_forward(layer, adapter, &ex.x)?);
    }
    let targets: Vec<usize> = batch.iter().map(|ex| ex.target).collect();
    let loss = nll_loss(&rows, &targets, Reduction::Mean)?;
    for (ex, y) in batch.iter().zip(&rows) {
        let mut g: Vec<f64> = log_softmax(y).iter().map(|l| libm::exp(*l)).collect();
        g[ex.target] -= 1.0;
        let z = adapter.b.t_matvec(&ex.x)?;
        let atg = adapter.a.t_matvec(&g)?;
        for (i, gi) in g.iter().enumerate() {
            for (q, zq) in z.iter().enumerate() {
                let v = ga.get(i, q) + s * gi * zq / n;
                ga.set(i, q, v);
            }
        }
        for (j, xj) in ex.x.iter().enumerate() {
            if *xj == 0.0 {
                continue;
            }
            for (q, aq) in atg.iter().enumerate() {
                let v = gb.get(j, q) + s * xj * aq / n;
                gb.set(j, q, v);
            }
        }
    }
    Ok((loss, ga, gb))
}

/// Trains the adapter factors on cyclic mini-batches of `data`, leaving
/// `layer` untouched. The trace holds the batch loss before each update.
pub fn train_adapters(
    layer: &DenseLayer,
    init: AdapterPair,
    data: &[Example],
    cfg: &TrainConfig,
) -> Result<(AdapterPair, Vec<f64>), LoraError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(LoraError::EmptyData);
    }
    init.check_layer(layer)?;
    let mut adapter = init;
    let mut sa = AdamState::new(adapter.a.data.len());
    let mut sb = AdamState::new(adapter.b.data.len());
    let mut trace = Vec::with_capacity(cfg.steps);
    let mut cursor = 0;
    for _ in 0..cfg.steps {
        let batch: Vec<Example> = (0..cfg.batch_size.min(data.len()))
            .map(|i| data[(cursor + i) % data.len()].clone())
            .collect();
        cursor = (cursor + batch.len()) % data.len();
        let (loss, ga, gb) = loss_and_grads(layer, &adapter, &batch)?;
        trace.push(loss);
        adamw_step(&mut adapter.a.data, &ga.data, &mut sa, cfg)?;
        adamw_step(&mut adapter.b.data, &gb.data, &mut sb, cfg)?;
    }
    Ok((adapter, trace))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamCounts {
    pub full: u64,
    pub lora: u64,
    /// `lora / full`.
    pub ratio: f64,
}

pub fn param_counts(d: u64, k: u64, r: u64) -> ParamCounts {
    let full = d * k;
    let lora = r * (d + k);
    ParamCounts {
        full,
        lora,
        ratio: lora as f64 / full as f64,
    }
}

/// Synthetic next-token task: token `j` (one-hot over `k`) must map to the
/// class a hidden rank-`r` perturbation of `W` scores highest.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyTask {
    pub layer: DenseLayer,
    pub examples: Vec<Example>,
}

impl ToyTask {
    pub fn new(d: usize, k: usize, r: usize, seed: u64) -> Result<Self, LoraError> {
        let max = d.min(k);
        if r == 0 || r > max {
            return Err(LoraError::InvalidRank { r, max });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = Matrix::gaussian(d, k, 1.0, &mut rng);
        let u = Matrix::gaussian(d, r, 1.5, &mut rng);
        let v = Matrix::gaussian(k, r, 1.5, &mut rng);
        let examples = (0..k)
            .map(|j| {
                let target = (0..d)
                    .map(|i| w.get(i, j) + (0..r).map(|q| u.get(i, q) * v.get(j, q)).sum::<f64>())
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (i, s)| if s > best.1 { (i, s) } else { best })
                    .0;
                let mut x = vec![0.0; k];
                x[j] = 1.0;
                Example { x, target }
            })
            .collect();
        Ok(ToyTask {
            layer: DenseLayer::new(w)?,
            examples,
        })
    }
}
