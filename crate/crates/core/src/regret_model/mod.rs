//! Regret predictor: a one-hidden-layer leaky-ReLU MLP trained on mean L1
//! loss with Adam and plateau-based learning-rate reduction. Built from
//! scratch in f64 with hand-derived, finite-difference-verified gradients;
//! training is single-threaded and bit-deterministic in the seed.

use crate::game::{RegretSample, FEATURE_LEN};
use crate::util::sub_seed;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::io::{BufWriter, Write as _};
use std::path::Path;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// MLP weights. The hidden layer weight matrix is stored input-major
/// (`w1[(k, j)]` = weight from input `k` to hidden unit `j`) so batched
/// products need no transposition; externally (file format) rows are per
/// hidden unit.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DVector<f64>,
    pub b2: f64,
    pub slope: f64,
}

impl MlpParams {
    pub fn n_in(&self) -> usize {
        self.w1.nrows()
    }

    pub fn n_hidden(&self) -> usize {
        self.w1.ncols()
    }

    /// Uniform(−1/√fan_in, +1/√fan_in) initialization, deterministic in the
    /// seed; draw order is W1 rows (per hidden unit), b1, W2, b2.
    pub fn init(n_in: usize, n_hidden: usize, slope: f64, seed: u64) -> Result<MlpParams> {
        if n_in == 0 || n_hidden == 0 {
            return Err(Error::invalid("mlp needs at least one input and one hidden unit"));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let bound1 = 1.0 / (n_in as f64).sqrt();
        let mut w1 = DMatrix::zeros(n_in, n_hidden);
        for j in 0..n_hidden {
            for k in 0..n_in {
                w1[(k, j)] = rng.random_range(-bound1..bound1);
            }
        }
        let b1 = DVector::from_fn(n_hidden, |_, _| rng.random_range(-bound1..bound1));
        let bound2 = 1.0 / (n_hidden as f64).sqrt();
        let w2 = DVector::from_fn(n_hidden, |_, _| rng.random_range(-bound2..bound2));
        let b2 = rng.random_range(-bound2..bound2);
        Ok(MlpParams { w1, b1, w2, b2, slope })
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.w1.iter().all(|v| v.is_finite())
            && self.b1.iter().all(|v| v.is_finite())
            && self.w2.iter().all(|v| v.is_finite())
            && self.b2.is_finite()
            && self.slope.is_finite();
        if !finite {
            return Err(Error::numerics("non-finite mlp parameter"));
        }
        if self.b1.len() != self.n_hidden() || self.w2.len() != self.n_hidden() {
            return Err(Error::invalid("mlp parameter shapes disagree"));
        }
        Ok(())
    }
}

fn leaky(z: f64, slope: f64) -> f64 {
    if z >= 0.0 {
        z
    } else {
        slope * z
    }
}

/// Leaky ReLU subgradient; at exactly zero the positive branch is used.
fn leaky_grad(z: f64, slope: f64) -> f64 {
    if z >= 0.0 {
        1.0
    } else {
        slope
    }
}

/// Single-sample prediction.
pub fn forward(p: &MlpParams, x: &[f64]) -> Result<f64> {
    if x.len() != p.n_in() {
        return Err(Error::invalid(format!("expected {} features, got {}", p.n_in(), x.len())));
    }
    let mut y = p.b2;
    for j in 0..p.n_hidden() {
        let mut z = p.b1[j];
        for (k, &xe) in x.iter().enumerate() {
            z += p.w1[(k, j)] * xe;
        }
        y += p.w2[j] * leaky(z, p.slope);
    }
    Ok(y)
}

/// Batched predictions: `x` holds one sample per row.
pub fn batch_forward(p: &MlpParams, x: &DMatrix<f64>) -> DVector<f64> {
    let mut z = x * &p.w1;
    for mut row in z.row_iter_mut() {
        row += p.b1.transpose();
    }
    z.apply(|v| *v = leaky(*v, p.slope));
    let mut y = z * &p.w2;
    y.add_scalar_mut(p.b2);
    y
}

/// Mean L1 loss of the batch.
pub fn batch_loss(p: &MlpParams, x: &DMatrix<f64>, targets: &DVector<f64>) -> f64 {
    let y = batch_forward(p, x);
    (y - targets).abs().sum() / targets.len().max(1) as f64
}

/// Gradients of the mean L1 loss, same shapes as the parameters.
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DVector<f64>,
    pub b2: f64,
}

/// Backpropagate the mean L1 loss over a batch (rows of `x`). The L1
/// subgradient at exactly zero residual is 0. Returns the gradients and the
/// batch loss.
pub fn backward(p: &MlpParams, x: &DMatrix<f64>, targets: &DVector<f64>) -> (MlpGrads, f64) {
    let batch = x.nrows();
    assert!(batch > 0 && targets.len() == batch, "non-empty batch with matching targets required");
    let mut z = x * &p.w1;
    for mut row in z.row_iter_mut() {
        row += p.b1.transpose();
    }
    let h = z.map(|v| leaky(v, p.slope));
    let y = &h * &p.w2;
    let inv = 1.0 / batch as f64;
    let mut loss = 0.0;
    let s = DVector::from_fn(batch, |i, _| {
        let r = y[i] + p.b2 - targets[i];
        loss += r.abs() * inv;
        if r > 0.0 {
            inv
        } else if r < 0.0 {
            -inv
        } else {
            0.0
        }
    });
    let g_b2 = s.sum();
    let g_w2 = h.transpose() * &s;
    // hidden-layer sensitivities: d[i][j] = s[i] * w2[j] * leaky'(z[i][j])
    let mut d = z;
    for i in 0..batch {
        for j in 0..p.n_hidden() {
            d[(i, j)] = s[i] * p.w2[j] * leaky_grad(d[(i, j)], p.slope);
        }
    }
    let g_b1 = d.transpose() * DVector::from_element(batch, 1.0);
    let g_w1 = x.transpose() * &d;
    (MlpGrads { w1: g_w1, b1: g_b1, w2: g_w2, b2: g_b2 }, loss)
}

/// First and second moment accumulators for Adam.
#[derive(Debug, Clone)]
pub struct AdamState {
    m_w1: DMatrix<f64>,
    v_w1: DMatrix<f64>,
    m_b1: DVector<f64>,
    v_b1: DVector<f64>,
    m_w2: DVector<f64>,
    v_w2: DVector<f64>,
    m_b2: f64,
    v_b2: f64,
    pub t: usize,
}

impl AdamState {
    pub fn new(p: &MlpParams) -> AdamState {
        AdamState {
            m_w1: DMatrix::zeros(p.w1.nrows(), p.w1.ncols()),
            v_w1: DMatrix::zeros(p.w1.nrows(), p.w1.ncols()),
            m_b1: DVector::zeros(p.b1.len()),
            v_b1: DVector::zeros(p.b1.len()),
            m_w2: DVector::zeros(p.w2.len()),
            v_w2: DVector::zeros(p.w2.len()),
            m_b2: 0.0,
            v_b2: 0.0,
            t: 0,
        }
    }
}

fn adam_update(p: &mut f64, g: f64, m: &mut f64, v: &mut f64, lr: f64, c1: f64, c2: f64) {
    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
}

/// One Adam step with bias correction (β1 = 0.9, β2 = 0.999, ε = 1e−8).
pub fn adam_step(p: &mut MlpParams, g: &MlpGrads, state: &mut AdamState, lr: f64) {
    state.t += 1;
    let c1 = 1.0 - ADAM_BETA1.powi(state.t as i32);
    let c2 = 1.0 - ADAM_BETA2.powi(state.t as i32);
    for (i, gv) in g.w1.iter().enumerate() {
        adam_update(&mut p.w1[i], *gv, &mut state.m_w1[i], &mut state.v_w1[i], lr, c1, c2);
    }
    for (i, gv) in g.b1.iter().enumerate() {
        adam_update(&mut p.b1[i], *gv, &mut state.m_b1[i], &mut state.v_b1[i], lr, c1, c2);
    }
    for (i, gv) in g.w2.iter().enumerate() {
        adam_update(&mut p.w2[i], *gv, &mut state.m_w2[i], &mut state.v_w2[i], lr, c1, c2);
    }
    adam_update(&mut p.b2, g.b2, &mut state.m_b2, &mut state.v_b2, lr, c1, c2);
}

/// Training hyperparameters.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub n_hidden: usize,
    pub lr0: f64,
    pub batch: usize,
    pub epochs: usize,
    pub plateau_patience: usize,
    pub lr_factor: f64,
    pub leaky_slope: f64,
    pub val_fraction: f64,
    pub min_improvement: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_hidden: 2048,
            lr0: 0.005,
            batch: 1024,
            epochs: 2000,
            plateau_patience: 10,
            lr_factor: 0.1,
            leaky_slope: 0.01,
            val_fraction: 0.1,
            min_improvement: 1e-6,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lr0 <= 0.0 || self.batch == 0 || self.plateau_patience == 0 || self.n_hidden == 0 {
            return Err(Error::invalid("training needs lr0 > 0, batch >= 1, patience >= 1, hidden >= 1"));
        }
        if !(0.0..1.0).contains(&self.val_fraction) || !(0.0..1.0).contains(&self.lr_factor) {
            return Err(Error::invalid("val_fraction and lr_factor must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// One row of the training curve.
#[derive(Debug, Clone, Copy)]
pub struct LossRow {
    pub epoch: usize,
    pub train_l1: f64,
    pub val_l1: f64,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    /// Best-validation checkpoint.
    pub params: MlpParams,
    pub curve: Vec<LossRow>,
    pub best_val: f64,
    pub best_epoch: usize,
}

fn rows_to_matrix(dataset: &[RegretSample], idx: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
    let x = DMatrix::from_fn(idx.len(), FEATURE_LEN, |i, k| dataset[idx[i]].features[k]);
    let t = DVector::from_fn(idx.len(), |i, _| dataset[idx[i]].target);
    (x, t)
}

/// Train the regret predictor: seeded shuffle into train/validation,
/// minibatch Adam epochs, learning-rate reduction after `plateau_patience`
/// epochs without validation improvement, best-validation checkpointing.
/// Single-threaded; bit-deterministic in the seed.
pub fn train(dataset: &[RegretSample], cfg: &TrainConfig) -> Result<TrainResult> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::invalid("empty training dataset"));
    }
    let n = dataset.len();
    let mut rng = ChaCha12Rng::seed_from_u64(sub_seed(cfg.seed, 0));
    let mut order: Vec<usize> = (0..n).collect();
    // Fisher-Yates, deterministic in the rng stream
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let val_n = ((n as f64) * cfg.val_fraction).round() as usize;
    let val_n = val_n.min(n - 1);
    let (train_idx, val_idx) = order.split_at(n - val_n);
    let train_idx = train_idx.to_vec();
    let (x_val, t_val) = rows_to_matrix(dataset, val_idx);

    let mut params = MlpParams::init(FEATURE_LEN, cfg.n_hidden, cfg.leaky_slope, sub_seed(cfg.seed, 1))?;
    let mut adam = AdamState::new(&params);
    let mut lr = cfg.lr0;
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut best = params.clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut stale = 0usize;
    let batch = cfg.batch.min(train_idx.len());
    let mut epoch_order = train_idx.clone();

    for epoch in 0..cfg.epochs {
        for i in (1..epoch_order.len()).rev() {
            epoch_order.swap(i, rng.random_range(0..=i));
        }
        let mut train_loss = 0.0;
        for chunk in epoch_order.chunks(batch) {
            let (x, t) = rows_to_matrix(dataset, chunk);
            let (grads, loss) = backward(&params, &x, &t);
            train_loss += loss * chunk.len() as f64;
            adam_step(&mut params, &grads, &mut adam, lr);
        }
        train_loss /= epoch_order.len() as f64;
        // with no held-out rows the training loss stands in for validation
        let val_l1 = if val_idx.is_empty() { train_loss } else { batch_loss(&params, &x_val, &t_val) };
        curve.push(LossRow { epoch, train_l1: train_loss, val_l1, lr });
        if val_l1 < best_val - cfg.min_improvement {
            best_val = val_l1;
            best_epoch = epoch;
            best = params.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.plateau_patience {
                lr *= cfg.lr_factor;
                stale = 0;
                log::info!("epoch {epoch}: validation plateau, lr -> {lr:.2e}");
            }
        }
    }
    best.validate()?;
    Ok(TrainResult { params: best, curve, best_val, best_epoch })
}

/// Text model format: header `n_in n_hidden 1 slope`, then W1 (one line per
/// hidden unit), b1, W2, b2 as whitespace-separated decimals.
pub fn write_model(path: &Path, p: &MlpParams) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{} {} 1 {}", p.n_in(), p.n_hidden(), p.slope)?;
    for j in 0..p.n_hidden() {
        let row: Vec<String> = (0..p.n_in()).map(|k| p.w1[(k, j)].to_string()).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    writeln!(w, "{}", p.b1.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "))?;
    writeln!(w, "{}", p.w2.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "))?;
    writeln!(w, "{}", p.b2)?;
    w.flush()?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<MlpParams> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::parse("empty model file"))?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 4 {
        return Err(Error::parse("model header must be `n_in n_hidden n_out slope`"));
    }
    let n_in: usize = head[0].parse().map_err(|e| Error::parse(format!("n_in: {e}")))?;
    let n_hidden: usize = head[1].parse().map_err(|e| Error::parse(format!("n_hidden: {e}")))?;
    let n_out: usize = head[2].parse().map_err(|e| Error::parse(format!("n_out: {e}")))?;
    if n_out != 1 {
        return Err(Error::parse("only single-output models are supported"));
    }
    let slope: f64 = head[3].parse().map_err(|e| Error::parse(format!("slope: {e}")))?;
    let mut values = lines.flat_map(str::split_whitespace).map(|tok| tok.parse::<f64>());
    let mut next = |what: &str| -> Result<f64> {
        values
            .next()
            .ok_or_else(|| Error::parse(format!("model file truncated at {what}")))?
            .map_err(|e| Error::parse(format!("{what}: {e}")))
    };
    let mut w1 = DMatrix::zeros(n_in, n_hidden);
    for j in 0..n_hidden {
        for k in 0..n_in {
            w1[(k, j)] = next("W1")?;
        }
    }
    let mut b1 = DVector::zeros(n_hidden);
    for j in 0..n_hidden {
        b1[j] = next("b1")?;
    }
    let mut w2 = DVector::zeros(n_hidden);
    for j in 0..n_hidden {
        w2[j] = next("W2")?;
    }
    let b2 = next("b2")?;
    if values.next().is_some() {
        return Err(Error::parse("trailing values in model file"));
    }
    let p = MlpParams { w1, b1, w2, b2, slope };
    p.validate()?;
    Ok(p)
}

/// Loss-curve CSV: epoch, train_l1, val_l1, lr.
pub fn write_loss_curve(path: &Path, curve: &[LossRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "train_l1", "val_l1", "lr"])?;
    for r in curve {
        w.write_record(&[r.epoch.to_string(), r.train_l1.to_string(), r.val_l1.to_string(), r.lr.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
