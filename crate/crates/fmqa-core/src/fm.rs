//! Degree-2 factorization machine over binary feature vectors.
//!
//! A feature vector is the concatenation of a user code and an item code.
//! The model scores it as
//!
//! ```text
//! y(x) = w0 + sum_i w[i] x[i] + sum_{i<j} <v_i, v_j> x[i] x[j]
//! ```
//!
//! with one latent vector `v_i` per feature. [`FmModel::predict`] evaluates
//! the pairwise sum in time linear in the number of features by rewriting it
//! as `0.5 * sum_f ((sum_i v_if x_i)^2 - sum_i v_if^2 x_i^2)`;
//! [`FmModel::predict_naive`] keeps the quadratic double loop as an oracle.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};

use crate::data::RatingsDataset;
use crate::encoding::{ItemCodebook, UserCodebook};
use crate::error::{Error, Result};
use crate::rng::{seeded_rng, PURPOSE_TRAIN_INIT, PURPOSE_TRAIN_SHUFFLE};

/// Degree-2 factorization machine. Latent vectors are stored feature-major:
/// feature `j` owns the contiguous slice `v[j*k..(j+1)*k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FmModel {
    w0: f64,
    w: Vec<f64>,
    v: Vec<f64>,
    user_bits: usize,
    item_bits: usize,
    latent_dim: usize,
}

impl FmModel {
    /// Model with every parameter zero.
    pub fn zeroed(user_bits: usize, item_bits: usize, latent_dim: usize) -> Self {
        let d = user_bits + item_bits;
        FmModel {
            w0: 0.0,
            w: vec![0.0; d],
            v: vec![0.0; d * latent_dim],
            user_bits,
            item_bits,
            latent_dim,
        }
    }

    /// Fresh model for training: `w0 = 0`, `w = 0`, latent entries drawn
    /// i.i.d. from `Normal(0, init_std^2)` in feature-major order.
    pub fn random_init(
        user_bits: usize,
        item_bits: usize,
        latent_dim: usize,
        init_std: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(init_std > 0.0 && init_std.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "init_std must be positive and finite, got {init_std}"
            )));
        }
        let mut model = Self::zeroed(user_bits, item_bits, latent_dim);
        let normal = Normal::new(0.0, init_std)
            .map_err(|e| Error::InvalidConfig(format!("latent init distribution: {e}")))?;
        let mut rng = seeded_rng(seed, PURPOSE_TRAIN_INIT, 0);
        for slot in model.v.iter_mut() {
            *slot = normal.sample(&mut rng);
        }
        Ok(model)
    }

    pub fn from_parts(
        w0: f64,
        w: Vec<f64>,
        v: Vec<f64>,
        user_bits: usize,
        item_bits: usize,
        latent_dim: usize,
    ) -> Result<Self> {
        let d = user_bits + item_bits;
        if w.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: w.len(),
            });
        }
        if v.len() != d * latent_dim {
            return Err(Error::DimensionMismatch {
                expected: d * latent_dim,
                got: v.len(),
            });
        }
        Ok(FmModel {
            w0,
            w,
            v,
            user_bits,
            item_bits,
            latent_dim,
        })
    }

    pub fn user_bits(&self) -> usize {
        self.user_bits
    }

    pub fn item_bits(&self) -> usize {
        self.item_bits
    }

    pub fn num_features(&self) -> usize {
        self.user_bits + self.item_bits
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn w0(&self) -> f64 {
        self.w0
    }

    pub fn linear_weights(&self) -> &[f64] {
        &self.w
    }

    /// Latent vector of feature `j`.
    pub fn latent(&self, j: usize) -> &[f64] {
        &self.v[j * self.latent_dim..(j + 1) * self.latent_dim]
    }

    /// Latent matrix in feature-major layout.
    pub fn latent_matrix(&self) -> &[f64] {
        &self.v
    }

    /// Pairwise interaction weight `<v_i, v_j>` between two features.
    pub fn interaction(&self, i: usize, j: usize) -> f64 {
        let a = self.latent(i);
        let b = self.latent(j);
        let mut dot = 0.0;
        for f in 0..self.latent_dim {
            dot += a[f] * b[f];
        }
        dot
    }

    pub fn is_finite(&self) -> bool {
        self.w0.is_finite()
            && self.w.iter().all(|x| x.is_finite())
            && self.v.iter().all(|x| x.is_finite())
    }

    fn check_features(&self, x: &[u8]) -> Result<()> {
        if x.len() != self.num_features() {
            return Err(Error::DimensionMismatch {
                expected: self.num_features(),
                got: x.len(),
            });
        }
        for (index, &b) in x.iter().enumerate() {
            if b > 1 {
                return Err(Error::NonBinaryEntry {
                    index,
                    value: b as f64,
                });
            }
        }
        Ok(())
    }

    /// Predicted rating for a binary feature vector, evaluated in O(k·d).
    pub fn predict(&self, x: &[u8]) -> Result<f64> {
        self.check_features(x)?;
        Ok(self.predict_valid(x))
    }

    pub(crate) fn predict_valid(&self, x: &[u8]) -> f64 {
        let k = self.latent_dim;
        let mut sums = vec![0.0f64; k];
        self.predict_with_scratch(x, &mut sums)
    }

    /// Prediction with a caller-provided `latent_dim`-sized scratch buffer,
    /// for hot loops. `x` must already be validated.
    pub(crate) fn predict_with_scratch(&self, x: &[u8], sums: &mut [f64]) -> f64 {
        sums.fill(0.0);
        let mut linear = 0.0;
        let mut square_norm = 0.0;
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0 {
                continue;
            }
            linear += self.w[j];
            for (acc, &vjf) in sums.iter_mut().zip(self.latent(j)) {
                *acc += vjf;
                square_norm += vjf * vjf;
            }
        }
        let mut square_of_sum = 0.0;
        for &s in sums.iter() {
            square_of_sum += s * s;
        }
        self.w0 + linear + 0.5 * (square_of_sum - square_norm)
    }

    /// Reference implementation with the explicit `i < j` double loop.
    pub fn predict_naive(&self, x: &[u8]) -> Result<f64> {
        self.check_features(x)?;
        let d = self.num_features();
        let mut y = self.w0;
        for i in 0..d {
            y += self.w[i] * x[i] as f64;
        }
        for i in 0..d {
            for j in (i + 1)..d {
                y += self.interaction(i, j) * (x[i] as f64) * (x[j] as f64);
            }
        }
        Ok(y)
    }
}

/// Hyperparameters for [`train_sgd`].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub latent_dim: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// L2 penalty on the intercept (0 leaves it unregularized).
    pub l2_w0: f64,
    /// L2 penalty on the linear weights.
    pub l2_w: f64,
    /// L2 penalty on the latent matrix.
    pub l2_v: f64,
    pub init_std: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            latent_dim: 200,
            learning_rate: 0.01,
            epochs: 30,
            l2_w0: 0.0,
            l2_w: 1e-4,
            l2_v: 1e-4,
            init_std: 0.01,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(Error::InvalidConfig("latent_dim must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        for (name, value) in [
            ("l2_w0", self.l2_w0),
            ("l2_w", self.l2_w),
            ("l2_v", self.l2_v),
        ] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be non-negative and finite, got {value}"
                )));
            }
        }
        if !(self.init_std > 0.0 && self.init_std.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "init_std must be positive and finite, got {}",
                self.init_std
            )));
        }
        Ok(())
    }
}

/// Trained model plus the training-set RMSE trajectory.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: FmModel,
    /// Entry 0 is the RMSE of the freshly initialized model; entry `e` is the
    /// RMSE after epoch `e`.
    pub rmse_by_epoch: Vec<f64>,
}

impl TrainOutcome {
    pub fn initial_rmse(&self) -> f64 {
        self.rmse_by_epoch[0]
    }

    pub fn final_rmse(&self) -> f64 {
        *self.rmse_by_epoch.last().expect("at least the initial entry")
    }
}

/// Per-example objective whose gradient drives the SGD step:
/// `(y(x) - target)^2 + l2_w0*w0^2 + l2_w*|w|^2 + l2_v*|V|^2`.
pub fn example_loss(model: &FmModel, x: &[u8], target: f64, config: &TrainConfig) -> Result<f64> {
    let y = model.predict(x)?;
    let mut loss = (y - target) * (y - target);
    loss += config.l2_w0 * model.w0 * model.w0;
    loss += config.l2_w * model.w.iter().map(|w| w * w).sum::<f64>();
    loss += config.l2_v * model.v.iter().map(|v| v * v).sum::<f64>();
    Ok(loss)
}

/// Dense gradient of [`example_loss`] with respect to every parameter.
/// Returned as (d/dw0, d/dw, d/dV) with `V` in feature-major layout.
pub fn loss_gradient(
    model: &FmModel,
    x: &[u8],
    target: f64,
    config: &TrainConfig,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    model.check_features(x)?;
    let k = model.latent_dim;
    let d = model.num_features();
    let mut sums = vec![0.0f64; k];
    let y = model.predict_with_scratch(x, &mut sums);
    let err2 = 2.0 * (y - target);
    let g_w0 = err2 + 2.0 * config.l2_w0 * model.w0;
    let mut g_w = vec![0.0f64; d];
    let mut g_v = vec![0.0f64; d * k];
    for j in 0..d {
        let xj = x[j] as f64;
        g_w[j] = err2 * xj + 2.0 * config.l2_w * model.w[j];
        let vj = model.latent(j);
        let gj = &mut g_v[j * k..(j + 1) * k];
        for f in 0..k {
            gj[f] = err2 * xj * (sums[f] - vj[f]) + 2.0 * config.l2_v * vj[f];
        }
    }
    Ok((g_w0, g_w, g_v))
}

fn check_codebooks(
    data: &RatingsDataset,
    users: &UserCodebook,
    items: &ItemCodebook,
) -> Result<()> {
    if users.user_ids() != data.user_ids() {
        return Err(Error::InvalidConfig(
            "user codebook does not match the dataset's user ids".into(),
        ));
    }
    if items.item_ids() != data.item_ids() {
        return Err(Error::InvalidConfig(
            "item codebook does not match the dataset's item ids".into(),
        ));
    }
    Ok(())
}

fn encode_all(users: &UserCodebook, items: &ItemCodebook) -> Result<(Vec<Vec<u8>>, Vec<Vec<u8>>)> {
    let user_codes = (0..users.num_users())
        .map(|u| users.encode(u))
        .collect::<Result<Vec<_>>>()?;
    let item_codes = (0..items.num_items())
        .map(|i| items.primary_code(i))
        .collect::<Result<Vec<_>>>()?;
    Ok((user_codes, item_codes))
}

/// Trains a factorization machine by seeded SGD on squared error.
///
/// Examples are visited in a fresh seeded shuffle each epoch; updates apply
/// the exact gradient of [`example_loss`] at the pre-step parameters. The
/// run is fully determined by `config.seed`.
pub fn train_sgd(
    data: &RatingsDataset,
    users: &UserCodebook,
    items: &ItemCodebook,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Empty { what: "ratings" });
    }
    check_codebooks(data, users, items)?;
    let (user_codes, item_codes) = encode_all(users, items)?;

    let k = config.latent_dim;
    let d = users.n_bits() + items.n_bits();
    let mut model = FmModel::random_init(
        users.n_bits(),
        items.n_bits(),
        k,
        config.init_std,
        config.seed,
    )?;
    let mut rmse_by_epoch = Vec::with_capacity(config.epochs + 1);
    rmse_by_epoch.push(rmse_with_codes(&model, data, &user_codes, &item_codes));

    let lr = config.learning_rate;
    let mut shuffle_rng = seeded_rng(config.seed, PURPOSE_TRAIN_SHUFFLE, 0);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut x = vec![0u8; d];
    let mut sums = vec![0.0f64; k];

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        for &row in &order {
            let r = data.ratings()[row];
            let u = &user_codes[r.user as usize];
            let m = &item_codes[r.item as usize];
            x[..u.len()].copy_from_slice(u);
            x[u.len()..].copy_from_slice(m);

            let y = model.predict_with_scratch(&x, &mut sums);
            let err2 = 2.0 * (y - r.value);
            model.w0 -= lr * (err2 + 2.0 * config.l2_w0 * model.w0);
            for j in 0..d {
                let xj = x[j] as f64;
                model.w[j] -= lr * (err2 * xj + 2.0 * config.l2_w * model.w[j]);
                let vj = &mut model.v[j * k..(j + 1) * k];
                if xj == 0.0 {
                    if config.l2_v > 0.0 {
                        let decay = lr * 2.0 * config.l2_v;
                        for slot in vj.iter_mut() {
                            *slot -= decay * *slot;
                        }
                    }
                } else {
                    for (slot, &s) in vj.iter_mut().zip(sums.iter()) {
                        let g = err2 * (s - *slot) + 2.0 * config.l2_v * *slot;
                        *slot -= lr * g;
                    }
                }
            }
        }
        if !model.is_finite() {
            return Err(Error::NonFiniteTraining { epoch });
        }
        rmse_by_epoch.push(rmse_with_codes(&model, data, &user_codes, &item_codes));
    }

    Ok(TrainOutcome {
        model,
        rmse_by_epoch,
    })
}

fn rmse_with_codes(
    model: &FmModel,
    data: &RatingsDataset,
    user_codes: &[Vec<u8>],
    item_codes: &[Vec<u8>],
) -> f64 {
    let d = model.num_features();
    let mut x = vec![0u8; d];
    let mut sums = vec![0.0f64; model.latent_dim];
    let mut total = 0.0;
    for r in data.ratings() {
        let u = &user_codes[r.user as usize];
        let m = &item_codes[r.item as usize];
        x[..u.len()].copy_from_slice(u);
        x[u.len()..].copy_from_slice(m);
        let e = model.predict_with_scratch(&x, &mut sums) - r.value;
        total += e * e;
    }
    (total / data.len() as f64).sqrt()
}

/// Root-mean-squared prediction error of `model` on `data`.
pub fn rmse(
    model: &FmModel,
    data: &RatingsDataset,
    users: &UserCodebook,
    items: &ItemCodebook,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty { what: "ratings" });
    }
    check_codebooks(data, users, items)?;
    if model.user_bits != users.n_bits() || model.item_bits != items.n_bits() {
        return Err(Error::DimensionMismatch {
            expected: model.num_features(),
            got: users.n_bits() + items.n_bits(),
        });
    }
    let (user_codes, item_codes) = encode_all(users, items)?;
    Ok(rmse_with_codes(model, data, &user_codes, &item_codes))
}
