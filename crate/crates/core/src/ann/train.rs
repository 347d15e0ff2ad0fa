//! Mini-batch Adam training on mean squared error, in double precision.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{evaluate, Activation, AnnError, AnnModel, Arch, Metrics};
use crate::integrator::Dataset;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub rng_seed: u64,
    /// Stop early once the epoch's mean training loss falls below this.
    pub target_loss: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 200,
            batch_size: 64,
            rng_seed: 42,
            target_loss: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), AnnError> {
        let bad = |m: &str| Err(AnnError::BadConfig(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0 && self.beta2 > 0.0 && self.beta2 < 1.0) {
            return bad("beta1 and beta2 must lie in (0, 1)");
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be positive");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be positive");
        }
        Ok(())
    }
}

/// Adam optimizer state over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, cfg: &TrainConfig) -> Self {
        Self {
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.epsilon,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Double-precision twin of [`AnnModel`] with parameters in one flat vector
/// laid out as w1, b1, w2, b2.
#[derive(Debug, Clone)]
pub struct Network64 {
    pub arch: Arch,
    pub activation: Activation,
    pub params: Vec<f64>,
}

impl Network64 {
    /// Glorot-uniform weights, zero biases.
    pub fn init(arch: Arch, activation: Activation, rng: &mut impl Rng) -> Self {
        let mut params = vec![0.0; arch.param_count()];
        let lim1 = (6.0 / (arch.input + arch.hidden) as f64).sqrt();
        let lim2 = (6.0 / (arch.hidden + arch.output) as f64).sqrt();
        let (w1, rest) = params.split_at_mut(arch.hidden * arch.input);
        let (_b1, rest) = rest.split_at_mut(arch.hidden);
        let (w2, _b2) = rest.split_at_mut(arch.output * arch.hidden);
        w1.iter_mut().for_each(|w| *w = rng.gen_range(-lim1..lim1));
        w2.iter_mut().for_each(|w| *w = rng.gen_range(-lim2..lim2));
        Self {
            arch,
            activation,
            params,
        }
    }

    fn offsets(&self) -> [usize; 4] {
        let a = self.arch;
        let b1 = a.hidden * a.input;
        let w2 = b1 + a.hidden;
        let b2 = w2 + a.output * a.hidden;
        [0, b1, w2, b2]
    }

    /// Mean squared error over the rows in `rows` (averaged over rows and
    /// outputs), accumulating its gradient into `grad`.
    pub fn loss_and_grad(
        &self,
        inputs: &[f32],
        targets: &[f32],
        rows: &[usize],
        grad: &mut [f64],
    ) -> f64 {
        let Arch {
            input: ni,
            hidden: nh,
            output: no,
        } = self.arch;
        let [o_w1, o_b1, o_w2, o_b2] = self.offsets();
        let p = &self.params;
        grad.fill(0.0);
        let mut pre = vec![0.0; nh];
        let mut hid = vec![0.0; nh];
        let mut dh = vec![0.0; nh];
        let scale = 1.0 / (rows.len() * no) as f64;
        let mut loss = 0.0;
        for &r in rows {
            let x = &inputs[r * ni..(r + 1) * ni];
            let t = &targets[r * no..(r + 1) * no];
            for i in 0..nh {
                let row = &p[o_w1 + i * ni..o_w1 + (i + 1) * ni];
                let s: f64 =
                    row.iter().zip(x).map(|(w, v)| w * *v as f64).sum::<f64>() + p[o_b1 + i];
                pre[i] = s;
                hid[i] = self.activation.apply(s);
            }
            dh.fill(0.0);
            for k in 0..no {
                let row = &p[o_w2 + k * nh..o_w2 + (k + 1) * nh];
                let y: f64 = row.iter().zip(&hid).map(|(w, h)| w * h).sum::<f64>() + p[o_b2 + k];
                let e = y - t[k] as f64;
                loss += e * e;
                let dy = 2.0 * e * scale;
                grad[o_b2 + k] += dy;
                for i in 0..nh {
                    grad[o_w2 + k * nh + i] += dy * hid[i];
                    dh[i] += dy * row[i];
                }
            }
            for i in 0..nh {
                let dz = dh[i] * self.activation.derivative(pre[i]);
                grad[o_b1 + i] += dz;
                for j in 0..ni {
                    grad[o_w1 + i * ni + j] += dz * x[j] as f64;
                }
            }
        }
        loss * scale
    }

    pub fn to_model(
        &self,
        norm_stats: Vec<crate::integrator::NormStats>,
        rng_seed: u64,
    ) -> AnnModel {
        let [o_w1, o_b1, o_w2, o_b2] = self.offsets();
        let cast = |s: &[f64]| s.iter().map(|v| *v as f32).collect::<Vec<f32>>();
        let p = &self.params;
        AnnModel {
            arch: self.arch,
            w1: cast(&p[o_w1..o_b1]),
            b1: cast(&p[o_b1..o_w2]),
            w2: cast(&p[o_w2..o_b2]),
            b2: cast(&p[o_b2..]),
            activation: self.activation,
            norm_stats,
            rng_seed,
        }
    }
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct Trained {
    pub model: AnnModel,
    /// Metrics of the single-precision model on the test split.
    pub metrics: Metrics,
    /// Mean training loss per completed epoch.
    pub loss_history: Vec<f64>,
}

/// Trains on the training split of `dataset` and evaluates on its test
/// split. Deterministic for a given `cfg.rng_seed`.
pub fn train(
    dataset: &Dataset,
    arch: Arch,
    activation: Activation,
    cfg: &TrainConfig,
) -> Result<Trained, AnnError> {
    cfg.validate()?;
    if arch.input != dataset.dim || arch.output != dataset.dim {
        return Err(AnnError::ShapeMismatch(format!(
            "architecture {arch} does not fit {}-dimensional data",
            dataset.dim
        )));
    }
    if arch.hidden == 0 {
        return Err(AnnError::ShapeMismatch(
            "hidden layer must have at least one neuron".into(),
        ));
    }
    if dataset.train_count == 0 {
        return Err(AnnError::EmptySplit("training"));
    }
    if dataset.test_count() == 0 {
        return Err(AnnError::EmptySplit("test"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut net = Network64::init(arch, activation, &mut rng);
    let mut adam = Adam::new(net.params.len(), cfg);
    let mut grad = vec![0.0; net.params.len()];
    let (xs, ys) = dataset.train();
    let mut order: Vec<usize> = (0..dataset.train_count).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let loss = net.loss_and_grad(xs, ys, batch, &mut grad);
            if !loss.is_finite() {
                return Err(AnnError::Diverged { epoch, loss });
            }
            total += loss * batch.len() as f64;
            adam.step(&mut net.params, &grad);
        }
        let mean = total / dataset.train_count as f64;
        log::debug!("epoch {epoch}: train loss {mean:.3e}");
        history.push(mean);
        if cfg.target_loss.is_some_and(|t| mean <= t) {
            break;
        }
    }
    if net.params.iter().any(|v| !v.is_finite()) {
        return Err(AnnError::Diverged {
            epoch: history.len(),
            loss: f64::NAN,
        });
    }

    let model = net.to_model(dataset.norm_stats.clone(), cfg.rng_seed);
    let (tx, ty) = dataset.test();
    let metrics = evaluate(&model, tx, ty)?;
    Ok(Trained {
        model,
        metrics,
        loss_history: history,
    })
}
