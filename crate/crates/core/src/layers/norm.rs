//! Batch normalization.

use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::tensor::{Element, Tensor};

/// Per-channel batch-norm parameters and inference statistics.
///
/// `gamma`/`beta` are trainable; `running_mean`/`running_var` are exponential
/// moving averages of batch statistics collected in train mode. Defaults:
/// epsilon 1e-3, momentum 0.99 (fraction of the old running value kept).
#[derive(Debug, Clone)]
pub struct BatchNormState<E: Element> {
    pub gamma: Tensor<E>,
    pub beta: Tensor<E>,
    pub running_mean: Tensor<E>,
    pub running_var: Tensor<E>,
    pub epsilon: f64,
    pub momentum: f64,
}

pub const BN_DEFAULT_EPSILON: f64 = 1e-3;
pub const BN_DEFAULT_MOMENTUM: f64 = 0.99;

impl<E: Element> BatchNormState<E> {
    pub fn new(channels: usize) -> Result<BatchNormState<E>> {
        let ones = Tensor::vector(vec![E::one(); channels])?;
        let zeros = Tensor::vector(vec![E::zero(); channels])?;
        Ok(BatchNormState {
            gamma: ones.clone(),
            beta: zeros.clone(),
            running_mean: zeros,
            running_var: ones,
            epsilon: BN_DEFAULT_EPSILON,
            momentum: BN_DEFAULT_MOMENTUM,
        })
    }

    pub fn channels(&self) -> usize {
        self.gamma.shape().c
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.channels();
        for (name, t) in [
            ("gamma", &self.gamma),
            ("beta", &self.beta),
            ("running_mean", &self.running_mean),
            ("running_var", &self.running_var),
        ] {
            if t.shape().c != c || t.shape().len() != c {
                return Err(Error::Shape(format!(
                    "batch-norm {name} shaped {}, expected vector of {c}",
                    t.shape()
                )));
            }
        }
        if self.running_var.data().iter().any(|&v| v < E::zero()) {
            return Err(Error::Contract("running_var has a negative entry".into()));
        }
        if self.epsilon <= 0.0 {
            return Err(Error::Contract("batch-norm epsilon must be > 0".into()));
        }
        Ok(())
    }
}

/// Saved state for the backward pass. `xhat` is the normalized input under
/// whichever statistics the forward pass used.
#[derive(Debug, Clone)]
pub struct BatchNormCache<E: Element> {
    pub mode: Mode,
    pub xhat: Tensor<E>,
    pub inv_std: Vec<E>,
    pub gamma: Tensor<E>,
    /// Elements averaged per channel (n*h*w).
    pub count: usize,
}

/// Normalize per channel. Train mode uses batch statistics over (n, h, w)
/// and folds them into the running averages; infer mode uses the running
/// statistics only.
pub fn batchnorm_forward<E: Element>(
    x: &Tensor<E>,
    state: &mut BatchNormState<E>,
    mode: Mode,
) -> Result<(Tensor<E>, BatchNormCache<E>)> {
    state.validate()?;
    let s = x.shape();
    let c = state.channels();
    if s.c != c {
        return Err(Error::Shape(format!(
            "input has {} channels, batch-norm state has {c}",
            s.c
        )));
    }
    let count = s.n * s.h * s.w;
    let eps = E::from_f64(state.epsilon);

    let (mean, var) = match mode {
        Mode::Train => {
            let mut mean = vec![E::zero(); c];
            let mut var = vec![E::zero(); c];
            let inv_count = E::from_f64(1.0 / count as f64);
            for ch in 0..c {
                let mut acc = E::zero();
                for n in 0..s.n {
                    for &v in x.plane(n, ch) {
                        acc += v;
                    }
                }
                mean[ch] = acc * inv_count;
            }
            for ch in 0..c {
                let mut acc = E::zero();
                for n in 0..s.n {
                    for &v in x.plane(n, ch) {
                        let d = v - mean[ch];
                        acc += d * d;
                    }
                }
                var[ch] = acc * inv_count; // biased estimator, as usual for BN
            }
            let keep = E::from_f64(state.momentum);
            let take = E::one() - keep;
            for ch in 0..c {
                let rm = state.running_mean.data()[ch] * keep + mean[ch] * take;
                let rv = state.running_var.data()[ch] * keep + var[ch] * take;
                state.running_mean.data_mut()[ch] = rm;
                state.running_var.data_mut()[ch] = rv;
            }
            (mean, var)
        }
        Mode::Infer => (
            state.running_mean.data().to_vec(),
            state.running_var.data().to_vec(),
        ),
    };

    let inv_std: Vec<E> = var.iter().map(|&v| (v + eps).sqrt().recip()).collect();
    let mut xhat = Tensor::zeros(s);
    let mut y = Tensor::zeros(s);
    for n in 0..s.n {
        for ch in 0..c {
            let g = state.gamma.data()[ch];
            let b = state.beta.data()[ch];
            let m = mean[ch];
            let is = inv_std[ch];
            let src = x.plane(n, ch);
            let xh = xhat.plane_mut(n, ch);
            for (slot, &v) in xh.iter_mut().zip(src.iter()) {
                *slot = (v - m) * is;
            }
            let dst = y.plane_mut(n, ch);
            for (slot, &v) in dst.iter_mut().zip(src.iter()) {
                *slot = (v - m) * is * g + b;
            }
        }
    }

    let cache = BatchNormCache {
        mode,
        xhat,
        inv_std,
        gamma: state.gamma.clone(),
        count,
    };
    Ok((y, cache))
}

/// Gradients of a batch-norm layer.
#[derive(Debug, Clone)]
pub struct BatchNormGrads<E: Element> {
    pub d_input: Tensor<E>,
    pub d_gamma: Tensor<E>,
    pub d_beta: Tensor<E>,
}

/// Backward pass. Train-mode input gradients account for the dependence of
/// the batch statistics on the input; infer mode is a fixed per-channel
/// affine map.
pub fn batchnorm_backward<E: Element>(
    cache: &BatchNormCache<E>,
    upstream: &Tensor<E>,
) -> Result<BatchNormGrads<E>> {
    let s = cache.xhat.shape();
    if upstream.shape() != s {
        return Err(Error::Contract(format!(
            "upstream shaped {}, cache expects {}",
            upstream.shape(),
            s
        )));
    }
    let c = s.c;
    let mut d_gamma = vec![E::zero(); c];
    let mut d_beta = vec![E::zero(); c];
    for ch in 0..c {
        for n in 0..s.n {
            let up = upstream.plane(n, ch);
            let xh = cache.xhat.plane(n, ch);
            for (&g, &h) in up.iter().zip(xh.iter()) {
                d_gamma[ch] += g * h;
                d_beta[ch] += g;
            }
        }
    }

    let mut d_input = Tensor::zeros(s);
    match cache.mode {
        Mode::Infer => {
            for n in 0..s.n {
                for ch in 0..c {
                    let scale = cache.gamma.data()[ch] * cache.inv_std[ch];
                    let up = upstream.plane(n, ch);
                    let dst = d_input.plane_mut(n, ch);
                    for (slot, &g) in dst.iter_mut().zip(up.iter()) {
                        *slot = g * scale;
                    }
                }
            }
        }
        Mode::Train => {
            let inv_count = E::from_f64(1.0 / cache.count as f64);
            for n in 0..s.n {
                for ch in 0..c {
                    let scale = cache.gamma.data()[ch] * cache.inv_std[ch];
                    let mean_up = d_beta[ch] * inv_count;
                    let mean_up_xhat = d_gamma[ch] * inv_count;
                    let up = upstream.plane(n, ch);
                    let xh = cache.xhat.plane(n, ch);
                    let dst = d_input.plane_mut(n, ch);
                    for ((slot, &g), &h) in dst.iter_mut().zip(up.iter()).zip(xh.iter()) {
                        *slot = scale * (g - mean_up - h * mean_up_xhat);
                    }
                }
            }
        }
    }

    Ok(BatchNormGrads {
        d_input,
        d_gamma: Tensor::vector(d_gamma)?,
        d_beta: Tensor::vector(d_beta)?,
    })
}
