//! ReLU (with the three backward rules) and numerically-stable softmax.

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

/// Forward input of a ReLU, needed by the standard and guided backward rules.
#[derive(Debug, Clone)]
pub struct ReluCache<E: Element> {
    pub input: Tensor<E>,
}

/// Which gradients a ReLU lets through on the way back.
///
/// * `Standard`  — true gradient: upstream masked by forward positivity.
/// * `Deconvnet` — upstream masked by its own positivity (the printed
///   reconstruction rule `R^l = (R^{l+1} > 0) * R^{l+1}`).
/// * `Guided`    — both masks: negative gradients and gradients at inactive
///   units are filtered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReluMode {
    Standard,
    Deconvnet,
    Guided,
}

impl ReluMode {
    pub fn parse(s: &str) -> Result<ReluMode> {
        match s {
            "standard" => Ok(ReluMode::Standard),
            "deconvnet" => Ok(ReluMode::Deconvnet),
            "guided" => Ok(ReluMode::Guided),
            other => Err(Error::Config(format!(
                "unknown relu mode '{other}' (expected standard|deconvnet|guided)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ReluMode::Standard => "standard",
            ReluMode::Deconvnet => "deconvnet",
            ReluMode::Guided => "guided",
        }
    }
}

pub fn relu_forward<E: Element>(x: &Tensor<E>) -> (Tensor<E>, ReluCache<E>) {
    let y = x.map(|v| if v > E::zero() { v } else { E::zero() });
    (y, ReluCache { input: x.clone() })
}

/// Backward rules. `Deconvnet` needs no forward state; the other two modes
/// require the cache.
pub fn relu_backward<E: Element>(
    cache: Option<&ReluCache<E>>,
    upstream: &Tensor<E>,
    mode: ReluMode,
) -> Result<Tensor<E>> {
    let forward_mask = |c: &ReluCache<E>| -> Result<()> {
        if c.input.shape() != upstream.shape() {
            return Err(Error::Contract(format!(
                "upstream shaped {}, cached forward input {}",
                upstream.shape(),
                c.input.shape()
            )));
        }
        Ok(())
    };
    match mode {
        ReluMode::Standard => {
            let c = cache.ok_or_else(|| {
                Error::Contract("standard relu backward requires the forward cache".into())
            })?;
            forward_mask(c)?;
            let mut out = upstream.clone();
            for (o, &f) in out.data_mut().iter_mut().zip(c.input.data().iter()) {
                if f <= E::zero() {
                    *o = E::zero();
                }
            }
            Ok(out)
        }
        ReluMode::Deconvnet => {
            let mut out = upstream.clone();
            for o in out.data_mut().iter_mut() {
                if *o <= E::zero() {
                    *o = E::zero();
                }
            }
            Ok(out)
        }
        ReluMode::Guided => {
            let c = cache.ok_or_else(|| {
                Error::Contract("guided relu backward requires the forward cache".into())
            })?;
            forward_mask(c)?;
            let mut out = upstream.clone();
            for (o, &f) in out.data_mut().iter_mut().zip(c.input.data().iter()) {
                if f <= E::zero() || *o <= E::zero() {
                    *o = E::zero();
                }
            }
            Ok(out)
        }
    }
}

/// Softmax output, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct SoftmaxCache<E: Element> {
    pub probs: Tensor<E>,
}

/// Row-wise softmax over the channel axis of an (n, K, 1, 1) tensor.
/// The maximum logit is subtracted first so magnitude-1000 logits are safe.
pub fn softmax_forward<E: Element>(logits: &Tensor<E>) -> Result<(Tensor<E>, SoftmaxCache<E>)> {
    let s = logits.shape();
    if s.h != 1 || s.w != 1 {
        return Err(Error::Shape(format!(
            "softmax expects (n, K, 1, 1) logits, got {s}"
        )));
    }
    let mut y = Tensor::zeros(s);
    for n in 0..s.n {
        let row = logits.batch(n);
        let mut max = row[0];
        for &v in row.iter().skip(1) {
            if v > max {
                max = v;
            }
        }
        let chw = s.c;
        let dst = &mut y.data_mut()[n * chw..(n + 1) * chw];
        let mut denom = E::zero();
        for (slot, &v) in dst.iter_mut().zip(row.iter()) {
            let e = (v - max).exp();
            *slot = e;
            denom += e;
        }
        let inv = denom.recip();
        for slot in dst.iter_mut() {
            *slot *= inv;
        }
    }
    let cache = SoftmaxCache { probs: y.clone() };
    Ok((y, cache))
}

/// Jacobian-vector product of softmax: d_z = p .* (up - sum(up .* p)) per row.
pub fn softmax_backward<E: Element>(
    cache: &SoftmaxCache<E>,
    upstream: &Tensor<E>,
) -> Result<Tensor<E>> {
    let s = cache.probs.shape();
    if upstream.shape() != s {
        return Err(Error::Contract(format!(
            "upstream shaped {}, cache expects {}",
            upstream.shape(),
            s
        )));
    }
    let mut out = Tensor::zeros(s);
    for n in 0..s.n {
        let p = cache.probs.batch(n);
        let up = upstream.batch(n);
        let mut inner = E::zero();
        for (&g, &pi) in up.iter().zip(p.iter()) {
            inner += g * pi;
        }
        let dst = &mut out.data_mut()[n * s.c..(n + 1) * s.c];
        for ((slot, &g), &pi) in dst.iter_mut().zip(up.iter()).zip(p.iter()) {
            *slot = pi * (g - inner);
        }
    }
    Ok(out)
}
