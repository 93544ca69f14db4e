//! Standard, depth-wise, point-wise, and separable convolutions.
//!
//! All kernels accumulate in a fixed (channel, ky, kx) order so results match
//! the naive nested-loop definition exactly in either precision. Batch
//! elements are independent and run in parallel; within one element the
//! summation order never depends on thread scheduling.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::layers::ConvSpec;
use crate::tensor::{Element, Shape, Tensor};

/// Saved forward state for a convolution backward pass.
#[derive(Debug, Clone)]
pub struct ConvCache<E: Element> {
    pub input: Tensor<E>,
    pub weights: Tensor<E>,
    pub has_bias: bool,
    pub spec: ConvSpec,
    pub out_hw: (usize, usize),
}

/// Gradients produced by a convolution backward pass.
#[derive(Debug, Clone)]
pub struct ConvGrads<E: Element> {
    pub d_input: Tensor<E>,
    pub d_weights: Tensor<E>,
    pub d_bias: Option<Tensor<E>>,
}

#[inline]
fn dot<E: Element>(a: &[E], b: &[E]) -> E {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = E::zero();
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// Gather the receptive field of every output position of batch element `n`
/// into rows of length c*d*d, zero-filling padded cells. Column order is
/// (channel, ky, kx), the accumulation order of the whole crate.
fn im2col<E: Element>(
    x: &Tensor<E>,
    n: usize,
    d: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
) -> Vec<E> {
    let s = x.shape();
    let cols = s.c * d * d;
    let mut patches = vec![E::zero(); oh * ow * cols];
    for oy in 0..oh {
        for ox in 0..ow {
            let row = (oy * ow + ox) * cols;
            for c in 0..s.c {
                let plane = x.plane(n, c);
                for ky in 0..d {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= s.h as isize {
                        continue;
                    }
                    let src = iy as usize * s.w;
                    for kx in 0..d {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix < 0 || ix >= s.w as isize {
                            continue;
                        }
                        patches[row + (c * d + ky) * d + kx] = plane[src + ix as usize];
                    }
                }
            }
        }
    }
    patches
}

fn check_conv_args<E: Element>(
    x: &Tensor<E>,
    weights: &Tensor<E>,
    bias: Option<&Tensor<E>>,
    spec: &ConvSpec,
) -> Result<(usize, usize)> {
    spec.validate()?;
    let xs = x.shape();
    if xs.c != spec.in_channels {
        return Err(Error::Shape(format!(
            "input has {} channels, spec expects {}",
            xs.c, spec.in_channels
        )));
    }
    let want = Shape::new(spec.out_channels, spec.in_channels, spec.kernel, spec.kernel)?;
    if weights.shape() != want {
        return Err(Error::Shape(format!(
            "weights shaped {}, spec expects {}",
            weights.shape(),
            want
        )));
    }
    match (bias, spec.has_bias) {
        (Some(b), true) => {
            if b.shape() != Shape::vector(spec.out_channels)? {
                return Err(Error::Shape(format!(
                    "bias shaped {}, expected vector of {}",
                    b.shape(),
                    spec.out_channels
                )));
            }
        }
        (None, false) => {}
        (Some(_), false) => {
            return Err(Error::Contract("bias given but spec.has_bias is false".into()))
        }
        (None, true) => {
            return Err(Error::Contract("spec.has_bias set but no bias given".into()))
        }
    }
    spec.out_hw(xs.h, xs.w)
}

/// Standard 2-D convolution (cross-correlation, as everywhere in deep
/// learning). Output pixel (n, o, oy, ox) is the (channel, ky, kx)-ordered
/// dot product of the kernel with the receptive field, plus bias.
pub fn conv2d_forward<E: Element>(
    x: &Tensor<E>,
    weights: &Tensor<E>,
    bias: Option<&Tensor<E>>,
    spec: &ConvSpec,
) -> Result<(Tensor<E>, ConvCache<E>)> {
    let (oh, ow) = check_conv_args(x, weights, bias, spec)?;
    let xs = x.shape();
    let n_out = spec.out_channels;
    let cols = spec.in_channels * spec.kernel * spec.kernel;
    let out_shape = Shape::new(xs.n, n_out, oh, ow)?;
    let mut y = Tensor::zeros(out_shape);

    let wdata = weights.data();
    let per_batch = n_out * oh * ow;
    y.data_mut()
        .par_chunks_mut(per_batch)
        .enumerate()
        .for_each(|(n, out_n)| {
            let patches = im2col(x, n, spec.kernel, spec.stride, spec.pad(), oh, ow);
            for o in 0..n_out {
                let w_row = &wdata[o * cols..(o + 1) * cols];
                let b = bias.map_or(E::zero(), |b| b.data()[o]);
                let out_plane = &mut out_n[o * oh * ow..(o + 1) * oh * ow];
                for (p, slot) in out_plane.iter_mut().enumerate() {
                    let acc = dot(w_row, &patches[p * cols..(p + 1) * cols]);
                    *slot = if spec.has_bias { acc + b } else { acc };
                }
            }
        });

    let cache = ConvCache {
        input: x.clone(),
        weights: weights.clone(),
        has_bias: spec.has_bias,
        spec: *spec,
        out_hw: (oh, ow),
    };
    Ok((y, cache))
}

/// Backward pass of `conv2d_forward`.
pub fn conv2d_backward<E: Element>(
    cache: &ConvCache<E>,
    upstream: &Tensor<E>,
) -> Result<ConvGrads<E>> {
    let spec = &cache.spec;
    let xs = cache.input.shape();
    let (oh, ow) = cache.out_hw;
    let expect = Shape::new(xs.n, spec.out_channels, oh, ow)?;
    if upstream.shape() != expect {
        return Err(Error::Contract(format!(
            "upstream shaped {}, cache expects {}",
            upstream.shape(),
            expect
        )));
    }
    let d = spec.kernel;
    let pad = spec.pad() as isize;
    let stride = spec.stride;
    let wdata = cache.weights.data();

    // d_input: each batch element is an independent scatter.
    let mut d_input = Tensor::zeros(xs);
    let chw = xs.c * xs.h * xs.w;
    d_input
        .data_mut()
        .par_chunks_mut(chw)
        .enumerate()
        .for_each(|(n, dx)| {
            for o in 0..spec.out_channels {
                let up = upstream.plane(n, o);
                for oy in 0..oh {
                    for ox in 0..ow {
                        let g = up[oy * ow + ox];
                        if g == E::zero() {
                            continue;
                        }
                        for m in 0..spec.in_channels {
                            let w_base = ((o * spec.in_channels + m) * d) * d;
                            for ky in 0..d {
                                let iy = (oy * stride + ky) as isize - pad;
                                if iy < 0 || iy >= xs.h as isize {
                                    continue;
                                }
                                for kx in 0..d {
                                    let ix = (ox * stride + kx) as isize - pad;
                                    if ix < 0 || ix >= xs.w as isize {
                                        continue;
                                    }
                                    dx[(m * xs.h + iy as usize) * xs.w + ix as usize] +=
                                        wdata[w_base + ky * d + kx] * g;
                                }
                            }
                        }
                    }
                }
            }
        });

    // d_weights: per-batch partials summed in batch order so the result is
    // independent of thread scheduling.
    let w_len = cache.weights.shape().len();
    let partials: Vec<Vec<E>> = (0..xs.n)
        .into_par_iter()
        .map(|n| {
            let mut dw = vec![E::zero(); w_len];
            for o in 0..spec.out_channels {
                let up = upstream.plane(n, o);
                for oy in 0..oh {
                    for ox in 0..ow {
                        let g = up[oy * ow + ox];
                        if g == E::zero() {
                            continue;
                        }
                        for m in 0..spec.in_channels {
                            let plane = cache.input.plane(n, m);
                            let w_base = ((o * spec.in_channels + m) * d) * d;
                            for ky in 0..d {
                                let iy = (oy * stride + ky) as isize - pad;
                                if iy < 0 || iy >= xs.h as isize {
                                    continue;
                                }
                                let src = iy as usize * xs.w;
                                for kx in 0..d {
                                    let ix = (ox * stride + kx) as isize - pad;
                                    if ix < 0 || ix >= xs.w as isize {
                                        continue;
                                    }
                                    dw[w_base + ky * d + kx] += plane[src + ix as usize] * g;
                                }
                            }
                        }
                    }
                }
            }
            dw
        })
        .collect();
    let mut dw = vec![E::zero(); w_len];
    for partial in &partials {
        for (a, &b) in dw.iter_mut().zip(partial.iter()) {
            *a += b;
        }
    }
    let d_weights = Tensor::from_vec(cache.weights.shape(), dw)?;

    let d_bias = if cache.has_bias {
        let mut db = vec![E::zero(); spec.out_channels];
        for n in 0..xs.n {
            for (o, slot) in db.iter_mut().enumerate() {
                for &g in upstream.plane(n, o) {
                    *slot += g;
                }
            }
        }
        Some(Tensor::vector(db)?)
    } else {
        None
    };

    Ok(ConvGrads { d_input, d_weights, d_bias })
}

fn check_depthwise_args<E: Element>(
    x: &Tensor<E>,
    weights: &Tensor<E>,
    spec: &ConvSpec,
) -> Result<(usize, usize)> {
    spec.validate()?;
    if spec.out_channels != spec.in_channels {
        return Err(Error::Shape(format!(
            "depthwise convolution maps M channels to M, spec has {} -> {}",
            spec.in_channels, spec.out_channels
        )));
    }
    if spec.has_bias {
        return Err(Error::Contract("depthwise convolution takes no bias".into()));
    }
    let xs = x.shape();
    if xs.c != spec.in_channels {
        return Err(Error::Shape(format!(
            "input has {} channels, spec expects {}",
            xs.c, spec.in_channels
        )));
    }
    let want = Shape::new(spec.in_channels, 1, spec.kernel, spec.kernel)?;
    if weights.shape() != want {
        return Err(Error::Shape(format!(
            "depthwise weights shaped {}, expected {} (one DxD filter per input channel)",
            weights.shape(),
            want
        )));
    }
    spec.out_hw(xs.h, xs.w)
}

/// Depth-wise convolution: one D x D filter per input channel. Output channel
/// c depends only on input channel c.
pub fn depthwise_conv_forward<E: Element>(
    x: &Tensor<E>,
    weights: &Tensor<E>,
    spec: &ConvSpec,
) -> Result<(Tensor<E>, ConvCache<E>)> {
    let (oh, ow) = check_depthwise_args(x, weights, spec)?;
    let xs = x.shape();
    let d = spec.kernel;
    let pad = spec.pad() as isize;
    let stride = spec.stride;
    let out_shape = Shape::new(xs.n, xs.c, oh, ow)?;
    let mut y = Tensor::zeros(out_shape);

    let wdata = weights.data();
    let per_plane = oh * ow;
    y.data_mut()
        .par_chunks_mut(per_plane)
        .enumerate()
        .for_each(|(nc, out_plane)| {
            let (n, c) = (nc / xs.c, nc % xs.c);
            let plane = x.plane(n, c);
            let w = &wdata[c * d * d..(c + 1) * d * d];
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = E::zero();
                    for ky in 0..d {
                        let iy = (oy * stride + ky) as isize - pad;
                        if iy < 0 || iy >= xs.h as isize {
                            continue;
                        }
                        let src = iy as usize * xs.w;
                        for kx in 0..d {
                            let ix = (ox * stride + kx) as isize - pad;
                            if ix < 0 || ix >= xs.w as isize {
                                continue;
                            }
                            acc += w[ky * d + kx] * plane[src + ix as usize];
                        }
                    }
                    out_plane[oy * ow + ox] = acc;
                }
            }
        });

    let cache = ConvCache {
        input: x.clone(),
        weights: weights.clone(),
        has_bias: false,
        spec: *spec,
        out_hw: (oh, ow),
    };
    Ok((y, cache))
}

/// Backward pass of `depthwise_conv_forward`. `d_bias` is always `None`.
pub fn depthwise_backward<E: Element>(
    cache: &ConvCache<E>,
    upstream: &Tensor<E>,
) -> Result<ConvGrads<E>> {
    let spec = &cache.spec;
    let xs = cache.input.shape();
    let (oh, ow) = cache.out_hw;
    let expect = Shape::new(xs.n, xs.c, oh, ow)?;
    if upstream.shape() != expect {
        return Err(Error::Contract(format!(
            "upstream shaped {}, cache expects {}",
            upstream.shape(),
            expect
        )));
    }
    let d = spec.kernel;
    let pad = spec.pad() as isize;
    let stride = spec.stride;
    let wdata = cache.weights.data();

    let mut d_input = Tensor::zeros(xs);
    let hw = xs.h * xs.w;
    d_input
        .data_mut()
        .par_chunks_mut(hw)
        .enumerate()
        .for_each(|(nc, dx)| {
            let (n, c) = (nc / xs.c, nc % xs.c);
            let up = upstream.plane(n, c);
            let w = &wdata[c * d * d..(c + 1) * d * d];
            for oy in 0..oh {
                for ox in 0..ow {
                    let g = up[oy * ow + ox];
                    if g == E::zero() {
                        continue;
                    }
                    for ky in 0..d {
                        let iy = (oy * stride + ky) as isize - pad;
                        if iy < 0 || iy >= xs.h as isize {
                            continue;
                        }
                        for kx in 0..d {
                            let ix = (ox * stride + kx) as isize - pad;
                            if ix < 0 || ix >= xs.w as isize {
                                continue;
                            }
                            dx[iy as usize * xs.w + ix as usize] += w[ky * d + kx] * g;
                        }
                    }
                }
            }
        });

    let w_len = cache.weights.shape().len();
    let partials: Vec<Vec<E>> = (0..xs.n)
        .into_par_iter()
        .map(|n| {
            let mut dw = vec![E::zero(); w_len];
            for c in 0..xs.c {
                let up = upstream.plane(n, c);
                let plane = cache.input.plane(n, c);
                let base = c * d * d;
                for oy in 0..oh {
                    for ox in 0..ow {
                        let g = up[oy * ow + ox];
                        if g == E::zero() {
                            continue;
                        }
                        for ky in 0..d {
                            let iy = (oy * stride + ky) as isize - pad;
                            if iy < 0 || iy >= xs.h as isize {
                                continue;
                            }
                            let src = iy as usize * xs.w;
                            for kx in 0..d {
                                let ix = (ox * stride + kx) as isize - pad;
                                if ix < 0 || ix >= xs.w as isize {
                                    continue;
                                }
                                dw[base + ky * d + kx] += plane[src + ix as usize] * g;
                            }
                        }
                    }
                }
            }
            dw
        })
        .collect();
    let mut dw = vec![E::zero(); w_len];
    for partial in &partials {
        for (a, &b) in dw.iter_mut().zip(partial.iter()) {
            *a += b;
        }
    }
    let d_weights = Tensor::from_vec(cache.weights.shape(), dw)?;

    Ok(ConvGrads { d_input, d_weights, d_bias: None })
}

fn check_pointwise_args<E: Element>(
    x: &Tensor<E>,
    weights: &Tensor<E>,
    spec: &ConvSpec,
) -> Result<()> {
    if spec.kernel != 1 {
        return Err(Error::Contract(format!(
            "pointwise convolution requires a 1x1 kernel, spec has {}x{}",
            spec.kernel, spec.kernel
        )));
    }
    spec.validate()?;
    if spec.has_bias {
        return Err(Error::Contract("pointwise convolution takes no bias".into()));
    }
    let xs = x.shape();
    if xs.c != spec.in_channels {
        return Err(Error::Shape(format!(
            "input has {} channels, spec expects {}",
            xs.c, spec.in_channels
        )));
    }
    let want = Shape::new(spec.out_channels, spec.in_channels, 1, 1)?;
    if weights.shape() != want {
        return Err(Error::Shape(format!(
            "pointwise weights shaped {}, expected {}",
            weights.shape(),
            want
        )));
    }
    Ok(())
}

/// Point-wise (1 x 1 x M) convolution: every output pixel is a linear
/// combination of the M input values at the same position; no spatial mixing.
pub fn pointwise_conv_forward<E: Element>(
    x: &Tensor<E>,
    weights: &Tensor<E>,
    spec: &ConvSpec,
) -> Result<(Tensor<E>, ConvCache<E>)> {
    check_pointwise_args(x, weights, spec)?;
    let xs = x.shape();
    if spec.stride != 1 {
        // Strided 1x1 would subsample; the architectures never use it and the
        // graph routes strided projections through conv2d instead.
        return Err(Error::Contract("pointwise convolution requires stride 1".into()));
    }
    let out_shape = Shape::new(xs.n, spec.out_channels, xs.h, xs.w)?;
    let mut y = Tensor::zeros(out_shape);

    let wdata = weights.data();
    let hw = xs.h * xs.w;
    let per_batch = spec.out_channels * hw;
    y.data_mut()
        .par_chunks_mut(per_batch)
        .enumerate()
        .for_each(|(n, out_n)| {
            for o in 0..spec.out_channels {
                let out_plane = &mut out_n[o * hw..(o + 1) * hw];
                for m in 0..spec.in_channels {
                    let w = wdata[o * spec.in_channels + m];
                    let plane = x.plane(n, m);
                    for (slot, &v) in out_plane.iter_mut().zip(plane.iter()) {
                        *slot += w * v;
                    }
                }
            }
        });

    let cache = ConvCache {
        input: x.clone(),
        weights: weights.clone(),
        has_bias: false,
        spec: *spec,
        out_hw: (xs.h, xs.w),
    };
    Ok((y, cache))
}

/// Backward pass of `pointwise_conv_forward`. `d_bias` is always `None`.
pub fn pointwise_backward<E: Element>(
    cache: &ConvCache<E>,
    upstream: &Tensor<E>,
) -> Result<ConvGrads<E>> {
    let spec = &cache.spec;
    let xs = cache.input.shape();
    let expect = Shape::new(xs.n, spec.out_channels, xs.h, xs.w)?;
    if upstream.shape() != expect {
        return Err(Error::Contract(format!(
            "upstream shaped {}, cache expects {}",
            upstream.shape(),
            expect
        )));
    }
    let wdata = cache.weights.data();
    let hw = xs.h * xs.w;

    let mut d_input = Tensor::zeros(xs);
    let chw = xs.c * hw;
    d_input
        .data_mut()
        .par_chunks_mut(chw)
        .enumerate()
        .for_each(|(n, dx)| {
            for o in 0..spec.out_channels {
                let up = upstream.plane(n, o);
                for m in 0..spec.in_channels {
                    let w = wdata[o * spec.in_channels + m];
                    let dst = &mut dx[m * hw..(m + 1) * hw];
                    for (slot, &g) in dst.iter_mut().zip(up.iter()) {
                        *slot += w * g;
                    }
                }
            }
        });

    let w_len = cache.weights.shape().len();
    let partials: Vec<Vec<E>> = (0..xs.n)
        .into_par_iter()
        .map(|n| {
            let mut dw = vec![E::zero(); w_len];
            for o in 0..spec.out_channels {
                let up = upstream.plane(n, o);
                for m in 0..spec.in_channels {
                    let plane = cache.input.plane(n, m);
                    dw[o * spec.in_channels + m] += dot(up, plane);
                }
            }
            dw
        })
        .collect();
    let mut dw = vec![E::zero(); w_len];
    for partial in &partials {
        for (a, &b) in dw.iter_mut().zip(partial.iter()) {
            *a += b;
        }
    }
    let d_weights = Tensor::from_vec(cache.weights.shape(), dw)?;

    Ok(ConvGrads { d_input, d_weights, d_bias: None })
}

/// Saved forward state for a separable convolution.
#[derive(Debug, Clone)]
pub struct SeparableCache<E: Element> {
    pub depthwise: ConvCache<E>,
    pub pointwise: ConvCache<E>,
}

#[derive(Debug, Clone)]
pub struct SeparableGrads<E: Element> {
    pub d_input: Tensor<E>,
    pub d_dw_weights: Tensor<E>,
    pub d_pw_weights: Tensor<E>,
}

/// Depth-wise separable convolution: a D x D depth-wise filter on every
/// input channel, then N 1 x 1 x M filters combining the channels. `spec`
/// describes the overall D, M -> N mapping; the stride applies to the
/// depth-wise stage. Output equals `pointwise(depthwise(x))` exactly.
pub fn separable_conv_forward<E: Element>(
    x: &Tensor<E>,
    dw_weights: &Tensor<E>,
    pw_weights: &Tensor<E>,
    spec: &ConvSpec,
) -> Result<(Tensor<E>, SeparableCache<E>)> {
    let (dw_spec, pw_spec) = split_separable_spec(spec);
    let (mid, dw_cache) = depthwise_conv_forward(x, dw_weights, &dw_spec)?;
    let (y, pw_cache) = pointwise_conv_forward(&mid, pw_weights, &pw_spec)?;
    Ok((y, SeparableCache { depthwise: dw_cache, pointwise: pw_cache }))
}

/// The two stage specs implied by an overall separable spec.
pub fn split_separable_spec(spec: &ConvSpec) -> (ConvSpec, ConvSpec) {
    let dw = ConvSpec {
        kernel: spec.kernel,
        in_channels: spec.in_channels,
        out_channels: spec.in_channels,
        stride: spec.stride,
        padding: spec.padding,
        has_bias: false,
    };
    let pw = ConvSpec {
        kernel: 1,
        in_channels: spec.in_channels,
        out_channels: spec.out_channels,
        stride: 1,
        padding: spec.padding,
        has_bias: false,
    };
    (dw, pw)
}

/// Backward pass of `separable_conv_forward`.
pub fn separable_backward<E: Element>(
    cache: &SeparableCache<E>,
    upstream: &Tensor<E>,
) -> Result<SeparableGrads<E>> {
    let pw = pointwise_backward(&cache.pointwise, upstream)?;
    let dw = depthwise_backward(&cache.depthwise, &pw.d_input)?;
    Ok(SeparableGrads {
        d_input: dw.d_input,
        d_dw_weights: dw.d_weights,
        d_pw_weights: pw.d_weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::Padding;
    use crate::tensor::Init;

    fn shape(n: usize, c: usize, h: usize, w: usize) -> Shape {
        Shape::new(n, c, h, w).unwrap()
    }

    fn seeded(s: Shape, seed: u64) -> Tensor<f64> {
        Tensor::new(s, Init::SeededUniform { lo: -1.0, hi: 1.0, seed })
    }

    #[test]
    fn all_ones_valid_conv_sums_window() {
        let x: Tensor<f64> = Tensor::new(shape(1, 1, 3, 3), Init::Constant(1.0));
        let w: Tensor<f64> = Tensor::new(shape(1, 1, 3, 3), Init::Constant(1.0));
        let spec = ConvSpec::new(3, 1, 1, 1, Padding::Valid, false).unwrap();
        let (y, _) = conv2d_forward(&x, &w, None, &spec).unwrap();
        assert_eq!(y.shape(), shape(1, 1, 1, 1));
        assert_eq!(y.data()[0], 9.0);
    }

    #[test]
    fn unit_1x1_kernel_is_identity() {
        let x = seeded(shape(1, 1, 4, 4), 3);
        let w: Tensor<f64> = Tensor::new(shape(1, 1, 1, 1), Init::Constant(1.0));
        let spec = ConvSpec::new(1, 1, 1, 1, Padding::Valid, false).unwrap();
        let (y, _) = conv2d_forward(&x, &w, None, &spec).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn conv_channel_mismatch_rejected() {
        let x: Tensor<f64> = Tensor::zeros(shape(1, 3, 4, 4));
        let w: Tensor<f64> = Tensor::zeros(shape(2, 2, 3, 3));
        let spec = ConvSpec::new(3, 2, 2, 1, Padding::Same, false).unwrap();
        assert!(matches!(conv2d_forward(&x, &w, None, &spec), Err(Error::Shape(_))));
    }

    #[test]
    fn depthwise_identity_filters_pass_input_through() {
        let x = seeded(shape(1, 2, 3, 3), 11);
        let w: Tensor<f64> = Tensor::new(shape(2, 1, 1, 1), Init::Constant(1.0));
        let spec = ConvSpec::new(1, 2, 2, 1, Padding::Valid, false).unwrap();
        let (y, _) = depthwise_conv_forward(&x, &w, &spec).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn depthwise_channels_are_isolated() {
        let base = seeded(shape(1, 3, 5, 5), 21);
        let w = seeded(shape(3, 1, 3, 3), 22);
        let spec = ConvSpec::new(3, 3, 3, 1, Padding::Same, false).unwrap();
        let (y0, _) = depthwise_conv_forward(&base, &w, &spec).unwrap();

        let mut perturbed = base.clone();
        for v in perturbed.plane_mut(0, 1) {
            *v += 0.5;
        }
        let (y1, _) = depthwise_conv_forward(&perturbed, &w, &spec).unwrap();
        assert_eq!(y0.plane(0, 0), y1.plane(0, 0));
        assert_eq!(y0.plane(0, 2), y1.plane(0, 2));
        assert_ne!(y0.plane(0, 1), y1.plane(0, 1));
    }

    #[test]
    fn depthwise_wrong_filter_count_rejected() {
        let x: Tensor<f64> = Tensor::zeros(shape(1, 3, 4, 4));
        let w: Tensor<f64> = Tensor::zeros(shape(2, 1, 3, 3));
        let spec = ConvSpec::new(3, 3, 3, 1, Padding::Same, false).unwrap();
        assert!(matches!(depthwise_conv_forward(&x, &w, &spec), Err(Error::Shape(_))));
    }

    #[test]
    fn pointwise_identity_matrix_is_identity() {
        let x = seeded(shape(1, 3, 4, 4), 31);
        let mut w: Tensor<f64> = Tensor::zeros(shape(3, 3, 1, 1));
        for c in 0..3 {
            w.set(c, c, 0, 0, 1.0);
        }
        let spec = ConvSpec::new(1, 3, 3, 1, Padding::Same, false).unwrap();
        let (y, _) = pointwise_conv_forward(&x, &w, &spec).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn pointwise_all_ones_sums_channels() {
        let x = Tensor::from_vec(
            shape(1, 2, 1, 2),
            vec![1.0f64, 2.0, /* c1 */ 10.0, 20.0],
        )
        .unwrap();
        let w: Tensor<f64> = Tensor::new(shape(1, 2, 1, 1), Init::Constant(1.0));
        let spec = ConvSpec::new(1, 2, 1, 1, Padding::Same, false).unwrap();
        let (y, _) = pointwise_conv_forward(&x, &w, &spec).unwrap();
        assert_eq!(y.data(), &[11.0, 22.0]);
    }

    #[test]
    fn pointwise_rejects_larger_kernel() {
        let x: Tensor<f64> = Tensor::zeros(shape(1, 2, 4, 4));
        let w: Tensor<f64> = Tensor::zeros(shape(2, 2, 3, 3));
        let spec = ConvSpec::new(3, 2, 2, 1, Padding::Same, false).unwrap();
        assert!(matches!(pointwise_conv_forward(&x, &w, &spec), Err(Error::Contract(_))));
    }

    #[test]
    fn separable_identity_composition() {
        let x = seeded(shape(1, 2, 4, 4), 41);
        let dw: Tensor<f64> = Tensor::new(shape(2, 1, 1, 1), Init::Constant(1.0));
        let mut pw: Tensor<f64> = Tensor::zeros(shape(2, 2, 1, 1));
        pw.set(0, 0, 0, 0, 1.0);
        pw.set(1, 1, 0, 0, 1.0);
        let spec = ConvSpec::new(1, 2, 2, 1, Padding::Valid, false).unwrap();
        let (y, _) = separable_conv_forward(&x, &dw, &pw, &spec).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn centered_delta_depthwise_collapses_to_pointwise() {
        let x = seeded(shape(1, 3, 5, 5), 51);
        let mut dw: Tensor<f64> = Tensor::zeros(shape(3, 1, 3, 3));
        for c in 0..3 {
            dw.set(c, 0, 1, 1, 1.0);
        }
        let pw = seeded(shape(2, 3, 1, 1), 52);
        let spec = ConvSpec::new(3, 3, 2, 1, Padding::Same, false).unwrap();
        let (sep, _) = separable_conv_forward(&x, &dw, &pw, &spec).unwrap();

        let pw_spec = ConvSpec::new(1, 3, 2, 1, Padding::Same, false).unwrap();
        let (pure, _) = pointwise_conv_forward(&x, &pw, &pw_spec).unwrap();
        assert_eq!(sep, pure);
    }

    #[test]
    fn separable_equals_sequential_application() {
        let x = seeded(shape(2, 8, 6, 6), 61);
        let dw = seeded(shape(8, 1, 3, 3), 62);
        let pw = seeded(shape(16, 8, 1, 1), 63);
        let spec = ConvSpec::new(3, 8, 16, 1, Padding::Same, false).unwrap();
        let (fused, _) = separable_conv_forward(&x, &dw, &pw, &spec).unwrap();

        let (dw_spec, pw_spec) = split_separable_spec(&spec);
        let (mid, _) = depthwise_conv_forward(&x, &dw, &dw_spec).unwrap();
        let (seq, _) = pointwise_conv_forward(&mid, &pw, &pw_spec).unwrap();
        assert_eq!(fused, seq);
    }

    #[test]
    fn conv_dweights_equals_input_patch_for_unit_upstream() {
        // Single 3x3 window, upstream gradient 1: d_weights is the input itself.
        let x = seeded(shape(1, 1, 3, 3), 71);
        let w = seeded(shape(1, 1, 3, 3), 72);
        let spec = ConvSpec::new(3, 1, 1, 1, Padding::Valid, false).unwrap();
        let (_, cache) = conv2d_forward(&x, &w, None, &spec).unwrap();
        let up: Tensor<f64> = Tensor::new(shape(1, 1, 1, 1), Init::Constant(1.0));
        let grads = conv2d_backward(&cache, &up).unwrap();
        assert_eq!(grads.d_weights.data(), x.data());
    }

    #[test]
    fn backward_rejects_wrong_upstream_shape() {
        let x = seeded(shape(1, 1, 4, 4), 81);
        let w = seeded(shape(1, 1, 3, 3), 82);
        let spec = ConvSpec::new(3, 1, 1, 1, Padding::Valid, false).unwrap();
        let (_, cache) = conv2d_forward(&x, &w, None, &spec).unwrap();
        let up: Tensor<f64> = Tensor::zeros(shape(1, 1, 4, 4));
        assert!(matches!(conv2d_backward(&cache, &up), Err(Error::Contract(_))));
    }
}
