//! Max pooling and global average pooling.

use crate::error::{Error, Result};
use crate::layers::PoolSpec;
use crate::tensor::{Element, Shape, Tensor};

/// Argmax positions (flat input indices) for gradient routing.
#[derive(Debug, Clone)]
pub struct MaxPoolCache {
    pub input_shape: Shape,
    pub out_hw: (usize, usize),
    pub argmax: Vec<usize>,
}

/// Max over each window. Padded cells never win; ties go to the first
/// element in row-major window order.
pub fn maxpool_forward<E: Element>(
    x: &Tensor<E>,
    spec: &PoolSpec,
) -> Result<(Tensor<E>, MaxPoolCache)> {
    let s = x.shape();
    let (oh, ow) = spec.out_hw(s.h, s.w)?;
    let pad = spec.pad() as isize;
    let out_shape = Shape::new(s.n, s.c, oh, ow)?;
    let mut y = Tensor::zeros(out_shape);
    let mut argmax = vec![0usize; out_shape.len()];

    for n in 0..s.n {
        for c in 0..s.c {
            let plane = x.plane(n, c);
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best: Option<(E, usize)> = None;
                    for ky in 0..spec.window {
                        let iy = (oy * spec.stride + ky) as isize - pad;
                        if iy < 0 || iy >= s.h as isize {
                            continue;
                        }
                        for kx in 0..spec.window {
                            let ix = (ox * spec.stride + kx) as isize - pad;
                            if ix < 0 || ix >= s.w as isize {
                                continue;
                            }
                            let flat = iy as usize * s.w + ix as usize;
                            let v = plane[flat];
                            // strict > keeps the first row-major maximum
                            if best.map_or(true, |(b, _)| v > b) {
                                best = Some((v, flat));
                            }
                        }
                    }
                    let (v, flat) =
                        best.expect("pool window always intersects the input");
                    let o = out_shape.offset(n, c, oy, ox);
                    y.data_mut()[o] = v;
                    argmax[o] = s.offset(n, c, 0, 0) + flat;
                }
            }
        }
    }
    let cache = MaxPoolCache { input_shape: s, out_hw: (oh, ow), argmax };
    Ok((y, cache))
}

/// Routes each upstream gradient to the position that won its window.
pub fn maxpool_backward<E: Element>(
    cache: &MaxPoolCache,
    upstream: &Tensor<E>,
) -> Result<Tensor<E>> {
    let s = cache.input_shape;
    let expect = Shape::new(s.n, s.c, cache.out_hw.0, cache.out_hw.1)?;
    if upstream.shape() != expect {
        return Err(Error::Contract(format!(
            "upstream shaped {}, cache expects {}",
            upstream.shape(),
            expect
        )));
    }
    let mut d_input = Tensor::zeros(s);
    for (o, &g) in upstream.data().iter().enumerate() {
        d_input.data_mut()[cache.argmax[o]] += g;
    }
    Ok(d_input)
}

#[derive(Debug, Clone)]
pub struct GapCache {
    pub input_shape: Shape,
}

/// Global average pooling: each (n, c) feature map collapses to its mean.
pub fn gap_forward<E: Element>(x: &Tensor<E>) -> Result<(Tensor<E>, GapCache)> {
    let s = x.shape();
    let out_shape = Shape::new(s.n, s.c, 1, 1)?;
    let mut y = Tensor::zeros(out_shape);
    let inv = E::from_f64(1.0 / (s.h * s.w) as f64);
    for n in 0..s.n {
        for c in 0..s.c {
            let mut acc = E::zero();
            for &v in x.plane(n, c) {
                acc += v;
            }
            y.data_mut()[out_shape.offset(n, c, 0, 0)] = acc * inv;
        }
    }
    Ok((y, GapCache { input_shape: s }))
}

/// Spreads each upstream value uniformly over its source map: g/(h*w) per cell.
pub fn gap_backward<E: Element>(cache: &GapCache, upstream: &Tensor<E>) -> Result<Tensor<E>> {
    let s = cache.input_shape;
    let expect = Shape::new(s.n, s.c, 1, 1)?;
    if upstream.shape() != expect {
        return Err(Error::Contract(format!(
            "upstream shaped {}, cache expects {}",
            upstream.shape(),
            expect
        )));
    }
    let mut d_input = Tensor::zeros(s);
    let inv = E::from_f64(1.0 / (s.h * s.w) as f64);
    for n in 0..s.n {
        for c in 0..s.c {
            let g = upstream.get(n, c, 0, 0) * inv;
            for slot in d_input.plane_mut(n, c) {
                *slot = g;
            }
        }
    }
    Ok(d_input)
}
