//! Dense 4-D tensors in row-major NCHW layout.
//!
//! Every value in the engine is a `Tensor<E>`: images, feature maps, weights,
//! gradients. Element `(n, c, y, x)` lives at flat index
//! `((n*C + c)*H + y)*W + x`. There is no broadcasting and no views; layers
//! validate shapes explicitly and return owned results.

use crate::error::{Error, Result};
use crate::rng::XorShift64Star;
use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::Float;

/// Scalar type the kernels run on. `f32` is the working precision;
/// `f64` is selectable for finite-difference gradient checking.
pub trait Element:
    Float
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Element for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Element for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
}

/// 4-tuple (batch, channels, rows, cols). All dimensions are at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub fn new(n: usize, c: usize, h: usize, w: usize) -> Result<Shape> {
        let shape = Shape { n, c, h, w };
        shape.validate()?;
        Ok(shape)
    }

    /// A length-`c` vector viewed as (1, c, 1, 1).
    pub fn vector(c: usize) -> Result<Shape> {
        Shape::new(1, c, 1, 1)
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.c == 0 || self.h == 0 || self.w == 0 {
            return Err(Error::Shape(format!("zero dimension in {self}")));
        }
        self.n
            .checked_mul(self.c)
            .and_then(|p| p.checked_mul(self.h))
            .and_then(|p| p.checked_mul(self.w))
            .ok_or_else(|| Error::Shape(format!("element count overflows in {self}")))?;
        Ok(())
    }

    /// Total element count; equals the product of the four dims.
    pub fn len(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        false // dimensions are >= 1 by construction
    }

    /// Flat index of (n, c, y, x).
    #[inline]
    pub fn offset(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        debug_assert!(n < self.n && c < self.c && y < self.h && x < self.w);
        ((n * self.c + c) * self.h + y) * self.w + x
    }

    /// Inverse of `offset` for batch element 0: flat index -> (c, y, x).
    pub fn coords_in_batch0(&self, flat: usize) -> (usize, usize, usize) {
        let x = flat % self.w;
        let y = (flat / self.w) % self.h;
        let c = flat / (self.w * self.h);
        (c, y, x)
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {}, {})", self.n, self.c, self.h, self.w)
    }
}

/// How a new tensor is filled.
#[derive(Debug, Clone, Copy)]
pub enum Init {
    Zeros,
    Constant(f64),
    /// Uniform in [lo, hi) drawn from the fixed xorshift64* stream for `seed`.
    SeededUniform { lo: f64, hi: f64, seed: u64 },
}

/// Axis subset for reductions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Axes {
    pub n: bool,
    pub c: bool,
    pub h: bool,
    pub w: bool,
}

impl Axes {
    pub const NONE: Axes = Axes { n: false, c: false, h: false, w: false };
    pub const HW: Axes = Axes { n: false, c: false, h: true, w: true };
    pub const NHW: Axes = Axes { n: true, c: false, h: true, w: true };
    pub const ALL: Axes = Axes { n: true, c: true, h: true, w: true };

    fn is_none(&self) -> bool {
        !(self.n || self.c || self.h || self.w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReduceOp {
    Sum,
    Mean,
    Max,
}

/// Dense NCHW tensor. Value-like: cloned freely, no interior mutability.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<E: Element = f32> {
    shape: Shape,
    data: Vec<E>,
}

impl<E: Element> Tensor<E> {
    pub fn new(shape: Shape, init: Init) -> Tensor<E> {
        let len = shape.len();
        let data = match init {
            Init::Zeros => vec![E::zero(); len],
            Init::Constant(k) => vec![E::from_f64(k); len],
            Init::SeededUniform { lo, hi, seed } => {
                let mut rng = XorShift64Star::new(seed);
                (0..len).map(|_| E::from_f64(rng.uniform(lo, hi))).collect()
            }
        };
        Tensor { shape, data }
    }

    pub fn zeros(shape: Shape) -> Tensor<E> {
        Tensor::new(shape, Init::Zeros)
    }

    pub fn from_vec(shape: Shape, data: Vec<E>) -> Result<Tensor<E>> {
        if data.len() != shape.len() {
            return Err(Error::Shape(format!(
                "data length {} does not match shape {} ({} elements)",
                data.len(),
                shape,
                shape.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    /// Length-c vector as a (1, c, 1, 1) tensor.
    pub fn vector(values: Vec<E>) -> Result<Tensor<E>> {
        let shape = Shape::vector(values.len())?;
        Tensor::from_vec(shape, values)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[E] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [E] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<E> {
        self.data
    }

    #[inline]
    pub fn get(&self, n: usize, c: usize, y: usize, x: usize) -> E {
        self.data[self.shape.offset(n, c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, n: usize, c: usize, y: usize, x: usize, v: E) {
        let idx = self.shape.offset(n, c, y, x);
        self.data[idx] = v;
    }

    /// Contiguous (h*w) plane for one (n, c).
    #[inline]
    pub fn plane(&self, n: usize, c: usize) -> &[E] {
        let hw = self.shape.h * self.shape.w;
        let start = (n * self.shape.c + c) * hw;
        &self.data[start..start + hw]
    }

    #[inline]
    pub fn plane_mut(&mut self, n: usize, c: usize) -> &mut [E] {
        let hw = self.shape.h * self.shape.w;
        let start = (n * self.shape.c + c) * hw;
        &mut self.data[start..start + hw]
    }

    /// Contiguous (c*h*w) slab for one batch element.
    #[inline]
    pub fn batch(&self, n: usize) -> &[E] {
        let chw = self.shape.c * self.shape.h * self.shape.w;
        &self.data[n * chw..(n + 1) * chw]
    }

    pub fn map<F: Fn(E) -> E>(&self, f: F) -> Tensor<E> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, k: E) -> Tensor<E> {
        self.map(|v| v * k)
    }

    /// Elementwise combine; shapes must match exactly.
    pub fn ew_binary(&self, other: &Tensor<E>, op: BinaryOp) -> Result<Tensor<E>> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "elementwise op on mismatched shapes {} vs {}",
                self.shape, other.shape
            )));
        }
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(&a, &b)| match op {
                BinaryOp::Add => a + b,
                BinaryOp::Sub => a - b,
                BinaryOp::Mul => a * b,
            })
            .collect();
        Ok(Tensor { shape: self.shape, data })
    }

    pub fn add(&self, other: &Tensor<E>) -> Result<Tensor<E>> {
        self.ew_binary(other, BinaryOp::Add)
    }

    pub fn sub(&self, other: &Tensor<E>) -> Result<Tensor<E>> {
        self.ew_binary(other, BinaryOp::Sub)
    }

    pub fn mul(&self, other: &Tensor<E>) -> Result<Tensor<E>> {
        self.ew_binary(other, BinaryOp::Mul)
    }

    /// In-place `self += other`.
    pub fn accumulate(&mut self, other: &Tensor<E>) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "accumulate on mismatched shapes {} vs {}",
                self.shape, other.shape
            )));
        }
        for (a, &b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
        Ok(())
    }

    /// Coordinates (c, y, x) of the maximum element of batch element 0.
    /// Ties resolve to the lowest flat index.
    pub fn argmax_flat(&self) -> Result<(usize, usize, usize)> {
        if self.shape.n != 1 {
            return Err(Error::Contract(format!(
                "argmax_flat requires a single-batch tensor, got {}",
                self.shape
            )));
        }
        let mut best_idx = 0usize;
        let mut best = self.data[0];
        for (i, &v) in self.data.iter().enumerate().skip(1) {
            if v > best {
                best = v;
                best_idx = i;
            }
        }
        Ok(self.shape.coords_in_batch0(best_idx))
    }

    /// Reduce over an axis subset. Reduced dims collapse to size 1.
    /// An empty axis set returns an identity copy.
    pub fn reduce(&self, axes: Axes, op: ReduceOp) -> Tensor<E> {
        if axes.is_none() {
            return self.clone();
        }
        let s = self.shape;
        let out_shape = Shape {
            n: if axes.n { 1 } else { s.n },
            c: if axes.c { 1 } else { s.c },
            h: if axes.h { 1 } else { s.h },
            w: if axes.w { 1 } else { s.w },
        };
        let init = match op {
            ReduceOp::Sum | ReduceOp::Mean => E::zero(),
            ReduceOp::Max => E::neg_infinity(),
        };
        let mut out = vec![init; out_shape.len()];
        for n in 0..s.n {
            for c in 0..s.c {
                for y in 0..s.h {
                    for x in 0..s.w {
                        let v = self.data[s.offset(n, c, y, x)];
                        let o = out_shape.offset(
                            if axes.n { 0 } else { n },
                            if axes.c { 0 } else { c },
                            if axes.h { 0 } else { y },
                            if axes.w { 0 } else { x },
                        );
                        match op {
                            ReduceOp::Sum | ReduceOp::Mean => out[o] += v,
                            ReduceOp::Max => {
                                if v > out[o] {
                                    out[o] = v;
                                }
                            }
                        }
                    }
                }
            }
        }
        if op == ReduceOp::Mean {
            let count = (s.len() / out_shape.len()) as f64;
            let inv = E::from_f64(1.0 / count);
            for v in out.iter_mut() {
                *v *= inv;
            }
        }
        Tensor { shape: out_shape, data: out }
    }

    /// Cast every element through f64 (used to move between precisions).
    pub fn cast<T: Element>(&self) -> Tensor<T> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| T::from_f64(v.to_f64())).collect(),
        }
    }

    pub fn iter(&self) -> std::slice::Iter<'_, E> {
        self.data.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(n: usize, c: usize, h: usize, w: usize) -> Shape {
        Shape::new(n, c, h, w).unwrap()
    }

    #[test]
    fn zeros_case() {
        let t: Tensor<f32> = Tensor::new(shape(1, 1, 2, 2), Init::Zeros);
        assert_eq!(t.data(), &[0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn constant_fill() {
        let t: Tensor<f32> = Tensor::new(shape(1, 2, 1, 1), Init::Constant(3.0));
        assert_eq!(t.data(), &[3.0, 3.0]);
    }

    #[test]
    fn seeded_uniform_is_deterministic() {
        let init = Init::SeededUniform { lo: -1.0, hi: 1.0, seed: 42 };
        let a: Tensor<f32> = Tensor::new(shape(1, 1, 1, 4), init);
        let b: Tensor<f32> = Tensor::new(shape(1, 1, 1, 4), init);
        assert_eq!(a.data(), b.data());
        assert!(a.data().iter().all(|v| (-1.0..1.0).contains(v)));
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(Shape::new(1, 0, 2, 2), Err(Error::Shape(_))));
    }

    #[test]
    fn overflowing_dimension_rejected() {
        assert!(matches!(
            Shape::new(usize::MAX, 2, 2, 2),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn get_set_round_trip_every_coordinate() {
        let s = shape(2, 3, 4, 5);
        let mut t: Tensor<f64> = Tensor::zeros(s);
        let mut counter = 0.0;
        for n in 0..2 {
            for c in 0..3 {
                for y in 0..4 {
                    for x in 0..5 {
                        t.set(n, c, y, x, counter);
                        counter += 1.0;
                    }
                }
            }
        }
        let mut counter = 0.0;
        for n in 0..2 {
            for c in 0..3 {
                for y in 0..4 {
                    for x in 0..5 {
                        assert_eq!(t.get(n, c, y, x), counter);
                        // The addressing formula is the layout contract.
                        assert_eq!(
                            s.offset(n, c, y, x),
                            ((n * 3 + c) * 4 + y) * 5 + x
                        );
                        counter += 1.0;
                    }
                }
            }
        }
    }

    #[test]
    fn ew_binary_examples() {
        let a = Tensor::vector(vec![1.0f32, 2.0]).unwrap();
        let b = Tensor::vector(vec![3.0f32, 4.0]).unwrap();
        assert_eq!(a.add(&b).unwrap().data(), &[4.0, 6.0]);

        let x = Tensor::new(shape(1, 2, 3, 1), Init::SeededUniform { lo: -2.0, hi: 2.0, seed: 5 });
        let z: Tensor<f32> = x.sub(&x).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));

        let p = Tensor::vector(vec![2.0f32, 3.0]).unwrap();
        let q = Tensor::vector(vec![4.0f32, 5.0]).unwrap();
        assert_eq!(p.mul(&q).unwrap().data(), &[8.0, 15.0]);
    }

    #[test]
    fn ew_binary_shape_mismatch() {
        let a: Tensor<f32> = Tensor::zeros(shape(1, 1, 2, 2));
        let b: Tensor<f32> = Tensor::zeros(shape(1, 1, 2, 3));
        assert!(matches!(a.add(&b), Err(Error::Shape(_))));
    }

    #[test]
    fn argmax_unique_maximum() {
        let mut t: Tensor<f32> = Tensor::zeros(shape(1, 3, 2, 2));
        t.set(0, 2, 1, 0, 9.0);
        assert_eq!(t.argmax_flat().unwrap(), (2, 1, 0));
    }

    #[test]
    fn argmax_tie_rules() {
        let t: Tensor<f32> = Tensor::new(shape(1, 2, 2, 2), Init::Constant(1.0));
        assert_eq!(t.argmax_flat().unwrap(), (0, 0, 0));

        // Two equal maxima at flat indices 3 and 7 -> coordinates of 3.
        let mut u: Tensor<f32> = Tensor::zeros(shape(1, 2, 2, 2));
        u.data_mut()[3] = 5.0;
        u.data_mut()[7] = 5.0;
        let s = u.shape();
        assert_eq!(u.argmax_flat().unwrap(), s.coords_in_batch0(3));
    }

    #[test]
    fn argmax_requires_single_batch() {
        let t: Tensor<f32> = Tensor::zeros(shape(2, 1, 1, 1));
        assert!(matches!(t.argmax_flat(), Err(Error::Contract(_))));
    }

    #[test]
    fn reduce_mean_over_hw() {
        let t = Tensor::from_vec(shape(1, 1, 2, 2), vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
        let m = t.reduce(Axes::HW, ReduceOp::Mean);
        assert_eq!(m.shape(), shape(1, 1, 1, 1));
        assert_eq!(m.data()[0], 2.5);
    }

    #[test]
    fn reduce_sum_matches_loop_accumulation() {
        let t: Tensor<f64> =
            Tensor::new(shape(1, 3, 4, 4), Init::SeededUniform { lo: -1.0, hi: 1.0, seed: 99 });
        let summed = t.reduce(Axes::HW, ReduceOp::Sum);
        let mean = t.reduce(Axes::HW, ReduceOp::Mean);
        for c in 0..3 {
            let mut acc = 0.0f64;
            for y in 0..4 {
                for x in 0..4 {
                    acc += t.get(0, c, y, x);
                }
            }
            assert_eq!(summed.get(0, c, 0, 0), acc);
            // mean * count == sum within 1e-6 relative
            let m = mean.get(0, c, 0, 0) * 16.0;
            assert!((m - acc).abs() <= 1e-6 * acc.abs().max(1.0));
        }
    }

    #[test]
    fn reduce_max_all_axes() {
        let t = Tensor::from_vec(shape(1, 1, 1, 2), vec![-5.0f32, -2.0]).unwrap();
        let m = t.reduce(Axes::ALL, ReduceOp::Max);
        assert_eq!(m.data(), &[-2.0]);
    }

    #[test]
    fn reduce_empty_axis_set_is_identity() {
        let t: Tensor<f32> =
            Tensor::new(shape(1, 2, 3, 3), Init::SeededUniform { lo: 0.0, hi: 1.0, seed: 8 });
        let r = t.reduce(Axes::NONE, ReduceOp::Sum);
        assert_eq!(r, t);
    }
}
