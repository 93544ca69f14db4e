//! Static multiply-accumulate accounting for convolution variants.
//!
//! Separable convolutions cut the multiply count of a standard convolution
//! by exactly 1/N + 1/D^2, independent of the output size.

use crate::layers::ConvSpec;

/// Which convolution the count describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvFlavor {
    Standard,
    Separable,
}

/// Multiply-accumulates for one forward pass over an out_h x out_w map.
///
/// standard:  D^2 * M * N * out_h * out_w
/// separable: D^2 * M * out_h * out_w  +  M * N * out_h * out_w
pub fn mult_count(flavor: ConvFlavor, spec: &ConvSpec, out_h: usize, out_w: usize) -> u64 {
    let d2 = (spec.kernel * spec.kernel) as u64;
    let m = spec.in_channels as u64;
    let n = spec.out_channels as u64;
    let spatial = (out_h * out_w) as u64;
    match flavor {
        ConvFlavor::Standard => d2 * m * n * spatial,
        ConvFlavor::Separable => d2 * m * spatial + m * n * spatial,
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Reduced rational separable/standard multiply ratio, computed from the two
/// counts themselves (not from the closed form, which tests compare against).
pub fn mult_count_ratio(spec: &ConvSpec) -> (u64, u64) {
    let sep = mult_count(ConvFlavor::Separable, spec, 1, 1);
    let std = mult_count(ConvFlavor::Standard, spec, 1, 1);
    let g = gcd(sep, std);
    (sep / g, std / g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::Padding;

    fn spec(d: usize, m: usize, n: usize) -> ConvSpec {
        ConvSpec::new(d, m, n, 1, Padding::Same, false).unwrap()
    }

    #[test]
    fn standard_count_example() {
        assert_eq!(
            mult_count(ConvFlavor::Standard, &spec(3, 16, 32), 10, 10),
            460_800
        );
    }

    #[test]
    fn separable_count_and_ratio_example() {
        let s = spec(3, 16, 32);
        assert_eq!(mult_count(ConvFlavor::Separable, &s, 10, 10), 65_600);
        // 65,600 / 460,800 == 1/32 + 1/9 == 41/288
        assert_eq!(mult_count_ratio(&s), (41, 288));
    }

    #[test]
    fn ratio_matches_decimal_expansion() {
        let (num, den) = mult_count_ratio(&spec(3, 8, 64));
        let ratio = num as f64 / den as f64;
        assert!((ratio - (1.0 / 64.0 + 1.0 / 9.0)).abs() < 1e-5);
        assert!((ratio - 0.12674).abs() < 1e-5);
    }
}
