//! Convolution geometry: im2col / col2im gathers shared by the forward and
//! backward passes of conv, transposed-conv and pooling ops.

use ndarray::{Array2, Array3, ArrayView2, ArrayView3};

/// Output length of a strided correlation.
pub fn conv_out_len(len: usize, k: usize, stride: usize, pad: usize, dilation: usize) -> usize {
    let span = (k - 1) * dilation + 1;
    if len + 2 * pad < span {
        return 0;
    }
    (len + 2 * pad - span) / stride + 1
}

/// Gather patches of a `(C, L)` signal into a `(C*K, L_out)` matrix.
pub fn im2col1d(x: ArrayView2<f64>, k: usize, stride: usize, pad: usize, dilation: usize) -> Array2<f64> {
    let (c, l) = x.dim();
    let lo = conv_out_len(l, k, stride, pad, dilation);
    let mut col = Array2::zeros((c * k, lo));
    for ci in 0..c {
        for ki in 0..k {
            let row = ci * k + ki;
            for t in 0..lo {
                let idx = (t * stride + ki * dilation) as isize - pad as isize;
                if idx >= 0 && (idx as usize) < l {
                    col[(row, t)] = x[(ci, idx as usize)];
                }
            }
        }
    }
    col
}

/// Scatter-add a `(C*K, L_out)` patch matrix back onto a `(C, L)` signal.
pub fn col2im1d(
    col: ArrayView2<f64>,
    c: usize,
    l: usize,
    k: usize,
    stride: usize,
    pad: usize,
    dilation: usize,
) -> Array2<f64> {
    let lo = col.dim().1;
    let mut x = Array2::zeros((c, l));
    for ci in 0..c {
        for ki in 0..k {
            let row = ci * k + ki;
            for t in 0..lo {
                let idx = (t * stride + ki * dilation) as isize - pad as isize;
                if idx >= 0 && (idx as usize) < l {
                    x[(ci, idx as usize)] += col[(row, t)];
                }
            }
        }
    }
    x
}

/// Gather patches of a `(C, H, W)` map into a `(C*KH*KW, H_out*W_out)` matrix.
#[allow(clippy::too_many_arguments)]
pub fn im2col2d(
    x: ArrayView3<f64>,
    kh: usize,
    kw: usize,
    stride: (usize, usize),
    pad: (usize, usize),
) -> Array2<f64> {
    let (c, h, w) = x.dim();
    let ho = conv_out_len(h, kh, stride.0, pad.0, 1);
    let wo = conv_out_len(w, kw, stride.1, pad.1, 1);
    let mut col = Array2::zeros((c * kh * kw, ho * wo));
    for ci in 0..c {
        for khi in 0..kh {
            for kwi in 0..kw {
                let row = (ci * kh + khi) * kw + kwi;
                for hi in 0..ho {
                    let ih = (hi * stride.0 + khi) as isize - pad.0 as isize;
                    if ih < 0 || ih as usize >= h {
                        continue;
                    }
                    for wi in 0..wo {
                        let iw = (wi * stride.1 + kwi) as isize - pad.1 as isize;
                        if iw >= 0 && (iw as usize) < w {
                            col[(row, hi * wo + wi)] = x[(ci, ih as usize, iw as usize)];
                        }
                    }
                }
            }
        }
    }
    col
}

/// Scatter-add a `(C*KH*KW, H_out*W_out)` patch matrix back onto `(C, H, W)`.
#[allow(clippy::too_many_arguments)]
pub fn col2im2d(
    col: ArrayView2<f64>,
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: (usize, usize),
    pad: (usize, usize),
) -> Array3<f64> {
    let ho = conv_out_len(h, kh, stride.0, pad.0, 1);
    let wo = conv_out_len(w, kw, stride.1, pad.1, 1);
    let mut x = Array3::zeros((c, h, w));
    for ci in 0..c {
        for khi in 0..kh {
            for kwi in 0..kw {
                let row = (ci * kh + khi) * kw + kwi;
                for hi in 0..ho {
                    let ih = (hi * stride.0 + khi) as isize - pad.0 as isize;
                    if ih < 0 || ih as usize >= h {
                        continue;
                    }
                    for wi in 0..wo {
                        let iw = (wi * stride.1 + kwi) as isize - pad.1 as isize;
                        if iw >= 0 && (iw as usize) < w {
                            x[(ci, ih as usize, iw as usize)] += col[(row, hi * wo + wi)];
                        }
                    }
                }
            }
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn im2col1d_basic_geometry() {
        let x = array![[1.0, 2.0, 3.0, 4.0]];
        let col = im2col1d(x.view(), 2, 1, 0, 1);
        assert_eq!(col.dim(), (2, 3));
        assert_eq!(col, array![[1.0, 2.0, 3.0], [2.0, 3.0, 4.0]]);
    }

    #[test]
    fn im2col1d_padding_and_stride() {
        let x = array![[1.0, 2.0, 3.0, 4.0]];
        let col = im2col1d(x.view(), 3, 2, 1, 1);
        assert_eq!(col.dim(), (3, 2));
        assert_eq!(col, array![[0.0, 2.0], [1.0, 3.0], [2.0, 4.0]]);
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        // <im2col(x), c> == <x, col2im(c)> for random x, c.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(1);
        let x = Array2::from_shape_fn((3, 11), |_| rng.gen_range(-1.0..1.0));
        let (k, s, p, d) = (4usize, 2usize, 1usize, 2usize);
        let lo = conv_out_len(11, k, s, p, d);
        let c = Array2::from_shape_fn((3 * k, lo), |_| rng.gen_range(-1.0..1.0));
        let lhs: f64 = (&im2col1d(x.view(), k, s, p, d) * &c).sum();
        let rhs: f64 = (&x * &col2im1d(c.view(), 3, 11, k, s, p, d)).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn col2im2d_is_adjoint_of_im2col2d() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(2);
        let x = Array3::from_shape_fn((2, 9, 7), |_| rng.gen_range(-1.0..1.0));
        let (kh, kw, s, p) = (3usize, 2usize, (2usize, 1usize), (1usize, 0usize));
        let ho = conv_out_len(9, kh, s.0, p.0, 1);
        let wo = conv_out_len(7, kw, s.1, p.1, 1);
        let c = Array2::from_shape_fn((2 * kh * kw, ho * wo), |_| rng.gen_range(-1.0..1.0));
        let lhs: f64 = (&im2col2d(x.view(), kh, kw, s, p) * &c).sum();
        let rhs: f64 = (&x * &col2im2d(c.view(), 2, 9, 7, kh, kw, s, p)).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }
}
