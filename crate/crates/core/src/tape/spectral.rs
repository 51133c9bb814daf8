//! STFT / iSTFT as differentiable primitives.
//!
//! Both transforms are linear in their input, so each backward pass is the
//! adjoint map, evaluated with the same FFT plans as the forward pass.

use ndarray::{Array1, Array3, ArrayView1, ArrayView3};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::dsp::FrameParams;

pub struct FftCache {
    planner: FftPlanner<f64>,
}

impl FftCache {
    pub fn new() -> Self {
        FftCache { planner: FftPlanner::new() }
    }

    fn forward(&mut self, n: usize) -> Arc<dyn Fft<f64>> {
        self.planner.plan_fft_forward(n)
    }

    fn inverse(&mut self, n: usize) -> Arc<dyn Fft<f64>> {
        self.planner.plan_fft_inverse(n)
    }
}

impl Default for FftCache {
    fn default() -> Self {
        Self::new()
    }
}

fn pad_of(params: &FrameParams) -> usize {
    if params.center {
        params.fft_size / 2
    } else {
        0
    }
}

pub fn stft_frames(params: &FrameParams, len: usize) -> usize {
    params.n_frames(len)
}

/// Forward STFT of a real signal into a packed `(2, T, F)` array
/// (index 0 real, index 1 imaginary). Matches `dsp::stft` bit for bit.
pub fn stft_forward(cache: &mut FftCache, params: &FrameParams, x: ArrayView1<f64>) -> Array3<f64> {
    let n = params.fft_size;
    let pad = pad_of(params);
    let window = params.window.samples(n);
    let t_frames = stft_frames(params, x.len());
    let n_bins = params.n_bins();
    let fft = cache.forward(n);

    let mut out = Array3::zeros((2, t_frames, n_bins));
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for t in 0..t_frames {
        let start = (t * params.hop) as isize - pad as isize;
        for i in 0..n {
            let idx = start + i as isize;
            let s = if idx >= 0 && (idx as usize) < x.len() { x[idx as usize] } else { 0.0 };
            buf[i] = Complex64::new(s * window[i], 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for f in 0..n_bins {
            out[(0, t, f)] = buf[f].re;
            out[(1, t, f)] = buf[f].im;
        }
    }
    out
}

/// Adjoint of [`stft_forward`]: maps a `(2, T, F)` cotangent to a signal
/// cotangent of length `len`.
pub fn stft_adjoint(
    cache: &mut FftCache,
    params: &FrameParams,
    grad: ArrayView3<f64>,
    len: usize,
) -> Array1<f64> {
    let n = params.fft_size;
    let pad = pad_of(params);
    let window = params.window.samples(n);
    let (_, t_frames, n_bins) = grad.dim();
    let ifft = cache.inverse(n);

    let mut gx = Array1::zeros(len);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); ifft.get_inplace_scratch_len()];
    for t in 0..t_frames {
        for f in 0..n {
            buf[f] = if f < n_bins {
                Complex64::new(grad[(0, t, f)], grad[(1, t, f)])
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        // Unnormalized inverse FFT: sum_k G[k] e^{+j 2 pi k n / N}.
        ifft.process_with_scratch(&mut buf, &mut scratch);
        let start = (t * params.hop) as isize - pad as isize;
        for i in 0..n {
            let idx = start + i as isize;
            if idx >= 0 && (idx as usize) < len {
                gx[idx as usize] += window[i] * buf[i].re;
            }
        }
    }
    gx
}

fn ola_norm(params: &FrameParams, t_frames: usize, padded_len: usize) -> Vec<f64> {
    let n = params.fft_size;
    let window = params.window.samples(n);
    let mut norm = vec![0.0; padded_len];
    for t in 0..t_frames {
        let start = t * params.hop;
        for i in 0..n {
            if start + i < padded_len {
                norm[start + i] += window[i] * window[i];
            }
        }
    }
    norm
}

/// Inverse STFT of a packed `(2, T, F)` spectrogram into `out_len` samples.
/// Matches `dsp::istft` bit for bit.
pub fn istft_forward(
    cache: &mut FftCache,
    params: &FrameParams,
    spec: ArrayView3<f64>,
    out_len: usize,
) -> Array1<f64> {
    let n = params.fft_size;
    let pad = pad_of(params);
    let window = params.window.samples(n);
    let (_, t_frames, n_bins) = spec.dim();
    let padded_len = (t_frames - 1) * params.hop + n;
    let ifft = cache.inverse(n);

    let mut acc = vec![0.0; padded_len];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); ifft.get_inplace_scratch_len()];
    for t in 0..t_frames {
        for f in 0..n_bins {
            buf[f] = Complex64::new(spec[(0, t, f)], spec[(1, t, f)]);
        }
        for f in n_bins..n {
            let src = n - f;
            buf[f] = Complex64::new(spec[(0, t, src)], -spec[(1, t, src)]);
        }
        ifft.process_with_scratch(&mut buf, &mut scratch);
        let start = t * params.hop;
        for i in 0..n {
            acc[start + i] += buf[i].re / n as f64 * window[i];
        }
    }

    let norm = ola_norm(params, t_frames, padded_len);
    let mut out = Array1::zeros(out_len);
    for i in 0..out_len {
        let idx = i + pad;
        if idx < padded_len {
            assert!(norm[idx] > 1e-10, "COLA violation at sample {idx}");
            out[i] = acc[idx] / norm[idx];
        }
    }
    out
}

/// Adjoint of [`istft_forward`]: maps a signal cotangent to a packed
/// `(2, T, F)` spectrogram cotangent.
pub fn istft_adjoint(
    cache: &mut FftCache,
    params: &FrameParams,
    grad: ArrayView1<f64>,
    t_frames: usize,
) -> Array3<f64> {
    let n = params.fft_size;
    let pad = pad_of(params);
    let window = params.window.samples(n);
    let n_bins = params.n_bins();
    let padded_len = (t_frames - 1) * params.hop + n;
    let out_len = grad.len();
    let fft = cache.forward(n);

    let norm = ola_norm(params, t_frames, padded_len);
    let mut g_acc = vec![0.0; padded_len];
    for i in 0..out_len {
        let idx = i + pad;
        if idx < padded_len {
            g_acc[idx] = grad[i] / norm[idx];
        }
    }

    let mut out = Array3::zeros((2, t_frames, n_bins));
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for t in 0..t_frames {
        let start = t * params.hop;
        for i in 0..n {
            buf[i] = Complex64::new(g_acc[start + i] * window[i] / n as f64, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        // Fold the conjugate-symmetric extension back onto the one-sided bins.
        for f in 0..n_bins {
            let (mut gr, mut gi) = (buf[f].re, buf[f].im);
            if f > 0 && f < n - f {
                let mirror = buf[n - f];
                gr += mirror.re;
                gi -= mirror.im;
            }
            out[(0, t, f)] = gr;
            out[(1, t, f)] = gi;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{self, FrameParams, Waveform, WindowKind, PIPELINE_SAMPLE_RATE};
    use ndarray::{Array1, Array3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn params() -> FrameParams {
        FrameParams { fft_size: 64, hop: 16, window: WindowKind::Hann, center: true }
    }

    #[test]
    fn forward_matches_dsp_stft() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let samples: Vec<f64> = (0..400).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w = Waveform::new(samples.clone(), PIPELINE_SAMPLE_RATE).unwrap();
        let p = params();
        let spec = dsp::stft(&w, &p).unwrap();
        let mut cache = FftCache::new();
        let packed = stft_forward(&mut cache, &p, Array1::from(samples).view());
        for t in 0..spec.dim().0 {
            for f in 0..spec.dim().1 {
                assert_eq!(packed[(0, t, f)], spec.re[(t, f)]);
                assert_eq!(packed[(1, t, f)], spec.im[(t, f)]);
            }
        }
    }

    #[test]
    fn istft_forward_matches_dsp_istft() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let samples: Vec<f64> = (0..300).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w = Waveform::new(samples.clone(), PIPELINE_SAMPLE_RATE).unwrap();
        let p = params();
        let spec = dsp::stft(&w, &p).unwrap();
        let rec = dsp::istft(&spec).unwrap();
        let mut cache = FftCache::new();
        let packed = stft_forward(&mut cache, &p, Array1::from(samples).view());
        let rec2 = istft_forward(&mut cache, &p, packed.view(), w.len());
        for (a, b) in rec.samples.iter().zip(rec2.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    /// <A x, y> == <x, A^T y> for random x, y: verifies both adjoints.
    #[test]
    fn stft_adjoint_identity() {
        let p = params();
        let mut cache = FftCache::new();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let len = 200;
        let x = Array1::from_shape_fn(len, |_| rng.gen_range(-1.0..1.0));
        let y_shape = (2, stft_frames(&p, len), p.n_bins());
        let y = Array3::from_shape_fn(y_shape, |_| rng.gen_range(-1.0..1.0));

        let ax = stft_forward(&mut cache, &p, x.view());
        let aty = stft_adjoint(&mut cache, &p, y.view(), len);
        let lhs: f64 = (&ax * &y).sum();
        let rhs: f64 = (&x * &aty).sum();
        assert!((lhs - rhs).abs() < 1e-8 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn istft_adjoint_identity() {
        let p = params();
        let mut cache = FftCache::new();
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let out_len = 180;
        let t_frames = stft_frames(&p, out_len);
        let spec = Array3::from_shape_fn((2, t_frames, p.n_bins()), |_| rng.gen_range(-1.0..1.0));
        let y = Array1::from_shape_fn(out_len, |_| rng.gen_range(-1.0..1.0));

        let ax = istft_forward(&mut cache, &p, spec.view(), out_len);
        let aty = istft_adjoint(&mut cache, &p, y.view(), t_frames);
        let lhs: f64 = (&ax * &y).sum();
        let rhs: f64 = (&spec * &aty).sum();
        assert!((lhs - rhs).abs() < 1e-8 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }
}
