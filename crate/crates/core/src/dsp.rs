//! Spectral substrate: STFT/iSTFT, mel analysis, power-law compression and
//! complex-mask application.
//!
//! Everything here is a pure function of its inputs; there is no shared
//! mutable state and all operations are deterministic.

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pipeline sample rate. All training and evaluation audio runs at 16 kHz.
pub const PIPELINE_SAMPLE_RATE: u32 = 16_000;

/// Window function used for analysis and synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindowKind {
    /// Periodic Hann window, the pipeline default.
    Hann,
    /// Rectangular window; used by closed-form DFT tests.
    Rect,
}

impl WindowKind {
    pub fn samples(&self, n: usize) -> Vec<f64> {
        match self {
            WindowKind::Hann => (0..n)
                .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()))
                .collect(),
            WindowKind::Rect => vec![1.0; n],
        }
    }
}

/// STFT framing configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameParams {
    pub fft_size: usize,
    pub hop: usize,
    pub window: WindowKind,
    /// Center-padded analysis: pad `fft_size / 2` zeros on both ends so frame
    /// `t` is centered on sample `t * hop`.
    pub center: bool,
}

impl Default for FrameParams {
    fn default() -> Self {
        // Standard 16 kHz speech configuration: 64 ms window, 16 ms hop.
        FrameParams { fft_size: 1024, hop: 256, window: WindowKind::Hann, center: true }
    }
}

impl FrameParams {
    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Number of analysis frames for a signal of `len` samples.
    pub fn n_frames(&self, len: usize) -> usize {
        if self.center {
            1 + len / self.hop
        } else {
            1 + (len - self.fft_size) / self.hop
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fft_size == 0 || self.hop == 0 {
            return Err(Error::Config("fft_size and hop must be positive".into()));
        }
        if self.hop > self.fft_size {
            return Err(Error::Config(format!(
                "hop {} exceeds fft_size {}",
                self.hop, self.fft_size
            )));
        }
        Ok(())
    }
}

/// Mel filterbank configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MelParams {
    pub n_mels: usize,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
}

impl Default for MelParams {
    fn default() -> Self {
        MelParams { n_mels: 80, fmin_hz: 0.0, fmax_hz: 8000.0 }
    }
}

/// Floor used when taking logs of mel energies in losses and figures.
pub const LOG_MEL_FLOOR: f64 = 1e-5;

/// Mono sampled audio with sample-rate metadata; the universal I/O currency.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::Numeric("waveform contains non-finite samples".into()));
        }
        Ok(Waveform { samples, sample_rate_hz })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// Mean squared amplitude over the whole signal.
    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64
    }

    pub fn expect_pipeline_rate(&self) -> Result<()> {
        if self.sample_rate_hz != PIPELINE_SAMPLE_RATE {
            return Err(Error::Data(format!(
                "expected {} Hz audio, got {} Hz",
                PIPELINE_SAMPLE_RATE, self.sample_rate_hz
            )));
        }
        Ok(())
    }
}

/// Time-frequency array of complex values indexed `(t, f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    pub re: Array2<f64>,
    pub im: Array2<f64>,
    /// Analysis metadata; spectrograms built by `stft` always carry it.
    pub params: Option<FrameParams>,
    /// Sample count of the analyzed signal, used by `istft` to trim.
    pub source_len: Option<usize>,
}

impl ComplexSpectrogram {
    pub fn new(re: Array2<f64>, im: Array2<f64>) -> Result<Self> {
        if re.dim() != im.dim() {
            return Err(Error::ShapeMismatch(format!(
                "re {:?} vs im {:?}",
                re.dim(),
                im.dim()
            )));
        }
        Ok(ComplexSpectrogram { re, im, params: None, source_len: None })
    }

    pub fn zeros(t: usize, f: usize) -> Self {
        ComplexSpectrogram {
            re: Array2::zeros((t, f)),
            im: Array2::zeros((t, f)),
            params: None,
            source_len: None,
        }
    }

    /// `(frames, bins)`.
    pub fn dim(&self) -> (usize, usize) {
        self.re.dim()
    }

    pub fn bin(&self, t: usize, f: usize) -> Complex64 {
        Complex64::new(self.re[(t, f)], self.im[(t, f)])
    }

    /// Power spectrum `|s|^2` per bin.
    pub fn power(&self) -> Array2<f64> {
        &self.re * &self.re + &self.im * &self.im
    }
}

/// Frame-rate mel energies; linear scale, values are non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    pub frames: Array2<f64>,
    pub params: MelParams,
}

impl MelSpectrogram {
    /// `(frames, mel_bins)`.
    pub fn dim(&self) -> (usize, usize) {
        self.frames.dim()
    }

    /// Log-compressed copy with the loss floor applied.
    pub fn log(&self) -> Array2<f64> {
        self.frames.mapv(|v| (v + LOG_MEL_FLOOR).ln())
    }
}

/// Complex-valued mask, shape-matched to a spectrogram.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexRatioMask {
    pub re: Array2<f64>,
    pub im: Array2<f64>,
}

impl ComplexRatioMask {
    pub fn new(re: Array2<f64>, im: Array2<f64>) -> Result<Self> {
        if re.dim() != im.dim() {
            return Err(Error::ShapeMismatch(format!(
                "re {:?} vs im {:?}",
                re.dim(),
                im.dim()
            )));
        }
        Ok(ComplexRatioMask { re, im })
    }

    pub fn dim(&self) -> (usize, usize) {
        self.re.dim()
    }

    /// Unit mask `1 + 0j`, the identity under `apply_crm`.
    pub fn identity(t: usize, f: usize) -> Self {
        ComplexRatioMask { re: Array2::ones((t, f)), im: Array2::zeros((t, f)) }
    }

    pub fn max_magnitude(&self) -> f64 {
        self.re
            .iter()
            .zip(self.im.iter())
            .map(|(r, i)| r.hypot(*i))
            .fold(0.0, f64::max)
    }
}

/// Short-time Fourier transform.
pub fn stft(w: &Waveform, params: &FrameParams) -> Result<ComplexSpectrogram> {
    params.validate()?;
    if w.is_empty() {
        return Err(Error::Data("cannot take STFT of an empty waveform".into()));
    }
    if !params.center && w.len() < params.fft_size {
        return Err(Error::Data(format!(
            "waveform of {} samples shorter than fft_size {} (non-centered analysis)",
            w.len(),
            params.fft_size
        )));
    }

    let n = params.fft_size;
    let pad = if params.center { n / 2 } else { 0 };
    let window = params.window.samples(n);
    let n_frames = params.n_frames(w.len());
    let n_bins = params.n_bins();

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);

    let mut re = Array2::zeros((n_frames, n_bins));
    let mut im = Array2::zeros((n_frames, n_bins));
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];

    for t in 0..n_frames {
        let start = (t * params.hop) as isize - pad as isize;
        for i in 0..n {
            let idx = start + i as isize;
            let s = if idx >= 0 && (idx as usize) < w.len() { w.samples[idx as usize] } else { 0.0 };
            buf[i] = Complex64::new(s * window[i], 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for f in 0..n_bins {
            re[(t, f)] = buf[f].re;
            im[(t, f)] = buf[f].im;
        }
    }

    Ok(ComplexSpectrogram { re, im, params: Some(*params), source_len: Some(w.len()) })
}

/// Per-sample overlap-add normalizer `sum_t win^2[n - t*hop]`.
fn window_norm(params: &FrameParams, n_frames: usize, out_len: usize) -> Vec<f64> {
    let n = params.fft_size;
    let window = params.window.samples(n);
    let mut norm = vec![0.0; out_len];
    for t in 0..n_frames {
        let start = t * params.hop;
        for i in 0..n {
            let idx = start + i;
            if idx < out_len {
                norm[idx] += window[i] * window[i];
            }
        }
    }
    norm
}

/// Inverse STFT by windowed overlap-add with least-squares normalization.
///
/// For spectrograms produced by [`stft`] this reconstructs the input exactly
/// up to floating-point error; for modified (e.g. masked) spectrograms it is
/// the least-squares signal estimate.
pub fn istft(s: &ComplexSpectrogram) -> Result<Waveform> {
    let params = s
        .params
        .ok_or_else(|| Error::Data("spectrogram is missing frame_params".into()))?;
    istft_with(s, &params)
}

/// Inverse STFT checking the spectrogram metadata against `expected`.
pub fn istft_with(s: &ComplexSpectrogram, expected: &FrameParams) -> Result<Waveform> {
    expected.validate()?;
    match s.params {
        None => return Err(Error::Data("spectrogram is missing frame_params".into())),
        Some(p) if p != *expected => {
            return Err(Error::ShapeMismatch(format!(
                "spectrogram frame_params {:?} do not match expected {:?}",
                p, expected
            )))
        }
        Some(_) => {}
    }
    let (n_frames, n_bins) = s.dim();
    if n_bins != expected.n_bins() {
        return Err(Error::ShapeMismatch(format!(
            "spectrogram has {} bins, frame_params imply {}",
            n_bins,
            expected.n_bins()
        )));
    }

    let n = expected.fft_size;
    let pad = if expected.center { n / 2 } else { 0 };
    let window = expected.window.samples(n);
    let padded_len = (n_frames - 1) * expected.hop + n;

    let mut planner = FftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(n);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); ifft.get_inplace_scratch_len()];

    let mut acc = vec![0.0; padded_len];
    for t in 0..n_frames {
        for f in 0..n_bins {
            buf[f] = s.bin(t, f);
        }
        // Conjugate-symmetric extension of the one-sided spectrum.
        for f in n_bins..n {
            buf[f] = s.bin(t, n - f).conj();
        }
        ifft.process_with_scratch(&mut buf, &mut scratch);
        let start = t * expected.hop;
        for i in 0..n {
            acc[start + i] += buf[i].re / n as f64 * window[i];
        }
    }

    let norm = window_norm(&expected, n_frames, padded_len);
    let out_len = s.source_len.unwrap_or(padded_len.saturating_sub(2 * pad));
    let mut samples = vec![0.0; out_len];
    for (i, sample) in samples.iter_mut().enumerate() {
        let idx = i + pad;
        if idx < padded_len {
            if norm[idx] <= 1e-10 {
                return Err(Error::Numeric(
                    "window/hop combination leaves uncovered samples (COLA violation)".into(),
                ));
            }
            *sample = acc[idx] / norm[idx];
        }
    }

    Waveform::new(samples, PIPELINE_SAMPLE_RATE)
}

/// Power-law compression `|s|^p * e^{j*phase(s)}`; a zero bin maps to zero.
pub fn power_law_compress(s: &ComplexSpectrogram, p: f64) -> Result<ComplexSpectrogram> {
    if p <= 0.0 {
        return Err(Error::Config(format!("compression factor p must be positive, got {p}")));
    }
    if p > 1.0 {
        return Err(Error::Config(format!("compression factor p must be in (0, 1], got {p}")));
    }
    let (t, f) = s.dim();
    let mut out = ComplexSpectrogram::zeros(t, f);
    out.params = s.params;
    out.source_len = s.source_len;
    for ti in 0..t {
        for fi in 0..f {
            let re = s.re[(ti, fi)];
            let im = s.im[(ti, fi)];
            let mag = re.hypot(im);
            if mag > 0.0 {
                let scale = mag.powf(p - 1.0);
                out.re[(ti, fi)] = scale * re;
                out.im[(ti, fi)] = scale * im;
            }
        }
    }
    Ok(out)
}

/// Triangular mel filterbank on the one-sided power spectrum, HTK mel scale.
/// Rows are filters, columns FFT bins.
pub fn mel_filterbank(params: &MelParams, frame: &FrameParams, sample_rate_hz: u32) -> Result<Array2<f64>> {
    let nyquist = sample_rate_hz as f64 / 2.0;
    if params.fmax_hz > nyquist {
        return Err(Error::Config(format!(
            "fmax {} Hz exceeds Nyquist {} Hz",
            params.fmax_hz, nyquist
        )));
    }
    if params.fmin_hz < 0.0 || params.fmin_hz >= params.fmax_hz {
        return Err(Error::Config("mel range requires 0 <= fmin < fmax".into()));
    }
    if params.n_mels == 0 {
        return Err(Error::Config("n_mels must be positive".into()));
    }

    let hz_to_mel = |hz: f64| 2595.0 * (1.0 + hz / 700.0).log10();
    let mel_to_hz = |mel: f64| 700.0 * (10f64.powf(mel / 2595.0) - 1.0);

    let mel_lo = hz_to_mel(params.fmin_hz);
    let mel_hi = hz_to_mel(params.fmax_hz);
    let edges: Vec<f64> = (0..params.n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (params.n_mels + 1) as f64))
        .collect();

    let n_bins = frame.n_bins();
    let bin_hz = sample_rate_hz as f64 / frame.fft_size as f64;
    let mut fb = Array2::zeros((params.n_mels, n_bins));
    for m in 0..params.n_mels {
        let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        for k in 0..n_bins {
            let f = k as f64 * bin_hz;
            let w = if f >= lo && f <= center && center > lo {
                (f - lo) / (center - lo)
            } else if f > center && f <= hi && hi > center {
                (hi - f) / (hi - center)
            } else {
                0.0
            };
            fb[(m, k)] = w;
        }
    }
    Ok(fb)
}

/// Center frequency (Hz) of each mel filter; used by filterbank tests.
pub fn mel_filter_centers(params: &MelParams) -> Vec<f64> {
    let hz_to_mel = |hz: f64| 2595.0 * (1.0 + hz / 700.0).log10();
    let mel_to_hz = |mel: f64| 700.0 * (10f64.powf(mel / 2595.0) - 1.0);
    let mel_lo = hz_to_mel(params.fmin_hz);
    let mel_hi = hz_to_mel(params.fmax_hz);
    (1..=params.n_mels)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (params.n_mels + 1) as f64))
        .collect()
}

/// Linear-scale mel spectrogram of a waveform: filterbank applied to the
/// STFT power spectrum. Frame count matches [`stft`] under the same params.
pub fn mel_spectrogram(w: &Waveform, mel: &MelParams, frame: &FrameParams) -> Result<MelSpectrogram> {
    let fb = mel_filterbank(mel, frame, w.sample_rate_hz)?;
    let spec = stft(w, frame)?;
    Ok(mel_of_spectrogram(&spec, mel, &fb))
}

/// Mel energies of an existing spectrogram given a prebuilt filterbank.
pub fn mel_of_spectrogram(s: &ComplexSpectrogram, mel: &MelParams, fb: &Array2<f64>) -> MelSpectrogram {
    let power = s.power();
    let frames = power.dot(&fb.t()).mapv(|v| v.max(0.0));
    MelSpectrogram { frames, params: *mel }
}

/// Complex mask application `out(t,f) = s(t,f) * m(t,f)`.
pub fn apply_crm(s: &ComplexSpectrogram, m: &ComplexRatioMask) -> Result<ComplexSpectrogram> {
    if s.dim() != m.dim() {
        return Err(Error::ShapeMismatch(format!(
            "spectrogram {:?} vs mask {:?}",
            s.dim(),
            m.dim()
        )));
    }
    let re = &s.re * &m.re - &s.im * &m.im;
    let im = &s.re * &m.im + &s.im * &m.re;
    Ok(ComplexSpectrogram { re, im, params: s.params, source_len: s.source_len })
}
