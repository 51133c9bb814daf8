//! 16-bit PCM WAV I/O, mono, 16 kHz.
//!
//! Files at other sample rates are rejected unless the caller opts into
//! resampling; stereo and other bit depths are always rejected.

use std::path::Path;

use crate::dsp::{Waveform, PIPELINE_SAMPLE_RATE};
use crate::error::{Error, Result};

/// Read a mono 16-bit PCM WAV file. With `resample = false` the file must be
/// at the pipeline rate; with `resample = true` other rates are linearly
/// resampled to 16 kHz.
pub fn read_wav(path: &Path, resample: bool) -> Result<Waveform> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::Data(format!(
            "{}: expected mono audio, got {} channels",
            path.display(),
            spec.channels
        )));
    }
    if spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
        return Err(Error::Data(format!(
            "{}: expected 16-bit PCM, got {}-bit {:?}",
            path.display(),
            spec.bits_per_sample,
            spec.sample_format
        )));
    }
    let samples: Vec<f64> = reader
        .samples::<i16>()
        .map(|s| s.map(|v| v as f64 / 32768.0))
        .collect::<std::result::Result<_, _>>()?;

    if spec.sample_rate == PIPELINE_SAMPLE_RATE {
        return Waveform::new(samples, PIPELINE_SAMPLE_RATE);
    }
    if !resample {
        return Err(Error::Data(format!(
            "{}: sample rate {} Hz, pipeline requires {} Hz (pass a resample flag to convert)",
            path.display(),
            spec.sample_rate,
            PIPELINE_SAMPLE_RATE
        )));
    }
    let resampled = resample_linear(&samples, spec.sample_rate, PIPELINE_SAMPLE_RATE);
    Waveform::new(resampled, PIPELINE_SAMPLE_RATE)
}

/// Write a waveform as mono 16-bit PCM. Samples are clamped to [-1, 1] and
/// rounded half away from zero so output bytes are deterministic.
pub fn write_wav(path: &Path, w: &Waveform) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: w.sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &s in &w.samples {
        let v = (s.clamp(-1.0, 1.0) * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(v)?;
    }
    writer.finalize()?;
    Ok(())
}

fn resample_linear(samples: &[f64], from_hz: u32, to_hz: u32) -> Vec<f64> {
    if samples.is_empty() || from_hz == to_hz {
        return samples.to_vec();
    }
    let ratio = from_hz as f64 / to_hz as f64;
    let out_len = ((samples.len() as f64) / ratio).floor() as usize;
    (0..out_len)
        .map(|i| {
            let pos = i as f64 * ratio;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(samples.len() - 1);
            let frac = pos - lo as f64;
            samples[lo] * (1.0 - frac) + samples[hi] * frac
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_samples_to_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wav");
        let w = Waveform::new(
            (0..2000).map(|i| (i as f64 * 0.01).sin() * 0.7).collect(),
            PIPELINE_SAMPLE_RATE,
        )
        .unwrap();
        write_wav(&path, &w).unwrap();
        let r = read_wav(&path, false).unwrap();
        assert_eq!(r.len(), w.len());
        let max_err = w
            .samples
            .iter()
            .zip(r.samples.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(max_err < 1.0 / 32768.0 + 1e-9, "quantization error {max_err}");
    }

    #[test]
    fn rejects_wrong_rate_without_flag() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r8k.wav");
        let w = Waveform::new(vec![0.1; 800], 8000).unwrap();
        write_wav(&path, &w).unwrap();
        assert!(read_wav(&path, false).is_err());
        let resampled = read_wav(&path, true).unwrap();
        assert_eq!(resampled.sample_rate_hz, PIPELINE_SAMPLE_RATE);
        assert_eq!(resampled.len(), 1600);
    }

    #[test]
    fn rejects_stereo() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("st.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: PIPELINE_SAMPLE_RATE,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut writer = hound::WavWriter::create(&path, spec).unwrap();
        for _ in 0..100 {
            writer.write_sample(0i16).unwrap();
            writer.write_sample(0i16).unwrap();
        }
        writer.finalize().unwrap();
        assert!(read_wav(&path, false).is_err());
    }
}
