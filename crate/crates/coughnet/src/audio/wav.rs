//! PCM WAV decoding and writing.

use std::path::Path;

use hound::{SampleFormat, WavSpec};

use super::AudioClip;
use crate::error::{Error, Result};

/// Decodes a PCM WAV file (8/16/24-bit integer or 32-bit float) into a mono
/// clip. Channels are averaged; amplitudes are normalized by the format's
/// full-scale value, so a full-scale negative 16-bit sample maps to -1.0.
pub fn decode_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Wav {
            path: path.into(),
            reason: other.to_string(),
        },
    })?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::Wav {
            path: path.into(),
            reason: "zero channels".into(),
        });
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => read_all(reader.into_samples::<f32>(), path, |s| s as f64)?,
        (SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let full_scale = (1i64 << (bits - 1)) as f64;
            read_all(reader.into_samples::<i32>(), path, move |s| {
                s as f64 / full_scale
            })?
        }
        (fmt, bits) => {
            return Err(Error::Wav {
                path: path.into(),
                reason: format!("unsupported sample format {fmt:?}/{bits}-bit"),
            })
        }
    };

    if interleaved.is_empty() {
        return Err(Error::Wav {
            path: path.into(),
            reason: "zero-length audio".into(),
        });
    }

    let mono: Vec<f64> = interleaved
        .chunks(channels)
        .map(|frame| frame.iter().sum::<f64>() / frame.len() as f64)
        .collect();

    AudioClip::new(mono, spec.sample_rate, path.to_string_lossy())
}

fn read_all<S, F>(
    samples: hound::WavIntoSamples<std::io::BufReader<std::fs::File>, S>,
    path: &Path,
    convert: F,
) -> Result<Vec<f64>>
where
    S: hound::Sample,
    F: Fn(S) -> f64,
{
    samples
        .map(|s| {
            s.map(&convert).map_err(|e| Error::Wav {
                path: path.into(),
                reason: e.to_string(),
            })
        })
        .collect()
}

/// Writes a mono 16-bit PCM WAV. Samples are clamped to [-1, 1].
///
/// Quantization uses the same 2¹⁵ full-scale value as decoding, so a
/// write/decode roundtrip errs by at most half a quantization step (plus
/// the clamp at exactly +1.0, which has no integer representation).
pub fn write_wav_16bit(path: impl AsRef<Path>, samples: &[f64], sample_rate_hz: u32) -> Result<()> {
    let path = path.as_ref();
    let spec = WavSpec {
        channels: 1,
        sample_rate: sample_rate_hz,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| Error::Wav {
        path: path.into(),
        reason: e.to_string(),
    })?;
    for &s in samples {
        let v = (s.clamp(-1.0, 1.0) * 32768.0)
            .round()
            .clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(v).map_err(|e| Error::Wav {
            path: path.into(),
            reason: e.to_string(),
        })?;
    }
    writer.finalize().map_err(|e| Error::Wav {
        path: path.into(),
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_raw(
        path: &Path,
        channels: u16,
        bits: u16,
        fmt: SampleFormat,
        write: impl FnOnce(&mut hound::WavWriter<std::io::BufWriter<std::fs::File>>),
    ) {
        let spec = WavSpec {
            channels,
            sample_rate: 44_100,
            bits_per_sample: bits,
            sample_format: fmt,
        };
        let mut w = hound::WavWriter::create(path, spec).unwrap();
        write(&mut w);
        w.finalize().unwrap();
    }

    #[test]
    fn full_scale_normalization_16bit() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("mono16.wav");
        write_raw(&p, 1, 16, SampleFormat::Int, |w| {
            for v in [0i16, 16_384, -32_768] {
                w.write_sample(v).unwrap();
            }
        });
        let clip = decode_wav(&p).unwrap();
        assert_eq!(clip.samples(), &[0.0, 0.5, -1.0]);
        assert_eq!(clip.sample_rate_hz(), 44_100);
    }

    #[test]
    fn stereo_channels_averaged() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("stereo.wav");
        write_raw(&p, 2, 32, SampleFormat::Float, |w| {
            w.write_sample(1.0f32).unwrap();
            w.write_sample(0.0f32).unwrap();
        });
        let clip = decode_wav(&p).unwrap();
        assert_eq!(clip.samples(), &[0.5]);
    }

    #[test]
    fn one_second_header_arithmetic() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sec.wav");
        write_raw(&p, 1, 16, SampleFormat::Int, |w| {
            for _ in 0..44_100 {
                w.write_sample(0i16).unwrap();
            }
        });
        let clip = decode_wav(&p).unwrap();
        assert_eq!(clip.len(), 44_100);
        assert_eq!(clip.sample_rate_hz(), 44_100);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = decode_wav("/no/such/file.wav").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn zero_length_audio_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.wav");
        write_raw(&p, 1, 16, SampleFormat::Int, |_| {});
        let err = decode_wav(&p).unwrap_err();
        assert!(matches!(err, Error::Wav { .. }));
    }

    #[test]
    fn garbage_bytes_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.wav");
        std::fs::write(&p, b"not a wav file at all").unwrap();
        assert!(matches!(decode_wav(&p), Err(Error::Wav { .. })));
    }

    #[test]
    fn decode_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("det.wav");
        let samples: Vec<f64> = (0..1000)
            .map(|i| ((i * 37) % 101) as f64 / 101.0 - 0.5)
            .collect();
        write_wav_16bit(&p, &samples, 16_000).unwrap();
        let a = decode_wav(&p).unwrap();
        let b = decode_wav(&p).unwrap();
        assert_eq!(a.samples(), b.samples());
    }

    #[test]
    fn write_read_roundtrip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rt.wav");
        let samples: Vec<f64> = (0..500).map(|i| (i as f64 * 0.01).sin() * 0.9).collect();
        write_wav_16bit(&p, &samples, 16_000).unwrap();
        let clip = decode_wav(&p).unwrap();
        for (a, b) in samples.iter().zip(clip.samples()) {
            assert!((a - b).abs() < 1.0 / 32_000.0, "{a} vs {b}");
        }
    }
}
