use std::io::{Read, Seek};
use std::path::Path;

use super::{AudioError, PcmSignal, Result};

/// Decode a 16-bit PCM RIFF/WAVE file, downmixing stereo by channel mean.
pub fn read_wav(path: impl AsRef<Path>) -> Result<PcmSignal> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let source_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_wav_from(std::io::BufReader::new(file), source_id)
}

pub fn read_wav_from<R: Read + Seek>(reader: R, source_id: impl Into<String>) -> Result<PcmSignal> {
    let reader = hound::WavReader::new(reader).map_err(map_hound)?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(AudioError::UnsupportedEncoding(format!(
            "{:?} {}-bit",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    let channels = spec.channels as usize;
    if !(1..=2).contains(&channels) {
        return Err(AudioError::UnsupportedEncoding(format!("{channels} channels")));
    }
    if spec.sample_rate == 0 {
        return Err(AudioError::MalformedWav("zero sample rate".into()));
    }

    let raw = reader
        .into_samples::<i16>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(map_hound)?;
    if raw.len() % channels != 0 {
        return Err(AudioError::MalformedWav("partial sample frame".into()));
    }
    let samples: Vec<f64> = raw
        .chunks_exact(channels)
        .map(|frame| {
            let sum: f64 = frame.iter().map(|&s| s as f64 / 32768.0).sum();
            sum / channels as f64
        })
        .collect();
    if samples.is_empty() {
        return Err(AudioError::MalformedWav("no samples".into()));
    }
    Ok(PcmSignal::new(samples, spec.sample_rate, source_id))
}

/// Write a mono 16-bit PCM file. Amplitudes are clipped to `[-1, 1]`.
pub fn write_wav(path: impl AsRef<Path>, signal: &PcmSignal) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(map_write)?;
    for &s in &signal.samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer.write_sample(v).map_err(map_write)?;
    }
    writer.finalize().map_err(map_write)
}

fn map_write(err: hound::Error) -> AudioError {
    match err {
        hound::Error::IoError(e) => AudioError::Io(e),
        other => AudioError::InvalidParameter(other.to_string()),
    }
}

fn map_hound(err: hound::Error) -> AudioError {
    match err {
        hound::Error::Unsupported => AudioError::UnsupportedEncoding("unsupported wav format".into()),
        hound::Error::FormatError(msg) => AudioError::MalformedWav(msg.to_string()),
        // the source is already open, so read failures mean a short or damaged stream
        hound::Error::IoError(e) => AudioError::MalformedWav(format!("truncated file: {e}")),
        other => AudioError::MalformedWav(other.to_string()),
    }
}
