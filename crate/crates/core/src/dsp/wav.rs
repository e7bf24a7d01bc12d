use std::io::{Cursor, Read, Seek};
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

/// The only accepted sample rate.
pub const SAMPLE_RATE: u32 = 16_000;

/// Mono 16-bit PCM audio at [`SAMPLE_RATE`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AudioClip {
    samples: Vec<i16>,
}

#[derive(Debug, thiserror::Error)]
pub enum WavError {
    #[error("malformed WAV: {0}")]
    Malformed(String),
    #[error("unsupported channel_count={0}")]
    UnsupportedChannels(u16),
    #[error("unsupported sample_rate={0}")]
    UnsupportedSampleRate(u32),
    #[error("unsupported encoding: {format} with {bits} bits per sample")]
    UnsupportedEncoding { format: &'static str, bits: u16 },
    #[error("empty audio")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl AudioClip {
    pub fn new(samples: Vec<i16>) -> Result<Self, WavError> {
        if samples.is_empty() {
            return Err(WavError::Empty);
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[i16] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        SAMPLE_RATE
    }

    pub fn channel_count(&self) -> u16 {
        1
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_ms(&self) -> f64 {
        self.samples.len() as f64 * 1000.0 / SAMPLE_RATE as f64
    }

    /// Appends another clip.
    pub fn concat(&self, other: &AudioClip) -> AudioClip {
        let mut samples = self.samples.clone();
        samples.extend_from_slice(&other.samples);
        AudioClip { samples }
    }

    /// Encodes as a canonical 44-byte-header RIFF file.
    pub fn to_wav_bytes(&self) -> Vec<u8> {
        let mut cursor = Cursor::new(Vec::with_capacity(44 + 2 * self.samples.len()));
        {
            let mut w = WavWriter::new(&mut cursor, wav_spec()).expect("in-memory writer");
            let mut i16w = w.get_i16_writer(self.samples.len() as u32);
            for &s in &self.samples {
                i16w.write_sample(s);
            }
            i16w.flush().expect("in-memory flush");
            w.finalize().expect("in-memory finalize");
        }
        cursor.into_inner()
    }
}

fn wav_spec() -> WavSpec {
    WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    }
}

fn decode<R: Read + Seek>(reader: R) -> Result<AudioClip, WavError> {
    let reader = WavReader::new(reader).map_err(|e| WavError::Malformed(e.to_string()))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(WavError::UnsupportedChannels(spec.channels));
    }
    if spec.sample_rate != SAMPLE_RATE {
        return Err(WavError::UnsupportedSampleRate(spec.sample_rate));
    }
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        let format = match spec.sample_format {
            SampleFormat::Int => "PCM",
            SampleFormat::Float => "IEEE float",
        };
        return Err(WavError::UnsupportedEncoding {
            format,
            bits: spec.bits_per_sample,
        });
    }
    let samples = reader
        .into_samples::<i16>()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| WavError::Malformed(e.to_string()))?;
    AudioClip::new(samples)
}

/// Reads a mono 16 kHz PCM-16 WAV file.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip, WavError> {
    let bytes = std::fs::read(path)?;
    parse_wav(&bytes)
}

/// Decodes WAV bytes held in memory (an upload body, a stored clip).
pub fn parse_wav(bytes: &[u8]) -> Result<AudioClip, WavError> {
    decode(Cursor::new(bytes))
}

pub fn write_wav(path: impl AsRef<Path>, clip: &AudioClip) -> Result<(), WavError> {
    std::fs::write(path, clip.to_wav_bytes())?;
    Ok(())
}
