//! Minimal RIFF/WAVE reader and writer: mono or multichannel PCM 16/24-bit
//! and IEEE float32, including WAVE_FORMAT_EXTENSIBLE headers. Multichannel
//! files are reduced to channel 0 with a warning; everything is written mono.

use std::path::Path;

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

const FORMAT_PCM: u16 = 0x0001;
const FORMAT_IEEE_FLOAT: u16 = 0x0003;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Tail of the standard media-subtype GUID shared by the PCM and float
/// subformats; the leading four bytes carry the format code.
const SUBFORMAT_GUID_TAIL: [u8; 12] =
    [0x00, 0x00, 0x10, 0x00, 0x80, 0x00, 0x00, 0xAA, 0x00, 0x38, 0x9B, 0x71];

/// Sample encodings this module writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavFormat {
    Pcm16,
    Pcm24,
    Float32,
}

impl WavFormat {
    fn bytes_per_sample(self) -> usize {
        match self {
            WavFormat::Pcm16 => 2,
            WavFormat::Pcm24 => 3,
            WavFormat::Float32 => 4,
        }
    }
}

// ── reading ────────────────────────────────────────────────────────────────

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::Wav("file ends inside a chunk".into()));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

struct FmtChunk {
    format: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

fn parse_fmt(body: &[u8]) -> Result<FmtChunk> {
    let mut c = Cursor { data: body, pos: 0 };
    let mut format = c.u16()?;
    let channels = c.u16()?;
    let sample_rate = c.u32()?;
    let _byte_rate = c.u32()?;
    let _block_align = c.u16()?;
    let bits = c.u16()?;
    if format == FORMAT_EXTENSIBLE {
        let cb_size = c.u16()?;
        if cb_size < 22 {
            return Err(Error::Wav("extensible header too short".into()));
        }
        let _valid_bits = c.u16()?;
        let _channel_mask = c.u32()?;
        let guid = c.take(16)?;
        if guid[4..] != SUBFORMAT_GUID_TAIL {
            return Err(Error::Wav("unrecognized subformat GUID".into()));
        }
        format = u16::from_le_bytes([guid[0], guid[1]]);
    }
    if channels == 0 {
        return Err(Error::Wav("zero channels".into()));
    }
    if sample_rate == 0 {
        return Err(Error::Wav("zero sample rate".into()));
    }
    Ok(FmtChunk { format, channels, sample_rate, bits })
}

fn decode_samples(fmt: &FmtChunk, data: &[u8]) -> Result<Vec<f64>> {
    let bytes_per = match (fmt.format, fmt.bits) {
        (FORMAT_PCM, 16) => 2,
        (FORMAT_PCM, 24) => 3,
        (FORMAT_IEEE_FLOAT, 32) => 4,
        (f, b) => {
            return Err(Error::Wav(format!("unsupported codec: format {f}, {b} bits")));
        }
    };
    let frame_bytes = bytes_per * fmt.channels as usize;
    if data.len() % frame_bytes != 0 {
        return Err(Error::Wav(format!(
            "data chunk of {} bytes is not a whole number of {frame_bytes}-byte frames",
            data.len()
        )));
    }
    if fmt.channels > 1 {
        log::warn!("{}-channel file: keeping channel 0 only", fmt.channels);
    }
    let n = data.len() / frame_bytes;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let s = &data[i * frame_bytes..i * frame_bytes + bytes_per];
        let v = match (fmt.format, fmt.bits) {
            (FORMAT_PCM, 16) => {
                i16::from_le_bytes([s[0], s[1]]) as f64 / 32768.0
            }
            (FORMAT_PCM, 24) => {
                let raw = (s[0] as i32) | (s[1] as i32) << 8 | ((s[2] as i8) as i32) << 16;
                raw as f64 / 8388608.0
            }
            _ => f32::from_le_bytes([s[0], s[1], s[2], s[3]]) as f64,
        };
        out.push(v);
    }
    Ok(out)
}

/// Read a RIFF/WAVE file into an AudioBuffer, taking channel 0 of
/// multichannel content.
pub fn read_wav(path: &Path) -> Result<AudioBuffer> {
    let bytes = std::fs::read(path)?;
    let mut c = Cursor { data: &bytes, pos: 0 };
    if c.take(4)? != b"RIFF" {
        return Err(Error::Wav("missing RIFF magic".into()));
    }
    let _riff_size = c.u32()?;
    if c.take(4)? != b"WAVE" {
        return Err(Error::Wav("missing WAVE form type".into()));
    }

    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<&[u8]> = None;
    while c.pos + 8 <= c.data.len() {
        let id: [u8; 4] = c.take(4)?.try_into().unwrap();
        let size = c.u32()? as usize;
        let body = c.take(size)?;
        if size % 2 == 1 && c.pos < c.data.len() {
            c.pos += 1; // chunks are word-aligned
        }
        match &id {
            b"fmt " => fmt = Some(parse_fmt(body)?),
            b"data" => {
                data = Some(body);
                break;
            }
            _ => {}
        }
    }
    let fmt = fmt.ok_or_else(|| Error::Wav("no fmt chunk".into()))?;
    let data = data.ok_or_else(|| Error::Wav("no data chunk".into()))?;
    AudioBuffer::new(decode_samples(&fmt, data)?, fmt.sample_rate as f64)
}

// ── writing ────────────────────────────────────────────────────────────────

fn encode_samples(samples: &[f64], format: WavFormat, out: &mut Vec<u8>) {
    let mut clipped = 0usize;
    match format {
        WavFormat::Pcm16 => {
            for &v in samples {
                let q = (v * 32768.0).round();
                let c = q.clamp(-32768.0, 32767.0);
                if c != q {
                    clipped += 1;
                }
                out.extend_from_slice(&(c as i16).to_le_bytes());
            }
        }
        WavFormat::Pcm24 => {
            for &v in samples {
                let q = (v * 8388608.0).round();
                let c = q.clamp(-8388608.0, 8388607.0);
                if c != q {
                    clipped += 1;
                }
                let i = c as i32;
                out.extend_from_slice(&[i as u8, (i >> 8) as u8, (i >> 16) as u8]);
            }
        }
        WavFormat::Float32 => {
            for &v in samples {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }
    if clipped > 0 {
        log::warn!("{clipped} samples clipped to integer full scale");
    }
}

/// Write a mono RIFF/WAVE file in the given encoding. Integer formats clamp
/// out-of-range samples to full scale (with a warning); float32 preserves
/// values to f32 precision.
pub fn write_wav(path: &Path, buffer: &AudioBuffer, format: WavFormat) -> Result<()> {
    let rate = buffer.sample_rate();
    if (rate - rate.round()).abs() > 1e-6 || rate.round() < 1.0 || rate.round() > u32::MAX as f64 {
        return Err(Error::Wav(format!("sample rate {rate} does not fit a WAV header")));
    }
    let rate = rate.round() as u32;
    let bps = format.bytes_per_sample();
    let data_len = buffer.len() * bps;
    let code = match format {
        WavFormat::Pcm16 | WavFormat::Pcm24 => FORMAT_PCM,
        WavFormat::Float32 => FORMAT_IEEE_FLOAT,
    };
    let fact = matches!(format, WavFormat::Float32);
    let riff_size = 4 + (8 + 16) + if fact { 8 + 4 } else { 0 } + 8 + data_len + data_len % 2;

    let mut bytes = Vec::with_capacity(12 + riff_size);
    bytes.extend_from_slice(b"RIFF");
    bytes.extend_from_slice(&(riff_size as u32).to_le_bytes());
    bytes.extend_from_slice(b"WAVE");
    bytes.extend_from_slice(b"fmt ");
    bytes.extend_from_slice(&16u32.to_le_bytes());
    bytes.extend_from_slice(&code.to_le_bytes());
    bytes.extend_from_slice(&1u16.to_le_bytes());
    bytes.extend_from_slice(&rate.to_le_bytes());
    bytes.extend_from_slice(&(rate * bps as u32).to_le_bytes());
    bytes.extend_from_slice(&(bps as u16).to_le_bytes());
    bytes.extend_from_slice(&(8 * bps as u16).to_le_bytes());
    if fact {
        bytes.extend_from_slice(b"fact");
        bytes.extend_from_slice(&4u32.to_le_bytes());
        bytes.extend_from_slice(&(buffer.len() as u32).to_le_bytes());
    }
    bytes.extend_from_slice(b"data");
    bytes.extend_from_slice(&(data_len as u32).to_le_bytes());
    encode_samples(buffer.samples(), format, &mut bytes);
    if data_len % 2 == 1 {
        bytes.push(0);
    }
    std::fs::write(path, bytes)?;
    Ok(())
}
