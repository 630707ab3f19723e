//! Frame geometry: window length, hop, DFT size, and signal segmentation.

use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

/// Frame geometry derived from a window length in seconds.
///
/// The frame holds `N = floor(W * Fs)` samples truncated down to a multiple
/// of four, the hop is `H = N / 4` (75% overlap), and spectra use the next
/// power of two `N' >= N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FrameSpec", into = "FrameSpec")]
pub struct FrameConfig {
    window_seconds: f64,
    sample_rate: f64,
    frame_len: usize,
    hop: usize,
    dft_len: usize,
}

/// Serialized form: only the two defining quantities; the rest is re-derived.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct FrameSpec {
    window_seconds: f64,
    sample_rate: f64,
}

impl TryFrom<FrameSpec> for FrameConfig {
    type Error = Error;
    fn try_from(s: FrameSpec) -> Result<Self> {
        FrameConfig::new(s.window_seconds, s.sample_rate)
    }
}

impl From<FrameConfig> for FrameSpec {
    fn from(c: FrameConfig) -> Self {
        FrameSpec { window_seconds: c.window_seconds, sample_rate: c.sample_rate }
    }
}

impl FrameConfig {
    pub fn new(window_seconds: f64, sample_rate: f64) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::Config(format!("sample rate {sample_rate} must be positive")));
        }
        if !(window_seconds.is_finite() && window_seconds > 0.0) {
            return Err(Error::Config(format!("window {window_seconds}s must be positive")));
        }
        let raw = (window_seconds * sample_rate).floor() as usize;
        let frame_len = raw - raw % 4;
        if frame_len < 4 {
            return Err(Error::Config(format!(
                "window {window_seconds}s spans under four samples at {sample_rate} Hz"
            )));
        }
        let dft_len = frame_len.next_power_of_two();
        Ok(Self { window_seconds, sample_rate, frame_len, hop: frame_len / 4, dft_len })
    }

    pub fn window_seconds(&self) -> f64 {
        self.window_seconds
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    /// N: samples per frame (always a multiple of four).
    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    /// H = N / 4: hop between frame starts.
    pub fn hop(&self) -> usize {
        self.hop
    }

    /// N': DFT length, the next power of two at or above N.
    pub fn dft_len(&self) -> usize {
        self.dft_len
    }

    /// Frames per second of input.
    pub fn frame_rate(&self) -> f64 {
        self.sample_rate / self.hop as f64
    }

    /// Number of frames covering `signal_len` samples: ceil(L / H).
    pub fn num_frames(&self, signal_len: usize) -> usize {
        signal_len.div_ceil(self.hop)
    }
}

/// Periodic (DFT-even) Hann window: w[n] = 0.5 - 0.5 cos(2 pi n / len).
pub fn hann_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos())
        .collect()
}

/// Overlapping frames cut from one signal, tail zero-padded to a whole frame.
#[derive(Debug, Clone)]
pub struct FrameSet {
    config: FrameConfig,
    signal_len: usize,
    frames: Vec<Vec<f64>>,
}

impl FrameSet {
    pub fn config(&self) -> &FrameConfig {
        &self.config
    }

    /// Length of the signal the frames were cut from.
    pub fn signal_len(&self) -> usize {
        self.signal_len
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame(&self, m: usize) -> &[f64] {
        &self.frames[m]
    }

    pub fn frames(&self) -> &[Vec<f64>] {
        &self.frames
    }
}

/// Slice a signal into overlapping frames of N samples every H samples.
///
/// Frame m starts at sample m*H; samples past the end of the signal are zero.
pub fn segment(signal: &AudioBuffer, config: &FrameConfig) -> Result<FrameSet> {
    if signal.is_empty() {
        return Err(Error::Input("cannot segment an empty signal".into()));
    }
    if (signal.sample_rate() - config.sample_rate()).abs() > 1e-9 {
        return Err(Error::Input(format!(
            "signal rate {} does not match frame config rate {}",
            signal.sample_rate(),
            config.sample_rate()
        )));
    }
    let x = signal.samples();
    let n = config.frame_len();
    let hop = config.hop();
    let num = config.num_frames(x.len());
    let mut frames = Vec::with_capacity(num);
    for m in 0..num {
        let start = m * hop;
        let mut frame = vec![0.0; n];
        let take = n.min(x.len().saturating_sub(start));
        frame[..take].copy_from_slice(&x[start..start + take]);
        frames.push(frame);
    }
    Ok(FrameSet { config: *config, signal_len: x.len(), frames })
}
