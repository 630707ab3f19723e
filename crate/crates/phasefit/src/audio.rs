//! Mono audio container used by every processing stage.

use crate::error::{Error, Result};

/// A mono signal with its sample rate. Samples are finite f64 by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: f64,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::Config(format!("sample rate {sample_rate} must be positive")));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Input(format!("non-finite sample at index {i}")));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// Copy out `[start, start + len)`; the range must lie inside the buffer.
    pub fn slice(&self, start: usize, len: usize) -> Result<AudioBuffer> {
        let end = start
            .checked_add(len)
            .filter(|&e| e <= self.samples.len())
            .ok_or_else(|| {
                Error::Input(format!(
                    "slice [{start}, {start}+{len}) exceeds buffer of {} samples",
                    self.samples.len()
                ))
            })?;
        Ok(AudioBuffer {
            samples: self.samples[start..end].to_vec(),
            sample_rate: self.sample_rate,
        })
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64).sqrt()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |acc, s| acc.max(s.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_samples() {
        assert!(AudioBuffer::new(vec![0.0, f64::NAN], 44100.0).is_err());
        assert!(AudioBuffer::new(vec![0.0, f64::INFINITY], 44100.0).is_err());
    }

    #[test]
    fn rejects_bad_sample_rate() {
        assert!(AudioBuffer::new(vec![0.0], 0.0).is_err());
        assert!(AudioBuffer::new(vec![0.0], -44100.0).is_err());
        assert!(AudioBuffer::new(vec![0.0], f64::NAN).is_err());
    }

    #[test]
    fn slice_bounds() {
        let b = AudioBuffer::new(vec![1.0, 2.0, 3.0], 44100.0).unwrap();
        assert_eq!(b.slice(1, 2).unwrap().samples(), &[2.0, 3.0]);
        assert!(b.slice(2, 2).is_err());
        assert!(b.slice(usize::MAX, 2).is_err());
    }

    #[test]
    fn duration_and_stats() {
        let b = AudioBuffer::new(vec![0.5; 44100], 44100.0).unwrap();
        assert!((b.duration() - 1.0).abs() < 1e-12);
        assert!((b.rms() - 0.5).abs() < 1e-12);
        assert!((b.peak() - 0.5).abs() < 1e-12);
    }
}
