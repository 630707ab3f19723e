//! Dataset construction: the chirp-train excitation signal, aligned
//! input/target pairing with optional bypass calibration, train/test
//! splitting, and the dataset manifest.

use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};
use crate::reference::AllpassStage;

/// Published chirp-train settings: 30 ms impulse period through 64 all-pass
/// stages with p = 0.9.
pub const CHIRP_PERIOD: f64 = 0.030;
pub const CHIRP_STAGES: usize = 64;
pub const CHIRP_P: f64 = 0.9;

/// How far apart the input and target recordings may drift in length before
/// pairing them is refused rather than truncated.
pub const LENGTH_TOLERANCE_SECONDS: f64 = 0.25;

/// Unipolar unit impulses every round(period * F_s) samples, dispersed
/// through a cascade of fixed first-order all-pass sections and
/// peak-normalized to 0.5. stages = 0 gives the bare impulse train.
pub fn synth_chirp_train(
    duration: f64,
    sample_rate: f64,
    period: f64,
    stages: usize,
    p: f64,
) -> Result<AudioBuffer> {
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::Config(format!("duration must be positive, got {duration}")));
    }
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(Error::Config(format!("bad sample rate {sample_rate}")));
    }
    if !(period.is_finite() && period > 0.0) {
        return Err(Error::Config(format!("impulse period must be positive, got {period}")));
    }
    if !(p.is_finite() && p.abs() < 1.0) {
        return Err(Error::Config(format!("all-pass coefficient {p} outside (-1, 1)")));
    }
    let len = (duration * sample_rate).round() as usize;
    let spacing = (period * sample_rate).round() as usize;
    if spacing == 0 || len == 0 {
        return Err(Error::Config("period or duration below one sample".into()));
    }
    let mut samples = vec![0.0; len];
    for v in samples.iter_mut().step_by(spacing) {
        *v = 1.0;
    }
    let mut cascade = vec![AllpassStage::default(); stages];
    for v in samples.iter_mut() {
        for stage in cascade.iter_mut() {
            *v = stage.tick(*v, p);
        }
    }
    let peak = samples.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if peak > 0.0 {
        let scale = 0.5 / peak;
        for v in samples.iter_mut() {
            *v *= scale;
        }
    }
    AudioBuffer::new(samples, sample_rate)
}

/// The published excitation: `duration` seconds of the standard chirp train.
pub fn default_chirp_train(duration: f64, sample_rate: f64) -> Result<AudioBuffer> {
    synth_chirp_train(duration, sample_rate, CHIRP_PERIOD, CHIRP_STAGES, CHIRP_P)
}

// ── pairing ────────────────────────────────────────────────────────────────

/// Externally known facts about a recording, carried through to reports.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PairMetadata {
    pub estimated_period_s: Option<f64>,
    pub estimated_rate_hz: Option<f64>,
}

/// One aligned input/target pair.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetPair {
    pub input: AudioBuffer,
    pub target: AudioBuffer,
    pub label: String,
    pub metadata: PairMetadata,
}

impl DatasetPair {
    pub fn new(
        input: AudioBuffer,
        target: AudioBuffer,
        label: &str,
        metadata: PairMetadata,
    ) -> Result<Self> {
        if input.len() != target.len() {
            return Err(Error::Input(format!(
                "pair '{label}': input {} samples vs target {}",
                input.len(),
                target.len()
            )));
        }
        if (input.sample_rate() - target.sample_rate()).abs() > 1e-9 * input.sample_rate() {
            return Err(Error::Input(format!(
                "pair '{label}': sample rates {} vs {}",
                input.sample_rate(),
                target.sample_rate()
            )));
        }
        if input.len() == 0 {
            return Err(Error::Input(format!("pair '{label}' is empty")));
        }
        Ok(Self { input, target, label: label.into(), metadata })
    }
}

/// Train/test segment lengths in seconds, cut from the front of the aligned
/// recording in that order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_seconds: f64,
    pub test_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: DatasetPair,
    pub test: DatasetPair,
    /// Sample index in the aligned recording where the test segment starts;
    /// the LFO phase offset for held-out evaluation.
    pub test_offset_samples: f64,
    pub calibrated: bool,
    pub target_offset_samples: i64,
}

/// Summary of a constructed dataset, written alongside training runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub label: String,
    pub sample_rate: f64,
    pub aligned_samples: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    pub test_offset_samples: f64,
    pub calibrated: bool,
    pub target_offset_samples: i64,
    pub metadata: PairMetadata,
}

impl DatasetSplit {
    pub fn manifest(&self, aligned_samples: usize) -> DatasetManifest {
        DatasetManifest {
            label: self.train.label.clone(),
            sample_rate: self.train.input.sample_rate(),
            aligned_samples,
            train_samples: self.train.input.len(),
            test_samples: self.test.input.len(),
            test_offset_samples: self.test_offset_samples,
            calibrated: self.calibrated,
            target_offset_samples: self.target_offset_samples,
            metadata: self.train.metadata.clone(),
        }
    }
}

fn slice_pair(
    pair: &DatasetPair,
    start: usize,
    len: usize,
    label: &str,
) -> Result<DatasetPair> {
    DatasetPair::new(
        pair.input.slice(start, len)?,
        pair.target.slice(start, len)?,
        label,
        pair.metadata.clone(),
    )
}

/// Build an aligned, split dataset. When a bypass/calibration recording is
/// given it replaces the nominal input, so the recording chain's coloration
/// appears on both sides of the pair. `target_offset_samples` is the index in
/// the target recording that lines up with input sample 0 (positive when the
/// target recording starts earlier than the input's time origin).
pub fn make_dataset(
    nominal_input: &AudioBuffer,
    target: &AudioBuffer,
    calibration: Option<&AudioBuffer>,
    target_offset_samples: i64,
    label: &str,
    metadata: PairMetadata,
    split: &SplitSpec,
) -> Result<DatasetSplit> {
    let input = calibration.unwrap_or(nominal_input);
    let fs = input.sample_rate();
    if (fs - target.sample_rate()).abs() > 1e-9 * fs {
        return Err(Error::Input(format!(
            "sample rates differ: input {fs} vs target {}",
            target.sample_rate()
        )));
    }

    let (in_start, tgt_start) = if target_offset_samples >= 0 {
        (0usize, target_offset_samples as usize)
    } else {
        ((-target_offset_samples) as usize, 0usize)
    };
    if in_start >= input.len() || tgt_start >= target.len() {
        return Err(Error::Input(format!(
            "offset {target_offset_samples} leaves no overlap between the recordings"
        )));
    }
    let in_avail = input.len() - in_start;
    let tgt_avail = target.len() - tgt_start;
    let aligned = in_avail.min(tgt_avail);
    let mismatch = in_avail.abs_diff(tgt_avail);
    if mismatch as f64 > LENGTH_TOLERANCE_SECONDS * fs {
        return Err(Error::Input(format!(
            "aligned lengths differ by {mismatch} samples, beyond the {LENGTH_TOLERANCE_SECONDS} s tolerance"
        )));
    }

    let full = DatasetPair::new(
        input.slice(in_start, aligned)?,
        target.slice(tgt_start, aligned)?,
        label,
        metadata,
    )?;

    if !(split.train_seconds.is_finite() && split.train_seconds > 0.0)
        || !(split.test_seconds.is_finite() && split.test_seconds > 0.0)
    {
        return Err(Error::Config(format!(
            "split lengths must be positive, got train {} s and test {} s",
            split.train_seconds, split.test_seconds
        )));
    }
    let train_n = (split.train_seconds * fs).round() as usize;
    let test_n = (split.test_seconds * fs).round() as usize;
    if train_n == 0 || test_n == 0 || train_n + test_n > aligned {
        return Err(Error::Config(format!(
            "split of {train_n} + {test_n} samples does not fit the {aligned} aligned samples"
        )));
    }

    Ok(DatasetSplit {
        train: slice_pair(&full, 0, train_n, label)?,
        test: slice_pair(&full, train_n, test_n, label)?,
        test_offset_samples: train_n as f64,
        calibrated: calibration.is_some(),
        target_offset_samples,
    })
}
