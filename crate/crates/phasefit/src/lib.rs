//! Grey-box phaser modelling: a frame-based spectral pipeline, reference
//! phaser implementations, and a differentiable model trained to match
//! recorded input/output pairs.

pub mod audio;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod frame;
pub mod model;
pub mod reference;
pub mod spectral;
pub mod train;
pub mod wav;

pub use audio::AudioBuffer;
pub use dataset::{make_dataset, synth_chirp_train, DatasetPair, DatasetSplit, SplitSpec};
pub use error::{Error, Result};
pub use frame::{hann_window, segment, FrameConfig, FrameSet};
pub use model::{forward, LfoMap, LfoMode, ModelFile, ModelHyper, ModelParams};
pub use spectral::{SpectralEngine, SpectralFilter, OLA_NORM};
pub use train::{esr, train, EvalSet, GradientSet, TrainConfig, TrainReport};
pub use wav::{read_wav, write_wav, WavFormat};
