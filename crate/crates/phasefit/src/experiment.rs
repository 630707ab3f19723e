//! The three windowing experiments: a training frame-size sweep on one
//! dataset, the frame-size versus LFO-rate grid on synthesized digital-phaser
//! tasks, and the inference-window sweep that re-evaluates one trained model
//! under different frame geometries without retraining.

use crate::audio::AudioBuffer;
use crate::dataset::{default_chirp_train, make_dataset, DatasetSplit, PairMetadata, SplitSpec};
use crate::error::{Error, Result};
use crate::frame::FrameConfig;
use crate::model::{LfoMap, LfoMode, ModelFile, ModelHyper};
use crate::reference::{render_digital_phaser, DiscretePhaserSpec, TriangleLfoSpec};
use crate::train::{evaluate, train, EvalSet, TrainConfig, TrainReport};

/// Break-frequency sweep of the digital-phaser targets, rad/s.
pub const DP_BREAK_MIN: f64 = 4000.0;
pub const DP_BREAK_MAX: f64 = 16000.0;

// ── experiment 1: training frame-size sweep ────────────────────────────────

#[derive(Debug, Clone)]
pub struct FrameSweepConfig {
    pub windows_ms: Vec<f64>,
    pub stages: usize,
    pub train: TrainConfig,
}

#[derive(Debug, Clone)]
pub struct FrameSweepRow {
    pub label: String,
    pub window_ms: f64,
    pub window_samples: usize,
    pub test_esr: f64,
    pub best_restart: usize,
}

#[derive(Debug, Clone)]
pub struct FrameSweepReport {
    pub rows: Vec<FrameSweepRow>,
    /// The trained report per window, in `windows_ms` order.
    pub reports: Vec<TrainReport>,
}

impl FrameSweepReport {
    pub fn csv(&self) -> String {
        let mut out = String::from("label,window_ms,window_samples,test_esr,best_restart\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.label, r.window_ms, r.window_samples, r.test_esr, r.best_restart
            ));
        }
        out
    }
}

/// Train one model per window length on a fixed dataset and record the
/// held-out ESR of the best restart.
pub fn frame_sweep(split: &DatasetSplit, cfg: &FrameSweepConfig) -> Result<FrameSweepReport> {
    if cfg.windows_ms.is_empty() {
        return Err(Error::Config("no window lengths given".into()));
    }
    let fs = split.train.input.sample_rate();
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for &w_ms in &cfg.windows_ms {
        let frame = FrameConfig::new(w_ms / 1000.0, fs)?;
        let hyper = ModelHyper::new(cfg.stages, frame, LfoMode::Training)?;
        let eval = EvalSet {
            input: &split.test.input,
            target: &split.test.target,
            offset_samples: split.test_offset_samples,
        };
        let report = train(
            &split.train.input,
            &split.train.target,
            Some(&eval),
            &hyper,
            &cfg.train,
        )?;
        log::info!(
            "{} W={w_ms} ms: test ESR {:.4} (restart {})",
            split.train.label,
            report.best_eval_esr,
            report.best_restart
        );
        rows.push(FrameSweepRow {
            label: split.train.label.clone(),
            window_ms: w_ms,
            window_samples: frame.frame_len(),
            test_esr: report.best_eval_esr,
            best_restart: report.best_restart,
        });
        reports.push(report);
    }
    Ok(FrameSweepReport { rows, reports })
}

// ── experiment 2: frame size vs LFO rate ──────────────────────────────────

#[derive(Debug, Clone)]
pub struct RateSweepConfig {
    pub periods_s: Vec<f64>,
    /// Exponents b of the window schedule W_b = T_0 2^{b/2} / 100.
    pub b_values: Vec<u32>,
    pub train_seconds: f64,
    pub test_seconds: f64,
    pub sample_rate: f64,
    pub g1: f64,
    pub g2: f64,
    pub feedback_delay: usize,
    pub stages: usize,
    pub train: TrainConfig,
}

#[derive(Debug, Clone)]
pub struct RateSweepRow {
    pub period_s: f64,
    pub b: u32,
    pub window_ms: f64,
    pub window_over_period: f64,
    pub test_esr: f64,
}

#[derive(Debug, Clone)]
pub struct RateSweepReport {
    pub rows: Vec<RateSweepRow>,
}

impl RateSweepReport {
    pub fn csv(&self) -> String {
        let mut out = String::from("period_s,b,window_ms,window_over_period,test_esr\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.period_s, r.b, r.window_ms, r.window_over_period, r.test_esr
            ));
        }
        out
    }
}

/// The window schedule W_b = T_0 2^{b/2} / 100 in seconds.
pub fn rate_sweep_window(period_s: f64, b: u32) -> f64 {
    period_s * 2f64.powf(b as f64 / 2.0) / 100.0
}

/// Synthesize one digital-phaser dataset per LFO period and train across the
/// period-scaled window schedule.
pub fn rate_sweep(cfg: &RateSweepConfig) -> Result<RateSweepReport> {
    if cfg.periods_s.is_empty() || cfg.b_values.is_empty() {
        return Err(Error::Config("empty sweep grid".into()));
    }
    let mut rows = Vec::new();
    for &period in &cfg.periods_s {
        let chirp =
            default_chirp_train(cfg.train_seconds + cfg.test_seconds, cfg.sample_rate)?;
        let spec = DiscretePhaserSpec::new(
            DP_BREAK_MIN,
            cfg.stages,
            cfg.g1,
            cfg.g2,
            cfg.sample_rate,
            cfg.feedback_delay,
        )?;
        let lfo = TriangleLfoSpec::new(period, DP_BREAK_MIN, DP_BREAK_MAX, 0.0)?;
        let target = render_digital_phaser(&chirp, &spec, &lfo)?;
        let split = make_dataset(
            &chirp,
            &target,
            None,
            0,
            &format!("DP-{period}"),
            PairMetadata { estimated_period_s: Some(period), ..Default::default() },
            &SplitSpec { train_seconds: cfg.train_seconds, test_seconds: cfg.test_seconds },
        )?;
        for &b in &cfg.b_values {
            let w = rate_sweep_window(period, b);
            let sweep = frame_sweep(
                &split,
                &FrameSweepConfig {
                    windows_ms: vec![w * 1000.0],
                    stages: cfg.stages,
                    train: cfg.train,
                },
            )?;
            rows.push(RateSweepRow {
                period_s: period,
                b,
                window_ms: w * 1000.0,
                window_over_period: w / period,
                test_esr: sweep.rows[0].test_esr,
            });
        }
    }
    Ok(RateSweepReport { rows })
}

// ── experiment 3: inference window sweep ──────────────────────────────────

#[derive(Debug, Clone)]
pub struct InferenceSweepConfig {
    pub windows_ms: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct InferenceSweepRow {
    pub window_ms: f64,
    pub window_samples: usize,
    pub test_esr: f64,
}

#[derive(Debug, Clone)]
pub struct InferenceSweepReport {
    pub rows: Vec<InferenceSweepRow>,
}

impl InferenceSweepReport {
    pub fn csv(&self) -> String {
        let mut out = String::from("window_ms,window_samples,test_esr\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.window_ms, r.window_samples, r.test_esr));
        }
        out
    }
}

/// Re-evaluate a trained model over different inference windows. The LFO is
/// remapped onto wall-clock time through the training frame geometry stored
/// in the model, so its phase stays put as the window changes.
pub fn inference_sweep(
    model: &ModelFile,
    input: &AudioBuffer,
    target: &AudioBuffer,
    offset_samples: f64,
    cfg: &InferenceSweepConfig,
) -> Result<InferenceSweepReport> {
    if cfg.windows_ms.is_empty() {
        return Err(Error::Config("no window lengths given".into()));
    }
    let mut rows = Vec::new();
    for &w_ms in &cfg.windows_ms {
        let frame = FrameConfig::new(w_ms / 1000.0, input.sample_rate())?;
        let hyper = ModelHyper::new(model.hyper.stages, frame, LfoMode::Inference)?;
        let map = LfoMap {
            train_frame_len: model.hyper.frame.frame_len(),
            train_hop: model.hyper.frame.hop(),
            offset_samples,
        };
        let esr = evaluate(&model.params, &hyper, input, target, &map)?;
        rows.push(InferenceSweepRow {
            window_ms: w_ms,
            window_samples: frame.frame_len(),
            test_esr: esr,
        });
    }
    Ok(InferenceSweepReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelHyper, Provenance, MODEL_SCHEMA_VERSION};
    use crate::train::init_params;

    fn tiny_dp_split(train_s: f64, test_s: f64) -> DatasetSplit {
        let fs = 44100.0;
        let chirp = default_chirp_train(train_s + test_s, fs).unwrap();
        let spec = DiscretePhaserSpec::new(DP_BREAK_MIN, 4, 1.0, 0.0, fs, 0).unwrap();
        let lfo = TriangleLfoSpec::new(0.5, DP_BREAK_MIN, DP_BREAK_MAX, 0.0).unwrap();
        let target = render_digital_phaser(&chirp, &spec, &lfo).unwrap();
        make_dataset(
            &chirp,
            &target,
            None,
            0,
            "DP-tiny",
            PairMetadata::default(),
            &SplitSpec { train_seconds: train_s, test_seconds: test_s },
        )
        .unwrap()
    }

    fn quick_train() -> TrainConfig {
        TrainConfig { max_epochs: 8, restarts: 1, seed: 11, ..Default::default() }
    }

    #[test]
    fn frame_sweep_covers_every_window() {
        let split = tiny_dp_split(0.25, 0.15);
        let cfg = FrameSweepConfig {
            windows_ms: vec![10.0, 20.0],
            stages: 4,
            train: quick_train(),
        };
        let report = frame_sweep(&split, &cfg).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert_eq!(report.rows[0].window_samples, 440);
        assert_eq!(report.rows[1].window_samples, 880);
        assert!(report.rows.iter().all(|r| r.test_esr.is_finite()));
        let csv = report.csv();
        assert!(csv.starts_with("label,window_ms,window_samples,test_esr,best_restart\n"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn rate_sweep_walks_the_window_schedule() {
        let cfg = RateSweepConfig {
            periods_s: vec![0.5],
            b_values: vec![0, 2],
            train_seconds: 0.3,
            test_seconds: 0.2,
            sample_rate: 44100.0,
            g1: 1.0,
            g2: 0.0,
            feedback_delay: 0,
            stages: 4,
            train: quick_train(),
        };
        let report = rate_sweep(&cfg).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert!((report.rows[0].window_ms - 5.0).abs() < 1e-9);
        assert!((report.rows[1].window_ms - 10.0).abs() < 1e-9);
        assert!((report.rows[0].window_over_period - 0.01).abs() < 1e-12);
        assert!(report.csv().contains("period_s,b"));
    }

    #[test]
    fn inference_sweep_matches_direct_evaluation_at_training_window() {
        let split = tiny_dp_split(0.25, 0.15);
        let frame = FrameConfig::new(0.020, 44100.0).unwrap();
        let hyper = ModelHyper::new(4, frame, LfoMode::Inference).unwrap();
        let model = ModelFile {
            schema_version: MODEL_SCHEMA_VERSION,
            params: init_params(3, frame.frame_rate()),
            hyper,
            provenance: Provenance {
                seed: 3,
                epochs_run: 0,
                restarts: 1,
                train_esr: f64::NAN,
                test_esr: None,
                wall_seconds: 0.0,
            },
        };
        let cfg = InferenceSweepConfig { windows_ms: vec![20.0, 40.0] };
        let report = inference_sweep(
            &model,
            &split.test.input,
            &split.test.target,
            split.test_offset_samples,
            &cfg,
        )
        .unwrap();
        assert_eq!(report.rows.len(), 2);

        let direct = evaluate(
            &model.params,
            &hyper,
            &split.test.input,
            &split.test.target,
            &LfoMap::offset(&frame, split.test_offset_samples),
        )
        .unwrap();
        assert_eq!(report.rows[0].test_esr, direct);
        assert_ne!(report.rows[0].test_esr, report.rows[1].test_esr);
    }
}
