//! Training: error-to-signal loss, hand-derived reverse-mode gradients of the
//! whole frame pipeline, Adam, and the multi-restart outer loop.
//!
//! The entire training sequence is one batch. The backward pass pushes the
//! loss cotangent through overlap-add, synthesis windowing, and the inverse
//! DFT into per-bin cotangents C_m[k], then through the transfer-function
//! quotient rule into every parameter, and finally through the all-pass map,
//! the MLP, and the Wirtinger pairs of the LFO.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};
use crate::frame::segment;
use crate::model::{
    allpass_param, allpass_param_grad, lfo_sample, lfo_trace, lfo_wirtinger, Biquad, LfoMap,
    LfoMode, LfoPoint, MlpParams, ModelHyper, ModelParams, TransferContext,
};
use crate::spectral::{SpectralEngine, OLA_NORM};

// ── loss ───────────────────────────────────────────────────────────────────

/// Error-to-signal ratio: sum((y_hat - y)^2) / sum(y^2).
pub fn esr(target: &AudioBuffer, estimate: &AudioBuffer) -> Result<f64> {
    if target.len() != estimate.len() {
        return Err(Error::Input(format!(
            "length mismatch: target {} vs estimate {}",
            target.len(),
            estimate.len()
        )));
    }
    let energy: f64 = target.samples().iter().map(|v| v * v).sum();
    if energy == 0.0 {
        return Err(Error::Input("target signal has zero energy".into()));
    }
    let err: f64 = target
        .samples()
        .iter()
        .zip(estimate.samples())
        .map(|(y, yh)| (yh - y) * (yh - y))
        .sum();
    Ok(err / energy)
}

// ── gradients ──────────────────────────────────────────────────────────────

/// Real partials of the loss, field-for-field with ModelParams (complex
/// parameters as Re/Im pairs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientSet {
    pub z_a_re: f64,
    pub z_a_im: f64,
    pub z_b_re: f64,
    pub z_b_im: f64,
    pub g1: f64,
    pub g2: f64,
    pub phi: f64,
    pub biquad1: Biquad,
    pub biquad2: Biquad,
    pub mlp: MlpParams,
}

impl GradientSet {
    pub fn zeros() -> Self {
        Self {
            z_a_re: 0.0,
            z_a_im: 0.0,
            z_b_re: 0.0,
            z_b_im: 0.0,
            g1: 0.0,
            g2: 0.0,
            phi: 0.0,
            biquad1: Biquad { b0: 0.0, b1: 0.0, b2: 0.0, a1: 0.0, a2: 0.0 },
            biquad2: Biquad { b0: 0.0, b1: 0.0, b2: 0.0, a1: 0.0, a2: 0.0 },
            mlp: MlpParams::zeros(),
        }
    }

    /// Same canonical ordering as `ModelParams::to_flat`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(17 + self.mlp.num_params());
        v.extend([self.z_a_re, self.z_a_im, self.z_b_re, self.z_b_im]);
        v.extend([self.g1, self.g2, self.phi]);
        for q in [&self.biquad1, &self.biquad2] {
            v.extend([q.b0, q.b1, q.b2, q.a1, q.a2]);
        }
        for layer in &self.mlp.layers {
            v.extend_from_slice(&layer.weights);
            v.extend_from_slice(&layer.biases);
        }
        v
    }

    pub fn all_finite(&self) -> bool {
        self.to_flat().iter().all(|v| v.is_finite())
    }
}

/// Precomputed, parameter-independent state for repeated forward/backward
/// passes over one training pair: frame spectra of the input, target energy,
/// and the FFT plans.
pub struct TrainContext {
    engine: SpectralEngine,
    stages: usize,
    x_spectra: Vec<Vec<Complex64>>,
    target: Vec<f64>,
    energy: f64,
    signal_len: usize,
}

impl TrainContext {
    pub fn new(input: &AudioBuffer, target: &AudioBuffer, hyper: &ModelHyper) -> Result<Self> {
        if hyper.mode != LfoMode::Training {
            return Err(Error::Config(
                "gradients are defined for the damped (training-mode) LFO".into(),
            ));
        }
        if input.len() != target.len() {
            return Err(Error::Input(format!(
                "input of {} samples but target of {}",
                input.len(),
                target.len()
            )));
        }
        if (input.sample_rate() - target.sample_rate()).abs() > 1e-9 * input.sample_rate() {
            return Err(Error::Input("input and target sample rates differ".into()));
        }
        let energy: f64 = target.samples().iter().map(|v| v * v).sum();
        if energy == 0.0 {
            return Err(Error::Input("target signal has zero energy".into()));
        }
        let engine = SpectralEngine::new(hyper.frame);
        let frames = segment(input, &hyper.frame)?;
        let x_spectra: Vec<Vec<Complex64>> = (0..frames.len())
            .map(|m| engine.analyze(frames.frame(m)))
            .collect::<Result<_>>()?;
        Ok(Self {
            engine,
            stages: hyper.stages,
            x_spectra,
            target: target.samples().to_vec(),
            energy,
            signal_len: input.len(),
        })
    }

    pub fn num_frames(&self) -> usize {
        self.x_spectra.len()
    }

    /// One full forward + backward pass: ESR loss and its exact gradient.
    pub fn step(&self, params: &ModelParams) -> Result<(f64, GradientSet)> {
        let cfg = *self.engine.config();
        let n = cfg.frame_len();
        let nd = cfg.dft_len();
        let half = nd / 2;
        let hop = cfg.hop();
        let window = self.engine.window();
        let k_stages = self.stages as u32;

        let ctx = TransferContext::new(params, self.stages, &cfg)?;
        let z_a = params.z_a;
        let z_b = params.z_b;

        // forward: per-frame LFO -> waveshaper -> all-pass -> filtered frame
        let mut traces = Vec::with_capacity(self.num_frames());
        let mut evals = Vec::with_capacity(self.num_frames());
        let mut d_values = Vec::with_capacity(self.num_frames());
        let mut y_hat = vec![0.0; self.signal_len];
        let mut buf = vec![Complex64::new(0.0, 0.0); nd];
        let inv_nd = 1.0 / nd as f64;
        for (m, x_spec) in self.x_spectra.iter().enumerate() {
            let s = lfo_sample(z_a, z_b, m as f64);
            let trace = params.mlp.forward_trace(s);
            let d = trace.acts.last().unwrap()[0];
            let p = allpass_param(d)?;
            let eval = ctx.eval(p)?;

            for k in 0..=half {
                buf[k] = x_spec[k] * eval.filter[k];
            }
            for k in half + 1..nd {
                buf[k] = x_spec[k] * eval.filter[nd - k].conj();
            }
            self.engine.ifft_plan().process(&mut buf);
            let start = m * hop;
            let take = n.min(self.signal_len.saturating_sub(start));
            for i in 0..take {
                y_hat[start + i] += buf[i].re * inv_nd * window[i];
            }

            traces.push(trace);
            evals.push(eval);
            d_values.push(d);
        }
        for v in &mut y_hat {
            *v /= OLA_NORM;
        }

        let mut loss = 0.0;
        for (yh, y) in y_hat.iter().zip(&self.target) {
            loss += (yh - y) * (yh - y);
        }
        loss /= self.energy;

        // backward: loss cotangent back to per-bin cotangents C_m[k]
        let mut grads = GradientSet::zeros();
        let mut g_za = Complex64::new(0.0, 0.0);
        let mut g_zb = Complex64::new(0.0, 0.0);
        let sign_g2 = if params.g2 == 0.0 { 0.0 } else { params.g2.signum() };
        let g2_mag = params.g2.abs();
        let residual_scale = 2.0 / self.energy;

        for (m, x_spec) in self.x_spectra.iter().enumerate() {
            let eval = &evals[m];
            let start = m * hop;
            let take = n.min(self.signal_len.saturating_sub(start));
            for (i, b) in buf.iter_mut().enumerate() {
                let g = if i < take {
                    residual_scale * (y_hat[start + i] - self.target[start + i]) * window[i]
                        / OLA_NORM
                } else {
                    0.0
                };
                *b = Complex64::new(g, 0.0);
            }
            self.engine.fft_plan().process(&mut buf);

            let mut g_p = 0.0;
            for k in 0..=half {
                let wgt = if k == 0 || k == half { 1.0 } else { 2.0 };
                let c = x_spec[k] * buf[k].conj() * inv_nd;
                let t = wgt * c;

                let h1 = ctx.h1[k];
                let inv_d = eval.inv_d[k];
                let inv_d2 = inv_d * inv_d;
                let u = eval.u[k];

                grads.g1 += (t * h1).re;
                let core = t * h1 * u * u * inv_d2;
                grads.g2 += sign_g2 * (core * ctx.zphi[k]).re;
                grads.phi += g2_mag * (core * ctx.dzphi[k]).re;

                // all-pass coefficient: dH/dp = h1 h2 / D^2 * K B^{K-1} dB/dp
                if k > 0 {
                    let q = eval.q[k];
                    let db_dp = (1.0 - ctx.zinv2[k]) * q * q;
                    let bk1 = eval.b[k].powu(k_stages - 1);
                    g_p += (t * h1 * ctx.h2[k] * inv_d2 * (k_stages as f64 * db_dp * bk1)).re;
                }

                // first biquad: H = h1 (g1 + u/D), h1 = num1/den1
                let t1 = t * (params.g1 + u * inv_d);
                let e1 = t1 * ctx.inv_den1[k];
                grads.biquad1.b0 += e1.re;
                grads.biquad1.b1 += (e1 * ctx.zinv[k]).re;
                grads.biquad1.b2 += (e1 * ctx.zinv2[k]).re;
                let f1 = e1 * h1;
                grads.biquad1.a1 -= (f1 * ctx.zinv[k]).re;
                grads.biquad1.a2 -= (f1 * ctx.zinv2[k]).re;

                // second biquad: through both the numerator path and D
                let t2 = t * h1 * eval.a[k] * inv_d2;
                let e2 = t2 * ctx.inv_den2[k];
                grads.biquad2.b0 += e2.re;
                grads.biquad2.b1 += (e2 * ctx.zinv[k]).re;
                grads.biquad2.b2 += (e2 * ctx.zinv2[k]).re;
                let f2 = e2 * ctx.h2[k];
                grads.biquad2.a1 -= (f2 * ctx.zinv[k]).re;
                grads.biquad2.a2 -= (f2 * ctx.zinv2[k]).re;
            }

            let g_d = g_p * allpass_param_grad(d_values[m]);
            let g_s = params.mlp.backward(&traces[m], g_d, &mut grads.mlp);
            let (d_za, d_zb) = lfo_wirtinger(z_a, z_b, m as f64);
            g_za += g_s * d_za;
            g_zb += g_s * d_zb;
        }

        grads.z_a_re = 2.0 * g_za.re;
        grads.z_a_im = -2.0 * g_za.im;
        grads.z_b_re = 2.0 * g_zb.re;
        grads.z_b_im = -2.0 * g_zb.im;
        Ok((loss, grads))
    }
}

/// Loss and exact analytic gradient for one input/target pair.
pub fn backward(
    input: &AudioBuffer,
    target: &AudioBuffer,
    params: &ModelParams,
    hyper: &ModelHyper,
) -> Result<(f64, GradientSet)> {
    TrainContext::new(input, target, hyper)?.step(params)
}

// ── optimizer ──────────────────────────────────────────────────────────────

/// Bias-corrected Adam over a flat parameter vector.
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(len: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self { lr, beta1, beta2, eps, t: 0, m: vec![0.0; len], v: vec![0.0; len] }
    }

    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..theta.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            theta[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

// ── initialization ─────────────────────────────────────────────────────────

/// Fresh parameters: z_a = 0.7 e^{j zeta / F_f} with zeta standard normal,
/// z_b = 1, g1 = 1, g2 = 0.01, phi = 0.5, identity biquads, MLP weights
/// uniform within +-1/sqrt(fan_in) and zero biases.
pub fn init_params(seed: u64, frame_rate: f64) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zeta: f64 = rng.sample(StandardNormal);
    let z_a = Complex64::from_polar(0.7, zeta / frame_rate);
    let mut mlp = MlpParams::zeros();
    for layer in &mut mlp.layers {
        let bound = 1.0 / (layer.cols as f64).sqrt();
        for w in &mut layer.weights {
            *w = rng.gen_range(-bound..bound);
        }
    }
    ModelParams {
        z_a,
        z_b: Complex64::new(1.0, 0.0),
        mlp,
        g1: 1.0,
        g2: 0.01,
        phi: 0.5,
        biquad1: Biquad::identity(),
        biquad2: Biquad::identity(),
    }
}

// ── training loop ──────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStop {
    pub patience_epochs: usize,
    pub min_delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub restarts: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub early_stop: Option<EarlyStop>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            max_epochs: 5000,
            restarts: 3,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            early_stop: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.restarts == 0 {
            return Err(Error::Config("need at least one restart".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("need at least one epoch".into()));
        }
        Ok(())
    }
}

/// Held-out audio used for restart selection, with the sample offset of its
/// first sample inside the recording the model is trained on (so the LFO
/// phase lines up).
pub struct EvalSet<'a> {
    pub input: &'a AudioBuffer,
    pub target: &'a AudioBuffer,
    pub offset_samples: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartOutcome {
    pub seed: u64,
    pub epochs_run: usize,
    pub loss_trace: Vec<f64>,
    pub eval_esr: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub restarts: Vec<RestartOutcome>,
    pub best_restart: usize,
    pub params: ModelParams,
    pub best_eval_esr: f64,
    pub lfo: Vec<LfoPoint>,
    pub wall_seconds: f64,
}

const RESTART_SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

/// ESR of the model run over `input` against `target` under the given mode
/// and frame mapping.
pub fn evaluate(
    params: &ModelParams,
    hyper: &ModelHyper,
    input: &AudioBuffer,
    target: &AudioBuffer,
    map: &LfoMap,
) -> Result<f64> {
    let estimate = crate::model::forward(input, params, hyper, map)?;
    esr(target, &estimate)
}

/// Full training procedure: `restarts` independent runs from fresh seeded
/// initializations, Adam over the whole sequence per epoch, and selection of
/// the restart with the lowest held-out (or training) ESR evaluated in
/// inference mode. Restarts that hit non-finite losses or singularities are
/// recorded as failed and skipped for selection.
pub fn train(
    input: &AudioBuffer,
    target: &AudioBuffer,
    test: Option<&EvalSet>,
    hyper: &ModelHyper,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    let t0 = std::time::Instant::now();
    let train_hyper = ModelHyper { mode: LfoMode::Training, ..*hyper };
    let infer_hyper = ModelHyper { mode: LfoMode::Inference, ..*hyper };
    let tc = TrainContext::new(input, target, &train_hyper)?;
    let frame_rate = hyper.frame.frame_rate();

    let mut outcomes = Vec::with_capacity(cfg.restarts);
    let mut best: Option<(usize, f64, ModelParams)> = None;

    for r in 0..cfg.restarts {
        let seed = cfg.seed.wrapping_add((r as u64).wrapping_mul(RESTART_SEED_STRIDE));
        let mut params = init_params(seed, frame_rate);
        let mut adam = Adam::new(
            params.flat_len(),
            cfg.learning_rate,
            cfg.adam_beta1,
            cfg.adam_beta2,
            cfg.adam_eps,
        );
        let mut trace = Vec::with_capacity(cfg.max_epochs);
        let mut failure: Option<String> = None;
        let mut since_best = 0usize;
        let mut best_loss = f64::INFINITY;

        for epoch in 0..cfg.max_epochs {
            match tc.step(&params) {
                Ok((loss, grads)) => {
                    if !loss.is_finite() {
                        failure =
                            Some(Error::NonFiniteLoss { restart: r, epoch }.to_string());
                        break;
                    }
                    trace.push(loss);
                    if !grads.all_finite() {
                        failure = Some(format!(
                            "non-finite gradient in restart {r} at epoch {epoch}"
                        ));
                        break;
                    }
                    if let Some(es) = &cfg.early_stop {
                        if loss < best_loss - es.min_delta {
                            best_loss = loss;
                            since_best = 0;
                        } else {
                            since_best += 1;
                            if since_best >= es.patience_epochs {
                                break;
                            }
                        }
                    }
                    let mut flat = params.to_flat();
                    adam.step(&mut flat, &grads.to_flat());
                    params = params.from_flat(&flat)?;
                }
                Err(e) => {
                    failure = Some(e.to_string());
                    break;
                }
            }
        }

        let eval_esr = if failure.is_none() {
            let evaluated = match test {
                Some(t) => evaluate(
                    &params,
                    &infer_hyper,
                    t.input,
                    t.target,
                    &LfoMap::offset(&hyper.frame, t.offset_samples),
                ),
                None => {
                    evaluate(&params, &infer_hyper, input, target, &LfoMap::matched(&hyper.frame))
                }
            };
            match evaluated {
                Ok(v) => Some(v),
                Err(e) => {
                    failure = Some(format!("evaluation failed: {e}"));
                    None
                }
            }
        } else {
            None
        };

        if let Some(f) = &failure {
            log::warn!("restart {r} failed: {f}");
        }
        if let Some(v) = eval_esr {
            if best.as_ref().map_or(true, |(_, b, _)| v < *b) {
                best = Some((r, v, params.clone()));
            }
        }
        outcomes.push(RestartOutcome {
            seed,
            epochs_run: trace.len(),
            loss_trace: trace,
            eval_esr,
            failure,
        });
    }

    let (best_restart, best_eval_esr, params) =
        best.ok_or(Error::AllRestartsFailed(cfg.restarts))?;
    let lfo = lfo_trace(&params, &infer_hyper, &LfoMap::matched(&hyper.frame), tc.num_frames())
        .unwrap_or_default();
    Ok(TrainReport {
        restarts: outcomes,
        best_restart,
        params,
        best_eval_esr,
        lfo,
        wall_seconds: t0.elapsed().as_secs_f64(),
    })
}

/// Rows `epoch,restart,train_esr` across every restart's trace.
pub fn loss_csv(report: &TrainReport) -> String {
    let mut out = String::from("epoch,restart,train_esr\n");
    for (r, outcome) in report.restarts.iter().enumerate() {
        for (epoch, loss) in outcome.loss_trace.iter().enumerate() {
            out.push_str(&format!("{epoch},{r},{loss}\n"));
        }
    }
    out
}
