//! The learnable phaser: complex-sinusoid LFO, MLP waveshaper, all-pass
//! parameter map, and the frame-dependent transfer function built from two
//! biquads around the K-stage all-pass cascade with delayed feedback.
//!
//! Per frame m the model computes
//!     s_m = Re(z_b z_a^m)                  (LFO)
//!     d_m = MLP(s_m)                       (waveshaper)
//!     p_m = (1 - tan d_m)/(1 + tan d_m)    (all-pass coefficient)
//! and evaluates on each DFT root of unity
//!     H_m = h1 (g1 + h2 a_m / (1 - |g2| z^{-I(phi) phi} h2 a_m)),
//! with a_m the K-th power of the first-order all-pass and I the Heaviside
//! gate that keeps the feedback delay causal.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};
use crate::frame::FrameConfig;
use crate::spectral::{SpectralEngine, SpectralFilter};

// ── LFO ────────────────────────────────────────────────────────────────────

/// z^e for complex z given in polar pieces, with the principal branch for
/// non-integer exponents. 0^0 is taken as 1.
fn complex_pow(z: Complex64, e: f64) -> Complex64 {
    if e == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let r = z.norm();
    if r == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    Complex64::from_polar(r.powf(e), z.arg() * e)
}

/// LFO sample s_m = Re(z_b z_a^m). The frame index is real-valued so a model
/// trained at one frame rate can be evaluated at another.
pub fn lfo_sample(z_a: Complex64, z_b: Complex64, m: f64) -> f64 {
    (z_b * complex_pow(z_a, m)).re
}

/// Wirtinger derivatives of s_m: (ds/dz_a, ds/dz_b) = (m z_b z_a^{m-1}/2, z_a^m/2).
/// The m = 0 term contributes nothing through z_a.
pub fn lfo_wirtinger(z_a: Complex64, z_b: Complex64, m: f64) -> (Complex64, Complex64) {
    let d_zb = complex_pow(z_a, m) * 0.5;
    let d_za = if m == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        z_b * complex_pow(z_a, m - 1.0) * (0.5 * m)
    };
    (d_za, d_zb)
}

/// Whether the damped LFO is used as stored (training) or projected to the
/// unit circle for a lossless oscillation (inference).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LfoMode {
    Training,
    Inference,
}

/// Maps processing-frame indices onto the training frame axis so the LFO
/// stays phase-consistent in wall-clock time when the window, hop, or segment
/// offset differ from the training run. Frame centers are aligned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LfoMap {
    pub train_frame_len: usize,
    pub train_hop: usize,
    pub offset_samples: f64,
}

impl LfoMap {
    /// The identity map for a model evaluated in its training geometry.
    pub fn matched(cfg: &FrameConfig) -> Self {
        Self { train_frame_len: cfg.frame_len(), train_hop: cfg.hop(), offset_samples: 0.0 }
    }

    /// Same geometry, but the signal starts `offset` samples into the
    /// recording the model was trained on.
    pub fn offset(cfg: &FrameConfig, offset: f64) -> Self {
        Self { train_frame_len: cfg.frame_len(), train_hop: cfg.hop(), offset_samples: offset }
    }

    /// Effective training-frame index of processing frame `m` under `actual`.
    pub fn frame_index(&self, m: usize, actual: &FrameConfig) -> f64 {
        let center_shift = (actual.frame_len() as f64 - self.train_frame_len as f64) / 2.0;
        ((m * actual.hop()) as f64 + center_shift + self.offset_samples) / self.train_hop as f64
    }
}

// ── MLP waveshaper ─────────────────────────────────────────────────────────

/// One dense layer, weights row-major with shape (rows, cols).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, weights: vec![0.0; rows * cols], biases: vec![0.0; rows] }
    }

    fn forward(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for r in 0..self.rows {
            let row = &self.weights[r * self.cols..(r + 1) * self.cols];
            let mut acc = self.biases[r];
            for (w, x) in row.iter().zip(input) {
                acc += w * x;
            }
            out.push(acc);
        }
    }
}

/// Scalar-in, scalar-out perceptron: layers 1 -> 8 -> 8 -> 8 -> 1, tanh on
/// the hidden layers, linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<DenseLayer>,
}

/// Fixed layer shapes (rows, cols) of the waveshaper.
pub const MLP_SHAPES: [(usize, usize); 4] = [(8, 1), (8, 8), (8, 8), (1, 8)];

impl MlpParams {
    pub fn zeros() -> Self {
        Self { layers: MLP_SHAPES.iter().map(|&(r, c)| DenseLayer::zeros(r, c)).collect() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.len() != MLP_SHAPES.len() {
            return Err(Error::Config(format!(
                "waveshaper needs {} layers, got {}",
                MLP_SHAPES.len(),
                self.layers.len()
            )));
        }
        for (layer, &(r, c)) in self.layers.iter().zip(&MLP_SHAPES) {
            if layer.rows != r
                || layer.cols != c
                || layer.weights.len() != r * c
                || layer.biases.len() != r
            {
                return Err(Error::Config(format!(
                    "waveshaper layer has shape ({}, {}), expected ({r}, {c})",
                    layer.rows, layer.cols
                )));
            }
            if layer.weights.iter().chain(&layer.biases).any(|v| !v.is_finite()) {
                return Err(Error::Config("waveshaper parameters must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn forward(&self, s: f64) -> f64 {
        let mut cur = vec![s];
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward(&cur, &mut next);
            if i != last {
                for v in next.iter_mut() {
                    *v = v.tanh();
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur[0]
    }

    /// Forward pass that records every layer's activation for backprop.
    pub(crate) fn forward_trace(&self, s: f64) -> MlpTrace {
        let mut acts = vec![vec![s]];
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward(acts.last().unwrap(), &mut next);
            if i != last {
                for v in next.iter_mut() {
                    *v = v.tanh();
                }
            }
            acts.push(std::mem::take(&mut next));
        }
        MlpTrace { acts }
    }

    /// Backprop `upstream` = dL/d(output) through a recorded trace,
    /// accumulating parameter gradients into `grads` (same shape as self)
    /// and returning dL/d(input).
    pub(crate) fn backward(&self, trace: &MlpTrace, upstream: f64, grads: &mut MlpParams) -> f64 {
        let mut delta = vec![upstream];
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &trace.acts[i];
            let grad_layer = &mut grads.layers[i];
            let mut d_input = vec![0.0; layer.cols];
            for r in 0..layer.rows {
                let d = delta[r];
                grad_layer.biases[r] += d;
                let row = &layer.weights[r * layer.cols..(r + 1) * layer.cols];
                let grow = &mut grad_layer.weights[r * layer.cols..(r + 1) * layer.cols];
                for c in 0..layer.cols {
                    grow[c] += d * input[c];
                    d_input[c] += d * row[c];
                }
            }
            if i > 0 {
                // undo the tanh of the previous layer: act = tanh(pre)
                for (di, a) in d_input.iter_mut().zip(&trace.acts[i]) {
                    *di *= 1.0 - a * a;
                }
            }
            delta = d_input;
        }
        delta[0]
    }
}

pub(crate) struct MlpTrace {
    /// acts[0] is the input; acts[i] the (post-activation) output of layer i-1.
    pub acts: Vec<Vec<f64>>,
}

// ── all-pass parameter map ─────────────────────────────────────────────────

const TAN_GUARD: f64 = 1e-6;

/// p = (1 - tan d)/(1 + tan d). Rejects d within 1e-6 of the tangent poles
/// pi/2 + k pi so a diverging waveshaper surfaces as an error, not a NaN.
pub fn allpass_param(d: f64) -> Result<f64> {
    if !d.is_finite() {
        return Err(Error::TanSingularity { d });
    }
    let u = (d - std::f64::consts::FRAC_PI_2).rem_euclid(std::f64::consts::PI);
    if u.min(std::f64::consts::PI - u) < TAN_GUARD {
        return Err(Error::TanSingularity { d });
    }
    let t = d.tan();
    Ok((1.0 - t) / (1.0 + t))
}

/// dp/dd = -2 (1 + tan^2 d) / (1 + tan d)^2.
pub fn allpass_param_grad(d: f64) -> f64 {
    let t = d.tan();
    -2.0 * (1.0 + t * t) / ((1.0 + t) * (1.0 + t))
}

// ── parameters ─────────────────────────────────────────────────────────────

/// Second-order section coefficients; the response is evaluated in z^{-1}:
/// h(zeta) = (b0 + b1 zeta + b2 zeta^2)/(1 + a1 zeta + a2 zeta^2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    pub fn identity() -> Self {
        Self { b0: 1.0, b1: 0.0, b2: 0.0, a1: 0.0, a2: 0.0 }
    }

    pub fn numerator(&self, zinv: Complex64, zinv2: Complex64) -> Complex64 {
        self.b0 + self.b1 * zinv + self.b2 * zinv2
    }

    pub fn denominator(&self, zinv: Complex64, zinv2: Complex64) -> Complex64 {
        1.0 + self.a1 * zinv + self.a2 * zinv2
    }

    fn is_finite(&self) -> bool {
        [self.b0, self.b1, self.b2, self.a1, self.a2].iter().all(|v| v.is_finite())
    }
}

/// Everything the trainer learns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub z_a: Complex64,
    pub z_b: Complex64,
    pub mlp: MlpParams,
    pub g1: f64,
    pub g2: f64,
    pub phi: f64,
    pub biquad1: Biquad,
    pub biquad2: Biquad,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        self.mlp.validate()?;
        let scalars = [
            self.z_a.re, self.z_a.im, self.z_b.re, self.z_b.im, self.g1, self.g2, self.phi,
        ];
        if scalars.iter().any(|v| !v.is_finite())
            || !self.biquad1.is_finite()
            || !self.biquad2.is_finite()
        {
            return Err(Error::Config("model parameters must be finite".into()));
        }
        Ok(())
    }

    /// Total scalar parameter count (complex values count as two).
    pub fn flat_len(&self) -> usize {
        17 + self.mlp.num_params()
    }

    /// Canonical flattening: [za.re, za.im, zb.re, zb.im, g1, g2, phi,
    /// biquad1 (b0 b1 b2 a1 a2), biquad2, then each MLP layer's weights
    /// row-major followed by its biases].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.flat_len());
        v.extend([self.z_a.re, self.z_a.im, self.z_b.re, self.z_b.im]);
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

    pub fn from_flat(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.flat_len() {
            return Err(Error::Config(format!(
                "flat vector of {} values, expected {}",
                flat.len(),
                self.flat_len()
            )));
        }
        let mut out = self.clone();
        out.z_a = Complex64::new(flat[0], flat[1]);
        out.z_b = Complex64::new(flat[2], flat[3]);
        out.g1 = flat[4];
        out.g2 = flat[5];
        out.phi = flat[6];
        let mut i = 7;
        for q in [&mut out.biquad1, &mut out.biquad2] {
            *q = Biquad { b0: flat[i], b1: flat[i + 1], b2: flat[i + 2], a1: flat[i + 3], a2: flat[i + 4] };
            i += 5;
        }
        for layer in &mut out.mlp.layers {
            let nw = layer.weights.len();
            layer.weights.copy_from_slice(&flat[i..i + nw]);
            i += nw;
            let nb = layer.biases.len();
            layer.biases.copy_from_slice(&flat[i..i + nb]);
            i += nb;
        }
        Ok(out)
    }

    /// The LFO pole actually used in the given mode: inference projects z_a
    /// onto the unit circle for a lossless oscillation.
    pub fn effective_za(&self, mode: LfoMode) -> Result<Complex64> {
        match mode {
            LfoMode::Training => Ok(self.z_a),
            LfoMode::Inference => {
                let r = self.z_a.norm();
                if r == 0.0 {
                    return Err(Error::Config(
                        "z_a = 0 cannot be normalized to the unit circle".into(),
                    ));
                }
                Ok(self.z_a / r)
            }
        }
    }
}

/// Structural hyper-parameters: cascade depth and frame geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelHyper {
    pub stages: usize,
    pub frame: FrameConfig,
    pub mode: LfoMode,
}

impl ModelHyper {
    pub fn new(stages: usize, frame: FrameConfig, mode: LfoMode) -> Result<Self> {
        if stages == 0 {
            return Err(Error::Config("stage count must be positive".into()));
        }
        Ok(Self { stages, frame, mode })
    }
}

// ── frame transfer function ────────────────────────────────────────────────

const DENOM_GUARD: f64 = 1e-12;

/// Per-frame-geometry precomputation shared by every frame of a forward or
/// backward pass: the z^{-1} grid on bins 0..=N'/2, both biquad responses,
/// and the fractional-delay phase term with its phi-derivative.
pub(crate) struct TransferContext {
    pub stages: u32,
    pub g1: f64,
    pub g2: f64,
    pub zinv: Vec<Complex64>,
    pub zinv2: Vec<Complex64>,
    pub h1: Vec<Complex64>,
    pub h2: Vec<Complex64>,
    pub inv_den1: Vec<Complex64>,
    pub inv_den2: Vec<Complex64>,
    pub zphi: Vec<Complex64>,
    pub dzphi: Vec<Complex64>,
}

/// Per-frame intermediates kept for the backward pass.
pub(crate) struct FrameEval {
    /// H on bins 0..=N'/2.
    pub filter: Vec<Complex64>,
    /// First-order all-pass value B per bin.
    pub b: Vec<Complex64>,
    /// a = B^K per bin.
    pub a: Vec<Complex64>,
    /// u = h2 a per bin.
    pub u: Vec<Complex64>,
    /// 1/D with D = 1 - |g2| zphi u.
    pub inv_d: Vec<Complex64>,
    /// 1/(1 - p zinv) per bin, unused at the pinned bin 0.
    pub q: Vec<Complex64>,
}

impl TransferContext {
    pub fn new(params: &ModelParams, stages: usize, frame: &FrameConfig) -> Result<Self> {
        params.validate()?;
        if stages == 0 {
            return Err(Error::Config("stage count must be positive".into()));
        }
        let nd = frame.dft_len();
        let half = nd / 2;
        let mut zinv = Vec::with_capacity(half + 1);
        for k in 0..=half {
            let theta = -2.0 * std::f64::consts::PI * k as f64 / nd as f64;
            zinv.push(Complex64::new(theta.cos(), theta.sin()));
        }
        // pin the self-conjugate bins so the real-parameter chain stays
        // exactly real there and the mirrored filter is exactly Hermitian
        zinv[0] = Complex64::new(1.0, 0.0);
        zinv[half] = Complex64::new(-1.0, 0.0);
        let zinv2: Vec<Complex64> = zinv.iter().map(|z| z * z).collect();

        let mut h1 = Vec::with_capacity(half + 1);
        let mut h2 = Vec::with_capacity(half + 1);
        let mut inv_den1 = Vec::with_capacity(half + 1);
        let mut inv_den2 = Vec::with_capacity(half + 1);
        for k in 0..=half {
            for (q, hs, ds) in [
                (&params.biquad1, &mut h1, &mut inv_den1),
                (&params.biquad2, &mut h2, &mut inv_den2),
            ] {
                let den = q.denominator(zinv[k], zinv2[k]);
                if den.norm() < DENOM_GUARD {
                    return Err(Error::TransferBlowup { bin: k, magnitude: den.norm() });
                }
                let inv = 1.0 / den;
                hs.push(q.numerator(zinv[k], zinv2[k]) * inv);
                ds.push(inv);
            }
        }

        let causal = params.phi > 0.0;
        let mut zphi = Vec::with_capacity(half + 1);
        let mut dzphi = Vec::with_capacity(half + 1);
        for k in 0..=half {
            if !causal {
                zphi.push(Complex64::new(1.0, 0.0));
                dzphi.push(Complex64::new(0.0, 0.0));
            } else if k == half {
                // the Hermitian grid needs a real Nyquist bin; the fractional
                // delay contributes its symmetric (cosine) component there
                let th = std::f64::consts::PI * params.phi;
                zphi.push(Complex64::new(th.cos(), 0.0));
                dzphi.push(Complex64::new(-std::f64::consts::PI * th.sin(), 0.0));
            } else {
                let rate = -2.0 * std::f64::consts::PI * k as f64 / nd as f64;
                let z = Complex64::from_polar(1.0, rate * params.phi);
                zphi.push(z);
                dzphi.push(Complex64::new(0.0, rate) * z);
            }
        }

        Ok(Self {
            stages: stages as u32,
            g1: params.g1,
            g2: params.g2,
            zinv,
            zinv2,
            h1,
            h2,
            inv_den1,
            inv_den2,
            zphi,
            dzphi,
        })
    }

    pub fn num_bins(&self) -> usize {
        self.zinv.len()
    }

    /// Evaluate the transfer function for one frame's all-pass coefficient,
    /// keeping the intermediates the backward pass reuses.
    pub fn eval(&self, p: f64) -> Result<FrameEval> {
        let n = self.num_bins();
        let g2m = self.g2.abs();
        let mut filter = Vec::with_capacity(n);
        let mut b_all = Vec::with_capacity(n);
        let mut a_all = Vec::with_capacity(n);
        let mut u_all = Vec::with_capacity(n);
        let mut invd_all = Vec::with_capacity(n);
        let mut q_all = Vec::with_capacity(n);
        for k in 0..n {
            // at z = 1 the all-pass is (p-1)/(1-p), exactly -1 for any p
            let (b, q) = if k == 0 {
                (Complex64::new(-1.0, 0.0), Complex64::new(0.0, 0.0))
            } else {
                let q = 1.0 / (1.0 - p * self.zinv[k]);
                ((p - self.zinv[k]) * q, q)
            };
            let a = b.powu(self.stages);
            let u = self.h2[k] * a;
            let d = 1.0 - g2m * self.zphi[k] * u;
            if d.norm() < DENOM_GUARD {
                return Err(Error::TransferBlowup { bin: k, magnitude: d.norm() });
            }
            let inv_d = 1.0 / d;
            filter.push(self.h1[k] * (self.g1 + u * inv_d));
            b_all.push(b);
            a_all.push(a);
            u_all.push(u);
            invd_all.push(inv_d);
            q_all.push(q);
        }
        Ok(FrameEval { filter, b: b_all, a: a_all, u: u_all, inv_d: invd_all, q: q_all })
    }
}

/// Public single-frame entry: the Hermitian spectral filter for one all-pass
/// coefficient under the given parameters.
pub fn frame_transfer(
    p: f64,
    params: &ModelParams,
    stages: usize,
    frame: &FrameConfig,
) -> Result<SpectralFilter> {
    let ctx = TransferContext::new(params, stages, frame)?;
    let eval = ctx.eval(p)?;
    SpectralFilter::from_half_spectrum(&eval.filter)
}

// ── forward pass ───────────────────────────────────────────────────────────

/// Run the model over a signal: per frame the LFO, waveshaper, and all-pass
/// map pick p_m, the transfer function filters the frame spectrum, and
/// overlap-add rebuilds the signal.
pub fn forward(
    input: &AudioBuffer,
    params: &ModelParams,
    hyper: &ModelHyper,
    map: &LfoMap,
) -> Result<AudioBuffer> {
    let z_a = params.effective_za(hyper.mode)?;
    let engine = SpectralEngine::new(hyper.frame);
    let ctx = TransferContext::new(params, hyper.stages, &hyper.frame)?;
    engine.process_signal(input, |m| {
        let m_eff = map.frame_index(m, &hyper.frame);
        let s = lfo_sample(z_a, params.z_b, m_eff);
        let d = params.mlp.forward(s);
        let p = allpass_param(d)?;
        let eval = ctx.eval(p)?;
        SpectralFilter::from_half_spectrum(&eval.filter)
    })
}

/// One exported point of the learned modulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LfoPoint {
    pub frame: usize,
    pub time_s: f64,
    pub s: f64,
    pub d: f64,
    pub p: f64,
}

/// The per-frame LFO, waveshaper output, and all-pass coefficient over a
/// number of frames, for export and waveshape analysis.
pub fn lfo_trace(
    params: &ModelParams,
    hyper: &ModelHyper,
    map: &LfoMap,
    frames: usize,
) -> Result<Vec<LfoPoint>> {
    let z_a = params.effective_za(hyper.mode)?;
    let hop_s = hyper.frame.hop() as f64 / hyper.frame.sample_rate();
    (0..frames)
        .map(|m| {
            let m_eff = map.frame_index(m, &hyper.frame);
            let s = lfo_sample(z_a, params.z_b, m_eff);
            let d = params.mlp.forward(s);
            let p = allpass_param(d)?;
            Ok(LfoPoint { frame: m, time_s: m as f64 * hop_s, s, d, p })
        })
        .collect()
}

/// Rows `frame,time_s,s_m,d_m,p_m`.
pub fn lfo_csv(points: &[LfoPoint]) -> String {
    let mut out = String::from("frame,time_s,s_m,d_m,p_m\n");
    for pt in points {
        out.push_str(&format!("{},{},{},{},{}\n", pt.frame, pt.time_s, pt.s, pt.d, pt.p));
    }
    out
}

// ── model files ────────────────────────────────────────────────────────────

/// How a saved model came to be.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Provenance {
    pub seed: u64,
    pub epochs_run: usize,
    pub restarts: usize,
    pub train_esr: f64,
    pub test_esr: Option<f64>,
    pub wall_seconds: f64,
}

/// Self-describing on-disk model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub params: ModelParams,
    pub hyper: ModelHyper,
    pub provenance: Provenance,
}

pub const MODEL_SCHEMA_VERSION: u32 = 1;

impl ModelFile {
    pub fn new(params: ModelParams, hyper: ModelHyper, provenance: Provenance) -> Self {
        Self { schema_version: MODEL_SCHEMA_VERSION, params, hyper, provenance }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: ModelFile = serde_json::from_str(&text)?;
        if file.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "model schema {} unsupported (expected {MODEL_SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        file.params.validate()?;
        Ok(file)
    }
}
