//! Reference phaser machinery: continuous- and discrete-time analysis of the
//! all-pass cascade with feedback, plus the sample-by-sample digital phaser
//! used to render training targets with known parameters.
//!
//! The continuous prototype is
//!     H(s) = g1 + A(s)^K / (1 - g2 A(s)^K),   A(s) = (s - w_b)/(s + w_b),
//! and the discrete counterpart swaps A for the first-order digital all-pass
//! and inserts a phi-sample delay in the feedback path.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

// ── specs ──────────────────────────────────────────────────────────────────

/// Analog phaser prototype: K all-pass stages with break frequency `break_freq`
/// (rad/s), a unity through path scaled by `g1`, and feedback gain `g2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuousPhaserSpec {
    pub break_freq: f64,
    pub stages: usize,
    pub g1: f64,
    pub g2: f64,
}

impl ContinuousPhaserSpec {
    pub fn new(break_freq: f64, stages: usize, g1: f64, g2: f64) -> Result<Self> {
        let spec = Self { break_freq, stages, g1, g2 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.break_freq.is_finite() || self.break_freq < 0.0 {
            return Err(Error::Config(format!(
                "break frequency must be finite and non-negative, got {}",
                self.break_freq
            )));
        }
        if self.stages == 0 {
            return Err(Error::Config("stage count must be positive".into()));
        }
        if !self.g1.is_finite() {
            return Err(Error::Config("g1 must be finite".into()));
        }
        if !self.g2.is_finite() || !(0.0..1.0).contains(&self.g2) {
            return Err(Error::Config(format!(
                "g2 must lie in [0, 1), got {}",
                self.g2
            )));
        }
        Ok(())
    }
}

/// Digital phaser: the continuous spec plus a sample rate and a feedback
/// delay of `feedback_delay` samples.
///
/// `feedback_delay = 0` with nonzero g2 describes a delay-free loop; the
/// frequency-domain response is still well defined, so the spec permits it
/// and only the time-domain renderer rejects it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscretePhaserSpec {
    pub break_freq: f64,
    pub stages: usize,
    pub g1: f64,
    pub g2: f64,
    pub sample_rate: f64,
    pub feedback_delay: usize,
}

impl DiscretePhaserSpec {
    pub fn new(
        break_freq: f64,
        stages: usize,
        g1: f64,
        g2: f64,
        sample_rate: f64,
        feedback_delay: usize,
    ) -> Result<Self> {
        let spec = Self { break_freq, stages, g1, g2, sample_rate, feedback_delay };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        ContinuousPhaserSpec {
            break_freq: self.break_freq,
            stages: self.stages,
            g1: self.g1,
            g2: self.g2,
        }
        .validate()?;
        if !self.sample_rate.is_finite() || self.sample_rate <= 0.0 {
            return Err(Error::Config(format!(
                "sample rate must be positive, got {}",
                self.sample_rate
            )));
        }
        Ok(())
    }
}

/// Triangle LFO sweeping the break frequency between `break_min` and
/// `break_max` (rad/s) over `period` seconds. Phase 0 starts at the minimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangleLfoSpec {
    pub period: f64,
    pub break_min: f64,
    pub break_max: f64,
    pub initial_phase: f64,
}

impl TriangleLfoSpec {
    pub fn new(period: f64, break_min: f64, break_max: f64, initial_phase: f64) -> Result<Self> {
        let spec = Self { period, break_min, break_max, initial_phase };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.period.is_finite() || self.period <= 0.0 {
            return Err(Error::Config(format!(
                "LFO period must be positive, got {}",
                self.period
            )));
        }
        if !(self.break_min > 0.0 && self.break_min <= self.break_max && self.break_max.is_finite())
        {
            return Err(Error::Config(format!(
                "need 0 < break_min <= break_max, got {} and {}",
                self.break_min, self.break_max
            )));
        }
        if !(0.0..1.0).contains(&self.initial_phase) {
            return Err(Error::Config(format!(
                "initial phase must lie in [0, 1), got {}",
                self.initial_phase
            )));
        }
        Ok(())
    }

    /// Instantaneous break frequency at time `t` seconds: a symmetric
    /// triangle from `break_min` up to `break_max` and back.
    pub fn break_freq_at(&self, t: f64) -> f64 {
        let tau = (t / self.period + self.initial_phase).rem_euclid(1.0);
        let tri = if tau < 0.5 { 2.0 * tau } else { 2.0 * (1.0 - tau) };
        self.break_min + (self.break_max - self.break_min) * tri
    }
}

// ── analysis ───────────────────────────────────────────────────────────────

/// First-order all-pass coefficient from the bilinear map:
/// p = (1 - tan(w_b T / 2)) / (1 + tan(w_b T / 2)).
pub fn allpass_coefficient(break_freq: f64, sample_rate: f64) -> Result<f64> {
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(Error::Config(format!("bad sample rate {sample_rate}")));
    }
    if !(break_freq.is_finite() && break_freq >= 0.0)
        || break_freq >= std::f64::consts::PI * sample_rate
    {
        return Err(Error::Config(format!(
            "break frequency {break_freq} rad/s outside [0, pi * {sample_rate})"
        )));
    }
    let t = (0.5 * break_freq / sample_rate).tan();
    Ok((1.0 - t) / (1.0 + t))
}

/// Phase response of the continuous all-pass stage, Theta(w) = pi - 2 arctan(w / w_b).
pub fn continuous_allpass_phase(omega: f64, break_freq: f64) -> f64 {
    std::f64::consts::PI - 2.0 * omega.atan2(break_freq)
}

fn allpass_s(s: Complex64, break_freq: f64) -> Complex64 {
    (s - break_freq) / (s + break_freq)
}

fn transfer_from_allpass(a_pow_k: Complex64, g1: f64, g2: f64, fb: Complex64) -> Complex64 {
    g1 + a_pow_k / (1.0 - g2 * fb * a_pow_k)
}

/// H(jw) on a grid of angular frequencies (rad/s), with the stage evaluated
/// through its phase response so |A| = 1 holds exactly.
pub fn continuous_response(spec: &ContinuousPhaserSpec, omega: &[f64]) -> Result<Vec<Complex64>> {
    spec.validate()?;
    let one = Complex64::new(1.0, 0.0);
    Ok(omega
        .iter()
        .map(|&w| {
            let theta = continuous_allpass_phase(w, spec.break_freq);
            let a = Complex64::from_polar(1.0, theta * spec.stages as f64);
            transfer_from_allpass(a, spec.g1, spec.g2, one)
        })
        .collect())
}

/// Poles and zeros of the continuous transfer function.
///
/// Poles:  xi_k = w_b (1 + lambda_k)/(1 - lambda_k),  lambda_k = e^{j 2 pi k / K} / g2^{1/K}.
/// Zeros:  eta_k = w_b (1 + beta_k)/(1 - beta_k),
///         beta_k = (g1 / (1 - g1 g2))^{1/K} e^{j pi (2k + 1) / K}.
/// Both use the principal real positive K-th root. The g2 = 0 limit sends all
/// poles to -w_b.
pub fn poles_zeros(spec: &ContinuousPhaserSpec) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    spec.validate()?;
    let k = spec.stages;
    let wb = spec.break_freq;
    let kf = k as f64;
    let pi = std::f64::consts::PI;

    let poles: Vec<Complex64> = if spec.g2 == 0.0 {
        vec![Complex64::new(-wb, 0.0); k]
    } else {
        let mag = spec.g2.powf(-1.0 / kf);
        (0..k)
            .map(|i| {
                let lambda = Complex64::from_polar(mag, 2.0 * pi * i as f64 / kf);
                wb * (1.0 + lambda) / (1.0 - lambda)
            })
            .collect()
    };

    let ratio_den = 1.0 - spec.g1 * spec.g2;
    if ratio_den == 0.0 {
        return Err(Error::Config("zeros are singular when g1 * g2 = 1".into()));
    }
    let ratio = spec.g1 / ratio_den;
    if ratio < 0.0 {
        return Err(Error::Config(format!(
            "zeros need g1 / (1 - g1 g2) >= 0, got {ratio}"
        )));
    }
    let beta_mag = ratio.powf(1.0 / kf);
    let zeros: Vec<Complex64> = (0..k)
        .map(|i| {
            let beta = Complex64::from_polar(beta_mag, pi * (2.0 * i as f64 + 1.0) / kf);
            wb * (1.0 + beta) / (1.0 - beta)
        })
        .collect();

    Ok((poles, zeros))
}

/// H(s) evaluated from the stage definition, for pole/zero residual checks.
pub fn continuous_response_at(spec: &ContinuousPhaserSpec, s: Complex64) -> Complex64 {
    let a = allpass_s(s, spec.break_freq).powu(spec.stages as u32);
    transfer_from_allpass(a, spec.g1, spec.g2, Complex64::new(1.0, 0.0))
}

/// H_d(e^{jw}) on a grid of normalized frequencies (rad/sample).
///
/// Bins whose feedback denominator falls below 1e-12 in magnitude are
/// reported and set to a complex-infinity sentinel.
pub fn discrete_response(spec: &DiscretePhaserSpec, omega: &[f64]) -> Result<Vec<Complex64>> {
    spec.validate()?;
    let p = allpass_coefficient(spec.break_freq, spec.sample_rate)?;
    Ok(omega
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let zinv = Complex64::from_polar(1.0, -w);
            let a = ((p - zinv) / (1.0 - p * zinv)).powu(spec.stages as u32);
            let fb = Complex64::from_polar(1.0, -w * spec.feedback_delay as f64);
            let den = 1.0 - spec.g2 * fb * a;
            if den.norm() < 1e-12 {
                log::warn!("feedback denominator vanishes at bin {i} (omega = {w})");
                Complex64::new(f64::INFINITY, 0.0)
            } else {
                spec.g1 + a / den
            }
        })
        .collect())
}

// ── time-domain oracle ─────────────────────────────────────────────────────

/// One first-order all-pass stage, transposed direct form II:
/// y = p x + s, then s <- p y - x. A single state survives coefficient
/// changes, so the time-varying update is unambiguous.
#[derive(Debug, Clone, Copy, Default)]
pub struct AllpassStage {
    state: f64,
}

impl AllpassStage {
    pub fn tick(&mut self, x: f64, p: f64) -> f64 {
        let y = p * x + self.state;
        self.state = p * y - x;
        y
    }

    pub fn reset(&mut self) {
        self.state = 0.0;
    }
}

/// Sample-by-sample digital phaser: per sample the triangle LFO sets the
/// break frequency, the all-pass coefficient is refreshed, the K-stage
/// cascade runs on input plus g2-scaled feedback from a phi-sample delay
/// line, and the output is g1 * x plus the cascade output.
pub fn render_digital_phaser(
    input: &AudioBuffer,
    spec: &DiscretePhaserSpec,
    lfo: &TriangleLfoSpec,
) -> Result<AudioBuffer> {
    spec.validate()?;
    lfo.validate()?;
    if (input.sample_rate() - spec.sample_rate).abs() > 1e-9 * spec.sample_rate {
        return Err(Error::Input(format!(
            "input at {} Hz, spec wants {} Hz",
            input.sample_rate(),
            spec.sample_rate
        )));
    }
    if spec.g2 != 0.0 && spec.feedback_delay == 0 {
        return Err(Error::Config(
            "nonzero feedback with zero delay is a delay-free loop".into(),
        ));
    }
    if lfo.break_max >= std::f64::consts::PI * spec.sample_rate {
        return Err(Error::Config(format!(
            "LFO maximum {} rad/s reaches the tangent singularity",
            lfo.break_max
        )));
    }

    let fs = spec.sample_rate;
    let k = spec.stages;
    let mut stages = vec![AllpassStage::default(); k];
    let fb_len = spec.feedback_delay.max(1);
    let mut delay_line = vec![0.0; fb_len];
    let mut idx = 0usize;
    let use_fb = spec.g2 != 0.0;

    let mut out = Vec::with_capacity(input.len());
    for (n, &x) in input.samples().iter().enumerate() {
        let wb = lfo.break_freq_at(n as f64 / fs);
        let t = (0.5 * wb / fs).tan();
        let p = (1.0 - t) / (1.0 + t);

        let mut v = x;
        if use_fb {
            v += spec.g2 * delay_line[idx];
        }
        for stage in &mut stages {
            v = stage.tick(v, p);
        }
        if use_fb {
            delay_line[idx] = v;
            idx += 1;
            if idx == fb_len {
                idx = 0;
            }
        }
        out.push(spec.g1 * x + v);
    }
    AudioBuffer::new(out, fs)
}

// ── measurement ────────────────────────────────────────────────────────────

/// Decay time from an impulse response: block-max envelope (1 ms blocks),
/// linear fit of the dB slope between 10 dB and 120 dB below the peak,
/// extrapolated to a 60 dB drop. Returns None when no clean decay exists.
pub fn measure_t60(response: &[f64], sample_rate: f64) -> Option<f64> {
    let block = ((0.001 * sample_rate).round() as usize).max(1);
    let mut env_db = Vec::new();
    let mut times = Vec::new();
    for (i, chunk) in response.chunks(block).enumerate() {
        let peak = chunk.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        if peak > 0.0 {
            env_db.push(20.0 * peak.log10());
            times.push((i * block + block / 2) as f64 / sample_rate);
        }
    }
    let peak_db = env_db.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(&env_db)
        .filter(|(_, &db)| db < peak_db - 10.0 && db > peak_db - 120.0)
        .map(|(&t, &db)| (t, db))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (sx, sy): (f64, f64) = pts.iter().fold((0.0, 0.0), |(a, b), (t, d)| (a + t, b + d));
    let (sxx, sxy): (f64, f64) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (t, d)| (a + t * t, b + t * d));
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    if slope >= 0.0 {
        return None;
    }
    Some(-60.0 / slope)
}

// ── CSV export ─────────────────────────────────────────────────────────────

/// Magnitude/phase rows: `frequency_hz,magnitude_db,phase_rad`.
pub fn response_csv(freq_hz: &[f64], response: &[Complex64]) -> String {
    let mut out = String::from("frequency_hz,magnitude_db,phase_rad\n");
    for (f, h) in freq_hz.iter().zip(response) {
        let mag_db = 20.0 * h.norm().log10();
        out.push_str(&format!("{f},{mag_db},{}\n", h.arg()));
    }
    out
}

/// Root-locus rows over a g2 grid: `g2,pole_re,pole_im,zero_re,zero_im`,
/// K rows per g2 value.
pub fn locus_csv(base: &ContinuousPhaserSpec, g2_grid: &[f64]) -> Result<String> {
    let mut out = String::from("g2,pole_re,pole_im,zero_re,zero_im\n");
    for &g2 in g2_grid {
        let spec = ContinuousPhaserSpec { g2, ..*base };
        let (poles, zeros) = poles_zeros(&spec)?;
        for (p, z) in poles.iter().zip(&zeros) {
            out.push_str(&format!("{g2},{},{},{},{}\n", p.re, p.im, z.re, z.im));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rustfft::FftPlanner;

    const FS: f64 = 44100.0;

    fn table2_spec() -> DiscretePhaserSpec {
        DiscretePhaserSpec::new(4000.0, 4, 1.0, 0.7, FS, 1).unwrap()
    }

    #[test]
    fn allpass_coefficient_limits() {
        assert_eq!(allpass_coefficient(0.0, FS).unwrap(), 1.0);
        let p0 = allpass_coefficient(std::f64::consts::PI * FS / 2.0, FS).unwrap();
        assert!(p0.abs() < 1e-12);
        assert!(allpass_coefficient(std::f64::consts::PI * FS, FS).is_err());
        assert!(allpass_coefficient(-1.0, FS).is_err());
    }

    #[test]
    fn allpass_coefficient_at_1khz() {
        let p = allpass_coefficient(2.0 * std::f64::consts::PI * 1000.0, FS).unwrap();
        assert!((p - 0.86678843949963524).abs() < 1e-12);
        assert!((p - 0.8668).abs() < 2e-5);
    }

    #[test]
    fn stage_phase_quadrature_at_break() {
        let theta = continuous_allpass_phase(7.0, 7.0);
        assert!((theta - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn continuous_dc_value() {
        for g2 in [0.0, 0.3, 0.7, 0.95] {
            let spec = ContinuousPhaserSpec::new(1000.0, 4, 1.0, g2).unwrap();
            let h = continuous_response(&spec, &[0.0]).unwrap()[0];
            let expect = 1.0 + 1.0 / (1.0 - g2);
            assert!((h - expect).norm() < 1e-12, "g2 = {g2}: {h}");
        }
    }

    #[test]
    fn continuous_notches_without_feedback() {
        let wb = 5000.0;
        let spec = ContinuousPhaserSpec::new(wb, 4, 1.0, 0.0).unwrap();
        let notches = [
            wb * (std::f64::consts::PI / 8.0).tan(),
            wb * (3.0 * std::f64::consts::PI / 8.0).tan(),
        ];
        let h = continuous_response(&spec, &notches).unwrap();
        for (w, v) in notches.iter().zip(&h) {
            assert!(v.norm() <= 1e-9, "no notch at {w}: |H| = {}", v.norm());
        }
        // and the notch frequencies are distinct points on the positive axis
        assert!(notches[0] > 0.0 && notches[1] > notches[0]);
    }

    #[test]
    fn pole_zero_residuals() {
        for g2 in [0.3, 0.5, 0.9] {
            let spec = ContinuousPhaserSpec::new(3000.0, 4, 1.0, g2).unwrap();
            let (poles, zeros) = poles_zeros(&spec).unwrap();
            assert_eq!(poles.len(), 4);
            assert_eq!(zeros.len(), 4);
            for xi in &poles {
                let a = allpass_s(*xi, spec.break_freq).powu(4);
                let den = (1.0 - spec.g2 * a).norm();
                assert!(den <= 1e-9, "g2 = {g2}: pole residual {den}");
            }
            for eta in &zeros {
                let h = continuous_response_at(&spec, *eta).norm();
                assert!(h <= 1e-9, "g2 = {g2}: zero residual {h}");
            }
        }
    }

    #[test]
    fn poles_without_feedback_sit_at_minus_break() {
        let spec = ContinuousPhaserSpec::new(2500.0, 4, 1.0, 0.0).unwrap();
        let (poles, _) = poles_zeros(&spec).unwrap();
        for p in poles {
            assert_eq!(p, Complex64::new(-2500.0, 0.0));
        }
    }

    #[test]
    fn feedback_limit_puts_poles_on_imaginary_axis() {
        let wb = 2000.0;
        let spec = ContinuousPhaserSpec::new(wb, 4, 1.0, 1.0 - 1e-12).unwrap();
        let (poles, _) = poles_zeros(&spec).unwrap();
        // k = 2 pole collapses to DC, k = 1 to +j w_b
        assert!(poles[2].norm() <= 1e-9 * wb, "DC pole at {}", poles[2]);
        assert!((poles[1] - Complex64::new(0.0, wb)).norm() <= 1e-9 * wb);
    }

    #[test]
    fn zeros_singular_when_g1_g2_unity() {
        let spec = ContinuousPhaserSpec { break_freq: 1000.0, stages: 4, g1: 2.0, g2: 0.5 };
        assert!(poles_zeros(&spec).is_err());
    }

    #[test]
    fn discrete_allpass_cascade_alone_is_allpass() {
        let spec = DiscretePhaserSpec::new(4000.0, 4, 0.0, 0.0, FS, 0).unwrap();
        let omega: Vec<f64> = (1..500).map(|i| i as f64 * 0.006).collect();
        for h in discrete_response(&spec, &omega).unwrap() {
            assert!((h.norm() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn discrete_denominator_blowup_flagged() {
        let spec = DiscretePhaserSpec::new(4000.0, 4, 1.0, 1.0 - 1e-13, FS, 1).unwrap();
        let h = discrete_response(&spec, &[0.0, 1.0]).unwrap();
        assert!(h[0].re.is_infinite());
        assert!(h[1].is_finite());
    }

    #[test]
    fn feedback_delay_reshapes_high_frequencies() {
        let wb = 2.0 * std::f64::consts::PI * 1000.0;
        let omega: Vec<f64> = (0..2000)
            .map(|i| std::f64::consts::PI * (i as f64 + 0.5) / 2000.0)
            .collect();
        let h0 = discrete_response(
            &DiscretePhaserSpec::new(wb, 4, 1.0, 0.9, FS, 0).unwrap(),
            &omega,
        )
        .unwrap();
        let h1 = discrete_response(
            &DiscretePhaserSpec::new(wb, 4, 1.0, 0.9, FS, 1).unwrap(),
            &omega,
        )
        .unwrap();
        let mut max_diff: f64 = 0.0;
        for ((w, a), b) in omega.iter().zip(&h0).zip(&h1) {
            let f_hz = w * FS / (2.0 * std::f64::consts::PI);
            if f_hz > 10_000.0 {
                let diff = (20.0 * a.norm().log10() - 20.0 * b.norm().log10()).abs();
                max_diff = max_diff.max(diff);
            }
        }
        assert!(max_diff > 3.0, "only {max_diff} dB of separation above 10 kHz");
    }

    #[test]
    fn discrete_matches_continuous_at_low_frequency() {
        let wb = 2.0 * std::f64::consts::PI * 1000.0;
        let c_spec = ContinuousPhaserSpec::new(wb, 4, 1.0, 0.9).unwrap();
        let d_spec = DiscretePhaserSpec::new(wb, 4, 1.0, 0.9, FS, 0).unwrap();
        let freqs_hz: Vec<f64> = (1..=100).map(|i| i as f64 * 10.0).collect();
        let omega_s: Vec<f64> = freqs_hz.iter().map(|f| 2.0 * std::f64::consts::PI * f).collect();
        let omega_d: Vec<f64> = freqs_hz
            .iter()
            .map(|f| 2.0 * std::f64::consts::PI * f / FS)
            .collect();
        let hc = continuous_response(&c_spec, &omega_s).unwrap();
        let hd = discrete_response(&d_spec, &omega_d).unwrap();
        let mut max_diff: f64 = 0.0;
        for (a, b) in hc.iter().zip(&hd) {
            max_diff = max_diff.max((20.0 * a.norm().log10() - 20.0 * b.norm().log10()).abs());
        }
        assert!(max_diff < 0.5, "CT/DT split by {max_diff} dB below 1 kHz");
    }

    #[test]
    fn stage_realization_matches_transfer_function() {
        let p = 0.7;
        let n = 4096;
        let mut stage = AllpassStage::default();
        let mut h = vec![Complex64::new(0.0, 0.0); n];
        for (i, b) in h.iter_mut().enumerate() {
            let x = if i == 0 { 1.0 } else { 0.0 };
            *b = Complex64::new(stage.tick(x, p), 0.0);
        }
        FftPlanner::new().plan_fft_forward(n).process(&mut h);
        for k in 0..n {
            let zinv = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * k as f64 / n as f64);
            let expect = (p - zinv) / (1.0 - p * zinv);
            assert!((h[k] - expect).norm() < 1e-10, "bin {k}");
        }
    }

    fn periodic_signal(period: &[f64], reps: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(period.len() * reps);
        for _ in 0..reps {
            out.extend_from_slice(period);
        }
        out
    }

    fn spectrum_of(block: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = block.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(block.len()).process(&mut buf);
        buf
    }

    /// Frozen LFO: the renderer is LTI and its steady-state response on a
    /// periodic grid must match the closed-form transfer function.
    #[test]
    fn frozen_lfo_render_matches_discrete_response() {
        let spec = table2_spec();
        let lfo = TriangleLfoSpec::new(2.0, 4000.0, 4000.0, 0.0).unwrap();
        let period = 4096;
        let mut pulse = vec![0.0; period];
        pulse[0] = 1.0;
        let x = periodic_signal(&pulse, 12);
        let input = AudioBuffer::new(x, FS).unwrap();
        let y = render_digital_phaser(&input, &spec, &lfo).unwrap();
        let last = &y.samples()[11 * period..];
        let measured = spectrum_of(last);
        let omega: Vec<f64> = (0..period)
            .map(|k| 2.0 * std::f64::consts::PI * k as f64 / period as f64)
            .collect();
        let predicted = discrete_response(&spec, &omega).unwrap();
        let scale = predicted.iter().map(|h| h.norm()).fold(0.0, f64::max);
        for (k, (m, p)) in measured.iter().zip(&predicted).enumerate() {
            assert!(
                (m.norm() - p.norm()).abs() <= 1e-6 * scale,
                "bin {k}: {} vs {}",
                m.norm(),
                p.norm()
            );
        }
    }

    /// Without feedback, white-noise output energy follows the magnitude
    /// response exactly (checked on a periodic block).
    #[test]
    fn render_energy_follows_response() {
        let spec = DiscretePhaserSpec::new(4000.0, 4, 1.0, 0.0, FS, 0).unwrap();
        let lfo = TriangleLfoSpec::new(2.0, 4000.0, 4000.0, 0.0).unwrap();
        let period = 4096;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let block: Vec<f64> = (0..period).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let input = AudioBuffer::new(periodic_signal(&block, 6), FS).unwrap();
        let y = render_digital_phaser(&input, &spec, &lfo).unwrap();
        let last = &y.samples()[5 * period..];
        let measured_rms = (last.iter().map(|v| v * v).sum::<f64>() / period as f64).sqrt();

        let omega: Vec<f64> = (0..period)
            .map(|k| 2.0 * std::f64::consts::PI * k as f64 / period as f64)
            .collect();
        let h = discrete_response(&spec, &omega).unwrap();
        let xspec = spectrum_of(&block);
        let predicted_rms = (xspec
            .iter()
            .zip(&h)
            .map(|(x, h)| (x * h).norm_sqr())
            .sum::<f64>()
            / (period as f64).powi(2))
        .sqrt();
        let db = 20.0 * (measured_rms / predicted_rms).log10();
        assert!(db.abs() <= 0.1, "energy off by {db} dB");
    }

    #[test]
    fn decay_time_near_published_value() {
        let spec = table2_spec();
        let lfo = TriangleLfoSpec::new(2.0, 4000.0, 4000.0, 0.0).unwrap();
        let mut x = vec![0.0; 44100];
        x[0] = 1.0;
        let input = AudioBuffer::new(x, FS).unwrap();
        let y = render_digital_phaser(&input, &spec, &lfo).unwrap();
        let t60 = measure_t60(y.samples(), FS).unwrap();
        assert!(
            (t60 - 0.038).abs() <= 0.005,
            "t60 = {} ms, expected about 38 ms",
            t60 * 1000.0
        );
    }

    #[test]
    fn triangle_lfo_shape() {
        let lfo = TriangleLfoSpec::new(2.0, 4000.0, 16000.0, 0.0).unwrap();
        assert_eq!(lfo.break_freq_at(0.0), 4000.0);
        assert_eq!(lfo.break_freq_at(1.0), 16000.0);
        assert!((lfo.break_freq_at(0.5) - 10000.0).abs() < 1e-9);
        for t in [0.1, 0.4, 0.77] {
            assert!((lfo.break_freq_at(t) - lfo.break_freq_at(2.0 - t)).abs() < 1e-9);
            assert!((lfo.break_freq_at(t) - lfo.break_freq_at(t + 2.0)).abs() < 1e-9);
        }
        let shifted = TriangleLfoSpec::new(2.0, 4000.0, 16000.0, 0.25).unwrap();
        assert!((shifted.break_freq_at(0.0) - 10000.0).abs() < 1e-9);
    }

    #[test]
    fn render_rejects_bad_configurations() {
        let input = AudioBuffer::new(vec![0.0; 64], FS).unwrap();
        let lfo = TriangleLfoSpec::new(2.0, 4000.0, 16000.0, 0.0).unwrap();
        let loopy = DiscretePhaserSpec::new(4000.0, 4, 1.0, 0.7, FS, 0).unwrap();
        assert!(render_digital_phaser(&input, &loopy, &lfo).is_err());
        let wrong_rate = AudioBuffer::new(vec![0.0; 64], 48000.0).unwrap();
        assert!(render_digital_phaser(&wrong_rate, &table2_spec(), &lfo).is_err());
        let hot_lfo = TriangleLfoSpec::new(2.0, 4000.0, std::f64::consts::PI * FS, 0.0).unwrap();
        assert!(render_digital_phaser(&input, &table2_spec(), &hot_lfo).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(ContinuousPhaserSpec::new(-1.0, 4, 1.0, 0.5).is_err());
        assert!(ContinuousPhaserSpec::new(1000.0, 0, 1.0, 0.5).is_err());
        assert!(ContinuousPhaserSpec::new(1000.0, 4, 1.0, 1.0).is_err());
        assert!(ContinuousPhaserSpec::new(1000.0, 4, 1.0, -0.1).is_err());
        assert!(DiscretePhaserSpec::new(1000.0, 4, 1.0, 0.5, 0.0, 1).is_err());
        assert!(TriangleLfoSpec::new(0.0, 1.0, 2.0, 0.0).is_err());
        assert!(TriangleLfoSpec::new(1.0, 0.0, 2.0, 0.0).is_err());
        assert!(TriangleLfoSpec::new(1.0, 3.0, 2.0, 0.0).is_err());
        assert!(TriangleLfoSpec::new(1.0, 1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn csv_exports_have_expected_shape() {
        let freqs = [100.0, 200.0];
        let resp = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 10.0)];
        let csv = response_csv(&freqs, &resp);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "frequency_hz,magnitude_db,phase_rad");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].starts_with("200,20,"));

        let base = ContinuousPhaserSpec::new(1000.0, 4, 1.0, 0.0).unwrap();
        let locus = locus_csv(&base, &[0.1, 0.5]).unwrap();
        let lines: Vec<&str> = locus.lines().collect();
        assert_eq!(lines[0], "g2,pole_re,pole_im,zero_re,zero_im");
        assert_eq!(lines.len(), 1 + 2 * 4);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            /// |A_d| = 1 on the unit circle for any stable coefficient.
            #[test]
            fn digital_allpass_unit_magnitude(p in -0.999f64..0.999, w in 0.0f64..std::f64::consts::PI) {
                let zinv = Complex64::from_polar(1.0, -w);
                let a = (p - zinv) / (1.0 - p * zinv);
                prop_assert!((a.norm() - 1.0).abs() <= 1e-12);
            }

            /// arg A(jw) from the rational form agrees with the phase formula.
            #[test]
            fn continuous_phase_formula(w in 1e-3f64..1e6, wb in 1e-3f64..1e5) {
                let rational = allpass_s(Complex64::new(0.0, w), wb);
                let theta = continuous_allpass_phase(w, wb);
                let diff = (rational.arg() - theta).rem_euclid(2.0 * std::f64::consts::PI);
                let dist = diff.min(2.0 * std::f64::consts::PI - diff);
                prop_assert!(dist <= 1e-10, "distance {dist}");
            }

            /// The magnitude of A at the break frequency stays 1 and the phase
            /// stays pi/2 regardless of scale.
            #[test]
            fn break_frequency_quadrature(wb in 1e-2f64..1e5) {
                let a = allpass_s(Complex64::new(0.0, wb), wb);
                prop_assert!((a.norm() - 1.0).abs() <= 1e-12);
                prop_assert!((a.arg() - std::f64::consts::FRAC_PI_2).abs() <= 1e-10);
            }
        }
    }
}
