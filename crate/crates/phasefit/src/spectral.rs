//! Frame-based frequency-domain processing: windowed DFT analysis, per-frame
//! filtering, and weighted overlap-add resynthesis.
//!
//! Both the analysis and synthesis stages apply the periodic Hann window, so
//! the overlap-add of unmodified frames sums to a constant 3/2 at 75% overlap
//! and the engine divides it back out.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};
use crate::frame::{hann_window, segment, FrameConfig};

/// Constant overlap-add sum of the squared periodic Hann window at 75% overlap.
pub const OLA_NORM: f64 = 1.5;

/// Largest tolerated imaginary residue, relative to the frame norm, when a
/// filtered frame is cast back to real samples.
pub const HERMITIAN_RESIDUE_LIMIT: f64 = 1e-9;

/// A full-grid transfer function sampled on the N' DFT bins.
///
/// Filters fed to the resynthesis stage must be Hermitian so the output stays
/// real; the constructors below build such filters, and the apply path checks
/// the residue of whatever it is given.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFilter {
    bins: Vec<Complex64>,
}

impl SpectralFilter {
    /// Wrap a full grid of N' bins. Hermitian symmetry is the caller's
    /// responsibility; violations surface as residue errors when applied.
    pub fn new(bins: Vec<Complex64>) -> Result<Self> {
        if bins.is_empty() || !bins.len().is_power_of_two() {
            return Err(Error::Input(format!(
                "filter needs a power-of-two bin count, got {}",
                bins.len()
            )));
        }
        Ok(Self { bins })
    }

    /// The identity filter: ones on every bin.
    pub fn identity(dft_len: usize) -> Self {
        Self { bins: vec![Complex64::new(1.0, 0.0); dft_len] }
    }

    /// An integer delay of `samples`: bin k carries exp(-2 pi i k d / N').
    pub fn delay(dft_len: usize, samples: usize) -> Result<Self> {
        let half = dft_len / 2;
        let mut lower = Vec::with_capacity(half + 1);
        for k in 0..=half {
            let theta = -2.0 * std::f64::consts::PI * (k * samples) as f64 / dft_len as f64;
            lower.push(Complex64::new(theta.cos(), theta.sin()));
        }
        // force the self-conjugate bins exactly real before mirroring
        lower[0] = Complex64::new(1.0, 0.0);
        lower[half] = Complex64::new(if samples % 2 == 0 { 1.0 } else { -1.0 }, 0.0);
        Self::from_half_spectrum(&lower)
    }

    /// Build a Hermitian filter from bins 0..=N'/2 by conjugate mirroring.
    /// Bins 0 and N'/2 must already be real.
    pub fn from_half_spectrum(lower: &[Complex64]) -> Result<Self> {
        let half = lower.len().checked_sub(1).unwrap_or(0);
        let dft_len = half * 2;
        if half == 0 || !dft_len.is_power_of_two() {
            return Err(Error::Input(format!(
                "half spectrum of {} bins does not map to a power-of-two grid",
                lower.len()
            )));
        }
        if lower[0].im != 0.0 || lower[half].im != 0.0 {
            return Err(Error::Input(
                "bins 0 and N'/2 of a half spectrum must be purely real".into(),
            ));
        }
        let mut bins = Vec::with_capacity(dft_len);
        bins.extend_from_slice(lower);
        for k in (1..half).rev() {
            bins.push(lower[k].conj());
        }
        Ok(Self { bins })
    }

    /// DFT of a real FIR tap vector zero-padded to the grid.
    pub fn from_fir_taps(taps: &[f64], dft_len: usize) -> Result<Self> {
        if taps.len() > dft_len {
            return Err(Error::Input(format!(
                "{} taps exceed the DFT grid of {dft_len}",
                taps.len()
            )));
        }
        if !dft_len.is_power_of_two() {
            return Err(Error::Input(format!("DFT grid {dft_len} is not a power of two")));
        }
        let mut buf: Vec<Complex64> =
            taps.iter().map(|&t| Complex64::new(t, 0.0)).collect();
        buf.resize(dft_len, Complex64::new(0.0, 0.0));
        FftPlanner::new().plan_fft_forward(dft_len).process(&mut buf);
        Ok(Self { bins: buf })
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// True when bin[N'-k] = conj(bin[k]) within `tol` and the self-conjugate
    /// bins are real within `tol`.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        let n = self.bins.len();
        if self.bins[0].im.abs() > tol || self.bins[n / 2].im.abs() > tol {
            return false;
        }
        (1..n / 2).all(|k| {
            let d = self.bins[n - k] - self.bins[k].conj();
            d.norm() <= tol * (1.0 + self.bins[k].norm())
        })
    }
}

/// FFT plans plus window for one frame geometry. Cheap to share: all methods
/// take `&self` and the engine is `Send + Sync`.
pub struct SpectralEngine {
    config: FrameConfig,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl SpectralEngine {
    pub fn new(config: FrameConfig) -> Self {
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(config.dft_len());
        let ifft = planner.plan_fft_inverse(config.dft_len());
        Self { config, window: hann_window(config.frame_len()), fft, ifft }
    }

    pub fn config(&self) -> &FrameConfig {
        &self.config
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    pub(crate) fn fft_plan(&self) -> &Arc<dyn Fft<f64>> {
        &self.fft
    }

    pub(crate) fn ifft_plan(&self) -> &Arc<dyn Fft<f64>> {
        &self.ifft
    }

    /// Hann-window a length-N frame, zero-pad to N', and take the DFT.
    pub fn analyze(&self, frame: &[f64]) -> Result<Vec<Complex64>> {
        let n = self.config.frame_len();
        if frame.len() != n {
            return Err(Error::Input(format!(
                "frame of {} samples, expected {n}",
                frame.len()
            )));
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); self.config.dft_len()];
        for (b, (x, w)) in buf.iter_mut().zip(frame.iter().zip(&self.window)) {
            *b = Complex64::new(x * w, 0.0);
        }
        self.fft.process(&mut buf);
        Ok(buf)
    }

    /// Multiply a frame spectrum by a filter, inverse-DFT, truncate to N
    /// samples, and window again.
    ///
    /// The inverse carries the 1/N' normalization. The result must be real:
    /// if the imaginary residue exceeds [`HERMITIAN_RESIDUE_LIMIT`] of the
    /// frame norm the filter was not Hermitian and an error is raised.
    pub fn apply_and_resynthesize(
        &self,
        spectrum: &[Complex64],
        filter: &SpectralFilter,
    ) -> Result<Vec<f64>> {
        let nd = self.config.dft_len();
        if spectrum.len() != nd {
            return Err(Error::Input(format!(
                "spectrum of {} bins, expected {nd}",
                spectrum.len()
            )));
        }
        if filter.len() != nd {
            return Err(Error::Input(format!(
                "filter of {} bins, expected {nd}",
                filter.len()
            )));
        }
        let mut buf: Vec<Complex64> =
            spectrum.iter().zip(filter.bins()).map(|(x, h)| x * h).collect();
        self.ifft.process(&mut buf);

        let mut norm_sq = 0.0;
        let mut imag_sq = 0.0;
        for c in &buf {
            norm_sq += c.norm_sqr();
            imag_sq += c.im * c.im;
        }
        let limit = HERMITIAN_RESIDUE_LIMIT * norm_sq.sqrt();
        let residue = imag_sq.sqrt();
        if residue > limit {
            return Err(Error::NonHermitian { residue, limit });
        }

        let scale = 1.0 / nd as f64;
        Ok(buf[..self.config.frame_len()]
            .iter()
            .zip(&self.window)
            .map(|(c, w)| c.re * scale * w)
            .collect())
    }

    /// Sum processed frames at their hop offsets, divide by the constant
    /// window-squared overlap sum, and trim to `out_len` samples.
    pub fn overlap_add(&self, frames: &[Vec<f64>], out_len: usize) -> Vec<f64> {
        let hop = self.config.hop();
        let mut out = vec![0.0; out_len];
        for (m, frame) in frames.iter().enumerate() {
            let start = m * hop;
            if start >= out_len {
                break;
            }
            let take = frame.len().min(out_len - start);
            for (o, f) in out[start..start + take].iter_mut().zip(&frame[..take]) {
                *o += f;
            }
        }
        for o in &mut out {
            *o /= OLA_NORM;
        }
        out
    }

    /// Full pipeline: segment, analyze, filter each frame with the filter the
    /// provider returns for its index, resynthesize, and overlap-add back to
    /// the input length.
    pub fn process_signal<F>(&self, signal: &AudioBuffer, provider: F) -> Result<AudioBuffer>
    where
        F: Fn(usize) -> Result<SpectralFilter> + Sync,
    {
        let frames = segment(signal, &self.config)?;
        let processed: Vec<Vec<f64>> = (0..frames.len())
            .into_par_iter()
            .map(|m| {
                let spectrum = self.analyze(frames.frame(m))?;
                let filter = provider(m)?;
                self.apply_and_resynthesize(&spectrum, &filter)
            })
            .collect::<Result<_>>()?;
        let out = self.overlap_add(&processed, signal.len());
        AudioBuffer::new(out, signal.sample_rate())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn engine(window_s: f64) -> SpectralEngine {
        SpectralEngine::new(FrameConfig::new(window_s, 44100.0).unwrap())
    }

    fn noise(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    /// Plain DFT-matrix evaluation, the definitional oracle for the FFT.
    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                (0..n)
                    .map(|j| {
                        let th = -2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
                        x[j] * Complex64::new(th.cos(), th.sin())
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn fft_matches_dft_matrix_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 128;
        let x: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let mut fast = x.clone();
        FftPlanner::new().plan_fft_forward(n).process(&mut fast);
        let slow = naive_dft(&x);
        let scale: f64 = slow.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for (f, s) in fast.iter().zip(&slow) {
            assert!((f - s).norm() <= 1e-10 * scale, "fft deviates from DFT definition");
        }
    }

    #[test]
    fn analyze_impulse_at_frame_center_is_flat() {
        let eng = engine(0.040);
        let n = eng.config().frame_len();
        let mut frame = vec![0.0; n];
        frame[n / 2] = 1.0;
        let spec = eng.analyze(&frame).unwrap();
        // window peaks at exactly 1 at n/2, so every bin has unit magnitude
        for (k, c) in spec.iter().enumerate() {
            assert!((c.norm() - 1.0).abs() < 1e-12, "bin {k}: {}", c.norm());
        }
    }

    #[test]
    fn analyze_parseval() {
        let eng = engine(0.040);
        let n = eng.config().frame_len();
        let frame = noise(n, 11);
        let spec = eng.analyze(&frame).unwrap();
        let lhs: f64 =
            spec.iter().map(|c| c.norm_sqr()).sum::<f64>() / eng.config().dft_len() as f64;
        let rhs: f64 = frame
            .iter()
            .zip(eng.window())
            .map(|(x, w)| (x * w) * (x * w))
            .sum();
        assert!((lhs - rhs).abs() <= 1e-10 * rhs);
    }

    #[test]
    fn analyze_rejects_wrong_length() {
        let eng = engine(0.040);
        assert!(eng.analyze(&[0.0; 100]).is_err());
    }

    /// Identity filter reconstructs the interior of the signal.
    #[test]
    fn cola_identity_reconstruction() {
        for w in [0.010, 0.040] {
            let eng = engine(w);
            let n = eng.config().frame_len();
            let len = 6 * n;
            let x = noise(len, 5);
            let signal = AudioBuffer::new(x.clone(), 44100.0).unwrap();
            let id = SpectralFilter::identity(eng.config().dft_len());
            let y = eng.process_signal(&signal, |_| Ok(id.clone())).unwrap();
            let interior = n..len - n;
            let err: f64 = interior
                .clone()
                .map(|i| (y.samples()[i] - x[i]).powi(2))
                .sum::<f64>()
                .sqrt();
            let norm: f64 = interior.map(|i| x[i] * x[i]).sum::<f64>().sqrt();
            assert!(err <= 1e-9 * norm, "window {w}: rel err {}", err / norm);
        }
    }

    /// A one-frame signal comes back scaled by the OLA normalization alone.
    #[test]
    fn single_frame_scaled_by_two_thirds() {
        let eng = engine(0.010);
        let n = eng.config().frame_len();
        let frame = noise(n, 9);
        let spec = eng.analyze(&frame).unwrap();
        let y = eng
            .apply_and_resynthesize(&spec, &SpectralFilter::identity(eng.config().dft_len()))
            .unwrap();
        let out = eng.overlap_add(&[y], n);
        let w = eng.window();
        for i in 0..n {
            let expect = frame[i] * w[i] * w[i] / OLA_NORM;
            assert!((out[i] - expect).abs() < 1e-12);
        }
    }

    /// Delay filter shifts the windowed frame content in time.
    #[test]
    fn delay_filter_shifts_frame() {
        let eng = engine(0.040);
        let cfg = *eng.config();
        let n = cfg.frame_len();
        let d = 100; // < N' - N, so nothing wraps
        assert!(d < cfg.dft_len() - n);
        let frame = noise(n, 21);
        let spec = eng.analyze(&frame).unwrap();
        let filt = SpectralFilter::delay(cfg.dft_len(), d).unwrap();
        let y = eng.apply_and_resynthesize(&spec, &filt).unwrap();
        let w = eng.window();
        for i in 0..n {
            let shifted = if i >= d { frame[i - d] * w[i - d] } else { 0.0 };
            let expect = w[i] * shifted;
            assert!((y[i] - expect).abs() < 1e-10, "sample {i}");
        }
    }

    #[test]
    fn non_hermitian_filter_rejected() {
        let eng = engine(0.010);
        let nd = eng.config().dft_len();
        let frame = noise(eng.config().frame_len(), 2);
        let spec = eng.analyze(&frame).unwrap();
        let mut bins = vec![Complex64::new(1.0, 0.0); nd];
        bins[3] = Complex64::new(0.0, 1.0); // conjugate bin left untouched
        let bad = SpectralFilter::new(bins).unwrap();
        match eng.apply_and_resynthesize(&spec, &bad) {
            Err(Error::NonHermitian { .. }) => {}
            other => panic!("expected NonHermitian, got {other:?}"),
        }
    }

    #[test]
    fn filter_constructors_are_hermitian() {
        let delay = SpectralFilter::delay(512, 7).unwrap();
        assert!(delay.is_hermitian(1e-15));
        let taps = noise(64, 4);
        let fir = SpectralFilter::from_fir_taps(&taps, 512).unwrap();
        assert!(fir.is_hermitian(1e-12));
        assert!(SpectralFilter::identity(256).is_hermitian(0.0));
        // mirror constructor demands real edge bins
        let mut half = vec![Complex64::new(1.0, 0.1); 257];
        half[0] = Complex64::new(1.0, 0.0);
        assert!(SpectralFilter::from_half_spectrum(&half).is_err());
        half[256] = Complex64::new(-0.5, 0.0);
        let f = SpectralFilter::from_half_spectrum(&half).unwrap();
        assert!(f.is_hermitian(0.0));
        assert_eq!(f.len(), 512);
    }

    /// Frame filtering is linear in the filter.
    #[test]
    fn apply_is_linear_in_filter() {
        let eng = engine(0.010);
        let nd = eng.config().dft_len();
        let frame = noise(eng.config().frame_len(), 31);
        let spec = eng.analyze(&frame).unwrap();
        let f = SpectralFilter::delay(nd, 3).unwrap();
        let g = SpectralFilter::delay(nd, 17).unwrap();
        let (a, b) = (0.7, -1.3);
        let combo = SpectralFilter::new(
            f.bins()
                .iter()
                .zip(g.bins())
                .map(|(x, y)| a * x + b * y)
                .collect(),
        )
        .unwrap();
        let ya = eng.apply_and_resynthesize(&spec, &f).unwrap();
        let yb = eng.apply_and_resynthesize(&spec, &g).unwrap();
        let yc = eng.apply_and_resynthesize(&spec, &combo).unwrap();
        for i in 0..ya.len() {
            assert!((yc[i] - (a * ya[i] + b * yb[i])).abs() < 1e-12);
        }
    }

    /// The double-windowed pipeline scales a pure delay by a known factor:
    /// a delay of d samples comes through attenuated by
    /// (1 + cos(2 pi d / N) / 2) / (3/2) in the interior. This is the
    /// inherent smoothing the synthesis window imposes on long responses.
    #[test]
    fn delay_droop_follows_window_autocorrelation() {
        let eng = engine(0.040);
        let cfg = *eng.config();
        let n = cfg.frame_len();
        let d = 64;
        let len = 44100;
        let x = noise(len, 44);
        let signal = AudioBuffer::new(x.clone(), 44100.0).unwrap();
        let filt = SpectralFilter::delay(cfg.dft_len(), d).unwrap();
        let y = eng.process_signal(&signal, |_| Ok(filt.clone())).unwrap();
        let droop = (1.0 + 0.5 * (2.0 * std::f64::consts::PI * d as f64 / n as f64).cos())
            / OLA_NORM;
        let mut err = 0.0;
        let mut norm = 0.0;
        for i in n..len - n {
            let expect = droop * x[i - d];
            err += (y.samples()[i] - expect) * (y.samples()[i] - expect);
            norm += expect * expect;
        }
        assert!(
            err.sqrt() <= 1e-5 * norm.sqrt(),
            "droop law mismatch: rel {}",
            err.sqrt() / norm.sqrt()
        );
        assert!(droop < 0.9999, "the droop must be a real attenuation");
    }

    /// With a window long enough that the droop is negligible, the frame
    /// pipeline matches direct convolution to 1e-6 in the steady state.
    #[test]
    fn fir_filter_matches_direct_convolution() {
        let cfg = FrameConfig::new(4.0, 44100.0).unwrap();
        let eng = SpectralEngine::new(cfg);
        let n = cfg.frame_len();
        assert!(cfg.dft_len() >= n + 63);
        let taps = noise(64, 77);
        let len = 12 * 44100;
        let x = noise(len, 78);
        let signal = AudioBuffer::new(x.clone(), 44100.0).unwrap();
        let filt = SpectralFilter::from_fir_taps(&taps, cfg.dft_len()).unwrap();
        let y = eng.process_signal(&signal, |_| Ok(filt.clone())).unwrap();

        let mut direct = vec![0.0; len];
        for (i, d) in direct.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (t, tap) in taps.iter().enumerate() {
                if i >= t {
                    acc += tap * x[i - t];
                }
            }
            *d = acc;
        }
        let mut err = 0.0;
        let mut norm = 0.0;
        for i in n..len - n {
            err += (y.samples()[i] - direct[i]) * (y.samples()[i] - direct[i]);
            norm += direct[i] * direct[i];
        }
        let rel = err.sqrt() / norm.sqrt();
        assert!(rel <= 1e-6, "steady-state relative error {rel}");
    }

    #[test]
    fn frame_varying_filters_vary_output() {
        let eng = engine(0.010);
        let nd = eng.config().dft_len();
        let signal = AudioBuffer::new(noise(4400, 8), 44100.0).unwrap();
        let fixed = eng
            .process_signal(&signal, |_| Ok(SpectralFilter::identity(nd)))
            .unwrap();
        let varying = eng
            .process_signal(&signal, |m| {
                if m % 2 == 0 {
                    Ok(SpectralFilter::identity(nd))
                } else {
                    SpectralFilter::delay(nd, 5)
                }
            })
            .unwrap();
        assert_ne!(fixed.samples(), varying.samples());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(16))]

            /// COLA holds for arbitrary signals and window sizes.
            #[test]
            fn cola_property(seed in 0u64..1000, win_ms in 5u32..60) {
                let cfg = FrameConfig::new(win_ms as f64 / 1000.0, 44100.0).unwrap();
                let eng = SpectralEngine::new(cfg);
                let n = cfg.frame_len();
                let len = 5 * n;
                let x = noise(len, seed);
                let signal = AudioBuffer::new(x.clone(), 44100.0).unwrap();
                let id = SpectralFilter::identity(cfg.dft_len());
                let y = eng.process_signal(&signal, |_| Ok(id.clone())).unwrap();
                let mut err = 0.0f64;
                let mut norm = 0.0f64;
                for i in n..len - n {
                    err += (y.samples()[i] - x[i]).powi(2);
                    norm += x[i] * x[i];
                }
                prop_assert!(err.sqrt() <= 1e-9 * norm.sqrt());
            }

            /// Mirrored half spectra always resynthesize to real frames.
            #[test]
            fn hermitian_filters_give_real_output(seed in 0u64..1000) {
                let cfg = FrameConfig::new(0.010, 44100.0).unwrap();
                let eng = SpectralEngine::new(cfg);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let half = cfg.dft_len() / 2;
                let mut lower: Vec<Complex64> = (0..=half)
                    .map(|_| {
                        Complex64::new(
                            rand::Rng::gen_range(&mut rng, -2.0..2.0),
                            rand::Rng::gen_range(&mut rng, -2.0..2.0),
                        )
                    })
                    .collect();
                lower[0].im = 0.0;
                lower[half].im = 0.0;
                let filt = SpectralFilter::from_half_spectrum(&lower).unwrap();
                let frame = noise(cfg.frame_len(), seed ^ 0xABCD);
                let spec = eng.analyze(&frame).unwrap();
                prop_assert!(eng.apply_and_resynthesize(&spec, &filt).is_ok());
            }
        }
    }
}
