//! Audio similarity from single-Gaussian MFCC timbre models.
//!
//! Each sound is summarized by the mean and full covariance of its
//! frame-wise MFCCs (energy coefficient dropped, so the model ignores gain).
//! Two models are compared through the symmetrized Kullback-Leibler
//! divergence, mapped to `[0, 1]` by `exp(-KL / τ)`.

use nalgebra::{DMatrix, DVector};

use crate::analysis::{frame_count, frame_len_for, Mfcc, SpectrumAnalyzer};
use crate::linalg::spd_inverse_logdet;
use crate::synth::SoundSample;
use crate::{Error, Result};

pub const MFCC_COEFFS: usize = 13;
pub const MEL_BANDS: usize = 40;
pub const WINDOW_SECONDS: f64 = 0.023;
pub const MIN_FRAMES: usize = 4;
pub const COVARIANCE_RIDGE: f64 = 1e-6;
pub const DEFAULT_TAU: f64 = 50.0;

/// Similarity in `[0, 1]`, 1 meaning identical.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SimilarityScore(f64);

impl SimilarityScore {
    pub fn new(value: f64) -> Self {
        SimilarityScore(value.clamp(0.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTimbreModel {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    inv: DMatrix<f64>,
    log_det: f64,
}

impl GaussianTimbreModel {
    pub fn from_frames(frames: &DMatrix<f64>) -> Result<Self> {
        let (mean, mut cov) = crate::linalg::covariance(frames);
        // symmetrize exactly before regularizing
        cov = (&cov + cov.transpose()) * 0.5;
        for i in 0..cov.nrows() {
            cov[(i, i)] += COVARIANCE_RIDGE;
        }
        let (inv, log_det) = spd_inverse_logdet(&cov)?;
        Ok(GaussianTimbreModel {
            mean,
            cov,
            inv,
            log_det,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }
}

/// Frame-wise MFCCs (rows) over 23 ms Hann windows with 50% overlap.
pub fn mfcc_frames(sound: &SoundSample) -> Result<DMatrix<f64>> {
    let len = frame_len_for(WINDOW_SECONDS, sound.sample_rate);
    let hop = len / 2;
    let t = frame_count(sound.samples.len(), len, hop);
    if t < MIN_FRAMES {
        return Err(Error::TooShort {
            frames: t,
            needed: MIN_FRAMES,
        });
    }
    let analyzer = SpectrumAnalyzer::new(len);
    let mfcc = Mfcc::new(sound.sample_rate, len, MEL_BANDS, MFCC_COEFFS, 1);
    let mut out = DMatrix::zeros(t, MFCC_COEFFS);
    for i in 0..t {
        let frame = &sound.samples[i * hop..i * hop + len];
        let c = mfcc.from_power(&analyzer.power(frame));
        for (j, v) in c.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    Ok(out)
}

pub fn mfcc_model(sound: &SoundSample) -> Result<GaussianTimbreModel> {
    GaussianTimbreModel::from_frames(&mfcc_frames(sound)?)
}

fn trace_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += a[(i, j)] * b[(j, i)];
        }
    }
    s
}

/// `KL(a‖b) + KL(b‖a)`; exactly symmetric in its arguments and never negative.
pub fn kl_symmetric(a: &GaussianTimbreModel, b: &GaussianTimbreModel) -> f64 {
    if a == b {
        return 0.0;
    }
    let d = a.dim() as f64;
    let diff = &a.mean - &b.mean;
    let inv_sum = &a.inv + &b.inv;
    let quad = diff.dot(&(&inv_sum * &diff));
    let traces = trace_product(&b.inv, &a.cov) + trace_product(&a.inv, &b.cov);
    (0.5 * (traces + quad) - d).max(0.0)
}

/// A pluggable audio-to-audio similarity measure. The split into a per-sound
/// model and a cheap comparison lets callers cache models.
pub trait SimilarityMeasure: Send + Sync {
    type Model: Send + Sync;

    fn model(&self, sound: &SoundSample) -> Result<Self::Model>;

    fn compare(&self, a: &Self::Model, b: &Self::Model) -> SimilarityScore;

    fn similarity(&self, a: &SoundSample, b: &SoundSample) -> Result<SimilarityScore> {
        Ok(self.compare(&self.model(a)?, &self.model(b)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfccGaussianSimilarity {
    pub tau: f64,
}

impl Default for MfccGaussianSimilarity {
    fn default() -> Self {
        MfccGaussianSimilarity { tau: DEFAULT_TAU }
    }
}

impl SimilarityMeasure for MfccGaussianSimilarity {
    type Model = GaussianTimbreModel;

    fn model(&self, sound: &SoundSample) -> Result<GaussianTimbreModel> {
        mfcc_model(sound)
    }

    fn compare(&self, a: &GaussianTimbreModel, b: &GaussianTimbreModel) -> SimilarityScore {
        SimilarityScore::new((-kl_symmetric(a, b) / self.tau).exp())
    }
}

/// Similarity with the default measure.
pub fn similarity(a: &SoundSample, b: &SoundSample) -> Result<SimilarityScore> {
    MfccGaussianSimilarity::default().similarity(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{noise_at, ParameterVector};
    use std::f64::consts::TAU;

    fn sound(samples: Vec<f64>) -> SoundSample {
        SoundSample {
            duration: samples.len() as f64 / 44100.0,
            samples,
            sample_rate: 44100,
            octave: 0,
            transpose_semitones: 0,
            source_params: ParameterVector::splat(0.5).unwrap(),
            seed: 0,
        }
    }

    fn sine(freq: f64, secs: f64) -> SoundSample {
        let n = (secs * 44100.0) as usize;
        sound(
            (0..n)
                .map(|i| 0.5 * (TAU * freq * i as f64 / 44100.0).sin())
                .collect(),
        )
    }

    fn noise(secs: f64) -> SoundSample {
        let n = (secs * 44100.0) as usize;
        sound((0..n).map(|i| 0.5 * noise_at(11, i as u64)).collect())
    }

    #[test]
    fn sine_model_is_psd() {
        let m = mfcc_model(&sine(440.0, 4.0)).unwrap();
        assert_eq!(m.dim(), 13);
        assert!(m.cov.diagonal().iter().all(|&v| v >= 0.0));
        assert_eq!(m.cov, m.cov.transpose());
    }

    #[test]
    fn identical_sounds_identical_models() {
        let a = mfcc_model(&noise(1.0)).unwrap();
        let b = mfcc_model(&noise(1.0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_short_is_an_error() {
        assert!(matches!(
            mfcc_model(&sine(440.0, 0.01)),
            Err(Error::TooShort { .. })
        ));
        let just = sound(vec![0.1; 1024 + 3 * 512]);
        assert!(mfcc_model(&just).is_ok());
    }

    #[test]
    fn noise_and_sine_differ_in_first_coefficient() {
        let s = mfcc_model(&sine(440.0, 4.0)).unwrap();
        let n = mfcc_model(&noise(4.0)).unwrap();
        let pooled = ((s.cov[(0, 0)] + n.cov[(0, 0)]) / 2.0).sqrt();
        assert!((s.mean[0] - n.mean[0]).abs() > 3.0 * pooled);
    }

    #[test]
    fn self_similarity_and_symmetry() {
        let a = sine(440.0, 1.0);
        let b = noise(1.0);
        assert_eq!(similarity(&a, &a).unwrap().value(), 1.0);
        assert_eq!(similarity(&a, &b).unwrap(), similarity(&b, &a).unwrap());
    }

    #[test]
    fn sine_is_closer_to_sine_than_to_noise() {
        let m = MfccGaussianSimilarity::default();
        let s440 = m.model(&sine(440.0, 4.0)).unwrap();
        let s660 = m.model(&sine(660.0, 4.0)).unwrap();
        let wn = m.model(&noise(4.0)).unwrap();
        assert!(kl_symmetric(&s440, &wn) > kl_symmetric(&s440, &s660));
        assert!(m.compare(&s440, &wn) <= m.compare(&s440, &s660));
    }
}
