//! Short-time spectral analysis shared by the similarity measure and the
//! feature extractor: framing, Hann-windowed power spectra, mel filterbanks
//! and MFCCs.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// Number of full frames of `len` samples at `hop` spacing.
pub fn frame_count(n: usize, len: usize, hop: usize) -> usize {
    if n < len {
        0
    } else {
        (n - len) / hop + 1
    }
}

/// Frame length in samples for a window of `seconds`, rounded up to a power of two.
pub fn frame_len_for(seconds: f64, rate: u32) -> usize {
    ((seconds * rate as f64).round() as usize)
        .max(2)
        .next_power_of_two()
}

pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos())
        .collect()
}

pub struct SpectrumAnalyzer {
    len: usize,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectrumAnalyzer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectrumAnalyzer")
            .field("len", &self.len)
            .finish()
    }
}

impl SpectrumAnalyzer {
    pub fn new(len: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(len);
        SpectrumAnalyzer {
            len,
            window: hann(len),
            fft,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bins(&self) -> usize {
        self.len / 2 + 1
    }

    /// Power spectrum `|X_k|^2` of one windowed frame, bins `0..=len/2`.
    pub fn power(&self, frame: &[f64]) -> Vec<f64> {
        debug_assert_eq!(frame.len(), self.len);
        let mut buf: Vec<Complex<f64>> = frame
            .iter()
            .zip(&self.window)
            .map(|(x, w)| Complex::new(x * w, 0.0))
            .collect();
        self.fft.process(&mut buf);
        buf[..self.bins()].iter().map(|c| c.norm_sqr()).collect()
    }
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters evenly spaced on the mel scale between 0 Hz and Nyquist.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    // (first bin, weights) per band
    bands: Vec<(usize, Vec<f64>)>,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, fft_len: usize, rate: u32) -> Self {
        let nyquist = rate as f64 / 2.0;
        let top = hz_to_mel(nyquist);
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
            .collect();
        let bin_hz = rate as f64 / fft_len as f64;
        let n_bins = fft_len / 2 + 1;
        let bands = (0..n_mels)
            .map(|m| {
                let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
                let first = ((lo / bin_hz).ceil() as usize).min(n_bins);
                let last = ((hi / bin_hz).floor() as usize).min(n_bins - 1);
                let weights = (first..=last.max(first))
                    .map(|k| {
                        let f = k as f64 * bin_hz;
                        if f <= lo || f >= hi {
                            0.0
                        } else if f <= mid {
                            (f - lo) / (mid - lo)
                        } else {
                            (hi - f) / (hi - mid)
                        }
                    })
                    .collect();
                (first, weights)
            })
            .collect();
        MelFilterbank { bands }
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.bands
            .iter()
            .map(|(first, w)| {
                w.iter()
                    .enumerate()
                    .map(|(j, wj)| wj * power.get(first + j).copied().unwrap_or(0.0))
                    .sum()
            })
            .collect()
    }
}

/// Floor added before taking logs of band energies.
pub const LOG_FLOOR: f64 = 1e-10;

/// MFCC computation: mel band energies, log, orthonormal DCT-II.
#[derive(Debug, Clone)]
pub struct Mfcc {
    bank: MelFilterbank,
    dct: Vec<Vec<f64>>,
    first: usize,
}

impl Mfcc {
    /// `coeffs` coefficients starting at index `first` (1 drops the energy term).
    pub fn new(rate: u32, fft_len: usize, n_mels: usize, coeffs: usize, first: usize) -> Self {
        let bank = MelFilterbank::new(n_mels, fft_len, rate);
        let n = n_mels as f64;
        let dct = (first..first + coeffs)
            .map(|k| {
                let scale = if k == 0 {
                    (1.0 / n).sqrt()
                } else {
                    (2.0 / n).sqrt()
                };
                (0..n_mels)
                    .map(|m| scale * (PI * k as f64 * (m as f64 + 0.5) / n).cos())
                    .collect()
            })
            .collect();
        Mfcc { bank, dct, first }
    }

    pub fn first_coefficient(&self) -> usize {
        self.first
    }

    pub fn from_power(&self, power: &[f64]) -> Vec<f64> {
        let logs: Vec<f64> = self
            .bank
            .apply(power)
            .iter()
            .map(|e| (e + LOG_FLOOR).ln())
            .collect();
        self.dct
            .iter()
            .map(|row| row.iter().zip(&logs).map(|(a, b)| a * b).sum())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_counts() {
        assert_eq!(frame_count(176_400, 2048, 1024), 171);
        assert_eq!(frame_count(2048, 2048, 1024), 1);
        assert_eq!(frame_count(2047, 2048, 1024), 0);
        assert_eq!(frame_len_for(0.023, 44100), 1024);
        assert_eq!(frame_len_for(0.046, 44100), 2048);
    }

    #[test]
    fn mel_round_trip() {
        for f in [0.0, 100.0, 1000.0, 8000.0] {
            assert!((mel_to_hz(hz_to_mel(f)) - f).abs() < 1e-9);
        }
    }

    #[test]
    fn power_spectrum_peaks_at_tone() {
        let len = 1024;
        let rate = 44100.0;
        let k = 40.0;
        let f = k * rate / len as f64;
        let x: Vec<f64> = (0..len)
            .map(|i| (2.0 * PI * f * i as f64 / rate).sin())
            .collect();
        let p = SpectrumAnalyzer::new(len).power(&x);
        let argmax = (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
        assert_eq!(argmax, 40);
    }

    #[test]
    fn gain_only_moves_c0() {
        let m = Mfcc::new(44100, 1024, 40, 14, 0);
        let p: Vec<f64> = (0..513).map(|i| 1.0 + (i % 7) as f64).collect();
        let q: Vec<f64> = p.iter().map(|x| x * 4.0).collect();
        let a = m.from_power(&p);
        let b = m.from_power(&q);
        assert!((a[0] - b[0]).abs() > 1.0);
        for k in 1..14 {
            assert!((a[k] - b[k]).abs() < 1e-6, "c{k}");
        }
    }
}
