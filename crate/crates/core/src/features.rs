//! Timbral features.
//!
//! Each sound yields a 30-column time series of frame features, which is
//! collapsed into 368 static candidate statistics. A greedy forward search
//! picks 50 of them for the whole corpus; the 16 synthesis parameters are
//! appended and the resulting 66-dimensional vectors are Z-scored jointly.

use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::analysis::{frame_count, frame_len_for, Mfcc, SpectrumAnalyzer};
use crate::artifact::{content_hash, read_bytes, write_bytes, BinReader, BinWriter};
use crate::corpus::CorpusManifest;
use crate::gtm::{self, GtmConfig};
use crate::synth::{ParameterVector, Slot, SoundSample, PARAM_COUNT};
use crate::{wav, Error, Result};

pub const FRAME_FEATURES: usize = 30;
pub const STATS_PER_FEATURE: usize = 8;
pub const CROSS_STATS: usize = 128;
pub const CANDIDATES: usize = FRAME_FEATURES * STATS_PER_FEATURE + CROSS_STATS;
pub const SELECTED: usize = 50;
pub const COMBINED: usize = SELECTED + PARAM_COUNT;
pub const WINDOW_SECONDS: f64 = 0.046;
pub const MIN_FRAMES_FOR_STATS: usize = 4;
pub const STD_FLOOR: f64 = 1e-12;
const BRIGHTNESS_CUTOFF_HZ: f64 = 1500.0;
const MAX_PEAKS: usize = 20;
const PEAK_FLOOR: f64 = 0.01;

pub const FEATURE_NAMES: [&str; FRAME_FEATURES] = [
    "centroid",
    "spread",
    "skewness",
    "kurtosis",
    "flatness",
    "entropy",
    "rolloff85",
    "rolloff95",
    "brightness",
    "flux",
    "zcr",
    "roughness",
    "irregularity",
    "rms",
    "low_energy",
    "mfcc1",
    "mfcc2",
    "mfcc3",
    "mfcc4",
    "mfcc5",
    "mfcc6",
    "mfcc7",
    "mfcc8",
    "mfcc9",
    "mfcc10",
    "mfcc11",
    "mfcc12",
    "mfcc13",
    "attack_slope",
    "inharmonicity",
];

pub const STAT_NAMES: [&str; STATS_PER_FEATURE] =
    ["mean", "std", "skew", "kurt", "min", "max", "slope", "mad"];

/// Column index of a frame feature.
pub mod col {
    pub const CENTROID: usize = 0;
    pub const FLATNESS: usize = 4;
    pub const ENTROPY: usize = 5;
    pub const ZCR: usize = 10;
    pub const RMS: usize = 13;
    pub const LOW_ENERGY: usize = 14;
    pub const MFCC1: usize = 15;
    pub const ATTACK_SLOPE: usize = 28;
    pub const INHARMONICITY: usize = 29;
}

/// Spectral-shape columns correlated against [`CROSS_B`].
pub const CROSS_A: [usize; 8] = [0, 1, 2, 3, 4, 5, 6, 7];
/// Energy, texture and the first eight MFCC columns.
pub const CROSS_B: [usize; 16] = [8, 9, 10, 11, 12, 13, 28, 29, 15, 16, 17, 18, 19, 20, 21, 22];

/// `T × 30` frame features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTimeSeries {
    pub frames: Vec<[f64; FRAME_FEATURES]>,
    pub frame_rate: f64,
}

impl FeatureTimeSeries {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn feature_names(&self) -> &'static [&'static str; FRAME_FEATURES] {
        &FEATURE_NAMES
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        self.frames.iter().map(|f| f[c]).collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct Peak {
    freq: f64,
    amp: f64,
}

/// Local maxima above a fraction of the frame maximum, strongest first.
fn spectral_peaks(mag: &[f64], bin_hz: f64) -> Vec<Peak> {
    let max = mag.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Vec::new();
    }
    let mut peaks: Vec<Peak> = (1..mag.len().saturating_sub(1))
        .filter(|&k| mag[k] > mag[k - 1] && mag[k] >= mag[k + 1] && mag[k] >= PEAK_FLOOR * max)
        .map(|k| {
            // parabolic refinement on log magnitude
            let (a, b, c) = (
                (mag[k - 1] + 1e-300).ln(),
                (mag[k] + 1e-300).ln(),
                (mag[k + 1] + 1e-300).ln(),
            );
            let den = a - 2.0 * b + c;
            let off = if den.abs() > 1e-12 {
                (0.5 * (a - c) / den).clamp(-0.5, 0.5)
            } else {
                0.0
            };
            Peak {
                freq: (k as f64 + off) * bin_hz,
                amp: mag[k],
            }
        })
        .collect();
    peaks.sort_by(|x, y| y.amp.total_cmp(&x.amp).then(x.freq.total_cmp(&y.freq)));
    peaks.truncate(MAX_PEAKS);
    peaks
}

/// Sethares' parametrization of the Plomp-Levelt dissonance curve.
fn roughness(peaks: &[Peak]) -> f64 {
    let mut total = 0.0;
    for (i, p) in peaks.iter().enumerate() {
        for q in &peaks[i + 1..] {
            let (lo, hi) = if p.freq <= q.freq { (p, q) } else { (q, p) };
            let s = 0.24 / (0.021 * lo.freq + 19.0);
            let df = hi.freq - lo.freq;
            total += lo.amp * hi.amp * ((-3.5 * s * df).exp() - (-5.75 * s * df).exp());
        }
    }
    total
}

fn irregularity(peaks: &[Peak]) -> f64 {
    if peaks.len() < 2 {
        return 0.0;
    }
    let mut by_freq = peaks.to_vec();
    by_freq.sort_by(|a, b| a.freq.total_cmp(&b.freq));
    let energy: f64 = by_freq.iter().map(|p| p.amp * p.amp).sum();
    let diff: f64 = by_freq
        .windows(2)
        .map(|w| (w[0].amp - w[1].amp).powi(2))
        .sum();
    if energy > 0.0 {
        diff / energy
    } else {
        0.0
    }
}

fn inharmonicity(peaks: &[Peak]) -> f64 {
    let Some(f0) = peaks.first().map(|p| p.freq).filter(|&f| f > 0.0) else {
        return 0.0;
    };
    let (mut dev, mut norm) = (0.0, 0.0);
    for p in peaks {
        let harmonic = (p.freq / f0).round() * f0;
        dev += p.amp * (p.freq - harmonic).abs();
        norm += p.amp * 0.5 * f0;
    }
    if norm > 0.0 {
        dev / norm
    } else {
        0.0
    }
}

fn sanitize(x: f64) -> f64 {
    if x.is_finite() {
        x
    } else {
        0.0
    }
}

/// Frame-wise features over 46 ms Hann windows with 50% hop.
pub fn extract_frames(sound: &SoundSample) -> Result<FeatureTimeSeries> {
    let rate = sound.sample_rate;
    let len = frame_len_for(WINDOW_SECONDS, rate);
    let hop = len / 2;
    let t = frame_count(sound.samples.len(), len, hop);
    if t < 2 {
        return Err(Error::TooShort {
            frames: t,
            needed: 2,
        });
    }
    let analyzer = SpectrumAnalyzer::new(len);
    let mfcc = Mfcc::new(rate, len, 40, 13, 1);
    let bin_hz = rate as f64 / len as f64;
    let nbins = analyzer.bins();
    let frame_rate = rate as f64 / hop as f64;

    let mut frames = Vec::with_capacity(t);
    let mut prev_norm_mag: Option<Vec<f64>> = None;
    for i in 0..t {
        let raw = &sound.samples[i * hop..i * hop + len];
        let power = analyzer.power(raw);
        let mag: Vec<f64> = power.iter().map(|p| p.sqrt()).collect();
        let msum: f64 = mag.iter().sum();
        let psum: f64 = power.iter().sum();
        let mut f = [0.0; FRAME_FEATURES];

        if msum > 0.0 {
            let freq = |k: usize| k as f64 * bin_hz;
            let centroid = mag
                .iter()
                .enumerate()
                .map(|(k, m)| freq(k) * m)
                .sum::<f64>()
                / msum;
            let moment = |p: i32| {
                mag.iter()
                    .enumerate()
                    .map(|(k, m)| (freq(k) - centroid).powi(p) * m)
                    .sum::<f64>()
                    / msum
            };
            let spread = moment(2).sqrt();
            f[0] = centroid;
            f[1] = spread;
            if spread > 0.0 {
                f[2] = moment(3) / spread.powi(3);
                f[3] = moment(4) / spread.powi(4);
            }
            let mean_p = psum / nbins as f64;
            let log_mean = power.iter().map(|p| (p + 1e-300).ln()).sum::<f64>() / nbins as f64;
            f[4] = if mean_p > 0.0 {
                (log_mean.exp() / mean_p).min(1.0)
            } else {
                1.0
            };
            f[5] = -mag
                .iter()
                .filter(|&&m| m > 0.0)
                .map(|m| {
                    let p = m / msum;
                    p * p.ln()
                })
                .sum::<f64>()
                / (nbins as f64).ln();
            let rolloff = |frac: f64| {
                let target = frac * psum;
                let mut acc = 0.0;
                for (k, p) in power.iter().enumerate() {
                    acc += p;
                    if acc >= target {
                        return freq(k);
                    }
                }
                freq(nbins - 1)
            };
            f[6] = rolloff(0.85);
            f[7] = rolloff(0.95);
            f[8] = power
                .iter()
                .enumerate()
                .filter(|(k, _)| freq(*k) > BRIGHTNESS_CUTOFF_HZ)
                .map(|(_, p)| p)
                .sum::<f64>()
                / psum;
            let peaks = spectral_peaks(&mag, bin_hz);
            f[11] = roughness(&peaks);
            f[12] = irregularity(&peaks);
            f[29] = inharmonicity(&peaks);
        } else {
            // silence: flat spectrum, everything else zero
            f[4] = 1.0;
        }

        let norm = mag.iter().map(|m| m * m).sum::<f64>().sqrt();
        let normed: Vec<f64> = if norm > 0.0 {
            mag.iter().map(|m| m / norm).collect()
        } else {
            vec![0.0; nbins]
        };
        if let Some(prev) = &prev_norm_mag {
            f[9] = prev
                .iter()
                .zip(&normed)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
        }
        prev_norm_mag = Some(normed);

        f[10] = raw
            .windows(2)
            .filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0))
            .count() as f64
            / (len - 1) as f64;
        f[13] = (raw.iter().map(|x| x * x).sum::<f64>() / len as f64).sqrt();
        for (j, c) in mfcc.from_power(&power).into_iter().enumerate() {
            f[col::MFCC1 + j] = c;
        }
        frames.push(f);
    }

    let mean_rms = frames.iter().map(|f| f[col::RMS]).sum::<f64>() / t as f64;
    let mut prev_rms = 0.0;
    for f in frames.iter_mut() {
        f[col::LOW_ENERGY] = if f[col::RMS] < mean_rms { 1.0 } else { 0.0 };
        f[col::ATTACK_SLOPE] = (f[col::RMS] - prev_rms) * frame_rate;
        prev_rms = f[col::RMS];
        for v in f.iter_mut() {
            *v = sanitize(*v);
        }
    }
    Ok(FeatureTimeSeries { frames, frame_rate })
}

/// mean, std, skewness, kurtosis, min, max, slope, mean |Δ| (population moments).
pub fn column_stats(x: &[f64]) -> [f64; STATS_PER_FEATURE] {
    let n = x.len() as f64;
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = min + x.iter().map(|v| v - min).sum::<f64>() / n;
    let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = m2.sqrt();
    let (skew, kurt) = if std > 0.0 {
        (
            x.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n / std.powi(3),
            x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n / m2.powi(2),
        )
    } else {
        (0.0, 0.0)
    };
    let tbar = (n - 1.0) / 2.0;
    let sxx: f64 = (0..x.len()).map(|i| (i as f64 - tbar).powi(2)).sum();
    let sxy: f64 = x
        .iter()
        .enumerate()
        .map(|(i, v)| (i as f64 - tbar) * (v - mean))
        .sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let mad = if x.len() > 1 {
        x.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    [mean, std, skew, kurt, min, max, slope, mad].map(sanitize)
}

/// Pearson correlation; zero if either side is constant.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa > 0.0 && sbb > 0.0 {
        sanitize((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
    } else {
        0.0
    }
}

/// Collapse a time series into the 368 candidate statistics: 8 statistics
/// per column, then the correlations of every [`CROSS_A`] column with
/// every [`CROSS_B`] column.
pub fn collapse_stats(ts: &FeatureTimeSeries) -> Result<Vec<f64>> {
    if ts.len() < MIN_FRAMES_FOR_STATS {
        return Err(Error::TooShort {
            frames: ts.len(),
            needed: MIN_FRAMES_FOR_STATS,
        });
    }
    let cols: Vec<Vec<f64>> = (0..FRAME_FEATURES).map(|c| ts.column(c)).collect();
    let mut out = Vec::with_capacity(CANDIDATES);
    for c in &cols {
        out.extend_from_slice(&column_stats(c));
    }
    for &a in &CROSS_A {
        for &b in &CROSS_B {
            out.push(correlation(&cols[a], &cols[b]));
        }
    }
    debug_assert_eq!(out.len(), CANDIDATES);
    Ok(out)
}

/// Names of the 368 candidates in output order of [`collapse_stats`].
pub fn candidate_names() -> Vec<String> {
    let mut names = Vec::with_capacity(CANDIDATES);
    for f in FEATURE_NAMES {
        for s in STAT_NAMES {
            names.push(format!("{f}.{s}"));
        }
    }
    for &a in &CROSS_A {
        for &b in &CROSS_B {
            names.push(format!("corr({},{})", FEATURE_NAMES[a], FEATURE_NAMES[b]));
        }
    }
    names
}

/// Candidate statistics of one sound.
pub fn candidate_vector(sound: &SoundSample) -> Result<Vec<f64>> {
    collapse_stats(&extract_frames(sound)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionCriterion {
    /// Range-normalized variance of the candidate minus its mean absolute
    /// correlation with the columns already chosen.
    RelevanceRedundancy,
    /// Log-likelihood of a small GTM fitted to a row subsample of the chosen
    /// columns plus the candidate. The first two picks, before a GTM can be
    /// fitted, fall back to relevance/redundancy.
    GtmLikelihood {
        subsample: usize,
        latent: usize,
        basis: usize,
        iterations: usize,
    },
}

impl SelectionCriterion {
    pub fn gtm_default() -> Self {
        SelectionCriterion::GtmLikelihood {
            subsample: 64,
            latent: 4,
            basis: 3,
            iterations: 5,
        }
    }
}

fn sort_rows(matrix: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, d) = matrix.shape();
    let mut rows: Vec<Vec<f64>> = (0..n)
        .map(|i| matrix.row(i).iter().copied().collect())
        .collect();
    rows.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    DMatrix::from_fn(n, d, |i, j| rows[i][j])
}

/// Greedy forward selection of up to `target` columns.
///
/// Constant columns are never selected. Rows are put in a canonical order
/// first, so the result does not depend on the input row order. Ties go to
/// the lowest column index.
pub fn select_features(
    matrix: &DMatrix<f64>,
    target: usize,
    criterion: SelectionCriterion,
) -> Result<Vec<usize>> {
    let (n, d) = matrix.shape();
    if n < 2 {
        return Err(Error::NotEnough {
            what: "rows for feature selection",
            needed: 2,
            got: n,
        });
    }
    if target > d {
        return Err(Error::Index {
            index: target,
            len: d,
        });
    }
    let m = sort_rows(matrix);
    let cols: Vec<Vec<f64>> = (0..d)
        .map(|j| m.column(j).iter().copied().collect())
        .collect();

    let mut relevance = vec![0.0; d];
    let mut zcols: Vec<Option<Vec<f64>>> = vec![None; d];
    for (j, c) in cols.iter().enumerate() {
        let min = c.iter().copied().fold(f64::INFINITY, f64::min);
        let max = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(max > min) || !min.is_finite() || !max.is_finite() {
            continue;
        }
        let scaled: Vec<f64> = c.iter().map(|v| (v - min) / (max - min)).collect();
        relevance[j] = column_stats(&scaled)[1].powi(2);
        let st = column_stats(c);
        let (mean, std) = (st[0], st[1]);
        if std > 0.0 {
            zcols[j] = Some(c.iter().map(|v| (v - mean) / std).collect());
        }
    }
    let mut remaining: Vec<usize> = (0..d).filter(|&j| zcols[j].is_some()).collect();
    let mut redundancy = vec![0.0; d];
    let mut chosen: Vec<usize> = Vec::new();

    while chosen.len() < target && !remaining.is_empty() {
        let use_gtm =
            matches!(criterion, SelectionCriterion::GtmLikelihood { .. }) && chosen.len() >= 2;
        let scores: Vec<f64> = if use_gtm {
            let SelectionCriterion::GtmLikelihood {
                subsample,
                latent,
                basis,
                iterations,
            } = criterion
            else {
                unreachable!()
            };
            remaining
                .par_iter()
                .map(|&c| gtm_score(&zcols, &chosen, c, subsample, latent, basis, iterations))
                .collect()
        } else {
            remaining
                .iter()
                .map(|&c| {
                    let penalty = if chosen.is_empty() {
                        0.0
                    } else {
                        redundancy[c] / chosen.len() as f64
                    };
                    relevance[c] - penalty
                })
                .collect()
        };
        let mut best = 0;
        for i in 1..scores.len() {
            if scores[i] > scores[best] {
                best = i;
            }
        }
        let pick = remaining.remove(best);
        chosen.push(pick);
        let zp = zcols[pick].as_ref().expect("non-constant");
        for &c in &remaining {
            let zc = zcols[c].as_ref().expect("non-constant");
            let r = zp.iter().zip(zc).map(|(a, b)| a * b).sum::<f64>() / n as f64;
            redundancy[c] += r.abs().min(1.0);
        }
    }
    Ok(chosen)
}

fn gtm_score(
    zcols: &[Option<Vec<f64>>],
    chosen: &[usize],
    candidate: usize,
    subsample: usize,
    latent: usize,
    basis: usize,
    iterations: usize,
) -> f64 {
    let cols: Vec<&Vec<f64>> = chosen
        .iter()
        .chain(std::iter::once(&candidate))
        .map(|&c| zcols[c].as_ref().expect("non-constant"))
        .collect();
    let n = cols[0].len();
    let take = subsample.clamp(1, n);
    // evenly spaced rows of the canonical order
    let rows: Vec<usize> = (0..take).map(|i| i * n / take).collect();
    let data = DMatrix::from_fn(take, cols.len(), |i, j| cols[j][rows[i]]);
    let cfg = GtmConfig {
        latent_grid: (latent, latent),
        basis_grid: (basis, basis),
        max_iter: iterations,
        rel_tol: 0.0,
        ..GtmConfig::default()
    };
    match gtm::fit(&data, &cfg) {
        Ok((_, trace)) => trace.last().copied().unwrap_or(f64::NEG_INFINITY),
        Err(_) => f64::NEG_INFINITY,
    }
}

/// The 66-dimensional descriptor of one corpus entry.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub entry_id: String,
    pub selected_stats: Vec<f64>,
    pub params: ParameterVector,
    pub combined: Vec<f64>,
}

pub fn assemble(
    entry_id: &str,
    params: &ParameterVector,
    stats: &[f64],
    selection: &[usize],
) -> Result<FeatureVector> {
    if selection.len() != SELECTED {
        return Err(Error::Dimension {
            expected: SELECTED,
            got: selection.len(),
        });
    }
    let selected_stats = selection
        .iter()
        .map(|&i| {
            stats.get(i).copied().ok_or(Error::Index {
                index: i,
                len: stats.len(),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut combined = selected_stats.clone();
    combined.extend_from_slice(params.values());
    Ok(FeatureVector {
        entry_id: entry_id.to_string(),
        selected_stats,
        params: *params,
        combined,
    })
}

/// Per-column Z-score transform with population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(matrix: &DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if n < 2 {
            return Err(Error::NotEnough {
                what: "rows to fit a standardizer",
                needed: 2,
                got: n,
            });
        }
        let (mut mean, mut std) = (Vec::new(), Vec::new());
        for c in matrix.column_iter() {
            let min = c.iter().copied().fold(f64::INFINITY, f64::min);
            // anchoring at the minimum keeps constant columns exact
            let mu = min + c.iter().map(|v| v - min).sum::<f64>() / n as f64;
            let var = c.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n as f64;
            mean.push(mu);
            std.push(var.sqrt().max(STD_FLOOR));
        }
        Ok(Standardizer { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    pub fn inverse(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| x * s + m)
            .collect()
    }

    pub fn apply_matrix(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
            (m[(i, j)] - self.mean[j]) / self.std[j]
        })
    }
}

pub const CANDIDATES_MAGIC: &[u8; 4] = b"TSFC";
pub const CANDIDATES_VERSION: u32 = 1;
pub const MATRIX_MAGIC: &[u8; 4] = b"TSFM";
pub const MATRIX_VERSION: u32 = 1;

/// Per-entry candidate statistics for a whole corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateMatrix {
    /// Content hash of the corpus manifest.
    pub input_hash: String,
    pub ids: Vec<String>,
    pub params: Vec<ParameterVector>,
    pub octaves: Vec<i32>,
    /// `N × 368`.
    pub rows: DMatrix<f64>,
}

impl CandidateMatrix {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = BinWriter::new(CANDIDATES_MAGIC, CANDIDATES_VERSION);
        w.u64(self.rows.nrows() as u64)
            .u64(self.rows.ncols() as u64)
            .str(&self.input_hash);
        for i in 0..self.ids.len() {
            w.str(&self.ids[i])
                .i32(self.octaves[i])
                .f64s(self.params[i].values());
        }
        for i in 0..self.rows.nrows() {
            for j in 0..self.rows.ncols() {
                w.f64(self.rows[(i, j)]);
            }
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = BinReader::open(
            bytes,
            "candidate matrix",
            CANDIDATES_MAGIC,
            CANDIDATES_VERSION,
        )?;
        let n = r.usize()?;
        let d = r.usize()?;
        if d != CANDIDATES {
            return Err(Error::Dimension {
                expected: CANDIDATES,
                got: d,
            });
        }
        let input_hash = r.str()?;
        let (mut ids, mut params, mut octaves) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..n {
            ids.push(r.str()?);
            octaves.push(r.i32()?);
            params.push(ParameterVector::from_slice(&r.f64s(PARAM_COUNT)?)?);
        }
        let flat = r.f64s(n * d)?;
        r.finish()?;
        Ok(CandidateMatrix {
            input_hash,
            ids,
            params,
            octaves,
            rows: DMatrix::from_row_slice(n, d, &flat),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_bytes(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_bytes(path)?)
    }
}

/// Read every corpus WAV and compute its candidate statistics.
pub fn extract_candidates(manifest: &CorpusManifest, workers: usize) -> Result<CandidateMatrix> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::format("thread pool", e.to_string()))?;
    let rows: Vec<Vec<f64>> = pool.install(|| {
        manifest
            .records
            .par_iter()
            .map(|rec| {
                let (samples, rate) = wav::read(&manifest.wav_path(rec))?;
                let sound = SoundSample {
                    duration: samples.len() as f64 / rate as f64,
                    samples,
                    sample_rate: rate,
                    octave: rec.octave,
                    transpose_semitones: 0,
                    source_params: rec.params,
                    seed: 0,
                };
                candidate_vector(&sound)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let n = rows.len();
    Ok(CandidateMatrix {
        input_hash: content_hash(manifest.to_jsonl().as_bytes()),
        ids: manifest.records.iter().map(|r| r.id.clone()).collect(),
        params: manifest.records.iter().map(|r| r.params).collect(),
        octaves: manifest.records.iter().map(|r| r.octave).collect(),
        rows: DMatrix::from_fn(n, CANDIDATES, |i, j| rows[i][j]),
    })
}

/// The assembled corpus features together with the selection and the
/// standardizer fitted to them.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    /// Content hash of the candidate matrix file.
    pub input_hash: String,
    /// Content hash of the corpus manifest.
    pub corpus_hash: String,
    pub selection: Vec<usize>,
    pub standardizer: Standardizer,
    pub ids: Vec<String>,
    pub octaves: Vec<i32>,
    /// Raw (unstandardized) `N × 66` rows.
    pub rows: DMatrix<f64>,
}

impl FeatureMatrix {
    /// Select, assemble and standardize.
    pub fn build(
        candidates: &CandidateMatrix,
        input_hash: &str,
        criterion: SelectionCriterion,
    ) -> Result<Self> {
        let selection = select_features(&candidates.rows, SELECTED, criterion)?;
        if selection.len() < SELECTED {
            return Err(Error::NotEnough {
                what: "non-constant candidate features",
                needed: SELECTED,
                got: selection.len(),
            });
        }
        let n = candidates.rows.nrows();
        let mut rows = DMatrix::zeros(n, COMBINED);
        for i in 0..n {
            let stats: Vec<f64> = candidates.rows.row(i).iter().copied().collect();
            let fv = assemble(
                &candidates.ids[i],
                &candidates.params[i],
                &stats,
                &selection,
            )?;
            for (j, v) in fv.combined.iter().enumerate() {
                rows[(i, j)] = *v;
            }
        }
        let standardizer = Standardizer::fit(&rows)?;
        Ok(FeatureMatrix {
            input_hash: input_hash.to_string(),
            corpus_hash: candidates.input_hash.clone(),
            selection,
            standardizer,
            ids: candidates.ids.clone(),
            octaves: candidates.octaves.clone(),
            rows,
        })
    }

    pub fn standardized(&self) -> DMatrix<f64> {
        self.standardizer.apply_matrix(&self.rows)
    }

    pub fn params(&self, row: usize) -> Result<ParameterVector> {
        let v: Vec<f64> = (SELECTED..COMBINED).map(|j| self.rows[(row, j)]).collect();
        ParameterVector::from_slice(&v)
    }

    /// Names of the 66 columns.
    pub fn column_names(&self) -> Vec<String> {
        let names = candidate_names();
        self.selection
            .iter()
            .map(|&i| names[i].clone())
            .chain(Slot::ALL.iter().map(|s| format!("param.{}", s.name())))
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let (n, d) = self.rows.shape();
        let mut w = BinWriter::new(MATRIX_MAGIC, MATRIX_VERSION);
        w.u64(n as u64)
            .u64(d as u64)
            .u64(self.selection.len() as u64);
        for &s in &self.selection {
            w.u32(s as u32);
        }
        w.f64s(&self.standardizer.mean).f64s(&self.standardizer.std);
        w.str(&self.input_hash).str(&self.corpus_hash);
        for i in 0..n {
            w.str(&self.ids[i]).i32(self.octaves[i]);
        }
        for i in 0..n {
            for j in 0..d {
                w.f64(self.rows[(i, j)]);
            }
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = BinReader::open(bytes, "feature matrix", MATRIX_MAGIC, MATRIX_VERSION)?;
        let n = r.usize()?;
        let d = r.usize()?;
        if d != COMBINED {
            return Err(Error::Dimension {
                expected: COMBINED,
                got: d,
            });
        }
        let nsel = r.usize()?;
        let selection = (0..nsel)
            .map(|_| r.u32().map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        let mean = r.f64s(d)?;
        let std = r.f64s(d)?;
        let input_hash = r.str()?;
        let corpus_hash = r.str()?;
        let (mut ids, mut octaves) = (Vec::new(), Vec::new());
        for _ in 0..n {
            ids.push(r.str()?);
            octaves.push(r.i32()?);
        }
        let flat = r.f64s(n * d)?;
        r.finish()?;
        Ok(FeatureMatrix {
            input_hash,
            corpus_hash,
            selection,
            standardizer: Standardizer { mean, std },
            ids,
            octaves,
            rows: DMatrix::from_row_slice(n, d, &flat),
        })
    }

    /// Writes the binary file and a `<path>.names.txt` sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        write_bytes(path, &self.to_bytes())?;
        let mut names = String::new();
        for (i, name) in self.column_names().iter().enumerate() {
            names.push_str(&format!("{i}\t{name}\n"));
        }
        let sidecar = path.with_extension(match path.extension() {
            Some(e) => format!("{}.names.txt", e.to_string_lossy()),
            None => "names.txt".into(),
        });
        write_bytes(&sidecar, names.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_bytes(path)?)
    }
}
