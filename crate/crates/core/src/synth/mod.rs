//! Deterministic two-oscillator VPS synthesizer.
//!
//! A master and a slave VPS oscillator (the slave at a harmonic ratio of the
//! master) are mixed or combined by amplitude or frequency modulation, a
//! white noise source is added, the result is shaped by triggered envelopes
//! and finally passed through the effects chain.

mod effects;
mod params;
mod voice;
mod vps;

pub use effects::{apply_effects, apply_effects_at, limit, EffectMix};
pub use params::{
    cardinality, level_of, quantize_value, step_counts, ParameterVector, Slot, HARMONIC_RATIOS,
    MAX_STEPS, PARAM_COUNT,
};
pub use voice::{
    ads_envelope, noise_at, CombineMode, ModDestination, SynthSettings, Voice, CONTROL_BLOCK,
};
pub use vps::{vps_oscillator, vps_phase, VpsBreakpoint};

use crate::{Error, Result};

pub const DEFAULT_RATE: u32 = 44_100;
pub const DEFAULT_DURATION: f64 = 4.0;
pub const MIN_OCTAVE: i32 = -5;
pub const MAX_OCTAVE: i32 = 5;
/// Pitch of C in octave 0 (C4).
pub const C_REFERENCE_HZ: f64 = 261.625_565_300_598_6;

/// Every rendered sound is pitched on C.
pub const PITCH_CLASS: &str = "C";

/// Fundamental of C at `octave`, optionally transposed by semitones.
pub fn c_frequency(octave: i32, transpose_semitones: i32) -> f64 {
    C_REFERENCE_HZ * 2f64.powf(octave as f64 + transpose_semitones as f64 / 12.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoundSample {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub octave: i32,
    pub transpose_semitones: i32,
    pub duration: f64,
    pub source_params: ParameterVector,
    pub seed: u64,
}

impl SoundSample {
    pub fn pitch_class(&self) -> &'static str {
        PITCH_CLASS
    }

    pub fn fundamental(&self) -> f64 {
        c_frequency(self.octave, self.transpose_semitones)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderSettings {
    pub octave: i32,
    pub transpose_semitones: i32,
    pub duration: f64,
    pub rate: u32,
    pub seed: u64,
}

impl Default for RenderSettings {
    fn default() -> Self {
        RenderSettings {
            octave: 0,
            transpose_semitones: 0,
            duration: DEFAULT_DURATION,
            rate: DEFAULT_RATE,
            seed: 0,
        }
    }
}

/// Render `params` as a C at `octave`.
pub fn render(
    params: &ParameterVector,
    octave: i32,
    duration: f64,
    rate: u32,
    seed: u64,
) -> Result<SoundSample> {
    render_with(
        params,
        &RenderSettings {
            octave,
            transpose_semitones: 0,
            duration,
            rate,
            seed,
        },
    )
}

pub fn render_with(params: &ParameterVector, cfg: &RenderSettings) -> Result<SoundSample> {
    if !(MIN_OCTAVE..=MAX_OCTAVE).contains(&cfg.octave) {
        return Err(Error::Domain {
            what: "octave",
            value: cfg.octave as f64,
        });
    }
    if !(cfg.duration > 0.0 && cfg.duration.is_finite()) {
        return Err(Error::Domain {
            what: "duration",
            value: cfg.duration,
        });
    }
    if cfg.rate == 0 {
        return Err(Error::Domain {
            what: "sample rate",
            value: 0.0,
        });
    }
    let rate = cfg.rate as f64;
    let n = (cfg.duration * rate).round() as usize;
    let freq = c_frequency(cfg.octave, cfg.transpose_semitones);
    let mut voice = Voice::new(params, freq, rate, cfg.seed);
    let dry = voice.render(n);
    let s = voice.settings();
    let mix = EffectMix {
        reverb: s.reverb,
        chorus: s.chorus,
        flanger: s.flanger,
    };
    let mut samples = apply_effects_at(&dry, mix, rate)?;
    limit(&mut samples);
    Ok(SoundSample {
        samples,
        sample_rate: cfg.rate,
        octave: cfg.octave,
        transpose_semitones: cfg.transpose_semitones,
        duration: cfg.duration,
        source_params: *params,
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bits(s: &SoundSample) -> Vec<u64> {
        s.samples.iter().map(|x| x.to_bits()).collect()
    }

    #[test]
    fn length_contract() {
        let p = ParameterVector::splat(0.5).unwrap();
        let s = render(&p, 0, 4.0, 44100, 0).unwrap();
        assert_eq!(s.samples.len(), 176_400);
        assert_eq!(s.pitch_class(), "C");
        assert_eq!(s.source_params, p);
    }

    #[test]
    fn deterministic() {
        let p = ParameterVector::splat(0.5).unwrap();
        let a = render(&p, 1, 0.5, 44100, 9).unwrap();
        let b = render(&p, 1, 0.5, 44100, 9).unwrap();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn seed_only_feeds_noise() {
        let p = ParameterVector::splat(0.5)
            .unwrap()
            .with(Slot::NoiseLevel.index(), 0.0)
            .unwrap();
        let a = render(&p, 0, 0.5, 44100, 1).unwrap();
        let b = render(&p, 0, 0.5, 44100, 2).unwrap();
        assert_eq!(bits(&a), bits(&b));
        let noisy = ParameterVector::splat(0.5).unwrap();
        let a = render(&noisy, 0, 0.5, 44100, 1).unwrap();
        let b = render(&noisy, 0, 0.5, 44100, 2).unwrap();
        assert_ne!(bits(&a), bits(&b));
    }

    #[test]
    fn domain_errors() {
        let p = ParameterVector::splat(0.5).unwrap();
        assert!(render(&p, 6, 1.0, 44100, 0).is_err());
        assert!(render(&p, -6, 1.0, 44100, 0).is_err());
        assert!(render(&p, 0, 0.0, 44100, 0).is_err());
        assert!(render(&p, 0, -1.0, 44100, 0).is_err());
        assert!(render(&p, -5, 0.01, 44100, 0).is_ok());
    }

    #[test]
    fn envelope_retriggers_at_zero() {
        // Slow attack: the first samples are quiet and the level grows.
        let p = ParameterVector::splat(0.5)
            .unwrap()
            .with(Slot::ReverbMix.index(), 0.0)
            .unwrap();
        let s = render(&p, 0, 1.0, 44100, 0).unwrap();
        assert_eq!(s.samples[0], 0.0);
        let early: f64 = s.samples[..441].iter().map(|x| x.abs()).fold(0.0, f64::max);
        let later: f64 = s.samples[22050..22491]
            .iter()
            .map(|x| x.abs())
            .fold(0.0, f64::max);
        assert!(early < later);
    }

    #[test]
    fn octave_doubles_pitch() {
        assert!((c_frequency(1, 0) / c_frequency(0, 0) - 2.0).abs() < 1e-12);
        assert!((c_frequency(0, 12) - c_frequency(1, 0)).abs() < 1e-9);
        assert!((c_frequency(-1, 0) - 130.812_782_650_299_3).abs() < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn output_never_exceeds_unity(vals in prop::array::uniform16(0.0f64..=1.0), octave in -5i32..=5, seed in any::<u64>()) {
            let p = ParameterVector::new(vals).unwrap();
            let s = render(&p, octave, 0.25, 22050, seed).unwrap();
            prop_assert!(s.samples.iter().all(|x| x.abs() <= 1.0 && x.is_finite()));
        }
    }
}
