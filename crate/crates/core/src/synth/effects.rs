//! Effects chain: chorus, flanger and reverb, followed by a peak limiter.
//!
//! Every effect is blended as `(1 - mix) * dry + mix * effect(dry)`, so a mix
//! of zero is an exact bypass and silence stays silent.

use std::f64::consts::TAU;

use crate::{Error, Result};

const REF_RATE: f64 = 44_100.0;
const COMB_DELAYS: [usize; 4] = [1557, 1617, 1491, 1422];
const COMB_FEEDBACK: f64 = 0.84;
const COMB_DAMP: f64 = 0.2;
const ALLPASS_DELAYS: [usize; 2] = [556, 225];
const ALLPASS_GAIN: f64 = 0.5;

const CHORUS_BASE_MS: f64 = 20.0;
const CHORUS_DEPTH_MS: f64 = 5.0;
const CHORUS_LFO_HZ: f64 = 0.8;

const FLANGER_BASE_MS: f64 = 2.0;
const FLANGER_DEPTH_MS: f64 = 1.5;
const FLANGER_LFO_HZ: f64 = 0.25;
const FLANGER_FEEDBACK: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EffectMix {
    pub reverb: f64,
    pub chorus: f64,
    pub flanger: f64,
}

impl EffectMix {
    pub fn is_bypass(&self) -> bool {
        self.reverb == 0.0 && self.chorus == 0.0 && self.flanger == 0.0
    }
}

/// Apply the effects chain at 44.1 kHz.
pub fn apply_effects(
    dry: &[f64],
    reverb_mix: f64,
    chorus_mix: f64,
    flanger_mix: f64,
) -> Result<Vec<f64>> {
    apply_effects_at(
        dry,
        EffectMix {
            reverb: reverb_mix,
            chorus: chorus_mix,
            flanger: flanger_mix,
        },
        REF_RATE,
    )
}

pub fn apply_effects_at(dry: &[f64], mix: EffectMix, rate: f64) -> Result<Vec<f64>> {
    for (what, m) in [
        ("reverb mix", mix.reverb),
        ("chorus mix", mix.chorus),
        ("flanger mix", mix.flanger),
    ] {
        if !(0.0..=1.0).contains(&m) {
            return Err(Error::Domain { what, value: m });
        }
    }
    if mix.is_bypass() {
        return Ok(dry.to_vec());
    }
    let mut buf = dry.to_vec();
    if mix.chorus > 0.0 {
        let wet = chorus(&buf, rate);
        blend(&mut buf, &wet, mix.chorus);
    }
    if mix.flanger > 0.0 {
        let wet = flanger(&buf, rate);
        blend(&mut buf, &wet, mix.flanger);
    }
    if mix.reverb > 0.0 {
        let wet = reverb(&buf, rate);
        blend(&mut buf, &wet, mix.reverb);
    }
    limit(&mut buf);
    Ok(buf)
}

fn blend(buf: &mut [f64], wet: &[f64], mix: f64) {
    for (d, w) in buf.iter_mut().zip(wet) {
        *d = (1.0 - mix) * *d + mix * w;
    }
}

/// Scales the whole buffer down if its peak exceeds one.
pub fn limit(buf: &mut [f64]) {
    let peak = buf.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if peak > 1.0 {
        let g = 1.0 / peak;
        for x in buf.iter_mut() {
            *x = (*x * g).clamp(-1.0, 1.0);
        }
    }
}

fn scaled(delay: usize, rate: f64) -> usize {
    ((delay as f64) * rate / REF_RATE).round().max(1.0) as usize
}

/// Schroeder network: four damped parallel combs into two series allpasses.
fn reverb(input: &[f64], rate: f64) -> Vec<f64> {
    let n = input.len();
    let mut wet = vec![0.0; n];
    for &delay in &COMB_DELAYS {
        let len = scaled(delay, rate);
        let mut line = vec![0.0; len];
        let mut pos = 0;
        let mut lp = 0.0;
        for (i, x) in input.iter().enumerate() {
            let out = line[pos];
            lp = out * (1.0 - COMB_DAMP) + lp * COMB_DAMP;
            line[pos] = x + lp * COMB_FEEDBACK;
            pos = (pos + 1) % len;
            wet[i] += out * 0.25;
        }
    }
    for &delay in &ALLPASS_DELAYS {
        let len = scaled(delay, rate);
        let mut line = vec![0.0; len];
        let mut pos = 0;
        for s in wet.iter_mut() {
            let buffered = line[pos];
            let y = buffered - ALLPASS_GAIN * *s;
            line[pos] = *s + ALLPASS_GAIN * y;
            pos = (pos + 1) % len;
            *s = y;
        }
    }
    wet
}

#[inline]
fn read_frac(buf: &[f64], pos: f64) -> f64 {
    if pos < 0.0 {
        return 0.0;
    }
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    let a = buf.get(i).copied().unwrap_or(0.0);
    let b = buf.get(i + 1).copied().unwrap_or(0.0);
    a + (b - a) * frac
}

fn chorus(input: &[f64], rate: f64) -> Vec<f64> {
    let base = CHORUS_BASE_MS * 1e-3 * rate;
    let depth = CHORUS_DEPTH_MS * 1e-3 * rate;
    input
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let lfo = (TAU * CHORUS_LFO_HZ * i as f64 / rate).sin();
            let delayed = read_frac(input, i as f64 - (base + depth * lfo));
            0.5 * (x + delayed)
        })
        .collect()
}

fn flanger(input: &[f64], rate: f64) -> Vec<f64> {
    let base = FLANGER_BASE_MS * 1e-3 * rate;
    let depth = FLANGER_DEPTH_MS * 1e-3 * rate;
    let mut line = vec![0.0; input.len()];
    let mut out = vec![0.0; input.len()];
    for (i, x) in input.iter().enumerate() {
        let lfo = (TAU * FLANGER_LFO_HZ * i as f64 / rate).sin();
        let delayed = read_frac(&line[..i], i as f64 - (base + depth * lfo));
        line[i] = x + FLANGER_FEEDBACK * delayed;
        out[i] = 0.5 * (x + delayed);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn impulse(n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[0] = 1.0;
        v
    }

    #[test]
    fn zero_mix_is_bypass() {
        let dry: Vec<f64> = (0..1000)
            .map(|i| ((i * 37 % 101) as f64 / 50.0) - 1.0)
            .collect();
        assert_eq!(apply_effects(&dry, 0.0, 0.0, 0.0).unwrap(), dry);
    }

    #[test]
    fn silence_stays_silent() {
        let dry = vec![0.0; 4410];
        for mix in [(1.0, 0.0, 0.0), (0.3, 0.7, 1.0), (0.0, 0.0, 0.5)] {
            let out = apply_effects(&dry, mix.0, mix.1, mix.2).unwrap();
            assert!(out.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn reverb_has_a_tail() {
        let out = apply_effects(&impulse(44100), 1.0, 0.0, 0.0).unwrap();
        assert_eq!(out.len(), 44100);
        let tail: f64 = out[1..].iter().map(|x| x * x).sum();
        assert!(tail > 1e-3, "tail energy {tail}");
        // Nothing arrives before the shortest comb delay.
        assert!(out[1..1000].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn chorus_and_flanger_delay_the_signal() {
        let out = apply_effects(&impulse(4410), 0.0, 1.0, 0.0).unwrap();
        let echo = (880..930).map(|i| out[i].abs()).fold(0.0, f64::max);
        assert!(echo > 0.1, "{echo}");
        let out = apply_effects(&impulse(4410), 0.0, 0.0, 1.0).unwrap();
        let echo = (85..95).map(|i| out[i].abs()).fold(0.0, f64::max);
        assert!(echo > 0.1, "{echo}");
    }

    #[test]
    fn output_is_limited() {
        let dry = vec![0.99; 10_000];
        let out = apply_effects(&dry, 1.0, 1.0, 1.0).unwrap();
        assert!(out.iter().all(|x| x.abs() <= 1.0));
    }

    #[test]
    fn mix_domain() {
        assert!(apply_effects(&[0.0], 1.5, 0.0, 0.0).is_err());
        assert!(apply_effects(&[0.0], 0.0, -0.5, 0.0).is_err());
    }
}
