use super::params::{level_of, ParameterVector, Slot, HARMONIC_RATIOS};
use super::vps::{vps_sample, VpsBreakpoint};

/// Control block length in samples; parameter changes land on block boundaries.
pub const CONTROL_BLOCK: usize = 64;

const D_MIN: f64 = 0.05;
const D_SPAN: f64 = 0.9;
const V_MAX: f64 = 3.0;
const FM_INDEX_MAX: f64 = 2.0;
const NOISE_MAX: f64 = 0.5;
const ATTACK_MIN: f64 = 0.002;
const ATTACK_SPAN: f64 = 1.5;
const DECAY_MIN: f64 = 0.02;
const DECAY_SPAN: f64 = 2.0;
const MOD_ENV_DEPTH: f64 = 2.0;
const HEADROOM: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombineMode {
    Mix,
    Am,
    Fm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModDestination {
    MasterV,
    SlaveV,
    ModIndex,
}

/// Parameter vector decoded into synthesis units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSettings {
    pub master_d: f64,
    pub master_v: f64,
    pub slave_d: f64,
    pub slave_v: f64,
    pub slave_ratio: f64,
    pub mode: CombineMode,
    pub mod_index: f64,
    pub balance: f64,
    pub noise: f64,
    pub attack: f64,
    pub decay: f64,
    pub sustain: f64,
    pub mod_env_amount: f64,
    pub mod_dest: ModDestination,
    pub reverb: f64,
    pub chorus: f64,
    pub flanger: f64,
}

impl SynthSettings {
    pub fn decode(p: &ParameterVector) -> Self {
        let g = |s: Slot| p.get(s);
        let cf = g(Slot::ChorusFlanger);
        let (chorus, flanger) = if cf < 0.5 {
            (2.0 * cf, 0.0)
        } else {
            (0.0, 2.0 * cf - 1.0)
        };
        SynthSettings {
            master_d: D_MIN + D_SPAN * g(Slot::MasterD),
            master_v: V_MAX * g(Slot::MasterV),
            slave_d: D_MIN + D_SPAN * g(Slot::SlaveD),
            slave_v: V_MAX * g(Slot::SlaveV),
            slave_ratio: HARMONIC_RATIOS
                [level_of(g(Slot::SlaveRatio), Slot::SlaveRatio.steps()) as usize],
            mode: match level_of(g(Slot::CombineMode), 3) {
                0 => CombineMode::Mix,
                1 => CombineMode::Am,
                _ => CombineMode::Fm,
            },
            mod_index: g(Slot::ModIndex),
            balance: g(Slot::OscBalance),
            noise: NOISE_MAX * g(Slot::NoiseLevel),
            attack: ATTACK_MIN + ATTACK_SPAN * g(Slot::Attack),
            decay: DECAY_MIN + DECAY_SPAN * g(Slot::Decay),
            sustain: g(Slot::Sustain),
            mod_env_amount: g(Slot::ModEnvAmount),
            mod_dest: match level_of(g(Slot::ModEnvDest), 3) {
                0 => ModDestination::MasterV,
                1 => ModDestination::SlaveV,
                _ => ModDestination::ModIndex,
            },
            reverb: g(Slot::ReverbMix),
            chorus,
            flanger,
        }
    }
}

/// Continuous controls that glide across a control block.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Smoothed {
    master_d: f64,
    master_v: f64,
    slave_d: f64,
    slave_v: f64,
    mod_index: f64,
    balance: f64,
    noise: f64,
}

impl Smoothed {
    fn of(s: &SynthSettings) -> Self {
        Smoothed {
            master_d: s.master_d,
            master_v: s.master_v,
            slave_d: s.slave_d,
            slave_v: s.slave_v,
            mod_index: s.mod_index,
            balance: s.balance,
            noise: s.noise,
        }
    }

    fn lerp(&self, to: &Self, t: f64) -> Self {
        let l = |a: f64, b: f64| a + (b - a) * t;
        Smoothed {
            master_d: l(self.master_d, to.master_d),
            master_v: l(self.master_v, to.master_v),
            slave_d: l(self.slave_d, to.slave_d),
            slave_v: l(self.slave_v, to.slave_v),
            mod_index: l(self.mod_index, to.mod_index),
            balance: l(self.balance, to.balance),
            noise: l(self.noise, to.noise),
        }
    }
}

/// Linear attack to 1, linear decay to `sustain`, then hold.
#[inline]
pub fn ads_envelope(t: f64, attack: f64, decay: f64, sustain: f64) -> f64 {
    if t < attack {
        t / attack
    } else if t < attack + decay {
        1.0 - (1.0 - sustain) * (t - attack) / decay
    } else {
        sustain
    }
}

/// Uniform white noise in `[-1, 1)` addressed by (seed, sample index).
#[inline]
pub fn noise_at(seed: u64, index: u64) -> f64 {
    let mut z = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 52) as f64 - 1.0
}

/// A single streaming voice producing the dry (pre-effects) signal.
///
/// Envelopes start at sample zero. Calls to [`Voice::set_params`] take effect
/// at the next control block; continuous controls ramp linearly across that
/// block while the discrete ones (ratio, mode, modulation destination) switch
/// at its start.
#[derive(Debug, Clone)]
pub struct Voice {
    settings: SynthSettings,
    current: Smoothed,
    target: Smoothed,
    freq: f64,
    rate: f64,
    seed: u64,
    master_phase: f64,
    slave_phase: f64,
    position: u64,
}

impl Voice {
    pub fn new(params: &ParameterVector, freq: f64, rate: f64, seed: u64) -> Self {
        let settings = SynthSettings::decode(params);
        let s = Smoothed::of(&settings);
        Voice {
            settings,
            current: s,
            target: s,
            freq,
            rate,
            seed,
            master_phase: 0.0,
            slave_phase: 0.0,
            position: 0,
        }
    }

    pub fn settings(&self) -> &SynthSettings {
        &self.settings
    }

    pub fn set_params(&mut self, params: &ParameterVector) {
        let next = SynthSettings::decode(params);
        self.target = Smoothed::of(&next);
        self.settings = SynthSettings {
            master_d: self.settings.master_d,
            master_v: self.settings.master_v,
            slave_d: self.settings.slave_d,
            slave_v: self.settings.slave_v,
            mod_index: self.settings.mod_index,
            balance: self.settings.balance,
            noise: self.settings.noise,
            ..next
        };
    }

    /// Fill `out` (at most one control block) with dry samples.
    pub fn render_block(&mut self, out: &mut [f64]) {
        debug_assert!(out.len() <= CONTROL_BLOCK);
        let from = self.current;
        let to = self.target;
        let gliding = from != to;
        let s = self.settings;
        let master_inc = self.freq / self.rate;
        let slave_inc = self.freq * s.slave_ratio / self.rate;
        let len = out.len().max(1) as f64;

        for (j, o) in out.iter_mut().enumerate() {
            let c = if gliding {
                from.lerp(&to, (j + 1) as f64 / len)
            } else {
                from
            };
            let t = self.position as f64 / self.rate;
            let amp = ads_envelope(t, s.attack, s.decay, s.sustain);
            let menv = s.mod_env_amount * ads_envelope(t, s.attack, s.decay, 0.0);

            let (mut mv, mut sv, mut index) = (c.master_v, c.slave_v, c.mod_index);
            match s.mod_dest {
                ModDestination::MasterV => mv += MOD_ENV_DEPTH * menv,
                ModDestination::SlaveV => sv += MOD_ENV_DEPTH * menv,
                ModDestination::ModIndex => index = (index + menv).min(1.0),
            }
            let master_bp = VpsBreakpoint::raw(c.master_d, mv);
            let slave_bp = VpsBreakpoint::raw(c.slave_d, sv);

            let slave = vps_sample(self.slave_phase, &slave_bp);
            let primary = match s.mode {
                CombineMode::Mix => vps_sample(self.master_phase, &master_bp),
                CombineMode::Am => {
                    let m = vps_sample(self.master_phase, &master_bp);
                    m * (1.0 - index + index * 0.5 * (slave + 1.0))
                }
                CombineMode::Fm => {
                    let p = self.master_phase + FM_INDEX_MAX * index * slave;
                    vps_sample(p - p.floor(), &master_bp)
                }
            };
            let mut x = (1.0 - c.balance) * primary + c.balance * slave;
            if c.noise != 0.0 {
                x += c.noise * noise_at(self.seed, self.position);
            }
            *o = HEADROOM * amp * x;

            self.master_phase += master_inc;
            self.master_phase -= self.master_phase.floor();
            self.slave_phase += slave_inc;
            self.slave_phase -= self.slave_phase.floor();
            self.position += 1;
        }
        self.current = to;
    }

    /// Render `n` dry samples block by block.
    pub fn render(&mut self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for chunk in out.chunks_mut(CONTROL_BLOCK) {
            self.render_block(chunk);
        }
        out
    }
}
