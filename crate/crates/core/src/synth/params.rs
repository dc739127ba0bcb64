use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

/// Number of synthesis parameters.
pub const PARAM_COUNT: usize = 16;

/// Upper bound on the number of discrete levels of any slot.
pub const MAX_STEPS: u32 = 20;

/// Harmonic ratios selectable for the slave oscillator.
pub const HARMONIC_RATIOS: [f64; 7] = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0];

/// The fixed parameter layout. Every slot holds a normalized value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(usize)]
pub enum Slot {
    MasterD = 0,
    MasterV,
    SlaveD,
    SlaveV,
    SlaveRatio,
    CombineMode,
    ModIndex,
    OscBalance,
    NoiseLevel,
    Attack,
    Decay,
    Sustain,
    ModEnvAmount,
    ModEnvDest,
    ReverbMix,
    ChorusFlanger,
}

impl Slot {
    pub const ALL: [Slot; PARAM_COUNT] = [
        Slot::MasterD,
        Slot::MasterV,
        Slot::SlaveD,
        Slot::SlaveV,
        Slot::SlaveRatio,
        Slot::CombineMode,
        Slot::ModIndex,
        Slot::OscBalance,
        Slot::NoiseLevel,
        Slot::Attack,
        Slot::Decay,
        Slot::Sustain,
        Slot::ModEnvAmount,
        Slot::ModEnvDest,
        Slot::ReverbMix,
        Slot::ChorusFlanger,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Number of discrete levels this slot is quantized to.
    pub fn steps(self) -> u32 {
        match self {
            Slot::MasterD | Slot::MasterV | Slot::SlaveD | Slot::SlaveV => 20,
            Slot::SlaveRatio => HARMONIC_RATIOS.len() as u32,
            Slot::CombineMode | Slot::ModEnvDest => 3,
            Slot::ModIndex | Slot::OscBalance => 10,
            Slot::NoiseLevel => 8,
            Slot::Attack | Slot::Decay | Slot::Sustain | Slot::ModEnvAmount => 10,
            Slot::ReverbMix => 8,
            Slot::ChorusFlanger => 9,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Slot::MasterD => "master_d",
            Slot::MasterV => "master_v",
            Slot::SlaveD => "slave_d",
            Slot::SlaveV => "slave_v",
            Slot::SlaveRatio => "slave_ratio",
            Slot::CombineMode => "combine_mode",
            Slot::ModIndex => "mod_index",
            Slot::OscBalance => "osc_balance",
            Slot::NoiseLevel => "noise_level",
            Slot::Attack => "attack",
            Slot::Decay => "decay",
            Slot::Sustain => "sustain",
            Slot::ModEnvAmount => "mod_env_amount",
            Slot::ModEnvDest => "mod_env_dest",
            Slot::ReverbMix => "reverb_mix",
            Slot::ChorusFlanger => "chorus_flanger",
        }
    }
}

/// Per-slot step counts in layout order.
pub fn step_counts() -> [u32; PARAM_COUNT] {
    Slot::ALL.map(Slot::steps)
}

/// Size of the discretized parameter space, the product of all step counts.
pub fn cardinality() -> f64 {
    step_counts().iter().map(|&s| s as f64).product()
}

/// Snap `value` to the nearest of `steps` evenly spaced levels on `[0, 1]`.
pub fn quantize_value(value: f64, steps: u32) -> f64 {
    if steps <= 1 {
        return 0.0;
    }
    let top = (steps - 1) as f64;
    (value.clamp(0.0, 1.0) * top).round() / top
}

/// Level index of `value` among `steps` levels.
pub fn level_of(value: f64, steps: u32) -> u32 {
    if steps <= 1 {
        return 0;
    }
    (value.clamp(0.0, 1.0) * (steps - 1) as f64).round() as u32
}

/// The 16 normalized synthesis parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ParameterVector([f64; PARAM_COUNT]);

impl ParameterVector {
    pub fn new(values: [f64; PARAM_COUNT]) -> Result<Self> {
        for (i, &v) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Params(format!(
                    "slot {i} ({}) = {v} is outside [0, 1]",
                    Slot::ALL[i].name()
                )));
            }
        }
        Ok(ParameterVector(values))
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; PARAM_COUNT] = values.try_into().map_err(|_| Error::Dimension {
            expected: PARAM_COUNT,
            got: values.len(),
        })?;
        Self::new(arr)
    }

    /// Every slot set to `value`.
    pub fn splat(value: f64) -> Result<Self> {
        Self::new([value; PARAM_COUNT])
    }

    pub fn values(&self) -> &[f64; PARAM_COUNT] {
        &self.0
    }

    pub fn get(&self, slot: Slot) -> f64 {
        self.0[slot.index()]
    }

    /// Returns a copy with one slot replaced.
    pub fn with(mut self, index: usize, value: f64) -> Result<Self> {
        if index >= PARAM_COUNT {
            return Err(Error::Index {
                index,
                len: PARAM_COUNT,
            });
        }
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::Params(format!(
                "slot {index} = {value} is outside [0, 1]"
            )));
        }
        self.0[index] = value;
        Ok(self)
    }

    /// Snap every slot to its discrete level.
    pub fn quantize(&self) -> Self {
        let mut out = self.0;
        for (v, slot) in out.iter_mut().zip(Slot::ALL) {
            *v = quantize_value(*v, slot.steps());
        }
        ParameterVector(out)
    }

    /// Discrete level index of every slot.
    pub fn levels(&self) -> [u32; PARAM_COUNT] {
        let mut out = [0; PARAM_COUNT];
        for (i, slot) in Slot::ALL.iter().enumerate() {
            out[i] = level_of(self.0[i], slot.steps());
        }
        out
    }
}

impl TryFrom<Vec<f64>> for ParameterVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::from_slice(&v)
    }
}

impl From<ParameterVector> for Vec<f64> {
    fn from(p: ParameterVector) -> Self {
        p.0.to_vec()
    }
}

impl fmt::Display for ParameterVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Parses 16 whitespace or comma separated decimals, or the shorthand
/// `VALUExCOUNT` (also `VALUE*COUNT`, `VALUE×COUNT`) for repeated values.
impl FromStr for ParameterVector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut values = Vec::with_capacity(PARAM_COUNT);
        for tok in s
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
        {
            let (val, count) = match tok.split_once(['x', '*', '×']) {
                Some((v, n)) => (
                    v,
                    n.parse::<usize>()
                        .map_err(|_| Error::Params(format!("bad repeat count in {tok:?}")))?,
                ),
                None => (tok, 1),
            };
            let v: f64 = val
                .parse()
                .map_err(|_| Error::Params(format!("not a number: {val:?}")))?;
            values.extend(std::iter::repeat_n(v, count));
        }
        Self::from_slice(&values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_has_sixteen_slots_with_at_most_twenty_steps() {
        assert_eq!(Slot::ALL.len(), 16);
        for (i, s) in Slot::ALL.iter().enumerate() {
            assert_eq!(s.index(), i);
            assert!(s.steps() >= 2 && s.steps() <= MAX_STEPS, "{s:?}");
        }
        assert_eq!(Slot::SlaveRatio.steps() as usize, HARMONIC_RATIOS.len());
    }

    #[test]
    fn cardinality_is_about_ten_to_the_fifteen() {
        let c = cardinality();
        assert!((1e14..=1e16).contains(&c), "{c:e}");
    }

    #[test]
    fn rejects_out_of_range_and_wrong_length() {
        assert!(ParameterVector::splat(1.0001).is_err());
        assert!(ParameterVector::splat(-0.1).is_err());
        assert!(ParameterVector::from_slice(&[0.5; 15]).is_err());
        assert!(ParameterVector::splat(f64::NAN).is_err());
    }

    #[test]
    fn parses_lists_and_shorthand() {
        let a: ParameterVector = "0.5x16".parse().unwrap();
        let b: ParameterVector = "0.5×16".parse().unwrap();
        let c: ParameterVector = std::iter::repeat_n("0.5", 16)
            .collect::<Vec<_>>()
            .join(" ")
            .parse()
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        let d: ParameterVector = "0.1, 0.2 0x14".parse().unwrap();
        assert_eq!(d.values()[1], 0.2);
        assert!("0.5x15".parse::<ParameterVector>().is_err());
    }

    #[test]
    fn serde_round_trip_is_a_plain_array() {
        let p = ParameterVector::splat(0.25).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.starts_with('['));
        let q: ParameterVector = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
        assert!(serde_json::from_str::<ParameterVector>("[2.0]").is_err());
    }

    proptest! {
        #[test]
        fn quantize_is_idempotent_and_stays_in_range(vals in prop::array::uniform16(0.0f64..=1.0)) {
            let p = ParameterVector::new(vals).unwrap();
            let q = p.quantize();
            prop_assert_eq!(q, q.quantize());
            for (slot, v) in Slot::ALL.iter().zip(q.values()) {
                prop_assert!((0.0..=1.0).contains(v));
                let lvl = level_of(*v, slot.steps());
                prop_assert!(lvl < slot.steps());
                prop_assert_eq!(quantize_value(*v, slot.steps()), *v);
            }
        }
    }
}
