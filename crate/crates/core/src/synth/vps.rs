//! Vector Phase Shaping.
//!
//! A VPS oscillator bends the linear phase ramp of a cosine oscillator
//! through a single breakpoint `(d, v)`: the phase reaches `v` at the
//! horizontal position `d` and returns to `1` at the end of the period.
//! Values of `v` beyond one wrap the cosine several times inside the first
//! segment, which produces formant-like spectral peaks.

use std::f64::consts::TAU;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VpsBreakpoint {
    d: f64,
    v: f64,
}

impl VpsBreakpoint {
    pub fn new(d: f64, v: f64) -> Result<Self> {
        if !(d > 0.0 && d < 1.0) {
            return Err(Error::Domain {
                what: "breakpoint d",
                value: d,
            });
        }
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::Domain {
                what: "breakpoint v",
                value: v,
            });
        }
        Ok(VpsBreakpoint { d, v })
    }

    /// Unchecked constructor for the audio path; callers keep `d` inside
    /// `(0, 1)` and `v` non-negative.
    #[inline]
    pub(crate) fn raw(d: f64, v: f64) -> Self {
        VpsBreakpoint { d, v: v.max(0.0) }
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    /// Distort a phase in `[0, 1)`.
    #[inline]
    pub fn shape(&self, x: f64) -> f64 {
        if x < self.d {
            self.v * x / self.d
        } else {
            self.v + (1.0 - self.v) * (x - self.d) / (1.0 - self.d)
        }
    }
}

/// Checked form of [`VpsBreakpoint::shape`].
pub fn vps_phase(x: f64, bp: &VpsBreakpoint) -> Result<f64> {
    if !(0.0..1.0).contains(&x) {
        return Err(Error::Domain {
            what: "phase",
            value: x,
        });
    }
    Ok(bp.shape(x))
}

#[inline]
pub(crate) fn vps_sample(phase: f64, bp: &VpsBreakpoint) -> f64 {
    -(TAU * bp.shape(phase)).cos()
}

/// Render `n` samples of a free-running VPS oscillator.
pub fn vps_oscillator(
    freq: f64,
    bp: &VpsBreakpoint,
    n: usize,
    rate: f64,
    initial_phase: f64,
) -> Result<Vec<f64>> {
    if !(freq > 0.0 && freq.is_finite()) {
        return Err(Error::Domain {
            what: "frequency",
            value: freq,
        });
    }
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::Domain {
            what: "sample rate",
            value: rate,
        });
    }
    let inc = freq / rate;
    Ok((0..n)
        .map(|i| {
            let p = initial_phase + i as f64 * inc;
            vps_sample(p - p.floor(), bp)
        })
        .collect())
}
