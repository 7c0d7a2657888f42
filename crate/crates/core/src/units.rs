//! Conversions between linear frequency in MHz and the internal angular
//! units (rad·MHz, i.e. rad/µs).

use std::f64::consts::TAU;

/// Linear MHz → angular rad·MHz.
#[inline]
pub fn mhz(f: f64) -> f64 {
    f * TAU
}

/// Angular rad·MHz → linear MHz.
#[inline]
pub fn to_mhz(w: f64) -> f64 {
    w / TAU
}
