//! Dephasing reservoir: spectral density `J(ν)`, Bose occupation and the
//! golden-rule transition rate `Γ(δ) = π[J(δ)(n(δ)+1) + J(−δ)n(−δ)]`.
//!
//! Bath modes have positive energy, so `J(ν ≤ 0) = 0`. This also fixes
//! `Γ(0) = 0`: transitions between degenerate eigenstates are not dephased.
//! The principal-value (Lamb shift) part of the Markov integral is dropped.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralFamily {
    /// `J(ν) = A/ν`.
    OneOverF,
    /// `J(ν) = A/ν_ref`.
    Flat,
    /// `J(ν) = (A/ν_ref)(ν/ν_ref)^exponent`.
    PowerLaw(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingMode {
    /// Every qubit has its own bath, coupled through `σᵢᶻ`.
    Individual,
    /// One shared bath coupled through `Σᵢ σᵢᶻ`.
    Collective,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathSpec {
    pub family: SpectralFamily,
    /// Rate × frequency; `J(ν) = amplitude/ν` for the 1/f family.
    pub amplitude: f64,
    /// Infrared cutoff: `J` is clamped at `J(ν_min)` below it.
    pub ir_cutoff: f64,
    /// Reference frequency for the flat and power-law families.
    pub reference_freq: f64,
    /// Temperature in angular-frequency units (`k_B T/ħ`).
    pub temperature: f64,
    pub coupling_mode: CouplingMode,
}

impl BathSpec {
    /// 1/f bath with `J(ν) = c·ḡ²/ν` (so `J(ḡ) = c·ḡ`), IR cutoff `ḡ·1e-3`, T = 0.
    pub fn one_over_f(c: f64, mean_coupling: f64, coupling_mode: CouplingMode) -> Self {
        Self {
            family: SpectralFamily::OneOverF,
            amplitude: c * mean_coupling * mean_coupling,
            ir_cutoff: mean_coupling * 1e-3,
            reference_freq: mean_coupling,
            temperature: 0.0,
            coupling_mode,
        }
    }

    pub fn with_family(self, family: SpectralFamily) -> Self {
        Self { family, ..self }
    }

    /// No dephasing at all.
    pub fn off(coupling_mode: CouplingMode) -> Self {
        Self {
            family: SpectralFamily::OneOverF,
            amplitude: 0.0,
            ir_cutoff: 1.0,
            reference_freq: 1.0,
            temperature: 0.0,
            coupling_mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.amplitude.is_finite()
            && self.amplitude >= 0.0
            && self.ir_cutoff.is_finite()
            && self.ir_cutoff > 0.0
            && self.reference_freq.is_finite()
            && self.reference_freq > 0.0
            && self.temperature.is_finite()
            && self.temperature >= 0.0
            && match self.family {
                SpectralFamily::PowerLaw(p) => p.is_finite(),
                _ => true,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid bath parameters: {self:?}")))
        }
    }

    pub fn is_off(&self) -> bool {
        self.amplitude == 0.0
    }
}

pub fn spectral_density(bath: &BathSpec, nu: f64) -> f64 {
    if nu <= 0.0 {
        return 0.0;
    }
    let nu = nu.max(bath.ir_cutoff);
    let a = bath.amplitude;
    match bath.family {
        SpectralFamily::OneOverF => a / nu,
        SpectralFamily::Flat => a / bath.reference_freq,
        SpectralFamily::PowerLaw(p) => {
            a / bath.reference_freq * (nu / bath.reference_freq).powf(p)
        }
    }
}

/// `1/(e^{ν/T} − 1)`; exactly zero at `T = 0`.
pub fn bose_occupation(nu: f64, temperature: f64) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Bose occupation needs ν > 0, got {nu}"
        )));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (nu / temperature).exp_m1())
}

pub fn transition_rate(bath: &BathSpec, delta: f64) -> f64 {
    if delta == 0.0 || bath.is_off() {
        return 0.0;
    }
    let nu = delta.abs();
    // nu > 0 here, so the occupation is always defined
    let n = bose_occupation(nu, bath.temperature).unwrap_or(0.0);
    if delta > 0.0 {
        PI * spectral_density(bath, nu) * (n + 1.0)
    } else {
        PI * spectral_density(bath, nu) * n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const G: f64 = 331.0;

    fn device_bath() -> BathSpec {
        BathSpec::one_over_f(0.0105, G, CouplingMode::Collective)
    }

    #[test]
    fn density_at_mean_coupling() {
        let b = device_bath();
        assert!((spectral_density(&b, G) - 0.0105 * G).abs() < 1e-12);
    }

    #[test]
    fn density_vanishes_for_non_positive_frequency() {
        for fam in [SpectralFamily::OneOverF, SpectralFamily::Flat, SpectralFamily::PowerLaw(-2.0)] {
            let b = device_bath().with_family(fam);
            assert_eq!(spectral_density(&b, -1.0), 0.0);
            assert_eq!(spectral_density(&b, 0.0), 0.0);
        }
    }

    #[test]
    fn density_clamped_below_cutoff() {
        let b = device_bath();
        let v = spectral_density(&b, b.ir_cutoff / 2.0);
        assert!((v - b.amplitude / b.ir_cutoff).abs() < 1e-9 * v);
    }

    #[test]
    fn occupation_limits() {
        assert_eq!(bose_occupation(3.0, 0.0).unwrap(), 0.0);
        let t = 2.0;
        assert!((bose_occupation(t * 2f64.ln(), t).unwrap() - 1.0).abs() < 1e-12);
        let nu = 1e-4 * t;
        let n = bose_occupation(nu, t).unwrap();
        assert!((n / (t / nu) - 1.0).abs() < 1e-4);
        assert!(bose_occupation(0.0, 1.0).is_err());
        assert!(bose_occupation(-1.0, 1.0).is_err());
    }

    #[test]
    fn zero_temperature_rates() {
        let b = device_bath();
        let d = 5.0;
        assert!((transition_rate(&b, d) - PI * b.amplitude / d).abs() < 1e-12);
        assert_eq!(transition_rate(&b, -d), 0.0);
        assert_eq!(transition_rate(&b, 0.0), 0.0);
        // δ = 2ḡ: independent scalar evaluation π·0.0105·ḡ/2
        let r = transition_rate(&b, 2.0 * G) / G;
        assert!((r - PI * 0.0105 / 2.0).abs() < 1e-15);
        assert!((r - 0.01649).abs() < 5e-6);
    }

    #[test]
    fn flat_family_constant_rate() {
        let b = device_bath().with_family(SpectralFamily::Flat);
        let r0 = transition_rate(&b, 10.0);
        for d in [20.0, 300.0, 4000.0] {
            assert!((transition_rate(&b, d) - r0).abs() < 1e-12 * r0);
        }
    }

    #[test]
    fn power_law_matches_one_over_f_at_minus_one() {
        let b = device_bath();
        let p = b.with_family(SpectralFamily::PowerLaw(-1.0));
        for nu in [1.0, 50.0, 700.0] {
            let (x, y) = (spectral_density(&b, nu), spectral_density(&p, nu));
            assert!((x - y).abs() < 1e-12 * x);
        }
    }

    proptest! {
        #[test]
        fn detailed_balance(t in 0.5f64..50.0, delta_rel in 1.01f64..30.0) {
            let b = BathSpec { temperature: t, ..device_bath() };
            let d = b.ir_cutoff * delta_rel;
            let ratio = transition_rate(&b, d) / transition_rate(&b, -d);
            prop_assert!((ratio / (d / t).exp() - 1.0).abs() < 1e-10);
        }

        #[test]
        fn rates_non_negative_and_monotone(d1 in 0.5f64..2000.0, d2 in 0.5f64..2000.0,
                                           sign in prop::bool::ANY, t in 0.0f64..10.0) {
            let b = BathSpec { temperature: t, ..device_bath() };
            let s = if sign { 1.0 } else { -1.0 };
            prop_assert!(transition_rate(&b, s * d1) >= 0.0);
            let b0 = device_bath();
            let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
            prop_assert!(transition_rate(&b0, lo) >= transition_rate(&b0, hi));
        }
    }
}
