//! Run configuration. Everything user-facing is in linear MHz.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tcsim::bath::{BathSpec, CouplingMode, SpectralFamily};
use tcsim::model::SystemSpec;
use tcsim::spectra::SpectrumOptions;
use tcsim::steadystate::Truncation;
use tcsim::units::mhz;

use crate::error::CliError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub format_version: u32,
    pub system: SystemConfig,
    pub bath: BathConfig,
    pub drive: DriveConfig,
    pub sweep: SweepConfig,
    pub validation: ValidationConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    /// Qubits used by `spectrum` and `validate`; the first `n_qubits` couplings apply.
    pub n_qubits: usize,
    pub couplings_mhz: Vec<f64>,
    pub cavity_mhz: f64,
    /// Resonator–qubit detuning `ω − ε` applied to every qubit.
    pub detuning_mhz: f64,
    pub kappa_mhz: f64,
    /// Photon cutoff; `null` means `N + 3`.
    pub n_max: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    OneOverF,
    Flat,
    PowerLaw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BathConfig {
    pub family: FamilyName,
    /// Exponent for `power_law`.
    pub exponent: f64,
    /// Dimensionless `c` in `J(ν) = c·ḡ²/ν`, so that `J(ḡ) = c·ḡ`.
    pub c: f64,
    /// Infrared cutoff as a fraction of ḡ.
    pub ir_cutoff_fraction: f64,
    pub temperature_mhz: f64,
    pub coupling_mode: CouplingMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveConfig {
    /// Probe amplitude `η/κ`.
    pub amplitude_over_kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub n_list: Vec<usize>,
    pub points_per_window: usize,
    pub window_span: f64,
    pub fit_span: f64,
    /// Evenly spaced points between the peak windows in `spectrum`.
    pub background_points: usize,
    pub detuning_min_over_g: f64,
    pub detuning_max_over_g: f64,
    pub detuning_steps: usize,
    /// Total excitation cap; `null` keeps the whole Fock space.
    pub excitation_cap: Option<usize>,
    pub reachable_only: bool,
    /// Dressed-jump grouping tolerance; `null` uses `1e-6·max|E|`.
    pub secular_tol_mhz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidationConfig {
    pub oracle_trace_distance: f64,
    pub linearity: f64,
    pub min_eigenvalue: f64,
    pub convergence: f64,
    pub secular_sum: f64,
    pub purity: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            format_version: FORMAT_VERSION,
            system: SystemConfig::default(),
            bath: BathConfig::default(),
            drive: DriveConfig::default(),
            sweep: SweepConfig::default(),
            validation: ValidationConfig::default(),
            seed: 0,
        }
    }
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            n_qubits: 1,
            couplings_mhz: vec![52.7, 55.4, 55.8],
            cavity_mhz: 7023.5,
            detuning_mhz: 0.0,
            kappa_mhz: 0.47,
            n_max: None,
        }
    }
}

impl Default for BathConfig {
    fn default() -> Self {
        Self {
            family: FamilyName::OneOverF,
            exponent: -1.0,
            c: 0.0105,
            ir_cutoff_fraction: 1e-3,
            temperature_mhz: 0.0,
            coupling_mode: CouplingMode::Collective,
        }
    }
}

impl Default for DriveConfig {
    fn default() -> Self {
        Self {
            amplitude_over_kappa: 1e-3,
        }
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            n_list: vec![1, 2, 3],
            points_per_window: 401,
            window_span: 12.0,
            fit_span: 8.0,
            background_points: 401,
            detuning_min_over_g: -3.0,
            detuning_max_over_g: 3.0,
            detuning_steps: 25,
            excitation_cap: Some(1),
            reachable_only: true,
            secular_tol_mhz: None,
        }
    }
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            oracle_trace_distance: 1e-8,
            linearity: 1e-3,
            min_eigenvalue: -1e-8,
            convergence: 5e-3,
            secular_sum: 1e-12,
            purity: 1e-9,
        }
    }
}

/// Defaults, then the config file, then `--set` overrides, then validation.
pub fn load(text: Option<&str>, overrides: &[String]) -> Result<RunConfig, CliError> {
    let base: RunConfig = match text {
        Some(t) => serde_json::from_str(t).map_err(|e| {
            CliError::Config(format!("config line {} column {}: {e}", e.line(), e.column()))
        })?,
        None => RunConfig::default(),
    };
    let mut value = serde_json::to_value(&base).map_err(|e| CliError::Config(e.to_string()))?;
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    let cfg: RunConfig = serde_json::from_value(value)
        .map_err(|e| CliError::Config(format!("after overrides: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

/// `a.b.c=value`; the value is parsed as JSON and falls back to a string.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not key=value")))?;
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    let mut node = root;
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("`{key}`: `{}` is not a section", parts[..i].join("."))))?;
        if !obj.contains_key(*part) {
            return Err(CliError::Config(format!("unknown key `{key}`")));
        }
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), parsed);
            return Ok(());
        }
        node = obj.get_mut(*part).expect("checked above");
    }
    Err(CliError::Config(format!("empty key in `{assignment}`")))
}

fn check(ok: bool, key: &str, why: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(format!("`{key}`: {why}")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        check(
            self.format_version == FORMAT_VERSION,
            "format_version",
            &format!("expected {FORMAT_VERSION}, got {}", self.format_version),
        )?;
        let s = &self.system;
        check(
            s.couplings_mhz.iter().all(|g| g.is_finite() && *g >= 0.0),
            "system.couplings_mhz",
            "couplings must be finite and non-negative",
        )?;
        check(
            s.n_qubits <= s.couplings_mhz.len(),
            "system.n_qubits",
            "more qubits than couplings",
        )?;
        check(s.cavity_mhz.is_finite() && s.cavity_mhz > 0.0, "system.cavity_mhz", "must be positive")?;
        check(s.kappa_mhz.is_finite() && s.kappa_mhz > 0.0, "system.kappa_mhz", "must be positive")?;
        check(s.detuning_mhz.is_finite(), "system.detuning_mhz", "must be finite")?;
        check(s.n_max.is_none_or(|n| n >= 1), "system.n_max", "must be at least 1")?;
        let b = &self.bath;
        check(b.c.is_finite() && b.c >= 0.0, "bath.c", "must be non-negative")?;
        check(b.exponent.is_finite(), "bath.exponent", "must be finite")?;
        check(
            b.ir_cutoff_fraction.is_finite() && b.ir_cutoff_fraction > 0.0,
            "bath.ir_cutoff_fraction",
            "must be positive",
        )?;
        check(
            b.temperature_mhz.is_finite() && b.temperature_mhz >= 0.0,
            "bath.temperature_mhz",
            "must be non-negative",
        )?;
        check(
            self.drive.amplitude_over_kappa.is_finite() && self.drive.amplitude_over_kappa > 0.0,
            "drive.amplitude_over_kappa",
            "must be positive",
        )?;
        let w = &self.sweep;
        check(!w.n_list.is_empty(), "sweep.n_list", "must not be empty")?;
        check(
            w.n_list.iter().all(|&n| n >= 1 && n <= s.couplings_mhz.len()),
            "sweep.n_list",
            "entries must lie in 1..=len(couplings)",
        )?;
        check(w.points_per_window >= 5, "sweep.points_per_window", "need at least 5")?;
        check(w.window_span > 0.0, "sweep.window_span", "must be positive")?;
        check(
            w.fit_span > 0.0 && w.fit_span <= w.window_span,
            "sweep.fit_span",
            "must be positive and no wider than window_span",
        )?;
        check(
            w.detuning_min_over_g.is_finite()
                && w.detuning_max_over_g.is_finite()
                && w.detuning_min_over_g < w.detuning_max_over_g,
            "sweep.detuning_min_over_g",
            "detuning range must be increasing",
        )?;
        check(w.detuning_steps >= 2, "sweep.detuning_steps", "need at least 2")?;
        check(
            w.secular_tol_mhz.is_none_or(|t| t.is_finite() && t >= 0.0),
            "sweep.secular_tol_mhz",
            "must be non-negative",
        )?;
        Ok(())
    }

    pub fn couplings(&self) -> Vec<f64> {
        self.system.couplings_mhz.iter().map(|&g| mhz(g)).collect()
    }

    /// Mean coupling of the full list; fixes the bath for every `N`.
    pub fn mean_coupling(&self) -> f64 {
        let g = self.couplings();
        if g.is_empty() {
            0.0
        } else {
            g.iter().sum::<f64>() / g.len() as f64
        }
    }

    pub fn kappa(&self) -> f64 {
        mhz(self.system.kappa_mhz)
    }

    pub fn drive_amplitude(&self) -> f64 {
        self.drive.amplitude_over_kappa * self.kappa()
    }

    /// First `n` qubits, all at detuning `system.detuning_mhz`.
    pub fn system_spec(&self, n: usize) -> SystemSpec {
        let g = self.couplings();
        let base = SystemSpec::resonant(&g[..n], mhz(self.system.cavity_mhz), self.kappa());
        let eps = base.cavity_freq - mhz(self.system.detuning_mhz);
        SystemSpec {
            qubit_freqs: vec![eps; n],
            n_max: self.system.n_max.unwrap_or(base.n_max),
            ..base
        }
    }

    pub fn family(&self) -> SpectralFamily {
        match self.bath.family {
            FamilyName::OneOverF => SpectralFamily::OneOverF,
            FamilyName::Flat => SpectralFamily::Flat,
            FamilyName::PowerLaw => SpectralFamily::PowerLaw(self.bath.exponent),
        }
    }

    pub fn bath_spec(&self, mode: CouplingMode) -> BathSpec {
        let gbar = self.mean_coupling();
        if gbar == 0.0 || self.bath.c == 0.0 {
            return BathSpec::off(mode);
        }
        let b = BathSpec::one_over_f(self.bath.c, gbar, mode).with_family(self.family());
        BathSpec {
            ir_cutoff: self.bath.ir_cutoff_fraction * gbar,
            temperature: mhz(self.bath.temperature_mhz),
            ..b
        }
    }

    pub fn spectrum_options(&self) -> SpectrumOptions {
        SpectrumOptions {
            truncation: Truncation {
                excitation_cap: self.sweep.excitation_cap,
                reachable_only: self.sweep.reachable_only,
            },
            secular_tol: self.sweep.secular_tol_mhz.map(mhz),
            points_per_window: self.sweep.points_per_window,
            window_span: self.sweep.window_span,
            fit_span: self.sweep.fit_span,
            check_grid: true,
        }
    }

    /// Detuning grid `Δ = ω − ε` in angular units.
    pub fn detunings(&self) -> Vec<f64> {
        let gbar = self.mean_coupling();
        let (lo, hi, n) = (
            self.sweep.detuning_min_over_g,
            self.sweep.detuning_max_over_g,
            self.sweep.detuning_steps,
        );
        (0..n)
            .map(|i| gbar * (lo + (hi - lo) * i as f64 / (n - 1) as f64))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = load(None, &[]).unwrap();
        assert_eq!(cfg, RunConfig::default());
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(load(Some(&text), &[]).unwrap(), cfg);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg = load(Some(r#"{"system": {"n_qubits": 3}}"#), &[]).unwrap();
        assert_eq!(cfg.system.n_qubits, 3);
        assert_eq!(cfg.system.kappa_mhz, 0.47);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(load(Some(r#"{"sytem": {}}"#), &[]), Err(CliError::Config(_))));
        assert!(matches!(load(Some(r#"{"system": {"kapa_mhz": 1}}"#), &[]), Err(CliError::Config(_))));
        assert!(matches!(load(None, &["system.kapa_mhz=1".into()]), Err(CliError::Config(_))));
    }

    #[test]
    fn overrides() {
        let cfg = load(
            None,
            &[
                "system.n_qubits=3".into(),
                "bath.coupling_mode=individual".into(),
                "system.n_max=null".into(),
                "sweep.n_list=[1,2]".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.system.n_qubits, 3);
        assert_eq!(cfg.bath.coupling_mode, CouplingMode::Individual);
        assert_eq!(cfg.sweep.n_list, vec![1, 2]);
        assert!(load(None, &["system".into()]).is_err());
        assert!(load(None, &["seed.x=1".into()]).is_err());
    }

    #[test]
    fn validation_errors_name_the_key() {
        let err = load(None, &["system.kappa_mhz=-1".into()]).unwrap_err();
        assert!(err.to_string().contains("system.kappa_mhz"));
        assert!(load(None, &["format_version=2".into()]).is_err());
        assert!(load(None, &["system.n_qubits=4".into()]).is_err());
        let err = load(Some("{\n  \"seed\": }"), &[]).unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn conversions() {
        let cfg = load(None, &["system.detuning_mhz=10".into()]).unwrap();
        let s = cfg.system_spec(1);
        assert!((s.cavity_freq - s.qubit_freqs[0] - mhz(10.0)).abs() < 1e-9);
        assert_eq!(s.n_max, 4);
        let b = cfg.bath_spec(CouplingMode::Individual);
        let gbar = cfg.mean_coupling();
        assert!((tcsim::bath::spectral_density(&b, gbar) - 0.0105 * gbar).abs() < 1e-12 * gbar);
        assert!((b.ir_cutoff - 1e-3 * gbar).abs() < 1e-15 * gbar);
        assert_eq!(cfg.detunings().len(), 25);
        assert!(cfg.detunings()[12].abs() < 1e-12);
    }
}
