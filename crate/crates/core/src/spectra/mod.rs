//! Weak-probe transmission spectra and linewidth extraction.
//!
//! A [`TransmissionModel`] diagonalises the undriven Hamiltonian once, builds
//! the dressed dissipators from that eigenbasis, and reuses both for every
//! probe frequency. Peak positions and expected widths come from the
//! single-excitation eigenstates that carry photon weight.

pub mod experiments;
pub mod fit;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bath::BathSpec;
use crate::dissipators::{cavity_decay, dressed_dephasing, DissipatorSet};
use crate::error::{Error, Result};
use crate::hilbert::{dagger, re, C64};
use crate::model::{build_hamiltonian, diagonalize_conserving, excitation_operator, EigenBasis, ModelOperators, SystemSpec};
use crate::steadystate::{DriveSpec, DrivenSystem, Physicality, Truncation};

pub use experiments::{
    estimate_bath_exponent, linewidth_vs_detuning, linewidth_vs_n, measure_peak,
    measured_naive_decay_rate, naive_linewidth, DetuningRow, DetuningTable, ExponentEstimate,
    LinewidthRow, PeakWidth,
};
pub use fit::{fit_lorentzian_samples, halfmax_width, FitResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOptions {
    pub truncation: Truncation,
    /// Grouping tolerance for dressed jumps; `None` uses the default.
    pub secular_tol: Option<f64>,
    pub points_per_window: usize,
    /// Sweep window span in units of the expected peak width.
    pub window_span: f64,
    /// Span of the central part of the window used for the Lorentzian fit.
    pub fit_span: f64,
    pub check_grid: bool,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            truncation: Truncation::default(),
            secular_tol: None,
            points_per_window: 401,
            window_span: 12.0,
            fit_span: 8.0,
            check_grid: true,
        }
    }
}

/// A single-excitation eigenstate visible in transmission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakPrediction {
    pub eigen_index: usize,
    /// Lab-frame probe frequency of the resonance, `E_α − E_0`.
    pub frequency: f64,
    /// `2√3·⟨α|Σ L†L|α⟩`, the amplitude FWHM of an isolated pole.
    pub expected_fwhm: f64,
    pub photon_weight: f64,
}

/// Default probe amplitude `η = κ/1000`.
pub fn default_drive_amplitude(kappa: f64) -> f64 {
    kappa / 1000.0
}

/// Photon weights below this mark an eigenstate as dark.
pub const DARK_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub probe_freqs: Vec<f64>,
    /// `|⟨a⟩|` at each probe frequency.
    pub amplitude: Vec<f64>,
    pub drive_amplitude: f64,
    pub system: SystemSpec,
    pub bath: BathSpec,
    /// Worst case over all solves.
    pub physicality: Physicality,
    /// `| 2|⟨a⟩(η/2)| / |⟨a⟩(η)| − 1 |` at the spectrum maximum.
    pub linearity_error: f64,
}

impl SpectrumResult {
    /// Amplitude in units of `η/κ`.
    pub fn normalized_amplitude(&self) -> Vec<f64> {
        let scale = self.system.kappa / self.drive_amplitude;
        self.amplitude.iter().map(|a| a * scale).collect()
    }

    /// Samples with `lo ≤ ν ≤ hi`.
    pub fn window(&self, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
        self.probe_freqs
            .iter()
            .zip(&self.amplitude)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .map(|(f, a)| (*f, *a))
            .unzip()
    }

    pub fn argmax(&self) -> Option<usize> {
        self.amplitude
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
    }
}

/// Fit the samples of `s` that fall in `window`.
pub fn fit_lorentzian(s: &SpectrumResult, window: (f64, f64)) -> Result<FitResult> {
    let (x, y) = s.window(window.0, window.1);
    fit_lorentzian_samples(&x, &y)
}

/// One-shot spectrum with default options.
pub fn transmission_spectrum(
    spec: &SystemSpec,
    bath: &BathSpec,
    drive_amplitude: f64,
    grid: &[f64],
) -> Result<SpectrumResult> {
    TransmissionModel::new(spec, bath, SpectrumOptions::default())?.spectrum(drive_amplitude, grid)
}

#[derive(Debug, Clone)]
pub struct TransmissionModel {
    spec: SystemSpec,
    bath: BathSpec,
    options: SpectrumOptions,
    eigen: EigenBasis,
    dissipators: DissipatorSet,
    system: DrivenSystem,
    peaks: Vec<PeakPrediction>,
}

impl TransmissionModel {
    pub fn new(spec: &SystemSpec, bath: &BathSpec, options: SpectrumOptions) -> Result<Self> {
        spec.validate()?;
        bath.validate()?;
        let layout = spec.layout()?;
        let h = build_hamiltonian(spec, &layout)?;
        let n = excitation_operator(spec, &layout)?;
        let eigen = diagonalize_conserving(&h, &n)?;
        let dissipators =
            dressed_dephasing(&eigen, bath, &layout, options.secular_tol)?.merge(cavity_decay(spec, &layout)?)?;
        let system = DrivenSystem::new(spec, &layout, &dissipators, options.truncation)?;

        let ground = eigen
            .lowest_with_excitation(0)
            .ok_or_else(|| Error::InvalidArgument("no vacuum state".into()))?;
        let a = ModelOperators::new(&layout)?.a;
        let one_photon = dagger(&a) * eigen.vectors.column(ground);
        let loss = dissipators
            .matrices()
            .fold(crate::hilbert::Operator::zeros(layout.dim(), layout.dim()), |acc, l| {
                acc + dagger(l) * l
            });
        let peaks = eigen
            .manifold(1)
            .into_iter()
            .filter_map(|i| {
                let v = eigen.vectors.column(i);
                let photon_weight = v.dotc(&one_photon).norm_sqr();
                let gamma = v.dotc(&(&loss * v)).re;
                (photon_weight > DARK_THRESHOLD).then(|| PeakPrediction {
                    eigen_index: i,
                    frequency: eigen.energies[i] - eigen.energies[ground],
                    expected_fwhm: 2.0 * 3f64.sqrt() * gamma,
                    photon_weight,
                })
            })
            .collect();
        Ok(Self {
            spec: spec.clone(),
            bath: *bath,
            options,
            eigen,
            dissipators,
            system,
            peaks,
        })
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn bath(&self) -> &BathSpec {
        &self.bath
    }

    pub fn options(&self) -> &SpectrumOptions {
        &self.options
    }

    pub fn eigenbasis(&self) -> &EigenBasis {
        &self.eigen
    }

    pub fn dissipators(&self) -> &DissipatorSet {
        &self.dissipators
    }

    pub fn system(&self) -> &DrivenSystem {
        &self.system
    }

    /// Bright single-excitation resonances, ascending in frequency.
    pub fn peaks(&self) -> &[PeakPrediction] {
        &self.peaks
    }

    /// Allowed probe range `ω ± (3√N·ḡ + max|εᵢ − ω| + 25κ)`.
    pub fn frequency_range(&self) -> (f64, f64) {
        let s = &self.spec;
        let n = s.n_qubits() as f64;
        let detuning = s
            .qubit_freqs
            .iter()
            .fold(0.0f64, |m, e| m.max((e - s.cavity_freq).abs()));
        let half = 3.0 * n.sqrt() * s.mean_coupling() + detuning + 25.0 * s.kappa;
        (s.cavity_freq - half, s.cavity_freq + half)
    }

    /// Evenly spaced window around a predicted peak.
    pub fn window(&self, peak: &PeakPrediction) -> Result<Vec<f64>> {
        let w = peak.expected_fwhm;
        let n = self.options.points_per_window;
        if !(w > 0.0) || n < 5 {
            return Err(Error::Grid(format!(
                "cannot build a window for a peak of width {w} with {n} points"
            )));
        }
        let half = 0.5 * self.options.window_span * w;
        Ok((0..n)
            .map(|i| peak.frequency - half + 2.0 * half * i as f64 / (n - 1) as f64)
            .collect())
    }

    /// Every peak window plus `background` evenly spaced points covering the
    /// rest of the allowed range.
    pub fn default_grid(&self, background: usize) -> Result<Vec<f64>> {
        let (lo, hi) = self.frequency_range();
        let mut grid = Vec::new();
        let mut excluded = Vec::new();
        for p in &self.peaks {
            let w = self.window(p)?;
            excluded.push((w[0], w[w.len() - 1]));
            grid.extend(w);
        }
        if background >= 2 {
            grid.extend(
                (0..background)
                    .map(|i| lo + (hi - lo) * i as f64 / (background - 1) as f64)
                    .filter(|f| !excluded.iter().any(|(a, b)| f >= a && f <= b)),
            );
        }
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        Ok(grid)
    }

    /// Range guard and resolution guard (spacing ≤ expected width / 8 within
    /// one expected width of every predicted peak).
    pub fn check_grid(&self, grid: &[f64]) -> Result<()> {
        if grid.is_empty() {
            return Err(Error::Grid("empty grid".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Grid("grid must be strictly increasing".into()));
        }
        let (lo, hi) = self.frequency_range();
        if grid[0] < lo || grid[grid.len() - 1] > hi {
            return Err(Error::Grid(format!(
                "grid [{}, {}] leaves the allowed range [{lo}, {hi}]",
                grid[0],
                grid[grid.len() - 1]
            )));
        }
        for p in &self.peaks {
            let w = p.expected_fwhm;
            let (a, b) = (p.frequency - w, p.frequency + w);
            for pair in grid.windows(2) {
                if pair[1] >= a && pair[0] <= b && pair[1] - pair[0] > w / 8.0 {
                    return Err(Error::Grid(format!(
                        "spacing {} near the peak at {} exceeds width/8 = {}",
                        pair[1] - pair[0],
                        p.frequency,
                        w / 8.0
                    )));
                }
            }
        }
        Ok(())
    }

    /// Steady-state `⟨a⟩` at one probe frequency.
    pub fn field(&self, drive_amplitude: f64, frequency: f64) -> Result<(C64, Physicality)> {
        let drive = DriveSpec {
            amplitude: drive_amplitude,
            frequency,
        };
        let wrap = |e: Error| Error::AtDriveFrequency {
            freq: frequency,
            source: Box::new(e),
        };
        let rho = self.system.solve(&drive).map_err(wrap)?;
        let field = self.system.cavity_field(&rho).map_err(wrap)?;
        Ok((field, rho.physicality()))
    }

    pub fn spectrum(&self, drive_amplitude: f64, grid: &[f64]) -> Result<SpectrumResult> {
        if !(drive_amplitude > 0.0 && drive_amplitude.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "drive amplitude must be positive, got {drive_amplitude}"
            )));
        }
        if self.options.check_grid {
            self.check_grid(grid)?;
        } else if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.is_empty() {
            return Err(Error::Grid("grid must be non-empty and strictly increasing".into()));
        }
        let solved: Vec<(C64, Physicality)> = grid
            .par_iter()
            .map(|&f| self.field(drive_amplitude, f))
            .collect::<Result<_>>()?;
        let amplitude: Vec<f64> = solved.iter().map(|(z, _)| z.norm()).collect();
        let physicality = solved
            .iter()
            .fold(Physicality::IDEAL, |acc, (_, p)| acc.worst(*p));
        let mut result = SpectrumResult {
            probe_freqs: grid.to_vec(),
            amplitude,
            drive_amplitude,
            system: self.spec.clone(),
            bath: self.bath,
            physicality,
            linearity_error: 0.0,
        };
        let peak = result.argmax().map(|i| grid[i]).unwrap_or(grid[0]);
        result.linearity_error = self.linearity_error(drive_amplitude, &[peak])?;
        Ok(result)
    }

    /// Largest relative deviation from `⟨a⟩(η/2) = ⟨a⟩(η)/2` over `freqs`.
    pub fn linearity_error(&self, drive_amplitude: f64, freqs: &[f64]) -> Result<f64> {
        let mut worst = 0.0f64;
        for &f in freqs {
            let (full, _) = self.field(drive_amplitude, f)?;
            let (half, _) = self.field(0.5 * drive_amplitude, f)?;
            if full.norm() == 0.0 {
                continue;
            }
            worst = worst.max((half * re(2.0) - full).norm() / full.norm());
        }
        Ok(worst)
    }
}
