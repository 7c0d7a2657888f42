//! Linewidth tables: versus qubit number, versus detuning, the fixed-rate
//! reference model, and a bath-exponent estimate.

use serde::{Deserialize, Serialize};

use super::fit::{fit_lorentzian_samples, halfmax_width, FitResult};
use super::{PeakPrediction, SpectrumOptions, TransmissionModel};
use crate::bath::{BathSpec, CouplingMode};
use crate::dissipators::naive_fixed_rate;
use crate::error::{Error, Result};
use crate::hilbert::{dagger, re, Operator, SpaceLayout, C64};
use crate::model::{ModelOperators, SystemSpec};
use crate::steadystate::{evolve, expectation, liouvillian_from_jumps, DensityMatrix, Physicality};
use crate::dissipators::Basis;

/// Fitted and directly measured width of one resonance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakWidth {
    pub predicted: PeakPrediction,
    pub fit: FitResult,
    pub halfmax: f64,
    /// Largest sample in the window.
    pub max_amplitude: f64,
    pub linearity_error: f64,
    pub physicality: Physicality,
}

/// Sweep the default window around `peak` and extract its width.
pub fn measure_peak(
    model: &TransmissionModel,
    drive_amplitude: f64,
    peak: &PeakPrediction,
) -> Result<PeakWidth> {
    let grid = model.window(peak)?;
    let s = model.spectrum(drive_amplitude, &grid)?;
    let half = 0.5 * model.options().fit_span * peak.expected_fwhm;
    let (x, y) = s.window(peak.frequency - half, peak.frequency + half);
    let fit = fit_lorentzian_samples(&x, &y)?;
    let halfmax = halfmax_width(&s.probe_freqs, &s.amplitude)?;
    let max_amplitude = s.amplitude.iter().copied().fold(0.0, f64::max);
    Ok(PeakWidth {
        predicted: *peak,
        fit,
        halfmax,
        max_amplitude,
        linearity_error: s.linearity_error,
        physicality: s.physicality,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinewidthRow {
    pub n: usize,
    pub mode: CouplingMode,
    pub lower: PeakWidth,
    pub upper: PeakWidth,
    /// Mean of the two fitted FWHMs.
    pub fwhm_mean: f64,
    /// Mean of the two half-maximum widths.
    pub halfmax_mean: f64,
}

fn outer_peaks(model: &TransmissionModel) -> Result<(PeakPrediction, PeakPrediction)> {
    match model.peaks() {
        [first, .., last] => Ok((*first, *last)),
        _ => Err(Error::InvalidArgument(format!(
            "expected two bright resonances, found {}",
            model.peaks().len()
        ))),
    }
}

/// Resonant linewidths for each `N` in `n_list`, using the first `N`
/// couplings of `template`. The bath is used as given for every `N`.
pub fn linewidth_vs_n(
    template: &SystemSpec,
    bath: &BathSpec,
    n_list: &[usize],
    drive_amplitude: f64,
    options: SpectrumOptions,
) -> Result<Vec<LinewidthRow>> {
    n_list
        .iter()
        .map(|&n| {
            if n == 0 || n > template.couplings.len() {
                return Err(Error::InvalidArgument(format!(
                    "N = {n} outside 1..={}",
                    template.couplings.len()
                )));
            }
            let spec = SystemSpec::resonant(&template.couplings[..n], template.cavity_freq, template.kappa);
            let model = TransmissionModel::new(&spec, bath, options)?;
            let (lo, hi) = outer_peaks(&model)?;
            let lower = measure_peak(&model, drive_amplitude, &lo)?;
            let upper = measure_peak(&model, drive_amplitude, &hi)?;
            Ok(LinewidthRow {
                n,
                mode: bath.coupling_mode,
                lower,
                upper,
                fwhm_mean: 0.5 * (lower.fit.fwhm + upper.fit.fwhm),
                halfmax_mean: 0.5 * (lower.halfmax + upper.halfmax),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetuningRow {
    /// Resonator–qubit detuning `Δ = ω − ε`.
    pub delta: f64,
    pub lower: Option<PeakWidth>,
    pub upper: Option<PeakWidth>,
    /// Fitted widths relative to the `Δ = 0` row.
    pub normalized_lower: Option<f64>,
    pub normalized_upper: Option<f64>,
    /// `E_upper − E_lower`.
    pub rabi_gap: f64,
    /// `|⟨lower|P|upper⟩|²` for the bath coupling operator `P`.
    pub coupling_element: f64,
    /// Set when either peak could not be resolved.
    pub partial: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetuningTable {
    pub rows: Vec<DetuningRow>,
    pub reference_lower: f64,
    pub reference_upper: f64,
}

/// Peaks lower than this many times the solver noise floor are unresolved.
const NOISE_FACTOR: f64 = 10.0;

fn try_measure(model: &TransmissionModel, eta: f64, peak: &PeakPrediction) -> Result<Option<PeakWidth>> {
    let floor = 1e-9 * eta / model.spec().kappa.max(f64::MIN_POSITIVE);
    match measure_peak(model, eta, peak) {
        Ok(p) if p.fit.converged && p.max_amplitude > NOISE_FACTOR * floor => Ok(Some(p)),
        Ok(_) | Err(Error::NoPeak { .. }) | Err(Error::Grid(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn detuned(spec: &SystemSpec, delta: f64) -> SystemSpec {
    SystemSpec {
        qubit_freqs: vec![spec.cavity_freq - delta],
        ..spec.clone()
    }
}

/// Single-qubit linewidths versus detuning `Δ = ω − ε`.
///
/// The two single-excitation eigenstates never cross, so labelling them by
/// energy order follows each branch continuously through the scan.
pub fn linewidth_vs_detuning(
    spec: &SystemSpec,
    bath: &BathSpec,
    deltas: &[f64],
    drive_amplitude: f64,
    options: SpectrumOptions,
) -> Result<DetuningTable> {
    if spec.n_qubits() != 1 {
        return Err(Error::InvalidArgument(format!(
            "detuning scans need exactly one qubit, got {}",
            spec.n_qubits()
        )));
    }
    let reference = TransmissionModel::new(&detuned(spec, 0.0), bath, options)?;
    let (lo, hi) = outer_peaks(&reference)?;
    let reference_lower = measure_peak(&reference, drive_amplitude, &lo)?.fit.fwhm;
    let reference_upper = measure_peak(&reference, drive_amplitude, &hi)?.fit.fwhm;

    let rows = deltas
        .iter()
        .map(|&delta| {
            let s = detuned(spec, delta);
            let model = TransmissionModel::new(&s, bath, options)?;
            let (lo, hi) = outer_peaks(&model)?;
            let lower = try_measure(&model, drive_amplitude, &lo)?;
            let upper = try_measure(&model, drive_amplitude, &hi)?;
            let eig = model.eigenbasis();
            let layout = s.layout()?;
            let ops = ModelOperators::new(&layout)?;
            let p = match bath.coupling_mode {
                CouplingMode::Individual => ops.sigma_z[0].clone(),
                CouplingMode::Collective => ops.collective_sigma_z(layout.dim()),
            };
            let (vl, vu) = (eig.vectors.column(lo.eigen_index), eig.vectors.column(hi.eigen_index));
            let coupling_element = vl.dotc(&(&p * vu)).norm_sqr();
            Ok(DetuningRow {
                delta,
                lower,
                upper,
                normalized_lower: lower.map(|p| p.fit.fwhm / reference_lower),
                normalized_upper: upper.map(|p| p.fit.fwhm / reference_upper),
                rabi_gap: hi.frequency - lo.frequency,
                coupling_element,
                partial: lower.is_none() || upper.is_none(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DetuningTable {
        rows,
        reference_lower,
        reference_upper,
    })
}

/// Slope of `log(excess width)` against `log(Rabi gap)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentEstimate {
    pub exponent: f64,
    /// Two standard errors of the slope.
    pub confidence: f64,
    pub intercept: f64,
    pub rows_used: usize,
}

/// Estimate the exponent `p` of `J(ν) ∝ ν^p` from a detuning scan and a
/// matching bath-off scan.
///
/// At zero temperature only the upper resonance is broadened by the bath,
/// through the downward transition at the Rabi gap. Its excess width over the
/// bath-off value, divided by `|⟨lower|P|upper⟩|²`, is proportional to
/// `J(gap)`.
pub fn estimate_bath_exponent(table: &DetuningTable, floor: &DetuningTable) -> Result<ExponentEstimate> {
    if table.rows.len() != floor.rows.len() {
        return Err(Error::DimensionMismatch {
            expected: table.rows.len(),
            actual: floor.rows.len(),
        });
    }
    let mut pts = Vec::new();
    for (r, f) in table.rows.iter().zip(&floor.rows) {
        if (r.delta - f.delta).abs() > 1e-9 * r.delta.abs().max(1.0) {
            return Err(Error::InvalidArgument("detuning grids differ".into()));
        }
        if let (Some(u), Some(fu)) = (r.upper, f.upper) {
            let excess = u.fit.fwhm - fu.fit.fwhm;
            if excess > 0.0 && r.coupling_element > 1e-6 && r.rabi_gap > 0.0 {
                pts.push((r.rabi_gap.ln(), (excess / r.coupling_element).ln()));
            }
        }
    }
    let n = pts.len();
    if n < 5 {
        return Err(Error::InsufficientRows { needed: 5, got: n });
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidArgument("Rabi gaps do not vary across the scan".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let se = (rss / (nf - 2.0) / sxx).sqrt();
    Ok(ExponentEstimate {
        exponent: slope,
        confidence: 2.0 * se,
        intercept,
        rows_used: n,
    })
}

/// Decay rate of `⟨Σσ⁻⟩` under fixed-rate dephasing `γ∥` and relaxation `γ⊥`.
pub fn naive_linewidth(gamma_par: f64, gamma_perp: f64, n: usize, mode: CouplingMode) -> f64 {
    match mode {
        CouplingMode::Individual => 2.0 * gamma_par + gamma_perp / 2.0,
        CouplingMode::Collective => 2.0 * gamma_par + n as f64 * gamma_perp / 2.0,
    }
}

/// Time-domain measurement of the same rate: evolve a weakly excited
/// symmetric state under the fixed-rate channels alone and fit the
/// exponential decay of `|⟨Σσ⁻⟩|`.
pub fn measured_naive_decay_rate(
    gamma_par: f64,
    gamma_perp: f64,
    n: usize,
    mode: CouplingMode,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one qubit".into()));
    }
    let layout = SpaceLayout::new(n, 1)?;
    let dim = layout.dim();
    let set = naive_fixed_rate(gamma_par, gamma_perp, mode, &layout)?;
    let l = liouvillian_from_jumps(&Operator::zeros(dim, dim), set.matrices())?;
    let ops = ModelOperators::new(&layout)?;
    let sm = ops.sigma_minus.iter().fold(Operator::zeros(dim, dim), |acc, s| acc + s);

    let mut psi = nalgebra::DVector::from_element(dim, C64::new(0.0, 0.0));
    psi[layout.vacuum_index()] = re(1.0);
    let w = dagger(&sm) * &psi / re((n as f64).sqrt());
    let psi = psi + w * re(0.01);
    let mut rho = DensityMatrix::pure(&psi, Basis::Product);

    let expected = naive_linewidth(gamma_par, gamma_perp, n, mode);
    if !(expected > 0.0) {
        return Ok(0.0);
    }
    let samples = 20;
    let t_step = 2.0 / expected / samples as f64;
    let dt = 0.1 / l.norm_inf();
    let mut pts = Vec::with_capacity(samples + 1);
    for k in 0..=samples {
        if k > 0 {
            rho = evolve(&rho, &l, t_step, dt.min(t_step))?;
        }
        let v = expectation(&rho, &sm)?.norm();
        pts.push((k as f64 * t_step, v.ln()));
    }
    let nf = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(-sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::mhz;

    #[test]
    fn naive_formula_examples() {
        assert_eq!(naive_linewidth(0.3, 0.8, 1, CouplingMode::Individual), 1.0);
        assert_eq!(naive_linewidth(0.3, 0.8, 1, CouplingMode::Collective), 1.0);
        assert_eq!(naive_linewidth(0.0, 0.8, 4, CouplingMode::Collective), 1.6);
        assert_eq!(naive_linewidth(0.0, 0.8, 4, CouplingMode::Individual), 0.4);
    }

    #[test]
    fn naive_rate_time_domain() {
        for (n, mode) in [(1, CouplingMode::Individual), (2, CouplingMode::Collective)] {
            let got = measured_naive_decay_rate(0.2, 0.5, n, mode).unwrap();
            let want = naive_linewidth(0.2, 0.5, n, mode);
            assert!((got - want).abs() < 0.01 * want, "{got} vs {want}");
        }
    }

    #[test]
    fn exponent_needs_rows() {
        let t = DetuningTable { rows: vec![], reference_lower: 1.0, reference_upper: 1.0 };
        assert!(matches!(estimate_bath_exponent(&t, &t), Err(Error::InsufficientRows { .. })));
    }

    #[test]
    fn linewidth_vs_n_rejects_bad_n() {
        let spec = SystemSpec::resonant(&[mhz(52.7)], mhz(7023.5), mhz(0.47));
        let bath = BathSpec::off(CouplingMode::Individual);
        assert!(linewidth_vs_n(&spec, &bath, &[0], 1e-3, SpectrumOptions::default()).is_err());
        assert!(linewidth_vs_n(&spec, &bath, &[2], 1e-3, SpectrumOptions::default()).is_err());
    }

    #[test]
    fn detuning_requires_one_qubit() {
        let spec = SystemSpec::resonant(&[mhz(52.7), mhz(55.4)], mhz(7023.5), mhz(0.47));
        let bath = BathSpec::off(CouplingMode::Individual);
        assert!(linewidth_vs_detuning(&spec, &bath, &[0.0], 1e-3, SpectrumOptions::default()).is_err());
    }
}
