//! Lindblad jump operators.
//!
//! The dressed dephasing channel expresses the bath coupling operator `P`
//! (`σᵢᶻ`, or `Σᵢ σᵢᶻ` for a shared bath) in the eigenbasis of the full
//! qubit–cavity Hamiltonian and keeps only energy-conserving (secular)
//! combinations. Matrix elements `P_{αβ}` are binned by their Bohr frequency
//! `δ = E_β − E_α`; each bin becomes one jump
//!
//! ```text
//! L_δ = Σ_{(α,β) ∈ bin} √Γ(δ) · P_{αβ} |α⟩⟨β|
//! ```
//!
//! which reproduces the full secular double sum over pairs of transitions at
//! equal frequency, cross terms included. All generators use
//! `D[L]ρ = 2LρL† − L†Lρ − ρL†L` with the rate folded into `L`.

use serde::{Deserialize, Serialize};

use crate::bath::{transition_rate, BathSpec, CouplingMode};
use crate::error::{Error, Result};
use crate::hilbert::{dagger, re, Operator, SpaceLayout, C64};
use crate::model::{EigenBasis, ModelOperators, SystemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    Product,
    Eigen,
    /// Orthonormal basis of a [`crate::steadystate::Subspace`].
    Reduced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    /// Dressed dephasing through the bath of one qubit.
    Qubit(usize),
    /// Dressed dephasing through the shared bath.
    Collective,
    Cavity,
    /// Fixed-rate `σᶻ` dephasing; `None` for the collective operator.
    NaiveDephasing(Option<usize>),
    /// Fixed-rate `σ⁻` relaxation; `None` for the collective operator.
    NaiveRelaxation(Option<usize>),
}

#[derive(Debug, Clone)]
pub struct JumpOperator {
    pub matrix: Operator,
    /// Energy lost by the system in one jump.
    pub transition_freq: f64,
    pub channel: Channel,
}

#[derive(Debug, Clone)]
pub struct DissipatorSet {
    pub jumps: Vec<JumpOperator>,
    pub basis: Basis,
    pub secular_tol: f64,
}

impl DissipatorSet {
    pub fn empty(basis: Basis) -> Self {
        Self {
            jumps: Vec::new(),
            basis,
            secular_tol: 0.0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.jumps.is_empty()
    }

    pub fn len(&self) -> usize {
        self.jumps.len()
    }

    pub fn matrices(&self) -> impl Iterator<Item = &Operator> {
        self.jumps.iter().map(|j| &j.matrix)
    }

    /// Concatenate sets expressed in the same basis.
    pub fn merge(mut self, other: DissipatorSet) -> Result<Self> {
        if self.basis != other.basis {
            return Err(Error::BasisMismatch(format!(
                "cannot merge {:?} and {:?} dissipators",
                self.basis, other.basis
            )));
        }
        self.secular_tol = self.secular_tol.max(other.secular_tol);
        self.jumps.extend(other.jumps);
        Ok(self)
    }
}

/// Default grouping tolerance: `1e-6 · max|E_α|`.
pub fn default_secular_tol(eigen: &EigenBasis) -> f64 {
    1e-6 * eigen.energies.iter().fold(0.0f64, |m, e| m.max(e.abs()))
}

/// Secular dephasing jumps built in the eigenbasis of `eigen` and returned in
/// the product basis. `secular_tol = None` uses [`default_secular_tol`].
pub fn dressed_dephasing(
    eigen: &EigenBasis,
    bath: &BathSpec,
    layout: &SpaceLayout,
    secular_tol: Option<f64>,
) -> Result<DissipatorSet> {
    bath.validate()?;
    let dim = layout.dim();
    if eigen.dim() != dim || eigen.vectors.nrows() != dim {
        return Err(Error::BasisMismatch(format!(
            "eigenbasis has dimension {} but layout has {dim}",
            eigen.dim()
        )));
    }
    let tol = secular_tol.unwrap_or_else(|| default_secular_tol(eigen));
    let mut set = DissipatorSet {
        jumps: Vec::new(),
        basis: Basis::Product,
        secular_tol: tol,
    };
    if bath.is_off() || layout.n_qubits == 0 {
        return Ok(set);
    }

    let ops = ModelOperators::new(layout)?;
    let couplers: Vec<(Channel, Operator)> = match bath.coupling_mode {
        CouplingMode::Individual => ops
            .sigma_z
            .iter()
            .enumerate()
            .map(|(i, z)| (Channel::Qubit(i), z.clone()))
            .collect(),
        CouplingMode::Collective => vec![(Channel::Collective, ops.collective_sigma_z(dim))],
    };

    for (channel, p) in couplers {
        let pe = eigen.to_eigen(&p);
        for (delta, members) in frequency_groups(eigen, &pe, tol) {
            let rate = transition_rate(bath, delta);
            if !rate.is_finite() {
                return Err(Error::NonFiniteRate { freq: delta });
            }
            if rate == 0.0 {
                continue;
            }
            let amp = re(rate.sqrt());
            let mut m = Operator::zeros(dim, dim);
            for (alpha, beta) in members {
                m[(alpha, beta)] = pe[(alpha, beta)] * amp;
            }
            set.jumps.push(JumpOperator {
                matrix: eigen.to_product(&m),
                transition_freq: delta,
                channel,
            });
        }
    }
    Ok(set)
}

/// Bin the non-zero elements of `pe` (an operator in the eigenbasis) by
/// Bohr frequency `E_β − E_α`. Bins are anchored at their lowest member and
/// span at most `tol`; the representative frequency is the bin mean. Pairs
/// within `tol` of zero frequency are dropped (`Γ(0) = 0`).
fn frequency_groups(
    eigen: &EigenBasis,
    pe: &Operator,
    tol: f64,
) -> Vec<(f64, Vec<(usize, usize)>)> {
    let dim = eigen.dim();
    let scale = pe.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for alpha in 0..dim {
        for beta in 0..dim {
            if pe[(alpha, beta)].norm() > 1e-12 * scale {
                let delta = eigen.energies[beta] - eigen.energies[alpha];
                if delta.abs() > tol {
                    pairs.push((delta, alpha, beta));
                }
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut groups = Vec::new();
    let mut i = 0;
    while i < pairs.len() {
        let start = pairs[i].0;
        let mut j = i;
        while j < pairs.len() && pairs[j].0 - start <= tol {
            j += 1;
        }
        let mean = pairs[i..j].iter().map(|p| p.0).sum::<f64>() / (j - i) as f64;
        groups.push((mean, pairs[i..j].iter().map(|p| (p.1, p.2)).collect()));
        i = j;
    }
    groups
}

/// `L = √(κ/2)·a`, so the empty driven cavity has amplitude half-width κ/2.
pub fn cavity_decay(spec: &SystemSpec, layout: &SpaceLayout) -> Result<DissipatorSet> {
    spec.validate()?;
    let mut set = DissipatorSet::empty(Basis::Product);
    if spec.kappa == 0.0 {
        return Ok(set);
    }
    let ops = ModelOperators::new(layout)?;
    set.jumps.push(JumpOperator {
        matrix: ops.a * re((spec.kappa / 2.0).sqrt()),
        transition_freq: spec.cavity_freq,
        channel: Channel::Cavity,
    });
    Ok(set)
}

/// Fixed-rate channels `(γ∥/2)D[σᶻ] + (γ⊥/2)D[σ⁻]` per qubit, or on the
/// collective operators `Σσᶻ`, `Σσ⁻`.
pub fn naive_fixed_rate(
    gamma_par: f64,
    gamma_perp: f64,
    mode: CouplingMode,
    layout: &SpaceLayout,
) -> Result<DissipatorSet> {
    if !(gamma_par >= 0.0 && gamma_perp >= 0.0) {
        return Err(Error::InvalidArgument("rates must be non-negative".into()));
    }
    let mut set = DissipatorSet::empty(Basis::Product);
    if layout.n_qubits == 0 {
        return Ok(set);
    }
    let dim = layout.dim();
    let ops = ModelOperators::new(layout)?;
    let par = re((gamma_par / 2.0).sqrt());
    let perp = re((gamma_perp / 2.0).sqrt());
    let mut push = |m: Operator, channel| {
        set.jumps.push(JumpOperator {
            matrix: m,
            transition_freq: 0.0,
            channel,
        })
    };
    match mode {
        CouplingMode::Individual => {
            for q in 0..layout.n_qubits {
                if gamma_par > 0.0 {
                    push(&ops.sigma_z[q] * par, Channel::NaiveDephasing(Some(q)));
                }
                if gamma_perp > 0.0 {
                    push(&ops.sigma_minus[q] * perp, Channel::NaiveRelaxation(Some(q)));
                }
            }
        }
        CouplingMode::Collective => {
            if gamma_par > 0.0 {
                push(ops.collective_sigma_z(dim) * par, Channel::NaiveDephasing(None));
            }
            if gamma_perp > 0.0 {
                let sm = ops
                    .sigma_minus
                    .iter()
                    .fold(Operator::zeros(dim, dim), |acc, s| acc + s);
                push(sm * perp, Channel::NaiveRelaxation(None));
            }
        }
    }
    Ok(set)
}

/// Reference for the grouped generator: the secular sum over all eigenstate
/// quadruples with per-transition rates, evaluated term by term.
///
/// Cost grows as `D⁶`; meant for checking small instances.
pub fn secular_sum_reference(
    eig: &EigenBasis,
    p: &Operator,
    bath: &BathSpec,
    tol: f64,
    rho: &Operator,
) -> Operator {
    let n = eig.dim();
    let pe = eig.to_eigen(p);
    let rho_e = eig.to_eigen(rho);
    let e = &eig.energies;
    let ket_bra = |i: usize, j: usize| {
        let mut m = Operator::zeros(n, n);
        m[(i, j)] = C64::new(1.0, 0.0);
        m
    };
    let r = |g: usize, d: usize| {
        let rate = if (e[d] - e[g]).abs() <= tol {
            0.0
        } else {
            transition_rate(bath, e[d] - e[g])
        };
        ket_bra(g, d) * (pe[(g, d)] * rate.sqrt())
    };
    let mut out = Operator::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            for g in 0..n {
                for d in 0..n {
                    if ((e[a] - e[b]) - (e[d] - e[g])).abs() > tol {
                        continue;
                    }
                    let r1 = r(g, d);
                    let r2d = r(b, a).adjoint();
                    out += (&r1 * &rho_e * &r2d) * re(2.0)
                        - &r2d * &r1 * &rho_e
                        - &rho_e * &r2d * &r1;
                }
            }
        }
    }
    eig.to_product(&out)
}

/// `Σ_L (2LρL† − L†Lρ − ρL†L)`.
pub fn apply_dissipators<'a>(
    jumps: impl IntoIterator<Item = &'a Operator>,
    rho: &Operator,
) -> Operator {
    let mut out = Operator::zeros(rho.nrows(), rho.ncols());
    for l in jumps {
        let ld = dagger(l);
        let ldl = &ld * l;
        out += (l * rho * &ld) * re(2.0) - &ldl * rho - rho * &ldl;
    }
    out
}
