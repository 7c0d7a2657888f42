//! Tavis–Cummings Hamiltonian and its eigenbasis.
//!
//! `H = ω a†a + Σᵢ (εᵢ/2) σᵢᶻ + Σᵢ gᵢ (σᵢ⁺ a + a† σᵢ⁻)` in rotating-wave form,
//! so the total excitation number `a†a + Σᵢ σᵢ⁺σᵢ⁻` is conserved and every
//! eigenvector can be chosen with a definite excitation number.

use nalgebra::{DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    boson_annihilator, dagger, embed, hermiticity_deviation, is_hermitian, max_abs, pauli, re,
    Operator, PauliAxis, Site, SpaceLayout, C64,
};

pub const MAX_DIM: usize = 4096;

/// Physical parameters. All frequencies and rates are angular (rad·MHz).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub qubit_freqs: Vec<f64>,
    pub couplings: Vec<f64>,
    pub cavity_freq: f64,
    /// Cavity energy decay rate (FWHM of the empty-cavity power spectrum).
    pub kappa: f64,
    pub n_max: usize,
}

impl SystemSpec {
    /// All qubits resonant with the cavity; `n_max = N + 3`.
    pub fn resonant(couplings: &[f64], cavity_freq: f64, kappa: f64) -> Self {
        Self {
            qubit_freqs: vec![cavity_freq; couplings.len()],
            couplings: couplings.to_vec(),
            cavity_freq,
            kappa,
            n_max: couplings.len() + 3,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.couplings.len()
    }

    pub fn layout(&self) -> Result<SpaceLayout> {
        SpaceLayout::new(self.n_qubits(), self.n_max)
    }

    /// Mean single-qubit coupling ḡ; zero when there are no qubits.
    pub fn mean_coupling(&self) -> f64 {
        if self.couplings.is_empty() {
            0.0
        } else {
            self.couplings.iter().sum::<f64>() / self.couplings.len() as f64
        }
    }

    /// `√(Σ gᵢ²)`, half the resonant vacuum Rabi splitting.
    pub fn collective_coupling(&self) -> f64 {
        self.couplings.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if self.qubit_freqs.len() != self.couplings.len() {
            return bad("qubit_freqs and couplings must have the same length");
        }
        if self.n_max < 1 || self.n_max < self.n_qubits() {
            return bad("n_max must be at least max(1, N)");
        }
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return bad("kappa must be finite and non-negative");
        }
        if !self.cavity_freq.is_finite() {
            return bad("cavity frequency must be finite");
        }
        if self.couplings.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return bad("couplings must be finite and non-negative");
        }
        if self.qubit_freqs.iter().any(|e| !e.is_finite()) {
            return bad("qubit frequencies must be finite");
        }
        Ok(())
    }

    fn check_layout(&self, layout: &SpaceLayout) -> Result<()> {
        self.validate()?;
        if layout.n_qubits != self.n_qubits() || layout.n_max != self.n_max {
            return Err(Error::InvalidArgument(format!(
                "layout {layout:?} does not match spec (N={}, n_max={})",
                self.n_qubits(),
                self.n_max
            )));
        }
        if layout.dim() > MAX_DIM {
            return Err(Error::DimensionOverflow {
                dim: layout.dim(),
                limit: MAX_DIM,
            });
        }
        Ok(())
    }
}

/// Single-site operators lifted to the full space.
#[derive(Debug, Clone)]
pub struct ModelOperators {
    pub a: Operator,
    pub sigma_z: Vec<Operator>,
    pub sigma_minus: Vec<Operator>,
}

impl ModelOperators {
    pub fn new(layout: &SpaceLayout) -> Result<Self> {
        if layout.dim() > MAX_DIM {
            return Err(Error::DimensionOverflow {
                dim: layout.dim(),
                limit: MAX_DIM,
            });
        }
        let a = embed(&boson_annihilator(layout.n_max)?, Site::Cavity, layout)?;
        let mut sigma_z = Vec::with_capacity(layout.n_qubits);
        let mut sigma_minus = Vec::with_capacity(layout.n_qubits);
        for q in 0..layout.n_qubits {
            sigma_z.push(embed(&pauli(PauliAxis::Z), Site::Qubit(q), layout)?);
            sigma_minus.push(embed(&pauli(PauliAxis::Minus), Site::Qubit(q), layout)?);
        }
        Ok(Self {
            a,
            sigma_z,
            sigma_minus,
        })
    }

    pub fn collective_sigma_z(&self, dim: usize) -> Operator {
        self.sigma_z
            .iter()
            .fold(Operator::zeros(dim, dim), |acc, z| acc + z)
    }
}

pub fn build_hamiltonian(spec: &SystemSpec, layout: &SpaceLayout) -> Result<Operator> {
    spec.check_layout(layout)?;
    let ops = ModelOperators::new(layout)?;
    let a_dag = dagger(&ops.a);
    let mut h = (&a_dag * &ops.a) * re(spec.cavity_freq);
    for q in 0..spec.n_qubits() {
        h += &ops.sigma_z[q] * re(spec.qubit_freqs[q] / 2.0);
        let sp = dagger(&ops.sigma_minus[q]);
        let hop = &sp * &ops.a;
        h += (&hop + dagger(&hop)) * re(spec.couplings[q]);
    }
    Ok(h)
}

/// `N_exc = a†a + Σᵢ σᵢ⁺σᵢ⁻`, diagonal in the product basis.
pub fn excitation_operator(spec: &SystemSpec, layout: &SpaceLayout) -> Result<Operator> {
    spec.check_layout(layout)?;
    Ok(excitation_operator_for(layout))
}

pub(crate) fn excitation_operator_for(layout: &SpaceLayout) -> Operator {
    let diag = DVector::from_iterator(
        layout.dim(),
        (0..layout.dim()).map(|i| {
            let (n, excited) = layout.decompose(i);
            re((n + excited.iter().filter(|&&e| e).count()) as f64)
        }),
    );
    Operator::from_diagonal(&diag)
}

/// Eigen-decomposition `H = V diag(E) V†` with energies ascending.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    pub energies: Vec<f64>,
    /// Columns are the eigenvectors |α⟩ in the product basis.
    pub vectors: Operator,
    pub excitation: Vec<usize>,
}

impl EigenBasis {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// `V† op V`.
    pub fn to_eigen(&self, op: &Operator) -> Operator {
        self.vectors.adjoint() * op * &self.vectors
    }

    /// `V op V†`.
    pub fn to_product(&self, op: &Operator) -> Operator {
        &self.vectors * op * self.vectors.adjoint()
    }

    /// Index of the lowest state with the given excitation number.
    pub fn lowest_with_excitation(&self, n: usize) -> Option<usize> {
        self.excitation.iter().position(|&k| k == n)
    }

    /// Indices of the states in the given excitation manifold, ascending energy.
    pub fn manifold(&self, n: usize) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.excitation[i] == n).collect()
    }
}

/// Plain Hermitian diagonalisation (no conserved quantity; excitation labels are 0).
pub fn diagonalize(h: &Operator) -> Result<EigenBasis> {
    let dim = h.nrows();
    diagonalize_conserving(h, &Operator::zeros(dim, dim))
}

/// Diagonalise `h` block by block in the eigenspaces of a conserved
/// quantity that is diagonal in the working basis (normally `N_exc`).
///
/// Eigenvectors are supported exactly on one block, so degenerate levels of
/// different excitation number never mix.
pub fn diagonalize_conserving(h: &Operator, conserved: &Operator) -> Result<EigenBasis> {
    let dim = h.nrows();
    if !h.is_square() {
        return Err(Error::DimensionMismatch {
            expected: h.nrows(),
            actual: h.ncols(),
        });
    }
    if conserved.shape() != h.shape() {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: conserved.nrows(),
        });
    }
    if !is_hermitian(h) {
        return Err(Error::NotHermitian {
            deviation: hermiticity_deviation(h),
        });
    }
    let labels: Vec<f64> = (0..dim).map(|i| conserved[(i, i)].re).collect();
    let off_diag = (0..dim)
        .flat_map(|r| (0..dim).map(move |c| (r, c)))
        .any(|(r, c)| r != c && conserved[(r, c)].norm() > 0.0);
    if off_diag {
        return Err(Error::InvalidArgument(
            "conserved quantity must be diagonal in the working basis".into(),
        ));
    }
    let scale = max_abs(h).max(1.0);
    for r in 0..dim {
        for c in 0..dim {
            if labels[r] != labels[c] && h[(r, c)].norm() > 1e-12 * scale {
                return Err(Error::InvalidArgument(
                    "matrix does not conserve the supplied quantity".into(),
                ));
            }
        }
    }

    let mut values: Vec<f64> = labels.clone();
    values.sort_by(f64::total_cmp);
    values.dedup();

    let mut states: Vec<(f64, f64, DVector<C64>)> = Vec::with_capacity(dim);
    for value in values {
        let idx: Vec<usize> = (0..dim).filter(|&i| labels[i] == value).collect();
        let n = idx.len();
        let mut block = Operator::from_fn(n, n, |r, c| h[(idx[r], idx[c])]);
        let shift = (0..n).map(|i| block[(i, i)].re).sum::<f64>() / n as f64;
        for i in 0..n {
            block[(i, i)] -= re(shift);
        }
        let eig = SymmetricEigen::try_new(block, 1e-15, 10_000)
            .ok_or(Error::EigenNonConvergence)?;
        for k in 0..n {
            let mut col = DVector::from_element(dim, C64::new(0.0, 0.0));
            for (r, &i) in idx.iter().enumerate() {
                col[i] = eig.eigenvectors[(r, k)];
            }
            fix_phase(&mut col);
            states.push((eig.eigenvalues[k] + shift, value, col));
        }
    }

    states.sort_by(|a, b| a.0.total_cmp(&b.0));
    // ties (degenerate within jitter) ordered by excitation number
    let tol = 1e-10 * states.iter().map(|s| s.0.abs()).fold(1.0, f64::max);
    let mut start = 0;
    while start < states.len() {
        let mut end = start + 1;
        while end < states.len() && states[end].0 - states[end - 1].0 <= tol {
            end += 1;
        }
        states[start..end].sort_by(|a, b| a.1.total_cmp(&b.1));
        start = end;
    }

    let energies = states.iter().map(|s| s.0).collect();
    let excitation = states.iter().map(|s| s.1.round().max(0.0) as usize).collect();
    let vectors = Operator::from_columns(&states.iter().map(|s| s.2.clone()).collect::<Vec<_>>());
    Ok(EigenBasis {
        energies,
        vectors,
        excitation,
    })
}

/// Rotate so the largest-magnitude component is real and positive.
fn fix_phase(v: &mut DVector<C64>) {
    let mut best = 0;
    for i in 0..v.len() {
        if v[i].norm() > v[best].norm() + 1e-12 {
            best = i;
        }
    }
    let p = v[best];
    if p.norm() > 0.0 {
        let phase = p.conj() / p.norm();
        for z in v.iter_mut() {
            *z *= phase;
        }
    }
}
