//! Operators on the tensor product of one truncated bosonic mode and `N`
//! two-level systems.
//!
//! Site ordering is fixed: the cavity factor comes first, followed by qubits
//! `1..=N`. Within a qubit factor the excited state has index 0, so
//! `σ^z = diag(1, -1)`. Everything that needs a many-body operator goes
//! through [`embed`]; nothing else builds Kronecker orders by hand.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Dense complex square matrix.
pub type Operator = DMatrix<C64>;

pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub(crate) const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub(crate) fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Tensor-product layout: one oscillator truncated at `n_max` photons, then
/// `n_qubits` qubits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceLayout {
    pub n_qubits: usize,
    pub n_max: usize,
}

/// A tensor factor of a [`SpaceLayout`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Site {
    Cavity,
    /// Zero-based qubit index.
    Qubit(usize),
}

impl SpaceLayout {
    pub fn new(n_qubits: usize, n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::InvalidArgument("n_max must be at least 1".into()));
        }
        Ok(Self { n_qubits, n_max })
    }

    pub fn cavity_dim(&self) -> usize {
        self.n_max + 1
    }

    pub fn dim(&self) -> usize {
        self.cavity_dim() << self.n_qubits
    }

    fn factor_dims(&self) -> Vec<usize> {
        std::iter::once(self.cavity_dim())
            .chain(std::iter::repeat_n(2, self.n_qubits))
            .collect()
    }

    fn factor_index(&self, site: Site) -> Result<usize> {
        match site {
            Site::Cavity => Ok(0),
            Site::Qubit(q) if q < self.n_qubits => Ok(q + 1),
            Site::Qubit(q) => Err(Error::SiteOutOfRange {
                site: q,
                sites: self.n_qubits,
            }),
        }
    }

    /// Photon number and qubit excitation flags of a product-basis index.
    pub fn decompose(&self, index: usize) -> (usize, Vec<bool>) {
        let mut rest = index;
        let mut excited = vec![false; self.n_qubits];
        for q in (0..self.n_qubits).rev() {
            excited[q] = rest.is_multiple_of(2);
            rest /= 2;
        }
        (rest, excited)
    }

    /// Product-basis index of the vacuum with every qubit in its ground state.
    pub fn vacuum_index(&self) -> usize {
        (1 << self.n_qubits) - 1
    }
}

/// Lowering operator `a` on `n_max + 1` Fock states.
pub fn boson_annihilator(n_max: usize) -> Result<Operator> {
    if n_max < 1 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    let dim = n_max + 1;
    let mut a = Operator::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = re((n as f64).sqrt());
    }
    Ok(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PauliAxis {
    X,
    Y,
    Z,
    Plus,
    Minus,
}

pub fn pauli(axis: PauliAxis) -> Operator {
    let m = match axis {
        PauliAxis::X => [[ZERO, ONE], [ONE, ZERO]],
        PauliAxis::Y => [[ZERO, -I], [I, ZERO]],
        PauliAxis::Z => [[ONE, ZERO], [ZERO, -ONE]],
        // |e><g| with |e> at index 0
        PauliAxis::Plus => [[ZERO, ONE], [ZERO, ZERO]],
        PauliAxis::Minus => [[ZERO, ZERO], [ONE, ZERO]],
    };
    Operator::from_fn(2, 2, |r, c| m[r][c])
}

pub fn kron(a: &Operator, b: &Operator) -> Operator {
    a.kronecker(b)
}

/// `1 ⊗ … ⊗ op ⊗ … ⊗ 1` with `op` acting on `site`.
pub fn embed(op: &Operator, site: Site, layout: &SpaceLayout) -> Result<Operator> {
    let target = layout.factor_index(site)?;
    let dims = layout.factor_dims();
    if !op.is_square() || op.nrows() != dims[target] {
        return Err(Error::DimensionMismatch {
            expected: dims[target],
            actual: op.nrows(),
        });
    }
    let left: usize = dims[..target].iter().product();
    let right: usize = dims[target + 1..].iter().product();
    let out = kron(&Operator::identity(left, left), op);
    Ok(kron(&out, &Operator::identity(right, right)))
}

pub fn dagger(m: &Operator) -> Operator {
    m.adjoint()
}

pub fn commutator(a: &Operator, b: &Operator) -> Operator {
    a * b - b * a
}

pub fn max_abs(m: &Operator) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `max |M - M†|`.
pub fn hermiticity_deviation(m: &Operator) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for r in 0..n {
        for c in r..n {
            dev = dev.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    dev
}

/// Hermitian up to `1e-12 · max|M|`.
pub fn is_hermitian(m: &Operator) -> bool {
    m.is_square() && hermiticity_deviation(m) <= 1e-12 * max_abs(m).max(f64::MIN_POSITIVE)
}
