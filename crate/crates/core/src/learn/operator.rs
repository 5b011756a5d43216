use nalgebra::{DMatrix, SymmetricEigen};

use crate::encode::QuantumState;
use crate::error::{Error, Result};

/// Real symmetric n×n measurement operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator(DMatrix<f64>);

impl Operator {
    pub fn identity(n: usize) -> Self {
        Operator(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        Operator(DMatrix::zeros(n, n))
    }

    /// Rank-1 projector |p⟩⟨p|.
    pub fn projector(p: &QuantumState) -> Self {
        let a = p.amplitudes();
        let n = a.len();
        Operator(DMatrix::from_fn(n, n, |i, j| a[i] * a[j]))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: bad.len(),
            });
        }
        Ok(Operator(DMatrix::from_fn(n, n, |i, j| rows[i][j])))
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.0.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// Tr(self · other).
    pub fn trace_product(&self, other: &Operator) -> Result<f64> {
        self.same_dim(other)?;
        Ok(self.0.component_mul(&other.0.transpose()).sum())
    }

    pub fn checked_sub(&self, other: &Operator) -> Result<Operator> {
        self.same_dim(other)?;
        Ok(Operator(&self.0 - &other.0))
    }

    pub fn checked_add(&self, other: &Operator) -> Result<Operator> {
        self.same_dim(other)?;
        Ok(Operator(&self.0 + &other.0))
    }

    pub fn max_abs_diff(&self, other: &Operator) -> Result<f64> {
        self.same_dim(other)?;
        Ok((&self.0 - &other.0).amax())
    }

    pub fn symmetry_error(&self) -> f64 {
        (&self.0 - self.0.transpose()).amax()
    }

    /// ‖P² − P‖_max.
    pub fn idempotence_error(&self) -> f64 {
        (&self.0 * &self.0 - &self.0).amax()
    }

    /// ⟨ψ|P|ψ⟩.
    pub fn expectation(&self, state: &QuantumState) -> Result<f64> {
        if state.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: state.dim(),
            });
        }
        let psi = state.amplitudes();
        let m = &self.0;
        let mut acc = 0.0;
        for (i, &pi) in psi.iter().enumerate() {
            let row: f64 = psi.iter().enumerate().map(|(j, &pj)| m[(i, j)] * pj).sum();
            acc += pi * row;
        }
        Ok(acc)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let sym = (&self.0 + self.0.transpose()) * 0.5;
        let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// Conjugate by a channel permutation: `new[i][j] = old[perm[i]][perm[j]]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.dim();
        Operator(DMatrix::from_fn(n, n, |i, j| self.0[(perm[i], perm[j])]))
    }

    fn same_dim(&self, other: &Operator) -> Result<()> {
        if self.dim() == other.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            })
        }
    }
}
