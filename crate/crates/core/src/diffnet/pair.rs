//! Pairwise potential tables `f_{i,j}(s, t) = W[s][t]`, optionally with tied
//! diagonal/off-diagonal entries.

use crate::error::{Error, Result};

/// Parameter tying applied to a pair table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetryMode {
    /// Every entry is a free parameter; `rows * cols` values, row-major.
    None,
    /// All diagonal entries share one parameter, all off-diagonal entries
    /// another; 2 values `[diag, offdiag]`. Requires a square table.
    DiagOffdiag,
}

/// Shape and tying descriptor for one pairwise table. The free parameters
/// themselves live in a parameter-vector block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairTable {
    pub rows: usize,
    pub cols: usize,
    pub mode: SymmetryMode,
}

impl PairTable {
    pub fn new(rows: usize, cols: usize, mode: SymmetryMode) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::structure("pair table needs nonzero dimensions"));
        }
        if mode == SymmetryMode::DiagOffdiag && rows != cols {
            return Err(Error::structure(
                "diag-offdiag tying requires a square table",
            ));
        }
        Ok(PairTable { rows, cols, mode })
    }

    /// Number of free parameters.
    pub fn param_len(&self) -> usize {
        match self.mode {
            SymmetryMode::None => self.rows * self.cols,
            SymmetryMode::DiagOffdiag => 2,
        }
    }

    fn check(&self, params: &[f64], s: usize, t: usize) -> Result<()> {
        if s >= self.rows || t >= self.cols {
            return Err(Error::structure(format!(
                "pair label ({s},{t}) out of range for {}x{} table",
                self.rows, self.cols
            )));
        }
        if params.len() != self.param_len() {
            return Err(Error::structure(format!(
                "pair table expects {} parameters, got {}",
                self.param_len(),
                params.len()
            )));
        }
        Ok(())
    }

    /// `W[s][t]`.
    pub fn eval(&self, params: &[f64], s: usize, t: usize) -> Result<f64> {
        self.check(params, s, t)?;
        Ok(match self.mode {
            SymmetryMode::None => params[s * self.cols + t],
            SymmetryMode::DiagOffdiag => {
                if s == t {
                    params[0]
                } else {
                    params[1]
                }
            }
        })
    }

    /// Accumulate `cotangent * dW[s][t]/dparam` into `grad`; tied entries
    /// share their parameter's gradient.
    pub fn accumulate_grad(
        &self,
        grad: &mut [f64],
        s: usize,
        t: usize,
        cotangent: f64,
    ) -> Result<()> {
        self.check(grad, s, t)?;
        match self.mode {
            SymmetryMode::None => grad[s * self.cols + t] += cotangent,
            SymmetryMode::DiagOffdiag => {
                if s == t {
                    grad[0] += cotangent;
                } else {
                    grad[1] += cotangent;
                }
            }
        }
        Ok(())
    }

    /// Materialize the full table (row-major), mostly for inspection.
    pub fn dense(&self, params: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for s in 0..self.rows {
            for t in 0..self.cols {
                out.push(self.eval(params, s, t)?);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn untied_lookup() {
        let table = PairTable::new(2, 2, SymmetryMode::None).unwrap();
        let w = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(table.eval(&w, 0, 1).unwrap(), 2.0);
        assert_eq!(table.eval(&w, 1, 0).unwrap(), 3.0);
        assert!(table.eval(&w, 2, 0).is_err());
    }

    #[test]
    fn diag_offdiag_lookup() {
        let table = PairTable::new(2, 2, SymmetryMode::DiagOffdiag).unwrap();
        let w = [0.5, -0.25]; // diag a, offdiag b
        assert_eq!(table.eval(&w, 0, 0).unwrap(), 0.5);
        assert_eq!(table.eval(&w, 1, 1).unwrap(), 0.5);
        assert_eq!(table.eval(&w, 1, 0).unwrap(), -0.25);
        assert_eq!(table.eval(&w, 0, 1).unwrap(), -0.25);
    }

    #[test]
    fn tied_gradient_accumulates() {
        // Cotangent 1 on (0,0) and 1 on (1,1) both land on the shared diag.
        let table = PairTable::new(2, 2, SymmetryMode::DiagOffdiag).unwrap();
        let mut grad = [0.0, 0.0];
        table.accumulate_grad(&mut grad, 0, 0, 1.0).unwrap();
        table.accumulate_grad(&mut grad, 1, 1, 1.0).unwrap();
        assert_eq!(grad, [2.0, 0.0]);
    }

    #[test]
    fn tied_gradient_matches_finite_differences() {
        // Objective: g(a, b) = W[0][0] + W[1][1] + 2 W[0][1], W from ties.
        let table = PairTable::new(2, 2, SymmetryMode::DiagOffdiag).unwrap();
        let eval = |p: &[f64]| -> f64 {
            table.eval(p, 0, 0).unwrap()
                + table.eval(p, 1, 1).unwrap()
                + 2.0 * table.eval(p, 0, 1).unwrap()
        };
        let p = [0.3, -0.7];
        let mut grad = [0.0, 0.0];
        table.accumulate_grad(&mut grad, 0, 0, 1.0).unwrap();
        table.accumulate_grad(&mut grad, 1, 1, 1.0).unwrap();
        table.accumulate_grad(&mut grad, 0, 1, 2.0).unwrap();
        let h = 1e-5;
        for i in 0..2 {
            let mut plus = p;
            let mut minus = p;
            plus[i] += h;
            minus[i] -= h;
            let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
            assert!((grad[i] - fd).abs() < 1e-8, "param {i}: {} vs {}", grad[i], fd);
        }
    }

    #[test]
    fn non_square_tying_rejected() {
        assert!(PairTable::new(2, 3, SymmetryMode::DiagOffdiag).is_err());
    }
}
