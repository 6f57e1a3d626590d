use super::forms::{pf_const, pf_row};
use crate::error::{Error, Result};
use crate::load::LoadModel;
use crate::netmodel::{BusKind, EquationKind, Network};
use crate::numerics::{lu_factor, lu_solve, DenseMatrix, Factorization};

/// The order-independent part of `0 = A_gy Y(k) + A_gl L(k) + B_g(k)`.
///
/// Rows come in pairs per internal bus: (P, Q) for PQ buses, (P, V) for PV
/// buses and (E, F) for the reference bus, which is last.
#[derive(Debug, Clone)]
pub struct OrderSystem {
    pub a_gy: DenseMatrix,
    pub a_glam: Vec<f64>,
    kinds: Vec<BusKind>,
}

impl OrderSystem {
    /// Row of equation `kind` at internal bus `bus`, if the bus has one.
    pub fn row_index(&self, bus: usize, kind: EquationKind) -> Option<usize> {
        let eqs = self.kinds.get(bus)?.equations();
        eqs.iter().position(|k| *k == kind).map(|p| 2 * bus + p)
    }

    /// Factors `A_gy` for repeated solves.
    ///
    /// The reference rows are unit rows, so the reference unknowns are read
    /// straight off their right-hand sides and only the remaining block is
    /// LU-factored. Pivots at or below `pivot_threshold` are reported as
    /// [`Error::SingularMatrix`].
    pub fn factor(&self, pivot_threshold: f64) -> Result<SystemSolver> {
        let dim = self.a_gy.rows();
        let fixed: Vec<usize> = self
            .kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == BusKind::REF)
            .flat_map(|(i, _)| [2 * i, 2 * i + 1])
            .collect();
        let free: Vec<usize> = (0..dim).filter(|c| !fixed.contains(c)).collect();

        let mut reduced = DenseMatrix::zeros(free.len(), free.len());
        for (a, &r) in free.iter().enumerate() {
            for (b, &c) in free.iter().enumerate() {
                reduced[(a, b)] = self.a_gy[(r, c)];
            }
        }
        let fact = lu_factor(&reduced, pivot_threshold)?;
        let min_pivot = if fixed.is_empty() {
            fact.min_pivot()
        } else {
            fact.min_pivot().min(1.0)
        };
        let coupling = free
            .iter()
            .map(|&r| fixed.iter().map(|&c| self.a_gy[(r, c)]).collect())
            .collect();
        Ok(SystemSolver {
            fact,
            free,
            fixed,
            coupling,
            min_pivot,
            dim,
        })
    }
}

/// Reusable solver for `A_gy x = rhs`.
#[derive(Debug, Clone)]
pub struct SystemSolver {
    fact: Factorization,
    free: Vec<usize>,
    fixed: Vec<usize>,
    coupling: Vec<Vec<f64>>,
    min_pivot: f64,
    dim: usize,
}

impl SystemSolver {
    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: rhs.len(),
            });
        }
        let mut x = vec![0.0; self.dim];
        for &c in &self.fixed {
            x[c] = rhs[c];
        }
        let reduced_rhs: Vec<f64> = self
            .free
            .iter()
            .zip(&self.coupling)
            .map(|(&r, cpl)| {
                let known: f64 = cpl.iter().zip(&self.fixed).map(|(a, &c)| a * x[c]).sum();
                rhs[r] - known
            })
            .collect();
        let sol = lu_solve(&self.fact, &reduced_rhs)?;
        for (&c, v) in self.free.iter().zip(sol) {
            x[c] = v;
        }
        Ok(x)
    }
}

/// Stacks every equation's row and `L(k)` coefficient at `y0`.
///
/// `A_gy` is also the Jacobian of the mismatch map at `y0`.
pub fn assemble_system(net: &Network, model: &dyn LoadModel, y0: &[f64]) -> Result<OrderSystem> {
    let dim = net.dim();
    if y0.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: y0.len(),
        });
    }
    let mut a_gy = DenseMatrix::zeros(dim, dim);
    let mut a_glam = vec![0.0; dim];
    for i in 0..net.n() {
        for (p, kind) in net.kind(i).equations().into_iter().enumerate() {
            let (row, lam) = pf_row(net, model, i, kind, y0)?;
            a_gy.row_mut(2 * i + p).copy_from_slice(&row);
            a_glam[2 * i + p] = lam;
        }
    }
    Ok(OrderSystem {
        a_gy,
        a_glam,
        kinds: net.buses().iter().map(|b| b.kind).collect(),
    })
}

/// `B_g(k)`: every equation's order-`k` constant, stacked like the rows.
pub fn rhs_at_order(
    net: &Network,
    model: &dyn LoadModel,
    coeffs: &[Vec<f64>],
    k: usize,
) -> Result<Vec<f64>> {
    let mut b = vec![0.0; net.dim()];
    for i in 0..net.n() {
        for (p, kind) in net.kind(i).equations().into_iter().enumerate() {
            b[2 * i + p] = pf_const(net, model, i, kind, coeffs, k)?;
        }
    }
    Ok(b)
}
