use super::system::{assemble_system, rhs_at_order};
use crate::error::{Error, Result};
use crate::evaluator::mismatch;
use crate::load::LoadModel;
use crate::netmodel::Network;
use crate::numerics::norm_inf;

pub const DEFAULT_ORDER: usize = 30;

/// Largest base-point mismatch accepted by [`expand`].
pub const BASE_TOLERANCE: f64 = 1e-10;

/// Pivots below this fraction of `||A_gy||_inf` mean the expansion point is
/// singular.
pub const PIVOT_RELATIVE: f64 = 1e-10;

/// Taylor coefficients of the voltages in `lambda - lambda0`.
///
/// `L(0) = lambda0`, `L(1) = 1` and `L(k) = 0` above, i.e. the loading
/// parameter itself is the expansion variable.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSolution {
    lambda0: f64,
    coeffs: Vec<Vec<f64>>,
    lam: Vec<f64>,
    min_pivot: f64,
}

impl SeriesSolution {
    /// Builds a series from raw coefficients (`lam` is derived from `lambda0`).
    pub fn from_coeffs(lambda0: f64, coeffs: Vec<Vec<f64>>) -> Self {
        let lam = lambda_series(lambda0, coeffs.len().saturating_sub(1));
        Self {
            lambda0,
            coeffs,
            lam,
            min_pivot: f64::NAN,
        }
    }

    /// Highest order `K`.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn coeffs(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> &[f64] {
        &self.coeffs[k]
    }

    pub fn lam(&self) -> &[f64] {
        &self.lam
    }

    /// Smallest LU pivot of the order system at the expansion point.
    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }
}

pub(crate) fn lambda_series(lambda0: f64, order: usize) -> Vec<f64> {
    (0..=order)
        .map(|k| match k {
            0 => lambda0,
            1 => 1.0,
            _ => 0.0,
        })
        .collect()
}

/// Expands the power flow solution about `(y0, lambda0)` through order `order`.
///
/// `y0` must solve the power flow at `lambda0`. One factorization of `A_gy`
/// serves every order.
pub fn expand(
    net: &Network,
    model: &dyn LoadModel,
    y0: &[f64],
    lambda0: f64,
    order: usize,
) -> Result<SeriesSolution> {
    expand_with_tolerance(net, model, y0, lambda0, order, BASE_TOLERANCE)
}

pub(crate) fn expand_with_tolerance(
    net: &Network,
    model: &dyn LoadModel,
    y0: &[f64],
    lambda0: f64,
    order: usize,
    base_tol: f64,
) -> Result<SeriesSolution> {
    if order == 0 {
        return Err(Error::OrderOutOfRange {
            order: 0,
            available: 0,
        });
    }
    if y0.len() != net.dim() {
        return Err(Error::DimensionMismatch {
            expected: net.dim(),
            got: y0.len(),
        });
    }
    let residual = norm_inf(&mismatch(net, model, y0, lambda0));
    if !(residual <= base_tol) {
        return Err(Error::BaseNotConverged { residual });
    }

    let sys = assemble_system(net, model, y0)?;
    let threshold = PIVOT_RELATIVE * sys.a_gy.norm_inf();
    let solver = sys.factor(threshold).map_err(|e| match e {
        Error::SingularMatrix { pivot, .. } => Error::SingularAtExpansionPoint { pivot },
        other => other,
    })?;

    let lam = lambda_series(lambda0, order);
    let mut coeffs = Vec::with_capacity(order + 1);
    coeffs.push(y0.to_vec());
    for (k, lam_k) in lam.iter().enumerate().skip(1) {
        let b = rhs_at_order(net, model, &coeffs, k)?;
        let rhs: Vec<f64> = b
            .iter()
            .zip(&sys.a_glam)
            .map(|(bk, al)| -al * lam_k - bk)
            .collect();
        coeffs.push(solver.solve(&rhs)?);
    }

    Ok(SeriesSolution {
        lambda0,
        coeffs,
        lam,
        min_pivot: solver.min_pivot(),
    })
}
