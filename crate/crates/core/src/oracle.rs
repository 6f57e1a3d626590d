//! Reference computations used to check the series solver.
//!
//! [`direct_transform`] evaluates the transformed equations by raw Cauchy
//! products, with no linear split, so it shares no code with the linear forms
//! in [`crate::dt`]. [`newton_solve`] is a plain damped Newton iteration on
//! the mismatch map and [`fd_jacobian`] a central-difference Jacobian.

use serde::Serialize;

use crate::dt::{assemble_system, delta};
use crate::error::{Error, Result};
use crate::evaluator::mismatch;
use crate::load::LoadModel;
use crate::netmodel::{BusKind, EquationKind, Network};
use crate::numerics::{norm_inf, DenseMatrix};

pub const NEWTON_TOLERANCE: f64 = 1e-10;
pub const NEWTON_MAX_ITER: usize = 50;
const MAX_HALVINGS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NewtonReport {
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub y: Vec<f64>,
}

/// Damped Newton iteration on the mismatch at fixed `lambda`.
///
/// Halves the step up to six times while the residual does not decrease.
/// Failure to converge is reported, not raised.
pub fn newton_solve(
    net: &Network,
    model: &dyn LoadModel,
    lambda: f64,
    y_init: &[f64],
) -> NewtonReport {
    let mut y = y_init.to_vec();
    let mut res = norm_inf(&mismatch(net, model, &y, lambda));
    let mut iterations = 0;

    while !(res <= NEWTON_TOLERANCE) && iterations < NEWTON_MAX_ITER && res.is_finite() {
        let f = mismatch(net, model, &y, lambda);
        let Ok(sys) = assemble_system(net, model, &y) else {
            break;
        };
        let Ok(solver) = sys.factor(0.0) else {
            break;
        };
        let neg_f: Vec<f64> = f.iter().map(|v| -v).collect();
        let Ok(dx) = solver.solve(&neg_f) else {
            break;
        };
        iterations += 1;

        let mut t = 1.0;
        let mut trial;
        let mut trial_res;
        let mut halvings = 0;
        loop {
            trial = y
                .iter()
                .zip(&dx)
                .map(|(a, d)| a + t * d)
                .collect::<Vec<_>>();
            trial_res = norm_inf(&mismatch(net, model, &trial, lambda));
            if trial_res < res || halvings == MAX_HALVINGS {
                break;
            }
            t *= 0.5;
            halvings += 1;
        }
        y = trial;
        res = trial_res;
    }

    NewtonReport {
        converged: res <= NEWTON_TOLERANCE,
        iterations,
        residual: res,
        y,
    }
}

/// Central-difference Jacobian of the mismatch map.
pub fn fd_jacobian(
    net: &Network,
    model: &dyn LoadModel,
    y: &[f64],
    lambda: f64,
    h: f64,
) -> DenseMatrix {
    let dim = net.dim();
    let mut jac = DenseMatrix::zeros(dim, dim);
    let mut probe = y.to_vec();
    for col in 0..dim {
        probe[col] = y[col] + h;
        let plus = mismatch(net, model, &probe, lambda);
        probe[col] = y[col] - h;
        let minus = mismatch(net, model, &probe, lambda);
        probe[col] = y[col];
        for row in 0..dim {
            jac[(row, col)] = (plus[row] - minus[row]) / (2.0 * h);
        }
    }
    jac
}

/// Which transformed quantity [`direct_transform`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum TransformKind {
    P,
    Q,
    V,
    E,
    F,
    /// Transform of the ZIP active injection alone.
    Pzip,
    /// Transform of the ZIP reactive injection alone.
    Qzip,
}

impl TransformKind {
    pub const ALL: [TransformKind; 7] = [
        TransformKind::P,
        TransformKind::Q,
        TransformKind::V,
        TransformKind::E,
        TransformKind::F,
        TransformKind::Pzip,
        TransformKind::Qzip,
    ];

    pub fn label(self) -> &'static str {
        match self {
            TransformKind::P => "P",
            TransformKind::Q => "Q",
            TransformKind::V => "V",
            TransformKind::E => "E",
            TransformKind::F => "F",
            TransformKind::Pzip => "Pzip",
            TransformKind::Qzip => "Qzip",
        }
    }
}

impl From<EquationKind> for TransformKind {
    fn from(k: EquationKind) -> Self {
        match k {
            EquationKind::P => TransformKind::P,
            EquationKind::Q => TransformKind::Q,
            EquationKind::V => TransformKind::V,
            EquationKind::E => TransformKind::E,
            EquationKind::F => TransformKind::F,
        }
    }
}

/// Full Cauchy product of two scalar series at order `k`.
fn cauchy(x: impl Fn(usize) -> f64, y: impl Fn(usize) -> f64, k: usize) -> f64 {
    let mut s = 0.0;
    for m in 0..=k {
        s += x(m) * y(k - m);
    }
    s
}

/// Evaluates the order-`k` transformed equation (right-hand side minus
/// left-hand side) or, for `Pzip`/`Qzip`, the order-`k` transform of the load
/// injection, using every coefficient through order `k`.
pub fn direct_transform(
    net: &Network,
    model: &dyn LoadModel,
    i: usize,
    kind: TransformKind,
    coeffs: &[Vec<f64>],
    lam: &[f64],
    k: usize,
) -> Result<f64> {
    if coeffs.len() <= k || lam.len() <= k {
        return Err(Error::OrderOutOfRange {
            order: k,
            available: coeffs.len().min(lam.len()).saturating_sub(1),
        });
    }
    let spec = net.bus(i);
    let applies = match kind {
        TransformKind::P => spec.kind != BusKind::REF,
        TransformKind::Q | TransformKind::Pzip | TransformKind::Qzip => spec.kind == BusKind::PQ,
        TransformKind::V => spec.kind == BusKind::PV,
        TransformKind::E | TransformKind::F => spec.kind == BusKind::REF,
    };
    if !applies {
        return Err(match kind {
            TransformKind::Pzip | TransformKind::Qzip => Error::NotZipBus(spec.id),
            TransformKind::P => Error::KindMismatch {
                bus: spec.id,
                kind: EquationKind::P,
            },
            TransformKind::Q => Error::KindMismatch {
                bus: spec.id,
                kind: EquationKind::Q,
            },
            TransformKind::V => Error::KindMismatch {
                bus: spec.id,
                kind: EquationKind::V,
            },
            TransformKind::E => Error::KindMismatch {
                bus: spec.id,
                kind: EquationKind::E,
            },
            TransformKind::F => Error::KindMismatch {
                bus: spec.id,
                kind: EquationKind::F,
            },
        });
    }

    let e = |b: usize| move |m: usize| coeffs[m][2 * b];
    let f = |b: usize| move |m: usize| coeffs[m][2 * b + 1];
    let yb = net.ybus();
    let dir = net.direction(i);

    // Transforms of the load injections at a PQ bus, straight from the ZIP
    // parameters the model represents.
    let load_p = || {
        let z = model.zip_entry(net, i);
        let vv = cauchy(e(i), e(i), k) + cauchy(f(i), f(i), k);
        let zp = if z.alpha_z == 0.0 {
            0.0
        } else {
            z.alpha_z * z.z.re / z.z.norm_sqr()
        };
        zp * vv + z.alpha_i * (e(i)(k) * z.i.re + f(i)(k) * z.i.im) + z.alpha_p * spec.p * delta(k)
    };
    let load_q = || {
        let z = model.zip_entry(net, i);
        let vv = cauchy(e(i), e(i), k) + cauchy(f(i), f(i), k);
        let zq = if z.beta_z == 0.0 {
            0.0
        } else {
            z.beta_z * z.z.im / z.z.norm_sqr()
        };
        zq * vv + z.beta_i * (f(i)(k) * z.i.re - e(i)(k) * z.i.im) + z.beta_p * spec.q * delta(k)
    };

    Ok(match kind {
        TransformKind::P => {
            let mut s = -dir.dp * lam[k];
            for j in 0..net.n() {
                let (g, b) = (yb.g(i, j), yb.b(i, j));
                s += g * (cauchy(e(i), e(j), k) + cauchy(f(i), f(j), k));
                s += b * (cauchy(f(i), e(j), k) - cauchy(e(i), f(j), k));
            }
            let lhs = if spec.kind == BusKind::PQ {
                load_p()
            } else {
                spec.p * delta(k)
            };
            s - lhs
        }
        TransformKind::Q => {
            let mut s = -dir.dq * lam[k];
            for j in 0..net.n() {
                let (g, b) = (yb.g(i, j), yb.b(i, j));
                s -= b * (cauchy(e(i), e(j), k) + cauchy(f(i), f(j), k));
                s += g * (cauchy(f(i), e(j), k) - cauchy(e(i), f(j), k));
            }
            s - load_q()
        }
        TransformKind::V => {
            cauchy(e(i), e(i), k) + cauchy(f(i), f(i), k) - spec.v * spec.v * delta(k)
        }
        TransformKind::E => e(i)(k) - spec.e * delta(k),
        TransformKind::F => f(i)(k) - spec.f * delta(k),
        TransformKind::Pzip => load_p(),
        TransformKind::Qzip => load_q(),
    })
}

/// Result of bracketing the nose point by Newton convergence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoseBracket {
    /// Largest loading at which Newton converged.
    pub lower: f64,
    /// Smallest loading at which Newton failed.
    pub upper: f64,
    /// Converged state at `lower`.
    pub y: Vec<f64>,
}

impl NoseBracket {
    pub fn estimate(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

/// Brackets the largest loading with a power flow solution by bisection on
/// Newton convergence, warm-starting each trial from the last converged
/// state below it.
///
/// `y_start` must be a solution at `lambda_start`. The search first steps
/// forward by `step` until Newton fails (up to `lambda_limit`), then bisects
/// until the bracket is narrower than `tol`. Returns `None` if no failure is
/// found below `lambda_limit`.
pub fn bracket_nose(
    net: &Network,
    model: &dyn LoadModel,
    lambda_start: f64,
    y_start: &[f64],
    step: f64,
    lambda_limit: f64,
    tol: f64,
) -> Option<NoseBracket> {
    let mut lo = lambda_start;
    let mut y_lo = y_start.to_vec();
    let mut hi = None;
    let mut h = step;

    while hi.is_none() {
        let trial = lo + h;
        if trial > lambda_limit {
            return None;
        }
        let rep = newton_solve(net, model, trial, &y_lo);
        if rep.converged && converged_nearby(&rep.y, &y_lo) {
            lo = trial;
            y_lo = rep.y;
        } else {
            hi = Some(trial);
        }
        h = step;
    }
    let mut hi = hi.unwrap();

    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let rep = newton_solve(net, model, mid, &y_lo);
        if rep.converged && converged_nearby(&rep.y, &y_lo) {
            lo = mid;
            y_lo = rep.y;
        } else {
            hi = mid;
        }
    }
    Some(NoseBracket {
        lower: lo,
        upper: hi,
        y: y_lo,
    })
}

// Rejects jumps onto a different solution branch.
fn converged_nearby(y: &[f64], prev: &[f64]) -> bool {
    y.iter().zip(prev).all(|(a, b)| (a - b).abs() < 0.5)
}
