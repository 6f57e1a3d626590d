//! Nonlinear power flow residuals and series post-processing.

use crate::dt::SeriesSolution;
use crate::error::{Error, Result};
use crate::load::LoadModel;
use crate::netmodel::{BusKind, Network};
use crate::numerics::norm_inf;

/// Evaluates `sum_k Y(k) (lambda - lambda0)^k` by Horner's rule.
pub fn eval_series(s: &SeriesSolution, lambda: f64) -> Vec<f64> {
    let t = lambda - s.lambda0();
    let mut acc = s.coeff(s.order()).to_vec();
    for k in (0..s.order()).rev() {
        for (a, c) in acc.iter_mut().zip(s.coeff(k)) {
            *a = *a * t + c;
        }
    }
    acc
}

/// ZIP injection `(p, q)` at PQ bus `i` for voltage `e + jf`.
pub fn zip_injection(net: &Network, i: usize, e: f64, f: f64) -> Result<(f64, f64)> {
    let z = net.zip_entry(i).ok_or(Error::NotZipBus(net.bus(i).id))?;
    let spec = net.bus(i);
    let v2 = e * e + f * f;
    let p = z.z_conductance() * v2 + z.alpha_i * (e * z.i.re + f * z.i.im) + z.alpha_p * spec.p;
    let q = z.z_susceptance() * v2 + z.beta_i * (f * z.i.re - e * z.i.im) + z.beta_p * spec.q;
    Ok((p, q))
}

/// Network injection `(p, q)` at bus `i`: `V_i conj(sum_j Y_ij V_j)`.
pub fn network_injection(net: &Network, y: &[f64], i: usize) -> (f64, f64) {
    let yb = net.ybus();
    let (mut ir, mut ii) = (0.0, 0.0);
    for j in 0..net.n() {
        let (g, b) = (yb.g(i, j), yb.b(i, j));
        let (ej, fj) = (y[2 * j], y[2 * j + 1]);
        ir += g * ej - b * fj;
        ii += b * ej + g * fj;
    }
    let (ei, fi) = (y[2 * i], y[2 * i + 1]);
    (ei * ir + fi * ii, fi * ir - ei * ii)
}

/// Right-hand side minus left-hand side of every power flow equation, in
/// system row order. Zero exactly at a solution for `lambda`.
pub fn mismatch(net: &Network, model: &dyn LoadModel, y: &[f64], lambda: f64) -> Vec<f64> {
    assert_eq!(y.len(), net.dim(), "state vector length");
    let mut out = vec![0.0; net.dim()];
    for i in 0..net.n() {
        let spec = net.bus(i);
        let dir = net.direction(i);
        let (ei, fi) = (y[2 * i], y[2 * i + 1]);
        let (r0, r1) = match spec.kind {
            BusKind::PQ => {
                let (p, q) = network_injection(net, y, i);
                let (pl, ql) = model.injection(net, i, ei, fi);
                (p - lambda * dir.dp - pl, q - lambda * dir.dq - ql)
            }
            BusKind::PV => {
                let (p, _) = network_injection(net, y, i);
                (
                    p - lambda * dir.dp - spec.p,
                    ei * ei + fi * fi - spec.v * spec.v,
                )
            }
            BusKind::REF => (ei - spec.e, fi - spec.f),
        };
        out[2 * i] = r0;
        out[2 * i + 1] = r1;
    }
    out
}

pub fn residual_norm(net: &Network, model: &dyn LoadModel, y: &[f64], lambda: f64) -> f64 {
    norm_inf(&mismatch(net, model, y, lambda))
}

const RADIUS_TAIL: usize = 6;
const NEGLIGIBLE: f64 = 1e-14;

/// Ratio estimate of the series' radius of convergence (heuristic).
///
/// Median of `||Y(k-1)|| / ||Y(k)||` over the last six orders; infinite when
/// the tail coefficients are negligible.
pub fn radius_estimate(s: &SeriesSolution) -> Result<f64> {
    let k_max = s.order();
    if k_max < RADIUS_TAIL {
        return Err(Error::OrderTooLow {
            order: k_max,
            min: RADIUS_TAIL,
        });
    }
    let norms: Vec<f64> = (0..=k_max).map(|k| norm_inf(s.coeff(k))).collect();
    if norms[k_max + 1 - RADIUS_TAIL..]
        .iter()
        .all(|&n| n < NEGLIGIBLE)
    {
        return Ok(f64::INFINITY);
    }
    let mut ratios: Vec<f64> = (k_max + 1 - RADIUS_TAIL..=k_max)
        .map(|k| {
            if norms[k] < NEGLIGIBLE {
                f64::INFINITY
            } else {
                norms[k - 1] / norms[k]
            }
        })
        .collect();
    ratios.sort_by(f64::total_cmp);
    let mid = RADIUS_TAIL / 2;
    Ok(0.5 * (ratios[mid - 1] + ratios[mid]))
}
