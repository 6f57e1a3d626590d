//! Per-equation linear forms of the transformed power flow equations.
//!
//! At order `k >= 1` every transformed equation reads
//!
//! ```text
//! 0 = row . Y(k) + lam_coef * L(k) + constant
//! ```
//!
//! where `row` depends only on `Y(0)` and `constant` only on `Y(1..k-1)`.
//! The state layout is interleaved per internal bus: slot `2i` holds `E_i`,
//! slot `2i + 1` holds `F_i`.

use super::algebra::{delta, history};
use crate::error::{Error, Result};
use crate::load::LoadModel;
use crate::netmodel::{BusKind, EquationKind, Network};
use crate::numerics::dot;

/// `row . Y(k) + lam_coef * L(k) + constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearForm {
    pub row: Vec<f64>,
    pub lam_coef: f64,
    pub constant: f64,
}

impl LinearForm {
    pub fn constant(dim: usize, constant: f64) -> Self {
        Self {
            row: vec![0.0; dim],
            lam_coef: 0.0,
            constant,
        }
    }

    pub fn apply(&self, y_k: &[f64], lam_k: f64) -> f64 {
        dot(&self.row, y_k) + self.lam_coef * lam_k + self.constant
    }
}

#[inline]
fn e(coeffs: &[Vec<f64>], i: usize) -> impl Fn(usize) -> f64 + '_ {
    move |m| coeffs[m][2 * i]
}

#[inline]
fn f(coeffs: &[Vec<f64>], i: usize) -> impl Fn(usize) -> f64 + '_ {
    move |m| coeffs[m][2 * i + 1]
}

/// History part of `E_i (x) E_j + F_i (x) F_j` at order `k`.
pub(crate) fn c_hist(coeffs: &[Vec<f64>], i: usize, j: usize, k: usize) -> f64 {
    history(e(coeffs, i), e(coeffs, j), k) + history(f(coeffs, i), f(coeffs, j), k)
}

/// History part of `F_i (x) E_j - E_i (x) F_j` at order `k`.
pub(crate) fn d_hist(coeffs: &[Vec<f64>], i: usize, j: usize, k: usize) -> f64 {
    history(f(coeffs, i), e(coeffs, j), k) - history(e(coeffs, i), f(coeffs, j), k)
}

fn check_kind(net: &Network, i: usize, kind: EquationKind) -> Result<()> {
    if kind.applies_to(net.kind(i)) {
        Ok(())
    } else {
        Err(Error::KindMismatch {
            bus: net.bus(i).id,
            kind,
        })
    }
}

fn check_coeffs(coeffs: &[Vec<f64>], k: usize, dim: usize) -> Result<()> {
    if k == 0 || coeffs.len() < k {
        return Err(Error::OrderOutOfRange {
            order: k,
            available: coeffs.len().saturating_sub(1),
        });
    }
    match coeffs.iter().find(|c| c.len() != dim) {
        Some(c) => Err(Error::DimensionMismatch {
            expected: dim,
            got: c.len(),
        }),
        None => Ok(()),
    }
}

/// Network part of the active-power row at bus `i`.
fn network_p_row(net: &Network, i: usize, y0: &[f64]) -> Vec<f64> {
    let yb = net.ybus();
    let (ei, fi) = (y0[2 * i], y0[2 * i + 1]);
    let mut row = vec![0.0; net.dim()];
    let (mut sum_e, mut sum_f) = (0.0, 0.0);
    for j in 0..net.n() {
        let (g, b) = (yb.g(i, j), yb.b(i, j));
        let (ej, fj) = (y0[2 * j], y0[2 * j + 1]);
        sum_e += g * ej - b * fj;
        sum_f += b * ej + g * fj;
        if j != i {
            row[2 * j] = g * ei + b * fi;
            row[2 * j + 1] = g * fi - b * ei;
        }
    }
    let (gii, bii) = (yb.g(i, i), yb.b(i, i));
    row[2 * i] = sum_e + gii * ei + bii * fi;
    row[2 * i + 1] = sum_f - bii * ei + gii * fi;
    row
}

/// Network part of the reactive-power row at bus `i`.
fn network_q_row(net: &Network, i: usize, y0: &[f64]) -> Vec<f64> {
    let yb = net.ybus();
    let (ei, fi) = (y0[2 * i], y0[2 * i + 1]);
    let mut row = vec![0.0; net.dim()];
    let (mut sum_e, mut sum_f) = (0.0, 0.0);
    for j in 0..net.n() {
        let (g, b) = (yb.g(i, j), yb.b(i, j));
        let (ej, fj) = (y0[2 * j], y0[2 * j + 1]);
        sum_e += b * ej + g * fj;
        sum_f += g * ej - b * fj;
        if j != i {
            row[2 * j] = -b * ei + g * fi;
            row[2 * j + 1] = -b * fi - g * ei;
        }
    }
    let (gii, bii) = (yb.g(i, i), yb.b(i, i));
    row[2 * i] = -sum_e - bii * ei + gii * fi;
    row[2 * i + 1] = sum_f - gii * ei - bii * fi;
    row
}

/// Coefficients of `Y(k)` and `L(k)` in equation `kind` of bus `i`.
///
/// Under a load model with voltage-dependent injection, PQ rows have the
/// load's own row subtracted.
pub fn pf_row(
    net: &Network,
    model: &dyn LoadModel,
    i: usize,
    kind: EquationKind,
    y0: &[f64],
) -> Result<(Vec<f64>, f64)> {
    check_kind(net, i, kind)?;
    if y0.len() != net.dim() {
        return Err(Error::DimensionMismatch {
            expected: net.dim(),
            got: y0.len(),
        });
    }
    let pq = net.kind(i) == BusKind::PQ;
    let dir = net.direction(i);
    let base = || [y0.to_vec()];
    Ok(match kind {
        EquationKind::P => {
            let mut row = network_p_row(net, i, y0);
            if pq {
                let load = model.linear_p(net, i, &base(), 1)?;
                row.iter_mut().zip(&load.row).for_each(|(r, l)| *r -= l);
            }
            (row, -dir.dp)
        }
        EquationKind::Q => {
            let mut row = network_q_row(net, i, y0);
            let load = model.linear_q(net, i, &base(), 1)?;
            row.iter_mut().zip(&load.row).for_each(|(r, l)| *r -= l);
            (row, -dir.dq)
        }
        EquationKind::V => {
            let mut row = vec![0.0; net.dim()];
            row[2 * i] = 2.0 * y0[2 * i];
            row[2 * i + 1] = 2.0 * y0[2 * i + 1];
            (row, 0.0)
        }
        EquationKind::E => {
            let mut row = vec![0.0; net.dim()];
            row[2 * i] = 1.0;
            (row, 0.0)
        }
        EquationKind::F => {
            let mut row = vec![0.0; net.dim()];
            row[2 * i + 1] = 1.0;
            (row, 0.0)
        }
    })
}

/// Order-`k` constant of equation `kind` of bus `i`, from `Y(1..k-1)`.
pub fn pf_const(
    net: &Network,
    model: &dyn LoadModel,
    i: usize,
    kind: EquationKind,
    coeffs: &[Vec<f64>],
    k: usize,
) -> Result<f64> {
    check_kind(net, i, kind)?;
    check_coeffs(coeffs, k, net.dim())?;
    let yb = net.ybus();
    let spec = net.bus(i);
    let pq = spec.kind == BusKind::PQ;
    Ok(match kind {
        EquationKind::P => {
            let network: f64 = (0..net.n())
                .map(|j| {
                    yb.g(i, j) * c_hist(coeffs, i, j, k) + yb.b(i, j) * d_hist(coeffs, i, j, k)
                })
                .sum();
            let load = if pq {
                model.linear_p(net, i, coeffs, k)?.constant
            } else {
                spec.p * delta(k)
            };
            network - load
        }
        EquationKind::Q => {
            let network: f64 = (0..net.n())
                .map(|j| {
                    -yb.b(i, j) * c_hist(coeffs, i, j, k) + yb.g(i, j) * d_hist(coeffs, i, j, k)
                })
                .sum();
            network - model.linear_q(net, i, coeffs, k)?.constant
        }
        EquationKind::V => c_hist(coeffs, i, i, k) - spec.v * spec.v * delta(k),
        EquationKind::E => -spec.e * delta(k),
        EquationKind::F => -spec.f * delta(k),
    })
}

/// Full linear form of one equation at order `k`.
pub fn linear_form(
    net: &Network,
    model: &dyn LoadModel,
    i: usize,
    kind: EquationKind,
    coeffs: &[Vec<f64>],
    k: usize,
) -> Result<LinearForm> {
    check_coeffs(coeffs, k, net.dim())?;
    let (row, lam_coef) = pf_row(net, model, i, kind, &coeffs[0])?;
    let constant = pf_const(net, model, i, kind, coeffs, k)?;
    Ok(LinearForm {
        row,
        lam_coef,
        constant,
    })
}

/// Order-`k` transform of the ZIP active injection at PQ bus `i`.
pub fn zip_linear_p(net: &Network, i: usize, coeffs: &[Vec<f64>], k: usize) -> Result<LinearForm> {
    let z = net.zip_entry(i).ok_or(Error::NotZipBus(net.bus(i).id))?;
    check_coeffs(coeffs, k, net.dim())?;
    let (e0, f0) = (coeffs[0][2 * i], coeffs[0][2 * i + 1]);
    let gz = z.z_conductance();
    let mut form = LinearForm::constant(
        net.dim(),
        gz * c_hist(coeffs, i, i, k) + z.alpha_p * net.bus(i).p * delta(k),
    );
    form.row[2 * i] = 2.0 * e0 * gz + z.alpha_i * z.i.re;
    form.row[2 * i + 1] = 2.0 * f0 * gz + z.alpha_i * z.i.im;
    Ok(form)
}

/// Order-`k` transform of the ZIP reactive injection at PQ bus `i`.
pub fn zip_linear_q(net: &Network, i: usize, coeffs: &[Vec<f64>], k: usize) -> Result<LinearForm> {
    let z = net.zip_entry(i).ok_or(Error::NotZipBus(net.bus(i).id))?;
    check_coeffs(coeffs, k, net.dim())?;
    let (e0, f0) = (coeffs[0][2 * i], coeffs[0][2 * i + 1]);
    let bz = z.z_susceptance();
    let mut form = LinearForm::constant(
        net.dim(),
        bz * c_hist(coeffs, i, i, k) + z.beta_p * net.bus(i).q * delta(k),
    );
    form.row[2 * i] = 2.0 * e0 * bz - z.beta_i * z.i.im;
    form.row[2 * i + 1] = 2.0 * f0 * bz + z.beta_i * z.i.re;
    Ok(form)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::load::{ConstantPower, ZipLoad};
    use crate::netmodel::{parse_case, Direction, DirectionVector, ZipConfig, ZipEntry};
    use num_complex::Complex64;

    /// bus 1 REF, bus 2 PQ, bus 3 PV; internal order (2, 3, 1)
    fn net_with(zip: Option<ZipEntry>, branches: &str) -> Network {
        let case = parse_case(&format!(
            "mpc.baseMVA = 100;
mpc.bus = [1 3 0 0 0 0 1 1 0; 2 1 40 10 0 0 1 1 0; 3 2 0 0 0 0 1 1 0];
mpc.gen = [1 0 0 0 0 1 100 1; 3 30 0 0 0 1.02 100 1];
mpc.branch = [{branches}];"
        ))
        .unwrap();
        let mut zc = ZipConfig::new();
        if let Some(z) = zip {
            zc.insert(&case, 2, z).unwrap();
        }
        let mut dir = DirectionVector::new();
        dir.insert(
            &case,
            2,
            Direction {
                dp: -0.5,
                dq: -0.25,
            },
        )
        .unwrap();
        dir.insert(&case, 3, Direction { dp: 0.125, dq: 0.0 })
            .unwrap();
        Network::new(&case, &zc, &dir).unwrap()
    }

    fn net() -> Network {
        net_with(
            None,
            "1 2 0.01 0.1 0.02 0 0 0 0 0 1; 2 3 0.02 0.2 0 0 0 0 0 0 1; 1 3 0 0.25 0 0 0 0 0 0 1",
        )
    }

    #[test]
    fn v_row() {
        let n = net();
        let y0 = vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let (row, lam) = pf_row(&n, &ConstantPower, 1, EquationKind::V, &y0).unwrap();
        assert_eq!(row, vec![0.0, 0.0, 2.0, 0.0, 0.0, 0.0]);
        assert_eq!(lam, 0.0);
    }

    #[test]
    fn slack_rows_are_unit() {
        let n = net();
        let y0 = vec![0.9, 0.1, 1.0, -0.2, 1.05, 0.3];
        let (e, _) = pf_row(&n, &ConstantPower, 2, EquationKind::E, &y0).unwrap();
        let (f, _) = pf_row(&n, &ConstantPower, 2, EquationKind::F, &y0).unwrap();
        assert_eq!(e, vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(f, vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn isolated_self_admittance_row() {
        // only a bus shunt: g_ii = 1, b_ii = 0, no branches
        let case = parse_case(
            "mpc.baseMVA = 1;
mpc.bus = [1 1 0 0 1 0 1 1 0; 2 3 0 0 0 0 1 1 0];",
        )
        .unwrap();
        let n = Network::from_case(&case).unwrap();
        let y0 = vec![1.0, 0.0, 1.0, 0.0];
        let (row, _) = pf_row(&n, &ConstantPower, 0, EquationKind::P, &y0).unwrap();
        assert_eq!(row, vec![2.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn lambda_coefficients() {
        let n = net();
        let y0 = n.flat_start();
        assert_eq!(
            pf_row(&n, &ConstantPower, 0, EquationKind::P, &y0)
                .unwrap()
                .1,
            0.5
        );
        assert_eq!(
            pf_row(&n, &ConstantPower, 0, EquationKind::Q, &y0)
                .unwrap()
                .1,
            0.25
        );
        assert_eq!(
            pf_row(&n, &ConstantPower, 1, EquationKind::P, &y0)
                .unwrap()
                .1,
            -0.125
        );
    }

    #[test]
    fn kind_mismatch() {
        let n = net();
        let y0 = n.flat_start();
        assert!(matches!(
            pf_row(&n, &ConstantPower, 1, EquationKind::Q, &y0),
            Err(Error::KindMismatch {
                bus: 3,
                kind: EquationKind::Q
            })
        ));
        assert!(pf_row(&n, &ConstantPower, 2, EquationKind::P, &y0).is_err());
        assert!(pf_const(&n, &ConstantPower, 0, EquationKind::V, &[y0], 1).is_err());
    }

    #[test]
    fn degenerate_zip_row_matches() {
        let n = net_with(
            Some(ZipEntry::CONSTANT_POWER),
            "1 2 0.01 0.1 0.02 0 0 0 0 0 1; 2 3 0.02 0.2 0 0 0 0 0 0 1",
        );
        let y0 = vec![0.97, -0.05, 1.01, 0.02, 1.0, 0.0];
        for kind in [EquationKind::P, EquationKind::Q] {
            assert_eq!(
                pf_row(&n, &ZipLoad, 0, kind, &y0).unwrap(),
                pf_row(&n, &ConstantPower, 0, kind, &y0).unwrap()
            );
        }
    }

    #[test]
    fn zero_history_gives_zero_constants() {
        let n = net();
        let mut coeffs = vec![vec![0.98, -0.03, 1.02, 0.01, 1.0, 0.0]];
        coeffs.extend((1..4).map(|_| vec![0.0; 6]));
        for k in 1..=4 {
            for i in 0..3 {
                for kind in n.kind(i).equations() {
                    assert_eq!(
                        pf_const(&n, &ConstantPower, i, kind, &coeffs, k).unwrap(),
                        0.0
                    );
                }
            }
        }
    }

    #[test]
    fn v_constant_at_first_order_is_zero() {
        let n = net();
        let coeffs = vec![vec![0.5, 0.7, -3.0, 2.0, 1.0, 0.0]];
        assert_eq!(
            pf_const(&n, &ConstantPower, 1, EquationKind::V, &coeffs, 1).unwrap(),
            0.0
        );
    }

    #[test]
    fn order_zero_rejected() {
        let n = net();
        assert!(matches!(
            pf_const(&n, &ConstantPower, 0, EquationKind::P, &[n.flat_start()], 0),
            Err(Error::OrderOutOfRange { .. })
        ));
        assert!(matches!(
            pf_const(&n, &ConstantPower, 0, EquationKind::P, &[n.flat_start()], 3),
            Err(Error::OrderOutOfRange { order: 3, .. })
        ));
    }

    #[test]
    fn zip_pure_power_form() {
        let n = net_with(Some(ZipEntry::CONSTANT_POWER), "1 2 0 0.1 0 0 0 0 0 0 1");
        let coeffs = vec![
            vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0],
            vec![0.3, 0.1, 0.0, 0.0, 0.0, 0.0],
        ];
        let p = zip_linear_p(&n, 0, &coeffs, 2).unwrap();
        assert!(p.row.iter().all(|&r| r == 0.0));
        assert_eq!(p.constant, 0.0);
        let q = zip_linear_q(&n, 0, &coeffs, 2).unwrap();
        assert!(q.row.iter().all(|&r| r == 0.0));
        assert_eq!(q.constant, 0.0);
    }

    #[test]
    fn zip_impedance_form() {
        let z = ZipEntry {
            alpha_z: 1.0,
            alpha_p: 0.0,
            z: Complex64::new(1.0, 0.0),
            ..ZipEntry::CONSTANT_POWER
        };
        let n = net_with(Some(z), "1 2 0 0.1 0 0 0 0 0 0 1");
        let coeffs = vec![vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0]];
        let p = zip_linear_p(&n, 0, &coeffs, 1).unwrap();
        assert_eq!(
            (p.row[0], p.row[1], p.constant, p.lam_coef),
            (2.0, 0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn zip_current_form() {
        let z = ZipEntry {
            beta_i: 1.0,
            beta_p: 0.0,
            i: Complex64::new(1.0, 0.0),
            ..ZipEntry::CONSTANT_POWER
        };
        let n = net_with(Some(z), "1 2 0 0.1 0 0 0 0 0 0 1");
        let coeffs = vec![
            vec![0.9, 0.2, 1.0, 0.0, 1.0, 0.0],
            vec![0.1, 0.4, 0.0, 0.0, 0.0, 0.0],
        ];
        let q = zip_linear_q(&n, 0, &coeffs, 2).unwrap();
        assert_eq!((q.row[0], q.row[1], q.constant), (0.0, 1.0, 0.0));
    }

    #[test]
    fn zip_on_non_pq() {
        let n = net();
        assert_eq!(
            zip_linear_p(&n, 1, &[n.flat_start()], 1),
            Err(Error::NotZipBus(3))
        );
    }
}
