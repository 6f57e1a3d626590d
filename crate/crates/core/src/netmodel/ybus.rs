use num_complex::Complex64;

use super::CaseData;
use crate::error::{Error, Result};

/// Dense complex bus admittance matrix, entries `g_ij + j b_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl AdmittanceMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn g(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j].re
    }

    #[inline]
    pub fn b(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j].im
    }

    pub fn add(&mut self, i: usize, j: usize, y: Complex64) {
        self.data[i * self.n + j] += y;
    }

    /// Re-indexes rows and columns: entry `(a, b)` of the result is entry
    /// `(order[a], order[b])` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut out = Self::zeros(self.n);
        for (a, &oa) in order.iter().enumerate() {
            for (b, &ob) in order.iter().enumerate() {
                out.data[a * self.n + b] = self.get(oa, ob);
            }
        }
        out
    }

    pub fn row_sum(&self, i: usize) -> Complex64 {
        self.data[i * self.n..(i + 1) * self.n].iter().sum()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn max_abs_diff(&self, other: &AdmittanceMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Stamps every in-service branch (pi model with tap and phase shift on the
/// from side) plus bus shunts. Indices follow the case's bus order.
pub fn build_ybus(case: &CaseData) -> Result<AdmittanceMatrix> {
    let n = case.n_buses();
    let mut y = AdmittanceMatrix::zeros(n);
    let pos = |id: usize| {
        case.bus_position(id)
            .ok_or_else(|| Error::Semantic(format!("branch references unknown bus {id}")))
    };

    for br in case.branches.iter().filter(|b| b.in_service) {
        if br.r == 0.0 && br.x == 0.0 {
            return Err(Error::DegenerateBranch {
                from: br.from,
                to: br.to,
            });
        }
        let (f, t) = (pos(br.from)?, pos(br.to)?);
        let ys = Complex64::new(1.0, 0.0) / Complex64::new(br.r, br.x);
        let half_b = Complex64::new(0.0, br.b / 2.0);
        let tau = Complex64::from_polar(br.tap(), br.shift);

        y.add(f, f, (ys + half_b) / tau.norm_sqr());
        y.add(t, t, ys + half_b);
        y.add(f, t, -ys / tau.conj());
        y.add(t, f, -ys / tau);
    }

    for (i, bus) in case.buses.iter().enumerate() {
        y.add(i, i, Complex64::new(bus.gs, bus.bs));
    }
    Ok(y)
}
