//! Load models: how a PQ bus's injection depends on its own voltage.
//!
//! Each model is a strategy behind [`LoadModel`] and is looked up by name in
//! a [`ModelRegistry`]. Two are built in:
//!
//! * `const-power`: injection fixed at the specified `p + jq`;
//! * `zip`: weighted mix of constant impedance, current and power, with
//!   parameters from the network's ZIP configuration.
//!
//! PV and reference buses never consult a load model.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::dt::{self, LinearForm};
use crate::error::{Error, Result};
use crate::evaluator;
use crate::netmodel::{Network, ZipEntry};

pub trait LoadModel: Send + Sync {
    /// Registry key, also used in reports.
    fn name(&self) -> &'static str;

    /// ZIP parameters equivalent to this model at PQ bus `i`.
    fn zip_entry(&self, net: &Network, i: usize) -> ZipEntry;

    /// Active and reactive injection at PQ bus `i` for voltage `e + jf`.
    fn injection(&self, net: &Network, i: usize, e: f64, f: f64) -> (f64, f64);

    /// Order-`k` transform of the active injection as a linear form in the
    /// order-`k` voltage coefficients. `coeffs` holds `Y(0..k)` at least.
    fn linear_p(
        &self,
        net: &Network,
        i: usize,
        coeffs: &[Vec<f64>],
        k: usize,
    ) -> Result<LinearForm>;

    /// Reactive counterpart of [`LoadModel::linear_p`].
    fn linear_q(
        &self,
        net: &Network,
        i: usize,
        coeffs: &[Vec<f64>],
        k: usize,
    ) -> Result<LinearForm>;
}

impl fmt::Debug for dyn LoadModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LoadModel({})", self.name())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantPower;

impl LoadModel for ConstantPower {
    fn name(&self) -> &'static str {
        "const-power"
    }

    fn zip_entry(&self, _net: &Network, _i: usize) -> ZipEntry {
        ZipEntry::CONSTANT_POWER
    }

    fn injection(&self, net: &Network, i: usize, _e: f64, _f: f64) -> (f64, f64) {
        let b = net.bus(i);
        (b.p, b.q)
    }

    fn linear_p(
        &self,
        net: &Network,
        i: usize,
        coeffs: &[Vec<f64>],
        k: usize,
    ) -> Result<LinearForm> {
        check_order(coeffs, k)?;
        Ok(LinearForm::constant(net.dim(), net.bus(i).p * dt::delta(k)))
    }

    fn linear_q(
        &self,
        net: &Network,
        i: usize,
        coeffs: &[Vec<f64>],
        k: usize,
    ) -> Result<LinearForm> {
        check_order(coeffs, k)?;
        Ok(LinearForm::constant(net.dim(), net.bus(i).q * dt::delta(k)))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZipLoad;

impl LoadModel for ZipLoad {
    fn name(&self) -> &'static str {
        "zip"
    }

    fn zip_entry(&self, net: &Network, i: usize) -> ZipEntry {
        net.zip_entry(i)
            .copied()
            .unwrap_or(ZipEntry::CONSTANT_POWER)
    }

    fn injection(&self, net: &Network, i: usize, e: f64, f: f64) -> (f64, f64) {
        evaluator::zip_injection(net, i, e, f).unwrap_or_else(|_| {
            let b = net.bus(i);
            (b.p, b.q)
        })
    }

    fn linear_p(
        &self,
        net: &Network,
        i: usize,
        coeffs: &[Vec<f64>],
        k: usize,
    ) -> Result<LinearForm> {
        dt::zip_linear_p(net, i, coeffs, k)
    }

    fn linear_q(
        &self,
        net: &Network,
        i: usize,
        coeffs: &[Vec<f64>],
        k: usize,
    ) -> Result<LinearForm> {
        dt::zip_linear_q(net, i, coeffs, k)
    }
}

fn check_order(coeffs: &[Vec<f64>], k: usize) -> Result<()> {
    if coeffs.is_empty() || (k > 0 && coeffs.len() < k) {
        Err(Error::OrderOutOfRange {
            order: k,
            available: coeffs.len().saturating_sub(1),
        })
    } else {
        Ok(())
    }
}

/// Load models by name.
#[derive(Clone)]
pub struct ModelRegistry {
    models: BTreeMap<&'static str, Arc<dyn LoadModel>>,
}

impl ModelRegistry {
    pub fn empty() -> Self {
        Self {
            models: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, model: Arc<dyn LoadModel>) {
        self.models.insert(model.name(), model);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn LoadModel>> {
        self.models
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownModel(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.models.keys().copied()
    }
}

impl Default for ModelRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(ConstantPower));
        r.register(Arc::new(ZipLoad));
        r
    }
}

impl fmt::Debug for ModelRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.models.keys()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_names() {
        let r = ModelRegistry::default();
        assert_eq!(r.names().collect::<Vec<_>>(), vec!["const-power", "zip"]);
        assert_eq!(r.get("zip").unwrap().name(), "zip");
        assert_eq!(
            r.get("polar").unwrap_err(),
            Error::UnknownModel("polar".into())
        );
    }

    #[test]
    fn registering_replaces_by_name() {
        let mut r = ModelRegistry::empty();
        r.register(Arc::new(ConstantPower));
        r.register(Arc::new(ConstantPower));
        assert_eq!(r.names().count(), 1);
    }
}
