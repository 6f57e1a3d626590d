//! Seeded random trials checking the linear forms against the direct
//! convolution oracle.
//!
//! For a random network and a random series through order `k`, every
//! transformed equation evaluated by raw convolutions must equal
//! `row . Y(k) + lam_coef * L(k) + constant` from the linear forms. This is
//! an identity, so any seed must pass up to rounding.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dt::{linear_form, zip_linear_p, zip_linear_q};
use crate::error::Result;
use crate::load::{ConstantPower, LoadModel, ZipLoad};
use crate::netmodel::{
    BranchRecord, BusKind, BusRecord, CaseData, Direction, DirectionVector, GenRecord, Network,
    ZipConfig, ZipEntry,
};
use crate::oracle::{direct_transform, TransformKind};

pub const IDENTITY_TOLERANCE: f64 = 1e-12;

/// Which family of equations a run exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Suite {
    /// Constant-power load: P, Q, V, E and F equations.
    ConstantPower,
    /// ZIP load: P and Q equations plus the ZIP injections themselves.
    Zip,
}

impl Suite {
    fn kinds(self) -> &'static [TransformKind] {
        match self {
            Suite::ConstantPower => &[
                TransformKind::P,
                TransformKind::Q,
                TransformKind::V,
                TransformKind::E,
                TransformKind::F,
            ],
            Suite::Zip => &[
                TransformKind::P,
                TransformKind::Q,
                TransformKind::Pzip,
                TransformKind::Qzip,
            ],
        }
    }

    fn model(self) -> &'static dyn LoadModel {
        match self {
            Suite::ConstantPower => &ConstantPower,
            Suite::Zip => &ZipLoad,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub trials: usize,
    pub seed: u64,
    /// Orders are drawn from `1..=max_order`.
    pub max_order: usize,
    pub tolerance: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            trials: 1000,
            seed: 7,
            max_order: 8,
            tolerance: IDENTITY_TOLERANCE,
        }
    }
}

/// Worst observed deviation, for replay.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorstCase {
    pub trial: usize,
    pub bus: usize,
    pub kind: &'static str,
    pub order: usize,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub seed: u64,
    pub trials: usize,
    pub tolerance: f64,
    /// Equations compared, over all trials.
    pub comparisons: usize,
    /// Largest deviation per equation kind.
    pub max_deviation: BTreeMap<&'static str, f64>,
    pub worst: Option<WorstCase>,
    pub passed: bool,
}

impl IdentityReport {
    fn new(seed: u64, tolerance: f64) -> Self {
        Self {
            seed,
            trials: 0,
            tolerance,
            comparisons: 0,
            max_deviation: BTreeMap::new(),
            worst: None,
            passed: true,
        }
    }

    fn record(&mut self, trial: usize, bus: usize, kind: TransformKind, order: usize, dev: f64) {
        self.comparisons += 1;
        let slot = self.max_deviation.entry(kind.label()).or_insert(0.0);
        // NaN counts as the worst possible deviation
        let dev = if dev.is_nan() { f64::INFINITY } else { dev };
        *slot = slot.max(dev);
        if self.worst.as_ref().is_none_or(|w| dev > w.deviation) {
            self.worst = Some(WorstCase {
                trial,
                bus,
                kind: kind.label(),
                order,
                deviation: dev,
            });
        }
        if !(dev <= self.tolerance) {
            self.passed = false;
        }
    }

    /// Folds another report (same seed) into this one.
    pub fn merge(&mut self, other: &IdentityReport) {
        self.trials = self.trials.max(other.trials);
        self.comparisons += other.comparisons;
        for (k, v) in &other.max_deviation {
            let slot = self.max_deviation.entry(k).or_insert(0.0);
            *slot = slot.max(*v);
        }
        if let Some(w) = &other.worst {
            if self
                .worst
                .as_ref()
                .is_none_or(|s| w.deviation > s.deviation)
            {
                self.worst = Some(w.clone());
            }
        }
        self.passed &= other.passed;
    }
}

/// Random connected case with `n` buses: one reference bus, a mix of PV and
/// PQ buses (at least one PQ when `n >= 2`), moderate impedances and some
/// off-nominal transformers.
pub fn random_case<R: Rng>(rng: &mut R, n: usize) -> CaseData {
    assert!(n >= 1);
    let ref_pos = rng.gen_range(0..n);
    let first_pq = (ref_pos + 1) % n;
    let buses = (0..n)
        .map(|pos| {
            let kind = if pos == ref_pos {
                BusKind::REF
            } else if pos == first_pq || rng.gen_bool(0.6) {
                BusKind::PQ
            } else {
                BusKind::PV
            };
            BusRecord {
                id: pos + 1,
                kind,
                pd: rng.gen_range(0.0..1.0),
                qd: rng.gen_range(-0.2..0.5),
                gs: if rng.gen_bool(0.3) {
                    rng.gen_range(0.0..0.05)
                } else {
                    0.0
                },
                bs: if rng.gen_bool(0.3) {
                    rng.gen_range(-0.1..0.2)
                } else {
                    0.0
                },
                vm: rng.gen_range(0.95..1.05),
                va: rng.gen_range(-0.2..0.2),
            }
        })
        .collect::<Vec<_>>();

    let mut branches = Vec::new();
    let mut add_branch = |rng: &mut R, from: usize, to: usize| {
        let transformer = rng.gen_bool(0.25);
        branches.push(BranchRecord {
            from,
            to,
            r: rng.gen_range(0.01..0.1),
            x: rng.gen_range(0.1..0.5),
            b: rng.gen_range(0.0..0.1),
            ratio: if transformer {
                rng.gen_range(0.9..1.1)
            } else {
                0.0
            },
            shift: if transformer && rng.gen_bool(0.5) {
                rng.gen_range(-0.1..0.1)
            } else {
                0.0
            },
            in_service: true,
        });
    };
    for pos in 1..n {
        let to = rng.gen_range(0..pos);
        add_branch(rng, pos + 1, to + 1);
    }
    for _ in 0..n / 2 {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b {
            add_branch(rng, a + 1, b + 1);
        }
    }

    let gens = buses
        .iter()
        .filter(|b| b.kind != BusKind::PQ)
        .map(|b| GenRecord {
            bus: b.id,
            pg: rng.gen_range(0.0..1.5),
            qg: 0.0,
            vg: rng.gen_range(0.95..1.05),
            in_service: true,
        })
        .collect();

    CaseData {
        base_mva: 100.0,
        buses,
        branches,
        gens,
    }
}

/// Random ZIP parameters, fractions summing to one. Negative fractions are
/// allowed as in the measured-load literature.
pub fn random_zip<R: Rng>(rng: &mut R) -> ZipEntry {
    let (az, ai) = (rng.gen_range(-0.2..0.6), rng.gen_range(-0.2..0.6));
    let (bz, bi) = (rng.gen_range(-0.2..0.6), rng.gen_range(-0.2..0.6));
    ZipEntry {
        alpha_z: az,
        alpha_i: ai,
        alpha_p: 1.0 - az - ai,
        beta_z: bz,
        beta_i: bi,
        beta_p: 1.0 - bz - bi,
        z: Complex64::from_polar(rng.gen_range(0.5..3.0), rng.gen_range(-3.1..3.1)),
        i: Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
    }
}

/// Network on `case` with random ZIP parameters at every PQ bus and a random
/// loading direction.
pub fn random_network<R: Rng>(rng: &mut R, case: &CaseData) -> Result<Network> {
    let mut zip = ZipConfig::new();
    let mut dir = DirectionVector::new();
    for b in &case.buses {
        match b.kind {
            BusKind::PQ => {
                zip.insert(case, b.id, random_zip(rng))?;
                let d = Direction {
                    dp: rng.gen_range(-1.0..1.0),
                    dq: rng.gen_range(-1.0..1.0),
                };
                dir.insert(case, b.id, d)?;
            }
            BusKind::PV => {
                let d = Direction {
                    dp: rng.gen_range(-1.0..1.0),
                    dq: 0.0,
                };
                dir.insert(case, b.id, d)?;
            }
            BusKind::REF => {}
        }
    }
    Network::new(case, &zip, &dir)
}

/// Random coefficients `Y(0..=k)` with `Y(0)` near a flat profile, and a
/// random loading series.
pub fn random_series<R: Rng>(rng: &mut R, dim: usize, k: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let coeffs = (0..=k)
        .map(|m| {
            (0..dim)
                .map(|s| {
                    if m == 0 && s % 2 == 0 {
                        rng.gen_range(0.8..1.2)
                    } else {
                        rng.gen_range(-1.0..1.0)
                    }
                })
                .collect()
        })
        .collect();
    let lam = (0..=k).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (coeffs, lam)
}

fn linear_value(
    net: &Network,
    model: &dyn LoadModel,
    i: usize,
    kind: TransformKind,
    coeffs: &[Vec<f64>],
    lam: &[f64],
    k: usize,
) -> Result<f64> {
    use crate::netmodel::EquationKind as E;
    let form = match kind {
        TransformKind::P => linear_form(net, model, i, E::P, coeffs, k)?,
        TransformKind::Q => linear_form(net, model, i, E::Q, coeffs, k)?,
        TransformKind::V => linear_form(net, model, i, E::V, coeffs, k)?,
        TransformKind::E => linear_form(net, model, i, E::E, coeffs, k)?,
        TransformKind::F => linear_form(net, model, i, E::F, coeffs, k)?,
        TransformKind::Pzip => zip_linear_p(net, i, coeffs, k)?,
        TransformKind::Qzip => zip_linear_q(net, i, coeffs, k)?,
    };
    Ok(form.apply(&coeffs[k], lam[k]))
}

fn applies(kind: TransformKind, bus: BusKind) -> bool {
    match kind {
        TransformKind::P => bus != BusKind::REF,
        TransformKind::Q | TransformKind::Pzip | TransformKind::Qzip => bus == BusKind::PQ,
        TransformKind::V => bus == BusKind::PV,
        TransformKind::E | TransformKind::F => bus == BusKind::REF,
    }
}

/// Runs one trial on `net` at order `k`, recording every comparison.
fn check_trial(
    report: &mut IdentityReport,
    trial: usize,
    net: &Network,
    suite: Suite,
    coeffs: &[Vec<f64>],
    lam: &[f64],
    k: usize,
) -> Result<()> {
    let model = suite.model();
    for i in 0..net.n() {
        for &kind in suite.kinds() {
            if !applies(kind, net.kind(i)) {
                continue;
            }
            let direct = direct_transform(net, model, i, kind, coeffs, lam, k)?;
            let linear = linear_value(net, model, i, kind, coeffs, lam, k)?;
            report.record(trial, net.bus(i).id, kind, k, (direct - linear).abs());
        }
    }
    Ok(())
}

/// Identity trials. With `topology` the network is fixed and only the ZIP
/// parameters, direction and series are drawn; otherwise every trial draws a
/// fresh network of 2 to 6 buses.
///
/// Trial `t` uses its own generator seeded from `(opts.seed, t)`, so a
/// failing trial can be replayed alone.
pub fn identity_trials(
    topology: Option<&CaseData>,
    suite: Suite,
    opts: &VerifyOptions,
) -> Result<IdentityReport> {
    let mut report = IdentityReport::new(opts.seed, opts.tolerance);
    for t in 0..opts.trials {
        let mut rng = trial_rng(opts.seed, t);
        let owned;
        let case = match topology {
            Some(c) => c,
            None => {
                let n = rng.gen_range(2..=6);
                owned = random_case(&mut rng, n);
                &owned
            }
        };
        let net = random_network(&mut rng, case)?;
        let k = rng.gen_range(1..=opts.max_order.max(1));
        let (coeffs, lam) = random_series(&mut rng, net.dim(), k);
        check_trial(&mut report, t, &net, suite, &coeffs, &lam, k)?;
        report.trials += 1;
    }
    Ok(report)
}

pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}
