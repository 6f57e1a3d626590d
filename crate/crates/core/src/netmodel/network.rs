use super::{
    build_ybus, AdmittanceMatrix, BusKind, CaseData, Direction, DirectionVector, ZipConfig,
    ZipEntry,
};
use crate::error::Result;

/// Maps case bus positions to internal indices: PQ buses first, then PV,
/// then the reference bus last. Relative order within a kind is preserved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BusOrdering {
    internal_to_case: Vec<usize>,
    case_to_internal: Vec<usize>,
    n_pq: usize,
    n_pv: usize,
}

impl BusOrdering {
    pub fn from_kinds(kinds: &[BusKind]) -> Self {
        let mut internal_to_case: Vec<usize> = (0..kinds.len()).collect();
        internal_to_case.sort_by_key(|&p| kinds[p]);
        let mut case_to_internal = vec![0; kinds.len()];
        for (internal, &p) in internal_to_case.iter().enumerate() {
            case_to_internal[p] = internal;
        }
        let n_pq = kinds.iter().filter(|k| **k == BusKind::PQ).count();
        let n_pv = kinds.iter().filter(|k| **k == BusKind::PV).count();
        Self {
            internal_to_case,
            case_to_internal,
            n_pq,
            n_pv,
        }
    }

    pub fn n(&self) -> usize {
        self.internal_to_case.len()
    }

    /// Number of PQ buses (the `M` of the block layout).
    pub fn n_pq(&self) -> usize {
        self.n_pq
    }

    pub fn n_pv(&self) -> usize {
        self.n_pv
    }

    pub fn ref_index(&self) -> usize {
        self.n() - 1
    }

    pub fn to_internal(&self, case_pos: usize) -> usize {
        self.case_to_internal[case_pos]
    }

    pub fn to_case(&self, internal: usize) -> usize {
        self.internal_to_case[internal]
    }

    pub fn internal_to_case(&self) -> &[usize] {
        &self.internal_to_case
    }

    /// Reorders a per-bus vector from case order to internal order.
    pub fn permute<T: Clone>(&self, case_order: &[T]) -> Vec<T> {
        self.internal_to_case
            .iter()
            .map(|&p| case_order[p].clone())
            .collect()
    }

    /// Reorders a per-bus vector from internal order back to case order.
    pub fn inverse_permute<T: Clone>(&self, internal: &[T]) -> Vec<T> {
        self.case_to_internal
            .iter()
            .map(|&i| internal[i].clone())
            .collect()
    }
}

/// Specified quantities of one bus, all per-unit and generation-positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecifiedBus {
    pub id: usize,
    pub kind: BusKind,
    /// Net active injection (generation minus load).
    pub p: f64,
    /// Net reactive injection.
    pub q: f64,
    /// Voltage magnitude set-point (PV and REF).
    pub v: f64,
    /// Reference voltage, real part (REF only).
    pub e: f64,
    /// Reference voltage, imaginary part (REF only).
    pub f: f64,
}

/// Partitions buses and computes the specified set in internal order.
pub fn partition_and_specify(case: &CaseData) -> (BusOrdering, Vec<SpecifiedBus>) {
    let kinds: Vec<BusKind> = case.buses.iter().map(|b| b.kind).collect();
    let ordering = BusOrdering::from_kinds(&kinds);

    let specified: Vec<SpecifiedBus> = case
        .buses
        .iter()
        .map(|bus| {
            let gens: Vec<_> = case
                .gens
                .iter()
                .filter(|g| g.in_service && g.bus == bus.id)
                .collect();
            let p = gens.iter().map(|g| g.pg).sum::<f64>() - bus.pd;
            let q = gens.iter().map(|g| g.qg).sum::<f64>() - bus.qd;
            let v = match bus.kind {
                BusKind::PQ => bus.vm,
                _ => gens.first().map_or(bus.vm, |g| g.vg),
            };
            let (e, f) = if bus.kind == BusKind::REF {
                (v * bus.va.cos(), v * bus.va.sin())
            } else {
                (0.0, 0.0)
            };
            SpecifiedBus {
                id: bus.id,
                kind: bus.kind,
                p,
                q,
                v,
                e,
                f,
            }
        })
        .collect();

    let specified = ordering.permute(&specified);
    (ordering, specified)
}

/// Everything the power flow equations need, in internal bus order.
///
/// State vectors are interleaved per internal bus: `(e_0, f_0, e_1, f_1, ...)`.
#[derive(Debug, Clone)]
pub struct Network {
    ordering: BusOrdering,
    ybus: AdmittanceMatrix,
    buses: Vec<SpecifiedBus>,
    zip: Vec<Option<ZipEntry>>,
    direction: Vec<Direction>,
}

impl Network {
    pub fn new(case: &CaseData, zip: &ZipConfig, dir: &DirectionVector) -> Result<Self> {
        case.validate()?;
        let ybus_case = build_ybus(case)?;
        let (ordering, buses) = partition_and_specify(case);
        let ybus = ybus_case.permuted(ordering.internal_to_case());
        let zip = buses
            .iter()
            .map(|b| (b.kind == BusKind::PQ).then(|| zip.entry_or_default(b.id)))
            .collect();
        let direction = buses.iter().map(|b| dir.get(b.id)).collect();
        Ok(Self {
            ordering,
            ybus,
            buses,
            zip,
            direction,
        })
    }

    /// Network with constant-power loads and no loading direction.
    pub fn from_case(case: &CaseData) -> Result<Self> {
        Self::new(case, &ZipConfig::new(), &DirectionVector::new())
    }

    pub fn n(&self) -> usize {
        self.buses.len()
    }

    /// Length of the real state vector, `2N`.
    pub fn dim(&self) -> usize {
        2 * self.buses.len()
    }

    pub fn ordering(&self) -> &BusOrdering {
        &self.ordering
    }

    pub fn ybus(&self) -> &AdmittanceMatrix {
        &self.ybus
    }

    pub fn bus(&self, i: usize) -> &SpecifiedBus {
        &self.buses[i]
    }

    pub fn buses(&self) -> &[SpecifiedBus] {
        &self.buses
    }

    pub fn kind(&self, i: usize) -> BusKind {
        self.buses[i].kind
    }

    /// Effective ZIP entry of internal bus `i`; `None` unless `i` is PQ.
    pub fn zip_entry(&self, i: usize) -> Option<&ZipEntry> {
        self.zip[i].as_ref()
    }

    pub fn direction(&self, i: usize) -> Direction {
        self.direction[i]
    }

    pub fn has_direction(&self) -> bool {
        self.direction.iter().any(|d| d.dp != 0.0 || d.dq != 0.0)
    }

    /// Internal index of the bus with external id `id`.
    pub fn index_of(&self, id: usize) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    /// Flat start: `1 + j0` at PQ buses, set-point magnitudes at PV buses and
    /// the specified phasor at the reference.
    pub fn flat_start(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        for (i, b) in self.buses.iter().enumerate() {
            let (e, f) = match b.kind {
                BusKind::PQ => (1.0, 0.0),
                BusKind::PV => (b.v, 0.0),
                BusKind::REF => (b.e, b.f),
            };
            y[2 * i] = e;
            y[2 * i + 1] = f;
        }
        y
    }
}
