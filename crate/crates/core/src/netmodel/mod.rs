//! Network data: case ingestion, ZIP/direction sidecar, admittance matrix and
//! the internal bus ordering every solver stage works in.

mod case;
mod network;
mod sidecar;
mod ybus;

pub use case::{parse_case, write_case, BranchRecord, BusRecord, CaseData, GenRecord};
pub use network::{partition_and_specify, BusOrdering, Network, SpecifiedBus};
pub use sidecar::{parse_sidecar, Direction, DirectionVector, ZipConfig, ZipEntry};
pub use ybus::{build_ybus, AdmittanceMatrix};

use serde::Serialize;

/// Bus partition. Case files encode these as 1 (PQ), 2 (PV) and 3 (REF).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum BusKind {
    PQ,
    PV,
    REF,
}

impl BusKind {
    pub fn from_code(code: f64) -> Option<Self> {
        [BusKind::PQ, BusKind::PV, BusKind::REF]
            .into_iter()
            .find(|k| f64::from(k.code()) == code)
    }

    pub fn code(self) -> u8 {
        match self {
            BusKind::PQ => 1,
            BusKind::PV => 2,
            BusKind::REF => 3,
        }
    }

    /// The two equations a bus of this kind contributes, in row order.
    pub fn equations(self) -> [EquationKind; 2] {
        match self {
            BusKind::PQ => [EquationKind::P, EquationKind::Q],
            BusKind::PV => [EquationKind::P, EquationKind::V],
            BusKind::REF => [EquationKind::E, EquationKind::F],
        }
    }
}

/// Power flow equation families: active power, reactive power, voltage
/// magnitude, and the two slack voltage components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum EquationKind {
    P,
    Q,
    V,
    E,
    F,
}

impl EquationKind {
    pub const ALL: [EquationKind; 5] = [
        EquationKind::P,
        EquationKind::Q,
        EquationKind::V,
        EquationKind::E,
        EquationKind::F,
    ];

    pub fn applies_to(self, kind: BusKind) -> bool {
        kind.equations().contains(&self)
    }
}
