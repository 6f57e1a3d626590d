//! Power flow solutions as power series in the loading parameter.
//!
//! The rectangular power flow equations are transformed order by order with
//! differential transformation: every order is a linear system sharing one
//! coefficient matrix, the Jacobian at the expansion point. The crate covers
//! case ingestion ([`netmodel`]), the series solver ([`dt`]), evaluation and
//! PV-curve tracing ([`evaluator`], [`continuation`]) and the independent
//! reference computations used to check it ([`oracle`], [`verify`]).

// Tolerance checks are written `!(x <= tol)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod continuation;
pub mod dt;
pub mod error;
pub mod evaluator;
pub mod load;
pub mod netmodel;
pub mod numerics;
pub mod oracle;
pub mod verify;

pub use continuation::{trace, CurvePoint, PVCurve, Termination, TraceOptions};
pub use dt::{expand, SeriesSolution};
pub use error::{Error, Result};
pub use evaluator::{eval_series, mismatch, radius_estimate};
pub use load::{ConstantPower, LoadModel, ModelRegistry, ZipLoad};
pub use netmodel::{parse_case, parse_sidecar, CaseData, Network};
