//! Differential transformation of the power flow equations.
//!
//! Products of state variables become Cauchy products of their Taylor
//! coefficients. Because every nonlinearity in rectangular coordinates is
//! quadratic, the order-`k` equations are linear in `Y(k)` and `L(k)` with a
//! coefficient matrix fixed by `Y(0)`, and the whole series follows from one
//! factorization.

mod algebra;
mod expand;
mod forms;
mod system;

pub use algebra::{conv_at, delta, history, lemma_coeffs};
pub(crate) use expand::expand_with_tolerance;
pub use expand::{expand, SeriesSolution, BASE_TOLERANCE, DEFAULT_ORDER, PIVOT_RELATIVE};
pub use forms::{linear_form, pf_const, pf_row, zip_linear_p, zip_linear_q, LinearForm};
pub use system::{assemble_system, rhs_at_order, OrderSystem, SystemSolver};
