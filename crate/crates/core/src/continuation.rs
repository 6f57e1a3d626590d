//! Tracing the PV curve by repeated expansion.
//!
//! At each point the series is expanded, a step is taken inside a fraction
//! of its estimated radius and the evaluated state is polished by Newton
//! before it becomes the next expansion point.

use serde::Serialize;

use crate::dt::{expand_with_tolerance, SeriesSolution, DEFAULT_ORDER};
use crate::error::{Error, Result};
use crate::evaluator::{eval_series, radius_estimate, residual_norm};
use crate::load::LoadModel;
use crate::netmodel::Network;
use crate::oracle::newton_solve;

/// Smallest step the tracer will try before giving up.
pub const MIN_STEP: f64 = 1e-6;
/// Steps are never shortened below this by the radius rule.
pub const STEP_FLOOR: f64 = 1e-4;
/// Largest jump between the series value and its Newton polish, per entry.
const JUMP_LIMIT: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub lambda: f64,
    pub y: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    ReachedLambdaMax,
    /// The series radius collapsed or `A_gy` became singular: the nose.
    SingularAtExpansionPoint,
    StepUnderflow,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::ReachedLambdaMax => "reached_lambda_max",
            Termination::SingularAtExpansionPoint => "singular_at_expansion_point",
            Termination::StepUnderflow => "step_underflow",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PVCurve {
    pub points: Vec<CurvePoint>,
    pub termination: Termination,
}

impl PVCurve {
    pub fn last(&self) -> Option<&CurvePoint> {
        self.points.last()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions {
    pub lambda_max: f64,
    /// Fraction of the estimated radius used as the step.
    pub eta: f64,
    pub order: usize,
    /// Residual accepted at each curve point.
    pub tol: f64,
    /// Polish every point with Newton before expanding again.
    pub polish: bool,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            lambda_max: 1.0,
            eta: 0.5,
            order: DEFAULT_ORDER,
            tol: 1e-8,
            polish: true,
        }
    }
}

/// Traces the solution from `(y_start, lambda_start)` toward `opts.lambda_max`.
///
/// The start point must solve the power flow; it is the first point of the
/// curve. Loading values along the curve are strictly increasing.
pub fn trace(
    net: &Network,
    model: &dyn LoadModel,
    y_start: &[f64],
    lambda_start: f64,
    opts: &TraceOptions,
) -> Result<PVCurve> {
    if !(opts.eta > 0.0 && opts.eta <= 1.0) {
        return Err(Error::Semantic(format!(
            "eta must lie in (0, 1], got {}",
            opts.eta
        )));
    }
    if !opts.lambda_max.is_finite() || !lambda_start.is_finite() {
        return Err(Error::Semantic("loading bounds must be finite".into()));
    }
    let base_tol = if opts.polish {
        crate::dt::BASE_TOLERANCE.max(opts.tol)
    } else {
        opts.tol
    };

    let residual = residual_norm(net, model, y_start, lambda_start);
    if !(residual <= base_tol) {
        return Err(Error::BaseNotConverged { residual });
    }
    let mut points = vec![CurvePoint {
        lambda: lambda_start,
        y: y_start.to_vec(),
        residual,
    }];

    // without a loading direction the solution does not move
    if !net.has_direction() {
        return Ok(PVCurve {
            points,
            termination: Termination::ReachedLambdaMax,
        });
    }

    let termination = loop {
        let here = points.last().unwrap();
        let (lambda0, y0) = (here.lambda, here.y.clone());
        if lambda0 >= opts.lambda_max {
            break Termination::ReachedLambdaMax;
        }
        let series = match expand_with_tolerance(net, model, &y0, lambda0, opts.order, base_tol) {
            Ok(s) => s,
            Err(Error::SingularAtExpansionPoint { .. }) => {
                break Termination::SingularAtExpansionPoint
            }
            Err(e) => return Err(e),
        };
        let rho = radius_estimate(&series)?;
        if 0.5 * rho < MIN_STEP {
            break Termination::SingularAtExpansionPoint;
        }
        let remaining = opts.lambda_max - lambda0;
        let mut step = (opts.eta * rho)
            .max(STEP_FLOOR)
            .min(0.5 * rho)
            .min(remaining);

        let next = loop {
            if let Some(p) = attempt(net, model, &series, lambda0 + step, opts) {
                break Some(p);
            }
            step *= 0.5;
            if step < MIN_STEP {
                break None;
            }
        };
        match next {
            Some(p) => {
                // a step that rounds away cannot make progress
                if p.lambda <= lambda0 {
                    break Termination::StepUnderflow;
                }
                points.push(p);
            }
            None => break Termination::StepUnderflow,
        }
    };

    Ok(PVCurve {
        points,
        termination,
    })
}

fn attempt(
    net: &Network,
    model: &dyn LoadModel,
    series: &SeriesSolution,
    lambda: f64,
    opts: &TraceOptions,
) -> Option<CurvePoint> {
    let guess = eval_series(series, lambda);
    if guess.iter().any(|v| !v.is_finite()) {
        return None;
    }
    if !opts.polish {
        let residual = residual_norm(net, model, &guess, lambda);
        return (residual <= opts.tol).then_some(CurvePoint {
            lambda,
            y: guess,
            residual,
        });
    }
    let rep = newton_solve(net, model, lambda, &guess);
    let jump = rep
        .y
        .iter()
        .zip(&guess)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    (rep.converged && rep.residual <= opts.tol && jump <= JUMP_LIMIT).then_some(CurvePoint {
        lambda,
        y: rep.y,
        residual: rep.residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::load::ConstantPower;
    use crate::netmodel::{parse_case, Direction, DirectionVector, ZipConfig};

    fn two_bus() -> Network {
        let case = parse_case(
            "mpc.baseMVA = 100;
mpc.bus = [1 3 0 0 0 0 1 1 0; 2 1 0 0 0 0 1 1 0];
mpc.gen = [1 0 0 0 0 1 100 1];
mpc.branch = [1 2 0 0.1 0 0 0 0 0 0 1];",
        )
        .unwrap();
        let mut dir = DirectionVector::new();
        dir.insert(&case, 2, Direction { dp: -1.0, dq: 0.0 })
            .unwrap();
        Network::new(&case, &ZipConfig::new(), &dir).unwrap()
    }

    #[test]
    fn reaches_target_below_nose() {
        let n = two_bus();
        let opts = TraceOptions {
            lambda_max: 3.0,
            ..TraceOptions::default()
        };
        let c = trace(&n, &ConstantPower, &n.flat_start(), 0.0, &opts).unwrap();
        assert_eq!(c.termination, Termination::ReachedLambdaMax);
        assert_eq!(c.points[0].lambda, 0.0);
        assert_eq!(c.last().unwrap().lambda, 3.0);
        assert!(c.points.windows(2).all(|w| w[1].lambda > w[0].lambda));
        assert!(c.points.iter().all(|p| p.residual <= 1e-8));
    }

    #[test]
    fn stops_near_nose() {
        let n = two_bus();
        let opts = TraceOptions {
            lambda_max: 10.0,
            ..TraceOptions::default()
        };
        let c = trace(&n, &ConstantPower, &n.flat_start(), 0.0, &opts).unwrap();
        assert_ne!(c.termination, Termination::ReachedLambdaMax);
        let last = c.last().unwrap().lambda;
        assert!(last < 5.0 && last > 4.9, "{last} {:?}", c.termination);
    }

    #[test]
    fn zero_direction_is_single_point() {
        let case = parse_case(
            "mpc.baseMVA = 100;
mpc.bus = [1 3 0 0 0 0 1 1 0; 2 1 0 0 0 0 1 1 0];
mpc.branch = [1 2 0 0.1 0 0 0 0 0 0 1];",
        )
        .unwrap();
        let n = Network::from_case(&case).unwrap();
        let opts = TraceOptions {
            lambda_max: 10.0,
            ..TraceOptions::default()
        };
        let c = trace(&n, &ConstantPower, &n.flat_start(), 0.0, &opts).unwrap();
        assert_eq!(c.points.len(), 1);
        assert_eq!(c.termination, Termination::ReachedLambdaMax);
    }

    #[test]
    fn unconverged_start_rejected() {
        let n = two_bus();
        let y = vec![0.9, 0.0, 1.0, 0.0];
        let err = trace(&n, &ConstantPower, &y, 0.0, &TraceOptions::default()).unwrap_err();
        assert!(matches!(err, Error::BaseNotConverged { .. }));
    }

    #[test]
    fn start_at_target_is_single_point() {
        let n = two_bus();
        let opts = TraceOptions {
            lambda_max: 0.0,
            ..TraceOptions::default()
        };
        let c = trace(&n, &ConstantPower, &n.flat_start(), 0.0, &opts).unwrap();
        assert_eq!(c.points.len(), 1);
        assert_eq!(c.termination, Termination::ReachedLambdaMax);
    }
}
