//! Lyapunov energy of the extrapolated iteration and run-time verification.
//!
//! ```text
//! H_γ(y, z, x) = f₁(y) + f₂(z) + h(y) + ‖y − x − γ∇h(y)‖²/(2γ) − ‖z − x − γ∇h(y)‖²/(2γ)
//! Θ(y, z, x, x₁, x₂) = H_γ(y, z, x) + (α²/(2γ))‖x₁ − x₂‖²
//! ```
//!
//! Along certified runs `Θ` decreases by at least
//! `(Λ − τ)(1/γ + L_h/2)‖Δy^{k+1}‖² + ξ‖Δx^k‖²` per step, is bounded below by
//! `F(z^k) + (1/(2γ) − (L_f1 + L_h)/2)‖y^k − z^k‖²`, and the residuals are square
//! summable. The checks here work on the scalar columns of a trace.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::problem::{CompositeObjective, Value};
use crate::solver::TraceRow;
use crate::stepsize::StepParams;
use crate::tensor::Tensor;

/// Relative slack absorbing rounding in the energy inequalities.
pub const SLACK: f64 = 1e-8;

fn slack(theta: f64) -> f64 {
    SLACK * theta.abs().max(1.0)
}

/// `H_γ(y, z, x)`; `+∞` when `f₂(z)` is.
pub fn h_gamma(p: &CompositeObjective, gamma: f64, y: &Tensor, z: &Tensor, x: &Tensor) -> Value {
    let gh = p.h.gradient(y);
    let base = y.axpy(-1.0, x).axpy(-gamma, &gh);
    let other = z.axpy(-1.0, x).axpy(-gamma, &gh);
    let smooth = p.f1.value(y) + p.h.value(y) + (base.norm_sq() - other.norm_sq()) / (2.0 * gamma);
    p.f2.value(z) + smooth
}

/// The five blocks `(y, z, x, x₁, x₂)` at which `Θ` is evaluated.
#[derive(Clone, Copy, Debug)]
pub struct EnergyPoint<'a> {
    pub y: &'a Tensor,
    pub z: &'a Tensor,
    pub x: &'a Tensor,
    pub x1: &'a Tensor,
    pub x2: &'a Tensor,
}

/// `Θ = H_γ(y, z, x) + (α²/(2γ))‖x₁ − x₂‖²`.
pub fn theta(p: &CompositeObjective, params: &StepParams, u: EnergyPoint<'_>) -> Value {
    let g = params.gamma();
    let a = params.alpha();
    h_gamma(p, g, u.y, u.z, u.x) + a * a / (2.0 * g) * u.x1.distance(u.x2).powi(2)
}

/// Partial gradients of `Θ` in the smooth blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaGradients {
    pub g_y: Tensor,
    pub g_x: Tensor,
    pub g_x1: Tensor,
    pub g_x2: Tensor,
}

/// Closed forms `∇_yΘ = ∇f₁(y) + (y − x)/γ + ∇²h(y)(z − y)`, `∇_xΘ = (z − y)/γ`,
/// `∇_{x₁}Θ = (α²/γ)(x₁ − x₂) = −∇_{x₂}Θ`. The `z` block is set-valued and
/// omitted.
pub fn theta_gradients(p: &CompositeObjective, params: &StepParams, u: EnergyPoint<'_>) -> Result<ThetaGradients> {
    let g = params.gamma();
    let a = params.alpha();
    let zy = u.z - u.y;
    let hess = p
        .h
        .hessian_apply(u.y, &zy)
        .ok_or_else(|| Error::MissingHessian(p.h.name().to_string()))?;
    let g_y = p.f1.gradient(u.y).axpy(1.0 / g, &(u.y - u.x)).axpy(1.0, &hess);
    let g_x = zy.scale(1.0 / g);
    let g_x1 = (u.x1 - u.x2).scale(a * a / g);
    let g_x2 = -&g_x1;
    Ok(ThetaGradients { g_y, g_x, g_x1, g_x2 })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub k: usize,
    pub deficit: f64,
}

/// Result of the descent check over a trace.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EnergyReport {
    pub theta_seq: Vec<f64>,
    /// Rows `k` where `Θ^k − Θ^{k+1}` falls short of the guaranteed decrease.
    pub violations: Vec<Violation>,
    /// Whether `Θ` never increased beyond the slack.
    pub monotone: bool,
    pub min_dx_by_k: Vec<f64>,
    pub min_dy_by_k: Vec<f64>,
    pub min_yz_by_k: Vec<f64>,
    pub certified: bool,
}

fn running_min(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut m = f64::INFINITY;
    values
        .map(|v| {
            m = m.min(v);
            m
        })
        .collect()
}

/// Checks `Θ^k − Θ^{k+1} ≥ (Λ − τ)(1/γ + L_h/2)‖Δy^{k+1}‖² + ξ‖Δx^k‖²` row by row.
pub fn check_descent(trace: &[TraceRow], params: &StepParams) -> EnergyReport {
    let cy = params.dy_coefficient();
    let xi = params.xi();
    let mut violations = Vec::new();
    let mut monotone = true;
    for pair in trace.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let decrease = a.theta - b.theta;
        let dy = b.dy_norm.unwrap_or(0.0);
        let mut bound = cy * dy * dy + xi * a.dx_norm * a.dx_norm;
        if !bound.is_finite() {
            bound = 0.0;
        }
        let tol = slack(a.theta);
        if decrease + tol < bound {
            violations.push(Violation { k: a.k, deficit: bound - decrease });
        }
        if decrease + tol < 0.0 {
            monotone = false;
        }
    }
    if !violations.is_empty() && !params.is_certified() {
        log::warn!(
            "{} descent violations on an uncertified run (informational)",
            violations.len()
        );
    }
    EnergyReport {
        theta_seq: trace.iter().map(|r| r.theta).collect(),
        violations,
        monotone,
        min_dx_by_k: running_min(trace.iter().map(|r| r.dx_norm)),
        min_dy_by_k: running_min(trace.iter().filter_map(|r| r.dy_norm)),
        min_yz_by_k: running_min(trace.iter().map(|r| r.yz_gap)),
        certified: params.is_certified(),
    }
}

/// Coefficient `1/(2γ) − (L_f1 + L_h)/2` of the lower bound.
pub fn lower_bound_coefficient(p: &CompositeObjective, gamma: f64) -> f64 {
    1.0 / (2.0 * gamma) - (p.f1.lipschitz() + p.h.lipschitz()) / 2.0
}

/// Rows violating `Θ^k ≥ F(z^k) + (1/(2γ) − (L_f1 + L_h)/2)‖y^k − z^k‖²`.
pub fn lower_bound_violations(p: &CompositeObjective, gamma: f64, trace: &[TraceRow]) -> Vec<Violation> {
    let c = lower_bound_coefficient(p, gamma);
    trace
        .iter()
        .filter_map(|r| {
            let rhs = match r.objective {
                Value::Finite(f) => f + c * r.yz_gap * r.yz_gap,
                Value::Infinite => return Some(Violation { k: r.k, deficit: f64::INFINITY }),
            };
            (r.theta + slack(r.theta) < rhs).then(|| Violation { k: r.k, deficit: rhs - r.theta })
        })
        .collect()
}

pub fn check_lower_bound(p: &CompositeObjective, gamma: f64, trace: &[TraceRow]) -> bool {
    lower_bound_violations(p, gamma, trace).is_empty()
}

/// One residual family in the rate check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateBound {
    /// `sup_K √K · min_{k≤K} r_k` over the trace.
    pub observed: f64,
    /// The guaranteed constant; `None` when it is not defined (e.g. `ξ = 0`).
    pub bound: Option<f64>,
    pub holds: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateReport {
    pub dx: RateBound,
    pub dy: RateBound,
    pub yz: RateBound,
    pub theta_first: f64,
    pub theta_min: f64,
}

fn sup_sqrt_k_min(values: &[f64]) -> f64 {
    let mut m = f64::INFINITY;
    let mut sup: f64 = 0.0;
    for (i, v) in values.iter().enumerate() {
        m = m.min(*v);
        sup = sup.max(((i + 1) as f64).sqrt() * m);
    }
    sup
}

fn rate(values: &[f64], budget: f64, coeff: f64) -> RateBound {
    let observed = sup_sqrt_k_min(values);
    if !(coeff > 0.0) || !coeff.is_finite() {
        return RateBound { observed, bound: None, holds: true };
    }
    let c = (budget / coeff).sqrt();
    RateBound { observed, bound: Some(c), holds: observed <= c }
}

/// `√K · min_{k≤K}` of `‖Δx‖`, `‖Δy‖` and `‖y − z‖` against the constants implied
/// by summing the descent inequality:
///
/// * `Σ_{k<N} ‖Δx^k‖² ≤ (Θ¹ − Θ_min)/ξ`
/// * `Σ_{2≤k≤N} ‖Δy^k‖² ≤ (Θ¹ − Θ_min)/((Λ − τ)(1/γ + L_h/2))`
/// * `‖y^k − z^k‖² ≤ 2‖Δx^k‖² + 2α²‖Δx^{k−1}‖²`, so the `y − z` constant is
///   `√(2(1 + α²)(Θ¹ − Θ_min)/ξ)`.
pub fn rate_check(trace: &[TraceRow], params: &StepParams) -> RateReport {
    let theta_first = trace.first().map_or(0.0, |r| r.theta);
    let theta_min = trace.iter().map(|r| r.theta).fold(f64::INFINITY, f64::min);
    let theta_min = if theta_min.is_finite() { theta_min } else { theta_first };
    let budget = (theta_first - theta_min).max(0.0) + slack(theta_first);
    let n = trace.len();
    let head = n.saturating_sub(1);
    let dx: Vec<f64> = trace[..head].iter().map(|r| r.dx_norm).collect();
    let dy: Vec<f64> = trace.iter().filter_map(|r| r.dy_norm).collect();
    let yz: Vec<f64> = trace[..head].iter().map(|r| r.yz_gap).collect();
    let a = params.alpha();
    let xi = params.xi();
    RateReport {
        dx: rate(&dx, budget, xi),
        dy: rate(&dy, budget, params.dy_coefficient()),
        yz: rate(&yz, 2.0 * (1.0 + a * a) * budget, xi),
        theta_first,
        theta_min,
    }
}

/// Square-summability of `‖Δx‖` and the run's finite length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Summability {
    pub sum_dx_sq: f64,
    pub bound: Option<f64>,
    pub holds: bool,
    /// `Σ‖Δx^k‖` over the run.
    pub path_length: f64,
}

pub fn summability(trace: &[TraceRow], params: &StepParams) -> Summability {
    let head = trace.len().saturating_sub(1);
    let sum_dx_sq: f64 = trace[..head].iter().map(|r| r.dx_norm * r.dx_norm).sum();
    let path_length = trace.iter().map(|r| r.dx_norm).sum();
    let xi = params.xi();
    let bound = (xi > 0.0 && !trace.is_empty()).then(|| {
        let t1 = trace[0].theta;
        let tmin = trace.iter().map(|r| r.theta).fold(f64::INFINITY, f64::min);
        ((t1 - tmin).max(0.0) + slack(t1)) / xi
    });
    Summability {
        sum_dx_sq,
        bound,
        holds: bound.map_or(true, |b| sum_dx_sq <= b),
        path_length,
    }
}

/// Everything the run report needs about the energy.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergySummary {
    pub certified: bool,
    pub monotone_theta: bool,
    pub descent_violations: usize,
    pub lower_bound_holds: bool,
    pub rates: Option<RateReport>,
    pub summability: Summability,
}

pub fn summarize(p: &CompositeObjective, params: &StepParams, trace: &[TraceRow]) -> EnergySummary {
    let descent = check_descent(trace, params);
    EnergySummary {
        certified: params.is_certified(),
        monotone_theta: descent.monotone,
        descent_violations: descent.violations.len(),
        lower_bound_holds: check_lower_bound(p, params.gamma(), trace),
        rates: (trace.len() >= 10).then(|| rate_check(trace, params)),
        summability: summability(trace, params),
    }
}
