//! The extrapolated Davis–Yin iteration and its Plug-and-Play variants.
//!
//! One step maps `(x^k, x^{k-1})` to `x^{k+1}` through
//!
//! ```text
//! w = x^k + α (x^k − x^{k−1})
//! y = Prox_{γf₁}(w)
//! z = Prox_{γf₂}(2y − γ∇h(y) − w)
//! x^{k+1} = w + z − y
//! ```
//!
//! With `α = 0` this is plain three-operator splitting; with `h = 0` it is
//! Douglas–Rachford and with `f₁ = 0` forward–backward splitting.

use std::time::Instant;

use crate::energy;
use crate::error::{Error, Result};
use crate::priors::{DenoiserPrior, DenoiserSlot, GradStepDenoiser};
use crate::problem::{criticality_residual, CompositeObjective, ProxableTerm, SmoothTerm, Value};
use crate::stepsize::StepParams;
use crate::tensor::Tensor;

/// Iterates after a completed step: `x_curr = x^{k+1}`, `x_prev = x^k`,
/// `w = w^k`, `y = y^{k+1}`, `z = z^{k+1}`; `k` counts completed steps.
#[derive(Clone, Debug, PartialEq)]
pub struct DysState {
    pub x_curr: Tensor,
    pub x_prev: Tensor,
    pub w: Tensor,
    pub y: Tensor,
    pub z: Tensor,
    pub k: usize,
}

impl DysState {
    /// Starting state with `x^{-1} = x^0`.
    pub fn new(x0: Tensor) -> Self {
        DysState {
            x_prev: x0.clone(),
            w: x0.clone(),
            y: x0.clone(),
            z: x0.clone(),
            x_curr: x0,
            k: 0,
        }
    }
}

/// Stop when `|F(z^{k+1}) − F(z^k)| / max(1, |F(z^k)|) < eps` or after `k_max` steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StopRule {
    pub eps: f64,
    pub k_max: usize,
}

impl StopRule {
    pub fn new(eps: f64, k_max: usize) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
        }
        if k_max == 0 {
            return Err(Error::InvalidParameter("k_max must be at least 1".into()));
        }
        Ok(StopRule { eps, k_max })
    }

    /// Never stops on the tolerance (`eps = 0`); runs exactly `k` steps.
    pub fn fixed(k: usize) -> Self {
        StopRule { eps: 0.0, k_max: k.max(1) }
    }
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule { eps: 1e-8, k_max: 1000 }
    }
}

/// Diagnostics for the tuple produced by step `k` (1-based).
///
/// `dx_norm = ‖x^k − x^{k−1}‖`, `dy_norm = ‖y^k − y^{k−1}‖` (absent at `k = 1`),
/// `yz_gap = ‖y^k − z^k‖`, `theta` the energy at `(y^k, z^k, x^k, x^{k−1}, x^{k−2})`.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub theta: f64,
    pub h_gamma: f64,
    pub dx_norm: f64,
    pub dy_norm: Option<f64>,
    pub yz_gap: f64,
    pub crit_residual: f64,
    pub objective: Value,
    pub psnr: Option<f64>,
    /// `crit_residual / (‖Δx^k‖ + ‖Δx^{k−1}‖)`, when the denominator is positive.
    pub kl_ratio: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    MaxIterations,
}

#[derive(Clone, Debug)]
pub struct SolveOutput {
    pub state: DysState,
    pub trace: Vec<TraceRow>,
    /// Wall time in seconds at the end of each row, kept apart from the trace
    /// so traces stay reproducible.
    pub elapsed_s: Vec<f64>,
    pub stop_reason: StopReason,
}

/// Optional observers of a run.
#[derive(Default)]
pub struct Hooks<'a> {
    /// Called once per completed iteration.
    pub sink: Option<&'a mut dyn FnMut(&TraceRow)>,
    /// Quality score of `z^k`, e.g. PSNR against a reference image.
    pub quality: Option<&'a dyn Fn(&Tensor) -> f64>,
}

/// One iteration of the extrapolated scheme.
pub fn dys_step(p: &CompositeObjective, params: &StepParams, s: &DysState) -> Result<DysState> {
    let gamma = params.gamma();
    let w = s.x_curr.axpy(params.alpha(), &(&s.x_curr - &s.x_prev));
    let y = p.f1.prox(gamma, &w)?;
    let arg = y.scale(2.0).axpy(-gamma, &p.h.gradient(&y)).axpy(-1.0, &w);
    let z = p.f2.prox(gamma, &arg)?;
    let x_next = w.zip_map(&z, |a, b| a + b).axpy(-1.0, &y);
    if !x_next.is_finite() {
        return Err(Error::NonFinite(format!("iterate x^{}", s.k + 1)));
    }
    Ok(DysState {
        x_prev: s.x_curr.clone(),
        x_curr: x_next,
        w,
        y,
        z,
        k: s.k + 1,
    })
}

/// Runs the iteration from `x^{-1} = x^0 = x0` until the stop rule fires.
pub fn solve(
    p: &CompositeObjective,
    params: &StepParams,
    x0: Tensor,
    stop: StopRule,
    hooks: &mut Hooks<'_>,
) -> Result<SolveOutput> {
    if !x0.is_finite() {
        return Err(Error::NonFinite("initial point".into()));
    }
    let start = Instant::now();
    let gamma = params.gamma();
    let a2g = params.alpha() * params.alpha() / (2.0 * gamma);

    let mut state = DysState::new(x0);
    let mut f_prev = p.value(&state.x_curr);
    let mut prev_dx = 0.0;
    let mut prev_y: Option<Tensor> = None;
    let mut trace = Vec::new();
    let mut elapsed = Vec::new();
    let mut reason = StopReason::MaxIterations;

    while state.k < stop.k_max {
        let next = dys_step(p, params, &state)?;
        let k = next.k;

        let h = energy::h_gamma(p, gamma, &next.y, &next.z, &next.x_curr);
        let h = match h {
            Value::Finite(v) if v.is_finite() => v,
            _ => {
                return Err(Error::NonFiniteEnergy { k, term: nonfinite_term(p, &next) });
            }
        };
        let theta = h + a2g * prev_dx * prev_dx;
        if !theta.is_finite() {
            return Err(Error::NonFiniteEnergy { k, term: "inertial term".into() });
        }
        let dx = next.x_curr.distance(&next.x_prev);
        let dy = prev_y.as_ref().map(|py| next.y.distance(py));
        let crit = criticality_residual(p, &next, gamma)?;
        let objective = p.value(&next.z);
        let denom = dx + prev_dx;
        let row = TraceRow {
            k,
            theta,
            h_gamma: h,
            dx_norm: dx,
            dy_norm: dy,
            yz_gap: next.y.distance(&next.z),
            crit_residual: crit,
            objective,
            psnr: hooks.quality.map(|q| q(&next.z)),
            kl_ratio: (denom > 0.0).then(|| crit / denom),
        };
        if let Some(sink) = hooks.sink.as_mut() {
            sink(&row);
        }
        trace.push(row);
        elapsed.push(start.elapsed().as_secs_f64());

        let done = match (f_prev, objective) {
            (Value::Finite(a), Value::Finite(b)) => (b - a).abs() / a.abs().max(1.0) < stop.eps,
            _ => false,
        };
        f_prev = objective;
        prev_dx = dx;
        prev_y = Some(next.y.clone());
        state = next;
        if done {
            reason = StopReason::Tolerance;
            break;
        }
    }
    log::debug!("solve finished after {} iterations ({:?})", state.k, reason);
    Ok(SolveOutput { state, trace, elapsed_s: elapsed, stop_reason: reason })
}

fn nonfinite_term(p: &CompositeObjective, s: &DysState) -> String {
    if !p.f1.value(&s.y).is_finite() {
        return p.f1.name().to_string();
    }
    if !p.f2.value(&s.z).is_finite() {
        return p.f2.name().to_string();
    }
    if !p.h.value(&s.y).is_finite() {
        return p.h.name().to_string();
    }
    "quadratic coupling".to_string()
}

fn check_denoiser(d: &GradStepDenoiser) -> Result<()> {
    if !(d.lipschitz() < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "denoiser Lipschitz constant must be below 1, got {}",
            d.lipschitz()
        )));
    }
    Ok(())
}

/// Smooth PnP variant: the `z`-line applies the denoiser,
/// `z = D_σ(2y − γ∇h(y) − w)`. The energy uses `f₂ = φ_σ/γ`.
pub fn solve_pnp_smooth(
    f: impl SmoothTerm + 'static,
    d: GradStepDenoiser,
    h: impl SmoothTerm + 'static,
    params: &StepParams,
    x0: Tensor,
    stop: StopRule,
    hooks: &mut Hooks<'_>,
) -> Result<SolveOutput> {
    check_denoiser(&d)?;
    let prior = DenoiserPrior::new(d, params.gamma(), DenoiserSlot::Second)?;
    let p = CompositeObjective::new(f, prior, h);
    solve(&p, params, x0, stop, hooks)
}

/// Nonsmooth PnP variant: the `y`-line applies the denoiser, `y = D_σ(w)`, and
/// `z = Prox_{γf}(2y − γ∇h(y) − w)`. The energy uses `f₁ = φ_σ/γ`; `params`
/// must carry the matching constants (see `pnp_nonsmooth_constants`).
pub fn solve_pnp_nonsmooth(
    f: impl ProxableTerm + 'static,
    d: GradStepDenoiser,
    h: impl SmoothTerm + 'static,
    params: &StepParams,
    x0: Tensor,
    stop: StopRule,
    hooks: &mut Hooks<'_>,
) -> Result<SolveOutput> {
    check_denoiser(&d)?;
    let prior = DenoiserPrior::new(d, params.gamma(), DenoiserSlot::First)?;
    let p = CompositeObjective::new(prior, f, h);
    solve(&p, params, x0, stop, hooks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::priors::{BoxIndicator, DiagonalQuadratic, L1Norm, LogCosh, Tikhonov};
    use crate::problem::Zero;
    use crate::stepsize::{default_params, Constants};

    fn t(v: &[f64]) -> Tensor {
        Tensor::from_vec(v.to_vec()).unwrap()
    }

    fn params(gamma: f64, alpha: f64) -> StepParams {
        StepParams::uncertified(gamma, alpha, Constants::new(1.0, 0.0, 0.0)).unwrap()
    }

    #[test]
    fn hand_computed_step() {
        let p = CompositeObjective::new(DiagonalQuadratic::isotropic(1.0, &[1]), Zero, Zero);
        let s = dys_step(&p, &params(0.5, 0.0), &DysState::new(t(&[1.0]))).unwrap();
        assert!((s.w.data()[0] - 1.0).abs() < 1e-15);
        assert!((s.y.data()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.z.data()[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((s.x_curr.data()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.k, 1);
        assert_eq!(s.x_prev, t(&[1.0]));
    }

    #[test]
    fn step_update_identity() {
        let p = CompositeObjective::new(
            DiagonalQuadratic::new(vec![1.0, -0.3], vec![0.5, 0.1]).unwrap(),
            BoxIndicator::new(-1.0, 1.0).unwrap(),
            LogCosh::new(0.4, vec![0.0, 0.2]).unwrap(),
        );
        let mut s = DysState::new(t(&[0.9, -2.0]));
        for _ in 0..5 {
            s = dys_step(&p, &params(0.4, 0.3), &s).unwrap();
            let expect = s.w.zip_map(&s.z, |a, b| a + b).axpy(-1.0, &s.y);
            assert_eq!(s.x_curr, expect);
        }
    }

    // Douglas–Rachford in its classical form: y = prox_f1(x), z = prox_f2(2y − x), x += z − y.
    fn drs_reference(
        f1: &dyn SmoothTerm,
        f2: &dyn ProxableTerm,
        gamma: f64,
        x0: &Tensor,
        iters: usize,
    ) -> Vec<Tensor> {
        let mut x = x0.clone();
        let mut out = Vec::new();
        for _ in 0..iters {
            let y = f1.prox(gamma, &x).unwrap();
            let r: Vec<f64> = y.data().iter().zip(x.data()).map(|(a, b)| 2.0 * a - b).collect();
            let z = f2.prox(gamma, &t(&r)).unwrap();
            let nx: Vec<f64> = (0..x.len()).map(|i| x.data()[i] + z.data()[i] - y.data()[i]).collect();
            x = t(&nx);
            out.push(x.clone());
        }
        out
    }

    #[test]
    fn reduces_to_douglas_rachford() {
        let f1 = DiagonalQuadratic::new(vec![2.0, 0.5], vec![1.0, -3.0]).unwrap();
        let f2 = L1Norm::new(0.7).unwrap();
        let reference = drs_reference(&f1, &f2, 0.3, &t(&[4.0, 4.0]), 100);
        let p = CompositeObjective::new(f1, f2, Zero);
        let mut s = DysState::new(t(&[4.0, 4.0]));
        for r in reference {
            s = dys_step(&p, &params(0.3, 0.0), &s).unwrap();
            assert!(s.x_curr.distance(&r) <= 1e-12);
        }
    }

    #[test]
    fn reduces_to_forward_backward() {
        let h = DiagonalQuadratic::new(vec![2.0, 0.5], vec![1.0, -3.0]).unwrap();
        let f2 = L1Norm::new(0.7).unwrap();
        let gamma = 0.3;
        let mut x = vec![4.0, -4.0];
        let p = CompositeObjective::new(Zero, f2, h);
        let h_ref = DiagonalQuadratic::new(vec![2.0, 0.5], vec![1.0, -3.0]).unwrap();
        let mut s = DysState::new(t(&x));
        for _ in 0..100 {
            let g = h_ref.gradient(&t(&x));
            let arg: Vec<f64> = (0..2).map(|i| x[i] - gamma * g.data()[i]).collect();
            // soft threshold at 0.7·γ
            x = arg.iter().map(|v| v.signum() * (v.abs() - 0.7 * gamma).max(0.0)).collect();
            s = dys_step(&p, &params(gamma, 0.0), &s).unwrap();
            assert!(s.x_curr.distance(&t(&x)) <= 1e-12);
        }
    }

    #[test]
    fn quadratic_converges() {
        // f1 = (3/2)(x − 2)², h = (1/2)x²: minimizer 1.5
        let f1 = DiagonalQuadratic::new(vec![3.0], vec![2.0]).unwrap();
        let h = Tikhonov::new(1.0);
        let p = CompositeObjective::new(f1, Zero, h);
        let params = default_params(3.0, 1.0, -3.0, 0.5).unwrap();
        let out = solve(&p, &params, t(&[-5.0]), StopRule::new(1e-14, 200).unwrap(), &mut Hooks::default()).unwrap();
        assert!((out.state.z.data()[0] - 1.5).abs() <= 1e-7);
        assert!(out.trace.len() <= 200);
    }

    #[test]
    fn optimal_start_stops_immediately() {
        // 1.5(x − 2)² + 0.5x² = 2(x − 1.5)² + 1.5, carried entirely by h so the
        // minimizer is also a fixed point of the iteration
        let h = DiagonalQuadratic::new(vec![4.0], vec![1.5]).unwrap();
        let p = CompositeObjective::new(Zero, Zero, h);
        let params = default_params(0.0, 4.0, 0.0, 0.5).unwrap();
        let out = solve(&p, &params, t(&[1.5]), StopRule::new(1e-8, 100).unwrap(), &mut Hooks::default()).unwrap();
        assert_eq!(out.state.k, 1);
        assert_eq!(out.stop_reason, StopReason::Tolerance);
    }

    #[test]
    fn trace_rows_and_sink() {
        let p = CompositeObjective::new(
            DiagonalQuadratic::new(vec![1.0, 2.0], vec![0.3, 0.8]).unwrap(),
            BoxIndicator::new(0.0, 0.5).unwrap(),
            Zero,
        );
        let params = default_params(2.0, 0.0, -1.0, 0.9).unwrap();
        let mut seen = Vec::new();
        let mut sink = |r: &TraceRow| seen.push(r.k);
        let mut hooks = Hooks { sink: Some(&mut sink), quality: None };
        let out = solve(&p, &params, t(&[3.0, -1.0]), StopRule::fixed(25), &mut hooks).unwrap();
        assert_eq!(out.trace.len(), 25);
        assert_eq!(seen, (1..=25).collect::<Vec<_>>());
        assert!(out.trace[0].dy_norm.is_none());
        assert!(out.trace[1..].iter().all(|r| r.dy_norm.is_some()));
        assert_eq!(out.elapsed_s.len(), 25);
    }

    #[test]
    fn fixed_point_is_stationary() {
        let p = CompositeObjective::new(
            DiagonalQuadratic::new(vec![1.0, 2.0], vec![0.3, 0.8]).unwrap(),
            BoxIndicator::new(0.0, 0.5).unwrap(),
            LogCosh::new(0.3, vec![0.1, 0.1]).unwrap(),
        );
        let params = default_params(2.0, 0.3, -1.0, 0.5).unwrap();
        let mut s = DysState::new(t(&[0.2, 0.2]));
        for _ in 0..3000 {
            s = dys_step(&p, &params, &s).unwrap();
        }
        let fixed = DysState { x_prev: s.x_curr.clone(), ..s.clone() };
        let mut u = fixed.clone();
        for _ in 0..10 {
            u = dys_step(&p, &params, &u).unwrap();
            assert!(u.x_curr.distance(&fixed.x_curr) <= 1e-14);
        }
        assert!(criticality_residual(&p, &u, params.gamma()).unwrap() <= 1e-10);
    }

    #[test]
    fn alpha_zero_matches_three_operator_form() {
        // x^{k+1} = x^k + Prox_{γf₂}(2 Prox_{γf₁}(x^k) − x^k − γ∇h(Prox_{γf₁}(x^k))) − Prox_{γf₁}(x^k)
        let f1 = DiagonalQuadratic::new(vec![1.0, -0.2], vec![0.5, 0.0]).unwrap();
        let f2 = BoxIndicator::new(-0.5, 0.7).unwrap();
        let h = LogCosh::new(0.5, vec![0.1, -0.1]).unwrap();
        let gamma = 0.4;
        let mut x = t(&[2.0, -1.0]);
        let mut s = DysState::new(x.clone());
        let p = CompositeObjective::new(f1.clone(), f2, h.clone());
        for _ in 0..50 {
            let y = f1.prox(gamma, &x).unwrap();
            let gh = h.gradient(&y);
            let r: Vec<f64> = (0..2).map(|i| 2.0 * y.data()[i] - x.data()[i] - gamma * gh.data()[i]).collect();
            let z = t(&r).clip(-0.5, 0.7);
            x = t(&(0..2).map(|i| x.data()[i] + z.data()[i] - y.data()[i]).collect::<Vec<_>>());
            s = dys_step(&p, &params(gamma, 0.0), &s).unwrap();
            assert!(s.x_curr.distance(&x) <= 1e-15);
        }
    }

    #[test]
    fn pnp_nonsmooth_identity_denoiser() {
        use crate::priors::linear_denoiser;
        use crate::tensor::CirculantOperator;
        // D = identity ⇒ y = w; z = clip(2y − γ∇h(y) − w)
        let d = linear_denoiser(0.5, &CirculantOperator::identity(1, 2), 1.0).unwrap();
        let h = DiagonalQuadratic::new(vec![1.0, 3.0], vec![0.9, -0.4]).unwrap();
        let gamma = 0.1;
        let params = StepParams::certified(gamma, 0.0, Constants::new(0.0, 3.0, 0.0)).unwrap();
        let out = solve_pnp_nonsmooth(
            BoxIndicator::new(0.0, 1.0).unwrap(),
            d,
            h.clone(),
            &params,
            t(&[0.5, 0.5]),
            StopRule::fixed(40),
            &mut Hooks::default(),
        )
        .unwrap();
        let mut x = t(&[0.5, 0.5]);
        for _ in 0..40 {
            let y = x.clone();
            let gh = h.gradient(&y);
            let z = t(&(0..2).map(|i| y.data()[i] - gamma * gh.data()[i]).collect::<Vec<_>>()).clip(0.0, 1.0);
            x = t(&(0..2).map(|i| x.data()[i] + z.data()[i] - y.data()[i]).collect::<Vec<_>>());
        }
        assert!(out.state.x_curr.distance(&x) <= 1e-12);
    }

    #[test]
    fn rejects_nonfinite_start() {
        let p = CompositeObjective::new(Zero, Zero, Zero);
        let mut x = Tensor::zeros(&[2]);
        x.data_mut()[0] = f64::NAN;
        assert!(solve(&p, &params(1.0, 0.0), x, StopRule::default(), &mut Hooks::default()).is_err());
    }
}
