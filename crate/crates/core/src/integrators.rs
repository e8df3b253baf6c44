//! Time integration for the semidiscrete linear systems
//! `dc/dt = A c + f(t)`.
//!
//! Three one-step Runge-Kutta schemes (explicit Euler, implicit Euler, and
//! the implicit trapezoidal rule) cover the marching runs; an exponential
//! stepper based on a truncated-Taylor `exp(hA)v` action gives near-exact
//! sub-problem solves for the splitting schemes; and a dense
//! scaling-and-squaring Pade exponential serves as the reference evolver
//! that every scheme is judged against.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::{FaceFlux, StructuredGrid};
use crate::linalg::DirectSolver;
use crate::operator::LinearOperator;

/// Time-dependent affine forcing `f(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Forcing {
    Zero,
    Constant(DVector<f64>),
    /// Rectangular source pulses: each rate vector is active for `t <= until`.
    Pulses(Vec<Pulse>),
    /// Piecewise-linear interpolation of stored samples (frozen splitting
    /// iterates, evaluated at inner step nodes).
    Sampled(SampledSeries),
    Sum(Vec<Forcing>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pulse {
    pub rate: DVector<f64>,
    pub until: f64,
}

/// Uniformly sampled time series with linear interpolation, clamped at the
/// ends.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSeries {
    pub t0: f64,
    pub dt: f64,
    pub samples: Vec<DVector<f64>>,
}

impl SampledSeries {
    fn eval_add(&self, t: f64, out: &mut DVector<f64>) {
        let last = self.samples.len() - 1;
        let s = ((t - self.t0) / self.dt).clamp(0.0, last as f64);
        let i = (s.floor() as usize).min(last.saturating_sub(1));
        if self.samples.len() == 1 {
            out.axpy(1.0, &self.samples[0], 1.0);
            return;
        }
        let w = s - i as f64;
        out.axpy(1.0 - w, &self.samples[i], 1.0);
        out.axpy(w, &self.samples[i + 1], 1.0);
    }
}

impl Forcing {
    pub fn is_zero(&self) -> bool {
        match self {
            Forcing::Zero => true,
            Forcing::Constant(v) => v.iter().all(|x| *x == 0.0),
            Forcing::Pulses(p) => p.is_empty(),
            Forcing::Sampled(_) => false,
            Forcing::Sum(fs) => fs.iter().all(|f| f.is_zero()),
        }
    }

    fn eval_add(&self, t: f64, out: &mut DVector<f64>) {
        match self {
            Forcing::Zero => {}
            Forcing::Constant(v) => out.axpy(1.0, v, 1.0),
            Forcing::Pulses(pulses) => {
                for p in pulses {
                    if t <= p.until {
                        out.axpy(1.0, &p.rate, 1.0);
                    }
                }
            }
            Forcing::Sampled(series) => series.eval_add(t, out),
            Forcing::Sum(fs) => {
                for f in fs {
                    f.eval_add(t, out);
                }
            }
        }
    }

    pub fn eval(&self, t: f64, n: usize) -> DVector<f64> {
        let mut out = DVector::zeros(n);
        self.eval_add(t, &mut out);
        out
    }
}

/// One-step scheme selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    ExplicitEuler,
    ImplicitEuler,
    /// Crank-Nicolson; the implicit trapezoidal Butcher tableau.
    ImplicitTrapezoidal,
    /// Exact linear propagation with linear-in-time forcing, via the
    /// truncated-Taylor exponential action.
    Exponential,
}

/// Stepper configuration: scheme, step size, optional Courant cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub cfl_max: Option<f64>,
}

impl StepperConfig {
    pub fn new(scheme: Scheme, dt: f64) -> Self {
        StepperConfig {
            scheme,
            dt,
            cfl_max: None,
        }
    }

    pub fn with_cfl(mut self, cfl_max: f64) -> Self {
        self.cfl_max = Some(cfl_max);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::invalid(format!(
                "step size must be > 0, got {}",
                self.dt
            )));
        }
        if let Some(c) = self.cfl_max
            && !(c > 0.0)
        {
            return Err(Error::invalid(format!("cfl_max must be > 0, got {c}")));
        }
        Ok(())
    }
}

/// Linear initial-value problem `dc/dt = A c + f(t)` on `[t0, t_end]`.
#[derive(Debug, Clone)]
pub struct LinearIvp {
    pub operator: LinearOperator,
    pub forcing: Forcing,
    pub initial: DVector<f64>,
    pub t0: f64,
    pub t_end: f64,
}

impl LinearIvp {
    pub fn validate(&self) -> Result<()> {
        if self.operator.dim() != self.initial.len() {
            return Err(Error::dim(format!(
                "operator dimension {} vs state {}",
                self.operator.dim(),
                self.initial.len()
            )));
        }
        Ok(())
    }
}

/// Stepper with a cached implicit factorization, reused while the step size
/// stays fixed.
pub struct CachedStepper<'a> {
    op: &'a LinearOperator,
    scheme: Scheme,
    factor: Option<(f64, DirectSolver)>,
}

impl<'a> CachedStepper<'a> {
    pub fn new(op: &'a LinearOperator, scheme: Scheme) -> Self {
        CachedStepper {
            op,
            scheme,
            factor: None,
        }
    }

    fn solver(&mut self, dt: f64, theta: f64, t: f64) -> Result<&DirectSolver> {
        // step sizes that differ only by accumulated rounding share the
        // factorization
        let stale = match &self.factor {
            Some((cached_dt, _)) => (cached_dt - dt).abs() > 1e-12 * dt.abs(),
            None => true,
        };
        if stale {
            let system = self.op.identity_plus_scaled(-theta * dt);
            let solver = DirectSolver::factor(&system)
                .map_err(|e| Error::LinearSolve(format!("implicit step at t={t}, dt={dt}: {e}")))?;
            self.factor = Some((dt, solver));
        }
        Ok(&self.factor.as_ref().unwrap().1)
    }

    /// Advance `state` from `t` by `dt`.
    pub fn step(
        &mut self,
        state: &DVector<f64>,
        t: f64,
        dt: f64,
        forcing: &Forcing,
    ) -> Result<DVector<f64>> {
        let n = self.op.dim();
        if state.len() != n {
            return Err(Error::dim(format!(
                "state length {} vs operator dimension {n}",
                state.len()
            )));
        }
        match self.scheme {
            Scheme::ExplicitEuler => {
                let mut rhs = forcing.eval(t, n);
                self.op
                    .apply_scaled_add(1.0, state.as_slice(), rhs.as_mut_slice());
                Ok(state + dt * rhs)
            }
            Scheme::ImplicitEuler => {
                let mut rhs = forcing.eval(t + dt, n);
                rhs *= dt;
                rhs += state;
                self.solver(dt, 1.0, t)?.solve(&rhs)
            }
            Scheme::ImplicitTrapezoidal => {
                let mut rhs = forcing.eval(t, n);
                rhs.axpy(1.0, &forcing.eval(t + dt, n), 1.0);
                rhs *= 0.5 * dt;
                rhs += state;
                self.op
                    .apply_scaled_add(0.5 * dt, state.as_slice(), rhs.as_mut_slice());
                self.solver(dt, 0.5, t)?.solve(&rhs)
            }
            Scheme::Exponential => {
                let f0 = forcing.eval(t, n);
                let f1 = forcing.eval(t + dt, n);
                Ok(expmv_linear_forcing(self.op, state, Some((&f0, &f1)), dt))
            }
        }
    }
}

/// Single step of the configured scheme; see [`CachedStepper`] for marching.
pub fn step(
    ivp: &LinearIvp,
    state: &DVector<f64>,
    t: f64,
    config: &StepperConfig,
) -> Result<DVector<f64>> {
    config.validate()?;
    CachedStepper::new(&ivp.operator, config.scheme).step(state, t, config.dt, &ivp.forcing)
}

/// States recorded by a marching run, one per accepted step.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn final_state(&self) -> &DVector<f64> {
        self.states
            .last()
            .expect("trajectory holds the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap()
    }
}

/// March `n_steps`, capping each step so `max_j nu_j tau / V_j <= cfl_max`
/// when a Courant bound is configured.
pub fn controlled_march(
    ivp: &LinearIvp,
    config: &StepperConfig,
    fluxes: Option<&FaceFlux>,
    grid: Option<&StructuredGrid>,
    n_steps: usize,
) -> Result<Trajectory> {
    ivp.validate()?;
    config.validate()?;
    let cap = match config.cfl_max {
        None => f64::INFINITY,
        Some(cfl) => {
            let (fluxes, grid) = match (fluxes, grid) {
                (Some(f), Some(g)) => (f, g),
                _ => {
                    return Err(Error::invalid(
                        "cfl_max requires face fluxes and a grid for step control",
                    ));
                }
            };
            let rate = fluxes.max_rate(grid);
            if rate > 0.0 {
                cfl / rate
            } else {
                f64::INFINITY
            }
        }
    };
    let horizon = (ivp.t_end - ivp.t0).abs().max(config.dt * n_steps as f64);
    let tau = config.dt.min(cap);
    if tau < 1e-12 * horizon {
        return Err(Error::StepControl(format!(
            "step size {tau:.3e} underflows the horizon {horizon:.3e}"
        )));
    }

    let mut stepper = CachedStepper::new(&ivp.operator, config.scheme);
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut t = ivp.t0;
    let mut state = ivp.initial.clone();
    times.push(t);
    states.push(state.clone());
    for _ in 0..n_steps {
        state = stepper.step(&state, t, tau, &ivp.forcing)?;
        t += tau;
        times.push(t);
        states.push(state.clone());
    }
    Ok(Trajectory { times, states })
}

// Pade (6,6) numerator coefficients for the matrix exponential.
const PADE6: [f64; 7] = [
    1.0,
    1.0 / 2.0,
    5.0 / 44.0,
    1.0 / 66.0,
    1.0 / 792.0,
    1.0 / 15840.0,
    1.0 / 665280.0,
];

/// Dense `exp(t A)` by scaling and squaring with a diagonal Pade
/// approximant, scaled so the reduced norm is at most 1/2.
pub fn matrix_exponential(op: &LinearOperator, t: f64) -> Result<DMatrix<f64>> {
    let n = op.dim();
    if n > crate::linalg::DENSE_SOLVE_LIMIT {
        return Err(Error::invalid(format!(
            "dense matrix exponential limited to dimension {}, got {n}",
            crate::linalg::DENSE_SOLVE_LIMIT
        )));
    }
    let mut b = op.to_dense() * t;
    let norm = b
        .row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    b /= f64::powi(2.0, squarings as i32);

    let b2 = &b * &b;
    let b4 = &b2 * &b2;
    let b6 = &b2 * &b4;
    let id = DMatrix::<f64>::identity(n, n);
    let even = &id * PADE6[0] + &b2 * PADE6[2] + &b4 * PADE6[4] + &b6 * PADE6[6];
    let odd = &b * (&id * PADE6[1] + &b2 * PADE6[3] + &b4 * PADE6[5]);
    let numer = &even + &odd;
    let denom = &even - &odd;
    let mut result = nalgebra::linalg::LU::new(denom)
        .solve(&numer)
        .ok_or_else(|| Error::LinearSolve("singular Pade denominator".into()))?;
    for _ in 0..squarings {
        result = &result * &result;
    }
    Ok(result)
}

/// `exp(t A) v` through the dense exponential; the splitting-error oracle.
pub fn matrix_exponential_apply(
    op: &LinearOperator,
    v: &DVector<f64>,
    t: f64,
) -> Result<DVector<f64>> {
    if v.len() != op.dim() {
        return Err(Error::dim(format!(
            "vector length {} vs operator dimension {}",
            v.len(),
            op.dim()
        )));
    }
    Ok(matrix_exponential(op, t)? * v)
}

/// Exponential propagation of one linear step with linear-in-time forcing:
///
/// `y = exp(h A) x + integral_0^h exp((h-s) A) (f0 + (s/h)(f1 - f0)) ds`
///
/// evaluated by a segmented truncated-Taylor recurrence on the augmented
/// system; segments keep the scaled operator norm at most 1/2.
pub fn expmv_linear_forcing(
    op: &LinearOperator,
    x: &DVector<f64>,
    forcing: Option<(&DVector<f64>, &DVector<f64>)>,
    h: f64,
) -> DVector<f64> {
    let n = op.dim();
    assert_eq!(x.len(), n, "state length vs operator dimension");
    if h == 0.0 {
        return x.clone();
    }
    let (f0, slope) = match forcing {
        Some((f0, f1)) => (f0.clone(), (f1 - f0) / h),
        None => (DVector::zeros(n), DVector::zeros(n)),
    };

    let segments = ((h * op.norm_inf() / 0.5).ceil() as usize).max(1);
    let hs = h / segments as f64;

    let mut y = x.clone();
    let mut term = DVector::<f64>::zeros(n);
    let mut next = DVector::<f64>::zeros(n);
    for seg in 0..segments {
        let s0 = seg as f64 * hs;
        // forcing at segment start; slope carries through unchanged
        let mut f_seg = f0.clone();
        f_seg.axpy(s0, &slope, 1.0);

        // augmented Taylor recurrence on (x, u, w):
        //   x' = A x + u * slope + w * f_seg,  u' = w,  w' = 0
        // with u(0) = 0, w(0) = 1
        term.copy_from(&y);
        let mut term_u = 0.0f64;
        let mut term_w = 1.0f64;
        let mut acc = y.clone();
        for k in 1..=120usize {
            let scale = hs / k as f64;
            op.apply_into(term.as_slice(), next.as_mut_slice());
            next.axpy(term_u, &slope, 1.0);
            next.axpy(term_w, &f_seg, 1.0);
            next *= scale;
            let next_u = scale * term_w;
            std::mem::swap(&mut term, &mut next);
            term_u = next_u;
            term_w = 0.0;
            acc += &term;
            let tol = 1e-16 * acc.amax().max(f64::MIN_POSITIVE);
            if term.amax() <= tol && k >= 2 {
                break;
            }
        }
        y = acc;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::VelocityField;
    use crate::grid::{BoundarySpec, Rectangle, build_grid, face_fluxes};
    use crate::operator::{LinearOperator, OperatorRole};
    use nalgebra::dvector;

    fn scalar_op(a: f64) -> LinearOperator {
        LinearOperator::from_dense(&DMatrix::from_element(1, 1, a), OperatorRole::Stiffness)
    }

    fn ivp(op: LinearOperator, c0: DVector<f64>) -> LinearIvp {
        LinearIvp {
            operator: op,
            forcing: Forcing::Zero,
            initial: c0,
            t0: 0.0,
            t_end: 1.0,
        }
    }

    #[test]
    fn trapezoidal_scalar_closed_form() {
        let problem = ivp(scalar_op(-1.0), dvector![1.0]);
        let out = step(
            &problem,
            &problem.initial,
            0.0,
            &StepperConfig::new(Scheme::ImplicitTrapezoidal, 0.1),
        )
        .unwrap();
        assert!((out[0] - 19.0 / 21.0).abs() < 1e-15);
    }

    #[test]
    fn explicit_euler_scalar() {
        let problem = ivp(scalar_op(-1.0), dvector![1.0]);
        let out = step(
            &problem,
            &problem.initial,
            0.0,
            &StepperConfig::new(Scheme::ExplicitEuler, 0.1),
        )
        .unwrap();
        assert_eq!(out[0], 0.9);
    }

    #[test]
    fn constant_forcing_is_quadrature_for_all_schemes() {
        for scheme in [
            Scheme::ExplicitEuler,
            Scheme::ImplicitEuler,
            Scheme::ImplicitTrapezoidal,
            Scheme::Exponential,
        ] {
            let problem = LinearIvp {
                operator: LinearOperator::zero(2, OperatorRole::Stiffness),
                forcing: Forcing::Constant(dvector![2.0, -1.0]),
                initial: dvector![1.0, 1.0],
                t0: 0.0,
                t_end: 1.0,
            };
            let out = step(
                &problem,
                &problem.initial,
                0.0,
                &StepperConfig::new(scheme, 0.25),
            )
            .unwrap();
            assert!(
                (out[0] - 1.5).abs() < 1e-14 && (out[1] - 0.75).abs() < 1e-14,
                "{scheme:?}: {out:?}"
            );
        }
    }

    #[test]
    fn a_stability_probe() {
        for scheme in [Scheme::ImplicitEuler, Scheme::ImplicitTrapezoidal] {
            let problem = ivp(scalar_op(-1.0e6), dvector![1.0]);
            let out = step(
                &problem,
                &problem.initial,
                0.0,
                &StepperConfig::new(scheme, 1.0),
            )
            .unwrap();
            assert!(out[0].abs() <= 1.0, "{scheme:?} amplified: {}", out[0]);
        }
    }

    #[test]
    fn matrix_exponential_of_zero_is_identity() {
        let op = LinearOperator::zero(3, OperatorRole::Stiffness);
        let v = dvector![1.0, -2.0, 0.5];
        assert_eq!(matrix_exponential_apply(&op, &v, 7.0).unwrap(), v);
    }

    #[test]
    fn matrix_exponential_symmetric_exchange() {
        // A = [[-1,1],[1,-1]]: exp(tA)(1,0) = ((1+e^{-2t})/2, (1-e^{-2t})/2)
        let op = LinearOperator::from_dense(
            &DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]),
            OperatorRole::ExchangeImmobile,
        );
        let v = dvector![1.0, 0.0];
        let at_one = matrix_exponential_apply(&op, &v, 1.0).unwrap();
        let e2 = (-2.0f64).exp();
        assert!((at_one[0] - 0.5 * (1.0 + e2)).abs() < 1e-14);
        assert!((at_one[1] - 0.5 * (1.0 - e2)).abs() < 1e-14);
        let settled = matrix_exponential_apply(&op, &v, 50.0).unwrap();
        assert!((settled[0] - 0.5).abs() < 1e-13 && (settled[1] - 0.5).abs() < 1e-13);
    }

    #[test]
    fn matrix_exponential_nilpotent() {
        let op = LinearOperator::from_dense(
            &DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            OperatorRole::Reaction,
        );
        let out = matrix_exponential_apply(&op, &dvector![0.0, 1.0], 1.0).unwrap();
        assert!((out[0] - 1.0).abs() < 1e-15 && (out[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn expmv_matches_dense_exponential() {
        let m = DMatrix::from_row_slice(3, 3, &[-2.0, 1.0, 0.3, 0.5, -1.5, 0.2, 0.0, 0.7, -3.0]);
        let op = LinearOperator::from_dense(&m, OperatorRole::FullBlock);
        let v = dvector![1.0, -1.0, 2.0];
        for &t in &[0.1, 1.0, 6.0] {
            let dense = matrix_exponential_apply(&op, &v, t).unwrap();
            let taylor = expmv_linear_forcing(&op, &v, None, t);
            assert!((dense - taylor).amax() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn expmv_linear_forcing_quadrature() {
        // A = 0, f(s) = (1 + s): integral over [0, h] is h + h^2/2
        let op = LinearOperator::zero(1, OperatorRole::Stiffness);
        let f0 = dvector![1.0];
        let f1 = dvector![3.0];
        let h = 2.0;
        let y = expmv_linear_forcing(&op, &dvector![0.0], Some((&f0, &f1)), h);
        assert!((y[0] - (h + h * h / 2.0)).abs() < 1e-14);
    }

    #[test]
    fn cached_stepper_reuses_factorization() {
        let op = scalar_op(-2.0);
        let mut stepper = CachedStepper::new(&op, Scheme::ImplicitEuler);
        let mut c = dvector![1.0];
        for k in 0..3 {
            c = stepper
                .step(&c, 0.1 * k as f64, 0.1, &Forcing::Zero)
                .unwrap();
        }
        assert!((c[0] - 1.0 / 1.2f64.powi(3)).abs() < 1e-14);
    }

    #[test]
    fn march_respects_cfl_cap() {
        let g = build_grid(
            64,
            64,
            &Rectangle::new(0.0, 100.0, 0.0, 100.0),
            BoundarySpec::closed(),
        )
        .unwrap();
        let f = face_fluxes(&g, &VelocityField::constant(0.0, 4.0e-3)).unwrap();
        let n = g.n_cells();
        let problem = LinearIvp {
            operator: LinearOperator::zero(n, OperatorRole::Stiffness),
            forcing: Forcing::Zero,
            initial: DVector::zeros(n),
            t0: 0.0,
            t_end: 2000.0,
        };
        let config = StepperConfig::new(Scheme::ExplicitEuler, 500.0).with_cfl(1.0);
        let traj = controlled_march(&problem, &config, Some(&f), Some(&g), 2).unwrap();
        let tau = traj.times[1] - traj.times[0];
        assert!((tau - 390.625).abs() < 1e-9, "capped step {tau}");
    }

    #[test]
    fn march_without_cap_uses_dt() {
        let problem = ivp(scalar_op(-1.0), dvector![1.0]);
        let config = StepperConfig::new(Scheme::ImplicitTrapezoidal, 0.25);
        let traj = controlled_march(&problem, &config, None, None, 4).unwrap();
        assert_eq!(traj.times.len(), 5);
        assert!((traj.final_time() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn march_zero_steps_returns_initial() {
        let problem = ivp(scalar_op(-1.0), dvector![3.0]);
        let traj = controlled_march(
            &problem,
            &StepperConfig::new(Scheme::ExplicitEuler, 0.1),
            None,
            None,
            0,
        )
        .unwrap();
        assert_eq!(traj.states.len(), 1);
        assert_eq!(traj.final_state()[0], 3.0);
    }

    #[test]
    fn cfl_without_grid_is_an_error() {
        let problem = ivp(scalar_op(-1.0), dvector![1.0]);
        let config = StepperConfig::new(Scheme::ExplicitEuler, 0.1).with_cfl(1.0);
        assert!(controlled_march(&problem, &config, None, None, 1).is_err());
    }

    #[test]
    fn pulse_forcing_switches_off() {
        let f = Forcing::Pulses(vec![Pulse {
            rate: dvector![2.0],
            until: 10.0,
        }]);
        assert_eq!(f.eval(10.0, 1)[0], 2.0);
        assert_eq!(f.eval(10.5, 1)[0], 0.0);
    }

    #[test]
    fn singular_implicit_system_reports_step_context() {
        // (I - tau A) = 0 for A = I / tau
        let op = LinearOperator::identity(1).scale(10.0);
        let problem = ivp(op, dvector![1.0]);
        let err = step(
            &problem,
            &problem.initial,
            0.0,
            &StepperConfig::new(Scheme::ImplicitEuler, 0.1),
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("t=0") && msg.contains("dt=0.1"), "{msg}");
    }

    #[test]
    fn step_underflow_is_a_control_failure() {
        let g = build_grid(
            2,
            2,
            &Rectangle::new(0.0, 1.0, 0.0, 1.0),
            BoundarySpec::closed(),
        )
        .unwrap();
        let f = face_fluxes(&g, &VelocityField::constant(1.0e14, 0.0)).unwrap();
        let problem = LinearIvp {
            operator: LinearOperator::zero(4, OperatorRole::Stiffness),
            forcing: Forcing::Zero,
            initial: DVector::zeros(4),
            t0: 0.0,
            t_end: 100.0,
        };
        let config = StepperConfig::new(Scheme::ExplicitEuler, 1.0).with_cfl(1.0);
        let err = controlled_march(&problem, &config, Some(&f), Some(&g), 3).unwrap_err();
        assert!(matches!(err, Error::StepControl(_)), "{err}");
    }

    #[test]
    fn sampled_series_interpolates() {
        let series = SampledSeries {
            t0: 0.0,
            dt: 1.0,
            samples: vec![dvector![0.0], dvector![2.0], dvector![4.0]],
        };
        let f = Forcing::Sampled(series);
        assert_eq!(f.eval(0.5, 1)[0], 1.0);
        assert_eq!(f.eval(1.75, 1)[0], 3.5);
        assert_eq!(f.eval(5.0, 1)[0], 4.0, "clamped beyond the last sample");
    }
}
