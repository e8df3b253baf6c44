//! Packaged experiments: the two-phase splitting benchmark with explicit
//! matrices, the layered field-scale transport run, and a convergence-order
//! harness judging schemes against the dense matrix-exponential reference.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::flow::VelocityField;
use crate::grid::{BoundarySpec, Rectangle, StructuredGrid, build_grid, face_fluxes};
use crate::integrators::{
    Forcing, Scheme, StepperConfig, expmv_linear_forcing, matrix_exponential_apply,
};
use crate::operator::{LinearOperator, OperatorBuilder, OperatorRole};
use crate::phases::{
    ModelParams, PhaseState, SourceSpec, assemble_block_operator, decay_embedded,
    mobile_transport_embedded, source_forcing, split_block_operator,
};
use crate::splitting::{
    IterationSide, SplitConfig, SplitScheme, algorithm1_march, iterative_split, one_side_split,
};
use crate::transport::{BoundaryValues, assemble_mobile_transport};

/// One error measurement: a scheme at an iteration count or step size.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub scheme: String,
    pub k: Option<usize>,
    pub tau: Option<f64>,
    pub linf: f64,
    pub l2: f64,
}

/// Least-squares order fit over a step-size sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderFit {
    pub slope: f64,
    /// RMS deviation of the log-log fit.
    pub residual: f64,
    pub taus: Vec<f64>,
}

/// Error table plus derived verdicts.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorReport {
    pub rows: Vec<ErrorRow>,
    pub order: Option<OrderFit>,
    /// Max-norm disagreement of the two independent reference routes.
    pub reference_check: f64,
    /// Informational: final one-side-B error at most the one-side-A error.
    pub side_b_beats_side_a: Option<bool>,
    /// Iterative errors strictly decreasing in the iteration count.
    pub iterative_monotone: Option<bool>,
}

/// Two-phase mobile/immobile benchmark with explicit matrices:
/// two species with a decay chain, one spatial dimension, exchange rate `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhaseBenchmark {
    /// Spatial points per block (state dimension is 4 I).
    pub points: usize,
    pub diffusion: f64,
    pub velocity: f64,
    pub dx: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub exchange: f64,
    /// Initial 4I-state; a smooth two-bump profile when absent.
    pub initial: Option<DVector<f64>>,
    pub tau: f64,
    pub k_max: usize,
    pub n_steps: usize,
    /// Inner sampling nodes per splitting step for the exponential
    /// sub-problem solves.
    pub inner_nodes: usize,
}

impl Default for TwoPhaseBenchmark {
    fn default() -> Self {
        TwoPhaseBenchmark {
            points: 50,
            diffusion: 1.0,
            velocity: 1.0,
            dx: 1.0,
            lambda1: 0.25e-3,
            lambda2: 0.5e-3,
            exchange: 0.01,
            initial: None,
            tau: 20.0,
            k_max: 6,
            n_steps: 1,
            inner_nodes: 400,
        }
    }
}

/// The benchmark operators: `full = transport + decay + exchange`,
/// recombining entry-exactly.
#[derive(Debug, Clone)]
pub struct TwoPhaseSystem {
    pub full: LinearOperator,
    /// Block-diagonal convection-diffusion on the two mobile blocks.
    pub transport: LinearOperator,
    /// Decay-chain blocks.
    pub decay: LinearOperator,
    /// Mobile/immobile exchange blocks.
    pub exchange: LinearOperator,
}

/// Assemble the benchmark block system. Block order:
/// `(c1, c2, c1_im, c2_im)`, each of length `I`.
pub fn build_two_phase_system(bench: &TwoPhaseBenchmark) -> Result<TwoPhaseSystem> {
    let i = bench.points;
    if i < 2 {
        return Err(Error::invalid(format!(
            "two-phase benchmark needs at least 2 points, got {i}"
        )));
    }
    for (name, v) in [
        ("lambda1", bench.lambda1),
        ("lambda2", bench.lambda2),
        ("exchange", bench.exchange),
        ("diffusion", bench.diffusion),
    ] {
        if v < 0.0 {
            return Err(Error::invalid(format!("{name} must be >= 0, got {v}")));
        }
    }
    let n = 4 * i;

    // A = D/dx^2 tridiag(1,-2,1) + upwind convection (v >= 0 assumed,
    // conservative donor-cell sign convention)
    let mut a = OperatorBuilder::new(i, OperatorRole::Stiffness);
    let dd = bench.diffusion / (bench.dx * bench.dx);
    let vv = bench.velocity / bench.dx;
    for j in 0..i {
        a.add(j, j, -2.0 * dd - vv);
        if j > 0 {
            a.add(j, j - 1, dd + vv);
        }
        if j + 1 < i {
            a.add(j, j + 1, dd);
        }
    }
    let a = a.build();

    let mut transport = OperatorBuilder::new(n, OperatorRole::Stiffness);
    for block in 0..2 {
        for (r, c, v) in a.entries() {
            transport.add(block * i + r, block * i + c, v);
        }
    }
    let transport = transport.build();

    let mut decay = OperatorBuilder::new(n, OperatorRole::Reaction);
    for j in 0..i {
        // mobile pair
        decay.add(j, j, -bench.lambda1);
        decay.add(i + j, j, bench.lambda1);
        decay.add(i + j, i + j, -bench.lambda2);
        // immobile pair
        decay.add(2 * i + j, 2 * i + j, -bench.lambda1);
        decay.add(3 * i + j, 2 * i + j, bench.lambda1);
        decay.add(3 * i + j, 3 * i + j, -bench.lambda2);
    }
    let decay = decay.build();

    let mut exchange = OperatorBuilder::new(n, OperatorRole::ExchangeImmobile);
    let g = bench.exchange;
    for j in 0..i {
        for block in 0..2 {
            let mob = block * i + j;
            let imm = (2 + block) * i + j;
            exchange.add(mob, mob, -g);
            exchange.add(mob, imm, g);
            exchange.add(imm, mob, g);
            exchange.add(imm, imm, -g);
        }
    }
    let exchange = exchange.build();

    let full = transport
        .add(&decay)?
        .add(&exchange)?
        .with_role(OperatorRole::FullBlock);
    Ok(TwoPhaseSystem {
        full,
        transport,
        decay,
        exchange,
    })
}

fn two_phase_default_initial(bench: &TwoPhaseBenchmark) -> DVector<f64> {
    let i = bench.points;
    let length = i as f64 * bench.dx;
    let mut c0 = DVector::zeros(4 * i);
    for j in 0..i {
        let x = (j as f64 + 0.5) * bench.dx;
        let bump = |center: f64| (-((x - center) / (0.12 * length)).powi(2)).exp();
        c0[j] = bump(0.3 * length);
        c0[i + j] = 0.5 * bump(0.55 * length);
    }
    c0
}

/// Run the one-side and iterative schemes for `k = 1..=k_max` solves each
/// and report max-norm and volume-weighted L2 errors against the dense
/// matrix-exponential reference.
pub fn run_two_phase_comparison(bench: &TwoPhaseBenchmark) -> Result<ErrorReport> {
    let system = build_two_phase_system(bench)?;
    let n = system.full.dim();
    if n > 2000 {
        return Err(Error::Config(format!(
            "two-phase reference needs a dense exponential; dimension {n} exceeds 2000"
        )));
    }
    if bench.k_max == 0 || bench.n_steps == 0 || bench.inner_nodes == 0 {
        return Err(Error::Config(
            "k_max, n_steps, and inner_nodes must be positive".into(),
        ));
    }
    let c0 = match &bench.initial {
        Some(c) => {
            if c.len() != n {
                return Err(Error::dim(format!(
                    "initial state of length {} for dimension {n}",
                    c.len()
                )));
            }
            c.clone()
        }
        None => two_phase_default_initial(bench),
    };

    let t_end = bench.tau * bench.n_steps as f64;
    let reference = matrix_exponential_apply(&system.full, &c0, t_end)?;
    // independent route: segmented-Taylor exponential action
    let taylor = expmv_linear_forcing(&system.full, &c0, None, t_end);
    let reference_check = (&reference - &taylor).amax();

    let a1 = &system.transport;
    let a2 = system.decay.add(&system.exchange)?;
    let inner = StepperConfig::new(Scheme::Exponential, bench.tau / bench.inner_nodes as f64);

    let l2_weight = bench.dx.sqrt();
    let mut rows = Vec::new();
    let mut final_errors = [0.0f64; 3];
    for (si, scheme) in ["one_side_a", "one_side_b", "iterative"].iter().enumerate() {
        for k in 1..=bench.k_max {
            let mut c = c0.clone();
            let mut t = 0.0;
            for _ in 0..bench.n_steps {
                c = match si {
                    0 => one_side_split(a1, &a2, IterationSide::A, &c, t, bench.tau, k, &inner)?,
                    1 => one_side_split(a1, &a2, IterationSide::B, &c, t, bench.tau, k, &inner)?,
                    _ => iterative_split(a1, &a2, &c, t, bench.tau, k, &inner)?,
                };
                t += bench.tau;
            }
            let diff = &c - &reference;
            let linf = diff.amax();
            let l2 = diff.norm() * l2_weight;
            if k == bench.k_max {
                final_errors[si] = linf;
            }
            rows.push(ErrorRow {
                scheme: scheme.to_string(),
                k: Some(k),
                tau: Some(bench.tau),
                linf,
                l2,
            });
        }
    }

    let iterative: Vec<f64> = rows
        .iter()
        .filter(|r| r.scheme == "iterative")
        .map(|r| r.linf)
        .collect();
    let monotone = iterative.windows(2).all(|w| w[1] < w[0]);

    Ok(ErrorReport {
        rows,
        order: None,
        reference_check,
        side_b_beats_side_a: Some(final_errors[1] <= final_errors[0]),
        iterative_monotone: Some(monotone),
    })
}

/// Horizontal band with one diffusivity.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub y_min: f64,
    pub y_max: f64,
    pub diffusivity: f64,
}

/// Field-scale layered transport scenario. An empty layer list falls back
/// to the per-species diffusion coefficients of the model parameters.
#[derive(Debug, Clone)]
pub struct LayeredScenario {
    pub grid: StructuredGrid,
    pub params: ModelParams,
    pub velocity: VelocityField,
    pub layers: Vec<Layer>,
    pub sources: Vec<SourceSpec>,
    /// Dirichlet inflow values, shared by all species.
    pub boundary_values: BoundaryValues,
    pub n_steps: usize,
    pub snapshot_steps: Vec<usize>,
    pub split: SplitConfig,
    /// Nominal step, capped by the Courant condition.
    pub initial_dt: f64,
    pub cfl_max: f64,
}

pub const LAYER_DIFFUSIVITY_HIGH: f64 = 3.6e-3;
pub const LAYER_DIFFUSIVITY_LOW: f64 = 3.6e-5;

/// Five alternating bands over `[y0, y1]`, low diffusivity at the top so
/// the sources sit in a slow band.
pub fn default_layers(y0: f64, y1: f64) -> Vec<Layer> {
    let h = (y1 - y0) / 5.0;
    (0..5)
        .map(|b| Layer {
            y_min: y0 + b as f64 * h,
            y_max: y0 + (b + 1) as f64 * h,
            diffusivity: if b % 2 == 0 {
                LAYER_DIFFUSIVITY_LOW
            } else {
                LAYER_DIFFUSIVITY_HIGH
            },
        })
        .collect()
}

impl LayeredScenario {
    /// Default field setup: cells on `[0,100]^2`, porosity 0.333,
    /// downward velocity of magnitude 4e-3, two-species decay chain
    /// (0.25e-3, 0.5e-3), three unit sources at y = 75, closed
    /// top/left/right, outflow bottom, Courant cap 1.
    pub fn field_defaults(nx: usize, ny: usize, n_steps: usize) -> Result<Self> {
        let domain = Rectangle::new(0.0, 100.0, 0.0, 100.0);
        let spec = BoundarySpec {
            left: crate::grid::BoundaryTag::NeumannZero,
            right: crate::grid::BoundaryTag::NeumannZero,
            top: crate::grid::BoundaryTag::NeumannZero,
            bottom: crate::grid::BoundaryTag::Outflow,
        };
        let grid = build_grid(nx, ny, &domain, spec)?;
        let mut params = ModelParams::inert(2).with_decay_chain(&[0.25e-3, 0.5e-3]);
        params.porosity = 0.333;
        params.exchange_mobile_immobile = 1.0e-4;
        params.exchange_sorption = 2.0e-5;
        let duration = 6.0e4;
        let sources = [30.0, 50.0, 70.0]
            .iter()
            .map(|&x| SourceSpec::point_at(&grid, x, 75.0, 0, 1.0, duration))
            .collect::<Result<Vec<_>>>()?;
        Ok(LayeredScenario {
            layers: default_layers(0.0, 100.0),
            grid,
            params,
            velocity: VelocityField::constant(0.0, -4.0e-3),
            sources,
            boundary_values: BoundaryValues::none(),
            n_steps,
            snapshot_steps: vec![2, n_steps],
            split: SplitConfig {
                scheme: SplitScheme::Iterative,
                err_tol: 1.0e-4,
                inner: StepperConfig::new(Scheme::ImplicitTrapezoidal, f64::INFINITY),
                ..SplitConfig::default()
            },
            initial_dt: 5.0e2,
            cfl_max: 1.0,
        })
    }

    /// Per-cell diffusivity from the band containing each cell center.
    pub fn diffusivity_field(&self) -> Result<Vec<f64>> {
        let mut d = vec![f64::NAN; self.grid.n_cells()];
        for (j, slot) in d.iter_mut().enumerate() {
            let (_, y) = self.grid.cell_center(j);
            let mut hit = None;
            for layer in &self.layers {
                if y >= layer.y_min && y < layer.y_max {
                    if hit.is_some() {
                        return Err(Error::invalid(format!("layers overlap at y = {y}")));
                    }
                    hit = Some(layer.diffusivity);
                }
            }
            *slot = hit.ok_or_else(|| Error::invalid(format!("no layer covers y = {y}")))?;
        }
        Ok(d)
    }

    /// Loose concentration bound: all injected mass collected in a single
    /// cell of the mobile phase.
    pub fn source_implied_max(&self, t_total: f64) -> f64 {
        let v = self.grid.volume() * self.params.porosity * self.params.retardation;
        self.sources
            .iter()
            .map(|s| s.total * (t_total / s.duration).min(1.0) / v)
            .sum()
    }
}

/// Per-step scalar diagnostics of a layered run.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub time: f64,
    pub tau: f64,
    pub cfl: f64,
    pub fixed_point_iterations: usize,
    pub min: f64,
    pub max: f64,
    pub phase_totals: [f64; 4],
}

/// Cumulative heat budget, all terms measured from the discrete scheme.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BudgetLedger {
    pub initial_total: f64,
    pub final_total: f64,
    pub injected: f64,
    pub outflow: f64,
    pub decay_loss: f64,
}

impl BudgetLedger {
    /// `(final - initial) - injected + outflow + decay`, which the
    /// discrete scheme closes to rounding.
    pub fn residual(&self) -> f64 {
        (self.final_total - self.initial_total) - self.injected + self.outflow + self.decay_loss
    }

    pub fn relative_residual(&self) -> f64 {
        let scale = self
            .injected
            .abs()
            .max(self.final_total.abs())
            .max(f64::MIN_POSITIVE);
        self.residual().abs() / scale
    }
}

/// Output of a layered run: requested snapshots, per-step series, budget.
#[derive(Debug, Clone)]
pub struct LayeredRun {
    pub snapshots: Vec<(usize, PhaseState)>,
    pub series: Vec<StepDiagnostics>,
    pub budget: BudgetLedger,
    pub final_state: PhaseState,
    pub tau: f64,
}

/// March the layered scenario with the fixed-point phase coupling and a
/// Courant-capped step.
pub fn run_layered_scenario(scn: &LayeredScenario) -> Result<LayeredRun> {
    scn.params.validate()?;
    let grid = &scn.grid;
    let m = scn.params.species;
    let cells = grid.n_cells();

    let fluxes = face_fluxes(grid, &scn.velocity)?;
    let rate = fluxes.max_rate(grid);
    let tau = if rate > 0.0 {
        scn.initial_dt.min(scn.cfl_max / rate)
    } else {
        scn.initial_dt
    };

    let d_per_species: Vec<Vec<f64>> = if scn.layers.is_empty() {
        (0..m)
            .map(|s| vec![scn.params.diffusion[s]; cells])
            .collect()
    } else {
        let d_field = scn.diffusivity_field()?;
        (0..m).map(|_| d_field.clone()).collect()
    };
    let bcs = vec![scn.boundary_values; m];
    let (transport, affine) = assemble_mobile_transport(grid, &fluxes, &d_per_species, &bcs)?;
    let full = assemble_block_operator(grid, &scn.params, &transport)?;
    let (a1, a2) = split_block_operator(&full)?;
    let meta = full.block_meta().unwrap().clone();

    let mut forcing_parts = vec![source_forcing(grid, &scn.params, &scn.sources)?];
    if affine.amax() > 0.0 {
        let mut vec = DVector::zeros(full.dim());
        let scale = 1.0 / scn.params.retardation;
        for (j, v) in affine.iter().enumerate() {
            vec[j] = v * scale;
        }
        forcing_parts.push(Forcing::Constant(vec));
    }
    let forcing = Forcing::Sum(forcing_parts);

    // budget functionals: w^T L restricted to the transport and decay
    // parts, with w = phi V (retardation-weighted on the mobile block)
    let w_phase = grid.volume() * scn.params.porosity;
    let weights = {
        let block = m * cells;
        let mut w = DVector::from_element(full.dim(), w_phase);
        for i in 0..block {
            w[i] *= scn.params.retardation;
        }
        w
    };
    let transport_embedded = mobile_transport_embedded(&transport, &meta);
    let decay_part = decay_embedded(&scn.params, cells);
    let wt_transport = weighted_column_sums(&transport_embedded, &weights);
    let wt_decay = weighted_column_sums(&decay_part, &weights);

    let t_grid: Vec<f64> = (0..=scn.n_steps).map(|k| k as f64 * tau).collect();
    let config = SplitConfig {
        inner: StepperConfig::new(scn.split.inner.scheme, tau),
        ..scn.split.clone()
    };
    let run = algorithm1_march(
        &a1,
        &a2,
        &forcing,
        &PhaseState::zeros(m, cells),
        &t_grid,
        &config,
    )?;

    let mut budget = BudgetLedger {
        initial_total: run.states[0].weighted_total(grid, &scn.params),
        ..Default::default()
    };
    // endpoint weights of the one-step scheme, so the budget identity
    // matches the discrete update exactly; the exponential stepper has no
    // two-point form and gets the trapezoidal approximation
    let (w0, w1) = match config.inner.scheme {
        Scheme::ExplicitEuler => (1.0, 0.0),
        Scheme::ImplicitEuler => (0.0, 1.0),
        Scheme::ImplicitTrapezoidal | Scheme::Exponential => (0.5, 0.5),
    };
    let mut series = Vec::with_capacity(scn.n_steps);
    let mut snapshots = Vec::new();
    for step in 1..=scn.n_steps {
        let before = &run.states[step - 1];
        let after = &run.states[step];
        if !after.all_finite() {
            return Err(Error::Instability {
                step,
                what: "non-finite field value".into(),
            });
        }
        let cavg = w0 * before.flatten() + w1 * after.flatten();
        budget.outflow += -tau * wt_transport.dot(&cavg);
        budget.decay_loss += -tau * wt_decay.dot(&cavg);
        let q0 = forcing.eval(t_grid[step - 1], full.dim());
        let q1 = forcing.eval(t_grid[step], full.dim());
        budget.injected += tau * (w0 * weights.dot(&q0) + w1 * weights.dot(&q1));

        let (min, max) = after.min_max();
        series.push(StepDiagnostics {
            step,
            time: t_grid[step],
            tau,
            cfl: tau * rate,
            fixed_point_iterations: run.iterations[step - 1],
            min,
            max,
            phase_totals: after.phase_totals(grid, &scn.params),
        });
        if scn.snapshot_steps.contains(&step) {
            snapshots.push((step, after.clone()));
        }
    }
    let final_state = run.states.last().unwrap().clone();
    budget.final_total = final_state.weighted_total(grid, &scn.params);

    Ok(LayeredRun {
        snapshots,
        series,
        budget,
        final_state,
        tau,
    })
}

fn weighted_column_sums(op: &LinearOperator, w: &DVector<f64>) -> DVector<f64> {
    let mut s = DVector::zeros(op.dim());
    for (r, c, v) in op.entries() {
        s[c] += w[r] * v;
    }
    s
}

/// Lateral plume spread growth per layer band: the increase of the second
/// moment of the mobile concentration about `x_source` across each band in
/// the flow direction. High-diffusivity bands grow the moment fast,
/// low-diffusivity bands barely at all; donor-cell upwinding adds no
/// lateral diffusion when the flow is vertical.
pub fn band_spread_growth(
    state: &PhaseState,
    grid: &StructuredGrid,
    layers: &[Layer],
    x_source: f64,
    species: usize,
) -> Vec<(usize, f64)> {
    let mut row_moment = vec![None; grid.ny];
    for (iy, slot) in row_moment.iter_mut().enumerate() {
        let mut mass = 0.0;
        let mut moment = 0.0;
        for ix in 0..grid.nx {
            let j = grid.cell_index(ix, iy);
            let c = state.get(crate::phases::Phase::Mobile, species, j);
            let (x, _) = grid.cell_center(j);
            mass += c;
            moment += c * (x - x_source) * (x - x_source);
        }
        if mass > 1e-12 {
            *slot = Some(moment / mass);
        }
    }
    layers
        .iter()
        .enumerate()
        .filter_map(|(b, layer)| {
            let rows: Vec<f64> = (0..grid.ny)
                .filter(|&iy| {
                    let y = grid.origin.1 + (iy as f64 + 0.5) * grid.dy;
                    y >= layer.y_min && y < layer.y_max
                })
                .filter_map(|iy| row_moment[iy])
                .collect();
            if rows.len() < 3 {
                return None;
            }
            // downward flow: the band entry is its top row, the exit its
            // bottom row; rows are collected bottom-up
            let exit = rows.first().unwrap();
            let entry = rows.last().unwrap();
            Some((b, exit - entry))
        })
        .collect()
}

/// System handed to the convergence harness.
#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub a1: LinearOperator,
    pub a2: LinearOperator,
    pub initial: DVector<f64>,
    pub t_end: f64,
}

/// March the configured scheme over each step size in `tau_grid` (each
/// halving the last) to the fixed final time, measure errors against the
/// matrix-exponential reference, and fit the observed order.
pub fn convergence_study(
    study: &ConvergenceStudy,
    scheme: &SplitConfig,
    tau_grid: &[f64],
) -> Result<ErrorReport> {
    scheme.validate()?;
    if tau_grid.len() < 3 {
        return Err(Error::invalid("need at least 3 step sizes"));
    }
    for w in tau_grid.windows(2) {
        if (w[1] / w[0] - 0.5).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "step sizes must halve: {} then {}",
                w[0], w[1]
            )));
        }
    }
    let full = study.a1.add(&study.a2)?;
    let reference = matrix_exponential_apply(&full, &study.initial, study.t_end)?;
    // inner steps per splitting step, preserved across the sweep
    let inner_per_step = (scheme.tau / scheme.inner.dt).round().max(1.0);

    let mut rows = Vec::new();
    for &tau in tau_grid {
        let n_steps_f = study.t_end / tau;
        let n_steps = n_steps_f.round() as usize;
        if n_steps == 0 || (n_steps_f - n_steps as f64).abs() > 1e-9 * n_steps_f {
            return Err(Error::invalid(format!(
                "final time {} is not a multiple of tau {tau}",
                study.t_end
            )));
        }
        let inner = StepperConfig::new(scheme.inner.scheme, tau / inner_per_step);
        let mut c = study.initial.clone();
        let mut t = 0.0;
        for _ in 0..n_steps {
            c = match scheme.scheme {
                SplitScheme::Iterative => {
                    iterative_split(&study.a1, &study.a2, &c, t, tau, scheme.iterations, &inner)?
                }
                SplitScheme::OneSideA => one_side_split(
                    &study.a1,
                    &study.a2,
                    IterationSide::A,
                    &c,
                    t,
                    tau,
                    scheme.iterations,
                    &inner,
                )?,
                SplitScheme::OneSideB => one_side_split(
                    &study.a1,
                    &study.a2,
                    IterationSide::B,
                    &c,
                    t,
                    tau,
                    scheme.iterations,
                    &inner,
                )?,
                SplitScheme::AdditiveSigma => {
                    let cfg = SplitConfig {
                        tau,
                        ..scheme.clone()
                    };
                    crate::splitting::additive_sigma_step(
                        &LinearOperator::identity(full.dim()),
                        &full,
                        &Forcing::Zero,
                        &c,
                        t,
                        &cfg,
                    )?
                }
                SplitScheme::Unsplit => {
                    let ivp = crate::integrators::LinearIvp {
                        operator: full.clone(),
                        forcing: Forcing::Zero,
                        initial: c.clone(),
                        t0: t,
                        t_end: t + tau,
                    };
                    crate::integrators::step(
                        &ivp,
                        &c,
                        t,
                        &StepperConfig::new(scheme.inner.scheme, tau),
                    )?
                }
            };
            t += tau;
        }
        let diff = &c - &reference;
        rows.push(ErrorRow {
            scheme: format!("{:?}", scheme.scheme),
            k: Some(scheme.iterations),
            tau: Some(tau),
            linf: diff.amax(),
            l2: diff.norm(),
        });
    }

    let monotone = rows.windows(2).all(|w| w[1].linf < w[0].linf);
    let order = if monotone {
        Some(fit_order(
            tau_grid,
            &rows.iter().map(|r| r.linf).collect::<Vec<_>>(),
        ))
    } else {
        None
    };
    Ok(ErrorReport {
        rows,
        order,
        reference_check: 0.0,
        side_b_beats_side_a: None,
        iterative_monotone: Some(monotone),
    })
}

fn fit_order(taus: &[f64], errors: &[f64]) -> OrderFit {
    let xs: Vec<f64> = taus.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.max(1e-300).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let fit = slope * x + intercept;
            (y - fit) * (y - fit)
        })
        .sum::<f64>()
        / n)
        .sqrt();
    OrderFit {
        slope,
        residual,
        taus: taus.to_vec(),
    }
}
