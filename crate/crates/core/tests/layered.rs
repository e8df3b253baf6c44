//! Field-scale layered runs: qualitative plume structure across grid
//! resolutions, and the flow/transport compatibility checks.

use geoheat::flow::VelocityField;
use geoheat::grid::{BoundarySpec, BoundaryTag, Rectangle, build_grid, face_fluxes};
use geoheat::integrators::{Forcing, LinearIvp, Scheme, StepperConfig, controlled_march};
use geoheat::scenarios::{LayeredScenario, band_spread_growth, run_layered_scenario};
use geoheat::transport::{BoundaryValues, assemble_transport};
use nalgebra::DVector;

/// Bands traversed by the plume below the sources (the top band holds the
/// sources, the bottom band feels the outflow): indices 1..=3 of the
/// default five-band stack, alternating high and low diffusivity.
fn traversed_growth(scn: &LayeredScenario, steps: usize) -> (f64, f64) {
    let mut scn = scn.clone();
    scn.n_steps = steps;
    let run = run_layered_scenario(&scn).unwrap();
    let growth = band_spread_growth(&run.final_state, &scn.grid, &scn.layers, 50.0, 0);
    let mut high: f64 = f64::INFINITY;
    let mut low: f64 = f64::NEG_INFINITY;
    for (band, g) in growth {
        if !(1..=3).contains(&band) {
            continue;
        }
        if scn.layers[band].diffusivity > 1e-3 {
            high = high.min(g);
        } else {
            low = low.max(g);
        }
    }
    assert!(
        high.is_finite() && low.is_finite(),
        "plume must reach all bands"
    );
    (high, low)
}

#[test]
fn plume_spreads_inside_conductive_bands_at_both_resolutions() {
    // the lateral second moment of the plume grows fast across conductive
    // bands and stalls in tight ones; the ordering is resolution-stable
    let coarse = LayeredScenario::field_defaults(32, 32, 75).unwrap();
    let (high_c, low_c) = traversed_growth(&coarse, 75);
    assert!(
        high_c > 10.0 * low_c.max(0.0) + 1.0,
        "coarse grid: high-band growth {high_c} vs low-band {low_c}"
    );

    let fine = LayeredScenario::field_defaults(64, 64, 150).unwrap();
    let (high_f, low_f) = traversed_growth(&fine, 150);
    assert!(
        high_f > 10.0 * low_f.max(0.0) + 1.0,
        "fine grid: high-band growth {high_f} vs low-band {low_f}"
    );

    // the physical spread rate 2 D dy / v is grid-independent; the two
    // resolutions agree on the conductive-band growth within a third
    let rel = (high_f - high_c).abs() / high_f;
    assert!(rel < 0.33, "growth {high_c} vs {high_f} across resolutions");
}

#[test]
fn constant_concentration_is_stationary_under_divergence_free_flow() {
    // closed recirculating field
    let grid = build_grid(
        12,
        12,
        &Rectangle::new(0.0, 3.0, 0.0, 3.0),
        BoundarySpec::closed(),
    )
    .unwrap();
    let field = VelocityField::from_streamfunction(&grid, |x, y| {
        (std::f64::consts::PI * x / 3.0).sin() * (std::f64::consts::PI * y / 3.0).sin()
    });
    let fluxes = face_fluxes(&grid, &field).unwrap();
    let (op, affine) = assemble_transport(
        &grid,
        &fluxes,
        &vec![0.3; grid.n_cells()],
        &BoundaryValues::none(),
    )
    .unwrap();
    assert_eq!(affine.amax(), 0.0);
    let c = DVector::from_element(grid.n_cells(), 2.5);
    assert!(op.apply(&c).amax() < 1e-13);

    // through-flow with matching Dirichlet inflow
    let spec = BoundarySpec {
        top: BoundaryTag::Dirichlet,
        bottom: BoundaryTag::Outflow,
        left: BoundaryTag::NeumannZero,
        right: BoundaryTag::NeumannZero,
    };
    let grid = build_grid(8, 8, &Rectangle::new(0.0, 2.0, 0.0, 2.0), spec).unwrap();
    let fluxes = face_fluxes(&grid, &VelocityField::constant(0.0, -0.7)).unwrap();
    let bc = BoundaryValues {
        top: Some(2.5),
        ..BoundaryValues::none()
    };
    let (op, affine) = assemble_transport(&grid, &fluxes, &vec![0.0; grid.n_cells()], &bc).unwrap();
    let c = DVector::from_element(grid.n_cells(), 2.5);
    let mut rhs = op.apply(&c);
    rhs += affine;
    assert!(rhs.amax() < 1e-13, "through-flow fixed point violated");

    // marching keeps it constant as well
    let ivp = LinearIvp {
        operator: op,
        forcing: Forcing::Constant(affine_of(&grid, &fluxes, &bc)),
        initial: c.clone(),
        t0: 0.0,
        t_end: 10.0,
    };
    let traj = controlled_march(
        &ivp,
        &StepperConfig::new(Scheme::ImplicitTrapezoidal, 0.25),
        None,
        None,
        40,
    )
    .unwrap();
    assert!((traj.final_state() - &c).amax() < 1e-12);
}

fn affine_of(
    grid: &geoheat::grid::StructuredGrid,
    fluxes: &geoheat::grid::FaceFlux,
    bc: &BoundaryValues,
) -> DVector<f64> {
    let conv = geoheat::transport::assemble_convection_upwind(grid, fluxes).unwrap();
    geoheat::transport::apply_boundary(grid, &conv, fluxes, bc)
        .unwrap()
        .1
}
