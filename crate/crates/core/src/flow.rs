//! Velocity-field providers for the transport driver.
//!
//! Transport runs use prescribed fields (constant or staggered). The
//! explicit-Euler momentum step with a prescribed pressure exists as an
//! auxiliary capability and is validated on smoke tests; it is never
//! coupled into a pressure solve.

use crate::error::{Error, Result};
use crate::grid::StructuredGrid;

/// Velocity field, either uniform or stored on staggered faces:
/// `u` on vertical faces (`(nx+1) * ny`), `v` on horizontal faces
/// (`nx * (ny+1)`).
#[derive(Debug, Clone, PartialEq)]
pub enum VelocityField {
    Constant {
        vx: f64,
        vy: f64,
    },
    Staggered {
        nx: usize,
        ny: usize,
        u: Vec<f64>,
        v: Vec<f64>,
    },
}

impl VelocityField {
    pub fn constant(vx: f64, vy: f64) -> Self {
        VelocityField::Constant { vx, vy }
    }

    pub fn zero_staggered(grid: &StructuredGrid) -> Self {
        VelocityField::Staggered {
            nx: grid.nx,
            ny: grid.ny,
            u: vec![0.0; (grid.nx + 1) * grid.ny],
            v: vec![0.0; grid.nx * (grid.ny + 1)],
        }
    }

    /// Build an exactly divergence-free staggered field from a
    /// streamfunction sampled at grid nodes:
    /// `u = d(psi)/dy`, `v = -d(psi)/dx` as discrete node differences.
    pub fn from_streamfunction(grid: &StructuredGrid, psi: impl Fn(f64, f64) -> f64) -> Self {
        let (nx, ny) = (grid.nx, grid.ny);
        let node = |ix: usize, iy: usize| {
            psi(
                grid.origin.0 + ix as f64 * grid.dx,
                grid.origin.1 + iy as f64 * grid.dy,
            )
        };
        let mut u = vec![0.0; (nx + 1) * ny];
        let mut v = vec![0.0; nx * (ny + 1)];
        for iy in 0..ny {
            for ix in 0..=nx {
                u[iy * (nx + 1) + ix] = (node(ix, iy + 1) - node(ix, iy)) / grid.dy;
            }
        }
        for iy in 0..=ny {
            for ix in 0..nx {
                v[iy * nx + ix] = -(node(ix + 1, iy) - node(ix, iy)) / grid.dx;
            }
        }
        VelocityField::Staggered { nx, ny, u, v }
    }

    fn staggered_parts(&self, grid: &StructuredGrid) -> Result<(&[f64], &[f64])> {
        match self {
            VelocityField::Staggered { nx, ny, u, v } if *nx == grid.nx && *ny == grid.ny => {
                Ok((u, v))
            }
            VelocityField::Staggered { nx, ny, .. } => Err(Error::dim(format!(
                "staggered field {nx}x{ny} does not match grid {}x{}",
                grid.nx, grid.ny
            ))),
            VelocityField::Constant { .. } => {
                Err(Error::invalid("operation requires a staggered field"))
            }
        }
    }
}

/// One explicit-Euler step of the momentum equation
/// `v' = v - dt (v . grad) v - dt grad p` on the staggered grid.
///
/// The convective term uses donor-cell upwinding on the momentum control
/// volume; the pressure gradient is the natural staggered difference.
/// Boundary faces keep their prescribed values. Stencils that would reach
/// past the boundary fall back to a zero normal gradient.
pub fn ns_explicit_euler_step(
    field: &VelocityField,
    pressure: &[f64],
    dt: f64,
    grid: &StructuredGrid,
) -> Result<VelocityField> {
    let (u, v) = field.staggered_parts(grid)?;
    if pressure.len() != grid.n_cells() {
        return Err(Error::dim(format!(
            "pressure field has {} entries for {} cells",
            pressure.len(),
            grid.n_cells()
        )));
    }
    let (nx, ny) = (grid.nx, grid.ny);
    let ui = |ix: usize, iy: usize| u[iy * (nx + 1) + ix];
    let vi = |ix: usize, iy: usize| v[iy * nx + ix];
    let p = |ix: usize, iy: usize| pressure[iy * nx + ix];

    let mut u_new = u.to_vec();
    let mut v_new = v.to_vec();

    // u-faces: interior ix = 1..nx-1
    for iy in 0..ny {
        for ix in 1..nx {
            let uc = ui(ix, iy);
            let dudx = if uc >= 0.0 {
                (uc - ui(ix - 1, iy)) / grid.dx
            } else {
                (ui(ix + 1, iy) - uc) / grid.dx
            };
            let vc = 0.25 * (vi(ix - 1, iy) + vi(ix, iy) + vi(ix - 1, iy + 1) + vi(ix, iy + 1));
            let dudy = if vc >= 0.0 {
                if iy == 0 {
                    0.0
                } else {
                    (uc - ui(ix, iy - 1)) / grid.dy
                }
            } else if iy + 1 == ny {
                0.0
            } else {
                (ui(ix, iy + 1) - uc) / grid.dy
            };
            let dpdx = (p(ix, iy) - p(ix - 1, iy)) / grid.dx;
            u_new[iy * (nx + 1) + ix] = uc - dt * (uc * dudx + vc * dudy) - dt * dpdx;
        }
    }

    // v-faces: interior iy = 1..ny-1
    for iy in 1..ny {
        for ix in 0..nx {
            let vc = vi(ix, iy);
            let dvdy = if vc >= 0.0 {
                (vc - vi(ix, iy - 1)) / grid.dy
            } else {
                (vi(ix, iy + 1) - vc) / grid.dy
            };
            let uc = 0.25 * (ui(ix, iy - 1) + ui(ix + 1, iy - 1) + ui(ix, iy) + ui(ix + 1, iy));
            let dvdx = if uc >= 0.0 {
                if ix == 0 {
                    0.0
                } else {
                    (vc - vi(ix - 1, iy)) / grid.dx
                }
            } else if ix + 1 == nx {
                0.0
            } else {
                (vi(ix + 1, iy) - vc) / grid.dx
            };
            let dpdy = (p(ix, iy) - p(ix, iy - 1)) / grid.dy;
            v_new[iy * nx + ix] = vc - dt * (uc * dvdx + vc * dvdy) - dt * dpdy;
        }
    }

    Ok(VelocityField::Staggered {
        nx,
        ny,
        u: u_new,
        v: v_new,
    })
}

/// Maximum cell divergence `max_j |sum of signed face fluxes| / V_j`.
pub fn check_divergence_free(field: &VelocityField, grid: &StructuredGrid) -> Result<f64> {
    let (u, v) = field.staggered_parts(grid)?;
    let (nx, ny) = (grid.nx, grid.ny);
    let mut worst = 0.0f64;
    for iy in 0..ny {
        for ix in 0..nx {
            let div = (u[iy * (nx + 1) + ix + 1] - u[iy * (nx + 1) + ix]) * grid.dy
                + (v[(iy + 1) * nx + ix] - v[iy * nx + ix]) * grid.dx;
            worst = worst.max(div.abs() / grid.volume());
        }
    }
    Ok(worst)
}
