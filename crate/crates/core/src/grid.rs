//! Structured Cartesian grid: cells, faces, volumes, and boundary tags.
//!
//! Cells are indexed `j = iy * nx + ix`. Faces carry a fixed geometric
//! orientation (+x for vertical faces, +y for horizontal faces), which
//! coincides with the "lower cell index to higher cell index" convention on
//! interior faces and makes flux antisymmetry structural: one stored value
//! per face, negated when seen from the downwind side.

use crate::error::{Error, Result};
use crate::flow::VelocityField;

/// Boundary condition class of a domain side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryTag {
    /// Prescribed inflow value; convective inflow only, no diffusive flux.
    Dirichlet,
    /// Closed: no diffusive and no convective flux.
    NeumannZero,
    /// Donor-cell extrapolation for the convective flux, no diffusive flux.
    Outflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

pub const SIDES: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

/// Per-side boundary tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundarySpec {
    pub left: BoundaryTag,
    pub right: BoundaryTag,
    pub bottom: BoundaryTag,
    pub top: BoundaryTag,
}

impl BoundarySpec {
    pub fn all(tag: BoundaryTag) -> Self {
        BoundarySpec {
            left: tag,
            right: tag,
            bottom: tag,
            top: tag,
        }
    }

    /// Fully closed box.
    pub fn closed() -> Self {
        Self::all(BoundaryTag::NeumannZero)
    }

    pub fn side(&self, side: Side) -> BoundaryTag {
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
            Side::Bottom => self.bottom,
            Side::Top => self.top,
        }
    }
}

/// Axis-aligned rectangular domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rectangle {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rectangle {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rectangle { x0, x1, y0, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }
}

/// Uniform Cartesian cell grid over a rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredGrid {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub origin: (f64, f64),
    pub boundary: BoundarySpec,
}

/// Build a uniform grid covering `domain` exactly.
pub fn build_grid(
    nx: usize,
    ny: usize,
    domain: &Rectangle,
    boundary: BoundarySpec,
) -> Result<StructuredGrid> {
    if nx == 0 || ny == 0 {
        return Err(Error::invalid(format!(
            "cell counts must be positive, got nx={nx}, ny={ny}"
        )));
    }
    if !(domain.width() > 0.0) || !(domain.height() > 0.0) {
        return Err(Error::invalid(format!(
            "domain extents must be positive, got {} x {}",
            domain.width(),
            domain.height()
        )));
    }
    Ok(StructuredGrid {
        nx,
        ny,
        dx: domain.width() / nx as f64,
        dy: domain.height() / ny as f64,
        origin: (domain.x0, domain.y0),
        boundary,
    })
}

impl StructuredGrid {
    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn cell_index(&self, ix: usize, iy: usize) -> usize {
        debug_assert!(ix < self.nx && iy < self.ny);
        iy * self.nx + ix
    }

    #[inline]
    pub fn cell_coords(&self, j: usize) -> (usize, usize) {
        (j % self.nx, j / self.nx)
    }

    /// Cell volume (area in 2D per unit depth); uniform across the grid.
    pub fn volume(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn cell_center(&self, j: usize) -> (f64, f64) {
        let (ix, iy) = self.cell_coords(j);
        (
            self.origin.0 + (ix as f64 + 0.5) * self.dx,
            self.origin.1 + (iy as f64 + 0.5) * self.dy,
        )
    }

    /// Index of the cell containing the point, clamping points on the far
    /// edges into the last cell.
    pub fn cell_containing(&self, x: f64, y: f64) -> Result<usize> {
        let fx = (x - self.origin.0) / self.dx;
        let fy = (y - self.origin.1) / self.dy;
        if fx < 0.0 || fy < 0.0 || fx > self.nx as f64 || fy > self.ny as f64 {
            return Err(Error::invalid(format!("point ({x}, {y}) outside domain")));
        }
        let ix = (fx as usize).min(self.nx - 1);
        let iy = (fy as usize).min(self.ny - 1);
        Ok(self.cell_index(ix, iy))
    }

    pub fn n_interior_faces(&self) -> usize {
        (self.nx - 1) * self.ny + self.nx * (self.ny - 1)
    }

    pub fn n_boundary_faces(&self) -> usize {
        2 * self.nx + 2 * self.ny
    }
}

/// Signed volumetric fluxes through every grid face.
///
/// Vertical (x-normal) faces store `u * dy` at `(ix, iy)` for
/// `ix = 0..=nx`; horizontal (y-normal) faces store `v * dx` at `(ix, iy)`
/// for `iy = 0..=ny`. The sign follows the geometric orientation, so the
/// flux seen from the cell on the positive side is the exact negation of
/// the flux seen from the cell on the negative side.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceFlux {
    nx: usize,
    ny: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

/// Integrate the velocity field over every face.
pub fn face_fluxes(grid: &StructuredGrid, velocity: &VelocityField) -> Result<FaceFlux> {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut x = vec![0.0; (nx + 1) * ny];
    let mut y = vec![0.0; nx * (ny + 1)];
    match velocity {
        VelocityField::Constant { vx, vy } => {
            for f in x.iter_mut() {
                *f = vx * grid.dy;
            }
            for f in y.iter_mut() {
                *f = vy * grid.dx;
            }
        }
        VelocityField::Staggered {
            nx: vnx,
            ny: vny,
            u,
            v,
        } => {
            if *vnx != nx || *vny != ny || u.len() != x.len() || v.len() != y.len() {
                return Err(Error::dim(format!(
                    "staggered field sized {vnx}x{vny} does not match grid {nx}x{ny}"
                )));
            }
            for (f, ui) in x.iter_mut().zip(u) {
                *f = ui * grid.dy;
            }
            for (f, vi) in y.iter_mut().zip(v) {
                *f = vi * grid.dx;
            }
        }
    }
    Ok(FaceFlux { nx, ny, x, y })
}

impl FaceFlux {
    /// Cell grid the fluxes were built on.
    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    #[inline]
    pub fn x_at(&self, ix: usize, iy: usize) -> f64 {
        debug_assert!(ix <= self.nx && iy < self.ny);
        self.x[iy * (self.nx + 1) + ix]
    }

    #[inline]
    pub fn y_at(&self, ix: usize, iy: usize) -> f64 {
        debug_assert!(ix < self.nx && iy <= self.ny);
        self.y[iy * self.nx + ix]
    }

    /// Signed flux out of cell `(ix, iy)` through the given side.
    #[inline]
    pub fn outgoing(&self, ix: usize, iy: usize, side: Side) -> f64 {
        match side {
            Side::Left => -self.x_at(ix, iy),
            Side::Right => self.x_at(ix + 1, iy),
            Side::Bottom => -self.y_at(ix, iy),
            Side::Top => self.y_at(ix, iy + 1),
        }
    }

    /// Net signed outflux of a cell; zero for divergence-free fields.
    pub fn net_outflux(&self, ix: usize, iy: usize) -> f64 {
        SIDES.iter().map(|&s| self.outgoing(ix, iy, s)).sum()
    }

    /// `max_j nu_j / V_j`, the rate entering the Courant number.
    pub fn max_rate(&self, grid: &StructuredGrid) -> f64 {
        let mut rate = 0.0f64;
        for j in 0..grid.n_cells() {
            rate = rate.max(total_outflow(self, j).unwrap() / grid.volume());
        }
        rate
    }
}

/// Total outflow of a cell: the sum of positive signed outgoing fluxes
/// across its faces.
pub fn total_outflow(fluxes: &FaceFlux, cell: usize) -> Result<f64> {
    if cell >= fluxes.nx * fluxes.ny {
        return Err(Error::invalid(format!(
            "cell index {cell} out of range for {}x{} grid",
            fluxes.nx, fluxes.ny
        )));
    }
    let (ix, iy) = (cell % fluxes.nx, cell / fluxes.nx);
    Ok(SIDES
        .iter()
        .map(|&s| fluxes.outgoing(ix, iy, s).max(0.0))
        .sum())
}
