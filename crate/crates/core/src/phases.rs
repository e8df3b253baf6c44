//! Four-phase transport state and the coupled block operator.
//!
//! The state couples, per species and cell, a mobile concentration (the
//! only phase with spatial transport) with immobile, adsorbed, and
//! immobile-adsorbed concentrations that evolve by exchange and decay ODEs.
//! The assembled block operator has four phase rows; splitting it yields a
//! block-diagonal transport/reaction part and an exchange part whose sum
//! recombines to the full operator entry-exactly.
//!
//! Layout: `index = phase * (species * cells) + cell * species + s`, so
//! spatial stencils stay banded inside every phase block.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::StructuredGrid;
use crate::integrators::{Forcing, Pulse};
use crate::operator::{BlockMeta, LinearOperator, OperatorBuilder, OperatorRole, PHASE_COUNT};

/// The four phases, in state-vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Mobile = 0,
    Immobile = 1,
    Adsorbed = 2,
    ImmobileAdsorbed = 3,
}

pub const PHASES: [Phase; PHASE_COUNT] = [
    Phase::Mobile,
    Phase::Immobile,
    Phase::Adsorbed,
    Phase::ImmobileAdsorbed,
];

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Mobile => "mobile",
            Phase::Immobile => "immobile",
            Phase::Adsorbed => "adsorbed",
            Phase::ImmobileAdsorbed => "immobile_adsorbed",
        }
    }
}

/// Physical parameters of the four-phase model.
///
/// `decay` is the M x M decay matrix: diagonal entries are each species'
/// own decay rate, off-diagonal entry `(i, k)` is the gain rate of species
/// `i` from parent `k`. The induced generator puts `-decay[(i,i)]` on the
/// diagonal and `+decay[(i,k)]` off it, identically in every phase.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub species: usize,
    /// Effective porosity, in (0, 1].
    pub porosity: f64,
    /// Mobile/immobile exchange rate g [1/h].
    pub exchange_mobile_immobile: f64,
    /// Kinetic sorption exchange rate k_alpha [1/h].
    pub exchange_sorption: f64,
    /// Decay matrix [1/h], see above.
    pub decay: DMatrix<f64>,
    /// Per-species diffusion coefficient [m^2/h].
    pub diffusion: Vec<f64>,
    /// Retardation factor on the mobile time derivative.
    pub retardation: f64,
}

impl ModelParams {
    /// Single species, no exchange, no decay, unit porosity.
    pub fn inert(species: usize) -> Self {
        ModelParams {
            species,
            porosity: 1.0,
            exchange_mobile_immobile: 0.0,
            exchange_sorption: 0.0,
            decay: DMatrix::zeros(species, species),
            diffusion: vec![0.0; species],
            retardation: 1.0,
        }
    }

    /// Linear decay chain: species `i` decays at `rates[i]`, feeding
    /// species `i + 1`.
    pub fn with_decay_chain(mut self, rates: &[f64]) -> Self {
        assert_eq!(rates.len(), self.species);
        let mut decay = DMatrix::zeros(self.species, self.species);
        for (i, &r) in rates.iter().enumerate() {
            decay[(i, i)] = r;
            if i + 1 < self.species {
                decay[(i + 1, i)] = r;
            }
        }
        self.decay = decay;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.species == 0 {
            problems.push("species count must be positive".to_string());
        }
        if !(self.porosity > 0.0 && self.porosity <= 1.0) {
            problems.push(format!("porosity must be in (0, 1], got {}", self.porosity));
        }
        if self.exchange_mobile_immobile < 0.0 {
            problems.push(format!(
                "exchange rate g must be >= 0, got {}",
                self.exchange_mobile_immobile
            ));
        }
        if self.exchange_sorption < 0.0 {
            problems.push(format!(
                "sorption rate k_alpha must be >= 0, got {}",
                self.exchange_sorption
            ));
        }
        if !(self.retardation > 0.0) {
            problems.push(format!("retardation must be > 0, got {}", self.retardation));
        }
        if self.decay.nrows() != self.species || self.decay.ncols() != self.species {
            problems.push(format!(
                "decay matrix is {}x{} for {} species",
                self.decay.nrows(),
                self.decay.ncols(),
                self.species
            ));
        } else {
            for i in 0..self.species {
                if self.decay[(i, i)] < 0.0 {
                    problems.push(format!("decay rate of species {i} is negative"));
                }
            }
        }
        if self.diffusion.len() != self.species {
            problems.push(format!(
                "{} diffusion coefficients for {} species",
                self.diffusion.len(),
                self.species
            ));
        } else if self.diffusion.iter().any(|d| *d < 0.0) {
            problems.push("diffusion coefficients must be >= 0".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(problems.join("; ")))
        }
    }

    /// Species-space decay generator (M x M).
    pub fn decay_generator(&self) -> DMatrix<f64> {
        let m = self.species;
        let mut g = DMatrix::zeros(m, m);
        for i in 0..m {
            g[(i, i)] = -self.decay[(i, i)];
            for k in 0..m {
                if k != i {
                    g[(i, k)] = self.decay[(i, k)];
                }
            }
        }
        g
    }

    fn b1(&self) -> f64 {
        self.exchange_mobile_immobile / self.porosity
    }

    fn b2(&self) -> f64 {
        self.exchange_sorption / self.porosity
    }
}

/// Concentrations of all four phases, per species and cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    species: usize,
    cells: usize,
    pub mobile: DVector<f64>,
    pub immobile: DVector<f64>,
    pub adsorbed: DVector<f64>,
    pub immobile_adsorbed: DVector<f64>,
    pub time: f64,
}

impl PhaseState {
    pub fn zeros(species: usize, cells: usize) -> Self {
        let n = species * cells;
        PhaseState {
            species,
            cells,
            mobile: DVector::zeros(n),
            immobile: DVector::zeros(n),
            adsorbed: DVector::zeros(n),
            immobile_adsorbed: DVector::zeros(n),
            time: 0.0,
        }
    }

    pub fn species(&self) -> usize {
        self.species
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Index into a phase block.
    #[inline]
    pub fn idx(&self, cell: usize, species: usize) -> usize {
        debug_assert!(cell < self.cells && species < self.species);
        cell * self.species + species
    }

    pub fn phase(&self, phase: Phase) -> &DVector<f64> {
        match phase {
            Phase::Mobile => &self.mobile,
            Phase::Immobile => &self.immobile,
            Phase::Adsorbed => &self.adsorbed,
            Phase::ImmobileAdsorbed => &self.immobile_adsorbed,
        }
    }

    pub fn phase_mut(&mut self, phase: Phase) -> &mut DVector<f64> {
        match phase {
            Phase::Mobile => &mut self.mobile,
            Phase::Immobile => &mut self.immobile,
            Phase::Adsorbed => &mut self.adsorbed,
            Phase::ImmobileAdsorbed => &mut self.immobile_adsorbed,
        }
    }

    pub fn get(&self, phase: Phase, species: usize, cell: usize) -> f64 {
        self.phase(phase)[self.idx(cell, species)]
    }

    pub fn set(&mut self, phase: Phase, species: usize, cell: usize, value: f64) {
        let i = self.idx(cell, species);
        self.phase_mut(phase)[i] = value;
    }

    pub fn flatten(&self) -> DVector<f64> {
        let block = self.species * self.cells;
        let mut out = DVector::zeros(PHASE_COUNT * block);
        for (p, phase) in PHASES.iter().enumerate() {
            out.rows_mut(p * block, block).copy_from(self.phase(*phase));
        }
        out
    }

    pub fn from_flat(species: usize, cells: usize, flat: &DVector<f64>, time: f64) -> Result<Self> {
        let block = species * cells;
        if flat.len() != PHASE_COUNT * block {
            return Err(Error::dim(format!(
                "flat state of length {} for {} unknowns",
                flat.len(),
                PHASE_COUNT * block
            )));
        }
        let mut s = PhaseState::zeros(species, cells);
        for (p, phase) in PHASES.iter().enumerate() {
            s.phase_mut(*phase)
                .copy_from(&flat.rows(p * block, block).clone_owned());
        }
        s.time = time;
        Ok(s)
    }

    pub fn all_finite(&self) -> bool {
        PHASES
            .iter()
            .all(|&p| self.phase(p).iter().all(|v| v.is_finite()))
    }

    pub fn min_max(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &p in &PHASES {
            for &v in self.phase(p).iter() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }

    /// Porosity-weighted total over all phases, with the retardation
    /// weight on the mobile phase; the quantity conserved by exchange.
    pub fn weighted_total(&self, grid: &StructuredGrid, params: &ModelParams) -> f64 {
        let v = grid.volume() * params.porosity;
        let mobile: f64 = self.mobile.iter().sum::<f64>() * params.retardation;
        let rest: f64 = self.immobile.iter().sum::<f64>()
            + self.adsorbed.iter().sum::<f64>()
            + self.immobile_adsorbed.iter().sum::<f64>();
        v * (mobile + rest)
    }

    pub fn phase_totals(&self, grid: &StructuredGrid, params: &ModelParams) -> [f64; PHASE_COUNT] {
        let v = grid.volume() * params.porosity;
        [
            self.mobile.iter().sum::<f64>() * v,
            self.immobile.iter().sum::<f64>() * v,
            self.adsorbed.iter().sum::<f64>() * v,
            self.immobile_adsorbed.iter().sum::<f64>() * v,
        ]
    }
}

/// Exchange part of the block operator: the B1/B2 coupling with the sign
/// pattern of the model equations (negative on the donor diagonal, positive
/// toward the partner phase). The mobile row carries the retardation
/// scaling.
pub fn exchange_operator(meta: &BlockMeta) -> LinearOperator {
    let block = meta.species * meta.cells;
    let n = PHASE_COUNT * block;
    let (b1, b2) = (meta.b1, meta.b2);
    let inv_r = 1.0 / meta.retardation;
    let mut bld = OperatorBuilder::new(n, OperatorRole::ExchangeImmobile);
    let off = |phase: usize| phase * block;
    for i in 0..block {
        // mobile row: -(b1+b2)/R diag, +b1/R immobile, +b2/R adsorbed
        bld.add(off(0) + i, off(0) + i, -(b1 + b2) * inv_r);
        bld.add(off(0) + i, off(1) + i, b1 * inv_r);
        bld.add(off(0) + i, off(2) + i, b2 * inv_r);
        // immobile row: +b1 mobile, -(b1+b2) diag, +b2 immobile-adsorbed
        bld.add(off(1) + i, off(0) + i, b1);
        bld.add(off(1) + i, off(1) + i, -(b1 + b2));
        bld.add(off(1) + i, off(3) + i, b2);
        // adsorbed row: +b2 mobile, -b2 diag
        bld.add(off(2) + i, off(0) + i, b2);
        bld.add(off(2) + i, off(2) + i, -b2);
        // immobile-adsorbed row: +b2 immobile, -b2 diag
        bld.add(off(3) + i, off(1) + i, b2);
        bld.add(off(3) + i, off(3) + i, -b2);
    }
    bld.build()
}

/// Mobile transport embedded in the full block space, scaled by `1/R`.
pub fn mobile_transport_embedded(
    transport_op: &LinearOperator,
    meta: &BlockMeta,
) -> LinearOperator {
    let block = meta.species * meta.cells;
    let n = PHASE_COUNT * block;
    transport_op
        .scale(1.0 / meta.retardation)
        .embed(n, 0, OperatorRole::Stiffness)
}

/// Decay generator applied within every phase block.
pub fn decay_embedded(params: &ModelParams, cells: usize) -> LinearOperator {
    let m = params.species;
    let block = m * cells;
    let n = PHASE_COUNT * block;
    let generator = params.decay_generator();
    let mut bld = OperatorBuilder::new(n, OperatorRole::Reaction);
    for phase in 0..PHASE_COUNT {
        let off = phase * block;
        for cell in 0..cells {
            for i in 0..m {
                for k in 0..m {
                    bld.add(off + cell * m + i, off + cell * m + k, generator[(i, k)]);
                }
            }
        }
    }
    bld.build()
}

/// Assemble the coupled four-phase block operator.
///
/// `transport_op` is the mobile-phase convection-diffusion stiffness of
/// dimension `species * cells` in the interleaved layout (see
/// [`crate::transport::assemble_mobile_transport`]).
pub fn assemble_block_operator(
    grid: &StructuredGrid,
    params: &ModelParams,
    transport_op: &LinearOperator,
) -> Result<LinearOperator> {
    params.validate()?;
    let cells = grid.n_cells();
    let block = params.species * cells;
    if transport_op.dim() != block {
        return Err(Error::dim(format!(
            "transport operator dimension {} vs species*cells = {}",
            transport_op.dim(),
            block
        )));
    }
    let meta = BlockMeta {
        species: params.species,
        cells,
        b1: params.b1(),
        b2: params.b2(),
        retardation: params.retardation,
    };
    let a1 = mobile_transport_embedded(transport_op, &meta).add(&decay_embedded(params, cells))?;
    let a2 = exchange_operator(&meta);
    let mut full = a1.add(&a2)?.with_role(OperatorRole::FullBlock);
    full.block = Some(meta);
    Ok(full)
}

/// Split the assembled operator into the block-diagonal transport/reaction
/// part and the exchange part; the two recombine to `full` entry-exactly.
pub fn split_block_operator(full: &LinearOperator) -> Result<(LinearOperator, LinearOperator)> {
    let meta = full
        .block_meta()
        .ok_or_else(|| Error::invalid("operator lacks block metadata"))?;
    let a2 = exchange_operator(meta);
    let a1 = full.sub(&a2)?.with_role(OperatorRole::Stiffness);
    Ok((a1, a2))
}

/// Point or area source of one species.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec {
    pub kind: SourceKind,
    /// Source cells (one for a point source).
    pub cells: Vec<usize>,
    pub species: usize,
    /// Time-integrated total strength q_s.
    pub total: f64,
    /// Active duration T: the source emits at a constant rate on [0, T].
    pub duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    Point,
    Area,
}

impl SourceSpec {
    pub fn point_at(
        grid: &StructuredGrid,
        x: f64,
        y: f64,
        species: usize,
        total: f64,
        duration: f64,
    ) -> Result<Self> {
        Ok(SourceSpec {
            kind: SourceKind::Point,
            cells: vec![grid.cell_containing(x, y)?],
            species,
            total,
            duration,
        })
    }

    pub fn area(cells: Vec<usize>, species: usize, total: f64, duration: f64) -> Self {
        SourceSpec {
            kind: SourceKind::Area,
            cells,
            species,
            total,
            duration,
        }
    }

    fn validate(&self, grid: &StructuredGrid, species: usize) -> Result<()> {
        if self.cells.is_empty() {
            return Err(Error::invalid("source has no cells"));
        }
        if self.kind == SourceKind::Point && self.cells.len() != 1 {
            return Err(Error::invalid("point source must occupy exactly one cell"));
        }
        if let Some(&c) = self.cells.iter().find(|c| **c >= grid.n_cells()) {
            return Err(Error::invalid(format!(
                "source cell {c} outside grid with {} cells",
                grid.n_cells()
            )));
        }
        if self.species >= species {
            return Err(Error::invalid(format!(
                "source species {} out of range for {} species",
                self.species, species
            )));
        }
        if !(self.duration > 0.0) {
            return Err(Error::invalid("source duration must be positive"));
        }
        Ok(())
    }

    /// Rate density while active: `q_s / (T * |Omega_source|)`.
    pub fn rate_density(&self, grid: &StructuredGrid) -> f64 {
        self.total / (self.duration * self.cells.len() as f64 * grid.volume())
    }
}

/// Instantaneous source density vector at time `t`, full state size, with
/// entries in the mobile block. The discrete space-time integral
/// `sum_t sum_j entry * V_j * dt` over the active window recovers each
/// source's total exactly.
pub fn source_vector(
    grid: &StructuredGrid,
    species: usize,
    sources: &[SourceSpec],
    t: f64,
) -> Result<DVector<f64>> {
    let block = species * grid.n_cells();
    let mut out = DVector::zeros(PHASE_COUNT * block);
    for s in sources {
        s.validate(grid, species)?;
        if t > s.duration {
            continue;
        }
        let density = s.rate_density(grid);
        for &cell in &s.cells {
            out[cell * species + s.species] += density;
        }
    }
    Ok(out)
}

/// Source forcing for the block system: rectangular pulses carrying the
/// porosity scaling and the mobile-row retardation.
pub fn source_forcing(
    grid: &StructuredGrid,
    params: &ModelParams,
    sources: &[SourceSpec],
) -> Result<Forcing> {
    let block = params.species * grid.n_cells();
    let scale = 1.0 / (params.porosity * params.retardation);
    let mut pulses = Vec::with_capacity(sources.len());
    for s in sources {
        s.validate(grid, params.species)?;
        let mut rate = DVector::zeros(PHASE_COUNT * block);
        let density = s.rate_density(grid) * scale;
        for &cell in &s.cells {
            rate[cell * params.species + s.species] += density;
        }
        pulses.push(Pulse {
            rate,
            until: s.duration,
        });
    }
    if pulses.is_empty() {
        Ok(Forcing::Zero)
    } else {
        Ok(Forcing::Pulses(pulses))
    }
}
