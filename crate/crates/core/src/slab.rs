//! Damped fixed-point iteration for the nonlinear kinetic boundary value
//! problem in a plane slab between two accommodating walls.
//!
//! The unknown is stored as the ratio g = F / mu against the bulk Gaussian
//! mu = exp(-|v|^2 / (2 T)), so global equilibrium is the constant field 1.
//! Each sweep solves a linear transport problem whose loss frequency, gain
//! term, and wall re-emission are all evaluated on the previous iterate.
//! Transport is semi-Lagrangian along exact characteristics with an
//! exponential update in the loss factor, which keeps every sweep positivity
//! preserving for any step satisfying the CFL bound.
//!
//! Two discrete identities are arranged exactly rather than approximately:
//! the frozen Monte Carlo gain stencils are calibrated per velocity node so
//! the discrete gain of the bulk Gaussian equals its discrete loss, and the
//! wall matrices are biproportionally fitted (a Sinkhorn pass) so they
//! conserve mass for every field and preserve the wall Maxwellian flux.
//! Together these make equilibrium an exact fixed point of the sweep on the
//! lattice, not just up to quadrature error.

use crate::collision::{gaussian_weight, kernel_b, post_collision, CollisionModel, VelocityGrid};
use crate::error::{Error, Result};
use crate::rng;
use crate::vec3::Vec3;
use crate::wall::{cl_density, diffuse_density, maxwell_density, BoundaryModel, WallPatch};
use rand::Rng as _;
use rand_distr::StandardNormal;

/// Substream id for the frozen gain draws; each velocity node gets its own
/// substream so the stencil set is independent of build order.
const GAIN_STREAM: u64 = 11;
/// Relative accuracy demanded from the wall flux fitting.
const SINKHORN_TOL: f64 = 1e-13;
const SINKHORN_MAX: usize = 200;
/// Fields may dip this far below zero, relative to the initial sup, before
/// the sweep aborts; the update itself is a nonnegative combination, so any
/// real excursion signals corrupted state.
const NEGATIVE_TOL: f64 = 1e-12;
/// A sweep-to-sweep norm growth beyond this factor counts as a divergence
/// event; three in a row abandon the iteration.
const DIVERGENCE_FACTOR: f64 = 10.0;
const DIVERGENCE_RUN: usize = 3;

/// One face of the slab: its temperature and re-emission law.
#[derive(Debug, Clone, Copy)]
pub struct WallSpec {
    pub temperature: f64,
    pub model: BoundaryModel,
}

/// Initial data, expressed through the ratio g = F / mu.
#[derive(Debug, Clone, Copy)]
pub enum InitialDatum {
    /// F = 0.
    Zero,
    /// F = mu, the global equilibrium at the bulk temperature.
    Equilibrium,
    /// g = 1 + amplitude cos(2 pi x / width); |amplitude| <= 1 keeps F >= 0.
    PerturbedEquilibrium { amplitude: f64 },
    /// F = amplitude exp(-|v - center|^2 / (2 spread)). Requires
    /// spread < bulk temperature so the ratio g stays bounded.
    Beam { amplitude: f64, center: Vec3, spread: f64 },
}

/// Geometry, discretization, and iteration controls for the slab problem.
#[derive(Debug, Clone)]
pub struct SlabConfig {
    /// Slab width; the gas occupies x in [0, width].
    pub width: f64,
    /// Spatial nodes including both wall nodes; at least 3.
    pub x_nodes: usize,
    /// Velocity lattice nodes per axis; odd, at least 3.
    pub points_per_axis: usize,
    /// Temperature of the reference Gaussian mu.
    pub bulk_temperature: f64,
    /// Exponent of the velocity weight exp((theta - t)|v|^2) used by the
    /// iteration norms; must lie in (0, 1 / (4 T)).
    pub theta: f64,
    /// Requested time step; shrunk to divide t_end evenly, then checked
    /// against the CFL bound dt * max|v1| <= dx.
    pub time_step: f64,
    /// Final time of each sweep.
    pub t_end: f64,
    /// Wall at x = 0.
    pub left: WallSpec,
    /// Wall at x = width.
    pub right: WallSpec,
    pub collision: CollisionModel,
    /// Monte Carlo draws frozen into each velocity node's gain stencil.
    pub gain_samples: usize,
    pub seed: u64,
    /// Convergence threshold on the weighted sup distance of successive
    /// iterates, relative to max(1, initial norm).
    pub tol: f64,
    pub max_iterations: usize,
}

/// How a solve run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// Successive iterates came within tolerance.
    Converged,
    /// The iteration budget ran out while still contracting or drifting.
    IterationCapped,
    /// The weighted norms grew by more than 10x on three consecutive
    /// sweeps, or left the finite range.
    Diverged,
}

/// Space-time iterate of the ratio field g = F / mu.
#[derive(Debug, Clone)]
pub struct IterationState {
    m: usize,
    levels: usize,
    x_nodes: usize,
    velocity_nodes: usize,
    scale: f64,
    g: Vec<f64>,
}

impl IterationState {
    /// Sweep count since the initial datum.
    pub fn iteration(&self) -> usize {
        self.m
    }

    /// Ratio value at (time level, x node, velocity node).
    pub fn value(&self, level: usize, ix: usize, node: usize) -> f64 {
        assert!(level < self.levels && ix < self.x_nodes && node < self.velocity_nodes);
        self.g[(level * self.x_nodes + ix) * self.velocity_nodes + node]
    }

    /// Smallest ratio value over space, time, and velocity.
    pub fn min_value(&self) -> f64 {
        self.g.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Largest absolute ratio value.
    pub fn sup_value(&self) -> f64 {
        self.g.iter().fold(0.0f64, |a, &x| a.max(x.abs()))
    }
}

/// Record of a complete solve run. The final iterate is kept so callers can
/// export velocity slices; all per-sweep histories are indexed by sweep,
/// starting at the first one.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub outcome: Outcome,
    /// Number of sweeps performed.
    pub iterations: usize,
    /// Weighted sup norm of each iterate.
    pub sup_norms: Vec<f64>,
    /// Weighted sup distance between consecutive iterates.
    pub diffs: Vec<f64>,
    /// Total mass at t_end of each iterate.
    pub mass_end: Vec<f64>,
    /// Worst relative wall flux imbalance of each iterate; the wall closure
    /// lags one sweep behind, so this decays with the diffs.
    pub flux_residuals: Vec<f64>,
    /// Mass at every time level of the final iterate.
    pub mass_history: Vec<f64>,
    /// Weighted sup norm of the initial datum.
    pub initial_norm: f64,
    /// Largest ratio sup_norm / initial_norm over the run; 0 for zero data.
    pub bound_constant: f64,
    /// Worst discrete normalization defect of the raw wall kernels before
    /// the flux fitting, maximized over columns and walls.
    pub normalization_defect: f64,
    pub final_state: IterationState,
}

/// One frozen collision draw: calibrated importance weight and the gather
/// stencils of the two post-collision velocities. Draws whose partners left
/// the lattice are dropped at build time; they contribute zero for every
/// field.
struct GainSample {
    weight: f64,
    idx_a: [u32; 8],
    w_a: [f64; 8],
    idx_b: [u32; 8],
    w_b: [f64; 8],
}

struct GainStencil {
    samples: Vec<GainSample>,
    /// True when every draw left the lattice and the node uses the local
    /// closure gain = nu(F) g instead; preserves the equilibrium identity
    /// and the overall quadratic density scaling. Only nodes where mu is at
    /// rounding scale end up here.
    fallback: bool,
}

enum WallKind {
    /// Exact node permutation; entry `row` holds the source node.
    Mirror(Vec<u32>),
    /// Dense row-major matrix acting on the outgoing ratio values.
    Matrix(Vec<f64>),
}

struct WallOperator {
    x_index: usize,
    /// Nodes re-emitted into the gas at this wall.
    incoming: Vec<u32>,
    /// Nodes striking the wall.
    outgoing: Vec<u32>,
    kind: WallKind,
    /// Bulk-Maxwellian flux weights aligned with `incoming` / `outgoing`.
    in_flux: Vec<f64>,
    out_flux: Vec<f64>,
}

/// Precomputed discrete operators for a fixed slab configuration.
pub struct SlabSolver {
    cfg: SlabConfig,
    grid: VelocityGrid,
    nv: usize,
    nx: usize,
    levels: usize,
    dx: f64,
    dt: f64,
    xs: Vec<f64>,
    x_weight: Vec<f64>,
    mu: Vec<f64>,
    wmu: Vec<f64>,
    node_v1: Vec<f64>,
    dist: Vec<f64>,
    stencils: Vec<GainStencil>,
    walls: [WallOperator; 2],
    h_weight: Vec<f64>,
    normalization_defect: f64,
}

#[inline]
fn gather(f: &[f64], idx: &[u32; 8], w: &[f64; 8]) -> f64 {
    let mut acc = 0.0;
    for k in 0..8 {
        acc += w[k] * f[idx[k] as usize];
    }
    acc
}

fn speed_factor(r: f64, kappa: f64) -> f64 {
    if kappa == 1.0 {
        r
    } else {
        r.powf(kappa)
    }
}

impl SlabSolver {
    pub fn new(cfg: SlabConfig) -> Result<Self> {
        if !(cfg.width > 0.0) || !cfg.width.is_finite() {
            return Err(Error::InvalidParam(format!(
                "slab width must be positive and finite, got {}",
                cfg.width
            )));
        }
        if cfg.x_nodes < 3 {
            return Err(Error::InvalidParam(format!(
                "need at least 3 spatial nodes, got {}",
                cfg.x_nodes
            )));
        }
        if !(cfg.bulk_temperature > 0.0) || !cfg.bulk_temperature.is_finite() {
            return Err(Error::InvalidParam(format!(
                "bulk temperature must be positive and finite, got {}",
                cfg.bulk_temperature
            )));
        }
        let theta_max = 1.0 / (4.0 * cfg.bulk_temperature);
        if !(cfg.theta > 0.0 && cfg.theta < theta_max) {
            return Err(Error::InvalidParam(format!(
                "weight exponent must lie in (0, {theta_max}), got {}",
                cfg.theta
            )));
        }
        if !(cfg.t_end > 0.0) || !cfg.t_end.is_finite() {
            return Err(Error::InvalidParam(format!(
                "final time must be positive and finite, got {}",
                cfg.t_end
            )));
        }
        if !(cfg.time_step > 0.0) || !cfg.time_step.is_finite() {
            return Err(Error::InvalidParam(format!(
                "time step must be positive and finite, got {}",
                cfg.time_step
            )));
        }
        if !(cfg.tol > 0.0) {
            return Err(Error::InvalidParam(format!(
                "tolerance must be positive, got {}",
                cfg.tol
            )));
        }
        if cfg.max_iterations == 0 {
            return Err(Error::InvalidParam("need at least one iteration".into()));
        }
        if cfg.gain_samples == 0 {
            return Err(Error::InvalidParam(
                "gain stencils need at least one draw per node".into(),
            ));
        }
        for (side, w) in [("left", &cfg.left), ("right", &cfg.right)] {
            if !(w.temperature > 0.0) || !w.temperature.is_finite() {
                return Err(Error::InvalidParam(format!(
                    "{side} wall temperature must be positive and finite, got {}",
                    w.temperature
                )));
            }
        }

        let grid = VelocityGrid::for_temperature(cfg.points_per_axis, cfg.bulk_temperature)?;
        let nv = grid.len();
        let nx = cfg.x_nodes;
        let dx = cfg.width / (nx - 1) as f64;

        let steps = ((cfg.t_end / cfg.time_step - 1e-9).ceil()).max(1.0);
        if steps > 200_000.0 {
            return Err(Error::InvalidParam(format!(
                "time step {} needs {steps} sub-steps to reach {}",
                cfg.time_step, cfg.t_end
            )));
        }
        let steps = steps as usize;
        let dt = cfg.t_end / steps as f64;
        let courant = dt * grid.v_max();
        if courant > dx * (1.0 + 1e-12) {
            return Err(Error::InvalidParam(format!(
                "time step violates the transport bound: dt * max|v1| = {courant} \
                 exceeds dx = {dx}; shrink the step or refine time, not space"
            )));
        }
        let levels = steps + 1;

        let mut xs = vec![0.0; nx];
        let mut x_weight = vec![dx; nx];
        for (i, x) in xs.iter_mut().enumerate() {
            *x = dx * i as f64;
        }
        x_weight[0] = 0.5 * dx;
        x_weight[nx - 1] = 0.5 * dx;

        let t_m = cfg.bulk_temperature;
        let mut mu = vec![0.0; nv];
        let mut wmu = vec![0.0; nv];
        let mut node_v1 = vec![0.0; nv];
        for j in 0..nv {
            let v = grid.node(j);
            mu[j] = gaussian_weight(v, t_m);
            wmu[j] = grid.weight(j) * mu[j];
            node_v1[j] = v.x;
        }

        let dist = build_distance_table(&grid, &cfg.collision);
        let mut nu_mu = vec![0.0; nv];
        convolve_loss(&grid, &dist, &wmu, &mut nu_mu);

        let stencils = build_stencils(&grid, &cfg, &mu, &nu_mu)?;

        let (left, defect_l) = build_wall(&grid, &cfg.left, 0, Vec3::new(-1.0, 0.0, 0.0), t_m)?;
        let (right, defect_r) = build_wall(
            &grid,
            &cfg.right,
            nx - 1,
            Vec3::new(1.0, 0.0, 0.0),
            t_m,
        )?;
        let normalization_defect = defect_l.max(defect_r);

        let mut h_weight = vec![0.0; levels * nv];
        for n in 0..levels {
            let t_n = dt * n as f64;
            for j in 0..nv {
                let q = grid.node(j).norm_sq();
                h_weight[n * nv + j] = ((cfg.theta - t_n - 1.0 / (4.0 * t_m)) * q).exp();
            }
        }

        Ok(SlabSolver {
            cfg,
            grid,
            nv,
            nx,
            levels,
            dx,
            dt,
            xs,
            x_weight,
            mu,
            wmu,
            node_v1,
            dist,
            stencils,
            walls: [left, right],
            h_weight,
            normalization_defect,
        })
    }

    pub fn config(&self) -> &SlabConfig {
        &self.cfg
    }

    pub fn velocity_grid(&self) -> &VelocityGrid {
        &self.grid
    }

    /// Actual step after shrinking to divide t_end evenly.
    pub fn time_step(&self) -> f64 {
        self.dt
    }

    /// Number of stored time levels, including t = 0.
    pub fn level_count(&self) -> usize {
        self.levels
    }

    pub fn x_node_count(&self) -> usize {
        self.nx
    }

    pub fn x_coordinate(&self, ix: usize) -> f64 {
        self.xs[ix]
    }

    /// Worst raw wall-kernel normalization defect seen while building the
    /// scattering matrices, before the flux fitting repaired it.
    pub fn normalization_defect(&self) -> f64 {
        self.normalization_defect
    }

    /// Builds the space-time field of the initial datum, replicated across
    /// all time levels; this is the zeroth iterate.
    pub fn initial_state(&self, datum: InitialDatum) -> Result<IterationState> {
        let mut level0 = vec![0.0; self.nx * self.nv];
        match datum {
            InitialDatum::Zero => {}
            InitialDatum::Equilibrium => level0.fill(1.0),
            InitialDatum::PerturbedEquilibrium { amplitude } => {
                if !amplitude.is_finite() || amplitude.abs() > 1.0 {
                    return Err(Error::InvalidParam(format!(
                        "perturbation amplitude must lie in [-1, 1], got {amplitude}"
                    )));
                }
                for i in 0..self.nx {
                    let c = 1.0
                        + amplitude
                            * (2.0 * std::f64::consts::PI * self.xs[i] / self.cfg.width).cos();
                    for j in 0..self.nv {
                        level0[i * self.nv + j] = c;
                    }
                }
            }
            InitialDatum::Beam { amplitude, center, spread } => {
                if !(amplitude >= 0.0) || !amplitude.is_finite() {
                    return Err(Error::InvalidParam(format!(
                        "beam amplitude must be nonnegative and finite, got {amplitude}"
                    )));
                }
                let t_m = self.cfg.bulk_temperature;
                if !(spread > 0.0 && spread < t_m) {
                    return Err(Error::InvalidParam(format!(
                        "beam spread must lie in (0, {t_m}) so the ratio field \
                         stays bounded, got {spread}"
                    )));
                }
                for j in 0..self.nv {
                    let v = self.grid.node(j);
                    let expo = v.norm_sq() / (2.0 * t_m) - (v - center).norm_sq() / (2.0 * spread);
                    let gj = amplitude * expo.exp();
                    for i in 0..self.nx {
                        level0[i * self.nv + j] = gj;
                    }
                }
            }
        }
        let mut g = vec![0.0; self.levels * self.nx * self.nv];
        for n in 0..self.levels {
            g[n * level0.len()..(n + 1) * level0.len()].copy_from_slice(&level0);
        }
        let scale = level0.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        Ok(IterationState {
            m: 0,
            levels: self.levels,
            x_nodes: self.nx,
            velocity_nodes: self.nv,
            scale,
            g,
        })
    }

    fn check_state(&self, s: &IterationState) -> Result<()> {
        if s.levels != self.levels || s.x_nodes != self.nx || s.velocity_nodes != self.nv {
            return Err(Error::InvalidParam(
                "iteration state shape does not match this solver".into(),
            ));
        }
        Ok(())
    }

    /// Loss frequency of the iterate's distribution at every space-time
    /// velocity cell.
    fn loss_field(&self, s: &IterationState) -> Vec<f64> {
        let cells = self.levels * self.nx;
        let mut nu = vec![0.0; cells * self.nv];
        let mut wf = vec![0.0; self.nv];
        for c in 0..cells {
            let gsl = &s.g[c * self.nv..(c + 1) * self.nv];
            let mut any = false;
            for j in 0..self.nv {
                wf[j] = self.wmu[j] * gsl[j];
                any |= wf[j] != 0.0;
            }
            if !any {
                continue;
            }
            convolve_loss(&self.grid, &self.dist, &wf, &mut nu[c * self.nv..(c + 1) * self.nv]);
        }
        nu
    }

    /// Calibrated gain source, in ratio units, at every space-time velocity
    /// cell; `nu` is the matching loss field, which feeds the local-closure
    /// fallback nodes. Stencils stream once; the per-cell accumulators stay
    /// hot.
    fn gain_field(&self, s: &IterationState, nu: &[f64]) -> Vec<f64> {
        let cells = self.levels * self.nx;
        let mut sg = vec![0.0; cells * self.nv];
        let mut f_all = vec![0.0; cells * self.nv];
        let mut active = Vec::with_capacity(cells);
        for c in 0..cells {
            let gsl = &s.g[c * self.nv..(c + 1) * self.nv];
            let fsl = &mut f_all[c * self.nv..(c + 1) * self.nv];
            let mut any = false;
            for j in 0..self.nv {
                fsl[j] = self.mu[j] * gsl[j];
                any |= fsl[j] != 0.0;
            }
            if any {
                active.push(c);
            }
        }
        if active.is_empty() {
            return sg;
        }
        let mut acc = vec![0.0; active.len()];
        for j in 0..self.nv {
            let stencil = &self.stencils[j];
            if stencil.fallback {
                for &c in &active {
                    let at = c * self.nv + j;
                    sg[at] = nu[at] * s.g[at];
                }
                continue;
            }
            acc.fill(0.0);
            for sample in &stencil.samples {
                for (k, &c) in active.iter().enumerate() {
                    let f = &f_all[c * self.nv..(c + 1) * self.nv];
                    acc[k] += sample.weight
                        * gather(f, &sample.idx_a, &sample.w_a)
                        * gather(f, &sample.idx_b, &sample.w_b);
                }
            }
            for (k, &c) in active.iter().enumerate() {
                sg[c * self.nv + j] = acc[k];
            }
        }
        sg
    }

    fn apply_closure(&self, op: &WallOperator, src_level: &[f64], dst_level: &mut [f64]) {
        let base = op.x_index * self.nv;
        match &op.kind {
            WallKind::Mirror(srcs) => {
                for (row, &j) in op.incoming.iter().enumerate() {
                    dst_level[base + j as usize] = src_level[base + srcs[row] as usize];
                }
            }
            WallKind::Matrix(p) => {
                let n_out = op.outgoing.len();
                let out_vals: Vec<f64> = op
                    .outgoing
                    .iter()
                    .map(|&u| src_level[base + u as usize])
                    .collect();
                for (row, &j) in op.incoming.iter().enumerate() {
                    let r = &p[row * n_out..(row + 1) * n_out];
                    let acc: f64 = r.iter().zip(&out_vals).map(|(a, b)| a * b).sum();
                    dst_level[base + j as usize] = acc;
                }
            }
        }
    }

    /// One damped sweep: solves the linear transport problem whose loss,
    /// gain, and wall re-emission come from `prev`, starting again from the
    /// initial datum stored in level 0.
    pub fn advance_iteration(&self, prev: &IterationState) -> Result<IterationState> {
        self.check_state(prev)?;
        let nv = self.nv;
        let nx = self.nx;
        let lvl = nx * nv;
        let nu = self.loss_field(prev);
        let sg = self.gain_field(prev, &nu);
        let mut g = vec![0.0; prev.g.len()];
        g[..lvl].copy_from_slice(&prev.g[..lvl]);
        let mut next = vec![0.0; lvl];
        let dt = self.dt;
        let dx = self.dx;
        for n in 0..self.levels - 1 {
            {
                let cur = &g[n * lvl..(n + 1) * lvl];
                let nu_cur = &nu[n * lvl..(n + 1) * lvl];
                let nu_next = &nu[(n + 1) * lvl..(n + 2) * lvl];
                let sg_cur = &sg[n * lvl..(n + 1) * lvl];
                let sg_next = &sg[(n + 1) * lvl..(n + 2) * lvl];
                for i in 0..nx {
                    let xi = self.xs[i];
                    for j in 0..nv {
                        let v1 = self.node_v1[j];
                        if (i == 0 && v1 > 0.0) || (i == nx - 1 && v1 < 0.0) {
                            continue;
                        }
                        let s = ((xi - v1 * dt) / dx).clamp(0.0, (nx - 1) as f64);
                        let i0 = (s as usize).min(nx - 2);
                        let fr = s - i0 as f64;
                        let a = i0 * nv + j;
                        let b = (i0 + 1) * nv + j;
                        let g_foot = (1.0 - fr) * cur[a] + fr * cur[b];
                        let nu_foot = (1.0 - fr) * nu_cur[a] + fr * nu_cur[b];
                        let sg_foot = (1.0 - fr) * sg_cur[a] + fr * sg_cur[b];
                        let nbar = 0.5 * (nu_foot + nu_next[i * nv + j]);
                        let sbar = 0.5 * (sg_foot + sg_next[i * nv + j]);
                        let x = nbar * dt;
                        let damp = (-x).exp();
                        let slope = if x < 1e-8 {
                            dt * (1.0 - 0.5 * x)
                        } else {
                            (1.0 - damp) / nbar
                        };
                        next[i * nv + j] = damp * g_foot + slope * sbar;
                    }
                }
            }
            let prev_level = &prev.g[(n + 1) * lvl..(n + 2) * lvl];
            for op in &self.walls {
                self.apply_closure(op, prev_level, &mut next);
            }
            g[(n + 1) * lvl..(n + 2) * lvl].copy_from_slice(&next);
        }
        let min = g.iter().cloned().fold(f64::INFINITY, f64::min);
        let floor = -NEGATIVE_TOL * prev.scale.max(1.0);
        if min < floor {
            return Err(Error::Domain(format!(
                "sweep produced a negative distribution value {min} below the \
                 tolerance floor {floor}; the state is corrupted"
            )));
        }
        Ok(IterationState {
            m: prev.m + 1,
            levels: self.levels,
            x_nodes: nx,
            velocity_nodes: nv,
            scale: prev.scale,
            g,
        })
    }

    /// Sup of the weighted magnitude over space, time, and velocity.
    pub fn weighted_sup(&self, s: &IterationState) -> f64 {
        self.weighted_extreme(s, None)
    }

    /// Weighted sup distance between two iterates of the same shape.
    pub fn weighted_diff(&self, a: &IterationState, b: &IterationState) -> f64 {
        self.weighted_extreme(a, Some(b))
    }

    fn weighted_extreme(&self, a: &IterationState, b: Option<&IterationState>) -> f64 {
        let nv = self.nv;
        let mut best = 0.0f64;
        for n in 0..self.levels {
            let hw = &self.h_weight[n * nv..(n + 1) * nv];
            for i in 0..self.nx {
                let base = (n * self.nx + i) * nv;
                match b {
                    None => {
                        for j in 0..nv {
                            best = best.max(hw[j] * a.g[base + j].abs());
                        }
                    }
                    Some(other) => {
                        for j in 0..nv {
                            best = best.max(hw[j] * (a.g[base + j] - other.g[base + j]).abs());
                        }
                    }
                }
            }
        }
        best
    }

    /// Total mass of the iterate at one time level.
    pub fn mass_at_level(&self, s: &IterationState, level: usize) -> f64 {
        assert!(level < self.levels);
        let mut total = 0.0;
        for i in 0..self.nx {
            let base = (level * self.nx + i) * self.nv;
            let mut cell = 0.0;
            for j in 0..self.nv {
                cell += self.wmu[j] * s.g[base + j];
            }
            total += self.x_weight[i] * cell;
        }
        total
    }

    /// Worst relative imbalance between re-emitted and striking flux over
    /// both walls and all time levels past the initial one.
    pub fn flux_residual(&self, s: &IterationState) -> f64 {
        let mut worst = 0.0f64;
        for op in &self.walls {
            for n in 1..self.levels {
                let base = (n * self.nx + op.x_index) * self.nv;
                let mut inflow = 0.0;
                for (k, &j) in op.incoming.iter().enumerate() {
                    inflow += op.in_flux[k] * s.g[base + j as usize];
                }
                let mut outflow = 0.0;
                for (k, &u) in op.outgoing.iter().enumerate() {
                    outflow += op.out_flux[k] * s.g[base + u as usize];
                }
                let scale = inflow.abs().max(outflow.abs());
                if scale > 1e-300 {
                    worst = worst.max((inflow - outflow).abs() / scale);
                }
            }
        }
        worst
    }

    /// Runs the damped iteration from the datum until the weighted distance
    /// of successive iterates drops below tolerance, the sweep budget runs
    /// out, or the norms blow up. Divergence is reported in the outcome, not
    /// as an error; the partial histories survive either way.
    pub fn solve(&self, datum: InitialDatum) -> Result<SolveReport> {
        let mut prev = self.initial_state(datum)?;
        let initial_norm = self.weighted_sup(&prev);
        let threshold = self.cfg.tol * initial_norm.max(1.0);
        let mut sup_norms = Vec::new();
        let mut diffs = Vec::new();
        let mut mass_end = Vec::new();
        let mut flux_residuals = Vec::new();
        let mut outcome = Outcome::IterationCapped;
        for _ in 1..=self.cfg.max_iterations {
            let next = self.advance_iteration(&prev)?;
            let sup = self.weighted_sup(&next);
            let diff = self.weighted_diff(&next, &prev);
            sup_norms.push(sup);
            diffs.push(diff);
            mass_end.push(self.mass_at_level(&next, self.levels - 1));
            flux_residuals.push(self.flux_residual(&next));
            prev = next;
            if !sup.is_finite() {
                outcome = Outcome::Diverged;
                break;
            }
            if diff <= threshold {
                outcome = Outcome::Converged;
                break;
            }
            if trailing_growth_run(&sup_norms) >= DIVERGENCE_RUN {
                outcome = Outcome::Diverged;
                break;
            }
        }
        let mass_history = (0..self.levels)
            .map(|n| self.mass_at_level(&prev, n))
            .collect();
        let peak = sup_norms.iter().fold(0.0f64, |a, &x| a.max(x));
        let bound_constant = if initial_norm > 0.0 {
            peak / initial_norm
        } else {
            0.0
        };
        Ok(SolveReport {
            outcome,
            iterations: sup_norms.len(),
            sup_norms,
            diffs,
            mass_end,
            flux_residuals,
            mass_history,
            initial_norm,
            bound_constant,
            normalization_defect: self.normalization_defect,
            final_state: prev,
        })
    }
}

/// Number of trailing sweeps whose norm grew by more than the divergence
/// factor over their predecessor.
fn trailing_growth_run(sup_norms: &[f64]) -> usize {
    let mut run = 0;
    for w in sup_norms.windows(2).rev() {
        if w[1] > DIVERGENCE_FACTOR * w[0] {
            run += 1;
        } else {
            break;
        }
    }
    run
}

/// Speed-factor lookup over all lattice offset vectors; index layout
/// follows ((dx + m - 1) w + dy + m - 1) w + dz + m - 1 with w = 2m - 1.
fn build_distance_table(grid: &VelocityGrid, model: &CollisionModel) -> Vec<f64> {
    let m = grid.points_per_axis() as isize;
    let w = (2 * m - 1) as usize;
    let step = grid.step();
    let kappa = model.kappa();
    let mut dist = vec![0.0; w * w * w];
    for dx in -(m - 1)..=(m - 1) {
        for dy in -(m - 1)..=(m - 1) {
            for dz in -(m - 1)..=(m - 1) {
                let r = step * ((dx * dx + dy * dy + dz * dz) as f64).sqrt();
                let idx = (((dx + m - 1) as usize) * w + (dy + m - 1) as usize) * w
                    + (dz + m - 1) as usize;
                dist[idx] = if r == 0.0 && kappa < 0.0 {
                    0.0
                } else {
                    speed_factor(r, kappa)
                };
            }
        }
    }
    dist
}

/// Discrete loss frequency at every node of the weighted field `wf` (the
/// quadrature-weighted distribution values); the closed-form direction
/// integral 2 pi is applied at the end.
fn convolve_loss(grid: &VelocityGrid, dist: &[f64], wf: &[f64], out: &mut [f64]) {
    let m = grid.points_per_axis();
    let w = 2 * m - 1;
    for jx in 0..m {
        for jy in 0..m {
            for jz in 0..m {
                let mut acc = 0.0;
                let mut src = 0usize;
                for ix in 0..m {
                    let ox = (jx + m - 1 - ix) * w;
                    for iy in 0..m {
                        let base = (ox + jy + m - 1 - iy) * w + jz + m - 1;
                        for iz in 0..m {
                            acc += wf[src] * dist[base - iz];
                            src += 1;
                        }
                    }
                }
                out[(jx * m + jy) * m + jz] = 2.0 * std::f64::consts::PI * acc;
            }
        }
    }
}

/// Draws and calibrates the frozen gain stencils. Each node's importance
/// draws live in their own substream; the per-node factor rescales the
/// stencil so its discrete gain of the bulk Gaussian equals nu_mu * mu
/// exactly, which pins equilibrium as a fixed point of the sweep.
fn build_stencils(
    grid: &VelocityGrid,
    cfg: &SlabConfig,
    mu: &[f64],
    nu_mu: &[f64],
) -> Result<Vec<GainStencil>> {
    let t_m = cfg.bulk_temperature;
    let sqrt_t = t_m.sqrt();
    let pref = 4.0 * std::f64::consts::PI * (2.0 * std::f64::consts::PI * t_m).powf(1.5);
    let kappa = cfg.collision.kappa();
    let nv = grid.len();
    let mut stencils = Vec::with_capacity(nv);
    for j in 0..nv {
        let v = grid.node(j);
        let mut gen = rng::substream(cfg.seed, GAIN_STREAM, j as u64);
        let mut samples = Vec::new();
        for _ in 0..cfg.gain_samples {
            let u = loop {
                let cand = Vec3::new(
                    sqrt_t * gen.sample::<f64, _>(StandardNormal),
                    sqrt_t * gen.sample::<f64, _>(StandardNormal),
                    sqrt_t * gen.sample::<f64, _>(StandardNormal),
                );
                if kappa >= 0.0 || (cand - v).norm() >= 1e-8 {
                    break cand;
                }
            };
            let omega = loop {
                let d = Vec3::new(
                    gen.sample::<f64, _>(StandardNormal),
                    gen.sample::<f64, _>(StandardNormal),
                    gen.sample::<f64, _>(StandardNormal),
                );
                let n2 = d.norm_sq();
                if n2 > 1e-12 {
                    break d.scale(1.0 / n2.sqrt());
                }
            };
            let b = kernel_b(u, v, omega, &cfg.collision)?;
            if b == 0.0 {
                continue;
            }
            let (up, vp) = post_collision(u, v, omega)?;
            let (Some(sa), Some(sb)) = (grid.trilinear_stencil(up), grid.trilinear_stencil(vp))
            else {
                continue;
            };
            let weight = pref * (u.norm_sq() / (2.0 * t_m)).exp() * b;
            let mut sample = GainSample {
                weight,
                idx_a: [0; 8],
                w_a: [0.0; 8],
                idx_b: [0; 8],
                w_b: [0.0; 8],
            };
            for k in 0..8 {
                sample.idx_a[k] = sa[k].0 as u32;
                sample.w_a[k] = sa[k].1;
                sample.idx_b[k] = sb[k].0 as u32;
                sample.w_b[k] = sb[k].1;
            }
            samples.push(sample);
        }
        let raw_sum: f64 = samples
            .iter()
            .map(|s| s.weight * gather(mu, &s.idx_a, &s.w_a) * gather(mu, &s.idx_b, &s.w_b))
            .sum();
        let target = nu_mu[j] * mu[j];
        let fallback = !(raw_sum > 0.0 && target > 0.0);
        if fallback {
            samples.clear();
        } else {
            let scale = target / (raw_sum * mu[j]);
            for s in &mut samples {
                s.weight *= scale;
            }
        }
        stencils.push(GainStencil { samples, fallback });
    }
    Ok(stencils)
}

/// Builds the discrete re-emission operator of one wall, acting on ratio
/// values. Deterministic laws become exact node permutations; stochastic
/// laws become dense matrices fitted so every column conserves mass and
/// every row reproduces the wall Maxwellian flux. Returns the operator and
/// the worst raw normalization defect of its kernel columns.
fn build_wall(
    grid: &VelocityGrid,
    spec: &WallSpec,
    x_index: usize,
    normal: Vec3,
    t_m: f64,
) -> Result<(WallOperator, f64)> {
    let nv = grid.len();
    let m = grid.points_per_axis();
    let mut incoming = Vec::new();
    let mut outgoing = Vec::new();
    for j in 0..nv {
        let s = normal.dot(grid.node(j));
        if s < 0.0 {
            incoming.push(j as u32);
        } else if s > 0.0 {
            outgoing.push(j as u32);
        }
    }
    let flux_of = |j: u32, t: f64| {
        let v = grid.node(j as usize);
        gaussian_weight(v, t) * normal.dot(v).abs() * grid.weight(j as usize)
    };
    let in_flux: Vec<f64> = incoming.iter().map(|&j| flux_of(j, t_m)).collect();
    let out_flux: Vec<f64> = outgoing.iter().map(|&j| flux_of(j, t_m)).collect();

    let mirror_x = |j: u32| {
        let j = j as usize;
        let iz = j % m;
        let iy = (j / m) % m;
        let ix = j / (m * m);
        grid.index_of(m - 1 - ix, iy, iz) as u32
    };
    let flip_all = |j: u32| {
        let j = j as usize;
        let iz = j % m;
        let iy = (j / m) % m;
        let ix = j / (m * m);
        grid.index_of(m - 1 - ix, m - 1 - iy, m - 1 - iz) as u32
    };

    let (kind, defect) = match spec.model {
        BoundaryModel::Specular => {
            let srcs = incoming.iter().map(|&j| mirror_x(j)).collect();
            (WallKind::Mirror(srcs), 0.0)
        }
        BoundaryModel::BounceBack => {
            let srcs = incoming.iter().map(|&j| flip_all(j)).collect();
            (WallKind::Mirror(srcs), 0.0)
        }
        model => {
            let wall = WallPatch::new(spec.temperature, normal)?;
            let n_in = incoming.len();
            let n_out = outgoing.len();
            let mut row_of = vec![u32::MAX; nv];
            for (row, &j) in incoming.iter().enumerate() {
                row_of[j as usize] = row as u32;
            }
            let mut a = vec![0.0; n_in * n_out];
            let mut defect = 0.0f64;
            for (ul, &uj) in outgoing.iter().enumerate() {
                let u = grid.node(uj as usize);
                let flux_out_w = flux_of(uj, spec.temperature);
                let mut kernel_mass = 0.0;
                for (jl, &vj) in incoming.iter().enumerate() {
                    let v = grid.node(vj as usize);
                    let dens = match model {
                        BoundaryModel::Cl(r) => cl_density(u, v, &wall, r)?,
                        BoundaryModel::Diffuse => diffuse_density(u, v, &wall)?,
                        BoundaryModel::Maxwell(c) => {
                            maxwell_density(u, v, &wall, c)?.continuous
                        }
                        _ => unreachable!("deterministic laws handled above"),
                    };
                    let contrib = dens * grid.weight(vj as usize);
                    kernel_mass += contrib;
                    a[jl * n_out + ul] = contrib * flux_out_w;
                }
                if let BoundaryModel::Maxwell(c) = model {
                    let row = row_of[mirror_x(uj) as usize];
                    debug_assert!(row != u32::MAX);
                    a[row as usize * n_out + ul] += (1.0 - c) * flux_out_w;
                    kernel_mass += 1.0 - c;
                }
                defect = defect.max((kernel_mass - 1.0).abs());
            }
            let rows: Vec<f64> = incoming.iter().map(|&j| flux_of(j, spec.temperature)).collect();
            let mut cols: Vec<f64> =
                outgoing.iter().map(|&j| flux_of(j, spec.temperature)).collect();
            let sr: f64 = rows.iter().sum();
            let sc: f64 = cols.iter().sum();
            for c in &mut cols {
                *c *= sr / sc;
            }
            sinkhorn(&mut a, &rows, &cols)?;
            for jl in 0..n_in {
                let den = in_flux[jl];
                for (ul, &uj) in outgoing.iter().enumerate() {
                    let u = grid.node(uj as usize);
                    let ratio = gaussian_weight(u, t_m) / gaussian_weight(u, spec.temperature);
                    a[jl * n_out + ul] *= ratio / den;
                }
            }
            (WallKind::Matrix(a), defect)
        }
    };
    Ok((
        WallOperator {
            x_index,
            incoming,
            outgoing,
            kind,
            in_flux,
            out_flux,
        },
        defect,
    ))
}

/// Biproportional fit of a nonnegative matrix to prescribed row and column
/// sums (assumed consistent). Ends on a row pass, so row sums are exact and
/// column sums carry the residual, which must be below tolerance.
fn sinkhorn(a: &mut [f64], rows: &[f64], cols: &[f64]) -> Result<()> {
    let n_in = rows.len();
    let n_out = cols.len();
    for _ in 0..SINKHORN_MAX {
        for ul in 0..n_out {
            let mut s = 0.0;
            for jl in 0..n_in {
                s += a[jl * n_out + ul];
            }
            if !(s > 0.0) {
                return Err(Error::InvalidParam(
                    "wall scattering column has no mass to fit".into(),
                ));
            }
            let f = cols[ul] / s;
            for jl in 0..n_in {
                a[jl * n_out + ul] *= f;
            }
        }
        for (jl, &r) in rows.iter().enumerate() {
            let row = &mut a[jl * n_out..(jl + 1) * n_out];
            let s: f64 = row.iter().sum();
            if !(s > 0.0) {
                return Err(Error::InvalidParam(
                    "wall scattering row has no mass to fit".into(),
                ));
            }
            let f = r / s;
            for x in row {
                *x *= f;
            }
        }
        let mut worst = 0.0f64;
        for ul in 0..n_out {
            let mut s = 0.0;
            for jl in 0..n_in {
                s += a[jl * n_out + ul];
            }
            worst = worst.max((s / cols[ul] - 1.0).abs());
        }
        if worst < SINKHORN_TOL {
            return Ok(());
        }
    }
    Err(Error::Diverged(
        "wall flux fitting did not reach tolerance".into(),
    ))
}
