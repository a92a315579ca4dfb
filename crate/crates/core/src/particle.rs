//! Event-driven free-molecular transport in bounded domains.
//!
//! Particles fly along straight characteristics between wall events; the
//! geometry supplies exact flight times, so transport carries no time-step
//! error. Each wall event draws a re-emitted velocity from the boundary
//! re-emission law and leaves the particle weight untouched. The engine
//! tallies per-wall fluxes, velocity moments at fixed sample instants, and
//! speed histograms, and snapshots the initial and final phase states.
//!
//! Particles are independent: each owns a random substream keyed by its id,
//! and a multi-worker run partitions ids into contiguous ranges whose
//! partial tallies merge in a fixed order. Results are reproducible for a
//! fixed worker count and statistically identical across worker counts.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::geometry::{Domain, Shape, WallTemperature};
use crate::rng;
use crate::stats::Moments;
use crate::vec3::Vec3;
use crate::wall::{AccommodationPair, BoundaryModel, WallPatch};
use crate::{Error, Result};

const PARTICLE_STREAM: u64 = 21;

/// Bin layout of the second-half velocity-component histogram.
pub const WINDOW_BINS: usize = 121;
pub const WINDOW_LO: f64 = -6.05;
pub const WINDOW_BIN_WIDTH: f64 = 0.1;

/// One simulated particle. The weight is set at birth and never changes;
/// walls re-emit, nothing absorbs.
#[derive(Debug, Clone, Copy)]
pub struct Particle {
    pub x: Vec3,
    pub v: Vec3,
    pub weight: f64,
}

/// Initial velocity law of the population.
#[derive(Debug, Clone, Copy)]
pub enum VelocityInit {
    /// Centered Gaussian with variance `temperature` per component.
    Maxwellian { temperature: f64 },
    /// Every particle starts with the same velocity.
    Fixed { velocity: Vec3 },
}

/// Transient run configuration. Positions start uniform over the domain.
#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    pub domain: Domain,
    pub model: BoundaryModel,
    pub init: VelocityInit,
    pub n_particles: usize,
    pub particle_weight: f64,
    pub t_end: f64,
    /// Number of moment sample instants, uniformly spaced over `[0, t_end]`
    /// including both endpoints.
    pub sample_count: usize,
    pub seed: u64,
    pub threads: usize,
}

/// Speed histogram with fixed-width bins starting at zero; speeds past the
/// last bin land in `overflow`.
#[derive(Debug, Clone)]
pub struct SpeedHistogram {
    bin_width: f64,
    counts: Vec<u64>,
    overflow: u64,
}

impl SpeedHistogram {
    fn new(bin_width: f64, bins: usize) -> Self {
        SpeedHistogram { bin_width, counts: vec![0; bins], overflow: 0 }
    }

    fn record(&mut self, speed: f64) {
        let k = (speed / self.bin_width) as usize;
        if k < self.counts.len() {
            self.counts[k] += 1;
        } else {
            self.overflow += 1;
        }
    }

    fn merge(&mut self, other: &SpeedHistogram) {
        for (c, o) in self.counts.iter_mut().zip(&other.counts) {
            *c += o;
        }
        self.overflow += other.overflow;
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn overflow(&self) -> u64 {
        self.overflow
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.overflow
    }
}

/// Flux bookkeeping of one wall. Every event books the same weight on the
/// incident and the emitted side, so the two weights agree exactly.
#[derive(Debug, Clone)]
pub struct WallTally {
    pub label: &'static str,
    pub incident_events: u64,
    pub emitted_events: u64,
    pub incident_weight: f64,
    pub emitted_weight: f64,
    pub incident_speeds: SpeedHistogram,
    pub emitted_speeds: SpeedHistogram,
}

impl WallTally {
    fn new(label: &'static str) -> Self {
        WallTally {
            label,
            incident_events: 0,
            emitted_events: 0,
            incident_weight: 0.0,
            emitted_weight: 0.0,
            incident_speeds: SpeedHistogram::new(0.1, 80),
            emitted_speeds: SpeedHistogram::new(0.1, 80),
        }
    }

    fn merge(&mut self, other: &WallTally) {
        self.incident_events += other.incident_events;
        self.emitted_events += other.emitted_events;
        self.incident_weight += other.incident_weight;
        self.emitted_weight += other.emitted_weight;
        self.incident_speeds.merge(&other.incident_speeds);
        self.emitted_speeds.merge(&other.emitted_speeds);
    }
}

/// Cross-particle velocity moments at one sample instant.
#[derive(Debug, Clone, Copy, Default)]
pub struct MomentSample {
    pub time: f64,
    /// Per-component mean velocity.
    pub momentum: [Moments; 3],
    /// Mean of `|v|^2`.
    pub energy: Moments,
    /// Mean position along the first axis in units of the domain scale
    /// (radius or width): the center of mass on the temperature axis.
    pub axis_center: Moments,
}

impl MomentSample {
    fn push(&mut self, v: Vec3, axis: f64) {
        self.momentum[0].push(v.x);
        self.momentum[1].push(v.y);
        self.momentum[2].push(v.z);
        self.energy.push(v.norm_sq());
        self.axis_center.push(axis);
    }

    fn merge(&mut self, other: &MomentSample) {
        for (m, o) in self.momentum.iter_mut().zip(&other.momentum) {
            m.merge(o);
        }
        self.energy.merge(&other.energy);
        self.axis_center.merge(&other.axis_center);
    }
}

/// Everything a transient run reports.
#[derive(Debug, Clone)]
pub struct SimObservables {
    /// Total weight at birth and at `t_end`, summed in particle order.
    pub initial_mass: f64,
    pub final_mass: f64,
    /// One tally per wall: a single entry for ball and disk, the `x = 0`
    /// and `x = width` faces for the slab.
    pub walls: Vec<WallTally>,
    /// Moment time series at the configured sample instants.
    pub moments: Vec<MomentSample>,
    /// Speed histogram of the population at `t_end`.
    pub volume_speeds: SpeedHistogram,
    /// First-component velocity histogram pooled over all sample instants
    /// in the second half of the horizon; ends clamp out-of-range values.
    pub window_v1: Vec<u64>,
    pub window_samples: u64,
    /// Phase snapshots in particle order.
    pub initial_velocities: Vec<Vec3>,
    pub final_velocities: Vec<Vec3>,
    pub final_positions: Vec<Vec3>,
}

fn wall_labels(shape: Shape) -> Vec<&'static str> {
    match shape {
        Shape::Ball { .. } | Shape::Disk { .. } => vec!["wall"],
        Shape::Slab { .. } => vec!["lower face", "upper face"],
    }
}

fn wall_index(shape: Shape, outward: Vec3) -> usize {
    match shape {
        Shape::Ball { .. } | Shape::Disk { .. } => 0,
        Shape::Slab { .. } => usize::from(outward.x > 0.0),
    }
}

fn domain_scale(shape: Shape) -> f64 {
    match shape {
        Shape::Ball { radius } | Shape::Disk { radius } => radius,
        Shape::Slab { width, .. } => width,
    }
}

fn window_bin(v1: f64) -> usize {
    let k = ((v1 - WINDOW_LO) / WINDOW_BIN_WIDTH).floor();
    (k as i64).clamp(0, WINDOW_BINS as i64 - 1) as usize
}

fn sample_position<R: Rng + ?Sized>(domain: &Domain, rng: &mut R) -> Vec3 {
    match domain.shape() {
        Shape::Ball { radius } => loop {
            let p = Vec3::new(
                2.0 * rng.random::<f64>() - 1.0,
                2.0 * rng.random::<f64>() - 1.0,
                2.0 * rng.random::<f64>() - 1.0,
            );
            if p.norm_sq() <= 1.0 {
                break p.scale(radius);
            }
        },
        Shape::Disk { radius } => loop {
            let p = Vec3::new(2.0 * rng.random::<f64>() - 1.0, 2.0 * rng.random::<f64>() - 1.0, 0.0);
            if p.norm_sq() <= 1.0 {
                break p.scale(radius);
            }
        },
        Shape::Slab { width, wrap } => Vec3::new(
            rng.random::<f64>() * width,
            rng.random::<f64>() * wrap,
            rng.random::<f64>() * wrap,
        ),
    }
}

fn sample_velocity<R: Rng + ?Sized>(init: VelocityInit, rng: &mut R) -> Vec3 {
    match init {
        VelocityInit::Maxwellian { temperature } => {
            let s = temperature.sqrt();
            Vec3::new(
                s * rng.sample::<f64, _>(StandardNormal),
                s * rng.sample::<f64, _>(StandardNormal),
                s * rng.sample::<f64, _>(StandardNormal),
            )
        }
        VelocityInit::Fixed { velocity } => velocity,
    }
}

fn validate(cfg: &SimConfig) -> Result<()> {
    if cfg.n_particles == 0 {
        return Err(Error::InvalidParam("the run needs at least one particle".into()));
    }
    if !(cfg.particle_weight.is_finite() && cfg.particle_weight > 0.0) {
        return Err(Error::InvalidParam(format!(
            "particle weight must be positive and finite, got {}",
            cfg.particle_weight
        )));
    }
    if !(cfg.t_end.is_finite() && cfg.t_end > 0.0) {
        return Err(Error::InvalidParam(format!(
            "horizon must be positive and finite, got {}",
            cfg.t_end
        )));
    }
    if cfg.sample_count < 2 {
        return Err(Error::InvalidParam(
            "at least two sample instants are needed, the endpoints".into(),
        ));
    }
    if cfg.threads == 0 {
        return Err(Error::InvalidParam("worker count must be at least one".into()));
    }
    if let VelocityInit::Maxwellian { temperature } = cfg.init {
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(Error::InvalidParam(format!(
                "initial temperature must be positive, got {temperature}"
            )));
        }
    }
    if let VelocityInit::Fixed { velocity } = cfg.init {
        if !velocity.norm().is_finite() {
            return Err(Error::InvalidParam("initial velocity must be finite".into()));
        }
    }
    if let BoundaryModel::Maxwell(c) = cfg.model {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::InvalidParam(format!(
                "mixture weight must lie in [0, 1], got {c}"
            )));
        }
    }
    Ok(())
}

struct Partial {
    initial_mass: f64,
    final_mass: f64,
    walls: Vec<WallTally>,
    moments: Vec<MomentSample>,
    volume_speeds: SpeedHistogram,
    window_v1: Vec<u64>,
    window_samples: u64,
}

impl Partial {
    fn new(cfg: &SimConfig, times: &[f64]) -> Self {
        Partial {
            initial_mass: 0.0,
            final_mass: 0.0,
            walls: wall_labels(cfg.domain.shape()).into_iter().map(WallTally::new).collect(),
            moments: times
                .iter()
                .map(|&t| MomentSample { time: t, ..MomentSample::default() })
                .collect(),
            volume_speeds: SpeedHistogram::new(0.1, 80),
            window_v1: vec![0; WINDOW_BINS],
            window_samples: 0,
        }
    }

    fn merge(&mut self, other: &Partial) {
        self.initial_mass += other.initial_mass;
        self.final_mass += other.final_mass;
        for (w, o) in self.walls.iter_mut().zip(&other.walls) {
            w.merge(o);
        }
        for (m, o) in self.moments.iter_mut().zip(&other.moments) {
            m.merge(o);
        }
        self.volume_speeds.merge(&other.volume_speeds);
        for (c, o) in self.window_v1.iter_mut().zip(&other.window_v1) {
            *c += o;
        }
        self.window_samples += other.window_samples;
    }
}

/// Walks the ids in `lo..lo + out_v.len()`; snapshot slices are the
/// caller's windows into the full arrays.
#[allow(clippy::too_many_arguments)]
fn simulate_range(
    cfg: &SimConfig,
    times: &[f64],
    lo: usize,
    out_init_v: &mut [Vec3],
    out_final_v: &mut [Vec3],
    out_final_x: &mut [Vec3],
) -> Result<Partial> {
    let mut part = Partial::new(cfg, times);
    let shape = cfg.domain.shape();
    let scale = domain_scale(shape);
    let window_start = 0.5 * cfg.t_end;
    for offset in 0..out_init_v.len() {
        let id = lo + offset;
        let mut rng = rng::substream(cfg.seed, PARTICLE_STREAM, id as u64);
        let mut p = Particle {
            x: sample_position(&cfg.domain, &mut rng),
            v: sample_velocity(cfg.init, &mut rng),
            weight: cfg.particle_weight,
        };
        out_init_v[offset] = p.v;
        part.initial_mass += p.weight;
        let mut t = 0.0;
        let mut next = 0usize;
        loop {
            let hit = cfg.domain.first_exit_forward(p.x, p.v)?;
            let t_hit = hit.as_ref().map_or(f64::INFINITY, |h| t + h.time_of_flight);
            let cut = t_hit.min(cfg.t_end);
            while next < times.len() && times[next] <= cut {
                let at = p.x + p.v.scale(times[next] - t);
                part.moments[next].push(p.v, at.x / scale);
                if times[next] >= window_start {
                    part.window_v1[window_bin(p.v.x)] += 1;
                    part.window_samples += 1;
                }
                next += 1;
            }
            if t_hit >= cfg.t_end {
                p.x = cfg.domain.wrap_point(p.x + p.v.scale(cfg.t_end - t));
                break;
            }
            // unwrap: t_hit finite only with a hit present
            let h = hit.unwrap();
            if h.normal.dot(p.v) <= 0.0 {
                // grazing contact at rounding level: touch and fly on
                p.x = h.point - h.normal.scale(1e-9 * scale);
                t = t_hit;
                continue;
            }
            let w = &mut part.walls[wall_index(shape, h.normal)];
            w.incident_events += 1;
            w.incident_weight += p.weight;
            w.incident_speeds.record(p.v.norm());
            p.v = cfg.model.sample(p.v, &h.wall, &mut rng)?;
            let w = &mut part.walls[wall_index(shape, h.normal)];
            w.emitted_events += 1;
            w.emitted_weight += p.weight;
            w.emitted_speeds.record(p.v.norm());
            p.x = h.point;
            t = t_hit;
        }
        part.volume_speeds.record(p.v.norm());
        part.final_mass += p.weight;
        out_final_v[offset] = p.v;
        out_final_x[offset] = p.x;
    }
    Ok(part)
}

/// Runs the transient population to `t_end` and reports the tallies.
pub fn run_transient(cfg: &SimConfig) -> Result<SimObservables> {
    validate(cfg)?;
    let n = cfg.n_particles;
    let k = cfg.sample_count;
    let times: Vec<f64> =
        (0..k).map(|i| cfg.t_end * i as f64 / (k - 1) as f64).collect();
    let mut init_v = vec![Vec3::ZERO; n];
    let mut final_v = vec![Vec3::ZERO; n];
    let mut final_x = vec![Vec3::ZERO; n];
    let workers = cfg.threads.min(n);
    let merged = if workers <= 1 {
        simulate_range(cfg, &times, 0, &mut init_v, &mut final_v, &mut final_x)?
    } else {
        let chunk = n.div_ceil(workers);
        let mut partials: Vec<Partial> = Vec::with_capacity(workers);
        std::thread::scope(|scope| -> Result<()> {
            let mut handles = Vec::with_capacity(workers);
            let (mut iv, mut fv, mut fx) =
                (init_v.as_mut_slice(), final_v.as_mut_slice(), final_x.as_mut_slice());
            let mut lo = 0usize;
            let times = &times;
            while lo < n {
                let len = chunk.min(n - lo);
                let (iv_head, iv_tail) = iv.split_at_mut(len);
                let (fv_head, fv_tail) = fv.split_at_mut(len);
                let (fx_head, fx_tail) = fx.split_at_mut(len);
                iv = iv_tail;
                fv = fv_tail;
                fx = fx_tail;
                handles.push(scope.spawn(move || {
                    simulate_range(cfg, times, lo, iv_head, fv_head, fx_head)
                }));
                lo += len;
            }
            for h in handles {
                let part = h
                    .join()
                    .map_err(|_| Error::Domain("simulation worker panicked".into()))??;
                partials.push(part);
            }
            Ok(())
        })?;
        let mut it = partials.into_iter();
        // unwrap: workers >= 1 guarantees a first partial
        let mut acc = it.next().unwrap();
        for p in it {
            acc.merge(&p);
        }
        acc
    };
    Ok(SimObservables {
        initial_mass: merged.initial_mass,
        final_mass: merged.final_mass,
        walls: merged.walls,
        moments: merged.moments,
        volume_speeds: merged.volume_speeds,
        window_v1: merged.window_v1,
        window_samples: merged.window_samples,
        initial_velocities: init_v,
        final_velocities: final_v,
        final_positions: final_x,
    })
}

/// Two-dimensional histogram of re-emitted velocities in wall coordinates:
/// first tangential component against normal speed, square bins of width
/// `bin_width` covering `[lo, lo + bins * bin_width)` on both axes, mass
/// normalized so that in-range mass, `out_of_range`, and the atom sum to 1.
#[derive(Debug, Clone)]
pub struct BeamHistogram {
    pub lo: f64,
    pub bin_width: f64,
    pub bins: usize,
    /// Row-major `[tangential][normal]` mass fractions.
    pub mass: Vec<f64>,
    pub out_of_range: f64,
    /// Fraction of draws that came back exactly at the mirror velocity.
    pub atom_weight: f64,
    /// Mirror velocity in histogram coordinates.
    pub atom_point: (f64, f64),
    /// Sample mean and spread of the first tangential component.
    pub tangential: Moments,
    /// Sample mean and spread of the normal speed.
    pub normal_magnitude: Moments,
    /// Center of the heaviest bin.
    pub mode: (f64, f64),
    pub samples: usize,
}

impl BeamHistogram {
    /// Mass fraction within Euclidean distance `radius` of `center`,
    /// counting bins by their centers and the atom by its exact location.
    pub fn mass_within(&self, center: (f64, f64), radius: f64) -> f64 {
        let mut total = 0.0;
        for i in 0..self.bins {
            let a = self.lo + (i as f64 + 0.5) * self.bin_width;
            for j in 0..self.bins {
                let b = self.lo + (j as f64 + 0.5) * self.bin_width;
                if (a - center.0).hypot(b - center.1) <= radius {
                    total += self.mass[i * self.bins + j];
                }
            }
        }
        let (pa, pb) = self.atom_point;
        if (pa - center.0).hypot(pb - center.1) <= radius {
            total += self.atom_weight;
        }
        total
    }
}

/// Fires `n` copies of `u_in` at the wall element and histograms the
/// re-emitted velocities in wall coordinates.
pub fn beam_reflection_histogram<R: Rng + ?Sized>(
    u_in: Vec3,
    wall: &WallPatch,
    model: BoundaryModel,
    n: usize,
    rng: &mut R,
) -> Result<BeamHistogram> {
    if n < 1000 {
        return Err(Error::InvalidParam(format!(
            "beam statistics need at least 1000 samples, got {n}"
        )));
    }
    let lo = -6.0;
    let bin_width = 0.1;
    let bins = 120usize;
    let mirror = wall.specular(u_in);
    let hm = wall.decompose(mirror);
    let mut hist = BeamHistogram {
        lo,
        bin_width,
        bins,
        mass: vec![0.0; bins * bins],
        out_of_range: 0.0,
        atom_weight: 0.0,
        atom_point: (hm.v_par[0], -hm.v_perp),
        tangential: Moments::default(),
        normal_magnitude: Moments::default(),
        mode: (0.0, 0.0),
        samples: n,
    };
    let share = 1.0 / n as f64;
    let mut atom_hits = 0u64;
    for _ in 0..n {
        let v = model.sample(u_in, wall, rng)?;
        let h = wall.decompose(v);
        let (a, b) = (h.v_par[0], -h.v_perp);
        hist.tangential.push(a);
        hist.normal_magnitude.push(b);
        if v == mirror {
            atom_hits += 1;
            continue;
        }
        let i = ((a - lo) / bin_width).floor();
        let j = ((b - lo) / bin_width).floor();
        if i >= 0.0 && j >= 0.0 && (i as usize) < bins && (j as usize) < bins {
            hist.mass[i as usize * bins + j as usize] += share;
        } else {
            hist.out_of_range += share;
        }
    }
    hist.atom_weight = atom_hits as f64 * share;
    let mut best = (0usize, 0.0f64);
    for (k, &m) in hist.mass.iter().enumerate() {
        if m > best.1 {
            best = (k, m);
        }
    }
    hist.mode = if hist.atom_weight > best.1 {
        hist.atom_point
    } else {
        (
            lo + (best.0 / bins) as f64 * bin_width + 0.5 * bin_width,
            lo + (best.0 % bins) as f64 * bin_width + 0.5 * bin_width,
        )
    };
    Ok(hist)
}

/// Long-run configuration for a wall with an angular temperature profile.
#[derive(Debug, Clone, Copy)]
pub struct CreepConfig {
    /// Ball or disk with an `Angular` wall-temperature field.
    pub domain: Domain,
    pub r: AccommodationPair,
    pub n_particles: usize,
    pub particle_weight: f64,
    pub t_end: f64,
    pub sample_count: usize,
    pub seed: u64,
    pub threads: usize,
}

/// Steady-state summary of a long angular-temperature run. Averages are
/// taken over the second half of the horizon.
#[derive(Debug, Clone)]
pub struct CreepReport {
    pub observables: SimObservables,
    /// Every compared moment moved less than three combined standard errors
    /// between the three-quarter instant and the final one.
    pub stationary: bool,
    /// Largest moment movement in combined-standard-error units.
    pub worst_window_gap: f64,
    /// Center of mass along the temperature axis, averaged over the window,
    /// in units of the domain radius.
    pub axis_density_shift: f64,
    /// Batch-means standard error of the window average: the window instants
    /// are serially correlated, so the spread of eight contiguous block
    /// means estimates the uncertainty instead of the cross-particle spread.
    pub axis_shift_std_err: f64,
    /// L1 distance between the windowed first-component velocity histogram
    /// and the base-temperature Gaussian law.
    pub l1_distance: f64,
}

fn gauss_cdf(x: f64, sigma: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    crate::stats::norm_cdf(x / sigma)
}

/// Runs the population far past relaxation and summarizes the steady window.
pub fn thermal_creep_steady(cfg: &CreepConfig) -> Result<CreepReport> {
    let base = match cfg.domain.temperature_field() {
        WallTemperature::Angular { base, amplitude } => {
            if amplitude.abs() > 0.1 * base + 1e-12 {
                return Err(Error::InvalidParam(format!(
                    "temperature amplitude {amplitude} exceeds a tenth of the base {base}"
                )));
            }
            base
        }
        _ => {
            return Err(Error::InvalidParam(
                "the steady run needs an angular wall-temperature field".into(),
            ))
        }
    };
    if (cfg.r.r_perp() - 1.0).abs() > 0.1 + 1e-12 || (cfg.r.r_par() - 1.0).abs() > 0.1 + 1e-12 {
        return Err(Error::InvalidParam(
            "the steady run needs accommodation within 0.1 of full".into(),
        ));
    }
    let sim = SimConfig {
        domain: cfg.domain,
        model: BoundaryModel::Cl(cfg.r),
        init: VelocityInit::Maxwellian { temperature: base },
        n_particles: cfg.n_particles,
        particle_weight: cfg.particle_weight,
        t_end: cfg.t_end,
        sample_count: cfg.sample_count,
        seed: cfg.seed,
        threads: cfg.threads,
    };
    let obs = run_transient(&sim)?;
    let k = obs.moments.len();
    let a = &obs.moments[(3 * (k - 1)) / 4];
    let b = &obs.moments[k - 1];
    let mut worst = 0.0f64;
    let pairs = [
        (&a.momentum[0], &b.momentum[0]),
        (&a.momentum[1], &b.momentum[1]),
        (&a.momentum[2], &b.momentum[2]),
        (&a.energy, &b.energy),
        (&a.axis_center, &b.axis_center),
    ];
    for (ma, mb) in pairs {
        let se = (ma.std_err().powi(2) + mb.std_err().powi(2)).sqrt();
        if se > 0.0 {
            worst = worst.max((ma.mean() - mb.mean()).abs() / se);
        }
    }
    let window: Vec<f64> = obs
        .moments
        .iter()
        .filter(|m| m.time >= 0.5 * cfg.t_end)
        .map(|m| m.axis_center.mean())
        .collect();
    let axis_density_shift = window.iter().sum::<f64>() / window.len() as f64;
    let axis_shift_std_err = if window.len() >= 16 {
        let blocks = 8usize;
        let len = window.len() / blocks;
        let mut spread = Moments::default();
        for c in window.chunks(len).take(blocks) {
            spread.push(c.iter().sum::<f64>() / c.len() as f64);
        }
        spread.std_err()
    } else {
        b.axis_center.std_err()
    };
    let total = obs.window_samples as f64;
    let sigma = base.sqrt();
    let mut l1 = 0.0;
    for (i, &c) in obs.window_v1.iter().enumerate() {
        let left = if i == 0 { f64::NEG_INFINITY } else { WINDOW_LO + i as f64 * WINDOW_BIN_WIDTH };
        let right = if i + 1 == WINDOW_BINS {
            f64::INFINITY
        } else {
            WINDOW_LO + (i + 1) as f64 * WINDOW_BIN_WIDTH
        };
        let expected = gauss_cdf(right, sigma) - gauss_cdf(left, sigma);
        l1 += (c as f64 / total - expected).abs();
    }
    Ok(CreepReport {
        observables: obs,
        stationary: worst <= 3.0,
        worst_window_gap: worst,
        axis_density_shift,
        axis_shift_std_err,
        l1_distance: l1,
    })
}
