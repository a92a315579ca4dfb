//! Backward-in-time boundary cycles: trace a characteristic to its
//! successive wall interactions, drawing each earlier leg velocity from the
//! reversed scattering law, and estimate how quickly the probability of
//! reaching many interactions decays.
//!
//! Sign bookkeeping is centralized in [`reverse_scatter`]: a stored cycle
//! velocity points at its wall (positive normal component), the scattering
//! sampler works on re-emissions (negative normal component), and the two
//! pictures are glued by negating on the way in and out.

use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::rng;
use crate::stats::WilsonInterval;
use crate::wall::{BoundaryModel, WallPatch};
use crate::Vec3;
use rand::Rng;

/// One stored wall interaction: the characteristic was at the boundary
/// point `x` at time `t`, and the leg arriving there travels with `v`
/// (striking orientation, `n(x).v > 0`).
#[derive(Debug, Clone)]
pub struct CycleNode {
    pub t: f64,
    pub x: Vec3,
    pub v: Vec3,
}

/// Why the backward trace stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// The next wall time was nonpositive (or no wall is ever met): the
    /// characteristic reaches the initial datum after the stored number of
    /// interactions.
    ReachedDatum(usize),
    /// The interaction cap was hit with time still remaining.
    Truncated(usize),
}

/// Backward cycle anchored at `(t, x, v)`.
#[derive(Debug, Clone)]
pub struct BackTimeCycle {
    pub anchor_t: f64,
    pub anchor_x: Vec3,
    pub anchor_v: Vec3,
    /// Interactions with strictly positive time, newest first (times
    /// strictly decreasing).
    pub nodes: Vec<CycleNode>,
    pub termination: Termination,
}

impl BackTimeCycle {
    /// Number of wall interactions with positive time.
    pub fn hits(&self) -> usize {
        self.nodes.len()
    }

    /// Largest replay residual: every stored point must equal the straight
    /// flight from its predecessor (slab tangentials compared modulo the
    /// wrap length).
    pub fn replay_defect(&self, dom: &Domain) -> f64 {
        let mut worst: f64 = 0.0;
        let mut prev_t = self.anchor_t;
        let mut prev_x = self.anchor_x;
        let mut prev_v = self.anchor_v;
        for node in &self.nodes {
            let flight = dom.wrap_point(prev_x - prev_v.scale(prev_t - node.t));
            let d = flight - node.x;
            let d = dom.wrap_point(Vec3::new(d.x.abs(), d.y.abs(), d.z.abs()));
            let fold = |c: f64, period: Option<f64>| match period {
                Some(p) => c.min(p - c),
                None => c,
            };
            let period = match dom.shape() {
                crate::geometry::Shape::Slab { wrap, .. } => Some(wrap),
                _ => None,
            };
            let res = (fold(d.x, None).powi(2)
                + fold(d.y, period).powi(2)
                + fold(d.z, period).powi(2))
            .sqrt();
            worst = worst.max(res);
            prev_t = node.t;
            prev_x = node.x;
            prev_v = node.v;
        }
        worst
    }
}

/// Draw the earlier leg velocity at a wall: the later leg leaves the point
/// with `outgoing`, the sampler sees its reversal as the strike, and the
/// reversed re-emission is the earlier leg in striking orientation.
pub fn reverse_scatter<R: Rng + ?Sized>(
    outgoing: Vec3,
    wall: &WallPatch,
    model: &BoundaryModel,
    rng: &mut R,
) -> Result<Vec3> {
    Ok(-model.sample(-outgoing, wall, rng)?)
}

/// Trace the backward cycle from `(t, x, v)` until the datum is reached or
/// `k_max` interactions are stored.
pub fn sample_cycle<R: Rng + ?Sized>(
    t: f64,
    x: Vec3,
    v: Vec3,
    dom: &Domain,
    model: &BoundaryModel,
    k_max: usize,
    rng: &mut R,
) -> Result<BackTimeCycle> {
    if k_max == 0 {
        return Err(Error::Domain("cycle needs a positive interaction cap".into()));
    }
    let mut nodes = Vec::new();
    let mut cur_t = t;
    let mut cur_x = x;
    let mut cur_v = v;
    let termination = loop {
        let step = dom.back_time_hit(cur_t, cur_x, cur_v)?;
        if step.reaches_datum() {
            break Termination::ReachedDatum(nodes.len());
        }
        let hit = step.hit.expect("positive wall time implies a wall hit");
        let earlier = reverse_scatter(cur_v, &hit.wall, model, rng)?;
        nodes.push(CycleNode { t: step.t1, x: hit.point, v: earlier });
        if nodes.len() == k_max {
            break Termination::Truncated(k_max);
        }
        cur_t = step.t1;
        cur_x = hit.point;
        cur_v = earlier;
    };
    Ok(BackTimeCycle { anchor_t: t, anchor_x: x, anchor_v: v, nodes, termination })
}

/// Membership of each stored velocity in the moderate set: normal component
/// above `delta` in magnitude and speed at most `1/delta`.
pub fn velocity_set_census(
    cycle: &BackTimeCycle,
    dom: &Domain,
    delta: f64,
) -> Result<Vec<bool>> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParam(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(cycle
        .nodes
        .iter()
        .map(|node| {
            let n = dom.outward_normal(node.x);
            n.dot(node.v).abs() > delta && node.v.norm() <= 1.0 / delta
        })
        .collect())
}

/// Configuration of a decay estimate: repeated cycles from one anchor.
#[derive(Debug, Clone)]
pub struct DecayConfig {
    pub t: f64,
    pub x: Vec3,
    pub v: Vec3,
    pub k_max: usize,
    pub trials: u64,
    pub seed: u64,
}

/// Empirical survival counts: how many trials reach at least `k` wall
/// interactions with positive time.
#[derive(Debug, Clone)]
pub struct CycleStats {
    pub trials: u64,
    /// `survivors[k-1]` counts trials with at least `k` interactions;
    /// non-increasing in `k` by construction.
    pub survivors: Vec<u64>,
    /// Trials cut off by the cap (their deeper interactions are unknown).
    pub truncated: u64,
}

impl CycleStats {
    /// Empirical probability that the cycle reaches at least `k`
    /// interactions, `k >= 1`.
    pub fn p_hat(&self, k: usize) -> f64 {
        self.survivors[k - 1] as f64 / self.trials as f64
    }

    /// Wilson score interval for `p_hat(k)`.
    pub fn interval(&self, k: usize, z: f64) -> Result<WilsonInterval> {
        crate::stats::wilson_interval(self.survivors[k - 1], self.trials, z)
    }
}

/// Estimate the per-depth survival probabilities by independent trials with
/// deterministic per-trial streams.
pub fn interaction_decay(
    config: &DecayConfig,
    dom: &Domain,
    model: &BoundaryModel,
) -> Result<CycleStats> {
    if config.trials == 0 {
        return Err(Error::Domain("decay estimate needs at least one trial".into()));
    }
    if config.k_max == 0 {
        return Err(Error::Domain("cycle needs a positive interaction cap".into()));
    }
    let mut survivors = vec![0u64; config.k_max];
    let mut truncated = 0u64;
    for trial in 0..config.trials {
        let mut stream = rng::substream(config.seed, 1, trial);
        let cycle = sample_cycle(
            config.t,
            config.x,
            config.v,
            dom,
            model,
            config.k_max,
            &mut stream,
        )?;
        for k in 0..cycle.hits() {
            survivors[k] += 1;
        }
        if matches!(cycle.termination, Termination::Truncated(_)) {
            truncated += 1;
        }
    }
    Ok(CycleStats { trials: config.trials, survivors, truncated })
}
