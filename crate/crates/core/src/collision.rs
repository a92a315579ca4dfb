//! Hard-sphere binary collision machinery.
//!
//! The gain integral runs over an impact direction on the unit sphere and a
//! partner velocity; both Monte Carlo estimators here importance-sample the
//! partner from a centered Gaussian and the direction uniformly, and report
//! a one-sigma error alongside the estimate. A dense product-rule quadrature
//! of the same discretized integrand is kept as a cross-check oracle.

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::gamma;

use crate::analytics::quad;
use crate::error::{Error, Result};
use crate::vec3::Vec3;

/// Tolerance on |omega| - 1 for impact directions.
const UNIT_TOL: f64 = 1e-12;

/// Relative speeds below this are rejected by the samplers when the kernel
/// exponent is negative. The excluded ball has measure O(1e-24), so the
/// estimator bias is far below 1e-10.
const COINCIDENCE_CUTOFF: f64 = 1e-8;

/// Collision kernel parameters.
///
/// The kernel is `|v - u|^kappa |cos angle(v - u, omega)|`: the angular
/// factor is fixed to the absolute cosine, which saturates the linear
/// angular bound with constant 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionModel {
    kappa: f64,
}

impl CollisionModel {
    /// Kernel with relative-speed exponent `kappa` in (-3, 1].
    pub fn new(kappa: f64) -> Result<Self> {
        if !kappa.is_finite() || kappa <= -3.0 || kappa > 1.0 {
            return Err(Error::InvalidParam(format!(
                "kernel exponent must lie in (-3, 1], got {kappa}"
            )));
        }
        Ok(CollisionModel { kappa })
    }

    /// Hard-sphere kernel, exponent 1.
    pub fn hard_sphere() -> Self {
        CollisionModel { kappa: 1.0 }
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    fn relative_speed_factor(&self, r: f64) -> f64 {
        if self.kappa == 1.0 {
            r
        } else {
            r.powf(self.kappa)
        }
    }
}

/// Unnormalized Gaussian weight exp(-|v|^2 / (2 t)).
pub fn gaussian_weight(v: Vec3, t: f64) -> f64 {
    (-v.norm_sq() / (2.0 * t)).exp()
}

fn check_unit(omega: Vec3) -> Result<()> {
    if (omega.norm() - 1.0).abs() > UNIT_TOL {
        return Err(Error::Domain(format!(
            "impact direction must be a unit vector, |omega| = {}",
            omega.norm()
        )));
    }
    Ok(())
}

fn deflect(u: Vec3, v: Vec3, omega: Vec3) -> (Vec3, Vec3) {
    let d = (u - v).dot(omega);
    (u - omega.scale(d), v + omega.scale(d))
}

/// Velocities after an elastic binary collision with impact direction
/// `omega`. Momentum and kinetic energy are conserved to rounding, and
/// applying the map twice with the same direction restores the inputs.
pub fn post_collision(u: Vec3, v: Vec3, omega: Vec3) -> Result<(Vec3, Vec3)> {
    check_unit(omega)?;
    Ok(deflect(u, v, omega))
}

/// Collision kernel `|v - u|^kappa |cos angle(v - u, omega)|`.
///
/// Coincident velocities return 0: the relative direction is undefined on a
/// null set, and for negative exponents the singular point is excluded from
/// every quadrature in this module.
pub fn kernel_b(u: Vec3, v: Vec3, omega: Vec3, model: &CollisionModel) -> Result<f64> {
    check_unit(omega)?;
    let rel = v - u;
    let r = rel.norm();
    if r == 0.0 {
        return Ok(0.0);
    }
    Ok(model.relative_speed_factor(r) * rel.dot(omega).abs() / r)
}

/// Uniform cubic velocity lattice with per-node trapezoid quadrature
/// weights. Node index runs z fastest: `i = (ix * m + iy) * m + iz`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityGrid {
    m: usize,
    v_max: f64,
    step: f64,
}

impl VelocityGrid {
    /// Lattice with `m` nodes per axis spanning [-v_max, v_max].
    /// `m` must be odd and at least 3 so the origin is a node.
    pub fn new(m: usize, v_max: f64) -> Result<Self> {
        if m < 3 || m % 2 == 0 {
            return Err(Error::InvalidParam(format!(
                "points per axis must be odd and at least 3, got {m}"
            )));
        }
        if !(v_max > 0.0) || !v_max.is_finite() {
            return Err(Error::InvalidParam(format!(
                "lattice extent must be positive and finite, got {v_max}"
            )));
        }
        let step = 2.0 * v_max / (m - 1) as f64;
        Ok(VelocityGrid { m, v_max, step })
    }

    /// Lattice sized for Maxwellian work at temperature `t`: extent
    /// 6 sqrt(t), beyond which the weight is below 1.6e-8.
    pub fn for_temperature(m: usize, t: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidParam(format!(
                "temperature must be positive and finite, got {t}"
            )));
        }
        VelocityGrid::new(m, 6.0 * t.sqrt())
    }

    pub fn points_per_axis(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.m * self.m * self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    fn axis_coord(&self, k: usize) -> f64 {
        -self.v_max + self.step * k as f64
    }

    fn axis_weight(&self, k: usize) -> f64 {
        if k == 0 || k == self.m - 1 {
            0.5 * self.step
        } else {
            self.step
        }
    }

    /// Velocity at flattened node index `i`.
    pub fn node(&self, i: usize) -> Vec3 {
        let iz = i % self.m;
        let iy = (i / self.m) % self.m;
        let ix = i / (self.m * self.m);
        Vec3::new(
            self.axis_coord(ix),
            self.axis_coord(iy),
            self.axis_coord(iz),
        )
    }

    /// Flattened index of the node at per-axis indices (ix, iy, iz).
    pub fn index_of(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.m + iy) * self.m + iz
    }

    /// Quadrature weight of node `i` (product of per-axis trapezoid weights).
    pub fn weight(&self, i: usize) -> f64 {
        let iz = i % self.m;
        let iy = (i / self.m) % self.m;
        let ix = i / (self.m * self.m);
        self.axis_weight(ix) * self.axis_weight(iy) * self.axis_weight(iz)
    }

    pub fn nodes(&self) -> impl Iterator<Item = Vec3> + '_ {
        (0..self.len()).map(|i| self.node(i))
    }

    /// Trilinear interpolation of `values` at `at`; zero outside the lattice.
    /// Exact for functions multilinear in (x, y, z).
    pub fn trilinear(&self, values: &[f64], at: Vec3) -> Result<f64> {
        self.check_values(values)?;
        let coords = [at.x, at.y, at.z];
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..3 {
            let t = (coords[a] + self.v_max) / self.step;
            if t < 0.0 || t > (self.m - 1) as f64 {
                return Ok(0.0);
            }
            let i0 = (t.floor() as usize).min(self.m - 2);
            base[a] = i0;
            frac[a] = t - i0 as f64;
        }
        let mut acc = 0.0;
        for cx in 0..2 {
            for cy in 0..2 {
                for cz in 0..2 {
                    let w = pick(frac[0], cx) * pick(frac[1], cy) * pick(frac[2], cz);
                    if w == 0.0 {
                        continue;
                    }
                    let idx = self.index_of(base[0] + cx, base[1] + cy, base[2] + cz);
                    acc += w * values[idx];
                }
            }
        }
        Ok(acc)
    }

    /// Corner indices and weights of the trilinear cell containing `at`,
    /// or None when the point lies outside the lattice. A value lookup
    /// through the stencil equals [`VelocityGrid::trilinear`].
    pub fn trilinear_stencil(&self, at: Vec3) -> Option<[(usize, f64); 8]> {
        let coords = [at.x, at.y, at.z];
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..3 {
            let t = (coords[a] + self.v_max) / self.step;
            if t < 0.0 || t > (self.m - 1) as f64 {
                return None;
            }
            let i0 = (t.floor() as usize).min(self.m - 2);
            base[a] = i0;
            frac[a] = t - i0 as f64;
        }
        let mut out = [(0usize, 0.0f64); 8];
        for (k, slot) in out.iter_mut().enumerate() {
            let (cx, cy, cz) = (k >> 2 & 1, k >> 1 & 1, k & 1);
            let w = pick(frac[0], cx) * pick(frac[1], cy) * pick(frac[2], cz);
            *slot = (self.index_of(base[0] + cx, base[1] + cy, base[2] + cz), w);
        }
        Some(out)
    }

    fn check_values(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::InvalidParam(format!(
                "grid has {} nodes but {} values were supplied",
                self.len(),
                values.len()
            )));
        }
        Ok(())
    }

    fn check_node(&self, node: usize) -> Result<()> {
        if node >= self.len() {
            return Err(Error::Domain(format!(
                "node {node} outside grid of {} nodes",
                self.len()
            )));
        }
        Ok(())
    }
}

fn pick(f: f64, side: usize) -> f64 {
    if side == 0 {
        1.0 - f
    } else {
        f
    }
}

/// Loss frequency of a grid-sampled distribution at velocity `v`: the
/// integral of the kernel against F over impact directions and partner
/// velocities. The direction integral of the angular factor is 2 pi and is
/// applied in closed form. For negative exponents the node coincident with
/// `v`, if any, is skipped; its cell contributes O(step^(kappa + 3)).
pub fn nu_of(grid: &VelocityGrid, f: &[f64], v: Vec3, model: &CollisionModel) -> Result<f64> {
    grid.check_values(f)?;
    let mut acc = 0.0;
    for (i, fi) in f.iter().enumerate() {
        if *fi == 0.0 {
            continue;
        }
        let r = (v - grid.node(i)).norm();
        if r == 0.0 && model.kappa() < 0.0 {
            continue;
        }
        acc += grid.weight(i) * model.relative_speed_factor(r) * fi;
    }
    Ok(2.0 * std::f64::consts::PI * acc)
}

/// Loss frequency of the unnormalized Gaussian weight of temperature `t`
/// at velocity `v`, by radial quadrature.
///
/// After the angular integrals the frequency reduces to a stable
/// one-dimensional integral of
/// `r^(kappa+1) (exp(-(r-s)^2 / 2t) - exp(-(r+s)^2 / 2t))`
/// with s = |v|, evaluated on a logarithmic abscissa so the integrable
/// endpoint behavior for negative exponents is resolved.
pub fn nu_maxwellian(t: f64, v: Vec3, model: &CollisionModel) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParam(format!(
            "temperature must be positive and finite, got {t}"
        )));
    }
    let tau = std::f64::consts::TAU;
    let kappa = model.kappa();
    let s = v.norm();
    let scale = t.sqrt();
    if s < 1e-9 * scale {
        // Central value: 2 pi (2t)^((kappa+3)/2) Gamma((kappa+3)/2) for the
        // velocity integral, times 2 pi from the direction integral.
        let radial = tau * (2.0 * t).powf(0.5 * (kappa + 3.0)) * gamma(0.5 * (kappa + 3.0));
        return Ok(tau * radial);
    }
    let r_lo: f64 = 1e-7 * scale.min(s);
    let r_hi: f64 = s + 16.0 * scale;
    let integrand = |x: f64| {
        let r = x.exp();
        let head = (-(r - s) * (r - s) / (2.0 * t)).exp();
        let tail = (-(r + s) * (r + s) / (2.0 * t)).exp();
        // Extra factor r from the log substitution dr = r dx.
        r.powf(kappa + 2.0) * (head - tail)
    };
    let radial = quad::simpson_fixed(&integrand, r_lo.ln(), r_hi.ln(), 1 << 13);
    Ok(tau * tau * t / s * radial)
}

/// Monte Carlo estimate with its one-sigma error.
#[derive(Debug, Clone, Copy)]
pub struct GainEstimate {
    pub value: f64,
    pub std_error: f64,
}

fn check_samples(n_mc: usize) -> Result<()> {
    if n_mc == 0 {
        return Err(Error::Domain("sample count must be positive".into()));
    }
    Ok(())
}

fn unit_direction<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    loop {
        let w = Vec3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let n = w.norm();
        if n > 1e-12 {
            return w.scale(1.0 / n);
        }
    }
}

fn gaussian_partner<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> Vec3 {
    Vec3::new(
        sigma * rng.sample::<f64, _>(StandardNormal),
        sigma * rng.sample::<f64, _>(StandardNormal),
        sigma * rng.sample::<f64, _>(StandardNormal),
    )
}

fn mean_and_error(sum: f64, sum_sq: f64, n: f64) -> GainEstimate {
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    GainEstimate {
        value: mean,
        std_error: (var / n).sqrt(),
    }
}

/// Monte Carlo estimate of the gain integral of two pointwise
/// distributions at velocity `v`: the integral of
/// `B(v - u, omega) f1(u') f2(v')` over directions and partners, with the
/// partner importance-sampled from a centered Gaussian of temperature
/// `importance_t` and the direction uniform on the sphere.
///
/// For negative kernel exponents, partners closer to `v` than 1e-8 are
/// rejected and redrawn; the bias is below 1e-10.
pub fn q_gain_mc<F1, F2, R>(
    f1: F1,
    f2: F2,
    v: Vec3,
    importance_t: f64,
    model: &CollisionModel,
    n_mc: usize,
    rng: &mut R,
) -> Result<GainEstimate>
where
    F1: Fn(Vec3) -> f64,
    F2: Fn(Vec3) -> f64,
    R: Rng + ?Sized,
{
    check_samples(n_mc)?;
    if !(importance_t > 0.0) || !importance_t.is_finite() {
        return Err(Error::InvalidParam(format!(
            "importance temperature must be positive and finite, got {importance_t}"
        )));
    }
    let sigma = importance_t.sqrt();
    let norm = 4.0 * std::f64::consts::PI
        * (std::f64::consts::TAU * importance_t).powf(1.5);
    let reject_close = model.kappa() < 0.0;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n_mc {
        let (u, omega) = loop {
            let u = gaussian_partner(rng, sigma);
            if reject_close && (u - v).norm() < COINCIDENCE_CUTOFF {
                continue;
            }
            break (u, unit_direction(rng));
        };
        let rel = v - u;
        let r = rel.norm();
        let b = if r == 0.0 {
            0.0
        } else {
            model.relative_speed_factor(r) * rel.dot(omega).abs() / r
        };
        let (u1, v1) = deflect(u, v, omega);
        let w = norm * (u.norm_sq() / (2.0 * importance_t)).exp() * b * f1(u1) * f2(v1);
        sum += w;
        sum_sq += w * w;
    }
    Ok(mean_and_error(sum, sum_sq, n_mc as f64))
}

/// Monte Carlo estimate of the weighted gain term at grid node `node`:
/// the integral of `B(v - u, omega) sqrt(mu(u)) h(u') h(v')` over
/// directions and partners, where mu is the unnormalized Gaussian weight
/// of temperature `t_m` and `h` is interpolated trilinearly (zero outside
/// the lattice). Partners are importance-sampled from mu, directions
/// uniformly; the weighted importance ratio keeps the variance finite on
/// any compactly supported lattice field.
pub fn gamma_gain<R: Rng + ?Sized>(
    grid: &VelocityGrid,
    h: &[f64],
    node: usize,
    t_m: f64,
    model: &CollisionModel,
    n_mc: usize,
    rng: &mut R,
) -> Result<GainEstimate> {
    grid.check_values(h)?;
    grid.check_node(node)?;
    check_samples(n_mc)?;
    if !(t_m > 0.0) || !t_m.is_finite() {
        return Err(Error::InvalidParam(format!(
            "reference temperature must be positive and finite, got {t_m}"
        )));
    }
    let v = grid.node(node);
    let sigma = t_m.sqrt();
    let norm = 4.0 * std::f64::consts::PI * (std::f64::consts::TAU * t_m).powf(1.5);
    let reject_close = model.kappa() < 0.0;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n_mc {
        let (u, omega) = loop {
            let u = gaussian_partner(rng, sigma);
            if reject_close && (u - v).norm() < COINCIDENCE_CUTOFF {
                continue;
            }
            break (u, unit_direction(rng));
        };
        let rel = v - u;
        let r = rel.norm();
        let b = if r == 0.0 {
            0.0
        } else {
            model.relative_speed_factor(r) * rel.dot(omega).abs() / r
        };
        let (u1, v1) = deflect(u, v, omega);
        let w = norm
            * (u.norm_sq() / (4.0 * t_m)).exp()
            * b
            * grid.trilinear(h, u1)?
            * grid.trilinear(h, v1)?;
        sum += w;
        sum_sq += w * w;
    }
    Ok(mean_and_error(sum, sum_sq, n_mc as f64))
}

/// Dense product-rule evaluation of the same discretized weighted gain
/// integral as [`gamma_gain`]: lattice-weighted sum over partners, Simpson
/// rule with `n_cos` intervals in the polar cosine on [0, 1] (the integrand
/// is even under direction reversal), trapezoid rule with `n_phi` points in
/// azimuth. Cross-check oracle for small lattices.
pub fn gamma_gain_quadrature(
    grid: &VelocityGrid,
    h: &[f64],
    node: usize,
    t_m: f64,
    model: &CollisionModel,
    n_cos: usize,
    n_phi: usize,
) -> Result<f64> {
    grid.check_values(h)?;
    grid.check_node(node)?;
    if n_cos < 2 || n_cos % 2 != 0 || n_phi < 2 {
        return Err(Error::InvalidParam(format!(
            "need an even polar count >= 2 and an azimuth count >= 2, got ({n_cos}, {n_phi})"
        )));
    }
    if !(t_m > 0.0) || !t_m.is_finite() {
        return Err(Error::InvalidParam(format!(
            "reference temperature must be positive and finite, got {t_m}"
        )));
    }
    let v = grid.node(node);
    let dc = 1.0 / n_cos as f64;
    let dphi = std::f64::consts::TAU / n_phi as f64;
    let mut acc = 0.0;
    for i in 0..grid.len() {
        let u = grid.node(i);
        let rel = v - u;
        let r = rel.norm();
        if r == 0.0 {
            continue;
        }
        let rhat = rel.scale(1.0 / r);
        let (e1, e2) = orthonormal_pair(rhat);
        let speed_factor = model.relative_speed_factor(r);
        let mut sphere = 0.0;
        for jc in 0..=n_cos {
            let c = jc as f64 * dc;
            // Simpson weights on [0, 1].
            let wc = dc / 3.0
                * if jc == 0 || jc == n_cos {
                    1.0
                } else if jc % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
            let sin_c = (1.0 - c * c).max(0.0).sqrt();
            for jp in 0..n_phi {
                let phi = jp as f64 * dphi;
                let omega = rhat.scale(c) + e1.scale(sin_c * phi.cos()) + e2.scale(sin_c * phi.sin());
                let (u1, v1) = deflect(u, v, omega);
                sphere += wc * dphi * c * grid.trilinear(h, u1)? * grid.trilinear(h, v1)?;
            }
        }
        // Doubled for the lower hemisphere: the deflection and |cos| are
        // invariant under omega -> -omega.
        acc += grid.weight(i)
            * (-u.norm_sq() / (4.0 * t_m)).exp()
            * speed_factor
            * 2.0
            * sphere;
    }
    Ok(acc)
}

fn orthonormal_pair(rhat: Vec3) -> (Vec3, Vec3) {
    let seed = if rhat.x.abs() <= rhat.y.abs() && rhat.x.abs() <= rhat.z.abs() {
        Vec3::new(1.0, 0.0, 0.0)
    } else if rhat.y.abs() <= rhat.z.abs() {
        Vec3::new(0.0, 1.0, 0.0)
    } else {
        Vec3::new(0.0, 0.0, 1.0)
    };
    let e1 = (seed - rhat.scale(seed.dot(rhat))).normalized();
    let e2 = rhat.cross(e1);
    (e1, e2)
}
