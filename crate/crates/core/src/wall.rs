//! Gas-surface scattering at a half-space boundary.
//!
//! The patch normal `n` points from the gas into the wall: a molecule about
//! to strike the wall has `n . u > 0`, a re-emitted one has `n . v < 0`.
//! Velocities decompose against the orthonormal frame `(tau1, tau2, n)` as
//! `v = v_par . (tau1, tau2) + v_perp n`.
//!
//! The scattering density factorizes into a tangential Gaussian (mean
//! `(1 - r_par) u_par`, variance `T_w r_par (2 - r_par)` per axis) and a
//! normal-speed Rice density, which is what both the evaluator and the exact
//! sampler use. Evaluation keeps the Bessel factor in scaled form
//! `e^{-y} I0(y)`, so no intermediate overflows for large drift velocities.

use crate::analytics::{bessel_i0_scaled, quad};
use crate::{Error, Result, Vec3};
use rand::Rng;
use rand_distr::StandardNormal;

/// Energy (`r_perp`) and tangential-momentum (`r_par`) accommodation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccommodationPair {
    r_perp: f64,
    r_par: f64,
}

impl AccommodationPair {
    /// Requires `0 < r_perp <= 1` and `0 < r_par < 2`.
    pub fn new(r_perp: f64, r_par: f64) -> Result<Self> {
        if !(r_perp.is_finite() && r_par.is_finite()) {
            return Err(Error::InvalidParam("accommodation must be finite".into()));
        }
        if !(0.0 < r_perp && r_perp <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "normal accommodation must lie in (0, 1], got {r_perp}"
            )));
        }
        if !(0.0 < r_par && r_par < 2.0) {
            return Err(Error::InvalidParam(format!(
                "tangential accommodation must lie in (0, 2), got {r_par}"
            )));
        }
        Ok(AccommodationPair { r_perp, r_par })
    }

    /// Full accommodation in both components.
    pub fn diffuse() -> Self {
        AccommodationPair { r_perp: 1.0, r_par: 1.0 }
    }

    pub fn r_perp(&self) -> f64 {
        self.r_perp
    }

    pub fn r_par(&self) -> f64 {
        self.r_par
    }

    /// `r_par (2 - r_par)`, the tangential variance factor; lies in (0, 1].
    pub fn tangential_factor(&self) -> f64 {
        self.r_par * (2.0 - self.r_par)
    }

    pub fn r_max(&self) -> f64 {
        self.tangential_factor().max(self.r_perp)
    }

    pub fn r_min(&self) -> f64 {
        self.tangential_factor().min(self.r_perp)
    }
}

/// An isothermal wall element: temperature, inward normal, tangent frame.
#[derive(Debug, Clone, Copy)]
pub struct WallPatch {
    temperature: f64,
    n: Vec3,
    t1: Vec3,
    t2: Vec3,
}

impl WallPatch {
    /// Builds the tangent frame from the normal; `normal` need not be unit
    /// length but must be nonzero. `temperature > 0`.
    pub fn new(temperature: f64, normal: Vec3) -> Result<Self> {
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(Error::InvalidParam(format!(
                "wall temperature must be positive, got {temperature}"
            )));
        }
        let norm = normal.norm();
        if !norm.is_finite() || norm < 1e-12 {
            return Err(Error::InvalidParam("wall normal must be a nonzero vector".into()));
        }
        let n = normal.scale(1.0 / norm);
        // seed axis least aligned with n keeps the cross product well away from zero
        let seed = if n.x.abs() <= n.y.abs().min(n.z.abs()) {
            Vec3::new(1.0, 0.0, 0.0)
        } else if n.y.abs() <= n.z.abs() {
            Vec3::new(0.0, 1.0, 0.0)
        } else {
            Vec3::new(0.0, 0.0, 1.0)
        };
        let t1 = n.cross(seed).normalized();
        let t2 = n.cross(t1);
        Ok(WallPatch { temperature, n, t1, t2 })
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn normal(&self) -> Vec3 {
        self.n
    }

    pub fn tangents(&self) -> (Vec3, Vec3) {
        (self.t1, self.t2)
    }

    pub fn decompose(&self, v: Vec3) -> HalfSpaceVelocity {
        HalfSpaceVelocity {
            v_par: [self.t1.dot(v), self.t2.dot(v)],
            v_perp: self.n.dot(v),
        }
    }

    pub fn compose(&self, h: HalfSpaceVelocity) -> Vec3 {
        self.t1.scale(h.v_par[0]) + self.t2.scale(h.v_par[1]) + self.n.scale(h.v_perp)
    }

    /// Mirror image across the patch plane, `v - 2 n (n . v)`.
    pub fn specular(&self, v: Vec3) -> Vec3 {
        v - self.n.scale(2.0 * self.n.dot(v))
    }
}

/// A velocity split into tangential components and the signed normal one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfSpaceVelocity {
    pub v_par: [f64; 2],
    pub v_perp: f64,
}

fn impinging_speed(u: Vec3, wall: &WallPatch) -> Result<f64> {
    let u_perp = wall.n.dot(u);
    if u_perp > 0.0 {
        Ok(u_perp)
    } else {
        Err(Error::Domain(format!(
            "incident velocity must satisfy n.u > 0, got n.u = {u_perp}"
        )))
    }
}

fn emitted_speed(v: Vec3, wall: &WallPatch) -> Result<f64> {
    let v_perp = wall.n.dot(v);
    if v_perp < 0.0 {
        Ok(-v_perp)
    } else {
        Err(Error::Domain(format!(
            "re-emitted velocity must satisfy n.v < 0, got n.v = {v_perp}"
        )))
    }
}

/// Tangential Gaussian factor of the scattering density, per unit `dv_par`.
fn tangential_density(u_par: [f64; 2], v_par: [f64; 2], t_w: f64, r: AccommodationPair) -> f64 {
    let var = t_w * r.tangential_factor();
    let keep = 1.0 - r.r_par();
    let dx = v_par[0] - keep * u_par[0];
    let dy = v_par[1] - keep * u_par[1];
    (-(dx * dx + dy * dy) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var)
}

/// Rice density of the emitted normal speed, per unit `d|v_perp|`.
fn normal_density(u_perp: f64, v_perp: f64, t_w: f64, r: AccommodationPair) -> f64 {
    let s = t_w * r.r_perp();
    let drift = (1.0 - r.r_perp()).sqrt() * u_perp;
    let y = v_perp * drift / s;
    let shifted = v_perp - drift;
    // e^{-y} I0(y) keeps the product finite for any drift
    v_perp / s
        * (-(shifted * shifted) / (2.0 * s)).exp()
        * bessel_i0_scaled(y).expect("finite scaled bessel argument")
}

/// Density of the emitted normal speed (the Rice law), i.e. the marginal of
/// the scattering density over the tangential components.
pub fn normal_speed_density(
    u: Vec3,
    speed: f64,
    wall: &WallPatch,
    r: AccommodationPair,
) -> Result<f64> {
    let u_perp = impinging_speed(u, wall)?;
    if !(speed.is_finite() && speed >= 0.0) {
        return Err(Error::Domain(format!("emitted speed must be >= 0, got {speed}")));
    }
    Ok(normal_density(u_perp, speed, wall.temperature, r))
}

/// Scattering density `R(u -> v)` of a partially accommodating wall.
///
/// `R(u -> .)` is a probability density on the emitted half space; the
/// normal-flux weight is already part of it.
pub fn cl_density(u: Vec3, v: Vec3, wall: &WallPatch, r: AccommodationPair) -> Result<f64> {
    let u_perp = impinging_speed(u, wall)?;
    let v_perp = emitted_speed(v, wall)?;
    let hu = wall.decompose(u);
    let hv = wall.decompose(v);
    Ok(tangential_density(hu.v_par, hv.v_par, wall.temperature, r)
        * normal_density(u_perp, v_perp, wall.temperature, r))
}

/// Fully accommodated re-emission: wall Maxwellian times the flux factor,
/// independent of the incident state. Equals the general density at full
/// accommodation.
pub fn diffuse_density(u: Vec3, v: Vec3, wall: &WallPatch) -> Result<f64> {
    impinging_speed(u, wall)?;
    emitted_speed(v, wall)?;
    let t_w = wall.temperature;
    let two_pi = 2.0 * std::f64::consts::PI;
    Ok((-v.norm_sq() / (2.0 * t_w)).exp() * wall.n.dot(v).abs() / (two_pi * t_w * t_w))
}

/// Draws `v` from the probability measure `R(u -> .)`.
///
/// Tangential components are Gaussian, the normal speed is built from the
/// two-component Gaussian whose magnitude follows the Rice law; the result
/// satisfies `n . v < 0`.
pub fn cl_sample<R: Rng + ?Sized>(
    u: Vec3,
    wall: &WallPatch,
    r: AccommodationPair,
    rng: &mut R,
) -> Result<Vec3> {
    let u_perp = impinging_speed(u, wall)?;
    let hu = wall.decompose(u);
    let t_w = wall.temperature;
    let sigma_par = (t_w * r.tangential_factor()).sqrt();
    let keep = 1.0 - r.r_par();
    let v_par = [
        keep * hu.v_par[0] + sigma_par * rng.sample::<f64, _>(StandardNormal),
        keep * hu.v_par[1] + sigma_par * rng.sample::<f64, _>(StandardNormal),
    ];
    let sigma_perp = (t_w * r.r_perp()).sqrt();
    let drift = (1.0 - r.r_perp()).sqrt() * u_perp;
    let v_perp = loop {
        let x: f64 = drift + sigma_perp * rng.sample::<f64, _>(StandardNormal);
        let y: f64 = sigma_perp * rng.sample::<f64, _>(StandardNormal);
        let speed = x.hypot(y);
        if speed > 0.0 {
            break speed;
        }
    };
    Ok(wall.compose(HalfSpaceVelocity { v_par, v_perp: -v_perp }))
}

/// Re-emission law of a wall element.
///
/// `Specular` and `BounceBack` are the deterministic degenerate limits of the
/// accommodating law (normal accommodation 0 with tangential 0 resp. 2) and
/// are dispatched exactly, never through the stochastic path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryModel {
    Cl(AccommodationPair),
    Diffuse,
    Specular,
    BounceBack,
    /// Convex mixture: diffuse with the given weight, else specular.
    Maxwell(f64),
}

impl BoundaryModel {
    /// Mixture constructor; the diffuse weight must lie in `[0, 1]`.
    pub fn maxwell(c: f64) -> Result<Self> {
        check_mixture_weight(c)?;
        Ok(BoundaryModel::Maxwell(c))
    }

    /// Draws the re-emitted velocity for an impinging `u`.
    pub fn sample<R: Rng + ?Sized>(&self, u: Vec3, wall: &WallPatch, rng: &mut R) -> Result<Vec3> {
        match *self {
            BoundaryModel::Cl(r) => cl_sample(u, wall, r, rng),
            BoundaryModel::Diffuse => cl_sample(u, wall, AccommodationPair::diffuse(), rng),
            BoundaryModel::Specular => {
                impinging_speed(u, wall)?;
                Ok(wall.specular(u))
            }
            BoundaryModel::BounceBack => {
                impinging_speed(u, wall)?;
                Ok(-u)
            }
            BoundaryModel::Maxwell(c) => {
                check_mixture_weight(c)?;
                if rng.random::<f64>() < c {
                    cl_sample(u, wall, AccommodationPair::diffuse(), rng)
                } else {
                    impinging_speed(u, wall)?;
                    Ok(wall.specular(u))
                }
            }
        }
    }
}

fn check_mixture_weight(c: f64) -> Result<()> {
    if (0.0..=1.0).contains(&c) {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("mixture weight must lie in [0, 1], got {c}")))
    }
}

/// Mixture re-emission density: an absolutely continuous part plus a point
/// mass at the mirror image. The atom is reported exactly, never smeared.
#[derive(Debug, Clone, Copy)]
pub struct MaxwellDensity {
    pub continuous: f64,
    pub atom_weight: f64,
    pub atom_velocity: Vec3,
}

pub fn maxwell_density(u: Vec3, v: Vec3, wall: &WallPatch, c: f64) -> Result<MaxwellDensity> {
    check_mixture_weight(c)?;
    Ok(MaxwellDensity {
        continuous: c * diffuse_density(u, v, wall)?,
        atom_weight: 1.0 - c,
        atom_velocity: wall.specular(u),
    })
}

/// Re-emitted distribution of a wall driven by a flux-normalized Maxwellian
/// at temperature `t0`: again Maxwellian, with the two effective
/// temperatures below.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmittedMaxwellian {
    t_par: f64,
    t_perp: f64,
}

impl EmittedMaxwellian {
    /// `T0 (1 - r_par)^2 + T_w r_par (2 - r_par)`.
    pub fn tangential_temperature(&self) -> f64 {
        self.t_par
    }

    /// `T0 (1 - r_perp) + T_w r_perp`.
    pub fn normal_temperature(&self) -> f64 {
        self.t_perp
    }

    /// Density in `v` on the emitted half space; the flux integral
    /// `int density |n.v| dv` equals one.
    pub fn density(&self, v: Vec3, wall: &WallPatch) -> Result<f64> {
        emitted_speed(v, wall)?;
        let h = wall.decompose(v);
        let par_sq = h.v_par[0] * h.v_par[0] + h.v_par[1] * h.v_par[1];
        Ok((-par_sq / (2.0 * self.t_par)).exp() / (2.0 * std::f64::consts::PI * self.t_par)
            * (-h.v_perp * h.v_perp / (2.0 * self.t_perp)).exp()
            / self.t_perp)
    }

    /// Quadrature of the flux integral minus one. Frame-independent: only
    /// the two effective temperatures enter.
    pub fn flux_defect(&self, res: usize) -> f64 {
        let s_par = self.t_par.sqrt();
        let s_perp = self.t_perp.sqrt();
        let par_axis = |x: f64| {
            (-x * x / (2.0 * self.t_par)).exp() / (2.0 * std::f64::consts::PI * self.t_par).sqrt()
        };
        let tang = quad::trapezoid_fixed(&par_axis, -12.0 * s_par, 12.0 * s_par, res);
        let perp = quad::simpson_fixed(
            &|w: f64| w * (-w * w / (2.0 * self.t_perp)).exp() / self.t_perp,
            0.0,
            12.0 * s_perp,
            2 * res,
        );
        tang * tang * perp - 1.0
    }
}

/// Effective temperatures of the re-emitted Maxwellian for an incoming
/// flux-normalized Maxwellian at `t0`.
pub fn cl_pushforward_maxwellian(
    wall: &WallPatch,
    r: AccommodationPair,
    t0: f64,
) -> Result<EmittedMaxwellian> {
    if !(t0.is_finite() && t0 > 0.0) {
        return Err(Error::InvalidParam(format!("source temperature must be positive, got {t0}")));
    }
    let t_w = wall.temperature;
    let keep = 1.0 - r.r_par();
    Ok(EmittedMaxwellian {
        t_par: t0 * keep * keep + t_w * r.tangential_factor(),
        t_perp: t0 * (1.0 - r.r_perp()) + t_w * r.r_perp(),
    })
}

/// Trapezoid nodes and weights on `[lo, hi]` with `n` intervals.
fn trapezoid_grid(lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
    let h = (hi - lo) / n as f64;
    (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n { 0.5 * h } else { h };
            (lo + i as f64 * h, w)
        })
        .collect()
}

/// Simpson nodes and weights on `[lo, hi]`; `n` intervals, rounded up to even.
fn simpson_grid(lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
    let n = if n % 2 == 0 { n.max(2) } else { n + 1 };
    let h = (hi - lo) / n as f64;
    (0..=n)
        .map(|i| {
            let c = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (lo + i as f64 * h, c * h / 3.0)
        })
        .collect()
}

/// Left side of the push-forward identity at one emitted `v`, by 3-D tensor
/// quadrature of the actual scattering density over the impinging half
/// space: `(1/|n.v|) int_{n.u>0} R(u -> v) mu0(u) (n.u) du` with
/// `mu0 = (2 pi T0^2)^{-1} e^{-|u|^2/(2 T0)}`.
pub fn pushforward_lhs_quadrature(
    v: Vec3,
    wall: &WallPatch,
    r: AccommodationPair,
    t0: f64,
    res: usize,
) -> Result<f64> {
    let v_perp = emitted_speed(v, wall)?;
    let hv = wall.decompose(v);
    let t_w = wall.temperature;
    let rho = r.tangential_factor();
    let keep = 1.0 - r.r_par();

    // integration ranges from the exponent quadratics of the u-dependence
    let a_par = keep * keep / (2.0 * t_w * rho) + 1.0 / (2.0 * t0);
    let sigma_par = 1.0 / (2.0 * a_par).sqrt();
    let par_range = |vp: f64| {
        let m = keep * vp / (t_w * rho) / (2.0 * a_par);
        (m - 13.0 * sigma_par, m + 13.0 * sigma_par)
    };
    let s = t_w * r.r_perp();
    let root = (1.0 - r.r_perp()).sqrt();
    let b_perp = (1.0 - r.r_perp()) / (2.0 * s) + 1.0 / (2.0 * t0);
    let centre = root * v_perp / s / (2.0 * b_perp);
    let sigma_perp = 1.0 / (2.0 * b_perp).sqrt();

    let (lo0, hi0) = par_range(hv.v_par[0]);
    let (lo1, hi1) = par_range(hv.v_par[1]);
    let axis0 = trapezoid_grid(lo0, hi0, res);
    let axis1 = trapezoid_grid(lo1, hi1, res);
    let axis_n = simpson_grid(0.0, centre + 13.0 * sigma_perp, 2 * res);

    let mut total = 0.0;
    for &(up0, w0) in &axis0 {
        for &(up1, w1) in &axis1 {
            let mut inner = 0.0;
            for &(upn, wn) in &axis_n {
                if upn <= 0.0 {
                    continue; // flux weight vanishes at grazing incidence
                }
                let u = wall.compose(HalfSpaceVelocity { v_par: [up0, up1], v_perp: upn });
                let mu0 = (-u.norm_sq() / (2.0 * t0)).exp()
                    / (2.0 * std::f64::consts::PI * t0 * t0);
                inner += wn * cl_density(u, v, wall, r)? * mu0 * upn;
            }
            total += w0 * w1 * inner;
        }
    }
    Ok(total / v_perp)
}

/// 3-D tensor quadrature of `int_{n.v<0} R(u -> v) dv` using the actual
/// density; one for any admissible input.
///
/// Tangential axes use the trapezoid over mean +- 12 sigma (the integrand
/// has fully decayed there), the normal speed uses Simpson on
/// `[0, drift + 12 sigma]` with twice the resolution.
pub fn verify_normalization(
    u: Vec3,
    wall: &WallPatch,
    r: AccommodationPair,
    res: usize,
) -> Result<f64> {
    let u_perp = impinging_speed(u, wall)?;
    let hu = wall.decompose(u);
    let t_w = wall.temperature;
    let sigma_par = (t_w * r.tangential_factor()).sqrt();
    let keep = 1.0 - r.r_par();
    let axis = |i: usize| {
        let mean = keep * hu.v_par[i];
        trapezoid_grid(mean - 12.0 * sigma_par, mean + 12.0 * sigma_par, res)
    };
    let axis0 = axis(0);
    let axis1 = axis(1);
    let sigma_perp = (t_w * r.r_perp()).sqrt();
    let drift = (1.0 - r.r_perp()).sqrt() * u_perp;
    let axis_n = simpson_grid(0.0, drift + 12.0 * sigma_perp, 2 * res);

    let mut total = 0.0;
    for &(vp0, w0) in &axis0 {
        for &(vp1, w1) in &axis1 {
            let mut inner = 0.0;
            for &(speed, wn) in &axis_n {
                if speed <= 0.0 {
                    continue; // density vanishes linearly at zero normal speed
                }
                let v = wall.compose(HalfSpaceVelocity { v_par: [vp0, vp1], v_perp: -speed });
                inner += wn * cl_density(u, v, wall, r)?;
            }
            total += w0 * w1 * inner;
        }
    }
    Ok(total)
}

/// Relative defect of the detailed-balance identity
/// `R(u -> v) e^{-|u|^2/(2 T_w)} |n.u| = R(-v -> -u) e^{-|v|^2/(2 T_w)} |n.v|`,
/// both sides evaluated as plain products.
pub fn reciprocity_defect(u: Vec3, v: Vec3, wall: &WallPatch, r: AccommodationPair) -> Result<f64> {
    let t_w = wall.temperature;
    let lhs = cl_density(u, v, wall, r)?
        * (-u.norm_sq() / (2.0 * t_w)).exp()
        * wall.n.dot(u).abs();
    let rhs = cl_density(-v, -u, wall, r)?
        * (-v.norm_sq() / (2.0 * t_w)).exp()
        * wall.n.dot(v).abs();
    Ok((lhs - rhs).abs() / lhs.abs().max(rhs.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn patch() -> WallPatch {
        WallPatch::new(1.0, Vec3::new(0.0, 0.0, -1.0)).unwrap()
    }

    #[test]
    fn accommodation_bounds_enforced() {
        assert!(AccommodationPair::new(0.0, 1.0).is_err());
        assert!(AccommodationPair::new(1.1, 1.0).is_err());
        assert!(AccommodationPair::new(0.5, 0.0).is_err());
        assert!(AccommodationPair::new(0.5, 2.0).is_err());
        assert!(AccommodationPair::new(f64::NAN, 1.0).is_err());
        assert!(AccommodationPair::new(1.0, 1.9999).is_ok());
    }

    #[test]
    fn accommodation_extremes() {
        let r = AccommodationPair::new(0.5, 0.5).unwrap();
        assert_eq!(r.tangential_factor(), 0.75);
        assert_eq!(r.r_max(), 0.75);
        assert_eq!(r.r_min(), 0.5);
        let d = AccommodationPair::diffuse();
        assert_eq!(d.r_max(), 1.0);
        assert_eq!(d.r_min(), 1.0);
    }

    #[test]
    fn frame_is_orthonormal_right_handed() {
        let mut rng = rng::stream(7, 0);
        for _ in 0..50 {
            let n = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if n.norm() < 0.1 {
                continue;
            }
            let w = WallPatch::new(0.7, n).unwrap();
            let (t1, t2) = w.tangents();
            let n = w.normal();
            assert!((n.norm() - 1.0).abs() < 1e-14);
            assert!((t1.norm() - 1.0).abs() < 1e-14);
            assert!((t2.norm() - 1.0).abs() < 1e-14);
            assert!(t1.dot(t2).abs() < 1e-14);
            assert!(t1.dot(n).abs() < 1e-14);
            assert!(t2.dot(n).abs() < 1e-14);
            assert!((t1.cross(t2) - n).norm() < 1e-13);
        }
    }

    #[test]
    fn decompose_compose_roundtrip() {
        let w = WallPatch::new(1.0, Vec3::new(0.3, -0.4, 0.5)).unwrap();
        let v = Vec3::new(1.0, 2.0, -0.7);
        let back = w.compose(w.decompose(v));
        assert!((back - v).norm() < 1e-14);
    }

    #[test]
    fn specular_reflects_normal_component_only() {
        let w = patch();
        let v = Vec3::new(1.5, -0.3, 2.0);
        let s = w.specular(v);
        assert!((w.normal().dot(s) + w.normal().dot(v)).abs() < 1e-15);
        let hv = w.decompose(v);
        let hs = w.decompose(s);
        assert_eq!(hv.v_par, hs.v_par);
        assert!((w.specular(s) - v).norm() < 1e-15);
    }

    #[test]
    fn density_rejects_wrong_sides() {
        let w = patch();
        let r = AccommodationPair::diffuse();
        let striking = Vec3::new(1.0, 0.0, -1.0); // n = -z, so n.u = +1
        let emitted = Vec3::new(0.0, 1.0, 1.0);
        assert!(cl_density(striking, emitted, &w, r).is_ok());
        assert!(cl_density(emitted, striking, &w, r).is_err());
        assert!(cl_density(striking, striking, &w, r).is_err());
    }

    #[test]
    fn full_accommodation_matches_diffuse_closed_form() {
        let w = patch();
        let r = AccommodationPair::diffuse();
        let u = Vec3::new(2.0, 1.0, -3.0);
        for v in [Vec3::new(0.5, -0.2, 0.9), Vec3::new(-1.0, 2.0, 2.5), Vec3::new(0.0, 0.0, 0.1)]
        {
            let general = cl_density(u, v, &w, r).unwrap();
            let direct = diffuse_density(u, v, &w).unwrap();
            assert!((general - direct).abs() <= 1e-14 * direct);
        }
    }

    #[test]
    fn diffuse_density_forgets_incidence() {
        let w = patch();
        let v = Vec3::new(0.4, 0.4, 1.3);
        let a = diffuse_density(Vec3::new(5.0, 0.0, -0.1), v, &w).unwrap();
        let b = diffuse_density(Vec3::new(-2.0, 1.0, -4.0), v, &w).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sampler_output_is_emitted_side() {
        let w = WallPatch::new(0.8, Vec3::new(1.0, 2.0, -2.0)).unwrap();
        let r = AccommodationPair::new(0.3, 1.4).unwrap();
        let u = w.normal().scale(2.0) + w.tangents().0.scale(-1.0);
        let mut rng = rng::stream(11, 0);
        for _ in 0..200 {
            let v = cl_sample(u, &w, r, &mut rng).unwrap();
            assert!(w.normal().dot(v) < 0.0);
        }
    }

    #[test]
    fn deterministic_models() {
        let w = patch();
        let u = Vec3::new(1.0, -2.0, -0.5);
        let mut rng = rng::stream(3, 0);
        let s = BoundaryModel::Specular.sample(u, &w, &mut rng).unwrap();
        assert!((s - Vec3::new(1.0, -2.0, 0.5)).norm() < 1e-15);
        let b = BoundaryModel::BounceBack.sample(u, &w, &mut rng).unwrap();
        assert!((b + u).norm() < 1e-15);
    }

    #[test]
    fn mixture_weight_validated() {
        assert!(BoundaryModel::maxwell(-0.1).is_err());
        assert!(BoundaryModel::maxwell(1.1).is_err());
        assert!(BoundaryModel::maxwell(0.5).is_ok());
        let w = patch();
        let u = Vec3::new(0.0, 0.0, -1.0);
        assert!(maxwell_density(u, Vec3::new(0.0, 0.0, 1.0), &w, 2.0).is_err());
    }

    #[test]
    fn maxwell_density_splits_mass() {
        let w = patch();
        let u = Vec3::new(2.0, 0.0, -2.0);
        let v = Vec3::new(0.3, 0.1, 0.8);
        let m = maxwell_density(u, v, &w, 0.25).unwrap();
        assert!((m.continuous - 0.25 * diffuse_density(u, v, &w).unwrap()).abs() < 1e-16);
        assert_eq!(m.atom_weight, 0.75);
        assert!((m.atom_velocity - w.specular(u)).norm() < 1e-15);
    }

    #[test]
    fn pushforward_effective_temperatures() {
        let w = patch();
        let r = AccommodationPair::new(0.5, 0.5).unwrap();
        // wall-temperature source is invariant
        let same = cl_pushforward_maxwellian(&w, r, 1.0).unwrap();
        assert!((same.tangential_temperature() - 1.0).abs() < 1e-15);
        assert!((same.normal_temperature() - 1.0).abs() < 1e-15);
        // full accommodation forgets the source
        let d = cl_pushforward_maxwellian(&w, AccommodationPair::diffuse(), 37.0).unwrap();
        assert_eq!(d.tangential_temperature(), 1.0);
        assert_eq!(d.normal_temperature(), 1.0);
        let hot = cl_pushforward_maxwellian(&w, r, 2.0).unwrap();
        assert!((hot.tangential_temperature() - 1.25).abs() < 1e-15);
        assert!((hot.normal_temperature() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn reciprocity_single_pair() {
        let w = patch();
        let r = AccommodationPair::new(0.4, 0.9).unwrap();
        let u = Vec3::new(1.0, 0.5, -2.0);
        let v = Vec3::new(-0.3, 1.1, 1.4);
        assert!(reciprocity_defect(u, v, &w, r).unwrap() < 1e-13);
    }
}
