//! Bounded domains with outward normals and exact straight-line boundary
//! hits, forward and backward in time.
//!
//! Three analytic shapes are supported: a ball, a disk (two spatial
//! coordinates with full 3-D velocities, the third velocity component
//! carried but ignored by the geometry), and a slab bounded in its first
//! coordinate with periodic wrap in the other two. Normals point out of the
//! gas, so a molecule striking the wall has positive normal velocity.

use crate::error::{Error, Result};
use crate::wall::WallPatch;
use crate::Vec3;

/// Domain shape with its defining lengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// All points within `radius` of the origin.
    Ball { radius: f64 },
    /// Planar disk: the geometry reads only the first two position and
    /// velocity coordinates.
    Disk { radius: f64 },
    /// `0 < x < width` in the first coordinate; the other two wrap with
    /// period `wrap`.
    Slab { width: f64, wrap: f64 },
}

/// Wall-temperature field over the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WallTemperature {
    Constant(f64),
    /// Slab faces: temperature at the `x = 0` face and at the `x = width`
    /// face.
    Faces { lower: f64, upper: f64 },
    /// `base + amplitude * cos(angle)` with the angle measured from the
    /// first axis; ball and disk only.
    Angular { base: f64, amplitude: f64 },
}

/// Bounded spatial domain plus its wall-temperature field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    shape: Shape,
    temperature: WallTemperature,
    t_min: f64,
    t_max: f64,
}

/// One boundary intersection of a straight flight.
#[derive(Debug, Clone)]
pub struct BoundaryHit {
    /// Flight time to the wall, nonnegative.
    pub time_of_flight: f64,
    /// Intersection point on the boundary (slab tangentials wrapped).
    pub point: Vec3,
    /// Outward unit normal at the point.
    pub normal: Vec3,
    /// Wall patch at the point: local temperature, normal, tangent frame.
    pub wall: WallPatch,
}

/// Backward trace of a characteristic to its most recent wall interaction.
#[derive(Debug, Clone)]
pub struct BackTimeHit {
    /// Wall-hit time along the backward flight; nonpositive values mean the
    /// initial datum is reached first, negative infinity that no wall is
    /// ever met.
    pub t1: f64,
    /// The wall intersection itself, absent when the line never meets the
    /// boundary.
    pub hit: Option<BoundaryHit>,
}

impl BackTimeHit {
    /// The backward characteristic reaches the initial time before any wall.
    pub fn reaches_datum(&self) -> bool {
        self.t1 <= 0.0
    }
}

fn require_length(name: &str, x: f64) -> Result<()> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::InvalidParam(format!("{name} must be positive and finite, got {x}")));
    }
    Ok(())
}

impl Domain {
    pub fn new(shape: Shape, temperature: WallTemperature) -> Result<Self> {
        match shape {
            Shape::Ball { radius } | Shape::Disk { radius } => require_length("radius", radius)?,
            Shape::Slab { width, wrap } => {
                require_length("width", width)?;
                require_length("wrap", wrap)?;
            }
        }
        let (t_min, t_max) = match temperature {
            WallTemperature::Constant(t) => {
                require_length("wall temperature", t)?;
                (t, t)
            }
            WallTemperature::Faces { lower, upper } => {
                if !matches!(shape, Shape::Slab { .. }) {
                    return Err(Error::InvalidParam(
                        "face temperatures apply only to the slab".into(),
                    ));
                }
                require_length("lower face temperature", lower)?;
                require_length("upper face temperature", upper)?;
                (lower.min(upper), lower.max(upper))
            }
            WallTemperature::Angular { base, amplitude } => {
                if matches!(shape, Shape::Slab { .. }) {
                    return Err(Error::InvalidParam(
                        "angular temperature applies only to ball and disk".into(),
                    ));
                }
                if !amplitude.is_finite() {
                    return Err(Error::InvalidParam(format!(
                        "temperature amplitude must be finite, got {amplitude}"
                    )));
                }
                require_length("minimum wall temperature", base - amplitude.abs())?;
                (base - amplitude.abs(), base + amplitude.abs())
            }
        };
        Ok(Domain { shape, temperature, t_min, t_max })
    }

    /// Ball at constant wall temperature.
    pub fn ball(radius: f64, temperature: f64) -> Result<Self> {
        Domain::new(Shape::Ball { radius }, WallTemperature::Constant(temperature))
    }

    /// Disk at constant wall temperature.
    pub fn disk(radius: f64, temperature: f64) -> Result<Self> {
        Domain::new(Shape::Disk { radius }, WallTemperature::Constant(temperature))
    }

    /// Slab at constant wall temperature.
    pub fn slab(width: f64, wrap: f64, temperature: f64) -> Result<Self> {
        Domain::new(Shape::Slab { width, wrap }, WallTemperature::Constant(temperature))
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn temperature_field(&self) -> WallTemperature {
        self.temperature
    }

    /// Coolest wall temperature.
    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    /// Hottest wall temperature; the reference temperature of the weighted
    /// estimates.
    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    /// Largest distance between two domain points (wrap included for the
    /// slab).
    pub fn diameter(&self) -> f64 {
        match self.shape {
            Shape::Ball { radius } | Shape::Disk { radius } => 2.0 * radius,
            Shape::Slab { width, wrap } => {
                (width * width + 2.0 * wrap * wrap).sqrt()
            }
        }
    }

    /// Strict interior test.
    pub fn contains(&self, x: Vec3) -> bool {
        match self.shape {
            Shape::Ball { radius } => x.norm_sq() < radius * radius,
            Shape::Disk { radius } => x.x * x.x + x.y * x.y < radius * radius,
            Shape::Slab { width, .. } => x.x > 0.0 && x.x < width,
        }
    }

    /// Wall temperature at a boundary point.
    pub fn temperature_at(&self, point: Vec3) -> f64 {
        match self.temperature {
            WallTemperature::Constant(t) => t,
            WallTemperature::Faces { lower, upper } => {
                let width = match self.shape {
                    Shape::Slab { width, .. } => width,
                    _ => unreachable!("face field is validated against the slab"),
                };
                if point.x < 0.5 * width {
                    lower
                } else {
                    upper
                }
            }
            WallTemperature::Angular { base, amplitude } => {
                let rho = match self.shape {
                    Shape::Ball { .. } => point.norm(),
                    _ => (point.x * point.x + point.y * point.y).sqrt(),
                };
                base + amplitude * point.x / rho
            }
        }
    }

    /// Outward unit normal at a boundary point.
    pub fn outward_normal(&self, point: Vec3) -> Vec3 {
        match self.shape {
            Shape::Ball { .. } => point.normalized(),
            Shape::Disk { .. } => Vec3::new(point.x, point.y, 0.0).normalized(),
            Shape::Slab { width, .. } => {
                if point.x < 0.5 * width {
                    Vec3::new(-1.0, 0.0, 0.0)
                } else {
                    Vec3::new(1.0, 0.0, 0.0)
                }
            }
        }
    }

    /// Wall patch (temperature, normal, tangent frame) at a boundary point.
    pub fn wall_patch_at(&self, point: Vec3) -> Result<WallPatch> {
        WallPatch::new(self.temperature_at(point), self.outward_normal(point))
    }

    /// First boundary intersection of the forward flight `x + tau v`,
    /// `tau > 0`. `None` when the line never reaches the boundary (zero
    /// velocity, or slab flight with no normal component).
    pub fn first_exit_forward(&self, x: Vec3, v: Vec3) -> Result<Option<BoundaryHit>> {
        let tau = match self.shape {
            Shape::Ball { radius } => self.exit_time_round(x, v, radius, false)?,
            Shape::Disk { radius } => self.exit_time_round(x, v, radius, true)?,
            Shape::Slab { width, .. } => {
                if x.x < -1e-12 * width || x.x > width * (1.0 + 1e-12) {
                    return Err(Error::Domain(format!(
                        "position {x:?} lies outside the slab of width {width}"
                    )));
                }
                if v.x == 0.0 {
                    return Ok(None);
                }
                let tau = if v.x > 0.0 { (width - x.x) / v.x } else { -x.x / v.x };
                Some(tau.max(0.0))
            }
        };
        let Some(tau) = tau else { return Ok(None) };
        let raw = x + v.scale(tau);
        let point = self.wrap_point(raw);
        let normal = self.outward_normal(point);
        let wall = self.wall_patch_at(point)?;
        Ok(Some(BoundaryHit { time_of_flight: tau, point, normal, wall }))
    }

    /// Most recent wall interaction of the backward flight from `(t, x)`
    /// with velocity `v`: the hit time `t1 = t - tau` may be nonpositive,
    /// meaning the characteristic reaches the initial datum first.
    pub fn back_time_hit(&self, t: f64, x: Vec3, v: Vec3) -> Result<BackTimeHit> {
        if !t.is_finite() {
            return Err(Error::InvalidParam(format!("time must be finite, got {t}")));
        }
        // backward positions x - v s trace the forward flight of -v
        match self.first_exit_forward(x, -v)? {
            Some(hit) => Ok(BackTimeHit { t1: t - hit.time_of_flight, hit: Some(hit) }),
            None => Ok(BackTimeHit { t1: f64::NEG_INFINITY, hit: None }),
        }
    }

    /// Exit time through a circle or sphere of the given radius, with one
    /// inward nudge retried on a grazing discriminant.
    fn exit_time_round(&self, x: Vec3, v: Vec3, radius: f64, planar: bool) -> Result<Option<f64>> {
        let (xx, vv) = if planar {
            (Vec3::new(x.x, x.y, 0.0), Vec3::new(v.x, v.y, 0.0))
        } else {
            (x, v)
        };
        let r_sq = radius * radius;
        if xx.norm_sq() > r_sq * (1.0 + 1e-9) {
            return Err(Error::Domain(format!("position {x:?} lies outside the domain")));
        }
        let speed_sq = vv.norm_sq();
        if speed_sq == 0.0 {
            return Ok(None);
        }
        let solve = |p: Vec3| {
            let b = p.dot(vv);
            let c = p.norm_sq() - r_sq;
            let disc = b * b - speed_sq * c;
            (disc, b)
        };
        let (mut disc, mut b) = solve(xx);
        if disc < 1e-14 * r_sq * speed_sq {
            // grazing: pull toward the center and retry once
            let nudged = xx.scale(1.0 - 1e-12);
            let again = solve(nudged);
            disc = again.0;
            b = again.1;
        }
        Ok(Some(((-b + disc.max(0.0).sqrt()) / speed_sq).max(0.0)))
    }

    /// Wrap slab tangential coordinates into `[0, wrap)`.
    pub fn wrap_point(&self, p: Vec3) -> Vec3 {
        match self.shape {
            Shape::Slab { wrap, .. } => {
                Vec3::new(p.x, p.y.rem_euclid(wrap), p.z.rem_euclid(wrap))
            }
            _ => p,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball() -> Domain {
        Domain::ball(1.0, 1.0).unwrap()
    }

    fn slab() -> Domain {
        Domain::slab(1.0, 4.0, 1.0).unwrap()
    }

    #[test]
    fn radius_flight_from_center() {
        let hit = ball().first_exit_forward(Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0))
            .unwrap()
            .unwrap();
        assert!((hit.time_of_flight - 1.0).abs() < 1e-14);
        assert!((hit.point - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-14);
        assert!((hit.normal - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn off_center_flight_crosses_the_full_chord() {
        let hit = ball().first_exit_forward(Vec3::new(0.5, 0.0, 0.0), Vec3::new(-1.0, 0.0, 0.0))
            .unwrap()
            .unwrap();
        assert!((hit.time_of_flight - 1.5).abs() < 1e-14);
        assert!((hit.point - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn slab_exit_solves_the_linear_crossing() {
        let hit = slab().first_exit_forward(Vec3::new(0.25, 0.0, 0.0), Vec3::new(2.0, 1.0, 0.0))
            .unwrap()
            .unwrap();
        assert!((hit.time_of_flight - 0.375).abs() < 1e-14);
        assert!((hit.point.x - 1.0).abs() < 1e-14);
        assert!((hit.normal - Vec3::new(1.0, 0.0, 0.0)).norm() == 0.0);
    }

    #[test]
    fn slab_without_normal_velocity_never_exits() {
        let hit = slab().first_exit_forward(Vec3::new(0.5, 0.0, 0.0), Vec3::new(0.0, 3.0, 1.0));
        assert!(hit.unwrap().is_none());
    }

    #[test]
    fn back_time_before_datum_and_after() {
        let dom = ball();
        let early = dom.back_time_hit(0.5, Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0))
            .unwrap();
        assert!((early.t1 + 0.5).abs() < 1e-14);
        assert!(early.reaches_datum());
        // the wall point behind the flight is still reported
        assert!((early.hit.unwrap().point - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-14);

        let late = dom.back_time_hit(2.0, Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0))
            .unwrap();
        assert!((late.t1 - 1.0).abs() < 1e-14);
        assert!(!late.reaches_datum());
    }

    #[test]
    fn slab_backward_hit_matches_hand_value() {
        let back = slab().back_time_hit(1.0, Vec3::new(0.9, 0.0, 0.0), Vec3::new(3.0, 0.0, 0.0))
            .unwrap();
        assert!((back.t1 - 0.7).abs() < 1e-14);
        let hit = back.hit.unwrap();
        assert!(hit.point.x.abs() < 1e-14);
    }

    #[test]
    fn backward_time_equals_reversed_forward_time() {
        let dom = ball();
        let x = Vec3::new(0.2, -0.3, 0.4);
        let v = Vec3::new(0.7, 1.1, -0.4);
        let forward = dom.first_exit_forward(x, -v).unwrap().unwrap();
        let back = dom.back_time_hit(5.0, x, v).unwrap();
        assert_eq!(back.t1.to_bits(), (5.0 - forward.time_of_flight).to_bits());
    }

    #[test]
    fn outside_positions_are_rejected() {
        assert!(ball().first_exit_forward(Vec3::new(1.5, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0))
            .is_err());
        assert!(slab().first_exit_forward(Vec3::new(1.5, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0))
            .is_err());
    }

    #[test]
    fn disk_geometry_ignores_the_third_axis() {
        let dom = Domain::disk(1.0, 1.0).unwrap();
        let hit = dom.first_exit_forward(Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 5.0))
            .unwrap()
            .unwrap();
        assert!((hit.time_of_flight - 1.0).abs() < 1e-14);
        assert!((hit.point.x - 1.0).abs() < 1e-14);
        assert_eq!(hit.normal.z, 0.0);
        // purely axial motion never exits
        assert!(dom
            .first_exit_forward(Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 1.0))
            .unwrap()
            .is_none());
    }

    #[test]
    fn face_temperatures_split_the_slab() {
        let dom = Domain::new(
            Shape::Slab { width: 1.0, wrap: 4.0 },
            WallTemperature::Faces { lower: 0.8, upper: 1.3 },
        )
        .unwrap();
        assert_eq!(dom.temperature_at(Vec3::new(0.0, 1.0, 2.0)), 0.8);
        assert_eq!(dom.temperature_at(Vec3::new(1.0, 1.0, 2.0)), 1.3);
        assert_eq!(dom.t_min(), 0.8);
        assert_eq!(dom.t_max(), 1.3);
    }

    #[test]
    fn angular_temperature_follows_the_first_axis_cosine() {
        let dom = Domain::new(
            Shape::Disk { radius: 2.0 },
            WallTemperature::Angular { base: 1.0, amplitude: 0.1 },
        )
        .unwrap();
        assert!((dom.temperature_at(Vec3::new(2.0, 0.0, 0.0)) - 1.1).abs() < 1e-15);
        assert!((dom.temperature_at(Vec3::new(-2.0, 0.0, 0.0)) - 0.9).abs() < 1e-15);
        assert!((dom.temperature_at(Vec3::new(0.0, 2.0, 0.0)) - 1.0).abs() < 1e-15);
        assert_eq!(dom.t_max(), 1.1);
    }

    #[test]
    fn variant_shape_mismatches_are_rejected() {
        assert!(Domain::new(
            Shape::Ball { radius: 1.0 },
            WallTemperature::Faces { lower: 1.0, upper: 1.0 }
        )
        .is_err());
        assert!(Domain::new(
            Shape::Slab { width: 1.0, wrap: 1.0 },
            WallTemperature::Angular { base: 1.0, amplitude: 0.0 }
        )
        .is_err());
        assert!(Domain::new(
            Shape::Ball { radius: 1.0 },
            WallTemperature::Angular { base: 1.0, amplitude: 1.0 }
        )
        .is_err());
    }

    #[test]
    fn grazing_start_on_the_boundary_still_exits() {
        let dom = ball();
        // tangential launch from the boundary
        let hit = dom
            .first_exit_forward(Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0))
            .unwrap()
            .unwrap();
        assert!(hit.time_of_flight >= 0.0);
        assert!(hit.point.norm() <= 1.0 + 1e-9);
    }

    #[test]
    fn wrap_keeps_tangentials_in_the_box() {
        let dom = slab();
        let p = dom.wrap_point(Vec3::new(0.5, 9.5, -1.0));
        assert!((p.y - 1.5).abs() < 1e-12);
        assert!((p.z - 3.0).abs() < 1e-12);
    }
}
