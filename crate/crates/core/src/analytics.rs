//! Closed-form Gaussian integral identities with quadrature companions.
//!
//! The identities evaluated here are the analytic backbone of the scattering
//! kernel's moment calculus. For a gap `g = b - a - eps > 0` they read
//!
//! * plane: `(b/pi) * int_{R^2} e^{(a+eps)|v|^2} e^{-b|v-w|^2} dv
//!   = (b/g) * exp((a+eps)*b/g * |w|^2)`,
//! * half line (Rice form): `2b * int_0^inf v e^{(a+eps)v^2} e^{-b v^2}
//!   e^{-b w^2} I0(2 b v w) dv` equals the same right-hand side with `|w|^2`
//!   replaced by `w^2`,
//!
//! together with exponentially small remainders once the integration region
//! is truncated away from the Gaussian centre `c = (b/g) w`:
//!
//! * plane, outside the disk of radius `1/delta` around `c`: bounded by
//!   `exp(-g/delta^2)` times the whole integral,
//! * half line, head `0 < v < delta`: bounded by `delta` times the whole,
//! * half line, shifted tail `v > c + 1/delta`: bounded by
//!   `exp(-g/(4 delta^2))` times the whole.
//!
//! Every closed form is paired with an independent numeric evaluation in
//! [`quad`]; nothing in that module completes a square.

use crate::{Error, Result};

/// Shift vector of the Gaussian factor, one- or two-dimensional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shift {
    Line(f64),
    Plane(f64, f64),
}

/// Parameters `(a, b, eps, w)` of the weighted Gaussian integrals.
///
/// Invariants enforced on construction: all entries finite, `b > 0`,
/// `eps >= 0`, and `a + eps < b` strictly. `a` may be negative.
#[derive(Debug, Clone, Copy)]
pub struct GaussParams {
    a: f64,
    b: f64,
    eps: f64,
    w: Shift,
}

impl GaussParams {
    pub fn new(a: f64, b: f64, eps: f64, w: Shift) -> Result<Self> {
        let finite = match w {
            Shift::Line(x) => x.is_finite(),
            Shift::Plane(x, y) => x.is_finite() && y.is_finite(),
        };
        if !(a.is_finite() && b.is_finite() && eps.is_finite() && finite) {
            return Err(Error::InvalidParam("gauss params must be finite".into()));
        }
        if b <= 0.0 {
            return Err(Error::InvalidParam(format!("gauss params need b > 0, got b = {b}")));
        }
        if eps < 0.0 {
            return Err(Error::InvalidParam(format!("gauss params need eps >= 0, got eps = {eps}")));
        }
        if a + eps >= b {
            return Err(Error::InvalidParam(format!(
                "gauss params need a + eps < b strictly, got a + eps = {} and b = {b}",
                a + eps
            )));
        }
        Ok(GaussParams { a, b, eps, w })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn w(&self) -> Shift {
        self.w
    }

    /// `b - a - eps`, strictly positive.
    pub fn gap(&self) -> f64 {
        self.b - self.a - self.eps
    }

    /// Centre of the combined Gaussian, `(b/gap) * w`, componentwise.
    pub fn centre(&self) -> Shift {
        let s = self.b / self.gap();
        match self.w {
            Shift::Line(x) => Shift::Line(s * x),
            Shift::Plane(x, y) => Shift::Plane(s * x, s * y),
        }
    }

    fn w_norm_sq(&self) -> f64 {
        match self.w {
            Shift::Line(x) => x * x,
            Shift::Plane(x, y) => x * x + y * y,
        }
    }

    fn line_w(&self) -> Result<f64> {
        match self.w {
            Shift::Line(x) if x >= 0.0 => Ok(x),
            Shift::Line(x) => {
                Err(Error::Domain(format!("half-line integral needs w >= 0, got {x}")))
            }
            Shift::Plane(..) => {
                Err(Error::Domain("half-line integral needs a one-dimensional shift".into()))
            }
        }
    }

    fn plane_w(&self) -> Result<(f64, f64)> {
        match self.w {
            Shift::Plane(x, y) => Ok((x, y)),
            Shift::Line(_) => {
                Err(Error::Domain("plane integral needs a two-dimensional shift".into()))
            }
        }
    }
}

fn check_delta(delta: f64) -> Result<f64> {
    if delta.is_finite() && 0.0 < delta && delta < 1.0 {
        Ok(delta)
    } else {
        Err(Error::InvalidParam(format!("truncation needs 0 < delta < 1, got {delta}")))
    }
}

/// Closed form of the whole-plane integral.
pub fn gauss_plane_integral(p: &GaussParams) -> Result<f64> {
    p.plane_w()?;
    let g = p.gap();
    Ok(p.b / g * ((p.a + p.eps) * p.b / g * p.w_norm_sq()).exp())
}

/// Closed-form bound on the plane integral restricted to
/// `|v - centre| > 1/delta`: `exp(-gap/delta^2)` times the whole integral.
pub fn gauss_plane_tail(p: &GaussParams, delta: f64) -> Result<f64> {
    let delta = check_delta(delta)?;
    let whole = gauss_plane_integral(p)?;
    Ok((-p.gap() / (delta * delta)).exp() * whole)
}

/// Closed form of the half-line Rice integral. Requires `w >= 0`.
pub fn gauss_halfline_rice_integral(p: &GaussParams) -> Result<f64> {
    let w = p.line_w()?;
    let g = p.gap();
    Ok(p.b / g * ((p.a + p.eps) * p.b / g * w * w).exp())
}

/// Which part of the half line is cut off.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    /// `0 < v < delta`.
    Head,
    /// `v > centre + 1/delta`.
    ShiftedTail,
}

/// Numeric value of a truncated half-line integral next to its closed-form
/// bound and the whole integral.
#[derive(Debug, Clone, Copy)]
pub struct TruncationCheck {
    pub numeric: f64,
    pub bound: f64,
    pub whole: f64,
}

/// Quadrature of the truncated half-line integral together with the bound it
/// must respect: `delta * whole` for the head, `exp(-gap/(4 delta^2)) * whole`
/// for the shifted tail.
pub fn gauss_halfline_truncation(
    p: &GaussParams,
    delta: f64,
    which: Truncation,
) -> Result<TruncationCheck> {
    let delta = check_delta(delta)?;
    let whole = gauss_halfline_rice_integral(p)?;
    let (numeric, bound) = match which {
        Truncation::Head => (quad::halfline_head(p, delta)?, delta * whole),
        Truncation::ShiftedTail => (
            quad::halfline_shifted_tail(p, delta)?,
            (-p.gap() / (4.0 * delta * delta)).exp() * whole,
        ),
    };
    Ok(TruncationCheck { numeric, bound, whole })
}

/// Largest argument for which `I0` stays below `f64::MAX`.
pub const BESSEL_I0_MAX_ARG: f64 = 713.0;

const SERIES_CUTOFF: f64 = 50.0;

/// Modified Bessel function of the first kind, order zero.
///
/// Power series `sum_k (y^2/4)^k / (k!)^2` below `|y| = 50`, scaled
/// large-argument expansion `e^{|y|} (2 pi |y|)^{-1/2} sum_k a_k |y|^{-k}`
/// above (truncation below 2e-15 at the cutoff). Even in `y`, always `>= 1`,
/// and `Err` once the value would leave the representable range (the caller
/// chooses how to saturate).
pub fn bessel_i0(y: f64) -> Result<f64> {
    if !y.is_finite() {
        return Err(Error::InvalidParam(format!("bessel_i0 needs a finite argument, got {y}")));
    }
    let ay = y.abs();
    if ay > BESSEL_I0_MAX_ARG {
        return Err(Error::Overflow(format!("bessel_i0({y}) exceeds f64 range")));
    }
    if ay <= SERIES_CUTOFF {
        Ok(i0_series(ay))
    } else {
        // assemble in log space, e^ay alone can overflow before the product
        Ok((ay + i0_scaled_asymptotic(ay).ln()).exp())
    }
}

/// `e^{-|y|} I0(y)`; never overflows.
pub fn bessel_i0_scaled(y: f64) -> Result<f64> {
    if !y.is_finite() {
        return Err(Error::InvalidParam(format!("bessel_i0 needs a finite argument, got {y}")));
    }
    let ay = y.abs();
    if ay <= SERIES_CUTOFF {
        Ok(i0_series(ay) * (-ay).exp())
    } else {
        Ok(i0_scaled_asymptotic(ay))
    }
}

fn i0_series(ay: f64) -> f64 {
    let q = ay * ay / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 0u32;
    // terms drop below 1e-16 of the partial sum before k = 130 at |y| <= 50
    while term >= 1e-16 * sum {
        k += 1;
        let kf = k as f64;
        term *= q / (kf * kf);
        sum += term;
    }
    sum
}

/// `e^{-ay} I0(ay)` for large `ay`: `(2 pi ay)^{-1/2} sum_k a_k ay^{-k}` with
/// `a_k = ((2k-1)!!)^2 / (k! 8^k)`. Ten terms leave the truncation below
/// `a_11 / 50^11 < 2e-15` on the admitted range.
fn i0_scaled_asymptotic(ay: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..=10u32 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        term *= odd * odd / (8.0 * kf * ay);
        sum += term;
    }
    sum / (2.0 * std::f64::consts::PI * ay).sqrt()
}

fn trapezoid_fixed<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let mut s = 0.5 * (f(lo) + f(hi));
    for i in 1..n {
        s += f(lo + i as f64 * h);
    }
    s * h
}

/// Quadrature companions to the closed forms.
///
/// Plain composite trapezoid sums with interval halving and one Richardson
/// extrapolation step; integration ranges are cut where the integrand falls
/// below 1e-18 of its peak. These routines evaluate the original integrands
/// pointwise and share no algebra with the closed forms above.
pub mod quad {
    use super::{bessel_i0_scaled, GaussParams, Result};

    /// Relative refinement target of the adaptive trapezoid.
    pub const REL_TOL: f64 = 1e-9;

    /// Log of the peak-relative cutoff used to truncate infinite ranges.
    const RANGE_LOG: f64 = 41.5; // ln(1e18)

    /// Adaptive composite trapezoid, halving the step until the Richardson
    /// estimate's relative change drops below [`REL_TOL`]. New refinements
    /// only evaluate the odd midpoints.
    pub fn trapezoid<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        let refine = |t_prev: f64, n_prev: usize| -> f64 {
            let h = (hi - lo) / (2 * n_prev) as f64;
            let mut mids = 0.0;
            for i in 0..n_prev {
                mids += f(lo + (2 * i + 1) as f64 * h);
            }
            0.5 * t_prev + h * mids
        };
        let mut n = 64usize;
        let mut coarse = super::trapezoid_fixed(f, lo, hi, n);
        let mut fine = refine(coarse, n);
        let mut rich = (4.0 * fine - coarse) / 3.0;
        loop {
            n *= 2;
            coarse = fine;
            fine = refine(coarse, n);
            let next = (4.0 * fine - coarse) / 3.0;
            if (next - rich).abs() <= REL_TOL * next.abs().max(1e-300) || 2 * n >= 1 << 22 {
                return next;
            }
            rich = next;
        }
    }

    /// Half width of the truncated range for a factor `e^{-g r^2}`.
    fn cut_radius(gap: f64) -> f64 {
        (RANGE_LOG / gap).sqrt()
    }

    fn plane_integrand(p: &GaussParams, wx: f64, wy: f64, vx: f64, vy: f64) -> f64 {
        let dvx = vx - wx;
        let dvy = vy - wy;
        ((p.a + p.eps) * (vx * vx + vy * vy) - p.b * (dvx * dvx + dvy * dvy)).exp()
    }

    /// `(b/pi) * int_{R^2} e^{(a+eps)|v|^2} e^{-b|v-w|^2} dv` by nested
    /// one-dimensional trapezoids on a truncated box around the centre.
    pub fn plane_integral(p: &GaussParams) -> Result<f64> {
        let (wx, wy) = match p.w {
            super::Shift::Plane(x, y) => (x, y),
            super::Shift::Line(_) => {
                return Err(crate::Error::Domain("plane quadrature needs a 2-d shift".into()))
            }
        };
        let (cx, cy) = match p.centre() {
            super::Shift::Plane(x, y) => (x, y),
            super::Shift::Line(_) => unreachable!(),
        };
        let r = cut_radius(p.gap());
        let inner = |vx: f64| trapezoid(&|vy| plane_integrand(p, wx, wy, vx, vy), cy - r, cy + r);
        let outer = trapezoid(&inner, cx - r, cx + r);
        Ok(p.b / std::f64::consts::PI * outer)
    }

    /// Same integrand restricted to `|v - centre| > 1/delta`, in polar
    /// coordinates around the centre.
    pub fn plane_tail(p: &GaussParams, delta: f64) -> Result<f64> {
        let (wx, wy) = match p.w {
            super::Shift::Plane(x, y) => (x, y),
            super::Shift::Line(_) => {
                return Err(crate::Error::Domain("plane quadrature needs a 2-d shift".into()))
            }
        };
        let (cx, cy) = match p.centre() {
            super::Shift::Plane(x, y) => (x, y),
            super::Shift::Line(_) => unreachable!(),
        };
        let rho_lo = 1.0 / delta;
        let rho_hi = rho_lo + cut_radius(p.gap());
        let ring = |rho: f64| {
            let angular = trapezoid(
                &|th: f64| {
                    plane_integrand(p, wx, wy, cx + rho * th.cos(), cy + rho * th.sin())
                },
                0.0,
                2.0 * std::f64::consts::PI,
            );
            rho * angular
        };
        Ok(p.b / std::f64::consts::PI * trapezoid(&ring, rho_lo, rho_hi))
    }

    fn halfline_integrand(p: &GaussParams, w: f64, v: f64) -> f64 {
        // recombined exponent stays bounded, the Bessel factor enters scaled
        let y = 2.0 * p.b * v * w;
        let expo = (p.a + p.eps) * v * v - p.b * v * v - p.b * w * w + y;
        // y >= 0 here so the scaled value is e^{-y} I0(y)
        2.0 * p.b * v * expo.exp() * bessel_i0_scaled(y).expect("finite scaled bessel")
    }

    fn halfline_range_hi(p: &GaussParams, w: f64) -> f64 {
        let centre = p.b * w / p.gap();
        centre + cut_radius(p.gap())
    }

    /// Whole half-line Rice integral.
    pub fn halfline_integral(p: &GaussParams) -> Result<f64> {
        let w = p.line_w()?;
        let hi = halfline_range_hi(p, w);
        Ok(trapezoid(&|v| halfline_integrand(p, w, v), 0.0, hi))
    }

    /// Head piece `0 < v < delta`.
    pub fn halfline_head(p: &GaussParams, delta: f64) -> Result<f64> {
        let w = p.line_w()?;
        Ok(trapezoid(&|v| halfline_integrand(p, w, v), 0.0, delta))
    }

    /// Shifted tail `v > centre + 1/delta`.
    pub fn halfline_shifted_tail(p: &GaussParams, delta: f64) -> Result<f64> {
        let w = p.line_w()?;
        let lo = p.b * w / p.gap() + 1.0 / delta;
        let hi = lo + cut_radius(p.gap());
        Ok(trapezoid(&|v| halfline_integrand(p, w, v), lo, hi))
    }

    /// `(1/pi) int_0^pi e^{y cos t} dt` on a fixed grid, the oracle used to
    /// pin the Bessel reference values.
    pub fn i0_fixed_trapezoid(y: f64, n: usize) -> f64 {
        super::trapezoid_fixed(&|t: f64| (y * t.cos()).exp(), 0.0, std::f64::consts::PI, n)
            / std::f64::consts::PI
    }

    /// Composite trapezoid on a fixed grid. Spectrally accurate when the
    /// integrand has decayed to negligible size at both endpoints.
    pub fn trapezoid_fixed<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, n: usize) -> f64 {
        super::trapezoid_fixed(f, lo, hi, n)
    }

    /// Composite Simpson on a fixed grid; `n` is rounded up to even.
    pub fn simpson_fixed<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, n: usize) -> f64 {
        let n = if n % 2 == 0 { n.max(2) } else { n + 1 };
        let h = (hi - lo) / n as f64;
        let mut s = f(lo) + f(hi);
        for i in 1..n {
            let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += weight * f(lo + i as f64 * h);
        }
        s * h / 3.0
    }
}
