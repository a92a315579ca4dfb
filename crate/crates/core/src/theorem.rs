//! Hypothesis checks and explicit constants of the well-posedness estimate.
//!
//! The local-in-time theory for a gas bounded by scattering walls holds under
//! two explicit conditions: the accommodation pair must sit in its open range
//! and the coolest wall must stay above a threshold temperature determined by
//! that pair. From admissible inputs the proof machinery produces a family of
//! computable constants: a temperature ladder interpolating between the
//! reference ceiling and the reference temperature, contraction coefficients
//! below one, an amplitude constant bounding each wall-integral gain, and the
//! growth rate of the time slack carried through successive wall integrals.
//! [`check_hypotheses`] evaluates everything at zero slack and reports values
//! only where their derivation is valid, with explicit absences elsewhere.

use crate::error::{Error, Result};

/// Contraction coefficients of the tangential and normal wall integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaTriple {
    /// Tangential coefficient, strictly below one.
    pub par: f64,
    /// Normal coefficient, strictly below one.
    pub perp: f64,
    /// The larger of the two; the single rate used downstream.
    pub max: f64,
}

/// Outcome of evaluating the admissibility hypotheses and every derived
/// constant at one parameter point.
///
/// Values whose derivation needs a hypothesis that failed are `None`; a
/// report never fabricates a number outside its validity region.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    /// Reference temperature (the hottest wall in a consistent setup).
    pub t_m: f64,
    /// Coolest wall temperature.
    pub min_tw: f64,
    /// Normal-energy accommodation input.
    pub r_perp: f64,
    /// Tangential-momentum accommodation input.
    pub r_par: f64,
    /// Velocity-weight exponent.
    pub theta: f64,

    /// `0 < r_perp <= 1` and `0 < r_par < 2`.
    pub accommodation_in_range: bool,
    /// Wall-temperature threshold `max((1-r_par)/(2-r_par),
    /// (sqrt(1-r_perp)-(1-r_perp))/r_perp)`; absent when the accommodation
    /// pair is out of range.
    pub temperature_threshold: Option<f64>,
    /// `min_tw / t_m` strictly above the threshold.
    pub temperature_condition: bool,
    /// `theta < 1/(4 t_m)`, equivalently `xi > 1`.
    pub weight_admissible: bool,

    /// `1 / (4 t_m theta)`.
    pub xi: f64,
    /// Ladder ceiling `2 xi / (xi + 1) * t_m`.
    pub ladder_top: f64,
    /// `min(r_par (2 - r_par), r_perp)`.
    pub r_min: Option<f64>,
    /// `max(r_par (2 - r_par), r_perp)`.
    pub r_max: Option<f64>,
    /// Margin by which the temperature condition holds: the smallest over
    /// both axes of `(min_tw/t_m) / threshold_axis - 1`, infinite when both
    /// axis thresholds vanish. Nonpositive exactly when the condition fails.
    pub epsilon2: Option<f64>,
    /// Contraction coefficients; present only when the temperature condition
    /// holds strictly.
    pub eta: Option<EtaTriple>,
    /// Uniform prefactor bounding each wall-integral gain.
    pub gain_amplitude: Option<f64>,
    /// Growth rate per unit time of the exponent slack accumulated across
    /// wall integrals.
    pub slack_rate: Option<f64>,
    /// Set when `min_tw` exceeds the ladder ceiling; the leading term of
    /// `slack_rate` is then negative. Reported without interpretation.
    pub hot_wall_flag: bool,
}

impl HypothesisReport {
    /// Every hypothesis holds: accommodation range, wall temperature, weight.
    pub fn all_hold(&self) -> bool {
        self.accommodation_in_range && self.temperature_condition && self.weight_admissible
    }
}

fn require_positive(name: &str, x: f64) -> Result<()> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::InvalidParam(format!("{name} must be positive and finite, got {x}")));
    }
    Ok(())
}

fn accommodation_in_range(r_perp: f64, r_par: f64) -> bool {
    r_perp > 0.0 && r_perp <= 1.0 && r_par > 0.0 && r_par < 2.0
}

/// Wall-temperature threshold for one accommodation pair, as a fraction of
/// the reference temperature.
pub fn temperature_threshold(r_perp: f64, r_par: f64) -> Result<f64> {
    if !accommodation_in_range(r_perp, r_par) {
        return Err(Error::Domain(format!(
            "accommodation pair out of range: r_perp = {r_perp}, r_par = {r_par}"
        )));
    }
    Ok(threshold_par(r_par).max(threshold_perp(r_perp)))
}

fn threshold_par(r_par: f64) -> f64 {
    (1.0 - r_par) / (2.0 - r_par)
}

fn threshold_perp(r_perp: f64) -> f64 {
    let root = (1.0 - r_perp).sqrt();
    (root - (1.0 - r_perp)) / r_perp
}

/// Ladder ceiling `2 xi / (xi + 1) * t_m`.
pub fn ladder_top(xi: f64, t_m: f64) -> f64 {
    2.0 * xi / (xi + 1.0) * t_m
}

/// Temperature ladder entry `i` of a length-`l` cycle: the ceiling at
/// `i = l`, then one geometric step toward `t_m` per unit of `l - i`.
pub fn ladder_temperature(l: u32, i: u32, xi: f64, t_m: f64, r_min: f64) -> Result<f64> {
    require_positive("xi", xi)?;
    require_positive("t_m", t_m)?;
    if !(r_min > 0.0 && r_min <= 1.0) {
        return Err(Error::InvalidParam(format!("r_min must lie in (0, 1], got {r_min}")));
    }
    if i < 1 || i > l {
        return Err(Error::Domain(format!("ladder index needs 1 <= i <= l, got i = {i}, l = {l}")));
    }
    let top = ladder_top(xi, t_m);
    Ok(top + (t_m - top) * (1.0 - (1.0 - r_min).powi((l - i) as i32)))
}

/// Contraction coefficients for a positive temperature margin.
///
/// `epsilon2` may be infinite (both axis thresholds zero); the common factor
/// `(1 + e)/(1 + e/2)` then takes its limit value two.
pub fn eta_coefficients(r_perp: f64, r_par: f64, epsilon2: f64) -> Result<EtaTriple> {
    if !accommodation_in_range(r_perp, r_par) {
        return Err(Error::Domain(format!(
            "accommodation pair out of range: r_perp = {r_perp}, r_par = {r_par}"
        )));
    }
    if !(epsilon2 > 0.0) {
        return Err(Error::Domain(format!(
            "contraction needs a positive temperature margin, got epsilon2 = {epsilon2}"
        )));
    }
    let factor = if epsilon2.is_infinite() {
        2.0
    } else {
        (1.0 + epsilon2) / (1.0 + epsilon2 / 2.0)
    };
    let par = 1.0 / (1.0 - r_par + r_par * factor);
    let root = (1.0 - r_perp).sqrt();
    let perp = 1.0 / (root + (1.0 - root) * factor);
    Ok(EtaTriple { par, perp, max: par.max(perp) })
}

/// Evaluate both admissibility hypotheses and all derived constants at zero
/// time slack. Temperatures and `theta` must be positive; the accommodation
/// inputs may be anything finite and are reported rather than rejected.
pub fn check_hypotheses(
    t_m: f64,
    min_tw: f64,
    r_perp: f64,
    r_par: f64,
    theta: f64,
) -> Result<HypothesisReport> {
    require_positive("t_m", t_m)?;
    require_positive("min_tw", min_tw)?;
    require_positive("theta", theta)?;
    if !(r_perp.is_finite() && r_par.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "accommodation inputs must be finite, got r_perp = {r_perp}, r_par = {r_par}"
        )));
    }

    let xi = 1.0 / (4.0 * t_m * theta);
    let top = ladder_top(xi, t_m);
    let in_range = accommodation_in_range(r_perp, r_par);
    let ratio = min_tw / t_m;

    let mut report = HypothesisReport {
        t_m,
        min_tw,
        r_perp,
        r_par,
        theta,
        accommodation_in_range: in_range,
        temperature_threshold: None,
        temperature_condition: false,
        weight_admissible: xi > 1.0,
        xi,
        ladder_top: top,
        r_min: None,
        r_max: None,
        epsilon2: None,
        eta: None,
        gain_amplitude: None,
        slack_rate: None,
        hot_wall_flag: min_tw > top,
    };
    if !in_range {
        return Ok(report);
    }

    let thr_par = threshold_par(r_par);
    let thr_perp = threshold_perp(r_perp);
    report.temperature_threshold = Some(thr_par.max(thr_perp));
    report.temperature_condition = ratio > thr_par.max(thr_perp);

    let margin = |thr: f64| if thr <= 0.0 { f64::INFINITY } else { ratio / thr - 1.0 };
    let epsilon2 = margin(thr_par).min(margin(thr_perp));
    report.epsilon2 = Some(epsilon2);

    let rho = r_par * (2.0 - r_par);
    report.r_min = Some(rho.min(r_perp));
    report.r_max = Some(rho.max(r_perp));
    let r_max = rho.max(r_perp);

    // interpolation between the ceiling (r_max = 0) and min_tw (r_max = 1)
    let denom = top + (min_tw - top) * r_max;
    report.gain_amplitude = Some(2.0 * top / denom);
    report.slack_rate = Some(4.0 * t_m * (top - min_tw) / (2.0 * min_tw * denom) + 2.0 * top / denom);

    if epsilon2 > 0.0 {
        report.eta = Some(eta_coefficients(r_perp, r_par, epsilon2)?);
    }
    Ok(report)
}
