//! Closed-form Gaussian/Rice integrals against their quadrature oracles,
//! frozen reference values, Bessel cross-checks, and truncation bounds.

use clk_core::analytics::{
    bessel_i0, bessel_i0_scaled, gauss_halfline_rice_integral, gauss_halfline_truncation,
    gauss_plane_integral, gauss_plane_tail, quad, GaussParams, Shift, Truncation,
};
use clk_core::rng;
use proptest::prelude::*;
use rand::Rng;

// Frozen from the quadrature oracles in this file (fixed-grid trapezoid for
// the Bessel value, adaptive trapezoid for the integrals). Each constant is
// re-derived by the test that uses it.
const I0_AT_TWO: f64 = 2.2795853023360668;
const PLANE_QUARTER_SHIFT: f64 = 1.8608165667814527; // (4/3) e^{1/3}
const PLANE_MIXED: f64 = 3.3663120605480867; // a=0.1 b=0.5 eps=0.05 w=(0,2)
const HALFLINE_MIXED: f64 = 2.1938183212003732; // a=0.2 b=1 w=1.5
const HEAD_MIXED: f64 = 5.766671495291162e-2; // head, delta=0.3 a=0.1 b=0.8 eps=0.05 w=0.5
const SHIFTED_TAIL_MIXED: f64 = 2.5328784964015792e-4; // shifted tail, same params

const SEED: u64 = 0xA11A_11CE;

fn rel(x: f64, reference: f64) -> f64 {
    (x - reference).abs() / reference.abs()
}

/// Independent power-series evaluation, written here so the library value is
/// checked against arithmetic it does not share.
fn series_i0(y: f64) -> f64 {
    let q = y * y / 4.0;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for k in 1..400u32 {
        let kf = k as f64;
        term *= q / (kf * kf);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    sum
}

#[test]
fn bessel_reference_value_from_million_node_grid() {
    let oracle = quad::i0_fixed_trapezoid(2.0, 1_000_000);
    let lib = bessel_i0(2.0).unwrap();
    assert!(rel(lib, oracle) < 1e-10, "lib {lib} vs grid oracle {oracle}");
    assert!(rel(lib, I0_AT_TWO) < 1e-13, "lib {lib} vs frozen {I0_AT_TWO}");
}

#[test]
fn bessel_series_and_integral_agree_across_range() {
    let mut y = 0.0;
    while y <= 30.0 {
        let from_series = series_i0(y);
        let from_integral = quad::i0_fixed_trapezoid(y, 1 << 14);
        assert!(
            rel(from_series, from_integral) < 1e-10,
            "y = {y}: series {from_series} vs integral {from_integral}"
        );
        let lib = bessel_i0(y).unwrap();
        assert!(rel(lib, from_series) < 1e-10, "y = {y}: lib {lib} vs series {from_series}");
        y += 0.5;
    }
}

#[test]
fn bessel_large_argument_branch_matches_integral_across_seam() {
    // both sides of the branch switch at |y| = 50, then far field
    for y in [40.0, 49.5, 50.5, 60.0, 100.0, 300.0, 700.0] {
        let oracle = quad::i0_fixed_trapezoid(y, 1 << 16);
        let lib = bessel_i0(y).unwrap();
        assert!(rel(lib, oracle) < 1e-12, "y = {y}: lib {lib} vs integral {oracle}");
        let scaled = bessel_i0_scaled(y).unwrap();
        assert!(rel(scaled, oracle * (-y).exp()) < 1e-12, "y = {y}: scaled branch");
    }
}

#[test]
fn bessel_even_bounded_and_scaled_in_unit_interval() {
    let mut rng = rng::stream(SEED, 1);
    for _ in 0..200 {
        let y: f64 = rng.random_range(-30.0..30.0);
        let plus = bessel_i0(y).unwrap();
        let minus = bessel_i0(-y).unwrap();
        assert_eq!(plus.to_bits(), minus.to_bits(), "evenness must be exact at y = {y}");
        assert!(plus >= 1.0);
        assert!(plus <= y.abs().exp());
        let scaled = bessel_i0_scaled(y).unwrap();
        assert!(scaled > 0.0 && scaled <= 1.0);
    }
}

fn draw_params(rng: &mut impl Rng, min_gap: f64, max_gap: f64, w: Shift) -> GaussParams {
    let b = rng.random_range(0.3..2.5);
    let gap = rng.random_range(min_gap..max_gap);
    let eps = rng.random_range(0.0..0.3);
    let a = b - gap - eps;
    GaussParams::new(a, b, eps, w).unwrap()
}

fn draw_plane(rng: &mut impl Rng, min_gap: f64, max_gap: f64) -> GaussParams {
    let w = Shift::Plane(rng.random_range(-2.5..2.5), rng.random_range(-2.5..2.5));
    draw_params(rng, min_gap, max_gap, w)
}

fn draw_line(rng: &mut impl Rng, min_gap: f64, max_gap: f64) -> GaussParams {
    let w = Shift::Line(rng.random_range(0.0..3.0));
    draw_params(rng, min_gap, max_gap, w)
}

#[test]
fn plane_closed_form_matches_quadrature_on_random_draws() {
    let mut rng = rng::stream(SEED, 2);
    for i in 0..10 {
        let p = draw_plane(&mut rng, 0.25, 3.0);
        let closed = gauss_plane_integral(&p).unwrap();
        let numeric = quad::plane_integral(&p).unwrap();
        assert!(
            rel(closed, numeric) < 1e-6,
            "draw {i}: closed {closed} vs quadrature {numeric}, params {p:?}"
        );
    }
}

#[test]
fn plane_fixed_values() {
    let unit = GaussParams::new(0.0, 1.0, 0.0, Shift::Plane(3.0, -4.0)).unwrap();
    assert!((gauss_plane_integral(&unit).unwrap() - 1.0).abs() < 1e-15);

    let quarter = GaussParams::new(0.25, 1.0, 0.0, Shift::Plane(1.0, 0.0)).unwrap();
    let closed = gauss_plane_integral(&quarter).unwrap();
    assert!(rel(closed, 4.0 / 3.0 * (1.0f64 / 3.0).exp()) < 1e-15);
    assert!(rel(closed, PLANE_QUARTER_SHIFT) < 1e-15);
    assert!(rel(closed, quad::plane_integral(&quarter).unwrap()) < 1e-9);

    let mixed = GaussParams::new(0.1, 0.5, 0.05, Shift::Plane(0.0, 2.0)).unwrap();
    let closed = gauss_plane_integral(&mixed).unwrap();
    assert!(rel(closed, PLANE_MIXED) < 1e-15);
    assert!(rel(closed, quad::plane_integral(&mixed).unwrap()) < 1e-6);
}

#[test]
fn halfline_closed_form_matches_quadrature_on_random_draws() {
    let mut rng = rng::stream(SEED, 3);
    for i in 0..10 {
        let p = draw_line(&mut rng, 0.25, 3.0);
        let closed = gauss_halfline_rice_integral(&p).unwrap();
        let numeric = quad::halfline_integral(&p).unwrap();
        assert!(
            rel(closed, numeric) < 1e-6,
            "draw {i}: closed {closed} vs quadrature {numeric}, params {p:?}"
        );
    }
}

#[test]
fn halfline_fixed_values() {
    for w in [0.0, 2.0] {
        let p = GaussParams::new(0.0, 1.0, 0.0, Shift::Line(w)).unwrap();
        assert!((gauss_halfline_rice_integral(&p).unwrap() - 1.0).abs() < 1e-15);
    }
    let mixed = GaussParams::new(0.2, 1.0, 0.0, Shift::Line(1.5)).unwrap();
    let closed = gauss_halfline_rice_integral(&mixed).unwrap();
    assert!(rel(closed, HALFLINE_MIXED) < 1e-15);
    assert!(rel(closed, quad::halfline_integral(&mixed).unwrap()) < 1e-6);
}

// The plane restriction attains its bound exactly (the completed-square
// integrand is radial about the centre), so the numeric side is compared
// with an allowance for the quadrature's own tolerance. The half-line head
// draws stay inside gap*delta <= 0.8, where the head fraction
// 1 - e^{-gap delta^2} <= 0.8 delta leaves real margin.
#[test]
fn truncation_bounds_hold_on_random_draws() {
    let mut rng = rng::stream(SEED, 4);
    for i in 0..20 {
        let delta = rng.random_range(0.05..0.4);
        match i % 3 {
            0 => {
                let p = draw_plane(&mut rng, 0.25, 2.0);
                let whole = gauss_plane_integral(&p).unwrap();
                let bound = gauss_plane_tail(&p, delta).unwrap();
                let numeric = quad::plane_tail(&p, delta).unwrap();
                assert!(numeric >= 0.0);
                assert!(
                    numeric <= bound * (1.0 + 1e-6),
                    "draw {i}: plane tail {numeric} above bound {bound}, params {p:?}"
                );
                assert!(bound <= delta * whole, "draw {i}: bound {bound} vs {delta} * {whole}");
            }
            1 => {
                let p = draw_line(&mut rng, 0.25, 2.0);
                let c = gauss_halfline_truncation(&p, delta, Truncation::Head).unwrap();
                assert!(c.numeric >= 0.0);
                assert!(
                    c.numeric <= c.bound,
                    "draw {i}: head {} above bound {}, params {p:?}",
                    c.numeric,
                    c.bound
                );
                assert!(rel(c.bound, delta * c.whole) < 1e-15);
            }
            _ => {
                let p = draw_line(&mut rng, 0.25, 2.0);
                let c = gauss_halfline_truncation(&p, delta, Truncation::ShiftedTail).unwrap();
                assert!(c.numeric >= 0.0);
                assert!(
                    c.numeric <= c.bound,
                    "draw {i}: shifted tail {} above bound {}, params {p:?}",
                    c.numeric,
                    c.bound
                );
            }
        }
    }
}

#[test]
fn truncation_fixed_examples() {
    let p = GaussParams::new(0.2, 1.0, 0.0, Shift::Plane(1.0, 1.0)).unwrap();
    let whole = gauss_plane_integral(&p).unwrap();
    let bound = gauss_plane_tail(&p, 0.25).unwrap();
    let numeric = quad::plane_tail(&p, 0.25).unwrap();
    assert!(numeric <= bound * (1.0 + 1e-6), "plane tail {numeric} vs bound {bound}");
    assert!(bound <= 0.25 * whole);

    let head = GaussParams::new(0.0, 1.0, 0.0, Shift::Line(0.0)).unwrap();
    let c = gauss_halfline_truncation(&head, 0.1, Truncation::Head).unwrap();
    assert!(c.numeric <= 0.1 * c.whole);
    assert!((c.whole - 1.0).abs() < 1e-15);

    let tail = GaussParams::new(0.0, 1.0, 0.0, Shift::Line(1.0)).unwrap();
    let c = gauss_halfline_truncation(&tail, 0.2, Truncation::ShiftedTail).unwrap();
    assert!(rel(c.bound, (-1.0f64 / 0.16).exp() * c.whole) < 1e-15);
    assert!(c.numeric <= c.bound);

    let mixed = GaussParams::new(0.1, 0.8, 0.05, Shift::Line(0.5)).unwrap();
    let c = gauss_halfline_truncation(&mixed, 0.3, Truncation::Head).unwrap();
    assert!(rel(c.numeric, HEAD_MIXED) < 1e-6, "head quadrature {} drifted", c.numeric);
    let c = gauss_halfline_truncation(&mixed, 0.3, Truncation::ShiftedTail).unwrap();
    assert!(rel(c.numeric, SHIFTED_TAIL_MIXED) < 1e-6, "tail quadrature {} drifted", c.numeric);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn prop_plane_closed_form_tracks_quadrature(
        b in 0.3f64..2.0,
        gap in 0.3f64..2.0,
        eps in 0.0f64..0.2,
        wx in -2.0f64..2.0,
        wy in -2.0f64..2.0,
    ) {
        let p = GaussParams::new(b - gap - eps, b, eps, Shift::Plane(wx, wy)).unwrap();
        let closed = gauss_plane_integral(&p).unwrap();
        let numeric = quad::plane_integral(&p).unwrap();
        prop_assert!(rel(closed, numeric) < 1e-5);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn prop_halfline_closed_form_tracks_quadrature(
        b in 0.3f64..2.0,
        gap in 0.3f64..2.0,
        eps in 0.0f64..0.2,
        w in 0.0f64..2.5,
    ) {
        let p = GaussParams::new(b - gap - eps, b, eps, Shift::Line(w)).unwrap();
        let closed = gauss_halfline_rice_integral(&p).unwrap();
        let numeric = quad::halfline_integral(&p).unwrap();
        prop_assert!(rel(closed, numeric) < 1e-5);
    }

    #[test]
    fn prop_nonpositive_gap_rejected(
        b in 0.1f64..2.0,
        excess in 0.0f64..1.0,
        eps in 0.0f64..0.5,
    ) {
        prop_assert!(GaussParams::new(b + excess - eps, b, eps, Shift::Line(0.0)).is_err());
    }
}
