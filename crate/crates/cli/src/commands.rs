//! One function per subcommand. Each builds its typed configuration from
//! the raw key/value entries (collecting every diagnostic), runs the library
//! call, and writes its artifacts through the deterministic emitters.

use std::path::Path;

use anyhow::{bail, Context, Result};
use rand::Rng;

use clk_core::analytics::{
    gauss_halfline_rice_integral, gauss_halfline_truncation, gauss_plane_integral,
    gauss_plane_tail, quad, GaussParams, Shift, Truncation,
};
use clk_core::collision::CollisionModel;
use clk_core::cycles::{interaction_decay, DecayConfig};
use clk_core::particle::{beam_reflection_histogram, run_transient, BeamHistogram, SimConfig, VelocityInit, WINDOW_BINS, WINDOW_BIN_WIDTH, WINDOW_LO};
use clk_core::rng;
use clk_core::slab::{InitialDatum, SlabConfig, SlabSolver, WallSpec};
use clk_core::theorem::{check_hypotheses, ladder_temperature};
use clk_core::wall::{
    cl_density, cl_pushforward_maxwellian, pushforward_lhs_quadrature, reciprocity_defect,
    verify_normalization, AccommodationPair, HalfSpaceVelocity, WallPatch,
};
use clk_core::Vec3;

use crate::config::{Extractor, ModelKind, RawConfig};
use crate::emit::{fmt_f, Csv, RunStatus};

/// Resolved run context shared by every command.
pub struct Ctx<'a> {
    pub out_dir: &'a Path,
    pub seed: u64,
    pub threads: usize,
}

fn ensure_out(ctx: &Ctx) -> Result<()> {
    std::fs::create_dir_all(ctx.out_dir)
        .with_context(|| format!("creating output directory {}", ctx.out_dir.display()))
}

// ---------------------------------------------------------------- verify --

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn floor_patch(t_w: f64) -> WallPatch {
    WallPatch::new(t_w, Vec3::new(0.0, 0.0, -1.0)).expect("unit normal")
}

fn random_accommodation(gen: &mut impl Rng) -> AccommodationPair {
    AccommodationPair::new(gen.random_range(0.05..=1.0), gen.random_range(0.05..1.95))
        .expect("in-range draw")
}

fn random_striking(gen: &mut impl Rng) -> Vec3 {
    Vec3::new(
        gen.random_range(-5.0..5.0),
        gen.random_range(-5.0..5.0),
        -gen.random_range(0.2..5.0),
    )
}

fn random_emitted(gen: &mut impl Rng) -> Vec3 {
    Vec3::new(
        gen.random_range(-5.0..5.0),
        gen.random_range(-5.0..5.0),
        gen.random_range(0.2..5.0),
    )
}

fn draw_params(gen: &mut impl Rng, min_gap: f64, max_gap: f64, w: Shift) -> GaussParams {
    let b = gen.random_range(0.3..2.5);
    let gap = gen.random_range(min_gap..max_gap);
    let eps = gen.random_range(0.0..0.3);
    GaussParams::new(b - gap - eps, b, eps, w).expect("positive gap")
}

fn draw_plane(gen: &mut impl Rng, min_gap: f64, max_gap: f64) -> GaussParams {
    let w = Shift::Plane(gen.random_range(-2.5..2.5), gen.random_range(-2.5..2.5));
    draw_params(gen, min_gap, max_gap, w)
}

fn draw_line(gen: &mut impl Rng, min_gap: f64, max_gap: f64) -> GaussParams {
    let w = Shift::Line(gen.random_range(0.0..3.0));
    draw_params(gen, min_gap, max_gap, w)
}

fn rel(x: f64, reference: f64) -> f64 {
    (x - reference).abs() / reference.abs().max(1e-300)
}

/// Re-runs the kernel and integral property suites and prints a PASS/FAIL
/// table. Quadrature-backed checks only; nothing here is statistical, so
/// the verdict is seed-independent.
pub fn verify(ctx: &Ctx, raw: &RawConfig, prior: Vec<String>) -> Result<RunStatus> {
    let mut ex = Extractor::new(raw, prior);
    ex.u64("seed", 0);
    ex.finish("verify")?;
    ensure_out(ctx)?;
    let seed = ctx.seed;
    let mut checks = Vec::new();

    let mut gen = rng::stream(seed, 1);
    let mut worst = 0.0_f64;
    for _ in 0..25 {
        let wall = floor_patch(gen.random_range(0.4..2.0));
        let r = random_accommodation(&mut gen);
        let u = random_striking(&mut gen);
        let total = verify_normalization(u, &wall, r, 96)?;
        worst = worst.max((total - 1.0).abs());
    }
    checks.push(Check {
        name: "kernel normalization",
        pass: worst <= 1e-5,
        detail: format!("worst |mass - 1| = {worst:.2e} over 25 draws, tolerance 1e-5"),
    });

    let mut gen = rng::stream(seed, 2);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let wall = floor_patch(gen.random_range(0.4..2.0));
        let r = random_accommodation(&mut gen);
        let defect = reciprocity_defect(random_striking(&mut gen), random_emitted(&mut gen), &wall, r)?;
        worst = worst.max(defect);
    }
    checks.push(Check {
        name: "reciprocity",
        pass: worst <= 1e-12,
        detail: format!("worst relative defect = {worst:.2e} over 1000 pairs, tolerance 1e-12"),
    });

    let mut gen = rng::stream(seed, 3);
    let mut worst = 0.0_f64;
    for _ in 0..10 {
        let p = draw_plane(&mut gen, 0.25, 3.0);
        worst = worst.max(rel(gauss_plane_integral(&p)?, quad::plane_integral(&p)?));
    }
    checks.push(Check {
        name: "tangential closed form",
        pass: worst <= 1e-6,
        detail: format!("worst relative gap to quadrature = {worst:.2e}, tolerance 1e-6"),
    });

    let mut gen = rng::stream(seed, 4);
    let mut worst = 0.0_f64;
    for _ in 0..10 {
        let p = draw_line(&mut gen, 0.25, 3.0);
        worst = worst.max(rel(gauss_halfline_rice_integral(&p)?, quad::halfline_integral(&p)?));
    }
    checks.push(Check {
        name: "normal closed form",
        pass: worst <= 1e-6,
        detail: format!("worst relative gap to quadrature = {worst:.2e}, tolerance 1e-6"),
    });

    let mut gen = rng::stream(seed, 5);
    let mut violations = 0u32;
    for i in 0..20 {
        let delta = gen.random_range(0.05..0.4);
        match i % 3 {
            0 => {
                let p = draw_plane(&mut gen, 0.25, 2.0);
                let whole = gauss_plane_integral(&p)?;
                let bound = gauss_plane_tail(&p, delta)?;
                let numeric = quad::plane_tail(&p, delta)?;
                if numeric < 0.0 || numeric > bound * (1.0 + 1e-6) || bound > delta * whole {
                    violations += 1;
                }
            }
            1 => {
                let p = draw_line(&mut gen, 0.25, 2.0);
                let c = gauss_halfline_truncation(&p, delta, Truncation::Head)?;
                if c.numeric < 0.0 || c.numeric > c.bound {
                    violations += 1;
                }
            }
            _ => {
                let p = draw_line(&mut gen, 0.25, 2.0);
                let c = gauss_halfline_truncation(&p, delta, Truncation::ShiftedTail)?;
                if c.numeric < 0.0 || c.numeric > c.bound {
                    violations += 1;
                }
            }
        }
    }
    checks.push(Check {
        name: "truncation bounds",
        pass: violations == 0,
        detail: format!("{violations} violations over 20 draws"),
    });

    let wall = floor_patch(1.0);
    let r_half = AccommodationPair::new(0.5, 0.5).expect("half");
    let emitted = cl_pushforward_maxwellian(&wall, r_half, 2.0)?;
    let mut worst = 0.0_f64;
    for v in [
        Vec3::new(0.5, -0.3, 0.6),
        Vec3::new(1.5, 0.2, 1.0),
        Vec3::new(0.0, 0.0, 2.0),
        Vec3::new(-2.0, 1.0, 0.4),
    ] {
        let lhs = pushforward_lhs_quadrature(v, &wall, r_half, 2.0, 128)?;
        worst = worst.max(rel(lhs, emitted.density(v, &wall)?));
    }
    checks.push(Check {
        name: "push-forward density",
        pass: worst <= 1e-6,
        detail: format!("worst relative gap = {worst:.2e} at 4 velocities, tolerance 1e-6"),
    });

    let mut gen = rng::stream(seed, 7);
    let mut worst = 0.0_f64;
    for _ in 0..5 {
        let wall = floor_patch(gen.random_range(0.4..2.0));
        let r = random_accommodation(&mut gen);
        let t_src = gen.random_range(0.4..3.0);
        worst = worst.max(cl_pushforward_maxwellian(&wall, r, t_src)?.flux_defect(256).abs());
    }
    checks.push(Check {
        name: "push-forward flux",
        pass: worst <= 1e-8,
        detail: format!("worst |flux - 1| = {worst:.2e} over 5 draws, tolerance 1e-8"),
    });

    let mut gen = rng::stream(seed, 8);
    let mut worst = 0.0_f64;
    for _ in 0..10 {
        let t_w = gen.random_range(0.4..2.0);
        let wall = floor_patch(t_w);
        let r = random_accommodation(&mut gen);
        let eq = cl_pushforward_maxwellian(&wall, r, t_w)?;
        worst = worst
            .max(rel(eq.tangential_temperature(), t_w))
            .max(rel(eq.normal_temperature(), t_w));
    }
    checks.push(Check {
        name: "equilibrium collapse",
        pass: worst <= 1e-12,
        detail: format!("worst relative temperature gap = {worst:.2e}, tolerance 1e-12"),
    });

    let mut failed = 0;
    for c in &checks {
        println!("{:<24} {}  {}", c.name, if c.pass { "PASS" } else { "FAIL" }, c.detail);
        failed += u32::from(!c.pass);
    }
    if failed > 0 {
        bail!("{failed} of {} properties failed", checks.len());
    }
    Ok(RunStatus::Ok)
}

// ------------------------------------------------- figures / kernel-table --

/// Beam wall shared by the figure pipeline: unit temperature scale, inward
/// normal +x, incident velocity (2, 0, -2) in wall coordinates.
fn beam_wall(t_w: f64) -> (WallPatch, Vec3) {
    let wall = WallPatch::new(t_w, Vec3::new(1.0, 0.0, 0.0)).expect("unit normal");
    let u_in = wall.compose(HalfSpaceVelocity { v_par: [2.0, 0.0], v_perp: 2.0 });
    (wall, u_in)
}

/// Per-figure boundary model and its plot label.
fn figure_model(which: u8) -> (ModelKind, &'static str) {
    match which {
        1 => (ModelKind::Maxwell { c: 0.5 }, "half specular atom, half diffuse"),
        2 => (ModelKind::Cl { r_perp: 0.5, r_par: 0.5 }, "accommodation one half"),
        3 => (ModelKind::Cl { r_perp: 0.1, r_par: 0.1 }, "accommodation one tenth"),
        _ => (ModelKind::Cl { r_perp: 1.0 / 30.0, r_par: 1.0 / 30.0 }, "accommodation one thirtieth"),
    }
}

const GRID_LO: f64 = -6.0;
const GRID_STEP: f64 = 0.1;
const GRID_BINS: usize = 120;

fn grid_center(i: usize) -> f64 {
    GRID_LO + (i as f64 + 0.5) * GRID_STEP
}

/// Tabulates the emitted-velocity density of the figure configuration on
/// the plot grid: first tangential component against normal speed, the
/// second tangential component integrated out.
pub fn kernel_table(ctx: &Ctx, raw: &RawConfig, prior: Vec<String>, which: u8) -> Result<RunStatus> {
    let mut ex = Extractor::new(raw, prior);
    let t_w = ex.f64_in("Tw", 1.0, |x| x > 0.0, "positive reals");
    ex.u64("seed", 0);
    ex.finish("kernel-table")?;

    ensure_out(ctx)?;
    let (wall, u_in) = beam_wall(t_w);
    let (kind, label) = figure_model(which);
    // the absolutely continuous part in both cases is a C-L density
    let (pair, weight, atom) = match kind {
        ModelKind::Maxwell { c } => (AccommodationPair::new(1.0, 1.0).expect("diffuse"), c, 1.0 - c),
        ModelKind::Cl { r_perp, r_par } => {
            (AccommodationPair::new(r_perp, r_par).expect("figure pair"), 1.0, 0.0)
        }
        ModelKind::Diffuse => (AccommodationPair::new(1.0, 1.0).expect("diffuse"), 1.0, 0.0),
    };
    // the kernel factorizes over wall coordinates, so the marginal over the
    // second tangential axis is the full density at that axis' mean divided
    // by the Gaussian peak height
    let sigma_sq = t_w * pair.r_par() * (2.0 - pair.r_par());
    let peak = (std::f64::consts::TAU * sigma_sq).sqrt();

    let path = ctx.out_dir.join(format!("kernel{which}.csv"));
    let mut csv = Csv::create(&path, &["v1", "v2", "density"])?;
    for i in 0..GRID_BINS {
        let v1 = grid_center(i);
        for j in 0..GRID_BINS {
            let v2 = grid_center(j);
            let density = if v2 > 0.0 {
                let v = wall.compose(HalfSpaceVelocity { v_par: [v1, 0.0], v_perp: -v2 });
                weight * cl_density(u_in, v, &wall, pair)? * peak
            } else {
                0.0
            };
            csv.row(&[fmt_f(v1), fmt_f(v2), fmt_f(density)])?;
        }
    }
    csv.finish()?;
    println!("kernel{which}.csv: {label}, wall temperature {t_w}");
    if atom > 0.0 {
        let mirror = wall.decompose(wall.specular(u_in));
        println!(
            "note: point mass {atom} at ({}, {}) is not part of the density grid",
            mirror.v_par[0], -mirror.v_perp
        );
    }
    Ok(RunStatus::Ok)
}

fn gnuplot_script(which: u8, label: &str, atom: Option<(f64, (f64, f64))>) -> String {
    let mut s = String::new();
    s.push_str(&format!("# emitted-velocity mass map, configuration {which}: {label}\n"));
    s.push_str("set datafile separator comma\n");
    s.push_str("set key autotitle columnhead\n");
    s.push_str(&format!("set title \"{label}\"\n"));
    s.push_str("set xlabel \"tangential velocity v1\"\n");
    s.push_str("set ylabel \"normal speed v2\"\n");
    s.push_str("set xrange [-6:6]\nset yrange [-6:6]\n");
    s.push_str("set view map\nset size square\n");
    if let Some((mass, (a, b))) = atom {
        s.push_str(&format!(
            "set label 1 \"point mass {mass:.4} at ({a}, {b})\" at {:.1},{:.1} front\n",
            a + 0.3,
            b + 0.3
        ));
        s.push_str(&format!("set object 1 circle at {a},{b} size 0.12 front\n"));
    }
    s.push_str(&format!(
        "splot \"fig{which}.csv\" using 1:2:3 with points pointtype 5 pointsize 0.4 palette notitle\n"
    ));
    s
}

/// Monte Carlo reproduction of one beam-scattering mass map: histogram CSV
/// plus its gnuplot script.
pub fn figures(ctx: &Ctx, raw: &RawConfig, prior: Vec<String>, which: u8) -> Result<RunStatus> {
    let (kind, label) = figure_model(which);
    let mut ex = Extractor::new(raw, prior);
    let t_w = ex.f64_in("Tw", 1.0, |x| x > 0.0, "positive reals");
    let n = ex.usize("n_particles", 100_000);
    ex.u64("seed", 0);
    let model = ex.model(kind);
    ex.finish("figures")?;

    ensure_out(ctx)?;
    let (wall, u_in) = beam_wall(t_w);
    let mut gen = rng::stream(ctx.seed, u64::from(which));
    let h = beam_reflection_histogram(u_in, &wall, model, n, &mut gen)?;

    let path = ctx.out_dir.join(format!("fig{which}.csv"));
    let mut csv = Csv::create(&path, &["v1", "v2", "mass"])?;
    for i in 0..h.bins {
        let v1 = h.lo + (i as f64 + 0.5) * h.bin_width;
        for j in 0..h.bins {
            let v2 = h.lo + (j as f64 + 0.5) * h.bin_width;
            csv.row(&[fmt_f(v1), fmt_f(v2), fmt_f(h.mass[i * h.bins + j])])?;
        }
    }
    csv.finish()?;

    let atom = (h.atom_weight > 0.0).then_some((h.atom_weight, h.atom_point));
    let gp = gnuplot_script(which, label, atom);
    std::fs::write(ctx.out_dir.join(format!("fig{which}.gp")), gp)?;

    print_figure_summary(which, &h);
    Ok(RunStatus::Ok)
}

fn print_figure_summary(which: u8, h: &BeamHistogram) {
    println!("fig{which}.csv + fig{which}.gp written, {} samples", h.samples);
    match which {
        1 => println!(
            "  point mass {:.4} at ({}, {}), continuum mass {:.4}",
            h.atom_weight,
            h.atom_point.0,
            h.atom_point.1,
            1.0 - h.atom_weight - h.out_of_range
        ),
        2 => println!(
            "  tangential mean {:.4} (standard error {:.1e})",
            h.tangential.mean(),
            h.tangential.std_err()
        ),
        _ => println!(
            "  mass within 0.5 of the mirror velocity: {:.4}",
            h.mass_within((2.0, 2.0), 0.5)
        ),
    }
    if h.out_of_range > 0.0 {
        println!("  mass outside the plot window: {:.2e}", h.out_of_range);
    }
}

// ------------------------------------------------------------ sample-wall --

/// Draws re-emitted velocities for one incident beam and writes them as
/// rows, one velocity per line, lab frame, wall at z = 0 with the gas above.
pub fn sample_wall(ctx: &Ctx, raw: &RawConfig, prior: Vec<String>) -> Result<RunStatus> {
    let mut ex = Extractor::new(raw, prior);
    let model = ex.model(ModelKind::Cl { r_perp: 0.5, r_par: 0.5 });
    let t_w = ex.f64_in("Tw", 1.0, |x| x > 0.0, "positive reals");
    let u1 = ex.f64("u1", 2.0);
    let u2 = ex.f64("u2", 0.0);
    let u3 = ex.f64_in(
        "u3",
        -2.0,
        |x| x < 0.0,
        "the negative reals (the beam must point at the wall below)",
    );
    let n = ex.usize("n_samples", 1000);
    ex.u64("seed", 0);
    ex.finish("sample-wall")?;

    ensure_out(ctx)?;
    let wall = floor_patch(t_w);
    let u = Vec3::new(u1, u2, u3);
    let mut gen = rng::stream(ctx.seed, 0);
    let path = ctx.out_dir.join("samples.csv");
    let mut csv = Csv::create(&path, &["v1", "v2", "v3"])?;
    for _ in 0..n {
        let v = model.sample(u, &wall, &mut gen)?;
        csv.row(&[fmt_f(v.x), fmt_f(v.y), fmt_f(v.z)])?;
    }
    csv.finish()?;
    println!("samples.csv: {n} emitted velocities, wall temperature {t_w}");
    Ok(RunStatus::Ok)
}

// --------------------------------------------------------------- simulate --

/// Free-molecular transient: moment time series, wall tallies, and the
/// late-time first-component histogram.
pub fn simulate(ctx: &Ctx, raw: &RawConfig, prior: Vec<String>) -> Result<RunStatus> {
    let mut ex = Extractor::new(raw, prior);
    let domain = ex.domain();
    let model = ex.model(ModelKind::Diffuse);
    let init_kind = ex.word("init", "maxwellian", &["maxwellian", "fixed"]);
    let t0 = ex.f64_in("T0", 1.0, |x| x > 0.0, "positive reals");
    let v1 = ex.f64("v1", 1.0);
    let v2 = ex.f64("v2", 0.0);
    let v3 = ex.f64("v3", 0.0);
    let n = ex.usize("n_particles", 100_000);
    let t_end = ex.f64_in("t_end", 20.0, |x| x > 0.0, "positive reals");
    let sample_count = ex.usize("sample_count", 9);
    ex.u64("seed", 0);
    ex.usize("threads", 1);
    ex.finish("simulate")?;

    let init = if init_kind == "maxwellian" {
        VelocityInit::Maxwellian { temperature: t0 }
    } else {
        VelocityInit::Fixed { velocity: Vec3::new(v1, v2, v3) }
    };
    let cfg = SimConfig {
        domain,
        model,
        init,
        n_particles: n,
        particle_weight: 1.0,
        t_end,
        sample_count,
        seed: ctx.seed,
        threads: ctx.threads,
    };
    ensure_out(ctx)?;
    let obs = run_transient(&cfg)?;

    let mut csv = Csv::create(
        &ctx.out_dir.join("moments.csv"),
        &[
            "time", "v1_mean", "v1_se", "v2_mean", "v2_se", "v3_mean", "v3_se", "energy_mean",
            "energy_se", "axis_mean", "axis_se",
        ],
    )?;
    for m in &obs.moments {
        csv.row(&[
            fmt_f(m.time),
            fmt_f(m.momentum[0].mean()),
            fmt_f(m.momentum[0].std_err()),
            fmt_f(m.momentum[1].mean()),
            fmt_f(m.momentum[1].std_err()),
            fmt_f(m.momentum[2].mean()),
            fmt_f(m.momentum[2].std_err()),
            fmt_f(m.energy.mean()),
            fmt_f(m.energy.std_err()),
            fmt_f(m.axis_center.mean()),
            fmt_f(m.axis_center.std_err()),
        ])?;
    }
    csv.finish()?;

    let mut csv = Csv::create(
        &ctx.out_dir.join("walls.csv"),
        &["wall", "incident_events", "emitted_events", "incident_weight", "emitted_weight"],
    )?;
    for w in &obs.walls {
        csv.row(&[
            w.label.to_string(),
            w.incident_events.to_string(),
            w.emitted_events.to_string(),
            fmt_f(w.incident_weight),
            fmt_f(w.emitted_weight),
        ])?;
    }
    csv.finish()?;

    if obs.window_samples > 0 {
        debug_assert_eq!(obs.window_v1.len(), WINDOW_BINS);
        let total: u64 = obs.window_v1.iter().sum();
        let mut csv = Csv::create(&ctx.out_dir.join("window.csv"), &["v1", "count", "fraction"])?;
        for (k, count) in obs.window_v1.iter().enumerate() {
            let center = WINDOW_LO + (k as f64 + 0.5) * WINDOW_BIN_WIDTH;
            csv.row(&[
                fmt_f(center),
                count.to_string(),
                fmt_f(*count as f64 / total.max(1) as f64),
            ])?;
        }
        csv.finish()?;
    }

    if obs.initial_mass != obs.final_mass {
        bail!(
            "mass drifted: {} at birth, {} at the end",
            fmt_f(obs.initial_mass),
            fmt_f(obs.final_mass)
        );
    }
    println!(
        "simulate: {n} particles to t = {t_end}; mass exactly conserved at {}",
        fmt_f(obs.final_mass)
    );
    for w in &obs.walls {
        println!("  {}: {} incidences, {} re-emissions", w.label, w.incident_events, w.emitted_events);
    }
    Ok(RunStatus::Ok)
}

// ----------------------------------------------------------------- cycles --

/// Survival-depth table of the back-time boundary interaction chain.
pub fn cycles(ctx: &Ctx, raw: &RawConfig, prior: Vec<String>) -> Result<RunStatus> {
    let mut ex = Extractor::new(raw, prior);
    let domain = ex.domain();
    let model = ex.model(ModelKind::Diffuse);
    let t = ex.f64_in("t", 2.0, |x| x > 0.0, "positive reals");
    let x = Vec3::new(ex.f64("x1", 0.3), ex.f64("x2", 0.0), ex.f64("x3", 0.0));
    let v = Vec3::new(ex.f64("v1", 3.0), ex.f64("v2", 1.0), ex.f64("v3", 0.0));
    let k_max = ex.usize("k_max", 20);
    let trials = ex.u64("trials", 20_000);
    ex.u64("seed", 0);
    ex.finish("cycles")?;

    ensure_out(ctx)?;
    let config = DecayConfig { t, x, v, k_max, trials, seed: ctx.seed };
    let stats = interaction_decay(&config, &domain, &model)?;

    let mut csv = Csv::create(
        &ctx.out_dir.join("cycles.csv"),
        &["k", "trials", "hits", "p_hat", "ci_low", "ci_high"],
    )?;
    for k in 1..=k_max {
        let ci = stats.interval(k, 1.96)?;
        csv.row(&[
            k.to_string(),
            stats.trials.to_string(),
            stats.survivors[k - 1].to_string(),
            fmt_f(stats.p_hat(k)),
            fmt_f(ci.lo),
            fmt_f(ci.hi),
        ])?;
    }
    csv.finish()?;
    println!(
        "cycles.csv: depth 1 survival {:.4}, depth {k_max} survival {:.4}, {} trials truncated",
        stats.p_hat(1),
        stats.p_hat(k_max),
        stats.truncated
    );
    Ok(RunStatus::Ok)
}

// ------------------------------------------------------------- solve-slab --

/// Damped fixed-point iteration in the slab; per-sweep report plus a
/// velocity-plane slice of the final state.
pub fn solve_slab(ctx: &Ctx, raw: &RawConfig, prior: Vec<String>) -> Result<RunStatus> {
    let mut ex = Extractor::new(raw, prior);
    let width = ex.f64_in("width", 1.0, |x| x > 0.0, "positive reals");
    let x_nodes = ex.usize("x_nodes", 9);
    let points = ex.usize("points_per_axis", 11);
    let t_m = ex.f64_in("TM", 1.0, |x| x > 0.0, "positive reals");
    let theta = ex.f64_in("theta", 0.2, |x| x > 0.0, "positive reals");
    let dt = ex.f64_in("dt", 0.02, |x| x > 0.0, "positive reals");
    let t_end = ex.f64_in("t_end", 0.1, |x| x > 0.0, "positive reals");
    let tw_left = ex.f64_in("Tw_left", 1.0, |x| x > 0.0, "positive reals");
    let tw_right = ex.f64_in("Tw_right", 1.0, |x| x > 0.0, "positive reals");
    let model = ex.model(ModelKind::Cl { r_perp: 0.8, r_par: 0.8 });
    let kappa = ex.f64_in("kappa", 1.0, |x| x > -3.0 && x <= 1.0, "the half-open interval (-3, 1]");
    let gain_samples = ex.usize("gain_samples", 128);
    let tol = ex.f64_in("tol", 1e-8, |x| x > 0.0, "positive reals");
    let max_iterations = ex.usize("max_iterations", 50);
    ex.u64("seed", 0);
    let datum_kind = ex.word("datum", "perturbed", &["zero", "equilibrium", "perturbed", "beam"]);
    let amplitude = ex.f64("amplitude", if datum_kind == "beam" { 1.0 } else { 0.1 });
    let center = Vec3::new(ex.f64("center1", 1.2), ex.f64("center2", 0.4), ex.f64("center3", 0.0));
    let spread = ex.f64_in("spread", 0.5, |x| x > 0.0, "positive reals");
    ex.finish("solve-slab")?;

    let datum = match datum_kind.as_str() {
        "zero" => InitialDatum::Zero,
        "equilibrium" => InitialDatum::Equilibrium,
        "perturbed" => InitialDatum::PerturbedEquilibrium { amplitude },
        _ => InitialDatum::Beam { amplitude, center, spread },
    };
    let cfg = SlabConfig {
        width,
        x_nodes,
        points_per_axis: points,
        bulk_temperature: t_m,
        theta,
        time_step: dt,
        t_end,
        left: WallSpec { temperature: tw_left, model },
        right: WallSpec { temperature: tw_right, model },
        collision: CollisionModel::new(kappa)?,
        gain_samples,
        seed: ctx.seed,
        tol,
        max_iterations,
    };
    ensure_out(ctx)?;
    let solver = SlabSolver::new(cfg)?;
    let report = solver.solve(datum)?;

    let mut csv = Csv::create(
        &ctx.out_dir.join("report.csv"),
        &["m", "sup_h", "diff", "mass", "flux_residual"],
    )?;
    for m in 1..=report.iterations {
        csv.row(&[
            m.to_string(),
            fmt_f(report.sup_norms[m - 1]),
            fmt_f(report.diffs[m - 1]),
            fmt_f(report.mass_end[m - 1]),
            fmt_f(report.flux_residuals[m - 1]),
        ])?;
    }
    csv.finish()?;

    // final-state slice: ratio and density over the (v1, v2) plane at
    // v3 = 0, middle of the slab, final time level
    let grid = solver.velocity_grid();
    let m_axis = grid.points_per_axis();
    let mid_axis = (m_axis - 1) / 2;
    let mid_x = (solver.x_node_count() - 1) / 2;
    let level = solver.level_count() - 1;
    let mu_norm = (std::f64::consts::TAU * t_m).powf(1.5);
    let mut csv = Csv::create(&ctx.out_dir.join("slice.csv"), &["v1", "v2", "ratio", "density"])?;
    for i1 in 0..m_axis {
        for i2 in 0..m_axis {
            let node = grid.index_of(i1, i2, mid_axis);
            let v = grid.node(node);
            let ratio = report.final_state.value(level, mid_x, node);
            let density = ratio * (-v.norm_sq() / (2.0 * t_m)).exp() / mu_norm;
            csv.row(&[fmt_f(v.x), fmt_f(v.y), fmt_f(ratio), fmt_f(density)])?;
        }
    }
    csv.finish()?;

    println!(
        "solve-slab: {:?} after {} sweeps; last diff {:.3e}, iterate-norm constant {:.6}",
        report.outcome,
        report.iterations,
        report.diffs.last().copied().unwrap_or(0.0),
        report.bound_constant
    );
    println!(
        "  wall-kernel normalization defect {:.2e}; final flux residual {:.3e}",
        report.normalization_defect,
        report.flux_residuals.last().copied().unwrap_or(0.0)
    );
    Ok(RunStatus::Ok)
}

// ---------------------------------------------------------- check-theorem --

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f).unwrap_or_default()
}

fn yes_no(x: bool) -> &'static str {
    if x {
        "yes"
    } else {
        "no"
    }
}

/// Evaluates the well-posedness hypotheses and constants; prints the report
/// and appends one CSV row. Exit is a warning when any hypothesis fails.
pub fn check_theorem(
    ctx: &Ctx,
    t_m: f64,
    min_tw: f64,
    r_perp: f64,
    r_par: f64,
    theta: f64,
    ladder: Option<(u32, u32)>,
) -> Result<RunStatus> {
    ensure_out(ctx)?;
    let rep = check_hypotheses(t_m, min_tw, r_perp, r_par, theta)?;

    println!("reference temperature        = {t_m}");
    println!("coolest wall temperature     = {min_tw}");
    println!("accommodation (perp, par)    = ({r_perp}, {r_par})");
    println!("velocity weight theta        = {theta}");
    println!("accommodation admissible     : {}", yes_no(rep.accommodation_in_range));
    match rep.temperature_threshold {
        Some(thr) => println!("wall temperature threshold   = {thr:.6} (times the reference)"),
        None => println!("wall temperature threshold   : undefined (accommodation out of range)"),
    }
    match rep.epsilon2 {
        Some(e2) => println!(
            "temperature condition        : {} (margin epsilon2 = {e2:.6})",
            if rep.temperature_condition { "holds" } else { "fails" }
        ),
        None => println!("temperature condition        : not evaluated"),
    }
    println!(
        "velocity weight admissible   : {} (xi = {:.6})",
        yes_no(rep.weight_admissible),
        rep.xi
    );
    println!("temperature ladder ceiling   = {:.6}", rep.ladder_top);
    if let Some(eta) = rep.eta {
        println!(
            "contraction (par, perp, max) = ({:.6}, {:.6}, {:.6})",
            eta.par, eta.perp, eta.max
        );
    } else {
        println!("contraction coefficients     : undefined while the hypotheses fail");
    }
    if let Some(amp) = rep.gain_amplitude {
        println!("gain amplitude               = {amp:.6}");
    }
    if let Some(slack) = rep.slack_rate {
        println!("slack growth rate            = {slack:.6}");
    }
    println!("hot-wall flag                : {}", yes_no(rep.hot_wall_flag));

    let ladder_t = match (ladder, rep.r_min) {
        (Some((l, i)), Some(r_min)) => {
            let t = ladder_temperature(l, i, rep.xi, t_m, r_min)?;
            println!("ladder temperature ({l}, {i})   = {t:.6}");
            Some(t)
        }
        (Some(_), None) => {
            println!("ladder temperature           : needs an in-range accommodation pair");
            None
        }
        (None, _) => None,
    };

    let all = rep.all_hold();
    println!("hypotheses                   : {}", if all { "ALL HOLD" } else { "NOT SATISFIED" });

    let mut csv = Csv::create(
        &ctx.out_dir.join("theorem.csv"),
        &[
            "TM", "minTw", "r_perp", "r_par", "theta", "accommodation_ok", "threshold",
            "temperature_ok", "weight_ok", "xi", "ladder_top", "r_min", "r_max", "epsilon2",
            "eta_par", "eta_perp", "eta_max", "gain_amplitude", "slack_rate", "hot_wall",
            "all_hold", "ladder_l", "ladder_i", "ladder_T",
        ],
    )?;
    csv.row(&[
        fmt_f(rep.t_m),
        fmt_f(rep.min_tw),
        fmt_f(rep.r_perp),
        fmt_f(rep.r_par),
        fmt_f(rep.theta),
        u8::from(rep.accommodation_in_range).to_string(),
        opt(rep.temperature_threshold),
        u8::from(rep.temperature_condition).to_string(),
        u8::from(rep.weight_admissible).to_string(),
        fmt_f(rep.xi),
        fmt_f(rep.ladder_top),
        opt(rep.r_min),
        opt(rep.r_max),
        opt(rep.epsilon2),
        opt(rep.eta.map(|e| e.par)),
        opt(rep.eta.map(|e| e.perp)),
        opt(rep.eta.map(|e| e.max)),
        opt(rep.gain_amplitude),
        opt(rep.slack_rate),
        u8::from(rep.hot_wall_flag).to_string(),
        u8::from(all).to_string(),
        ladder.map(|(l, _)| l.to_string()).unwrap_or_default(),
        ladder.map(|(_, i)| i.to_string()).unwrap_or_default(),
        opt(ladder_t),
    ])?;
    csv.finish()?;

    Ok(if all { RunStatus::Ok } else { RunStatus::Warning })
}
