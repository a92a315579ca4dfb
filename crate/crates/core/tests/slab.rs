//! End-to-end behavior of the slab iteration at production lattice sizes.

use approx::assert_relative_eq;
use clk_core::collision::CollisionModel;
use clk_core::slab::{InitialDatum, Outcome, SlabConfig, SlabSolver, WallSpec};
use clk_core::wall::{AccommodationPair, BoundaryModel};
use clk_core::Vec3;

/// Partially accommodating walls at the bulk temperature on both sides.
fn isothermal_config(points_per_axis: usize) -> SlabConfig {
    let wall = WallSpec {
        temperature: 1.0,
        model: BoundaryModel::Cl(AccommodationPair::new(0.8, 0.8).unwrap()),
    };
    SlabConfig {
        width: 1.0,
        x_nodes: 9,
        points_per_axis,
        bulk_temperature: 1.0,
        theta: 0.2,
        time_step: 0.02,
        t_end: 0.1,
        left: wall,
        right: wall,
        collision: CollisionModel::hard_sphere(),
        gain_samples: 128,
        seed: 0x5EED_51AB,
        tol: 1e-8,
        max_iterations: 50,
    }
}

#[test]
fn equilibrium_datum_survives_the_full_solve_unchanged() {
    let solver = SlabSolver::new(isothermal_config(15)).unwrap();
    let report = solver.solve(InitialDatum::Equilibrium).unwrap();
    assert_eq!(report.outcome, Outcome::Converged);
    assert_eq!(report.iterations, 1);
    let state = &report.final_state;
    let mut worst = 0.0f64;
    for level in 0..solver.level_count() {
        for ix in 0..solver.x_node_count() {
            for j in 0..solver.velocity_grid().len() {
                worst = worst.max((state.value(level, ix, j) - 1.0).abs());
            }
        }
    }
    // contract is relative 1e-3; the calibrated scheme holds it to rounding
    assert!(worst <= 1e-3, "equilibrium drifted by {worst}");
    assert!(worst <= 1e-12, "fixed point lost exactness: {worst}");
    assert_relative_eq!(report.bound_constant, 1.0, max_relative = 1e-12);
}

#[test]
fn perturbed_equilibrium_contracts_geometrically() {
    let solver = SlabSolver::new(isothermal_config(15)).unwrap();
    let datum = InitialDatum::PerturbedEquilibrium { amplitude: 0.1 };
    let mut state = solver.initial_state(datum).unwrap();
    let initial_mass = solver.mass_at_level(&state, 0);
    let mut diffs = Vec::new();
    for _ in 1..=9 {
        let next = solver.advance_iteration(&state).unwrap();
        diffs.push(solver.weighted_diff(&next, &state));
        assert!(next.min_value() >= -1e-12 * 1.1);
        state = next;
    }
    for m in 2..diffs.len() {
        assert!(
            diffs[m] < diffs[m - 1],
            "differences stalled at sweep {}: {} vs {}",
            m + 1,
            diffs[m],
            diffs[m - 1]
        );
        let ratio = diffs[m] / diffs[m - 1];
        assert!(ratio < 0.9, "contraction factor {ratio} too weak at sweep {}", m + 1);
    }
    // frozen from the first converged run of this configuration
    assert_relative_eq!(diffs[7], 2.104573419e-3, max_relative = 1e-9);
    let final_mass = solver.mass_at_level(&state, solver.level_count() - 1);
    let drift = (final_mass - initial_mass).abs() / initial_mass;
    assert!(drift < 1e-2, "mass drifted by {drift}");
}

#[test]
fn converged_run_balances_walls_and_conserves_mass() {
    let solver = SlabSolver::new(isothermal_config(15)).unwrap();
    let report = solver
        .solve(InitialDatum::PerturbedEquilibrium { amplitude: 0.1 })
        .unwrap();
    assert_eq!(report.outcome, Outcome::Converged);
    assert!(report.iterations <= 50);
    let flux = *report.flux_residuals.last().unwrap();
    assert!(flux < 1e-2, "wall flux residual {flux} at convergence");
    assert!(flux < 1e-5, "lagged closure should balance to near tolerance, got {flux}");
    let m0 = report.mass_history[0];
    for (level, m) in report.mass_history.iter().enumerate() {
        let drift = (m - m0).abs() / m0;
        assert!(drift < 1e-2, "mass drifted by {drift} at level {level}");
    }
    for w in report.diffs.windows(2).skip(1) {
        assert!(w[1] < w[0], "differences must keep decreasing: {w:?}");
    }
    assert_relative_eq!(report.bound_constant, 1.0, max_relative = 1e-12);
    assert!(report.normalization_defect.is_finite());
}

#[test]
fn beam_statistics_are_stable_under_lattice_refinement() {
    let datum = InitialDatum::Beam {
        amplitude: 1.0,
        center: Vec3::new(1.2, 0.4, 0.0),
        spread: 0.5,
    };
    let mut bounds = Vec::new();
    let mut masses = Vec::new();
    for points in [11, 15] {
        let solver = SlabSolver::new(isothermal_config(points)).unwrap();
        let report = solver.solve(datum).unwrap();
        assert_eq!(report.outcome, Outcome::Converged);
        assert!(report.bound_constant.is_finite());
        let state = &report.final_state;
        assert!(state.min_value() >= -1e-12 * state.sup_value().max(1.0));
        bounds.push(report.bound_constant);
        masses.push(*report.mass_end.last().unwrap());
    }
    let c_change = (bounds[0] / bounds[1] - 1.0).abs();
    assert!(c_change < 0.2, "sup-norm ratio moved by {c_change} between lattices");
    let mass_change = (masses[0] / masses[1] - 1.0).abs();
    assert!(mass_change < 0.2, "final mass moved by {mass_change} between lattices");
}
