use crossflux::continuation::{
    continue_branch, default_tolerance, estimate_onset, kernel_check, node_count, switch_branch, Orientation, Origin,
    StepControls, SwitchOptions,
};
use crossflux::evolve::{evolve, perturbed_constant, EvolveControls, EvolveTermination};
use crossflux::limit::{scalar_point_at, shooting_oracle, trace_scalar_branch, ScalarTraceOptions};
use crossflux::mesh::{SystemProblem, StateVector};
use crossflux::model::{l2_bounds, nonexistence_check};
use crossflux::solver::{newton_solve, NewtonOptions};
use crossflux::spectral::{critical_d2, limit_coefficients, FluxRatio};
use crossflux::{Grid, ModelParams};

fn reference() -> ModelParams {
    ModelParams::reference(2.0, 1.0, 0.03).unwrap()
}

fn switch_opts(tol: f64) -> SwitchOptions<f64> {
    SwitchOptions { newton: NewtonOptions { tol, ..Default::default() }, with_stability: false, ..Default::default() }
}

#[test]
fn onsets_converge_at_second_order() {
    let p = reference();
    for j in 1..=3 {
        let exact = critical_d2(j, &p).unwrap();
        let gaps: Vec<f64> = [101, 201, 401]
            .iter()
            .map(|&n| {
                let g = Grid::for_params(n, &p).unwrap();
                let tol = default_tolerance(&p, &g);
                let seed = switch_branch(j, -1, 0.05, &p, &g, &switch_opts(tol)).unwrap();
                let est = estimate_onset(&seed, j, &p, &g, tol).unwrap();
                (est.d2 - exact).abs() / exact
            })
            .collect();
        assert!(gaps[1] < 0.02, "j={j} {gaps:?}");
        let order = (gaps[0] / gaps[1]).log2();
        assert!((order - 2.0).abs() < 0.2, "j={j} order={order}");
    }
}

#[test]
fn kernel_eigenvalue_is_second_order_small() {
    let p = reference();
    for j in 1..=3 {
        let k: Vec<_> = [101, 201, 401].iter().map(|&n| kernel_check(j, &p, &Grid::for_params(n, &p).unwrap()).unwrap()).collect();
        for c in &k {
            assert!(c.alignment > 0.999, "j={j} {c:?}");
        }
        let r = k[1].eigenvalue.abs() / k[2].eigenvalue.abs();
        assert!((3.5..4.5).contains(&r), "j={j} ratio {r}");
    }
}

#[test]
fn branch_points_respect_the_a_priori_bounds() {
    let p = reference();
    let g = Grid::for_params(101, &p).unwrap();
    let tol = default_tolerance(&p, &g);
    let (bu, bv) = l2_bounds(&p);
    assert!((bu - 1.5).abs() < 1e-12 && (bv - 2.5).abs() < 1e-12);
    let controls = StepControls { tol, d2_min: 0.004, stability: false, max_folds: 0, max_points: 400, ..Default::default() };
    for j in 1..=2 {
        for sign in [-1, 1] {
            let seed = switch_branch(j, sign, 0.05, &p, &g, &switch_opts(tol)).unwrap();
            let b = continue_branch(&seed, "b", Origin::Bifurcation { j, sign }, &p, &g, &controls, &Orientation::DecreasingD2)
                .unwrap();
            assert!(b.points.len() > 5);
            for q in &b.points {
                assert!(q.norms.l2_u <= bu && q.norms.l2_v <= bv, "{:?}", q.norms);
                assert!(nonexistence_check(&p, q.d2, q.norms.sup_u.max(q.norms.sup_v)).unwrap());
            }
        }
    }
}

#[test]
fn shooting_agrees_with_continuation() {
    let p = reference();
    let g = Grid::for_params(401, &p).unwrap();
    let gamma = FluxRatio::Finite(2.0);
    let tol = g.residual_tolerance(1e-10, 3.0);
    let opts = ScalarTraceOptions {
        controls: StepControls { tol, d2_min: 0.025, stability: false, ..Default::default() },
        ..Default::default()
    };
    let sb = trace_scalar_branch(&p, gamma, 1, -1, &g, &opts).unwrap();
    let v = scalar_point_at(&sb, 0.03, &p, gamma, &g, tol).unwrap();
    let lc = limit_coefficients(&p, gamma).unwrap();
    let shot = shooting_oracle(&lc, 0.03, &g, 1, true).unwrap();
    let diff = v.iter().zip(&shot.v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-4, "diff {diff}");
}

#[test]
fn evolution_selects_the_constant_state_or_the_first_mode() {
    let p = reference();
    let g = Grid::for_params(201, &p).unwrap();
    let s0 = perturbed_constant(&p, &g, 0.01, 7);
    let stable = evolve(&s0, 0.05, &p, &g, &EvolveControls::default()).unwrap();
    assert_eq!(stable.termination, EvolveTermination::Steady);
    assert!(stable.final_distance() < 1e-6);

    let run = evolve(&s0, 0.02, &p, &g, &EvolveControls::default()).unwrap();
    assert_eq!(run.termination, EvolveTermination::Steady);
    let tol = default_tolerance(&p, &g);
    let (x, _) = newton_solve(
        &SystemProblem::new(&p, &g),
        &run.final_state().to_flat(),
        0.02,
        &NewtonOptions { tol, ..Default::default() },
    )
    .unwrap();
    let polished = StateVector::from_flat(&x);
    assert_eq!(node_count(&polished, &g).unwrap(), 0);
    let controls = StepControls { tol, d2_min: 0.02, stability: false, max_folds: 0, ..Default::default() };
    let best = [-1i8, 1]
        .iter()
        .map(|&sign| {
            let seed = switch_branch(1, sign, 0.05, &p, &g, &switch_opts(tol)).unwrap();
            let b = continue_branch(&seed, "g1", Origin::Bifurcation { j: 1, sign }, &p, &g, &controls, &Orientation::DecreasingD2)
                .unwrap();
            let last = b.points.last().unwrap();
            assert!((last.d2 - 0.02).abs() < 1e-12);
            last.state.sup_distance(&polished)
        })
        .fold(f64::INFINITY, f64::min);
    assert!(best < 1e-3, "{best}");
}

#[test]
fn single_precision_switch() {
    let p = crossflux::ModelParamsF32::reference(2.0, 1.0, 0.03).unwrap();
    let g = crossflux::GridF32::for_params(41, &p).unwrap();
    let opts = SwitchOptions { newton: NewtonOptions { tol: 2e-3, ..Default::default() }, with_stability: false, ..Default::default() };
    let seed = switch_branch(1, -1, 0.05f32, &p, &g, &opts).unwrap();
    assert!(seed.state.v[0] < 0.5);
}
