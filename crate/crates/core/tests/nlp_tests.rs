//! Transcription and solver checks: increment-map arithmetic, soft-clamp
//! accuracy, finite-difference gradients through the rollout, a brute-force
//! grid oracle for a toy problem, and the pinned greenhouse solves.

use approx::assert_relative_eq;
use greenhouse_core::economics::PriceTable;
use greenhouse_core::error::CoreError;
use greenhouse_core::nlp::{
    apply_increments_hard, increment_step_hard, increment_step_soft, inputs_to_increments,
    minimize_box, solve_ocp, AlState, BoxProblem, OcpSpec, RolloutProgram, SolveStatus,
    SolverOptions, TerminalCost, TerminalRegion,
};
use greenhouse_core::plant::{
    discrete_step, initial_input, initial_state, synthesize_weather, BoundTable, ControlInput,
    Disturbance, ParameterVector, State, SynthWeatherConfig, DT,
};
use greenhouse_core::economics::stage_cost_total;
use greenhouse_core::scalar::Scalar;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

fn euro_prices() -> PriceTable {
    let base = PriceTable::default();
    PriceTable {
        c_co2: base.c_co2 * 1e-6,
        c_heat: base.c_heat / 3.6e6,
        ..base
    }
}

// ---------------------------------------------------------------------------
// Increment map

#[test]
fn increment_step_matches_hand_arithmetic() {
    let bounds = BoundTable::default();
    // du_max = u_max / 10 = (0.12, 0.75, 15).
    assert_relative_eq!(bounds.du_max[0], 0.12, max_relative = 1e-15);
    assert_relative_eq!(bounds.du_max[1], 0.75, max_relative = 1e-15);
    assert_relative_eq!(bounds.du_max[2], 15.0, max_relative = 1e-15);

    let u = increment_step_hard(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0], &bounds);
    for i in 0..3 {
        assert_eq!(u[i], bounds.du_max[i]);
    }

    let u = increment_step_hard(&[0.06, 0.0, 50.0], &[1.0, 0.5, -1.0], &bounds);
    assert_relative_eq!(u[0], 0.18, max_relative = 1e-15);
    assert_relative_eq!(u[1], 0.375, max_relative = 1e-15);
    assert_relative_eq!(u[2], 35.0, max_relative = 1e-15);
}

#[test]
fn increment_clamps_saturate_exactly() {
    let bounds = BoundTable::default();
    let at_max = increment_step_hard(&bounds.u_max.clone(), &[1.0, 1.0, 1.0], &bounds);
    assert_eq!(at_max, bounds.u_max);
    let at_min = increment_step_hard(&bounds.u_min.clone(), &[-1.0, -1.0, -1.0], &bounds);
    assert_eq!(at_min, bounds.u_min);
}

#[test]
fn soft_clamp_stays_within_tolerance_of_hard_clamp() {
    let bounds = BoundTable::default();
    // Dense scan of the increment range from starting points that exercise
    // the interior, each bound, and both clamps.
    let starts = [
        [0.0, 0.0, 0.0],
        [0.6, 3.75, 75.0],
        [1.2, 7.5, 150.0],
        [0.05, 7.2, 10.0],
    ];
    let mut worst = [0.0f64; 3];
    for u_prev in starts {
        for j in 0..=2000 {
            let a_val = -1.0 + j as f64 * 1e-3;
            let a = [a_val; 3];
            let hard = increment_step_hard(&u_prev, &a, &bounds);
            let soft = increment_step_soft(&u_prev, &a, &bounds, 2000.0);
            for i in 0..3 {
                worst[i] = worst[i].max((soft[i] - hard[i]).abs());
            }
        }
    }
    for i in 0..3 {
        assert!(
            worst[i] < 1e-3 * bounds.u_max[i],
            "channel {i}: worst soft-clamp deviation {} vs cap {}",
            worst[i],
            1e-3 * bounds.u_max[i]
        );
    }
}

#[test]
fn feasible_input_sequences_roundtrip_through_increments() {
    let bounds = BoundTable::default();
    let mut rng = ChaCha12Rng::seed_from_u64(31);
    for _ in 0..100 {
        let u_prev = [
            1.2 * rng.random::<f64>(),
            7.5 * rng.random::<f64>(),
            150.0 * rng.random::<f64>(),
        ];
        // Feasible-by-construction target sequence.
        let incs: Vec<[f64; 3]> = (0..6)
            .map(|_| {
                [
                    rng.random::<f64>() * 2.0 - 1.0,
                    rng.random::<f64>() * 2.0 - 1.0,
                    rng.random::<f64>() * 2.0 - 1.0,
                ]
            })
            .collect();
        let inputs = apply_increments_hard(&u_prev, &incs, &bounds);
        let recovered = inputs_to_increments(&u_prev, &inputs, &bounds);
        assert!(recovered.iter().flatten().all(|v| (-1.0..=1.0).contains(v)));
        let rebuilt = apply_increments_hard(&u_prev, &recovered, &bounds);
        for (want, got) in inputs.iter().zip(&rebuilt) {
            for i in 0..3 {
                assert!(
                    (want[i] - got[i]).abs() <= 1e-12 * bounds.u_max[i],
                    "channel {i}: {} vs {}",
                    want[i],
                    got[i]
                );
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Terminal region

#[test]
fn terminal_region_validation_and_geometry() {
    assert!(matches!(
        TerminalRegion::new([1.0; 4], -0.1),
        Err(CoreError::InvalidArgument(_))
    ));
    assert!(matches!(
        TerminalRegion::new([1.0; 4], 1.5),
        Err(CoreError::InvalidArgument(_))
    ));
    assert!(matches!(
        TerminalRegion::new([1.0, -0.2, 1.0, 1.0], 0.1),
        Err(CoreError::InvalidArgument(_))
    ));

    let region = TerminalRegion::new([1.0, 2.0, 3.0, 4.0], 0.1).unwrap();
    let (lo, hi) = region.bounds();
    for i in 0..4 {
        assert!(lo[i] <= hi[i]);
        assert_relative_eq!(lo[i], 0.9 * region.center[i], max_relative = 1e-15);
        assert_relative_eq!(hi[i], 1.1 * region.center[i], max_relative = 1e-15);
    }

    assert_eq!(region.max_relative_violation(&[1.0, 2.0, 3.0, 4.0]), 0.0);
    assert_eq!(region.max_relative_violation(&[0.95, 1.9, 3.2, 4.3]), 0.0);
    // x1 = 0.8 misses the lower bound 0.9 by 0.1 of the center scale 1.0.
    let v = region.max_relative_violation(&[0.8, 2.0, 3.0, 4.0]);
    assert_relative_eq!(v, 0.1, max_relative = 1e-12);

    // epsilon = 0 collapses the box to the center point.
    let point = TerminalRegion::new([2.0; 4], 0.0).unwrap();
    let (lo, hi) = point.bounds();
    assert_eq!(lo, hi);
    assert_eq!(point.max_relative_violation(&[2.0; 4]), 0.0);
    assert!(point.max_relative_violation(&[2.1, 2.0, 2.0, 2.0]) > 0.0);
}

// ---------------------------------------------------------------------------
// Inner box solver

struct Quadratic {
    center: Vec<f64>,
}

impl BoxProblem for Quadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn eval(&self, a: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let mut f = 0.0;
        for i in 0..a.len() {
            f += (a[i] - self.center[i]).powi(2);
        }
        if let Some(g) = grad {
            for i in 0..a.len() {
                g[i] = 2.0 * (a[i] - self.center[i]);
            }
        }
        f
    }
}

#[test]
fn box_solver_finds_interior_quadratic_minimum() {
    let problem = Quadratic {
        center: vec![0.3, -0.7, 0.05],
    };
    let opts = SolverOptions::default();
    let out = minimize_box(&problem, &[0.0; 3], &[-1.0; 3], &[1.0; 3], &opts);
    assert!(out.converged);
    for i in 0..3 {
        assert!((out.a[i] - problem.center[i]).abs() < 1e-6);
    }
}

struct Shifted;

impl BoxProblem for Shifted {
    fn dim(&self) -> usize {
        1
    }
    fn eval(&self, a: &[f64], grad: Option<&mut [f64]>) -> f64 {
        if let Some(g) = grad {
            g[0] = 2.0 * (a[0] - 3.0);
        }
        (a[0] - 3.0).powi(2)
    }
}

#[test]
fn box_solver_projects_exterior_minimum_onto_bound() {
    // min (u - 3)^2 over u in [0, 1.2]: analytic optimum at the ceiling.
    let opts = SolverOptions::default();
    let out = minimize_box(&Shifted, &[0.5], &[0.0], &[1.2], &opts);
    assert!(out.converged);
    assert_eq!(out.a[0], 1.2);
    assert_relative_eq!(out.f, (1.2 - 3.0) * (1.2 - 3.0), max_relative = 1e-15);
}

struct Rosenbrock;

impl BoxProblem for Rosenbrock {
    fn dim(&self) -> usize {
        2
    }
    fn eval(&self, a: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let (x, y) = (a[0], a[1]);
        if let Some(g) = grad {
            g[0] = -2.0 * (1.0 - x) - 400.0 * x * (y - x * x);
            g[1] = 200.0 * (y - x * x);
        }
        (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2)
    }
}

#[test]
fn box_solver_traverses_the_rosenbrock_valley() {
    // The optimum (1, 1) is simultaneously the unconstrained minimum and a
    // corner of the box.
    let opts = SolverOptions {
        max_inner_iters: 500,
        ..SolverOptions::default()
    };
    let out = minimize_box(&Rosenbrock, &[-0.5, 0.5], &[-1.0; 2], &[1.0; 2], &opts);
    assert!(out.converged, "stationarity {}", out.stationarity);
    assert!((out.a[0] - 1.0).abs() < 1e-4, "x = {}", out.a[0]);
    assert!((out.a[1] - 1.0).abs() < 1e-4, "y = {}", out.a[1]);
}

#[test]
fn box_solver_never_returns_worse_than_projected_start() {
    let mut rng = ChaCha12Rng::seed_from_u64(37);
    let opts = SolverOptions {
        max_inner_iters: 7, // starve it so early exits are exercised
        ..SolverOptions::default()
    };
    for _ in 0..50 {
        let n = rng.random_range(1..=6);
        let problem = Quadratic {
            center: (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect(),
        };
        let a0: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let f0 = problem.eval(&a0, None);
        let out = minimize_box(&problem, &a0, &vec![-1.0; n], &vec![1.0; n], &opts);
        assert!(out.f <= f0 + 1e-12);
    }
}

// ---------------------------------------------------------------------------
// Toy optimal control problem vs a brute-force grid oracle

/// Two-step linear plant with one shared increment triple: u applied at step
/// one is `u_prev + a (.) du`, at step two `u_prev + 2 a (.) du`. Three
/// decision variables, so an exhaustive 101^3 grid is tractable.
fn toy_objective<S: Scalar>(a: &[S; 3]) -> S {
    let a_mat = [[0.9, 0.2], [-0.1, 0.8]];
    let b_mat = [[0.3, 0.0, -0.2], [0.1, -0.4, 0.25]];
    let du = [0.5, 0.4, 0.6];
    let u_prev = [0.2, -0.1, 0.0];
    let x0 = [1.0, -0.5];

    let u1 = [
        a[0] * du[0] + u_prev[0],
        a[1] * du[1] + u_prev[1],
        a[2] * du[2] + u_prev[2],
    ];
    let u2 = [
        a[0] * (2.0 * du[0]) + u_prev[0],
        a[1] * (2.0 * du[1]) + u_prev[1],
        a[2] * (2.0 * du[2]) + u_prev[2],
    ];

    let step = |x: [S; 2], u: &[S; 3]| {
        [
            u[0] * b_mat[0][0] + u[1] * b_mat[0][1] + u[2] * b_mat[0][2]
                + x[0] * a_mat[0][0]
                + x[1] * a_mat[0][1],
            u[0] * b_mat[1][0] + u[1] * b_mat[1][1] + u[2] * b_mat[1][2]
                + x[0] * a_mat[1][0]
                + x[1] * a_mat[1][1],
        ]
    };
    // Lift the constant initial state onto the scalar type via a * 0 + c.
    let x0s = [a[0] * 0.0 + x0[0], a[0] * 0.0 + x0[1]];
    let x1 = step(x0s, &u1);
    let x2 = step(x1, &u2);

    let sq = |v: [S; 2]| v[0] * v[0] + v[1] * v[1];
    let uu = |u: &[S; 3]| u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
    sq(x1) + sq(x2) + (uu(&u1) + uu(&u2)) * 0.01
}

struct ToyOcp;

impl BoxProblem for ToyOcp {
    fn dim(&self) -> usize {
        3
    }
    fn eval(&self, a: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let point = [a[0], a[1], a[2]];
        if let Some(g) = grad {
            let tape = greenhouse_core::nlp::ad::Tape::new();
            let vars = [tape.var(a[0]), tape.var(a[1]), tape.var(a[2])];
            let out = toy_objective(&vars);
            let adj = tape.grad(out);
            for i in 0..3 {
                g[i] = adj[vars[i].index()];
            }
            out.value()
        } else {
            toy_objective(&point)
        }
    }
}

#[test]
fn toy_ocp_matches_brute_force_grid() {
    let mut grid_best = f64::INFINITY;
    for i in 0..=100 {
        for j in 0..=100 {
            for k in 0..=100 {
                let a = [
                    -1.0 + 0.02 * i as f64,
                    -1.0 + 0.02 * j as f64,
                    -1.0 + 0.02 * k as f64,
                ];
                let f = toy_objective(&a);
                if f < grid_best {
                    grid_best = f;
                }
            }
        }
    }

    let opts = SolverOptions::default();
    let out = minimize_box(&ToyOcp, &[0.0; 3], &[-1.0; 3], &[1.0; 3], &opts);
    assert!(out.converged);
    assert!(
        out.f <= grid_best + 1e-12,
        "continuous optimum {} must not exceed grid optimum {}",
        out.f,
        grid_best
    );
    assert!(
        grid_best - out.f <= 1e-3,
        "grid {} vs solver {}",
        grid_best,
        out.f
    );
}

// ---------------------------------------------------------------------------
// Greenhouse transcription

struct QuadraticTerminal;

impl TerminalCost for QuadraticTerminal {
    fn value_grad(&self, x1: f64, k: f64) -> (f64, f64) {
        (3.0 * x1 * x1 + 1e-4 * k, 6.0 * x1)
    }
}

struct Fixture {
    weather: Vec<Disturbance>,
    params: ParameterVector,
    bounds: BoundTable,
    prices: PriceTable,
}

impl Fixture {
    fn new() -> Self {
        let series = synthesize_weather(7, 256, &SynthWeatherConfig::default());
        Fixture {
            weather: series.records().to_vec(),
            params: ParameterVector::nominal(),
            bounds: BoundTable::default(),
            prices: euro_prices(),
        }
    }

    fn spec_at<'a>(
        &'a self,
        horizon: usize,
        k0: usize,
        x0: State,
        u_prev: ControlInput,
        terminal_cost: Option<&'a dyn TerminalCost>,
        terminal_region: Option<TerminalRegion>,
    ) -> OcpSpec<'a> {
        OcpSpec {
            horizon,
            x0,
            u_prev,
            k0,
            disturbances: &self.weather[k0..k0 + horizon + 1],
            params: &self.params,
            bounds: &self.bounds,
            prices: &self.prices,
            dt: DT,
            terminal_cost,
            terminal_region,
        }
    }
}

#[test]
fn zero_increments_hold_the_previous_input() {
    let fx = Fixture::new();
    let u_prev = ControlInput::from_array([0.3, 2.0, 40.0]);
    let spec = fx.spec_at(3, 10, initial_state(), u_prev, None, None);
    let program = RolloutProgram::new(&spec, 2000.0, 1e6);
    let (inputs, states, objective) = program.reconstruct(&[0.0; 9]);

    let mut x = initial_state();
    let mut manual = 0.0;
    for (k, (u, s)) in inputs.iter().zip(&states).enumerate() {
        assert_eq!(u.as_array(), u_prev.as_array(), "step {k} must hold u_prev");
        let next = State::from_array(discrete_step(
            &x.as_array(),
            &u.as_array(),
            &fx.weather[10 + k].as_array(),
            &fx.params,
        ));
        assert_eq!(next.as_array(), s.as_array(), "state mismatch at step {k}");
        manual += stage_cost_total(&x, u, &next, &fx.bounds, &fx.prices, DT).total();
        x = next;
    }
    assert_eq!(objective, manual);
}

#[test]
fn empty_horizon_solves_to_empty_solution() {
    let fx = Fixture::new();
    let spec = fx.spec_at(0, 0, initial_state(), initial_input(), None, None);
    let sol = solve_ocp(&spec, &[], &SolverOptions::default()).unwrap();
    assert!(sol.inputs.is_empty());
    assert!(sol.states.is_empty());
    assert_eq!(sol.status, SolveStatus::Converged);
    assert_eq!(sol.objective, 0.0);
}

#[test]
fn rollout_gradient_matches_finite_differences() {
    let fx = Fixture::new();
    let mut rng = ChaCha12Rng::seed_from_u64(41);
    let terminal = QuadraticTerminal;

    for trial in 0..6 {
        let x0 = State::from_array([
            0.01 + 0.2 * rng.random::<f64>(),
            6e-4 + 1e-3 * rng.random::<f64>(),
            10.0 + 10.0 * rng.random::<f64>(),
            5e-3 + 5e-3 * rng.random::<f64>(),
        ]);
        let u_prev = ControlInput::from_array([
            1.2 * rng.random::<f64>(),
            7.5 * rng.random::<f64>(),
            150.0 * rng.random::<f64>(),
        ]);
        let k0 = rng.random_range(0..100);
        let with_terminal = trial % 2 == 0;
        let region = if trial % 3 == 0 {
            Some(TerminalRegion::new([0.1, 1e-3, 15.0, 8e-3], 0.05).unwrap())
        } else {
            None
        };
        let spec = fx.spec_at(
            4,
            k0,
            x0,
            u_prev,
            if with_terminal {
                Some(&terminal)
            } else {
                None
            },
            region,
        );
        let program = RolloutProgram::new(&spec, 2000.0, 1e6);

        // Nonzero multipliers exercise the augmented-Lagrangian terms.
        let al = region.map(|_| {
            let mut s = AlState::new(5.0);
            s.mu_lo = [0.3, 0.1, 0.2, 0.4];
            s.mu_hi = [0.2, 0.3, 0.1, 0.05];
            s
        });

        let a: Vec<f64> = (0..12).map(|_| rng.random::<f64>() * 1.6 - 0.8).collect();
        let mut grad = vec![0.0; 12];
        let out = program.eval_grad(&a, al.as_ref(), &mut grad);
        assert!(out.augmented.is_finite());

        let h = 1e-6;
        for i in 0..12 {
            let mut ap = a.clone();
            ap[i] += h;
            let up = program.eval_value(&ap, al.as_ref()).augmented;
            ap[i] -= 2.0 * h;
            let dn = program.eval_value(&ap, al.as_ref()).augmented;
            let fd = (up - dn) / (2.0 * h);
            let rel = (grad[i] - fd).abs() / fd.abs().max(1e-6);
            assert!(
                rel < 1e-4,
                "trial {trial} component {i}: grad {} vs fd {} (rel {rel})",
                grad[i],
                fd
            );
        }
    }
}

#[test]
fn greenhouse_short_horizon_solve_converges() {
    let fx = Fixture::new();
    let spec = fx.spec_at(2, 0, initial_state(), initial_input(), None, None);
    let sol = solve_ocp(&spec, &[[0.0; 3]; 2], &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Converged);
    assert!(
        sol.stationarity < 1e-6,
        "stationarity residual {}",
        sol.stationarity
    );
    assert_eq!(sol.inputs.len(), 2);
    assert_eq!(sol.states.len(), 2);
}

#[test]
fn random_solves_keep_core_guarantees() {
    // Monotone improvement w.r.t. the warm start (same surrogate), input
    // feasibility to machine precision, and bitwise re-simulation of the
    // returned states, across random instances regardless of solve status.
    let fx = Fixture::new();
    let mut rng = ChaCha12Rng::seed_from_u64(43);
    let opts = SolverOptions {
        max_inner_iters: 60,
        ..SolverOptions::default()
    };

    for _ in 0..100 {
        let horizon = rng.random_range(2..=5);
        let k0 = rng.random_range(0..200);
        let x0 = State::from_array([
            0.0035 + 0.3 * rng.random::<f64>(),
            4e-4 + 1.6e-3 * rng.random::<f64>(),
            8.0 + 14.0 * rng.random::<f64>(),
            4e-3 + 8e-3 * rng.random::<f64>(),
        ]);
        let u_prev = ControlInput::from_array([
            1.2 * rng.random::<f64>(),
            7.5 * rng.random::<f64>(),
            150.0 * rng.random::<f64>(),
        ]);
        let spec = fx.spec_at(horizon, k0, x0, u_prev, None, None);
        let guess: Vec<[f64; 3]> = (0..horizon)
            .map(|_| {
                [
                    rng.random::<f64>() * 2.0 - 1.0,
                    rng.random::<f64>() * 2.0 - 1.0,
                    rng.random::<f64>() * 2.0 - 1.0,
                ]
            })
            .collect();

        let program = RolloutProgram::new(&spec, opts.kappa, opts.hinge_sharpness);
        let flat: Vec<f64> = guess.iter().flatten().copied().collect();
        let guess_objective = program.eval_value(&flat, None).base;

        let sol = solve_ocp(&spec, &guess, &opts).unwrap();

        assert!(
            sol.surrogate_objective <= guess_objective + 1e-12,
            "objective {} worse than warm start {}",
            sol.surrogate_objective,
            guess_objective
        );

        let mut prev = u_prev.as_array();
        for u in &sol.inputs {
            let arr = u.as_array();
            for i in 0..3 {
                assert!(arr[i] >= fx.bounds.u_min[i] && arr[i] <= fx.bounds.u_max[i]);
                assert!(
                    (arr[i] - prev[i]).abs() <= fx.bounds.du_max[i] * (1.0 + 1e-12),
                    "rate violation on channel {i}"
                );
            }
            prev = arr;
        }

        // Re-simulate the returned inputs and demand bitwise equality.
        let mut x = x0.as_array();
        for (j, (u, s)) in sol.inputs.iter().zip(&sol.states).enumerate() {
            x = discrete_step(
                &x,
                &u.as_array(),
                &fx.weather[k0 + j].as_array(),
                &fx.params,
            );
            let want = s.as_array();
            for i in 0..4 {
                assert_eq!(
                    x[i].to_bits(),
                    want[i].to_bits(),
                    "re-simulation mismatch at step {j} component {i}"
                );
            }
        }
    }
}

#[test]
fn reachable_terminal_region_converges_within_tolerance() {
    let fx = Fixture::new();
    // Center the region on the hold rollout's terminal state so it is
    // trivially reachable, then demand AL convergence.
    let horizon = 3;
    let u_prev = ControlInput::from_array([0.2, 1.0, 60.0]);
    let mut x = initial_state().as_array();
    for k in 0..horizon {
        x = discrete_step(&x, &u_prev.as_array(), &fx.weather[k].as_array(), &fx.params);
    }
    let region = TerminalRegion::new(x, 0.1).unwrap();
    let spec = fx.spec_at(horizon, 0, initial_state(), u_prev, None, Some(region));
    let sol = solve_ocp(&spec, &[[0.0; 3]; 3], &SolverOptions::default()).unwrap();

    assert_eq!(sol.status, SolveStatus::Converged, "violation {}", sol.terminal_violation);
    assert!(sol.terminal_violation <= 1e-4);
    // The hard-clamped terminal state satisfies the box in the relative sense.
    let terminal = sol.states.last().unwrap().as_array();
    assert!(region.max_relative_violation(&terminal) <= 2e-4);
}

#[test]
fn unreachable_terminal_region_reports_infeasible() {
    let fx = Fixture::new();
    // Demand 30x dry-weight growth within two steps: impossible.
    let region = TerminalRegion::new([0.1, 1e-3, 15.0, 8e-3], 0.01).unwrap();
    let spec = fx.spec_at(2, 0, initial_state(), initial_input(), None, Some(region));
    let sol = solve_ocp(&spec, &[[0.0; 3]; 2], &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::TerminalInfeasible);
    assert!(sol.terminal_violation > 1e-4);
}

#[test]
fn solve_rejects_malformed_requests() {
    let fx = Fixture::new();

    let spec = fx.spec_at(3, 0, initial_state(), initial_input(), None, None);
    // Wrong warm-start length.
    assert!(matches!(
        solve_ocp(&spec, &[[0.0; 3]; 2], &SolverOptions::default()),
        Err(CoreError::InvalidArgument(_))
    ));
    // Out-of-range increments.
    assert!(matches!(
        solve_ocp(&spec, &[[0.0; 3], [0.0; 3], [1.5, 0.0, 0.0]], &SolverOptions::default()),
        Err(CoreError::InvalidArgument(_))
    ));

    // Disturbance window too short for the horizon.
    let short = OcpSpec {
        disturbances: &fx.weather[0..3],
        ..fx.spec_at(3, 0, initial_state(), initial_input(), None, None)
    };
    assert!(matches!(
        solve_ocp(&short, &[[0.0; 3]; 3], &SolverOptions::default()),
        Err(CoreError::InvalidArgument(_))
    ));

    // Previous input outside the box.
    let bad_u = fx.spec_at(
        2,
        0,
        initial_state(),
        ControlInput::from_array([0.0, 0.0, 200.0]),
        None,
        None,
    );
    assert!(matches!(
        solve_ocp(&bad_u, &[[0.0; 3]; 2], &SolverOptions::default()),
        Err(CoreError::InvalidArgument(_))
    ));
}
