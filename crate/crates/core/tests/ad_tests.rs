//! Reverse-mode tape checks: finite-difference agreement, closed-form
//! partials, and bitwise value equality between the `f64` and `Var` code
//! paths of the generic model functions.

use greenhouse_core::economics::{
    penalty_generic, penalty_smoothed_generic, stage_cost_economic_generic, PriceTable,
};
use greenhouse_core::nlp::ad::{Tape, Var};
use greenhouse_core::plant::{
    discrete_step, ode_rhs, output_map_generic, BoundTable, ParameterVector, DT,
};
use greenhouse_core::scalar::Scalar;
use proptest::prelude::*;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

/// Composite of every `Scalar` operation, written once and evaluated on both
/// scalar types. Requires `a + 0.5 b > 0` and `b != 0`.
fn composite<S: Scalar>(a: S, b: S, c: S) -> S {
    let t1 = (a * b).tanh();
    let t2 = a.exp() / (c * c + 1.0);
    let t3 = (b - 0.5).relu() * 2.0;
    let t4 = a.powi(3) - b.rdiv(1.7) + c.rsub(0.3);
    let t5 = (a + b * 0.5).ln();
    t1 + t2 + t3 + t4 - t5 / (a * a + 1.0) + (-c) * 0.25
}

fn composite_grad(a: f64, b: f64, c: f64) -> (f64, [f64; 3]) {
    let tape = Tape::new();
    let va = tape.var(a);
    let vb = tape.var(b);
    let vc = tape.var(c);
    let out = composite(va, vb, vc);
    let adj = tape.grad(out);
    (
        out.value(),
        [adj[va.index()], adj[vb.index()], adj[vc.index()]],
    )
}

fn central_diff(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-6 * x.abs().max(1.0);
    (f(x + h) - f(x - h)) / (2.0 * h)
}

#[test]
fn composite_gradient_matches_finite_differences() {
    let mut rng = ChaCha12Rng::seed_from_u64(11);
    for _ in 0..200 {
        let a = 0.2 + 1.3 * rng.random::<f64>();
        let mut b = 0.1 + 1.9 * rng.random::<f64>();
        if (b - 0.5).abs() < 1e-3 {
            b += 2e-3; // keep the finite difference away from the relu kink
        }
        let c = -1.0 + 3.0 * rng.random::<f64>();
        let (val, grad) = composite_grad(a, b, c);
        assert_eq!(val, composite(a, b, c), "tape value must match plain f64");
        let fd = [
            central_diff(|x| composite(x, b, c), a),
            central_diff(|x| composite(a, x, c), b),
            central_diff(|x| composite(a, b, x), c),
        ];
        for i in 0..3 {
            let err = (grad[i] - fd[i]).abs() / fd[i].abs().max(1.0);
            assert!(
                err < 1e-7,
                "component {i} at ({a}, {b}, {c}): tape {} vs fd {}",
                grad[i],
                fd[i]
            );
        }
    }
}

#[test]
fn division_partials_match_closed_form() {
    let tape = Tape::new();
    let a = tape.var(3.7);
    let b = tape.var(-1.9);
    let out = a / b;
    let adj = tape.grad(out);
    assert_eq!(out.value(), 3.7 / -1.9);
    assert!((adj[a.index()] - 1.0 / -1.9).abs() < 1e-15);
    assert!((adj[b.index()] - (-3.7 / ((-1.9) * (-1.9)))).abs() < 1e-15);
}

#[test]
fn reciprocal_partial_matches_closed_form() {
    let tape = Tape::new();
    let x = tape.var(2.5);
    let out = x.rdiv(4.0); // 4 / x
    let adj = tape.grad(out);
    assert_eq!(out.value(), 1.6);
    assert!((adj[x.index()] - (-4.0 / 6.25)).abs() < 1e-15);
}

#[test]
fn integer_power_edges() {
    let tape = Tape::new();

    let x = tape.var(1.3);
    let adj = tape.grad(x.powi(0));
    assert_eq!(x.powi(0).value(), 1.0);
    assert_eq!(adj[x.index()], 0.0);

    let adj = tape.grad(x.powi(1));
    assert_eq!(adj[x.index()], 1.0);

    // At the origin the quadratic has a flat tangent but the linear does not.
    let zero = tape.var(0.0);
    let adj = tape.grad(zero.powi(2));
    assert_eq!(adj[zero.index()], 0.0);
    let adj = tape.grad(zero.powi(1));
    assert_eq!(adj[zero.index()], 1.0);
}

#[test]
fn relu_subgradient_is_zero_at_kink_and_below() {
    let tape = Tape::new();
    for (v, want) in [(-2.0, 0.0), (0.0, 0.0), (3.0, 1.0)] {
        let x = tape.var(v);
        let adj = tape.grad(x.relu());
        assert_eq!(adj[x.index()], want, "relu'({v})");
    }
}

#[test]
fn fan_out_accumulates_adjoints() {
    // f = ab + (ab) a => df/da = b + 2ab, df/db = a + a^2.
    let (a, b) = (1.7, -0.6);
    let tape = Tape::new();
    let va = tape.var(a);
    let vb = tape.var(b);
    let prod = va * vb;
    let out = prod + prod * va;
    let adj = tape.grad(out);
    assert!((adj[va.index()] - (b + 2.0 * a * b)).abs() < 1e-14);
    assert!((adj[vb.index()] - (a + a * a)).abs() < 1e-14);
}

#[test]
fn custom_unary_splices_external_derivative() {
    // Splice sin(x) with its true derivative and differentiate x * sin(x).
    let x0 = 0.8;
    let tape = Tape::new();
    let x = tape.var(x0);
    let s = x.custom_unary(x0.sin(), x0.cos());
    let out = x * s;
    let adj = tape.grad(out);
    let want = x0.sin() + x0 * x0.cos();
    assert!((adj[x.index()] - want).abs() < 1e-15);
}

#[test]
fn gradient_of_leaf_is_one() {
    let tape = Tape::new();
    let x = tape.var(5.0);
    let adj = tape.grad(x);
    assert_eq!(adj[x.index()], 1.0);
}

#[test]
fn nodes_above_output_are_ignored() {
    let tape = Tape::new();
    let x = tape.var(2.0);
    let out = x * x;
    let _later = out + 100.0; // created after `out`, must not contribute
    let adj = tape.grad(out);
    assert_eq!(adj[x.index()], 4.0);
}

#[test]
fn deep_chain_matches_forward_recurrence() {
    // x_{k+1} = tanh(1.01 x_k + 0.1), 1000 iterations. The reverse sweep must
    // reproduce the forward-accumulated product of local slopes.
    let tape = Tape::with_capacity(4096);
    let x0 = tape.var(0.3);
    let mut x = x0;
    let mut forward = 1.0;
    let mut xv = 0.3f64;
    for _ in 0..1000 {
        x = (x * 1.01 + 0.1).tanh();
        let z = 1.01 * xv + 0.1;
        let t = z.tanh();
        forward *= (1.0 - t * t) * 1.01;
        xv = t;
    }
    assert_eq!(x.value(), xv);
    let adj = tape.grad(x);
    let rel = (adj[x0.index()] - forward).abs() / forward.abs().max(1e-300);
    assert!(rel < 1e-11, "reverse {} vs forward {}", adj[x0.index()], forward);
}

proptest! {
    #[test]
    fn tape_value_equals_plain_evaluation(
        a in 0.2..1.5f64,
        b in 0.1..2.0f64,
        c in -1.0..2.0f64,
    ) {
        let (val, _) = composite_grad(a, b, c);
        prop_assert_eq!(val, composite(a, b, c));
    }
}

fn var_array<'t, const N: usize>(tape: &'t Tape, x: &[f64; N]) -> [Var<'t>; N] {
    x.map(|v| tape.var(v))
}

#[test]
fn plant_rollout_is_bitwise_identical_across_scalar_types() {
    let p = ParameterVector::nominal();
    let mut rng = ChaCha12Rng::seed_from_u64(23);
    for _ in 0..25 {
        let x = [
            0.0035 + 0.3 * rng.random::<f64>(),
            2e-4 + 2e-3 * rng.random::<f64>(),
            5.0 + 20.0 * rng.random::<f64>(),
            2e-3 + 1e-2 * rng.random::<f64>(),
        ];
        let u = [
            1.2 * rng.random::<f64>(),
            7.5 * rng.random::<f64>(),
            150.0 * rng.random::<f64>(),
        ];
        let d = [
            200.0 * rng.random::<f64>(),
            6e-4 + 3e-4 * rng.random::<f64>(),
            -5.0 + 20.0 * rng.random::<f64>(),
            4e-3 + 6e-3 * rng.random::<f64>(),
        ];

        let plain_rhs = ode_rhs(&x, &u, &d, &p);
        let plain_next = discrete_step(&x, &u, &d, &p);
        let plain_y = output_map_generic(&plain_next);

        let tape = Tape::with_capacity(8192);
        let vx = var_array(&tape, &x);
        let vu = var_array(&tape, &u);
        let v_rhs = ode_rhs(&vx, &vu, &d, &p);
        let v_next = discrete_step(&vx, &vu, &d, &p);
        let v_y = output_map_generic(&v_next.map(|v| v.value()));

        for i in 0..4 {
            assert_eq!(plain_rhs[i].to_bits(), v_rhs[i].value().to_bits(), "rhs[{i}]");
            assert_eq!(plain_next[i].to_bits(), v_next[i].value().to_bits(), "next[{i}]");
            assert_eq!(plain_y[i].to_bits(), v_y[i].to_bits(), "y[{i}]");
        }
    }
}

#[test]
fn stage_cost_and_penalty_are_bitwise_identical_across_scalar_types() {
    let prices = PriceTable::default();
    let bounds = BoundTable::default();
    let mut rng = ChaCha12Rng::seed_from_u64(29);
    for _ in 0..25 {
        let x1a = 0.3 * rng.random::<f64>();
        let x1b = x1a + 0.01 * rng.random::<f64>();
        let u = [
            1.2 * rng.random::<f64>(),
            7.5 * rng.random::<f64>(),
            150.0 * rng.random::<f64>(),
        ];
        let y = [
            x1b,
            3000.0 * rng.random::<f64>(),
            -5.0 + 40.0 * rng.random::<f64>(),
            120.0 * rng.random::<f64>(),
        ];

        let plain_cost = stage_cost_economic_generic(x1a, x1b, &u, &prices, DT);
        let plain_pen = penalty_generic(&y, &bounds, &prices);
        let plain_smooth = penalty_smoothed_generic(&y, &bounds, &prices, 1e6);

        let tape = Tape::new();
        let va = tape.var(x1a);
        let vb = tape.var(x1b);
        let vu = var_array(&tape, &u);
        let vy = var_array(&tape, &y);
        let v_cost = stage_cost_economic_generic(va, vb, &vu, &prices, DT);
        let v_pen = penalty_generic(&vy, &bounds, &prices);
        let v_smooth = penalty_smoothed_generic(&vy, &bounds, &prices, 1e6);

        assert_eq!(plain_cost.to_bits(), v_cost.value().to_bits());
        assert_eq!(plain_pen.to_bits(), v_pen.value().to_bits());
        assert_eq!(plain_smooth.to_bits(), v_smooth.value().to_bits());
    }
}

#[test]
fn one_substep_gradient_matches_finite_differences() {
    // Differentiate one full sample-period transition w.r.t. state and input
    // and compare against central differences on the plain evaluation.
    let p = ParameterVector::nominal();
    let x = [0.05, 1.1e-3, 16.0, 7.5e-3];
    let u = [0.6, 2.0, 60.0];
    let d = [110.0, 7.6e-4, 9.0, 5.5e-3];

    // Scalar objective: weighted sum of the successor state.
    let w = [3.0, 1e3, 0.1, 2e2];
    let eval = |x: &[f64; 4], u: &[f64; 3]| {
        let n = discrete_step(x, u, &d, &p);
        (0..4).map(|i| w[i] * n[i]).sum::<f64>()
    };

    let tape = Tape::with_capacity(8192);
    let vx = var_array(&tape, &x);
    let vu = var_array(&tape, &u);
    let n = discrete_step(&vx, &vu, &d, &p);
    let mut out = n[0] * w[0];
    for i in 1..4 {
        out = out + n[i] * w[i];
    }
    let adj = tape.grad(out);

    for i in 0..4 {
        let fd = central_diff(
            |v| {
                let mut xs = x;
                xs[i] = v;
                eval(&xs, &u)
            },
            x[i],
        );
        let got = adj[vx[i].index()];
        let err = (got - fd).abs() / fd.abs().max(1.0);
        assert!(err < 1e-6, "d/dx[{i}]: tape {got} vs fd {fd}");
    }
    for j in 0..3 {
        let fd = central_diff(
            |v| {
                let mut us = u;
                us[j] = v;
                eval(&x, &us)
            },
            u[j],
        );
        let got = adj[vu[j].index()];
        let err = (got - fd).abs() / fd.abs().max(1.0);
        assert!(err < 1e-6, "d/du[{j}]: tape {got} vs fd {fd}");
    }
}
