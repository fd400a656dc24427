//! Action-increment parameterization of the input sequence.
//!
//! Decision variables are `a in [-1,1]^3` per step; the input applied at step
//! `j` is `clamp(u(j-1) + a_j * du_max, u_min, u_max)`, which keeps box and
//! rate constraints satisfied by construction. The solver differentiates a
//! smooth surrogate of the clamp; simulation and returned solutions always
//! use the hard clamp.

use crate::plant::BoundTable;
use crate::scalar::Scalar;

/// Hard-clamped single-step map: `clamp(u_prev + a * du_max)`.
pub fn increment_step_hard(u_prev: &[f64; 3], a: &[f64; 3], bounds: &BoundTable) -> [f64; 3] {
    let mut u = [0.0; 3];
    for i in 0..3 {
        let v = u_prev[i] + a[i] * bounds.du_max[i];
        u[i] = v.clamp(bounds.u_min[i], bounds.u_max[i]);
    }
    u
}

/// Hard-clamped chain over a whole increment sequence.
pub fn apply_increments_hard(
    u_prev: &[f64; 3],
    increments: &[[f64; 3]],
    bounds: &BoundTable,
) -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(increments.len());
    let mut u = *u_prev;
    for a in increments {
        u = increment_step_hard(&u, a, bounds);
        out.push(u);
    }
    out
}

/// Numerically stable smooth minimum `-(1/kappa) ln(e^{-kappa v} + e^{-kappa c})`.
///
/// Written as `min(v, c) - softplus(-kappa |v - c|)/kappa`; the branch on the
/// current value keeps the softplus argument nonpositive, and both branches
/// agree in value and derivative, so the result is the exact log-sum-exp
/// smooth minimum.
fn soft_min<S: Scalar>(v: S, c: f64, kappa: f64) -> S {
    if v.value() <= c {
        let t = (v - c) * kappa;
        v - softplus(t) * (1.0 / kappa)
    } else {
        let t = v.rsub(c) * kappa;
        -softplus(t) * (1.0 / kappa) + c
    }
}

fn soft_max<S: Scalar>(v: S, c: f64, kappa: f64) -> S {
    -soft_min(-v, -c, kappa)
}

/// `ln(1 + e^t)` for `t <= 0`.
fn softplus<S: Scalar>(t: S) -> S {
    (t.exp() + 1.0).ln()
}

/// Smooth surrogate of the single-step clamp. The per-component sharpness is
/// `kappa / u_max_i`, so the worst-case deviation from the hard clamp is
/// `2 ln(2) u_max_i / kappa` (both clamps active), well under `1e-3 u_max_i`
/// at the default `kappa = 2000`.
pub fn increment_step_soft<S: Scalar>(
    u_prev: &[S; 3],
    a: &[S; 3],
    bounds: &BoundTable,
    kappa: f64,
) -> [S; 3] {
    let mut u = *u_prev;
    for i in 0..3 {
        let k_i = kappa / bounds.u_max[i].max(f64::MIN_POSITIVE);
        let v = u_prev[i] + a[i] * bounds.du_max[i];
        let v = soft_min(v, bounds.u_max[i], k_i);
        u[i] = soft_max(v, bounds.u_min[i], k_i);
    }
    u
}

/// Converts a desired input sequence into increment variables, rebuilding the
/// hard-clamped chain as it goes:
/// `a_j = clamp((u_desired_j - u_chain_{j-1}) / du_max, -1, 1)`.
///
/// When the desired sequence is box- and rate-feasible from `u_prev`, the
/// returned increments reproduce it exactly under [`apply_increments_hard`];
/// otherwise they realize its closest rate-limited approximation. Output is
/// always in `[-1, 1]`.
pub fn inputs_to_increments(
    u_prev: &[f64; 3],
    inputs: &[[f64; 3]],
    bounds: &BoundTable,
) -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(inputs.len());
    let mut u = *u_prev;
    for u_des in inputs {
        let mut a = [0.0; 3];
        for i in 0..3 {
            a[i] = ((u_des[i] - u[i]) / bounds.du_max[i]).clamp(-1.0, 1.0);
        }
        u = increment_step_hard(&u, &a, bounds);
        out.push(a);
    }
    out
}
