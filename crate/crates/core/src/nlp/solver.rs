//! Projected limited-memory quasi-Newton descent on box constraints, plus the
//! augmented-Lagrangian outer loop for the terminal region.

use std::collections::VecDeque;

use crate::error::{CoreError, Result};
use crate::nlp::transcribe::RolloutProgram;
use crate::nlp::{AlState, NlpSolution, OcpSpec, SolveStatus, SolverOptions};

/// Box-constrained smooth problem: objective and (optionally) gradient.
pub trait BoxProblem {
    fn dim(&self) -> usize;
    fn eval(&self, a: &[f64], grad: Option<&mut [f64]>) -> f64;
}

/// Outcome of one inner box-constrained minimization.
#[derive(Debug, Clone)]
pub struct InnerResult {
    pub a: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub stationarity: f64,
    pub converged: bool,
    pub func_evals: usize,
}

fn project(a: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..a.len() {
        a[i] = a[i].clamp(lo[i], hi[i]);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// `||a - P(a - g)||_inf`, the projected-gradient stationarity residual.
fn stationarity(a: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..a.len() {
        let stepped = (a[i] - g[i]).clamp(lo[i], hi[i]);
        worst = worst.max((a[i] - stepped).abs());
    }
    worst
}

/// Two-loop L-BFGS direction `-H g` from the stored curvature pairs.
fn lbfgs_direction(memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, g: &[f64]) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let alpha = rho * dot(s, &q);
        for i in 0..q.len() {
            q[i] -= alpha * y[i];
        }
        alphas.push(alpha);
    }
    if let Some((s, y, _)) = memory.back() {
        let gamma = dot(s, y) / dot(y, y);
        for v in q.iter_mut() {
            *v *= gamma;
        }
    }
    for ((s, y, rho), alpha) in memory.iter().zip(alphas.into_iter().rev()) {
        let beta = rho * dot(y, &q);
        for i in 0..q.len() {
            q[i] += (alpha - beta) * s[i];
        }
    }
    for v in q.iter_mut() {
        *v = -*v;
    }
    q
}

/// Minimizes `problem` over the box `[lo, hi]` from `a0` (projected first).
///
/// Projected L-BFGS with Armijo backtracking along projected trial points.
/// Accepted steps strictly decrease the objective, so the returned iterate is
/// never worse than the (projected) starting point. If the line search fails,
/// a shrinking projected-gradient trust step is probed; after 5 consecutive
/// failures the best iterate is returned with `converged = false` unless the
/// stationarity tolerance was already met.
pub fn minimize_box(
    problem: &dyn BoxProblem,
    a0: &[f64],
    lo: &[f64],
    hi: &[f64],
    opts: &SolverOptions,
) -> InnerResult {
    let n = problem.dim();
    assert_eq!(a0.len(), n, "initial point length");
    assert_eq!(lo.len(), n, "lower bound length");
    assert_eq!(hi.len(), n, "upper bound length");

    let mut a = a0.to_vec();
    project(&mut a, lo, hi);
    let mut g = vec![0.0; n];
    let mut f = problem.eval(&a, Some(&mut g));
    let mut func_evals = 1usize;

    let mut best_a = a.clone();
    let mut best_f = f;

    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut fail_count = 0usize;
    let mut resid = stationarity(&a, &g, lo, hi);
    let mut iterations = 0usize;

    if !f.is_finite() {
        return InnerResult {
            a,
            f,
            iterations: 0,
            stationarity: resid,
            converged: false,
            func_evals,
        };
    }

    while iterations < opts.max_inner_iters {
        if resid <= opts.stationarity_tol {
            return InnerResult {
                a,
                f,
                iterations,
                stationarity: resid,
                converged: true,
                func_evals,
            };
        }
        iterations += 1;

        // Freeze variables pinned at a bound with the gradient pushing
        // outward; otherwise their (unusable) gradient components dominate
        // the quasi-Newton direction and the projected line search stalls.
        let mut g_free = g.clone();
        for i in 0..n {
            if (a[i] <= lo[i] && g[i] > 0.0) || (a[i] >= hi[i] && g[i] < 0.0) {
                g_free[i] = 0.0;
            }
        }

        let mut d = lbfgs_direction(&memory, &g_free);
        for i in 0..n {
            if g_free[i] == 0.0 && (a[i] <= lo[i] || a[i] >= hi[i]) {
                d[i] = 0.0;
            }
        }
        let descent = dot(&g_free, &d);
        if !descent.is_finite() || descent > -1e-12 * inf_norm(&g_free) * inf_norm(&d) {
            d = g_free.iter().map(|v| -v).collect();
            memory.clear();
        }

        // Ill-conditioned curvature pairs can blow the direction up by many
        // orders of magnitude; the backtracking range (2^-30) then cannot
        // reach a useful step. Cap the direction at a few box diameters.
        let diam = (0..n).map(|i| hi[i] - lo[i]).fold(0.0f64, f64::max);
        let d_norm = inf_norm(&d);
        if d_norm > 10.0 * diam && diam > 0.0 {
            let scale = 10.0 * diam / d_norm;
            for v in d.iter_mut() {
                *v *= scale;
            }
        }

        // Armijo backtracking on the projected path.
        let mut accepted: Option<(Vec<f64>, f64)> = None;
        let mut alpha = 1.0;
        for _ in 0..opts.max_line_search {
            let mut trial: Vec<f64> = a.iter().zip(&d).map(|(x, dx)| x + alpha * dx).collect();
            project(&mut trial, lo, hi);
            let pred = dot(&g, &trial) - dot(&g, &a);
            if pred >= 0.0 {
                alpha *= 0.5;
                continue;
            }
            let f_trial = problem.eval(&trial, None);
            func_evals += 1;
            if f_trial.is_finite() && f_trial <= f + opts.armijo_c * pred {
                accepted = Some((trial, f_trial));
                break;
            }
            alpha *= 0.5;
        }

        // Shrinking projected-gradient trust step when the search failed.
        if accepted.is_none() {
            fail_count += 1;
            let tau = 10f64.powi(-(fail_count as i32)) / (inf_norm(&g) + 1.0);
            let mut trial: Vec<f64> = a.iter().zip(&g).map(|(x, gx)| x - tau * gx).collect();
            project(&mut trial, lo, hi);
            let f_trial = problem.eval(&trial, None);
            func_evals += 1;
            if f_trial.is_finite() && f_trial < f {
                memory.clear();
                accepted = Some((trial, f_trial));
            } else if fail_count >= 5 {
                break;
            } else {
                continue;
            }
        } else {
            fail_count = 0;
        }

        let (a_new, f_new) = accepted.expect("checked above");
        let mut g_new = vec![0.0; n];
        let f_check = problem.eval(&a_new, Some(&mut g_new));
        func_evals += 1;
        debug_assert_eq!(f_check.to_bits(), f_new.to_bits(), "re-evaluation consistency");

        let s: Vec<f64> = a_new.iter().zip(&a).map(|(x, y)| x - y).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(x, z)| x - z).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * inf_norm(&s) * inf_norm(&y) && sy.is_finite() {
            if memory.len() == opts.lbfgs_memory {
                memory.pop_front();
            }
            memory.push_back((s, y, 1.0 / sy));
        }

        a = a_new;
        f = f_new;
        g = g_new;
        if f < best_f {
            best_f = f;
            best_a = a.clone();
        }
        resid = stationarity(&a, &g, lo, hi);
    }

    // Iteration or failure limit: report the best iterate seen.
    let mut g_best = vec![0.0; n];
    problem.eval(&best_a, Some(&mut g_best));
    func_evals += 1;
    let resid_best = stationarity(&best_a, &g_best, lo, hi);
    InnerResult {
        a: best_a,
        f: best_f,
        iterations,
        stationarity: resid_best,
        converged: resid_best <= opts.stationarity_tol,
        func_evals,
    }
}

struct OcpBoxProblem<'a> {
    program: &'a RolloutProgram<'a>,
    al: Option<AlState>,
}

impl BoxProblem for OcpBoxProblem<'_> {
    fn dim(&self) -> usize {
        self.program.dim()
    }

    fn eval(&self, a: &[f64], grad: Option<&mut [f64]>) -> f64 {
        match grad {
            Some(g) => self.program.eval_grad(a, self.al.as_ref(), g).augmented,
            None => self.program.eval_value(a, self.al.as_ref()).augmented,
        }
    }
}

/// Solves one OCP instance from a warm-start increment sequence.
///
/// Without a terminal region this is a single projected quasi-Newton descent
/// of the (soft-clamped) objective. With a region, an outer augmented-
/// Lagrangian loop updates multipliers and grows the penalty until the
/// relative violation falls below `opts.terminal_tol` or the outer budget is
/// exhausted (`terminal-infeasible`). The returned inputs are always the
/// hard-clamped realization of the final increments.
pub fn solve_ocp(spec: &OcpSpec<'_>, guess: &[[f64; 3]], opts: &SolverOptions) -> Result<NlpSolution> {
    spec.validate()?;
    if guess.len() != spec.horizon {
        return Err(CoreError::InvalidArgument(format!(
            "warm start has {} steps, horizon is {}",
            guess.len(),
            spec.horizon
        )));
    }
    if guess.iter().flatten().any(|v| !(-1.0..=1.0).contains(v)) {
        return Err(CoreError::InvalidArgument(
            "warm-start increments must lie in [-1, 1]".into(),
        ));
    }

    let program = RolloutProgram::new(spec, opts.kappa, opts.hinge_sharpness);
    let n = program.dim();
    let flat: Vec<f64> = guess.iter().flatten().copied().collect();

    if n == 0 {
        let out = program.eval_value(&flat, None);
        return Ok(NlpSolution {
            increments: Vec::new(),
            inputs: Vec::new(),
            states: Vec::new(),
            objective: out.base,
            surrogate_objective: out.base,
            status: SolveStatus::Converged,
            iterations: 0,
            stationarity: 0.0,
            terminal_violation: 0.0,
        });
    }

    let lo = vec![-1.0; n];
    let hi = vec![1.0; n];

    let (a, status, iterations, stat_resid, violation) = match spec.terminal_region {
        None => {
            let problem = OcpBoxProblem {
                program: &program,
                al: None,
            };
            let inner = minimize_box(&problem, &flat, &lo, &hi, opts);
            let status = if inner.converged {
                SolveStatus::Converged
            } else {
                SolveStatus::IterationLimit
            };
            (inner.a, status, inner.iterations, inner.stationarity, 0.0)
        }
        Some(region) => {
            let mut al = AlState::new(opts.init_penalty);
            let mut a = flat.clone();
            let mut total_iters = 0usize;
            let mut prev_viol = f64::INFINITY;
            let mut last_inner_converged = false;
            let mut last_stat = f64::INFINITY;
            let mut viol = f64::INFINITY;

            for _outer in 0..opts.max_outer_iters {
                let problem = OcpBoxProblem {
                    program: &program,
                    al: Some(al),
                };
                let inner = minimize_box(&problem, &a, &lo, &hi, opts);
                a = inner.a;
                total_iters += inner.iterations;
                last_inner_converged = inner.converged;
                last_stat = inner.stationarity;

                let out = program.eval_value(&a, None);
                viol = region.max_relative_violation(&out.terminal_state);
                if inner.converged && viol <= opts.terminal_tol {
                    break;
                }

                // First-order multiplier update in the same relative scaling
                // as the violation measure.
                let (rlo, rhi) = region.bounds();
                for i in 0..4 {
                    let s = region.scale(i);
                    let g_lo = (rlo[i] - out.terminal_state[i]) / s;
                    let g_hi = (out.terminal_state[i] - rhi[i]) / s;
                    al.mu_lo[i] = (al.mu_lo[i] + al.rho * g_lo).max(0.0);
                    al.mu_hi[i] = (al.mu_hi[i] + al.rho * g_hi).max(0.0);
                }
                if viol > 0.25 * prev_viol && al.rho < 1e12 {
                    al.rho *= opts.penalty_growth;
                }
                prev_viol = viol;
            }

            let status = if last_inner_converged && viol <= opts.terminal_tol {
                SolveStatus::Converged
            } else if viol > opts.terminal_tol {
                SolveStatus::TerminalInfeasible
            } else {
                SolveStatus::IterationLimit
            };
            (a, status, total_iters, last_stat, viol)
        }
    };

    let out = program.eval_value(&a, None);
    let (inputs, states, hard_objective) = program.reconstruct(&a);
    let increments: Vec<[f64; 3]> = a.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();

    Ok(NlpSolution {
        increments,
        inputs,
        states,
        objective: hard_objective,
        surrogate_objective: out.base,
        status,
        iterations,
        stationarity: stat_resid,
        terminal_violation: violation,
    })
}
