//! Economic stage costs, constraint penalties, and the economic performance
//! index (EPI).
//!
//! Costs are attached to transitions: the cost of step `k` combines the
//! inputs applied over `[k, k+1)` with the dry-weight change and the
//! constraint violation of the successor state `x(k+1)`.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::plant::{output_map_generic, BoundTable, ControlInput, State};
use crate::scalar::Scalar;

/// Resource prices, yield price, and penalty weights.
///
/// `c_co2` multiplies u1 [mg/(m^2 s)] and `c_heat` multiplies u3 [W/m^2],
/// each integrated over the step; `r_yield` prices the dry-weight increment
/// [kg/m^2]. Any unit rescaling happens where the table is built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceTable {
    pub c_co2: f64,
    pub c_heat: f64,
    pub r_yield: f64,
    pub lambda_co2: f64,
    pub lambda_temp: f64,
    pub lambda_humidity: f64,
}

impl Default for PriceTable {
    fn default() -> Self {
        PriceTable {
            c_co2: 1.906e-1,
            c_heat: 1.281e-1,
            r_yield: 20.93,
            lambda_co2: 5e-5,
            lambda_temp: 5e-3,
            lambda_humidity: 7e-4,
        }
    }
}

/// Cost of one transition, split into its economic and penalty parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionCost {
    pub economic: f64,
    pub penalty: f64,
}

impl TransitionCost {
    pub fn total(&self) -> f64 {
        self.economic + self.penalty
    }

    /// Reward is the negated total cost.
    pub fn reward(&self) -> f64 {
        -self.total()
    }
}

/// Economic stage cost of one transition:
/// `-r (x1' - x1) + (c_co2 u1 + c_heat u3) dt`.
#[inline]
pub fn stage_cost_economic_generic<S: Scalar>(
    x1_prev: S,
    x1_next: S,
    u: &[S; 3],
    prices: &PriceTable,
    dt: f64,
) -> S {
    let energy = (u[0] * prices.c_co2 + u[2] * prices.c_heat) * dt;
    -(x1_next - x1_prev) * prices.r_yield + energy
}

/// Soft-constraint penalty of one output vector: piecewise-linear violation
/// of each bound, weighted per output channel.
#[inline]
pub fn penalty_generic<S: Scalar>(y: &[S; 4], bounds: &BoundTable, prices: &PriceTable) -> S {
    let co2 = ((y[1].rsub(bounds.co2_min_ppm)).relu() + (y[1] - bounds.co2_max_ppm).relu())
        * prices.lambda_co2;
    let temp =
        ((y[2].rsub(bounds.temp_min)).relu() + (y[2] - bounds.temp_max).relu()) * prices.lambda_temp;
    let hum = (y[3] - bounds.humidity_max_pct).relu() * prices.lambda_humidity;
    co2 + temp + hum
}

/// `(1/beta) softplus(beta t)`: approaches `max(0, t)` from above with a gap
/// of at most `ln(2) / beta`, largest at `t = 0`.
#[inline]
fn smooth_hinge<S: Scalar>(t: S, beta: f64) -> S {
    let ts = t * beta;
    let pos = ts.relu();
    let mag = pos + (-ts).relu();
    (pos + ((-mag).exp() + 1.0).ln()) * (1.0 / beta)
}

/// Smoothed variant of [`penalty_generic`] for gradient-based solvers: each
/// weighted hinge is replaced by a softplus with sharpness `beta` in cost
/// units, so the result is infinitely differentiable and exceeds the exact
/// penalty by at most `5 ln(2) / beta` (five hinge terms).
#[inline]
pub fn penalty_smoothed_generic<S: Scalar>(
    y: &[S; 4],
    bounds: &BoundTable,
    prices: &PriceTable,
    beta: f64,
) -> S {
    let co2 = smooth_hinge(y[1].rsub(bounds.co2_min_ppm) * prices.lambda_co2, beta)
        + smooth_hinge((y[1] - bounds.co2_max_ppm) * prices.lambda_co2, beta);
    let temp = smooth_hinge(y[2].rsub(bounds.temp_min) * prices.lambda_temp, beta)
        + smooth_hinge((y[2] - bounds.temp_max) * prices.lambda_temp, beta);
    let hum = smooth_hinge((y[3] - bounds.humidity_max_pct) * prices.lambda_humidity, beta);
    co2 + temp + hum
}

/// Penalty contribution of a single output component (0-based index into
/// `(y1, y2, y3, y4)`); y1 is unconstrained.
pub fn penalty_component(i: usize, y_i: f64, bounds: &BoundTable, prices: &PriceTable) -> f64 {
    match i {
        0 => 0.0,
        1 => {
            prices.lambda_co2
                * ((bounds.co2_min_ppm - y_i).max(0.0) + (y_i - bounds.co2_max_ppm).max(0.0))
        }
        2 => {
            prices.lambda_temp
                * ((bounds.temp_min - y_i).max(0.0) + (y_i - bounds.temp_max).max(0.0))
        }
        3 => prices.lambda_humidity * (y_i - bounds.humidity_max_pct).max(0.0),
        _ => panic!("output index {i} out of range"),
    }
}

/// Full stage cost of the transition `x -> x_next` under input `u`, with the
/// penalty evaluated on the successor state's output.
pub fn stage_cost_total(
    x: &State,
    u: &ControlInput,
    x_next: &State,
    bounds: &BoundTable,
    prices: &PriceTable,
    dt: f64,
) -> TransitionCost {
    let economic = stage_cost_economic_generic(
        x.dry_weight,
        x_next.dry_weight,
        &u.as_array(),
        prices,
        dt,
    );
    let y = output_map_generic(&x_next.as_array());
    let penalty = penalty_generic(&y, bounds, prices);
    TransitionCost { economic, penalty }
}

/// Economic performance index of a trajectory:
/// `r x1(N) - sum_k (c_co2 u1(k) + c_heat u3(k)) dt`.
///
/// Requires `states.len() == inputs.len() + 1` (states include both
/// endpoints). Satisfies the telescoping identity
/// `sum_k stage_cost_economic(k) + EPI = r x1(0)`.
pub fn epi(states: &[State], inputs: &[ControlInput], prices: &PriceTable, dt: f64) -> Result<f64> {
    if states.len() != inputs.len() + 1 {
        return Err(CoreError::Shape(format!(
            "epi needs states.len() == inputs.len() + 1, got {} and {}",
            states.len(),
            inputs.len()
        )));
    }
    let final_value = prices.r_yield * states[states.len() - 1].dry_weight;
    let spend: f64 = inputs
        .iter()
        .map(|u| (prices.c_co2 * u.co2_injection + prices.c_heat * u.heating) * dt)
        .sum();
    Ok(final_value - spend)
}
