//! Stage costs, penalties, and the economic performance index, checked
//! against hand-evaluated values and the telescoping identity on simulated
//! episodes.

use std::sync::Arc;

use approx::assert_relative_eq;
use greenhouse_core::env::GreenhouseEnv;
use greenhouse_core::economics::{
    epi, penalty_component, penalty_generic, penalty_smoothed_generic,
    stage_cost_economic_generic, stage_cost_total, PriceTable,
};
use greenhouse_core::error::CoreError;
use greenhouse_core::plant::{
    initial_state, synthesize_weather, BoundTable, ControlInput, ParameterVector, State,
    SynthWeatherConfig, DT, T_F,
};
use proptest::prelude::*;

/// Table prices converted to EUR per SI resource unit: CO2 is priced per kg
/// but injected in mg/(m^2 s), heat is priced per kWh but applied in W/m^2.
fn euro_prices() -> PriceTable {
    let base = PriceTable::default();
    PriceTable {
        c_co2: base.c_co2 * 1e-6,
        c_heat: base.c_heat / 3.6e6,
        ..base
    }
}

#[test]
fn stage_cost_matches_hand_evaluated_resource_spend() {
    let prices = PriceTable::default();
    // Max CO2 injection and heating, no growth over the step:
    // (0.1906 * 1.2 + 0.1281 * 150) * 1800.
    let u = [1.2, 0.0, 150.0];
    let cost = stage_cost_economic_generic(0.01, 0.01, &u, &prices, DT);
    assert_relative_eq!(cost, 34998.696, max_relative = 1e-12);
}

#[test]
fn stage_cost_credits_dry_weight_gain() {
    let prices = PriceTable::default();
    let u = [0.0, 3.0, 0.0]; // ventilation is free
    let cost = stage_cost_economic_generic(0.0035, 0.0045, &u, &prices, DT);
    assert_relative_eq!(cost, -20.93 * 0.001, max_relative = 1e-12);
}

#[test]
fn penalty_prices_temperature_excess() {
    // 22 degC against a 20 degC ceiling: 2 * 5e-3.
    let y = [0.005, 800.0, 22.0, 60.0];
    let p = penalty_generic(&y, &BoundTable::default(), &PriceTable::default());
    assert_relative_eq!(p, 1.0e-2, max_relative = 1e-12);
}

#[test]
fn penalty_prices_co2_shortfall() {
    // 400 ppm against a 500 ppm floor: 100 * 5e-5.
    let y = [0.005, 400.0, 15.0, 60.0];
    let p = penalty_generic(&y, &BoundTable::default(), &PriceTable::default());
    assert_relative_eq!(p, 5.0e-3, max_relative = 1e-12);
}

#[test]
fn penalty_prices_humidity_excess() {
    // 90% RH against an 80% ceiling: 10 * 7e-4.
    let y = [0.005, 800.0, 15.0, 90.0];
    let p = penalty_generic(&y, &BoundTable::default(), &PriceTable::default());
    assert_relative_eq!(p, 7.0e-3, max_relative = 1e-12);
}

#[test]
fn penalty_ignores_dry_weight_channel() {
    let bounds = BoundTable::default();
    let prices = PriceTable::default();
    for y1 in [0.0, 0.0035, 5.0, 1e6] {
        let y = [y1, 800.0, 15.0, 60.0];
        assert_eq!(penalty_generic(&y, &bounds, &prices), 0.0);
    }
}

proptest! {
    #[test]
    fn penalty_zero_inside_comfort_box(
        y1 in 0.0..1.0f64,
        y2 in 500.0..1600.0f64,
        y3 in 10.0..20.0f64,
        y4 in 0.0..80.0f64,
    ) {
        let p = penalty_generic(&[y1, y2, y3, y4], &BoundTable::default(), &PriceTable::default());
        prop_assert_eq!(p, 0.0);
    }

    #[test]
    fn penalty_components_sum_to_total(
        y1 in 0.0..1.0f64,
        y2 in 0.0..3000.0f64,
        y3 in -5.0..40.0f64,
        y4 in 0.0..120.0f64,
    ) {
        let bounds = BoundTable::default();
        let prices = PriceTable::default();
        let y = [y1, y2, y3, y4];
        let total = penalty_generic(&y, &bounds, &prices);
        let mut sum = 0.0;
        for (i, &yi) in y.iter().enumerate() {
            sum += penalty_component(i, yi, &bounds, &prices);
        }
        prop_assert_eq!(total, sum);
    }

    #[test]
    fn penalty_grows_with_violation(
        excess in 0.0..15.0f64,
        more in 0.01..10.0f64,
    ) {
        let bounds = BoundTable::default();
        let prices = PriceTable::default();
        let lo = penalty_generic(&[0.0, 800.0, 20.0 + excess, 60.0], &bounds, &prices);
        let hi = penalty_generic(&[0.0, 800.0, 20.0 + excess + more, 60.0], &bounds, &prices);
        prop_assert!(hi > lo);
    }

    // The solver-facing smoothed penalty upper-bounds the exact one by at
    // most ln(2)/beta per hinge (five hinges across the three channels).
    #[test]
    fn smoothed_penalty_tracks_exact_hinges(
        y1 in 0.0..1.0f64,
        y2 in 0.0..3000.0f64,
        y3 in -5.0..40.0f64,
        y4 in 0.0..120.0f64,
        log_beta in 3.0..8.0f64,
    ) {
        let bounds = BoundTable::default();
        let prices = PriceTable::default();
        let beta = 10f64.powf(log_beta);
        let y = [y1, y2, y3, y4];
        let exact = penalty_generic(&y, &bounds, &prices);
        let smooth = penalty_smoothed_generic(&y, &bounds, &prices, beta);
        // >= up to roundoff of the scale/unscale by beta.
        prop_assert!(smooth >= exact - 1e-12 * (1.0 + exact.abs()));
        prop_assert!(smooth - exact <= 5.0 * std::f64::consts::LN_2 / beta + 1e-15);
    }
}

#[test]
fn epi_requires_endpoint_states() {
    let prices = PriceTable::default();
    let states = vec![State::from_array([0.0035, 1e-3, 15.0, 8e-3]); 5];
    let inputs = vec![ControlInput::from_array([0.0, 0.0, 0.0]); 5];
    match epi(&states, &inputs, &prices, DT) {
        Err(CoreError::Shape(_)) => {}
        other => panic!("expected shape error, got {other:?}"),
    }
}

#[test]
fn epi_of_zero_input_episode_is_final_revenue() {
    let prices = PriceTable::default();
    let mut states = vec![State::from_array([0.0035, 1e-3, 15.0, 8e-3]); 11];
    states[10].dry_weight = 0.12;
    let inputs = vec![ControlInput::from_array([0.0, 0.0, 0.0]); 10];
    let value = epi(&states, &inputs, &prices, DT).unwrap();
    assert_eq!(value, 20.93 * 0.12);
}

#[test]
fn epi_zero_growth_closed_form() {
    // Constant full heating with no growth and no CO2 spend: the index is the
    // pure heating bill -0.1281 * 150 * 1800 * 1920.
    let prices = PriceTable::default();
    let zero = State::from_array([0.0, 1e-3, 15.0, 8e-3]);
    let states = vec![zero; T_F + 1];
    let inputs = vec![ControlInput::from_array([0.0, 0.0, 150.0]); T_F];
    let value = epi(&states, &inputs, &prices, DT).unwrap();
    let expected = -0.1281 * 150.0 * 1800.0 * 1920.0;
    assert_relative_eq!(value, expected, max_relative = 1e-12);
}

/// Deterministic in-bounds input pattern exercising all three actuators.
fn patterned_input(k: usize) -> ControlInput {
    let t = k as f64;
    let u1 = (0.6 + 0.6 * (2.0 * std::f64::consts::PI * t / 48.0).sin()).max(0.0);
    let u2 = 2.0 + 1.5 * (2.0 * std::f64::consts::PI * t / 96.0 + 1.0).cos();
    let u3 = 75.0 + 75.0 * (2.0 * std::f64::consts::PI * t / 48.0 + 2.0).sin();
    ControlInput::from_array([u1.min(1.2), u2.clamp(0.0, 7.5), u3.clamp(0.0, 150.0)])
}

fn simulate_episode(prices: PriceTable) -> (Vec<State>, Vec<ControlInput>, Vec<f64>, Vec<f64>) {
    let weather = synthesize_weather(42, T_F + 1, &SynthWeatherConfig::default());
    let env = GreenhouseEnv::new(
        ParameterVector::nominal(),
        Arc::new(weather),
        prices,
        BoundTable::default(),
        T_F,
    )
    .unwrap();
    let mut states = Vec::with_capacity(T_F + 1);
    let mut inputs = Vec::with_capacity(T_F);
    let mut econ = Vec::with_capacity(T_F);
    let mut totals = Vec::with_capacity(T_F);
    let mut x = initial_state();
    states.push(x);
    for k in 0..T_F {
        let u = patterned_input(k);
        let (x_next, _y, cost) = env.step(&x, &u, k).unwrap();
        inputs.push(u);
        econ.push(cost.economic);
        totals.push(cost.total());
        states.push(x_next);
        x = x_next;
    }
    (states, inputs, econ, totals)
}

#[test]
fn stage_cost_series_telescopes_to_epi() {
    // Full season in EUR units: sum of economic stage costs equals
    // r*x1(0) - EPI to 1e-9 absolute.
    let prices = euro_prices();
    let (states, inputs, econ, _) = simulate_episode(prices);
    let index = epi(&states, &inputs, &prices, DT).unwrap();
    let stage_sum: f64 = econ.iter().sum();
    let identity = prices.r_yield * states[0].dry_weight - index;
    assert!(
        (stage_sum - identity).abs() <= 1e-9,
        "telescoping residual {:e}",
        (stage_sum - identity).abs()
    );
    // The pattern grows the crop, so the season is profitable in EUR terms.
    assert!(states[T_F].dry_weight > states[0].dry_weight);
}

#[test]
fn telescoping_holds_under_unscaled_table_prices() {
    // With the raw table prices the sums reach ~1e8, so the bound is relative
    // to the accumulated magnitude rather than the fixed 1e-9.
    let prices = PriceTable::default();
    let (states, inputs, econ, _) = simulate_episode(prices);
    let index = epi(&states, &inputs, &prices, DT).unwrap();
    let stage_sum: f64 = econ.iter().sum();
    let identity = prices.r_yield * states[0].dry_weight - index;
    let scale: f64 = econ.iter().map(|c| c.abs()).sum();
    assert!(
        (stage_sum - identity).abs() <= 1e-12 * scale,
        "telescoping residual {:e} vs scale {:e}",
        (stage_sum - identity).abs(),
        scale
    );
}

#[test]
fn cumulative_reward_is_negated_total_cost() {
    let (_, _, _, totals) = simulate_episode(euro_prices());
    let reward_sum: f64 = totals.iter().map(|c| -c).sum();
    let cost_sum: f64 = totals.iter().sum();
    assert_eq!(reward_sum, -cost_sum);
}

#[test]
fn transition_cost_splits_economic_and_penalty() {
    let bounds = BoundTable::default();
    let prices = PriceTable::default();
    let x = State::from_array([0.01, 1.2e-3, 16.0, 8e-3]);
    // Successor chosen so the output violates the temperature ceiling.
    let x_next = State::from_array([0.0102, 1.2e-3, 22.0, 8e-3]);
    let u = ControlInput::from_array([0.5, 1.0, 80.0]);
    let cost = stage_cost_total(&x, &u, &x_next, &bounds, &prices, DT);
    let econ = stage_cost_economic_generic(0.01, 0.0102, &u.as_array(), &prices, DT);
    assert_eq!(cost.economic, econ);
    assert!(cost.penalty > 0.0, "temperature excess must be penalised");
    assert_eq!(cost.total(), cost.economic + cost.penalty);
    assert_eq!(cost.reward(), -cost.total());
}
