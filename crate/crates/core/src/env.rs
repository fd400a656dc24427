//! Closed-loop simulation environment: the true plant (nominal or perturbed
//! parameters), exact weather, and cost scoring against nominal bounds.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::economics::{stage_cost_total, PriceTable, TransitionCost};
use crate::error::{CoreError, Result};
use crate::plant::model::{discrete_step, output_map, DT};
use crate::plant::{
    initial_input, initial_state, sample_parameters, BoundTable, ControlInput, Disturbance,
    DisturbanceSeries, Output, ParameterVector, State,
};

/// Recipe for instantiating environments: nominal parameters plus an optional
/// uncertainty level. Controllers always predict with `nominal`; only the
/// instantiated plant uses a perturbed draw.
#[derive(Clone)]
pub struct EnvTemplate {
    pub nominal: ParameterVector,
    pub weather: Arc<DisturbanceSeries>,
    pub prices: PriceTable,
    pub bounds: BoundTable,
    pub t_f: usize,
    /// `None` = deterministic environment; `Some(delta)` = parametric
    /// uncertainty, componentwise uniform in `[p(1-delta), p(1+delta)]`.
    pub uncertainty: Option<f64>,
}

impl EnvTemplate {
    /// Builds one environment. For a stochastic template, `draw_seed` selects
    /// the parameter realization; a deterministic template ignores it.
    pub fn instantiate(&self, draw_seed: Option<u64>) -> Result<GreenhouseEnv> {
        let params = match (self.uncertainty, draw_seed) {
            (Some(delta), Some(seed)) => {
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                sample_parameters(&self.nominal, delta, &mut rng)
            }
            (Some(_), None) => {
                return Err(CoreError::InvalidArgument(
                    "stochastic template needs a draw seed".into(),
                ))
            }
            (None, _) => self.nominal,
        };
        GreenhouseEnv::new(
            params,
            Arc::clone(&self.weather),
            self.prices,
            self.bounds,
            self.t_f,
        )
    }
}

/// One plant instance with its weather, scoring prices, and scoring bounds.
pub struct GreenhouseEnv {
    params: ParameterVector,
    weather: Arc<DisturbanceSeries>,
    prices: PriceTable,
    bounds: BoundTable,
    t_f: usize,
}

impl GreenhouseEnv {
    /// Requires weather coverage for `t_f` transitions plus the terminal
    /// observation, i.e. at least `t_f + 1` records.
    pub fn new(
        params: ParameterVector,
        weather: Arc<DisturbanceSeries>,
        prices: PriceTable,
        bounds: BoundTable,
        t_f: usize,
    ) -> Result<Self> {
        weather.require_len(t_f + 1)?;
        Ok(GreenhouseEnv {
            params,
            weather,
            prices,
            bounds,
            t_f,
        })
    }

    pub fn t_f(&self) -> usize {
        self.t_f
    }

    pub fn dt(&self) -> f64 {
        DT
    }

    pub fn params(&self) -> &ParameterVector {
        &self.params
    }

    pub fn weather(&self) -> &Arc<DisturbanceSeries> {
        &self.weather
    }

    pub fn prices(&self) -> &PriceTable {
        &self.prices
    }

    pub fn bounds(&self) -> &BoundTable {
        &self.bounds
    }

    pub fn disturbance(&self, k: usize) -> &Disturbance {
        self.weather.get(k)
    }

    pub fn initial_state(&self) -> State {
        initial_state()
    }

    pub fn initial_input(&self) -> ControlInput {
        initial_input()
    }

    /// Advances the true plant one step and scores the transition.
    pub fn step(
        &self,
        x: &State,
        u: &ControlInput,
        k: usize,
    ) -> Result<(State, Output, TransitionCost)> {
        let d = self.weather.get(k).as_array();
        let next = discrete_step(&x.as_array(), &u.as_array(), &d, &self.params);
        for (i, v) in next.iter().enumerate() {
            if !v.is_finite() {
                return Err(CoreError::NonFinite {
                    context: "plant step",
                    component: i,
                });
            }
        }
        let x_next = State::from_array(next);
        let y_next = output_map(&x_next)?;
        let cost = stage_cost_total(x, u, &x_next, &self.bounds, &self.prices, DT);
        Ok((x_next, y_next, cost))
    }
}
