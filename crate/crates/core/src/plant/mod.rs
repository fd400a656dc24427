//! Greenhouse plant: state/input/disturbance types, continuous-time dynamics,
//! RK4 discretization, output conversions, parameters, and weather supply.

pub mod model;
pub mod params;
pub mod weather;

pub use model::{
    co2_density_to_ppm, discrete_step, ode_rhs, output_map, output_map_generic,
    ppm_to_co2_density, relative_humidity_pct, rh_pct_to_humidity_density, rk4_generic, rk4_step,
    saturation_density, DT, SUBSTEPS, T_F,
};
pub use params::{sample_parameters, ParameterVector, N_PARAMS, PARAM_TABLE};
pub use weather::{
    load_weather, synthesize_weather, DisturbanceSeries, SynthWeatherConfig, STEPS_PER_DAY,
};

use serde::{Deserialize, Serialize};

/// Plant state: crop dry weight and indoor climate, in model units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    /// x1: lettuce dry weight [kg/m^2].
    pub dry_weight: f64,
    /// x2: indoor CO2 density [kg/m^3].
    pub co2: f64,
    /// x3: indoor air temperature [degC].
    pub temperature: f64,
    /// x4: indoor humidity density [kg/m^3].
    pub humidity: f64,
}

impl State {
    pub fn from_array(x: [f64; 4]) -> Self {
        State {
            dry_weight: x[0],
            co2: x[1],
            temperature: x[2],
            humidity: x[3],
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.dry_weight, self.co2, self.temperature, self.humidity]
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }
}

/// Control input, in actuator units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    /// u1: CO2 injection [mg/(m^2 s)].
    pub co2_injection: f64,
    /// u2: ventilation [mm/s].
    pub ventilation: f64,
    /// u3: heating [W/m^2].
    pub heating: f64,
}

impl ControlInput {
    pub fn from_array(u: [f64; 3]) -> Self {
        ControlInput {
            co2_injection: u[0],
            ventilation: u[1],
            heating: u[2],
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.co2_injection, self.ventilation, self.heating]
    }
}

/// Exogenous weather disturbance at one sample instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disturbance {
    /// d1: incoming solar radiation [W/m^2].
    pub radiation: f64,
    /// d2: outdoor CO2 density [kg/m^3].
    pub co2_out: f64,
    /// d3: outdoor temperature [degC].
    pub temp_out: f64,
    /// d4: outdoor humidity density [kg/m^3].
    pub humidity_out: f64,
}

impl Disturbance {
    pub fn from_array(d: [f64; 4]) -> Self {
        Disturbance {
            radiation: d[0],
            co2_out: d[1],
            temp_out: d[2],
            humidity_out: d[3],
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.radiation, self.co2_out, self.temp_out, self.humidity_out]
    }
}

/// Measured output: dry weight plus indoor climate in constraint units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Output {
    /// y1: lettuce dry weight [kg/m^2].
    pub dry_weight: f64,
    /// y2: indoor CO2 concentration [ppm].
    pub co2_ppm: f64,
    /// y3: indoor air temperature [degC].
    pub temperature: f64,
    /// y4: indoor relative humidity [%].
    pub humidity_pct: f64,
}

impl Output {
    pub fn as_array(&self) -> [f64; 4] {
        [
            self.dry_weight,
            self.co2_ppm,
            self.temperature,
            self.humidity_pct,
        ]
    }
}

/// Input box bounds, rate limits, and output constraint bounds.
///
/// Output bounds are one-sided or two-sided per component: y1 is
/// unconstrained, y2 and y3 have min/max, y4 has a max only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundTable {
    pub u_min: [f64; 3],
    pub u_max: [f64; 3],
    /// Per-step input rate limit, `u_max / 10` by default.
    pub du_max: [f64; 3],
    pub co2_min_ppm: f64,
    pub co2_max_ppm: f64,
    pub temp_min: f64,
    pub temp_max: f64,
    pub humidity_max_pct: f64,
}

impl Default for BoundTable {
    fn default() -> Self {
        let u_max = [1.2, 7.5, 150.0];
        BoundTable {
            u_min: [0.0, 0.0, 0.0],
            u_max,
            du_max: [u_max[0] / 10.0, u_max[1] / 10.0, u_max[2] / 10.0],
            co2_min_ppm: 500.0,
            co2_max_ppm: 1600.0,
            temp_min: 10.0,
            temp_max: 20.0,
            humidity_max_pct: 80.0,
        }
    }
}

impl BoundTable {
    /// Same bounds with a tightened humidity ceiling (controller-side
    /// back-off for runs under parametric uncertainty).
    pub fn with_humidity_max(mut self, pct: f64) -> Self {
        self.humidity_max_pct = pct;
        self
    }
}

/// Initial state x(0) = (0.0035, 0.001, 15, 0.008).
pub fn initial_state() -> State {
    State {
        dry_weight: 0.0035,
        co2: 0.001,
        temperature: 15.0,
        humidity: 0.008,
    }
}

/// Initial (pre-episode) input u(0) = (0, 0, 50).
pub fn initial_input() -> ControlInput {
    ControlInput {
        co2_injection: 0.0,
        ventilation: 0.0,
        heating: 50.0,
    }
}
