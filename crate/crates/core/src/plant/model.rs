//! Continuous-time lettuce-greenhouse dynamics, RK4 discretization, and
//! output conversions.
//!
//! Everything numeric is generic over [`Scalar`] so the same code is run by
//! the simulator (`f64`) and differentiated by the optimizer tape.

use crate::error::{CoreError, Result};
use crate::plant::params::ParameterVector;
use crate::plant::{Output, State};
use crate::scalar::Scalar;

/// Sampling period of the discretized plant [s].
pub const DT: f64 = 1800.0;

/// Episode length in steps (40 days at 30 minutes per step).
pub const T_F: usize = 1920;

const LN2: f64 = std::f64::consts::LN_2;

/// Molar mass of CO2 [kg/kmol], used only by the ppm conversion.
const M_CO2: f64 = 44.01;

/// Standard atmospheric pressure [Pa], used only by the ppm conversion.
const P_ATM: f64 = 101325.0;

/// Fixed physical constants of the conversion formulas (`c_sat_1`, `c_R`,
/// `c_T0`, `c_sat_2`, `c_sat_3`). Output conversions are measurement physics
/// and deliberately do not follow the sampled parameter vector.
const C_SAT_1: f64 = 9348.0;
const C_R: f64 = 8314.0;
const C_T0: f64 = 273.15;
const C_SAT_2: f64 = 17.4;
const C_SAT_3: f64 = 239.0;

/// Saturation water-vapor density at temperature `t` [degC] -> [kg/m^3].
#[inline]
pub fn saturation_density<S: Scalar>(t: S) -> S {
    let expo = (t * C_SAT_2 / (t + C_SAT_3)).exp();
    expo * (C_SAT_1 / C_R) / (t + C_T0)
}

/// CO2 density [kg/m^3] -> concentration [ppm] at temperature `t` [degC].
#[inline]
pub fn co2_density_to_ppm<S: Scalar>(rho: S, t: S) -> S {
    rho * ((t + C_T0) * (C_R / (M_CO2 * P_ATM) * 1e6))
}

/// Concentration [ppm] -> CO2 density [kg/m^3] at temperature `t` [degC].
#[inline]
pub fn ppm_to_co2_density(ppm: f64, t: f64) -> f64 {
    ppm / ((t + C_T0) * (C_R / (M_CO2 * P_ATM) * 1e6))
}

/// Humidity density [kg/m^3] -> relative humidity [%] at `t` [degC].
#[inline]
pub fn relative_humidity_pct<S: Scalar>(rho: S, t: S) -> S {
    rho / saturation_density(t) * 100.0
}

/// Relative humidity [%] -> humidity density [kg/m^3] at `t` [degC].
#[inline]
pub fn rh_pct_to_humidity_density(pct: f64, t: f64) -> f64 {
    pct / 100.0 * saturation_density(t)
}

/// Right-hand side of the continuous-time model, `dx/dt = f(x, u, d; p)`.
///
/// States: x1 dry weight [kg/m^2], x2 CO2 density [kg/m^3], x3 temperature
/// [degC], x4 humidity density [kg/m^3]. Inputs: u1 CO2 injection
/// [mg/(m^2 s)], u2 ventilation [mm/s], u3 heating [W/m^2].
pub fn ode_rhs<S: Scalar>(x: &[S; 4], u: &[S; 3], d: &[f64; 4], p: &ParameterVector) -> [S; 4] {
    let (x1, x2, x3, x4) = (x[0], x[1], x[2], x[3]);
    let (u1, u2, u3) = (u[0], u[1], u[2]);

    // Canopy light interception, 1 - exp(-c_pl_d x1).
    let canopy = (-x1 * p.get(9)).exp().rsub(1.0);

    // Temperature response of photosynthesis (positive roughly on 3..42 degC).
    let lphot = -(x3.powi(2)) * p.get(11) + x3 * p.get(12) - p.get(13);

    // Gross canopy photosynthesis: saturating combination of light-limited
    // (c_eps d1) and CO2-limited (lphot (x2 - c_gamma)) rates.
    let light = p.get(10) * d[0];
    let co2_lim = lphot * (x2 - p.get(14));
    let phot = canopy * (co2_lim * light) / (co2_lim + light);

    // Maintenance respiration with Q10 temperature scaling, x1 2^((x3-25)/10).
    let resp = x1 * ((x3 * 0.1 - 2.5) * LN2).exp();

    // Total ventilation exchange rate [m/s]: controlled (u2 in mm/s) + leakage.
    let vent = u2 * 1e-3 + p.get(15);

    // Canopy transpiration into the air volume.
    let transp = canopy * (saturation_density(x3) - x4) * p.get(16);

    let dx1 = phot * p.get(0) - resp * p.get(1);
    let dx2 = (-phot + resp * p.get(3) + u1 * 1e-6 - vent * (x2 - d[1])) * (1.0 / p.get(2));
    let dx3 = (u3 - (u2 * (p.get(5) * 1e-3) + p.get(6)) * (x3 - d[2]) + d[0] * p.get(7))
        * (1.0 / p.get(4));
    let dx4 = (transp - vent * (x4 - d[3])) * (1.0 / p.get(8));

    [dx1, dx2, dx3, dx4]
}

/// Classical four-stage Runge-Kutta step over an arbitrary right-hand side.
pub fn rk4_generic<S: Scalar, F: Fn(&[S; 4]) -> [S; 4]>(f: F, x: &[S; 4], dt: f64) -> [S; 4] {
    let k1 = f(x);
    let x2 = add_scaled(x, &k1, dt / 2.0);
    let k2 = f(&x2);
    let x3 = add_scaled(x, &k2, dt / 2.0);
    let k3 = f(&x3);
    let x4 = add_scaled(x, &k3, dt);
    let k4 = f(&x4);

    let mut out = *x;
    for i in 0..4 {
        out[i] = out[i] + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0);
    }
    out
}

/// One RK4 step of the greenhouse dynamics with input and disturbance held
/// constant over the step.
pub fn rk4_step<S: Scalar>(
    x: &[S; 4],
    u: &[S; 3],
    d: &[f64; 4],
    p: &ParameterVector,
    dt: f64,
) -> [S; 4] {
    rk4_generic(|xs| ode_rhs(xs, u, d, p), x, dt)
}

/// RK4 sub-steps per sample period. A single 1800 s stage is linearly
/// unstable on the humidity/CO2 channels at high ventilation with a closed
/// canopy (|lambda| dt past the RK4 real-axis limit 2.785); four 450 s
/// stages keep the worst case near -1.5 even at the 10% parameter-band
/// extremes and bring the per-period truncation under 1e-6 relative.
pub const SUBSTEPS: usize = 4;

/// The sample-period state map of the discrete-time model: `SUBSTEPS` RK4
/// stages spanning `DT` with the input and disturbance held constant.
pub fn discrete_step<S: Scalar>(
    x: &[S; 4],
    u: &[S; 3],
    d: &[f64; 4],
    p: &ParameterVector,
) -> [S; 4] {
    let h = DT / SUBSTEPS as f64;
    let mut out = *x;
    for _ in 0..SUBSTEPS {
        out = rk4_step(&out, u, d, p, h);
    }
    out
}

#[inline]
fn add_scaled<S: Scalar>(x: &[S; 4], k: &[S; 4], h: f64) -> [S; 4] {
    [
        x[0] + k[0] * h,
        x[1] + k[1] * h,
        x[2] + k[2] * h,
        x[3] + k[3] * h,
    ]
}

/// Output conversion without range checks, for use inside predictions where
/// intermediate line-search iterates may wander. Total on x3 > -239 degC.
#[inline]
pub fn output_map_generic<S: Scalar>(x: &[S; 4]) -> [S; 4] {
    [
        x[0],
        co2_density_to_ppm(x[1], x[2]),
        x[2],
        relative_humidity_pct(x[3], x[2]),
    ]
}

/// Checked output conversion for simulated states.
///
/// Errors when the temperature leaves (-20, 60) degC, where the ideal-gas and
/// saturation-curve conversions stop being meaningful for a greenhouse.
pub fn output_map(x: &State) -> Result<Output> {
    let t = x.temperature;
    if !(t > -20.0 && t < 60.0) {
        return Err(CoreError::TemperatureRange(t));
    }
    let y = output_map_generic(&x.as_array());
    Ok(Output {
        dry_weight: y[0],
        co2_ppm: y[1],
        temperature: y[2],
        humidity_pct: y[3],
    })
}
