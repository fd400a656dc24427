//! Nominal model parameters for the lettuce greenhouse.
//!
//! The 22 entries follow the Van Henten crop/climate model. Indices in code
//! are zero-based; the conventional one-based name `p1..p22` is kept in the
//! table below for cross-referencing.

use std::path::Path;

use rand::Rng;

use crate::error::{CoreError, Result};

/// Number of model parameters.
pub const N_PARAMS: usize = 22;

/// `(name, nominal value, unit)` for each parameter, in order `p1..p22`.
///
/// | name       | meaning                                        |
/// |------------|------------------------------------------------|
/// | c_yield    | yield factor from gross assimilation            |
/// | c_resp_d   | respiration rate in dry-weight units            |
/// | c_cap_c    | CO2 capacity of the air volume (height)         |
/// | c_resp_c   | respiration rate in CO2 units                   |
/// | c_cap_q    | heat capacity of the greenhouse air             |
/// | c_cap_q_v  | ventilation heat capacity per flow              |
/// | c_q_out    | heat transmission through the cover             |
/// | c_rad_q    | heat load from solar radiation                  |
/// | c_cap_h    | vapor capacity of the air volume (height)       |
/// | c_pl_d     | effective canopy area per unit dry weight       |
/// | c_eps      | light use efficiency                            |
/// | c_co2_1    | temperature response, quadratic coefficient     |
/// | c_co2_2    | temperature response, linear coefficient        |
/// | c_co2_3    | temperature response, constant coefficient      |
/// | c_gamma    | CO2 compensation point                          |
/// | c_leak     | leakage ventilation                             |
/// | c_v_pl_ai  | canopy transpiration mass-transfer coefficient  |
/// | c_sat_1    | saturation vapor curve, scale                   |
/// | c_R        | gas constant                                    |
/// | c_T0       | zero Celsius in Kelvin                          |
/// | c_sat_2    | saturation vapor curve, exponent scale          |
/// | c_sat_3    | saturation vapor curve, exponent offset         |
pub const PARAM_TABLE: [(&str, f64, &str); N_PARAMS] = [
    ("c_yield", 0.544, "-"),
    ("c_resp_d", 2.65e-7, "1/s"),
    ("c_cap_c", 4.1, "m"),
    ("c_resp_c", 4.87e-7, "1/s"),
    ("c_cap_q", 3.0e4, "J/(m^2 degC)"),
    ("c_cap_q_v", 1290.0, "J/(m^3 degC)"),
    ("c_q_out", 6.1, "W/(m^2 degC)"),
    ("c_rad_q", 0.2, "-"),
    ("c_cap_h", 4.1, "m"),
    ("c_pl_d", 53.0, "m^2/kg"),
    ("c_eps", 3.55e-9, "kg/J"),
    ("c_co2_1", 5.11e-6, "m/(s degC^2)"),
    ("c_co2_2", 2.3e-4, "m/(s degC)"),
    ("c_co2_3", 6.29e-4, "m/s"),
    ("c_gamma", 5.2e-5, "kg/m^3"),
    ("c_leak", 7.5e-6, "m/s"),
    ("c_v_pl_ai", 3.6e-3, "m/s"),
    ("c_sat_1", 9348.0, "J/m^3"),
    ("c_R", 8314.0, "J/(K kmol)"),
    ("c_T0", 273.15, "K"),
    ("c_sat_2", 17.4, "-"),
    ("c_sat_3", 239.0, "degC"),
];

/// Full parameter vector for one plant instance.
///
/// Invariant: all entries are finite and strictly positive (enforced on
/// construction and file load).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterVector {
    values: [f64; N_PARAMS],
}

impl ParameterVector {
    /// Nominal values from the table above.
    pub fn nominal() -> Self {
        let mut values = [0.0; N_PARAMS];
        for (i, &(_, v, _)) in PARAM_TABLE.iter().enumerate() {
            values[i] = v;
        }
        ParameterVector { values }
    }

    pub fn from_values(values: [f64; N_PARAMS]) -> Result<Self> {
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || v <= 0.0 {
                return Err(CoreError::InvalidArgument(format!(
                    "parameter {} ({}) must be finite and positive, got {v}",
                    i + 1,
                    PARAM_TABLE[i].0
                )));
            }
        }
        Ok(ParameterVector { values })
    }

    /// Parameter value by zero-based index.
    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn values(&self) -> &[f64; N_PARAMS] {
        &self.values
    }

    /// Loads `name,value,unit` rows, overriding the nominal table by name.
    ///
    /// Header row optional. Unknown names and malformed rows are errors; the
    /// unit column is informational and not validated against the table.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut values = Self::nominal().values;
        for (row, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if row == 0 && fields.first() == Some(&"name") {
                continue;
            }
            if fields.len() != 3 {
                return Err(CoreError::ParameterParse {
                    row: row + 1,
                    msg: format!("expected 3 comma-separated fields, got {}", fields.len()),
                });
            }
            let idx = PARAM_TABLE
                .iter()
                .position(|&(name, _, _)| name == fields[0])
                .ok_or_else(|| CoreError::ParameterParse {
                    row: row + 1,
                    msg: format!("unknown parameter name {:?}", fields[0]),
                })?;
            let value: f64 = fields[1].parse().map_err(|e| CoreError::ParameterParse {
                row: row + 1,
                msg: format!("bad value {:?}: {e}", fields[1]),
            })?;
            values[idx] = value;
        }
        Self::from_values(values)
    }

    /// Writes the vector as `name,value,unit` with a header row.
    pub fn to_file(&self, path: &Path) -> Result<()> {
        let mut out = String::from("name,value,unit\n");
        for (i, &(name, _, unit)) in PARAM_TABLE.iter().enumerate() {
            out.push_str(&format!("{name},{},{unit}\n", self.values[i]));
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Draws a perturbed parameter vector with each component uniform in
/// `[p_i (1 - delta), p_i (1 + delta)]`, independently per component.
///
/// `delta = 0` returns `nominal` exactly (the generator is still advanced
/// once per component so seed bookkeeping is identical in both modes).
pub fn sample_parameters<R: Rng>(
    nominal: &ParameterVector,
    delta: f64,
    rng: &mut R,
) -> ParameterVector {
    let mut values = [0.0; N_PARAMS];
    for (i, v) in values.iter_mut().enumerate() {
        let p = nominal.get(i);
        let u: f64 = rng.random();
        *v = p * (1.0 + delta * (2.0 * u - 1.0));
    }
    ParameterVector { values }
}
