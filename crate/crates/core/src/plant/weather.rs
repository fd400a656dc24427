//! Weather supply: CSV ingestion and a documented synthetic generator.
//!
//! File format: header `k,d1,d2,d3,d4`, one row per 30-minute step, with
//! consecutive integer indices `k`. Units as in [`super::Disturbance`].

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{CoreError, Result};
use crate::plant::model::{saturation_density, DT};
use crate::plant::Disturbance;

/// Samples per day at the 30-minute grid.
pub const STEPS_PER_DAY: usize = 48;

/// Uniformly sampled weather record sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceSeries {
    start_index: usize,
    records: Vec<Disturbance>,
}

impl DisturbanceSeries {
    /// Validates the per-record sign invariants (d1, d2, d4 >= 0, all finite).
    pub fn new(records: Vec<Disturbance>, start_index: usize) -> Result<Self> {
        for (i, d) in records.iter().enumerate() {
            let a = d.as_array();
            if a.iter().any(|v| !v.is_finite()) {
                return Err(CoreError::WeatherInvalid {
                    row: start_index + i,
                    msg: "non-finite value".to_string(),
                });
            }
            for (col, v) in [(1usize, a[0]), (2, a[1]), (4, a[3])] {
                if v < 0.0 {
                    return Err(CoreError::WeatherInvalid {
                        row: start_index + i,
                        msg: format!("column d{col} is negative ({v})"),
                    });
                }
            }
        }
        Ok(DisturbanceSeries {
            start_index,
            records,
        })
    }

    /// Sample period [s]; the grid is fixed at the plant sampling period.
    pub fn dt(&self) -> f64 {
        DT
    }

    /// Index of the first record in its source file (0 for synthetic series).
    pub fn start_index(&self) -> usize {
        self.start_index
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Record at episode step `k` (relative to the start of the series).
    #[inline]
    pub fn get(&self, k: usize) -> &Disturbance {
        &self.records[k]
    }

    pub fn records(&self) -> &[Disturbance] {
        &self.records
    }

    /// Errors unless the series holds at least `need` records.
    pub fn require_len(&self, need: usize) -> Result<()> {
        if self.records.len() < need {
            return Err(CoreError::WeatherLength {
                have: self.records.len(),
                need,
            });
        }
        Ok(())
    }

    /// Per-channel minima and maxima, for reporting.
    pub fn channel_ranges(&self) -> [(f64, f64); 4] {
        let mut ranges = [(f64::INFINITY, f64::NEG_INFINITY); 4];
        for d in &self.records {
            for (i, v) in d.as_array().into_iter().enumerate() {
                ranges[i].0 = ranges[i].0.min(v);
                ranges[i].1 = ranges[i].1.max(v);
            }
        }
        ranges
    }

    /// Writes the series in the interchange CSV format.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::from("k,d1,d2,d3,d4\n");
        for (i, d) in self.records.iter().enumerate() {
            let a = d.as_array();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.start_index + i,
                a[0],
                a[1],
                a[2],
                a[3]
            ));
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Loads and validates a weather CSV.
///
/// `start_index` counts records from the top of the file (not `k` values);
/// `length = None` takes everything from there. Rejects malformed rows,
/// non-consecutive `k`, and sign violations, each with its 1-based file row.
pub fn load_weather(path: &Path, start_index: usize, length: Option<usize>) -> Result<DisturbanceSeries> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();

    let (_, header) = lines.next().ok_or(CoreError::WeatherParse {
        row: 1,
        msg: "empty file".to_string(),
    })?;
    if header.trim() != "k,d1,d2,d3,d4" {
        return Err(CoreError::WeatherParse {
            row: 1,
            msg: format!("expected header `k,d1,d2,d3,d4`, got {:?}", header.trim()),
        });
    }

    let mut records = Vec::new();
    let mut prev_k: Option<i64> = None;
    for (line_idx, line) in lines {
        let row = line_idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(CoreError::WeatherParse {
                row,
                msg: format!("expected 5 fields, got {}", fields.len()),
            });
        }
        let k: i64 = fields[0].parse().map_err(|e| CoreError::WeatherParse {
            row,
            msg: format!("bad index {:?}: {e}", fields[0]),
        })?;
        if let Some(pk) = prev_k {
            if k != pk + 1 {
                return Err(CoreError::WeatherParse {
                    row,
                    msg: format!("non-consecutive index: {pk} followed by {k}"),
                });
            }
        }
        prev_k = Some(k);
        let mut vals = [0.0f64; 4];
        for (j, v) in vals.iter_mut().enumerate() {
            *v = fields[j + 1].parse().map_err(|e| CoreError::WeatherParse {
                row,
                msg: format!("bad value in column d{}: {e}", j + 1),
            })?;
        }
        records.push(Disturbance::from_array(vals));
    }

    if start_index > records.len() {
        return Err(CoreError::WeatherLength {
            have: records.len(),
            need: start_index,
        });
    }
    let rest = records.len() - start_index;
    let take = length.unwrap_or(rest);
    if take > rest {
        return Err(CoreError::WeatherLength {
            have: rest,
            need: take,
        });
    }
    let slice = records[start_index..start_index + take].to_vec();
    DisturbanceSeries::new(slice, start_index)
}

/// Synthetic-weather shape parameters (winter scenario).
///
/// The generated profiles, with `tau = (k mod 48)/48` the fraction of the
/// day (tau = 0 at midnight) and day index `m = k / 48`:
///
/// - `d1`: zero outside daylight (tau in (1/4, 3/4)), inside it a half
///   sinusoid `A_m sin(2 pi (tau - 1/4))` peaking at noon; the amplitude
///   `A_m = radiation_peak (1 + radiation_jitter e_m)` is drawn once per day,
///   `e_m` uniform on [-1, 1].
/// - `d3`: `M_m + temp_amplitude sin(2 pi (tau - 3/8))`, coldest at 03:00 and
///   warmest at 15:00, with the daily mean `M_m = temp_mean + temp_jitter f_m`.
/// - `d2`: `co2_out (1 + 0.03 g_k)` per sample.
/// - `d4`: daily outdoor relative humidity `rh_m = humidity_rh + 0.08 h_m`
///   (capped at 0.95) times the saturation density at `d3(k)`.
///
/// Per-day draws happen first (in day order), then per-sample draws (in
/// sample order), from one ChaCha12 stream, so the series is a pure function
/// of `(seed, length, config)`.
#[derive(Debug, Clone, Copy)]
pub struct SynthWeatherConfig {
    /// Clear-day noon radiation [W/m^2].
    pub radiation_peak: f64,
    /// Relative day-to-day amplitude jitter on d1.
    pub radiation_jitter: f64,
    /// Mean outdoor temperature [degC].
    pub temp_mean: f64,
    /// Absolute day-to-day jitter on the daily mean temperature [degC].
    pub temp_jitter: f64,
    /// Diurnal temperature half-swing [degC].
    pub temp_amplitude: f64,
    /// Outdoor CO2 density level [kg/m^3].
    pub co2_out: f64,
    /// Outdoor relative humidity level (fraction of saturation).
    pub humidity_rh: f64,
}

impl Default for SynthWeatherConfig {
    fn default() -> Self {
        SynthWeatherConfig {
            radiation_peak: 180.0,
            radiation_jitter: 0.35,
            temp_mean: 6.0,
            temp_jitter: 3.0,
            temp_amplitude: 4.0,
            co2_out: 7.5e-4,
            humidity_rh: 0.80,
        }
    }
}

/// Generates `length` records of synthetic winter weather (see
/// [`SynthWeatherConfig`] for the formulas). Deterministic for a given seed.
pub fn synthesize_weather(seed: u64, length: usize, cfg: &SynthWeatherConfig) -> DisturbanceSeries {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let days = length.div_ceil(STEPS_PER_DAY);

    let mut day_params = Vec::with_capacity(days);
    for _ in 0..days {
        let e: f64 = rng.random::<f64>() * 2.0 - 1.0;
        let f: f64 = rng.random::<f64>() * 2.0 - 1.0;
        let h: f64 = rng.random::<f64>() * 2.0 - 1.0;
        let amp = cfg.radiation_peak * (1.0 + cfg.radiation_jitter * e);
        let tmean = cfg.temp_mean + cfg.temp_jitter * f;
        let rh = (cfg.humidity_rh + 0.08 * h).min(0.95);
        day_params.push((amp, tmean, rh));
    }

    let mut records = Vec::with_capacity(length);
    for k in 0..length {
        let m = k / STEPS_PER_DAY;
        let tau = (k % STEPS_PER_DAY) as f64 / STEPS_PER_DAY as f64;
        let (amp, tmean, rh) = day_params[m];

        let d1 = if tau > 0.25 && tau < 0.75 {
            amp * (2.0 * std::f64::consts::PI * (tau - 0.25)).sin()
        } else {
            0.0
        };
        let d3 = tmean + cfg.temp_amplitude * (2.0 * std::f64::consts::PI * (tau - 0.375)).sin();
        let g: f64 = rng.random::<f64>() * 2.0 - 1.0;
        let d2 = cfg.co2_out * (1.0 + 0.03 * g);
        let d4 = rh * saturation_density(d3);

        records.push(Disturbance::from_array([d1.max(0.0), d2, d3, d4]));
    }

    DisturbanceSeries::new(records, 0).expect("synthetic generator keeps sign invariants")
}
