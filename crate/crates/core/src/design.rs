//! Sensitivity of the position response to waveguide length and dye concentration.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{fit_position_from_model, CalibrationError, RatioChannels};
use crate::sensor::{SensorConfig, SensorError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignRow {
    pub length_mm: f64,
    pub concentration_scale: f64,
    /// Log-ratio slope, 1/mm.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Log-ratio change across the full length.
    pub span: f64,
}

/// One noise-free position calibration per (length, concentration) pair,
/// length-major, sampled every `1 / samples_per_mm` millimetres.
pub fn sensitivity_table(
    base: &SensorConfig,
    channels: &RatioChannels,
    lengths_mm: &[f64],
    concentrations: &[f64],
    force_n: f64,
    samples_per_mm: f64,
) -> Result<Vec<DesignRow>, CalibrationError> {
    if !(samples_per_mm > 0.0) {
        return Err(CalibrationError::Degenerate(format!("samples per mm {samples_per_mm}")));
    }
    let mut configs = Vec::with_capacity(lengths_mm.len() * concentrations.len());
    for &length in lengths_mm {
        for &conc in concentrations {
            let dye = base.dye.with_concentration(conc).map_err(SensorError::from)?;
            let cfg = SensorConfig { length_mm: length, dye, ..base.clone() };
            cfg.validate()?;
            configs.push(cfg);
        }
    }
    configs
        .par_iter()
        .map(|cfg| {
            let n = (cfg.effective_length_mm() * samples_per_mm).round() as usize + 1;
            let cal = fit_position_from_model(cfg, channels, force_n, n.max(3))?;
            Ok(DesignRow {
                length_mm: cfg.length_mm,
                concentration_scale: cfg.dye.concentration_scale(),
                slope: cal.slope,
                intercept: cal.intercept,
                r_squared: cal.r_squared,
                span: cal.slope.abs() * cal.length_mm,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{default_grid, ChannelBank};
    use approx::assert_relative_eq;

    fn narrowband() -> SensorConfig {
        let g = default_grid();
        SensorConfig {
            bank: ChannelBank::single_wavelength(&g, &[("B", 450.0), ("G", 550.0), ("R", 650.0)]).unwrap(),
            ..SensorConfig::default()
        }
    }

    #[test]
    fn doubling_concentration_doubles_slope() {
        let cfg = narrowband();
        let r = RatioChannels::default_for(&cfg.channel_names()).unwrap();
        let rows = sensitivity_table(&cfg, &r, &[50.0, 120.0], &[1.0, 2.0], 2.0, 1.0).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!((rows[1].length_mm, rows[1].concentration_scale), (50.0, 2.0));
        assert_relative_eq!(rows[1].slope, 2.0 * rows[0].slope, max_relative = 1e-9);
        assert_relative_eq!(rows[2].slope, rows[0].slope, max_relative = 1e-9);
        assert_relative_eq!(rows[2].span, 2.4 * rows[0].span, max_relative = 1e-9);
    }

    #[test]
    fn single_point_and_bad_lengths() {
        let cfg = narrowband();
        let r = RatioChannels::default_for(&cfg.channel_names()).unwrap();
        assert_eq!(sensitivity_table(&cfg, &r, &[85.0], &[1.0], 2.0, 1.0).unwrap().len(), 1);
        assert!(matches!(
            sensitivity_table(&cfg, &r, &[20.0], &[1.0], 2.0, 1.0),
            Err(CalibrationError::Sensor(SensorError::InvalidConfig(_)))
        ));
        assert!(sensitivity_table(&cfg, &r, &[250.0], &[1.0], 2.0, 1.0).is_err());
    }
}
