//! Wavelength-resolved light transport through dyed media.
//!
//! A [`Spectrum`] is sampled on a strictly increasing wavelength grid. Light
//! travelling a path of length `x` through a dyed waveguide is attenuated
//! pointwise as `I(λ) = I0(λ) · exp(-c · k(λ) · x)`, where `k` is the
//! per-wavelength decay coefficient of the [`DyeProfile`] and `c` its
//! concentration scale. A [`ChannelBank`] then integrates the spectrum into a
//! handful of detector channels with the rectangle rule.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::linear_fit;

/// Readings at or below this level are treated as zero (no coupled light).
pub const INTENSITY_FLOOR: f64 = 1e-12;

pub const DEFAULT_GRID_START_NM: f64 = 400.0;
pub const DEFAULT_GRID_STOP_NM: f64 = 700.0;
pub const DEFAULT_GRID_STEP_NM: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("wavelength grids do not match")]
    GridMismatch,
    #[error("invalid wavelength grid: {0}")]
    InvalidGrid(String),
    #[error("invalid value: {0}")]
    Domain(String),
    #[error("channel {channel} intensity {value} is at or below the intensity floor")]
    BelowFloor { channel: usize, value: f64 },
    #[error("unknown channel `{0}`")]
    UnknownChannel(String),
}

/// Uniform grid `start, start + step, ..., stop` (inclusive when `stop` lies on the grid).
pub fn uniform_grid(start_nm: f64, stop_nm: f64, step_nm: f64) -> Result<Vec<f64>, SpectralError> {
    if !(step_nm > 0.0) || !start_nm.is_finite() || !stop_nm.is_finite() || stop_nm <= start_nm {
        return Err(SpectralError::InvalidGrid(format!(
            "start {start_nm}, stop {stop_nm}, step {step_nm}"
        )));
    }
    let n = ((stop_nm - start_nm) / step_nm + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start_nm + i as f64 * step_nm).collect())
}

pub fn default_grid() -> Vec<f64> {
    uniform_grid(DEFAULT_GRID_START_NM, DEFAULT_GRID_STOP_NM, DEFAULT_GRID_STEP_NM)
        .expect("default grid is valid")
}

fn check_grid(grid: &[f64]) -> Result<(), SpectralError> {
    if grid.len() < 2 {
        return Err(SpectralError::InvalidGrid("need at least two samples".into()));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(SpectralError::InvalidGrid("non-finite wavelength".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SpectralError::InvalidGrid("wavelengths must be strictly increasing".into()));
    }
    Ok(())
}

/// Rectangle-rule weights: each sample owns the interval up to the next
/// sample; the last sample reuses the final spacing.
pub fn quadrature_weights(grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    (0..n)
        .map(|i| if i + 1 < n { grid[i + 1] - grid[i] } else { grid[n - 1] - grid[n - 2] })
        .collect()
}

/// Index of the grid sample nearest to `wavelength_nm`, if it lies within half a spacing.
pub fn nearest_index(grid: &[f64], wavelength_nm: f64) -> Option<usize> {
    let (idx, dist) = grid
        .iter()
        .enumerate()
        .map(|(i, w)| (i, (w - wavelength_nm).abs()))
        .min_by(|a, b| a.1.total_cmp(&b.1))?;
    let w = quadrature_weights(grid);
    (dist <= 0.5 * w[idx] + 1e-9).then_some(idx)
}

/// On-disk form shared by spectra and dye profiles.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SampledCurve {
    wavelengths_nm: Vec<f64>,
    values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    concentration_scale: Option<f64>,
}

/// Sampled spectral intensity (arbitrary linear units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SampledCurve", into = "SampledCurve")]
pub struct Spectrum {
    wavelengths_nm: Vec<f64>,
    intensities: Vec<f64>,
}

impl TryFrom<SampledCurve> for Spectrum {
    type Error = SpectralError;

    fn try_from(raw: SampledCurve) -> Result<Self, Self::Error> {
        Spectrum::new(raw.wavelengths_nm, raw.values)
    }
}

impl From<Spectrum> for SampledCurve {
    fn from(s: Spectrum) -> Self {
        SampledCurve { wavelengths_nm: s.wavelengths_nm, values: s.intensities, concentration_scale: None }
    }
}

impl Spectrum {
    pub fn new(wavelengths_nm: Vec<f64>, intensities: Vec<f64>) -> Result<Self, SpectralError> {
        check_grid(&wavelengths_nm)?;
        if intensities.len() != wavelengths_nm.len() {
            return Err(SpectralError::Domain(format!(
                "{} intensities for {} wavelengths",
                intensities.len(),
                wavelengths_nm.len()
            )));
        }
        if intensities.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(SpectralError::Domain("intensities must be finite and nonnegative".into()));
        }
        Ok(Self { wavelengths_nm, intensities })
    }

    /// Flat source at a constant level over the grid.
    pub fn flat(grid: &[f64], level: f64) -> Result<Self, SpectralError> {
        Self::new(grid.to_vec(), vec![level; grid.len()])
    }

    pub fn wavelengths_nm(&self) -> &[f64] {
        &self.wavelengths_nm
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    /// `a * self + b * other` on a shared grid.
    pub fn combine(&self, a: f64, other: &Spectrum, b: f64) -> Result<Spectrum, SpectralError> {
        if self.wavelengths_nm != other.wavelengths_nm {
            return Err(SpectralError::GridMismatch);
        }
        let intensities =
            self.intensities.iter().zip(&other.intensities).map(|(x, y)| a * x + b * y).collect();
        Spectrum::new(self.wavelengths_nm.clone(), intensities)
    }
}

/// Parameters of the logistic red-dye absorbance curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticDye {
    /// Decay coefficient at the blue end, 1/mm.
    pub k_max: f64,
    /// Decay coefficient at the red end, 1/mm.
    pub k_min: f64,
    pub center_nm: f64,
    pub width_nm: f64,
}

impl Default for LogisticDye {
    fn default() -> Self {
        Self { k_max: 0.040, k_min: 0.004, center_nm: 560.0, width_nm: 25.0 }
    }
}

impl LogisticDye {
    pub fn decay_at(&self, wavelength_nm: f64) -> f64 {
        self.k_max
            - (self.k_max - self.k_min) / (1.0 + (-(wavelength_nm - self.center_nm) / self.width_nm).exp())
    }
}

/// Per-wavelength decay coefficients `k(λ)` (1/mm) and a concentration multiplier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SampledCurve", into = "SampledCurve")]
pub struct DyeProfile {
    wavelengths_nm: Vec<f64>,
    decay_per_mm: Vec<f64>,
    concentration_scale: f64,
}

impl TryFrom<SampledCurve> for DyeProfile {
    type Error = SpectralError;

    fn try_from(raw: SampledCurve) -> Result<Self, Self::Error> {
        DyeProfile::new(raw.wavelengths_nm, raw.values, raw.concentration_scale.unwrap_or(1.0))
    }
}

impl From<DyeProfile> for SampledCurve {
    fn from(d: DyeProfile) -> Self {
        SampledCurve {
            wavelengths_nm: d.wavelengths_nm,
            values: d.decay_per_mm,
            concentration_scale: Some(d.concentration_scale),
        }
    }
}

impl DyeProfile {
    pub fn new(
        wavelengths_nm: Vec<f64>,
        decay_per_mm: Vec<f64>,
        concentration_scale: f64,
    ) -> Result<Self, SpectralError> {
        check_grid(&wavelengths_nm)?;
        if decay_per_mm.len() != wavelengths_nm.len() {
            return Err(SpectralError::Domain("decay profile length differs from grid".into()));
        }
        if decay_per_mm.iter().any(|k| !(k.is_finite() && *k >= 0.0)) {
            return Err(SpectralError::Domain("decay coefficients must be finite and nonnegative".into()));
        }
        if !(concentration_scale.is_finite() && concentration_scale >= 0.0) {
            return Err(SpectralError::Domain(format!("concentration scale {concentration_scale}")));
        }
        Ok(Self { wavelengths_nm, decay_per_mm, concentration_scale })
    }

    /// Same decay coefficient at every wavelength.
    pub fn uniform(grid: &[f64], decay_per_mm: f64) -> Result<Self, SpectralError> {
        Self::new(grid.to_vec(), vec![decay_per_mm; grid.len()], 1.0)
    }

    pub fn logistic(grid: &[f64], params: &LogisticDye) -> Result<Self, SpectralError> {
        Self::new(grid.to_vec(), grid.iter().map(|&w| params.decay_at(w)).collect(), 1.0)
    }

    /// Default red dye on the given grid.
    pub fn red_dye(grid: &[f64]) -> Self {
        Self::logistic(grid, &LogisticDye::default()).expect("default dye is valid")
    }

    pub fn wavelengths_nm(&self) -> &[f64] {
        &self.wavelengths_nm
    }

    /// Base coefficients, before the concentration scale.
    pub fn decay_per_mm(&self) -> &[f64] {
        &self.decay_per_mm
    }

    pub fn concentration_scale(&self) -> f64 {
        self.concentration_scale
    }

    /// `c · k(λ)` at grid index `i`.
    pub fn effective_decay(&self, i: usize) -> f64 {
        self.concentration_scale * self.decay_per_mm[i]
    }

    pub fn with_concentration(&self, concentration_scale: f64) -> Result<Self, SpectralError> {
        Self::new(self.wavelengths_nm.clone(), self.decay_per_mm.clone(), concentration_scale)
    }

    /// Multiplies every base coefficient by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, SpectralError> {
        Self::new(
            self.wavelengths_nm.clone(),
            self.decay_per_mm.iter().map(|k| k * factor).collect(),
            self.concentration_scale,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub name: String,
    #[serde(rename = "values")]
    pub response: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawBank {
    wavelengths_nm: Vec<f64>,
    channels: Vec<Channel>,
}

/// Ordered detector channels, each a nonnegative response `R(λ)` on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBank", into = "RawBank")]
pub struct ChannelBank {
    wavelengths_nm: Vec<f64>,
    channels: Vec<Channel>,
}

impl TryFrom<RawBank> for ChannelBank {
    type Error = SpectralError;

    fn try_from(raw: RawBank) -> Result<Self, Self::Error> {
        ChannelBank::new(raw.wavelengths_nm, raw.channels)
    }
}

impl From<ChannelBank> for RawBank {
    fn from(b: ChannelBank) -> Self {
        RawBank { wavelengths_nm: b.wavelengths_nm, channels: b.channels }
    }
}

impl ChannelBank {
    pub fn new(wavelengths_nm: Vec<f64>, channels: Vec<Channel>) -> Result<Self, SpectralError> {
        check_grid(&wavelengths_nm)?;
        let weights = quadrature_weights(&wavelengths_nm);
        for ch in &channels {
            if ch.response.len() != wavelengths_nm.len() {
                return Err(SpectralError::Domain(format!("channel `{}` length differs from grid", ch.name)));
            }
            if ch.response.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
                return Err(SpectralError::Domain(format!("channel `{}` has a negative response", ch.name)));
            }
            let integral: f64 = ch.response.iter().zip(&weights).map(|(r, w)| r * w).sum();
            if integral <= 0.0 {
                return Err(SpectralError::Domain(format!("channel `{}` has zero integral", ch.name)));
            }
        }
        Ok(Self { wavelengths_nm, channels })
    }

    /// Boxcar channels over `[lo, hi)`; a band whose upper edge is the end of
    /// the grid includes that last sample.
    pub fn boxcar(grid: &[f64], bands: &[(&str, f64, f64)]) -> Result<Self, SpectralError> {
        let last = *grid.last().unwrap_or(&f64::NAN);
        let channels = bands
            .iter()
            .map(|&(name, lo, hi)| Channel {
                name: name.to_string(),
                response: grid
                    .iter()
                    .map(|&w| {
                        let inside = w >= lo && (w < hi || (hi >= last && w <= hi));
                        if inside { 1.0 } else { 0.0 }
                    })
                    .collect(),
            })
            .collect();
        Self::new(grid.to_vec(), channels)
    }

    /// Default bank: B [400, 500), G [500, 600), R [600, 700].
    pub fn rgb_boxcar(grid: &[f64]) -> Result<Self, SpectralError> {
        Self::boxcar(grid, &[("B", 400.0, 500.0), ("G", 500.0, 600.0), ("R", 600.0, 700.0)])
    }

    /// Channels that each respond to a single grid sample.
    pub fn single_wavelength(grid: &[f64], lines: &[(&str, f64)]) -> Result<Self, SpectralError> {
        let channels = lines
            .iter()
            .map(|&(name, wl)| {
                let idx = nearest_index(grid, wl)
                    .ok_or_else(|| SpectralError::Domain(format!("{wl} nm is not on the grid")))?;
                let mut response = vec![0.0; grid.len()];
                response[idx] = 1.0;
                Ok(Channel { name: name.to_string(), response })
            })
            .collect::<Result<Vec<_>, SpectralError>>()?;
        Self::new(grid.to_vec(), channels)
    }

    pub fn wavelengths_nm(&self) -> &[f64] {
        &self.wavelengths_nm
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.channels.iter().map(|c| c.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Result<usize, SpectralError> {
        self.channels
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| SpectralError::UnknownChannel(name.to_string()))
    }
}

/// Beer–Lambert attenuation over `path_mm` of dyed waveguide.
pub fn attenuate(spectrum: &Spectrum, dye: &DyeProfile, path_mm: f64) -> Result<Spectrum, SpectralError> {
    if spectrum.wavelengths_nm != dye.wavelengths_nm {
        return Err(SpectralError::GridMismatch);
    }
    if !(path_mm >= 0.0 && path_mm.is_finite()) {
        return Err(SpectralError::Domain(format!("path length {path_mm} mm")));
    }
    let intensities = spectrum
        .intensities
        .iter()
        .enumerate()
        .map(|(i, v)| v * (-dye.effective_decay(i) * path_mm).exp())
        .collect();
    Ok(Spectrum { wavelengths_nm: spectrum.wavelengths_nm.clone(), intensities })
}

/// Rectangle-rule integral of `spectrum · R_ch` for every channel.
pub fn integrate_channels(spectrum: &Spectrum, bank: &ChannelBank) -> Result<Vec<f64>, SpectralError> {
    if bank.is_empty() {
        return Err(SpectralError::Domain("channel bank is empty".into()));
    }
    if spectrum.wavelengths_nm != bank.wavelengths_nm {
        return Err(SpectralError::GridMismatch);
    }
    let weights = quadrature_weights(&spectrum.wavelengths_nm);
    Ok(bank
        .channels
        .iter()
        .map(|ch| {
            spectrum
                .intensities
                .iter()
                .zip(&ch.response)
                .zip(&weights)
                .map(|((s, r), w)| s * r * w)
                .sum()
        })
        .collect())
}

/// `ln(I_num / I_den)` for two channels of a reading.
pub fn log_ratio(intensities: &[f64], numerator: usize, denominator: usize) -> Result<f64, SpectralError> {
    for idx in [numerator, denominator] {
        let value = *intensities
            .get(idx)
            .ok_or_else(|| SpectralError::UnknownChannel(format!("index {idx}")))?;
        if !(value > INTENSITY_FLOOR) {
            return Err(SpectralError::BelowFloor { channel: idx, value });
        }
    }
    Ok((intensities[numerator] / intensities[denominator]).ln())
}

/// Best single decay rate describing one band-integrated channel.
///
/// The channel signal `S(x) = Σ source · R · Δλ · exp(-c k x)` is sampled at
/// `n_paths` evenly spaced path lengths on `[0, max_path_mm]`, and
/// `ln S(x) ≈ a - k̂ x` is fitted by ordinary least squares. Returns `k̂`.
pub fn band_effective_decay(
    dye: &DyeProfile,
    bank: &ChannelBank,
    channel: usize,
    source: &Spectrum,
    max_path_mm: f64,
    n_paths: usize,
) -> Result<f64, SpectralError> {
    if source.wavelengths_nm != dye.wavelengths_nm || source.wavelengths_nm != bank.wavelengths_nm {
        return Err(SpectralError::GridMismatch);
    }
    let ch = bank
        .channels
        .get(channel)
        .ok_or_else(|| SpectralError::UnknownChannel(format!("index {channel}")))?;
    if !(max_path_mm > 0.0) || n_paths < 2 {
        return Err(SpectralError::Domain("need a positive path range and at least two samples".into()));
    }
    let weights = quadrature_weights(&source.wavelengths_nm);
    let terms: Vec<(f64, f64)> = (0..weights.len())
        .map(|i| (source.intensities[i] * ch.response[i] * weights[i], dye.effective_decay(i)))
        .filter(|(amp, _)| *amp > 0.0)
        .collect();
    if terms.is_empty() {
        return Err(SpectralError::Domain(format!("channel `{}` does not overlap the source", ch.name)));
    }
    let xs: Vec<f64> = (0..n_paths).map(|j| max_path_mm * j as f64 / (n_paths - 1) as f64).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| terms.iter().map(|(amp, k)| amp * (-k * x).exp()).sum::<f64>().ln())
        .collect();
    let fit = linear_fit(&xs, &ys).map_err(|e| SpectralError::Domain(e.to_string()))?;
    Ok(-fit.slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn grid() -> Vec<f64> {
        default_grid()
    }

    #[test]
    fn default_grid_shape() {
        let g = grid();
        assert_eq!(g.len(), 301);
        assert_eq!(g[0], 400.0);
        assert_eq!(g[300], 700.0);
    }

    #[test]
    fn zero_path_is_identity() {
        let g = grid();
        let s = Spectrum::new(g.clone(), g.iter().map(|w| w / 100.0).collect()).unwrap();
        let out = attenuate(&s, &DyeProfile::red_dye(&g), 0.0).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn uniform_decay_closed_form() {
        let g = grid();
        let s = Spectrum::flat(&g, 1.0).unwrap();
        let dye = DyeProfile::uniform(&g, 0.01).unwrap();
        let out = attenuate(&s, &dye, 100.0).unwrap();
        for v in out.intensities() {
            assert_relative_eq!(*v, 0.367_879_441_171_442_33, max_relative = 1e-15);
        }
    }

    #[test]
    fn attenuate_rejects_bad_inputs() {
        let g = grid();
        let s = Spectrum::flat(&g, 1.0).unwrap();
        let other = uniform_grid(400.0, 700.0, 2.0).unwrap();
        let dye = DyeProfile::uniform(&other, 0.01).unwrap();
        assert_eq!(attenuate(&s, &dye, 1.0), Err(SpectralError::GridMismatch));
        let dye = DyeProfile::uniform(&g, 0.01).unwrap();
        assert!(matches!(attenuate(&s, &dye, -1.0), Err(SpectralError::Domain(_))));
    }

    #[test]
    fn red_dye_is_nonincreasing() {
        let g = grid();
        let dye = DyeProfile::red_dye(&g);
        assert!(dye.decay_per_mm().windows(2).all(|w| w[1] <= w[0]));
        assert!(dye.decay_per_mm().iter().all(|k| *k >= 0.0));
    }

    #[test]
    fn integrate_zero_and_unit_spectra() {
        let g = grid();
        let bank = ChannelBank::rgb_boxcar(&g).unwrap();
        let zero = Spectrum::flat(&g, 0.0).unwrap();
        assert_eq!(integrate_channels(&zero, &bank).unwrap(), vec![0.0, 0.0, 0.0]);
        // B and G hold 100 one-nanometre samples each; R includes both ends.
        let unit = Spectrum::flat(&g, 1.0).unwrap();
        assert_eq!(integrate_channels(&unit, &bank).unwrap(), vec![100.0, 100.0, 101.0]);
    }

    #[test]
    fn disjoint_support_lights_only_red() {
        let g = grid();
        let bank = ChannelBank::rgb_boxcar(&g).unwrap();
        let s = Spectrum::new(g.clone(), g.iter().map(|&w| if w >= 600.0 { 1.0 } else { 0.0 }).collect())
            .unwrap();
        let out = integrate_channels(&s, &bank).unwrap();
        assert_eq!(out[0], 0.0);
        assert_eq!(out[1], 0.0);
        assert!(out[2] > 0.0);
    }

    #[test]
    fn empty_bank_is_rejected() {
        let g = grid();
        let bank = ChannelBank::new(g.clone(), vec![]).unwrap();
        let s = Spectrum::flat(&g, 1.0).unwrap();
        assert!(matches!(integrate_channels(&s, &bank), Err(SpectralError::Domain(_))));
    }

    #[test]
    fn zero_integral_channel_is_rejected() {
        let g = grid();
        let ch = Channel { name: "dark".into(), response: vec![0.0; g.len()] };
        assert!(ChannelBank::new(g, vec![ch]).is_err());
    }

    #[test]
    fn log_ratio_cases() {
        assert_eq!(log_ratio(&[3.0, 3.0], 0, 1).unwrap(), 0.0);
        assert!(matches!(log_ratio(&[0.0, 3.0], 0, 1), Err(SpectralError::BelowFloor { channel: 0, .. })));
        assert!(matches!(log_ratio(&[2.0, 1e-13], 0, 1), Err(SpectralError::BelowFloor { channel: 1, .. })));
    }

    #[test]
    fn log_ratio_single_wavelength_closed_form() {
        let g = grid();
        let dye = DyeProfile::red_dye(&g);
        let bank = ChannelBank::single_wavelength(&g, &[("B", 450.0), ("R", 650.0)]).unwrap();
        let source =
            Spectrum::new(g.clone(), g.iter().map(|&w| if w < 550.0 { 2.0 } else { 0.5 }).collect()).unwrap();
        let kb = LogisticDye::default().decay_at(450.0);
        let kr = LogisticDye::default().decay_at(650.0);
        for x in [0.0, 12.5, 85.0] {
            let reading = integrate_channels(&attenuate(&source, &dye, x).unwrap(), &bank).unwrap();
            let expected = (kr - kb) * x + (2.0f64 / 0.5).ln();
            assert_relative_eq!(log_ratio(&reading, 0, 1).unwrap(), expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn effective_decay_of_constant_band() {
        let g = grid();
        let dye = DyeProfile::uniform(&g, 0.023).unwrap();
        let bank = ChannelBank::rgb_boxcar(&g).unwrap();
        let src = Spectrum::flat(&g, 1.0).unwrap();
        for ch in 0..3 {
            let k = band_effective_decay(&dye, &bank, ch, &src, 85.0, 86).unwrap();
            assert_relative_eq!(k, 0.023, max_relative = 1e-12);
        }
    }

    #[test]
    fn effective_decay_of_linear_band_lies_within_range() {
        let g = grid();
        let dye = DyeProfile::new(g.clone(), g.iter().map(|w| 0.01 + 1e-4 * (w - 400.0)).collect(), 1.0)
            .unwrap();
        let bank = ChannelBank::rgb_boxcar(&g).unwrap();
        let src = Spectrum::flat(&g, 1.0).unwrap();
        let k = band_effective_decay(&dye, &bank, 0, &src, 85.0, 86).unwrap();
        assert!(k > 0.01 && k < 0.01 + 1e-4 * 99.0, "k = {k}");
    }

    /// Oracle: grid search over k with the optimal intercept profiled out.
    fn brute_force_decay(signal: impl Fn(f64) -> f64, max_path: f64, n: usize) -> f64 {
        let xs: Vec<f64> = (0..n).map(|j| max_path * j as f64 / (n - 1) as f64).collect();
        let ls: Vec<f64> = xs.iter().map(|&x| signal(x).ln()).collect();
        let sse = |k: f64| {
            let r: Vec<f64> = xs.iter().zip(&ls).map(|(x, l)| l + k * x).collect();
            let mean = r.iter().sum::<f64>() / r.len() as f64;
            r.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
        };
        let (mut lo, mut hi) = (0.0, 0.1);
        for _ in 0..6 {
            let step = (hi - lo) / 1000.0;
            let best = (0..=1000)
                .map(|i| lo + step * i as f64)
                .min_by(|a, b| sse(*a).total_cmp(&sse(*b)))
                .unwrap();
            lo = best - step;
            hi = best + step;
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn effective_decay_of_red_dye_blue_band_matches_brute_force() {
        let g = grid();
        let params = LogisticDye::default();
        let dye = DyeProfile::red_dye(&g);
        let bank = ChannelBank::rgb_boxcar(&g).unwrap();
        let src = Spectrum::flat(&g, 1.0).unwrap();
        let k = band_effective_decay(&dye, &bank, 0, &src, 85.0, 86).unwrap();
        let oracle = brute_force_decay(
            |x| (400..500).map(|w| (-params.decay_at(w as f64) * x).exp()).sum(),
            85.0,
            86,
        );
        assert_relative_eq!(k, oracle, max_relative = 1e-9);
        // Frozen from an independent numpy evaluation.
        assert_relative_eq!(k, 0.039_222_910_407_467_61, max_relative = 1e-10);
    }

    #[test]
    fn concentration_scales_single_wavelength_slope() {
        let g = grid();
        let bank = ChannelBank::single_wavelength(&g, &[("B", 450.0), ("R", 650.0)]).unwrap();
        let src = Spectrum::flat(&g, 1.0).unwrap();
        let slope = |c: f64| {
            let dye = DyeProfile::red_dye(&g).with_concentration(c).unwrap();
            let r0 = integrate_channels(&attenuate(&src, &dye, 0.0).unwrap(), &bank).unwrap();
            let r1 = integrate_channels(&attenuate(&src, &dye, 50.0).unwrap(), &bank).unwrap();
            (log_ratio(&r1, 0, 1).unwrap() - log_ratio(&r0, 0, 1).unwrap()) / 50.0
        };
        assert_relative_eq!(slope(3.0), 3.0 * slope(1.0), max_relative = 1e-12);
    }

    #[test]
    fn json_round_trip_uses_values_key() {
        let g = uniform_grid(400.0, 410.0, 5.0).unwrap();
        let s = Spectrum::flat(&g, 2.0).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(text, r#"{"wavelengths_nm":[400.0,405.0,410.0],"values":[2.0,2.0,2.0]}"#);
        let bad = r#"{"wavelengths_nm":[400.0,405.0],"values":[-1.0,2.0]}"#;
        assert!(serde_json::from_str::<Spectrum>(bad).is_err());
        let dye: DyeProfile = serde_json::from_str(r#"{"wavelengths_nm":[400,500],"values":[0.1,0.2]}"#).unwrap();
        assert_eq!(dye.concentration_scale(), 1.0);
    }

    proptest! {
        #[test]
        fn attenuation_composes(a in 0.0f64..200.0, b in 0.0f64..200.0, c in 0.0f64..3.0) {
            let g = grid();
            let dye = DyeProfile::red_dye(&g).with_concentration(c).unwrap();
            let src = Spectrum::flat(&g, 1.0).unwrap();
            let twice = attenuate(&attenuate(&src, &dye, a).unwrap(), &dye, b).unwrap();
            let once = attenuate(&src, &dye, a + b).unwrap();
            for (x, y) in twice.intensities().iter().zip(once.intensities()) {
                prop_assert!((x - y).abs() <= 1e-12 * y.abs().max(f64::MIN_POSITIVE));
            }
        }

        #[test]
        fn attenuation_is_monotone_in_path(a in 0.0f64..200.0, extra in 0.0f64..50.0) {
            let g = grid();
            let dye = DyeProfile::red_dye(&g);
            let src = Spectrum::flat(&g, 1.0).unwrap();
            let near = attenuate(&src, &dye, a).unwrap();
            let far = attenuate(&src, &dye, a + extra).unwrap();
            for (n, f) in near.intensities().iter().zip(far.intensities()) {
                prop_assert!(f <= n);
            }
        }

        #[test]
        fn integration_is_linear(a in 0.0f64..5.0, b in 0.0f64..5.0, shift in 0.0f64..100.0) {
            let g = grid();
            let bank = ChannelBank::rgb_boxcar(&g).unwrap();
            let s1 = Spectrum::flat(&g, 1.0).unwrap();
            let s2 = Spectrum::new(g.clone(), g.iter().map(|w| (w - 400.0 + shift) / 300.0).collect()).unwrap();
            let mixed = integrate_channels(&s1.combine(a, &s2, b).unwrap(), &bank).unwrap();
            let i1 = integrate_channels(&s1, &bank).unwrap();
            let i2 = integrate_channels(&s2, &bank).unwrap();
            for k in 0..3 {
                let expected = a * i1[k] + b * i2[k];
                prop_assert!((mixed[k] - expected).abs() <= 1e-9 * expected.abs().max(1.0));
            }
        }
    }
}
