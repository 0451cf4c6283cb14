//! Free-space channel physics: Gaussian beam propagation, aperture and
//! coupling losses, turbulence statistics, and stochastic synthesis of
//! transmittance and beam-wander series.
//!
//! The statistics side implements the estimator chain used to characterize
//! a horizontal link from received-intensity samples: scintillation index
//! `sigma_I^2 = <I^2>/<I>^2 - 1`, log-intensity variance
//! `sigma_lnI^2 = ln(1 + sigma^2/mu^2)`, the structure parameter
//! `C_n^2 = sigma_lnI^2 / (0.496 k^{7/6} L^{11/6})`, and the Fried parameter
//! `r_0 = (1.46 k^2 C_n^2 L)^{-3/5}`.
//!
//! The synthesis side generates a stationary lognormal intensity factor with
//! a target scintillation index and a mean-reverting (exponentially
//! correlated) Gaussian beam-wander process. The reported measurements give
//! no generative model, so these are the minimal stationary processes that
//! reproduce the published statistics.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

#[cfg(not(feature = "std"))]
#[allow(unused_imports)]
use num_traits::Float;

use core::f64::consts::PI;

/// Transmitted Gaussian beam and receiver geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BeamParams {
    /// Beam waist radius at the transmitter, meters.
    pub waist_radius: f64,
    /// Optical wavelength, meters.
    pub wavelength: f64,
    /// Link length, meters.
    pub link_length: f64,
    /// Receiver aperture diameter, meters.
    pub aperture_diameter: f64,
}

impl BeamParams {
    /// Validate that all geometric parameters are strictly positive.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("waist_radius", self.waist_radius),
            ("wavelength", self.wavelength),
            ("link_length", self.link_length),
            ("aperture_diameter", self.aperture_diameter),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(alloc::format!(
                    "beam parameter {name} must be strictly positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Rayleigh range `pi w0^2 / lambda`.
    pub fn rayleigh_range(&self) -> f64 {
        PI * self.waist_radius * self.waist_radius / self.wavelength
    }
}

/// Vacuum Gaussian beam radius at distance `z` from the waist:
/// `w(z) = w0 sqrt(1 + (z lambda / (pi w0^2))^2)`.
///
/// ```
/// use fsqkd_core::channel::{beam_radius, BeamParams};
///
/// // a 7 mm waist at 1550 nm quintuples over 500 m
/// let beam = BeamParams {
///     waist_radius: 7.0e-3,
///     wavelength: 1550.0e-9,
///     link_length: 500.0,
///     aperture_diameter: 35.0e-3,
/// };
/// assert!((beam_radius(500.0, &beam) - 35.93e-3).abs() < 1e-4);
/// ```
pub fn beam_radius(z: f64, beam: &BeamParams) -> f64 {
    let ratio = z / beam.rayleigh_range();
    beam.waist_radius * (1.0 + ratio * ratio).sqrt()
}

/// Fraction of a centered Gaussian beam's power passing a circular aperture:
/// `T = 1 - exp(-D^2 / (2 w^2))`.
pub fn aperture_transmission(beam_radius: f64, aperture_diameter: f64) -> f64 {
    1.0 - (-aperture_diameter * aperture_diameter / (2.0 * beam_radius * beam_radius)).exp()
}

/// Population mean and variance in the two-pass form, which avoids the
/// catastrophic cancellation of `<I^2> - <I>^2` at the tiny relative
/// variances of weak turbulence. A bit-constant sample set short-circuits
/// to exactly zero variance.
fn sample_stats(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::statistic("need at least two intensity samples"));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if !(mean > 0.0) {
        return Err(Error::statistic("intensity mean must be positive"));
    }
    let first = samples[0];
    if samples.iter().all(|&x| x == first) {
        return Ok((mean, 0.0));
    }
    let variance = samples
        .iter()
        .map(|x| {
            let d = x - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    Ok((mean, variance))
}

/// Scintillation index estimate `<I^2>/<I>^2 - 1`, evaluated as the
/// population variance over the squared mean.
pub fn scintillation_index(samples: &[f64]) -> Result<f64> {
    let (mean, variance) = sample_stats(samples)?;
    Ok(variance / (mean * mean))
}

/// Log-intensity variance `ln(1 + sigma^2/mu^2)`.
///
/// Uses the same population moments as [`scintillation_index`], so
/// `log_intensity_variance(s) == ln(1 + scintillation_index(s))` exactly.
pub fn log_intensity_variance(samples: &[f64]) -> Result<f64> {
    Ok((1.0 + scintillation_index(samples)?).ln())
}

/// Structure parameter from a scintillation index measured on a horizontal
/// path: `C_n^2 = ln(1 + sigma_I^2) / (0.496 k^{7/6} L^{11/6})`.
pub fn cn2_from_scintillation(sigma_i2: f64, wavelength: f64, link_length: f64) -> f64 {
    let k = 2.0 * PI / wavelength;
    (1.0 + sigma_i2).ln() / (0.496 * k.powf(7.0 / 6.0) * link_length.powf(11.0 / 6.0))
}

/// Structure parameter estimated from intensity samples.
pub fn cn2_from_samples(samples: &[f64], wavelength: f64, link_length: f64) -> Result<f64> {
    if !(wavelength > 0.0 && link_length > 0.0) {
        return Err(Error::config("wavelength and link length must be positive"));
    }
    Ok(cn2_from_scintillation(
        scintillation_index(samples)?,
        wavelength,
        link_length,
    ))
}

/// Fried parameter of a horizontal link: `r0 = (1.46 k^2 C_n^2 L)^{-3/5}`.
///
/// `cn2 == 0` means an unbounded diffraction-limited aperture; that case is
/// reported as [`Error::InfiniteResolution`] instead of a numeric infinity.
pub fn fried_parameter(cn2: f64, wavelength: f64, link_length: f64) -> Result<f64> {
    if !(wavelength > 0.0 && link_length > 0.0 && cn2 >= 0.0) {
        return Err(Error::config(
            "fried parameter needs cn2 >= 0 and positive wavelength/length",
        ));
    }
    if cn2 == 0.0 {
        return Err(Error::InfiniteResolution(String::from(
            "zero structure parameter implies an unbounded Fried parameter",
        )));
    }
    let k = 2.0 * PI / wavelength;
    Ok((1.46 * k * k * cn2 * link_length).powf(-3.0 / 5.0))
}

/// Turbulence strength regime by scintillation index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum TurbulenceRegime {
    /// Weak irradiance fluctuations, `sigma_I^2 < 1`.
    Weak,
    /// Moderate-to-strong irradiance fluctuations, `sigma_I^2 >= 1`.
    ModerateToStrong,
}

/// Classify the fluctuation regime: weak iff `sigma_I^2 < 1`.
pub fn classify_regime(sigma_i2: f64) -> TurbulenceRegime {
    if sigma_i2 < 1.0 {
        TurbulenceRegime::Weak
    } else {
        TurbulenceRegime::ModerateToStrong
    }
}

/// Parameters of the synthesized turbulence processes.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TurbulenceParams {
    /// Structure parameter carried for reporting, m^(-2/3).
    pub cn2: f64,
    /// Target scintillation index of the intensity factor.
    pub target_scintillation: f64,
    /// Stationary standard deviation of the beam-wander x axis, meters
    /// (focal-plane equivalent).
    pub wander_std: f64,
    /// Ratio of the y-axis wander deviation to the x axis. Horizontal and
    /// vertical wander differ in the field data; 1.0 means isotropic.
    pub wander_aniso: f64,
    /// Correlation time of the wander process, seconds. Infinite freezes the
    /// offsets; zero makes them independent sample to sample.
    pub wander_corr_time: f64,
    /// Mean of the transmittance series. The harness sets this to the link
    /// budget's linear transmission; it must leave headroom so the [0, 1]
    /// clamp stays inactive at weak-turbulence fluctuation levels.
    pub mean_level: f64,
}

impl Default for TurbulenceParams {
    fn default() -> Self {
        TurbulenceParams {
            cn2: 0.0,
            target_scintillation: 0.0,
            wander_std: 0.0,
            wander_aniso: 1.0,
            wander_corr_time: f64::INFINITY,
            mean_level: 0.5,
        }
    }
}

/// Time-indexed channel transmittance and two-axis beam-offset samples.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TransmittanceSeries {
    /// Sample spacing, seconds.
    pub dt: f64,
    /// Channel transmittance per sample, clamped to [0, 1].
    pub transmittance: Vec<f64>,
    /// Beam centroid offset along x, meters.
    pub offset_x: Vec<f64>,
    /// Beam centroid offset along y, meters.
    pub offset_y: Vec<f64>,
}

impl TransmittanceSeries {
    /// Number of samples.
    pub fn len(&self) -> usize {
        self.transmittance.len()
    }

    /// True when the series holds no samples.
    pub fn is_empty(&self) -> bool {
        self.transmittance.is_empty()
    }
}

/// Synthesize a stationary turbulence realization.
///
/// The intensity factor is lognormal around `mean_level` with the requested
/// scintillation index (log-variance `ln(1 + sigma_I^2)`, mean-preserving).
/// Offsets follow a mean-reverting Gaussian process with stationary
/// deviation `wander_std` (x axis; scaled by `wander_aniso` on y) and
/// exponential autocorrelation `exp(-dt/tau)`.
///
/// Draw order per sample is fixed (intensity, x, y) so series are
/// reproducible for a given stream.
pub fn synthesize_turbulence(
    params: &TurbulenceParams,
    duration: f64,
    dt: f64,
    rng: &mut impl Rng,
) -> Result<TransmittanceSeries> {
    if !(dt > 0.0 && duration > dt) {
        return Err(Error::config("need duration > dt > 0"));
    }
    if !(params.target_scintillation >= 0.0) {
        return Err(Error::config("target scintillation must be >= 0"));
    }
    if !(params.mean_level > 0.0 && params.mean_level <= 1.0) {
        return Err(Error::config("mean transmittance level must lie in (0, 1]"));
    }
    if !(params.wander_std >= 0.0 && params.wander_aniso >= 0.0) {
        return Err(Error::config("wander parameters must be non-negative"));
    }
    if params.wander_corr_time < 0.0 {
        return Err(Error::config("wander correlation time must be >= 0"));
    }

    let n = ((duration / dt).round() as usize).max(1);
    // Mean-preserving lognormal: exp(g*s - s^2/2) has unit mean.
    let log_var = (1.0 + params.target_scintillation).ln();
    let log_std = log_var.sqrt();
    // AR(1) coefficient; exp(-dt/inf) = 1 freezes the process.
    let a = (-dt / params.wander_corr_time).exp();
    let innovation = (1.0 - a * a).max(0.0).sqrt();
    let sigma = [params.wander_std, params.wander_std * params.wander_aniso];

    let mut transmittance = Vec::with_capacity(n);
    let mut offset_x = Vec::with_capacity(n);
    let mut offset_y = Vec::with_capacity(n);
    let mut state = [0.0f64; 2];
    for i in 0..n {
        let g: f64 = StandardNormal.sample(rng);
        let factor = (g * log_std - 0.5 * log_var).exp();
        transmittance.push((params.mean_level * factor).clamp(0.0, 1.0));
        for axis in 0..2 {
            let g: f64 = StandardNormal.sample(rng);
            state[axis] = if i == 0 {
                g * sigma[axis]
            } else {
                a * state[axis] + innovation * sigma[axis] * g
            };
        }
        offset_x.push(state[0]);
        offset_y.push(state[1]);
    }

    Ok(TransmittanceSeries {
        dt,
        transmittance,
        offset_x,
        offset_y,
    })
}

/// Named loss components of the static link budget, dB.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LinkBudget {
    /// Component label -> loss in dB. Every component must be >= 0.
    pub components: BTreeMap<String, f64>,
}

impl LinkBudget {
    /// Build a budget from labeled dB components.
    pub fn from_components<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut components = BTreeMap::new();
        for (label, db) in entries {
            let label = label.into();
            if !(db >= 0.0 && db.is_finite()) {
                return Err(Error::Config(alloc::format!(
                    "budget component {label} must be a non-negative dB value, got {db}"
                )));
            }
            components.insert(label, db);
        }
        Ok(LinkBudget { components })
    }

    /// Total loss, dB.
    pub fn total_db(&self) -> f64 {
        self.components.values().sum()
    }

    /// Linear transmission `10^(-total/10)`.
    pub fn linear(&self) -> f64 {
        10f64.powf(-self.total_db() / 10.0)
    }
}

/// Convert a dB loss to linear transmission.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(-db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stage_rng;

    fn reference_beam() -> BeamParams {
        BeamParams {
            waist_radius: 7.0e-3,
            wavelength: 1550.0e-9,
            link_length: 500.0,
            aperture_diameter: 35.0e-3,
        }
    }

    #[test]
    fn beam_radius_at_waist_is_w0() {
        assert_eq!(beam_radius(0.0, &reference_beam()), 7.0e-3);
    }

    #[test]
    fn beam_expands_to_published_radius_at_500m() {
        // 7 mm waist at 1550 nm reaches ~35 mm after 500 m
        let w = beam_radius(500.0, &reference_beam());
        assert!((w - 35.0e-3).abs() < 1.0e-3, "w(500 m) = {w}");
    }

    #[test]
    fn beam_radius_far_field_asymptote() {
        let beam = reference_beam();
        let z = 100.0 * beam.rayleigh_range();
        let asymptote = z * beam.wavelength / (PI * beam.waist_radius);
        let w = beam_radius(z, &beam);
        assert!((w - asymptote).abs() / asymptote < 0.01);
    }

    #[test]
    fn beam_radius_is_monotone() {
        let beam = reference_beam();
        let mut prev = beam_radius(0.0, &beam);
        for i in 1..200 {
            let w = beam_radius(i as f64 * 10.0, &beam);
            assert!(w > prev);
            prev = w;
        }
    }

    /// Polar Simpson quadrature of the Gaussian intensity over the aperture
    /// disk; independent oracle for the closed form.
    fn aperture_oracle(beam_radius: f64, aperture_diameter: f64) -> f64 {
        let r_max = aperture_diameter / 2.0;
        let n = 20_001; // odd for Simpson
        let h = r_max / (n - 1) as f64;
        let intensity =
            |r: f64| (2.0 / (PI * beam_radius * beam_radius)) * (-2.0 * r * r / (beam_radius * beam_radius)).exp();
        let mut sum = 0.0;
        for i in 0..n {
            let r = i as f64 * h;
            let weight = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            sum += weight * intensity(r) * 2.0 * PI * r;
        }
        sum * h / 3.0
    }

    #[test]
    fn aperture_transmission_matches_quadrature_oracle() {
        // equal beam radius and aperture diameter: the published undersized
        // optics condition, about 4.05 dB of truncation loss
        let t = aperture_transmission(35.0e-3, 35.0e-3);
        assert!((t - 0.3935).abs() < 1.0e-4, "t = {t}");
        let oracle = aperture_oracle(35.0e-3, 35.0e-3);
        assert!((t - oracle).abs() < 1.0e-6, "closed form {t} vs oracle {oracle}");
        let loss_db = -10.0 * t.log10();
        assert!((loss_db - 4.05).abs() < 0.01);

        for (w, d) in [(0.02, 0.01), (0.035, 0.07), (0.01, 0.03)] {
            let closed = aperture_transmission(w, d);
            let oracle = aperture_oracle(w, d);
            assert!((closed - oracle).abs() < 1.0e-6, "w={w} d={d}");
        }
    }

    #[test]
    fn aperture_transmission_limits_and_monotonicity() {
        let w = 0.035;
        assert!((aperture_transmission(w, 100.0 * w) - 1.0).abs() < 1e-10);
        let mut prev = 0.0;
        for i in 1..100 {
            let t = aperture_transmission(w, i as f64 * 1e-3);
            assert!(t > prev && t < 1.0);
            prev = t;
        }
    }

    #[test]
    fn scintillation_of_constant_samples_is_zero() {
        let samples = alloc::vec![0.7; 100];
        assert_eq!(scintillation_index(&samples).unwrap(), 0.0);
        assert_eq!(log_intensity_variance(&samples).unwrap(), 0.0);
    }

    #[test]
    fn scintillation_rejects_degenerate_input() {
        assert!(scintillation_index(&[1.0]).is_err());
        assert!(scintillation_index(&alloc::vec![0.0; 10]).is_err());
        assert!(scintillation_index(&[-1.0, -2.0]).is_err());
    }

    #[test]
    fn scintillation_of_lognormal_samples_matches_moment_identity() {
        // lognormal with log-variance ln(1.0002) has sigma_I^2 = 2.0e-4
        let log_var = 1.0002f64.ln();
        let log_std = log_var.sqrt();
        let mut rng = stage_rng(11, "lognormal", 0);
        let samples: Vec<f64> = (0..1_000_000)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                (g * log_std - 0.5 * log_var).exp()
            })
            .collect();
        let si = scintillation_index(&samples).unwrap();
        assert!((si - 2.0e-4).abs() < 2.0e-5, "sigma_I^2 = {si}");
    }

    #[test]
    fn log_intensity_variance_series_expansion() {
        // for x = 2.12e-4, ln(1+x) = 2.1198e-4 to the displayed precision
        let x = 2.12e-4f64;
        let ln1px = (1.0 + x).ln();
        assert!((ln1px - 2.1198e-4).abs() < 5e-9);
        // identity with the scintillation estimator on an arbitrary sample set
        let samples = [0.9, 1.1, 1.05, 0.95, 1.0, 1.02];
        let lhs = log_intensity_variance(&samples).unwrap();
        let rhs = (1.0 + scintillation_index(&samples).unwrap()).ln();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn cn2_matches_published_500m_value() {
        // sigma_I^2 = 2.12e-4 at 1310 nm over 500 m gives 7.71e-17 m^(-2/3)
        let cn2 = cn2_from_scintillation(2.12e-4, 1310.0e-9, 500.0);
        assert!(
            (cn2 - 7.71e-17).abs() / 7.71e-17 < 0.03,
            "cn2 = {cn2:.3e}"
        );
    }

    #[test]
    fn cn2_length_scaling_law() {
        let base = cn2_from_scintillation(1e-4, 1310.0e-9, 500.0);
        let doubled = cn2_from_scintillation(1e-4, 1310.0e-9, 1000.0);
        let ratio = doubled / base;
        let expected = 2f64.powf(-11.0 / 6.0);
        assert!((ratio - expected).abs() < 1e-12);
    }

    #[test]
    fn cn2_of_zero_variance_samples_is_zero() {
        let samples = alloc::vec![0.4; 64];
        assert_eq!(cn2_from_samples(&samples, 1310e-9, 500.0).unwrap(), 0.0);
    }

    #[test]
    fn fried_parameter_matches_published_500m_value() {
        let r0 = fried_parameter(7.71e-17, 1310.0e-9, 500.0).unwrap();
        assert!((r0 - 0.85).abs() / 0.85 < 0.02, "r0 = {r0}");
    }

    #[test]
    fn fried_parameter_power_law_and_weak_classification() {
        let r0 = fried_parameter(1e-16, 1310e-9, 500.0).unwrap();
        let r0_double = fried_parameter(2e-16, 1310e-9, 500.0).unwrap();
        assert!((r0_double / r0 - 2f64.powf(-0.6)).abs() < 1e-12);

        // both published channels keep r0 above the 35 mm aperture
        let aperture = 3.5e-2;
        let r0_500 = fried_parameter(7.71e-17, 1310e-9, 500.0).unwrap();
        let r0_50 = fried_parameter(2.3e-18, 1310e-9, 50.0).unwrap();
        assert!(r0_500 > aperture && r0_50 > aperture);
    }

    #[test]
    fn fried_parameter_flags_zero_turbulence() {
        assert!(matches!(
            fried_parameter(0.0, 1310e-9, 500.0),
            Err(Error::InfiniteResolution(_))
        ));
    }

    #[test]
    fn fried_estimate_shrinks_with_sample_variance() {
        // the composed estimator chain is monotone: noisier intensity
        // samples imply a smaller coherence length
        let mut rng = stage_rng(29, "turbulence", 1);
        let mut previous = f64::INFINITY;
        for scale in [0.5e-2, 1.0e-2, 2.0e-2, 4.0e-2] {
            let samples: Vec<f64> = (0..200_000)
                .map(|_| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    1.0 + scale * g
                })
                .collect();
            let cn2 = cn2_from_samples(&samples, 1310e-9, 500.0).unwrap();
            let r0 = fried_parameter(cn2, 1310e-9, 500.0).unwrap();
            assert!(r0 < previous, "r0 {r0} did not shrink at scale {scale}");
            previous = r0;
        }
    }

    #[test]
    fn regime_classification_boundaries() {
        assert_eq!(classify_regime(3.1e-5), TurbulenceRegime::Weak);
        assert_eq!(classify_regime(0.0), TurbulenceRegime::Weak);
        assert_eq!(classify_regime(1.0), TurbulenceRegime::ModerateToStrong);
    }

    #[test]
    fn synthesis_round_trips_the_scintillation_target() {
        let params = TurbulenceParams {
            target_scintillation: 2.12e-4,
            wander_std: 53.0e-6,
            wander_corr_time: 20.0e-3,
            ..TurbulenceParams::default()
        };
        let mut rng = stage_rng(21, "turbulence", 0);
        let series = synthesize_turbulence(&params, 1000.0, 1e-3, &mut rng).unwrap();
        assert_eq!(series.len(), 1_000_000);
        let si = scintillation_index(&series.transmittance).unwrap();
        assert!(
            (si - 2.12e-4).abs() / 2.12e-4 < 0.1,
            "synthesized sigma_I^2 = {si:.3e}"
        );
        let n = series.len() as f64;
        let var_x = series.offset_x.iter().map(|x| x * x).sum::<f64>() / n;
        let std_x = var_x.sqrt();
        assert!(
            (std_x - 53.0e-6).abs() / 53.0e-6 < 0.1,
            "wander std = {std_x:.3e}"
        );
        for t in &series.transmittance {
            assert!((0.0..=1.0).contains(t));
        }
    }

    #[test]
    fn synthesis_anisotropy_scales_the_y_axis() {
        let params = TurbulenceParams {
            target_scintillation: 1e-4,
            wander_std: 80.0e-6,
            wander_aniso: 0.5,
            wander_corr_time: 10.0e-3,
            ..TurbulenceParams::default()
        };
        let mut rng = stage_rng(22, "turbulence", 0);
        let series = synthesize_turbulence(&params, 300.0, 1e-3, &mut rng).unwrap();
        let n = series.len() as f64;
        let std_y = (series.offset_y.iter().map(|y| y * y).sum::<f64>() / n).sqrt();
        assert!((std_y - 40.0e-6).abs() / 40.0e-6 < 0.1, "std_y = {std_y:.3e}");
    }

    #[test]
    fn infinite_correlation_time_freezes_the_offsets() {
        let params = TurbulenceParams {
            target_scintillation: 1e-4,
            wander_std: 50.0e-6,
            wander_corr_time: f64::INFINITY,
            ..TurbulenceParams::default()
        };
        let mut rng = stage_rng(23, "turbulence", 0);
        let series = synthesize_turbulence(&params, 1.0, 1e-3, &mut rng).unwrap();
        let first = (series.offset_x[0], series.offset_y[0]);
        for i in 1..series.len() {
            assert_eq!((series.offset_x[i], series.offset_y[i]), first);
        }
    }

    #[test]
    fn synthesis_rejects_bad_configurations() {
        let mut rng = stage_rng(24, "turbulence", 0);
        let params = TurbulenceParams::default();
        assert!(synthesize_turbulence(&params, 0.5e-3, 1e-3, &mut rng).is_err());
        let bad = TurbulenceParams {
            target_scintillation: -1.0,
            ..TurbulenceParams::default()
        };
        assert!(synthesize_turbulence(&bad, 1.0, 1e-3, &mut rng).is_err());
    }

    #[test]
    fn link_budget_totals_and_linear() {
        let budget = LinkBudget::from_components([
            ("window_glass", 3.0),
            ("smf_coupling", 4.0),
        ])
        .unwrap();
        assert_eq!(budget.total_db(), 7.0);
        assert!((budget.linear() - 10f64.powf(-0.7)).abs() < 1e-15);
        assert!(LinkBudget::from_components([("bad", -1.0)]).is_err());
    }
}
