//! Four-quadrant detector readout, PID tip/tilt control, and conversion of
//! residual pointing error into single-mode-fiber coupling efficiency.
//!
//! The controller implements the published recurrences literally: the
//! integral error is the running sum of proportional errors,
//! `e_I(t) = sum_{i<=t} e_P(i)`, and the derivative error is
//! `e_D(t) = e_I(t) - e_I(t-1)`. Note that the second recurrence makes
//! `e_D` algebraically equal to `e_P`, so the derivative gain acts as extra
//! proportional gain; a conventional difference-of-errors derivative is
//! available behind [`DerivativeMode::ErrorDifference`].

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channel::TransmittanceSeries;
use crate::{Error, Result};

#[cfg(not(feature = "std"))]
#[allow(unused_imports)]
use num_traits::Float;

/// Four-quadrant position sensor model.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FqdSensor {
    /// Resolution grid of the reported displacement, meters.
    pub quantization: f64,
    /// Half-range of the sensor, meters; readings clamp here.
    pub range: f64,
    /// Gaussian read-noise deviation added before quantization, meters.
    pub noise_std: f64,
}

impl Default for FqdSensor {
    fn default() -> Self {
        // 0.75 um resolution, 3.05 mm sensor depth
        FqdSensor {
            quantization: 0.75e-6,
            range: 3.05e-3,
            noise_std: 0.0,
        }
    }
}

/// One quantized displacement reading.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FqdReading {
    /// Displacement from the calibrated center along x, meters.
    pub ex: f64,
    /// Displacement from the calibrated center along y, meters.
    pub ey: f64,
    /// Set when either axis exceeded the sensor range and was clamped.
    pub saturated: bool,
}

impl FqdReading {
    /// Radial error magnitude `sqrt(ex^2 + ey^2)`.
    pub fn radial(&self) -> f64 {
        (self.ex * self.ex + self.ey * self.ey).sqrt()
    }
}

/// Measure a true beam offset: read noise, quantization to the resolution
/// grid, and clamping to the sensor range (with a saturation flag).
pub fn fqd_measure(sensor: &FqdSensor, true_offset: [f64; 2], rng: &mut impl Rng) -> FqdReading {
    let mut out = [0.0f64; 2];
    let mut saturated = false;
    for axis in 0..2 {
        let noise: f64 = StandardNormal.sample(rng);
        let raw = true_offset[axis] + sensor.noise_std * noise;
        let quantized = (raw / sensor.quantization).round() * sensor.quantization;
        if quantized.abs() > sensor.range {
            saturated = true;
            out[axis] = sensor.range.copysign(quantized);
        } else {
            out[axis] = quantized;
        }
    }
    FqdReading {
        ex: out[0],
        ey: out[1],
        saturated,
    }
}

/// Per-axis PID gains. Zero gains reproduce the open loop.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PidGains {
    /// Proportional gain.
    pub kp: f64,
    /// Integral gain.
    pub ki: f64,
    /// Derivative gain.
    pub kd: f64,
}

/// Derivative definition used by the controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum DerivativeMode {
    /// Published form `e_D(t) = e_I(t) - e_I(t-1)`; equals `e_P(t)` by the
    /// defining recurrences.
    #[default]
    IntegralDifference,
    /// Conventional form `e_D(t) = e_P(t) - e_P(t-1)`.
    ErrorDifference,
}

/// Controller state after an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PidState {
    /// Proportional error of the latest iteration, meters.
    pub e_p: [f64; 2],
    /// Integral error: running sum of proportional errors, meters.
    pub e_i: [f64; 2],
    /// Derivative error of the latest iteration, meters.
    pub e_d: [f64; 2],
    /// Number of completed iterations.
    pub iteration: u64,
}

/// One controller iteration.
///
/// Updates the error recurrences from the reading and returns the actuation
/// `-(kp e_P + ki e_I + kd e_D)` per axis together with the next state.
pub fn pid_step(
    state: &PidState,
    gains: &PidGains,
    mode: DerivativeMode,
    reading: &FqdReading,
) -> Result<([f64; 2], PidState)> {
    if !(reading.ex.is_finite() && reading.ey.is_finite()) {
        return Err(Error::data("controller fault: non-finite FQD reading"));
    }
    let e_p = [reading.ex, reading.ey];
    let mut next = PidState {
        e_p,
        e_i: [0.0; 2],
        e_d: [0.0; 2],
        iteration: state.iteration + 1,
    };
    let mut actuation = [0.0f64; 2];
    for axis in 0..2 {
        next.e_i[axis] = state.e_i[axis] + e_p[axis];
        next.e_d[axis] = match mode {
            DerivativeMode::IntegralDifference => next.e_i[axis] - state.e_i[axis],
            DerivativeMode::ErrorDifference => e_p[axis] - state.e_p[axis],
        };
        actuation[axis] =
            -(gains.kp * e_p[axis] + gains.ki * next.e_i[axis] + gains.kd * next.e_d[axis]);
    }
    Ok((actuation, next))
}

/// Gaussian mode-overlap coupling efficiency
/// `eta = exp(-(ex^2 + ey^2) / mode_radius^2)`.
pub fn coupling_efficiency(offset: [f64; 2], mode_radius: f64) -> f64 {
    debug_assert!(mode_radius > 0.0);
    (-(offset[0] * offset[0] + offset[1] * offset[1]) / (mode_radius * mode_radius)).exp()
}

/// First-order tip/tilt mirror response with a slew limit.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MirrorModel {
    /// Time constant of the first-order lag, seconds.
    pub time_constant: f64,
    /// Maximum position change per second, meters/second.
    pub slew_rate: f64,
}

impl Default for MirrorModel {
    fn default() -> Self {
        MirrorModel {
            time_constant: 5.0e-3,
            slew_rate: 0.5, // 0.5 mm per ms step at the default loop rate
        }
    }
}

/// Loop operating mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum LoopMode {
    /// Actuation computed but never applied.
    Open,
    /// Actuation drives the mirror.
    Closed,
}

/// Full tracking-loop configuration.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LoopConfig {
    /// Controller gains.
    pub gains: PidGains,
    /// Derivative definition.
    pub derivative: DerivativeMode,
    /// Mirror dynamics.
    pub mirror: MirrorModel,
    /// Sensor model.
    pub sensor: FqdSensor,
    /// Mode-field radius for the coupling-efficiency map, meters.
    pub mode_radius: f64,
    /// Open or closed loop.
    pub mode: LoopMode,
}

/// One loop iteration of the exported trace.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TracePoint {
    /// Iteration time, seconds.
    pub t: f64,
    /// FQD reading, x, meters.
    pub ex: f64,
    /// FQD reading, y, meters.
    pub ey: f64,
    /// Actuation command, x.
    pub ax: f64,
    /// Actuation command, y.
    pub ay: f64,
    /// Coupling efficiency at the true residual offset.
    pub eta: f64,
}

/// Loop run statistics and trace.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LoopReport {
    /// Mean radial error of the readings, meters.
    pub mean_error: f64,
    /// Standard deviation of the radial error, meters.
    pub std_error: f64,
    /// Operating mode of the run.
    pub mode: LoopMode,
    /// Set when the error exceeded ten times the sensor range and the run
    /// was cut short.
    pub diverged: bool,
    /// Per-iteration trace.
    pub trace: Vec<TracePoint>,
}

/// Run the tracking loop over a synthesized wander series.
///
/// The sensor reads the residual `wander + mirror` each step; in closed mode
/// the actuation command drives the mirror through the first-order response,
/// in open mode the mirror stays parked. Both modes execute the same
/// computations and random draws, so a zero-gain closed loop reproduces the
/// open loop bit for bit on the same stream.
///
/// A diverging loop (residual beyond ten sensor ranges) stops integrating
/// and is reported through [`LoopReport::diverged`] instead of panicking.
pub fn run_loop(
    series: &TransmittanceSeries,
    cfg: &LoopConfig,
    rng: &mut impl Rng,
) -> Result<LoopReport> {
    if series.is_empty() {
        return Err(Error::config("tracking loop needs a non-empty series"));
    }
    if !(cfg.mode_radius > 0.0) {
        return Err(Error::config("mode radius must be positive"));
    }
    let dt = series.dt;
    let lag = 1.0 - (-dt / cfg.mirror.time_constant).exp();
    let max_step = cfg.mirror.slew_rate * dt;
    let divergence_limit = 10.0 * cfg.sensor.range;

    let mut mirror = [0.0f64; 2];
    let mut state = PidState::default();
    let mut trace = Vec::with_capacity(series.len());
    let mut diverged = false;
    let mut sum = 0.0f64;
    let mut sum_sq = 0.0f64;

    for i in 0..series.len() {
        let residual = [
            series.offset_x[i] + mirror[0],
            series.offset_y[i] + mirror[1],
        ];
        let reading = fqd_measure(&cfg.sensor, residual, rng);
        let (actuation, next) = pid_step(&state, &cfg.gains, cfg.derivative, &reading)?;
        state = next;

        if cfg.mode == LoopMode::Closed {
            for axis in 0..2 {
                let step = (actuation[axis] - mirror[axis]) * lag;
                mirror[axis] += step.clamp(-max_step, max_step);
            }
        }

        let radial = reading.radial();
        sum += radial;
        sum_sq += radial * radial;
        trace.push(TracePoint {
            t: i as f64 * dt,
            ex: reading.ex,
            ey: reading.ey,
            ax: actuation[0],
            ay: actuation[1],
            eta: coupling_efficiency(residual, cfg.mode_radius),
        });

        let true_radial = (residual[0] * residual[0] + residual[1] * residual[1]).sqrt();
        if true_radial > divergence_limit {
            diverged = true;
            break;
        }
    }

    let n = trace.len() as f64;
    let mean = sum / n;
    let variance = (sum_sq / n - mean * mean).max(0.0);
    Ok(LoopReport {
        mean_error: mean,
        std_error: variance.sqrt(),
        mode: cfg.mode,
        diverged,
        trace,
    })
}

/// Exhaustive grid search for loop gains minimizing the mean radial error.
///
/// Runs the closed loop over every `(kp, ki)` pair for each seed and returns
/// the gains with the lowest seed-averaged mean error. Used to produce the
/// tuned defaults stored in the scenario presets.
pub fn grid_search_gains(
    series_for_seed: impl Fn(u64) -> TransmittanceSeries,
    base: &LoopConfig,
    kp_grid: &[f64],
    ki_grid: &[f64],
    seeds: core::ops::Range<u64>,
) -> (PidGains, f64) {
    let mut best = (PidGains::default(), f64::INFINITY);
    for &kp in kp_grid {
        for &ki in ki_grid {
            let gains = PidGains { kp, ki, kd: 0.0 };
            let mut total = 0.0;
            let mut count = 0u32;
            for seed in seeds.clone() {
                let series = series_for_seed(seed);
                let cfg = LoopConfig {
                    gains,
                    mode: LoopMode::Closed,
                    ..base.clone()
                };
                let mut rng = crate::rng::stage_rng(seed, "tracking", 0);
                if let Ok(report) = run_loop(&series, &cfg, &mut rng) {
                    if report.diverged {
                        total = f64::INFINITY;
                        break;
                    }
                    total += report.mean_error;
                    count += 1;
                }
            }
            if count > 0 && total / f64::from(count) < best.1 {
                best = (gains, total / f64::from(count));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{synthesize_turbulence, TurbulenceParams};
    use crate::rng::stage_rng;

    fn no_noise_sensor() -> FqdSensor {
        FqdSensor::default()
    }

    #[test]
    fn fqd_zero_offset_reads_zero() {
        let mut rng = stage_rng(1, "fqd", 0);
        let r = fqd_measure(&no_noise_sensor(), [0.0, 0.0], &mut rng);
        assert_eq!((r.ex, r.ey), (0.0, 0.0));
        assert!(!r.saturated);
    }

    #[test]
    fn fqd_quantizes_to_grid() {
        let mut rng = stage_rng(2, "fqd", 0);
        // 1.0 um rounds to the nearest 0.75 um grid point
        let r = fqd_measure(&no_noise_sensor(), [1.0e-6, 0.0], &mut rng);
        assert!((r.ex - 0.75e-6).abs() < 1e-18, "ex = {}", r.ex);
    }

    #[test]
    fn fqd_saturates_at_sensor_depth() {
        let mut rng = stage_rng(3, "fqd", 0);
        let r = fqd_measure(&no_noise_sensor(), [5.0e-3, 0.0], &mut rng);
        assert_eq!(r.ex, 3.05e-3);
        assert!(r.saturated);
        let r = fqd_measure(&no_noise_sensor(), [-5.0e-3, 0.0], &mut rng);
        assert_eq!(r.ex, -3.05e-3);
    }

    #[test]
    fn pid_zero_gains_accumulate_state_without_actuation() {
        let gains = PidGains::default();
        let reading = FqdReading {
            ex: 10.0e-6,
            ey: -4.0e-6,
            saturated: false,
        };
        let (a, next) = pid_step(
            &PidState::default(),
            &gains,
            DerivativeMode::IntegralDifference,
            &reading,
        )
        .unwrap();
        assert_eq!(a, [0.0, 0.0]);
        assert_eq!(next.e_i, [10.0e-6, -4.0e-6]);
        assert_eq!(next.iteration, 1);
    }

    #[test]
    fn pid_pure_proportional_inverts_the_reading() {
        let gains = PidGains {
            kp: 1.0,
            ki: 0.0,
            kd: 0.0,
        };
        let reading = FqdReading {
            ex: 10.0e-6,
            ey: 0.0,
            saturated: false,
        };
        let (a, _) = pid_step(
            &PidState::default(),
            &gains,
            DerivativeMode::IntegralDifference,
            &reading,
        )
        .unwrap();
        assert!((a[0] + 10.0e-6).abs() < 1e-20);
        assert_eq!(a[1], 0.0);
    }

    #[test]
    fn pid_rejects_non_finite_readings() {
        let reading = FqdReading {
            ex: f64::NAN,
            ey: 0.0,
            saturated: false,
        };
        assert!(pid_step(
            &PidState::default(),
            &PidGains::default(),
            DerivativeMode::IntegralDifference,
            &reading
        )
        .is_err());
    }

    #[test]
    fn literal_derivative_equals_proportional_error() {
        // e_D(t) = e_I(t) - e_I(t-1) recovers e_P(t) up to summation rounding
        let mut rng = stage_rng(4, "pid", 0);
        let mut state = PidState::default();
        for _ in 0..10_000 {
            let reading = FqdReading {
                ex: (rng.random::<f64>() - 0.5) * 200.0e-6,
                ey: (rng.random::<f64>() - 0.5) * 200.0e-6,
                saturated: false,
            };
            let (_, next) = pid_step(
                &state,
                &PidGains::default(),
                DerivativeMode::IntegralDifference,
                &reading,
            )
            .unwrap();
            for axis in 0..2 {
                let rel = (next.e_d[axis] - next.e_p[axis]).abs()
                    / next.e_p[axis].abs().max(1e-12);
                assert!(rel < 1e-9, "e_D deviates from e_P by {rel}");
            }
            state = next;
        }
    }

    #[test]
    fn conventional_derivative_differences_the_errors() {
        let r1 = FqdReading {
            ex: 5.0e-6,
            ey: 0.0,
            saturated: false,
        };
        let r2 = FqdReading {
            ex: 2.0e-6,
            ey: 0.0,
            saturated: false,
        };
        let (_, s1) = pid_step(
            &PidState::default(),
            &PidGains::default(),
            DerivativeMode::ErrorDifference,
            &r1,
        )
        .unwrap();
        let (_, s2) = pid_step(&s1, &PidGains::default(), DerivativeMode::ErrorDifference, &r2)
            .unwrap();
        assert!((s2.e_d[0] - (2.0e-6 - 5.0e-6)).abs() < 1e-20);
    }

    #[test]
    fn integral_state_is_exact_running_sum() {
        let mut rng = stage_rng(5, "pid", 1);
        let mut state = PidState::default();
        let mut sum = [0.0f64; 2];
        for _ in 0..1000 {
            let reading = FqdReading {
                ex: (rng.random::<f64>() - 0.5) * 1e-4,
                ey: (rng.random::<f64>() - 0.5) * 1e-4,
                saturated: false,
            };
            let (_, next) = pid_step(
                &state,
                &PidGains::default(),
                DerivativeMode::IntegralDifference,
                &reading,
            )
            .unwrap();
            sum[0] += reading.ex;
            sum[1] += reading.ey;
            assert_eq!(next.e_i, sum);
            state = next;
        }
    }

    #[test]
    fn coupling_efficiency_profile() {
        assert_eq!(coupling_efficiency([0.0, 0.0], 100e-6), 1.0);
        let at_mode_radius = coupling_efficiency([100e-6, 0.0], 100e-6);
        assert!((at_mode_radius - (-1.0f64).exp()).abs() < 1e-15);
        // radially symmetric
        let a = coupling_efficiency([60e-6, 80e-6], 150e-6);
        let b = coupling_efficiency([100e-6, 0.0], 150e-6);
        assert!((a - b).abs() < 1e-15);
        // strictly decreasing in |offset|
        let mut prev = 1.0;
        for i in 1..50 {
            let eta = coupling_efficiency([i as f64 * 5e-6, 0.0], 150e-6);
            assert!(eta < prev);
            prev = eta;
        }
    }

    fn wander_series(seed: u64) -> TransmittanceSeries {
        let params = TurbulenceParams {
            target_scintillation: 2.12e-4,
            wander_std: 95.0e-6,
            wander_aniso: 0.52,
            wander_corr_time: 20.0e-3,
            ..TurbulenceParams::default()
        };
        synthesize_turbulence(&params, 4.0, 1e-3, &mut stage_rng(seed, "turbulence", 0)).unwrap()
    }

    fn loop_config(mode: LoopMode, gains: PidGains) -> LoopConfig {
        LoopConfig {
            gains,
            derivative: DerivativeMode::IntegralDifference,
            mirror: MirrorModel::default(),
            sensor: FqdSensor::default(),
            mode_radius: 160.0e-6,
            mode,
        }
    }

    #[test]
    fn zero_gain_closed_loop_matches_open_loop_bit_for_bit() {
        let series = wander_series(17);
        let open = run_loop(
            &series,
            &loop_config(LoopMode::Open, PidGains::default()),
            &mut stage_rng(17, "tracking", 0),
        )
        .unwrap();
        let closed = run_loop(
            &series,
            &loop_config(LoopMode::Closed, PidGains::default()),
            &mut stage_rng(17, "tracking", 0),
        )
        .unwrap();
        assert_eq!(open.trace, closed.trace);
        assert_eq!(open.mean_error, closed.mean_error);
    }

    #[test]
    fn integral_action_removes_constant_offset() {
        // constant wander: steady-state error goes to zero with ki > 0
        let n = 4000;
        let series = TransmittanceSeries {
            dt: 1e-3,
            transmittance: alloc::vec![0.5; n],
            offset_x: alloc::vec![80.0e-6; n],
            offset_y: alloc::vec![-50.0e-6; n],
        };
        let gains = PidGains {
            kp: 0.4,
            ki: 0.3,
            kd: 0.0,
        };
        let report = run_loop(
            &series,
            &loop_config(LoopMode::Closed, gains),
            &mut stage_rng(18, "tracking", 0),
        )
        .unwrap();
        assert!(!report.diverged);
        let tail = &report.trace[n - 500..];
        let mean_tail = tail.iter().map(|p| (p.ex * p.ex + p.ey * p.ey).sqrt()).sum::<f64>()
            / tail.len() as f64;
        // discrete-time steady-state analysis: integral action drives the
        // error to zero; the floor left over is the quantization grid
        assert!(
            mean_tail < 0.01 * (80.0e-6f64.hypot(-50.0e-6)),
            "steady-state error {mean_tail:.3e}"
        );
    }

    #[test]
    fn diverging_loop_reports_instead_of_crashing() {
        let series = wander_series(19);
        let gains = PidGains {
            kp: -400.0,
            ki: 0.0,
            kd: 0.0,
        };
        let report = run_loop(
            &series,
            &loop_config(LoopMode::Closed, gains),
            &mut stage_rng(19, "tracking", 0),
        )
        .unwrap();
        assert!(report.diverged);
        assert!(report.trace.len() < series.len());
    }

    #[test]
    fn mean_coupling_matches_the_gaussian_overlap_expectation() {
        // budget arithmetic oracle: for zero-mean Gaussian offsets the mean
        // coupling is 1/sqrt((1 + 2 sx^2/w^2)(1 + 2 sy^2/w^2))
        let (sx, sy, w) = (95.0e-6, 95.0e-6 * 0.52, 160.0e-6);
        let params = TurbulenceParams {
            target_scintillation: 2.12e-4,
            wander_std: sx,
            wander_aniso: 0.52,
            wander_corr_time: 20.0e-3,
            ..TurbulenceParams::default()
        };
        let series =
            synthesize_turbulence(&params, 60.0, 1e-3, &mut stage_rng(31, "turbulence", 0))
                .unwrap();
        let mut cfg = loop_config(LoopMode::Open, PidGains::default());
        cfg.mode_radius = w;
        let report = run_loop(&series, &cfg, &mut stage_rng(31, "tracking", 0)).unwrap();
        let measured = report.trace.iter().map(|p| p.eta).sum::<f64>() / report.trace.len() as f64;
        let expected = 1.0
            / ((1.0 + 2.0 * sx * sx / (w * w)) * (1.0 + 2.0 * sy * sy / (w * w))).sqrt();
        assert!(
            (measured - expected).abs() / expected < 0.03,
            "mean eta {measured:.4} vs overlap expectation {expected:.4}"
        );
    }

    #[test]
    fn kd_acts_as_extra_kp_under_the_literal_derivative() {
        let series = wander_series(20);
        let with_kd = PidGains {
            kp: 0.3,
            ki: 0.2,
            kd: 0.2,
        };
        let folded = PidGains {
            kp: 0.5,
            ki: 0.2,
            kd: 0.0,
        };
        let a = run_loop(
            &series,
            &loop_config(LoopMode::Closed, with_kd),
            &mut stage_rng(20, "tracking", 0),
        )
        .unwrap();
        let b = run_loop(
            &series,
            &loop_config(LoopMode::Closed, folded),
            &mut stage_rng(20, "tracking", 0),
        )
        .unwrap();
        assert!((a.mean_error - b.mean_error).abs() / b.mean_error < 1e-6);
    }
}
