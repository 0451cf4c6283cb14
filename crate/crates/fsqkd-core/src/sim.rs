//! End-to-end Monte Carlo orchestration: turbulence synthesis, tracking,
//! streamed slot-by-slot detection and sifting, and finite-key extraction.
//!
//! A block runs the pipeline
//! `synthesize -> track -> per-slot transmittance -> pulse train -> detect
//! -> sift -> bounds -> key length` with one derived stream per stage, so a
//! report is a pure function of `(scenario, seed)`. The exact engine
//! streams slots through the same shared samplers the staged
//! `generate_pulse_train` / `detect` / `sift` operations use, consuming the
//! stage streams identically (the equivalence is tested). The aggregate
//! engine replaces the slot loop with per-bin Poisson cell counts for the
//! high-loss regime; see [`SimEngine`](crate::scenario::SimEngine).
//!
//! A block accumulates until its sifted key-basis count reaches the
//! finite-key block-size target or the configured duration cap, whichever
//! comes first; the elapsed time entering the key rate is the simulated
//! time actually spent.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::Distribution;

use crate::channel::{self, TransmittanceSeries, TurbulenceRegime};
use crate::detection::{
    sample_slot_detections, ChainSampler, DeadTimeState, DetectionDiagnostics, DetectionEvent,
    SlotIntensity,
};
use crate::keyrate::{self, KeyReport};
use crate::protocol::{self, Basis, Intensity, SiftedTally, TimeBinState};
use crate::rng::stage_rng;
use crate::scenario::{Scenario, SimEngine};
use crate::tracking::{self, LoopMode, LoopReport};
use crate::{Error, Result};

#[cfg(not(feature = "std"))]
#[allow(unused_imports)]
use num_traits::Float;

/// Channel statistics measured on the synthesized realization, evaluated at
/// the beacon wavelength.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChannelStats {
    /// Scintillation index of the transmittance series.
    pub sigma_i2: f64,
    /// Log-intensity variance.
    pub sigma_ln_i2: f64,
    /// Structure parameter, m^(-2/3).
    pub cn2: f64,
    /// Fried parameter, meters; absent when the realization shows no
    /// fluctuation (infinite-resolution case).
    pub fried_m: Option<f64>,
    /// Fluctuation regime.
    pub regime: TurbulenceRegime,
    /// Mean transmittance of the series, dB.
    pub mean_loss_db: f64,
}

/// Compute the statistics chain over intensity samples.
pub fn channel_stats(samples: &[f64], wavelength: f64, link_length: f64) -> Result<ChannelStats> {
    let sigma_i2 = channel::scintillation_index(samples)?;
    let sigma_ln_i2 = channel::log_intensity_variance(samples)?;
    let cn2 = channel::cn2_from_scintillation(sigma_i2, wavelength, link_length);
    let fried_m = match channel::fried_parameter(cn2, wavelength, link_length) {
        Ok(r0) => Some(r0),
        Err(Error::InfiniteResolution(_)) => None,
        Err(e) => return Err(e),
    };
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    Ok(ChannelStats {
        sigma_i2,
        sigma_ln_i2,
        cn2,
        fried_m,
        regime: channel::classify_regime(sigma_i2),
        mean_loss_db: -10.0 * mean.log10(),
    })
}

/// Aggregated tracking statistics of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrackingSummary {
    /// Loop mode.
    pub mode: LoopMode,
    /// Mean radial reading over all blocks, meters.
    pub mean_error_m: f64,
    /// Radial-reading deviation over all blocks, meters.
    pub std_error_m: f64,
    /// Mean coupling efficiency over all blocks.
    pub mean_coupling: f64,
    /// Set when any block's loop diverged.
    pub diverged: bool,
}

/// Merged discard counters of a run. In aggregate mode the dead-time count
/// is the analytic expectation and multi-click discards are not modeled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunDiagnostics {
    /// Slots discarded for carrying more than one detection.
    pub multi_click_slots: u64,
    /// Single detections discarded for basis mismatch or side-bin clicks.
    pub basis_mismatch: u64,
    /// Clicks outside every gating window.
    pub gating_discards: u64,
    /// Clicks suppressed by detector dead time.
    pub dead_time_suppressions: u64,
    /// Accepted dark-count clicks.
    pub dark_counts: u64,
}

/// One analyzed block.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BlockRecord {
    /// Block index.
    pub block: u32,
    /// Finite-key result.
    pub report: KeyReport,
    /// Sifted tally the result was computed from.
    pub tally: SiftedTally,
}

/// Full report of one scenario run; a pure function of (scenario, seed).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunReport {
    /// Echo of the resolved scenario.
    pub scenario: Scenario,
    /// Per-block results.
    pub blocks: Vec<BlockRecord>,
    /// Mean secure key rate over blocks, bits per second.
    pub mean_skr_bps: f64,
    /// Mean key-basis error rate over blocks.
    pub mean_qber_z: f64,
    /// Mean check-basis error rate over blocks.
    pub mean_qber_x: f64,
    /// Interference visibility estimated from the pooled X counts.
    pub visibility_estimate: Option<f64>,
    /// Statistics of the synthesized channel (beacon wavelength).
    pub channel: ChannelStats,
    /// Tracking statistics pooled over blocks.
    pub tracking: TrackingSummary,
    /// Pooled discard counters.
    pub diagnostics: RunDiagnostics,
}

/// One sample of the exported channel trace.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChannelSample {
    /// Absolute time across blocks, seconds.
    pub t_s: f64,
    /// Channel transmittance of the bin.
    pub transmittance: f64,
    /// Beam offset x, meters.
    pub offset_x_m: f64,
    /// Beam offset y, meters.
    pub offset_y_m: f64,
}

/// One row of the exported tracking trace.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrackSample {
    /// Block index.
    pub block: u32,
    /// Absolute time across blocks, seconds.
    pub t_s: f64,
    /// FQD reading x, meters.
    pub ex_m: f64,
    /// FQD reading y, meters.
    pub ey_m: f64,
    /// Actuation x.
    pub ax: f64,
    /// Actuation y.
    pub ay: f64,
    /// Coupling efficiency at the true residual.
    pub eta: f64,
}

/// Report plus the exported traces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    /// JSON-ready run report.
    pub report: RunReport,
    /// Channel realization samples of every block.
    pub channel_trace: Vec<ChannelSample>,
    /// Tracking-loop samples of every block.
    pub tracking_trace: Vec<TrackSample>,
}

struct BlockOutput {
    series: TransmittanceSeries,
    loop_report: LoopReport,
    tally: SiftedTally,
    report: KeyReport,
    diagnostics: RunDiagnostics,
}

/// Common per-block setup: synthesis, tracking, and the per-bin slot
/// transmittance (budget-scaled scintillation times the coupling excursion
/// around the reference condition).
fn block_channel(
    s: &Scenario,
    block: u32,
) -> Result<(TransmittanceSeries, LoopReport, Vec<f64>)> {
    let mut turbulence_params = s.turbulence;
    turbulence_params.mean_level = s.budget.linear();

    let series = channel::synthesize_turbulence(
        &turbulence_params,
        s.run.duration,
        s.dt,
        &mut stage_rng(s.run.seed, "turbulence", block.into()),
    )?;

    let loop_report = tracking::run_loop(
        &series,
        &s.tracking.loop_config(),
        &mut stage_rng(s.run.seed, "tracking", block.into()),
    )?;
    if loop_report.diverged {
        return Err(Error::config(
            "tracking: closed loop diverged; retune the gains",
        ));
    }

    let bin_transmittance: Vec<f64> = series
        .transmittance
        .iter()
        .zip(&loop_report.trace)
        .map(|(t, point)| (t * point.eta / s.tracking.reference_coupling).clamp(0.0, 1.0))
        .collect();

    Ok((series, loop_report, bin_transmittance))
}

fn finish_block(
    s: &Scenario,
    series: TransmittanceSeries,
    loop_report: LoopReport,
    tally: SiftedTally,
    diagnostics: RunDiagnostics,
) -> Result<BlockOutput> {
    let report = keyrate::build_key_report(
        &tally,
        s.source.mu1,
        s.source.mu2,
        s.source.p_mu1,
        &s.finite_key,
        s.analysis.ec_mode,
        s.analysis.bound_mode,
    )?;
    Ok(BlockOutput {
        series,
        loop_report,
        tally,
        report,
        diagnostics,
    })
}

fn run_block(s: &Scenario, block: u32) -> Result<BlockOutput> {
    match s.run.engine {
        SimEngine::SlotExact => run_block_exact(s, block),
        SimEngine::BinAggregate => run_block_aggregate(s, block),
    }
}

fn run_block_exact(s: &Scenario, block: u32) -> Result<BlockOutput> {
    let (series, loop_report, bin_transmittance) = block_channel(s, block)?;

    let slot_period = s.source.slot_period;
    let n_slots = (s.run.duration / slot_period).round() as u64;
    let slots_per_bin = ((s.dt / slot_period).round() as u64).max(1);
    let block_target = s.finite_key.block_nz;

    let sampler = ChainSampler::new(&s.receiver, slot_period)?;
    let receiver_linear = sampler.receiver_linear();
    let mut train_rng = stage_rng(s.run.seed, "train", block.into());
    let mut detect_rng = stage_rng(s.run.seed, "detect", block.into());
    let mut dead = DeadTimeState::default();
    let mut scratch = Vec::with_capacity(8);
    let mut slot_events: Vec<DetectionEvent> = Vec::with_capacity(8);
    let mut detect_diag = DetectionDiagnostics::default();
    let mut tally = SiftedTally::default();

    let mut index = 0u64;
    'bins: for bin_t in &bin_transmittance {
        // per-bin photon statistics, shared arithmetic with the staged path
        let intensities = [
            SlotIntensity::new(s.source.mu1, *bin_t, receiver_linear),
            SlotIntensity::new(s.source.mu2, *bin_t, receiver_linear),
        ];
        for _ in 0..slots_per_bin {
            if index >= n_slots {
                break 'bins;
            }
            let slot = protocol::sample_slot(index, &s.source, &mut train_rng);
            let intensity = match slot.intensity {
                Intensity::Signal => &intensities[0],
                Intensity::Decoy => &intensities[1],
            };
            slot_events.clear();
            sample_slot_detections(
                &sampler,
                index,
                slot.state,
                intensity,
                &mut detect_rng,
                &mut dead,
                &mut scratch,
                &mut detect_diag,
                None,
                &mut |event| slot_events.push(event),
            );
            let outcome = protocol::classify_slot(slot.state, slot.intensity, &slot_events);
            protocol::apply_outcome(&mut tally, outcome);
            index += 1;
        }
        if tally.n_z.total() >= block_target {
            break;
        }
    }
    tally.elapsed = index as f64 * slot_period;

    let diagnostics = RunDiagnostics {
        multi_click_slots: tally.diagnostics.multi_click_slots,
        basis_mismatch: tally.diagnostics.basis_mismatch,
        gating_discards: detect_diag.gating_discards,
        dead_time_suppressions: detect_diag.dead_time_suppressions,
        dark_counts: detect_diag.dark_counts,
    };
    finish_block(s, series, loop_report, tally, diagnostics)
}

/// Poisson draw tolerant of zero and large means.
fn poisson_count(rng: &mut impl Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    if mean < 32.0 {
        u64::from(crate::rng::sample_poisson(rng, mean))
    } else {
        let dist = rand_distr::Poisson::new(mean).expect("positive finite mean");
        dist.sample(rng) as u64
    }
}

/// Per-bin aggregate sampling of the tally cells.
///
/// Valid where per-slot click probabilities are small: every sifted cell
/// (key-basis correct/error, check-basis per port, and the dark-driven
/// variants) is an independent Poisson count with the analytic
/// non-paralyzable dead-time factor `1/(1 + R tau)` applied per detector.
/// Slot-level pile-up (multi-click discards, intra-slot dead-time ordering)
/// is dropped; its share of events is quadratic in the per-slot click
/// probability.
fn run_block_aggregate(s: &Scenario, block: u32) -> Result<BlockOutput> {
    let (series, loop_report, bin_transmittance) = block_channel(s, block)?;

    let slot_period = s.source.slot_period;
    let slots_per_bin = ((s.dt / slot_period).round() as u64).max(1);
    let n_bin = slots_per_bin as f64;
    let block_target = s.finite_key.block_nz;
    let sampler = ChainSampler::new(&s.receiver, slot_period)?;
    let receiver_linear = sampler.receiver_linear();
    let mut rng = stage_rng(s.run.seed, "detect", block.into());

    let p_z = s.source.p_z;
    let p_k = [s.source.p_mu1, 1.0 - s.source.p_mu1];
    let mu = [s.source.mu1, s.source.mu2];
    let flip = sampler.prep_flip();

    let eta = |d: usize| sampler.detector(d).map_or(0.0, |c| c.efficiency);
    let jitter_ok = |d: usize| sampler.jitter_acceptance(d);
    let dead_tau = |d: usize| sampler.detector(d).map_or(0.0, |c| c.dead_time);
    let dark_rate = |d: usize| sampler.detector(d).map_or(0.0, |c| c.dark_rate);

    // interferometer response for each prepared state (phase drift makes it
    // time-dependent only when configured; evaluated per bin)
    let mut tally = SiftedTally::default();
    let mut diagnostics = RunDiagnostics::default();
    let mut bins_used = 0u64;

    for (bin_index, bin_t) in bin_transmittance.iter().enumerate() {
        let t0 = bin_index as f64 * s.dt;
        let survival = bin_t * receiver_linear;
        let table_plus = sampler.response_table(TimeBinState::Plus, t0);
        let table_z = sampler.response_table(TimeBinState::Early, t0);

        // candidate rates per detector (per slot), for the dead-time factor:
        // every photon reaching the detector, gated or not, plus raw darks
        let mut candidate = [0.0f64; 3];
        for k in 0..2 {
            let lambda_x = p_k[k] * mu[k] * survival * 0.5;
            candidate[0] += p_k[k] * mu[k] * survival * 0.5 * eta(0);
            for port in 0..2 {
                let z_sent: f64 = table_z[port].iter().sum();
                let plus_sent: f64 = table_plus[port].iter().sum();
                candidate[1 + port] +=
                    lambda_x * (p_z * z_sent + (1.0 - p_z) * plus_sent) * eta(1 + port);
            }
        }
        let mut dead_factor = [1.0f64; 3];
        for d in 0..3 {
            let rate = candidate[d] / slot_period + dark_rate(d);
            dead_factor[d] = 1.0 / (1.0 + rate * dead_tau(d));
            diagnostics.dead_time_suppressions +=
                (rate * (1.0 - dead_factor[d]) * s.dt) as u64;
        }

        // sifted photon cells, split by intensity
        for k in 0..2 {
            let intensity = if k == 0 {
                Intensity::Signal
            } else {
                Intensity::Decoy
            };
            let base = n_bin * p_k[k] * mu[k] * survival;
            // key basis: sent Z (prob p_z), Z-path split, detector chain
            let z_all = base * p_z * 0.5 * eta(0) * jitter_ok(0) * dead_factor[0];
            let z_err = poisson_count(&mut rng, z_all * flip);
            let z_ok = poisson_count(&mut rng, z_all * (1.0 - flip));
            tally.n_z.add(intensity, z_ok + z_err);
            tally.m_z.add(intensity, z_err);

            // check basis: sent plus, interferometer central bin per port
            let x_base = base * (1.0 - p_z) * 0.5;
            let x1 = poisson_count(
                &mut rng,
                x_base * table_plus[0][1] * eta(1) * jitter_ok(1) * dead_factor[1],
            );
            let x2 = poisson_count(
                &mut rng,
                x_base * table_plus[1][1] * eta(2) * jitter_ok(2) * dead_factor[2],
            );
            tally.n_x.add(intensity, x1 + x2);
            tally.m_x.add(intensity, x1);
        }

        // dark-driven cells: gated darks happen in a random slot, so they
        // split over the sent states and intensities by the source
        // probabilities; the key basis sees half of them as errors
        for k in 0..2 {
            let intensity = if k == 0 {
                Intensity::Signal
            } else {
                Intensity::Decoy
            };
            let z_dark = dark_rate(0) * s.dt * (sampler.gate_coverage(0) / slot_period)
                * p_z
                * p_k[k]
                * dead_factor[0];
            let zd_err = poisson_count(&mut rng, 0.5 * z_dark);
            let zd_ok = poisson_count(&mut rng, 0.5 * z_dark);
            tally.n_z.add(intensity, zd_ok + zd_err);
            tally.m_z.add(intensity, zd_err);
            diagnostics.dark_counts += zd_ok + zd_err;

            for port in 0..2 {
                let central_share = sampler.bin_coverage(1 + port, crate::detection::Bin::Central)
                    / slot_period;
                let x_dark = dark_rate(1 + port)
                    * s.dt
                    * central_share
                    * (1.0 - p_z)
                    * p_k[k]
                    * dead_factor[1 + port];
                let xd = poisson_count(&mut rng, x_dark);
                tally.n_x.add(intensity, xd);
                if port == 0 {
                    tally.m_x.add(intensity, xd);
                }
                diagnostics.dark_counts += xd;
            }
        }

        bins_used += 1;
        if tally.n_z.total() >= block_target {
            break;
        }
    }
    tally.elapsed = bins_used as f64 * s.dt;

    finish_block(s, series, loop_report, tally, diagnostics)
}

/// Run a scenario: `blocks` independent blocks, each with its own derived
/// streams, followed by channel/tracking aggregation. With the `parallel`
/// feature blocks execute concurrently and merge in index order.
pub fn run_scenario(s: &Scenario) -> Result<RunOutput> {
    s.validate().map_err(|e| stage_error("configuration", e))?;

    #[cfg(feature = "parallel")]
    let outputs: Result<Vec<BlockOutput>> = {
        use rayon::prelude::*;
        (0..s.run.blocks)
            .into_par_iter()
            .map(|block| run_block(s, block).map_err(|e| stage_error("block", e)))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let outputs: Result<Vec<BlockOutput>> = (0..s.run.blocks)
        .map(|block| run_block(s, block).map_err(|e| stage_error("block", e)))
        .collect();
    let outputs = outputs?;

    let mut blocks = Vec::with_capacity(outputs.len());
    let mut channel_trace = Vec::new();
    let mut tracking_trace = Vec::new();
    let mut all_transmittance = Vec::new();
    let mut diagnostics = RunDiagnostics::default();
    let mut radial_sum = 0.0f64;
    let mut radial_sq_sum = 0.0f64;
    let mut eta_sum = 0.0f64;
    let mut trace_points = 0u64;
    let mut diverged = false;
    let mut skr_sum = 0.0f64;
    let mut qber_z_sum = 0.0f64;
    let mut qber_x_sum = 0.0f64;
    let mut pooled_x = (0u64, 0u64); // (n_x, m_x)

    for (block, out) in outputs.into_iter().enumerate() {
        let block = block as u32;
        let t_offset = f64::from(block) * s.run.duration;

        for (i, t) in out.series.transmittance.iter().enumerate() {
            channel_trace.push(ChannelSample {
                t_s: t_offset + i as f64 * out.series.dt,
                transmittance: *t,
                offset_x_m: out.series.offset_x[i],
                offset_y_m: out.series.offset_y[i],
            });
        }
        all_transmittance.extend_from_slice(&out.series.transmittance);

        for point in &out.loop_report.trace {
            tracking_trace.push(TrackSample {
                block,
                t_s: t_offset + point.t,
                ex_m: point.ex,
                ey_m: point.ey,
                ax: point.ax,
                ay: point.ay,
                eta: point.eta,
            });
            let r = (point.ex * point.ex + point.ey * point.ey).sqrt();
            radial_sum += r;
            radial_sq_sum += r * r;
            eta_sum += point.eta;
            trace_points += 1;
        }
        diverged |= out.loop_report.diverged;

        diagnostics.multi_click_slots += out.diagnostics.multi_click_slots;
        diagnostics.basis_mismatch += out.diagnostics.basis_mismatch;
        diagnostics.gating_discards += out.diagnostics.gating_discards;
        diagnostics.dead_time_suppressions += out.diagnostics.dead_time_suppressions;
        diagnostics.dark_counts += out.diagnostics.dark_counts;

        skr_sum += out.report.skr_bps;
        qber_z_sum += out.report.qber_z;
        qber_x_sum += out.report.qber_x;
        pooled_x.0 += out.tally.n_x.total();
        pooled_x.1 += out.tally.m_x.total();

        blocks.push(BlockRecord {
            block,
            report: out.report,
            tally: out.tally,
        });
    }

    let channel = channel_stats(
        &all_transmittance,
        s.analysis.beacon_wavelength,
        s.beam.link_length,
    )
    .map_err(|e| stage_error("channel statistics", e))?;

    let n_blocks = f64::from(s.run.blocks);
    let n_points = trace_points as f64;
    let mean_error = radial_sum / n_points;
    let variance = (radial_sq_sum / n_points - mean_error * mean_error).max(0.0);
    let visibility_estimate = if pooled_x.0 > 0 {
        let min = pooled_x.1.min(pooled_x.0 - pooled_x.1);
        let max = pooled_x.0 - min;
        crate::detection::visibility(max, min).ok()
    } else {
        None
    };

    let report = RunReport {
        scenario: s.clone(),
        blocks,
        mean_skr_bps: skr_sum / n_blocks,
        mean_qber_z: qber_z_sum / n_blocks,
        mean_qber_x: qber_x_sum / n_blocks,
        visibility_estimate,
        channel,
        tracking: TrackingSummary {
            mode: s.tracking.mode,
            mean_error_m: mean_error,
            std_error_m: variance.sqrt(),
            mean_coupling: eta_sum / n_points,
            diverged,
        },
        diagnostics,
    };

    Ok(RunOutput {
        report,
        channel_trace,
        tracking_trace,
    })
}

fn stage_error(stage: &str, e: Error) -> Error {
    match e {
        Error::Config(msg) => Error::Config(alloc::format!("{stage}: {msg}")),
        Error::Data(msg) => Error::Data(alloc::format!("{stage}: {msg}")),
        Error::Statistic(msg) => Error::Statistic(alloc::format!("{stage}: {msg}")),
        Error::InfiniteResolution(msg) => {
            Error::InfiniteResolution(alloc::format!("{stage}: {msg}"))
        }
        Error::BoundFailure(msg) => Error::BoundFailure(alloc::format!("{stage}: {msg}")),
    }
}

/// One row of a parameter sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepPoint {
    /// Swept parameter value.
    pub value: f64,
    /// Mean secure key rate, bits per second.
    pub mean_skr_bps: f64,
    /// Mean key-basis error rate.
    pub mean_qber_z: f64,
    /// Mean check-basis error rate.
    pub mean_qber_x: f64,
    /// Pooled sifted key-basis detections.
    pub n_z: u64,
}

/// Sweep one numeric parameter: one full run per value, with point seeds
/// derived from the base seed plus the point index.
pub fn sweep(base: &Scenario, axis: &str, values: &[f64]) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(Error::config("sweep needs at least one value"));
    }
    let scenarios: Result<Vec<Scenario>> = values
        .iter()
        .enumerate()
        .map(|(i, &value)| {
            let mut scenario = base.clone();
            scenario.set_parameter(axis, value)?;
            scenario.run.seed = base.run.seed.wrapping_add(i as u64);
            scenario.name = alloc::format!("{}@{axis}={value}", base.name);
            Ok(scenario)
        })
        .collect();
    let scenarios = scenarios?;

    #[cfg(feature = "parallel")]
    let outputs: Result<Vec<RunOutput>> = {
        use rayon::prelude::*;
        scenarios.par_iter().map(run_scenario).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let outputs: Result<Vec<RunOutput>> = scenarios.iter().map(run_scenario).collect();

    Ok(outputs?
        .into_iter()
        .zip(values)
        .map(|(out, &value)| SweepPoint {
            value,
            mean_skr_bps: out.report.mean_skr_bps,
            mean_qber_z: out.report.mean_qber_z,
            mean_qber_x: out.report.mean_qber_x,
            n_z: out
                .report
                .blocks
                .iter()
                .map(|b| b.tally.n_z.total())
                .sum(),
        })
        .collect())
}

/// Reproduce the leading detection events of one block with the slot-exact
/// sampler, for event export. The captured events are the slot-exact
/// realization of the block's streams regardless of the engine configured
/// for tallying.
pub fn capture_events(
    s: &Scenario,
    block: u32,
    max_events: usize,
) -> Result<Vec<DetectionEvent>> {
    s.validate()?;
    let (_, _, bin_transmittance) = block_channel(s, block)?;
    let slot_period = s.source.slot_period;
    let n_slots = (s.run.duration / slot_period).round() as u64;
    let slots_per_bin = ((s.dt / slot_period).round() as u64).max(1);

    let sampler = ChainSampler::new(&s.receiver, slot_period)?;
    let receiver_linear = sampler.receiver_linear();
    let mut train_rng = stage_rng(s.run.seed, "train", block.into());
    let mut detect_rng = stage_rng(s.run.seed, "detect", block.into());
    let mut dead = DeadTimeState::default();
    let mut scratch = Vec::with_capacity(8);
    let mut detect_diag = DetectionDiagnostics::default();
    let mut events = Vec::with_capacity(max_events);

    let mut index = 0u64;
    'bins: for bin_t in &bin_transmittance {
        let intensities = [
            SlotIntensity::new(s.source.mu1, *bin_t, receiver_linear),
            SlotIntensity::new(s.source.mu2, *bin_t, receiver_linear),
        ];
        for _ in 0..slots_per_bin {
            if index >= n_slots || events.len() >= max_events {
                break 'bins;
            }
            let slot = protocol::sample_slot(index, &s.source, &mut train_rng);
            let intensity = match slot.intensity {
                Intensity::Signal => &intensities[0],
                Intensity::Decoy => &intensities[1],
            };
            sample_slot_detections(
                &sampler,
                index,
                slot.state,
                intensity,
                &mut detect_rng,
                &mut dead,
                &mut scratch,
                &mut detect_diag,
                None,
                &mut |event| events.push(event),
            );
            index += 1;
        }
    }
    events.truncate(max_events);
    Ok(events)
}

/// Ground truth of one soundness trial: sifted counts split by the true
/// photon number of the generating pulse (vacuum, single, multi).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TruthTally {
    /// Key-basis sifted counts by source photon number (index capped at 7).
    pub z_by_photons: [u64; 8],
    /// Check-basis sifted counts by source photon number.
    pub x_by_photons: [u64; 8],
}

impl TruthTally {
    /// True vacuum-event count in the key basis.
    pub fn s_z0(&self) -> u64 {
        self.z_by_photons[0]
    }

    /// True single-photon count in the key basis.
    pub fn s_z1(&self) -> u64 {
        self.z_by_photons[1]
    }
}

/// Run a fixed-transmittance trial with ground-truth photon bookkeeping.
///
/// Streams `n_pulses` slots through the source and detector chain at a
/// constant channel transmittance, recording for every sifted event the
/// true photon number of the pulse that caused it. This is the oracle the
/// decoy bounds are validated against.
pub fn ground_truth_trial(
    source: &crate::protocol::SourceConfig,
    receiver: &crate::detection::ReceiverConfig,
    transmittance: f64,
    n_pulses: u64,
    seed: u64,
) -> Result<(SiftedTally, TruthTally)> {
    source.validate()?;
    if !(0.0..=1.0).contains(&transmittance) {
        return Err(Error::data("transmittance must lie in [0, 1]"));
    }
    let sampler = ChainSampler::new(receiver, source.slot_period)?;
    let intensities = [
        SlotIntensity::new(source.mu1, transmittance, sampler.receiver_linear()),
        SlotIntensity::new(source.mu2, transmittance, sampler.receiver_linear()),
    ];
    let mut train_rng = stage_rng(seed, "truth-train", 0);
    let mut detect_rng = stage_rng(seed, "truth-detect", 0);
    let mut dead = DeadTimeState::default();
    let mut scratch = Vec::with_capacity(8);
    let mut slot_events: Vec<DetectionEvent> = Vec::with_capacity(8);
    let mut diag = DetectionDiagnostics::default();
    let mut tally = SiftedTally::default();
    let mut truth = TruthTally::default();

    for index in 0..n_pulses {
        let slot = protocol::sample_slot(index, source, &mut train_rng);
        let intensity = match slot.intensity {
            Intensity::Signal => &intensities[0],
            Intensity::Decoy => &intensities[1],
        };
        slot_events.clear();
        let mut source_photons = 0u32;
        sample_slot_detections(
            &sampler,
            index,
            slot.state,
            intensity,
            &mut detect_rng,
            &mut dead,
            &mut scratch,
            &mut diag,
            Some(&mut source_photons),
            &mut |event| slot_events.push(event),
        );
        let outcome = protocol::classify_slot(slot.state, slot.intensity, &slot_events);
        if let protocol::SlotOutcome::Sifted(basis, _, _) = outcome {
            let class = (source_photons as usize).min(7);
            match basis {
                Basis::Z => truth.z_by_photons[class] += 1,
                Basis::X => truth.x_by_photons[class] += 1,
            }
        }
        protocol::apply_outcome(&mut tally, outcome);
    }
    tally.elapsed = n_pulses as f64 * source.slot_period;
    Ok((tally, truth))
}
