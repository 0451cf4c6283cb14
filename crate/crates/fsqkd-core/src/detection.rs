//! Receiver chain: 50:50 basis split, imbalanced delay-interferometer
//! measurement of the X basis, single-photon detector click statistics, and
//! visibility estimation.
//!
//! A photon that reaches the receiver is routed by the beam splitter to the
//! time-of-arrival (Z) detector or to the interferometer. The interferometer
//! delays one arm by the bin separation, so its outputs span three time
//! bins: the side bins carry the non-interfering paths and the central bin
//! carries the interference of the delayed early component with the direct
//! late component. Port 1 destructively interferes at phase 0.
//!
//! The stochastic stages are drawn in a fixed, documented order per slot
//! (photon count, per-photon routing, detector thinning, timestamp jitter,
//! combined dark draw), so a staged `detect` pass and the streaming block
//! engine consume a given stream identically.

use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::protocol::{encode_state, BinAmplitudes, TimeBinState};
use crate::{Error, Result};

#[cfg(not(feature = "std"))]
#[allow(unused_imports)]
use num_traits::Float;

/// Single-photon detector parameters. All values are declared calibration
/// inputs; the published setup does not state them.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DetectorConfig {
    /// Detection efficiency in [0, 1].
    pub efficiency: f64,
    /// Dark-count rate, Hz.
    pub dark_rate: f64,
    /// Non-paralyzable dead time, seconds.
    pub dead_time: f64,
    /// Gaussian timestamp jitter deviation, seconds.
    pub jitter_std: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            efficiency: 0.85,
            dark_rate: 100.0,
            dead_time: 20.0e-9,
            jitter_std: 50.0e-12,
        }
    }
}

impl DetectorConfig {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::config("detector efficiency must lie in [0, 1]"));
        }
        if self.dark_rate < 0.0 || self.dead_time < 0.0 || self.jitter_std < 0.0 {
            return Err(Error::config("detector rates and times must be >= 0"));
        }
        Ok(())
    }
}

/// Imbalanced Mach-Zehnder interferometer parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ImziConfig {
    /// Arm delay, seconds; equals the protocol bin separation.
    pub delay: f64,
    /// Interference contrast floor of the device, in [0, 1].
    pub intrinsic_visibility: f64,
    /// Interferometer phase at t = 0, radians.
    pub phase: f64,
    /// Insertion loss, dB.
    pub insertion_loss_db: f64,
    /// Slow phase drift, radians per second (temperature analog).
    pub drift_rate: f64,
}

impl Default for ImziConfig {
    fn default() -> Self {
        ImziConfig {
            delay: crate::protocol::BIN_DELAY_S,
            intrinsic_visibility: 1.0,
            phase: 0.0,
            insertion_loss_db: 0.0,
            drift_rate: 0.0,
        }
    }
}

impl ImziConfig {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.intrinsic_visibility) {
            return Err(Error::config("intrinsic visibility must lie in [0, 1]"));
        }
        if !(self.delay > 0.0) || self.insertion_loss_db < 0.0 {
            return Err(Error::config("imzi delay must be > 0 and insertion loss >= 0"));
        }
        Ok(())
    }

    /// Phase seen by a pulse entering at absolute time `t`.
    pub fn phase_at(&self, t: f64) -> f64 {
        self.phase + self.drift_rate * t
    }
}

/// Detector identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Detector {
    /// Time-of-arrival detector on the first splitter output.
    Z,
    /// Interferometer output that destructively interferes at phase 0.
    XOut1,
    /// Interferometer output that constructively interferes at phase 0
    /// (the minimum-interference monitor's counterpart).
    XOut2,
}

/// Time bin assigned by the gating windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Bin {
    /// First bin.
    Early,
    /// Interfering bin (X detectors only).
    Central,
    /// Last bin.
    Late,
}

/// One accepted detector click.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DetectionEvent {
    /// Slot the click was gated into.
    pub slot_index: u64,
    /// Detector that fired.
    pub detector: Detector,
    /// Gated bin label.
    pub bin: Bin,
    /// Absolute timestamp, seconds.
    pub timestamp: f64,
}

/// Full receiver-chain configuration.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReceiverConfig {
    /// Z-basis detector.
    pub z_detector: DetectorConfig,
    /// Detector on interferometer output 1.
    pub x1_detector: DetectorConfig,
    /// Detector on interferometer output 2; `None` selects the two-detector
    /// mode where the second output is unmonitored.
    pub x2_detector: Option<DetectorConfig>,
    /// Interferometer.
    pub imzi: ImziConfig,
    /// Common receiver insertion loss ahead of the basis splitter
    /// (demultiplexer, patching), dB. Calibration value.
    pub receiver_loss_db: f64,
    /// Probability that a Z-basis photon registers in the opposite bin;
    /// models the transmitter's finite carving extinction. Calibration
    /// value; the interferometer's intrinsic visibility plays the same role
    /// for the X basis.
    pub prep_flip_prob: f64,
    /// Gating half-width around each bin center, seconds.
    pub gate_half_width: f64,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        ReceiverConfig {
            z_detector: DetectorConfig::default(),
            x1_detector: DetectorConfig::default(),
            x2_detector: Some(DetectorConfig::default()),
            imzi: ImziConfig::default(),
            receiver_loss_db: 0.0,
            prep_flip_prob: 0.0,
            gate_half_width: crate::protocol::BIN_DELAY_S / 4.0,
        }
    }
}

impl ReceiverConfig {
    /// Validate all chain parameters.
    pub fn validate(&self) -> Result<()> {
        self.z_detector.validate()?;
        self.x1_detector.validate()?;
        if let Some(x2) = &self.x2_detector {
            x2.validate()?;
        }
        self.imzi.validate()?;
        if self.receiver_loss_db < 0.0 {
            return Err(Error::config("receiver loss must be >= 0 dB"));
        }
        if !(0.0..=1.0).contains(&self.prep_flip_prob) {
            return Err(Error::config("preparation flip probability must lie in [0, 1]"));
        }
        if !(self.gate_half_width > 0.0 && self.gate_half_width <= self.imzi.delay / 2.0) {
            return Err(Error::config(
                "gate half-width must be positive and at most half the bin delay",
            ));
        }
        Ok(())
    }
}

/// Click probabilities of the interferometer, indexed `[port][bin]` with
/// ports (out1, out2) and bins (early, central, late).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImziResponse {
    /// Probability table; sums to the insertion transmission.
    pub probabilities: [[f64; 3]; 2],
}

impl ImziResponse {
    /// Total probability over both ports and all bins.
    pub fn total(&self) -> f64 {
        self.probabilities.iter().flatten().sum()
    }
}

fn imzi_table(amps: &BinAmplitudes, visibility: f64, phase: f64, loss_linear: f64) -> [[f64; 3]; 2] {
    let p_early = 0.25 * amps.early.norm_sqr();
    let p_late = 0.25 * amps.late.norm_sqr();
    let base = 0.25 * (amps.early.norm_sqr() + amps.late.norm_sqr());
    // interference of the delayed early component with the direct late one
    let rotation = Complex64::new(phase.cos(), -phase.sin());
    let cross = 0.5 * visibility * (amps.late * amps.early.conj() * rotation).re;
    let central_1 = (base - cross).max(0.0);
    let central_2 = (base + cross).max(0.0);
    [
        [p_early * loss_linear, central_1 * loss_linear, p_late * loss_linear],
        [p_early * loss_linear, central_2 * loss_linear, p_late * loss_linear],
    ]
}

/// Click-probability map of the delay interferometer for a normalized input.
///
/// Side bins carry a quarter of the respective bin's probability per port;
/// the central bin interferes with contrast set by the intrinsic visibility
/// and the configured phase. Without insertion loss the table sums to one;
/// insertion loss scales every cell.
pub fn imzi_response(amps: &BinAmplitudes, cfg: &ImziConfig) -> Result<ImziResponse> {
    cfg.validate()?;
    if (amps.norm_sqr() - 1.0).abs() > 1e-9 {
        return Err(Error::data("imzi input amplitudes must be normalized"));
    }
    let loss_linear = crate::channel::db_to_linear(cfg.insertion_loss_db);
    Ok(ImziResponse {
        probabilities: imzi_table(amps, cfg.intrinsic_visibility, cfg.phase, loss_linear),
    })
}

/// Interference visibility from maximum and minimum count rates:
/// `V = (max - min) / (max + min)`.
pub fn visibility(max_counts: u64, min_counts: u64) -> Result<f64> {
    if max_counts < min_counts {
        return Err(Error::data("visibility arguments must satisfy max >= min"));
    }
    let sum = max_counts + min_counts;
    if sum == 0 {
        return Err(Error::statistic("visibility undefined for zero total counts"));
    }
    Ok((max_counts - min_counts) as f64 / sum as f64)
}

/// X-basis error rate implied by an interference visibility:
/// `QBER_X = (1 - V) / 2`.
pub fn qber_x_from_visibility(v: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::data("visibility must lie in [0, 1]"));
    }
    Ok((1.0 - v) / 2.0)
}

/// Counters for events removed inside the detector chain.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DetectionDiagnostics {
    /// Clicks whose timestamp fell outside every gating window.
    pub gating_discards: u64,
    /// Clicks suppressed by detector dead time.
    pub dead_time_suppressions: u64,
    /// Accepted clicks caused by dark counts.
    pub dark_counts: u64,
}

/// Per-detector dead-time bookkeeping carried across slots.
#[derive(Debug, Clone, Copy)]
pub(crate) struct DeadTimeState {
    last: [f64; 3],
}

impl Default for DeadTimeState {
    fn default() -> Self {
        DeadTimeState {
            last: [f64::NEG_INFINITY; 3],
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Candidate {
    detector: usize,
    bin: Bin,
    t: f64,
    dark: bool,
}

/// Precomputed per-run sampler derived from a [`ReceiverConfig`].
pub(crate) struct ChainSampler {
    slot_period: f64,
    delay: f64,
    gate: f64,
    receiver_linear: f64,
    prep_flip: f64,
    detectors: [Option<DetectorConfig>; 3],
    /// Cumulative routing tables per prepared state at the reference phase;
    /// valid whenever the interferometer phase does not drift.
    static_tables: [[f64; 6]; 3],
    visibility: f64,
    il_linear: f64,
    phase0: f64,
    drift: f64,
    /// Probability of at least one dark count in a slot, over all detectors.
    p_any_dark: f64,
    /// Cumulative attribution thresholds of a dark count to a detector.
    dark_cum: [f64; 3],
}

fn cumulative_from_table(table: [[f64; 3]; 2]) -> [f64; 6] {
    let mut cum = [0.0f64; 6];
    let mut acc = 0.0;
    for port in 0..2 {
        for bin in 0..3 {
            acc += table[port][bin];
            cum[port * 3 + bin] = acc;
        }
    }
    cum
}

const BINS: [Bin; 3] = [Bin::Early, Bin::Central, Bin::Late];

impl ChainSampler {
    pub(crate) fn new(chain: &ReceiverConfig, slot_period: f64) -> Result<Self> {
        chain.validate()?;
        if !(slot_period > 2.0 * chain.imzi.delay) {
            return Err(Error::config("slot period must exceed twice the imzi delay"));
        }
        let il_linear = crate::channel::db_to_linear(chain.imzi.insertion_loss_db);
        let receiver_linear = crate::channel::db_to_linear(chain.receiver_loss_db);
        let detectors = [
            Some(chain.z_detector),
            Some(chain.x1_detector),
            chain.x2_detector,
        ];

        let mut static_tables = [[0.0f64; 6]; 3];
        for (i, state) in [TimeBinState::Early, TimeBinState::Late, TimeBinState::Plus]
            .into_iter()
            .enumerate()
        {
            static_tables[i] = cumulative_from_table(imzi_table(
                &encode_state(state),
                chain.imzi.intrinsic_visibility,
                chain.imzi.phase,
                il_linear,
            ));
        }

        let mut lambda = [0.0f64; 3];
        for (i, det) in detectors.iter().enumerate() {
            if let Some(d) = det {
                lambda[i] = d.dark_rate * slot_period;
            }
        }
        let lambda_total: f64 = lambda.iter().sum();
        let p_any_dark = 1.0 - (-lambda_total).exp();
        let mut dark_cum = [0.0f64; 3];
        let mut acc = 0.0;
        for i in 0..3 {
            acc += if lambda_total > 0.0 {
                lambda[i] / lambda_total
            } else {
                0.0
            };
            dark_cum[i] = acc;
        }

        Ok(ChainSampler {
            slot_period,
            delay: chain.imzi.delay,
            gate: chain.gate_half_width,
            receiver_linear,
            prep_flip: chain.prep_flip_prob,
            detectors,
            static_tables,
            visibility: chain.imzi.intrinsic_visibility,
            il_linear,
            phase0: chain.imzi.phase,
            drift: chain.imzi.drift_rate,
            p_any_dark,
            dark_cum,
        })
    }

    fn state_index(state: TimeBinState) -> usize {
        match state {
            TimeBinState::Early => 0,
            TimeBinState::Late => 1,
            TimeBinState::Plus => 2,
        }
    }

    fn routing_table(&self, state: TimeBinState, t0: f64) -> [f64; 6] {
        if self.drift == 0.0 {
            self.static_tables[Self::state_index(state)]
        } else {
            cumulative_from_table(imzi_table(
                &encode_state(state),
                self.visibility,
                self.phase0 + self.drift * t0,
                self.il_linear,
            ))
        }
    }

    /// Nominal bin-center offset within the slot for a detector.
    fn bin_offset(&self, detector: usize, bin: Bin) -> f64 {
        match (detector, bin) {
            (0, Bin::Early) => 0.0,
            (0, Bin::Late) => self.delay,
            (_, Bin::Early) => 0.0,
            (_, Bin::Central) => self.delay,
            (_, Bin::Late) => 2.0 * self.delay,
        }
    }

    /// Gate an arbitrary in-slot time onto a detector's valid bins.
    fn gate_time(&self, detector: usize, t_rel: f64) -> Option<Bin> {
        for &bin in Self::valid_bins(detector) {
            if (t_rel - self.bin_offset(detector, bin)).abs() <= self.gate {
                return Some(bin);
            }
        }
        None
    }

    fn valid_bins(detector: usize) -> &'static [Bin] {
        if detector == 0 {
            &[Bin::Early, Bin::Late]
        } else {
            &BINS
        }
    }

    // accessors for the aggregate block engine

    pub(crate) fn receiver_linear(&self) -> f64 {
        self.receiver_linear
    }

    pub(crate) fn prep_flip(&self) -> f64 {
        self.prep_flip
    }

    pub(crate) fn detector(&self, index: usize) -> Option<&DetectorConfig> {
        self.detectors[index].as_ref()
    }

    /// Raw response table (insertion loss folded in) for a state entering
    /// at absolute time `t0`.
    pub(crate) fn response_table(&self, state: TimeBinState, t0: f64) -> [[f64; 3]; 2] {
        imzi_table(
            &encode_state(state),
            self.visibility,
            self.phase0 + self.drift * t0,
            self.il_linear,
        )
    }

    /// Gated time per slot for one detector, windows clipped to the slot.
    pub(crate) fn gate_coverage(&self, detector: usize) -> f64 {
        Self::valid_bins(detector)
            .iter()
            .map(|&bin| {
                let center = self.bin_offset(detector, bin);
                ((center + self.gate).min(self.slot_period) - (center - self.gate).max(0.0))
                    .max(0.0)
            })
            .sum()
    }

    /// In-gate fraction of one bin's window, clipped to the slot.
    pub(crate) fn bin_coverage(&self, detector: usize, bin: Bin) -> f64 {
        let center = self.bin_offset(detector, bin);
        ((center + self.gate).min(self.slot_period) - (center - self.gate).max(0.0)).max(0.0)
    }

    /// Fraction of photon clicks whose jittered timestamp stays gated.
    pub(crate) fn jitter_acceptance(&self, detector: usize) -> f64 {
        match &self.detectors[detector] {
            Some(d) if d.jitter_std > 0.0 => {
                erf(self.gate / (d.jitter_std * core::f64::consts::SQRT_2))
            }
            _ => 1.0,
        }
    }
}

/// Error function, rational approximation with absolute error below 1.5e-7.
fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.327_591_1 * x);
    let poly = t
        * (0.254_829_592
            + t * (-0.284_496_736
                + t * (1.421_413_741 + t * (-1.453_152_027 + t * 1.061_405_429))));
    sign * (1.0 - poly * (-x * x).exp())
}

/// Per-slot photon statistics, precomputed once per transmittance bin so
/// the hot loop avoids `exp` calls. Both the streaming engine and the
/// staged [`detect`] build it through the same constructor, keeping their
/// arithmetic bit-identical.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SlotIntensity {
    /// `exp(-mu)`, for ground-truth source sampling.
    pub mu_quiet: f64,
    /// Combined channel and common-receiver transmission.
    pub survival: f64,
    /// `exp(-mu * survival)`, the probability that no photon arrives.
    pub quiet: f64,
}

impl SlotIntensity {
    pub(crate) fn new(mu: f64, transmittance: f64, receiver_linear: f64) -> Self {
        let survival = transmittance * receiver_linear;
        SlotIntensity {
            mu_quiet: (-mu).exp(),
            survival,
            quiet: (-mu * survival).exp(),
        }
    }
}

/// Sample the detections of one slot.
///
/// The draw order is fixed: (1) one uniform decides the arriving photon
/// count (Knuth continuation) and, on the quiet branch, doubles as the
/// combined dark draw for the slot; active slots draw the dark decision
/// separately. Ground-truth mode instead samples the source photon number
/// and thins per photon. (2) Per photon: splitter route, Z-bin or
/// interferometer routing, detector thinning, timestamp jitter. Candidates
/// then pass dead time in time order and gating.
#[allow(clippy::too_many_arguments)]
pub(crate) fn sample_slot_detections(
    sampler: &ChainSampler,
    slot_index: u64,
    state: TimeBinState,
    intensity: &SlotIntensity,
    rng: &mut impl Rng,
    dead: &mut DeadTimeState,
    scratch: &mut Vec<Candidate>,
    diag: &mut DetectionDiagnostics,
    mut source_photons: Option<&mut u32>,
    sink: &mut impl FnMut(DetectionEvent),
) {
    scratch.clear();
    let t0 = slot_index as f64 * sampler.slot_period;

    // 1. photons surviving to the receiver, and the dark decision
    let (arrived, dark_pending) = match source_photons.as_deref_mut() {
        None => {
            let u: f64 = rng.random();
            if u < intensity.quiet {
                // no photon; the same uniform decides the dark presence
                if sampler.p_any_dark == 0.0
                    || u < intensity.quiet * (1.0 - sampler.p_any_dark)
                {
                    return;
                }
                (0, true)
            } else {
                let n = crate::rng::sample_poisson_with(rng, intensity.quiet, u);
                (
                    n,
                    sampler.p_any_dark > 0.0 && rng.random_bool(sampler.p_any_dark),
                )
            }
        }
        Some(n_src) => {
            *n_src = {
                let u: f64 = rng.random();
                crate::rng::sample_poisson_with(rng, intensity.mu_quiet, u)
            };
            let mut survivors = 0u32;
            for _ in 0..*n_src {
                if rng.random_bool(intensity.survival) {
                    survivors += 1;
                }
            }
            (
                survivors,
                sampler.p_any_dark > 0.0 && rng.random_bool(sampler.p_any_dark),
            )
        }
    };

    // 2. per-photon routing
    for _ in 0..arrived {
        if rng.random_bool(0.5) {
            // Z path: time of arrival
            let bin = match state {
                TimeBinState::Early => Bin::Early,
                TimeBinState::Late => Bin::Late,
                TimeBinState::Plus => {
                    if rng.random_bool(0.5) {
                        Bin::Early
                    } else {
                        Bin::Late
                    }
                }
            };
            let bin = if state != TimeBinState::Plus
                && sampler.prep_flip > 0.0
                && rng.random_bool(sampler.prep_flip)
            {
                match bin {
                    Bin::Early => Bin::Late,
                    Bin::Late => Bin::Early,
                    Bin::Central => Bin::Central,
                }
            } else {
                bin
            };
            push_click(sampler, 0, bin, t0, rng, scratch);
        } else {
            // X path: interferometer routing (insertion loss folded into
            // the cumulative table)
            let table = sampler.routing_table(state, t0);
            let u: f64 = rng.random();
            let Some(cell) = table.iter().position(|&threshold| u < threshold) else {
                continue; // absorbed in the interferometer
            };
            let detector = 1 + cell / 3;
            let bin = BINS[cell % 3];
            push_click(sampler, detector, bin, t0, rng, scratch);
        }
    }

    // 3. materialize the dark candidate decided above
    if dark_pending {
        let v: f64 = rng.random();
        let detector = sampler
            .dark_cum
            .iter()
            .position(|&threshold| v < threshold)
            .unwrap_or(2);
        let t_rel: f64 = rng.random::<f64>() * sampler.slot_period;
        scratch.push(Candidate {
            detector,
            bin: Bin::Early, // assigned by gating below
            t: t0 + t_rel,
            dark: true,
        });
    }

    if scratch.is_empty() {
        return;
    }
    scratch.sort_unstable_by(|a, b| a.t.partial_cmp(&b.t).unwrap());

    // dead time in time order, then gating
    for candidate in scratch.iter() {
        let det = candidate.detector;
        let Some(cfg) = &sampler.detectors[det] else {
            continue;
        };
        if candidate.t - dead.last[det] < cfg.dead_time {
            diag.dead_time_suppressions += 1;
            continue;
        }
        dead.last[det] = candidate.t;
        let bin = if candidate.dark {
            match sampler.gate_time(det, candidate.t - t0) {
                Some(bin) => bin,
                None => {
                    diag.gating_discards += 1;
                    continue;
                }
            }
        } else {
            // photon clicks carry their nominal bin; jitter beyond the gate
            // half-width is discarded
            let nominal = sampler.bin_offset(det, candidate.bin);
            if (candidate.t - t0 - nominal).abs() > sampler.gate {
                diag.gating_discards += 1;
                continue;
            }
            candidate.bin
        };
        if candidate.dark {
            diag.dark_counts += 1;
        }
        let detector = match det {
            0 => Detector::Z,
            1 => Detector::XOut1,
            _ => Detector::XOut2,
        };
        sink(DetectionEvent {
            slot_index,
            detector,
            bin,
            timestamp: candidate.t,
        });
    }
}

fn push_click(
    sampler: &ChainSampler,
    detector: usize,
    bin: Bin,
    t0: f64,
    rng: &mut impl Rng,
    scratch: &mut Vec<Candidate>,
) {
    let Some(cfg) = &sampler.detectors[detector] else {
        return; // unmonitored port
    };
    if !rng.random_bool(cfg.efficiency) {
        return;
    }
    let mut t = t0 + sampler.bin_offset(detector, bin);
    if cfg.jitter_std > 0.0 {
        let g: f64 = StandardNormal.sample(rng);
        t += cfg.jitter_std * g;
    }
    scratch.push(Candidate {
        detector,
        bin,
        t,
        dark: false,
    });
}

/// Run the detector chain over a prepared pulse train.
///
/// `transmittance` carries the per-slot channel transmission (budget,
/// coupling, and scintillation combined) and must match the train length.
pub fn detect(
    slots: &[crate::protocol::PulseSlot],
    transmittance: &[f64],
    chain: &ReceiverConfig,
    rng: &mut impl Rng,
) -> Result<Vec<DetectionEvent>> {
    detect_with_diagnostics(slots, transmittance, chain, rng).map(|(events, _)| events)
}

/// [`detect`] variant that also returns the chain diagnostics.
pub fn detect_with_diagnostics(
    slots: &[crate::protocol::PulseSlot],
    transmittance: &[f64],
    chain: &ReceiverConfig,
    rng: &mut impl Rng,
) -> Result<(Vec<DetectionEvent>, DetectionDiagnostics)> {
    let (events, diag, _) = detect_inner(slots, transmittance, chain, rng, false)?;
    Ok((events, diag))
}

/// [`detect`] variant recording the true source photon number of every slot,
/// for ground-truth validation of the decoy-state bounds.
pub fn detect_with_truth(
    slots: &[crate::protocol::PulseSlot],
    transmittance: &[f64],
    chain: &ReceiverConfig,
    rng: &mut impl Rng,
) -> Result<(Vec<DetectionEvent>, DetectionDiagnostics, Vec<u32>)> {
    detect_inner(slots, transmittance, chain, rng, true)
}

fn detect_inner(
    slots: &[crate::protocol::PulseSlot],
    transmittance: &[f64],
    chain: &ReceiverConfig,
    rng: &mut impl Rng,
    with_truth: bool,
) -> Result<(Vec<DetectionEvent>, DetectionDiagnostics, Vec<u32>)> {
    if slots.len() != transmittance.len() {
        return Err(Error::data(
            "transmittance series length must match the pulse train",
        ));
    }
    if transmittance.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::data("per-slot transmittance must lie in [0, 1]"));
    }
    let slot_period = slots.first().map_or(1.0 / crate::protocol::QUBIT_RATE_HZ, |s| s.slot_period);
    let sampler = ChainSampler::new(chain, slot_period)?;
    let mut dead = DeadTimeState::default();
    let mut diag = DetectionDiagnostics::default();
    let mut scratch = Vec::with_capacity(8);
    let mut events = Vec::new();
    let mut truth = Vec::new();
    if with_truth {
        truth.reserve(slots.len());
    }
    for (slot, &t) in slots.iter().zip(transmittance) {
        let intensity = SlotIntensity::new(slot.mean_photons, t, sampler.receiver_linear);
        let mut n_src = 0u32;
        sample_slot_detections(
            &sampler,
            slot.index,
            slot.state,
            &intensity,
            rng,
            &mut dead,
            &mut scratch,
            &mut diag,
            with_truth.then_some(&mut n_src),
            &mut |event| events.push(event),
        );
        if with_truth {
            truth.push(n_src);
        }
    }
    Ok((events, diag, truth))
}
