//! Time-bin state preparation for the three-state efficient one-decoy BB84
//! protocol, plus sifting and error tallies.
//!
//! The transmitter prepares the two Z-basis eigenstates (a pulse in the
//! early or the late time bin) and a single X-basis state `|+>`, the equal
//! superposition of both bins with phase 0. The orthogonal `|->` state is
//! never prepared; it only appears on the measurement side as the
//! destructive output of the receiver interferometer.

use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;

use crate::detection::{Bin, DetectionEvent, Detector};
use crate::{Error, Result};

#[cfg(not(feature = "std"))]
#[allow(unused_imports)]
use num_traits::Float;

/// Transmitted time-bin states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum TimeBinState {
    /// Photon in the first time bin (Z basis).
    Early,
    /// Photon in the second time bin (Z basis).
    Late,
    /// Equal superposition of both bins with phase 0 (X basis). The only
    /// X-basis state prepared by the three-state protocol.
    Plus,
}

/// Preparation/measurement basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Basis {
    /// Time-of-arrival basis.
    Z,
    /// Superposition (phase) basis.
    X,
}

/// Intensity class of the weak coherent pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Intensity {
    /// Primary intensity `mu_1`.
    Signal,
    /// Decoy intensity `mu_2 < mu_1`.
    Decoy,
}

impl TimeBinState {
    /// Basis the state belongs to.
    pub fn basis(self) -> Basis {
        match self {
            TimeBinState::Early | TimeBinState::Late => Basis::Z,
            TimeBinState::Plus => Basis::X,
        }
    }
}

/// One transmitted time-bin qubit slot.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PulseSlot {
    /// Sequential slot number.
    pub index: u64,
    /// Prepared state.
    pub state: TimeBinState,
    /// Basis of the prepared state.
    pub basis: Basis,
    /// Intensity class.
    pub intensity: Intensity,
    /// Mean photon number of this pulse (`mu_1` or `mu_2`).
    pub mean_photons: f64,
    /// Slot duration in seconds (one qubit per slot).
    pub slot_period: f64,
}

/// Transmitter configuration.
///
/// `mu1`/`mu2` are the signal and decoy mean photon numbers, `p_mu1` the
/// probability of choosing the signal intensity, and `p_z` the probability
/// of preparing a Z-basis state. Defaults follow the published signal
/// parameters where stated (595 MHz slot rate, even basis split); the decoy
/// intensities are calibration values.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SourceConfig {
    /// Signal mean photon number.
    pub mu1: f64,
    /// Decoy mean photon number (strictly below `mu1`).
    pub mu2: f64,
    /// Probability of the signal intensity.
    pub p_mu1: f64,
    /// Probability of preparing a Z-basis state.
    pub p_z: f64,
    /// Slot duration in seconds.
    pub slot_period: f64,
}

/// Qubit generation rate of the modeled transmitter, Hz.
pub const QUBIT_RATE_HZ: f64 = 595.0e6;

/// Delay between the early and late bins, seconds.
pub const BIN_DELAY_S: f64 = 800.0e-12;

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig {
            mu1: 0.5,
            mu2: 0.2,
            p_mu1: 0.7,
            p_z: 0.5,
            slot_period: 1.0 / QUBIT_RATE_HZ,
        }
    }
}

impl SourceConfig {
    /// Validate the configured probabilities and intensity ordering.
    pub fn validate(&self) -> Result<()> {
        if !(self.mu1.is_finite() && self.mu2.is_finite()) || self.mu2 <= 0.0 {
            return Err(Error::config("intensities must be finite and positive"));
        }
        if self.mu2 >= self.mu1 {
            return Err(Error::config("decoy intensity must satisfy mu2 < mu1"));
        }
        for (name, p) in [("p_mu1", self.p_mu1), ("p_z", self.p_z)] {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Config(alloc::format!(
                    "{name} must lie strictly inside (0, 1), got {p}"
                )));
            }
        }
        // Both bins plus a guard interval must fit inside one slot.
        if !(self.slot_period > 2.0 * BIN_DELAY_S) {
            return Err(Error::config("slot period must exceed twice the bin delay"));
        }
        Ok(())
    }

    /// Mean photon number averaged over the intensity mix.
    pub fn mean_intensity(&self) -> f64 {
        self.p_mu1 * self.mu1 + (1.0 - self.p_mu1) * self.mu2
    }

    /// Mean photon number of one intensity class.
    pub fn mu(&self, intensity: Intensity) -> f64 {
        match intensity {
            Intensity::Signal => self.mu1,
            Intensity::Decoy => self.mu2,
        }
    }
}

/// Draw one slot. Shared by the materializing generator and the streaming
/// block engine so both consume the pulse-train stream identically: one
/// word carries the basis decision (bits 11..64 as a 53-bit uniform) and
/// the early/late choice (bit 0), a second word the intensity decision.
pub(crate) fn sample_slot(index: u64, cfg: &SourceConfig, rng: &mut impl Rng) -> PulseSlot {
    let word = rng.next_u64();
    let basis_uniform = (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    let (state, basis) = if basis_uniform < cfg.p_z {
        if word & 1 == 0 {
            (TimeBinState::Early, Basis::Z)
        } else {
            (TimeBinState::Late, Basis::Z)
        }
    } else {
        (TimeBinState::Plus, Basis::X)
    };
    let intensity = if rng.random_bool(cfg.p_mu1) {
        Intensity::Signal
    } else {
        Intensity::Decoy
    };
    PulseSlot {
        index,
        state,
        basis,
        intensity,
        mean_photons: cfg.mu(intensity),
        slot_period: cfg.slot_period,
    }
}

/// Generate `n` pulse slots from a seeded generator.
///
/// Basis is drawn with probability `p_z` for Z; the state is uniform over
/// early/late within Z and always `|+>` within X; the intensity class is
/// drawn independently with probability `p_mu1` for signal.
pub fn generate_pulse_train(
    n: u64,
    cfg: &SourceConfig,
    rng: &mut impl Rng,
) -> Result<Vec<PulseSlot>> {
    if n == 0 {
        return Err(Error::config("pulse train length must be positive"));
    }
    cfg.validate()?;
    Ok((0..n).map(|i| sample_slot(i, cfg, rng)).collect())
}

/// Normalized early/late amplitudes of a prepared state.
///
/// Intensity scaling is applied separately through the slot's mean photon
/// number; the amplitudes here always carry unit norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinAmplitudes {
    /// Amplitude of the early bin.
    pub early: Complex64,
    /// Amplitude of the late bin.
    pub late: Complex64,
}

impl BinAmplitudes {
    /// `|early|^2 + |late|^2`.
    pub fn norm_sqr(&self) -> f64 {
        self.early.norm_sqr() + self.late.norm_sqr()
    }
}

/// Amplitudes of the prepared slot: early -> (1, 0), late -> (0, 1),
/// plus -> (1, 1)/sqrt(2).
pub fn encode_amplitudes(slot: &PulseSlot) -> BinAmplitudes {
    encode_state(slot.state)
}

pub(crate) fn encode_state(state: TimeBinState) -> BinAmplitudes {
    let inv_sqrt2 = core::f64::consts::FRAC_1_SQRT_2;
    match state {
        TimeBinState::Early => BinAmplitudes {
            early: Complex64::new(1.0, 0.0),
            late: Complex64::new(0.0, 0.0),
        },
        TimeBinState::Late => BinAmplitudes {
            early: Complex64::new(0.0, 0.0),
            late: Complex64::new(1.0, 0.0),
        },
        TimeBinState::Plus => BinAmplitudes {
            early: Complex64::new(inv_sqrt2, 0.0),
            late: Complex64::new(inv_sqrt2, 0.0),
        },
    }
}

/// Counts split by intensity class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IntensityCounts {
    /// Count attributed to signal pulses.
    pub signal: u64,
    /// Count attributed to decoy pulses.
    pub decoy: u64,
}

impl IntensityCounts {
    /// Count for one intensity class.
    pub fn get(&self, intensity: Intensity) -> u64 {
        match intensity {
            Intensity::Signal => self.signal,
            Intensity::Decoy => self.decoy,
        }
    }

    /// Increment the count of one intensity class.
    pub fn add(&mut self, intensity: Intensity, amount: u64) {
        match intensity {
            Intensity::Signal => self.signal += amount,
            Intensity::Decoy => self.decoy += amount,
        }
    }

    /// Total over both classes.
    pub fn total(&self) -> u64 {
        self.signal + self.decoy
    }
}

/// Counters for events removed before tallying.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SiftDiagnostics {
    /// Slots discarded because more than one detection survived gating and
    /// dead time.
    pub multi_click_slots: u64,
    /// Single detections discarded because preparation and measurement
    /// bases differ, or because an X-detector click fell in a
    /// non-interfering side bin.
    pub basis_mismatch: u64,
}

/// Per-basis, per-intensity counts and error counts after sifting.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SiftedTally {
    /// Sifted Z-basis detections per intensity.
    pub n_z: IntensityCounts,
    /// Sifted X-basis (central-bin) detections per intensity.
    pub n_x: IntensityCounts,
    /// Z-basis errors per intensity.
    pub m_z: IntensityCounts,
    /// X-basis errors per intensity (clicks on the port that destructively
    /// interferes at phase 0).
    pub m_x: IntensityCounts,
    /// Accumulation time of this tally in seconds.
    pub elapsed: f64,
    /// Discard counters.
    pub diagnostics: SiftDiagnostics,
}

impl SiftedTally {
    /// Raw counts for one basis.
    pub fn counts(&self, basis: Basis) -> &IntensityCounts {
        match basis {
            Basis::Z => &self.n_z,
            Basis::X => &self.n_x,
        }
    }

    /// Error counts for one basis.
    pub fn errors(&self, basis: Basis) -> &IntensityCounts {
        match basis {
            Basis::Z => &self.m_z,
            Basis::X => &self.m_x,
        }
    }
}

/// Outcome of classifying the detections of one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum SlotOutcome {
    /// No accepted detection.
    Empty,
    /// More than one accepted detection; the slot is discarded.
    MultiClick,
    /// One detection but preparation and measurement do not line up.
    Mismatch,
    /// One sifted detection: basis, intensity, and whether it is an error.
    Sifted(Basis, Intensity, bool),
}

/// Classify one slot's accepted detections against the sent state.
///
/// The sifting rules live here and are shared by [`sift`] and the streaming
/// block engine:
///
/// - slots with more than one accepted detection are discarded entirely;
/// - a Z-detector click tallies only when a Z state was sent, with an error
///   when the bin opposes the sent state;
/// - an X-detector click tallies only when `|+>` was sent and the click
///   fell in the interfering central bin; the port that destructively
///   interferes at phase 0 counts as an error.
pub(crate) fn classify_slot(
    sent_state: TimeBinState,
    sent_intensity: Intensity,
    events: &[DetectionEvent],
) -> SlotOutcome {
    match events {
        [] => SlotOutcome::Empty,
        [event] => classify_single(sent_state, sent_intensity, event),
        _ => SlotOutcome::MultiClick,
    }
}

fn classify_single(
    sent_state: TimeBinState,
    sent_intensity: Intensity,
    event: &DetectionEvent,
) -> SlotOutcome {
    match event.detector {
        Detector::Z => match sent_state {
            TimeBinState::Early => {
                SlotOutcome::Sifted(Basis::Z, sent_intensity, event.bin != Bin::Early)
            }
            TimeBinState::Late => {
                SlotOutcome::Sifted(Basis::Z, sent_intensity, event.bin != Bin::Late)
            }
            TimeBinState::Plus => SlotOutcome::Mismatch,
        },
        Detector::XOut1 | Detector::XOut2 => {
            if sent_state != TimeBinState::Plus || event.bin != Bin::Central {
                return SlotOutcome::Mismatch;
            }
            // XOut1 is the port that destructively interferes at phase 0.
            SlotOutcome::Sifted(Basis::X, sent_intensity, event.detector == Detector::XOut1)
        }
    }
}

pub(crate) fn apply_outcome(tally: &mut SiftedTally, outcome: SlotOutcome) {
    match outcome {
        SlotOutcome::Empty => {}
        SlotOutcome::MultiClick => tally.diagnostics.multi_click_slots += 1,
        SlotOutcome::Mismatch => tally.diagnostics.basis_mismatch += 1,
        SlotOutcome::Sifted(basis, intensity, error) => {
            match basis {
                Basis::Z => tally.n_z.add(intensity, 1),
                Basis::X => tally.n_x.add(intensity, 1),
            }
            if error {
                match basis {
                    Basis::Z => tally.m_z.add(intensity, 1),
                    Basis::X => tally.m_x.add(intensity, 1),
                }
            }
        }
    }
}

/// Sift detection events against the sent pulse train.
///
/// Events must be ordered by slot index (the detector chain emits them that
/// way); an event referencing a slot outside the train is a data error.
pub fn sift(sent: &[PulseSlot], events: &[DetectionEvent]) -> Result<SiftedTally> {
    let mut tally = SiftedTally::default();
    if let Some(last) = sent.last() {
        tally.elapsed = (last.index + 1) as f64 * last.slot_period;
    }
    let n = sent.len() as u64;
    let mut cursor = 0usize;
    while cursor < events.len() {
        let slot_index = events[cursor].slot_index;
        if slot_index >= n {
            return Err(Error::Data(alloc::format!(
                "detection event references slot {slot_index} outside the {n}-slot train"
            )));
        }
        let mut end = cursor + 1;
        while end < events.len() && events[end].slot_index == slot_index {
            end += 1;
        }
        let slot = &sent[slot_index as usize];
        let outcome = classify_slot(slot.state, slot.intensity, &events[cursor..end]);
        apply_outcome(&mut tally, outcome);
        cursor = end;
    }
    Ok(tally)
}

/// Quantum bit error rate of one basis: total errors over total counts.
///
/// Zero total counts is reported as an undefined-statistic error rather
/// than a silent zero.
pub fn qber(tally: &SiftedTally, basis: Basis) -> Result<f64> {
    let n = tally.counts(basis).total();
    let m = tally.errors(basis).total();
    if n == 0 {
        return Err(Error::statistic(match basis {
            Basis::Z => String::from("QBER_Z undefined: no sifted Z counts"),
            Basis::X => String::from("QBER_X undefined: no sifted X counts"),
        }));
    }
    Ok(m as f64 / n as f64)
}
