//! Finite-key one-decoy security analysis: vacuum and single-photon bounds,
//! phase-error bound, error-correction leakage, secure key length, and SKR.
//!
//! # Bound derivation note
//!
//! With two intensities `mu1 > mu2` sent with probabilities `p_k`, the
//! probability that a pulse carries `n` photons is
//! `tau_n = sum_k p_k e^{-mu_k} mu_k^n / n!`, and the rescaled per-intensity
//! counts `X_k = (e^{mu_k}/p_k) n_{b,k}` satisfy
//! `X_k = sum_n (mu_k^n/n!) (s_{b,n}/tau_n)` in expectation, where `s_{b,n}`
//! counts sifted detections caused by `n`-photon pulses. Eliminating terms
//! between the two intensities gives the one-decoy bounds:
//!
//! - vacuum: `mu1 X_{mu2} - mu2 X_{mu1}` keeps the `n = 0` term and
//!   subtracts only non-negative contributions, so
//!   `s_{b,0} >= tau_0 (mu1 X^-_{mu2} - mu2 X^+_{mu1}) / (mu1 - mu2)`;
//! - single photon: `X_{mu2} - (mu2^2/mu1^2) X_{mu1}` cancels the `n = 2`
//!   term, leaving the vacuum term (bounded above via the error counts:
//!   vacuum events are random, so at most `2 tau_0 (e^{mu_k}/p_k) m_{b,k}`
//!   of them exist) and the single-photon term;
//! - single-photon errors: `Y_{mu1} - Y_{mu2}` over the error counts keeps
//!   only non-negative terms beyond `n = 1`.
//!
//! Finite statistics enter through Hoeffding deviations
//! `delta = sqrt((n_b/2) ln(1/eps))` applied to each per-intensity count,
//! with `eps` the per-term failure budget (the secrecy parameter divided
//! over the 19 deviation terms of the composition). The phase-error rate of
//! the key basis is the single-photon X error rate plus the standard
//! finite-sampling correction `gamma` for estimating one sample's rate from
//! another. Every bound is validated against the simulator's ground-truth
//! photon bookkeeping rather than trusted.

use crate::protocol::{Basis, SiftedTally};
use crate::{Error, Result};

#[cfg(not(feature = "std"))]
#[allow(unused_imports)]
use num_traits::Float;

/// Number of deviation terms the secrecy budget is split over, matching the
/// `6 log2(19/eps_sec)` composition penalty.
pub const DEVIATION_TERMS: f64 = 19.0;

/// Binary entropy `H2(p) = -p log2 p - (1-p) log2 (1-p)` with
/// `0 log 0 := 0`.
///
/// ```
/// assert_eq!(fsqkd_core::keyrate::binary_entropy(0.0).unwrap(), 0.0);
/// assert_eq!(fsqkd_core::keyrate::binary_entropy(0.5).unwrap(), 1.0);
/// ```
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::data("binary entropy argument must lie in [0, 1]"));
    }
    let mut h = 0.0;
    if p > 0.0 {
        h -= p * p.log2();
    }
    if p < 1.0 {
        h -= (1.0 - p) * (1.0 - p).log2();
    }
    Ok(h)
}

/// Security parameters of the finite-key analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FiniteKeyParams {
    /// Secrecy parameter.
    pub eps_sec: f64,
    /// Correctness parameter.
    pub eps_corr: f64,
    /// Error-reconciliation inefficiency, >= 1.
    pub f_eff: f64,
    /// Nominal block size in sifted key-basis bits.
    pub block_nz: u64,
}

impl Default for FiniteKeyParams {
    fn default() -> Self {
        FiniteKeyParams {
            eps_sec: 1e-9,
            eps_corr: 1e-9,
            f_eff: 1.16,
            block_nz: 10_000_000,
        }
    }
}

impl FiniteKeyParams {
    /// Validate ranges.
    pub fn validate(&self) -> Result<()> {
        for (name, eps) in [("eps_sec", self.eps_sec), ("eps_corr", self.eps_corr)] {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(Error::Config(alloc::format!(
                    "{name} must lie strictly inside (0, 1), got {eps}"
                )));
            }
        }
        if !(self.f_eff >= 1.0) {
            return Err(Error::config("f_eff must be >= 1"));
        }
        if self.block_nz == 0 {
            return Err(Error::config("block size must be >= 1"));
        }
        Ok(())
    }

    /// Per-deviation-term failure budget `eps_sec / 19`.
    pub fn eps_per_term(&self) -> f64 {
        self.eps_sec / DEVIATION_TERMS
    }
}

/// Whether finite-size deviations are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum BoundMode {
    /// Hoeffding deviations and the phase-error sampling correction on.
    Finite,
    /// All corrections off; the large-block analog used for oracle checks.
    Asymptotic,
}

/// Finite-key lower bounds and phase-error upper bound.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecoyBounds {
    /// Lower bound on vacuum events in the key basis.
    pub s_z0_lower: f64,
    /// Lower bound on single-photon events in the key basis.
    pub s_z1_lower: f64,
    /// Lower bound on single-photon events in the check basis.
    pub s_x1_lower: f64,
    /// Upper bound on the single-photon phase-error rate, clamped to
    /// [0, 0.5].
    pub phi_z_upper: f64,
    /// Set when the counts cannot support the bounds; the key length must
    /// then be zero.
    pub failed: bool,
}

fn hoeffding_delta(total: u64, eps: f64) -> f64 {
    (total as f64 / 2.0 * (1.0 / eps).ln()).sqrt()
}

/// Finite-sampling correction for estimating the key-basis phase-error rate
/// from the check-basis sample.
fn gamma_correction(a: f64, b: f64, c: f64, d: f64) -> f64 {
    if b <= 0.0 || c <= 0.0 || d <= 0.0 {
        return 0.0;
    }
    if b >= 1.0 {
        return 0.5;
    }
    let ln2 = core::f64::consts::LN_2;
    let spread = (c + d) * (1.0 - b) * b / (c * d * ln2);
    let inner = (c + d) / (c * d * (1.0 - b) * b) * (21.0 / a) * (21.0 / a);
    (spread * inner.log2()).max(0.0).sqrt()
}

struct BasisStats {
    n_total: u64,
    /// `(e^{mu_k}/p_k)(n_k +/- delta)` per intensity, deviations by `mode`.
    n_plus: [f64; 2],
    n_minus: [f64; 2],
    m_plus: [f64; 2],
    m_minus: [f64; 2],
}

fn rescaled(tally: &SiftedTally, basis: Basis, mu: [f64; 2], p: [f64; 2], eps: f64, mode: BoundMode) -> BasisStats {
    let counts = tally.counts(basis);
    let errors = tally.errors(basis);
    let n_total = counts.total();
    let (dn, dm) = match mode {
        BoundMode::Finite => (
            hoeffding_delta(n_total, eps),
            hoeffding_delta(errors.total(), eps),
        ),
        BoundMode::Asymptotic => (0.0, 0.0),
    };
    let mut stats = BasisStats {
        n_total,
        n_plus: [0.0; 2],
        n_minus: [0.0; 2],
        m_plus: [0.0; 2],
        m_minus: [0.0; 2],
    };
    let raw_n = [counts.signal as f64, counts.decoy as f64];
    let raw_m = [errors.signal as f64, errors.decoy as f64];
    for k in 0..2 {
        let scale = mu[k].exp() / p[k];
        stats.n_plus[k] = scale * (raw_n[k] + dn);
        stats.n_minus[k] = scale * (raw_n[k] - dn).max(0.0);
        stats.m_plus[k] = scale * (raw_m[k] + dm);
        stats.m_minus[k] = scale * (raw_m[k] - dm).max(0.0);
    }
    stats
}

/// One-decoy finite-key bounds from a sifted tally.
///
/// `eps` is the per-deviation-term failure budget (see
/// [`FiniteKeyParams::eps_per_term`]). In [`BoundMode::Asymptotic`] the
/// deviations and the phase-error sampling correction are disabled.
///
/// Degenerate counts produce clamped bounds with [`DecoyBounds::failed`]
/// set instead of an error; a failed bound forces a zero key length.
pub fn decoy_bounds(
    tally: &SiftedTally,
    mu1: f64,
    mu2: f64,
    p_mu1: f64,
    eps: f64,
    mode: BoundMode,
) -> Result<DecoyBounds> {
    if !(mu1 > mu2 && mu2 > 0.0) {
        return Err(Error::config("decoy bounds need mu1 > mu2 > 0"));
    }
    if !(p_mu1 > 0.0 && p_mu1 < 1.0) {
        return Err(Error::config("p_mu1 must lie strictly inside (0, 1)"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::config("eps must lie strictly inside (0, 1)"));
    }

    let mu = [mu1, mu2];
    let p = [p_mu1, 1.0 - p_mu1];
    let tau0 = p[0] * (-mu[0]).exp() + p[1] * (-mu[1]).exp();
    let tau1 = p[0] * mu[0] * (-mu[0]).exp() + p[1] * mu[1] * (-mu[1]).exp();
    let span = mu1 - mu2;

    let z = rescaled(tally, Basis::Z, mu, p, eps, mode);
    let x = rescaled(tally, Basis::X, mu, p, eps, mode);

    // vacuum bound in the key basis
    let s_z0 = (tau0 * (mu1 * z.n_minus[1] - mu2 * z.n_plus[0]) / span).max(0.0);
    // vacuum upper bound from the error counts (vacuum outcomes are random)
    let s_z0_upper = 2.0 * tau0 * z.m_plus[0].min(z.m_plus[1]);
    let s_x0_upper = 2.0 * tau0 * x.m_plus[0].min(x.m_plus[1]);

    let single_photon = |stats: &BasisStats, s0_upper: f64| -> f64 {
        let bracket = stats.n_minus[1]
            - (mu2 * mu2) / (mu1 * mu1) * stats.n_plus[0]
            - (mu1 * mu1 - mu2 * mu2) / (mu1 * mu1) * s0_upper / tau0;
        (tau1 * mu1 / (mu2 * span) * bracket).clamp(0.0, stats.n_total as f64)
    };
    let s_z1 = single_photon(&z, s_z0_upper);
    let s_x1 = single_photon(&x, s_x0_upper);

    // single-photon errors in the check basis
    let v_x1 = (tau1 * (x.m_plus[0] - x.m_minus[1]) / span).max(0.0);

    let mut failed = z.n_total == 0 || x.n_total == 0 || s_z1 <= 0.0 || s_x1 <= 0.0;
    let phi_raw = if s_x1 > 0.0 {
        (v_x1 / s_x1).min(0.5)
    } else {
        failed = true;
        0.5
    };
    let phi = match mode {
        BoundMode::Finite if !failed => {
            (phi_raw + gamma_correction(eps, phi_raw, s_z1, s_x1)).min(0.5)
        }
        _ if failed => 0.5,
        _ => phi_raw,
    };

    Ok(DecoyBounds {
        s_z0_lower: s_z0,
        s_z1_lower: s_z1,
        s_x1_lower: s_x1,
        phi_z_upper: phi,
        failed,
    })
}

/// Convention used for the error-correction leakage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum EcMode {
    /// `lambda_EC = s^l_{Z,1} f_eff H2(QBER_Z)`, the literal published
    /// form, which scales the leakage by the single-photon bound.
    AsPublished,
    /// `lambda_EC = n_Z f_eff H2(QBER_Z)`: the whole sifted block is
    /// reconciled, the convention of the standard one-decoy analysis.
    SiftedBlock,
}

/// Bits revealed during error correction.
///
/// An empty key-basis tally leaks nothing; the bound failure is handled by
/// the key-length formula.
pub fn ec_leakage(tally: &SiftedTally, bounds: &DecoyBounds, f_eff: f64, mode: EcMode) -> f64 {
    let n_z = tally.n_z.total();
    if n_z == 0 {
        return 0.0;
    }
    let qber_z = tally.m_z.total() as f64 / n_z as f64;
    let h = binary_entropy(qber_z).unwrap_or(1.0);
    let scale = match mode {
        EcMode::AsPublished => bounds.s_z1_lower,
        EcMode::SiftedBlock => n_z as f64,
    };
    scale * f_eff * h
}

/// Constant composition penalty `6 log2(19/eps_sec) + log2(2/eps_corr)`.
pub fn finite_size_penalty(eps_sec: f64, eps_corr: f64) -> f64 {
    6.0 * (19.0 / eps_sec).log2() + (2.0 / eps_corr).log2()
}

/// Extractable key length in bits:
/// `l = s0 + s1 (1 - H2(phi)) - lambda_EC - 6 log2(19/eps_sec)
///  - log2(2/eps_corr)`, clamped to `[0, block_nz]`.
pub fn key_length(bounds: &DecoyBounds, lambda_ec: f64, params: &FiniteKeyParams) -> f64 {
    if bounds.failed {
        return 0.0;
    }
    let h_phi = binary_entropy(bounds.phi_z_upper).unwrap_or(1.0);
    let l = bounds.s_z0_lower + bounds.s_z1_lower * (1.0 - h_phi)
        - lambda_ec
        - finite_size_penalty(params.eps_sec, params.eps_corr);
    l.clamp(0.0, params.block_nz as f64)
}

/// Secure key rate in bits per second.
pub fn secure_key_rate(key_length_bits: f64, elapsed: f64) -> Result<f64> {
    if !(elapsed > 0.0) {
        return Err(Error::data("elapsed time must be positive"));
    }
    Ok(key_length_bits / elapsed)
}

/// Secure key length plus every intermediate statistic for one block.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KeyReport {
    /// Extractable secret bits of the block.
    pub key_length_bits: u64,
    /// Secure key rate, bits per second of accumulation time.
    pub skr_bps: f64,
    /// Key-basis error rate (zero when undefined; see `bound_failed`).
    pub qber_z: f64,
    /// Check-basis error rate (zero when undefined; see `bound_failed`).
    pub qber_x: f64,
    /// Sifted key-basis detections.
    pub n_z: u64,
    /// Sifted check-basis detections.
    pub n_x: u64,
    /// Vacuum-event lower bound.
    pub s_z0_lower: f64,
    /// Single-photon lower bound.
    pub s_z1_lower: f64,
    /// Phase-error upper bound.
    pub phi_z_upper: f64,
    /// Error-correction leakage in bits.
    pub lambda_ec_bits: f64,
    /// Block accumulation time, seconds.
    pub elapsed_s: f64,
    /// Secrecy parameter.
    pub epsilon_sec: f64,
    /// Correctness parameter.
    pub epsilon_corr: f64,
    /// Leakage convention.
    pub ec_mode: EcMode,
    /// Deviation mode.
    pub bound_mode: BoundMode,
    /// Set when the decoy bounds could not be evaluated.
    pub bound_failed: bool,
}

/// Assemble the full per-block report from a sifted tally.
pub fn build_key_report(
    tally: &SiftedTally,
    mu1: f64,
    mu2: f64,
    p_mu1: f64,
    params: &FiniteKeyParams,
    ec_mode: EcMode,
    bound_mode: BoundMode,
) -> Result<KeyReport> {
    params.validate()?;
    let bounds = decoy_bounds(tally, mu1, mu2, p_mu1, params.eps_per_term(), bound_mode)?;
    let lambda_ec = ec_leakage(tally, &bounds, params.f_eff, ec_mode);
    let length = key_length(&bounds, lambda_ec, params);
    let skr = secure_key_rate(length, tally.elapsed)?;
    let n_z = tally.n_z.total();
    let n_x = tally.n_x.total();
    Ok(KeyReport {
        key_length_bits: length.floor() as u64,
        skr_bps: skr,
        qber_z: if n_z > 0 {
            tally.m_z.total() as f64 / n_z as f64
        } else {
            0.0
        },
        qber_x: if n_x > 0 {
            tally.m_x.total() as f64 / n_x as f64
        } else {
            0.0
        },
        n_z,
        n_x,
        s_z0_lower: bounds.s_z0_lower,
        s_z1_lower: bounds.s_z1_lower,
        phi_z_upper: bounds.phi_z_upper,
        lambda_ec_bits: lambda_ec,
        elapsed_s: tally.elapsed,
        epsilon_sec: params.eps_sec,
        epsilon_corr: params.eps_corr,
        ec_mode,
        bound_mode,
        bound_failed: bounds.failed,
    })
}
