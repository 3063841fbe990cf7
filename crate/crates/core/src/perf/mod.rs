//! Closed-form performance: downlink SINR and spectral efficiency, the
//! interference-plus-noise seen by untrusted receivers, the CPU's
//! observation SINR and the resulting monitoring success probability.
//!
//! The functions here follow the published closed forms term by term, sums
//! running over the PZF/MR AP sets of [`GroupingState`]. Where the closed
//! forms disagree with the channel-level signal model, the disagreement is
//! measured by [`crate::mc::verify_closed_form`] rather than patched here.

mod incremental;

pub use incremental::SwitchEvaluator;

use std::fmt::Write as _;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::grouping::{GroupingState, ModeAssignment};
use crate::scenario::LargeScaleState;

/// Per-user and per-link figures of one mode assignment.
#[derive(Clone, Debug, PartialEq)]
pub struct PerformanceReport {
    pub sinr_dl: Vec<f64>,
    /// bits/s/Hz
    pub se_dl: Vec<f64>,
    /// Interference-plus-noise at each untrusted receiver.
    pub gamma_u_denom: Vec<f64>,
    pub sinr_obs: Vec<f64>,
    pub msp: Vec<f64>,
    /// `+inf` when there are no users.
    pub min_se: f64,
    /// `+inf` when there are no untrusted links.
    pub min_msp: f64,
}

pub(crate) fn min_or_inf(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

/// `(T - tau) / T * log2(1 + sinr)`.
pub fn spectral_efficiency(sinr: f64, config: &SystemConfig) -> f64 {
    config.prelog() * (1.0 + sinr).log2()
}

/// Closed-form SINR of downlink user `k`, split into its numerator and the
/// three denominator groups.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DownlinkSinrTerms {
    /// `eta rho_d (sum of coherent gains)^2`.
    pub signal: f64,
    /// Beamforming uncertainty plus user and jamming interference.
    pub interference: f64,
    /// Untrusted transmitters' interference.
    pub untrusted: f64,
    pub noise: f64,
}

impl DownlinkSinrTerms {
    pub fn sinr(&self) -> f64 {
        if self.signal == 0.0 {
            return 0.0;
        }
        self.signal / (self.interference + self.untrusted + self.noise)
    }
}

pub fn downlink_sinr_terms(
    k: usize,
    ls: &LargeScaleState,
    groups: &GroupingState,
    a: &ModeAssignment,
    config: &SystemConfig,
) -> DownlinkSinrTerms {
    let n = config.n as f64;
    let scale = config.eta() * config.rho_d();

    let coherent: f64 = groups.z_dl[k]
        .iter()
        .map(|&m| a.indicator(m) * ((n - groups.num_strong_dl(m) as f64) * ls.gamma_dl[(m, k)]).sqrt())
        .sum::<f64>()
        + groups.zbar_dl[k]
            .iter()
            .map(|&m| a.indicator(m) * (n * ls.gamma_dl[(m, k)]).sqrt())
            .sum::<f64>();

    let beta_active: f64 = (0..a.len()).map(|m| a.indicator(m) * ls.beta_dl[(m, k)]).sum();
    let user_streams = config.k as f64 * beta_active;
    let zf_removed: f64 = (0..config.k)
        .map(|kp| {
            groups.z_dl[kp]
                .iter()
                .map(|&m| a.indicator(m) * ls.gamma_dl[(m, k)])
                .sum::<f64>()
        })
        .sum();
    let jam_streams = config.u as f64 * beta_active;
    let untrusted: f64 = (0..config.u).map(|u| config.rho_u(u) * ls.beta_utx_user[(u, k)]).sum();

    DownlinkSinrTerms {
        signal: scale * coherent * coherent,
        interference: scale * (user_streams - zf_removed + jam_streams),
        untrusted,
        noise: 1.0,
    }
}

/// Effective SINR of downlink user `k`.
pub fn sinr_downlink_user(
    k: usize,
    ls: &LargeScaleState,
    groups: &GroupingState,
    a: &ModeAssignment,
    config: &SystemConfig,
) -> f64 {
    downlink_sinr_terms(k, ls, groups, a, config).sinr()
}

pub fn se_downlink_user(
    k: usize,
    ls: &LargeScaleState,
    groups: &GroupingState,
    a: &ModeAssignment,
    config: &SystemConfig,
) -> f64 {
    spectral_efficiency(sinr_downlink_user(k, ls, groups, a, config), config)
}

/// The four groups of `Gamma_u`, the untrusted receiver's
/// interference-plus-noise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UntrustedRxTerms {
    /// Other untrusted pairs.
    pub untrusted: f64,
    pub jamming: f64,
    /// Downlink data streams.
    pub downlink: f64,
    pub noise: f64,
}

impl UntrustedRxTerms {
    pub fn total(&self) -> f64 {
        self.untrusted + self.jamming + self.downlink + self.noise
    }
}

pub fn untrusted_rx_terms(
    u: usize,
    ls: &LargeScaleState,
    groups: &GroupingState,
    a: &ModeAssignment,
    config: &SystemConfig,
) -> UntrustedRxTerms {
    let scale = config.eta() * config.rho_d();
    let other_pairs: f64 = (0..config.u)
        .filter(|&up| up != u)
        .map(|up| config.rho_u(up) * ls.beta_pair[up])
        .sum();
    let beta_active: f64 = (0..a.len()).map(|m| a.indicator(m) * ls.beta_jam[(m, u)]).sum();
    let jam_streams = config.u as f64 * beta_active;
    let zf_removed: f64 = (0..config.u)
        .map(|up| {
            groups.z_jam[up]
                .iter()
                .map(|&m| a.indicator(m) * ls.gamma_jam[(m, u)])
                .sum::<f64>()
        })
        .sum();
    let user_streams = config.k as f64 * beta_active;
    UntrustedRxTerms {
        untrusted: other_pairs,
        jamming: scale * (jam_streams - zf_removed),
        downlink: scale * user_streams,
        noise: 1.0,
    }
}

/// Denominator `Gamma_u` of the untrusted receiver's SINR.
pub fn untrusted_rx_denominator(
    u: usize,
    ls: &LargeScaleState,
    groups: &GroupingState,
    a: &ModeAssignment,
    config: &SystemConfig,
) -> f64 {
    untrusted_rx_terms(u, ls, groups, a, config).total()
}

/// Aggregate AP-to-AP interference `sum_m sum_i (1 - a_m) a_i beta_mi`.
pub fn ap_cross_gain(ls: &LargeScaleState, a: &ModeAssignment) -> f64 {
    a.monitoring_aps()
        .map(|m| a.downlink_aps().map(|i| ls.beta_ap[(m, i)]).sum::<f64>())
        .sum()
}

/// Closed-form observation SINR of untrusted transmitter `u`, term by term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObservationSinrTerms {
    /// `rho_u (sum of coherent gains)^2`.
    pub signal: f64,
    /// `sum_u' rho_u' sum_m (1 - a_m) beta_mu'`.
    pub received: f64,
    /// Estimate-variance subtraction over the MR-combining APs.
    pub gamma_sub: f64,
    /// `eta rho_d sum_m sum_i (1 - a_m) a_i beta_mi`.
    pub ap_cross: f64,
    pub noise: f64,
}

impl ObservationSinrTerms {
    /// Beamforming uncertainty plus other untrusted transmitters.
    pub fn user_interference(&self) -> f64 {
        self.received - self.gamma_sub
    }

    pub fn sinr(&self) -> f64 {
        if self.signal == 0.0 {
            return 0.0;
        }
        self.signal / (self.user_interference() + self.ap_cross + self.noise)
    }
}

pub fn observation_sinr_terms(
    u: usize,
    ls: &LargeScaleState,
    groups: &GroupingState,
    a: &ModeAssignment,
    config: &SystemConfig,
) -> ObservationSinrTerms {
    let n = config.n as f64;
    let off = |m: usize| 1.0 - a.indicator(m);
    let coherent: f64 = groups.z_obs[u]
        .iter()
        .map(|&m| off(m) * ((n - groups.num_strong_obs(m) as f64) * ls.gamma_obs[(m, u)]).sqrt())
        .sum::<f64>()
        + groups.zbar_obs[u]
            .iter()
            .map(|&m| off(m) * (n * ls.gamma_obs[(m, u)]).sqrt())
            .sum::<f64>();
    let received: f64 = (0..config.u)
        .map(|up| config.rho_u(up) * (0..a.len()).map(|m| off(m) * ls.beta_obs[(m, up)]).sum::<f64>())
        .sum();
    let gamma_sub: f64 = (0..config.u)
        .map(|up| {
            config.rho_u(up)
                * groups.zbar_obs[u]
                    .iter()
                    .map(|&m| off(m) * ls.gamma_obs[(m, up)])
                    .sum::<f64>()
        })
        .sum();
    ObservationSinrTerms {
        signal: config.rho_u(u) * coherent * coherent,
        received,
        gamma_sub,
        ap_cross: config.eta() * config.rho_d() * ap_cross_gain(ls, a),
        noise: (0..a.len()).map(off).sum(),
    }
}

/// Effective SINR at the CPU for observing untrusted transmitter `u`.
pub fn sinr_observation(
    u: usize,
    ls: &LargeScaleState,
    groups: &GroupingState,
    a: &ModeAssignment,
    config: &SystemConfig,
) -> f64 {
    observation_sinr_terms(u, ls, groups, a, config).sinr()
}

/// Monitoring success probability
/// `1 - exp(-sinr_obs * gamma_u / (rho_u * beta_pair_u))`.
pub fn msp(sinr_obs: f64, gamma_u: f64, rho_u: f64, beta_pair_u: f64) -> Result<f64> {
    if !(beta_pair_u > 0.0) || !(rho_u > 0.0) {
        return Err(Error::domain(format!(
            "untrusted link gain and power must be positive (beta = {beta_pair_u}, rho = {rho_u})"
        )));
    }
    if !(sinr_obs >= 0.0) || !(gamma_u >= 0.0) {
        return Err(Error::domain("SINR and interference terms must be nonnegative"));
    }
    Ok(-(-sinr_obs * gamma_u / (rho_u * beta_pair_u)).exp_m1())
}

/// All closed-form figures of one assignment.
pub fn evaluate(
    ls: &LargeScaleState,
    groups: &GroupingState,
    a: &ModeAssignment,
    config: &SystemConfig,
) -> Result<PerformanceReport> {
    let sinr_dl: Vec<f64> = (0..config.k)
        .map(|k| sinr_downlink_user(k, ls, groups, a, config))
        .collect();
    let se_dl: Vec<f64> = sinr_dl.iter().map(|s| spectral_efficiency(*s, config)).collect();
    let gamma_u_denom: Vec<f64> = (0..config.u)
        .map(|u| untrusted_rx_denominator(u, ls, groups, a, config))
        .collect();
    let sinr_obs: Vec<f64> = (0..config.u)
        .map(|u| sinr_observation(u, ls, groups, a, config))
        .collect();
    let msp = (0..config.u)
        .map(|u| msp(sinr_obs[u], gamma_u_denom[u], config.rho_u(u), ls.beta_pair[u]))
        .collect::<Result<Vec<f64>>>()?;
    Ok(PerformanceReport {
        min_se: min_or_inf(&se_dl),
        min_msp: min_or_inf(&msp),
        sinr_dl,
        se_dl,
        gamma_u_denom,
        sinr_obs,
        msp,
    })
}

impl PerformanceReport {
    pub const CSV_HEADER: &'static str = "kind,index,sinr,se,gamma_u,msp";

    /// One row per user (`kind = user`: downlink SINR and SE) and per
    /// untrusted link (`kind = link`: observation SINR, `Gamma_u`, MSP).
    /// Columns that do not apply are left empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", Self::CSV_HEADER);
        for (k, (s, se)) in self.sinr_dl.iter().zip(&self.se_dl).enumerate() {
            let _ = writeln!(out, "user,{k},{s:e},{se:e},,");
        }
        for u in 0..self.msp.len() {
            let _ = writeln!(
                out,
                "link,{u},{:e},,{:e},{:e}",
                self.sinr_obs[u], self.gamma_u_denom[u], self.msp[u]
            );
        }
        out
    }
}
