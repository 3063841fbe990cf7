//! Precoder power and zero-forcing checks, and the Monte Carlo MSP.

use rand_distr::{Distribution, Exp};

use super::uatf::{run_trials, TermEstimate};
use super::{build_beamformers, complex_normal, draw_with, estimate_with, BeamformerSet, CVector, EstimatedChannels};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::grouping::{GroupingState, Partition};
use crate::rng::{self, TAG_MSP, TAG_TRIAL};
use crate::scenario::LargeScaleState;

/// Power normalization and zero-forcing statistics of the beamformers.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerCheck {
    pub trials: usize,
    /// `||ghat / sqrt(N gamma)||^2` over every downlink-mode AP and
    /// downlink or jamming target.
    pub mr_norm2: TermEstimate,
    /// `||b||^2` over the PZF precoders; NaN mean when no AP has a strong set.
    pub pzf_norm2: TermEstimate,
    /// `E_s ||x_m||^2 / rho_d = eta sum_t ||b_t||^2` over downlink-mode APs,
    /// averaged over the data symbols analytically.
    pub tx_power_ratio: TermEstimate,
    /// The same ratio with the data symbols drawn explicitly.
    pub tx_power_ratio_sampled: TermEstimate,
    /// Largest `|ghat_t'^H b_t| / (||ghat_t'|| ||b_t||)` over strong pairs
    /// `t != t'` of any AP and role.
    pub max_zf_leak: f64,
    pub fallbacks: usize,
}

fn zf_leak(ghat: &[CVector], b: &[CVector], part: &Partition) -> f64 {
    let mut worst: f64 = 0.0;
    for &t in &part.strong {
        for &tp in &part.strong {
            if t == tp {
                continue;
            }
            let den = ghat[tp].norm() * b[t].norm();
            if den > 0.0 {
                worst = worst.max(ghat[tp].dotc(&b[t]).norm() / den);
            }
        }
    }
    worst
}

fn leak_over_roles(est: &EstimatedChannels, bf: &BeamformerSet, groups: &GroupingState, k: usize, u: usize) -> f64 {
    let mut worst: f64 = 0.0;
    let roles = [
        (&est.ghat_dl, &bf.dl, &groups.dl, k),
        (&est.ghat_jam, &bf.jam, &groups.jam, u),
        (&est.ghat_obs, &bf.obs, &groups.obs, u),
    ];
    for (ghat, sets, parts, targets) in roles {
        for (m, (b, p)) in sets.iter().zip(parts).enumerate() {
            if let (Some(b), Some(p)) = (b, p) {
                worst = worst.max(zf_leak(&ghat[m * targets..(m + 1) * targets], b, p));
            }
        }
    }
    worst
}

/// Sample statistics of beamformer norms, per-AP transmit power and
/// zero-forcing residuals over `trials` realizations.
pub fn power_check(
    ls: &LargeScaleState,
    groups: &GroupingState,
    config: &SystemConfig,
    trials: usize,
    seed: u64,
) -> Result<PowerCheck> {
    if trials == 0 {
        return Err(Error::domain("at least one trial is required"));
    }
    let (m_aps, k, u, n) = (ls.num_aps(), config.k, config.u, config.n);
    let tx_aps: Vec<usize> = (0..m_aps).filter(|&m| groups.dl[m].is_some()).collect();
    let strong_count: usize = tx_aps
        .iter()
        .map(|&m| groups.num_strong_dl(m) + groups.num_strong_jam(m))
        .sum();
    let mom = run_trials(trials, 6, |t, out| {
        let mut rng = rng::stream(seed, TAG_TRIAL, t);
        let real = draw_with(ls, n, &mut rng);
        let est = estimate_with(&real, ls, config, &mut rng)?;
        let bf = build_beamformers(&est, ls, groups, config);

        let mut mr = 0.0;
        let mut pzf = 0.0;
        let mut power = 0.0;
        let mut sampled = 0.0;
        for &m in &tx_aps {
            let roles = [
                (&est.ghat_dl[m * k..(m + 1) * k], &ls.gamma_dl, &bf.dl[m], &groups.dl[m]),
                (
                    &est.ghat_jam[m * u..(m + 1) * u],
                    &ls.gamma_jam,
                    &bf.jam[m],
                    &groups.jam[m],
                ),
            ];
            let mut x = CVector::zeros(n);
            let mut norms = 0.0;
            for (ghat, gamma, b, part) in roles {
                let (b, part) = (b.as_ref().expect("downlink AP"), part.as_ref().expect("downlink AP"));
                for (t, g) in ghat.iter().enumerate() {
                    mr += g.norm_squared() / (n as f64 * gamma[(m, t)]);
                    if part.is_strong(t) {
                        pzf += b[t].norm_squared();
                    }
                    norms += b[t].norm_squared();
                    x += &b[t] * complex_normal(&mut rng, 1.0);
                }
            }
            power += norms * config.eta();
            sampled += x.norm_squared() * config.eta();
        }
        let pairs = tx_aps.len() * (k + u);
        out[0] = mr / pairs as f64;
        out[1] = if strong_count > 0 {
            pzf / strong_count as f64
        } else {
            f64::NAN
        };
        out[2] = power / tx_aps.len() as f64;
        out[3] = leak_over_roles(&est, &bf, groups, k, u);
        out[4] = bf.fallbacks as f64;
        out[5] = sampled / tx_aps.len() as f64;
        Ok(())
    })?;
    Ok(PowerCheck {
        trials,
        mr_norm2: mom.estimate(0),
        pzf_norm2: mom.estimate(1),
        tx_power_ratio: mom.estimate(2),
        tx_power_ratio_sampled: mom.estimate(5),
        max_zf_leak: mom.max(3),
        fallbacks: (mom.mean(4) * trials as f64).round() as usize,
    })
}

/// Fraction of `trials` draws of `|g|^2 ~ Exp(mean beta_pair_u)` for which
/// `sinr_obs >= rho_u |g|^2 / gamma_u`.
pub fn empirical_msp(
    sinr_obs: f64,
    gamma_u: f64,
    rho_u: f64,
    beta_pair_u: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if !(beta_pair_u > 0.0) || !(rho_u > 0.0) || !(sinr_obs >= 0.0) || !(gamma_u >= 0.0) {
        return Err(Error::domain(
            "MSP inputs must be nonnegative with positive gain and power",
        ));
    }
    if trials == 0 {
        return Err(Error::domain("at least one trial is required"));
    }
    let exp = Exp::new(1.0 / beta_pair_u).map_err(|e| Error::domain(e.to_string()))?;
    let mut rng = rng::stream(seed, TAG_MSP, 0);
    let hits = (0..trials)
        .filter(|_| {
            let g2: f64 = exp.sample(&mut rng);
            sinr_obs * gamma_u >= rho_u * g2
        })
        .count();
    Ok(hits as f64 / trials as f64)
}
