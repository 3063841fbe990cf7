//! Channel-level Monte Carlo: small-scale fading draws, MMSE estimates from
//! noisy pilots, explicit PZF/MR precoders and combiners, and empirical
//! estimates of every use-and-then-forget SINR term.

mod checks;
mod uatf;

pub use checks::{empirical_msp, power_check, PowerCheck};
pub use uatf::{
    uatf_terms, verify_closed_form, DownlinkTerms, ObservationTerms, TermEstimate, UatfTerms, UntrustedRxTerms,
    VerificationReport, VerificationRow,
};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::SystemConfig;
use crate::error::Result;
use crate::estimation::mmse_filter_gain;
use crate::grouping::{GroupingState, Partition};
use crate::rng::{self, TAG_CHANNEL, TAG_PILOT};
use crate::scenario::LargeScaleState;

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// Ridge added to strong-set Gram matrices, relative to each diagonal
/// entry.
pub const GRAM_RIDGE: f64 = 1e-12;

/// `CN(0, var)` sample.
pub(crate) fn complex_normal<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    Complex64::new(
        s * rng.sample::<f64, _>(StandardNormal),
        s * rng.sample::<f64, _>(StandardNormal),
    )
}

fn complex_normal_vec<R: Rng + ?Sized>(rng: &mut R, n: usize, var: f64) -> CVector {
    CVector::from_fn(n, |_, _| complex_normal(rng, var))
}

/// One realization of every channel in the system.
#[derive(Clone, Debug)]
pub struct ChannelRealization {
    pub n: usize,
    /// AP -> user, index `m * K + k`.
    pub g_dl: Vec<CVector>,
    /// AP -> untrusted receiver, index `m * U + u`.
    pub g_jam: Vec<CVector>,
    /// Untrusted transmitter -> AP, index `m * U + u`.
    pub g_obs: Vec<CVector>,
    /// `F_mi` from AP `i` into AP `m`, index `m * M + i`; zero on the diagonal.
    pub f_ap: Vec<CMatrix>,
    pub g_pair: Vec<Complex64>,
    /// Untrusted transmitter -> user, index `u * K + k`.
    pub g_utx_user: Vec<Complex64>,
}

/// Estimates of the AP-side channels, same layout as [`ChannelRealization`].
#[derive(Clone, Debug)]
pub struct EstimatedChannels {
    pub ghat_dl: Vec<CVector>,
    pub ghat_jam: Vec<CVector>,
    pub ghat_obs: Vec<CVector>,
}

pub(crate) fn draw_with<R: Rng + ?Sized>(ls: &LargeScaleState, n: usize, rng: &mut R) -> ChannelRealization {
    let (m_aps, k_users, u_links) = (ls.num_aps(), ls.num_users(), ls.num_pairs());
    let mut g_dl = Vec::with_capacity(m_aps * k_users);
    let mut g_jam = Vec::with_capacity(m_aps * u_links);
    let mut g_obs = Vec::with_capacity(m_aps * u_links);
    for m in 0..m_aps {
        for k in 0..k_users {
            g_dl.push(complex_normal_vec(rng, n, ls.beta_dl[(m, k)]));
        }
        for u in 0..u_links {
            g_jam.push(complex_normal_vec(rng, n, ls.beta_jam[(m, u)]));
        }
        for u in 0..u_links {
            g_obs.push(complex_normal_vec(rng, n, ls.beta_obs[(m, u)]));
        }
    }
    let mut f_ap = Vec::with_capacity(m_aps * m_aps);
    for m in 0..m_aps {
        for i in 0..m_aps {
            let var = if m == i { 0.0 } else { ls.beta_ap[(m, i)] };
            f_ap.push(CMatrix::from_fn(n, n, |_, _| complex_normal(rng, var)));
        }
    }
    let g_pair = ls.beta_pair.iter().map(|&b| complex_normal(rng, b)).collect();
    let mut g_utx_user = Vec::with_capacity(u_links * k_users);
    for u in 0..u_links {
        for k in 0..k_users {
            g_utx_user.push(complex_normal(rng, ls.beta_utx_user[(u, k)]));
        }
    }
    ChannelRealization {
        n,
        g_dl,
        g_jam,
        g_obs,
        f_ap,
        g_pair,
        g_utx_user,
    }
}

/// Draws `CN(0, beta I)` channels for every link of the drop.
pub fn draw_smallscale(ls: &LargeScaleState, config: &SystemConfig, seed: u64) -> ChannelRealization {
    draw_with(ls, config.n, &mut rng::stream(seed, TAG_CHANNEL, 0))
}

pub(crate) fn estimate_with<R: Rng + ?Sized>(
    real: &ChannelRealization,
    ls: &LargeScaleState,
    config: &SystemConfig,
    rng: &mut R,
) -> Result<EstimatedChannels> {
    let (k_users, u_links) = (ls.num_users(), ls.num_pairs());
    let tau = config.tau;
    let mut est = |g: &CVector, beta: f64, rho: f64| -> Result<CVector> {
        let c = mmse_filter_gain(beta, tau, rho);
        let scale = 1.0 / (tau as f64 * rho).sqrt();
        let noise = complex_normal_vec(rng, g.len(), 1.0);
        Ok((g + noise * Complex64::from(scale)) * Complex64::from(c))
    };
    let mut ghat_dl = Vec::with_capacity(real.g_dl.len());
    let mut ghat_jam = Vec::with_capacity(real.g_jam.len());
    let mut ghat_obs = Vec::with_capacity(real.g_obs.len());
    for m in 0..ls.num_aps() {
        for k in 0..k_users {
            ghat_dl.push(est(
                &real.g_dl[m * k_users + k],
                ls.beta_dl[(m, k)],
                config.rho_pilot_user(),
            )?);
        }
        for u in 0..u_links {
            ghat_jam.push(est(&real.g_jam[m * u_links + u], ls.beta_jam[(m, u)], config.rho_u(u))?);
        }
        for u in 0..u_links {
            ghat_obs.push(est(&real.g_obs[m * u_links + u], ls.beta_obs[(m, u)], config.rho_u(u))?);
        }
    }
    Ok(EstimatedChannels {
        ghat_dl,
        ghat_jam,
        ghat_obs,
    })
}

/// MMSE estimates from one pilot phase: `ghat = c (g + n / sqrt(tau rho))`
/// with `c = tau rho beta / (tau rho beta + 1)` and `n ~ CN(0, I)`.
pub fn mmse_estimate(
    real: &ChannelRealization,
    ls: &LargeScaleState,
    config: &SystemConfig,
    seed: u64,
) -> Result<EstimatedChannels> {
    estimate_with(real, ls, config, &mut rng::stream(seed, TAG_PILOT, 0))
}

/// Precoders (downlink and jamming roles) and combiners (observation role)
/// per AP and target. `None` for APs not in the mode using the role.
#[derive(Clone, Debug, Default)]
pub struct BeamformerSet {
    pub dl: Vec<Option<Vec<CVector>>>,
    pub jam: Vec<Option<Vec<CVector>>>,
    pub obs: Vec<Option<Vec<CVector>>>,
    /// APs whose strong-set Gram matrix could not be factored and that
    /// fell back to MR for every target.
    pub fallbacks: usize,
}

/// Unit-average-power beamformers of one AP: MR `ghat / sqrt(N gamma)` for
/// weak targets, and for the strong set the columns of
/// `G_S (G_S^H G_S)^-1` scaled by `sqrt((N - |S|) gamma)`.
/// Returns `true` as second value when the Gram matrix was not
/// positive definite and MR was used throughout.
pub(crate) fn ap_beamformers(ghat: &[CVector], gammas: &[f64], part: &Partition, n: usize) -> (Vec<CVector>, bool) {
    let mr = |t: usize| -> CVector {
        let norm = (n as f64 * gammas[t]).sqrt();
        if norm > 0.0 {
            &ghat[t] / Complex64::from(norm)
        } else {
            CVector::zeros(n)
        }
    };
    let mut out: Vec<CVector> = (0..ghat.len()).map(mr).collect();
    let s = &part.strong;
    if s.is_empty() {
        return (out, false);
    }
    let g_s = CMatrix::from_fn(n, s.len(), |r, c| ghat[s[c]][r]);
    let mut gram = g_s.adjoint() * &g_s;
    for j in 0..s.len() {
        gram[(j, j)] *= Complex64::from(1.0 + GRAM_RIDGE);
    }
    let Some(chol) = gram.cholesky() else {
        return (out, true);
    };
    let theta = g_s * chol.inverse();
    let dof = (n - s.len()) as f64;
    for (j, &t) in s.iter().enumerate() {
        let scale = (dof * gammas[t]).sqrt();
        out[t] = theta.column(j) * Complex64::from(scale);
    }
    (out, false)
}

fn role_set(
    ghat: &[CVector],
    gammas: &DMatrix<f64>,
    parts: &[Option<Partition>],
    n: usize,
    fallbacks: &mut usize,
) -> Vec<Option<Vec<CVector>>> {
    let targets = gammas.ncols();
    parts
        .iter()
        .enumerate()
        .map(|(m, p)| {
            p.as_ref().map(|p| {
                let g: Vec<f64> = (0..targets).map(|t| gammas[(m, t)]).collect();
                let (b, fell_back) = ap_beamformers(&ghat[m * targets..(m + 1) * targets], &g, p, n);
                *fallbacks += usize::from(fell_back);
                b
            })
        })
        .collect()
}

/// Downlink and jamming precoders of the downlink-mode APs.
pub fn build_precoders(
    est: &EstimatedChannels,
    ls: &LargeScaleState,
    groups: &GroupingState,
    config: &SystemConfig,
) -> BeamformerSet {
    let mut fallbacks = 0;
    let dl = role_set(&est.ghat_dl, &ls.gamma_dl, &groups.dl, config.n, &mut fallbacks);
    let jam = role_set(&est.ghat_jam, &ls.gamma_jam, &groups.jam, config.n, &mut fallbacks);
    BeamformerSet {
        dl,
        jam,
        obs: vec![None; ls.num_aps()],
        fallbacks,
    }
}

/// Observation combiners of the monitoring-mode APs.
pub fn build_combiners(
    est: &EstimatedChannels,
    ls: &LargeScaleState,
    groups: &GroupingState,
    config: &SystemConfig,
) -> BeamformerSet {
    let mut fallbacks = 0;
    let obs = role_set(&est.ghat_obs, &ls.gamma_obs, &groups.obs, config.n, &mut fallbacks);
    BeamformerSet {
        dl: vec![None; ls.num_aps()],
        jam: vec![None; ls.num_aps()],
        obs,
        fallbacks,
    }
}

/// Precoders and combiners of one realization.
pub fn build_beamformers(
    est: &EstimatedChannels,
    ls: &LargeScaleState,
    groups: &GroupingState,
    config: &SystemConfig,
) -> BeamformerSet {
    let tx = build_precoders(est, ls, groups, config);
    let rx = build_combiners(est, ls, groups, config);
    BeamformerSet {
        dl: tx.dl,
        jam: tx.jam,
        obs: rx.obs,
        fallbacks: tx.fallbacks + rx.fallbacks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grouping::{build_groups, classify_strong_weak, ModeAssignment};
    use crate::scenario::make_drop;

    fn small() -> (SystemConfig, LargeScaleState) {
        let cfg = SystemConfig::new(3, 6, 3, 2);
        let (_, ls) = make_drop(&cfg, 21).unwrap();
        (cfg, ls)
    }

    #[test]
    fn dotc_conjugates_the_left_operand() {
        let a = CVector::from_vec(vec![Complex64::new(0.0, 1.0)]);
        let b = CVector::from_vec(vec![Complex64::new(1.0, 0.0)]);
        assert_eq!(a.dotc(&b), Complex64::new(0.0, -1.0));
    }

    #[test]
    fn draws_are_deterministic_and_scaled() {
        let (cfg, mut ls) = small();
        ls.beta_dl[(1, 2)] = 0.0;
        let a = draw_smallscale(&ls, &cfg, 4);
        let b = draw_smallscale(&ls, &cfg, 4);
        assert_eq!(a.g_dl, b.g_dl);
        assert_eq!(a.f_ap, b.f_ap);
        assert!(a.g_dl[3 + 2].iter().all(|z| *z == Complex64::from(0.0)));
        assert!(a.f_ap[0].iter().all(|z| *z == Complex64::from(0.0)));
        assert_ne!(draw_smallscale(&ls, &cfg, 5).g_dl, a.g_dl);
    }

    #[test]
    fn entry_variance_matches_beta() {
        // one CN(0, 1) entry, 1e5 draws; the real part carries half the power
        let mut rng = rng::stream(3, 99, 0);
        let draws: Vec<Complex64> = (0..100_000).map(|_| complex_normal(&mut rng, 2.5)).collect();
        let var = draws.iter().map(|z| z.norm_sqr()).sum::<f64>() / draws.len() as f64;
        let var_re = draws.iter().map(|z| z.re * z.re).sum::<f64>() / draws.len() as f64;
        assert!((var / 2.5 - 1.0).abs() < 0.02, "{var}");
        assert!((var_re / 1.25 - 1.0).abs() < 0.02, "{var_re}");
    }

    #[test]
    fn perfect_pilots_give_near_exact_estimates() {
        let mut cfg = SystemConfig::new(2, 8, 1, 1);
        let (_, mut ls) = make_drop(&cfg, 2).unwrap();
        // tau * rho = 1e6, beta = 1
        cfg.p_pilot_watts = 1e6 / cfg.tau as f64 * cfg.noise_watts();
        cfg.p_untrusted_watts = vec![cfg.p_pilot_watts];
        ls.beta_dl.fill(1.0);
        ls.beta_jam.fill(1.0);
        ls.beta_obs.fill(1.0);
        ls.refresh_gammas(&cfg).unwrap();
        let mut rel = 0.0;
        for s in 0..50 {
            let real = draw_smallscale(&ls, &cfg, s);
            let est = mmse_estimate(&real, &ls, &cfg, s).unwrap();
            rel += (&est.ghat_dl[0] - &real.g_dl[0]).norm() / real.g_dl[0].norm();
        }
        assert!(rel / 50.0 < 0.01);
    }

    #[test]
    fn zero_gain_gives_zero_estimate() {
        let (cfg, mut ls) = small();
        ls.beta_obs[(0, 1)] = 0.0;
        ls.refresh_gammas(&cfg).unwrap();
        let real = draw_smallscale(&ls, &cfg, 1);
        let est = mmse_estimate(&real, &ls, &cfg, 1).unwrap();
        assert_eq!(est.ghat_obs[1].norm(), 0.0);
    }

    #[test]
    fn pzf_nulls_the_other_strong_targets() {
        let (cfg, ls) = small();
        let real = draw_smallscale(&ls, &cfg, 8);
        let est = mmse_estimate(&real, &ls, &cfg, 8).unwrap();
        let gammas: Vec<f64> = (0..3).map(|k| ls.gamma_dl[(0, k)]).collect();
        let part = classify_strong_weak(&[1.0, 1.0, 1.0], 0.1, 5).unwrap();
        let (b, fell_back) = ap_beamformers(&est.ghat_dl[0..3], &gammas, &part, cfg.n);
        assert!(!fell_back);
        for k in 0..3 {
            for kp in 0..3 {
                let inner = est.ghat_dl[kp].dotc(&b[k]).norm() / (est.ghat_dl[kp].norm() * b[k].norm());
                if k == kp {
                    assert!(inner > 1e-3);
                } else {
                    assert!(inner < 1e-10, "{inner}");
                }
            }
        }
    }

    #[test]
    fn degenerate_gram_falls_back_to_mr() {
        let n = 4;
        let part = classify_strong_weak(&[1.0, 1.0], 0.1, 3).unwrap();
        let zero = vec![CVector::zeros(n), CVector::zeros(n)];
        let (b, fell_back) = ap_beamformers(&zero, &[0.0, 0.0], &part, n);
        assert!(fell_back);
        assert!(b.iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn beamformers_follow_the_modes() {
        let (cfg, ls) = small();
        let a = ModeAssignment::from_indicators(&[1, 0, 1]).unwrap();
        let groups = build_groups(&ls, &a, &cfg).unwrap();
        let real = draw_smallscale(&ls, &cfg, 2);
        let est = mmse_estimate(&real, &ls, &cfg, 2).unwrap();
        let bf = build_beamformers(&est, &ls, &groups, &cfg);
        assert!(bf.dl[0].is_some() && bf.dl[1].is_none() && bf.dl[2].is_some());
        assert!(bf.jam[1].is_none() && bf.obs[1].is_some() && bf.obs[0].is_none());
        assert_eq!(bf.dl[0].as_ref().unwrap().len(), 3);
        assert_eq!(bf.obs[1].as_ref().unwrap().len(), 2);
    }
}
