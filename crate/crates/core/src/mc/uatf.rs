//! Empirical use-and-then-forget terms and the closed-form comparison.
//!
//! Each trial draws channels, pilots and noise, builds the beamformers and
//! records, per receiver, the effective gain of every stream. Expectations
//! over the unit-power data symbols are taken analytically (a stream with
//! gain `c` contributes `|c|^2`), everything else is sampled.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;

use super::{build_beamformers, complex_normal, draw_with, estimate_with, CVector};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::grouping::{GroupingState, ModeAssignment};
use crate::perf::{downlink_sinr_terms, observation_sinr_terms, untrusted_rx_terms};
use crate::rng::{self, TAG_TRIAL};
use crate::scenario::LargeScaleState;

/// Trials per parallel work unit. Blocks are folded in index order, so
/// results do not depend on the thread count.
pub(crate) const BLOCK: usize = 64;

/// Running sums and squared sums of a fixed number of per-trial scalars.
#[derive(Clone, Debug)]
pub(crate) struct Moments {
    pub n: usize,
    sum: Vec<f64>,
    sumsq: Vec<f64>,
    max: Vec<f64>,
}

impl Moments {
    pub fn new(slots: usize) -> Self {
        Moments {
            n: 0,
            sum: vec![0.0; slots],
            sumsq: vec![0.0; slots],
            max: vec![f64::NEG_INFINITY; slots],
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.n += 1;
        for (i, v) in x.iter().enumerate() {
            self.sum[i] += v;
            self.sumsq[i] += v * v;
            self.max[i] = self.max[i].max(*v);
        }
    }

    pub fn merge(&mut self, other: &Moments) {
        self.n += other.n;
        for i in 0..self.sum.len() {
            self.sum[i] += other.sum[i];
            self.sumsq[i] += other.sumsq[i];
            self.max[i] = self.max[i].max(other.max[i]);
        }
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.sum[i] / self.n as f64
    }

    pub fn max(&self, i: usize) -> f64 {
        self.max[i]
    }

    /// Unbiased sample variance; NaN below two samples.
    pub fn var(&self, i: usize) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        let n = self.n as f64;
        ((self.sumsq[i] - self.sum[i] * self.sum[i] / n) / (n - 1.0)).max(0.0)
    }

    pub fn estimate(&self, i: usize) -> TermEstimate {
        TermEstimate {
            mean: self.mean(i),
            std_error: (self.var(i) / self.n as f64).sqrt(),
        }
    }
}

/// Runs `trial(t, &mut slots)` for `t in 0..trials` in parallel blocks and
/// folds the blocks in order.
pub(crate) fn run_trials<F>(trials: usize, slots: usize, trial: F) -> Result<Moments>
where
    F: Fn(u64, &mut [f64]) -> Result<()> + Sync,
{
    let blocks = trials.div_ceil(BLOCK);
    let partial = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = Moments::new(slots);
            let mut buf = vec![0.0; slots];
            for t in b * BLOCK..((b + 1) * BLOCK).min(trials) {
                buf.fill(0.0);
                trial(t as u64, &mut buf)?;
                acc.push(&buf);
            }
            Ok(acc)
        })
        .collect::<Result<Vec<Moments>>>()?;
    let mut total = Moments::new(slots);
    for p in &partial {
        total.merge(p);
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TermEstimate {
    pub mean: f64,
    pub std_error: f64,
}

impl TermEstimate {
    fn sum(parts: &[TermEstimate]) -> TermEstimate {
        TermEstimate {
            mean: parts.iter().map(|p| p.mean).sum(),
            std_error: parts.iter().map(|p| p.std_error * p.std_error).sum::<f64>().sqrt(),
        }
    }

    /// `num / den` with first-order error propagation.
    fn ratio(num: TermEstimate, den: TermEstimate) -> TermEstimate {
        if num.mean == 0.0 {
            return TermEstimate {
                mean: 0.0,
                std_error: num.std_error / den.mean,
            };
        }
        let mean = num.mean / den.mean;
        let rel = ((num.std_error / num.mean).powi(2) + (den.std_error / den.mean).powi(2)).sqrt();
        TermEstimate {
            mean,
            std_error: mean.abs() * rel,
        }
    }
}

/// `|E c|^2` from the moments of the real and imaginary parts of `c`.
fn coherent_power(m: &Moments, re: usize, im: usize) -> TermEstimate {
    let (a, b) = (m.mean(re), m.mean(im));
    let amp = (a * a + b * b).sqrt();
    TermEstimate {
        mean: amp * amp,
        std_error: 2.0 * amp * ((m.var(re) + m.var(im)) / (2.0 * m.n as f64)).sqrt(),
    }
}

/// Downlink user: `|DS|^2`, `E|BU|^2 + sum E|DI|^2 + sum E|JI|^2`,
/// `sum E|UI|^2`, noise and the composite SINR.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DownlinkTerms {
    pub signal: TermEstimate,
    pub interference: TermEstimate,
    pub untrusted: TermEstimate,
    pub noise: TermEstimate,
    pub sinr: TermEstimate,
}

/// Untrusted receiver: the four groups of `Gamma_u` and their sum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UntrustedRxTerms {
    pub untrusted: TermEstimate,
    pub jamming: TermEstimate,
    pub downlink: TermEstimate,
    pub noise: TermEstimate,
    pub gamma: TermEstimate,
}

/// CPU observing untrusted transmitter `u`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObservationTerms {
    pub signal: TermEstimate,
    /// `E|BU|^2` plus other untrusted transmitters.
    pub user_interference: TermEstimate,
    /// Downlink and jamming streams leaking over AP-to-AP channels.
    pub ap_cross: TermEstimate,
    pub noise: TermEstimate,
    pub sinr: TermEstimate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UatfTerms {
    pub trials: usize,
    pub downlink: Vec<DownlinkTerms>,
    pub untrusted_rx: Vec<UntrustedRxTerms>,
    pub observation: Vec<ObservationTerms>,
    /// Beamformer constructions that fell back to MR, summed over trials.
    pub fallbacks: usize,
}

const DL_SLOTS: usize = 5;
const UR_SLOTS: usize = 4;
const OBS_SLOTS: usize = 5;

struct SlotLayout {
    k: usize,
    u: usize,
}

impl SlotLayout {
    fn dl(&self, k: usize) -> usize {
        k * DL_SLOTS
    }

    fn ur(&self, u: usize) -> usize {
        self.k * DL_SLOTS + u * UR_SLOTS
    }

    fn obs(&self, u: usize) -> usize {
        self.k * DL_SLOTS + self.u * UR_SLOTS + u * OBS_SLOTS
    }

    fn fallback(&self) -> usize {
        self.obs(self.u)
    }

    fn len(&self) -> usize {
        self.fallback() + 1
    }
}

fn check_modes(groups: &GroupingState, a: &ModeAssignment) -> Result<()> {
    let consistent = groups.dl.len() == a.len()
        && groups.obs.len() == a.len()
        && (0..a.len())
            .all(|m| groups.dl[m].is_some() == a.is_downlink(m) && groups.obs[m].is_some() != a.is_downlink(m));
    if !consistent {
        return Err(Error::domain("grouping state does not match the mode assignment"));
    }
    Ok(())
}

fn one_trial(
    ls: &LargeScaleState,
    groups: &GroupingState,
    config: &SystemConfig,
    seed: u64,
    t: u64,
    layout: &SlotLayout,
    out: &mut [f64],
) -> Result<()> {
    let (m_aps, k_users, u_links, n) = (ls.num_aps(), config.k, config.u, config.n);
    let mut rng = rng::stream(seed, TAG_TRIAL, t);
    let real = draw_with(ls, n, &mut rng);
    let est = estimate_with(&real, ls, config, &mut rng)?;
    let bf = build_beamformers(&est, ls, groups, config);
    out[layout.fallback()] = bf.fallbacks as f64;

    let amp = Complex64::from((config.eta() * config.rho_d()).sqrt());
    // every transmitted stream: (AP, precoder); users first, then jamming
    let streams = k_users + u_links;
    let tx: Vec<Vec<(usize, &CVector)>> = (0..streams)
        .map(|s| {
            (0..m_aps)
                .filter_map(|m| {
                    if s < k_users {
                        bf.dl[m].as_ref().map(|b| (m, &b[s]))
                    } else {
                        bf.jam[m].as_ref().map(|b| (m, &b[s - k_users]))
                    }
                })
                .collect()
        })
        .collect();

    for k in 0..k_users {
        let gain = |s: usize| -> Complex64 {
            amp * tx[s]
                .iter()
                .map(|(m, b)| real.g_dl[m * k_users + k].dotc(b))
                .sum::<Complex64>()
        };
        let c: Vec<Complex64> = (0..streams).map(gain).collect();
        let base = layout.dl(k);
        out[base] = c[k].re;
        out[base + 1] = c[k].im;
        out[base + 2] = c.iter().map(|z| z.norm_sqr()).sum();
        out[base + 3] = (0..u_links)
            .map(|u| config.rho_u(u) * real.g_utx_user[u * k_users + k].norm_sqr())
            .sum();
        out[base + 4] = complex_normal(&mut rng, 1.0).norm_sqr();
    }

    for u in 0..u_links {
        let gain = |s: usize| -> Complex64 {
            amp * tx[s]
                .iter()
                .map(|(m, b)| real.g_jam[m * u_links + u].dotc(b))
                .sum::<Complex64>()
        };
        let c: Vec<Complex64> = (0..streams).map(gain).collect();
        let base = layout.ur(u);
        out[base] = (0..u_links)
            .filter(|&up| up != u)
            .map(|up| config.rho_u(up) * real.g_pair[up].norm_sqr())
            .sum();
        out[base + 1] = c[k_users..].iter().map(|z| z.norm_sqr()).sum();
        out[base + 2] = c[..k_users].iter().map(|z| z.norm_sqr()).sum();
        out[base + 3] = complex_normal(&mut rng, 1.0).norm_sqr();
    }

    // monitoring side: leakage F_mi b_is and receiver noise per monitoring AP
    let monitors: Vec<usize> = (0..m_aps).filter(|&m| bf.obs[m].is_some()).collect();
    let leak: Vec<Vec<CVector>> = monitors
        .iter()
        .map(|&m| {
            (0..streams)
                .map(|s| {
                    tx[s]
                        .iter()
                        .fold(CVector::zeros(n), |acc, (i, b)| acc + &real.f_ap[m * m_aps + i] * *b)
                })
                .collect()
        })
        .collect();
    let noise: Vec<CVector> = monitors
        .iter()
        .map(|_| CVector::from_fn(n, |_, _| complex_normal(&mut rng, 1.0)))
        .collect();

    for u in 0..u_links {
        let mut from_tx = vec![Complex64::from(0.0); u_links];
        let mut cross = vec![Complex64::from(0.0); streams];
        let mut w = Complex64::from(0.0);
        for (j, &m) in monitors.iter().enumerate() {
            let v = &bf.obs[m].as_ref().expect("monitoring AP has combiners")[u];
            for (up, acc) in from_tx.iter_mut().enumerate() {
                *acc += config.rho_u(up).sqrt() * v.dotc(&real.g_obs[m * u_links + up]);
            }
            for (s, acc) in cross.iter_mut().enumerate() {
                *acc += amp * v.dotc(&leak[j][s]);
            }
            w += v.dotc(&noise[j]);
        }
        let base = layout.obs(u);
        out[base] = from_tx[u].re;
        out[base + 1] = from_tx[u].im;
        out[base + 2] = from_tx.iter().map(|z| z.norm_sqr()).sum();
        out[base + 3] = cross.iter().map(|z| z.norm_sqr()).sum();
        out[base + 4] = w.norm_sqr();
    }
    Ok(())
}

/// Empirical use-and-then-forget terms of every receiver over `trials`
/// independent channel, pilot and noise realizations.
pub fn uatf_terms(
    ls: &LargeScaleState,
    groups: &GroupingState,
    a: &ModeAssignment,
    config: &SystemConfig,
    trials: usize,
    seed: u64,
) -> Result<UatfTerms> {
    if trials == 0 {
        return Err(Error::domain("at least one trial is required"));
    }
    check_modes(groups, a)?;
    let layout = SlotLayout {
        k: config.k,
        u: config.u,
    };
    let mom = run_trials(trials, layout.len(), |t, out| {
        one_trial(ls, groups, config, seed, t, &layout, out)
    })?;

    let downlink = (0..config.k)
        .map(|k| {
            let b = layout.dl(k);
            let signal = coherent_power(&mom, b, b + 1);
            let total = mom.estimate(b + 2);
            let interference = TermEstimate {
                mean: total.mean - signal.mean,
                std_error: total.std_error,
            };
            let untrusted = mom.estimate(b + 3);
            let noise = mom.estimate(b + 4);
            let sinr = TermEstimate::ratio(signal, TermEstimate::sum(&[interference, untrusted, noise]));
            DownlinkTerms {
                signal,
                interference,
                untrusted,
                noise,
                sinr,
            }
        })
        .collect();

    let untrusted_rx = (0..config.u)
        .map(|u| {
            let b = layout.ur(u);
            let parts = [
                mom.estimate(b),
                mom.estimate(b + 1),
                mom.estimate(b + 2),
                mom.estimate(b + 3),
            ];
            UntrustedRxTerms {
                untrusted: parts[0],
                jamming: parts[1],
                downlink: parts[2],
                noise: parts[3],
                gamma: TermEstimate::sum(&parts),
            }
        })
        .collect();

    let observation = (0..config.u)
        .map(|u| {
            let b = layout.obs(u);
            let signal = coherent_power(&mom, b, b + 1);
            let total = mom.estimate(b + 2);
            let user_interference = TermEstimate {
                mean: total.mean - signal.mean,
                std_error: total.std_error,
            };
            let ap_cross = mom.estimate(b + 3);
            let noise = mom.estimate(b + 4);
            let sinr = TermEstimate::ratio(signal, TermEstimate::sum(&[user_interference, ap_cross, noise]));
            ObservationTerms {
                signal,
                user_interference,
                ap_cross,
                noise,
                sinr,
            }
        })
        .collect();

    Ok(UatfTerms {
        trials,
        downlink,
        untrusted_rx,
        observation,
        fallbacks: (mom.mean(layout.fallback()) * trials as f64).round() as usize,
    })
}

/// One closed-form vs. Monte Carlo comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct VerificationRow {
    pub name: &'static str,
    /// User or link index.
    pub index: usize,
    pub closed_form: f64,
    pub empirical: f64,
    pub rel_error: f64,
    pub std_error: f64,
    /// Counted toward [`VerificationReport::passed`]; the others are
    /// reported for reference.
    pub mandatory: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub trials: usize,
    pub tol: f64,
    pub rows: Vec<VerificationRow>,
    /// Fewer than two trials: standard errors are undefined.
    pub insufficient_samples: bool,
    pub fallbacks: usize,
}

impl VerificationReport {
    pub const CSV_HEADER: &'static str = "name,index,closed_form,empirical,rel_error,std_error,mandatory,pass";

    /// All mandatory rows pass and there were enough samples.
    pub fn passed(&self) -> bool {
        !self.insufficient_samples && self.rows.iter().filter(|r| r.mandatory).all(|r| r.pass)
    }

    /// Rows whose relative error exceeds the tolerance.
    pub fn discrepancies(&self) -> impl Iterator<Item = &VerificationRow> {
        self.rows.iter().filter(|r| !r.pass)
    }

    pub fn row(&self, name: &str, index: usize) -> Option<&VerificationRow> {
        self.rows.iter().find(|r| r.name == name && r.index == index)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# trials {} tol {:e}", self.trials, self.tol);
        if self.insufficient_samples {
            let _ = writeln!(out, "# warning: insufficient samples, standard errors are undefined");
        }
        if self.fallbacks > 0 {
            let _ = writeln!(
                out,
                "# warning: {} beamformer constructions fell back to MR",
                self.fallbacks
            );
        }
        let line = |out: &mut String, r: &VerificationRow| {
            let _ = writeln!(
                out,
                "{},{},{:e},{:e},{:e},{:e},{},{}",
                r.name, r.index, r.closed_form, r.empirical, r.rel_error, r.std_error, r.mandatory, r.pass
            );
        };
        let _ = writeln!(out, "# terms\n{}", Self::CSV_HEADER);
        for r in &self.rows {
            line(&mut out, r);
        }
        let _ = writeln!(out, "# discrepancies\n{}", Self::CSV_HEADER);
        for r in self.discrepancies() {
            line(&mut out, r);
        }
        out
    }
}

fn row(name: &'static str, index: usize, closed: f64, emp: TermEstimate, tol: f64, mandatory: bool) -> VerificationRow {
    let rel_error = if closed == emp.mean {
        0.0
    } else {
        (emp.mean - closed).abs() / closed.abs()
    };
    VerificationRow {
        name,
        index,
        closed_form: closed,
        empirical: emp.mean,
        rel_error,
        std_error: emp.std_error,
        mandatory,
        pass: rel_error <= tol,
    }
}

/// Compares every closed-form term with its Monte Carlo estimate, using
/// `config.seed` for the trials.
///
/// Rows: `dl_signal`, `dl_interference`, `dl_untrusted`, `dl_noise`,
/// `dl_sinr` per user; `ur_untrusted`, `ur_jamming`, `ur_downlink`,
/// `ur_noise`, `ur_gamma` per link; `obs_signal`, `obs_ap_cross`,
/// `obs_noise` per link. Reported without counting toward the verdict:
/// `obs_user_interference`, `obs_gamma_sub` (the subtraction implied by the
/// empirical user interference) and `obs_sinr`.
pub fn verify_closed_form(
    ls: &LargeScaleState,
    groups: &GroupingState,
    a: &ModeAssignment,
    config: &SystemConfig,
    trials: usize,
    tol: f64,
) -> Result<VerificationReport> {
    let terms = uatf_terms(ls, groups, a, config, trials, config.seed)?;
    let mut rows = Vec::new();
    for (k, e) in terms.downlink.iter().enumerate() {
        let c = downlink_sinr_terms(k, ls, groups, a, config);
        rows.push(row("dl_signal", k, c.signal, e.signal, tol, true));
        rows.push(row("dl_interference", k, c.interference, e.interference, tol, true));
        rows.push(row("dl_untrusted", k, c.untrusted, e.untrusted, tol, true));
        rows.push(row("dl_noise", k, c.noise, e.noise, tol, true));
        rows.push(row("dl_sinr", k, c.sinr(), e.sinr, tol, true));
    }
    for (u, e) in terms.untrusted_rx.iter().enumerate() {
        let c = untrusted_rx_terms(u, ls, groups, a, config);
        rows.push(row("ur_untrusted", u, c.untrusted, e.untrusted, tol, true));
        rows.push(row("ur_jamming", u, c.jamming, e.jamming, tol, true));
        rows.push(row("ur_downlink", u, c.downlink, e.downlink, tol, true));
        rows.push(row("ur_noise", u, c.noise, e.noise, tol, true));
        rows.push(row("ur_gamma", u, c.total(), e.gamma, tol, true));
    }
    for (u, e) in terms.observation.iter().enumerate() {
        let c = observation_sinr_terms(u, ls, groups, a, config);
        rows.push(row("obs_signal", u, c.signal, e.signal, tol, true));
        rows.push(row("obs_ap_cross", u, c.ap_cross, e.ap_cross, tol, true));
        rows.push(row("obs_noise", u, c.noise, e.noise, tol, true));
        rows.push(row(
            "obs_user_interference",
            u,
            c.user_interference(),
            e.user_interference,
            tol,
            false,
        ));
        let implied_sub = TermEstimate {
            mean: c.received - e.user_interference.mean,
            std_error: e.user_interference.std_error,
        };
        rows.push(row("obs_gamma_sub", u, c.gamma_sub, implied_sub, tol, false));
        rows.push(row("obs_sinr", u, c.sinr(), e.sinr, tol, false));
    }
    Ok(VerificationReport {
        trials,
        tol,
        rows,
        insufficient_samples: trials < 2,
        fallbacks: terms.fallbacks,
    })
}
