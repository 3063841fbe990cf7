use crate::config::SystemConfig;
use crate::error::Result;
use crate::grouping::{ApMode, ApPartitions, ModeAssignment};
use crate::scenario::LargeScaleState;

use super::{min_or_inf, msp, spectral_efficiency};

/// Evaluates "switch AP `m` from downlink to monitoring" moves in
/// `O(K + U)` each.
///
/// Every sum in the closed forms splits into per-AP contributions that
/// depend only on that AP's mode and partition, so the running totals of
/// the current assignment are kept and a candidate is scored by removing
/// the AP's downlink share and adding its monitoring share. AP-to-AP
/// interference uses per-AP row/column sums over the current mode sets.
#[derive(Clone, Debug)]
pub struct SwitchEvaluator<'a> {
    ls: &'a LargeScaleState,
    config: &'a SystemConfig,
    a: ModeAssignment,
    scale: f64,
    // per-AP contributions, row-major [m * K + k] / [m * U + u]
    dl_coherent: Vec<f64>,
    dl_load: Vec<f64>,
    jam_load: Vec<f64>,
    obs_coherent: Vec<f64>,
    obs_weak: Vec<bool>,
    obs_beta_load: Vec<f64>,
    obs_gamma_load: Vec<f64>,
    // fixed per-target terms
    dl_fixed: Vec<f64>,
    gamma_fixed: Vec<f64>,
    // running totals of the current assignment
    dl_coherent_sum: Vec<f64>,
    dl_load_sum: Vec<f64>,
    jam_load_sum: Vec<f64>,
    obs_coherent_sum: Vec<f64>,
    obs_mr_removed: Vec<f64>,
    obs_received: f64,
    cross: f64,
    monitors: usize,
    col_from_monitors: Vec<f64>,
    row_to_downlink: Vec<f64>,
}

/// Objective values after a candidate move.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MoveScore {
    pub min_msp: f64,
    pub min_se: f64,
}

impl<'a> SwitchEvaluator<'a> {
    pub fn new(ls: &'a LargeScaleState, parts: &ApPartitions, a: ModeAssignment, config: &'a SystemConfig) -> Self {
        let (m_aps, k_users, u_links) = (ls.num_aps(), config.k, config.u);
        let n = config.n as f64;
        let mut dl_coherent = vec![0.0; m_aps * k_users];
        let mut dl_load = vec![0.0; m_aps * k_users];
        let mut jam_load = vec![0.0; m_aps * u_links];
        let mut obs_coherent = vec![0.0; m_aps * u_links];
        let mut obs_weak = vec![false; m_aps * u_links];
        let mut obs_beta_load = vec![0.0; m_aps];
        let mut obs_gamma_load = vec![0.0; m_aps];
        let streams = (k_users + u_links) as f64;
        for m in 0..m_aps {
            let sd = parts.downlink[m].num_strong() as f64;
            for k in 0..k_users {
                let g = ls.gamma_dl[(m, k)];
                dl_coherent[m * k_users + k] = if parts.downlink[m].is_strong(k) {
                    ((n - sd) * g).sqrt()
                } else {
                    (n * g).sqrt()
                };
                dl_load[m * k_users + k] = streams * ls.beta_dl[(m, k)] - sd * g;
            }
            let sj = parts.jamming[m].num_strong() as f64;
            let so = parts.observation[m].num_strong() as f64;
            for u in 0..u_links {
                jam_load[m * u_links + u] = streams * ls.beta_jam[(m, u)] - sj * ls.gamma_jam[(m, u)];
                let g = ls.gamma_obs[(m, u)];
                let strong = parts.observation[m].is_strong(u);
                obs_coherent[m * u_links + u] = if strong { ((n - so) * g).sqrt() } else { (n * g).sqrt() };
                obs_weak[m * u_links + u] = !strong;
                obs_beta_load[m] += config.rho_u(u) * ls.beta_obs[(m, u)];
                obs_gamma_load[m] += config.rho_u(u) * g;
            }
        }
        let dl_fixed = (0..k_users)
            .map(|k| {
                (0..u_links)
                    .map(|u| config.rho_u(u) * ls.beta_utx_user[(u, k)])
                    .sum::<f64>()
                    + 1.0
            })
            .collect();
        let gamma_fixed = (0..u_links)
            .map(|u| {
                (0..u_links)
                    .filter(|&up| up != u)
                    .map(|up| config.rho_u(up) * ls.beta_pair[up])
                    .sum::<f64>()
                    + 1.0
            })
            .collect();
        let mut ev = SwitchEvaluator {
            ls,
            config,
            a,
            scale: config.eta() * config.rho_d(),
            dl_coherent,
            dl_load,
            jam_load,
            obs_coherent,
            obs_weak,
            obs_beta_load,
            obs_gamma_load,
            dl_fixed,
            gamma_fixed,
            dl_coherent_sum: vec![],
            dl_load_sum: vec![],
            jam_load_sum: vec![],
            obs_coherent_sum: vec![],
            obs_mr_removed: vec![],
            obs_received: 0.0,
            cross: 0.0,
            monitors: 0,
            col_from_monitors: vec![],
            row_to_downlink: vec![],
        };
        ev.rebuild_totals();
        ev.rebuild_cross();
        ev
    }

    pub fn assignment(&self) -> &ModeAssignment {
        &self.a
    }

    fn rebuild_totals(&mut self) {
        let (k_users, u_links) = (self.config.k, self.config.u);
        self.dl_coherent_sum = vec![0.0; k_users];
        self.dl_load_sum = vec![0.0; k_users];
        self.jam_load_sum = vec![0.0; u_links];
        self.obs_coherent_sum = vec![0.0; u_links];
        self.obs_mr_removed = vec![0.0; u_links];
        self.obs_received = 0.0;
        self.monitors = 0;
        for m in 0..self.a.len() {
            if self.a.is_downlink(m) {
                for k in 0..k_users {
                    self.dl_coherent_sum[k] += self.dl_coherent[m * k_users + k];
                    self.dl_load_sum[k] += self.dl_load[m * k_users + k];
                }
                for u in 0..u_links {
                    self.jam_load_sum[u] += self.jam_load[m * u_links + u];
                }
            } else {
                self.monitors += 1;
                self.obs_received += self.obs_beta_load[m];
                for u in 0..u_links {
                    self.obs_coherent_sum[u] += self.obs_coherent[m * u_links + u];
                    if self.obs_weak[m * u_links + u] {
                        self.obs_mr_removed[u] += self.obs_gamma_load[m];
                    }
                }
            }
        }
    }

    fn rebuild_cross(&mut self) {
        let m_aps = self.a.len();
        let b = &self.ls.beta_ap;
        self.col_from_monitors = (0..m_aps)
            .map(|j| self.a.monitoring_aps().map(|m| b[(m, j)]).sum())
            .collect();
        self.row_to_downlink = (0..m_aps)
            .map(|j| self.a.downlink_aps().map(|i| b[(j, i)]).sum())
            .collect();
        self.cross = self.a.monitoring_aps().map(|m| self.row_to_downlink[m]).sum();
    }

    /// Scores moving downlink AP `m` to monitoring without changing state.
    pub fn score_switch(&self, m: usize) -> Result<MoveScore> {
        debug_assert!(self.a.is_downlink(m));
        let (k_users, u_links) = (self.config.k, self.config.u);
        let scale = self.scale;

        let mut min_se = f64::INFINITY;
        for k in 0..k_users {
            let coh = self.dl_coherent_sum[k] - self.dl_coherent[m * k_users + k];
            let load = self.dl_load_sum[k] - self.dl_load[m * k_users + k];
            let sinr = if self.monitors + 1 == self.a.len() {
                0.0
            } else {
                scale * coh * coh / (scale * load + self.dl_fixed[k])
            };
            min_se = min_se.min(spectral_efficiency(sinr.max(0.0), self.config));
        }

        let cross = self.cross - self.col_from_monitors[m] + self.row_to_downlink[m] - self.ls.beta_ap[(m, m)];
        let received = self.obs_received + self.obs_beta_load[m];
        let noise = (self.monitors + 1) as f64;
        let mut min_msp = f64::INFINITY;
        for u in 0..u_links {
            let coh = self.obs_coherent_sum[u] + self.obs_coherent[m * u_links + u];
            let mut removed = self.obs_mr_removed[u];
            if self.obs_weak[m * u_links + u] {
                removed += self.obs_gamma_load[m];
            }
            let sinr_obs = if coh == 0.0 {
                0.0
            } else {
                self.config.rho_u(u) * coh * coh / (received - removed + scale * cross + noise)
            };
            let gamma = self.gamma_fixed[u] + scale * (self.jam_load_sum[u] - self.jam_load[m * u_links + u]);
            let p = msp(sinr_obs, gamma.max(0.0), self.config.rho_u(u), self.ls.beta_pair[u])?;
            min_msp = min_msp.min(p);
        }
        Ok(MoveScore { min_msp, min_se })
    }

    /// Applies the move and refreshes the running totals.
    pub fn commit_switch(&mut self, m: usize) {
        debug_assert!(self.a.is_downlink(m));
        let b = &self.ls.beta_ap;
        let m_aps = self.a.len();
        self.cross += self.row_to_downlink[m] - self.col_from_monitors[m] - b[(m, m)];
        self.a.set(m, ApMode::Monitoring);
        for j in 0..m_aps {
            self.col_from_monitors[j] += b[(m, j)];
            self.row_to_downlink[j] -= b[(j, m)];
        }
        self.rebuild_totals();
    }

    /// Minimum MSP and SE of the current assignment.
    pub fn current(&self) -> Result<MoveScore> {
        let (k_users, u_links) = (self.config.k, self.config.u);
        let scale = self.scale;
        let any_dl = self.a.downlink_aps().next().is_some();
        let se: Vec<f64> = (0..k_users)
            .map(|k| {
                let coh = self.dl_coherent_sum[k];
                let sinr = if any_dl {
                    scale * coh * coh / (scale * self.dl_load_sum[k] + self.dl_fixed[k])
                } else {
                    0.0
                };
                spectral_efficiency(sinr, self.config)
            })
            .collect();
        let noise = self.monitors as f64;
        let msps = (0..u_links)
            .map(|u| {
                let coh = self.obs_coherent_sum[u];
                let sinr_obs = if coh == 0.0 {
                    0.0
                } else {
                    self.config.rho_u(u) * coh * coh
                        / (self.obs_received - self.obs_mr_removed[u] + scale * self.cross + noise)
                };
                let gamma = self.gamma_fixed[u] + scale * self.jam_load_sum[u];
                msp(sinr_obs, gamma, self.config.rho_u(u), self.ls.beta_pair[u])
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(MoveScore {
            min_msp: min_or_inf(&msps),
            min_se: min_or_inf(&se),
        })
    }
}
