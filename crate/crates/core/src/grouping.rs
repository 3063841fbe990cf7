//! AP operating modes and the per-AP strong/weak target partitions that
//! decide which targets get partial zero-forcing and which get maximum
//! ratio processing.

use std::fmt;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::scenario::LargeScaleState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ApMode {
    /// Serves users and jams untrusted receivers (`a_m = 1`).
    Downlink,
    /// Observes untrusted transmitters (`a_m = 0`).
    Monitoring,
}

/// Operating mode of every AP.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ModeAssignment {
    modes: Vec<ApMode>,
}

impl ModeAssignment {
    pub fn uniform(m: usize, mode: ApMode) -> Self {
        ModeAssignment { modes: vec![mode; m] }
    }

    pub fn all_downlink(m: usize) -> Self {
        Self::uniform(m, ApMode::Downlink)
    }

    pub fn all_monitoring(m: usize) -> Self {
        Self::uniform(m, ApMode::Monitoring)
    }

    /// From indicator values `a_m`; anything other than 0 or 1 is rejected.
    pub fn from_indicators(bits: &[u8]) -> Result<Self> {
        let modes = bits
            .iter()
            .map(|b| match b {
                1 => Ok(ApMode::Downlink),
                0 => Ok(ApMode::Monitoring),
                other => Err(Error::domain(format!("mode indicator must be 0 or 1, got {other}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ModeAssignment { modes })
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn mode(&self, m: usize) -> ApMode {
        self.modes[m]
    }

    pub fn set(&mut self, m: usize, mode: ApMode) {
        self.modes[m] = mode;
    }

    pub fn is_downlink(&self, m: usize) -> bool {
        self.modes[m] == ApMode::Downlink
    }

    /// `a_m` as 0/1.
    pub fn indicator(&self, m: usize) -> f64 {
        if self.is_downlink(m) {
            1.0
        } else {
            0.0
        }
    }

    pub fn downlink_aps(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.modes.len()).filter(|&m| self.is_downlink(m))
    }

    pub fn monitoring_aps(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.modes.len()).filter(|&m| !self.is_downlink(m))
    }

    pub fn num_monitoring(&self) -> usize {
        self.monitoring_aps().count()
    }
}

impl fmt::Display for ModeAssignment {
    /// The indicator vector as a string of 0s and 1s, AP 0 first.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in &self.modes {
            f.write_str(if *m == ApMode::Downlink { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Split of one AP's targets into strong and weak sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    /// Ascending target indices.
    pub strong: Vec<usize>,
    /// Ascending target indices.
    pub weak: Vec<usize>,
    mask: Vec<bool>,
}

impl Partition {
    pub fn is_strong(&self, target: usize) -> bool {
        self.mask[target]
    }

    pub fn num_strong(&self) -> usize {
        self.strong.len()
    }

    pub fn num_targets(&self) -> usize {
        self.mask.len()
    }

    fn from_mask(mask: Vec<bool>) -> Self {
        let strong = (0..mask.len()).filter(|&i| mask[i]).collect();
        let weak = (0..mask.len()).filter(|&i| !mask[i]).collect();
        Partition { strong, weak, mask }
    }
}

/// Targets whose share of the AP's total channel gain is at least
/// `threshold` are strong, keeping at most the `cap` largest (ties go to
/// the lower index). All-zero gains leave every target weak.
pub fn classify_strong_weak(betas: &[f64], threshold: f64, cap: usize) -> Result<Partition> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::domain(format!("threshold must lie in (0, 1), got {threshold}")));
    }
    if let Some(b) = betas.iter().find(|b| !(**b >= 0.0)) {
        return Err(Error::domain(format!("channel gains must be >= 0, got {b}")));
    }
    let total: f64 = betas.iter().sum();
    let mut mask = vec![false; betas.len()];
    if total > 0.0 {
        let mut candidates: Vec<usize> = (0..betas.len()).filter(|&i| betas[i] / total >= threshold).collect();
        candidates.sort_by(|&a, &b| betas[b].total_cmp(&betas[a]).then(a.cmp(&b)));
        for &i in candidates.iter().take(cap) {
            mask[i] = true;
        }
    }
    Ok(Partition::from_mask(mask))
}

/// Partitions of every AP for all three roles, computed as if each AP were
/// in the mode that uses the role. They depend only on the large-scale
/// state, so assignment searches compute them once.
#[derive(Clone, Debug)]
pub struct ApPartitions {
    pub downlink: Vec<Partition>,
    pub jamming: Vec<Partition>,
    pub observation: Vec<Partition>,
}

impl ApPartitions {
    pub fn compute(ls: &LargeScaleState, config: &SystemConfig) -> Result<Self> {
        let cap = config.n.saturating_sub(1);
        let thr = config.grouping_threshold;
        let rows = |mat: &nalgebra::DMatrix<f64>| -> Result<Vec<Partition>> {
            (0..mat.nrows())
                .map(|m| {
                    let row: Vec<f64> = mat.row(m).iter().copied().collect();
                    classify_strong_weak(&row, thr, cap)
                })
                .collect()
        };
        Ok(ApPartitions {
            downlink: rows(&ls.beta_dl)?,
            jamming: rows(&ls.beta_jam)?,
            observation: rows(&ls.beta_obs)?,
        })
    }
}

/// Strong/weak sets of the APs in the relevant mode plus, per target, the
/// APs that use partial zero-forcing (`z_*`) or maximum ratio (`zbar_*`)
/// toward it.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupingState {
    /// Downlink users, `Some` for downlink-mode APs.
    pub dl: Vec<Option<Partition>>,
    /// Jammed untrusted receivers, `Some` for downlink-mode APs.
    pub jam: Vec<Option<Partition>>,
    /// Observed untrusted transmitters, `Some` for monitoring-mode APs.
    pub obs: Vec<Option<Partition>>,
    pub z_dl: Vec<Vec<usize>>,
    pub zbar_dl: Vec<Vec<usize>>,
    pub z_jam: Vec<Vec<usize>>,
    pub zbar_jam: Vec<Vec<usize>>,
    pub z_obs: Vec<Vec<usize>>,
    pub zbar_obs: Vec<Vec<usize>>,
}

fn z_sets(parts: &[Option<Partition>], targets: usize) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let mut z = vec![Vec::new(); targets];
    let mut zbar = vec![Vec::new(); targets];
    for (m, p) in parts.iter().enumerate() {
        if let Some(p) = p {
            for t in 0..targets {
                if p.is_strong(t) {
                    z[t].push(m);
                } else {
                    zbar[t].push(m);
                }
            }
        }
    }
    (z, zbar)
}

impl GroupingState {
    pub fn from_partitions(parts: &ApPartitions, a: &ModeAssignment) -> Self {
        let pick = |all: &[Partition], want: ApMode| -> Vec<Option<Partition>> {
            all.iter()
                .enumerate()
                .map(|(m, p)| (a.mode(m) == want).then(|| p.clone()))
                .collect()
        };
        let dl = pick(&parts.downlink, ApMode::Downlink);
        let jam = pick(&parts.jamming, ApMode::Downlink);
        let obs = pick(&parts.observation, ApMode::Monitoring);
        let k = parts.downlink.first().map_or(0, Partition::num_targets);
        let u = parts.jamming.first().map_or(0, Partition::num_targets);
        let (z_dl, zbar_dl) = z_sets(&dl, k);
        let (z_jam, zbar_jam) = z_sets(&jam, u);
        let (z_obs, zbar_obs) = z_sets(&obs, u);
        GroupingState {
            dl,
            jam,
            obs,
            z_dl,
            zbar_dl,
            z_jam,
            zbar_jam,
            z_obs,
            zbar_obs,
        }
    }

    /// `|S_D[m]|`, zero for APs not in downlink mode.
    pub fn num_strong_dl(&self, m: usize) -> usize {
        self.dl[m].as_ref().map_or(0, Partition::num_strong)
    }

    pub fn num_strong_jam(&self, m: usize) -> usize {
        self.jam[m].as_ref().map_or(0, Partition::num_strong)
    }

    pub fn num_strong_obs(&self, m: usize) -> usize {
        self.obs[m].as_ref().map_or(0, Partition::num_strong)
    }
}

/// Groups every AP for its current mode, strong sets capped at `N - 1`.
pub fn build_groups(ls: &LargeScaleState, a: &ModeAssignment, config: &SystemConfig) -> Result<GroupingState> {
    if a.len() != ls.num_aps() {
        return Err(Error::domain(format!(
            "assignment covers {} APs, state has {}",
            a.len(),
            ls.num_aps()
        )));
    }
    Ok(GroupingState::from_partitions(&ApPartitions::compute(ls, config)?, a))
}
