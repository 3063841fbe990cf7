//! AP mode-assignment strategies: the greedy max-min-MSP search, a random
//! baseline, exhaustive enumeration for small networks, and the co-located
//! antenna-array baseline.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rayon::prelude::*;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::grouping::{build_groups, ApMode, ApPartitions, GroupingState, ModeAssignment};
use crate::perf::{evaluate, PerformanceReport, SwitchEvaluator};
use crate::rng::{self, TAG_COLOCATED, TAG_RANDOM_MODE};
use crate::scenario::{build_large_scale, place_nodes, LargeScaleState, Layout, Point};

/// Largest network [`brute_force_assignment`] accepts.
pub const BRUTE_FORCE_MAX_APS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Strategy {
    Greedy,
    Random,
    BruteForce,
    Colocated,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Greedy => "greedy",
            Strategy::Random => "random",
            Strategy::BruteForce => "brute",
            Strategy::Colocated => "colocated",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "greedy" => Ok(Strategy::Greedy),
            "random" => Ok(Strategy::Random),
            "brute" | "brute_force" => Ok(Strategy::BruteForce),
            "colocated" => Ok(Strategy::Colocated),
            other => Err(Error::config(format!(
                "unknown strategy `{other}` (expected greedy, random, brute or colocated)"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct AssignmentResult {
    pub strategy: Strategy,
    pub assignment: ModeAssignment,
    pub report: PerformanceReport,
    /// Accepted greedy moves.
    pub iterations: usize,
    pub candidate_evaluations: usize,
    /// Whether the returned assignment meets the QoS floor.
    pub feasible: bool,
    /// Accepted objective values, starting with the all-downlink value.
    pub trace: Vec<f64>,
}

impl AssignmentResult {
    fn finish(
        strategy: Strategy,
        ls: &LargeScaleState,
        a: ModeAssignment,
        config: &SystemConfig,
        iterations: usize,
        candidate_evaluations: usize,
        trace: Vec<f64>,
    ) -> Result<Self> {
        let groups = build_groups(ls, &a, config)?;
        let report = evaluate(ls, &groups, &a, config)?;
        Ok(AssignmentResult {
            strategy,
            feasible: report.min_se >= config.qos_se,
            assignment: a,
            report,
            iterations,
            candidate_evaluations,
            trace,
        })
    }
}

/// Greedy AP mode assignment.
///
/// Starts from all APs in downlink. Each round scores moving every
/// remaining downlink AP to monitoring, drops candidates whose minimum SE
/// falls below `qos_se`, and accepts the best one (lowest index on ties)
/// if it raises the minimum MSP by at least `e_min`.
pub fn greedy_mode_assignment(ls: &LargeScaleState, config: &SystemConfig) -> Result<AssignmentResult> {
    let m_aps = ls.num_aps();
    let parts = ApPartitions::compute(ls, config)?;
    let mut ev = SwitchEvaluator::new(ls, &parts, ModeAssignment::all_downlink(m_aps), config);
    let mut best = ev.current()?.min_msp;
    let mut trace = vec![best];
    let mut iterations = 0;
    let mut evaluations = 0;

    if config.u > 0 {
        loop {
            let candidates: Vec<usize> = ev.assignment().downlink_aps().collect();
            evaluations += candidates.len();
            let mut pick: Option<(usize, f64)> = None;
            for m in candidates {
                let score = ev.score_switch(m)?;
                if score.min_se < config.qos_se {
                    continue;
                }
                if pick.is_none_or(|(_, v)| score.min_msp > v) {
                    pick = Some((m, score.min_msp));
                }
            }
            let Some((m, value)) = pick else { break };
            if value - best < config.e_min {
                break;
            }
            ev.commit_switch(m);
            best = value;
            trace.push(best);
            iterations += 1;
        }
    }

    let a = ev.assignment().clone();
    AssignmentResult::finish(Strategy::Greedy, ls, a, config, iterations, evaluations, trace)
}

/// Puts a uniformly random subset of `floor(M / 2)` APs in monitoring mode.
pub fn random_mode_assignment(ls: &LargeScaleState, config: &SystemConfig, seed: u64) -> Result<AssignmentResult> {
    let m_aps = ls.num_aps();
    let mut rng = rng::stream(seed, TAG_RANDOM_MODE, 0);
    let mut a = ModeAssignment::all_downlink(m_aps);
    for m in index::sample(&mut rng, m_aps, m_aps / 2) {
        a.set(m, ApMode::Monitoring);
    }
    let mut r = AssignmentResult::finish(Strategy::Random, ls, a, config, 0, 1, vec![])?;
    r.trace.push(r.report.min_msp);
    Ok(r)
}

/// Max-min-MSP assignment over all `2^M` mode vectors meeting the QoS
/// floor. Ties go to the lexicographically smallest indicator vector.
/// Returns the all-downlink assignment, marked infeasible, when no vector
/// meets the floor.
pub fn brute_force_assignment(ls: &LargeScaleState, config: &SystemConfig) -> Result<AssignmentResult> {
    let m_aps = ls.num_aps();
    if m_aps > BRUTE_FORCE_MAX_APS {
        return Err(Error::TooLarge(format!(
            "exhaustive search supports at most {BRUTE_FORCE_MAX_APS} APs, got {m_aps}"
        )));
    }
    let parts = ApPartitions::compute(ls, config)?;
    let total = 1usize << m_aps;
    let decode = |v: usize| {
        let bits: Vec<u8> = (0..m_aps).map(|m| ((v >> (m_aps - 1 - m)) & 1) as u8).collect();
        ModeAssignment::from_indicators(&bits)
    };
    let scores = (0..total)
        .into_par_iter()
        .map(|v| {
            let a = decode(v)?;
            let groups = GroupingState::from_partitions(&parts, &a);
            let r = evaluate(ls, &groups, &a, config)?;
            Ok((r.min_se >= config.qos_se, r.min_msp))
        })
        .collect::<Result<Vec<(bool, f64)>>>()?;

    let mut pick: Option<(usize, f64)> = None;
    for (v, &(feasible, value)) in scores.iter().enumerate() {
        if feasible && pick.is_none_or(|(_, best)| value > best) {
            pick = Some((v, value));
        }
    }
    let a = match pick {
        Some((v, _)) => decode(v)?,
        None => ModeAssignment::all_downlink(m_aps),
    };
    let mut r = AssignmentResult::finish(Strategy::BruteForce, ls, a, config, 0, total, vec![])?;
    r.trace.push(r.report.min_msp);
    Ok(r)
}

/// Two-site antenna-array baseline: one array of `MN / 2` antennas
/// monitors while the other serves users and jams.
#[derive(Clone, Debug)]
pub struct ColocatedScenario {
    /// The input config with `M = 2` and `N = MN / 2`.
    pub config: SystemConfig,
    pub layout: Layout,
    pub ls: LargeScaleState,
    pub assignment: ModeAssignment,
    pub groups: GroupingState,
}

impl ColocatedScenario {
    pub fn evaluate(&self) -> Result<AssignmentResult> {
        let report = evaluate(&self.ls, &self.groups, &self.assignment, &self.config)?;
        Ok(AssignmentResult {
            strategy: Strategy::Colocated,
            feasible: report.min_se >= self.config.qos_se,
            assignment: self.assignment.clone(),
            trace: vec![report.min_msp],
            report,
            iterations: 0,
            candidate_evaluations: 1,
        })
    }
}

/// Builds the co-located baseline for drop `seed`. Users and untrusted
/// nodes sit where [`place_nodes`] puts them for the same seed; the two
/// arrays sit at the area center, `d_min` apart.
pub fn colocated_baseline(config: &SystemConfig, seed: u64) -> Result<ColocatedScenario> {
    let antennas = config.m * config.n;
    if !antennas.is_multiple_of(2) {
        return Err(Error::config(format!(
            "co-located baseline needs M*N even, got {antennas}"
        )));
    }
    let mut cfg = config.clone();
    cfg.m = 2;
    cfg.n = antennas / 2;
    cfg.validate()?;

    let mut layout = place_nodes(config, seed);
    let c = config.area_side_m / 2.0;
    let half = config.d_min_m / 2.0;
    layout.aps = vec![Point::new(c - half, c), Point::new(c + half, c)];
    let ls = build_large_scale(&layout, &cfg, rng::derive_seed(seed, TAG_COLOCATED, 0))?;
    let assignment = ModeAssignment::from_indicators(&[0, 1])?;
    let groups = build_groups(&ls, &assignment, &cfg)?;
    Ok(ColocatedScenario {
        config: cfg,
        layout,
        ls,
        assignment,
        groups,
    })
}
