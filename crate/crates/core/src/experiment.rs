//! Experiment orchestration: single drops, closed-form verification runs
//! and parameter sweeps, with CSV output.

use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::assignment::{
    brute_force_assignment, colocated_baseline, greedy_mode_assignment, random_mode_assignment, AssignmentResult,
    Strategy, BRUTE_FORCE_MAX_APS,
};
use crate::config::{take_system_config, KeyValues, SystemConfig, DEFAULT_P_UNTRUSTED_WATTS};
use crate::error::{Error, Result};
use crate::grouping::build_groups;
use crate::mc::{verify_closed_form, VerificationReport};
use crate::rng::{derive_seed, TAG_DROP};
use crate::scenario::make_drop;

/// Number of drops averaged per point when `drops` is not given.
pub const DEFAULT_DROPS: usize = 50;

pub const CSV_HEADER: &str =
    "strategy,seed,sweep_var,sweep_val,min_se,min_msp,iterations,candidate_evaluations,runtime_ms";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepVar {
    M,
    N,
    K,
    U,
    GroupingThreshold,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::M => "M",
            SweepVar::N => "N",
            SweepVar::K => "K",
            SweepVar::U => "U",
            SweepVar::GroupingThreshold => "grouping_threshold",
        }
    }
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepVar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "M" => Ok(SweepVar::M),
            "N" => Ok(SweepVar::N),
            "K" => Ok(SweepVar::K),
            "U" => Ok(SweepVar::U),
            "grouping_threshold" => Ok(SweepVar::GroupingThreshold),
            other => Err(Error::config(format!(
                "unknown sweep variable `{other}` (expected M, N, K, U or grouping_threshold)"
            ))),
        }
    }
}

/// QoS floor handed to the assignment strategies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Qos {
    /// Minimum SE of the random baseline on the same drop.
    Auto,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub var: SweepVar,
    pub values: Vec<f64>,
    /// Keep `M * N` at this value while sweeping `N`.
    pub n_total: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub base: SystemConfig,
    pub qos: Qos,
    pub sweep: Option<Sweep>,
    pub drops: usize,
    pub strategies: Vec<Strategy>,
    pub out: Option<PathBuf>,
}

impl ExperimentSpec {
    /// Parses a `key = value` experiment file. System keys are as in
    /// [`crate::config::parse_system_config`]; on top of those:
    /// `sweep_var`, `sweep_values`, `n_total`, `drops`, `strategies`, `out`,
    /// and `qos_se` may be `auto`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;

        let qos = match kv.take_str("qos_se") {
            None => Qos::Fixed(0.0),
            Some((v, _)) if v == "auto" => Qos::Auto,
            Some((v, line)) => Qos::Fixed(
                v.parse()
                    .map_err(|_| Error::parse(line, format!("invalid value `{v}` for `qos_se`")))?,
            ),
        };
        let var = match kv.take_str("sweep_var") {
            None => None,
            Some((v, line)) => Some(v.parse::<SweepVar>().map_err(|e| Error::parse(line, e.to_string()))?),
        };
        let values = kv.take_list::<f64>("sweep_values")?;
        let n_total: Option<usize> = kv.take("n_total")?;
        let sweep = match (var, values) {
            (None, None) => {
                if n_total.is_some() {
                    return Err(Error::config("`n_total` only applies to sweeps over N"));
                }
                None
            }
            (Some(_), None) => return Err(Error::MissingKey("sweep_values".into())),
            (None, Some(_)) => return Err(Error::MissingKey("sweep_var".into())),
            (Some(var), Some((values, line))) => {
                if values.is_empty() {
                    return Err(Error::parse(line, "`sweep_values` is empty"));
                }
                if n_total.is_some() && var != SweepVar::N {
                    return Err(Error::config("`n_total` only applies to sweeps over N"));
                }
                Some(Sweep { var, values, n_total })
            }
        };
        let drops = kv.take("drops")?.unwrap_or(DEFAULT_DROPS);
        if drops == 0 {
            return Err(Error::config("`drops` must be at least 1"));
        }
        let strategies = match kv.take_str("strategies") {
            None => None,
            Some((v, line)) => {
                let list = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<Strategy>().map_err(|e| Error::parse(line, e.to_string())))
                    .collect::<Result<Vec<_>>>()?;
                if list.is_empty() {
                    return Err(Error::parse(line, "`strategies` is empty"));
                }
                Some(list)
            }
        };
        let out = kv.take_str("out").map(|(v, _)| PathBuf::from(v));

        let mut base = take_system_config(&mut kv)?;
        kv.finish()?;
        if let Qos::Fixed(q) = qos {
            base.qos_se = q;
        }
        base.validate()?;

        let strategies = strategies.unwrap_or_else(|| {
            let mut all = vec![Strategy::Greedy, Strategy::Random];
            if base.m <= BRUTE_FORCE_MAX_APS && sweep.is_none() {
                all.push(Strategy::BruteForce);
            }
            all.push(Strategy::Colocated);
            all
        });
        let spec = ExperimentSpec {
            base,
            qos,
            sweep,
            drops,
            strategies,
            out,
        };
        for v in spec.sweep_values() {
            spec.point_config(v)?;
        }
        Ok(spec)
    }

    fn sweep_values(&self) -> Vec<Option<f64>> {
        match &self.sweep {
            None => vec![None],
            Some(s) => s.values.iter().map(|v| Some(*v)).collect(),
        }
    }

    /// The base config with the sweep variable set to `value`.
    pub fn point_config(&self, value: Option<f64>) -> Result<SystemConfig> {
        let mut cfg = self.base.clone();
        let (Some(sweep), Some(v)) = (&self.sweep, value) else {
            return Ok(cfg);
        };
        let count = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 && v < 1e9 {
                Ok(v as usize)
            } else {
                Err(Error::config(format!(
                    "{} must be a nonnegative integer, got {v}",
                    sweep.var
                )))
            }
        };
        let default_tau = self.base.tau == (self.base.k + self.base.u).max(1);
        match sweep.var {
            SweepVar::M => cfg.m = count(v)?,
            SweepVar::N => {
                cfg.n = count(v)?;
                if let Some(total) = sweep.n_total {
                    if cfg.n == 0 || total % cfg.n != 0 {
                        return Err(Error::config(format!(
                            "n_total = {total} is not a multiple of N = {}",
                            cfg.n
                        )));
                    }
                    cfg.m = total / cfg.n;
                }
            }
            SweepVar::K => cfg.k = count(v)?,
            SweepVar::U => {
                cfg.u = count(v)?;
                let p = &self.base.p_untrusted_watts;
                if p.windows(2).any(|w| w[0] != w[1]) {
                    return Err(Error::config("sweeping U needs a single p_untrusted_watts value"));
                }
                let level = p.first().copied().unwrap_or(DEFAULT_P_UNTRUSTED_WATTS);
                cfg.p_untrusted_watts = vec![level; cfg.u];
            }
            SweepVar::GroupingThreshold => cfg.grouping_threshold = v,
        }
        if default_tau {
            cfg.tau = (cfg.k + cfg.u).max(1);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Fill the `runtime_ms` column. Off by default so reruns are
    /// byte-identical.
    pub timing: bool,
}

/// One strategy on one drop.
#[derive(Clone, Debug)]
pub struct ExperimentRow {
    pub strategy: Strategy,
    /// Drop seed.
    pub seed: u64,
    pub sweep_var: Option<SweepVar>,
    pub sweep_val: Option<f64>,
    /// QoS floor in force on this drop.
    pub qos_se: f64,
    pub result: AssignmentResult,
    pub runtime_ms: Option<f64>,
}

impl ExperimentRow {
    pub fn csv_line(&self) -> String {
        let var = self.sweep_var.map(|v| v.name().to_string()).unwrap_or_default();
        let val = self.sweep_val.map(|v| v.to_string()).unwrap_or_default();
        let rt = self.runtime_ms.map(|v| format!("{v:.3}")).unwrap_or_default();
        format!(
            "{},{},{},{},{:e},{:e},{},{},{}",
            self.strategy,
            self.seed,
            var,
            val,
            self.result.report.min_se,
            self.result.report.min_msp,
            self.result.iterations,
            self.result.candidate_evaluations,
            rt
        )
    }
}

/// Seed of drop `index` under master seed `master`. The same index gives the
/// same drop at every sweep point, so points are paired.
pub fn drop_seed(master: u64, index: usize) -> u64 {
    derive_seed(master, TAG_DROP, index as u64)
}

fn timed<T>(timing: bool, f: impl FnOnce() -> Result<T>) -> Result<(T, Option<f64>)> {
    let start = timing.then(Instant::now);
    let v = f()?;
    Ok((v, start.map(|s| s.elapsed().as_secs_f64() * 1e3)))
}

/// One strategy's outcome on one drop.
#[derive(Clone, Debug)]
pub struct StrategyRun {
    pub strategy: Strategy,
    /// QoS floor the strategy ran under.
    pub qos_se: f64,
    pub result: AssignmentResult,
    pub runtime_ms: Option<f64>,
}

/// Runs `strategies` on the drop with seed `seed`. With [`Qos::Auto`] the
/// random baseline runs first and its minimum SE becomes the floor for the
/// other strategies.
pub fn run_drop(
    config: &SystemConfig,
    qos: Qos,
    strategies: &[Strategy],
    seed: u64,
    options: RunOptions,
) -> Result<Vec<StrategyRun>> {
    let mut cfg = config.clone();
    let (_, ls) = make_drop(&cfg, seed)?;
    let mut random = None;
    if let Qos::Auto = qos {
        cfg.qos_se = 0.0;
        let (r, t) = timed(options.timing, || random_mode_assignment(&ls, &cfg, seed))?;
        // with no users the floor is vacuous
        cfg.qos_se = if r.report.min_se.is_finite() {
            r.report.min_se
        } else {
            0.0
        };
        random = Some((r, t));
    }
    let mut out = Vec::with_capacity(strategies.len());
    for &s in strategies {
        let (mut r, t) = match s {
            Strategy::Random => match &random {
                Some((r, t)) => (r.clone(), *t),
                None => timed(options.timing, || random_mode_assignment(&ls, &cfg, seed))?,
            },
            Strategy::Greedy => timed(options.timing, || greedy_mode_assignment(&ls, &cfg))?,
            Strategy::BruteForce => timed(options.timing, || brute_force_assignment(&ls, &cfg))?,
            Strategy::Colocated => timed(options.timing, || colocated_baseline(&cfg, seed)?.evaluate())?,
        };
        r.feasible = r.report.min_se >= cfg.qos_se;
        out.push(StrategyRun {
            strategy: s,
            qos_se: cfg.qos_se,
            result: r,
            runtime_ms: t,
        });
    }
    Ok(out)
}

/// Rows of an experiment in (sweep value, drop, strategy) order.
#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub rows: Vec<ExperimentRow>,
}

impl ExperimentOutput {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{CSV_HEADER}");
        for r in &self.rows {
            let _ = writeln!(out, "{}", r.csv_line());
        }
        out
    }

    /// Mean min-SE and min-MSP (with standard error of the latter) per
    /// sweep value and strategy.
    pub fn summary(&self) -> Vec<SummaryLine> {
        let mut lines: Vec<SummaryLine> = Vec::new();
        for r in &self.rows {
            let pos = lines
                .iter()
                .position(|l| l.strategy == r.strategy && l.sweep_val == r.sweep_val);
            let line = match pos {
                Some(i) => &mut lines[i],
                None => {
                    lines.push(SummaryLine {
                        strategy: r.strategy,
                        sweep_val: r.sweep_val,
                        drops: 0,
                        mean_min_se: 0.0,
                        mean_min_msp: 0.0,
                        se_min_msp: 0.0,
                        infeasible: 0,
                    });
                    lines.last_mut().expect("just pushed")
                }
            };
            line.drops += 1;
            line.mean_min_se += r.result.report.min_se;
            line.mean_min_msp += r.result.report.min_msp;
            line.se_min_msp += r.result.report.min_msp * r.result.report.min_msp;
            if !r.result.feasible {
                line.infeasible += 1;
            }
        }
        for l in &mut lines {
            let n = l.drops as f64;
            l.mean_min_se /= n;
            l.mean_min_msp /= n;
            let var = if l.drops > 1 {
                ((l.se_min_msp - n * l.mean_min_msp * l.mean_min_msp) / (n - 1.0)).max(0.0)
            } else {
                0.0
            };
            l.se_min_msp = (var / n).sqrt();
        }
        lines
    }

    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<10} {:>10} {:>6} {:>12} {:>12} {:>10} {:>10}",
            "strategy", "sweep_val", "drops", "mean_min_se", "mean_min_msp", "se", "below_qos"
        );
        for l in self.summary() {
            let val = l.sweep_val.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "{:<10} {:>10} {:>6} {:>12.4} {:>12.4e} {:>10.2e} {:>10}",
                l.strategy.name(),
                val,
                l.drops,
                l.mean_min_se,
                l.mean_min_msp,
                l.se_min_msp,
                l.infeasible
            );
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryLine {
    pub strategy: Strategy,
    pub sweep_val: Option<f64>,
    pub drops: usize,
    pub mean_min_se: f64,
    pub mean_min_msp: f64,
    pub se_min_msp: f64,
    pub infeasible: usize,
}

/// Every (sweep value, drop) pair of `spec`, drops in parallel, rows
/// assembled in index order.
pub fn run_experiment(spec: &ExperimentSpec, options: RunOptions) -> Result<ExperimentOutput> {
    let points = spec.sweep_values();
    let configs = points
        .iter()
        .map(|v| spec.point_config(*v))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..spec.drops).map(move |d| (p, d)))
        .collect();
    let var = spec.sweep.as_ref().map(|s| s.var);
    let chunks = jobs
        .par_iter()
        .map(|&(p, d)| {
            let seed = drop_seed(spec.base.seed, d);
            let results = run_drop(&configs[p], spec.qos, &spec.strategies, seed, options)?;
            Ok(results
                .into_iter()
                .map(|run| ExperimentRow {
                    strategy: run.strategy,
                    seed,
                    sweep_var: var,
                    sweep_val: points[p],
                    qos_se: run.qos_se,
                    result: run.result,
                    runtime_ms: run.runtime_ms,
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentOutput {
        rows: chunks.into_iter().flatten().collect(),
    })
}

/// One drop of the base config, all requested strategies.
pub fn run_single(spec: &ExperimentSpec, options: RunOptions) -> Result<ExperimentOutput> {
    let single = ExperimentSpec {
        sweep: None,
        drops: 1,
        ..spec.clone()
    };
    run_experiment(&single, options)
}

/// Sweeps `spec`'s variable; errors if the spec has no sweep.
pub fn run_sweep(spec: &ExperimentSpec, options: RunOptions) -> Result<ExperimentOutput> {
    if spec.sweep.is_none() {
        return Err(Error::MissingKey("sweep_var".into()));
    }
    run_experiment(spec, options)
}

/// Closed-form vs Monte Carlo check on the first drop of the base config,
/// under the random baseline's mode assignment.
pub fn run_verify(config: &SystemConfig, trials: usize, tol: f64) -> Result<VerificationReport> {
    if trials == 0 {
        return Err(Error::config("`trials` must be at least 1"));
    }
    if !(tol > 0.0) {
        return Err(Error::config("`tol` must be positive"));
    }
    let seed = drop_seed(config.seed, 0);
    let (_, ls) = make_drop(config, seed)?;
    let a = random_mode_assignment(&ls, config, seed)?.assignment;
    let groups = build_groups(&ls, &a, config)?;
    verify_closed_form(&ls, &groups, &a, config, trials, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "M = 4\nN = 6\nK = 2\nU = 2\n";

    #[test]
    fn minimal_single_has_four_rows() {
        let spec = ExperimentSpec::parse(MINIMAL).unwrap();
        let out = run_single(&spec, RunOptions::default()).unwrap();
        assert_eq!(out.rows.len(), 4);
        let csv = out.to_csv();
        assert!(csv.starts_with(CSV_HEADER));
        assert_eq!(csv.lines().count(), 5);
        // runtime column stays empty without timing
        assert!(csv.lines().skip(1).all(|l| l.ends_with(',')));
    }

    #[test]
    fn missing_key_is_named() {
        let err = ExperimentSpec::parse("M = 4\nN = 6\nK = 2\n").unwrap_err();
        assert!(err.to_string().contains("`U`"), "{err}");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = ExperimentSpec::parse("M = 4\nN = 6\nK = 2\nU = 2\nstrategies = greedy, fast\n").unwrap_err();
        assert!(err.to_string().starts_with("line 5"), "{err}");
        let err = ExperimentSpec::parse("M = 4\nN = 6\nK = 2\nU = 2\nsweep_var = M\nsweep_values = ,\n").unwrap_err();
        assert!(err.to_string().contains("empty"), "{err}");
    }

    #[test]
    fn n_total_must_divide() {
        let base = "M = 20\nN = 6\nK = 2\nU = 2\nsweep_var = N\nn_total = 120\n";
        assert!(ExperimentSpec::parse(&format!("{base}sweep_values = 4, 6, 10\n")).is_ok());
        assert!(ExperimentSpec::parse(&format!("{base}sweep_values = 4, 7\n")).is_err());
        let spec = ExperimentSpec::parse(&format!("{base}sweep_values = 4, 6, 10\n")).unwrap();
        let m: Vec<usize> = [4.0, 6.0, 10.0]
            .iter()
            .map(|v| spec.point_config(Some(*v)).unwrap().m)
            .collect();
        assert_eq!(m, vec![30, 20, 12]);
    }

    #[test]
    fn sweeping_u_tracks_tau_and_powers() {
        let spec = ExperimentSpec::parse("M = 4\nN = 6\nK = 2\nU = 2\nsweep_var = U\nsweep_values = 1, 3\n").unwrap();
        let c = spec.point_config(Some(3.0)).unwrap();
        assert_eq!((c.u, c.tau, c.p_untrusted_watts.len()), (3, 5, 3));
        assert!(spec.point_config(Some(1.5)).is_err());
    }

    #[test]
    fn auto_qos_follows_random_baseline() {
        let spec = ExperimentSpec::parse(&format!("{MINIMAL}qos_se = auto\nstrategies = greedy, random\n")).unwrap();
        let out = run_single(&spec, RunOptions::default()).unwrap();
        let random = &out.rows[1];
        assert_eq!(random.strategy, Strategy::Random);
        assert_eq!(out.rows[0].qos_se, random.result.report.min_se);
        assert!(out.rows[0].result.feasible);
    }

    #[test]
    fn single_is_deterministic() {
        let spec = ExperimentSpec::parse(MINIMAL).unwrap();
        let a = run_single(&spec, RunOptions::default()).unwrap().to_csv();
        let b = run_single(&spec, RunOptions::default()).unwrap().to_csv();
        assert_eq!(a, b);
    }

    #[test]
    fn verify_rejects_zero_trials() {
        let cfg = SystemConfig::new(4, 6, 2, 2);
        assert!(matches!(run_verify(&cfg, 0, 0.05), Err(Error::InvalidConfig(_))));
    }
}
