//! System parameters and the flat `key = value` text format used for
//! configuration and experiment files.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Every scalar parameter of a deployment.
///
/// Powers are in watts and are turned into noise-normalized values by
/// [`SystemConfig::rho_d`] and friends.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemConfig {
    /// Number of access points.
    pub m: usize,
    /// Antennas per access point.
    pub n: usize,
    /// Downlink users.
    pub k: usize,
    /// Untrusted transmitter/receiver pairs.
    pub u: usize,
    pub area_side_m: f64,
    pub p_ap_watts: f64,
    /// One entry per untrusted pair. Used for both data and pilots.
    pub p_untrusted_watts: Vec<f64>,
    /// Pilot power of the legitimate downlink users.
    pub p_pilot_watts: f64,
    pub noise_dbm: f64,
    pub bandwidth_hz: f64,
    /// Pilot length in symbols.
    pub tau: usize,
    /// Coherence interval in symbols.
    pub coherence_len: usize,
    pub grouping_threshold: f64,
    pub d_min_m: f64,
    pub e_min: f64,
    pub qos_se: f64,
    pub seed: u64,
}

pub const DEFAULT_AREA_SIDE_M: f64 = 1000.0;
pub const DEFAULT_P_AP_WATTS: f64 = 1.0;
pub const DEFAULT_P_UNTRUSTED_WATTS: f64 = 0.2;
pub const DEFAULT_NOISE_DBM: f64 = -92.0;
pub const DEFAULT_BANDWIDTH_HZ: f64 = 50e6;
pub const DEFAULT_COHERENCE_LEN: usize = 200;
pub const DEFAULT_GROUPING_THRESHOLD: f64 = 0.05;
pub const DEFAULT_D_MIN_M: f64 = 5.0;
pub const DEFAULT_E_MIN: f64 = 1e-4;

impl SystemConfig {
    /// Paper-style defaults for the given counts; `tau` is set to `k + u`.
    pub fn new(m: usize, n: usize, k: usize, u: usize) -> Self {
        SystemConfig {
            m,
            n,
            k,
            u,
            area_side_m: DEFAULT_AREA_SIDE_M,
            p_ap_watts: DEFAULT_P_AP_WATTS,
            p_untrusted_watts: vec![DEFAULT_P_UNTRUSTED_WATTS; u],
            p_pilot_watts: DEFAULT_P_UNTRUSTED_WATTS,
            noise_dbm: DEFAULT_NOISE_DBM,
            bandwidth_hz: DEFAULT_BANDWIDTH_HZ,
            tau: (k + u).max(1),
            coherence_len: DEFAULT_COHERENCE_LEN,
            grouping_threshold: DEFAULT_GROUPING_THRESHOLD,
            d_min_m: DEFAULT_D_MIN_M,
            e_min: DEFAULT_E_MIN,
            qos_se: 0.0,
            seed: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 1 {
            return Err(Error::config("M must be at least 1"));
        }
        if self.n < 2 {
            return Err(Error::config("N must be at least 2"));
        }
        if self.k + self.u == 0 {
            return Err(Error::config("K + U must be at least 1"));
        }
        if self.p_untrusted_watts.len() != self.u {
            return Err(Error::config(format!(
                "p_untrusted_watts has {} entries, expected U = {}",
                self.p_untrusted_watts.len(),
                self.u
            )));
        }
        if !(self.k + self.u <= self.tau && self.tau <= self.coherence_len) {
            return Err(Error::config(format!(
                "pilot length must satisfy K + U <= tau <= T (K + U = {}, tau = {}, T = {})",
                self.k + self.u,
                self.tau,
                self.coherence_len
            )));
        }
        let positive = [
            ("area_side_m", self.area_side_m),
            ("p_ap_watts", self.p_ap_watts),
            ("p_pilot_watts", self.p_pilot_watts),
            ("bandwidth_hz", self.bandwidth_hz),
            ("d_min_m", self.d_min_m),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive and finite")));
            }
        }
        if let Some(p) = self.p_untrusted_watts.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
            return Err(Error::config(format!(
                "p_untrusted_watts entries must be positive, got {p}"
            )));
        }
        if !(self.grouping_threshold > 0.0 && self.grouping_threshold < 1.0) {
            return Err(Error::config("grouping_threshold must lie in (0, 1)"));
        }
        if !(self.e_min >= 0.0) || !self.noise_dbm.is_finite() || !(self.qos_se >= 0.0) {
            return Err(Error::config("e_min and qos_se must be nonnegative, noise_dbm finite"));
        }
        Ok(())
    }

    /// Noise power in watts.
    pub fn noise_watts(&self) -> f64 {
        10f64.powf((self.noise_dbm - 30.0) / 10.0)
    }

    /// Normalized per-AP transmit power.
    pub fn rho_d(&self) -> f64 {
        self.p_ap_watts / self.noise_watts()
    }

    /// Normalized power of untrusted transmitter `u` (data and pilot).
    pub fn rho_u(&self, u: usize) -> f64 {
        self.p_untrusted_watts[u] / self.noise_watts()
    }

    /// Normalized pilot power of the legitimate users.
    pub fn rho_pilot_user(&self) -> f64 {
        self.p_pilot_watts / self.noise_watts()
    }

    /// Precoder power normalization `1 / (K + U)`.
    pub fn eta(&self) -> f64 {
        1.0 / (self.k + self.u) as f64
    }

    /// Fraction of the coherence interval left for data.
    pub fn prelog(&self) -> f64 {
        (self.coherence_len - self.tau) as f64 / self.coherence_len as f64
    }
}

/// Parsed `key = value` lines with their source line numbers.
///
/// Keys are consumed with the `take_*` accessors; [`KeyValues::finish`]
/// rejects anything left over so typos are reported instead of ignored.
#[derive(Debug, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, (String, usize)>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(line_no, format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(Error::parse(line_no, "empty key"));
            }
            if value.is_empty() {
                return Err(Error::parse(line_no, format!("empty value for `{key}`")));
            }
            if let Some((_, first)) = entries.get(key) {
                return Err(Error::parse(
                    line_no,
                    format!("duplicate key `{key}` (first set on line {first})"),
                ));
            }
            entries.insert(key.to_string(), (value.to_string(), line_no));
        }
        Ok(KeyValues { entries })
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn take_str(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.remove(key)
    }

    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::parse(line, format!("invalid value `{v}` for `{key}`"))),
        }
    }

    pub fn require<T: FromStr>(&mut self, key: &str) -> Result<T> {
        self.take(key)?.ok_or_else(|| Error::MissingKey(key.to_string()))
    }

    /// Comma-separated list.
    pub fn take_list<T: FromStr>(&mut self, key: &str) -> Result<Option<(Vec<T>, usize)>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((v, line)) => {
                let items = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse::<T>()
                            .map_err(|_| Error::parse(line, format!("invalid list item `{s}` for `{key}`")))
                    })
                    .collect::<Result<Vec<T>>>()?;
                Ok(Some((items, line)))
            }
        }
    }

    pub fn finish(self) -> Result<()> {
        match self.entries.into_iter().min_by_key(|(_, (_, line))| *line) {
            None => Ok(()),
            Some((key, (_, line))) => Err(Error::parse(line, format!("unknown key `{key}`"))),
        }
    }
}

/// Reads the system-parameter keys out of `kv`. `M`, `N`, `K` and `U` are
/// required; everything else falls back to the defaults of
/// [`SystemConfig::new`]. `qos_se = auto` is left for the caller.
pub fn take_system_config(kv: &mut KeyValues) -> Result<SystemConfig> {
    let m: usize = kv.require("M")?;
    let n: usize = kv.require("N")?;
    let k: usize = kv.require("K")?;
    let u: usize = kv.require("U")?;
    let mut cfg = SystemConfig::new(m, n, k, u);
    if let Some(v) = kv.take("area_side_m")? {
        cfg.area_side_m = v;
    }
    if let Some(v) = kv.take("p_ap_watts")? {
        cfg.p_ap_watts = v;
    }
    if let Some((list, line)) = kv.take_list::<f64>("p_untrusted_watts")? {
        cfg.p_untrusted_watts = match list.len() {
            1 => vec![list[0]; u],
            len if len == u => list,
            len => {
                return Err(Error::parse(
                    line,
                    format!("p_untrusted_watts needs 1 or U = {u} entries, got {len}"),
                ))
            }
        };
    }
    if let Some(v) = kv.take("p_pilot_watts")? {
        cfg.p_pilot_watts = v;
    }
    if let Some(v) = kv.take("noise_dbm")? {
        cfg.noise_dbm = v;
    }
    if let Some(v) = kv.take("bandwidth_hz")? {
        cfg.bandwidth_hz = v;
    }
    if let Some(v) = kv.take("tau")? {
        cfg.tau = v;
    }
    if let Some(v) = kv.take("T")? {
        cfg.coherence_len = v;
    }
    if let Some(v) = kv.take("grouping_threshold")? {
        cfg.grouping_threshold = v;
    }
    if let Some(v) = kv.take("d_min_m")? {
        cfg.d_min_m = v;
    }
    if let Some(v) = kv.take("e_min")? {
        cfg.e_min = v;
    }
    if let Some(v) = kv.take("seed")? {
        cfg.seed = v;
    }
    Ok(cfg)
}

/// Parses a standalone configuration file (no experiment keys).
pub fn parse_system_config(text: &str) -> Result<SystemConfig> {
    let mut kv = KeyValues::parse(text)?;
    let mut cfg = take_system_config(&mut kv)?;
    if let Some(v) = kv.take("qos_se")? {
        cfg.qos_se = v;
    }
    kv.finish()?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalized_powers() {
        let cfg = SystemConfig::new(4, 6, 2, 2);
        let sigma2 = 10f64.powf(-12.2);
        assert!((cfg.noise_watts() / sigma2 - 1.0).abs() < 1e-12);
        assert!((cfg.rho_d() - 1.0 / sigma2).abs() / cfg.rho_d() < 1e-12);
        assert!((cfg.rho_u(1) - 0.2 / sigma2).abs() / cfg.rho_u(1) < 1e-12);
        assert_eq!(cfg.eta(), 0.25);
        assert_eq!(cfg.tau, 4);
        assert!((cfg.prelog() - 196.0 / 200.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_pilot_length() {
        let mut cfg = SystemConfig::new(4, 6, 3, 2);
        cfg.tau = 4;
        assert!(cfg.validate().is_err());
        cfg.tau = 201;
        assert!(cfg.validate().is_err());
        cfg.tau = 5;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn rejects_single_antenna_and_bad_threshold() {
        let mut cfg = SystemConfig::new(4, 1, 1, 1);
        assert!(cfg.validate().is_err());
        cfg.n = 2;
        cfg.grouping_threshold = 1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn parses_minimal_file() {
        let cfg = parse_system_config("# minimal\nM = 4\nN=6\nK = 2 # users\nU = 2\n").unwrap();
        assert_eq!((cfg.m, cfg.n, cfg.k, cfg.u), (4, 6, 2, 2));
        assert_eq!(cfg.p_untrusted_watts, vec![0.2, 0.2]);
    }

    #[test]
    fn missing_key_is_named() {
        let err = parse_system_config("M = 4\nN = 6\nU = 2\n").unwrap_err();
        assert!(matches!(&err, Error::MissingKey(k) if k == "K"), "{err}");
        assert!(err.to_string().contains("`K`"));
    }

    #[test]
    fn diagnostics_carry_line_numbers() {
        let err = parse_system_config("M = 4\nN = 6\nK = two\nU = 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse_system_config("M = 4\nN = 6\nK = 2\nU = 2\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 5, .. }), "{err}");
        let err = parse_system_config("M = 4\nN 6\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_system_config("M = 4\nM = 5\n").unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn per_pair_powers() {
        let cfg = parse_system_config("M=2\nN=4\nK=1\nU=2\np_untrusted_watts = 0.1, 0.3\n").unwrap();
        assert_eq!(cfg.p_untrusted_watts, vec![0.1, 0.3]);
        assert!(parse_system_config("M=2\nN=4\nK=1\nU=2\np_untrusted_watts = 0.1,0.2,0.3\n").is_err());
    }
}
