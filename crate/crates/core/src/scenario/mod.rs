//! Network drops: node placement, path loss, correlated log-normal
//! shadowing and the resulting large-scale fading state.

mod io;

pub use io::{read_state, write_state};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::estimation::mmse_quality;
use crate::rng::{self, TAG_LAYOUT, TAG_SHADOW, TAG_SHADOW_INDEP};

/// Shadowing standard deviation in dB.
pub const SHADOW_STD_DB: f64 = 4.0;
/// Distance over which the shadowing correlation halves.
pub const SHADOW_DECORRELATION_M: f64 = 9.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn euclid(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Positions of every node of a drop, in meters.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub aps: Vec<Point>,
    pub users: Vec<Point>,
    pub untrusted_tx: Vec<Point>,
    pub untrusted_rx: Vec<Point>,
    pub d_min_m: f64,
}

impl Layout {
    /// Link distance, never below the configured minimum.
    pub fn distance(&self, a: &Point, b: &Point) -> f64 {
        a.euclid(b).max(self.d_min_m)
    }

    /// User-side nodes in shadowing order: users, untrusted receivers,
    /// untrusted transmitters.
    pub fn user_side_nodes(&self) -> Vec<Point> {
        self.users
            .iter()
            .chain(&self.untrusted_rx)
            .chain(&self.untrusted_tx)
            .copied()
            .collect()
    }
}

/// Large-scale fading coefficients (linear scale) and MMSE estimate
/// variances of one drop.
#[derive(Clone, Debug, PartialEq)]
pub struct LargeScaleState {
    /// AP -> user, M x K.
    pub beta_dl: DMatrix<f64>,
    /// AP -> untrusted receiver, M x U.
    pub beta_jam: DMatrix<f64>,
    /// Untrusted transmitter -> AP, M x U.
    pub beta_obs: DMatrix<f64>,
    /// AP -> AP, M x M, zero diagonal.
    pub beta_ap: DMatrix<f64>,
    /// Untrusted transmitter u -> untrusted receiver u.
    pub beta_pair: Vec<f64>,
    /// Untrusted transmitter -> user, U x K.
    pub beta_utx_user: DMatrix<f64>,
    pub gamma_dl: DMatrix<f64>,
    pub gamma_jam: DMatrix<f64>,
    pub gamma_obs: DMatrix<f64>,
}

impl LargeScaleState {
    pub fn num_aps(&self) -> usize {
        self.beta_dl.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.beta_dl.ncols()
    }

    pub fn num_pairs(&self) -> usize {
        self.beta_pair.len()
    }

    /// Recomputes the three estimate-variance matrices from the betas.
    pub fn refresh_gammas(&mut self, config: &SystemConfig) -> Result<()> {
        let tau = config.tau;
        let rho_user = config.rho_pilot_user();
        self.gamma_dl = map_checked(&self.beta_dl, |_, _, b| mmse_quality(b, tau, rho_user))?;
        self.gamma_jam = map_checked(&self.beta_jam, |_, u, b| mmse_quality(b, tau, config.rho_u(u)))?;
        self.gamma_obs = map_checked(&self.beta_obs, |_, u, b| mmse_quality(b, tau, config.rho_u(u)))?;
        Ok(())
    }
}

fn map_checked(src: &DMatrix<f64>, f: impl Fn(usize, usize, f64) -> Result<f64>) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(src.nrows(), src.ncols());
    for r in 0..src.nrows() {
        for c in 0..src.ncols() {
            out[(r, c)] = f(r, c, src[(r, c)])?;
        }
    }
    Ok(out)
}

/// Drops every node uniformly at random in the square deployment area.
pub fn place_nodes(config: &SystemConfig, seed: u64) -> Layout {
    let mut rng = rng::stream(seed, TAG_LAYOUT, 0);
    let side = config.area_side_m;
    let mut draw = |count: usize| -> Vec<Point> {
        (0..count)
            .map(|_| Point::new(rng.random_range(0.0..=side), rng.random_range(0.0..=side)))
            .collect()
    };
    let aps = draw(config.m);
    let users = draw(config.k);
    let untrusted_rx = draw(config.u);
    let untrusted_tx = draw(config.u);
    Layout {
        aps,
        users,
        untrusted_tx,
        untrusted_rx,
        d_min_m: config.d_min_m,
    }
}

/// Path loss in dB at `distance_m`: `-30.5 - 36.7 log10(d / 1 m)`.
pub fn path_loss_db(distance_m: f64) -> Result<f64> {
    if !(distance_m > 0.0) || !distance_m.is_finite() {
        return Err(Error::domain(format!("distance must be positive, got {distance_m}")));
    }
    Ok(-30.5 - 36.7 * distance_m.log10())
}

/// Symmetric square root of a covariance matrix with negative eigenvalues
/// clipped to zero, so that `L * z` with white `z` has covariance `cov`.
pub(crate) fn covariance_factor(cov: DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(cov);
    let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals)
}

/// Shadowing covariance between user-side nodes:
/// `std^2 * 2^(-distance / 9 m)`, with the clamped distance for distinct nodes.
pub fn shadowing_covariance(layout: &Layout) -> DMatrix<f64> {
    let nodes = layout.user_side_nodes();
    let var = SHADOW_STD_DB * SHADOW_STD_DB;
    DMatrix::from_fn(nodes.len(), nodes.len(), |i, j| {
        if i == j {
            var
        } else {
            var * 2f64.powf(-layout.distance(&nodes[i], &nodes[j]) / SHADOW_DECORRELATION_M)
        }
    })
}

/// Shadowing in dB from every AP to every user-side node, M x (K + 2U),
/// columns ordered users, untrusted receivers, untrusted transmitters.
/// Rows are independent; within a row the terms are jointly Gaussian with
/// [`shadowing_covariance`].
pub fn correlated_shadowing(layout: &Layout, seed: u64) -> DMatrix<f64> {
    let factor = covariance_factor(shadowing_covariance(layout));
    let nodes = factor.nrows();
    let mut rng = rng::stream(seed, TAG_SHADOW, 0);
    let mut out = DMatrix::zeros(layout.aps.len(), nodes);
    for m in 0..layout.aps.len() {
        let z = DVector::from_fn(nodes, |_, _| rng.sample::<f64, _>(StandardNormal));
        let row = &factor * z;
        out.row_mut(m).copy_from(&row.transpose());
    }
    out
}

fn beta_from(distance_m: f64, shadow_db: f64) -> Result<f64> {
    let pl = path_loss_db(distance_m)?;
    Ok(10f64.powf(pl / 10.0) * 10f64.powf(shadow_db / 10.0))
}

/// Builds every large-scale coefficient of a drop.
///
/// AP to user-side links use [`correlated_shadowing`]; AP-to-AP, untrusted
/// pair and untrusted-transmitter-to-user links get independent
/// `N(0, 4^2)` dB shadowing. AP-to-AP coefficients are symmetric.
pub fn build_large_scale(layout: &Layout, config: &SystemConfig, seed: u64) -> Result<LargeScaleState> {
    let m = layout.aps.len();
    let k = layout.users.len();
    let u = layout.untrusted_tx.len();
    let shadow = correlated_shadowing(layout, seed);
    let mut indep = rng::stream(seed, TAG_SHADOW_INDEP, 0);
    let mut draw_db = || SHADOW_STD_DB * indep.sample::<f64, _>(StandardNormal);

    let mut beta_dl = DMatrix::zeros(m, k);
    let mut beta_jam = DMatrix::zeros(m, u);
    let mut beta_obs = DMatrix::zeros(m, u);
    for (mi, ap) in layout.aps.iter().enumerate() {
        for (ki, p) in layout.users.iter().enumerate() {
            beta_dl[(mi, ki)] = beta_from(layout.distance(ap, p), shadow[(mi, ki)])?;
        }
        for ui in 0..u {
            let rx = &layout.untrusted_rx[ui];
            let tx = &layout.untrusted_tx[ui];
            beta_jam[(mi, ui)] = beta_from(layout.distance(ap, rx), shadow[(mi, k + ui)])?;
            beta_obs[(mi, ui)] = beta_from(layout.distance(ap, tx), shadow[(mi, k + u + ui)])?;
        }
    }

    let mut beta_ap = DMatrix::zeros(m, m);
    for a in 0..m {
        for b in (a + 1)..m {
            let v = beta_from(layout.distance(&layout.aps[a], &layout.aps[b]), draw_db())?;
            beta_ap[(a, b)] = v;
            beta_ap[(b, a)] = v;
        }
    }
    let beta_pair = (0..u)
        .map(|ui| {
            beta_from(
                layout.distance(&layout.untrusted_tx[ui], &layout.untrusted_rx[ui]),
                draw_db(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut beta_utx_user = DMatrix::zeros(u, k);
    for ui in 0..u {
        for ki in 0..k {
            beta_utx_user[(ui, ki)] =
                beta_from(layout.distance(&layout.untrusted_tx[ui], &layout.users[ki]), draw_db())?;
        }
    }

    let mut state = LargeScaleState {
        gamma_dl: DMatrix::zeros(m, k),
        gamma_jam: DMatrix::zeros(m, u),
        gamma_obs: DMatrix::zeros(m, u),
        beta_dl,
        beta_jam,
        beta_obs,
        beta_ap,
        beta_pair,
        beta_utx_user,
    };
    state.refresh_gammas(config)?;
    Ok(state)
}

/// Convenience: layout and large-scale state of drop `seed`.
pub fn make_drop(config: &SystemConfig, seed: u64) -> Result<(Layout, LargeScaleState)> {
    let layout = place_nodes(config, seed);
    let ls = build_large_scale(&layout, config, seed)?;
    Ok((layout, ls))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SystemConfig {
        SystemConfig::new(8, 6, 4, 2)
    }

    #[test]
    fn nodes_inside_area_and_deterministic() {
        let cfg = SystemConfig::new(20, 6, 6, 6);
        for seed in 0..5 {
            let l = place_nodes(&cfg, seed);
            let all = l
                .aps
                .iter()
                .chain(&l.users)
                .chain(&l.untrusted_tx)
                .chain(&l.untrusted_rx);
            for p in all {
                assert!((0.0..=1000.0).contains(&p.x) && (0.0..=1000.0).contains(&p.y));
            }
            assert_eq!(l, place_nodes(&cfg, seed));
        }
        assert_ne!(place_nodes(&cfg, 1), place_nodes(&cfg, 2));
    }

    #[test]
    fn colocated_nodes_use_clamped_distance() {
        let l = place_nodes(&small(), 3);
        let p = Point::new(10.0, 10.0);
        assert_eq!(l.distance(&p, &p), 5.0);
        assert_eq!(l.distance(&p, &Point::new(13.0, 14.0)), 5.0);
        assert_eq!(l.distance(&p, &Point::new(16.0, 18.0)), 10.0);
    }

    #[test]
    fn path_loss_values() {
        assert!((path_loss_db(1.0).unwrap() + 30.5).abs() < 1e-12);
        assert!((path_loss_db(10.0).unwrap() + 67.2).abs() < 1e-12);
        assert!((path_loss_db(100.0).unwrap() + 103.9).abs() < 1e-12);
        assert!(path_loss_db(0.0).is_err());
        assert!(path_loss_db(-3.0).is_err());
    }

    #[test]
    fn beta_at_100m_without_shadowing() {
        let b = beta_from(100.0, 0.0).unwrap();
        assert!((b / 10f64.powf(-10.39) - 1.0).abs() < 1e-12);
        assert!((b - 4.07e-11).abs() / 4.07e-11 < 1e-3);
    }

    #[test]
    fn beta_decreases_with_distance() {
        let mut prev = f64::INFINITY;
        for d in [1.0, 2.0, 5.0, 10.0, 50.0, 300.0, 1400.0] {
            let b = beta_from(d, 0.0).unwrap();
            assert!(b < prev);
            prev = b;
        }
    }

    #[test]
    fn large_scale_state_is_positive_and_bounded() {
        let cfg = small();
        let (_, ls) = make_drop(&cfg, 11).unwrap();
        for (b, g) in [
            (&ls.beta_dl, &ls.gamma_dl),
            (&ls.beta_jam, &ls.gamma_jam),
            (&ls.beta_obs, &ls.gamma_obs),
        ] {
            for (bv, gv) in b.iter().zip(g.iter()) {
                assert!(*bv > 0.0 && *gv > 0.0 && gv <= bv);
            }
        }
        assert!(ls.beta_pair.iter().all(|b| *b > 0.0));
        assert!(ls.beta_utx_user.iter().all(|b| *b > 0.0));
        for a in 0..cfg.m {
            assert_eq!(ls.beta_ap[(a, a)], 0.0);
            for b in 0..cfg.m {
                assert_eq!(ls.beta_ap[(a, b)], ls.beta_ap[(b, a)]);
            }
        }
    }

    #[test]
    fn large_scale_state_is_deterministic() {
        let cfg = small();
        let a = make_drop(&cfg, 99).unwrap();
        let b = make_drop(&cfg, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn factor_reproduces_covariance_and_clips() {
        let cov = DMatrix::from_row_slice(2, 2, &[16.0, 16.0, 16.0, 16.0 - 1e-13]);
        let l = covariance_factor(cov.clone());
        let back = &l * l.transpose();
        assert!((back - cov).abs().max() < 1e-9);
        assert!(l.iter().all(|v| v.is_finite()));
    }
}
