//! Sample statistics of the correlated shadowing over many independent drops.

use jcam_core::scenario::{correlated_shadowing, Layout, Point};

fn moments(draws: u64) -> [[f64; 4]; 4] {
    // two APs, two users at the same spot and one 900 m away
    let layout = Layout {
        aps: vec![Point::new(0.0, 0.0), Point::new(500.0, 500.0)],
        users: vec![
            Point::new(100.0, 100.0),
            Point::new(100.0, 100.0),
            Point::new(1000.0, 100.0),
        ],
        untrusted_tx: vec![],
        untrusted_rx: vec![],
        d_min_m: 5.0,
    };
    // columns: (ap 0, user 0), (ap 0, user 1), (ap 0, user 2), (ap 1, user 0)
    let mut acc = [[0.0; 4]; 4];
    for seed in 0..draws {
        let f = correlated_shadowing(&layout, seed);
        let x = [f[(0, 0)], f[(0, 1)], f[(0, 2)], f[(1, 0)]];
        for i in 0..4 {
            for j in 0..4 {
                acc[i][j] += x[i] * x[j];
            }
        }
    }
    acc.map(|row| row.map(|v| v / draws as f64))
}

#[test]
fn shadowing_covariance_over_1e5_draws() {
    let c = moments(100_000);
    for i in 0..4 {
        assert!((c[i][i] - 16.0).abs() < 0.5, "variance {i}: {}", c[i][i]);
    }
    // co-located users sit d_min apart
    let near = 16.0 * 2f64.powf(-5.0 / 9.0);
    assert!((c[0][1] - near).abs() < 0.5, "{} vs {near}", c[0][1]);
    // 900 m apart: 16 * 2^-100, effectively independent
    assert!(c[0][2].abs() < 0.5, "{}", c[0][2]);
    // different APs are independent
    assert!(c[0][3].abs() < 0.5, "{}", c[0][3]);
}
