use calf_core::env::Pendulum;
use calf_core::policy::FallbackParams;
use calf_lab::tuning::{pendulum_grid, tune_pendulum_fallback};

#[test]
fn frozen_defaults_win_the_grid_search() {
    let seeds: Vec<u64> = (0..30).collect();
    let grid = pendulum_grid();
    assert!(grid.contains(&FallbackParams::default()));
    let ranked = tune_pendulum_fallback(&Pendulum::default(), &grid, &seeds, 200).unwrap();
    assert_eq!(ranked[0].params, FallbackParams::default());
    assert_eq!(ranked[0].reached, 30);
}
