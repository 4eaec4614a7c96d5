use cxflow_core::config::parse_config;
use cxflow_core::experiment::{estimation_error_grid, snapshots};

#[test]
fn estimation_error_grows_with_loss_and_hops() {
    let cfg = parse_config("controller = notl\ndemand.count = 300\ndemand.rv_rate = 1.0\nrun.horizon = 400\nrun.seed = 3\n").unwrap();
    let worlds = snapshots(&cfg, None, 100).unwrap();
    let pers = [0.01, 0.05, 0.1, 0.15, 0.2];
    let grid = estimation_error_grid(&worlds, &pers, &[1, 2, 3], 3);
    for h in 0..3 {
        for k in 1..pers.len() {
            assert!(grid[h * 5 + k].mean() >= grid[h * 5 + k - 1].mean());
        }
    }
    for k in 0..pers.len() {
        assert!(grid[5 + k].mean() >= grid[k].mean());
        assert!(grid[10 + k].mean() >= grid[5 + k].mean());
    }
    assert!(grid[0].queue.n > 100);
    let lossless = estimation_error_grid(&worlds, &[0.0], &[1, 3], 3);
    assert!(lossless.iter().all(|p| p.mean() == 0.0 && p.queue.excluded == 0));
}
