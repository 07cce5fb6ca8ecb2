use nfpose::montecarlo::{expand_grid, run_point, run_sweep, SweepGrid, SweepSettings};
use nfpose::{ChannelMode, Pose, SystemConfig};

fn small() -> SystemConfig {
    SystemConfig {
        ue_antennas: 5,
        transmissions: 12,
        ..SystemConfig::with_square_ris(7)
    }
}

fn settings(trials: usize) -> SweepSettings {
    SweepSettings {
        trials,
        master_seed: 12,
        mode: ChannelMode::Fresnel,
        snr_db: 15.0,
        fixed_pose: None,
    }
}

#[test]
fn table_is_independent_of_thread_count() {
    let grid = SweepGrid {
        snr_db: vec![0.0, 20.0],
        ue_antennas: vec![3, 5],
        ..Default::default()
    };
    let parallel = run_sweep(&small(), &grid, &settings(16)).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let serial = pool.install(|| run_sweep(&small(), &grid, &settings(16)).unwrap());
    assert_eq!(parallel, serial);
    assert_eq!(parallel.to_csv_string(), serial.to_csv_string());
}

#[test]
fn permuted_grid_gives_identical_rows() {
    let forward = SweepGrid {
        ris_elements: vec![25, 49],
        ue_antennas: vec![3, 5],
        ..Default::default()
    };
    let backward = SweepGrid {
        ris_elements: vec![49, 25],
        ue_antennas: vec![5, 3],
        ..Default::default()
    };
    let f = run_sweep(&small(), &forward, &settings(8)).unwrap();
    let b = run_sweep(&small(), &backward, &settings(8)).unwrap();
    assert_eq!(f.rows.len(), b.rows.len());
    for row in &f.rows {
        assert_eq!(b.get(&row.sweep_value, &row.param), Some(row));
    }
}

#[test]
fn different_seeds_give_different_tables() {
    let grid = SweepGrid {
        snr_db: vec![10.0],
        ..Default::default()
    };
    let a = run_sweep(&small(), &grid, &settings(8)).unwrap();
    let b = run_sweep(
        &small(),
        &grid,
        &SweepSettings {
            master_seed: 13,
            ..settings(8)
        },
    )
    .unwrap();
    assert_ne!(a.rows[0].nmse, b.rows[0].nmse);
}

#[test]
fn grid_points_share_pose_realizations() {
    let grid = SweepGrid {
        snr_db: vec![0.0, 30.0],
        ..Default::default()
    };
    let s = settings(6);
    let points = expand_grid(&small(), &grid, &s).unwrap();
    let low = run_point(&points[0], &s).unwrap();
    let high = run_point(&points[1], &s).unwrap();
    for (a, b) in low.iter().zip(&high) {
        assert_eq!(a.pose, b.pose);
    }
}

#[test]
fn noiseless_sweep_is_exact() {
    let grid = SweepGrid {
        snr_db: vec![f64::INFINITY],
        ..Default::default()
    };
    let table = run_sweep(&SystemConfig::default(), &grid, &settings(20)).unwrap();
    for row in &table.rows {
        assert_eq!(row.failures, 0);
        assert!(row.nmse < 1e-20, "{row:?}");
    }
}

#[test]
fn failure_rate_is_small_at_moderate_snr() {
    let grid = SweepGrid {
        snr_db: vec![15.0, 25.0],
        ..Default::default()
    };
    let table = run_sweep(&SystemConfig::default(), &grid, &settings(300)).unwrap();
    for row in &table.rows {
        assert!((row.failures as f64) < 0.01 * row.trials as f64, "{row:?}");
    }
}

#[test]
fn failures_are_counted_not_dropped() {
    let grid = SweepGrid {
        snr_db: vec![-100.0],
        ..Default::default()
    };
    let table = run_sweep(&small(), &grid, &settings(30)).unwrap();
    for row in &table.rows {
        assert_eq!(row.trials, 30);
        assert!(row.failures <= 30);
        assert!(row.nmse.is_finite() || row.failures == 30);
    }
}

#[test]
fn fixed_pose_mode() {
    let pose = Pose::from_degrees(1.0, 70.0, 30.0, 130.0, 55.0);
    let s = SweepSettings {
        fixed_pose: Some(pose),
        ..settings(5)
    };
    let grid = SweepGrid {
        snr_db: vec![20.0],
        ..Default::default()
    };
    let points = expand_grid(&small(), &grid, &s).unwrap();
    for t in run_point(&points[0], &s).unwrap() {
        assert_eq!(t.pose, pose);
    }
}

#[test]
fn ris_size_sweep_keeps_configurations_equal_to_elements() {
    let grid = SweepGrid {
        ris_elements: vec![81, 121, 225, 361],
        ..Default::default()
    };
    let points = expand_grid(&SystemConfig::default(), &grid, &settings(1)).unwrap();
    for (p, n) in points.iter().zip([81, 121, 225, 361]) {
        assert_eq!(p.cfg.ris_elements(), n);
        assert_eq!(p.cfg.ris_x, p.cfg.ris_y);
        assert_eq!(p.cfg.configurations, n);
    }
}
