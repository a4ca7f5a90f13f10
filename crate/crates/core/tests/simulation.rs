use cpfilter::cmr::FilterKind;
use cpfilter::netsim::{
    generate_mobility, run_simulation, write_cdf_csv, write_metrics_csv, MobilityParams, SimConfig, CDF_HEADER,
    METRICS_HEADER,
};

fn small(filter: FilterKind, seed: u64) -> SimConfig {
    SimConfig {
        area_width_m: 1500.0,
        area_height_m: 1500.0,
        duration_s: 6.0,
        vehicle_count: 80,
        mobility: MobilityParams {
            grid_rows: 3,
            grid_cols: 3,
            ..Default::default()
        },
        filter,
        seed,
        ..Default::default()
    }
}

#[test]
fn counters_are_conserved() {
    for filter in FilterKind::ALL {
        let cfg = small(filter, 4);
        let m = run_simulation(&cfg).unwrap();
        let beacons = (cfg.duration_s * cfg.beacon_rate_hz) as u64 * cfg.vehicle_count as u64;
        assert_eq!(m.total_originated(), beacons, "{filter:?}");
        assert_eq!(m.total_generated(), beacons + m.total_forwarded());
        assert!(m.max_forward_hops <= cfg.cmr.ttl_initial);
        for v in &m.vehicles {
            assert_eq!(v.sensed, v.received + v.lost + v.filtered + v.own_echoes, "{v:?}");
            assert!(v.busy_time_s >= 0.0 && v.busy_time_s <= cfg.duration_s);
            // every forward answers an accepted frame
            assert!(v.forwarded <= v.received);
        }
    }
}

#[test]
fn forwards_never_exceed_hop_budget() {
    for ttl in 1..=3u8 {
        let mut cfg = small(FilterKind::Hop, 2);
        cfg.cmr.ttl_initial = ttl;
        let m = run_simulation(&cfg).unwrap();
        assert!(m.max_forward_hops <= ttl);
        assert!(m.max_forward_hops >= 1);
    }
}

#[test]
fn same_seed_same_csv() {
    let cfg = small(FilterKind::Cmr, 9);
    let render = || {
        let m = run_simulation(&cfg).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        write_metrics_csv(&m, &mut a).unwrap();
        write_cdf_csv(&m, &mut b).unwrap();
        (a, b)
    };
    let first = render();
    assert_eq!(first, render());
    let text = String::from_utf8(first.0).unwrap();
    assert_eq!(text.lines().next(), Some(METRICS_HEADER));
    assert_eq!(text.lines().count(), 1 + cfg.vehicle_count + 1);
    assert!(String::from_utf8(first.1).unwrap().starts_with(CDF_HEADER));
}

#[test]
fn different_seeds_differ() {
    let a = run_simulation(&small(FilterKind::Hop, 1)).unwrap();
    let b = run_simulation(&small(FilterKind::Hop, 2)).unwrap();
    assert_ne!(a.vehicles, b.vehicles);
}

#[test]
fn filters_are_ordered_on_a_small_grid() {
    let run = |f| run_simulation(&small(f, 5)).unwrap();
    let (cmr, hd, hop) = (run(FilterKind::Cmr), run(FilterKind::HopDis), run(FilterKind::Hop));
    assert!(cmr.total_forwarded() <= hd.total_forwarded());
    assert!(hd.total_forwarded() <= hop.total_forwarded());
    assert!(cmr.mean_received() < hop.mean_received());
}

#[test]
fn default_grid_keeps_vehicles_on_lanes() {
    let p = MobilityParams::default();
    let (w, h) = (4000.0, 5000.0);
    let traj = generate_mobility(&p, (w, h), 212, 60.0, 0.1, 3);
    assert_eq!(traj.vehicle_count(), 212);
    let rows: Vec<f64> = (0..p.grid_rows).map(|i| (i as f64 + 0.5) * h / p.grid_rows as f64).collect();
    let cols: Vec<f64> = (0..p.grid_cols).map(|i| (i as f64 + 0.5) * w / p.grid_cols as f64).collect();
    let on = |v: f64, roads: &[f64]| roads.iter().any(|r| ((v - r).abs() - p.lane_offset_m).abs() < 1e-6);
    for snap in &traj.samples {
        for a in snap {
            assert!((0.0..w).contains(&a.x) && (0.0..h).contains(&a.y));
            assert!(a.speed_mps >= p.speed_min_mps && a.speed_mps <= p.speed_max_mps);
            let horizontal = a.heading_deg == 90.0 || a.heading_deg == 270.0;
            if horizontal {
                assert!(on(a.y, &rows), "{a:?}");
            } else {
                assert!(on(a.x, &cols), "{a:?}");
            }
        }
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = small(FilterKind::Cmr, 1);
    cfg.beacon_rate_hz = 12.0;
    assert!(run_simulation(&cfg).is_err());
}
