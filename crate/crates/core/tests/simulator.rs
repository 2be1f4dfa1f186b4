use iwknn_core::filter::{empirical_stats, fit_asymmetric_bounds, FitGrid};
use iwknn_core::selection::{fluctuation_excessive, loss_rate};
use iwknn_core::sim::{
    generate_offline_campaign, generate_online_stream, path_loss_rssi, sample_rssi, AccessPoint, NoiseModel,
    Propagation, Trajectory, VenueLayout, Waypoint,
};
use iwknn_core::{Coord, MacAddr};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const RSSI_MIN: f64 = -100.0;

fn ap(x: f64, y: f64) -> AccessPoint {
    AccessPoint {
        mac: MacAddr([2, 0, 0, 0, 0, 1]),
        pos: Coord::new(x, y),
        tx_power_dbm: -30.0,
    }
}

proptest! {
    #[test]
    fn path_loss_decreases_with_distance(d1 in 0.0f64..80.0, d2 in 0.0f64..80.0, exponent in 1.5f64..4.5) {
        let a = ap(0.0, 0.0);
        let (near, far) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let r_near = path_loss_rssi(&a, &Coord::new(near, 0.0), exponent, 1.0);
        let r_far = path_loss_rssi(&a, &Coord::new(far, 0.0), exponent, 1.0);
        prop_assert!(r_near >= r_far);
        prop_assert!(r_near <= -30.0);
    }
}

#[test]
fn gaussian_limit_series_means_converge() {
    let noise = NoiseModel {
        sigma_dbm: 2.0,
        p_loss: 0.0,
        p_fade: 0.0,
        fade_depth_dbm: 0.0,
        fade_sigma_dbm: 0.0,
    };
    let layout = VenueLayout::stadium();
    let prop = Propagation::default();
    let s = 200;
    let c = generate_offline_campaign(&layout, &prop, &noise, s, RSSI_MIN, 21).unwrap();
    let mut within_3 = 0;
    let mut within_4 = 0;
    for series in &c.series {
        let mean = prop.mean_rssi(&layout.aps[series.ap_index], &c.points[series.point_id]);
        let stats = empirical_stats(&series.samples).unwrap();
        let err = (stats.mu - mean).abs();
        within_3 += usize::from(err < 3.0 * 2.0 / (s as f64).sqrt());
        within_4 += usize::from(err < 4.0 * 2.0 / (s as f64).sqrt());
    }
    let total = c.series.len() as f64;
    assert!(within_3 as f64 / total >= 0.99, "3-sigma bound held for {within_3}");
    assert!(within_4 as f64 / total >= 0.99, "4-sigma bound held for {within_4}");
}

#[test]
fn fade_mixture_is_bimodal() {
    let model = NoiseModel {
        sigma_dbm: 2.0,
        p_loss: 0.0,
        p_fade: 0.2,
        fade_depth_dbm: 15.0,
        fade_sigma_dbm: 3.0,
    };
    let mean = -55.0;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut bins = [0usize; 40];
    for _ in 0..100_000 {
        let x = sample_rssi(mean, &model, &mut rng).unwrap();
        let b = (x - (mean - 30.0)).floor();
        if (0.0..40.0).contains(&b) {
            bins[b as usize] += 1;
        }
    }
    // bin i covers [mean - 30 + i, mean - 29 + i)
    let at = |offset: f64| (offset + 30.0) as usize;
    let peak = |lo: usize, hi: usize| (lo..hi).max_by_key(|&i| bins[i]).unwrap();
    let main = peak(at(-4.0), at(4.0));
    let fade = peak(at(-20.0), at(-10.0));
    assert!(
        main.abs_diff(at(-1.0)) <= 1 || main.abs_diff(at(0.0)) <= 1,
        "main mode in bin {main}"
    );
    assert!(fade.abs_diff(at(-15.0)) <= 2, "fade mode in bin {fade}");
    let valley = (fade + 1..main).map(|i| bins[i]).min().unwrap();
    assert!(valley * 3 < bins[fade], "no dip between the modes");
}

#[test]
fn dropout_rate_matches_the_model() {
    let noise = NoiseModel {
        p_loss: 0.1,
        ..NoiseModel::default()
    };
    let layout = VenueLayout::with_perimeter_aps(12.0, 9.0, 3.0, 4, -30.0);
    for seed in 0..50 {
        let c = generate_offline_campaign(&layout, &Propagation::default(), &noise, 200, RSSI_MIN, seed).unwrap();
        let all: Vec<f64> = c.series.iter().flat_map(|s| s.samples.iter().copied()).collect();
        let rate = loss_rate(&all, RSSI_MIN).unwrap();
        assert!((rate - 0.1).abs() <= 0.03, "seed {seed}: loss rate {rate}");
    }
}

#[test]
fn fade_burst_trips_the_fluctuation_gate() {
    let noise = NoiseModel {
        sigma_dbm: 1.0,
        p_loss: 0.0,
        p_fade: 0.0,
        fade_depth_dbm: 0.0,
        fade_sigma_dbm: 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let clean: Vec<f64> = (0..200)
        .map(|_| sample_rssi(-60.0, &noise, &mut rng).unwrap())
        .collect();
    let mut burst = clean.clone();
    burst[80..120].iter_mut().for_each(|x| *x -= 30.0);
    let theta2 = 0.9;
    assert!(!fluctuation_excessive(&clean, theta2));
    assert!(fluctuation_excessive(&burst, theta2));
}

#[test]
fn default_noise_fits_wider_below_than_above() {
    let c = generate_offline_campaign(
        &VenueLayout::stadium(),
        &Propagation::default(),
        &NoiseModel::default(),
        200,
        RSSI_MIN,
        2,
    )
    .unwrap();
    let mut asymmetric = 0;
    let mut fitted = 0;
    for s in &c.series {
        let received: Vec<f64> = s.samples.iter().copied().filter(|&x| x != RSSI_MIN).collect();
        if let Ok(p) = fit_asymmetric_bounds(&received, 0.05, FitGrid::default()) {
            fitted += 1;
            asymmetric += usize::from(p.g_inf > p.g_sup);
        }
    }
    assert!(asymmetric * 2 > fitted, "g_inf > g_sup in {asymmetric} of {fitted}");
}

#[test]
fn campaign_shape_and_determinism() {
    let layout = VenueLayout::stadium();
    let prop = Propagation::default();
    let a = generate_offline_campaign(&layout, &prop, &NoiseModel::default(), 30, RSSI_MIN, 17).unwrap();
    let b = generate_offline_campaign(&layout, &prop, &NoiseModel::default(), 30, RSSI_MIN, 17).unwrap();
    let other = generate_offline_campaign(&layout, &prop, &NoiseModel::default(), 30, RSSI_MIN, 18).unwrap();
    assert_eq!(a.series.len(), 240 * 10);
    assert!(a.series.iter().all(|s| s.samples.len() == 30));
    assert!(a
        .series
        .iter()
        .flat_map(|s| &s.samples)
        .all(|&x| (RSSI_MIN..=0.0).contains(&x)));
    assert_eq!(a.series, b.series);
    assert_ne!(a.series, other.series);
}

#[test]
fn stream_is_deterministic_and_one_slot_per_waypoint() {
    let layout = VenueLayout::stadium();
    let traj = Trajectory::random_waypoints(layout.grid_bounds(), 3.0, 0.02, 300, 4).unwrap();
    let run = || {
        generate_online_stream(
            &layout,
            &Propagation::default(),
            &NoiseModel::default(),
            &traj,
            RSSI_MIN,
            4,
        )
        .unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.len(), 300);
    assert_eq!(a, b);
    for (s, w) in a.iter().zip(&traj.waypoints) {
        assert_eq!(s.t, w.t);
        assert_eq!(s.truth, w.pos);
    }
}

#[test]
fn noiseless_stream_reproduces_the_ideal_fingerprint() {
    let layout = VenueLayout::stadium();
    let prop = Propagation::default();
    let pos = layout.reference_points()[37];
    let traj = Trajectory {
        waypoints: vec![Waypoint { t: 0.0, pos }],
        speed_mps: 0.0,
    };
    let stream = generate_online_stream(&layout, &prop, &NoiseModel::noiseless(), &traj, RSSI_MIN, 0).unwrap();
    let expected: Vec<f64> = layout.aps.iter().map(|a| prop.mean_rssi(a, &pos)).collect();
    assert_eq!(stream[0].rssi.values(), expected.as_slice());
}

#[test]
fn trajectory_respects_speed_and_area() {
    let layout = VenueLayout::stadium();
    let area = layout.grid_bounds();
    for seed in 0..5 {
        let traj = Trajectory::random_waypoints(area, 3.0, 0.02, 2000, seed).unwrap();
        for pair in traj.waypoints.windows(2) {
            assert!(pair[0].pos.distance(&pair[1].pos) <= 3.0 * 0.02 * 1.05);
            assert!(pair[1].t > pair[0].t);
        }
        assert!(traj.waypoints.iter().all(|w| area.contains(&w.pos)));
    }
}
