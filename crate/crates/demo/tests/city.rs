use mfgcrn_demo::City;

#[test]
fn proximity_rows_are_distributions() {
    let city = City::build(7, 3).unwrap();
    let p = city.proximity();
    assert_eq!(p.len(), 49);
    for row in p.chunks(7) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(row.iter().all(|&v| v > 0.0));
    }
    assert_eq!(city.coords().len(), 14);
}

#[test]
fn sentinel_share_grows_with_bias() {
    let city = City::build(6, 1).unwrap();
    let names = city.feature_names();
    assert_eq!(names, ["info0", "info1", "noise0"]);
    let mut last = -1.0;
    for bias in [-5.0, 0.5, 2.0, 8.0] {
        let view = city.attention_view(0, bias, 9).unwrap();
        let mean: f64 = view.sentinel_share.iter().sum::<f64>() / 6.0;
        assert!(view.sentinel_share.iter().all(|&s| (0.0..1.0).contains(&s)));
        assert!(mean >= last, "bias {bias}: {mean} < {last}");
        last = mean;
    }
    // a negative bias switches the sentinel off: rows become softmaxes
    let off = city.attention_view(1, -50.0, 9).unwrap();
    assert!(off.sentinel_share.iter().all(|s| s.abs() < 1e-12));
    assert!(city.attention_view(3, 0.0, 9).is_err());
}

#[test]
fn windows_end_before_target() {
    let city = City::build(4, 2).unwrap();
    let day = city.steps_per_day();
    let t = 7 * day + 5;
    let idx = city.window_indices(t, 3, 2, 1).unwrap();
    let t = t as u32;
    let d = day as u32;
    assert_eq!(idx, [t - 1, t - 2, t - 3, t - d, t - 2 * d, t - 7 * d]);
    assert!(city.window_indices(7 * day - 1, 3, 2, 1).is_err());
    assert!(city.window_indices(city.steps(), 1, 1, 1).is_err());
    assert_eq!(city.demand(0, 1).len(), city.steps());
    assert_eq!(city.timestamp(0), "2019-03-04T00:00:00");
}
