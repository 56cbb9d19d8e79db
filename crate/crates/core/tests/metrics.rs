use proptest::prelude::*;
use relmimic_core::metrics::{area_under_ccdf, ccdf};

#[test]
fn constant_returns_have_area_equal_to_the_return() {
    let r = ccdf(&[3.5, 3.5, 3.5]).unwrap();
    assert!((r.area - 3.5).abs() < 1e-12);
    assert_eq!(r.thresholds, [0.0, 3.5]);
    assert_eq!(r.survival, [1.0, 1.0]);
}

#[test]
fn two_point_returns() {
    let r = ccdf(&[0.0, 10.0]).unwrap();
    assert!((r.area - 5.0).abs() < 1e-12);
    assert_eq!(r.survival_at(5.0), 0.5);
    assert_eq!(r.survival_at(10.0), 0.5);
    assert_eq!(r.survival_at(10.1), 0.0);
    assert_eq!(area_under_ccdf(&r), r.area);
}

#[test]
fn negative_returns_contribute_nothing() {
    let r = ccdf(&[-4.0, -1.0]).unwrap();
    assert_eq!(r.area, 0.0);
    assert_eq!(r.thresholds, [-4.0, -1.0, 0.0]);
    assert_eq!(r.survival, [1.0, 0.5, 0.0]);
}

#[test]
fn rejects_empty_and_non_finite() {
    assert!(ccdf(&[]).is_err());
    assert!(ccdf(&[1.0, f64::NAN]).is_err());
    assert!(ccdf(&[f64::INFINITY]).is_err());
}

proptest! {
    #[test]
    fn survival_is_monotone_and_area_is_mean_positive_part(
        rs in prop::collection::vec(-20.0f64..40.0, 1..60),
    ) {
        let r = ccdf(&rs).unwrap();
        prop_assert!(r.thresholds.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(r.survival.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(r.survival.iter().all(|s| (0.0..=1.0).contains(s)));
        let oracle = rs.iter().map(|x| x.max(0.0)).sum::<f64>() / rs.len() as f64;
        prop_assert!((r.area - oracle).abs() < 1e-9 * (1.0 + oracle));
        prop_assert!(r.area >= 0.0);
    }

    #[test]
    fn area_is_positively_homogeneous(
        rs in prop::collection::vec(0.0f64..10.0, 1..30),
        c in 0.1f64..5.0,
    ) {
        let a = ccdf(&rs).unwrap().area;
        let scaled: Vec<f64> = rs.iter().map(|x| x * c).collect();
        let b = ccdf(&scaled).unwrap().area;
        prop_assert!((b - c * a).abs() < 1e-9 * (1.0 + b));
    }
}
