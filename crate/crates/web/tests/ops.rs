use derand_lab_web::{aep_curve, capacity_curve, ksat_demo, MAX_DEMO_SEED_BITS};

#[test]
fn capacity_curve_endpoints() {
    let v = capacity_curve(11).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 11);
    assert!((rows[0]["capacity"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!(rows[5]["capacity"].as_f64().unwrap().abs() < 1e-12);
    assert!((rows[1]["capacity"].as_f64().unwrap() - 0.5310044064107188).abs() < 1e-12);
    assert!(capacity_curve(1).is_err());
}

#[test]
fn aep_curve_is_deterministic() {
    let a = aep_curve(0.1, 0.2, &[20, 80], 300, "ab").unwrap();
    assert_eq!(a, aep_curve(0.1, 0.2, &[20, 80], 300, "ab").unwrap());
    let rows = a["rows"].as_array().unwrap();
    for r in rows {
        let ind = r["independent"].as_f64().unwrap();
        assert!(ind <= r["typical"].as_f64().unwrap());
    }
    assert!(aep_curve(1.5, 0.2, &[20], 10, "").is_err());
}

#[test]
fn ksat_demo_finds_certificate() {
    let v = ksat_demo(40, 8, 40, 16, "1").unwrap();
    assert_eq!(v["solved"], true);
    assert_eq!(v["certificate"]["verified"], true);
    assert!(v["max_occurrences"].as_u64().unwrap() <= 10);
    assert!(ksat_demo(40, 8, 40, MAX_DEMO_SEED_BITS as u32 + 1, "1").is_err());
    assert!(ksat_demo(40, 3, 4, 8, "1").is_err());
}
