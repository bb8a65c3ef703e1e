use serde_json::Value;

use swrl_web::{envelope_json, lowdeg_profile_json, phi_curve_json};

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn phi_curve_endpoints_and_val() {
    let v = parse(phi_curve_json(0.6, 101).unwrap());
    let beta = v["beta"].as_array().unwrap();
    assert_eq!(beta.len(), 101);
    assert_eq!(beta[0].as_f64(), Some(0.0));
    assert_eq!(beta[100].as_f64(), Some(1.0));
    let val = v["val_numeric"].as_f64().unwrap();
    assert!((val - 1.118034).abs() < 1e-6);
    assert!((val - v["val_closed_form"].as_f64().unwrap()).abs() < 1e-8);
}

#[test]
fn phi_curve_rejects_bad_input() {
    assert!(phi_curve_json(1.2, 10).is_err());
    assert!(phi_curve_json(0.5, 1).is_err());
}

#[test]
fn envelope_through_exterior_point() {
    let v = parse(envelope_json(0.6, 0.3, 0.9).unwrap());
    assert!(v["val_conc_v"].as_f64().unwrap() > v["val_phi"].as_f64().unwrap());
    assert!(v["points_u"].as_array().unwrap().len() >= 3);
    let e = envelope_json(0.6, 0.3, 0.2).unwrap_err();
    assert!(e.contains("above"), "{e}");
}

#[test]
fn lowdeg_profile_is_monotone() {
    let v = parse(lowdeg_profile_json(0.5, 1000, 12).unwrap());
    let values: Vec<f64> = v["values"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert_eq!(values.len(), 13);
    assert_eq!(values[0], 1.0);
    assert!(values.windows(2).all(|w| w[0] <= w[1]));
    assert!(values[12] <= v["full"].as_f64().unwrap());
    assert!(lowdeg_profile_json(1.0, 10, 3).is_err());
}
