//! The demo bindings run on native targets too; exercise them end to end.

use charsub_wasm::{ball_json, classify_json, member_json, trivial_radius_json};

#[test]
fn classify_binding() {
    let v: serde_json::Value = serde_json::from_str(&classify_json("geometric:2")).unwrap();
    assert_eq!(v["report"]["countable"], "yes");
}

#[test]
fn member_binding() {
    let v: serde_json::Value =
        serde_json::from_str(&member_json("factorial", "digits:const:1")).unwrap();
    assert_eq!(v["decision"], "in");
    let v: serde_json::Value =
        serde_json::from_str(&member_json("geometric:2", "rational:1/5")).unwrap();
    assert_eq!(v["decision"], "out");
}

#[test]
fn ball_binding() {
    let v: serde_json::Value =
        serde_json::from_str(&ball_json("geometric:2", 8, "1/4", false)).unwrap();
    assert_eq!(v["count"], 1);
    assert_eq!(v["points"][0], "0");
    let v: serde_json::Value =
        serde_json::from_str(&ball_json("geometric:2", 6, "1", false)).unwrap();
    assert_eq!(v["count"], 64);
    assert_eq!(v["angles_approx"].as_array().unwrap().len(), 64);
}

#[test]
fn radius_binding() {
    let v: serde_json::Value = serde_json::from_str(&trivial_radius_json("geometric:2")).unwrap();
    assert_eq!(v["trivial_radius"], "1/4");
    let v: serde_json::Value = serde_json::from_str(&trivial_radius_json("factorial")).unwrap();
    assert_eq!(v["bounded"], false);
}

#[test]
fn errors_are_json() {
    let v: serde_json::Value = serde_json::from_str(&member_json("bogus", "rational:1/2")).unwrap();
    assert!(v["error"].as_str().unwrap().contains("parse"));
}
