use alttrip_demo::engine::Demo;
use serde_json::Value;

#[test]
fn demo_operations() {
    let demo = Demo::from_fixture(3, 1).unwrap();
    assert_eq!(demo.routes.len(), 318);
    let pois: Value = serde_json::from_str(&demo.pois_json()).unwrap();
    assert_eq!(pois.as_array().unwrap().len(), 24);

    let out = demo.recommend(r#"{"s": 0, "d": 5, "k": 3, "L": 5, "method": "sampler", "seed": 2, "must_see": [7]}"#).unwrap();
    let its: Value = serde_json::from_str(&out).unwrap();
    for it in its.as_array().unwrap() {
        let pois: Vec<u64> = serde_json::from_value(it["pois"].clone()).unwrap();
        assert_eq!(pois.len(), 5);
        assert!(pois.contains(&7));
    }
    assert!(demo.recommend(r#"{"s": 0, "d": 5, "k": 3, "must_see": [7]}"#).is_err());

    let a = demo.adjacency("distance").unwrap();
    assert_eq!(a.len(), 24 * 24);
    assert!(a.iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(demo.adjacency("other").is_err());

    let view = demo.slot_view(&[0, 3, 9, 5], 2).unwrap();
    assert!((view.beta - 1.0).abs() < 1e-12);
    assert_eq!(view.combined, view.forward);
    let view = demo.slot_view(&[0, 3, 9, 12, 5], 1).unwrap();
    for p in [&view.forward, &view.backward, &view.combined] {
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(p[9] + p[12] + p[0] + p[5], 0.0);
    }
    assert!(view.combined[3] > 0.0 || view.forward[3] == 0.0);
    assert!(demo.slot_view(&[0, 3, 5], 0).is_err());
}
