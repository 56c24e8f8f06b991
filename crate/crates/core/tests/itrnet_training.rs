use std::time::Instant;

use alttrip_core::dataset::Route;
use alttrip_core::fixtures::{memorized_model, quick_embeddings, spiral_catalog, toy_train_config};
use alttrip_core::itrnet::{train_itrnet, PoiMask};

#[test]
fn memorizes_a_single_route() {
    let start = Instant::now();
    let route = [2, 5, 7, 9];
    let net = memorized_model(10, &route, 200, 11);
    let none = PoiMask::none(10);
    let p = net.forward_step_probs(&[2, 5], 2, 9, &none).unwrap();
    assert_eq!(p.argmax(), Some(7));
    // top-1 next-POI accuracy over every teacher-forced step
    let mut hits = 0;
    for t in 1..route.len() {
        let f = net.forward_step_probs(&route[..t], 2, 9, &none).unwrap();
        hits += usize::from(f.argmax() == Some(route[t]));
        let rev: Vec<usize> = route[t..].iter().rev().copied().collect();
        let b = net.backward_step_probs(&rev, 2, 9, &none).unwrap();
        hits += usize::from(b.argmax() == Some(route[t - 1]));
    }
    assert_eq!(hits, 2 * (route.len() - 1));
    println!("memorization trained in {:?}", start.elapsed());
}

#[test]
fn follows_transition_frequencies() {
    let catalog = spiral_catalog(10);
    let emb = quick_embeddings(&catalog, 4);
    let mut routes = Vec::new();
    for i in 0..200 {
        let mid = if i % 10 == 0 { 3 } else { 1 };
        routes.push(Route::from_unchecked(vec![0, mid, 6, 9]));
    }
    let (net, report) = train_itrnet(&routes, emb, toy_train_config(4)).unwrap();
    assert!(report.epoch_losses.last().unwrap() < &report.epoch_losses[0]);
    let p = net.forward_step_probs(&[0], 0, 9, &PoiMask::none(10)).unwrap();
    assert!(p.get(1) > p.get(3), "P(1)={} P(3)={}", p.get(1), p.get(3));
}

#[test]
fn backward_context_changes_prediction() {
    let catalog = spiral_catalog(10);
    let emb = quick_embeddings(&catalog, 8);
    let routes: Vec<Route> = (0..100)
        .flat_map(|_| {
            [Route::from_unchecked(vec![0, 4, 9]), Route::from_unchecked(vec![0, 6, 2, 9])]
        })
        .collect();
    let (net, _) = train_itrnet(&routes, emb, toy_train_config(8)).unwrap();
    let none = PoiMask::none(10);
    let short = net.backward_step_probs(&[9], 0, 9, &none).unwrap();
    let long = net.backward_step_probs(&[9, 2], 0, 9, &none).unwrap();
    assert_ne!(short.argmax(), long.argmax());
}
