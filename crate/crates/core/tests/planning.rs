use alttrip_core::fixtures::{memorized_model, toy_model};
use alttrip_core::metrics::diversity_score;
use alttrip_core::planner::{
    generate_half, generate_itinerary_lstm, recommend_topk, relevancy_scores, HalfDirection,
    HalfLength, Method, Query,
};
use alttrip_core::sampler::{sample_itinerary_traced, ConstraintSet, SamplerConfig};

const ROUTE: [usize; 5] = [2, 5, 7, 4, 9];

#[test]
fn single_route_is_rebuilt() {
    let net = memorized_model(10, &ROUTE, 200, 21);
    let first = generate_half(&net, 7, 2, 9, HalfDirection::BackwardFirstHalf, HalfLength::Free { max_len: 4 }, &[])
        .unwrap();
    assert_eq!(first, vec![2, 5, 7]);
    let second = generate_half(
        &net,
        7,
        2,
        9,
        HalfDirection::ForwardSecondHalf,
        HalfLength::Free { max_len: 4 },
        &first,
    )
    .unwrap();
    assert_eq!(second, vec![7, 4, 9]);
    let it = generate_itinerary_lstm(&net, 7, 2, 9, Some(5)).unwrap();
    assert_eq!(it.pois, ROUTE);

    let mut hits = 0;
    for seed in 0..50 {
        let cfg = SamplerConfig::fixed_length(5, seed);
        let (it, trace) = sample_itinerary_traced(&net, 7, 2, 9, &ConstraintSet::default(), &cfg).unwrap();
        hits += usize::from(it.pois == ROUTE);
        assert_eq!(trace.steps.len(), 15);
    }
    println!("sampler reproduced the route in {hits}/50 runs");
    assert!(hits >= 40, "{hits}/50");
}

#[test]
fn only_intermediate_is_most_relevant() {
    let net = memorized_model(10, &[1, 6, 8], 200, 5);
    let r = relevancy_scores(&net, 1, 8).unwrap();
    let best = (0..10).max_by(|&a, &b| r[a].total_cmp(&r[b])).unwrap();
    assert_eq!(best, 6);
}

#[test]
fn length_three_sets_are_fully_diverse() {
    let net = toy_model(12, 20, 3);
    for method in [Method::Lstm, Method::Sampler] {
        for (s, d) in [(0, 1), (2, 10), (5, 7)] {
            let q = Query::new(s, d, 4).with_length(3).with_method(method);
            let set = recommend_topk(&net, &q, None).unwrap();
            assert_eq!(diversity_score(&set.itineraries.iter().map(|i| i.pois.clone()).collect::<Vec<_>>()).unwrap(), 1.0);
        }
    }
}
