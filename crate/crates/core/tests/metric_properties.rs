use alttrip_core::dataset::PoiId;
use alttrip_core::metrics::{diversity_score, f1_score, pairs_f1_score};
use approx::assert_relative_eq;
use proptest::prelude::*;

const N: usize = 12;

fn route() -> impl Strategy<Value = Vec<PoiId>> {
    (1usize..=6)
        .prop_flat_map(|len| Just((1..N - 1).collect::<Vec<PoiId>>()).prop_shuffle().prop_map(move |v| v[..len].to_vec()))
        .prop_map(|mid| {
            let mut r = vec![0];
            r.extend(mid);
            r.push(N - 1);
            r
        })
}

proptest! {
    #[test]
    fn f1_symmetric_and_bounded(a in route(), b in route()) {
        let ab = f1_score(&a, &b, true);
        assert_relative_eq!(ab, f1_score(&b, &a, true), epsilon = 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab));
        assert_relative_eq!(f1_score(&a, &a, true), 1.0);
    }

    #[test]
    fn pairs_f1_bounded(a in route(), b in route()) {
        let v = pairs_f1_score(&a, &b);
        prop_assert!((0.0..=1.0).contains(&v));
        assert_relative_eq!(pairs_f1_score(&a, &a), 1.0);
    }

    #[test]
    fn diversity_permutation_invariant(set in prop::collection::vec(route(), 2..6), rot in 0usize..6) {
        let mut other = set.clone();
        let r = rot % other.len();
        other.rotate_left(r);
        let a = diversity_score(&set).unwrap();
        assert_relative_eq!(a, diversity_score(&other).unwrap(), epsilon = 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn pairs_f1_is_one_only_for_identical(a in route(), b in route()) {
        prop_assert_eq!(pairs_f1_score(&a, &b) == 1.0, a == b);
    }

    #[test]
    fn doubling_the_set_never_increases_diversity(set in prop::collection::vec(route(), 2..6)) {
        let before = diversity_score(&set).unwrap();
        let doubled: Vec<_> = set.iter().chain(set.iter()).cloned().collect();
        prop_assert!(diversity_score(&doubled).unwrap() <= before + 1e-12);
    }

    #[test]
    fn copying_a_typical_member_never_increases_diversity(set in prop::collection::vec(route(), 2..6), pick in 0usize..6) {
        let before = diversity_score(&set).unwrap();
        let i = pick % set.len();
        let inner = |r: &Vec<PoiId>| r[1..r.len() - 1].to_vec();
        let spread: f64 = set
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, r)| 1.0 - f1_score(&inner(&set[i]), &inner(r), true))
            .sum::<f64>()
            / (set.len() - 1) as f64;
        prop_assume!(spread <= before);
        let mut more = set.clone();
        more.push(set[i].clone());
        prop_assert!(diversity_score(&more).unwrap() <= before + 1e-12);
    }
}

#[test]
fn copying_an_outlier_can_increase_diversity() {
    let set = vec![vec![0, 1, 11], vec![0, 8, 11], vec![0, 1, 11], vec![0, 1, 11]];
    let mut more = set.clone();
    more.push(vec![0, 8, 11]);
    assert_relative_eq!(diversity_score(&set).unwrap(), 0.5);
    assert_relative_eq!(diversity_score(&more).unwrap(), 0.6);
}
