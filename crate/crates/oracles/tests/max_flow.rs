use ipmflow_oracles::{edmonds_karp, edmonds_karp_two_sided};
use proptest::prelude::*;

/// Smallest s-t cut by enumerating every vertex subset.
fn min_cut(n: usize, s: usize, t: usize, arcs: &[(usize, usize, i64)]) -> i64 {
    (0u32..1 << n)
        .filter(|mask| mask & (1 << s) != 0 && mask & (1 << t) == 0)
        .map(|mask| {
            arcs.iter()
                .filter(|&&(a, b, _)| mask & (1 << a) != 0 && mask & (1 << b) == 0)
                .map(|&(_, _, c)| c)
                .sum()
        })
        .min()
        .unwrap()
}

fn arcs() -> impl Strategy<Value = (usize, Vec<(usize, usize, i64)>)> {
    (2usize..=7).prop_flat_map(|n| {
        let arc = (0..n, 0..n, 0i64..=5).prop_filter("no loops", |(a, b, _)| a != b);
        (Just(n), prop::collection::vec(arc, 0..=14))
    })
}

proptest! {
    #[test]
    fn max_flow_equals_min_cut((n, arcs) in arcs()) {
        prop_assert_eq!(edmonds_karp(n, 0, n - 1, &arcs), min_cut(n, 0, n - 1, &arcs));
    }

    #[test]
    fn two_sided_edges_split_into_arcs((n, arcs) in arcs(), back in prop::collection::vec(0i64..=3, 14)) {
        let edges: Vec<_> = arcs.iter().zip(&back).map(|(&(a, b, c), &r)| (a, b, c, r)).collect();
        let split: Vec<_> = edges.iter().flat_map(|&(a, b, c, r)| [(a, b, c), (b, a, r)]).collect();
        prop_assert_eq!(edmonds_karp_two_sided(n, 0, n - 1, &edges), min_cut(n, 0, n - 1, &split));
    }
}
