use fairclust_core::contrastive::{build_contrastive, ContrastiveOptions};
use fairclust_core::metrics::{accuracy, average_balance, balance_of_cluster, modularity, rho_fairness};
use fairclust_core::{ClusterLabels, Graph, GroupAssignment};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `Q = 1/(2m) sum_ij [A_ij - d_i d_j / 2m] delta(c_i, c_j)` over all ordered pairs.
fn pairwise_modularity(a: &[Vec<f64>], labels: &[usize]) -> f64 {
    let n = a.len();
    let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let two_m: f64 = deg.iter().sum();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if labels[i] == labels[j] {
                q += a[i][j] - deg[i] * deg[j] / two_m;
            }
        }
    }
    q / two_m
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

fn best_matching(pred: &[usize], truth: &[usize], k: usize) -> usize {
    permutations(k)
        .iter()
        .map(|perm| pred.iter().zip(truth).filter(|&(&p, &t)| perm[p] == t).count())
        .max()
        .unwrap()
}

#[test]
fn modularity_matches_pairwise_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    while checked < 200 {
        let n = rng.random_range(2..=12);
        let p = rng.random_range(0.1..0.9);
        let mut edges = Vec::new();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<f64>() < p {
                    edges.push((i, j));
                    a[i][j] = 1.0;
                    a[j][i] = 1.0;
                }
            }
        }
        if edges.is_empty() {
            continue;
        }
        let k = rng.random_range(1..=n.min(5)).max(2);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let graph = Graph::from_edges(n, edges).unwrap();
        let got = modularity(&graph, &ClusterLabels::new(labels.clone(), k).unwrap()).unwrap();
        let want = pairwise_modularity(&a, &labels);
        assert!((got - want).abs() <= 1e-12, "n={n}: {got} vs {want}");
        checked += 1;
    }
}

#[test]
fn accuracy_matches_exhaustive_matching() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..300 {
        let k = rng.random_range(2..=5);
        let n = rng.random_range(1..=30);
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let got = accuracy(
            &ClusterLabels::new(pred.clone(), k).unwrap(),
            &ClusterLabels::new(truth.clone(), k).unwrap(),
        )
        .unwrap();
        let want = best_matching(&pred, &truth, k) as f64 / n as f64;
        assert_eq!(got, want);
    }
}

#[test]
fn two_equal_cliques_have_modularity_one_half() {
    for size in [3usize, 4, 7] {
        let mut edges = Vec::new();
        for block in 0..2 {
            let base = block * size;
            for i in 0..size {
                for j in i + 1..size {
                    edges.push((base + i, base + j));
                }
            }
        }
        let graph = Graph::from_edges(2 * size, edges).unwrap();
        let labels = ClusterLabels::new((0..2 * size).map(|i| i / size).collect(), 2).unwrap();
        assert!((modularity(&graph, &labels).unwrap() - 0.5).abs() <= 1e-12);
    }
}

#[test]
fn one_to_three_group_split_has_balance_one_third() {
    let groups = GroupAssignment::from_labels(vec![0, 1, 1, 1]).unwrap();
    assert_eq!(balance_of_cluster(&[0, 1, 2, 3], &groups).unwrap(), 1.0 / 3.0);
}

#[test]
fn laplacian_rows_sum_to_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..100 {
        let n = rng.random_range(2..=200);
        let m = rng.random_range(1..=n.min(6));
        let mut labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..m)).collect();
        for (g, slot) in labels.iter_mut().take(m).enumerate() {
            *slot = g;
        }
        let groups = GroupAssignment::from_labels(labels).unwrap();
        for opts in [ContrastiveOptions::default(), ContrastiveOptions::zero_diagonal()] {
            let l = build_contrastive(&groups, opts).laplacian();
            for (i, row) in l.rows().into_iter().enumerate() {
                let s: f64 = row.sum();
                assert!(s.abs() <= 1e-12, "case {case} row {i}: {s}");
            }
        }
    }
}

fn clustering() -> impl Strategy<Value = (Vec<(usize, usize)>, Vec<usize>, Vec<usize>, usize, usize)> {
    (3usize..25, 2usize..5, 2usize..4).prop_flat_map(|(n, k, m)| {
        (
            proptest::collection::vec((0..n, 0..n), 1..60),
            proptest::collection::vec(0..k, n),
            proptest::collection::vec(0..m, n),
            Just(k),
            Just(m),
        )
    })
}

proptest! {
    #[test]
    fn scores_stay_in_range((pairs, labels, groups, k, m) in clustering()) {
        let n = labels.len();
        let mut edges: Vec<_> = pairs.into_iter().filter(|(u, v)| u != v).collect();
        prop_assume!(!edges.is_empty());
        edges.sort_unstable();
        let graph = Graph::from_edges(n, edges).unwrap();
        let labels = ClusterLabels::new(labels, k).unwrap();

        let q = modularity(&graph, &labels).unwrap();
        prop_assert!((-0.5 - 1e-12..=1.0).contains(&q));

        let (rho, per) = rho_fairness(&graph, &labels).unwrap();
        prop_assert!((0.0..=1.0).contains(&rho));
        prop_assert!(per.iter().flatten().all(|r| (0.0..=1.0).contains(r)));

        prop_assert_eq!(accuracy(&labels, &labels).unwrap(), 1.0);

        let mut group_labels = groups;
        for (i, slot) in group_labels.iter_mut().take(m).enumerate() {
            *slot = i;
        }
        let groups = GroupAssignment::from_labels(group_labels).unwrap();
        let (b, per_cluster) = average_balance(&labels, &groups).unwrap();
        prop_assert!((0.0..=1.0).contains(&b));
        prop_assert!(per_cluster.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn accuracy_ignores_label_names(labels in proptest::collection::vec(0usize..4, 1..40), shift in 1usize..4) {
        let renamed: Vec<usize> = labels.iter().map(|&l| (l + shift) % 4).collect();
        let a = ClusterLabels::new(labels, 4).unwrap();
        let b = ClusterLabels::new(renamed, 4).unwrap();
        prop_assert_eq!(accuracy(&a, &b).unwrap(), 1.0);
    }
}
