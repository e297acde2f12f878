use hellinger_bn::bn::random_tree_edges;
use hellinger_bn::tree_order::{dependent_set, order_two_trees, ordering_invariant_holds, Tree};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_tree(n: usize, rng: &mut ChaCha8Rng) -> Tree {
    Tree::new(n, &random_tree_edges(n, rng)).unwrap()
}

#[test]
fn random_pairs_respect_the_bound_and_the_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7ee5);
    for _ in 0..300 {
        let n = rng.gen_range(2..60);
        let tp = random_tree(n, &mut rng);
        let tq = random_tree(n, &mut rng);
        let r = order_two_trees(&tp, &tq).unwrap();
        assert!(r.max_pi() <= 5);
        for i in 0..n {
            let prefix = &r.order[..i];
            let v = r.order[i];
            assert_eq!(r.dep_sets_p[i], dependent_set(&tp, prefix, v).unwrap());
            assert_eq!(r.dep_sets_q[i], dependent_set(&tq, prefix, v).unwrap());
            assert!(ordering_invariant_holds(&tp, &tq, &r.order[..=i]));
        }
    }
}

#[test]
fn dependent_set_separates_the_node_from_the_prefix() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..200 {
        let n = rng.gen_range(2..30);
        let t = random_tree(n, &mut rng);
        let mut nodes: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(nodes.as_mut_slice(), &mut rng);
        let k = rng.gen_range(0..n);
        let (prefix, rest) = nodes.split_at(k);
        let v = rest[0];
        let dep = dependent_set(&t, prefix, v).unwrap();
        // Search from v avoiding the dependent set must not reach any other prefix node.
        let mut seen = vec![false; n];
        let mut stack = vec![v];
        seen[v] = true;
        while let Some(w) = stack.pop() {
            for &u in t.neighbors(w) {
                if !seen[u] && !dep.contains(&u) {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        assert!(prefix.iter().filter(|u| !dep.contains(u)).all(|&u| !seen[u]));
    }
}
