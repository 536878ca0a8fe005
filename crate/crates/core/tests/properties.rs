mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rgnet::corpus::{parse_corpus_str, FilterConfig};
use rgnet::guvec::{build_cooccurrence, UserIndex};
use rgnet::manifold::time_coordinate;
use rgnet::metrics::{auc, multilabel_metrics};
use rgnet::model::{metric_distance, Rgnet};
use rgnet::pipeline::build_lexicons;
use serde_json::json;

use common::{toy_rgnet, toy_sample};

/// One discussion line with `replies[k]` giving the parent of comment `k`
/// (0 is the post, `j > 0` is comment `j − 1`).
fn discussion_line(id: usize, authors: &[usize], replies: &[usize], gaps: &[i64]) -> String {
    let t0 = 1_000 * id as i64;
    let mut t = t0;
    let comments: Vec<_> = replies
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            t += gaps[k];
            let parent = if p == 0 || k == 0 { format!("p{id}") } else { format!("p{id}c{}", (p - 1) % k) };
            json!({"id": format!("p{id}c{k}"), "author": format!("u{}", authors[k + 1]), "parent_id": parent, "timestamp": t, "body": "text"})
        })
        .collect();
    json!({"post": {"id": format!("p{id}"), "author": format!("u{}", authors[0]), "title": "shared title", "body": "b", "timestamp": t0}, "comments": comments})
        .to_string()
}

fn corpus_strategy() -> impl Strategy<Value = Vec<(Vec<usize>, Vec<usize>, Vec<i64>)>> {
    prop::collection::vec(
        (1usize..6).prop_flat_map(|n| {
            (
                prop::collection::vec(0usize..5, n + 1),
                prop::collection::vec(0usize..6, n),
                prop::collection::vec(0i64..50, n),
            )
        }),
        1..5,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metric_distance_dominates_euclidean(
        pts in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0, 0.001f64..0.999), 1..9)
    ) {
        let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let g: Vec<f64> = pts.iter().map(|p| p.2).collect();
        let euclid = metric_distance(&vec![1.0; g.len()], &x, &y);
        prop_assert!(metric_distance(&g, &x, &y) >= euclid);
    }

    #[test]
    fn cooccurrence_is_symmetric_and_order_free(spec in corpus_strategy()) {
        let lines: Vec<String> = spec.iter().enumerate().map(|(i, (a, r, g))| discussion_line(i, a, r, g)).collect();
        let filter = FilterConfig { min_user_discussions: 1, ..FilterConfig::default() };
        let corpus = parse_corpus_str(&lines.join("\n"), &filter).unwrap();
        let users = UserIndex::new(corpus.embedded.iter().cloned());
        let refs: Vec<_> = corpus.discussions.iter().collect();
        let lex = build_lexicons(&refs, None, None, None).unwrap();
        let a = build_cooccurrence(&corpus.discussions, &users, &lex, 0.3);

        let mut reversed = corpus.discussions.clone();
        reversed.reverse();
        let b = build_cooccurrence(&reversed, &users, &lex, 0.3);
        for i in 0..users.len() {
            prop_assert_eq!(a.get(i, i), 0.0);
            for j in 0..users.len() {
                prop_assert_eq!(a.get(i, j), a.get(j, i));
                prop_assert!(a.get(i, j) >= 0.0);
                prop_assert!((a.get(i, j) - b.get(i, j)).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn auc_complements_and_ignores_monotone_maps(
        rows in prop::collection::vec((0u8..8, any::<bool>()), 2..40)
    ) {
        let scores: Vec<f64> = rows.iter().map(|r| f64::from(r.0)).collect();
        let ys: Vec<u8> = rows.iter().map(|r| u8::from(r.1)).collect();
        prop_assume!(ys.contains(&0) && ys.contains(&1));
        let a = auc(&scores, &ys).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        let flipped: Vec<u8> = ys.iter().map(|y| 1 - y).collect();
        prop_assert!((a + auc(&scores, &flipped).unwrap() - 1.0).abs() < 1e-12);
        let squashed: Vec<f64> = scores.iter().map(|s| (s * 0.7 - 1.0).exp()).collect();
        prop_assert!((a - auc(&squashed, &ys).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn multilabel_metrics_stay_in_range(
        pairs in prop::collection::vec(prop::collection::vec((any::<bool>(), any::<bool>()), 3), 1..20)
    ) {
        let pred: Vec<Vec<u8>> = pairs.iter().map(|r| r.iter().map(|p| u8::from(p.0)).collect()).collect();
        let truth: Vec<Vec<u8>> = pairs.iter().map(|r| r.iter().map(|p| u8::from(p.1)).collect()).collect();
        let r = multilabel_metrics(&pred, &truth).unwrap();
        for v in [r.hamming_loss, r.micro_f1, r.macro_f1, r.subset_01] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        let own = multilabel_metrics(&truth, &truth).unwrap();
        prop_assert_eq!(own.hamming_loss, 0.0);
        prop_assert_eq!(own.subset_01, 0.0);
        if truth.iter().flatten().any(|&t| t == 1) {
            prop_assert_eq!(own.micro_f1, 1.0);
        }
    }

    #[test]
    fn time_coordinate_is_monotone_and_bounded(a in 0.0f64..1e8, b in 0.0f64..1e8) {
        let cap = 30.0 * 86_400.0;
        let (ta, tb) = (time_coordinate(a, cap), time_coordinate(b, cap));
        prop_assert!((0.0..=1.0).contains(&ta));
        if a <= b {
            prop_assert!(ta <= tb);
        }
    }

    #[test]
    fn inverse_metric_ignores_discussion_content(seed in 0u64..1000, other in 0u64..1000) {
        let cfg = toy_rgnet(false);
        let m = Rgnet::new(cfg, seed).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(seed);
        let mut r2 = ChaCha8Rng::seed_from_u64(other.wrapping_add(7919));
        let (s1, centers) = toy_sample(&mut r1, 5, 4, 4, 3, 3, 2, 3);
        let (mut s2, _) = toy_sample(&mut r2, 5, 4, 4, 3, 3, 2, 3);
        s2.taus = s1.taus.clone();
        let (t1, t2) = (m.forward_trace(&s1, &centers).unwrap(), m.forward_trace(&s2, &centers).unwrap());
        for (a, b) in t1.steps.iter().zip(&t2.steps) {
            prop_assert_eq!(&a.g_inv, &b.g_inv);
        }
    }
}
