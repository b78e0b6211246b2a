use proptest::prelude::*;

use super::*;
use crate::corpus::{Document, Vocab};
use crate::model::{ModelConfig, ModelDims, Variant};

fn set(paths: Vec<Vec<Vec<f64>>>) -> TrajectorySet {
    let n = paths.len();
    TrajectorySet::new(
        Trajectories {
            h_static: vec![Vec::new(); n],
            h_dynamic: paths,
        },
        (0..n).map(|a| format!("a{a}")).collect(),
    )
    .unwrap()
}

fn labeled(author: usize, time: usize, labels: &[&str]) -> Document {
    Document {
        author,
        time,
        tokens: vec![2],
        labels: labels.iter().map(|s| s.to_string()).collect(),
    }
}

fn corpus(docs: Vec<Document>) -> Corpus {
    Corpus {
        num_authors: docs.iter().map(|d| d.author + 1).max().unwrap_or(0),
        num_timesteps: docs.iter().map(|d| d.time).max().unwrap_or(0),
        author_names: vec![],
        documents: docs,
        vocab: Vocab::with_words(&["x"]).unwrap(),
        first_year: 2000,
    }
}

#[test]
fn average_cosine_examples() {
    let shared = set(vec![vec![vec![1.0, 2.0], vec![-3.0, 0.5]]; 4]);
    for (_, c) in avg_cosine_series(&shared).unwrap() {
        assert!((c - 1.0).abs() < 1e-12);
    }
    let ortho = set(vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 5.0]]]);
    assert_eq!(avg_cosine_series(&ortho).unwrap(), vec![(1, 0.0)]);

    // Pairs: (1,0)-(0,1) → 0, (1,0)-(1,1) → 1/√2, (0,1)-(1,1) → 1/√2.
    let three = set(vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]], vec![vec![1.0, 1.0]]]);
    let want = (2.0 / 2f64.sqrt()) / 3.0;
    assert!((avg_cosine_series(&three).unwrap()[0].1 - want).abs() < 1e-12);

    assert!(avg_cosine_series(&set(vec![vec![vec![1.0, 0.0]]])).is_err());
    let with_zero = set(vec![vec![vec![0.0, 0.0]], vec![vec![1.0, 0.0]]]);
    assert_eq!(avg_cosine_series(&with_zero).unwrap()[0].1, 0.0);
}

#[test]
fn self_similarity_examples() {
    let s = set(vec![
        vec![vec![1.0, 2.0], vec![1.0, 2.0], vec![-1.0, -2.0], vec![2.0, -1.0]],
        vec![vec![3.0, 3.0]; 4],
    ]);
    let a = self_similarity(&s, 0).unwrap();
    assert_eq!(a[0], (1, 1.0));
    assert!((a[1].1 - 1.0).abs() < 1e-12);
    assert!((a[2].1 + 1.0).abs() < 1e-12);
    assert!(a[3].1.abs() < 1e-12);
    assert!(self_similarity(&s, 1).unwrap().iter().all(|&(_, c)| (c - 1.0).abs() < 1e-12));
    assert!(matches!(self_similarity(&s, 2), Err(Error::UnknownAuthor(2))));
}

#[test]
fn top_mover_examples() {
    let constant = set(vec![vec![vec![1.0, 1.0]; 3]; 4]);
    let r = top_movers(&constant, 2, Direction::Most, None).unwrap();
    assert_eq!(r.iter().map(|x| x.0).collect::<Vec<_>>(), vec![0, 1]);

    let mut paths = vec![vec![vec![1.0, 1.0]; 3]; 4];
    paths[2][2] = vec![-1.0, -1.0];
    let flipped = set(paths);
    assert_eq!(top_movers(&flipped, 1, Direction::Most, None).unwrap()[0].0, 2);

    // End cosines {0.9, 0.5, 0.1, −0.2, 0.7} from unit vectors at angle acos(c).
    let cosines = [0.9, 0.5, 0.1, -0.2, 0.7];
    let hand = set(cosines
        .iter()
        .map(|&c: &f64| vec![vec![1.0, 0.0], vec![c, (1.0 - c * c).sqrt()]])
        .collect());
    let most = top_movers(&hand, 2, Direction::Most, None).unwrap();
    assert_eq!(most.iter().map(|x| x.0).collect::<Vec<_>>(), vec![3, 2]);
    let least = top_movers(&hand, 2, Direction::Least, Some(&[1, 2, 3, 4])).unwrap();
    assert_eq!(least.iter().map(|x| x.0).collect::<Vec<_>>(), vec![4, 1]);
    assert_eq!(movers_tsv(&hand, &most).lines().next().unwrap().split('\t').take(2).collect::<Vec<_>>(), ["1", "a3"]);

    assert!(top_movers(&hand, 1, Direction::Most, Some(&[])).is_err());
    assert!(top_movers(&hand, 3, Direction::Most, Some(&[0, 1])).is_err());
    assert!(top_movers(&hand, 1, Direction::Most, Some(&[9])).is_err());
    assert_eq!("least".parse::<Direction>().unwrap(), Direction::Least);
}

#[test]
fn pca_examples() {
    let line: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, 2.0 * i as f64, -(i as f64)]).collect();
    let p = pca_2d(&line).unwrap();
    assert!((p.explained[0] - 1.0).abs() < 1e-12);
    assert!(p.explained[1].abs() < 1e-12);

    // Centered 2-D input: the projection is a rotation or reflection.
    let flat = vec![vec![1.0, 2.0], vec![-1.0, -2.0], vec![2.0, -1.0], vec![-2.0, 1.0], vec![0.5, 0.0], vec![-0.5, 0.0]];
    let p = pca_2d(&flat).unwrap();
    for i in 0..flat.len() {
        for j in 0..flat.len() {
            let d0 = ((flat[i][0] - flat[j][0]).powi(2) + (flat[i][1] - flat[j][1]).powi(2)).sqrt();
            let d1 = ((p.points[i][0] - p.points[j][0]).powi(2) + (p.points[i][1] - p.points[j][1]).powi(2)).sqrt();
            assert!((d0 - d1).abs() < 1e-12);
        }
    }

    assert!(pca_2d(&vec![vec![1.0, 2.0]; 3]).is_err());
    assert!(pca_2d(&[vec![1.0, 2.0]]).is_err());
    assert!(pca_2d(&[vec![1.0], vec![2.0]]).is_err());
}

#[test]
fn pca_matches_hand_eigendecomposition() {
    // Points ±2e1, ±e2 have covariance diag(8/3, 2/3, 0) with n − 1 = 3.
    // Rotating them by 30° about z rotates the axes and keeps the
    // projections and shares (0.8, 0.2).
    let (c, s) = (30f64.to_radians().cos(), 30f64.to_radians().sin());
    let base = [[2.0, 0.0], [-2.0, 0.0], [0.0, 1.0], [0.0, -1.0]];
    let pts: Vec<Vec<f64>> = base.iter().map(|p| vec![c * p[0] - s * p[1], s * p[0] + c * p[1], 0.0]).collect();
    let p = pca_2d(&pts).unwrap();
    assert!((p.explained[0] - 0.8).abs() < 1e-12 && (p.explained[1] - 0.2).abs() < 1e-12);
    let want_axes = [[c, s, 0.0], [-s, c, 0.0]];
    // The largest coordinate of the second axis is c > 0, so the sign is fixed.
    for k in 0..2 {
        for j in 0..3 {
            assert!((p.axes[k][j] - want_axes[k][j]).abs() < 1e-12, "{:?}", p.axes);
        }
    }
    for (got, want) in p.points.iter().zip(base) {
        assert!((got[0] - want[0]).abs() < 1e-12 && (got[1] - want[1]).abs() < 1e-12);
    }
}

#[test]
fn label_entropy_examples() {
    let c = corpus(vec![
        labeled(0, 1, &["world"]),
        labeled(1, 1, &["world"]),
        labeled(0, 2, &["arts", "world"]),
        labeled(0, 3, &["a", "a", "a"]),
        labeled(1, 3, &["b"]),
        labeled(0, 4, &[]),
    ]);
    let s = label_entropy_series(&c).unwrap();
    assert_eq!(s.len(), 3);
    assert_eq!(s[0], (1, 0.0));
    assert!((s[1].1 - 2f64.ln()).abs() < 1e-12);
    assert!((s[2].1 - 0.562_335_144_618_537_3).abs() < 1e-12);
    assert!(label_entropy_series(&corpus(vec![labeled(0, 1, &[])])).is_err());
    assert_eq!(series_tsv(&s[..1]), "1\t0\n");
}

#[test]
fn dominant_label_examples() {
    let c = corpus(vec![
        labeled(0, 1, &["world", "world"]),
        labeled(0, 1, &["arts", "world"]),
        labeled(1, 1, &["world", "arts"]),
        labeled(1, 1, &["arts", "world"]),
        labeled(1, 2, &[]),
    ]);
    assert_eq!(dominant_label(&c, 0, 1).as_deref(), Some("world"));
    assert_eq!(dominant_label(&c, 1, 1).as_deref(), Some("arts"));
    assert_eq!(dominant_label(&c, 1, 2), None);
    assert_eq!(dominant_label(&c, 0, 5), None);
}

#[test]
fn exports_from_a_model() {
    let dims = ModelDims {
        num_authors: 2,
        num_timesteps: 3,
        vocab_size: 5,
    };
    let m: Model<f64> = Model::new(ModelConfig::tiny(Variant::LstmAt), dims, vec![true; 6], 1).unwrap();
    let t = TrajectorySet::from_model(&m, vec!["ann".into(), "bob".into()]).unwrap();
    assert_eq!(t.num_timesteps, 3);
    let raw = t.to_tsv();
    assert_eq!(raw.lines().count(), 6);
    assert_eq!(raw.lines().next().unwrap().split('\t').count(), 2 + 8);
    let (_, proj) = trajectory_projection_tsv(&t).unwrap();
    assert!(proj.starts_with("ann\t1\t"));
    assert_eq!(proj.lines().count(), 6);
    let lstm: Model<f64> = Model::new(ModelConfig::tiny(Variant::Lstm), dims, vec![true; 6], 1).unwrap();
    assert!(TrajectorySet::from_model(&lstm, vec!["ann".into(), "bob".into()]).is_err());
    assert!(TrajectorySet::from_model(&m, vec!["ann".into()]).is_err());
}

fn vectors(n: usize, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-10.0f64..10.0, d), n)
}

proptest! {
    #[test]
    fn cosines_are_bounded(paths in (2usize..5, 1usize..4, 1usize..5).prop_flat_map(|(a, t, d)| prop::collection::vec(prop::collection::vec(prop::collection::vec(-5.0f64..5.0, d), t), a))) {
        let s = set(paths);
        for (_, c) in avg_cosine_series(&s).unwrap() {
            prop_assert!((-1.0..=1.0).contains(&c));
        }
        for a in 0..s.num_authors() {
            for (_, c) in self_similarity(&s, a).unwrap() {
                prop_assert!((-1.0..=1.0).contains(&c));
            }
        }
    }

    #[test]
    fn average_cosine_ignores_positive_scale(vs in vectors(4, 3), k in 0.01f64..100.0) {
        let one = set(vs.iter().map(|v| vec![v.clone()]).collect());
        let scaled = set(vs.iter().map(|v| vec![v.iter().map(|x| x * k).collect()]).collect());
        let (a, b) = (avg_cosine_series(&one).unwrap()[0].1, avg_cosine_series(&scaled).unwrap()[0].1);
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn explained_shares_are_ordered(vs in vectors(6, 4)) {
        if let Ok(p) = pca_2d(&vs) {
            prop_assert!(p.explained[0] >= 0.0 && p.explained[1] >= 0.0);
            prop_assert!(p.explained[0] + 1e-12 >= p.explained[1]);
            prop_assert!(p.explained[0] + p.explained[1] <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn entropy_ignores_document_order(labels in prop::collection::vec((1usize..4, 0usize..3), 1..30), seed: u64) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let names = ["x", "y", "z"];
        let docs: Vec<Document> = labels.iter().map(|&(t, l)| labeled(0, t, &[names[l]])).collect();
        let mut shuffled = docs.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let (a, b) = (label_entropy_series(&corpus(docs)).unwrap(), label_entropy_series(&corpus(shuffled)).unwrap());
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.0, y.0);
            prop_assert!((x.1 - y.1).abs() < 1e-12);
        }
    }
}
