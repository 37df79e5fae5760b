use std::cmp::Ordering;
use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::repo::{self, InferenceEdge, InferenceResult};
use super::*;
use crate::domain::testutil::*;
use crate::domain::{profile, AllelicProfile, Role, User, Visibility};

fn slots(v: &[u32]) -> Vec<Option<String>> {
    v.iter().map(|a| (*a != 0).then(|| a.to_string())).collect()
}

fn random_profiles(rng: &mut StdRng, n: usize, loci: usize, alphabet: u32) -> Vec<AllelicProfile> {
    (0..n)
        .map(|i| {
            let alleles: Vec<u32> = (0..loci)
                .map(|_| if rng.gen_bool(0.05) { 0 } else { rng.gen_range(1..=alphabet) })
                .collect();
            let mut p = AllelicProfile::new(format!("st{i}"), slots(&alleles));
            p.frequency = rng.gen_range(0..4);
            p
        })
        .collect()
}

/// Straight double loop over the string slots.
fn brute_matrix(profiles: &[AllelicProfile]) -> Vec<Vec<u32>> {
    profiles
        .iter()
        .enumerate()
        .map(|(i, a)| {
            profiles
                .iter()
                .enumerate()
                .map(|(j, b)| {
                    if i == j {
                        return 0;
                    }
                    (0..a.alleles.len())
                        .filter(|&k| match (&a.alleles[k], &b.alleles[k]) {
                            (Some(x), Some(y)) => x != y,
                            _ => true,
                        })
                        .count() as u32
                })
                .collect()
        })
        .collect()
}

/// Sort key restating the tie-break rule: smaller key means preferred edge.
fn oracle_key(d: &[Vec<u32>], freq: &[u64], ids: &[String], lvs: usize, u: usize, v: usize) -> Vec<i64> {
    let count = |x: usize, k: u32| (0..d.len()).filter(|&y| y != x && d[x][y] == k).count() as i64;
    let mut key = vec![d[u][v] as i64];
    for k in 1..=lvs as u32 {
        let (a, b) = (count(u, k), count(v, k));
        key.push(-a.max(b));
        key.push(-a.min(b));
    }
    key.push(-(freq[u].max(freq[v]) as i64));
    key.push(-(freq[u].min(freq[v]) as i64));
    let (lo, hi) = if ids[u] <= ids[v] { (u, v) } else { (v, u) };
    // Ids in this suite are "st<k>", so their string order is the order of
    // the rank of the id among all ids.
    let pos = |x: usize| ids.iter().filter(|o| *o < &ids[x]).count() as i64;
    key.push(pos(lo));
    key.push(pos(hi));
    key
}

/// Minimum spanning tree under the comparator's induced tree order, found by
/// enumerating every (n-1)-subset of the complete graph's edges.
fn exhaustive_tree(
    d: &[Vec<u32>],
    freq: &[u64],
    ids: &[String],
    lvs: usize,
) -> BTreeSet<(usize, usize, u32)> {
    let n = d.len();
    let all: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let keyed: Vec<Vec<i64>> = all.iter().map(|&(u, v)| oracle_key(d, freq, ids, lvs, u, v)).collect();
    let mut best: Option<(Vec<Vec<i64>>, Vec<usize>)> = None;
    let k = n.saturating_sub(1);
    let mut pick: Vec<usize> = (0..k).collect();
    loop {
        if is_spanning_tree(n, pick.iter().map(|&e| all[e])) {
            let mut seq: Vec<Vec<i64>> = pick.iter().map(|&e| keyed[e].clone()).collect();
            seq.sort();
            if best.as_ref().is_none_or(|(b, _)| seq < *b) {
                best = Some((seq, pick.clone()));
            }
        }
        // next combination
        let mut i = k;
        loop {
            if i == 0 {
                let picked = best.map(|(_, p)| p).unwrap_or_default();
                return picked.iter().map(|&e| (all[e].0, all[e].1, d[all[e].0][all[e].1])).collect();
            }
            i -= 1;
            if pick[i] < all.len() - k + i {
                pick[i] += 1;
                for j in i + 1..k {
                    pick[j] = pick[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn is_spanning_tree(n: usize, edges: impl Iterator<Item = (usize, usize)>) -> bool {
    let mut label: Vec<usize> = (0..n).collect();
    for (u, v) in edges {
        let (a, b) = (label[u], label[v]);
        if a == b {
            return false;
        }
        for l in label.iter_mut() {
            if *l == b {
                *l = a;
            }
        }
    }
    true
}

/// Plain Kruskal on distance only, with a naive relabelling forest.
fn kruskal_weight(d: &[Vec<u32>]) -> u64 {
    let n = d.len();
    let mut edges: Vec<(u32, usize, usize)> =
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (d[i][j], i, j))).collect();
    edges.sort();
    let mut label: Vec<usize> = (0..n).collect();
    let mut total = 0;
    for (w, u, v) in edges {
        let (a, b) = (label[u], label[v]);
        if a != b {
            total += w as u64;
            label.iter_mut().filter(|l| **l == b).for_each(|l| *l = a);
        }
    }
    total
}

fn run(profiles: &[AllelicProfile], lvs: usize) -> (DistanceMatrix<u32>, Vec<VertexRank>, Vec<MstEdge<u32>>) {
    let m: DistanceMatrix<u32> = build_matrix(profiles).unwrap();
    let f: Vec<u64> = profiles.iter().map(|p| p.frequency).collect();
    let r = rank_vertices(&m, lvs, &f);
    let t = goeburst(&m, GoeBurstParams { lvs }, &r);
    (m, r, t)
}

fn undirected(tree: &[MstEdge<u32>]) -> BTreeSet<(usize, usize, u32)> {
    tree.iter()
        .map(|e| (e.from.min(e.to), e.from.max(e.to), e.distance))
        .collect()
}

#[test]
fn hamming_examples() {
    assert_eq!(hamming(&slots(&[1; 7]), &slots(&[1; 7])), Ok(0));
    assert_eq!(hamming(&slots(&[1, 2, 3]), &slots(&[1, 5, 3])), Ok(1));
    assert_eq!(hamming(&slots(&[1, 0, 3]), &slots(&[1, 0, 3])), Ok(1));
    assert!(matches!(
        hamming(&slots(&[1, 2]), &slots(&[1])),
        Err(InferenceError::LengthMismatch { expected: 2, got: 1 })
    ));
}

#[test]
fn matrix_examples() {
    let one = [AllelicProfile::new("a", slots(&[1, 2]))];
    let m: DistanceMatrix<u8> = build_matrix(&one).unwrap();
    assert_eq!((m.len(), m.get(0, 0)), (1, 0));

    let dup = [
        AllelicProfile::new("a", slots(&[1, 2])),
        AllelicProfile::new("b", slots(&[1, 2])),
    ];
    let m: DistanceMatrix<u32> = build_matrix(&dup).unwrap();
    assert_eq!(m.get(0, 1), 0);

    let bad = [
        AllelicProfile::new("a", slots(&[1, 2])),
        AllelicProfile::new("b", slots(&[1])),
    ];
    assert!(build_matrix::<u32, _>(&bad).is_err());
    assert_eq!(build_matrix::<u32, AllelicProfile>(&[]), Err(InferenceError::Empty));
}

#[test]
fn matrix_matches_brute_force() {
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..20 {
        let p = random_profiles(&mut rng, 10, 7, 3);
        let m: DistanceMatrix<u32> = build_matrix(&p).unwrap();
        let b = brute_matrix(&p);
        for i in 0..10 {
            for j in 0..10 {
                assert_eq!(m.get(i, j), b[i][j]);
                if i != j {
                    assert_eq!(m.get(i, j) as usize, hamming(&p[i].alleles, &p[j].alleles).unwrap());
                }
            }
        }
    }
}

#[test]
fn rank_examples_and_recount() {
    let two = [
        AllelicProfile::new("a", slots(&[1, 1, 1])),
        AllelicProfile::new("b", slots(&[1, 1, 2])),
    ];
    let (_, r, _) = run(&two, 1);
    assert_eq!((r[0].lv[0], r[1].lv[0]), (1, 1));

    let mut star = vec![AllelicProfile::new("hub", slots(&[1, 1, 1, 1]))];
    for k in 0..4 {
        let mut a = [1; 4];
        a[k] = 2;
        star.push(AllelicProfile::new(format!("s{k}"), slots(&a)));
    }
    let (_, r, _) = run(&star, 2);
    assert_eq!(r[0].lv, vec![4, 0]);
    assert_eq!(r[1].lv, vec![1, 3]);

    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..20 {
        let p = random_profiles(&mut rng, 8, 7, 2);
        let b = brute_matrix(&p);
        let (_, r, _) = run(&p, 7);
        for (v, rank) in r.iter().enumerate() {
            for k in 1..=7 {
                let want = (0..8).filter(|&u| u != v && b[u][v] == k as u32).count();
                assert_eq!(rank.lv[k - 1], want);
            }
            assert!(rank.lv[0] <= 7);
            assert_eq!(rank.frequency, p[v].frequency);
        }
    }
}

fn vr(lv: &[usize], frequency: u64, id: &str) -> VertexRank {
    VertexRank { lv: lv.to_vec(), frequency, id: id.into() }
}

#[test]
fn edge_compare_examples() {
    let ranks = [vr(&[1], 0, "A"), vr(&[1], 0, "B"), vr(&[1], 0, "C")];
    assert_eq!(edge_compare((1u32, 0, 1), (2, 0, 1), &ranks, 1), Ordering::Less);
    assert_eq!(edge_compare((1u32, 0, 1), (1, 0, 2), &ranks, 1), Ordering::Less);
    assert_eq!(edge_compare((1u32, 1, 0), (1, 0, 1), &ranks, 1), Ordering::Equal);

    let ranks = [vr(&[3], 0, "A"), vr(&[1], 0, "B"), vr(&[2], 0, "C"), vr(&[1], 0, "D")];
    assert_eq!(edge_compare((1u32, 0, 1), (1, 2, 3), &ranks, 1), Ordering::Less);
    // lvs bounds the depth: equal c1 with differing c2 ties at lvs=1.
    let ranks = [vr(&[1, 5], 0, "B"), vr(&[1, 0], 0, "A"), vr(&[1, 0], 0, "C")];
    assert_eq!(edge_compare((1u32, 0, 1), (1, 1, 2), &ranks, 2), Ordering::Less);
    assert_eq!(edge_compare((1u32, 0, 1), (1, 1, 2), &ranks, 1), Ordering::Less);
    assert_eq!(edge_compare((1u32, 0, 2), (1, 1, 0), &ranks[..], 1), Ordering::Greater);
    // Frequencies follow the LV counts.
    let ranks = [vr(&[1], 1, "A"), vr(&[1], 9, "B"), vr(&[1], 5, "C"), vr(&[1], 5, "D")];
    assert_eq!(edge_compare((1u32, 0, 1), (1, 2, 3), &ranks, 1), Ordering::Less);
}

#[test]
fn goeburst_small_examples() {
    let one = [AllelicProfile::new("A", slots(&[1, 1]))];
    assert!(run(&one, 1).2.is_empty());

    // d(A,B)=1, d(A,C)=1, d(B,C)=2
    let three = [
        AllelicProfile::new("A", slots(&[1, 1])),
        AllelicProfile::new("B", slots(&[2, 1])),
        AllelicProfile::new("C", slots(&[1, 2])),
    ];
    let (_, _, t) = run(&three, 1);
    assert_eq!(undirected(&t), BTreeSet::from([(0, 1, 1), (0, 2, 1)]));
    // A has two SLVs, so both edges leave it.
    assert!(t.iter().all(|e| e.from == 0));
}

#[test]
fn goeburst_matches_exhaustive_oracle() {
    let mut rng = StdRng::seed_from_u64(1);
    for _ in 0..80 {
        let n = rng.gen_range(1..=7);
        let lvs = rng.gen_range(1..=3);
        let p = random_profiles(&mut rng, n, 7, 2);
        let (_, _, t) = run(&p, lvs);
        let ids: Vec<String> = p.iter().map(|x| x.id.clone()).collect();
        let f: Vec<u64> = p.iter().map(|x| x.frequency).collect();
        assert_eq!(undirected(&t), exhaustive_tree(&brute_matrix(&p), &f, &ids, lvs));
    }
}

#[test]
fn goeburst_weight_matches_plain_kruskal() {
    let mut rng = StdRng::seed_from_u64(2);
    for _ in 0..10 {
        let p = random_profiles(&mut rng, 120, 7, 4);
        let (_, _, t) = run(&p, 3);
        assert_eq!(t.len(), 119);
        let w: u64 = t.iter().map(|e| e.distance as u64).sum();
        assert_eq!(w, kruskal_weight(&brute_matrix(&p)));
    }
}

#[test]
fn goeburst_is_deterministic_and_frequency_scale_invariant() {
    let mut rng = StdRng::seed_from_u64(3);
    for _ in 0..20 {
        let p = random_profiles(&mut rng, 40, 7, 2);
        let params = GoeBurstParams { lvs: 3 };
        let a = infer::<u32>(&p, params).unwrap();
        let b = infer::<u32>(&p, params).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        let scaled: Vec<AllelicProfile> = p
            .iter()
            .map(|x| AllelicProfile { frequency: x.frequency * 7, ..x.clone() })
            .collect();
        let c = infer::<u32>(&scaled, params).unwrap();
        let set = |r: &Inferred| r.edges.iter().cloned().collect::<BTreeSet<_>>();
        assert_eq!(set(&a), set(&c));
    }
}

#[test]
fn infer_validates_levels_and_allows_empty() {
    let p = [AllelicProfile::new("a", slots(&[1, 2]))];
    assert!(infer::<u32>(&p, GoeBurstParams { lvs: 3 }).is_err());
    assert!(infer::<u32>(&p, GoeBurstParams { lvs: 0 }).is_err());
    assert!(infer::<u32>(&[], GoeBurstParams::default()).unwrap().edges.is_empty());
}

#[test]
fn union_find_merges() {
    let mut uf = UnionFind::new(5);
    assert!(uf.union(0, 1));
    assert!(uf.union(3, 4));
    assert!(!uf.union(1, 0));
    assert!(uf.union(1, 4));
    assert_eq!(uf.find(0), uf.find(3));
    assert_ne!(uf.find(2), uf.find(0));
}

fn rank_strategy() -> impl Strategy<Value = Vec<VertexRank>> {
    prop::collection::vec((prop::collection::vec(0usize..3, 2), 0u64..3), 6).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (lv, f))| vr(&lv, f, &format!("v{i}")))
            .collect()
    })
}

fn edge_strategy() -> impl Strategy<Value = (u32, usize, usize)> {
    (0u32..3, 0usize..6, 0usize..6).prop_filter("no self loops", |(_, a, b)| a != b)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    // 2000 cases x 5 triples each = 10^4 triples.
    #[test]
    fn edge_compare_is_a_total_order(
        ranks in rank_strategy(),
        triples in prop::collection::vec((edge_strategy(), edge_strategy(), edge_strategy()), 5),
    ) {
        for (x, y, z) in triples {
            let c = |a, b| edge_compare(a, b, &ranks, 2);
            prop_assert_eq!(c(x, y), c(y, x).reverse());
            if c(x, y) != Ordering::Greater && c(y, z) != Ordering::Greater {
                prop_assert_ne!(c(x, z), Ordering::Greater);
            }
            if c(x, y) == Ordering::Equal {
                prop_assert_eq!(x.0, y.0);
                prop_assert_eq!((x.1.min(x.2), x.1.max(x.2)), (y.1.min(y.2), y.1.max(y.2)));
            }
        }
    }
}

fn layer(id: &str, edges: &[(&str, &str, u64)]) -> InferenceResult {
    InferenceResult {
        id: id.into(),
        algorithm: "goeburst".into(),
        dataset: "d1".into(),
        parameters: serde_json::json!({"lvs": 3}),
        edges: edges
            .iter()
            .map(|(a, b, d)| InferenceEdge { from: a.to_string(), to: b.to_string(), distance: *d })
            .collect(),
    }
}

#[test]
fn layers_are_isolated_and_overwritten_atomically() {
    let (store, ds) = fixture(&User::new("u", Role::User), Visibility::Private);
    let mut tx = store.write().unwrap();
    for (i, id) in ["a", "b", "c"].iter().enumerate() {
        profile::save(&mut tx, &ds, &profile(id, [i as u32 + 1; 7])).unwrap();
    }
    let inf1 = layer("inf1", &[("a", "b", 7), ("a", "c", 7)]);
    let inf2 = layer("inf2", &[("b", "a", 7), ("b", "c", 7)]);
    repo::persist(&mut tx, &ds, &inf1, &[]).unwrap();
    let before = repo::get(&tx, &ds, "inf1").unwrap();
    repo::persist(&mut tx, &ds, &inf2, &["b".into()]).unwrap();
    assert_eq!(repo::get(&tx, &ds, "inf1").unwrap(), before);
    assert_eq!(before, inf1);
    assert_eq!(repo::get(&tx, &ds, "inf2").unwrap().edges, inf2.edges);
    assert!(repo::edges(&tx, &ds, "nope").is_empty());
    assert!(repo::get(&tx, &ds, "nope").is_err());
    assert_eq!(repo::ranking(&tx, &ds, "inf2").unwrap(), Some(vec!["b".to_string()]));

    let replaced = layer("inf1", &[("c", "a", 7)]);
    repo::persist(&mut tx, &ds, &replaced, &[]).unwrap();
    assert_eq!(repo::get(&tx, &ds, "inf1").unwrap().edges, replaced.edges);
    assert_eq!(repo::get(&tx, &ds, "inf2").unwrap().edges, inf2.edges);
    let listed = repo::list(&tx, &ds, crate::graphstore::Page::all());
    assert_eq!(listed.total, 2);
    assert_eq!(listed.items[0].edge_count, 1);

    let bad = layer("inf3", &[("a", "zz", 1)]);
    assert!(matches!(
        repo::persist(&mut tx, &ds, &bad, &[]),
        Err(crate::domain::DomainError::NotFound { kind: "profile", .. })
    ));
}
