//! Nested operations checked against operations on flattened pair sets.

use std::collections::{BTreeMap, BTreeSet};

use mde::{Dag, NestedElement, NodeId, OpKind, SetIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Map = BTreeMap<u8, BTreeSet<u8>>;
type Pairs = BTreeSet<(u8, u8)>;

fn flat_pairs(m: &Map) -> Pairs {
    m.iter().flat_map(|(k, vs)| vs.iter().map(move |v| (*k, *v))).collect()
}

fn flat_op(op: OpKind, a: &Pairs, b: &Pairs) -> Pairs {
    match op {
        OpKind::Union => a | b,
        OpKind::Intersection => a & b,
        OpKind::Difference => a - b,
    }
}

struct Fixture {
    dag: Dag<u8>,
    child: NodeId,
    parent: NodeId,
}

impl Fixture {
    fn new() -> Self {
        let mut dag = Dag::new();
        let child = dag.add_flat("pointees").unwrap();
        let parent = dag.add_nested("maps", &[child]).unwrap();
        Fixture { dag, child, parent }
    }

    fn register(&mut self, m: &Map) -> SetIndex {
        let mut elems = Vec::new();
        for (k, vs) in m {
            let c = self.dag.flat_mut(self.child).unwrap();
            let v = c.register(vs.iter().copied().collect()).unwrap().0;
            elems.push(NestedElement::single(*k, v));
        }
        self.dag.nested_mut(self.parent).unwrap().register(elems).unwrap().0
    }

    fn pairs(&self, idx: SetIndex) -> Pairs {
        self.dag.flatten(self.parent, idx).unwrap().into_iter().collect()
    }

    fn check_invariants(&mut self) {
        let child = self.dag.flat(self.child).unwrap();
        let parent = self.dag.nested(self.parent).unwrap();
        for (_, elems) in parent.store().iter() {
            assert!(elems.windows(2).all(|w| w[0].key < w[1].key));
            for e in elems {
                assert!(child.resolve(e.value()).is_ok());
                assert!(!e.value().is_empty_set());
            }
        }
        let rels: Vec<_> = parent.subset_relations().iter().map(|(k, v)| (*k, *v)).collect();
        for ((a, b), rel) in rels {
            let (pa, pb) = (self.pairs(a), self.pairs(b));
            assert!(if rel { pa.is_subset(&pb) } else { pa.is_superset(&pb) });
        }
    }
}

fn all_maps(keys: u8, pointees: u8) -> Vec<Map> {
    let per_key = 1u32 << pointees;
    let total = per_key.pow(keys as u32);
    (0..total)
        .map(|mut code| {
            let mut m = Map::new();
            for k in 0..keys {
                let mask = code % per_key;
                code /= per_key;
                let set: BTreeSet<u8> = (0..pointees).filter(|p| mask & (1 << p) != 0).map(|p| 10 + p).collect();
                if !set.is_empty() {
                    m.insert(k, set);
                }
            }
            m
        })
        .collect()
}

#[test]
fn flattening_law_exhaustive_two_by_three() {
    let maps = all_maps(2, 3);
    assert_eq!(maps.len(), 64);
    let mut f = Fixture::new();
    let ids: Vec<_> = maps.iter().map(|m| f.register(m)).collect();
    let flats: Vec<_> = maps.iter().map(flat_pairs).collect();
    for i in 0..maps.len() {
        for j in 0..maps.len() {
            for op in OpKind::ALL {
                let r = f.dag.operate(f.parent, op, ids[i], ids[j]).unwrap();
                assert_eq!(f.pairs(r), flat_op(op, &flats[i], &flats[j]));
            }
            assert_eq!(f.dag.is_subset(f.parent, ids[i], ids[j]).unwrap(), flats[i].is_subset(&flats[j]));
        }
    }
    f.check_invariants();
}

fn random_map(rng: &mut ChaCha8Rng, keys: u8, pointees: u8) -> Map {
    let mut m = Map::new();
    for k in 0..keys {
        if rng.random_bool(0.6) {
            let s: BTreeSet<u8> = (0..pointees).filter(|_| rng.random_bool(0.35)).collect();
            if !s.is_empty() {
                m.insert(k, s);
            }
        }
    }
    m
}

#[test]
fn flattening_law_random_eight_by_eight() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut f = Fixture::new();
    for _ in 0..2000 {
        let (a, b) = (random_map(&mut rng, 8, 8), random_map(&mut rng, 8, 8));
        let (ia, ib) = (f.register(&a), f.register(&b));
        let (fa, fb) = (flat_pairs(&a), flat_pairs(&b));
        for op in OpKind::ALL {
            let r = f.dag.operate(f.parent, op, ia, ib).unwrap();
            assert_eq!(f.pairs(r), flat_op(op, &fa, &fb));
        }
    }
    f.check_invariants();
}

#[test]
fn identical_pointee_sets_share_one_child_index() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut f = Fixture::new();
    let mut produced = Vec::new();
    for _ in 0..300 {
        let (a, b) = (random_map(&mut rng, 5, 3), random_map(&mut rng, 5, 3));
        let (ia, ib) = (f.register(&a), f.register(&b));
        produced.push(f.dag.union(f.parent, ia, ib).unwrap());
    }
    let child = f.dag.flat(f.child).unwrap();
    let parent = f.dag.nested(f.parent).unwrap();
    let mut by_content: BTreeMap<Vec<u8>, SetIndex> = BTreeMap::new();
    for &p in &produced {
        for e in parent.resolve(p).unwrap() {
            let content = child.resolve(e.value()).unwrap().to_vec();
            let prev = by_content.entry(content).or_insert(e.value());
            assert_eq!(*prev, e.value());
        }
    }
}

#[test]
fn child_work_is_memoized_across_parent_misses() {
    let mut f = Fixture::new();
    let m = |pairs: &[(u8, &[u8])]| -> Map {
        pairs.iter().map(|(k, v)| (*k, v.iter().copied().collect())).collect()
    };
    let a = f.register(&m(&[(1, &[1, 2])]));
    let b = f.register(&m(&[(1, &[3])]));
    let c = f.register(&m(&[(1, &[3]), (2, &[4])]));
    f.dag.union(f.parent, a, b).unwrap();
    f.dag.union(f.parent, a, c).unwrap();
    let child = f.dag.flat(f.child).unwrap().metrics().get(OpKind::Union);
    assert_eq!((child.cold_misses, child.hits), (1, 1));
    let parent = f.dag.nested(f.parent).unwrap().metrics().get(OpKind::Union);
    assert_eq!(parent.cold_misses, 2);
}

#[test]
fn two_child_slots_operate_independently() {
    let mut dag: Dag<u8> = Dag::new();
    let left = dag.add_flat("left").unwrap();
    let right = dag.add_flat("right").unwrap();
    let parent = dag.add_nested("pairs", &[left, right]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    type Map2 = BTreeMap<u8, (BTreeSet<u8>, BTreeSet<u8>)>;
    let flat2 = |m: &Map2| -> BTreeSet<(u8, usize, u8)> {
        let mut out = BTreeSet::new();
        for (k, (l, r)) in m {
            out.extend(l.iter().map(|v| (*k, 0, *v)));
            out.extend(r.iter().map(|v| (*k, 1, *v)));
        }
        out
    };
    let make = |dag: &mut Dag<u8>, rng: &mut ChaCha8Rng| -> (Map2, SetIndex) {
        let mut m = Map2::new();
        let mut elems = Vec::new();
        for k in 0..4u8 {
            let l: BTreeSet<u8> = (0..4).filter(|_| rng.random_bool(0.4)).collect();
            let r: BTreeSet<u8> = (0..4).filter(|_| rng.random_bool(0.4)).collect();
            if l.is_empty() && r.is_empty() {
                continue;
            }
            let li = dag.flat_mut(left).unwrap().register(l.iter().copied().collect()).unwrap().0;
            let ri = dag.flat_mut(right).unwrap().register(r.iter().copied().collect()).unwrap().0;
            elems.push(NestedElement::new(k, [li, ri]));
            m.insert(k, (l, r));
        }
        let idx = dag.nested_mut(parent).unwrap().register(elems).unwrap().0;
        (m, idx)
    };
    for _ in 0..500 {
        let (a, ia) = make(&mut dag, &mut rng);
        let (b, ib) = make(&mut dag, &mut rng);
        let (fa, fb) = (flat2(&a), flat2(&b));
        for op in OpKind::ALL {
            let r = dag.operate(parent, op, ia, ib).unwrap();
            let want = match op {
                OpKind::Union => &fa | &fb,
                OpKind::Intersection => &fa & &fb,
                OpKind::Difference => &fa - &fb,
            };
            assert_eq!(dag.flatten_slots(parent, r).unwrap(), want);
        }
    }
}

#[test]
fn three_level_chain() {
    // maps of maps: outer key -> index of an inner map
    let mut dag: Dag<u8> = Dag::new();
    let leaf = dag.add_flat("leaf").unwrap();
    let mid = dag.add_nested("mid", &[leaf]).unwrap();
    let top = dag.add_nested("top", &[mid]).unwrap();
    let l1 = dag.flat_mut(leaf).unwrap().register(vec![1, 2]).unwrap().0;
    let l2 = dag.flat_mut(leaf).unwrap().register(vec![2, 3]).unwrap().0;
    let m1 = dag.nested_mut(mid).unwrap().register(vec![NestedElement::single(0, l1)]).unwrap().0;
    let m2 = dag.nested_mut(mid).unwrap().register(vec![NestedElement::single(0, l2)]).unwrap().0;
    let t1 = dag.nested_mut(top).unwrap().register(vec![NestedElement::single(9, m1)]).unwrap().0;
    let t2 = dag.nested_mut(top).unwrap().register(vec![NestedElement::single(9, m2)]).unwrap().0;
    let t = dag.union(top, t1, t2).unwrap();
    let inner = dag.nested(top).unwrap().resolve(t).unwrap()[0].value();
    assert_eq!(dag.flatten(mid, inner).unwrap(), vec![(0, 1), (0, 2), (0, 3)]);
    let i = dag.intersection(top, t1, t2).unwrap();
    let inner = dag.nested(top).unwrap().resolve(i).unwrap()[0].value();
    assert_eq!(dag.flatten(mid, inner).unwrap(), vec![(0, 2)]);
}
