//! Linear merge kernels over sorted element slices.
//!
//! Every kernel counts one step per input element it consumes, so a run over
//! `a` and `b` never exceeds `a.len() + b.len()` steps.

use std::cmp::Ordering;

use crate::error::MdeError;
use crate::index::OpKind;
use crate::shape::{ChildOps, Shape};

pub(crate) fn run<S: Shape, C: ChildOps + ?Sized>(
    op: OpKind,
    a: &[S::Elem],
    b: &[S::Elem],
    children: &mut C,
    steps: &mut u64,
) -> Result<Vec<S::Elem>, MdeError> {
    match op {
        OpKind::Union => union::<S, C>(a, b, children, steps),
        OpKind::Intersection => intersection::<S, C>(a, b, children, steps),
        OpKind::Difference => difference::<S, C>(a, b, children, steps),
    }
}

/// Sorted merge. Elements whose keys appear on one side only are copied
/// whole; equal keys are merged through [`Shape::combine`].
pub(crate) fn union<S: Shape, C: ChildOps + ?Sized>(
    first: &[S::Elem],
    second: &[S::Elem],
    children: &mut C,
    steps: &mut u64,
) -> Result<Vec<S::Elem>, MdeError> {
    let mut out = Vec::with_capacity(first.len().max(second.len()));
    let mut i = 0;
    let mut j = 0;
    while i < first.len() {
        if j == second.len() {
            out.extend_from_slice(&first[i..]);
            *steps += (first.len() - i) as u64;
            i = first.len();
            break;
        }
        let (x, y) = (&first[i], &second[j]);
        if S::key(y) < S::key(x) {
            out.push(y.clone());
            j += 1;
            *steps += 1;
        } else {
            if S::key(x) < S::key(y) {
                out.push(x.clone());
            } else {
                if let Some(merged) = S::combine(OpKind::Union, x, y, children)? {
                    out.push(merged);
                }
                j += 1;
                *steps += 1;
            }
            i += 1;
            *steps += 1;
        }
    }
    debug_assert_eq!(i, first.len());
    out.extend_from_slice(&second[j..]);
    *steps += (second.len() - j) as u64;
    Ok(out)
}

pub(crate) fn intersection<S: Shape, C: ChildOps + ?Sized>(
    first: &[S::Elem],
    second: &[S::Elem],
    children: &mut C,
    steps: &mut u64,
) -> Result<Vec<S::Elem>, MdeError> {
    let mut out = Vec::with_capacity(first.len().min(second.len()));
    let (mut i, mut j) = (0, 0);
    while i < first.len() && j < second.len() {
        let (x, y) = (&first[i], &second[j]);
        match S::key(x).cmp(S::key(y)) {
            Ordering::Less => {
                i += 1;
                *steps += 1;
            }
            Ordering::Greater => {
                j += 1;
                *steps += 1;
            }
            Ordering::Equal => {
                if let Some(merged) = S::combine(OpKind::Intersection, x, y, children)? {
                    out.push(merged);
                }
                i += 1;
                j += 1;
                *steps += 2;
            }
        }
    }
    Ok(out)
}

pub(crate) fn difference<S: Shape, C: ChildOps + ?Sized>(
    first: &[S::Elem],
    second: &[S::Elem],
    children: &mut C,
    steps: &mut u64,
) -> Result<Vec<S::Elem>, MdeError> {
    let mut out = Vec::with_capacity(first.len());
    let (mut i, mut j) = (0, 0);
    while i < first.len() {
        if j == second.len() {
            out.extend_from_slice(&first[i..]);
            *steps += (first.len() - i) as u64;
            break;
        }
        let (x, y) = (&first[i], &second[j]);
        match S::key(x).cmp(S::key(y)) {
            Ordering::Less => {
                out.push(x.clone());
                i += 1;
                *steps += 1;
            }
            Ordering::Greater => {
                j += 1;
                *steps += 1;
            }
            Ordering::Equal => {
                if let Some(merged) = S::combine(OpKind::Difference, x, y, children)? {
                    out.push(merged);
                }
                i += 1;
                j += 1;
                *steps += 2;
            }
        }
    }
    Ok(out)
}

/// Decides `a ⊆ b` and `b ⊆ a` in one pass. Stops early once both are false.
pub(crate) fn subset_both<S: Shape, C: ChildOps + ?Sized>(
    a: &[S::Elem],
    b: &[S::Elem],
    children: &mut C,
    steps: &mut u64,
) -> Result<(bool, bool), MdeError> {
    let (mut a_in_b, mut b_in_a) = (true, true);
    let (mut i, mut j) = (0, 0);
    while (a_in_b || b_in_a) && (i < a.len() || j < b.len()) {
        if i == a.len() {
            b_in_a = false;
            break;
        }
        if j == b.len() {
            a_in_b = false;
            break;
        }
        let (x, y) = (&a[i], &b[j]);
        match S::key(x).cmp(S::key(y)) {
            Ordering::Less => {
                a_in_b = false;
                i += 1;
                *steps += 1;
            }
            Ordering::Greater => {
                b_in_a = false;
                j += 1;
                *steps += 1;
            }
            Ordering::Equal => {
                if a_in_b && !S::covered(x, y, children)? {
                    a_in_b = false;
                }
                if b_in_a && !S::covered(y, x, children)? {
                    b_in_a = false;
                }
                i += 1;
                j += 1;
                *steps += 2;
            }
        }
    }
    Ok((a_in_b, b_in_a))
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use proptest::prelude::*;

    use super::*;
    use crate::shape::{Flat, NoChildren};

    type F = Flat<u8>;

    fn sorted(v: BTreeSet<u8>) -> Vec<u8> {
        v.into_iter().collect()
    }

    proptest! {
        #[test]
        fn kernels_match_btreeset(a in prop::collection::btree_set(0u8..40, 0..20),
                                  b in prop::collection::btree_set(0u8..40, 0..20)) {
            let (va, vb) = (sorted(a.clone()), sorted(b.clone()));
            let bound = (va.len() + vb.len()) as u64;
            for op in OpKind::ALL {
                let mut steps = 0;
                let got = run::<F, _>(op, &va, &vb, &mut NoChildren, &mut steps).unwrap();
                let want: Vec<u8> = match op {
                    OpKind::Union => a.union(&b).copied().collect(),
                    OpKind::Intersection => a.intersection(&b).copied().collect(),
                    OpKind::Difference => a.difference(&b).copied().collect(),
                };
                prop_assert_eq!(&got, &want);
                prop_assert!(got.windows(2).all(|w| w[0] < w[1]));
                prop_assert!(steps <= bound);
            }
            let mut steps = 0;
            let (ab, ba) = subset_both::<F, _>(&va, &vb, &mut NoChildren, &mut steps).unwrap();
            prop_assert_eq!(ab, a.is_subset(&b));
            prop_assert_eq!(ba, b.is_subset(&a));
            prop_assert!(steps <= bound);
        }
    }

    #[test]
    fn union_steps_are_exactly_linear() {
        let mut steps = 0;
        let out = union::<F, _>(&[1, 2, 3], &[1, 2, 4], &mut NoChildren, &mut steps).unwrap();
        assert_eq!(out, vec![1, 2, 3, 4]);
        assert_eq!(steps, 6);
    }
}
