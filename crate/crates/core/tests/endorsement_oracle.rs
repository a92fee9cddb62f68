use std::collections::BTreeSet;

use fedgbp_core::ledger::EndorsementPolicyExpr;
use fedgbp_core::OrgId;
use proptest::prelude::*;

const N: usize = 5;

fn org(i: usize) -> OrgId {
    OrgId::new(&format!("org{i}")).unwrap()
}

/// The satisfying endorser sets of an expression over `N` organizations, as a
/// bitmap indexed by subset mask. Built by set algebra, not by evaluating.
fn satisfying_sets(e: &EndorsementPolicyExpr, index: &dyn Fn(&OrgId) -> usize) -> u32 {
    let supersets_of = |members: u32| -> u32 {
        (0..1u32 << N).filter(|s| s & members == members).fold(0, |acc, s| acc | 1 << s)
    };
    let threshold = |k: usize, orgs: &[OrgId]| -> u32 {
        let bits: Vec<u32> = orgs.iter().map(|o| 1 << index(o)).collect();
        // Union over every k-combination of the listed orgs.
        let mut out = 0;
        for pick in 0..1u32 << bits.len() {
            if pick.count_ones() as usize == k {
                let members = bits.iter().enumerate().filter(|(i, _)| pick >> i & 1 == 1).fold(0, |a, (_, b)| a | b);
                out |= supersets_of(members);
            }
        }
        out
    };
    match e {
        EndorsementPolicyExpr::Org(o) => supersets_of(1 << index(o)),
        EndorsementPolicyExpr::And(xs) => xs.iter().fold(u32::MAX, |a, x| a & satisfying_sets(x, index)),
        EndorsementPolicyExpr::Or(xs) => xs.iter().fold(0, |a, x| a | satisfying_sets(x, index)),
        EndorsementPolicyExpr::KOfN { k, orgs } => threshold(*k, orgs),
        EndorsementPolicyExpr::TwoFPlusOne { f, orgs } => threshold(2 * f + 1, orgs),
    }
}

fn distinct_orgs(n: usize) -> impl Strategy<Value = Vec<OrgId>> {
    proptest::sample::subsequence((0..N).collect::<Vec<_>>(), 1..=n)
        .prop_shuffle()
        .prop_map(|xs| xs.into_iter().map(org).collect())
}

fn leaf() -> impl Strategy<Value = EndorsementPolicyExpr> {
    prop_oneof![
        (0..N).prop_map(|i| EndorsementPolicyExpr::Org(org(i))),
        distinct_orgs(N).prop_flat_map(|orgs| {
            let n = orgs.len();
            (1..=n).prop_map(move |k| EndorsementPolicyExpr::KOfN { k, orgs: orgs.clone() })
        }),
        distinct_orgs(N).prop_flat_map(|orgs| {
            let max_f = (orgs.len() - 1) / 3;
            (0..=max_f).prop_map(move |f| EndorsementPolicyExpr::TwoFPlusOne { f, orgs: orgs.clone() })
        }),
    ]
}

fn expr() -> impl Strategy<Value = EndorsementPolicyExpr> {
    // Two levels of AND/OR above the leaves: depth at most three.
    leaf().prop_recursive(2, 24, 4, |inner| {
        prop_oneof![
            proptest::collection::vec(inner.clone(), 1..4).prop_map(EndorsementPolicyExpr::And),
            proptest::collection::vec(inner, 1..4).prop_map(EndorsementPolicyExpr::Or),
        ]
    })
}

fn index_of(o: &OrgId) -> usize {
    o.as_str()[3..].parse().unwrap()
}

fn check_against_oracle(e: &EndorsementPolicyExpr) {
    assert!(e.depth() <= 3, "{e}");
    e.validate().unwrap();
    let oracle = satisfying_sets(e, &index_of);
    for mask in 0..1u32 << N {
        let set: BTreeSet<OrgId> = (0..N).filter(|i| mask >> i & 1 == 1).map(org).collect();
        assert_eq!(e.is_satisfied(&set), oracle >> mask & 1 == 1, "{e} with {set:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 4000, ..ProptestConfig::default() })]

    #[test]
    fn evaluator_matches_subset_enumeration(e in expr()) {
        check_against_oracle(&e);
    }

    #[test]
    fn text_form_round_trips(e in expr()) {
        let text = e.to_string();
        prop_assert_eq!(EndorsementPolicyExpr::parse(&text).unwrap(), e);
    }
}

#[test]
fn every_single_threshold_over_five_orgs() {
    let orgs: Vec<OrgId> = (0..N).map(org).collect();
    for k in 1..=N {
        check_against_oracle(&EndorsementPolicyExpr::k_of_n(k, orgs.clone()).unwrap());
    }
    check_against_oracle(&EndorsementPolicyExpr::majority(orgs.clone()).unwrap());
    check_against_oracle(&EndorsementPolicyExpr::two_f_plus_one(1, orgs.clone()).unwrap());
    check_against_oracle(&EndorsementPolicyExpr::all_of(orgs).unwrap());
}

#[test]
fn invalid_thresholds_are_rejected() {
    let orgs: Vec<OrgId> = (0..4).map(org).collect();
    assert!(EndorsementPolicyExpr::k_of_n(0, orgs.clone()).is_err());
    assert!(EndorsementPolicyExpr::k_of_n(5, orgs.clone()).is_err());
    assert!(EndorsementPolicyExpr::two_f_plus_one(1, orgs[..3].to_vec()).is_err());
    assert!(EndorsementPolicyExpr::two_f_plus_one(1, orgs).is_ok());
}
