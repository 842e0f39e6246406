//! Multiplier encoding, decoding and bit-test behaviour on small moduli.

mod common;

use num_bigint::BigUint;
use sai_core::cnf::Assignment;
use sai_core::factor::{
    decode, encode, functional_comparison_test, ground_truth_assignment, matrix_cluster_test,
    right_bit_fraction, vote, FactorInstance, Group, TestSet,
};
use sai_core::functional::RelaxedPoint;
use sai_core::oracle::enumerate_models;
use sai_core::solver::SolverConfig;
use std::collections::BTreeSet;

fn big(v: u64) -> BigUint {
    BigUint::from(v)
}

#[test]
fn models_of_fifteen_decode_to_three_times_five() {
    let inst = encode(&big(15)).unwrap();
    let models = enumerate_models(&inst.cnf, 64);
    assert!(!models.is_empty());
    let pairs: BTreeSet<(BigUint, BigUint)> = models.iter().map(|m| decode(m, &inst).unwrap()).collect();
    assert_eq!(pairs, BTreeSet::from([(big(3), big(5))]));
}

#[test]
fn key_bits_read_least_significant_first() {
    let inst = FactorInstance::from_factors(&big(3), &big(5)).unwrap();
    assert_eq!((inst.p_width(), inst.q_width()), (2, 3));
    let a = ground_truth_assignment(&inst).unwrap();
    let p: Vec<bool> = inst.varmap.p_bits.iter().map(|&v| a.value(v)).collect();
    let q: Vec<bool> = inst.varmap.q_bits.iter().map(|&v| a.value(v)).collect();
    assert_eq!(p, [true, true]);
    assert_eq!(q, [true, false, true]);
    assert_eq!(decode(&a, &inst).unwrap(), (big(3), big(5)));
}

#[test]
fn decoded_products_match_modulus_for_small_semiprimes() {
    let primes: Vec<u64> = (3..60).filter(|&v| common::is_prime(v)).collect();
    for (p, q) in primes.iter().flat_map(|&p| primes.iter().filter(move |&&q| q >= p).map(move |&q| (p, q))) {
        let inst = FactorInstance::from_factors(&big(p), &big(q)).unwrap();
        let a = ground_truth_assignment(&inst).unwrap();
        assert!(inst.cnf.is_satisfied_by(&a), "{p} x {q}");
        let (dp, dq) = decode(&a, &inst).unwrap();
        assert_eq!(dp * dq, big(p * q));
    }
}

#[test]
fn non_model_does_not_decode() {
    let inst = encode(&big(15)).unwrap();
    let a = Assignment::all_false(inst.cnf.num_vars());
    assert!(decode(&a, &inst).is_err());
}

#[test]
fn truth_point_scores_one_and_its_complement_follows_orientation_rule() {
    let inst = FactorInstance::from_factors(&big(11), &big(13)).unwrap();
    let truth = ground_truth_assignment(&inst).unwrap();
    let x = RelaxedPoint::from_assignment(&truth);
    assert_eq!(right_bit_fraction(&x, &inst).unwrap(), 1.0);

    let flipped: Vec<bool> = truth.bits().iter().map(|b| !b).collect();
    let y = RelaxedPoint::from_assignment(&Assignment::new(flipped.clone()));
    // independent count: complement agrees with an orientation exactly where
    // the two orientations disagree with each other
    let bits = |v: u64, w: usize| (0..w).map(|k| v >> k & 1 == 1).collect::<Vec<_>>();
    let (pw, qw) = (inst.p_width(), inst.q_width());
    let key: Vec<bool> = inst
        .varmap
        .p_bits
        .iter()
        .chain(&inst.varmap.q_bits)
        .map(|&v| flipped[v as usize - 1])
        .collect();
    let score = |p: u64, q: u64| {
        let want: Vec<bool> = bits(p, pw).into_iter().chain(bits(q, qw)).collect();
        key.iter().zip(&want).filter(|(a, b)| a == b).count() as f64 / key.len() as f64
    };
    let expected = score(11, 13).max(score(13, 11));
    assert_eq!(right_bit_fraction(&y, &inst).unwrap(), expected);
}

#[test]
fn matrix_test_recovers_truth_at_the_model() {
    let inst = FactorInstance::from_factors(&big(11), &big(13)).unwrap();
    let x = RelaxedPoint::from_assignment(&ground_truth_assignment(&inst).unwrap());
    let votes = matrix_cluster_test(&x, &inst);
    assert!(!votes.is_empty());
    let (p, q) = (11u64, 13u64);
    for v in votes {
        let want = match v.group {
            Group::P => p >> v.position & 1 == 1,
            Group::Q => q >> v.position & 1 == 1,
        };
        assert_eq!(v.predicted, want, "{:?}{}", v.group, v.position);
    }
}

#[test]
fn matrix_test_abstains_at_the_centre() {
    let inst = encode(&big(143)).unwrap();
    let x = RelaxedPoint::constant(inst.cnf.num_vars(), 0.5);
    assert!(matrix_cluster_test(&x, &inst).is_empty());
}

#[test]
fn zero_settle_sweeps_is_a_pure_evaluation() {
    let inst = FactorInstance::from_factors(&big(11), &big(13)).unwrap();
    let x = RelaxedPoint::constant(inst.cnf.num_vars(), 0.5);
    let var = inst.varmap.q_bits[0];
    let cmp = functional_comparison_test(&inst, &x, var, 0, &SolverConfig::default()).unwrap();
    let raw = common::raw_clauses(&inst.cnf);
    for (value, f) in [(0.0, cmp.f0), (1.0, cmp.f1)] {
        if f.is_infinite() {
            continue;
        }
        let mut v = x.values().to_vec();
        v[var as usize - 1] = value;
        // conditioning drops satisfied clauses and the fixed literal, which
        // leaves every remaining term unchanged
        let direct = common::functional_raw(&raw, &v);
        assert!((f - direct).abs() < 1e-9, "{f} vs {direct}");
    }
}

#[test]
fn functional_test_rejects_non_key_variables() {
    let inst = encode(&big(143)).unwrap();
    let x = RelaxedPoint::constant(inst.cnf.num_vars(), 0.5);
    let var = inst.varmap.product[0];
    assert!(functional_comparison_test(&inst, &x, var, 0, &SolverConfig::default()).is_err());
}

#[test]
fn single_run_confidences_are_zero_or_one() {
    let inst = FactorInstance::from_factors(&big(211), &big(241)).unwrap();
    let config = SolverConfig { max_sweeps: 200, ..SolverConfig::default() };
    let report = vote(&inst, 1, &config, TestSet::BOTH).unwrap();
    assert_eq!(report.votes.len(), inst.key_bit_count());
    for v in &report.votes {
        assert!(v.votes_total <= 1);
        assert!(v.confidence == 0.0 || v.confidence == 1.0);
    }
}

#[test]
fn confident_votes_beat_guessing_on_a_sixteen_bit_semiprime() {
    let inst = FactorInstance::from_factors(&big(211), &big(241)).unwrap();
    let config = SolverConfig { max_sweeps: 300, seed: 7, ..SolverConfig::default() };
    let report = vote(&inst, 30, &config, TestSet::BOTH).unwrap();
    for v in &report.votes {
        assert!(v.votes_total <= 30);
    }
    let confident: Vec<_> = report.votes.iter().filter(|v| v.votes_total > 0 && v.confidence >= 0.8).collect();
    assert!(!confident.is_empty());
    let right = |p: u64, q: u64| {
        confident
            .iter()
            .filter(|v| {
                let val = match v.group {
                    Group::P => p >> v.position & 1 == 1,
                    Group::Q => q >> v.position & 1 == 1,
                };
                val == v.predicted
            })
            .count()
    };
    let best = right(211, 241).max(right(241, 211));
    let acc = best as f64 / confident.len() as f64;
    assert!(acc > 0.5, "confident accuracy {acc} over {} bits", confident.len());
}
