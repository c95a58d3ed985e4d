use proptest::prelude::*;
use qbell::bell::{
    box_of_correlators, correlators_of, deterministic_box, enumerate_local_deterministic, mix,
    pr_box, SignalingViolation, DEFAULT_DETERMINISTIC_CAP,
};
use qbell::scalar::{parse_rational, ratio};
use qbell::{BellBox, BellScenario, CorrelatorTable, Error, Rational, Relabeling, Scalar};

fn r(n: i64, d: i64) -> Rational {
    ratio(n, d)
}

#[test]
fn scenario_rejects_small_counts() {
    assert!(BellScenario::new(1, 2, 2, 2).is_err());
    assert!(BellScenario::new(2, 2, 2, 1).is_err());
    assert!(BellScenario::new(2, 3, 4, 2).is_ok());
}

#[test]
fn flat_index_is_bijective() {
    for sc in [
        BellScenario::new(2, 2, 2, 2).unwrap(),
        BellScenario::new(2, 3, 3, 2).unwrap(),
        BellScenario::new(3, 2, 2, 4).unwrap(),
    ] {
        let mut seen = vec![false; sc.num_events()];
        for x in 0..sc.ma {
            for y in 0..sc.mb {
                for a in 0..sc.ka {
                    for b in 0..sc.kb {
                        let f = sc.flat(x, y, a, b);
                        assert!(!seen[f]);
                        seen[f] = true;
                        let e = sc.event(f);
                        assert_eq!((e.x, e.y, e.a, e.b, e.flat), (x, y, a, b, f));
                    }
                }
            }
        }
        assert!(seen.iter().all(|&s| s));
    }
}

#[test]
fn pr2_is_no_signaling() {
    let pr = pr_box::<Rational>(2).unwrap();
    assert!(pr.is_normalized(0.0));
    assert!(pr.validate_no_signaling(0.0).no_signaling);
}

#[test]
fn one_sided_box_signals() {
    // Bob's marginal at y = 0 depends on x.
    let sc = BellScenario::cglmp(2).unwrap();
    let mut probs = vec![Rational::from_ratio(0, 1); 16];
    probs[sc.flat(0, 0, 0, 0)] = r(1, 1);
    probs[sc.flat(1, 0, 0, 1)] = r(1, 1);
    probs[sc.flat(0, 1, 0, 0)] = r(1, 1);
    probs[sc.flat(1, 1, 0, 0)] = r(1, 1);
    let bx = BellBox::new(sc, probs).unwrap();
    assert!(bx.is_normalized(0.0));
    let rep = bx.validate_no_signaling(0.0);
    assert!(!rep.no_signaling);
    assert!(rep
        .violations
        .contains(&SignalingViolation::Bob { b: 0, x1: 0, x2: 1, y: 0 }));
    assert!(rep
        .violations
        .iter()
        .all(|v| matches!(v, SignalingViolation::Bob { y: 0, .. })));
}

#[test]
fn uniform_box_is_no_signaling() {
    for sc in [BellScenario::cglmp(2).unwrap(), BellScenario::new(2, 3, 3, 2).unwrap()] {
        let u = BellBox::<Rational>::uniform(sc).unwrap();
        assert!(u.is_normalized(0.0));
        assert!(u.is_no_signaling(0.0));
    }
}

#[test]
fn wrong_length_is_a_dimension_error() {
    let sc = BellScenario::cglmp(2).unwrap();
    let err = BellBox::new(sc, vec![0.0f64; 15]).unwrap_err();
    assert!(matches!(err, Error::DimensionMismatch { expected: 16, got: 15 }));
}

#[test]
fn deterministic_counts() {
    // (parties, inputs, outputs) = (2,2,2), (2,2,3), (2,3,2).
    for ((ma, mb, ka, kb), n) in [((2, 2, 2, 2), 16), ((2, 2, 3, 3), 81), ((3, 3, 2, 2), 64)] {
        let sc = BellScenario::new(ma, mb, ka, kb).unwrap();
        let boxes = enumerate_local_deterministic::<Rational>(sc, DEFAULT_DETERMINISTIC_CAP).unwrap();
        assert_eq!(boxes.len(), n);
        for bx in &boxes {
            assert!(bx.probs.iter().all(|p| *p == r(0, 1) || *p == r(1, 1)));
            assert!(bx.is_normalized(0.0));
            assert!(bx.is_no_signaling(0.0));
        }
    }
}

#[test]
fn deterministic_cap_is_enforced() {
    let sc = BellScenario::new(2, 2, 3, 3).unwrap();
    let err = enumerate_local_deterministic::<f64>(sc, 80).unwrap_err();
    assert!(matches!(err, Error::CapExceeded { needed: 81, cap: 80 }));
}

#[test]
fn pr_box_supports() {
    let pr2 = pr_box::<Rational>(2).unwrap();
    let sc = pr2.scenario;
    let mut nonzero = 0;
    for e in sc.events() {
        let p = &pr2.probs[e.flat];
        if (e.a ^ e.b) == e.x * e.y {
            assert_eq!(*p, r(1, 2));
            nonzero += 1;
        } else {
            assert_eq!(*p, r(0, 1));
        }
    }
    assert_eq!(nonzero, 8);

    let pr3 = pr_box::<Rational>(3).unwrap();
    let support: Vec<_> = pr3.probs.iter().filter(|p| **p != r(0, 1)).collect();
    assert_eq!(support.len(), 12);
    assert!(support.iter().all(|p| **p == r(1, 3)));
    assert!(pr3.is_no_signaling(0.0));
    assert!(pr3.is_normalized(0.0));

    assert!(pr_box::<f64>(1).is_err());
}

fn swap_alice_inputs() -> Relabeling {
    Relabeling {
        alice_inputs: vec![1, 0],
        bob_inputs: vec![0, 1],
        alice_outputs: vec![vec![0, 1]; 2],
        bob_outputs: vec![vec![0, 1]; 2],
    }
}

#[test]
fn relabeling_examples() {
    let pr = pr_box::<Rational>(2).unwrap();
    let id = Relabeling::identity(&pr.scenario);
    assert_eq!(pr.apply_relabeling(&id).unwrap(), pr);

    let sw = swap_alice_inputs();
    let once = pr.apply_relabeling(&sw).unwrap();
    assert_ne!(once, pr);
    assert_eq!(once.apply_relabeling(&sw).unwrap(), pr);

    let flip = Relabeling {
        alice_inputs: vec![0, 1],
        bob_inputs: vec![0, 1],
        alice_outputs: vec![vec![1, 0], vec![0, 1]],
        bob_outputs: vec![vec![0, 1]; 2],
    };
    let flipped = pr.apply_relabeling(&flip).unwrap();
    assert_ne!(flipped, pr);
    assert!(flipped.is_no_signaling(0.0));
    assert!(flipped.is_normalized(0.0));

    let bad = Relabeling { alice_inputs: vec![0, 0], ..flip };
    assert!(pr.apply_relabeling(&bad).is_err());
}

#[test]
fn mix_examples() {
    let pr = pr_box::<Rational>(2).unwrap();
    assert_eq!(mix(&[pr.clone()], &[r(1, 1)], 0.0).unwrap(), pr);

    let u = BellBox::<Rational>::uniform(pr.scenario).unwrap();
    let m = mix(&[pr.clone(), u.clone()], &[r(1, 2), r(1, 2)], 0.0).unwrap();
    for e in m.scenario.events() {
        let want = if (e.a ^ e.b) == e.x * e.y { r(3, 8) } else { r(1, 8) };
        assert_eq!(m.probs[e.flat], want);
    }
    assert!(m.is_no_signaling(0.0));

    let err = mix(&[pr, u], &[r(3, 5), r(1, 2)], 0.0).unwrap_err();
    assert!(matches!(err, Error::InvalidWeights(_)));

    let prf = pr_box::<f64>(2).unwrap();
    assert!(mix(&[prf.clone(), prf], &[0.6, 0.5], 1e-12).is_err());
}

#[test]
fn correlator_examples() {
    let pr = pr_box::<Rational>(2).unwrap();
    let e = correlators_of(&pr).unwrap();
    assert_eq!(e.e, vec![vec![r(1, 1), r(1, 1)], vec![r(1, 1), r(-1, 1)]]);

    let zero = CorrelatorTable::new(vec![vec![r(0, 1); 2]; 2], 0.0).unwrap();
    let u = box_of_correlators(&zero).unwrap();
    assert_eq!(u, BellBox::uniform(u.scenario).unwrap());

    let s = std::f64::consts::FRAC_1_SQRT_2;
    let t = CorrelatorTable::new(vec![vec![s, s], vec![s, -s]], 1e-12).unwrap();
    let bx = box_of_correlators(&t).unwrap();
    let hi = (1.0 + s) / 4.0;
    let lo = (1.0 - s) / 4.0;
    assert!(bx
        .probs
        .iter()
        .all(|p| (p - hi).abs() < 1e-15 || (p - lo).abs() < 1e-15));
    assert!(bx.is_no_signaling(1e-12));
    let back = correlators_of(&bx).unwrap();
    for (row, orig) in back.e.iter().zip(&t.e) {
        for (a, b) in row.iter().zip(orig) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    assert!(CorrelatorTable::new(vec![vec![r(3, 2), r(0, 1)], vec![r(0, 1); 2]], 0.0).is_err());
    assert!(correlators_of(&pr_box::<Rational>(3).unwrap()).is_err());
}

#[test]
fn deterministic_correlators_are_signs() {
    let sc = BellScenario::new(2, 3, 2, 2).unwrap();
    for bx in enumerate_local_deterministic::<Rational>(sc, DEFAULT_DETERMINISTIC_CAP).unwrap() {
        let e = correlators_of(&bx).unwrap();
        assert!(e.e.iter().flatten().all(|v| *v == r(1, 1) || *v == r(-1, 1)));
    }
}

#[test]
fn json_examples() {
    let pr = pr_box::<Rational>(2).unwrap();
    let back = BellBox::<Rational>::from_json_str(&pr.to_json_string()).unwrap();
    assert_eq!(back, pr);

    let mut doc = pr.to_json();
    doc["probs"][0] = "1/3".into();
    doc["probs"][1] = "1/6".into();
    let parsed = BellBox::<Rational>::from_json(&doc).unwrap();
    assert_eq!(parsed.probs[0], r(1, 3));
    assert_eq!(parsed.probs[1], r(1, 6));
    assert_eq!(parse_rational("2/6").unwrap(), r(1, 3));

    let mut short = pr.to_json();
    short["probs"].as_array_mut().unwrap().pop();
    assert!(BellBox::<Rational>::from_json(&short).is_err());

    let mut neg = pr.to_json();
    neg["probs"][0] = "-1/2".into();
    assert!(BellBox::<Rational>::from_json(&neg).is_err());

    let mut bad_sc = pr.to_json();
    bad_sc["scenario"]["ka"] = 1.into();
    assert!(BellBox::<Rational>::from_json(&bad_sc).is_err());

    assert!(BellBox::<Rational>::from_json_str("{not json").is_err());
}

#[test]
fn float_json_round_trip_is_exact() {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let t = CorrelatorTable::new(vec![vec![s, s / 3.0], vec![0.1, -s]], 1e-12).unwrap();
    let bx = box_of_correlators(&t).unwrap();
    let back = BellBox::<f64>::from_json_str(&bx.to_json_string()).unwrap();
    assert_eq!(back, bx);
}

fn arb_relabeling(k: usize) -> impl Strategy<Value = Relabeling> {
    let perm = move |n: usize| Just((0..n).collect::<Vec<usize>>()).prop_shuffle();
    (
        perm(2),
        perm(2),
        proptest::collection::vec(perm(k), 2),
        proptest::collection::vec(perm(k), 2),
    )
        .prop_map(|(alice_inputs, bob_inputs, alice_outputs, bob_outputs)| Relabeling {
            alice_inputs,
            bob_inputs,
            alice_outputs,
            bob_outputs,
        })
}

/// Random rational mixture of the deterministic boxes of `(2,2,k)`.
fn arb_local_box(k: usize) -> impl Strategy<Value = BellBox<Rational>> {
    let sc = BellScenario::cglmp(k).unwrap();
    let n = sc.num_deterministic() as usize;
    proptest::collection::vec((0..n, 1i64..20), 1..5).prop_map(move |picks| {
        let all = enumerate_local_deterministic::<Rational>(sc, DEFAULT_DETERMINISTIC_CAP).unwrap();
        let total: i64 = picks.iter().map(|p| p.1).sum();
        let boxes: Vec<_> = picks.iter().map(|p| all[p.0].clone()).collect();
        let w: Vec<_> = picks.iter().map(|p| r(p.1, total)).collect();
        mix(&boxes, &w, 0.0).unwrap()
    })
}

proptest! {
    #[test]
    fn relabeling_is_a_group_action(
        (p, r1, r2) in (2usize..4).prop_flat_map(|k| (arb_local_box(k), arb_relabeling(k), arb_relabeling(k)))
    ) {
        let two_steps = p.apply_relabeling(&r1).unwrap().apply_relabeling(&r2).unwrap();
        let composed = p.apply_relabeling(&r1.then(&r2)).unwrap();
        prop_assert_eq!(&two_steps, &composed);
        prop_assert_eq!(&p.apply_relabeling(&r1).unwrap().apply_relabeling(&r1.inverse()).unwrap(), &p);
        prop_assert!(two_steps.is_no_signaling(0.0));
        prop_assert!(two_steps.is_normalized(0.0));
    }

    #[test]
    fn relabeled_pr_stays_a_no_signaling_box(
        (k, rel) in (2usize..5).prop_flat_map(|k| (Just(k), arb_relabeling(k)))
    ) {
        let q = pr_box::<Rational>(k).unwrap().apply_relabeling(&rel).unwrap();
        prop_assert!(q.is_no_signaling(0.0));
        prop_assert!(q.is_normalized(0.0));
    }

    #[test]
    fn correlators_are_linear(p in arb_local_box(2), q in arb_local_box(2), n in 0i64..=10) {
        let w = [r(n, 10), r(10 - n, 10)];
        let m = mix(&[p.clone(), q.clone()], &w, 0.0).unwrap();
        let em = correlators_of(&m).unwrap();
        let ep = correlators_of(&p).unwrap();
        let eq = correlators_of(&q).unwrap();
        for x in 0..2 {
            for y in 0..2 {
                let lin = w[0].clone() * ep.e[x][y].clone() + w[1].clone() * eq.e[x][y].clone();
                prop_assert_eq!(&em.e[x][y], &lin);
            }
        }
    }

    #[test]
    fn rational_json_round_trip(p in arb_local_box(3)) {
        let back = BellBox::<Rational>::from_json_str(&p.to_json_string()).unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn correlator_lift_round_trips(e in proptest::collection::vec(-100i64..=100, 6)) {
        let t = CorrelatorTable::new(
            vec![e[..3].iter().map(|&v| r(v, 100)).collect(), e[3..].iter().map(|&v| r(v, 100)).collect()],
            0.0,
        ).unwrap();
        let bx = box_of_correlators(&t).unwrap();
        prop_assert!(bx.is_normalized(0.0));
        prop_assert!(bx.is_no_signaling(0.0));
        prop_assert_eq!(correlators_of(&bx).unwrap(), t);
    }
}

#[test]
fn deterministic_box_rejects_wrong_table() {
    let sc = BellScenario::cglmp(2).unwrap();
    assert!(deterministic_box::<f64>(sc, &[0], &[0, 1]).is_err());
}
