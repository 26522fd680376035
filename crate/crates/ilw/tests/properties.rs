//! Seeded property checks for the invariants each module promises,
//! excluding the ones the acceptance gate already pins (bound soundness,
//! Fubini, the LP dichotomy, and the oracle equivalences).

mod common;

use std::collections::{BTreeMap, BTreeSet};

use ilw::cancel::CancelToken;
use ilw::invariance::paradox::{paradox_verify, ParadoxCertificate, PartialAction, Piece};
use ilw::invariance::{
    build_invariance_theory, family_structure, invariant_measures, FeasibilityResult,
};
use ilw::logic::{parse_formula, print_formula, universal_bound, Formula};
use ilw::nip::{dk_measure, l1_distance, quotient_types, L1Class};
use ilw::rational::{fmt_q, q, q0, q1, Q};
use ilw::stability::{ladder_index, type_metric, PhiMatrix, TypeVector};
use ilw::topometric::{cb_rank, cb_sequence, validate_topometric, CbRank, FiniteTopoSpace};

use num_traits::Signed;
use rand::Rng;

// ---- logic ----

#[test]
fn universal_bound_is_nonnegative_and_print_stable() {
    let mut rng = common::rng(1);
    for _ in 0..300 {
        let sig = common::random_signature(&mut rng);
        let pool = vec!["x".to_string(), "y".to_string()];
        let mut binder = 0;
        let f = common::random_formula(&mut rng, &sig, &pool, 3, &mut binder);
        let bound = universal_bound(&f);
        assert!(bound >= q0());
        let reparsed = parse_formula(&print_formula(&f), &sig).unwrap();
        assert_eq!(universal_bound(&reparsed), bound);
    }
}

#[test]
fn desugared_max_min_evaluate_exactly() {
    // A one-point probability space suffices: the operands are rational
    // constants and the desugaring must reproduce max/min exactly.
    let sig = ilw::logic::Signature::new(vec![], vec![]).unwrap();
    let s = ilw::structures::FiniteStructure::new(
        sig,
        vec!["p0".to_string()],
        vec![q1()],
        vec![],
        vec![],
    )
    .unwrap();
    let empty = BTreeMap::new();
    let mut rng = common::rng(2);
    for _ in 0..200 {
        let u = common::random_rational(&mut rng, 4);
        let v = common::random_rational(&mut rng, 4);
        let max_f = Formula::max(Formula::rat(u.clone()), Formula::rat(v.clone())).unwrap();
        let min_f = Formula::min(Formula::rat(u.clone()), Formula::rat(v.clone())).unwrap();
        assert_eq!(s.evaluate(&max_f, &empty).unwrap(), u.clone().max(v.clone()));
        assert_eq!(s.evaluate(&min_f, &empty).unwrap(), u.min(v));
    }
}

// ---- structures ----

#[test]
fn integral_is_linear() {
    let mut rng = common::rng(3);
    let empty = BTreeMap::new();
    for _ in 0..150 {
        let sig = common::random_signature(&mut rng);
        let s = common::random_structure(&mut rng, &sig);
        let pool = vec!["x".to_string()];
        let mut binder = 0;
        let phi = common::random_formula(&mut rng, &sig, &pool, 2, &mut binder);
        let psi = common::random_formula(&mut rng, &sig, &pool, 2, &mut binder);
        let a = common::random_rational(&mut rng, 3);
        let b = common::random_rational(&mut rng, 3);
        let combined = Formula::integral(
            "x",
            Formula::linear(a.clone(), phi.clone(), b.clone(), psi.clone()).unwrap(),
        )
        .unwrap();
        let left = s.evaluate(&combined, &empty).unwrap();
        let phi_val = s
            .evaluate(&Formula::integral("x", phi).unwrap(), &empty)
            .unwrap();
        let psi_val = s
            .evaluate(&Formula::integral("x", psi).unwrap(), &empty)
            .unwrap();
        assert_eq!(left, a * phi_val + b * psi_val);
    }
}

#[test]
fn minimalize_blocks_are_sign_pattern_classes_and_refine() {
    let mut rng = common::rng(4);
    for _ in 0..60 {
        let sig = common::random_signature(&mut rng);
        let s = common::random_structure(&mut rng, &sig);
        let pool = vec!["x".to_string()];
        let mut binder = 0;
        let fragment: Vec<(Formula, String)> = (0..rng.gen_range(1..=3))
            .map(|_| {
                (
                    common::random_formula(&mut rng, &sig, &pool, 2, &mut binder),
                    "x".to_string(),
                )
            })
            .collect();
        let empty = BTreeMap::new();
        let partition = s.minimalize(&fragment, &empty).unwrap();

        // Independent pattern computation per point.
        let pattern = |x: usize| -> Vec<bool> {
            fragment
                .iter()
                .map(|(f, var)| {
                    let mut env = BTreeMap::new();
                    env.insert(var.clone(), x);
                    s.evaluate(f, &env).unwrap() > q0()
                })
                .collect()
        };
        let mut block_of = vec![usize::MAX; s.points().len()];
        for (b, block) in partition.blocks.iter().enumerate() {
            for &x in block {
                block_of[x] = b;
            }
        }
        for x in 0..s.points().len() {
            for y in 0..s.points().len() {
                assert_eq!(
                    block_of[x] == block_of[y],
                    pattern(x) == pattern(y),
                    "blocks must be exactly the sign-pattern classes",
                );
            }
        }

        // Determinism, and refinement under a longer fragment: every new
        // block stays inside one old block.
        assert_eq!(s.minimalize(&fragment, &empty).unwrap(), partition);
        let mut extended = fragment.clone();
        extended.push((
            common::random_formula(&mut rng, &sig, &pool, 2, &mut binder),
            "x".to_string(),
        ));
        let refined = s.minimalize(&extended, &empty).unwrap();
        for block in &refined.blocks {
            let parents: BTreeSet<usize> = block.iter().map(|&x| block_of[x]).collect();
            assert_eq!(parents.len(), 1, "refinement split across old blocks");
        }
    }
}

// ---- invariance ----

#[test]
fn group_actions_are_feasible_with_orbit_uniform_measures() {
    let actions = common::enumerate_actions(3, 3);
    let mut groups = 0usize;
    for action in &actions {
        let sg = action.semigroup();
        let Some(e) = sg.identity() else { continue };
        let invertible = (0..sg.len())
            .all(|s| (0..sg.len()).any(|t| sg.op(s, t) == e && sg.op(t, s) == e));
        if !invertible {
            continue;
        }
        groups += 1;
        assert!(matches!(
            invariant_measures(action),
            FeasibilityResult::Feasible { .. }
        ));
        // Uniform measure on the orbit of the first point: group elements
        // permute the orbit, so the pushforwards fix it.
        let mut orbit = BTreeSet::new();
        let mut frontier = vec![0usize];
        while let Some(x) = frontier.pop() {
            if orbit.insert(x) {
                for s in 0..sg.len() {
                    frontier.push(action.apply(s, x));
                }
            }
        }
        let share = q(1, orbit.len() as i64);
        let mu: Vec<Q> = (0..action.len())
            .map(|x| if orbit.contains(&x) { share.clone() } else { q0() })
            .collect();
        assert!(
            common::measure_is_invariant(action, &mu),
            "orbit-uniform measure must be invariant for group actions",
        );
    }
    assert!(groups > 0);
}

#[test]
fn fixed_point_dirac_satisfies_the_generated_theory() {
    let actions = common::enumerate_actions(2, 3);
    let mut checked = 0usize;
    for action in &actions {
        let Some(&fixed) = action.fixed_points().first() else {
            continue;
        };
        let n = action.len();
        let mut family: Vec<(String, Vec<Q>)> =
            vec![("one".to_string(), vec![q1(); n])];
        family.push((
            "fix".to_string(),
            (0..n).map(|x| if x == fixed { q1() } else { q0() }).collect(),
        ));
        let generated = build_invariance_theory(action, &family, true).unwrap();
        let dirac: Vec<Q> = (0..n)
            .map(|x| if x == fixed { q1() } else { q0() })
            .collect();
        let structure = family_structure(action, &dirac, &family).unwrap();
        let report = structure.satisfies_theory(&generated.theory).unwrap();
        assert!(
            report.pass,
            "fixed-point Dirac fails `{}`",
            report.failure.unwrap().statement,
        );
        checked += 1;
    }
    assert!(checked > 0);
}

#[test]
fn random_certificates_are_never_exact_on_total_injective_actions() {
    let mut rng = common::rng(5);
    for _ in 0..150 {
        let n = rng.gen_range(1..=6);
        let n_gen = rng.gen_range(1..=2);
        let generators = (0..n_gen)
            .map(|g| {
                let mut perm: Vec<usize> = (0..n).collect();
                for i in (1..n).rev() {
                    perm.swap(i, rng.gen_range(0..=i));
                }
                (format!("g{g}"), perm.into_iter().map(Some).collect())
            })
            .collect();
        let action =
            PartialAction::new((0..n).map(|i| format!("x{i}")).collect(), generators).unwrap();
        let target: BTreeSet<usize> = (0..n).collect();

        // Random well-formed certificate: disjoint pieces, random movers.
        let mut unused: Vec<usize> = (0..n).collect();
        let mut take_piece = |rng: &mut rand_chacha::ChaCha8Rng| -> Piece {
            let mut points = BTreeSet::new();
            let want = rng.gen_range(0..=unused.len());
            for _ in 0..want {
                points.insert(unused.swap_remove(rng.gen_range(0..unused.len())));
            }
            let mover = (0..rng.gen_range(0..=2))
                .map(|_| rng.gen_range(0..n_gen))
                .collect();
            Piece { points, mover }
        };
        let cert = ParadoxCertificate {
            target,
            a_pieces: vec![take_piece(&mut rng), take_piece(&mut rng)],
            b_pieces: vec![take_piece(&mut rng), take_piece(&mut rng)],
        };
        let report = paradox_verify(&action, &cert).unwrap();
        assert!(!report.exact, "no finite total action decomposes exactly");
    }
}

// ---- stability ----

#[test]
fn ladder_index_is_monotone_in_thresholds_and_submatrices() {
    let token = CancelToken::new();
    let mut rng = common::rng(6);
    for _ in 0..40 {
        let rows = rng.gen_range(2..=6);
        let cols = rng.gen_range(2..=6);
        let m = common::random_matrix(&mut rng, rows, cols);
        let base = ladder_index(&m, &q(1, 2), &q0(), &token).unwrap().index;
        // Widening the gap on either side can only shrink the index.
        let wider_r = ladder_index(&m, &q1(), &q0(), &token).unwrap().index;
        let wider_s = ladder_index(&m, &q(1, 2), &q(-1, 2), &token).unwrap().index;
        assert!(wider_r <= base);
        assert!(wider_s <= base);

        if rows > 1 && cols > 1 {
            let drop_row = rng.gen_range(0..rows);
            let drop_col = rng.gen_range(0..cols);
            let sub_entries: Vec<Vec<Q>> = (0..rows)
                .filter(|&i| i != drop_row)
                .map(|i| {
                    (0..cols)
                        .filter(|&j| j != drop_col)
                        .map(|j| m.entry(i, j).clone())
                        .collect()
                })
                .collect();
            let sub = PhiMatrix::from_entries(sub_entries).unwrap();
            let sub_index = ladder_index(&sub, &q(1, 2), &q0(), &token).unwrap().index;
            assert!(sub_index <= base, "submatrix index exceeds the matrix");
        }
    }
}

#[test]
fn ladder_index_has_exact_transpose_symmetry() {
    let token = CancelToken::new();
    let mut rng = common::rng(7);
    for _ in 0..40 {
        let rows = rng.gen_range(1..=6);
        let cols = rng.gen_range(1..=6);
        let m = common::random_matrix(&mut rng, rows, cols);
        let r = q(1, 2);
        let s = q(-1, 2);
        let direct = ladder_index(&m, &r, &s, &token).unwrap().index;
        let flipped = ladder_index(&m.negated_transpose(), &-&s, &-&r, &token)
            .unwrap()
            .index;
        assert_eq!(direct, flipped);
    }
}

#[test]
fn type_metric_is_a_metric_on_rows() {
    let mut rng = common::rng(8);
    for _ in 0..60 {
        let cols = rng.gen_range(1..=5);
        let m = common::random_matrix(&mut rng, 3, cols);
        let row = |i: usize| TypeVector {
            label: m.row_labels()[i].clone(),
            coords: m.row(i).to_vec(),
        };
        let (a, b, c) = (row(0), row(1), row(2));
        let dab = type_metric(&a, &b).unwrap();
        let dba = type_metric(&b, &a).unwrap();
        let dac = type_metric(&a, &c).unwrap();
        let dbc = type_metric(&b, &c).unwrap();
        assert!(dab >= q0());
        assert_eq!(dab, dba);
        assert!(dac <= &dab + &dbc, "triangle inequality");
        assert_eq!(dab == q0(), a.coords == b.coords, "separation");
    }
}

// ---- nip ----

#[test]
fn dk_is_bounded_by_the_full_box_and_monotone_in_the_family() {
    let token = CancelToken::new();
    let mut rng = common::rng(9);
    let s = q(1, 4);
    let r = q(3, 4);
    for _ in 0..60 {
        let n = rng.gen_range(1..=4);
        let n_funcs = rng.gen_range(1..=3);
        let points: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
        let weights = common::random_weights(&mut rng, n);
        let mut functions: Vec<(String, Vec<Q>)> = (0..n_funcs)
            .map(|i| {
                let values = (0..n).map(|_| q(rng.gen_range(0..=4), 4)).collect();
                (format!("f{i}"), values)
            })
            .collect();
        let fam =
            ilw::nip::FunctionFamily::new(points.clone(), weights.clone(), functions.clone())
                .unwrap();
        let mut e: BTreeSet<usize> = (0..n).filter(|_| rng.gen_bool(0.7)).collect();
        if e.is_empty() {
            e.insert(0);
        }
        let mu_e = e.iter().fold(q0(), |acc, &x| acc + &weights[x]);
        for k in 1..=3usize {
            let dk = dk_measure(&fam, &e, &s, &r, k, &token).unwrap();
            let mut full_box = q1();
            for _ in 0..2 * k {
                full_box = full_box * mu_e.clone();
            }
            assert!(dk <= full_box, "dk exceeds mu(E)^{{2k}}");
        }

        // Adding one more function can only enlarge the union.
        let before = dk_measure(&fam, &e, &s, &r, 2, &token).unwrap();
        functions.push((
            "extra".to_string(),
            (0..n).map(|_| q(rng.gen_range(0..=4), 4)).collect(),
        ));
        let wider = ilw::nip::FunctionFamily::new(points, weights, functions).unwrap();
        let after = dk_measure(&wider, &e, &s, &r, 2, &token).unwrap();
        assert!(after >= before, "family growth shrank dk");
    }
}

#[test]
fn l1_distance_is_a_pseudometric_and_a_metric_on_classes() {
    let mut rng = common::rng(10);
    for _ in 0..80 {
        let n = rng.gen_range(1..=5);
        // Allow zero weights to exercise the almost-everywhere quotient.
        let raw: Vec<i64> = (0..n).map(|_| rng.gen_range(0..=3)).collect();
        let total: i64 = raw.iter().sum::<i64>().max(1);
        let mut mu: Vec<Q> = raw.iter().map(|&w| q(w, total)).collect();
        if raw.iter().all(|&w| w == 0) {
            mu[0] = q1();
        }
        let vector = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<Q> {
            (0..n).map(|_| q(rng.gen_range(-2..=2), 2)).collect()
        };
        let (u, v, w) = (vector(&mut rng), vector(&mut rng), vector(&mut rng));
        let duv = l1_distance(&u, &v, &mu).unwrap();
        let dvu = l1_distance(&v, &u, &mu).unwrap();
        let duw = l1_distance(&u, &w, &mu).unwrap();
        let dvw = l1_distance(&v, &w, &mu).unwrap();
        assert!(duv >= q0());
        assert_eq!(duv, dvu);
        assert!(duw <= &duv + &dvw);
        assert_eq!(l1_distance(&u, &u, &mu).unwrap(), q0());

        // Zero distance is exactly class equality.
        let cu = L1Class::new(u.clone(), &mu).unwrap();
        let cv = L1Class::new(v.clone(), &mu).unwrap();
        assert_eq!(duv == q0(), cu.same_class(&cv));
    }
}

// ---- topometric ----

#[test]
fn cb_levels_shrink_with_alpha_and_grow_as_epsilon_shrinks() {
    let mut rng = common::rng(11);
    let ladder = [q0(), q(1, 2), q1(), q(3, 2), q(2, 1)];
    for _ in 0..60 {
        let n = rng.gen_range(1..=6);
        let space = common::random_preorder_space(&mut rng, n);
        let whole: BTreeSet<usize> = (0..n).collect();
        for pair in ladder.windows(2) {
            let fine = cb_sequence(&space, &pair[0]).unwrap();
            let coarse = cb_sequence(&space, &pair[1]).unwrap();
            for alpha in 0..=n + 1 {
                assert!(
                    coarse.level(alpha).is_subset(fine.level(alpha)),
                    "smaller epsilon must keep more points",
                );
            }
        }
        let sequence = cb_sequence(&space, &q1()).unwrap();
        for pair in sequence.sets().windows(2) {
            assert!(pair[1].is_subset(&pair[0]), "derivative must be antitone");
        }
        assert!(sequence.steps() <= n, "must stabilize within |points| steps");
        match cb_rank(&space, &q1(), &whole).unwrap() {
            CbRank::Finite(alpha) => assert!(alpha <= n - 1),
            CbRank::Infinite => {}
        }
    }
}

#[test]
fn type_spaces_with_discrete_topology_have_rank_zero() {
    let mut rng = common::rng(12);
    for _ in 0..40 {
        let rows = rng.gen_range(1..=5);
        let cols = rng.gen_range(1..=4);
        let m = common::random_matrix(&mut rng, rows, cols);
        let vector = |i: usize| TypeVector {
            label: m.row_labels()[i].clone(),
            coords: m.row(i).to_vec(),
        };
        let metric: Vec<Vec<Q>> = (0..rows)
            .map(|i| {
                (0..rows)
                    .map(|j| type_metric(&vector(i), &vector(j)).unwrap())
                    .collect()
            })
            .collect();
        let space = FiniteTopoSpace::discrete(m.row_labels().to_vec(), metric).unwrap();
        let whole: BTreeSet<usize> = (0..rows).collect();
        assert_eq!(
            cb_rank(&space, &q0(), &whole).unwrap(),
            CbRank::Finite(0),
            "discrete minimal neighborhoods have diameter 0",
        );
    }
}

#[test]
fn l1_class_spaces_with_discrete_topology_validate() {
    let mut rng = common::rng(13);
    for _ in 0..40 {
        let n = rng.gen_range(1..=4);
        let raw: Vec<i64> = (0..n).map(|_| rng.gen_range(0..=3)).collect();
        let total: i64 = raw.iter().sum::<i64>().max(1);
        let mut mu: Vec<Q> = raw.iter().map(|&w| q(w, total)).collect();
        if raw.iter().all(|&w| w == 0) {
            mu[0] = q1();
        }
        let vectors: Vec<TypeVector> = (0..rng.gen_range(1..=5))
            .map(|i| TypeVector {
                label: format!("t{i}"),
                coords: (0..n).map(|_| q(rng.gen_range(0..=2), 2)).collect(),
            })
            .collect();
        let classes = quotient_types(&vectors, &mu).unwrap();
        let reps: Vec<&TypeVector> = classes.iter().map(|c| &vectors[c[0]]).collect();
        let metric: Vec<Vec<Q>> = reps
            .iter()
            .map(|a| {
                reps.iter()
                    .map(|b| l1_distance(&a.coords, &b.coords, &mu).unwrap())
                    .collect()
            })
            .collect();
        let space = FiniteTopoSpace::discrete(
            reps.iter().map(|r| r.label.clone()).collect(),
            metric,
        )
        .unwrap();
        let report = validate_topometric(&space).unwrap();
        assert!(
            report.valid(),
            "distinct classes are separated, so the axioms hold: {:?}",
            report.violations.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
        );
    }
}

// ---- cross-module sanity on the worked example shapes ----

#[test]
fn witness_norm_is_recomputable_from_its_parts() {
    // The duality witness must stay checkable by hand: its norm equals
    // the sup over points of |1 - sum of translate differences|.
    let actions = common::enumerate_actions(3, 2);
    let mut seen_infeasible = false;
    for action in &actions {
        if let FeasibilityResult::Infeasible { .. } = invariant_measures(action) {
            seen_infeasible = true;
            let witness = ilw::invariance::infeasibility_witness(action).unwrap();
            let mut worst = q0();
            for x in 0..action.len() {
                let mut v = q1();
                for (s, f) in &witness.functions {
                    v = v - (&f[action.apply(*s, x)] - &f[x]);
                }
                if v.abs() > worst {
                    worst = v.abs();
                }
            }
            assert_eq!(witness.norm, worst);
            assert!(worst < q1(), "norm must certify: {}", fmt_q(&worst));
        }
    }
    assert!(seen_infeasible);
}
