use super::checker::*;
use super::graphs::{rx_node, tx_node};
use super::oracle::{oracle_grid, OracleOutcome};
use super::subspace::{eig_lines, m2_of, EigLines, Subspace1D};
use super::twosat::ClauseTag;
use crate::channel::InterferenceChannel;
use crate::numerics::{cx, identity, CMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mat2(rng: &mut ChaCha8Rng) -> CMatrix {
    CMatrix::from_fn(2, 2, |_, _| cx(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
}

fn rank1_mat(rng: &mut ChaCha8Rng) -> CMatrix {
    let u = CMatrix::from_fn(2, 1, |_, _| cx(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
    let v = CMatrix::from_fn(2, 1, |_, _| cx(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
    &u * v.adjoint()
}

fn channel_2x2(h: Vec<Vec<CMatrix>>) -> InterferenceChannel {
    let k = h.len();
    InterferenceChannel::new(vec![2; k], vec![2; k], h, 1.0, vec![1.0; k]).unwrap()
}

/// Fully cross-connected generic K-user channel.
fn full_mesh(k: usize, seed: u64) -> InterferenceChannel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    channel_2x2((0..k).map(|_| (0..k).map(|_| mat2(&mut rng)).collect()).collect())
}

// --- preprocess ---------------------------------------------------------

#[test]
fn preprocess_removes_zero_dof_users() {
    let ch = full_mesh(2, 1);
    match preprocess(&ch, &[0, 1]).unwrap() {
        Preprocessed::Reduced(red) => {
            assert_eq!(red.ch.users(), 1);
            assert_eq!(red.orig_users, vec![1]);
            assert_eq!(red.d, vec![1]);
        }
        other => panic!("expected reduction, got {other:?}"),
    }
}

#[test]
fn preprocess_rejects_two_streams_on_rank_deficient_direct() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = vec![vec![rank1_mat(&mut rng)]];
    let ch = channel_2x2(h);
    match preprocess(&ch, &[2]).unwrap() {
        Preprocessed::Early(FeasibilityOutcome::Infeasible { witness }) => {
            assert!(witness.contains("rank"), "{witness}");
        }
        other => panic!("expected infeasible, got {other:?}"),
    }
}

#[test]
fn preprocess_pads_single_antenna_users() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // user 0 has one transmit antenna
    let h = vec![
        vec![
            CMatrix::from_fn(2, 1, |_, _| cx(rng.gen::<f64>(), 0.0)),
            mat2(&mut rng),
        ],
        vec![
            CMatrix::from_fn(2, 1, |_, _| cx(rng.gen::<f64>(), 0.0)),
            mat2(&mut rng),
        ],
    ];
    let ch = InterferenceChannel::new(vec![1, 2], vec![2, 2], h, 1.0, vec![1.0; 2]).unwrap();
    match preprocess(&ch, &[1, 1]).unwrap() {
        Preprocessed::Reduced(red) => {
            assert_eq!(red.ch.tx_antennas(0), 2);
            // padded column is zero
            for r in 0..2 {
                assert_eq!(red.ch.h(0, 0)[(r, 1)], cx(0.0, 0.0));
            }
        }
        other => panic!("expected reduction, got {other:?}"),
    }
}

#[test]
fn preprocess_flags_three_antennas_not_applicable() {
    let ch =
        InterferenceChannel::new(vec![3], vec![3], vec![vec![identity(3)]], 1.0, vec![1.0])
            .unwrap();
    match preprocess(&ch, &[1]).unwrap() {
        Preprocessed::Early(FeasibilityOutcome::NotApplicable { .. }) => {}
        other => panic!("expected not-applicable, got {other:?}"),
    }
}

// --- clause emission -------------------------------------------------------

fn reduced(ch: &InterferenceChannel, d: &[usize]) -> ReducedInstance {
    match preprocess(ch, d).unwrap() {
        Preprocessed::Reduced(red) => red,
        other => panic!("expected reduction, got {other:?}"),
    }
}

#[test]
fn eq1_forcing_for_two_stream_receiver() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    // user 0 wants both streams; user 1 interferes over a rank-one link
    let h = vec![
        vec![mat2(&mut rng), rank1_mat(&mut rng)],
        vec![CMatrix::zeros(2, 2), mat2(&mut rng)],
    ];
    let ch = channel_2x2(h);
    let inst = emit_clauses(&reduced(&ch, &[2, 1])).unwrap();
    let eq1: Vec<_> = inst.clauses.iter().filter(|c| c.tag == ClauseTag::Eq1).collect();
    assert_eq!(eq1.len(), 2, "forcing pair expected");
    // both clauses mention x_0_1 positively
    let xi = inst.names.iter().position(|n| n == "x_0_1").unwrap();
    for c in eq1 {
        assert!(c.a.var.0 == xi && !c.a.negated || c.b.var.0 == xi && !c.b.negated);
    }
    // and the tuple is achievable: user 1 nulls its link
    assert!(check_dof(&ch, &[2, 1]).unwrap().is_achievable());
}

#[test]
fn eq2_pair_for_distinct_rank_one_interferers() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = vec![
        vec![mat2(&mut rng), rank1_mat(&mut rng), rank1_mat(&mut rng)],
        vec![CMatrix::zeros(2, 2), mat2(&mut rng), CMatrix::zeros(2, 2)],
        vec![CMatrix::zeros(2, 2), CMatrix::zeros(2, 2), mat2(&mut rng)],
    ];
    let ch = channel_2x2(h);
    let inst = emit_clauses(&reduced(&ch, &[1, 1, 1])).unwrap();
    let eq2: Vec<_> = inst.clauses.iter().filter(|c| c.tag == ClauseTag::Eq2).collect();
    assert_eq!(eq2.len(), 1, "one receive-side pin pair expected");
    let c = eq2[0];
    assert!(!c.a.negated && !c.b.negated, "clause must be x_01 or x_02");
}

#[test]
fn isolated_users_emit_nothing_and_are_achievable() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let h = vec![
        vec![mat2(&mut rng), CMatrix::zeros(2, 2)],
        vec![CMatrix::zeros(2, 2), mat2(&mut rng)],
    ];
    let ch = channel_2x2(h);
    let report = check_dof_report(&ch, &[1, 2]).unwrap();
    assert_eq!(report.clauses_emitted, 0);
    assert!(report.outcome.is_achievable());
}

// --- check_dof ----------------------------------------------------------------

#[test]
fn single_user_two_streams_achievable() {
    let ch = full_mesh(1, 20);
    let outcome = check_dof(&ch, &[2]).unwrap();
    match &outcome {
        FeasibilityOutcome::Achievable { certificate } => {
            assert!(certificate_verify(&ch, &[2], certificate));
        }
        other => panic!("expected achievable, got {other:?}"),
    }
}

#[test]
fn full_rank_interference_kills_two_streams() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let h = vec![
        vec![mat2(&mut rng), mat2(&mut rng)],
        vec![CMatrix::zeros(2, 2), mat2(&mut rng)],
    ];
    let ch = channel_2x2(h);
    match check_dof(&ch, &[2, 1]).unwrap() {
        FeasibilityOutcome::Infeasible { witness } => {
            assert!(witness.contains("full rank"), "{witness}");
        }
        other => panic!("expected infeasible, got {other:?}"),
    }
}

#[test]
fn three_user_mesh_single_streams_from_loop_eigenvectors() {
    let ch = full_mesh(3, 22);
    let report = check_dof_report(&ch, &[1, 1, 1]).unwrap();
    let cert = match &report.outcome {
        FeasibilityOutcome::Achievable { certificate } => certificate,
        other => panic!("expected achievable, got {other:?}"),
    };
    assert!(certificate_verify(&ch, &[1, 1, 1], cert));
    // the signal line of user 0 must be an invariant line of the 6-cycle
    // loop matrix based at its transmitter:
    // tx0 -> rx1 -> tx2 -> rx0 -> tx1 -> rx2 -> tx0
    let h = |i: usize, j: usize| m2_of(ch.h(i, j));
    let loop_m = h(2, 0).try_inverse().unwrap()
        * h(2, 1)
        * h(0, 1).try_inverse().unwrap()
        * h(0, 2)
        * h(1, 2).try_inverse().unwrap()
        * h(1, 0);
    let s0 = Subspace1D::from_vector(nalgebra::Vector2::new(
        cert.signal[0][(0, 0)],
        cert.signal[0][(1, 0)],
    ))
    .unwrap();
    let ok = match eig_lines(&loop_m) {
        EigLines::Two(a, b) => s0.approx_eq(&a) || s0.approx_eq(&b),
        EigLines::One(a) => s0.approx_eq(&a),
        EigLines::All => true,
    };
    assert!(ok, "signal line is not a loop eigenline");
}

#[test]
fn four_user_mesh_single_streams_infeasible() {
    let ch = full_mesh(4, 23);
    match check_dof(&ch, &[1, 1, 1, 1]).unwrap() {
        FeasibilityOutcome::Infeasible { .. } => {}
        other => panic!("expected infeasible, got {other:?}"),
    }
}

#[test]
fn check_dof_not_applicable_above_two_antennas() {
    let ch =
        InterferenceChannel::new(vec![3], vec![3], vec![vec![identity(3)]], 1.0, vec![1.0])
            .unwrap();
    assert!(matches!(
        check_dof(&ch, &[1]).unwrap(),
        FeasibilityOutcome::NotApplicable { .. }
    ));
}

#[test]
fn check_dof_deterministic() {
    let ch = full_mesh(3, 24);
    let a = check_dof(&ch, &[1, 1, 1]).unwrap();
    let b = check_dof(&ch, &[1, 1, 1]).unwrap();
    match (a, b) {
        (
            FeasibilityOutcome::Achievable { certificate: ca },
            FeasibilityOutcome::Achievable { certificate: cb },
        ) => {
            for k in 0..3 {
                for (x, y) in ca.signal[k].iter().zip(cb.signal[k].iter()) {
                    assert_eq!(x.re.to_bits(), y.re.to_bits());
                    assert_eq!(x.im.to_bits(), y.im.to_bits());
                }
            }
        }
        (x, y) => panic!("nondeterministic outcomes {x:?} vs {y:?}"),
    }
}

#[test]
fn mixed_rank_instances_with_pins() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    // user 1 interferes into rx0 over a rank-one link while rx1 hears
    // tx0 at full rank: x_01 and a two-node component interact
    for _ in 0..20 {
        let h = vec![
            vec![mat2(&mut rng), rank1_mat(&mut rng)],
            vec![mat2(&mut rng), mat2(&mut rng)],
        ];
        let ch = channel_2x2(h);
        let outcome = check_dof(&ch, &[1, 1]).unwrap();
        match outcome {
            FeasibilityOutcome::Achievable { certificate } => {
                assert!(certificate_verify(&ch, &[1, 1], &certificate));
            }
            FeasibilityOutcome::Infeasible { .. } => {
                panic!("two generic users with one constrained link must align")
            }
            FeasibilityOutcome::NotApplicable { .. } => unreachable!(),
        }
    }
}

// --- certificate_verify ---------------------------------------------------------

#[test]
fn verify_accepts_trivial_and_rejects_perturbed() {
    let ch = full_mesh(3, 30);
    let cert = match check_dof(&ch, &[1, 1, 1]).unwrap() {
        FeasibilityOutcome::Achievable { certificate } => certificate,
        other => panic!("expected achievable, got {other:?}"),
    };
    assert!(certificate_verify(&ch, &[1, 1, 1], &cert));
    // rotate one signal subspace by 1e-2: containment must break
    let mut bad = cert.clone();
    let eps = 1e-2;
    let g = bad.signal[1].clone();
    bad.signal[1] = CMatrix::from_fn(2, 1, |r, _| {
        g[(r, 0)] + if r == 0 { cx(eps, 0.0) } else { cx(0.0, -eps) }
    });
    let nrm = bad.signal[1].norm();
    bad.signal[1] = bad.signal[1].scale(1.0 / nrm);
    assert!(!certificate_verify(&ch, &[1, 1, 1], &bad));
}

// --- oracle ------------------------------------------------------------------------

#[test]
fn oracle_single_user_immediate() {
    let ch = full_mesh(1, 40);
    assert!(oracle_grid(&ch, &[1], 50).unwrap().is_achievable());
}

#[test]
fn oracle_matches_loop_eigenvector_on_three_user_mesh() {
    let ch = full_mesh(3, 41);
    let outcome = oracle_grid(&ch, &[1, 1, 1], 500).unwrap();
    let cert = match &outcome {
        OracleOutcome::Achievable { certificate } => certificate,
        OracleOutcome::Unknown => panic!("oracle missed a feasible instance"),
    };
    assert!(certificate_verify_tol(&ch, &[1, 1, 1], cert, 1e-4));
    let h = |i: usize, j: usize| m2_of(ch.h(i, j));
    let loop_m = h(2, 0).try_inverse().unwrap()
        * h(2, 1)
        * h(0, 1).try_inverse().unwrap()
        * h(0, 2)
        * h(1, 2).try_inverse().unwrap()
        * h(1, 0);
    let s0 = Subspace1D::from_vector(nalgebra::Vector2::new(
        cert.signal[0][(0, 0)],
        cert.signal[0][(1, 0)],
    ))
    .unwrap();
    let dist = match eig_lines(&loop_m) {
        EigLines::Two(a, b) => s0.angle_to(&a).min(s0.angle_to(&b)),
        EigLines::One(a) => s0.angle_to(&a),
        EigLines::All => 0.0,
    };
    assert!(dist < 1e-3, "witness {dist:.2e} from the loop eigenline");
}

#[test]
fn oracle_unknown_on_contradictory_cycles() {
    let ch = full_mesh(4, 42);
    for resolution in [50, 200] {
        assert!(!oracle_grid(&ch, &[1, 1, 1, 1], resolution).unwrap().is_achievable());
    }
}

#[test]
fn oracle_agrees_with_checker_on_small_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let mut achievable = 0;
    for trial in 0..25 {
        let k = 2 + trial % 2;
        let h: Vec<Vec<CMatrix>> = (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| {
                        if i == j {
                            mat2(&mut rng)
                        } else {
                            match rng.gen_range(0..3) {
                                0 => CMatrix::zeros(2, 2),
                                1 => rank1_mat(&mut rng),
                                _ => mat2(&mut rng),
                            }
                        }
                    })
                    .collect()
            })
            .collect();
        let ch = channel_2x2(h);
        let d = vec![1; k];
        let verdict = check_dof(&ch, &d).unwrap();
        let oracle = oracle_grid(&ch, &d, 400).unwrap();
        match (&verdict, &oracle) {
            (FeasibilityOutcome::Achievable { certificate }, _) => {
                achievable += 1;
                assert!(certificate_verify(&ch, &d, certificate));
                assert!(
                    oracle.is_achievable(),
                    "oracle missed a witness the checker found (trial {trial})"
                );
            }
            (FeasibilityOutcome::Infeasible { .. }, OracleOutcome::Achievable { .. }) => {
                panic!("oracle found a witness the checker rejected (trial {trial})")
            }
            _ => {}
        }
    }
    assert!(achievable >= 5, "suite too degenerate: {achievable} achievable");
}

// --- node helpers ------------------------------------------------------------

#[test]
fn node_encoding() {
    assert_eq!(tx_node(3), 6);
    assert_eq!(rx_node(3), 7);
}
