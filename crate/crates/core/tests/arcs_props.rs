use mallows_core::arcs::{
    cycles_as_arcs, replay_checked, trace_events, track_walk, ArcEventKind, ArcTracker,
};
use mallows_core::{sample_bounds, HitAndRun, MallowsError, Permutation};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn start_state() -> impl Strategy<Value = Permutation> {
    (1usize..=40).prop_flat_map(|n| {
        Just((1..=n).collect::<Vec<_>>())
            .prop_shuffle()
            .prop_map(|v| Permutation::new(v).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn replay_invariants_hold(sigma0 in start_state(), beta in 0.02f64..5.0, seed: u64) {
        let n = sigma0.len();
        let mut kernel = HitAndRun::new(n, beta).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (bounds, trace) = kernel.step_traced(&sigma0, &mut rng);
        let report = replay_checked(&bounds, &trace).unwrap();
        prop_assert_eq!(report.violations(), 0, "{:?}", report.messages);

        for s in 1..=n {
            let walk = track_walk(s, &bounds, &trace).unwrap();
            let cycle = trace.result.cycle_containing(s).unwrap();
            prop_assert_eq!(walk.terminal(), cycle[0]);
            prop_assert!(walk.steps_in_heads);
            prop_assert_eq!(walk.w.len(), walk.z.len());
            prop_assert_eq!(*walk.w.last().unwrap(), 0);
            prop_assert!(walk.w[..walk.t_stop].iter().all(|&w| w == 1));
        }
    }

    #[test]
    fn event_log_is_consistent(sigma0 in start_state(), beta in 0.02f64..5.0, seed: u64) {
        let n = sigma0.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bounds = sample_bounds(&sigma0, beta, &mut rng).unwrap();
        let trace = mallows_core::place_symbols(&bounds.b, &mut rng).unwrap();
        let events = trace_events(&bounds, &trace).unwrap();
        prop_assert_eq!(events.len(), n);
        let closes = events.iter().filter(|e| e.kind == ArcEventKind::Close).count();
        prop_assert_eq!(closes, trace.result.cycle_decomposition().len());
        for (e, l) in events.iter().zip((1..=n).rev()) {
            prop_assert_eq!(e.step, l);
            match e.kind {
                ArcEventKind::Close => prop_assert_eq!(e.arc_ids.len(), 1),
                ArcEventKind::Merge => {
                    prop_assert_eq!(e.arc_ids.len(), 2);
                    prop_assert_eq!(e.arc[0], e.head);
                    prop_assert_eq!(*e.arc.last().unwrap(), e.tail);
                }
            }
        }
    }
}

#[test]
fn identity_cutoffs_close_every_point_alone() {
    // with b_j < j + 1 every symbol must go to its own place
    let b: Vec<f64> = (1..=5).map(|j| j as f64 + 0.5).collect();
    let mut tracker = ArcTracker::new(&b).unwrap().with_event_log();
    for l in (1..=5).rev() {
        let (h_prime, h) = tracker.available_heads(l).unwrap();
        assert!(h.is_empty());
        assert_eq!(h_prime, vec![l]);
        tracker.transition(l, l).unwrap();
    }
    assert!(tracker.open_arcs().is_empty());
    assert_eq!(
        tracker.closed_arcs(),
        vec![vec![1], vec![2], vec![3], vec![4], vec![5]]
    );
    assert!(tracker
        .events()
        .unwrap()
        .iter()
        .all(|e| e.kind == ArcEventKind::Close));
}

#[test]
fn tracker_rejects_bad_transitions() {
    let b = vec![3.0, 3.0, 3.0];
    let mut tracker = ArcTracker::new(&b).unwrap();
    assert!(matches!(
        tracker.transition(2, 1),
        Err(MallowsError::InvalidArgument(_))
    ));
    tracker.transition(3, 1).unwrap();
    assert!(tracker.transition(2, 1).is_err()); // place already used
    assert!(tracker.transition(2, 9).is_err());
    assert!(ArcTracker::new(&[0.5, 2.0]).is_err());
}

#[test]
fn closed_arcs_follow_the_inverse() {
    let sigma = Permutation::new(vec![2, 3, 1, 5, 4]).unwrap();
    assert_eq!(cycles_as_arcs(&sigma), vec![vec![1, 3, 2], vec![4, 5]]);
    let inv = sigma.inverse();
    for arc in cycles_as_arcs(&sigma) {
        for w in arc.windows(2) {
            assert_eq!(inv.image(w[0]), w[1]);
        }
    }
}
