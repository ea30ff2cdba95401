//! Every evaluator agrees with the backtracking oracle on random instances.

use cmcq::engine::{cmjoin, naive, sj, vj, CmjoinOptions, Mode};
use cmcq::par::Execution;
use cmcq::testkit::{random_instance, RandomLimits};

#[test]
fn all_evaluators_agree_on_random_instances() {
    let limits = RandomLimits::default();
    let mut nonempty = 0;
    for seed in 0..500 {
        let f = random_instance(seed, limits);
        let q = f.validated();
        let db = f.database();
        let (expected, _) = naive(&q, &db).unwrap();
        if !expected.is_empty() {
            nonempty += 1;
        }

        let (got, m) = cmjoin(&q, &db, &CmjoinOptions::default()).unwrap();
        assert_eq!(got, expected, "cmjoin, seed {seed}\n{}", f.query);
        assert!(m.audit());
        let (got, m) = sj(&q, &db).unwrap();
        assert_eq!(got, expected, "sj, seed {seed}\n{}", f.query);
        assert!(m.audit());
        let (got, m) = vj(&q, &db).unwrap();
        assert_eq!(got, expected, "vj, seed {seed}\n{}", f.query);
        assert!(m.audit());
    }
    // The generator must not degenerate into empty answers.
    assert!(nonempty > 150, "only {nonempty} instances had answers");
}

#[test]
fn both_cmjoin_modes_and_full_positions_agree() {
    let limits = RandomLimits::default();
    for seed in 1000..1200 {
        let f = random_instance(seed, limits);
        let q = f.validated();
        let db = f.database();
        let (expected, _) = naive(&q, &db).unwrap();
        for (force_mode, keep_all_positions) in
            [(Some(Mode::NodesAsTables), false), (Some(Mode::PathsAsTables), false), (Some(Mode::PathsAsTables), true)]
        {
            let opts = CmjoinOptions { exec: Execution::Sequential, force_mode, keep_all_positions };
            let (got, _) = cmjoin(&q, &db, &opts).unwrap();
            assert_eq!(got, expected, "seed {seed}, {force_mode:?}, keep all {keep_all_positions}\n{}", f.query);
        }
    }
}

#[test]
fn sequential_and_parallel_runs_match() {
    for seed in 0..100 {
        let f = random_instance(seed, RandomLimits::default());
        let (q, db) = (f.validated(), f.database());
        let run = |exec| cmjoin(&q, &db, &CmjoinOptions { exec, ..CmjoinOptions::default() }).unwrap();
        let (a, ma) = run(Execution::Sequential);
        let (b, mb) = run(Execution::Parallel);
        assert_eq!(a, b);
        assert_eq!(ma.structure(), mb.structure());
    }
}
