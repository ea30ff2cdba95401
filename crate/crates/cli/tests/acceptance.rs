//! Acceptance checks. Each criterion prints one PASS or FAIL line. The
//! process fails when a criterion fails that is not listed in
//! `KNOWN_FAILURES`; a listed criterion that starts passing also fails the
//! run, so the list cannot go stale.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use cmcq::bound::{bound_by_enumeration, ceil_pow, compute_bound, compute_bound_with, BoundMode, Optimizations, Rational};
use cmcq::engine::{cmjoin, naive, sj, vj, CmjoinOptions};
use cmcq::model::{parse_query, validate, Attr, Axis, Query, RelationAtom, TreePattern, ValidatedQuery, Variable};
use cmcq::par::Execution;
use cmcq::testkit::{
    formulas_up_to, gadget, gen_family, one_in_three_sat, random_instance, random_pattern, reduce_1in3sat,
    sample_formula, FamilyKind, GadgetKind, RandomLimits, ReductionOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria that are expected to fail, with the reason printed next to them.
const KNOWN_FAILURES: &[(u32, &str)] = &[(
    6,
    "the label-only bound reaches 2m on some formulas that have no 1-in-3 assignment; see the design notes",
)];

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn vq(text: &str) -> ValidatedQuery {
    validate(parse_query(text).expect("query parses")).expect("query validates")
}

fn rat(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

fn within(limit: Duration, start: Instant, what: &str) -> Result<(), String> {
    let took = start.elapsed();
    check(took <= limit, format!("{what} took {took:?}, limit {limit:?}"))
}

fn rho3_timed(q: &ValidatedQuery, what: &str) -> Result<cmcq::bound::Bound, String> {
    let start = Instant::now();
    let b = compute_bound(q, BoundMode::LabelsOnly);
    within(Duration::from_secs(1), start, what)?;
    Ok(b)
}

fn criterion_1() -> Outcome {
    let expect = |text: &str, want: Rational, what: &str| -> Result<cmcq::bound::Bound, String> {
        let b = rho3_timed(&vq(text), what)?;
        check(b.exponent == want, format!("{what}: got {}, want {want}", b.exponent))?;
        Ok(b)
    };
    expect(r#"REL R1(a,b) FROM "1"; REL R2(b,c) FROM "2"; REL R3(a,c) FROM "3"; RETURN a,b,c"#, rat(3, 2), "triangle")?;
    expect(r#"TREE T FROM "t" MATCH :a[//:b]//:c; RETURN a"#, rat(3, 1), "descendant-only")?;
    expect(r#"TREE T FROM "t" MATCH :a[:b]/:c; RETURN a"#, rat(2, 1), "child-only")?;

    let base = r#"TREE T FROM "t" MATCH :a[:b]/:c//:d;"#;
    expect(&format!("{base} RETURN a"), rat(2, 1), "mixed pattern alone")?;
    let b = expect(&format!(r#"REL R1(b,c,d) FROM "r"; {base} RETURN a"#), rat(2, 1), "mixed with R1")?;
    check(b.suite.trees.len() == 2, "mixed with R1: the winning suite should be the split one")?;
    let b = expect(&format!(r#"REL R3(b,d) FROM "r"; REL R4(a,c,d) FROM "s"; {base} RETURN a"#), rat(2, 1), "mixed with R3, R4")?;
    check(b.suite.trees.len() == 1, "mixed with R3, R4: the winning suite should be the converted one")?;

    let two_children = vq(r#"REL R1(b,c) FROM "r1.csv"; TREE T FROM "d.xml" MATCH :a[:b]/:c; RETURN a,b,c"#);
    let got: Vec<Rational> = [BoundMode::AllPositions, BoundMode::BranchPositions, BoundMode::LabelsOnly]
        .into_iter()
        .map(|m| compute_bound(&two_children, m).exponent)
        .collect();
    check(got == [rat(2, 1), rat(3, 2), rat(3, 2)], format!("two-child pattern with R1: got {got:?}"))?;

    for (kind, names) in [(GadgetKind::K1, &["A", "B", "C", "D"][..]), (GadgetKind::K2, &["A", "B", "C", "D", "E", "F"][..])] {
        let b = rho3_timed(&validate(gadget(kind, names).unwrap()).unwrap(), "gadget")?;
        check(b.exponent == rat(2, 1), format!("{kind:?}: got {}", b.exponent))?;
        let v = |s: &str| b.get(&Attr::Label(Variable::new(s)));
        check(
            v("A") == v("B") && (v("A") == rat(1, 1) || v("A") == rat(0, 1)),
            format!("{kind:?}: witness A={} B={}", v("A"), v("B")),
        )?;
    }

    let q = validate(reduce_1in3sat(&sample_formula(), ReductionOptions::default()).unwrap()).unwrap();
    let b = rho3_timed(&q, "three-clause reduction")?;
    check(b.exponent == rat(6, 1), format!("three-clause reduction: got {}", b.exponent))?;
    Ok("all bound regressions exact".into())
}

fn random_bound_query(rng: &mut ChaCha8Rng) -> ValidatedQuery {
    loop {
        let size = rng.gen_range(1..=8);
        let root = random_pattern(rng, size, 0);
        let descendants = root.edges().iter().filter(|e| e.2 == Axis::Descendant).count();
        if descendants > 5 {
            continue;
        }
        let vars: Vec<Variable> = root.variables().into_iter().collect();
        let mut q = Query::default();
        if !vars.is_empty() {
            for i in 0..rng.gen_range(0..=3) {
                let arity = rng.gen_range(1..=3.min(vars.len()));
                let attributes = (0..arity).map(|_| vars[rng.gen_range(0..vars.len())].clone()).collect();
                q.relations.push(RelationAtom { name: format!("R{i}"), attributes, source: format!("r{i}.csv") });
            }
        }
        q.return_vars = vars.into_iter().take(1).collect();
        if q.return_vars.is_empty() {
            continue;
        }
        q.patterns.push(TreePattern { name: "T".into(), source: "t.xml".into(), root });
        return validate(q).expect("generated query validates");
    }
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..200 {
        let q = random_bound_query(&mut rng);
        for mode in [BoundMode::LabelsOnly, BoundMode::AllPositions] {
            let on = compute_bound(&q, mode.clone()).exponent;
            let off = compute_bound_with(&q, mode.clone(), Optimizations::NONE).exponent;
            let all = bound_by_enumeration(&q, &mode, Execution::Parallel);
            check(on == off && off == all, format!("instance {i} ({}): on {on}, off {off}, enumerated {all}: {}", mode.name(), q.query()))?;
        }
    }
    let mut pruned = 0;
    for text in [
        r#"TREE T FROM "t" MATCH :a[:b]/:c//:d; RETURN a"#,
        r#"REL R1(b,c,d) FROM "r"; TREE T FROM "t" MATCH :a[:b]/:c//:d; RETURN a"#,
        r#"REL R3(b,d) FROM "r"; REL R4(a,c,d) FROM "s"; TREE T FROM "t" MATCH :a[:b]/:c//:d; RETURN a"#,
        r#"TREE T FROM "t" MATCH :a[//:b]//:c//:d; RETURN a"#,
    ] {
        let s = compute_bound(&vq(text), BoundMode::LabelsOnly).stats;
        pruned += s.suites_pruned_opt1 + s.suites_pruned_opt2;
    }
    check(pruned > 0, "no suite was pruned by the optimizations on the mixed-axis cases")?;
    within(Duration::from_secs(60), start, "criterion 2")?;
    Ok(format!("200 random queries agree in two modes; {pruned} suites pruned on mixed-axis cases; {:?}", start.elapsed()))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    for seed in 0..500 {
        let f = random_instance(seed, RandomLimits::default());
        let (q, db) = (f.validated(), f.database());
        let want = naive(&q, &db).map_err(|e| e.to_string())?.0;
        let got = [
            ("cmjoin", cmjoin(&q, &db, &CmjoinOptions::default()).map_err(|e| e.to_string())?.0),
            ("sj", sj(&q, &db).map_err(|e| e.to_string())?.0),
            ("vj", vj(&q, &db).map_err(|e| e.to_string())?.0),
        ];
        for (name, rs) in got {
            check(rs == want, format!("{name} differs from naive on seed {seed}"))?;
        }
    }
    within(Duration::from_secs(120), start, "criterion 3")?;
    Ok(format!("500 random instances agree; {:?}", start.elapsed()))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut parts = Vec::new();
    for n in [100u64, 400, 1600] {
        let f = gen_family(FamilyKind::TriangleLike, n as usize, 0).map_err(|e| e.to_string())?;
        let (q, db) = (f.validated(), f.database());
        let (a, s) = sj(&q, &db).map_err(|e| e.to_string())?;
        let (b, c) = cmjoin(&q, &db, &CmjoinOptions::default()).map_err(|e| e.to_string())?;
        check(a == b, format!("n={n}: sj and cmjoin disagree"))?;
        check(s.total_intermediate >= n * n, format!("n={n}: sj intermediate {} < n^2", s.total_intermediate))?;
        check(c.total_intermediate <= 4 * n, format!("n={n}: cmjoin intermediate {} > 4n", c.total_intermediate))?;
        parts.push(format!("n={n} sj={} cmjoin={}", s.total_intermediate, c.total_intermediate));
    }
    within(Duration::from_secs(60), start, "criterion 4")?;
    Ok(parts.join(", "))
}

fn criterion_5() -> Outcome {
    let mut checked = 0;
    for kind in FamilyKind::ALL {
        for n in [2u64, 4, 8] {
            let f = gen_family(kind, n as usize, 0).map_err(|e| e.to_string())?;
            let q = f.validated();
            let rho = compute_bound(&q, BoundMode::LabelsOnly).exponent;
            let (rs, _) = cmjoin(&q, &f.database(), &CmjoinOptions::default()).map_err(|e| e.to_string())?;
            let cap = ceil_pow(n, &rho).ok_or("bound overflows")?;
            check(rs.len() as u128 <= cap, format!("{kind} n={n}: {} answers > ceil(n^{rho}) = {cap}", rs.len()))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} family instances within ceil(n^rho3)"))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let formulas = formulas_up_to(3, 5);
    let mut wrong = Vec::new();
    for f in &formulas {
        let m = f.len() as i64;
        let q = validate(reduce_1in3sat(f, ReductionOptions::default()).map_err(|e| e.to_string())?).unwrap();
        let full = compute_bound(&q, BoundMode::LabelsOnly).exponent == rat(2 * m, 1);
        if full != one_in_three_sat(f).is_some() {
            wrong.push(f);
        }
    }
    within(Duration::from_secs(120), start, "criterion 6")?;
    match wrong.first() {
        None => Ok(format!("{} formulas agree; {:?}", formulas.len(), start.elapsed())),
        Some(f) => {
            let text: Vec<String> = f.iter().map(|c| c.to_string()).collect();
            Err(format!("{} of {} formulas disagree, first {}", wrong.len(), formulas.len(), text.join("")))
        }
    }
}

fn cmcq(args: &[&str]) -> Result<std::process::Output, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_cmcq")).args(args).output().map_err(|e| e.to_string())?;
    check(out.status.success(), format!("cmcq {args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))?;
    Ok(out)
}

fn structure(report: &Path) -> Result<serde_json::Value, String> {
    let text = std::fs::read_to_string(report).map_err(|e| e.to_string())?;
    let mut v: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let steps = v["steps"].as_array_mut().ok_or("report without steps")?;
    for s in steps {
        s.as_object_mut().ok_or("malformed step")?.remove("ms");
    }
    v.as_object_mut().ok_or("malformed report")?.remove("total_ms");
    Ok(v)
}

fn criterion_7() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut runs = 0;
    for (kind, n) in [(FamilyKind::TriangleLike, 16), (FamilyKind::MixedChain, 6), (FamilyKind::DescendantFan, 5)] {
        let cell = dir.path().join(kind.name());
        let cell_str = cell.to_str().ok_or("non-utf8 temp path")?;
        cmcq(&["gen", kind.name(), "--n", &n.to_string(), "--dir", cell_str, "--seed", "5"])?;
        let query = cell.join("query.cmcq");
        for algo in ["cmjoin", "sj", "vj", "naive"] {
            for format in ["csv", "jsonl"] {
                let mut outputs = Vec::new();
                for rep in 0..2 {
                    let out = cell.join(format!("{algo}-{rep}.{format}"));
                    let report = cell.join(format!("{algo}-{format}-{rep}.json"));
                    cmcq(&[
                        "run",
                        query.to_str().unwrap(),
                        "--algo",
                        algo,
                        "--format",
                        format,
                        "--out",
                        out.to_str().unwrap(),
                        "--report",
                        report.to_str().unwrap(),
                    ])?;
                    outputs.push((std::fs::read(&out).map_err(|e| e.to_string())?, structure(&report)?));
                    runs += 1;
                }
                check(outputs[0].0 == outputs[1].0, format!("{kind} {algo} {format}: result files differ"))?;
                check(outputs[0].1 == outputs[1].1, format!("{kind} {algo} {format}: step structures differ"))?;
            }
        }
    }
    Ok(format!("{runs} runs, repeated outputs byte-identical"))
}

fn main() {
    let criteria: [(u32, fn() -> Outcome); 7] =
        [(1, criterion_1), (2, criterion_2), (3, criterion_3), (4, criterion_4), (5, criterion_5), (6, criterion_6), (7, criterion_7)];
    let mut unexpected = Vec::new();
    for (id, run) in criteria {
        let known = KNOWN_FAILURES.iter().find(|(k, _)| *k == id);
        match (run(), known) {
            (Ok(detail), None) => println!("criterion {id}: PASS ({detail})"),
            (Ok(detail), Some(_)) => {
                println!("criterion {id}: PASS ({detail}), but it is listed as a known failure");
                unexpected.push(id);
            }
            (Err(why), Some((_, reason))) => println!("criterion {id}: FAIL ({why}); known: {reason}"),
            (Err(why), None) => {
                println!("criterion {id}: FAIL ({why})");
                unexpected.push(id);
            }
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected outcome for criteria {unexpected:?}");
        std::process::exit(1);
    }
}
