//! Acceptance suite: one test per criterion, each printing a single
//! PASS/FAIL line on the real standard error so that the lines appear in
//! the normal `cargo test` output.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::Write;
use std::time::{Duration, Instant};

use csgames::cs::{ratio, Constraint, ConstraintSystem, QuestionDistribution, Target, Tuple, Value};
use csgames::gadgets::{self, basic_gadget, BASIC_ROLES};
use csgames::games::{cc_game, classical_value, twocs_game};
use csgames::quantum::{
    self, chom_suite, defect_a, defect_cc, defect_cv, identity_suite, inequality_suite, random_pvm, random_strategy,
    rng_from_seed, Model, Pvm, Transform, CMat,
};
use csgames::schaefer::{classify_boolean, Complexity};
use csgames::tvf::{self, simulate_one_in_three_neg, TvfGraph, SIM_X, SIM_Y, SIM_Z};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn emit(id: u32, title: &str, pass: bool, detail: &str, elapsed: Duration) {
    let line = format!(
        "acceptance criterion {id:>2} [{}] {title}: {detail} ({:.2}s)\n",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
}

/// Independent backtracking satisfiability oracle.
fn oracle_sat(s: &ConstraintSystem) -> bool {
    let n = s.num_variables();
    let k = s.k();
    let mut by_last: Vec<Vec<(Vec<usize>, HashSet<Tuple>)>> = vec![Vec::new(); n];
    for c in s.constraints() {
        let acc: HashSet<Tuple> = c.accepted().iter().cloned().collect();
        match c.context().iter().max() {
            Some(&m) => by_last[m].push((c.context().to_vec(), acc)),
            None => {
                if acc.is_empty() {
                    return false;
                }
            }
        }
    }
    fn go(i: usize, n: usize, k: Value, val: &mut Vec<Value>, by_last: &[Vec<(Vec<usize>, HashSet<Tuple>)>]) -> bool {
        if i == n {
            return true;
        }
        for a in 0..k {
            val[i] = a;
            let ok = by_last[i].iter().all(|(ctx, acc)| {
                let t: Tuple = ctx.iter().map(|&v| val[v]).collect();
                acc.contains(&t)
            });
            if ok && go(i + 1, n, k, val, by_last) {
                return true;
            }
        }
        false
    }
    go(0, n, k, &mut vec![0; n], &by_last)
}

fn one3_tuples() -> BTreeSet<Tuple> {
    [vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]].into_iter().collect()
}

#[test]
fn criterion_01_gadget_completeness_table() {
    let start = Instant::now();
    let g = basic_gadget(&Constraint::one_in_three([0, 1, 2]), None).unwrap();
    for (v, role) in BASIC_ROLES.iter().enumerate() {
        assert!(g.cs.var_name(v).contains(&format!(".{role}.")), "{}", g.cs.var_name(v));
    }
    let (x, y) = (3usize, 4usize);
    assert_eq!(g.distinguished, vec![x, y]);
    let one3 = one3_tuples();
    let triangles = [[3usize, 0, 1], [4, 0, 2], [5, 1, 2]];
    let mut sat_by_xy: HashMap<(Value, Value), Vec<Tuple>> = HashMap::new();
    for bits in 0u32..64 {
        let t: Tuple = (0..6).map(|i| ((bits >> (5 - i)) & 1) as Value).collect();
        let ok = triangles.iter().all(|tri| one3.contains(&tri.iter().map(|&v| t[v]).collect::<Tuple>()));
        assert_eq!(ok, g.cs.satisfies(&t));
        if ok {
            sat_by_xy.entry((t[x], t[y])).or_default().push(t);
        }
    }
    let listed: [Tuple; 4] = [vec![1, 1, 1, 0, 0, 0], vec![0, 1, 0, 0, 1, 0], vec![0, 0, 1, 1, 0, 0], vec![0, 0, 0, 1, 1, 1]];
    let literal = listed.iter().all(|t| g.cs.satisfies(t));
    let every_value_extends = [(0, 0), (0, 1), (1, 0), (1, 1)].iter().all(|k| sat_by_xy.contains_key(k));
    let extensions: BTreeSet<Tuple> = sat_by_xy.values().flatten().cloned().collect();
    let corrected: BTreeSet<Tuple> =
        [vec![1, 0, 0, 0, 0, 1], listed[1].clone(), listed[2].clone(), listed[3].clone()].into_iter().collect();
    assert!(every_value_extends);
    assert_eq!(extensions, corrected);
    assert!(listed[1..].iter().all(|t| g.cs.satisfies(t)));
    assert!(!g.cs.satisfies(&listed[0]));
    let certified = g.certify().unwrap();
    assert_eq!(certified.len(), 4);
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(1));
    emit(
        1,
        "basic gadget completeness table",
        literal,
        "literal witness (1,1,1,0,0,0) for (x,y)=(0,0) violates the triangle {x,u,v}; brute force over 2^6 finds exactly \
         (1,0,0,0,0,1), (0,1,0,0,1,0), (0,0,1,1,0,0), (0,0,0,1,1,1), one per value of (x,y), and these are asserted",
        elapsed,
    );
}

#[test]
#[ignore = "the literal (0,0) witness of the completeness table is not a satisfying assignment"]
fn criterion_01_literal_witnesses() {
    let g = basic_gadget(&Constraint::one_in_three([0, 1, 2]), None).unwrap();
    for t in [[1, 1, 1, 0, 0, 0], [0, 1, 0, 0, 1, 0], [0, 0, 1, 1, 0, 0], [0, 0, 0, 1, 1, 1]] {
        assert!(g.cs.satisfies(&t), "{t:?}");
    }
}

fn hs(a: &CMat) -> f64 {
    (a.adjoint() * a).trace().re / a.nrows() as f64
}

#[test]
fn criterion_02_three_clique_identity() {
    let start = Instant::now();
    let res = identity_suite(100, 0, 8);
    let mut worst: f64 = 0.0;
    for (t, &(d, r)) in res.iter().enumerate() {
        let mut rng = rng_from_seed(t as u64);
        let ms: Vec<Pvm> = (0..3).map(|_| random_pvm(3, d, &mut rng)).collect();
        let id = CMat::identity(d, d);
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for a in 0..3 {
            let (x, y, z) = (&ms[0].projectors[a], &ms[1].projectors[a], &ms[2].projectors[a]);
            lhs += hs(&(x + y + z - &id));
            rhs += 2.0 * (hs(&(x * y)) + hs(&(y * z)) + hs(&(z * x)));
        }
        assert!((2..=8).contains(&d));
        worst = worst.max(r).max((lhs - rhs).abs());
    }
    let elapsed = start.elapsed();
    let pass = worst <= 1e-9 && elapsed < Duration::from_secs(10);
    emit(2, "3-clique identity", pass, &format!("100 triples, d in 2..=8, worst |LHS - RHS| = {worst:.2e}"), elapsed);
    assert!(pass);
}

#[test]
fn criterion_03_inequality_constants() {
    let start = Instant::now();
    let fams = inequality_suite(100, 0, 6, 1e-7).unwrap();
    let required = ["basic-gadget", "three-colouring", "prism", "hermitian-square", "tvf-acomm-to-a"];
    let mut detail = Vec::new();
    let mut pass = true;
    for f in &fams {
        detail.push(format!("{} C={} slack>={:.1e}", f.name, f.constant, f.worst_slack));
        pass &= f.pass() && f.worst_slack >= -1e-7 && f.trials >= 100;
    }
    assert!(required.iter().all(|r| fams.iter().any(|f| f.name == *r)));
    assert_eq!(fams.iter().find(|f| f.name == "basic-gadget").unwrap().constant, 512.0);
    assert_eq!(fams.iter().find(|f| f.name == "three-colouring").unwrap().constant, 16.0);
    assert_eq!(fams.iter().find(|f| f.name == "prism").unwrap().constant, 6240.0);
    assert_eq!(fams.iter().find(|f| f.name == "hermitian-square").unwrap().constant, 8.0);
    assert_eq!(fams.iter().find(|f| f.name == "tvf-acomm-to-a").unwrap().constant, 16.0 * 9.0 + 1.0);
    for k in 1..=8usize {
        assert_eq!(quantum::hermitian_square_constant(k), (k as f64).log2().ceil().exp2());
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(120);
    emit(3, "inequality constants", pass, &detail.join(", "), elapsed);
    assert!(pass);
}

fn random_complete_graph(rng: &mut ChaCha8Rng, n: usize) -> TvfGraph {
    let mut pats = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let mut chosen = 0u8;
            while chosen == 0 {
                chosen = rng.random_range(1u8..16);
                if chosen.count_ones() > 2 {
                    chosen = 0;
                }
            }
            for (bit, (a, b)) in [(0, 0), (1, 1), (0, 1), (1, 0)].into_iter().enumerate() {
                if chosen >> bit & 1 == 1 {
                    pats.push((u, a, v, b));
                }
            }
        }
    }
    TvfGraph::from_patterns((0..n).collect(), pats).unwrap()
}

fn oracle_assignments(g: &TvfGraph, n: usize) -> Vec<Tuple> {
    let pats = g.patterns();
    (0u32..1 << n)
        .map(|bits| (0..n).map(|i| ((bits >> (n - 1 - i)) & 1) as Value).collect::<Tuple>())
        .filter(|t| !pats.iter().any(|&(u, a, v, b)| t[u] == a && t[v] == b))
        .collect()
}

struct TvfStats {
    graphs: usize,
    round_trip_mismatches: usize,
    size_violations: usize,
    tableaux: usize,
    tableau_failures: usize,
    subgraph_failures: usize,
}

fn tvf_structure(samples: usize) -> TvfStats {
    let mut rng = rng_from_seed(2024);
    let mut st = TvfStats {
        graphs: 0,
        round_trip_mismatches: 0,
        size_violations: 0,
        tableaux: 0,
        tableau_failures: 0,
        subgraph_failures: 0,
    };
    while st.graphs < samples {
        let n = rng.random_range(2..=6usize);
        let g = random_complete_graph(&mut rng, n);
        let asg = oracle_assignments(&g, n);
        let mut lib = g.assignments();
        lib.sort();
        assert_eq!(lib, asg);
        if asg.is_empty() {
            continue;
        }
        st.graphs += 1;
        if asg.len() > n + 1 {
            st.size_violations += 1;
        }
        let c = Constraint::new(2, (0..n).collect(), asg.clone()).unwrap();
        let back = tvf::tvf_graph(&c).unwrap();
        if back != g {
            st.round_trip_mismatches += 1;
        }
        let gp: BTreeSet<_> = g.patterns().into_iter().collect();
        let bp: BTreeSet<_> = back.patterns().into_iter().collect();
        if !gp.is_subset(&bp) || tvf::tvf_graph(&back.as_constraint().unwrap()).unwrap() != back {
            st.subgraph_failures += 1;
        }
        if tvf::is_incompressible(&g) {
            st.tableaux += 1;
            let mut tabs = vec![tvf::tableau_negated(&g)];
            if g.e00().is_empty() {
                tabs.push(tvf::tableau_no00(&g));
            }
            for t in tabs {
                let ok = match t {
                    Ok(t) => {
                        let mut want = g.negate_at(&t.negated).assignments();
                        want.sort();
                        let mut rows = t.rows.clone();
                        rows.sort();
                        t.is_upper_triangular() && rows == want
                    }
                    Err(_) => false,
                };
                if !ok {
                    st.tableau_failures += 1;
                }
            }
        }
    }
    st
}

#[test]
fn criterion_04_tvf_structure() {
    let start = Instant::now();
    let st = tvf_structure(500);
    let elapsed = start.elapsed();
    assert_eq!(st.size_violations, 0);
    assert_eq!(st.tableau_failures, 0);
    assert_eq!(st.subgraph_failures, 0);
    assert!(st.tableaux > 0);
    assert!(elapsed < Duration::from_secs(30));
    emit(
        4,
        "TVF structure",
        st.round_trip_mismatches == 0,
        &format!(
            "{} graphs: literal round trip G_TVF(C_TVF(G)) = G fails on {}; size bound violations {}; {} tableaux, {} failures; \
             G contained in G_TVF(C_TVF(G)) and idempotence hold on all",
            st.graphs, st.round_trip_mismatches, st.size_violations, st.tableaux, st.tableau_failures
        ),
        elapsed,
    );
}

#[test]
#[ignore = "the literal round trip G_TVF(C_TVF(G)) = G does not hold for every complete TVF graph"]
fn criterion_04_literal_round_trip() {
    assert_eq!(tvf_structure(500).round_trip_mismatches, 0);
}

fn is_tvf_oracle(ts: &[Tuple], n: usize) -> bool {
    (0..n).all(|p| {
        (p + 1..n).all(|q| {
            let seen: HashSet<(Value, Value)> = ts.iter().map(|t| (t[p], t[q])).collect();
            seen.len() < 4
        })
    })
}

fn fails_maj(ts: &[Tuple]) -> bool {
    let set: HashSet<&Tuple> = ts.iter().collect();
    ts.iter().any(|a| {
        ts.iter().any(|b| {
            ts.iter().any(|c| {
                let m: Tuple = (0..a.len()).map(|i| (a[i] & b[i]) | (b[i] & c[i]) | (c[i] & a[i])).collect();
                !set.contains(&m)
            })
        })
    })
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..n {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

fn canonical(ts: &[Tuple], perms: &[Vec<usize>]) -> Vec<Tuple> {
    perms
        .iter()
        .map(|p| {
            let mut v: Vec<Tuple> = ts.iter().map(|t| p.iter().map(|&i| t[i]).collect()).collect();
            v.sort();
            v
        })
        .min()
        .unwrap()
}

/// Every TVF constraint on `n` variables failing MAJ, one per orbit of the
/// variable permutations.
fn non_maj_tvf(n: usize) -> Vec<Vec<Tuple>> {
    let all: Vec<Tuple> = (0u32..1 << n).map(|b| (0..n).map(|i| ((b >> (n - 1 - i)) & 1) as Value).collect()).collect();
    let perms = permutations(n);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    fn go(
        start: usize,
        cur: &mut Vec<Tuple>,
        all: &[Tuple],
        n: usize,
        perms: &[Vec<usize>],
        seen: &mut HashSet<Vec<Tuple>>,
        out: &mut Vec<Vec<Tuple>>,
    ) {
        if !cur.is_empty() && fails_maj(cur) {
            let c = canonical(cur, perms);
            if seen.insert(c.clone()) {
                out.push(c);
            }
        }
        for i in start..all.len() {
            cur.push(all[i].clone());
            if is_tvf_oracle(cur, n) {
                go(i + 1, cur, all, n, perms, seen, out);
            }
            cur.pop();
        }
    }
    go(0, &mut Vec::new(), &all, n, &perms, &mut seen, &mut out);
    out
}

fn oracle_pushforward_xyz(c: &Constraint, map: &csgames::cs::VarMap) -> BTreeSet<Tuple> {
    let target = map.target().to_vec();
    let pos = |w: usize| target.iter().position(|&t| t == w).expect("target variable");
    let acc: HashSet<&Tuple> = c.accepted().iter().collect();
    let mut out = BTreeSet::new();
    for bits in 0u32..1 << target.len() {
        let phi: Vec<Value> = (0..target.len()).map(|i| ((bits >> i) & 1) as Value).collect();
        let pulled: Tuple = map
            .images()
            .iter()
            .map(|t| match *t {
                Target::Var(w) => phi[pos(w)],
                Target::Neg(w) => 1 - phi[pos(w)],
                Target::Const(a) => a,
            })
            .collect();
        if acc.contains(&pulled) {
            out.insert(vec![phi[pos(SIM_X)], phi[pos(SIM_Y)], phi[pos(SIM_Z)]]);
        }
    }
    out
}

#[test]
fn criterion_05_simulation_oracle() {
    let start = Instant::now();
    let mut total = 0;
    let mut failures = Vec::new();
    let mut per_n = Vec::new();
    for n in 3..=5 {
        let family = non_maj_tvf(n);
        per_n.push(format!("|V|={n}: {}", family.len()));
        for ts in family {
            total += 1;
            let c = Constraint::new(2, (0..n).collect(), ts.clone()).unwrap();
            assert!(tvf::is_tvf(&c));
            let ok = match simulate_one_in_three_neg(&c) {
                Ok(sim) => {
                    let has_xyz = [SIM_X, SIM_Y, SIM_Z].iter().all(|v| sim.map.target().contains(v));
                    has_xyz && sim.map.source() == c.context() && oracle_pushforward_xyz(&c, &sim.map) == one3_tuples()
                }
                Err(_) => false,
            };
            if !ok {
                failures.push(ts);
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed < Duration::from_secs(300) && total > 0;
    emit(
        5,
        "1-in-3 simulation oracle",
        pass,
        &format!("{total} constraint classes ({}), {} failures", per_n.join(", "), failures.len()),
        elapsed,
    );
    assert!(pass, "{:?}", &failures[..failures.len().min(5)]);
}

#[test]
fn criterion_06_value_defect_duality() {
    let start = Instant::now();
    let pair = quantum::one_in_three_pair();
    let pp = quantum::uniform_pairs(2).unwrap();
    let pc = pair.constraint_distribution().unwrap();
    let tri = quantum::triangle_system();
    let tpi = tri.constraint_distribution().unwrap();
    let mut worst = [0.0f64; 3];
    for t in 0..100u64 {
        let d = 1 + (t as usize % 8);
        let cc = defect_cc(&random_strategy(Model::Cc, &pair, d, t).unwrap(), &pair, &pp).unwrap();
        worst[0] = worst[0].max((cc.value.unwrap() + cc.defect - 1.0).abs());
        let cv = defect_cv(&random_strategy(Model::Cv, &pair, d, t).unwrap(), &pair, &pc).unwrap();
        worst[1] = worst[1].max((cv.value.unwrap() + cv.defect - 1.0).abs());
        let a = defect_a(&random_strategy(Model::A, &tri, d, t).unwrap(), &tri, &tpi).unwrap();
        worst[2] = worst[2].max((a.value.unwrap() + a.defect - 1.0).abs());
    }
    let elapsed = start.elapsed();
    let pass = worst.iter().all(|&w| w <= 1e-9) && elapsed < Duration::from_secs(60);
    emit(
        6,
        "value/defect duality",
        pass,
        &format!("100 strategies per model, d <= 8: cc {:.1e}, cv {:.1e}, a on 2CS {:.1e}", worst[0], worst[1], worst[2]),
        elapsed,
    );
    assert!(pass);
}

fn colouring_system(n: usize, edges: &[(usize, usize)]) -> ConstraintSystem {
    let c = edges.iter().map(|&(a, b)| Constraint::neq(3, a, b).unwrap()).collect();
    ConstraintSystem::with_default_names(3, n, c).unwrap()
}

fn best_colouring_fraction(n: usize, edges: &[(usize, usize)]) -> num_rational::BigRational {
    let mut best = 0;
    for code in 0..3usize.pow(n as u32) {
        let col: Vec<usize> = (0..n).map(|i| code / 3usize.pow(i as u32) % 3).collect();
        best = best.max(edges.iter().filter(|&&(a, b)| col[a] != col[b]).count());
    }
    ratio(best as i64, edges.len() as i64)
}

#[test]
fn criterion_07_classical_exact_values() {
    let start = Instant::now();
    let graphs: [(&str, usize, Vec<(usize, usize)>, (i64, i64)); 3] = [
        ("triangle", 3, vec![(0, 1), (1, 2), (0, 2)], (1, 1)),
        ("K4", 4, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)], (5, 6)),
        ("prism", 6, gadgets::PRISM_EDGES.to_vec(), (1, 1)),
    ];
    let mut detail = Vec::new();
    let mut pass = true;
    for (name, n, edges, (p, q)) in graphs {
        let s = colouring_system(n, &edges);
        let g = twocs_game(&s, &s.constraint_distribution().unwrap()).unwrap();
        let v = classical_value(&g, 1 << 24).unwrap();
        let sync = v.synchronous_value.clone().unwrap();
        let oracle = best_colouring_fraction(n, &edges);
        pass &= sync == ratio(p, q) && oracle == sync;
        detail.push(format!("{name} = {sync}"));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(5);
    emit(7, "classical exact values (synchronous)", pass, &detail.join(", "), elapsed);
    assert!(pass);
}

fn random_constraint(rng: &mut ChaCha8Rng, k: u8, ctx: Vec<usize>) -> Constraint {
    loop {
        let total = (k as usize).pow(ctx.len() as u32);
        let keep: Vec<bool> = (0..total).map(|_| rng.random_bool(0.55)).collect();
        let c = Constraint::from_predicate(k, ctx.clone(), |t| {
            keep[t.iter().fold(0usize, |acc, &a| acc * k as usize + a as usize)]
        });
        if let Ok(c) = c {
            return c;
        }
    }
}

fn distinct_vars(rng: &mut ChaCha8Rng, n: usize, a: usize) -> Vec<usize> {
    let mut v: Vec<usize> = Vec::new();
    while v.len() < a {
        let x = rng.random_range(0..n);
        if !v.contains(&x) {
            v.push(x);
        }
    }
    v
}

fn random_system(rng: &mut ChaCha8Rng, k: u8, n: usize, m: usize, arity: std::ops::RangeInclusive<usize>) -> ConstraintSystem {
    let cs = (0..m)
        .map(|_| {
            let a = rng.random_range(arity.clone());
            let ctx = distinct_vars(rng, n, a);
            random_constraint(rng, k, ctx)
        })
        .collect();
    ConstraintSystem::with_default_names(k, n, cs).unwrap()
}

struct PassStats {
    instances: usize,
    satisfiable: usize,
    mismatches: usize,
}

/// Runs one reduction on seeded instances. An output of `None` stands for a
/// reduction that rejected its input because some question pair accepts no
/// answers, which counts as an unsatisfiable output.
fn run_pass(
    count: usize,
    seed: u64,
    mut make: impl FnMut(&mut ChaCha8Rng) -> Option<(ConstraintSystem, Option<ConstraintSystem>)>,
) -> PassStats {
    let mut rng = rng_from_seed(seed);
    let mut st = PassStats { instances: 0, satisfiable: 0, mismatches: 0 };
    while st.instances < count {
        let Some((s, out)) = make(&mut rng) else { continue };
        assert!(s.num_variables() <= 12);
        st.instances += 1;
        let (a, b) = (oracle_sat(&s), out.as_ref().is_some_and(oracle_sat));
        st.satisfiable += usize::from(a);
        st.mismatches += usize::from(a != b);
    }
    st
}

#[test]
fn criterion_08_reduction_satisfiability() {
    let start = Instant::now();
    let count = 60;
    let mut results: Vec<(&str, PassStats)> = Vec::new();
    results.push((
        "booleanize",
        run_pass(count, 81, |rng| {
            let n = rng.random_range(2..=4);
            let m = rng.random_range(1..=5);
            let s = random_system(rng, 3, n, m, 1..=2);
            let b = s.boolean_form();
            Some((s, Some(b)))
        }),
    ));
    results.push((
        "subdivide",
        run_pass(count, 82, |rng| {
            let n = rng.random_range(3..=8);
            let m = rng.random_range(1..=4);
            let mut cs = Vec::new();
            for _ in 0..m {
                let ctx = distinct_vars(rng, n, 3);
                let rel: Vec<Vec<bool>> = (0..3).map(|_| (0..4).map(|_| rng.random_bool(0.7)).collect()).collect();
                let pairs = [(0, 1), (0, 2), (1, 2)];
                let c = Constraint::from_predicate(2, ctx, |t| {
                    pairs.iter().enumerate().all(|(e, &(p, q))| rel[e][(t[p] * 2 + t[q]) as usize])
                })
                .ok()?;
                cs.push(c);
            }
            let s = ConstraintSystem::with_default_names(2, n, cs).unwrap();
            let dec = s.constraints().iter().map(|c| gadgets::pairwise_decomposition(c).unwrap()).collect::<Vec<_>>();
            let r = gadgets::subdivide(&s, &dec, &quantum::uniform_pairs(s.constraints().len()).unwrap()).unwrap();
            Some((s, Some(r.cs)))
        }),
    ));
    results.push((
        "oracularize",
        run_pass(count, 83, |rng| {
            let k = rng.random_range(2..=3u8);
            let (n, m) = (rng.random_range(2..=5), rng.random_range(1..=3));
            let s = random_system(rng, k, n, m, 1..=2);
            let g = cc_game(&s, &quantum::uniform_pairs(s.constraints().len()).unwrap()).unwrap();
            match gadgets::oracularize(&g) {
                Ok(o) => (o.cs.num_variables() <= 14).then_some((s, Some(o.cs))),
                Err(csgames::Error::PreconditionViolated(_)) => Some((s, None)),
                Err(e) => panic!("{e}"),
            }
        }),
    ));
    results.push((
        "replace-empty (non-TVF)",
        run_pass(count, 84, |rng| {
            let n = rng.random_range(3..=7);
            let m = rng.random_range(1..=4);
            let mut s = random_system(rng, 2, n, m, 2..=3);
            for _ in 0..rng.random_range(1..=2) {
                s.push_constraint(Constraint::full(2, distinct_vars(rng, n, 2)).unwrap()).unwrap();
            }
            let r = gadgets::replace_empty_nontvf(&s, &quantum::parity_constraint(), 0, 1).unwrap();
            Some((s, Some(r.cs)))
        }),
    ));
    results.push((
        "replace-empty (prism)",
        run_pass(count, 85, |rng| {
            let n = rng.random_range(3..=6);
            let mut cs = Vec::new();
            let mut empties = 0;
            for a in 0..n {
                for b in a + 1..n {
                    if rng.random_bool(0.6) {
                        if empties < 2 && rng.random_bool(0.25) {
                            empties += 1;
                            cs.push(Constraint::full(3, vec![a, b]).unwrap());
                        } else {
                            cs.push(Constraint::neq(3, a, b).unwrap());
                        }
                    }
                }
            }
            if cs.is_empty() {
                return None;
            }
            let s = ConstraintSystem::with_default_names(3, n, cs).unwrap();
            let r = gadgets::replace_empty_3col(&s).unwrap();
            Some((s, Some(r.cs)))
        }),
    ));
    results.push((
        "cv-to-2csp",
        run_pass(count, 86, |rng| {
            let n = rng.random_range(3..=8);
            let m = rng.random_range(1..=4);
            let cs = (0..m).map(|_| {
                let v = distinct_vars(rng, n, 3);
                Constraint::one_in_three([v[0], v[1], v[2]])
            });
            let s = ConstraintSystem::with_default_names(2, n, cs.collect()).unwrap();
            let r = gadgets::cv_to_2csp(&s).unwrap();
            Some((s, Some(r.cs)))
        }),
    ));
    results.push((
        "cc-expand",
        run_pass(count, 87, |rng| {
            let (n, m) = (rng.random_range(3..=5), rng.random_range(0..=2));
            let mut s = random_system(rng, 2, n, m, 2..=3);
            let ctx = distinct_vars(rng, n, 3);
            let base = random_constraint(rng, 2, ctx[..2].to_vec());
            let anchor = Constraint::from_predicate(2, ctx, |t| base.contains(&t[..2].to_vec())).unwrap();
            s.push_constraint(anchor).unwrap();
            let (anchor, v) =
                s.constraints().iter().find_map(|c| gadgets::find_free_variable(c).map(|v| (c.clone(), v)))?;
            let r = gadgets::cc_expand(&s, &anchor, v).unwrap();
            Some((s, Some(r.cs)))
        }),
    ));
    let elapsed = start.elapsed();
    let mut pass = elapsed < Duration::from_secs(300);
    let mut detail = Vec::new();
    for (name, st) in &results {
        pass &= st.mismatches == 0 && st.instances >= 50;
        detail.push(format!("{name} {}/{} sat, {} mismatches", st.satisfiable, st.instances, st.mismatches));
    }
    emit(8, "reduction satisfiability", pass, &detail.join("; "), elapsed);
    assert!(pass);
}

#[test]
fn criterion_09_chom_pullbacks() {
    let start = Instant::now();
    let mut detail = Vec::new();
    let mut pass = true;
    for t in Transform::ALL {
        let checks = chom_suite(t, None, 50, 0, 6, 1e-7).unwrap();
        let fails = checks.iter().filter(|c| !c.pass).count();
        pass &= fails == 0 && checks.len() == 50;
        if t == Transform::BooleanForm {
            let exact = checks.iter().all(|c| c.exact == Some(true) && c.df_pullback.to_bits() == c.df_target.to_bits());
            pass &= exact;
            detail.push(format!("{} exact={exact}", t.name()));
        } else {
            detail.push(format!("{} C={} fails={fails}", t.name(), checks[0].constant));
        }
    }
    assert!("cv-to-acomm".parse::<Transform>().is_err());
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(120);
    emit(9, "C-homomorphism pullbacks", pass, &detail.join(", "), elapsed);
    assert!(pass);
}

type Op = fn(&[Value]) -> Value;

fn named_ops() -> Vec<(&'static str, usize, Op)> {
    vec![
        ("0", 1, |_| 0),
        ("1", 1, |_| 1),
        ("AND", 2, |a| a[0] & a[1]),
        ("OR", 2, |a| a[0] | a[1]),
        ("MAJ", 3, |a| (a[0] & a[1]) | (a[1] & a[2]) | (a[0] & a[2])),
        ("MIN", 3, |a| a[0] ^ a[1] ^ a[2]),
    ]
}

fn closed_under(c: &Constraint, arity: usize, f: Op) -> bool {
    let acc = c.accepted();
    let set: HashSet<&Tuple> = acc.iter().collect();
    let m = acc.len();
    let mut idx = vec![0usize; arity];
    loop {
        let img: Tuple = (0..c.arity()).map(|p| f(&idx.iter().map(|&r| acc[r][p]).collect::<Vec<_>>())).collect();
        if !set.contains(&img) {
            return false;
        }
        let mut i = 0;
        loop {
            if i == arity {
                return true;
            }
            idx[i] += 1;
            if idx[i] < m {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

fn oracle_preserving(gamma: &[Constraint]) -> Vec<&'static str> {
    named_ops().into_iter().filter(|&(_, a, f)| gamma.iter().all(|c| closed_under(c, a, f))).map(|(n, _, _)| n).collect()
}

#[test]
fn criterion_10_schaefer_classifier() {
    let start = Instant::now();
    let mut rng = rng_from_seed(10);
    let mut cases: Vec<(String, Vec<Constraint>, Complexity)> = vec![
        ("ONE3".into(), vec![Constraint::one_in_three([0, 1, 2])], Complexity::NpComplete),
        ("NEQ2".into(), vec![Constraint::neq(2, 0, 1).unwrap()], Complexity::P),
        ("EQ2".into(), vec![Constraint::eq(2, 0, 1).unwrap()], Complexity::P),
    ];
    for t in 0..20 {
        let mut gamma = Vec::new();
        for _ in 0..3 {
            let pos = rng.random_range(0..3usize);
            let positive = rng.random_bool(0.7);
            let neg: Vec<bool> = (0..3).map(|i| i != pos || !positive).collect();
            gamma.push(
                Constraint::from_predicate(2, vec![0, 1, 2], |x| (0..3).any(|i| if neg[i] { x[i] == 0 } else { x[i] == 1 }))
                    .unwrap(),
            );
        }
        cases.push((format!("Horn {t}"), gamma, Complexity::P));
        let b0: Value = rng.random_range(0..2);
        let b1: Value = rng.random_range(0..2);
        cases.push((
            format!("parity {t}"),
            vec![
                Constraint::from_predicate(2, vec![0, 1, 2], |x| x[0] ^ x[1] ^ x[2] == b0).unwrap(),
                Constraint::from_predicate(2, vec![0, 1], |x| x[0] ^ x[1] == b1).unwrap(),
            ],
            Complexity::P,
        ));
    }
    let mut ok = 0;
    for (name, gamma, want) in &cases {
        let v = classify_boolean(gamma).unwrap();
        let oracle = oracle_preserving(gamma);
        let got: Vec<&str> = v.preserving.iter().map(String::as_str).collect();
        let certified = got == oracle
            && (!name.starts_with("Horn") || got.contains(&"AND"))
            && (!name.starts_with("parity") || got.contains(&"MIN"));
        let violations_ok = v.violations.iter().all(|viol| {
            let c = &gamma[viol.constraint];
            let (_, _, f) = named_ops().into_iter().find(|(n, _, _)| *n == viol.polymorphism).unwrap();
            let img: Tuple = (0..c.arity()).map(|p| f(&viol.counterexample.rows.iter().map(|r| r[p]).collect::<Vec<_>>())).collect();
            viol.counterexample.rows.iter().all(|r| c.contains(r)) && !c.contains(&img)
        });
        if v.verdict == *want && certified && violations_ok {
            ok += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = ok == cases.len() && elapsed < Duration::from_secs(1);
    emit(
        10,
        "Schaefer classifier",
        pass,
        &format!("{ok}/{} languages classified with re-checked certificates (ONE3, NEQ2, EQ2, 20 Horn, 20 parity)", cases.len()),
        elapsed,
    );
    assert!(pass);
}

#[test]
fn distribution_file_is_exact() {
    let s = quantum::one_in_three_pair()
        .with_distribution(QuestionDistribution::Constraints(
            csgames::cs::Distribution::new([(0, ratio(1, 3)), (1, ratio(2, 3))]).unwrap(),
        ))
        .unwrap();
    let text = csgames::cli::serialize_instance(&s);
    assert!(text.contains("\"2\"") && text.contains("\"3\""));
    assert_eq!(csgames::cli::parse_instance(&text).unwrap(), s);
}
