//! Property tests for serialization round trips, strategy invariants and
//! structural bounds.

use clap::Parser;
use csgames::cli::{self, Cli};
use csgames::cs::{ratio, Constraint, ConstraintSystem, Distribution, QuestionDistribution, Target, Tuple, Value, VarMap};
use csgames::quantum::{self, random_pvm, random_strategy, rng_from_seed, Model};
use csgames::tvf::{self, TvfGraph};
use proptest::prelude::*;

fn constraint_strategy(k: u8, n: usize) -> impl Strategy<Value = Constraint> {
    (1usize..=3.min(n))
        .prop_flat_map(move |a| (Just(a), proptest::sample::subsequence((0..n).collect::<Vec<_>>(), a)))
        .prop_flat_map(move |(a, ctx)| {
            let total = (k as usize).pow(a as u32);
            (Just(ctx), proptest::collection::vec(any::<bool>(), total))
        })
        .prop_filter_map("empty relation", move |(ctx, keep)| {
            Constraint::from_predicate(k, ctx, |t| keep[t.iter().fold(0usize, |acc, &x| acc * k as usize + x as usize)]).ok()
        })
}

fn system_strategy() -> impl Strategy<Value = ConstraintSystem> {
    (2u8..=3, 1usize..=5).prop_flat_map(|(k, n)| {
        proptest::collection::vec(constraint_strategy(k, n), 1..=4)
            .prop_map(move |cs| ConstraintSystem::with_default_names(k, n, cs).unwrap())
    })
}

fn sat(s: &ConstraintSystem) -> bool {
    let n = s.num_variables();
    let k = s.k() as usize;
    (0..k.pow(n as u32)).any(|code| {
        let g: Vec<Value> = (0..n).map(|i| (code / k.pow(i as u32) % k) as Value).collect();
        s.constraints().iter().all(|c| c.contains(&c.context().iter().map(|&v| g[v]).collect::<Tuple>()))
    })
}

fn data(name: &str) -> String {
    format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn instance_round_trip(s in system_strategy(), weights in proptest::collection::vec(1i64..20, 4)) {
        prop_assert_eq!(&cli::parse_instance(&cli::serialize_instance(&s)).unwrap(), &s);
        let m = s.constraints().len();
        let total: i64 = weights[..m].iter().sum();
        let d = Distribution::new((0..m).map(|i| (i, ratio(weights[i], total)))).unwrap();
        let s = s.with_distribution(QuestionDistribution::Constraints(d)).unwrap();
        prop_assert_eq!(&cli::parse_instance(&cli::serialize_instance(&s)).unwrap(), &s);
    }

    #[test]
    fn strategy_round_trip(seed in any::<u64>(), d in 1usize..=4, model in prop_oneof![Just(Model::Cc), Just(Model::Cv), Just(Model::A)]) {
        let st = random_strategy(model, &quantum::triangle_system(), d, seed).unwrap();
        prop_assert_eq!(cli::parse_strategy(&cli::serialize_strategy(&st)).unwrap(), st);
    }

    #[test]
    fn varmap_round_trip(images in proptest::collection::vec((0u8..3, 0usize..4), 1..=5)) {
        let images: Vec<Target> = images
            .into_iter()
            .map(|(kind, w)| match kind {
                0 => Target::Var(w),
                1 => Target::Neg(w),
                _ => Target::Const((w % 2) as Value),
            })
            .collect();
        let r = VarMap::new((0..images.len()).collect(), images).unwrap();
        let text = cli::serialize_varmap(&r, &|v| format!("s{v}"), &|w| format!("t{w}")).to_string();
        let src = |n: &str| n.strip_prefix('s').and_then(|x| x.parse().ok());
        let tgt = |n: &str| n.strip_prefix('t').and_then(|x| x.parse().ok());
        prop_assert_eq!(cli::parse_varmap(&text, &src, &tgt).unwrap(), r);
    }

    #[test]
    fn value_plus_defect_is_one(seed in any::<u64>(), d in 1usize..=5, model in prop_oneof![Just(Model::Cc), Just(Model::Cv), Just(Model::A)]) {
        let s = quantum::triangle_system();
        let st = random_strategy(model, &s, d, seed).unwrap();
        let rep = quantum::defect(&st, &s).unwrap();
        prop_assert!(rep.defect >= -1e-12);
        prop_assert!((rep.value.unwrap() + rep.defect - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn random_measurements_are_projective(seed in any::<u64>(), n in 1usize..=4, d in 1usize..=8) {
        let p = random_pvm(n, d, &mut rng_from_seed(seed));
        prop_assert_eq!(p.projectors.len(), n);
        prop_assert!(p.validate(1e-9).is_ok());
    }

    #[test]
    fn boolean_form_preserves_satisfiability(s in system_strategy().prop_filter("small", |s| s.num_variables() * (s.k() as usize) <= 12)) {
        prop_assert_eq!(sat(&s), sat(&s.boolean_form()));
    }

    #[test]
    fn complete_tvf_graphs_have_few_assignments(n in 1usize..=6, choices in proptest::collection::vec(1u8..=10, 15)) {
        let singles = [1u8, 2, 4, 8];
        let mut pats = Vec::new();
        let mut e = 0;
        for u in 0..n {
            for v in u + 1..n {
                let c = choices[e];
                e += 1;
                let mask = if c <= 4 { singles[c as usize - 1] } else { [3u8, 5, 6, 9, 10, 12][c as usize - 5] };
                for (bit, (a, b)) in [(0, 0), (1, 1), (0, 1), (1, 0)].into_iter().enumerate() {
                    if mask >> bit & 1 == 1 {
                        pats.push((u, a, v, b));
                    }
                }
            }
        }
        let g = TvfGraph::from_patterns((0..n).collect(), pats).unwrap();
        let asg = g.assignments();
        prop_assert!(asg.len() <= n + 1);
        if !asg.is_empty() {
            let c = Constraint::new(2, (0..n).collect(), asg).unwrap();
            prop_assert!(tvf::is_tvf(&c) || n == 1);
        }
    }

    #[test]
    fn reports_are_deterministic(seed in 0u64..1000) {
        let args = |cmd: &[&str]| {
            let mut v = vec!["csg".to_string(), "--seed".into(), seed.to_string(), "--trials".into(), "3".into()];
            v.extend(cmd.iter().map(|s| s.to_string()));
            Cli::try_parse_from(v).unwrap()
        };
        for cmd in [vec!["verify", "inequalities"], vec!["value", "--model", "cc", "--dim", "2"]] {
            let mut cmd = cmd.clone();
            let file = data("one3_chain.json");
            if cmd[0] == "value" {
                cmd.insert(1, &file);
            }
            let a = cli::run(&args(&cmd)).unwrap();
            let b = cli::run(&args(&cmd)).unwrap();
            prop_assert_eq!(a.machine_block(0), b.machine_block(0));
        }
    }
}
