//! Polymorphisms, preservation checks, and the boolean dichotomy
//! classifier, plus a bounded search for weak near-unanimity polymorphisms
//! over arbitrary alphabets.

use serde::{Deserialize, Serialize};

use crate::cs::{space_size, Constraint, Tuple, TupleIter, Value};
use crate::error::{Error, Result};

/// A function `Z_k^arity -> Z_k` stored as a table indexed by the
/// lexicographic rank of its argument tuple.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Polymorphism {
    name: String,
    k: u8,
    arity: usize,
    table: Vec<Value>,
}

/// Rank of a tuple in the lexicographic order of `Z_k^n`.
fn rank(k: u8, args: &[Value]) -> usize {
    args.iter().fold(0usize, |acc, &a| acc * k as usize + a as usize)
}

impl Polymorphism {
    /// Builds a polymorphism from its full table.
    pub fn new(name: impl Into<String>, k: u8, arity: usize, table: Vec<Value>) -> Result<Self> {
        let size = space_size(k, arity);
        if table.len() as u128 != size {
            return Err(Error::Invalid(format!("table has {} entries, expected {size}", table.len())));
        }
        if table.iter().any(|&v| v >= k) {
            return Err(Error::Invalid("table value outside the alphabet".into()));
        }
        Ok(Polymorphism { name: name.into(), k, arity, table })
    }

    /// Builds a polymorphism by evaluating `f` on every argument tuple.
    pub fn from_fn(name: impl Into<String>, k: u8, arity: usize, f: impl Fn(&[Value]) -> Value) -> Self {
        let table = TupleIter::new(k, arity).map(|t| f(&t)).collect();
        Polymorphism::new(name, k, arity, table).expect("function values lie in the alphabet")
    }

    /// The constant-0 polymorphism of arity 0.
    pub fn zero() -> Self {
        Polymorphism::from_fn("0", 2, 0, |_| 0)
    }

    /// The constant-1 polymorphism of arity 0.
    pub fn one() -> Self {
        Polymorphism::from_fn("1", 2, 0, |_| 1)
    }

    /// Binary conjunction.
    pub fn and() -> Self {
        Polymorphism::from_fn("AND", 2, 2, |a| a[0] & a[1])
    }

    /// Binary disjunction.
    pub fn or() -> Self {
        Polymorphism::from_fn("OR", 2, 2, |a| a[0] | a[1])
    }

    /// Ternary majority `(a∧b)∨(b∧c)∨(c∧a)`.
    pub fn maj() -> Self {
        Polymorphism::from_fn("MAJ", 2, 3, |a| (a[0] & a[1]) | (a[1] & a[2]) | (a[2] & a[0]))
    }

    /// Ternary minority `a⊕b⊕c`.
    pub fn min() -> Self {
        Polymorphism::from_fn("MIN", 2, 3, |a| a[0] ^ a[1] ^ a[2])
    }

    /// The six named boolean polymorphisms in the order 0, 1, AND, OR, MAJ, MIN.
    pub fn boolean_named() -> Vec<Polymorphism> {
        vec![Self::zero(), Self::one(), Self::and(), Self::or(), Self::maj(), Self::min()]
    }

    /// The projection onto argument `i`.
    pub fn projection(k: u8, arity: usize, i: usize) -> Self {
        Polymorphism::from_fn(format!("pi{i}/{arity}"), k, arity, move |a| a[i])
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn k(&self) -> u8 {
        self.k
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn table(&self) -> &[Value] {
        &self.table
    }

    /// Evaluates on one argument tuple.
    pub fn eval(&self, args: &[Value]) -> Value {
        self.table[rank(self.k, args)]
    }

    /// Componentwise application to `arity` tuples of equal length.
    /// For arity zero the output length must be supplied by `width`.
    pub fn apply(&self, rows: &[Tuple], width: usize) -> Result<Tuple> {
        if rows.len() != self.arity {
            return Err(Error::Invalid(format!("expected {} rows, got {}", self.arity, rows.len())));
        }
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::Invalid("rows must all have the given width".into()));
        }
        let mut args = vec![0; self.arity];
        Ok((0..width)
            .map(|col| {
                for (a, r) in args.iter_mut().zip(rows) {
                    *a = r[col];
                }
                self.eval(&args)
            })
            .collect())
    }

    /// Checks preservation of `c` over all `|C|^arity` row tuples in
    /// lexicographic order of row indices, returning the first violation.
    pub fn preserves(&self, c: &Constraint) -> Result<Preservation> {
        if c.k() != self.k {
            return Err(Error::AlphabetMismatch { expected: self.k, found: c.k() });
        }
        let rows = c.accepted();
        let m = rows.len() as u8;
        let width = c.arity();
        if rows.len() > u8::MAX as usize {
            return Err(Error::Invalid("constraint too large for row enumeration".into()));
        }
        for idx in TupleIter::new(m.max(1), self.arity) {
            let chosen: Vec<Tuple> = idx.iter().map(|&i| rows[i as usize].clone()).collect();
            let image = self.apply(&chosen, width)?;
            if !c.contains(&image) {
                return Ok(Preservation { holds: false, counterexample: Some(Counterexample { rows: chosen, image }) });
            }
        }
        Ok(Preservation { holds: true, counterexample: None })
    }

    /// True when `f(b,a,...,a) = f(a,b,a,...,a) = ... = f(a,...,a,b)` for
    /// all `a, b`.
    pub fn is_weak_near_unanimity(&self) -> bool {
        for a in 0..self.k {
            for b in 0..self.k {
                let vals: Vec<Value> = (0..self.arity)
                    .map(|p| {
                        let mut args = vec![a; self.arity];
                        args[p] = b;
                        self.eval(&args)
                    })
                    .collect();
                if vals.windows(2).any(|w| w[0] != w[1]) {
                    return false;
                }
            }
        }
        true
    }
}

/// Result of a preservation check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Preservation {
    pub holds: bool,
    pub counterexample: Option<Counterexample>,
}

/// Rows of an accepted set whose image lies outside it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub rows: Vec<Tuple>,
    pub image: Tuple,
}

/// Complexity class of a boolean constraint language.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Complexity {
    P,
    NpComplete,
}

/// A violated named polymorphism together with the offending constraint.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub polymorphism: String,
    pub constraint: usize,
    pub counterexample: Counterexample,
}

/// Verdict of the boolean dichotomy with certificates: every named
/// polymorphism preserving the whole language (P case) and one violation
/// per named polymorphism that fails.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DichotomyVerdict {
    pub verdict: Complexity,
    pub preserving: Vec<String>,
    pub violations: Vec<Violation>,
}

/// Classifies a boolean constraint language by the six named polymorphisms.
pub fn classify_boolean(gamma: &[Constraint]) -> Result<DichotomyVerdict> {
    if let Some(c) = gamma.iter().find(|c| c.k() != 2) {
        return Err(Error::AlphabetMismatch { expected: 2, found: c.k() });
    }
    let mut preserving = Vec::new();
    let mut violations = Vec::new();
    for f in Polymorphism::boolean_named() {
        let mut failed = None;
        for (i, c) in gamma.iter().enumerate() {
            let p = f.preserves(c)?;
            if let Some(cx) = p.counterexample {
                failed = Some(Violation { polymorphism: f.name().to_string(), constraint: i, counterexample: cx });
                break;
            }
        }
        match failed {
            Some(v) => violations.push(v),
            None => preserving.push(f.name().to_string()),
        }
    }
    let verdict = if preserving.is_empty() { Complexity::NpComplete } else { Complexity::P };
    Ok(DichotomyVerdict { verdict, preserving, violations })
}

/// Outcome of the bounded weak near-unanimity search.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WnuSearch {
    /// A preserving weak near-unanimity was found.
    Found(Polymorphism),
    /// None exists up to the arity bound; this is not a hardness proof.
    Inconclusive { max_arity: usize },
}

/// Searches for a weak near-unanimity polymorphism preserving every
/// constraint of `gamma`, of arity at most `max_arity`. Boolean named
/// polymorphisms are tried first (MAJ, MIN, AND, OR, 0, 1), then constants,
/// then a complete backtracking search over tables of arity 2 to
/// `max_arity`.
pub fn has_wnu_homomorphism_smallarity(gamma: &[Constraint], max_arity: usize) -> Result<WnuSearch> {
    let k = match gamma.first() {
        Some(c) => c.k(),
        None => return Ok(WnuSearch::Found(Polymorphism::projection(2, 1, 0))),
    };
    if let Some(c) = gamma.iter().find(|c| c.k() != k) {
        return Err(Error::AlphabetMismatch { expected: k, found: c.k() });
    }
    let preserves_all = |f: &Polymorphism| -> Result<bool> {
        for c in gamma {
            if !f.preserves(c)?.holds {
                return Ok(false);
            }
        }
        Ok(true)
    };
    if k == 2 {
        let named = [
            Polymorphism::maj(),
            Polymorphism::min(),
            Polymorphism::and(),
            Polymorphism::or(),
            Polymorphism::zero(),
            Polymorphism::one(),
        ];
        for f in named.into_iter().filter(|f| f.arity() <= max_arity) {
            if preserves_all(&f)? {
                return Ok(WnuSearch::Found(f));
            }
        }
    }
    for a in 0..k {
        let f = Polymorphism::from_fn(format!("const{a}"), k, 0, move |_| a);
        if preserves_all(&f)? {
            return Ok(WnuSearch::Found(f));
        }
    }
    for arity in 2..=max_arity {
        if let Some(table) = search_wnu_table(gamma, k, arity) {
            let f = Polymorphism::new(format!("wnu{arity}"), k, arity, table)?;
            debug_assert!(f.is_weak_near_unanimity());
            return Ok(WnuSearch::Found(f));
        }
    }
    Ok(WnuSearch::Inconclusive { max_arity })
}

/// Backtracking search for a WNU table of the given arity preserving gamma.
/// Table entries are merged into classes by the WNU equalities; each
/// preservation requirement becomes a relation on class variables.
fn search_wnu_table(gamma: &[Constraint], k: u8, arity: usize) -> Option<Vec<Value>> {
    let size = space_size(k, arity) as usize;
    let mut class_of: Vec<usize> = (0..size).collect();
    let mut parent: Vec<usize> = (0..size).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let nxt = p[y];
            p[y] = r;
            y = nxt;
        }
        r
    }
    for a in 0..k {
        for b in 0..k {
            let first = {
                let mut args = vec![a; arity];
                args[0] = b;
                rank(k, &args)
            };
            for p in 1..arity {
                let mut args = vec![a; arity];
                args[p] = b;
                let (x, y) = (find(&mut parent, first), find(&mut parent, rank(k, &args)));
                parent[x] = y;
            }
        }
    }
    let mut reps: Vec<usize> = Vec::new();
    for (i, c) in class_of.iter_mut().enumerate() {
        let r = find(&mut parent, i);
        *c = match reps.iter().position(|&x| x == r) {
            Some(p) => p,
            None => {
                reps.push(r);
                reps.len() - 1
            }
        };
    }
    let nclasses = reps.len();
    let mut relations: Vec<(usize, Vec<usize>)> = Vec::new();
    for (ci, c) in gamma.iter().enumerate() {
        let rows = c.accepted();
        for idx in TupleIter::new(rows.len() as u8, arity) {
            let vars: Vec<usize> = (0..c.arity())
                .map(|col| {
                    let args: Vec<Value> = idx.iter().map(|&i| rows[i as usize][col]).collect();
                    class_of[rank(k, &args)]
                })
                .collect();
            relations.push((ci, vars));
        }
    }
    relations.sort();
    relations.dedup();
    let mut touching = vec![Vec::new(); nclasses];
    for (ri, (_, vars)) in relations.iter().enumerate() {
        for &v in vars {
            if touching[v].last() != Some(&ri) {
                touching[v].push(ri);
            }
        }
    }
    let mut assign: Vec<Option<Value>> = vec![None; nclasses];
    fn ok(gamma: &[Constraint], rel: &(usize, Vec<usize>), assign: &[Option<Value>]) -> bool {
        let partial: Vec<Option<Value>> = rel.1.iter().map(|&v| assign[v]).collect();
        let found = gamma[rel.0].consistent_with(&partial).next().is_some();
        found
    }
    fn dfs(
        v: usize,
        k: u8,
        gamma: &[Constraint],
        relations: &[(usize, Vec<usize>)],
        touching: &[Vec<usize>],
        assign: &mut Vec<Option<Value>>,
    ) -> bool {
        if v == assign.len() {
            return true;
        }
        for a in 0..k {
            assign[v] = Some(a);
            if touching[v].iter().all(|&r| ok(gamma, &relations[r], assign))
                && dfs(v + 1, k, gamma, relations, touching, assign)
            {
                return true;
            }
        }
        assign[v] = None;
        false
    }
    if dfs(0, k, gamma, &relations, &touching, &mut assign) {
        Some(class_of.iter().map(|&c| assign[c].unwrap_or(0)).collect())
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one3() -> Constraint {
        Constraint::one_in_three([0, 1, 2])
    }

    #[test]
    fn apply_examples() {
        let rows = vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]];
        assert_eq!(Polymorphism::maj().apply(&rows, 3).unwrap(), vec![0, 0, 0]);
        let zeros = vec![vec![0, 0]; 3];
        assert_eq!(Polymorphism::min().apply(&zeros, 2).unwrap(), vec![0, 0]);
        assert_eq!(Polymorphism::or().apply(&[vec![0, 1], vec![1, 0]], 2).unwrap(), vec![1, 1]);
        assert_eq!(Polymorphism::zero().apply(&[], 4).unwrap(), vec![0; 4]);
    }

    #[test]
    fn preservation_examples() {
        let p = Polymorphism::maj().preserves(&one3()).unwrap();
        assert!(!p.holds);
        let cx = p.counterexample.unwrap();
        assert_eq!(cx.rows, vec![vec![0, 0, 1], vec![0, 1, 0], vec![1, 0, 0]]);
        assert_eq!(cx.image, vec![0, 0, 0]);
        let neq = Constraint::neq(2, 0, 1).unwrap();
        assert!(Polymorphism::maj().preserves(&neq).unwrap().holds);
        assert!(!Polymorphism::zero().preserves(&one3()).unwrap().holds);
        assert!(Polymorphism::zero().preserves(&one3().negate_at(&[2]).unwrap()).unwrap().holds);
        let c3 = Constraint::neq(3, 0, 1).unwrap();
        assert!(matches!(Polymorphism::maj().preserves(&c3), Err(Error::AlphabetMismatch { .. })));
    }

    #[test]
    fn wnu_examples() {
        assert!(Polymorphism::maj().is_weak_near_unanimity());
        assert!(Polymorphism::min().is_weak_near_unanimity());
        assert!(Polymorphism::and().is_weak_near_unanimity());
        assert!(!Polymorphism::projection(2, 2, 0).is_weak_near_unanimity());
    }

    #[test]
    fn classify_examples() {
        let v = classify_boolean(&[one3()]).unwrap();
        assert_eq!(v.verdict, Complexity::NpComplete);
        assert_eq!(v.violations.len(), 6);
        let v = classify_boolean(&[Constraint::neq(2, 0, 1).unwrap()]).unwrap();
        assert_eq!(v.verdict, Complexity::P);
        assert!(v.preserving.contains(&"MAJ".to_string()));
        let v = classify_boolean(&[Constraint::full(2, vec![0, 1]).unwrap()]).unwrap();
        assert_eq!(v.preserving.len(), 6);
    }

    #[test]
    fn wnu_search_examples() {
        let neq3 = Constraint::neq(3, 0, 1).unwrap();
        assert_eq!(
            has_wnu_homomorphism_smallarity(&[neq3], 3).unwrap(),
            WnuSearch::Inconclusive { max_arity: 3 }
        );
        match has_wnu_homomorphism_smallarity(&[Constraint::eq(2, 0, 1).unwrap()], 3).unwrap() {
            WnuSearch::Found(f) => assert_eq!(f.name(), "MAJ"),
            other => panic!("unexpected {other:?}"),
        }
        let full = Constraint::full(3, vec![0, 1]).unwrap();
        assert!(matches!(has_wnu_homomorphism_smallarity(&[full], 3).unwrap(), WnuSearch::Found(_)));
    }

    #[test]
    fn generic_search_finds_nontrivial_wnu() {
        // Strict order on Z_3 has no constant polymorphism but is preserved
        // by the binary minimum.
        let lt = Constraint::from_predicate(3, vec![0, 1], |t| t[0] < t[1]).unwrap();
        let gamma = [lt];
        match has_wnu_homomorphism_smallarity(&gamma, 2).unwrap() {
            WnuSearch::Found(f) => {
                assert_eq!(f.arity(), 2);
                assert!(f.is_weak_near_unanimity());
                for c in &gamma {
                    assert!(f.preserves(c).unwrap().holds);
                }
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
