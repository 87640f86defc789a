//! Nonlocal games built from constraint systems: the constraint-constraint,
//! constraint-variable and two-variable (assignment) games, together with an
//! exact classical value optimizer over deterministic strategies.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::cs::{ConstraintSystem, Distribution, Tuple, Value};
use crate::error::{Error, Result};

/// Which construction produced a game.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum GameKind {
    /// Both players receive constraints.
    ConstraintConstraint,
    /// One player receives a constraint, the other a variable of it.
    ConstraintVariable,
    /// Both players receive the two variables of a binary constraint.
    TwoVariable,
    /// Hand-built game.
    Custom,
}

/// The operator family that answers a question in a synchronous strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum QuestionRole {
    /// Answered by the context measurement of constraint `i`.
    Context(usize),
    /// Answered by the measurement of variable `x`.
    Variable(usize),
    /// No strategy operator is attached.
    Other,
}

/// A question with its answer labels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Question {
    pub label: String,
    pub answers: Vec<String>,
    pub role: QuestionRole,
}

/// One weighted question pair with its predicate, stored row-major as
/// `table[a * answers(qb) + b]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GameEntry {
    pub qa: usize,
    pub qb: usize,
    #[serde(serialize_with = "ser_rational")]
    pub weight: BigRational,
    pub table: Vec<bool>,
}

fn ser_rational<S: serde::Serializer>(r: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

/// A two-player game `(I, {O_i}, pi, V)` with a finite question set and the
/// predicate given per question pair. Zero-weight pairs are pruned.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GameSpec {
    pub kind: GameKind,
    pub questions: Vec<Question>,
    pub entries: Vec<GameEntry>,
    pub synchronous: bool,
}

impl GameSpec {
    /// Validates table sizes, total weight one, and the synchronous
    /// condition `V(a,b|i,i) = 0` for `a != b` when the flag is set.
    pub fn new(kind: GameKind, questions: Vec<Question>, entries: Vec<GameEntry>, synchronous: bool) -> Result<Self> {
        let entries: Vec<GameEntry> = entries.into_iter().filter(|e| !e.weight.is_zero()).collect();
        let mut total = BigRational::zero();
        for e in &entries {
            if e.qa >= questions.len() || e.qb >= questions.len() {
                return Err(Error::Invalid(format!("entry ({}, {}) names a missing question", e.qa, e.qb)));
            }
            if e.weight.is_negative() {
                return Err(Error::Invalid(format!("negative weight on ({}, {})", e.qa, e.qb)));
            }
            let size = questions[e.qa].answers.len() * questions[e.qb].answers.len();
            if e.table.len() != size {
                return Err(Error::Invalid(format!(
                    "predicate table for ({}, {}) has {} cells, expected {size}",
                    e.qa,
                    e.qb,
                    e.table.len()
                )));
            }
            if synchronous && e.qa == e.qb {
                let n = questions[e.qa].answers.len();
                if (0..n).any(|a| (0..n).any(|b| a != b && e.table[a * n + b])) {
                    return Err(Error::Invalid(format!("question {} accepts unequal answers against itself", e.qa)));
                }
            }
            total += e.weight.clone();
        }
        if !total.is_one() {
            return Err(Error::Invalid(format!("game weights sum to {total}, not 1")));
        }
        Ok(GameSpec { kind, questions, entries, synchronous })
    }

    /// Number of answers to question `q`.
    pub fn answers(&self, q: usize) -> usize {
        self.questions[q].answers.len()
    }

    /// The predicate `V(a, b | qa, qb)` of one entry.
    pub fn accepts(&self, entry: &GameEntry, a: usize, b: usize) -> bool {
        entry.table[a * self.answers(entry.qb) + b]
    }

    /// The question distribution, summing entries on the same pair.
    pub fn distribution(&self) -> Result<Distribution<(usize, usize)>> {
        Distribution::new(self.entries.iter().map(|e| ((e.qa, e.qb), e.weight.clone())))
    }

    /// Value of a deterministic strategy pair, exactly.
    pub fn value_of(&self, alice: &[usize], bob: &[usize]) -> BigRational {
        self.entries
            .iter()
            .filter(|e| self.accepts(e, alice[e.qa], bob[e.qb]))
            .map(|e| e.weight.clone())
            .sum()
    }

    /// The same game with question `q` renamed to `perm[q]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<GameSpec> {
        let n = self.questions.len();
        let distinct: BTreeSet<usize> = perm.iter().copied().collect();
        if perm.len() != n || distinct.len() != n || perm.iter().any(|&p| p >= n) {
            return Err(Error::Invalid("relabeling is not a permutation of the questions".into()));
        }
        let mut questions = self.questions.clone();
        for (q, &p) in perm.iter().enumerate() {
            questions[p] = self.questions[q].clone();
        }
        let entries = self
            .entries
            .iter()
            .map(|e| GameEntry { qa: perm[e.qa], qb: perm[e.qb], weight: e.weight.clone(), table: e.table.clone() })
            .collect();
        GameSpec::new(self.kind, questions, entries, self.synchronous)
    }
}

fn tuple_label(t: &[Value]) -> String {
    t.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn context_question(s: &ConstraintSystem, i: usize) -> Question {
    let c = &s.constraints()[i];
    let vars: Vec<&str> = c.context().iter().map(|&v| s.var_name(v)).collect();
    Question {
        label: format!("C{i}[{}]", vars.join(",")),
        answers: c.accepted().iter().map(|t| tuple_label(t)).collect(),
        role: QuestionRole::Context(i),
    }
}

fn value_answers(k: u8) -> Vec<String> {
    (0..k).map(|a| a.to_string()).collect()
}

/// The constraint-constraint game: both players receive constraints
/// `(i, j) ~ pi`, answer accepted tuples, and win when they agree on
/// `V_i ∩ V_j`.
pub fn cc_game(s: &ConstraintSystem, pi: &Distribution<(usize, usize)>) -> Result<GameSpec> {
    let m = s.constraints().len();
    let questions: Vec<Question> = (0..m).map(|i| context_question(s, i)).collect();
    let mut entries = Vec::new();
    for (&(i, j), w) in pi.iter() {
        if i >= m || j >= m {
            return Err(Error::Invalid(format!("distribution pair ({i}, {j}) names a missing constraint")));
        }
        let (ci, cj) = (&s.constraints()[i], &s.constraints()[j]);
        let overlap: Vec<(usize, usize)> = ci
            .context()
            .iter()
            .enumerate()
            .filter_map(|(p, v)| cj.position(*v).map(|q| (p, q)))
            .collect();
        let mut table = Vec::with_capacity(ci.len() * cj.len());
        for phi in ci.accepted() {
            for psi in cj.accepted() {
                table.push(overlap.iter().all(|&(p, q)| phi[p] == psi[q]));
            }
        }
        entries.push(GameEntry { qa: i, qb: j, weight: w.clone(), table });
    }
    GameSpec::new(GameKind::ConstraintConstraint, questions, entries, true)
}

/// Index of the variable question `(i, x)` in a constraint-variable game.
pub fn cv_variable_question(s: &ConstraintSystem, i: usize, x: usize) -> Option<usize> {
    let m = s.constraints().len();
    let before: usize = s.constraints()[..i].iter().map(|c| c.arity()).sum();
    s.constraints()[i].position(x).map(|p| m + before + p)
}

fn cv_questions(s: &ConstraintSystem) -> Vec<Question> {
    let m = s.constraints().len();
    let mut questions: Vec<Question> = (0..m).map(|i| context_question(s, i)).collect();
    for (i, c) in s.constraints().iter().enumerate() {
        for &x in c.context() {
            questions.push(Question {
                label: format!("({i},{})", s.var_name(x)),
                answers: value_answers(s.k()),
                role: QuestionRole::Variable(x),
            });
        }
    }
    questions
}

fn cv_table(c: &crate::cs::Constraint, p: usize, k: u8) -> Vec<bool> {
    let mut table = Vec::with_capacity(c.len() * k as usize);
    for phi in c.accepted() {
        for a in 0..k {
            table.push(phi[p] == a);
        }
    }
    table
}

fn transpose(table: &[bool], rows: usize, cols: usize) -> Vec<bool> {
    let mut out = vec![false; table.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = table[r * cols + c];
        }
    }
    out
}

/// The constraint-variable game: the first player receives constraint
/// `i ~ pi'` and answers `phi ∈ C_i`; the second receives `(i, x)` with `x`
/// uniform in `V_i` and answers `a`; they win iff `a = phi(x)`.
pub fn cv_game(s: &ConstraintSystem, pi: &Distribution<usize>) -> Result<GameSpec> {
    let mut entries = Vec::new();
    for (&i, w) in pi.iter() {
        let c = s.constraints().get(i).ok_or_else(|| Error::Invalid(format!("missing constraint {i}")))?;
        let share = w / BigRational::from_integer(BigInt::from(c.arity()));
        for (p, &x) in c.context().iter().enumerate() {
            let q = cv_variable_question(s, i, x).expect("x is in the context");
            entries.push(GameEntry { qa: i, qb: q, weight: share.clone(), table: cv_table(c, p, s.k()) });
        }
    }
    GameSpec::new(GameKind::ConstraintVariable, cv_questions(s), entries, false)
}

/// The symmetrized constraint-variable game: with probability `1 - c` the
/// verifier plays the asymmetric game with the two roles assigned by a fair
/// coin, and with probability `c` it sends the same constraint to both
/// players and checks equality.
pub fn cv_game_symmetric(s: &ConstraintSystem, pi: &Distribution<usize>, c: &BigRational) -> Result<GameSpec> {
    if c.is_negative() || c > &BigRational::one() {
        return Err(Error::Invalid(format!("consistency mass {c} is outside [0, 1]")));
    }
    let half = (BigRational::one() - c) / BigRational::from_integer(BigInt::from(2));
    let mut entries = Vec::new();
    for (&i, w) in pi.iter() {
        let con = s.constraints().get(i).ok_or_else(|| Error::Invalid(format!("missing constraint {i}")))?;
        let share = w / BigRational::from_integer(BigInt::from(con.arity())) * half.clone();
        for (p, &x) in con.context().iter().enumerate() {
            let q = cv_variable_question(s, i, x).expect("x is in the context");
            let table = cv_table(con, p, s.k());
            let back = transpose(&table, con.len(), s.k() as usize);
            entries.push(GameEntry { qa: i, qb: q, weight: share.clone(), table });
            entries.push(GameEntry { qa: q, qb: i, weight: share.clone(), table: back });
        }
        let n = con.len();
        let eq = (0..n * n).map(|t| t / n == t % n).collect();
        entries.push(GameEntry { qa: i, qb: i, weight: w * c, table: eq });
    }
    GameSpec::new(GameKind::ConstraintVariable, cv_questions(s), entries, true)
}

/// The assignment game of a two-variable constraint system: constraint
/// `i ~ pi'` on `{x, y}` is asked as `(x, y)` or `(y, x)` with probability
/// one half each, and the players win iff their answers form an accepted
/// pair.
pub fn twocs_game(s: &ConstraintSystem, pi: &Distribution<usize>) -> Result<GameSpec> {
    let k = s.k() as usize;
    let questions = s
        .variables()
        .iter()
        .map(|v| Question { label: v.name.clone(), answers: value_answers(s.k()), role: QuestionRole::Variable(v.id) })
        .collect();
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let mut entries = Vec::new();
    for (&i, w) in pi.iter() {
        let c = s.constraints().get(i).ok_or_else(|| Error::Invalid(format!("missing constraint {i}")))?;
        if c.arity() != 2 {
            return Err(Error::PreconditionViolated(format!("constraint {i} has {} variables, not 2", c.arity())));
        }
        let (x, y) = (c.context()[0], c.context()[1]);
        let table: Vec<bool> = (0..k * k).map(|t| c.contains(&[(t / k) as u8, (t % k) as u8])).collect();
        let back = transpose(&table, k, k);
        entries.push(GameEntry { qa: x, qb: y, weight: w * &half, table });
        entries.push(GameEntry { qa: y, qb: x, weight: w * &half, table: back });
    }
    GameSpec::new(GameKind::TwoVariable, questions, entries, true)
}

/// Exact classical optimum of a game.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClassicalValue {
    #[serde(serialize_with = "ser_rational")]
    pub value: BigRational,
    /// Optimal first-player answers, one per question (0 for unused ones).
    pub alice: Vec<usize>,
    /// Optimal second-player answers.
    pub bob: Vec<usize>,
    /// Optimum over single shared functions, for synchronous games.
    #[serde(serialize_with = "ser_opt_rational")]
    pub synchronous_value: Option<BigRational>,
    pub synchronous_strategy: Option<Vec<usize>>,
}

fn ser_opt_rational<S: serde::Serializer>(r: &Option<BigRational>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match r {
        Some(r) => s.serialize_some(&r.to_string()),
        None => s.serialize_none(),
    }
}

/// Integer weights over a common denominator.
fn scaled_weights(g: &GameSpec) -> Result<(Vec<i128>, BigInt)> {
    let mut denom = BigInt::one();
    for e in &g.entries {
        denom = denom.lcm(e.weight.denom());
    }
    let ws = g
        .entries
        .iter()
        .map(|e| {
            (e.weight.numer() * (&denom / e.weight.denom()))
                .to_i128()
                .ok_or_else(|| Error::Invalid("game weights are too fine for exact enumeration".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((ws, denom))
}

fn space(g: &GameSpec, qs: &[usize]) -> u128 {
    qs.iter().fold(1u128, |acc, &q| acc.saturating_mul(g.answers(q) as u128))
}

/// Advances a mixed-radix counter; false once it wraps around.
fn advance(f: &mut [usize], qs: &[usize], g: &GameSpec) -> bool {
    for &q in qs {
        f[q] += 1;
        if f[q] < g.answers(q) {
            return true;
        }
        f[q] = 0;
    }
    false
}

/// Exact classical value: enumerates the deterministic strategies of the
/// player with the smaller strategy space and lets the other best-respond
/// question by question. For synchronous games the single-function optimum
/// is reported as well when its space is within `bound`.
pub fn classical_value(g: &GameSpec, bound: u128) -> Result<ClassicalValue> {
    let (ws, denom) = scaled_weights(g)?;
    let n = g.questions.len();
    let alice_qs: Vec<usize> = g.entries.iter().map(|e| e.qa).collect::<BTreeSet<_>>().into_iter().collect();
    let bob_qs: Vec<usize> = g.entries.iter().map(|e| e.qb).collect::<BTreeSet<_>>().into_iter().collect();
    let (sa, sb) = (space(g, &alice_qs), space(g, &bob_qs));
    let enumerate_alice = sa <= sb;
    let needed = sa.min(sb);
    if needed > bound {
        return Err(Error::SearchBoundExceeded { needed, bound });
    }
    let (fixed_qs, free_qs) = if enumerate_alice { (&alice_qs, &bob_qs) } else { (&bob_qs, &alice_qs) };
    let mut by_free: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (t, e) in g.entries.iter().enumerate() {
        by_free.entry(if enumerate_alice { e.qb } else { e.qa }).or_default().push(t);
    }
    let mut f = vec![0usize; n];
    let mut best: Option<(i128, Vec<usize>, Vec<usize>)> = None;
    loop {
        let mut total = 0i128;
        let mut resp = vec![0usize; n];
        for &q in free_qs.iter() {
            let mut best_here = (i128::MIN, 0usize);
            for b in 0..g.answers(q) {
                let s: i128 = by_free[&q]
                    .iter()
                    .filter(|&&t| {
                        let e = &g.entries[t];
                        if enumerate_alice {
                            g.accepts(e, f[e.qa], b)
                        } else {
                            g.accepts(e, b, f[e.qb])
                        }
                    })
                    .map(|&t| ws[t])
                    .sum();
                if s > best_here.0 {
                    best_here = (s, b);
                }
            }
            total += best_here.0;
            resp[q] = best_here.1;
        }
        if best.as_ref().is_none_or(|b| total > b.0) {
            best = Some((total, f.clone(), resp));
        }
        if !advance(&mut f, fixed_qs, g) {
            break;
        }
    }
    let (num, fa, fb) = best.expect("at least one strategy");
    let (alice, bob) = if enumerate_alice { (fa, fb) } else { (fb, fa) };
    let value = BigRational::new(BigInt::from(num), denom.clone());
    let (synchronous_value, synchronous_strategy) = if g.synchronous {
        let all: Vec<usize> = alice_qs.iter().chain(bob_qs.iter()).copied().collect::<BTreeSet<_>>().into_iter().collect();
        if space(g, &all) <= bound {
            let (v, f) = synchronous_optimum(g, &ws, &all);
            (Some(BigRational::new(BigInt::from(v), denom)), Some(f))
        } else {
            (None, None)
        }
    } else {
        (None, None)
    };
    Ok(ClassicalValue { value, alice, bob, synchronous_value, synchronous_strategy })
}

fn synchronous_optimum(g: &GameSpec, ws: &[i128], qs: &[usize]) -> (i128, Vec<usize>) {
    let mut f = vec![0usize; g.questions.len()];
    let mut best = (i128::MIN, f.clone());
    loop {
        let total: i128 = g
            .entries
            .iter()
            .zip(ws)
            .filter(|(e, _)| g.accepts(e, f[e.qa], f[e.qb]))
            .map(|(_, w)| *w)
            .sum();
        if total > best.0 {
            best = (total, f.clone());
        }
        if !advance(&mut f, qs, g) {
            break;
        }
    }
    best
}

/// The `C`-diagonal-dominance test `pi(a,a) >= C sum_b pi(a,b)` and
/// `pi(a,a) >= C sum_b pi(b,a)` for every question in the support.
pub fn is_diagonally_dominant(pi: &Distribution<(usize, usize)>, c: &BigRational) -> bool {
    let qs: BTreeSet<usize> = pi.iter().flat_map(|(&(a, b), _)| [a, b]).collect();
    is_diagonally_dominant_on(pi, c, &qs.into_iter().collect::<Vec<_>>())
}

/// Diagonal dominance restricted to the listed questions.
pub fn is_diagonally_dominant_on(pi: &Distribution<(usize, usize)>, c: &BigRational, questions: &[usize]) -> bool {
    let mut row: BTreeMap<usize, BigRational> = BTreeMap::new();
    let mut col: BTreeMap<usize, BigRational> = BTreeMap::new();
    for (&(a, b), w) in pi.iter() {
        *row.entry(a).or_insert_with(BigRational::zero) += w.clone();
        *col.entry(b).or_insert_with(BigRational::zero) += w.clone();
    }
    questions.iter().all(|a| {
        let diag = pi.weight(&(*a, *a));
        let r = row.get(a).cloned().unwrap_or_else(BigRational::zero);
        let cl = col.get(a).cloned().unwrap_or_else(BigRational::zero);
        diag >= c * r && diag >= c * cl
    })
}

/// Answers of a global assignment in each game question: the restricted
/// tuple index for context questions and the value for variable questions.
pub fn assignment_strategy(g: &GameSpec, s: &ConstraintSystem, global: &[Value]) -> Option<Vec<usize>> {
    g.questions
        .iter()
        .map(|q| match q.role {
            QuestionRole::Context(i) => {
                let c = &s.constraints()[i];
                let t: Tuple = c.context().iter().map(|&v| global[v]).collect();
                c.accepted().iter().position(|a| *a == t)
            }
            QuestionRole::Variable(x) => Some(global[x] as usize),
            QuestionRole::Other => Some(0),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cs::{ratio, Constraint};

    fn coloring(n: usize, edges: &[(usize, usize)]) -> ConstraintSystem {
        let cs = edges.iter().map(|&(a, b)| Constraint::neq(3, a, b).unwrap()).collect();
        ConstraintSystem::with_default_names(3, n, cs).unwrap()
    }

    fn k4() -> ConstraintSystem {
        coloring(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
    }

    #[test]
    fn triangle_coloring_value_one() {
        let s = coloring(3, &[(0, 1), (1, 2), (0, 2)]);
        let g = twocs_game(&s, &s.constraint_distribution().unwrap()).unwrap();
        let v = classical_value(&g, 1 << 20).unwrap();
        assert_eq!(v.value, BigRational::one());
        assert_eq!(v.synchronous_value, Some(BigRational::one()));
    }

    #[test]
    fn k4_synchronous_value_is_five_sixths() {
        let s = k4();
        let g = twocs_game(&s, &s.constraint_distribution().unwrap()).unwrap();
        let v = classical_value(&g, 1 << 20).unwrap();
        assert_eq!(v.synchronous_value, Some(ratio(5, 6)));
        assert_eq!(v.value, BigRational::one());
    }

    #[test]
    fn cc_game_disjoint_constraints_always_win() {
        let s = ConstraintSystem::with_default_names(
            2,
            4,
            vec![Constraint::neq(2, 0, 1).unwrap(), Constraint::neq(2, 2, 3).unwrap()],
        )
        .unwrap();
        let pi = Distribution::new([((0, 1), ratio(1, 1))]).unwrap();
        let g = cc_game(&s, &pi).unwrap();
        assert!(g.entries[0].table.iter().all(|&b| b));
    }

    #[test]
    fn cc_game_same_constraint_is_equality() {
        let s = ConstraintSystem::with_default_names(3, 2, vec![Constraint::neq(3, 0, 1).unwrap()]).unwrap();
        let pi = Distribution::new([((0, 0), ratio(1, 1))]).unwrap();
        let g = cc_game(&s, &pi).unwrap();
        let n = g.answers(0);
        for a in 0..n {
            for b in 0..n {
                assert_eq!(g.entries[0].table[a * n + b], a == b);
            }
        }
    }

    #[test]
    fn cv_game_weights_and_one3_all_zero_answer() {
        let s = ConstraintSystem::with_default_names(2, 3, vec![Constraint::one_in_three([0, 1, 2])]).unwrap();
        let pi = s.constraint_distribution().unwrap();
        let g = cv_game(&s, &pi).unwrap();
        assert_eq!(g.entries.len(), 3);
        assert!(g.entries.iter().all(|e| e.weight == ratio(1, 3)));
        let mut alice = vec![0; g.questions.len()];
        let bob = vec![0; g.questions.len()];
        let mut total = BigRational::zero();
        for phi in 0..3 {
            alice[0] = phi;
            total += g.value_of(&alice, &bob);
        }
        assert_eq!(total / BigRational::from_integer(3.into()), ratio(2, 3));
    }

    #[test]
    fn cv_game_two_variable_masses() {
        let s = ConstraintSystem::with_default_names(2, 2, vec![Constraint::neq(2, 0, 1).unwrap()]).unwrap();
        let g = cv_game(&s, &s.constraint_distribution().unwrap()).unwrap();
        assert_eq!(g.entries.len(), 2);
        assert!(g.entries.iter().all(|e| e.weight == ratio(1, 2)));
        assert_eq!(classical_value(&g, 1 << 20).unwrap().value, BigRational::one());
    }

    #[test]
    fn symmetric_cv_game_is_synchronous() {
        let s = ConstraintSystem::with_default_names(2, 3, vec![Constraint::one_in_three([0, 1, 2])]).unwrap();
        let g = cv_game_symmetric(&s, &s.constraint_distribution().unwrap(), &ratio(1, 4)).unwrap();
        assert!(g.synchronous);
        let v = classical_value(&g, 1 << 20).unwrap();
        assert_eq!(v.synchronous_value, Some(BigRational::one()));
    }

    #[test]
    fn unsatisfiable_cc_game_below_one() {
        let s = ConstraintSystem::with_default_names(
            2,
            2,
            vec![Constraint::eq(2, 0, 1).unwrap(), Constraint::neq(2, 0, 1).unwrap()],
        )
        .unwrap();
        let pi = Distribution::uniform([(0, 0), (0, 1), (1, 0), (1, 1)]).unwrap();
        let g = cc_game(&s, &pi).unwrap();
        let v = classical_value(&g, 1 << 20).unwrap();
        assert!(v.synchronous_value.unwrap() < BigRational::one());
    }

    #[test]
    fn diagonal_dominance_examples() {
        let id = Distribution::uniform([(0, 0), (1, 1)]).unwrap();
        assert!(is_diagonally_dominant(&id, &BigRational::one()));
        let off = Distribution::uniform([(0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1)]).unwrap();
        assert!(!is_diagonally_dominant(&off, &ratio(1, 2)));
    }

    #[test]
    fn relabel_preserves_value() {
        let s = k4();
        let g = twocs_game(&s, &s.constraint_distribution().unwrap()).unwrap();
        let h = g.relabel(&[2, 0, 3, 1]).unwrap();
        let (a, b) = (classical_value(&g, 1 << 20).unwrap(), classical_value(&h, 1 << 20).unwrap());
        assert_eq!(a.value, b.value);
        assert_eq!(a.synchronous_value, b.synchronous_value);
    }

    #[test]
    fn synchronous_flag_rejects_unequal_diagonal() {
        let q = Question { label: "q".into(), answers: vec!["0".into(), "1".into()], role: QuestionRole::Other };
        let e = GameEntry { qa: 0, qb: 0, weight: BigRational::one(), table: vec![true; 4] };
        assert!(GameSpec::new(GameKind::Custom, vec![q], vec![e], true).is_err());
    }

    #[test]
    fn search_bound_is_enforced() {
        let s = k4();
        let g = twocs_game(&s, &s.constraint_distribution().unwrap()).unwrap();
        assert!(matches!(classical_value(&g, 10), Err(Error::SearchBoundExceeded { .. })));
    }
}
