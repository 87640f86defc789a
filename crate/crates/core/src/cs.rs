//! Constraints, constraint systems, assignments, and the classical
//! transformations on them: pushforwards along variable maps, restriction,
//! negation, boolean form, and exhaustive satisfiability search.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single symbol of the alphabet `Z_k`.
pub type Value = u8;

/// An assignment to an ordered context, one value per position.
pub type Tuple = Vec<Value>;

/// Default bound on the number of candidate assignments visited by
/// exhaustive searches.
pub const DEFAULT_SEARCH_BOUND: u128 = 1 << 24;

/// The alphabet `Z_k`, identified with `{0, ..., k-1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Alphabet {
    k: u8,
}

impl Alphabet {
    /// Creates `Z_k`; requires `k >= 2`.
    pub fn new(k: u8) -> Result<Self> {
        if k < 2 {
            return Err(Error::Invalid(format!("alphabet size must be at least 2, got {k}")));
        }
        Ok(Alphabet { k })
    }

    /// The boolean alphabet `Z_2`.
    pub fn boolean() -> Self {
        Alphabet { k: 2 }
    }

    /// Number of symbols.
    pub fn k(&self) -> u8 {
        self.k
    }

    /// The primitive root of unity `exp(2 pi i a / k)` as a `(re, im)` pair.
    pub fn omega_pow(&self, a: i64) -> (f64, f64) {
        let theta = 2.0 * std::f64::consts::PI * (a.rem_euclid(self.k as i64) as f64) / self.k as f64;
        (theta.cos(), theta.sin())
    }
}

/// A variable of a constraint system: an id in the global order plus a
/// display name.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Variable {
    pub id: usize,
    pub name: String,
}

/// Iterator over all tuples of `Z_k^n` in lexicographic order.
#[derive(Clone, Debug)]
pub struct TupleIter {
    k: u8,
    current: Option<Tuple>,
}

impl TupleIter {
    pub fn new(k: u8, n: usize) -> Self {
        TupleIter { k, current: Some(vec![0; n]) }
    }
}

impl Iterator for TupleIter {
    type Item = Tuple;

    fn next(&mut self) -> Option<Tuple> {
        let out = self.current.clone()?;
        let mut next = out.clone();
        let mut pos = next.len();
        loop {
            if pos == 0 {
                self.current = None;
                break;
            }
            pos -= 1;
            if next[pos] + 1 < self.k {
                next[pos] += 1;
                for v in next.iter_mut().skip(pos + 1) {
                    *v = 0;
                }
                self.current = Some(next);
                break;
            }
        }
        Some(out)
    }
}

/// Returns `k^n` as a `u128`, saturating on overflow.
pub fn space_size(k: u8, n: usize) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..n {
        acc = acc.saturating_mul(k as u128);
    }
    acc
}

/// A constraint `(V, C)`: an ordered context of variable ids and a
/// non-empty, sorted, duplicate-free set of accepted tuples.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "ConstraintRepr", into = "ConstraintRepr")]
pub struct Constraint {
    k: u8,
    context: Vec<usize>,
    accepted: Vec<Tuple>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintRepr {
    k: u8,
    context: Vec<usize>,
    accepted: Vec<Tuple>,
}

impl TryFrom<ConstraintRepr> for Constraint {
    type Error = Error;

    fn try_from(r: ConstraintRepr) -> Result<Self> {
        Constraint::new(r.k, r.context, r.accepted)
    }
}

impl From<Constraint> for ConstraintRepr {
    fn from(c: Constraint) -> Self {
        ConstraintRepr { k: c.k, context: c.context, accepted: c.accepted }
    }
}

impl Constraint {
    /// Builds a constraint, validating the tuple lengths, symbol range,
    /// distinct context, and non-emptiness. Accepted tuples are sorted and
    /// deduplicated.
    pub fn new(k: u8, context: Vec<usize>, accepted: Vec<Tuple>) -> Result<Self> {
        Alphabet::new(k)?;
        let distinct: BTreeSet<usize> = context.iter().copied().collect();
        if distinct.len() != context.len() {
            return Err(Error::Invalid(format!("context {context:?} repeats a variable")));
        }
        for t in &accepted {
            if t.len() != context.len() {
                return Err(Error::Invalid(format!(
                    "tuple {t:?} has length {} but the context has {} variables",
                    t.len(),
                    context.len()
                )));
            }
            if let Some(v) = t.iter().find(|&&v| v >= k) {
                return Err(Error::Invalid(format!("value {v} in tuple {t:?} is outside Z_{k}")));
            }
        }
        let mut accepted = accepted;
        accepted.sort();
        accepted.dedup();
        if accepted.is_empty() {
            return Err(Error::EmptyConstraint(format!("no accepted tuples on context {context:?}")));
        }
        Ok(Constraint { k, context, accepted })
    }

    /// The full ("empty") constraint `Z_k^V`, which accepts everything.
    pub fn full(k: u8, context: Vec<usize>) -> Result<Self> {
        let n = context.len();
        Constraint::new(k, context, TupleIter::new(k, n).collect())
    }

    /// The constraint of all tuples satisfying `pred`.
    pub fn from_predicate(k: u8, context: Vec<usize>, pred: impl Fn(&[Value]) -> bool) -> Result<Self> {
        let n = context.len();
        Constraint::new(k, context, TupleIter::new(k, n).filter(|t| pred(t)).collect())
    }

    /// The 1-in-3 constraint `{(1,0,0),(0,1,0),(0,0,1)}`.
    pub fn one_in_three(context: [usize; 3]) -> Self {
        Constraint::new(2, context.to_vec(), vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]])
            .expect("ONE3 is well formed")
    }

    /// Inequality `x != y` over `Z_k`.
    pub fn neq(k: u8, x: usize, y: usize) -> Result<Self> {
        Constraint::from_predicate(k, vec![x, y], |t| t[0] != t[1])
    }

    /// Equality `x = y` over `Z_k`.
    pub fn eq(k: u8, x: usize, y: usize) -> Result<Self> {
        Constraint::from_predicate(k, vec![x, y], |t| t[0] == t[1])
    }

    /// Alphabet size.
    pub fn k(&self) -> u8 {
        self.k
    }

    /// Ordered context.
    pub fn context(&self) -> &[usize] {
        &self.context
    }

    /// Sorted accepted tuples.
    pub fn accepted(&self) -> &[Tuple] {
        &self.accepted
    }

    /// Number of context variables.
    pub fn arity(&self) -> usize {
        self.context.len()
    }

    /// Number of accepted tuples.
    pub fn len(&self) -> usize {
        self.accepted.len()
    }

    /// Always false: constraints are non-empty by construction.
    pub fn is_empty(&self) -> bool {
        self.accepted.is_empty()
    }

    /// True when every tuple of `Z_k^V` is accepted.
    pub fn is_full(&self) -> bool {
        self.accepted.len() as u128 == space_size(self.k, self.arity())
    }

    /// Position of `var` in the context.
    pub fn position(&self, var: usize) -> Option<usize> {
        self.context.iter().position(|&v| v == var)
    }

    /// Membership test for a tuple over the context.
    pub fn contains(&self, t: &[Value]) -> bool {
        self.accepted.binary_search_by(|a| a.as_slice().cmp(t)).is_ok()
    }

    /// Evaluates the constraint on an assignment defined on its context.
    pub fn eval(&self, phi: &Assignment) -> Result<bool> {
        let t = self.context.iter().map(|&v| phi.get(v)).collect::<Result<Tuple>>()?;
        Ok(self.contains(&t))
    }

    /// Evaluates the constraint on a global assignment indexed by variable id.
    pub fn satisfied_by(&self, global: &[Value]) -> bool {
        let t: Tuple = self.context.iter().map(|&v| global[v]).collect();
        self.contains(&t)
    }

    /// Same accepted set on a different context of equal length.
    pub fn relabel(&self, context: Vec<usize>) -> Result<Self> {
        if context.len() != self.arity() {
            return Err(Error::Invalid(format!(
                "relabel needs {} variables, got {}",
                self.arity(),
                context.len()
            )));
        }
        Constraint::new(self.k, context, self.accepted.clone())
    }

    /// The pushforward `r_* C = { phi : phi o r in C }` over the target
    /// context of `r`.
    pub fn pushforward(&self, r: &VarMap) -> Result<Constraint> {
        r.check_for(self)?;
        let n = r.target.len();
        let index: BTreeMap<usize, usize> = r.target.iter().enumerate().map(|(i, &w)| (w, i)).collect();
        let mut accepted = Vec::new();
        let mut pulled = vec![0u8; self.arity()];
        for phi in TupleIter::new(self.k, n) {
            for (slot, img) in r.images.iter().enumerate() {
                pulled[slot] = match *img {
                    Target::Var(w) => phi[index[&w]],
                    Target::Neg(w) => 1 - phi[index[&w]],
                    Target::Const(a) => a,
                };
            }
            if self.contains(&pulled) {
                accepted.push(phi);
            }
        }
        Constraint::new(self.k, r.target.clone(), accepted)
            .map_err(|_| Error::EmptyConstraint("pushforward has no accepted tuples".into()))
    }

    /// The restriction `C|_U`, with `U` given as an ordered list of context
    /// variables.
    pub fn restrict(&self, sub: &[usize]) -> Result<Constraint> {
        let pos = sub
            .iter()
            .map(|&v| self.position(v).ok_or(Error::MissingVariable(v)))
            .collect::<Result<Vec<_>>>()?;
        let accepted = self.accepted.iter().map(|t| pos.iter().map(|&p| t[p]).collect()).collect();
        Constraint::new(self.k, sub.to_vec(), accepted)
    }

    /// The restriction to a set of context positions, keeping context order.
    pub fn restrict_positions(&self, positions: &[usize]) -> Result<Constraint> {
        let vars: Vec<usize> = positions.iter().map(|&p| self.context[p]).collect();
        self.restrict(&vars)
    }

    /// The negation `C_{not U}`: every accepted tuple flipped on `U`.
    pub fn negate_at(&self, u: &[usize]) -> Result<Constraint> {
        if self.k != 2 {
            return Err(Error::NegationOnNonBoolean(self.k));
        }
        let pos = u
            .iter()
            .map(|&v| self.position(v).ok_or(Error::MissingVariable(v)))
            .collect::<Result<Vec<_>>>()?;
        let accepted = self
            .accepted
            .iter()
            .map(|t| {
                let mut t = t.clone();
                for &p in &pos {
                    t[p] ^= 1;
                }
                t
            })
            .collect();
        Constraint::new(2, self.context.clone(), accepted)
    }

    /// Negation at every variable of the context.
    pub fn negate_all(&self) -> Result<Constraint> {
        let all = self.context.clone();
        self.negate_at(&all)
    }

    /// Accepted tuples consistent with a partial assignment to the context.
    pub fn consistent_with<'a>(&'a self, partial: &'a [Option<Value>]) -> impl Iterator<Item = &'a Tuple> + 'a {
        self.accepted
            .iter()
            .filter(move |t| t.iter().zip(partial).all(|(v, p)| p.map_or(true, |p| p == *v)))
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} ∈ {{", self.context)?;
        for (i, t) in self.accepted.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "(")?;
            for (j, v) in t.iter().enumerate() {
                if j > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{v}")?;
            }
            write!(f, ")")?;
        }
        write!(f, "}}")
    }
}

/// A (partial) assignment of values to variable ids.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    values: BTreeMap<usize, Value>,
}

impl Assignment {
    pub fn new() -> Self {
        Assignment::default()
    }

    /// Assignment on a context from a tuple.
    pub fn from_tuple(context: &[usize], t: &[Value]) -> Self {
        Assignment { values: context.iter().copied().zip(t.iter().copied()).collect() }
    }

    /// Assignment from a global vector indexed by variable id.
    pub fn from_global(global: &[Value]) -> Self {
        Assignment { values: global.iter().copied().enumerate().collect() }
    }

    pub fn set(&mut self, var: usize, value: Value) {
        self.values.insert(var, value);
    }

    pub fn get(&self, var: usize) -> Result<Value> {
        self.values.get(&var).copied().ok_or(Error::MissingVariable(var))
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, Value)> + '_ {
        self.values.iter().map(|(&k, &v)| (k, v))
    }
}

/// Image of a source variable under a variable map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Target {
    /// Sent to target variable `w`.
    Var(usize),
    /// Sent to the negation of target variable `w` (boolean only).
    Neg(usize),
    /// Sent to a constant symbol.
    Const(Value),
}

impl Target {
    /// The variable referenced by this image, if any.
    pub fn var(&self) -> Option<usize> {
        match *self {
            Target::Var(w) | Target::Neg(w) => Some(w),
            Target::Const(_) => None,
        }
    }

    /// Composes with a map on target variables.
    pub fn then(&self, s: &VarMap) -> Result<Target> {
        match *self {
            Target::Const(a) => Ok(Target::Const(a)),
            Target::Var(w) => s.image_of(w),
            Target::Neg(w) => Ok(match s.image_of(w)? {
                Target::Var(u) => Target::Neg(u),
                Target::Neg(u) => Target::Var(u),
                Target::Const(a) => Target::Const(1 - a),
            }),
        }
    }
}

/// An augmented variable map `r: V -> W ∪ ¬W ∪ Z_k`, given by one image
/// per source context position, together with an explicit target context.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarMap {
    source: Vec<usize>,
    images: Vec<Target>,
    target: Vec<usize>,
}

impl VarMap {
    /// A map whose target context is the sorted set of variables hit.
    pub fn new(source: Vec<usize>, images: Vec<Target>) -> Result<Self> {
        let target: BTreeSet<usize> = images.iter().filter_map(Target::var).collect();
        VarMap::with_target(source, images, target.into_iter().collect())
    }

    /// A map with an explicit target context, which may contain variables
    /// not hit by any image.
    pub fn with_target(source: Vec<usize>, images: Vec<Target>, target: Vec<usize>) -> Result<Self> {
        if source.len() != images.len() {
            return Err(Error::Invalid(format!(
                "map has {} sources but {} images",
                source.len(),
                images.len()
            )));
        }
        let tset: BTreeSet<usize> = target.iter().copied().collect();
        if tset.len() != target.len() {
            return Err(Error::Invalid("target context repeats a variable".into()));
        }
        if let Some(w) = images.iter().filter_map(Target::var).find(|w| !tset.contains(w)) {
            return Err(Error::Invalid(format!("image variable {w} is not in the target context")));
        }
        Ok(VarMap { source, images, target })
    }

    /// The identity map on a context.
    pub fn identity(context: &[usize]) -> Self {
        VarMap {
            source: context.to_vec(),
            images: context.iter().map(|&v| Target::Var(v)).collect(),
            target: context.to_vec(),
        }
    }

    pub fn source(&self) -> &[usize] {
        &self.source
    }

    pub fn images(&self) -> &[Target] {
        &self.images
    }

    pub fn target(&self) -> &[usize] {
        &self.target
    }

    /// Image of the source variable `v`.
    pub fn image_of(&self, v: usize) -> Result<Target> {
        self.source
            .iter()
            .position(|&s| s == v)
            .map(|p| self.images[p])
            .ok_or(Error::MissingVariable(v))
    }

    /// True when the map negates some variable.
    pub fn uses_negation(&self) -> bool {
        self.images.iter().any(|t| matches!(t, Target::Neg(_)))
    }

    /// True when the map sends some variable to a constant.
    pub fn uses_constants(&self) -> bool {
        self.images.iter().any(|t| matches!(t, Target::Const(_)))
    }

    /// The composite `s o r` (first `self`, then `s`), with target context
    /// that of `s`.
    pub fn then(&self, s: &VarMap) -> Result<VarMap> {
        let images = self.images.iter().map(|t| t.then(s)).collect::<Result<Vec<_>>>()?;
        VarMap::with_target(self.source.clone(), images, s.target.clone())
    }

    fn check_for(&self, c: &Constraint) -> Result<()> {
        if self.source != c.context {
            return Err(Error::Invalid(format!(
                "map source {:?} does not match context {:?}",
                self.source, c.context
            )));
        }
        for t in &self.images {
            match *t {
                Target::Neg(_) if c.k != 2 => return Err(Error::NegationOnNonBoolean(c.k)),
                Target::Const(a) if a >= c.k => {
                    return Err(Error::AlphabetMismatch { expected: c.k, found: a.saturating_add(1) })
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// A probability distribution over questions with exact rational weights.
/// Zero-weight questions are not stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Distribution<Q: Ord> {
    weights: BTreeMap<Q, BigRational>,
}

impl<Q: Ord + Clone + fmt::Debug> Distribution<Q> {
    /// Validates non-negativity and total mass one. Repeated questions are
    /// summed.
    pub fn new(entries: impl IntoIterator<Item = (Q, BigRational)>) -> Result<Self> {
        let mut weights: BTreeMap<Q, BigRational> = BTreeMap::new();
        for (q, w) in entries {
            if w.is_negative() {
                return Err(Error::Invalid(format!("negative weight {w} on {q:?}")));
            }
            *weights.entry(q).or_insert_with(BigRational::zero) += w;
        }
        weights.retain(|_, w| !w.is_zero());
        let total: BigRational = weights.values().cloned().sum();
        if !total.is_one() {
            return Err(Error::Invalid(format!("distribution weights sum to {total}, not 1")));
        }
        Ok(Distribution { weights })
    }

    /// Uniform distribution over the given questions.
    pub fn uniform(qs: impl IntoIterator<Item = Q>) -> Result<Self> {
        let qs: Vec<Q> = qs.into_iter().collect();
        if qs.is_empty() {
            return Err(Error::Invalid("uniform distribution over no questions".into()));
        }
        let w = BigRational::new(BigInt::one(), BigInt::from(qs.len()));
        Distribution::new(qs.into_iter().map(|q| (q, w.clone())))
    }

    /// Weight of a question (zero when absent).
    pub fn weight(&self, q: &Q) -> BigRational {
        self.weights.get(q).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Weight as a float.
    pub fn weight_f64(&self, q: &Q) -> f64 {
        self.weights.get(q).map(rat_to_f64).unwrap_or(0.0)
    }

    /// Support with weights, in question order.
    pub fn iter(&self) -> impl Iterator<Item = (&Q, &BigRational)> {
        self.weights.iter()
    }

    /// Number of questions with positive weight.
    pub fn support_len(&self) -> usize {
        self.weights.len()
    }
}

impl Distribution<(usize, usize)> {
    /// True when `pi(a,b) = pi(b,a)` for all pairs.
    pub fn is_symmetric(&self) -> bool {
        self.weights.iter().all(|(&(a, b), w)| self.weight(&(b, a)) == *w)
    }

    /// Row marginal `a -> sum_b pi(a,b)`.
    pub fn row_marginal(&self) -> Distribution<usize> {
        let mut m: BTreeMap<usize, BigRational> = BTreeMap::new();
        for (&(a, _), w) in &self.weights {
            *m.entry(a).or_insert_with(BigRational::zero) += w.clone();
        }
        Distribution { weights: m }
    }
}

/// Converts an exact rational to the nearest float.
pub fn rat_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// `num/den` as a rational.
pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Question distribution attached to a constraint system: over constraint
/// indices (`pi'`) or over ordered pairs of indices (`pi`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum QuestionDistribution {
    Constraints(Distribution<usize>),
    Pairs(Distribution<(usize, usize)>),
}

/// A constraint system: alphabet, ordered variable table, constraints, and
/// an optional question distribution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintSystem {
    alphabet: Alphabet,
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    distribution: Option<QuestionDistribution>,
}

impl ConstraintSystem {
    /// Builds a system; every constraint must use alphabet `k` and only
    /// variables of the table.
    pub fn new(k: u8, names: Vec<String>, constraints: Vec<Constraint>) -> Result<Self> {
        let alphabet = Alphabet::new(k)?;
        let names_set: BTreeSet<&String> = names.iter().collect();
        if names_set.len() != names.len() {
            return Err(Error::Invalid("variable names must be distinct".into()));
        }
        for (i, c) in constraints.iter().enumerate() {
            if c.k() != k {
                return Err(Error::AlphabetMismatch { expected: k, found: c.k() });
            }
            if let Some(&v) = c.context().iter().find(|&&v| v >= names.len()) {
                return Err(Error::Invalid(format!("constraint {i} uses unknown variable id {v}")));
            }
        }
        let variables = names.into_iter().enumerate().map(|(id, name)| Variable { id, name }).collect();
        Ok(ConstraintSystem { alphabet, variables, constraints, distribution: None })
    }

    /// Variables named `x0, x1, ...`.
    pub fn with_default_names(k: u8, n: usize, constraints: Vec<Constraint>) -> Result<Self> {
        ConstraintSystem::new(k, (0..n).map(|i| format!("x{i}")).collect(), constraints)
    }

    /// Attaches a question distribution, validating its support.
    pub fn with_distribution(mut self, d: QuestionDistribution) -> Result<Self> {
        let m = self.constraints.len();
        let ok = match &d {
            QuestionDistribution::Constraints(p) => p.iter().all(|(&i, _)| i < m),
            QuestionDistribution::Pairs(p) => p.iter().all(|(&(i, j), _)| i < m && j < m),
        };
        if !ok {
            return Err(Error::Invalid("distribution refers to a missing constraint".into()));
        }
        self.distribution = Some(d);
        Ok(self)
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn k(&self) -> u8 {
        self.alphabet.k()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn distribution(&self) -> Option<&QuestionDistribution> {
        self.distribution.as_ref()
    }

    /// Id of a variable by name.
    pub fn var_id(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Name of a variable id.
    pub fn var_name(&self, id: usize) -> &str {
        &self.variables[id].name
    }

    /// The constraint distribution `pi'`: the attached one, the row marginal
    /// of an attached pair distribution, or uniform.
    pub fn constraint_distribution(&self) -> Result<Distribution<usize>> {
        match &self.distribution {
            Some(QuestionDistribution::Constraints(p)) => Ok(p.clone()),
            Some(QuestionDistribution::Pairs(p)) => Ok(p.row_marginal()),
            None => Distribution::uniform(0..self.constraints.len()),
        }
    }

    /// True when a global assignment satisfies every constraint.
    pub fn satisfies(&self, global: &[Value]) -> bool {
        global.len() == self.num_variables() && self.constraints.iter().all(|c| c.satisfied_by(global))
    }

    /// Exhaustive satisfiability with a satisfying witness. The search is
    /// refused when `k^|X|` exceeds `bound`.
    pub fn is_satisfiable(&self, bound: u128) -> Result<Option<Vec<Value>>> {
        let needed = space_size(self.k(), self.num_variables());
        if needed > bound {
            return Err(Error::SearchBoundExceeded { needed, bound });
        }
        Ok(self.solve_with(&[]))
    }

    /// Complete backtracking search for a satisfying assignment extending the
    /// given fixed values. Constraints are checked for a consistent accepted
    /// tuple after every assignment step.
    pub fn solve_with(&self, fixed: &[(usize, Value)]) -> Option<Vec<Value>> {
        Solver::new(self).solve(fixed)
    }

    /// Maximum over assignments of the `pi'`-weighted satisfied mass.
    pub fn max_satisfying_fraction(&self, pi: &Distribution<usize>, bound: u128) -> Result<BigRational> {
        let needed = space_size(self.k(), self.num_variables());
        if needed > bound {
            return Err(Error::SearchBoundExceeded { needed, bound });
        }
        let mut denom = BigInt::one();
        for (_, w) in pi.iter() {
            denom = num_integer_lcm(&denom, w.denom());
        }
        let scaled: Vec<(usize, BigInt)> =
            pi.iter().map(|(&i, w)| (i, w.numer() * (&denom / w.denom()))).collect();
        let small: Option<Vec<(usize, u64)>> = scaled.iter().map(|(i, w)| w.to_u64().map(|w| (*i, w))).collect();
        let best = match small {
            Some(small) => {
                let mut best: u128 = 0;
                for phi in TupleIter::new(self.k(), self.num_variables()) {
                    let s: u128 = small
                        .iter()
                        .filter(|(i, _)| self.constraints[*i].satisfied_by(&phi))
                        .map(|(_, w)| *w as u128)
                        .sum();
                    best = best.max(s);
                }
                BigInt::from(best)
            }
            None => {
                let mut best = BigInt::zero();
                for phi in TupleIter::new(self.k(), self.num_variables()) {
                    let s: BigInt = scaled
                        .iter()
                        .filter(|(i, _)| self.constraints[*i].satisfied_by(&phi))
                        .map(|(_, w)| w.clone())
                        .sum();
                    if s > best {
                        best = s;
                    }
                }
                best
            }
        };
        Ok(BigRational::new(best, denom))
    }

    /// The boolean form `B(S)`: indicator variables `(x,a)` with id
    /// `x*k + a`, and constraints `C'_i = { phi' : phi in C_i }` where
    /// `phi'(x,a) = [phi(x) = a]`.
    pub fn boolean_form(&self) -> ConstraintSystem {
        let k = self.k() as usize;
        let names = self
            .variables
            .iter()
            .flat_map(|v| (0..k).map(move |a| format!("({},{})", v.name, a)))
            .collect();
        let constraints = self
            .constraints
            .iter()
            .map(|c| {
                let context = c.context().iter().flat_map(|&x| (0..k).map(move |a| x * k + a)).collect();
                let accepted = c.accepted().iter().map(|t| one_hot(t, k as u8)).collect();
                Constraint::new(2, context, accepted).expect("boolean form of a valid constraint")
            })
            .collect();
        ConstraintSystem {
            alphabet: Alphabet::boolean(),
            variables: names_to_vars(names),
            constraints,
            distribution: self.distribution.clone(),
        }
    }

    /// Appends a variable and returns its id.
    pub fn push_variable(&mut self, name: String) -> Result<usize> {
        if self.var_id(&name).is_some() {
            return Err(Error::Invalid(format!("variable {name} already exists")));
        }
        let id = self.variables.len();
        self.variables.push(Variable { id, name });
        Ok(id)
    }

    /// Appends a constraint and returns its index. Any attached distribution
    /// is dropped.
    pub fn push_constraint(&mut self, c: Constraint) -> Result<usize> {
        if c.k() != self.k() {
            return Err(Error::AlphabetMismatch { expected: self.k(), found: c.k() });
        }
        if let Some(&v) = c.context().iter().find(|&&v| v >= self.num_variables()) {
            return Err(Error::Invalid(format!("unknown variable id {v}")));
        }
        self.distribution = None;
        self.constraints.push(c);
        Ok(self.constraints.len() - 1)
    }

    /// Largest context size `L`.
    pub fn max_arity(&self) -> usize {
        self.constraints.iter().map(Constraint::arity).max().unwrap_or(0)
    }
}

/// Encodes a tuple over `Z_k` as concatenated one-hot blocks.
pub fn one_hot(t: &[Value], k: u8) -> Tuple {
    t.iter().flat_map(|&v| (0..k).map(move |a| u8::from(a == v))).collect()
}

fn names_to_vars(names: Vec<String>) -> Vec<Variable> {
    names.into_iter().enumerate().map(|(id, name)| Variable { id, name }).collect()
}

fn num_integer_lcm(a: &BigInt, b: &BigInt) -> BigInt {
    use num_integer::Integer;
    a.lcm(b)
}

struct Solver<'a> {
    cs: &'a ConstraintSystem,
    order: Vec<usize>,
    touching: Vec<Vec<usize>>,
}

impl<'a> Solver<'a> {
    fn new(cs: &'a ConstraintSystem) -> Self {
        let n = cs.num_variables();
        let mut touching = vec![Vec::new(); n];
        for (i, c) in cs.constraints().iter().enumerate() {
            for &v in c.context() {
                touching[v].push(i);
            }
        }
        Solver { cs, order: Vec::new(), touching }
    }

    fn solve(mut self, fixed: &[(usize, Value)]) -> Option<Vec<Value>> {
        let n = self.cs.num_variables();
        let mut assign: Vec<Option<Value>> = vec![None; n];
        for &(v, a) in fixed {
            if v >= n || a >= self.cs.k() {
                return None;
            }
            if assign[v].is_some_and(|b| b != a) {
                return None;
            }
            assign[v] = Some(a);
        }
        let mut seen = vec![false; n];
        for &(v, _) in fixed {
            seen[v] = true;
        }
        for c in self.cs.constraints() {
            for &v in c.context() {
                if !seen[v] {
                    seen[v] = true;
                    self.order.push(v);
                }
            }
        }
        for (v, s) in seen.iter().enumerate() {
            if !s {
                self.order.push(v);
            }
        }
        for &(v, _) in fixed {
            if !self.consistent(&assign, v) {
                return None;
            }
        }
        if self.dfs(&mut assign, 0) {
            Some(assign.into_iter().map(|a| a.unwrap_or(0)).collect())
        } else {
            None
        }
    }

    fn consistent(&self, assign: &[Option<Value>], v: usize) -> bool {
        self.touching[v].iter().all(|&i| {
            let c = &self.cs.constraints()[i];
            let partial: Vec<Option<Value>> = c.context().iter().map(|&x| assign[x]).collect();
            let found = c.consistent_with(&partial).next().is_some();
            found
        })
    }

    fn dfs(&self, assign: &mut Vec<Option<Value>>, depth: usize) -> bool {
        if depth == self.order.len() {
            return true;
        }
        let v = self.order[depth];
        for a in 0..self.cs.k() {
            assign[v] = Some(a);
            if self.consistent(assign, v) && self.dfs(assign, depth + 1) {
                return true;
            }
        }
        assign[v] = None;
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one3() -> Constraint {
        Constraint::one_in_three([0, 1, 2])
    }

    #[test]
    fn eval_one_in_three() {
        let c = one3();
        assert!(c.eval(&Assignment::from_tuple(&[0, 1, 2], &[0, 1, 0])).unwrap());
        assert!(!c.eval(&Assignment::from_tuple(&[0, 1, 2], &[1, 1, 0])).unwrap());
        let partial = Assignment::from_tuple(&[0, 1], &[0, 1]);
        assert_eq!(c.eval(&partial), Err(Error::MissingVariable(2)));
        let full = Constraint::full(2, vec![0, 1]).unwrap();
        for t in TupleIter::new(2, 2) {
            assert!(full.eval(&Assignment::from_tuple(&[0, 1], &t)).unwrap());
        }
    }

    #[test]
    fn pushforward_identification_and_constants() {
        let c = one3();
        let r = VarMap::new(vec![0, 1, 2], vec![Target::Var(5), Target::Var(5), Target::Var(7)]).unwrap();
        let p = c.pushforward(&r).unwrap();
        assert_eq!(p.context(), &[5, 7]);
        assert_eq!(p.accepted(), &[vec![0, 1]]);
        let r = VarMap::new(vec![0, 1, 2], vec![Target::Var(0), Target::Var(1), Target::Const(0)]).unwrap();
        let p = c.pushforward(&r).unwrap();
        assert_eq!(p.accepted(), &[vec![0, 1], vec![1, 0]]);
        assert_eq!(c.pushforward(&VarMap::identity(&[0, 1, 2])).unwrap(), c);
    }

    #[test]
    fn pushforward_rejects_bad_maps() {
        let c = Constraint::neq(3, 0, 1).unwrap();
        let r = VarMap::new(vec![0, 1], vec![Target::Neg(0), Target::Var(1)]).unwrap();
        assert_eq!(c.pushforward(&r), Err(Error::NegationOnNonBoolean(3)));
        let r = VarMap::new(vec![0, 1], vec![Target::Const(3), Target::Var(1)]).unwrap();
        assert!(matches!(c.pushforward(&r), Err(Error::AlphabetMismatch { .. })));
    }

    #[test]
    fn restriction_examples() {
        let c = one3();
        assert_eq!(c.restrict(&[0, 1]).unwrap().accepted(), &[vec![0, 0], vec![0, 1], vec![1, 0]]);
        assert_eq!(c.restrict(&[0, 1, 2]).unwrap(), c);
        let eq = Constraint::eq(2, 0, 1).unwrap();
        assert_eq!(eq.restrict(&[0]).unwrap().accepted(), &[vec![0], vec![1]]);
    }

    #[test]
    fn negation_examples() {
        let c = one3();
        let n = c.negate_at(&[2]).unwrap();
        assert_eq!(n.accepted(), &[vec![0, 0, 0], vec![0, 1, 1], vec![1, 0, 1]]);
        assert_eq!(c.negate_at(&[]).unwrap(), c);
        assert_eq!(n.negate_at(&[2]).unwrap(), c);
        let c3 = Constraint::neq(3, 0, 1).unwrap();
        assert_eq!(c3.negate_at(&[0]), Err(Error::NegationOnNonBoolean(3)));
    }

    #[test]
    fn constraint_validation() {
        assert!(Constraint::new(2, vec![0, 0], vec![vec![0, 0]]).is_err());
        assert!(Constraint::new(2, vec![0, 1], vec![vec![0]]).is_err());
        assert!(Constraint::new(2, vec![0, 1], vec![vec![0, 2]]).is_err());
        assert!(matches!(Constraint::new(2, vec![0, 1], vec![]), Err(Error::EmptyConstraint(_))));
        assert!(Constraint::new(1, vec![0], vec![vec![0]]).is_err());
    }

    #[test]
    fn boolean_form_single_variable() {
        let c = Constraint::new(3, vec![0], vec![vec![0], vec![2]]).unwrap();
        let s = ConstraintSystem::with_default_names(3, 1, vec![c]).unwrap();
        let b = s.boolean_form();
        assert_eq!(b.k(), 2);
        assert_eq!(b.constraints()[0].context(), &[0, 1, 2]);
        assert_eq!(b.constraints()[0].accepted(), &[vec![0, 0, 1], vec![1, 0, 0]]);
        assert_eq!(b.var_name(1), "(x0,1)");
    }

    fn k_graph(n: usize, edges: &[(usize, usize)]) -> ConstraintSystem {
        let cs = edges.iter().map(|&(a, b)| Constraint::neq(3, a, b).unwrap()).collect();
        ConstraintSystem::with_default_names(3, n, cs).unwrap()
    }

    #[test]
    fn satisfiability_examples() {
        let tri = k_graph(3, &[(0, 1), (1, 2), (0, 2)]);
        let w = tri.is_satisfiable(DEFAULT_SEARCH_BOUND).unwrap().unwrap();
        assert!(tri.satisfies(&w));
        let k4 = k_graph(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        assert_eq!(k4.is_satisfiable(DEFAULT_SEARCH_BOUND).unwrap(), None);
        assert!(matches!(k4.is_satisfiable(10), Err(Error::SearchBoundExceeded { needed: 81, bound: 10 })));
        let pi = Distribution::uniform(0..6).unwrap();
        assert_eq!(k4.max_satisfying_fraction(&pi, DEFAULT_SEARCH_BOUND).unwrap(), ratio(5, 6));
    }

    #[test]
    fn solver_respects_fixed_values() {
        let tri = k_graph(3, &[(0, 1), (1, 2), (0, 2)]);
        assert_eq!(tri.solve_with(&[(0, 1), (1, 1)]), None);
        let w = tri.solve_with(&[(0, 2), (1, 0)]).unwrap();
        assert_eq!(w, vec![2, 0, 1]);
    }

    #[test]
    fn distribution_validation() {
        assert!(Distribution::new(vec![(0usize, ratio(1, 2))]).is_err());
        assert!(Distribution::new(vec![(0usize, ratio(3, 2)), (1, ratio(-1, 2))]).is_err());
        let d = Distribution::new(vec![(0usize, ratio(1, 2)), (0, ratio(1, 2)), (1, ratio(0, 1))]).unwrap();
        assert_eq!(d.support_len(), 1);
        assert_eq!(d.weight(&0), ratio(1, 1));
    }

    #[test]
    fn varmap_composition() {
        let r = VarMap::new(vec![0, 1, 2], vec![Target::Var(10), Target::Neg(11), Target::Const(1)]).unwrap();
        let s = VarMap::new(vec![10, 11], vec![Target::Neg(20), Target::Const(1)]).unwrap();
        let sr = r.then(&s).unwrap();
        assert_eq!(sr.images(), &[Target::Neg(20), Target::Const(0), Target::Const(1)]);
    }

    #[test]
    fn tuple_iter_counts() {
        assert_eq!(TupleIter::new(3, 0).count(), 1);
        assert_eq!(TupleIter::new(3, 4).count(), 81);
        let v: Vec<_> = TupleIter::new(2, 2).collect();
        assert_eq!(v, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
    }
}
