//! Two-variable-falsifiable (TVF) graphs and their structure theory:
//! compression, maximal compression, tableau forms, and the constructive
//! simulations of the 1-in-3 constraint.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::cs::{Constraint, Target, Tuple, TupleIter, Value, VarMap};
use crate::error::{Error, Result};
use crate::schaefer::Polymorphism;

/// A forbidden joint pattern `phi(u) = a and phi(v) = b`.
pub type Pattern = (usize, Value, usize, Value);

/// A boolean TVF graph with undirected `00` and `11` edges and directed
/// `01` edges. Vertices are variable ids; loops are allowed for `00` and
/// `11` edges only.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TvfGraph {
    vertices: Vec<usize>,
    e00: BTreeSet<(usize, usize)>,
    e11: BTreeSet<(usize, usize)>,
    e01: BTreeSet<(usize, usize)>,
}

fn unordered(u: usize, v: usize) -> (usize, usize) {
    (u.min(v), u.max(v))
}

impl TvfGraph {
    /// Builds a graph from forbidden patterns; `01` loops are dropped.
    pub fn from_patterns(vertices: Vec<usize>, patterns: impl IntoIterator<Item = Pattern>) -> Result<Self> {
        let vs: BTreeSet<usize> = vertices.iter().copied().collect();
        if vs.len() != vertices.len() {
            return Err(Error::Invalid("graph vertices repeat".into()));
        }
        let mut g = TvfGraph { vertices, e00: BTreeSet::new(), e11: BTreeSet::new(), e01: BTreeSet::new() };
        for (u, a, v, b) in patterns {
            if !vs.contains(&u) || !vs.contains(&v) || a > 1 || b > 1 {
                return Err(Error::Invalid(format!("bad edge ({u},{a},{v},{b})")));
            }
            match (a, b) {
                (0, 0) => {
                    g.e00.insert(unordered(u, v));
                }
                (1, 1) => {
                    g.e11.insert(unordered(u, v));
                }
                _ if u == v => {}
                (0, 1) => {
                    g.e01.insert((u, v));
                }
                _ => {
                    g.e01.insert((v, u));
                }
            }
        }
        Ok(g)
    }

    /// Builds a graph from explicit edge lists.
    pub fn new(
        vertices: Vec<usize>,
        e00: impl IntoIterator<Item = (usize, usize)>,
        e11: impl IntoIterator<Item = (usize, usize)>,
        e01: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let pats = e00
            .into_iter()
            .map(|(u, v)| (u, 0, v, 0))
            .chain(e11.into_iter().map(|(u, v)| (u, 1, v, 1)))
            .chain(e01.into_iter().map(|(u, v)| (u, 0, v, 1)))
            .collect::<Vec<_>>();
        TvfGraph::from_patterns(vertices, pats)
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn e00(&self) -> &BTreeSet<(usize, usize)> {
        &self.e00
    }

    pub fn e11(&self) -> &BTreeSet<(usize, usize)> {
        &self.e11
    }

    pub fn e01(&self) -> &BTreeSet<(usize, usize)> {
        &self.e01
    }

    /// All forbidden patterns of the graph.
    pub fn patterns(&self) -> Vec<Pattern> {
        self.e00
            .iter()
            .map(|&(u, v)| (u, 0, v, 0))
            .chain(self.e11.iter().map(|&(u, v)| (u, 1, v, 1)))
            .chain(self.e01.iter().map(|&(u, v)| (u, 0, v, 1)))
            .collect()
    }

    /// Number of edges of all three kinds.
    pub fn num_edges(&self) -> usize {
        self.e00.len() + self.e11.len() + self.e01.len()
    }

    /// Forbidden patterns `(phi(u), phi(v))` between two distinct vertices.
    pub fn patterns_between(&self, u: usize, v: usize) -> Vec<(Value, Value)> {
        let mut out = Vec::new();
        if self.e00.contains(&unordered(u, v)) {
            out.push((0, 0));
        }
        if self.e11.contains(&unordered(u, v)) {
            out.push((1, 1));
        }
        if self.e01.contains(&(u, v)) {
            out.push((0, 1));
        }
        if self.e01.contains(&(v, u)) {
            out.push((1, 0));
        }
        out
    }

    /// True when every pair of distinct vertices carries an edge.
    pub fn is_complete(&self) -> bool {
        self.vertices.iter().enumerate().all(|(i, &u)| {
            self.vertices[i + 1..].iter().all(|&v| !self.patterns_between(u, v).is_empty())
        })
    }

    /// True when some vertex carries a `00` or `11` loop.
    pub fn has_loop(&self) -> bool {
        self.e00.iter().chain(self.e11.iter()).any(|&(u, v)| u == v)
    }

    /// True when the graph has no loops and at most one edge per pair.
    pub fn is_simple(&self) -> bool {
        !self.has_loop()
            && self.vertices.iter().enumerate().all(|(i, &u)| {
                self.vertices[i + 1..].iter().all(|&v| self.patterns_between(u, v).len() <= 1)
            })
    }

    /// `C_TVF(G)`: all assignments over the vertex order violating no edge.
    pub fn assignments(&self) -> Vec<Tuple> {
        let pos: BTreeMap<usize, usize> = self.vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let pats: Vec<(usize, Value, usize, Value)> =
            self.patterns().into_iter().map(|(u, a, v, b)| (pos[&u], a, pos[&v], b)).collect();
        TupleIter::new(2, self.vertices.len())
            .filter(|t| pats.iter().all(|&(u, a, v, b)| !(t[u] == a && t[v] == b)))
            .collect()
    }

    /// `C_TVF(G)` as a constraint on the vertex order.
    pub fn as_constraint(&self) -> Result<Constraint> {
        Constraint::new(2, self.vertices.clone(), self.assignments())
    }

    /// The induced subgraph on `sub`, in the given order.
    pub fn induced(&self, sub: &[usize]) -> Result<TvfGraph> {
        let keep: BTreeSet<usize> = sub.iter().copied().collect();
        let pats = self.patterns().into_iter().filter(|&(u, _, v, _)| keep.contains(&u) && keep.contains(&v));
        TvfGraph::from_patterns(sub.to_vec(), pats)
    }

    /// The graph of the negated constraint: every pattern bit at a vertex of
    /// `u` is flipped.
    pub fn negate_at(&self, u: &[usize]) -> TvfGraph {
        let flip: BTreeSet<usize> = u.iter().copied().collect();
        let f = |x: usize, a: Value| if flip.contains(&x) { 1 - a } else { a };
        let pats: Vec<Pattern> = self.patterns().into_iter().map(|(x, a, y, b)| (x, f(x, a), y, f(y, b))).collect();
        TvfGraph::from_patterns(self.vertices.clone(), pats).expect("negation keeps the vertex set")
    }

    /// Values that edges between `v` and the vertices of `others` take on `v`.
    fn values_on(&self, v: usize, others: &[usize]) -> BTreeSet<Value> {
        others
            .iter()
            .filter(|&&u| u != v)
            .flat_map(|&u| self.patterns_between(v, u).into_iter().map(|(a, _)| a))
            .collect()
    }

    /// True when `v` lies on a cycle of length at least three along which
    /// consecutive edges take opposite values at each interior vertex.
    pub fn on_alternating_cycle(&self, v: usize) -> bool {
        fn walk(g: &TvfGraph, start: usize, cur: usize, incoming: Value, visited: &mut Vec<usize>) -> bool {
            for &next in &g.vertices {
                if next == cur {
                    continue;
                }
                for (a, _) in g.patterns_between(cur, next) {
                    if a == incoming {
                        continue;
                    }
                    let arrive: Vec<Value> =
                        g.patterns_between(next, cur).into_iter().filter(|&(_, c)| c == a).map(|(b, _)| b).collect();
                    for b in arrive {
                        if next == start && visited.len() >= 3 {
                            return true;
                        }
                        if !visited.contains(&next) {
                            visited.push(next);
                            if walk(g, start, next, b, visited) {
                                return true;
                            }
                            visited.pop();
                        }
                    }
                }
            }
            false
        }
        for &u in &self.vertices {
            if u == v {
                continue;
            }
            for (b, _) in self.patterns_between(u, v) {
                let mut visited = vec![v, u];
                if walk(self, v, u, b, &mut visited) {
                    return true;
                }
            }
        }
        false
    }
}

/// `G_TVF(C)` of a boolean constraint.
pub fn tvf_graph(c: &Constraint) -> Result<TvfGraph> {
    if c.k() != 2 {
        return Err(Error::NegationOnNonBoolean(c.k()));
    }
    let ctx = c.context();
    let n = ctx.len();
    let mut pats = Vec::new();
    for p in 0..n {
        for q in p..n {
            for a in 0..2u8 {
                for b in 0..2u8 {
                    if p == q && a != b {
                        continue;
                    }
                    let occurs = c.accepted().iter().any(|t| t[p] == a && t[q] == b);
                    if !occurs {
                        pats.push((ctx[p], a, ctx[q], b));
                    }
                }
            }
        }
    }
    TvfGraph::from_patterns(ctx.to_vec(), pats)
}

/// True when every pair of distinct context variables has a falsifying
/// joint value. Defined for any alphabet.
pub fn is_tvf(c: &Constraint) -> bool {
    let n = c.arity();
    let k = c.k();
    (0..n).all(|p| {
        (p + 1..n).all(|q| {
            let mut seen = vec![false; k as usize * k as usize];
            for t in c.accepted() {
                seen[t[p] as usize * k as usize + t[q] as usize] = true;
            }
            seen.iter().any(|s| !s)
        })
    })
}

/// Kind of functional dependence witnessing compression at a vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WitnessKind {
    Constant(Value),
    Equality(usize),
    Negation(usize),
}

/// Structural pattern that explains a compression witness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompressionReason {
    /// A `00` or `11` loop at the vertex.
    Loop,
    /// Two edges between the vertex and another vertex.
    DoubleEdge,
    /// The vertex lies on an alternating cycle.
    Cycle,
    /// Found only by exhaustive dependence checking.
    Exhaustive,
}

/// A compression witness: vertex `at` is determined by `kind` on every
/// assignment of the graph.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompressionWitness {
    pub at: usize,
    pub kind: WitnessKind,
    pub reason: CompressionReason,
}

impl CompressionWitness {
    /// Re-checks the witness against a list of assignments over `vertices`.
    pub fn holds_on(&self, vertices: &[usize], assignments: &[Tuple]) -> bool {
        let pos = |x: usize| vertices.iter().position(|&v| v == x);
        let Some(p) = pos(self.at) else { return false };
        match self.kind {
            WitnessKind::Constant(b) => assignments.iter().all(|t| t[p] == b),
            WitnessKind::Equality(u) => pos(u).is_some_and(|q| assignments.iter().all(|t| t[p] == t[q])),
            WitnessKind::Negation(u) => pos(u).is_some_and(|q| assignments.iter().all(|t| t[p] != t[q])),
        }
    }
}

/// A compression of a graph to a proper subset `keep` of its vertices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Compression {
    pub keep: Vec<usize>,
    pub witnesses: Vec<CompressionWitness>,
}

/// Finds a compression of `g` to a proper subset, or `None` when `g` is
/// incompressible. Vertices are examined from last to first; each removed
/// vertex gets a witness whose target stays in the kept set.
pub fn find_compression(g: &TvfGraph) -> Option<Compression> {
    let assignments = g.assignments();
    let vs = g.vertices();
    let n = vs.len();
    let col = |p: usize| assignments.iter().map(move |t| t[p]);
    let mut removed = vec![false; n];
    let mut targeted = vec![false; n];
    let mut witnesses = Vec::new();
    for p in (0..n).rev() {
        if targeted[p] {
            continue;
        }
        let v = vs[p];
        let mut kind = None;
        for b in 0..2u8 {
            if col(p).all(|x| x == b) {
                kind = Some((WitnessKind::Constant(b), None));
                break;
            }
        }
        if kind.is_none() {
            for q in 0..n {
                if q == p || removed[q] {
                    continue;
                }
                if col(p).zip(col(q)).all(|(x, y)| x == y) {
                    kind = Some((WitnessKind::Equality(vs[q]), Some(q)));
                    break;
                }
                if col(p).zip(col(q)).all(|(x, y)| x != y) {
                    kind = Some((WitnessKind::Negation(vs[q]), Some(q)));
                    break;
                }
            }
        }
        if let Some((kind, target)) = kind {
            removed[p] = true;
            if let Some(q) = target {
                targeted[q] = true;
            }
            let reason = classify_reason(g, v, kind);
            witnesses.push(CompressionWitness { at: v, kind, reason });
        }
    }
    if witnesses.is_empty() {
        return None;
    }
    let keep = (0..n).filter(|&p| !removed[p]).map(|p| vs[p]).collect();
    Some(Compression { keep, witnesses })
}

fn classify_reason(g: &TvfGraph, v: usize, kind: WitnessKind) -> CompressionReason {
    if g.e00.contains(&(v, v)) || g.e11.contains(&(v, v)) {
        return CompressionReason::Loop;
    }
    let double = match kind {
        WitnessKind::Equality(u) | WitnessKind::Negation(u) => g.patterns_between(v, u).len() >= 2,
        WitnessKind::Constant(_) => g.vertices.iter().any(|&u| u != v && g.patterns_between(v, u).len() >= 2),
    };
    if double {
        CompressionReason::DoubleEdge
    } else if g.on_alternating_cycle(v) {
        CompressionReason::Cycle
    } else {
        CompressionReason::Exhaustive
    }
}

/// True when `find_compression` finds nothing.
pub fn is_incompressible(g: &TvfGraph) -> bool {
    find_compression(g).is_none()
}

/// The iterated compression of one constraint down to an incompressible
/// restriction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompressionChain {
    pub original: Constraint,
    pub steps: Vec<Compression>,
    pub restricted: Constraint,
}

impl CompressionChain {
    /// The kept variables, in original context order.
    pub fn kept(&self) -> &[usize] {
        self.restricted.context()
    }

    /// Expresses every removed variable as a constant, a kept variable, or
    /// the negation of a kept variable.
    pub fn resolve(&self) -> BTreeMap<usize, Target> {
        let mut out: BTreeMap<usize, Target> = BTreeMap::new();
        for step in self.steps.iter().rev() {
            for w in &step.witnesses {
                let t = match w.kind {
                    WitnessKind::Constant(b) => Target::Const(b),
                    WitnessKind::Equality(u) => out.get(&u).copied().unwrap_or(Target::Var(u)),
                    WitnessKind::Negation(u) => match out.get(&u).copied().unwrap_or(Target::Var(u)) {
                        Target::Var(x) => Target::Neg(x),
                        Target::Neg(x) => Target::Var(x),
                        Target::Const(b) => Target::Const(1 - b),
                    },
                };
                out.insert(w.at, t);
            }
        }
        out
    }

    /// True when the constraint was already incompressible.
    pub fn is_trivial(&self) -> bool {
        self.steps.is_empty()
    }

    /// Kinds of witnesses used along the chain.
    pub fn witness_kinds(&self) -> impl Iterator<Item = WitnessKind> + '_ {
        self.steps.iter().flat_map(|s| s.witnesses.iter().map(|w| w.kind))
    }
}

/// Compresses a boolean constraint repeatedly until it is incompressible.
pub fn compress_constraint(c: &Constraint) -> Result<CompressionChain> {
    let mut cur = c.clone();
    let mut steps = Vec::new();
    while let Some(comp) = find_compression(&tvf_graph(&cur)?) {
        cur = cur.restrict(&comp.keep)?;
        steps.push(comp);
    }
    Ok(CompressionChain { original: c.clone(), steps, restricted: cur })
}

/// The maximal compression of a constraint language: the incompressible
/// restrictions together with the auxiliary constant, equality, and
/// inequality constraints needed to express the removed variables.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaximalCompression {
    pub comp: Vec<Constraint>,
    pub aux: Vec<Constraint>,
    pub chains: Vec<CompressionChain>,
}

/// Computes the maximal compression `(Gamma_comp, Gamma_aux)`. Auxiliary
/// constraints are given on the generic context `[0]` or `[0, 1]`.
pub fn maximal_compression(gamma: &[Constraint]) -> Result<MaximalCompression> {
    let chains = gamma.iter().map(compress_constraint).collect::<Result<Vec<_>>>()?;
    let comp = chains.iter().map(|ch| ch.restricted.clone()).collect();
    let mut kinds: BTreeSet<Constraint> = BTreeSet::new();
    for ch in &chains {
        for kind in ch.witness_kinds() {
            kinds.insert(aux_constraint(kind));
        }
    }
    Ok(MaximalCompression { comp, aux: kinds.into_iter().collect(), chains })
}

/// The auxiliary constraint expressing one witness kind.
pub fn aux_constraint(kind: WitnessKind) -> Constraint {
    match kind {
        WitnessKind::Constant(b) => Constraint::new(2, vec![0], vec![vec![b]]).expect("singleton"),
        WitnessKind::Equality(_) => Constraint::eq(2, 0, 1).expect("equality"),
        WitnessKind::Negation(_) => Constraint::neq(2, 0, 1).expect("inequality"),
    }
}

/// A tableau form: a variable order, a row order of assignments, and the
/// resulting 0/1 matrix. Rows are stored over the graph's vertex order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tableau {
    pub vertices: Vec<usize>,
    pub variable_order: Vec<usize>,
    pub rows: Vec<Tuple>,
    pub matrix: Vec<Vec<Value>>,
    pub negated: Vec<usize>,
}

impl Tableau {
    fn build(vertices: Vec<usize>, order: Vec<usize>, rows: Vec<Tuple>, negated: Vec<usize>) -> Self {
        let pos: Vec<usize> =
            order.iter().map(|v| vertices.iter().position(|x| x == v).expect("order is a permutation")).collect();
        let matrix = rows.iter().map(|r| pos.iter().map(|&p| r[p]).collect()).collect();
        Tableau { vertices, variable_order: order, rows, matrix, negated }
    }

    /// Value of row `t` at the `l`-th variable of the order.
    pub fn at(&self, t: usize, l: usize) -> Value {
        self.matrix[t][l]
    }

    /// True when row `i < n` has zeros before column `i` and a one at
    /// column `i`, and the last row is zero.
    pub fn is_upper_triangular(&self) -> bool {
        let n = self.variable_order.len();
        self.matrix.len() == n + 1
            && self.matrix.iter().enumerate().all(|(i, row)| {
                row.len() == n
                    && if i < n {
                        row[..i].iter().all(|&x| x == 0) && row[i] == 1
                    } else {
                        row.iter().all(|&x| x == 0)
                    }
            })
    }

    /// True when `matrix[j][i] = 1` exactly when `i >= j`.
    pub fn is_staircase(&self) -> bool {
        let n = self.variable_order.len();
        self.matrix.len() == n + 1
            && self.matrix.iter().enumerate().all(|(j, row)| row.iter().enumerate().all(|(i, &x)| (x == 1) == (i >= j)))
    }

    /// Index of a tuple (over the vertex order) among the rows.
    pub fn row_index(&self, t: &[Value]) -> Option<usize> {
        self.rows.iter().position(|r| r.as_slice() == t)
    }
}

fn require_incompressible_complete(g: &TvfGraph) -> Result<()> {
    if !g.is_complete() {
        return Err(Error::PreconditionViolated("TVF graph is not complete".into()));
    }
    if !is_incompressible(g) {
        return Err(Error::PreconditionViolated("TVF graph is compressible".into()));
    }
    Ok(())
}

fn triangular_rows(g: &TvfGraph, order: &[usize], negated: Vec<usize>) -> Result<Tableau> {
    let assignments = g.assignments();
    let vs = g.vertices().to_vec();
    let pos: Vec<usize> = order.iter().map(|v| vs.iter().position(|x| x == v).expect("vertex")).collect();
    let mut rows = Vec::new();
    for i in 0..order.len() {
        let cands: Vec<&Tuple> = assignments
            .iter()
            .filter(|t| pos[..i].iter().all(|&p| t[p] == 0) && t[pos[i]] == 1)
            .collect();
        if cands.len() != 1 {
            return Err(Error::PostconditionFailed(format!(
                "row {i} of the tableau has {} candidates instead of one",
                cands.len()
            )));
        }
        rows.push(cands[0].clone());
    }
    rows.push(vec![0; vs.len()]);
    let mut listed = rows.clone();
    listed.sort();
    let mut all = assignments.clone();
    all.sort();
    if listed != all {
        return Err(Error::PostconditionFailed("tableau rows differ from the assignments".into()));
    }
    Ok(Tableau::build(vs, order.to_vec(), rows, negated))
}

/// Upper triangular tableau of an incompressible complete graph without
/// `00` edges: each round picks the smallest remaining vertex whose edges to
/// the remaining vertices are all 1 on it.
pub fn tableau_no00(g: &TvfGraph) -> Result<Tableau> {
    require_incompressible_complete(g)?;
    if !g.e00.is_empty() {
        return Err(Error::PreconditionViolated("TVF graph has a 00 edge".into()));
    }
    let mut remaining: Vec<usize> = g.vertices().to_vec();
    let mut order = Vec::new();
    while !remaining.is_empty() {
        let pick = remaining
            .iter()
            .copied()
            .filter(|&v| g.values_on(v, &remaining).iter().all(|&a| a == 1))
            .min()
            .ok_or_else(|| Error::PostconditionFailed("no vertex with all edges 1 on it".into()))?;
        order.push(pick);
        remaining.retain(|&v| v != pick);
    }
    triangular_rows(g, &order, Vec::new())
}

/// Staircase tableau of an incompressible complete graph with only `01`
/// edges: `phi_j(v_i) = 1` iff `i >= j`, plus the zero row.
pub fn tableau_01(g: &TvfGraph) -> Result<Tableau> {
    if !g.e00.is_empty() || !g.e11.is_empty() {
        return Err(Error::PreconditionViolated("TVF graph has 00 or 11 edges".into()));
    }
    let t = tableau_no00(g)?;
    if !t.is_staircase() {
        return Err(Error::PostconditionFailed("tableau is not a staircase".into()));
    }
    Ok(t)
}

/// The negation set `U` and the upper triangular tableau of
/// `C_TVF(G)_{not U}` for an incompressible complete graph. Each round picks
/// the smallest remaining vertex whose edges to the remaining vertices are
/// all 0 on it or all 1 on it; in the first case the vertex is negated. The
/// last vertex is judged by its edges to every other vertex.
pub fn tableau_negated(g: &TvfGraph) -> Result<Tableau> {
    require_incompressible_complete(g)?;
    let mut h = g.clone();
    let mut remaining: Vec<usize> = g.vertices().to_vec();
    let mut order = Vec::new();
    let mut negated = Vec::new();
    while !remaining.is_empty() {
        let pick = remaining
            .iter()
            .copied()
            .filter(|&v| h.values_on(v, &remaining).len() <= 1)
            .min()
            .ok_or_else(|| Error::PostconditionFailed("no vertex with uniform edge values".into()))?;
        let scope = if remaining.len() == 1 { h.vertices().to_vec() } else { remaining.clone() };
        let on_pick = h.values_on(pick, &scope);
        if on_pick.len() == 1 && on_pick.contains(&0) {
            h = h.negate_at(&[pick]);
            negated.push(pick);
        }
        order.push(pick);
        remaining.retain(|&v| v != pick);
    }
    negated.sort();
    triangular_rows(&h, &order, negated)
}

/// Which target a simulation produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SimTarget {
    /// `{(1,0,0),(0,1,0),(0,0,1)}`.
    OneInThree,
    /// `{(1,0,1),(0,1,1),(0,0,0)}`, the 1-in-3 constraint negated at `z`.
    OneInThreeNegZ,
}

impl SimTarget {
    /// The target constraint on the abstract context `[x, y, z] = [0, 1, 2]`.
    pub fn constraint(&self) -> Constraint {
        let one3 = Constraint::one_in_three([SIM_X, SIM_Y, SIM_Z]);
        match self {
            SimTarget::OneInThree => one3,
            SimTarget::OneInThreeNegZ => one3.negate_at(&[SIM_Z]).expect("boolean"),
        }
    }
}

/// Abstract target variable `x` of a simulation.
pub const SIM_X: usize = 0;
/// Abstract target variable `y` of a simulation.
pub const SIM_Y: usize = 1;
/// Abstract target variable `z` of a simulation.
pub const SIM_Z: usize = 2;
/// Abstract auxiliary target variable `z'` of a simulation.
pub const SIM_ZP: usize = 3;

/// A simulation of a 3-variable target by a source constraint: the map
/// `r` from the source context to `{x, y, z, z'}` with negations and
/// constants, and its machine-checked pushforward.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub source: Constraint,
    pub target: SimTarget,
    pub map: VarMap,
    pub aux_vars: Vec<String>,
    pub negation_set: Vec<usize>,
    pub rows: (usize, usize, usize),
    pub case: String,
    pub compression: CompressionChain,
    pub verified: bool,
}

impl SimulationResult {
    /// Recomputes `r_* C` restricted to `{x, y, z}`.
    pub fn pushforward_xyz(&self) -> Result<Constraint> {
        self.source.pushforward(&self.map)?.restrict(&[SIM_X, SIM_Y, SIM_Z])
    }
}

fn check_simulation_input(c: &Constraint) -> Result<()> {
    if c.k() != 2 {
        return Err(Error::NegationOnNonBoolean(c.k()));
    }
    if !is_tvf(c) {
        return Err(Error::PreconditionViolated("constraint is not TVF".into()));
    }
    if Polymorphism::maj().preserves(c)?.holds {
        return Err(Error::PreconditionViolated("constraint satisfies the majority polymorphism".into()));
    }
    Ok(())
}

/// First triple `i < j < k` of present rows whose majority is a row of the
/// completion that is not present; returns the triple and the majority row.
fn majority_violation(tab: &Tableau, present: &[bool]) -> Result<(usize, usize, usize, usize)> {
    let maj = Polymorphism::maj();
    let n = tab.rows.len();
    let width = tab.vertices.len();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                if !(present[i] && present[j] && present[k]) {
                    continue;
                }
                let m = maj.apply(&[tab.rows[i].clone(), tab.rows[j].clone(), tab.rows[k].clone()], width)?;
                let r = tab
                    .row_index(&m)
                    .ok_or_else(|| Error::PostconditionFailed("majority of rows is not a row".into()))?;
                if !present[r] {
                    return Ok((i, j, k, r));
                }
            }
        }
    }
    Err(Error::PostconditionFailed("no majority violation among present rows".into()))
}

/// Extends a map on the kept variables to the full context through the
/// compression witnesses.
fn extend_through_compression(
    chain: &CompressionChain,
    on_kept: &BTreeMap<usize, Target>,
    target: Vec<usize>,
) -> Result<VarMap> {
    let removed = chain.resolve();
    let ctx = chain.original.context().to_vec();
    let images = ctx
        .iter()
        .map(|v| {
            if let Some(t) = on_kept.get(v) {
                return Ok(*t);
            }
            match removed.get(v) {
                Some(Target::Const(b)) => Ok(Target::Const(*b)),
                Some(Target::Var(u)) => Ok(on_kept[u]),
                Some(Target::Neg(u)) => Ok(match on_kept[u] {
                    Target::Var(w) => Target::Neg(w),
                    Target::Neg(w) => Target::Var(w),
                    Target::Const(b) => Target::Const(1 - b),
                }),
                None => Err(Error::PostconditionFailed(format!("variable {v} is neither kept nor removed"))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    VarMap::with_target(ctx, images, target)
}

/// Simulates `{(1,0,0),(0,1,0),(0,0,1)}` or `{(1,0,1),(0,1,1),(0,0,0)}` by a
/// TVF constraint without `00` edges that fails MAJ. Compressible inputs are
/// first compressed; the map is extended to removed variables through the
/// compression witnesses.
pub fn simulate_one_in_three(c: &Constraint) -> Result<SimulationResult> {
    check_simulation_input(c)?;
    let g0 = tvf_graph(c)?;
    if !g0.e00.is_empty() {
        return Err(Error::PreconditionViolated("TVF graph has a 00 edge".into()));
    }
    let chain = compress_constraint(c)?;
    let cu = chain.restricted.clone();
    let tab = tableau_no00(&tvf_graph(&cu)?)?;
    let present: Vec<bool> = tab.rows.iter().map(|r| cu.contains(r)).collect();
    let (i, j, k, _) = majority_violation(&tab, &present)?;
    let n = tab.variable_order.len();
    let case_a = (j + 1..k.min(n)).any(|h| tab.at(i, h) == 1 && tab.at(j, h) == 1);
    let mut on_kept = BTreeMap::new();
    for l in 0..n {
        let p = (tab.at(i, l), tab.at(j, l), tab.at(k, l));
        let t = match p {
            (a, b, c) if a == b && b == c => Target::Const(a),
            (1, 0, 0) => Target::Var(SIM_X),
            (0, 1, 0) => Target::Var(SIM_Y),
            (0, 0, 1) => Target::Var(if case_a { SIM_ZP } else { SIM_Z }),
            (1, 1, 0) if case_a => Target::Var(SIM_Z),
            _ if !case_a => Target::Var(SIM_ZP),
            _ => return Err(Error::PostconditionFailed(format!("unexpected column pattern {p:?}"))),
        };
        on_kept.insert(tab.variable_order[l], t);
    }
    let full = vec![SIM_X, SIM_Y, SIM_Z, SIM_ZP];
    let r = extend_through_compression(&chain, &on_kept, full)?;
    let pushed = c.pushforward(&r)?;
    let (map, target, case) = if case_a {
        (r, SimTarget::OneInThreeNegZ, "A".to_string())
    } else if !pushed.accepted().iter().any(|t| t[0] == 0 && t[1] == 0 && t[2] == 0) {
        (r, SimTarget::OneInThree, "B1".to_string())
    } else {
        let set = |v: &[[u8; 4]]| v.iter().map(|t| t.to_vec()).collect::<Vec<_>>();
        let cases = [
            (set(&[[0, 0, 0, 0], [0, 0, 1, 1], [0, 1, 0, 1], [1, 0, 0, 0]]), [Target::Const(0), Target::Var(SIM_X), Target::Var(SIM_Y)]),
            (set(&[[0, 0, 0, 0], [0, 0, 1, 1], [0, 1, 0, 0], [1, 0, 0, 1]]), [Target::Var(SIM_X), Target::Const(0), Target::Var(SIM_Y)]),
            (set(&[[0, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 1], [1, 0, 0, 1]]), [Target::Var(SIM_X), Target::Var(SIM_Y), Target::Const(0)]),
        ];
        let (idx, images) = cases
            .iter()
            .enumerate()
            .find(|(_, (acc, _))| pushed.accepted() == acc.as_slice())
            .map(|(idx, (_, im))| (idx, *im))
            .ok_or_else(|| Error::PostconditionFailed("pushforward is none of the three expected sets".into()))?;
        let s = VarMap::with_target(
            full_ids(),
            vec![images[0], images[1], images[2], Target::Var(SIM_Z)],
            vec![SIM_X, SIM_Y, SIM_Z],
        )?;
        (r.then(&s)?, SimTarget::OneInThreeNegZ, format!("B2.{}", idx + 1))
    };
    finish_simulation(c, target, map, Vec::new(), (i, j, k), case, chain)
}

fn full_ids() -> Vec<usize> {
    vec![SIM_X, SIM_Y, SIM_Z, SIM_ZP]
}

fn finish_simulation(
    c: &Constraint,
    target: SimTarget,
    map: VarMap,
    negation_set: Vec<usize>,
    rows: (usize, usize, usize),
    case: String,
    chain: CompressionChain,
) -> Result<SimulationResult> {
    let mut aux_vars = vec!["x".to_string(), "y".to_string(), "z".to_string()];
    if map.target().contains(&SIM_ZP) {
        aux_vars.push("z'".to_string());
    }
    let mut res = SimulationResult {
        source: c.clone(),
        target,
        map,
        aux_vars,
        negation_set,
        rows,
        case,
        compression: chain,
        verified: false,
    };
    let got = res.pushforward_xyz()?;
    if got != target.constraint() {
        return Err(Error::PostconditionFailed(format!(
            "simulation pushforward {got} differs from the target {}",
            target.constraint()
        )));
    }
    res.verified = true;
    Ok(res)
}

/// Simulates `{(1,0,0),(0,1,0),(0,0,1)}` with negation by any boolean TVF
/// constraint failing MAJ, using the negated tableau and the literal map on
/// column patterns of three rows whose majority is missing.
pub fn simulate_one_in_three_neg(c: &Constraint) -> Result<SimulationResult> {
    check_simulation_input(c)?;
    let chain = compress_constraint(c)?;
    let cu = chain.restricted.clone();
    let tab = tableau_negated(&tvf_graph(&cu)?)?;
    let neg_cu = cu.negate_at(&tab.negated)?;
    let present: Vec<bool> = tab.rows.iter().map(|r| neg_cu.contains(r)).collect();
    let (i, j, k, _) = majority_violation(&tab, &present)?;
    let n = tab.variable_order.len();
    let mut on_kept = BTreeMap::new();
    for l in 0..n {
        let v = tab.variable_order[l];
        let p = [tab.at(i, l), tab.at(j, l), tab.at(k, l)];
        let lit = if p[0] == p[1] && p[1] == p[2] {
            Target::Const(p[0])
        } else {
            let ones = p.iter().filter(|&&x| x == 1).count();
            let minority = if ones == 1 { 1 } else { 0 };
            let slot = p.iter().position(|&x| x == minority).expect("a minority exists");
            let w = [SIM_X, SIM_Y, SIM_Z][slot];
            if minority == 1 {
                Target::Var(w)
            } else {
                Target::Neg(w)
            }
        };
        let lit = if tab.negated.contains(&v) {
            match lit {
                Target::Var(w) => Target::Neg(w),
                Target::Neg(w) => Target::Var(w),
                Target::Const(b) => Target::Const(1 - b),
            }
        } else {
            lit
        };
        on_kept.insert(v, lit);
    }
    let map = extend_through_compression(&chain, &on_kept, vec![SIM_X, SIM_Y, SIM_Z])?;
    let negation_set = tab.negated.clone();
    finish_simulation(c, SimTarget::OneInThree, map, negation_set, (i, j, k), "negated".to_string(), chain)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one3() -> Constraint {
        Constraint::one_in_three([0, 1, 2])
    }

    #[test]
    fn graph_examples() {
        let g = tvf_graph(&one3()).unwrap();
        assert_eq!(g.e11().len(), 3);
        assert!(g.e00().is_empty() && g.e01().is_empty());
        let g = tvf_graph(&Constraint::full(2, vec![0, 1]).unwrap()).unwrap();
        assert_eq!(g.num_edges(), 0);
        let g = tvf_graph(&Constraint::eq(2, 0, 1).unwrap()).unwrap();
        assert_eq!(g.e01().iter().copied().collect::<Vec<_>>(), vec![(0, 1), (1, 0)]);
        assert!(g.e00().is_empty() && g.e11().is_empty());
    }

    #[test]
    fn tvf_examples() {
        assert!(is_tvf(&one3()));
        assert!(!is_tvf(&Constraint::full(2, vec![0, 1]).unwrap()));
        assert!(is_tvf(&Constraint::neq(2, 0, 1).unwrap()));
        assert!(is_tvf(&Constraint::neq(3, 0, 1).unwrap()));
        assert!(!is_tvf(&Constraint::full(3, vec![0, 1]).unwrap()));
    }

    #[test]
    fn assignments_examples() {
        let g = tvf_graph(&one3()).unwrap();
        assert_eq!(g.assignments(), vec![vec![0, 0, 0], vec![0, 0, 1], vec![0, 1, 0], vec![1, 0, 0]]);
        let e = TvfGraph::new(vec![0, 1, 2], [], [], []).unwrap();
        assert_eq!(e.assignments().len(), 8);
    }

    #[test]
    fn compression_examples() {
        let g = tvf_graph(&Constraint::eq(2, 0, 1).unwrap()).unwrap();
        let c = find_compression(&g).unwrap();
        assert_eq!(c.keep, vec![0]);
        assert_eq!(c.witnesses[0].at, 1);
        assert_eq!(c.witnesses[0].kind, WitnessKind::Equality(0));
        assert_eq!(c.witnesses[0].reason, CompressionReason::DoubleEdge);
        let looped = TvfGraph::new(vec![0], [], [(0, 0)], []).unwrap();
        let c = find_compression(&looped).unwrap();
        assert_eq!(c.witnesses[0].kind, WitnessKind::Constant(0));
        assert_eq!(c.witnesses[0].reason, CompressionReason::Loop);
        assert!(find_compression(&tvf_graph(&one3()).unwrap()).is_none());
    }

    #[test]
    fn maximal_compression_examples() {
        let m = maximal_compression(&[Constraint::eq(2, 0, 1).unwrap()]).unwrap();
        assert_eq!(m.comp[0], Constraint::full(2, vec![0]).unwrap());
        assert_eq!(m.aux, vec![Constraint::eq(2, 0, 1).unwrap()]);
        let m = maximal_compression(&[one3()]).unwrap();
        assert_eq!(m.comp, vec![one3()]);
        assert!(m.aux.is_empty());
        let m = maximal_compression(&[Constraint::neq(2, 0, 1).unwrap()]).unwrap();
        assert!(m.aux.contains(&Constraint::neq(2, 0, 1).unwrap()));
    }

    #[test]
    fn tableau_examples() {
        let single = TvfGraph::new(vec![0], [], [], []).unwrap();
        assert_eq!(tableau_01(&single).unwrap().matrix, vec![vec![1], vec![0]]);
        let stairs = TvfGraph::new(vec![0, 1, 2], [], [], [(1, 0), (2, 0), (2, 1)]).unwrap();
        let t = tableau_01(&stairs).unwrap();
        assert_eq!(t.matrix, vec![vec![1, 1, 1], vec![0, 1, 1], vec![0, 0, 1], vec![0, 0, 0]]);
        assert_eq!(t.variable_order[0], 0);
        let t = tableau_no00(&tvf_graph(&one3()).unwrap()).unwrap();
        assert_eq!(t.matrix, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1], vec![0, 0, 0]]);
        assert!(t.is_upper_triangular());
    }

    #[test]
    fn negated_tableau_examples() {
        let g = tvf_graph(&one3().negate_all().unwrap()).unwrap();
        let t = tableau_negated(&g).unwrap();
        assert_eq!(t.negated, vec![0, 1, 2]);
        assert!(t.is_upper_triangular());
        let no00 = tvf_graph(&one3()).unwrap();
        assert_eq!(tableau_negated(&no00).unwrap(), tableau_no00(&no00).unwrap());
        let mixed = TvfGraph::new(vec![0, 1, 2], [(0, 1)], [(1, 2)], [(0, 2)]).unwrap();
        if is_incompressible(&mixed) {
            let t = tableau_negated(&mixed).unwrap();
            let mut rows = t.rows.clone();
            rows.sort();
            assert_eq!(rows, mixed.negate_at(&t.negated).assignments());
        }
    }

    #[test]
    fn preconditions_are_enforced() {
        let eq = tvf_graph(&Constraint::eq(2, 0, 1).unwrap()).unwrap();
        assert!(matches!(tableau_no00(&eq), Err(Error::PreconditionViolated(_))));
        let stairs = TvfGraph::new(vec![0, 1, 2], [], [], [(1, 0), (2, 0), (2, 1)]).unwrap();
        let c = stairs.as_constraint().unwrap();
        assert!(matches!(simulate_one_in_three(&c), Err(Error::PreconditionViolated(_))));
        assert!(matches!(simulate_one_in_three_neg(&c), Err(Error::PreconditionViolated(_))));
    }

    #[test]
    fn simulation_examples() {
        let s = simulate_one_in_three(&one3()).unwrap();
        assert!(s.verified);
        assert!(!s.map.uses_negation());
        let s = simulate_one_in_three_neg(&one3()).unwrap();
        assert!(s.negation_set.is_empty());
        assert_eq!(s.pushforward_xyz().unwrap(), Constraint::one_in_three([0, 1, 2]));
        let s = simulate_one_in_three_neg(&one3().negate_all().unwrap()).unwrap();
        assert_eq!(s.negation_set, vec![0, 1, 2]);
    }

    #[test]
    fn simulation_of_compressible_constraint() {
        // 1-in-3 on (a, b, c) with d = a copied and e constant 1.
        let c = Constraint::new(
            2,
            vec![0, 1, 2, 3, 4],
            vec![vec![1, 0, 0, 1, 1], vec![0, 1, 0, 0, 1], vec![0, 0, 1, 0, 1]],
        )
        .unwrap();
        let s = simulate_one_in_three_neg(&c).unwrap();
        assert!(s.verified);
        assert!(!s.compression.is_trivial());
    }
}
