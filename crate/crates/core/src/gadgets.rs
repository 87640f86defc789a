//! Gadget constructions and constraint-system reductions. Every pass emits a
//! new constraint system together with the claimed homomorphism constant of
//! the construction, and commutativity gadgets carry a brute-force
//! completeness certificate.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::cs::{
    ratio, space_size, Constraint, ConstraintSystem, Distribution, QuestionDistribution, Target, Tuple, TupleIter,
    Value, VarMap,
};
use crate::error::{Error, Result};
use crate::games::{cc_game, GameSpec};
use crate::schaefer::{classify_boolean, Complexity, Polymorphism};
use crate::tvf::{
    is_tvf, maximal_compression, simulate_one_in_three, simulate_one_in_three_neg, tvf_graph,
    SimulationResult, SIM_X, SIM_Y, SIM_Z, SIM_ZP,
};

/// Where a gadget constraint comes from: `cs.constraints[i]` equals
/// `language[source].pushforward(map)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Origin {
    pub source: usize,
    pub map: VarMap,
}

/// A constraint system produced by a gadget construction, its distinguished
/// variables, and the claimed homomorphism constant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GadgetOutput {
    pub cs: ConstraintSystem,
    pub distinguished: Vec<usize>,
    pub claimed_constant: BigRational,
    pub provenance: String,
    pub constant_note: Option<String>,
    pub language: Vec<Constraint>,
    pub origins: Vec<Origin>,
}

/// One row of a completeness certificate: a value of the distinguished
/// variables and a satisfying extension.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Extension {
    pub values: Tuple,
    pub witness: Vec<Value>,
}

impl GadgetOutput {
    /// Builds a system whose constraints are the pushforwards of language
    /// constraints along the given origins.
    pub fn from_parts(
        k: u8,
        names: Vec<String>,
        language: Vec<Constraint>,
        origins: Vec<Origin>,
        distinguished: Vec<usize>,
        provenance: &str,
    ) -> Result<GadgetOutput> {
        let constraints = origins
            .iter()
            .map(|o| {
                language
                    .get(o.source)
                    .ok_or_else(|| Error::Invalid(format!("origin names missing language entry {}", o.source)))?
                    .pushforward(&o.map)
            })
            .collect::<Result<Vec<_>>>()?;
        let cs = ConstraintSystem::new(k, names, constraints)?;
        if let Some(&v) = distinguished.iter().find(|&&v| v >= cs.num_variables()) {
            return Err(Error::MissingVariable(v));
        }
        Ok(GadgetOutput {
            cs,
            distinguished,
            claimed_constant: BigRational::one(),
            provenance: provenance.to_string(),
            constant_note: None,
            language,
            origins,
        })
    }

    /// Names of the distinguished variables.
    pub fn distinguished_names(&self) -> Vec<String> {
        self.distinguished.iter().map(|&v| self.cs.var_name(v).to_string()).collect()
    }

    /// Re-checks that each constraint is the recorded pushforward of a
    /// language constraint.
    pub fn check_origins(&self) -> Result<()> {
        if self.origins.len() != self.cs.constraints().len() {
            return Err(Error::PostconditionFailed("one origin per constraint is required".into()));
        }
        for (i, (c, o)) in self.cs.constraints().iter().zip(&self.origins).enumerate() {
            let lang = self
                .language
                .get(o.source)
                .ok_or_else(|| Error::PostconditionFailed(format!("origin {i} names a missing language entry")))?;
            if lang.pushforward(&o.map)? != *c {
                return Err(Error::PostconditionFailed(format!("constraint {i} is not the pushforward of its origin")));
            }
        }
        Ok(())
    }

    /// Values of the distinguished variables that extend to satisfying
    /// assignments, each with a witness.
    pub fn extensions(&self) -> Vec<Extension> {
        let d = self.distinguished.len();
        TupleIter::new(self.cs.k(), d)
            .filter_map(|values| {
                let fixed: Vec<(usize, Value)> = self.distinguished.iter().copied().zip(values.iter().copied()).collect();
                self.cs.solve_with(&fixed).map(|witness| Extension { values, witness })
            })
            .collect()
    }

    /// Completeness certificate: every value of the distinguished variables
    /// extends to a satisfying assignment.
    pub fn certify(&self) -> Result<Vec<Extension>> {
        let ext = self.extensions();
        let total = space_size(self.cs.k(), self.distinguished.len());
        if ext.len() as u128 != total {
            let have: BTreeSet<&Tuple> = ext.iter().map(|e| &e.values).collect();
            let missing: Vec<Tuple> =
                TupleIter::new(self.cs.k(), self.distinguished.len()).filter(|t| !have.contains(t)).collect();
            return Err(Error::PostconditionFailed(format!(
                "distinguished values {missing:?} do not extend to satisfying assignments"
            )));
        }
        Ok(ext)
    }

    /// Checks that the extendable distinguished values are exactly the
    /// accepted tuples of `expected` (read over the distinguished order).
    pub fn certify_exact(&self, expected: &[Tuple]) -> Result<Vec<Extension>> {
        let ext = self.extensions();
        let got: BTreeSet<Tuple> = ext.iter().map(|e| e.values.clone()).collect();
        let want: BTreeSet<Tuple> = expected.iter().cloned().collect();
        if got != want {
            return Err(Error::PostconditionFailed(format!(
                "extendable distinguished values {got:?} differ from the expected {want:?}"
            )));
        }
        Ok(ext)
    }
}

/// Incremental construction of a gadget: variables, language entries, and
/// constraints given as pushforwards.
struct Builder {
    id: String,
    k: u8,
    names: Vec<String>,
    constraints: Vec<Constraint>,
    language: Vec<Constraint>,
    origins: Vec<Origin>,
    counters: BTreeMap<String, usize>,
}

impl Builder {
    fn new(id: &str, k: u8) -> Self {
        Builder {
            id: id.to_string(),
            k,
            names: Vec::new(),
            constraints: Vec::new(),
            language: Vec::new(),
            origins: Vec::new(),
            counters: BTreeMap::new(),
        }
    }

    /// A new variable named `{id}.{role}.{index}`.
    fn fresh(&mut self, role: &str) -> usize {
        let n = self.counters.entry(role.to_string()).or_insert(0);
        self.names.push(format!("{}.{role}.{n}", self.id));
        *n += 1;
        self.names.len() - 1
    }

    fn add(&mut self, lang: &Constraint, images: Vec<Target>) -> Result<usize> {
        let source = match self.language.iter().position(|l| l == lang) {
            Some(p) => p,
            None => {
                self.language.push(lang.clone());
                self.language.len() - 1
            }
        };
        let map = VarMap::new(lang.context().to_vec(), images)?;
        let c = lang.pushforward(&map)?;
        self.constraints.push(c);
        self.origins.push(Origin { source, map });
        Ok(self.constraints.len() - 1)
    }

    /// Copies a gadget, identifying its variables per `bind` and creating
    /// fresh variables for the rest. Returns the variable correspondence.
    fn embed(&mut self, g: &GadgetOutput, bind: &[(usize, usize)], role: &str) -> Result<Vec<usize>> {
        let n = g.cs.num_variables();
        let mut m: Vec<Option<usize>> = vec![None; n];
        for &(gv, hv) in bind {
            m[gv] = Some(hv);
        }
        let m: Vec<usize> = (0..n).map(|v| m[v].unwrap_or_else(|| self.fresh(role))).collect();
        for o in &g.origins {
            let images = o
                .map
                .images()
                .iter()
                .map(|t| match *t {
                    Target::Var(w) => Target::Var(m[w]),
                    Target::Neg(w) => Target::Neg(m[w]),
                    Target::Const(a) => Target::Const(a),
                })
                .collect();
            self.add(&g.language[o.source], images)?;
        }
        Ok(m)
    }

    fn finish(
        self,
        distinguished: Vec<usize>,
        claimed_constant: BigRational,
        provenance: &str,
        constant_note: Option<String>,
    ) -> Result<GadgetOutput> {
        let cs = ConstraintSystem::new(self.k, self.names, self.constraints)?;
        Ok(GadgetOutput {
            cs,
            distinguished,
            claimed_constant,
            provenance: provenance.to_string(),
            constant_note,
            language: self.language,
            origins: self.origins,
        })
    }
}

fn int(n: usize) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Role ids of the basic gadget, in the order `u, v, w, x, y, z`.
pub const BASIC_ROLES: [&str; 6] = ["u", "v", "w", "x", "y", "z"];
const U: usize = 0;
const V: usize = 1;
const W: usize = 2;
const X: usize = 3;
const Y: usize = 4;
const Z: usize = 5;
/// The three triangles `V1 = {x,u,v}`, `V2 = {y,u,w}`, `V3 = {z,v,w}`.
pub const BASIC_TRIANGLES: [[usize; 3]; 3] = [[X, U, V], [Y, U, W], [Z, V, W]];

/// Slots at which `base` equals the 1-in-3 constraint negated, if any.
pub fn one_in_three_negation(base: &Constraint) -> Option<Vec<usize>> {
    if base.k() != 2 || base.arity() != 3 {
        return None;
    }
    let ctx: [usize; 3] = base.context().try_into().ok()?;
    (0..8u8).find_map(|mask| {
        let slots: Vec<usize> = (0..3).filter(|p| mask >> p & 1 == 1).collect();
        let vars: Vec<usize> = slots.iter().map(|&p| ctx[p]).collect();
        let c = Constraint::one_in_three(ctx).negate_at(&vars).ok()?;
        (c == *base).then_some(slots)
    })
}

/// The basic commutativity gadget: three copies of a 1-in-3 variant on the
/// triangles `{x,u,v}`, `{y,u,w}`, `{z,v,w}` with distinguished `(x, y)`.
/// `negated` lists role ids (0..6 for `u..z`) wired to negated slots; by
/// default `{x,y,z}` for one negated slot and `{u,v,w}` for two.
pub fn basic_gadget(base: &Constraint, negated: Option<&[usize]>) -> Result<GadgetOutput> {
    let slots = one_in_three_negation(base).ok_or_else(|| {
        Error::PreconditionViolated(format!("{base} is not the 1-in-3 constraint with some slots negated"))
    })?;
    let neg: BTreeSet<usize> = match negated {
        Some(n) => n.iter().copied().collect(),
        None => match slots.len() {
            0 => BTreeSet::new(),
            1 => [X, Y, Z].into_iter().collect(),
            2 => [U, V, W].into_iter().collect(),
            _ => (0..6).collect(),
        },
    };
    if let Some(&r) = neg.iter().find(|&&r| r >= 6) {
        return Err(Error::PreconditionViolated(format!("role {r} does not exist")));
    }
    let mut b = Builder::new("basic", 2);
    let ids: Vec<usize> = BASIC_ROLES.iter().map(|r| b.fresh(r)).collect();
    for (t, tri) in BASIC_TRIANGLES.iter().enumerate() {
        let negs: Vec<usize> = tri.iter().copied().filter(|r| neg.contains(r)).collect();
        let plain: Vec<usize> = tri.iter().copied().filter(|r| !neg.contains(r)).collect();
        if negs.len() != slots.len() {
            return Err(Error::PreconditionViolated(format!(
                "triangle {} has {} negated variables but the base negates {} slots",
                t + 1,
                negs.len(),
                slots.len()
            )));
        }
        let (mut ni, mut pi) = (negs.into_iter(), plain.into_iter());
        let images = (0..3)
            .map(|p| {
                let r = if slots.contains(&p) { ni.next() } else { pi.next() };
                Target::Var(ids[r.expect("slot counts match")])
            })
            .collect();
        b.add(base, images)?;
    }
    let g = b.finish(vec![ids[X], ids[Y]], int(512), "basic commutativity gadget", None)?;
    g.certify()?;
    Ok(g)
}

/// The zero gadget: `r_* C` with `r` identifying the endpoints `u, v` of
/// the first `11` edge. The distinguished `u` is forced to 0.
pub fn zero_gadget(c3: &Constraint) -> Result<GadgetOutput> {
    let g3 = tvf_graph(c3)?;
    let &(u, v) = g3
        .e11()
        .iter()
        .find(|(a, b)| a != b)
        .ok_or_else(|| Error::PreconditionViolated(format!("{c3} has no 11 edge")))?;
    let mut b = Builder::new("zero", 2);
    let hu = b.fresh("u");
    let images = c3
        .context()
        .iter()
        .map(|&w| if w == u || w == v { Target::Var(hu) } else { Target::Var(b.fresh("t")) })
        .collect();
    b.add(c3, images)?;
    let g = b.finish(vec![hu], int(c3.arity() - 1), "zero gadget", None)?;
    g.certify_exact(&[vec![0]])?;
    Ok(g)
}

/// The one gadget: a zero gadget on `t` plus `s_* C2`, where `s` sends the
/// zeros of the first accepted tuple of `C2` to `t` and its ones to the
/// distinguished `u'`, which is forced to 1. When `C2` is the unary
/// constraint `{1}` it is used directly with constant 1.
pub fn one_gadget(c3: &Constraint, c2: &Constraint) -> Result<GadgetOutput> {
    if c2.accepted().iter().any(|t| t.iter().all(|&a| a == 0)) {
        return Err(Error::PreconditionViolated(format!("{c2} accepts the all-0 tuple")));
    }
    let mut b = Builder::new("one", 2);
    if c2.arity() == 1 {
        let up = b.fresh("u'");
        b.add(c2, vec![Target::Var(up)])?;
        let g = b.finish(vec![up], BigRational::one(), "one gadget (unary {1})", None)?;
        g.certify_exact(&[vec![1]])?;
        return Ok(g);
    }
    let zero = zero_gadget(c3)?;
    let t = b.fresh("t");
    b.embed(&zero, &[(zero.distinguished[0], t)], "z")?;
    let up = b.fresh("u'");
    let phi0 = &c2.accepted()[0];
    let images = phi0.iter().map(|&a| Target::Var(if a == 0 { t } else { up })).collect();
    b.add(c2, images)?;
    let g = b.finish(vec![up], int(8 * (c3.arity() - 1)), "one gadget", None)?;
    g.certify_exact(&[vec![1]])?;
    Ok(g)
}

/// The negation gadget: `C4` on its own context with the first `00` edge
/// `(p, q)`, and `C3` with its first `11` edge identified with `(p, q)`.
/// The distinguished pair satisfies `p != q`.
pub fn negation_gadget(c4: &Constraint, c3: &Constraint) -> Result<GadgetOutput> {
    let &(p, q) = tvf_graph(c4)?
        .e00()
        .iter()
        .find(|(a, b)| a != b)
        .ok_or_else(|| Error::PreconditionViolated(format!("{c4} has no 00 edge")))?;
    let &(p3, q3) = tvf_graph(c3)?
        .e11()
        .iter()
        .find(|(a, b)| a != b)
        .ok_or_else(|| Error::PreconditionViolated(format!("{c3} has no 11 edge")))?;
    let mut b = Builder::new("neg", 2);
    let hp = b.fresh("p");
    let hq = b.fresh("q");
    let img4 = c4
        .context()
        .iter()
        .map(|&w| {
            Target::Var(if w == p {
                hp
            } else if w == q {
                hq
            } else {
                b.fresh("a")
            })
        })
        .collect();
    b.add(c4, img4)?;
    let img3 = c3
        .context()
        .iter()
        .map(|&w| {
            Target::Var(if w == p3 {
                hp
            } else if w == q3 {
                hq
            } else {
                b.fresh("b")
            })
        })
        .collect();
    b.add(c3, img3)?;
    let g = b.finish(vec![hp, hq], int(4 * c4.arity().max(c3.arity())), "negation gadget", None)?;
    g.certify_exact(&[vec![0, 1], vec![1, 0]])?;
    Ok(g)
}

/// Zero and one gadgets chosen from a compressed language: the smallest
/// constraint with an `11` edge and the smallest one rejecting all-0.
pub fn const_gadgets(gamma_max: &[Constraint]) -> Result<(GadgetOutput, GadgetOutput)> {
    let c3 = smallest(gamma_max.iter().filter(|c| has_edge(c, 1)))
        .ok_or_else(|| Error::PreconditionViolated("no constraint has an 11 edge".into()))?;
    let c2 = smallest(gamma_max.iter().filter(|c| rejects_zero(c)))
        .ok_or_else(|| Error::PreconditionViolated("every constraint accepts all-0".into()))?;
    Ok((zero_gadget(c3)?, one_gadget(c3, c2)?))
}

/// Negation gadget chosen from a compressed language.
pub fn negation_gadget_from(gamma_max: &[Constraint]) -> Result<GadgetOutput> {
    let c4 = smallest(gamma_max.iter().filter(|c| has_edge(c, 0)))
        .ok_or_else(|| Error::PreconditionViolated("no constraint has a 00 edge".into()))?;
    let c3 = smallest(gamma_max.iter().filter(|c| has_edge(c, 1)))
        .ok_or_else(|| Error::PreconditionViolated("no constraint has an 11 edge".into()))?;
    negation_gadget(c4, c3)
}

fn smallest<'a>(it: impl Iterator<Item = &'a Constraint>) -> Option<&'a Constraint> {
    it.min_by(|a, b| (a.arity(), a.accepted()).cmp(&(b.arity(), b.accepted())))
}

fn has_edge(c: &Constraint, bit: Value) -> bool {
    tvf_graph(c).is_ok_and(|g| {
        let e = if bit == 0 { g.e00() } else { g.e11() };
        e.iter().any(|(a, b)| a != b)
    })
}

fn rejects_zero(c: &Constraint) -> bool {
    c.arity() > 0 && !c.accepted().iter().any(|t| t.iter().all(|&a| a == 0))
}

/// Realizes a simulation as a gadget with distinguished `(x, y, z)`:
/// constants are wired through per-copy variables pinned by the zero and
/// one gadgets, and each negated slot gets a fresh variable tied to its
/// target by a negation gadget.
pub fn simulate_gadget(
    sim: &SimulationResult,
    zero: Option<&GadgetOutput>,
    one: Option<&GadgetOutput>,
    neg: Option<&GadgetOutput>,
) -> Result<GadgetOutput> {
    let mut b = Builder::new("sim", 2);
    let host: BTreeMap<usize, usize> = [(SIM_X, "x"), (SIM_Y, "y"), (SIM_Z, "z")]
        .into_iter()
        .map(|(w, r)| (w, b.fresh(r)))
        .collect();
    let mut host = host;
    if sim.map.images().iter().any(|t| *t == Target::Var(SIM_ZP) || *t == Target::Neg(SIM_ZP)) {
        let zp = b.fresh("z'");
        host.insert(SIM_ZP, zp);
    }
    let mut consts: BTreeMap<Value, usize> = BTreeMap::new();
    let mut negs: Vec<(usize, usize)> = Vec::new();
    let mut images = Vec::new();
    for t in sim.map.images() {
        images.push(match *t {
            Target::Var(w) => Target::Var(host[&w]),
            Target::Neg(w) => {
                let n = b.fresh("n");
                negs.push((n, host[&w]));
                Target::Var(n)
            }
            Target::Const(a) => {
                let role = format!("x{a}");
                Target::Var(*consts.entry(a).or_insert_with(|| b.fresh(&role)))
            }
        });
    }
    b.add(&sim.source, images)?;
    let mut constant = BigRational::one();
    let mut notes = Vec::new();
    if !consts.is_empty() {
        let w_prime = sim.map.target().iter().filter(|w| host.contains_key(w)).count();
        constant *= int(24 * (w_prime + 2));
    }
    if let Some(&x0) = consts.get(&0) {
        let z = zero.ok_or_else(|| Error::PreconditionViolated("the simulation needs a zero gadget".into()))?;
        b.embed(z, &[(z.distinguished[0], x0)], "c0")?;
        constant *= z.claimed_constant.clone();
        notes.push("zero");
    }
    if let Some(&x1) = consts.get(&1) {
        let o = one.ok_or_else(|| Error::PreconditionViolated("the simulation needs a one gadget".into()))?;
        b.embed(o, &[(o.distinguished[0], x1)], "c1")?;
        constant *= o.claimed_constant.clone();
        notes.push("one");
    }
    if !negs.is_empty() {
        let ng = neg.ok_or_else(|| Error::PreconditionViolated("the simulation needs a negation gadget".into()))?;
        constant *= int(4 * (sim.source.arity() + 1)) * ng.claimed_constant.clone();
        for (n, w) in &negs {
            b.embed(ng, &[(ng.distinguished[0], *n), (ng.distinguished[1], *w)], "neg")?;
        }
        notes.push("negation");
    }
    let note = (!notes.is_empty()).then(|| format!("product of simulation and {} gadget constants", notes.join("/")));
    let dist = vec![host[&SIM_X], host[&SIM_Y], host[&SIM_Z]];
    let g = b.finish(dist, constant, "simulation gadget", note)?;
    g.certify_exact(sim.target.constraint().accepted())?;
    Ok(g)
}

/// Replaces every language constraint of a gadget by a parent constraint of
/// `gamma` whose restriction it is, with fresh variables for the parent's
/// extra variables. The constant is multiplied by `L`, the largest arity
/// in `gamma`.
pub fn the_bends(g: &GadgetOutput, gamma: &[Constraint]) -> Result<GadgetOutput> {
    let mut b = Builder::new("bend", g.cs.k());
    b.names = g.cs.variables().iter().map(|v| v.name.clone()).collect();
    for (i, o) in g.origins.iter().enumerate() {
        let lang = &g.language[o.source];
        let parent = gamma
            .iter()
            .find(|p| lang.context().iter().all(|v| p.position(*v).is_some()) && p.restrict(lang.context()).ok().as_ref() == Some(lang))
            .ok_or_else(|| Error::PreconditionViolated(format!("constraint {i} has no parent in the language")))?;
        let images = parent
            .context()
            .iter()
            .map(|&v| match lang.position(v) {
                Some(p) => Ok(o.map.images()[p]),
                None => Ok(Target::Var(b.fresh(&format!("c{i}")))),
            })
            .collect::<Result<Vec<_>>>()?;
        b.add(parent, images)?;
    }
    let l = gamma.iter().map(Constraint::arity).max().unwrap_or(1);
    let note = Some(format!("{} times L = {l}", g.claimed_constant));
    let out = b.finish(g.distinguished.clone(), g.claimed_constant.clone() * int(l), &g.provenance, note)?;
    Ok(out)
}

/// Which branch the general gadget pipeline took.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum GadgetBranch {
    /// Both `00` and `11` edges occur: simulation with negation.
    WithNegation,
    /// Only `11` edges occur.
    OnlyOnes,
    /// Only `00` edges occur: the labels are flipped.
    OnlyZeros,
}

/// The general commutativity gadget for an NP-complete boolean TVF
/// language, with distinguished `(x, y)`.
pub fn general_commutativity_gadget(gamma: &[Constraint]) -> Result<GadgetOutput> {
    general_commutativity_gadget_traced(gamma).map(|(g, _)| g)
}

/// The general gadget together with the branch taken.
pub fn general_commutativity_gadget_traced(gamma: &[Constraint]) -> Result<(GadgetOutput, GadgetBranch)> {
    if let Some(c) = gamma.iter().find(|c| c.k() != 2) {
        return Err(Error::NegationOnNonBoolean(c.k()));
    }
    if let Some(c) = gamma.iter().find(|c| !is_tvf(c)) {
        return Err(Error::PreconditionViolated(format!(
            "{c} is not TVF; use the non-TVF empty-constraint replacement"
        )));
    }
    let verdict = classify_boolean(gamma)?;
    if verdict.verdict != Complexity::NpComplete {
        let names = &verdict.preserving;
        return Err(Error::PreconditionViolated(format!(
            "the language is in P (preserved by {})",
            names.join(", ")
        )));
    }
    let mc = maximal_compression(gamma)?;
    let comp: Vec<Constraint> = mc.comp.iter().filter(|c| c.arity() > 0).cloned().collect();
    let ones = comp.iter().any(|c| has_edge(c, 1));
    let zeros = comp.iter().any(|c| has_edge(c, 0));
    let (branch, g) = match (zeros, ones) {
        (true, true) => (GadgetBranch::WithNegation, build_general(gamma, &comp, true)?),
        (false, true) => (GadgetBranch::OnlyOnes, build_general(gamma, &comp, false)?),
        (true, false) => {
            let flipped: Vec<Constraint> = gamma.iter().map(|c| c.negate_all()).collect::<Result<_>>()?;
            let fmc = maximal_compression(&flipped)?;
            let fcomp: Vec<Constraint> = fmc.comp.iter().filter(|c| c.arity() > 0).cloned().collect();
            let g = build_general(&flipped, &fcomp, false)?;
            (GadgetBranch::OnlyZeros, flip_gadget(&g)?)
        }
        (false, false) => {
            return Err(Error::PostconditionFailed("no compressed constraint has a 00 or 11 edge".into()));
        }
    };
    g.certify()?;
    Ok((g, branch))
}

fn flip_gadget(g: &GadgetOutput) -> Result<GadgetOutput> {
    let language: Vec<Constraint> = g.language.iter().map(|c| c.negate_all()).collect::<Result<_>>()?;
    let constraints = g.cs.constraints().iter().map(|c| c.negate_all()).collect::<Result<Vec<_>>>()?;
    let names = g.cs.variables().iter().map(|v| v.name.clone()).collect();
    let mut out = g.clone();
    out.cs = ConstraintSystem::new(2, names, constraints)?;
    out.language = language;
    out.provenance = format!("{} (labels flipped)", g.provenance);
    out.check_origins()?;
    Ok(out)
}

/// Unary `{1}` realized as the restriction of a parent constraint to a
/// variable that is constantly 1 in it.
fn unary_one_from_parents(gamma: &[Constraint]) -> Option<Constraint> {
    gamma.iter().find_map(|p| {
        p.context().iter().find_map(|&v| {
            let r = p.restrict(&[v]).ok()?;
            (r.accepted() == [vec![1u8]]).then_some(r)
        })
    })
}

fn build_general(gamma: &[Constraint], comp: &[Constraint], with_negation: bool) -> Result<GadgetOutput> {
    let c1 = smallest(comp.iter().filter(|c| Polymorphism::maj().preserves(c).is_ok_and(|p| !p.holds)))
        .ok_or_else(|| Error::PostconditionFailed("no compressed constraint fails MAJ".into()))?;
    let c3 = smallest(comp.iter().filter(|c| has_edge(c, 1)))
        .ok_or_else(|| Error::PostconditionFailed("no compressed constraint has an 11 edge".into()))?;
    let c2 = match smallest(comp.iter().filter(|c| rejects_zero(c))) {
        Some(c) => Some(c.clone()),
        None => unary_one_from_parents(gamma),
    };
    let (sim, neg) = if with_negation {
        let c4 = smallest(comp.iter().filter(|c| has_edge(c, 0)))
            .ok_or_else(|| Error::PostconditionFailed("no compressed constraint has a 00 edge".into()))?;
        (simulate_one_in_three_neg(c1)?, Some(negation_gadget(c4, c3)?))
    } else {
        (simulate_one_in_three(c1)?, None)
    };
    let zero = zero_gadget(c3)?;
    let one = match &c2 {
        Some(c2) => Some(one_gadget(c3, c2)?),
        None => None,
    };
    let sg = simulate_gadget(&sim, Some(&zero), one.as_ref(), neg.as_ref())?;
    let basic = basic_gadget(&sim.target.constraint(), None)?;
    let mut b = Builder::new("gen", 2);
    let roles: Vec<usize> = BASIC_ROLES.iter().map(|r| b.fresh(r)).collect();
    for (t, o) in basic.origins.iter().enumerate() {
        let bind: Vec<(usize, usize)> = o
            .map
            .source()
            .iter()
            .zip(o.map.images())
            .map(|(&slot, img)| {
                let w = img.var().expect("basic gadget maps to variables");
                (sg.distinguished[slot], roles[w])
            })
            .collect();
        b.embed(&sg, &bind, &format!("t{}", t + 1))?;
    }
    let constant = basic.claimed_constant.clone() * sg.claimed_constant.clone();
    let inner = b.finish(
        vec![roles[X], roles[Y]],
        constant,
        "general commutativity gadget",
        Some("poly(L) realized as the product of the composed constants".into()),
    )?;
    let mut out = the_bends(&inner, gamma)?;
    out.constant_note = Some(format!(
        "poly(L) realized as the product of the composed constants: 512 x {} x L",
        sg.claimed_constant
    ));
    Ok(out)
}

/// A reduction output: the new system (with its distribution attached when
/// one is defined) and the claimed homomorphism constant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reduction {
    pub cs: ConstraintSystem,
    pub claimed_constant: Option<BigRational>,
    pub provenance: String,
    pub pair_distribution: Option<Distribution<(usize, usize)>>,
}

/// True for a full constraint on two variables.
pub fn is_empty_constraint(c: &Constraint) -> bool {
    c.arity() == 2 && c.is_full()
}

/// Replaces every empty two-variable constraint by the non-TVF witness `C`
/// with `u, v` on its variables and fresh variables elsewhere. The
/// constraint distribution is unchanged; the constant is `L/2`.
pub fn replace_empty_nontvf(s: &ConstraintSystem, witness: &Constraint, u: usize, v: usize) -> Result<Reduction> {
    if witness.k() != s.k() {
        return Err(Error::AlphabetMismatch { expected: s.k(), found: witness.k() });
    }
    if u == v || witness.position(u).is_none() || witness.position(v).is_none() {
        return Err(Error::PreconditionViolated("u and v must be distinct variables of the witness".into()));
    }
    if !witness.restrict(&[u, v])?.is_full() {
        return Err(Error::PreconditionViolated(format!("({u}, {v}) does not witness that {witness} is non-TVF")));
    }
    let pi = s.constraint_distribution()?;
    let mut out = s.clone();
    let mut constraints = Vec::new();
    let mut fresh = 0usize;
    for (i, c) in s.constraints().iter().enumerate() {
        if !is_empty_constraint(c) {
            constraints.push(c.clone());
            continue;
        }
        let (x, y) = (c.context()[0], c.context()[1]);
        let mut images = Vec::new();
        for &w in witness.context() {
            images.push(Target::Var(if w == u {
                x
            } else if w == v {
                y
            } else {
                let id = out.push_variable(format!("z.{i}.{fresh}"))?;
                fresh += 1;
                id
            }));
        }
        constraints.push(witness.pushforward(&VarMap::new(witness.context().to_vec(), images)?)?);
    }
    let names = out.variables().iter().map(|v| v.name.clone()).collect();
    let cs = ConstraintSystem::new(s.k(), names, constraints)?.with_distribution(QuestionDistribution::Constraints(pi))?;
    let l = cs.max_arity().max(witness.arity());
    Ok(Reduction {
        cs,
        claimed_constant: Some(ratio(l as i64, 2)),
        provenance: "empty-constraint replacement (non-TVF)".into(),
        pair_distribution: None,
    })
}

/// Prism roles in the order `x, y, z, x', y', z'`.
pub const PRISM_ROLES: [&str; 6] = ["x", "y", "z", "x'", "y'", "z'"];
/// Prism edges, triangles first and then the three rungs.
pub const PRISM_EDGES: [(usize, usize); 9] = [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3), (0, 3), (1, 4), (2, 5)];

/// The triangular prism 3-colouring gadget with distinguished `(x, y')`.
pub fn prism_gadget() -> Result<GadgetOutput> {
    let neq = Constraint::neq(3, 0, 1)?;
    let mut b = Builder::new("prism", 3);
    let ids: Vec<usize> = PRISM_ROLES.iter().map(|r| b.fresh(r)).collect();
    for &(a, c) in &PRISM_EDGES {
        b.add(&neq, vec![Target::Var(ids[a]), Target::Var(ids[c])])?;
    }
    let note = "the composed 3-colouring gadget constant is not explicitly quantified; 6240 is the prism inequality constant";
    let g = b.finish(vec![ids[0], ids[4]], int(6240), "prism gadget", Some(note.into()))?;
    g.certify()?;
    Ok(g)
}

fn is_neq3(c: &Constraint) -> bool {
    c.k() == 3
        && c.arity() == 2
        && Constraint::neq(3, c.context()[0], c.context()[1]).is_ok_and(|n| n == *c)
}

/// Replaces every empty constraint `(x_i, y_i)` of a 3-colouring instance
/// by a prism with `x = x_i`, `y' = y_i` and fresh `y, z, x', z'`; each prism
/// edge gets weight `pi(i)/9`.
pub fn replace_empty_3col(s: &ConstraintSystem) -> Result<Reduction> {
    if s.k() != 3 {
        return Err(Error::AlphabetMismatch { expected: 3, found: s.k() });
    }
    let pi = s.constraint_distribution()?;
    let mut out = s.clone();
    let mut constraints = Vec::new();
    let mut weights = Vec::new();
    for (i, c) in s.constraints().iter().enumerate() {
        let w = pi.weight(&i);
        if is_neq3(c) {
            constraints.push(c.clone());
            weights.push(w);
            continue;
        }
        if !is_empty_constraint(c) {
            return Err(Error::PreconditionViolated(format!("constraint {i} is neither NEQ3 nor empty")));
        }
        let mut ids = [c.context()[0], 0, 0, 0, c.context()[1], 0];
        for r in [1, 2, 3, 5] {
            ids[r] = out.push_variable(format!("prism.{i}.{}", PRISM_ROLES[r]))?;
        }
        for &(a, b) in &PRISM_EDGES {
            constraints.push(Constraint::neq(3, ids[a], ids[b])?);
            weights.push(w.clone() / int(9));
        }
    }
    let names = out.variables().iter().map(|v| v.name.clone()).collect();
    let dist = Distribution::new(weights.into_iter().enumerate())?;
    let cs = ConstraintSystem::new(3, names, constraints)?.with_distribution(QuestionDistribution::Constraints(dist))?;
    Ok(Reduction {
        cs,
        claimed_constant: None,
        provenance: "empty-constraint replacement (prism)".into(),
        pair_distribution: None,
    })
}

/// Converts a boolean system of exactly-one constraints on `k >= 3`
/// variables into a `k`-ary two-variable system: a question variable `y_i`
/// per constraint and, for `x` at position `p` of `V_i`, the binary
/// constraint `D_x = {(a,0): a != p} ∪ {(p,b): b != 0}` on `(y_i, x)`, with
/// weight `pi(i)/|V_i|`.
pub fn cv_to_2csp(s: &ConstraintSystem) -> Result<Reduction> {
    if s.k() != 2 {
        return Err(Error::AlphabetMismatch { expected: 2, found: s.k() });
    }
    let k = s.constraints().first().map(|c| c.arity()).unwrap_or(0);
    if k < 3 || k > u8::MAX as usize {
        return Err(Error::PreconditionViolated("constraints must have at least 3 variables".into()));
    }
    for (i, c) in s.constraints().iter().enumerate() {
        let hot: Vec<Tuple> = (0..c.arity()).map(|p| (0..c.arity()).map(|q| u8::from(p == q)).collect()).collect();
        if c.arity() != k || c.accepted() != {
            let mut h = hot.clone();
            h.sort();
            h
        } {
            return Err(Error::PreconditionViolated(format!("constraint {i} is not exactly-one on {k} variables")));
        }
    }
    let pi = s.constraint_distribution()?;
    let n = s.num_variables();
    let mut names: Vec<String> = s.variables().iter().map(|v| v.name.clone()).collect();
    names.extend((0..s.constraints().len()).map(|i| format!("y.{i}")));
    let kk = k as u8;
    let mut constraints = Vec::new();
    let mut weights = Vec::new();
    for (i, c) in s.constraints().iter().enumerate() {
        for (p, &x) in c.context().iter().enumerate() {
            let p = p as u8;
            constraints.push(Constraint::from_predicate(kk, vec![n + i, x], |t| {
                (t[0] != p && t[1] == 0) || (t[0] == p && t[1] != 0)
            })?);
            weights.push(pi.weight(&i) / int(k));
        }
    }
    let dist = Distribution::new(weights.into_iter().enumerate())?;
    let cs = ConstraintSystem::new(kk, names, constraints)?.with_distribution(QuestionDistribution::Constraints(dist))?;
    Ok(Reduction {
        cs,
        claimed_constant: Some(BigRational::one()),
        provenance: "constraint-variable to two-variable system".into(),
        pair_distribution: None,
    })
}

/// First variable of `c` that takes every value in some accepted tuple.
pub fn find_free_variable(c: &Constraint) -> Option<usize> {
    c.context().iter().copied().find(|&v| c.restrict(&[v]).is_ok_and(|r| r.len() == c.k() as usize))
}

/// Appends an anchor copy of `C0` for every variable `x` (with `v -> x` and
/// fresh copies of the other variables), halves the constraint mass onto
/// the original constraints and spreads the other half over anchors. The
/// pair distribution `pi''(i, anchor(x)) = pi(i)/|V_i|` is returned too.
pub fn cc_expand(s: &ConstraintSystem, anchor: &Constraint, v: usize) -> Result<Reduction> {
    if anchor.k() != s.k() {
        return Err(Error::AlphabetMismatch { expected: s.k(), found: anchor.k() });
    }
    if anchor.position(v).is_none() || anchor.restrict(&[v])?.len() != s.k() as usize {
        return Err(Error::PreconditionViolated(format!("variable {v} is not free in the anchor constraint")));
    }
    let pi = s.constraint_distribution()?;
    let m = s.constraints().len();
    let n = s.num_variables();
    let mut out = s.clone();
    let mut constraints: Vec<Constraint> = s.constraints().to_vec();
    for x in 0..n {
        let mut images = Vec::new();
        for &u in anchor.context() {
            images.push(Target::Var(if u == v {
                x
            } else {
                out.push_variable(format!("{}.anchor.{u}", s.var_name(x)))?
            }));
        }
        constraints.push(anchor.pushforward(&VarMap::new(anchor.context().to_vec(), images)?)?);
    }
    let half = ratio(1, 2);
    let mut weights: Vec<(usize, BigRational)> = (0..m).map(|i| (i, pi.weight(&i) * &half)).collect();
    let mut anchor_w = vec![BigRational::zero(); n];
    let mut pairs = Vec::new();
    for (i, c) in s.constraints().iter().enumerate() {
        let share = pi.weight(&i) / int(c.arity());
        for &x in c.context() {
            anchor_w[x] += share.clone() * &half;
            pairs.push(((i, m + x), share.clone()));
        }
    }
    weights.extend(anchor_w.into_iter().enumerate().map(|(x, w)| (m + x, w)));
    let names = out.variables().iter().map(|v| v.name.clone()).collect();
    let cs = ConstraintSystem::new(s.k(), names, constraints)?
        .with_distribution(QuestionDistribution::Constraints(Distribution::new(weights)?))?;
    Ok(Reduction {
        cs,
        claimed_constant: Some(int(2)),
        provenance: "constraint-variable to constraint-constraint expansion".into(),
        pair_distribution: Some(Distribution::new(pairs)?),
    })
}

/// Splits each constraint into clauses. Requires `V_ij ⊆ V_i`, every pair
/// of `V_i` inside some clause, and `C_i` equal to the conjunction of its
/// clauses. The pair distribution becomes
/// `pi_sub(ij, kl) = pi(i,k) / (m_i m_k)` over the flattened clause index.
pub fn subdivide(
    b: &ConstraintSystem,
    decomposition: &[Vec<Constraint>],
    pi: &Distribution<(usize, usize)>,
) -> Result<Reduction> {
    if decomposition.len() != b.constraints().len() {
        return Err(Error::Invalid(format!(
            "decomposition has {} entries for {} constraints",
            decomposition.len(),
            b.constraints().len()
        )));
    }
    let mut offsets = Vec::new();
    let mut clauses = Vec::new();
    for (i, (c, ds)) in b.constraints().iter().zip(decomposition).enumerate() {
        if ds.is_empty() {
            return Err(Error::PreconditionViolated(format!("constraint {i} has no clauses")));
        }
        for d in ds {
            if d.k() != b.k() {
                return Err(Error::AlphabetMismatch { expected: b.k(), found: d.k() });
            }
            if let Some(&v) = d.context().iter().find(|&&v| c.position(v).is_none()) {
                return Err(Error::PreconditionViolated(format!(
                    "clause variable {} is not in constraint {i}",
                    b.var_name(v)
                )));
            }
        }
        let ctx = c.context();
        for (p, &x) in ctx.iter().enumerate() {
            for &y in &ctx[p + 1..] {
                if !ds.iter().any(|d| d.position(x).is_some() && d.position(y).is_some()) {
                    return Err(Error::PreconditionViolated(format!(
                        "pair ({}, {}) of constraint {i} is not covered by any clause",
                        b.var_name(x),
                        b.var_name(y)
                    )));
                }
            }
        }
        for phi in TupleIter::new(b.k(), c.arity()) {
            let conj = ds.iter().all(|d| {
                let t: Tuple = d.context().iter().map(|&v| phi[c.position(v).expect("checked")]).collect();
                d.contains(&t)
            });
            if conj != c.contains(&phi) {
                return Err(Error::PreconditionViolated(format!(
                    "constraint {i} differs from the conjunction of its clauses at {phi:?}"
                )));
            }
        }
        offsets.push(clauses.len());
        clauses.extend(ds.iter().cloned());
    }
    let mut weights = Vec::new();
    for (&(i, k), w) in pi.iter() {
        let (mi, mk) = (decomposition[i].len(), decomposition[k].len());
        let share = w / int(mi * mk);
        for j in 0..mi {
            for l in 0..mk {
                weights.push(((offsets[i] + j, offsets[k] + l), share.clone()));
            }
        }
    }
    let dist = Distribution::new(weights)?;
    let names = b.variables().iter().map(|v| v.name.clone()).collect();
    let cs = ConstraintSystem::new(b.k(), names, clauses)?.with_distribution(QuestionDistribution::Pairs(dist.clone()))?;
    Ok(Reduction {
        cs,
        claimed_constant: None,
        provenance: "subdivision".into(),
        pair_distribution: Some(dist),
    })
}

/// The canonical decomposition of a constraint into its projections on
/// every pair of variables, when the constraint is their conjunction.
pub fn pairwise_decomposition(c: &Constraint) -> Result<Vec<Constraint>> {
    let ctx = c.context();
    let mut ds = Vec::new();
    for p in 0..ctx.len() {
        for q in p + 1..ctx.len() {
            ds.push(c.restrict(&[ctx[p], ctx[q]])?);
        }
    }
    if ds.is_empty() {
        ds.push(c.clone());
    }
    let factors = TupleIter::new(c.k(), c.arity()).all(|phi| {
        let conj = ds.iter().all(|d| {
            let t: Tuple = d.context().iter().map(|&v| phi[c.position(v).expect("subset")]).collect();
            d.contains(&t)
        });
        conj == c.contains(&phi)
    });
    if !factors {
        return Err(Error::PreconditionViolated(format!("{c} is not the conjunction of its pair projections")));
    }
    Ok(ds)
}

/// The oracularized game and its constraint system.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Oracularization {
    /// Constraints `C_i` on the answer bits of each question, followed by
    /// the pair constraints `C_ij` on `V_i ∪ V_j`.
    pub cs: ConstraintSystem,
    /// The pair questions `(i, j)` in constraint order after the first
    /// `|I|` constraints.
    pub pairs: Vec<(usize, usize)>,
    pub distribution: Distribution<(usize, usize)>,
    pub game: GameSpec,
}

/// Number of bits used to encode `n` answers.
pub fn answer_bits(n: usize) -> usize {
    let mut m = 0;
    while (1usize << m) < n {
        m += 1;
    }
    m.max(1)
}

fn bits_of(a: usize, m: usize) -> Vec<Value> {
    (0..m).map(|t| ((a >> t) & 1) as Value).collect()
}

/// Oracularizes a synchronous game: answers are encoded in bits, question
/// `i` becomes the constraint of valid answer codes, each support pair
/// `(i, j)` becomes the constraint of accepted answer pairs on `V_i ∪ V_j`,
/// and the distribution puts `pi(i,j)/8` on each of `((i,j),i)`, `((i,j),j)`,
/// `(i,(i,j))`, `(j,(i,j))` and `pi(i,j)/2` on `((i,j),(i,j))`.
pub fn oracularize(g: &GameSpec) -> Result<Oracularization> {
    if !g.synchronous {
        return Err(Error::PreconditionViolated("oracularization needs a synchronous game".into()));
    }
    let nq = g.questions.len();
    let bits: Vec<usize> = (0..nq).map(|q| answer_bits(g.answers(q))).collect();
    let mut names = Vec::new();
    let mut vars: Vec<Vec<usize>> = Vec::new();
    for (q, &m) in bits.iter().enumerate() {
        vars.push((0..m).map(|t| names.len() + t).collect());
        names.extend((0..m).map(|t| format!("q{q}.b{t}")));
    }
    let mut constraints = Vec::new();
    for q in 0..nq {
        let codes = (0..g.answers(q)).map(|a| bits_of(a, bits[q])).collect();
        constraints.push(Constraint::new(2, vars[q].clone(), codes)?);
    }
    let pi = g.distribution()?;
    let mut pairs = Vec::new();
    for (&(i, j), _) in pi.iter() {
        let entries: Vec<_> = g.entries.iter().filter(|e| e.qa == i && e.qb == j).collect();
        let ok = |a: usize, b: usize| entries.iter().all(|e| g.accepts(e, a, b));
        let c = if i == j {
            let codes: Vec<Tuple> = (0..g.answers(i)).filter(|&a| ok(a, a)).map(|a| bits_of(a, bits[i])).collect();
            Constraint::new(2, vars[i].clone(), codes)
        } else {
            let mut ctx = vars[i].clone();
            ctx.extend(&vars[j]);
            let mut acc = Vec::new();
            for a in 0..g.answers(i) {
                for b in 0..g.answers(j) {
                    if ok(a, b) {
                        let mut t = bits_of(a, bits[i]);
                        t.extend(bits_of(b, bits[j]));
                        acc.push(t);
                    }
                }
            }
            Constraint::new(2, ctx, acc)
        }
        .map_err(|_| Error::PreconditionViolated(format!("question pair ({i}, {j}) accepts no answers")))?;
        pairs.push((i, j));
        constraints.push(c);
    }
    let eighth = ratio(1, 8);
    let half = ratio(1, 2);
    let mut weights = Vec::new();
    for (t, &(i, j)) in pairs.iter().enumerate() {
        let p = nq + t;
        let w = pi.weight(&(i, j));
        for q in [(p, i), (p, j), (i, p), (j, p)] {
            weights.push((q, w.clone() * &eighth));
        }
        weights.push(((p, p), w * &half));
    }
    let distribution = Distribution::new(weights)?;
    let cs = ConstraintSystem::new(2, names, constraints)?
        .with_distribution(QuestionDistribution::Pairs(distribution.clone()))?;
    let game = cc_game(&cs, &distribution)?;
    Ok(Oracularization { cs, pairs, distribution, game })
}

/// True when some single function answers every question pair of the
/// support with an accepted pair, by exhaustive search.
pub fn has_perfect_synchronous_assignment(g: &GameSpec, bound: u128) -> Result<bool> {
    let v = crate::games::classical_value(g, bound)?;
    Ok(v.synchronous_value.is_some_and(|v| v.is_one()))
}

/// Converts a small rational to `f64` for reports.
pub fn constant_f64(c: &BigRational) -> f64 {
    c.to_f64().unwrap_or(f64::NAN)
}
