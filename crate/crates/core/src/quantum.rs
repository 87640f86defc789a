//! Finite-dimensional synchronous strategies under the normalized matrix
//! trace: projective measurements, the defect functionals of the
//! constraint-constraint, constraint-variable and assignment algebras,
//! winning probabilities, seesaw improvement, and numerical checks of the
//! operator inequalities and homomorphism constants.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Complex, DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cs::{one_hot, rat_to_f64, Constraint, ConstraintSystem, Distribution, Tuple, Value};
use crate::error::{Error, Result};
use crate::games::{cc_game, cv_game, twocs_game, GameSpec, QuestionRole};
use crate::gadgets::Reduction;

/// Complex scalar.
pub type C64 = Complex<f64>;
/// Dense complex matrix.
pub type CMat = DMatrix<C64>;

/// Tolerance for projector validation.
pub const TOL_PROJ: f64 = 1e-9;
/// Slack allowed in numerical inequality checks.
pub const TOL_NUM: f64 = 1e-7;

/// Normalized Hilbert-Schmidt square `||A||_tau^2 = tr(A* A) / d`.
pub fn hsq(a: &CMat) -> f64 {
    a.norm_squared() / a.nrows().max(1) as f64
}

/// Normalized trace.
pub fn tau(a: &CMat) -> C64 {
    a.trace() / C64::new(a.nrows().max(1) as f64, 0.0)
}

/// Commutator `ab - ba`.
pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// Sum that does not depend on the order of the summands.
pub fn stable_sum(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

fn zeros(d: usize) -> CMat {
    CMat::zeros(d, d)
}

/// A projective measurement on `C^d`: one projector per outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct Pvm {
    pub d: usize,
    pub projectors: Vec<CMat>,
}

/// Validation residuals of a measurement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PvmResidual {
    /// Largest `max |P^2 - P|` or `max |P - P*|` entry.
    pub projector: f64,
    /// Largest entry of `sum_a P_a - I`.
    pub completeness: f64,
}

impl PvmResidual {
    pub fn max(&self) -> f64 {
        self.projector.max(self.completeness)
    }
}

fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

impl Pvm {
    /// Checks shapes only; see [`Pvm::residual`] for the algebraic checks.
    pub fn new(projectors: Vec<CMat>) -> Result<Self> {
        let d = projectors.first().map(|p| p.nrows()).ok_or_else(|| Error::Invalid("a PVM needs an outcome".into()))?;
        if projectors.iter().any(|p| p.nrows() != d || p.ncols() != d) {
            return Err(Error::Invalid("PVM projectors must be square of one dimension".into()));
        }
        Ok(Pvm { d, projectors })
    }

    /// The deterministic measurement with outcome `a` of `n` on `C^d`.
    pub fn deterministic(d: usize, n: usize, a: usize) -> Self {
        let projectors = (0..n).map(|b| if a == b { identity(d) } else { zeros(d) }).collect();
        Pvm { d, projectors }
    }

    /// The diagonal measurement assigning basis vector `j` to `labels[j]`.
    pub fn diagonal(labels: &[usize], n: usize) -> Self {
        let d = labels.len();
        let mut projectors = vec![zeros(d); n];
        for (j, &a) in labels.iter().enumerate() {
            projectors[a][(j, j)] = C64::new(1.0, 0.0);
        }
        Pvm { d, projectors }
    }

    pub fn outcomes(&self) -> usize {
        self.projectors.len()
    }

    /// Projector, self-adjointness and completeness residuals.
    pub fn residual(&self) -> PvmResidual {
        let mut projector: f64 = 0.0;
        let mut sum = zeros(self.d);
        for p in &self.projectors {
            projector = projector.max(max_abs(&(p * p - p))).max(max_abs(&(p - p.adjoint())));
            sum += p;
        }
        PvmResidual { projector, completeness: max_abs(&(sum - identity(self.d))) }
    }

    /// Fails when a residual exceeds `tol`.
    pub fn validate(&self, tol: f64) -> Result<PvmResidual> {
        let r = self.residual();
        if r.max() > tol {
            return Err(Error::PreconditionViolated(format!(
                "measurement residual {:.3e} exceeds tolerance {tol:.1e}",
                r.max()
            )));
        }
        Ok(r)
    }

    /// The generated unitary `sum_a omega^a P_a` with `omega = e^{2 pi i / n}`.
    pub fn unitary(&self) -> CMat {
        let n = self.outcomes() as f64;
        let mut u = zeros(self.d);
        for (a, p) in self.projectors.iter().enumerate() {
            let w = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * a as f64 / n);
            u += p * w;
        }
        u
    }

    /// `max |U^n - I|` and `max |U U* - I|` for the generated unitary.
    pub fn unitary_residual(&self) -> f64 {
        let u = self.unitary();
        let mut pow = identity(self.d);
        for _ in 0..self.outcomes() {
            pow = &pow * &u;
        }
        max_abs(&(pow - identity(self.d))).max(max_abs(&(&u * u.adjoint() - identity(self.d))))
    }
}

/// Which algebra a strategy represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Context measurements only.
    Cc,
    /// Context and variable measurements.
    Cv,
    /// Variable measurements only.
    A,
}

impl Model {
    pub fn needs_contexts(self) -> bool {
        matches!(self, Model::Cc | Model::Cv)
    }

    pub fn needs_variables(self) -> bool {
        matches!(self, Model::Cv | Model::A)
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Cc => "cc",
            Model::Cv => "cv",
            Model::A => "a",
        })
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cc" => Ok(Model::Cc),
            "cv" => Ok(Model::Cv),
            "a" => Ok(Model::A),
            _ => Err(Error::Parse(format!("unknown model {s:?} (expected cc, cv or a)"))),
        }
    }
}

/// A synchronous strategy: context measurements over the accepted tuples
/// of each constraint (in stored order) and variable measurements over
/// `Z_k`, all on `C^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct SyncStrategy {
    pub model: Model,
    pub d: usize,
    pub context_pvms: Vec<Pvm>,
    pub variable_pvms: Vec<Pvm>,
}

/// Validation summary of a strategy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StrategyDiagnostics {
    pub max_residual: f64,
    pub max_unitary_residual: f64,
}

impl SyncStrategy {
    /// Checks that the model's measurement families are present with the
    /// right outcome counts and dimension, and that every measurement is a
    /// PVM within `tol`.
    pub fn validate(&self, s: &ConstraintSystem, tol: f64) -> Result<StrategyDiagnostics> {
        self.check_shape(s)?;
        let mut max_residual: f64 = 0.0;
        let mut max_unitary_residual: f64 = 0.0;
        for p in self.context_pvms.iter().chain(&self.variable_pvms) {
            max_residual = max_residual.max(p.validate(tol)?.max());
        }
        for p in &self.variable_pvms {
            max_unitary_residual = max_unitary_residual.max(p.unitary_residual());
        }
        Ok(StrategyDiagnostics { max_residual, max_unitary_residual })
    }

    /// Shape checks only.
    pub fn check_shape(&self, s: &ConstraintSystem) -> Result<()> {
        let m = s.constraints().len();
        let n = s.num_variables();
        if self.model.needs_contexts() {
            if self.context_pvms.len() != m {
                return Err(Error::Invalid(format!("{} context measurements for {m} constraints", self.context_pvms.len())));
            }
            for (i, (p, c)) in self.context_pvms.iter().zip(s.constraints()).enumerate() {
                if p.outcomes() != c.len() {
                    return Err(Error::Invalid(format!(
                        "context measurement {i} has {} outcomes for {} accepted tuples",
                        p.outcomes(),
                        c.len()
                    )));
                }
            }
        }
        if self.model.needs_variables() {
            if self.variable_pvms.len() != n {
                return Err(Error::Invalid(format!("{} variable measurements for {n} variables", self.variable_pvms.len())));
            }
            if let Some(x) = self.variable_pvms.iter().position(|p| p.outcomes() != s.k() as usize) {
                return Err(Error::Invalid(format!("variable measurement {x} does not have {} outcomes", s.k())));
            }
        }
        if self.context_pvms.iter().chain(&self.variable_pvms).any(|p| p.d != self.d) {
            return Err(Error::Invalid(format!("all measurements must act on dimension {}", self.d)));
        }
        Ok(())
    }

    fn context(&self, i: usize) -> Result<&Pvm> {
        self.context_pvms.get(i).ok_or_else(|| Error::Invalid(format!("strategy has no context measurement {i}")))
    }

    fn variable(&self, x: usize) -> Result<&Pvm> {
        self.variable_pvms.get(x).ok_or_else(|| Error::Invalid(format!("strategy has no variable measurement {x}")))
    }

    /// The same measurements reinterpreted in another model.
    pub fn as_model(&self, model: Model) -> SyncStrategy {
        SyncStrategy {
            model,
            d: self.d,
            context_pvms: if model.needs_contexts() { self.context_pvms.clone() } else { Vec::new() },
            variable_pvms: if model.needs_variables() { self.variable_pvms.clone() } else { Vec::new() },
        }
    }
}

/// `Pi_a(sigma_i(x))`: the sum of context projectors whose tuple has value
/// `a` at position `p`.
pub fn context_marginal(c: &Constraint, pvm: &Pvm, p: usize, a: Value) -> CMat {
    let mut m = zeros(pvm.d);
    for (t, phi) in c.accepted().iter().enumerate() {
        if phi[p] == a {
            m += &pvm.projectors[t];
        }
    }
    m
}

/// The measurement a strategy uses to answer a question.
fn question_pvm<'a>(st: &'a SyncStrategy, role: QuestionRole) -> Result<&'a Pvm> {
    match role {
        QuestionRole::Context(i) => st.context(i),
        QuestionRole::Variable(x) => st.variable(x),
        QuestionRole::Other => Err(Error::Invalid("question has no strategy measurement".into())),
    }
}

/// Winning probability `sum pi(q,q') sum_{V=1} tau(M_a M_b)` of a
/// synchronous strategy.
pub fn winning_probability(st: &SyncStrategy, g: &GameSpec) -> Result<f64> {
    let mut terms = Vec::new();
    for e in &g.entries {
        let ma = question_pvm(st, g.questions[e.qa].role)?;
        let mb = question_pvm(st, g.questions[e.qb].role)?;
        if ma.outcomes() != g.answers(e.qa) || mb.outcomes() != g.answers(e.qb) {
            return Err(Error::Invalid(format!("measurement outcomes do not match questions ({}, {})", e.qa, e.qb)));
        }
        let w = rat_to_f64(&e.weight);
        let mut s = Vec::new();
        for a in 0..ma.outcomes() {
            for b in 0..mb.outcomes() {
                if g.accepts(e, a, b) {
                    s.push(tau(&(&ma.projectors[a] * &mb.projectors[b])).re);
                }
            }
        }
        terms.push(w * stable_sum(s));
    }
    Ok(stable_sum(terms))
}

/// One group of defect terms.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DefectTerm {
    pub functional: String,
    pub label: String,
    pub weight: f64,
    /// Sum of `||r||_tau^2` over the relations of the group.
    pub norm_sq: f64,
    pub contribution: f64,
}

/// Defects of a strategy with a per-group breakdown.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DefectReport {
    pub model: Model,
    /// Winning probability in the associated game, when one exists.
    pub value: Option<f64>,
    /// The model's defect.
    pub defect: f64,
    /// Totals per functional (`cc`, `inter`, `cv`, `a`, `comm`, `a+comm`).
    pub totals: BTreeMap<String, f64>,
    pub terms: Vec<DefectTerm>,
}

impl DefectReport {
    fn total(&self, name: &str) -> f64 {
        self.totals.get(name).copied().unwrap_or(0.0)
    }
}

fn push_term(terms: &mut Vec<DefectTerm>, functional: &str, label: String, weight: f64, parts: Vec<f64>) {
    let norm_sq = stable_sum(parts);
    terms.push(DefectTerm { functional: functional.into(), label, weight, norm_sq, contribution: weight * norm_sq });
}

fn total_of(terms: &[DefectTerm], functional: &str) -> f64 {
    stable_sum(terms.iter().filter(|t| t.functional == functional).map(|t| t.contribution).collect())
}

fn overlap(ci: &Constraint, cj: &Constraint) -> Vec<(usize, usize, usize)> {
    ci.context().iter().enumerate().filter_map(|(p, &v)| cj.position(v).map(|q| (v, p, q))).collect()
}

/// Constraint-constraint defect `sum pi(i,j) sum ||P_phi Q_psi||^2` over
/// inconsistent answer pairs, together with the inter-contextual defect
/// `sum_{i != j} pi(i,j) sum_x sum_{l=1}^{k-1} ||sigma_i(x)^l - sigma_j(x)^l||^2`.
pub fn defect_cc(st: &SyncStrategy, s: &ConstraintSystem, pi: &Distribution<(usize, usize)>) -> Result<DefectReport> {
    if !st.model.needs_contexts() {
        return Err(Error::PreconditionViolated(format!("the cc defect needs context measurements, not model {}", st.model)));
    }
    st.check_shape(s)?;
    let k = s.k() as usize;
    let mut terms = Vec::new();
    for (&(i, j), w) in pi.iter() {
        let (ci, cj) = (&s.constraints()[i], &s.constraints()[j]);
        let (pi_, pj) = (st.context(i)?, st.context(j)?);
        let ov = overlap(ci, cj);
        let mut parts = Vec::new();
        for (a, phi) in ci.accepted().iter().enumerate() {
            for (b, psi) in cj.accepted().iter().enumerate() {
                if ov.iter().any(|&(_, p, q)| phi[p] != psi[q]) {
                    parts.push(hsq(&(&pi_.projectors[a] * &pj.projectors[b])));
                }
            }
        }
        let wf = rat_to_f64(w);
        push_term(&mut terms, "cc", format!("({i},{j})"), wf, parts);
        if i != j && !ov.is_empty() {
            let mut iparts = Vec::new();
            for &(_, p, q) in &ov {
                let ui = unitary_of_marginals(ci, pi_, p, k);
                let uj = unitary_of_marginals(cj, pj, q, k);
                let (mut pi_l, mut pj_l) = (identity(st.d), identity(st.d));
                for _ in 1..k {
                    pi_l = &pi_l * &ui;
                    pj_l = &pj_l * &uj;
                    iparts.push(hsq(&(&pi_l - &pj_l)));
                }
            }
            push_term(&mut terms, "inter", format!("({i},{j})"), wf, iparts);
        }
    }
    let cc = total_of(&terms, "cc");
    let inter = total_of(&terms, "inter");
    let value = winning_probability(st, &cc_game(s, pi)?).ok();
    Ok(DefectReport {
        model: Model::Cc,
        value,
        defect: cc,
        totals: [("cc".to_string(), cc), ("inter".to_string(), inter)].into_iter().collect(),
        terms,
    })
}

fn unitary_of_marginals(c: &Constraint, pvm: &Pvm, p: usize, k: usize) -> CMat {
    let mut u = zeros(pvm.d);
    for a in 0..k {
        let w = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * a as f64 / k as f64);
        u += context_marginal(c, pvm, p, a as Value) * w;
    }
    u
}

/// Constraint-variable defect
/// `sum_i pi'(i)/|V_i| sum_{x, phi} ||P^i_phi (1 - Q^x_{phi(x)})||^2`.
pub fn defect_cv(st: &SyncStrategy, s: &ConstraintSystem, pi: &Distribution<usize>) -> Result<DefectReport> {
    if st.model != Model::Cv {
        return Err(Error::PreconditionViolated(format!("the cv defect needs a cv strategy, not model {}", st.model)));
    }
    st.check_shape(s)?;
    let mut terms = Vec::new();
    for (&i, w) in pi.iter() {
        let c = &s.constraints()[i];
        let p = st.context(i)?;
        let wf = rat_to_f64(w) / c.arity() as f64;
        for (pos, &x) in c.context().iter().enumerate() {
            let q = st.variable(x)?;
            let parts = c
                .accepted()
                .iter()
                .enumerate()
                .map(|(t, phi)| hsq(&(&p.projectors[t] * (identity(st.d) - &q.projectors[phi[pos] as usize]))))
                .collect();
            push_term(&mut terms, "cv", format!("({i},{})", s.var_name(x)), wf, parts);
        }
    }
    let cv = total_of(&terms, "cv");
    let value = winning_probability(st, &cv_game(s, pi)?).ok();
    Ok(DefectReport { model: Model::Cv, value, defect: cv, totals: [("cv".to_string(), cv)].into_iter().collect(), terms })
}

/// Positions of a constraint's context in ascending variable order.
fn ordered_positions(c: &Constraint) -> Vec<usize> {
    let mut pos: Vec<usize> = (0..c.arity()).collect();
    pos.sort_by_key(|&p| c.context()[p]);
    pos
}

/// `||Phi_{V,phi}||^2` for every rejected `phi`, where `Phi` is the product of
/// variable projectors in ascending variable order.
fn rejected_products(st: &SyncStrategy, c: &Constraint, k: u8) -> Result<Vec<f64>> {
    let order = ordered_positions(c);
    let qs: Vec<&Pvm> = order.iter().map(|&p| st.variable(c.context()[p])).collect::<Result<_>>()?;
    let mut out = Vec::new();
    let mut phi: Tuple = vec![0; c.arity()];
    fn rec(
        depth: usize,
        acc: &CMat,
        qs: &[&Pvm],
        order: &[usize],
        phi: &mut Tuple,
        c: &Constraint,
        k: u8,
        out: &mut Vec<f64>,
    ) {
        if depth == qs.len() {
            if !c.contains(phi) {
                out.push(hsq(acc));
            }
            return;
        }
        for a in 0..k {
            phi[order[depth]] = a;
            let next = acc * &qs[depth].projectors[a as usize];
            rec(depth + 1, &next, qs, order, phi, c, k, out);
        }
    }
    rec(0, &identity(st.d), &qs, &order, &mut phi, c, k, &mut out);
    Ok(out)
}

/// Assignment defect `sum_i pi'(i) sum_{phi notin C_i} ||Phi_{V_i,phi}||^2`
/// and the commutation defect
/// `sum_i pi'(i) sum_{x<y in V_i} sum_{a,b} ||[Q^x_a, Q^y_b]||^2`.
pub fn defect_a(st: &SyncStrategy, s: &ConstraintSystem, pi: &Distribution<usize>) -> Result<DefectReport> {
    if !st.model.needs_variables() {
        return Err(Error::PreconditionViolated(format!("the a defect needs variable measurements, not model {}", st.model)));
    }
    st.check_shape(s)?;
    let mut terms = Vec::new();
    for (&i, w) in pi.iter() {
        let c = &s.constraints()[i];
        let wf = rat_to_f64(w);
        push_term(&mut terms, "a", format!("{i}"), wf, rejected_products(st, c, s.k())?);
        let mut vars = c.context().to_vec();
        vars.sort_unstable();
        for (p, &x) in vars.iter().enumerate() {
            for &y in &vars[p + 1..] {
                let (qx, qy) = (st.variable(x)?, st.variable(y)?);
                let mut parts = Vec::new();
                for px in &qx.projectors {
                    for py in &qy.projectors {
                        parts.push(hsq(&commutator(px, py)));
                    }
                }
                push_term(&mut terms, "comm", format!("({i},{},{})", s.var_name(x), s.var_name(y)), wf, parts);
            }
        }
    }
    let a = total_of(&terms, "a");
    let comm = total_of(&terms, "comm");
    let value = if s.constraints().iter().all(|c| c.arity() == 2) {
        twocs_game(s, pi).ok().and_then(|g| winning_probability(&st.as_model(Model::A), &g).ok())
    } else {
        None
    };
    Ok(DefectReport {
        model: Model::A,
        value,
        defect: a,
        totals: [("a".to_string(), a), ("comm".to_string(), comm), ("a+comm".to_string(), a + comm)]
            .into_iter()
            .collect(),
        terms,
    })
}

/// The model's defect with the matching distribution: pairs for `cc`,
/// constraint weights for `cv` and `a` (the row marginal of a pair
/// distribution is used when that is what the system carries).
pub fn defect(st: &SyncStrategy, s: &ConstraintSystem) -> Result<DefectReport> {
    match st.model {
        Model::Cc => {
            let pi = match s.distribution() {
                Some(crate::cs::QuestionDistribution::Pairs(p)) => p.clone(),
                _ => {
                    let pc = s.constraint_distribution()?;
                    Distribution::new(pc.iter().map(|(&i, w)| ((i, i), w.clone())))?
                }
            };
            defect_cc(st, s, &pi)
        }
        Model::Cv => defect_cv(st, s, &s.constraint_distribution()?),
        Model::A => defect_a(st, s, &s.constraint_distribution()?),
    }
}

/// The strategy of a classical assignment in dimension 1. Context
/// measurements answer the restriction of `global` when it is accepted and
/// otherwise the choice in `contexts`, or the first accepted tuple.
pub fn embed_classical(
    model: Model,
    s: &ConstraintSystem,
    global: &[Value],
    contexts: Option<&[usize]>,
) -> Result<SyncStrategy> {
    if global.len() != s.num_variables() {
        return Err(Error::Invalid(format!("assignment has {} values for {} variables", global.len(), s.num_variables())));
    }
    let k = s.k() as usize;
    let context_pvms = if model.needs_contexts() {
        s.constraints()
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let own: Tuple = c.context().iter().map(|&v| global[v]).collect();
                let t = match contexts {
                    Some(ch) => *ch.get(i).ok_or_else(|| Error::Invalid(format!("no context choice for {i}")))?,
                    None => c.accepted().iter().position(|t| *t == own).unwrap_or(0),
                };
                if t >= c.len() {
                    return Err(Error::Invalid(format!("context choice {t} out of range for constraint {i}")));
                }
                Ok(Pvm::deterministic(1, c.len(), t))
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let variable_pvms = if model.needs_variables() {
        global.iter().map(|&a| Pvm::deterministic(1, k, a as usize)).collect()
    } else {
        Vec::new()
    };
    Ok(SyncStrategy { model, d: 1, context_pvms, variable_pvms })
}

/// Haar-random unitary from the QR decomposition of a complex Ginibre
/// matrix with the phases of `R` removed.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat {
    let z = CMat::from_fn(d, d, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let qr = z.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..d {
        let rjj = r[(j, j)];
        let ph = if rjj.norm() > 0.0 { rjj / C64::new(rjj.norm(), 0.0) } else { C64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= ph;
        }
    }
    q
}

/// Random PVM with `n` outcomes on `C^d`: ranks split as evenly as possible
/// over a shuffled outcome order, conjugated by a Haar-random unitary.
pub fn random_pvm<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Pvm {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut labels = Vec::with_capacity(d);
    for (t, &a) in order.iter().enumerate() {
        let rank = d / n + usize::from(t < d % n);
        labels.extend(std::iter::repeat_n(a, rank));
    }
    let u = haar_unitary(d, rng);
    from_basis(&u, &labels, n)
}

/// Projectors `P_a = sum_{labels[j] = a} u_j u_j*` for the columns of `u`.
fn from_basis(u: &CMat, labels: &[usize], n: usize) -> Pvm {
    let d = u.nrows();
    let mut projectors = vec![zeros(d); n];
    for (j, &a) in labels.iter().enumerate() {
        let col = u.column(j);
        projectors[a] += &col * col.adjoint();
    }
    Pvm { d, projectors }
}

/// Seeded generator used by every randomized routine.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random strategy of the given model for `s` on `C^d`.
pub fn random_strategy(model: Model, s: &ConstraintSystem, d: usize, seed: u64) -> Result<SyncStrategy> {
    if d == 0 {
        return Err(Error::Invalid("dimension must be positive".into()));
    }
    let mut rng = rng_from_seed(seed);
    let context_pvms = if model.needs_contexts() {
        s.constraints().iter().map(|c| random_pvm(c.len(), d, &mut rng)).collect()
    } else {
        Vec::new()
    };
    let variable_pvms = if model.needs_variables() {
        (0..s.num_variables()).map(|_| random_pvm(s.k() as usize, d, &mut rng)).collect()
    } else {
        Vec::new()
    };
    Ok(SyncStrategy { model, d, context_pvms, variable_pvms })
}

/// Measurement slot of a strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Slot {
    Context(usize),
    Variable(usize),
}

fn slot_of(role: QuestionRole) -> Option<Slot> {
    match role {
        QuestionRole::Context(i) => Some(Slot::Context(i)),
        QuestionRole::Variable(x) => Some(Slot::Variable(x)),
        QuestionRole::Other => None,
    }
}

fn slot_pvm(st: &SyncStrategy, slot: Slot) -> &Pvm {
    match slot {
        Slot::Context(i) => &st.context_pvms[i],
        Slot::Variable(x) => &st.variable_pvms[x],
    }
}

fn slot_pvm_mut(st: &mut SyncStrategy, slot: Slot) -> &mut Pvm {
    match slot {
        Slot::Context(i) => &mut st.context_pvms[i],
        Slot::Variable(x) => &mut st.variable_pvms[x],
    }
}

/// Outcome of a seesaw run.
#[derive(Clone, Debug, PartialEq)]
pub struct SeesawResult {
    pub strategy: SyncStrategy,
    /// Value before the first sweep and after each sweep.
    pub values: Vec<f64>,
}

fn hermitian_eigenbasis(b: &CMat) -> CMat {
    SymmetricEigen::new((b + b.adjoint()) * C64::new(0.5, 0.0)).eigenvectors
}

/// Alternating improvement of one measurement at a time. For each slot the
/// game value is differentiated in that measurement, giving Hermitian
/// operators `B_a`; candidate measurements put every vector of an
/// eigenbasis (of the current measurement, of each `B_a`, and of each
/// `B_a - B_b`) into the outcome maximizing `<v|B_a|v>`, and the best
/// candidate replaces the current measurement only if the value does not
/// decrease.
pub fn seesaw(s0: &SyncStrategy, g: &GameSpec, iters: usize) -> Result<SeesawResult> {
    let mut st = s0.clone();
    let mut current = winning_probability(&st, g)?;
    let mut values = vec![current];
    let mut slots: Vec<Slot> = g.questions.iter().filter_map(|q| slot_of(q.role)).collect();
    slots.sort();
    slots.dedup();
    for _ in 0..iters {
        for &slot in &slots {
            let pvm = slot_pvm(&st, slot).clone();
            let n = pvm.outcomes();
            let mut grad = vec![zeros(st.d); n];
            for e in &g.entries {
                let w = C64::new(rat_to_f64(&e.weight), 0.0);
                let (sa, sb) = (slot_of(g.questions[e.qa].role), slot_of(g.questions[e.qb].role));
                if sa == Some(slot) {
                    let other = slot_pvm(&st, sb.expect("answered question"));
                    for a in 0..n {
                        for (b, mb) in other.projectors.iter().enumerate() {
                            if g.accepts(e, a, b) {
                                grad[a] += mb * w;
                            }
                        }
                    }
                }
                if sb == Some(slot) {
                    let other = slot_pvm(&st, sa.expect("answered question"));
                    for (a, ma) in other.projectors.iter().enumerate() {
                        for b in 0..n {
                            if g.accepts(e, a, b) {
                                grad[b] += ma * w;
                            }
                        }
                    }
                }
            }
            let herm: Vec<CMat> = grad.iter().map(|g| (g + g.adjoint()) * C64::new(0.5, 0.0)).collect();
            let mut bases = Vec::new();
            let weights: CMat = pvm
                .projectors
                .iter()
                .enumerate()
                .fold(zeros(st.d), |acc, (a, p)| acc + p * C64::new(a as f64 + 1.0, 0.0));
            bases.push(hermitian_eigenbasis(&weights));
            for a in 0..n {
                bases.push(hermitian_eigenbasis(&herm[a]));
                for b in a + 1..n {
                    bases.push(hermitian_eigenbasis(&(&herm[a] - &herm[b])));
                }
            }
            let mut best: Option<(f64, Pvm)> = None;
            for u in &bases {
                let labels: Vec<usize> = (0..st.d)
                    .map(|j| {
                        let v = u.column(j);
                        (0..n)
                            .map(|a| (a, (v.adjoint() * &herm[a] * v)[(0, 0)].re))
                            .max_by(|x, y| x.1.total_cmp(&y.1).then(y.0.cmp(&x.0)))
                            .map(|(a, _)| a)
                            .unwrap_or(0)
                    })
                    .collect();
                let cand = from_basis(u, &labels, n);
                let mut trial = st.clone();
                *slot_pvm_mut(&mut trial, slot) = cand.clone();
                let v = winning_probability(&trial, g)?;
                if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
                    best = Some((v, cand));
                }
            }
            if let Some((v, cand)) = best {
                if v > current {
                    *slot_pvm_mut(&mut st, slot) = cand;
                    current = v;
                }
            }
        }
        values.push(current);
    }
    Ok(SeesawResult { strategy: st, values })
}

/// Result of one numerical inequality check `lhs <= constant * rhs + tol`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    /// `constant * rhs + tol - lhs`.
    pub slack: f64,
    pub pass: bool,
}

impl InequalityCheck {
    pub fn new(name: &str, lhs: f64, rhs: f64, constant: f64, tol: f64) -> Self {
        let slack = constant * rhs + tol - lhs;
        InequalityCheck { name: name.into(), lhs, rhs, constant, slack, pass: slack >= 0.0 }
    }
}

/// `2^ceil(log2 k)`.
pub fn hermitian_square_constant(k: usize) -> f64 {
    let mut c = 1usize;
    while c < k {
        c *= 2;
    }
    c as f64
}

/// `||sum a_i||^2 <= 2^ceil(log k) sum ||a_i||^2`.
pub fn check_hermitian_square(terms: &[CMat], tol: f64) -> Result<InequalityCheck> {
    let first = terms.first().ok_or_else(|| Error::Invalid("no terms".into()))?;
    let mut sum = zeros(first.nrows());
    for t in terms {
        sum += t;
    }
    let rhs = stable_sum(terms.iter().map(hsq).collect());
    Ok(InequalityCheck::new("hermitian-square", hsq(&sum), rhs, hermitian_square_constant(terms.len()), tol))
}

/// The order-2 unitary `Q_0 - Q_1` of a boolean variable measurement.
pub fn order_two(q: &Pvm) -> CMat {
    &q.projectors[0] - &q.projectors[1]
}

/// The basic gadget bound
/// `||[s(x), s(y)]||^2 <= 512 sum_i sum_{phi in C_i} sum_{z in V_i} ||P_phi (1 - Q^z_{phi(z)})||^2`
/// with `s = Q_0 - Q_1`, for a cv strategy on a boolean gadget.
pub fn check_basic_gadget(st: &SyncStrategy, s: &ConstraintSystem, x: usize, y: usize, tol: f64) -> Result<InequalityCheck> {
    if st.model != Model::Cv || s.k() != 2 {
        return Err(Error::PreconditionViolated("the basic gadget bound needs a boolean cv strategy".into()));
    }
    st.check_shape(s)?;
    let lhs = hsq(&commutator(&order_two(st.variable(x)?), &order_two(st.variable(y)?)));
    let mut parts = Vec::new();
    for (i, c) in s.constraints().iter().enumerate() {
        let p = st.context(i)?;
        for (pos, &z) in c.context().iter().enumerate() {
            let q = st.variable(z)?;
            for (t, phi) in c.accepted().iter().enumerate() {
                parts.push(hsq(&(&p.projectors[t] * (identity(st.d) - &q.projectors[phi[pos] as usize]))));
            }
        }
    }
    Ok(InequalityCheck::new("basic-gadget", lhs, stable_sum(parts), 512.0, tol))
}

fn same_colour_sum(x: &Pvm, y: &Pvm) -> f64 {
    stable_sum(x.projectors.iter().zip(&y.projectors).map(|(a, b)| hsq(&(a * b))).collect())
}

/// `||[Pi_a(x), Pi_b(y)]||^2 <= 16 sum_c ||Pi_c(x) Pi_c(y)||^2` for order-3
/// measurements.
pub fn check_three_colour_pair(x: &Pvm, y: &Pvm, a: usize, b: usize, tol: f64) -> InequalityCheck {
    let lhs = hsq(&commutator(&x.projectors[a], &y.projectors[b]));
    InequalityCheck::new("three-colouring", lhs, same_colour_sum(x, y), 16.0, tol)
}

/// The prism bound
/// `sum_{a,b} ||[Pi_a(x), Pi_b(y')]||^2 <= 6240 sum_c sum_{uv in E} ||Pi_c(u) Pi_c(v)||^2`
/// over the nine prism edges, with measurements ordered `x, y, z, x', y', z'`.
pub fn check_prism(p: &[Pvm; 6], tol: f64) -> InequalityCheck {
    let mut l = Vec::new();
    for pa in &p[0].projectors {
        for pb in &p[4].projectors {
            l.push(hsq(&commutator(pa, pb)));
        }
    }
    let rhs = stable_sum(crate::gadgets::PRISM_EDGES.iter().map(|&(u, v)| same_colour_sum(&p[u], &p[v])).collect());
    InequalityCheck::new("prism", stable_sum(l), rhs, 6240.0, tol)
}

/// Residual of the 3-clique identity
/// `sum_a ||x_a + y_a + z_a - 1||^2 = 2 sum_a (||x_a y_a||^2 + ||y_a z_a||^2 + ||z_a x_a||^2)`.
pub fn identity_3clique(x: &Pvm, y: &Pvm, z: &Pvm) -> f64 {
    let id = identity(x.d);
    let mut l = Vec::new();
    let mut r = Vec::new();
    for a in 0..x.outcomes() {
        let (xa, ya, za) = (&x.projectors[a], &y.projectors[a], &z.projectors[a]);
        l.push(hsq(&(xa + ya + za - &id)));
        r.push(2.0 * hsq(&(xa * ya)));
        r.push(2.0 * hsq(&(ya * za)));
        r.push(2.0 * hsq(&(za * xa)));
    }
    (stable_sum(l) - stable_sum(r)).abs()
}

/// `df_a + df_comm <= C df_a` for an assignment strategy, with
/// `C = 145` on 3-colouring instances and `C = 16 L^2 + 1` on TVF systems.
pub fn check_acomm_to_a(
    name: &str,
    constant: f64,
    st: &SyncStrategy,
    s: &ConstraintSystem,
    pi: &Distribution<usize>,
    tol: f64,
) -> Result<InequalityCheck> {
    let r = defect_a(st, s, pi)?;
    Ok(InequalityCheck::new(name, r.total("a+comm"), r.total("a"), constant, tol))
}

/// `16 L^2 + 1` for a system with largest arity `L`.
pub fn tvf_constant(s: &ConstraintSystem) -> f64 {
    let l = s.max_arity() as f64;
    16.0 * l * l + 1.0
}

/// A homomorphism whose pullback can be evaluated on finite-dimensional
/// strategies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transform {
    BooleanForm,
    CcToCv,
    CvToCc,
    AcommToCv,
    AToAcomm,
    EmptyReplacement,
    TheBends,
    CcExpand,
}

impl Transform {
    pub const ALL: [Transform; 8] = [
        Transform::BooleanForm,
        Transform::CcToCv,
        Transform::CvToCc,
        Transform::AcommToCv,
        Transform::AToAcomm,
        Transform::EmptyReplacement,
        Transform::TheBends,
        Transform::CcExpand,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Transform::BooleanForm => "boolean-form",
            Transform::CcToCv => "cc-to-cv",
            Transform::CvToCc => "cv-to-cc",
            Transform::AcommToCv => "acomm-to-cv",
            Transform::AToAcomm => "a-to-acomm",
            Transform::EmptyReplacement => "empty-replacement",
            Transform::TheBends => "the-bends",
            Transform::CcExpand => "cc-expand",
        }
    }
}

impl FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "cv-to-acomm" {
            return Err(Error::PreconditionViolated(
                "cv-to-acomm has no explicit finite-dimensional pullback (trace-dependent rounding)".into(),
            ));
        }
        Transform::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown transform {s:?}")))
    }
}

/// Result of a homomorphism pullback check
/// `df(pullback) <= C df(target) + tol`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChomCheck {
    pub transform: Transform,
    pub df_pullback: f64,
    pub df_target: f64,
    pub constant: f64,
    pub pass: bool,
    /// For isomorphisms: whether the two defects are bitwise equal.
    pub exact: Option<bool>,
}

impl ChomCheck {
    fn new(transform: Transform, df_pullback: f64, df_target: f64, constant: f64, tol: f64) -> Self {
        ChomCheck { transform, df_pullback, df_target, constant, pass: df_pullback <= constant * df_target + tol, exact: None }
    }
}

fn check_target(st: &SyncStrategy, model: Model, s: &ConstraintSystem) -> Result<()> {
    if st.model != model {
        return Err(Error::PreconditionViolated(format!("the target strategy must use model {model}, not {}", st.model)));
    }
    st.check_shape(s)
}

/// Pullback along the boolean-form isomorphism `A_cc(B(S)) -> A_cc(S)`: the
/// context measurement of `B(S)` at `phi'` is that of `S` at `phi`.
pub fn pull_boolean_form(s: &ConstraintSystem, target: &SyncStrategy) -> Result<SyncStrategy> {
    check_target(target, Model::Cc, s)?;
    let b = s.boolean_form();
    let context_pvms = s
        .constraints()
        .iter()
        .zip(b.constraints())
        .zip(&target.context_pvms)
        .map(|((c, cb), p)| {
            let projectors = cb
                .accepted()
                .iter()
                .map(|t| {
                    let src = c.accepted().iter().position(|phi| one_hot(phi, s.k()) == *t).expect("boolean form");
                    p.projectors[src].clone()
                })
                .collect();
            Pvm { d: p.d, projectors }
        })
        .collect();
    Ok(SyncStrategy { model: Model::Cc, d: target.d, context_pvms, variable_pvms: Vec::new() })
}

/// Pullback along the inverse isomorphism `A_cc(S) -> A_cc(B(S))`.
pub fn pull_boolean_form_inverse(s: &ConstraintSystem, target_on_b: &SyncStrategy) -> Result<SyncStrategy> {
    let b = s.boolean_form();
    check_target(target_on_b, Model::Cc, &b)?;
    let context_pvms = s
        .constraints()
        .iter()
        .zip(b.constraints())
        .zip(&target_on_b.context_pvms)
        .map(|((c, cb), p)| {
            let projectors = c
                .accepted()
                .iter()
                .map(|phi| {
                    let t = one_hot(phi, s.k());
                    p.projectors[cb.accepted().iter().position(|u| *u == t).expect("boolean form")].clone()
                })
                .collect();
            Pvm { d: p.d, projectors }
        })
        .collect();
    Ok(SyncStrategy { model: Model::Cc, d: target_on_b.d, context_pvms, variable_pvms: Vec::new() })
}

/// Boolean form, both directions: the defects agree.
pub fn chom_boolean_form(
    s: &ConstraintSystem,
    pi: &Distribution<(usize, usize)>,
    target: &SyncStrategy,
    tol: f64,
) -> Result<ChomCheck> {
    let pulled = pull_boolean_form(s, target)?;
    let b = s.boolean_form();
    let df_pullback = defect_cc(&pulled, &b, pi)?.defect;
    let df_target = defect_cc(target, s, pi)?.defect;
    let back = pull_boolean_form_inverse(s, &pulled)?;
    let df_back = defect_cc(&back, s, pi)?.defect;
    let mut c = ChomCheck::new(Transform::BooleanForm, df_pullback, df_target, 1.0, tol);
    let exact = df_pullback.to_bits() == df_target.to_bits() && df_back.to_bits() == df_target.to_bits();
    c.exact = Some(exact);
    c.pass = c.pass && df_target <= df_pullback + tol;
    Ok(c)
}

/// `A_cc(S, pi) -> A_cv(S, pi')` is a `4L`-homomorphism for symmetric `pi`;
/// the pullback keeps the context measurements.
pub fn chom_cc_to_cv(
    s: &ConstraintSystem,
    pi: &Distribution<(usize, usize)>,
    target: &SyncStrategy,
    tol: f64,
) -> Result<ChomCheck> {
    if !pi.is_symmetric() {
        return Err(Error::PreconditionViolated("the pair distribution must be symmetric".into()));
    }
    check_target(target, Model::Cv, s)?;
    let pip = pi.row_marginal();
    let df_pullback = defect_cc(&target.as_model(Model::Cc), s, pi)?.defect;
    let df_target = defect_cv(target, s, &pip)?.defect;
    Ok(ChomCheck::new(Transform::CcToCv, df_pullback, df_target, 4.0 * s.max_arity() as f64, tol))
}

/// `P = max pi'(i) / pi(i,j)` over pairs with overlapping contexts.
pub fn overlap_constant(s: &ConstraintSystem, pi: &Distribution<(usize, usize)>) -> f64 {
    let pip = pi.row_marginal();
    let m = s.constraints().len();
    let mut p: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            if overlap(&s.constraints()[i], &s.constraints()[j]).is_empty() {
                continue;
            }
            let w = pi.weight_f64(&(i, j));
            p = p.max(if w > 0.0 { pip.weight_f64(&i) / w } else { f64::INFINITY });
        }
    }
    p
}

/// `A_cv(S, pi') -> A_cc(S, pi)` is a `P`-homomorphism; the pullback measures
/// `x` through the first constraint containing it.
pub fn chom_cv_to_cc(
    s: &ConstraintSystem,
    pi: &Distribution<(usize, usize)>,
    target: &SyncStrategy,
    tol: f64,
) -> Result<ChomCheck> {
    check_target(target, Model::Cc, s)?;
    let p = overlap_constant(s, pi);
    if !p.is_finite() {
        return Err(Error::PreconditionViolated("some overlapping pair has zero weight, so P is infinite".into()));
    }
    let k = s.k();
    let variable_pvms = (0..s.num_variables())
        .map(|x| match s.constraints().iter().position(|c| c.position(x).is_some()) {
            Some(i) => {
                let c = &s.constraints()[i];
                let pos = c.position(x).expect("found");
                let projectors = (0..k).map(|a| context_marginal(c, &target.context_pvms[i], pos, a)).collect();
                Pvm { d: target.d, projectors }
            }
            None => Pvm::deterministic(target.d, k as usize, 0),
        })
        .collect();
    let pulled = SyncStrategy { model: Model::Cv, d: target.d, context_pvms: target.context_pvms.clone(), variable_pvms };
    let df_pullback = defect_cv(&pulled, s, &pi.row_marginal())?.defect;
    let df_target = defect_cc(target, s, pi)?.defect;
    Ok(ChomCheck::new(Transform::CvToCc, df_pullback, df_target, p, tol))
}

/// `A_{a+comm}(S, pi) -> A_cv(S, pi)` is a `20 L^2`-homomorphism; the pullback
/// keeps the variable measurements.
pub fn chom_acomm_to_cv(s: &ConstraintSystem, pi: &Distribution<usize>, target: &SyncStrategy, tol: f64) -> Result<ChomCheck> {
    check_target(target, Model::Cv, s)?;
    let df_pullback = defect_a(&target.as_model(Model::A), s, pi)?.total("a+comm");
    let df_target = defect_cv(target, s, pi)?.defect;
    let l = s.max_arity() as f64;
    Ok(ChomCheck::new(Transform::AcommToCv, df_pullback, df_target, 20.0 * l * l, tol))
}

/// The identity `A_a(S, pi) -> A_{a+comm}(S, pi)` is a 1-homomorphism.
pub fn chom_a_to_acomm(s: &ConstraintSystem, pi: &Distribution<usize>, target: &SyncStrategy, tol: f64) -> Result<ChomCheck> {
    check_target(target, Model::A, s)?;
    let r = defect_a(target, s, pi)?;
    Ok(ChomCheck::new(Transform::AToAcomm, r.total("a"), r.total("a+comm"), 1.0, tol))
}

/// Context measurement of `c` obtained by summing those of `parent` over
/// tuples with the same restriction to the context of `c`.
pub fn coarse_grain(c: &Constraint, parent: &Constraint, pvm: &Pvm) -> Result<Pvm> {
    let pos: Vec<usize> = c
        .context()
        .iter()
        .map(|&v| parent.position(v).ok_or_else(|| Error::PreconditionViolated(format!("variable {v} missing from parent"))))
        .collect::<Result<_>>()?;
    let mut projectors = vec![zeros(pvm.d); c.len()];
    for (t, psi) in parent.accepted().iter().enumerate() {
        let phi: Tuple = pos.iter().map(|&p| psi[p]).collect();
        let idx = c
            .accepted()
            .iter()
            .position(|u| *u == phi)
            .ok_or_else(|| Error::PreconditionViolated(format!("parent tuple {psi:?} restricts outside {c}")))?;
        projectors[idx] += &pvm.projectors[t];
    }
    Ok(Pvm { d: pvm.d, projectors })
}

/// Pullback of a cv strategy on `target` to `source`, where constraint `i`
/// of `source` is a restriction of constraint `i` of `target` and the
/// variables of `source` keep their ids.
pub fn pull_by_restriction(source: &ConstraintSystem, target: &ConstraintSystem, st: &SyncStrategy) -> Result<SyncStrategy> {
    check_target(st, Model::Cv, target)?;
    if source.constraints().len() != target.constraints().len() || source.num_variables() > target.num_variables() {
        return Err(Error::PreconditionViolated("the systems do not correspond constraint by constraint".into()));
    }
    let context_pvms = source
        .constraints()
        .iter()
        .zip(target.constraints())
        .zip(&st.context_pvms)
        .map(|((c, p), pvm)| coarse_grain(c, p, pvm))
        .collect::<Result<_>>()?;
    let variable_pvms = st.variable_pvms[..source.num_variables()].to_vec();
    Ok(SyncStrategy { model: Model::Cv, d: st.d, context_pvms, variable_pvms })
}

fn chom_restriction(
    transform: Transform,
    source: &ConstraintSystem,
    target: &ConstraintSystem,
    pi: &Distribution<usize>,
    st: &SyncStrategy,
    constant: f64,
    tol: f64,
) -> Result<ChomCheck> {
    let pulled = pull_by_restriction(source, target, st)?;
    let df_pullback = defect_cv(&pulled, source, pi)?.defect;
    let df_target = defect_cv(st, target, pi)?.defect;
    Ok(ChomCheck::new(transform, df_pullback, df_target, constant, tol))
}

/// Empty-constraint replacement: `A_cv(S, pi) -> A_cv(S', pi)` with constant
/// `L/2`; each empty constraint is measured through its replacement.
pub fn chom_empty_replacement(
    s: &ConstraintSystem,
    r: &Reduction,
    st: &SyncStrategy,
    tol: f64,
) -> Result<ChomCheck> {
    let pi = s.constraint_distribution()?;
    let c = r.claimed_constant.as_ref().map(rat_to_f64).unwrap_or(f64::INFINITY);
    chom_restriction(Transform::EmptyReplacement, s, &r.cs, &pi, st, c, tol)
}

/// The bends: `A_cv(S, pi) -> A_cv(S', pi)` with constant `L`, where `S'`
/// replaces each constraint by a parent it restricts.
pub fn chom_the_bends(
    s: &ConstraintSystem,
    lifted: &ConstraintSystem,
    pi: &Distribution<usize>,
    st: &SyncStrategy,
    l: usize,
    tol: f64,
) -> Result<ChomCheck> {
    chom_restriction(Transform::TheBends, s, lifted, pi, st, l as f64, tol)
}

/// Constraint-variable expansion: the embedding `A_cv(S, pi) -> A_cv(S', pi')`
/// is a 2-homomorphism; the pullback restricts to the original system.
pub fn chom_cc_expand(s: &ConstraintSystem, r: &Reduction, st: &SyncStrategy, tol: f64) -> Result<ChomCheck> {
    check_target(st, Model::Cv, &r.cs)?;
    let m = s.constraints().len();
    let pulled = SyncStrategy {
        model: Model::Cv,
        d: st.d,
        context_pvms: st.context_pvms[..m].to_vec(),
        variable_pvms: st.variable_pvms[..s.num_variables()].to_vec(),
    };
    let df_pullback = defect_cv(&pulled, s, &s.constraint_distribution()?)?.defect;
    let df_target = defect_cv(st, &r.cs, &r.cs.constraint_distribution()?)?.defect;
    Ok(ChomCheck::new(Transform::CcExpand, df_pullback, df_target, 2.0, tol))
}

/// The 3-colouring instance of a triangle on `x0, x1, x2`.
pub fn triangle_system() -> ConstraintSystem {
    let c = (0..3).map(|i| Constraint::neq(3, i, (i + 1) % 3).expect("k = 3")).collect();
    ConstraintSystem::with_default_names(3, 3, c).expect("triangle")
}

/// Two 1-in-3 constraints sharing one variable.
pub fn one_in_three_pair() -> ConstraintSystem {
    let c = vec![Constraint::one_in_three([0, 1, 2]), Constraint::one_in_three([2, 3, 4])];
    ConstraintSystem::with_default_names(2, 5, c).expect("pair")
}

/// The even-parity constraint on `[0, 1, 2]`, which is not TVF.
pub fn parity_constraint() -> Constraint {
    Constraint::from_predicate(2, vec![0, 1, 2], |t| (t[0] ^ t[1] ^ t[2]) == 0).expect("parity")
}

/// Uniform distribution over all ordered constraint pairs.
pub fn uniform_pairs(m: usize) -> Result<Distribution<(usize, usize)>> {
    Distribution::uniform((0..m).flat_map(|i| (0..m).map(move |j| (i, j))))
}

/// The pair distribution carried by `s`, or the uniform one.
pub fn pairs_of(s: &ConstraintSystem) -> Result<Distribution<(usize, usize)>> {
    match s.distribution() {
        Some(crate::cs::QuestionDistribution::Pairs(p)) => Ok(p.clone()),
        _ => uniform_pairs(s.constraints().len()),
    }
}

/// Unitary `(1 - i eps H)(1 + i eps H)^{-1}` for a random Hermitian `H`.
fn near_identity<R: Rng + ?Sized>(d: usize, eps: f64, rng: &mut R) -> CMat {
    let g = CMat::from_fn(d, d, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let h = (&g + g.adjoint()) * C64::new(0.5 * eps, 0.0);
    let i = C64::new(0.0, 1.0);
    let a = identity(d) - &h * i;
    let b = identity(d) + &h * i;
    a * b.try_inverse().expect("1 + iH is invertible")
}

fn conjugate(p: &Pvm, u: &CMat) -> Pvm {
    Pvm { d: p.d, projectors: p.projectors.iter().map(|q| u * q * u.adjoint()).collect() }
}

fn shifted(p: &Pvm, s: usize) -> Pvm {
    let n = p.outcomes();
    Pvm { d: p.d, projectors: (0..n).map(|a| p.projectors[(a + s) % n].clone()).collect() }
}

/// A perturbation of `p` by a small random unitary.
pub fn perturb<R: Rng + ?Sized>(p: &Pvm, eps: f64, rng: &mut R) -> Pvm {
    conjugate(p, &near_identity(p.d, eps, rng))
}

/// Worst case of one inequality over a batch of trials.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InequalityFamily {
    pub name: String,
    pub constant: f64,
    pub trials: usize,
    pub worst_slack: f64,
    pub worst_ratio: f64,
    pub failures: usize,
}

impl InequalityFamily {
    fn new(name: &str, constant: f64) -> Self {
        InequalityFamily {
            name: name.into(),
            constant,
            trials: 0,
            worst_slack: f64::INFINITY,
            worst_ratio: 0.0,
            failures: 0,
        }
    }

    fn record(&mut self, c: &InequalityCheck) {
        self.trials += 1;
        self.worst_slack = self.worst_slack.min(c.slack);
        if c.rhs > 0.0 {
            self.worst_ratio = self.worst_ratio.max(c.lhs / c.rhs);
        }
        if !c.pass {
            self.failures += 1;
        }
    }

    pub fn pass(&self) -> bool {
        self.failures == 0
    }
}

/// Dimension of trial `t` when cycling through `lo..=hi`.
pub fn trial_dim(t: usize, lo: usize, hi: usize) -> usize {
    let hi = hi.max(lo);
    lo + t % (hi - lo + 1)
}

/// Runs every operator inequality on `trials` seeded strategies with
/// dimensions up to `max_d`. Odd trials use near-perfect strategies
/// (perturbed colourings or seesaw-improved strategies) so that both sides
/// are small.
pub fn inequality_suite(trials: usize, seed: u64, max_d: usize, tol: f64) -> Result<Vec<InequalityFamily>> {
    let one3 = Constraint::one_in_three([0, 1, 2]);
    let gadget = crate::gadgets::basic_gadget(&one3, None)?;
    let (gx, gy) = (gadget.distinguished[0], gadget.distinguished[1]);
    let gadget_game = cv_game(&gadget.cs, &gadget.cs.constraint_distribution()?)?;
    let tri = triangle_system();
    let tri_pi = tri.constraint_distribution()?;
    let tri_game = twocs_game(&tri, &tri_pi)?;
    let tvf = one_in_three_pair();
    let tvf_pi = tvf.constraint_distribution()?;
    let mut fam = vec![
        InequalityFamily::new("basic-gadget", 512.0),
        InequalityFamily::new("three-colouring", 16.0),
        InequalityFamily::new("prism", 6240.0),
        InequalityFamily::new("hermitian-square", 0.0),
        InequalityFamily::new("tvf-acomm-to-a", tvf_constant(&tvf)),
        InequalityFamily::new("three-colouring-acomm-to-a", 145.0),
    ];
    for t in 0..trials {
        let ts = seed.wrapping_add(t as u64);
        let d = trial_dim(t, 1, max_d);
        let near = t % 2 == 1;
        let mut rng = rng_from_seed(ts);

        let mut st = random_strategy(Model::Cv, &gadget.cs, d, ts)?;
        if near {
            st = seesaw(&st, &gadget_game, 3)?.strategy;
        }
        fam[0].record(&check_basic_gadget(&st, &gadget.cs, gx, gy, tol)?);

        let x = random_pvm(3, d, &mut rng);
        let y = if near { perturb(&shifted(&x, 1), 0.05, &mut rng) } else { random_pvm(3, d, &mut rng) };
        for a in 0..3 {
            for b in 0..3 {
                fam[1].record(&check_three_colour_pair(&x, &y, a, b, tol));
            }
        }

        let prism: [Pvm; 6] = if near {
            let base = random_pvm(3, d, &mut rng);
            let shifts = [0, 1, 2, 1, 2, 0];
            let mut out: Vec<Pvm> = Vec::new();
            for s in shifts {
                out.push(perturb(&shifted(&base, s), 0.05, &mut rng));
            }
            out.try_into().expect("six measurements")
        } else {
            std::array::from_fn(|_| random_pvm(3, d, &mut rng))
        };
        fam[2].record(&check_prism(&prism, tol));

        let k = 1 + t % 8;
        let terms: Vec<CMat> = (0..k)
            .map(|_| {
                let g = CMat::from_fn(d, d, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
                if near { &g + g.adjoint() } else { g }
            })
            .collect();
        let c = check_hermitian_square(&terms, tol)?;
        fam[3].constant = fam[3].constant.max(c.constant);
        fam[3].record(&c);

        let mut a = random_strategy(Model::A, &tvf, d, ts)?;
        if near {
            a = perturb_strategy(&embed_classical_dim(Model::A, &tvf, &[1, 0, 0, 0, 1], d)?, 0.05, &mut rng);
        }
        let c = check_acomm_to_a("tvf-acomm-to-a", fam[4].constant, &a, &tvf, &tvf_pi, tol)?;
        fam[4].record(&c);

        let mut a3 = random_strategy(Model::A, &tri, d, ts)?;
        if near {
            a3 = seesaw(&a3, &tri_game, 3)?.strategy;
        }
        fam[5].record(&check_acomm_to_a("three-colouring-acomm-to-a", 145.0, &a3, &tri, &tri_pi, tol)?);
    }
    Ok(fam)
}

/// A classical assignment embedded as scalar measurements on `C^d`.
pub fn embed_classical_dim(model: Model, s: &ConstraintSystem, global: &[Value], d: usize) -> Result<SyncStrategy> {
    let st = embed_classical(model, s, global, None)?;
    let lift = |p: &Pvm| Pvm { d, projectors: p.projectors.iter().map(|q| identity(d) * q[(0, 0)]).collect() };
    Ok(SyncStrategy {
        model,
        d,
        context_pvms: st.context_pvms.iter().map(lift).collect(),
        variable_pvms: st.variable_pvms.iter().map(lift).collect(),
    })
}

/// Every measurement of `st` perturbed independently.
pub fn perturb_strategy<R: Rng + ?Sized>(st: &SyncStrategy, eps: f64, rng: &mut R) -> SyncStrategy {
    SyncStrategy {
        model: st.model,
        d: st.d,
        context_pvms: st.context_pvms.iter().map(|p| perturb(p, eps, rng)).collect(),
        variable_pvms: st.variable_pvms.iter().map(|p| perturb(p, eps, rng)).collect(),
    }
}

/// Largest 3-clique residual over `trials` random triples of 3-outcome
/// measurements with `d` cycling through `2..=max_d`.
pub fn identity_suite(trials: usize, seed: u64, max_d: usize) -> Vec<(usize, f64)> {
    (0..trials)
        .map(|t| {
            let d = trial_dim(t, 2, max_d);
            let mut rng = rng_from_seed(seed.wrapping_add(t as u64));
            let (x, y, z) = (random_pvm(3, d, &mut rng), random_pvm(3, d, &mut rng), random_pvm(3, d, &mut rng));
            (d, identity_3clique(&x, &y, &z))
        })
        .collect()
}

fn bends_fixture() -> Result<(ConstraintSystem, ConstraintSystem, usize)> {
    let one3 = Constraint::one_in_three([0, 1, 2]);
    let g = crate::gadgets::basic_gadget(&one3, None)?;
    let parent = Constraint::new(2, vec![0, 1, 2, 3], vec![vec![1, 0, 0, 0], vec![0, 1, 0, 0], vec![0, 0, 1, 0], vec![0, 0, 1, 1]])?;
    let lifted = crate::gadgets::the_bends(&g, std::slice::from_ref(&parent))?;
    Ok((g.cs, lifted.cs, parent.arity()))
}

fn empty_fixture(s: Option<&ConstraintSystem>) -> Result<(ConstraintSystem, Reduction)> {
    let s = match s {
        Some(s) => s.clone(),
        None => ConstraintSystem::with_default_names(
            2,
            4,
            vec![Constraint::one_in_three([0, 1, 2]), Constraint::full(2, vec![0, 3])?],
        )?,
    };
    let r = crate::gadgets::replace_empty_nontvf(&s, &parity_constraint(), 0, 1)?;
    Ok((s, r))
}

/// Checks the pullback of one transform on `trials` random target
/// strategies with `d` cycling through `1..=max_d`. Without a system a
/// reference instance suited to the transform is used.
pub fn chom_suite(
    transform: Transform,
    s: Option<&ConstraintSystem>,
    trials: usize,
    seed: u64,
    max_d: usize,
    tol: f64,
) -> Result<Vec<ChomCheck>> {
    let default = match transform {
        Transform::BooleanForm => triangle_system(),
        _ => one_in_three_pair(),
    };
    let sys = s.cloned().unwrap_or(default);
    let mut out = Vec::with_capacity(trials);
    let bends = if transform == Transform::TheBends { Some(bends_fixture()?) } else { None };
    let empty = if transform == Transform::EmptyReplacement { Some(empty_fixture(s)?) } else { None };
    let expand = if transform == Transform::CcExpand {
        let (anchor, v) = sys
            .constraints()
            .iter()
            .find_map(|c| crate::gadgets::find_free_variable(c).map(|v| (c.clone(), v)))
            .ok_or_else(|| Error::PreconditionViolated("no constraint has a free variable".into()))?;
        Some(crate::gadgets::cc_expand(&sys, &anchor, v)?)
    } else {
        None
    };
    for t in 0..trials {
        let ts = seed.wrapping_add(t as u64);
        let d = trial_dim(t, 1, max_d);
        let c = match transform {
            Transform::BooleanForm => {
                chom_boolean_form(&sys, &pairs_of(&sys)?, &random_strategy(Model::Cc, &sys, d, ts)?, tol)?
            }
            Transform::CcToCv => {
                chom_cc_to_cv(&sys, &pairs_of(&sys)?, &random_strategy(Model::Cv, &sys, d, ts)?, tol)?
            }
            Transform::CvToCc => {
                chom_cv_to_cc(&sys, &pairs_of(&sys)?, &random_strategy(Model::Cc, &sys, d, ts)?, tol)?
            }
            Transform::AcommToCv => chom_acomm_to_cv(
                &sys,
                &sys.constraint_distribution()?,
                &random_strategy(Model::Cv, &sys, d, ts)?,
                tol,
            )?,
            Transform::AToAcomm => chom_a_to_acomm(
                &sys,
                &sys.constraint_distribution()?,
                &random_strategy(Model::A, &sys, d, ts)?,
                tol,
            )?,
            Transform::EmptyReplacement => {
                let (src, r) = empty.as_ref().expect("fixture");
                chom_empty_replacement(src, r, &random_strategy(Model::Cv, &r.cs, d, ts)?, tol)?
            }
            Transform::TheBends => {
                let (src, lifted, l) = bends.as_ref().expect("fixture");
                let pi = src.constraint_distribution()?;
                chom_the_bends(src, lifted, &pi, &random_strategy(Model::Cv, lifted, d, ts)?, *l, tol)?
            }
            Transform::CcExpand => {
                let r = expand.as_ref().expect("fixture");
                chom_cc_expand(&sys, r, &random_strategy(Model::Cv, &r.cs, d, ts)?, tol)?
            }
        };
        out.push(c);
    }
    Ok(out)
}
