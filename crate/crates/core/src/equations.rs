//! Renormalized, tangent and dual equations as term lists, and the
//! single-equation identities relating counterterms of the original and the
//! dual equation.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::extensions::{distinguished_node, dual_cut_images, dualize_at, multiplicity_m, reroot_hat};
use crate::q::{fmt_q, parse_q, Q};
use crate::rules::{enumerate_for, EnumOptions, Member, Rule};
use crate::symbolic::{is_nonvanishing, node_factor, upsilon, NonlinearitySpec, Slot, SymExpr, VarId};
use crate::tree::{DecoratedTree, TreeCode};
use crate::types::{MultiIndex, TypeId, TypeTable};

/// Renormalization constant of one tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Constant {
    Value(Q),
    Symbol(String),
}

impl Constant {
    pub fn is_zero(&self) -> bool {
        matches!(self, Constant::Value(v) if v.is_zero())
    }

    pub fn render(&self) -> String {
        match self {
            Constant::Value(v) => fmt_q(v),
            Constant::Symbol(s) => s.clone(),
        }
    }
}

/// Constants keyed by tree code. Trees without an entry get the symbol
/// `c[code]`, or zero when `zero_odd_noise` is set and the tree has an odd
/// number of noises.
#[derive(Debug, Clone, Default)]
pub struct RenormConstants {
    pub values: BTreeMap<TreeCode, Constant>,
    pub zero_odd_noise: bool,
}

impl RenormConstants {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, tree: &DecoratedTree, c: Constant) -> Self {
        self.values.insert(tree.code(), c);
        self
    }

    /// The constant and whether it was defaulted to a fresh symbol.
    pub fn resolve(&self, tree: &DecoratedTree) -> (Constant, bool) {
        let code = tree.code();
        if let Some(c) = self.values.get(&code) {
            return (c.clone(), false);
        }
        if self.zero_odd_noise && tree.noise_edges().len() % 2 == 1 {
            return (Constant::Value(Q::zero()), false);
        }
        (Constant::Symbol(format!("c[{code}]")), true)
    }

    /// `{"values": {code: "C1" | "p/q"}, "zero_odd_noise": bool}`; codes are
    /// re-encoded canonically.
    pub fn from_json(v: &Value, table: &TypeTable) -> Result<Self> {
        let mut out = Self::new();
        let Some(obj) = v.as_object() else {
            return Err(Error::Spec("constants must be an object".into()));
        };
        if let Some(z) = obj.get("zero_odd_noise") {
            out.zero_odd_noise = z.as_bool().ok_or_else(|| Error::Spec("zero_odd_noise must be a boolean".into()))?;
        }
        if let Some(vals) = obj.get("values") {
            let vals = vals.as_object().ok_or_else(|| Error::Spec("constants.values must be an object".into()))?;
            for (code, c) in vals {
                let tree = DecoratedTree::parse(code, table)?;
                let s = c.as_str().ok_or_else(|| Error::Spec(format!("constant for `{code}` must be a string")))?;
                let c = match parse_q(s) {
                    Ok(q) => Constant::Value(q),
                    Err(_) if is_symbol(s) => Constant::Symbol(s.to_string()),
                    Err(_) => return Err(Error::Spec(format!("constant `{s}` is neither \"p/q\" nor a symbol"))),
                };
                out.values.insert(tree.code(), c);
            }
        }
        Ok(out)
    }
}

fn is_symbol(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_alphabetic()) && cs.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq)]
pub enum TermKind {
    Drift,
    Noise(String),
    CameronMartin(String),
    Counterterm,
    Source,
    Transport(usize),
}

impl TermKind {
    fn name(&self) -> &'static str {
        match self {
            TermKind::Drift => "drift",
            TermKind::Noise(_) => "noise",
            TermKind::CameronMartin(_) => "cameron-martin",
            TermKind::Counterterm => "counterterm",
            TermKind::Source => "source",
            TermKind::Transport(_) => "transport",
        }
    }
}

/// One summand `constant · coeff · expr` of an equation right-hand side.
#[derive(Debug, Clone)]
pub struct EquationTerm {
    pub kind: TermKind,
    pub expr: SymExpr,
    pub coeff: Q,
    pub tree: Option<TreeCode>,
    pub constant: Option<Constant>,
    pub symmetry: Option<u64>,
}

impl EquationTerm {
    fn plain(kind: TermKind, expr: SymExpr) -> Self {
        Self { kind, expr, coeff: Q::one(), tree: None, constant: None, symmetry: None }
    }

    /// ASCII rendering; `unknown` names the `w`-slot (`v` or `w`).
    pub fn pretty(&self, unknown: &str) -> String {
        let body = render_linear(&self.expr, unknown);
        let mut s = String::new();
        if let Some(c) = &self.constant {
            s.push_str(&c.render());
            s.push('*');
        }
        if !self.coeff.is_one() {
            s.push_str(&fmt_q(&self.coeff));
            s.push('*');
        }
        let factor = match &self.kind {
            TermKind::Noise(n) => Some(format!("xi[{n}]")),
            TermKind::CameronMartin(n) => Some(format!("h[{n}]")),
            TermKind::Source => Some("phi".to_string()),
            _ => None,
        };
        match factor {
            Some(f) if body == "1" => format!("{s}{f}"),
            Some(f) => format!("{s}{body}*{f}"),
            None => format!("{s}{body}"),
        }
    }

    pub fn to_json(&self, unknown: &str) -> Value {
        let noise = match &self.kind {
            TermKind::Noise(n) | TermKind::CameronMartin(n) => Some(n.clone()),
            _ => None,
        };
        json!({
            "kind": self.kind.name(),
            "noise": noise,
            "direction": match self.kind { TermKind::Transport(i) => Some(i), _ => None },
            "tree": self.tree,
            "constant": self.constant.as_ref().map(|c| c.render()),
            "symmetry": self.symmetry,
            "coeff": fmt_q(&self.coeff),
            "expr": self.expr.to_json(),
            "pretty": self.pretty(unknown),
        })
    }
}

/// Renders `Σ (coef)·name`, grouping a `w`-linear expression by its
/// direction variables; other expressions are rendered as is.
pub fn render_linear(e: &SymExpr, name: &str) -> String {
    let Some(parts) = e.linear_parts() else {
        return e.pretty();
    };
    let mut out = Vec::new();
    for (v, c) in parts {
        let var = v.render(true).replacen('w', name, 1);
        let coef = c.pretty();
        out.push(if c == SymExpr::one() {
            var
        } else if c.len() > 1 {
            format!("({coef})·{var}")
        } else {
            format!("{coef}·{var}")
        });
    }
    out.join("+")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    Renorm,
    Tangent,
    Dual,
}

impl Which {
    pub fn unknown(self) -> &'static str {
        match self {
            Which::Renorm => "u",
            Which::Tangent => "v",
            Which::Dual => "w",
        }
    }
}

/// Right-hand side for one component.
#[derive(Debug, Clone)]
pub struct Equation {
    pub component: String,
    pub which: Which,
    pub terms: Vec<EquationTerm>,
    /// Trees whose constant is zero.
    pub dropped: Vec<TreeCode>,
    /// Trees whose constant was defaulted to a symbol.
    pub missing: Vec<TreeCode>,
    pub notices: Vec<String>,
}

impl Equation {
    pub fn counterterms(&self) -> impl Iterator<Item = &EquationTerm> {
        self.terms.iter().filter(|t| matches!(t.kind, TermKind::Counterterm | TermKind::Transport(_)))
    }

    /// Counterterm expressions grouped by constant: `Σ coeff·expr` per symbol.
    pub fn grouped(&self) -> BTreeMap<String, SymExpr> {
        let mut out: BTreeMap<String, SymExpr> = BTreeMap::new();
        for t in self.counterterms() {
            let key = t.constant.as_ref().map_or("1".into(), |c| c.render());
            let e = out.entry(key).or_default();
            *e = e.add(&t.expr.scale(t.coeff));
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let u = self.which.unknown();
        json!({
            "component": self.component,
            "which": self.which,
            "terms": self.terms.iter().map(|t| t.to_json(u)).collect::<Vec<_>>(),
            "grouped": self.grouped().iter().map(|(c, e)| json!({"constant": c, "pretty": render_linear(e, u)})).collect::<Vec<_>>(),
            "dropped_zero_constant": self.dropped,
            "defaulted_constants": self.missing,
            "notices": self.notices,
        })
    }
}

/// Simplicity classification of a counterterm.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Simplicity {
    Nond,
    Transport(usize),
    Violation,
}

/// Everything needed to build equations for a model.
#[derive(Debug, Clone)]
pub struct Model {
    pub table: TypeTable,
    pub rule: Rule,
    pub nonlinearity: NonlinearitySpec,
    pub constants: RenormConstants,
    pub enum_opts: EnumOptions,
    pub dual_cap: u32,
}

/// A member of a counterterm family with its `Υ`.
#[derive(Debug, Clone)]
pub struct Counterterm {
    pub tree: DecoratedTree,
    pub code: TreeCode,
    pub hom: Q,
    pub symmetry: u64,
    pub upsilon: SymExpr,
    pub nonvanishing: bool,
}

impl Model {
    pub fn new(table: TypeTable, rule: Rule, nonlinearity: NonlinearitySpec) -> Self {
        Self {
            table,
            rule,
            nonlinearity,
            constants: RenormConstants::new(),
            enum_opts: EnumOptions::negative(Q::zero()),
            dual_cap: 3,
        }
    }

    pub fn with_constants(mut self, c: RenormConstants) -> Self {
        self.constants = c;
        self
    }

    pub fn components(&self) -> Vec<TypeId> {
        self.table.kernel_ids()
    }

    /// The single kernel type; errors for systems.
    pub fn single_component(&self) -> Result<TypeId> {
        match self.components().as_slice() {
            [t] => Ok(t.clone()),
            ts => Err(Error::Mode(format!("{} kernel types; single-equation mode requires exactly one", ts.len()))),
        }
    }

    /// Trees for `target` below `cutoff` with their `Υ`; vanishing trees are
    /// removed when `filter` is set.
    pub fn family(&self, rule: &Rule, target: &TypeId, cutoff: Q, negative_only: bool, filter: bool) -> Result<Vec<Counterterm>> {
        let opts = EnumOptions { cutoff, negative_only, ..self.enum_opts.clone() };
        let fam = enumerate_for(rule, &self.table, &opts, std::slice::from_ref(target))?;
        let members: Vec<(&TreeCode, &Member)> = fam.get(target).collect();
        let out: Vec<Result<Option<Counterterm>>> = members
            .par_iter()
            .map(|(code, m)| {
                let nonvanishing = is_nonvanishing(&m.tree, target, &self.nonlinearity)?;
                if filter && !nonvanishing {
                    return Ok(None);
                }
                Ok(Some(Counterterm {
                    tree: m.tree.clone(),
                    code: (*code).clone(),
                    hom: m.hom,
                    symmetry: m.symmetry,
                    upsilon: upsilon(&m.tree, target, &self.nonlinearity)?,
                    nonvanishing,
                }))
            })
            .collect();
        let mut v = Vec::new();
        for r in out {
            if let Some(c) = r? {
                v.push(c);
            }
        }
        Ok(v)
    }

    /// Negative non-vanishing family `T^F_{t,-}`.
    pub fn negative_family(&self, target: &TypeId) -> Result<Vec<Counterterm>> {
        self.family(&self.rule, target, self.enum_opts.cutoff, true, true)
    }

    pub fn dual_rule(&self) -> Result<Rule> {
        self.rule.extend_dual(&self.table, self.dual_cap)
    }

    /// Non-vanishing dual trees for `t~` below `cutoff`.
    pub fn dual_family(&self, target: &TypeId, cutoff: Q) -> Result<Vec<Counterterm>> {
        let rule = self.dual_rule()?;
        self.family(&rule, &target.dual()?, cutoff, false, true)
    }

    fn noises(&self) -> Vec<TypeId> {
        self.table.noise_ids()
    }

    fn counterterm_terms(&self, t: &TypeId, filter: bool, eq: &mut Equation) -> Result<Vec<(Counterterm, Constant)>> {
        let fam = self.family(&self.rule, t, self.enum_opts.cutoff, true, filter)?;
        let mut out = Vec::new();
        for c in fam {
            let (k, defaulted) = self.constants.resolve(&c.tree);
            if k.is_zero() {
                eq.dropped.push(c.code.clone());
                continue;
            }
            if c.upsilon.is_zero() {
                continue;
            }
            if defaulted {
                eq.missing.push(c.code.clone());
            }
            out.push((c, k));
        }
        if !eq.missing.is_empty() {
            eq.notices.push(format!("{} constants defaulted to symbols", eq.missing.len()));
        }
        Ok(out)
    }

    fn empty(&self, t: &TypeId, which: Which) -> Equation {
        Equation { component: t.name.clone(), which, terms: vec![], dropped: vec![], missing: vec![], notices: vec![] }
    }

    /// `F_t + Σ F_t^Ξ ξ_Ξ + Σ_τ (c_τ/S(τ)) Υ_t[τ]` for every component.
    pub fn renormalized_equation(&self, filter: bool) -> Result<Vec<Equation>> {
        let mut out = Vec::new();
        for t in self.components() {
            let mut eq = self.empty(&t, Which::Renorm);
            eq.terms.push(EquationTerm::plain(TermKind::Drift, self.nonlinearity.of(&t, None)?));
            for n in self.noises() {
                if let Ok(f) = self.nonlinearity.of(&t, Some(&n)) {
                    eq.terms.push(EquationTerm::plain(TermKind::Noise(n.name.clone()), f));
                }
            }
            for (c, k) in self.counterterm_terms(&t, filter, &mut eq)? {
                eq.terms.push(EquationTerm {
                    kind: TermKind::Counterterm,
                    expr: c.upsilon,
                    coeff: Q::new(1, c.symmetry as i64),
                    tree: Some(c.code),
                    constant: Some(k),
                    symmetry: Some(c.symmetry),
                });
            }
            out.push(eq);
        }
        Ok(out)
    }

    /// Fréchet derivative of the renormalized equation in direction `v`,
    /// plus the Cameron-Martin sources `F_t^Ξ h_Ξ`.
    pub fn tangent_equation(&self, filter: bool) -> Result<Vec<Equation>> {
        let mut out = Vec::new();
        for eq in self.renormalized_equation(filter)? {
            let mut te = Equation { which: Which::Tangent, terms: vec![], ..eq.clone() };
            for term in &eq.terms {
                let mut d = term.clone();
                d.expr = term.expr.frechet()?;
                if !d.expr.is_zero() {
                    te.terms.push(d);
                }
            }
            for term in &eq.terms {
                if let TermKind::Noise(n) = &term.kind {
                    te.terms.push(EquationTerm::plain(TermKind::CameronMartin(n.clone()), term.expr.clone()));
                }
            }
            out.push(te);
        }
        Ok(out)
    }

    /// Classifies each counterterm with a nonzero constant.
    pub fn check_assumption_simplicity(&self) -> Result<Vec<(TreeCode, Simplicity)>> {
        let mut out = Vec::new();
        for t in self.components() {
            let mut scratch = self.empty(&t, Which::Dual);
            for (c, _) in self.counterterm_terms(&t, true, &mut scratch)? {
                out.push((c.code.clone(), classify(&c.upsilon, &t, self.table.dim())));
            }
        }
        Ok(out)
    }

    /// `−∂_t w = Δw + DF(u)w + Σ DF^Ξ(u) w ξ + φ + Σ_nond (c/S) DΥ·w − Σ_transport (c/S) ∂_i w`.
    pub fn dual_equation(&self) -> Result<Vec<Equation>> {
        let classes: BTreeMap<TreeCode, Simplicity> = self.check_assumption_simplicity()?.into_iter().collect();
        if let Some((code, _)) = classes.iter().find(|(_, s)| **s == Simplicity::Violation) {
            return Err(Error::Simplicity(format!("counterterm of tree {code} is neither solution-only nor a transport term")));
        }
        if !self.nonlinearity.is_simple() {
            return Err(Error::Simplicity("nonlinearities depend on derivatives of the solution".into()));
        }
        let mut out = Vec::new();
        for eq in self.renormalized_equation(true)? {
            let mut de = Equation { which: Which::Dual, terms: vec![], ..eq.clone() };
            if self.components().len() > 1 {
                de.notices.push("counterterm assumption unverified for systems".into());
            }
            for term in &eq.terms {
                let mut d = term.clone();
                match term.tree.as_ref().and_then(|c| classes.get(c)) {
                    Some(Simplicity::Transport(i)) => {
                        let v = VarId::w(&de.component, MultiIndex::unit(self.table.dim(), *i));
                        d.kind = TermKind::Transport(*i);
                        d.expr = SymExpr::var(v);
                        d.coeff = -term.coeff;
                    }
                    _ => d.expr = term.expr.frechet()?,
                }
                if !d.expr.is_zero() {
                    de.terms.push(d);
                }
            }
            de.terms.push(EquationTerm::plain(TermKind::Source, SymExpr::one()));
            for t in &de.terms {
                let want: BTreeSet<u32> = if t.kind == TermKind::Source { [0].into() } else { [1].into() };
                if t.expr.w_degrees() != want {
                    return Err(Error::Structure(format!("dual term `{}` is not linear in w", t.pretty("w"))));
                }
            }
            out.push(de);
        }
        Ok(out)
    }
}

/// `nond` when only undifferentiated `u` appears, `i`-transport when the
/// expression is exactly `∂_i u`, otherwise a violation.
pub fn classify(e: &SymExpr, t: &TypeId, d: usize) -> Simplicity {
    let vars = e.variables();
    if vars.iter().all(|v| v.slot == Slot::U && v.deriv.is_zero()) {
        return Simplicity::Nond;
    }
    for i in 1..=d {
        if *e == SymExpr::var(VarId::u(&t.name, MultiIndex::unit(d, i))) {
            return Simplicity::Transport(i);
        }
    }
    Simplicity::Violation
}

/// Result of an identity check on one tree.
#[derive(Debug, Clone, Serialize)]
pub struct TreeResult {
    pub tree: TreeCode,
    pub passed: bool,
    pub residual: String,
}

/// Outcome of one identity over a family.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub name: String,
    pub passed: bool,
    pub checked: usize,
    pub failures: Vec<TreeResult>,
    pub notices: Vec<String>,
}

impl IdentityReport {
    fn new(name: &str) -> Self {
        Self { name: name.into(), passed: true, checked: 0, failures: vec![], notices: vec![] }
    }

    fn record(&mut self, r: TreeResult) {
        self.checked += 1;
        if !r.passed {
            self.passed = false;
            self.failures.push(r);
        }
    }

    fn finish(mut self) -> Self {
        if self.checked == 0 {
            self.notices.push("empty family: vacuous pass".into());
        }
        self
    }
}

fn require_single_simple(model: &Model) -> Result<TypeId> {
    let t = model.single_component()?;
    if !model.nonlinearity.is_simple() {
        return Err(Error::Simplicity("nonlinearities depend on derivatives of the solution".into()));
    }
    Ok(t)
}

/// `DΥ_t[τ]·w − Σ_{μ ∈ N(τ)} Υ_{t~}[FD_μ τ]`.
pub fn dupsilon_residual(tree: &DecoratedTree, model: &Model) -> Result<SymExpr> {
    let t = require_single_simple(model)?;
    let lhs = upsilon(tree, &t, &model.nonlinearity)?.frechet()?;
    let td = t.dual()?;
    let mut rhs = SymExpr::zero();
    for u in tree.node_set() {
        rhs = rhs.add(&upsilon(&dualize_at(tree, u)?, &td, &model.nonlinearity)?);
    }
    Ok(lhs.sub(&rhs))
}

pub fn verify_dupsilon_identity(tree: &DecoratedTree, model: &Model) -> Result<(bool, SymExpr)> {
    let r = dupsilon_residual(tree, model)?;
    Ok((r.is_zero(), r))
}

/// The identity over the negative non-vanishing family.
pub fn verify_dupsilon_family(model: &Model) -> Result<IdentityReport> {
    let t = require_single_simple(model)?;
    let fam = model.negative_family(&t)?;
    let results: Vec<Result<TreeResult>> = fam
        .par_iter()
        .map(|c| {
            let r = dupsilon_residual(&c.tree, model)?;
            Ok(TreeResult { tree: c.code.clone(), passed: r.is_zero(), residual: r.pretty() })
        })
        .collect();
    let mut rep = IdentityReport::new("dupsilon");
    for r in results {
        rep.record(r?);
    }
    Ok(rep.finish())
}

/// Formal sum in the free rational vector space over tree codes.
pub type FormalSum = BTreeMap<TreeCode, Q>;

fn add_to(sum: &mut FormalSum, code: TreeCode, c: Q) {
    let e = sum.entry(code.clone()).or_insert_with(Q::zero);
    *e += c;
    if e.is_zero() {
        sum.remove(&code);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SymmetryReport {
    pub passed: bool,
    /// `Σ_τ Σ_u f(FD_u τ)/S(τ)` equals `Σ_σ f(σ)/S(σ)` coefficientwise.
    pub lemma: bool,
    /// `m(σ)S(σ) = S(qσ)` for every dual tree.
    pub per_tree: bool,
    /// The lemma's right side rebuilt from the per-tree identity agrees with
    /// its left side.
    pub rederived: bool,
    pub base_trees: usize,
    pub dual_trees: usize,
    pub failures: Vec<TreeResult>,
    pub notices: Vec<String>,
}

/// Checks the symmetry-factor lemma with `f` the basis vector of each dual
/// tree. `symmetry` computes `S`; tests may pass a corrupted one.
pub fn verify_symmetry_lemma(model: &Model, cutoff: Q, symmetry: &(dyn Fn(&DecoratedTree) -> u64 + Sync)) -> Result<SymmetryReport> {
    let t = require_single_simple(model)?;
    let base = model.family(&model.rule, &t, cutoff, false, true)?;
    let dual = model.dual_family(&t, cutoff)?;
    let dual_codes: BTreeSet<TreeCode> = dual.iter().map(|c| c.code.clone()).collect();

    let mut lhs = FormalSum::new();
    for c in &base {
        let s = Q::new(1, symmetry(&c.tree) as i64);
        for u in c.tree.node_set() {
            let code = dualize_at(&c.tree, u)?.code();
            if dual_codes.contains(&code) {
                add_to(&mut lhs, code, s);
            }
        }
    }
    let mut rhs = FormalSum::new();
    let mut via_m = FormalSum::new();
    let mut failures = Vec::new();
    let mut per_tree = true;
    for c in &dual {
        let s = symmetry(&c.tree);
        add_to(&mut rhs, c.code.clone(), Q::new(1, s as i64));
        let m = multiplicity_m(&c.tree)?;
        let sq = symmetry(&c.tree.q_project());
        add_to(&mut via_m, c.code.clone(), Q::new(m as i64, sq as i64));
        if m * s != sq {
            per_tree = false;
            failures.push(TreeResult {
                tree: c.code.clone(),
                passed: false,
                residual: format!("m*S = {}*{} != S(q) = {}", m, s, sq),
            });
        }
    }
    let lemma = lhs == rhs;
    if !lemma {
        let keys: BTreeSet<&TreeCode> = lhs.keys().chain(rhs.keys()).collect();
        for k in keys {
            let a = lhs.get(k).copied().unwrap_or_else(Q::zero);
            let b = rhs.get(k).copied().unwrap_or_else(Q::zero);
            if a != b {
                failures.push(TreeResult { tree: k.clone(), passed: false, residual: fmt_q(&(a - b)) });
            }
        }
    }
    let rederived = via_m == lhs;
    let mut notices = vec![];
    if dual.is_empty() {
        notices.push("empty dual family: vacuous pass".into());
    }
    Ok(SymmetryReport {
        passed: lemma && per_tree && rederived,
        lemma,
        per_tree,
        rederived,
        base_trees: base.len(),
        dual_trees: dual.len(),
        failures,
        notices,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PhiReport {
    pub passed: bool,
    pub involution: IdentityReport,
    pub symmetry: IdentityReport,
    pub upsilon: IdentityReport,
    pub skipped_decorated: usize,
}

/// `Φ̂Φ̂σ = σ`, `S(Φσ) = S(σ)` and `Υ_{t~}[Φσ] = Υ_{t~}[σ]` over the
/// zero-decorated members of a dual family.
pub fn verify_phi_properties(family: &[Counterterm], model: &Model) -> Result<PhiReport> {
    let t = require_single_simple(model)?;
    let td = t.dual()?;
    let mut inv = IdentityReport::new("phi-involution");
    let mut sym = IdentityReport::new("phi-symmetry");
    let mut ups = IdentityReport::new("phi-upsilon");
    let mut skipped = 0;
    for c in family {
        if c.tree.has_node_decorations() {
            skipped += 1;
            continue;
        }
        let phi = single_term(&reroot_hat(&c.tree)?)?;
        let back = reroot_hat(&phi)?;
        let ok = back.len() == 1 && back.coeff(&c.code) == 1;
        inv.record(TreeResult { tree: c.code.clone(), passed: ok, residual: if ok { "0".into() } else { format!("{:?}", back.to_json()) } });
        let (a, b) = (phi.symmetry_factor(), c.tree.symmetry_factor());
        sym.record(TreeResult { tree: c.code.clone(), passed: a == b, residual: format!("{}", a as i64 - b as i64) });
        let r = upsilon(&phi, &td, &model.nonlinearity)?.sub(&upsilon(&c.tree, &td, &model.nonlinearity)?);
        ups.record(TreeResult { tree: c.code.clone(), passed: r.is_zero(), residual: r.pretty() });
    }
    let mut rep = PhiReport {
        passed: false,
        involution: inv.finish(),
        symmetry: sym.finish(),
        upsilon: ups.finish(),
        skipped_decorated: skipped,
    };
    if skipped > 0 {
        rep.upsilon.notices.push(format!("{skipped} decorated trees skipped"));
    }
    rep.passed = rep.involution.passed && rep.symmetry.passed && rep.upsilon.passed;
    Ok(rep)
}

fn single_term(s: &crate::extensions::TreeSum) -> Result<DecoratedTree> {
    let mut it = s.terms();
    match (it.next(), it.next()) {
        (Some((_, t, 1)), None) => Ok(t.clone()),
        _ => Err(Error::Structure("root shift of an undecorated tree is not a single tree".into())),
    }
}

/// Largest homogeneity gained by grafting one admissible kernel edge onto
/// a dual tree: `max_{(l,k)} |l|_s − |k|_s + floor(l)`.
pub fn graft_allowance(model: &Model, t: &TypeId) -> Result<Q> {
    let floors = crate::rules::homogeneity_floors(&model.rule, &model.table)?;
    let s = &model.table.scaling;
    let mut best: Option<Q> = None;
    for (l, k) in model.rule.alphabet(t) {
        if !l.is_kernel() {
            continue;
        }
        let Some(f) = floors.get(&l) else { continue };
        let g = model.table.hom(&l)? - Q::from_integer(s.degree(&k) as i64) + f;
        best = Some(best.map_or(g, |b: Q| b.max(g)));
    }
    best.ok_or_else(|| Error::Structure(format!("no kernel edges admissible under `{t}`")))
}

#[derive(Debug, Clone, Serialize)]
pub struct CharacterizationReport {
    /// No mismatch beyond the explained ones.
    pub passed: bool,
    /// The two sets coincide.
    pub exact: bool,
    pub enumerated: usize,
    pub generated: usize,
    pub only_enumerated: Vec<TreeCode>,
    pub only_generated: Vec<TreeCode>,
    /// Enumerated trees without a preimage that are non-vanishing only
    /// because `∂^n` at a decorated node hits the dual variable; with the
    /// coefficient of undifferentiated `w` in its place they vanish.
    pub explained: Vec<TreeCode>,
}

/// Some node factor vanishes once every differentiated `w` is set to zero.
pub fn vanishes_without_w_derivatives(tree: &DecoratedTree, target: &TypeId, spec: &NonlinearitySpec) -> Result<bool> {
    for u in tree.node_set() {
        let mut f = node_factor(tree, u, target, spec)?;
        for v in f.variables() {
            if v.slot == Slot::W && !v.deriv.is_zero() {
                f = f.substitute(&v, &SymExpr::zero());
            }
        }
        if f.is_zero() {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Compares `{FD_{u,e} τ}` over base trees with the enumerated dual family
/// below `cutoff`. Base trees are taken up to `cutoff` plus the graft
/// allowance so that every dual tree below the cutoff has a preimage.
pub fn verify_characterization(model: &Model, cutoff: Q) -> Result<CharacterizationReport> {
    let t = require_single_simple(model)?;
    let td = t.dual()?;
    let allowance = graft_allowance(model, &t)?;
    let base = model.family(&model.rule, &t, cutoff + allowance, false, true)?;
    let mut generated = BTreeSet::new();
    for c in &base {
        for s in dual_cut_images(&c.tree)? {
            if s.homogeneity(&model.table)? < cutoff {
                generated.insert(s.code());
            }
        }
    }
    let dual = model.dual_family(&t, cutoff)?;
    let enumerated: BTreeSet<TreeCode> = dual.iter().map(|c| c.code.clone()).collect();
    let only_enumerated: Vec<TreeCode> = enumerated.difference(&generated).cloned().collect();
    let only_generated: Vec<TreeCode> = generated.difference(&enumerated).cloned().collect();
    let mut explained = Vec::new();
    for c in dual.iter().filter(|c| only_enumerated.contains(&c.code)) {
        if vanishes_without_w_derivatives(&c.tree, &td, &model.nonlinearity)? {
            explained.push(c.code.clone());
        }
    }
    Ok(CharacterizationReport {
        passed: only_generated.is_empty() && explained.len() == only_enumerated.len(),
        exact: only_enumerated.is_empty() && only_generated.is_empty(),
        enumerated: enumerated.len(),
        generated: generated.len(),
        only_enumerated,
        only_generated,
        explained,
    })
}

/// Checks that the dual edges of each tree form a root path whose top
/// recovers the tree from its projection.
pub fn verify_distinguished_round_trip(family: &[Counterterm]) -> Result<IdentityReport> {
    let mut rep = IdentityReport::new("distinguished-node");
    for c in family {
        let nu = distinguished_node(&c.tree)?;
        let ok = dualize_at(&c.tree.q_project(), nu)?.code() == c.code;
        rep.record(TreeResult { tree: c.code.clone(), passed: ok, residual: String::new() });
    }
    Ok(rep.finish())
}
