//! Symbolic expressions in jet variables `u_(t,k)`, `w_(t,k)` and smooth
//! function symbols, with the counterterm functional `Υ`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::q::{fmt_q, parse_q, Q};
use crate::tree::{DecoratedTree, NodeId};
use crate::types::{MultiIndex, TypeId, TypeTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slot {
    U,
    W,
}

/// Jet variable `u_(t,k)` or `w_(t,k)` for a base kernel type `t`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId {
    pub slot: Slot,
    pub comp: String,
    pub deriv: MultiIndex,
}

impl VarId {
    pub fn u(comp: &str, deriv: MultiIndex) -> Self {
        Self { slot: Slot::U, comp: comp.to_string(), deriv }
    }

    pub fn w(comp: &str, deriv: MultiIndex) -> Self {
        Self { slot: Slot::W, comp: comp.to_string(), deriv }
    }

    pub fn to_w(&self) -> Self {
        Self { slot: Slot::W, ..self.clone() }
    }

    pub fn bumped(&self, i: usize) -> Self {
        Self { deriv: self.deriv.bump(i), ..self.clone() }
    }

    pub fn render(&self, single_comp: bool) -> String {
        let base = match self.slot {
            Slot::U => "u",
            Slot::W => "w",
        };
        let mut s = base.to_string();
        if !single_comp {
            s.push('_');
            s.push_str(&self.comp);
        }
        if !self.deriv.is_zero() {
            s.push_str(&render_deriv(&self.deriv));
        }
        s
    }
}

/// `d_0`, `d_1^2` style rendering of a space-time derivative.
fn render_deriv(k: &MultiIndex) -> String {
    let mut s = String::new();
    for (i, &n) in k.0.iter().enumerate() {
        if n == 1 {
            s.push_str(&format!("_d{i}"));
        } else if n > 1 {
            s.push_str(&format!("_d{i}^{n}"));
        }
    }
    s
}

/// `D^α F(args)`: a smooth function symbol differentiated `alpha[j]` times
/// in its `j`-th argument.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub symbol: String,
    pub args: Vec<VarId>,
    pub alpha: Vec<u32>,
}

impl Atom {
    pub fn new(symbol: &str, args: Vec<VarId>) -> Self {
        let n = args.len();
        Self { symbol: symbol.to_string(), args, alpha: vec![0; n] }
    }

    fn order(&self) -> u32 {
        self.alpha.iter().sum()
    }

    fn render(&self, single_comp: bool) -> String {
        let args: Vec<String> = self.args.iter().map(|a| a.render(single_comp)).collect();
        if self.args.len() == 1 {
            let n = self.alpha[0];
            let primes = if n <= 3 { "'".repeat(n as usize) } else { format!("^({n})") };
            format!("{}{}({})", self.symbol, primes, args[0])
        } else if self.order() == 0 {
            format!("{}({})", self.symbol, args.join(","))
        } else {
            let ds: Vec<String> = self.alpha.iter().enumerate().filter(|(_, &a)| a > 0).map(|(j, &a)| {
                if a == 1 { format!("D{j}") } else { format!("D{j}^{a}") }
            }).collect();
            format!("{}[{}]({})", self.symbol, ds.join(""), args.join(","))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Monomial {
    pub atoms: BTreeMap<Atom, u32>,
    pub vars: BTreeMap<VarId, u32>,
}

impl Monomial {
    pub fn one() -> Self {
        Self::default()
    }

    fn mul(&self, o: &Monomial) -> Monomial {
        let mut m = self.clone();
        for (a, &n) in &o.atoms {
            *m.atoms.entry(a.clone()).or_insert(0) += n;
        }
        for (v, &n) in &o.vars {
            *m.vars.entry(v.clone()).or_insert(0) += n;
        }
        m
    }

    pub fn w_degree(&self) -> u32 {
        self.vars.iter().filter(|(v, _)| v.slot == Slot::W).map(|(_, &n)| n).sum()
    }
}

/// A finite sum of rational multiples of monomials; zero is the empty map.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SymExpr {
    terms: BTreeMap<Monomial, Q>,
}

impl SymExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Q) -> Self {
        let mut e = Self::zero();
        e.push(Monomial::one(), c);
        e
    }

    pub fn one() -> Self {
        Self::constant(Q::one())
    }

    pub fn var(v: VarId) -> Self {
        let mut m = Monomial::one();
        m.vars.insert(v, 1);
        let mut e = Self::zero();
        e.push(m, Q::one());
        e
    }

    pub fn atom(a: Atom) -> Self {
        let mut m = Monomial::one();
        m.atoms.insert(a, 1);
        let mut e = Self::zero();
        e.push(m, Q::one());
        e
    }

    /// Generic single-argument function `symbol(u_(comp,0))`.
    pub fn function(symbol: &str, comp: &str, d: usize) -> Self {
        Self::atom(Atom::new(symbol, vec![VarId::u(comp, MultiIndex::zero(d))]))
    }

    fn push(&mut self, m: Monomial, c: Q) {
        use std::collections::btree_map::Entry;
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
            Entry::Vacant(v) => {
                v.insert(c);
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Q)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_polynomial(&self) -> bool {
        self.terms.keys().all(|m| m.atoms.is_empty())
    }

    pub fn add(&self, o: &SymExpr) -> SymExpr {
        let mut e = self.clone();
        for (m, c) in &o.terms {
            e.push(m.clone(), *c);
        }
        e
    }

    pub fn sub(&self, o: &SymExpr) -> SymExpr {
        self.add(&o.scale(-Q::one()))
    }

    pub fn scale(&self, c: Q) -> SymExpr {
        if c.is_zero() {
            return Self::zero();
        }
        SymExpr { terms: self.terms.iter().map(|(m, v)| (m.clone(), *v * c)).collect() }
    }

    pub fn mul(&self, o: &SymExpr) -> SymExpr {
        let mut e = Self::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &o.terms {
                e.push(m1.mul(m2), *c1 * *c2);
            }
        }
        e
    }

    pub fn pow(&self, n: u32) -> SymExpr {
        (0..n).fold(Self::one(), |acc, _| acc.mul(self))
    }

    /// Every jet variable occurring, including inside function arguments.
    pub fn variables(&self) -> BTreeSet<VarId> {
        let mut s = BTreeSet::new();
        for m in self.terms.keys() {
            s.extend(m.vars.keys().cloned());
            for a in m.atoms.keys() {
                s.extend(a.args.iter().cloned());
            }
        }
        s
    }

    /// Exact `∂/∂v`.
    pub fn partial(&self, v: &VarId) -> SymExpr {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            if let Some(&n) = m.vars.get(v) {
                let mut m2 = m.clone();
                if n == 1 {
                    m2.vars.remove(v);
                } else {
                    m2.vars.insert(v.clone(), n - 1);
                }
                out.push(m2, *c * Q::from_integer(n as i64));
            }
            for (a, &n) in &m.atoms {
                for (j, arg) in a.args.iter().enumerate() {
                    if arg != v {
                        continue;
                    }
                    let mut m2 = m.clone();
                    if n == 1 {
                        m2.atoms.remove(a);
                    } else {
                        m2.atoms.insert(a.clone(), n - 1);
                    }
                    let mut da = a.clone();
                    da.alpha[j] += 1;
                    *m2.atoms.entry(da).or_insert(0) += 1;
                    out.push(m2, *c * Q::from_integer(n as i64));
                }
            }
        }
        out
    }

    /// Chain rule for `∂_i`: each variable `(l,k)` contributes its partial
    /// derivative times `(l,k+e_i)`.
    pub fn space_derivative(&self, i: usize) -> SymExpr {
        let mut out = Self::zero();
        for v in self.variables() {
            out = out.add(&self.partial(&v).mul(&Self::var(v.bumped(i))));
        }
        out
    }

    pub fn derivative(&self, k: &MultiIndex) -> SymExpr {
        let mut e = self.clone();
        for (i, &n) in k.0.iter().enumerate() {
            for _ in 0..n {
                e = e.space_derivative(i);
            }
        }
        e
    }

    /// `D expr · w = Σ_v ∂expr/∂u_v · w_v`.
    pub fn frechet(&self) -> Result<SymExpr> {
        if let Some(v) = self.variables().into_iter().find(|v| v.slot == Slot::W) {
            return Err(Error::DirectionPresent(v.render(false)));
        }
        let mut out = Self::zero();
        for v in self.variables() {
            out = out.add(&self.partial(&v).mul(&Self::var(v.to_w())));
        }
        Ok(out)
    }

    /// Splits an expression of `w`-degree one into coefficients of each `w`
    /// variable; `None` if some monomial has a different `w`-degree.
    pub fn linear_parts(&self) -> Option<Vec<(VarId, SymExpr)>> {
        if self.w_degrees().iter().any(|&d| d != 1) {
            return None;
        }
        let ws: BTreeSet<VarId> = self.variables().into_iter().filter(|v| v.slot == Slot::W).collect();
        Some(ws.into_iter().map(|v| {
            let c = self.partial(&v);
            (v, c)
        }).collect())
    }

    /// Total `w`-degree of each monomial.
    pub fn w_degrees(&self) -> BTreeSet<u32> {
        self.terms.keys().map(|m| m.w_degree()).collect()
    }

    /// Replaces each listed function symbol by an expression in placeholder
    /// arguments `u_(#j,0)`, which are substituted by the actual arguments.
    pub fn instantiate(&self, defs: &BTreeMap<String, SymExpr>) -> SymExpr {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let mut term = SymExpr::constant(*c);
            for (v, &n) in &m.vars {
                term = term.mul(&Self::var(v.clone()).pow(n));
            }
            for (a, &n) in &m.atoms {
                let f = match defs.get(&a.symbol) {
                    Some(f) => {
                        let mut f = f.clone();
                        for (j, &k) in a.alpha.iter().enumerate() {
                            for _ in 0..k {
                                f = f.partial(&placeholder(j, a.args[j].deriv.len() - 1));
                            }
                        }
                        let mut f = f;
                        for (j, arg) in a.args.iter().enumerate() {
                            f = f.substitute(&placeholder(j, arg.deriv.len() - 1), &Self::var(arg.clone()));
                        }
                        f
                    }
                    None => Self::atom(a.clone()),
                };
                term = term.mul(&f.pow(n));
            }
            out = out.add(&term);
        }
        out
    }

    /// Substitutes `v ↦ e` in variables (not inside atoms).
    pub fn substitute(&self, v: &VarId, e: &SymExpr) -> SymExpr {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let mut m2 = m.clone();
            let n = m2.vars.remove(v).unwrap_or(0);
            let mut rest = SymExpr::zero();
            rest.push(m2, *c);
            out = out.add(&rest.mul(&e.pow(n)));
        }
        out
    }

    /// Evaluates a polynomial expression at a rational point.
    pub fn eval_q(&self, point: &BTreeMap<VarId, Q>) -> Option<Q> {
        let mut total = Q::zero();
        for (m, c) in &self.terms {
            if !m.atoms.is_empty() {
                return None;
            }
            let mut t = *c;
            for (v, &n) in &m.vars {
                let x = point.get(v)?;
                for _ in 0..n {
                    t *= *x;
                }
            }
            total += t;
        }
        Some(total)
    }

    /// Evaluates with numeric function values supplied per atom.
    pub fn eval_f64(&self, vars: &dyn Fn(&VarId) -> f64, atoms: &dyn Fn(&Atom) -> f64) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                let mut t = crate::q::to_f64(c);
                for (v, &n) in &m.vars {
                    t *= vars(v).powi(n as i32);
                }
                for (a, &n) in &m.atoms {
                    t *= atoms(a).powi(n as i32);
                }
                t
            })
            .sum()
    }

    /// Human-readable ASCII form, e.g. `g''(u)g(u)+g'(u)^2`.
    pub fn pretty(&self) -> String {
        let comps: BTreeSet<&str> = self.variables_ref().map(|v| v.comp.as_str()).collect();
        self.render(comps.len() <= 1)
    }

    fn variables_ref(&self) -> impl Iterator<Item = &VarId> {
        self.terms.keys().flat_map(|m| m.vars.keys().chain(m.atoms.keys().flat_map(|a| a.args.iter())))
    }

    fn render(&self, single: bool) -> String {
        if self.is_zero() {
            return "0".into();
        }
        // higher derivative orders first
        let mut terms: Vec<(&Monomial, &Q)> = self.terms.iter().collect();
        terms.sort_by_key(|(m, _)| {
            let ord: Vec<std::cmp::Reverse<u32>> = m.atoms.keys().map(|a| std::cmp::Reverse(a.order())).collect();
            (std::cmp::Reverse(m.atoms.keys().map(|a| a.order()).max().unwrap_or(0)), ord, (*m).clone())
        });
        let mut s = String::new();
        for (i, (m, c)) in terms.iter().enumerate() {
            let mut body = String::new();
            let mut atoms: Vec<(&Atom, &u32)> = m.atoms.iter().collect();
            atoms.sort_by_key(|(a, _)| (std::cmp::Reverse(a.order()), (*a).clone()));
            for (a, &n) in atoms {
                body.push_str(&a.render(single));
                if n > 1 {
                    body.push_str(&format!("^{n}"));
                }
            }
            let mut factors: Vec<String> = Vec::new();
            for (v, &n) in &m.vars {
                factors.push(if n > 1 { format!("{}^{n}", v.render(single)) } else { v.render(single) });
            }
            if !factors.is_empty() {
                if !body.is_empty() {
                    body.push('*');
                }
                body.push_str(&factors.join("*"));
            }
            let neg = c.is_negative();
            let mag = c.abs();
            if i == 0 {
                if neg {
                    s.push('-');
                }
            } else {
                s.push(if neg { '-' } else { '+' });
            }
            if body.is_empty() {
                s.push_str(&fmt_q(&mag));
            } else if mag.is_one() {
                s.push_str(&body);
            } else {
                s.push_str(&format!("{}*{}", fmt_q(&mag), body));
            }
        }
        s
    }

    /// JSON term list `[{"coeff": "p/q", "factors": "..."}]`.
    pub fn to_json(&self) -> Value {
        let single = self.variables_ref().map(|v| v.comp.as_str()).collect::<BTreeSet<_>>().len() <= 1;
        Value::Array(
            self.terms
                .iter()
                .map(|(m, c)| {
                    let one = SymExpr { terms: [(m.clone(), Q::one())].into() };
                    serde_json::json!({ "coeff": fmt_q(c), "monomial": one.render(single) })
                })
                .collect(),
        )
    }
}

impl fmt::Display for SymExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pretty())
    }
}

fn placeholder(j: usize, d: usize) -> VarId {
    VarId::u(&format!("#{j}"), MultiIndex::zero(d))
}

/// Declares `symbol(x_0, …)` via an expression in the placeholders used by
/// [`SymExpr::instantiate`].
pub fn placeholder_var(j: usize, d: usize) -> SymExpr {
    SymExpr::var(placeholder(j, d))
}

/// Nonlinearities `F_t^Ξ` for each kernel type `t` and each noise `Ξ` or the
/// drift (`None`).
#[derive(Debug, Clone, Default)]
pub struct NonlinearitySpec {
    pub entries: BTreeMap<(String, Option<String>), SymExpr>,
}

impl NonlinearitySpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, comp: &str, noise: Option<&str>, e: SymExpr) -> Self {
        self.entries.insert((comp.to_string(), noise.map(|s| s.to_string())), e);
        self
    }

    pub fn get(&self, comp: &str, noise: Option<&str>) -> Result<&SymExpr> {
        self.entries.get(&(comp.to_string(), noise.map(|s| s.to_string()))).ok_or_else(|| {
            Error::UndefinedNonlinearity(format!("F_{comp}^{}", noise.unwrap_or("1")))
        })
    }

    pub fn components(&self) -> BTreeSet<String> {
        self.entries.keys().map(|(c, _)| c.clone()).collect()
    }

    pub fn is_polynomial(&self) -> bool {
        self.entries.values().all(|e| e.is_polynomial())
    }

    /// Whether every nonlinearity depends on undifferentiated `u` only.
    pub fn is_simple(&self) -> bool {
        self.entries.values().all(|e| e.variables().iter().all(|v| v.slot == Slot::U && v.deriv.is_zero()))
    }

    /// Nonlinearity of a (possibly dual) kernel type with a given noise. A
    /// dual type `t~` uses `F_t~ = DF_t · w`.
    pub fn of(&self, ty: &TypeId, noise: Option<&TypeId>) -> Result<SymExpr> {
        let f = self.get(&ty.name, noise.map(|n| n.name.as_str()))?;
        if ty.is_dual() {
            f.frechet()
        } else {
            Ok(f.clone())
        }
    }

    /// Parses `{"t": {"F": expr, "Xi": expr}}`. The drift may also be keyed
    /// `"drift"`.
    pub fn from_json(v: &Value, table: &TypeTable) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| Error::Spec("nonlinearity must be an object".into()))?;
        let mut out = Self::new();
        for (comp, inner) in obj {
            let ty = table.resolve(comp)?;
            if !ty.is_kernel() || !ty.is_base() {
                return Err(Error::Spec(format!("nonlinearity key `{comp}` is not a kernel type")));
            }
            let inner = inner
                .as_object()
                .ok_or_else(|| Error::Spec(format!("nonlinearity for `{comp}` must be an object")))?;
            for (k, e) in inner {
                let noise = if k == "F" || k == "drift" {
                    None
                } else {
                    let n = table.resolve(k)?;
                    if !n.is_noise() {
                        return Err(Error::Spec(format!("`{k}` is not a noise type")));
                    }
                    Some(k.as_str())
                };
                let expr = parse_expr(e, table)?;
                out = out.with(comp, noise, expr);
            }
        }
        Ok(out)
    }
}

/// Parses the nested-array expression syntax.
pub fn parse_expr(v: &Value, table: &TypeTable) -> Result<SymExpr> {
    let d = table.dim();
    let bad = |m: &str| Error::Spec(format!("invalid expression `{v}`: {m}"));
    match v {
        Value::Number(n) => {
            let x = n.as_i64().ok_or_else(|| bad("numbers must be integers or \"p/q\" strings"))?;
            Ok(SymExpr::constant(Q::from_integer(x)))
        }
        Value::String(s) => {
            if let Some(var) = parse_var_name(s, table) {
                return Ok(SymExpr::var(var?));
            }
            Ok(SymExpr::constant(parse_q(s)?))
        }
        Value::Object(o) => {
            let symbol = o.get("symbol").and_then(|s| s.as_str()).ok_or_else(|| bad("missing `symbol`"))?;
            let args: Vec<VarId> = match (o.get("arg"), o.get("args")) {
                (Some(Value::String(a)), None) => vec![parse_var_name(a, table).ok_or_else(|| bad("bad `arg`"))??],
                (None, Some(Value::Array(a))) => a
                    .iter()
                    .map(|x| match x {
                        Value::String(s) => parse_var_name(s, table).ok_or_else(|| bad("bad argument"))?,
                        other => parse_var_array(other, table),
                    })
                    .collect::<Result<_>>()?,
                _ => return Err(bad("expected `arg` or `args`")),
            };
            Ok(SymExpr::atom(Atom::new(symbol, args)))
        }
        Value::Array(a) => {
            let head = a.first().and_then(|h| h.as_str()).ok_or_else(|| bad("expected an operator"))?;
            let rest = &a[1..];
            match head {
                "u" | "w" => parse_var_array(v, table).map(SymExpr::var),
                "+" => rest.iter().try_fold(SymExpr::zero(), |acc, x| Ok(acc.add(&parse_expr(x, table)?))),
                "*" => rest.iter().try_fold(SymExpr::one(), |acc, x| Ok(acc.mul(&parse_expr(x, table)?))),
                "-" => match rest {
                    [x] => Ok(parse_expr(x, table)?.scale(-Q::one())),
                    [x, y] => Ok(parse_expr(x, table)?.sub(&parse_expr(y, table)?)),
                    _ => Err(bad("`-` takes one or two operands")),
                },
                "^" => match rest {
                    [x, Value::Number(n)] => {
                        let n = n.as_u64().ok_or_else(|| bad("exponent must be a non-negative integer"))?;
                        Ok(parse_expr(x, table)?.pow(n as u32))
                    }
                    _ => Err(bad("`^` takes an expression and an integer")),
                },
                _ => {
                    let _ = d;
                    Err(bad(&format!("unknown operator `{head}`")))
                }
            }
        }
        _ => Err(bad("unsupported value")),
    }
}

/// `u_t` → `u_(t,0)`.
fn parse_var_name(s: &str, table: &TypeTable) -> Option<Result<VarId>> {
    let (slot, comp) = if let Some(c) = s.strip_prefix("u_") {
        (Slot::U, c)
    } else if let Some(c) = s.strip_prefix("w_") {
        (Slot::W, c)
    } else {
        return None;
    };
    Some(match table.resolve(comp) {
        Ok(t) if t.is_kernel() => Ok(VarId { slot, comp: comp.to_string(), deriv: MultiIndex::zero(table.dim()) }),
        _ => Err(Error::UnknownType(comp.to_string())),
    })
}

/// `["u", "t", [0,1]]`.
fn parse_var_array(v: &Value, table: &TypeTable) -> Result<VarId> {
    let bad = || Error::Spec(format!("invalid variable `{v}`"));
    let a = v.as_array().filter(|a| a.len() == 3).ok_or_else(bad)?;
    let slot = match a[0].as_str() {
        Some("u") => Slot::U,
        Some("w") => Slot::W,
        _ => return Err(bad()),
    };
    let comp = a[1].as_str().ok_or_else(bad)?;
    let t = table.resolve(comp)?;
    if !t.is_kernel() || !t.is_base() {
        return Err(Error::Spec(format!("variable component `{comp}` is not a kernel type")));
    }
    let k: Vec<u32> = serde_json::from_value(a[2].clone()).map_err(|_| bad())?;
    if k.len() != table.dim() + 1 {
        return Err(bad());
    }
    Ok(VarId { slot, comp: comp.to_string(), deriv: MultiIndex(k) })
}

/// Node factor `∂^{n(μ)} Π_j D_{(t_j,k_j)} F_{t(μ)}^{Ξ[μ]}`.
pub fn node_factor(tree: &DecoratedTree, u: NodeId, target: &TypeId, spec: &NonlinearitySpec) -> Result<SymExpr> {
    let ty = match tree.edge(u) {
        Some(e) => &e.ty,
        None => target,
    };
    let noises = tree.noise_at(u);
    if noises.len() > 1 {
        return Err(Error::NoiseAssumption(format!("{} noises at one node", noises.len())));
    }
    let mut f = spec.of(ty, noises.first().copied())?;
    for &c in tree.children(u) {
        let e = tree.edge(c).unwrap();
        if e.ty.is_noise() {
            continue;
        }
        let v = VarId {
            slot: if e.ty.is_dual() { Slot::W } else { Slot::U },
            comp: e.ty.name.clone(),
            deriv: e.dec.clone(),
        };
        f = f.partial(&v);
        if f.is_zero() {
            return Ok(f);
        }
    }
    Ok(f.derivative(tree.node_dec(u)))
}

/// `Υ_target[τ] = Π_{μ ∈ N(τ)} node_factor(μ)`.
pub fn upsilon(tree: &DecoratedTree, target: &TypeId, spec: &NonlinearitySpec) -> Result<SymExpr> {
    let mut out = SymExpr::one();
    for u in tree.node_set() {
        let f = node_factor(tree, u, target, spec)?;
        if f.is_zero() {
            return Ok(f);
        }
        out = out.mul(&f);
    }
    Ok(out)
}

/// `Υ` of a dual tree for the dual target `t~`; requires nonlinearities
/// depending on undifferentiated `u` only.
pub fn upsilon_dual(tree: &DecoratedTree, target: &TypeId, spec: &NonlinearitySpec) -> Result<SymExpr> {
    if !target.is_dual() {
        return Err(Error::MalformedDual(format!("target `{target}` is not a dual type")));
    }
    if !spec.is_simple() {
        return Err(Error::Simplicity("nonlinearities depend on derivatives of the solution".into()));
    }
    upsilon(tree, target, spec)
}

/// Non-vanishing: every node factor is a nonzero expression.
pub fn is_nonvanishing(tree: &DecoratedTree, target: &TypeId, spec: &NonlinearitySpec) -> Result<bool> {
    for u in tree.node_set() {
        if node_factor(tree, u, target, spec)?.is_zero() {
            return Ok(false);
        }
    }
    Ok(true)
}
