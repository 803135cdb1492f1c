//! Rules, their normality and subcriticality, the two rule extensions and
//! enumeration of conforming trees.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_traits::{Signed, Zero};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::q::{fmt_q, Q};
use crate::tree::{DecoratedTree, NodeId, TreeCode};
use crate::types::{MultiIndex, TypeId, TypeTable};

pub type Key = (TypeId, MultiIndex);
pub type Multiset = BTreeMap<Key, u32>;

pub fn fmt_multiset(m: &Multiset) -> String {
    let parts: Vec<String> = m
        .iter()
        .flat_map(|((t, k), &n)| std::iter::repeat(format!("({t},{k})")).take(n as usize))
        .collect();
    format!("[{}]", parts.join(","))
}

/// A set of keys sharing one multiplicity budget.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Group {
    pub keys: BTreeSet<Key>,
    /// `None` means arbitrarily many.
    pub bound: Option<u32>,
}

/// The multisets `fixed ⊔ G` where `G` distributes over the groups within
/// their bounds.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Pattern {
    pub fixed: Multiset,
    pub groups: Vec<Group>,
}

impl Pattern {
    pub fn exact(fixed: Multiset) -> Self {
        Self { fixed, groups: Vec::new() }
    }

    pub fn matches(&self, n: &Multiset) -> bool {
        let mut rest: Vec<(Key, u32)> = Vec::new();
        for (k, &c) in &self.fixed {
            if n.get(k).copied().unwrap_or(0) < c {
                return false;
            }
        }
        for (k, &c) in n {
            let left = c - self.fixed.get(k).copied().unwrap_or(0);
            if left > 0 {
                rest.push((k.clone(), left));
            }
        }
        let mut caps: Vec<Option<u32>> = self.groups.iter().map(|g| g.bound).collect();
        self.assign(&rest, 0, &mut caps)
    }

    fn assign(&self, rest: &[(Key, u32)], i: usize, caps: &mut [Option<u32>]) -> bool {
        if i == rest.len() {
            return true;
        }
        let (key, count) = &rest[i];
        let gs: Vec<usize> = (0..self.groups.len()).filter(|&g| self.groups[g].keys.contains(key)).collect();
        self.spread(rest, i, *count, &gs, 0, caps)
    }

    fn spread(&self, rest: &[(Key, u32)], i: usize, left: u32, gs: &[usize], j: usize, caps: &mut [Option<u32>]) -> bool {
        if left == 0 {
            return self.assign(rest, i + 1, caps);
        }
        if j == gs.len() {
            return false;
        }
        let g = gs[j];
        let max = caps[g].map_or(left, |c| c.min(left));
        for take in (0..=max).rev() {
            let saved = caps[g];
            caps[g] = saved.map(|c| c - take);
            let ok = self.spread(rest, i, left - take, gs, j + 1, caps);
            caps[g] = saved;
            if ok {
                return true;
            }
        }
        false
    }

    pub fn keys(&self) -> BTreeSet<Key> {
        let mut ks: BTreeSet<Key> = self.fixed.keys().cloned().collect();
        for g in &self.groups {
            ks.extend(g.keys.iter().cloned());
        }
        ks
    }

    /// Largest multiplicity of `key` in any member; `None` if unbounded.
    pub fn max_mult(&self, key: &Key) -> Option<u32> {
        let mut m = self.fixed.get(key).copied().unwrap_or(0);
        for g in &self.groups {
            if g.keys.contains(key) {
                m += g.bound?;
            }
        }
        Some(m)
    }

    /// Infimum of `Σ w(key)` over members; `None` stands for `-∞`.
    fn inf_weight(&self, w: &impl Fn(&Key) -> Option<Q>) -> Option<Option<Q>> {
        let mut total = Q::zero();
        for (k, &c) in &self.fixed {
            total += w(k)? * Q::from_integer(c as i64);
        }
        for g in &self.groups {
            let worst = g.keys.iter().filter_map(w).min();
            if let Some(worst) = worst {
                if worst.is_negative() {
                    match g.bound {
                        Some(b) => total += worst * Q::from_integer(b as i64),
                        None => return Some(None),
                    }
                }
            }
        }
        Some(Some(total))
    }

    fn render(&self) -> String {
        let mut s = fmt_multiset(&self.fixed);
        for g in &self.groups {
            let ks: Vec<String> = g.keys.iter().map(|(t, k)| format!("({t},{k})")).collect();
            let b = g.bound.map_or("*".to_string(), |b| format!("<={b}"));
            s.push_str(&format!(" + {{{}}}{b}", ks.join("|")));
        }
        s
    }
}

/// A rule: each type maps to the admissible multisets of outgoing edges.
/// Noise types default to `{∅}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    entries: BTreeMap<TypeId, Vec<Pattern>>,
    /// Cap on extra dual factors, recorded when the rule is a dual extension.
    pub dual_cap: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub ty: TypeId,
    pub missing: Multiset,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Subcriticality {
    Subcritical { gap: Q },
    Violated { ty: TypeId, witness: Multiset, slack: Q },
}

impl Subcriticality {
    pub fn is_subcritical(&self) -> bool {
        matches!(self, Subcriticality::Subcritical { .. })
    }
}

impl Rule {
    pub fn new() -> Self {
        Self { entries: BTreeMap::new(), dual_cap: None }
    }

    pub fn insert(&mut self, ty: TypeId, pattern: Pattern) {
        let v = self.entries.entry(ty).or_default();
        if !v.contains(&pattern) {
            v.push(pattern);
            v.sort();
        }
    }

    pub fn with_entry(mut self, ty: TypeId, pattern: Pattern) -> Self {
        self.insert(ty, pattern);
        self
    }

    /// Adds an explicit finite entry for `ty`.
    pub fn with_multiset(self, ty: TypeId, items: &[(TypeId, MultiIndex)]) -> Self {
        let mut m = Multiset::new();
        for it in items {
            *m.entry(it.clone()).or_insert(0) += 1;
        }
        self.with_entry(ty, Pattern::exact(m))
    }

    pub fn targets(&self) -> impl Iterator<Item = &TypeId> {
        self.entries.keys()
    }

    pub fn kernel_targets(&self) -> Vec<TypeId> {
        self.entries.keys().filter(|t| t.is_kernel()).cloned().collect()
    }

    pub fn patterns(&self, ty: &TypeId) -> &[Pattern] {
        self.entries.get(ty).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn contains(&self, ty: &TypeId, n: &Multiset) -> bool {
        if ty.is_noise() && !self.entries.contains_key(ty) {
            return n.is_empty();
        }
        self.patterns(ty).iter().any(|p| p.matches(n))
    }

    pub fn alphabet(&self, ty: &TypeId) -> BTreeSet<Key> {
        self.patterns(ty).iter().flat_map(|p| p.keys()).collect()
    }

    pub fn max_mult(&self, ty: &TypeId, key: &Key) -> Option<u32> {
        let mut m = 0;
        for p in self.patterns(ty) {
            m = m.max(p.max_mult(key)?);
        }
        Some(m)
    }

    /// Parses `{"t": [[["Xi",[0,0]],["t",[0,0]]], …]}`. A third element `"*"`
    /// on a pair lets that pair repeat arbitrarily often.
    pub fn from_json(v: &Value, table: &TypeTable) -> Result<Self> {
        let obj = v.as_object().ok_or_else(|| Error::Spec("rule must be an object".into()))?;
        let mut rule = Rule::new();
        let d = table.dim();
        for (name, entries) in obj {
            let ty = table.resolve(name)?;
            let list = entries
                .as_array()
                .ok_or_else(|| Error::Spec(format!("rule entry for `{name}` must be an array")))?;
            for entry in list {
                let items = entry
                    .as_array()
                    .ok_or_else(|| Error::Spec(format!("rule multiset for `{name}` must be an array")))?;
                let mut p = Pattern::exact(Multiset::new());
                for it in items {
                    let pair = it.as_array().filter(|a| a.len() == 2 || a.len() == 3).ok_or_else(|| {
                        Error::Spec(format!("rule item `{it}` must be [type, multi-index] or [type, multi-index, \"*\"]"))
                    })?;
                    let t = table.resolve(pair[0].as_str().ok_or_else(|| Error::Spec(format!("bad type in `{it}`")))?)?;
                    let k: Vec<u32> = serde_json::from_value(pair[1].clone())
                        .map_err(|_| Error::Spec(format!("bad multi-index in `{it}`")))?;
                    if k.len() != d + 1 {
                        return Err(Error::Spec(format!("multi-index in `{it}` must have {} entries", d + 1)));
                    }
                    let key = (t, MultiIndex(k));
                    if pair.len() == 3 {
                        if pair[2] != Value::String("*".into()) {
                            return Err(Error::Spec(format!("only \"*\" may follow a rule item, got `{}`", pair[2])));
                        }
                        p.groups.push(Group { keys: [key].into(), bound: None });
                    } else {
                        *p.fixed.entry(key).or_insert(0) += 1;
                    }
                }
                p.groups.sort();
                p.groups.dedup();
                rule.insert(ty.clone(), p);
            }
        }
        Ok(rule)
    }

    /// All members with every multiplicity at most `limit`.
    pub fn entries_up_to(&self, ty: &TypeId, limit: u32) -> Vec<Multiset> {
        let keys: Vec<Key> = self.alphabet(ty).into_iter().collect();
        let mut out = Vec::new();
        let mut cur = Multiset::new();
        fn rec(rule: &Rule, ty: &TypeId, keys: &[Key], i: usize, limit: u32, cur: &mut Multiset, out: &mut Vec<Multiset>) {
            if i == keys.len() {
                if rule.contains(ty, cur) {
                    out.push(cur.clone());
                }
                return;
            }
            let max = rule.max_mult(ty, &keys[i]).map_or(limit, |m| m.min(limit));
            for c in 0..=max {
                if c > 0 {
                    cur.insert(keys[i].clone(), c);
                } else {
                    cur.remove(&keys[i]);
                }
                rec(rule, ty, keys, i + 1, limit, cur, out);
            }
            cur.remove(&keys[i]);
        }
        rec(self, ty, &keys, 0, limit, &mut cur, &mut out);
        out
    }

    /// Multiplicity threshold beyond which membership no longer changes.
    fn threshold(&self) -> u32 {
        let mut t = 0;
        for ps in self.entries.values() {
            for p in ps {
                t = t.max(p.fixed.values().copied().max().unwrap_or(0));
                for g in &p.groups {
                    t = t.max(g.bound.unwrap_or(0));
                }
            }
        }
        t + 2
    }

    /// Normality: `∅` admissible for kernel types, noise entries equal to
    /// `{∅}`, and every entry closed under removing one element.
    pub fn check_normal(&self, table: &TypeTable) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut targets: BTreeSet<TypeId> = self.entries.keys().cloned().collect();
        targets.extend(table.kernel_ids());
        let limit = self.threshold();
        for ty in &targets {
            if ty.is_noise() {
                for p in self.patterns(ty) {
                    if !p.fixed.is_empty() || !p.groups.is_empty() {
                        out.push(Violation {
                            ty: ty.clone(),
                            missing: Multiset::new(),
                            message: format!("noise type `{ty}` admits {}", p.render()),
                        });
                    }
                }
                continue;
            }
            if !self.contains(ty, &Multiset::new()) {
                out.push(Violation {
                    ty: ty.clone(),
                    missing: Multiset::new(),
                    message: format!("R({ty}) does not contain the empty multiset"),
                });
            }
            let mut seen = BTreeSet::new();
            for m in self.entries_up_to(ty, limit) {
                for key in m.keys() {
                    let mut sub = m.clone();
                    let c = sub.get_mut(key).unwrap();
                    *c -= 1;
                    if *c == 0 {
                        sub.remove(key);
                    }
                    if !sub.is_empty() && !self.contains(ty, &sub) && seen.insert(sub.clone()) {
                        out.push(Violation {
                            ty: ty.clone(),
                            message: format!("R({ty}) contains {} but not {}", fmt_multiset(&m), fmt_multiset(&sub)),
                            missing: sub,
                        });
                    }
                }
            }
        }
        out
    }

    /// At most one noise per multiset, carrying no derivative.
    pub fn check_noise_assumption(&self) -> Result<()> {
        for (ty, ps) in &self.entries {
            for p in ps {
                let mut noise = 0u32;
                for ((t, k), &c) in &p.fixed {
                    if t.is_noise() {
                        noise += c;
                        if !k.is_zero() {
                            return Err(Error::NoiseAssumption(format!("R({ty}) has a noise with derivative {k}")));
                        }
                    }
                }
                for g in &p.groups {
                    if g.keys.iter().any(|(t, k)| t.is_noise() && !k.is_zero()) {
                        return Err(Error::NoiseAssumption(format!("R({ty}) has a noise with a derivative")));
                    }
                    if g.keys.iter().any(|(t, _)| t.is_noise()) {
                        noise += g.bound.unwrap_or(u32::MAX / 2);
                    }
                }
                if noise > 1 {
                    return Err(Error::NoiseAssumption(format!("R({ty}) admits {} with several noises", p.render())));
                }
            }
        }
        Ok(())
    }

    /// Checks `reg(t) < |t|_s + inf_{N ∈ R(t)} reg(N)` for every kernel type
    /// of the rule and returns the smallest slack.
    pub fn check_subcritical(&self, table: &TypeTable) -> Result<Subcriticality> {
        let mut gap: Option<Q> = None;
        for ty in self.kernel_targets() {
            let lhs = table.hom(&ty)? - table.reg(&ty)?;
            let s = &table.scaling;
            let mut errs = None;
            let weight = |(t, k): &Key| -> Option<Q> {
                match table.reg(t) {
                    Ok(r) => Some(r - Q::from_integer(s.degree(k) as i64)),
                    Err(_) => None,
                }
            };
            for key in self.alphabet(&ty) {
                if let Err(e) = table.reg(&key.0) {
                    errs = Some(e);
                }
            }
            if let Some(e) = errs {
                return Err(e);
            }
            for p in self.patterns(&ty) {
                match p.inf_weight(&weight).expect("all weights defined") {
                    Some(inf) => {
                        let slack = lhs + inf;
                        if slack <= Q::zero() {
                            return Ok(Subcriticality::Violated { ty: ty.clone(), witness: worst_member(p, &weight), slack });
                        }
                        gap = Some(gap.map_or(slack, |g| g.min(slack)));
                    }
                    None => {
                        return Ok(Subcriticality::Violated {
                            ty: ty.clone(),
                            witness: unbounded_witness(p, &weight, lhs),
                            slack: Q::zero(),
                        })
                    }
                }
            }
        }
        Ok(Subcriticality::Subcritical { gap: gap.unwrap_or_else(|| Q::from_integer(1)) })
    }

    /// `R̂^I`: every noise may be replaced by any of its labelled copies.
    pub fn extend_noise(&self, labels: &[&str]) -> Result<Rule> {
        let mut out = Rule::new();
        for (ty, ps) in &self.entries {
            if ty.is_noise() {
                continue;
            }
            for p in ps {
                let variants = |t: &TypeId| -> Result<Vec<TypeId>> {
                    if t.is_noise() && t.is_base() {
                        let mut v = vec![t.clone()];
                        for l in labels {
                            v.push(t.labelled(l)?);
                        }
                        Ok(v)
                    } else {
                        Ok(vec![t.clone()])
                    }
                };
                for q in split_pattern(p, &variants)? {
                    out.insert(ty.clone(), q);
                }
            }
        }
        Ok(out)
    }

    /// `R̄`: kernel types may be replaced by their duals, plus up to `cap`
    /// extra `(t̄,0)` factors per kernel type; `R̄(t̄)` keeps the entries
    /// that still admit one more base kernel factor.
    pub fn extend_dual(&self, table: &TypeTable, cap: u32) -> Result<Rule> {
        let d = table.dim();
        let mut out = Rule::new();
        out.dual_cap = Some(cap);
        let extra: Vec<Group> = table
            .kernel_ids()
            .into_iter()
            .map(|l| Ok(Group { keys: [(l.dual()?, MultiIndex::zero(d))].into(), bound: Some(cap) }))
            .collect::<Result<_>>()?;
        let variants = |t: &TypeId| -> Result<Vec<TypeId>> {
            if t.is_kernel() && t.is_base() {
                Ok(vec![t.clone(), t.dual()?])
            } else {
                Ok(vec![t.clone()])
            }
        };
        for ty in table.kernel_ids() {
            for p in self.patterns(&ty) {
                for mut q in split_pattern(p, &variants)? {
                    q.groups.extend(extra.iter().cloned());
                    q.groups.sort();
                    q.groups.dedup();
                    out.insert(ty.clone(), q);
                }
            }
        }
        for ty in table.kernel_ids() {
            let dual = ty.dual()?;
            let base_patterns = out.patterns(&ty).to_vec();
            let kernel_keys: Vec<Key> =
                self.alphabet(&ty).into_iter().chain(all_kernel_keys(self)).filter(|(t, _)| t.is_kernel()).collect();
            for p in &base_patterns {
                for key in &kernel_keys {
                    for q in remove_one(p, key) {
                        out.insert(dual.clone(), q);
                    }
                }
            }
            if !out.entries.contains_key(&dual) {
                out.entries.insert(dual.clone(), Vec::new());
            }
        }
        Ok(out)
    }

    /// Entry-wise equality of two rules on all multisets up to `limit` copies
    /// of each key.
    pub fn same_entries(&self, a: &TypeId, other: &Rule, b: &TypeId, limit: u32) -> bool {
        let mut x = self.entries_up_to(a, limit);
        let mut y = other.entries_up_to(b, limit);
        let keys: BTreeSet<Key> = self.alphabet(a).union(&other.alphabet(b)).cloned().collect();
        x.retain(|m| m.keys().all(|k| keys.contains(k)));
        y.retain(|m| m.keys().all(|k| keys.contains(k)));
        x.sort();
        y.sort();
        if x != y {
            return false;
        }
        // members only reachable through the other alphabet
        x.iter().all(|m| other.contains(b, m)) && y.iter().all(|m| self.contains(a, m))
    }

    /// Whether `tree`, planted on `target`, conforms node by node.
    pub fn conforms(&self, tree: &DecoratedTree, target: &TypeId) -> bool {
        tree.node_ids().all(|u| {
            let ty = match tree.edge(u) {
                Some(e) => &e.ty,
                None => target,
            };
            self.contains(ty, &tree.child_multiset(u))
        })
    }
}

impl Default for Rule {
    fn default() -> Self {
        Self::new()
    }
}

fn all_kernel_keys(rule: &Rule) -> Vec<Key> {
    rule.entries.values().flatten().flat_map(|p| p.keys()).filter(|(t, _)| t.is_kernel() && t.is_base()).collect()
}

/// Patterns for `{N : N ⊔ {key} ∈ L(p)}`.
fn remove_one(p: &Pattern, key: &Key) -> Vec<Pattern> {
    let mut out = Vec::new();
    if let Some(&c) = p.fixed.get(key) {
        let mut q = p.clone();
        if c == 1 {
            q.fixed.remove(key);
        } else {
            q.fixed.insert(key.clone(), c - 1);
        }
        out.push(q);
    }
    for (i, g) in p.groups.iter().enumerate() {
        if g.keys.contains(key) && g.bound != Some(0) {
            let mut q = p.clone();
            q.groups[i].bound = g.bound.map(|b| b - 1);
            q.groups.retain(|g| g.bound != Some(0));
            out.push(q);
        }
    }
    out
}

/// Replaces every type by each of its variants, splitting fixed
/// multiplicities in all possible ways and widening groups.
fn split_pattern(p: &Pattern, variants: &impl Fn(&TypeId) -> Result<Vec<TypeId>>) -> Result<Vec<Pattern>> {
    let mut acc = vec![Multiset::new()];
    for ((t, k), &c) in &p.fixed {
        let vs = variants(t)?;
        let mut next = Vec::new();
        for m in &acc {
            for split in compositions(c, vs.len()) {
                let mut m = m.clone();
                for (v, n) in vs.iter().zip(split) {
                    if n > 0 {
                        *m.entry((v.clone(), k.clone())).or_insert(0) += n;
                    }
                }
                next.push(m);
            }
        }
        acc = next;
    }
    let mut groups = Vec::new();
    for g in &p.groups {
        let mut keys = BTreeSet::new();
        for (t, k) in &g.keys {
            for v in variants(t)? {
                keys.insert((v, k.clone()));
            }
        }
        groups.push(Group { keys, bound: g.bound });
    }
    groups.sort();
    Ok(acc.into_iter().map(|fixed| Pattern { fixed, groups: groups.clone() }).collect())
}

/// All ways of writing `n` as an ordered sum of `parts` non-negative terms.
fn compositions(n: u32, parts: usize) -> Vec<Vec<u32>> {
    if parts == 1 {
        return vec![vec![n]];
    }
    let mut out = Vec::new();
    for first in 0..=n {
        for mut rest in compositions(n - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn worst_member(p: &Pattern, w: &impl Fn(&Key) -> Option<Q>) -> Multiset {
    let mut m = p.fixed.clone();
    for g in &p.groups {
        if let (Some(b), Some(k)) = (g.bound, g.keys.iter().min_by_key(|k| w(k))) {
            if w(k).is_some_and(|x| x.is_negative()) && b > 0 {
                *m.entry(k.clone()).or_insert(0) += b;
            }
        }
    }
    m
}

fn unbounded_witness(p: &Pattern, w: &impl Fn(&Key) -> Option<Q>, lhs: Q) -> Multiset {
    let mut m = worst_member(p, w);
    let base: Q = m.iter().map(|(k, &c)| w(k).unwrap() * Q::from_integer(c as i64)).sum();
    for g in &p.groups {
        if g.bound.is_none() {
            if let Some(k) = g.keys.iter().min_by_key(|k| w(k)) {
                let r = w(k).unwrap();
                if r.is_negative() {
                    // copies needed to push lhs + reg(N) to zero or below
                    let need = ((lhs + base) / -r).floor().to_integer().max(0) as u32 + 1;
                    *m.entry(k.clone()).or_insert(0) += need;
                    return m;
                }
            }
        }
    }
    m
}

#[derive(Debug, Clone)]
pub struct Member {
    pub tree: DecoratedTree,
    pub hom: Q,
    pub symmetry: u64,
}

/// Conforming trees below a cutoff, keyed by target type and code.
#[derive(Debug, Clone, Default)]
pub struct TreeFamily {
    pub cutoff: Q,
    pub by_type: BTreeMap<TypeId, BTreeMap<TreeCode, Member>>,
}

impl TreeFamily {
    pub fn get(&self, ty: &TypeId) -> impl Iterator<Item = (&TreeCode, &Member)> {
        self.by_type.get(ty).into_iter().flatten()
    }

    pub fn codes(&self, ty: &TypeId) -> BTreeSet<TreeCode> {
        self.get(ty).map(|(c, _)| c.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.by_type.values().map(|m| m.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub struct EnumOptions {
    pub cutoff: Q,
    pub negative_only: bool,
    /// Maximal scaled degree of a node decoration.
    pub max_node_degree: u32,
    pub max_depth: usize,
}

impl EnumOptions {
    pub fn new(cutoff: Q) -> Self {
        Self { cutoff, negative_only: false, max_node_degree: 10, max_depth: 64 }
    }

    pub fn negative(cutoff: Q) -> Self {
        Self { negative_only: true, ..Self::new(cutoff) }
    }
}

type Candidates = std::rc::Rc<Vec<(DecoratedTree, Q)>>;

struct Enumerator<'a> {
    rule: &'a Rule,
    table: &'a TypeTable,
    opts: &'a EnumOptions,
    floor: BTreeMap<TypeId, Q>,
    memo: HashMap<(TypeId, Q), Candidates>,
}

/// Smallest homogeneity of a conforming tree for each type of the rule.
/// Errors when the infimum is `-∞`.
pub fn homogeneity_floors(rule: &Rule, table: &TypeTable) -> Result<BTreeMap<TypeId, Q>> {
    let mut types: BTreeSet<TypeId> = rule.entries.keys().cloned().collect();
    for ty in rule.entries.keys() {
        types.extend(rule.alphabet(ty).into_iter().map(|(t, _)| t));
    }
    let mut floor: BTreeMap<TypeId, Q> = BTreeMap::new();
    for t in &types {
        if t.is_noise() && !rule.entries.contains_key(t) {
            floor.insert(t.clone(), Q::zero());
        }
    }
    let s = &table.scaling;
    for _round in 0..500 {
        let mut changed = false;
        for ty in &types {
            if ty.is_noise() && !rule.entries.contains_key(ty) {
                continue;
            }
            let w = |(t, k): &Key| -> Option<Q> {
                let f = floor.get(t)?;
                Some(table.hom(t).ok()? - Q::from_integer(s.degree(k) as i64) + f)
            };
            let mut best: Option<Q> = None;
            for p in rule.patterns(ty) {
                // a pattern is usable once all of its fixed keys are
                if let Some(v) = p.inf_weight(&w) {
                    match v {
                        Some(v) => best = Some(best.map_or(v, |b| b.min(v))),
                        None => {
                            return Err(Error::NotSubcritical(format!(
                                "homogeneities of trees for `{ty}` are unbounded below"
                            )))
                        }
                    }
                }
            }
            if let Some(b) = best {
                if floor.get(ty) != Some(&b) {
                    floor.insert(ty.clone(), b);
                    changed = true;
                }
            }
        }
        if !changed {
            return Ok(floor);
        }
    }
    Err(Error::NotSubcritical("homogeneities of conforming trees decrease without bound".into()))
}

/// All trees conforming to `rule` for each kernel target with homogeneity
/// strictly below the cutoff (or below `min(cutoff, 0)` when
/// `negative_only` is set).
pub fn enumerate_trees(rule: &Rule, table: &TypeTable, opts: &EnumOptions) -> Result<TreeFamily> {
    let targets = rule.kernel_targets();
    enumerate_for(rule, table, opts, &targets)
}

pub fn enumerate_for(rule: &Rule, table: &TypeTable, opts: &EnumOptions, targets: &[TypeId]) -> Result<TreeFamily> {
    rule.check_noise_assumption()?;
    if let Subcriticality::Violated { ty, witness, slack } = rule.check_subcritical(table)? {
        return Err(Error::NotSubcritical(format!(
            "R({ty}) contains {} with slack {}",
            fmt_multiset(&witness),
            fmt_q(&slack)
        )));
    }
    let cutoff = if opts.negative_only { opts.cutoff.min(Q::zero()) } else { opts.cutoff };
    let mut e = Enumerator { rule, table, opts, floor: homogeneity_floors(rule, table)?, memo: HashMap::new() };
    let mut fam = TreeFamily { cutoff, by_type: BTreeMap::new() };
    for t in targets {
        let trees = e.generate(t, cutoff, 0)?;
        let entry = fam.by_type.entry(t.clone()).or_default();
        for (tree, hom) in trees.iter() {
            entry.insert(tree.code(), Member { tree: tree.clone(), hom: *hom, symmetry: tree.symmetry_factor() });
        }
    }
    Ok(fam)
}

impl Enumerator<'_> {
    fn generate(&mut self, ty: &TypeId, bound: Q, depth: usize) -> Result<Candidates> {
        if let Some(c) = self.memo.get(&(ty.clone(), bound)) {
            return Ok(c.clone());
        }
        if depth > self.opts.max_depth {
            return Err(Error::CapExceeded(format!("tree depth above {}", self.opts.max_depth)));
        }
        let d = self.table.dim();
        let out = match self.floor.get(ty) {
            None => Vec::new(),
            Some(&fl) if fl >= bound => Vec::new(),
            Some(_) if ty.is_noise() && !self.rule.entries.contains_key(ty) => {
                vec![(DecoratedTree::unit(d), Q::zero())]
            }
            Some(&fl) => self.generate_kernel(ty, bound, fl, depth)?,
        };
        let c = std::rc::Rc::new(out);
        self.memo.insert((ty.clone(), bound), c.clone());
        Ok(c)
    }

    fn slot_cost(&self, (t, k): &Key) -> Option<Q> {
        let f = self.floor.get(t)?;
        Some(self.table.hom(t).ok()? - Q::from_integer(self.table.scaling.degree(k) as i64) + f)
    }

    fn generate_kernel(&mut self, ty: &TypeId, bound: Q, floor: Q, depth: usize) -> Result<Vec<(DecoratedTree, Q)>> {
        let s = self.table.scaling.clone();
        let room = bound - floor;
        let cap = self.opts.max_node_degree;
        if room > Q::from_integer(cap as i64 + 1) {
            return Err(Error::CapExceeded(format!(
                "node decorations above degree {cap} would fall below the cutoff for `{ty}`"
            )));
        }
        let keys: Vec<(Key, Q, Option<u32>)> = self
            .rule
            .alphabet(ty)
            .into_iter()
            .filter_map(|k| {
                let c = self.slot_cost(&k)?;
                let m = self.rule.max_mult(ty, &k);
                Some((k, c, m))
            })
            .collect();
        for (k, c, m) in &keys {
            if m.is_none() && *c <= Q::zero() {
                return Err(Error::NotSubcritical(format!(
                    "arbitrarily many ({},{}) factors for `{ty}` do not raise the homogeneity",
                    k.0, k.1
                )));
            }
        }
        let mut out: BTreeMap<TreeCode, (DecoratedTree, Q)> = BTreeMap::new();
        for n in MultiIndex::up_to_degree(&s, cap) {
            let nd = Q::from_integer(s.degree(&n) as i64);
            if nd >= room {
                continue;
            }
            let budget = bound - nd;
            let mut multisets = Vec::new();
            collect_multisets(&keys, 0, budget, &mut Multiset::new(), Q::zero(), &mut multisets);
            for m in multisets {
                if !self.rule.contains(ty, &m) {
                    continue;
                }
                let slots: Vec<(Key, Q)> = m
                    .iter()
                    .flat_map(|(k, &c)| std::iter::repeat((k.clone(), self.slot_cost(k).unwrap())).take(c as usize))
                    .collect();
                let mut chosen = Vec::new();
                self.fill(&slots, 0, bound, nd, &n, &mut chosen, &mut out, depth)?;
            }
        }
        Ok(out.into_values().collect())
    }

    #[allow(clippy::too_many_arguments)]
    fn fill(
        &mut self,
        slots: &[(Key, Q)],
        i: usize,
        bound: Q,
        spent: Q,
        n: &MultiIndex,
        chosen: &mut Vec<(TreeCode, DecoratedTree, Q)>,
        out: &mut BTreeMap<TreeCode, (DecoratedTree, Q)>,
        depth: usize,
    ) -> Result<()> {
        if i == slots.len() {
            let mut t = DecoratedTree::node(n.clone());
            for (j, (_, sub, _)) in chosen.iter().enumerate() {
                let (ty, k) = &slots[j].0;
                t.graft(0, ty.clone(), k.clone(), sub)?;
            }
            out.insert(t.code(), (t, spent));
            return Ok(());
        }
        let ((ty, k), _) = &slots[i];
        let rest: Q = slots[i + 1..].iter().map(|(_, c)| *c).sum();
        let edge = self.table.hom(ty)? - Q::from_integer(self.table.scaling.degree(k) as i64);
        // |sub| < budget - spent - rest - edge
        let sub_bound = bound - spent - rest - edge;
        let cands = self.generate(ty, sub_bound, depth + 1)?;
        // identical consecutive slots take non-decreasing codes; the lists
        // differ between slots since their bounds do
        let floor_code = if i > 0 && slots[i - 1].0 == slots[i].0 { Some(chosen[i - 1].0.clone()) } else { None };
        for (sub, h) in cands.iter() {
            if !(*h < sub_bound) {
                continue;
            }
            let code = sub.code();
            if floor_code.as_ref().is_some_and(|f| code < *f) {
                continue;
            }
            chosen.push((code, sub.clone(), *h));
            self.fill(slots, i + 1, bound, spent + edge + h, n, chosen, out, depth)?;
            chosen.pop();
        }
        Ok(())
    }
}

fn collect_multisets(keys: &[(Key, Q, Option<u32>)], i: usize, budget: Q, cur: &mut Multiset, cost: Q, out: &mut Vec<Multiset>) {
    // the cheapest completion from here on
    let best_rest: Q = keys[i..]
        .iter()
        .filter(|(_, c, _)| c.is_negative())
        .map(|(_, c, m)| *c * Q::from_integer(m.unwrap_or(0) as i64))
        .sum();
    if cost + best_rest >= budget {
        return;
    }
    if i == keys.len() {
        out.push(cur.clone());
        return;
    }
    let (k, c, m) = &keys[i];
    let mut count = 0u32;
    loop {
        if m.is_some_and(|m| count > m) {
            break;
        }
        let here = cost + *c * Q::from_integer(count as i64);
        let rest_neg: Q = keys[i + 1..]
            .iter()
            .filter(|(_, c, _)| c.is_negative())
            .map(|(_, c, m)| *c * Q::from_integer(m.unwrap_or(0) as i64))
            .sum();
        if here + rest_neg >= budget {
            if !c.is_negative() {
                break;
            }
        } else {
            if count > 0 {
                cur.insert(k.clone(), count);
            }
            collect_multisets(keys, i + 1, budget, cur, here, out);
            cur.remove(k);
        }
        count += 1;
    }
}

/// Brute-force oracle: every tree with at most `max_edges` edges over the
/// rule's alphabet is built shape by shape without consulting the rule,
/// decorated in all ways compatible with the cutoff, and then filtered by
/// conformance and `|τ|_s < cutoff`.
pub fn naive_enumerate(
    rule: &Rule,
    table: &TypeTable,
    target: &TypeId,
    max_edges: usize,
    cutoff: Q,
    max_node_degree: u32,
) -> Result<BTreeMap<TreeCode, DecoratedTree>> {
    let d = table.dim();
    let keys: BTreeSet<Key> = rule.entries.keys().flat_map(|t| rule.alphabet(t)).collect();
    let mut level: BTreeMap<TreeCode, DecoratedTree> = BTreeMap::new();
    let root = DecoratedTree::unit(d);
    level.insert(root.code(), root);
    let mut shapes = level.clone();
    for _ in 0..max_edges {
        let mut next = BTreeMap::new();
        for t in level.values() {
            for u in t.node_ids().filter(|&u| !t.is_noise_leaf(u)).collect::<Vec<_>>() {
                for (ty, k) in &keys {
                    let mut s = t.clone();
                    s.add_child(u, ty.clone(), k.clone(), MultiIndex::zero(d))?;
                    next.entry(s.code()).or_insert(s);
                }
            }
        }
        shapes.extend(next.iter().map(|(c, t)| (c.clone(), t.clone())));
        level = next;
    }
    let s = &table.scaling;
    let decs: Vec<MultiIndex> = MultiIndex::up_to_degree(s, max_node_degree);
    let mut out = BTreeMap::new();
    for t in shapes.values() {
        let h0 = t.homogeneity(table)?;
        if h0 >= cutoff {
            continue;
        }
        let nodes: Vec<NodeId> = t.node_set();
        let mut stack = vec![(t.clone(), 0usize, h0)];
        while let Some((tree, i, h)) = stack.pop() {
            if i == nodes.len() {
                if rule.conforms(&tree, target) {
                    out.entry(tree.code()).or_insert(tree);
                }
                continue;
            }
            for k in &decs {
                let h2 = h + Q::from_integer(s.degree(k) as i64);
                if h2 >= cutoff {
                    continue;
                }
                let mut t2 = tree.clone();
                t2.set_node_dec(nodes[i], k.clone());
                stack.push((t2, i + 1, h2));
            }
        }
    }
    Ok(out)
}
