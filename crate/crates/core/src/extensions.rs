//! Tree-level operators: shift `S_r`, its derivative `𝒟`, the telescope
//! `𝔸`, dualization `FD_u`/`FD_{u,e}`, the root shift `Φ̂` and the
//! multiplicity `m(σ)`.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::rules::Multiset;
use crate::tree::{DecoratedTree, NodeId, TreeCode};
use crate::types::{MultiIndex, TypeId};

/// Integer combination of trees keyed by code.
#[derive(Debug, Clone, Default)]
pub struct TreeSum {
    terms: BTreeMap<TreeCode, (DecoratedTree, i64)>,
}

impl TreeSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, tree: DecoratedTree, c: i64) {
        if c == 0 {
            return;
        }
        let code = tree.code();
        let e = self.terms.entry(code.clone()).or_insert((tree, 0));
        e.1 += c;
        if e.1 == 0 {
            self.terms.remove(&code);
        }
    }

    pub fn single(tree: DecoratedTree) -> Self {
        let mut s = Self::new();
        s.add(tree, 1);
        s
    }

    pub fn terms(&self) -> impl Iterator<Item = (&TreeCode, &DecoratedTree, i64)> {
        self.terms.iter().map(|(c, (t, n))| (c, t, *n))
    }

    pub fn coeff(&self, code: &TreeCode) -> i64 {
        self.terms.get(code).map_or(0, |(_, c)| *c)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn to_json(&self) -> Value {
        Value::Array(self.terms().map(|(code, _, c)| json!({"coeff": c.to_string(), "rpow": 0, "tree": code})).collect())
    }
}

/// Trees with coefficients that are integer polynomials in `r`.
#[derive(Debug, Clone, Default)]
pub struct TreePolynomial {
    terms: BTreeMap<TreeCode, (DecoratedTree, BTreeMap<u32, i64>)>,
}

impl TreePolynomial {
    pub fn add(&mut self, tree: DecoratedTree, rpow: u32, c: i64) {
        let code = tree.code();
        let e = self.terms.entry(code.clone()).or_insert((tree, BTreeMap::new()));
        *e.1.entry(rpow).or_insert(0) += c;
        e.1.retain(|_, v| *v != 0);
        if e.1.is_empty() {
            self.terms.remove(&code);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&TreeCode, &DecoratedTree, &BTreeMap<u32, i64>)> {
        self.terms.iter().map(|(c, (t, p))| (c, t, p))
    }

    /// The coefficient of `r^n` as a tree sum.
    pub fn slice(&self, n: u32) -> TreeSum {
        let mut s = TreeSum::new();
        for (_, t, p) in self.terms() {
            if let Some(&c) = p.get(&n) {
                s.add(t.clone(), c);
            }
        }
        s
    }

    /// Evaluation at `r = 1`.
    pub fn at_one(&self) -> TreeSum {
        let mut s = TreeSum::new();
        for (_, t, p) in self.terms() {
            s.add(t.clone(), p.values().sum());
        }
        s
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn to_json(&self) -> Value {
        let mut out = Vec::new();
        for (code, _, p) in self.terms() {
            for (n, c) in p {
                out.push(json!({"coeff": c.to_string(), "rpow": n, "tree": code}));
            }
        }
        Value::Array(out)
    }
}

/// `S_r τ`: every subset `H` of noise edges is retyped to the labelled copy,
/// with coefficient `r^{|H|}`.
pub fn shift_expand(tree: &DecoratedTree, label: &str) -> Result<TreePolynomial> {
    let leaves: Vec<NodeId> = tree.noise_edges().into_iter().filter(|&u| tree.edge(u).unwrap().ty.is_base()).collect();
    if leaves.len() > 20 {
        return Err(Error::CapExceeded(format!("{} noise edges in a shift expansion", leaves.len())));
    }
    let mut out = TreePolynomial::default();
    for mask in 0u32..(1 << leaves.len()) {
        let mut t = tree.clone();
        for (j, &u) in leaves.iter().enumerate() {
            if mask & (1 << j) != 0 {
                let ty = t.edge(u).unwrap().ty.labelled(label)?;
                t.set_edge_type(u, ty)?;
            }
        }
        out.add(t, mask.count_ones(), 1);
    }
    Ok(out)
}

/// `𝒟τ`: the `r`-linear part of the shift expansion.
pub fn differentiate_d(tree: &DecoratedTree, label: &str) -> Result<TreeSum> {
    Ok(shift_expand(tree, label)?.slice(1))
}

/// Noise leaves carrying a label.
pub fn hatted_leaves(tree: &DecoratedTree) -> Vec<NodeId> {
    tree.noise_edges().into_iter().filter(|&u| tree.edge(u).unwrap().ty.label().is_some()).collect()
}

pub const LABEL_H: &str = "h";
pub const LABEL_K: &str = "k";
pub const LABEL_HK: &str = "h-k";

/// `𝔸τ` for the total order `order` on the hatted leaves: the term for `u`
/// types earlier leaves `h`, `u` itself `h-k` and later leaves `k`.
pub fn telescope_a(tree: &DecoratedTree, order: &[NodeId]) -> Result<TreeSum> {
    let hatted: BTreeSet<NodeId> = hatted_leaves(tree).into_iter().collect();
    let given: BTreeSet<NodeId> = order.iter().copied().collect();
    if given.len() != order.len() || given != hatted {
        return Err(Error::InvalidOrder(format!(
            "order {order:?} is not a total order of the hatted leaves {hatted:?}"
        )));
    }
    let mut out = TreeSum::new();
    for (pos, _) in order.iter().enumerate() {
        let mut t = tree.clone();
        for (j, &v) in order.iter().enumerate() {
            let label = match j.cmp(&pos) {
                std::cmp::Ordering::Less => LABEL_H,
                std::cmp::Ordering::Equal => LABEL_HK,
                std::cmp::Ordering::Greater => LABEL_K,
            };
            let ty = t.edge(v).unwrap().ty.base().labelled(label)?;
            t.set_edge_type(v, ty)?;
        }
        out.add(t, 1);
    }
    Ok(out)
}

/// `FD_u τ`: kernel edges on the path from the root to `u` become dual.
pub fn dualize_at(tree: &DecoratedTree, u: NodeId) -> Result<DecoratedTree> {
    if !tree.contains(u) || tree.is_noise_leaf(u) {
        return Err(Error::NotANode(u));
    }
    let mut t = tree.clone();
    for e in tree.path_from_root(u)? {
        let ty = tree.edge(e).unwrap().ty.clone();
        if ty.is_dual() {
            return Err(Error::MalformedDual(format!("edge into {e} is already dual")));
        }
        t.set_edge_type(e, ty.dual()?)?;
    }
    Ok(t)
}

/// `FD_{u,e} τ`: `FD_u τ` without the kernel edge `e` (with `e↓ = u`) and
/// everything above it.
pub fn dualize_cut(tree: &DecoratedTree, u: NodeId, e: NodeId) -> Result<DecoratedTree> {
    if !tree.contains(e) || tree.parent(e) != Some(u) {
        return Err(Error::InvalidEdge(format!("edge into {e} does not start at node {u}")));
    }
    if !tree.edge(e).unwrap().ty.is_kernel() {
        return Err(Error::InvalidEdge(format!("edge into {e} is a noise edge")));
    }
    dualize_at(tree, u)?.without_subtree(e)
}

/// All `FD_{u,e} τ` over admissible pairs.
pub fn dual_cut_images(tree: &DecoratedTree) -> Result<Vec<DecoratedTree>> {
    let mut out = Vec::new();
    for e in tree.kernel_edges() {
        let u = tree.parent(e).unwrap();
        out.push(dualize_cut(tree, u, e)?);
    }
    Ok(out)
}

/// The top `ν` of the dual path; the root when there are no dual edges.
pub fn distinguished_node(tree: &DecoratedTree) -> Result<NodeId> {
    let dual: Vec<NodeId> = tree.edges().into_iter().filter(|&u| tree.edge(u).unwrap().ty.is_dual()).collect();
    let mut nu = tree.root();
    let mut seen = 0;
    loop {
        let next: Vec<NodeId> =
            tree.children(nu).iter().copied().filter(|&c| tree.edge(c).unwrap().ty.is_dual()).collect();
        match next.len() {
            0 => break,
            1 => {
                nu = next[0];
                seen += 1;
            }
            n => return Err(Error::MalformedDual(format!("{n} dual edges leave node {nu}"))),
        }
    }
    if seen != dual.len() {
        return Err(Error::MalformedDual("dual edges do not form a path from the root".into()));
    }
    Ok(nu)
}

/// `Φ̂σ`: re-root at the distinguished node and move polynomial
/// decorations with the signed binomial transfer onto the old root.
pub fn reroot_hat(tree: &DecoratedTree) -> Result<TreeSum> {
    let nu = distinguished_node(tree)?;
    let rho = tree.root();
    let base = tree.rerooted(nu)?;
    let nodes: Vec<NodeId> = tree.node_set().into_iter().filter(|&u| !tree.node_dec(u).is_zero()).collect();
    let d = tree.dim();
    let mut out = TreeSum::new();
    let choices: Vec<Vec<MultiIndex>> = nodes.iter().map(|&u| tree.node_dec(u).below()).collect();
    let mut idx = vec![0usize; nodes.len()];
    loop {
        let mut t = base.clone();
        let mut moved = MultiIndex::zero(d);
        let mut sign = 1i64;
        let mut coeff = 1i64;
        for (j, &u) in nodes.iter().enumerate() {
            let m = &choices[j][idx[j]];
            let n = tree.node_dec(u);
            t.set_node_dec(u, n.checked_sub(m).unwrap());
            moved = moved.add(m);
            coeff *= MultiIndex::binomial(n, m) as i64;
            if m.order() % 2 == 1 {
                sign = -sign;
            }
        }
        let r = t.node_dec(rho).add(&moved);
        t.set_node_dec(rho, r);
        out.add(t, sign * coeff);
        // odometer over the choices
        let mut j = 0;
        while j < nodes.len() {
            idx[j] += 1;
            if idx[j] < choices[j].len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
        if j == nodes.len() {
            break;
        }
    }
    Ok(out)
}

/// `m(σ) = #{u ∈ N(qσ) : FD_u(qσ) ≅ σ}`.
pub fn multiplicity_m(tree: &DecoratedTree) -> Result<u64> {
    let target = tree.code();
    let q = tree.q_project();
    let mut m = 0;
    for u in q.node_set() {
        if dualize_at(&q, u)?.code() == target {
            m += 1;
        }
    }
    Ok(m)
}

/// `q` on multisets: extended types are summed into their base type.
pub fn q_multiset(m: &Multiset) -> Multiset {
    let mut out = Multiset::new();
    for ((t, k), &c) in m {
        *out.entry((t.base(), k.clone())).or_insert(0) += c;
    }
    out
}

/// Whether `t` is the base type of `ty` (`q` on types).
pub fn projects_to(ty: &TypeId, t: &TypeId) -> bool {
    ty.base() == *t
}
