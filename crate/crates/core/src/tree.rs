//! Typed decorated rooted trees.
//!
//! A tree is stored as an arena of nodes. Every non-root node owns the edge
//! joining it to its parent, so edges are addressed by their upper vertex.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::q::Q;
use crate::types::{MultiIndex, Scaling, TypeId, TypeTable};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub ty: TypeId,
    pub dec: MultiIndex,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub parent: Option<NodeId>,
    /// Edge to the parent; `None` only at the root.
    pub edge: Option<Edge>,
    pub dec: MultiIndex,
    pub children: Vec<NodeId>,
}

/// Canonical string form of a tree; equal iff the trees are isomorphic.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TreeCode(pub String);

impl TreeCode {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TreeCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone)]
pub struct DecoratedTree {
    nodes: Vec<Node>,
    root: NodeId,
    dim: usize,
}

/// One planted factor of the normal form.
#[derive(Debug, Clone)]
pub struct Branch {
    pub ty: TypeId,
    pub dec: MultiIndex,
    pub tree: DecoratedTree,
    pub multiplicity: u32,
}

/// `X^k Ξ Π_i (J_{t_i}^{k_i} τ_i)^{p_i}` with distinct triples.
#[derive(Debug, Clone)]
pub struct NormalForm {
    pub dec: MultiIndex,
    pub noise: Option<TypeId>,
    pub branches: Vec<Branch>,
}

impl PartialEq for DecoratedTree {
    fn eq(&self, other: &Self) -> bool {
        self.code() == other.code()
    }
}

impl Eq for DecoratedTree {}

impl DecoratedTree {
    /// The single-node tree `X^k`.
    pub fn node(dec: MultiIndex) -> Self {
        let dim = dec.len() - 1;
        Self {
            nodes: vec![Node { parent: None, edge: None, dec, children: Vec::new() }],
            root: 0,
            dim,
        }
    }

    /// The unit tree `•` in `d` space dimensions.
    pub fn unit(d: usize) -> Self {
        Self::node(MultiIndex::zero(d))
    }

    /// A single noise edge `Ξ`.
    pub fn noise(ty: TypeId, d: usize) -> Result<Self> {
        let mut t = Self::unit(d);
        t.add_child(0, ty, MultiIndex::zero(d), MultiIndex::zero(d))?;
        Ok(t)
    }

    /// `J_t^k τ`: a new root joined to the old one by a kernel edge.
    pub fn plant(ty: TypeId, dec: MultiIndex, tree: &DecoratedTree) -> Result<Self> {
        if !ty.is_kernel() {
            return Err(Error::NotAKernel(ty.to_string()));
        }
        let mut t = Self::unit(tree.dim);
        t.graft(0, ty, dec, tree)?;
        Ok(t)
    }

    /// Tree product: roots are identified and their decorations added.
    pub fn product(factors: &[DecoratedTree]) -> Result<Self> {
        let d = factors.first().map(|f| f.dim).ok_or_else(|| Error::Structure("empty product".into()))?;
        let mut out = Self::unit(d);
        for f in factors {
            if f.dim != d {
                return Err(Error::Structure("dimension mismatch in product".into()));
            }
            out.nodes[0].dec = out.nodes[0].dec.add(&f.nodes[f.root].dec);
            for &c in &f.nodes[f.root].children {
                let e = f.nodes[c].edge.clone().expect("child edge");
                out.graft(0, e.ty, e.dec, &f.subtree(c))?;
            }
        }
        Ok(out)
    }

    /// Multiplies the root by `X^k`.
    pub fn times_x(mut self, k: &MultiIndex) -> Self {
        let r = self.root;
        self.nodes[r].dec = self.nodes[r].dec.add(k);
        self
    }

    /// Builds a tree from a parent array. Node 0 need not be the root.
    pub fn from_parents(
        parents: &[Option<usize>],
        edges: &[Option<(TypeId, MultiIndex)>],
        decs: &[MultiIndex],
    ) -> Result<Self> {
        let n = parents.len();
        if n == 0 || edges.len() != n || decs.len() != n {
            return Err(Error::Structure("inconsistent array lengths".into()));
        }
        let roots: Vec<_> = (0..n).filter(|&i| parents[i].is_none()).collect();
        if roots.len() != 1 {
            return Err(Error::Structure(format!("expected one root, found {}", roots.len())));
        }
        for (i, p) in parents.iter().enumerate() {
            match (p, &edges[i]) {
                (Some(p), Some(_)) if *p >= n => {
                    return Err(Error::Structure(format!("parent {p} of node {i} out of range")))
                }
                (Some(_), None) => return Err(Error::Structure(format!("node {i} lacks an edge"))),
                (None, Some(_)) => return Err(Error::Structure("root carries an edge".into())),
                _ => {}
            }
        }
        // every node must reach the root without revisiting
        for start in 0..n {
            let mut cur = start;
            let mut steps = 0;
            while let Some(p) = parents[cur] {
                cur = p;
                steps += 1;
                if steps > n {
                    return Err(Error::Structure("cycle in parent links".into()));
                }
            }
        }
        let dim = decs[0].len().checked_sub(1).ok_or_else(|| Error::Structure("empty multi-index".into()))?;
        let mut nodes: Vec<Node> = (0..n)
            .map(|i| Node {
                parent: parents[i],
                edge: edges[i].clone().map(|(ty, dec)| Edge { ty, dec }),
                dec: decs[i].clone(),
                children: Vec::new(),
            })
            .collect();
        for i in 0..n {
            if let Some(p) = parents[i] {
                nodes[p].children.push(i);
            }
        }
        let t = Self { nodes, root: roots[0], dim };
        t.validate()?;
        Ok(t)
    }

    /// Adds a child below `parent` and returns its id.
    pub fn add_child(&mut self, parent: NodeId, ty: TypeId, dec: MultiIndex, node_dec: MultiIndex) -> Result<NodeId> {
        if parent >= self.nodes.len() {
            return Err(Error::NotANode(parent));
        }
        if dec.len() != self.dim + 1 || node_dec.len() != self.dim + 1 {
            return Err(Error::Structure("multi-index length mismatch".into()));
        }
        if ty.is_noise() && (!dec.is_zero() || !node_dec.is_zero()) {
            return Err(Error::InvalidEdge(format!("noise edge `{ty}` must carry zero decorations")));
        }
        if self.is_noise_leaf(parent) {
            return Err(Error::InvalidEdge("noise leaves cannot have children".into()));
        }
        let id = self.nodes.len();
        self.nodes.push(Node { parent: Some(parent), edge: Some(Edge { ty, dec }), dec: node_dec, children: Vec::new() });
        self.nodes[parent].children.push(id);
        Ok(id)
    }

    /// Attaches a copy of `tree` below `at` through a new edge.
    pub fn graft(&mut self, at: NodeId, ty: TypeId, dec: MultiIndex, tree: &DecoratedTree) -> Result<NodeId> {
        let new_root = self.add_child(at, ty, dec, tree.nodes[tree.root].dec.clone())?;
        self.copy_children(new_root, tree, tree.root)?;
        Ok(new_root)
    }

    fn copy_children(&mut self, to: NodeId, src: &DecoratedTree, from: NodeId) -> Result<()> {
        for &c in &src.nodes[from].children {
            let e = src.nodes[c].edge.clone().expect("child edge");
            let id = self.add_child(to, e.ty, e.dec, src.nodes[c].dec.clone())?;
            self.copy_children(id, src, c)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        for (i, n) in self.nodes.iter().enumerate() {
            if n.dec.len() != self.dim + 1 {
                return Err(Error::Structure(format!("node {i} has a malformed decoration")));
            }
            if let Some(e) = &n.edge {
                if e.dec.len() != self.dim + 1 {
                    return Err(Error::Structure(format!("edge into {i} has a malformed decoration")));
                }
                if e.ty.is_noise() {
                    if !e.dec.is_zero() {
                        return Err(Error::InvalidEdge(format!("noise edge `{}` with derivative", e.ty)));
                    }
                    if !n.children.is_empty() || !n.dec.is_zero() {
                        return Err(Error::InvalidEdge(format!(
                            "noise edge `{}` must end in an undecorated leaf",
                            e.ty
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        0..self.nodes.len()
    }

    pub fn parent(&self, u: NodeId) -> Option<NodeId> {
        self.nodes[u].parent
    }

    pub fn children(&self, u: NodeId) -> &[NodeId] {
        &self.nodes[u].children
    }

    pub fn edge(&self, u: NodeId) -> Option<&Edge> {
        self.nodes[u].edge.as_ref()
    }

    pub fn node_dec(&self, u: NodeId) -> &MultiIndex {
        &self.nodes[u].dec
    }

    pub fn set_node_dec(&mut self, u: NodeId, dec: MultiIndex) {
        self.nodes[u].dec = dec;
    }

    pub fn contains(&self, u: NodeId) -> bool {
        u < self.nodes.len()
    }

    pub fn is_noise_leaf(&self, u: NodeId) -> bool {
        self.nodes[u].edge.as_ref().is_some_and(|e| e.ty.is_noise())
    }

    /// `N(τ)`: all vertices that are not noise leaves.
    pub fn node_set(&self) -> Vec<NodeId> {
        self.node_ids().filter(|&u| !self.is_noise_leaf(u)).collect()
    }

    /// All edges, addressed by their upper vertex.
    pub fn edges(&self) -> Vec<NodeId> {
        self.node_ids().filter(|&u| self.nodes[u].edge.is_some()).collect()
    }

    pub fn kernel_edges(&self) -> Vec<NodeId> {
        self.edges().into_iter().filter(|&u| self.nodes[u].edge.as_ref().unwrap().ty.is_kernel()).collect()
    }

    pub fn noise_edges(&self) -> Vec<NodeId> {
        self.edges().into_iter().filter(|&u| self.is_noise_leaf(u)).collect()
    }

    /// The noise type attached directly at `u`, if any.
    pub fn noise_at(&self, u: NodeId) -> Vec<&TypeId> {
        self.nodes[u]
            .children
            .iter()
            .filter_map(|&c| self.nodes[c].edge.as_ref())
            .filter(|e| e.ty.is_noise())
            .map(|e| &e.ty)
            .collect()
    }

    /// Edges on the path from the root to `u`, listed bottom-up from the root.
    pub fn path_from_root(&self, u: NodeId) -> Result<Vec<NodeId>> {
        if !self.contains(u) {
            return Err(Error::NotANode(u));
        }
        let mut path = Vec::new();
        let mut cur = u;
        while let Some(p) = self.nodes[cur].parent {
            path.push(cur);
            cur = p;
        }
        path.reverse();
        Ok(path)
    }

    /// Copy of the subtree rooted at `u`.
    pub fn subtree(&self, u: NodeId) -> DecoratedTree {
        let mut t = Self::node(self.nodes[u].dec.clone());
        t.copy_children(0, self, u).expect("subtree of a valid tree is valid");
        t
    }

    /// Removes the edge into `u` together with everything above it.
    pub fn without_subtree(&self, u: NodeId) -> Result<DecoratedTree> {
        if !self.contains(u) {
            return Err(Error::NotANode(u));
        }
        if u == self.root {
            return Err(Error::InvalidEdge("cannot remove the root".into()));
        }
        let mut t = Self::node(self.nodes[self.root].dec.clone());
        self.copy_except(&mut t, 0, self.root, u);
        Ok(t)
    }

    fn copy_except(&self, out: &mut DecoratedTree, to: NodeId, from: NodeId, skip: NodeId) {
        for &c in &self.nodes[from].children {
            if c == skip {
                continue;
            }
            let e = self.nodes[c].edge.clone().unwrap();
            let id = out.add_child(to, e.ty, e.dec, self.nodes[c].dec.clone()).expect("valid copy");
            self.copy_except(out, id, c, skip);
        }
    }

    /// Applies `f` to every edge type; node ids are preserved.
    pub fn map_types(&self, mut f: impl FnMut(NodeId, &TypeId) -> TypeId) -> DecoratedTree {
        let mut t = self.clone();
        for u in 0..t.nodes.len() {
            if let Some(e) = t.nodes[u].edge.as_mut() {
                e.ty = f(u, &e.ty);
            }
        }
        t
    }

    pub fn set_edge_type(&mut self, u: NodeId, ty: TypeId) -> Result<()> {
        match self.nodes.get_mut(u).and_then(|n| n.edge.as_mut()) {
            Some(e) => {
                e.ty = ty;
                Ok(())
            }
            None => Err(Error::InvalidEdge(format!("node {u} has no incoming edge"))),
        }
    }

    /// Re-roots at `v`: edges on the root-to-`v` path reverse direction and
    /// keep their type and decoration. Node ids are preserved.
    pub fn rerooted(&self, v: NodeId) -> Result<DecoratedTree> {
        if !self.contains(v) {
            return Err(Error::NotANode(v));
        }
        if self.is_noise_leaf(v) {
            return Err(Error::InvalidEdge("cannot re-root at a noise leaf".into()));
        }
        let mut t = self.clone();
        let path = self.path_from_root(v)?;
        // walk downwards from v: each path edge (p -> c) becomes (c -> p)
        for &c in path.iter().rev() {
            let p = self.nodes[c].parent.unwrap();
            let e = self.nodes[c].edge.clone();
            t.nodes[p].parent = Some(c);
            t.nodes[p].edge = e;
        }
        t.nodes[v].parent = None;
        t.nodes[v].edge = None;
        for n in &mut t.nodes {
            n.children.clear();
        }
        for i in 0..t.nodes.len() {
            if let Some(p) = t.nodes[i].parent {
                t.nodes[p].children.push(i);
            }
        }
        t.root = v;
        Ok(t)
    }

    pub fn code(&self) -> TreeCode {
        TreeCode(self.code_at(self.root))
    }

    fn code_at(&self, u: NodeId) -> String {
        let n = &self.nodes[u];
        let mut kids: Vec<(String, MultiIndex, String)> = n
            .children
            .iter()
            .map(|&c| {
                let e = self.nodes[c].edge.as_ref().unwrap();
                (e.ty.to_string(), e.dec.clone(), self.code_at(c))
            })
            .collect();
        kids.sort();
        let mut s = fmt_node_dec(&n.dec);
        s.push('{');
        for (i, (ty, dec, sub)) in kids.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            s.push_str(&format!("{ty}^{dec}->{sub}"));
        }
        s.push('}');
        s
    }

    /// Code of the subtree rooted at `u`.
    pub fn code_of(&self, u: NodeId) -> String {
        self.code_at(u)
    }

    /// `|τ|_s = Σ_e (|t(e)|_s − |e(e)|_s) + Σ_{u ∈ N(τ)} |n(u)|_s`.
    pub fn homogeneity(&self, table: &TypeTable) -> Result<Q> {
        let s = &table.scaling;
        let mut h = Q::zero();
        for n in &self.nodes {
            if let Some(e) = &n.edge {
                h += table.hom(&e.ty)? - Q::from_integer(s.degree(&e.dec) as i64);
            }
            h += Q::from_integer(s.degree(&n.dec) as i64);
        }
        Ok(h)
    }

    /// Scaled degree of all node decorations.
    pub fn decoration_degree(&self, scaling: &Scaling) -> u32 {
        self.nodes.iter().map(|n| scaling.degree(&n.dec)).sum()
    }

    pub fn has_node_decorations(&self) -> bool {
        self.nodes.iter().any(|n| !n.dec.is_zero())
    }

    /// `S(τ) = k! Π_i S(τ_i)^{p_i} p_i!`.
    pub fn symmetry_factor(&self) -> u64 {
        self.symmetry_at(self.root)
    }

    fn symmetry_at(&self, u: NodeId) -> u64 {
        let n = &self.nodes[u];
        let mut groups: BTreeMap<(String, MultiIndex, String), (u64, NodeId)> = BTreeMap::new();
        for &c in &n.children {
            let e = self.nodes[c].edge.as_ref().unwrap();
            let key = (e.ty.to_string(), e.dec.clone(), self.code_at(c));
            groups.entry(key).or_insert((0, c)).0 += 1;
        }
        let mut s = n.dec.factorial();
        for (p, c) in groups.values() {
            s *= self.symmetry_at(*c).pow(*p as u32) * factorial(*p);
        }
        s
    }

    pub fn normal_form(&self) -> Result<NormalForm> {
        let r = self.root;
        let noises = self.noise_at(r);
        if noises.len() > 1 {
            return Err(Error::NoiseAssumption(format!("{} noise edges at the root", noises.len())));
        }
        let mut groups: BTreeMap<(String, MultiIndex, String), Branch> = BTreeMap::new();
        for &c in &self.nodes[r].children {
            let e = self.nodes[c].edge.as_ref().unwrap();
            if e.ty.is_noise() {
                continue;
            }
            let key = (e.ty.to_string(), e.dec.clone(), self.code_at(c));
            groups
                .entry(key)
                .or_insert_with(|| Branch { ty: e.ty.clone(), dec: e.dec.clone(), tree: self.subtree(c), multiplicity: 0 })
                .multiplicity += 1;
        }
        Ok(NormalForm {
            dec: self.nodes[r].dec.clone(),
            noise: noises.first().map(|t| (*t).clone()),
            branches: groups.into_values().collect(),
        })
    }

    /// Multiset of `(type, decoration)` pairs on edges leaving `u` upwards.
    pub fn child_multiset(&self, u: NodeId) -> BTreeMap<(TypeId, MultiIndex), u32> {
        let mut m = BTreeMap::new();
        for &c in &self.nodes[u].children {
            let e = self.nodes[c].edge.as_ref().unwrap();
            *m.entry((e.ty.clone(), e.dec.clone())).or_insert(0) += 1;
        }
        m
    }

    /// Replaces every extended type by its base type.
    pub fn q_project(&self) -> DecoratedTree {
        self.map_types(|_, t| t.base())
    }

    /// Returns a copy with node ids permuted by `perm` (old id → new id).
    pub fn relabeled(&self, perm: &[usize]) -> DecoratedTree {
        let n = self.nodes.len();
        let mut nodes = vec![
            Node { parent: None, edge: None, dec: MultiIndex::zero(self.dim), children: Vec::new() };
            n
        ];
        for (old, node) in self.nodes.iter().enumerate() {
            nodes[perm[old]] = Node {
                parent: node.parent.map(|p| perm[p]),
                edge: node.edge.clone(),
                dec: node.dec.clone(),
                children: node.children.iter().map(|&c| perm[c]).collect(),
            };
        }
        DecoratedTree { nodes, root: perm[self.root], dim: self.dim }
    }

    /// Reverses every child list; codes must not change.
    pub fn with_children_order(&self, mut f: impl FnMut(&mut Vec<NodeId>)) -> DecoratedTree {
        let mut t = self.clone();
        for n in &mut t.nodes {
            f(&mut n.children);
        }
        t
    }

    pub fn edge_count(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn parse(code: &str, table: &TypeTable) -> Result<DecoratedTree> {
        let mut p = Parser { s: code.as_bytes(), pos: 0, table };
        let dec = p.node_dec()?;
        let mut t = DecoratedTree::node(dec);
        p.children(&mut t, 0)?;
        if p.pos != p.s.len() {
            return Err(p.err("trailing input"));
        }
        t.validate()?;
        Ok(t)
    }
}

fn factorial(n: u64) -> u64 {
    (1..=n).product()
}

fn fmt_node_dec(k: &MultiIndex) -> String {
    if k.is_zero() {
        "0()".to_string()
    } else {
        format!("X{k}")
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
    table: &'a TypeTable,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse { pos: self.pos, msg: msg.to_string() }
    }

    fn eat(&mut self, c: u8) -> Result<()> {
        if self.s.get(self.pos) == Some(&c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected `{}`", c as char)))
        }
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn multi_index(&mut self) -> Result<MultiIndex> {
        self.eat(b'(')?;
        let mut v = Vec::new();
        if self.peek() == Some(b')') {
            self.pos += 1;
            return Ok(MultiIndex(v));
        }
        loop {
            let start = self.pos;
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
            let n = std::str::from_utf8(&self.s[start..self.pos])
                .ok()
                .and_then(|x| x.parse().ok())
                .ok_or_else(|| self.err("expected an integer"))?;
            v.push(n);
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b')') => {
                    self.pos += 1;
                    return Ok(MultiIndex(v));
                }
                _ => return Err(self.err("expected `,` or `)`")),
            }
        }
    }

    fn node_dec(&mut self) -> Result<MultiIndex> {
        let d = self.table.dim();
        match self.peek() {
            Some(b'0') => {
                self.pos += 1;
                self.eat(b'(')?;
                self.eat(b')')?;
                Ok(MultiIndex::zero(d))
            }
            Some(b'X') => {
                self.pos += 1;
                let k = self.multi_index()?;
                if k.len() != d + 1 {
                    return Err(self.err("decoration length does not match the scaling"));
                }
                if k.is_zero() {
                    return Err(self.err("zero decoration must be written `0()`"));
                }
                Ok(k)
            }
            _ => Err(self.err("expected `0()` or `X(...)`")),
        }
    }

    fn type_id(&mut self) -> Result<TypeId> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c != b'^') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.s[start..self.pos]).map_err(|_| self.err("invalid utf-8"))?;
        self.table.resolve(name).map_err(|_| Error::Parse { pos: start, msg: format!("unknown type `{name}`") })
    }

    fn children(&mut self, t: &mut DecoratedTree, at: NodeId) -> Result<()> {
        self.eat(b'{')?;
        if self.peek() == Some(b'}') {
            self.pos += 1;
            return Ok(());
        }
        loop {
            let ty = self.type_id()?;
            self.eat(b'^')?;
            let dec = self.multi_index()?;
            if dec.len() != t.dim + 1 {
                return Err(self.err("edge decoration length does not match the scaling"));
            }
            self.eat(b'-')?;
            self.eat(b'>')?;
            let node_dec = self.node_dec()?;
            let pos = self.pos;
            let id = t.add_child(at, ty, dec, node_dec).map_err(|e| Error::Parse { pos, msg: e.to_string() })?;
            self.children(t, id)?;
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b'}') => {
                    self.pos += 1;
                    return Ok(());
                }
                _ => return Err(self.err("expected `,` or `}`")),
            }
        }
    }
}
