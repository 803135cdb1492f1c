#![allow(dead_code)]

use mallitree::specfile::{presets, SpecFile};
use mallitree::{DecoratedTree, MultiIndex, TypeId};

pub fn xi() -> DecoratedTree {
    DecoratedTree::noise(TypeId::noise("Xi"), 1).unwrap()
}

pub fn i(t: &DecoratedTree) -> DecoratedTree {
    DecoratedTree::plant(TypeId::kernel("t"), MultiIndex::zero(1), t).unwrap()
}

pub fn prod(f: &[DecoratedTree]) -> DecoratedTree {
    DecoratedTree::product(f).unwrap()
}

/// `I(Ξ)Ξ`.
pub fn cherry() -> DecoratedTree {
    prod(&[i(&xi()), xi()])
}

pub fn x(k: &[u32]) -> DecoratedTree {
    DecoratedTree::node(MultiIndex(k.to_vec()))
}

pub fn preset(name: &str) -> SpecFile {
    presets::load(name).unwrap()
}

pub fn t() -> TypeId {
    TypeId::kernel("t")
}

/// Number of node permutations fixing the root that preserve parents, edge
/// types, edge decorations and node decorations.
pub fn automorphisms(tree: &DecoratedTree) -> u64 {
    let nodes: Vec<usize> = tree.node_ids().collect();
    let n = nodes.len();
    let pos = |u| nodes.iter().position(|&v| v == u).unwrap();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut count = 0;
    let ok = |p: &[usize]| {
        if p[pos(tree.root())] != pos(tree.root()) {
            return false;
        }
        nodes.iter().enumerate().all(|(a, &u)| {
            let v = nodes[p[a]];
            if tree.node_dec(u) != tree.node_dec(v) {
                return false;
            }
            match (tree.parent(u), tree.parent(v)) {
                (None, None) => true,
                (Some(pu), Some(pv)) => nodes[p[pos(pu)]] == pv && tree.edge(u) == tree.edge(v),
                _ => false,
            }
        })
    };
    // Heap's algorithm over all permutations.
    let mut c = vec![0usize; n];
    if ok(&perm) {
        count += 1;
    }
    let mut k = 0;
    while k < n {
        if c[k] < k {
            if k % 2 == 0 {
                perm.swap(0, k);
            } else {
                perm.swap(c[k], k);
            }
            if ok(&perm) {
                count += 1;
            }
            c[k] += 1;
            k = 0;
        } else {
            c[k] = 0;
            k += 1;
        }
    }
    count
}
