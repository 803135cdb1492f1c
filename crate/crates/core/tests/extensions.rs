mod common;

use std::collections::BTreeSet;

use common::*;
use mallitree::equations::Model;
use mallitree::extensions::*;
use mallitree::q::qi;
use mallitree::{DecoratedTree, Error, MultiIndex, NodeId, TypeId};

fn hat(label: &str) -> DecoratedTree {
    DecoratedTree::noise(TypeId::noise("Xi").labelled(label).unwrap(), 1).unwrap()
}

fn dual_i(t: &DecoratedTree) -> DecoratedTree {
    DecoratedTree::plant(common::t().dual().unwrap(), MultiIndex::zero(1), t).unwrap()
}

fn she_model() -> Model {
    preset("she").model()
}

fn she_family() -> Vec<DecoratedTree> {
    let m = she_model();
    m.family(&m.rule, &t(), qi(0), true, false).unwrap().into_iter().map(|c| c.tree).collect()
}

fn she_dual_family() -> Vec<DecoratedTree> {
    let m = she_model();
    m.dual_family(&t(), qi(0)).unwrap().into_iter().map(|c| c.tree).collect()
}

fn codes(s: &TreeSum) -> BTreeSet<String> {
    s.terms().map(|(c, _, _)| c.to_string()).collect()
}

#[test]
fn shift_of_the_cherry() {
    let s = shift_expand(&cherry(), "1").unwrap();
    let h = hat("1");
    assert_eq!(codes(&s.slice(0)), [cherry().code().to_string()].into());
    let linear: BTreeSet<String> =
        [prod(&[i(&h), xi()]).code().to_string(), prod(&[i(&xi()), h.clone()]).code().to_string()].into();
    assert_eq!(codes(&s.slice(1)), linear);
    assert_eq!(codes(&s.slice(2)), [prod(&[i(&h), h.clone()]).code().to_string()].into());
    assert!(s.slice(3).is_empty());
    for (_, _, c) in s.slice(1).terms() {
        assert_eq!(c, 1);
    }
}

#[test]
fn shift_leaves_polynomials_alone() {
    let x = x(&[1, 2]);
    let s = shift_expand(&x, "1").unwrap();
    assert_eq!(codes(&s.at_one()), [x.code().to_string()].into());
    assert!(differentiate_d(&x, "1").unwrap().is_empty());
}

#[test]
fn shift_counts_and_projection() {
    for tree in she_family() {
        let leaves = tree.noise_edges().len() as u32;
        let s = shift_expand(&tree, "1").unwrap();
        let one = s.at_one();
        let total: i64 = one.terms().map(|(_, _, c)| c).sum();
        assert_eq!(total, 1 << leaves);
        for (_, t, _) in one.terms() {
            assert_eq!(t.q_project().code(), tree.code());
        }
        assert_eq!(codes(&s.slice(0)), [tree.code().to_string()].into());
        let dsum: i64 = differentiate_d(&tree, "1").unwrap().terms().map(|(_, _, c)| c).sum();
        assert_eq!(dsum, leaves as i64);
    }
}

#[test]
fn derivative_of_the_cherry() {
    let d = differentiate_d(&cherry(), "1").unwrap();
    let h = hat("1");
    let want: BTreeSet<String> =
        [prod(&[i(&h), xi()]).code().to_string(), prod(&[i(&xi()), h]).code().to_string()].into();
    assert_eq!(codes(&d), want);
}

#[test]
fn shift_commutes_with_plant() {
    for tree in she_family() {
        let planted = i(&tree);
        let lhs = shift_expand(&planted, "1").unwrap();
        let rhs = shift_expand(&tree, "1").unwrap();
        for n in 0..=tree.noise_edges().len() as u32 {
            let a = lhs.slice(n);
            let mut b = TreeSum::new();
            for (_, t, c) in rhs.slice(n).terms() {
                b.add(i(t), c);
            }
            assert_eq!(codes(&a), codes(&b));
            for (code, _, c) in a.terms() {
                assert_eq!(b.coeff(code), c);
            }
        }
    }
}

fn relabel(tree: &DecoratedTree, labels: &[(NodeId, &str)]) -> DecoratedTree {
    let mut t = tree.clone();
    for &(u, l) in labels {
        let ty = TypeId::noise("Xi").labelled(l).unwrap();
        t.set_edge_type(u, ty).unwrap();
    }
    t
}

#[test]
fn telescope_with_two_hatted_leaves() {
    let tree = prod(&[i(&hat(LABEL_H)), hat(LABEL_H)]);
    let leaves = hatted_leaves(&tree);
    assert_eq!(leaves.len(), 2);
    let (u, v) = (leaves[0], leaves[1]);
    let sum = telescope_a(&tree, &[u, v]).unwrap();
    let want: BTreeSet<String> = [
        relabel(&tree, &[(u, LABEL_HK), (v, LABEL_K)]).code().to_string(),
        relabel(&tree, &[(u, LABEL_H), (v, LABEL_HK)]).code().to_string(),
    ]
    .into();
    assert_eq!(codes(&sum), want);
    // the other order swaps the roles
    let rev = telescope_a(&tree, &[v, u]).unwrap();
    let want: BTreeSet<String> = [
        relabel(&tree, &[(v, LABEL_HK), (u, LABEL_K)]).code().to_string(),
        relabel(&tree, &[(v, LABEL_H), (u, LABEL_HK)]).code().to_string(),
    ]
    .into();
    assert_eq!(codes(&rev), want);
}

#[test]
fn telescope_with_one_hatted_leaf() {
    let tree = prod(&[i(&hat(LABEL_H)), xi()]);
    let leaves = hatted_leaves(&tree);
    let sum = telescope_a(&tree, &leaves).unwrap();
    assert_eq!(codes(&sum), [relabel(&tree, &[(leaves[0], LABEL_HK)]).code().to_string()].into());
}

#[test]
fn telescope_rejects_repeated_leaves() {
    let tree = prod(&[i(&hat(LABEL_H)), hat(LABEL_H)]);
    let l = hatted_leaves(&tree);
    assert!(matches!(telescope_a(&tree, &[l[0], l[0]]), Err(Error::InvalidOrder(_))));
    assert!(matches!(telescope_a(&tree, &[l[0], l[1], tree.root()]), Err(Error::InvalidOrder(_))));
}

#[test]
fn dualize_at_the_root_is_identity() {
    for tree in she_family() {
        assert_eq!(dualize_at(&tree, tree.root()).unwrap().code(), tree.code());
    }
}

#[test]
fn dualize_the_cherry_kernel() {
    let c = cherry();
    let mu = c.kernel_edges()[0];
    let fd = dualize_at(&c, mu).unwrap();
    assert_eq!(fd.code(), prod(&[dual_i(&xi()), xi()]).code());
}

#[test]
fn dualized_edges_are_the_ancestor_chain() {
    for tree in she_family() {
        for u in tree.node_set() {
            let fd = dualize_at(&tree, u).unwrap();
            let changed: BTreeSet<NodeId> =
                tree.edges().into_iter().filter(|&e| fd.edge(e).unwrap().ty != tree.edge(e).unwrap().ty).collect();
            // independent path: walk parents
            let mut chain = BTreeSet::new();
            let mut cur = u;
            while let Some(p) = tree.parent(cur) {
                chain.insert(cur);
                cur = p;
            }
            assert_eq!(changed, chain);
            assert_eq!(fd.q_project().code(), tree.code());
        }
    }
}

#[test]
fn dualize_rejects_noise_leaves() {
    let c = cherry();
    let leaf = c.noise_edges()[0];
    assert!(matches!(dualize_at(&c, leaf), Err(Error::NotANode(_))));
}

#[test]
fn cut_at_the_root_of_the_cherry() {
    let c = cherry();
    let e = c.kernel_edges()[0];
    let cut = dualize_cut(&c, c.root(), e).unwrap();
    assert_eq!(cut.code(), xi().code());
    assert!(cut.edges().into_iter().all(|u| !cut.edge(u).unwrap().ty.is_dual()));
}

#[test]
fn cut_edge_counts() {
    for tree in she_family() {
        for e in tree.kernel_edges() {
            let u = tree.parent(e).unwrap();
            let cut = dualize_cut(&tree, u, e).unwrap();
            let above = tree.subtree(e).edge_count();
            assert_eq!(cut.edge_count(), tree.edge_count() - 1 - above);
        }
    }
}

#[test]
fn cut_rejects_bad_edges() {
    let c = cherry();
    let noise = c.noise_edges().into_iter().find(|&u| c.parent(u) == Some(c.root())).unwrap();
    assert!(matches!(dualize_cut(&c, c.root(), noise), Err(Error::InvalidEdge(_))));
    let e = c.kernel_edges()[0];
    assert!(matches!(dualize_cut(&c, e, e), Err(Error::InvalidEdge(_))));
}

#[test]
fn distinguished_node_examples() {
    assert_eq!(distinguished_node(&cherry()).unwrap(), cherry().root());
    let c = cherry();
    let mu = c.kernel_edges()[0];
    assert_eq!(distinguished_node(&dualize_at(&c, mu).unwrap()).unwrap(), mu);
    // a dual edge that does not start at the root
    let bad = i(&dual_i(&xi()));
    assert!(matches!(distinguished_node(&bad), Err(Error::MalformedDual(_))));
}

#[test]
fn distinguished_round_trip_on_the_dual_family() {
    let fam = she_dual_family();
    assert!(!fam.is_empty());
    for s in fam {
        let nu = distinguished_node(&s).unwrap();
        assert_eq!(dualize_at(&s.q_project(), nu).unwrap().code(), s.code());
    }
}

#[test]
fn reroot_the_dualized_cherry() {
    let c = cherry();
    let fd = dualize_at(&c, c.kernel_edges()[0]).unwrap();
    let r = reroot_hat(&fd).unwrap();
    assert_eq!(r.len(), 1);
    let (_, t, coeff) = r.terms().next().unwrap();
    assert_eq!(coeff, 1);
    // noise at the new root, a dual edge down to the old root with its noise
    assert_eq!(t.code(), prod(&[dual_i(&xi()), xi()]).code());
    let root_noise = t.children(t.root()).iter().filter(|&&u| t.is_noise_leaf(u)).count();
    assert_eq!(root_noise, 1);
}

#[test]
fn reroot_is_an_involution() {
    let fam = she_dual_family();
    let mut checked = 0;
    for s in fam.iter().filter(|s| !s.has_node_decorations()) {
        let once = reroot_hat(s).unwrap();
        assert_eq!(once.len(), 1);
        let (_, t, c) = once.terms().next().unwrap();
        assert_eq!(c, 1);
        let twice = reroot_hat(t).unwrap();
        assert_eq!(codes(&twice), [s.code().to_string()].into());
        assert_eq!(t.symmetry_factor(), s.symmetry_factor());
        checked += 1;
    }
    assert!(checked > 0);
}

#[test]
fn reroot_preserves_homogeneity() {
    let s = preset("she");
    let m = s.model();
    let fam = m.dual_family(&t(), qi(1)).unwrap();
    assert!(fam.iter().any(|c| c.tree.has_node_decorations()));
    for c in fam {
        for (_, t, _) in reroot_hat(&c.tree).unwrap().terms() {
            assert_eq!(t.homogeneity(&s.table).unwrap(), c.hom);
        }
    }
}

#[test]
fn reroot_transfers_decorations_with_signs() {
    // X^(0,1) on the top node of the dualized path moves to the old root
    let mut c = cherry();
    let mu = c.kernel_edges()[0];
    c.set_node_dec(mu, MultiIndex(vec![0, 1]));
    let fd = dualize_at(&c, mu).unwrap();
    let r = reroot_hat(&fd).unwrap();
    assert_eq!(r.len(), 2);
    let total: i64 = r.terms().map(|(_, _, c)| c).sum();
    assert_eq!(total, 0);
}

#[test]
fn multiplicity_examples() {
    let tree = prod(&[i(&xi()), i(&xi()), xi()]);
    let e = tree.kernel_edges()[0];
    assert_eq!(multiplicity_m(&dualize_at(&tree, e).unwrap()).unwrap(), 2);
    assert_eq!(multiplicity_m(&tree).unwrap(), 1);
    assert_eq!(multiplicity_m(&xi()).unwrap(), 1);
}

#[test]
fn multiplicity_times_symmetry() {
    for s in she_dual_family() {
        let m = multiplicity_m(&s).unwrap();
        assert_eq!(m * s.symmetry_factor(), s.q_project().symmetry_factor(), "{}", s.code());
    }
}

#[test]
fn tree_sums_serialize() {
    let s = shift_expand(&cherry(), "1").unwrap();
    let v = s.to_json();
    let arr = v.as_array().unwrap();
    assert_eq!(arr.len(), 4);
    for e in arr {
        assert!(e["coeff"].is_string() && e["rpow"].is_u64() && e["tree"].is_string());
    }
}
