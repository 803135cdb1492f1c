mod common;

use common::*;
use mallitree::equations::*;
use mallitree::q::{q, qi};
use mallitree::specfile::{presets, SpecFile};
use mallitree::symbolic::{SymExpr, VarId};
use mallitree::{Error, MultiIndex};

fn u() -> VarId {
    VarId::u("t", MultiIndex::zero(1))
}

fn gd(n: u32) -> SymExpr {
    (0..n).fold(SymExpr::function("g", "t", 1), |e, _| e.partial(&u()))
}

fn only(mut eqs: Vec<Equation>) -> Equation {
    assert_eq!(eqs.len(), 1);
    eqs.pop().unwrap()
}

#[test]
fn she_counterterms_by_constant() {
    let m = preset("she").model();
    let eq = only(m.renormalized_equation(true).unwrap());
    let grouped = eq.grouped();
    assert_eq!(grouped.len(), 3);
    assert_eq!(grouped["C1"], gd(1).mul(&gd(0)));
    assert_eq!(grouped["C2"], gd(1).pow(3).mul(&gd(0)));
    assert_eq!(grouped["C3"], gd(2).mul(&gd(1)).mul(&gd(0).pow(2)).scale(q(3, 2)));
    assert_eq!(grouped["C3"].pretty(), "3/2*g''(u)g'(u)g(u)^2");
    assert_eq!(eq.dropped.len(), 7);
    assert!(eq.missing.is_empty());
    assert!(eq.terms.iter().any(|t| t.kind == TermKind::Drift && t.pretty("u") == "f(u)"));
    assert!(eq.terms.iter().any(|t| t.kind == TermKind::Noise("Xi".into()) && t.expr == gd(0)));
}

#[test]
fn counterterm_coefficients_are_inverse_symmetry_factors() {
    let eq = only(preset("she").model().renormalized_equation(true).unwrap());
    for t in eq.counterterms() {
        assert_eq!(t.coeff, q(1, t.symmetry.unwrap() as i64));
    }
}

#[test]
fn additive_noise_has_no_counterterms() {
    let m = preset("she-additive").model();
    let eq = only(m.renormalized_equation(true).unwrap());
    assert_eq!(eq.counterterms().count(), 0);
    let tangent = only(m.tangent_equation(true).unwrap());
    let pretty: Vec<String> = tangent.terms.iter().map(|t| t.pretty("v")).collect();
    assert_eq!(pretty, ["f'(u)·v", "h[Xi]"]);
}

#[test]
fn tangent_is_the_frechet_derivative_plus_sources() {
    let m = preset("she").model();
    let eq = only(m.renormalized_equation(true).unwrap());
    let tangent = only(m.tangent_equation(true).unwrap());
    let mut expected: Vec<SymExpr> = eq.terms.iter().map(|t| t.expr.frechet().unwrap()).filter(|e| !e.is_zero()).collect();
    expected.push(gd(0));
    let got: Vec<SymExpr> = tangent.terms.iter().map(|t| t.expr.clone()).collect();
    assert_eq!(got, expected);
    let pretty: Vec<String> = tangent.terms.iter().map(|t| t.pretty("v")).collect();
    assert!(pretty.contains(&"C1*(g''(u)g(u)+g'(u)^2)·v".to_string()), "{pretty:?}");
    assert!(pretty.contains(&"g(u)*h[Xi]".to_string()));
    assert!(pretty.contains(&"g'(u)·v*xi[Xi]".to_string()));
}

#[test]
fn she_counterterms_are_solution_only() {
    let m = preset("she").model();
    let classes = m.check_assumption_simplicity().unwrap();
    assert_eq!(classes.len(), 4);
    assert!(classes.iter().all(|(_, s)| *s == Simplicity::Nond));
}

#[test]
fn gradient_counterterms_are_refused() {
    let m = preset("kpz-like").model();
    let classes = m.check_assumption_simplicity().unwrap();
    assert!(classes.iter().any(|(_, s)| *s == Simplicity::Violation));
    match m.dual_equation() {
        Err(Error::Simplicity(msg)) => assert!(msg.contains("tree")),
        other => panic!("expected a simplicity error, got {other:?}"),
    }
}

#[test]
fn classification_examples() {
    let t = t();
    let ux = SymExpr::var(VarId::u("t", MultiIndex(vec![0, 1])));
    assert_eq!(classify(&ux, &t, 1), Simplicity::Transport(1));
    assert_eq!(classify(&ux.scale(qi(2)), &t, 1), Simplicity::Violation);
    assert_eq!(classify(&ux.mul(&gd(0)), &t, 1), Simplicity::Violation);
    assert_eq!(classify(&gd(2).mul(&gd(0)), &t, 1), Simplicity::Nond);
    assert_eq!(classify(&SymExpr::constant(qi(3)), &t, 1), Simplicity::Nond);
    let uy = SymExpr::var(VarId::u("t", MultiIndex(vec![0, 0, 1])));
    assert_eq!(classify(&uy, &t, 2), Simplicity::Transport(2));
}

#[test]
fn dual_counterterms_match_the_tangent() {
    let m = preset("she").model();
    let dual = only(m.dual_equation().unwrap());
    let tangent = only(m.tangent_equation(true).unwrap());
    assert_eq!(dual.grouped(), tangent.grouped());
    let source = dual.terms.last().unwrap();
    assert_eq!(source.kind, TermKind::Source);
    assert_eq!(source.pretty("w"), "phi");
    for t in &dual.terms[..dual.terms.len() - 1] {
        assert_eq!(t.expr.w_degrees(), [1].into(), "{}", t.pretty("w"));
    }
    assert!(!dual.terms.iter().any(|t| matches!(t.kind, TermKind::CameronMartin(_))));
}

#[test]
fn additive_dual_equation() {
    let dual = only(preset("she-additive").model().dual_equation().unwrap());
    let pretty: Vec<String> = dual.terms.iter().map(|t| t.pretty("w")).collect();
    assert_eq!(pretty, ["f'(u)·w", "phi"]);
}

#[test]
fn filtering_does_not_change_the_equation() {
    for name in ["she", "phi4-2", "phi4-3"] {
        let m = preset(name).model();
        let a = only(m.renormalized_equation(true).unwrap());
        let b = only(m.renormalized_equation(false).unwrap());
        let pa: Vec<String> = a.terms.iter().map(|t| t.pretty("u")).collect();
        let pb: Vec<String> = b.terms.iter().map(|t| t.pretty("u")).collect();
        assert_eq!(pa, pb, "{name}");
    }
}

#[test]
fn unassigned_constants_default_to_symbols() {
    let eq = only(preset("phi4-2").model().renormalized_equation(true).unwrap());
    assert!(!eq.missing.is_empty());
    for t in eq.counterterms() {
        assert!(t.constant.as_ref().unwrap().render().starts_with("c["));
    }
    assert!(eq.notices.iter().any(|n| n.contains("defaulted")));
}

#[test]
fn dupsilon_identity_on_presets() {
    for name in ["she", "she-additive", "phi4-2", "phi4-3", "phi6-2"] {
        let rep = verify_dupsilon_family(&preset(name).model()).unwrap();
        assert!(rep.passed, "{name}: {:?}", rep.failures);
    }
    let rep = verify_dupsilon_family(&preset("she").model()).unwrap();
    assert!(rep.checked >= 5);
}

#[test]
fn dupsilon_residual_of_the_cherry_is_zero() {
    let m = preset("she").model();
    assert!(dupsilon_residual(&cherry(), &m).unwrap().is_zero());
    let (ok, r) = verify_dupsilon_identity(&prod(&[i(&cherry()), xi()]), &m).unwrap();
    assert!(ok, "{}", r.pretty());
}

#[test]
fn symmetry_lemma_on_she() {
    let m = preset("she").model();
    let rep = verify_symmetry_lemma(&m, qi(0), &|t| t.symmetry_factor()).unwrap();
    assert!(rep.passed, "{:?}", rep.failures);
    assert!(rep.lemma && rep.per_tree && rep.rederived);
    assert!(rep.dual_trees > 0);
}

#[test]
fn symmetry_lemma_with_a_single_noise() {
    let m = preset("she-additive").model();
    let rep = verify_symmetry_lemma(&m, qi(0), &|t| t.symmetry_factor()).unwrap();
    assert!(rep.passed, "{:?}", rep.failures);
}

#[test]
fn symmetry_lemma_detects_wrong_factors() {
    let m = preset("she").model();
    let rep = verify_symmetry_lemma(&m, qi(0), &|_| 1).unwrap();
    assert!(!rep.passed);
    assert!(!rep.failures.is_empty());
}

#[test]
fn family_members_carry_their_symmetry_factor() {
    let m = preset("she").model();
    for c in m.family(&m.rule, &t(), q(1, 2), false, false).unwrap() {
        let dec: u64 = c.tree.node_ids().map(|u| c.tree.node_dec(u).factorial()).product();
        assert_eq!(c.symmetry, automorphisms(&c.tree) * dec, "{}", c.code);
    }
}

#[test]
fn reroot_properties_on_the_she_dual_family() {
    let m = preset("she").model();
    let fam = m.dual_family(&t(), qi(0)).unwrap();
    assert!(!fam.is_empty());
    let rep = verify_phi_properties(&fam, &m).unwrap();
    assert!(rep.passed, "{rep:?}");
    assert!(rep.involution.checked > 0);
    let rt = verify_distinguished_round_trip(&fam).unwrap();
    assert!(rt.passed && rt.checked == fam.len());
}

#[test]
fn characterization_of_dual_trees() {
    for name in ["she", "phi4-2"] {
        let rep = verify_characterization(&preset(name).model(), qi(0)).unwrap();
        assert!(rep.exact, "{name}: {:?} {:?}", rep.only_enumerated, rep.only_generated);
        assert!(rep.enumerated > 0);
    }
}

#[test]
fn supercritical_noise_is_rejected() {
    let mut v: serde_json::Value = serde_json::from_str(presets::text("she").unwrap()).unwrap();
    v["types"]["noises"]["Xi"] = serde_json::json!({ "hom": "-2-kappa", "reg": "-2-kappa" });
    let spec = SpecFile::from_json(&v).unwrap();
    let m = spec.model();
    assert!(matches!(m.renormalized_equation(true), Err(Error::NotSubcritical(_))));
}

#[test]
fn systems_are_refused_in_single_equation_mode() {
    let mut v: serde_json::Value = serde_json::from_str(presets::text("she").unwrap()).unwrap();
    v["types"]["kernels"]["s"] = serde_json::json!({ "hom": "2", "reg": "1/2" });
    v["rule"]["s"] = serde_json::json!([[]]);
    v["nonlinearity"]["s"] = serde_json::json!({ "F": "0" });
    v.as_object_mut().unwrap().remove("constants");
    let spec = SpecFile::from_json(&v).unwrap();
    assert!(matches!(verify_dupsilon_family(&spec.model()), Err(Error::Mode(_))));
}

#[test]
fn equation_json_lists_terms() {
    let eq = only(preset("she").model().tangent_equation(true).unwrap());
    let j = eq.to_json();
    assert_eq!(j["which"], "tangent");
    assert_eq!(j["terms"].as_array().unwrap().len(), eq.terms.len());
    assert!(j["grouped"].as_array().unwrap().iter().any(|g| g["constant"] == "C1"));
}

#[test]
fn characterization_mismatches_come_from_decorated_roots() {
    // X_i·I(Ξ)² as a dual tree keeps ∂_i w at its root while every base
    // preimage X_i·I(Ξ)³ has the vanishing factor ∂_i(D³F).
    let m = preset("phi4-3").model();
    let rep = verify_characterization(&m, qi(0)).unwrap();
    assert!(!rep.exact && rep.passed);
    assert!(rep.only_generated.is_empty());
    assert_eq!(rep.explained, rep.only_enumerated);
    assert_eq!(rep.explained.len(), 3);
    let she = verify_characterization(&preset("she").model(), qi(0)).unwrap();
    assert!(she.exact && she.explained.is_empty());
}
