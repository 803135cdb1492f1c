//! Symbolic commands: tree listings, equations and the identity suite.

use std::f64::consts::TAU;

use itertools::Itertools;
use mallitree::equations::{
    verify_characterization, verify_distinguished_round_trip, verify_dupsilon_family, verify_phi_properties,
    verify_symmetry_lemma, Counterterm, Equation, IdentityReport, Model, Which,
};
use mallitree::extensions::hatted_leaves;
use mallitree::q::{fmt_q, qi};
use mallitree::rules::naive_enumerate;
use mallitree::{DecoratedTree, Q};
use mallitree_numerics::lift::{shift_check, telescope_check, LiftCheck, LiftSetup};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::failure::{code, CmdResult, Failure};
use crate::spec::Loaded;

pub const SCHEMA_VERSION: u32 = 1;

fn envelope(command: &str, spec: &Loaded) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("command".into(), json!(command));
    m.insert("schema_version".into(), json!(SCHEMA_VERSION));
    m.insert("spec".into(), json!(spec.spec.name));
    m
}

fn tree_json(c: &Counterterm) -> Value {
    json!({
        "code": c.code,
        "hom": fmt_q(&c.hom),
        "symmetry": c.symmetry,
        "nonvanishing": c.nonvanishing,
        "edges": c.tree.edge_count(),
    })
}

pub fn trees(spec: &Loaded, cutoff: Q, dual: bool) -> CmdResult {
    let model = spec.spec.model();
    let rule = if dual { model.dual_rule()? } else { model.rule.clone() };
    let mut families = Vec::new();
    for t in model.components() {
        let target = if dual { t.dual()? } else { t };
        let mut fam = model.family(&rule, &target, cutoff, false, false)?;
        fam.sort_by(|a, b| (a.hom, &a.code).cmp(&(b.hom, &b.code)));
        families.push(json!({
            "target": target.to_string(),
            "count": fam.len(),
            "trees": fam.iter().map(tree_json).collect::<Vec<_>>(),
        }));
    }
    let mut m = envelope("trees", spec);
    m.insert("cutoff".into(), json!(fmt_q(&cutoff)));
    m.insert("dual".into(), json!(dual));
    m.insert("families".into(), json!(families));
    if dual {
        // the listing against the set generated by dualizing base trees
        let c = verify_characterization(&model, cutoff).ok();
        m.insert("generated_match".into(), json!(c.map(|c| c.passed)));
    }
    Ok(Value::Object(m))
}

pub fn trees_pretty(report: &Value) -> String {
    let mut out = String::new();
    for f in report["families"].as_array().into_iter().flatten() {
        out.push_str(&format!("# {} trees for {} below {}\n", f["count"], f["target"].as_str().unwrap_or(""), report["cutoff"].as_str().unwrap_or("")));
        out.push_str(&format!("{:>10} {:>4} {:>3}  code\n", "hom", "S", "nv"));
        for t in f["trees"].as_array().into_iter().flatten() {
            out.push_str(&format!(
                "{:>10} {:>4} {:>3}  {}\n",
                t["hom"].as_str().unwrap_or(""),
                t["symmetry"],
                if t["nonvanishing"] == true { "y" } else { "n" },
                t["code"].as_str().unwrap_or(""),
            ));
        }
    }
    out
}

pub fn equations(spec: &Loaded, which: Which) -> CmdResult {
    let model = spec.spec.model();
    let eqs: Vec<Equation> = match which {
        Which::Renorm => model.renormalized_equation(true)?,
        Which::Tangent => model.tangent_equation(true)?,
        Which::Dual => model.dual_equation()?,
    };
    let mut m = envelope("equations", spec);
    m.insert("which".into(), json!(which));
    m.insert("equations".into(), json!(eqs.iter().map(Equation::to_json).collect::<Vec<_>>()));
    Ok(Value::Object(m))
}

pub fn equations_pretty(report: &Value) -> String {
    let mut out = String::new();
    let which = report["which"].as_str().unwrap_or("");
    for eq in report["equations"].as_array().into_iter().flatten() {
        let comp = eq["component"].as_str().unwrap_or("");
        let lhs = match which {
            "renorm" => format!("d_t u_{comp} = Lap u_{comp}"),
            "tangent" => format!("d_t v_{comp} = Lap v_{comp}"),
            _ => format!("-d_t w_{comp} = Lap w_{comp}"),
        };
        let terms: Vec<&str> = eq["terms"].as_array().into_iter().flatten().filter_map(|t| t["pretty"].as_str()).collect();
        out.push_str(&lhs);
        for t in terms {
            out.push_str("\n    + ");
            out.push_str(t);
        }
        out.push('\n');
        for n in eq["notices"].as_array().into_iter().flatten() {
            out.push_str(&format!("# note: {}\n", n.as_str().unwrap_or("")));
        }
    }
    out
}

fn h_fn(t: f64, x: f64) -> f64 {
    0.5 + (TAU * x + 0.3).sin() * (-t).exp()
}

fn k_fn(t: f64, x: f64) -> f64 {
    (2.0 * TAU * x).cos() * (1.0 + 0.5 * t) + 0.2 * (TAU * x).sin()
}

fn identity_json(r: &IdentityReport) -> Value {
    serde_json::to_value(r).expect("reports serialize")
}

fn lift_report(name: &str, checks: Vec<LiftCheck>, tol: f64, notices: Vec<String>) -> Value {
    let failures: Vec<Value> = checks
        .iter()
        .filter(|c| !(c.residual <= tol))
        .map(|c| json!({"tree": c.tree, "passed": false, "residual": format!("{:e}", c.residual)}))
        .collect();
    let worst = checks.iter().map(|c| c.residual).fold(0.0, f64::max);
    json!({
        "name": name,
        "passed": failures.is_empty(),
        "checked": checks.len(),
        "failures": failures,
        "notices": notices,
        "tolerance": tol,
        "max_residual": worst,
    })
}

/// Every ordering of every set of at most three noise leaves, hatted.
fn telescope_cases(tree: &DecoratedTree) -> mallitree::Result<Vec<(DecoratedTree, Vec<usize>)>> {
    let leaves = tree.noise_edges();
    let mut out = Vec::new();
    for size in 1..=leaves.len().min(3) {
        for subset in leaves.iter().copied().combinations(size) {
            let mut t = tree.clone();
            for &u in &subset {
                let ty = t.edge(u).unwrap().ty.labelled("hat")?;
                t.set_edge_type(u, ty)?;
            }
            let hatted = hatted_leaves(&t);
            for order in hatted.iter().copied().permutations(hatted.len()) {
                out.push((t.clone(), order));
            }
        }
    }
    Ok(out)
}

fn lift_checks(model: &Model, tol: f64) -> Result<Vec<Value>, Failure> {
    let t = model.single_component()?;
    if model.table.dim() != 1 {
        let notice = vec![format!("skipped: quadrature lift needs one space dimension, spec has {}", model.table.dim())];
        return Ok(vec![lift_report("shift", vec![], tol, notice.clone()), lift_report("telescope", vec![], tol, notice)]);
    }
    let trees: Vec<DecoratedTree> = naive_enumerate(&model.rule, &model.table, &t, 4, qi(3), 3)?.into_values().collect();
    let setup = LiftSetup::default();
    let shift: Vec<LiftCheck> = trees
        .par_iter()
        .map(|tr| shift_check(tr, &h_fn, &k_fn, &setup))
        .collect::<Result<_, _>>()?;
    let cases: Vec<(DecoratedTree, Vec<usize>)> =
        trees.iter().map(telescope_cases).flatten_ok().collect::<Result<_, _>>()?;
    let tele: Vec<LiftCheck> = cases
        .par_iter()
        .map(|(tr, order)| telescope_check(tr, order, &h_fn, &h_fn, &k_fn, &setup))
        .collect::<Result<_, _>>()?;
    Ok(vec![lift_report("shift", shift, tol, vec![]), lift_report("telescope", tele, tol, vec![])])
}

pub fn verify(spec: &Loaded, cutoff: Q, corrupt_symmetry: bool) -> CmdResult {
    let mut model = spec.spec.model();
    model.enum_opts.cutoff = cutoff;
    let t = model.single_component()?;
    let symmetry: &(dyn Fn(&DecoratedTree) -> u64 + Sync) =
        if corrupt_symmetry { &|tr: &DecoratedTree| tr.symmetry_factor() + 1 } else { &|tr: &DecoratedTree| tr.symmetry_factor() };

    let mut checks = Vec::new();
    let dups = verify_dupsilon_family(&model)?;
    let negative = dups.checked;
    checks.push(identity_json(&dups));

    let sym = verify_symmetry_lemma(&model, cutoff, symmetry)?;
    checks.push(json!({
        "name": "symmetry",
        "passed": sym.passed,
        "checked": sym.dual_trees,
        "lemma": sym.lemma,
        "per_tree": sym.per_tree,
        "rederived": sym.rederived,
        "failures": sym.failures,
        "notices": sym.notices,
    }));

    let dual = model.dual_family(&t, cutoff)?;
    let phi = verify_phi_properties(&dual, &model)?;
    for r in [&phi.involution, &phi.symmetry, &phi.upsilon] {
        checks.push(identity_json(r));
    }
    checks.push(identity_json(&verify_distinguished_round_trip(&dual)?));

    let ch = verify_characterization(&model, cutoff)?;
    let mut failures: Vec<Value> = ch
        .only_enumerated
        .iter()
        .filter(|c| !ch.explained.contains(c))
        .map(|c| json!({"tree": c, "passed": false, "residual": "enumerated but not generated"}))
        .collect();
    failures.extend(ch.only_generated.iter().map(|c| json!({"tree": c, "passed": false, "residual": "generated but not enumerated"})));
    let mut notices = vec![];
    if !ch.explained.is_empty() {
        notices.push(format!(
            "{} enumerated trees have no preimage but are non-vanishing only through derivatives of w at a decorated node: {}",
            ch.explained.len(),
            ch.explained.iter().map(|c| c.as_str()).join(", "),
        ));
    }
    checks.push(json!({
        "name": "characterization",
        "passed": ch.passed,
        "exact": ch.exact,
        "checked": ch.enumerated,
        "failures": failures,
        "explained": ch.explained,
        "notices": notices,
    }));

    checks.extend(lift_checks(&model, spec.spec.verify.lift_tolerance)?);

    let passed = checks.iter().all(|c| c["passed"] == true);
    let mut m = envelope("verify", spec);
    m.insert("cutoff".into(), json!(fmt_q(&cutoff)));
    m.insert("passed".into(), json!(passed));
    m.insert("family_sizes".into(), json!({"negative": negative, "dual": dual.len(), "base": sym.base_trees}));
    m.insert("checks".into(), json!(checks));
    let report = Value::Object(m);
    if passed {
        Ok(report)
    } else {
        let names: Vec<&str> = report["checks"].as_array().unwrap().iter().filter(|c| c["passed"] != true).filter_map(|c| c["name"].as_str()).collect();
        Err(Failure::new(code::VERIFY, format!("failed checks: {}", names.join(", "))).with_report(report))
    }
}
