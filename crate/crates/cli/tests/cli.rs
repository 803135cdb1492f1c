use std::path::Path;
use std::process::{Command, Output};

use mallitree::specfile::presets;
use serde_json::{json, Value};

const BIN: &str = env!("CARGO_BIN_EXE_mallitree");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("MALLITREE_THREADS").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn report(o: &Output) -> Value {
    let v: Value = serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)));
    let schema: Value = serde_json::from_str(include_str!("../schema/report.schema.json")).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(&v).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
    let again: Value = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
    assert_eq!(again, v);
    v
}

fn ok(args: &[&str]) -> Value {
    let o = run(args);
    assert_eq!(code(&o), 0, "{args:?}: {}", stderr(&o));
    report(&o)
}

fn preset_json(name: &str) -> Value {
    serde_json::from_str(presets::text(name).unwrap()).unwrap()
}

fn write_spec(dir: &Path, v: &Value) -> String {
    let p = dir.join("spec.json");
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p.display().to_string()
}

const CHERRY: &str = "0(){Xi^(0,0)->0(){},t^(0,0)->0(){Xi^(0,0)->0(){}}}";

#[test]
fn she_listing_contains_the_cherry() {
    let r = ok(&["trees", "preset:she", "--cutoff", "0"]);
    let trees = r["families"][0]["trees"].as_array().unwrap();
    let cherry = trees.iter().find(|t| t["code"] == CHERRY).unwrap();
    assert_eq!(cherry["hom"], "-51/50");
    assert_eq!(cherry["symmetry"], 1);
    assert_eq!(cherry["nonvanishing"], true);
    assert_eq!(r["families"][0]["count"], 11);
}

#[test]
fn cutoff_may_mention_kappa() {
    let r = ok(&["trees", "preset:she", "--cutoff", "-1-kappa"]);
    let homs: Vec<&str> = r["families"][0]["trees"].as_array().unwrap().iter().map(|t| t["hom"].as_str().unwrap()).collect();
    assert_eq!(homs, ["-151/100", "-51/50"]);
}

#[test]
fn dual_listing_matches_the_generated_set() {
    let r = ok(&["trees", "preset:she", "--dual"]);
    assert_eq!(r["generated_match"], true);
    assert_eq!(r["families"][0]["target"], "t~");
    assert!(r["families"][0]["count"].as_u64().unwrap() > 0);
}

#[test]
fn missing_reg_entry_names_the_type() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = preset_json("she");
    v["types"]["kernels"]["t"].as_object_mut().unwrap().remove("reg");
    let o = run(&["trees", &write_spec(dir.path(), &v)]);
    assert_eq!(code(&o), 2);
    let e = stderr(&o);
    assert!(e.contains("/types/kernels/t") && e.contains("reg"), "{e}");
}

#[test]
fn malformed_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, "{ not json").unwrap();
    assert_eq!(code(&run(&["trees", p.to_str().unwrap()])), 2);
    assert_eq!(code(&run(&["trees", "preset:nope"])), 2);
    assert_eq!(code(&run(&["trees", "/nonexistent/spec.json"])), 2);
    let mut v = preset_json("she");
    v["extra"] = json!(1);
    assert_eq!(code(&run(&["trees", &write_spec(dir.path(), &v)])), 2);
}

#[test]
fn supercritical_spec_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = preset_json("she");
    v["types"]["noises"]["Xi"] = json!({"hom": "-2-kappa", "reg": "-2-kappa"});
    let o = run(&["trees", &write_spec(dir.path(), &v)]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn tangent_equation_of_she() {
    let r = ok(&["equations", "preset:she", "--which", "tangent"]);
    let terms = r["equations"][0]["terms"].as_array().unwrap();
    let hit = terms.iter().find(|t| t["pretty"].as_str().unwrap().contains("(g''(u)g(u)+g'(u)^2)·v")).unwrap();
    assert_eq!(hit["constant"], "C1");
    assert!(terms.iter().any(|t| t["kind"] == "cameron-martin"));
}

#[test]
fn pretty_equations() {
    let o = run(&["equations", "preset:she", "--which", "dual", "--pretty"]);
    assert_eq!(code(&o), 0);
    let s = String::from_utf8(o.stdout).unwrap();
    assert!(s.starts_with("-d_t w_t = Lap w_t"), "{s}");
    assert!(s.contains("+ C1*(g''(u)g(u)+g'(u)^2)·w"));
    assert!(s.trim_end().ends_with("+ phi"));
}

#[test]
fn gradient_counterterms_block_the_dual_equation() {
    let o = run(&["equations", "preset:kpz-like", "--which", "dual"]);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("tree 0(){"), "{}", stderr(&o));
    assert_eq!(code(&run(&["equations", "preset:kpz-like", "--which", "renorm"])), 0);
}

#[test]
fn additive_noise_has_no_counterterms() {
    let r = ok(&["equations", "preset:she-additive", "--which", "renorm"]);
    let terms = r["equations"][0]["terms"].as_array().unwrap();
    assert!(!terms.iter().any(|t| t["kind"] == "counterterm"));
    assert_eq!(r["equations"][0]["grouped"].as_array().unwrap().len(), 0);
}

#[test]
fn verify_passes_on_she() {
    let r = ok(&["verify", "preset:she"]);
    assert_eq!(r["passed"], true);
    let names: Vec<&str> = r["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    for n in ["dupsilon", "symmetry", "phi-involution", "phi-symmetry", "phi-upsilon", "characterization", "shift", "telescope"] {
        assert!(names.contains(&n), "{n}");
    }
    assert!(r["family_sizes"]["negative"].as_u64().unwrap() >= 5);
}

#[test]
fn verify_polynomial_models() {
    for p in ["preset:phi4-2", "preset:phi4-3", "preset:phi6-2"] {
        let r = ok(&["verify", p]);
        assert_eq!(r["passed"], true, "{p}");
    }
}

#[test]
fn corrupted_symmetry_fails_with_residuals() {
    let o = run(&["verify", "preset:she", "--corrupt-symmetry"]);
    assert_eq!(code(&o), 5);
    let r = report(&o);
    assert_eq!(r["passed"], false);
    let sym = r["checks"].as_array().unwrap().iter().find(|c| c["name"] == "symmetry").unwrap();
    assert_eq!(sym["passed"], false);
    assert!(sym["failures"][0]["residual"].as_str().unwrap().contains("S(q)"));
    assert!(stderr(&o).contains("symmetry"));
}

#[test]
fn empty_family_passes_vacuously() {
    let r = ok(&["verify", "preset:she", "--cutoff", "-2"]);
    assert_eq!(r["passed"], true);
    let dups = &r["checks"][0];
    assert_eq!(dups["checked"], 0);
    assert!(dups["notices"][0].as_str().unwrap().contains("vacuous"));
}

#[test]
fn duality_and_frechet_metrics() {
    let d = ok(&["check-duality", "preset:she"]);
    assert!(d["duality"]["adjoint_residual"].as_f64().unwrap() <= 1e-8);
    assert!(d["duality"]["pde_residual"].as_f64().unwrap() <= 0.05);
    assert!(d["refinement"]["gap_ratio"].as_f64().unwrap() <= 0.6);
    let f = ok(&["check-frechet", "preset:she"]);
    let order = f["frechet"]["order"].as_f64().unwrap();
    assert!((0.8..=1.2).contains(&order), "{order}");
    assert_eq!(f["frechet"]["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn identical_seeds_give_identical_outputs() {
    let a = run(&["simulate", "preset:she", "--seed", "3"]);
    let b = run(&["simulate", "preset:she", "--seed", "3"]);
    let c = run(&["simulate", "preset:she", "--seed", "4"]);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    report(&a);
}

#[test]
fn out_directory_and_spec_left_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), &preset_json("she"));
    let before = std::fs::read(&spec).unwrap();
    let out = dir.path().join("run");
    let r = ok(&["check-duality", &spec, "--out", out.to_str().unwrap()]);
    assert_eq!(std::fs::read(&spec).unwrap(), before);
    for f in ["u.csv", "v.csv", "w_adjoint.csv", "w_pde.csv", "metrics.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let metrics: Value = serde_json::from_str(&std::fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["duality"], r["duality"]);
    let csv = std::fs::read_to_string(out.join("u.csv")).unwrap();
    assert!(csv.starts_with("t,x,value\n"));
    assert_eq!(csv.lines().count(), 1 + 501 * 128);
}

#[test]
fn under_resolved_mollifier_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = preset_json("she");
    v["simulation"]["eps"] = json!("1/200");
    let o = run(&["simulate", &write_spec(dir.path(), &v)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("under-resolved"), "{}", stderr(&o));
}

#[test]
fn blow_up_exits_6_with_the_step() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = preset_json("she");
    v["simulation"]["f"] = json!({"kind": "poly", "coeffs": [0.0, 0.0, 0.0, 400.0]});
    v["simulation"]["u0"] = json!({"amp": 3.0, "mode": 1, "phase": 0.0});
    let o = run(&["simulate", &write_spec(dir.path(), &v)]);
    assert_eq!(code(&o), 6, "{}", stderr(&o));
    assert!(stderr(&o).contains("step"));
}

#[test]
fn missing_simulation_section_exits_2() {
    assert_eq!(code(&run(&["simulate", "preset:phi4-2"])), 2);
}

#[test]
fn thread_count_does_not_change_results() {
    let serial = Command::new(BIN).args(["verify", "preset:she"]).env("MALLITREE_THREADS", "1").output().unwrap();
    let parallel = Command::new(BIN).args(["verify", "preset:she"]).env("MALLITREE_THREADS", "3").output().unwrap();
    assert_eq!(code(&serial), 0);
    assert_eq!(serial.stdout, parallel.stdout);
    let bad = Command::new(BIN).args(["trees", "preset:she"]).env("MALLITREE_THREADS", "many").output().unwrap();
    assert_eq!(code(&bad), 2);
}

#[test]
fn presets_match_the_spec_schema() {
    let schema: Value = serde_json::from_str(include_str!("../schema/spec.schema.json")).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    for name in presets::NAMES {
        let v = preset_json(name);
        assert!(validator.is_valid(&v), "{name}");
    }
}

#[test]
fn characterization_mismatches_from_decorated_nodes_are_explained() {
    let r = ok(&["verify", "preset:phi4-3"]);
    let ch = r["checks"].as_array().unwrap().iter().find(|c| c["name"] == "characterization").unwrap();
    assert_eq!(ch["exact"], false);
    let explained = ch["explained"].as_array().unwrap();
    assert_eq!(explained.len(), 3);
    assert!(explained.iter().all(|c| c.as_str().unwrap().starts_with("X(")));
    assert!(ch["notices"][0].as_str().unwrap().contains("derivatives of w"));
    let she = ok(&["verify", "preset:she"]);
    let ch = she["checks"].as_array().unwrap().iter().find(|c| c["name"] == "characterization").unwrap();
    assert_eq!(ch["exact"], true);
}
