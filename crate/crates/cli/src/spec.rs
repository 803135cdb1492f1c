//! Spec ingestion: JSON parse, schema validation, then the core loader.

use std::sync::OnceLock;

use mallitree::q::parse_linear;
use mallitree::specfile::{presets, SpecFile};
use mallitree::Q;
use serde_json::Value;

use crate::failure::{code, Failure};

pub const SCHEMA: &str = include_str!("../schema/spec.schema.json");

fn validator() -> &'static jsonschema::Validator {
    static V: OnceLock<jsonschema::Validator> = OnceLock::new();
    V.get_or_init(|| {
        let schema: Value = serde_json::from_str(SCHEMA).expect("bundled schema is valid JSON");
        jsonschema::validator_for(&schema).expect("bundled schema compiles")
    })
}

/// Reads `preset:<name>` or a path.
fn read(source: &str) -> Result<String, Failure> {
    if let Some(name) = source.strip_prefix("preset:") {
        return presets::text(name)
            .map(str::to_string)
            .ok_or_else(|| Failure::new(code::SPEC, format!("unknown preset `{name}`; known: {}", presets::NAMES.join(", "))));
    }
    std::fs::read_to_string(source).map_err(|e| Failure::new(code::SPEC, format!("cannot read {source}: {e}")))
}

/// Schema errors as `path: message` lines.
pub fn schema_errors(v: &Value) -> Vec<String> {
    validator()
        .iter_errors(v)
        .map(|e| {
            let path = e.instance_path().to_string();
            format!("{}: {}", if path.is_empty() { "/" } else { &path }, e)
        })
        .collect()
}

pub struct Loaded {
    pub spec: SpecFile,
}

pub fn load(source: &str) -> Result<Loaded, Failure> {
    let text = read(source)?;
    let raw: Value = serde_json::from_str(&text).map_err(|e| Failure::new(code::SPEC, format!("invalid JSON: {e}")))?;
    let errors = schema_errors(&raw);
    if !errors.is_empty() {
        return Err(Failure::new(code::SPEC, format!("spec does not match the schema:\n  {}", errors.join("\n  "))));
    }
    let spec = SpecFile::from_json(&raw)?;
    Ok(Loaded { spec })
}

/// A cutoff argument, which may mention `kappa`.
pub fn cutoff(arg: Option<&str>, spec: &SpecFile) -> Result<Q, Failure> {
    match arg {
        Some(s) => parse_linear(s, &[("kappa", spec.kappa)]).map_err(|e| Failure::new(code::SPEC, format!("--cutoff: {e}"))),
        None => Ok(spec.verify.cutoff),
    }
}
