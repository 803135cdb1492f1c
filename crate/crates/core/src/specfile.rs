//! The JSON spec file driving every command, plus the bundled presets.

use std::path::Path;

use serde_json::Value;

use crate::equations::{Model, RenormConstants};
use crate::error::{Error, Result};
use crate::q::{parse_linear, Q};
use crate::rules::{EnumOptions, Rule};
use crate::symbolic::NonlinearitySpec;
use crate::types::{Scaling, TypeTable};

const TOP_KEYS: &[&str] = &["name", "description", "types", "rule", "nonlinearity", "constants", "simulation", "verify"];

/// Settings of the `verify` section.
#[derive(Debug, Clone)]
pub struct VerifySection {
    pub cutoff: Q,
    pub max_node_degree: u32,
    pub dual_cap: u32,
    pub seed: u64,
    pub lift_tolerance: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self { cutoff: Q::from_integer(0), max_node_degree: 10, dual_cap: 3, seed: 0, lift_tolerance: 1e-6 }
    }
}

#[derive(Debug, Clone)]
pub struct SpecFile {
    pub name: String,
    pub table: TypeTable,
    pub kappa: Q,
    pub rule: Rule,
    pub nonlinearity: NonlinearitySpec,
    pub constants: RenormConstants,
    /// Parsed by the numerics crate.
    pub simulation: Option<Value>,
    pub verify: VerifySection,
}

fn obj<'a>(v: &'a Value, what: &str) -> Result<&'a serde_json::Map<String, Value>> {
    v.as_object().ok_or_else(|| Error::Spec(format!("`{what}` must be an object")))
}

fn rational(v: &Value, what: &str, params: &[(&str, Q)]) -> Result<Q> {
    match v {
        Value::String(s) => parse_linear(s, params),
        Value::Number(n) if n.is_i64() => Ok(Q::from_integer(n.as_i64().unwrap())),
        _ => Err(Error::Spec(format!("`{what}` must be a \"p/q\" string"))),
    }
}

fn check_keys(map: &serde_json::Map<String, Value>, allowed: &[&str], what: &str) -> Result<()> {
    for k in map.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(Error::Spec(format!("unknown key `{k}` in `{what}`")));
        }
    }
    Ok(())
}

impl SpecFile {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Spec(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str(&text)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn from_str(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::Spec(format!("invalid JSON: {e}")))?;
        Self::from_json(&v)
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let top = obj(v, "spec")?;
        check_keys(top, TOP_KEYS, "spec")?;
        for k in ["types", "rule", "nonlinearity"] {
            if !top.contains_key(k) {
                return Err(Error::Spec(format!("missing section `{k}`")));
            }
        }
        let name = top.get("name").and_then(|n| n.as_str()).unwrap_or("unnamed").to_string();
        let (table, kappa) = parse_types(&top["types"])?;
        let rule = Rule::from_json(&top["rule"], &table)?;
        let nonlinearity = NonlinearitySpec::from_json(&top["nonlinearity"], &table)?;
        let constants = match top.get("constants") {
            Some(c) => RenormConstants::from_json(c, &table)?,
            None => RenormConstants::new(),
        };
        let verify = match top.get("verify") {
            Some(s) => parse_verify(s, kappa)?,
            None => VerifySection::default(),
        };
        Ok(Self { name, table, kappa, rule, nonlinearity, constants, simulation: top.get("simulation").cloned(), verify })
    }

    pub fn model(&self) -> Model {
        let mut m = Model::new(self.table.clone(), self.rule.clone(), self.nonlinearity.clone())
            .with_constants(self.constants.clone());
        m.enum_opts = EnumOptions { max_node_degree: self.verify.max_node_degree, ..EnumOptions::negative(self.verify.cutoff) };
        m.dual_cap = self.verify.dual_cap;
        m
    }
}

fn parse_types(v: &Value) -> Result<(TypeTable, Q)> {
    let m = obj(v, "types")?;
    check_keys(m, &["scaling", "kappa", "theta", "kernels", "noises"], "types")?;
    let weights: Vec<u32> = serde_json::from_value(m.get("scaling").cloned().ok_or_else(|| Error::Spec("missing `types.scaling`".into()))?)
        .map_err(|_| Error::Spec("`types.scaling` must be an array of positive integers".into()))?;
    let scaling = Scaling::new(weights)?;
    let kappa = match m.get("kappa") {
        Some(k) => rational(k, "types.kappa", &[])?,
        None => Q::new(1, 100),
    };
    let params = [("kappa", kappa)];
    let mut table = TypeTable::new(scaling);
    if let Some(t) = m.get("theta") {
        table = table.with_theta(rational(t, "types.theta", &params)?);
    }
    for (section, noise) in [("kernels", false), ("noises", true)] {
        let Some(s) = m.get(section) else {
            return Err(Error::Spec(format!("missing `types.{section}`")));
        };
        for (name, info) in obj(s, section)? {
            let info = obj(info, name)?;
            check_keys(info, &["hom", "reg"], name)?;
            let hom = rational(info.get("hom").ok_or_else(|| Error::Spec(format!("missing hom for type `{name}`")))?, name, &params)?;
            let reg = info.get("reg").ok_or_else(|| Error::Spec(format!("missing reg entry for type `{name}`")))?;
            let reg = Some(rational(reg, name, &params)?);
            table = if noise { table.with_noise(name, hom, reg) } else { table.with_kernel(name, hom, reg) };
        }
    }
    table.validate()?;
    Ok((table, kappa))
}

fn parse_verify(v: &Value, kappa: Q) -> Result<VerifySection> {
    let m = obj(v, "verify")?;
    check_keys(m, &["cutoff", "max_node_degree", "dual_cap", "seed", "lift_tolerance"], "verify")?;
    let mut out = VerifySection::default();
    if let Some(c) = m.get("cutoff") {
        out.cutoff = rational(c, "verify.cutoff", &[("kappa", kappa)])?;
    }
    let uint = |k: &str| -> Result<Option<u64>> {
        m.get(k).map(|x| x.as_u64().ok_or_else(|| Error::Spec(format!("`verify.{k}` must be a non-negative integer")))).transpose()
    };
    if let Some(x) = uint("max_node_degree")? {
        out.max_node_degree = x as u32;
    }
    if let Some(x) = uint("dual_cap")? {
        out.dual_cap = x as u32;
    }
    if let Some(x) = uint("seed")? {
        out.seed = x;
    }
    if let Some(x) = m.get("lift_tolerance") {
        out.lift_tolerance = x.as_f64().ok_or_else(|| Error::Spec("`verify.lift_tolerance` must be a number".into()))?;
    }
    Ok(out)
}

/// Spec files shipped with the crate.
pub mod presets {
    use super::SpecFile;
    use crate::error::{Error, Result};

    pub const SHE: &str = include_str!("../../../specs/she.json");
    pub const SHE_ADDITIVE: &str = include_str!("../../../specs/she_additive.json");
    pub const PHI4_3: &str = include_str!("../../../specs/phi4_3.json");
    pub const PHI4_2: &str = include_str!("../../../specs/phi4_2.json");
    pub const PHI6_2: &str = include_str!("../../../specs/phi6_2.json");
    pub const KPZ_LIKE: &str = include_str!("../../../specs/kpz_like.json");

    pub const NAMES: &[&str] = &["she", "she-additive", "phi4-3", "phi4-2", "phi6-2", "kpz-like"];

    pub fn text(name: &str) -> Option<&'static str> {
        Some(match name {
            "she" => SHE,
            "she-additive" => SHE_ADDITIVE,
            "phi4-3" => PHI4_3,
            "phi4-2" => PHI4_2,
            "phi6-2" => PHI6_2,
            "kpz-like" => KPZ_LIKE,
            _ => return None,
        })
    }

    pub fn load(name: &str) -> Result<SpecFile> {
        SpecFile::from_str(text(name).ok_or_else(|| Error::Spec(format!("unknown preset `{name}`")))?)
    }
}
