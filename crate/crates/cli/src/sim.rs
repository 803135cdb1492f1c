//! Numerical commands driven by the `simulation` section.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use mallitree_numerics::solver::{
    check_duality, check_duality_refinement, check_frechet, solve_dual_adjoint, solve_dual_pde, solve_forward, solve_tangent,
};
use mallitree_numerics::{mollify, sample_white_noise, Field, SimulationSpec};
use serde_json::{json, Value};

use crate::commands::SCHEMA_VERSION;
use crate::failure::{code, CmdResult, Failure};
use crate::spec::Loaded;

/// Tolerances reported as `passed` by `check-duality`.
pub const ADJOINT_TOL: f64 = 1e-8;
pub const PDE_TOL: f64 = 0.05;
pub const GAP_RATIO_TOL: f64 = 0.6;

fn section(spec: &Loaded) -> Result<SimulationSpec, Failure> {
    let v = spec.spec.simulation.as_ref().ok_or_else(|| Failure::new(code::SPEC, "spec has no `simulation` section"))?;
    Ok(SimulationSpec::from_json(v)?)
}

struct Inputs {
    xi: Field,
    h: Field,
    phi: Field,
}

fn inputs(s: &SimulationSpec, seed: u64) -> Result<Inputs, Failure> {
    let c = &s.config;
    Ok(Inputs {
        xi: mollify(&sample_white_noise(c.grid, seed), &c.mollifier)?,
        h: mollify(&Field::from_fn(c.grid, |t, x| s.h.eval(t, x)), &c.mollifier)?,
        phi: Field::from_fn(c.grid, |t, x| s.phi.eval(t, x)),
    })
}

fn envelope(command: &str, spec: &Loaded, s: &SimulationSpec, seed: u64) -> serde_json::Map<String, Value> {
    let g = s.config.grid;
    let mut m = serde_json::Map::new();
    m.insert("command".into(), json!(command));
    m.insert("schema_version".into(), json!(SCHEMA_VERSION));
    m.insert("spec".into(), json!(spec.spec.name));
    m.insert("seed".into(), json!(seed));
    m.insert("grid".into(), json!({"nx": g.nx, "nt": g.nt, "dt": g.dt, "t_final": g.t_final()}));
    m.insert("eps".into(), json!(s.config.mollifier.eps));
    m
}

fn write_csv(dir: &Path, name: &str, f: &Field) -> Result<String, Failure> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    f.write_csv(BufWriter::new(File::create(&path)?))?;
    Ok(path.display().to_string())
}

fn write_metrics(dir: Option<&Path>, m: &mut serde_json::Map<String, Value>, files: Vec<String>) -> Result<(), Failure> {
    if let Some(dir) = dir {
        m.insert("files".into(), json!(files));
        std::fs::create_dir_all(dir)?;
        let text = serde_json::to_string_pretty(&Value::Object(m.clone())).expect("metrics serialize");
        std::fs::write(dir.join("metrics.json"), text)?;
    }
    Ok(())
}

fn field_stats(f: &Field) -> Value {
    let last = f.row(f.grid.nt);
    let mean = last.iter().sum::<f64>() / last.len() as f64;
    json!({"l2": f.l2(), "max_abs": f.max_abs(), "final_mean": mean})
}

pub fn simulate(spec: &Loaded, seed: Option<u64>, out: Option<&Path>) -> CmdResult {
    let s = section(spec)?;
    let seed = seed.unwrap_or(s.seed);
    let inp = inputs(&s, seed)?;
    let u = solve_forward(&s.config, &inp.xi)?;
    let mut m = envelope("simulate", spec, &s, seed);
    m.insert("u".into(), field_stats(&u));
    let files = match out {
        Some(dir) => vec![write_csv(dir, "u.csv", &u)?, write_csv(dir, "xi.csv", &inp.xi)?],
        None => vec![],
    };
    write_metrics(out, &mut m, files)?;
    Ok(Value::Object(m))
}

pub fn check_duality_cmd(spec: &Loaded, seed: Option<u64>, out: Option<&Path>) -> CmdResult {
    let s = section(spec)?;
    let seed = seed.unwrap_or(s.seed);
    let c = &s.config;
    let inp = inputs(&s, seed)?;
    let report = check_duality(c, &inp.xi, &inp.h, &inp.phi)?;
    let refined = check_duality_refinement(c, seed, |t, x| s.h.eval(t, x), |t, x| s.phi.eval(t, x))?;
    let passed = report.adjoint_residual <= ADJOINT_TOL && report.pde_residual <= PDE_TOL && refined.gap_ratio <= GAP_RATIO_TOL;
    let mut m = envelope("check-duality", spec, &s, seed);
    m.insert("passed".into(), json!(passed));
    m.insert("tolerances".into(), json!({"adjoint": ADJOINT_TOL, "pde": PDE_TOL, "gap_ratio": GAP_RATIO_TOL}));
    m.insert("duality".into(), serde_json::to_value(&report).expect("report serializes"));
    m.insert("refinement".into(), serde_json::to_value(&refined).expect("report serializes"));
    let files = match out {
        Some(dir) => {
            let u = solve_forward(c, &inp.xi)?;
            vec![
                write_csv(dir, "u.csv", &u)?,
                write_csv(dir, "v.csv", &solve_tangent(c, &u, &inp.xi, &inp.h)?)?,
                write_csv(dir, "w_adjoint.csv", &solve_dual_adjoint(c, &u, &inp.xi, &inp.phi)?)?,
                write_csv(dir, "w_pde.csv", &solve_dual_pde(c, &u, &inp.xi, &inp.phi)?)?,
            ]
        }
        None => vec![],
    };
    write_metrics(out, &mut m, files)?;
    let report = Value::Object(m);
    if passed {
        Ok(report)
    } else {
        Err(Failure::new(code::VERIFY, "duality residuals exceed tolerance").with_report(report))
    }
}

pub fn check_frechet_cmd(spec: &Loaded, seed: Option<u64>, out: Option<&Path>) -> CmdResult {
    let s = section(spec)?;
    let seed = seed.unwrap_or(s.seed);
    let inp = inputs(&s, seed)?;
    let report = check_frechet(&s.config, &inp.xi, &inp.h, &s.frechet_r)?;
    let mut m = envelope("check-frechet", spec, &s, seed);
    m.insert("frechet".into(), serde_json::to_value(&report).expect("report serializes"));
    let files = match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join("frechet.csv");
            let mut text = String::from("r,rel_error\n");
            for r in &report.rows {
                text.push_str(&format!("{},{}\n", r.r, r.rel_error));
            }
            std::fs::write(&path, text)?;
            vec![path.display().to_string()]
        }
        None => vec![],
    };
    write_metrics(out, &mut m, files)?;
    Ok(Value::Object(m))
}
